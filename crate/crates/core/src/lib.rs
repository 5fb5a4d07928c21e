//! Weighted variational geometry of hypersurfaces in solid cones carrying
//! homogeneous densities.
//!
//! All numerical code is generic over [`Real`] (`f32` or `f64`); the aliases
//! at the crate root fix `f64`.

mod error;

pub mod cone;
pub mod density;
pub mod expr;
pub mod fd;
pub mod linalg;
pub mod measures;
pub mod oracles;
pub mod quadrature;
pub mod scalar;
pub mod stability;
pub mod surface;

pub use error::{Error, Result};
pub use scalar::Real;

pub type Cone = cone::SolidCone<f64>;
pub type Density = density::HomogeneousDensity<f64>;
pub type Surface = surface::DiscreteHypersurface<f64>;
pub type Geometry = surface::GeometryCache<f64>;
