use super::DiscreteHypersurface;
use crate::cone::SolidCone;
use crate::density::HomogeneousDensity;
use crate::linalg::{bilinear, dot, Vec3};
use crate::scalar::{csum, Real};
use crate::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SampleGeometry<T: Real> {
    pub point: Vec3<T>,
    pub normal: Vec3<T>,
    pub mean_curvature: T,
    pub sigma2: T,
    /// Support function `g = <X, N>`.
    pub support: T,
    /// Unweighted quadrature weight (`da`).
    pub area: T,
    pub density: T,
    /// `f · da`.
    pub weight: T,
    pub grad_psi: Vec3<T>,
    /// `H_f = nH - <∇ψ, N>`.
    pub h_f: T,
    /// `Ric_f(N, N) = -∇²ψ(N, N)`.
    pub ric_f_nn: T,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BoundaryGeometry<T: Real> {
    pub point: Vec3<T>,
    pub normal: Vec3<T>,
    pub conormal: Vec3<T>,
    /// Unweighted length weight (`dl`, `1` for curves).
    pub length: T,
    pub density: T,
    /// `f · dl`.
    pub weight: T,
    /// `II(N, N)` of `∂M` with respect to its inner normal.
    pub ii_nn: T,
    /// Inner unit normal of `∂M`.
    pub cone_normal: Vec3<T>,
    /// `|<N, n_∂M>|`, zero for orthogonal contact.
    pub orthogonality_error: T,
}

/// Per-sample extrinsic and weighted quantities of a surface.
#[derive(Debug, Clone)]
pub struct GeometryCache<T: Real> {
    pub n: usize,
    pub degree: T,
    pub samples: Vec<SampleGeometry<T>>,
    pub boundary: Vec<BoundaryGeometry<T>>,
}

/// `f(p)`, or zero where the profile vanishes on `∂M`.
pub(crate) fn boundary_density<T: Real>(density: &HomogeneousDensity<T>, cone: &SolidCone<T>, p: &Vec3<T>) -> Result<T> {
    match density.evaluate(cone, p) {
        Ok(v) => Ok(v),
        Err(Error::NonPositiveDensity) | Err(Error::OutsideCone) => match density.value_unchecked(p) {
            Ok(v) => Ok(v),
            Err(Error::NonPositiveDensity) => Ok(T::zero()),
            Err(e) => Err(e),
        },
        Err(e) => Err(e),
    }
}

impl<T: Real> GeometryCache<T> {
    pub fn compute(surface: &DiscreteHypersurface<T>, density: &HomogeneousDensity<T>, cone: &SolidCone<T>) -> Result<Self> {
        let n = surface.n();
        let nf = T::from_usize_lossy(n);
        let k = density.degree();
        if k < T::zero() && !(surface.min_radius() > T::zero()) {
            return Err(Error::VertexSingular {
                radius: surface.min_radius().to_f64_lossy(),
                degree: k.to_f64_lossy(),
            });
        }
        let mut samples = Vec::with_capacity(surface.samples().len());
        for (i, s) in surface.samples().iter().enumerate() {
            let jet = density.ambient_jet(cone, &s.point)?;
            if !jet.f_value.is_finite() || !s.weight.is_finite() {
                return Err(Error::SingularMass { sample: i });
            }
            let gn = dot(&jet.grad_psi, &s.normal);
            samples.push(SampleGeometry {
                point: s.point,
                normal: s.normal,
                mean_curvature: s.mean_curvature,
                sigma2: s.sigma2,
                support: dot(&s.point, &s.normal),
                area: s.weight,
                density: jet.f_value,
                weight: jet.f_value * s.weight,
                grad_psi: jet.grad_psi,
                h_f: nf * s.mean_curvature - gn,
                ric_f_nn: -bilinear(&jet.hess_psi, &s.normal, &s.normal),
            });
        }
        let mut boundary = Vec::with_capacity(surface.boundary().len());
        for b in surface.boundary() {
            let f = boundary_density(density, cone, &b.point)?;
            let cone_normal = cone.inner_normal(&b.point).unwrap_or(b.conormal);
            boundary.push(BoundaryGeometry {
                point: b.point,
                normal: b.normal,
                conormal: b.conormal,
                length: b.weight,
                density: f,
                weight: f * b.weight,
                ii_nn: cone.boundary_second_form(&b.point, &b.normal, &b.normal),
                cone_normal,
                orthogonality_error: dot(&b.normal, &cone_normal).abs(),
            });
        }
        Ok(Self {
            n,
            degree: k,
            samples,
            boundary,
        })
    }

    pub fn h_f(&self) -> Vec<T> {
        self.samples.iter().map(|s| s.h_f).collect()
    }

    pub fn support_function(&self) -> Vec<T> {
        self.samples.iter().map(|s| s.support).collect()
    }

    pub fn weighted_area(&self) -> T {
        csum(self.samples.iter().map(|s| s.weight))
    }

    /// `da_f`-weighted mean and standard deviation of `H_f`.
    pub fn h_f_stats(&self) -> (T, T) {
        let a = self.weighted_area();
        let mean = csum(self.samples.iter().map(|s| s.weight * s.h_f)) / a;
        let var = csum(self.samples.iter().map(|s| s.weight * (s.h_f - mean) * (s.h_f - mean))) / a;
        (mean, var.max(T::zero()).sqrt())
    }

    pub fn max_orthogonality_error(&self) -> T {
        self.boundary
            .iter()
            .map(|b| b.orthogonality_error)
            .fold(T::zero(), |a, b| a.max(b))
    }

    /// `u = n + k + H_f g`. Uses the mean `H_f` when it is constant within
    /// `tol_stationary`; otherwise per-sample `H_f` and the flag is set.
    pub fn barbosa_test_field(&self, tol_stationary: T) -> (Vec<T>, bool) {
        let (mean, std) = self.h_f_stats();
        let nk = T::from_usize_lossy(self.n) + self.degree;
        let constant = std <= tol_stationary * (T::one() + mean.abs());
        let u = self
            .samples
            .iter()
            .map(|s| nk + if constant { mean } else { s.h_f } * s.support)
            .collect();
        (u, !constant)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::density::HomogeneousDensity;
    use crate::surface::DiscreteHypersurface;

    #[test]
    fn cap_f_mean_curvature() {
        let cone = SolidCone::<f64>::circular(3, [0.0, 0.0, 1.0], 0.7).unwrap();
        let s = DiscreteHypersurface::cap(&cone, 2.0, 12).unwrap();
        let geo = GeometryCache::compute(&s, &HomogeneousDensity::radial(1.0), &cone).unwrap();
        for g in &geo.samples {
            assert!((g.h_f - 1.5).abs() < 1e-12);
            assert!((g.support + 2.0).abs() < 1e-12);
        }
        for b in &geo.boundary {
            assert!((b.orthogonality_error).abs() < 1e-8);
            assert!(b.ii_nn.abs() < 1e-12);
        }
        let (u, warn) = geo.barbosa_test_field(1e-6);
        assert!(!warn && u.iter().all(|v| v.abs() < 1e-12));
    }

    #[test]
    fn sphere_through_origin_support_function() {
        let cone = SolidCone::<f64>::full(3).unwrap();
        let c = [0.0, 0.6, 0.8];
        let s = DiscreteHypersurface::sphere_through_origin(&cone, c, None, 16).unwrap();
        let geo = GeometryCache::compute(&s, &HomogeneousDensity::radial(1.0), &cone).unwrap();
        for g in &geo.samples {
            let expect = dot(&c, &g.normal) - 1.0;
            assert!((g.support - expect).abs() < 1e-12);
            assert!((g.h_f - 2.5).abs() < 1e-10);
        }
    }

    #[test]
    fn ellipse_barbosa_field_is_flagged() {
        let cone = SolidCone::<f64>::full(2).unwrap();
        let s = DiscreteHypersurface::ellipsoid(&cone, [0.0, 5.0, 0.0], [2.0, 1.0, 0.0], 64).unwrap();
        let geo = GeometryCache::compute(&s, &HomogeneousDensity::radial(0.0), &cone).unwrap();
        let (_, warn) = geo.barbosa_test_field(1e-6);
        assert!(warn);
    }
}
