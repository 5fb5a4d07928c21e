//! Discretized compact hypersurfaces in a solid cone.
//!
//! Two backends share one sample/boundary-sample layout so that every
//! integral is a weighted sum over samples:
//!
//! * parametric: tensor grids of Gauss-Legendre (open directions) and
//!   trapezoid (periodic directions) nodes on a [`Chart`];
//! * simplicial: polylines and triangle meshes with lumped vertex weights,
//!   used for P1 finite elements and imports.

pub mod chart;
mod geometry;
mod mesh;

use std::sync::Arc;

use crate::cone::SolidCone;
use crate::linalg::{self, dot, norm, Vec3};
use crate::quadrature::NodeSet;
use crate::scalar::Real;
use crate::{Error, Result};

pub use chart::{Chart, ChartJet, EllipsoidChart, End, ParamDomain, RadialGraphChart, RoundChart, ScaledChart};
pub(crate) use geometry::boundary_density;
pub use geometry::{BoundaryGeometry, GeometryCache, SampleGeometry};
pub use mesh::{Cells, Mesh};

/// Default distance tolerance for boundary markers.
pub const DEFAULT_TOL_BOUNDARY: f64 = 1e-8;

/// Default puncture radius of spheres through the vertex, relative to `r`.
pub const DEFAULT_PUNCTURE: f64 = 1e-3;

/// A quadrature node (parametric) or vertex (simplicial) with its extrinsic
/// geometry.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SurfaceSample<T: Real> {
    pub param: [T; 2],
    pub point: Vec3<T>,
    pub normal: Vec3<T>,
    /// Mean curvature `H = tr(S)/n`.
    pub mean_curvature: T,
    /// `|σ|² = tr(S²)`.
    pub sigma2: T,
    /// Quadrature weight times area element (unweighted `da`).
    pub weight: T,
}

/// A sample of `∂Σ` (which lies on `∂M`).
#[derive(Debug, Clone, PartialEq)]
pub struct BoundarySample<T: Real> {
    pub param: [T; 2],
    pub point: Vec3<T>,
    pub normal: Vec3<T>,
    /// Inner unit conormal `ν` (tangent to `Σ`, pointing into `Σ`).
    pub conormal: Vec3<T>,
    /// Quadrature weight times length element (`1` for curves).
    pub weight: T,
    /// Trace of nodal values: `u(sample) = Σ c u[dof]`.
    pub trace: Vec<(usize, T)>,
}

#[derive(Debug, Clone)]
pub struct ParametricGrid<T: Real> {
    pub chart: Arc<dyn Chart<T>>,
    pub first: NodeSet<T>,
    /// Azimuth nodes for surfaces.
    pub second: Option<NodeSet<T>>,
}

impl<T: Real> ParametricGrid<T> {
    pub fn shape(&self) -> (usize, usize) {
        (self.first.len(), self.second.as_ref().map_or(1, |s| s.len()))
    }
}

#[derive(Debug, Clone)]
pub enum Backend<T: Real> {
    Parametric(ParametricGrid<T>),
    Simplicial(Mesh<T>),
}

#[derive(Debug, Clone)]
pub struct DiscreteHypersurface<T: Real> {
    ambient_dim: usize,
    backend: Backend<T>,
    samples: Vec<SurfaceSample<T>>,
    boundary: Vec<BoundarySample<T>>,
    min_radius: T,
}

/// Normal, metric, second fundamental form and derived curvatures from a jet.
pub(crate) struct JetGeometry<T: Real> {
    pub normal: Vec3<T>,
    pub area_element: T,
    pub mean_curvature: T,
    pub sigma2: T,
}

pub(crate) fn jet_geometry<T: Real>(n: usize, jet: &ChartJet<T>, orientation: T) -> Option<JetGeometry<T>> {
    let normal = chart::chart_normal(n, &jet.d, orientation)?;
    if n == 1 {
        let g = dot(&jet.d[0], &jet.d[0]);
        let h = dot(&jet.dd[0][0], &normal);
        let s = h / g;
        return Some(JetGeometry {
            normal,
            area_element: g.sqrt(),
            mean_curvature: s,
            sigma2: s * s,
        });
    }
    let g = [
        [dot(&jet.d[0], &jet.d[0]), dot(&jet.d[0], &jet.d[1])],
        [dot(&jet.d[1], &jet.d[0]), dot(&jet.d[1], &jet.d[1])],
    ];
    let det = g[0][0] * g[1][1] - g[0][1] * g[1][0];
    if !(det > T::zero()) {
        return None;
    }
    let inv = [[g[1][1] / det, -g[0][1] / det], [-g[1][0] / det, g[0][0] / det]];
    let h = [
        [dot(&jet.dd[0][0], &normal), dot(&jet.dd[0][1], &normal)],
        [dot(&jet.dd[1][0], &normal), dot(&jet.dd[1][1], &normal)],
    ];
    let mut s = [[T::zero(); 2]; 2];
    for i in 0..2 {
        for j in 0..2 {
            s[i][j] = inv[i][0] * h[0][j] + inv[i][1] * h[1][j];
        }
    }
    let tr = s[0][0] + s[1][1];
    let tr2 = s[0][0] * s[0][0] + s[0][1] * s[1][0] + s[1][0] * s[0][1] + s[1][1] * s[1][1];
    Some(JetGeometry {
        normal,
        area_element: det.sqrt(),
        mean_curvature: tr / T::c(2.0),
        sigma2: tr2,
    })
}

fn inner_conormal<T: Real>(n: usize, jet: &ChartJet<T>, into_increasing: bool) -> Vec3<T> {
    let sign = if into_increasing { T::one() } else { -T::one() };
    let raw = if n == 1 {
        jet.d[0]
    } else {
        let t = linalg::normalize(&jet.d[1]).unwrap_or(jet.d[1]);
        linalg::axpy(&jet.d[0], -dot(&jet.d[0], &t), &t)
    };
    linalg::scale(sign, &linalg::normalize(&raw).unwrap_or(raw))
}

impl<T: Real> DiscreteHypersurface<T> {
    /// Tensor-grid discretization of a chart; `grid` nodes per direction
    /// (periodic directions are rounded up to an odd count).
    pub fn parametric(chart: Arc<dyn Chart<T>>, cone: &SolidCone<T>, grid: usize) -> Result<Self> {
        Self::parametric_with(chart, cone, grid, grid, T::c(DEFAULT_TOL_BOUNDARY))
    }

    pub fn parametric_with(
        chart: Arc<dyn Chart<T>>,
        cone: &SolidCone<T>,
        grid_first: usize,
        grid_second: usize,
        tol_boundary: T,
    ) -> Result<Self> {
        let n = chart.param_dim();
        if n + 1 != cone.ambient_dim() {
            return Err(Error::InvalidInput("chart dimension does not match the cone".into()));
        }
        if grid_first < 2 || (n == 2 && grid_second < 3) {
            return Err(Error::InvalidInput("grid too coarse".into()));
        }
        let dom = chart.domain();
        let first = if dom.periodic {
            NodeSet::periodic(dom.lo, dom.hi, grid_first)
        } else {
            NodeSet::legendre(dom.lo, dom.hi, grid_first)
        };
        let second = (n == 2).then(|| NodeSet::periodic(T::zero(), T::c(2.0) * T::PI(), grid_second));
        let orientation = chart.orientation();
        let n2 = second.as_ref().map_or(1, |s| s.len());

        let mut samples = Vec::with_capacity(first.len() * n2);
        for (i, (&t, &wt)) in first.nodes.iter().zip(&first.weights).enumerate() {
            for j in 0..n2 {
                let (ph, wp) = match &second {
                    Some(s) => (s.nodes[j], s.weights[j]),
                    None => (T::zero(), T::one()),
                };
                let jet = chart.jet([t, ph]);
                let geo = jet_geometry(n, &jet, orientation)
                    .ok_or_else(|| Error::InvalidInput(format!("degenerate chart at node {i},{j}")))?;
                samples.push(SurfaceSample {
                    param: [t, ph],
                    point: jet.x,
                    normal: geo.normal,
                    mean_curvature: geo.mean_curvature,
                    sigma2: geo.sigma2,
                    weight: wt * wp * geo.area_element,
                });
            }
        }

        let mut boundary = Vec::new();
        if !dom.periodic {
            for (end, at, into_increasing) in [(dom.lo_end, dom.lo, true), (dom.hi_end, dom.hi, false)] {
                if end != End::Boundary {
                    continue;
                }
                let row = first.interpolation_row(at);
                for j in 0..n2 {
                    let (ph, wp) = match &second {
                        Some(s) => (s.nodes[j], s.weights[j]),
                        None => (T::zero(), T::one()),
                    };
                    let jet = chart.jet([at, ph]);
                    let normal = chart::chart_normal(n, &jet.d, orientation)
                        .ok_or_else(|| Error::InvalidInput("degenerate chart on the boundary".into()))?;
                    let weight = if n == 1 { T::one() } else { wp * norm(&jet.d[1]) };
                    let trace = row
                        .iter()
                        .enumerate()
                        .filter(|(_, c)| **c != T::zero())
                        .map(|(i, c)| (i * n2 + j, *c))
                        .collect();
                    boundary.push(BoundarySample {
                        param: [at, ph],
                        point: jet.x,
                        normal,
                        conormal: inner_conormal(n, &jet, into_increasing),
                        weight,
                        trace,
                    });
                }
            }
        }

        let backend = Backend::Parametric(ParametricGrid {
            chart,
            first,
            second,
        });
        Self::finish(cone, backend, samples, boundary, tol_boundary)
    }

    fn finish(
        cone: &SolidCone<T>,
        backend: Backend<T>,
        samples: Vec<SurfaceSample<T>>,
        boundary: Vec<BoundarySample<T>>,
        tol_boundary: T,
    ) -> Result<Self> {
        for (i, s) in samples.iter().enumerate() {
            if !cone.contains_tol(&s.point, T::c(1e-9)) {
                return Err(Error::InvalidInput(format!("sample {i} lies outside the cone")));
            }
            if (norm(&s.normal) - T::one()).abs() > T::c(1e-10).max(T::epsilon() * T::c(16.0)) {
                return Err(Error::InvalidInput(format!("normal at sample {i} is not unit")));
            }
        }
        for (i, b) in boundary.iter().enumerate() {
            let r = norm(&b.point);
            let d = cone.boundary_distance(&b.point);
            if d.is_finite() && (r * d.sin()).abs() > tol_boundary.max(T::epsilon() * T::c(64.0) * r) {
                return Err(Error::InvalidInput(format!(
                    "boundary sample {i} is {} away from the cone boundary",
                    (r * d.sin()).abs()
                )));
            }
        }
        let min_radius = samples
            .iter()
            .map(|s| norm(&s.point))
            .chain(boundary.iter().map(|b| norm(&b.point)))
            .fold(T::infinity(), |a, b| a.min(b));
        Ok(Self {
            ambient_dim: cone.ambient_dim(),
            backend,
            samples,
            boundary,
            min_radius,
        })
    }

    /// Spherical cap `∂B_r ∩ M` with inward normal `-p/r`.
    pub fn cap(cone: &SolidCone<T>, r: T, grid: usize) -> Result<Self> {
        if !(r > T::zero()) {
            return Err(Error::InvalidInput("cap radius must be positive".into()));
        }
        Self::parametric(Arc::new(RoundChart::cap(cone, r)), cone, grid)
    }

    /// Round sphere through the vertex with center `center`; directions with
    /// `|X| < puncture` are excluded.
    pub fn sphere_through_origin(cone: &SolidCone<T>, center: Vec3<T>, puncture: Option<T>, grid: usize) -> Result<Self> {
        let r = norm(&center);
        let rho = puncture.unwrap_or(T::c(DEFAULT_PUNCTURE) * r);
        let chart = RoundChart::through_origin(cone.n(), center, rho)?;
        Self::parametric(Arc::new(chart), cone, grid)
    }

    /// Closed round sphere (circle) not meeting the vertex.
    pub fn sphere(cone: &SolidCone<T>, center: Vec3<T>, radius: T, grid: usize) -> Result<Self> {
        if !(radius > T::zero()) || norm(&center) <= radius {
            return Err(Error::InvalidInput("closed sphere must have positive radius and avoid the vertex".into()));
        }
        Self::parametric(Arc::new(RoundChart::sphere(cone.n(), center, radius)), cone, grid)
    }

    /// Closed ellipse (`n = 1`) or ellipsoid (`n = 2`) with the given center
    /// and semi-axes along the coordinate axes.
    pub fn ellipsoid(cone: &SolidCone<T>, center: Vec3<T>, semi_axes: Vec3<T>, grid: usize) -> Result<Self> {
        Self::parametric(Arc::new(EllipsoidChart::new(cone.n(), center, semi_axes)), cone, grid)
    }

    /// Radial graph `ρ(q) q` over the whole spherical region.
    pub fn radial_graph(cone: &SolidCone<T>, rho: crate::expr::Expression, grid: usize) -> Result<Self> {
        Self::parametric(Arc::new(RadialGraphChart::new(cone, rho)), cone, grid)
    }

    pub fn ambient_dim(&self) -> usize {
        self.ambient_dim
    }

    pub fn n(&self) -> usize {
        self.ambient_dim - 1
    }

    pub fn backend(&self) -> &Backend<T> {
        &self.backend
    }

    pub fn samples(&self) -> &[SurfaceSample<T>] {
        &self.samples
    }

    pub fn boundary(&self) -> &[BoundarySample<T>] {
        &self.boundary
    }

    pub fn min_radius(&self) -> T {
        self.min_radius
    }

    pub fn dofs(&self) -> usize {
        self.samples.len()
    }

    pub fn is_parametric(&self) -> bool {
        matches!(self.backend, Backend::Parametric(_))
    }

    /// The chart of a parametric surface.
    pub fn chart(&self) -> Option<&Arc<dyn Chart<T>>> {
        match &self.backend {
            Backend::Parametric(g) => Some(&g.chart),
            Backend::Simplicial(_) => None,
        }
    }

    /// Largest distance between samples (bounding-box diagonal).
    pub fn diameter(&self) -> T {
        let mut lo = [T::infinity(); 3];
        let mut hi = [T::neg_infinity(); 3];
        for s in &self.samples {
            for c in 0..3 {
                lo[c] = lo[c].min(s.point[c]);
                hi[c] = hi[c].max(s.point[c]);
            }
        }
        norm(&linalg::sub(&hi, &lo))
    }

    /// Mesh size for simplicial surfaces, largest node spacing otherwise.
    pub fn mesh_size(&self) -> T {
        match &self.backend {
            Backend::Simplicial(m) => m.max_cell_diameter(),
            Backend::Parametric(g) => {
                let spacing = |ns: &NodeSet<T>| {
                    let mut h = T::zero();
                    for w in ns.nodes.windows(2) {
                        h = h.max(w[1] - w[0]);
                    }
                    h
                };
                let scale = self.diameter();
                let mut h = spacing(&g.first);
                if let Some(s) = &g.second {
                    h = h.max(spacing(s));
                }
                h * scale
            }
        }
    }

    /// Image under the dilation `p -> t p`.
    pub fn dilate(&self, t: T, cone: &SolidCone<T>) -> Result<Self> {
        if !(t > T::zero()) {
            return Err(Error::InvalidInput("dilation factor must be positive".into()));
        }
        match &self.backend {
            Backend::Parametric(g) => {
                let chart: Arc<dyn Chart<T>> = Arc::new(ScaledChart::new(g.chart.clone(), t));
                let n2 = g.second.as_ref().map_or(3, |s| s.len());
                Self::parametric_with(chart, cone, g.first.len(), n2, T::c(DEFAULT_TOL_BOUNDARY) * t.max(T::one()))
            }
            Backend::Simplicial(m) => {
                let mut mesh = m.clone();
                mesh.scale(t);
                Self::from_mesh(mesh, cone)
            }
        }
    }

    /// P1 discretization of a chart: `segments` points per closed curve or
    /// azimuthal ring, `rings` levels in the polar direction (surfaces).
    pub fn simplicial_from_chart(chart: Arc<dyn Chart<T>>, cone: &SolidCone<T>, segments: usize, rings: usize) -> Result<Self> {
        let mesh = Mesh::from_chart(chart, segments, rings)?;
        Self::from_mesh(mesh, cone)
    }

    pub fn simplicial_cap(cone: &SolidCone<T>, r: T, segments: usize, rings: usize) -> Result<Self> {
        Self::simplicial_from_chart(Arc::new(RoundChart::cap(cone, r)), cone, segments, rings)
    }

    /// Wraps a mesh, recomputing boundary samples and lumped weights.
    pub fn from_mesh(mesh: Mesh<T>, cone: &SolidCone<T>) -> Result<Self> {
        if mesh.param_dim() + 1 != cone.ambient_dim() {
            return Err(Error::InvalidInput("mesh dimension does not match the cone".into()));
        }
        let (samples, boundary) = mesh.samples()?;
        let tol = mesh.tol_boundary();
        Self::finish(cone, Backend::Simplicial(mesh), samples, boundary, tol)
    }

    /// Imports a triangle mesh from OBJ `v`/`f` records.
    pub fn from_obj(text: &str, cone: &SolidCone<T>, tol_boundary: T) -> Result<Self> {
        Self::from_mesh(Mesh::parse_obj(text, cone, tol_boundary)?, cone)
    }

    /// Imports a planar polyline from two-column CSV; closed when the last
    /// row repeats the first.
    pub fn from_csv_polyline(text: &str, cone: &SolidCone<T>, tol_boundary: T) -> Result<Self> {
        Self::from_mesh(Mesh::parse_csv(text, cone, tol_boundary)?, cone)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::f64::consts::PI;

    #[test]
    fn cap_curvatures_and_area() {
        let cone = SolidCone::<f64>::circular(3, [0.0, 0.0, 1.0], 0.8).unwrap();
        let s = DiscreteHypersurface::cap(&cone, 2.0, 16).unwrap();
        for p in s.samples() {
            assert!((p.mean_curvature - 0.5).abs() < 1e-12);
            assert!((p.sigma2 - 0.5).abs() < 1e-12);
        }
        let area: f64 = s.samples().iter().map(|p| p.weight).sum();
        assert!((area - 4.0 * 2.0 * PI * (1.0 - 0.8f64.cos())).abs() < 1e-11);
        let len: f64 = s.boundary().iter().map(|b| b.weight).sum();
        assert!((len - 2.0 * PI * 2.0 * 0.8f64.sin()).abs() < 1e-11);
        for b in s.boundary() {
            let nu = cone.inner_normal(&b.point).unwrap();
            assert!(linalg::norm(&linalg::sub(&nu, &b.conormal)) < 1e-8);
        }
    }

    #[test]
    fn full_circle_has_no_boundary() {
        let s = DiscreteHypersurface::cap(&SolidCone::<f64>::full(2).unwrap(), 1.0, 32).unwrap();
        assert!(s.boundary().is_empty());
        let len: f64 = s.samples().iter().map(|p| p.weight).sum();
        assert!((len - 2.0 * PI).abs() < 1e-13);
    }

    #[test]
    fn boundary_trace_interpolates() {
        let cone = SolidCone::<f64>::sector(1.3).unwrap();
        let s = DiscreteHypersurface::cap(&cone, 1.0, 12).unwrap();
        assert_eq!(s.boundary().len(), 2);
        let u: Vec<f64> = s.samples().iter().map(|p| p.point[0] * p.point[1] + 1.0).collect();
        for b in s.boundary() {
            let v: f64 = b.trace.iter().map(|(i, c)| c * u[*i]).sum();
            assert!((v - (b.point[0] * b.point[1] + 1.0)).abs() < 1e-10);
        }
    }

    #[test]
    fn rejects_surfaces_leaving_the_cone() {
        let cone = SolidCone::<f64>::circular(3, [0.0, 0.0, 1.0], 0.5).unwrap();
        assert!(DiscreteHypersurface::sphere(&cone, [0.0, 0.0, 3.0], 2.0, 8).is_err());
        assert!(DiscreteHypersurface::sphere(&cone, [0.0, 0.0, 3.0], 0.5, 8).is_ok());
    }

    #[test]
    fn dilation_scales_everything() {
        let cone = SolidCone::<f64>::half_space(3).unwrap();
        let s = DiscreteHypersurface::cap(&cone, 1.0, 10).unwrap();
        let d = s.dilate(3.0, &cone).unwrap();
        for (a, b) in s.samples().iter().zip(d.samples()) {
            assert!((b.mean_curvature * 3.0 - a.mean_curvature).abs() < 1e-12);
            assert!((b.weight - 9.0 * a.weight).abs() < 1e-12);
        }
    }
}
