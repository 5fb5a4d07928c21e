//! Weighted integrals over discretized hypersurfaces, the f-divergence
//! calculus and numerical checks of the divergence theorems.

use crate::cone::SolidCone;
use crate::density::HomogeneousDensity;
use crate::fd;
use crate::linalg::{self, dot, norm, Mat3, Vec3};
use crate::quadrature::NodeSet;
use crate::scalar::{csum, Real};
use crate::surface::{chart, DiscreteHypersurface, GeometryCache, RoundChart};
use crate::{Error, Result};
use serde::Serialize;

/// Smooth vector field on the ambient space.
pub trait VectorField<T: Real> {
    fn value(&self, p: &Vec3<T>) -> Vec3<T>;

    /// `J[i][j] = ∂X_i/∂p_j`; central differences unless overridden.
    fn jacobian(&self, p: &Vec3<T>, dim: usize) -> Mat3<T> {
        let h = T::c(1e-4) * (T::one() + norm(p));
        let mut j = [[T::zero(); 3]; 3];
        for c in 0..dim {
            let at = |s: T| {
                let mut q = *p;
                q[c] = q[c] + s * h;
                self.value(&q)
            };
            let (m2, m1, p1, p2) = (at(-T::c(2.0)), at(-T::one()), at(T::one()), at(T::c(2.0)));
            for i in 0..dim {
                j[i][c] = fd::d1_5(m2[i], m1[i], p1[i], p2[i], h);
            }
        }
        j
    }
}

/// Smooth scalar function on the ambient space.
pub trait ScalarFunction<T: Real> {
    fn value(&self, p: &Vec3<T>) -> T;

    fn gradient(&self, p: &Vec3<T>, dim: usize) -> Vec3<T> {
        let h = T::c(1e-4) * (T::one() + norm(p));
        fd::gradient(&|q: &Vec3<T>| self.value(q), p, dim, h)
    }

    fn hessian(&self, p: &Vec3<T>, dim: usize) -> Mat3<T> {
        let h = T::c(1e-3) * (T::one() + norm(p));
        fd::hessian(&|q: &Vec3<T>| self.value(q), p, dim, h)
    }
}

/// The position field `X(p) = p`.
#[derive(Debug, Clone, Copy, Default)]
pub struct PositionField;

impl<T: Real> VectorField<T> for PositionField {
    fn value(&self, p: &Vec3<T>) -> Vec3<T> {
        *p
    }

    fn jacobian(&self, _p: &Vec3<T>, dim: usize) -> Mat3<T> {
        let mut j = [[T::zero(); 3]; 3];
        for (i, row) in j.iter_mut().enumerate().take(dim) {
            row[i] = T::one();
        }
        j
    }
}

/// Weighted area `A_f(Σ) = ∫ f da`.
pub fn weighted_area<T: Real>(surface: &DiscreteHypersurface<T>, density: &HomogeneousDensity<T>, cone: &SolidCone<T>) -> Result<T> {
    Ok(GeometryCache::compute(surface, density, cone)?.weighted_area())
}

fn check_volume_degree<T: Real>(n: usize, k: T) -> Result<T> {
    let d = T::from_usize_lossy(n) + k + T::one();
    if d.abs() <= T::c(1e-12) {
        return Err(Error::CriticalDegree { degree: k.to_f64_lossy() });
    }
    Ok(d)
}

pub(crate) fn oriented_volume_of<T: Real>(geo: &GeometryCache<T>) -> Result<T> {
    let d = check_volume_degree(geo.n, geo.degree)?;
    Ok(-csum(geo.samples.iter().map(|s| s.support * s.weight)) / d)
}

/// Oriented weighted volume `V_f = -1/(n+k+1) ∫ <X, N> da_f`.
pub fn oriented_volume<T: Real>(surface: &DiscreteHypersurface<T>, density: &HomogeneousDensity<T>, cone: &SolidCone<T>) -> Result<T> {
    oriented_volume_of(&GeometryCache::compute(surface, density, cone)?)
}

#[derive(Debug, Clone, Serialize)]
pub struct MinkowskiReport {
    /// `∫ (n + k + H_f g) da_f` with `H_f` replaced by its mean.
    pub residual_integral: f64,
    /// Same integral with the per-sample `H_f`; vanishes for every surface
    /// whose boundary lies on `∂M`.
    pub pointwise_residual: f64,
    pub area: f64,
    /// `None` at the critical degree `k = -(n+1)`.
    pub oriented_volume: Option<f64>,
    pub h_f_mean: f64,
    pub h_f_std: f64,
    /// `(n+k) A_f - (n+k+1) H_f V_f` with the mean `H_f`.
    pub identity_gap: Option<f64>,
    pub relative_residual: f64,
    pub relative_gap: Option<f64>,
    pub stationary: bool,
    /// At `k = -n` the identity forces `H_f = 0`; reports whether it holds.
    pub forced_zero_h_f: Option<bool>,
}

/// Minkowski identities for a surface, computed whether or not it is
/// stationary (the verdict is in the report).
pub fn minkowski<T: Real>(
    surface: &DiscreteHypersurface<T>,
    density: &HomogeneousDensity<T>,
    cone: &SolidCone<T>,
    tol_stationary: T,
) -> Result<MinkowskiReport> {
    let geo = GeometryCache::compute(surface, density, cone)?;
    Ok(minkowski_of(&geo, tol_stationary))
}

pub(crate) fn minkowski_of<T: Real>(geo: &GeometryCache<T>, tol_stationary: T) -> MinkowskiReport {
    let nf = T::from_usize_lossy(geo.n);
    let k = geo.degree;
    let area = geo.weighted_area();
    let (mean, std) = geo.h_f_stats();
    let residual = csum(geo.samples.iter().map(|s| (nf + k + mean * s.support) * s.weight));
    let pointwise = csum(geo.samples.iter().map(|s| (nf + k + s.h_f * s.support) * s.weight));
    let stationary = std <= tol_stationary * (T::one() + mean.abs()) && geo.max_orthogonality_error() <= tol_stationary;
    let volume = oriented_volume_of(geo).ok();
    let gap = volume.map(|v| (nf + k) * area - (nf + k + T::one()) * mean * v);
    let critical_zero = (nf + k).abs() <= T::c(1e-12);
    let scale = area.abs().max(T::min_positive_value());
    MinkowskiReport {
        residual_integral: residual.to_f64_lossy(),
        pointwise_residual: pointwise.to_f64_lossy(),
        area: area.to_f64_lossy(),
        oriented_volume: volume.map(|v| v.to_f64_lossy()),
        h_f_mean: mean.to_f64_lossy(),
        h_f_std: std.to_f64_lossy(),
        identity_gap: gap.map(|g| g.to_f64_lossy()),
        relative_residual: (residual.abs() / scale).to_f64_lossy(),
        relative_gap: gap.map(|g| (g.abs() / scale).to_f64_lossy()),
        stationary,
        forced_zero_h_f: critical_zero.then(|| mean.abs() <= tol_stationary),
    }
}

/// `div_f X = div X + <∇ψ, X>` at an interior point.
pub fn f_divergence<T: Real, F: VectorField<T> + ?Sized>(
    density: &HomogeneousDensity<T>,
    cone: &SolidCone<T>,
    field: &F,
    p: &Vec3<T>,
) -> Result<T> {
    let dim = cone.ambient_dim();
    let jet = density.ambient_jet(cone, p)?;
    let j = field.jacobian(p, dim);
    let tr = (0..dim).fold(T::zero(), |s, i| s + j[i][i]);
    Ok(tr + dot(&jet.grad_psi, &field.value(p)))
}

/// `div_{Σ,f} X = div_Σ X + <∇ψ, X>` per sample for an ambient field, with
/// `div_Σ X = tr J - <J N, N>`.
pub fn surface_f_divergence<T: Real, F: VectorField<T> + ?Sized>(geo: &GeometryCache<T>, dim: usize, field: &F) -> Vec<T> {
    geo.samples
        .iter()
        .map(|s| {
            let j = field.jacobian(&s.point, dim);
            let tr = (0..dim).fold(T::zero(), |a, i| a + j[i][i]);
            let jn = linalg::mat_vec(&j, &s.normal);
            tr - dot(&jn, &s.normal) + dot(&s.grad_psi, &field.value(&s.point))
        })
        .collect()
}

/// `div_{Σ,f} X` for a field depending on the point and the unit normal, e.g.
/// `u N`. Differentiates along the chart parameters (parametric surfaces).
pub fn surface_f_divergence_along<T: Real>(
    surface: &DiscreteHypersurface<T>,
    geo: &GeometryCache<T>,
    field: &dyn Fn(&Vec3<T>, &Vec3<T>) -> Vec3<T>,
) -> Result<Vec<T>> {
    let chart = surface
        .chart()
        .ok_or_else(|| Error::InvalidInput("parametric surface required".into()))?;
    let n = surface.n();
    let orientation = chart.orientation();
    let h = chart.fd_step();
    let eval = |u: [T; 2]| -> Result<Vec3<T>> {
        let jet = chart.jet(u);
        let nrm = chart::chart_normal(n, &jet.d, orientation).ok_or(Error::ProjectionDegenerate)?;
        Ok(field(&jet.x, &nrm))
    };
    let mut out = Vec::with_capacity(geo.samples.len());
    for (s, g) in surface.samples().iter().zip(&geo.samples) {
        let jet = chart.jet(s.param);
        // ∂_a X by five-point differences in the parameters
        let mut da = [linalg::zero3::<T>(); 2];
        for (a, slot) in da.iter_mut().enumerate().take(n) {
            let at = |t: T| -> Result<Vec3<T>> {
                let mut u = s.param;
                u[a] = u[a] + t * h;
                eval(u)
            };
            let (m2, m1, p1, p2) = (at(-T::c(2.0))?, at(-T::one())?, at(T::one())?, at(T::c(2.0))?);
            for c in 0..3 {
                slot[c] = fd::d1_5(m2[c], m1[c], p1[c], p2[c], h);
            }
        }
        let gm = [
            [dot(&jet.d[0], &jet.d[0]), dot(&jet.d[0], &jet.d[1])],
            [dot(&jet.d[1], &jet.d[0]), dot(&jet.d[1], &jet.d[1])],
        ];
        let div = if n == 1 {
            dot(&da[0], &jet.d[0]) / gm[0][0]
        } else {
            let det = gm[0][0] * gm[1][1] - gm[0][1] * gm[1][0];
            let inv = [[gm[1][1] / det, -gm[0][1] / det], [-gm[1][0] / det, gm[0][0] / det]];
            let mut acc = T::zero();
            for a in 0..2 {
                for b in 0..2 {
                    acc = acc + inv[a][b] * dot(&da[a], &jet.d[b]);
                }
            }
            acc
        };
        out.push(div + dot(&g.grad_psi, &field(&s.point, &s.normal)));
    }
    Ok(out)
}

/// `Δ_{Σ,f} φ` per sample for an ambient function:
/// `tr D²φ - D²φ(N,N) + nH <∇φ,N> + <∇ψ, ∇_Σ φ>`.
pub fn surface_f_laplacian<T: Real, F: ScalarFunction<T> + ?Sized>(geo: &GeometryCache<T>, dim: usize, phi: &F) -> Vec<T> {
    let nf = T::from_usize_lossy(geo.n);
    geo.samples
        .iter()
        .map(|s| {
            let g = phi.gradient(&s.point, dim);
            let hs = phi.hessian(&s.point, dim);
            let tr = (0..dim).fold(T::zero(), |a, i| a + hs[i][i]);
            let gn = dot(&g, &s.normal);
            let tang = linalg::axpy(&g, -gn, &s.normal);
            tr - linalg::bilinear(&hs, &s.normal, &s.normal) + nf * s.mean_curvature * gn + dot(&s.grad_psi, &tang)
        })
        .collect()
}

/// Terms of `∫ div_{Σ,f} X da_f = -∫ H_f <X,N> da_f - ∫_{∂Σ} <X,ν> dl_f`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct DivergenceCheck {
    pub divergence_integral: f64,
    pub mean_curvature_term: f64,
    pub boundary_term: f64,
    pub residual: f64,
}

pub fn verify_surface_divergence_theorem<T: Real, F: VectorField<T> + ?Sized>(
    geo: &GeometryCache<T>,
    dim: usize,
    field: &F,
) -> DivergenceCheck {
    let div = surface_f_divergence(geo, dim, field);
    let lhs = csum(geo.samples.iter().zip(&div).map(|(s, d)| *d * s.weight));
    let hterm = -csum(geo.samples.iter().map(|s| s.h_f * dot(&field.value(&s.point), &s.normal) * s.weight));
    let bterm = -csum(geo.boundary.iter().map(|b| dot(&field.value(&b.point), &b.conormal) * b.weight));
    DivergenceCheck {
        divergence_integral: lhs.to_f64_lossy(),
        mean_curvature_term: hterm.to_f64_lossy(),
        boundary_term: bterm.to_f64_lossy(),
        residual: (lhs - hterm - bterm).abs().to_f64_lossy(),
    }
}

/// Residual of `∫ (φ₁ Δ_f φ₂ - φ₂ Δ_f φ₁) da_f = -∫_{∂Σ} (φ₁ ∂_ν φ₂ - φ₂ ∂_ν φ₁) dl_f`.
pub fn integration_by_parts_residual<T: Real, A, B>(geo: &GeometryCache<T>, dim: usize, phi1: &A, phi2: &B) -> T
where
    A: ScalarFunction<T> + ?Sized,
    B: ScalarFunction<T> + ?Sized,
{
    let l1 = surface_f_laplacian(geo, dim, phi1);
    let l2 = surface_f_laplacian(geo, dim, phi2);
    let lhs = csum(
        geo.samples
            .iter()
            .enumerate()
            .map(|(i, s)| (phi1.value(&s.point) * l2[i] - phi2.value(&s.point) * l1[i]) * s.weight),
    );
    let rhs = -csum(geo.boundary.iter().map(|b| {
        let d1 = dot(&phi1.gradient(&b.point, dim), &b.conormal);
        let d2 = dot(&phi2.gradient(&b.point, dim), &b.conormal);
        (phi1.value(&b.point) * d2 - phi2.value(&b.point) * d1) * b.weight
    }));
    (lhs - rhs).abs()
}

/// Terms of `∫_Ω div_f X dv_f = -∫_{∂Ω} <X, N> da_f` on the shell
/// `{r₁ ≤ |p| ≤ r₂} ∩ M` (inward `N`, lateral part on `∂M` included).
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct ShellDivergence {
    pub volume_integral: f64,
    pub boundary_integral: f64,
    pub residual: f64,
}

pub fn verify_ambient_divergence<T: Real, F: VectorField<T> + ?Sized>(
    density: &HomogeneousDensity<T>,
    cone: &SolidCone<T>,
    field: &F,
    radii: (T, T),
    grid: usize,
) -> Result<ShellDivergence> {
    let (r1, r2) = radii;
    if !(r1 > T::zero() && r2 > r1) {
        return Err(Error::InvalidInput("shell radii must satisfy 0 < r1 < r2".into()));
    }
    let n = cone.n();
    // unit cap: weights are the spherical measure dq, boundary weights dl
    let unit = DiscreteHypersurface::parametric(std::sync::Arc::new(RoundChart::cap(cone, T::one())), cone, grid)?;
    let radial = NodeSet::legendre(r1, r2, grid);
    let nf = n as i32;

    let mut vol = Vec::new();
    for (r, wr) in radial.nodes.iter().zip(&radial.weights) {
        for s in unit.samples() {
            let p = linalg::scale(*r, &s.point);
            let f = density.evaluate(cone, &p)?;
            let d = f_divergence(density, cone, field, &p)?;
            vol.push(d * f * *wr * r.powi(nf) * s.weight);
        }
    }
    let mut bdry = Vec::new();
    for (rad, sign) in [(r1, T::one()), (r2, -T::one())] {
        for s in unit.samples() {
            let q = s.point;
            let p = linalg::scale(rad, &q);
            let f = density.evaluate(cone, &p)?;
            // N = sign * q: outward from the vertex on the inner cap
            bdry.push(-sign * dot(&field.value(&p), &q) * f * rad.powi(nf) * s.weight);
        }
    }
    for (r, wr) in radial.nodes.iter().zip(&radial.weights) {
        for b in unit.boundary() {
            let p = linalg::scale(*r, &b.point);
            let nu = cone.inner_normal(&p).ok_or(Error::ProjectionDegenerate)?;
            let f = crate::surface::boundary_density(density, cone, &p)?;
            bdry.push(-dot(&field.value(&p), &nu) * f * *wr * r.powi(nf - 1) * b.weight);
        }
    }
    let v = csum(vol);
    let b = csum(bdry);
    Ok(ShellDivergence {
        volume_integral: v.to_f64_lossy(),
        boundary_integral: b.to_f64_lossy(),
        residual: (v - b).abs().to_f64_lossy(),
    })
}

/// Least-squares slope of `log y` against `log x`.
pub fn log_log_slope<T: Real>(x: &[T], y: &[T]) -> Result<T> {
    if x.len() != y.len() || x.len() < 2 {
        return Err(Error::InvalidInput("need at least two points".into()));
    }
    if x.iter().chain(y).any(|v| !(*v > T::zero())) {
        return Err(Error::InvalidInput("log-log fit needs positive data".into()));
    }
    let lx: Vec<T> = x.iter().map(|v| v.ln()).collect();
    let ly: Vec<T> = y.iter().map(|v| v.ln()).collect();
    let m = T::from_usize_lossy(x.len());
    let mx = csum(lx.iter().copied()) / m;
    let my = csum(ly.iter().copied()) / m;
    let sxy = csum(lx.iter().zip(&ly).map(|(a, b)| (*a - mx) * (*b - my)));
    let sxx = csum(lx.iter().map(|a| (*a - mx) * (*a - mx)));
    Ok(sxy / sxx)
}

/// Exponents of `A_f` and `V_f` under dilations, by log-log regression.
#[derive(Debug, Clone, Serialize)]
pub struct ScalingFit {
    pub factors: Vec<f64>,
    pub areas: Vec<f64>,
    pub volumes: Vec<f64>,
    pub area_exponent: f64,
    pub volume_exponent: f64,
}

pub fn scaling_exponents<T: Real>(
    surface: &DiscreteHypersurface<T>,
    density: &HomogeneousDensity<T>,
    cone: &SolidCone<T>,
    factors: &[T],
) -> Result<ScalingFit> {
    let mut areas = Vec::new();
    let mut volumes = Vec::new();
    for t in factors {
        let s = surface.dilate(*t, cone)?;
        let geo = GeometryCache::compute(&s, density, cone)?;
        areas.push(geo.weighted_area());
        volumes.push(oriented_volume_of(&geo)?.abs());
    }
    let fa = log_log_slope(factors, &areas)?;
    let fv = log_log_slope(factors, &volumes)?;
    Ok(ScalingFit {
        factors: factors.iter().map(|v| v.to_f64_lossy()).collect(),
        areas: areas.iter().map(|v| v.to_f64_lossy()).collect(),
        volumes: volumes.iter().map(|v| v.to_f64_lossy()).collect(),
        area_exponent: fa.to_f64_lossy(),
        volume_exponent: fv.to_f64_lossy(),
    })
}
