//! The f-Jacobi operator with its free-boundary Robin term, stability
//! spectra and variation engines.

use serde::Serialize;

use crate::cone::SolidCone;
use crate::density::HomogeneousDensity;
use crate::fd;
use crate::linalg::{self, dot, norm, DMatrix, Vec3};
use crate::measures::{self, ScalarFunction};
use crate::quadrature::NodeSet;
use crate::scalar::{csum, Real};
use crate::surface::{chart, Backend, Cells, DiscreteHypersurface, GeometryCache};
use crate::{Error, Result};

/// Dense eigensolves are refused above this many degrees of freedom.
pub const DENSE_LIMIT: usize = 5000;

/// Stiffness, mass, potential and boundary matrices of the index form
/// `I_f(u,u) = uᵀ (K - P - B) u`.
#[derive(Debug, Clone)]
pub struct WeightedOperators<T: Real> {
    pub stiffness: DMatrix<T>,
    pub mass: DMatrix<T>,
    pub potential: DMatrix<T>,
    pub boundary: DMatrix<T>,
    pub dofs: usize,
    /// `Ric_f(N,N) + |σ|²` per sample.
    pub potential_values: Vec<T>,
    mass_is_diagonal: bool,
}

impl<T: Real> WeightedOperators<T> {
    /// `K - P - B`.
    pub fn index_matrix(&self) -> DMatrix<T> {
        self.stiffness
            .add_scaled(-T::one(), &self.potential)
            .add_scaled(-T::one(), &self.boundary)
    }

    /// Discrete `I_f(u, v)`.
    pub fn index_form(&self, u: &[T], v: &[T]) -> T {
        self.stiffness.form(u, v) - self.potential.form(u, v) - self.boundary.form(u, v)
    }

    /// `∫ u da_f` for nodal `u`.
    pub fn integral(&self, u: &[T]) -> T {
        let ones = vec![T::one(); self.dofs];
        self.mass.form(&ones, u)
    }

    pub fn max_asymmetry(&self) -> T {
        [&self.stiffness, &self.mass, &self.potential, &self.boundary]
            .iter()
            .map(|m| m.asymmetry())
            .fold(T::zero(), |a, b| a.max(b))
    }

    fn mass_solve(&self, r: &[T]) -> Result<Vec<T>> {
        if self.mass_is_diagonal {
            return Ok(r.iter().enumerate().map(|(i, v)| *v / self.mass[(i, i)]).collect());
        }
        self.mass.solve(r)
    }
}

/// Derivatives of nodal values along the grid directions.
fn grid_derivatives<T: Real>(first: &DMatrix<T>, second: Option<&DMatrix<T>>, n2: usize, u: &[T]) -> Vec<[T; 2]> {
    let n1 = first.nrows();
    let mut out = vec![[T::zero(); 2]; n1 * n2];
    for i in 0..n1 {
        for j in 0..n2 {
            let q = i * n2 + j;
            out[q][0] = csum((0..n1).map(|l| first[(i, l)] * u[l * n2 + j]));
            if let Some(d2) = second {
                out[q][1] = csum((0..n2).map(|l| d2[(j, l)] * u[i * n2 + l]));
            }
        }
    }
    out
}

fn inverse_metric<T: Real>(n: usize, d: &[Vec3<T>; 2]) -> [[T; 2]; 2] {
    if n == 1 {
        return [[T::one() / dot(&d[0], &d[0]), T::zero()], [T::zero(), T::zero()]];
    }
    let g = [[dot(&d[0], &d[0]), dot(&d[0], &d[1])], [dot(&d[1], &d[0]), dot(&d[1], &d[1])]];
    let det = g[0][0] * g[1][1] - g[0][1] * g[1][0];
    [[g[1][1] / det, -g[0][1] / det], [-g[1][0] / det, g[0][0] / det]]
}

/// Assembles the weighted operators of a surface.
pub fn assemble<T: Real>(surface: &DiscreteHypersurface<T>, density: &HomogeneousDensity<T>, cone: &SolidCone<T>) -> Result<WeightedOperators<T>> {
    let geo = GeometryCache::compute(surface, density, cone)?;
    assemble_with(surface, &geo)
}

pub fn assemble_with<T: Real>(surface: &DiscreteHypersurface<T>, geo: &GeometryCache<T>) -> Result<WeightedOperators<T>> {
    let dofs = surface.dofs();
    for (i, s) in geo.samples.iter().enumerate() {
        if !s.weight.is_finite() || !s.ric_f_nn.is_finite() {
            return Err(Error::SingularMass { sample: i });
        }
    }
    let pot: Vec<T> = geo.samples.iter().map(|s| s.ric_f_nn + s.sigma2).collect();
    let mut k = DMatrix::zeros(dofs, dofs);
    let (mass, potential, diagonal) = match surface.backend() {
        Backend::Parametric(grid) => {
            let n = surface.n();
            let d1 = grid.first.diff_matrix();
            let d2 = grid.second.as_ref().map(NodeSet::diff_matrix);
            let n1 = grid.first.len();
            let n2 = grid.second.as_ref().map_or(1, NodeSet::len);
            for (q, (s, g)) in surface.samples().iter().zip(&geo.samples).enumerate() {
                let jet = grid.chart.jet(s.param);
                let inv = inverse_metric(n, &jet.d);
                let (i, j) = (q / n2, q % n2);
                // sparse rows of the two parameter derivatives at node q
                let mut rows: [Vec<(usize, T)>; 2] = [Vec::new(), Vec::new()];
                rows[0] = (0..n1).map(|l| (l * n2 + j, d1[(i, l)])).collect();
                if let Some(d2) = &d2 {
                    rows[1] = (0..n2).map(|l| (i * n2 + l, d2[(j, l)])).collect();
                }
                for a in 0..n {
                    for b in 0..n {
                        let c = g.weight * inv[a][b];
                        if c == T::zero() {
                            continue;
                        }
                        for (ia, va) in &rows[a] {
                            for (ib, vb) in &rows[b] {
                                k[(*ia, *ib)] = k[(*ia, *ib)] + c * *va * *vb;
                            }
                        }
                    }
                }
            }
            let w: Vec<T> = geo.samples.iter().map(|s| s.weight).collect();
            let wp: Vec<T> = w.iter().zip(&pot).map(|(a, b)| *a * *b).collect();
            (DMatrix::from_diagonal(&w), DMatrix::from_diagonal(&wp), true)
        }
        Backend::Simplicial(mesh) => {
            let v = mesh.vertices();
            let mut m = DMatrix::zeros(dofs, dofs);
            let mut p = DMatrix::zeros(dofs, dofs);
            let f = |i: usize| geo.samples[i].density;
            match mesh.cells() {
                Cells::Segments(segs) => {
                    for s in segs {
                        let l = norm(&linalg::sub(&v[s[1]], &v[s[0]]));
                        let fb = (f(s[0]) + f(s[1])) * T::c(0.5);
                        let vb = (f(s[0]) * pot[s[0]] + f(s[1]) * pot[s[1]]) * T::c(0.5);
                        for a in 0..2 {
                            for b in 0..2 {
                                let (ia, ib) = (s[a], s[b]);
                                let sign = if a == b { T::one() } else { -T::one() };
                                k[(ia, ib)] = k[(ia, ib)] + sign * fb / l;
                                let c = if a == b { T::c(2.0) } else { T::one() } * l / T::c(6.0);
                                m[(ia, ib)] = m[(ia, ib)] + c * fb;
                                p[(ia, ib)] = p[(ia, ib)] + c * vb;
                            }
                        }
                    }
                }
                Cells::Triangles(tris) => {
                    for t in tris {
                        // edge opposite vertex a
                        let e = [
                            linalg::sub(&v[t[2]], &v[t[1]]),
                            linalg::sub(&v[t[0]], &v[t[2]]),
                            linalg::sub(&v[t[1]], &v[t[0]]),
                        ];
                        let area = norm(&linalg::cross(&e[0], &e[1])) * T::c(0.5);
                        if !(area > T::zero()) {
                            continue;
                        }
                        let third = T::one() / T::c(3.0);
                        let fb = (f(t[0]) + f(t[1]) + f(t[2])) * third;
                        let vb = (f(t[0]) * pot[t[0]] + f(t[1]) * pot[t[1]] + f(t[2]) * pot[t[2]]) * third;
                        for a in 0..3 {
                            for b in 0..3 {
                                let (ia, ib) = (t[a], t[b]);
                                k[(ia, ib)] = k[(ia, ib)] + fb * dot(&e[a], &e[b]) / (T::c(4.0) * area);
                                let c = if a == b { T::c(2.0) } else { T::one() } * area / T::c(12.0);
                                m[(ia, ib)] = m[(ia, ib)] + c * fb;
                                p[(ia, ib)] = p[(ia, ib)] + c * vb;
                            }
                        }
                    }
                }
            }
            (m, p, false)
        }
    };
    let mut bmat = DMatrix::zeros(dofs, dofs);
    for (b, bg) in surface.boundary().iter().zip(&geo.boundary) {
        let c = bg.weight * bg.ii_nn;
        if c == T::zero() {
            continue;
        }
        for (ia, va) in &b.trace {
            for (ib, vb) in &b.trace {
                bmat[(*ia, *ib)] = bmat[(*ia, *ib)] + c * *va * *vb;
            }
        }
    }
    if !k.is_finite() || !mass.is_finite() {
        return Err(Error::SingularMass { sample: 0 });
    }
    Ok(WeightedOperators {
        stiffness: k,
        mass,
        potential,
        boundary: bmat,
        dofs,
        potential_values: pot,
        mass_is_diagonal: diagonal,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, serde::Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SpectrumMode {
    All,
    MeanZero,
}

#[derive(Debug, Clone)]
pub struct Spectrum<T: Real> {
    pub lambda_min: T,
    /// `M`-normalized minimizer.
    pub eigenvector: Vec<T>,
    /// Ascending.
    pub eigenvalues: Vec<T>,
}

/// Minimum of `uᵀ(K-P-B)u / uᵀMu`, over all `u` or over `∫ u da_f = 0`.
pub fn stability_spectrum<T: Real>(ops: &WeightedOperators<T>, mode: SpectrumMode) -> Result<Spectrum<T>> {
    if ops.dofs > DENSE_LIMIT {
        return Err(Error::TooManyDofs {
            dofs: ops.dofs,
            limit: DENSE_LIMIT,
        });
    }
    let a = ops.index_matrix();
    let ones = vec![T::one(); ops.dofs];
    let constraint = match mode {
        SpectrumMode::All => None,
        SpectrumMode::MeanZero => {
            if !(ops.mass.form(&ones, &ones) > T::zero()) {
                return Err(Error::ProjectionDegenerate);
            }
            Some(ones.as_slice())
        }
    };
    let e = linalg::generalized_symmetric_eigen(&a, &ops.mass, constraint)?;
    Ok(Spectrum {
        lambda_min: e.eigenvalues[0],
        eigenvector: e.min_vector,
        eigenvalues: e.eigenvalues,
    })
}

/// Discrete `L_f u = M⁻¹(-K + P + B) u`; the boundary rows carry the natural
/// Robin condition.
pub fn jacobi_apply<T: Real>(ops: &WeightedOperators<T>, u: &[T]) -> Result<Vec<T>> {
    if u.len() != ops.dofs {
        return Err(Error::InvalidInput("field length does not match the operator".into()));
    }
    let ku = ops.stiffness.mul_vec(u);
    let pu = ops.potential.mul_vec(u);
    let bu = ops.boundary.mul_vec(u);
    let r: Vec<T> = (0..ops.dofs).map(|i| pu[i] + bu[i] - ku[i]).collect();
    ops.mass_solve(&r)
}

/// `L_f φ = Δ_{Σ,f} φ + (Ric_f(N,N) + |σ|²) φ` per sample for an ambient
/// function.
pub fn jacobi_pointwise<T: Real, F: ScalarFunction<T> + ?Sized>(geo: &GeometryCache<T>, dim: usize, phi: &F) -> Vec<T> {
    let lap = measures::surface_f_laplacian(geo, dim, phi);
    geo.samples
        .iter()
        .zip(lap)
        .map(|(s, l)| l + (s.ric_f_nn + s.sigma2) * phi.value(&s.point))
        .collect()
}

/// Residual of `∫ (u L_f v - v L_f u) da_f = ∫_{∂Σ} (v ∂_ν u - u ∂_ν v) dl_f`.
pub fn symmetry_residual<T: Real, A, B>(geo: &GeometryCache<T>, dim: usize, u: &A, v: &B) -> T
where
    A: ScalarFunction<T> + ?Sized,
    B: ScalarFunction<T> + ?Sized,
{
    let lu = jacobi_pointwise(geo, dim, u);
    let lv = jacobi_pointwise(geo, dim, v);
    let lhs = csum(
        geo.samples
            .iter()
            .enumerate()
            .map(|(i, s)| (u.value(&s.point) * lv[i] - v.value(&s.point) * lu[i]) * s.weight),
    );
    let rhs = csum(geo.boundary.iter().map(|b| {
        let du = dot(&u.gradient(&b.point, dim), &b.conormal);
        let dv = dot(&v.gradient(&b.point, dim), &b.conormal);
        (v.value(&b.point) * du - u.value(&b.point) * dv) * b.weight
    }));
    (lhs - rhs).abs()
}

/// Default stationarity tolerance: `1e-6` for parametric surfaces,
/// `10 h²` for simplicial ones.
pub fn default_tol_stationary<T: Real>(surface: &DiscreteHypersurface<T>) -> T {
    if surface.is_parametric() {
        T::c(1e-6)
    } else {
        let h = surface.mesh_size();
        T::c(10.0) * h * h
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct StabilityReport {
    pub h_f_mean: f64,
    pub h_f_std: f64,
    pub orthogonality_error: f64,
    pub lambda_min_all: Option<f64>,
    pub lambda_min_meanzero: Option<f64>,
    pub stationary: bool,
    pub strongly_stationary: bool,
    pub f_stable: Option<bool>,
    pub strongly_f_stable: Option<bool>,
    pub tol_stationary: f64,
    pub tol_spectrum: f64,
    pub dofs: usize,
}

/// `H_f` statistics, contact angle and the stationarity verdicts.
pub fn stationarity_check<T: Real>(
    surface: &DiscreteHypersurface<T>,
    density: &HomogeneousDensity<T>,
    cone: &SolidCone<T>,
    tol_stationary: T,
) -> Result<StabilityReport> {
    let geo = GeometryCache::compute(surface, density, cone)?;
    Ok(stationarity_of(&geo, surface.dofs(), tol_stationary))
}

fn stationarity_of<T: Real>(geo: &GeometryCache<T>, dofs: usize, tol: T) -> StabilityReport {
    let (mean, std) = geo.h_f_stats();
    let orth = geo.max_orthogonality_error();
    let stationary = std <= tol * (T::one() + mean.abs()) && orth <= tol;
    StabilityReport {
        h_f_mean: mean.to_f64_lossy(),
        h_f_std: std.to_f64_lossy(),
        orthogonality_error: orth.to_f64_lossy(),
        lambda_min_all: None,
        lambda_min_meanzero: None,
        stationary,
        strongly_stationary: stationary && mean.abs() <= tol,
        f_stable: None,
        strongly_f_stable: None,
        tol_stationary: tol.to_f64_lossy(),
        tol_spectrum: 0.0,
        dofs,
    }
}

/// Stationarity verdicts plus both minimal eigenvalues.
pub fn analyze<T: Real>(
    surface: &DiscreteHypersurface<T>,
    density: &HomogeneousDensity<T>,
    cone: &SolidCone<T>,
    tol_stationary: T,
) -> Result<StabilityReport> {
    analyze_spectra(surface, density, cone, tol_stationary).map(|(r, _, _)| r)
}

/// As [`analyze`], also returning the full spectra (all, mean-zero).
pub fn analyze_spectra<T: Real>(
    surface: &DiscreteHypersurface<T>,
    density: &HomogeneousDensity<T>,
    cone: &SolidCone<T>,
    tol_stationary: T,
) -> Result<(StabilityReport, Spectrum<T>, Spectrum<T>)> {
    let geo = GeometryCache::compute(surface, density, cone)?;
    let ops = assemble_with(surface, &geo)?;
    let mut report = stationarity_of(&geo, surface.dofs(), tol_stationary);
    let scale = ops.potential_values.iter().fold(T::zero(), |a, v| a.max(v.abs()));
    let tol_spec = tol_stationary * (T::one() + scale);
    let spec_all = stability_spectrum(&ops, SpectrumMode::All)?;
    let spec_mz = stability_spectrum(&ops, SpectrumMode::MeanZero)?;
    let (all, mz) = (spec_all.lambda_min, spec_mz.lambda_min);
    report.lambda_min_all = Some(all.to_f64_lossy());
    report.lambda_min_meanzero = Some(mz.to_f64_lossy());
    report.f_stable = Some(mz >= -tol_spec);
    report.strongly_f_stable = Some(all >= -tol_spec);
    report.tol_spectrum = tol_spec.to_f64_lossy();
    Ok((report, spec_all, spec_mz))
}

/// Mean-zero eigenvalues along a refinement sequence.
#[derive(Debug, Clone, Serialize)]
pub struct RefinementStudy {
    pub dofs: Vec<usize>,
    pub lambda_min_meanzero: Vec<f64>,
    pub monotone: bool,
    /// Last two values agree within 2% (relative to `max(1, |λ|)`).
    pub converged: bool,
}

pub fn refinement_study<T: Real>(
    surfaces: &[DiscreteHypersurface<T>],
    density: &HomogeneousDensity<T>,
    cone: &SolidCone<T>,
) -> Result<RefinementStudy> {
    let mut dofs = Vec::new();
    let mut vals = Vec::new();
    for s in surfaces {
        let ops = assemble(s, density, cone)?;
        vals.push(stability_spectrum(&ops, SpectrumMode::MeanZero)?.lambda_min.to_f64_lossy());
        dofs.push(s.dofs());
    }
    let slack = 1e-9;
    let monotone = vals.windows(2).all(|w| w[1] <= w[0] + slack * (1.0 + w[0].abs()));
    let converged = vals.len() >= 2 && {
        let (a, b) = (vals[vals.len() - 2], vals[vals.len() - 1]);
        (a - b).abs() <= 0.02 * a.abs().max(b.abs()).max(1.0)
    };
    Ok(RefinementStudy {
        dofs,
        lambda_min_meanzero: vals,
        monotone,
        converged,
    })
}

// ---------------------------------------------------------------------------
// variations

#[derive(Debug, Clone, PartialEq)]
pub enum Variation<T: Real> {
    /// `X + t u N` with nodal `u`.
    Normal(Vec<T>),
    /// `e^t X`.
    Dilation,
    /// `X + t (n+k) N`.
    Parallel,
}

/// Exact first-order frame of a parametric surface at its nodes.
struct NodeFrame<T: Real> {
    x: Vec3<T>,
    d: [Vec3<T>; 2],
    normal: Vec3<T>,
    /// `N_a = -h_a^c X_c`.
    dn: [Vec3<T>; 2],
    /// Parameter quadrature weight (without the area element).
    param_weight: T,
}

struct Frames<T: Real> {
    n: usize,
    orientation: T,
    nodes: Vec<NodeFrame<T>>,
    d1: DMatrix<T>,
    d2: Option<DMatrix<T>>,
    n2: usize,
}

fn frames<T: Real>(surface: &DiscreteHypersurface<T>) -> Result<Frames<T>> {
    let grid = match surface.backend() {
        Backend::Parametric(g) => g,
        Backend::Simplicial(_) => {
            return Err(Error::InvalidInput("variation engines need a parametric surface".into()));
        }
    };
    let n = surface.n();
    let orientation = grid.chart.orientation();
    let mut nodes = Vec::with_capacity(surface.dofs());
    for s in surface.samples() {
        let jet = grid.chart.jet(s.param);
        let inv = inverse_metric(n, &jet.d);
        let nrm = s.normal;
        let h = [
            [dot(&jet.dd[0][0], &nrm), dot(&jet.dd[0][1], &nrm)],
            [dot(&jet.dd[1][0], &nrm), dot(&jet.dd[1][1], &nrm)],
        ];
        let mut dn = [linalg::zero3::<T>(); 2];
        for (a, slot) in dn.iter_mut().enumerate().take(n) {
            for c in 0..n {
                // S^c_a = G^{cb} h_ba
                let s_ca = (0..n).fold(T::zero(), |acc, b| acc + inv[c][b] * h[b][a]);
                *slot = linalg::axpy(slot, -s_ca, &jet.d[c]);
            }
        }
        let area = area_element(n, &jet.d);
        nodes.push(NodeFrame {
            x: jet.x,
            d: jet.d,
            normal: nrm,
            dn,
            param_weight: s.weight / area,
        });
    }
    Ok(Frames {
        n,
        orientation,
        nodes,
        d1: grid.first.diff_matrix(),
        d2: grid.second.as_ref().map(NodeSet::diff_matrix),
        n2: grid.second.as_ref().map_or(1, NodeSet::len),
    })
}

fn area_element<T: Real>(n: usize, d: &[Vec3<T>; 2]) -> T {
    if n == 1 {
        norm(&d[0])
    } else {
        norm(&linalg::cross(&d[0], &d[1]))
    }
}

/// Weighted area, oriented-volume integral `∫<Y,N> da_f` and positions of the
/// surface `Y = s (X + t u N)`.
struct Deformed<T: Real> {
    area: T,
    support_integral: T,
    points: Vec<Vec3<T>>,
}

fn deform<T: Real>(
    fr: &Frames<T>,
    u: &[T],
    du: &[[T; 2]],
    t: T,
    scale: T,
    density: &HomogeneousDensity<T>,
    cone: &SolidCone<T>,
) -> Result<Deformed<T>> {
    let mut area = Vec::with_capacity(fr.nodes.len());
    let mut supp = Vec::with_capacity(fr.nodes.len());
    let mut points = Vec::with_capacity(fr.nodes.len());
    for (i, nd) in fr.nodes.iter().enumerate() {
        let y = linalg::scale(scale, &linalg::axpy(&nd.x, t * u[i], &nd.normal));
        if !cone.contains_tol(&y, T::c(1e-9) * (T::one() + norm(&y))) {
            return Err(Error::StencilExitsCone { sample: i });
        }
        let mut d = [linalg::zero3::<T>(); 2];
        for a in 0..fr.n {
            let v = linalg::add(&linalg::scale(du[i][a], &nd.normal), &linalg::scale(u[i], &nd.dn[a]));
            d[a] = linalg::scale(scale, &linalg::axpy(&nd.d[a], t, &v));
        }
        let nrm = chart::chart_normal(fr.n, &d, fr.orientation).ok_or(Error::ProjectionDegenerate)?;
        let f = density.evaluate(cone, &y).or_else(|e| match e {
            Error::OutsideCone => density.value_unchecked(&y),
            e => Err(e),
        })?;
        let w = fr.nodes[i].param_weight * area_element(fr.n, &d) * f;
        area.push(w);
        supp.push(dot(&y, &nrm) * w);
        points.push(y);
    }
    Ok(Deformed {
        area: csum(area),
        support_integral: csum(supp),
        points,
    })
}

/// Finite-difference and analytic derivatives along a variation.
#[derive(Debug, Clone, Serialize)]
pub struct VariationDiagnostics {
    pub kind: String,
    pub dt: f64,
    pub area_derivative: f64,
    pub area_derivative_expected: f64,
    pub volume_derivative: f64,
    pub volume_derivative_expected: f64,
    /// `(A_f - H_f V_f)''(0)` by the time stencil (normal variations).
    pub second_derivative: Option<f64>,
    /// Assembled `I_f(u,u)`.
    pub index_form: Option<f64>,
    /// `max |d/dt H_f(φ_t(p)) + H_f(p)|` (dilations).
    pub h_f_rate_error: Option<f64>,
    /// Largest relative disagreement between steps `dt` and `dt/2`.
    pub richardson_disagreement: f64,
    /// `richardson_disagreement <= 1%`.
    pub reliable: bool,
}

fn rel_diff(a: f64, b: f64) -> f64 {
    (a - b).abs() / a.abs().max(b.abs()).max(1e-300)
}

/// Default time step `1e-3 · diameter`.
pub fn default_dt<T: Real>(surface: &DiscreteHypersurface<T>) -> T {
    T::c(1e-3) * surface.diameter()
}

pub fn run_variation<T: Real>(
    surface: &DiscreteHypersurface<T>,
    density: &HomogeneousDensity<T>,
    cone: &SolidCone<T>,
    variation: &Variation<T>,
    dt: T,
) -> Result<VariationDiagnostics> {
    let geo = GeometryCache::compute(surface, density, cone)?;
    let n = surface.n();
    let k = density.degree();
    let nk1 = T::from_usize_lossy(n) + k + T::one();
    let v0 = measures::oriented_volume_of(&geo)?;
    let (h_mean, _) = geo.h_f_stats();
    if let Variation::Dilation = variation {
        return run_dilation(surface, density, cone, &geo, v0, dt);
    }
    let u: Vec<T> = match variation {
        Variation::Normal(u) => {
            if u.len() != surface.dofs() {
                return Err(Error::InvalidInput("variation field length does not match the surface".into()));
            }
            u.clone()
        }
        Variation::Parallel => vec![T::from_usize_lossy(n) + k; surface.dofs()],
        Variation::Dilation => unreachable!(),
    };
    let fr = frames(surface)?;
    let du = grid_derivatives(&fr.d1, fr.d2.as_ref(), fr.n2, &u);
    // boundary samples must slide along ∂M
    for (i, b) in surface.boundary().iter().enumerate() {
        let ub = csum(b.trace.iter().map(|(j, c)| *c * u[*j]));
        for s in [-T::c(2.0), T::c(2.0)] {
            let y = linalg::axpy(&b.point, s * dt * ub, &b.normal);
            if cone.has_boundary() && cone.boundary_distance(&y).abs() * norm(&y) > T::c(1e-8) * (T::one() + norm(&y)) {
                return Err(Error::StencilExitsCone { sample: i });
            }
        }
    }
    let eval = |t: T| -> Result<(T, T)> {
        let d = deform(&fr, &u, &du, t, T::one(), density, cone)?;
        Ok((d.area, -d.support_integral / nk1))
    };
    let stencil = |h: T| -> Result<(f64, f64, f64)> {
        let vals: Vec<(T, T)> = [-2.0, -1.0, 0.0, 1.0, 2.0]
            .iter()
            .map(|s| eval(T::c(*s) * h))
            .collect::<Result<_>>()?;
        let a: Vec<T> = vals.iter().map(|v| v.0).collect();
        let v: Vec<T> = vals.iter().map(|v| v.1).collect();
        let j: Vec<T> = vals.iter().map(|v| v.0 - h_mean * v.1).collect();
        Ok((
            fd::d1_5(a[0], a[1], a[3], a[4], h).to_f64_lossy(),
            fd::d1_5(v[0], v[1], v[3], v[4], h).to_f64_lossy(),
            fd::d2_5(j[0], j[1], j[2], j[3], j[4], h).to_f64_lossy(),
        ))
    };
    let coarse = stencil(dt)?;
    let fine = stencil(dt * T::c(0.5))?;
    let ops = assemble_with(surface, &geo)?;
    let index = ops.index_form(&u, &u).to_f64_lossy();
    let a_exp = -csum(geo.samples.iter().zip(&u).map(|(s, ui)| s.h_f * *ui * s.weight));
    let v_exp = -csum(geo.samples.iter().zip(&u).map(|(s, ui)| *ui * s.weight));
    // relative agreement, floored at a millionth of the area scale
    let floor = geo.weighted_area().to_f64_lossy().abs() * 1e-6;
    let agree = |a: f64, b: f64| (a - b).abs() / b.abs().max(floor).max(1e-300);
    let dis = agree(coarse.0, fine.0).max(agree(coarse.1, fine.1)).max(agree(coarse.2, fine.2));
    Ok(VariationDiagnostics {
        kind: match variation {
            Variation::Parallel => "parallel".into(),
            _ => "normal".into(),
        },
        dt: dt.to_f64_lossy(),
        area_derivative: fine.0,
        area_derivative_expected: a_exp.to_f64_lossy(),
        volume_derivative: fine.1,
        volume_derivative_expected: v_exp.to_f64_lossy(),
        second_derivative: Some(fine.2),
        index_form: Some(index),
        h_f_rate_error: None,
        richardson_disagreement: dis,
        reliable: dis <= 0.01,
    })
}

fn run_dilation<T: Real>(
    surface: &DiscreteHypersurface<T>,
    density: &HomogeneousDensity<T>,
    cone: &SolidCone<T>,
    geo: &GeometryCache<T>,
    v0: T,
    dt: T,
) -> Result<VariationDiagnostics> {
    let n = surface.n();
    let k = density.degree();
    let eval = |t: T| -> Result<GeometryCache<T>> {
        let s = surface.dilate(t.exp(), cone)?;
        GeometryCache::compute(&s, density, cone)
    };
    let stencil = |h: T| -> Result<(f64, f64, f64)> {
        let g: Vec<GeometryCache<T>> = [-2.0, -1.0, 1.0, 2.0]
            .iter()
            .map(|s| eval(T::c(*s) * h))
            .collect::<Result<_>>()?;
        let a: Vec<T> = g.iter().map(|c| c.weighted_area()).collect();
        let v: Vec<T> = g.iter().map(measures::oriented_volume_of).collect::<Result<_>>()?;
        let mut worst = T::zero();
        for (i, s) in geo.samples.iter().enumerate() {
            let r = fd::d1_5(g[0].samples[i].h_f, g[1].samples[i].h_f, g[2].samples[i].h_f, g[3].samples[i].h_f, h);
            worst = worst.max((r + s.h_f).abs());
        }
        Ok((
            fd::d1_5(a[0], a[1], a[2], a[3], h).to_f64_lossy(),
            fd::d1_5(v[0], v[1], v[2], v[3], h).to_f64_lossy(),
            worst.to_f64_lossy(),
        ))
    };
    let coarse = stencil(dt)?;
    let fine = stencil(dt * T::c(0.5))?;
    let nk = T::from_usize_lossy(n) + k;
    let dis = rel_diff(coarse.0, fine.0).max(rel_diff(coarse.1, fine.1));
    Ok(VariationDiagnostics {
        kind: "dilation".into(),
        dt: dt.to_f64_lossy(),
        area_derivative: fine.0,
        area_derivative_expected: (nk * geo.weighted_area()).to_f64_lossy(),
        volume_derivative: fine.1,
        volume_derivative_expected: ((nk + T::one()) * v0).to_f64_lossy(),
        second_derivative: None,
        index_form: None,
        h_f_rate_error: Some(fine.2),
        richardson_disagreement: dis,
        reliable: dis <= 0.01,
    })
}

/// Diagnostics of the volume-renormalized parallel variation
/// `s(t)(p + t(n+k)N)`, `s(t) = (V_f(0)/V_f(t))^{1/(n+k+1)}`.
#[derive(Debug, Clone, Serialize)]
pub struct RescaledDiagnostics {
    pub dt: f64,
    /// `max |V_f(t) - V_f(0)| / |V_f(0)|` over the stencil.
    pub volume_drift: f64,
    /// `max |<φ'(0), N> - (n + k + H_f g)|` over samples.
    pub velocity_error: f64,
    /// `max |φ_dt(p) - p|`.
    pub max_displacement: f64,
    /// `max |n + k + H_f g|` with the mean `H_f`.
    pub test_field_sup: f64,
    pub richardson_disagreement: f64,
    pub reliable: bool,
    /// Set when the surface is not f-stationary; the construction is then
    /// carried out without a claim about its normal component.
    pub non_stationary_warning: bool,
}

pub fn rescaled_parallel<T: Real>(
    surface: &DiscreteHypersurface<T>,
    density: &HomogeneousDensity<T>,
    cone: &SolidCone<T>,
    dt: T,
) -> Result<RescaledDiagnostics> {
    let geo = GeometryCache::compute(surface, density, cone)?;
    let n = surface.n();
    let k = density.degree();
    let nk = T::from_usize_lossy(n) + k;
    let nk1 = nk + T::one();
    let v0 = measures::oriented_volume_of(&geo)?;
    let fr = frames(surface)?;
    let u = vec![nk; surface.dofs()];
    let du = vec![[T::zero(); 2]; surface.dofs()];
    let tol = default_tol_stationary(surface);
    let (h_mean, _) = geo.h_f_stats();
    let (field, warning) = geo.barbosa_test_field(tol);

    let state = |t: T| -> Result<(Vec<Vec3<T>>, T)> {
        let par = deform(&fr, &u, &du, t, T::one(), density, cone)?;
        let vt = -par.support_integral / nk1;
        let s = (v0 / vt).powf(T::one() / nk1);
        let resc = deform(&fr, &u, &du, t, s, density, cone)?;
        let drift = ((-resc.support_integral / nk1 - v0) / v0).abs();
        Ok((resc.points, drift))
    };
    let mut drift = T::zero();
    let velocity = |h: T, drift: &mut T| -> Result<Vec<T>> {
        let st: Vec<(Vec<Vec3<T>>, T)> = [-2.0, -1.0, 1.0, 2.0]
            .iter()
            .map(|s| state(T::c(*s) * h))
            .collect::<Result<_>>()?;
        for s in &st {
            *drift = drift.max(s.1);
        }
        Ok(fr
            .nodes
            .iter()
            .enumerate()
            .map(|(i, nd)| {
                let mut v = [T::zero(); 3];
                for c in 0..3 {
                    v[c] = fd::d1_5(st[0].0[i][c], st[1].0[i][c], st[2].0[i][c], st[3].0[i][c], h);
                }
                dot(&v, &nd.normal)
            })
            .collect())
    };
    let coarse = velocity(dt, &mut drift)?;
    let fine = velocity(dt * T::c(0.5), &mut drift)?;
    let expected: Vec<T> = geo.samples.iter().map(|s| nk + h_mean * s.support).collect();
    let err = fine
        .iter()
        .zip(&expected)
        .fold(T::zero(), |a, (v, e)| a.max((*v - *e).abs()));
    let scale = fine.iter().fold(T::one(), |a, v| a.max(v.abs()));
    let dis = coarse
        .iter()
        .zip(&fine)
        .fold(T::zero(), |a, (c, f)| a.max((*c - *f).abs()))
        / scale;
    let (p1, _) = state(dt)?;
    let disp = p1
        .iter()
        .zip(&fr.nodes)
        .fold(T::zero(), |a, (p, nd)| a.max(norm(&linalg::sub(p, &nd.x))));
    Ok(RescaledDiagnostics {
        dt: dt.to_f64_lossy(),
        volume_drift: drift.to_f64_lossy(),
        velocity_error: err.to_f64_lossy(),
        max_displacement: disp.to_f64_lossy(),
        test_field_sup: field.iter().fold(T::zero(), |a, v| a.max(v.abs())).to_f64_lossy(),
        richardson_disagreement: dis.to_f64_lossy(),
        reliable: dis <= T::c(0.01),
        non_stationary_warning: warning,
    })
}

// ---------------------------------------------------------------------------
// rigidity and cutoff tests

/// Per-sample `Ric_f(N,N) + |σ|² - H_f²/(n+k)` with the terms of its lower
/// bound.
#[derive(Debug, Clone, Serialize)]
pub struct UmbilicityReport {
    pub gap: Vec<f64>,
    /// `n/(k(n+k)) (<∇ψ,N> + kH)²`.
    pub lower_bound: Vec<f64>,
    pub ric_f_k_nn: Vec<f64>,
    /// `|σ|² - nH² ≥ 0`.
    pub traceless_norm: Vec<f64>,
    pub max_gap: f64,
    pub min_gap: f64,
    /// `min (gap - lower_bound)`; nonnegative when `Ric_f^k ≥ 0`.
    pub min_slack: f64,
}

pub fn umbilicity_gap<T: Real>(
    surface: &DiscreteHypersurface<T>,
    density: &HomogeneousDensity<T>,
    cone: &SolidCone<T>,
) -> Result<UmbilicityReport> {
    let n = surface.n();
    let nf = T::from_usize_lossy(n);
    let k = density.degree();
    if k >= -nf && k <= T::zero() {
        return Err(Error::WrongDegreeRange { degree: k.to_f64_lossy() });
    }
    let geo = GeometryCache::compute(surface, density, cone)?;
    let mut gap = Vec::new();
    let mut bound = Vec::new();
    let mut rk = Vec::new();
    let mut tl = Vec::new();
    for s in &geo.samples {
        let a = dot(&s.grad_psi, &s.normal);
        let h = s.mean_curvature;
        let g = s.ric_f_nn + s.sigma2 - s.h_f * s.h_f / (nf + k);
        let b = nf / (k * (nf + k)) * (a + k * h) * (a + k * h);
        gap.push(g.to_f64_lossy());
        bound.push(b.to_f64_lossy());
        rk.push((s.ric_f_nn - a * a / k).to_f64_lossy());
        tl.push((s.sigma2 - nf * h * h).to_f64_lossy());
    }
    let max_gap = gap.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    let min_gap = gap.iter().cloned().fold(f64::INFINITY, f64::min);
    let min_slack = gap.iter().zip(&bound).map(|(g, b)| g - b).fold(f64::INFINITY, f64::min);
    Ok(UmbilicityReport {
        gap,
        lower_bound: bound,
        ric_f_k_nn: rk,
        traceless_norm: tl,
        max_gap,
        min_gap,
        min_slack,
    })
}

/// `S(x) = e^{-1/x} / (e^{-1/x} + e^{-1/(1-x)})` on `[0, 1]`, with its derivative.
fn smooth_step<T: Real>(x: T) -> (T, T) {
    if x <= T::zero() {
        return (T::zero(), T::zero());
    }
    if x >= T::one() {
        return (T::one(), T::zero());
    }
    let y = T::one() - x;
    // divide through by e^{-1/x} to stay finite
    let r = (T::one() / x - T::one() / y).exp();
    let s = T::one() / (T::one() + r);
    // s² r = s (1 - s), which stays finite when r overflows
    let ds = s * (T::one() - s) * (T::one() / (x * x) + T::one() / (y * y));
    (s, ds)
}

/// Cutoff `φ_ε(p) = S(2|p|/ε - 1)`: zero on `B_{ε/2}`, one off `B_ε`.
pub fn cutoff<T: Real>(p: &Vec3<T>, eps: T) -> (T, Vec3<T>) {
    let r = norm(p);
    let (s, ds) = smooth_step(T::c(2.0) * r / eps - T::one());
    let g = if r > T::zero() {
        linalg::scale(T::c(2.0) * ds / (eps * r), p)
    } else {
        linalg::zero3()
    };
    (s, g)
}

#[derive(Debug, Clone, Serialize)]
pub struct CutoffReport {
    pub eps: Vec<f64>,
    pub energies: Vec<f64>,
    pub slope: f64,
    pub expected_slope: f64,
    pub monotone: bool,
}

/// Weighted Dirichlet energies `∫ |∇_Σ φ_ε|² da_f` of the cutoffs near the
/// vertex and the log-log slope over `eps_list`.
pub fn cutoff_energy_decay<T: Real>(
    surface: &DiscreteHypersurface<T>,
    density: &HomogeneousDensity<T>,
    cone: &SolidCone<T>,
    eps_list: &[T],
) -> Result<CutoffReport> {
    let n = surface.n();
    let k = density.degree();
    let nk = T::from_usize_lossy(n) + k;
    if k < T::zero() || nk <= T::c(2.0) {
        return Err(Error::HypothesisViolated(format!(
            "cutoff decay needs k >= 0 and n + k > 2 (n = {n}, k = {k})"
        )));
    }
    let chart = surface
        .chart()
        .ok_or_else(|| Error::InvalidInput("cutoff energies need a parametric surface".into()))?;
    let dom = chart.domain();
    let mut energies = Vec::new();
    for eps in eps_list {
        let (lo, hi) = chart
            .vertex_band(*eps * T::c(0.5), *eps)
            .ok_or_else(|| Error::HypothesisViolated("surface does not reach the vertex at this scale".into()))?;
        let mut bands = vec![(lo, hi)];
        if n == 1 {
            // the curve reaches the vertex from both ends of its interval
            bands.push((dom.lo + dom.hi - hi, dom.lo + dom.hi - lo));
        }
        let mut acc = Vec::new();
        for (a, b) in bands {
            let theta = NodeSet::legendre(a, b, 48);
            let phi = (n == 2).then(|| NodeSet::periodic(T::zero(), T::c(2.0) * T::PI(), 33));
            for (t, wt) in theta.nodes.iter().zip(&theta.weights) {
                let az: Vec<(T, T)> = match &phi {
                    Some(p) => p.nodes.iter().cloned().zip(p.weights.iter().cloned()).collect(),
                    None => vec![(T::zero(), T::one())],
                };
                for (ph, wp) in az {
                    let jet = chart.jet([*t, ph]);
                    let nrm = match chart::chart_normal(n, &jet.d, chart.orientation()) {
                        Some(v) => v,
                        None => continue,
                    };
                    let (_, g) = cutoff(&jet.x, *eps);
                    let gt = linalg::axpy(&g, -dot(&g, &nrm), &nrm);
                    let f = density.evaluate(cone, &jet.x)?;
                    acc.push(dot(&gt, &gt) * f * *wt * wp * area_element(n, &jet.d));
                }
            }
        }
        energies.push(csum(acc));
    }
    let slope = measures::log_log_slope(eps_list, &energies)?;
    // energies decrease as ε decreases
    let mut order: Vec<usize> = (0..eps_list.len()).collect();
    order.sort_by(|a, b| eps_list[*a].partial_cmp(&eps_list[*b]).unwrap_or(std::cmp::Ordering::Equal));
    let monotone = order.windows(2).all(|w| energies[w[0]] <= energies[w[1]]);
    Ok(CutoffReport {
        eps: eps_list.iter().map(|v| v.to_f64_lossy()).collect(),
        energies: energies.iter().map(|v| v.to_f64_lossy()).collect(),
        slope: slope.to_f64_lossy(),
        expected_slope: (nk - T::c(2.0)).to_f64_lossy(),
        monotone,
    })
}

/// Both sides of the test-function computation with `u = n + k + H_f g`:
/// `Q_f(u,u)` and `-(n+k)² [∫ gap da_f + ∫_{∂Σ} II(N,N) dl_f]`.
#[derive(Debug, Clone, Serialize)]
pub struct TestFunctionLedger {
    pub q_f_uu: f64,
    pub gap_integral: f64,
    pub boundary_integral: f64,
    pub bracket: f64,
    pub non_stationary_warning: bool,
}

pub fn test_function_ledger<T: Real>(
    surface: &DiscreteHypersurface<T>,
    density: &HomogeneousDensity<T>,
    cone: &SolidCone<T>,
) -> Result<TestFunctionLedger> {
    let geo = GeometryCache::compute(surface, density, cone)?;
    let ops = assemble_with(surface, &geo)?;
    let nk = T::from_usize_lossy(geo.n) + geo.degree;
    let (u, warn) = geo.barbosa_test_field(default_tol_stationary(surface));
    let q = ops.index_form(&u, &u);
    let gap = csum(
        geo.samples
            .iter()
            .map(|s| (s.ric_f_nn + s.sigma2 - s.h_f * s.h_f / nk) * s.weight),
    );
    let bd = csum(geo.boundary.iter().map(|b| b.ii_nn * b.weight));
    Ok(TestFunctionLedger {
        q_f_uu: q.to_f64_lossy(),
        gap_integral: gap.to_f64_lossy(),
        boundary_integral: bd.to_f64_lossy(),
        bracket: (-(nk * nk) * (gap + bd)).to_f64_lossy(),
        non_stationary_warning: warn,
    })
}
