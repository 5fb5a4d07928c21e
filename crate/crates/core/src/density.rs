//! Smooth `k`-homogeneous densities `f(p) = η(p/|p|) |p|^k` on solid cones.
//!
//! The ambient jet of `ψ = log f` is assembled from the sphere derivatives of
//! `μ = log η`:
//!
//! ```text
//! ∇ψ  = (k q + g) / r
//! ∇²ψ = (-k qqᵀ - (q gᵀ + g qᵀ) + k P + Hs) / r²
//! ```
//!
//! with `q = p/r`, `P = I - qqᵀ`, `g` the sphere gradient and `Hs` the sphere
//! Hessian of `μ` at `q`.

use crate::cone::SolidCone;
use crate::expr::{Bindings, Expression};
use crate::fd;
use crate::linalg::{self, bilinear, dot, mat_add, mat_scale, norm, outer, Mat3, Vec3};
use crate::scalar::Real;
use crate::{Error, Result};

/// Spherical profile families.
#[derive(Debug, Clone, PartialEq)]
pub enum Profile<T: Real> {
    /// `η ≡ scale`.
    Radial { scale: T },
    /// `η(q) = Π q_i^{α_i}`, degree `Σ α_i`.
    Monomial { exponents: Vec3<T> },
    /// `η(q) = <ξ, q>^k`.
    LinearPower { xi: Vec3<T> },
    /// `η(q) = exp(a (<b, q> + qᵀ C q))`.
    PerturbedRadial {
        linear: Vec3<T>,
        quadratic: Mat3<T>,
        amplitude: T,
    },
    /// User formula for `η` in spherical coordinates.
    Expression(Expression),
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum DerivativeMode<T: Real> {
    Analytic,
    /// Central differences with the given step (radians on the sphere).
    FiniteDifference { step: T },
}

/// Default sphere step for finite-difference jets.
pub const DEFAULT_SPHERE_STEP: f64 = 1e-4;

#[derive(Debug, Clone, PartialEq)]
pub struct HomogeneousDensity<T: Real> {
    degree: T,
    profile: Profile<T>,
    mode: DerivativeMode<T>,
}

/// Value of `μ` with its sphere gradient and Hessian at a unit direction.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SphereJet<T: Real> {
    pub mu: T,
    pub grad: Vec3<T>,
    pub hess: Mat3<T>,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AmbientJet<T: Real> {
    pub point: Vec3<T>,
    pub f_value: T,
    pub grad_psi: Vec3<T>,
    pub hess_psi: Mat3<T>,
}

impl<T: Real> AmbientJet<T> {
    /// `Ric_f = -∇²ψ` (flat ambient space).
    pub fn ric_f(&self) -> Mat3<T> {
        mat_scale(-T::one(), &self.hess_psi)
    }

    /// `Ric_f^k = Ric_f - (1/k) dψ ⊗ dψ`.
    pub fn ric_f_k(&self, k: T) -> Mat3<T> {
        mat_add(
            &self.ric_f(),
            &mat_scale(-T::one() / k, &outer(&self.grad_psi, &self.grad_psi)),
        )
    }
}

/// Sampling plan for [`HomogeneousDensity::certify_cd`].
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CdSampling<T: Real> {
    pub polar: usize,
    pub azimuth: usize,
    /// Tangent directions per sample point.
    pub directions: usize,
    /// Minimum sphere distance to `∂D`.
    pub guard: T,
    pub tol: T,
}

impl<T: Real> Default for CdSampling<T> {
    fn default() -> Self {
        Self {
            polar: 16,
            azimuth: 32,
            directions: 12,
            guard: T::c(1e-3),
            tol: T::c(1e-8),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct CurvatureReport<T: Real> {
    pub sample_count: usize,
    pub min_ric_f_k: T,
    pub min_ric_f: T,
    /// Minimum of `-(1/k)<g, v>² - k - Hs(v, v)` over sampled tangent directions.
    pub min_sphere_margin: T,
    pub cd_certified: bool,
    pub sphere_criterion_certified: bool,
    pub witness_point: Vec3<T>,
    pub witness_direction: Vec3<T>,
    pub tolerance: T,
}

impl<T: Real> CurvatureReport<T> {
    pub fn verdicts_agree(&self) -> bool {
        self.cd_certified == self.sphere_criterion_certified
    }
}

impl<T: Real> HomogeneousDensity<T> {
    pub fn new(degree: T, profile: Profile<T>, mode: DerivativeMode<T>) -> Result<Self> {
        if !degree.is_finite() {
            return Err(Error::InvalidInput("degree must be finite".into()));
        }
        match &profile {
            Profile::Radial { scale } if !(*scale > T::zero()) => {
                return Err(Error::InvalidInput("radial scale must be positive".into()));
            }
            Profile::Monomial { exponents } => {
                if exponents.iter().any(|a| *a < T::zero()) {
                    return Err(Error::InvalidInput("monomial exponents must be nonnegative".into()));
                }
                let sum = exponents[0] + exponents[1] + exponents[2];
                if (sum - degree).abs() > T::c(1e-12) * (T::one() + degree.abs()) {
                    return Err(Error::InvalidInput("monomial degree must equal the exponent sum".into()));
                }
            }
            Profile::LinearPower { xi } if norm(xi) == T::zero() => {
                return Err(Error::InvalidInput("linear form must be nonzero".into()));
            }
            _ => {}
        }
        let mode = match (&profile, mode) {
            (Profile::Expression(_), DerivativeMode::Analytic) => DerivativeMode::FiniteDifference {
                step: T::c(DEFAULT_SPHERE_STEP),
            },
            (_, m) => m,
        };
        if let DerivativeMode::FiniteDifference { step } = mode {
            if !(step > T::zero()) {
                return Err(Error::InvalidInput("finite-difference step must be positive".into()));
            }
        }
        Ok(Self {
            degree,
            profile,
            mode,
        })
    }

    pub fn radial(k: T) -> Self {
        Self::new(k, Profile::Radial { scale: T::one() }, DerivativeMode::Analytic)
            .expect("unit radial profile is valid")
    }

    pub fn monomial(exponents: &[T]) -> Result<Self> {
        let e = linalg::from_slice(exponents);
        let k = e[0] + e[1] + e[2];
        Self::new(k, Profile::Monomial { exponents: e }, DerivativeMode::Analytic)
    }

    pub fn linear_power(xi: Vec3<T>, k: T) -> Result<Self> {
        Self::new(k, Profile::LinearPower { xi }, DerivativeMode::Analytic)
    }

    pub fn perturbed_radial(k: T, linear: Vec3<T>, quadratic: Mat3<T>, amplitude: T) -> Result<Self> {
        let sym = mat_scale(
            T::c(0.5),
            &mat_add(&quadratic, &linalg::mat_transpose(&quadratic)),
        );
        Self::new(
            k,
            Profile::PerturbedRadial {
                linear,
                quadratic: sym,
                amplitude,
            },
            DerivativeMode::Analytic,
        )
    }

    /// Profile given by a formula for `η`; derivatives use finite differences.
    pub fn expression(k: T, source: &str) -> Result<Self> {
        let e = Expression::parse(source)?;
        Self::new(k, Profile::Expression(e), DerivativeMode::Analytic)
    }

    /// Switch to finite-difference sphere derivatives.
    pub fn with_finite_differences(mut self, step: T) -> Result<Self> {
        if !(step > T::zero()) {
            return Err(Error::InvalidInput("finite-difference step must be positive".into()));
        }
        self.mode = DerivativeMode::FiniteDifference { step };
        Ok(self)
    }

    pub fn degree(&self) -> T {
        self.degree
    }

    pub fn profile(&self) -> &Profile<T> {
        &self.profile
    }

    pub fn mode(&self) -> DerivativeMode<T> {
        self.mode
    }

    /// True when `η` is constant.
    pub fn is_radial(&self) -> bool {
        match &self.profile {
            Profile::Radial { .. } => true,
            Profile::PerturbedRadial { amplitude, .. } => *amplitude == T::zero(),
            _ => false,
        }
    }

    /// `η` at the unit direction `q`; errors if not strictly positive.
    pub fn eta(&self, q: &Vec3<T>) -> Result<T> {
        let v = match &self.profile {
            Profile::Radial { scale } => *scale,
            Profile::Monomial { exponents } => {
                let mut v = T::one();
                for i in 0..3 {
                    if exponents[i] != T::zero() {
                        if !(q[i] > T::zero()) {
                            return Err(Error::NonPositiveDensity);
                        }
                        v = v * q[i].powf(exponents[i]);
                    }
                }
                v
            }
            Profile::LinearPower { xi } => {
                let s = dot(xi, q);
                if !(s > T::zero()) {
                    return Err(Error::NonPositiveDensity);
                }
                s.powf(self.degree)
            }
            Profile::PerturbedRadial {
                linear,
                quadratic,
                amplitude,
            } => (*amplitude * (dot(linear, q) + bilinear(quadratic, q, q))).exp(),
            Profile::Expression(e) => e.eval(&spherical_bindings(q)),
        };
        if v > T::zero() && v.is_finite() {
            Ok(v)
        } else {
            Err(Error::NonPositiveDensity)
        }
    }

    /// `f(p)` without the cone membership check (stencils may cross `∂M`).
    pub fn value_unchecked(&self, p: &Vec3<T>) -> Result<T> {
        let r = norm(p);
        if r == T::zero() {
            return Err(Error::VertexSingular {
                radius: 0.0,
                degree: self.degree.to_f64_lossy(),
            });
        }
        let q = linalg::scale(T::one() / r, p);
        Ok(self.eta(&q)? * r.powf(self.degree))
    }

    /// `f(p) = η(p/|p|) |p|^k`.
    pub fn evaluate(&self, cone: &SolidCone<T>, p: &Vec3<T>) -> Result<T> {
        if !cone.contains(p) {
            return Err(Error::OutsideCone);
        }
        let r = norm(p);
        if r < T::c(1e-14) {
            if self.degree > T::zero() {
                return Ok(T::zero());
            }
            if self.degree == T::zero() {
                if let Profile::Radial { scale } = self.profile {
                    return Ok(scale);
                }
            }
            return Err(Error::VertexSingular {
                radius: r.to_f64_lossy(),
                degree: self.degree.to_f64_lossy(),
            });
        }
        self.value_unchecked(p)
    }

    /// Value, sphere gradient and sphere Hessian of `μ` at the unit direction `q`.
    pub fn sphere_jet(&self, q: &Vec3<T>, dim: usize) -> Result<SphereJet<T>> {
        let mu = self.eta(q)?.ln();
        let (grad, hess) = match self.mode {
            DerivativeMode::FiniteDifference { step } => {
                // 0-homogeneous extension x -> log η(x/|x|)
                let ext = |x: &Vec3<T>| -> T {
                    match linalg::normalize(x) {
                        Some(u) => self.eta(&u).map(|v| v.ln()).unwrap_or_else(|_| T::nan()),
                        None => T::nan(),
                    }
                };
                (fd::gradient(&ext, q, dim, step), fd::hessian(&ext, q, dim, step))
            }
            DerivativeMode::Analytic => self.analytic_extension(q),
        };
        if grad.iter().any(|x| !x.is_finite()) || hess.iter().flatten().any(|x| !x.is_finite()) {
            return Err(Error::NonPositiveDensity);
        }
        let p = linalg::tangent_projector(q, dim);
        let g = linalg::mat_vec(&p, &grad);
        let radial = dot(&grad, q);
        let hs = mat_add(
            &linalg::mat_mul(&p, &linalg::mat_mul(&hess, &p)),
            &mat_scale(-radial, &p),
        );
        Ok(SphereJet { mu, grad: g, hess: hs })
    }

    /// Ambient gradient and Hessian of a smooth extension of `μ` near the sphere.
    fn analytic_extension(&self, q: &Vec3<T>) -> (Vec3<T>, Mat3<T>) {
        let zero = linalg::zero3();
        let zero_m = [[T::zero(); 3]; 3];
        match &self.profile {
            Profile::Radial { .. } => (zero, zero_m),
            Profile::Monomial { exponents } => {
                let mut g = zero;
                let mut h = zero_m;
                for i in 0..3 {
                    if exponents[i] != T::zero() {
                        g[i] = exponents[i] / q[i];
                        h[i][i] = -exponents[i] / (q[i] * q[i]);
                    }
                }
                (g, h)
            }
            Profile::LinearPower { xi } => {
                let s = dot(xi, q);
                let k = self.degree;
                (
                    linalg::scale(k / s, xi),
                    mat_scale(-k / (s * s), &outer(xi, xi)),
                )
            }
            Profile::PerturbedRadial {
                linear,
                quadratic,
                amplitude,
            } => {
                let cq = linalg::mat_vec(quadratic, q);
                (
                    linalg::scale(*amplitude, &linalg::axpy(linear, T::c(2.0), &cq)),
                    mat_scale(T::c(2.0) * *amplitude, quadratic),
                )
            }
            Profile::Expression(_) => unreachable!("expression profiles always use finite differences"),
        }
    }

    /// Value of `f`, `∇ψ` and `∇²ψ` at `p`.
    pub fn ambient_jet(&self, cone: &SolidCone<T>, p: &Vec3<T>) -> Result<AmbientJet<T>> {
        if !cone.contains(p) {
            return Err(Error::OutsideCone);
        }
        let r = norm(p);
        if r < T::c(1e-14) {
            return Err(Error::VertexSingular {
                radius: r.to_f64_lossy(),
                degree: self.degree.to_f64_lossy(),
            });
        }
        let q = linalg::scale(T::one() / r, p);
        if let DerivativeMode::FiniteDifference { step } = self.mode {
            let d = cone.boundary_distance(&q);
            let required = T::c(2.0) * step;
            if d < required {
                return Err(Error::BoundaryTooClose {
                    distance: d.to_f64_lossy(),
                    required: required.to_f64_lossy(),
                });
            }
        }
        let dim = cone.ambient_dim();
        let sj = self.sphere_jet(&q, dim)?;
        Ok(assemble_jet(self.degree, r, &q, &sj, dim))
    }

    pub fn ric_f(&self, cone: &SolidCone<T>, p: &Vec3<T>, v: &Vec3<T>) -> Result<T> {
        let jet = self.ambient_jet(cone, p)?;
        Ok(-bilinear(&jet.hess_psi, v, v))
    }

    pub fn ric_f_k(&self, cone: &SolidCone<T>, p: &Vec3<T>, v: &Vec3<T>) -> Result<T> {
        if self.degree == T::zero() {
            return Err(Error::DegreeZero);
        }
        let jet = self.ambient_jet(cone, p)?;
        let gv = dot(&jet.grad_psi, v);
        Ok(-bilinear(&jet.hess_psi, v, v) - gv * gv / self.degree)
    }

    /// Checks `Ric_f^k >= 0` on a deterministic grid, both through the sphere
    /// inequality on `μ` and through the full ambient quadratic form at `r = 1`.
    pub fn certify_cd(&self, cone: &SolidCone<T>, sampling: &CdSampling<T>) -> Result<CurvatureReport<T>> {
        let k = self.degree;
        if k == T::zero() {
            return Err(Error::DegreeZero);
        }
        let dim = cone.ambient_dim();
        let mut guard = sampling.guard;
        if let DerivativeMode::FiniteDifference { step } = self.mode {
            guard = guard.max(T::c(2.0) * step);
        }
        let points = cone.sample_directions(sampling.polar, sampling.azimuth, guard);
        if points.is_empty() {
            return Err(Error::InvalidInput("sampling grid is empty".into()));
        }
        let mut min_k = T::infinity();
        let mut min_f = T::infinity();
        let mut min_margin = T::infinity();
        let mut witness = (points[0], points[0]);
        for q in &points {
            let sj = self.sphere_jet(q, dim)?;
            let jet = assemble_jet(k, T::one(), q, &sj, dim);

            let (vals, vecs) = linalg::symmetric_eigen3(&jet.ric_f_k(k), dim);
            if vals[0] < min_k {
                min_k = vals[0];
                witness = (*q, vecs[0]);
            }
            let (vals_f, _) = linalg::symmetric_eigen3(&jet.ric_f(), dim);
            min_f = min_f.min(vals_f[0]);

            for v in tangent_directions(q, dim, sampling.directions, &sj, k) {
                let gv = dot(&sj.grad, &v);
                let margin = -gv * gv / k - k - bilinear(&sj.hess, &v, &v);
                min_margin = min_margin.min(margin);
            }
        }
        let tol = sampling.tol;
        Ok(CurvatureReport {
            sample_count: points.len(),
            min_ric_f_k: min_k,
            min_ric_f: min_f,
            min_sphere_margin: min_margin,
            cd_certified: min_k >= -tol,
            sphere_criterion_certified: min_margin >= -tol,
            witness_point: witness.0,
            witness_direction: witness.1,
            tolerance: tol,
        })
    }

    /// `‖∇²(f^{1/k}) + (1/k) f^{1/k} Ric_f^k‖_F` with the Hessian of
    /// `f^{1/k}` from independent finite differences.
    pub fn matrimonio_residual(&self, cone: &SolidCone<T>, p: &Vec3<T>) -> Result<T> {
        let k = self.degree;
        if k == T::zero() {
            return Err(Error::DegreeZero);
        }
        let jet = self.ambient_jet(cone, p)?;
        let dim = cone.ambient_dim();
        let root = |x: &Vec3<T>| -> T {
            self.value_unchecked(x)
                .map(|v| v.powf(T::one() / k))
                .unwrap_or_else(|_| T::nan())
        };
        let h = T::c(1e-3) * norm(p);
        let fd_hess = fd::hessian(&root, p, dim, h);
        if fd_hess.iter().flatten().any(|x| !x.is_finite()) {
            return Err(Error::BoundaryTooClose {
                distance: cone.boundary_distance(p).to_f64_lossy(),
                required: (T::c(2.0) * h / norm(p)).to_f64_lossy(),
            });
        }
        let fk = jet.f_value.powf(T::one() / k);
        let rhs = mat_scale(fk / k, &jet.ric_f_k(k));
        Ok(linalg::frobenius(&mat_add(&fd_hess, &rhs)))
    }
}

fn assemble_jet<T: Real>(k: T, r: T, q: &Vec3<T>, sj: &SphereJet<T>, dim: usize) -> AmbientJet<T> {
    let g = &sj.grad;
    let grad = linalg::scale(T::one() / r, &linalg::axpy(g, k, q));
    let p = linalg::tangent_projector(q, dim);
    let mut h = mat_scale(-k, &outer(q, q));
    h = mat_add(&h, &mat_scale(-T::one(), &mat_add(&outer(q, g), &outer(g, q))));
    h = mat_add(&h, &mat_scale(k, &p));
    h = mat_add(&h, &sj.hess);
    let point = linalg::scale(r, q);
    AmbientJet {
        point,
        f_value: (sj.mu + k * r.ln()).exp(),
        grad_psi: grad,
        hess_psi: mat_scale(T::one() / (r * r), &h),
    }
}

/// Sampled unit tangent directions at `q`, plus the extremal directions of the
/// tangent Bakry-Emery block so the sampled minimum is exact.
fn tangent_directions<T: Real>(
    q: &Vec3<T>,
    dim: usize,
    count: usize,
    sj: &SphereJet<T>,
    k: T,
) -> Vec<Vec3<T>> {
    if dim == 2 {
        return vec![[-q[1], q[0], T::zero()]];
    }
    let (e1, e2) = linalg::orthonormal_frame(q);
    let count = count.max(1);
    let mut out: Vec<Vec3<T>> = (0..count)
        .map(|j| {
            let t = T::PI() * T::from_usize_lossy(j) / T::from_usize_lossy(count);
            linalg::add(&linalg::scale(t.cos(), &e1), &linalg::scale(t.sin(), &e2))
        })
        .collect();
    // 2x2 block of -Hs - (1/k) g gᵀ in the frame (e1, e2)
    let form = |a: &Vec3<T>, b: &Vec3<T>| -bilinear(&sj.hess, a, b) - dot(&sj.grad, a) * dot(&sj.grad, b) / k;
    let block = [
        [form(&e1, &e1), form(&e1, &e2), T::zero()],
        [form(&e2, &e1), form(&e2, &e2), T::zero()],
        [T::zero(), T::zero(), T::zero()],
    ];
    let (_, vecs) = linalg::symmetric_eigen3(&block, 2);
    for v in vecs {
        out.push(linalg::add(&linalg::scale(v[0], &e1), &linalg::scale(v[1], &e2)));
    }
    out
}

/// Variable bindings of a unit direction for expression profiles.
pub fn spherical_bindings<T: Real>(q: &Vec3<T>) -> Bindings<T> {
    let planar = q[2] == T::zero();
    let (theta, phi) = if planar {
        (q[1].atan2(q[0]), T::zero())
    } else {
        (q[2].max(-T::one()).min(T::one()).acos(), q[1].atan2(q[0]))
    };
    Bindings {
        theta,
        phi,
        x: q[0],
        y: q[1],
        z: q[2],
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::cone::{Region, SolidCone};
    use std::f64::consts::FRAC_PI_2;

    fn plane() -> SolidCone<f64> {
        SolidCone::<f64>::full(2).unwrap()
    }

    fn quadrant() -> SolidCone<f64> {
        SolidCone::<f64>::sector(FRAC_PI_2).unwrap()
    }

    #[test]
    fn evaluate_examples() {
        let d = HomogeneousDensity::radial(2.0);
        assert!((d.evaluate(&plane(), &[3.0, 4.0, 0.0]).unwrap() - 25.0).abs() < 1e-12);
        let m = HomogeneousDensity::monomial(&[1.0, 1.0]).unwrap();
        assert!((m.evaluate(&quadrant(), &[2.0, 3.0, 0.0]).unwrap() - 6.0).abs() < 1e-12);
        let neg = HomogeneousDensity::radial(-3.0);
        let p = [1.0, 0.0, 0.0];
        assert!((neg.evaluate(&plane(), &linalg::scale(2.0, &p)).unwrap() - 0.125).abs() < 1e-15);
    }

    #[test]
    fn vertex_and_outside_errors() {
        let c = quadrant();
        let neg = HomogeneousDensity::radial(-3.0);
        assert!(matches!(neg.evaluate(&c, &[0.0; 3]), Err(Error::VertexSingular { .. })));
        assert_eq!(HomogeneousDensity::radial(2.0).evaluate(&c, &[0.0; 3]).unwrap(), 0.0);
        assert_eq!(neg.evaluate(&c, &[-1.0, 0.5, 0.0]), Err(Error::OutsideCone));
    }

    #[test]
    fn radial_jet() {
        let k: f64 = 1.7;
        let d = HomogeneousDensity::<f64>::radial(k);
        let cone = SolidCone::<f64>::full(3).unwrap();
        let p: Vec3<f64> = [0.3, -1.2, 0.8];
        let jet = d.ambient_jet(&cone, &p).unwrap();
        let r2 = dot(&p, &p);
        for i in 0..3 {
            assert!((jet.grad_psi[i] - k * p[i] / r2).abs() < 1e-14);
        }
        assert!((bilinear(&jet.hess_psi, &p, &p) + k).abs() < 1e-13);
        let v = linalg::scale(1.0 / r2.sqrt(), &p);
        assert!((d.ric_f(&cone, &p, &v).unwrap() - k / r2).abs() < 1e-13);
    }

    #[test]
    fn linear_power_jet_and_flat_bakry_emery() {
        let k: f64 = 2.5;
        let d = HomogeneousDensity::linear_power([1.0, 0.0, 0.0], k).unwrap();
        let cone = SolidCone::<f64>::new(3, Region::HalfSpace { normal: [1.0, 0.0, 0.0] }).unwrap();
        let jet = d.ambient_jet(&cone, &[1.0, 0.0, 0.0]).unwrap();
        assert!((jet.grad_psi[0] - k).abs() < 1e-14 && jet.grad_psi[1].abs() < 1e-14);
        for p in [[1.0, 0.3, -0.2], [0.5, 2.0, 1.0]] {
            for v in [[1.0, 0.0, 0.0], [0.0, 0.6, 0.8], [0.48, 0.6, 0.64]] {
                let val = d.ric_f_k(&cone, &p, &v).unwrap();
                assert!(val.abs() < 1e-12, "{val}");
            }
        }
    }

    #[test]
    fn perturbed_radial_jet_matches_log_density_differences() {
        let d = HomogeneousDensity::perturbed_radial(
            -2.5,
            [0.3, -0.2, 0.5],
            [[0.2, 0.1, 0.0], [0.1, -0.3, 0.05], [0.0, 0.05, 0.1]],
            0.7,
        )
        .unwrap();
        let cone = SolidCone::<f64>::full(3).unwrap();
        let psi = |x: &Vec3<f64>| d.value_unchecked(x).unwrap().ln();
        for p in [[0.4, 1.1, -0.7], [-1.5, 0.2, 0.9], [0.1, 0.1, 2.0]] {
            let jet = d.ambient_jet(&cone, &p).unwrap();
            let g = fd::gradient(&psi, &p, 3, 1e-4);
            let h = fd::hessian(&psi, &p, 3, 1e-3);
            for i in 0..3 {
                assert!((jet.grad_psi[i] - g[i]).abs() < 1e-6);
                for j in 0..3 {
                    assert!((jet.hess_psi[i][j] - h[i][j]).abs() < 1e-6, "{i}{j}");
                }
            }
        }
    }

    #[test]
    fn monomial_bakry_emery_nonnegative() {
        let d = HomogeneousDensity::monomial(&[1.0, 1.0]).unwrap();
        let s = std::f64::consts::FRAC_1_SQRT_2;
        let v = d.ric_f_k(&quadrant(), &[1.0, 1.0, 0.0], &[s, -s, 0.0]).unwrap();
        assert!(v >= 0.0);
        // f^{1/2} = sqrt(xy): Ric_f^k(v, v) = -k ∇²F(v, v)/F = 1 at (1,1)
        assert!((v - 1.0).abs() < 1e-12, "{v}");
    }

    #[test]
    fn constant_expression_is_flat() {
        let d = HomogeneousDensity::<f64>::expression(0.0, "1").unwrap();
        let c = plane();
        assert!(d.ric_f(&c, &[0.3, 0.9, 0.0], &[0.6, 0.8, 0.0]).unwrap().abs() < 1e-12);
        assert_eq!(d.ric_f_k(&c, &[0.3, 0.9, 0.0], &[0.6, 0.8, 0.0]), Err(Error::DegreeZero));
    }

    #[test]
    fn expression_jet_matches_analytic_family() {
        // same η as a perturbed radial profile, written as a formula
        let analytic = HomogeneousDensity::perturbed_radial(
            1.5,
            [0.4, 0.0, -0.3],
            [[0.0; 3], [0.0, 0.2, 0.0], [0.0; 3]],
            1.0,
        )
        .unwrap();
        let formula = HomogeneousDensity::expression(1.5, "exp(0.4*x - 0.3*z + 0.2*y^2)").unwrap();
        let cone = SolidCone::<f64>::circular(3, [0.0, 0.0, 1.0], 1.2).unwrap();
        let p: Vec3<f64> = [0.3, 0.5, 1.1];
        let a = analytic.ambient_jet(&cone, &p).unwrap();
        let b = formula.ambient_jet(&cone, &p).unwrap();
        for i in 0..3 {
            assert!((a.grad_psi[i] - b.grad_psi[i]).abs() < 1e-8);
            for j in 0..3 {
                assert!((a.hess_psi[i][j] - b.hess_psi[i][j]).abs() < 1e-5);
            }
        }
    }

    #[test]
    fn finite_difference_mode_checks_boundary_distance() {
        let d = HomogeneousDensity::radial(1.0).with_finite_differences(1e-4).unwrap();
        let c = quadrant();
        let near = [1.0, 1e-5, 0.0];
        assert!(matches!(d.ambient_jet(&c, &near), Err(Error::BoundaryTooClose { .. })));
        assert!(d.ambient_jet(&c, &[1.0, 1.0, 0.0]).is_ok());
    }

    #[test]
    fn certification_examples() {
        let sampling = CdSampling::<f64>::default();
        let circ = SolidCone::<f64>::circular(3, [0.0, 0.0, 1.0], 0.9).unwrap();
        let r = HomogeneousDensity::radial(-3.0).certify_cd(&circ, &sampling).unwrap();
        assert!(r.cd_certified && r.verdicts_agree());
        assert!((r.min_sphere_margin - 3.0).abs() < 1e-12);

        let full = SolidCone::<f64>::full(3).unwrap();
        let r = HomogeneousDensity::radial(2.0).certify_cd(&full, &sampling).unwrap();
        assert!(!r.cd_certified && r.verdicts_agree());

        let orthant = SolidCone::<f64>::circular(3, [1.0, 1.0, 1.0], 0.6).unwrap();
        let m = HomogeneousDensity::monomial(&[1.0, 2.0, 0.5]).unwrap();
        let r = m.certify_cd(&orthant, &sampling).unwrap();
        assert!(r.cd_certified && r.verdicts_agree(), "{r:?}");

        let q = quadrant();
        let m2 = HomogeneousDensity::monomial(&[1.0, 1.0]).unwrap();
        let r = m2.certify_cd(&q, &sampling).unwrap();
        assert!(r.cd_certified && r.verdicts_agree());
        assert!(r.min_ric_f_k <= 0.0);
    }

    #[test]
    fn matrimonio_examples() {
        let lp = HomogeneousDensity::linear_power([1.0, 0.5, 0.0], 3.0).unwrap();
        let half = SolidCone::<f64>::new(2, Region::HalfSpace { normal: [1.0, 0.0, 0.0] }).unwrap();
        assert!(lp.matrimonio_residual(&half, &[1.0, 0.4, 0.0]).unwrap() < 1e-6);
        let rad = HomogeneousDensity::radial(-3.0);
        assert!(rad.matrimonio_residual(&plane(), &[0.0, 2.0, 0.0]).unwrap() < 1e-6);
        let m = HomogeneousDensity::monomial(&[1.0, 1.0]).unwrap();
        assert!(m.matrimonio_residual(&quadrant(), &[1.0, 2.0, 0.0]).unwrap() < 1e-6);
    }
}
