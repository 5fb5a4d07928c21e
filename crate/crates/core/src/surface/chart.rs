//! Parameterizations of curves (`n = 1`) and surfaces (`n = 2`).
//!
//! Surface charts are polar: `θ` runs over an interval and `φ` is the
//! `2π`-periodic azimuth. Curve charts use a single parameter `t`.

use std::fmt::Debug;
use std::sync::Arc;

use crate::cone::{Region, SolidCone};
use crate::expr::Expression;
use crate::fd;
use crate::linalg::{self, Vec3};
use crate::scalar::Real;
use crate::{Error, Result};

/// What happens at an end of the non-periodic parameter interval.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum End {
    /// Degenerate polar point of the chart, interior to the surface.
    Pole,
    /// Part of `∂Σ`, lying on `∂M`.
    Boundary,
    /// Edge of an excluded neighborhood of the vertex (not part of `∂Σ`).
    Puncture,
}

/// Parameter domain: `[lo, hi]` in the first direction (periodic for closed
/// curves); surfaces add the periodic azimuth `[0, 2π)`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ParamDomain<T: Real> {
    pub lo: T,
    pub hi: T,
    pub periodic: bool,
    pub lo_end: End,
    pub hi_end: End,
}

/// Position and derivatives at a parameter point.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ChartJet<T: Real> {
    pub x: Vec3<T>,
    pub d: [Vec3<T>; 2],
    pub dd: [[Vec3<T>; 2]; 2],
}

pub trait Chart<T: Real>: Send + Sync + Debug {
    /// Hypersurface dimension `n`.
    fn param_dim(&self) -> usize;

    fn domain(&self) -> ParamDomain<T>;

    fn position(&self, u: [T; 2]) -> Vec3<T>;

    /// `+1` when the normal is the rotated tangent (curves) or `X_θ × X_φ`
    /// (surfaces), `-1` for the opposite orientation.
    fn orientation(&self) -> T;

    /// Step for the default finite-difference jet.
    fn fd_step(&self) -> T {
        T::c(1e-3)
    }

    fn jet(&self, u: [T; 2]) -> ChartJet<T> {
        fd_jet(self, u)
    }

    /// Parameter interval where `|X|` lies in `[inner, outer]`, for charts
    /// whose first parameter measures the approach to the vertex.
    fn vertex_band(&self, _inner: T, _outer: T) -> Option<(T, T)> {
        None
    }
}

/// Fourth-order finite-difference jet of any chart.
pub fn fd_jet<T: Real, C: Chart<T> + ?Sized>(chart: &C, u: [T; 2]) -> ChartJet<T> {
    let h = chart.fd_step();
    let n = chart.param_dim();
    let x = chart.position(u);
    let zero = linalg::zero3();
    let mut d = [zero; 2];
    let mut dd = [[zero; 2]; 2];
    let at = |a: T, b: T| chart.position([a, b]);
    let two = T::c(2.0);
    for i in 0..n {
        let shift = |s: T| {
            let mut v = u;
            v[i] = v[i] + s;
            v
        };
        let pm2 = chart.position(shift(-two * h));
        let pm1 = chart.position(shift(-h));
        let pp1 = chart.position(shift(h));
        let pp2 = chart.position(shift(two * h));
        for c in 0..3 {
            d[i][c] = fd::d1_5(pm2[c], pm1[c], pp1[c], pp2[c], h);
            dd[i][i][c] = fd::d2_5(pm2[c], pm1[c], x[c], pp1[c], pp2[c], h);
        }
    }
    if n == 2 {
        let offs = [-two * h, -h, h, two * h];
        let mut inner = [zero; 4];
        for (slot, oa) in inner.iter_mut().zip(offs) {
            let col = |ob: T| at(u[0] + oa, u[1] + ob);
            *slot = fd::vector_d1(&col, T::zero(), h);
        }
        for c in 0..3 {
            let v = fd::d1_5(inner[0][c], inner[1][c], inner[2][c], inner[3][c], h);
            dd[0][1][c] = v;
            dd[1][0][c] = v;
        }
    }
    ChartJet { x, d, dd }
}

/// Unit normal from first derivatives, with the chart orientation applied.
pub fn chart_normal<T: Real>(n: usize, d: &[Vec3<T>; 2], orientation: T) -> Option<Vec3<T>> {
    let raw = if n == 1 {
        [-d[0][1], d[0][0], T::zero()]
    } else {
        linalg::cross(&d[0], &d[1])
    };
    linalg::normalize(&raw).map(|v| linalg::scale(orientation, &v))
}

/// Right-handed frame `(a, e1, e2)` with `e1 × e2 = a`.
pub(crate) fn polar_frame<T: Real>(a: &Vec3<T>) -> (Vec3<T>, Vec3<T>) {
    let (e1, _) = linalg::orthonormal_frame(a);
    let e2 = linalg::cross(a, &e1);
    (e1, e2)
}

/// Unit vector at polar angle `θ` from `a`, azimuth `φ`, and its derivatives.
fn sphere_point<T: Real>(a: &Vec3<T>, e1: &Vec3<T>, e2: &Vec3<T>, th: T, ph: T) -> [Vec3<T>; 6] {
    let (st, ct) = th.sin_cos();
    let (sp, cp) = ph.sin_cos();
    let comb = |ca: T, c1: T, c2: T| {
        linalg::add(
            &linalg::scale(ca, a),
            &linalg::add(&linalg::scale(c1, e1), &linalg::scale(c2, e2)),
        )
    };
    [
        comb(ct, st * cp, st * sp),
        comb(-st, ct * cp, ct * sp),                   // θ
        comb(T::zero(), -st * sp, st * cp),            // φ
        comb(-ct, -st * cp, -st * sp),                 // θθ
        comb(T::zero(), -ct * sp, ct * cp),            // θφ
        comb(T::zero(), -st * cp, -st * sp),           // φφ
    ]
}

/// Round sphere (`n = 2`) or circle (`n = 1`) `c + R x̂`, in polar form
/// around `axis`, restricted to a parameter interval.
#[derive(Debug, Clone)]
pub struct RoundChart<T: Real> {
    n: usize,
    center: Vec3<T>,
    radius: T,
    axis: Vec3<T>,
    e1: Vec3<T>,
    e2: Vec3<T>,
    domain: ParamDomain<T>,
    orientation: T,
    band_origin: bool,
}

impl<T: Real> RoundChart<T> {
    fn new(n: usize, center: Vec3<T>, radius: T, axis: Vec3<T>, domain: ParamDomain<T>) -> Self {
        let (e1, e2) = if n == 1 {
            ([-axis[1], axis[0], T::zero()], linalg::zero3())
        } else {
            polar_frame(&axis)
        };
        // inward normal: counterclockwise curves rotate to the inside, the
        // polar cross product points outward
        let orientation = if n == 1 { T::one() } else { -T::one() };
        Self {
            n,
            center,
            radius,
            axis,
            e1,
            e2,
            domain,
            orientation,
            band_origin: false,
        }
    }

    /// Spherical cap `Σ = ∂B_r ∩ M` with inward normal.
    pub fn cap(cone: &SolidCone<T>, r: T) -> Self {
        let n = cone.n();
        if n == 1 {
            let (start, span) = cone.arc_range();
            let periodic = matches!(cone.region(), Region::FullSphere);
            let axis = [start.cos(), start.sin(), T::zero()];
            let domain = ParamDomain {
                lo: T::zero(),
                hi: span,
                periodic,
                lo_end: End::Boundary,
                hi_end: End::Boundary,
            };
            return Self::new(1, linalg::zero3(), r, axis, domain);
        }
        let (axis, extent) = cone.polar_frame();
        let hi_end = if cone.has_boundary() { End::Boundary } else { End::Pole };
        let domain = ParamDomain {
            lo: T::zero(),
            hi: extent,
            periodic: false,
            lo_end: End::Pole,
            hi_end,
        };
        Self::new(2, linalg::zero3(), r, axis, domain)
    }

    /// Closed round sphere or circle.
    pub fn sphere(n: usize, center: Vec3<T>, radius: T) -> Self {
        let axis = if n == 1 {
            [T::one(), T::zero(), T::zero()]
        } else {
            [T::zero(), T::zero(), T::one()]
        };
        let domain = if n == 1 {
            ParamDomain {
                lo: T::zero(),
                hi: T::c(2.0) * T::PI(),
                periodic: true,
                lo_end: End::Pole,
                hi_end: End::Pole,
            }
        } else {
            ParamDomain {
                lo: T::zero(),
                hi: T::PI(),
                periodic: false,
                lo_end: End::Pole,
                hi_end: End::Pole,
            }
        };
        Self::new(n, center, radius, axis, domain)
    }

    /// Sphere of radius `|center|` through the vertex, with the polar angle
    /// measured from the vertex and the directions of `|X| < puncture`
    /// excluded.
    pub fn through_origin(n: usize, center: Vec3<T>, puncture: T) -> Result<Self> {
        let r = linalg::norm(&center);
        if !(r > T::zero()) || !(puncture > T::zero()) || puncture >= T::c(2.0) * r {
            return Err(Error::InvalidInput(
                "sphere through the vertex needs a nonzero center and a puncture below the diameter".into(),
            ));
        }
        let axis = linalg::scale(-T::one() / r, &center);
        let tp = T::c(2.0) * (puncture / (T::c(2.0) * r)).asin();
        let domain = if n == 1 {
            ParamDomain {
                lo: tp,
                hi: T::c(2.0) * T::PI() - tp,
                periodic: false,
                lo_end: End::Puncture,
                hi_end: End::Puncture,
            }
        } else {
            ParamDomain {
                lo: tp,
                hi: T::PI(),
                periodic: false,
                lo_end: End::Puncture,
                hi_end: End::Pole,
            }
        };
        let mut c = Self::new(n, center, r, axis, domain);
        c.band_origin = true;
        Ok(c)
    }

    pub fn center(&self) -> Vec3<T> {
        self.center
    }

    pub fn radius(&self) -> T {
        self.radius
    }
}

impl<T: Real> Chart<T> for RoundChart<T> {
    fn param_dim(&self) -> usize {
        self.n
    }

    fn domain(&self) -> ParamDomain<T> {
        self.domain
    }

    fn orientation(&self) -> T {
        self.orientation
    }

    fn position(&self, u: [T; 2]) -> Vec3<T> {
        self.jet(u).x
    }

    fn jet(&self, u: [T; 2]) -> ChartJet<T> {
        let r = self.radius;
        let zero = linalg::zero3();
        if self.n == 1 {
            let (s, c) = u[0].sin_cos();
            let a = &self.axis;
            let b = &self.e1;
            let x = linalg::add(&self.center, &linalg::add(&linalg::scale(r * c, a), &linalg::scale(r * s, b)));
            let d0 = linalg::add(&linalg::scale(-r * s, a), &linalg::scale(r * c, b));
            let dd0 = linalg::add(&linalg::scale(-r * c, a), &linalg::scale(-r * s, b));
            return ChartJet {
                x,
                d: [d0, zero],
                dd: [[dd0, zero], [zero, zero]],
            };
        }
        let p = sphere_point(&self.axis, &self.e1, &self.e2, u[0], u[1]);
        ChartJet {
            x: linalg::axpy(&self.center, r, &p[0]),
            d: [linalg::scale(r, &p[1]), linalg::scale(r, &p[2])],
            dd: [
                [linalg::scale(r, &p[3]), linalg::scale(r, &p[4])],
                [linalg::scale(r, &p[4]), linalg::scale(r, &p[5])],
            ],
        }
    }

    fn vertex_band(&self, inner: T, outer: T) -> Option<(T, T)> {
        if !self.band_origin {
            return None;
        }
        // |X| = 2 R sin(θ/2) for θ measured from the vertex
        let two_r = T::c(2.0) * self.radius;
        if outer >= two_r {
            return None;
        }
        let t = |s: T| T::c(2.0) * (s / two_r).asin();
        Some((t(inner), t(outer)))
    }
}

/// Closed ellipse `c + (a cos t, b sin t)` or ellipsoid
/// `c + (a sinθ cosφ, b sinθ sinφ, c cosθ)`, inward normal.
#[derive(Debug, Clone)]
pub struct EllipsoidChart<T: Real> {
    n: usize,
    center: Vec3<T>,
    semi_axes: Vec3<T>,
}

impl<T: Real> EllipsoidChart<T> {
    pub fn new(n: usize, center: Vec3<T>, semi_axes: Vec3<T>) -> Self {
        Self { n, center, semi_axes }
    }
}

impl<T: Real> Chart<T> for EllipsoidChart<T> {
    fn param_dim(&self) -> usize {
        self.n
    }

    fn domain(&self) -> ParamDomain<T> {
        if self.n == 1 {
            ParamDomain {
                lo: T::zero(),
                hi: T::c(2.0) * T::PI(),
                periodic: true,
                lo_end: End::Pole,
                hi_end: End::Pole,
            }
        } else {
            ParamDomain {
                lo: T::zero(),
                hi: T::PI(),
                periodic: false,
                lo_end: End::Pole,
                hi_end: End::Pole,
            }
        }
    }

    fn orientation(&self) -> T {
        if self.n == 1 {
            T::one()
        } else {
            -T::one()
        }
    }

    fn position(&self, u: [T; 2]) -> Vec3<T> {
        self.jet(u).x
    }

    fn jet(&self, u: [T; 2]) -> ChartJet<T> {
        let [a, b, c] = self.semi_axes;
        let zero = linalg::zero3();
        let z = T::zero();
        if self.n == 1 {
            let (s, co) = u[0].sin_cos();
            return ChartJet {
                x: linalg::add(&self.center, &[a * co, b * s, z]),
                d: [[-a * s, b * co, z], zero],
                dd: [[[-a * co, -b * s, z], zero], [zero, zero]],
            };
        }
        let (st, ct) = u[0].sin_cos();
        let (sp, cp) = u[1].sin_cos();
        ChartJet {
            x: linalg::add(&self.center, &[a * st * cp, b * st * sp, c * ct]),
            d: [[a * ct * cp, b * ct * sp, -c * st], [-a * st * sp, b * st * cp, z]],
            dd: [
                [[-a * st * cp, -b * st * sp, -c * ct], [-a * ct * sp, b * ct * cp, z]],
                [[-a * ct * sp, b * ct * cp, z], [-a * st * cp, -b * st * sp, z]],
            ],
        }
    }
}

/// Radial graph `X(q) = ρ(q) q` over the cone's spherical region, with `ρ`
/// given by an expression in the direction `q`.
#[derive(Debug, Clone)]
pub struct RadialGraphChart<T: Real> {
    base: RoundChart<T>,
    rho: Expression,
}

impl<T: Real> RadialGraphChart<T> {
    pub fn new(cone: &SolidCone<T>, rho: Expression) -> Self {
        Self {
            base: RoundChart::cap(cone, T::one()),
            rho,
        }
    }
}

impl<T: Real> Chart<T> for RadialGraphChart<T> {
    fn param_dim(&self) -> usize {
        self.base.param_dim()
    }

    fn domain(&self) -> ParamDomain<T> {
        self.base.domain()
    }

    fn orientation(&self) -> T {
        self.base.orientation()
    }

    fn fd_step(&self) -> T {
        T::c(1e-3)
    }

    fn position(&self, u: [T; 2]) -> Vec3<T> {
        let q = self.base.position(u);
        let rho = self.rho.eval(&crate::density::spherical_bindings(&q));
        linalg::scale(rho, &q)
    }
}

/// `s · X` for a wrapped chart.
#[derive(Debug, Clone)]
pub struct ScaledChart<T: Real> {
    inner: Arc<dyn Chart<T>>,
    factor: T,
}

impl<T: Real> ScaledChart<T> {
    pub fn new(inner: Arc<dyn Chart<T>>, factor: T) -> Self {
        Self { inner, factor }
    }
}

impl<T: Real> Chart<T> for ScaledChart<T> {
    fn param_dim(&self) -> usize {
        self.inner.param_dim()
    }

    fn domain(&self) -> ParamDomain<T> {
        self.inner.domain()
    }

    fn orientation(&self) -> T {
        self.inner.orientation()
    }

    fn fd_step(&self) -> T {
        self.inner.fd_step()
    }

    fn position(&self, u: [T; 2]) -> Vec3<T> {
        linalg::scale(self.factor, &self.inner.position(u))
    }

    fn jet(&self, u: [T; 2]) -> ChartJet<T> {
        let j = self.inner.jet(u);
        let s = |v: &Vec3<T>| linalg::scale(self.factor, v);
        ChartJet {
            x: s(&j.x),
            d: [s(&j.d[0]), s(&j.d[1])],
            dd: [[s(&j.dd[0][0]), s(&j.dd[0][1])], [s(&j.dd[1][0]), s(&j.dd[1][1])]],
        }
    }

    fn vertex_band(&self, inner: T, outer: T) -> Option<(T, T)> {
        self.inner.vertex_band(inner / self.factor, outer / self.factor)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn check_against_fd<C: Chart<f64>>(c: &C, u: [f64; 2]) {
        let a = c.jet(u);
        let b = fd_jet(c, u);
        let n = c.param_dim();
        for i in 0..n {
            for k in 0..3 {
                assert!((a.d[i][k] - b.d[i][k]).abs() < 1e-9, "d{i}");
                for j in 0..n {
                    assert!((a.dd[i][j][k] - b.dd[i][j][k]).abs() < 1e-6, "dd{i}{j}");
                }
            }
        }
    }

    #[test]
    fn analytic_jets_match_finite_differences() {
        let cone = SolidCone::<f64>::circular(3, [0.2, 0.1, 1.0], 0.9).unwrap();
        check_against_fd(&RoundChart::<f64>::cap(&cone, 1.7), [0.4, 2.1]);
        check_against_fd(&RoundChart::<f64>::sphere(2, [0.1, 0.2, 3.0], 0.8), [1.1, 5.0]);
        check_against_fd(&RoundChart::<f64>::through_origin(2, [0.0, 0.0, 1.0], 1e-3).unwrap(), [0.9, 0.3]);
        check_against_fd(&RoundChart::<f64>::through_origin(1, [0.3, 1.0, 0.0], 1e-3).unwrap(), [2.0, 0.0]);
        check_against_fd(&EllipsoidChart::new(2, [0.0, 0.0, 3.0], [2.0, 1.0, 1.5]), [0.7, 1.3]);
        check_against_fd(&EllipsoidChart::new(1, [0.0, 3.0, 0.0], [2.0, 1.0, 0.0]), [0.7, 0.0]);
        let plane = SolidCone::<f64>::sector(2.0).unwrap();
        check_against_fd(&RoundChart::<f64>::cap(&plane, 2.0), [1.2, 0.0]);
    }

    #[test]
    fn cap_normals_point_to_the_vertex() {
        let cone = SolidCone::<f64>::circular(3, [0.0, 0.0, 1.0], 0.7).unwrap();
        let c = RoundChart::<f64>::cap(&cone, 2.0);
        let j = c.jet([0.3, 1.0]);
        let n = chart_normal(2, &j.d, c.orientation()).unwrap();
        let expect = linalg::scale(-0.5, &j.x);
        assert!(linalg::norm(&linalg::sub(&n, &expect)) < 1e-14);
        let arc = RoundChart::<f64>::cap(&SolidCone::<f64>::full(2).unwrap(), 1.0);
        let j = arc.jet([0.3, 0.0]);
        let n = chart_normal(1, &j.d, arc.orientation()).unwrap();
        assert!(linalg::norm(&linalg::add(&n, &j.x)) < 1e-14);
    }

    #[test]
    fn puncture_radius_is_respected() {
        let c = RoundChart::<f64>::through_origin(2, [0.0, 0.0, 1.0], 1e-3).unwrap();
        let d = c.domain();
        let x = c.position([d.lo, 0.4]);
        assert!((linalg::norm(&x) - 1e-3).abs() < 1e-15);
        let (a, b) = c.vertex_band(0.01, 0.02).unwrap();
        assert!((linalg::norm(&c.position([a, 0.0])) - 0.01).abs() < 1e-14);
        assert!((linalg::norm(&c.position([b, 0.0])) - 0.02).abs() < 1e-14);
    }
}
