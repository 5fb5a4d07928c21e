//! Solid cones `M = {t p : t >= 0, p in D}` over a spherical region `D`.

use crate::linalg::{self, dot, norm, Vec3};
use crate::scalar::Real;
use crate::{Error, Result};

/// Spherical region generating the cone.
#[derive(Debug, Clone, PartialEq)]
pub enum Region<T: Real> {
    /// `D = S^n`, the cone is the whole space.
    FullSphere,
    /// Closed half-space `{<p, normal> >= 0}`; `normal` is the inner unit normal.
    HalfSpace { normal: Vec3<T> },
    /// Directions within `half_aperture` of `axis`.
    Circular { axis: Vec3<T>, half_aperture: T },
    /// Planar sector `0 <= polar angle <= angle` (ambient dimension 2 only).
    PlanarSector { angle: T },
}

#[derive(Debug, Clone, PartialEq)]
pub struct SolidCone<T: Real> {
    ambient_dim: usize,
    region: Region<T>,
}

impl<T: Real> SolidCone<T> {
    pub fn new(ambient_dim: usize, region: Region<T>) -> Result<Self> {
        if !(2..=3).contains(&ambient_dim) {
            return Err(Error::InvalidInput(format!(
                "ambient dimension must be 2 or 3, got {ambient_dim}"
            )));
        }
        let unit = |v: &Vec3<T>| {
            let extra = v[ambient_dim..].iter().any(|x| *x != T::zero());
            !extra && (norm(v) - T::one()).abs() <= T::c(1e-12).max(T::epsilon() * T::c(4.0))
        };
        match &region {
            Region::FullSphere => {}
            Region::HalfSpace { normal } => {
                if !unit(normal) {
                    return Err(Error::InvalidInput("half-space normal must be a unit vector".into()));
                }
            }
            Region::Circular {
                axis,
                half_aperture,
            } => {
                if !unit(axis) {
                    return Err(Error::InvalidInput("cone axis must be a unit vector".into()));
                }
                if !(*half_aperture > T::zero() && *half_aperture < T::PI()) {
                    return Err(Error::InvalidInput("half aperture must lie in (0, pi)".into()));
                }
            }
            Region::PlanarSector { angle } => {
                if ambient_dim != 2 {
                    return Err(Error::InvalidInput("planar sectors need ambient dimension 2".into()));
                }
                if !(*angle > T::zero() && *angle < T::c(2.0) * T::PI()) {
                    return Err(Error::InvalidInput("sector angle must lie in (0, 2 pi)".into()));
                }
            }
        }
        Ok(Self {
            ambient_dim,
            region,
        })
    }

    pub fn full(ambient_dim: usize) -> Result<Self> {
        Self::new(ambient_dim, Region::FullSphere)
    }

    /// Half-space bounded by the hyperplane orthogonal to the last axis.
    pub fn half_space(ambient_dim: usize) -> Result<Self> {
        let mut normal = linalg::zero3();
        normal[ambient_dim.saturating_sub(1).min(2)] = T::one();
        Self::new(ambient_dim, Region::HalfSpace { normal })
    }

    /// Circular cone; the axis is normalized here.
    pub fn circular(ambient_dim: usize, axis: Vec3<T>, half_aperture: T) -> Result<Self> {
        let axis = linalg::normalize(&axis).ok_or_else(|| Error::InvalidInput("zero axis".into()))?;
        Self::new(
            ambient_dim,
            Region::Circular {
                axis,
                half_aperture,
            },
        )
    }

    pub fn sector(angle: T) -> Result<Self> {
        Self::new(2, Region::PlanarSector { angle })
    }

    pub fn ambient_dim(&self) -> usize {
        self.ambient_dim
    }

    /// Dimension `n` of hypersurfaces in the cone.
    pub fn n(&self) -> usize {
        self.ambient_dim - 1
    }

    pub fn region(&self) -> &Region<T> {
        &self.region
    }

    pub fn is_convex(&self) -> bool {
        match &self.region {
            Region::FullSphere | Region::HalfSpace { .. } => true,
            Region::Circular { half_aperture, .. } => *half_aperture <= T::FRAC_PI_2(),
            Region::PlanarSector { angle } => *angle <= T::PI(),
        }
    }

    pub fn has_boundary(&self) -> bool {
        !matches!(self.region, Region::FullSphere)
    }

    /// Signed geodesic distance on the unit sphere from the direction `q` to
    /// `∂D`, positive inside `D`. `+inf` for the full sphere.
    pub fn boundary_distance(&self, q: &Vec3<T>) -> T {
        let q = match linalg::normalize(q) {
            Some(q) => q,
            None => return T::infinity(),
        };
        match &self.region {
            Region::FullSphere => T::infinity(),
            Region::HalfSpace { normal } => clamp_unit(dot(&q, normal)).asin(),
            Region::Circular {
                axis,
                half_aperture,
            } => *half_aperture - clamp_unit(dot(&q, axis)).acos(),
            Region::PlanarSector { angle } => {
                let theta = polar_angle(&q);
                if theta <= *angle {
                    theta.min(*angle - theta)
                } else {
                    -(theta - *angle).min(T::c(2.0) * T::PI() - theta)
                }
            }
        }
    }

    /// Membership with tolerance `tol` (radians on the sphere). Scale invariant.
    pub fn contains_tol(&self, p: &Vec3<T>, tol: T) -> bool {
        if p[self.ambient_dim..].iter().any(|x| *x != T::zero()) {
            return false;
        }
        if norm(p) == T::zero() {
            return true;
        }
        self.boundary_distance(p) >= -tol
    }

    pub fn contains(&self, p: &Vec3<T>) -> bool {
        self.contains_tol(p, T::c(1e-10))
    }

    /// Inner unit normal of `∂M` at (or nearest to) the point `p != 0`.
    pub fn inner_normal(&self, p: &Vec3<T>) -> Option<Vec3<T>> {
        let q = linalg::normalize(p)?;
        match &self.region {
            Region::FullSphere => None,
            Region::HalfSpace { normal } => Some(*normal),
            Region::Circular {
                axis,
                half_aperture,
            } => {
                let mut n = linalg::axpy(axis, -half_aperture.cos(), &q);
                // rotate q onto the boundary when it is not exactly there
                let s = norm(&n);
                if s == T::zero() {
                    return None;
                }
                n = linalg::scale(T::one() / s, &n);
                // tangent plane of the boundary at the radial projection of q
                let along = dot(&n, &q);
                let n = linalg::axpy(&n, -along, &q);
                linalg::normalize(&n)
            }
            Region::PlanarSector { angle } => {
                let theta = polar_angle(&q);
                let near_start = theta.min(T::c(2.0) * T::PI() - theta) <= (theta - *angle).abs();
                if near_start {
                    Some([T::zero(), T::one(), T::zero()])
                } else {
                    Some([angle.sin(), -angle.cos(), T::zero()])
                }
            }
        }
    }

    /// Second fundamental form `II(u, v) = -<D_u N_in, v>` of `∂M` at the
    /// boundary point `p`, with respect to the inner normal.
    pub fn boundary_second_form(&self, p: &Vec3<T>, u: &Vec3<T>, v: &Vec3<T>) -> T {
        match &self.region {
            Region::Circular { half_aperture, .. } if self.ambient_dim == 3 => {
                let r = norm(p);
                if r == T::zero() {
                    return T::zero();
                }
                let q = linalg::scale(T::one() / r, p);
                let cot = half_aperture.cos() / half_aperture.sin();
                cot / r * (dot(u, v) - dot(u, &q) * dot(v, &q))
            }
            // flat boundary pieces and rays
            _ => T::zero(),
        }
    }

    /// Surface measure of `D` in `S^n`.
    pub fn solid_angle(&self) -> T {
        let two = T::c(2.0);
        let pi = T::PI();
        match (&self.region, self.ambient_dim) {
            (Region::FullSphere, 2) => two * pi,
            (Region::FullSphere, _) => T::c(4.0) * pi,
            (Region::HalfSpace { .. }, 2) => pi,
            (Region::HalfSpace { .. }, _) => two * pi,
            (Region::Circular { half_aperture, .. }, 2) => two * *half_aperture,
            (Region::Circular { half_aperture, .. }, _) => two * pi * (T::one() - half_aperture.cos()),
            (Region::PlanarSector { angle }, _) => *angle,
        }
    }

    /// Deterministic equal-angle grid of directions in `D` at geodesic
    /// distance at least `guard` from `∂D`.
    pub fn sample_directions(&self, polar: usize, azimuth: usize, guard: T) -> Vec<Vec3<T>> {
        let polar = polar.max(1);
        let azimuth = azimuth.max(1);
        let mut out = Vec::new();
        let (axis, max_angle) = self.polar_frame();
        if self.ambient_dim == 2 {
            // one-parameter family of directions
            let (start, span) = self.arc_range();
            let periodic = matches!(self.region, Region::FullSphere);
            let count = polar * azimuth;
            for i in 0..count {
                let t = if periodic {
                    T::from_usize_lossy(i) / T::from_usize_lossy(count)
                } else {
                    (T::from_usize_lossy(i) + T::c(0.5)) / T::from_usize_lossy(count)
                };
                let theta = start + span * t;
                let q = [theta.cos(), theta.sin(), T::zero()];
                if self.boundary_distance(&q) >= guard {
                    out.push(q);
                }
            }
            return out;
        }
        let (e1, e2) = linalg::orthonormal_frame(&axis);
        for i in 0..polar {
            let theta = max_angle * (T::from_usize_lossy(i) + T::c(0.5)) / T::from_usize_lossy(polar);
            for j in 0..azimuth {
                let phi = T::c(2.0) * T::PI() * T::from_usize_lossy(j) / T::from_usize_lossy(azimuth);
                let q = linalg::add(
                    &linalg::scale(theta.cos(), &axis),
                    &linalg::add(
                        &linalg::scale(theta.sin() * phi.cos(), &e1),
                        &linalg::scale(theta.sin() * phi.sin(), &e2),
                    ),
                );
                if self.boundary_distance(&q) >= guard {
                    out.push(q);
                }
            }
        }
        out
    }

    /// Symmetry axis and the polar extent of `D` around it (spatial cones).
    pub(crate) fn polar_frame(&self) -> (Vec3<T>, T) {
        let last = [T::zero(), T::zero(), T::one()];
        match &self.region {
            Region::FullSphere => (last, T::PI()),
            Region::HalfSpace { normal } => (*normal, T::FRAC_PI_2()),
            Region::Circular {
                axis,
                half_aperture,
            } => (*axis, *half_aperture),
            Region::PlanarSector { angle } => {
                let mid = *angle * T::c(0.5);
                ([mid.cos(), mid.sin(), T::zero()], mid)
            }
        }
    }

    /// Start angle and angular span of `D` for planar cones.
    pub(crate) fn arc_range(&self) -> (T, T) {
        let two_pi = T::c(2.0) * T::PI();
        match &self.region {
            Region::FullSphere => (T::zero(), two_pi),
            Region::PlanarSector { angle } => (T::zero(), *angle),
            Region::HalfSpace { normal } => {
                let a = polar_angle(normal);
                (a - T::FRAC_PI_2(), T::PI())
            }
            Region::Circular {
                axis,
                half_aperture,
            } => {
                let a = polar_angle(axis);
                (a - *half_aperture, T::c(2.0) * *half_aperture)
            }
        }
    }
}

fn clamp_unit<T: Real>(x: T) -> T {
    x.max(-T::one()).min(T::one())
}

/// Polar angle in `[0, 2 pi)` of the planar part of `q`.
pub fn polar_angle<T: Real>(q: &Vec3<T>) -> T {
    let a = q[1].atan2(q[0]);
    if a < T::zero() {
        a + T::c(2.0) * T::PI()
    } else {
        a
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fd;
    use std::f64::consts::{FRAC_PI_2, FRAC_PI_4, PI};

    #[test]
    fn rejects_non_unit_axis_and_bad_dims() {
        assert!(SolidCone::<f64>::new(3, Region::Circular { axis: [0.0, 0.0, 2.0], half_aperture: 0.5 }).is_err());
        assert!(SolidCone::<f64>::new(4, Region::FullSphere).is_err());
        assert!(SolidCone::<f64>::new(3, Region::PlanarSector { angle: 1.0 }).is_err());
        assert!(SolidCone::<f64>::circular(3, [0.0, 0.0, 2.0], 0.5).is_ok());
    }

    #[test]
    fn membership_is_scale_invariant() {
        let cone = SolidCone::<f64>::circular(3, [0.0, 0.0, 1.0], FRAC_PI_4).unwrap();
        let inside = [0.1, 0.2, 1.0];
        let outside = [1.0, 0.0, 0.5];
        for t in [1e-6, 0.3, 1.0, 7.0, 1e5] {
            assert!(cone.contains(&linalg::scale(t, &inside)));
            assert!(!cone.contains(&linalg::scale(t, &outside)));
        }
        let sector = SolidCone::<f64>::sector(FRAC_PI_2).unwrap();
        assert!(sector.contains(&[1.0, 1.0, 0.0]));
        assert!(!sector.contains(&[-1.0, 0.1, 0.0]));
        assert!(!sector.contains(&[1.0, 1.0, 0.5]));
    }

    #[test]
    fn convexity_metadata() {
        assert!(SolidCone::<f64>::full(3).unwrap().is_convex());
        assert!(SolidCone::<f64>::half_space(2).unwrap().is_convex());
        assert!(SolidCone::<f64>::sector(PI).unwrap().is_convex());
        assert!(!SolidCone::<f64>::sector(1.5 * PI).unwrap().is_convex());
        assert!(!SolidCone::<f64>::circular(3, [0.0, 0.0, 1.0], 2.0).unwrap().is_convex());
    }

    #[test]
    fn inner_normal_points_inside() {
        let alpha: f64 = 0.6;
        let cone = SolidCone::<f64>::circular(3, [0.0, 0.0, 1.0], alpha).unwrap();
        let p = [alpha.sin() * 2.0, 0.0, alpha.cos() * 2.0];
        let n = cone.inner_normal(&p).unwrap();
        assert!(dot(&n, &p).abs() < 1e-14);
        assert!(cone.boundary_distance(&linalg::axpy(&p, 1e-3, &n)) > 0.0);
        let sector = SolidCone::<f64>::sector(2.0).unwrap();
        let n = sector.inner_normal(&[2.0f64.cos(), 2.0f64.sin(), 0.0]).unwrap();
        assert!(sector.boundary_distance(&linalg::axpy(&[2.0f64.cos(), 2.0f64.sin(), 0.0], 1e-3, &n)) > 0.0);
    }

    #[test]
    fn ruling_direction_is_flat() {
        let alpha: f64 = 0.7;
        let cone = SolidCone::<f64>::circular(3, [0.0, 0.0, 1.0], alpha).unwrap();
        let p = [alpha.sin(), 0.0, alpha.cos()];
        assert_eq!(cone.boundary_second_form(&p, &p, &p), 0.0);
    }

    #[test]
    fn circumferential_curvature_matches_finite_difference_shape_operator() {
        // boundary parameterization B(s, t) = s (cos a e3 + sin a (cos t, sin t, 0))
        let alpha: f64 = 0.55;
        let cone = SolidCone::<f64>::circular(3, [0.0, 0.0, 1.0], alpha).unwrap();
        let s = 1.7;
        let t0 = 0.4;
        let b = |t: f64| [s * alpha.sin() * t.cos(), s * alpha.sin() * t.sin(), s * alpha.cos()];
        let p = b(t0);
        let bt = fd::vector_d1(&b, t0, 1e-3);
        let btt = fd::vector_d1(&|t: f64| fd::vector_d1(&b, t, 1e-3), t0, 1e-3);
        let n = cone.inner_normal(&p).unwrap();
        // II(w, w) = <B_tt, N_in> / |B_t|^2 for the unit tangent w = B_t/|B_t|
        let oracle = dot(&btt, &n) / dot(&bt, &bt);
        let w = linalg::normalize(&bt).unwrap();
        let value = cone.boundary_second_form(&p, &w, &w);
        assert!((value - oracle).abs() < 1e-6, "{value} vs {oracle}");
        assert!((value - alpha.cos() / alpha.sin() / s).abs() < 1e-12);
    }

    #[test]
    fn sampling_is_deterministic_and_guarded() {
        let cone = SolidCone::<f64>::circular(3, [0.0, 0.0, 1.0], 0.8).unwrap();
        let a = cone.sample_directions(6, 8, 1e-3);
        let b = cone.sample_directions(6, 8, 1e-3);
        assert_eq!(a, b);
        assert_eq!(a.len(), 48);
        assert!(a.iter().all(|q| cone.boundary_distance(q) >= 1e-3));
        let sector = SolidCone::<f64>::sector(FRAC_PI_2).unwrap();
        let qs = sector.sample_directions(10, 1, 0.1);
        assert!(qs.iter().all(|q| q[0] > 0.0 && q[1] > 0.0));
    }

    #[test]
    fn solid_angles() {
        let c = SolidCone::<f64>::circular(3, [0.0, 0.0, 1.0], FRAC_PI_2).unwrap();
        assert!((c.solid_angle() - 2.0 * PI).abs() < 1e-14);
        assert!((SolidCone::<f64>::full(2).unwrap().solid_angle() - 2.0 * PI).abs() < 1e-14);
    }
}
