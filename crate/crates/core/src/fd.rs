//! Fourth-order central finite differences.

use crate::linalg::{Mat3, Vec3};
use crate::scalar::Real;

/// Five-point first derivative from samples at `-2h, -h, +h, +2h`.
#[inline]
pub fn d1_5<T: Real>(fm2: T, fm1: T, fp1: T, fp2: T, h: T) -> T {
    (fm2 - T::c(8.0) * fm1 + T::c(8.0) * fp1 - fp2) / (T::c(12.0) * h)
}

/// Five-point second derivative.
#[inline]
pub fn d2_5<T: Real>(fm2: T, fm1: T, f0: T, fp1: T, fp2: T, h: T) -> T {
    (-fm2 + T::c(16.0) * fm1 - T::c(30.0) * f0 + T::c(16.0) * fp1 - fp2) / (T::c(12.0) * h * h)
}

fn shifted<T: Real>(x: &Vec3<T>, i: usize, s: T) -> Vec3<T> {
    let mut y = *x;
    y[i] = y[i] + s;
    y
}

/// Gradient of `f` at `x` over the first `dim` coordinates.
pub fn gradient<T: Real, F>(f: &F, x: &Vec3<T>, dim: usize, h: T) -> Vec3<T>
where
    F: Fn(&Vec3<T>) -> T,
{
    let mut g = [T::zero(); 3];
    for i in 0..dim {
        let two = T::c(2.0);
        g[i] = d1_5(
            f(&shifted(x, i, -two * h)),
            f(&shifted(x, i, -h)),
            f(&shifted(x, i, h)),
            f(&shifted(x, i, two * h)),
            h,
        );
    }
    g
}

/// Hessian of `f` at `x` over the first `dim` coordinates.
pub fn hessian<T: Real, F>(f: &F, x: &Vec3<T>, dim: usize, h: T) -> Mat3<T>
where
    F: Fn(&Vec3<T>) -> T,
{
    let two = T::c(2.0);
    let offsets = [-two * h, -h, h, two * h];
    let f0 = f(x);
    let mut m = [[T::zero(); 3]; 3];
    for i in 0..dim {
        m[i][i] = d2_5(
            f(&shifted(x, i, -two * h)),
            f(&shifted(x, i, -h)),
            f0,
            f(&shifted(x, i, h)),
            f(&shifted(x, i, two * h)),
            h,
        );
        for j in i + 1..dim {
            // nested first-derivative stencils
            let mut inner = [T::zero(); 4];
            for (slot, oi) in inner.iter_mut().zip(offsets) {
                let xi = shifted(x, i, oi);
                *slot = d1_5(
                    f(&shifted(&xi, j, offsets[0])),
                    f(&shifted(&xi, j, offsets[1])),
                    f(&shifted(&xi, j, offsets[2])),
                    f(&shifted(&xi, j, offsets[3])),
                    h,
                );
            }
            let v = d1_5(inner[0], inner[1], inner[2], inner[3], h);
            m[i][j] = v;
            m[j][i] = v;
        }
    }
    m
}

/// Derivative of a vector valued curve `t -> c(t)` at `t`.
pub fn vector_d1<T: Real, F>(c: &F, t: T, h: T) -> Vec3<T>
where
    F: Fn(T) -> Vec3<T>,
{
    let two = T::c(2.0);
    let (a, b, d, e) = (c(t - two * h), c(t - h), c(t + h), c(t + two * h));
    [
        d1_5(a[0], b[0], d[0], e[0], h),
        d1_5(a[1], b[1], d[1], e[1], h),
        d1_5(a[2], b[2], d[2], e[2], h),
    ]
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn polynomial_derivatives_are_exact() {
        // quartic: 4th-order stencils are exact up to round-off
        let f = |x: &Vec3<f64>| x[0].powi(4) + 3.0 * x[0] * x[1] * x[1] - x[2] * x[0];
        let p = [0.7, -0.4, 1.3];
        let g = gradient(&f, &p, 3, 1e-2);
        let exact = [4.0 * 0.7f64.powi(3) + 3.0 * 0.16 - 1.3, 6.0 * 0.7 * -0.4, -0.7];
        for i in 0..3 {
            assert!((g[i] - exact[i]).abs() < 1e-10, "{i}");
        }
        let h = hessian(&f, &p, 3, 1e-2);
        let exact_h = [
            [12.0 * 0.49, 6.0 * -0.4, -1.0],
            [6.0 * -0.4, 6.0 * 0.7, 0.0],
            [-1.0, 0.0, 0.0],
        ];
        for i in 0..3 {
            for j in 0..3 {
                assert!((h[i][j] - exact_h[i][j]).abs() < 1e-8, "{i}{j}: {}", h[i][j]);
            }
        }
    }

    #[test]
    fn fourth_order_convergence() {
        let f = |t: f64| [t.sin(), 0.0, 0.0];
        let e1 = (vector_d1(&f, 0.3, 0.1)[0] - 0.3f64.cos()).abs();
        let e2 = (vector_d1(&f, 0.3, 0.05)[0] - 0.3f64.cos()).abs();
        let ratio = e1 / e2;
        assert!(ratio > 14.0 && ratio < 18.0, "{ratio}");
    }
}
