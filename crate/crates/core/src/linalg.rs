//! Small-vector helpers and a dense symmetric (generalized) eigensolver.
//!
//! Ambient points are stored as `[T; 3]` for both planar and spatial cones;
//! planar data keeps the third component at zero.

use std::ops::{Index, IndexMut};

use crate::scalar::{csum, Real};
use crate::{Error, Result};

pub type Vec3<T> = [T; 3];
pub type Mat3<T> = [[T; 3]; 3];

#[inline]
pub fn zero3<T: Real>() -> Vec3<T> {
    [T::zero(); 3]
}

#[inline]
pub fn dot<T: Real>(a: &Vec3<T>, b: &Vec3<T>) -> T {
    a[0] * b[0] + a[1] * b[1] + a[2] * b[2]
}

#[inline]
pub fn norm<T: Real>(a: &Vec3<T>) -> T {
    dot(a, a).sqrt()
}

#[inline]
pub fn add<T: Real>(a: &Vec3<T>, b: &Vec3<T>) -> Vec3<T> {
    [a[0] + b[0], a[1] + b[1], a[2] + b[2]]
}

#[inline]
pub fn sub<T: Real>(a: &Vec3<T>, b: &Vec3<T>) -> Vec3<T> {
    [a[0] - b[0], a[1] - b[1], a[2] - b[2]]
}

#[inline]
pub fn scale<T: Real>(s: T, a: &Vec3<T>) -> Vec3<T> {
    [s * a[0], s * a[1], s * a[2]]
}

/// `a + s * b`
#[inline]
pub fn axpy<T: Real>(a: &Vec3<T>, s: T, b: &Vec3<T>) -> Vec3<T> {
    [a[0] + s * b[0], a[1] + s * b[1], a[2] + s * b[2]]
}

#[inline]
pub fn cross<T: Real>(a: &Vec3<T>, b: &Vec3<T>) -> Vec3<T> {
    [
        a[1] * b[2] - a[2] * b[1],
        a[2] * b[0] - a[0] * b[2],
        a[0] * b[1] - a[1] * b[0],
    ]
}

/// Unit vector along `a`; `None` for the zero vector.
pub fn normalize<T: Real>(a: &Vec3<T>) -> Option<Vec3<T>> {
    let n = norm(a);
    if n > T::zero() && n.is_finite() {
        Some(scale(T::one() / n, a))
    } else {
        None
    }
}

pub fn from_slice<T: Real>(xs: &[T]) -> Vec3<T> {
    let mut out = zero3();
    for (o, x) in out.iter_mut().zip(xs) {
        *o = *x;
    }
    out
}

pub fn mat_vec<T: Real>(m: &Mat3<T>, v: &Vec3<T>) -> Vec3<T> {
    [dot(&m[0], v), dot(&m[1], v), dot(&m[2], v)]
}

/// `u^T m v`
pub fn bilinear<T: Real>(m: &Mat3<T>, u: &Vec3<T>, v: &Vec3<T>) -> T {
    dot(u, &mat_vec(m, v))
}

pub fn outer<T: Real>(a: &Vec3<T>, b: &Vec3<T>) -> Mat3<T> {
    let mut m = [[T::zero(); 3]; 3];
    for i in 0..3 {
        for j in 0..3 {
            m[i][j] = a[i] * b[j];
        }
    }
    m
}

pub fn mat_add<T: Real>(a: &Mat3<T>, b: &Mat3<T>) -> Mat3<T> {
    let mut m = *a;
    for i in 0..3 {
        for j in 0..3 {
            m[i][j] = m[i][j] + b[i][j];
        }
    }
    m
}

pub fn mat_scale<T: Real>(s: T, a: &Mat3<T>) -> Mat3<T> {
    let mut m = *a;
    for row in m.iter_mut() {
        for x in row.iter_mut() {
            *x = *x * s;
        }
    }
    m
}

pub fn identity3<T: Real>() -> Mat3<T> {
    let mut m = [[T::zero(); 3]; 3];
    for (i, row) in m.iter_mut().enumerate() {
        row[i] = T::one();
    }
    m
}

/// Tangent projector `I - q q^T` restricted to the first `dim` coordinates.
pub fn tangent_projector<T: Real>(q: &Vec3<T>, dim: usize) -> Mat3<T> {
    let mut m = [[T::zero(); 3]; 3];
    for i in 0..dim {
        for j in 0..dim {
            let delta = if i == j { T::one() } else { T::zero() };
            m[i][j] = delta - q[i] * q[j];
        }
    }
    m
}

pub fn mat_transpose<T: Real>(a: &Mat3<T>) -> Mat3<T> {
    let mut t = *a;
    for i in 0..3 {
        for j in 0..3 {
            t[i][j] = a[j][i];
        }
    }
    t
}

pub fn mat_mul<T: Real>(a: &Mat3<T>, b: &Mat3<T>) -> Mat3<T> {
    let mut m = [[T::zero(); 3]; 3];
    for i in 0..3 {
        for j in 0..3 {
            m[i][j] = a[i][0] * b[0][j] + a[i][1] * b[1][j] + a[i][2] * b[2][j];
        }
    }
    m
}

pub fn frobenius<T: Real>(a: &Mat3<T>) -> T {
    a.iter()
        .flat_map(|r| r.iter())
        .fold(T::zero(), |acc, x| acc + *x * *x)
        .sqrt()
}

/// Orthonormal completion `(e1, e2)` of a unit vector `a` in R^3.
pub fn orthonormal_frame<T: Real>(a: &Vec3<T>) -> (Vec3<T>, Vec3<T>) {
    let pick = if a[0].abs() <= a[1].abs() && a[0].abs() <= a[2].abs() {
        [T::one(), T::zero(), T::zero()]
    } else if a[1].abs() <= a[2].abs() {
        [T::zero(), T::one(), T::zero()]
    } else {
        [T::zero(), T::zero(), T::one()]
    };
    let e1 = normalize(&axpy(&pick, -dot(&pick, a), a)).expect("non-degenerate frame");
    let e2 = cross(a, &e1);
    (e1, e2)
}

/// Dense row-major matrix.
#[derive(Debug, Clone, PartialEq)]
pub struct DMatrix<T: Real> {
    rows: usize,
    cols: usize,
    data: Vec<T>,
}

impl<T: Real> DMatrix<T> {
    pub fn zeros(rows: usize, cols: usize) -> Self {
        Self {
            rows,
            cols,
            data: vec![T::zero(); rows * cols],
        }
    }

    pub fn identity(n: usize) -> Self {
        let mut m = Self::zeros(n, n);
        for i in 0..n {
            m[(i, i)] = T::one();
        }
        m
    }

    pub fn from_diagonal(d: &[T]) -> Self {
        let mut m = Self::zeros(d.len(), d.len());
        for (i, x) in d.iter().enumerate() {
            m[(i, i)] = *x;
        }
        m
    }

    pub fn from_fn(rows: usize, cols: usize, f: impl Fn(usize, usize) -> T) -> Self {
        let mut m = Self::zeros(rows, cols);
        for i in 0..rows {
            for j in 0..cols {
                m[(i, j)] = f(i, j);
            }
        }
        m
    }

    pub fn nrows(&self) -> usize {
        self.rows
    }

    pub fn ncols(&self) -> usize {
        self.cols
    }

    pub fn row(&self, i: usize) -> &[T] {
        &self.data[i * self.cols..(i + 1) * self.cols]
    }

    pub fn mul_vec(&self, x: &[T]) -> Vec<T> {
        assert_eq!(x.len(), self.cols);
        (0..self.rows)
            .map(|i| csum(self.row(i).iter().zip(x).map(|(a, b)| *a * *b)))
            .collect()
    }

    /// `x^T A y`
    pub fn form(&self, x: &[T], y: &[T]) -> T {
        let ay = self.mul_vec(y);
        csum(x.iter().zip(&ay).map(|(a, b)| *a * *b))
    }

    pub fn add_scaled(&self, s: T, other: &Self) -> Self {
        assert_eq!((self.rows, self.cols), (other.rows, other.cols));
        Self {
            rows: self.rows,
            cols: self.cols,
            data: self
                .data
                .iter()
                .zip(&other.data)
                .map(|(a, b)| *a + s * *b)
                .collect(),
        }
    }

    pub fn transpose(&self) -> Self {
        Self::from_fn(self.cols, self.rows, |i, j| self[(j, i)])
    }

    /// Largest absolute asymmetry `|a_ij - a_ji|`.
    pub fn asymmetry(&self) -> T {
        let mut worst = T::zero();
        for i in 0..self.rows {
            for j in 0..i {
                worst = worst.max((self[(i, j)] - self[(j, i)]).abs());
            }
        }
        worst
    }

    pub fn max_abs(&self) -> T {
        self.data.iter().fold(T::zero(), |a, x| a.max(x.abs()))
    }

    pub fn is_finite(&self) -> bool {
        self.data.iter().all(|x| x.is_finite())
    }

    /// Lower Cholesky factor of a symmetric positive definite matrix.
    pub fn cholesky(&self) -> Result<Self> {
        let n = self.rows;
        let mut l = Self::zeros(n, n);
        for j in 0..n {
            let mut d = self[(j, j)];
            for k in 0..j {
                d = d - l[(j, k)] * l[(j, k)];
            }
            if !(d > T::zero()) {
                return Err(Error::NotPositiveDefinite { index: j });
            }
            let d = d.sqrt();
            l[(j, j)] = d;
            for i in j + 1..n {
                let mut s = self[(i, j)];
                for k in 0..j {
                    s = s - l[(i, k)] * l[(j, k)];
                }
                l[(i, j)] = s / d;
            }
        }
        Ok(l)
    }

    /// Solve `A x = b` by Gaussian elimination with partial pivoting.
    pub fn solve(&self, b: &[T]) -> Result<Vec<T>> {
        let n = self.rows;
        assert_eq!(n, self.cols);
        let mut a = self.clone();
        let mut x = b.to_vec();
        for col in 0..n {
            let piv = (col..n)
                .max_by(|&i, &j| {
                    a[(i, col)]
                        .abs()
                        .partial_cmp(&a[(j, col)].abs())
                        .unwrap_or(std::cmp::Ordering::Equal)
                })
                .unwrap();
            if a[(piv, col)] == T::zero() {
                return Err(Error::SingularSystem);
            }
            if piv != col {
                for j in 0..n {
                    let t = a[(col, j)];
                    a[(col, j)] = a[(piv, j)];
                    a[(piv, j)] = t;
                }
                x.swap(col, piv);
            }
            for i in col + 1..n {
                let m = a[(i, col)] / a[(col, col)];
                if m != T::zero() {
                    for j in col..n {
                        let v = a[(col, j)];
                        a[(i, j)] = a[(i, j)] - m * v;
                    }
                    x[i] = x[i] - m * x[col];
                }
            }
        }
        for i in (0..n).rev() {
            let mut s = x[i];
            for j in i + 1..n {
                s = s - a[(i, j)] * x[j];
            }
            x[i] = s / a[(i, i)];
        }
        Ok(x)
    }
}

impl<T: Real> Index<(usize, usize)> for DMatrix<T> {
    type Output = T;
    #[inline]
    fn index(&self, (i, j): (usize, usize)) -> &T {
        &self.data[i * self.cols + j]
    }
}

impl<T: Real> IndexMut<(usize, usize)> for DMatrix<T> {
    #[inline]
    fn index_mut(&mut self, (i, j): (usize, usize)) -> &mut T {
        &mut self.data[i * self.cols + j]
    }
}

/// Householder reduction of a symmetric matrix to tridiagonal form,
/// `A = Q T Q^T`. Reflectors are kept so eigenvectors of `T` can be mapped
/// back to eigenvectors of `A`.
#[derive(Debug, Clone)]
pub struct Tridiagonal<T: Real> {
    pub diag: Vec<T>,
    /// `off[i]` couples rows `i` and `i + 1`.
    pub off: Vec<T>,
    reflectors: Vec<(usize, Vec<T>)>,
}

impl<T: Real> Tridiagonal<T> {
    pub fn reduce(a: &DMatrix<T>) -> Self {
        let n = a.nrows();
        let mut a = a.clone();
        let mut reflectors = Vec::new();
        let two = T::c(2.0);
        for k in 0..n.saturating_sub(2) {
            let m = n - k - 1;
            let x: Vec<T> = (0..m).map(|i| a[(k + 1 + i, k)]).collect();
            let xnorm = x.iter().fold(T::zero(), |s, v| s + *v * *v).sqrt();
            let tail = x[1..].iter().fold(T::zero(), |s, v| s + v.abs());
            if xnorm == T::zero() || tail == T::zero() {
                continue;
            }
            let alpha = if x[0] >= T::zero() { -xnorm } else { xnorm };
            let mut v = x.clone();
            v[0] = v[0] - alpha;
            let vnorm = v.iter().fold(T::zero(), |s, t| s + *t * *t).sqrt();
            for t in v.iter_mut() {
                *t = *t / vnorm;
            }
            // p = A_sub v, q = p - (v^T p) v, A_sub -= 2 (v q^T + q v^T)
            let mut p = vec![T::zero(); m];
            for i in 0..m {
                let mut s = T::zero();
                for j in 0..m {
                    s = s + a[(k + 1 + i, k + 1 + j)] * v[j];
                }
                p[i] = s;
            }
            let kk = v.iter().zip(&p).fold(T::zero(), |s, (a, b)| s + *a * *b);
            let q: Vec<T> = p.iter().zip(&v).map(|(pi, vi)| *pi - kk * *vi).collect();
            for i in 0..m {
                for j in 0..m {
                    let upd = two * (v[i] * q[j] + q[i] * v[j]);
                    a[(k + 1 + i, k + 1 + j)] = a[(k + 1 + i, k + 1 + j)] - upd;
                }
            }
            a[(k + 1, k)] = alpha;
            a[(k, k + 1)] = alpha;
            for i in 1..m {
                a[(k + 1 + i, k)] = T::zero();
                a[(k, k + 1 + i)] = T::zero();
            }
            reflectors.push((k + 1, v));
        }
        let diag = (0..n).map(|i| a[(i, i)]).collect();
        let off = (0..n.saturating_sub(1)).map(|i| a[(i + 1, i)]).collect();
        Self {
            diag,
            off,
            reflectors,
        }
    }

    /// All eigenvalues in ascending order (implicit QL with Wilkinson shifts).
    pub fn eigenvalues(&self) -> Result<Vec<T>> {
        let n = self.diag.len();
        let mut d = self.diag.clone();
        let mut e = self.off.clone();
        e.push(T::zero());
        for l in 0..n {
            let mut iter = 0;
            loop {
                let mut m = l;
                while m + 1 < n {
                    let dd = d[m].abs() + d[m + 1].abs();
                    if e[m].abs() <= T::epsilon() * dd {
                        break;
                    }
                    m += 1;
                }
                if m == l {
                    break;
                }
                iter += 1;
                if iter > 60 {
                    return Err(Error::NoConvergence);
                }
                let mut g = (d[l + 1] - d[l]) / (T::c(2.0) * e[l]);
                let mut r = g.hypot(T::one());
                g = d[m] - d[l] + e[l] / (g + if g >= T::zero() { r.abs() } else { -r.abs() });
                let (mut s, mut c, mut p) = (T::one(), T::one(), T::zero());
                let mut i = m;
                let mut underflow = false;
                while i > l {
                    i -= 1;
                    let f = s * e[i];
                    let b = c * e[i];
                    r = f.hypot(g);
                    e[i + 1] = r;
                    if r == T::zero() {
                        d[i + 1] = d[i + 1] - p;
                        e[m] = T::zero();
                        underflow = true;
                        break;
                    }
                    s = f / r;
                    c = g / r;
                    g = d[i + 1] - p;
                    r = (d[i] - g) * s + T::c(2.0) * c * b;
                    p = s * r;
                    d[i + 1] = g + p;
                    g = c * r - b;
                }
                if underflow {
                    continue;
                }
                d[l] = d[l] - p;
                e[l] = g;
                e[m] = T::zero();
            }
        }
        d.sort_by(|a, b| a.partial_cmp(b).unwrap_or(std::cmp::Ordering::Equal));
        Ok(d)
    }

    /// Eigenvector of `T` for an eigenvalue estimate by shifted inverse
    /// iteration, mapped back to the original basis.
    pub fn eigenvector(&self, lambda: T) -> Vec<T> {
        let n = self.diag.len();
        let scale = self
            .diag
            .iter()
            .chain(self.off.iter())
            .fold(T::zero(), |a, x| a.max(x.abs()))
            .max(T::min_positive_value());
        let shift = lambda - T::c(1e3) * T::epsilon() * scale;
        let mut x: Vec<T> = (0..n)
            .map(|i| T::one() + T::c(1e-3) * T::from_usize_lossy(i % 7))
            .collect();
        for _ in 0..4 {
            x = solve_shifted_tridiagonal(&self.diag, &self.off, shift, &x);
            let nrm = x.iter().fold(T::zero(), |s, v| s + *v * *v).sqrt();
            if !(nrm > T::zero()) || !nrm.is_finite() {
                break;
            }
            for v in x.iter_mut() {
                *v = *v / nrm;
            }
        }
        self.back_transform(&x)
    }

    fn back_transform(&self, x: &[T]) -> Vec<T> {
        let mut y = x.to_vec();
        let two = T::c(2.0);
        for (start, v) in self.reflectors.iter().rev() {
            let s = v
                .iter()
                .enumerate()
                .fold(T::zero(), |acc, (i, vi)| acc + *vi * y[start + i]);
            for (i, vi) in v.iter().enumerate() {
                y[start + i] = y[start + i] - two * s * *vi;
            }
        }
        y
    }
}

fn solve_shifted_tridiagonal<T: Real>(d: &[T], e: &[T], shift: T, b: &[T]) -> Vec<T> {
    // The shift sits below the smallest eigenvalue, so `T - shift I` is
    // positive definite and elimination without pivoting is stable.
    let n = d.len();
    let tiny = T::min_positive_value().sqrt();
    let mut piv = vec![T::zero(); n];
    let mut rhs = b.to_vec();
    piv[0] = d[0] - shift;
    for i in 1..n {
        if piv[i - 1].abs() < tiny {
            piv[i - 1] = tiny;
        }
        let m = e[i - 1] / piv[i - 1];
        piv[i] = d[i] - shift - m * e[i - 1];
        rhs[i] = rhs[i] - m * rhs[i - 1];
    }
    if piv[n - 1].abs() < tiny {
        piv[n - 1] = tiny;
    }
    let mut x = vec![T::zero(); n];
    x[n - 1] = rhs[n - 1] / piv[n - 1];
    for i in (0..n - 1).rev() {
        x[i] = (rhs[i] - e[i] * x[i + 1]) / piv[i];
    }
    x
}

/// Result of the generalized problem `A u = lambda M u`.
#[derive(Debug, Clone)]
pub struct GeneralizedEigen<T: Real> {
    /// Ascending eigenvalues (the deflated direction is removed in
    /// constrained mode).
    pub eigenvalues: Vec<T>,
    /// Eigenvector for the smallest eigenvalue, `M`-normalized.
    pub min_vector: Vec<T>,
}

/// Smallest eigenpairs of `A u = lambda M u` with `A` symmetric and `M`
/// symmetric positive definite. When `constraint` is given, the problem is
/// restricted to `{u : constraint^T M u = 0}` by deflation.
pub fn generalized_symmetric_eigen<T: Real>(
    a: &DMatrix<T>,
    m: &DMatrix<T>,
    constraint: Option<&[T]>,
) -> Result<GeneralizedEigen<T>> {
    let n = a.nrows();
    let l = m.cholesky()?;
    // Y = L^{-1} A, C = L^{-1} Y^T
    let y = lower_solve_columns(&l, a);
    let c = lower_solve_columns(&l, &y.transpose());
    let mut c = DMatrix::from_fn(n, n, |i, j| (c[(i, j)] + c[(j, i)]) * T::c(0.5));

    let mut shift_value = None;
    if let Some(w0) = constraint {
        // w = L^T w0 in the transformed coordinates y = L^T u
        let mut w = vec![T::zero(); n];
        for i in 0..n {
            let mut s = T::zero();
            for k in i..n {
                s = s + l[(k, i)] * w0[k];
            }
            w[i] = s;
        }
        let wn = w.iter().fold(T::zero(), |s, v| s + *v * *v).sqrt();
        if !(wn > T::zero()) || !wn.is_finite() {
            return Err(Error::ProjectionDegenerate);
        }
        for v in w.iter_mut() {
            *v = *v / wn;
        }
        let cw = c.mul_vec(&w);
        let wcw = w.iter().zip(&cw).fold(T::zero(), |s, (a, b)| s + *a * *b);
        let bound = (0..n)
            .map(|i| c.row(i).iter().fold(T::zero(), |s, x| s + x.abs()))
            .fold(T::zero(), |a, b| a.max(b));
        let sigma = T::c(2.0) * bound + T::one();
        for i in 0..n {
            for j in 0..n {
                c[(i, j)] = c[(i, j)] - w[i] * cw[j] - cw[i] * w[j] + (wcw + sigma) * w[i] * w[j];
            }
        }
        shift_value = Some(sigma);
    }

    let tri = Tridiagonal::reduce(&c);
    let mut eigenvalues = tri.eigenvalues()?;
    if let Some(sigma) = shift_value {
        // drop the eigenvalue pushed to sigma by the deflation
        if let Some(pos) = eigenvalues
            .iter()
            .enumerate()
            .min_by(|a, b| {
                (*a.1 - sigma)
                    .abs()
                    .partial_cmp(&(*b.1 - sigma).abs())
                    .unwrap_or(std::cmp::Ordering::Equal)
            })
            .map(|(i, _)| i)
        {
            eigenvalues.remove(pos);
        }
    }
    let lambda_min = eigenvalues[0];
    let yv = tri.eigenvector(lambda_min);
    // u = L^{-T} y
    let mut u = vec![T::zero(); n];
    for i in (0..n).rev() {
        let mut s = yv[i];
        for k in i + 1..n {
            s = s - l[(k, i)] * u[k];
        }
        u[i] = s / l[(i, i)];
    }
    let mnorm = m.form(&u, &u).sqrt();
    if mnorm > T::zero() {
        for v in u.iter_mut() {
            *v = *v / mnorm;
        }
    }
    Ok(GeneralizedEigen {
        eigenvalues,
        min_vector: u,
    })
}

/// Solve `L X = B` column by column for lower-triangular `L`.
fn lower_solve_columns<T: Real>(l: &DMatrix<T>, b: &DMatrix<T>) -> DMatrix<T> {
    let n = l.nrows();
    let cols = b.ncols();
    let mut x = DMatrix::zeros(n, cols);
    for i in 0..n {
        let lii = l[(i, i)];
        for j in 0..cols {
            let mut s = b[(i, j)];
            for k in 0..i {
                s = s - l[(i, k)] * x[(k, j)];
            }
            x[(i, j)] = s / lii;
        }
    }
    x
}

/// Eigenvalues (ascending) and eigenvectors (columns) of a symmetric 3x3
/// matrix, restricted to the leading `dim` block, by cyclic Jacobi sweeps.
pub fn symmetric_eigen3<T: Real>(m: &Mat3<T>, dim: usize) -> (Vec<T>, Vec<Vec3<T>>) {
    let mut a = *m;
    let mut v = identity3::<T>();
    for _ in 0..50 {
        let mut off = T::zero();
        for p in 0..dim {
            for q in p + 1..dim {
                off = off + a[p][q] * a[p][q];
            }
        }
        if off <= T::epsilon() * T::epsilon() * frobenius(&a).powi(2) {
            break;
        }
        for p in 0..dim {
            for q in p + 1..dim {
                if a[p][q] == T::zero() {
                    continue;
                }
                let theta = (a[q][q] - a[p][p]) / (T::c(2.0) * a[p][q]);
                let t = theta.signum() / (theta.abs() + (theta * theta + T::one()).sqrt());
                let c = T::one() / (t * t + T::one()).sqrt();
                let s = t * c;
                for k in 0..dim {
                    let akp = a[k][p];
                    let akq = a[k][q];
                    a[k][p] = c * akp - s * akq;
                    a[k][q] = s * akp + c * akq;
                }
                for k in 0..dim {
                    let apk = a[p][k];
                    let aqk = a[q][k];
                    a[p][k] = c * apk - s * aqk;
                    a[q][k] = s * apk + c * aqk;
                }
                for row in v.iter_mut().take(dim) {
                    let vkp = row[p];
                    let vkq = row[q];
                    row[p] = c * vkp - s * vkq;
                    row[q] = s * vkp + c * vkq;
                }
            }
        }
    }
    let mut pairs: Vec<(T, Vec3<T>)> = (0..dim)
        .map(|i| (a[i][i], [v[0][i], v[1][i], v[2][i]]))
        .collect();
    pairs.sort_by(|x, y| x.0.partial_cmp(&y.0).unwrap_or(std::cmp::Ordering::Equal));
    pairs.into_iter().unzip()
}
