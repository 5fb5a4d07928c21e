//! One-dimensional node sets: Gauss-Legendre for open intervals and the
//! trapezoid rule for periodic ones, with their spectral differentiation
//! matrices.

use crate::linalg::DMatrix;
use crate::scalar::Real;

/// Gauss-Legendre nodes and weights on `[-1, 1]`, ascending.
pub fn gauss_legendre<T: Real>(m: usize) -> (Vec<T>, Vec<T>) {
    assert!(m >= 1, "at least one node");
    let mut x = vec![T::zero(); m];
    let mut w = vec![T::zero(); m];
    let mf = m as f64;
    for i in 0..m.div_ceil(2) {
        // Newton on P_m from the Tricomi initial guess, in f64
        let mut z = (std::f64::consts::PI * (i as f64 + 0.75) / (mf + 0.5)).cos();
        let mut dp = 0.0;
        for _ in 0..100 {
            let (p, d) = legendre(m, z);
            dp = d;
            let dz = p / d;
            z -= dz;
            if dz.abs() < 1e-16 {
                break;
            }
        }
        let (_, d) = legendre(m, z);
        if d != 0.0 {
            dp = d;
        }
        let wi = 2.0 / ((1.0 - z * z) * dp * dp);
        x[i] = T::c(-z);
        x[m - 1 - i] = T::c(z);
        w[i] = T::c(wi);
        w[m - 1 - i] = T::c(wi);
    }
    if m % 2 == 1 {
        x[m / 2] = T::zero();
    }
    (x, w)
}

fn legendre(m: usize, z: f64) -> (f64, f64) {
    let mut p0 = 1.0;
    let mut p1 = z;
    if m == 0 {
        return (1.0, 0.0);
    }
    for j in 2..=m {
        let jf = j as f64;
        let p2 = ((2.0 * jf - 1.0) * z * p1 - (jf - 1.0) * p0) / jf;
        p0 = p1;
        p1 = p2;
    }
    let d = m as f64 * (z * p1 - p0) / (z * z - 1.0);
    (p1, d)
}

/// Nodes of one parameter direction with quadrature weights and the data
/// needed for differentiation and interpolation.
#[derive(Debug, Clone)]
pub struct NodeSet<T: Real> {
    pub lo: T,
    pub hi: T,
    pub periodic: bool,
    pub nodes: Vec<T>,
    pub weights: Vec<T>,
    bary: Vec<T>,
}

impl<T: Real> NodeSet<T> {
    /// Gauss-Legendre nodes on `[lo, hi]`.
    pub fn legendre(lo: T, hi: T, m: usize) -> Self {
        let (x, w) = gauss_legendre::<f64>(m);
        let half = (hi - lo) * T::c(0.5);
        let mid = (hi + lo) * T::c(0.5);
        let nodes = x.iter().map(|xi| mid + half * T::c(*xi)).collect();
        let weights = w.iter().map(|wi| half * T::c(*wi)).collect();
        // barycentric weights of Legendre points: (-1)^j sqrt((1 - x_j^2) w_j)
        let bary = x
            .iter()
            .zip(&w)
            .enumerate()
            .map(|(j, (xj, wj))| {
                let s = if j % 2 == 0 { 1.0 } else { -1.0 };
                T::c(s * ((1.0 - xj * xj) * wj).sqrt())
            })
            .collect();
        Self {
            lo,
            hi,
            periodic: false,
            nodes,
            weights,
            bary,
        }
    }

    /// Equispaced periodic nodes on `[lo, hi)`. `m` is rounded up to an odd
    /// count so the differentiation matrix has no spurious Nyquist kernel.
    pub fn periodic(lo: T, hi: T, m: usize) -> Self {
        let m = if m.is_multiple_of(2) { m + 1 } else { m.max(1) };
        let h = (hi - lo) / T::from_usize_lossy(m);
        Self {
            lo,
            hi,
            periodic: true,
            nodes: (0..m).map(|j| lo + h * T::from_usize_lossy(j)).collect(),
            weights: vec![h; m],
            bary: Vec::new(),
        }
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    /// Spectral differentiation matrix acting on nodal values.
    pub fn diff_matrix(&self) -> DMatrix<T> {
        let m = self.len();
        let mut d = DMatrix::zeros(m, m);
        if self.periodic {
            let l = self.hi - self.lo;
            let mf = T::from_usize_lossy(m);
            for i in 0..m {
                for j in 0..m {
                    if i != j {
                        let diff = i as i64 - j as i64;
                        let sign = if diff.rem_euclid(2) == 0 { T::one() } else { -T::one() };
                        let arg = T::PI() * T::c(diff as f64) / mf;
                        d[(i, j)] = T::PI() / l * sign / arg.sin();
                    }
                }
            }
            return d;
        }
        for i in 0..m {
            let mut diag = T::zero();
            for j in 0..m {
                if i != j {
                    let v = self.bary[j] / self.bary[i] / (self.nodes[i] - self.nodes[j]);
                    d[(i, j)] = v;
                    diag = diag - v;
                }
            }
            d[(i, i)] = diag;
        }
        d
    }

    /// Weights `ℓ_j(t)` of the interpolant through the nodes (non-periodic).
    pub fn interpolation_row(&self, t: T) -> Vec<T> {
        assert!(!self.periodic, "interpolation rows are only used on open intervals");
        let m = self.len();
        if let Some(j) = self.nodes.iter().position(|x| *x == t) {
            let mut row = vec![T::zero(); m];
            row[j] = T::one();
            return row;
        }
        let terms: Vec<T> = (0..m).map(|j| self.bary[j] / (t - self.nodes[j])).collect();
        let s = terms.iter().fold(T::zero(), |a, b| a + *b);
        terms.into_iter().map(|v| v / s).collect()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn legendre_integrates_polynomials_exactly() {
        let ns = NodeSet::<f64>::legendre(0.0, 2.0, 6);
        // degree 11 is exact for 6 nodes
        let s: f64 = ns.nodes.iter().zip(&ns.weights).map(|(x, w)| w * x.powi(11)).sum();
        assert!((s - 2f64.powi(12) / 12.0).abs() < 1e-10);
        let (x, w) = gauss_legendre::<f64>(128);
        assert!((w.iter().sum::<f64>() - 2.0).abs() < 1e-13);
        assert!(x.windows(2).all(|p| p[0] < p[1]));
    }

    #[test]
    fn differentiation_is_spectral() {
        let ns = NodeSet::<f64>::legendre(0.3, 1.9, 20);
        let d = ns.diff_matrix();
        let u: Vec<f64> = ns.nodes.iter().map(|t| t.sin()).collect();
        let du = d.mul_vec(&u);
        for (t, v) in ns.nodes.iter().zip(du) {
            assert!((v - t.cos()).abs() < 1e-11);
        }
        let p = NodeSet::<f64>::periodic(0.0, 2.0 * std::f64::consts::PI, 16);
        assert_eq!(p.len(), 17);
        let d = p.diff_matrix();
        let u: Vec<f64> = p.nodes.iter().map(|t| (3.0 * t).cos()).collect();
        let du = d.mul_vec(&u);
        for (t, v) in p.nodes.iter().zip(du) {
            assert!((v + 3.0 * (3.0 * t).sin()).abs() < 1e-11);
        }
    }

    #[test]
    fn interpolation_at_endpoints() {
        let ns = NodeSet::<f64>::legendre(-1.0, 3.0, 15);
        let row = ns.interpolation_row(3.0);
        let v: f64 = row.iter().zip(&ns.nodes).map(|(l, t)| l * t.exp()).sum();
        assert!((v - 3f64.exp()).abs() < 1e-9);
    }
}
