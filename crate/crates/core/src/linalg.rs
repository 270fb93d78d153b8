//! Small dense helpers over `nalgebra` plus a banded LU used by the
//! finite-volume oracles.

use alloc::vec;
use alloc::vec::Vec;
use nalgebra::{DMatrix, DVector, SymmetricEigen};
#[allow(unused_imports)]
use num_traits::Float;

use crate::c64;

pub type CMatrix = DMatrix<c64>;
pub type CVector = DVector<c64>;

pub const ZERO: c64 = c64::new(0.0, 0.0);
pub const ONE: c64 = c64::new(1.0, 0.0);
pub const I: c64 = c64::new(0.0, 1.0);

/// Largest entrywise deviation from Hermiticity.
pub fn hermiticity_defect(m: &CMatrix) -> f64 {
    let mut worst = 0.0f64;
    for i in 0..m.nrows() {
        for j in 0..m.ncols() {
            worst = worst.max((m[(i, j)] - m[(j, i)].conj()).norm());
        }
    }
    worst
}

/// Eigenvalues (ascending) and eigenvectors of a Hermitian matrix.
pub fn hermitian_eigen(m: &CMatrix) -> (Vec<f64>, CMatrix) {
    let eig = SymmetricEigen::new(m.clone());
    let mut order: Vec<usize> = (0..eig.eigenvalues.len()).collect();
    order.sort_by(|&a, &b| eig.eigenvalues[a].total_cmp(&eig.eigenvalues[b]));
    let values = order.iter().map(|&k| eig.eigenvalues[k]).collect();
    let vectors = CMatrix::from_fn(m.nrows(), order.len(), |i, j| eig.eigenvectors[(i, order[j])]);
    (values, vectors)
}

/// `φ(m)` for Hermitian `m` by spectral calculus.
pub fn hermitian_function(m: &CMatrix, phi: impl Fn(f64) -> f64) -> CMatrix {
    let (values, vectors) = hermitian_eigen(m);
    let n = m.nrows();
    let mut out = CMatrix::zeros(n, n);
    for (k, &ev) in values.iter().enumerate() {
        let weight = phi(ev);
        if weight == 0.0 {
            continue;
        }
        let col = vectors.column(k);
        for j in 0..n {
            let cj = col[j].conj() * weight;
            for i in 0..n {
                out[(i, j)] += col[i] * cj;
            }
        }
    }
    out
}

/// `exp(-i t m)` for Hermitian `m`.
pub fn unitary_exp(m: &CMatrix, t: f64) -> CMatrix {
    let (values, vectors) = hermitian_eigen(m);
    let n = m.nrows();
    let phases = CMatrix::from_fn(n, n, |i, j| if i == j { c64::from_polar(1.0, -t * values[i]) } else { ZERO });
    &vectors * phases * vectors.adjoint()
}

/// Singular values of a square matrix (descending).
pub fn singular_values(m: &CMatrix) -> Vec<f64> {
    let mut s: Vec<f64> = m.clone().svd(false, false).singular_values.iter().copied().collect();
    s.sort_by(|a, b| b.total_cmp(a));
    s
}

/// Inverse together with the 2-norm condition number.
pub fn inverse_and_condition(m: &CMatrix) -> Option<(CMatrix, f64)> {
    let s = singular_values(m);
    let smax = *s.first()?;
    let smin = *s.last()?;
    let cond = if smin > 0.0 { smax / smin } else { f64::INFINITY };
    let inv = m.clone().try_inverse()?;
    Some((inv, cond))
}

/// Maximum absolute row sum, an upper bound for the spectral norm.
pub fn row_sum_norm(m: &CMatrix) -> f64 {
    (0..m.nrows()).map(|i| m.row(i).iter().map(|z| z.norm()).sum::<f64>()).fold(0.0, f64::max)
}

/// Frobenius norm of a difference.
pub fn frobenius_distance(a: &CMatrix, b: &CMatrix) -> f64 {
    (a - b).norm()
}

/// Complex banded matrix with `kl` sub- and `ku` super-diagonals, solved by
/// Gaussian elimination with partial pivoting.
#[derive(Debug, Clone)]
pub struct BandedMatrix {
    n: usize,
    kl: usize,
    ku: usize,
    width: usize,
    data: Vec<c64>,
}

impl BandedMatrix {
    pub fn zeros(n: usize, kl: usize, ku: usize) -> Self {
        // Pivoting widens the upper band by `kl`.
        let width = 2 * kl + ku + 1;
        Self { n, kl, ku, width, data: vec![ZERO; n * width] }
    }

    pub fn dim(&self) -> usize {
        self.n
    }

    fn slot(&self, i: usize, j: usize) -> Option<usize> {
        if j + self.kl < i || j > i + self.kl + self.ku || j >= self.n {
            return None;
        }
        Some(i * self.width + (j + self.kl - i))
    }

    pub fn get(&self, i: usize, j: usize) -> c64 {
        self.slot(i, j).map_or(ZERO, |k| self.data[k])
    }

    /// Adds `value` at `(i, j)`; panics outside the declared band.
    pub fn add(&mut self, i: usize, j: usize, value: c64) {
        assert!(j + self.kl >= i && j <= i + self.ku, "entry ({i}, {j}) outside band");
        let k = self.slot(i, j).expect("inside band");
        self.data[k] += value;
    }

    /// Solves `A x = b`.
    pub fn solve(&self, rhs: &[c64]) -> Option<Vec<c64>> {
        let n = self.n;
        assert_eq!(rhs.len(), n);
        let mut a = self.clone();
        let mut b = rhs.to_vec();
        let reach = self.kl + self.ku;
        for i in 0..n {
            let last_row = (i + self.kl).min(n - 1);
            let mut pivot = i;
            let mut best = a.get(i, i).norm();
            for r in i + 1..=last_row {
                let v = a.get(r, i).norm();
                if v > best {
                    best = v;
                    pivot = r;
                }
            }
            if best == 0.0 {
                return None;
            }
            let last_col = (i + reach).min(n - 1);
            if pivot != i {
                for j in i..=last_col {
                    let (p, q) = (a.slot(i, j).unwrap(), a.slot(pivot, j));
                    let vp = q.map_or(ZERO, |q| a.data[q]);
                    let vi = a.data[p];
                    a.data[p] = vp;
                    if let Some(q) = q {
                        a.data[q] = vi;
                    }
                }
                b.swap(i, pivot);
            }
            let diag = a.get(i, i);
            for r in i + 1..=last_row {
                let factor = a.get(r, i) / diag;
                if factor == ZERO {
                    continue;
                }
                for j in i..=last_col {
                    let v = a.get(i, j);
                    let k = a.slot(r, j).unwrap();
                    a.data[k] -= factor * v;
                }
                let bi = b[i];
                b[r] -= factor * bi;
            }
        }
        let mut x = vec![ZERO; n];
        for i in (0..n).rev() {
            let mut acc = b[i];
            for j in i + 1..=(i + reach).min(n - 1) {
                acc -= a.get(i, j) * x[j];
            }
            x[i] = acc / a.get(i, i);
        }
        Some(x)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn banded_solve_matches_dense() {
        let n = 9;
        let mut band = BandedMatrix::zeros(n, 2, 1);
        let mut dense = CMatrix::zeros(n, n);
        for i in 0..n {
            for j in i.saturating_sub(2)..=(i + 1).min(n - 1) {
                // Small diagonal so that pivoting actually happens.
                let v = c64::new(((i * 7 + j * 3) % 5) as f64 - 2.0, if i == j { 0.01 } else { 0.3 });
                band.add(i, j, v);
                dense[(i, j)] = v;
            }
        }
        let rhs: Vec<c64> = (0..n).map(|k| c64::new(k as f64, 1.0)).collect();
        let x = band.solve(&rhs).unwrap();
        let x_dense = dense.lu().solve(&CVector::from_vec(rhs)).unwrap();
        for k in 0..n {
            assert!((x[k] - x_dense[k]).norm() < 1e-12);
        }
    }

    #[test]
    fn exp_of_diagonal() {
        let m = CMatrix::from_diagonal(&CVector::from_vec(vec![c64::new(1.0, 0.0), c64::new(-2.0, 0.0)]));
        let u = unitary_exp(&m, 0.3);
        assert!((u[(0, 0)] - c64::from_polar(1.0, -0.3)).norm() < 1e-14);
        assert!((u[(1, 1)] - c64::from_polar(1.0, 0.6)).norm() < 1e-14);
    }
}
