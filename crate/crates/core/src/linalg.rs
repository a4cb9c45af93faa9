//! Small dense linear algebra over generic scalars.
//!
//! Problems at desk scale stay below a few hundred unknowns, so everything
//! here is dense, row-major, and allocates per call.

use std::ops::{Index, IndexMut};

use thiserror::Error;

use crate::scalar::Scalar;

/// The matrix handed to a factorization or eigenvalue routine was singular
/// or otherwise unusable.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Error)]
#[error("matrix is singular to working precision")]
pub struct SingularMatrix;

/// Dense row-major matrix.
#[derive(Debug, Clone, PartialEq)]
pub struct DMat<F> {
    rows: usize,
    cols: usize,
    data: Vec<F>,
}

impl<F: Scalar> DMat<F> {
    pub fn zeros(rows: usize, cols: usize) -> Self {
        Self { rows, cols, data: vec![F::zero(); rows * cols] }
    }

    pub fn identity(n: usize) -> Self {
        let mut m = Self::zeros(n, n);
        for i in 0..n {
            m[(i, i)] = F::one();
        }
        m
    }

    /// Builds a matrix from row slices; `None` if the rows are ragged.
    pub fn from_rows(rows: &[Vec<F>]) -> Option<Self> {
        let r = rows.len();
        let c = rows.first().map_or(0, Vec::len);
        if rows.iter().any(|row| row.len() != c) {
            return None;
        }
        let mut data = Vec::with_capacity(r * c);
        for row in rows {
            data.extend_from_slice(row);
        }
        Some(Self { rows: r, cols: c, data })
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn row(&self, i: usize) -> &[F] {
        &self.data[i * self.cols..(i + 1) * self.cols]
    }

    pub fn row_mut(&mut self, i: usize) -> &mut [F] {
        &mut self.data[i * self.cols..(i + 1) * self.cols]
    }

    pub fn matvec(&self, x: &[F]) -> Vec<F> {
        assert_eq!(x.len(), self.cols, "matvec dimension mismatch");
        (0..self.rows).map(|i| dot(self.row(i), x)).collect()
    }

    /// `self^T * x` without materializing the transpose.
    pub fn matvec_t(&self, x: &[F]) -> Vec<F> {
        assert_eq!(x.len(), self.rows, "matvec_t dimension mismatch");
        let mut out = vec![F::zero(); self.cols];
        for i in 0..self.rows {
            let xi = x[i];
            for (o, &a) in out.iter_mut().zip(self.row(i)) {
                *o = *o + xi * a;
            }
        }
        out
    }

    pub fn transpose(&self) -> Self {
        let mut t = Self::zeros(self.cols, self.rows);
        for i in 0..self.rows {
            for j in 0..self.cols {
                t[(j, i)] = self[(i, j)];
            }
        }
        t
    }

    /// `(A + A^T) / 2`; requires a square matrix.
    pub fn symmetrized(&self) -> Self {
        assert_eq!(self.rows, self.cols, "symmetrized requires a square matrix");
        let half = F::of(0.5);
        let mut s = Self::zeros(self.rows, self.cols);
        for i in 0..self.rows {
            for j in 0..self.cols {
                s[(i, j)] = (self[(i, j)] + self[(j, i)]) * half;
            }
        }
        s
    }

    /// Appends the rows of `extra` below `self`; both must share a column count.
    pub fn vstack(&self, extra: &DMat<F>) -> Self {
        assert_eq!(self.cols, extra.cols, "vstack column mismatch");
        let mut data = self.data.clone();
        data.extend_from_slice(&extra.data);
        Self { rows: self.rows + extra.rows, cols: self.cols, data }
    }

    /// Places `extra` to the right of `self`; both must share a row count.
    pub fn hstack(&self, extra: &DMat<F>) -> Self {
        assert_eq!(self.rows, extra.rows, "hstack row mismatch");
        let mut out = Self::zeros(self.rows, self.cols + extra.cols);
        for i in 0..self.rows {
            out.row_mut(i)[..self.cols].copy_from_slice(self.row(i));
            out.row_mut(i)[self.cols..].copy_from_slice(extra.row(i));
        }
        out
    }

    pub fn matmul(&self, other: &DMat<F>) -> Self {
        assert_eq!(self.cols, other.rows, "matmul dimension mismatch");
        let mut out = Self::zeros(self.rows, other.cols);
        for i in 0..self.rows {
            for k in 0..self.cols {
                let aik = self[(i, k)];
                if aik == F::zero() {
                    continue;
                }
                for j in 0..other.cols {
                    out[(i, j)] = out[(i, j)] + aik * other[(k, j)];
                }
            }
        }
        out
    }

    pub fn scaled(&self, factor: F) -> Self {
        let mut out = self.clone();
        for v in &mut out.data {
            *v = *v * factor;
        }
        out
    }

    pub fn add(&self, other: &DMat<F>) -> Self {
        assert_eq!((self.rows, self.cols), (other.rows, other.cols));
        let mut out = self.clone();
        for (v, &o) in out.data.iter_mut().zip(&other.data) {
            *v = *v + o;
        }
        out
    }

    pub fn is_finite(&self) -> bool {
        self.data.iter().all(|v| v.is_finite())
    }
}

impl<F> Index<(usize, usize)> for DMat<F> {
    type Output = F;

    fn index(&self, (i, j): (usize, usize)) -> &F {
        &self.data[i * self.cols + j]
    }
}

impl<F> IndexMut<(usize, usize)> for DMat<F> {
    fn index_mut(&mut self, (i, j): (usize, usize)) -> &mut F {
        &mut self.data[i * self.cols + j]
    }
}

pub fn dot<F: Scalar>(a: &[F], b: &[F]) -> F {
    debug_assert_eq!(a.len(), b.len());
    a.iter().zip(b).map(|(&x, &y)| x * y).sum()
}

pub fn norm2<F: Scalar>(v: &[F]) -> F {
    dot(v, v).sqrt()
}

pub fn norm_inf<F: Scalar>(v: &[F]) -> F {
    v.iter().fold(F::zero(), |acc, &x| acc.max(x.abs()))
}

pub fn sub<F: Scalar>(a: &[F], b: &[F]) -> Vec<F> {
    debug_assert_eq!(a.len(), b.len());
    a.iter().zip(b).map(|(&x, &y)| x - y).collect()
}

pub fn scale<F: Scalar>(v: &[F], factor: F) -> Vec<F> {
    v.iter().map(|&x| x * factor).collect()
}

/// LU factorization with row equilibration and partial pivoting.
///
/// Rows are scaled by their max-abs entry before pivoting, so the cheap
/// condition estimate below reflects the equilibrated system rather than
/// row scaling artifacts (the diagonally-dominated systems arising near
/// complementarity have rows of wildly different magnitudes that are
/// nevertheless perfectly solvable).
#[derive(Debug, Clone)]
pub struct Lu<F> {
    n: usize,
    lu: Vec<F>,
    perm: Vec<usize>,
    row_scale: Vec<F>,
    cond: F,
}

impl<F: Scalar> Lu<F> {
    pub fn factor(m: &DMat<F>) -> Result<Self, SingularMatrix> {
        assert_eq!(m.rows(), m.cols(), "LU requires a square matrix");
        let n = m.rows();
        let mut lu = m.data.clone();
        let mut row_scale = vec![F::one(); n];
        for i in 0..n {
            let maxabs = norm_inf(&lu[i * n..(i + 1) * n]);
            if maxabs == F::zero() || !maxabs.is_finite() {
                return Err(SingularMatrix);
            }
            let inv = F::one() / maxabs;
            row_scale[i] = inv;
            for v in &mut lu[i * n..(i + 1) * n] {
                *v = *v * inv;
            }
        }

        let mut perm: Vec<usize> = (0..n).collect();
        for k in 0..n {
            let mut pivot_row = k;
            let mut pivot_val = lu[k * n + k].abs();
            for i in k + 1..n {
                let v = lu[i * n + k].abs();
                if v > pivot_val {
                    pivot_val = v;
                    pivot_row = i;
                }
            }
            if pivot_val == F::zero() || !pivot_val.is_finite() {
                return Err(SingularMatrix);
            }
            if pivot_row != k {
                for j in 0..n {
                    lu.swap(k * n + j, pivot_row * n + j);
                }
                perm.swap(k, pivot_row);
                row_scale.swap(k, pivot_row);
            }
            let inv_pivot = F::one() / lu[k * n + k];
            for i in k + 1..n {
                let factor = lu[i * n + k] * inv_pivot;
                lu[i * n + k] = factor;
                for j in k + 1..n {
                    lu[i * n + j] = lu[i * n + j] - factor * lu[k * n + j];
                }
            }
        }

        let mut dmax = F::zero();
        let mut dmin = F::infinity();
        for k in 0..n {
            let d = lu[k * n + k].abs();
            dmax = dmax.max(d);
            dmin = dmin.min(d);
        }
        let cond = if dmin == F::zero() { F::infinity() } else { dmax / dmin };

        Ok(Self { n, lu, perm, row_scale, cond })
    }

    /// Ratio of largest to smallest pivot of the equilibrated matrix: a cheap
    /// order-of-magnitude proxy for the condition number.
    pub fn condition_estimate(&self) -> F {
        self.cond
    }

    pub fn solve(&self, b: &[F]) -> Vec<F> {
        assert_eq!(b.len(), self.n, "solve dimension mismatch");
        let n = self.n;
        let mut x: Vec<F> = (0..n).map(|i| b[self.perm[i]] * self.row_scale[i]).collect();
        for i in 1..n {
            let mut acc = x[i];
            for j in 0..i {
                acc = acc - self.lu[i * n + j] * x[j];
            }
            x[i] = acc;
        }
        for i in (0..n).rev() {
            let mut acc = x[i];
            for j in i + 1..n {
                acc = acc - self.lu[i * n + j] * x[j];
            }
            x[i] = acc / self.lu[i * n + i];
        }
        x
    }
}

/// Eigenvalues of a symmetric matrix via the cyclic Jacobi method, ascending.
pub fn symmetric_eigenvalues<F: Scalar>(m: &DMat<F>) -> Vec<F> {
    assert_eq!(m.rows(), m.cols(), "eigenvalues require a square matrix");
    let n = m.rows();
    if n == 0 {
        return Vec::new();
    }
    let mut a = m.clone();
    let mut frob = F::zero();
    for i in 0..n {
        for j in 0..n {
            frob = frob + a[(i, j)] * a[(i, j)];
        }
    }
    let tol = F::epsilon() * frob.sqrt().max(F::one());

    for _sweep in 0..100 {
        let mut off = F::zero();
        for p in 0..n {
            for q in p + 1..n {
                off = off + a[(p, q)].abs();
            }
        }
        if off <= tol {
            break;
        }
        for p in 0..n {
            for q in p + 1..n {
                let apq = a[(p, q)];
                if apq.abs() <= F::epsilon() * tol.max(F::one()) {
                    continue;
                }
                let theta = (a[(q, q)] - a[(p, p)]) / (F::of(2.0) * apq);
                let t = {
                    let sign = if theta >= F::zero() { F::one() } else { -F::one() };
                    sign / (theta.abs() + (theta * theta + F::one()).sqrt())
                };
                let c = F::one() / (t * t + F::one()).sqrt();
                let s = t * c;
                for k in 0..n {
                    let akp = a[(k, p)];
                    let akq = a[(k, q)];
                    a[(k, p)] = c * akp - s * akq;
                    a[(k, q)] = s * akp + c * akq;
                }
                for k in 0..n {
                    let apk = a[(p, k)];
                    let aqk = a[(q, k)];
                    a[(p, k)] = c * apk - s * aqk;
                    a[(q, k)] = s * apk + c * aqk;
                }
            }
        }
    }

    let mut eigs: Vec<F> = (0..n).map(|i| a[(i, i)]).collect();
    eigs.sort_by(|a, b| a.partial_cmp(b).expect("eigenvalues are finite"));
    eigs
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn lu_solves_a_known_system() {
        let m = DMat::from_rows(&[
            vec![2.0, 1.0, 1.0],
            vec![4.0, -6.0, 0.0],
            vec![-2.0, 7.0, 2.0],
        ])
        .unwrap();
        let lu = Lu::factor(&m).unwrap();
        let x = lu.solve(&[5.0_f64, -2.0, 9.0]);
        let expected = [1.0, 1.0, 2.0];
        for (xi, ei) in x.iter().zip(expected) {
            assert!((xi - ei).abs() < 1e-12, "{x:?}");
        }
    }

    #[test]
    fn lu_rejects_singular() {
        let m = DMat::from_rows(&[vec![1.0, 2.0], vec![2.0, 4.0]]).unwrap();
        assert!(Lu::factor(&m).is_err());
    }

    #[test]
    fn equilibration_tames_badly_scaled_rows() {
        // Same solution as an innocuous system, but one row scaled by 1e12.
        let m: DMat<f64> = DMat::from_rows(&[vec![1e12, 0.0], vec![1.0, 1.0]]).unwrap();
        let lu = Lu::factor(&m).unwrap();
        assert!(lu.condition_estimate() < 1e3);
        let x = lu.solve(&[2e12, 5.0]);
        assert!((x[0] - 2.0).abs() < 1e-9 && (x[1] - 3.0).abs() < 1e-9);
    }

    #[test]
    fn jacobi_eigenvalues_match_hand_computed() {
        let m: DMat<f64> = DMat::from_rows(&[vec![2.0, 1.0], vec![1.0, 2.0]]).unwrap();
        let eigs = symmetric_eigenvalues(&m);
        assert!((eigs[0] - 1.0).abs() < 1e-12);
        assert!((eigs[1] - 3.0).abs() < 1e-12);
    }

    #[test]
    fn matvec_t_matches_explicit_transpose() {
        let m = DMat::from_rows(&[vec![1.0, 2.0, 3.0], vec![4.0, 5.0, 6.0]]).unwrap();
        let x = vec![7.0, -1.0];
        assert_eq!(m.matvec_t(&x), m.transpose().matvec(&x));
    }
}
