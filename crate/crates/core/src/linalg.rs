//! Small dense matrix type and the spectral norm used for every norm bound in
//! the crate (contraction factor, weight error, `‖W‖`).

use serde::{Deserialize, Serialize};

use crate::error::{check_len, Error, Result};

/// Absolute tolerance on the spectral norm estimate.
pub const SPECTRAL_TOLERANCE: f64 = 1e-10;
pub const SPECTRAL_MAX_ITERATIONS: usize = 10_000;

/// Row-major dense matrix.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Matrix {
    rows: usize,
    cols: usize,
    data: Vec<f64>,
}

impl Matrix {
    pub fn zeros(rows: usize, cols: usize) -> Self {
        Matrix {
            rows,
            cols,
            data: vec![0.0; rows * cols],
        }
    }

    pub fn identity(n: usize) -> Self {
        let mut m = Self::zeros(n, n);
        for i in 0..n {
            m.set(i, i, 1.0);
        }
        m
    }

    pub fn from_diagonal(diag: &[f64]) -> Self {
        let mut m = Self::zeros(diag.len(), diag.len());
        for (i, &d) in diag.iter().enumerate() {
            m.set(i, i, d);
        }
        m
    }

    pub fn from_rows(rows: &[Vec<f64>]) -> Result<Self> {
        let cols = rows.first().map_or(0, Vec::len);
        let mut data = Vec::with_capacity(rows.len() * cols);
        for row in rows {
            check_len(cols, row.len())?;
            data.extend_from_slice(row);
        }
        Ok(Matrix {
            rows: rows.len(),
            cols,
            data,
        })
    }

    pub fn from_fn(rows: usize, cols: usize, f: impl Fn(usize, usize) -> f64) -> Self {
        let mut data = Vec::with_capacity(rows * cols);
        for i in 0..rows {
            for j in 0..cols {
                data.push(f(i, j));
            }
        }
        Matrix { rows, cols, data }
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn is_square(&self) -> bool {
        self.rows == self.cols
    }

    #[inline]
    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.data[i * self.cols + j]
    }

    #[inline]
    pub fn set(&mut self, i: usize, j: usize, value: f64) {
        self.data[i * self.cols + j] = value;
    }

    pub fn row(&self, i: usize) -> &[f64] {
        &self.data[i * self.cols..(i + 1) * self.cols]
    }

    pub fn to_rows(&self) -> Vec<Vec<f64>> {
        (0..self.rows).map(|i| self.row(i).to_vec()).collect()
    }

    pub fn mul_vec(&self, v: &[f64]) -> Vec<f64> {
        debug_assert_eq!(v.len(), self.cols);
        (0..self.rows)
            .map(|i| self.row(i).iter().zip(v).map(|(a, b)| a * b).sum())
            .collect()
    }

    /// `selfᵀ v`
    pub fn tr_mul_vec(&self, v: &[f64]) -> Vec<f64> {
        debug_assert_eq!(v.len(), self.rows);
        let mut out = vec![0.0; self.cols];
        for (i, &vi) in v.iter().enumerate() {
            if vi == 0.0 {
                continue;
            }
            for (o, a) in out.iter_mut().zip(self.row(i)) {
                *o += a * vi;
            }
        }
        out
    }

    pub fn mul(&self, other: &Matrix) -> Result<Matrix> {
        check_len(self.cols, other.rows)?;
        let mut out = Matrix::zeros(self.rows, other.cols);
        for i in 0..self.rows {
            for k in 0..self.cols {
                let a = self.get(i, k);
                if a == 0.0 {
                    continue;
                }
                for j in 0..other.cols {
                    out.data[i * other.cols + j] += a * other.get(k, j);
                }
            }
        }
        Ok(out)
    }

    pub fn sub(&self, other: &Matrix) -> Result<Matrix> {
        check_len(self.rows, other.rows)?;
        check_len(self.cols, other.cols)?;
        Ok(Matrix {
            rows: self.rows,
            cols: self.cols,
            data: self.data.iter().zip(&other.data).map(|(a, b)| a - b).collect(),
        })
    }

    /// Multiplies row `i` by `factors[i]`.
    pub fn scale_rows(&self, factors: &[f64]) -> Result<Matrix> {
        check_len(self.rows, factors.len())?;
        let mut out = self.clone();
        for (i, &f) in factors.iter().enumerate() {
            for x in &mut out.data[i * self.cols..(i + 1) * self.cols] {
                *x *= f;
            }
        }
        Ok(out)
    }

    pub fn is_diagonal(&self) -> bool {
        self.is_square()
            && (0..self.rows).all(|i| (0..self.cols).all(|j| i == j || self.get(i, j) == 0.0))
    }

    pub fn max_abs_diff(&self, other: &Matrix) -> f64 {
        self.data
            .iter()
            .zip(&other.data)
            .map(|(a, b)| (a - b).abs())
            .fold(0.0, f64::max)
    }
}

pub fn euclidean_norm(v: &[f64]) -> f64 {
    v.iter().map(|x| x * x).sum::<f64>().sqrt()
}

pub fn distance(a: &[f64], b: &[f64]) -> f64 {
    a.iter()
        .zip(b)
        .map(|(x, y)| (x - y) * (x - y))
        .sum::<f64>()
        .sqrt()
}

/// Largest singular value of `m`.
///
/// Diagonal matrices return `max |m_ii|` exactly. Otherwise power iteration on
/// `mᵀm` runs from the normalized all-ones vector and from a second fixed
/// vector; the larger estimate wins, since a single start can be orthogonal
/// to the dominant singular direction. When the two leading singular values
/// are too close for power iteration to settle, the eigenvalues of `mᵀm` are
/// computed by cyclic Jacobi rotations instead.
pub fn spectral_norm(m: &Matrix) -> Result<f64> {
    if let Some(bad) = m.data.iter().find(|x| !x.is_finite()) {
        return Err(Error::NonFinite(format!("matrix entry {bad}")));
    }
    if m.rows == 0 || m.cols == 0 {
        return Ok(0.0);
    }
    if m.is_diagonal() {
        return Ok(m.data.iter().map(|x| x.abs()).fold(0.0, f64::max));
    }
    let n = m.cols;
    let ones = vec![1.0; n];
    // Fixed, sign-varying second start.
    let mixed: Vec<f64> = (0..n)
        .map(|i| 1.0 + ((i * 7919 + 13) % 101) as f64 / 101.0 * if i % 2 == 0 { 1.0 } else { -1.5 })
        .collect();
    match (power_iteration(m, ones), power_iteration(m, mixed)) {
        (Ok(a), Ok(b)) => Ok(a.max(b)),
        _ => jacobi_top_singular_value(m),
    }
}

/// `sqrt(λ_max(mᵀm))` by cyclic Jacobi sweeps on the Gram matrix.
fn jacobi_top_singular_value(m: &Matrix) -> Result<f64> {
    let n = m.cols;
    let mut a = vec![vec![0.0; n]; n];
    for i in 0..n {
        for j in i..n {
            let v: f64 = (0..m.rows).map(|r| m.get(r, i) * m.get(r, j)).sum();
            a[i][j] = v;
            a[j][i] = v;
        }
    }
    const SWEEPS: usize = 100;
    for _ in 0..SWEEPS {
        let off: f64 = (0..n)
            .flat_map(|i| (0..n).filter(move |&j| j != i).map(move |j| (i, j)))
            .map(|(i, j)| a[i][j] * a[i][j])
            .sum();
        let diag: f64 = (0..n).map(|i| a[i][i] * a[i][i]).sum();
        if off <= 1e-30 * diag.max(f64::MIN_POSITIVE) {
            let top = (0..n).map(|i| a[i][i]).fold(0.0, f64::max);
            return Ok(top.max(0.0).sqrt());
        }
        for p in 0..n {
            for q in p + 1..n {
                if a[p][q] == 0.0 {
                    continue;
                }
                let theta = (a[q][q] - a[p][p]) / (2.0 * a[p][q]);
                let t = theta.signum() / (theta.abs() + (theta * theta + 1.0).sqrt());
                let t = if theta == 0.0 { 1.0 } else { t };
                let c = 1.0 / (t * t + 1.0).sqrt();
                let s = t * c;
                for k in 0..n {
                    let akp = a[k][p];
                    let akq = a[k][q];
                    a[k][p] = c * akp - s * akq;
                    a[k][q] = s * akp + c * akq;
                }
                for k in 0..n {
                    let apk = a[p][k];
                    let aqk = a[q][k];
                    a[p][k] = c * apk - s * aqk;
                    a[q][k] = s * apk + c * aqk;
                }
            }
        }
    }
    Err(Error::NoConvergence { iterations: SWEEPS })
}

fn power_iteration(m: &Matrix, start: Vec<f64>) -> Result<f64> {
    let mut v = start;
    let norm = euclidean_norm(&v);
    v.iter_mut().for_each(|x| *x /= norm);
    let mut sigma = euclidean_norm(&m.mul_vec(&v));
    for _ in 0..SPECTRAL_MAX_ITERATIONS {
        let mv = m.mul_vec(&v);
        let mut next = m.tr_mul_vec(&mv);
        let len = euclidean_norm(&next);
        if len == 0.0 {
            // v lies in the null space of mᵀm.
            return Ok(0.0);
        }
        next.iter_mut().for_each(|x| *x /= len);
        let estimate = euclidean_norm(&m.mul_vec(&next));
        let change = (estimate - sigma).abs();
        v = next;
        sigma = estimate;
        if change <= SPECTRAL_TOLERANCE * 1e-3 {
            return Ok(sigma);
        }
    }
    Err(Error::NoConvergence {
        iterations: SPECTRAL_MAX_ITERATIONS,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn identity_zero_and_diagonal() {
        assert_eq!(spectral_norm(&Matrix::identity(3)).unwrap(), 1.0);
        assert_eq!(spectral_norm(&Matrix::zeros(3, 3)).unwrap(), 0.0);
        assert_eq!(
            spectral_norm(&Matrix::from_diagonal(&[0.1, -0.4])).unwrap(),
            0.4
        );
    }

    #[test]
    fn jacobi_matches_power_iteration() {
        let m = Matrix::from_rows(&[vec![2.0, 1.0, 0.0], vec![0.5, -1.0, 3.0], vec![0.0, 0.2, 0.1]]).unwrap();
        let p = spectral_norm(&m).unwrap();
        let j = jacobi_top_singular_value(&m).unwrap();
        assert!((p - j).abs() < 1e-9, "{p} vs {j}");
    }

    #[test]
    fn nearly_tied_singular_values() {
        // Singular values 1 and 1 - 1e-9; any answer within the gap is acceptable.
        let m = Matrix::from_diagonal(&[1.0, 1.0 - 1e-9]).mul(&Matrix::from_rows(&[vec![0.6, 0.8], vec![-0.8, 0.6]]).unwrap()).unwrap();
        let s = spectral_norm(&m).unwrap();
        assert!((s - 1.0).abs() <= 1e-9 + 1e-12, "{s}");
    }

    #[test]
    fn rank_one_orthogonal_to_ones() {
        // Dominant direction (1, -1) is orthogonal to the all-ones start.
        let m = Matrix::from_rows(&[vec![0.5, -0.5], vec![-0.5, 0.5]]).unwrap();
        assert!((spectral_norm(&m).unwrap() - 1.0).abs() < 1e-10);
    }

    #[test]
    fn rectangular() {
        let m = Matrix::from_rows(&[vec![3.0, 0.0, 4.0]]).unwrap();
        assert!((spectral_norm(&m).unwrap() - 5.0).abs() < 1e-10);
    }

    #[test]
    fn rejects_non_finite() {
        let m = Matrix::from_rows(&[vec![1.0, f64::NAN], vec![0.0, 1.0]]).unwrap();
        assert!(matches!(spectral_norm(&m), Err(Error::NonFinite(_))));
    }

    #[test]
    fn mat_ops() {
        let a = Matrix::from_rows(&[vec![1.0, 2.0], vec![3.0, 4.0]]).unwrap();
        assert_eq!(a.mul_vec(&[1.0, 1.0]), vec![3.0, 7.0]);
        assert_eq!(a.tr_mul_vec(&[1.0, 1.0]), vec![4.0, 6.0]);
        let sq = a.mul(&a).unwrap();
        assert_eq!(sq.to_rows(), vec![vec![7.0, 10.0], vec![15.0, 22.0]]);
        assert!(Matrix::from_rows(&[vec![1.0], vec![1.0, 2.0]]).is_err());
    }
}
