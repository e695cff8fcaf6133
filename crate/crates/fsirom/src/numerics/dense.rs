//! Row-major dense matrices and a direct LU solve with partial pivoting.

use super::{NumericsError, PIVOT_FLOOR};

/// Row-major dense matrix.
#[derive(Debug, Clone, PartialEq)]
pub struct DenseMatrix {
    pub n_rows: usize,
    pub n_cols: usize,
    pub values: Vec<f64>,
}

impl DenseMatrix {
    pub fn zeros(n_rows: usize, n_cols: usize) -> Self {
        DenseMatrix {
            n_rows,
            n_cols,
            values: vec![0.0; n_rows * n_cols],
        }
    }

    pub fn identity(n: usize) -> Self {
        let mut m = DenseMatrix::zeros(n, n);
        for i in 0..n {
            m.values[i * n + i] = 1.0;
        }
        m
    }

    /// Builds from a slice of rows; all rows must share one length.
    pub fn from_rows(rows: &[Vec<f64>]) -> Self {
        let n_rows = rows.len();
        let n_cols = if n_rows == 0 { 0 } else { rows[0].len() };
        let mut values = Vec::with_capacity(n_rows * n_cols);
        for r in rows {
            assert_eq!(r.len(), n_cols, "ragged rows");
            values.extend_from_slice(r);
        }
        DenseMatrix {
            n_rows,
            n_cols,
            values,
        }
    }

    #[inline]
    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.values[i * self.n_cols + j]
    }

    #[inline]
    pub fn set(&mut self, i: usize, j: usize, v: f64) {
        self.values[i * self.n_cols + j] = v;
    }

    #[inline]
    pub fn add_at(&mut self, i: usize, j: usize, v: f64) {
        self.values[i * self.n_cols + j] += v;
    }

    pub fn row(&self, i: usize) -> &[f64] {
        &self.values[i * self.n_cols..(i + 1) * self.n_cols]
    }

    pub fn transpose(&self) -> DenseMatrix {
        let mut t = DenseMatrix::zeros(self.n_cols, self.n_rows);
        for i in 0..self.n_rows {
            for j in 0..self.n_cols {
                t.values[j * self.n_rows + i] = self.values[i * self.n_cols + j];
            }
        }
        t
    }

    pub fn matmul(&self, other: &DenseMatrix) -> DenseMatrix {
        assert_eq!(self.n_cols, other.n_rows, "matmul shape mismatch");
        let mut out = DenseMatrix::zeros(self.n_rows, other.n_cols);
        for i in 0..self.n_rows {
            for k in 0..self.n_cols {
                let a = self.values[i * self.n_cols + k];
                if a == 0.0 {
                    continue;
                }
                let orow = &other.values[k * other.n_cols..(k + 1) * other.n_cols];
                let crow = &mut out.values[i * other.n_cols..(i + 1) * other.n_cols];
                for (c, o) in crow.iter_mut().zip(orow) {
                    *c += a * o;
                }
            }
        }
        out
    }

    pub fn matvec(&self, x: &[f64]) -> Vec<f64> {
        assert_eq!(self.n_cols, x.len(), "matvec shape mismatch");
        let mut out = vec![0.0; self.n_rows];
        for i in 0..self.n_rows {
            let row = self.row(i);
            let mut s = 0.0;
            for (a, b) in row.iter().zip(x) {
                s += a * b;
            }
            out[i] = s;
        }
        out
    }

    pub fn frobenius_norm(&self) -> f64 {
        self.values.iter().map(|v| v * v).sum::<f64>().sqrt()
    }
}

/// Solves the square system `a * x = b` by LU factorization with partial
/// pivoting. Deterministic; fails with `SingularMatrix` when a pivot falls
/// below `PIVOT_FLOOR` of the largest pivot seen.
pub fn dense_solve(a: &DenseMatrix, b: &[f64]) -> Result<Vec<f64>, NumericsError> {
    let n = a.n_rows;
    if a.n_cols != n {
        return Err(NumericsError::DimensionMismatch {
            context: "dense_solve matrix",
            expected: n,
            found: a.n_cols,
        });
    }
    if b.len() != n {
        return Err(NumericsError::DimensionMismatch {
            context: "dense_solve rhs",
            expected: n,
            found: b.len(),
        });
    }
    let mut lu = a.values.clone();
    let mut x = b.to_vec();
    let mut max_pivot = 0.0f64;
    for k in 0..n {
        let mut p = k;
        let mut best = lu[k * n + k].abs();
        for r in k + 1..n {
            let v = lu[r * n + k].abs();
            if v > best {
                best = v;
                p = r;
            }
        }
        max_pivot = max_pivot.max(best);
        if best == 0.0 || best < PIVOT_FLOOR * max_pivot {
            return Err(NumericsError::SingularMatrix {
                stage: "dense_solve",
                index: k,
            });
        }
        if p != k {
            for c in 0..n {
                lu.swap(k * n + c, p * n + c);
            }
            x.swap(k, p);
        }
        let piv = lu[k * n + k];
        for r in k + 1..n {
            let f = lu[r * n + k] / piv;
            if f == 0.0 {
                continue;
            }
            lu[r * n + k] = f;
            for c in k + 1..n {
                lu[r * n + c] -= f * lu[k * n + c];
            }
            x[r] -= f * x[k];
        }
    }
    for k in (0..n).rev() {
        let mut s = x[k];
        for c in k + 1..n {
            s -= lu[k * n + c] * x[c];
        }
        x[k] = s / lu[k * n + k];
    }
    Ok(x)
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn solves_diagonal_system() {
        let a = DenseMatrix::from_rows(&[vec![2.0, 0.0], vec![0.0, 4.0]]);
        let x = dense_solve(&a, &[2.0, 4.0]).unwrap();
        assert_eq!(x, vec![1.0, 1.0]);
    }

    #[test]
    fn matches_cramer_on_2x2() {
        // Independent oracle: Cramer's rule.
        let a = DenseMatrix::from_rows(&[vec![3.0, 1.5], vec![-2.0, 4.0]]);
        let b = [1.0, -7.0];
        let det = 3.0 * 4.0 - 1.5 * (-2.0);
        let x0 = (b[0] * 4.0 - 1.5 * b[1]) / det;
        let x1 = (3.0 * b[1] - b[0] * (-2.0)) / det;
        let x = dense_solve(&a, &b).unwrap();
        assert!((x[0] - x0).abs() < 1e-14);
        assert!((x[1] - x1).abs() < 1e-14);
    }

    #[test]
    fn residual_small_on_random_systems() {
        let mut rng = ChaCha8Rng::seed_from_u64(42);
        for n in [1usize, 3, 10, 60] {
            let mut a = DenseMatrix::zeros(n, n);
            for i in 0..n {
                for j in 0..n {
                    a.set(i, j, rng.gen_range(-1.0..1.0));
                }
                // Diagonal dominance keeps the system well conditioned.
                a.add_at(i, i, n as f64);
            }
            let b: Vec<f64> = (0..n).map(|_| rng.gen_range(-1.0..1.0)).collect();
            let x = dense_solve(&a, &b).unwrap();
            let r = a.matvec(&x);
            let bnorm = b.iter().map(|v| v * v).sum::<f64>().sqrt();
            let res = r
                .iter()
                .zip(&b)
                .map(|(ri, bi)| (ri - bi) * (ri - bi))
                .sum::<f64>()
                .sqrt();
            assert!(res <= 1e-10 * (1.0 + bnorm), "n={n} residual {res}");
        }
    }

    #[test]
    fn rejects_singular_matrix() {
        let a = DenseMatrix::from_rows(&[vec![1.0, 2.0], vec![2.0, 4.0]]);
        match dense_solve(&a, &[1.0, 1.0]) {
            Err(NumericsError::SingularMatrix { .. }) => {}
            other => panic!("expected SingularMatrix, got {other:?}"),
        }
    }

    #[test]
    fn rejects_shape_mismatch() {
        let a = DenseMatrix::zeros(2, 3);
        assert!(matches!(
            dense_solve(&a, &[1.0, 1.0]),
            Err(NumericsError::DimensionMismatch { .. })
        ));
    }

    #[test]
    fn pivoting_handles_zero_leading_entry() {
        let a = DenseMatrix::from_rows(&[vec![0.0, 1.0], vec![1.0, 0.0]]);
        let x = dense_solve(&a, &[3.0, 5.0]).unwrap();
        assert!((x[0] - 5.0).abs() < 1e-14);
        assert!((x[1] - 3.0).abs() < 1e-14);
    }
}
