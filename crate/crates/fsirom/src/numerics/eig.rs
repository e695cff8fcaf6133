//! Symmetric eigendecomposition via Householder tridiagonalization followed by
//! the implicit QL iteration, returning eigenpairs in descending eigenvalue
//! order. Sized for correlation matrices (hundreds to a few thousand rows).

use super::{DenseMatrix, NumericsError};

const SYMMETRY_TOL: f64 = 1e-12;
const MAX_QL_SWEEPS: usize = 60;

/// Eigendecomposition of a symmetric matrix. Returns `(eigenvalues, q)` with
/// eigenvalues sorted descending and `q`'s columns holding the matching
/// eigenvectors. Tiny negative eigenvalues produced by round-off are clamped
/// to zero.
pub fn sym_eig_descending(c: &DenseMatrix) -> Result<(Vec<f64>, DenseMatrix), NumericsError> {
    let n = c.n_rows;
    if c.n_cols != n {
        return Err(NumericsError::DimensionMismatch {
            context: "sym_eig_descending",
            expected: n,
            found: c.n_cols,
        });
    }
    let mut max_abs = 0.0f64;
    let mut max_asym = 0.0f64;
    for i in 0..n {
        for j in 0..n {
            max_abs = max_abs.max(c.get(i, j).abs());
            if j > i {
                max_asym = max_asym.max((c.get(i, j) - c.get(j, i)).abs());
            }
        }
    }
    if max_asym > SYMMETRY_TOL * max_abs.max(1.0) {
        return Err(NumericsError::NotSymmetric {
            max_asymmetry: max_asym,
        });
    }
    if n == 0 {
        return Ok((Vec::new(), DenseMatrix::zeros(0, 0)));
    }

    let mut z = c.values.clone();
    let mut d = vec![0.0f64; n];
    let mut e = vec![0.0f64; n];
    tridiagonalize(&mut z, &mut d, &mut e, n);
    ql_implicit(&mut z, &mut d, &mut e, n)?;

    // Sort descending, permuting eigenvector columns alongside.
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&a, &b| d[b].partial_cmp(&d[a]).unwrap());
    let mut vals = Vec::with_capacity(n);
    let mut q = DenseMatrix::zeros(n, n);
    for (newc, &oldc) in order.iter().enumerate() {
        vals.push(if d[oldc] < 0.0 && d[oldc] > -SYMMETRY_TOL * max_abs.max(1.0) {
            0.0
        } else {
            d[oldc]
        });
        for r in 0..n {
            q.values[r * n + newc] = z[r * n + oldc];
        }
    }
    Ok((vals, q))
}

/// Householder reduction to tridiagonal form; `z` accumulates the orthogonal
/// transformation, `d` receives the diagonal and `e` the subdiagonal.
fn tridiagonalize(z: &mut [f64], d: &mut [f64], e: &mut [f64], n: usize) {
    for i in (1..n).rev() {
        let l = i - 1;
        let mut h = 0.0;
        if l > 0 {
            let mut scale = 0.0;
            for k in 0..=l {
                scale += z[i * n + k].abs();
            }
            if scale == 0.0 {
                e[i] = z[i * n + l];
            } else {
                for k in 0..=l {
                    z[i * n + k] /= scale;
                    h += z[i * n + k] * z[i * n + k];
                }
                let f = z[i * n + l];
                let g = if f >= 0.0 { -h.sqrt() } else { h.sqrt() };
                e[i] = scale * g;
                h -= f * g;
                z[i * n + l] = f - g;
                let mut fsum = 0.0;
                for j in 0..=l {
                    z[j * n + i] = z[i * n + j] / h;
                    let mut g = 0.0;
                    for k in 0..=j {
                        g += z[j * n + k] * z[i * n + k];
                    }
                    for k in j + 1..=l {
                        g += z[k * n + j] * z[i * n + k];
                    }
                    e[j] = g / h;
                    fsum += e[j] * z[i * n + j];
                }
                let hh = fsum / (h + h);
                for j in 0..=l {
                    let f = z[i * n + j];
                    let g = e[j] - hh * f;
                    e[j] = g;
                    for k in 0..=j {
                        z[j * n + k] -= f * e[k] + g * z[i * n + k];
                    }
                }
            }
        } else {
            e[i] = z[i * n + l];
        }
        d[i] = h;
    }
    d[0] = 0.0;
    e[0] = 0.0;
    for i in 0..n {
        if d[i] != 0.0 {
            for j in 0..i {
                let mut g = 0.0;
                for k in 0..i {
                    g += z[i * n + k] * z[k * n + j];
                }
                for k in 0..i {
                    z[k * n + j] -= g * z[k * n + i];
                }
            }
        }
        d[i] = z[i * n + i];
        z[i * n + i] = 1.0;
        for j in 0..i {
            z[j * n + i] = 0.0;
            z[i * n + j] = 0.0;
        }
    }
}

/// Implicit QL iteration with Wilkinson shifts on the tridiagonal system,
/// rotating the accumulated vectors in `z` alongside.
fn ql_implicit(z: &mut [f64], d: &mut [f64], e: &mut [f64], n: usize) -> Result<(), NumericsError> {
    for i in 1..n {
        e[i - 1] = e[i];
    }
    e[n - 1] = 0.0;
    for l in 0..n {
        let mut iter = 0;
        loop {
            let mut m = l;
            while m + 1 < n {
                let dd = d[m].abs() + d[m + 1].abs();
                if e[m].abs() <= f64::EPSILON * dd {
                    break;
                }
                m += 1;
            }
            if m == l {
                break;
            }
            iter += 1;
            if iter > MAX_QL_SWEEPS {
                return Err(NumericsError::IterationLimit {
                    stage: "ql_implicit",
                });
            }
            let mut g = (d[l + 1] - d[l]) / (2.0 * e[l]);
            let mut r = g.hypot(1.0);
            let denom = g + if g >= 0.0 { r.abs() } else { -r.abs() };
            g = d[m] - d[l] + e[l] / denom;
            let (mut s, mut c) = (1.0f64, 1.0f64);
            let mut p = 0.0f64;
            let mut underflow = false;
            for i in (l..m).rev() {
                let mut f = s * e[i];
                let b = c * e[i];
                r = f.hypot(g);
                e[i + 1] = r;
                if r == 0.0 {
                    d[i + 1] -= p;
                    e[m] = 0.0;
                    underflow = true;
                    break;
                }
                s = f / r;
                c = g / r;
                g = d[i + 1] - p;
                r = (d[i] - g) * s + 2.0 * c * b;
                p = s * r;
                d[i + 1] = g + p;
                g = c * r - b;
                for k in 0..n {
                    f = z[k * n + i + 1];
                    z[k * n + i + 1] = s * z[k * n + i] + c * f;
                    z[k * n + i] = c * z[k * n + i] - s * f;
                }
            }
            if underflow {
                continue;
            }
            d[l] -= p;
            e[l] = g;
            e[m] = 0.0;
        }
    }
    Ok(())
}
