//! CSR sparse matrices and a left-looking sparse LU factorization with partial
//! pivoting. The factorization keeps L and U in compressed column form and can
//! be reused across many right-hand sides, which is how the mesh-motion
//! operator amortizes its single factorization over a whole run.

use super::{DenseMatrix, NumericsError, PIVOT_FLOOR};

const UNPIVOTED: usize = usize::MAX;

/// Compressed sparse row matrix. Column indices are strictly increasing within
/// each row.
#[derive(Debug, Clone, PartialEq)]
pub struct SparseMatrix {
    pub n_rows: usize,
    pub n_cols: usize,
    pub row_offsets: Vec<usize>,
    pub col_indices: Vec<usize>,
    pub values: Vec<f64>,
}

impl SparseMatrix {
    /// Builds a CSR matrix from (row, col, value) triplets, summing duplicates.
    pub fn from_triplets(
        n_rows: usize,
        n_cols: usize,
        triplets: &[(usize, usize, f64)],
    ) -> SparseMatrix {
        let mut order: Vec<usize> = (0..triplets.len()).collect();
        order.sort_by_key(|&k| (triplets[k].0, triplets[k].1));
        let mut row_offsets = vec![0usize; n_rows + 1];
        let mut col_indices = Vec::with_capacity(triplets.len());
        let mut values = Vec::with_capacity(triplets.len());
        let mut last: Option<(usize, usize)> = None;
        for &k in &order {
            let (r, c, v) = triplets[k];
            assert!(r < n_rows && c < n_cols, "triplet out of range");
            if last == Some((r, c)) {
                *values.last_mut().unwrap() += v;
            } else {
                col_indices.push(c);
                values.push(v);
                row_offsets[r + 1] += 1;
                last = Some((r, c));
            }
        }
        for r in 0..n_rows {
            row_offsets[r + 1] += row_offsets[r];
        }
        SparseMatrix {
            n_rows,
            n_cols,
            row_offsets,
            col_indices,
            values,
        }
    }

    pub fn nnz(&self) -> usize {
        self.values.len()
    }

    /// Checks the CSR structural invariants.
    pub fn validate(&self) -> Result<(), NumericsError> {
        if self.row_offsets.len() != self.n_rows + 1 {
            return Err(NumericsError::InvalidStructure(format!(
                "row_offsets length {} for {} rows",
                self.row_offsets.len(),
                self.n_rows
            )));
        }
        if self.row_offsets[0] != 0 || *self.row_offsets.last().unwrap() != self.col_indices.len()
        {
            return Err(NumericsError::InvalidStructure(
                "row_offsets endpoints inconsistent".into(),
            ));
        }
        if self.col_indices.len() != self.values.len() {
            return Err(NumericsError::InvalidStructure(
                "col_indices/values length mismatch".into(),
            ));
        }
        for r in 0..self.n_rows {
            let (lo, hi) = (self.row_offsets[r], self.row_offsets[r + 1]);
            if lo > hi {
                return Err(NumericsError::InvalidStructure(format!(
                    "row {r} has decreasing offsets"
                )));
            }
            let mut prev: Option<usize> = None;
            for &c in &self.col_indices[lo..hi] {
                if c >= self.n_cols {
                    return Err(NumericsError::InvalidStructure(format!(
                        "row {r} has column {c} out of range"
                    )));
                }
                if let Some(p) = prev {
                    if c <= p {
                        return Err(NumericsError::InvalidStructure(format!(
                            "row {r} columns not strictly increasing"
                        )));
                    }
                }
                prev = Some(c);
            }
        }
        Ok(())
    }

    pub fn matvec(&self, x: &[f64]) -> Vec<f64> {
        assert_eq!(x.len(), self.n_cols, "matvec shape mismatch");
        let mut out = vec![0.0; self.n_rows];
        self.matvec_into(x, &mut out);
        out
    }

    pub fn matvec_into(&self, x: &[f64], out: &mut [f64]) {
        for r in 0..self.n_rows {
            let mut s = 0.0;
            for p in self.row_offsets[r]..self.row_offsets[r + 1] {
                s += self.values[p] * x[self.col_indices[p]];
            }
            out[r] = s;
        }
    }

    /// Multiplies by a dense matrix on the right.
    pub fn matmul_dense(&self, rhs: &DenseMatrix) -> DenseMatrix {
        assert_eq!(self.n_cols, rhs.n_rows, "matmul shape mismatch");
        let ncols = rhs.n_cols;
        let mut out = DenseMatrix::zeros(self.n_rows, ncols);
        for r in 0..self.n_rows {
            let orow = &mut out.values[r * ncols..(r + 1) * ncols];
            for p in self.row_offsets[r]..self.row_offsets[r + 1] {
                let v = self.values[p];
                if v == 0.0 {
                    continue;
                }
                let xrow = rhs.row(self.col_indices[p]);
                for (o, x) in orow.iter_mut().zip(xrow) {
                    *o += v * x;
                }
            }
        }
        out
    }

    pub fn transpose(&self) -> SparseMatrix {
        let mut counts = vec![0usize; self.n_cols + 1];
        for &c in &self.col_indices {
            counts[c + 1] += 1;
        }
        for c in 0..self.n_cols {
            counts[c + 1] += counts[c];
        }
        let row_offsets = counts.clone();
        let mut col_indices = vec![0usize; self.nnz()];
        let mut values = vec![0.0f64; self.nnz()];
        let mut cursor = counts;
        for r in 0..self.n_rows {
            for p in self.row_offsets[r]..self.row_offsets[r + 1] {
                let c = self.col_indices[p];
                let slot = cursor[c];
                col_indices[slot] = r;
                values[slot] = self.values[p];
                cursor[c] += 1;
            }
        }
        SparseMatrix {
            n_rows: self.n_cols,
            n_cols: self.n_rows,
            row_offsets,
            col_indices,
            values,
        }
    }

    pub fn to_dense(&self) -> DenseMatrix {
        let mut d = DenseMatrix::zeros(self.n_rows, self.n_cols);
        for r in 0..self.n_rows {
            for p in self.row_offsets[r]..self.row_offsets[r + 1] {
                d.set(r, self.col_indices[p], self.values[p]);
            }
        }
        d
    }
}

/// Sparse LU factorization `P A Q = L U` with row partial pivoting and an
/// optional fill-reducing column order.
pub struct SparseLu {
    n: usize,
    l_ptr: Vec<usize>,
    l_idx: Vec<usize>,
    l_val: Vec<f64>,
    u_ptr: Vec<usize>,
    u_idx: Vec<usize>,
    u_val: Vec<f64>,
    /// original row -> pivot position
    pinv: Vec<usize>,
    /// pivot column j is original column q[j]
    q: Vec<usize>,
}

impl SparseLu {
    pub fn factor(a: &SparseMatrix) -> Result<SparseLu, NumericsError> {
        Self::factor_ordered(a, None)
    }

    /// Factors with an explicit column order (a permutation of 0..n).
    pub fn factor_ordered(
        a: &SparseMatrix,
        order: Option<&[usize]>,
    ) -> Result<SparseLu, NumericsError> {
        let n = a.n_rows;
        if a.n_cols != n {
            return Err(NumericsError::DimensionMismatch {
                context: "sparse factor",
                expected: n,
                found: a.n_cols,
            });
        }
        a.validate()?;
        let q: Vec<usize> = match order {
            Some(o) => {
                assert_eq!(o.len(), n, "column order length mismatch");
                o.to_vec()
            }
            None => (0..n).collect(),
        };
        // CSR of A^T gives column access into A.
        let at = a.transpose();

        let mut lu = SparseLu {
            n,
            l_ptr: vec![0usize; 1],
            l_idx: Vec::new(),
            l_val: Vec::new(),
            u_ptr: vec![0usize; 1],
            u_idx: Vec::new(),
            u_val: Vec::new(),
            pinv: vec![UNPIVOTED; n],
            q,
        };
        let mut x = vec![0.0f64; n];
        let mut visited = vec![false; n];
        let mut topo: Vec<usize> = Vec::with_capacity(64);
        let mut stack: Vec<(usize, usize)> = Vec::with_capacity(64);
        let mut max_pivot = 0.0f64;

        for j in 0..n {
            let col = lu.q[j];
            // Pattern of the triangular solve: depth-first search over the
            // columns of L already built, in reverse-post (topological) order.
            topo.clear();
            for p in at.row_offsets[col]..at.row_offsets[col + 1] {
                let root = at.col_indices[p];
                if visited[root] {
                    continue;
                }
                visited[root] = true;
                stack.push((root, 0));
                while let Some(&(node, cursor)) = stack.last() {
                    let jnew = lu.pinv[node];
                    let (start, len) = if jnew == UNPIVOTED {
                        (0, 0)
                    } else {
                        (lu.l_ptr[jnew] + 1, lu.l_ptr[jnew + 1] - lu.l_ptr[jnew] - 1)
                    };
                    let mut cur = cursor;
                    let mut next_child = None;
                    while cur < len {
                        let child = lu.l_idx[start + cur];
                        cur += 1;
                        if !visited[child] {
                            next_child = Some(child);
                            break;
                        }
                    }
                    stack.last_mut().unwrap().1 = cur;
                    match next_child {
                        Some(c) => {
                            visited[c] = true;
                            stack.push((c, 0));
                        }
                        None => {
                            topo.push(node);
                            stack.pop();
                        }
                    }
                }
            }
            // Numeric solve: scatter the column, then eliminate in dependency
            // order (reverse of post-order).
            for p in at.row_offsets[col]..at.row_offsets[col + 1] {
                x[at.col_indices[p]] = at.values[p];
            }
            for idx in (0..topo.len()).rev() {
                let node = topo[idx];
                let jnew = lu.pinv[node];
                if jnew == UNPIVOTED {
                    continue;
                }
                let xv = x[node];
                if xv != 0.0 {
                    for p in lu.l_ptr[jnew] + 1..lu.l_ptr[jnew + 1] {
                        x[lu.l_idx[p]] -= lu.l_val[p] * xv;
                    }
                }
            }
            // Partial pivot among not-yet-pivoted rows in the pattern.
            let mut ipiv = UNPIVOTED;
            let mut best = 0.0f64;
            for &node in &topo {
                if lu.pinv[node] == UNPIVOTED {
                    let v = x[node].abs();
                    if v > best || ipiv == UNPIVOTED {
                        best = v;
                        ipiv = node;
                    }
                }
            }
            max_pivot = max_pivot.max(best);
            if ipiv == UNPIVOTED || best == 0.0 || best < PIVOT_FLOOR * max_pivot {
                return Err(NumericsError::SingularMatrix {
                    stage: "sparse factor",
                    index: j,
                });
            }
            let pivot = x[ipiv];
            // U column j: previously pivoted rows, diagonal entry last.
            for &node in &topo {
                let pos = lu.pinv[node];
                if pos != UNPIVOTED && x[node] != 0.0 {
                    lu.u_idx.push(pos);
                    lu.u_val.push(x[node]);
                }
            }
            lu.u_idx.push(j);
            lu.u_val.push(pivot);
            lu.u_ptr.push(lu.u_idx.len());
            // L column j: unit diagonal first, then the remaining rows.
            lu.l_idx.push(ipiv);
            lu.l_val.push(1.0);
            for &node in &topo {
                if lu.pinv[node] == UNPIVOTED && node != ipiv && x[node] != 0.0 {
                    lu.l_idx.push(node);
                    lu.l_val.push(x[node] / pivot);
                }
            }
            lu.l_ptr.push(lu.l_idx.len());
            lu.pinv[ipiv] = j;
            for &node in &topo {
                x[node] = 0.0;
                visited[node] = false;
            }
        }
        // Map L's row indices into pivot space so both factors are triangular.
        for idx in lu.l_idx.iter_mut() {
            *idx = lu.pinv[*idx];
        }
        Ok(lu)
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn nnz(&self) -> usize {
        self.l_val.len() + self.u_val.len()
    }

    /// Solves `A x = b` using the stored factorization.
    pub fn solve(&self, b: &[f64]) -> Result<Vec<f64>, NumericsError> {
        if b.len() != self.n {
            return Err(NumericsError::DimensionMismatch {
                context: "sparse solve rhs",
                expected: self.n,
                found: b.len(),
            });
        }
        let n = self.n;
        let mut y = vec![0.0f64; n];
        for i in 0..n {
            y[self.pinv[i]] = b[i];
        }
        // L has a unit diagonal stored as the first entry of each column.
        for j in 0..n {
            let yj = y[j];
            if yj != 0.0 {
                for p in self.l_ptr[j] + 1..self.l_ptr[j + 1] {
                    y[self.l_idx[p]] -= self.l_val[p] * yj;
                }
            }
        }
        // U has its diagonal stored as the last entry of each column.
        for j in (0..n).rev() {
            let pdiag = self.u_ptr[j + 1] - 1;
            let yj = y[j] / self.u_val[pdiag];
            y[j] = yj;
            if yj != 0.0 {
                for p in self.u_ptr[j]..pdiag {
                    y[self.u_idx[p]] -= self.u_val[p] * yj;
                }
            }
        }
        let mut x = vec![0.0f64; n];
        for j in 0..n {
            x[self.q[j]] = y[j];
        }
        Ok(x)
    }
}

/// Reverse Cuthill-McKee ordering on the symmetrized pattern, used as a
/// fill-reducing column order for the LU.
pub fn rcm_ordering(a: &SparseMatrix) -> Vec<usize> {
    let n = a.n_rows;
    let mut adj: Vec<Vec<usize>> = vec![Vec::new(); n];
    for r in 0..a.n_rows {
        for p in a.row_offsets[r]..a.row_offsets[r + 1] {
            let c = a.col_indices[p];
            if c != r && c < n {
                adj[r].push(c);
                adj[c].push(r);
            }
        }
    }
    for l in adj.iter_mut() {
        l.sort_unstable();
        l.dedup();
    }
    let degree: Vec<usize> = adj.iter().map(|l| l.len()).collect();
    let mut visited = vec![false; n];
    let mut order = Vec::with_capacity(n);
    let mut queue = std::collections::VecDeque::new();
    loop {
        // Next component root: the unvisited vertex of minimum degree.
        let mut root = None;
        for v in 0..n {
            if !visited[v] && root.map_or(true, |r: usize| degree[v] < degree[r]) {
                root = Some(v);
            }
        }
        let Some(root) = root else { break };
        visited[root] = true;
        queue.push_back(root);
        while let Some(v) = queue.pop_front() {
            order.push(v);
            let mut nbrs: Vec<usize> = adj[v].iter().copied().filter(|&w| !visited[w]).collect();
            nbrs.sort_by_key(|&w| (degree[w], w));
            for w in nbrs {
                visited[w] = true;
                queue.push_back(w);
            }
        }
    }
    order.reverse();
    order
}

/// Convenience one-shot solve: fill-reducing order, factor, single solve.
pub fn solve_sparse_linear(a: &SparseMatrix, b: &[f64]) -> Result<Vec<f64>, NumericsError> {
    let q = rcm_ordering(a);
    SparseLu::factor_ordered(a, Some(&q))?.solve(b)
}
