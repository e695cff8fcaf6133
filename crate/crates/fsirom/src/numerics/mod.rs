//! Linear-algebra kernels used throughout the solver: a CSR sparse matrix with a
//! direct LU factorization (partial pivoting), a dense row-major matrix with an
//! LU solve for reduced systems, and a symmetric eigensolver for correlation
//! matrices.

mod dense;
mod eig;
mod sparse;

pub use dense::{dense_solve, DenseMatrix};
pub use eig::sym_eig_descending;
pub use sparse::{rcm_ordering, solve_sparse_linear, SparseLu, SparseMatrix};

/// Pivot magnitudes below this fraction of the largest pivot seen so far are
/// treated as numerically singular.
pub const PIVOT_FLOOR: f64 = 1e-14;

#[derive(Debug, Clone, PartialEq)]
pub enum NumericsError {
    /// Factorization hit a zero or near-zero pivot (below `PIVOT_FLOOR` of the
    /// largest pivot encountered).
    SingularMatrix { stage: &'static str, index: usize },
    /// Input to the symmetric eigensolver deviates from symmetry by more than
    /// 1e-12 relative to its largest entry.
    NotSymmetric { max_asymmetry: f64 },
    /// Operand shapes do not line up.
    DimensionMismatch {
        context: &'static str,
        expected: usize,
        found: usize,
    },
    /// CSR structure violates its invariants (offsets, column ordering, bounds).
    InvalidStructure(String),
    /// Iterative stage failed to converge (QL eigenvalue iteration).
    IterationLimit { stage: &'static str },
}

impl std::fmt::Display for NumericsError {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            NumericsError::SingularMatrix { stage, index } => {
                write!(f, "singular matrix in {stage} at pivot {index}")
            }
            NumericsError::NotSymmetric { max_asymmetry } => {
                write!(f, "matrix not symmetric (max asymmetry {max_asymmetry:.3e})")
            }
            NumericsError::DimensionMismatch {
                context,
                expected,
                found,
            } => write!(f, "dimension mismatch in {context}: expected {expected}, found {found}"),
            NumericsError::InvalidStructure(msg) => write!(f, "invalid sparse structure: {msg}"),
            NumericsError::IterationLimit { stage } => {
                write!(f, "iteration limit exceeded in {stage}")
            }
        }
    }
}

impl std::error::Error for NumericsError {}
