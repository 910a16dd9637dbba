//! Dense matrices, sparse vectors, and the truncated SVD machinery that
//! the concept-space indexing is built on.

mod matrix;
mod sparse;
mod svd;

pub use matrix::DenseMatrix;
pub use sparse::{dot_score, SparseVec, TermId};
pub use svd::{
    svd, truncate_by_rank, truncate_by_threshold, LsiSpace, SvdFactors, RANK_CUTOFF_FACTOR,
};
