//! Federated text retrieval over peer-local concept spaces.
//!
//! Each peer clusters its documents, builds a threshold-truncated SVD space
//! per cluster, links clusters through a paired similarity network, and
//! publishes compact per-cluster descriptors to a broker. The broker selects
//! peers for a query from descriptors alone; selected peers retrieve locally
//! and the broker merges the returned lists. Everything runs in-process so
//! experiments are cheap and reproducible.

pub mod baselines;
pub mod clustering;
pub mod corpus;
pub mod error;
pub mod eval;
pub mod federation;
pub mod linalg;
pub mod peer;

pub use error::{Error, Result};
