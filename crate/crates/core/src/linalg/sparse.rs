use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Identifier of a term in a dense 0-based dictionary.
pub type TermId = u32;

/// Sparse vector over term ids, stored as (index, weight) pairs with
/// strictly increasing indices. All dot products and norms are merge
/// walks over the sorted pairs, so they cost O(nnz).
#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(transparent)]
pub struct SparseVec {
    entries: Vec<(TermId, f64)>,
}

impl SparseVec {
    /// Builds a vector from pairs already sorted by index.
    ///
    /// Errors with [`Error::Dimension`] when indices are out of order or
    /// duplicated, and with [`Error::Parameter`] on non-finite weights.
    pub fn new(entries: Vec<(TermId, f64)>) -> Result<Self> {
        for window in entries.windows(2) {
            if window[0].0 >= window[1].0 {
                return Err(Error::Dimension(format!(
                    "sparse indices must be strictly increasing, got {} then {}",
                    window[0].0, window[1].0
                )));
            }
        }
        for &(idx, w) in &entries {
            if !w.is_finite() {
                return Err(Error::Parameter(format!(
                    "non-finite weight {w} at index {idx}"
                )));
            }
        }
        Ok(SparseVec { entries })
    }

    /// Builds a vector from pairs in any order. Duplicate indices are a
    /// construction error, not silently summed.
    pub fn from_unsorted(mut entries: Vec<(TermId, f64)>) -> Result<Self> {
        entries.sort_by_key(|&(idx, _)| idx);
        Self::new(entries)
    }

    pub fn empty() -> Self {
        SparseVec { entries: Vec::new() }
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn iter(&self) -> impl Iterator<Item = (TermId, f64)> + '_ {
        self.entries.iter().copied()
    }

    pub fn indices(&self) -> impl Iterator<Item = TermId> + '_ {
        self.entries.iter().map(|&(idx, _)| idx)
    }

    /// Weight at `index`, 0.0 when absent.
    pub fn get(&self, index: TermId) -> f64 {
        match self.entries.binary_search_by_key(&index, |&(idx, _)| idx) {
            Ok(pos) => self.entries[pos].1,
            Err(_) => 0.0,
        }
    }

    /// Dot product via a merge walk over the two sorted index lists.
    pub fn dot(&self, other: &SparseVec) -> f64 {
        let mut sum = 0.0;
        let (mut i, mut j) = (0, 0);
        while i < self.entries.len() && j < other.entries.len() {
            let (ia, va) = self.entries[i];
            let (ib, vb) = other.entries[j];
            match ia.cmp(&ib) {
                std::cmp::Ordering::Less => i += 1,
                std::cmp::Ordering::Greater => j += 1,
                std::cmp::Ordering::Equal => {
                    sum += va * vb;
                    i += 1;
                    j += 1;
                }
            }
        }
        sum
    }

    pub fn norm(&self) -> f64 {
        self.entries.iter().map(|&(_, v)| v * v).sum::<f64>().sqrt()
    }

    /// Unit-norm copy; the zero vector stays zero.
    pub fn normalized(&self) -> SparseVec {
        let n = self.norm();
        if n == 0.0 {
            return self.clone();
        }
        SparseVec {
            entries: self.entries.iter().map(|&(i, v)| (i, v / n)).collect(),
        }
    }

    pub fn scale(&self, factor: f64) -> SparseVec {
        SparseVec {
            entries: self.entries.iter().map(|&(i, v)| (i, v * factor)).collect(),
        }
    }

    /// `self + factor * other`, dropping entries that come out exactly zero.
    pub fn add_scaled(&self, other: &SparseVec, factor: f64) -> SparseVec {
        let mut out = Vec::with_capacity(self.entries.len() + other.entries.len());
        let (mut i, mut j) = (0, 0);
        while i < self.entries.len() || j < other.entries.len() {
            let next = match (self.entries.get(i), other.entries.get(j)) {
                (Some(&(ia, va)), Some(&(ib, vb))) => match ia.cmp(&ib) {
                    std::cmp::Ordering::Less => {
                        i += 1;
                        (ia, va)
                    }
                    std::cmp::Ordering::Greater => {
                        j += 1;
                        (ib, factor * vb)
                    }
                    std::cmp::Ordering::Equal => {
                        i += 1;
                        j += 1;
                        (ia, va + factor * vb)
                    }
                },
                (Some(&(ia, va)), None) => {
                    i += 1;
                    (ia, va)
                }
                (None, Some(&(ib, vb))) => {
                    j += 1;
                    (ib, factor * vb)
                }
                (None, None) => unreachable!(),
            };
            if next.1 != 0.0 {
                out.push(next);
            }
        }
        SparseVec { entries: out }
    }

    /// True when every index appears in `support` (a sorted id slice).
    pub fn supported_by(&self, support: &[TermId]) -> bool {
        self.entries
            .iter()
            .all(|&(idx, _)| support.binary_search(&idx).is_ok())
    }

    /// Re-checks the construction invariants. Deserialization fills the
    /// entry list directly, so data crossing a trust boundary (descriptors
    /// arriving at a broker) is validated with this before use.
    pub fn validate(&self) -> Result<()> {
        Self::new(self.entries.clone()).map(|_| ())
    }
}

/// Inner-product relevance score between two sparse vectors.
pub fn dot_score(a: &SparseVec, b: &SparseVec) -> f64 {
    a.dot(b)
}
