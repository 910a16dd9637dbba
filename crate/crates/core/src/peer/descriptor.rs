//! Compact per-cluster descriptors published to the broker, and the
//! scoring path shared between broker and peer.
//!
//! Broker-side scoring from a descriptor must equal peer-side scoring from
//! the full index bit for bit, so both sides run the generic functions in
//! this file over the same stored vectors; only the storage behind the
//! [`ClusterScoreView`] trait differs.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::{SparseVec, TermId};

/// Format version stamped on every published descriptor.
pub const DESCRIPTOR_VERSION: u32 = 1;

/// Centroid of one cluster projected through a related cluster's concept
/// space, published so the broker can score query terms the cluster itself
/// does not contain.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RhoEntry {
    /// Id of the related cluster whose space produced this vector.
    pub source: usize,
    /// `U'_source * U'^T_source * mu`, supported within the source terms.
    pub vector: SparseVec,
}

/// Everything the broker holds about one cluster.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ClusterDescriptor {
    /// Number of documents in the cluster.
    pub n: u64,
    /// The cluster's term set, sorted. Needed to route query terms: a term
    /// inside scores against `mu`, a term outside scans `rho` for the first
    /// related cluster containing it.
    pub terms: Vec<TermId>,
    /// Concept-space centroid in the global term space.
    pub mu: SparseVec,
    /// Projected centroids, ordered by decreasing similarity of the source.
    pub rho: Vec<RhoEntry>,
}

/// A peer's full published record: one descriptor per cluster.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PeerDescriptor {
    pub version: u32,
    pub peer_id: String,
    pub clusters: Vec<ClusterDescriptor>,
}

impl PeerDescriptor {
    /// Structural validation applied at publish time. Rejects version
    /// mismatches, malformed sparse vectors, centroids escaping their
    /// cluster's vocabulary, and rho entries whose support leaks outside
    /// their source cluster's term set.
    pub fn validate(&self) -> Result<()> {
        if self.version != DESCRIPTOR_VERSION {
            return Err(Error::Descriptor(format!(
                "unsupported descriptor version {} (expected {DESCRIPTOR_VERSION})",
                self.version
            )));
        }
        if self.clusters.is_empty() {
            return Err(Error::Descriptor(format!(
                "peer {} published no clusters",
                self.peer_id
            )));
        }
        for (cid, cluster) in self.clusters.iter().enumerate() {
            if cluster.n == 0 {
                return Err(Error::Descriptor(format!("cluster {cid} is empty")));
            }
            if cluster.terms.windows(2).any(|w| w[0] >= w[1]) {
                return Err(Error::Descriptor(format!(
                    "cluster {cid} term set is not strictly sorted"
                )));
            }
            cluster
                .mu
                .validate()
                .map_err(|e| Error::Descriptor(format!("cluster {cid} centroid: {e}")))?;
            if !cluster.mu.supported_by(&cluster.terms) {
                return Err(Error::Descriptor(format!(
                    "cluster {cid} centroid has weight outside its term set"
                )));
            }
            let mut seen_sources = Vec::new();
            for entry in &cluster.rho {
                if entry.source >= self.clusters.len() || entry.source == cid {
                    return Err(Error::Descriptor(format!(
                        "cluster {cid} rho references invalid cluster {}",
                        entry.source
                    )));
                }
                if seen_sources.contains(&entry.source) {
                    return Err(Error::Descriptor(format!(
                        "cluster {cid} rho lists cluster {} twice",
                        entry.source
                    )));
                }
                seen_sources.push(entry.source);
                entry
                    .vector
                    .validate()
                    .map_err(|e| Error::Descriptor(format!("cluster {cid} rho: {e}")))?;
                if !entry.vector.supported_by(&self.clusters[entry.source].terms) {
                    return Err(Error::Descriptor(format!(
                        "cluster {cid} rho vector escapes the term set of cluster {}",
                        entry.source
                    )));
                }
            }
        }
        Ok(())
    }
}

/// Read access to per-cluster scoring state, implemented by both the full
/// peer index and the published descriptor.
pub trait ClusterScoreView {
    fn cluster_count(&self) -> usize;
    fn doc_count(&self, c: usize) -> u64;
    /// Sorted term set of cluster `c`.
    fn terms(&self, c: usize) -> &[TermId];
    fn centroid(&self, c: usize) -> &SparseVec;
    /// Projected centroids of `c`, ordered by decreasing source similarity.
    fn rho_list(&self, c: usize) -> &[RhoEntry];
}

impl ClusterScoreView for PeerDescriptor {
    fn cluster_count(&self) -> usize {
        self.clusters.len()
    }
    fn doc_count(&self, c: usize) -> u64 {
        self.clusters[c].n
    }
    fn terms(&self, c: usize) -> &[TermId] {
        &self.clusters[c].terms
    }
    fn centroid(&self, c: usize) -> &SparseVec {
        &self.clusters[c].mu
    }
    fn rho_list(&self, c: usize) -> &[RhoEntry] {
        &self.clusters[c].rho
    }
}

/// Relevance of cluster `c` to the query: for a query term the cluster
/// contains, `n * mu_t * q_t`; for one it does not, `n * rho_t * q_t`
/// through the first related cluster whose term set contains the term.
pub fn cluster_score<V: ClusterScoreView + ?Sized>(view: &V, c: usize, q: &SparseVec) -> f64 {
    let n = view.doc_count(c) as f64;
    let terms = view.terms(c);
    let mut score = 0.0;
    for (t, q_t) in q.iter() {
        if terms.binary_search(&t).is_ok() {
            score += n * view.centroid(c).get(t) * q_t;
        } else {
            for entry in view.rho_list(c) {
                if view.terms(entry.source).binary_search(&t).is_ok() {
                    score += n * entry.vector.get(t) * q_t;
                    break;
                }
            }
        }
    }
    score
}

/// All clusters scored and ordered by decreasing score, ties to the lower
/// cluster id.
pub fn rank_clusters<V: ClusterScoreView + ?Sized>(view: &V, q: &SparseVec) -> Vec<(usize, f64)> {
    let mut scores: Vec<(usize, f64)> = (0..view.cluster_count())
        .map(|c| (c, cluster_score(view, c, q)))
        .collect();
    scores.sort_by(|a, b| b.1.partial_cmp(&a.1).expect("scores are finite").then(a.0.cmp(&b.0)));
    scores
}

/// Peer relevance: the sum of the top `h` cluster scores, along with the
/// ids contributing to it. `h` larger than the cluster count sums them all.
pub fn peer_score<V: ClusterScoreView + ?Sized>(
    view: &V,
    q: &SparseVec,
    h: usize,
) -> (f64, Vec<usize>) {
    let ranked = rank_clusters(view, q);
    let top = &ranked[..h.min(ranked.len())];
    let score = top.iter().map(|&(_, s)| s).sum();
    let ids = top.iter().map(|&(c, _)| c).collect();
    (score, ids)
}
