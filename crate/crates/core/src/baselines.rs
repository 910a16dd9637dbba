//! Baseline peer-selection descriptors and index-build ablations used for
//! comparison against the concept-space pipeline: a single-centroid
//! summary (one vector per peer), a per-cluster mean-term-weight summary,
//! a fixed-rank truncation variant, and a variant with cluster relations
//! disabled.

use serde::{Deserialize, Serialize};

use crate::clustering::{kmeans, DEFAULT_MAX_ITERS};
use crate::corpus::WeightedDoc;
use crate::error::{Error, Result};
use crate::linalg::{SparseVec, TermId};
use crate::peer::{
    ClusterScoreView, PeerIndex, PeerIndexBuilder, RhoEntry, TruncationMode, DESCRIPTOR_VERSION,
};

/// Whole-peer summary: document count and the centroid of the peer's
/// unit-normalized document vectors. Peer relevance is `n * mu . q`, which
/// equals the sum of per-document inner products.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GglossDescriptor {
    pub version: u32,
    pub peer_id: String,
    pub n: u64,
    pub mu: SparseVec,
}

impl GglossDescriptor {
    pub fn build(peer_id: &str, docs: &[WeightedDoc]) -> Result<Self> {
        if docs.is_empty() {
            return Err(Error::Parameter(format!("peer {peer_id} has no documents")));
        }
        let mut sum = SparseVec::empty();
        for d in docs {
            sum = sum.add_scaled(&d.weights.normalized(), 1.0);
        }
        Ok(GglossDescriptor {
            version: DESCRIPTOR_VERSION,
            peer_id: peer_id.into(),
            n: docs.len() as u64,
            mu: sum.scale(1.0 / docs.len() as f64),
        })
    }

    /// Summarizes an existing index over its current members, folded
    /// documents included.
    pub fn from_index(index: &PeerIndex) -> Self {
        let mut sum = SparseVec::empty();
        let mut n = 0u64;
        for cluster in &index.clusters {
            for d in &cluster.raw_docs {
                sum = sum.add_scaled(d, 1.0);
            }
            n += cluster.raw_docs.len() as u64;
        }
        GglossDescriptor {
            version: DESCRIPTOR_VERSION,
            peer_id: index.peer_id.clone(),
            n,
            mu: sum.scale(1.0 / n as f64),
        }
    }

    pub fn score(&self, q: &SparseVec) -> f64 {
        self.n as f64 * self.mu.dot(q)
    }

    pub fn validate(&self) -> Result<()> {
        if self.version != DESCRIPTOR_VERSION {
            return Err(Error::Descriptor(format!(
                "unsupported descriptor version {} (expected {DESCRIPTOR_VERSION})",
                self.version
            )));
        }
        if self.n == 0 {
            return Err(Error::Descriptor(format!("peer {} reports no documents", self.peer_id)));
        }
        self.mu.validate()
    }
}

/// One cluster's summary under the mean-term-weight scheme: for each term
/// the cluster contains, the average weight over the documents that carry
/// it (documents lacking the term do not dilute the average).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct IsClusterCluster {
    pub n: u64,
    /// Sorted support of `weights`.
    pub terms: Vec<TermId>,
    pub weights: SparseVec,
}

/// Per-cluster mean-term-weight descriptors for one peer.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct IsClusterDescriptor {
    pub version: u32,
    pub peer_id: String,
    pub clusters: Vec<IsClusterCluster>,
}

fn mean_present_weights(docs: &[&SparseVec]) -> IsClusterCluster {
    let mut sums: std::collections::BTreeMap<TermId, (f64, u64)> = std::collections::BTreeMap::new();
    for d in docs {
        for (t, w) in d.iter() {
            let entry = sums.entry(t).or_insert((0.0, 0));
            entry.0 += w;
            entry.1 += 1;
        }
    }
    let entries: Vec<(TermId, f64)> =
        sums.iter().map(|(&t, &(sum, count))| (t, sum / count as f64)).collect();
    let terms: Vec<TermId> = entries.iter().map(|&(t, _)| t).collect();
    IsClusterCluster {
        n: docs.len() as u64,
        terms,
        weights: SparseVec::new(entries).expect("BTreeMap iterates in sorted order"),
    }
}

impl IsClusterDescriptor {
    /// Clusters the documents and summarizes each cluster.
    pub fn build(peer_id: &str, docs: &[WeightedDoc], k: usize, seed: u64) -> Result<Self> {
        if docs.is_empty() {
            return Err(Error::Parameter(format!("peer {peer_id} has no documents")));
        }
        let normalized: Vec<WeightedDoc> = docs
            .iter()
            .map(|d| WeightedDoc { id: d.id.clone(), weights: d.weights.normalized() })
            .collect();
        let k = k.min(normalized.len());
        let clustering = kmeans(&normalized, k, seed, DEFAULT_MAX_ITERS)?;
        let clusters = (0..k)
            .map(|c| {
                let members: Vec<&SparseVec> = clustering
                    .assignment
                    .iter()
                    .enumerate()
                    .filter(|&(_, &a)| a == c)
                    .map(|(pos, _)| &normalized[pos].weights)
                    .collect();
                mean_present_weights(&members)
            })
            .collect();
        Ok(IsClusterDescriptor { version: DESCRIPTOR_VERSION, peer_id: peer_id.into(), clusters })
    }

    /// Summarizes an existing index's clusters over their current members,
    /// so both summaries describe the same partition.
    pub fn from_index(index: &PeerIndex) -> Self {
        let clusters = index
            .clusters
            .iter()
            .map(|cluster| {
                let members: Vec<&SparseVec> = cluster.raw_docs.iter().collect();
                mean_present_weights(&members)
            })
            .collect();
        IsClusterDescriptor {
            version: DESCRIPTOR_VERSION,
            peer_id: index.peer_id.clone(),
            clusters,
        }
    }

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
            cluster
                .weights
                .validate()
                .map_err(|e| Error::Descriptor(format!("cluster {cid} weights: {e}")))?;
            if cluster.terms.windows(2).any(|w| w[0] >= w[1]) {
                return Err(Error::Descriptor(format!(
                    "cluster {cid} term set is not strictly sorted"
                )));
            }
            if !cluster.weights.supported_by(&cluster.terms) {
                return Err(Error::Descriptor(format!(
                    "cluster {cid} weights escape the declared term set"
                )));
            }
        }
        Ok(())
    }
}

const NO_RHO: &[RhoEntry] = &[];

impl ClusterScoreView for IsClusterDescriptor {
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
        &self.clusters[c].weights
    }
    fn rho_list(&self, _c: usize) -> &[RhoEntry] {
        NO_RHO
    }
}

/// Peers ordered by `n * mu . q` descending, ties by peer id.
pub fn ggloss_rank(descriptors: &[GglossDescriptor], q: &SparseVec) -> Vec<(String, f64)> {
    let mut ranked: Vec<(String, f64)> =
        descriptors.iter().map(|d| (d.peer_id.clone(), d.score(q))).collect();
    ranked.sort_by(|a, b| {
        b.1.partial_cmp(&a.1).expect("scores are finite").then_with(|| a.0.cmp(&b.0))
    });
    ranked
}

/// Peers ordered by their top-h cluster-score sum, mirroring the
/// concept-space peer ranking so comparisons isolate the descriptors.
pub fn iscluster_rank(
    descriptors: &[IsClusterDescriptor],
    q: &SparseVec,
    h: usize,
) -> Vec<(String, f64)> {
    let mut ranked: Vec<(String, f64)> = descriptors
        .iter()
        .map(|d| (d.peer_id.clone(), crate::peer::peer_score(d, q, h).0))
        .collect();
    ranked.sort_by(|a, b| {
        b.1.partial_cmp(&a.1).expect("scores are finite").then_with(|| a.0.cmp(&b.0))
    });
    ranked
}

/// Pipeline variant keeping exactly `rank` dimensions in every cluster.
pub fn build_rank_variant(
    peer_id: &str,
    docs: &[WeightedDoc],
    k_clusters: usize,
    rank: usize,
    delta: f64,
    seed: u64,
) -> Result<PeerIndex> {
    PeerIndexBuilder::new(peer_id, docs, k_clusters, seed)?.build(
        TruncationMode::Rank(rank),
        delta,
        true,
    )
}

/// Pipeline variant with the similarity network disabled: related lists
/// stay empty and no scoring ever routes through another cluster.
pub fn build_no_relations_variant(
    peer_id: &str,
    docs: &[WeightedDoc],
    k_clusters: usize,
    epsilon: f64,
    seed: u64,
) -> Result<PeerIndex> {
    PeerIndexBuilder::new(peer_id, docs, k_clusters, seed)?.build(
        TruncationMode::Threshold(epsilon),
        0.0,
        false,
    )
}
