//! One peer's index: clustered documents, a truncated concept space per
//! cluster, the inter-cluster similarity network, and the related-cluster
//! lists that let a query term missing from one cluster be scored through
//! a related cluster's space.
//!
//! Query-time scoring lives in [`descriptor`] and is shared verbatim with
//! the broker side, so a published descriptor reproduces the peer's own
//! cluster scores exactly.

mod descriptor;
mod similarity;

pub use descriptor::{
    cluster_score, peer_score, rank_clusters, ClusterDescriptor, ClusterScoreView,
    PeerDescriptor, RhoEntry, DESCRIPTOR_VERSION,
};
pub use similarity::{
    build_network, matrix_correlation, refresh_network, s1_similarity, s2_similarity,
    shared_terms, PairSimilarity, Proximity, SimilarityNetwork,
};

use std::collections::HashMap;

use serde::{Deserialize, Serialize};

use crate::clustering::{assign_to_nearest, kmeans, Clustering, DEFAULT_MAX_ITERS};
use crate::corpus::{Query, WeightedDoc};
use crate::error::{Error, Result};
use crate::linalg::{
    svd, truncate_by_rank, truncate_by_threshold, DenseMatrix, LsiSpace, SparseVec, SvdFactors,
    TermId,
};

/// How each cluster's singular spectrum is cut.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "mode", content = "value", rename_all = "snake_case")]
pub enum TruncationMode {
    /// Keep every dimension with a singular value >= the threshold.
    Threshold(f64),
    /// Keep exactly this many dimensions in every cluster.
    Rank(usize),
}

/// Build-time parameters, kept on the index so updates reuse them.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PeerConfig {
    /// Number of clusters actually built (requested count capped at the
    /// document count).
    pub clusters: usize,
    pub truncation: TruncationMode,
    /// Similarity above which another cluster enters the related list.
    pub delta: f64,
    /// When false the similarity network is left empty, so no scoring or
    /// retrieval ever routes through another cluster.
    pub relations: bool,
    pub seed: u64,
}

/// One cluster: its vocabulary, concept space, and member documents.
///
/// All vectors are indexed by global term id; a cluster's vectors are zero
/// outside its own vocabulary. Row `r` of the concept space corresponds to
/// `term_rows[r]`.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ClusterIndex {
    pub id: usize,
    /// Sorted global ids of terms with nonzero weight in some member.
    pub term_rows: Vec<TermId>,
    /// Truncated concept space over `term_rows`.
    pub lsi: LsiSpace,
    pub doc_ids: Vec<String>,
    /// Member vectors projected into the concept space.
    pub doc_vectors: Vec<SparseVec>,
    /// Unit-normalized member vectors as indexed, kept for rebuilds.
    pub raw_docs: Vec<SparseVec>,
    /// Mean of `doc_vectors`.
    pub centroid: SparseVec,
    /// Members present at the last (re)build.
    pub original_count: usize,
    /// Members folded in since the last (re)build.
    pub folded_count: usize,
}

impl ClusterIndex {
    pub fn n_docs(&self) -> usize {
        self.doc_ids.len()
    }

    /// Concept-space row of a global term id, when the cluster has it.
    pub fn local_row(&self, term: TermId) -> Option<usize> {
        self.term_rows.binary_search(&term).ok()
    }

    /// Projects a globally-indexed vector through this cluster's space:
    /// restrict to the cluster vocabulary, apply `U' U'^T`, re-embed.
    pub fn project_through(&self, v: &SparseVec) -> SparseVec {
        project_into(&self.lsi, &self.term_rows, v)
    }

    /// Column of this cluster's projector `B = U' U'^T` for a global term,
    /// re-embedded into global ids. Empty when the term is not in the
    /// cluster's vocabulary.
    pub fn projector_column_global(&self, term: TermId) -> SparseVec {
        let row = match self.local_row(term) {
            None => return SparseVec::empty(),
            Some(r) => r,
        };
        let column = self.lsi.projector_column(row);
        let entries: Vec<(TermId, f64)> = column
            .iter()
            .enumerate()
            .filter(|&(_, &v)| v != 0.0)
            .map(|(r, &v)| (self.term_rows[r], v))
            .collect();
        SparseVec::new(entries).expect("term rows are sorted")
    }
}

fn project_into(lsi: &LsiSpace, term_rows: &[TermId], v: &SparseVec) -> SparseVec {
    let mut local = Vec::new();
    for (t, w) in v.iter() {
        if let Ok(r) = term_rows.binary_search(&t) {
            local.push((r as TermId, w));
        }
    }
    let local = SparseVec::new(local).expect("local rows ascend with sorted term rows");
    let projected = lsi.project(&local).expect("local rows are inside the space");
    let entries: Vec<(TermId, f64)> = projected
        .iter()
        .map(|(r, w)| (term_rows[r as usize], w))
        .collect();
    SparseVec::new(entries).expect("term rows are sorted")
}

/// Shared term set of a document group: every term with nonzero weight in
/// some member, sorted.
fn group_term_set(docs: &[SparseVec]) -> Vec<TermId> {
    let mut terms: Vec<TermId> = docs.iter().flat_map(|d| d.indices()).collect();
    terms.sort_unstable();
    terms.dedup();
    terms
}

fn group_matrix(term_rows: &[TermId], docs: &[SparseVec]) -> Option<DenseMatrix> {
    if term_rows.is_empty() {
        return None;
    }
    let mut m = DenseMatrix::zeros(term_rows.len(), docs.len()).expect("both dims >= 1");
    for (j, d) in docs.iter().enumerate() {
        for (t, w) in d.iter() {
            let r = term_rows.binary_search(&t).expect("term set covers members");
            m.set(r, j, w);
        }
    }
    Some(m)
}

fn truncate(
    factors: Option<&SvdFactors>,
    rows: usize,
    mode: &TruncationMode,
) -> Result<LsiSpace> {
    match factors {
        None => match mode {
            TruncationMode::Threshold(_) => Ok(LsiSpace::degenerate(rows)),
            TruncationMode::Rank(k) => Err(Error::Parameter(format!(
                "rank-{k} truncation infeasible for a cluster with no terms"
            ))),
        },
        Some(f) => match mode {
            TruncationMode::Threshold(e) => truncate_by_threshold(f, *e),
            TruncationMode::Rank(k) => truncate_by_rank(f, *k),
        },
    }
}

/// Projects members, takes the centroid, and assembles the cluster record.
fn assemble_cluster(
    id: usize,
    doc_ids: Vec<String>,
    raw_docs: Vec<SparseVec>,
    term_rows: Vec<TermId>,
    lsi: LsiSpace,
) -> ClusterIndex {
    let doc_vectors: Vec<SparseVec> = raw_docs
        .iter()
        .map(|d| project_into(&lsi, &term_rows, d))
        .collect();
    let n = doc_vectors.len();
    let mut sum = SparseVec::empty();
    for d in &doc_vectors {
        sum = sum.add_scaled(d, 1.0);
    }
    let centroid = sum.scale(1.0 / n as f64);
    ClusterIndex {
        id,
        term_rows,
        lsi,
        doc_ids,
        doc_vectors,
        raw_docs,
        centroid,
        original_count: n,
        folded_count: 0,
    }
}

fn build_cluster_from(
    id: usize,
    doc_ids: Vec<String>,
    raw_docs: Vec<SparseVec>,
    mode: &TruncationMode,
) -> Result<ClusterIndex> {
    let term_rows = group_term_set(&raw_docs);
    let factors = match group_matrix(&term_rows, &raw_docs) {
        None => None,
        Some(m) => Some(svd(&m)?),
    };
    let lsi = truncate(factors.as_ref(), term_rows.len(), mode)?;
    Ok(assemble_cluster(id, doc_ids, raw_docs, term_rows, lsi))
}

/// Related clusters per cluster: every other cluster with similarity
/// strictly above `delta`, ordered by decreasing similarity, ties to the
/// lower id.
fn related_lists(network: &SimilarityNetwork, delta: f64) -> Vec<Vec<usize>> {
    let k = network.cluster_count();
    (0..k)
        .map(|i| {
            let mut entries: Vec<(usize, f64)> = (0..k)
                .filter(|&j| j != i)
                .map(|j| (j, network.similarity(i, j)))
                .filter(|&(_, s)| s > delta)
                .collect();
            entries.sort_by(|a, b| {
                b.1.partial_cmp(&a.1).expect("similarities are finite").then(a.0.cmp(&b.0))
            });
            entries.into_iter().map(|(j, _)| j).collect()
        })
        .collect()
}

fn compute_rho_for(clusters: &[ClusterIndex], i: usize, related: &[usize]) -> Vec<RhoEntry> {
    related
        .iter()
        .map(|&m| RhoEntry {
            source: m,
            vector: clusters[m].project_through(&clusters[i].centroid),
        })
        .collect()
}

/// Clusters documents once and caches every cluster's full factorization,
/// so indexes for several truncation settings can be materialized without
/// repeating the expensive work.
#[derive(Debug, Clone)]
pub struct PeerIndexBuilder {
    peer_id: String,
    seed: u64,
    docs: Vec<WeightedDoc>,
    clustering: Clustering,
    members: Vec<Vec<usize>>,
    term_sets: Vec<Vec<TermId>>,
    factors: Vec<Option<SvdFactors>>,
}

impl PeerIndexBuilder {
    /// Normalizes, clusters, and factorizes. A cluster count above the
    /// document count is capped at it.
    pub fn new(peer_id: &str, docs: &[WeightedDoc], clusters: usize, seed: u64) -> Result<Self> {
        if docs.is_empty() {
            return Err(Error::Parameter(format!("peer {peer_id} has no documents")));
        }
        if clusters == 0 {
            return Err(Error::Parameter("cluster count must be >= 1".into()));
        }
        let normalized: Vec<WeightedDoc> = docs
            .iter()
            .map(|d| WeightedDoc { id: d.id.clone(), weights: d.weights.normalized() })
            .collect();
        let k = clusters.min(normalized.len());
        let clustering = kmeans(&normalized, k, seed, DEFAULT_MAX_ITERS)?;
        let mut members: Vec<Vec<usize>> = vec![Vec::new(); k];
        for (pos, &c) in clustering.assignment.iter().enumerate() {
            members[c].push(pos);
        }
        let mut term_sets = Vec::with_capacity(k);
        let mut factors = Vec::with_capacity(k);
        for group in &members {
            let raws: Vec<SparseVec> =
                group.iter().map(|&p| normalized[p].weights.clone()).collect();
            let terms = group_term_set(&raws);
            let f = match group_matrix(&terms, &raws) {
                None => None,
                Some(m) => Some(svd(&m)?),
            };
            term_sets.push(terms);
            factors.push(f);
        }
        Ok(PeerIndexBuilder {
            peer_id: peer_id.into(),
            seed,
            docs: normalized,
            clustering,
            members,
            term_sets,
            factors,
        })
    }

    pub fn cluster_count(&self) -> usize {
        self.members.len()
    }

    /// Largest k for which every cluster supports a rank-k cut; 0 when some
    /// cluster has an empty vocabulary.
    pub fn max_uniform_rank(&self) -> usize {
        self.factors
            .iter()
            .map(|f| f.as_ref().map_or(0, |f| f.rank()))
            .min()
            .unwrap_or(0)
    }

    /// Materializes an index for one truncation setting.
    pub fn build(
        &self,
        truncation: TruncationMode,
        delta: f64,
        relations: bool,
    ) -> Result<PeerIndex> {
        if !(0.0..1.0).contains(&delta) {
            return Err(Error::Parameter(format!(
                "related-cluster threshold must be in [0, 1), got {delta}"
            )));
        }
        let k = self.members.len();
        let mut clusters = Vec::with_capacity(k);
        for cid in 0..k {
            let doc_ids: Vec<String> =
                self.members[cid].iter().map(|&p| self.docs[p].id.clone()).collect();
            let raws: Vec<SparseVec> =
                self.members[cid].iter().map(|&p| self.docs[p].weights.clone()).collect();
            let lsi = truncate(self.factors[cid].as_ref(), self.term_sets[cid].len(), &truncation)?;
            clusters.push(assemble_cluster(
                cid,
                doc_ids,
                raws,
                self.term_sets[cid].clone(),
                lsi,
            ));
        }
        let network = if relations {
            build_network(&clusters)
        } else {
            SimilarityNetwork::disconnected(k)
        };
        let related = related_lists(&network, delta);
        let rho: Vec<Vec<RhoEntry>> = (0..k)
            .map(|i| compute_rho_for(&clusters, i, &related[i]))
            .collect();
        Ok(PeerIndex {
            peer_id: self.peer_id.clone(),
            config: PeerConfig {
                clusters: k,
                truncation,
                delta,
                relations,
                seed: self.seed,
            },
            clustering: self.clustering.clone(),
            clusters,
            network,
            related,
            rho,
            descriptor_stale: true,
        })
    }
}

/// Builds a peer index with threshold truncation and relations enabled.
pub fn build_index(
    peer_id: &str,
    docs: &[WeightedDoc],
    k_clusters: usize,
    epsilon: f64,
    delta: f64,
    seed: u64,
) -> Result<PeerIndex> {
    PeerIndexBuilder::new(peer_id, docs, k_clusters, seed)?.build(
        TruncationMode::Threshold(epsilon),
        delta,
        true,
    )
}

/// A retrieved document with its score and owning peer.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScoredDoc {
    pub doc_id: String,
    pub peer_id: String,
    pub score: f64,
}

/// Orders results by score descending, ties by doc id ascending.
pub fn sort_by_score(results: &mut [ScoredDoc]) {
    results.sort_by(|a, b| {
        b.score
            .partial_cmp(&a.score)
            .expect("scores are finite")
            .then_with(|| a.doc_id.cmp(&b.doc_id))
    });
}

/// Counters from one fold-in call.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct FoldInStats {
    pub folded: usize,
    /// Documents whose weight vector was all zero (assigned to cluster 0).
    pub zero_vectors: usize,
    /// Non-zero documents whose projection came out exactly zero.
    pub zero_projections: usize,
    /// Documents folded into each cluster by this call.
    pub per_cluster: Vec<usize>,
}

/// Which clusters a rebuild pass refactorized.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct RebuildReport {
    pub rebuilt: Vec<usize>,
}

/// A peer's complete local index.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct PeerIndex {
    pub peer_id: String,
    pub config: PeerConfig,
    pub clustering: Clustering,
    pub clusters: Vec<ClusterIndex>,
    pub network: SimilarityNetwork,
    /// Related clusters per cluster, decreasing similarity.
    pub related: Vec<Vec<usize>>,
    /// Projected centroids backing both local scoring and descriptors.
    rho: Vec<Vec<RhoEntry>>,
    /// Set when the index changed since the last descriptor was produced.
    pub descriptor_stale: bool,
}

impl ClusterScoreView for PeerIndex {
    fn cluster_count(&self) -> usize {
        self.clusters.len()
    }
    fn doc_count(&self, c: usize) -> u64 {
        self.clusters[c].doc_ids.len() as u64
    }
    fn terms(&self, c: usize) -> &[TermId] {
        &self.clusters[c].term_rows
    }
    fn centroid(&self, c: usize) -> &SparseVec {
        &self.clusters[c].centroid
    }
    fn rho_list(&self, c: usize) -> &[RhoEntry] {
        &self.rho[c]
    }
}

impl PeerIndex {
    /// Relevance of one cluster to a query; the same computation the broker
    /// runs from this peer's descriptor.
    pub fn cluster_query_score(&self, c: usize, q: &Query) -> f64 {
        cluster_score(self, c, &q.weights)
    }

    /// Peer-level relevance: sum of the top `h` cluster scores, with the
    /// contributing cluster ids.
    pub fn selection_score(&self, q: &Query, h: usize) -> (f64, Vec<usize>) {
        peer_score(self, &q.weights, h)
    }

    /// Scores member documents of the listed clusters against the query and
    /// returns the best `top_n`, ties broken by doc id.
    ///
    /// A query term inside a cluster's vocabulary scores against the
    /// document's concept vector directly; a term outside it is routed
    /// through the first related cluster containing the term, scoring the
    /// document vector against that cluster's projector column.
    pub fn local_retrieve(
        &self,
        q: &Query,
        cluster_ids: &[usize],
        top_n: usize,
    ) -> Result<Vec<ScoredDoc>> {
        if top_n == 0 {
            return Err(Error::Parameter("top_n must be >= 1".into()));
        }
        let mut ids: Vec<usize> = cluster_ids.to_vec();
        ids.sort_unstable();
        ids.dedup();
        if let Some(&bad) = ids.iter().find(|&&c| c >= self.clusters.len()) {
            return Err(Error::Parameter(format!(
                "cluster id {bad} out of range (peer has {})",
                self.clusters.len()
            )));
        }
        // Projector columns of related clusters, shared across the docs of
        // this query.
        let mut columns: HashMap<(usize, TermId), SparseVec> = HashMap::new();
        let mut results = Vec::new();
        for &cid in &ids {
            let cluster = &self.clusters[cid];
            for (j, d) in cluster.doc_vectors.iter().enumerate() {
                let mut score = 0.0;
                for (t, q_t) in q.weights.iter() {
                    if cluster.term_rows.binary_search(&t).is_ok() {
                        score += d.get(t) * q_t;
                    } else {
                        for &m in &self.related[cid] {
                            if self.clusters[m].term_rows.binary_search(&t).is_ok() {
                                let column = columns
                                    .entry((m, t))
                                    .or_insert_with(|| {
                                        self.clusters[m].projector_column_global(t)
                                    });
                                score += d.dot(column) * q_t;
                                break;
                            }
                        }
                    }
                }
                results.push(ScoredDoc {
                    doc_id: cluster.doc_ids[j].clone(),
                    peer_id: self.peer_id.clone(),
                    score,
                });
            }
        }
        sort_by_score(&mut results);
        results.truncate(top_n);
        Ok(results)
    }

    /// Assigns each new document to its nearest cluster and projects it
    /// into that cluster's existing concept space; counts, centroids, and
    /// projected centroids update incrementally, the spaces themselves do
    /// not change until [`PeerIndex::maybe_rebuild`].
    pub fn fold_in(&mut self, new_docs: &[WeightedDoc]) -> FoldInStats {
        let mut stats = FoldInStats {
            per_cluster: vec![0; self.clusters.len()],
            ..FoldInStats::default()
        };
        for doc in new_docs {
            let normalized = doc.weights.normalized();
            let assignment = assign_to_nearest(&normalized, &self.clustering);
            if assignment.zero_vector {
                stats.zero_vectors += 1;
            }
            let c = assignment.cluster;
            let projected = self.clusters[c].project_through(&normalized);
            if projected.is_empty() && !assignment.zero_vector {
                stats.zero_projections += 1;
            }
            let n = self.clusters[c].doc_ids.len() as f64;
            let keep = n / (n + 1.0);
            let add = 1.0 / (n + 1.0);
            // rho_im = B_m * mu_i is linear in mu_i, so it admits the same
            // incremental update as the centroid itself.
            let routed: Vec<SparseVec> = self.rho[c]
                .iter()
                .map(|e| self.clusters[e.source].project_through(&projected))
                .collect();
            for (entry, through) in self.rho[c].iter_mut().zip(routed) {
                entry.vector = entry.vector.scale(keep).add_scaled(&through, add);
            }
            let cluster = &mut self.clusters[c];
            cluster.centroid = cluster.centroid.scale(keep).add_scaled(&projected, add);
            self.clustering.centroids[c] =
                self.clustering.centroids[c].scale(keep).add_scaled(&normalized, add);
            cluster.doc_ids.push(doc.id.clone());
            cluster.doc_vectors.push(projected);
            cluster.raw_docs.push(normalized);
            cluster.folded_count += 1;
            stats.per_cluster[c] += 1;
            stats.folded += 1;
        }
        if stats.folded > 0 {
            self.descriptor_stale = true;
        }
        stats
    }

    /// Refactorizes every cluster whose folded share exceeds the fraction
    /// (strictly), keeping the clustering itself. Network pairs touching a
    /// rebuilt cluster are recomputed; related lists and projected
    /// centroids refresh only where those changes reach.
    pub fn maybe_rebuild(&mut self, rebuild_fraction: f64) -> Result<RebuildReport> {
        if !(rebuild_fraction > 0.0) {
            return Err(Error::Parameter(format!(
                "rebuild fraction must be > 0, got {rebuild_fraction}"
            )));
        }
        let rebuilt: Vec<usize> = (0..self.clusters.len())
            .filter(|&c| {
                let cl = &self.clusters[c];
                cl.folded_count as f64 / cl.original_count as f64 > rebuild_fraction
            })
            .collect();
        if rebuilt.is_empty() {
            return Ok(RebuildReport::default());
        }
        for &c in &rebuilt {
            let cluster = &self.clusters[c];
            let rebuilt_cluster = build_cluster_from(
                c,
                cluster.doc_ids.clone(),
                cluster.raw_docs.clone(),
                &self.config.truncation,
            )?;
            let n = rebuilt_cluster.raw_docs.len() as f64;
            let mut raw_sum = SparseVec::empty();
            for d in &rebuilt_cluster.raw_docs {
                raw_sum = raw_sum.add_scaled(d, 1.0);
            }
            self.clustering.centroids[c] = raw_sum.scale(1.0 / n);
            self.clusters[c] = rebuilt_cluster;
        }
        if self.config.relations {
            refresh_network(&mut self.network, &self.clusters, &rebuilt);
        }
        let old_related = std::mem::take(&mut self.related);
        self.related = related_lists(&self.network, self.config.delta);
        for i in 0..self.clusters.len() {
            let touched = rebuilt.contains(&i)
                || self.related[i] != old_related[i]
                || self.related[i].iter().any(|m| rebuilt.contains(m));
            if touched {
                self.rho[i] = compute_rho_for(&self.clusters, i, &self.related[i]);
            }
        }
        self.descriptor_stale = true;
        Ok(RebuildReport { rebuilt })
    }

    /// Produces the publishable descriptor and clears the staleness flag.
    pub fn make_descriptor(&mut self) -> PeerDescriptor {
        self.descriptor_stale = false;
        PeerDescriptor {
            version: DESCRIPTOR_VERSION,
            peer_id: self.peer_id.clone(),
            clusters: self
                .clusters
                .iter()
                .enumerate()
                .map(|(c, cl)| ClusterDescriptor {
                    n: cl.doc_ids.len() as u64,
                    terms: cl.term_rows.clone(),
                    mu: cl.centroid.clone(),
                    rho: self.rho[c].clone(),
                })
                .collect(),
        }
    }
}
