//! Retrieval-quality metrics, parameter sweeps with CSV and JSON reports,
//! pairwise method comparison tables, and the incremental-update
//! degradation study.
//!
//! A sweep crosses method x cluster count x truncation x h x cast x seed.
//! Each cell builds a fresh federation (sharing clustering and SVD work
//! where only the truncation differs), runs every query, and records
//! per-query precision, average precision, and selected-peer recall.
//! Cells are independent and run on a worker pool; report assembly sorts
//! them into a canonical order so repeated runs emit identical bytes.

use std::collections::{BTreeMap, HashMap, HashSet};
use std::fmt;
use std::str::FromStr;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::clustering::fnv1a;
use crate::corpus::{
    generate_synthetic, log_entropy_weights, vectorize_query, Qrels, Query, RawDoc, RawQuery,
    SyntheticParams, WeightedDoc,
};
use crate::error::{Error, Result};
use crate::federation::{Federation, Method, SelectionResult, SimulatedPeer, Strategy};
use crate::peer::{PeerIndexBuilder, ScoredDoc, TruncationMode};

/// Fraction of the top `n` results that are relevant. Lists shorter than
/// `n` count as padded with irrelevant entries.
pub fn precision_at(results: &[ScoredDoc], relevant: &HashSet<&str>, n: usize) -> f64 {
    assert!(n >= 1, "precision cutoff must be >= 1");
    let hits = results
        .iter()
        .take(n)
        .filter(|r| relevant.contains(r.doc_id.as_str()))
        .count();
    hits as f64 / n as f64
}

/// Mean of the precision values at every cutoff 1..=n.
pub fn avg_precision_at(results: &[ScoredDoc], relevant: &HashSet<&str>, n: usize) -> f64 {
    assert!(n >= 1, "precision cutoff must be >= 1");
    let mut hits = 0usize;
    let mut acc = 0.0;
    for i in 1..=n {
        if let Some(r) = results.get(i - 1) {
            if relevant.contains(r.doc_id.as_str()) {
                hits += 1;
            }
        }
        acc += hits as f64 / i as f64;
    }
    acc / n as f64
}

/// Fraction of the query's relevant documents hosted by the selected
/// peers. Queries with no relevant documents have no defined recall and
/// return `None`; callers exclude them from averages but report the count.
pub fn selected_peer_recall(
    selection: &SelectionResult,
    relevant: &HashSet<&str>,
    doc_peer: &HashMap<String, String>,
) -> Option<f64> {
    if relevant.is_empty() {
        return None;
    }
    let chosen: HashSet<&str> = selection.peers.iter().map(|p| p.peer_id.as_str()).collect();
    let hits = relevant
        .iter()
        .filter(|d| doc_peer.get(**d).is_some_and(|p| chosen.contains(p.as_str())))
        .count();
    Some(hits as f64 / relevant.len() as f64)
}

/// A method the sweep can run end to end. The no-relations variant scores
/// and retrieves exactly like the concept-space method but is built with
/// an empty cluster network, so nothing routes across clusters.
#[derive(
    Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize,
)]
#[serde(rename_all = "snake_case")]
pub enum SweepMethod {
    Cdlsi,
    CdlsiNr,
    Ggloss,
    IsCluster,
    Cm1,
    Cm2,
}

impl SweepMethod {
    pub const ALL: [SweepMethod; 6] = [
        SweepMethod::Cdlsi,
        SweepMethod::CdlsiNr,
        SweepMethod::Ggloss,
        SweepMethod::IsCluster,
        SweepMethod::Cm1,
        SweepMethod::Cm2,
    ];

    pub fn label(self) -> &'static str {
        match self {
            SweepMethod::Cdlsi => "cdlsi",
            SweepMethod::CdlsiNr => "cdlsi_nr",
            SweepMethod::Ggloss => "ggloss",
            SweepMethod::IsCluster => "is_cluster",
            SweepMethod::Cm1 => "cm1",
            SweepMethod::Cm2 => "cm2",
        }
    }

    /// The federation method this sweep method answers queries with.
    pub fn query_method(self) -> Method {
        match self {
            SweepMethod::Cdlsi | SweepMethod::CdlsiNr => Method::Cdlsi,
            SweepMethod::Ggloss => Method::Ggloss,
            SweepMethod::IsCluster => Method::IsCluster,
            SweepMethod::Cm1 => Method::Cm1,
            SweepMethod::Cm2 => Method::Cm2,
        }
    }

    /// Whether this method queries indexes built with the cluster network.
    fn uses_relations(self) -> bool {
        !matches!(self, SweepMethod::CdlsiNr)
    }
}

impl fmt::Display for SweepMethod {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.label())
    }
}

impl FromStr for SweepMethod {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        SweepMethod::ALL
            .into_iter()
            .find(|m| m.label() == s)
            .ok_or_else(|| {
                Error::Parameter(format!(
                    "unknown method {s:?}; expected one of cdlsi, cdlsi_nr, ggloss, \
                     is_cluster, cm1, cm2"
                ))
            })
    }
}

/// One point of the sweep grid.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Setting {
    pub method: SweepMethod,
    pub clusters: usize,
    pub truncation: TruncationMode,
    pub h: usize,
    pub delta: f64,
    pub cast: usize,
    pub top_n: usize,
    pub seed: u64,
}

impl Setting {
    /// Canonical one-line form; its hash keys the aggregate report.
    pub fn canonical(&self) -> String {
        let (eps, rank) = trunc_fields(&self.truncation);
        let eps = if eps.is_empty() { "-".into() } else { eps };
        let rank = if rank.is_empty() { "-".into() } else { rank };
        format!(
            "method={} K={} epsilon={} k={} h={} delta={} G={} N={} seed={}",
            self.method, self.clusters, eps, rank, self.h, self.delta, self.cast,
            self.top_n, self.seed
        )
    }

    pub fn hash_key(&self) -> String {
        format!("{:016x}", fnv1a(self.canonical().as_bytes()))
    }

    fn order_key(&self) -> (SweepMethod, usize, (u8, u64), usize, usize, u64) {
        (
            self.method,
            self.clusters,
            trunc_order(&self.truncation),
            self.h,
            self.cast,
            self.seed,
        )
    }
}

fn trunc_fields(t: &TruncationMode) -> (String, String) {
    match t {
        TruncationMode::Threshold(e) => (format!("{e}"), String::new()),
        TruncationMode::Rank(k) => (String::new(), format!("{k}")),
    }
}

fn trunc_order(t: &TruncationMode) -> (u8, u64) {
    match t {
        TruncationMode::Threshold(e) => (0, e.to_bits()),
        TruncationMode::Rank(k) => (1, *k as u64),
    }
}

/// Metrics for one query under one setting.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct QueryMetrics {
    pub query_id: String,
    pub p_at_n: f64,
    pub ap_at_n: f64,
    /// `None` for queries with no relevant documents.
    pub recall: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub enum CellOutcome {
    Ran(Vec<QueryMetrics>),
    /// The setting could not be built (for example a rank cut larger than
    /// some cluster supports); the reason is recorded verbatim.
    Skipped(String),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepCell {
    pub setting: Setting,
    pub outcome: CellOutcome,
}

/// The sweep grid. Every list is crossed with every other; single-value
/// lists pin a parameter.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepConfig {
    pub methods: Vec<SweepMethod>,
    pub cluster_counts: Vec<usize>,
    pub truncations: Vec<TruncationMode>,
    pub h_values: Vec<usize>,
    pub casts: Vec<usize>,
    pub delta: f64,
    pub top_n: usize,
    pub seeds: Vec<u64>,
    pub peers: usize,
}

impl SweepConfig {
    fn validate(&self) -> Result<()> {
        fn no_dupes<T: PartialEq + fmt::Debug>(name: &str, xs: &[T]) -> Result<()> {
            if xs.is_empty() {
                return Err(Error::Parameter(format!("{name} grid is empty")));
            }
            for (i, x) in xs.iter().enumerate() {
                if xs[..i].contains(x) {
                    return Err(Error::Parameter(format!(
                        "{name} grid repeats the value {x:?}"
                    )));
                }
            }
            Ok(())
        }
        no_dupes("method", &self.methods)?;
        no_dupes("cluster count", &self.cluster_counts)?;
        no_dupes("truncation", &self.truncations)?;
        no_dupes("h", &self.h_values)?;
        no_dupes("cast", &self.casts)?;
        no_dupes("seed", &self.seeds)?;
        if self.cluster_counts.iter().any(|&k| k == 0) {
            return Err(Error::Parameter("cluster counts must be >= 1".into()));
        }
        for t in &self.truncations {
            match t {
                TruncationMode::Threshold(e) if !(e.is_finite() && *e >= 0.0) => {
                    return Err(Error::Parameter(format!(
                        "truncation threshold must be finite and >= 0, got {e}"
                    )));
                }
                TruncationMode::Rank(0) => {
                    return Err(Error::Parameter("rank cut must be >= 1".into()));
                }
                _ => {}
            }
        }
        if self.h_values.iter().any(|&h| h == 0) {
            return Err(Error::Parameter("h values must be >= 1".into()));
        }
        if self.casts.iter().any(|&g| g == 0) {
            return Err(Error::Parameter("cast sizes must be >= 1".into()));
        }
        if self.top_n == 0 {
            return Err(Error::Parameter("top_n must be >= 1".into()));
        }
        if self.peers == 0 {
            return Err(Error::Parameter("peer count must be >= 1".into()));
        }
        if !(0.0..1.0).contains(&self.delta) {
            return Err(Error::Parameter(format!(
                "related-cluster threshold must be in [0, 1), got {}",
                self.delta
            )));
        }
        Ok(())
    }
}

/// A corpus with queries and judgments, ready to sweep.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepData {
    pub docs: Vec<RawDoc>,
    pub queries: Vec<RawQuery>,
    pub qrels: Qrels,
}

/// Where sweep data comes from: regenerated per grid seed, or fixed (the
/// grid seed then only drives clustering).
#[derive(Debug, Clone)]
pub enum SweepCorpus {
    Synthetic(SyntheticParams),
    Fixed(SweepData),
}

impl SweepCorpus {
    fn materialize(&self, seed: u64) -> Result<SweepData> {
        match self {
            SweepCorpus::Synthetic(params) => {
                let params = SyntheticParams { seed, ..params.clone() };
                let (docs, queries, qrels) = generate_synthetic(&params)?;
                Ok(SweepData { docs, queries, qrels })
            }
            SweepCorpus::Fixed(data) => Ok(data.clone()),
        }
    }
}

/// Deals documents to peers in position order: document i goes to peer
/// i mod peers.
pub fn assign_round_robin(docs: &[WeightedDoc], peers: usize) -> Result<Vec<Vec<WeightedDoc>>> {
    if peers == 0 {
        return Err(Error::Parameter("peer count must be >= 1".into()));
    }
    if peers > docs.len() {
        return Err(Error::Config(format!(
            "{peers} peers but only {} documents to assign",
            docs.len()
        )));
    }
    let mut shares: Vec<Vec<WeightedDoc>> = vec![Vec::new(); peers];
    for (i, doc) in docs.iter().enumerate() {
        shares[i % peers].push(doc.clone());
    }
    Ok(shares)
}

pub fn peer_name(index: usize) -> String {
    format!("peer{index:03}")
}

/// Stable per-lane seed derivation, so each peer clusters differently but
/// reproducibly under one run seed.
pub fn mix_seed(seed: u64, lane: u64) -> u64 {
    let mut z = seed ^ lane.wrapping_mul(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Runs the full grid. Cells sharing a seed and cluster count reuse one
/// clustering and SVD pass per peer; only the truncation step re-runs.
/// The returned cells are in canonical order regardless of scheduling.
pub fn run_sweep(corpus: &SweepCorpus, config: &SweepConfig) -> Result<Vec<SweepCell>> {
    config.validate()?;
    let mut jobs = Vec::new();
    for &seed in &config.seeds {
        for &clusters in &config.cluster_counts {
            jobs.push((seed, clusters));
        }
    }
    let groups: Result<Vec<Vec<SweepCell>>> = jobs
        .par_iter()
        .map(|&(seed, clusters)| sweep_group(corpus, config, seed, clusters))
        .collect();
    let mut cells: Vec<SweepCell> = groups?.into_iter().flatten().collect();
    cells.sort_by(|a, b| a.setting.order_key().cmp(&b.setting.order_key()));
    Ok(cells)
}

/// Everything derived from one (seed, cluster count) pair.
fn sweep_group(
    corpus: &SweepCorpus,
    config: &SweepConfig,
    seed: u64,
    clusters: usize,
) -> Result<Vec<SweepCell>> {
    let data = corpus.materialize(seed)?;
    let weighted = log_entropy_weights(&data.docs)?;
    let queries: Vec<Query> = data
        .queries
        .iter()
        .map(|rq| vectorize_query(&rq.id, &rq.text, &weighted.dictionary, &weighted.global_factors))
        .collect();
    let shares = assign_round_robin(&weighted.docs, config.peers)?;
    let doc_peer = peer_of_each_doc(&shares);

    let builders: Vec<PeerIndexBuilder> = shares
        .iter()
        .enumerate()
        .map(|(i, docs)| {
            PeerIndexBuilder::new(&peer_name(i), docs, clusters, mix_seed(seed, i as u64))
        })
        .collect::<Result<_>>()?;

    let wants_relations = config.methods.iter().any(|m| m.uses_relations());
    let wants_nr = config.methods.iter().any(|m| !m.uses_relations());

    let mut cells = Vec::new();
    for truncation in &config.truncations {
        let with_relations = if wants_relations {
            Some(build_federation(&builders, truncation, config.delta, true)?)
        } else {
            None
        };
        let without_relations = if wants_nr {
            Some(build_federation(&builders, truncation, config.delta, false)?)
        } else {
            None
        };
        for &method in &config.methods {
            let federation = if method.uses_relations() {
                with_relations.as_ref().unwrap()
            } else {
                without_relations.as_ref().unwrap()
            };
            for &h in &config.h_values {
                for &cast in &config.casts {
                    let setting = Setting {
                        method,
                        clusters,
                        truncation: truncation.clone(),
                        h,
                        delta: config.delta,
                        cast,
                        top_n: config.top_n,
                        seed,
                    };
                    let outcome = match federation {
                        Ok(federation) => CellOutcome::Ran(run_queries(
                            federation,
                            method.query_method(),
                            &queries,
                            &data.qrels,
                            &doc_peer,
                            cast,
                            h,
                            config.top_n,
                        )?),
                        Err(reason) => CellOutcome::Skipped(reason.clone()),
                    };
                    cells.push(SweepCell { setting, outcome });
                }
            }
        }
    }
    Ok(cells)
}

fn peer_of_each_doc(shares: &[Vec<WeightedDoc>]) -> HashMap<String, String> {
    let mut map = HashMap::new();
    for (i, share) in shares.iter().enumerate() {
        for doc in share {
            map.insert(doc.id.clone(), peer_name(i));
        }
    }
    map
}

/// Builds and publishes a complete federation, or explains why it cannot
/// be built (an infeasible parameter combination, reported as a skip).
/// Genuine failures propagate as errors.
#[allow(clippy::type_complexity)]
fn build_federation(
    builders: &[PeerIndexBuilder],
    truncation: &TruncationMode,
    delta: f64,
    relations: bool,
) -> Result<std::result::Result<Federation, String>> {
    let mut federation = Federation::new();
    for builder in builders {
        match builder.build(truncation.clone(), delta, relations) {
            Ok(index) => federation.add_peer(SimulatedPeer::from_index(index))?,
            Err(Error::Parameter(msg)) => return Ok(Err(msg)),
            Err(e) => return Err(e),
        }
    }
    let strategies: &[Strategy] = if relations {
        &[Strategy::Cdlsi, Strategy::Ggloss, Strategy::IsCluster]
    } else {
        &[Strategy::Cdlsi]
    };
    federation.publish_all(strategies)?;
    Ok(Ok(federation))
}

#[allow(clippy::too_many_arguments)]
fn run_queries(
    federation: &Federation,
    method: Method,
    queries: &[Query],
    qrels: &Qrels,
    doc_peer: &HashMap<String, String>,
    cast: usize,
    h: usize,
    top_n: usize,
) -> Result<Vec<QueryMetrics>> {
    let mut rows = Vec::with_capacity(queries.len());
    for q in queries {
        let outcome = federation.query(method, q, cast, h, top_n)?;
        let relevant = qrels.relevant_docs(&q.id);
        rows.push(QueryMetrics {
            query_id: q.id.clone(),
            p_at_n: precision_at(&outcome.results, &relevant, top_n),
            ap_at_n: avg_precision_at(&outcome.results, &relevant, top_n),
            recall: selected_peer_recall(&outcome.selection, &relevant, doc_peer),
        });
    }
    Ok(rows)
}

/// The fixed per-query report header.
pub const CSV_COLUMNS: &str = "method,K,epsilon,k,h,delta,G,N,seed,query_id,p_at_n,ap_at_n,recall";

/// Writes one row per query per ran cell. Skipped cells appear only in
/// the aggregate report. The recall field is empty for queries with no
/// relevant documents.
pub fn write_csv<W: std::io::Write>(cells: &[SweepCell], out: W) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(CSV_COLUMNS.split(',')).map_err(csv_error)?;
    for cell in cells {
        let rows = match &cell.outcome {
            CellOutcome::Ran(rows) => rows,
            CellOutcome::Skipped(_) => continue,
        };
        let s = &cell.setting;
        let (eps, rank) = trunc_fields(&s.truncation);
        for r in rows {
            w.write_record([
                s.method.label(),
                &s.clusters.to_string(),
                &eps,
                &rank,
                &s.h.to_string(),
                &s.delta.to_string(),
                &s.cast.to_string(),
                &s.top_n.to_string(),
                &s.seed.to_string(),
                &r.query_id,
                &r.p_at_n.to_string(),
                &r.ap_at_n.to_string(),
                &r.recall.map(|x| x.to_string()).unwrap_or_default(),
            ])
            .map_err(csv_error)?;
        }
    }
    w.flush()?;
    Ok(())
}

fn csv_error(e: csv::Error) -> Error {
    Error::Config(format!("report write failed: {e}"))
}

/// Averages for one setting. Recall averages only queries that have
/// relevant documents; `zero_relevant` counts the excluded ones.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Aggregate {
    pub setting: String,
    pub method: String,
    pub clusters: usize,
    pub epsilon: Option<f64>,
    pub rank: Option<usize>,
    pub h: usize,
    pub delta: f64,
    pub cast: usize,
    pub top_n: usize,
    pub seed: u64,
    pub queries: usize,
    pub zero_relevant: usize,
    pub mean_p_at_n: Option<f64>,
    pub mean_ap_at_n: Option<f64>,
    pub mean_recall: Option<f64>,
    pub skipped: Option<String>,
}

/// Per-query rows reduced to per-setting means, keyed by the setting hash.
pub fn aggregates(cells: &[SweepCell]) -> BTreeMap<String, Aggregate> {
    let mut out = BTreeMap::new();
    for cell in cells {
        let s = &cell.setting;
        let (epsilon, rank) = match s.truncation {
            TruncationMode::Threshold(e) => (Some(e), None),
            TruncationMode::Rank(k) => (None, Some(k)),
        };
        let mut agg = Aggregate {
            setting: s.canonical(),
            method: s.method.label().to_string(),
            clusters: s.clusters,
            epsilon,
            rank,
            h: s.h,
            delta: s.delta,
            cast: s.cast,
            top_n: s.top_n,
            seed: s.seed,
            queries: 0,
            zero_relevant: 0,
            mean_p_at_n: None,
            mean_ap_at_n: None,
            mean_recall: None,
            skipped: None,
        };
        match &cell.outcome {
            CellOutcome::Skipped(reason) => agg.skipped = Some(reason.clone()),
            CellOutcome::Ran(rows) => {
                let (p, ap, recall, zero_relevant) = mean_metrics(rows);
                agg.queries = rows.len();
                agg.zero_relevant = zero_relevant;
                agg.mean_p_at_n = p;
                agg.mean_ap_at_n = ap;
                agg.mean_recall = recall;
            }
        }
        out.insert(s.hash_key(), agg);
    }
    out
}

/// Means over a cell's query rows: P, AP, recall (over queries that have
/// relevant documents), and the count of queries that have none.
pub fn mean_metrics(rows: &[QueryMetrics]) -> (Option<f64>, Option<f64>, Option<f64>, usize) {
    if rows.is_empty() {
        return (None, None, None, 0);
    }
    let n = rows.len() as f64;
    let p = rows.iter().map(|r| r.p_at_n).sum::<f64>() / n;
    let ap = rows.iter().map(|r| r.ap_at_n).sum::<f64>() / n;
    let recalls: Vec<f64> = rows.iter().filter_map(|r| r.recall).collect();
    let zero_relevant = rows.len() - recalls.len();
    let recall = if recalls.is_empty() {
        None
    } else {
        Some(recalls.iter().sum::<f64>() / recalls.len() as f64)
    };
    (Some(p), Some(ap), recall, zero_relevant)
}

pub fn aggregates_json(cells: &[SweepCell]) -> Result<String> {
    serde_json::to_string_pretty(&aggregates(cells))
        .map_err(|e| Error::Config(format!("report serialization failed: {e}")))
}

/// Head-to-head comparison of two methods by per-query selected-peer
/// recall (equivalently, by relevant documents reaching selected peers:
/// the denominator is fixed per query). One row per cast size.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CompRow {
    pub cast: usize,
    pub wins: f64,
    pub losses: f64,
    pub ties: f64,
    pub pairs: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CompTable {
    pub method_a: SweepMethod,
    pub method_b: SweepMethod,
    pub rows: Vec<CompRow>,
}

/// Pairs up cells from one sweep that differ only in method and compares
/// them query by query. Queries without relevant documents are excluded,
/// matching their exclusion from recall averages.
pub fn comp_table(cells: &[SweepCell], a: SweepMethod, b: SweepMethod) -> CompTable {
    type Key = (usize, (u8, u64), usize, usize, u64, String);
    let collect = |m: SweepMethod| -> HashMap<Key, f64> {
        let mut map = HashMap::new();
        for cell in cells.iter().filter(|c| c.setting.method == m) {
            if let CellOutcome::Ran(rows) = &cell.outcome {
                for r in rows {
                    if let Some(recall) = r.recall {
                        let s = &cell.setting;
                        map.insert(
                            (
                                s.clusters,
                                trunc_order(&s.truncation),
                                s.h,
                                s.cast,
                                s.seed,
                                r.query_id.clone(),
                            ),
                            recall,
                        );
                    }
                }
            }
        }
        map
    };
    let of_a = collect(a);
    let of_b = collect(b);
    let mut per_cast: BTreeMap<usize, (usize, usize, usize)> = BTreeMap::new();
    for (key, ra) in &of_a {
        if let Some(rb) = of_b.get(key) {
            let entry = per_cast.entry(key.3).or_default();
            if ra > rb {
                entry.0 += 1;
            } else if ra < rb {
                entry.1 += 1;
            } else {
                entry.2 += 1;
            }
        }
    }
    let rows = per_cast
        .into_iter()
        .map(|(cast, (w, l, t))| {
            let total = (w + l + t) as f64;
            CompRow {
                cast,
                wins: w as f64 / total,
                losses: l as f64 / total,
                ties: t as f64 / total,
                pairs: w + l + t,
            }
        })
        .collect();
    CompTable { method_a: a, method_b: b, rows }
}

/// Configuration of the incremental-update study.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct UpdateConfig {
    pub peers: usize,
    pub clusters: usize,
    pub epsilon: f64,
    pub delta: f64,
    pub h: usize,
    pub cast: usize,
    pub top_n: usize,
    pub seed: u64,
    /// Per-cluster folded/original fraction above which a rebuild fires.
    pub rebuild_fraction: f64,
    /// Fraction of each peer's documents indexed up front.
    pub initial_fraction: f64,
    /// Fraction of each peer's documents folded in per step.
    pub step_fraction: f64,
}

impl Default for UpdateConfig {
    fn default() -> Self {
        UpdateConfig {
            peers: 5,
            clusters: 4,
            epsilon: 0.0,
            delta: 0.05,
            h: 10,
            cast: 5,
            top_n: 10,
            seed: 7,
            rebuild_fraction: 0.2,
            initial_fraction: 0.70,
            step_fraction: 0.05,
        }
    }
}

/// Measurements taken after one step of the update protocol. Step 0 is
/// the initial partial index; later steps follow each fold-in batch.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct UpdateStep {
    pub step: usize,
    pub indexed_docs: usize,
    /// Clusters refactorized at this step (always 0 on the no-rebuild arm).
    pub rebuilt_clusters: usize,
    pub mean_p_at_n: Option<f64>,
    pub mean_ap_at_n: Option<f64>,
    pub mean_recall: Option<f64>,
}

/// Both arms of the study over the same document schedule: one folds only,
/// one also offers each peer a rebuild after every step.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct UpdateStudy {
    pub steps: usize,
    pub without_rebuild: Vec<UpdateStep>,
    pub with_rebuild: Vec<UpdateStep>,
}

/// Runs the update protocol: each peer indexes the leading slice of its
/// documents, then folds in the rest in equal steps, re-measured after
/// every step with and without the rebuild trigger armed.
pub fn run_update_study(data: &SweepData, config: &UpdateConfig) -> Result<UpdateStudy> {
    if !(0.0 < config.initial_fraction && config.initial_fraction <= 1.0) {
        return Err(Error::Parameter(format!(
            "initial fraction must be in (0, 1], got {}",
            config.initial_fraction
        )));
    }
    if !(0.0 < config.step_fraction && config.step_fraction <= 1.0) {
        return Err(Error::Parameter(format!(
            "step fraction must be in (0, 1], got {}",
            config.step_fraction
        )));
    }
    if !(config.rebuild_fraction > 0.0 && config.rebuild_fraction.is_finite()) {
        return Err(Error::Parameter(format!(
            "rebuild fraction must be positive, got {}",
            config.rebuild_fraction
        )));
    }
    let weighted = log_entropy_weights(&data.docs)?;
    let queries: Vec<Query> = data
        .queries
        .iter()
        .map(|rq| vectorize_query(&rq.id, &rq.text, &weighted.dictionary, &weighted.global_factors))
        .collect();
    let shares = assign_round_robin(&weighted.docs, config.peers)?;

    // Shave a hair off before rounding up so fractions that divide evenly
    // do not gain a step to float dust (0.3 / 0.05 lands above 6.0).
    let steps = (((1.0 - config.initial_fraction) / config.step_fraction) - 1e-9)
        .ceil()
        .max(0.0) as usize;

    // Document counts per peer at each step boundary.
    let boundaries: Vec<Vec<usize>> = shares
        .iter()
        .map(|share| {
            let n = share.len();
            (0..=steps)
                .map(|j| {
                    let fraction =
                        (config.initial_fraction + j as f64 * config.step_fraction).min(1.0);
                    (((n as f64) * fraction).round() as usize).clamp(1, n)
                })
                .collect()
        })
        .collect();

    let mut initial = Federation::new();
    for (i, share) in shares.iter().enumerate() {
        let index = PeerIndexBuilder::new(
            &peer_name(i),
            &share[..boundaries[i][0]],
            config.clusters,
            mix_seed(config.seed, i as u64),
        )?
        .build(TruncationMode::Threshold(config.epsilon), config.delta, true)?;
        initial.add_peer(SimulatedPeer::from_index(index))?;
    }
    initial.publish_all(&[Strategy::Cdlsi])?;

    // Arm 0 only folds; arm 1 also offers every peer a rebuild after each
    // batch. Step j's row carries the clusters rebuilt by batch j.
    let mut arms = [initial.clone(), initial];
    let mut curves: [Vec<UpdateStep>; 2] = [Vec::new(), Vec::new()];
    let mut rebuilt_by_last_batch = [0usize; 2];
    for step in 0..=steps {
        let doc_peer = doc_peer_at_boundary(&shares, &boundaries, step);
        let indexed: usize = boundaries.iter().map(|b| b[step]).sum();
        for which in 0..2 {
            let rows = run_queries(
                &arms[which],
                Method::Cdlsi,
                &queries,
                &data.qrels,
                &doc_peer,
                config.cast,
                config.h,
                config.top_n,
            )?;
            let (p, ap, recall, _) = mean_metrics(&rows);
            curves[which].push(UpdateStep {
                step,
                indexed_docs: indexed,
                rebuilt_clusters: rebuilt_by_last_batch[which],
                mean_p_at_n: p,
                mean_ap_at_n: ap,
                mean_recall: recall,
            });
        }
        if step < steps {
            rebuilt_by_last_batch = [0; 2];
            for (which, arm) in arms.iter_mut().enumerate() {
                for (i, share) in shares.iter().enumerate() {
                    let from = boundaries[i][step];
                    let to = boundaries[i][step + 1];
                    let peer = arm.peer_mut(&peer_name(i)).expect("peer was registered");
                    peer.index_mut().fold_in(&share[from..to]);
                    if which == 1 {
                        rebuilt_by_last_batch[1] += peer
                            .index_mut()
                            .maybe_rebuild(config.rebuild_fraction)?
                            .rebuilt
                            .len();
                    }
                }
                arm.publish_all(&[Strategy::Cdlsi])?;
            }
        }
    }
    let [without_rebuild, with_rebuild] = curves;
    Ok(UpdateStudy { steps, without_rebuild, with_rebuild })
}

fn doc_peer_at_boundary(
    shares: &[Vec<WeightedDoc>],
    boundaries: &[Vec<usize>],
    step: usize,
) -> HashMap<String, String> {
    let mut map = HashMap::new();
    for (i, share) in shares.iter().enumerate() {
        for doc in &share[..boundaries[i][step]] {
            map.insert(doc.id.clone(), peer_name(i));
        }
    }
    map
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::federation::SelectedPeer;
    use crate::linalg::SparseVec;

    fn hit(id: &str) -> ScoredDoc {
        ScoredDoc { doc_id: id.into(), peer_id: "p".into(), score: 1.0 }
    }

    fn ranked(ids: &[&str]) -> Vec<ScoredDoc> {
        ids.iter().map(|id| hit(id)).collect()
    }

    fn relevant<'a>(ids: &[&'a str]) -> HashSet<&'a str> {
        ids.iter().copied().collect()
    }

    fn selection_of(ids: &[&str]) -> SelectionResult {
        SelectionResult {
            peers: ids
                .iter()
                .map(|id| SelectedPeer {
                    peer_id: (*id).into(),
                    score: 0.0,
                    cluster_ids: Vec::new(),
                })
                .collect(),
        }
    }

    #[test]
    fn precision_hand_checks() {
        let results = ranked(&["a", "b", "c", "d", "e", "f", "g", "h", "i", "j"]);
        assert_eq!(precision_at(&results, &relevant(&["a", "c", "j"]), 10), 0.3);
        let all: Vec<&str> = results.iter().map(|r| r.doc_id.as_str()).collect();
        assert_eq!(precision_at(&results, &all.iter().copied().collect(), 10), 1.0);
        assert_eq!(precision_at(&[], &relevant(&["a"]), 10), 0.0);
        // Short lists count as padded with irrelevant entries.
        assert_eq!(precision_at(&ranked(&["a"]), &relevant(&["a"]), 10), 0.1);
    }

    #[test]
    fn average_precision_hand_checks() {
        // One relevant document at rank 1: the precision at cutoff i is
        // 1/i, so the mean over ten cutoffs is the tenth harmonic number
        // over ten.
        let results = ranked(&["a", "b", "c", "d", "e", "f", "g", "h", "i", "j"]);
        let h10: f64 = (1..=10).map(|i| 1.0 / i as f64).sum();
        let ap = avg_precision_at(&results, &relevant(&["a"]), 10);
        assert!((ap - h10 / 10.0).abs() < 1e-12);
        assert!((ap - 0.29290).abs() < 1e-4);

        let all: Vec<&str> = results.iter().map(|r| r.doc_id.as_str()).collect();
        assert_eq!(avg_precision_at(&results, &all.iter().copied().collect(), 10), 1.0);

        // Relevant only at the last rank: one term of 1/n, averaged.
        let ap_tail = avg_precision_at(&results, &relevant(&["j"]), 10);
        assert!((ap_tail - 0.01).abs() < 1e-12);
    }

    #[test]
    fn recall_counts_relevant_docs_reaching_selected_peers() {
        let doc_peer: HashMap<String, String> = [
            ("d0", "p0"),
            ("d1", "p0"),
            ("d2", "p1"),
            ("d3", "p2"),
        ]
        .into_iter()
        .map(|(d, p)| (d.to_string(), p.to_string()))
        .collect();
        let rel = relevant(&["d0", "d1", "d2", "d3"]);
        let all = selected_peer_recall(&selection_of(&["p0", "p1", "p2"]), &rel, &doc_peer);
        assert_eq!(all, Some(1.0));
        let half = selected_peer_recall(&selection_of(&["p0"]), &rel, &doc_peer);
        assert_eq!(half, Some(0.5));
        let none = selected_peer_recall(&selection_of(&[]), &rel, &doc_peer);
        assert_eq!(none, Some(0.0));
        assert_eq!(
            selected_peer_recall(&selection_of(&["p0"]), &HashSet::new(), &doc_peer),
            None
        );
    }

    fn tiny_sweep_config() -> SweepConfig {
        SweepConfig {
            methods: vec![SweepMethod::Cdlsi, SweepMethod::Ggloss],
            cluster_counts: vec![2],
            truncations: vec![TruncationMode::Threshold(0.0)],
            h_values: vec![2],
            casts: vec![2],
            delta: 0.05,
            top_n: 10,
            seeds: vec![1, 2],
            peers: 4,
        }
    }

    fn tiny_corpus() -> SweepCorpus {
        SweepCorpus::Synthetic(SyntheticParams {
            topics: 4,
            docs_per_topic: 10,
            vocab_per_topic: 12,
            overlap_fraction: 0.25,
            polysemy_terms: 2,
            seed: 0,
        })
    }

    #[test]
    fn sweep_emits_one_row_per_query_per_cell() {
        let cells = run_sweep(&tiny_corpus(), &tiny_sweep_config()).unwrap();
        // 2 methods x 1 x 1 x 1 x 1 x 2 seeds.
        assert_eq!(cells.len(), 4);
        for cell in &cells {
            match &cell.outcome {
                CellOutcome::Ran(rows) => {
                    assert_eq!(rows.len(), 4);
                    for r in rows {
                        assert!((0.0..=1.0).contains(&r.p_at_n));
                        assert!((0.0..=1.0).contains(&r.ap_at_n));
                        if let Some(rec) = r.recall {
                            assert!((0.0..=1.0).contains(&rec));
                        }
                    }
                }
                CellOutcome::Skipped(reason) => panic!("unexpected skip: {reason}"),
            }
        }
        let keys: HashSet<String> = cells.iter().map(|c| c.setting.hash_key()).collect();
        assert_eq!(keys.len(), 4, "setting hashes must be distinct");
    }

    #[test]
    fn sweep_reports_are_identical_on_rerun() {
        let corpus = tiny_corpus();
        let config = tiny_sweep_config();
        let a = run_sweep(&corpus, &config).unwrap();
        let b = run_sweep(&corpus, &config).unwrap();
        assert_eq!(a, b);

        let mut csv_a = Vec::new();
        let mut csv_b = Vec::new();
        write_csv(&a, &mut csv_a).unwrap();
        write_csv(&b, &mut csv_b).unwrap();
        assert_eq!(csv_a, csv_b);
        assert_eq!(aggregates_json(&a).unwrap(), aggregates_json(&b).unwrap());

        let text = String::from_utf8(csv_a).unwrap();
        let mut lines = text.lines();
        assert_eq!(lines.next(), Some(CSV_COLUMNS));
        // Header plus one row per query per cell.
        assert_eq!(text.lines().count(), 1 + 4 * 4);
    }

    #[test]
    fn comp_table_matches_recomputation_from_the_csv() {
        let cells = run_sweep(&tiny_corpus(), &tiny_sweep_config()).unwrap();
        let table = comp_table(&cells, SweepMethod::Cdlsi, SweepMethod::Ggloss);
        assert_eq!(table.rows.len(), 1);

        let mut csv = Vec::new();
        write_csv(&cells, &mut csv).unwrap();
        let text = String::from_utf8(csv).unwrap();
        // Key a recall value by everything but the method column.
        let mut by_method: HashMap<(String, String), [Option<f64>; 2]> = HashMap::new();
        for line in text.lines().skip(1) {
            let fields: Vec<&str> = line.split(',').collect();
            let (method, query_id, recall) = (fields[0], fields[9], fields[12]);
            if recall.is_empty() {
                continue;
            }
            let rest = format!("{}|{}", fields[1..9].join(","), query_id);
            let slot = match method {
                "cdlsi" => 0,
                "ggloss" => 1,
                other => panic!("unexpected method {other}"),
            };
            by_method.entry((rest, query_id.to_string())).or_default()[slot] =
                Some(recall.parse().unwrap());
        }
        let (mut wins, mut losses, mut ties) = (0usize, 0usize, 0usize);
        for pair in by_method.values() {
            if let [Some(a), Some(b)] = pair {
                if a > b {
                    wins += 1;
                } else if a < b {
                    losses += 1;
                } else {
                    ties += 1;
                }
            }
        }
        let total = (wins + losses + ties) as f64;
        let row = &table.rows[0];
        assert_eq!(row.pairs, wins + losses + ties);
        assert_eq!(row.wins, wins as f64 / total);
        assert_eq!(row.losses, losses as f64 / total);
        assert_eq!(row.ties, ties as f64 / total);
        assert!(row.wins + row.losses <= 1.0);
        assert!((row.wins + row.losses + row.ties - 1.0).abs() < 1e-12);
    }

    #[test]
    fn infeasible_rank_cuts_are_skipped_with_a_reason() {
        let config = SweepConfig {
            methods: vec![SweepMethod::Cdlsi],
            truncations: vec![TruncationMode::Rank(50), TruncationMode::Threshold(0.0)],
            ..tiny_sweep_config()
        };
        let cells = run_sweep(&tiny_corpus(), &config).unwrap();
        assert_eq!(cells.len(), 4);
        for cell in &cells {
            match (&cell.setting.truncation, &cell.outcome) {
                (TruncationMode::Rank(_), CellOutcome::Skipped(reason)) => {
                    assert!(!reason.is_empty());
                }
                (TruncationMode::Rank(_), CellOutcome::Ran(_)) => {
                    panic!("a 50-dimension cut cannot run on ten-document peers")
                }
                (TruncationMode::Threshold(_), CellOutcome::Ran(_)) => {}
                (TruncationMode::Threshold(_), CellOutcome::Skipped(r)) => {
                    panic!("threshold cell skipped: {r}")
                }
            }
        }
        // Skipped cells still land in the aggregate report, marked.
        let aggs = aggregates(&cells);
        let skipped: Vec<&Aggregate> =
            aggs.values().filter(|a| a.skipped.is_some()).collect();
        assert_eq!(skipped.len(), 2);
        assert!(skipped[0].mean_p_at_n.is_none());
    }

    #[test]
    fn zero_relevant_queries_are_counted_but_not_averaged_into_recall() {
        let docs = vec![
            RawDoc { id: "d0".into(), text: "alpha alpha beta".into() },
            RawDoc { id: "d1".into(), text: "alpha gamma gamma".into() },
            RawDoc { id: "d2".into(), text: "delta delta beta".into() },
            RawDoc { id: "d3".into(), text: "epsilon delta gamma".into() },
        ];
        let queries = vec![
            RawQuery { id: "q0".into(), text: "alpha".into() },
            RawQuery { id: "q1".into(), text: "epsilon".into() },
        ];
        let mut qrels = Qrels::new();
        qrels.insert("q0", "d0", 1);
        qrels.insert("q0", "d1", 1);
        // q1 has no relevant documents at all.
        let corpus = SweepCorpus::Fixed(SweepData { docs, queries, qrels });
        let config = SweepConfig {
            methods: vec![SweepMethod::Cdlsi],
            cluster_counts: vec![1],
            truncations: vec![TruncationMode::Threshold(0.0)],
            h_values: vec![1],
            casts: vec![2],
            delta: 0.05,
            top_n: 3,
            seeds: vec![5],
            peers: 2,
        };
        let cells = run_sweep(&corpus, &config).unwrap();
        assert_eq!(cells.len(), 1);
        let aggs = aggregates(&cells);
        let agg = aggs.values().next().unwrap();
        assert_eq!(agg.queries, 2);
        assert_eq!(agg.zero_relevant, 1);

        let mut csv = Vec::new();
        write_csv(&cells, &mut csv).unwrap();
        let text = String::from_utf8(csv).unwrap();
        let q1_row = text.lines().find(|l| l.contains(",q1,")).unwrap();
        assert!(q1_row.ends_with(','), "recall field must be empty: {q1_row}");
    }

    #[test]
    fn merged_raw_retrieval_matches_a_monolithic_run() {
        let params = SyntheticParams {
            topics: 4,
            docs_per_topic: 9,
            vocab_per_topic: 12,
            overlap_fraction: 0.25,
            polysemy_terms: 2,
            seed: 3,
        };
        let (docs, raw_queries, qrels) = generate_synthetic(&params).unwrap();
        let weighted = log_entropy_weights(&docs).unwrap();
        let shares = assign_round_robin(&weighted.docs, 3).unwrap();
        let mut federation = Federation::new();
        for (i, share) in shares.iter().enumerate() {
            let index = PeerIndexBuilder::new(&peer_name(i), share, 2, 11 + i as u64)
                .unwrap()
                .build(TruncationMode::Threshold(0.0), 0.05, true)
                .unwrap();
            federation.add_peer(SimulatedPeer::from_index(index)).unwrap();
        }
        federation.publish_all(&[Strategy::Ggloss]).unwrap();

        for rq in &raw_queries {
            let q = vectorize_query(
                &rq.id,
                &rq.text,
                &weighted.dictionary,
                &weighted.global_factors,
            );
            let merged = federation.query(Method::Ggloss, &q, 3, 1, 10).unwrap().results;

            // Monolithic oracle: every document scored by the same raw
            // inner product over one undivided collection.
            let mut all: Vec<ScoredDoc> = weighted
                .docs
                .iter()
                .map(|d| ScoredDoc {
                    doc_id: d.id.clone(),
                    peer_id: "mono".into(),
                    score: d.weights.normalized().dot(&q.weights),
                })
                .collect();
            crate::peer::sort_by_score(&mut all);
            all.truncate(10);

            let rel = qrels.relevant_docs(&rq.id);
            let p_federated = precision_at(&merged, &rel, 10);
            let p_monolithic = precision_at(&all, &rel, 10);
            assert_eq!(p_federated, p_monolithic, "query {}", rq.id);
        }
    }

    #[test]
    fn update_study_walks_the_step_schedule() {
        let params = SyntheticParams {
            topics: 4,
            docs_per_topic: 10,
            vocab_per_topic: 12,
            overlap_fraction: 0.0,
            polysemy_terms: 0,
            seed: 21,
        };
        let (docs, queries, qrels) = generate_synthetic(&params).unwrap();
        let data = SweepData { docs, queries, qrels };
        // Twenty documents per peer make every 5% batch exactly one doc.
        let config = UpdateConfig {
            peers: 2,
            clusters: 2,
            rebuild_fraction: 0.01,
            ..UpdateConfig::default()
        };
        let study = run_update_study(&data, &config).unwrap();

        // 30% in 5-point steps is six batches.
        assert_eq!(study.steps, 6);
        assert_eq!(study.without_rebuild.len(), 7);
        assert_eq!(study.with_rebuild.len(), 7);
        assert_eq!(study.without_rebuild[0], study.with_rebuild[0]);
        assert_eq!(study.without_rebuild[0].indexed_docs, 28);
        assert_eq!(study.without_rebuild[6].indexed_docs, 40);
        assert_eq!(study.with_rebuild[6].indexed_docs, 40);
        for w in study.without_rebuild.windows(2) {
            assert!(w[0].indexed_docs < w[1].indexed_docs);
        }
        for s in &study.without_rebuild {
            assert_eq!(s.rebuilt_clusters, 0);
        }
        // A hair-trigger threshold forces rebuilds once anything folds.
        let total_rebuilt: usize =
            study.with_rebuild.iter().map(|s| s.rebuilt_clusters).sum();
        assert!(total_rebuilt > 0);

        let again = run_update_study(&data, &config).unwrap();
        assert_eq!(study, again);
    }

    #[test]
    fn sweep_config_validation_rejects_bad_grids() {
        let ok = tiny_sweep_config();
        let cases = [
            SweepConfig { methods: vec![], ..ok.clone() },
            SweepConfig { seeds: vec![1, 1], ..ok.clone() },
            SweepConfig { cluster_counts: vec![0], ..ok.clone() },
            SweepConfig { truncations: vec![TruncationMode::Rank(0)], ..ok.clone() },
            SweepConfig { truncations: vec![TruncationMode::Threshold(-1.0)], ..ok.clone() },
            SweepConfig { h_values: vec![0], ..ok.clone() },
            SweepConfig { casts: vec![0], ..ok.clone() },
            SweepConfig { top_n: 0, ..ok.clone() },
            SweepConfig { peers: 0, ..ok.clone() },
            SweepConfig { delta: 1.0, ..ok.clone() },
        ];
        for bad in cases {
            assert!(run_sweep(&tiny_corpus(), &bad).is_err());
        }
        assert!(SweepMethod::from_str("cdlsi").is_ok());
        assert!(SweepMethod::from_str("nonesuch").is_err());
    }

    #[test]
    fn more_peers_than_documents_is_a_config_error() {
        let docs: Vec<WeightedDoc> = (0..2)
            .map(|i| WeightedDoc {
                id: format!("d{i}"),
                weights: SparseVec::new(vec![(i, 1.0)]).unwrap(),
            })
            .collect();
        let err = assign_round_robin(&docs, 3).unwrap_err();
        assert_eq!(err.category(), "config");
    }
}
