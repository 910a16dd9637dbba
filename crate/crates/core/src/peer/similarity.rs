//! Inter-cluster similarity network.
//!
//! Two clusters relate through a pair of measures: S1 compares vocabulary
//! overlap, S2 compares the term-to-term similarity structure of their
//! retained concept spaces over the shared vocabulary. Both are composed
//! over a path of length l (0 = direct vocabulary overlap, 1 = one
//! intermediate cluster on the same peer) as `(1/S^l + l)^-1`, and the
//! final network weight is the product `S = S1 * S2`.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::{DenseMatrix, TermId};
use crate::peer::ClusterIndex;

/// Path length at which two clusters connect.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Proximity {
    /// Shared vocabulary (l = 0).
    Direct,
    /// No shared vocabulary, but a third cluster shares with both (l = 1).
    OneHop,
    /// No path of length <= 1; similarity is defined as zero.
    Unreachable,
}

/// Similarity record for one unordered cluster pair.
#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
pub struct PairSimilarity {
    pub proximity: Proximity,
    pub s1: f64,
    pub s2: f64,
    pub s: f64,
}

impl PairSimilarity {
    fn zero(proximity: Proximity) -> Self {
        PairSimilarity { proximity, s1: 0.0, s2: 0.0, s: 0.0 }
    }
}

/// Symmetric pairwise similarity over one peer's clusters, stored as the
/// strict upper triangle.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct SimilarityNetwork {
    k: usize,
    pairs: Vec<PairSimilarity>,
}

impl SimilarityNetwork {
    /// A network over `k` clusters with every pair unreachable; used by the
    /// no-relations variant and as the starting point of a build.
    pub fn disconnected(k: usize) -> Self {
        let len = k * k.saturating_sub(1) / 2;
        SimilarityNetwork {
            k,
            pairs: vec![PairSimilarity::zero(Proximity::Unreachable); len],
        }
    }

    pub fn cluster_count(&self) -> usize {
        self.k
    }

    fn index(&self, i: usize, j: usize) -> usize {
        debug_assert!(i < j && j < self.k);
        // Row-major strict upper triangle.
        i * self.k - i * (i + 1) / 2 + (j - i - 1)
    }

    pub fn pair(&self, i: usize, j: usize) -> PairSimilarity {
        let (a, b) = if i < j { (i, j) } else { (j, i) };
        self.pairs[self.index(a, b)]
    }

    pub fn set_pair(&mut self, i: usize, j: usize, value: PairSimilarity) {
        let (a, b) = if i < j { (i, j) } else { (j, i) };
        let idx = self.index(a, b);
        self.pairs[idx] = value;
    }

    /// Combined similarity S(i, j); zero on the diagonal.
    pub fn similarity(&self, i: usize, j: usize) -> f64 {
        if i == j {
            0.0
        } else {
            self.pair(i, j).s
        }
    }
}

/// Sorted intersection of two sorted term-id slices.
pub fn shared_terms(a: &[TermId], b: &[TermId]) -> Vec<TermId> {
    let mut out = Vec::new();
    let (mut i, mut j) = (0, 0);
    while i < a.len() && j < b.len() {
        match a[i].cmp(&b[j]) {
            std::cmp::Ordering::Less => i += 1,
            std::cmp::Ordering::Greater => j += 1,
            std::cmp::Ordering::Equal => {
                out.push(a[i]);
                i += 1;
                j += 1;
            }
        }
    }
    out
}

fn compose(s_l: f64, l: usize) -> f64 {
    if s_l <= 0.0 {
        0.0
    } else if l == 0 {
        s_l
    } else {
        1.0 / (1.0 / s_l + l as f64)
    }
}

/// Vocabulary-overlap similarity S1 between clusters `i` and `j` given all
/// clusters' term sets. Returns the composed value and the path length it
/// was computed at. Paths longer than one hop are treated as no path.
pub fn s1_similarity(term_sets: &[&[TermId]], i: usize, j: usize) -> (f64, Proximity) {
    let (t_i, t_j) = (term_sets[i], term_sets[j]);
    if t_i.is_empty() || t_j.is_empty() {
        return (0.0, Proximity::Unreachable);
    }
    let direct = shared_terms(t_i, t_j).len();
    if direct > 0 {
        let s0 = (direct * direct) as f64 / (t_i.len() * t_j.len()) as f64;
        return (compose(s0, 0), Proximity::Direct);
    }
    // One intermediate: best bridge m maximizes |T_im|^2 |T_mj|^2 over
    // |T_i| |T_m|^2 |T_j|.
    let mut best = 0.0_f64;
    let mut found = false;
    for (m, t_m) in term_sets.iter().enumerate() {
        if m == i || m == j || t_m.is_empty() {
            continue;
        }
        let im = shared_terms(t_i, t_m).len();
        if im == 0 {
            continue;
        }
        let mj = shared_terms(t_m, t_j).len();
        if mj == 0 {
            continue;
        }
        found = true;
        let s1 = (im * im * mj * mj) as f64
            / (t_i.len() * t_m.len() * t_m.len() * t_j.len()) as f64;
        best = best.max(s1);
    }
    if found {
        (compose(best, 1), Proximity::OneHop)
    } else {
        (0.0, Proximity::Unreachable)
    }
}

/// Correlation between two equally-shaped matrices:
/// `R = |(1/nm) sum ((X - mean(X)) / F_X) ((Y - mean(Y)) / F_Y)|`
/// where `F` is the mean of squared entries (not a standard deviation, so
/// `R(X, X)` is not 1 in general). A constant matrix correlates at 0, with
/// 0/0 defined as 0.
pub fn matrix_correlation(x: &DenseMatrix, y: &DenseMatrix) -> Result<f64> {
    if x.rows() != y.rows() || x.cols() != y.cols() {
        return Err(Error::Dimension(format!(
            "correlation needs equal shapes, got {}x{} vs {}x{}",
            x.rows(),
            x.cols(),
            y.rows(),
            y.cols()
        )));
    }
    let nm = (x.rows() * x.cols()) as f64;
    let (mut sum_x, mut sum_y, mut sq_x, mut sq_y) = (0.0, 0.0, 0.0, 0.0);
    for r in 0..x.rows() {
        for c in 0..x.cols() {
            let (xv, yv) = (x.get(r, c), y.get(r, c));
            sum_x += xv;
            sum_y += yv;
            sq_x += xv * xv;
            sq_y += yv * yv;
        }
    }
    let (mean_x, mean_y) = (sum_x / nm, sum_y / nm);
    let (f_x, f_y) = (sq_x / nm, sq_y / nm);
    if f_x == 0.0 || f_y == 0.0 {
        return Ok(0.0);
    }
    let mut cov = 0.0;
    for r in 0..x.rows() {
        for c in 0..x.cols() {
            cov += (x.get(r, c) - mean_x) * (y.get(r, c) - mean_y);
        }
    }
    Ok((cov / (nm * f_x * f_y)).abs())
}

/// Restriction of a cluster's projector `B = U' U'^T` to the rows and
/// columns of `terms` (global ids, all of which must be in the cluster's
/// vocabulary).
fn restricted_projector(cluster: &ClusterIndex, terms: &[TermId]) -> Option<DenseMatrix> {
    if terms.is_empty() {
        return None;
    }
    let locals: Vec<usize> = terms
        .iter()
        .map(|t| cluster.local_row(*t).expect("term is in the cluster vocabulary"))
        .collect();
    let mut m = DenseMatrix::zeros(terms.len(), terms.len()).ok()?;
    for (r, &lr) in locals.iter().enumerate() {
        for (c, &lc) in locals.iter().enumerate() {
            m.set(r, c, cluster.lsi.projector_entry(lr, lc));
        }
    }
    Some(m)
}

/// Concept-structure similarity S2 between clusters `i` and `j`: the
/// correlation of their projectors restricted to shared vocabulary,
/// composed over the same path scheme as S1, clamped into [0, 1].
///
/// The clamp is needed because `matrix_correlation` normalizes by mean
/// squares rather than variances and can exceed 1 on sparse projectors.
pub fn s2_similarity(clusters: &[ClusterIndex], i: usize, j: usize) -> (f64, Proximity) {
    let shared_ij = shared_terms(&clusters[i].term_rows, &clusters[j].term_rows);
    if !shared_ij.is_empty() {
        let s0 = pair_correlation(&clusters[i], &clusters[j], &shared_ij);
        return (compose(s0, 0).min(1.0), Proximity::Direct);
    }
    if clusters[i].term_rows.is_empty() || clusters[j].term_rows.is_empty() {
        return (0.0, Proximity::Unreachable);
    }
    let mut best = 0.0_f64;
    let mut found = false;
    for (m, mid) in clusters.iter().enumerate() {
        if m == i || m == j {
            continue;
        }
        let shared_im = shared_terms(&clusters[i].term_rows, &mid.term_rows);
        if shared_im.is_empty() {
            continue;
        }
        let shared_mj = shared_terms(&mid.term_rows, &clusters[j].term_rows);
        if shared_mj.is_empty() {
            continue;
        }
        found = true;
        let left = pair_correlation(&clusters[i], mid, &shared_im);
        let right = pair_correlation(mid, &clusters[j], &shared_mj);
        best = best.max(left * right);
    }
    if found {
        (compose(best, 1).min(1.0), Proximity::OneHop)
    } else {
        (0.0, Proximity::Unreachable)
    }
}

fn pair_correlation(a: &ClusterIndex, b: &ClusterIndex, shared: &[TermId]) -> f64 {
    match (restricted_projector(a, shared), restricted_projector(b, shared)) {
        (Some(ba), Some(bb)) => {
            matrix_correlation(&ba, &bb).expect("restricted projectors share a shape")
        }
        _ => 0.0,
    }
}

/// Builds the full pairwise network over one peer's clusters.
pub fn build_network(clusters: &[ClusterIndex]) -> SimilarityNetwork {
    let mut network = SimilarityNetwork::disconnected(clusters.len());
    let term_sets: Vec<&[TermId]> = clusters.iter().map(|c| c.term_rows.as_slice()).collect();
    for i in 0..clusters.len() {
        for j in (i + 1)..clusters.len() {
            network.set_pair(i, j, pair_similarity(clusters, &term_sets, i, j));
        }
    }
    network
}

/// Recomputes only the pairs touching a cluster in `touched`, leaving the
/// rest of the network as it was.
pub fn refresh_network(
    network: &mut SimilarityNetwork,
    clusters: &[ClusterIndex],
    touched: &[usize],
) {
    let term_sets: Vec<&[TermId]> = clusters.iter().map(|c| c.term_rows.as_slice()).collect();
    for &i in touched {
        for j in 0..clusters.len() {
            if j == i {
                continue;
            }
            let sim = pair_similarity(clusters, &term_sets, i.min(j), i.max(j));
            network.set_pair(i, j, sim);
        }
    }
}

fn pair_similarity(
    clusters: &[ClusterIndex],
    term_sets: &[&[TermId]],
    i: usize,
    j: usize,
) -> PairSimilarity {
    let (s1, prox1) = s1_similarity(term_sets, i, j);
    if prox1 == Proximity::Unreachable {
        return PairSimilarity::zero(Proximity::Unreachable);
    }
    let (s2, _) = s2_similarity(clusters, i, j);
    PairSimilarity { proximity: prox1, s1, s2, s: s1 * s2 }
}
