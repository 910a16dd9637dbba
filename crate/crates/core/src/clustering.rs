//! Seeded k-means over document vectors.
//!
//! The quality objective being maximized is `I = sum_i n_i * mu_i^T mu_i`,
//! which for fixed data is equivalent to minimizing the within-cluster sum
//! of squared distances. Assignment inside the loop therefore uses squared
//! Euclidean distance to the current centroids; that is what makes `I`
//! provably non-decreasing from one iteration to the next. The distance is
//! cosine-equivalent when centroids have equal norms, but not in general,
//! so cosine is used only in [`assign_to_nearest`], the incremental-update
//! entry point.
//!
//! All sampling and iteration runs in a canonical order derived from
//! document ids, not array positions, so permuting the input yields the
//! same clusters with the same labels.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::corpus::WeightedDoc;
use crate::error::{Error, Result};
use crate::linalg::SparseVec;

pub const DEFAULT_MAX_ITERS: usize = 100;

/// Result of a k-means run.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct Clustering {
    pub k: usize,
    /// Cluster id per document, indexed by input position.
    pub assignment: Vec<usize>,
    /// Mean vector per cluster.
    pub centroids: Vec<SparseVec>,
    /// Final value of `I = sum_i n_i * mu_i^T mu_i`.
    pub objective: f64,
    /// Objective after each iteration's centroid update, non-decreasing.
    pub objective_history: Vec<f64>,
}

/// Outcome of assigning one document to an existing clustering.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Assignment {
    pub cluster: usize,
    /// Set when the document vector was all zero and the assignment to
    /// cluster 0 is arbitrary.
    pub zero_vector: bool,
}

/// Assigns `doc` to the cluster whose centroid has the highest cosine
/// similarity, ties broken toward the lowest cluster id. A zero document
/// goes to cluster 0 with the `zero_vector` flag set.
pub fn assign_to_nearest(doc: &SparseVec, clustering: &Clustering) -> Assignment {
    let norm = doc.norm();
    if norm == 0.0 {
        return Assignment { cluster: 0, zero_vector: true };
    }
    let mut best = 0;
    let mut best_cos = f64::NEG_INFINITY;
    for (cid, centroid) in clustering.centroids.iter().enumerate() {
        let cnorm = centroid.norm();
        let cos = if cnorm == 0.0 { 0.0 } else { doc.dot(centroid) / (norm * cnorm) };
        if cos > best_cos {
            best_cos = cos;
            best = cid;
        }
    }
    Assignment { cluster: best, zero_vector: false }
}

/// Runs seeded k-means++ initialization followed by Lloyd iterations.
///
/// Documents are expected in normalized form; the objective is computed on
/// the vectors exactly as given. Empty clusters are repaired by re-seeding
/// with the point farthest from the empty cluster's stale centroid.
/// Permuting the input documents yields the same partition and labels.
pub fn kmeans(docs: &[WeightedDoc], k: usize, seed: u64, max_iters: usize) -> Result<Clustering> {
    if k == 0 {
        return Err(Error::Parameter("k must be >= 1".into()));
    }
    if docs.is_empty() {
        return Err(Error::Parameter("cannot cluster an empty document set".into()));
    }
    if k > docs.len() {
        return Err(Error::Parameter(format!(
            "k={k} exceeds the number of documents ({})",
            docs.len()
        )));
    }

    // Canonical processing order: by id hash, then id. Seeding and sums
    // walk this order so input permutations cannot change the outcome.
    let mut canon: Vec<usize> = (0..docs.len()).collect();
    canon.sort_by(|&a, &b| {
        let (ha, hb) = (fnv1a(docs[a].id.as_bytes()), fnv1a(docs[b].id.as_bytes()));
        ha.cmp(&hb).then_with(|| docs[a].id.cmp(&docs[b].id))
    });

    if k == docs.len() {
        // Singletons: each document is its own cluster, in canonical order.
        let mut assignment = vec![0; docs.len()];
        let mut centroids = Vec::with_capacity(k);
        for (cid, &pos) in canon.iter().enumerate() {
            assignment[pos] = cid;
            centroids.push(docs[pos].weights.clone());
        }
        let objective = objective_value(docs, &assignment, k);
        return Ok(Clustering {
            k,
            assignment,
            centroids,
            objective,
            objective_history: vec![objective],
        });
    }

    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut centroids = seed_centroids(docs, &canon, k, &mut rng);

    let mut assignment: Vec<usize> = vec![0; docs.len()];
    let mut history = Vec::new();
    for _ in 0..max_iters {
        let mut next: Vec<usize> = vec![0; docs.len()];
        for &pos in &canon {
            next[pos] = nearest_euclidean(&docs[pos].weights, &centroids);
        }
        repair_empty_clusters(docs, &canon, &mut next, &centroids, k);
        let converged = next == assignment && !history.is_empty();
        assignment = next;
        centroids = mean_centroids(docs, &canon, &assignment, k);
        if converged {
            break;
        }
        history.push(objective_value(docs, &assignment, k));
    }

    let objective = *history.last().expect("at least one iteration ran");
    Ok(Clustering { k, assignment, centroids, objective, objective_history: history })
}

/// k-means++ style seeding: first centroid drawn by hashed-id order, each
/// further centroid drawn with probability proportional to the squared
/// distance from the nearest centroid chosen so far.
fn seed_centroids(
    docs: &[WeightedDoc],
    canon: &[usize],
    k: usize,
    rng: &mut ChaCha8Rng,
) -> Vec<SparseVec> {
    let mut centroids: Vec<SparseVec> = Vec::with_capacity(k);
    let first = canon[rng.gen_range(0..canon.len())];
    centroids.push(docs[first].weights.clone());

    let mut dist2: Vec<f64> = vec![0.0; docs.len()];
    while centroids.len() < k {
        let latest = centroids.last().expect("non-empty");
        let mut total = 0.0;
        for &pos in canon {
            let d2 = squared_distance(&docs[pos].weights, latest);
            let best = if centroids.len() == 1 { d2 } else { dist2[pos].min(d2) };
            dist2[pos] = best;
            total += best;
        }
        let chosen = if total == 0.0 {
            // All points coincide with chosen centroids; take the first
            // canonical point not yet a centroid to keep seeds distinct.
            canon
                .iter()
                .copied()
                .find(|&pos| !centroids.iter().any(|c| *c == docs[pos].weights))
                .unwrap_or(canon[0])
        } else {
            let mut target = rng.gen::<f64>() * total;
            let mut pick = canon[canon.len() - 1];
            for &pos in canon {
                target -= dist2[pos];
                if target <= 0.0 {
                    pick = pos;
                    break;
                }
            }
            pick
        };
        centroids.push(docs[chosen].weights.clone());
    }
    centroids
}

fn nearest_euclidean(doc: &SparseVec, centroids: &[SparseVec]) -> usize {
    let mut best = 0;
    let mut best_d2 = f64::INFINITY;
    for (cid, centroid) in centroids.iter().enumerate() {
        let d2 = squared_distance(doc, centroid);
        if d2 < best_d2 {
            best_d2 = d2;
            best = cid;
        }
    }
    best
}

fn squared_distance(a: &SparseVec, b: &SparseVec) -> f64 {
    // ||a - b||^2 without materializing the difference.
    a.dot(a) - 2.0 * a.dot(b) + b.dot(b)
}

/// Re-seeds each empty cluster with the point of lowest cosine to that
/// cluster's stale centroid, skipping points that are alone in theirs.
fn repair_empty_clusters(
    docs: &[WeightedDoc],
    canon: &[usize],
    assignment: &mut [usize],
    centroids: &[SparseVec],
    k: usize,
) {
    loop {
        let mut sizes = vec![0usize; k];
        for &a in assignment.iter() {
            sizes[a] += 1;
        }
        let empty = match (0..k).find(|&c| sizes[c] == 0) {
            None => return,
            Some(c) => c,
        };
        let centroid = &centroids[empty];
        let cnorm = centroid.norm();
        let mut pick: Option<(usize, f64)> = None;
        for &pos in canon {
            if sizes[assignment[pos]] <= 1 {
                continue;
            }
            let dnorm = docs[pos].weights.norm();
            let cos = if cnorm == 0.0 || dnorm == 0.0 {
                0.0
            } else {
                docs[pos].weights.dot(centroid) / (cnorm * dnorm)
            };
            match pick {
                Some((_, best)) if best <= cos => {}
                _ => pick = Some((pos, cos)),
            }
        }
        match pick {
            Some((pos, _)) => assignment[pos] = empty,
            None => return,
        }
    }
}

fn mean_centroids(
    docs: &[WeightedDoc],
    canon: &[usize],
    assignment: &[usize],
    k: usize,
) -> Vec<SparseVec> {
    let mut sums: Vec<SparseVec> = vec![SparseVec::empty(); k];
    let mut counts = vec![0usize; k];
    for &pos in canon {
        let c = assignment[pos];
        sums[c] = sums[c].add_scaled(&docs[pos].weights, 1.0);
        counts[c] += 1;
    }
    sums.into_iter()
        .zip(counts)
        .map(|(sum, n)| if n == 0 { sum } else { sum.scale(1.0 / n as f64) })
        .collect()
}

/// `I = sum_i n_i * mu_i^T mu_i` for the given assignment.
pub fn objective_value(docs: &[WeightedDoc], assignment: &[usize], k: usize) -> f64 {
    let canon: Vec<usize> = {
        let mut c: Vec<usize> = (0..docs.len()).collect();
        c.sort_by(|&a, &b| {
            let (ha, hb) = (fnv1a(docs[a].id.as_bytes()), fnv1a(docs[b].id.as_bytes()));
            ha.cmp(&hb).then_with(|| docs[a].id.cmp(&docs[b].id))
        });
        c
    };
    let centroids = mean_centroids(docs, &canon, assignment, k);
    let mut counts = vec![0usize; k];
    for &a in assignment {
        counts[a] += 1;
    }
    centroids
        .iter()
        .zip(&counts)
        .map(|(mu, &n)| n as f64 * mu.dot(mu))
        .sum()
}

pub(crate) fn fnv1a(bytes: &[u8]) -> u64 {
    let mut hash: u64 = 0xcbf29ce484222325;
    for &b in bytes {
        hash ^= b as u64;
        hash = hash.wrapping_mul(0x100000001b3);
    }
    hash
}
