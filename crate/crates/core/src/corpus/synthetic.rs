//! Deterministic planted-topic corpus generator for experiments.
//!
//! Each topic owns a block of fresh terms. A configurable fraction of each
//! topic's vocabulary is borrowed from the next topic (ring order), giving
//! neighbor topics shared vocabulary. Polysemy terms are planted into two
//! mutually non-adjacent topics. One query per topic is drawn from terms no
//! other topic uses, and that topic's documents are its relevant set.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::corpus::{Qrels, RawDoc, RawQuery};
use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq)]
pub struct SyntheticParams {
    pub topics: usize,
    pub docs_per_topic: usize,
    pub vocab_per_topic: usize,
    /// Fraction of each topic's vocabulary borrowed from its neighbor.
    pub overlap_fraction: f64,
    /// Number of extra terms planted into two non-adjacent topics each.
    pub polysemy_terms: usize,
    pub seed: u64,
}

impl Default for SyntheticParams {
    fn default() -> Self {
        SyntheticParams {
            topics: 10,
            docs_per_topic: 20,
            vocab_per_topic: 30,
            overlap_fraction: 0.2,
            polysemy_terms: 5,
            seed: 7,
        }
    }
}

const QUERY_TERMS: usize = 3;
const DOC_LEN_MIN: usize = 12;
const DOC_LEN_MAX: usize = 24;

pub fn generate_synthetic(
    params: &SyntheticParams,
) -> Result<(Vec<RawDoc>, Vec<RawQuery>, Qrels)> {
    validate(params)?;
    let mut rng = ChaCha8Rng::seed_from_u64(params.seed);

    let fresh: Vec<Vec<String>> = (0..params.topics)
        .map(|t| {
            (0..params.vocab_per_topic)
                .map(|w| format!("t{t:02}w{w:03}"))
                .collect()
        })
        .collect();

    let n_borrow = if params.topics >= 2 {
        (params.overlap_fraction * params.vocab_per_topic as f64).round() as usize
    } else {
        0
    };

    // Polysemy terms go to a pair of topics at ring distance >= 2.
    let mut polysemy: Vec<Vec<String>> = vec![Vec::new(); params.topics];
    for p in 0..params.polysemy_terms {
        let a = rng.gen_range(0..params.topics);
        let b = loop {
            let b = rng.gen_range(0..params.topics);
            if !adjacent(a, b, params.topics) {
                break b;
            }
        };
        let term = format!("poly{p:03}");
        polysemy[a].push(term.clone());
        polysemy[b].push(term);
    }

    let mut docs = Vec::with_capacity(params.topics * params.docs_per_topic);
    let mut queries = Vec::with_capacity(params.topics);
    let mut qrels = Qrels::new();

    for t in 0..params.topics {
        // Sampling pool: fresh terms doubled for bias, plus borrowed
        // neighbor terms and this topic's polysemy terms.
        let mut pool: Vec<&str> = Vec::new();
        for term in &fresh[t] {
            pool.push(term);
            pool.push(term);
        }
        if n_borrow > 0 {
            let neighbor = (t + 1) % params.topics;
            for term in &fresh[neighbor][..n_borrow] {
                pool.push(term);
            }
        }
        for term in &polysemy[t] {
            pool.push(term);
        }

        for d in 0..params.docs_per_topic {
            let len = rng.gen_range(DOC_LEN_MIN..=DOC_LEN_MAX);
            let words: Vec<&str> = (0..len)
                .map(|_| pool[rng.gen_range(0..pool.len())])
                .collect();
            let id = format!("t{t:02}_d{d:03}");
            qrels.insert(&format!("q{t:02}"), &id, 1);
            docs.push(RawDoc { id, text: words.join(" ") });
        }

        // Query terms come from the exclusive tail of this topic's fresh
        // block: the first n_borrow fresh terms are lent to the previous
        // topic on the ring, so they are not exclusive.
        let exclusive = &fresh[t][n_borrow..];
        if exclusive.is_empty() {
            return Err(Error::Parameter(format!(
                "vocabulary exhausted: topic {t} has no exclusive terms to query \
                 (overlap_fraction {} too high)",
                params.overlap_fraction
            )));
        }
        let mut picks: Vec<&str> = Vec::new();
        let want = QUERY_TERMS.min(exclusive.len());
        while picks.len() < want {
            let cand = exclusive[rng.gen_range(0..exclusive.len())].as_str();
            if !picks.contains(&cand) {
                picks.push(cand);
            }
        }
        queries.push(RawQuery {
            id: format!("q{t:02}"),
            text: picks.join(" "),
        });
    }

    Ok((docs, queries, qrels))
}

fn adjacent(a: usize, b: usize, topics: usize) -> bool {
    if a == b {
        return true;
    }
    let d = a.abs_diff(b);
    d == 1 || d == topics - 1
}

fn validate(params: &SyntheticParams) -> Result<()> {
    if params.topics == 0 || params.docs_per_topic == 0 || params.vocab_per_topic == 0 {
        return Err(Error::Parameter(
            "topics, docs_per_topic and vocab_per_topic must all be >= 1".into(),
        ));
    }
    if !(0.0..=1.0).contains(&params.overlap_fraction) {
        return Err(Error::Parameter(format!(
            "overlap_fraction must be in [0, 1], got {}",
            params.overlap_fraction
        )));
    }
    if params.polysemy_terms > 0 && params.topics < 4 {
        return Err(Error::Parameter(
            "polysemy terms need at least 4 topics to find a non-adjacent pair".into(),
        ));
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::collections::HashSet;

    fn topic_vocab(docs: &[RawDoc], topic: usize) -> HashSet<String> {
        let prefix = format!("t{topic:02}_");
        docs.iter()
            .filter(|d| d.id.starts_with(&prefix))
            .flat_map(|d| d.text.split_whitespace().map(str::to_string))
            .collect()
    }

    #[test]
    fn same_seed_is_byte_identical() {
        let params = SyntheticParams::default();
        let (d1, q1, r1) = generate_synthetic(&params).unwrap();
        let (d2, q2, r2) = generate_synthetic(&params).unwrap();
        assert_eq!(d1, d2);
        assert_eq!(q1, q2);
        assert_eq!(r1, r2);

        let other = SyntheticParams { seed: 8, ..params };
        let (d3, _, _) = generate_synthetic(&other).unwrap();
        assert_ne!(d1, d3);
    }

    #[test]
    fn zero_overlap_zero_polysemy_gives_disjoint_vocabularies() {
        let params = SyntheticParams {
            topics: 5,
            overlap_fraction: 0.0,
            polysemy_terms: 0,
            ..SyntheticParams::default()
        };
        let (docs, _, _) = generate_synthetic(&params).unwrap();
        for a in 0..5 {
            for b in (a + 1)..5 {
                let va = topic_vocab(&docs, a);
                let vb = topic_vocab(&docs, b);
                assert!(va.is_disjoint(&vb), "topics {a} and {b} share vocabulary");
            }
        }
    }

    #[test]
    fn overlap_plants_shared_vocabulary_between_neighbors() {
        let params = SyntheticParams {
            topics: 4,
            docs_per_topic: 30,
            overlap_fraction: 0.3,
            polysemy_terms: 0,
            ..SyntheticParams::default()
        };
        let (docs, _, _) = generate_synthetic(&params).unwrap();
        let mut shared_pairs = 0;
        for a in 0..4 {
            let b = (a + 1) % 4;
            if !topic_vocab(&docs, a).is_disjoint(&topic_vocab(&docs, b)) {
                shared_pairs += 1;
            }
        }
        assert!(shared_pairs >= 3, "only {shared_pairs} neighbor pairs share terms");
    }

    #[test]
    fn polysemy_terms_land_in_two_non_adjacent_topics() {
        let params = SyntheticParams {
            topics: 6,
            docs_per_topic: 40,
            polysemy_terms: 3,
            overlap_fraction: 0.0,
            ..SyntheticParams::default()
        };
        let (docs, _, _) = generate_synthetic(&params).unwrap();
        for p in 0..3 {
            let term = format!("poly{p:03}");
            let holders: Vec<usize> = (0..6)
                .filter(|&t| topic_vocab(&docs, t).contains(&term))
                .collect();
            // With 40 docs per topic every planted term is all but sure to
            // be sampled at least once in both homes.
            assert_eq!(holders.len(), 2, "term {term} lives in {holders:?}");
            assert!(!adjacent(holders[0], holders[1], 6));
        }
    }

    #[test]
    fn single_topic_marks_every_doc_relevant() {
        let params = SyntheticParams {
            topics: 1,
            docs_per_topic: 8,
            polysemy_terms: 0,
            overlap_fraction: 0.0,
            ..SyntheticParams::default()
        };
        let (docs, queries, qrels) = generate_synthetic(&params).unwrap();
        assert_eq!(queries.len(), 1);
        assert_eq!(qrels.relevant_count("q00"), 8);
        for doc in &docs {
            assert!(qrels.is_relevant("q00", &doc.id));
        }
    }

    #[test]
    fn bad_parameters_are_rejected() {
        let base = SyntheticParams::default();
        assert!(generate_synthetic(&SyntheticParams { topics: 0, ..base.clone() }).is_err());
        assert!(generate_synthetic(&SyntheticParams {
            overlap_fraction: 1.5,
            ..base.clone()
        })
        .is_err());
        // Full overlap leaves no exclusive query terms.
        let err = generate_synthetic(&SyntheticParams {
            overlap_fraction: 1.0,
            polysemy_terms: 0,
            topics: 3,
            ..base.clone()
        })
        .unwrap_err();
        assert_eq!(err.category(), "parameter");
        // Polysemy needs enough topics for a non-adjacent pair.
        assert!(generate_synthetic(&SyntheticParams {
            topics: 3,
            polysemy_terms: 1,
            ..base
        })
        .is_err());
    }
}
