//! Text ingestion: tokenization, log-entropy term weighting, query
//! vectorization, qrels, and a planted-topic synthetic corpus generator.

mod io;
mod synthetic;

use std::collections::{HashMap, HashSet};
use std::sync::OnceLock;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::{SparseVec, TermId};

pub use io::{load_corpus, load_qrels, load_queries, write_corpus, write_qrels, write_queries};
pub use synthetic::{generate_synthetic, SyntheticParams};

/// One raw document as it appears in a corpus file.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct RawDoc {
    pub id: String,
    pub text: String,
}

/// One query as raw text, before vectorization.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct RawQuery {
    pub id: String,
    pub text: String,
}

/// A document in weighted vector form over the dictionary's term ids.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct WeightedDoc {
    pub id: String,
    pub weights: SparseVec,
}

impl WeightedDoc {
    /// Unit-norm copy; all-zero documents stay zero.
    pub fn normalized(&self) -> WeightedDoc {
        WeightedDoc {
            id: self.id.clone(),
            weights: self.weights.normalized(),
        }
    }
}

/// A query in weighted vector form.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Query {
    pub id: String,
    pub weights: SparseVec,
}

/// Bijective mapping between term strings and dense 0-based ids, assigned
/// in first-appearance order.
#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct TermDictionary {
    terms: Vec<String>,
    #[serde(skip)]
    index: OnceCellIndex,
}

/// Lazily rebuilt reverse index so deserialized dictionaries stay cheap.
#[derive(Debug, Clone, Default)]
struct OnceCellIndex(OnceLock<HashMap<String, TermId>>);

impl PartialEq for OnceCellIndex {
    fn eq(&self, _: &Self) -> bool {
        true
    }
}
impl Eq for OnceCellIndex {}

impl TermDictionary {
    pub fn new() -> Self {
        TermDictionary::default()
    }

    pub fn len(&self) -> usize {
        self.terms.len()
    }

    pub fn is_empty(&self) -> bool {
        self.terms.is_empty()
    }

    pub fn id(&self, term: &str) -> Option<TermId> {
        self.index().get(term).copied()
    }

    pub fn term(&self, id: TermId) -> Option<&str> {
        self.terms.get(id as usize).map(String::as_str)
    }

    pub fn get_or_insert(&mut self, term: &str) -> TermId {
        if let Some(id) = self.index().get(term) {
            return *id;
        }
        let id = self.terms.len() as TermId;
        self.terms.push(term.to_string());
        self.index = OnceCellIndex::default();
        id
    }

    fn index(&self) -> &HashMap<String, TermId> {
        self.index.0.get_or_init(|| {
            self.terms
                .iter()
                .enumerate()
                .map(|(i, t)| (t.clone(), i as TermId))
                .collect()
        })
    }
}

/// Relevance judgments: grade >= 1 counts as relevant.
#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct Qrels {
    grades: HashMap<String, HashMap<String, u32>>,
}

impl Qrels {
    pub fn new() -> Self {
        Qrels::default()
    }

    pub fn insert(&mut self, query_id: &str, doc_id: &str, grade: u32) {
        self.grades
            .entry(query_id.to_string())
            .or_default()
            .insert(doc_id.to_string(), grade);
    }

    pub fn grade(&self, query_id: &str, doc_id: &str) -> u32 {
        self.grades
            .get(query_id)
            .and_then(|m| m.get(doc_id))
            .copied()
            .unwrap_or(0)
    }

    pub fn is_relevant(&self, query_id: &str, doc_id: &str) -> bool {
        self.grade(query_id, doc_id) >= 1
    }

    pub fn relevant_docs(&self, query_id: &str) -> HashSet<&str> {
        self.grades
            .get(query_id)
            .map(|m| {
                m.iter()
                    .filter(|(_, &g)| g >= 1)
                    .map(|(d, _)| d.as_str())
                    .collect()
            })
            .unwrap_or_default()
    }

    pub fn relevant_count(&self, query_id: &str) -> usize {
        self.relevant_docs(query_id).len()
    }

    /// Iterates over all (query_id, doc_id, grade) triples in no fixed order.
    pub fn iter(&self) -> impl Iterator<Item = (&str, &str, u32)> + '_ {
        self.grades.iter().flat_map(|(q, docs)| {
            docs.iter().map(move |(d, &g)| (q.as_str(), d.as_str(), g))
        })
    }
}

static STOPWORDS: OnceLock<HashSet<&'static str>> = OnceLock::new();

fn stopwords() -> &'static HashSet<&'static str> {
    STOPWORDS.get_or_init(|| include_str!("stopwords.txt").split_whitespace().collect())
}

/// Lowercases, splits on non-alphanumeric characters, drops tokens shorter
/// than two characters and tokens on the built-in English stopword list.
pub fn tokenize(text: &str) -> Vec<String> {
    text.to_lowercase()
        .split(|c: char| !c.is_alphanumeric())
        .filter(|t| t.chars().count() >= 2)
        .filter(|t| !stopwords().contains(t))
        .map(str::to_string)
        .collect()
}

/// A corpus after weighting: the dictionary, one weighted vector per doc,
/// and the per-term global entropy factors (indexed by term id).
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct WeightedCorpus {
    pub dictionary: TermDictionary,
    pub docs: Vec<WeightedDoc>,
    pub global_factors: Vec<f64>,
}

/// Log-entropy weighting over `corpus`, building the dictionary as it goes.
///
/// The weight of term t in doc j is `log2(1 + tf) * g_t` where
/// `g_t = 1 + sum_j p_tj * log2(p_tj) / log2(n)` and `p_tj` is the fraction
/// of t's occurrences falling in doc j. A term spread uniformly over all
/// docs gets `g_t = 0`; a term concentrated in one doc gets `g_t = 1`.
/// With a single document the global factor is defined as 1.
pub fn log_entropy_weights(corpus: &[RawDoc]) -> Result<WeightedCorpus> {
    if corpus.is_empty() {
        return Err(Error::Config("cannot weight an empty corpus".into()));
    }
    let mut seen = HashSet::new();
    for doc in corpus {
        if !seen.insert(doc.id.as_str()) {
            return Err(Error::Config(format!("duplicate doc id {:?}", doc.id)));
        }
    }

    let mut dictionary = TermDictionary::new();
    let mut term_freqs: Vec<HashMap<TermId, u64>> = Vec::with_capacity(corpus.len());
    for doc in corpus {
        let mut tf: HashMap<TermId, u64> = HashMap::new();
        for token in tokenize(&doc.text) {
            *tf.entry(dictionary.get_or_insert(&token)).or_insert(0) += 1;
        }
        term_freqs.push(tf);
    }

    let factors = entropy_factors(&term_freqs, dictionary.len(), corpus.len());
    let docs = corpus
        .iter()
        .zip(&term_freqs)
        .map(|(doc, tf)| WeightedDoc {
            id: doc.id.clone(),
            weights: weigh(tf, &factors),
        })
        .collect();

    Ok(WeightedCorpus { dictionary, docs, global_factors: factors })
}

/// Log-entropy weighting against a fixed dictionary: the entropy factors
/// are computed over `corpus` alone, but term ids come from `dictionary`.
/// Tokens absent from the dictionary are ignored. This is the per-peer
/// weighting mode; the shared mode weights the union corpus once instead.
pub fn log_entropy_with_dictionary(
    corpus: &[RawDoc],
    dictionary: &TermDictionary,
) -> Result<(Vec<WeightedDoc>, Vec<f64>)> {
    if corpus.is_empty() {
        return Err(Error::Config("cannot weight an empty corpus".into()));
    }
    let mut term_freqs: Vec<HashMap<TermId, u64>> = Vec::with_capacity(corpus.len());
    for doc in corpus {
        let mut tf: HashMap<TermId, u64> = HashMap::new();
        for token in tokenize(&doc.text) {
            if let Some(id) = dictionary.id(&token) {
                *tf.entry(id).or_insert(0) += 1;
            }
        }
        term_freqs.push(tf);
    }
    let factors = entropy_factors(&term_freqs, dictionary.len(), corpus.len());
    let docs = corpus
        .iter()
        .zip(&term_freqs)
        .map(|(doc, tf)| WeightedDoc {
            id: doc.id.clone(),
            weights: weigh(tf, &factors),
        })
        .collect();
    Ok((docs, factors))
}

fn entropy_factors(term_freqs: &[HashMap<TermId, u64>], vocab: usize, n_docs: usize) -> Vec<f64> {
    let mut totals = vec![0u64; vocab];
    for tf in term_freqs {
        for (&t, &count) in tf {
            totals[t as usize] += count;
        }
    }
    let mut factors = vec![0.0; vocab];
    if n_docs == 1 {
        for (t, f) in factors.iter_mut().enumerate() {
            *f = if totals[t] > 0 { 1.0 } else { 0.0 };
        }
        return factors;
    }
    let log_n = (n_docs as f64).log2();
    let mut entropy = vec![0.0; vocab];
    for tf in term_freqs {
        for (&t, &count) in tf {
            let p = count as f64 / totals[t as usize] as f64;
            entropy[t as usize] += p * p.log2();
        }
    }
    for t in 0..vocab {
        if totals[t] > 0 {
            factors[t] = 1.0 + entropy[t] / log_n;
        }
    }
    factors
}

fn weigh(tf: &HashMap<TermId, u64>, factors: &[f64]) -> SparseVec {
    let mut entries: Vec<(TermId, f64)> = tf
        .iter()
        .map(|(&t, &count)| (t, (1.0 + count as f64).log2() * factors[t as usize]))
        .filter(|&(_, w)| w != 0.0)
        .collect();
    entries.sort_by_key(|&(t, _)| t);
    SparseVec::new(entries).expect("tf map has unique term ids")
}

/// Vectorizes query text: occurrence count times the global entropy factor
/// per known term, L2-normalized unless the result is all zero. Terms
/// outside the dictionary contribute nothing.
pub fn vectorize_query(
    id: &str,
    text: &str,
    dictionary: &TermDictionary,
    global_factors: &[f64],
) -> Query {
    let mut counts: HashMap<TermId, u64> = HashMap::new();
    for token in tokenize(text) {
        if let Some(t) = dictionary.id(&token) {
            *counts.entry(t).or_insert(0) += 1;
        }
    }
    let mut entries: Vec<(TermId, f64)> = counts
        .into_iter()
        .map(|(t, c)| (t, c as f64 * global_factors[t as usize]))
        .filter(|&(_, w)| w != 0.0)
        .collect();
    entries.sort_by_key(|&(t, _)| t);
    let weights = SparseVec::new(entries).expect("counts map has unique term ids");
    Query {
        id: id.to_string(),
        weights: weights.normalized(),
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn tokenize_lowercases_splits_and_filters() {
        assert_eq!(tokenize("Apple Computer!"), vec!["apple", "computer"]);
        assert_eq!(tokenize("the of and"), Vec::<String>::new());
        assert_eq!(tokenize("MacBook OS X 10"), vec!["macbook", "os", "10"]);
        assert_eq!(tokenize(""), Vec::<String>::new());
    }

    #[test]
    fn tokenize_is_stable_on_its_own_output() {
        let first = tokenize("Routing Tables; route-cache INVALIDATION, 42 ways");
        let second = tokenize(&first.join(" "));
        assert_eq!(first, second);
    }

    #[test]
    fn dictionary_is_bijective_in_first_appearance_order() {
        let mut dict = TermDictionary::new();
        assert_eq!(dict.get_or_insert("alpha"), 0);
        assert_eq!(dict.get_or_insert("beta"), 1);
        assert_eq!(dict.get_or_insert("alpha"), 0);
        assert_eq!(dict.id("beta"), Some(1));
        assert_eq!(dict.term(1), Some("beta"));
        assert_eq!(dict.id("gamma"), None);
        assert_eq!(dict.len(), 2);
    }

    fn doc(id: &str, text: &str) -> RawDoc {
        RawDoc { id: id.into(), text: text.into() }
    }

    #[test]
    fn single_doc_corpus_gets_unit_global_factor() {
        let w = log_entropy_weights(&[doc("d1", "alpha alpha beta")]).unwrap();
        assert_eq!(w.global_factors, vec![1.0, 1.0]);
        let alpha = w.dictionary.id("alpha").unwrap();
        assert!((w.docs[0].weights.get(alpha) - 3.0_f64.log2()).abs() < 1e-12);
    }

    #[test]
    fn uniform_term_weighs_zero_and_concentrated_term_weighs_full() {
        // "common" appears once in each of the two docs: uniform, factor 0.
        // "rare" appears only in the first doc: factor 1.
        let w = log_entropy_weights(&[doc("d1", "common rare"), doc("d2", "common blue")]).unwrap();
        let common = w.dictionary.id("common").unwrap();
        let rare = w.dictionary.id("rare").unwrap();
        assert!((w.global_factors[common as usize]).abs() < 1e-12);
        assert!((w.global_factors[rare as usize] - 1.0).abs() < 1e-12);
        assert_eq!(w.docs[0].weights.get(common), 0.0);
        assert!((w.docs[0].weights.get(rare) - 1.0).abs() < 1e-12);
    }

    #[test]
    fn skewed_split_matches_hand_entropy() {
        // Term frequencies 3 and 1 across two docs:
        // g = 1 + (0.75*log2(0.75) + 0.25*log2(0.25)) / log2(2) = 0.18872188...
        let w = log_entropy_weights(&[
            doc("d1", "gold gold gold"),
            doc("d2", "gold silver"),
        ])
        .unwrap();
        let gold = w.dictionary.id("gold").unwrap();
        let g = w.global_factors[gold as usize];
        assert!((g - 0.188_721_875_540_867_4).abs() < 1e-9, "g = {g}");
        let w1 = w.docs[0].weights.get(gold);
        assert!((w1 - 2.0 * g).abs() < 1e-9, "w1 = {w1}");
    }

    #[test]
    fn duplicate_doc_ids_are_a_config_error() {
        let err = log_entropy_weights(&[doc("d1", "x y"), doc("d1", "z w")]).unwrap_err();
        assert_eq!(err.category(), "config");
        assert_eq!(log_entropy_weights(&[]).unwrap_err().category(), "config");
    }

    #[test]
    fn query_vectorization_normalizes_and_drops_unknowns() {
        let w = log_entropy_weights(&[doc("d1", "alpha beta"), doc("d2", "alpha gamma")]).unwrap();
        let q = vectorize_query("q1", "beta beta unknownterm", &w.dictionary, &w.global_factors);
        let beta = w.dictionary.id("beta").unwrap();
        assert!((q.weights.norm() - 1.0).abs() < 1e-12);
        assert!((q.weights.get(beta) - 1.0).abs() < 1e-12);

        // Two terms with equal factors split the mass evenly.
        let q2 = vectorize_query("q2", "beta gamma", &w.dictionary, &w.global_factors);
        let gamma = w.dictionary.id("gamma").unwrap();
        let inv_sqrt2 = std::f64::consts::FRAC_1_SQRT_2;
        assert!((q2.weights.get(beta) - inv_sqrt2).abs() < 1e-12);
        assert!((q2.weights.get(gamma) - inv_sqrt2).abs() < 1e-12);

        // "alpha" is uniform across the corpus, so its factor is zero and
        // a query of only alphas stays empty rather than normalized.
        let q3 = vectorize_query("q3", "alpha", &w.dictionary, &w.global_factors);
        assert!(q3.weights.is_empty());
    }

    #[test]
    fn qrels_grades_and_relevance() {
        let mut qrels = Qrels::new();
        qrels.insert("q1", "d1", 2);
        qrels.insert("q1", "d2", 0);
        assert!(qrels.is_relevant("q1", "d1"));
        assert!(!qrels.is_relevant("q1", "d2"));
        assert!(!qrels.is_relevant("q1", "d3"));
        assert_eq!(qrels.relevant_count("q1"), 1);
        assert_eq!(qrels.relevant_count("q9"), 0);
    }

    #[test]
    fn stopword_list_is_about_170_words() {
        let n = include_str!("stopwords.txt").split_whitespace().count();
        assert!((150..200).contains(&n), "list has {n} words");
    }
}
