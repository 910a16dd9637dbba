//! Benchmarks over the engine's hot paths: factorization, clustering, full
//! index construction, and broker-side peer selection.

use criterion::{black_box, criterion_group, criterion_main, Criterion};

use cdlsi::clustering::kmeans;
use cdlsi::corpus::{
    generate_synthetic, log_entropy_weights, vectorize_query, Query, SyntheticParams, WeightedDoc,
};
use cdlsi::eval::{assign_round_robin, mix_seed, peer_name};
use cdlsi::federation::{select_peers, AnyDescriptor, Directory, Strategy};
use cdlsi::linalg::{svd, DenseMatrix, TermId};
use cdlsi::peer::build_index;

fn weighted_corpus() -> (Vec<WeightedDoc>, Vec<Query>) {
    let params = SyntheticParams {
        topics: 10,
        docs_per_topic: 20,
        vocab_per_topic: 30,
        overlap_fraction: 0.2,
        polysemy_terms: 3,
        seed: 9,
    };
    let (docs, queries, _) = generate_synthetic(&params).unwrap();
    let weighted = log_entropy_weights(&docs).unwrap();
    let queries = queries
        .iter()
        .map(|q| vectorize_query(&q.id, &q.text, &weighted.dictionary, &weighted.global_factors))
        .collect();
    (weighted.docs, queries)
}

fn term_doc_matrix(docs: &[WeightedDoc]) -> DenseMatrix {
    let mut terms: Vec<TermId> = docs.iter().flat_map(|d| d.weights.indices()).collect();
    terms.sort_unstable();
    terms.dedup();
    let mut matrix = DenseMatrix::zeros(terms.len(), docs.len()).unwrap();
    for (j, d) in docs.iter().enumerate() {
        for (t, w) in d.weights.iter() {
            matrix.set(terms.binary_search(&t).unwrap(), j, w);
        }
    }
    matrix
}

fn bench_svd(c: &mut Criterion) {
    let (docs, _) = weighted_corpus();
    let matrix = term_doc_matrix(&docs[..40]);
    c.bench_function("svd_term_doc_40", |b| b.iter(|| svd(black_box(&matrix)).unwrap()));
}

fn bench_kmeans(c: &mut Criterion) {
    let (docs, _) = weighted_corpus();
    let normalized: Vec<WeightedDoc> = docs
        .iter()
        .map(|d| WeightedDoc { id: d.id.clone(), weights: d.weights.normalized() })
        .collect();
    c.bench_function("kmeans_200_docs_k20", |b| {
        b.iter(|| kmeans(black_box(&normalized), 20, 9, 40).unwrap())
    });
}

fn bench_build_index(c: &mut Criterion) {
    let (docs, _) = weighted_corpus();
    let share = &docs[..20];
    c.bench_function("build_index_20_docs_k4", |b| {
        b.iter(|| build_index("p0", black_box(share), 4, 0.5, 0.05, 7).unwrap())
    });
}

fn bench_select_peers(c: &mut Criterion) {
    let (docs, queries) = weighted_corpus();
    let shares = assign_round_robin(&docs, 10).unwrap();
    let mut directory = Directory::new();
    for (i, share) in shares.iter().enumerate() {
        let mut index =
            build_index(&peer_name(i), share, 4, 0.5, 0.05, mix_seed(9, i as u64)).unwrap();
        directory.publish(AnyDescriptor::Cdlsi(index.make_descriptor())).unwrap();
    }
    let q = &queries[0];
    c.bench_function("select_peers_10_peer_directory", |b| {
        b.iter(|| select_peers(black_box(&directory), Strategy::Cdlsi, q, 5, 10).unwrap())
    });
}

criterion_group!(benches, bench_svd, bench_kmeans, bench_build_index, bench_select_peers);
criterion_main!(benches);
