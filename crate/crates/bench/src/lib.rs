//! Fixtures shared by the benchmarks.

use advdoc_core::eval::{embed_documents, EmbeddingSet};
use advdoc_core::synthetic::SyntheticSpec;
use advdoc_core::{Matrix, Rng, TrainConfig};

/// Dense `rows x cols` matrix of standard normals.
pub fn random_matrix(rows: usize, cols: usize, seed: u64) -> Matrix {
    Rng::seed_from_u64(seed).normal_matrix(rows, cols)
}

/// A 0/1 batch shaped like a bag-of-words minibatch with ~`density` ones.
pub fn binary_batch(rows: usize, vocab: usize, density: f64, seed: u64) -> Matrix {
    let mut rng = Rng::seed_from_u64(seed);
    let mut m = Matrix::zeros(rows, vocab);
    for v in m.data_mut() {
        if rng.uniform() < density {
            *v = 1.0;
        }
    }
    m
}

/// 20 Newsgroups layer sizes with a smaller vocabulary so one step stays in the millisecond range.
pub fn step_config(vocab: usize) -> TrainConfig {
    let mut c = TrainConfig::for_vocab(vocab);
    c.validation_size = 0;
    c
}

/// Queries and pool embedded by a freshly initialised model on the synthetic corpus.
pub fn retrieval_sets(pool_docs: usize, query_docs: usize) -> (EmbeddingSet, EmbeddingSet) {
    let spec = SyntheticSpec::default();
    let mut rng = Rng::seed_from_u64(3);
    let dae = advdoc_core::DaeParams::init(spec.vocab_size(), 50, 0.02, &mut rng);
    let pool = embed_documents(&dae, spec.generate(pool_docs, 1).unwrap().docs()).unwrap();
    let queries = embed_documents(&dae, spec.generate(query_docs, 2).unwrap().docs()).unwrap();
    (queries, pool)
}
