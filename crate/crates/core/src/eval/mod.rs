//! Retrieval evaluation, topic words, and embedding export.

mod export;
mod retrieval;
mod topics;

pub use export::{embeddings_from_tsv, embeddings_to_tsv, export_embeddings};
pub use retrieval::{
    cosine, pr_curve, precision_at_fraction, retrieval_count, retrieve, EmbeddingSet, PrCurve,
    DEFAULT_FRACTIONS,
};
pub use topics::{format_topics, top_words_per_unit};

use crate::corpus::LabeledDoc;
use crate::error::{Error, Result};
use crate::model::DaeParams;
use crate::nn::Matrix;

/// Representations of `docs` (uncorrupted), ids `0..N` in input order.
pub fn embed_documents(dae: &DaeParams, docs: &[LabeledDoc]) -> Result<EmbeddingSet> {
    if let Some(d) = docs.iter().find(|d| d.bow.vocab_size() != dae.vocab_size()) {
        return Err(Error::invalid(format!(
            "documents use a vocabulary of {}, model expects {}",
            d.bow.vocab_size(),
            dae.vocab_size()
        )));
    }
    // dense batches of bounded size; a full 20NG-scale pool would be ~180 MB dense
    let mut data = Vec::with_capacity(docs.len() * dae.hidden_size());
    for chunk in docs.chunks(1024) {
        let x = crate::corpus::dense_rows(chunk.iter(), dae.vocab_size());
        data.extend_from_slice(dae.represent(&x)?.data());
    }
    let h = Matrix::from_vec(docs.len(), dae.hidden_size(), data)?;
    EmbeddingSet::new(h, docs.iter().map(|d| d.label).collect())
}
