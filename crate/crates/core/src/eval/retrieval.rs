use std::cmp::Ordering;

use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::nn::{dot, Matrix};

/// Retrieval fractions reported by default.
pub const DEFAULT_FRACTIONS: [f64; 10] =
    [0.0002, 0.001, 0.002, 0.005, 0.01, 0.02, 0.05, 0.1, 0.2, 0.5];

/// Document representations with their labels and ids.
#[derive(Clone, Debug, PartialEq)]
pub struct EmbeddingSet {
    pub h: Matrix,
    pub labels: Vec<usize>,
    pub doc_ids: Vec<usize>,
}

impl EmbeddingSet {
    /// Ids default to `0..N`.
    pub fn new(h: Matrix, labels: Vec<usize>) -> Result<Self> {
        let ids = (0..h.rows()).collect();
        Self::with_ids(h, labels, ids)
    }

    pub fn with_ids(h: Matrix, labels: Vec<usize>, doc_ids: Vec<usize>) -> Result<Self> {
        if labels.len() != h.rows() || doc_ids.len() != h.rows() {
            return Err(Error::invalid(format!(
                "{} embeddings but {} labels and {} ids",
                h.rows(),
                labels.len(),
                doc_ids.len()
            )));
        }
        h.ensure_finite("embeddings")?;
        Ok(EmbeddingSet { h, labels, doc_ids })
    }

    pub fn len(&self) -> usize {
        self.h.rows()
    }

    pub fn is_empty(&self) -> bool {
        self.h.rows() == 0
    }

    pub fn dim(&self) -> usize {
        self.h.cols()
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct PrCurve {
    pub fractions: Vec<f64>,
    pub precisions: Vec<f64>,
}

impl PrCurve {
    /// `fraction<TAB>precision` rows.
    pub fn to_tsv(&self) -> String {
        self.fractions
            .iter()
            .zip(&self.precisions)
            .map(|(f, p)| format!("{f}\t{p}\n"))
            .collect()
    }

    /// Mean precision over points with fraction `<= max_fraction`.
    pub fn mean_precision_up_to(&self, max_fraction: f64) -> f64 {
        let picked: Vec<f64> = self
            .fractions
            .iter()
            .zip(&self.precisions)
            .filter(|(f, _)| **f <= max_fraction)
            .map(|(_, p)| *p)
            .collect();
        if picked.is_empty() {
            return 0.0;
        }
        picked.iter().sum::<f64>() / picked.len() as f64
    }
}

fn norm(a: &[f64]) -> f64 {
    dot(a, a).sqrt()
}

/// `a·b / (‖a‖‖b‖)`, or 0 when either vector is zero.
pub fn cosine(a: &[f64], b: &[f64]) -> Result<f64> {
    if a.len() != b.len() {
        return Err(Error::ShapeMismatch {
            op: "cosine",
            left: (1, a.len()),
            right: (1, b.len()),
        });
    }
    Ok(cosine_with_norms(a, norm(a), b, norm(b)))
}

fn cosine_with_norms(a: &[f64], na: f64, b: &[f64], nb: f64) -> f64 {
    if na == 0.0 || nb == 0.0 {
        return 0.0;
    }
    // + 0.0 maps -0.0 to 0.0
    dot(a, b) / (na * nb) + 0.0
}

/// Descending score, ascending id. Scores are finite.
fn rank_order(a: &Scored, b: &Scored) -> Ordering {
    b.0.partial_cmp(&a.0)
        .unwrap_or(Ordering::Equal)
        .then(a.1.cmp(&b.1))
}

fn pool_norms(pool: &EmbeddingSet) -> Vec<f64> {
    pool.h.row_iter().map(norm).collect()
}

/// `(score, doc_id, label)`
type Scored = (f64, usize, usize);

/// Top-`k` pool entries, best first.
fn top_k(query: &[f64], pool: &EmbeddingSet, norms: &[f64], k: usize) -> Vec<Scored> {
    let nq = norm(query);
    let mut scored: Vec<Scored> = pool
        .h
        .row_iter()
        .zip(norms)
        .enumerate()
        .map(|(i, (row, &nr))| {
            (
                cosine_with_norms(query, nq, row, nr),
                pool.doc_ids[i],
                pool.labels[i],
            )
        })
        .collect();
    if k < scored.len() {
        scored.select_nth_unstable_by(k - 1, rank_order);
        scored.truncate(k);
    }
    scored.sort_unstable_by(rank_order);
    scored
}

/// Doc ids of the `k` pool entries most cosine-similar to `query`; ties by ascending id.
pub fn retrieve(query: &[f64], pool: &EmbeddingSet, k: usize) -> Result<Vec<usize>> {
    if k == 0 || k > pool.len() {
        return Err(Error::invalid(format!(
            "k = {k} outside 1..={}",
            pool.len()
        )));
    }
    if query.len() != pool.dim() {
        return Err(Error::ShapeMismatch {
            op: "retrieve",
            left: (1, query.len()),
            right: pool.h.shape(),
        });
    }
    let norms = pool_norms(pool);
    Ok(top_k(query, pool, &norms, k)
        .into_iter()
        .map(|(_, id, _)| id)
        .collect())
}

/// Number of documents returned at `fraction` of a pool of `pool_size`:
/// `max(1, floor(fraction · pool_size))`.
pub fn retrieval_count(fraction: f64, pool_size: usize) -> usize {
    ((fraction * pool_size as f64).floor() as usize).clamp(1, pool_size.max(1))
}

/// Mean over queries of the same-label rate among the top `k` retrieved pool
/// documents. Queries are scored in parallel; the mean is summed in query order.
pub fn precision_at_fraction(
    queries: &EmbeddingSet,
    pool: &EmbeddingSet,
    fraction: f64,
) -> Result<f64> {
    Ok(pr_curve(queries, pool, &[fraction])?.precisions[0])
}

/// Precision at each retrieval fraction. Each query is ranked once against the
/// pool for the largest `k` and the prefix counts are read off.
pub fn pr_curve(queries: &EmbeddingSet, pool: &EmbeddingSet, fractions: &[f64]) -> Result<PrCurve> {
    if queries.is_empty() {
        return Err(Error::invalid("empty query set"));
    }
    if pool.is_empty() {
        return Err(Error::invalid("empty pool"));
    }
    if queries.dim() != pool.dim() {
        return Err(Error::ShapeMismatch {
            op: "precision_at_fraction",
            left: queries.h.shape(),
            right: pool.h.shape(),
        });
    }
    for (i, &f) in fractions.iter().enumerate() {
        if !(f > 0.0 && f <= 1.0) {
            return Err(Error::invalid(format!("fraction {f} outside (0, 1]")));
        }
        if i > 0 && fractions[i - 1] >= f {
            return Err(Error::invalid("fractions must be strictly ascending"));
        }
    }
    if fractions.is_empty() {
        return Ok(PrCurve {
            fractions: vec![],
            precisions: vec![],
        });
    }
    let ks: Vec<usize> = fractions
        .iter()
        .map(|&f| retrieval_count(f, pool.len()))
        .collect();
    let k_max = *ks.iter().max().unwrap();
    let norms = pool_norms(pool);

    let per_query: Vec<Vec<f64>> = (0..queries.len())
        .into_par_iter()
        .map(|q| {
            let ranked = top_k(queries.h.row(q), pool, &norms, k_max);
            let target = queries.labels[q];
            let mut hits = Vec::with_capacity(k_max + 1);
            hits.push(0usize);
            for &(_, _, label) in &ranked {
                let prev = *hits.last().unwrap();
                hits.push(prev + usize::from(label == target));
            }
            ks.iter().map(|&k| hits[k] as f64 / k as f64).collect()
        })
        .collect();

    let n = queries.len() as f64;
    let precisions = (0..fractions.len())
        .map(|j| per_query.iter().map(|p| p[j]).sum::<f64>() / n)
        .collect();
    Ok(PrCurve {
        fractions: fractions.to_vec(),
        precisions,
    })
}
