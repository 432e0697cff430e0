use std::fmt::Write as _;
use std::path::Path;

use super::EmbeddingSet;
use crate::error::{Error, Result};
use crate::nn::Matrix;

/// TSV with header `doc_id\tlabel\th0\t...\th{d-1}`, one row per document in
/// set order, floats in 17-significant-digit scientific notation.
pub fn embeddings_to_tsv(set: &EmbeddingSet) -> String {
    let mut out = String::from("doc_id\tlabel");
    for j in 0..set.dim() {
        write!(out, "\th{j}").unwrap();
    }
    out.push('\n');
    for r in 0..set.len() {
        write!(out, "{}\t{}", set.doc_ids[r], set.labels[r]).unwrap();
        for v in set.h.row(r) {
            write!(out, "\t{v:.16e}").unwrap();
        }
        out.push('\n');
    }
    out
}

pub fn export_embeddings(set: &EmbeddingSet, path: impl AsRef<Path>) -> Result<()> {
    std::fs::write(path, embeddings_to_tsv(set))?;
    Ok(())
}

pub fn embeddings_from_tsv(text: &str) -> Result<EmbeddingSet> {
    let mut lines = text.lines().enumerate();
    let (_, header) = lines
        .next()
        .ok_or_else(|| Error::parse(1, "missing header"))?;
    let cols: Vec<&str> = header.split('\t').collect();
    if cols.len() < 2 || cols[0] != "doc_id" || cols[1] != "label" {
        return Err(Error::parse(1, "header must start with doc_id\\tlabel"));
    }
    let dim = cols.len() - 2;
    let mut ids = Vec::new();
    let mut labels = Vec::new();
    let mut data = Vec::new();
    for (i, line) in lines {
        let fields: Vec<&str> = line.split('\t').collect();
        if fields.len() != dim + 2 {
            return Err(Error::parse(
                i + 1,
                format!("expected {} fields, got {}", dim + 2, fields.len()),
            ));
        }
        let int = |s: &str| {
            s.parse::<usize>()
                .map_err(|_| Error::parse(i + 1, format!("bad integer {s:?}")))
        };
        ids.push(int(fields[0])?);
        labels.push(int(fields[1])?);
        for f in &fields[2..] {
            data.push(
                f.parse::<f64>()
                    .map_err(|_| Error::parse(i + 1, format!("bad float {f:?}")))?,
            );
        }
    }
    EmbeddingSet::with_ids(Matrix::from_vec(ids.len(), dim, data)?, labels, ids)
}
