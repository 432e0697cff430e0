//! Labeled bag-of-words corpora.
//!
//! On disk a corpus is three UTF-8 files:
//!
//! - vocabulary: one token per line, the 0-based line number is the word id;
//! - labels: one label name per line, the line number is the label id;
//! - documents: one document per line,
//!   `<label_id>\t<word_id>:<count> <word_id>:<count> ...`, word ids strictly
//!   increasing, single spaces between entries, an empty word list allowed,
//!   and every line (including the last) newline-terminated.
//!
//! Integers are decimal without leading zeros. Counts are accepted and then
//! discarded: documents are held as binary presence vectors.

use std::collections::HashSet;
use std::fmt::Write as _;

use crate::error::{Error, Result};
use crate::nn::{Matrix, Rng};

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Vocabulary {
    tokens: Vec<String>,
}

impl Vocabulary {
    pub fn new(tokens: Vec<String>) -> Result<Self> {
        if tokens.is_empty() {
            return Err(Error::invalid("empty vocabulary"));
        }
        let mut seen = HashSet::with_capacity(tokens.len());
        for (i, t) in tokens.iter().enumerate() {
            if !seen.insert(t.as_str()) {
                return Err(Error::parse(i + 1, format!("duplicate token {t:?}")));
            }
        }
        Ok(Vocabulary { tokens })
    }

    pub fn parse(text: &str) -> Result<Self> {
        let tokens = parse_lines(text, "token")?;
        if tokens.is_empty() {
            return Err(Error::invalid("empty vocabulary"));
        }
        Self::new(tokens)
    }

    pub fn len(&self) -> usize {
        self.tokens.len()
    }

    pub fn is_empty(&self) -> bool {
        self.tokens.is_empty()
    }

    pub fn token(&self, id: usize) -> &str {
        &self.tokens[id]
    }

    pub fn tokens(&self) -> &[String] {
        &self.tokens
    }

    pub fn to_text(&self) -> String {
        join_lines(&self.tokens)
    }
}

/// Sparse word counts of one document, ids strictly increasing.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct SparseCounts {
    entries: Vec<(usize, u64)>,
}

impl SparseCounts {
    pub fn new(entries: Vec<(usize, u64)>, vocab_size: usize) -> Result<Self> {
        for (k, &(id, count)) in entries.iter().enumerate() {
            if id >= vocab_size {
                return Err(Error::invalid(format!(
                    "word id {id} out of range for vocabulary of {vocab_size}"
                )));
            }
            if count == 0 {
                return Err(Error::invalid(format!("zero count for word id {id}")));
            }
            if k > 0 && entries[k - 1].0 >= id {
                return Err(Error::invalid("word ids must be strictly increasing"));
            }
        }
        Ok(SparseCounts { entries })
    }

    pub fn entries(&self) -> &[(usize, u64)] {
        &self.entries
    }
}

/// Binary presence vector over a vocabulary, stored as the sorted set of present ids.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct BinaryBow {
    ids: Vec<usize>,
    vocab_size: usize,
}

impl BinaryBow {
    /// Sorts and deduplicates `ids`.
    pub fn from_ids(mut ids: Vec<usize>, vocab_size: usize) -> Result<Self> {
        ids.sort_unstable();
        ids.dedup();
        if let Some(&last) = ids.last() {
            if last >= vocab_size {
                return Err(Error::invalid(format!(
                    "word id {last} out of range for vocabulary of {vocab_size}"
                )));
            }
        }
        Ok(BinaryBow { ids, vocab_size })
    }

    /// Presence of any element `> 0`. A dense input that is already binary maps to itself.
    pub fn from_dense(values: &[f64]) -> Self {
        BinaryBow {
            ids: values
                .iter()
                .enumerate()
                .filter(|(_, &v)| v > 0.0)
                .map(|(i, _)| i)
                .collect(),
            vocab_size: values.len(),
        }
    }

    pub fn ids(&self) -> &[usize] {
        &self.ids
    }

    pub fn vocab_size(&self) -> usize {
        self.vocab_size
    }

    pub fn to_dense(&self) -> Vec<f64> {
        let mut dense = vec![0.0; self.vocab_size];
        self.write_dense(&mut dense);
        dense
    }

    fn write_dense(&self, out: &mut [f64]) {
        for &i in &self.ids {
            out[i] = 1.0;
        }
    }
}

/// Word `i` is present iff it has a positive count; magnitudes are dropped.
pub fn binarize(counts: &SparseCounts, vocab_size: usize) -> BinaryBow {
    BinaryBow {
        ids: counts.entries.iter().map(|&(id, _)| id).collect(),
        vocab_size,
    }
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct LabeledDoc {
    pub bow: BinaryBow,
    pub label: usize,
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Corpus {
    vocab: Vocabulary,
    label_names: Vec<String>,
    docs: Vec<LabeledDoc>,
}

impl Corpus {
    pub fn new(vocab: Vocabulary, label_names: Vec<String>, docs: Vec<LabeledDoc>) -> Result<Self> {
        for (i, d) in docs.iter().enumerate() {
            if d.bow.vocab_size != vocab.len() {
                return Err(Error::invalid(format!(
                    "document {i} built for vocabulary of {}, corpus has {}",
                    d.bow.vocab_size,
                    vocab.len()
                )));
            }
            if d.label >= label_names.len() {
                return Err(Error::invalid(format!(
                    "document {i} has unknown label {}",
                    d.label
                )));
            }
        }
        Ok(Corpus {
            vocab,
            label_names,
            docs,
        })
    }

    /// Parses the three-file format. Document order follows file order.
    pub fn parse(vocab_text: &str, labels_text: &str, docs_text: &str) -> Result<Self> {
        let vocab = Vocabulary::parse(vocab_text)?;
        let label_names = parse_lines(labels_text, "label")?;
        let docs = parse_documents(docs_text, vocab.len(), Some(label_names.len()))?;
        Ok(Corpus {
            vocab,
            label_names,
            docs,
        })
    }

    pub fn vocab(&self) -> &Vocabulary {
        &self.vocab
    }

    pub fn vocab_size(&self) -> usize {
        self.vocab.len()
    }

    pub fn label_names(&self) -> &[String] {
        &self.label_names
    }

    pub fn num_labels(&self) -> usize {
        self.label_names.len()
    }

    pub fn docs(&self) -> &[LabeledDoc] {
        &self.docs
    }

    pub fn len(&self) -> usize {
        self.docs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.docs.is_empty()
    }

    pub fn labels(&self) -> Vec<usize> {
        self.docs.iter().map(|d| d.label).collect()
    }

    /// Same vocabulary and labels, a subset of the documents.
    pub fn subset(&self, indices: &[usize]) -> Corpus {
        Corpus {
            vocab: self.vocab.clone(),
            label_names: self.label_names.clone(),
            docs: indices.iter().map(|&i| self.docs[i].clone()).collect(),
        }
    }

    /// Dense `(indices.len() × V)` batch of the selected documents.
    pub fn dense_batch(&self, indices: &[usize]) -> Matrix {
        dense_rows(indices.iter().map(|&i| &self.docs[i]), self.vocab_size())
    }

    pub fn dense(&self) -> Matrix {
        dense_rows(self.docs.iter(), self.vocab_size())
    }

    pub fn docs_text(&self) -> String {
        documents_to_text(&self.docs)
    }

    pub fn labels_text(&self) -> String {
        join_lines(&self.label_names)
    }
}

pub fn dense_rows<'a>(
    docs: impl ExactSizeIterator<Item = &'a LabeledDoc>,
    vocab_size: usize,
) -> Matrix {
    let rows = docs.len();
    let mut m = Matrix::zeros(rows, vocab_size);
    for (r, d) in docs.enumerate() {
        d.bow.write_dense(m.row_mut(r));
    }
    m
}

/// Writes documents in the file format with every count set to 1.
pub fn documents_to_text(docs: &[LabeledDoc]) -> String {
    let mut out = String::new();
    for d in docs {
        write!(out, "{}\t", d.label).unwrap();
        for (k, id) in d.bow.ids.iter().enumerate() {
            if k > 0 {
                out.push(' ');
            }
            write!(out, "{id}:1").unwrap();
        }
        out.push('\n');
    }
    out
}

/// Parses a documents file. With `num_labels` set, labels are range-checked.
pub fn parse_documents(
    text: &str,
    vocab_size: usize,
    num_labels: Option<usize>,
) -> Result<Vec<LabeledDoc>> {
    if text.is_empty() {
        return Ok(Vec::new());
    }
    let Some(body) = text.strip_suffix('\n') else {
        let line = text.lines().count();
        return Err(Error::parse(line, "missing trailing newline"));
    };
    body.split('\n')
        .enumerate()
        .map(|(i, line)| {
            parse_document_line(line, vocab_size, num_labels)
                .map_err(|msg| Error::parse(i + 1, msg))
        })
        .collect()
}

fn parse_document_line(
    line: &str,
    vocab_size: usize,
    num_labels: Option<usize>,
) -> Result<LabeledDoc, String> {
    let (label, words) = line.split_once('\t').ok_or("expected <label>\\t<words>")?;
    let label = parse_uint(label).map_err(|e| format!("label: {e}"))? as usize;
    if let Some(n) = num_labels {
        if label >= n {
            return Err(format!("unknown label id {label} ({n} labels)"));
        }
    }
    let mut entries = Vec::new();
    if !words.is_empty() {
        for item in words.split(' ') {
            let (id, count) = item
                .split_once(':')
                .ok_or_else(|| format!("expected <id>:<count>, got {item:?}"))?;
            let id = parse_uint(id).map_err(|e| format!("word id: {e}"))? as usize;
            let count = parse_uint(count).map_err(|e| format!("count: {e}"))?;
            if id >= vocab_size {
                return Err(format!(
                    "word id {id} out of range for vocabulary of {vocab_size}"
                ));
            }
            if count == 0 {
                return Err(format!("zero count for word id {id}"));
            }
            if let Some(&(prev, _)) = entries.last() {
                if prev >= id {
                    return Err(format!("non-increasing word ids {prev} then {id}"));
                }
            }
            entries.push((id, count));
        }
    }
    let counts = SparseCounts { entries };
    Ok(LabeledDoc {
        bow: binarize(&counts, vocab_size),
        label,
    })
}

fn parse_uint(s: &str) -> Result<u64, String> {
    if s.is_empty() {
        return Err("empty integer".into());
    }
    if !s.bytes().all(|b| b.is_ascii_digit()) {
        return Err(format!("not a decimal integer: {s:?}"));
    }
    if s.len() > 1 && s.starts_with('0') {
        return Err(format!("leading zero in {s:?}"));
    }
    s.parse()
        .map_err(|_| format!("integer out of range: {s:?}"))
}

/// One non-empty entry per line; a final trailing newline is optional.
fn parse_lines(text: &str, what: &str) -> Result<Vec<String>> {
    let body = text.strip_suffix('\n').unwrap_or(text);
    if body.is_empty() {
        return Ok(Vec::new());
    }
    body.split('\n')
        .enumerate()
        .map(|(i, l)| {
            let l = l.strip_suffix('\r').unwrap_or(l);
            if l.is_empty() {
                Err(Error::parse(i + 1, format!("empty {what}")))
            } else {
                Ok(l.to_string())
            }
        })
        .collect()
}

fn join_lines(items: &[String]) -> String {
    let mut out = String::new();
    for t in items {
        out.push_str(t);
        out.push('\n');
    }
    out
}

/// Splits `n` documents off as a validation set, uniformly without replacement.
///
/// Uses stream 1 of `seed` so it does not share draws with training. Both
/// outputs keep the input's relative document order.
pub fn carve_validation(train: &Corpus, n: usize, seed: u64) -> Result<(Corpus, Corpus)> {
    if n >= train.len() && n > 0 {
        return Err(Error::invalid(format!(
            "validation size {n} must be smaller than the corpus ({} docs)",
            train.len()
        )));
    }
    let mut rng = Rng::with_stream(seed, 1);
    let mut picked = rng.sample_indices(train.len(), n);
    picked.sort_unstable();
    let mut is_valid = vec![false; train.len()];
    for &i in &picked {
        is_valid[i] = true;
    }
    let rest: Vec<usize> = (0..train.len()).filter(|&i| !is_valid[i]).collect();
    Ok((train.subset(&rest), train.subset(&picked)))
}

#[cfg(test)]
mod tests {
    use super::*;

    const VOCAB: &str = "apple\nbanana\ncherry\ndate\n";
    const LABELS: &str = "fruit\nveg\n";

    #[test]
    fn parses_document_line() {
        let c = Corpus::parse(VOCAB, LABELS, "1\t0:2 3:1\n").unwrap();
        assert_eq!(c.docs()[0].label, 1);
        assert_eq!(c.docs()[0].bow.ids(), &[0, 3]);
    }

    #[test]
    fn empty_word_list_is_allowed() {
        let c = Corpus::parse(VOCAB, LABELS, "0\t\n").unwrap();
        assert!(c.docs()[0].bow.ids().is_empty());
        assert_eq!(c.dense().data(), &[0.0; 4]);
    }

    #[test]
    fn parse_errors_carry_line_numbers() {
        let cases = [
            ("0\t0:1\n0\t3:1 1:2\n", 2, "non-increasing"),
            ("0\t4:1\n", 1, "out of range"),
            ("2\t0:1\n", 1, "unknown label"),
            ("0\t1:1 1:1\n", 1, "non-increasing"),
            ("0 1:1\n", 1, "expected"),
            ("0\t01:1\n", 1, "leading zero"),
            ("0\t1:0\n", 1, "zero count"),
            ("0\t1:1  2:1\n", 1, "expected"),
            ("0\t1:1", 1, "trailing newline"),
        ];
        for (docs, line, needle) in cases {
            match Corpus::parse(VOCAB, LABELS, docs) {
                Err(Error::Parse { line: l, msg }) => {
                    assert_eq!(l, line, "{docs:?}");
                    assert!(msg.contains(needle), "{docs:?}: {msg}");
                }
                other => panic!("{docs:?}: {other:?}"),
            }
        }
    }

    #[test]
    fn vocabulary_errors() {
        assert!(Corpus::parse("", LABELS, "").is_err());
        assert!(Vocabulary::parse("a\nb\na\n").is_err());
        assert!(Vocabulary::parse("a\n\nb\n").is_err());
        assert_eq!(Vocabulary::parse("a\nb").unwrap().len(), 2);
    }

    #[test]
    fn binarize_examples() {
        let c = SparseCounts::new(vec![(0, 3), (5, 1)], 8).unwrap();
        assert_eq!(
            binarize(&c, 8).to_dense(),
            vec![1.0, 0.0, 0.0, 0.0, 0.0, 1.0, 0.0, 0.0]
        );
        let empty = SparseCounts::new(vec![], 8).unwrap();
        assert_eq!(binarize(&empty, 8).to_dense(), vec![0.0; 8]);
        let big = SparseCounts::new(vec![(7, 100)], 8).unwrap();
        let dense = binarize(&big, 8).to_dense();
        assert_eq!(dense[7], 1.0);
        assert_eq!(dense.iter().sum::<f64>(), 1.0);
        assert!(SparseCounts::new(vec![(8, 1)], 8).is_err());
        assert!(SparseCounts::new(vec![(2, 1), (1, 1)], 8).is_err());
    }

    #[test]
    fn binarize_is_idempotent() {
        let bow = BinaryBow::from_ids(vec![4, 1, 1, 6], 8).unwrap();
        let dense = bow.to_dense();
        assert_eq!(BinaryBow::from_dense(&dense), bow);
        assert_eq!(BinaryBow::from_dense(&dense).to_dense(), dense);
    }

    #[test]
    fn serialize_round_trip() {
        let docs = "1\t0:2 3:1\n0\t\n0\t1:7 2:1 3:9\n";
        let c = Corpus::parse(VOCAB, LABELS, docs).unwrap();
        let again = Corpus::parse(&c.vocab().to_text(), &c.labels_text(), &c.docs_text()).unwrap();
        assert_eq!(again, c);
        assert_eq!(c.docs_text(), "1\t0:1 3:1\n0\t\n0\t1:1 2:1 3:1\n");
    }

    fn numbered_corpus(n: usize) -> Corpus {
        let vocab = Vocabulary::new((0..n).map(|i| format!("w{i}")).collect()).unwrap();
        let docs = (0..n)
            .map(|i| LabeledDoc {
                bow: BinaryBow::from_ids(vec![i], n).unwrap(),
                label: i % 3,
            })
            .collect();
        Corpus::new(vocab, vec!["a".into(), "b".into(), "c".into()], docs).unwrap()
    }

    #[test]
    fn carve_validation_partitions() {
        let c = numbered_corpus(50);
        let (rest, valid) = carve_validation(&c, 12, 7).unwrap();
        assert_eq!((rest.len(), valid.len()), (38, 12));
        let mut all: Vec<usize> = rest
            .docs()
            .iter()
            .chain(valid.docs())
            .map(|d| d.bow.ids()[0])
            .collect();
        all.sort_unstable();
        assert_eq!(all, (0..50).collect::<Vec<_>>());

        let (rest2, valid2) = carve_validation(&c, 12, 7).unwrap();
        assert_eq!((rest2, valid2), (rest, valid.clone()));
        let (_, valid3) = carve_validation(&c, 12, 8).unwrap();
        assert_ne!(valid3, valid);
    }

    #[test]
    fn carve_validation_edges() {
        let c = numbered_corpus(10);
        let (rest, valid) = carve_validation(&c, 0, 1).unwrap();
        assert_eq!(rest, c);
        assert!(valid.is_empty());
        assert!(carve_validation(&c, 10, 1).is_err());
    }

    #[test]
    fn carve_full_scale_split_sizes() {
        let c = numbered_corpus(11_314);
        let (rest, valid) = carve_validation(&c, 1000, 3).unwrap();
        assert_eq!((rest.len(), valid.len()), (10_314, 1000));
    }
}
