use std::fmt::Write as _;

use crate::corpus::Vocabulary;
use crate::error::{Error, Result};
use crate::model::DaeParams;

/// The `k` words with the largest absolute encoder weight into hidden `unit`,
/// as `(word, signed weight)`. Ties go to the lower word id.
pub fn top_words_per_unit(
    dae: &DaeParams,
    vocab: &Vocabulary,
    unit: usize,
    k: usize,
) -> Result<Vec<(String, f64)>> {
    if vocab.len() != dae.vocab_size() {
        return Err(Error::invalid(format!(
            "vocabulary has {} words, model expects {}",
            vocab.len(),
            dae.vocab_size()
        )));
    }
    if unit >= dae.hidden_size() {
        return Err(Error::invalid(format!(
            "unit {unit} out of range ({} hidden units)",
            dae.hidden_size()
        )));
    }
    if k > vocab.len() {
        return Err(Error::invalid(format!(
            "k = {k} exceeds vocabulary size {}",
            vocab.len()
        )));
    }
    let row = dae.encoder.weight.row(unit);
    let mut order: Vec<usize> = (0..row.len()).collect();
    order.sort_by(|&a, &b| row[b].abs().total_cmp(&row[a].abs()).then(a.cmp(&b)));
    Ok(order
        .into_iter()
        .take(k)
        .map(|i| (vocab.token(i).to_string(), row[i]))
        .collect())
}

/// One block per hidden unit: a `unit <id>` header followed by `k` lines of
/// `<word>\t<weight>` with the weight printed as `{:+.6}`.
pub fn format_topics(dae: &DaeParams, vocab: &Vocabulary, k: usize) -> Result<String> {
    let mut out = String::new();
    for unit in 0..dae.hidden_size() {
        writeln!(out, "unit {unit}").unwrap();
        for (word, w) in top_words_per_unit(dae, vocab, unit, k)? {
            writeln!(out, "{word}\t{w:+.6}").unwrap();
        }
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn fixture() -> (DaeParams, Vocabulary) {
        let mut dae = DaeParams::zeros(3, 2, 0.02);
        dae.encoder
            .weight
            .row_mut(0)
            .copy_from_slice(&[0.5, -0.9, 0.1]);
        dae.encoder
            .weight
            .row_mut(1)
            .copy_from_slice(&[0.2, -0.2, 0.3]);
        let vocab = Vocabulary::new(vec!["word0".into(), "word1".into(), "word2".into()]).unwrap();
        (dae, vocab)
    }

    #[test]
    fn ranks_by_absolute_weight() {
        let (dae, vocab) = fixture();
        let top = top_words_per_unit(&dae, &vocab, 0, 2).unwrap();
        assert_eq!(
            top,
            vec![("word1".to_string(), -0.9), ("word0".to_string(), 0.5)]
        );
    }

    #[test]
    fn ties_go_to_lower_id_and_full_k_is_permutation() {
        let (dae, vocab) = fixture();
        let top: Vec<String> = top_words_per_unit(&dae, &vocab, 1, 3)
            .unwrap()
            .into_iter()
            .map(|(w, _)| w)
            .collect();
        assert_eq!(top, vec!["word2", "word0", "word1"]);
    }

    #[test]
    fn range_errors() {
        let (dae, vocab) = fixture();
        assert!(top_words_per_unit(&dae, &vocab, 2, 1).is_err());
        assert!(top_words_per_unit(&dae, &vocab, 0, 4).is_err());
    }

    #[test]
    fn formatted_output() {
        let (dae, vocab) = fixture();
        assert_eq!(
            format_topics(&dae, &vocab, 2).unwrap(),
            "unit 0\nword1\t-0.900000\nword0\t+0.500000\nunit 1\nword2\t+0.300000\nword0\t+0.200000\n"
        );
        assert_eq!(format_topics(&dae, &vocab, 0).unwrap(), "unit 0\nunit 1\n");
    }
}
