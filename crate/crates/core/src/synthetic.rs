//! Planted-topic corpora for end-to-end checks.
//!
//! Every label owns a block of exclusive words that its documents use with
//! high probability; the remaining noise words are shared by all labels.
//! Word ids are laid out as `[label 0 block][label 1 block]...[noise block]`.

use crate::corpus::{BinaryBow, Corpus, LabeledDoc, Vocabulary};
use crate::error::{Error, Result};
use crate::nn::Rng;

#[derive(Clone, Debug, PartialEq)]
pub struct SyntheticSpec {
    pub num_labels: usize,
    pub words_per_label: usize,
    pub noise_words: usize,
    /// Probability a document uses each of its own label's words.
    pub p_own: f64,
    /// Probability a document uses each word owned by another label.
    pub p_other: f64,
    /// Probability a document uses each shared noise word.
    pub p_noise: f64,
}

impl Default for SyntheticSpec {
    /// 3 labels × 15 exclusive words plus 15 noise words, V = 60.
    fn default() -> Self {
        SyntheticSpec {
            num_labels: 3,
            words_per_label: 15,
            noise_words: 15,
            p_own: 0.35,
            p_other: 0.03,
            p_noise: 0.25,
        }
    }
}

impl SyntheticSpec {
    pub fn vocab_size(&self) -> usize {
        self.num_labels * self.words_per_label + self.noise_words
    }

    /// The label owning word `id`, or `None` for noise words.
    pub fn owner(&self, id: usize) -> Option<usize> {
        let owned = self.num_labels * self.words_per_label;
        (id < owned).then(|| id / self.words_per_label)
    }

    pub fn vocabulary(&self) -> Vocabulary {
        let mut tokens = Vec::with_capacity(self.vocab_size());
        for label in 0..self.num_labels {
            for w in 0..self.words_per_label {
                tokens.push(format!("t{label}w{w:02}"));
            }
        }
        for w in 0..self.noise_words {
            tokens.push(format!("noise{w:02}"));
        }
        Vocabulary::new(tokens).expect("generated tokens are unique")
    }

    pub fn label_names(&self) -> Vec<String> {
        (0..self.num_labels).map(|l| format!("topic{l}")).collect()
    }

    fn validate(&self) -> Result<()> {
        if self.num_labels == 0 || self.words_per_label == 0 {
            return Err(Error::invalid(
                "synthetic corpus needs labels and owned words",
            ));
        }
        for p in [self.p_own, self.p_other, self.p_noise] {
            if !(0.0..=1.0).contains(&p) {
                return Err(Error::invalid(format!(
                    "word probability {p} outside [0, 1]"
                )));
            }
        }
        Ok(())
    }

    /// `n` documents with labels assigned round-robin.
    pub fn generate(&self, n: usize, seed: u64) -> Result<Corpus> {
        self.validate()?;
        let mut rng = Rng::seed_from_u64(seed);
        let v = self.vocab_size();
        let mut docs = Vec::with_capacity(n);
        for i in 0..n {
            let label = i % self.num_labels;
            let mut ids = Vec::new();
            for id in 0..v {
                let p = match self.owner(id) {
                    Some(l) if l == label => self.p_own,
                    Some(_) => self.p_other,
                    None => self.p_noise,
                };
                if rng.uniform() < p {
                    ids.push(id);
                }
            }
            docs.push(LabeledDoc {
                bow: BinaryBow::from_ids(ids, v)?,
                label,
            });
        }
        Corpus::new(self.vocabulary(), self.label_names(), docs)
    }
}

/// The standard synthetic split: 360 training documents (of which training
/// carves 60 for validation) and 150 test documents from an independent seed.
pub fn standard_split(seed: u64) -> Result<(Corpus, Corpus)> {
    let spec = SyntheticSpec::default();
    let train = spec.generate(360, seed)?;
    let test = spec.generate(150, seed ^ 0x7e57_7e57_7e57_7e57)?;
    Ok((train, test))
}
