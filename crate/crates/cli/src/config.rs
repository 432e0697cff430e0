use std::path::{Path, PathBuf};

use advdoc_core::model::EnergyNorm;
use advdoc_core::training::{TrainConfig, Variant};
use anyhow::{bail, Context, Result};
use serde::{Deserialize, Serialize};

/// The run config file: a flat JSON object. Every training key is optional
/// and falls back to [`TrainConfig::for_vocab`]; `vocab_size` defaults to the
/// length of the vocabulary file and `margin` to `0.05 * vocab_size`.
/// Relative paths resolve against the config file's directory.
#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfigFile {
    pub vocab: PathBuf,
    pub labels: PathBuf,
    pub docs: PathBuf,
    pub out_dir: Option<PathBuf>,

    pub variant: Option<Variant>,
    pub vocab_size: Option<usize>,
    pub noise_dim: Option<usize>,
    pub hidden_dim: Option<usize>,
    pub generator_hidden: Option<usize>,
    pub lr: Option<f64>,
    pub adam_beta1: Option<f64>,
    pub adam_beta2: Option<f64>,
    pub adam_eps: Option<f64>,
    pub batch_size: Option<usize>,
    pub epochs: Option<u64>,
    pub seed: Option<u64>,
    pub corruption_p: Option<f64>,
    pub margin: Option<f64>,
    pub energy_normalization: Option<EnergyNorm>,
    pub d_steps: Option<usize>,
    pub g_steps: Option<usize>,
    pub leak: Option<f64>,
    pub bn_momentum: Option<f64>,
    pub bn_eps: Option<f64>,
    pub validation_size: Option<usize>,
    pub validation_fraction: Option<f64>,
}

/// What actually ran. Written as `config.json`; loadable again as a [`RunConfigFile`].
#[derive(Debug, Serialize)]
pub struct EffectiveConfig {
    pub vocab: PathBuf,
    pub labels: PathBuf,
    pub docs: PathBuf,
    pub out_dir: PathBuf,
    #[serde(flatten)]
    pub train: TrainConfig,
}

impl RunConfigFile {
    pub fn load(path: &Path) -> Result<Self> {
        let text =
            std::fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
        let mut file: RunConfigFile =
            serde_json::from_str(&text).with_context(|| format!("parsing {}", path.display()))?;
        let base = path.parent().unwrap_or(Path::new(""));
        for p in [&mut file.vocab, &mut file.labels, &mut file.docs] {
            *p = base.join(&*p);
        }
        if let Some(out) = &mut file.out_dir {
            *out = base.join(&*out);
        }
        Ok(file)
    }

    /// Fills defaults for a vocabulary of `vocab_len` words.
    pub fn train_config(&self, vocab_len: usize) -> Result<TrainConfig> {
        let v = self.vocab_size.unwrap_or(vocab_len);
        if v != vocab_len {
            bail!("config vocab_size {v} but vocabulary file has {vocab_len} words");
        }
        let d = TrainConfig::for_vocab(v);
        Ok(TrainConfig {
            variant: self.variant.unwrap_or(d.variant),
            vocab_size: v,
            noise_dim: self.noise_dim.unwrap_or(d.noise_dim),
            hidden_dim: self.hidden_dim.unwrap_or(d.hidden_dim),
            generator_hidden: self.generator_hidden.unwrap_or(d.generator_hidden),
            lr: self.lr.unwrap_or(d.lr),
            adam_beta1: self.adam_beta1.unwrap_or(d.adam_beta1),
            adam_beta2: self.adam_beta2.unwrap_or(d.adam_beta2),
            adam_eps: self.adam_eps.unwrap_or(d.adam_eps),
            batch_size: self.batch_size.unwrap_or(d.batch_size),
            epochs: self.epochs.unwrap_or(d.epochs),
            seed: self.seed.unwrap_or(d.seed),
            corruption_p: self.corruption_p.unwrap_or(d.corruption_p),
            margin: self.margin.unwrap_or(d.margin),
            energy_normalization: self.energy_normalization.unwrap_or(d.energy_normalization),
            d_steps: self.d_steps.unwrap_or(d.d_steps),
            g_steps: self.g_steps.unwrap_or(d.g_steps),
            leak: self.leak.unwrap_or(d.leak),
            bn_momentum: self.bn_momentum.unwrap_or(d.bn_momentum),
            bn_eps: self.bn_eps.unwrap_or(d.bn_eps),
            validation_size: self.validation_size.unwrap_or(d.validation_size),
            validation_fraction: self.validation_fraction.unwrap_or(d.validation_fraction),
        })
    }
}
