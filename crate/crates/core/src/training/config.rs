use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model::{CorruptionSpec, EnergyNorm, EnergySpec};
use crate::nn::AdamConfig;

/// Which model is trained.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Variant {
    /// Adversarial document model: EBGAN with a denoising-autoencoder discriminator.
    #[default]
    Adm,
    /// Same, but the discriminator is a plain autoencoder (no corruption).
    AdmAe,
    /// Standalone denoising autoencoder, no generator or margin.
    DaeBaseline,
}

impl std::fmt::Display for Variant {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            Variant::Adm => "adm",
            Variant::AdmAe => "adm_ae",
            Variant::DaeBaseline => "dae_baseline",
        })
    }
}

/// Every hyperparameter of a run. Defaults follow the 20 Newsgroups setup
/// (V = 2000, 50-d noise and representation, 300-unit generator layers,
/// Adam at 1e-4, 40 % masking noise, margin 5 % of V).
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TrainConfig {
    pub variant: Variant,
    pub vocab_size: usize,
    /// Generator input noise width.
    pub noise_dim: usize,
    /// DAE hidden width, i.e. the representation size.
    pub hidden_dim: usize,
    /// Width of the two hidden generator layers.
    pub generator_hidden: usize,
    pub lr: f64,
    pub adam_beta1: f64,
    pub adam_beta2: f64,
    pub adam_eps: f64,
    pub batch_size: usize,
    pub epochs: u64,
    pub seed: u64,
    pub corruption_p: f64,
    pub margin: f64,
    pub energy_normalization: EnergyNorm,
    pub d_steps: usize,
    pub g_steps: usize,
    pub leak: f64,
    pub bn_momentum: f64,
    pub bn_eps: f64,
    /// Documents carved out of the training corpus for model selection.
    pub validation_size: usize,
    /// Retrieval fraction whose precision drives model selection.
    pub validation_fraction: f64,
}

impl TrainConfig {
    /// Defaults for a vocabulary of `vocab_size` words; the margin is `0.05·V`.
    pub fn for_vocab(vocab_size: usize) -> Self {
        TrainConfig {
            variant: Variant::Adm,
            vocab_size,
            noise_dim: 50,
            hidden_dim: 50,
            generator_hidden: 300,
            lr: 1e-4,
            adam_beta1: 0.9,
            adam_beta2: 0.999,
            adam_eps: 1e-8,
            batch_size: 100,
            epochs: 1000,
            seed: 0,
            corruption_p: 0.4,
            margin: 0.05 * vocab_size as f64,
            energy_normalization: EnergyNorm::Sum,
            d_steps: 1,
            g_steps: 1,
            leak: 0.02,
            bn_momentum: 0.1,
            bn_eps: 1e-5,
            validation_size: 1000,
            validation_fraction: 0.0002,
        }
    }

    // negated comparisons so NaN fails every check
    #[allow(clippy::neg_cmp_op_on_partial_ord)]
    pub fn validate(&self) -> Result<()> {
        let fail = |msg: String| Err(Error::Config(msg));
        if self.vocab_size == 0
            || self.noise_dim == 0
            || self.hidden_dim == 0
            || self.generator_hidden == 0
        {
            return fail("layer sizes must be positive".into());
        }
        if !(self.lr > 0.0) || !self.lr.is_finite() {
            return fail(format!("lr must be positive, got {}", self.lr));
        }
        if !(0.0..1.0).contains(&self.adam_beta1) || !(0.0..1.0).contains(&self.adam_beta2) {
            return fail("adam betas must lie in [0, 1)".into());
        }
        if !(self.adam_eps > 0.0) {
            return fail("adam_eps must be positive".into());
        }
        if self.batch_size < 2 {
            return fail(format!(
                "batch_size must be at least 2, got {}",
                self.batch_size
            ));
        }
        if !(0.0..=1.0).contains(&self.corruption_p) {
            return fail(format!(
                "corruption_p must lie in [0, 1], got {}",
                self.corruption_p
            ));
        }
        if !(self.margin > 0.0) || !self.margin.is_finite() {
            return fail(format!("margin must be positive, got {}", self.margin));
        }
        if self.d_steps == 0 || self.g_steps == 0 {
            return fail("d_steps and g_steps must be positive".into());
        }
        if !(self.leak >= 0.0) {
            return fail("leak must be non-negative".into());
        }
        if !(self.bn_momentum > 0.0 && self.bn_momentum <= 1.0) || !(self.bn_eps > 0.0) {
            return fail("bn_momentum must lie in (0, 1] and bn_eps be positive".into());
        }
        if !(self.validation_fraction > 0.0 && self.validation_fraction <= 1.0) {
            return fail("validation_fraction must lie in (0, 1]".into());
        }
        Ok(())
    }

    /// The config actually trained: `AdmAe` runs with `corruption_p = 0`.
    pub fn normalized(&self) -> Self {
        let mut c = self.clone();
        if c.variant == Variant::AdmAe {
            c.corruption_p = 0.0;
        }
        c
    }

    pub fn corruption(&self) -> Result<CorruptionSpec> {
        CorruptionSpec::new(self.corruption_p)
    }

    pub fn energy_spec(&self) -> Result<EnergySpec> {
        EnergySpec::new(self.margin, self.energy_normalization)
    }

    pub fn adam(&self) -> AdamConfig {
        AdamConfig {
            lr: self.lr,
            beta1: self.adam_beta1,
            beta2: self.adam_beta2,
            eps: self.adam_eps,
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn defaults() {
        let c = TrainConfig::for_vocab(2000);
        assert_eq!(c.margin, 100.0);
        assert_eq!(
            (c.noise_dim, c.hidden_dim, c.generator_hidden),
            (50, 50, 300)
        );
        assert_eq!(c.lr, 1e-4);
        assert_eq!(c.corruption_p, 0.4);
        assert_eq!(c.leak, 0.02);
        c.validate().unwrap();
    }

    #[test]
    fn adm_ae_normalizes_corruption_only() {
        let mut c = TrainConfig::for_vocab(10);
        c.variant = Variant::AdmAe;
        let n = c.normalized();
        assert_eq!(n.corruption_p, 0.0);
        let mut back = n.clone();
        back.corruption_p = c.corruption_p;
        assert_eq!(back, c);

        let adm = TrainConfig::for_vocab(10);
        assert_eq!(adm.normalized(), adm);
    }

    #[test]
    fn rejects_invalid() {
        let base = TrainConfig::for_vocab(10);
        let mut c = base.clone();
        c.batch_size = 1;
        assert!(c.validate().is_err());
        let mut c = base.clone();
        c.lr = 0.0;
        assert!(c.validate().is_err());
        let mut c = base.clone();
        c.corruption_p = 1.2;
        assert!(c.validate().is_err());
        let mut c = base;
        c.margin = -1.0;
        assert!(c.validate().is_err());
    }

    #[test]
    fn json_round_trip_and_unknown_keys() {
        let c = TrainConfig::for_vocab(60);
        let json = serde_json::to_string(&c).unwrap();
        assert_eq!(serde_json::from_str::<TrainConfig>(&json).unwrap(), c);
        let mut v: serde_json::Value = serde_json::from_str(&json).unwrap();
        v["bogus"] = 1.into();
        assert!(serde_json::from_value::<TrainConfig>(v).is_err());
    }
}
