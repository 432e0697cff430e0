//! Adversarial training loop and model selection.
//!
//! Randomness is drawn from the single run [`Rng`] in this order:
//! parameter init (generator `l1`, `l2`, `l3`, then encoder, decoder); then per
//! epoch a shuffle of the training indices; then per batch, for each D-step the
//! noise `z` (row-major normals), the real-batch corruption mask and the
//! generated-batch mask, and for each G-step a fresh `z` and the generated-batch
//! mask. Masks draw nothing when the corruption probability is 0.

use serde::{Deserialize, Serialize};

use super::checkpoint::Checkpoint;
use super::config::{TrainConfig, Variant};
use crate::corpus::{carve_validation, Corpus};
use crate::error::{Error, Result};
use crate::eval::{embed_documents, precision_at_fraction};
use crate::model::{
    discriminator_objective_sampled, generator_objective, reconstruction_objective, CorruptionSpec,
    DaeParams, EnergySpec, GeneratorParams,
};
use crate::nn::{Adam, Matrix, Mode, Rng};

#[derive(Clone, Debug, Default, PartialEq)]
pub struct StepMetrics {
    pub f_d: f64,
    pub f_g: f64,
    pub d_real: f64,
    pub d_fake: f64,
    pub hinge_fraction: f64,
}

/// One line of the metrics log. For the DAE baseline `f_D` and `D_real` hold
/// the reconstruction loss and the generator-side fields are 0.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EpochMetrics {
    pub epoch: u64,
    #[serde(rename = "f_D")]
    pub f_d: f64,
    #[serde(rename = "f_G")]
    pub f_g: f64,
    #[serde(rename = "D_real")]
    pub d_real: f64,
    #[serde(rename = "D_fake")]
    pub d_fake: f64,
    pub hinge_fraction: f64,
    pub val_precision: f64,
}

/// Live training state. [`TrainState::snapshot`] turns it into a [`Checkpoint`].
#[derive(Clone, Debug)]
pub struct TrainState {
    pub config: TrainConfig,
    pub generator: GeneratorParams,
    pub dae: DaeParams,
    pub generator_opt: Adam,
    pub dae_opt: Adam,
    pub rng: Rng,
    pub epoch: u64,
    pub step: u64,
    pub best_epoch: Option<u64>,
    pub best_score: Option<f64>,
    corruption: CorruptionSpec,
    energy: EnergySpec,
}

impl TrainState {
    pub fn new(config: &TrainConfig) -> Result<Self> {
        config.validate()?;
        let config = config.normalized();
        let mut rng = Rng::with_stream(config.seed, 0);
        let generator = GeneratorParams::init(
            config.noise_dim,
            config.generator_hidden,
            config.vocab_size,
            config.bn_momentum,
            config.bn_eps,
            &mut rng,
        );
        let dae = DaeParams::init(config.vocab_size, config.hidden_dim, config.leak, &mut rng);
        let generator_opt = Adam::new(&generator, config.adam());
        let dae_opt = Adam::new(&dae, config.adam());
        Ok(TrainState {
            corruption: config.corruption()?,
            energy: config.energy_spec()?,
            config,
            generator,
            dae,
            generator_opt,
            dae_opt,
            rng,
            epoch: 0,
            step: 0,
            best_epoch: None,
            best_score: None,
        })
    }

    pub fn from_checkpoint(ckpt: &Checkpoint) -> Result<Self> {
        ckpt.config.validate()?;
        Ok(TrainState {
            corruption: ckpt.config.corruption()?,
            energy: ckpt.config.energy_spec()?,
            config: ckpt.config.clone(),
            generator: ckpt.generator.clone(),
            dae: ckpt.dae.clone(),
            generator_opt: ckpt.generator_opt.clone(),
            dae_opt: ckpt.dae_opt.clone(),
            rng: Rng::from_state(&ckpt.rng)?,
            epoch: ckpt.epoch,
            step: ckpt.step,
            best_epoch: ckpt.best_epoch,
            best_score: ckpt.best_score,
        })
    }

    pub fn snapshot(&self, validation_score: Option<f64>) -> Checkpoint {
        Checkpoint {
            config: self.config.clone(),
            generator: self.generator.clone(),
            dae: self.dae.clone(),
            generator_opt: self.generator_opt.clone(),
            dae_opt: self.dae_opt.clone(),
            rng: self.rng.state(),
            epoch: self.epoch,
            step: self.step,
            validation_score,
            best_epoch: self.best_epoch,
            best_score: self.best_score,
        }
    }

    /// One iteration on a real batch: `d_steps` discriminator updates then
    /// `g_steps` generator updates, each with fresh noise. The DAE baseline does
    /// a single denoising-reconstruction update instead.
    pub fn train_step(&mut self, batch: &Matrix) -> Result<StepMetrics> {
        if batch.rows() < 2 {
            return Err(Error::BatchTooSmall(batch.rows()));
        }
        if batch.cols() != self.config.vocab_size {
            return Err(Error::ShapeMismatch {
                op: "train_step",
                left: batch.shape(),
                right: (batch.rows(), self.config.vocab_size),
            });
        }
        self.step += 1;
        let step = self.step;
        let diverged = |what: &str| Error::Divergence(format!("non-finite {what} at step {step}"));

        if self.config.variant == Variant::DaeBaseline {
            let mask = self
                .corruption
                .sample_mask(batch.rows(), batch.cols(), &mut self.rng);
            let (loss, grads) =
                reconstruction_objective(batch, &self.dae, self.energy.norm(), mask.as_ref())?;
            if !loss.is_finite() {
                return Err(diverged("reconstruction loss"));
            }
            self.dae_opt
                .step(&mut self.dae, &grads)
                .map_err(|e| non_finite_as(e, || diverged("dae gradient")))?;
            return Ok(StepMetrics {
                f_d: loss,
                d_real: loss,
                ..StepMetrics::default()
            });
        }

        let b = batch.rows();
        let mut m = StepMetrics::default();
        for _ in 0..self.config.d_steps {
            let z = self.rng.normal_matrix(b, self.config.noise_dim);
            let fake = self.generator.forward(&z, Mode::Train)?;
            let out = discriminator_objective_sampled(
                batch,
                fake.output(),
                &self.dae,
                &self.energy,
                &self.corruption,
                &mut self.rng,
            )?;
            if !out.loss.is_finite() {
                return Err(diverged("discriminator loss"));
            }
            self.dae_opt
                .step(&mut self.dae, &out.grads)
                .map_err(|e| non_finite_as(e, || diverged("dae gradient")))?;
            m.f_d += out.loss;
            m.d_real += mean(&out.real_energy);
            m.d_fake += mean(&out.fake_energy);
            m.hinge_fraction += out.hinge_fraction();
        }
        let d = self.config.d_steps as f64;
        m.f_d /= d;
        m.d_real /= d;
        m.d_fake /= d;
        m.hinge_fraction /= d;

        for _ in 0..self.config.g_steps {
            let z = self.rng.normal_matrix(b, self.config.noise_dim);
            let fake = self.generator.forward(&z, Mode::Train)?;
            let mask = self
                .corruption
                .sample_mask(b, self.config.vocab_size, &mut self.rng);
            let out =
                generator_objective(fake.output(), &self.dae, self.energy.norm(), mask.as_ref())?;
            if !out.loss.is_finite() {
                return Err(diverged("generator loss"));
            }
            let grads = self.generator.backward(&fake, &out.grad_x_hat)?;
            self.generator_opt
                .step(&mut self.generator, &grads)
                .map_err(|e| non_finite_as(e, || diverged("generator gradient")))?;
            m.f_g += out.loss;
        }
        m.f_g /= self.config.g_steps as f64;
        Ok(m)
    }

    /// One shuffled pass over `train`. A trailing batch of a single document is
    /// skipped (batch norm needs two rows).
    pub fn run_epoch(&mut self, train: &Corpus) -> Result<StepMetrics> {
        if train.len() < 2 {
            return Err(Error::invalid(format!(
                "need at least 2 training documents, got {}",
                train.len()
            )));
        }
        let mut order: Vec<usize> = (0..train.len()).collect();
        self.rng.shuffle(&mut order);
        let mut total = StepMetrics::default();
        let mut steps = 0usize;
        for idx in order.chunks(self.config.batch_size) {
            if idx.len() < 2 {
                continue;
            }
            let m = self.train_step(&train.dense_batch(idx))?;
            total.f_d += m.f_d;
            total.f_g += m.f_g;
            total.d_real += m.d_real;
            total.d_fake += m.d_fake;
            total.hinge_fraction += m.hinge_fraction;
            steps += 1;
        }
        self.epoch += 1;
        let s = steps.max(1) as f64;
        Ok(StepMetrics {
            f_d: total.f_d / s,
            f_g: total.f_g / s,
            d_real: total.d_real / s,
            d_fake: total.d_fake / s,
            hinge_fraction: total.hinge_fraction / s,
        })
    }

    /// Precision of `valid` queries against `pool` at the configured fraction.
    pub fn validation_score(&self, valid: &Corpus, pool: &Corpus) -> Result<f64> {
        let queries = embed_documents(&self.dae, valid.docs())?;
        let pool = embed_documents(&self.dae, pool.docs())?;
        precision_at_fraction(&queries, &pool, self.config.validation_fraction)
    }
}

fn non_finite_as(e: Error, divergence: impl FnOnce() -> Error) -> Error {
    match e {
        Error::NonFinite(_) => divergence(),
        other => other,
    }
}

fn mean(v: &[f64]) -> f64 {
    if v.is_empty() {
        0.0
    } else {
        v.iter().sum::<f64>() / v.len() as f64
    }
}

#[derive(Clone, Debug)]
pub struct TrainOutcome {
    /// Highest validation precision over trained epochs (the initial state when `epochs == 0`).
    pub best: Checkpoint,
    pub last: Checkpoint,
    pub metrics: Vec<EpochMetrics>,
}

/// Carves `config.validation_size` documents out of `corpus` for model
/// selection and trains on the rest.
pub fn train(config: &TrainConfig, corpus: &Corpus) -> Result<TrainOutcome> {
    train_with_callback(config, corpus, |_| Ok(()))
}

/// [`train`] with a hook invoked after every epoch.
pub fn train_with_callback(
    config: &TrainConfig,
    corpus: &Corpus,
    on_epoch: impl FnMut(&EpochMetrics) -> Result<()>,
) -> Result<TrainOutcome> {
    if corpus.is_empty() {
        return Err(Error::invalid("empty training corpus"));
    }
    if corpus.vocab_size() != config.vocab_size {
        return Err(Error::Config(format!(
            "corpus vocabulary has {} words, config says {}",
            corpus.vocab_size(),
            config.vocab_size
        )));
    }
    if config.validation_size == 0 {
        return Err(Error::Config(
            "validation_size must be positive for model selection".into(),
        ));
    }
    let (rest, valid) = carve_validation(corpus, config.validation_size, config.seed)?;
    train_with_validation(config, &rest, &valid, on_epoch)
}

/// Trains on `train`, selecting the epoch whose representations give the best
/// validation precision with `valid` as queries and `train` as the pool.
pub fn train_with_validation(
    config: &TrainConfig,
    train: &Corpus,
    valid: &Corpus,
    mut on_epoch: impl FnMut(&EpochMetrics) -> Result<()>,
) -> Result<TrainOutcome> {
    let mut state = TrainState::new(config)?;
    let mut best: Option<Checkpoint> = None;
    if config.epochs == 0 {
        let score = state.validation_score(valid, train)?;
        state.best_epoch = Some(0);
        state.best_score = Some(score);
        best = Some(state.snapshot(Some(score)));
    }
    let mut metrics = Vec::with_capacity(config.epochs as usize);
    let mut last_score = None;
    for _ in 0..config.epochs {
        let m = state.run_epoch(train)?;
        let score = state.validation_score(valid, train)?;
        last_score = Some(score);
        let line = EpochMetrics {
            epoch: state.epoch,
            f_d: m.f_d,
            f_g: m.f_g,
            d_real: m.d_real,
            d_fake: m.d_fake,
            hinge_fraction: m.hinge_fraction,
            val_precision: score,
        };
        on_epoch(&line)?;
        metrics.push(line);
        if state.best_score.is_none_or(|b| score > b) {
            state.best_epoch = Some(state.epoch);
            state.best_score = Some(score);
            best = Some(state.snapshot(Some(score)));
        }
    }
    let last = state.snapshot(last_score.or(best.as_ref().and_then(|b| b.validation_score)));
    Ok(TrainOutcome {
        best: best.expect("set when epochs == 0 or after the first epoch"),
        last,
        metrics,
    })
}

/// The standalone DAE baseline: the same loop with the variant forced.
pub fn train_dae_baseline(config: &TrainConfig, corpus: &Corpus) -> Result<TrainOutcome> {
    let mut c = config.clone();
    c.variant = Variant::DaeBaseline;
    train(&c, corpus)
}
