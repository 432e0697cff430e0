//! The adversarial objectives.
//!
//! Discriminator: `f_D = mean_b [ D(x_b) + max(0, m − D(x̂_b)) ]`, with the
//! generated batch treated as a constant.
//! Generator: `f_G = mean_b D(x̂_b)`, with the discriminator treated as a constant.
//!
//! `D` is the DAE energy evaluated on a (possibly) corrupted input against the
//! clean target. Functions taking an [`Rng`] draw the corruption masks in a
//! fixed order: the real batch first, then the generated batch.

use crate::error::{Error, Result};
use crate::nn::{Matrix, Parameters, Rng};

use super::dae::{CorruptionSpec, DaeParams, EnergyNorm};

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct EnergySpec {
    margin: f64,
    norm: EnergyNorm,
}

impl EnergySpec {
    pub fn new(margin: f64, norm: EnergyNorm) -> Result<Self> {
        if !(margin > 0.0 && margin.is_finite()) {
            return Err(Error::invalid(format!(
                "margin must be positive and finite, got {margin}"
            )));
        }
        Ok(EnergySpec { margin, norm })
    }

    pub fn margin(&self) -> f64 {
        self.margin
    }

    pub fn norm(&self) -> EnergyNorm {
        self.norm
    }
}

/// Energies of `x`, corrupted first when `use_corruption` is set.
pub fn discriminator_energy(
    x: &Matrix,
    dae: &DaeParams,
    corruption: &CorruptionSpec,
    rng: &mut Rng,
    use_corruption: bool,
    norm: EnergyNorm,
) -> Result<Vec<f64>> {
    let mask = if use_corruption {
        corruption.sample_mask(x.rows(), x.cols(), rng)
    } else {
        None
    };
    Ok(dae.forward(x, mask.as_ref(), norm)?.energies)
}

#[derive(Clone, Debug)]
pub struct DiscriminatorOutcome {
    pub loss: f64,
    /// `∂f_D/∂(We, be, Wd, bd)`.
    pub grads: DaeParams,
    pub real_energy: Vec<f64>,
    pub fake_energy: Vec<f64>,
    /// Per generated sample: whether `m − D(x̂) > 0`.
    pub hinge_active: Vec<bool>,
}

impl DiscriminatorOutcome {
    pub fn hinge_fraction(&self) -> f64 {
        if self.hinge_active.is_empty() {
            return 0.0;
        }
        self.hinge_active.iter().filter(|&&a| a).count() as f64 / self.hinge_active.len() as f64
    }
}

/// `f_D` and its gradient for explicit corruption masks.
pub fn discriminator_objective(
    x: &Matrix,
    x_hat: &Matrix,
    dae: &DaeParams,
    spec: &EnergySpec,
    real_mask: Option<&Matrix>,
    fake_mask: Option<&Matrix>,
) -> Result<DiscriminatorOutcome> {
    if x.shape() != x_hat.shape() {
        return Err(Error::ShapeMismatch {
            op: "discriminator_loss",
            left: x.shape(),
            right: x_hat.shape(),
        });
    }
    let batch = x.rows();
    if batch == 0 {
        return Err(Error::invalid("empty batch"));
    }
    let inv_b = 1.0 / batch as f64;
    let real = dae.forward(x, real_mask, spec.norm)?;
    let fake = dae.forward(x_hat, fake_mask, spec.norm)?;

    let hinge_active: Vec<bool> = fake
        .energies
        .iter()
        .map(|&e| spec.margin - e > 0.0)
        .collect();
    let hinge_sum: f64 = fake
        .energies
        .iter()
        .map(|&e| (spec.margin - e).max(0.0))
        .sum();
    let loss = (real.energies.iter().sum::<f64>() + hinge_sum) * inv_b;

    let (mut grads, _) = dae.backward(&real, &vec![inv_b; batch], spec.norm)?;
    if hinge_active.iter().any(|&a| a) {
        let weights: Vec<f64> = hinge_active
            .iter()
            .map(|&a| if a { -inv_b } else { 0.0 })
            .collect();
        let (fake_grads, _) = dae.backward(&fake, &weights, spec.norm)?;
        add_into(&mut grads, &fake_grads);
    }
    Ok(DiscriminatorOutcome {
        loss,
        grads,
        real_energy: real.energies,
        fake_energy: fake.energies,
        hinge_active,
    })
}

/// `f_D` with corruption masks drawn from `rng` (real batch, then generated batch).
pub fn discriminator_objective_sampled(
    x: &Matrix,
    x_hat: &Matrix,
    dae: &DaeParams,
    spec: &EnergySpec,
    corruption: &CorruptionSpec,
    rng: &mut Rng,
) -> Result<DiscriminatorOutcome> {
    let real_mask = corruption.sample_mask(x.rows(), x.cols(), rng);
    let fake_mask = corruption.sample_mask(x_hat.rows(), x_hat.cols(), rng);
    discriminator_objective(x, x_hat, dae, spec, real_mask.as_ref(), fake_mask.as_ref())
}

pub fn discriminator_loss(
    x: &Matrix,
    x_hat: &Matrix,
    dae: &DaeParams,
    spec: &EnergySpec,
    corruption: &CorruptionSpec,
    rng: &mut Rng,
) -> Result<f64> {
    Ok(discriminator_objective_sampled(x, x_hat, dae, spec, corruption, rng)?.loss)
}

#[derive(Clone, Debug)]
pub struct GeneratorOutcome {
    pub loss: f64,
    /// `∂f_G/∂x̂`, to be pushed back through the generator.
    pub grad_x_hat: Matrix,
    pub fake_energy: Vec<f64>,
}

/// `f_G` and its gradient with respect to the generated batch.
pub fn generator_objective(
    x_hat: &Matrix,
    dae: &DaeParams,
    norm: EnergyNorm,
    mask: Option<&Matrix>,
) -> Result<GeneratorOutcome> {
    let batch = x_hat.rows();
    if batch == 0 {
        return Err(Error::invalid("empty batch"));
    }
    let inv_b = 1.0 / batch as f64;
    let pass = dae.forward(x_hat, mask, norm)?;
    let loss = pass.energies.iter().sum::<f64>() * inv_b;
    let (_, grad_x_hat) = dae.backward(&pass, &vec![inv_b; batch], norm)?;
    Ok(GeneratorOutcome {
        loss,
        grad_x_hat,
        fake_energy: pass.energies,
    })
}

pub fn generator_loss(
    x_hat: &Matrix,
    dae: &DaeParams,
    norm: EnergyNorm,
    corruption: &CorruptionSpec,
    rng: &mut Rng,
) -> Result<f64> {
    let mask = corruption.sample_mask(x_hat.rows(), x_hat.cols(), rng);
    Ok(generator_objective(x_hat, dae, norm, mask.as_ref())?.loss)
}

/// Plain denoising reconstruction: `mean_b D(x_b)`, used by the standalone DAE baseline.
pub fn reconstruction_objective(
    x: &Matrix,
    dae: &DaeParams,
    norm: EnergyNorm,
    mask: Option<&Matrix>,
) -> Result<(f64, DaeParams)> {
    let batch = x.rows();
    if batch == 0 {
        return Err(Error::invalid("empty batch"));
    }
    let inv_b = 1.0 / batch as f64;
    let pass = dae.forward(x, mask, norm)?;
    let loss = pass.energies.iter().sum::<f64>() * inv_b;
    let (grads, _) = dae.backward(&pass, &vec![inv_b; batch], norm)?;
    Ok((loss, grads))
}

fn add_into<P: Parameters>(acc: &mut P, other: &P) {
    for (a, b) in acc.tensors_mut().into_iter().zip(other.tensors()) {
        a.iter_mut().zip(b).for_each(|(x, y)| *x += y);
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::energy;

    /// A DAE whose reconstruction is the constant `level` everywhere, so
    /// `D(x) = Σ(x − level)²/div` can be dialed in exactly.
    fn constant_dae(vocab: usize, level: f64) -> DaeParams {
        let mut dae = DaeParams::zeros(vocab, 2, 0.02);
        dae.decoder.bias = vec![level; vocab];
        dae
    }

    fn rows(values: &[&[f64]]) -> Matrix {
        Matrix::from_rows(values).unwrap()
    }

    #[test]
    fn hinge_cases() {
        // D(x) = 0.2: x = (1, 0) against constant 0 under mean norm gives 0.5,
        // so use a 10-word vocabulary with two ones → 0.2.
        let dae = constant_dae(10, 0.0);
        let mut real = vec![0.0; 10];
        real[0] = 1.0;
        real[1] = 1.0;
        let x = rows(&[&real]);
        let mut f3 = vec![0.0; 10];
        f3[..3].fill(1.0);
        let mut f1 = vec![0.0; 10];
        f1[0] = 1.0;
        let spec = EnergySpec::new(0.25, EnergyNorm::Mean).unwrap();

        // D(x̂) = 0.3 > m: hinge inactive
        let out = discriminator_objective(&x, &rows(&[&f3]), &dae, &spec, None, None).unwrap();
        assert!((out.loss - 0.2).abs() < 1e-15);
        assert_eq!(out.hinge_active, vec![false]);

        // D(x̂) = 0.1 < m: 0.2 + 0.15
        let out = discriminator_objective(&x, &rows(&[&f1]), &dae, &spec, None, None).unwrap();
        assert!((out.loss - 0.35).abs() < 1e-15);
        assert_eq!(out.hinge_fraction(), 1.0);

        // D(x̂) == m exactly contributes nothing
        let spec = EnergySpec::new(0.1, EnergyNorm::Mean).unwrap();
        let out = discriminator_objective(&x, &rows(&[&f1]), &dae, &spec, None, None).unwrap();
        assert_eq!(out.fake_energy, vec![0.1]);
        assert!((out.loss - 0.2).abs() < 1e-15);
        assert_eq!(out.hinge_active, vec![false]);
    }

    #[test]
    fn margin_must_be_positive() {
        assert!(EnergySpec::new(0.0, EnergyNorm::Sum).is_err());
        assert!(EnergySpec::new(f64::NAN, EnergyNorm::Sum).is_err());
    }

    #[test]
    fn inactive_hinge_leaves_only_real_gradient() {
        let mut rng = Rng::seed_from_u64(21);
        let dae = DaeParams::init(8, 3, 0.02, &mut rng);
        let x = rng
            .normal_matrix(4, 8)
            .map(|v| if v > 0.0 { 1.0 } else { 0.0 });
        let x_hat = rng.normal_matrix(4, 8).map(|v| 5.0 + v);
        let spec = EnergySpec::new(1e-6, EnergyNorm::Sum).unwrap();
        let out = discriminator_objective(&x, &x_hat, &dae, &spec, None, None).unwrap();
        assert!(out.hinge_active.iter().all(|&a| !a));
        let (loss, grads) = reconstruction_objective(&x, &dae, EnergyNorm::Sum, None).unwrap();
        assert_eq!(out.loss, loss);
        assert_eq!(out.grads.flatten(), grads.flatten());
    }

    #[test]
    fn hinge_gradient_masks_per_sample() {
        let mut rng = Rng::seed_from_u64(22);
        let dae = DaeParams::init(6, 3, 0.02, &mut rng);
        let x = rng.normal_matrix(3, 6);
        let x_hat = rng.normal_matrix(3, 6);
        let energies = dae.forward(&x_hat, None, EnergyNorm::Sum).unwrap().energies;
        let mut sorted = energies.clone();
        sorted.sort_by(f64::total_cmp);
        // margin between the smallest and the middle energy: exactly one active sample
        let margin = 0.5 * (sorted[0] + sorted[1]);
        let spec = EnergySpec::new(margin, EnergyNorm::Sum).unwrap();
        let out = discriminator_objective(&x, &x_hat, &dae, &spec, None, None).unwrap();
        assert_eq!(out.hinge_active.iter().filter(|&&a| a).count(), 1);

        let active = energies.iter().position(|&e| e == sorted[0]).unwrap();
        let real = dae.forward(&x, None, EnergyNorm::Sum).unwrap();
        let fake = dae.forward(&x_hat, None, EnergyNorm::Sum).unwrap();
        let (g_real, _) = dae
            .backward(&real, &[1.0 / 3.0; 3], EnergyNorm::Sum)
            .unwrap();
        let mut w = [0.0; 3];
        w[active] = -1.0 / 3.0;
        let (g_fake, _) = dae.backward(&fake, &w, EnergyNorm::Sum).unwrap();
        for ((a, r), f) in out
            .grads
            .flatten()
            .iter()
            .zip(g_real.flatten())
            .zip(g_fake.flatten())
        {
            assert!((a - (r + f)).abs() < 1e-14);
        }
    }

    #[test]
    fn generator_loss_is_mean_discriminator_energy() {
        let mut rng = Rng::seed_from_u64(23);
        let dae = DaeParams::init(7, 3, 0.02, &mut rng);
        let x_hat = rng.normal_matrix(5, 7).map(crate::nn::logistic);
        let corruption = CorruptionSpec::new(0.4).unwrap();
        let mut r1 = Rng::seed_from_u64(99);
        let mut r2 = Rng::seed_from_u64(99);
        let loss = generator_loss(&x_hat, &dae, EnergyNorm::Mean, &corruption, &mut r1).unwrap();
        let e = discriminator_energy(&x_hat, &dae, &corruption, &mut r2, true, EnergyNorm::Mean)
            .unwrap();
        assert!((loss - e.iter().sum::<f64>() / 5.0).abs() < 1e-12);
    }

    #[test]
    fn perfectly_reconstructed_samples_have_zero_generator_loss() {
        let dae = constant_dae(4, 0.5);
        let x_hat = Matrix::filled(3, 4, 0.5);
        let out = generator_objective(&x_hat, &dae, EnergyNorm::Sum, None).unwrap();
        assert_eq!(out.loss, 0.0);
    }

    #[test]
    fn disabled_corruption_matches_zero_probability() {
        let mut rng = Rng::seed_from_u64(24);
        let dae = DaeParams::init(5, 2, 0.02, &mut rng);
        let x = rng.normal_matrix(3, 5);
        let a = discriminator_energy(
            &x,
            &dae,
            &CorruptionSpec::none(),
            &mut rng,
            true,
            EnergyNorm::Mean,
        )
        .unwrap();
        let b = discriminator_energy(
            &x,
            &dae,
            &CorruptionSpec::new(0.7).unwrap(),
            &mut rng,
            false,
            EnergyNorm::Mean,
        )
        .unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn discriminator_energy_composes_the_three_stages() {
        let mut rng = Rng::seed_from_u64(25);
        let dae = DaeParams::init(9, 4, 0.02, &mut rng);
        let x = rng
            .normal_matrix(3, 9)
            .map(|v| if v > 0.3 { 1.0 } else { 0.0 });
        let corruption = CorruptionSpec::new(0.4).unwrap();
        let mut r1 = Rng::seed_from_u64(5);
        let mut r2 = Rng::seed_from_u64(5);
        let composed =
            discriminator_energy(&x, &dae, &corruption, &mut r1, true, EnergyNorm::Mean).unwrap();
        let x_c = crate::model::corrupt(&x, &corruption, &mut r2);
        let manual = energy(
            &x,
            &dae.decode(&dae.encode(&x_c).unwrap()).unwrap(),
            EnergyNorm::Mean,
        )
        .unwrap();
        assert_eq!(composed, manual);
    }

    #[test]
    fn shape_mismatch_rejected() {
        let dae = constant_dae(4, 0.0);
        let spec = EnergySpec::new(1.0, EnergyNorm::Sum).unwrap();
        assert!(discriminator_objective(
            &Matrix::zeros(2, 4),
            &Matrix::zeros(3, 4),
            &dae,
            &spec,
            None,
            None
        )
        .is_err());
        assert!(generator_objective(&Matrix::zeros(2, 5), &dae, EnergyNorm::Sum, None).is_err());
    }
}
