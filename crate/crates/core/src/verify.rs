//! Finite-difference verification of every hand-written backward pass.
//!
//! Each check draws a random shape and random inputs from its seed, reduces the
//! op's output to a scalar through a random projection, and compares the
//! analytic gradient of that scalar with central differences.

use crate::error::Result;
use crate::model::{
    discriminator_objective, generator_objective, CorruptionSpec, DaeParams, EnergyNorm,
    EnergySpec, GeneratorParams,
};
use crate::nn::{
    gradient_check, leaky_relu, leaky_relu_backward, mse_mean, mse_mean_backward, numeric_gradient,
    relu, relu_backward, sigmoid, sigmoid_backward, BatchNormLayer, LinearLayer, Matrix, Mode,
    Parameters, Rng,
};

pub const DEFAULT_STEP: f64 = 1e-5;
pub const DEFAULT_TOLERANCE: f64 = 1e-6;
/// Smallest nonzero numeric gradient component an instance may have.
pub const MIN_COMPONENT: f64 = 1e-4;
/// Instances drawn per seed before a check is declared failed.
pub const MAX_ATTEMPTS: u64 = 32;

#[derive(Clone, Debug, PartialEq)]
pub struct CheckReport {
    pub name: String,
    pub seed: u64,
    /// Human-readable shape summary, e.g. `5x7`.
    pub shape: String,
    pub num_params: usize,
    /// Which draw for this seed was well-conditioned.
    pub attempt: u64,
    pub max_rel_error: f64,
}

impl CheckReport {
    pub fn passed(&self, tolerance: f64) -> bool {
        self.max_rel_error < tolerance
    }
}

type Check = fn(u64, u64, f64) -> Result<Option<CheckReport>>;

const CHECKS: [(&str, Check); 12] = [
    ("linear", check_linear),
    ("relu", check_relu),
    ("leaky_relu", check_leaky_relu),
    ("sigmoid", check_sigmoid),
    ("batchnorm_train", check_bn_train),
    ("batchnorm_eval", check_bn_eval),
    ("mse", check_mse),
    ("energy", check_energy),
    ("f_D", check_f_d_clean),
    ("f_D_masked", check_f_d_masked),
    ("f_G", check_f_g_clean),
    ("f_G_masked", check_f_g_masked),
];

pub fn check_names() -> Vec<&'static str> {
    CHECKS.iter().map(|(n, _)| *n).collect()
}

/// Runs every check once per seed in `seeds`.
pub fn run_suite(seeds: impl IntoIterator<Item = u64> + Clone, h: f64) -> Result<Vec<CheckReport>> {
    let mut out = Vec::new();
    for (name, check) in CHECKS {
        for seed in seeds.clone() {
            let mut found = None;
            for attempt in 0..MAX_ATTEMPTS {
                if let Some(r) = check(seed, attempt, h)? {
                    found = Some(CheckReport { attempt, ..r });
                    break;
                }
            }
            out.push(found.unwrap_or(CheckReport {
                name: name.to_string(),
                seed,
                shape: "no well-conditioned instance".into(),
                num_params: 0,
                attempt: MAX_ATTEMPTS,
                max_rel_error: f64::INFINITY,
            }));
        }
    }
    Ok(out)
}

fn shape(rng: &mut Rng, max_rows: usize, max_cols: usize) -> (usize, usize) {
    (2 + rng.below(max_rows - 1), 2 + rng.below(max_cols - 1))
}

fn uniform_matrix(rng: &mut Rng, rows: usize, cols: usize, lo: f64, hi: f64) -> Matrix {
    let data = (0..rows * cols)
        .map(|_| lo + (hi - lo) * rng.uniform())
        .collect();
    Matrix::from_vec(rows, cols, data).expect("length matches")
}

/// Normal draws pushed at least `gap` away from zero, so piecewise-linear
/// activations are never probed across their kink.
fn away_from_zero(rng: &mut Rng, rows: usize, cols: usize, gap: f64) -> Matrix {
    rng.normal_matrix(rows, cols).map(|v| {
        if v.abs() < gap {
            v.signum() * gap + v
        } else {
            v
        }
    })
}

fn binary_matrix(rng: &mut Rng, rows: usize, cols: usize, p: f64) -> Matrix {
    uniform_matrix(rng, rows, cols, 0.0, 1.0).map(|u| if u < p { 1.0 } else { 0.0 })
}

fn project(out: &Matrix, r: &Matrix) -> f64 {
    out.data().iter().zip(r.data()).map(|(a, b)| a * b).sum()
}

/// Compares `analytic` with central differences, or returns `None` when the
/// instance is too ill-conditioned for the oracle to be trusted: a nonzero
/// numeric component below [`MIN_COMPONENT`] (roundoff in `f` is about
/// 1e-11 after dividing by `2h`), or disagreement between steps `h` and `2h`
/// (a kink inside the probe interval). Only the oracle is inspected, never
/// the gradient under test.
fn report(
    name: &str,
    seed: u64,
    shape: String,
    mut f: impl FnMut(&[f64]) -> f64,
    params: &[f64],
    analytic: &[f64],
    h: f64,
) -> Result<Option<CheckReport>> {
    let coarse = numeric_gradient(&mut f, params, 2.0 * h)?;
    let g = gradient_check(&mut f, params, analytic, h)?;
    let conditioned =
        g.numeric.iter().zip(&coarse).all(|(&n, &c)| {
            n == 0.0 || (n.abs() >= MIN_COMPONENT && (n - c).abs() <= 1e-4 * n.abs())
        });
    Ok(conditioned.then(|| CheckReport {
        name: name.to_string(),
        seed,
        shape,
        num_params: params.len(),
        attempt: 0,
        max_rel_error: g.max_rel_error,
    }))
}

fn split(flat: &[f64], sizes: &[usize]) -> Vec<Vec<f64>> {
    let mut out = Vec::with_capacity(sizes.len());
    let mut at = 0;
    for &s in sizes {
        out.push(flat[at..at + s].to_vec());
        at += s;
    }
    out
}

fn check_linear(seed: u64, attempt: u64, h: f64) -> Result<Option<CheckReport>> {
    let mut rng = Rng::with_stream(seed, attempt);
    let (n, d_in) = shape(&mut rng, 7, 11);
    let d_out = 2 + rng.below(6);
    let layer = LinearLayer::init(d_in, d_out, &mut rng);
    let mut layer = layer;
    layer.bias = (0..d_out).map(|_| rng.normal()).collect();
    let x = rng.normal_matrix(n, d_in);
    let r = rng.normal_matrix(n, d_out);

    let (gx, gl) = layer.backward(&x, &r)?;
    let mut params = x.data().to_vec();
    params.extend(layer.flatten());
    let mut analytic = gx.data().to_vec();
    analytic.extend(gl.flatten());

    let f = |p: &[f64]| {
        let parts = split(p, &[n * d_in, layer.num_params()]);
        let x = Matrix::from_vec(n, d_in, parts[0].clone()).unwrap();
        let mut l = layer.clone();
        l.assign_flat(&parts[1]);
        project(&l.forward(&x).unwrap(), &r)
    };
    report(
        "linear",
        seed,
        format!("{n}x{d_in}->{d_out}"),
        f,
        &params,
        &analytic,
        h,
    )
}

fn check_activation(
    name: &str,
    seed: u64,
    attempt: u64,
    h: f64,
    fwd: impl Fn(&Matrix) -> Matrix,
    bwd: impl Fn(&Matrix, &Matrix, &Matrix) -> Result<Matrix>,
) -> Result<Option<CheckReport>> {
    let mut rng = Rng::with_stream(seed, attempt);
    let (n, d) = shape(&mut rng, 7, 11);
    let x = away_from_zero(&mut rng, n, d, 1e-3);
    let r = rng.normal_matrix(n, d);
    let out = fwd(&x);
    let analytic = bwd(&x, &out, &r)?;
    let f = |p: &[f64]| project(&fwd(&Matrix::from_vec(n, d, p.to_vec()).unwrap()), &r);
    report(
        name,
        seed,
        format!("{n}x{d}"),
        f,
        x.data(),
        analytic.data(),
        h,
    )
}

fn check_relu(seed: u64, attempt: u64, h: f64) -> Result<Option<CheckReport>> {
    check_activation("relu", seed, attempt, h, relu, |x, _, g| {
        relu_backward(x, g)
    })
}

fn check_leaky_relu(seed: u64, attempt: u64, h: f64) -> Result<Option<CheckReport>> {
    check_activation(
        "leaky_relu",
        seed,
        attempt,
        h,
        |x| leaky_relu(x, 0.02),
        |x, _, g| leaky_relu_backward(x, 0.02, g),
    )
}

fn check_sigmoid(seed: u64, attempt: u64, h: f64) -> Result<Option<CheckReport>> {
    check_activation("sigmoid", seed, attempt, h, sigmoid, |_, out, g| {
        sigmoid_backward(out, g)
    })
}

fn check_bn(
    name: &str,
    seed: u64,
    attempt: u64,
    h: f64,
    mode: Mode,
) -> Result<Option<CheckReport>> {
    let mut rng = Rng::with_stream(seed, attempt);
    // with two rows the normalized output barely depends on x, and the tiny
    // true gradient drowns in finite-difference roundoff
    let (n, d) = shape(&mut rng, 7, 11);
    let n = n.max(4);
    let mut bn = BatchNormLayer::new(d, 0.1, 1e-5);
    bn.gamma = (0..d).map(|_| 0.5 + rng.uniform()).collect();
    bn.beta = (0..d).map(|_| rng.normal()).collect();
    bn.running_mean = (0..d).map(|_| rng.normal()).collect();
    bn.running_var = (0..d).map(|_| 0.5 + rng.uniform()).collect();
    let x = rng.normal_matrix(n, d);
    let r = rng.normal_matrix(n, d);

    let (_, cache) = bn.normalize(&x, mode)?;
    let (gx, grads) = bn.backward(&cache, &r)?;
    let mut params = x.data().to_vec();
    params.extend(&bn.gamma);
    params.extend(&bn.beta);
    let mut analytic = gx.data().to_vec();
    analytic.extend(&grads.gamma);
    analytic.extend(&grads.beta);

    let f = |p: &[f64]| {
        let parts = split(p, &[n * d, d, d]);
        let mut b = bn.clone();
        b.gamma = parts[1].clone();
        b.beta = parts[2].clone();
        let x = Matrix::from_vec(n, d, parts[0].clone()).unwrap();
        project(&b.normalize(&x, mode).unwrap().0, &r)
    };
    report(name, seed, format!("{n}x{d}"), f, &params, &analytic, h)
}

fn check_bn_train(seed: u64, attempt: u64, h: f64) -> Result<Option<CheckReport>> {
    check_bn("batchnorm_train", seed, attempt, h, Mode::Train)
}

fn check_bn_eval(seed: u64, attempt: u64, h: f64) -> Result<Option<CheckReport>> {
    check_bn("batchnorm_eval", seed, attempt, h, Mode::Eval)
}

fn check_mse(seed: u64, attempt: u64, h: f64) -> Result<Option<CheckReport>> {
    let mut rng = Rng::with_stream(seed, attempt);
    let (n, d) = shape(&mut rng, 7, 11);
    let x = rng.normal_matrix(n, d);
    let y = rng.normal_matrix(n, d);
    let analytic = mse_mean_backward(&x, &y)?;
    let f = |p: &[f64]| mse_mean(&Matrix::from_vec(n, d, p.to_vec()).unwrap(), &y).unwrap();
    report(
        "mse",
        seed,
        format!("{n}x{d}"),
        f,
        x.data(),
        analytic.data(),
        h,
    )
}

/// Energy gradient through the DAE with respect to its input, both reductions.
fn check_energy(seed: u64, attempt: u64, h: f64) -> Result<Option<CheckReport>> {
    let mut rng = Rng::with_stream(seed, attempt);
    let (n, v) = shape(&mut rng, 7, 11);
    let hd = 2 + rng.below(6);
    let dae = DaeParams::init(v, hd, 0.02, &mut rng);
    let x = uniform_matrix(&mut rng, n, v, 0.05, 0.95);
    let weights: Vec<f64> = (0..n).map(|_| rng.normal()).collect();
    let norm = if seed % 2 == 0 {
        EnergyNorm::Sum
    } else {
        EnergyNorm::Mean
    };
    let pass = dae.forward(&x, None, norm)?;
    let (_, dx) = dae.backward(&pass, &weights, norm)?;
    let f = |p: &[f64]| {
        let x = Matrix::from_vec(n, v, p.to_vec()).unwrap();
        let e = dae.forward(&x, None, norm).unwrap().energies;
        e.iter().zip(&weights).map(|(a, b)| a * b).sum()
    };
    report(
        "energy",
        seed,
        format!("{n}x{v}/{hd}"),
        f,
        x.data(),
        dx.data(),
        h,
    )
}

/// Margin placed between two sorted fake energies, so the hinge is active for
/// some samples and comfortably away from its kink for all.
fn split_margin(energies: &[f64]) -> f64 {
    let mut e = energies.to_vec();
    e.sort_by(f64::total_cmp);
    let mid = e.len() / 2;
    0.5 * (e[mid - 1] + e[mid]).max(1e-3)
}

fn check_f_d(name: &str, seed: u64, attempt: u64, h: f64, p: f64) -> Result<Option<CheckReport>> {
    let mut rng = Rng::with_stream(seed, attempt);
    let (b, v) = shape(&mut rng, 7, 11);
    let hd = 2 + rng.below(6);
    let norm = if seed % 2 == 0 {
        EnergyNorm::Sum
    } else {
        EnergyNorm::Mean
    };
    let mut dae = DaeParams::init(v, hd, 0.02, &mut rng);
    dae.encoder.bias = (0..hd).map(|_| 0.1 * rng.normal()).collect();
    dae.decoder.bias = (0..v).map(|_| 0.1 * rng.normal()).collect();
    let x = binary_matrix(&mut rng, b, v, 0.4);
    let x_hat = uniform_matrix(&mut rng, b, v, 0.02, 0.98);
    let corruption = CorruptionSpec::new(p)?;
    let real_mask = corruption.sample_mask(b, v, &mut rng);
    let fake_mask = corruption.sample_mask(b, v, &mut rng);
    let fake_e = dae.forward(&x_hat, fake_mask.as_ref(), norm)?.energies;
    let spec = EnergySpec::new(split_margin(&fake_e), norm)?;

    let out = discriminator_objective(
        &x,
        &x_hat,
        &dae,
        &spec,
        real_mask.as_ref(),
        fake_mask.as_ref(),
    )?;
    let params = dae.flatten();
    let f = |q: &[f64]| {
        let mut d = dae.clone();
        d.assign_flat(q);
        discriminator_objective(
            &x,
            &x_hat,
            &d,
            &spec,
            real_mask.as_ref(),
            fake_mask.as_ref(),
        )
        .unwrap()
        .loss
    };
    report(
        name,
        seed,
        format!("{b}x{v}/{hd}"),
        f,
        &params,
        &out.grads.flatten(),
        h,
    )
}

fn check_f_d_clean(seed: u64, attempt: u64, h: f64) -> Result<Option<CheckReport>> {
    check_f_d("f_D", seed, attempt, h, 0.0)
}

fn check_f_d_masked(seed: u64, attempt: u64, h: f64) -> Result<Option<CheckReport>> {
    check_f_d("f_D_masked", seed, attempt, h, 0.4)
}

fn check_f_g(name: &str, seed: u64, attempt: u64, h: f64, p: f64) -> Result<Option<CheckReport>> {
    let mut rng = Rng::with_stream(seed, attempt);
    let (b, v) = shape(&mut rng, 7, 11);
    let noise = 2 + rng.below(5);
    let hidden = 2 + rng.below(10);
    let hd = 2 + rng.below(6);
    let norm = if seed % 2 == 0 {
        EnergyNorm::Sum
    } else {
        EnergyNorm::Mean
    };
    let mut gen = GeneratorParams::init(noise, hidden, v, 0.1, 1e-5, &mut rng);
    for bn in [&mut gen.bn1, &mut gen.bn2] {
        let d = bn.features();
        bn.gamma = (0..d).map(|_| 0.5 + rng.uniform()).collect();
        bn.beta = (0..d).map(|_| 0.5 * rng.normal()).collect();
        bn.running_mean = (0..d).map(|_| 0.1 * rng.normal()).collect();
        bn.running_var = (0..d).map(|_| 0.05 + 0.2 * rng.uniform()).collect();
    }
    let dae = DaeParams::init(v, hd, 0.02, &mut rng);
    let z = rng.normal_matrix(b, noise);
    let mask = CorruptionSpec::new(p)?.sample_mask(b, v, &mut rng);

    let cache = gen.forward_frozen(&z, Mode::Eval)?;
    let out = generator_objective(cache.output(), &dae, norm, mask.as_ref())?;
    let grads = gen.backward(&cache, &out.grad_x_hat)?;
    let f = |q: &[f64]| {
        let mut g = gen.clone();
        g.assign_flat(q);
        let c = g.forward_frozen(&z, Mode::Eval).unwrap();
        generator_objective(c.output(), &dae, norm, mask.as_ref())
            .unwrap()
            .loss
    };
    report(
        name,
        seed,
        format!("{b}x{noise}->{hidden}->{v}"),
        f,
        &gen.flatten(),
        &grads.flatten(),
        h,
    )
}

fn check_f_g_clean(seed: u64, attempt: u64, h: f64) -> Result<Option<CheckReport>> {
    check_f_g("f_G", seed, attempt, h, 0.0)
}

fn check_f_g_masked(seed: u64, attempt: u64, h: f64) -> Result<Option<CheckReport>> {
    check_f_g("f_G_masked", seed, attempt, h, 0.4)
}
