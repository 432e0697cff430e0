//! Binary checkpoint format.
//!
//! ```text
//! b"ADVDOC01"                      8-byte magic
//! manifest_len: u64 little-endian
//! manifest: UTF-8 JSON, manifest_len bytes
//! tensor data: f64 little-endian, tensors back to back in manifest order
//! ```
//!
//! The manifest carries the config, counters, RNG position, Adam step counts,
//! and for every tensor its name, shape and byte offset into the data section.

use std::path::Path;

use serde::{Deserialize, Serialize};

use super::config::TrainConfig;
use crate::error::{Error, Result};
use crate::model::{DaeParams, GeneratorParams};
use crate::nn::{Adam, Parameters, Rng, RngState};

pub const MAGIC: &[u8; 8] = b"ADVDOC01";
pub const FORMAT_VERSION: u32 = 1;

/// Everything needed to evaluate a model or resume its training exactly.
#[derive(Clone, Debug, PartialEq)]
pub struct Checkpoint {
    pub config: TrainConfig,
    pub generator: GeneratorParams,
    pub dae: DaeParams,
    pub generator_opt: Adam,
    pub dae_opt: Adam,
    pub rng: RngState,
    pub epoch: u64,
    pub step: u64,
    /// Validation precision of these parameters, when measured.
    pub validation_score: Option<f64>,
    pub best_epoch: Option<u64>,
    pub best_score: Option<f64>,
}

#[derive(Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct Manifest {
    format_version: u32,
    config: TrainConfig,
    epoch: u64,
    step: u64,
    validation_score: Option<f64>,
    best_epoch: Option<u64>,
    best_score: Option<f64>,
    rng: RngState,
    generator_adam_steps: Vec<u64>,
    dae_adam_steps: Vec<u64>,
    tensors: Vec<TensorEntry>,
}

#[derive(Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct TensorEntry {
    name: String,
    shape: Vec<usize>,
    offset: u64,
}

const GENERATOR_PARAM_NAMES: [&str; 10] = [
    "generator.l1.weight",
    "generator.l1.bias",
    "generator.bn1.gamma",
    "generator.bn1.beta",
    "generator.l2.weight",
    "generator.l2.bias",
    "generator.bn2.gamma",
    "generator.bn2.beta",
    "generator.l3.weight",
    "generator.l3.bias",
];

const DAE_PARAM_NAMES: [&str; 4] = [
    "dae.encoder.weight",
    "dae.encoder.bias",
    "dae.decoder.weight",
    "dae.decoder.bias",
];

fn matrix_shape(m: &crate::nn::Matrix) -> Vec<usize> {
    vec![m.rows(), m.cols()]
}

impl Checkpoint {
    /// Zero-valued checkpoint with the shapes `config` implies.
    fn template(config: &TrainConfig) -> Result<Self> {
        let mut rng = Rng::seed_from_u64(0);
        let generator = GeneratorParams::init(
            config.noise_dim,
            config.generator_hidden,
            config.vocab_size,
            config.bn_momentum,
            config.bn_eps,
            &mut rng,
        );
        let dae = DaeParams::zeros(config.vocab_size, config.hidden_dim, config.leak);
        Ok(Checkpoint {
            generator_opt: Adam::new(&generator, config.adam()),
            dae_opt: Adam::new(&dae, config.adam()),
            config: config.clone(),
            generator,
            dae,
            rng: rng.state(),
            epoch: 0,
            step: 0,
            validation_score: None,
            best_epoch: None,
            best_score: None,
        })
    }

    fn tensor_shapes(&self) -> Vec<(String, Vec<usize>)> {
        let g = &self.generator;
        let mut out: Vec<(String, Vec<usize>)> = Vec::new();
        let gen_shapes = [
            matrix_shape(&g.l1.weight),
            vec![g.l1.bias.len()],
            vec![g.bn1.features()],
            vec![g.bn1.features()],
            matrix_shape(&g.l2.weight),
            vec![g.l2.bias.len()],
            vec![g.bn2.features()],
            vec![g.bn2.features()],
            matrix_shape(&g.l3.weight),
            vec![g.l3.bias.len()],
        ];
        let dae_shapes = [
            matrix_shape(&self.dae.encoder.weight),
            vec![self.dae.encoder.bias.len()],
            matrix_shape(&self.dae.decoder.weight),
            vec![self.dae.decoder.bias.len()],
        ];
        for (n, s) in GENERATOR_PARAM_NAMES.iter().zip(&gen_shapes) {
            out.push((n.to_string(), s.clone()));
        }
        for (bn, len) in [("bn1", g.bn1.features()), ("bn2", g.bn2.features())] {
            out.push((format!("generator.{bn}.running_mean"), vec![len]));
            out.push((format!("generator.{bn}.running_var"), vec![len]));
        }
        for (n, s) in DAE_PARAM_NAMES.iter().zip(&dae_shapes) {
            out.push((n.to_string(), s.clone()));
        }
        for (n, s) in GENERATOR_PARAM_NAMES
            .iter()
            .zip(&gen_shapes)
            .chain(DAE_PARAM_NAMES.iter().zip(&dae_shapes))
        {
            out.push((format!("adam.{n}.m"), s.clone()));
            out.push((format!("adam.{n}.v"), s.clone()));
        }
        out
    }

    fn tensor_data(&self) -> Vec<&[f64]> {
        let g = &self.generator;
        let mut out = self.generator.tensors();
        out.extend([
            &g.bn1.running_mean[..],
            &g.bn1.running_var[..],
            &g.bn2.running_mean[..],
            &g.bn2.running_var[..],
        ]);
        out.extend(self.dae.tensors());
        for s in self.generator_opt.states.iter().chain(&self.dae_opt.states) {
            out.push(&s.m);
            out.push(&s.v);
        }
        out
    }

    fn tensor_data_mut(&mut self) -> Vec<&mut [f64]> {
        // same order as tensor_data; fields are borrowed one by one
        let g = &mut self.generator;
        let mut out: Vec<&mut [f64]> = Vec::new();
        out.extend([
            g.l1.weight.data_mut(),
            &mut g.l1.bias[..],
            &mut g.bn1.gamma[..],
            &mut g.bn1.beta[..],
            g.l2.weight.data_mut(),
            &mut g.l2.bias[..],
            &mut g.bn2.gamma[..],
            &mut g.bn2.beta[..],
            g.l3.weight.data_mut(),
            &mut g.l3.bias[..],
            &mut g.bn1.running_mean[..],
            &mut g.bn1.running_var[..],
            &mut g.bn2.running_mean[..],
            &mut g.bn2.running_var[..],
        ]);
        out.extend(self.dae.tensors_mut());
        for s in self
            .generator_opt
            .states
            .iter_mut()
            .chain(self.dae_opt.states.iter_mut())
        {
            out.push(&mut s.m);
            out.push(&mut s.v);
        }
        out
    }

    pub fn to_bytes(&self) -> Result<Vec<u8>> {
        let shapes = self.tensor_shapes();
        let data = self.tensor_data();
        debug_assert_eq!(shapes.len(), data.len());
        let mut offset = 0u64;
        let mut tensors = Vec::with_capacity(shapes.len());
        for ((name, shape), values) in shapes.into_iter().zip(&data) {
            tensors.push(TensorEntry {
                name,
                shape,
                offset,
            });
            offset += 8 * values.len() as u64;
        }
        let manifest = Manifest {
            format_version: FORMAT_VERSION,
            config: self.config.clone(),
            epoch: self.epoch,
            step: self.step,
            validation_score: self.validation_score,
            best_epoch: self.best_epoch,
            best_score: self.best_score,
            rng: self.rng.clone(),
            generator_adam_steps: self.generator_opt.states.iter().map(|s| s.t).collect(),
            dae_adam_steps: self.dae_opt.states.iter().map(|s| s.t).collect(),
            tensors,
        };
        let json = serde_json::to_vec(&manifest)?;
        let mut out = Vec::with_capacity(16 + json.len() + offset as usize);
        out.extend_from_slice(MAGIC);
        out.extend_from_slice(&(json.len() as u64).to_le_bytes());
        out.extend_from_slice(&json);
        for values in data {
            for v in values {
                out.extend_from_slice(&v.to_le_bytes());
            }
        }
        Ok(out)
    }

    pub fn from_bytes(bytes: &[u8]) -> Result<Self> {
        let bad = |msg: String| Error::Checkpoint(msg);
        if bytes.len() < 16 {
            return Err(bad("truncated header".into()));
        }
        if &bytes[..8] != MAGIC {
            return Err(bad("bad magic bytes, not an ADVDOC01 checkpoint".into()));
        }
        let len = u64::from_le_bytes(bytes[8..16].try_into().unwrap());
        let json_end = 16usize
            .checked_add(usize::try_from(len).map_err(|_| bad("manifest length overflow".into()))?)
            .filter(|&end| end <= bytes.len())
            .ok_or_else(|| bad("truncated manifest".into()))?;
        let manifest: Manifest = serde_json::from_slice(&bytes[16..json_end])
            .map_err(|e| bad(format!("invalid manifest: {e}")))?;
        if manifest.format_version != FORMAT_VERSION {
            return Err(bad(format!(
                "unsupported format version {} (expected {FORMAT_VERSION})",
                manifest.format_version
            )));
        }
        manifest.config.validate()?;

        let mut ckpt = Checkpoint::template(&manifest.config)?;
        let expected = ckpt.tensor_shapes();
        if expected.len() != manifest.tensors.len() {
            return Err(bad(format!(
                "expected {} tensors, manifest lists {}",
                expected.len(),
                manifest.tensors.len()
            )));
        }
        let data = &bytes[json_end..];
        let mut offset = 0u64;
        for ((name, shape), entry) in expected.iter().zip(&manifest.tensors) {
            if &entry.name != name || &entry.shape != shape || entry.offset != offset {
                return Err(bad(format!(
                    "tensor {:?} {:?}@{} does not match expected {name:?} {shape:?}@{offset}",
                    entry.name, entry.shape, entry.offset
                )));
            }
            offset += 8 * shape.iter().product::<usize>() as u64;
        }
        if data.len() as u64 != offset {
            return Err(bad(format!(
                "tensor data is {} bytes, expected {offset}",
                data.len()
            )));
        }
        let mut chunks = data.chunks_exact(8);
        for tensor in ckpt.tensor_data_mut() {
            for v in tensor.iter_mut() {
                *v = f64::from_le_bytes(chunks.next().unwrap().try_into().unwrap());
            }
        }

        for (state, &t) in ckpt
            .generator_opt
            .states
            .iter_mut()
            .zip(&manifest.generator_adam_steps)
        {
            state.t = t;
        }
        for (state, &t) in ckpt.dae_opt.states.iter_mut().zip(&manifest.dae_adam_steps) {
            state.t = t;
        }
        if manifest.generator_adam_steps.len() != ckpt.generator_opt.states.len()
            || manifest.dae_adam_steps.len() != ckpt.dae_opt.states.len()
        {
            return Err(bad("adam step counts do not match tensor count".into()));
        }
        Rng::from_state(&manifest.rng)?;
        ckpt.rng = manifest.rng;
        ckpt.epoch = manifest.epoch;
        ckpt.step = manifest.step;
        ckpt.validation_score = manifest.validation_score;
        ckpt.best_epoch = manifest.best_epoch;
        ckpt.best_score = manifest.best_score;
        Ok(ckpt)
    }
}

pub fn save_checkpoint(ckpt: &Checkpoint, path: impl AsRef<Path>) -> Result<()> {
    std::fs::write(path, ckpt.to_bytes()?)?;
    Ok(())
}

pub fn load_checkpoint(path: impl AsRef<Path>) -> Result<Checkpoint> {
    Checkpoint::from_bytes(&std::fs::read(path)?)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::synthetic::SyntheticSpec;
    use crate::training::{TrainConfig, TrainState};

    fn small_config() -> TrainConfig {
        let mut c = TrainConfig::for_vocab(60);
        c.noise_dim = 4;
        c.hidden_dim = 5;
        c.generator_hidden = 8;
        c.batch_size = 10;
        c.epochs = 2;
        c.seed = 11;
        c.validation_size = 10;
        c.lr = 1e-3;
        c
    }

    fn trained() -> Checkpoint {
        let corpus = SyntheticSpec::default().generate(40, 3).unwrap();
        let mut state = TrainState::new(&small_config()).unwrap();
        state.run_epoch(&corpus).unwrap();
        state.snapshot(Some(0.5))
    }

    #[test]
    fn round_trip_is_bit_exact() {
        let ckpt = trained();
        let bytes = ckpt.to_bytes().unwrap();
        let back = Checkpoint::from_bytes(&bytes).unwrap();
        assert_eq!(back, ckpt);
        assert_eq!(back.to_bytes().unwrap(), bytes);
    }

    #[test]
    fn file_round_trip() {
        let ckpt = trained();
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("c.bin");
        save_checkpoint(&ckpt, &path).unwrap();
        assert_eq!(load_checkpoint(&path).unwrap(), ckpt);
    }

    #[test]
    fn rejects_bad_magic() {
        let mut bytes = trained().to_bytes().unwrap();
        bytes[0] = b'X';
        let err = Checkpoint::from_bytes(&bytes).unwrap_err();
        assert!(err.to_string().contains("magic"), "{err}");
    }

    #[test]
    fn rejects_truncation() {
        let bytes = trained().to_bytes().unwrap();
        for cut in [0, 7, 15, 40, bytes.len() - 1] {
            assert!(
                matches!(
                    Checkpoint::from_bytes(&bytes[..cut]),
                    Err(Error::Checkpoint(_))
                ),
                "cut {cut}"
            );
        }
        let mut extra = bytes.clone();
        extra.push(0);
        assert!(Checkpoint::from_bytes(&extra).is_err());
    }

    #[test]
    fn rejects_shape_mismatch() {
        let bytes = trained().to_bytes().unwrap();
        let len = u64::from_le_bytes(bytes[8..16].try_into().unwrap()) as usize;
        let mut manifest: serde_json::Value = serde_json::from_slice(&bytes[16..16 + len]).unwrap();
        manifest["config"]["hidden_dim"] = 6.into();
        let json = serde_json::to_vec(&manifest).unwrap();
        let mut out = MAGIC.to_vec();
        out.extend((json.len() as u64).to_le_bytes());
        out.extend(json);
        out.extend(&bytes[16 + len..]);
        assert!(Checkpoint::from_bytes(&out).is_err());
    }

    #[test]
    fn tensor_names_are_unique() {
        let shapes = trained().tensor_shapes();
        let mut names: Vec<_> = shapes.iter().map(|(n, _)| n.clone()).collect();
        names.sort();
        names.dedup();
        assert_eq!(names.len(), shapes.len());
        assert_eq!(shapes.len(), 10 + 4 + 4 + 2 * 14);
    }
}
