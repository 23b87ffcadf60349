use std::path::Path;

use serde::{Deserialize, Serialize};

use super::binio::{fnv1a, In, Out};
use super::train::TrainConfig;
use crate::autograd::Mat;
use crate::denoiser::{DenoiserConfig, Weights};
use crate::diffusion::{DiffusionSchedule, ScheduleParams};
use crate::error::Result;
use crate::optim::AdamState;

pub const DIPC_MAGIC: &[u8; 4] = b"DIPC";
pub const DIPC_VERSION: u32 = 1;

/// A self-describing snapshot of training: model, optimizer and position.
#[derive(Debug, Clone, PartialEq)]
pub struct Checkpoint {
    pub generator_id: String,
    pub train: TrainConfig,
    /// Number of completed optimizer updates.
    pub step: u64,
    pub weights: Weights,
    pub adam: AdamState,
}

/// The JSON blob at the head of the file.
#[derive(Serialize, Deserialize)]
struct Header {
    generator_id: String,
    denoiser: DenoiserConfig,
    schedule: ScheduleParams,
    train: TrainConfig,
    step: u64,
    /// Batch order, augmentation and noise are all pure functions of
    /// `(seed, step)`, so this pair is the whole RNG state.
    rng: RngState,
}

#[derive(Serialize, Deserialize)]
struct RngState {
    seed: u64,
    next_step: u64,
}

impl Checkpoint {
    pub fn config(&self) -> &DenoiserConfig {
        &self.weights.config
    }

    pub fn schedule(&self) -> Result<DiffusionSchedule> {
        DiffusionSchedule::from_params(self.train.schedule)
    }

    fn body(&self) -> Result<Vec<u8>> {
        let header = Header {
            generator_id: self.generator_id.clone(),
            denoiser: self.weights.config,
            schedule: self.train.schedule,
            train: self.train.clone(),
            step: self.step,
            rng: RngState { seed: self.train.seed, next_step: self.step },
        };
        let json = serde_json::to_vec(&header)?;
        let mut o = Out::default();
        o.bytes(DIPC_MAGIC);
        o.u32(DIPC_VERSION as usize);
        o.u32(json.len());
        o.bytes(&json);
        o.u32(3 * self.weights.tensors.len());
        let groups = [("", &self.weights.tensors), ("adam.m/", &self.adam.m), ("adam.v/", &self.adam.v)];
        for (prefix, tensors) in groups {
            for (name, t) in self.weights.names.iter().zip(tensors.iter()) {
                o.str(&format!("{prefix}{name}"));
                o.u32(2);
                o.u32(t.rows);
                o.u32(t.cols);
                o.f32s(&t.data);
            }
        }
        Ok(o.buf)
    }

    /// Serialized file: body followed by its 8-byte FNV-1a hash.
    pub fn to_bytes(&self) -> Result<Vec<u8>> {
        let mut body = self.body()?;
        let hash = fnv1a(&body);
        body.extend_from_slice(&hash.to_le_bytes());
        Ok(body)
    }

    /// The trailing hash; covers the header and every tensor byte.
    pub fn content_hash(&self) -> Result<u64> {
        Ok(fnv1a(&self.body()?))
    }

    pub fn from_bytes(buf: &[u8]) -> Result<Self> {
        let probe = In::new(buf, "DIPC");
        if buf.len() < 8 {
            return Err(probe.err("truncated"));
        }
        let (body, tail) = buf.split_at(buf.len() - 8);
        if fnv1a(body) != u64::from_le_bytes(tail.try_into().expect("8 bytes")) {
            return Err(probe.err("content hash mismatch"));
        }
        let mut r = In::new(body, "DIPC");
        r.magic(DIPC_MAGIC, DIPC_VERSION)?;
        let json_len = r.u32()?;
        let header: Header = serde_json::from_slice(r.take(json_len)?)?;
        let count = r.u32()?;
        let mut table = std::collections::HashMap::with_capacity(count);
        for _ in 0..count {
            let name = r.str()?;
            let rank = r.u32()?;
            if rank != 2 {
                return Err(r.err(format!("tensor `{name}` has rank {rank}, expected 2")));
            }
            let (rows, cols) = (r.u32()?, r.u32()?);
            let data = r.f32s(rows * cols)?;
            table.insert(name, Mat::from_vec(rows, cols, data));
        }
        r.finish()?;
        let mut train = header.train;
        train.schedule = header.schedule;
        train.seed = header.rng.seed;
        let weights = Weights::from_named(header.denoiser, |n| table.remove(n))?;
        let mut moment = |prefix: &str| -> Result<Vec<Mat>> {
            weights
                .names
                .iter()
                .zip(&weights.tensors)
                .map(|(n, w)| {
                    let key = format!("{prefix}{n}");
                    match table.remove(&key) {
                        Some(t) if (t.rows, t.cols) == (w.rows, w.cols) => Ok(t),
                        _ => Err(r.err(format!("missing or misshapen tensor `{key}`"))),
                    }
                })
                .collect()
        };
        let m = moment("adam.m/")?;
        let v = moment("adam.v/")?;
        if let Some(extra) = table.keys().next() {
            return Err(r.err(format!("unexpected tensor `{extra}`")));
        }
        Ok(Self {
            generator_id: header.generator_id,
            train,
            step: header.rng.next_step,
            weights,
            adam: AdamState { step: header.step, m, v },
        })
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        Ok(std::fs::write(path, self.to_bytes()?)?)
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        Self::from_bytes(&std::fs::read(path)?)
    }

    /// Copy with every tensor rounded to the stored f32 precision.
    pub fn quantized(&self) -> Result<Self> {
        Self::from_bytes(&self.to_bytes()?)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::denoiser::{init_weights, CondMode};

    fn sample() -> Checkpoint {
        let cfg = DenoiserConfig {
            n_layers: 1,
            n_heads: 2,
            d_model: 8,
            n_param_tokens: 6,
            cond_width: 16,
            proj_hidden: 8,
            cond: CondMode::Patch { patch: 8, image_size: 32 },
        };
        let weights = init_weights(&cfg, 3).unwrap();
        let mut adam = AdamState::new(&weights.tensors);
        adam.step = 4;
        adam.m[0].data[0] = 0.25;
        Checkpoint { generator_id: "table".into(), train: TrainConfig::default(), step: 4, weights, adam }
    }

    #[test]
    fn round_trip_is_exact_after_quantization() {
        let c = sample().quantized().unwrap();
        let bytes = c.to_bytes().unwrap();
        assert_eq!(&bytes[..4], DIPC_MAGIC);
        let back = Checkpoint::from_bytes(&bytes).unwrap();
        assert_eq!(back, c);
        assert_eq!(back.content_hash().unwrap(), c.content_hash().unwrap());
        assert_eq!(u64::from_le_bytes(bytes[bytes.len() - 8..].try_into().unwrap()), c.content_hash().unwrap());
    }

    #[test]
    fn hash_covers_tensor_bytes() {
        let c = sample();
        let mut d = c.clone();
        d.weights.tensors[3].data[1] += 0.5;
        assert_ne!(c.content_hash().unwrap(), d.content_hash().unwrap());
        let mut bytes = c.to_bytes().unwrap();
        let mid = bytes.len() / 2;
        bytes[mid] ^= 1;
        assert!(matches!(Checkpoint::from_bytes(&bytes), Err(crate::Error::Format(_))));
        assert!(Checkpoint::from_bytes(&bytes[..5]).is_err());
    }
}
