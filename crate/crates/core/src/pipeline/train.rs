use std::fs::OpenOptions;
use std::path::Path;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::binio::fnv1a;
use super::checkpoint::Checkpoint;
use super::dataset::Dataset;
use crate::denoiser::{init_weights, loss_and_grad, CondInput, CondMode, DenoiserConfig, TrainItem};
use crate::diffusion::{DiffusionSchedule, ScheduleParams};
use crate::error::{invalid, Error, Result};
use crate::generators::is_mirror_symmetric;
use crate::optim::{AdamConfig, AdamState};
use crate::render::{apply_ops, AugmentSpec};

/// Everything that determines a training run besides the dataset.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct TrainConfig {
    pub batch_size: usize,
    pub lr: f64,
    pub warmup: u64,
    /// Anneal the learning rate to zero over `steps` with a half cosine.
    pub cosine_decay: bool,
    pub steps: u64,
    pub seed: u64,
    /// Write a checkpoint every this many steps (0: only at the end).
    pub checkpoint_every: u64,
    pub n_layers: usize,
    pub n_heads: usize,
    pub d_model: usize,
    pub cond_width: usize,
    pub proj_hidden: usize,
    pub cond: CondMode,
    pub schedule: ScheduleParams,
    pub augment: AugmentSpec,
}

impl Default for TrainConfig {
    fn default() -> Self {
        let d = DenoiserConfig::desk(1);
        Self {
            batch_size: 64,
            lr: 1e-4,
            warmup: 100,
            cosine_decay: false,
            steps: 1000,
            seed: 0,
            checkpoint_every: 0,
            n_layers: d.n_layers,
            n_heads: d.n_heads,
            d_model: d.d_model,
            cond_width: d.cond_width,
            proj_hidden: d.proj_hidden,
            cond: d.cond,
            schedule: ScheduleParams::default(),
            augment: AugmentSpec::default(),
        }
    }
}

impl TrainConfig {
    pub fn denoiser(&self, n_param_tokens: usize) -> DenoiserConfig {
        DenoiserConfig {
            n_layers: self.n_layers,
            n_heads: self.n_heads,
            d_model: self.d_model,
            n_param_tokens,
            cond_width: self.cond_width,
            proj_hidden: self.proj_hidden,
            cond: self.cond,
        }
    }

    pub fn adam(&self) -> AdamConfig {
        let decay_until = if self.cosine_decay { self.steps } else { 0 };
        AdamConfig { lr: self.lr, warmup: self.warmup, decay_until, ..AdamConfig::default() }
    }

    pub fn validate(&self) -> Result<()> {
        if self.batch_size == 0 {
            return Err(invalid("batch_size must be positive"));
        }
        self.adam().validate()?;
        self.augment.validate()?;
        DiffusionSchedule::from_params(self.schedule)?;
        Ok(())
    }
}

/// One line of the loss log.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LossRow {
    pub step: u64,
    pub loss: f64,
    pub lr: f64,
}

#[derive(Debug, Clone)]
pub struct TrainResult {
    pub checkpoint: Checkpoint,
    pub log: Vec<LossRow>,
}

/// Trains on the dataset's training split. With `out`, writes `loss.csv`,
/// periodic `step_<n>.dipc` files and `checkpoint.dipc` into that directory.
pub fn train(config: &TrainConfig, dataset: &Dataset, out: Option<&Path>) -> Result<TrainResult> {
    let (train_idx, _) = dataset.split();
    train_on(config, dataset, &train_idx, out, |_| {})
}

/// Trains on the given item indices, reporting every step to `on_step`.
pub fn train_on(
    config: &TrainConfig,
    dataset: &Dataset,
    indices: &[usize],
    out: Option<&Path>,
    on_step: impl FnMut(&LossRow),
) -> Result<TrainResult> {
    config.validate()?;
    let model = config.denoiser(dataset.n_params());
    let weights = init_weights(&model, config.seed)?;
    let adam = AdamState::new(&weights.tensors);
    let start = Checkpoint { generator_id: dataset.generator_id.clone(), train: config.clone(), step: 0, weights, adam };
    run(start, dataset, indices, out, on_step)
}

/// Continues a checkpoint up to its configured step count. The data order is
/// a pure function of the step, so it picks up where the run left off.
pub fn resume(
    checkpoint: Checkpoint,
    dataset: &Dataset,
    indices: &[usize],
    out: Option<&Path>,
    on_step: impl FnMut(&LossRow),
) -> Result<TrainResult> {
    run(checkpoint, dataset, indices, out, on_step)
}

fn run(
    mut ck: Checkpoint,
    dataset: &Dataset,
    indices: &[usize],
    out: Option<&Path>,
    mut on_step: impl FnMut(&LossRow),
) -> Result<TrainResult> {
    let config = ck.train.clone();
    config.validate()?;
    check_compatible(&ck, dataset)?;
    if indices.is_empty() || indices.iter().any(|&i| i >= dataset.len()) {
        return Err(invalid("training indices must be non-empty and within the dataset"));
    }
    let schedule = DiffusionSchedule::from_params(config.schedule)?;
    let adam_cfg = config.adam();
    let allow_flip = is_mirror_symmetric(&dataset.generator_id);
    let mut writer = match out {
        Some(dir) => Some(open_log(dir)?),
        None => None,
    };
    let mut log = Vec::new();
    let mut order = EpochOrder::new(indices, config.seed);
    while ck.step < config.steps {
        let step = ck.step;
        let batch: Vec<TrainItem> = (0..config.batch_size)
            .map(|j| {
                let item = &dataset.items[order.at(step * config.batch_size as u64 + j as u64)];
                let seed = mix(config.seed, step, j as u64, b"aug");
                let ops = config.augment.plan(seed, allow_flip);
                TrainItem { x0: item.x.clone(), cond: CondInput::Image(apply_ops(&item.image, &ops)) }
            })
            .collect();
        let (loss, grads) = loss_and_grad(&batch, &ck.weights, &schedule, mix(config.seed, step, 0, b"noise"))?;
        if !loss.is_finite() || !grads.is_finite() {
            if let Some(dir) = out {
                ck.save(dir.join("last_good.dipc"))?;
            }
            return Err(Error::NanLoss { step: step as usize, last_good_step: step as usize });
        }
        let lr = ck.adam.update(&adam_cfg, &mut ck.weights.tensors, &grads.tensors)?;
        ck.step += 1;
        let row = LossRow { step, loss, lr };
        if let Some(w) = writer.as_mut() {
            w.serialize(row)?;
            w.flush()?;
        }
        on_step(&row);
        log.push(row);
        if let Some(dir) = out {
            if config.checkpoint_every > 0 && ck.step % config.checkpoint_every == 0 {
                ck.save(dir.join(format!("step_{}.dipc", ck.step)))?;
            }
        }
    }
    if let Some(dir) = out {
        ck.save(dir.join("checkpoint.dipc"))?;
    }
    Ok(TrainResult { checkpoint: ck, log })
}

fn check_compatible(ck: &Checkpoint, dataset: &Dataset) -> Result<()> {
    if ck.generator_id != dataset.generator_id {
        return Err(invalid(format!(
            "checkpoint is for `{}`, dataset is for `{}`",
            ck.generator_id, dataset.generator_id
        )));
    }
    let cfg = ck.config();
    if cfg.n_param_tokens != dataset.n_params() {
        return Err(invalid("dataset parameter count does not match the model"));
    }
    match cfg.cond {
        CondMode::Patch { image_size, .. } if image_size == dataset.image_size => Ok(()),
        CondMode::Patch { image_size, .. } => Err(invalid(format!(
            "model expects {image_size}x{image_size} images, dataset has {0}x{0}",
            dataset.image_size
        ))),
        CondMode::External { .. } => {
            Err(invalid("datasets hold images; external-token models are fed through loss_and_grad directly"))
        }
    }
}

fn open_log(dir: &Path) -> Result<csv::Writer<std::fs::File>> {
    std::fs::create_dir_all(dir)?;
    let path = dir.join("loss.csv");
    let fresh = std::fs::metadata(&path).map(|m| m.len() == 0).unwrap_or(true);
    let file = OpenOptions::new().create(true).append(true).open(path)?;
    Ok(csv::WriterBuilder::new().has_headers(fresh).from_writer(file))
}

/// Deterministic sub-seed for one use at one step.
fn mix(seed: u64, step: u64, j: u64, tag: &[u8]) -> u64 {
    let mut bytes = Vec::with_capacity(24 + tag.len());
    for v in [seed, step, j] {
        bytes.extend_from_slice(&v.to_le_bytes());
    }
    bytes.extend_from_slice(tag);
    fnv1a(&bytes)
}

/// Sampling without replacement: each epoch is a fresh seeded shuffle.
struct EpochOrder<'a> {
    indices: &'a [usize],
    seed: u64,
    epoch: u64,
    perm: Vec<usize>,
}

impl<'a> EpochOrder<'a> {
    fn new(indices: &'a [usize], seed: u64) -> Self {
        let mut o = Self { indices, seed, epoch: u64::MAX, perm: Vec::new() };
        o.load(0);
        o
    }

    fn load(&mut self, epoch: u64) {
        let mut rng = ChaCha8Rng::seed_from_u64(self.seed);
        rng.set_stream(epoch);
        self.perm = self.indices.to_vec();
        self.perm.shuffle(&mut rng);
        self.epoch = epoch;
    }

    /// Dataset index at global sample position `g`.
    fn at(&mut self, g: u64) -> usize {
        let n = self.indices.len() as u64;
        if g / n != self.epoch {
            self.load(g / n);
        }
        self.perm[(g % n) as usize]
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::pipeline::build_dataset;

    pub(crate) fn tiny_config(steps: u64) -> TrainConfig {
        TrainConfig {
            batch_size: 4,
            steps,
            n_layers: 1,
            n_heads: 2,
            d_model: 16,
            cond_width: 16,
            proj_hidden: 16,
            cond: CondMode::Patch { patch: 8, image_size: 32 },
            lr: 1e-3,
            warmup: 2,
            ..TrainConfig::default()
        }
    }

    #[test]
    fn epochs_visit_every_index_once() {
        let idx: Vec<usize> = (10..17).collect();
        let mut o = EpochOrder::new(&idx, 4);
        for e in 0..3u64 {
            let mut seen: Vec<usize> = (0..7).map(|k| o.at(e * 7 + k)).collect();
            seen.sort_unstable();
            assert_eq!(seen, idx);
        }
    }

    #[test]
    fn runs_are_reproducible_and_logged() {
        let d = build_dataset("table", 10, 1, 32).unwrap();
        let dir = tempfile::tempdir().unwrap();
        let cfg = TrainConfig { checkpoint_every: 2, ..tiny_config(4) };
        let a = train(&cfg, &d, Some(dir.path())).unwrap();
        let b = train(&cfg, &d, None).unwrap();
        assert_eq!(a.checkpoint.content_hash().unwrap(), b.checkpoint.content_hash().unwrap());
        assert_eq!(a.checkpoint.step, 4);
        assert!((a.log[0].loss - 1.0).abs() < 0.5);
        assert!((a.log[0].lr - 5e-4).abs() < 1e-15 && a.log[3].lr == 1e-3);
        for f in ["step_2.dipc", "step_4.dipc", "checkpoint.dipc"] {
            assert!(dir.path().join(f).exists(), "{f}");
        }
        let saved = Checkpoint::load(dir.path().join("checkpoint.dipc")).unwrap();
        assert_eq!(saved.content_hash().unwrap(), a.checkpoint.content_hash().unwrap());
        let csv = std::fs::read_to_string(dir.path().join("loss.csv")).unwrap();
        assert!(csv.starts_with("step,loss,lr\n"));
        assert_eq!(csv.lines().count(), 5);

        // the log is append-only across runs
        train(&cfg, &d, Some(dir.path())).unwrap();
        let csv = std::fs::read_to_string(dir.path().join("loss.csv")).unwrap();
        assert_eq!(csv.lines().count(), 9);

        let other = train(&TrainConfig { seed: 1, ..cfg }, &d, None).unwrap();
        assert_ne!(other.checkpoint.content_hash().unwrap(), a.checkpoint.content_hash().unwrap());
    }

    #[test]
    fn resume_continues_the_step_count() {
        let d = build_dataset("table", 10, 1, 32).unwrap();
        let (idx, _) = d.split();
        let first = train_on(&tiny_config(2), &d, &idx, None, |_| {}).unwrap().checkpoint;
        let mut ck = first.quantized().unwrap();
        ck.train.steps = 5;
        let r = resume(ck, &d, &idx, None, |_| {}).unwrap();
        assert_eq!(r.checkpoint.step, 5);
        assert_eq!(r.log.iter().map(|l| l.step).collect::<Vec<_>>(), vec![2, 3, 4]);
    }

    #[test]
    fn divergence_aborts_with_last_good_checkpoint() {
        let d = build_dataset("table", 10, 1, 32).unwrap();
        let dir = tempfile::tempdir().unwrap();
        let cfg = TrainConfig { lr: 1e300, warmup: 0, ..tiny_config(20) };
        match train(&cfg, &d, Some(dir.path())) {
            Err(Error::NanLoss { step, last_good_step }) => {
                assert!(step >= 1 && step == last_good_step);
                let ck = Checkpoint::load(dir.path().join("last_good.dipc")).unwrap();
                assert_eq!(ck.step as usize, last_good_step);
            }
            other => panic!("expected divergence, got {:?}", other.map(|r| r.checkpoint.step)),
        }
    }

    #[test]
    fn rejects_incompatible_inputs() {
        let d = build_dataset("table", 10, 1, 32).unwrap();
        let wrong_size = TrainConfig { cond: CondMode::Patch { patch: 8, image_size: 64 }, ..tiny_config(1) };
        assert!(train(&wrong_size, &d, None).is_err());
        assert!(train(&TrainConfig { batch_size: 0, ..tiny_config(1) }, &d, None).is_err());
        let mut aug = tiny_config(1);
        aug.augment.p_mask = 0.8;
        aug.augment.p_edge = 0.8;
        assert!(train(&aug, &d, None).is_err());
        assert!(train_on(&tiny_config(1), &d, &[], None, |_| {}).is_err());
    }
}
