use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};

use super::DenoiserConfig;
use crate::autograd::Mat;
use crate::condition::Linear;
use crate::error::Result;

/// Tensor indices of an affine layer.
#[derive(Debug, Clone, Copy)]
pub struct LinearIds {
    pub w: usize,
    pub b: usize,
}

#[derive(Debug, Clone)]
pub struct BlockIds {
    /// Per-block learned offset added to the shared modulation, `1 x 9D`.
    pub table: usize,
    pub self_qkv: LinearIds,
    pub self_out: LinearIds,
    pub cross_q: LinearIds,
    pub cross_kv: LinearIds,
    pub cross_out: LinearIds,
    pub mlp_in: LinearIds,
    pub mlp_out: LinearIds,
}

/// Index of every weight tensor, derived from the config alone.
#[derive(Debug, Clone)]
pub struct Layout {
    pub patch: Option<LinearIds>,
    pub proj_in: LinearIds,
    pub proj_out: LinearIds,
    pub x_scale: usize,
    pub x_pos: usize,
    pub t_in: LinearIds,
    pub t_out: LinearIds,
    pub adaln: LinearIds,
    pub blocks: Vec<BlockIds>,
    pub final_table: usize,
    pub head: LinearIds,
}

/// How a tensor is initialized.
#[derive(Debug, Clone, Copy)]
enum Init {
    /// Gaussian with standard deviation `1/sqrt(fan_in)`.
    Fan,
    Normal(f64),
    Zero,
}

struct Builder {
    specs: Vec<(String, usize, usize, Init)>,
}

impl Builder {
    fn tensor(&mut self, name: String, rows: usize, cols: usize, init: Init) -> usize {
        self.specs.push((name, rows, cols, init));
        self.specs.len() - 1
    }

    fn linear(&mut self, name: &str, fan_in: usize, fan_out: usize) -> LinearIds {
        let w = self.tensor(format!("{name}.w"), fan_in, fan_out, Init::Fan);
        let b = self.tensor(format!("{name}.b"), 1, fan_out, Init::Zero);
        LinearIds { w, b }
    }
}

fn plan(cfg: &DenoiserConfig) -> (Layout, Builder) {
    let d = cfg.d_model;
    let n = cfg.n_param_tokens;
    let mut b = Builder { specs: Vec::new() };
    let patch = match cfg.cond {
        super::CondMode::Patch { patch, .. } => Some(b.linear("cond.patch", patch * patch, cfg.cond_width)),
        super::CondMode::External { .. } => None,
    };
    let proj_in = b.linear("cond.proj.fc1", cfg.cond_width, cfg.proj_hidden);
    let proj_out = b.linear("cond.proj.fc2", cfg.proj_hidden, d);
    let x_scale = b.tensor("x_embed.scale".into(), n, d, Init::Normal(1.0));
    let x_pos = b.tensor("x_embed.pos".into(), n, d, Init::Normal(0.02));
    let t_in = b.linear("t_embed.fc1", d, d);
    let t_out = b.linear("t_embed.fc2", d, d);
    let adaln = LinearIds { w: b.tensor("adaln.w".into(), d, 9 * d, Init::Zero), b: b.tensor("adaln.b".into(), 1, 9 * d, Init::Zero) };
    let blocks = (0..cfg.n_layers)
        .map(|i| {
            let p = format!("blocks.{i}");
            BlockIds {
                table: b.tensor(format!("{p}.table"), 1, 9 * d, Init::Zero),
                self_qkv: b.linear(&format!("{p}.self.qkv"), d, 3 * d),
                self_out: b.linear(&format!("{p}.self.out"), d, d),
                cross_q: b.linear(&format!("{p}.cross.q"), d, d),
                cross_kv: b.linear(&format!("{p}.cross.kv"), d, 2 * d),
                cross_out: b.linear(&format!("{p}.cross.out"), d, d),
                mlp_in: b.linear(&format!("{p}.mlp.fc1"), d, 4 * d),
                mlp_out: b.linear(&format!("{p}.mlp.fc2"), 4 * d, d),
            }
        })
        .collect();
    let final_table = b.tensor("final.table".into(), 1, 2 * d, Init::Normal(1.0 / (d as f64).sqrt()));
    let head = LinearIds {
        w: b.tensor("head.w".into(), d, 1, Init::Zero),
        b: b.tensor("head.b".into(), 1, 1, Init::Zero),
    };
    (Layout { patch, proj_in, proj_out, x_scale, x_pos, t_in, t_out, adaln, blocks, final_table, head }, b)
}

/// Named weight tensors in layout order.
#[derive(Debug, Clone, PartialEq)]
pub struct Weights {
    pub config: DenoiserConfig,
    pub names: Vec<String>,
    pub tensors: Vec<Mat>,
}

impl Weights {
    pub fn layout(&self) -> Layout {
        plan(&self.config).0
    }

    pub fn linear(&self, ids: LinearIds) -> Linear<'_> {
        Linear { w: &self.tensors[ids.w], b: &self.tensors[ids.b] }
    }

    pub fn param_count(&self) -> usize {
        self.tensors.iter().map(Mat::len).sum()
    }

    pub fn is_finite(&self) -> bool {
        self.tensors.iter().all(|t| t.data.iter().all(|v| v.is_finite()))
    }

    /// Zero tensors shaped like these weights.
    pub fn zeros_like(&self) -> Vec<Mat> {
        self.tensors.iter().map(|t| Mat::zeros(t.rows, t.cols)).collect()
    }

    /// Rebuilds weights from a name -> tensor table, checking every shape.
    pub fn from_named(config: DenoiserConfig, mut lookup: impl FnMut(&str) -> Option<Mat>) -> Result<Self> {
        config.validate()?;
        let (_, b) = plan(&config);
        let mut names = Vec::with_capacity(b.specs.len());
        let mut tensors = Vec::with_capacity(b.specs.len());
        for (name, rows, cols, _) in b.specs {
            let t = lookup(&name).ok_or_else(|| crate::Error::Format(format!("missing tensor `{name}`")))?;
            if (t.rows, t.cols) != (rows, cols) {
                return Err(crate::Error::Format(format!(
                    "tensor `{name}` is {}x{}, expected {rows}x{cols}",
                    t.rows, t.cols
                )));
            }
            names.push(name);
            tensors.push(t);
        }
        Ok(Self { config, names, tensors })
    }
}

/// Deterministic initialization. The output head is zero, so the untrained
/// model predicts zero noise everywhere.
pub fn init_weights(config: &DenoiserConfig, seed: u64) -> Result<Weights> {
    config.validate()?;
    let (_, b) = plan(config);
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut names = Vec::with_capacity(b.specs.len());
    let mut tensors = Vec::with_capacity(b.specs.len());
    for (name, rows, cols, init) in b.specs {
        let std = match init {
            Init::Fan => 1.0 / (rows as f64).sqrt(),
            Init::Normal(s) => s,
            Init::Zero => 0.0,
        };
        let data = if std == 0.0 {
            vec![0.0; rows * cols]
        } else {
            let dist = Normal::new(0.0, std).expect("positive std");
            (0..rows * cols).map(|_| dist.sample(&mut rng)).collect()
        };
        names.push(name);
        tensors.push(Mat::from_vec(rows, cols, data));
    }
    Ok(Weights { config: *config, names, tensors })
}

/// Exact number of scalar weights implied by the config.
pub fn count_params(config: &DenoiserConfig) -> Result<usize> {
    config.validate_widths()?;
    Ok(plan(config).1.specs.iter().map(|(_, r, c, _)| r * c).sum())
}
