use std::path::Path;

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

use super::binio::{f32_round, fnv1a, In, Out};
use crate::canon::{canonicalize, CanonVector};
use crate::error::{invalid, Error, Result};
use crate::generators::{generate, schema, GeneratorSchema, ParamVector};
use crate::render::{camera_grid, rasterize, Camera, Image, RenderMode};

pub const DIPD_MAGIC: &[u8; 4] = b"DIPD";
pub const DIPD_VERSION: u32 = 1;

/// One rendered training pair.
#[derive(Debug, Clone, PartialEq)]
pub struct DatasetItem {
    pub x: CanonVector,
    pub image: Image,
    /// `[azimuth, elevation, distance_factor]` of the render.
    pub camera: [f64; 3],
}

/// Rendered (canonical parameters, image) pairs for one generator.
///
/// Values are held at the f32 precision of the file format, so a dataset
/// compares equal to its own reloaded file.
#[derive(Debug, Clone, PartialEq)]
pub struct Dataset {
    pub generator_id: String,
    pub image_size: usize,
    pub items: Vec<DatasetItem>,
}

/// Everything that determines a dataset build.
#[derive(Debug, Clone, PartialEq)]
pub struct DatasetSpec {
    pub generator_id: String,
    pub n_items: usize,
    pub seed: u64,
    pub image_size: usize,
    /// Parameters held at a fixed raw value instead of being sampled.
    pub pins: Vec<(String, f64)>,
    /// Render every item from this view instead of drawing from the grid.
    pub fixed_camera: Option<Camera>,
}

impl DatasetSpec {
    pub fn new(generator_id: &str, n_items: usize, seed: u64, image_size: usize) -> Self {
        Self { generator_id: generator_id.into(), n_items, seed, image_size, pins: Vec::new(), fixed_camera: None }
    }

    pub fn pin(mut self, name: &str, value: f64) -> Self {
        self.pins.push((name.into(), value));
        self
    }

    /// Parameters for item `index`: sampled from the schema, then pinned.
    pub fn params(&self, schema: &GeneratorSchema, index: usize) -> Result<ParamVector> {
        let mut rng = item_rng(self.seed, index);
        let mut p = schema.sample_with(&mut rng);
        for (name, value) in &self.pins {
            let i = schema.index_of(name).ok_or_else(|| Error::InvalidParam(name.clone()))?;
            p.values[i] = *value;
        }
        schema.validate(&p)?;
        Ok(p)
    }

    pub fn with_camera(mut self, camera: Camera) -> Self {
        self.fixed_camera = Some(camera);
        self
    }

    /// The fixed camera if set, else a uniform choice over the camera grid.
    pub fn camera(&self, index: usize) -> Camera {
        if let Some(c) = &self.fixed_camera {
            return c.clone().with_size(self.image_size);
        }
        let grid = camera_grid();
        let mut rng = ChaCha8Rng::seed_from_u64(self.seed);
        rng.set_stream(CAMERA_STREAM | index as u64);
        grid[rng.gen_range(0..grid.len())].with_size(self.image_size)
    }
}

/// Camera draws use streams disjoint from the parameter streams.
const CAMERA_STREAM: u64 = 1 << 63;

fn item_rng(seed: u64, index: usize) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(index as u64);
    rng
}

/// Samples, generates and renders `n_items` pairs; deterministic given the seed.
pub fn build_dataset(generator_id: &str, n_items: usize, seed: u64, image_size: usize) -> Result<Dataset> {
    build_dataset_with(&DatasetSpec::new(generator_id, n_items, seed, image_size))
}

pub fn build_dataset_with(spec: &DatasetSpec) -> Result<Dataset> {
    if spec.n_items < 10 {
        return Err(invalid(format!("a dataset needs at least 10 items, got {}", spec.n_items)));
    }
    let schema = schema(&spec.generator_id)?;
    spec.camera(0).validate()?;
    let items = (0..spec.n_items)
        .into_par_iter()
        .map(|index| render_item(spec, &schema, index).map_err(|e| Error::Item { index, source: Box::new(e) }))
        .collect::<Result<Vec<_>>>()?;
    Ok(Dataset { generator_id: spec.generator_id.clone(), image_size: spec.image_size, items })
}

fn render_item(spec: &DatasetSpec, schema: &GeneratorSchema, index: usize) -> Result<DatasetItem> {
    let p = spec.params(schema, index)?;
    let mesh = generate(schema, &p)?;
    let camera = spec.camera(index);
    let mut image = rasterize(&mesh, &camera, RenderMode::Shaded)?;
    let mut x = canonicalize(schema, &p)?;
    f32_round(&mut x.x);
    f32_round(&mut image.data);
    let mut triple = camera.triple();
    f32_round(&mut triple);
    Ok(DatasetItem { x, image, camera: triple })
}

impl Dataset {
    pub fn len(&self) -> usize {
        self.items.len()
    }

    pub fn is_empty(&self) -> bool {
        self.items.is_empty()
    }

    pub fn n_params(&self) -> usize {
        self.items.first().map_or(0, |i| i.x.len())
    }

    /// Deterministic 90/10 split: indices are shuffled with a seed taken from
    /// the content hash, and every tenth shuffled position goes to validation.
    pub fn split(&self) -> (Vec<usize>, Vec<usize>) {
        let mut order: Vec<usize> = (0..self.len()).collect();
        order.shuffle(&mut ChaCha8Rng::seed_from_u64(self.content_hash()));
        let (mut train, mut val) = (Vec::new(), Vec::new());
        for (pos, idx) in order.into_iter().enumerate() {
            if pos % 10 == 9 {
                val.push(idx);
            } else {
                train.push(idx);
            }
        }
        train.sort_unstable();
        val.sort_unstable();
        (train, val)
    }

    pub fn to_bytes(&self) -> Vec<u8> {
        let mut o = Out::default();
        o.bytes(DIPD_MAGIC);
        o.u32(DIPD_VERSION as usize);
        o.u32(self.len());
        o.u32(self.n_params());
        o.u32(self.image_size);
        o.u32(self.image_size);
        for item in &self.items {
            o.f32s(&item.x.x);
            o.f32s(&item.image.data);
            o.f32s(&item.camera);
        }
        o.str(&self.generator_id);
        o.buf
    }

    pub fn from_bytes(buf: &[u8]) -> Result<Self> {
        let mut r = In::new(buf, "DIPD");
        r.magic(DIPD_MAGIC, DIPD_VERSION)?;
        let (n, np, w, h) = (r.u32()?, r.u32()?, r.u32()?, r.u32()?);
        if w != h || w == 0 {
            return Err(r.err(format!("images must be square, got {w}x{h}")));
        }
        let mut raw = Vec::with_capacity(n);
        for _ in 0..n {
            let x = r.f32s(np)?;
            let pixels = r.f32s(w * h)?;
            let cam = r.f32s(3)?;
            raw.push((x, pixels, cam));
        }
        let generator_id = r.str()?;
        r.finish()?;
        let schema = schema(&generator_id)?;
        if schema.len() != np {
            return Err(r.err(format!("{generator_id} has {} parameters, file has {np}", schema.len())));
        }
        let mut items = Vec::with_capacity(n);
        for (index, (x, pixels, cam)) in raw.into_iter().enumerate() {
            if x.iter().any(|v| !(-1.0..=1.0).contains(v)) {
                return Err(r.err(format!("item {index} has a canonical value outside [-1, 1]")));
            }
            let x = CanonVector { generator_id: generator_id.clone(), x };
            items.push(DatasetItem { x, image: Image::from_data(w, h, pixels)?, camera: [cam[0], cam[1], cam[2]] });
        }
        Ok(Self { generator_id, image_size: w, items })
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        Ok(std::fs::write(path, self.to_bytes())?)
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        Self::from_bytes(&std::fs::read(path)?)
    }

    /// FNV-1a of the serialized file.
    pub fn content_hash(&self) -> u64 {
        fnv1a(&self.to_bytes())
    }
}
