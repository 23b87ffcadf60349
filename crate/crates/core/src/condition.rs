//! Condition tokens: the `M x C` feature matrix the denoiser attends to.
//!
//! Tokens come either from a patch embedder trained jointly with the
//! denoiser, or from an external feature extractor via DIPT token files.

use std::io::{Read, Write};
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::autograd::{gemm, Mat};
use crate::error::{invalid, Error, Result};
use crate::render::Image;

pub const DIPT_MAGIC: &[u8; 4] = b"DIPT";
pub const DIPT_VERSION: u32 = 1;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum TokenSource {
    PatchEmbed,
    External,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ConditionTokens {
    pub tokens: Mat,
    pub source: TokenSource,
}

impl ConditionTokens {
    pub fn new(tokens: Mat, source: TokenSource) -> Result<Self> {
        if tokens.rows == 0 || tokens.cols == 0 {
            return Err(invalid("condition tokens need M >= 1 and C >= 1"));
        }
        if tokens.data.iter().any(|v| !v.is_finite()) {
            return Err(invalid("condition tokens must be finite"));
        }
        Ok(Self { tokens, source })
    }

    pub fn count(&self) -> usize {
        self.tokens.rows
    }

    pub fn width(&self) -> usize {
        self.tokens.cols
    }

    /// Mean over tokens, a fixed-width image descriptor.
    pub fn mean_pool(&self) -> Vec<f64> {
        let mut out = vec![0.0; self.width()];
        for r in 0..self.count() {
            for (o, v) in out.iter_mut().zip(self.tokens.row(r)) {
                *o += v;
            }
        }
        let n = self.count() as f64;
        out.iter_mut().for_each(|v| *v /= n);
        out
    }
}

/// Borrowed affine layer `x W + b`.
#[derive(Debug, Clone, Copy)]
pub struct Linear<'a> {
    pub w: &'a Mat,
    pub b: &'a Mat,
}

impl Linear<'_> {
    pub fn apply(&self, x: &Mat) -> Mat {
        let mut out = Mat::zeros(x.rows, self.w.cols);
        for r in 0..x.rows {
            out.data[r * self.w.cols..(r + 1) * self.w.cols].copy_from_slice(&self.b.data);
        }
        gemm(1.0, x, false, self.w, false, 1.0, &mut out);
        out
    }
}

/// Splits a square image into non-overlapping `patch x patch` tiles, one
/// flattened tile per row, tiles in row-major order. Tiles hold `1 - v`, so
/// the white background of a render embeds as zero.
pub fn patchify(img: &Image, patch: usize) -> Result<Mat> {
    if patch == 0 || img.width % patch != 0 || img.height % patch != 0 {
        return Err(invalid(format!(
            "image {}x{} is not divisible into {patch}px patches",
            img.width, img.height
        )));
    }
    let (gx, gy) = (img.width / patch, img.height / patch);
    let mut out = Mat::zeros(gx * gy, patch * patch);
    for py in 0..gy {
        for px in 0..gx {
            let row = py * gx + px;
            for y in 0..patch {
                for x in 0..patch {
                    out.data[row * patch * patch + y * patch + x] = 1.0 - img.get(px * patch + x, py * patch + y);
                }
            }
        }
    }
    Ok(out)
}

/// Fixed 2D sine-cosine code for a `grid x grid` token layout. The first half
/// of the channels encodes the row, the second half the column.
pub fn sincos_2d(grid: usize, width: usize) -> Mat {
    assert!(width % 4 == 0, "positional width must be a multiple of 4");
    let quarter = width / 4;
    let mut out = Mat::zeros(grid * grid, width);
    for gy in 0..grid {
        for gx in 0..grid {
            let row = gy * grid + gx;
            for (axis, pos) in [(0, gy), (1, gx)] {
                for k in 0..quarter {
                    let freq = 1.0 / 10_000f64.powf(k as f64 / quarter as f64);
                    let a = pos as f64 * freq;
                    let base = row * width + axis * 2 * quarter;
                    out.data[base + k] = a.sin();
                    out.data[base + quarter + k] = a.cos();
                }
            }
        }
    }
    out
}

/// Linear patch embedding plus the fixed positional code.
pub fn patch_tokens(img: &Image, patch: usize, embed: Linear<'_>) -> Result<ConditionTokens> {
    let tiles = patchify(img, patch)?;
    if !img.is_square() {
        return Err(invalid("patch tokens need a square image"));
    }
    if embed.w.rows != patch * patch {
        return Err(invalid(format!("embedder expects {} inputs, patch has {}", embed.w.rows, patch * patch)));
    }
    let mut tokens = embed.apply(&tiles);
    tokens.add_assign(&sincos_2d(img.width / patch, embed.w.cols));
    ConditionTokens::new(tokens, TokenSource::PatchEmbed)
}

/// Per-token two-layer MLP with GELU into the denoiser width.
pub fn project(tokens: &ConditionTokens, fc1: Linear<'_>, fc2: Linear<'_>) -> Result<ConditionTokens> {
    if tokens.width() != fc1.w.rows || fc1.w.cols != fc2.w.rows {
        return Err(invalid(format!(
            "projector expects width {}, tokens have {}",
            fc1.w.rows,
            tokens.width()
        )));
    }
    let mut hidden = fc1.apply(&tokens.tokens);
    for v in &mut hidden.data {
        *v = gelu(*v);
    }
    let out = fc2.apply(&hidden);
    Ok(ConditionTokens { tokens: out, source: tokens.source })
}

pub(crate) fn gelu(x: f64) -> f64 {
    0.5 * x * (1.0 + (0.797_884_560_802_865_4 * (x + 0.044715 * x * x * x)).tanh())
}

pub fn write_tokens<W: Write>(tokens: &Mat, mut w: W) -> Result<()> {
    w.write_all(DIPT_MAGIC)?;
    for v in [DIPT_VERSION, tokens.rows as u32, tokens.cols as u32] {
        w.write_all(&v.to_le_bytes())?;
    }
    let mut buf = Vec::with_capacity(tokens.len() * 4);
    for v in &tokens.data {
        buf.extend_from_slice(&(*v as f32).to_le_bytes());
    }
    w.write_all(&buf)?;
    Ok(())
}

pub fn read_tokens<R: Read>(mut r: R) -> Result<ConditionTokens> {
    let mut buf = Vec::new();
    r.read_to_end(&mut buf)?;
    let fmt = |m: &str| Error::Format(format!("DIPT: {m}"));
    if buf.len() < 16 || &buf[..4] != DIPT_MAGIC {
        return Err(fmt("bad magic or truncated header"));
    }
    let word = |i: usize| u32::from_le_bytes(buf[4 + 4 * i..8 + 4 * i].try_into().expect("4 bytes"));
    let (version, m, c) = (word(0), word(1) as usize, word(2) as usize);
    if version != DIPT_VERSION {
        return Err(fmt(&format!("unsupported version {version}")));
    }
    if m == 0 || c == 0 {
        return Err(fmt("token count and width must be positive"));
    }
    let body = &buf[16..];
    if body.len() != m * c * 4 {
        return Err(fmt(&format!("expected {} payload bytes, found {}", m * c * 4, body.len())));
    }
    let data = body
        .chunks_exact(4)
        .map(|b| f32::from_le_bytes(b.try_into().expect("4 bytes")) as f64)
        .collect();
    ConditionTokens::new(Mat::from_vec(m, c, data), TokenSource::External).map_err(|e| fmt(&e.to_string()))
}

pub fn save_tokens(path: impl AsRef<Path>, tokens: &Mat) -> Result<()> {
    write_tokens(tokens, std::io::BufWriter::new(std::fs::File::create(path)?))
}

pub fn load_tokens(path: impl AsRef<Path>) -> Result<ConditionTokens> {
    read_tokens(std::fs::File::open(path)?)
}

/// Fallback descriptor when no trained embedder exists: the mask of a shaded
/// render, average-pooled by `factor`.
pub fn mask_features(img: &Image, factor: usize) -> Result<Vec<f64>> {
    Ok(crate::render::mask_of_shaded(img).downsample(factor)?.data)
}

#[cfg(test)]
fn identity(n: usize) -> Mat {
    let mut m = Mat::zeros(n, n);
    for i in 0..n {
        m.data[i * n + i] = 1.0;
    }
    m
}
