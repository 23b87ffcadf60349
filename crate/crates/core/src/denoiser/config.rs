use serde::{Deserialize, Serialize};

use crate::error::{invalid, Result};

/// Where condition tokens come from.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "mode", rename_all = "lowercase")]
pub enum CondMode {
    /// Patch embedder trained with the denoiser, fed with square images.
    Patch { patch: usize, image_size: usize },
    /// Precomputed tokens (e.g. DIPT files), `tokens` rows each.
    External { tokens: usize },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct DenoiserConfig {
    pub n_layers: usize,
    pub n_heads: usize,
    pub d_model: usize,
    /// One token per generator parameter.
    pub n_param_tokens: usize,
    /// Width `C` of the condition tokens before projection.
    pub cond_width: usize,
    /// Hidden width of the condition projector.
    pub proj_hidden: usize,
    pub cond: CondMode,
}

impl DenoiserConfig {
    /// Laptop-sized defaults: 4 layers, 4 heads, width 64, 8px patches on 64px images.
    pub fn desk(n_param_tokens: usize) -> Self {
        Self {
            n_layers: 4,
            n_heads: 4,
            d_model: 64,
            n_param_tokens,
            cond_width: 192,
            proj_hidden: 64,
            cond: CondMode::Patch { patch: 8, image_size: 64 },
        }
    }

    /// 12 layers, 6 heads, width 192, fed with ViT-B/14-sized external tokens.
    pub fn full_scale(n_param_tokens: usize) -> Self {
        Self {
            n_layers: 12,
            n_heads: 6,
            d_model: 192,
            n_param_tokens,
            cond_width: 768,
            proj_hidden: 192,
            cond: CondMode::External { tokens: 324 },
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.n_layers == 0 {
            return Err(invalid("n_layers must be at least 1"));
        }
        self.validate_widths()
    }

    /// Every check except the layer count; a zero-layer config still has a
    /// well-defined parameter count.
    pub(crate) fn validate_widths(&self) -> Result<()> {
        if self.n_heads == 0 || self.d_model % self.n_heads != 0 {
            return Err(invalid("d_model must be divisible by n_heads"));
        }
        if self.n_param_tokens == 0 || self.cond_width == 0 || self.proj_hidden == 0 {
            return Err(invalid("token counts and widths must be positive"));
        }
        match self.cond {
            CondMode::Patch { patch, image_size } => {
                if patch == 0 || image_size % patch != 0 {
                    return Err(invalid("image_size must be divisible by patch"));
                }
                if self.cond_width % 4 != 0 {
                    return Err(invalid("patch mode needs cond_width divisible by 4"));
                }
            }
            CondMode::External { tokens } => {
                if tokens == 0 {
                    return Err(invalid("external mode needs at least one token"));
                }
            }
        }
        Ok(())
    }

    pub fn head_dim(&self) -> usize {
        self.d_model / self.n_heads
    }

    pub fn cond_tokens(&self) -> usize {
        match self.cond {
            CondMode::Patch { patch, image_size } => (image_size / patch).pow(2),
            CondMode::External { tokens } => tokens,
        }
    }

    pub fn image_size(&self) -> Option<usize> {
        match self.cond {
            CondMode::Patch { image_size, .. } => Some(image_size),
            CondMode::External { .. } => None,
        }
    }
}
