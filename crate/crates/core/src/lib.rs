pub mod autograd;
pub mod canon;
pub mod cli;
pub mod condition;
pub mod denoiser;
pub mod diffusion;
pub mod error;
pub mod eval;
pub mod generators;
pub mod mcmc;
pub mod optim;
pub mod pipeline;
pub mod render;
pub mod service;

pub use error::{Error, Result};
