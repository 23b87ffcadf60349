//! Geometry metrics over surface samples and the image-to-mesh evaluation harness.

mod assignment;
mod cloud;
mod harness;
mod metrics;
mod nn;

pub use assignment::solve_assignment;
pub use cloud::{sample_surface, sample_surface_raw, Normalization, PointCloud};
pub use harness::{evaluate, evaluate_with, EvalOptions, ItemMetrics, MetricsReport, Scores};
pub use metrics::{chamfer, emd, fscore};
pub use nn::{nearest_distances, Grid};
