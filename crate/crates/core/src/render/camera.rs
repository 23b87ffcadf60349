use serde::{Deserialize, Serialize};

use crate::error::{invalid, Result};

pub const DEFAULT_FOV_DEG: f64 = 70.0;
pub const DEFAULT_IMAGE_SIZE: usize = 64;

const AZIMUTHS: [f64; 3] = [0.0, 30.0, 60.0];
const ELEVATIONS: [f64; 2] = [30.0, 60.0];
const DISTANCES: [f64; 2] = [1.8, 2.0];

/// Orbit camera looking at the mesh bounding-box center. The eye sits at
/// `distance_factor` times the bounding-sphere radius.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Camera {
    pub azimuth_deg: f64,
    pub elevation_deg: f64,
    pub distance_factor: f64,
    pub fov_deg: f64,
    pub image_size: usize,
}

impl Camera {
    pub fn new(azimuth_deg: f64, elevation_deg: f64, distance_factor: f64) -> Self {
        Self {
            azimuth_deg,
            elevation_deg,
            distance_factor,
            fov_deg: DEFAULT_FOV_DEG,
            image_size: DEFAULT_IMAGE_SIZE,
        }
    }

    pub fn with_size(mut self, image_size: usize) -> Self {
        self.image_size = image_size;
        self
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.fov_deg > 0.0 && self.fov_deg < 120.0) {
            return Err(invalid(format!("fov {} outside (0, 120)", self.fov_deg)));
        }
        if !(self.distance_factor > 1.0) {
            return Err(invalid("distance_factor must exceed 1"));
        }
        if self.image_size < 32 {
            return Err(invalid("image_size must be at least 32"));
        }
        if !(self.elevation_deg.abs() < 89.0) {
            return Err(invalid("elevation must be within (-89, 89) degrees"));
        }
        Ok(())
    }

    /// Unit vector from the target towards the eye.
    pub fn eye_direction(&self) -> [f64; 3] {
        let (az, el) = (self.azimuth_deg.to_radians(), self.elevation_deg.to_radians());
        [el.cos() * az.sin(), el.sin(), el.cos() * az.cos()]
    }

    /// `[azimuth, elevation, distance_factor]`, the record stored with datasets.
    pub fn triple(&self) -> [f64; 3] {
        [self.azimuth_deg, self.elevation_deg, self.distance_factor]
    }
}

/// Default scoring view `(0, 30, 1.8)`.
pub fn default_camera() -> Camera {
    Camera::new(0.0, 30.0, 1.8)
}

/// All azimuth x elevation x distance combinations, azimuth-major.
pub fn camera_grid() -> Vec<Camera> {
    let mut out = Vec::with_capacity(12);
    for az in AZIMUTHS {
        for el in ELEVATIONS {
            for d in DISTANCES {
                out.push(Camera::new(az, el, d));
            }
        }
    }
    out
}
