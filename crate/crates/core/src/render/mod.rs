//! Software rasterizer producing grayscale condition images, plus edge maps
//! and training-time augmentation.

mod augment;
mod camera;
mod edge;
mod image;
mod raster;

pub use augment::{apply_ops, augment, AugmentOp, AugmentSpec};
pub use camera::{camera_grid, default_camera, Camera, DEFAULT_FOV_DEG, DEFAULT_IMAGE_SIZE};
pub use edge::{edge_map, EDGE_THRESHOLD};
pub use image::Image;
pub use raster::{mask_of_shaded, rasterize, silhouette_iou, RenderMode, BACKGROUND};
