//! Pose and camera types, 2D normalization, projection, and evaluation metrics.

mod camera;
mod metrics;
mod pose;

pub use camera::{
    crop_to_image, image_to_crop, project_orthographic, project_perspective, BoundingBox,
    CameraModel, CROP_SIZE,
};
pub use metrics::{error_2d, mpjpe, procrustes_align, procrustes_error, Similarity};
pub use pose::{normalize_pose, NormalizedPose2D, Pose2D, Pose3D};
