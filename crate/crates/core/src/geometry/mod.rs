//! Angular FoV arithmetic, pinhole crop mapping and box operations.

mod angular;
mod box2d;
mod box3d;
mod iou3d;
mod pinhole;

pub use angular::{
    crop_columns, find_overlap_pairs, fov_interval, normalize_deg, AngularInterval, ColumnRange, OverlapPair,
};
pub use box2d::{clip_box2d, iou2d, Box2D};
pub use box3d::{centroid_distance, mean_of_corners, Box3D};
pub use iou3d::{bev_intersection_area, clip_convex, iou3d, iou_bev, mc_iou3d, IouMode};
pub use pinhole::{angle_to_column, column_to_angle, project_column, FOV_EDGE_EPS_DEG};

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum GeometryError {
    #[error("angle {angle_deg} deg is outside the field of view of camera `{camera}`")]
    OutOfFov { camera: String, angle_deg: f64 },
}
