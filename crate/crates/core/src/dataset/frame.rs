use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use crate::geometry::{Box2D, Box3D};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Annotation2D {
    /// Physical-object identity shared across cameras and frames.
    pub instance_id: String,
    pub category: String,
    pub bbox: Box2D,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Annotation3D {
    pub instance_id: String,
    pub category: String,
    #[serde(flatten)]
    pub bbox: Box3D,
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct CameraView {
    /// Image path relative to the manifest directory.
    #[serde(rename = "image", default)]
    pub image_ref: Option<String>,
    #[serde(default)]
    pub annotations: Vec<Annotation2D>,
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct LidarView {
    /// Point file path relative to the manifest directory.
    #[serde(rename = "points", default)]
    pub points_ref: Option<String>,
    #[serde(default)]
    pub annotations: Vec<Annotation3D>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Frame {
    pub frame_id: String,
    pub timestamp_us: i64,
    #[serde(rename = "cameras", default)]
    pub camera_views: BTreeMap<String, CameraView>,
    #[serde(rename = "lidar", default)]
    pub lidar_view: LidarView,
}

impl Frame {
    pub fn view(&self, camera: &str) -> Option<&CameraView> {
        self.camera_views.get(camera)
    }

    pub fn annotation_count_2d(&self) -> usize {
        self.camera_views.values().map(|v| v.annotations.len()).sum()
    }
}
