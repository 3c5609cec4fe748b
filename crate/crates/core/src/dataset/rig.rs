//! Ego-vehicle sensor layout.

use serde::{Deserialize, Serialize};

use crate::geometry::normalize_deg;

/// Max disagreement (radians) between the declared FoV and the one implied by
/// `width_px` and `fx`.
pub const FOV_CONSISTENCY_TOL_RAD: f64 = 0.01;

/// A yaw-mounted pinhole camera.
///
/// `yaw_deg` is measured in the ego frame: 0 looks forward, positive turns
/// counter-clockwise (to the left).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CameraSpec {
    pub name: String,
    pub yaw_deg: f64,
    pub hfov_deg: f64,
    pub width_px: u32,
    pub height_px: u32,
    pub fx: f64,
    pub cx: f64,
}

impl CameraSpec {
    /// Camera whose intrinsics exactly realize `hfov_deg` with a centered
    /// principal point.
    pub fn from_fov(name: impl Into<String>, yaw_deg: f64, hfov_deg: f64, width_px: u32, height_px: u32) -> Self {
        let half_width = f64::from(width_px) / 2.0;
        Self {
            name: name.into(),
            yaw_deg: normalize_deg(yaw_deg),
            hfov_deg,
            width_px,
            height_px,
            fx: half_width / (hfov_deg.to_radians() / 2.0).tan(),
            cx: half_width,
        }
    }

    /// Horizontal FoV implied by the intrinsics, in radians.
    pub fn intrinsic_fov_rad(&self) -> f64 {
        2.0 * (f64::from(self.width_px) / (2.0 * self.fx)).atan()
    }

    pub(crate) fn check(&self, out: &mut Vec<String>) {
        let ctx = format!("camera `{}`", self.name);
        if !self.yaw_deg.is_finite() {
            out.push(format!("{ctx}: yaw_deg is not finite"));
        }
        if !(self.hfov_deg > 0.0 && self.hfov_deg < 180.0) {
            out.push(format!("{ctx}: hfov_deg {} outside (0, 180)", self.hfov_deg));
        }
        if self.width_px == 0 || self.height_px == 0 {
            out.push(format!("{ctx}: image size {}x{} is empty", self.width_px, self.height_px));
        }
        if !(self.fx > 0.0 && self.fx.is_finite()) {
            out.push(format!("{ctx}: fx {} must be positive", self.fx));
            return;
        }
        if !(self.cx > 0.0 && self.cx < f64::from(self.width_px)) {
            out.push(format!("{ctx}: cx {} outside (0, {})", self.cx, self.width_px));
        }
        let mismatch = (self.intrinsic_fov_rad() - self.hfov_deg.to_radians()).abs();
        if !(mismatch <= FOV_CONSISTENCY_TOL_RAD) {
            out.push(format!(
                "{ctx}: intrinsics give a {:.4} deg FoV but hfov_deg is {}",
                self.intrinsic_fov_rad().to_degrees(),
                self.hfov_deg
            ));
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LidarSpec {
    pub name: String,
    /// Mount position in the ego frame, meters.
    pub translation_m: [f64; 3],
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SensorRig {
    pub cameras: Vec<CameraSpec>,
    pub lidar: LidarSpec,
}

impl SensorRig {
    pub fn camera(&self, name: &str) -> Option<&CameraSpec> {
        self.cameras.iter().find(|c| c.name == name)
    }

    /// Six-camera surround rig laid out like the nuScenes vehicle: five 70°
    /// cameras at 0°, ±55°, ±110° and a 110° rear camera.
    pub fn nuscenes_like(width_px: u32, height_px: u32) -> Self {
        let cam = |name: &str, yaw: f64, fov: f64| CameraSpec::from_fov(name, yaw, fov, width_px, height_px);
        Self {
            cameras: vec![
                cam("CAM_FRONT", 0.0, 70.0),
                cam("CAM_FRONT_LEFT", 55.0, 70.0),
                cam("CAM_FRONT_RIGHT", -55.0, 70.0),
                cam("CAM_BACK_LEFT", 110.0, 70.0),
                cam("CAM_BACK_RIGHT", -110.0, 70.0),
                cam("CAM_BACK", 180.0, 110.0),
            ],
            lidar: LidarSpec {
                name: "LIDAR_TOP".into(),
                translation_m: [0.94, 0.0, 1.84],
            },
        }
    }

    pub(crate) fn check(&self, out: &mut Vec<String>) {
        let mut seen = std::collections::BTreeSet::new();
        for cam in &self.cameras {
            if !seen.insert(cam.name.as_str()) {
                out.push(format!("duplicate camera name `{}`", cam.name));
            }
            cam.check(out);
        }
        if self.lidar.translation_m.iter().any(|v| !v.is_finite()) {
            out.push(format!("lidar `{}`: translation is not finite", self.lidar.name));
        }
    }
}
