use crate::dataset::CameraSpec;

use super::GeometryError;

/// Slack (degrees) past the FoV edge still accepted by [`angle_to_column`].
pub const FOV_EDGE_EPS_DEG: f64 = 1e-6;

/// Image column hit by a ray `angle_deg` off the optical axis.
///
/// Pinhole mapping `cx - fx * tan(angle)`: positive (leftward) angles land on
/// smaller columns. The result is clamped into `[0, width_px]`.
pub fn angle_to_column(cam: &CameraSpec, angle_deg: f64) -> Result<f64, GeometryError> {
    let half = cam.hfov_deg / 2.0;
    if !(angle_deg.abs() < half + FOV_EDGE_EPS_DEG) {
        return Err(GeometryError::OutOfFov {
            camera: cam.name.clone(),
            angle_deg,
        });
    }
    let col = cam.cx - cam.fx * angle_deg.to_radians().tan();
    Ok(col.clamp(0.0, f64::from(cam.width_px)))
}

/// Inverse of [`angle_to_column`] (without the clamp).
pub fn column_to_angle(cam: &CameraSpec, column: f64) -> f64 {
    ((cam.cx - column) / cam.fx).atan().to_degrees()
}

/// Unclamped column for any angle inside ±90°; used to place boxes whose
/// extent leaves the image.
pub fn project_column(cam: &CameraSpec, angle_deg: f64) -> f64 {
    cam.cx - cam.fx * angle_deg.to_radians().tan()
}
