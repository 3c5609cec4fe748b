use serde::{Deserialize, Serialize};

/// Yaw-rotated cuboid in the LiDAR frame.
///
/// `size` is `(w, l, h)`: `l` runs along the heading (local x), `w` across it
/// (local y), `h` is vertical. `yaw` rotates the heading counter-clockwise
/// about +z.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Box3D {
    pub center: [f64; 3],
    pub size: [f64; 3],
    pub yaw: f64,
}

impl Box3D {
    pub const fn new(center: [f64; 3], size: [f64; 3], yaw: f64) -> Self {
        Self { center, size, yaw }
    }

    pub fn width(&self) -> f64 {
        self.size[0]
    }

    pub fn length(&self) -> f64 {
        self.size[1]
    }

    pub fn height(&self) -> f64 {
        self.size[2]
    }

    pub fn volume(&self) -> f64 {
        self.size[0] * self.size[1] * self.size[2]
    }

    pub fn is_valid(&self) -> bool {
        self.center.iter().chain(&self.size).all(|v| v.is_finite())
            && self.yaw.is_finite()
            && self.size.iter().all(|&s| s > 0.0)
    }

    /// The eight corner vertices. Bottom face first, each face counter-clockwise
    /// seen from above.
    pub fn corners(&self) -> [[f64; 3]; 8] {
        let (sin, cos) = self.yaw.sin_cos();
        let (hl, hw, hh) = (self.length() / 2.0, self.width() / 2.0, self.height() / 2.0);
        let [cx, cy, cz] = self.center;
        let mut out = [[0.0; 3]; 8];
        for (i, dz) in [-hh, hh].into_iter().enumerate() {
            for (j, (dx, dy)) in [(hl, hw), (-hl, hw), (-hl, -hw), (hl, -hw)].into_iter().enumerate() {
                out[i * 4 + j] = [cx + cos * dx - sin * dy, cy + sin * dx + cos * dy, cz + dz];
            }
        }
        out
    }

    /// BEV footprint, counter-clockwise.
    pub fn footprint(&self) -> [[f64; 2]; 4] {
        let c = self.corners();
        [0, 1, 2, 3].map(|i| [c[i][0], c[i][1]])
    }

    /// Centroid, i.e. the mean of the corner vertices. Equal to `center` by
    /// construction.
    pub fn centroid(&self) -> [f64; 3] {
        self.center
    }

    pub fn z_range(&self) -> (f64, f64) {
        let hh = self.height() / 2.0;
        (self.center[2] - hh, self.center[2] + hh)
    }

    pub fn contains(&self, p: [f64; 3]) -> bool {
        LocalFrame::new(self).contains(p)
    }

    pub fn scaled(&self, s: f64) -> Self {
        Self {
            center: self.center.map(|v| v * s),
            size: self.size.map(|v| v * s),
            yaw: self.yaw,
        }
    }
}

/// Mean of a set of vertices.
pub fn mean_of_corners(corners: &[[f64; 3]]) -> [f64; 3] {
    let n = corners.len() as f64;
    let mut acc = [0.0; 3];
    for c in corners {
        for k in 0..3 {
            acc[k] += c[k];
        }
    }
    acc.map(|v| v / n)
}

/// Euclidean distance of the box centroid from the sensor origin.
pub fn centroid_distance(b: &Box3D) -> f64 {
    let [x, y, z] = b.centroid();
    (x * x + y * y + z * z).sqrt()
}

/// Precomputed box frame for repeated point-membership tests.
#[derive(Debug, Clone, Copy)]
pub(crate) struct LocalFrame {
    center: [f64; 3],
    cos: f64,
    sin: f64,
    half: [f64; 3],
}

impl LocalFrame {
    pub(crate) fn new(b: &Box3D) -> Self {
        let (sin, cos) = b.yaw.sin_cos();
        Self {
            center: b.center,
            cos,
            sin,
            half: [b.length() / 2.0, b.width() / 2.0, b.height() / 2.0],
        }
    }

    #[inline]
    pub(crate) fn contains(&self, p: [f64; 3]) -> bool {
        let dx = p[0] - self.center[0];
        let dy = p[1] - self.center[1];
        let dz = p[2] - self.center[2];
        let lx = self.cos * dx + self.sin * dy;
        let ly = -self.sin * dx + self.cos * dy;
        lx.abs() <= self.half[0] && ly.abs() <= self.half[1] && dz.abs() <= self.half[2]
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::f64::consts::FRAC_PI_2;

    fn sorted(mut c: Vec<[f64; 3]>) -> Vec<[f64; 3]> {
        for v in &mut c {
            for x in v.iter_mut() {
                *x = (*x * 1e9).round() / 1e9 + 0.0;
            }
        }
        c.sort_by(|a, b| a.partial_cmp(b).unwrap());
        c
    }

    #[test]
    fn unit_cube_corners() {
        let b = Box3D::new([0.0; 3], [1.0; 3], 0.0);
        let got = sorted(b.corners().to_vec());
        let mut want = Vec::new();
        for x in [-0.5, 0.5] {
            for y in [-0.5, 0.5] {
                for z in [-0.5, 0.5] {
                    want.push([x, y, z]);
                }
            }
        }
        assert_eq!(got, sorted(want));
    }

    #[test]
    fn quarter_turn_maps_unit_cube_to_itself() {
        let a = Box3D::new([0.0; 3], [1.0; 3], 0.0);
        let b = Box3D::new([0.0; 3], [1.0; 3], FRAC_PI_2);
        assert_eq!(sorted(a.corners().to_vec()), sorted(b.corners().to_vec()));
    }

    #[test]
    fn corner_mean_is_center() {
        let b = Box3D::new([12.5, -3.25, 0.7], [1.9, 4.6, 1.6], 0.83);
        let m = mean_of_corners(&b.corners());
        for (got, want) in m.iter().zip(&b.center) {
            assert!((got - want).abs() <= 1e-12);
        }
    }

    #[test]
    fn distances() {
        let d = |c| centroid_distance(&Box3D::new(c, [1.0; 3], 0.3));
        assert_eq!(d([0.0; 3]), 0.0);
        assert_eq!(d([3.0, 4.0, 0.0]), 5.0);
        assert_eq!(d([1.0, 1.0, 1.0]), 3f64.sqrt());
    }

    #[test]
    fn containment_respects_yaw() {
        let b = Box3D::new([0.0; 3], [1.0, 4.0, 1.0], FRAC_PI_2);
        // long axis now along y
        assert!(b.contains([0.0, 1.9, 0.0]));
        assert!(!b.contains([1.9, 0.0, 0.0]));
    }
}
