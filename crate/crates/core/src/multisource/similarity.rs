use std::path::Path;

use image::imageops::{self, FilterType};
use image::GrayImage;
use serde::{Deserialize, Serialize};

use super::{find_redundant_groups, MultisourceError};
use crate::dataset::{Frame, SensorRig};
use crate::geometry::{ColumnRange, OverlapPair};

/// Side of the square grayscale raster each crop is resampled to.
pub const SIMILARITY_GRID: u32 = 64;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CropSimilarity {
    pub frame_id: String,
    pub cam_a: String,
    pub cam_b: String,
    pub cosine: f64,
    pub has_redundant_instances: bool,
}

/// Cosine of the angle between two vectors; `None` if either has zero norm.
pub fn cosine_similarity(u: &[f64], v: &[f64]) -> Option<f64> {
    assert_eq!(u.len(), v.len(), "vectors must have equal length");
    let (mut dot, mut nu, mut nv) = (0.0, 0.0, 0.0);
    for (a, b) in u.iter().zip(v) {
        dot += a * b;
        nu += a * a;
        nv += b * b;
    }
    if nu == 0.0 || nv == 0.0 {
        return None;
    }
    Some((dot / (nu.sqrt() * nv.sqrt())).clamp(-1.0, 1.0))
}

/// Integer pixel columns covered by `range`, clipped to the image.
fn pixel_columns(range: &ColumnRange, width: u32) -> (u32, u32) {
    let lo = range.col_lo.floor().max(0.0) as u32;
    let hi = (range.col_hi.ceil().max(0.0) as u32).min(width);
    (lo.min(hi), hi)
}

/// Column band of `image` resampled to the fixed grid and flattened row-major.
pub fn crop_feature(image: &GrayImage, range: &ColumnRange) -> Option<Vec<f64>> {
    let (lo, hi) = pixel_columns(range, image.width());
    if hi <= lo || image.height() == 0 {
        return None;
    }
    let crop = imageops::crop_imm(image, lo, 0, hi - lo, image.height()).to_image();
    let small = imageops::resize(&crop, SIMILARITY_GRID, SIMILARITY_GRID, FilterType::Triangle);
    Some(small.pixels().map(|p| f64::from(p.0[0])).collect())
}

/// Cosine similarity of two crops after resampling both to the fixed grid.
pub fn crop_cosine(
    image_a: &GrayImage,
    crop_a: &ColumnRange,
    image_b: &GrayImage,
    crop_b: &ColumnRange,
) -> Result<f64, MultisourceError> {
    let fa = crop_feature(image_a, crop_a).ok_or(MultisourceError::NotComparable("empty crop"))?;
    let fb = crop_feature(image_b, crop_b).ok_or(MultisourceError::NotComparable("empty crop"))?;
    cosine_similarity(&fa, &fb).ok_or(MultisourceError::NotComparable("all-black crop"))
}

pub fn load_gray(root: &Path, frame: &Frame, camera: &str) -> Result<GrayImage, MultisourceError> {
    let rel = frame
        .view(camera)
        .and_then(|v| v.image_ref.as_deref())
        .ok_or_else(|| MultisourceError::MissingImage {
            frame_id: frame.frame_id.clone(),
            camera: camera.to_string(),
        })?;
    let path = root.join(rel);
    let img = image::open(&path).map_err(|e| MultisourceError::Decode {
        path: path.display().to_string(),
        message: e.to_string(),
    })?;
    Ok(img.to_luma8())
}

/// Similarity of the two overlap crops of `pair` in `frame`.
///
/// Images resolve against `root`, the dataset directory.
pub fn crop_similarity(
    root: &Path,
    rig: &SensorRig,
    frame: &Frame,
    pair: &OverlapPair,
) -> Result<CropSimilarity, MultisourceError> {
    let image_a = load_gray(root, frame, &pair.cam_a)?;
    let image_b = load_gray(root, frame, &pair.cam_b)?;
    let cosine = crop_cosine(&image_a, &pair.crop_a, &image_b, &pair.crop_b)?;
    Ok(CropSimilarity {
        frame_id: frame.frame_id.clone(),
        cam_a: pair.cam_a.clone(),
        cam_b: pair.cam_b.clone(),
        cosine,
        has_redundant_instances: !find_redundant_groups(rig, frame, pair).is_empty(),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use image::Luma;

    fn full(width: u32) -> ColumnRange {
        ColumnRange {
            col_lo: 0.0,
            col_hi: f64::from(width),
        }
    }

    #[test]
    fn orthogonal_and_parallel_vectors() {
        let mut u = vec![0.0; 8];
        let mut v = vec![0.0; 8];
        u[0] = 1.0;
        v[1] = 1.0;
        assert_eq!(cosine_similarity(&u, &v), Some(0.0));
        assert_eq!(cosine_similarity(&u, &u), Some(1.0));
        assert_eq!(cosine_similarity(&u, &[0.0; 8]), None);
    }

    #[test]
    fn identical_crops_are_fully_similar() {
        let img = GrayImage::from_fn(120, 40, |x, y| Luma([((x * 7 + y * 3) % 251) as u8]));
        let r = ColumnRange {
            col_lo: 10.3,
            col_hi: 77.9,
        };
        let c = crop_cosine(&img, &r, &img, &r).unwrap();
        assert!((c - 1.0).abs() < 1e-12);
    }

    #[test]
    fn black_crop_is_not_comparable() {
        let lit = GrayImage::from_pixel(50, 50, Luma([200]));
        let dark = GrayImage::new(50, 50);
        assert!(matches!(
            crop_cosine(&lit, &full(50), &dark, &full(50)),
            Err(MultisourceError::NotComparable(_))
        ));
        let empty = ColumnRange {
            col_lo: 20.0,
            col_hi: 20.0,
        };
        assert!(matches!(
            crop_cosine(&lit, &empty, &lit, &full(50)),
            Err(MultisourceError::NotComparable(_))
        ));
    }

    #[test]
    fn resolution_independent() {
        // the same pattern at two resolutions compares as near-identical
        let big = GrayImage::from_fn(256, 128, |x, _| Luma([if x < 128 { 40 } else { 220 }]));
        let small = GrayImage::from_fn(128, 64, |x, _| Luma([if x < 64 { 40 } else { 220 }]));
        let c = crop_cosine(&big, &full(256), &small, &full(128)).unwrap();
        assert!(c > 0.999, "{c}");
    }
}
