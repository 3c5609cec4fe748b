use std::io::Write;
use std::path::Path;

use serde::{Deserialize, Serialize};

use super::MultimodalError;
use crate::geometry::{centroid_distance, Box3D};
use crate::json;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum DetectionSource {
    /// Camera-LiDAR fusion detector output.
    Base,
    /// LiDAR-only detector output.
    LidarOnly,
    /// Detections that survived distance pruning.
    Pruned,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Detection {
    #[serde(flatten)]
    pub bbox: Box3D,
    #[serde(default)]
    pub score: Option<f64>,
    #[serde(default)]
    pub category: Option<String>,
}

impl Detection {
    pub fn new(bbox: Box3D) -> Self {
        Self {
            bbox,
            score: None,
            category: None,
        }
    }

    pub fn distance(&self) -> f64 {
        centroid_distance(&self.bbox)
    }
}

/// Detections of one frame from one source.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DetectionSet {
    pub frame_id: String,
    pub source: DetectionSource,
    pub boxes: Vec<Detection>,
}

impl DetectionSet {
    pub fn new(frame_id: impl Into<String>, source: DetectionSource, boxes: Vec<Detection>) -> Self {
        Self {
            frame_id: frame_id.into(),
            source,
            boxes,
        }
    }

    pub fn empty(frame_id: impl Into<String>, source: DetectionSource) -> Self {
        Self::new(frame_id, source, Vec::new())
    }

    pub fn check(&self) -> Result<(), MultimodalError> {
        for (i, d) in self.boxes.iter().enumerate() {
            let score_ok = d.score.is_none_or(|s| (0.0..=1.0).contains(&s));
            if !d.bbox.is_valid() || !score_ok {
                return Err(MultimodalError::InvalidDetection {
                    frame_id: self.frame_id.clone(),
                    index: i,
                });
            }
        }
        Ok(())
    }
}

/// Read detection sets from a file holding one set, a JSON array of sets, or
/// one set per line.
pub fn read_detection_sets(path: &Path) -> Result<Vec<DetectionSet>, MultimodalError> {
    let text = std::fs::read_to_string(path).map_err(|e| MultimodalError::Io {
        path: path.display().to_string(),
        message: e.to_string(),
    })?;
    let parse_err = |line: usize, e: serde_json::Error| MultimodalError::Parse {
        path: path.display().to_string(),
        line,
        message: e.to_string(),
    };
    let sets = match serde_json::from_str::<serde_json::Value>(&text) {
        Ok(serde_json::Value::Array(items)) => items
            .into_iter()
            .map(serde_json::from_value)
            .collect::<Result<Vec<DetectionSet>, _>>()
            .map_err(|e| parse_err(0, e))?,
        Ok(value) => vec![serde_json::from_value(value).map_err(|e| parse_err(1, e))?],
        Err(_) => {
            let mut out = Vec::new();
            for (i, line) in text.lines().enumerate() {
                if line.trim().is_empty() {
                    continue;
                }
                out.push(serde_json::from_str(line).map_err(|e| parse_err(i + 1, e))?);
            }
            out
        }
    };
    for s in &sets {
        s.check()?;
    }
    Ok(sets)
}

/// Write detection sets one per line, keys sorted.
pub fn write_detection_sets(path: &Path, sets: &[DetectionSet]) -> Result<(), MultimodalError> {
    let io_err = |e: std::io::Error| MultimodalError::Io {
        path: path.display().to_string(),
        message: e.to_string(),
    };
    if let Some(parent) = path.parent() {
        std::fs::create_dir_all(parent).map_err(io_err)?;
    }
    let mut out = std::io::BufWriter::new(std::fs::File::create(path).map_err(io_err)?);
    for s in sets {
        writeln!(out, "{}", json::to_canonical_string(s).expect("detections serialize")).map_err(io_err)?;
    }
    out.flush().map_err(io_err)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn accepts_single_array_and_lines() {
        let dir = tempfile::tempdir().unwrap();
        let one = r#"{"frame_id":"f0","source":"base","boxes":[{"center":[1,2,0],"size":[1,2,1],"yaw":0.5,"score":0.9,"category":"car"}]}"#;
        let path = dir.path().join("d.json");
        std::fs::write(&path, one).unwrap();
        let sets = read_detection_sets(&path).unwrap();
        assert_eq!(sets.len(), 1);
        assert_eq!(sets[0].boxes[0].score, Some(0.9));

        std::fs::write(&path, format!("[{one},{one}]")).unwrap();
        assert_eq!(read_detection_sets(&path).unwrap().len(), 2);

        std::fs::write(&path, format!("{one}\n\n{one}\n")).unwrap();
        let sets = read_detection_sets(&path).unwrap();
        assert_eq!(sets.len(), 2);

        let out = dir.path().join("out.jsonl");
        write_detection_sets(&out, &sets).unwrap();
        assert_eq!(read_detection_sets(&out).unwrap(), sets);
    }

    #[test]
    fn rejects_bad_boxes_and_lines() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("d.json");
        std::fs::write(&path, r#"{"frame_id":"f0","source":"base","boxes":[{"center":[0,0,0],"size":[0,1,1],"yaw":0}]}"#)
            .unwrap();
        assert!(matches!(read_detection_sets(&path), Err(MultimodalError::InvalidDetection { .. })));
        std::fs::write(&path, "{\"frame_id\":\"a\",\"source\":\"base\",\"boxes\":[]}\n{oops}\n").unwrap();
        assert!(matches!(read_detection_sets(&path), Err(MultimodalError::Parse { line: 2, .. })));
    }
}
