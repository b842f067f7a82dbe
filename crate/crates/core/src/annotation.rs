//! Eye landmarks and the JSON sidecar they are read from.
//!
//! Sidecar layout:
//!
//! ```json
//! {"image": "face.png", "faces": [{"left_eye": [[x, y], ...], "right_eye": [[x, y], ...]}]}
//! ```
//!
//! `left_eye` / `right_eye` are image-left and image-right (viewer's
//! perspective), six points each in 68-point order (indices 36-41 and
//! 42-47). A relative `image` path is resolved against the sidecar's
//! directory.

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::imaging::{Point, Polygon, Rect};

#[derive(Clone, Debug, PartialEq)]
pub struct EyeLandmarks {
    points: [Point; 6],
}

impl EyeLandmarks {
    pub fn new(points: &[Point]) -> Result<Self> {
        let points: [Point; 6] = points.try_into().map_err(|_| {
            Error::BadAnnotation(format!("expected 6 eye landmarks, got {}", points.len()))
        })?;
        if points.iter().any(|p| !p.x.is_finite() || !p.y.is_finite()) {
            return Err(Error::BadAnnotation(
                "non-finite landmark coordinate".into(),
            ));
        }
        let lm = Self { points };
        let (x0, y0, x1, y1) = lm.bounds();
        if x1 - x0 <= 0.0 || y1 - y0 <= 0.0 {
            return Err(Error::DegenerateLandmarks);
        }
        Ok(lm)
    }

    pub fn points(&self) -> &[Point; 6] {
        &self.points
    }

    /// `(min_x, min_y, max_x, max_y)`.
    pub fn bounds(&self) -> (f64, f64, f64, f64) {
        self.points.iter().fold(
            (
                f64::INFINITY,
                f64::INFINITY,
                f64::NEG_INFINITY,
                f64::NEG_INFINITY,
            ),
            |(a, b, c, d), p| (a.min(p.x), b.min(p.y), c.max(p.x), d.max(p.y)),
        )
    }

    /// Tight pixel box: `floor(min)` to `ceil(max)` on each axis.
    pub fn bounding_rect(&self) -> Rect {
        let (x0, y0, x1, y1) = self.bounds();
        let (fx, fy) = (x0.floor().max(0.0), y0.floor().max(0.0));
        Rect::new(
            fx as u32,
            fy as u32,
            (x1.ceil() - fx).max(1.0) as u32,
            (y1.ceil() - fy).max(1.0) as u32,
        )
    }

    pub fn polygon(&self) -> Polygon {
        Polygon::new(self.points.to_vec()).expect("six vertices")
    }

    pub fn translated(&self, dx: f64, dy: f64) -> EyeLandmarks {
        EyeLandmarks {
            points: self.points.map(|p| Point::new(p.x + dx, p.y + dy)),
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct FaceAnnotation {
    pub image_path: PathBuf,
    pub image_left_eye: EyeLandmarks,
    pub image_right_eye: EyeLandmarks,
}

impl FaceAnnotation {
    pub fn new(image_path: PathBuf, left: EyeLandmarks, right: EyeLandmarks) -> Result<Self> {
        if left.bounding_rect().overlaps(&right.bounding_rect()) {
            return Err(Error::BadAnnotation("eye bounding boxes overlap".into()));
        }
        Ok(Self {
            image_path,
            image_left_eye: left,
            image_right_eye: right,
        })
    }
}

#[derive(Debug, Serialize, Deserialize)]
struct SidecarFile {
    image: String,
    faces: Vec<SidecarFace>,
}

#[derive(Debug, Serialize, Deserialize)]
struct SidecarFace {
    left_eye: Vec<[f64; 2]>,
    right_eye: Vec<[f64; 2]>,
}

fn to_points(raw: &[[f64; 2]]) -> Vec<Point> {
    raw.iter().map(|&[x, y]| Point::new(x, y)).collect()
}

/// Parses sidecar JSON, selecting face `face_index`.
pub fn parse_annotation(json: &str, base_dir: &Path, face_index: usize) -> Result<FaceAnnotation> {
    let file: SidecarFile =
        serde_json::from_str(json).map_err(|e| Error::BadAnnotation(e.to_string()))?;
    let face = file.faces.get(face_index).ok_or_else(|| {
        Error::BadAnnotation(format!(
            "face index {face_index} requested, sidecar has {}",
            file.faces.len()
        ))
    })?;
    let image = PathBuf::from(&file.image);
    let image_path = if image.is_absolute() {
        image
    } else {
        base_dir.join(image)
    };
    FaceAnnotation::new(
        image_path,
        EyeLandmarks::new(&to_points(&face.left_eye))?,
        EyeLandmarks::new(&to_points(&face.right_eye))?,
    )
}

pub fn read_annotation(path: impl AsRef<Path>, face_index: usize) -> Result<FaceAnnotation> {
    let path = path.as_ref();
    if !path.is_file() {
        return Err(Error::FileNotFound(path.to_path_buf()));
    }
    let text = std::fs::read_to_string(path)?;
    let base = path.parent().unwrap_or_else(|| Path::new(""));
    parse_annotation(&text, base, face_index)
}

/// Serializes a single-face sidecar. `image` is written verbatim.
pub fn annotation_json(image: &str, left: &EyeLandmarks, right: &EyeLandmarks) -> String {
    let raw = |lm: &EyeLandmarks| lm.points().iter().map(|p| [p.x, p.y]).collect();
    let file = SidecarFile {
        image: image.to_string(),
        faces: vec![SidecarFace {
            left_eye: raw(left),
            right_eye: raw(right),
        }],
    };
    serde_json::to_string(&file).expect("sidecar serializes")
}
