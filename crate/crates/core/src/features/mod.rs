//! Per-frame feature extraction from pose sequences.
//!
//! The feature row of frame `t` is the flat `(x, y)` list of every keypoint in
//! layout order followed by `(angle, length)` of every limb. Absent keypoints
//! (confidence 0) contribute zeros, and a limb with an absent endpoint
//! contributes `(0, 0)`.

mod hands;
mod transform;

pub use hands::{dominant_hand, hand_presence, wrist_path_length, Hand};
pub use transform::{flip_horizontal, normalize_pose, NormalizationSpec, PointRef};

use crate::pose::{PoseError, PoseSequence};
use std::f64::consts::PI;
use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum FeatureError {
    #[error(transparent)]
    Pose(#[from] PoseError),
    #[error("normalization anchors are degenerate in every frame")]
    DegenerateAnchors,
    #[error("invalid normalization spec: {0}")]
    InvalidSpec(String),
    #[error("sources have {a} and {b} frames and resampling is disabled")]
    IncompatibleLengths { a: usize, b: usize },
    #[error("feature matrix shape mismatch: {0}")]
    Shape(String),
    #[error("non-finite feature value at row {row}, column {col}")]
    NonFinite { row: usize, col: usize },
}

/// A T×F matrix of per-frame features with one name per column.
#[derive(Debug, Clone, PartialEq)]
pub struct FeatureMatrix {
    rows: usize,
    cols: usize,
    values: Vec<f64>,
    names: Vec<String>,
}

impl FeatureMatrix {
    pub fn new(
        rows: usize,
        cols: usize,
        values: Vec<f64>,
        names: Vec<String>,
    ) -> Result<Self, FeatureError> {
        if values.len() != rows * cols {
            return Err(FeatureError::Shape(format!(
                "{} values for a {rows}x{cols} matrix",
                values.len()
            )));
        }
        if names.len() != cols {
            return Err(FeatureError::Shape(format!(
                "{} names for {cols} columns",
                names.len()
            )));
        }
        if let Some(i) = values.iter().position(|v| !v.is_finite()) {
            return Err(FeatureError::NonFinite {
                row: i / cols,
                col: i % cols,
            });
        }
        Ok(FeatureMatrix {
            rows,
            cols,
            values,
            names,
        })
    }

    /// A matrix with `rows` rows and no columns.
    pub fn empty(rows: usize) -> Self {
        FeatureMatrix {
            rows,
            cols: 0,
            values: vec![],
            names: vec![],
        }
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn names(&self) -> &[String] {
        &self.names
    }

    pub fn row(&self, t: usize) -> &[f64] {
        &self.values[t * self.cols..(t + 1) * self.cols]
    }

    pub fn get(&self, t: usize, f: usize) -> f64 {
        self.values[t * self.cols + f]
    }

    /// Prefixes every column name with `source/`.
    pub fn with_prefix(mut self, source: &str) -> Self {
        for n in &mut self.names {
            *n = format!("{source}/{n}");
        }
        self
    }
}

/// Angle and length of one limb.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LimbFeature {
    /// Radians in (-pi, pi].
    pub angle: f64,
    pub length: f64,
}

/// Limb angle `atan2(yb - ya, xb - xa)` and Euclidean length for each edge.
///
/// A limb with an absent endpoint yields `(0, 0)`.
pub fn limb_features(
    points: &[[f64; 2]],
    present: &[bool],
    limbs: &[(usize, usize)],
) -> Vec<LimbFeature> {
    limbs
        .iter()
        .map(|&(a, b)| {
            if !(present[a] && present[b]) {
                return LimbFeature {
                    angle: 0.0,
                    length: 0.0,
                };
            }
            let dx = points[b][0] - points[a][0];
            let dy = points[b][1] - points[a][1];
            let mut angle = dy.atan2(dx);
            if angle <= -PI {
                angle = PI;
            }
            LimbFeature {
                angle,
                length: dx.hypot(dy),
            }
        })
        .collect()
}

/// Column names produced by [`frame_features`] for a header.
pub fn feature_names(header: &crate::pose::PoseHeader) -> Vec<String> {
    let mut names = Vec::with_capacity(2 * header.total_points() + 2 * header.total_limbs());
    for c in header.components() {
        for i in 0..c.point_count {
            names.push(format!("{}.{i}.x", c.name));
            names.push(format!("{}.{i}.y", c.name));
        }
    }
    for c in header.components() {
        for &(a, b) in &c.limbs {
            names.push(format!("{}.{a}-{b}.angle", c.name));
            names.push(format!("{}.{a}-{b}.length", c.name));
        }
    }
    names
}

/// Builds the T×(2K + 2L) feature matrix of a (normalized) sequence.
///
/// Only x and y are used; a z coordinate, when present, is ignored.
pub fn frame_features(p: &PoseSequence) -> FeatureMatrix {
    let header = p.header();
    let body = p.body();
    let k = header.total_points();
    let limbs = header.global_limbs();
    let cols = 2 * k + 2 * limbs.len();
    let mut values = Vec::with_capacity(body.frame_count() * cols);
    let mut points = vec![[0.0f64; 2]; k];
    let mut present = vec![false; k];
    for t in 0..body.frame_count() {
        for i in 0..k {
            present[i] = body.is_present(t, i);
            let xy = body.point(t, i);
            points[i] = if present[i] {
                [xy[0] as f64, xy[1] as f64]
            } else {
                [0.0, 0.0]
            };
            values.push(points[i][0]);
            values.push(points[i][1]);
        }
        for lf in limb_features(&points, &present, &limbs) {
            values.push(lf.angle);
            values.push(lf.length);
        }
    }
    FeatureMatrix {
        rows: body.frame_count(),
        cols,
        values,
        names: feature_names(header),
    }
}

/// Row-wise concatenation of two feature sources.
///
/// When frame counts differ and `resample` is set, `b` is resampled to `a`'s
/// length by nearest frame: row `t` takes `b[round(t (Tb-1) / (Ta-1))]`.
pub fn concat_sources(
    a: &FeatureMatrix,
    b: &FeatureMatrix,
    resample: bool,
) -> Result<FeatureMatrix, FeatureError> {
    if b.cols == 0 {
        return Ok(a.clone());
    }
    if a.cols == 0 && a.rows == b.rows {
        return Ok(b.clone());
    }
    if a.rows != b.rows && !resample {
        return Err(FeatureError::IncompatibleLengths {
            a: a.rows,
            b: b.rows,
        });
    }
    let cols = a.cols + b.cols;
    let mut values = Vec::with_capacity(a.rows * cols);
    for t in 0..a.rows {
        values.extend_from_slice(a.row(t));
        values.extend_from_slice(b.row(nearest_index(t, a.rows, b.rows)));
    }
    let mut names = a.names.clone();
    names.extend(b.names.iter().cloned());
    Ok(FeatureMatrix {
        rows: a.rows,
        cols,
        values,
        names,
    })
}

fn nearest_index(t: usize, len_a: usize, len_b: usize) -> usize {
    if len_a == len_b {
        return t;
    }
    if len_a <= 1 {
        return 0;
    }
    let pos = t as f64 * (len_b - 1) as f64 / (len_a - 1) as f64;
    (pos.round() as usize).min(len_b - 1)
}
