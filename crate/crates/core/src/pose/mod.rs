//! Skeletal pose data model.
//!
//! A [`PoseSequence`] is a header describing the skeleton layout (named
//! components, their point counts and limbs) plus a body holding per-frame
//! coordinates and confidences. Sequences are validated on construction and
//! immutable afterwards.

mod format;
mod layout;

pub use format::{parse_pose_file, serialize_pose, FORMAT_VERSION, MAGIC};
pub use layout::{MirrorTable, SkeletonLayout, DEFAULT_LAYOUT_TEXT};

use thiserror::Error;

/// Component names used by the Holistic-style layouts.
pub const BODY: &str = "BODY";
pub const FACE: &str = "FACE";
pub const LEFT_HAND: &str = "LEFT_HAND";
pub const RIGHT_HAND: &str = "RIGHT_HAND";

#[derive(Debug, Error, Clone, PartialEq)]
pub enum PoseError {
    #[error("bad magic: expected \"SPS1\", found {0:?}")]
    BadMagic([u8; 4]),
    #[error("truncated file: needed {needed} bytes at offset {offset}, {available} available")]
    TruncatedFile {
        offset: usize,
        needed: usize,
        available: usize,
    },
    #[error("{0} trailing bytes after the declared payload")]
    TrailingBytes(usize),
    #[error("unsupported format version {0}")]
    UnsupportedVersion(u16),
    #[error("invariant violation: {0}")]
    InvariantViolation(String),
    #[error("unknown component {0:?}")]
    UnknownComponent(String),
    #[error("layout has no mirror declaration for components {0:?}")]
    MissingMirrorTable(Vec<String>),
    #[error("layout parse error on line {line}: {message}")]
    Layout { line: usize, message: String },
}

fn violation(msg: impl Into<String>) -> PoseError {
    PoseError::InvariantViolation(msg.into())
}

/// One named block of keypoints with its limb graph.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ComponentSpec {
    pub name: String,
    pub point_count: u16,
    /// Edges between component-local point indices.
    pub limbs: Vec<(u16, u16)>,
}

impl ComponentSpec {
    pub fn new(
        name: impl Into<String>,
        point_count: u16,
        limbs: Vec<(u16, u16)>,
    ) -> Result<Self, PoseError> {
        let spec = ComponentSpec {
            name: name.into(),
            point_count,
            limbs,
        };
        spec.validate()?;
        Ok(spec)
    }

    fn validate(&self) -> Result<(), PoseError> {
        if self.name.is_empty() || self.name.len() > u8::MAX as usize {
            return Err(violation(format!(
                "component name length {} outside 1..=255",
                self.name.len()
            )));
        }
        if self.point_count == 0 {
            return Err(violation(format!("component {} has no points", self.name)));
        }
        for &(a, b) in &self.limbs {
            if a >= self.point_count || b >= self.point_count {
                return Err(violation(format!(
                    "limb ({a},{b}) out of range for {} with {} points",
                    self.name, self.point_count
                )));
            }
            if a == b {
                return Err(violation(format!("self-limb ({a},{a}) in {}", self.name)));
            }
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct PoseHeader {
    format_version: u16,
    fps: f32,
    dims: u8,
    components: Vec<ComponentSpec>,
}

impl PoseHeader {
    pub fn new(fps: f32, dims: u8, components: Vec<ComponentSpec>) -> Result<Self, PoseError> {
        Self::with_version(FORMAT_VERSION, fps, dims, components)
    }

    pub(crate) fn with_version(
        format_version: u16,
        fps: f32,
        dims: u8,
        components: Vec<ComponentSpec>,
    ) -> Result<Self, PoseError> {
        if !(fps.is_finite() && fps > 0.0) {
            return Err(violation(format!("fps must be positive, got {fps}")));
        }
        if dims != 2 && dims != 3 {
            return Err(violation(format!("dims must be 2 or 3, got {dims}")));
        }
        if components.is_empty() {
            return Err(violation("header has no components"));
        }
        if components.len() > u8::MAX as usize {
            return Err(violation("more than 255 components"));
        }
        for (i, c) in components.iter().enumerate() {
            c.validate()?;
            if components[..i].iter().any(|o| o.name == c.name) {
                return Err(violation(format!("duplicate component {}", c.name)));
            }
        }
        Ok(PoseHeader {
            format_version,
            fps,
            dims,
            components,
        })
    }

    pub fn format_version(&self) -> u16 {
        self.format_version
    }

    pub fn fps(&self) -> f32 {
        self.fps
    }

    pub fn dims(&self) -> usize {
        self.dims as usize
    }

    pub fn components(&self) -> &[ComponentSpec] {
        &self.components
    }

    pub fn component(&self, name: &str) -> Option<&ComponentSpec> {
        self.components.iter().find(|c| c.name == name)
    }

    pub fn total_points(&self) -> usize {
        self.components.iter().map(|c| c.point_count as usize).sum()
    }

    pub fn total_limbs(&self) -> usize {
        self.components.iter().map(|c| c.limbs.len()).sum()
    }

    /// Cumulative point offset and point count of a component.
    pub fn component_slice(&self, name: &str) -> Result<(usize, usize), PoseError> {
        let mut start = 0;
        for c in &self.components {
            if c.name == name {
                return Ok((start, c.point_count as usize));
            }
            start += c.point_count as usize;
        }
        Err(PoseError::UnknownComponent(name.to_string()))
    }

    /// All limbs as global point indices, in component then limb order.
    pub fn global_limbs(&self) -> Vec<(usize, usize)> {
        let mut out = Vec::with_capacity(self.total_limbs());
        let mut start = 0;
        for c in &self.components {
            out.extend(
                c.limbs
                    .iter()
                    .map(|&(a, b)| (start + a as usize, start + b as usize)),
            );
            start += c.point_count as usize;
        }
        out
    }
}

/// Frame data: `frames` is T×K×D coordinates, `confidences` is T×K.
#[derive(Debug, Clone, PartialEq)]
pub struct PoseBody {
    frame_count: usize,
    points: usize,
    dims: usize,
    coordinates: Vec<f32>,
    confidences: Vec<f32>,
}

impl PoseBody {
    pub fn new(
        frame_count: usize,
        points: usize,
        dims: usize,
        coordinates: Vec<f32>,
        confidences: Vec<f32>,
    ) -> Result<Self, PoseError> {
        if frame_count == 0 {
            return Err(violation("body must contain at least one frame"));
        }
        if frame_count > u32::MAX as usize {
            return Err(violation("frame count exceeds u32"));
        }
        if coordinates.len() != frame_count * points * dims {
            return Err(violation(format!(
                "coordinate block has {} values, expected {}",
                coordinates.len(),
                frame_count * points * dims
            )));
        }
        if confidences.len() != frame_count * points {
            return Err(violation(format!(
                "confidence block has {} values, expected {}",
                confidences.len(),
                frame_count * points
            )));
        }
        for (i, &c) in confidences.iter().enumerate() {
            if !(0.0..=1.0).contains(&c) {
                return Err(violation(format!("confidence {c} at index {i} outside [0,1]")));
            }
            let xyz = &coordinates[i * dims..(i + 1) * dims];
            if xyz.iter().any(|v| !v.is_finite()) {
                return Err(violation(format!("non-finite coordinate at point index {i}")));
            }
            if c == 0.0 && xyz.iter().any(|&v| v != 0.0) {
                return Err(violation(format!(
                    "absent keypoint at index {i} has non-zero coordinates"
                )));
            }
        }
        Ok(PoseBody {
            frame_count,
            points,
            dims,
            coordinates,
            confidences,
        })
    }

    pub fn frame_count(&self) -> usize {
        self.frame_count
    }

    pub fn points(&self) -> usize {
        self.points
    }

    pub fn dims(&self) -> usize {
        self.dims
    }

    pub fn coordinates(&self) -> &[f32] {
        &self.coordinates
    }

    pub fn confidences(&self) -> &[f32] {
        &self.confidences
    }

    #[inline]
    pub fn point(&self, t: usize, k: usize) -> &[f32] {
        let i = (t * self.points + k) * self.dims;
        &self.coordinates[i..i + self.dims]
    }

    #[inline]
    pub fn confidence(&self, t: usize, k: usize) -> f32 {
        self.confidences[t * self.points + k]
    }

    #[inline]
    pub fn is_present(&self, t: usize, k: usize) -> bool {
        self.confidence(t, k) > 0.0
    }
}

/// A single-person pose sequence.
#[derive(Debug, Clone, PartialEq)]
pub struct PoseSequence {
    header: PoseHeader,
    body: PoseBody,
}

impl PoseSequence {
    pub fn new(header: PoseHeader, body: PoseBody) -> Result<Self, PoseError> {
        if body.points != header.total_points() {
            return Err(violation(format!(
                "body has {} points, header declares {}",
                body.points,
                header.total_points()
            )));
        }
        if body.dims != header.dims() {
            return Err(violation(format!(
                "body has {} dims, header declares {}",
                body.dims,
                header.dims()
            )));
        }
        Ok(PoseSequence { header, body })
    }

    /// Builds a sequence from raw blocks, validating everything.
    pub fn from_parts(
        header: PoseHeader,
        frame_count: usize,
        coordinates: Vec<f32>,
        confidences: Vec<f32>,
    ) -> Result<Self, PoseError> {
        let body = PoseBody::new(
            frame_count,
            header.total_points(),
            header.dims(),
            coordinates,
            confidences,
        )?;
        PoseSequence::new(header, body)
    }

    pub fn header(&self) -> &PoseHeader {
        &self.header
    }

    pub fn body(&self) -> &PoseBody {
        &self.body
    }

    pub fn frame_count(&self) -> usize {
        self.body.frame_count
    }

    pub fn into_parts(self) -> (PoseHeader, PoseBody) {
        (self.header, self.body)
    }

    pub fn component_slice(&self, name: &str) -> Result<(usize, usize), PoseError> {
        self.header.component_slice(name)
    }

    /// Keeps only the named components, in header order.
    pub fn select_components<S: AsRef<str>>(&self, names: &[S]) -> Result<PoseSequence, PoseError> {
        for n in names {
            if self.header.component(n.as_ref()).is_none() {
                return Err(PoseError::UnknownComponent(n.as_ref().to_string()));
            }
        }
        let mut kept = Vec::new();
        let mut ranges = Vec::new();
        let mut start = 0;
        for c in &self.header.components {
            let count = c.point_count as usize;
            if names.iter().any(|n| n.as_ref() == c.name) {
                kept.push(c.clone());
                ranges.push(start..start + count);
            }
            start += count;
        }
        let header = PoseHeader::with_version(
            self.header.format_version,
            self.header.fps,
            self.header.dims,
            kept,
        )?;
        let d = self.body.dims;
        let k_new = header.total_points();
        let t_count = self.body.frame_count;
        let mut coords = Vec::with_capacity(t_count * k_new * d);
        let mut confs = Vec::with_capacity(t_count * k_new);
        for t in 0..t_count {
            let row = t * self.body.points;
            for r in &ranges {
                coords.extend_from_slice(
                    &self.body.coordinates[(row + r.start) * d..(row + r.end) * d],
                );
                confs.extend_from_slice(&self.body.confidences[row + r.start..row + r.end]);
            }
        }
        PoseSequence::from_parts(header, t_count, coords, confs)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn holistic_header() -> PoseHeader {
        SkeletonLayout::holistic543().header(30.0, 3).unwrap()
    }

    fn seq_with(header: PoseHeader, frames: usize) -> PoseSequence {
        let k = header.total_points();
        let d = header.dims();
        let coords = (0..frames * k * d).map(|i| (i % 97) as f32 * 0.01).collect();
        let confs = vec![1.0; frames * k];
        PoseSequence::from_parts(header, frames, coords, confs).unwrap()
    }

    #[test]
    fn holistic_layout_has_543_points() {
        assert_eq!(holistic_header().total_points(), 543);
    }

    #[test]
    fn component_slice_uses_cumulative_offsets() {
        let h = holistic_header();
        assert_eq!(h.component_slice(FACE).unwrap(), (0, 468));
        assert_eq!(h.component_slice(BODY).unwrap(), (468, 33));
        assert_eq!(h.component_slice(LEFT_HAND).unwrap(), (501, 21));
        assert_eq!(h.component_slice(RIGHT_HAND).unwrap(), (522, 21));
        let single = PoseHeader::new(25.0, 2, vec![ComponentSpec::new("X", 7, vec![]).unwrap()])
            .unwrap();
        assert_eq!(single.component_slice("X").unwrap(), (0, 7));
        assert!(matches!(
            h.component_slice("TAIL"),
            Err(PoseError::UnknownComponent(_))
        ));
    }

    #[test]
    fn removing_the_face_leaves_75_points() {
        let p = seq_with(holistic_header(), 2);
        let q = p.select_components(&[BODY, LEFT_HAND, RIGHT_HAND]).unwrap();
        assert_eq!(q.header().total_points(), 75);
        assert_eq!(q.frame_count(), 2);
        // BODY point 0 was global index 468.
        assert_eq!(q.body().point(1, 0), p.body().point(1, 468));
    }

    #[test]
    fn selection_order_follows_header() {
        let p = seq_with(holistic_header(), 1);
        let a = p.select_components(&[RIGHT_HAND, BODY]).unwrap();
        let names: Vec<_> = a.header().components().iter().map(|c| c.name.as_str()).collect();
        assert_eq!(names, vec![BODY, RIGHT_HAND]);
    }

    #[test]
    fn select_all_is_identity_and_unknown_is_rejected() {
        let p = seq_with(holistic_header(), 3);
        let all: Vec<String> = p.header().components().iter().map(|c| c.name.clone()).collect();
        assert_eq!(p.select_components(&all).unwrap(), p);
        assert_eq!(
            p.select_components(&["NOSE_RING"]),
            Err(PoseError::UnknownComponent("NOSE_RING".into()))
        );
    }

    #[test]
    fn construction_rejects_bad_invariants() {
        assert!(PoseHeader::new(30.0, 2, vec![]).is_err());
        assert!(ComponentSpec::new("A", 3, vec![(0, 3)]).is_err());
        assert!(ComponentSpec::new("A", 3, vec![(1, 1)]).is_err());
        let dup = vec![
            ComponentSpec::new("A", 1, vec![]).unwrap(),
            ComponentSpec::new("A", 1, vec![]).unwrap(),
        ];
        assert!(PoseHeader::new(30.0, 2, dup).is_err());
        assert!(PoseHeader::new(0.0, 2, vec![ComponentSpec::new("A", 1, vec![]).unwrap()]).is_err());
        let h = PoseHeader::new(30.0, 2, vec![ComponentSpec::new("A", 1, vec![]).unwrap()]).unwrap();
        assert!(PoseSequence::from_parts(h.clone(), 1, vec![0.0, 0.0], vec![1.5]).is_err());
        assert!(PoseSequence::from_parts(h.clone(), 1, vec![1.0, 0.0], vec![0.0]).is_err());
        assert!(PoseSequence::from_parts(h.clone(), 0, vec![], vec![]).is_err());
        assert!(PoseSequence::from_parts(h, 1, vec![f32::NAN, 0.0], vec![1.0]).is_err());
    }
}
