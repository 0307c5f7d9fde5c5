use super::FeatureError;
use crate::pose::{MirrorTable, PoseSequence, BODY};
use serde::{Deserialize, Serialize};

/// A keypoint addressed by component name and component-local index.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct PointRef {
    pub component: String,
    pub index: u16,
}

impl PointRef {
    pub fn new(component: impl Into<String>, index: u16) -> Self {
        PointRef {
            component: component.into(),
            index,
        }
    }
}

/// Similarity normalization: anchor midpoint to the origin, anchor distance
/// to `target_distance`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NormalizationSpec {
    pub anchor_a: PointRef,
    pub anchor_b: PointRef,
    pub target_distance: f64,
}

impl Default for NormalizationSpec {
    /// Shoulder normalization on the 33-point body (11 left, 12 right shoulder).
    fn default() -> Self {
        NormalizationSpec {
            anchor_a: PointRef::new(BODY, 11),
            anchor_b: PointRef::new(BODY, 12),
            target_distance: 1.0,
        }
    }
}

const MIN_ANCHOR_DISTANCE: f64 = 1e-6;

#[derive(Clone, Copy)]
struct Similarity {
    center: [f64; 2],
    scale: f64,
}

impl Similarity {
    const IDENTITY: Similarity = Similarity {
        center: [0.0, 0.0],
        scale: 1.0,
    };
}

fn resolve(p: &PoseSequence, r: &PointRef) -> Result<usize, FeatureError> {
    let (start, count) = p.header().component_slice(&r.component)?;
    if r.index as usize >= count {
        return Err(FeatureError::InvalidSpec(format!(
            "anchor {}[{}] out of range ({count} points)",
            r.component, r.index
        )));
    }
    Ok(start + r.index as usize)
}

/// Normalizes every frame by the anchor similarity transform.
///
/// Frames where an anchor is absent (or the anchors coincide) reuse the most
/// recent valid transform, or the identity before the first valid frame.
/// Confidences and absent keypoints are left untouched; z is scaled but not
/// translated.
pub fn normalize_pose(
    p: &PoseSequence,
    spec: &NormalizationSpec,
) -> Result<PoseSequence, FeatureError> {
    if !(spec.target_distance.is_finite() && spec.target_distance > 0.0) {
        return Err(FeatureError::InvalidSpec(format!(
            "target distance {} must be positive",
            spec.target_distance
        )));
    }
    let a = resolve(p, &spec.anchor_a)?;
    let b = resolve(p, &spec.anchor_b)?;
    if a == b {
        return Err(FeatureError::InvalidSpec("anchors must differ".into()));
    }
    let body = p.body();
    let (k, d) = (body.points(), body.dims());
    let mut coords = body.coordinates().to_vec();
    let mut current = Similarity::IDENTITY;
    let mut saw_anchors = false;
    let mut saw_valid = false;
    for t in 0..body.frame_count() {
        if body.is_present(t, a) && body.is_present(t, b) {
            saw_anchors = true;
            let pa = body.point(t, a);
            let pb = body.point(t, b);
            let (ax, ay) = (pa[0] as f64, pa[1] as f64);
            let (bx, by) = (pb[0] as f64, pb[1] as f64);
            let dist = (bx - ax).hypot(by - ay);
            if dist >= MIN_ANCHOR_DISTANCE {
                saw_valid = true;
                current = Similarity {
                    center: [(ax + bx) / 2.0, (ay + by) / 2.0],
                    scale: spec.target_distance / dist,
                };
            }
        }
        for i in 0..k {
            if !body.is_present(t, i) {
                continue;
            }
            let o = (t * k + i) * d;
            coords[o] = ((coords[o] as f64 - current.center[0]) * current.scale) as f32;
            coords[o + 1] = ((coords[o + 1] as f64 - current.center[1]) * current.scale) as f32;
            if d == 3 {
                coords[o + 2] = (coords[o + 2] as f64 * current.scale) as f32;
            }
        }
    }
    if saw_anchors && !saw_valid {
        return Err(FeatureError::DegenerateAnchors);
    }
    Ok(PoseSequence::from_parts(
        p.header().clone(),
        body.frame_count(),
        coords,
        body.confidences().to_vec(),
    )?)
}

/// Mirrors a sequence about the vertical axis through the origin.
///
/// x is negated, left/right blocks and point pairs are swapped according to
/// `mirror`, and y/z are unchanged. Negation is exact, so flipping twice
/// reproduces the input bit for bit.
pub fn flip_horizontal(p: &PoseSequence, mirror: &MirrorTable) -> Result<PoseSequence, FeatureError> {
    let perm = mirror.permutation(p.header())?;
    let body = p.body();
    let (k, d) = (body.points(), body.dims());
    let mut coords = Vec::with_capacity(body.coordinates().len());
    let mut confs = Vec::with_capacity(body.confidences().len());
    for t in 0..body.frame_count() {
        for &src in &perm {
            let xyz = body.point(t, src);
            coords.push(-xyz[0]);
            coords.extend_from_slice(&xyz[1..]);
            confs.push(body.confidence(t, src));
        }
    }
    debug_assert_eq!(coords.len(), body.frame_count() * k * d);
    Ok(PoseSequence::from_parts(
        p.header().clone(),
        body.frame_count(),
        coords,
        confs,
    )?)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::pose::{ComponentSpec, PoseHeader, SkeletonLayout, LEFT_HAND, RIGHT_HAND};

    fn two_point(frames: &[([f32; 4], [f32; 2])]) -> PoseSequence {
        let h = PoseHeader::new(30.0, 2, vec![ComponentSpec::new(BODY, 2, vec![(0, 1)]).unwrap()])
            .unwrap();
        let coords = frames.iter().flat_map(|(c, _)| c.iter().copied()).collect();
        let confs = frames.iter().flat_map(|(_, c)| c.iter().copied()).collect();
        PoseSequence::from_parts(h, frames.len(), coords, confs).unwrap()
    }

    fn spec01() -> NormalizationSpec {
        NormalizationSpec {
            anchor_a: PointRef::new(BODY, 0),
            anchor_b: PointRef::new(BODY, 1),
            target_distance: 1.0,
        }
    }

    #[test]
    fn similarity_example() {
        let p = two_point(&[([0.0, 0.0, 2.0, 0.0], [1.0, 1.0])]);
        let q = normalize_pose(&p, &spec01()).unwrap();
        // x' = (x - 1) / 2, y' = y / 2
        assert_eq!(q.body().coordinates(), &[-0.5, 0.0, 0.5, 0.0]);
    }

    #[test]
    fn normalized_frame_is_a_fixed_point() {
        let p = two_point(&[([-0.5, 0.0, 0.5, 0.0], [1.0, 1.0])]);
        assert_eq!(normalize_pose(&p, &spec01()).unwrap(), p);
    }

    #[test]
    fn all_absent_is_identity() {
        let p = two_point(&[([0.0; 4], [0.0, 0.0]), ([0.0; 4], [0.0, 0.0])]);
        assert_eq!(normalize_pose(&p, &spec01()).unwrap(), p);
    }

    #[test]
    fn missing_anchor_reuses_last_transform() {
        let p = two_point(&[
            ([1.0, 1.0, 0.0, 0.0], [1.0, 0.0]), // before any valid frame: identity
            ([0.0, 0.0, 4.0, 0.0], [1.0, 1.0]),
            ([6.0, 2.0, 0.0, 0.0], [1.0, 0.0]),
        ]);
        let q = normalize_pose(&p, &spec01()).unwrap();
        assert_eq!(q.body().point(0, 0), &[1.0, 1.0]);
        assert_eq!(q.body().point(2, 0), &[1.0, 0.5]);
    }

    #[test]
    fn coincident_anchors_everywhere_are_degenerate() {
        let p = two_point(&[([1.0, 1.0, 1.0, 1.0], [1.0, 1.0])]);
        assert_eq!(normalize_pose(&p, &spec01()), Err(FeatureError::DegenerateAnchors));
        let mut bad = spec01();
        bad.anchor_b = PointRef::new(BODY, 0);
        assert!(matches!(normalize_pose(&p, &bad), Err(FeatureError::InvalidSpec(_))));
    }

    #[test]
    fn flip_moves_left_hand_points_to_right_hand() {
        let layout = SkeletonLayout::holistic75();
        let h = layout.header(30.0, 2).unwrap();
        let (ls, _) = h.component_slice(LEFT_HAND).unwrap();
        let (rs, _) = h.component_slice(RIGHT_HAND).unwrap();
        let mut coords = vec![0.0f32; 75 * 2];
        let mut confs = vec![0.0f32; 75];
        coords[2 * (ls + 3)] = 0.3;
        coords[2 * (ls + 3) + 1] = 0.7;
        confs[ls + 3] = 1.0;
        let p = PoseSequence::from_parts(h, 1, coords, confs).unwrap();
        let f = flip_horizontal(&p, &layout.mirror).unwrap();
        assert_eq!(f.body().point(0, rs + 3), &[-0.3, 0.7]);
        assert!(!f.body().is_present(0, ls + 3));
        let back = flip_horizontal(&f, &layout.mirror).unwrap();
        let bits = |s: &PoseSequence| s.body().coordinates().iter().map(|v| v.to_bits()).collect::<Vec<_>>();
        assert_eq!(bits(&back), bits(&p));
    }

    #[test]
    fn flip_without_mirror_declaration_fails() {
        let p = two_point(&[([0.0, 0.0, 1.0, 0.0], [1.0, 1.0])]);
        let mut table = MirrorTable::default();
        assert!(matches!(
            flip_horizontal(&p, &table),
            Err(FeatureError::Pose(crate::pose::PoseError::MissingMirrorTable(_)))
        ));
        table.point_pairs.push((BODY.into(), vec![(0, 1)]));
        let f = flip_horizontal(&p, &table).unwrap();
        assert_eq!(f.body().coordinates(), &[-1.0, 0.0, -0.0, 0.0]);
    }
}
