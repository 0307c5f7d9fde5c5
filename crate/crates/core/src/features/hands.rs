use super::FeatureError;
use crate::pose::{PoseSequence, LEFT_HAND, RIGHT_HAND};
use serde::{Deserialize, Serialize};

/// Wrist index inside a 21-point hand component.
const WRIST: usize = 0;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Hand {
    Left,
    Right,
}

impl Hand {
    pub fn component(self) -> &'static str {
        match self {
            Hand::Left => LEFT_HAND,
            Hand::Right => RIGHT_HAND,
        }
    }

    pub fn opposite(self) -> Hand {
        match self {
            Hand::Left => Hand::Right,
            Hand::Right => Hand::Left,
        }
    }
}

/// Fraction of frames in which at least one keypoint of `hand` is present.
pub fn hand_presence(p: &PoseSequence, hand: Hand) -> Result<f64, FeatureError> {
    let (start, count) = p.component_slice(hand.component())?;
    let body = p.body();
    let present = (0..body.frame_count())
        .filter(|&t| (start..start + count).any(|k| body.is_present(t, k)))
        .count();
    Ok(present as f64 / body.frame_count() as f64)
}

/// Path length of the hand's wrist through the frames where it is present.
///
/// Gaps are bridged: consecutive observed positions are joined even when
/// absent frames lie between them.
pub fn wrist_path_length(p: &PoseSequence, hand: Hand) -> Result<f64, FeatureError> {
    let (start, _) = p.component_slice(hand.component())?;
    let body = p.body();
    let wrist = start + WRIST;
    let mut last: Option<(f64, f64)> = None;
    let mut total = 0.0;
    for t in 0..body.frame_count() {
        if !body.is_present(t, wrist) {
            continue;
        }
        let xy = body.point(t, wrist);
        let cur = (xy[0] as f64, xy[1] as f64);
        if let Some(prev) = last {
            total += (cur.0 - prev.0).hypot(cur.1 - prev.1);
        }
        last = Some(cur);
    }
    Ok(total)
}

/// The hand whose wrist travels further; ties (including both absent) go to Right.
pub fn dominant_hand(p: &PoseSequence) -> Result<Hand, FeatureError> {
    let left = wrist_path_length(p, Hand::Left)?;
    let right = wrist_path_length(p, Hand::Right)?;
    Ok(if left > right { Hand::Left } else { Hand::Right })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::pose::SkeletonLayout;

    /// Builds a 75-point sequence with only the given wrists present.
    fn wrists(frames: &[(Option<[f32; 2]>, Option<[f32; 2]>)]) -> PoseSequence {
        let h = SkeletonLayout::holistic75().header(30.0, 2).unwrap();
        let (ls, _) = h.component_slice(LEFT_HAND).unwrap();
        let (rs, _) = h.component_slice(RIGHT_HAND).unwrap();
        let mut coords = vec![0.0f32; frames.len() * 150];
        let mut confs = vec![0.0f32; frames.len() * 75];
        for (t, (l, r)) in frames.iter().enumerate() {
            for (pt, start) in [(l, ls), (r, rs)] {
                if let Some(xy) = pt {
                    coords[(t * 75 + start) * 2] = xy[0];
                    coords[(t * 75 + start) * 2 + 1] = xy[1];
                    confs[t * 75 + start] = 1.0;
                }
            }
        }
        PoseSequence::from_parts(h, frames.len(), coords, confs).unwrap()
    }

    #[test]
    fn presence_counts_frames() {
        let p = wrists(&[
            (Some([0.0, 0.0]), None),
            (None, None),
            (Some([1.0, 0.0]), None),
            (Some([1.0, 1.0]), Some([0.0, 0.0])),
        ]);
        assert_eq!(hand_presence(&p, Hand::Left).unwrap(), 0.75);
        assert_eq!(hand_presence(&p, Hand::Right).unwrap(), 0.25);
        let none = wrists(&[(None, None)]);
        assert_eq!(hand_presence(&none, Hand::Left).unwrap(), 0.0);
    }

    #[test]
    fn dominant_by_wrist_travel() {
        // Left travels 2.0, right 0.5.
        let p = wrists(&[
            (Some([0.0, 0.0]), Some([0.0, 0.0])),
            (Some([1.0, 0.0]), Some([0.5, 0.0])),
            (Some([1.0, 1.0]), Some([0.5, 0.0])),
        ]);
        assert_eq!(wrist_path_length(&p, Hand::Left).unwrap(), 2.0);
        assert_eq!(wrist_path_length(&p, Hand::Right).unwrap(), 0.5);
        assert_eq!(dominant_hand(&p).unwrap(), Hand::Left);
    }

    #[test]
    fn dominant_edge_cases() {
        let right_only = wrists(&[(None, Some([0.0, 0.0])), (None, Some([0.0, 1.0]))]);
        assert_eq!(dominant_hand(&right_only).unwrap(), Hand::Right);
        let absent = wrists(&[(None, None), (None, None)]);
        assert_eq!(dominant_hand(&absent).unwrap(), Hand::Right);
    }

    #[test]
    fn path_bridges_gaps() {
        let p = wrists(&[(Some([0.0, 0.0]), None), (None, None), (Some([3.0, 4.0]), None)]);
        assert_eq!(wrist_path_length(&p, Hand::Left).unwrap(), 5.0);
    }
}
