use super::SynthError;
use crate::features::{wrist_path_length, Hand};
use crate::pose::{PoseSequence, BODY};
use crate::tensor::Rng;
use serde::{Deserialize, Serialize};
use std::str::FromStr;

/// How the occluded frames are chosen.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum OcclusionMode {
    /// Frames where the two hands are closest together.
    HandsInteraction,
    /// Frames where the dominant hand is closest to the nose.
    HandFace,
    /// A seeded uniform choice of frames.
    RandomDrop,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum OcclusionTarget {
    Dominant,
    Both,
}

impl FromStr for OcclusionMode {
    type Err = String;
    fn from_str(s: &str) -> Result<Self, String> {
        match s {
            "hands-interaction" => Ok(OcclusionMode::HandsInteraction),
            "hand-face" => Ok(OcclusionMode::HandFace),
            "random-drop" => Ok(OcclusionMode::RandomDrop),
            _ => Err(format!(
                "unknown occlusion mode {s:?} (expected hands-interaction, hand-face or random-drop)"
            )),
        }
    }
}

impl FromStr for OcclusionTarget {
    type Err = String;
    fn from_str(s: &str) -> Result<Self, String> {
        match s {
            "dominant" => Ok(OcclusionTarget::Dominant),
            "both" => Ok(OcclusionTarget::Both),
            _ => Err(format!("unknown occlusion target {s:?} (expected dominant or both)")),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct OcclusionSpec {
    pub mode: OcclusionMode,
    pub target: OcclusionTarget,
    /// Fraction of frames affected; `round(fraction * T)` frames are occluded.
    pub fraction: f64,
    pub seed: u64,
}

/// Body landmark wrists, used when a hand's own wrist is missing.
const BODY_LEFT_WRIST: usize = 15;
const BODY_RIGHT_WRIST: usize = 16;
const BODY_NOSE: usize = 0;

/// Hides the target hand(s) in `round(fraction * T)` frames: confidences and
/// coordinates are set to zero, everything else is copied unchanged.
///
/// The dominant hand is the one whose wrist travels further (a hand missing
/// from the layout counts as not moving; ties go to the right hand). Ties in
/// the frame ranking are broken by a seeded shuffle.
pub fn apply_occlusion(p: &PoseSequence, spec: &OcclusionSpec) -> Result<PoseSequence, SynthError> {
    if !(0.0..=1.0).contains(&spec.fraction) {
        return Err(SynthError::InvalidConfig(format!(
            "occlusion fraction {} outside [0, 1]",
            spec.fraction
        )));
    }
    let frames = p.frame_count();
    let count = (spec.fraction * frames as f64).round() as usize;
    if count == 0 {
        return Ok(p.clone());
    }
    let dominant = dominant_of(p);
    let targets: Vec<Hand> = match spec.target {
        OcclusionTarget::Dominant => vec![dominant],
        OcclusionTarget::Both => vec![Hand::Left, Hand::Right],
    };

    let mut order: Vec<usize> = (0..frames).collect();
    Rng::new(spec.seed).shuffle(&mut order);
    if spec.mode != OcclusionMode::RandomDrop {
        let dist: Vec<f64> = (0..frames)
            .map(|t| {
                let d = match spec.mode {
                    OcclusionMode::HandFace => distance(hand_position(p, t, dominant), body_point(p, t, BODY_NOSE)),
                    _ => distance(hand_position(p, t, Hand::Left), hand_position(p, t, Hand::Right)),
                };
                d.unwrap_or(f64::INFINITY)
            })
            .collect();
        order.sort_by(|&a, &b| dist[a].total_cmp(&dist[b]));
    }
    let mut chosen = vec![false; frames];
    for &t in &order[..count] {
        chosen[t] = true;
    }

    let ranges: Vec<(usize, usize)> = targets
        .iter()
        .filter_map(|h| p.component_slice(h.component()).ok())
        .collect();
    let body = p.body();
    let (k, dims) = (body.points(), body.dims());
    let mut coords = body.coordinates().to_vec();
    let mut confs = body.confidences().to_vec();
    for t in (0..frames).filter(|&t| chosen[t]) {
        for &(start, n) in &ranges {
            for i in start..start + n {
                confs[t * k + i] = 0.0;
                coords[(t * k + i) * dims..(t * k + i + 1) * dims].fill(0.0);
            }
        }
    }
    Ok(PoseSequence::from_parts(p.header().clone(), frames, coords, confs)?)
}

fn dominant_of(p: &PoseSequence) -> Hand {
    let path = |h: Hand| wrist_path_length(p, h).unwrap_or(0.0);
    if path(Hand::Left) > path(Hand::Right) {
        Hand::Left
    } else {
        Hand::Right
    }
}

fn body_point(p: &PoseSequence, t: usize, index: usize) -> Option<[f64; 2]> {
    let (start, n) = p.component_slice(BODY).ok()?;
    if index >= n || !p.body().is_present(t, start + index) {
        return None;
    }
    let xy = p.body().point(t, start + index);
    Some([xy[0] as f64, xy[1] as f64])
}

/// The hand's wrist, falling back to the body landmark wrist on that side.
fn hand_position(p: &PoseSequence, t: usize, hand: Hand) -> Option<[f64; 2]> {
    if let Ok((start, _)) = p.component_slice(hand.component()) {
        if p.body().is_present(t, start) {
            let xy = p.body().point(t, start);
            return Some([xy[0] as f64, xy[1] as f64]);
        }
    }
    let fallback = match hand {
        Hand::Left => BODY_LEFT_WRIST,
        Hand::Right => BODY_RIGHT_WRIST,
    };
    body_point(p, t, fallback)
}

fn distance(a: Option<[f64; 2]>, b: Option<[f64; 2]>) -> Option<f64> {
    let (a, b) = (a?, b?);
    Some((a[0] - b[0]).hypot(a[1] - b[1]))
}
