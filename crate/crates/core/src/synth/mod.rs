//! Seeded synthetic sign classes over the 75-point body + hands layout.
//!
//! Every class is a Lissajous path of the dominant hand, with a
//! class-specific hand rotation. The body is static and the passive hand
//! rests out of frame, so all class information lives in the dominant hand.

mod occlusion;
mod split;

pub use occlusion::{apply_occlusion, OcclusionMode, OcclusionSpec, OcclusionTarget};
pub use split::{signer_disjoint_split, split_signers};

use crate::features::{flip_horizontal, FeatureError};
use crate::model::LabeledSample;
use crate::pose::{PoseError, PoseSequence, SkeletonLayout, LEFT_HAND, RIGHT_HAND};
use crate::tensor::Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use std::f64::consts::TAU;
use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum SynthError {
    #[error("invalid synthesis config: {0}")]
    InvalidConfig(String),
    #[error("signer-disjoint split needs at least 2 signers, found {0}")]
    TooFewSigners(usize),
    #[error("train fraction {0} must lie strictly between 0 and 1")]
    InvalidFraction(f64),
    #[error(transparent)]
    Pose(#[from] PoseError),
    #[error(transparent)]
    Feature(#[from] FeatureError),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Handedness {
    Left,
    Right,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SignerProfile {
    pub id: String,
    /// Body size multiplier, in [0.8, 1.2].
    pub scale: f64,
    /// Signing speed multiplier, in [0.7, 1.3]; faster signers produce fewer frames.
    pub speed: f64,
    /// Per-coordinate Gaussian noise in shoulder-width units.
    pub noise_sd: f64,
    pub handedness: Handedness,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SynthesisConfig {
    pub classes: usize,
    pub samples_per_class: usize,
    pub signers: Vec<SignerProfile>,
    /// Inclusive range of frame counts at speed 1.
    pub frames: (usize, usize),
    pub fps: f32,
    /// Probability that the pose estimator misses the dominant hand in a frame.
    pub detection_miss_rate: f64,
    pub seed: u64,
}

pub const DEFAULT_NOISE_SD: f64 = 0.03;
pub const DEFAULT_FRAMES: (usize, usize) = (12, 20);

impl SynthesisConfig {
    /// Draws `signers` profiles from `seed`: scale and speed uniform over
    /// their ranges, noise [`DEFAULT_NOISE_SD`], and every third signer
    /// (`k % 3 == 2`) left-handed.
    pub fn new(classes: usize, samples_per_class: usize, signers: usize, seed: u64) -> Self {
        let mut rng = Rng::new(seed).derive(0);
        let signers = (0..signers)
            .map(|k| SignerProfile {
                id: format!("signer{k:02}"),
                scale: rng.uniform_range(0.8, 1.2),
                speed: rng.uniform_range(0.7, 1.3),
                noise_sd: DEFAULT_NOISE_SD,
                handedness: if k % 3 == 2 {
                    Handedness::Left
                } else {
                    Handedness::Right
                },
            })
            .collect();
        SynthesisConfig {
            classes,
            samples_per_class,
            signers,
            frames: DEFAULT_FRAMES,
            fps: 30.0,
            detection_miss_rate: 0.0,
            seed,
        }
    }

    pub fn validate(&self) -> Result<(), SynthError> {
        let bad = |m: String| Err(SynthError::InvalidConfig(m));
        if self.classes < 2 {
            return bad(format!("need at least 2 classes, got {}", self.classes));
        }
        if self.signers.len() < 2 {
            return bad(format!("need at least 2 signers, got {}", self.signers.len()));
        }
        if self.frames.0 < 2 || self.frames.0 > self.frames.1 {
            return bad(format!("frame range {:?} must satisfy 2 <= min <= max", self.frames));
        }
        if !(self.fps.is_finite() && self.fps > 0.0) {
            return bad(format!("fps {} must be positive", self.fps));
        }
        if !(0.0..1.0).contains(&self.detection_miss_rate) {
            return bad(format!("detection miss rate {} outside [0, 1)", self.detection_miss_rate));
        }
        for s in &self.signers {
            if !(0.8..=1.2).contains(&s.scale) || !(0.7..=1.3).contains(&s.speed) {
                return bad(format!("signer {} has scale {} / speed {}", s.id, s.scale, s.speed));
            }
            if !(s.noise_sd.is_finite() && s.noise_sd >= 0.0) {
                return bad(format!("signer {} has noise sd {}", s.id, s.noise_sd));
            }
        }
        Ok(())
    }
}

/// Distance between the shoulders in raw coordinates at scale 1.
const SHOULDER_WIDTH: f64 = 0.25;
/// Hand length (wrist to middle fingertip is about 0.9 of this).
const HAND_SIZE: f64 = 0.1;
/// Center of the dominant hand's motion, relative to the shoulder midpoint.
const MOTION_ANCHOR: [f64; 2] = [-0.1, -0.02];
const MOTION_AMPLITUDE: f64 = 0.12;
/// Where the shoulder midpoint sits in the image.
const IMAGE_CENTER: [f64; 2] = [0.5, 0.45];

/// Left-side body points (index, x, y) around the shoulder midpoint, y down.
/// Right-side partners are the mirror images; index 0 is the nose.
const BODY_LEFT: [(usize, usize, f64, f64); 16] = [
    (1, 4, 0.02, -0.28),
    (2, 5, 0.035, -0.28),
    (3, 6, 0.05, -0.28),
    (7, 8, 0.08, -0.26),
    (9, 10, 0.025, -0.2),
    (11, 12, 0.125, 0.0),
    (13, 14, 0.16, 0.17),
    (15, 16, 0.17, 0.33),
    (17, 18, 0.175, 0.36),
    (19, 20, 0.165, 0.365),
    (21, 22, 0.155, 0.35),
    (23, 24, 0.08, 0.4),
    (25, 26, 0.085, 0.62),
    (27, 28, 0.09, 0.84),
    (29, 30, 0.095, 0.87),
    (31, 32, 0.07, 0.88),
];

/// Right hand, palm to camera, fingers up, in hand-size units around the wrist.
const RIGHT_HAND_TEMPLATE: [[f64; 2]; 21] = [
    [0.0, 0.0],
    [0.2, -0.1],
    [0.35, -0.2],
    [0.45, -0.3],
    [0.55, -0.38],
    [0.15, -0.45],
    [0.15, -0.6],
    [0.15, -0.72],
    [0.15, -0.82],
    [0.02, -0.47],
    [0.02, -0.64],
    [0.02, -0.77],
    [0.02, -0.88],
    [-0.1, -0.44],
    [-0.1, -0.6],
    [-0.1, -0.71],
    [-0.1, -0.8],
    [-0.2, -0.38],
    [-0.2, -0.5],
    [-0.2, -0.58],
    [-0.2, -0.65],
];

fn body_template() -> [[f64; 2]; 33] {
    let mut pts = [[0.0; 2]; 33];
    pts[0] = [0.0, -0.25];
    for &(l, r, x, y) in &BODY_LEFT {
        pts[l] = [x, y];
        pts[r] = [-x, y];
    }
    pts
}

/// Trajectory parameters of one class.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ClassMotion {
    pub freq_x: f64,
    pub freq_y: f64,
    pub phase: f64,
    pub base_rotation: f64,
    pub rotation_freq: f64,
}

/// Classes cycle through the nine frequency pairs in {1,2,3}²; each further
/// cycle shifts the phase. Rotation adds a second, independent cue.
pub fn class_motion(class: usize) -> ClassMotion {
    ClassMotion {
        freq_x: (1 + class % 3) as f64,
        freq_y: (1 + (class / 3) % 3) as f64,
        phase: 0.9 * (class / 9) as f64,
        base_rotation: -0.4 + 0.08 * ((class * 7) % 11) as f64,
        rotation_freq: (1 + class % 2) as f64,
    }
}

impl ClassMotion {
    /// Wrist position (relative to the shoulder midpoint) and hand rotation at
    /// normalized time `u` in [0, 1].
    fn at(&self, u: f64) -> ([f64; 2], f64) {
        let x = MOTION_ANCHOR[0] + MOTION_AMPLITUDE * (TAU * self.freq_x * u + self.phase).sin();
        let y = MOTION_ANCHOR[1] + MOTION_AMPLITUDE * (TAU * self.freq_y * u).sin();
        let rot = self.base_rotation + 0.5 * (TAU * self.rotation_freq * u + self.phase).sin();
        ([x, y], rot)
    }
}

/// Frame count of a sample: `round(base / speed)`, at least 2.
fn frame_count(base: usize, speed: f64) -> usize {
    ((base as f64 / speed).round() as usize).max(2)
}

/// One right-handed noise-free sample around the origin, as a pose sequence.
fn render_right_handed(
    layout: &SkeletonLayout,
    fps: f32,
    motion: &ClassMotion,
    frames: usize,
    scale: f64,
) -> Result<PoseSequence, SynthError> {
    let header = layout.header(fps, 2)?;
    let (rs, _) = header.component_slice(RIGHT_HAND)?;
    let k = header.total_points();
    let body = body_template();
    let mut coords = vec![0.0f32; frames * k * 2];
    let mut confs = vec![0.0f32; frames * k];
    for t in 0..frames {
        let u = t as f64 / (frames - 1) as f64;
        let row = t * k;
        for (i, p) in body.iter().enumerate() {
            coords[(row + i) * 2] = (p[0] * scale) as f32;
            coords[(row + i) * 2 + 1] = (p[1] * scale) as f32;
            confs[row + i] = 1.0;
        }
        let (wrist, rot) = motion.at(u);
        let (s, c) = rot.sin_cos();
        for (j, p) in RIGHT_HAND_TEMPLATE.iter().enumerate() {
            let x = wrist[0] + HAND_SIZE * (c * p[0] - s * p[1]);
            let y = wrist[1] + HAND_SIZE * (s * p[0] + c * p[1]);
            coords[(row + rs + j) * 2] = (x * scale) as f32;
            coords[(row + rs + j) * 2 + 1] = (y * scale) as f32;
            confs[row + rs + j] = 1.0;
        }
    }
    Ok(PoseSequence::from_parts(header, frames, coords, confs)?)
}

/// Generates `classes × samples_per_class` samples. Sample `i` of a class is
/// performed by signer `i % signers`. Each sample draws from its own derived
/// stream, so the output does not depend on the thread count.
pub fn generate_dataset(cfg: &SynthesisConfig) -> Result<Vec<LabeledSample>, SynthError> {
    cfg.validate()?;
    let layout = SkeletonLayout::holistic75();
    let root = Rng::new(cfg.seed).derive(1);
    (0..cfg.classes * cfg.samples_per_class)
        .into_par_iter()
        .map(|n| {
            let (class, i) = (n / cfg.samples_per_class, n % cfg.samples_per_class);
            let signer = &cfg.signers[i % cfg.signers.len()];
            let mut rng = root.derive(n as u64);
            let base = cfg.frames.0 + rng.below(cfg.frames.1 - cfg.frames.0 + 1);
            let frames = frame_count(base, signer.speed);
            let mut pose =
                render_right_handed(&layout, cfg.fps, &class_motion(class), frames, signer.scale)?;
            let dominant = match signer.handedness {
                Handedness::Right => RIGHT_HAND,
                Handedness::Left => {
                    pose = flip_horizontal(&pose, &layout.mirror)?;
                    LEFT_HAND
                }
            };
            let pose = finish_sample(pose, dominant, signer, cfg.detection_miss_rate, &mut rng)?;
            Ok(LabeledSample {
                sample_id: format!("c{class:03}_{i:04}"),
                pose,
                label: class,
                signer_id: signer.id.clone(),
            })
        })
        .collect()
}

/// Moves the pose into image coordinates, adds noise and drops missed
/// dominant-hand detections.
fn finish_sample(
    pose: PoseSequence,
    dominant: &str,
    signer: &SignerProfile,
    miss_rate: f64,
    rng: &mut Rng,
) -> Result<PoseSequence, SynthError> {
    let (header, body) = pose.into_parts();
    let (hs, hn) = header.component_slice(dominant)?;
    let (frames, k) = (body.frame_count(), body.points());
    let mut coords = body.coordinates().to_vec();
    let mut confs = body.confidences().to_vec();
    let sd = signer.noise_sd * SHOULDER_WIDTH * signer.scale;
    for t in 0..frames {
        let missed = miss_rate > 0.0 && rng.bernoulli(miss_rate);
        for i in 0..k {
            let o = (t * k + i) * 2;
            if missed && (hs..hs + hn).contains(&i) {
                coords[o] = 0.0;
                coords[o + 1] = 0.0;
                confs[t * k + i] = 0.0;
                continue;
            }
            if confs[t * k + i] == 0.0 {
                continue;
            }
            for (d, c) in IMAGE_CENTER.iter().enumerate() {
                let noise = if sd > 0.0 { sd * rng.normal() } else { 0.0 };
                coords[o + d] = (coords[o + d] as f64 + c + noise) as f32;
            }
        }
    }
    Ok(PoseSequence::from_parts(header, frames, coords, confs)?)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::features::{dominant_hand, frame_features, hand_presence, Hand};

    fn small(seed: u64) -> SynthesisConfig {
        SynthesisConfig::new(3, 4, 3, seed)
    }

    #[test]
    fn size_and_determinism() {
        let a = generate_dataset(&small(5)).unwrap();
        let b = generate_dataset(&small(5)).unwrap();
        assert_eq!(a.len(), 12);
        assert_eq!(a, b);
        assert_ne!(a, generate_dataset(&small(6)).unwrap());
    }

    #[test]
    fn handedness_follows_signer() {
        let data = generate_dataset(&small(1)).unwrap();
        for s in &data {
            let expected = if s.signer_id == "signer02" { Hand::Left } else { Hand::Right };
            assert_eq!(dominant_hand(&s.pose).unwrap(), expected, "{}", s.sample_id);
            assert_eq!(hand_presence(&s.pose, expected).unwrap(), 1.0);
            assert_eq!(hand_presence(&s.pose, expected.opposite()).unwrap(), 0.0);
        }
    }

    #[test]
    fn classes_are_separable_without_noise() {
        let mut cfg = SynthesisConfig::new(2, 1, 2, 3);
        cfg.frames = (16, 16);
        for s in &mut cfg.signers {
            s.noise_sd = 0.0;
            s.speed = 1.0;
        }
        let data = generate_dataset(&cfg).unwrap();
        let (a, b) = (frame_features(&data[0].pose), frame_features(&data[1].pose));
        assert_eq!(data[0].signer_id, data[1].signer_id);
        let differing = a
            .values()
            .iter()
            .zip(b.values())
            .filter(|(x, y)| (*x - *y).abs() > 1e-3)
            .count();
        assert!(differing * 10 >= a.values().len(), "{differing} of {}", a.values().len());
    }

    #[test]
    fn noise_free_single_signer_repeats_exactly() {
        let mut cfg = SynthesisConfig::new(2, 6, 2, 9);
        cfg.frames = (15, 15);
        for s in &mut cfg.signers {
            s.noise_sd = 0.0;
        }
        let data = generate_dataset(&cfg).unwrap();
        let class0: Vec<_> = data.iter().filter(|s| s.label == 0 && s.signer_id == "signer00").collect();
        assert_eq!(class0.len(), 3);
        assert!(class0.iter().all(|s| s.pose == class0[0].pose));
    }

    #[test]
    fn miss_rate_lowers_presence() {
        let mut cfg = small(2);
        cfg.detection_miss_rate = 0.3;
        let data = generate_dataset(&cfg).unwrap();
        let mean: f64 = data
            .iter()
            .map(|s| hand_presence(&s.pose, dominant_hand(&s.pose).unwrap()).unwrap())
            .sum::<f64>()
            / data.len() as f64;
        assert!(mean < 0.9 && mean > 0.5, "{mean}");
    }

    #[test]
    fn invalid_configs_are_rejected() {
        let mut cfg = small(0);
        cfg.classes = 1;
        assert!(matches!(generate_dataset(&cfg), Err(SynthError::InvalidConfig(_))));
        let mut cfg = small(0);
        cfg.signers.truncate(1);
        assert!(cfg.validate().is_err());
        let mut cfg = small(0);
        cfg.signers[0].noise_sd = -1.0;
        assert!(cfg.validate().is_err());
    }
}
