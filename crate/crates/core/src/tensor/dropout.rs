use super::{mismatch, Mode, Rng, Tensor, TensorError};

/// Per-entry multipliers applied in the forward pass (0 or `1/(1-rate)`),
/// or nothing when dropout was the identity.
#[derive(Debug, Clone, PartialEq)]
pub struct DropoutMask {
    scale: Option<Vec<f64>>,
}

impl DropoutMask {
    pub fn identity() -> Self {
        DropoutMask { scale: None }
    }

    /// Number of zeroed entries.
    pub fn dropped(&self) -> usize {
        self.scale
            .as_ref()
            .map_or(0, |s| s.iter().filter(|&&v| v == 0.0).count())
    }
}

/// Inverted dropout. `rate` must lie in [0, 1).
pub fn dropout(x: &Tensor, rate: f64, rng: &mut Rng, mode: Mode) -> (Tensor, DropoutMask) {
    assert!((0.0..1.0).contains(&rate), "dropout rate {rate} outside [0, 1)");
    if mode == Mode::Eval || rate == 0.0 {
        return (x.clone(), DropoutMask::identity());
    }
    let keep = 1.0 / (1.0 - rate);
    let scale: Vec<f64> = (0..x.len())
        .map(|_| if rng.uniform() < rate { 0.0 } else { keep })
        .collect();
    let mut y = x.clone();
    for (v, s) in y.data_mut().iter_mut().zip(&scale) {
        *v *= s;
    }
    (y, DropoutMask { scale: Some(scale) })
}

pub fn dropout_backward(mask: &DropoutMask, dy: &Tensor) -> Result<Tensor, TensorError> {
    let mut dx = dy.clone();
    if let Some(scale) = &mask.scale {
        if scale.len() != dy.len() {
            return Err(mismatch(
                "dropout_backward",
                format!("mask of {} entries, gradient of {}", scale.len(), dy.len()),
            ));
        }
        for (v, s) in dx.data_mut().iter_mut().zip(scale) {
            *v *= s;
        }
    }
    Ok(dx)
}
