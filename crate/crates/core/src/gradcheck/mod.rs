//! Central finite-difference checks for hand-written backward passes.

mod suite;

pub use suite::{layer_checks, LayerCheck};

use crate::tensor::{ParameterSet, Rng, Tensor};

pub const STEP: f64 = 1e-5;

/// Denominator floor of [`relative_error`]. Gradients that are structurally
/// zero (e.g. an attention key bias) are compared in absolute terms, where
/// finite-difference roundoff would otherwise dominate.
pub const NORM_FLOOR: f64 = 1e-4;

/// `‖a − n‖ / max(‖a‖, ‖n‖, NORM_FLOOR)` over whole vectors.
pub fn relative_error(analytic: &[f64], numeric: &[f64]) -> f64 {
    assert_eq!(analytic.len(), numeric.len());
    let norm = |v: &[f64]| v.iter().map(|x| x * x).sum::<f64>().sqrt();
    let diff: f64 = analytic
        .iter()
        .zip(numeric)
        .map(|(a, n)| (a - n) * (a - n))
        .sum::<f64>()
        .sqrt();
    diff / norm(analytic).max(norm(numeric)).max(NORM_FLOOR)
}

/// Up to `max` distinct indices below `len`, all of them if `len <= max`.
pub fn sample_indices(len: usize, max: usize, rng: &mut Rng) -> Vec<usize> {
    let mut idx: Vec<usize> = (0..len).collect();
    if len > max {
        rng.shuffle(&mut idx);
        idx.truncate(max);
        idx.sort_unstable();
    }
    idx
}

/// Central-difference derivative of `f` at `x` along each listed coordinate.
pub fn numeric_gradient(
    x: &mut Tensor,
    indices: &[usize],
    mut f: impl FnMut(&Tensor) -> f64,
) -> Vec<f64> {
    indices
        .iter()
        .map(|&i| {
            let orig = x.data()[i];
            x.data_mut()[i] = orig + STEP;
            let up = f(x);
            x.data_mut()[i] = orig - STEP;
            let down = f(x);
            x.data_mut()[i] = orig;
            (up - down) / (2.0 * STEP)
        })
        .collect()
}

/// Compares the gradients stored in `params` against finite differences of
/// `loss`, sampling at most `max_entries` coordinates per parameter.
/// Returns `(path, relative error)` for every parameter.
pub fn check_parameters(
    params: &ParameterSet,
    max_entries: usize,
    rng: &mut Rng,
    loss: impl FnMut(&ParameterSet) -> f64,
) -> Vec<(String, f64)> {
    compare_parameters(params, max_entries, rng, loss, false)
}

/// Like [`check_parameters`], but drops coordinates where the loss has a kink
/// within one step (a max-pool winner changing, say), detected by the two
/// one-sided slopes disagreeing.
pub fn check_parameters_skipping_kinks(
    params: &ParameterSet,
    max_entries: usize,
    rng: &mut Rng,
    loss: impl FnMut(&ParameterSet) -> f64,
) -> Vec<(String, f64)> {
    compare_parameters(params, max_entries, rng, loss, true)
}

/// One-sided slopes of a smooth loss differ by about `STEP * f''`; a kink
/// makes them differ by the jump in slope.
const KINK_SLOPE_GAP: f64 = 1e-3;

fn compare_parameters(
    params: &ParameterSet,
    max_entries: usize,
    rng: &mut Rng,
    mut loss: impl FnMut(&ParameterSet) -> f64,
    skip_kinks: bool,
) -> Vec<(String, f64)> {
    let mut work = params.clone();
    let base = if skip_kinks { loss(params) } else { 0.0 };
    let paths: Vec<String> = params.paths().map(str::to_string).collect();
    paths
        .into_iter()
        .map(|path| {
            let idx = sample_indices(params.value(&path).len(), max_entries, rng);
            let mut analytic = Vec::with_capacity(idx.len());
            let mut numeric = Vec::with_capacity(idx.len());
            for i in idx {
                let orig = work.value(&path).data()[i];
                work.value_mut(&path).data_mut()[i] = orig + STEP;
                let up = loss(&work);
                work.value_mut(&path).data_mut()[i] = orig - STEP;
                let down = loss(&work);
                work.value_mut(&path).data_mut()[i] = orig;
                if skip_kinks {
                    let (right, left) = ((up - base) / STEP, (base - down) / STEP);
                    if (right - left).abs() > KINK_SLOPE_GAP * right.abs().max(left.abs()).max(1.0) {
                        continue;
                    }
                }
                analytic.push(params.grad(&path).data()[i]);
                numeric.push((up - down) / (2.0 * STEP));
            }
            let err = relative_error(&analytic, &numeric);
            (path, err)
        })
        .collect()
}

/// `Σ y ⊙ r`, the scalar used to probe a layer: its gradient w.r.t. `y` is `r`.
pub fn probe_loss(y: &Tensor, r: &Tensor) -> f64 {
    y.data().iter().zip(r.data()).map(|(a, b)| a * b).sum()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn relative_error_cases() {
        assert_eq!(relative_error(&[1.0, 2.0], &[1.0, 2.0]), 0.0);
        assert_eq!(relative_error(&[0.0], &[0.0]), 0.0);
        assert!((relative_error(&[1.0], &[0.0]) - 1.0).abs() < 1e-15);
        assert!(relative_error(&[0.0], &[1e-10]) < 1e-5);
    }

    #[test]
    fn numeric_gradient_of_square() {
        let mut x = Tensor::from_vec(&[2], vec![3.0, -1.0]).unwrap();
        let g = numeric_gradient(&mut x, &[0, 1], |t| t.data().iter().map(|v| v * v).sum());
        assert!((g[0] - 6.0).abs() < 1e-8 && (g[1] + 2.0).abs() < 1e-8);
    }
}
