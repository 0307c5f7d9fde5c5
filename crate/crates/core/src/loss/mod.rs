//! Cross-entropy, CTC loss and CTC decoding.
//!
//! Lattices hold per-frame log-probabilities over `C + 1` symbols with the
//! blank at index 0; class `k` of a C-way problem is symbol `k + 1`.

mod ctc;
mod decode;

pub use ctc::{ctc_loss, minimum_frames, CtcOutput};
pub use decode::{
    ctc_beam_search, ctc_greedy_decode, isolated_prediction, sequence_log_probability,
    IsolatedPrediction, DEFAULT_BEAM_WIDTH,
};

use crate::tensor::{log_softmax_rows, softmax_rows, Tensor, TensorError};
use thiserror::Error;

pub const BLANK: usize = 0;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum LossError {
    #[error("label {label} out of range for {classes} classes")]
    LabelOutOfRange { label: usize, classes: usize },
    #[error("{labels} labels for {rows} rows")]
    LabelCount { labels: usize, rows: usize },
    #[error("invalid lattice: {0}")]
    InvalidLattice(String),
    #[error(transparent)]
    Tensor(#[from] TensorError),
}

/// Log-sum-exp of two log-space values that treats `-inf` as zero mass.
#[inline]
pub fn log_add(a: f64, b: f64) -> f64 {
    if a == f64::NEG_INFINITY {
        return b;
    }
    if b == f64::NEG_INFINITY {
        return a;
    }
    let (hi, lo) = if a > b { (a, b) } else { (b, a) };
    hi + (lo - hi).exp().ln_1p()
}

/// A T×(C+1) matrix of per-frame log-probabilities, blank at column 0.
#[derive(Debug, Clone, PartialEq)]
pub struct LogProbLattice {
    values: Tensor,
}

impl LogProbLattice {
    /// Tolerance on each row's log-sum-exp.
    pub const NORMALIZATION_TOL: f64 = 1e-9;

    pub fn new(values: Tensor) -> Result<Self, LossError> {
        let (_, s) = values.dims2("lattice")?;
        if s < 2 {
            return Err(LossError::InvalidLattice(format!(
                "{s} symbols; need blank plus at least one class"
            )));
        }
        for (t, row) in values.data().chunks(s).enumerate() {
            if row.iter().any(|v| v.is_nan() || *v == f64::INFINITY) {
                return Err(LossError::InvalidLattice(format!("frame {t} has NaN or +inf")));
            }
            let lse = row.iter().fold(f64::NEG_INFINITY, |acc, &v| log_add(acc, v));
            if (lse).abs() > Self::NORMALIZATION_TOL {
                return Err(LossError::InvalidLattice(format!(
                    "frame {t} log-sum-exp is {lse}"
                )));
            }
        }
        Ok(LogProbLattice { values })
    }

    /// Applies log-softmax to raw T×(C+1) scores.
    pub fn from_logits(logits: &Tensor) -> Result<Self, LossError> {
        logits.dims2("lattice")?;
        Self::new(log_softmax_rows(logits))
    }

    /// Builds a lattice from probabilities (rows must sum to 1).
    pub fn from_probabilities(rows: &[Vec<f64>]) -> Result<Self, LossError> {
        let logs: Vec<Vec<f64>> = rows.iter().map(|r| r.iter().map(|p| p.ln()).collect()).collect();
        Self::new(Tensor::from_rows(&logs))
    }

    pub fn frames(&self) -> usize {
        self.values.rows()
    }

    /// Number of symbols including the blank.
    pub fn symbols(&self) -> usize {
        self.values.cols()
    }

    pub fn classes(&self) -> usize {
        self.symbols() - 1
    }

    pub fn log_prob(&self, t: usize, s: usize) -> f64 {
        self.values.data()[t * self.symbols() + s]
    }

    pub fn row(&self, t: usize) -> &[f64] {
        self.values.row(t)
    }

    pub fn values(&self) -> &Tensor {
        &self.values
    }
}

/// Mean cross-entropy over rows and its gradient `(softmax − onehot) / N`.
pub fn cross_entropy(logits: &Tensor, labels: &[usize]) -> Result<(f64, Tensor), LossError> {
    let (n, c) = logits.dims2("cross_entropy")?;
    if labels.len() != n {
        return Err(LossError::LabelCount {
            labels: labels.len(),
            rows: n,
        });
    }
    if let Some(&label) = labels.iter().find(|&&l| l >= c) {
        return Err(LossError::LabelOutOfRange { label, classes: c });
    }
    let logp = log_softmax_rows(logits);
    let mut grad = softmax_rows(logits);
    let mut loss = 0.0;
    for (r, &l) in labels.iter().enumerate() {
        loss -= logp.row(r)[l];
        grad.row_mut(r)[l] -= 1.0;
    }
    for g in grad.data_mut() {
        *g /= n as f64;
    }
    Ok((loss / n as f64, grad))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn uniform_logits_give_log_c() {
        let (loss, _) = cross_entropy(&Tensor::full(&[3, 7], 0.4), &[0, 3, 6]).unwrap();
        assert!((loss - 7f64.ln()).abs() < 1e-14);
    }

    #[test]
    fn confident_logits() {
        let (loss, _) = cross_entropy(&Tensor::from_rows(&[vec![10.0, -10.0]]), &[0]).unwrap();
        // −ln σ(20) = ln(1 + e^−20)
        let expected = (-20f64).exp().ln_1p();
        assert!((loss - expected).abs() < 1e-14);
        assert!((loss - 2.06e-9).abs() < 1e-11);
    }

    #[test]
    fn gradient_rows_sum_to_zero() {
        let logits = Tensor::from_rows(&[vec![0.3, -1.2, 2.0], vec![5.0, 5.0, -3.0]]);
        let (_, g) = cross_entropy(&logits, &[2, 0]).unwrap();
        for r in 0..2 {
            assert!(g.row(r).iter().sum::<f64>().abs() < 1e-12);
        }
    }

    #[test]
    fn label_errors() {
        let logits = Tensor::zeros(&[1, 3]);
        assert_eq!(
            cross_entropy(&logits, &[3]),
            Err(LossError::LabelOutOfRange { label: 3, classes: 3 })
        );
        assert!(matches!(cross_entropy(&logits, &[0, 1]), Err(LossError::LabelCount { .. })));
    }

    #[test]
    fn log_add_handles_empty_mass() {
        assert_eq!(log_add(f64::NEG_INFINITY, f64::NEG_INFINITY), f64::NEG_INFINITY);
        assert_eq!(log_add(f64::NEG_INFINITY, -2.0), -2.0);
        assert!((log_add(0.5f64.ln(), 0.5f64.ln())).abs() < 1e-15);
    }

    #[test]
    fn lattice_rejects_unnormalized_rows() {
        assert!(LogProbLattice::from_probabilities(&[vec![0.5, 0.6]]).is_err());
        assert!(LogProbLattice::from_probabilities(&[vec![1.0]]).is_err());
        let l = LogProbLattice::from_probabilities(&[vec![0.25, 0.75]]).unwrap();
        assert_eq!((l.frames(), l.classes()), (1, 1));
    }
}
