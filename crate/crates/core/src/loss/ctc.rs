use super::{log_add, LogProbLattice, LossError, BLANK};
use crate::tensor::Tensor;

/// Loss and gradient with respect to the lattice's log-probabilities.
#[derive(Debug, Clone, PartialEq)]
pub struct CtcOutput {
    /// `−ln P(target | lattice)`; `+inf` when the target cannot fit.
    pub loss: f64,
    /// ∂loss/∂log p_t(s), T×(C+1). Zero when infeasible.
    pub grad: Tensor,
    pub feasible: bool,
}

/// Frames needed to emit `target`: one per symbol plus a blank between
/// each adjacent repeat.
pub fn minimum_frames(target: &[usize]) -> usize {
    target.len() + target.windows(2).filter(|w| w[0] == w[1]).count()
}

/// CTC negative log-likelihood by the forward-backward recursion over the
/// blank-interleaved target, in log space.
///
/// Target symbols must lie in `1..=C`.
pub fn ctc_loss(lattice: &LogProbLattice, target: &[usize]) -> Result<CtcOutput, LossError> {
    let t_len = lattice.frames();
    let symbols = lattice.symbols();
    if let Some(&bad) = target.iter().find(|&&s| s == BLANK || s >= symbols) {
        return Err(LossError::LabelOutOfRange {
            label: bad,
            classes: lattice.classes(),
        });
    }
    let mut grad = Tensor::zeros(&[t_len, symbols]);
    if minimum_frames(target) > t_len {
        return Ok(CtcOutput {
            loss: f64::INFINITY,
            grad,
            feasible: false,
        });
    }
    // Extended target: blank, l1, blank, l2, ..., blank.
    let ext: Vec<usize> = std::iter::once(BLANK)
        .chain(target.iter().flat_map(|&s| [s, BLANK]))
        .collect();
    let s_len = ext.len();
    let can_skip = |s: usize| s >= 2 && ext[s] != BLANK && ext[s] != ext[s - 2];
    let ninf = f64::NEG_INFINITY;

    let mut alpha = vec![ninf; t_len * s_len];
    alpha[0] = lattice.log_prob(0, ext[0]);
    if s_len > 1 {
        alpha[1] = lattice.log_prob(0, ext[1]);
    }
    for t in 1..t_len {
        for s in 0..s_len {
            let prev = &alpha[(t - 1) * s_len..t * s_len];
            let mut a = prev[s];
            if s >= 1 {
                a = log_add(a, prev[s - 1]);
            }
            if can_skip(s) {
                a = log_add(a, prev[s - 2]);
            }
            alpha[t * s_len + s] = if a == ninf { ninf } else { a + lattice.log_prob(t, ext[s]) };
        }
    }
    let last = (t_len - 1) * s_len;
    let mut log_p = alpha[last + s_len - 1];
    if s_len > 1 {
        log_p = log_add(log_p, alpha[last + s_len - 2]);
    }

    // beta[t][s]: log mass of completing from (t, s), excluding the emission at t.
    let mut beta = vec![ninf; t_len * s_len];
    beta[last + s_len - 1] = 0.0;
    if s_len > 1 {
        beta[last + s_len - 2] = 0.0;
    }
    for t in (0..t_len - 1).rev() {
        for s in 0..s_len {
            let next = (t + 1) * s_len;
            let mut b = beta[next + s] + lattice.log_prob(t + 1, ext[s]);
            if s + 1 < s_len {
                b = log_add(b, beta[next + s + 1] + lattice.log_prob(t + 1, ext[s + 1]));
            }
            if s + 2 < s_len && can_skip(s + 2) {
                b = log_add(b, beta[next + s + 2] + lattice.log_prob(t + 1, ext[s + 2]));
            }
            beta[t * s_len + s] = if b.is_nan() { ninf } else { b };
        }
    }

    if log_p == ninf {
        // Every alignment has zero probability under this lattice.
        return Ok(CtcOutput {
            loss: f64::INFINITY,
            grad,
            feasible: false,
        });
    }
    for t in 0..t_len {
        let mut occ = vec![ninf; symbols];
        for s in 0..s_len {
            let v = alpha[t * s_len + s] + beta[t * s_len + s];
            if v != ninf && !v.is_nan() {
                occ[ext[s]] = log_add(occ[ext[s]], v);
            }
        }
        let row = grad.row_mut(t);
        for (g, o) in row.iter_mut().zip(&occ) {
            *g = -(o - log_p).exp();
        }
    }
    Ok(CtcOutput {
        loss: -log_p,
        grad,
        feasible: true,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn uniform(t: usize, symbols: usize) -> LogProbLattice {
        LogProbLattice::from_probabilities(&vec![vec![1.0 / symbols as f64; symbols]; t]).unwrap()
    }

    #[test]
    fn two_frames_one_symbol() {
        // Alignments AA, A-, -A out of four: P = 0.75.
        let out = ctc_loss(&uniform(2, 2), &[1]).unwrap();
        assert!((out.loss - (-(0.75f64).ln())).abs() < 1e-12);
        assert!((out.loss - 0.28768).abs() < 1e-5);
    }

    #[test]
    fn single_frame() {
        let l = LogProbLattice::from_probabilities(&[vec![0.2, 0.5, 0.3]]).unwrap();
        let out = ctc_loss(&l, &[2]).unwrap();
        assert!((out.loss + 0.3f64.ln()).abs() < 1e-12);
    }

    #[test]
    fn empty_target_is_all_blank() {
        let l = LogProbLattice::from_probabilities(&[vec![0.6, 0.4], vec![0.9, 0.1]]).unwrap();
        let out = ctc_loss(&l, &[]).unwrap();
        assert!((out.loss + 0.6f64.ln() + 0.9f64.ln()).abs() < 1e-12);
    }

    #[test]
    fn infeasible_target() {
        let out = ctc_loss(&uniform(2, 2), &[1, 1]).unwrap();
        assert_eq!(minimum_frames(&[1, 1]), 3);
        assert!(!out.feasible && out.loss == f64::INFINITY);
        assert!(out.grad.data().iter().all(|&g| g == 0.0));
        assert!(ctc_loss(&uniform(3, 2), &[1, 1]).unwrap().feasible);
    }

    #[test]
    fn occupancy_rows_sum_to_minus_one() {
        let l = LogProbLattice::from_probabilities(&[
            vec![0.5, 0.3, 0.2],
            vec![0.1, 0.6, 0.3],
            vec![0.3, 0.3, 0.4],
        ])
        .unwrap();
        let out = ctc_loss(&l, &[1, 2]).unwrap();
        for t in 0..3 {
            assert!((out.grad.row(t).iter().sum::<f64>() + 1.0).abs() < 1e-12);
        }
    }

    #[test]
    fn blank_in_target_is_rejected() {
        assert!(ctc_loss(&uniform(3, 3), &[0]).is_err());
        assert!(ctc_loss(&uniform(3, 3), &[3]).is_err());
    }
}
