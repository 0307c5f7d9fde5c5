use super::{
    check_labels, pack, BatchOutput, Decision, Inference, ModelConfig, ModelError,
    SequenceClassifier,
};
use crate::loss::{ctc_beam_search, ctc_loss, isolated_prediction, LogProbLattice, DEFAULT_BEAM_WIDTH};
use crate::tensor::{
    log_softmax_rows, log_softmax_rows_backward, positional_encoding, Linear, Mode, PackedLayout,
    ParameterSet, Rng, Tensor, TensorError, TransformerBlock, TransformerBlockCache,
};
use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TransformerCtcConfig {
    pub input_dim: usize,
    pub d_model: usize,
    pub heads: usize,
    pub blocks: usize,
    pub ff_dim: usize,
    pub dropout: f64,
    /// Number of sign classes; the lattice has one more column for the blank.
    pub classes: usize,
    pub beam_width: usize,
}

impl TransformerCtcConfig {
    /// d_model 128, 8 heads, 2 blocks, feed-forward 256, dropout 0.1, beam 5.
    pub fn standard(input_dim: usize, classes: usize) -> Self {
        TransformerCtcConfig {
            input_dim,
            d_model: 128,
            heads: 8,
            blocks: 2,
            ff_dim: 256,
            dropout: 0.1,
            classes,
            beam_width: DEFAULT_BEAM_WIDTH,
        }
    }

    pub fn validate(&self) -> Result<(), ModelError> {
        let dims = [self.input_dim, self.d_model, self.heads, self.ff_dim, self.classes, self.beam_width];
        if dims.contains(&0) {
            return Err(ModelError::InvalidConfig(format!("{self:?}: sizes must be positive")));
        }
        if self.d_model % self.heads != 0 {
            return Err(TensorError::IndivisibleHeads {
                d_model: self.d_model,
                heads: self.heads,
            }
            .into());
        }
        if self.d_model % 2 != 0 {
            return Err(TensorError::OddDimension(self.d_model).into());
        }
        if !(0.0..1.0).contains(&self.dropout) {
            return Err(ModelError::InvalidConfig(format!("dropout {} outside [0, 1)", self.dropout)));
        }
        Ok(())
    }
}

/// linear → + sinusoidal positions → encoder blocks → linear → per-frame
/// log-softmax over blank + classes, trained with CTC and decoded by beam
/// search. Class `k` is CTC symbol `k + 1`.
#[derive(Debug, Clone)]
pub struct TransformerCtcModel {
    config: TransformerCtcConfig,
    input: Linear,
    blocks: Vec<TransformerBlock>,
    output: Linear,
    params: ParameterSet,
}

pub struct TransformerCtcCache {
    x: Tensor,
    blocks: Vec<TransformerBlockCache>,
    hidden: Tensor,
    log_probs: Tensor,
}

impl TransformerCtcCache {
    /// Per-frame log-probabilities, packed.
    pub fn log_probs(&self) -> &Tensor {
        &self.log_probs
    }
}

fn lattice_of(log_probs: &Tensor, layout: &PackedLayout, seq: usize) -> Result<LogProbLattice, ModelError> {
    let rows = layout.rows(seq);
    let c = log_probs.cols();
    let data = log_probs.data()[rows.start * c..rows.end * c].to_vec();
    Ok(LogProbLattice::new(Tensor::from_vec(&[rows.len(), c], data)?)?)
}

impl TransformerCtcModel {
    pub fn new(config: TransformerCtcConfig, rng: &mut Rng) -> Result<Self, ModelError> {
        config.validate()?;
        let input = Linear::new("input", config.input_dim, config.d_model);
        let blocks = (0..config.blocks)
            .map(|b| {
                TransformerBlock::new(&format!("blocks.{b}"), config.d_model, config.heads, config.ff_dim, config.dropout)
            })
            .collect::<Result<Vec<_>, _>>()?;
        let output = Linear::new("output", config.d_model, config.classes + 1);
        let mut params = ParameterSet::new();
        input.init(&mut params, rng);
        for b in &blocks {
            b.init(&mut params, rng);
        }
        output.init(&mut params, rng);
        Ok(TransformerCtcModel {
            config,
            input,
            blocks,
            output,
            params,
        })
    }

    pub fn transformer_config(&self) -> &TransformerCtcConfig {
        &self.config
    }

    /// Packed per-frame log-probabilities under explicit parameters.
    pub fn forward(
        &self,
        params: &ParameterSet,
        x: &Tensor,
        layout: &PackedLayout,
        mode: Mode,
        rng: &mut Rng,
    ) -> Result<TransformerCtcCache, ModelError> {
        let mut h = self.input.forward(params, x)?;
        let pe = positional_encoding(layout.max_len(), self.config.d_model)?;
        for s in 0..layout.num_sequences() {
            for (t, r) in layout.rows(s).enumerate() {
                for (a, b) in h.row_mut(r).iter_mut().zip(pe.row(t)) {
                    *a += b;
                }
            }
        }
        let mut caches = Vec::with_capacity(self.blocks.len());
        for b in &self.blocks {
            let (y, c) = b.forward(params, &h, layout, mode, rng)?;
            caches.push(c);
            h = y;
        }
        let logits = self.output.forward(params, &h)?;
        Ok(TransformerCtcCache {
            x: x.clone(),
            blocks: caches,
            hidden: h,
            log_probs: log_softmax_rows(&logits),
        })
    }

    /// Accumulates gradients for `dlog_probs`; returns the input gradient.
    pub fn backward(
        &self,
        params: &mut ParameterSet,
        cache: &TransformerCtcCache,
        dlog_probs: &Tensor,
    ) -> Result<Tensor, ModelError> {
        let dlogits = log_softmax_rows_backward(&cache.log_probs, dlog_probs);
        let mut dh = self.output.backward(params, &cache.hidden, &dlogits)?;
        for (b, c) in self.blocks.iter().zip(&cache.blocks).rev() {
            dh = b.backward(params, c, &dh)?;
        }
        // Positional encodings are constants; the gradient passes unchanged.
        Ok(self.input.backward(params, &cache.x, &dh)?)
    }

    /// Mean CTC loss of the batch and the gradient w.r.t. packed log-probs.
    fn ctc_batch(
        &self,
        log_probs: &Tensor,
        layout: &PackedLayout,
        labels: &[usize],
    ) -> Result<(f64, Tensor), ModelError> {
        let b = layout.num_sequences() as f64;
        let mut grad = Tensor::zeros(log_probs.shape());
        let mut total = 0.0;
        for (s, &label) in labels.iter().enumerate() {
            let out = ctc_loss(&lattice_of(log_probs, layout, s)?, &[label + 1])?;
            total += out.loss;
            let c = log_probs.cols();
            for (t, r) in layout.rows(s).enumerate() {
                for (g, v) in grad.row_mut(r).iter_mut().zip(&out.grad.data()[t * c..(t + 1) * c]) {
                    *g = v / b;
                }
            }
        }
        Ok((total / b, grad))
    }

    /// Mean CTC loss of a batch under `params`, without gradients.
    pub fn batch_loss(
        &self,
        params: &ParameterSet,
        inputs: &[&Tensor],
        labels: &[usize],
        mode: Mode,
        rng: &mut Rng,
    ) -> Result<f64, ModelError> {
        let (x, layout) = pack(inputs)?;
        let cache = self.forward(params, &x, &layout, mode, rng)?;
        Ok(self.ctc_batch(&cache.log_probs, &layout, labels)?.0)
    }

    /// Beam-search decision for one sequence's lattice.
    pub fn decide(&self, lattice: &LogProbLattice) -> Decision {
        let decoded = ctc_beam_search(lattice, self.config.beam_width);
        let p = isolated_prediction(&decoded);
        Decision {
            class: p.symbol.map(|s| s - 1),
            multi_symbol: p.multi_symbol,
        }
    }
}

impl SequenceClassifier for TransformerCtcModel {
    fn config(&self) -> ModelConfig {
        ModelConfig::TransformerCtc(self.config.clone())
    }

    fn params(&self) -> &ParameterSet {
        &self.params
    }

    fn params_mut(&mut self) -> &mut ParameterSet {
        &mut self.params
    }

    fn train_batch(
        &mut self,
        inputs: &[&Tensor],
        labels: &[usize],
        rng: &mut Rng,
    ) -> Result<BatchOutput, ModelError> {
        check_labels(labels, self.config.classes)?;
        let (x, layout) = pack(inputs)?;
        let cache = self.forward(&self.params, &x, &layout, Mode::Train, rng)?;
        let (loss, dlp) = self.ctc_batch(&cache.log_probs, &layout, labels)?;
        let mut params = std::mem::take(&mut self.params);
        let result = self.backward(&mut params, &cache, &dlp);
        self.params = params;
        result?;
        let decisions = (0..layout.num_sequences())
            .map(|s| Ok(self.decide(&lattice_of(&cache.log_probs, &layout, s)?)))
            .collect::<Result<Vec<_>, ModelError>>()?;
        Ok(BatchOutput { loss, decisions })
    }

    fn infer(&self, input: &Tensor, label: usize) -> Result<Inference, ModelError> {
        check_labels(&[label], self.config.classes)?;
        let layout = PackedLayout::single(input.rows())?;
        let cache = self.forward(&self.params, input, &layout, Mode::Eval, &mut Rng::new(0))?;
        let lattice = lattice_of(&cache.log_probs, &layout, 0)?;
        let loss = ctc_loss(&lattice, &[label + 1])?.loss;
        Ok(Inference {
            decision: self.decide(&lattice),
            loss,
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn small(blocks: usize) -> TransformerCtcConfig {
        TransformerCtcConfig {
            d_model: 8,
            heads: 2,
            blocks,
            ff_dim: 16,
            ..TransformerCtcConfig::standard(6, 4)
        }
    }

    #[test]
    fn lattice_has_blank_column() {
        let m = TransformerCtcModel::new(small(1), &mut Rng::new(0)).unwrap();
        let x = Tensor::uniform(&[7, 6], -1.0, 1.0, &mut Rng::new(1));
        let c = m.forward(m.params(), &x, &PackedLayout::single(7).unwrap(), Mode::Eval, &mut Rng::new(0)).unwrap();
        assert_eq!(c.log_probs().shape(), &[7, 5]);
    }

    #[test]
    fn zero_blocks_is_framewise_linear() {
        let m = TransformerCtcModel::new(small(0), &mut Rng::new(0)).unwrap();
        assert_eq!(m.params().paths().collect::<Vec<_>>(), vec!["input.b", "input.w", "output.b", "output.w"]);
    }

    #[test]
    fn invalid_heads_rejected() {
        let cfg = TransformerCtcConfig { heads: 3, ..small(1) };
        assert!(TransformerCtcModel::new(cfg, &mut Rng::new(0)).is_err());
    }
}
