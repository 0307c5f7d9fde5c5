use super::{
    check_labels, pack, BatchOutput, Decision, Inference, ModelConfig, ModelError,
    SequenceClassifier,
};
use crate::loss::cross_entropy;
use crate::tensor::{
    dropout, dropout_backward, max_pool_packed, max_pool_time_backward, BatchNorm1d,
    BatchNormCache, DropoutMask, Linear, MaxPoolCache, Mode, PackedLayout, ParameterSet, Rng,
    StackedBiLstm, StackedBiLstmCache, Tensor,
};
use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BiLstmConfig {
    pub input_dim: usize,
    pub projection_dim: usize,
    pub lstm_hidden: usize,
    pub lstm_layers: usize,
    pub dropout: f64,
    pub classes: usize,
}

impl BiLstmConfig {
    /// 512-wide projection, two bidirectional layers of 256, 20% input dropout.
    pub fn standard(input_dim: usize, classes: usize) -> Self {
        BiLstmConfig {
            input_dim,
            projection_dim: 512,
            lstm_hidden: 256,
            lstm_layers: 2,
            dropout: 0.2,
            classes,
        }
    }

    pub fn validate(&self) -> Result<(), ModelError> {
        let dims = [
            self.input_dim,
            self.projection_dim,
            self.lstm_hidden,
            self.lstm_layers,
            self.classes,
        ];
        if dims.contains(&0) {
            return Err(ModelError::InvalidConfig(format!("{self:?}: sizes must be positive")));
        }
        if !(0.0..1.0).contains(&self.dropout) {
            return Err(ModelError::InvalidConfig(format!("dropout {} outside [0, 1)", self.dropout)));
        }
        Ok(())
    }
}

/// dropout → batch norm → linear projection → stacked BiLSTM → max over
/// time → linear head, trained with cross-entropy.
#[derive(Debug, Clone)]
pub struct BiLstmModel {
    config: BiLstmConfig,
    norm: BatchNorm1d,
    proj: Linear,
    lstm: StackedBiLstm,
    head: Linear,
    params: ParameterSet,
}

pub struct BiLstmCache {
    mask: DropoutMask,
    norm: BatchNormCache,
    normed: Tensor,
    lstm: StackedBiLstmCache,
    pool: MaxPoolCache,
    pooled: Tensor,
}

impl BiLstmModel {
    pub fn new(config: BiLstmConfig, rng: &mut Rng) -> Result<Self, ModelError> {
        config.validate()?;
        let norm = BatchNorm1d::new("input_norm", config.input_dim);
        let proj = Linear::new("proj", config.input_dim, config.projection_dim);
        let lstm = StackedBiLstm::new("bilstm", config.projection_dim, config.lstm_hidden, config.lstm_layers);
        let head = Linear::new("head", lstm.output_dim(), config.classes);
        let mut params = ParameterSet::new();
        norm.init(&mut params);
        proj.init(&mut params, rng);
        lstm.init(&mut params, rng);
        head.init(&mut params, rng);
        Ok(BiLstmModel {
            config,
            norm,
            proj,
            lstm,
            head,
            params,
        })
    }

    pub fn bilstm_config(&self) -> &BiLstmConfig {
        &self.config
    }

    /// Logits (B×C) for packed inputs under explicit parameters.
    pub fn forward(
        &self,
        params: &ParameterSet,
        x: &Tensor,
        layout: &PackedLayout,
        mode: Mode,
        rng: &mut Rng,
    ) -> Result<(Tensor, BiLstmCache), ModelError> {
        let (x_drop, mask) = dropout(x, self.config.dropout, rng, mode);
        let (normed, norm) = self.norm.forward(params, &x_drop, mode)?;
        let projected = self.proj.forward(params, &normed)?;
        let (seq, lstm) = self.lstm.forward(params, &projected, layout)?;
        let (pooled, pool) = max_pool_packed(&seq, layout)?;
        let logits = self.head.forward(params, &pooled)?;
        Ok((
            logits,
            BiLstmCache {
                mask,
                norm,
                normed,
                lstm,
                pool,
                pooled,
            },
        ))
    }

    /// Accumulates parameter gradients for `dlogits`; returns the input gradient.
    pub fn backward(
        &self,
        params: &mut ParameterSet,
        cache: &BiLstmCache,
        dlogits: &Tensor,
    ) -> Result<Tensor, ModelError> {
        let dpooled = self.head.backward(params, &cache.pooled, dlogits)?;
        let dseq = max_pool_time_backward(&cache.pool, &dpooled)?;
        let dproj = self.lstm.backward(params, &cache.lstm, &dseq)?;
        let dnormed = self.proj.backward(params, &cache.normed, &dproj)?;
        let dx_drop = self.norm.backward(params, &cache.norm, &dnormed)?;
        Ok(dropout_backward(&cache.mask, &dx_drop)?)
    }

    /// Mean cross-entropy of a batch under `params`, without gradients.
    pub fn batch_loss(
        &self,
        params: &ParameterSet,
        inputs: &[&Tensor],
        labels: &[usize],
        mode: Mode,
        rng: &mut Rng,
    ) -> Result<f64, ModelError> {
        let (x, layout) = pack(inputs)?;
        let (logits, _) = self.forward(params, &x, &layout, mode, rng)?;
        Ok(cross_entropy(&logits, labels)?.0)
    }
}

fn argmax(row: &[f64]) -> usize {
    row.iter()
        .enumerate()
        .fold(0, |b, (i, &v)| if v > row[b] { i } else { b })
}

impl SequenceClassifier for BiLstmModel {
    fn config(&self) -> ModelConfig {
        ModelConfig::Bilstm(self.config.clone())
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
        let (logits, cache) = self.forward(&self.params, &x, &layout, Mode::Train, rng)?;
        let (loss, dlogits) = cross_entropy(&logits, labels)?;
        let mut params = std::mem::take(&mut self.params);
        self.norm.update_running_stats(&mut params, &cache.norm);
        let result = self.backward(&mut params, &cache, &dlogits);
        self.params = params;
        result?;
        let decisions = (0..logits.rows())
            .map(|r| Decision::class(argmax(logits.row(r))))
            .collect();
        Ok(BatchOutput { loss, decisions })
    }

    fn infer(&self, input: &Tensor, label: usize) -> Result<Inference, ModelError> {
        check_labels(&[label], self.config.classes)?;
        let layout = PackedLayout::single(input.rows())?;
        // Eval mode draws nothing from the generator.
        let (logits, _) = self.forward(&self.params, input, &layout, Mode::Eval, &mut Rng::new(0))?;
        let (loss, _) = cross_entropy(&logits, &[label])?;
        Ok(Inference {
            decision: Decision::class(argmax(logits.row(0))),
            loss,
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn parameter_count_matches_layer_arithmetic() {
        let m = BiLstmModel::new(BiLstmConfig::standard(294, 10), &mut Rng::new(0)).unwrap();
        let bn = 2 * 294;
        let proj = 294 * 512 + 512;
        let per_direction = 4 * 256 * 512 + 4 * 256 * 256 + 4 * 256;
        let lstm = 2 * 2 * per_direction;
        let head = 512 * 10 + 10;
        assert_eq!(m.params().num_scalars(), bn + proj + lstm + head);
        assert_eq!(m.params().num_scalars(), 3_306_582);
    }

    #[test]
    fn same_seed_same_parameters() {
        let cfg = BiLstmConfig {
            projection_dim: 8,
            lstm_hidden: 4,
            ..BiLstmConfig::standard(6, 3)
        };
        let a = BiLstmModel::new(cfg.clone(), &mut Rng::new(3)).unwrap();
        let b = BiLstmModel::new(cfg, &mut Rng::new(3)).unwrap();
        assert_eq!(a.params(), b.params());
    }

    #[test]
    fn infer_yields_a_class() {
        let cfg = BiLstmConfig {
            projection_dim: 8,
            lstm_hidden: 4,
            ..BiLstmConfig::standard(6, 3)
        };
        let m = BiLstmModel::new(cfg, &mut Rng::new(3)).unwrap();
        let x = Tensor::uniform(&[5, 6], -1.0, 1.0, &mut Rng::new(1));
        let inf = m.infer(&x, 2).unwrap();
        assert!(inf.decision.class.unwrap() < 3);
        assert!(inf.loss.is_finite());
    }
}
