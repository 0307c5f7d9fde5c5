//! Finite-difference checks of every layer and both models at toy shapes.
//!
//! Each check builds a random instance from a seed, probes it with
//! `loss = Σ y ⊙ R` for a random `R`, and returns the worst relative error
//! over the inputs and all parameters.

use super::{check_parameters, check_parameters_skipping_kinks, numeric_gradient, probe_loss, relative_error, sample_indices};
use crate::loss::{cross_entropy, ctc_loss, LogProbLattice};
use crate::model::{BiLstmConfig, BiLstmModel, SequenceClassifier, TransformerCtcConfig, TransformerCtcModel};
use crate::tensor::{
    dropout, dropout_backward, linear, linear_backward, log_softmax_rows, log_softmax_rows_backward,
    lstm_cell, lstm_cell_backward, max_pool_packed, max_pool_time_backward, BatchNorm1d, LayerNorm,
    Mode, MultiHeadSelfAttention, PackedLayout, ParameterSet, Rng, StackedBiLstm, Tensor,
    TransformerBlock,
};

/// Entries sampled per tensor.
const SAMPLES: usize = 24;

/// A named gradient check; `run(seed)` returns the worst relative error.
pub struct LayerCheck {
    pub name: &'static str,
    pub run: fn(u64) -> f64,
}

pub fn layer_checks() -> Vec<LayerCheck> {
    vec![
        LayerCheck { name: "linear", run: check_linear },
        LayerCheck { name: "batchnorm1d", run: check_batchnorm },
        LayerCheck { name: "dropout (fixed mask)", run: check_dropout },
        LayerCheck { name: "lstm cell", run: check_lstm_cell },
        LayerCheck { name: "bilstm T=5", run: check_bilstm },
        LayerCheck { name: "max pool", run: check_max_pool },
        LayerCheck { name: "layernorm", run: check_layernorm },
        LayerCheck { name: "log-softmax", run: check_log_softmax },
        LayerCheck { name: "multi-head self-attention", run: check_attention },
        LayerCheck { name: "transformer block", run: check_transformer_block },
        LayerCheck { name: "cross-entropy", run: check_cross_entropy },
        LayerCheck { name: "ctc loss", run: check_ctc },
        LayerCheck { name: "bilstm model", run: check_bilstm_model },
        LayerCheck { name: "transformer-ctc model", run: check_transformer_model },
    ]
}

fn rand(shape: &[usize], rng: &mut Rng) -> Tensor {
    Tensor::uniform(shape, -1.0, 1.0, rng)
}

/// Worst error over `inputs` (with analytic gradients) and all parameters of `params`.
fn worst_error(
    params: &ParameterSet,
    inputs: &[Tensor],
    input_grads: &[Tensor],
    rng: &mut Rng,
    loss: impl Fn(&ParameterSet, &[Tensor]) -> f64,
) -> f64 {
    let mut worst: f64 = 0.0;
    for (_, e) in check_parameters(params, SAMPLES, rng, |p| loss(p, inputs)) {
        worst = worst.max(e);
    }
    for (i, g) in input_grads.iter().enumerate() {
        let idx = sample_indices(g.len(), SAMPLES, rng);
        let mut work = inputs.to_vec();
        let mut x = work[i].clone();
        let numeric = numeric_gradient(&mut x, &idx, |xi| {
            work[i] = xi.clone();
            loss(params, &work)
        });
        let analytic: Vec<f64> = idx.iter().map(|&j| g.data()[j]).collect();
        worst = worst.max(relative_error(&analytic, &numeric));
    }
    worst
}

fn check_linear(seed: u64) -> f64 {
    let mut rng = Rng::new(seed);
    let x = rand(&[4, 3], &mut rng);
    let mut p = ParameterSet::new();
    p.insert("w", rand(&[5, 3], &mut rng));
    p.insert("b", rand(&[5], &mut rng));
    let r = rand(&[4, 5], &mut rng);
    let g = linear_backward(&x, p.value("w"), &r).unwrap();
    *p.grad_mut("w") = g.dw;
    *p.grad_mut("b") = g.db;
    worst_error(&p, &[x], &[g.dx], &mut rng, |p, xs| {
        probe_loss(&linear(&xs[0], p.value("w"), p.value("b")).unwrap(), &r)
    })
}

fn check_batchnorm(seed: u64) -> f64 {
    let mut rng = Rng::new(seed);
    let layer = BatchNorm1d::new("bn", 4);
    let mut p = ParameterSet::new();
    layer.init(&mut p);
    *p.value_mut("bn.gamma") = Tensor::uniform(&[4], 0.5, 1.5, &mut rng);
    *p.value_mut("bn.beta") = rand(&[4], &mut rng);
    let x = Tensor::uniform(&[6, 4], -2.0, 2.0, &mut rng);
    let r = rand(&[6, 4], &mut rng);
    let (_, cache) = layer.forward(&p, &x, Mode::Train).unwrap();
    let dx = layer.backward(&mut p, &cache, &r).unwrap();
    worst_error(&p, &[x], &[dx], &mut rng, |p, xs| {
        probe_loss(&layer.forward(p, &xs[0], Mode::Train).unwrap().0, &r)
    })
}

fn check_dropout(seed: u64) -> f64 {
    let mut rng = Rng::new(seed);
    let x = rand(&[5, 4], &mut rng);
    let r = rand(&[5, 4], &mut rng);
    let mask_seed = rng.next_u64();
    let (_, mask) = dropout(&x, 0.2, &mut Rng::new(mask_seed), Mode::Train);
    let dx = dropout_backward(&mask, &r).unwrap();
    worst_error(&ParameterSet::new(), &[x], &[dx], &mut rng, |_, xs| {
        probe_loss(&dropout(&xs[0], 0.2, &mut Rng::new(mask_seed), Mode::Train).0, &r)
    })
}

fn check_lstm_cell(seed: u64) -> f64 {
    let mut rng = Rng::new(seed);
    let (n, input, hidden) = (3, 3, 4);
    let mut p = ParameterSet::new();
    p.insert("w_ih", rand(&[4 * hidden, input], &mut rng));
    p.insert("w_hh", rand(&[4 * hidden, hidden], &mut rng));
    p.insert("b", rand(&[4 * hidden], &mut rng));
    let x = rand(&[n, input], &mut rng);
    let h = rand(&[n, hidden], &mut rng);
    let c = rand(&[n, hidden], &mut rng);
    let rh = rand(&[n, hidden], &mut rng);
    let rc = rand(&[n, hidden], &mut rng);
    let (_, _, cache) = lstm_cell(&x, &h, &c, p.value("w_ih"), p.value("w_hh"), p.value("b")).unwrap();
    let g = lstm_cell_backward(&cache, p.value("w_ih"), p.value("w_hh"), &rh, &rc).unwrap();
    *p.grad_mut("w_ih") = g.dw_ih;
    *p.grad_mut("w_hh") = g.dw_hh;
    *p.grad_mut("b") = g.db;
    worst_error(&p, &[x, h, c], &[g.dx, g.dh, g.dc], &mut rng, |p, xs| {
        let (h2, c2, _) =
            lstm_cell(&xs[0], &xs[1], &xs[2], p.value("w_ih"), p.value("w_hh"), p.value("b")).unwrap();
        probe_loss(&h2, &rh) + probe_loss(&c2, &rc)
    })
}

fn check_bilstm(seed: u64) -> f64 {
    let mut rng = Rng::new(seed);
    let net = StackedBiLstm::new("bilstm", 3, 4, 2);
    let mut p = ParameterSet::new();
    net.init(&mut p, &mut rng);
    let layout = PackedLayout::new(vec![5, 3]).unwrap();
    let x = rand(&[8, 3], &mut rng);
    let r = rand(&[8, 8], &mut rng);
    let (_, cache) = net.forward(&p, &x, &layout).unwrap();
    let dx = net.backward(&mut p, &cache, &r).unwrap();
    worst_error(&p, &[x], &[dx], &mut rng, |p, xs| {
        probe_loss(&net.forward(p, &xs[0], &layout).unwrap().0, &r)
    })
}

fn check_max_pool(seed: u64) -> f64 {
    let mut rng = Rng::new(seed);
    let layout = PackedLayout::new(vec![3, 2]).unwrap();
    let x = rand(&[5, 4], &mut rng);
    let r = rand(&[2, 4], &mut rng);
    let (_, cache) = max_pool_packed(&x, &layout).unwrap();
    let dx = max_pool_time_backward(&cache, &r).unwrap();
    worst_error(&ParameterSet::new(), &[x], &[dx], &mut rng, |_, xs| {
        probe_loss(&max_pool_packed(&xs[0], &layout).unwrap().0, &r)
    })
}

fn check_layernorm(seed: u64) -> f64 {
    let mut rng = Rng::new(seed);
    let layer = LayerNorm::new("ln", 6);
    let mut p = ParameterSet::new();
    layer.init(&mut p);
    *p.value_mut("ln.gamma") = Tensor::uniform(&[6], 0.5, 1.5, &mut rng);
    *p.value_mut("ln.beta") = rand(&[6], &mut rng);
    let x = Tensor::uniform(&[4, 6], -2.0, 2.0, &mut rng);
    let r = rand(&[4, 6], &mut rng);
    let (_, cache) = layer.forward(&p, &x).unwrap();
    let dx = layer.backward(&mut p, &cache, &r).unwrap();
    worst_error(&p, &[x], &[dx], &mut rng, |p, xs| probe_loss(&layer.forward(p, &xs[0]).unwrap().0, &r))
}

fn check_log_softmax(seed: u64) -> f64 {
    let mut rng = Rng::new(seed);
    let x = Tensor::uniform(&[3, 5], -3.0, 3.0, &mut rng);
    let r = rand(&[3, 5], &mut rng);
    let dx = log_softmax_rows_backward(&log_softmax_rows(&x), &r);
    worst_error(&ParameterSet::new(), &[x], &[dx], &mut rng, |_, xs| {
        probe_loss(&log_softmax_rows(&xs[0]), &r)
    })
}

fn check_attention(seed: u64) -> f64 {
    let mut rng = Rng::new(seed);
    let mha = MultiHeadSelfAttention::new("attn", 8, 2).unwrap();
    let mut p = ParameterSet::new();
    mha.init(&mut p, &mut rng);
    let layout = PackedLayout::new(vec![4, 3]).unwrap();
    let x = rand(&[7, 8], &mut rng);
    let r = rand(&[7, 8], &mut rng);
    let (_, cache) = mha.forward(&p, &x, &layout).unwrap();
    let dx = mha.backward(&mut p, &cache, &r).unwrap();
    worst_error(&p, &[x], &[dx], &mut rng, |p, xs| {
        probe_loss(&mha.forward(p, &xs[0], &layout).unwrap().0, &r)
    })
}

fn check_transformer_block(seed: u64) -> f64 {
    let mut rng = Rng::new(seed);
    let block = TransformerBlock::new("block", 8, 2, 16, 0.1).unwrap();
    let mut p = ParameterSet::new();
    block.init(&mut p, &mut rng);
    let layout = PackedLayout::single(3).unwrap();
    let x = rand(&[3, 8], &mut rng);
    let r = rand(&[3, 8], &mut rng);
    let drop_seed = rng.next_u64();
    let (_, cache) = block.forward(&p, &x, &layout, Mode::Train, &mut Rng::new(drop_seed)).unwrap();
    let dx = block.backward(&mut p, &cache, &r).unwrap();
    worst_error(&p, &[x], &[dx], &mut rng, |p, xs| {
        let (y, _) = block.forward(p, &xs[0], &layout, Mode::Train, &mut Rng::new(drop_seed)).unwrap();
        probe_loss(&y, &r)
    })
}

fn check_cross_entropy(seed: u64) -> f64 {
    let mut rng = Rng::new(seed);
    let x = Tensor::uniform(&[4, 5], -3.0, 3.0, &mut rng);
    let labels: Vec<usize> = (0..4).map(|_| rng.below(5)).collect();
    let (_, dx) = cross_entropy(&x, &labels).unwrap();
    worst_error(&ParameterSet::new(), &[x], &[dx], &mut rng, |_, xs| {
        cross_entropy(&xs[0], &labels).unwrap().0
    })
}

fn check_ctc(seed: u64) -> f64 {
    let mut rng = Rng::new(seed);
    let t = 1 + rng.below(6);
    let classes = 1 + rng.below(4);
    let len = rng.below(3);
    let target: Vec<usize> = (0..len).map(|_| 1 + rng.below(classes)).collect();
    let logits = Tensor::uniform(&[t, classes + 1], -2.0, 2.0, &mut rng);
    let loss_of = |l: &Tensor| {
        let lat = LogProbLattice::from_logits(l).unwrap();
        ctc_loss(&lat, &target).unwrap()
    };
    let out = loss_of(&logits);
    if !out.feasible {
        return 0.0;
    }
    let lp = log_softmax_rows(&logits);
    let dx = log_softmax_rows_backward(&lp, &out.grad);
    worst_error(&ParameterSet::new(), &[logits], &[dx], &mut rng, |_, xs| loss_of(&xs[0]).loss)
}

fn check_bilstm_model(seed: u64) -> f64 {
    let mut rng = Rng::new(seed);
    let cfg = BiLstmConfig {
        projection_dim: 8,
        lstm_hidden: 4,
        ..BiLstmConfig::standard(6, 3)
    };
    let mut model = BiLstmModel::new(cfg, &mut rng).unwrap();
    let xs = [rand(&[4, 6], &mut rng), rand(&[5, 6], &mut rng), rand(&[3, 6], &mut rng)];
    let labels = [0, 2, 1];
    let drop_seed = rng.next_u64();
    let refs: Vec<&Tensor> = xs.iter().collect();
    model.params_mut().zero_grads();
    model.train_batch(&refs, &labels, &mut Rng::new(drop_seed)).unwrap();
    let params = model.params().clone();
    check_parameters_skipping_kinks(&params, SAMPLES, &mut rng, |p| {
        model.batch_loss(p, &refs, &labels, Mode::Train, &mut Rng::new(drop_seed)).unwrap()
    })
    .into_iter()
    .map(|(_, e)| e)
    .fold(0.0, f64::max)
}

fn check_transformer_model(seed: u64) -> f64 {
    let mut rng = Rng::new(seed);
    let cfg = TransformerCtcConfig {
        d_model: 8,
        heads: 2,
        blocks: 2,
        ff_dim: 16,
        ..TransformerCtcConfig::standard(6, 3)
    };
    let mut model = TransformerCtcModel::new(cfg, &mut rng).unwrap();
    let xs = [rand(&[4, 6], &mut rng), rand(&[3, 6], &mut rng)];
    let labels = [2, 0];
    let drop_seed = rng.next_u64();
    let refs: Vec<&Tensor> = xs.iter().collect();
    model.params_mut().zero_grads();
    model.train_batch(&refs, &labels, &mut Rng::new(drop_seed)).unwrap();
    let params = model.params().clone();
    check_parameters(&params, SAMPLES, &mut rng, |p| {
        model.batch_loss(p, &refs, &labels, Mode::Train, &mut Rng::new(drop_seed)).unwrap()
    })
    .into_iter()
    .map(|(_, e)| e)
    .fold(0.0, f64::max)
}
