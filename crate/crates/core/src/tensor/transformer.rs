use super::{
    dropout, dropout_backward, relu, relu_backward, AttentionCache, DropoutMask, LayerNorm,
    LayerNormCache, Linear, Mode, MultiHeadSelfAttention, PackedLayout, ParameterSet, Rng, Tensor,
    TensorError,
};

/// Post-norm encoder block:
/// `x1 = LN(x + drop(MHSA(x)))`, `y = LN(x1 + drop(W2 relu(W1 x1)))`.
#[derive(Debug, Clone)]
pub struct TransformerBlock {
    pub attn: MultiHeadSelfAttention,
    pub ln1: LayerNorm,
    pub ff1: Linear,
    pub ff2: Linear,
    pub ln2: LayerNorm,
    pub dropout: f64,
}

pub struct TransformerBlockCache {
    attn: AttentionCache,
    drop1: DropoutMask,
    ln1: LayerNormCache,
    x1: Tensor,
    hidden_pre: Tensor,
    hidden: Tensor,
    drop2: DropoutMask,
    ln2: LayerNormCache,
}

impl TransformerBlock {
    pub fn new(
        prefix: &str,
        d_model: usize,
        heads: usize,
        ff_dim: usize,
        dropout: f64,
    ) -> Result<Self, TensorError> {
        Ok(TransformerBlock {
            attn: MultiHeadSelfAttention::new(&format!("{prefix}.attn"), d_model, heads)?,
            ln1: LayerNorm::new(&format!("{prefix}.ln1"), d_model),
            ff1: Linear::new(&format!("{prefix}.ff1"), d_model, ff_dim),
            ff2: Linear::new(&format!("{prefix}.ff2"), ff_dim, d_model),
            ln2: LayerNorm::new(&format!("{prefix}.ln2"), d_model),
            dropout,
        })
    }

    pub fn init(&self, params: &mut ParameterSet, rng: &mut Rng) {
        self.attn.init(params, rng);
        self.ln1.init(params);
        self.ff1.init(params, rng);
        self.ff2.init(params, rng);
        self.ln2.init(params);
    }

    pub fn forward(
        &self,
        params: &ParameterSet,
        x: &Tensor,
        layout: &PackedLayout,
        mode: Mode,
        rng: &mut Rng,
    ) -> Result<(Tensor, TransformerBlockCache), TensorError> {
        let (a, attn) = self.attn.forward(params, x, layout)?;
        let (mut a, drop1) = dropout(&a, self.dropout, rng, mode);
        a.add_assign(x)?;
        let (x1, ln1) = self.ln1.forward(params, &a)?;
        let hidden_pre = self.ff1.forward(params, &x1)?;
        let hidden = relu(&hidden_pre);
        let f = self.ff2.forward(params, &hidden)?;
        let (mut f, drop2) = dropout(&f, self.dropout, rng, mode);
        f.add_assign(&x1)?;
        let (y, ln2) = self.ln2.forward(params, &f)?;
        Ok((
            y,
            TransformerBlockCache {
                attn,
                drop1,
                ln1,
                x1,
                hidden_pre,
                hidden,
                drop2,
                ln2,
            },
        ))
    }

    pub fn backward(
        &self,
        params: &mut ParameterSet,
        cache: &TransformerBlockCache,
        dy: &Tensor,
    ) -> Result<Tensor, TensorError> {
        let ds2 = self.ln2.backward(params, &cache.ln2, dy)?;
        let df = dropout_backward(&cache.drop2, &ds2)?;
        let dhidden = self.ff2.backward(params, &cache.hidden, &df)?;
        let dpre = relu_backward(&cache.hidden_pre, &dhidden);
        let mut dx1 = self.ff1.backward(params, &cache.x1, &dpre)?;
        dx1.add_assign(&ds2)?;
        let ds1 = self.ln1.backward(params, &cache.ln1, &dx1)?;
        let da = dropout_backward(&cache.drop1, &ds1)?;
        let mut dx = self.attn.backward(params, &cache.attn, &da)?;
        dx.add_assign(&ds1)?;
        Ok(dx)
    }
}
