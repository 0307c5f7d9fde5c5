use super::{gemm, mismatch, Linear, PackedLayout, ParameterSet, Rng, Tensor, TensorError};

/// Sinusoidal encoding: `PE(t, 2i) = sin(t / 10000^(2i/d))`, `PE(t, 2i+1) = cos(..)`.
pub fn positional_encoding(t: usize, d_model: usize) -> Result<Tensor, TensorError> {
    if d_model % 2 != 0 {
        return Err(TensorError::OddDimension(d_model));
    }
    if t == 0 || d_model == 0 {
        return Err(mismatch("positional_encoding", format!("{t}x{d_model}")));
    }
    let mut pe = Tensor::zeros(&[t, d_model]);
    for pos in 0..t {
        let row = pe.row_mut(pos);
        for i in 0..d_model / 2 {
            let angle = pos as f64 / 10000f64.powf(2.0 * i as f64 / d_model as f64);
            row[2 * i] = angle.sin();
            row[2 * i + 1] = angle.cos();
        }
    }
    Ok(pe)
}

/// Full bidirectional multi-head self-attention over packed sequences.
/// Attention never crosses sequence boundaries.
#[derive(Debug, Clone)]
pub struct MultiHeadSelfAttention {
    pub q: Linear,
    pub k: Linear,
    pub v: Linear,
    pub o: Linear,
    pub d_model: usize,
    pub heads: usize,
}

pub struct AttentionCache {
    x: Tensor,
    q: Tensor,
    k: Tensor,
    v: Tensor,
    context: Tensor,
    /// Row-stochastic weights, indexed by sequence then head.
    weights: Vec<Vec<Vec<f64>>>,
    layout: PackedLayout,
}

impl AttentionCache {
    /// L×L attention matrix of one sequence and head, row-major.
    pub fn weights(&self, seq: usize, head: usize) -> &[f64] {
        &self.weights[seq][head]
    }
}

/// Copies columns `[c0, c0+w)` of rows `rows` into a contiguous buffer.
fn gather(t: &Tensor, rows: std::ops::Range<usize>, c0: usize, w: usize) -> Vec<f64> {
    let mut out = Vec::with_capacity(rows.len() * w);
    for r in rows {
        out.extend_from_slice(&t.row(r)[c0..c0 + w]);
    }
    out
}

fn scatter_add(t: &mut Tensor, rows: std::ops::Range<usize>, c0: usize, w: usize, src: &[f64]) {
    for (i, r) in rows.enumerate() {
        for (a, b) in t.row_mut(r)[c0..c0 + w].iter_mut().zip(&src[i * w..(i + 1) * w]) {
            *a += b;
        }
    }
}

impl MultiHeadSelfAttention {
    pub fn new(prefix: &str, d_model: usize, heads: usize) -> Result<Self, TensorError> {
        if heads == 0 || d_model % heads != 0 {
            return Err(TensorError::IndivisibleHeads { d_model, heads });
        }
        Ok(MultiHeadSelfAttention {
            q: Linear::new(&format!("{prefix}.q"), d_model, d_model),
            k: Linear::new(&format!("{prefix}.k"), d_model, d_model),
            v: Linear::new(&format!("{prefix}.v"), d_model, d_model),
            o: Linear::new(&format!("{prefix}.o"), d_model, d_model),
            d_model,
            heads,
        })
    }

    pub fn init(&self, params: &mut ParameterSet, rng: &mut Rng) {
        for l in [&self.q, &self.k, &self.v, &self.o] {
            l.init(params, rng);
        }
    }

    pub fn forward(
        &self,
        params: &ParameterSet,
        x: &Tensor,
        layout: &PackedLayout,
    ) -> Result<(Tensor, AttentionCache), TensorError> {
        layout.check(x, "attention")?;
        let q = self.q.forward(params, x)?;
        let k = self.k.forward(params, x)?;
        let v = self.v.forward(params, x)?;
        let dh = self.d_model / self.heads;
        let scale = 1.0 / (dh as f64).sqrt();
        let mut context = Tensor::zeros(&[layout.total(), self.d_model]);
        let mut weights = Vec::with_capacity(layout.num_sequences());
        for s in 0..layout.num_sequences() {
            let rows = layout.rows(s);
            let l = rows.len();
            let mut per_head = Vec::with_capacity(self.heads);
            for hd in 0..self.heads {
                let c0 = hd * dh;
                let qs = gather(&q, rows.clone(), c0, dh);
                let ks = gather(&k, rows.clone(), c0, dh);
                let vs = gather(&v, rows.clone(), c0, dh);
                let mut a = vec![0.0; l * l];
                gemm(l, dh, l, scale, &qs, false, &ks, true, 0.0, &mut a);
                for row in a.chunks_mut(l) {
                    let m = row.iter().copied().fold(f64::NEG_INFINITY, f64::max);
                    let mut sum = 0.0;
                    for e in row.iter_mut() {
                        *e = (*e - m).exp();
                        sum += *e;
                    }
                    for e in row.iter_mut() {
                        *e /= sum;
                    }
                }
                let mut ctx = vec![0.0; l * dh];
                gemm(l, l, dh, 1.0, &a, false, &vs, false, 0.0, &mut ctx);
                scatter_add(&mut context, rows.clone(), c0, dh, &ctx);
                per_head.push(a);
            }
            weights.push(per_head);
        }
        let y = self.o.forward(params, &context)?;
        let cache = AttentionCache {
            x: x.clone(),
            q,
            k,
            v,
            context,
            weights,
            layout: layout.clone(),
        };
        Ok((y, cache))
    }

    pub fn backward(
        &self,
        params: &mut ParameterSet,
        cache: &AttentionCache,
        dy: &Tensor,
    ) -> Result<Tensor, TensorError> {
        let dcontext = self.o.backward(params, &cache.context, dy)?;
        let layout = &cache.layout;
        let dh = self.d_model / self.heads;
        let scale = 1.0 / (dh as f64).sqrt();
        let shape = [layout.total(), self.d_model];
        let (mut dq, mut dk, mut dv) = (Tensor::zeros(&shape), Tensor::zeros(&shape), Tensor::zeros(&shape));
        for s in 0..layout.num_sequences() {
            let rows = layout.rows(s);
            let l = rows.len();
            for hd in 0..self.heads {
                let c0 = hd * dh;
                let a = &cache.weights[s][hd];
                let qs = gather(&cache.q, rows.clone(), c0, dh);
                let ks = gather(&cache.k, rows.clone(), c0, dh);
                let vs = gather(&cache.v, rows.clone(), c0, dh);
                let dctx = gather(&dcontext, rows.clone(), c0, dh);
                let mut da = vec![0.0; l * l];
                gemm(l, dh, l, 1.0, &dctx, false, &vs, true, 0.0, &mut da);
                let mut dvs = vec![0.0; l * dh];
                gemm(l, l, dh, 1.0, a, true, &dctx, false, 0.0, &mut dvs);
                // Softmax backward, then the score scale.
                for (drow, arow) in da.chunks_mut(l).zip(a.chunks(l)) {
                    let dot: f64 = drow.iter().zip(arow).map(|(x, y)| x * y).sum();
                    for (d, &p) in drow.iter_mut().zip(arow) {
                        *d = p * (*d - dot) * scale;
                    }
                }
                let mut dqs = vec![0.0; l * dh];
                gemm(l, l, dh, 1.0, &da, false, &ks, false, 0.0, &mut dqs);
                let mut dks = vec![0.0; l * dh];
                gemm(l, l, dh, 1.0, &da, true, &qs, false, 0.0, &mut dks);
                scatter_add(&mut dq, rows.clone(), c0, dh, &dqs);
                scatter_add(&mut dk, rows.clone(), c0, dh, &dks);
                scatter_add(&mut dv, rows.clone(), c0, dh, &dvs);
            }
        }
        let mut dx = self.q.backward(params, &cache.x, &dq)?;
        dx.add_assign(&self.k.backward(params, &cache.x, &dk)?)?;
        dx.add_assign(&self.v.backward(params, &cache.x, &dv)?)?;
        Ok(dx)
    }
}
