//! LSTM layers with gate order (i, f, g, o) and a single bias vector.

use super::activation::sigmoid;
use super::{gemm, mismatch, PackedLayout, ParameterSet, Rng, Tensor, TensorError};

/// Turns one row of pre-activations `[i f g o]` into activations in place and
/// writes the new cell and hidden state.
fn gates_forward(gates: &mut [f64], c_prev: &[f64], c_out: &mut [f64], h_out: &mut [f64]) {
    let h = c_prev.len();
    for j in 0..h {
        let i = sigmoid(gates[j]);
        let f = sigmoid(gates[h + j]);
        let g = gates[2 * h + j].tanh();
        let o = sigmoid(gates[3 * h + j]);
        gates[j] = i;
        gates[h + j] = f;
        gates[2 * h + j] = g;
        gates[3 * h + j] = o;
        let c = f * c_prev[j] + i * g;
        c_out[j] = c;
        h_out[j] = o * c.tanh();
    }
}

/// Backward through one row of gate activations. Writes pre-activation
/// gradients into `dgates` and the cell gradient flowing to `c_prev`.
fn gates_backward(
    gates: &[f64],
    c: &[f64],
    c_prev: &[f64],
    dh: &[f64],
    dc_in: &[f64],
    dgates: &mut [f64],
    dc_prev: &mut [f64],
) {
    let h = c.len();
    for j in 0..h {
        let (i, f, g, o) = (gates[j], gates[h + j], gates[2 * h + j], gates[3 * h + j]);
        let tc = c[j].tanh();
        let dc = dc_in[j] + dh[j] * o * (1.0 - tc * tc);
        dgates[j] = dc * g * i * (1.0 - i);
        dgates[h + j] = dc * c_prev[j] * f * (1.0 - f);
        dgates[2 * h + j] = dc * i * (1.0 - g * g);
        dgates[3 * h + j] = dh[j] * tc * o * (1.0 - o);
        dc_prev[j] = dc * f;
    }
}

fn check_weights(
    op: &'static str,
    input: usize,
    hidden: usize,
    w_ih: &Tensor,
    w_hh: &Tensor,
    b: &Tensor,
) -> Result<(), TensorError> {
    if w_ih.shape() != [4 * hidden, input] || w_hh.shape() != [4 * hidden, hidden] || b.shape() != [4 * hidden] {
        return Err(mismatch(
            op,
            format!(
                "input {input}, hidden {hidden}: w_ih {:?}, w_hh {:?}, b {:?}",
                w_ih.shape(),
                w_hh.shape(),
                b.shape()
            ),
        ));
    }
    Ok(())
}

/// Everything a single cell step needs for its backward pass.
pub struct LstmCellCache {
    x: Tensor,
    h: Tensor,
    c: Tensor,
    gates: Tensor,
    c_new: Tensor,
}

pub struct LstmCellGrads {
    pub dx: Tensor,
    pub dh: Tensor,
    pub dc: Tensor,
    pub dw_ih: Tensor,
    pub dw_hh: Tensor,
    pub db: Tensor,
}

/// One LSTM step for a batch of N rows: returns `(h', c')`.
pub fn lstm_cell(
    x: &Tensor,
    h: &Tensor,
    c: &Tensor,
    w_ih: &Tensor,
    w_hh: &Tensor,
    b: &Tensor,
) -> Result<(Tensor, Tensor, LstmCellCache), TensorError> {
    let (n, input) = x.dims2("lstm_cell")?;
    let (_, hidden) = h.dims2("lstm_cell")?;
    check_weights("lstm_cell", input, hidden, w_ih, w_hh, b)?;
    if h.shape() != [n, hidden] || c.shape() != [n, hidden] {
        return Err(mismatch(
            "lstm_cell",
            format!("x {:?}, h {:?}, c {:?}", x.shape(), h.shape(), c.shape()),
        ));
    }
    let mut gates = Tensor::zeros(&[n, 4 * hidden]);
    for row in gates.data_mut().chunks_mut(4 * hidden) {
        row.copy_from_slice(b.data());
    }
    gemm(n, input, 4 * hidden, 1.0, x.data(), false, w_ih.data(), true, 1.0, gates.data_mut());
    gemm(n, hidden, 4 * hidden, 1.0, h.data(), false, w_hh.data(), true, 1.0, gates.data_mut());
    let mut h_new = Tensor::zeros(&[n, hidden]);
    let mut c_new = Tensor::zeros(&[n, hidden]);
    for r in 0..n {
        gates_forward(
            gates.row_mut(r),
            c.row(r),
            &mut c_new.data_mut()[r * hidden..(r + 1) * hidden],
            &mut h_new.data_mut()[r * hidden..(r + 1) * hidden],
        );
    }
    let cache = LstmCellCache {
        x: x.clone(),
        h: h.clone(),
        c: c.clone(),
        gates,
        c_new: c_new.clone(),
    };
    Ok((h_new, c_new, cache))
}

pub fn lstm_cell_backward(
    cache: &LstmCellCache,
    w_ih: &Tensor,
    w_hh: &Tensor,
    dh_new: &Tensor,
    dc_new: &Tensor,
) -> Result<LstmCellGrads, TensorError> {
    let (n, input) = cache.x.dims2("lstm_cell_backward")?;
    let hidden = cache.h.cols();
    if dh_new.shape() != [n, hidden] || dc_new.shape() != [n, hidden] {
        return Err(mismatch(
            "lstm_cell_backward",
            format!("dh {:?}, dc {:?}", dh_new.shape(), dc_new.shape()),
        ));
    }
    let mut dgates = Tensor::zeros(&[n, 4 * hidden]);
    let mut dc = Tensor::zeros(&[n, hidden]);
    for r in 0..n {
        gates_backward(
            cache.gates.row(r),
            cache.c_new.row(r),
            cache.c.row(r),
            dh_new.row(r),
            dc_new.row(r),
            &mut dgates.data_mut()[r * 4 * hidden..(r + 1) * 4 * hidden],
            &mut dc.data_mut()[r * hidden..(r + 1) * hidden],
        );
    }
    let mut dx = Tensor::zeros(&[n, input]);
    gemm(n, 4 * hidden, input, 1.0, dgates.data(), false, w_ih.data(), false, 0.0, dx.data_mut());
    let mut dh = Tensor::zeros(&[n, hidden]);
    gemm(n, 4 * hidden, hidden, 1.0, dgates.data(), false, w_hh.data(), false, 0.0, dh.data_mut());
    let mut dw_ih = Tensor::zeros(&[4 * hidden, input]);
    gemm(4 * hidden, n, input, 1.0, dgates.data(), true, cache.x.data(), false, 0.0, dw_ih.data_mut());
    let mut dw_hh = Tensor::zeros(&[4 * hidden, hidden]);
    gemm(4 * hidden, n, hidden, 1.0, dgates.data(), true, cache.h.data(), false, 0.0, dw_hh.data_mut());
    let mut db = Tensor::zeros(&[4 * hidden]);
    for row in dgates.data().chunks(4 * hidden) {
        for (a, g) in db.data_mut().iter_mut().zip(row) {
            *a += g;
        }
    }
    Ok(LstmCellGrads {
        dx,
        dh,
        dc,
        dw_ih,
        dw_hh,
        db,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Direction {
    Forward,
    Reverse,
}

/// A unidirectional LSTM over packed sequences, zero initial state.
#[derive(Debug, Clone)]
pub struct Lstm {
    pub w_ih: String,
    pub w_hh: String,
    pub b: String,
    pub input: usize,
    pub hidden: usize,
    pub direction: Direction,
}

pub struct LstmCache {
    x: Tensor,
    /// Gate activations per packed row.
    gates: Tensor,
    cells: Tensor,
    h_prev: Tensor,
    c_prev: Tensor,
    layout: PackedLayout,
}

/// Packed row of sequence `seq` at processing step `s`.
fn step_row(layout: &PackedLayout, seq: usize, s: usize, dir: Direction) -> usize {
    let len = layout.lengths()[seq];
    let off = layout.offsets()[seq];
    match dir {
        Direction::Forward => off + s,
        Direction::Reverse => off + len - 1 - s,
    }
}

impl Lstm {
    pub fn new(prefix: &str, input: usize, hidden: usize, direction: Direction) -> Self {
        Lstm {
            w_ih: format!("{prefix}.w_ih"),
            w_hh: format!("{prefix}.w_hh"),
            b: format!("{prefix}.b"),
            input,
            hidden,
            direction,
        }
    }

    /// Uniform ±1/√fan_in weights, zero bias with the forget slice set to 1.
    pub fn init(&self, params: &mut ParameterSet, rng: &mut Rng) {
        let h = self.hidden;
        let bi = 1.0 / (self.input as f64).sqrt();
        let bh = 1.0 / (h as f64).sqrt();
        params.insert(self.w_ih.clone(), Tensor::uniform(&[4 * h, self.input], -bi, bi, rng));
        params.insert(self.w_hh.clone(), Tensor::uniform(&[4 * h, h], -bh, bh, rng));
        let mut b = Tensor::zeros(&[4 * h]);
        b.data_mut()[h..2 * h].fill(1.0);
        params.insert(self.b.clone(), b);
    }

    pub fn forward(
        &self,
        params: &ParameterSet,
        x: &Tensor,
        layout: &PackedLayout,
    ) -> Result<(Tensor, LstmCache), TensorError> {
        layout.check(x, "lstm")?;
        let (total, input) = x.dims2("lstm")?;
        let (w_ih, w_hh, b) = (params.value(&self.w_ih), params.value(&self.w_hh), params.value(&self.b));
        check_weights("lstm", self.input, self.hidden, w_ih, w_hh, b)?;
        if input != self.input {
            return Err(mismatch("lstm", format!("{input} inputs, layer expects {}", self.input)));
        }
        let h = self.hidden;
        let g4 = 4 * h;
        // Input projections for all rows at once.
        let mut gates = Tensor::zeros(&[total, g4]);
        for row in gates.data_mut().chunks_mut(g4) {
            row.copy_from_slice(b.data());
        }
        gemm(total, input, g4, 1.0, x.data(), false, w_ih.data(), true, 1.0, gates.data_mut());

        let mut out = Tensor::zeros(&[total, h]);
        let mut cells = Tensor::zeros(&[total, h]);
        let mut h_prev = Tensor::zeros(&[total, h]);
        let mut c_prev = Tensor::zeros(&[total, h]);
        let b_count = layout.num_sequences();
        let mut h_state = vec![0.0; b_count * h];
        let mut c_state = vec![0.0; b_count * h];
        let mut h_packed = Vec::with_capacity(b_count * h);
        let mut rec = Vec::with_capacity(b_count * g4);
        for s in 0..layout.max_len() {
            let active: Vec<usize> = (0..b_count).filter(|&i| layout.lengths()[i] > s).collect();
            let n = active.len();
            h_packed.clear();
            for &i in &active {
                h_packed.extend_from_slice(&h_state[i * h..(i + 1) * h]);
            }
            rec.clear();
            rec.resize(n * g4, 0.0);
            if s > 0 {
                gemm(n, h, g4, 1.0, &h_packed, false, w_hh.data(), true, 0.0, &mut rec);
            }
            for (a, &i) in active.iter().enumerate() {
                let r = step_row(layout, i, s, self.direction);
                let grow = gates.row_mut(r);
                for (g, v) in grow.iter_mut().zip(&rec[a * g4..(a + 1) * g4]) {
                    *g += v;
                }
                h_prev.row_mut(r).copy_from_slice(&h_state[i * h..(i + 1) * h]);
                c_prev.row_mut(r).copy_from_slice(&c_state[i * h..(i + 1) * h]);
                gates_forward(
                    gates.row_mut(r),
                    c_prev.row(r),
                    cells.row_mut(r),
                    out.row_mut(r),
                );
                h_state[i * h..(i + 1) * h].copy_from_slice(out.row(r));
                c_state[i * h..(i + 1) * h].copy_from_slice(cells.row(r));
            }
        }
        let cache = LstmCache {
            x: x.clone(),
            gates,
            cells,
            h_prev,
            c_prev,
            layout: layout.clone(),
        };
        Ok((out, cache))
    }

    /// Backpropagation through time. Accumulates weight gradients; returns dx.
    pub fn backward(
        &self,
        params: &mut ParameterSet,
        cache: &LstmCache,
        dout: &Tensor,
    ) -> Result<Tensor, TensorError> {
        let layout = &cache.layout;
        let h = self.hidden;
        let g4 = 4 * h;
        let total = layout.total();
        if dout.shape() != [total, h] {
            return Err(mismatch(
                "lstm_backward",
                format!("gradient {:?}, output [{total}, {h}]", dout.shape()),
            ));
        }
        let b_count = layout.num_sequences();
        let mut dgates = Tensor::zeros(&[total, g4]);
        let mut dh_next = vec![0.0; b_count * h];
        let mut dc_next = vec![0.0; b_count * h];
        let mut dg_packed = Vec::with_capacity(b_count * g4);
        let mut dh_rec = Vec::with_capacity(b_count * h);
        let mut dh = vec![0.0; h];
        let mut dc_prev = vec![0.0; h];
        {
            let w_hh = params.value(&self.w_hh);
            for s in (0..layout.max_len()).rev() {
                let active: Vec<usize> = (0..b_count).filter(|&i| layout.lengths()[i] > s).collect();
                dg_packed.clear();
                for &i in &active {
                    let r = step_row(layout, i, s, self.direction);
                    for j in 0..h {
                        dh[j] = dout.row(r)[j] + dh_next[i * h + j];
                    }
                    gates_backward(
                        cache.gates.row(r),
                        cache.cells.row(r),
                        cache.c_prev.row(r),
                        &dh,
                        &dc_next[i * h..(i + 1) * h],
                        dgates.row_mut(r),
                        &mut dc_prev,
                    );
                    dc_next[i * h..(i + 1) * h].copy_from_slice(&dc_prev);
                    dg_packed.extend_from_slice(dgates.row(r));
                }
                if s > 0 {
                    let n = active.len();
                    dh_rec.clear();
                    dh_rec.resize(n * h, 0.0);
                    gemm(n, g4, h, 1.0, &dg_packed, false, w_hh.data(), false, 0.0, &mut dh_rec);
                    for (a, &i) in active.iter().enumerate() {
                        dh_next[i * h..(i + 1) * h].copy_from_slice(&dh_rec[a * h..(a + 1) * h]);
                    }
                }
            }
        }
        let input = self.input;
        let mut dx = Tensor::zeros(&[total, input]);
        gemm(total, g4, input, 1.0, dgates.data(), false, params.value(&self.w_ih).data(), false, 0.0, dx.data_mut());
        let dw_ih = params.grad_mut(&self.w_ih);
        gemm(g4, total, input, 1.0, dgates.data(), true, cache.x.data(), false, 1.0, dw_ih.data_mut());
        let dw_hh = params.grad_mut(&self.w_hh);
        gemm(g4, total, h, 1.0, dgates.data(), true, cache.h_prev.data(), false, 1.0, dw_hh.data_mut());
        let db = params.grad_mut(&self.b);
        for row in dgates.data().chunks(g4) {
            for (a, g) in db.data_mut().iter_mut().zip(row) {
                *a += g;
            }
        }
        Ok(dx)
    }
}

/// Forward and reverse LSTMs whose outputs are concatenated per row.
#[derive(Debug, Clone)]
pub struct BiLstm {
    pub fwd: Lstm,
    pub rev: Lstm,
}

impl BiLstm {
    pub fn new(prefix: &str, input: usize, hidden: usize) -> Self {
        BiLstm {
            fwd: Lstm::new(&format!("{prefix}.fwd"), input, hidden, Direction::Forward),
            rev: Lstm::new(&format!("{prefix}.rev"), input, hidden, Direction::Reverse),
        }
    }

    pub fn init(&self, params: &mut ParameterSet, rng: &mut Rng) {
        self.fwd.init(params, rng);
        self.rev.init(params, rng);
    }

    pub fn forward(
        &self,
        params: &ParameterSet,
        x: &Tensor,
        layout: &PackedLayout,
    ) -> Result<(Tensor, (LstmCache, LstmCache)), TensorError> {
        let (a, ca) = self.fwd.forward(params, x, layout)?;
        let (b, cb) = self.rev.forward(params, x, layout)?;
        let h = self.fwd.hidden;
        let mut out = Tensor::zeros(&[layout.total(), 2 * h]);
        for r in 0..layout.total() {
            let row = out.row_mut(r);
            row[..h].copy_from_slice(a.row(r));
            row[h..].copy_from_slice(b.row(r));
        }
        Ok((out, (ca, cb)))
    }

    pub fn backward(
        &self,
        params: &mut ParameterSet,
        cache: &(LstmCache, LstmCache),
        dout: &Tensor,
    ) -> Result<Tensor, TensorError> {
        let h = self.fwd.hidden;
        let (total, w) = dout.dims2("bilstm_backward")?;
        if w != 2 * h {
            return Err(mismatch("bilstm_backward", format!("{w} columns, expected {}", 2 * h)));
        }
        let mut da = Tensor::zeros(&[total, h]);
        let mut db = Tensor::zeros(&[total, h]);
        for r in 0..total {
            da.row_mut(r).copy_from_slice(&dout.row(r)[..h]);
            db.row_mut(r).copy_from_slice(&dout.row(r)[h..]);
        }
        let mut dx = self.fwd.backward(params, &cache.0, &da)?;
        dx.add_assign(&self.rev.backward(params, &cache.1, &db)?)?;
        Ok(dx)
    }
}

/// Bidirectional layers stacked so each consumes the previous 2H-wide output.
#[derive(Debug, Clone)]
pub struct StackedBiLstm {
    pub layers: Vec<BiLstm>,
}

pub struct StackedBiLstmCache {
    layers: Vec<(LstmCache, LstmCache)>,
}

impl StackedBiLstm {
    /// Layers are named `<prefix>.<l>.{fwd,rev}`.
    pub fn new(prefix: &str, input: usize, hidden: usize, layers: usize) -> Self {
        StackedBiLstm {
            layers: (0..layers)
                .map(|l| {
                    let inp = if l == 0 { input } else { 2 * hidden };
                    BiLstm::new(&format!("{prefix}.{l}"), inp, hidden)
                })
                .collect(),
        }
    }

    pub fn output_dim(&self) -> usize {
        2 * self.layers.last().map_or(0, |l| l.fwd.hidden)
    }

    pub fn init(&self, params: &mut ParameterSet, rng: &mut Rng) {
        for l in &self.layers {
            l.init(params, rng);
        }
    }

    pub fn forward(
        &self,
        params: &ParameterSet,
        x: &Tensor,
        layout: &PackedLayout,
    ) -> Result<(Tensor, StackedBiLstmCache), TensorError> {
        let mut caches = Vec::with_capacity(self.layers.len());
        let mut cur = x.clone();
        for l in &self.layers {
            let (y, c) = l.forward(params, &cur, layout)?;
            caches.push(c);
            cur = y;
        }
        Ok((cur, StackedBiLstmCache { layers: caches }))
    }

    pub fn backward(
        &self,
        params: &mut ParameterSet,
        cache: &StackedBiLstmCache,
        dout: &Tensor,
    ) -> Result<Tensor, TensorError> {
        let mut d = dout.clone();
        for (l, c) in self.layers.iter().zip(&cache.layers).rev() {
            d = l.backward(params, c, &d)?;
        }
        Ok(d)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn zero_weights_give_zero_state() {
        let x = Tensor::full(&[2, 3], 0.7);
        let h = Tensor::full(&[2, 4], 0.3);
        let c = Tensor::zeros(&[2, 4]);
        let (h2, c2, _) = lstm_cell(
            &x,
            &h,
            &c,
            &Tensor::zeros(&[16, 3]),
            &Tensor::zeros(&[16, 4]),
            &Tensor::zeros(&[16]),
        )
        .unwrap();
        assert!(h2.data().iter().all(|&v| v == 0.0));
        assert!(c2.data().iter().all(|&v| v == 0.0));
    }

    #[test]
    fn bilstm_output_width_is_twice_hidden() {
        let net = StackedBiLstm::new("bilstm", 6, 256, 2);
        let mut p = ParameterSet::new();
        net.init(&mut p, &mut Rng::new(0));
        let layout = PackedLayout::single(3).unwrap();
        let x = Tensor::full(&[3, 6], 0.1);
        let (y, _) = net.forward(&p, &x, &layout).unwrap();
        assert_eq!(y.shape(), &[3, 512]);
        assert!(p.contains("bilstm.1.rev.w_hh"));
        assert_eq!(p.value("bilstm.0.fwd.b").data()[256], 1.0);
    }

    #[test]
    fn packed_run_matches_separate_runs() {
        let lstm = Lstm::new("l", 3, 4, Direction::Reverse);
        let mut p = ParameterSet::new();
        let mut rng = Rng::new(5);
        lstm.init(&mut p, &mut rng);
        let x = Tensor::uniform(&[7, 3], -1.0, 1.0, &mut rng);
        let (packed, _) = lstm.forward(&p, &x, &PackedLayout::new(vec![4, 3]).unwrap()).unwrap();
        let first = Tensor::from_vec(&[4, 3], x.data()[..12].to_vec()).unwrap();
        let second = Tensor::from_vec(&[3, 3], x.data()[12..].to_vec()).unwrap();
        let (a, _) = lstm.forward(&p, &first, &PackedLayout::single(4).unwrap()).unwrap();
        let (b, _) = lstm.forward(&p, &second, &PackedLayout::single(3).unwrap()).unwrap();
        assert_eq!(&packed.data()[..16], a.data());
        assert_eq!(&packed.data()[16..], b.data());
    }

    #[test]
    fn sequence_matches_cell_steps() {
        let lstm = Lstm::new("l", 2, 3, Direction::Forward);
        let mut p = ParameterSet::new();
        let mut rng = Rng::new(11);
        lstm.init(&mut p, &mut rng);
        let x = Tensor::uniform(&[4, 2], -1.0, 1.0, &mut rng);
        let (seq, _) = lstm.forward(&p, &x, &PackedLayout::single(4).unwrap()).unwrap();
        let mut h = Tensor::zeros(&[1, 3]);
        let mut c = Tensor::zeros(&[1, 3]);
        for t in 0..4 {
            let xt = Tensor::from_vec(&[1, 2], x.row(t).to_vec()).unwrap();
            let (h2, c2, _) =
                lstm_cell(&xt, &h, &c, p.value("l.w_ih"), p.value("l.w_hh"), p.value("l.b")).unwrap();
            for j in 0..3 {
                assert!((h2.data()[j] - seq.row(t)[j]).abs() < 1e-14);
            }
            h = h2;
            c = c2;
        }
    }
}
