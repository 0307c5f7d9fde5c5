//! Dense 64-bit tensors and the hand-differentiated layers both models use.
//!
//! Every layer exposes a forward pass returning its output plus a cache, and
//! a backward pass that consumes the cache, accumulates parameter gradients
//! into a [`ParameterSet`] and returns the gradient with respect to its input.
//! Variable-length sequences travel as one row-stacked matrix described by a
//! [`PackedLayout`].

mod activation;
mod attention;
mod checkpoint;
mod dropout;
mod linear;
mod lstm;
mod norm;
mod params;
mod pool;
mod rng;
mod transformer;

pub use activation::{log_softmax_rows, log_softmax_rows_backward, relu, relu_backward, softmax_rows};
pub use attention::{positional_encoding, AttentionCache, MultiHeadSelfAttention};
pub use checkpoint::{load_checkpoint, read_checkpoint, save_checkpoint, CheckpointError};
pub use dropout::{dropout, dropout_backward, DropoutMask};
pub use linear::{linear, linear_backward, Linear, LinearGrads};
pub use lstm::{
    lstm_cell, lstm_cell_backward, BiLstm, Direction, Lstm, LstmCache, LstmCellCache,
    LstmCellGrads, StackedBiLstm, StackedBiLstmCache,
};
pub use norm::{
    BatchNorm1d, BatchNormCache, LayerNorm, LayerNormCache, BATCHNORM_EPS, BATCHNORM_MOMENTUM,
    LAYERNORM_EPS,
};
pub use params::ParameterSet;
pub use pool::{max_pool_packed, max_pool_time, max_pool_time_backward, MaxPoolCache};
pub use rng::Rng;
pub use transformer::{TransformerBlock, TransformerBlockCache};

use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum TensorError {
    #[error("shape mismatch in {op}: {detail}")]
    ShapeMismatch { op: &'static str, detail: String },
    #[error("positional encoding needs an even model dimension, got {0}")]
    OddDimension(usize),
    #[error("model dimension {d_model} is not divisible by {heads} heads")]
    IndivisibleHeads { d_model: usize, heads: usize },
    #[error("batch normalization needs at least 2 rows in training mode, got {0}")]
    BatchTooSmall(usize),
    #[error("invalid sequence layout: {0}")]
    Layout(String),
}

pub(crate) fn mismatch(op: &'static str, detail: impl Into<String>) -> TensorError {
    TensorError::ShapeMismatch {
        op,
        detail: detail.into(),
    }
}

/// Train or eval behaviour for dropout and batch normalization.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Mode {
    Train,
    Eval,
}

/// Row-major dense tensor of `f64`.
#[derive(Debug, Clone, PartialEq)]
pub struct Tensor {
    shape: Vec<usize>,
    data: Vec<f64>,
}

impl Tensor {
    pub fn zeros(shape: &[usize]) -> Tensor {
        assert!(shape.iter().all(|&d| d > 0), "tensor dims must be positive: {shape:?}");
        Tensor {
            shape: shape.to_vec(),
            data: vec![0.0; shape.iter().product()],
        }
    }

    pub fn full(shape: &[usize], value: f64) -> Tensor {
        let mut t = Tensor::zeros(shape);
        t.data.fill(value);
        t
    }

    pub fn from_vec(shape: &[usize], data: Vec<f64>) -> Result<Tensor, TensorError> {
        if shape.is_empty() || shape.contains(&0) {
            return Err(mismatch("from_vec", format!("dims must be positive, got {shape:?}")));
        }
        let n: usize = shape.iter().product();
        if n != data.len() {
            return Err(mismatch(
                "from_vec",
                format!("shape {shape:?} needs {n} values, got {}", data.len()),
            ));
        }
        Ok(Tensor {
            shape: shape.to_vec(),
            data,
        })
    }

    /// Builds a 2-D tensor from rows; panics on ragged input.
    pub fn from_rows(rows: &[Vec<f64>]) -> Tensor {
        let cols = rows.first().map_or(0, |r| r.len());
        assert!(rows.iter().all(|r| r.len() == cols), "ragged rows");
        Tensor::from_vec(&[rows.len(), cols], rows.concat()).expect("valid matrix")
    }

    pub fn uniform(shape: &[usize], lo: f64, hi: f64, rng: &mut Rng) -> Tensor {
        let mut t = Tensor::zeros(shape);
        for v in &mut t.data {
            *v = rng.uniform_range(lo, hi);
        }
        t
    }

    pub fn shape(&self) -> &[usize] {
        &self.shape
    }

    pub fn len(&self) -> usize {
        self.data.len()
    }

    pub fn is_empty(&self) -> bool {
        self.data.is_empty()
    }

    pub fn data(&self) -> &[f64] {
        &self.data
    }

    pub fn data_mut(&mut self) -> &mut [f64] {
        &mut self.data
    }

    pub fn into_vec(self) -> Vec<f64> {
        self.data
    }

    /// Size of the first axis.
    pub fn rows(&self) -> usize {
        self.shape[0]
    }

    /// Size of the last axis.
    pub fn cols(&self) -> usize {
        *self.shape.last().expect("non-empty shape")
    }

    pub fn row(&self, i: usize) -> &[f64] {
        let c = self.cols();
        &self.data[i * c..(i + 1) * c]
    }

    pub fn row_mut(&mut self, i: usize) -> &mut [f64] {
        let c = self.cols();
        &mut self.data[i * c..(i + 1) * c]
    }

    pub fn reshape(mut self, shape: &[usize]) -> Result<Tensor, TensorError> {
        if shape.iter().product::<usize>() != self.data.len() || shape.contains(&0) {
            return Err(mismatch(
                "reshape",
                format!("{:?} -> {shape:?}", self.shape),
            ));
        }
        self.shape = shape.to_vec();
        Ok(self)
    }

    pub(crate) fn dims2(&self, op: &'static str) -> Result<(usize, usize), TensorError> {
        match self.shape[..] {
            [r, c] => Ok((r, c)),
            _ => Err(mismatch(op, format!("expected a matrix, got shape {:?}", self.shape))),
        }
    }

    pub fn add_assign(&mut self, other: &Tensor) -> Result<(), TensorError> {
        if self.shape != other.shape {
            return Err(mismatch(
                "add_assign",
                format!("{:?} vs {:?}", self.shape, other.shape),
            ));
        }
        for (a, b) in self.data.iter_mut().zip(&other.data) {
            *a += b;
        }
        Ok(())
    }

    pub fn fill(&mut self, value: f64) {
        self.data.fill(value);
    }

    pub fn max_abs_diff(&self, other: &Tensor) -> f64 {
        assert_eq!(self.shape, other.shape);
        self.data
            .iter()
            .zip(&other.data)
            .map(|(a, b)| (a - b).abs())
            .fold(0.0, f64::max)
    }
}

/// `c = alpha * op(a) * op(b) + beta * c` where `op(a)` is m×k and `op(b)` is k×n.
///
/// With `trans_a` the buffer `a` holds a k×m row-major matrix; likewise `b`
/// holds n×k when `trans_b` is set.
#[allow(clippy::too_many_arguments)]
pub(crate) fn gemm(
    m: usize,
    k: usize,
    n: usize,
    alpha: f64,
    a: &[f64],
    trans_a: bool,
    b: &[f64],
    trans_b: bool,
    beta: f64,
    c: &mut [f64],
) {
    assert!(a.len() >= m * k && b.len() >= k * n && c.len() >= m * n);
    if m == 0 || n == 0 {
        return;
    }
    if k == 0 {
        for v in &mut c[..m * n] {
            *v *= beta;
        }
        return;
    }
    let (rsa, csa) = if trans_a { (1, m as isize) } else { (k as isize, 1) };
    let (rsb, csb) = if trans_b { (1, k as isize) } else { (n as isize, 1) };
    // SAFETY: the asserts above guarantee every index reachable through the
    // strides lies inside the slices, and `c` does not alias `a` or `b`.
    unsafe {
        matrixmultiply::dgemm(
            m,
            k,
            n,
            alpha,
            a.as_ptr(),
            rsa,
            csa,
            b.as_ptr(),
            rsb,
            csb,
            beta,
            c.as_mut_ptr(),
            n as isize,
            1,
        );
    }
}

/// `a · b` for matrices.
pub fn matmul(a: &Tensor, b: &Tensor) -> Result<Tensor, TensorError> {
    let (m, k) = a.dims2("matmul")?;
    let (k2, n) = b.dims2("matmul")?;
    if k != k2 {
        return Err(mismatch("matmul", format!("{m}x{k} · {k2}x{n}")));
    }
    let mut out = Tensor::zeros(&[m, n]);
    gemm(m, k, n, 1.0, &a.data, false, &b.data, false, 0.0, &mut out.data);
    Ok(out)
}

/// `a · bᵀ` for matrices.
pub fn matmul_nt(a: &Tensor, b: &Tensor) -> Result<Tensor, TensorError> {
    let (m, k) = a.dims2("matmul_nt")?;
    let (n, k2) = b.dims2("matmul_nt")?;
    if k != k2 {
        return Err(mismatch("matmul_nt", format!("{m}x{k} · ({n}x{k2})ᵀ")));
    }
    let mut out = Tensor::zeros(&[m, n]);
    gemm(m, k, n, 1.0, &a.data, false, &b.data, true, 0.0, &mut out.data);
    Ok(out)
}

/// `aᵀ · b` for matrices.
pub fn matmul_tn(a: &Tensor, b: &Tensor) -> Result<Tensor, TensorError> {
    let (k, m) = a.dims2("matmul_tn")?;
    let (k2, n) = b.dims2("matmul_tn")?;
    if k != k2 {
        return Err(mismatch("matmul_tn", format!("({k}x{m})ᵀ · {k2}x{n}")));
    }
    let mut out = Tensor::zeros(&[m, n]);
    gemm(m, k, n, 1.0, &a.data, true, &b.data, false, 0.0, &mut out.data);
    Ok(out)
}

/// Row ranges of sequences stacked into one matrix.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct PackedLayout {
    lengths: Vec<usize>,
    offsets: Vec<usize>,
    total: usize,
}

impl PackedLayout {
    pub fn new(lengths: Vec<usize>) -> Result<Self, TensorError> {
        if lengths.is_empty() {
            return Err(TensorError::Layout("no sequences".into()));
        }
        if lengths.contains(&0) {
            return Err(TensorError::Layout("empty sequence".into()));
        }
        let mut offsets = Vec::with_capacity(lengths.len());
        let mut total = 0;
        for &l in &lengths {
            offsets.push(total);
            total += l;
        }
        Ok(PackedLayout {
            lengths,
            offsets,
            total,
        })
    }

    pub fn single(len: usize) -> Result<Self, TensorError> {
        Self::new(vec![len])
    }

    pub fn lengths(&self) -> &[usize] {
        &self.lengths
    }

    pub fn offsets(&self) -> &[usize] {
        &self.offsets
    }

    pub fn total(&self) -> usize {
        self.total
    }

    pub fn num_sequences(&self) -> usize {
        self.lengths.len()
    }

    pub fn max_len(&self) -> usize {
        self.lengths.iter().copied().max().unwrap_or(0)
    }

    pub fn rows(&self, seq: usize) -> std::ops::Range<usize> {
        self.offsets[seq]..self.offsets[seq] + self.lengths[seq]
    }

    pub(crate) fn check(&self, x: &Tensor, op: &'static str) -> Result<(), TensorError> {
        let (r, _) = x.dims2(op)?;
        if r != self.total {
            return Err(mismatch(
                op,
                format!("{r} rows for a layout of {} frames", self.total),
            ));
        }
        Ok(())
    }
}
