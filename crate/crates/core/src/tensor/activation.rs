use super::Tensor;

/// Max-subtracted softmax over the last axis.
pub fn softmax_rows(x: &Tensor) -> Tensor {
    let mut out = x.clone();
    let c = x.cols();
    for row in out.data_mut().chunks_mut(c) {
        let m = row.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        let mut sum = 0.0;
        for v in row.iter_mut() {
            *v = (*v - m).exp();
            sum += *v;
        }
        for v in row.iter_mut() {
            *v /= sum;
        }
    }
    out
}

/// Log-softmax over the last axis.
pub fn log_softmax_rows(x: &Tensor) -> Tensor {
    let mut out = x.clone();
    let c = x.cols();
    for row in out.data_mut().chunks_mut(c) {
        let (arg, m) = row
            .iter()
            .copied()
            .enumerate()
            .fold((0, f64::NEG_INFINITY), |b, (i, v)| if v > b.1 { (i, v) } else { b });
        // The max term contributes exactly 1; ln_1p keeps small remainders exact.
        let rest: f64 = row
            .iter()
            .enumerate()
            .filter(|&(i, _)| i != arg)
            .map(|(_, v)| (v - m).exp())
            .sum();
        let lse = m + rest.ln_1p();
        for v in row.iter_mut() {
            *v -= lse;
        }
    }
    out
}

/// Gradient through log-softmax given its output `y` and upstream `dy`:
/// `dx = dy - softmax(x) * sum(dy)` per row.
pub fn log_softmax_rows_backward(y: &Tensor, dy: &Tensor) -> Tensor {
    let c = y.cols();
    let mut dx = dy.clone();
    for (drow, yrow) in dx.data_mut().chunks_mut(c).zip(y.data().chunks(c)) {
        let s: f64 = drow.iter().sum();
        for (d, &lp) in drow.iter_mut().zip(yrow) {
            *d -= lp.exp() * s;
        }
    }
    dx
}

pub fn relu(x: &Tensor) -> Tensor {
    let mut out = x.clone();
    for v in out.data_mut() {
        *v = v.max(0.0);
    }
    out
}

/// Passes `dy` where the forward input was positive.
pub fn relu_backward(x: &Tensor, dy: &Tensor) -> Tensor {
    let mut dx = dy.clone();
    for (d, &v) in dx.data_mut().iter_mut().zip(x.data()) {
        if v <= 0.0 {
            *d = 0.0;
        }
    }
    dx
}

#[inline]
pub(crate) fn sigmoid(x: f64) -> f64 {
    if x >= 0.0 {
        1.0 / (1.0 + (-x).exp())
    } else {
        let e = x.exp();
        e / (1.0 + e)
    }
}
