use super::{gemm, mismatch, ParameterSet, Rng, Tensor, TensorError};

/// `y = x · wᵀ + b`.
pub fn linear(x: &Tensor, w: &Tensor, b: &Tensor) -> Result<Tensor, TensorError> {
    let (n, input) = x.dims2("linear")?;
    let (out, w_in) = w.dims2("linear")?;
    if w_in != input || b.shape() != [out] {
        return Err(mismatch(
            "linear",
            format!("x {:?}, w {:?}, b {:?}", x.shape(), w.shape(), b.shape()),
        ));
    }
    let mut y = Tensor::zeros(&[n, out]);
    for row in y.data_mut().chunks_mut(out) {
        row.copy_from_slice(b.data());
    }
    gemm(n, input, out, 1.0, x.data(), false, w.data(), true, 1.0, y.data_mut());
    Ok(y)
}

pub struct LinearGrads {
    pub dx: Tensor,
    pub dw: Tensor,
    pub db: Tensor,
}

pub fn linear_backward(x: &Tensor, w: &Tensor, dy: &Tensor) -> Result<LinearGrads, TensorError> {
    let mut dw = Tensor::zeros(w.shape());
    let mut db = Tensor::zeros(&[w.rows()]);
    let dx = accumulate_backward(x, w, dy, &mut dw, &mut db)?;
    Ok(LinearGrads { dx, dw, db })
}

fn accumulate_backward(
    x: &Tensor,
    w: &Tensor,
    dy: &Tensor,
    dw: &mut Tensor,
    db: &mut Tensor,
) -> Result<Tensor, TensorError> {
    let (n, input) = x.dims2("linear_backward")?;
    let (out, w_in) = w.dims2("linear_backward")?;
    if w_in != input || dy.shape() != [n, out] {
        return Err(mismatch(
            "linear_backward",
            format!("x {:?}, w {:?}, dy {:?}", x.shape(), w.shape(), dy.shape()),
        ));
    }
    gemm(out, n, input, 1.0, dy.data(), true, x.data(), false, 1.0, dw.data_mut());
    for row in dy.data().chunks(out) {
        for (g, d) in db.data_mut().iter_mut().zip(row) {
            *g += d;
        }
    }
    let mut dx = Tensor::zeros(&[n, input]);
    gemm(n, out, input, 1.0, dy.data(), false, w.data(), false, 0.0, dx.data_mut());
    Ok(dx)
}

/// Fully connected layer bound to `<prefix>.w` / `<prefix>.b`.
#[derive(Debug, Clone)]
pub struct Linear {
    pub w: String,
    pub b: String,
    pub in_dim: usize,
    pub out_dim: usize,
}

impl Linear {
    pub fn new(prefix: &str, in_dim: usize, out_dim: usize) -> Linear {
        Linear {
            w: format!("{prefix}.w"),
            b: format!("{prefix}.b"),
            in_dim,
            out_dim,
        }
    }

    /// Weights uniform in ±1/√fan_in, bias zero.
    pub fn init(&self, params: &mut ParameterSet, rng: &mut Rng) {
        let bound = 1.0 / (self.in_dim as f64).sqrt();
        params.insert(
            self.w.clone(),
            Tensor::uniform(&[self.out_dim, self.in_dim], -bound, bound, rng),
        );
        params.insert(self.b.clone(), Tensor::zeros(&[self.out_dim]));
    }

    pub fn forward(&self, params: &ParameterSet, x: &Tensor) -> Result<Tensor, TensorError> {
        linear(x, params.value(&self.w), params.value(&self.b))
    }

    /// Accumulates dW and db; returns dx.
    pub fn backward(
        &self,
        params: &mut ParameterSet,
        x: &Tensor,
        dy: &Tensor,
    ) -> Result<Tensor, TensorError> {
        let mut dw = params.take_grad(&self.w);
        let mut db = params.take_grad(&self.b);
        let result = accumulate_backward(x, params.value(&self.w), dy, &mut dw, &mut db);
        params.restore_grad(&self.w, dw);
        params.restore_grad(&self.b, db);
        result
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn identity_weights_pass_through() {
        let x = Tensor::from_rows(&[vec![1.0, -2.0], vec![0.5, 3.0]]);
        let w = Tensor::from_rows(&[vec![1.0, 0.0], vec![0.0, 1.0]]);
        let y = linear(&x, &w, &Tensor::zeros(&[2])).unwrap();
        assert_eq!(y, x);
    }

    #[test]
    fn worked_example() {
        let x = Tensor::from_rows(&[vec![1.0, 2.0]]);
        let w = Tensor::from_rows(&[vec![3.0, 4.0]]);
        let b = Tensor::from_vec(&[1], vec![5.0]).unwrap();
        assert_eq!(linear(&x, &w, &b).unwrap().data(), &[16.0]);
    }

    #[test]
    fn bias_gradient_of_sum_is_ones() {
        let mut rng = Rng::new(1);
        let x = Tensor::uniform(&[4, 3], -1.0, 1.0, &mut rng);
        let w = Tensor::uniform(&[2, 3], -1.0, 1.0, &mut rng);
        let g = linear_backward(&x, &w, &Tensor::full(&[4, 2], 1.0)).unwrap();
        // Four rows each contribute 1 to every output's bias.
        assert_eq!(g.db.data(), &[4.0, 4.0]);
        let g1 = linear_backward(&x.clone().reshape(&[4, 3]).unwrap(), &w, &Tensor::full(&[4, 2], 0.25)).unwrap();
        assert_eq!(g1.db.data(), &[1.0, 1.0]);
    }

    #[test]
    fn shape_errors() {
        let x = Tensor::zeros(&[2, 3]);
        let w = Tensor::zeros(&[4, 2]);
        assert!(matches!(
            linear(&x, &w, &Tensor::zeros(&[4])),
            Err(TensorError::ShapeMismatch { .. })
        ));
    }
}
