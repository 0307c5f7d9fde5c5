use super::{mismatch, Mode, ParameterSet, Tensor, TensorError};

pub const BATCHNORM_EPS: f64 = 1e-5;
pub const BATCHNORM_MOMENTUM: f64 = 0.1;
/// Small enough that normalized rows have unit variance to about 1e-9.
pub const LAYERNORM_EPS: f64 = 1e-12;

/// Per-feature normalization over the rows of an N×F batch.
///
/// Training mode uses batch statistics (biased variance) and moves the
/// running statistics toward them; the running variance tracks the unbiased
/// batch variance. Eval mode uses the running statistics.
#[derive(Debug, Clone)]
pub struct BatchNorm1d {
    pub gamma: String,
    pub beta: String,
    pub running_mean: String,
    pub running_var: String,
    pub features: usize,
}

pub struct BatchNormCache {
    x_hat: Tensor,
    inv_std: Vec<f64>,
    mode: Mode,
    batch_stats: Option<(Vec<f64>, Vec<f64>, usize)>,
}

impl BatchNorm1d {
    pub fn new(prefix: &str, features: usize) -> Self {
        BatchNorm1d {
            gamma: format!("{prefix}.gamma"),
            beta: format!("{prefix}.beta"),
            running_mean: format!("{prefix}.running_mean"),
            running_var: format!("{prefix}.running_var"),
            features,
        }
    }

    pub fn init(&self, params: &mut ParameterSet) {
        params.insert(self.gamma.clone(), Tensor::full(&[self.features], 1.0));
        params.insert(self.beta.clone(), Tensor::zeros(&[self.features]));
        params.insert_buffer(self.running_mean.clone(), Tensor::zeros(&[self.features]));
        params.insert_buffer(self.running_var.clone(), Tensor::full(&[self.features], 1.0));
    }

    /// Normalizes `x`. In training mode the batch statistics are kept in the
    /// cache; call [`BatchNorm1d::update_running_stats`] to fold them into
    /// the running buffers.
    pub fn forward(
        &self,
        params: &ParameterSet,
        x: &Tensor,
        mode: Mode,
    ) -> Result<(Tensor, BatchNormCache), TensorError> {
        let (n, f) = x.dims2("batchnorm1d")?;
        if f != self.features {
            return Err(mismatch(
                "batchnorm1d",
                format!("{f} features, layer has {}", self.features),
            ));
        }
        let (mean, var) = match mode {
            Mode::Train => {
                if n < 2 {
                    return Err(TensorError::BatchTooSmall(n));
                }
                column_stats(x)
            }
            Mode::Eval => (
                params.buffer(&self.running_mean).data().to_vec(),
                params.buffer(&self.running_var).data().to_vec(),
            ),
        };
        let inv_std: Vec<f64> = var.iter().map(|v| 1.0 / (v + BATCHNORM_EPS).sqrt()).collect();
        let gamma = params.value(&self.gamma).data();
        let beta = params.value(&self.beta).data();
        let mut x_hat = x.clone();
        let mut y = x.clone();
        for (hrow, yrow) in x_hat.data_mut().chunks_mut(f).zip(y.data_mut().chunks_mut(f)) {
            for j in 0..f {
                hrow[j] = (hrow[j] - mean[j]) * inv_std[j];
                yrow[j] = hrow[j] * gamma[j] + beta[j];
            }
        }
        let batch_stats = (mode == Mode::Train).then_some((mean, var, n));
        Ok((
            y,
            BatchNormCache {
                x_hat,
                inv_std,
                mode,
                batch_stats,
            },
        ))
    }

    /// Moves the running statistics toward a training batch's statistics.
    /// The running variance tracks the unbiased batch variance.
    pub fn update_running_stats(&self, params: &mut ParameterSet, cache: &BatchNormCache) {
        let Some((mean, var, n)) = &cache.batch_stats else {
            return;
        };
        let rm = params.buffer_mut(&self.running_mean);
        for (r, m) in rm.data_mut().iter_mut().zip(mean) {
            *r = (1.0 - BATCHNORM_MOMENTUM) * *r + BATCHNORM_MOMENTUM * m;
        }
        let unbias = *n as f64 / (*n - 1) as f64;
        let rv = params.buffer_mut(&self.running_var);
        for (r, v) in rv.data_mut().iter_mut().zip(var) {
            *r = (1.0 - BATCHNORM_MOMENTUM) * *r + BATCHNORM_MOMENTUM * v * unbias;
        }
    }

    pub fn backward(
        &self,
        params: &mut ParameterSet,
        cache: &BatchNormCache,
        dy: &Tensor,
    ) -> Result<Tensor, TensorError> {
        if dy.shape() != cache.x_hat.shape() {
            return Err(mismatch(
                "batchnorm1d_backward",
                format!("dy {:?}, x {:?}", dy.shape(), cache.x_hat.shape()),
            ));
        }
        let f = self.features;
        let n = dy.rows() as f64;
        let mut dgamma = vec![0.0; f];
        let mut dbeta = vec![0.0; f];
        for (drow, hrow) in dy.data().chunks(f).zip(cache.x_hat.data().chunks(f)) {
            for j in 0..f {
                dgamma[j] += drow[j] * hrow[j];
                dbeta[j] += drow[j];
            }
        }
        let gamma = params.value(&self.gamma).data().to_vec();
        let mut dx = dy.clone();
        match cache.mode {
            Mode::Train => {
                for (drow, hrow) in dx.data_mut().chunks_mut(f).zip(cache.x_hat.data().chunks(f)) {
                    for j in 0..f {
                        let g = gamma[j] * cache.inv_std[j] / n;
                        drow[j] = g * (n * drow[j] - dbeta[j] - hrow[j] * dgamma[j]);
                    }
                }
            }
            Mode::Eval => {
                for drow in dx.data_mut().chunks_mut(f) {
                    for j in 0..f {
                        drow[j] *= gamma[j] * cache.inv_std[j];
                    }
                }
            }
        }
        for (g, d) in params.grad_mut(&self.gamma).data_mut().iter_mut().zip(&dgamma) {
            *g += d;
        }
        for (g, d) in params.grad_mut(&self.beta).data_mut().iter_mut().zip(&dbeta) {
            *g += d;
        }
        Ok(dx)
    }
}

/// Column means and biased variances.
fn column_stats(x: &Tensor) -> (Vec<f64>, Vec<f64>) {
    let (n, f) = (x.rows(), x.cols());
    let mut mean = vec![0.0; f];
    for row in x.data().chunks(f) {
        for (m, v) in mean.iter_mut().zip(row) {
            *m += v;
        }
    }
    for m in &mut mean {
        *m /= n as f64;
    }
    let mut var = vec![0.0; f];
    for row in x.data().chunks(f) {
        for j in 0..f {
            let d = row[j] - mean[j];
            var[j] += d * d;
        }
    }
    for v in &mut var {
        *v /= n as f64;
    }
    (mean, var)
}

/// Per-row normalization over the last axis with a learned affine.
#[derive(Debug, Clone)]
pub struct LayerNorm {
    pub gamma: String,
    pub beta: String,
    pub features: usize,
}

pub struct LayerNormCache {
    x_hat: Tensor,
    inv_std: Vec<f64>,
}

impl LayerNormCache {
    /// Normalized input before the affine.
    pub fn normalized(&self) -> &Tensor {
        &self.x_hat
    }
}

impl LayerNorm {
    pub fn new(prefix: &str, features: usize) -> Self {
        LayerNorm {
            gamma: format!("{prefix}.gamma"),
            beta: format!("{prefix}.beta"),
            features,
        }
    }

    pub fn init(&self, params: &mut ParameterSet) {
        params.insert(self.gamma.clone(), Tensor::full(&[self.features], 1.0));
        params.insert(self.beta.clone(), Tensor::zeros(&[self.features]));
    }

    pub fn forward(
        &self,
        params: &ParameterSet,
        x: &Tensor,
    ) -> Result<(Tensor, LayerNormCache), TensorError> {
        let (_, f) = x.dims2("layernorm")?;
        if f != self.features {
            return Err(mismatch(
                "layernorm",
                format!("{f} features, layer has {}", self.features),
            ));
        }
        let gamma = params.value(&self.gamma).data();
        let beta = params.value(&self.beta).data();
        let mut x_hat = x.clone();
        let mut y = x.clone();
        let mut inv_std = Vec::with_capacity(x.rows());
        for (hrow, yrow) in x_hat.data_mut().chunks_mut(f).zip(y.data_mut().chunks_mut(f)) {
            let mean = hrow.iter().sum::<f64>() / f as f64;
            let var = hrow.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / f as f64;
            let s = 1.0 / (var + LAYERNORM_EPS).sqrt();
            inv_std.push(s);
            for j in 0..f {
                hrow[j] = (hrow[j] - mean) * s;
                yrow[j] = hrow[j] * gamma[j] + beta[j];
            }
        }
        Ok((y, LayerNormCache { x_hat, inv_std }))
    }

    pub fn backward(
        &self,
        params: &mut ParameterSet,
        cache: &LayerNormCache,
        dy: &Tensor,
    ) -> Result<Tensor, TensorError> {
        if dy.shape() != cache.x_hat.shape() {
            return Err(mismatch(
                "layernorm_backward",
                format!("dy {:?}, x {:?}", dy.shape(), cache.x_hat.shape()),
            ));
        }
        let f = self.features;
        let gamma = params.value(&self.gamma).data().to_vec();
        let mut dgamma = vec![0.0; f];
        let mut dbeta = vec![0.0; f];
        let mut dx = dy.clone();
        let mut g = vec![0.0; f];
        for ((drow, hrow), &s) in dx
            .data_mut()
            .chunks_mut(f)
            .zip(cache.x_hat.data().chunks(f))
            .zip(&cache.inv_std)
        {
            for j in 0..f {
                dgamma[j] += drow[j] * hrow[j];
                dbeta[j] += drow[j];
                g[j] = drow[j] * gamma[j];
            }
            let mean_g = g.iter().sum::<f64>() / f as f64;
            let mean_gh = g.iter().zip(hrow.iter()).map(|(a, b)| a * b).sum::<f64>() / f as f64;
            for j in 0..f {
                drow[j] = s * (g[j] - mean_g - hrow[j] * mean_gh);
            }
        }
        for (a, d) in params.grad_mut(&self.gamma).data_mut().iter_mut().zip(&dgamma) {
            *a += d;
        }
        for (a, d) in params.grad_mut(&self.beta).data_mut().iter_mut().zip(&dbeta) {
            *a += d;
        }
        Ok(dx)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::tensor::Rng;

    fn bn(features: usize) -> (BatchNorm1d, ParameterSet) {
        let layer = BatchNorm1d::new("bn", features);
        let mut p = ParameterSet::new();
        layer.init(&mut p);
        (layer, p)
    }

    #[test]
    fn constant_column_normalizes_to_zero() {
        let (layer, p) = bn(2);
        let x = Tensor::from_rows(&[vec![4.0, 1.0], vec![4.0, 2.0], vec![4.0, 3.0]]);
        let (y, _) = layer.forward(&p, &x, Mode::Train).unwrap();
        for r in 0..3 {
            assert_eq!(y.row(r)[0], 0.0);
        }
    }

    #[test]
    fn two_row_closed_form() {
        let (layer, mut p) = bn(1);
        let x = Tensor::from_rows(&[vec![1.0], vec![3.0]]);
        let (y, cache) = layer.forward(&p, &x, Mode::Train).unwrap();
        layer.update_running_stats(&mut p, &cache);
        // mean 2, biased variance 1: y = ±1/sqrt(1 + 1e-5)
        let expected = 1.0 / (1.0f64 + 1e-5).sqrt();
        assert!((y.data()[0] + expected).abs() < 1e-15);
        assert!((y.data()[1] - expected).abs() < 1e-15);
        assert!((expected - 0.999995).abs() < 1e-8);
        // running stats after one step: mean 0.2, var 0.9 + 0.1 * 2 (unbiased)
        assert!((p.buffer("bn.running_mean").data()[0] - 0.2).abs() < 1e-15);
        assert!((p.buffer("bn.running_var").data()[0] - 1.1).abs() < 1e-15);
    }

    #[test]
    fn eval_with_unit_running_stats_is_identity() {
        let (layer, p) = bn(3);
        let x = Tensor::from_rows(&[vec![0.5, -2.0, 7.0]]);
        let (y, _) = layer.forward(&p, &x, Mode::Eval).unwrap();
        let scale = 1.0 / (1.0f64 + BATCHNORM_EPS).sqrt();
        for (a, b) in y.data().iter().zip(x.data()) {
            assert!((a - b * scale).abs() < 1e-15);
            assert!((a - b).abs() < 1e-4);
        }
    }

    #[test]
    fn single_row_training_batch_is_rejected() {
        let (layer, p) = bn(1);
        let x = Tensor::from_rows(&[vec![1.0]]);
        assert!(matches!(
            layer.forward(&p, &x, Mode::Train),
            Err(TensorError::BatchTooSmall(1))
        ));
    }

    #[test]
    fn layernorm_rows_are_standardized() {
        let layer = LayerNorm::new("ln", 16);
        let mut p = ParameterSet::new();
        layer.init(&mut p);
        let mut rng = Rng::new(9);
        let x = Tensor::uniform(&[5, 16], -3.0, 3.0, &mut rng);
        let (_, cache) = layer.forward(&p, &x).unwrap();
        for r in 0..5 {
            let row = cache.normalized().row(r);
            let mean = row.iter().sum::<f64>() / 16.0;
            let var = row.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / 16.0;
            assert!(mean.abs() < 1e-12);
            assert!((var - 1.0).abs() < 1e-9);
        }
    }
}
