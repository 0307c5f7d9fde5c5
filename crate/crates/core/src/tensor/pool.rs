use super::{mismatch, PackedLayout, Tensor, TensorError};

/// Winning row of every (sequence, feature) pair.
#[derive(Debug, Clone, PartialEq)]
pub struct MaxPoolCache {
    argmax: Vec<usize>,
    rows: usize,
    cols: usize,
}

impl MaxPoolCache {
    pub fn argmax(&self) -> &[usize] {
        &self.argmax
    }
}

/// Column-wise maximum over the rows of a T×F matrix; ties go to the earliest row.
pub fn max_pool_time(x: &Tensor) -> Result<(Tensor, MaxPoolCache), TensorError> {
    let (t, _) = x.dims2("max_pool_time")?;
    let layout = PackedLayout::single(t)?;
    let (y, cache) = max_pool_packed(x, &layout)?;
    let f = y.cols();
    Ok((y.reshape(&[f])?, cache))
}

/// Gradient of [`max_pool_time`]: `dy` lands on the winning rows only.
pub fn max_pool_time_backward(cache: &MaxPoolCache, dy: &Tensor) -> Result<Tensor, TensorError> {
    if dy.len() != cache.argmax.len() {
        return Err(mismatch(
            "max_pool_time_backward",
            format!("{} gradients for {} pooled values", dy.len(), cache.argmax.len()),
        ));
    }
    let mut dx = Tensor::zeros(&[cache.rows, cache.cols]);
    let f = cache.cols;
    for (i, (&row, &g)) in cache.argmax.iter().zip(dy.data()).enumerate() {
        dx.data_mut()[row * f + i % f] += g;
    }
    Ok(dx)
}

/// Max pooling of each packed sequence: returns one B×F row per sequence.
pub fn max_pool_packed(
    x: &Tensor,
    layout: &PackedLayout,
) -> Result<(Tensor, MaxPoolCache), TensorError> {
    layout.check(x, "max_pool_packed")?;
    let f = x.cols();
    let b = layout.num_sequences();
    let mut y = Tensor::zeros(&[b, f]);
    let mut argmax = vec![0; b * f];
    for s in 0..b {
        let range = layout.rows(s);
        let out = &mut y.data_mut()[s * f..(s + 1) * f];
        let arg = &mut argmax[s * f..(s + 1) * f];
        out.copy_from_slice(x.row(range.start));
        arg.fill(range.start);
        for r in range.start + 1..range.end {
            for (j, &v) in x.row(r).iter().enumerate() {
                if v > out[j] {
                    out[j] = v;
                    arg[j] = r;
                }
            }
        }
    }
    Ok((
        y,
        MaxPoolCache {
            argmax,
            rows: layout.total(),
            cols: f,
        },
    ))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn single_row_is_identity() {
        let x = Tensor::from_rows(&[vec![1.0, -2.0, 3.0]]);
        let (y, _) = max_pool_time(&x).unwrap();
        assert_eq!(y.data(), x.data());
    }

    #[test]
    fn columnwise_max() {
        let x = Tensor::from_rows(&[vec![1.0, 5.0], vec![3.0, 2.0]]);
        let (y, c) = max_pool_time(&x).unwrap();
        assert_eq!(y.data(), &[3.0, 5.0]);
        assert_eq!(c.argmax(), &[1, 0]);
    }

    #[test]
    fn ties_route_gradient_to_earliest_row() {
        let x = Tensor::from_rows(&[vec![0.0], vec![2.0], vec![2.0]]);
        let (_, c) = max_pool_time(&x).unwrap();
        let dx = max_pool_time_backward(&c, &Tensor::full(&[1], 1.0)).unwrap();
        assert_eq!(dx.data(), &[0.0, 1.0, 0.0]);
    }

    #[test]
    fn packed_sequences_pool_separately() {
        let x = Tensor::from_rows(&[vec![1.0], vec![4.0], vec![-1.0], vec![-3.0]]);
        let layout = PackedLayout::new(vec![2, 2]).unwrap();
        let (y, c) = max_pool_packed(&x, &layout).unwrap();
        assert_eq!(y.data(), &[4.0, -1.0]);
        let dx = max_pool_time_backward(&c, &Tensor::from_rows(&[vec![1.0], vec![2.0]])).unwrap();
        assert_eq!(dx.data(), &[0.0, 1.0, 2.0, 0.0]);
    }
}
