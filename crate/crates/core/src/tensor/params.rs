use super::Tensor;
use std::collections::BTreeMap;

/// Named parameters with matching gradient slots, plus non-trainable buffers
/// (batch-norm running statistics). Iteration is sorted by path.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct ParameterSet {
    values: BTreeMap<String, Tensor>,
    grads: BTreeMap<String, Tensor>,
    buffers: BTreeMap<String, Tensor>,
}

impl ParameterSet {
    pub fn new() -> Self {
        Self::default()
    }

    /// Registers a trainable parameter with a zeroed gradient.
    pub fn insert(&mut self, path: impl Into<String>, value: Tensor) {
        let path = path.into();
        assert!(!self.buffers.contains_key(&path), "{path} is a buffer");
        self.grads.insert(path.clone(), Tensor::zeros(value.shape()));
        self.values.insert(path, value);
    }

    pub fn insert_buffer(&mut self, path: impl Into<String>, value: Tensor) {
        let path = path.into();
        assert!(!self.values.contains_key(&path), "{path} is a parameter");
        self.buffers.insert(path, value);
    }

    pub fn contains(&self, path: &str) -> bool {
        self.values.contains_key(path)
    }

    pub fn value(&self, path: &str) -> &Tensor {
        self.values
            .get(path)
            .unwrap_or_else(|| panic!("unknown parameter {path}"))
    }

    pub fn value_mut(&mut self, path: &str) -> &mut Tensor {
        self.values
            .get_mut(path)
            .unwrap_or_else(|| panic!("unknown parameter {path}"))
    }

    pub fn grad(&self, path: &str) -> &Tensor {
        self.grads
            .get(path)
            .unwrap_or_else(|| panic!("unknown parameter {path}"))
    }

    pub fn grad_mut(&mut self, path: &str) -> &mut Tensor {
        self.grads
            .get_mut(path)
            .unwrap_or_else(|| panic!("unknown parameter {path}"))
    }

    /// Value and gradient of the same parameter, borrowed together.
    pub fn value_and_grad_mut(&mut self, path: &str) -> (&Tensor, &mut Tensor) {
        let v = self
            .values
            .get(path)
            .unwrap_or_else(|| panic!("unknown parameter {path}"));
        let g = self.grads.get_mut(path).expect("gradient slot");
        (v, g)
    }

    /// Moves a gradient out so it can be updated while values are borrowed.
    /// Must be returned with [`ParameterSet::restore_grad`].
    pub(crate) fn take_grad(&mut self, path: &str) -> Tensor {
        self.grads
            .remove(path)
            .unwrap_or_else(|| panic!("unknown parameter {path}"))
    }

    pub(crate) fn restore_grad(&mut self, path: &str, grad: Tensor) {
        self.grads.insert(path.to_string(), grad);
    }

    pub fn buffer(&self, path: &str) -> &Tensor {
        self.buffers
            .get(path)
            .unwrap_or_else(|| panic!("unknown buffer {path}"))
    }

    pub fn buffer_mut(&mut self, path: &str) -> &mut Tensor {
        self.buffers
            .get_mut(path)
            .unwrap_or_else(|| panic!("unknown buffer {path}"))
    }

    pub fn zero_grads(&mut self) {
        for g in self.grads.values_mut() {
            g.fill(0.0);
        }
    }

    pub fn paths(&self) -> impl Iterator<Item = &str> {
        self.values.keys().map(String::as_str)
    }

    pub fn values(&self) -> impl Iterator<Item = (&str, &Tensor)> {
        self.values.iter().map(|(k, v)| (k.as_str(), v))
    }

    pub fn buffers(&self) -> impl Iterator<Item = (&str, &Tensor)> {
        self.buffers.iter().map(|(k, v)| (k.as_str(), v))
    }

    /// `(path, value, grad)` in sorted order, values mutable.
    pub fn entries_mut(&mut self) -> impl Iterator<Item = (&str, &mut Tensor, &Tensor)> {
        self.values
            .iter_mut()
            .zip(self.grads.values())
            .map(|((k, v), g)| (k.as_str(), v, g))
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    /// Total number of trainable scalars.
    pub fn num_scalars(&self) -> usize {
        self.values.values().map(Tensor::len).sum()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn iteration_is_sorted_and_grads_track_shapes() {
        let mut p = ParameterSet::new();
        p.insert("z.w", Tensor::zeros(&[2, 3]));
        p.insert("a.b", Tensor::zeros(&[3]));
        p.insert_buffer("a.running_mean", Tensor::zeros(&[3]));
        assert_eq!(p.paths().collect::<Vec<_>>(), vec!["a.b", "z.w"]);
        assert_eq!(p.grad("z.w").shape(), &[2, 3]);
        assert_eq!(p.num_scalars(), 9);
        p.grad_mut("a.b").fill(1.0);
        p.zero_grads();
        assert!(p.grad("a.b").data().iter().all(|&g| g == 0.0));
    }
}
