//! Uniform access to named parameter tensors, shared by optimizers, gradient
//! checks and checkpoints.

use crate::tensor::Tensor;

pub trait ParamSet {
    /// Every tensor with a stable name, in a fixed order.
    fn tensors(&self) -> Vec<(&'static str, &Tensor)>;

    /// Same order as [`ParamSet::tensors`].
    fn tensors_mut(&mut self) -> Vec<(&'static str, &mut Tensor)>;

    fn param_count(&self) -> usize {
        self.tensors().iter().map(|(_, t)| t.len()).sum()
    }

    fn sum_squares(&self) -> f64 {
        self.tensors().iter().map(|(_, t)| t.sum_squares()).sum()
    }

    fn zero(&mut self) {
        for (_, t) in self.tensors_mut() {
            t.fill(0.0);
        }
    }

    fn zeroed(&self) -> Self
    where
        Self: Clone,
    {
        let mut z = self.clone();
        z.zero();
        z
    }

    fn scale(&mut self, s: f64) {
        for (_, t) in self.tensors_mut() {
            t.scale_in_place(s);
        }
    }
}
