use rand::Rng;

use crate::{Scalar, Tensor2};

/// Read-only view of one named parameter tensor.
#[derive(Debug, Clone)]
pub struct ParamView<'a, F> {
    pub name: String,
    pub shape: Vec<usize>,
    pub data: &'a [F],
}

/// A fixed collection of named parameter tensors.
///
/// `named_params` and `params_mut` must enumerate tensors in the same order;
/// optimizers and checkpoints rely on that alignment.
pub trait Parameters<F: Scalar> {
    fn named_params(&self, prefix: &str) -> Vec<ParamView<'_, F>>;
    fn params_mut(&mut self) -> Vec<&mut [F]>;

    fn param_count(&self) -> usize {
        self.named_params("").iter().map(|p| p.data.len()).sum()
    }

    fn zero_params(&mut self) {
        for p in self.params_mut() {
            p.iter_mut().for_each(|v| *v = F::zero());
        }
    }
}

pub(crate) fn join(prefix: &str, name: &str) -> String {
    if prefix.is_empty() {
        name.to_string()
    } else {
        format!("{prefix}.{name}")
    }
}

/// Uniform in `[-s, s]` with `s = sqrt(6 / (fan_in + fan_out))`.
pub fn xavier_uniform<F: Scalar, R: Rng + ?Sized>(rows: usize, cols: usize, rng: &mut R) -> Tensor2<F> {
    let s = (6.0 / (rows + cols) as f64).sqrt();
    Tensor2::from_fn(rows, cols, |_, _| F::from_f64(rng.gen_range(-s..=s)))
}
