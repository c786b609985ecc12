use rand::Rng;

use crate::kernels::axpy;
use crate::params::join;
use crate::{xavier_uniform, NeuralError, ParamView, Parameters, Result, Scalar, Tensor2};

/// Affine layer `y = x Wᵀ + b` with `W` stored `(out × in)`.
#[derive(Clone, Debug, PartialEq)]
pub struct Dense<F> {
    pub weight: Tensor2<F>,
    pub bias: Vec<F>,
}

impl<F: Scalar> Dense<F> {
    pub fn new<R: Rng + ?Sized>(input: usize, output: usize, rng: &mut R) -> Self {
        Self {
            weight: xavier_uniform(output, input, rng),
            bias: vec![F::zero(); output],
        }
    }

    pub fn zeros(input: usize, output: usize) -> Self {
        Self {
            weight: Tensor2::zeros(output, input),
            bias: vec![F::zero(); output],
        }
    }

    pub fn input_size(&self) -> usize {
        self.weight.cols()
    }

    pub fn output_size(&self) -> usize {
        self.weight.rows()
    }

    pub fn forward(&self, x: &Tensor2<F>) -> Result<Tensor2<F>> {
        let mut y = x.matmul_transposed(&self.weight)?;
        for r in 0..y.rows() {
            for (v, b) in y.row_mut(r).iter_mut().zip(&self.bias) {
                *v = *v + *b;
            }
        }
        y.ensure_finite("dense")?;
        Ok(y)
    }

    /// Accumulates parameter gradients into `grad` and returns `dL/dx`.
    pub fn backward(&self, x: &Tensor2<F>, dy: &Tensor2<F>, grad: &mut Dense<F>) -> Result<Tensor2<F>> {
        if dy.cols() != self.output_size() || dy.rows() != x.rows() {
            return Err(NeuralError::shape(
                "dense backward",
                format!("({} x {})", x.rows(), self.output_size()),
                format!("({} x {})", dy.rows(), dy.cols()),
            ));
        }
        grad.weight.add_transposed_product(dy, x)?;
        for r in 0..dy.rows() {
            axpy(F::one(), dy.row(r), &mut grad.bias);
        }
        dy.matmul(&self.weight)
    }
}

impl<F: Scalar> Parameters<F> for Dense<F> {
    fn named_params(&self, prefix: &str) -> Vec<ParamView<'_, F>> {
        vec![
            ParamView {
                name: join(prefix, "weight"),
                shape: vec![self.weight.rows(), self.weight.cols()],
                data: self.weight.as_slice(),
            },
            ParamView {
                name: join(prefix, "bias"),
                shape: vec![self.bias.len()],
                data: &self.bias,
            },
        ]
    }

    fn params_mut(&mut self) -> Vec<&mut [F]> {
        vec![self.weight.as_mut_slice(), &mut self.bias]
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn forward_adds_bias() {
        let layer = Dense {
            weight: Tensor2::new(2, 2, vec![1.0, 2.0, 3.0, 4.0]).unwrap(),
            bias: vec![0.5, -0.5],
        };
        let x = Tensor2::new(1, 2, vec![1.0f64, 1.0]).unwrap();
        assert_eq!(layer.forward(&x).unwrap().as_slice(), &[3.5, 6.5]);
    }

    #[test]
    fn backward_rejects_mismatched_gradient() {
        let layer = Dense::<f64>::zeros(3, 2);
        let mut g = Dense::zeros(3, 2);
        let x = Tensor2::zeros(4, 3);
        let dy = Tensor2::zeros(4, 3);
        assert!(matches!(
            layer.backward(&x, &dy, &mut g),
            Err(NeuralError::ShapeMismatch { .. })
        ));
    }
}
