use rand::Rng;

use crate::kernels::{axpy, dot, sigmoid};
use crate::params::join;
use crate::{xavier_uniform, NeuralError, ParamView, Parameters, Result, Scalar, Tensor2};

/// One LSTM layer. Gate blocks are stacked in the order
/// `[input, forget, cell-candidate, output]`, each `hidden` rows tall.
#[derive(Clone, Debug, PartialEq)]
pub struct LstmCellParams<F> {
    /// Input weights, `(4·hidden × input)`.
    pub w: Tensor2<F>,
    /// Recurrent weights, `(4·hidden × hidden)`.
    pub u: Tensor2<F>,
    /// Bias, `4·hidden`.
    pub b: Vec<F>,
}

#[derive(Clone, Debug, PartialEq)]
pub struct LstmState<F> {
    pub h: Vec<F>,
    pub c: Vec<F>,
}

impl<F: Scalar> LstmState<F> {
    pub fn zeros(hidden: usize) -> Self {
        Self {
            h: vec![F::zero(); hidden],
            c: vec![F::zero(); hidden],
        }
    }
}

/// Activations recorded by [`LstmCellParams::forward_seq`].
#[derive(Clone, Debug)]
pub struct LstmTrace<F> {
    batch: usize,
    /// Post-activation gates `[i, f, g, o]`, `(T·B × 4H)`.
    gates: Tensor2<F>,
    cells: Tensor2<F>,
    tanh_cells: Tensor2<F>,
    outputs: Tensor2<F>,
}

impl<F: Scalar> LstmTrace<F> {
    pub fn outputs(&self) -> &Tensor2<F> {
        &self.outputs
    }

    pub fn cells(&self) -> &Tensor2<F> {
        &self.cells
    }

    pub fn batch(&self) -> usize {
        self.batch
    }
}

/// Applies the gate nonlinearities to preactivations `z` in place and writes
/// the new cell, `tanh(cell)` and hidden vectors.
#[inline]
fn activate<F: Scalar>(z: &mut [F], c_prev: Option<&[F]>, c: &mut [F], tc: &mut [F], h: &mut [F]) {
    let hidden = c.len();
    let (zi, rest) = z.split_at_mut(hidden);
    let (zf, rest) = rest.split_at_mut(hidden);
    let (zg, zo) = rest.split_at_mut(hidden);
    for k in 0..hidden {
        let i = sigmoid(zi[k]);
        let f = sigmoid(zf[k]);
        let g = zg[k].tanh();
        let o = sigmoid(zo[k]);
        zi[k] = i;
        zf[k] = f;
        zg[k] = g;
        zo[k] = o;
        let cp = c_prev.map_or(F::zero(), |cp| cp[k]);
        c[k] = f * cp + i * g;
        tc[k] = c[k].tanh();
        h[k] = o * tc[k];
    }
}

impl<F: Scalar> LstmCellParams<F> {
    /// Xavier-uniform weights, zero bias except the forget block, which starts at 1.
    pub fn new<R: Rng + ?Sized>(input: usize, hidden: usize, rng: &mut R) -> Self {
        let mut b = vec![F::zero(); 4 * hidden];
        b[hidden..2 * hidden].iter_mut().for_each(|v| *v = F::one());
        Self {
            w: xavier_uniform(4 * hidden, input, rng),
            u: xavier_uniform(4 * hidden, hidden, rng),
            b,
        }
    }

    pub fn zeros(input: usize, hidden: usize) -> Self {
        Self {
            w: Tensor2::zeros(4 * hidden, input),
            u: Tensor2::zeros(4 * hidden, hidden),
            b: vec![F::zero(); 4 * hidden],
        }
    }

    pub fn input_size(&self) -> usize {
        self.w.cols()
    }

    pub fn hidden_size(&self) -> usize {
        self.u.cols()
    }

    /// Single recurrence step on one vector.
    pub fn step(&self, x: &[F], state: &LstmState<F>) -> Result<LstmState<F>> {
        let hidden = self.hidden_size();
        if x.len() != self.input_size() {
            return Err(NeuralError::shape("lstm_step input", self.input_size(), x.len()));
        }
        if state.h.len() != hidden || state.c.len() != hidden {
            return Err(NeuralError::shape(
                "lstm_step state",
                hidden,
                format!("h={}, c={}", state.h.len(), state.c.len()),
            ));
        }
        let mut z: Vec<F> = (0..4 * hidden)
            .map(|j| self.b[j] + dot(self.w.row(j), x) + dot(self.u.row(j), &state.h))
            .collect();
        let mut next = LstmState::zeros(hidden);
        let mut tc = vec![F::zero(); hidden];
        activate(&mut z, Some(&state.c), &mut next.c, &mut tc, &mut next.h);
        if next.h.iter().chain(&next.c).any(|v| !v.is_finite()) {
            return Err(NeuralError::NumericFault { op: "lstm_step" });
        }
        Ok(next)
    }

    /// Runs the layer over a time-major sequence `(T·B × input)` from a zero state.
    pub fn forward_seq(&self, xs: &Tensor2<F>, batch: usize) -> Result<(Tensor2<F>, LstmTrace<F>)> {
        let hidden = self.hidden_size();
        if xs.cols() != self.input_size() {
            return Err(NeuralError::shape("lstm forward", self.input_size(), xs.cols()));
        }
        if batch == 0 || xs.rows() == 0 {
            return Err(NeuralError::EmptySequence { op: "lstm forward" });
        }
        if xs.rows() % batch != 0 {
            return Err(NeuralError::shape(
                "lstm forward",
                format!("rows divisible by batch {batch}"),
                xs.rows(),
            ));
        }
        let steps = xs.rows() / batch;
        let mut gates = xs.matmul_transposed(&self.w)?;
        let mut cells = Tensor2::zeros(xs.rows(), hidden);
        let mut tanh_cells = Tensor2::zeros(xs.rows(), hidden);
        let mut outputs = Tensor2::zeros(xs.rows(), hidden);
        let mut h_prev = vec![F::zero(); hidden];
        let mut c_prev = vec![F::zero(); hidden];
        for t in 0..steps {
            for b in 0..batch {
                let r = t * batch + b;
                let z = gates.row_mut(r);
                for (zj, bj) in z.iter_mut().zip(&self.b) {
                    *zj = *zj + *bj;
                }
                if t > 0 {
                    let prev = r - batch;
                    h_prev.copy_from_slice(outputs.row(prev));
                    c_prev.copy_from_slice(cells.row(prev));
                    for (j, zj) in z.iter_mut().enumerate() {
                        *zj = *zj + dot(self.u.row(j), &h_prev);
                    }
                }
                let cp = if t > 0 { Some(c_prev.as_slice()) } else { None };
                activate(z, cp, cells.row_mut(r), tanh_cells.row_mut(r), outputs.row_mut(r));
            }
        }
        outputs.ensure_finite("lstm forward")?;
        cells.ensure_finite("lstm forward")?;
        let trace = LstmTrace {
            batch,
            gates,
            cells,
            tanh_cells,
            outputs: outputs.clone(),
        };
        Ok((outputs, trace))
    }

    /// Backpropagation through time. `dhs` is `dL/dh_t` for every output row.
    /// Accumulates into `grad` and returns `dL/dx`.
    pub fn backward_seq(
        &self,
        xs: &Tensor2<F>,
        trace: &LstmTrace<F>,
        dhs: &Tensor2<F>,
        grad: &mut LstmCellParams<F>,
    ) -> Result<Tensor2<F>> {
        let hidden = self.hidden_size();
        let batch = trace.batch;
        if dhs.shape() != trace.outputs.shape() {
            return Err(NeuralError::shape(
                "lstm backward",
                format!("{:?}", trace.outputs.shape()),
                format!("{:?}", dhs.shape()),
            ));
        }
        let steps = dhs.rows() / batch;
        let mut dz = Tensor2::zeros(dhs.rows(), 4 * hidden);
        let mut dh_next = Tensor2::<F>::zeros(batch, hidden);
        let mut dc_next = Tensor2::<F>::zeros(batch, hidden);
        let one = F::one();
        for t in (0..steps).rev() {
            for b in 0..batch {
                let r = t * batch + b;
                let gate = trace.gates.row(r);
                let tc = trace.tanh_cells.row(r);
                let dh_out = dhs.row(r);
                let dzr = dz.row_mut(r);
                for k in 0..hidden {
                    let i = gate[k];
                    let f = gate[hidden + k];
                    let g = gate[2 * hidden + k];
                    let o = gate[3 * hidden + k];
                    let cp = if t > 0 {
                        trace.cells.get(r - batch, k)
                    } else {
                        F::zero()
                    };
                    let dh = dh_out[k] + dh_next.get(b, k);
                    let dc = dh * o * (one - tc[k] * tc[k]) + dc_next.get(b, k);
                    dzr[k] = dc * g * i * (one - i);
                    dzr[hidden + k] = dc * cp * f * (one - f);
                    dzr[2 * hidden + k] = dc * i * (one - g * g);
                    dzr[3 * hidden + k] = dh * tc[k] * o * (one - o);
                    dc_next.set(b, k, dc * f);
                }
            }
            dh_next.fill_zero();
            if t > 0 {
                for b in 0..batch {
                    let r = t * batch + b;
                    let dzr = dz.row(r);
                    let h_prev = trace.outputs.row(r - batch);
                    let dhn = dh_next.row_mut(b);
                    for (j, &g) in dzr.iter().enumerate() {
                        axpy(g, self.u.row(j), dhn);
                        axpy(g, h_prev, grad.u.row_mut(j));
                    }
                }
            }
        }
        grad.w.add_transposed_product(&dz, xs)?;
        for r in 0..dz.rows() {
            axpy(one, dz.row(r), &mut grad.b);
        }
        dz.matmul(&self.w)
    }
}

impl<F: Scalar> Parameters<F> for LstmCellParams<F> {
    fn named_params(&self, prefix: &str) -> Vec<ParamView<'_, F>> {
        vec![
            ParamView {
                name: join(prefix, "w"),
                shape: vec![self.w.rows(), self.w.cols()],
                data: self.w.as_slice(),
            },
            ParamView {
                name: join(prefix, "u"),
                shape: vec![self.u.rows(), self.u.cols()],
                data: self.u.as_slice(),
            },
            ParamView {
                name: join(prefix, "b"),
                shape: vec![self.b.len()],
                data: &self.b,
            },
        ]
    }

    fn params_mut(&mut self) -> Vec<&mut [F]> {
        vec![self.w.as_mut_slice(), self.u.as_mut_slice(), &mut self.b]
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;

    #[test]
    fn forget_bias_starts_at_one() {
        let mut rng = rand::rngs::StdRng::seed_from_u64(1);
        let cell = LstmCellParams::<f32>::new(3, 4, &mut rng);
        assert_eq!(&cell.b[4..8], &[1.0; 4]);
        assert!(cell.b[..4].iter().chain(&cell.b[8..]).all(|&v| v == 0.0));
    }

    #[test]
    fn sequence_forward_matches_repeated_steps() {
        let mut rng = rand::rngs::StdRng::seed_from_u64(7);
        let cell = LstmCellParams::<f64>::new(3, 5, &mut rng);
        let xs = xavier_uniform::<f64, _>(4, 3, &mut rng);
        let (hs, _) = cell.forward_seq(&xs, 1).unwrap();
        let mut state = LstmState::zeros(5);
        for t in 0..4 {
            state = cell.step(xs.row(t), &state).unwrap();
            for (a, b) in state.h.iter().zip(hs.row(t)) {
                assert!((a - b).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn step_rejects_wrong_input_width() {
        let cell = LstmCellParams::<f32>::zeros(3, 2);
        assert!(cell.step(&[0.0; 2], &LstmState::zeros(2)).is_err());
    }

    #[test]
    fn empty_sequence_is_rejected() {
        let cell = LstmCellParams::<f32>::zeros(3, 2);
        assert_eq!(
            cell.forward_seq(&Tensor2::zeros(0, 3), 1).unwrap_err(),
            NeuralError::EmptySequence { op: "lstm forward" }
        );
    }
}
