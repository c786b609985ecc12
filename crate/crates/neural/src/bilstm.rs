use rand::Rng;

use crate::params::join;
use crate::{LstmCellParams, LstmTrace, NeuralError, ParamView, Parameters, Result, Scalar, Tensor2};

/// Bidirectional LSTM layer; output row `t` is `[forward h_t, backward h_t]`.
#[derive(Clone, Debug, PartialEq)]
pub struct BiLstm<F> {
    pub forward: LstmCellParams<F>,
    pub backward: LstmCellParams<F>,
}

#[derive(Clone, Debug)]
pub struct BiLstmTrace<F> {
    reversed_input: Tensor2<F>,
    forward: LstmTrace<F>,
    backward: LstmTrace<F>,
}

/// Reverses each batch item's first `lengths[b]` steps in place of a
/// time-major `(T·B × d)` tensor; rows past an item's length stay put.
/// The permutation is its own inverse.
pub fn reverse_within_lengths<F: Scalar>(xs: &Tensor2<F>, batch: usize, lengths: &[usize]) -> Tensor2<F> {
    let steps = xs.rows() / batch;
    let mut out = xs.clone();
    for (b, &len) in lengths.iter().enumerate() {
        let len = len.min(steps);
        for t in 0..len {
            let src = (len - 1 - t) * batch + b;
            out.row_mut(t * batch + b).copy_from_slice(xs.row(src));
        }
    }
    out
}

impl<F: Scalar> BiLstm<F> {
    pub fn new<R: Rng + ?Sized>(input: usize, hidden: usize, rng: &mut R) -> Self {
        Self {
            forward: LstmCellParams::new(input, hidden, rng),
            backward: LstmCellParams::new(input, hidden, rng),
        }
    }

    pub fn zeros(input: usize, hidden: usize) -> Self {
        Self {
            forward: LstmCellParams::zeros(input, hidden),
            backward: LstmCellParams::zeros(input, hidden),
        }
    }

    pub fn output_size(&self) -> usize {
        self.forward.hidden_size() + self.backward.hidden_size()
    }

    fn check_lengths(xs: &Tensor2<F>, batch: usize, lengths: &[usize]) -> Result<()> {
        if batch == 0 || xs.rows() == 0 {
            return Err(NeuralError::EmptySequence { op: "bilstm forward" });
        }
        let steps = xs.rows() / batch;
        if lengths.len() != batch || lengths.iter().any(|&l| l == 0 || l > steps) {
            return Err(NeuralError::shape(
                "bilstm lengths",
                format!("{batch} lengths in 1..={steps}"),
                format!("{lengths:?}"),
            ));
        }
        Ok(())
    }

    /// `lengths[b]` is the number of valid leading steps of item `b`. The
    /// backward direction starts at each item's own last valid step, so
    /// trailing padding never reaches valid outputs.
    pub fn forward_seq(
        &self,
        xs: &Tensor2<F>,
        batch: usize,
        lengths: &[usize],
    ) -> Result<(Tensor2<F>, BiLstmTrace<F>)> {
        Self::check_lengths(xs, batch, lengths)?;
        let (fwd_out, fwd_trace) = self.forward.forward_seq(xs, batch)?;
        let reversed_input = reverse_within_lengths(xs, batch, lengths);
        let (bwd_rev, bwd_trace) = self.backward.forward_seq(&reversed_input, batch)?;
        let bwd_out = reverse_within_lengths(&bwd_rev, batch, lengths);
        let out = fwd_out.concat_cols(&bwd_out)?;
        Ok((
            out,
            BiLstmTrace {
                reversed_input,
                forward: fwd_trace,
                backward: bwd_trace,
            },
        ))
    }

    pub fn backward_seq(
        &self,
        xs: &Tensor2<F>,
        lengths: &[usize],
        trace: &BiLstmTrace<F>,
        dout: &Tensor2<F>,
        grad: &mut BiLstm<F>,
    ) -> Result<Tensor2<F>> {
        let batch = trace.forward.batch();
        let (d_fwd, d_bwd) = dout.split_cols(self.forward.hidden_size());
        let dx_fwd = self.forward.backward_seq(xs, &trace.forward, &d_fwd, &mut grad.forward)?;
        let d_bwd_rev = reverse_within_lengths(&d_bwd, batch, lengths);
        let dx_bwd_rev =
            self.backward
                .backward_seq(&trace.reversed_input, &trace.backward, &d_bwd_rev, &mut grad.backward)?;
        let dx_bwd = reverse_within_lengths(&dx_bwd_rev, batch, lengths);
        let mut dx = dx_fwd;
        for (a, b) in dx.as_mut_slice().iter_mut().zip(dx_bwd.as_slice()) {
            *a = *a + *b;
        }
        Ok(dx)
    }
}

impl<F: Scalar> Parameters<F> for BiLstm<F> {
    fn named_params(&self, prefix: &str) -> Vec<ParamView<'_, F>> {
        let mut out = self.forward.named_params(&join(prefix, "fwd"));
        out.extend(self.backward.named_params(&join(prefix, "bwd")));
        out
    }

    fn params_mut(&mut self) -> Vec<&mut [F]> {
        let mut out = self.forward.params_mut();
        out.extend(self.backward.params_mut());
        out
    }
}
