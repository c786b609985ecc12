use leadsheet_neural::{Dense, LstmCellParams, LstmState, ParamView, Parameters, Scalar};
use rand::Rng;

use super::{head_loss, one_hot, Architecture, Batch, LossReport, LossWeights, Model, ModelResult, TEMPLATE_WIDTH};
use crate::encoding::CHORD_VOCAB;

/// Two stacked LSTMs and one dense layer whose output is cut into chord and
/// rhythm logits.
#[derive(Clone, Debug, PartialEq)]
pub struct StageOneModel<F> {
    pub lstm1: LstmCellParams<F>,
    pub lstm2: LstmCellParams<F>,
    pub head: Dense<F>,
}

/// Recurrent state for step-by-step sampling.
#[derive(Clone, Debug, PartialEq)]
pub struct StageOneState<F> {
    pub l1: LstmState<F>,
    pub l2: LstmState<F>,
}

impl<F: Scalar> StageOneModel<F> {
    pub fn new<R: Rng + ?Sized>(hidden: usize, rng: &mut R) -> Self {
        Self {
            lstm1: LstmCellParams::new(TEMPLATE_WIDTH, hidden, rng),
            lstm2: LstmCellParams::new(hidden, hidden, rng),
            head: Dense::new(hidden, TEMPLATE_WIDTH, rng),
        }
    }

    pub fn initial_state(&self) -> StageOneState<F> {
        let h = self.hidden_size();
        StageOneState {
            l1: LstmState::zeros(h),
            l2: LstmState::zeros(h),
        }
    }

    /// Consumes one (chord, rhythm) step and returns chord logits (49) and
    /// rhythm logits (13) for the next step.
    pub fn step(&self, state: &mut StageOneState<F>, chord: u16, rhythm: u16) -> ModelResult<(Vec<F>, Vec<F>)> {
        let mut x = vec![F::zero(); TEMPLATE_WIDTH];
        x[chord as usize] = F::one();
        x[CHORD_VOCAB + rhythm as usize] = F::one();
        state.l1 = self.lstm1.step(&x, &state.l1)?;
        state.l2 = self.lstm2.step(&state.l1.h, &state.l2)?;
        let h = leadsheet_neural::Tensor2::new(1, state.l2.h.len(), state.l2.h.clone())?;
        let logits = self.head.forward(&h)?.into_vec();
        let (c, r) = logits.split_at(CHORD_VOCAB);
        Ok((c.to_vec(), r.to_vec()))
    }

    /// Teacher-forced logits for every position of `inputs`:
    /// `(chord logits, rhythm logits)` per step.
    pub fn forward_logits(&self, inputs: &[(u16, u16)]) -> ModelResult<Vec<(Vec<F>, Vec<F>)>> {
        let mut state = self.initial_state();
        inputs.iter().map(|&(c, r)| self.step(&mut state, c, r)).collect()
    }
}

impl<F: Scalar> Parameters<F> for StageOneModel<F> {
    fn named_params(&self, prefix: &str) -> Vec<ParamView<'_, F>> {
        let p = |n: &str| if prefix.is_empty() { n.to_string() } else { format!("{prefix}.{n}") };
        let mut out = self.lstm1.named_params(&p("lstm1"));
        out.extend(self.lstm2.named_params(&p("lstm2")));
        out.extend(self.head.named_params(&p("head")));
        out
    }

    fn params_mut(&mut self) -> Vec<&mut [F]> {
        let mut out = self.lstm1.params_mut();
        out.extend(self.lstm2.params_mut());
        out.extend(self.head.params_mut());
        out
    }
}

impl<F: Scalar> Model<F> for StageOneModel<F> {
    const ARCHITECTURE: Architecture = Architecture::StageOne;

    fn hidden_size(&self) -> usize {
        self.lstm1.hidden_size()
    }

    fn zeros_like(&self) -> Self {
        Self::with_hidden(self.hidden_size())
    }

    fn with_hidden(hidden: usize) -> Self {
        Self {
            lstm1: LstmCellParams::zeros(TEMPLATE_WIDTH, hidden),
            lstm2: LstmCellParams::zeros(hidden, hidden),
            head: Dense::zeros(hidden, TEMPLATE_WIDTH),
        }
    }

    fn loss_and_grad(&self, batch: &Batch, weights: &LossWeights, grad: Option<&mut Self>) -> ModelResult<LossReport> {
        let b = batch.batch_size();
        let inputs = batch.inputs_time_major();
        let targets = batch.targets_time_major();
        let n = batch.valid_positions();
        let x = one_hot::<F>(inputs.len(), TEMPLATE_WIDTH, |r, set| {
            if let Some(s) = inputs[r] {
                set(s.chord as usize);
                set(CHORD_VOCAB + s.rhythm as usize);
            }
        });
        let (h1, t1) = self.lstm1.forward_seq(&x, b)?;
        let (h2, t2) = self.lstm2.forward_seq(&h1, b)?;
        let mut dlogits = self.head.forward(&h2)?;

        let chord_t: Vec<Option<usize>> = targets.iter().map(|s| s.map(|s| s.chord as usize)).collect();
        let rhythm_t: Vec<Option<usize>> = targets.iter().map(|s| s.map(|s| s.rhythm as usize)).collect();
        let chord_ce = head_loss(&mut dlogits, 0, CHORD_VOCAB, &chord_t, weights.chord, n)?;
        let rhythm_ce = head_loss(&mut dlogits, CHORD_VOCAB, TEMPLATE_WIDTH, &rhythm_t, weights.rhythm, n)?;

        if let Some(g) = grad {
            let dh2 = self.head.backward(&h2, &dlogits, &mut g.head)?;
            let dh1 = self.lstm2.backward_seq(&h1, &t2, &dh2, &mut g.lstm2)?;
            self.lstm1.backward_seq(&x, &t1, &dh1, &mut g.lstm1)?;
        }
        Ok(LossReport {
            loss: weights.chord * chord_ce + weights.rhythm * rhythm_ce,
            chord_ce: Some(chord_ce),
            rhythm_ce: Some(rhythm_ce),
            melody_ce: None,
            positions: n,
        })
    }
}
