use leadsheet_neural::{Dense, LstmCellParams, LstmState, ParamView, Parameters, Scalar, Tensor2};
use rand::Rng;

use super::{head_loss, one_hot, Architecture, Batch, LossReport, LossWeights, Model, ModelResult, JOINT_WIDTH, TEMPLATE_WIDTH};
use crate::encoding::CHORD_VOCAB;

/// Three stacked LSTMs predicting chord, rhythm and melody jointly from the
/// concatenation of all three previous symbols.
#[derive(Clone, Debug, PartialEq)]
pub struct OneStageBaseline<F> {
    pub lstm1: LstmCellParams<F>,
    pub lstm2: LstmCellParams<F>,
    pub lstm3: LstmCellParams<F>,
    pub head: Dense<F>,
}

#[derive(Clone, Debug, PartialEq)]
pub struct OneStageState<F> {
    pub layers: [LstmState<F>; 3],
}

/// Logits of one joint prediction.
#[derive(Clone, Debug, PartialEq)]
pub struct JointLogits<F> {
    pub chord: Vec<F>,
    pub rhythm: Vec<F>,
    pub melody: Vec<F>,
}

impl<F: Scalar> OneStageBaseline<F> {
    pub fn new<R: Rng + ?Sized>(hidden: usize, rng: &mut R) -> Self {
        Self {
            lstm1: LstmCellParams::new(JOINT_WIDTH, hidden, rng),
            lstm2: LstmCellParams::new(hidden, hidden, rng),
            lstm3: LstmCellParams::new(hidden, hidden, rng),
            head: Dense::new(hidden, JOINT_WIDTH, rng),
        }
    }

    pub fn initial_state(&self) -> OneStageState<F> {
        let h = self.hidden_size();
        OneStageState {
            layers: [LstmState::zeros(h), LstmState::zeros(h), LstmState::zeros(h)],
        }
    }

    /// Consumes one full step and returns logits for the next one.
    pub fn step(&self, state: &mut OneStageState<F>, chord: u16, rhythm: u16, melody: u16) -> ModelResult<JointLogits<F>> {
        let mut x = vec![F::zero(); JOINT_WIDTH];
        x[chord as usize] = F::one();
        x[CHORD_VOCAB + rhythm as usize] = F::one();
        x[TEMPLATE_WIDTH + melody as usize] = F::one();
        state.layers[0] = self.lstm1.step(&x, &state.layers[0])?;
        state.layers[1] = self.lstm2.step(&state.layers[0].h, &state.layers[1])?;
        state.layers[2] = self.lstm3.step(&state.layers[1].h, &state.layers[2])?;
        let h = Tensor2::new(1, state.layers[2].h.len(), state.layers[2].h.clone())?;
        let logits = self.head.forward(&h)?.into_vec();
        Ok(JointLogits {
            chord: logits[..CHORD_VOCAB].to_vec(),
            rhythm: logits[CHORD_VOCAB..TEMPLATE_WIDTH].to_vec(),
            melody: logits[TEMPLATE_WIDTH..].to_vec(),
        })
    }
}

impl<F: Scalar> Parameters<F> for OneStageBaseline<F> {
    fn named_params(&self, prefix: &str) -> Vec<ParamView<'_, F>> {
        let p = |n: &str| if prefix.is_empty() { n.to_string() } else { format!("{prefix}.{n}") };
        let mut out = self.lstm1.named_params(&p("lstm1"));
        out.extend(self.lstm2.named_params(&p("lstm2")));
        out.extend(self.lstm3.named_params(&p("lstm3")));
        out.extend(self.head.named_params(&p("head")));
        out
    }

    fn params_mut(&mut self) -> Vec<&mut [F]> {
        let mut out = self.lstm1.params_mut();
        out.extend(self.lstm2.params_mut());
        out.extend(self.lstm3.params_mut());
        out.extend(self.head.params_mut());
        out
    }
}

impl<F: Scalar> Model<F> for OneStageBaseline<F> {
    const ARCHITECTURE: Architecture = Architecture::OneStage;

    fn hidden_size(&self) -> usize {
        self.lstm1.hidden_size()
    }

    fn zeros_like(&self) -> Self {
        Self::with_hidden(self.hidden_size())
    }

    fn with_hidden(hidden: usize) -> Self {
        Self {
            lstm1: LstmCellParams::zeros(JOINT_WIDTH, hidden),
            lstm2: LstmCellParams::zeros(hidden, hidden),
            lstm3: LstmCellParams::zeros(hidden, hidden),
            head: Dense::zeros(hidden, JOINT_WIDTH),
        }
    }

    fn loss_and_grad(&self, batch: &Batch, weights: &LossWeights, grad: Option<&mut Self>) -> ModelResult<LossReport> {
        let b = batch.batch_size();
        let inputs = batch.inputs_time_major();
        let targets = batch.targets_time_major();
        let n = batch.valid_positions();
        let x = one_hot::<F>(inputs.len(), JOINT_WIDTH, |r, set| {
            if let Some(s) = inputs[r] {
                set(s.chord as usize);
                set(CHORD_VOCAB + s.rhythm as usize);
                set(TEMPLATE_WIDTH + s.melody as usize);
            }
        });
        let (h1, t1) = self.lstm1.forward_seq(&x, b)?;
        let (h2, t2) = self.lstm2.forward_seq(&h1, b)?;
        let (h3, t3) = self.lstm3.forward_seq(&h2, b)?;
        let mut dlogits = self.head.forward(&h3)?;

        let pick = |f: fn(&crate::encoding::Step) -> u16| -> Vec<Option<usize>> {
            targets.iter().map(|s| s.as_ref().map(|s| f(s) as usize)).collect()
        };
        let chord_ce = head_loss(&mut dlogits, 0, CHORD_VOCAB, &pick(|s| s.chord), weights.chord, n)?;
        let rhythm_ce = head_loss(&mut dlogits, CHORD_VOCAB, TEMPLATE_WIDTH, &pick(|s| s.rhythm), weights.rhythm, n)?;
        let melody_ce = head_loss(&mut dlogits, TEMPLATE_WIDTH, JOINT_WIDTH, &pick(|s| s.melody), weights.melody, n)?;

        if let Some(g) = grad {
            let dh3 = self.head.backward(&h3, &dlogits, &mut g.head)?;
            let dh2 = self.lstm3.backward_seq(&h2, &t3, &dh3, &mut g.lstm3)?;
            let dh1 = self.lstm2.backward_seq(&h1, &t2, &dh2, &mut g.lstm2)?;
            self.lstm1.backward_seq(&x, &t1, &dh1, &mut g.lstm1)?;
        }
        Ok(LossReport {
            loss: weights.chord * chord_ce + weights.rhythm * rhythm_ce + weights.melody * melody_ce,
            chord_ce: Some(chord_ce),
            rhythm_ce: Some(rhythm_ce),
            melody_ce: Some(melody_ce),
            positions: n,
        })
    }
}
