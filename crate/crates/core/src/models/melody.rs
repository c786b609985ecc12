use leadsheet_neural::{BiLstm, Dense, LstmCellParams, LstmState, ParamView, Parameters, Scalar, Tensor2};
use rand::Rng;

use super::{
    head_loss, one_hot, Architecture, Batch, LossReport, LossWeights, Model, ModelError, ModelResult, TEMPLATE_WIDTH,
};
use crate::encoding::{CHORD_VOCAB, MELODY_VOCAB};

/// Melody generator conditioned on a whole template through two
/// bidirectional layers, so every prediction can see the full harmony.
#[derive(Clone, Debug, PartialEq)]
pub struct StageTwoModel<F> {
    pub bilstm1: BiLstm<F>,
    pub bilstm2: BiLstm<F>,
    pub lstm1: LstmCellParams<F>,
    pub lstm2: LstmCellParams<F>,
    pub head: Dense<F>,
}

/// The same melody stack fed by two forward-only template layers; a
/// prediction sees the template only up to its own step.
#[derive(Clone, Debug, PartialEq)]
pub struct NoBiLstmBaseline<F> {
    pub enc1: LstmCellParams<F>,
    pub enc2: LstmCellParams<F>,
    pub lstm1: LstmCellParams<F>,
    pub lstm2: LstmCellParams<F>,
    pub head: Dense<F>,
}

#[derive(Clone, Debug, PartialEq)]
pub struct MelodyState<F> {
    pub l1: LstmState<F>,
    pub l2: LstmState<F>,
}

/// Inference interface shared by the two template-conditioned models.
pub trait MelodyModel<F: Scalar> {
    /// Encodes template steps `(chord, rhythm)`; row `t` conditions the
    /// melody prediction for template step `t`.
    fn context(&self, template: &[(u16, u16)]) -> ModelResult<Tensor2<F>>;

    fn melody_layers(&self) -> (&LstmCellParams<F>, &LstmCellParams<F>, &Dense<F>);

    fn melody_state(&self) -> MelodyState<F> {
        let h = self.melody_layers().0.hidden_size();
        MelodyState {
            l1: LstmState::zeros(h),
            l2: LstmState::zeros(h),
        }
    }

    /// Consumes the previous melody token with the context row of the step
    /// being predicted and returns its 130 logits.
    fn melody_step(&self, state: &mut MelodyState<F>, context: &[F], previous: u16) -> ModelResult<Vec<F>> {
        let (l1, l2, head) = self.melody_layers();
        let mut x = Vec::with_capacity(context.len() + MELODY_VOCAB);
        x.extend_from_slice(context);
        x.resize(context.len() + MELODY_VOCAB, F::zero());
        x[context.len() + previous as usize] = F::one();
        state.l1 = l1.step(&x, &state.l1)?;
        state.l2 = l2.step(&state.l1.h, &state.l2)?;
        let h = Tensor2::new(1, state.l2.h.len(), state.l2.h.clone())?;
        Ok(head.forward(&h)?.into_vec())
    }

    /// Teacher-forced logits: step `t` sees the whole template and melody
    /// tokens `previous[..=t]`.
    fn melody_logits(&self, template: &[(u16, u16)], previous: &[u16]) -> ModelResult<Vec<Vec<F>>> {
        if template.len() != previous.len() {
            return Err(ModelError::LengthMismatch {
                template: template.len(),
                melody: previous.len(),
            });
        }
        let ctx = self.context(template)?;
        let mut state = self.melody_state();
        (0..template.len())
            .map(|t| self.melody_step(&mut state, ctx.row(t), previous[t]))
            .collect()
    }
}

fn template_one_hot<F: Scalar>(template: &[(u16, u16)]) -> Tensor2<F> {
    one_hot(template.len(), TEMPLATE_WIDTH, |r, set| {
        set(template[r].0 as usize);
        set(CHORD_VOCAB + template[r].1 as usize);
    })
}

/// Template targets and melody inputs of a batch, time-major.
struct MelodyBatch<F> {
    template: Tensor2<F>,
    melody_in: Tensor2<F>,
    targets: Vec<Option<usize>>,
    lengths: Vec<usize>,
    positions: usize,
}

impl<F: Scalar> MelodyBatch<F> {
    fn new(batch: &Batch) -> Self {
        let inputs = batch.inputs_time_major();
        let targets = batch.targets_time_major();
        let template = one_hot(targets.len(), TEMPLATE_WIDTH, |r, set| {
            if let Some(s) = targets[r] {
                set(s.chord as usize);
                set(CHORD_VOCAB + s.rhythm as usize);
            }
        });
        let melody_in = one_hot(inputs.len(), MELODY_VOCAB, |r, set| {
            if let Some(s) = inputs[r] {
                set(s.melody as usize);
            }
        });
        Self {
            template,
            melody_in,
            targets: targets.iter().map(|s| s.map(|s| s.melody as usize)).collect(),
            lengths: batch.lengths(),
            positions: batch.valid_positions(),
        }
    }
}

/// Melody stack forward, loss and backward. Returns the report and, when
/// gradients are requested, `dL/dcontext`.
fn melody_stack_loss<F: Scalar>(
    layers: (&LstmCellParams<F>, &LstmCellParams<F>, &Dense<F>),
    grads: Option<(&mut LstmCellParams<F>, &mut LstmCellParams<F>, &mut Dense<F>)>,
    context: &Tensor2<F>,
    mb: &MelodyBatch<F>,
    batch: usize,
    weight: f64,
) -> ModelResult<(LossReport, Option<Tensor2<F>>)> {
    let (l1, l2, head) = layers;
    let z = context.concat_cols(&mb.melody_in)?;
    let (h1, t1) = l1.forward_seq(&z, batch)?;
    let (h2, t2) = l2.forward_seq(&h1, batch)?;
    let mut dlogits = head.forward(&h2)?;
    let ce = head_loss(&mut dlogits, 0, MELODY_VOCAB, &mb.targets, weight, mb.positions)?;
    let report = LossReport {
        loss: weight * ce,
        chord_ce: None,
        rhythm_ce: None,
        melody_ce: Some(ce),
        positions: mb.positions,
    };
    let dctx = match grads {
        Some((g1, g2, gh)) => {
            let dh2 = head.backward(&h2, &dlogits, gh)?;
            let dh1 = l2.backward_seq(&h1, &t2, &dh2, g2)?;
            let dz = l1.backward_seq(&z, &t1, &dh1, g1)?;
            Some(dz.split_cols(context.cols()).0)
        }
        None => None,
    };
    Ok((report, dctx))
}

fn prefixed(prefix: &str, name: &str) -> String {
    if prefix.is_empty() {
        name.to_string()
    } else {
        format!("{prefix}.{name}")
    }
}

impl<F: Scalar> StageTwoModel<F> {
    pub fn new<R: Rng + ?Sized>(hidden: usize, rng: &mut R) -> Self {
        Self {
            bilstm1: BiLstm::new(TEMPLATE_WIDTH, hidden, rng),
            bilstm2: BiLstm::new(2 * hidden, hidden, rng),
            lstm1: LstmCellParams::new(2 * hidden + MELODY_VOCAB, hidden, rng),
            lstm2: LstmCellParams::new(hidden, hidden, rng),
            head: Dense::new(hidden, MELODY_VOCAB, rng),
        }
    }
}

impl<F: Scalar> MelodyModel<F> for StageTwoModel<F> {
    fn context(&self, template: &[(u16, u16)]) -> ModelResult<Tensor2<F>> {
        let x = template_one_hot::<F>(template);
        let lengths = [template.len()];
        let (a1, _) = self.bilstm1.forward_seq(&x, 1, &lengths)?;
        let (a2, _) = self.bilstm2.forward_seq(&a1, 1, &lengths)?;
        Ok(a2)
    }

    fn melody_layers(&self) -> (&LstmCellParams<F>, &LstmCellParams<F>, &Dense<F>) {
        (&self.lstm1, &self.lstm2, &self.head)
    }
}

impl<F: Scalar> Parameters<F> for StageTwoModel<F> {
    fn named_params(&self, prefix: &str) -> Vec<ParamView<'_, F>> {
        let mut out = self.bilstm1.named_params(&prefixed(prefix, "bilstm1"));
        out.extend(self.bilstm2.named_params(&prefixed(prefix, "bilstm2")));
        out.extend(self.lstm1.named_params(&prefixed(prefix, "lstm1")));
        out.extend(self.lstm2.named_params(&prefixed(prefix, "lstm2")));
        out.extend(self.head.named_params(&prefixed(prefix, "head")));
        out
    }

    fn params_mut(&mut self) -> Vec<&mut [F]> {
        let mut out = self.bilstm1.params_mut();
        out.extend(self.bilstm2.params_mut());
        out.extend(self.lstm1.params_mut());
        out.extend(self.lstm2.params_mut());
        out.extend(self.head.params_mut());
        out
    }
}

impl<F: Scalar> Model<F> for StageTwoModel<F> {
    const ARCHITECTURE: Architecture = Architecture::StageTwo;

    fn hidden_size(&self) -> usize {
        self.lstm1.hidden_size()
    }

    fn zeros_like(&self) -> Self {
        Self::with_hidden(self.hidden_size())
    }

    fn with_hidden(hidden: usize) -> Self {
        Self {
            bilstm1: BiLstm::zeros(TEMPLATE_WIDTH, hidden),
            bilstm2: BiLstm::zeros(2 * hidden, hidden),
            lstm1: LstmCellParams::zeros(2 * hidden + MELODY_VOCAB, hidden),
            lstm2: LstmCellParams::zeros(hidden, hidden),
            head: Dense::zeros(hidden, MELODY_VOCAB),
        }
    }

    fn loss_and_grad(&self, batch: &Batch, weights: &LossWeights, grad: Option<&mut Self>) -> ModelResult<LossReport> {
        let b = batch.batch_size();
        let mb = MelodyBatch::<F>::new(batch);
        let (a1, bt1) = self.bilstm1.forward_seq(&mb.template, b, &mb.lengths)?;
        let (a2, bt2) = self.bilstm2.forward_seq(&a1, b, &mb.lengths)?;
        let layers = (&self.lstm1, &self.lstm2, &self.head);
        match grad {
            None => Ok(melody_stack_loss(layers, None, &a2, &mb, b, weights.melody)?.0),
            Some(g) => {
                let gs = (&mut g.lstm1, &mut g.lstm2, &mut g.head);
                let (report, dctx) = melody_stack_loss(layers, Some(gs), &a2, &mb, b, weights.melody)?;
                let dctx = dctx.expect("gradient requested");
                let da1 = self.bilstm2.backward_seq(&a1, &mb.lengths, &bt2, &dctx, &mut g.bilstm2)?;
                self.bilstm1
                    .backward_seq(&mb.template, &mb.lengths, &bt1, &da1, &mut g.bilstm1)?;
                Ok(report)
            }
        }
    }
}

impl<F: Scalar> NoBiLstmBaseline<F> {
    pub fn new<R: Rng + ?Sized>(hidden: usize, rng: &mut R) -> Self {
        Self {
            enc1: LstmCellParams::new(TEMPLATE_WIDTH, hidden, rng),
            enc2: LstmCellParams::new(hidden, hidden, rng),
            lstm1: LstmCellParams::new(hidden + MELODY_VOCAB, hidden, rng),
            lstm2: LstmCellParams::new(hidden, hidden, rng),
            head: Dense::new(hidden, MELODY_VOCAB, rng),
        }
    }
}

impl<F: Scalar> MelodyModel<F> for NoBiLstmBaseline<F> {
    fn context(&self, template: &[(u16, u16)]) -> ModelResult<Tensor2<F>> {
        let x = template_one_hot::<F>(template);
        let (e1, _) = self.enc1.forward_seq(&x, 1)?;
        let (e2, _) = self.enc2.forward_seq(&e1, 1)?;
        Ok(e2)
    }

    fn melody_layers(&self) -> (&LstmCellParams<F>, &LstmCellParams<F>, &Dense<F>) {
        (&self.lstm1, &self.lstm2, &self.head)
    }
}

impl<F: Scalar> Parameters<F> for NoBiLstmBaseline<F> {
    fn named_params(&self, prefix: &str) -> Vec<ParamView<'_, F>> {
        let mut out = self.enc1.named_params(&prefixed(prefix, "enc1"));
        out.extend(self.enc2.named_params(&prefixed(prefix, "enc2")));
        out.extend(self.lstm1.named_params(&prefixed(prefix, "lstm1")));
        out.extend(self.lstm2.named_params(&prefixed(prefix, "lstm2")));
        out.extend(self.head.named_params(&prefixed(prefix, "head")));
        out
    }

    fn params_mut(&mut self) -> Vec<&mut [F]> {
        let mut out = self.enc1.params_mut();
        out.extend(self.enc2.params_mut());
        out.extend(self.lstm1.params_mut());
        out.extend(self.lstm2.params_mut());
        out.extend(self.head.params_mut());
        out
    }
}

impl<F: Scalar> Model<F> for NoBiLstmBaseline<F> {
    const ARCHITECTURE: Architecture = Architecture::NoBiLstm;

    fn hidden_size(&self) -> usize {
        self.lstm1.hidden_size()
    }

    fn zeros_like(&self) -> Self {
        Self::with_hidden(self.hidden_size())
    }

    fn with_hidden(hidden: usize) -> Self {
        Self {
            enc1: LstmCellParams::zeros(TEMPLATE_WIDTH, hidden),
            enc2: LstmCellParams::zeros(hidden, hidden),
            lstm1: LstmCellParams::zeros(hidden + MELODY_VOCAB, hidden),
            lstm2: LstmCellParams::zeros(hidden, hidden),
            head: Dense::zeros(hidden, MELODY_VOCAB),
        }
    }

    fn loss_and_grad(&self, batch: &Batch, weights: &LossWeights, grad: Option<&mut Self>) -> ModelResult<LossReport> {
        let b = batch.batch_size();
        let mb = MelodyBatch::<F>::new(batch);
        let (e1, t1) = self.enc1.forward_seq(&mb.template, b)?;
        let (e2, t2) = self.enc2.forward_seq(&e1, b)?;
        let layers = (&self.lstm1, &self.lstm2, &self.head);
        match grad {
            None => Ok(melody_stack_loss(layers, None, &e2, &mb, b, weights.melody)?.0),
            Some(g) => {
                let gs = (&mut g.lstm1, &mut g.lstm2, &mut g.head);
                let (report, dctx) = melody_stack_loss(layers, Some(gs), &e2, &mb, b, weights.melody)?;
                let dctx = dctx.expect("gradient requested");
                let de1 = self.enc2.backward_seq(&e1, &t2, &dctx, &mut g.enc2)?;
                self.enc1.backward_seq(&mb.template, &t1, &de1, &mut g.enc1)?;
                Ok(report)
            }
        }
    }
}
