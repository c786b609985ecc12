//! The four recurrent architectures: the chord+rhythm template model, the
//! template-conditioned melody model, and the two baselines.

mod batch;
mod melody;
mod one_stage;
mod stage_one;

pub use batch::{Batch, BatchError};
pub use melody::{MelodyModel, MelodyState, NoBiLstmBaseline, StageTwoModel};
pub use one_stage::{JointLogits, OneStageBaseline, OneStageState};
pub use stage_one::{StageOneModel, StageOneState};

use leadsheet_neural::{
    cross_entropy, softmax_t_in_place, Checkpoint, CheckpointError, NeuralError, Parameters, Scalar, Tensor2,
};
use thiserror::Error;

use crate::encoding::{layout_hash, CHORD_VOCAB, MELODY_VOCAB, RHYTHM_VOCAB};

/// Hidden width used throughout the full-size models.
pub const DEFAULT_HIDDEN: usize = 512;
/// Chord + rhythm one-hot width.
pub const TEMPLATE_WIDTH: usize = CHORD_VOCAB + RHYTHM_VOCAB;
/// Chord + rhythm + melody one-hot width.
pub const JOINT_WIDTH: usize = TEMPLATE_WIDTH + MELODY_VOCAB;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum Architecture {
    StageOne = 1,
    StageTwo = 2,
    OneStage = 3,
    NoBiLstm = 4,
}

impl Architecture {
    pub const ALL: [Architecture; 4] = [
        Architecture::StageOne,
        Architecture::StageTwo,
        Architecture::OneStage,
        Architecture::NoBiLstm,
    ];

    pub fn tag(self) -> u8 {
        self as u8
    }

    pub fn from_tag(tag: u8) -> Option<Self> {
        Self::ALL.into_iter().find(|a| a.tag() == tag)
    }

    /// Name used on the command line.
    pub fn name(self) -> &'static str {
        match self {
            Architecture::StageOne => "stage1",
            Architecture::StageTwo => "stage2",
            Architecture::OneStage => "one-stage",
            Architecture::NoBiLstm => "no-bilstm",
        }
    }

    pub fn from_name(name: &str) -> Option<Self> {
        Self::ALL.into_iter().find(|a| a.name() == name)
    }

    /// Number of trainable scalars at hidden width `h`.
    pub fn parameter_count(self, h: usize) -> usize {
        let lstm = |input: usize| 4 * h * input + 4 * h * h + 4 * h;
        let dense = |input: usize, output: usize| input * output + output;
        match self {
            Architecture::StageOne => lstm(TEMPLATE_WIDTH) + lstm(h) + dense(h, TEMPLATE_WIDTH),
            Architecture::StageTwo => {
                2 * lstm(TEMPLATE_WIDTH) + 2 * lstm(2 * h) + lstm(2 * h + MELODY_VOCAB) + lstm(h) + dense(h, MELODY_VOCAB)
            }
            Architecture::OneStage => lstm(JOINT_WIDTH) + 2 * lstm(h) + dense(h, JOINT_WIDTH),
            Architecture::NoBiLstm => {
                lstm(TEMPLATE_WIDTH) + lstm(h) + lstm(h + MELODY_VOCAB) + lstm(h) + dense(h, MELODY_VOCAB)
            }
        }
    }
}

#[derive(Debug, Error)]
pub enum ModelError {
    #[error(transparent)]
    Neural(#[from] NeuralError),
    #[error(transparent)]
    Checkpoint(#[from] CheckpointError),
    #[error("checkpoint vocabulary layout {found:#018x} differs from this build's {expected:#018x}")]
    LayoutMismatch { expected: u64, found: u64 },
    #[error("checkpoint architecture tag {found} is not {expected:?}")]
    WrongArchitecture { expected: Architecture, found: u8 },
    #[error("checkpoint lacks tensor {0:?}")]
    MissingTensor(String),
    #[error("loss weight {0} outside [0, 1]")]
    BadLossWeight(f64),
    #[error("template and melody lengths differ ({template} vs {melody})")]
    LengthMismatch { template: usize, melody: usize },
}

pub type ModelResult<T> = std::result::Result<T, ModelError>;

/// Per-head weights of the training objective.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct LossWeights {
    pub chord: f64,
    pub rhythm: f64,
    pub melody: f64,
}

impl LossWeights {
    /// `alpha` on chords and `1 - alpha` on rhythms.
    pub fn stage_one(alpha: f64) -> ModelResult<Self> {
        if !(0.0..=1.0).contains(&alpha) {
            return Err(ModelError::BadLossWeight(alpha));
        }
        Ok(Self {
            chord: alpha,
            rhythm: 1.0 - alpha,
            melody: 0.0,
        })
    }

    pub fn melody_only() -> Self {
        Self {
            chord: 0.0,
            rhythm: 0.0,
            melody: 1.0,
        }
    }

    pub fn thirds() -> Self {
        Self {
            chord: 1.0 / 3.0,
            rhythm: 1.0 / 3.0,
            melody: 1.0 / 3.0,
        }
    }

    pub fn joint(chord: f64, rhythm: f64, melody: f64) -> ModelResult<Self> {
        for w in [chord, rhythm, melody] {
            if !(0.0..=1.0).contains(&w) {
                return Err(ModelError::BadLossWeight(w));
            }
        }
        Ok(Self { chord, rhythm, melody })
    }
}

/// Mean cross-entropy per head over unmasked positions, and their weighted sum.
#[derive(Clone, Copy, Debug, Default, PartialEq)]
pub struct LossReport {
    pub loss: f64,
    pub chord_ce: Option<f64>,
    pub rhythm_ce: Option<f64>,
    pub melody_ce: Option<f64>,
    pub positions: usize,
}

/// Shared interface of every trainable architecture.
pub trait Model<F: Scalar>: Parameters<F> + Clone + Sized {
    const ARCHITECTURE: Architecture;

    fn hidden_size(&self) -> usize;

    /// A zero-valued model of the same shape, used as a gradient buffer.
    fn zeros_like(&self) -> Self;

    /// Weighted objective on `batch`; when `grad` is given the gradient of
    /// that objective is accumulated into it.
    fn loss_and_grad(&self, batch: &Batch, weights: &LossWeights, grad: Option<&mut Self>) -> ModelResult<LossReport>;

    fn loss(&self, batch: &Batch, weights: &LossWeights) -> ModelResult<LossReport> {
        self.loss_and_grad(batch, weights, None)
    }

    /// Zero model whose shapes follow `hidden`; used when restoring.
    fn with_hidden(hidden: usize) -> Self;

    fn to_checkpoint(&self) -> Checkpoint {
        Checkpoint::from_params(Self::ARCHITECTURE.tag(), layout_hash(), self)
    }

    /// Restores a model, checking architecture tag, vocabulary layout and
    /// every tensor shape.
    fn from_checkpoint(ckpt: &Checkpoint) -> ModelResult<Self> {
        if ckpt.architecture != Self::ARCHITECTURE.tag() {
            return Err(ModelError::WrongArchitecture {
                expected: Self::ARCHITECTURE,
                found: ckpt.architecture,
            });
        }
        let expected = layout_hash();
        if ckpt.layout_hash != expected {
            return Err(ModelError::LayoutMismatch {
                expected,
                found: ckpt.layout_hash,
            });
        }
        let probe = "lstm2.u";
        let u = ckpt.tensor(probe).ok_or_else(|| ModelError::MissingTensor(probe.into()))?;
        let hidden = u.shape.get(1).copied().unwrap_or(0);
        let mut model = Self::with_hidden(hidden);
        ckpt.load_into(Self::ARCHITECTURE.tag(), &mut model)?;
        Ok(model)
    }
}

/// Writes one-hot rows for `(offset + index)` entries; `None` leaves the row
/// zero.
pub(crate) fn one_hot<F: Scalar>(rows: usize, width: usize, mut hot: impl FnMut(usize, &mut dyn FnMut(usize))) -> Tensor2<F> {
    let mut t = Tensor2::zeros(rows, width);
    for r in 0..rows {
        let row = t.row_mut(r);
        hot(r, &mut |c| row[c] = F::one());
    }
    t
}

/// Replaces `logits` with `scale * (softmax - onehot(target))` and returns the
/// cross-entropy of the softmax.
pub(crate) fn softmax_ce_grad<F: Scalar>(logits: &mut [F], target: usize, scale: F) -> ModelResult<f64> {
    softmax_t_in_place(logits, F::one())?;
    let ce = cross_entropy(logits, target)?.as_f64();
    for (j, v) in logits.iter_mut().enumerate() {
        let y = if j == target { F::one() } else { F::zero() };
        *v = (*v - y) * scale;
    }
    Ok(ce)
}

/// Accumulates the weighted cross-entropy of one softmax head over the valid
/// rows of `logits[.., lo..hi]`, overwriting those columns with the gradient.
pub(crate) fn head_loss<F: Scalar>(
    logits: &mut Tensor2<F>,
    lo: usize,
    hi: usize,
    targets: &[Option<usize>],
    weight: f64,
    positions: usize,
) -> ModelResult<f64> {
    let scale = F::from_f64(weight / positions as f64);
    let mut total = 0.0;
    for (r, target) in targets.iter().enumerate() {
        let row = &mut logits.row_mut(r)[lo..hi];
        match target {
            Some(t) => total += softmax_ce_grad(row, *t, scale)?,
            None => row.iter_mut().for_each(|v| *v = F::zero()),
        }
    }
    Ok(total / positions as f64)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn parameter_counts_at_full_width() {
        // 4h(in + h + 1) per LSTM, out(in + 1) per dense
        assert_eq!(Architecture::StageOne.parameter_count(512), 1_177_600 + 2_099_200 + 31_806);
        assert_eq!(
            Architecture::StageTwo.parameter_count(512),
            2 * 1_177_600 + 2 * 3_147_776 + 3_414_016 + 2_099_200 + 66_690
        );
        assert_eq!(Architecture::OneStage.parameter_count(512), 1_443_840 + 2 * 2_099_200 + 98_496);
        assert_eq!(
            Architecture::NoBiLstm.parameter_count(512),
            1_177_600 + 2_099_200 + 2_365_440 + 2_099_200 + 66_690
        );
    }

    #[test]
    fn tags_and_names_round_trip() {
        for a in Architecture::ALL {
            assert_eq!(Architecture::from_tag(a.tag()), Some(a));
            assert_eq!(Architecture::from_name(a.name()), Some(a));
        }
        assert_eq!(Architecture::StageOne.tag(), 1);
        assert_eq!(Architecture::NoBiLstm.tag(), 4);
        assert_eq!(Architecture::from_tag(0), None);
    }

    #[test]
    fn alpha_is_range_checked() {
        assert!(LossWeights::stage_one(1.2).is_err());
        assert!(LossWeights::stage_one(-0.1).is_err());
        let w = LossWeights::stage_one(0.3).unwrap();
        assert!((w.rhythm - 0.7).abs() < 1e-15);
    }

    #[test]
    fn fused_gradient_is_p_minus_onehot() {
        let mut z = vec![1.0f64, 2.0, 0.5];
        let ce = softmax_ce_grad(&mut z, 1, 1.0).unwrap();
        let e: Vec<f64> = [1.0f64, 2.0, 0.5].iter().map(|v| v.exp()).collect();
        let s: f64 = e.iter().sum();
        assert!((ce - (s / e[1]).ln()).abs() < 1e-9);
        assert!((z[0] - e[0] / s).abs() < 1e-12);
        assert!((z[1] - (e[1] / s - 1.0)).abs() < 1e-12);
        assert!(z.iter().sum::<f64>().abs() < 1e-12);
    }
}
