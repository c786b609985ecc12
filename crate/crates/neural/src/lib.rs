//! Fixed-architecture recurrent network building blocks with hand-written
//! reverse-mode gradients.
//!
//! Sequences are stored time-major in a single [`Tensor2`]: row `t * batch + b`
//! holds step `t` of batch item `b`. Every layer exposes a `forward_seq` that
//! returns outputs plus a trace, and a `backward_seq` that consumes the trace,
//! accumulates parameter gradients and returns input gradients.

pub mod adam;
pub mod checkpoint;
mod dense;
mod error;
mod kernels;
mod lstm;
mod bilstm;
mod loss;
mod params;
mod scalar;
mod tensor;

pub use adam::{clip_global_norm, AdamConfig, AdamState};
pub use bilstm::{reverse_within_lengths, BiLstm, BiLstmTrace};
pub use checkpoint::{Checkpoint, CheckpointError, NamedTensor};
pub use dense::Dense;
pub use error::{NeuralError, Result};
pub use loss::{cross_entropy, softmax_t, softmax_t_in_place, CE_CLIP};
pub use lstm::{LstmCellParams, LstmState, LstmTrace};
pub use params::{xavier_uniform, ParamView, Parameters};
pub use scalar::Scalar;
pub use tensor::Tensor2;
