//! Windowed batching, transposition augmentation and the optimization loop.

mod batches;
mod config;

pub use batches::{
    augment_batch, holdout_split, make_batches, training_steps, window_shifts, BatchStream, BatchingError,
};
pub use config::{parse_entries, ConfigError, Entry, TrainConfig};
pub(crate) use config::{parse_flag, parse_value};

use std::fs::{self, File};
use std::io::{self, BufWriter, Write};
use std::path::{Path, PathBuf};
use std::time::Instant;

use leadsheet_neural::{clip_global_norm, AdamConfig, AdamState, NeuralError};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::encoding::EncodedSequence;
use crate::models::{
    Architecture, Batch, LossWeights, Model, ModelError, NoBiLstmBaseline, OneStageBaseline, StageOneModel,
    StageTwoModel,
};

#[derive(Debug, Error)]
pub enum TrainError {
    #[error(transparent)]
    Config(#[from] ConfigError),
    #[error(transparent)]
    Batching(#[from] BatchingError),
    #[error(transparent)]
    Model(ModelError),
    #[error("{path}: {source}")]
    Io { path: PathBuf, source: io::Error },
    #[error("numeric fault at step {step}; last good checkpoint: {}", last_good.as_ref().map_or("none".to_string(), |p| p.display().to_string()))]
    NumericFault { step: usize, last_good: Option<PathBuf> },
}

fn io_err(path: &Path) -> impl FnOnce(io::Error) -> TrainError + '_ {
    move |source| TrainError::Io {
        path: path.to_path_buf(),
        source,
    }
}

/// One line of the metrics log.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub struct MetricRecord {
    pub step: usize,
    pub wall_ms: u64,
    pub loss: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub chord_ce: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub rhythm_ce: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub melody_ce: Option<f64>,
    pub grad_norm: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub heldout_loss: Option<f64>,
}

#[derive(Clone, Debug, PartialEq)]
pub struct TrainSummary {
    pub architecture: Architecture,
    pub steps: usize,
    pub checkpoints: Vec<PathBuf>,
    pub final_checkpoint: PathBuf,
    pub metrics: PathBuf,
    pub final_loss: Option<f64>,
    pub heldout_sheets: usize,
}

/// Where a run writes and whether timings are recorded.
#[derive(Clone, Debug)]
pub struct RunOptions {
    pub out_dir: PathBuf,
    /// Record zero wall time so identical runs write identical files.
    pub deterministic: bool,
}

impl RunOptions {
    pub fn new(out_dir: impl Into<PathBuf>, deterministic: bool) -> Self {
        Self {
            out_dir: out_dir.into(),
            deterministic,
        }
    }

    pub fn checkpoint_path(&self, arch: Architecture, step: usize) -> PathBuf {
        self.out_dir.join(format!("{}-step{step:06}.lsgm", arch.name()))
    }

    pub fn final_checkpoint_path(&self, arch: Architecture) -> PathBuf {
        self.out_dir.join(format!("{}-final.lsgm", arch.name()))
    }

    pub fn metrics_path(&self, arch: Architecture) -> PathBuf {
        self.out_dir.join(format!("{}-metrics.jsonl", arch.name()))
    }
}

/// Objective weights a config implies for an architecture.
pub fn loss_weights(arch: Architecture, config: &TrainConfig) -> Result<LossWeights, TrainError> {
    match arch {
        Architecture::StageOne => LossWeights::stage_one(config.alpha).map_err(TrainError::Model),
        Architecture::StageTwo | Architecture::NoBiLstm => Ok(LossWeights::melody_only()),
        Architecture::OneStage => {
            LossWeights::joint(config.chord_weight, config.rhythm_weight, config.melody_weight).map_err(TrainError::Model)
        }
    }
}

/// Seeded initialization of a fresh model.
pub fn init_model<M: Model<f32>>(config: &TrainConfig, build: impl FnOnce(usize, &mut ChaCha8Rng) -> M) -> M {
    let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
    build(config.hidden_size, &mut rng)
}

/// The augmentation generator of a run.
pub fn augmentation_rng(seed: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(3);
    rng
}

/// Trains `arch` from a seeded initialization.
pub fn train_variant(
    arch: Architecture,
    corpus: &[EncodedSequence],
    config: &TrainConfig,
    options: &RunOptions,
) -> Result<TrainSummary, TrainError> {
    match arch {
        Architecture::StageOne => {
            let m = init_model(config, |h, r| StageOneModel::new(h, r));
            train_model(m, corpus, config, options).map(|r| r.1)
        }
        Architecture::StageTwo => {
            let m = init_model(config, |h, r| StageTwoModel::new(h, r));
            train_model(m, corpus, config, options).map(|r| r.1)
        }
        Architecture::OneStage => {
            let m = init_model(config, |h, r| OneStageBaseline::new(h, r));
            train_model(m, corpus, config, options).map(|r| r.1)
        }
        Architecture::NoBiLstm => {
            let m = init_model(config, |h, r| NoBiLstmBaseline::new(h, r));
            train_model(m, corpus, config, options).map(|r| r.1)
        }
    }
}

fn write_checkpoint<M: Model<f32>>(model: &M, path: &Path) -> Result<(), TrainError> {
    let tmp = path.with_extension("lsgm.tmp");
    let bytes = model.to_checkpoint().to_bytes();
    fs::write(&tmp, bytes).map_err(io_err(&tmp))?;
    fs::rename(&tmp, path).map_err(io_err(path))
}

/// First window of each held-out sheet, at most one batch of them.
fn heldout_batch(corpus: &[EncodedSequence], heldout: &[usize], config: &TrainConfig) -> Option<Batch> {
    let window = config.sequence_length + 1;
    let items: Vec<_> = heldout
        .iter()
        .map(|&i| {
            let mut s = training_steps(&corpus[i], config.prepend_start);
            s.truncate(window);
            s
        })
        .filter(|s| s.len() >= 2)
        .take(config.batch_size)
        .collect();
    if items.is_empty() {
        None
    } else {
        Batch::new(window, items).ok()
    }
}

fn is_numeric(e: &ModelError) -> bool {
    matches!(e, ModelError::Neural(NeuralError::NumericFault { .. }))
}

/// Forward, loss, backward, global-norm clipping and Adam for
/// `config.max_steps` batches. Checkpoints every `checkpoint_interval` steps
/// and at the end; one metrics line per step.
pub fn train_model<M: Model<f32>>(
    mut model: M,
    corpus: &[EncodedSequence],
    config: &TrainConfig,
    options: &RunOptions,
) -> Result<(M, TrainSummary), TrainError> {
    config.validate()?;
    let arch = M::ARCHITECTURE;
    let weights = loss_weights(arch, config)?;
    if corpus.is_empty() {
        return Err(BatchingError::EmptyCorpus.into());
    }
    let (train_idx, heldout_idx) = holdout_split(corpus.len(), config.holdout_fraction, config.seed);
    let train_set: Vec<EncodedSequence> = train_idx.iter().map(|&i| corpus[i].clone()).collect();
    let heldout = heldout_batch(corpus, &heldout_idx, config);
    let mut batches = BatchStream::new(&train_set, config, config.seed)?;
    let mut aug_rng = augmentation_rng(config.seed);

    fs::create_dir_all(&options.out_dir).map_err(io_err(&options.out_dir))?;
    let metrics_path = options.metrics_path(arch);
    let file = File::create(&metrics_path).map_err(io_err(&metrics_path))?;
    let mut metrics = BufWriter::new(file);

    let sizes: Vec<usize> = model.params_mut().iter().map(|p| p.len()).collect();
    let mut adam = AdamState::<f32>::new(AdamConfig::with_learning_rate(config.learning_rate), sizes);
    let mut grad = model.zeros_like();
    let mut checkpoints = Vec::new();
    let mut last_good: Option<PathBuf> = None;
    let mut final_loss = None;
    let started = Instant::now();

    for step in 1..=config.max_steps {
        let mut batch = batches.next_batch();
        if config.augmentation {
            augment_batch(&mut batch, &mut aug_rng);
        }
        grad.zero_params();
        let fault = |metrics: &mut BufWriter<File>, last_good: &Option<PathBuf>| {
            let _ = metrics.flush();
            TrainError::NumericFault {
                step,
                last_good: last_good.clone(),
            }
        };
        let report = match model.loss_and_grad(&batch, &weights, Some(&mut grad)) {
            Ok(r) if r.loss.is_finite() => r,
            Ok(_) => return Err(fault(&mut metrics, &last_good)),
            Err(e) if is_numeric(&e) => return Err(fault(&mut metrics, &last_good)),
            Err(e) => return Err(TrainError::Model(e)),
        };
        let mut g = grad.params_mut();
        let norm = clip_global_norm(&mut g, config.clip_norm);
        if !norm.is_finite() {
            return Err(fault(&mut metrics, &last_good));
        }
        let g: Vec<&[f32]> = g.into_iter().map(|s| &*s).collect();
        adam.update(&mut model.params_mut(), &g)
            .map_err(|e| TrainError::Model(e.into()))?;
        if model.params_mut().iter().any(|p| p.iter().any(|v| !v.is_finite())) {
            return Err(fault(&mut metrics, &last_good));
        }

        let checkpoint_now = config.checkpoint_interval > 0 && step % config.checkpoint_interval == 0;
        let heldout_loss = if checkpoint_now || step == config.max_steps {
            match &heldout {
                Some(b) => Some(model.loss(b, &weights).map_err(TrainError::Model)?.loss),
                None => None,
            }
        } else {
            None
        };
        let record = MetricRecord {
            step,
            wall_ms: if options.deterministic {
                0
            } else {
                started.elapsed().as_millis() as u64
            },
            loss: report.loss,
            chord_ce: report.chord_ce,
            rhythm_ce: report.rhythm_ce,
            melody_ce: report.melody_ce,
            grad_norm: norm,
            heldout_loss,
        };
        let line = serde_json::to_string(&record).expect("metric records serialize");
        writeln!(metrics, "{line}").map_err(io_err(&metrics_path))?;
        final_loss = Some(report.loss);
        log::debug!("{} step {step}: loss {:.5}", arch.name(), report.loss);

        if checkpoint_now {
            let path = options.checkpoint_path(arch, step);
            write_checkpoint(&model, &path)?;
            checkpoints.push(path.clone());
            last_good = Some(path);
        }
    }
    metrics.flush().map_err(io_err(&metrics_path))?;
    let final_checkpoint = options.final_checkpoint_path(arch);
    write_checkpoint(&model, &final_checkpoint)?;
    Ok((
        model,
        TrainSummary {
            architecture: arch,
            steps: config.max_steps,
            checkpoints,
            final_checkpoint,
            metrics: metrics_path,
            final_loss,
            heldout_sheets: heldout_idx.len(),
        },
    ))
}

/// Reads a metrics log back.
pub fn read_metrics(path: &Path) -> Result<Vec<MetricRecord>, TrainError> {
    let text = fs::read_to_string(path).map_err(io_err(path))?;
    text.lines()
        .filter(|l| !l.trim().is_empty())
        .map(|l| {
            serde_json::from_str(l).map_err(|e| TrainError::Io {
                path: path.to_path_buf(),
                source: io::Error::new(io::ErrorKind::InvalidData, e),
            })
        })
        .collect()
}
