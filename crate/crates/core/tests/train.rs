mod common;

use std::fs;

use leadsheet::encoding::EncodedSequence;
use leadsheet::models::{Architecture, Model, StageOneModel, StageTwoModel};
use leadsheet::train::{
    augment_batch, augmentation_rng, holdout_split, init_model, loss_weights, read_metrics, train_model, train_variant,
    BatchStream, RunOptions, TrainConfig,
};
use leadsheet_neural::Checkpoint;

fn toy_config() -> TrainConfig {
    TrainConfig {
        hidden_size: 16,
        batch_size: 4,
        sequence_length: 12,
        max_steps: 6,
        checkpoint_interval: 1,
        seed: 11,
        holdout_fraction: 0.2,
        ..TrainConfig::default()
    }
}

#[test]
fn zero_steps_writes_only_the_initial_model() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = TrainConfig {
        max_steps: 0,
        ..toy_config()
    };
    let opts = RunOptions::new(dir.path(), true);
    let summary = train_variant(Architecture::StageOne, &common::toy_corpus(5), &cfg, &opts).unwrap();
    assert!(summary.checkpoints.is_empty());
    assert_eq!(fs::read_to_string(&summary.metrics).unwrap(), "");
    let saved = Checkpoint::from_bytes(&fs::read(&summary.final_checkpoint).unwrap()).unwrap();
    let fresh = init_model(&cfg, |h, r| StageOneModel::<f32>::new(h, r)).to_checkpoint();
    assert_eq!(saved, fresh);
}

#[test]
fn deterministic_runs_are_bit_identical() {
    let corpus = common::toy_corpus(5);
    let cfg = toy_config();
    let run = |arch| {
        let dir = tempfile::tempdir().unwrap();
        let s = train_variant(arch, &corpus, &cfg, &RunOptions::new(dir.path(), true)).unwrap();
        let metrics = fs::read(&s.metrics).unwrap();
        let ckpts: Vec<Vec<u8>> = s.checkpoints.iter().chain([&s.final_checkpoint]).map(|p| fs::read(p).unwrap()).collect();
        (metrics, ckpts)
    };
    for arch in Architecture::ALL {
        let a = run(arch);
        let b = run(arch);
        assert!(!a.0.is_empty());
        assert_eq!(a, b, "{}", arch.name());
    }
}

#[test]
fn logged_loss_is_reproducible_from_checkpoints() {
    let corpus = common::toy_corpus(5);
    let cfg = toy_config();
    let dir = tempfile::tempdir().unwrap();
    let opts = RunOptions::new(dir.path(), true);
    let summary = train_variant(Architecture::StageTwo, &corpus, &cfg, &opts).unwrap();
    let metrics = read_metrics(&summary.metrics).unwrap();
    assert_eq!(metrics.len(), cfg.max_steps);

    let (train_idx, _) = holdout_split(corpus.len(), cfg.holdout_fraction, cfg.seed);
    let train_set: Vec<EncodedSequence> = train_idx.iter().map(|&i| corpus[i].clone()).collect();
    let mut stream = BatchStream::new(&train_set, &cfg, cfg.seed).unwrap();
    let mut aug = augmentation_rng(cfg.seed);
    let weights = loss_weights(Architecture::StageTwo, &cfg).unwrap();
    for step in 1..=cfg.max_steps {
        let mut batch = stream.next_batch();
        augment_batch(&mut batch, &mut aug);
        if step == 1 {
            continue;
        }
        let ckpt = Checkpoint::from_bytes(&fs::read(opts.checkpoint_path(Architecture::StageTwo, step - 1)).unwrap()).unwrap();
        let model = StageTwoModel::<f32>::from_checkpoint(&ckpt).unwrap();
        let loss = model.loss(&batch, &weights).unwrap().loss;
        let logged = metrics[step - 1].loss;
        assert!((loss - logged).abs() < 1e-5, "step {step}: {loss} vs {logged}");
    }
}

#[test]
fn toy_corpus_is_memorized() {
    let corpus = common::toy_corpus(5);
    let cfg = TrainConfig {
        hidden_size: 32,
        batch_size: 5,
        sequence_length: 24,
        learning_rate: 0.01,
        max_steps: 600,
        checkpoint_interval: 0,
        augmentation: false,
        holdout_fraction: 0.0,
        ..TrainConfig::default()
    };
    for arch in [Architecture::StageOne, Architecture::StageTwo] {
        let dir = tempfile::tempdir().unwrap();
        let s = train_variant(arch, &corpus, &cfg, &RunOptions::new(dir.path(), true)).unwrap();
        let m = read_metrics(&s.metrics).unwrap();
        let (first, last) = (m[0].loss, m.last().unwrap().loss);
        eprintln!("{}: {first:.4} -> {last:.4}", arch.name());
        assert!(last < 0.1 * first, "{}: {first} -> {last}", arch.name());
    }
}

#[test]
fn stage_one_model_trains_through_the_generic_entry_point() {
    let corpus = common::toy_corpus(3);
    let cfg = TrainConfig {
        holdout_fraction: 0.0,
        max_steps: 2,
        ..toy_config()
    };
    let dir = tempfile::tempdir().unwrap();
    let model = init_model(&cfg, |h, r| StageOneModel::<f32>::new(h, r));
    let (trained, summary) = train_model(model.clone(), &corpus, &cfg, &RunOptions::new(dir.path(), true)).unwrap();
    assert_ne!(trained, model);
    assert_eq!(summary.steps, 2);
    assert_eq!(summary.heldout_sheets, 0);
}
