mod common;

use leadsheet::encoding::{encode, EncodedSequence, Step, CHORD_BAR, MELODY_BAR, RHYTHM_BAR};
use leadsheet::generate::{
    check_compatible, condition_on_existing, generate_lead_sheet, sample_melody_tokens, sample_one_stage,
    sample_template, GenerateError, SampleConfig,
};
use leadsheet::models::{Model, ModelError, NoBiLstmBaseline, OneStageBaseline, StageOneModel, StageTwoModel};
use leadsheet::train::{init_model, train_model, RunOptions, TrainConfig};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

fn models(seed: u64) -> (StageOneModel<f32>, StageTwoModel<f32>) {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    (StageOneModel::new(12, &mut rng), StageTwoModel::new(12, &mut rng))
}

fn check_template(steps: &[(u16, u16)]) {
    let mut previous_bar = true;
    for &(c, r) in steps {
        assert_eq!(c == CHORD_BAR, r == RHYTHM_BAR, "streams out of step");
        assert!(!(previous_bar && c == CHORD_BAR), "empty bar");
        previous_bar = c == CHORD_BAR;
    }
}

#[test]
fn templates_keep_barlines_in_step() {
    let (s1, _) = models(1);
    for seed in 0..40 {
        let cfg = SampleConfig {
            target_bars: 4,
            seed,
            ..SampleConfig::default()
        };
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let t = sample_template(&s1, &cfg, None, &mut rng).unwrap();
        check_template(&t.steps);
        if !t.truncated {
            assert_eq!(t.bars(), 4);
            assert_eq!(t.steps.last().unwrap().0, CHORD_BAR);
        }
    }
}

#[test]
fn step_cap_truncates() {
    let (s1, _) = models(2);
    let cfg = SampleConfig {
        target_bars: 500,
        max_steps: 30,
        ..SampleConfig::default()
    };
    let t = sample_template(&s1, &cfg, None, &mut ChaCha8Rng::seed_from_u64(0)).unwrap();
    assert!(t.truncated);
    assert_eq!(t.steps.len(), 30);
}

#[test]
fn primer_opens_the_template() {
    let (s1, _) = models(3);
    let primer = &encode(&common::random_sheet(8)).unwrap().steps[..3];
    let cfg = SampleConfig {
        target_bars: 2,
        ..SampleConfig::default()
    };
    let t = sample_template(&s1, &cfg, Some(primer), &mut ChaCha8Rng::seed_from_u64(0)).unwrap();
    let head: Vec<(u16, u16)> = primer.iter().map(|s| (s.chord, s.rhythm)).collect();
    assert_eq!(&t.steps[..3], &head[..]);
    check_template(&t.steps);
    let bad = [Step {
        chord: CHORD_BAR,
        rhythm: 3,
        melody: MELODY_BAR,
    }];
    assert!(matches!(
        sample_template(&s1, &cfg, Some(&bad), &mut ChaCha8Rng::seed_from_u64(0)),
        Err(GenerateError::Desynchronized(0))
    ));
}

#[test]
fn melody_barlines_follow_the_template() {
    let (s1, s2) = models(4);
    for seed in 0..20 {
        let cfg = SampleConfig {
            seed,
            target_bars: 3,
            ..SampleConfig::default()
        };
        let g = generate_lead_sheet(&s1, &s2, &cfg, None).unwrap();
        g.sheet.validate().unwrap();
        let seq = encode(&g.sheet).unwrap();
        for s in &seq.steps {
            assert_eq!(s.chord == CHORD_BAR, s.melody == MELODY_BAR);
        }
    }
    assert!(matches!(
        sample_melody_tokens(&s2, &[(CHORD_BAR, 0)], &SampleConfig::default(), &mut ChaCha8Rng::seed_from_u64(0)),
        Err(GenerateError::Desynchronized(0))
    ));
    assert!(matches!(
        sample_melody_tokens(&s2, &[], &SampleConfig::default(), &mut ChaCha8Rng::seed_from_u64(0)),
        Err(GenerateError::EmptyTemplate)
    ));
}

#[test]
fn cold_sampling_matches_greedy_decoding() {
    let (s1, s2) = models(5);
    let greedy = SampleConfig {
        greedy: true,
        target_bars: 4,
        ..SampleConfig::default()
    };
    let cold = SampleConfig {
        greedy: false,
        tau_melody: 1e-6,
        tau_chord: 1e-6,
        tau_rhythm: 1e-6,
        target_bars: 4,
        max_steps: 200,
        seed: 99,
    };
    let g = generate_lead_sheet(&s1, &s2, &SampleConfig { max_steps: 200, ..greedy.clone() }, None).unwrap();
    let c = generate_lead_sheet(&s1, &s2, &cold, None).unwrap();
    assert_eq!(g.sheet.events, c.sheet.events);
}

#[test]
fn same_seed_same_sheet() {
    let (s1, s2) = models(6);
    let cfg = SampleConfig {
        seed: 17,
        ..SampleConfig::default()
    };
    let a = generate_lead_sheet(&s1, &s2, &cfg, None).unwrap();
    let b = generate_lead_sheet(&s1, &s2, &cfg, None).unwrap();
    assert_eq!(a, b);
    let other = generate_lead_sheet(&s1, &s2, &SampleConfig { seed: 18, ..cfg }, None).unwrap();
    assert_ne!(a.sheet.events, other.sheet.events);
}

#[test]
fn conditioning_keeps_harmony_and_rhythm() {
    let (_, s2) = models(7);
    let mut rng = ChaCha8Rng::seed_from_u64(0);
    let baseline = NoBiLstmBaseline::<f32>::new(8, &mut rng);
    let source = common::random_sheet(21);
    for out in [
        condition_on_existing(&s2, &source, &SampleConfig::default()).unwrap(),
        condition_on_existing(&baseline, &source, &SampleConfig::default()).unwrap(),
    ] {
        assert_eq!(out.template(), source.template());
        assert_eq!(out.title, source.title);
        out.validate().unwrap();
    }
}

#[test]
fn one_stage_sampler_keeps_barlines_in_step() {
    let mut rng = ChaCha8Rng::seed_from_u64(8);
    let m = OneStageBaseline::<f32>::new(10, &mut rng);
    for seed in 0..10 {
        let g = sample_one_stage(&m, &SampleConfig { seed, target_bars: 3, ..SampleConfig::default() }).unwrap();
        g.sheet.validate().unwrap();
        if !g.truncated {
            assert_eq!(g.sheet.bar_count(), 3);
        }
    }
}

#[test]
fn checkpoints_must_share_a_layout() {
    let (s1, s2) = models(9);
    let a = s1.to_checkpoint();
    let mut b = s2.to_checkpoint();
    check_compatible(&a, &b).unwrap();
    b.layout_hash ^= 1;
    assert!(matches!(check_compatible(&a, &b), Err(GenerateError::Incompatible { .. })));
    let mut c = a.clone();
    c.layout_hash ^= 1;
    assert!(matches!(
        check_compatible(&c, &b),
        Err(GenerateError::Model(ModelError::LayoutMismatch { .. }))
    ));
}

#[test]
fn memorized_two_bar_sheet_is_reproduced() {
    let xml = std::fs::read(concat!(env!("CARGO_MANIFEST_DIR"), "/tests/fixtures/two_bar.musicxml")).unwrap();
    let sheet = leadsheet::preprocess::preprocess_document(&xml, "two_bar").unwrap();
    let corpus: Vec<EncodedSequence> = vec![encode(&sheet).unwrap()];
    let cfg = TrainConfig {
        hidden_size: 16,
        batch_size: 1,
        sequence_length: 9,
        learning_rate: 0.02,
        max_steps: 250,
        checkpoint_interval: 0,
        augmentation: false,
        holdout_fraction: 0.0,
        ..TrainConfig::default()
    };
    let dir = tempfile::tempdir().unwrap();
    let opts = RunOptions::new(dir.path(), true);
    let (s1, _) = train_model(init_model(&cfg, |h, r| StageOneModel::<f32>::new(h, r)), &corpus, &cfg, &opts).unwrap();
    let (s2, _) = train_model(init_model(&cfg, |h, r| StageTwoModel::<f32>::new(h, r)), &corpus, &cfg, &opts).unwrap();
    let sample = SampleConfig {
        tau_melody: 0.01,
        tau_chord: 0.01,
        tau_rhythm: 0.01,
        target_bars: 2,
        ..SampleConfig::default()
    };
    let g = generate_lead_sheet(&s1, &s2, &sample, None).unwrap();
    assert_eq!(g.sheet.events, sheet.events);
}
