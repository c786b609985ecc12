//! Sampling: a chord+rhythm template from the first stage, a melody on top
//! of it from the second, with barlines kept aligned across the streams.

use std::fmt::Write as _;
use std::str::FromStr;

use leadsheet_neural::{softmax_t_in_place, Checkpoint, Scalar, Tensor2};
use rand::distributions::{Distribution, WeightedIndex};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use sha2::{Digest, Sha256};
use thiserror::Error;

use crate::encoding::{
    decode, encode, layout_hash, EncodedSequence, EncodingError, Step, CHORD_BAR, MELODY_BAR, RHYTHM_BAR,
};
use crate::models::{MelodyModel, ModelError, OneStageBaseline, StageOneModel};
use crate::score::LeadSheet;
use crate::train::{parse_entries, parse_flag, parse_value, ConfigError};

#[derive(Debug, Error)]
pub enum GenerateError {
    #[error(transparent)]
    Model(#[from] ModelError),
    #[error(transparent)]
    Encoding(#[from] EncodingError),
    #[error("template step {0} has a barline in only one of its streams")]
    Desynchronized(usize),
    #[error("template is empty")]
    EmptyTemplate,
    #[error("checkpoints disagree on vocabulary layout ({first:#018x} vs {second:#018x})")]
    Incompatible { first: u64, second: u64 },
}

#[derive(Clone, Debug, PartialEq)]
pub struct SampleConfig {
    pub tau_melody: f64,
    pub tau_chord: f64,
    pub tau_rhythm: f64,
    pub target_bars: usize,
    /// Cap on template length.
    pub max_steps: usize,
    pub seed: u64,
    /// Take the most probable symbol instead of sampling.
    pub greedy: bool,
}

impl Default for SampleConfig {
    fn default() -> Self {
        Self {
            tau_melody: 0.9,
            tau_chord: 1.0,
            tau_rhythm: 1.0,
            target_bars: 8,
            max_steps: 1000,
            seed: 0,
            greedy: false,
        }
    }
}

impl SampleConfig {
    pub fn validate(&self) -> Result<(), ConfigError> {
        for (name, tau) in [
            ("tau-melody", self.tau_melody),
            ("tau-chord", self.tau_chord),
            ("tau-rhythm", self.tau_rhythm),
        ] {
            if !(tau > 0.0 && tau.is_finite()) {
                return Err(ConfigError::Invalid(format!("{name} must be positive, got {tau}")));
            }
        }
        if self.target_bars == 0 {
            return Err(ConfigError::Invalid("target-bars must be at least 1".into()));
        }
        if self.max_steps == 0 {
            return Err(ConfigError::Invalid("max-steps must be at least 1".into()));
        }
        Ok(())
    }
}

impl FromStr for SampleConfig {
    type Err = ConfigError;

    fn from_str(text: &str) -> Result<Self, ConfigError> {
        let mut c = SampleConfig::default();
        for e in parse_entries(text)? {
            match e.key.as_str() {
                "tau-melody" => c.tau_melody = parse_value(&e)?,
                "tau-chord" => c.tau_chord = parse_value(&e)?,
                "tau-rhythm" => c.tau_rhythm = parse_value(&e)?,
                "target-bars" => c.target_bars = parse_value(&e)?,
                "max-steps" => c.max_steps = parse_value(&e)?,
                "seed" => c.seed = parse_value(&e)?,
                "greedy" => c.greedy = parse_flag(&e)?,
                _ => {
                    return Err(ConfigError::UnknownKey {
                        line: e.line,
                        key: e.key,
                    })
                }
            }
        }
        c.validate()?;
        Ok(c)
    }
}

/// Picks an index from `logits`, skipping masked entries: the argmax when
/// `tau` is `None`, otherwise a draw from the tempered softmax over the
/// unmasked entries.
pub fn choose<F: Scalar, R: Rng + ?Sized>(
    logits: &[F],
    masked: impl Fn(usize) -> bool,
    tau: Option<f64>,
    rng: &mut R,
) -> Result<usize, ModelError> {
    let mut z: Vec<F> = logits
        .iter()
        .enumerate()
        .map(|(i, &v)| if masked(i) { F::neg_infinity() } else { v })
        .collect();
    let Some(tau) = tau else {
        let mut best = None;
        for (i, &v) in z.iter().enumerate() {
            if v > F::neg_infinity() && best.map_or(true, |(_, b)| v > b) {
                best = Some((i, v));
            }
        }
        return Ok(best.expect("at least one unmasked entry").0);
    };
    softmax_t_in_place(&mut z, F::from_f64(tau))?;
    let weights: Vec<f64> = z.iter().map(|p| p.as_f64()).collect();
    match WeightedIndex::new(&weights) {
        Ok(dist) => Ok(dist.sample(rng)),
        // all mass underflowed onto one entry
        Err(_) => choose(logits, masked, None, rng),
    }
}

/// A sampled chord+rhythm template.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Template {
    pub steps: Vec<(u16, u16)>,
    /// The step cap was hit before the requested number of bars.
    pub truncated: bool,
}

impl Template {
    pub fn bars(&self) -> usize {
        self.steps.iter().filter(|s| s.0 == CHORD_BAR).count()
    }
}

fn tau(config: &SampleConfig, t: f64) -> Option<f64> {
    (!config.greedy).then_some(t)
}

/// Samples chord then rhythm at each step. A chord barline forces the rhythm
/// barline; otherwise the rhythm barline is masked. A barline is never drawn
/// right after another barline or the start token. Stops after
/// `target_bars` barlines or `max_steps` steps.
pub fn sample_template<F: Scalar, R: Rng + ?Sized>(
    model: &StageOneModel<F>,
    config: &SampleConfig,
    primer: Option<&[Step]>,
    rng: &mut R,
) -> Result<Template, GenerateError> {
    let mut state = model.initial_state();
    let mut steps: Vec<(u16, u16)> = Vec::new();
    let (mut chord_logits, mut rhythm_logits) = model.step(&mut state, CHORD_BAR, RHYTHM_BAR)?;
    for (i, s) in primer.unwrap_or(&[]).iter().enumerate() {
        if (s.chord == CHORD_BAR) != (s.rhythm == RHYTHM_BAR) {
            return Err(GenerateError::Desynchronized(i));
        }
        steps.push((s.chord, s.rhythm));
        (chord_logits, rhythm_logits) = model.step(&mut state, s.chord, s.rhythm)?;
    }
    let mut bars = steps.iter().filter(|s| s.0 == CHORD_BAR).count();
    while bars < config.target_bars {
        if steps.len() >= config.max_steps {
            log::warn!("template truncated at {} steps with {bars} of {} bars", steps.len(), config.target_bars);
            return Ok(Template { steps, truncated: true });
        }
        let after_bar = steps.last().map_or(true, |s| s.0 == CHORD_BAR);
        let chord = choose(
            &chord_logits,
            |i| after_bar && i == CHORD_BAR as usize,
            tau(config, config.tau_chord),
            rng,
        )? as u16;
        let rhythm = if chord == CHORD_BAR {
            bars += 1;
            RHYTHM_BAR
        } else {
            choose(&rhythm_logits, |i| i == RHYTHM_BAR as usize, tau(config, config.tau_rhythm), rng)? as u16
        };
        steps.push((chord, rhythm));
        (chord_logits, rhythm_logits) = model.step(&mut state, chord, rhythm)?;
    }
    Ok(Template { steps, truncated: false })
}

fn check_template(template: &[(u16, u16)]) -> Result<(), GenerateError> {
    if template.is_empty() {
        return Err(GenerateError::EmptyTemplate);
    }
    for (i, &(c, r)) in template.iter().enumerate() {
        if (c == CHORD_BAR) != (r == RHYTHM_BAR) {
            return Err(GenerateError::Desynchronized(i));
        }
    }
    Ok(())
}

/// Melody tokens for a template. The template is encoded in full first;
/// melody barlines are forced where the template has them and excluded
/// elsewhere.
pub fn sample_melody_tokens<F: Scalar, M: MelodyModel<F>, R: Rng + ?Sized>(
    model: &M,
    template: &[(u16, u16)],
    config: &SampleConfig,
    rng: &mut R,
) -> Result<Vec<u16>, GenerateError> {
    check_template(template)?;
    let context: Tensor2<F> = model.context(template)?;
    let mut state = model.melody_state();
    let mut previous = MELODY_BAR;
    let mut out = Vec::with_capacity(template.len());
    for (t, &(chord, _)) in template.iter().enumerate() {
        let logits = model.melody_step(&mut state, context.row(t), previous)?;
        let m = if chord == CHORD_BAR {
            MELODY_BAR
        } else {
            choose(&logits, |i| i == MELODY_BAR as usize, tau(config, config.tau_melody), rng)? as u16
        };
        out.push(m);
        previous = m;
    }
    Ok(out)
}

fn assemble(template: &[(u16, u16)], melody: &[u16]) -> Result<LeadSheet, GenerateError> {
    let steps = template
        .iter()
        .zip(melody)
        .map(|(&(chord, rhythm), &melody)| Step { chord, rhythm, melody })
        .collect();
    Ok(decode(&EncodedSequence::new(steps)?)?)
}

/// Samples a melody for `template` and decodes the result.
pub fn sample_melody<F: Scalar, M: MelodyModel<F>, R: Rng + ?Sized>(
    model: &M,
    template: &[(u16, u16)],
    config: &SampleConfig,
    rng: &mut R,
) -> Result<LeadSheet, GenerateError> {
    let melody = sample_melody_tokens(model, template, config, rng)?;
    assemble(template, &melody)
}

#[derive(Clone, Debug, PartialEq)]
pub struct Generated {
    pub sheet: LeadSheet,
    pub truncated: bool,
}

/// Template from the first model, melody from the second, one seeded
/// generator shared by both.
pub fn generate_lead_sheet<F: Scalar, M: MelodyModel<F>>(
    stage1: &StageOneModel<F>,
    stage2: &M,
    config: &SampleConfig,
    primer: Option<&[Step]>,
) -> Result<Generated, GenerateError> {
    let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
    let template = sample_template(stage1, config, primer, &mut rng)?;
    let sheet = sample_melody(stage2, &template.steps, config, &mut rng)?;
    Ok(Generated {
        sheet,
        truncated: template.truncated,
    })
}

/// Keeps the chord, rhythm and barline streams of `source` and samples a new
/// melody over them.
pub fn condition_on_existing<F: Scalar, M: MelodyModel<F>>(
    stage2: &M,
    source: &LeadSheet,
    config: &SampleConfig,
) -> Result<LeadSheet, GenerateError> {
    let encoded = encode(source)?;
    let template: Vec<(u16, u16)> = encoded.steps.iter().map(|s| (s.chord, s.rhythm)).collect();
    let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
    let mut sheet = sample_melody(stage2, &template, config, &mut rng)?;
    sheet.title = source.title.clone();
    sheet.source_id = source.source_id.clone();
    Ok(sheet)
}

/// Joint sampling from the one-stage baseline with the same barline rules.
pub fn sample_one_stage<F: Scalar>(model: &OneStageBaseline<F>, config: &SampleConfig) -> Result<Generated, GenerateError> {
    let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
    let mut state = model.initial_state();
    let mut logits = model.step(&mut state, CHORD_BAR, RHYTHM_BAR, MELODY_BAR)?;
    let mut steps = Vec::new();
    let mut bars = 0;
    let mut truncated = false;
    while bars < config.target_bars {
        if steps.len() >= config.max_steps {
            truncated = true;
            break;
        }
        let after_bar = steps.last().map_or(true, |s: &Step| s.is_barline());
        let chord = choose(
            &logits.chord,
            |i| after_bar && i == CHORD_BAR as usize,
            tau(config, config.tau_chord),
            &mut rng,
        )? as u16;
        let step = if chord == CHORD_BAR {
            bars += 1;
            Step::BARLINE
        } else {
            let rhythm =
                choose(&logits.rhythm, |i| i == RHYTHM_BAR as usize, tau(config, config.tau_rhythm), &mut rng)? as u16;
            let melody =
                choose(&logits.melody, |i| i == MELODY_BAR as usize, tau(config, config.tau_melody), &mut rng)? as u16;
            Step { chord, rhythm, melody }
        };
        steps.push(step);
        logits = model.step(&mut state, step.chord, step.rhythm, step.melody)?;
    }
    let sheet = decode(&EncodedSequence::new(steps)?)?;
    Ok(Generated { sheet, truncated })
}

/// Both checkpoints must share this build's vocabulary layout.
pub fn check_compatible(first: &Checkpoint, second: &Checkpoint) -> Result<(), GenerateError> {
    if first.layout_hash != second.layout_hash {
        return Err(GenerateError::Incompatible {
            first: first.layout_hash,
            second: second.layout_hash,
        });
    }
    let expected = layout_hash();
    for found in [first.layout_hash, second.layout_hash] {
        if found != expected {
            return Err(ModelError::LayoutMismatch { expected, found }.into());
        }
    }
    Ok(())
}

pub fn sha256_hex(bytes: &[u8]) -> String {
    hex::encode(Sha256::digest(bytes))
}

/// Metadata written next to generated files.
#[derive(Clone, Debug, PartialEq)]
pub struct Sidecar {
    pub seed: u64,
    pub tau_melody: f64,
    pub tau_chord: f64,
    pub tau_rhythm: f64,
    pub target_bars: usize,
    pub stage1_sha256: Option<String>,
    pub stage2_sha256: String,
    pub template_source: Option<String>,
    pub truncated: bool,
}

impl Sidecar {
    pub fn to_text(&self) -> String {
        let mut out = String::new();
        let _ = writeln!(out, "seed={}", self.seed);
        let _ = writeln!(out, "tau-melody={}", self.tau_melody);
        let _ = writeln!(out, "tau-chord={}", self.tau_chord);
        let _ = writeln!(out, "tau-rhythm={}", self.tau_rhythm);
        let _ = writeln!(out, "target-bars={}", self.target_bars);
        if let Some(h) = &self.stage1_sha256 {
            let _ = writeln!(out, "stage1-sha256={h}");
        }
        let _ = writeln!(out, "stage2-sha256={}", self.stage2_sha256);
        if let Some(src) = &self.template_source {
            let _ = writeln!(out, "template-source={src}");
        }
        let _ = writeln!(out, "truncated={}", self.truncated);
        out
    }
}
