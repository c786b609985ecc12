use std::fmt;
use std::str::FromStr;

use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum ConfigError {
    #[error("missing required key {0:?}")]
    MissingKey(&'static str),
    #[error("line {line}: unknown key {key:?}")]
    UnknownKey { line: usize, key: String },
    #[error("line {line}: expected key=value, got {text:?}")]
    Syntax { line: usize, text: String },
    #[error("line {line}: key {key:?} given twice")]
    Duplicate { line: usize, key: String },
    #[error("line {line}: bad value {value:?} for {key:?}")]
    BadValue { line: usize, key: String, value: String },
    #[error("invalid setting: {0}")]
    Invalid(String),
}

/// One parsed `key=value` line.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Entry {
    pub line: usize,
    pub key: String,
    pub value: String,
}

/// Splits `key=value` text. Blank lines and `#` comments are skipped; a key
/// may appear once.
pub fn parse_entries(text: &str) -> Result<Vec<Entry>, ConfigError> {
    let mut out: Vec<Entry> = Vec::new();
    for (i, raw) in text.lines().enumerate() {
        let line = i + 1;
        let content = raw.split('#').next().unwrap_or("").trim();
        if content.is_empty() {
            continue;
        }
        let (key, value) = content.split_once('=').ok_or_else(|| ConfigError::Syntax {
            line,
            text: raw.to_string(),
        })?;
        let key = key.trim().to_string();
        if key.is_empty() {
            return Err(ConfigError::Syntax {
                line,
                text: raw.to_string(),
            });
        }
        if out.iter().any(|e| e.key == key) {
            return Err(ConfigError::Duplicate { line, key });
        }
        out.push(Entry {
            line,
            key,
            value: value.trim().to_string(),
        });
    }
    Ok(out)
}

pub(crate) fn parse_value<T: FromStr>(e: &Entry) -> Result<T, ConfigError> {
    e.value.parse().map_err(|_| ConfigError::BadValue {
        line: e.line,
        key: e.key.clone(),
        value: e.value.clone(),
    })
}

pub(crate) fn parse_flag(e: &Entry) -> Result<bool, ConfigError> {
    match e.value.to_ascii_lowercase().as_str() {
        "on" | "true" | "yes" | "1" => Ok(true),
        "off" | "false" | "no" | "0" => Ok(false),
        _ => Err(ConfigError::BadValue {
            line: e.line,
            key: e.key.clone(),
            value: e.value.clone(),
        }),
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct TrainConfig {
    pub hidden_size: usize,
    pub batch_size: usize,
    /// Prediction positions per window; windows span one more step.
    pub sequence_length: usize,
    pub learning_rate: f64,
    pub alpha: f64,
    /// Head weights of the one-stage baseline.
    pub chord_weight: f64,
    pub rhythm_weight: f64,
    pub melody_weight: f64,
    pub max_steps: usize,
    /// Steps between checkpoints; 0 writes only the final one.
    pub checkpoint_interval: usize,
    pub seed: u64,
    pub clip_norm: f64,
    pub augmentation: bool,
    pub holdout_fraction: f64,
    /// Treat every sheet as starting with a barline step, the token that
    /// also opens generation.
    pub prepend_start: bool,
}

impl Default for TrainConfig {
    fn default() -> Self {
        Self {
            hidden_size: 512,
            batch_size: 128,
            sequence_length: 100,
            learning_rate: 0.001,
            alpha: 0.5,
            chord_weight: 1.0 / 3.0,
            rhythm_weight: 1.0 / 3.0,
            melody_weight: 1.0 / 3.0,
            max_steps: 0,
            checkpoint_interval: 1000,
            seed: 0,
            clip_norm: 5.0,
            augmentation: true,
            holdout_fraction: 0.05,
            prepend_start: true,
        }
    }
}

impl TrainConfig {
    pub const KEYS: [&'static str; 15] = [
        "hidden-size",
        "batch-size",
        "sequence-length",
        "learning-rate",
        "alpha",
        "chord-weight",
        "rhythm-weight",
        "melody-weight",
        "max-steps",
        "checkpoint-interval",
        "seed",
        "clip-norm",
        "augmentation",
        "holdout-fraction",
        "prepend-start",
    ];

    pub fn validate(&self) -> Result<(), ConfigError> {
        let bad = |msg: String| Err(ConfigError::Invalid(msg));
        if self.hidden_size == 0 {
            return bad("hidden-size must be at least 1".into());
        }
        if self.batch_size == 0 {
            return bad("batch-size must be at least 1".into());
        }
        if self.sequence_length < 2 {
            return bad(format!("sequence-length must be at least 2, got {}", self.sequence_length));
        }
        if !(self.learning_rate > 0.0 && self.learning_rate.is_finite()) {
            return bad(format!("learning-rate must be positive, got {}", self.learning_rate));
        }
        for (name, w) in [
            ("alpha", self.alpha),
            ("chord-weight", self.chord_weight),
            ("rhythm-weight", self.rhythm_weight),
            ("melody-weight", self.melody_weight),
        ] {
            if !(0.0..=1.0).contains(&w) {
                return bad(format!("{name} must lie in [0, 1], got {w}"));
            }
        }
        if !(self.clip_norm > 0.0) {
            return bad(format!("clip-norm must be positive, got {}", self.clip_norm));
        }
        if !(0.0..1.0).contains(&self.holdout_fraction) {
            return bad(format!("holdout-fraction must lie in [0, 1), got {}", self.holdout_fraction));
        }
        Ok(())
    }
}

impl FromStr for TrainConfig {
    type Err = ConfigError;

    /// `max-steps` is required; every other key falls back to its default.
    fn from_str(text: &str) -> Result<Self, ConfigError> {
        let mut c = TrainConfig::default();
        let mut saw_max_steps = false;
        for e in parse_entries(text)? {
            match e.key.as_str() {
                "hidden-size" => c.hidden_size = parse_value(&e)?,
                "batch-size" => c.batch_size = parse_value(&e)?,
                "sequence-length" => c.sequence_length = parse_value(&e)?,
                "learning-rate" => c.learning_rate = parse_value(&e)?,
                "alpha" => c.alpha = parse_value(&e)?,
                "chord-weight" => c.chord_weight = parse_value(&e)?,
                "rhythm-weight" => c.rhythm_weight = parse_value(&e)?,
                "melody-weight" => c.melody_weight = parse_value(&e)?,
                "max-steps" => {
                    c.max_steps = parse_value(&e)?;
                    saw_max_steps = true;
                }
                "checkpoint-interval" => c.checkpoint_interval = parse_value(&e)?,
                "seed" => c.seed = parse_value(&e)?,
                "clip-norm" => c.clip_norm = parse_value(&e)?,
                "augmentation" => c.augmentation = parse_flag(&e)?,
                "holdout-fraction" => c.holdout_fraction = parse_value(&e)?,
                "prepend-start" => c.prepend_start = parse_flag(&e)?,
                _ => {
                    return Err(ConfigError::UnknownKey {
                        line: e.line,
                        key: e.key,
                    })
                }
            }
        }
        if !saw_max_steps {
            return Err(ConfigError::MissingKey("max-steps"));
        }
        c.validate()?;
        Ok(c)
    }
}

impl fmt::Display for TrainConfig {
    /// Renders every key, so the output parses back to the same config.
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let flag = |b: bool| if b { "on" } else { "off" };
        writeln!(f, "hidden-size={}", self.hidden_size)?;
        writeln!(f, "batch-size={}", self.batch_size)?;
        writeln!(f, "sequence-length={}", self.sequence_length)?;
        writeln!(f, "learning-rate={}", self.learning_rate)?;
        writeln!(f, "alpha={}", self.alpha)?;
        writeln!(f, "chord-weight={}", self.chord_weight)?;
        writeln!(f, "rhythm-weight={}", self.rhythm_weight)?;
        writeln!(f, "melody-weight={}", self.melody_weight)?;
        writeln!(f, "max-steps={}", self.max_steps)?;
        writeln!(f, "checkpoint-interval={}", self.checkpoint_interval)?;
        writeln!(f, "seed={}", self.seed)?;
        writeln!(f, "clip-norm={}", self.clip_norm)?;
        writeln!(f, "augmentation={}", flag(self.augmentation))?;
        writeln!(f, "holdout-fraction={}", self.holdout_fraction)?;
        writeln!(f, "prepend-start={}", flag(self.prepend_start))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn defaults_follow_the_published_setup() {
        let c: TrainConfig = "max-steps=5".parse().unwrap();
        assert_eq!(c.batch_size, 128);
        assert_eq!(c.sequence_length, 100);
        assert_eq!(c.learning_rate, 0.001);
        assert_eq!(c.alpha, 0.5);
        assert_eq!(c.clip_norm, 5.0);
        assert_eq!(c.hidden_size, 512);
        assert!(c.augmentation);
    }

    #[test]
    fn missing_key_is_named() {
        let err = "batch-size=4".parse::<TrainConfig>().unwrap_err();
        assert_eq!(err, ConfigError::MissingKey("max-steps"));
        assert!(err.to_string().contains("max-steps"));
    }

    #[test]
    fn comments_blank_lines_and_flags() {
        let text = "# toy run\n\nmax-steps = 10  # short\naugmentation=off\nseed=7\n";
        let c: TrainConfig = text.parse().unwrap();
        assert_eq!((c.max_steps, c.seed, c.augmentation), (10, 7, false));
    }

    #[test]
    fn rejects_bad_input() {
        assert!(matches!(
            "max-steps=1\nbatchsize=3".parse::<TrainConfig>(),
            Err(ConfigError::UnknownKey { line: 2, .. })
        ));
        assert!(matches!("max-steps=x".parse::<TrainConfig>(), Err(ConfigError::BadValue { .. })));
        assert!(matches!("max-steps".parse::<TrainConfig>(), Err(ConfigError::Syntax { line: 1, .. })));
        assert!(matches!(
            "max-steps=1\nmax-steps=2".parse::<TrainConfig>(),
            Err(ConfigError::Duplicate { line: 2, .. })
        ));
        assert!(matches!("max-steps=1\nalpha=1.5".parse::<TrainConfig>(), Err(ConfigError::Invalid(_))));
        assert!(matches!(
            "max-steps=1\nsequence-length=1".parse::<TrainConfig>(),
            Err(ConfigError::Invalid(_))
        ));
        assert!(matches!("max-steps=1\nbatch-size=0".parse::<TrainConfig>(), Err(ConfigError::Invalid(_))));
    }

    #[test]
    fn display_parses_back() {
        let c = TrainConfig {
            max_steps: 42,
            seed: 9,
            augmentation: false,
            alpha: 0.3,
            ..TrainConfig::default()
        };
        assert_eq!(c.to_string().parse::<TrainConfig>().unwrap(), c);
        assert_eq!(c.to_string().lines().count(), TrainConfig::KEYS.len());
    }
}
