//! Symbol vocabularies and their one-hot index layout.
//!
//! | stream | symbols                         | width | barline index |
//! |--------|---------------------------------|-------|---------------|
//! | chord  | 12 roots × 4 modes              | 49    | 48            |
//! | rhythm | 12 rhythm types                 | 13    | 12            |
//! | melody | 128 MIDI pitches + rest         | 130   | 129           |
//!
//! Chord index is `root * 4 + mode` with modes ordered
//! major, minor, diminished, augmented. Rhythm index follows
//! [`RhythmType::ALL`]. Melody index is the MIDI number, 128 is a rest.

use std::fmt;
use std::io::{self, Read, Write};

use num_rational::Ratio;
use sha2::{Digest, Sha256};
use thiserror::Error;

use crate::score::{Event, LeadSheet};

/// Durations measured in quarter notes.
pub type Quarters = Ratio<i64>;

pub const CHORD_VOCAB: usize = 49;
pub const RHYTHM_VOCAB: usize = 13;
pub const MELODY_VOCAB: usize = 130;
pub const CHORD_BAR: u16 = 48;
pub const RHYTHM_BAR: u16 = 12;
pub const MELODY_REST: u16 = 128;
pub const MELODY_BAR: u16 = 129;

/// Canonical description of the index layout; hashed into checkpoints.
pub const LAYOUT_DESCRIPTOR: &str = "chord=root*4+mode(major,minor,diminished,augmented);bar=48|\
rhythm=32nd,dotted-32nd,16th,8th-triplet,8th,quarter-triplet,dotted-8th,quarter,dotted-quarter,half,dotted-half,whole;bar=12|\
melody=midi0-127;rest=128;bar=129";

/// First eight bytes (little-endian) of SHA-256 over [`LAYOUT_DESCRIPTOR`].
pub fn layout_hash() -> u64 {
    let digest = Sha256::digest(LAYOUT_DESCRIPTOR.as_bytes());
    u64::from_le_bytes(digest[..8].try_into().unwrap())
}

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum EncodingError {
    #[error("unknown chord mode {0:?}")]
    UnknownMode(String),
    #[error("pitch {0} outside MIDI range")]
    InvalidPitch(u16),
    #[error("step {step}: {stream} index {index} out of vocabulary")]
    IndexOutOfVocabulary {
        step: usize,
        stream: &'static str,
        index: u16,
    },
    #[error("step {0}: barline present in some streams but not all")]
    DesynchronizedBarline(usize),
    #[error("step {step}: {stream} vector is not one-hot")]
    NotOneHot { step: usize, stream: &'static str },
    #[error("streams have different lengths: chords={chords}, rhythms={rhythms}, melodies={melodies}")]
    LengthMismatch {
        chords: usize,
        rhythms: usize,
        melodies: usize,
    },
}

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum TransposeError {
    #[error("shift {0} outside [-12, 12]")]
    ShiftOutOfBounds(i32),
    #[error("shift {0} moves a pitch outside MIDI range")]
    OutOfRange(i32),
}

/// The twelve rhythmic figures, shortest first.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum RhythmType {
    ThirtySecond,
    DottedThirtySecond,
    Sixteenth,
    EighthTriplet,
    Eighth,
    QuarterTriplet,
    DottedEighth,
    Quarter,
    DottedQuarter,
    Half,
    DottedHalf,
    Whole,
}

impl RhythmType {
    pub const ALL: [RhythmType; 12] = [
        RhythmType::ThirtySecond,
        RhythmType::DottedThirtySecond,
        RhythmType::Sixteenth,
        RhythmType::EighthTriplet,
        RhythmType::Eighth,
        RhythmType::QuarterTriplet,
        RhythmType::DottedEighth,
        RhythmType::Quarter,
        RhythmType::DottedQuarter,
        RhythmType::Half,
        RhythmType::DottedHalf,
        RhythmType::Whole,
    ];

    pub fn index(self) -> u16 {
        self as u16
    }

    pub fn from_index(i: u16) -> Option<Self> {
        Self::ALL.get(i as usize).copied()
    }

    /// Exact length in quarter notes.
    pub fn quarters(self) -> Quarters {
        let (n, d) = match self {
            RhythmType::ThirtySecond => (1, 8),
            RhythmType::DottedThirtySecond => (3, 16),
            RhythmType::Sixteenth => (1, 4),
            RhythmType::EighthTriplet => (1, 3),
            RhythmType::Eighth => (1, 2),
            RhythmType::QuarterTriplet => (2, 3),
            RhythmType::DottedEighth => (3, 4),
            RhythmType::Quarter => (1, 1),
            RhythmType::DottedQuarter => (3, 2),
            RhythmType::Half => (2, 1),
            RhythmType::DottedHalf => (3, 1),
            RhythmType::Whole => (4, 1),
        };
        Ratio::new(n, d)
    }

    pub fn from_quarters(d: Quarters) -> Option<Self> {
        Self::ALL.into_iter().find(|r| r.quarters() == d)
    }

    /// Length in ticks at `ppq` ticks per quarter; `None` if not integral.
    pub fn ticks(self, ppq: u32) -> Option<u32> {
        let t = self.quarters() * Ratio::from_integer(ppq as i64);
        t.is_integer().then(|| *t.numer() as u32)
    }

    pub fn name(self) -> &'static str {
        match self {
            RhythmType::ThirtySecond => "32nd",
            RhythmType::DottedThirtySecond => "dotted-32nd",
            RhythmType::Sixteenth => "16th",
            RhythmType::EighthTriplet => "8th-triplet",
            RhythmType::Eighth => "8th",
            RhythmType::QuarterTriplet => "quarter-triplet",
            RhythmType::DottedEighth => "dotted-8th",
            RhythmType::Quarter => "quarter",
            RhythmType::DottedQuarter => "dotted-quarter",
            RhythmType::Half => "half",
            RhythmType::DottedHalf => "dotted-half",
            RhythmType::Whole => "whole",
        }
    }
}

impl fmt::Display for RhythmType {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Mode {
    Major,
    Minor,
    Diminished,
    Augmented,
}

impl Mode {
    pub const ALL: [Mode; 4] = [Mode::Major, Mode::Minor, Mode::Diminished, Mode::Augmented];

    pub fn ordinal(self) -> u16 {
        self as u16
    }

    pub fn name(self) -> &'static str {
        match self {
            Mode::Major => "major",
            Mode::Minor => "minor",
            Mode::Diminished => "diminished",
            Mode::Augmented => "augmented",
        }
    }

    /// Semitone offsets of the triad above the root.
    pub fn triad(self) -> [u8; 3] {
        match self {
            Mode::Major => [0, 4, 7],
            Mode::Minor => [0, 3, 7],
            Mode::Diminished => [0, 3, 6],
            Mode::Augmented => [0, 4, 8],
        }
    }
}

/// Source chord kinds and the mode each collapses to.
pub const MODE_TABLE: [(&str, Mode); 34] = [
    ("6", Mode::Major),
    ("7", Mode::Major),
    ("9", Mode::Major),
    ("augmented", Mode::Augmented),
    ("augmented-7", Mode::Augmented),
    ("augmented-9", Mode::Augmented),
    ("diminished", Mode::Diminished),
    ("diminished-7", Mode::Diminished),
    ("dominant", Mode::Major),
    ("dominant-11", Mode::Major),
    ("dominant-13", Mode::Major),
    ("dominant-7", Mode::Major),
    ("dominant-9", Mode::Major),
    ("half-diminished", Mode::Diminished),
    ("major", Mode::Major),
    ("major-13", Mode::Major),
    ("major-6", Mode::Major),
    ("major-6-9", Mode::Major),
    ("major-7", Mode::Major),
    ("major-9", Mode::Major),
    ("major-minor", Mode::Major),
    ("minor", Mode::Minor),
    ("minor-11", Mode::Minor),
    ("minor-13", Mode::Minor),
    ("minor-6", Mode::Minor),
    ("minor-7", Mode::Minor),
    ("minor-7-b5", Mode::Diminished),
    ("minor-9", Mode::Minor),
    ("minor-major", Mode::Minor),
    ("minor-major-7", Mode::Minor),
    ("power", Mode::Major),
    ("sus2", Mode::Major),
    ("sus4", Mode::Major),
    ("sus4-7", Mode::Major),
];

pub fn map_mode(kind: &str) -> Result<Mode, EncodingError> {
    let kind = kind.trim();
    MODE_TABLE
        .iter()
        .find(|(k, _)| *k == kind)
        .map(|(_, m)| *m)
        .ok_or_else(|| EncodingError::UnknownMode(kind.to_string()))
}

pub const ROOT_NAMES: [&str; 12] = ["C", "C#", "D", "D#", "E", "F", "F#", "G", "G#", "A", "A#", "B"];

/// Root pitch class (C=0 … B=11) plus mode.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct ChordSymbol {
    root: u8,
    mode: Mode,
}

impl ChordSymbol {
    /// `root` is reduced modulo 12, so any spelling collapses to a natural or one sharp.
    pub fn new(root: i32, mode: Mode) -> Self {
        Self {
            root: root.rem_euclid(12) as u8,
            mode,
        }
    }

    pub fn root(self) -> u8 {
        self.root
    }

    pub fn mode(self) -> Mode {
        self.mode
    }

    pub fn index(self) -> u16 {
        self.root as u16 * 4 + self.mode.ordinal()
    }

    pub fn from_index(i: u16) -> Option<Self> {
        (i < CHORD_BAR).then(|| Self {
            root: (i / 4) as u8,
            mode: Mode::ALL[(i % 4) as usize],
        })
    }

    pub fn transposed(self, semitones: i32) -> Self {
        Self::new(self.root as i32 + semitones, self.mode)
    }
}

impl fmt::Display for ChordSymbol {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}{}", ROOT_NAMES[self.root as usize], match self.mode {
            Mode::Major => "",
            Mode::Minor => "m",
            Mode::Diminished => "dim",
            Mode::Augmented => "aug",
        })
    }
}

/// One synchronized step as vocabulary indices.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub struct Step {
    pub chord: u16,
    pub rhythm: u16,
    pub melody: u16,
}

impl Step {
    pub const BARLINE: Step = Step {
        chord: CHORD_BAR,
        rhythm: RHYTHM_BAR,
        melody: MELODY_BAR,
    };

    pub fn is_barline(self) -> bool {
        self.chord == CHORD_BAR
    }

    fn validate(self, step: usize) -> Result<(), EncodingError> {
        let check = |stream, index: u16, vocab: usize| {
            if (index as usize) < vocab {
                Ok(())
            } else {
                Err(EncodingError::IndexOutOfVocabulary { step, stream, index })
            }
        };
        check("chord", self.chord, CHORD_VOCAB)?;
        check("rhythm", self.rhythm, RHYTHM_VOCAB)?;
        check("melody", self.melody, MELODY_VOCAB)?;
        let bars = [
            self.chord == CHORD_BAR,
            self.rhythm == RHYTHM_BAR,
            self.melody == MELODY_BAR,
        ];
        if bars.iter().any(|&b| b) && !bars.iter().all(|&b| b) {
            return Err(EncodingError::DesynchronizedBarline(step));
        }
        Ok(())
    }
}

/// Per-step chord/rhythm/melody symbols. Stored as indices; dense one-hot
/// views are produced on demand.
#[derive(Clone, Debug, Default, PartialEq, Eq)]
pub struct EncodedSequence {
    pub steps: Vec<Step>,
}

fn one_hot(index: u16, width: usize) -> Vec<f32> {
    let mut v = vec![0.0; width];
    v[index as usize] = 1.0;
    v
}

fn one_hot_index(v: &[f32], width: usize, step: usize, stream: &'static str) -> Result<u16, EncodingError> {
    if v.len() != width {
        return Err(EncodingError::NotOneHot { step, stream });
    }
    let mut hot = None;
    for (i, &x) in v.iter().enumerate() {
        if x == 1.0 && hot.is_none() {
            hot = Some(i as u16);
        } else if x != 0.0 {
            return Err(EncodingError::NotOneHot { step, stream });
        }
    }
    hot.ok_or(EncodingError::NotOneHot { step, stream })
}

impl EncodedSequence {
    pub fn new(steps: Vec<Step>) -> Result<Self, EncodingError> {
        let seq = Self { steps };
        seq.validate()?;
        Ok(seq)
    }

    pub fn len(&self) -> usize {
        self.steps.len()
    }

    pub fn is_empty(&self) -> bool {
        self.steps.is_empty()
    }

    pub fn validate(&self) -> Result<(), EncodingError> {
        self.steps.iter().enumerate().try_for_each(|(i, s)| s.validate(i))
    }

    pub fn chord_one_hots(&self) -> Vec<Vec<f32>> {
        self.steps.iter().map(|s| one_hot(s.chord, CHORD_VOCAB)).collect()
    }

    pub fn rhythm_one_hots(&self) -> Vec<Vec<f32>> {
        self.steps.iter().map(|s| one_hot(s.rhythm, RHYTHM_VOCAB)).collect()
    }

    pub fn melody_one_hots(&self) -> Vec<Vec<f32>> {
        self.steps.iter().map(|s| one_hot(s.melody, MELODY_VOCAB)).collect()
    }

    pub fn from_one_hots(
        chords: &[Vec<f32>],
        rhythms: &[Vec<f32>],
        melodies: &[Vec<f32>],
    ) -> Result<Self, EncodingError> {
        if chords.len() != rhythms.len() || chords.len() != melodies.len() {
            return Err(EncodingError::LengthMismatch {
                chords: chords.len(),
                rhythms: rhythms.len(),
                melodies: melodies.len(),
            });
        }
        let steps = (0..chords.len())
            .map(|i| {
                Ok(Step {
                    chord: one_hot_index(&chords[i], CHORD_VOCAB, i, "chord")?,
                    rhythm: one_hot_index(&rhythms[i], RHYTHM_VOCAB, i, "rhythm")?,
                    melody: one_hot_index(&melodies[i], MELODY_VOCAB, i, "melody")?,
                })
            })
            .collect::<Result<Vec<_>, _>>()?;
        Self::new(steps)
    }

    /// Lowest and highest sounding pitch, if any.
    pub fn pitch_range(&self) -> Option<(u16, u16)> {
        let mut pitches = self.steps.iter().map(|s| s.melody).filter(|&m| m < MELODY_REST);
        let first = pitches.next()?;
        Some(pitches.fold((first, first), |(lo, hi), p| (lo.min(p), hi.max(p))))
    }

    /// Shifts in `[-12, 12]` that keep every pitch inside MIDI range.
    pub fn valid_shifts(&self) -> Vec<i32> {
        valid_shifts_for(self.pitch_range())
    }
}

pub(crate) fn valid_shifts_for(range: Option<(u16, u16)>) -> Vec<i32> {
    match range {
        None => (-12..=12).collect(),
        Some((lo, hi)) => (-12..=12)
            .filter(|k| lo as i32 + k >= 0 && hi as i32 + k <= 127)
            .collect(),
    }
}

pub fn encode(sheet: &LeadSheet) -> Result<EncodedSequence, EncodingError> {
    let steps = sheet
        .events
        .iter()
        .map(|e| match *e {
            Event::Barline => Ok(Step::BARLINE),
            Event::Note { pitch, rhythm, chord } => {
                if pitch > 127 {
                    return Err(EncodingError::InvalidPitch(pitch as u16));
                }
                Ok(Step {
                    chord: chord.index(),
                    rhythm: rhythm.index(),
                    melody: pitch as u16,
                })
            }
            Event::Rest { rhythm, chord } => Ok(Step {
                chord: chord.index(),
                rhythm: rhythm.index(),
                melody: MELODY_REST,
            }),
        })
        .collect::<Result<Vec<_>, _>>()?;
    Ok(EncodedSequence { steps })
}

pub fn decode(seq: &EncodedSequence) -> Result<LeadSheet, EncodingError> {
    seq.validate()?;
    let events = seq
        .steps
        .iter()
        .map(|s| {
            if s.is_barline() {
                return Event::Barline;
            }
            // validate() guarantees both lookups succeed
            let chord = ChordSymbol::from_index(s.chord).unwrap();
            let rhythm = RhythmType::from_index(s.rhythm).unwrap();
            if s.melody == MELODY_REST {
                Event::Rest { rhythm, chord }
            } else {
                Event::Note {
                    pitch: s.melody as u8,
                    rhythm,
                    chord,
                }
            }
        })
        .collect();
    Ok(LeadSheet {
        events,
        ..LeadSheet::default()
    })
}

/// Shifts every pitch and chord root by `semitones`; rhythm, rests and
/// barlines are untouched. Shifts that push a pitch out of MIDI range are
/// refused rather than clamped.
pub fn transpose(seq: &EncodedSequence, semitones: i32) -> Result<EncodedSequence, TransposeError> {
    if !(-12..=12).contains(&semitones) {
        return Err(TransposeError::ShiftOutOfBounds(semitones));
    }
    if let Some((lo, hi)) = seq.pitch_range() {
        if lo as i32 + semitones < 0 || hi as i32 + semitones > 127 {
            return Err(TransposeError::OutOfRange(semitones));
        }
    }
    Ok(EncodedSequence {
        steps: seq.steps.iter().map(|&s| transpose_step(s, semitones)).collect(),
    })
}

/// Index-level shift of one step. Caller guarantees the pitch stays in range.
pub(crate) fn transpose_step(s: Step, semitones: i32) -> Step {
    if s.is_barline() {
        return s;
    }
    let chord = ChordSymbol::from_index(s.chord)
        .map(|c| c.transposed(semitones).index())
        .unwrap_or(s.chord);
    let melody = if s.melody < MELODY_REST {
        (s.melody as i32 + semitones) as u16
    } else {
        s.melody
    };
    Step {
        chord,
        rhythm: s.rhythm,
        melody,
    }
}

pub const CORPUS_MAGIC: &[u8; 4] = b"LSEC";
pub const CORPUS_VERSION: u32 = 1;

#[derive(Debug, Error)]
pub enum CorpusError {
    #[error("corpus I/O: {0}")]
    Io(#[from] io::Error),
    #[error("not an encoded corpus (bad magic)")]
    BadMagic,
    #[error("unsupported corpus version {0}")]
    UnsupportedVersion(u32),
    #[error("corpus truncated in sheet {0}")]
    Truncated(usize),
    #[error("sheet {sheet}: {source}")]
    Invalid {
        sheet: usize,
        #[source]
        source: EncodingError,
    },
    #[error("{0} trailing bytes after last sheet")]
    TrailingBytes(usize),
}

/// `"LSEC" | version u32 | sheet count u32 | per sheet: length u32, then
/// (chord, rhythm, melody) u16 triples`, all little-endian.
pub fn write_corpus<W: Write>(mut w: W, corpus: &[EncodedSequence]) -> io::Result<()> {
    let mut buf = Vec::new();
    buf.extend_from_slice(CORPUS_MAGIC);
    buf.extend_from_slice(&CORPUS_VERSION.to_le_bytes());
    buf.extend_from_slice(&(corpus.len() as u32).to_le_bytes());
    for seq in corpus {
        buf.extend_from_slice(&(seq.len() as u32).to_le_bytes());
        for s in &seq.steps {
            for v in [s.chord, s.rhythm, s.melody] {
                buf.extend_from_slice(&v.to_le_bytes());
            }
        }
    }
    w.write_all(&buf)?;
    w.flush()
}

pub fn read_corpus<R: Read>(mut r: R) -> Result<Vec<EncodedSequence>, CorpusError> {
    let mut bytes = Vec::new();
    r.read_to_end(&mut bytes)?;
    if bytes.len() < 12 || &bytes[..4] != CORPUS_MAGIC {
        return Err(CorpusError::BadMagic);
    }
    let u32_at = |pos: usize| u32::from_le_bytes(bytes[pos..pos + 4].try_into().unwrap());
    let version = u32_at(4);
    if version != CORPUS_VERSION {
        return Err(CorpusError::UnsupportedVersion(version));
    }
    let count = u32_at(8) as usize;
    let mut pos = 12;
    let mut corpus = Vec::with_capacity(count.min(1 << 16));
    for sheet in 0..count {
        if bytes.len() < pos + 4 {
            return Err(CorpusError::Truncated(sheet));
        }
        let len = u32_at(pos) as usize;
        pos += 4;
        let need = len.checked_mul(6).ok_or(CorpusError::Truncated(sheet))?;
        if bytes.len() < pos + need {
            return Err(CorpusError::Truncated(sheet));
        }
        let steps = bytes[pos..pos + need]
            .chunks_exact(6)
            .map(|c| Step {
                chord: u16::from_le_bytes([c[0], c[1]]),
                rhythm: u16::from_le_bytes([c[2], c[3]]),
                melody: u16::from_le_bytes([c[4], c[5]]),
            })
            .collect();
        pos += need;
        let seq = EncodedSequence::new(steps).map_err(|source| CorpusError::Invalid { sheet, source })?;
        corpus.push(seq);
    }
    if pos != bytes.len() {
        return Err(CorpusError::TrailingBytes(bytes.len() - pos));
    }
    Ok(corpus)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::score::{Event, LeadSheet};

    fn c(root: i32, mode: Mode) -> ChordSymbol {
        ChordSymbol::new(root, mode)
    }

    #[test]
    fn mode_table_examples() {
        assert_eq!(map_mode("dominant-7"), Ok(Mode::Major));
        assert_eq!(map_mode("minor-7-b5"), Ok(Mode::Diminished));
        assert_eq!(map_mode("sus4"), Ok(Mode::Major));
        assert_eq!(
            map_mode("suspended-fourth"),
            Err(EncodingError::UnknownMode("suspended-fourth".into()))
        );
    }

    #[test]
    fn chord_index_is_root_times_four_plus_mode() {
        assert_eq!(c(0, Mode::Major).index(), 0);
        assert_eq!(c(7, Mode::Major).index(), 28);
        assert_eq!(c(11, Mode::Augmented).index(), 47);
        assert_eq!(ChordSymbol::from_index(CHORD_BAR), None);
        for i in 0..48 {
            assert_eq!(ChordSymbol::from_index(i).unwrap().index(), i);
        }
    }

    #[test]
    fn flats_collapse_to_sharps() {
        // D flat = pitch class 1 = C sharp
        assert_eq!(c(2 - 1, Mode::Minor), c(1, Mode::Minor));
        assert_eq!(c(-1, Mode::Major).root(), 11);
        assert_eq!(c(11, Mode::Major).transposed(1), c(0, Mode::Major));
    }

    #[test]
    fn encodes_note_barline_and_rest() {
        let sheet = LeadSheet::from_events(vec![
            Event::Note {
                pitch: 67,
                rhythm: RhythmType::Quarter,
                chord: c(0, Mode::Major),
            },
            Event::Barline,
            Event::Rest {
                rhythm: RhythmType::Half,
                chord: c(7, Mode::Major),
            },
        ]);
        let seq = encode(&sheet).unwrap();
        assert_eq!(seq.steps[0], Step { chord: 0, rhythm: 7, melody: 67 });
        assert_eq!(seq.steps[1], Step { chord: 48, rhythm: 12, melody: 129 });
        assert_eq!(seq.steps[2], Step { chord: 28, rhythm: 9, melody: 128 });
        let hot = seq.chord_one_hots();
        assert_eq!(hot[1].len(), 49);
        assert_eq!(hot[1][48], 1.0);
        assert_eq!(hot[1].iter().sum::<f32>(), 1.0);
    }

    #[test]
    fn empty_sequence_decodes_to_empty_sheet() {
        assert!(decode(&EncodedSequence::default()).unwrap().events.is_empty());
    }

    #[test]
    fn decode_rejects_desync_and_bad_one_hots() {
        let bad = EncodedSequence {
            steps: vec![Step { chord: 48, rhythm: 3, melody: 60 }],
        };
        assert_eq!(decode(&bad), Err(EncodingError::DesynchronizedBarline(0)));
        let mut two_hot = vec![0.0; 49];
        two_hot[0] = 1.0;
        two_hot[3] = 1.0;
        let err = EncodedSequence::from_one_hots(&[two_hot], &[one_hot(0, 13)], &[one_hot(0, 130)]);
        assert_eq!(err, Err(EncodingError::NotOneHot { step: 0, stream: "chord" }));
        let zeros = EncodedSequence::from_one_hots(&[vec![0.0; 49]], &[one_hot(0, 13)], &[one_hot(0, 130)]);
        assert!(zeros.is_err());
    }

    #[test]
    fn one_hot_views_invert() {
        let seq = EncodedSequence::new(vec![
            Step { chord: 5, rhythm: 2, melody: 128 },
            Step::BARLINE,
        ])
        .unwrap();
        let back =
            EncodedSequence::from_one_hots(&seq.chord_one_hots(), &seq.rhythm_one_hots(), &seq.melody_one_hots())
                .unwrap();
        assert_eq!(back, seq);
    }

    #[test]
    fn transpose_examples() {
        let seq = EncodedSequence::new(vec![
            Step { chord: c(0, Mode::Major).index(), rhythm: 7, melody: 67 },
            Step { chord: c(11, Mode::Major).index(), rhythm: 7, melody: 128 },
            Step::BARLINE,
        ])
        .unwrap();
        assert_eq!(transpose(&seq, 0).unwrap(), seq);
        let up2 = transpose(&seq, 2).unwrap();
        assert_eq!(up2.steps[0].melody, 69);
        assert_eq!(up2.steps[0].chord, c(2, Mode::Major).index());
        let up1 = transpose(&seq, 1).unwrap();
        assert_eq!(up1.steps[1].chord, c(0, Mode::Major).index());
        assert_eq!(up1.steps[1].melody, 128);
        assert_eq!(up1.steps[2], Step::BARLINE);
        assert_eq!(transpose(&seq, 13), Err(TransposeError::ShiftOutOfBounds(13)));
    }

    #[test]
    fn transpose_refuses_out_of_range_pitch() {
        let seq = EncodedSequence::new(vec![Step { chord: 0, rhythm: 0, melody: 120 }]).unwrap();
        assert_eq!(transpose(&seq, 8), Err(TransposeError::OutOfRange(8)));
        assert!(transpose(&seq, 7).is_ok());
        assert_eq!(seq.valid_shifts(), (-12..=7).collect::<Vec<_>>());
    }

    #[test]
    fn corpus_header_layout() {
        let seq = EncodedSequence::new(vec![Step { chord: 1, rhythm: 2, melody: 300 % 130 }]).unwrap();
        let mut bytes = Vec::new();
        write_corpus(&mut bytes, &[seq.clone()]).unwrap();
        assert_eq!(&bytes[..4], b"LSEC");
        assert_eq!(&bytes[4..12], &[1, 0, 0, 0, 1, 0, 0, 0]);
        assert_eq!(&bytes[12..16], &[1, 0, 0, 0]);
        assert_eq!(&bytes[16..22], &[1, 0, 2, 0, 40, 0]);
        assert_eq!(read_corpus(bytes.as_slice()).unwrap(), vec![seq]);
        assert!(matches!(read_corpus(&bytes[..20]), Err(CorpusError::Truncated(0))));
    }

    #[test]
    fn layout_hash_is_stable() {
        assert_eq!(layout_hash(), layout_hash());
        assert_ne!(layout_hash(), 0);
    }
}
