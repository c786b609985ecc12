//! MusicXML ingestion and MusicXML / Standard MIDI File export.

mod export;
mod midi;
mod musicxml;

pub use export::{export_musicxml, measure_time_signature, ExportError, EXPORT_DIVISIONS};
pub use midi::{export_midi, MidiError, CHORD_CHANNEL, MELODY_CHANNEL, PPQ};
pub use musicxml::{parse_musicxml, ParseError};

use crate::encoding::Quarters;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub struct TimeSignature {
    pub beats: u32,
    pub beat_type: u32,
}

impl TimeSignature {
    pub fn new(beats: u32, beat_type: u32) -> Self {
        Self { beats, beat_type }
    }

    /// Nominal measure length in quarter notes.
    pub fn quarters(self) -> Quarters {
        Quarters::new(self.beats as i64 * 4, self.beat_type as i64)
    }
}

/// One note, chord group or rest as written. Offsets are in quarter notes from
/// the start of the measure.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct RawEvent {
    pub onset: Quarters,
    /// Empty for a rest; several entries for a chord group.
    pub pitches: Vec<u8>,
    pub duration: Quarters,
    pub tie_start: bool,
    pub tie_stop: bool,
    /// Grace notes carry zero duration.
    pub grace: bool,
}

impl RawEvent {
    pub fn is_rest(&self) -> bool {
        self.pitches.is_empty()
    }
}

/// A chord-symbol annotation; `kind` is kept verbatim.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Harmony {
    pub onset: Quarters,
    pub root_step: char,
    pub root_alter: i32,
    pub kind: String,
}

impl Harmony {
    pub fn pitch_class(&self) -> i32 {
        step_semitone(self.root_step).unwrap_or(0) + self.root_alter
    }
}

#[derive(Clone, Debug, Default, PartialEq, Eq)]
pub struct RawMeasure {
    /// 1-based position in the part, independent of the printed number.
    pub number: u32,
    pub time: Option<TimeSignature>,
    pub events: Vec<RawEvent>,
    pub harmonies: Vec<Harmony>,
    pub repeat_start: bool,
    pub repeat_end: bool,
    /// Explicit play count of a backward repeat.
    pub repeat_times: Option<u32>,
    /// Volta bracket numbers this measure belongs to.
    pub ending: Option<Vec<u32>>,
    /// Da capo / dal segno style marker found in the measure.
    pub navigation: Option<String>,
}

impl RawMeasure {
    /// Sum of non-grace event durations.
    pub fn duration_sum(&self) -> Quarters {
        self.events.iter().filter(|e| !e.grace).map(|e| e.duration).sum()
    }
}

#[derive(Clone, Debug, Default, PartialEq, Eq)]
pub struct RawScore {
    pub title: Option<String>,
    pub measures: Vec<RawMeasure>,
    /// Set once the opening measure has been checked for a pickup, so the
    /// check is not repeated on what is then the first measure.
    pub pickup_checked: bool,
}

impl RawScore {
    pub fn event_count(&self) -> usize {
        self.measures.iter().map(|m| m.events.len()).sum()
    }
}

pub(crate) fn step_semitone(step: char) -> Option<i32> {
    Some(match step {
        'C' => 0,
        'D' => 2,
        'E' => 4,
        'F' => 5,
        'G' => 7,
        'A' => 9,
        'B' => 11,
        _ => return None,
    })
}
