//! In-memory lead sheet: synchronized chord, rhythm and melody events with
//! barlines as first-class events.

use thiserror::Error;

use crate::encoding::{ChordSymbol, Quarters, RhythmType};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum Event {
    Note {
        pitch: u8,
        rhythm: RhythmType,
        chord: ChordSymbol,
    },
    Rest {
        rhythm: RhythmType,
        chord: ChordSymbol,
    },
    Barline,
}

impl Event {
    pub fn rhythm(&self) -> Option<RhythmType> {
        match *self {
            Event::Note { rhythm, .. } | Event::Rest { rhythm, .. } => Some(rhythm),
            Event::Barline => None,
        }
    }

    pub fn chord(&self) -> Option<ChordSymbol> {
        match *self {
            Event::Note { chord, .. } | Event::Rest { chord, .. } => Some(chord),
            Event::Barline => None,
        }
    }

    pub fn pitch(&self) -> Option<u8> {
        match *self {
            Event::Note { pitch, .. } => Some(pitch),
            _ => None,
        }
    }

    pub fn is_barline(&self) -> bool {
        matches!(self, Event::Barline)
    }
}

#[derive(Clone, Debug, Default, PartialEq, Eq)]
pub struct LeadSheet {
    pub title: String,
    pub source_id: String,
    pub events: Vec<Event>,
}

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum SheetError {
    #[error("sheet has no events")]
    Empty,
    #[error("sheet starts with a barline")]
    LeadingBarline,
    #[error("consecutive barlines at event {0}")]
    ConsecutiveBarlines(usize),
    #[error("pitch {pitch} at event {at} outside MIDI range")]
    PitchOutOfRange { at: usize, pitch: u8 },
}

impl LeadSheet {
    pub fn from_events(events: Vec<Event>) -> Self {
        Self {
            events,
            ..Self::default()
        }
    }

    pub fn len(&self) -> usize {
        self.events.len()
    }

    pub fn is_empty(&self) -> bool {
        self.events.is_empty()
    }

    /// Structural invariants: no leading or doubled barlines, MIDI pitches only.
    /// An empty sheet is structurally valid.
    pub fn validate(&self) -> Result<(), SheetError> {
        if self.events.first() == Some(&Event::Barline) {
            return Err(SheetError::LeadingBarline);
        }
        for (i, e) in self.events.iter().enumerate() {
            if i > 0 && e.is_barline() && self.events[i - 1].is_barline() {
                return Err(SheetError::ConsecutiveBarlines(i));
            }
            if let Event::Note { pitch, .. } = *e {
                if pitch > 127 {
                    return Err(SheetError::PitchOutOfRange { at: i, pitch });
                }
            }
        }
        Ok(())
    }

    /// Events between barlines. A trailing run without a closing barline is
    /// returned as a final bar.
    pub fn bars(&self) -> Vec<&[Event]> {
        self.events
            .split(|e| e.is_barline())
            .filter(|bar| !bar.is_empty())
            .collect()
    }

    pub fn bar_count(&self) -> usize {
        self.events.iter().filter(|e| e.is_barline()).count()
    }

    pub fn total_quarters(&self) -> Quarters {
        self.events
            .iter()
            .filter_map(|e| e.rhythm())
            .map(|r| r.quarters())
            .sum()
    }

    /// Chord and rhythm streams with the melody stripped.
    pub fn template(&self) -> Vec<(Option<ChordSymbol>, Option<RhythmType>)> {
        self.events.iter().map(|e| (e.chord(), e.rhythm())).collect()
    }
}
