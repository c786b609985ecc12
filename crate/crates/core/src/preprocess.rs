//! Cleaning steps that turn a parsed score into a monophonic, linear lead
//! sheet, and the corpus-level pipeline around them.

use std::fmt;
use std::path::Path;

use thiserror::Error;

use crate::encoding::{map_mode, ChordSymbol, EncodingError, Quarters, RhythmType};
use crate::score::{Event, LeadSheet};
use crate::score_io::{parse_musicxml, Harmony, ParseError, RawEvent, RawMeasure, RawScore};

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum StructureError {
    #[error("repeat start in measure {measure} opens while an earlier repeat is still open")]
    NestedRepeat { measure: u32 },
    #[error("repeat started in measure {measure} is never closed")]
    UnclosedRepeat { measure: u32 },
    #[error("navigation marker {marker:?} in measure {measure}")]
    Navigation { measure: u32, marker: String },
}

/// Why a sheet did not make it into the corpus.
#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum DropReason {
    #[error("{0}")]
    Parse(#[from] ParseError),
    #[error("{0}")]
    Structure(StructureError),
    #[error("no chord symbols anywhere in the piece")]
    NoHarmony,
    #[error("note in measure {measure} precedes the first chord symbol")]
    MissingHarmony { measure: u32 },
    #[error("chord kind {0:?} is not in the mode table")]
    UnknownMode(String),
    #[error("duration of {duration} quarters in measure {measure} is not one of the twelve rhythm types")]
    UnsupportedRhythm { measure: u32, duration: Quarters },
    #[error("no notes or rests left after cleaning")]
    Empty,
    #[error("{0}")]
    Io(String),
}

impl DropReason {
    /// Short stable label used in reports.
    pub fn code(&self) -> &'static str {
        match self {
            DropReason::Parse(ParseError::Xml { .. }) => "malformed-xml",
            DropReason::Parse(ParseError::Unsupported { .. }) => "unsupported-feature",
            DropReason::Parse(ParseError::Format { .. }) => "format-error",
            DropReason::Structure(StructureError::Navigation { .. }) => "navigation",
            DropReason::Structure(_) => "unbalanced-repeats",
            DropReason::NoHarmony => "no-harmony",
            DropReason::MissingHarmony { .. } => "missing-harmony",
            DropReason::UnknownMode(_) => "unknown-mode",
            DropReason::UnsupportedRhythm { .. } => "unsupported-rhythm",
            DropReason::Empty => "empty",
            DropReason::Io(_) => "unreadable",
        }
    }
}

impl From<StructureError> for DropReason {
    fn from(e: StructureError) -> Self {
        DropReason::Structure(e)
    }
}

fn zero() -> Quarters {
    Quarters::from_integer(0)
}

/// Keeps one pitch per onset, the highest, with the duration of the group it
/// came from. Pitches beat rests at a shared onset; an event that starts while
/// a kept event still sounds is dropped. Grace notes are left alone.
pub fn eliminate_polyphony(mut score: RawScore) -> RawScore {
    for m in &mut score.measures {
        let mut events = std::mem::take(&mut m.events);
        // stable: grace notes stay ahead of the principal note they decorate
        events.sort_by(|a, b| a.onset.cmp(&b.onset).then(b.grace.cmp(&a.grace)));
        let mut kept: Vec<RawEvent> = Vec::with_capacity(events.len());
        let mut sounding_until: Option<Quarters> = None;
        for mut e in events {
            if let Some(&top) = e.pitches.iter().max() {
                e.pitches = vec![top];
            }
            if e.grace {
                kept.push(e);
                continue;
            }
            if let Some(prev) = kept.iter_mut().rev().find(|p| !p.grace) {
                if prev.onset == e.onset {
                    if beats(&e, prev) {
                        *prev = e;
                        sounding_until = Some(prev.onset + prev.duration);
                    }
                    continue;
                }
            }
            if sounding_until.is_some_and(|end| e.onset < end) {
                continue;
            }
            sounding_until = Some(e.onset + e.duration);
            kept.push(e);
        }
        m.events = kept;
    }
    score
}

fn beats(challenger: &RawEvent, incumbent: &RawEvent) -> bool {
    match (challenger.pitches.first(), incumbent.pitches.first()) {
        (Some(a), Some(b)) => a > b,
        (Some(_), None) => true,
        _ => false,
    }
}

/// Clears tie flags; tied notes become independent notes of their written
/// durations.
pub fn ignore_ties(mut score: RawScore) -> RawScore {
    for e in score.measures.iter_mut().flat_map(|m| m.events.iter_mut()) {
        e.tie_start = false;
        e.tie_stop = false;
    }
    score
}

/// Removes the opening measure when it is shorter than its time signature.
/// Its last chord symbol carries into the new first measure, as does a repeat
/// start. Only the opening measure of the piece is ever considered.
pub fn delete_anacrusis(mut score: RawScore) -> RawScore {
    if score.pickup_checked {
        return score;
    }
    score.pickup_checked = true;
    let Some(first) = score.measures.first() else {
        return score;
    };
    let Some(time) = first.time else {
        return score;
    };
    if first.duration_sum() >= time.quarters() {
        return score;
    }
    let removed = score.measures.remove(0);
    if let Some(next) = score.measures.first_mut() {
        if let Some(last) = removed.harmonies.last() {
            if !next.harmonies.iter().any(|h| h.onset == zero()) {
                next.harmonies.insert(
                    0,
                    Harmony {
                        onset: zero(),
                        ..last.clone()
                    },
                );
            }
        }
        next.repeat_start |= removed.repeat_start;
    }
    score
}

fn check_structure(measures: &[RawMeasure]) -> Result<(), StructureError> {
    let mut open: Option<u32> = None;
    for m in measures {
        if let Some(marker) = &m.navigation {
            return Err(StructureError::Navigation {
                measure: m.number,
                marker: marker.clone(),
            });
        }
        if m.repeat_start {
            if open.is_some() {
                return Err(StructureError::NestedRepeat { measure: m.number });
            }
            open = Some(m.number);
        }
        if m.repeat_end {
            open = None;
        }
    }
    match open {
        Some(measure) => Err(StructureError::UnclosedRepeat { measure }),
        None => Ok(()),
    }
}

/// Playback order of measure indices. A backward repeat plays `times` passes
/// when given, otherwise one more than its highest volta number, otherwise
/// two; volta `k` is played on pass `k`.
pub fn playback_order(measures: &[RawMeasure]) -> Result<Vec<usize>, StructureError> {
    check_structure(measures)?;
    let mut order = Vec::new();
    let (mut i, mut start, mut pass) = (0usize, 0usize, 1u32);
    let (mut jumped, mut finished) = (false, false);
    while i < measures.len() {
        let m = &measures[i];
        if !jumped {
            if m.repeat_start {
                start = i;
                pass = 1;
                finished = false;
            } else if m.ending.is_none() && (finished || (i > 0 && measures[i - 1].ending.is_some())) {
                start = i;
                pass = 1;
                finished = false;
            }
        }
        jumped = false;
        let plays = m.ending.as_ref().map_or(true, |e| e.contains(&pass));
        if plays {
            order.push(i);
            if m.repeat_end {
                let total = m.repeat_times.unwrap_or_else(|| {
                    m.ending
                        .as_ref()
                        .and_then(|e| e.iter().max())
                        .map_or(2, |max| max + 1)
                });
                if pass < total {
                    pass += 1;
                    i = start;
                    jumped = true;
                    continue;
                }
                finished = true;
            }
        }
        i += 1;
    }
    Ok(order)
}

/// Linearizes repeats and volta brackets. A measure reached by a jump gets a
/// chord symbol at its downbeat matching the one in force there in written
/// order, so the harmony does not leak across the jump.
pub fn unfold_repetitions(score: RawScore) -> Result<RawScore, StructureError> {
    let order = playback_order(&score.measures)?;
    let mut entering: Vec<Option<Harmony>> = Vec::with_capacity(score.measures.len());
    let mut active: Option<Harmony> = None;
    for m in &score.measures {
        entering.push(active.clone());
        if let Some(h) = last_harmony(&m.harmonies) {
            active = Some(h.clone());
        }
    }
    let mut measures = Vec::with_capacity(order.len());
    let mut prev: Option<usize> = None;
    for &idx in &order {
        let mut m = score.measures[idx].clone();
        m.repeat_start = false;
        m.repeat_end = false;
        m.repeat_times = None;
        m.ending = None;
        let continuous = prev.map_or(idx == 0, |p| p + 1 == idx);
        if !continuous && !m.harmonies.iter().any(|h| h.onset == zero()) {
            if let Some(h) = &entering[idx] {
                m.harmonies.insert(
                    0,
                    Harmony {
                        onset: zero(),
                        ..h.clone()
                    },
                );
            }
        }
        measures.push(m);
        prev = Some(idx);
    }
    Ok(RawScore { measures, ..score })
}

/// The harmony in force at the end of a measure: latest onset, last written
/// among equals.
fn last_harmony(harmonies: &[Harmony]) -> Option<&Harmony> {
    harmonies.iter().rev().max_by_key(|h| h.onset)
}

/// Drops grace notes.
pub fn remove_ornaments(mut score: RawScore) -> RawScore {
    for m in &mut score.measures {
        m.events.retain(|e| !e.grace);
    }
    score
}

/// Builds the event sequence: one event per note or rest with the chord in
/// force attached, a barline closing every measure that holds events. Gaps in
/// a measure become rests. Rests ahead of the first chord symbol take that
/// chord; a note ahead of it is an error.
pub fn to_lead_sheet(score: &RawScore) -> Result<LeadSheet, DropReason> {
    struct Slot {
        measure: u32,
        onset: Quarters,
        pitch: Option<u8>,
        duration: Quarters,
    }
    let mut timeline: Vec<(Slot, Option<ChordSymbol>)> = Vec::new();
    let mut barline_after: Vec<usize> = Vec::new();
    let mut active: Option<ChordSymbol> = None;
    if score.measures.iter().flat_map(|m| &m.events).all(|e| e.grace) {
        return Err(DropReason::Empty);
    }
    if score.measures.iter().all(|m| m.harmonies.is_empty()) {
        return Err(DropReason::NoHarmony);
    }

    for m in &score.measures {
        let mut harmonies: Vec<(Quarters, ChordSymbol)> = Vec::with_capacity(m.harmonies.len());
        for h in &m.harmonies {
            let mode = map_mode(&h.kind).map_err(|e| match e {
                EncodingError::UnknownMode(k) => DropReason::UnknownMode(k),
                other => DropReason::UnknownMode(other.to_string()),
            })?;
            harmonies.push((h.onset, ChordSymbol::new(h.pitch_class(), mode)));
        }
        // stable sort keeps the last-written symbol at a shared onset last
        harmonies.sort_by(|a, b| a.0.cmp(&b.0));

        let mut events: Vec<&RawEvent> = m.events.iter().filter(|e| !e.grace).collect();
        events.sort_by(|a, b| a.onset.cmp(&b.onset));
        let mut slots = Vec::with_capacity(events.len());
        let mut cursor = zero();
        for e in events {
            if e.onset > cursor {
                slots.push(Slot {
                    measure: m.number,
                    onset: cursor,
                    pitch: None,
                    duration: e.onset - cursor,
                });
            }
            slots.push(Slot {
                measure: m.number,
                onset: e.onset,
                pitch: e.pitches.iter().max().copied(),
                duration: e.duration,
            });
            cursor = cursor.max(e.onset + e.duration);
        }
        if slots.is_empty() {
            continue;
        }
        let mut next_h = 0;
        for slot in slots {
            while next_h < harmonies.len() && harmonies[next_h].0 <= slot.onset {
                active = Some(harmonies[next_h].1);
                next_h += 1;
            }
            if active.is_none() && slot.pitch.is_some() {
                return Err(DropReason::MissingHarmony { measure: slot.measure });
            }
            timeline.push((slot, active));
        }
        barline_after.push(timeline.len());
    }

    if timeline.is_empty() {
        return Err(DropReason::Empty);
    }
    let first_chord = timeline.iter().find_map(|(_, c)| *c).ok_or(DropReason::NoHarmony)?;

    let mut events = Vec::with_capacity(timeline.len() + barline_after.len());
    let mut bars = barline_after.into_iter().peekable();
    for (i, (slot, chord)) in timeline.into_iter().enumerate() {
        let rhythm = RhythmType::from_quarters(slot.duration).ok_or(DropReason::UnsupportedRhythm {
            measure: slot.measure,
            duration: slot.duration,
        })?;
        let chord = chord.unwrap_or(first_chord);
        events.push(match slot.pitch {
            Some(pitch) => Event::Note { pitch, rhythm, chord },
            None => Event::Rest { rhythm, chord },
        });
        if bars.peek() == Some(&(i + 1)) {
            bars.next();
            events.push(Event::Barline);
        }
    }
    Ok(LeadSheet {
        title: score.title.clone().unwrap_or_default(),
        source_id: String::new(),
        events,
    })
}

/// All cleaning steps in their fixed order, then conversion.
pub fn preprocess(score: RawScore) -> Result<LeadSheet, DropReason> {
    let score = eliminate_polyphony(score);
    let score = ignore_ties(score);
    let score = delete_anacrusis(score);
    let score = unfold_repetitions(score)?;
    let score = remove_ornaments(score);
    to_lead_sheet(&score)
}

/// Parses and preprocesses one document.
pub fn preprocess_document(document: &[u8], source_id: &str) -> Result<LeadSheet, DropReason> {
    let raw = parse_musicxml(document)?;
    let mut sheet = preprocess(raw)?;
    sheet.source_id = source_id.to_string();
    if sheet.title.is_empty() {
        sheet.title = source_id.to_string();
    }
    Ok(sheet)
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub enum SheetStatus {
    Kept { events: usize },
    Dropped(DropReason),
}

/// One line of the preprocessing report.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct SheetReport {
    pub source: String,
    pub status: SheetStatus,
}

impl fmt::Display for SheetReport {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match &self.status {
            SheetStatus::Kept { events } => write!(f, "{}\tkept\t{} events", self.source, events),
            SheetStatus::Dropped(reason) => {
                write!(f, "{}\tdropped: {}\t{}", self.source, reason.code(), reason)
            }
        }
    }
}

/// Preprocesses files in the given order, returning kept sheets and one
/// report entry per file.
pub fn preprocess_files<P: AsRef<Path>>(paths: &[P]) -> (Vec<LeadSheet>, Vec<SheetReport>) {
    let mut sheets = Vec::new();
    let mut report = Vec::with_capacity(paths.len());
    for path in paths {
        let path = path.as_ref();
        let source = path
            .file_name()
            .map(|n| n.to_string_lossy().into_owned())
            .unwrap_or_else(|| path.display().to_string());
        let result = std::fs::read(path)
            .map_err(|e| DropReason::Io(e.to_string()))
            .and_then(|bytes| preprocess_document(&bytes, &source));
        let status = match result {
            Ok(sheet) => {
                let status = SheetStatus::Kept { events: sheet.len() };
                sheets.push(sheet);
                status
            }
            Err(reason) => {
                log::info!("dropping {source}: {reason}");
                SheetStatus::Dropped(reason)
            }
        };
        report.push(SheetReport { source, status });
    }
    (sheets, report)
}
