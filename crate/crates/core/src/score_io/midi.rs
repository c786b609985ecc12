use thiserror::Error;

use crate::encoding::ChordSymbol;
use crate::score::{Event, LeadSheet, SheetError};

pub const PPQ: u16 = 480;
pub const MELODY_CHANNEL: u8 = 0;
pub const CHORD_CHANNEL: u8 = 1;
const CHORD_BASE: u8 = 48;
const MELODY_VELOCITY: u8 = 96;
const CHORD_VELOCITY: u8 = 64;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum MidiError {
    #[error("tempo must be a positive number of beats per minute small enough to encode, got {0}")]
    InvalidTempo(f64),
    #[error("cannot export invalid sheet: {0}")]
    InvalidSheet(#[from] SheetError),
}

struct Track {
    bytes: Vec<u8>,
    pending: u32,
}

impl Track {
    fn new() -> Self {
        Self { bytes: Vec::new(), pending: 0 }
    }

    fn wait(&mut self, ticks: u32) {
        self.pending += ticks;
    }

    fn event(&mut self, data: &[u8]) {
        write_vlq(&mut self.bytes, self.pending);
        self.pending = 0;
        self.bytes.extend_from_slice(data);
    }

    fn finish(mut self) -> Vec<u8> {
        self.event(&[0xFF, 0x2F, 0x00]);
        let mut out = Vec::with_capacity(self.bytes.len() + 8);
        out.extend_from_slice(b"MTrk");
        out.extend_from_slice(&(self.bytes.len() as u32).to_be_bytes());
        out.extend_from_slice(&self.bytes);
        out
    }
}

fn write_vlq(out: &mut Vec<u8>, mut v: u32) {
    let mut buf = [0u8; 5];
    let mut i = buf.len() - 1;
    buf[i] = (v & 0x7F) as u8;
    v >>= 7;
    while v > 0 {
        i -= 1;
        buf[i] = 0x80 | (v & 0x7F) as u8;
        v >>= 7;
    }
    out.extend_from_slice(&buf[i..]);
}

fn triad(chord: ChordSymbol) -> [u8; 3] {
    chord.mode().triad().map(|o| CHORD_BASE + chord.root() + o)
}

/// Standard MIDI File, format 1: the melody track (with the tempo) followed by
/// a block-chord track whose triads sustain until the harmony changes.
/// Barlines take no time.
pub fn export_midi(sheet: &LeadSheet, tempo_bpm: f64) -> Result<Vec<u8>, MidiError> {
    if !(tempo_bpm.is_finite() && tempo_bpm > 0.0) {
        return Err(MidiError::InvalidTempo(tempo_bpm));
    }
    let usec = (60_000_000.0 / tempo_bpm).round();
    if !(1.0..=16_777_215.0).contains(&usec) {
        return Err(MidiError::InvalidTempo(tempo_bpm));
    }
    sheet.validate()?;
    let usec = usec as u32;

    let mut melody = Track::new();
    let [_, a, b, c] = usec.to_be_bytes();
    melody.event(&[0xFF, 0x51, 0x03, a, b, c]);
    let mut chords = Track::new();
    let mut sounding: Option<ChordSymbol> = None;

    for e in &sheet.events {
        let (rhythm, chord) = match (e.rhythm(), e.chord()) {
            (Some(r), Some(c)) => (r, c),
            _ => continue,
        };
        let ticks = rhythm.ticks(PPQ as u32).expect("every rhythm type is whole at 480 PPQ");
        if sounding != Some(chord) {
            if let Some(prev) = sounding {
                for n in triad(prev) {
                    chords.event(&[0x80 | CHORD_CHANNEL, n, 0]);
                }
            }
            for n in triad(chord) {
                chords.event(&[0x90 | CHORD_CHANNEL, n, CHORD_VELOCITY]);
            }
            sounding = Some(chord);
        }
        chords.wait(ticks);
        match e {
            Event::Note { pitch, .. } => {
                melody.event(&[0x90 | MELODY_CHANNEL, *pitch, MELODY_VELOCITY]);
                melody.wait(ticks);
                melody.event(&[0x80 | MELODY_CHANNEL, *pitch, 0]);
            }
            _ => melody.wait(ticks),
        }
    }
    if let Some(prev) = sounding {
        for n in triad(prev) {
            chords.event(&[0x80 | CHORD_CHANNEL, n, 0]);
        }
    }

    let mut out = Vec::new();
    out.extend_from_slice(b"MThd");
    out.extend_from_slice(&6u32.to_be_bytes());
    out.extend_from_slice(&1u16.to_be_bytes());
    out.extend_from_slice(&2u16.to_be_bytes());
    out.extend_from_slice(&PPQ.to_be_bytes());
    out.extend(melody.finish());
    out.extend(chords.finish());
    Ok(out)
}
