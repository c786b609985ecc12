mod common;

use leadsheet::preprocess::preprocess_document;
use leadsheet::score::{Event, LeadSheet};
use leadsheet::score_io::{export_midi, export_musicxml, parse_musicxml, CHORD_CHANNEL, MELODY_CHANNEL, PPQ};
use midly::{MetaMessage, MidiMessage, Smf, Timing, TrackEventKind};
use proptest::prelude::*;

/// Absolute-tick note spans `(key, on, off)` plus end-of-track tick.
fn spans(track: &[midly::TrackEvent], channel: u8) -> (Vec<(u8, u64, u64)>, u64) {
    let mut t = 0u64;
    let mut open: Vec<(u8, u64)> = Vec::new();
    let mut out = Vec::new();
    let mut end = 0;
    for ev in track {
        t += ev.delta.as_int() as u64;
        match ev.kind {
            TrackEventKind::Midi { channel: ch, message } if ch.as_int() == channel => match message {
                MidiMessage::NoteOn { key, vel } if vel.as_int() > 0 => open.push((key.as_int(), t)),
                MidiMessage::NoteOff { key, .. } | MidiMessage::NoteOn { key, .. } => {
                    let i = open.iter().position(|o| o.0 == key.as_int()).expect("note-off matches a note-on");
                    let (k, on) = open.remove(i);
                    out.push((k, on, t));
                }
                _ => {}
            },
            TrackEventKind::Meta(MetaMessage::EndOfTrack) => end = t,
            _ => {}
        }
    }
    assert!(open.is_empty(), "dangling notes");
    out.sort_by_key(|s| (s.1, s.0));
    (out, end)
}

fn expected_notes(sheet: &LeadSheet) -> (Vec<(u8, u64, u64)>, u64) {
    let mut t = 0u64;
    let mut out = Vec::new();
    for e in &sheet.events {
        if let Some(r) = e.rhythm() {
            let d = r.ticks(PPQ as u32).unwrap() as u64;
            if let Some(p) = e.pitch() {
                out.push((p, t, t + d));
            }
            t += d;
        }
    }
    (out, t)
}

fn check_midi(sheet: &LeadSheet) {
    let bytes = export_midi(sheet, 120.0).unwrap();
    let smf = Smf::parse(&bytes).unwrap();
    assert_eq!(smf.header.timing, Timing::Metrical(midly::num::u15::new(PPQ)));
    assert_eq!(smf.tracks.len(), 2);
    let tempo = smf.tracks[0]
        .iter()
        .find_map(|e| match e.kind {
            TrackEventKind::Meta(MetaMessage::Tempo(t)) => Some(t.as_int()),
            _ => None,
        })
        .unwrap();
    assert_eq!(tempo, 500_000);
    let (melody, end) = spans(&smf.tracks[0], MELODY_CHANNEL);
    let (expect, total) = expected_notes(sheet);
    assert_eq!(melody, expect);
    assert_eq!(end, total);
    let quarters = sheet.total_quarters();
    assert_eq!(total * *quarters.denom() as u64, *quarters.numer() as u64 * PPQ as u64);

    let (chords, chord_end) = spans(&smf.tracks[1], CHORD_CHANNEL);
    assert_eq!(chord_end, total);
    // triads cover the timeline without gaps
    let mut starts: Vec<u64> = chords.iter().map(|c| c.1).collect();
    starts.dedup();
    assert_eq!(starts.first(), Some(&0).filter(|_| total > 0));
    assert_eq!(chords.len(), starts.len() * 3);
    assert!(chords.iter().all(|c| (48..72).contains(&c.0)));
}

#[test]
fn fixture_sheet_writes_expected_midi() {
    let xml = std::fs::read(concat!(env!("CARGO_MANIFEST_DIR"), "/tests/fixtures/two_bar.musicxml")).unwrap();
    let sheet = preprocess_document(&xml, "two_bar").unwrap();
    check_midi(&sheet);
    let smf_bytes = export_midi(&sheet, 120.0).unwrap();
    let smf = Smf::parse(&smf_bytes).unwrap();
    let (melody, _) = spans(&smf.tracks[0], MELODY_CHANNEL);
    let keys: Vec<u8> = melody.iter().map(|m| m.0).collect();
    assert_eq!(keys, [67, 64, 67, 72, 74, 71, 67]);
    let (chords, _) = spans(&smf.tracks[1], CHORD_CHANNEL);
    // C major for the first bar, G major for the second, voiced up from 48 + root
    assert_eq!(chords, [(48, 0, 1920), (52, 0, 1920), (55, 0, 1920), (55, 1920, 3840), (59, 1920, 3840), (62, 1920, 3840)]);
}

#[test]
fn exported_fixture_parses_back() {
    let xml = std::fs::read(concat!(env!("CARGO_MANIFEST_DIR"), "/tests/fixtures/two_bar.musicxml")).unwrap();
    let sheet = preprocess_document(&xml, "two_bar").unwrap();
    let out = export_musicxml(&sheet).unwrap();
    let raw = parse_musicxml(&out).unwrap();
    assert_eq!(raw.measures.len(), 2);
    assert_eq!(raw.measures[0].harmonies.len(), 1);
    assert_eq!(raw.measures[1].harmonies[0].root_step, 'G');
    let again = preprocess_document(&out, "two_bar").unwrap();
    assert_eq!(again.events, sheet.events);
}

#[test]
fn unterminated_bar_still_exports() {
    let mut sheet = common::random_sheet(3);
    sheet.events.pop();
    let out = export_musicxml(&sheet).unwrap();
    let back = preprocess_document(&out, "x").unwrap();
    let mut closed = sheet.events.clone();
    closed.push(Event::Barline);
    assert_eq!(back.events, closed);
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(200))]

    #[test]
    fn musicxml_round_trip(seed in any::<u64>()) {
        let sheet = common::random_sheet(seed);
        let xml = export_musicxml(&sheet).unwrap();
        let back = preprocess_document(&xml, &sheet.source_id).unwrap();
        prop_assert_eq!(&back.events, &sheet.events);
        prop_assert_eq!(&back.title, &sheet.title);
    }

    #[test]
    fn midi_ticks_are_conserved(seed in any::<u64>()) {
        check_midi(&common::random_sheet(seed));
    }
}
