use std::fs;
use std::path::PathBuf;

use leadsheet::encoding::{ChordSymbol, Mode, Quarters, RhythmType, MODE_TABLE, ROOT_NAMES};
use leadsheet::preprocess::{
    delete_anacrusis, eliminate_polyphony, ignore_ties, playback_order, preprocess, preprocess_document,
    preprocess_files, remove_ornaments, to_lead_sheet, unfold_repetitions, DropReason, SheetStatus,
};
use leadsheet::score::{Event, LeadSheet};
use leadsheet::score_io::{Harmony, RawEvent, RawMeasure, RawScore, TimeSignature};
use proptest::prelude::*;

fn fixture(name: &str) -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("tests/fixtures").join(name)
}

fn load(name: &str) -> Result<LeadSheet, DropReason> {
    preprocess_document(&fs::read(fixture(name)).unwrap(), name)
}

fn pitch_name(p: u8) -> String {
    format!("{}{}", ROOT_NAMES[(p % 12) as usize], p as i32 / 12 - 1)
}

/// `i chord rhythm melody` per event, barlines as `|`.
fn table(sheet: &LeadSheet) -> Vec<String> {
    sheet
        .events
        .iter()
        .enumerate()
        .map(|(i, e)| match e {
            Event::Barline => format!("{} | | |", i + 1),
            Event::Note { pitch, rhythm, chord } => {
                format!("{} {} {} {}", i + 1, chord, rhythm.name(), pitch_name(*pitch))
            }
            Event::Rest { rhythm, chord } => format!("{} {} {} rest", i + 1, chord, rhythm.name()),
        })
        .collect()
}

#[test]
fn two_bar_example_decomposes_into_nine_rows() {
    let sheet = load("two_bar.musicxml").unwrap();
    assert_eq!(sheet.title, "Two Bars");
    assert_eq!(
        table(&sheet),
        [
            "1 C quarter G4",
            "2 C 8th E4",
            "3 C 8th G4",
            "4 C half C5",
            "5 | | |",
            "6 G quarter D5",
            "7 G quarter B4",
            "8 G half G4",
            "9 | | |",
        ]
    );
}

#[test]
fn highest_note_survives_chords_and_voices() {
    let sheet = load("polyphony.musicxml").unwrap();
    assert_eq!(table(&sheet), ["1 C quarter G4", "2 C quarter D4", "3 C half E4", "4 | | |"]);
}

#[test]
fn tied_notes_stay_separate() {
    let sheet = load("ties.musicxml").unwrap();
    assert_eq!(
        table(&sheet),
        ["1 F half A4", "2 F half G4", "3 | | |", "4 F half G4", "5 F half F4", "6 | | |"]
    );
}

#[test]
fn pickup_bar_is_removed_and_its_chord_carried() {
    let sheet = load("anacrusis.musicxml").unwrap();
    assert_eq!(
        table(&sheet),
        ["1 Dm half D5", "2 Dm half C5", "3 | | |", "4 G whole B4", "5 | | |"]
    );
}

#[test]
fn voltas_are_unfolded() {
    let sheet = load("repeats.musicxml").unwrap();
    assert_eq!(
        table(&sheet),
        [
            "1 C whole C4",
            "2 | | |",
            "3 F whole D4",
            "4 | | |",
            "5 C whole C4",
            "6 | | |",
            "7 G whole E4",
            "8 | | |",
            "9 C whole F4",
            "10 | | |",
        ]
    );
}

#[test]
fn grace_notes_are_removed() {
    let sheet = load("ornaments.musicxml").unwrap();
    assert_eq!(table(&sheet), ["1 A#m quarter C5", "2 A#m quarter G4", "3 A#m half rest", "4 | | |"]);
}

#[test]
fn rejected_fixtures_name_their_reason() {
    let names = ["unknown_mode.musicxml", "da_capo.musicxml", "no_harmony.musicxml", "two_bar.musicxml"];
    let paths: Vec<PathBuf> = names.iter().map(|n| fixture(n)).collect();
    let (kept, report) = preprocess_files(&paths);
    assert_eq!(kept.len(), 1);
    let codes: Vec<&str> = report
        .iter()
        .map(|r| match &r.status {
            SheetStatus::Dropped(reason) => reason.code(),
            SheetStatus::Kept { .. } => "kept",
        })
        .collect();
    assert_eq!(codes, ["unknown-mode", "navigation", "no-harmony", "kept"]);
    assert_eq!(report[3].to_string(), "two_bar.musicxml\tkept\t9 events");
    assert!(report[0].to_string().starts_with("unknown_mode.musicxml\tdropped: unknown-mode\t"));
    let missing = preprocess_files(&[fixture("absent.musicxml")]).1;
    assert!(matches!(&missing[0].status, SheetStatus::Dropped(DropReason::Io(_))));
}

#[test]
fn every_fixture_parses_or_fails_with_a_typed_error() {
    for entry in fs::read_dir(fixture("")).unwrap() {
        let path = entry.unwrap().path();
        let bytes = fs::read(&path).unwrap();
        let name = path.file_name().unwrap().to_string_lossy().into_owned();
        match preprocess_document(&bytes, &name) {
            Ok(sheet) => assert!(sheet.validate().is_ok(), "{name}"),
            Err(reason) => assert!(!reason.code().is_empty(), "{name}"),
        }
    }
}

// random raw scores

fn q(n: i64, d: i64) -> Quarters {
    Quarters::new(n, d)
}

const DURATIONS: [(i64, i64); 6] = [(1, 2), (1, 1), (2, 1), (3, 2), (1, 4), (4, 1)];

fn arb_measure() -> impl Strategy<Value = (Vec<(usize, Vec<u8>, bool, bool, bool)>, Vec<(usize, char, usize)>, bool)> {
    let group = (
        0..DURATIONS.len(),
        prop::collection::vec(48u8..84, 0..3),
        any::<bool>(),
        any::<bool>(),
        prop::bool::weighted(0.15),
    );
    let harmony = (0..4usize, prop::sample::select(vec!['A', 'B', 'C', 'D', 'E', 'F', 'G']), 0..MODE_TABLE.len());
    (
        prop::collection::vec(group, 1..5),
        prop::collection::vec(harmony, 0..2),
        prop::bool::weighted(0.3),
    )
}

fn build(measures: Vec<(Vec<(usize, Vec<u8>, bool, bool, bool)>, Vec<(usize, char, usize)>, bool)>) -> RawScore {
    let mut out = Vec::new();
    for (n, (groups, harmonies, voice)) in measures.into_iter().enumerate() {
        let mut events = Vec::new();
        let mut t = q(0, 1);
        for (d, pitches, ts, tp, grace) in groups {
            let dur = if grace { q(0, 1) } else { q(DURATIONS[d].0, DURATIONS[d].1) };
            events.push(RawEvent {
                onset: t,
                pitches,
                duration: dur,
                tie_start: ts,
                tie_stop: tp,
                grace,
            });
            t += dur;
        }
        if voice {
            events.push(RawEvent {
                onset: q(0, 1),
                pitches: vec![40],
                duration: t.max(q(1, 1)),
                tie_start: false,
                tie_stop: false,
                grace: false,
            });
            events.sort_by_key(|e| e.onset);
        }
        let harmonies = harmonies
            .into_iter()
            .map(|(beat, step, kind)| Harmony {
                onset: q(beat as i64, 1).min(t),
                root_step: step,
                root_alter: 0,
                kind: MODE_TABLE[kind].0.to_string(),
            })
            .collect();
        out.push(RawMeasure {
            number: n as u32 + 1,
            time: Some(TimeSignature::new(4, 4)),
            events,
            harmonies,
            ..RawMeasure::default()
        });
    }
    RawScore {
        title: Some("random".into()),
        measures: out,
        pickup_checked: false,
    }
}

fn arb_score() -> impl Strategy<Value = RawScore> {
    prop::collection::vec(arb_measure(), 1..6).prop_map(build)
}

/// Adds a forward repeat, optional volta pair and backward repeat.
fn arb_repeated_score() -> impl Strategy<Value = (RawScore, usize, usize, bool)> {
    (prop::collection::vec(arb_measure(), 5..8), 0..2usize, 1..3usize, any::<bool>()).prop_map(|(ms, start, len, volta)| {
        let mut s = build(ms);
        let end = start + len;
        s.measures[start].repeat_start = true;
        if volta {
            s.measures[end].ending = Some(vec![1]);
            s.measures[end].repeat_end = true;
            s.measures[end + 1].ending = Some(vec![2]);
        } else {
            s.measures[end].repeat_end = true;
        }
        (s, start, end, volta)
    })
}

/// Reference playback order for one repeated section.
fn expected_order(n: usize, start: usize, end: usize, volta: bool) -> Vec<usize> {
    let mut v: Vec<usize> = (0..=end).collect();
    if volta {
        v.extend(start..end);
        v.extend(end + 1..n);
    } else {
        v.extend(start..=end);
        v.extend(end + 1..n);
    }
    v
}

proptest! {
    #[test]
    fn every_step_is_idempotent(score in arb_score()) {
        let once = eliminate_polyphony(score.clone());
        prop_assert_eq!(eliminate_polyphony(once.clone()), once);
        let once = ignore_ties(score.clone());
        prop_assert_eq!(ignore_ties(once.clone()), once);
        let once = delete_anacrusis(score.clone());
        prop_assert_eq!(delete_anacrusis(once.clone()), once);
        let once = remove_ornaments(score.clone());
        prop_assert_eq!(remove_ornaments(once.clone()), once);
        let once = unfold_repetitions(score.clone()).unwrap();
        prop_assert_eq!(unfold_repetitions(once.clone()).unwrap(), once);
    }

    #[test]
    fn cleaning_only_removes(score in arb_score()) {
        let before = score.event_count();
        prop_assert!(eliminate_polyphony(score.clone()).event_count() <= before);
        let graces = score.measures.iter().flat_map(|m| &m.events).filter(|e| e.grace).count();
        let cleaned = remove_ornaments(score.clone());
        prop_assert_eq!(cleaned.event_count(), before - graces);
        let kept: Vec<&RawEvent> = score.measures.iter().flat_map(|m| &m.events).filter(|e| !e.grace).collect();
        let after: Vec<&RawEvent> = cleaned.measures.iter().flat_map(|m| &m.events).collect();
        prop_assert_eq!(kept, after);
    }

    #[test]
    fn repeats_follow_the_reference_order((score, start, end, volta) in arb_repeated_score()) {
        let n = score.measures.len();
        let order = playback_order(&score.measures).unwrap();
        prop_assert_eq!(&order, &expected_order(n, start, end, volta));
        let unfolded = unfold_repetitions(score.clone()).unwrap();
        prop_assert!(unfolded.measures.len() >= n);
        let once = unfold_repetitions(unfolded.clone()).unwrap();
        prop_assert_eq!(once, unfolded);
    }

    #[test]
    fn lead_sheets_are_well_formed(score in arb_score()) {
        let has_harmony = score.measures.iter().any(|m| !m.harmonies.is_empty());
        let cleaned = unfold_repetitions(delete_anacrusis(ignore_ties(eliminate_polyphony(score.clone())))).unwrap();
        let has_notes = cleaned.measures.iter().flat_map(|m| &m.events).any(|e| !e.grace && !e.pitches.is_empty());
        match preprocess(score) {
            Ok(sheet) => {
                prop_assert!(has_harmony);
                prop_assert!(sheet.validate().is_ok());
                for w in sheet.events.windows(2) {
                    prop_assert!(!(w[0].is_barline() && w[1].is_barline()));
                }
                prop_assert!(sheet.events.iter().all(|e| e.is_barline() || e.chord().is_some()));
            }
            // a chord symbol placed after the last rest applies to nothing
            Err(DropReason::NoHarmony) => prop_assert!(!has_harmony || !has_notes),
            Err(DropReason::UnsupportedRhythm { .. } | DropReason::Empty | DropReason::MissingHarmony { .. }) => {}
            Err(other) => prop_assert!(false, "unexpected drop {:?}", other),
        }
    }
}

#[test]
fn to_lead_sheet_fills_chords_forward() {
    let ev = |onset: Quarters, p: u8| RawEvent {
        onset,
        pitches: vec![p],
        duration: q(2, 1),
        tie_start: false,
        tie_stop: false,
        grace: false,
    };
    let h = |step, kind: &str| Harmony {
        onset: q(0, 1),
        root_step: step,
        root_alter: 0,
        kind: kind.into(),
    };
    let score = RawScore {
        title: None,
        measures: vec![
            RawMeasure {
                number: 1,
                time: Some(TimeSignature::new(4, 4)),
                events: vec![ev(q(0, 1), 60), ev(q(2, 1), 62)],
                harmonies: vec![h('A', "minor-7")],
                ..RawMeasure::default()
            },
            RawMeasure {
                number: 2,
                time: Some(TimeSignature::new(4, 4)),
                events: vec![ev(q(0, 1), 64), ev(q(2, 1), 65)],
                ..RawMeasure::default()
            },
        ],
        pickup_checked: false,
    };
    let sheet = to_lead_sheet(&score).unwrap();
    let am = ChordSymbol::new(9, Mode::Minor);
    assert!(sheet.events.iter().filter(|e| !e.is_barline()).all(|e| e.chord() == Some(am)));
    assert_eq!(sheet.events[0].rhythm(), Some(RhythmType::Half));
}
