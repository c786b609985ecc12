use std::fmt::Write as _;

use num_rational::Ratio;
use thiserror::Error;

use super::TimeSignature;
use crate::encoding::{ChordSymbol, Mode, Quarters, RhythmType};
use crate::score::{Event, LeadSheet, SheetError};

/// Divisions per quarter in exported documents; every rhythm type is a whole
/// number of these.
pub const EXPORT_DIVISIONS: i64 = 48;

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum ExportError {
    #[error("cannot export invalid sheet: {0}")]
    InvalidSheet(#[from] SheetError),
}

/// Time signature whose length equals `sum` quarters, using the smallest
/// denominator of 4, 8, 16, 32, 64 that gives a whole numerator. Sums that fit
/// none of these (triplet remainders) round down to sixty-fourths so the
/// nominal length never exceeds the measure.
pub fn measure_time_signature(sum: Quarters) -> TimeSignature {
    for den in [4i64, 8, 16, 32, 64] {
        let num = sum * Ratio::new(den, 4);
        if num.is_integer() && *num.numer() > 0 {
            return TimeSignature::new(*num.numer() as u32, den as u32);
        }
    }
    let sixty_fourths = (sum * Ratio::from_integer(16)).floor().to_integer().max(1);
    TimeSignature::new(sixty_fourths as u32, 64)
}

fn note_type(r: RhythmType) -> (&'static str, bool, bool) {
    // (type, dotted, triplet)
    match r {
        RhythmType::ThirtySecond => ("32nd", false, false),
        RhythmType::DottedThirtySecond => ("32nd", true, false),
        RhythmType::Sixteenth => ("16th", false, false),
        RhythmType::EighthTriplet => ("eighth", false, true),
        RhythmType::Eighth => ("eighth", false, false),
        RhythmType::QuarterTriplet => ("quarter", false, true),
        RhythmType::DottedEighth => ("eighth", true, false),
        RhythmType::Quarter => ("quarter", false, false),
        RhythmType::DottedQuarter => ("quarter", true, false),
        RhythmType::Half => ("half", false, false),
        RhythmType::DottedHalf => ("half", true, false),
        RhythmType::Whole => ("whole", false, false),
    }
}

const STEPS: [(char, i32); 12] = [
    ('C', 0),
    ('C', 1),
    ('D', 0),
    ('D', 1),
    ('E', 0),
    ('F', 0),
    ('F', 1),
    ('G', 0),
    ('G', 1),
    ('A', 0),
    ('A', 1),
    ('B', 0),
];

fn mode_kind(mode: Mode) -> &'static str {
    match mode {
        Mode::Major => "major",
        Mode::Minor => "minor",
        Mode::Diminished => "diminished",
        Mode::Augmented => "augmented",
    }
}

fn escape(text: &str) -> String {
    let mut out = String::with_capacity(text.len());
    for c in text.chars() {
        match c {
            '&' => out.push_str("&amp;"),
            '<' => out.push_str("&lt;"),
            '>' => out.push_str("&gt;"),
            '"' => out.push_str("&quot;"),
            '\'' => out.push_str("&apos;"),
            c => out.push(c),
        }
    }
    out
}

fn write_harmony(out: &mut String, chord: ChordSymbol) {
    let (step, alter) = STEPS[chord.root() as usize];
    out.push_str("      <harmony>\n        <root><root-step>");
    out.push(step);
    out.push_str("</root-step>");
    if alter != 0 {
        let _ = write!(out, "<root-alter>{alter}</root-alter>");
    }
    let _ = writeln!(out, "</root>\n        <kind>{}</kind>\n      </harmony>", mode_kind(chord.mode()));
}

fn write_note(out: &mut String, pitch: Option<u8>, rhythm: RhythmType) {
    let divs = rhythm.quarters() * Ratio::from_integer(EXPORT_DIVISIONS);
    debug_assert!(divs.is_integer());
    out.push_str("      <note>\n");
    match pitch {
        Some(p) => {
            let (step, alter) = STEPS[(p % 12) as usize];
            let octave = p as i32 / 12 - 1;
            out.push_str("        <pitch><step>");
            out.push(step);
            out.push_str("</step>");
            if alter != 0 {
                let _ = write!(out, "<alter>{alter}</alter>");
            }
            let _ = writeln!(out, "<octave>{octave}</octave></pitch>");
        }
        None => out.push_str("        <rest/>\n"),
    }
    let (ty, dotted, triplet) = note_type(rhythm);
    let _ = writeln!(out, "        <duration>{}</duration>", divs.to_integer());
    let _ = writeln!(out, "        <voice>1</voice>\n        <type>{ty}</type>");
    if dotted {
        out.push_str("        <dot/>\n");
    }
    if triplet {
        out.push_str(
            "        <time-modification><actual-notes>3</actual-notes><normal-notes>2</normal-notes></time-modification>\n",
        );
    }
    out.push_str("      </note>\n");
}

/// Renders a sheet as a single-part `score-partwise` document. Each run of
/// events between barlines becomes one measure, a trailing run included.
pub fn export_musicxml(sheet: &LeadSheet) -> Result<Vec<u8>, ExportError> {
    sheet.validate()?;
    let title = if sheet.title.is_empty() { "Untitled" } else { &sheet.title };
    let mut out = String::new();
    out.push_str("<?xml version=\"1.0\" encoding=\"UTF-8\" standalone=\"no\"?>\n");
    out.push_str("<!DOCTYPE score-partwise PUBLIC \"-//Recordare//DTD MusicXML 3.1 Partwise//EN\" \"http://www.musicxml.org/dtds/partwise.dtd\">\n");
    out.push_str("<score-partwise version=\"3.1\">\n");
    let _ = writeln!(out, "  <work><work-title>{}</work-title></work>", escape(title));
    out.push_str("  <part-list>\n    <score-part id=\"P1\"><part-name>Lead</part-name></score-part>\n  </part-list>\n");
    out.push_str("  <part id=\"P1\">\n");

    let mut last_chord: Option<ChordSymbol> = None;
    let mut last_time: Option<TimeSignature> = None;
    for (i, bar) in sheet.bars().into_iter().enumerate() {
        let sum: Quarters = bar.iter().filter_map(Event::rhythm).map(RhythmType::quarters).sum();
        let time = measure_time_signature(sum);
        let _ = writeln!(out, "    <measure number=\"{}\">", i + 1);
        if i == 0 || last_time != Some(time) {
            out.push_str("      <attributes>\n");
            if i == 0 {
                let _ = writeln!(out, "        <divisions>{EXPORT_DIVISIONS}</divisions>");
            }
            let _ = writeln!(
                out,
                "        <time><beats>{}</beats><beat-type>{}</beat-type></time>",
                time.beats, time.beat_type
            );
            if i == 0 {
                out.push_str("        <clef><sign>G</sign><line>2</line></clef>\n");
            }
            out.push_str("      </attributes>\n");
            last_time = Some(time);
        }
        for e in bar {
            let (Some(rhythm), Some(chord)) = (e.rhythm(), e.chord()) else {
                continue;
            };
            if last_chord != Some(chord) {
                write_harmony(&mut out, chord);
                last_chord = Some(chord);
            }
            write_note(&mut out, e.pitch(), rhythm);
        }
        out.push_str("    </measure>\n");
    }
    out.push_str("  </part>\n</score-partwise>\n");
    Ok(out.into_bytes())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::score_io::parse_musicxml;

    fn q(n: i64, d: i64) -> Quarters {
        Ratio::new(n, d)
    }

    #[test]
    fn time_signature_prefers_quarters_then_eighths() {
        assert_eq!(measure_time_signature(q(4, 1)), TimeSignature::new(4, 4));
        assert_eq!(measure_time_signature(q(7, 2)), TimeSignature::new(7, 8));
        assert_eq!(measure_time_signature(q(3, 4)), TimeSignature::new(3, 16));
        assert_eq!(measure_time_signature(q(3, 16)), TimeSignature::new(3, 64));
        // a lone eighth triplet: 16/3 sixty-fourths rounds down
        assert_eq!(measure_time_signature(q(1, 3)), TimeSignature::new(5, 64));
        assert_eq!(measure_time_signature(q(1, 100)), TimeSignature::new(1, 64));
    }

    #[test]
    fn exported_document_parses_back() {
        let c = ChordSymbol::new(0, Mode::Major);
        let fs = ChordSymbol::new(6, Mode::Minor);
        let sheet = LeadSheet {
            title: "A & B".into(),
            source_id: String::new(),
            events: vec![
                Event::Note { pitch: 61, rhythm: RhythmType::Half, chord: c },
                Event::Rest { rhythm: RhythmType::Half, chord: c },
                Event::Barline,
                Event::Note { pitch: 72, rhythm: RhythmType::EighthTriplet, chord: fs },
                Event::Barline,
            ],
        };
        let bytes = export_musicxml(&sheet).unwrap();
        let raw = parse_musicxml(&bytes).unwrap();
        assert_eq!(raw.title.as_deref(), Some("A & B"));
        assert_eq!(raw.measures.len(), 2);
        assert_eq!(raw.measures[0].time, Some(TimeSignature::new(4, 4)));
        assert_eq!(raw.measures[0].harmonies.len(), 1);
        assert_eq!(raw.measures[0].events[0].pitches, vec![61]);
        assert_eq!(raw.measures[1].events[0].duration, q(1, 3));
        assert_eq!(raw.measures[1].harmonies[0].pitch_class(), 6);
        assert_eq!(raw.measures[1].harmonies[0].kind, "minor");
    }

    #[test]
    fn harmony_written_only_on_change() {
        let c = ChordSymbol::new(0, Mode::Major);
        let sheet = LeadSheet::from_events(vec![
            Event::Rest { rhythm: RhythmType::Quarter, chord: c },
            Event::Barline,
            Event::Rest { rhythm: RhythmType::Quarter, chord: c },
        ]);
        let text = String::from_utf8(export_musicxml(&sheet).unwrap()).unwrap();
        assert_eq!(text.matches("<harmony>").count(), 1);
        assert_eq!(text.matches("<measure ").count(), 2);
    }
}
