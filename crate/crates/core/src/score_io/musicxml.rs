use num_rational::Ratio;
use roxmltree::{Document, Node, ParsingOptions};
use thiserror::Error;

use super::{step_semitone, Harmony, RawEvent, RawMeasure, RawScore, TimeSignature};
use crate::encoding::Quarters;

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum ParseError {
    #[error("malformed XML at line {line}: {message}")]
    Xml { line: u32, message: String },
    #[error("unsupported MusicXML feature <{element}>")]
    Unsupported { element: String },
    #[error("format error at line {line}: {message}")]
    Format { line: u32, message: String },
}

fn format_err(node: Node, message: impl Into<String>) -> ParseError {
    let pos = node.document().text_pos_at(node.range().start);
    ParseError::Format {
        line: pos.row,
        message: message.into(),
    }
}

fn unsupported(element: &str) -> ParseError {
    ParseError::Unsupported {
        element: element.to_string(),
    }
}

fn child<'a, 'i>(node: Node<'a, 'i>, name: &str) -> Option<Node<'a, 'i>> {
    node.children().find(|c| c.has_tag_name(name))
}

fn child_text<'a>(node: Node<'a, '_>, name: &str) -> Option<&'a str> {
    child(node, name).and_then(|c| c.text()).map(str::trim)
}

fn parse_int(node: Node, name: &str) -> Result<Option<i64>, ParseError> {
    match child_text(node, name) {
        None => Ok(None),
        Some(t) => t
            .parse::<i64>()
            .map(Some)
            .map_err(|_| format_err(node, format!("<{name}> is not an integer: {t:?}"))),
    }
}

/// Parses the lead-sheet subset of a `score-partwise` document. Only the first
/// part is read; durations are normalized from `divisions` to quarter notes.
pub fn parse_musicxml(document: &[u8]) -> Result<RawScore, ParseError> {
    let text = std::str::from_utf8(document).map_err(|e| {
        let line = document[..e.valid_up_to()].iter().filter(|&&b| b == b'\n').count() as u32 + 1;
        ParseError::Xml {
            line,
            message: "document is not valid UTF-8".into(),
        }
    })?;
    let options = ParsingOptions {
        allow_dtd: true,
        ..ParsingOptions::default()
    };
    let doc = Document::parse_with_options(text, options).map_err(|e| ParseError::Xml {
        line: e.pos().row,
        message: e.to_string(),
    })?;
    let root = doc.root_element();
    match root.tag_name().name() {
        "score-partwise" => {}
        "score-timewise" => return Err(unsupported("score-timewise")),
        other => return Err(format_err(root, format!("unexpected root element <{other}>"))),
    }
    let title = child(root, "work")
        .and_then(|w| child_text(w, "work-title"))
        .or_else(|| child_text(root, "movement-title"))
        .map(str::to_string);
    let part = child(root, "part").ok_or_else(|| format_err(root, "document has no <part>"))?;

    let mut state = PartState::default();
    let mut measures = Vec::new();
    for (i, m) in part.children().filter(|c| c.has_tag_name("measure")).enumerate() {
        measures.push(state.measure(m, i as u32 + 1)?);
    }
    Ok(RawScore {
        title,
        measures,
        pickup_checked: false,
    })
}

#[derive(Default)]
struct PartState {
    divisions: Option<i64>,
    time: Option<TimeSignature>,
    open_ending: Option<Vec<u32>>,
}

impl PartState {
    fn duration(&self, node: Node, divs: i64) -> Result<Quarters, ParseError> {
        let d = self
            .divisions
            .ok_or_else(|| format_err(node, "duration given before <divisions>"))?;
        Ok(Ratio::new(divs, d))
    }

    fn measure(&mut self, m: Node, number: u32) -> Result<RawMeasure, ParseError> {
        let mut out = RawMeasure {
            number,
            ..RawMeasure::default()
        };
        if let Some(open) = &self.open_ending {
            out.ending = Some(open.clone());
        }
        let mut close_ending = false;
        let mut offset = Quarters::from_integer(0);
        for node in m.children().filter(Node::is_element) {
            match node.tag_name().name() {
                "attributes" => self.attributes(node)?,
                "note" => self.note(node, &mut offset, &mut out.events)?,
                "backup" | "forward" => {
                    let divs = parse_int(node, "duration")?
                        .ok_or_else(|| format_err(node, "missing <duration>"))?;
                    let d = self.duration(node, divs)?;
                    if node.has_tag_name("backup") {
                        offset -= d;
                    } else {
                        offset += d;
                    }
                }
                "harmony" => {
                    if let Some(h) = self.harmony(node, offset)? {
                        out.harmonies.push(h);
                    }
                }
                "barline" => {
                    if let Some(r) = child(node, "repeat") {
                        match r.attribute("direction") {
                            Some("forward") => out.repeat_start = true,
                            Some("backward") => {
                                out.repeat_end = true;
                                if let Some(t) = r.attribute("times") {
                                    out.repeat_times = Some(
                                        t.trim()
                                            .parse()
                                            .map_err(|_| format_err(r, format!("bad repeat times {t:?}")))?,
                                    );
                                }
                            }
                            other => return Err(format_err(r, format!("bad repeat direction {other:?}"))),
                        }
                    }
                    if let Some(e) = child(node, "ending") {
                        let numbers = parse_ending_numbers(e)?;
                        match e.attribute("type") {
                            Some("start") => {
                                out.ending = Some(numbers.clone());
                                self.open_ending = Some(numbers);
                            }
                            Some("stop") | Some("discontinue") => {
                                if out.ending.is_none() {
                                    out.ending = Some(numbers);
                                }
                                close_ending = true;
                            }
                            other => return Err(format_err(e, format!("bad ending type {other:?}"))),
                        }
                    }
                    if child(node, "segno").is_some() || child(node, "coda").is_some() {
                        out.navigation.get_or_insert_with(|| "segno/coda".into());
                    }
                }
                "direction" | "sound" => {
                    if let Some(nav) = navigation_marker(node) {
                        out.navigation.get_or_insert(nav);
                    }
                }
                _ => {}
            }
        }
        if close_ending {
            self.open_ending = None;
        }
        out.time = self.time;
        Ok(out)
    }

    fn attributes(&mut self, node: Node) -> Result<(), ParseError> {
        if let Some(d) = parse_int(node, "divisions")? {
            if d <= 0 {
                return Err(format_err(node, "divisions must be positive"));
            }
            self.divisions = Some(d);
        }
        if let Some(t) = child(node, "time") {
            if let (Some(beats), Some(beat_type)) = (child_text(t, "beats"), child_text(t, "beat-type")) {
                let beats: u32 = beats
                    .split('+')
                    .map(|b| b.trim().parse::<u32>())
                    .sum::<Result<u32, _>>()
                    .map_err(|_| format_err(t, format!("bad <beats> {beats:?}")))?;
                let beat_type: u32 = beat_type
                    .parse()
                    .map_err(|_| format_err(t, format!("bad <beat-type> {beat_type:?}")))?;
                if beats == 0 || beat_type == 0 {
                    return Err(format_err(t, "time signature must be positive"));
                }
                self.time = Some(TimeSignature::new(beats, beat_type));
            }
        }
        if let Some(tr) = child(node, "transpose") {
            if parse_int(tr, "chromatic")?.unwrap_or(0) != 0 || parse_int(tr, "octave-change")?.unwrap_or(0) != 0 {
                return Err(unsupported("transpose"));
            }
        }
        Ok(())
    }

    fn note(&self, node: Node, offset: &mut Quarters, events: &mut Vec<RawEvent>) -> Result<(), ParseError> {
        for tag in ["cue", "unpitched"] {
            if child(node, tag).is_some() {
                return Err(unsupported(tag));
            }
        }
        let grace = child(node, "grace").is_some();
        let in_chord = child(node, "chord").is_some();
        let pitch = match child(node, "pitch") {
            Some(p) => Some(parse_pitch(p)?),
            None if child(node, "rest").is_some() => None,
            None => return Err(format_err(node, "note has neither <pitch> nor <rest>")),
        };
        let duration = if grace {
            Quarters::from_integer(0)
        } else {
            let divs = parse_int(node, "duration")?.ok_or_else(|| format_err(node, "note without <duration>"))?;
            if divs <= 0 {
                return Err(format_err(node, "note duration must be positive"));
            }
            self.duration(node, divs)?
        };
        let mut tie_start = false;
        let mut tie_stop = false;
        let ties = node
            .children()
            .filter(|c| c.has_tag_name("tie"))
            .chain(
                node.children()
                    .filter(|c| c.has_tag_name("notations"))
                    .flat_map(|n| n.children().filter(|c| c.has_tag_name("tied"))),
            );
        for t in ties {
            match t.attribute("type") {
                Some("start") => tie_start = true,
                Some("stop") => tie_stop = true,
                _ => {}
            }
        }

        if in_chord {
            if let Some(prev) = events.last_mut().filter(|p| p.grace == grace) {
                if let Some(p) = pitch {
                    prev.pitches.push(p);
                }
                prev.tie_start |= tie_start;
                prev.tie_stop |= tie_stop;
                return Ok(());
            }
        }
        events.push(RawEvent {
            onset: *offset,
            pitches: pitch.into_iter().collect(),
            duration,
            tie_start,
            tie_stop,
            grace,
        });
        *offset += duration;
        Ok(())
    }

    fn harmony(&self, node: Node, offset: Quarters) -> Result<Option<Harmony>, ParseError> {
        let kind = child_text(node, "kind").unwrap_or("").to_string();
        let onset = match parse_int(node, "offset")? {
            Some(off) => offset + self.duration(node, off)?,
            None => offset,
        };
        let (root_step, root_alter) = match child(node, "root") {
            Some(r) => {
                let step = child_text(r, "root-step").ok_or_else(|| format_err(r, "missing <root-step>"))?;
                let step = step
                    .chars()
                    .next()
                    .filter(|c| step.len() == 1 && step_semitone(*c).is_some())
                    .ok_or_else(|| format_err(r, format!("bad root step {step:?}")))?;
                (step, parse_alter(r, "root-alter")?)
            }
            None if kind == "none" => ('C', 0),
            None if child(node, "function").is_some() => return Err(unsupported("function")),
            None => return Err(format_err(node, "harmony without <root>")),
        };
        Ok(Some(Harmony {
            onset,
            root_step,
            root_alter,
            kind,
        }))
    }
}

fn parse_alter(node: Node, name: &str) -> Result<i32, ParseError> {
    match child_text(node, name) {
        None => Ok(0),
        Some(t) => {
            let v: f64 = t
                .parse()
                .map_err(|_| format_err(node, format!("bad <{name}> {t:?}")))?;
            if v.fract() != 0.0 {
                return Err(unsupported(&format!("{name} (microtonal)")));
            }
            Ok(v as i32)
        }
    }
}

fn parse_pitch(p: Node) -> Result<u8, ParseError> {
    let step = child_text(p, "step").ok_or_else(|| format_err(p, "missing <step>"))?;
    let semitone = step
        .chars()
        .next()
        .filter(|_| step.len() == 1)
        .and_then(step_semitone)
        .ok_or_else(|| format_err(p, format!("bad step {step:?}")))?;
    let octave = parse_int(p, "octave")?.ok_or_else(|| format_err(p, "missing <octave>"))?;
    let alter = parse_alter(p, "alter")?;
    let midi = (octave + 1) * 12 + semitone as i64 + alter as i64;
    u8::try_from(midi)
        .ok()
        .filter(|&m| m <= 127)
        .ok_or_else(|| format_err(p, format!("pitch {midi} outside MIDI range")))
}

fn parse_ending_numbers(e: Node) -> Result<Vec<u32>, ParseError> {
    let raw = e.attribute("number").unwrap_or("1");
    raw.split([',', ' '])
        .filter(|s| !s.trim().is_empty())
        .map(|s| s.trim().parse::<u32>())
        .collect::<Result<Vec<_>, _>>()
        .map_err(|_| format_err(e, format!("bad ending number {raw:?}")))
}

fn navigation_marker(node: Node) -> Option<String> {
    const ATTRS: [&str; 6] = ["dacapo", "dalsegno", "tocoda", "fine", "segno", "coda"];
    const WORDS: [&str; 6] = ["d.c.", "d.s.", "da capo", "dal segno", "to coda", "fine"];
    for n in node.descendants().filter(Node::is_element) {
        match n.tag_name().name() {
            "segno" | "coda" => return Some(n.tag_name().name().to_string()),
            "sound" => {
                if let Some(a) = ATTRS.iter().find(|a| n.attribute(**a).is_some()) {
                    return Some(a.to_string());
                }
            }
            "words" => {
                let text = n.text().unwrap_or("").trim().to_lowercase();
                if WORDS.iter().any(|w| text.starts_with(w) || text == w.trim_end_matches('.')) {
                    return Some(text);
                }
            }
            _ => {}
        }
    }
    None
}
