#![allow(dead_code)]

use leadsheet::encoding::{ChordSymbol, EncodedSequence, Mode, RhythmType, Step};

/// Eight bars of four quarter notes; every sheet starts on its own chord.
pub fn toy_sheet(k: usize) -> EncodedSequence {
    let mut steps = Vec::new();
    let mode = if k % 2 == 0 { Mode::Major } else { Mode::Minor };
    let quarter = RhythmType::Quarter.index();
    for bar in 0..8 {
        let chord = ChordSymbol::new((k * 2 + bar * 5) as i32, mode).index();
        for beat in 0..4 {
            let melody = 60 + ((k * 3 + bar * 2 + beat * 5) % 12) as u16;
            steps.push(Step { chord, rhythm: quarter, melody });
        }
        steps.push(Step::BARLINE);
    }
    EncodedSequence::new(steps).unwrap()
}

pub fn toy_corpus(n: usize) -> Vec<EncodedSequence> {
    (0..n).map(toy_sheet).collect()
}

use leadsheet::score::{Event, LeadSheet};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

/// A valid sheet of 1-6 bars with random figures, chords and pitches.
pub fn random_sheet(seed: u64) -> LeadSheet {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut events = Vec::new();
    let bars = rng.gen_range(1..=6);
    let mut chord = ChordSymbol::new(rng.gen_range(0..12), Mode::ALL[rng.gen_range(0..4)]);
    for _ in 0..bars {
        for _ in 0..rng.gen_range(1..=8) {
            if rng.gen_bool(0.3) {
                chord = ChordSymbol::new(rng.gen_range(0..12), Mode::ALL[rng.gen_range(0..4)]);
            }
            let rhythm = RhythmType::ALL[rng.gen_range(0..12)];
            events.push(if rng.gen_bool(0.15) {
                Event::Rest { rhythm, chord }
            } else {
                Event::Note {
                    pitch: rng.gen_range(0..128),
                    rhythm,
                    chord,
                }
            });
        }
        events.push(Event::Barline);
    }
    let sheet = LeadSheet {
        title: format!("sheet {seed}"),
        source_id: format!("random-{seed}"),
        events,
    };
    sheet.validate().expect("generator builds valid sheets");
    sheet
}
