use rand::distributions::{Distribution, WeightedIndex};
use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use thiserror::Error;

use super::TrainConfig;
use crate::encoding::{transpose_step, valid_shifts_for, EncodedSequence, Step, MELODY_REST};
use crate::models::Batch;

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum BatchingError {
    #[error("corpus is empty")]
    EmptyCorpus,
    #[error("no sheet is long enough to give a training window")]
    NoUsableSheets,
}

/// Steps a sheet contributes to training: optionally led by a barline, the
/// same token that opens generation.
pub fn training_steps(seq: &EncodedSequence, prepend_start: bool) -> Vec<Step> {
    let mut steps = Vec::with_capacity(seq.len() + 1);
    if prepend_start {
        steps.push(Step::BARLINE);
    }
    steps.extend_from_slice(&seq.steps);
    steps
}

/// Endless, seed-determined stream of training windows. A window's sheet is
/// drawn with probability proportional to its length, then its offset
/// uniformly; windows running past a sheet's end are padded and masked.
#[derive(Clone, Debug)]
pub struct BatchStream {
    sheets: Vec<Vec<Step>>,
    chooser: WeightedIndex<usize>,
    window: usize,
    batch_size: usize,
    rng: ChaCha8Rng,
}

impl BatchStream {
    pub fn new(corpus: &[EncodedSequence], config: &TrainConfig, seed: u64) -> Result<Self, BatchingError> {
        if corpus.is_empty() {
            return Err(BatchingError::EmptyCorpus);
        }
        let sheets: Vec<Vec<Step>> = corpus
            .iter()
            .map(|s| training_steps(s, config.prepend_start))
            .filter(|s| s.len() >= 2)
            .collect();
        if sheets.is_empty() {
            return Err(BatchingError::NoUsableSheets);
        }
        let chooser = WeightedIndex::new(sheets.iter().map(Vec::len)).expect("positive weights");
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        rng.set_stream(1);
        Ok(Self {
            sheets,
            chooser,
            window: config.sequence_length + 1,
            batch_size: config.batch_size,
            rng,
        })
    }

    /// Draws one window as `(sheet index, offset, steps)`.
    pub fn draw_window(&mut self) -> (usize, usize, Vec<Step>) {
        let sheet = self.chooser.sample(&mut self.rng);
        let steps = &self.sheets[sheet];
        let max_offset = steps.len().saturating_sub(self.window);
        let offset = self.rng.gen_range(0..=max_offset);
        let end = (offset + self.window).min(steps.len());
        (sheet, offset, steps[offset..end].to_vec())
    }

    pub fn next_batch(&mut self) -> Batch {
        let items = (0..self.batch_size).map(|_| self.draw_window().2).collect();
        Batch::new(self.window, items).expect("windows hold 2..=window steps")
    }
}

impl Iterator for BatchStream {
    type Item = Batch;

    fn next(&mut self) -> Option<Batch> {
        Some(self.next_batch())
    }
}

/// First `make_batches(...).take(n)` convenience.
pub fn make_batches(corpus: &[EncodedSequence], config: &TrainConfig, seed: u64) -> Result<BatchStream, BatchingError> {
    BatchStream::new(corpus, config, seed)
}

/// Shifts that keep every pitch of `steps` inside MIDI range.
pub fn window_shifts(steps: &[Step]) -> Vec<i32> {
    let mut pitches = steps.iter().map(|s| s.melody).filter(|&m| m < MELODY_REST);
    let range = pitches
        .next()
        .map(|first| pitches.fold((first, first), |(lo, hi), p| (lo.min(p), hi.max(p))));
    valid_shifts_for(range)
}

/// Transposes every window by its own shift, drawn uniformly from the
/// shifts in `[-12, 12]` that keep it in range. Returns the shifts used.
pub fn augment_batch<R: Rng + ?Sized>(batch: &mut Batch, rng: &mut R) -> Vec<i32> {
    batch
        .items_mut()
        .iter_mut()
        .map(|steps| {
            let shifts = window_shifts(steps);
            let k = *shifts.choose(rng).expect("shift 0 is always valid");
            for s in steps.iter_mut() {
                *s = transpose_step(*s, k);
            }
            k
        })
        .collect()
}

/// Seeded split into (training, held-out) sheet indices; the held-out part
/// is `floor(n * fraction)` sheets.
pub fn holdout_split(n: usize, fraction: f64, seed: u64) -> (Vec<usize>, Vec<usize>) {
    let mut idx: Vec<usize> = (0..n).collect();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(2);
    idx.shuffle(&mut rng);
    let held = ((n as f64) * fraction).floor() as usize;
    let mut heldout = idx.split_off(n - held);
    idx.sort_unstable();
    heldout.sort_unstable();
    (idx, heldout)
}
