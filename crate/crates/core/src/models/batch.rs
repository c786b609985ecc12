use thiserror::Error;

use crate::encoding::Step;

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum BatchError {
    #[error("batch has no items")]
    Empty,
    #[error("window must span at least 2 steps, got {0}")]
    WindowTooShort(usize),
    #[error("item {item} has {len} steps; need 2..={window}")]
    BadItem { item: usize, len: usize, window: usize },
}

/// A batch of training windows. Each item holds between 2 and `window`
/// consecutive steps; shorter items are padded at the tail and the padding is
/// masked out of every loss. Position `t` predicts step `t + 1` from steps
/// up to `t`, so a window of `L + 1` steps yields `L` positions.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Batch {
    window: usize,
    items: Vec<Vec<Step>>,
}

impl Batch {
    pub fn new(window: usize, items: Vec<Vec<Step>>) -> Result<Self, BatchError> {
        if window < 2 {
            return Err(BatchError::WindowTooShort(window));
        }
        if items.is_empty() {
            return Err(BatchError::Empty);
        }
        for (item, steps) in items.iter().enumerate() {
            if steps.len() < 2 || steps.len() > window {
                return Err(BatchError::BadItem {
                    item,
                    len: steps.len(),
                    window,
                });
            }
        }
        Ok(Self { window, items })
    }

    pub fn batch_size(&self) -> usize {
        self.items.len()
    }

    pub fn window(&self) -> usize {
        self.window
    }

    /// Prediction positions per item, padding included.
    pub fn positions(&self) -> usize {
        self.window - 1
    }

    pub fn items(&self) -> &[Vec<Step>] {
        &self.items
    }

    pub fn items_mut(&mut self) -> &mut [Vec<Step>] {
        &mut self.items
    }

    pub fn into_items(self) -> Vec<Vec<Step>> {
        self.items
    }

    /// Valid positions of each item.
    pub fn lengths(&self) -> Vec<usize> {
        self.items.iter().map(|s| s.len() - 1).collect()
    }

    /// Unmasked positions across the batch.
    pub fn valid_positions(&self) -> usize {
        self.items.iter().map(|s| s.len() - 1).sum()
    }

    /// Input step at position `t` of item `b`, `None` when masked.
    pub fn input(&self, t: usize, b: usize) -> Option<Step> {
        let s = &self.items[b];
        (t + 1 < s.len()).then(|| s[t])
    }

    /// Target step at position `t` of item `b`, `None` when masked.
    pub fn target(&self, t: usize, b: usize) -> Option<Step> {
        self.items[b].get(t + 1).copied()
    }

    /// Time-major `(positions * batch)` view of inputs.
    pub(crate) fn inputs_time_major(&self) -> Vec<Option<Step>> {
        let batch = self.batch_size();
        (0..self.positions() * batch).map(|r| self.input(r / batch, r % batch)).collect()
    }

    /// Time-major `(positions * batch)` view of targets.
    pub(crate) fn targets_time_major(&self) -> Vec<Option<Step>> {
        let batch = self.batch_size();
        (0..self.positions() * batch).map(|r| self.target(r / batch, r % batch)).collect()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn s(m: u16) -> Step {
        Step {
            chord: 0,
            rhythm: 7,
            melody: m,
        }
    }

    #[test]
    fn inputs_and_targets_are_shifted_and_masked() {
        let b = Batch::new(4, vec![vec![s(1), s(2), s(3), s(4)], vec![s(5), s(6)]]).unwrap();
        assert_eq!(b.positions(), 3);
        assert_eq!(b.lengths(), vec![3, 1]);
        assert_eq!(b.input(0, 0), Some(s(1)));
        assert_eq!(b.target(0, 0), Some(s(2)));
        assert_eq!(b.target(2, 0), Some(s(4)));
        assert_eq!(b.input(0, 1), Some(s(5)));
        assert_eq!(b.target(0, 1), Some(s(6)));
        assert_eq!(b.input(1, 1), None);
        assert_eq!(b.target(1, 1), None);
        assert_eq!(b.valid_positions(), 4);
    }

    #[test]
    fn rejects_bad_shapes() {
        assert_eq!(Batch::new(1, vec![vec![s(1)]]), Err(BatchError::WindowTooShort(1)));
        assert_eq!(Batch::new(3, vec![]), Err(BatchError::Empty));
        assert!(Batch::new(3, vec![vec![s(1)]]).is_err());
        assert!(Batch::new(2, vec![vec![s(1), s(2), s(3)]]).is_err());
    }
}
