//! Lead-sheet toolkit: MusicXML ingestion and cleanup, event encodings, the
//! two-stage recurrent generator with its baselines, training, sampling and
//! listening-test statistics.

pub mod encoding;
pub mod eval;
pub mod generate;
pub mod models;
pub mod preprocess;
pub mod score;
pub mod score_io;
pub mod train;
