//! Listening-test score standardization and corpus statistics.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt::{self, Write as _};
use std::io::Read;
use std::str::FromStr;

use serde::Deserialize;
use thiserror::Error;

use crate::encoding::{ChordSymbol, EncodedSequence, Mode, RhythmType, CHORD_BAR, MELODY_REST, RHYTHM_VOCAB};

#[derive(Debug, Error)]
pub enum EvalError {
    #[error("row {row}: {message}")]
    Malformed { row: u64, message: String },
    #[error("row {row}: second rating by {user} for {clip} ({question})")]
    Duplicate {
        row: u64,
        user: String,
        clip: String,
        question: Question,
    },
    #[error("no ratings")]
    Empty,
    #[error("group {0} has no standardized scores")]
    EmptyGroup(String),
    #[error("no groups given")]
    NoGroups,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum Question {
    Pleasing,
    Coherence,
    Turing,
}

impl Question {
    pub const ALL: [Question; 3] = [Question::Pleasing, Question::Coherence, Question::Turing];

    pub fn name(self) -> &'static str {
        match self {
            Question::Pleasing => "pleasing",
            Question::Coherence => "coherence",
            Question::Turing => "turing",
        }
    }
}

impl fmt::Display for Question {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Question {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, String> {
        Question::ALL
            .into_iter()
            .find(|q| q.name().eq_ignore_ascii_case(s))
            .ok_or_else(|| format!("unknown question {s:?}"))
    }
}

/// Ratings for one question, keyed by (user, clip).
#[derive(Clone, Debug, Default, PartialEq, Eq)]
pub struct RatingTable {
    pub ratings: BTreeMap<(String, String), u8>,
}

impl RatingTable {
    /// Ratings must lie in 1..=5.
    pub fn insert(&mut self, user: &str, clip: &str, rating: u8) -> Result<(), String> {
        if !(1..=5).contains(&rating) {
            return Err(format!("rating {rating} outside 1..=5"));
        }
        if self.ratings.insert((user.to_string(), clip.to_string()), rating).is_some() {
            return Err("duplicate rating".into());
        }
        Ok(())
    }

    pub fn users(&self) -> BTreeSet<&str> {
        self.ratings.keys().map(|(u, _)| u.as_str()).collect()
    }
}

#[derive(Clone, Debug, Default, PartialEq)]
pub struct ZScores {
    pub scores: BTreeMap<(String, String), f64>,
    /// Users whose ratings were all equal.
    pub excluded: Vec<String>,
}

/// Per-user standardization: `(R - mean) / (max - min)` over the user's
/// ratings. Users with a single distinct rating are excluded.
pub fn z_score(table: &RatingTable) -> ZScores {
    let mut by_user: BTreeMap<&str, Vec<(&str, f64)>> = BTreeMap::new();
    for ((user, clip), &r) in &table.ratings {
        by_user.entry(user).or_default().push((clip, r as f64));
    }
    let mut out = ZScores::default();
    for (user, rows) in by_user {
        let mean = rows.iter().map(|r| r.1).sum::<f64>() / rows.len() as f64;
        let max = rows.iter().map(|r| r.1).fold(f64::MIN, f64::max);
        let min = rows.iter().map(|r| r.1).fold(f64::MAX, f64::min);
        if max == min {
            log::warn!("user {user} gave every clip {max}; excluded");
            out.excluded.push(user.to_string());
            continue;
        }
        for (clip, r) in rows {
            out.scores.insert((user.to_string(), clip.to_string()), (r - mean) / (max - min));
        }
    }
    out
}

#[derive(Clone, Debug, PartialEq)]
pub struct GroupStat {
    pub label: String,
    pub mean: f64,
    /// Population standard deviation.
    pub std: f64,
    pub count: usize,
}

/// Clip-to-label assignment; labels keep their first-seen order.
#[derive(Clone, Debug, Default, PartialEq, Eq)]
pub struct Groups {
    pub clips: BTreeMap<String, String>,
    pub labels: Vec<String>,
}

impl Groups {
    pub fn assign(&mut self, clip: &str, label: &str) {
        if !self.labels.iter().any(|l| l == label) {
            self.labels.push(label.to_string());
        }
        self.clips.insert(clip.to_string(), label.to_string());
    }
}

/// Mean and standard deviation of Z over every (user, clip) pair whose clip
/// belongs to each group. Clips without a group are ignored.
pub fn aggregate(z: &ZScores, groups: &Groups) -> Result<Vec<GroupStat>, EvalError> {
    if groups.labels.is_empty() {
        return Err(EvalError::NoGroups);
    }
    let mut values: BTreeMap<&str, Vec<f64>> = BTreeMap::new();
    for ((_, clip), &v) in &z.scores {
        if let Some(label) = groups.clips.get(clip) {
            values.entry(label).or_default().push(v);
        }
    }
    groups
        .labels
        .iter()
        .map(|label| {
            let v = values.get(label.as_str()).filter(|v| !v.is_empty());
            let v = v.ok_or_else(|| EvalError::EmptyGroup(label.clone()))?;
            let n = v.len() as f64;
            let mean = v.iter().sum::<f64>() / n;
            let var = v.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / n;
            Ok(GroupStat {
                label: label.clone(),
                mean,
                std: var.sqrt(),
                count: v.len(),
            })
        })
        .collect()
}

#[derive(Deserialize)]
struct RatingRow {
    user: String,
    clip: String,
    question: String,
    rating: i64,
}

#[derive(Deserialize)]
struct GroupRow {
    clip: String,
    label: String,
}

fn reader<R: Read>(input: R) -> csv::Reader<R> {
    csv::ReaderBuilder::new()
        .trim(csv::Trim::All)
        .comment(Some(b'#'))
        .from_reader(input)
}

/// Deserializes each data row along with its line number.
fn rows<T: serde::de::DeserializeOwned, R: Read>(input: R) -> Result<Vec<(u64, T)>, EvalError> {
    let mut rdr = reader(input);
    let malformed = |e: csv::Error| EvalError::Malformed {
        row: e.position().map_or(0, |p| p.line()),
        message: e.to_string(),
    };
    let headers = rdr.headers().map_err(malformed)?.clone();
    let mut out = Vec::new();
    let mut rec = csv::StringRecord::new();
    while rdr.read_record(&mut rec).map_err(malformed)? {
        let row = rec.position().map_or(0, |p| p.line());
        let value = rec.deserialize(Some(&headers)).map_err(|e| EvalError::Malformed {
            row,
            message: e.to_string(),
        })?;
        out.push((row, value));
    }
    Ok(out)
}

/// Comma-separated `user,clip,question,rating` rows under a header line,
/// split by question.
pub fn read_ratings<R: Read>(input: R) -> Result<BTreeMap<Question, RatingTable>, EvalError> {
    let mut tables: BTreeMap<Question, RatingTable> = BTreeMap::new();
    for (row, rec) in rows::<RatingRow, R>(input)? {
        let malformed = |message: String| EvalError::Malformed { row, message };
        let question: Question = rec.question.parse().map_err(malformed)?;
        let rating = u8::try_from(rec.rating)
            .ok()
            .filter(|r| (1..=5).contains(r))
            .ok_or_else(|| malformed(format!("rating {} outside 1..=5", rec.rating)))?;
        let table = tables.entry(question).or_default();
        if table.ratings.contains_key(&(rec.user.clone(), rec.clip.clone())) {
            return Err(EvalError::Duplicate {
                row,
                user: rec.user,
                clip: rec.clip,
                question,
            });
        }
        table.insert(&rec.user, &rec.clip, rating).map_err(malformed)?;
    }
    if tables.is_empty() {
        return Err(EvalError::Empty);
    }
    Ok(tables)
}

/// Comma-separated `clip,label` rows under a header line.
pub fn read_groups<R: Read>(input: R) -> Result<Groups, EvalError> {
    let mut groups = Groups::default();
    for (_, rec) in rows::<GroupRow, R>(input)? {
        groups.assign(&rec.clip, &rec.label);
    }
    if groups.labels.is_empty() {
        return Err(EvalError::NoGroups);
    }
    Ok(groups)
}

/// Per-question group statistics for a full ratings file.
pub type Report = BTreeMap<Question, Vec<GroupStat>>;

pub fn evaluate(tables: &BTreeMap<Question, RatingTable>, groups: &Groups) -> Result<Report, EvalError> {
    tables
        .iter()
        .map(|(&q, t)| Ok((q, aggregate(&z_score(t), groups)?)))
        .collect()
}

/// Tab-separated table: one row per model label, one `mean ± std` column
/// per question that has ratings.
pub fn format_report(report: &Report, groups: &Groups) -> String {
    let mut out = String::from("model");
    for q in report.keys() {
        let _ = write!(out, "\t{q}");
    }
    out.push('\n');
    for label in &groups.labels {
        out.push_str(label);
        for stats in report.values() {
            match stats.iter().find(|s| &s.label == label) {
                Some(s) => {
                    let _ = write!(out, "\t{:.2} ± {:.2}", s.mean, s.std);
                }
                None => out.push_str("\t-"),
            }
        }
        out.push('\n');
    }
    out
}

/// Histograms over an encoded corpus. Barlines are counted apart from the
/// rhythm histogram.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct CorpusStats {
    pub sheets: usize,
    pub rhythms: [usize; RHYTHM_VOCAB - 1],
    pub barlines: usize,
    pub modes: [usize; 4],
    pub notes: usize,
    pub rests: usize,
    pub pitches: Vec<usize>,
    pub lowest: Option<u16>,
    pub highest: Option<u16>,
    pub lengths: BTreeMap<usize, usize>,
    pub bar_counts: BTreeMap<usize, usize>,
}

impl Default for CorpusStats {
    fn default() -> Self {
        Self {
            sheets: 0,
            rhythms: [0; RHYTHM_VOCAB - 1],
            barlines: 0,
            modes: [0; 4],
            notes: 0,
            rests: 0,
            pitches: vec![0; MELODY_REST as usize],
            lowest: None,
            highest: None,
            lengths: BTreeMap::new(),
            bar_counts: BTreeMap::new(),
        }
    }
}

pub fn corpus_stats(corpus: &[EncodedSequence]) -> CorpusStats {
    let mut st = CorpusStats::default();
    for seq in corpus {
        st.sheets += 1;
        let mut bars = 0;
        for s in &seq.steps {
            if s.chord == CHORD_BAR {
                st.barlines += 1;
                bars += 1;
                continue;
            }
            st.rhythms[s.rhythm as usize] += 1;
            if let Some(c) = ChordSymbol::from_index(s.chord) {
                st.modes[c.mode().ordinal() as usize] += 1;
            }
            if s.melody < MELODY_REST {
                st.notes += 1;
                st.pitches[s.melody as usize] += 1;
                st.lowest = Some(st.lowest.map_or(s.melody, |l| l.min(s.melody)));
                st.highest = Some(st.highest.map_or(s.melody, |h| h.max(s.melody)));
            } else {
                st.rests += 1;
            }
        }
        *st.lengths.entry(seq.steps.len()).or_default() += 1;
        *st.bar_counts.entry(bars).or_default() += 1;
    }
    st
}

impl fmt::Display for CorpusStats {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        writeln!(f, "sheets\t{}", self.sheets)?;
        writeln!(f, "notes\t{}", self.notes)?;
        writeln!(f, "rests\t{}", self.rests)?;
        writeln!(f, "barlines\t{}", self.barlines)?;
        for r in RhythmType::ALL {
            writeln!(f, "rhythm:{}\t{}", r.name(), self.rhythms[r.index() as usize])?;
        }
        for m in Mode::ALL {
            writeln!(f, "mode:{}\t{}", m.name(), self.modes[m.ordinal() as usize])?;
        }
        match (self.lowest, self.highest) {
            (Some(lo), Some(hi)) => writeln!(f, "pitch-range\t{lo}-{hi}")?,
            _ => writeln!(f, "pitch-range\t-")?,
        }
        for (len, n) in &self.lengths {
            writeln!(f, "length:{len}\t{n}")?;
        }
        for (bars, n) in &self.bar_counts {
            writeln!(f, "bars:{bars}\t{n}")?;
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn table(rows: &[(&str, &str, u8)]) -> RatingTable {
        let mut t = RatingTable::default();
        for &(u, c, r) in rows {
            t.insert(u, c, r).unwrap();
        }
        t
    }

    fn z(zs: &ZScores, u: &str, c: &str) -> f64 {
        zs.scores[&(u.to_string(), c.to_string())]
    }

    #[test]
    fn symmetric_user() {
        let zs = z_score(&table(&[("u", "a", 1), ("u", "b", 3), ("u", "c", 5)]));
        assert_eq!([z(&zs, "u", "a"), z(&zs, "u", "b"), z(&zs, "u", "c")], [-0.5, 0.0, 0.5]);
    }

    #[test]
    fn skewed_user_follows_the_formula() {
        let zs = z_score(&table(&[("u", "a", 2), ("u", "b", 2), ("u", "c", 4)]));
        let mean = 8.0 / 3.0;
        assert!((z(&zs, "u", "a") - (2.0 - mean) / 2.0).abs() < 1e-12);
        assert!((z(&zs, "u", "c") - 2.0 / 3.0).abs() < 1e-12);
    }

    #[test]
    fn constant_user_is_excluded() {
        let zs = z_score(&table(&[("u", "a", 3), ("u", "b", 3), ("v", "a", 1), ("v", "b", 2)]));
        assert_eq!(zs.excluded, vec!["u".to_string()]);
        assert_eq!(zs.scores.len(), 2);
    }

    #[test]
    fn ratings_out_of_range_are_rejected() {
        assert!(RatingTable::default().insert("u", "a", 0).is_err());
        assert!(RatingTable::default().insert("u", "a", 6).is_err());
    }

    #[test]
    fn single_pair_group_has_zero_std() {
        let zs = z_score(&table(&[("u", "a", 1), ("u", "b", 5)]));
        let mut g = Groups::default();
        g.assign("a", "x");
        g.assign("b", "y");
        let stats = aggregate(&zs, &g).unwrap();
        assert_eq!(stats[0].mean, -0.5);
        assert_eq!(stats[0].std, 0.0);
        assert_eq!(stats[1].mean, 0.5);
        g.assign("zz", "empty");
        assert!(matches!(aggregate(&zs, &g), Err(EvalError::EmptyGroup(l)) if l == "empty"));
    }

    #[test]
    fn reads_rows_and_reports_bad_ones() {
        let text = "user,clip,question,rating\nu1,a,pleasing,1\nu1,b,pleasing,5\nu1,a,turing,2\n";
        let t = read_ratings(text.as_bytes()).unwrap();
        assert_eq!(t[&Question::Pleasing].ratings.len(), 2);
        assert_eq!(t[&Question::Turing].ratings.len(), 1);
        let bad = "user,clip,question,rating\nu1,a,pleasing,1\nu1,b,pleasing,9\n";
        assert!(matches!(read_ratings(bad.as_bytes()), Err(EvalError::Malformed { row: 3, .. })));
        let bad = "user,clip,question,rating\nu1,a,pleasing,1\nu1,b,catchy,2\n";
        assert!(matches!(read_ratings(bad.as_bytes()), Err(EvalError::Malformed { row: 3, .. })));
        let bad = "user,clip,question,rating\nu1,a,pleasing\n";
        assert!(matches!(read_ratings(bad.as_bytes()), Err(EvalError::Malformed { row: 2, .. })));
        let dup = "user,clip,question,rating\nu1,a,pleasing,1\nu1,a,pleasing,2\n";
        assert!(matches!(read_ratings(dup.as_bytes()), Err(EvalError::Duplicate { row: 3, .. })));
        assert!(matches!(read_ratings("".as_bytes()), Err(EvalError::Empty)));
        assert!(matches!(read_ratings("user,clip,question,rating\n".as_bytes()), Err(EvalError::Empty)));
    }

    #[test]
    fn report_layout() {
        let ratings = "user,clip,question,rating\nu,a,pleasing,1\nu,b,pleasing,5\n";
        let groups = read_groups("clip,label\na,one-stage\nb,two-stage\n".as_bytes()).unwrap();
        let report = evaluate(&read_ratings(ratings.as_bytes()).unwrap(), &groups).unwrap();
        assert_eq!(
            format_report(&report, &groups),
            "model\tpleasing\none-stage\t-0.50 ± 0.00\ntwo-stage\t0.50 ± 0.00\n"
        );
    }

    #[test]
    fn empty_corpus_has_empty_histograms() {
        let st = corpus_stats(&[]);
        assert_eq!(st, CorpusStats::default());
        assert!(st.rhythms.iter().all(|&n| n == 0));
    }
}
