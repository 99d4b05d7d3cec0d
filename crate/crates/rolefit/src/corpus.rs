//! Frame corpus ingestion: parsing, layer alignment, head finding, splits,
//! and summary statistics.
//!
//! A corpus is a stream of line-delimited JSON records, one predicate frame
//! per line:
//!
//! ```text
//! {"doc_id":"d1","sent_id":"s1","source":"BNC","mismatch":false,
//!  "predicate_lemma":"cut","args":[{"role":"ARG0","head_lemma":"chef","start":0,"end":1}]}
//! ```

use std::collections::{BTreeMap, BTreeSet};
use std::io::BufRead;

use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Error)]
pub enum CorpusError {
    /// A record is missing a field or carries an invalid value.
    #[error("schema error at line {line}: {message}")]
    Schema { line: usize, message: String },
    /// Dev and test file sets intersect.
    #[error("overlapping file sets: index {index} is in both dev and test")]
    Overlap { index: usize },
    /// A numeric argument is outside its admissible range.
    #[error("range error: {0}")]
    Range(String),
    /// A span points outside the sentence.
    #[error("index error: {0}")]
    Index(String),
    #[error("io error: {0}")]
    Io(#[from] std::io::Error),
}

/// Where a sentence originally came from.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum Source {
    BNC,
    UKWAC,
    SYNTH,
}

impl std::fmt::Display for Source {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            Source::BNC => write!(f, "BNC"),
            Source::UKWAC => write!(f, "UKWAC"),
            Source::SYNTH => write!(f, "SYNTH"),
        }
    }
}

impl std::str::FromStr for Source {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.to_ascii_uppercase().as_str() {
            "BNC" => Ok(Source::BNC),
            "UKWAC" => Ok(Source::UKWAC),
            "SYNTH" => Ok(Source::SYNTH),
            other => Err(format!("unknown source: {other}")),
        }
    }
}

/// One labeled argument of a frame. `start`/`end` are token indices of the
/// original span (end exclusive); `head_lemma` is the span's syntactic head.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct FrameArg {
    pub role: String,
    pub head_lemma: String,
    pub start: usize,
    pub end: usize,
}

/// One predicate instance with its labeled arguments, traceable to its
/// document, sentence, and source corpus.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Frame {
    pub doc_id: String,
    pub sent_id: String,
    pub source: Source,
    /// Sentence flagged for exclusion because its annotation layers disagree
    /// on tokenization. Flagged in-band, never silently dropped.
    pub mismatch: bool,
    pub predicate_lemma: String,
    pub args: Vec<FrameArg>,
}

/// One annotation layer of a sentence (surface forms, lemmas, tags, ...).
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct TokenLayer {
    pub layer_name: String,
    pub tokens: Vec<String>,
}

/// An argument span inside a sentence, end exclusive.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ArgSpan {
    pub role_label: String,
    pub start: usize,
    pub end: usize,
    pub head_index: Option<usize>,
}

/// Corpus summary in the shape of the frame/role accounting tables.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CorpusStats {
    pub sentence_count: usize,
    pub frame_count: usize,
    /// Role label counts, sorted by descending count (ties by label).
    /// Includes one `PRD` count per frame.
    pub role_counts: Vec<(String, u64)>,
    /// Fraction of sentences flagged as tokenization mismatches.
    pub mismatch_ratio: f64,
}

/// Disjoint train/dev/test partition of file indices `0..total_files`.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct FileSplit {
    pub train_files: Vec<usize>,
    pub dev_files: Vec<usize>,
    pub test_files: Vec<usize>,
    pub total_files: usize,
}

/// The 16 dev file indices used for the 3490-file corpus.
pub const DEFAULT_DEV_FILES: [usize; 16] = [
    217, 435, 651, 868, 1085, 1302, 1519, 1736, 1953, 2170, 2387, 2604, 2821, 3038, 3255, 3472,
];

/// The 16 test file indices used for the 3490-file corpus.
pub const DEFAULT_TEST_FILES: [usize; 16] = [
    218, 436, 652, 869, 1086, 1303, 1520, 1737, 1954, 2171, 2388, 2605, 2822, 3039, 3256, 3473,
];

/// Total file count for which the default dev/test lists apply.
pub const DEFAULT_TOTAL_FILES: usize = 3490;

/// A malformed input line, reported with its 1-based line number.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct LineError {
    pub line: usize,
    pub message: String,
}

/// Result of parsing a record stream: frames in input order plus the
/// malformed lines that were skipped.
#[derive(Debug, Default)]
pub struct ParseOutcome {
    pub frames: Vec<Frame>,
    pub errors: Vec<LineError>,
}

/// Parse line-delimited frame records. Malformed lines are collected with
/// their line numbers; parsing continues past them.
pub fn parse_frames<R: BufRead>(reader: R) -> Result<ParseOutcome, CorpusError> {
    let mut out = ParseOutcome::default();
    for (idx, line) in reader.lines().enumerate() {
        let line_no = idx + 1;
        let line = line?;
        if line.trim().is_empty() {
            continue;
        }
        match parse_frame_line(&line) {
            Ok(frame) => out.frames.push(frame),
            Err(message) => out.errors.push(LineError {
                line: line_no,
                message,
            }),
        }
    }
    Ok(out)
}

fn parse_frame_line(line: &str) -> Result<Frame, String> {
    let frame: Frame = serde_json::from_str(line).map_err(|e| e.to_string())?;
    if frame.predicate_lemma.is_empty() {
        return Err("empty predicate_lemma".into());
    }
    for arg in &frame.args {
        if arg.start >= arg.end {
            return Err(format!(
                "bad span [{}, {}) for role {}",
                arg.start, arg.end, arg.role
            ));
        }
        if arg.role.is_empty() {
            return Err("empty role label".into());
        }
    }
    Ok(frame)
}

/// Serialize one frame to its single-line record form.
pub fn serialize_frame(frame: &Frame) -> String {
    serde_json::to_string(frame).expect("frame serialization cannot fail")
}

/// Serialize frames to the line-delimited record format.
pub fn serialize_frames(frames: &[Frame]) -> String {
    let mut out = String::new();
    for frame in frames {
        out.push_str(&serialize_frame(frame));
        out.push('\n');
    }
    out
}

/// Load a corpus file, failing if any line is malformed.
pub fn load_frames(path: &std::path::Path) -> Result<Vec<Frame>, CorpusError> {
    let file = std::fs::File::open(path)?;
    let outcome = parse_frames(std::io::BufReader::new(file))?;
    if let Some(err) = outcome.errors.first() {
        return Err(CorpusError::Schema {
            line: err.line,
            message: err.message.clone(),
        });
    }
    Ok(outcome.frames)
}

/// Tokenization agreement record for one sentence's annotation layers.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct LayerAlignment {
    pub aligned: bool,
    pub token_counts: Vec<(String, usize)>,
}

/// Check whether all annotation layers of a sentence share one token count.
/// A mismatch is a result to be flagged, not an error.
pub fn align_layers(layers: &[TokenLayer]) -> LayerAlignment {
    assert!(!layers.is_empty(), "align_layers needs at least one layer");
    let token_counts: Vec<(String, usize)> = layers
        .iter()
        .map(|l| (l.layer_name.clone(), l.tokens.len()))
        .collect();
    let first = token_counts[0].1;
    let aligned = token_counts.iter().all(|&(_, n)| n == first);
    LayerAlignment {
        aligned,
        token_counts,
    }
}

/// Find the head token of a span given dependency parents: the span token
/// whose parent lies outside the span (the sentence root counts as outside),
/// leftmost on ties; falls back to the leftmost token for degenerate spans.
///
/// `dep_heads[i]` is the parse parent of token `i`; the root is marked by a
/// self-index or any out-of-sentence sentinel.
#[allow(clippy::needless_range_loop)]
pub fn find_head(span: &ArgSpan, dep_heads: &[usize]) -> Result<usize, CorpusError> {
    if span.start >= span.end || span.end > dep_heads.len() {
        return Err(CorpusError::Index(format!(
            "span [{}, {}) outside sentence of {} tokens",
            span.start,
            span.end,
            dep_heads.len()
        )));
    }
    for i in span.start..span.end {
        let parent = dep_heads[i];
        let external = parent == i || parent < span.start || parent >= span.end;
        if external {
            return Ok(i);
        }
    }
    Ok(span.start)
}

/// Count every argument role label plus one `PRD` per frame, sorted by
/// descending count (ties by label, so reports are reproducible).
pub fn role_histogram(frames: &[Frame]) -> Vec<(String, u64)> {
    let mut counts: BTreeMap<&str, u64> = BTreeMap::new();
    for frame in frames {
        *counts.entry("PRD").or_insert(0) += 1;
        for arg in &frame.args {
            *counts.entry(&arg.role).or_insert(0) += 1;
        }
    }
    let mut hist: Vec<(String, u64)> = counts
        .into_iter()
        .map(|(label, n)| (label.to_string(), n))
        .collect();
    hist.sort_by(|a, b| b.1.cmp(&a.1).then_with(|| a.0.cmp(&b.0)));
    hist
}

/// Distinct sentences and total frame records.
pub fn count_frames(frames: &[Frame]) -> (usize, usize) {
    let sentences: BTreeSet<(&str, &str)> = frames
        .iter()
        .map(|f| (f.doc_id.as_str(), f.sent_id.as_str()))
        .collect();
    (sentences.len(), frames.len())
}

/// Full corpus summary: counts, role histogram, and the fraction of
/// sentences flagged as tokenization mismatches.
pub fn corpus_stats(frames: &[Frame]) -> CorpusStats {
    let (sentence_count, frame_count) = count_frames(frames);
    let mismatched: BTreeSet<(&str, &str)> = frames
        .iter()
        .filter(|f| f.mismatch)
        .map(|f| (f.doc_id.as_str(), f.sent_id.as_str()))
        .collect();
    let mismatch_ratio = if sentence_count == 0 {
        0.0
    } else {
        mismatched.len() as f64 / sentence_count as f64
    };
    CorpusStats {
        sentence_count,
        frame_count,
        role_counts: role_histogram(frames),
        mismatch_ratio,
    }
}

/// Partition `0..total_files` into train/dev/test. When `dev` and `test`
/// are both unspecified and `total_files` is 3490, the uniform 16+16 index
/// lists for that corpus are used.
pub fn split_files(
    total_files: usize,
    dev: Option<Vec<usize>>,
    test: Option<Vec<usize>>,
) -> Result<FileSplit, CorpusError> {
    let (dev, test) = match (dev, test) {
        (None, None) if total_files == DEFAULT_TOTAL_FILES => {
            (DEFAULT_DEV_FILES.to_vec(), DEFAULT_TEST_FILES.to_vec())
        }
        (dev, test) => (dev.unwrap_or_default(), test.unwrap_or_default()),
    };
    for &i in dev.iter().chain(test.iter()) {
        if i >= total_files {
            return Err(CorpusError::Range(format!(
                "file index {i} out of range for {total_files} files"
            )));
        }
    }
    let dev_set: BTreeSet<usize> = dev.iter().copied().collect();
    let test_set: BTreeSet<usize> = test.iter().copied().collect();
    if let Some(&index) = dev_set.intersection(&test_set).next() {
        return Err(CorpusError::Overlap { index });
    }
    let train_files: Vec<usize> = (0..total_files)
        .filter(|i| !dev_set.contains(i) && !test_set.contains(i))
        .collect();
    Ok(FileSplit {
        train_files,
        dev_files: dev_set.into_iter().collect(),
        test_files: test_set.into_iter().collect(),
        total_files,
    })
}

/// Deterministic uniform stride selection of `fraction` of the items:
/// picks positions `round(i * n / k)` for `i in 0..k` where
/// `k = max(1, round(fraction * n))`. Sorted, duplicate-free.
pub fn stride_indices(n: usize, fraction: f64) -> Result<Vec<usize>, CorpusError> {
    if !(fraction > 0.0 && fraction <= 1.0) {
        return Err(CorpusError::Range(format!(
            "fraction {fraction} outside (0, 1]"
        )));
    }
    if n == 0 {
        return Ok(Vec::new());
    }
    let k = ((fraction * n as f64).round() as usize).max(1);
    let mut picks: Vec<usize> = (0..k)
        .map(|i| ((i as f64 * n as f64 / k as f64).round() as usize).min(n - 1))
        .collect();
    picks.sort_unstable();
    picks.dedup();
    Ok(picks)
}

/// Select a uniform subset of the training files. At least one file is
/// always selected for any admissible fraction.
pub fn select_subset(train_files: &[usize], fraction: f64) -> Result<Vec<usize>, CorpusError> {
    let picks = stride_indices(train_files.len(), fraction)?;
    Ok(picks.into_iter().map(|i| train_files[i]).collect())
}

/// Drop frames whose source is in the excluded set; order preserved.
pub fn filter_by_source(frames: Vec<Frame>, excluded: &BTreeSet<Source>) -> Vec<Frame> {
    frames
        .into_iter()
        .filter(|f| !excluded.contains(&f.source))
        .collect()
}
