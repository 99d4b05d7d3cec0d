//! Held-out accuracy, thematic-fit scoring, rank correlation against human
//! judgment norms, and cross-run variance aggregation.

use std::collections::BTreeMap;
use std::io::BufRead;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::model::{argmax, forward, softmax, ModelInput, ModelParams};
use crate::roleset::{RoleSet, Vocabulary};
use crate::training::Sample;

#[derive(Debug, Error)]
pub enum EvalError {
    #[error("empty input: {0}")]
    Empty(String),
    #[error("length mismatch: {0} vs {1}")]
    Length(usize, usize),
    /// A score list with no variation has no defined rank correlation.
    /// Raised rather than mapped to 0 so aggregates cannot be poisoned
    /// silently.
    #[error("degenerate input: {0}")]
    Degenerate(String),
    #[error("norm file error at line {line}: {message}")]
    Norms { line: usize, message: String },
    #[error("io error: {0}")]
    Io(#[from] std::io::Error),
}

/// One human judgment: how well `noun` fits `role_label` of `verb`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NormItem {
    pub verb: String,
    pub noun: String,
    pub role_label: String,
    pub human_score: f64,
}

/// Argmax accuracy of both heads over samples. Role accuracy queries each
/// sample's word and scores the role head; word accuracy queries the role
/// and scores the word head. Ties resolve to the lowest index.
pub fn evaluate_accuracy(
    params: &ModelParams,
    samples: &[Sample],
) -> Result<(f64, f64), EvalError> {
    if samples.is_empty() {
        return Err(EvalError::Empty("no evaluation samples".into()));
    }
    let mut role_hits = 0usize;
    let mut word_hits = 0usize;
    for s in samples {
        let role_input = ModelInput::role_task(s.context.clone(), s.target_word);
        let rt = forward(params, &role_input).expect("sample indices fit the model");
        if argmax(&rt.role_logits) == s.target_role {
            role_hits += 1;
        }
        let word_input = ModelInput::word_task(s.context.clone(), s.target_role);
        let wt = forward(params, &word_input).expect("sample indices fit the model");
        if argmax(&wt.word_logits) == s.target_word {
            word_hits += 1;
        }
    }
    let n = samples.len() as f64;
    Ok((role_hits as f64 / n, word_hits as f64 / n))
}

/// Word-head probability of `noun` filling `role_label` of `verb`, with
/// context only the (PRD, verb) pair. Out-of-vocabulary verbs and nouns use
/// the OOV index; role labels outside the inventory use the UNKNOWN row.
pub fn thematic_fit_score(
    params: &ModelParams,
    verb: &str,
    role_label: &str,
    noun: &str,
    rs: &RoleSet,
    vocab: &Vocabulary,
) -> f64 {
    let context = vec![(rs.prd_index(), vocab.map_word(verb))];
    let input = ModelInput::word_task(context, rs.map_role(role_label));
    let trace = forward(params, &input).expect("inventory and vocabulary fit the model");
    softmax(&trace.word_logits)[vocab.map_word(noun)]
}

/// Average ranks, 1-based; tied values share the mean of their positions.
pub fn average_ranks(xs: &[f64]) -> Vec<f64> {
    let n = xs.len();
    let mut idx: Vec<usize> = (0..n).collect();
    idx.sort_by(|&a, &b| xs[a].partial_cmp(&xs[b]).expect("rank inputs are finite"));
    let mut ranks = vec![0.0; n];
    let mut i = 0;
    while i < n {
        let mut j = i;
        while j + 1 < n && xs[idx[j + 1]] == xs[idx[i]] {
            j += 1;
        }
        // positions i..=j (0-based) share the mean 1-based rank
        let mean_rank = (i + j) as f64 / 2.0 + 1.0;
        for &k in &idx[i..=j] {
            ranks[k] = mean_rank;
        }
        i = j + 1;
    }
    ranks
}

fn pearson(x: &[f64], y: &[f64]) -> Result<f64, EvalError> {
    let n = x.len() as f64;
    let mx = x.iter().sum::<f64>() / n;
    let my = y.iter().sum::<f64>() / n;
    let mut sxy = 0.0;
    let mut sxx = 0.0;
    let mut syy = 0.0;
    for (&a, &b) in x.iter().zip(y) {
        let dx = a - mx;
        let dy = b - my;
        sxy += dx * dy;
        sxx += dx * dx;
        syy += dy * dy;
    }
    if sxx == 0.0 || syy == 0.0 {
        return Err(EvalError::Degenerate(
            "constant list has no rank correlation".into(),
        ));
    }
    Ok(sxy / (sxx * syy).sqrt())
}

/// Tie-aware rank correlation: Pearson correlation of average ranks.
pub fn spearman(x: &[f64], y: &[f64]) -> Result<f64, EvalError> {
    if x.len() != y.len() {
        return Err(EvalError::Length(x.len(), y.len()));
    }
    if x.len() < 2 {
        return Err(EvalError::Empty(
            "rank correlation needs at least 2 items".into(),
        ));
    }
    if x.iter().chain(y).any(|v| !v.is_finite()) {
        return Err(EvalError::Degenerate("non-finite score".into()));
    }
    pearson(&average_ranks(x), &average_ranks(y))
}

/// Rank correlation between model fit scores and human scores over a norm
/// set.
pub fn norms_rho(
    params: &ModelParams,
    norms: &[NormItem],
    rs: &RoleSet,
    vocab: &Vocabulary,
) -> Result<f64, EvalError> {
    if norms.is_empty() {
        return Err(EvalError::Empty("no norm items".into()));
    }
    let model: Vec<f64> = norms
        .iter()
        .map(|n| thematic_fit_score(params, &n.verb, &n.role_label, &n.noun, rs, vocab))
        .collect();
    let human: Vec<f64> = norms.iter().map(|n| n.human_score).collect();
    spearman(&model, &human)
}

/// ρ for the last-epoch and best-dev-loss checkpoints. The best-checkpoint
/// column is the cheap stand-in for the per-epoch maximum; sweep cells
/// track the faithful per-epoch maximum instead.
pub fn evaluate_norms(
    final_params: &ModelParams,
    best_params: &ModelParams,
    norms: &[NormItem],
    rs: &RoleSet,
    vocab: &Vocabulary,
) -> Result<(f64, f64), EvalError> {
    let rho_final = norms_rho(final_params, norms, rs, vocab)?;
    let rho_max = norms_rho(best_params, norms, rs, vocab)?;
    Ok((rho_final, rho_max))
}

/// Normalize a norm-file role label: uppercased, with the short forms
/// A0/A1/... and AM-TMP/... expanded to ARG0/ARGM-TMP.
pub fn normalize_role_label(label: &str) -> String {
    let up = label.to_ascii_uppercase();
    if let Some(rest) = up.strip_prefix('A') {
        if !rest.is_empty() && rest.chars().all(|c| c.is_ascii_digit()) {
            return format!("ARG{rest}");
        }
        if let Some(m) = up.strip_prefix("AM-") {
            return format!("ARGM-{m}");
        }
    }
    up
}

/// Parse a norms file: one `verb noun role score` record per line, tab or
/// whitespace separated. Blank lines and `#` comments are skipped.
pub fn parse_norms<R: BufRead>(reader: R) -> Result<Vec<NormItem>, EvalError> {
    let mut items = Vec::new();
    for (i, line) in reader.lines().enumerate() {
        let line = line?;
        let trimmed = line.trim();
        if trimmed.is_empty() || trimmed.starts_with('#') {
            continue;
        }
        let fields: Vec<&str> = trimmed.split_whitespace().collect();
        if fields.len() != 4 {
            return Err(EvalError::Norms {
                line: i + 1,
                message: format!("expected 4 fields, found {}", fields.len()),
            });
        }
        let human_score: f64 = fields[3].parse().map_err(|_| EvalError::Norms {
            line: i + 1,
            message: format!("bad score: {}", fields[3]),
        })?;
        if !human_score.is_finite() {
            return Err(EvalError::Norms {
                line: i + 1,
                message: "score must be finite".into(),
            });
        }
        items.push(NormItem {
            verb: fields[0].to_string(),
            noun: fields[1].to_string(),
            role_label: normalize_role_label(fields[2]),
            human_score,
        });
    }
    Ok(items)
}

pub fn load_norms(path: &std::path::Path) -> Result<Vec<NormItem>, EvalError> {
    let file = std::fs::File::open(path)?;
    parse_norms(std::io::BufReader::new(file))
}

/// Mean and sample standard deviation of one metric across runs.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MetricSummary {
    pub mean: f64,
    pub std: f64,
    pub n: usize,
}

impl std::fmt::Display for MetricSummary {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "{:.4} ± {:.4}", self.mean, self.std)
    }
}

/// Aggregate per-run metric maps into mean ± std per metric. The standard
/// deviation uses the n−1 denominator and is 0 for a single run. Metrics
/// missing from some runs aggregate over the runs that carry them.
pub fn aggregate_runs(runs: &[BTreeMap<String, f64>]) -> BTreeMap<String, MetricSummary> {
    let mut values: BTreeMap<&str, Vec<f64>> = BTreeMap::new();
    for run in runs {
        for (k, &v) in run {
            values.entry(k).or_default().push(v);
        }
    }
    values
        .into_iter()
        .map(|(k, vs)| {
            let n = vs.len();
            let mean = vs.iter().sum::<f64>() / n as f64;
            let std = if n > 1 {
                (vs.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / (n - 1) as f64).sqrt()
            } else {
                0.0
            };
            (k.to_string(), MetricSummary { mean, std, n })
        })
        .collect()
}
