//! Experiment harness: synthetic corpora with known conditional structure,
//! an exact Bayes-optimal baseline for them, corpus corruption at controlled
//! rates, and deterministic sweep grids over fraction × roleset × noise.

use std::collections::{BTreeMap, BTreeSet};
use std::io::Write;
use std::path::{Path, PathBuf};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};
use thiserror::Error;

use crate::corpus::{stride_indices, CorpusError, Frame, FrameArg, Source};
use crate::eval::{aggregate_runs, norms_rho, EvalError, MetricSummary, NormItem};
use crate::model::{DEFAULT_BLOCKS, DEFAULT_DIM};
use crate::roleset::{RoleSet, RoleSetConfig, RoleSetError, Vocabulary, DEFAULT_VOCAB_LIMIT};
use crate::training::{
    init_for, make_samples, train_with_hook, Sample, TrainConfig, TrainError,
};

#[derive(Debug, Error)]
pub enum HarnessError {
    #[error("spec error: {0}")]
    Spec(String),
    #[error("report error: {0}")]
    Report(String),
    #[error(transparent)]
    Roles(#[from] RoleSetError),
    #[error(transparent)]
    Corpus(#[from] CorpusError),
    #[error(transparent)]
    Train(#[from] TrainError),
    #[error(transparent)]
    Eval(#[from] EvalError),
    #[error("io error: {0}")]
    Io(#[from] std::io::Error),
}

/// Discrete distribution over small counts, e.g. frames per sentence.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CountDist {
    pub counts: Vec<usize>,
    pub probs: Vec<f64>,
}

impl CountDist {
    pub fn fixed(count: usize) -> Self {
        CountDist {
            counts: vec![count],
            probs: vec![1.0],
        }
    }

    fn validate(&self, what: &str) -> Result<(), HarnessError> {
        if self.counts.is_empty() {
            return Err(HarnessError::Spec(format!("{what}: empty support")));
        }
        if self.counts.len() != self.probs.len() {
            return Err(HarnessError::Spec(format!(
                "{what}: {} counts vs {} probs",
                self.counts.len(),
                self.probs.len()
            )));
        }
        let distinct: BTreeSet<usize> = self.counts.iter().copied().collect();
        if distinct.len() != self.counts.len() {
            return Err(HarnessError::Spec(format!("{what}: duplicate counts")));
        }
        validate_dist(&self.probs, what)
    }

    fn sample(&self, rng: &mut ChaCha8Rng) -> usize {
        self.counts[sample_index(&self.probs, rng)]
    }

    fn max_count(&self) -> usize {
        self.counts.iter().copied().max().unwrap_or(0)
    }
}

fn validate_dist(probs: &[f64], what: &str) -> Result<(), HarnessError> {
    if probs.iter().any(|p| !p.is_finite() || *p < 0.0) {
        return Err(HarnessError::Spec(format!(
            "{what}: probabilities must be finite and non-negative"
        )));
    }
    let sum: f64 = probs.iter().sum();
    if (sum - 1.0).abs() > 1e-9 {
        return Err(HarnessError::Spec(format!(
            "{what}: probabilities sum to {sum}, not 1"
        )));
    }
    Ok(())
}

fn sample_index(probs: &[f64], rng: &mut ChaCha8Rng) -> usize {
    let draw: f64 = rng.gen();
    let mut acc = 0.0;
    for (i, &p) in probs.iter().enumerate() {
        acc += p;
        if draw < acc {
            return i;
        }
    }
    probs.len() - 1
}

/// Generator for a synthetic frame corpus with known conditionals.
///
/// A sentence draws a frame count, each frame draws a verb, an argument
/// count, then that many roles i.i.d. from `role_probs[verb]`; repeated
/// roles after the first are dropped, and each retained role draws its head
/// noun from `noun_probs[verb][role]`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SynthSpec {
    pub verbs: Vec<String>,
    pub nouns: Vec<String>,
    pub roles: Vec<String>,
    /// P(verb); uniform when omitted.
    #[serde(default)]
    pub verb_probs: Option<Vec<f64>>,
    /// P(role | verb), indexed `[verb][role]`.
    pub role_probs: Vec<Vec<f64>>,
    /// P(noun | verb, role), indexed `[verb][role][noun]`.
    pub noun_probs: Vec<Vec<Vec<f64>>>,
    pub n_sentences: usize,
    pub frames_per_sentence: CountDist,
    pub args_per_frame: CountDist,
    pub seed: u64,
}

impl SynthSpec {
    pub fn validate(&self) -> Result<(), HarnessError> {
        if self.verbs.is_empty() || self.nouns.is_empty() || self.roles.is_empty() {
            return Err(HarnessError::Spec(
                "verbs, nouns and roles must be non-empty".into(),
            ));
        }
        for list in [&self.verbs, &self.nouns, &self.roles] {
            let distinct: BTreeSet<&String> = list.iter().collect();
            if distinct.len() != list.len() {
                return Err(HarnessError::Spec("duplicate lemma or role label".into()));
            }
        }
        if self
            .roles
            .iter()
            .any(|r| r == crate::roleset::PRD_LABEL || r.starts_with('<'))
        {
            return Err(HarnessError::Spec(
                "role inventory may not contain PRD or reserved labels".into(),
            ));
        }
        if self.n_sentences == 0 {
            return Err(HarnessError::Spec("n_sentences must be positive".into()));
        }
        if let Some(vp) = &self.verb_probs {
            if vp.len() != self.verbs.len() {
                return Err(HarnessError::Spec("verb_probs length mismatch".into()));
            }
            validate_dist(vp, "verb_probs")?;
        }
        if self.role_probs.len() != self.verbs.len() {
            return Err(HarnessError::Spec("role_probs needs one row per verb".into()));
        }
        for (v, row) in self.role_probs.iter().enumerate() {
            if row.len() != self.roles.len() {
                return Err(HarnessError::Spec(format!(
                    "role_probs[{v}] length mismatch"
                )));
            }
            validate_dist(row, &format!("role_probs[{v}]"))?;
        }
        if self.noun_probs.len() != self.verbs.len() {
            return Err(HarnessError::Spec("noun_probs needs one row per verb".into()));
        }
        for (v, rows) in self.noun_probs.iter().enumerate() {
            if rows.len() != self.roles.len() {
                return Err(HarnessError::Spec(format!(
                    "noun_probs[{v}] needs one row per role"
                )));
            }
            for (r, row) in rows.iter().enumerate() {
                if row.len() != self.nouns.len() {
                    return Err(HarnessError::Spec(format!(
                        "noun_probs[{v}][{r}] length mismatch"
                    )));
                }
                validate_dist(row, &format!("noun_probs[{v}][{r}]"))?;
            }
        }
        self.frames_per_sentence.validate("frames_per_sentence")?;
        self.args_per_frame.validate("args_per_frame")?;
        Ok(())
    }

    fn verb_dist(&self) -> Vec<f64> {
        self.verb_probs
            .clone()
            .unwrap_or_else(|| vec![1.0 / self.verbs.len() as f64; self.verbs.len()])
    }

    /// Identifiable corpus: each role owns a disjoint band of `band_size`
    /// nouns, so the head noun determines the role; within a band, mass
    /// `peak` sits on a verb-dependent noun and the rest spreads uniformly.
    /// `role_weights` (normalized) set P(role | verb), shared across verbs.
    #[allow(clippy::needless_range_loop)]
    pub fn role_banded(
        n_verbs: usize,
        roles: &[&str],
        role_weights: &[f64],
        band_size: usize,
        peak: f64,
        n_sentences: usize,
        seed: u64,
    ) -> SynthSpec {
        assert_eq!(roles.len(), role_weights.len());
        assert!(band_size >= 1 && peak > 0.0 && peak <= 1.0);
        let verbs: Vec<String> = (0..n_verbs).map(|i| format!("v{i}")).collect();
        let n_nouns = roles.len() * band_size;
        let nouns: Vec<String> = (0..n_nouns).map(|i| format!("n{i}")).collect();
        let wsum: f64 = role_weights.iter().sum();
        let role_row: Vec<f64> = role_weights.iter().map(|w| w / wsum).collect();
        let mut noun_probs = Vec::with_capacity(n_verbs);
        for v in 0..n_verbs {
            let mut per_role = Vec::with_capacity(roles.len());
            for r in 0..roles.len() {
                let band_start = r * band_size;
                let peak_noun = band_start + v % band_size;
                let mut row = vec![0.0; n_nouns];
                if band_size == 1 {
                    row[band_start] = 1.0;
                } else {
                    let rest = (1.0 - peak) / (band_size - 1) as f64;
                    for n in band_start..band_start + band_size {
                        row[n] = if n == peak_noun { peak } else { rest };
                    }
                }
                per_role.push(row);
            }
            noun_probs.push(per_role);
        }
        SynthSpec {
            verbs,
            nouns,
            roles: roles.iter().map(|r| r.to_string()).collect(),
            verb_probs: None,
            role_probs: vec![role_row; n_verbs],
            noun_probs,
            n_sentences,
            frames_per_sentence: CountDist {
                counts: vec![1, 2],
                probs: vec![0.8, 0.2],
            },
            args_per_frame: CountDist {
                counts: vec![1, 2, 3],
                probs: vec![0.2, 0.5, 0.3],
            },
            seed,
        }
    }
}

/// Generate the corpus a spec describes. The same spec (same seed) always
/// yields the identical frame list.
pub fn generate_synthetic(spec: &SynthSpec) -> Result<Vec<Frame>, HarnessError> {
    spec.validate()?;
    let verb_dist = spec.verb_dist();
    let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);
    let mut frames = Vec::new();
    for s in 0..spec.n_sentences {
        let n_frames = spec.frames_per_sentence.sample(&mut rng);
        for _ in 0..n_frames {
            let v = sample_index(&verb_dist, &mut rng);
            let n_args = spec.args_per_frame.sample(&mut rng);
            let mut seen = BTreeSet::new();
            let mut args = Vec::new();
            for _ in 0..n_args {
                let r = sample_index(&spec.role_probs[v], &mut rng);
                if !seen.insert(r) {
                    continue; // repeated role in this frame: keep the first draw
                }
                let n = sample_index(&spec.noun_probs[v][r], &mut rng);
                let pos = args.len() + 1;
                args.push(FrameArg {
                    role: spec.roles[r].clone(),
                    head_lemma: spec.nouns[n].clone(),
                    start: pos,
                    end: pos + 1,
                });
            }
            frames.push(Frame {
                doc_id: "synth".to_string(),
                sent_id: format!("s{s}"),
                source: Source::SYNTH,
                mismatch: false,
                predicate_lemma: spec.verbs[v].clone(),
                args,
            });
        }
    }
    Ok(frames)
}

const MAX_ORACLE_ROLES: usize = 16;

/// Exact Bayes-optimal (role, word) accuracy for samples drawn from a spec,
/// given the same observations the model sees: the verb, the other retained
/// (role, noun) pairs, and the queried noun (role task) or queried role
/// (word task). Computed by enumeration over retained role sets, so the
/// role inventory is capped at 16 labels.
#[allow(clippy::needless_range_loop)]
pub fn bayes_oracle(spec: &SynthSpec) -> Result<(f64, f64), HarnessError> {
    spec.validate()?;
    let nr = spec.roles.len();
    if nr > MAX_ORACLE_ROLES {
        return Err(HarnessError::Spec(format!(
            "oracle enumeration supports at most {MAX_ORACLE_ROLES} roles, got {nr}"
        )));
    }
    let verb_dist = spec.verb_dist();
    let max_args = spec.args_per_frame.max_count();
    let n_masks = 1usize << nr;

    let mut num_role = 0.0;
    let mut num_word = 0.0;
    let mut denom = 0.0;
    for (v, &pv) in verb_dist.iter().enumerate() {
        if pv == 0.0 {
            continue;
        }
        // P(retained role set | verb): evolve the deduped-set distribution
        // one i.i.d. role draw at a time, then mix over argument counts.
        let mut set_dist = vec![0.0; n_masks];
        let mut dp = vec![0.0; n_masks];
        dp[0] = 1.0;
        let mut weight_of_count: BTreeMap<usize, f64> = BTreeMap::new();
        for (&c, &p) in spec.args_per_frame.counts.iter().zip(&spec.args_per_frame.probs) {
            weight_of_count.insert(c, p);
        }
        for drawn in 0..=max_args {
            if let Some(&q) = weight_of_count.get(&drawn) {
                for mask in 0..n_masks {
                    set_dist[mask] += q * dp[mask];
                }
            }
            if drawn == max_args {
                break;
            }
            let mut next = vec![0.0; n_masks];
            for (mask, &w) in dp.iter().enumerate() {
                if w == 0.0 {
                    continue;
                }
                for (r, &pr) in spec.role_probs[v].iter().enumerate() {
                    if pr > 0.0 {
                        next[mask | (1 << r)] += w * pr;
                    }
                }
            }
            dp = next;
        }

        let max_word_prob: Vec<f64> = (0..nr)
            .map(|r| spec.noun_probs[v][r].iter().cloned().fold(0.0, f64::max))
            .collect();

        for (mask, &pset) in set_dist.iter().enumerate() {
            if pset == 0.0 || mask == 0 {
                continue;
            }
            for target in 0..nr {
                if mask & (1 << target) == 0 {
                    continue;
                }
                let sample_w = pv * pset;
                denom += sample_w;
                num_word += sample_w * max_word_prob[target];
                let ctx = mask & !(1 << target);
                for (w, &pw) in spec.noun_probs[v][target].iter().enumerate() {
                    if pw == 0.0 {
                        continue;
                    }
                    // posterior over the queried role given verb, context
                    // roles, and the queried noun; ties resolve low
                    let mut best_r = usize::MAX;
                    let mut best_score = f64::NEG_INFINITY;
                    for r in 0..nr {
                        if ctx & (1 << r) != 0 {
                            continue;
                        }
                        let score = set_dist[ctx | (1 << r)] * spec.noun_probs[v][r][w];
                        if score > best_score {
                            best_score = score;
                            best_r = r;
                        }
                    }
                    if best_r == target {
                        num_role += sample_w * pw;
                    }
                }
            }
        }
    }
    if denom == 0.0 {
        return Err(HarnessError::Spec(
            "spec generates no argument samples".into(),
        ));
    }
    Ok((num_role / denom, num_word / denom))
}

/// Corruption rates applied independently per frame and per argument.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct NoiseSpec {
    /// P(an argument's role label is replaced by a uniformly random other
    /// label from the corpus label pool).
    pub role_flip_rate: f64,
    /// P(an argument's head lemma is replaced by a uniformly random lemma
    /// from the corpus lemma pool).
    pub head_error_rate: f64,
    /// P(a frame is dropped entirely).
    pub frame_drop_rate: f64,
    #[serde(default)]
    pub seed: u64,
}

impl NoiseSpec {
    pub fn clean(seed: u64) -> Self {
        NoiseSpec {
            role_flip_rate: 0.0,
            head_error_rate: 0.0,
            frame_drop_rate: 0.0,
            seed,
        }
    }

    pub fn is_clean(&self) -> bool {
        self.role_flip_rate == 0.0 && self.head_error_rate == 0.0 && self.frame_drop_rate == 0.0
    }

    pub fn validate(&self) -> Result<(), HarnessError> {
        for (name, rate) in [
            ("role_flip_rate", self.role_flip_rate),
            ("head_error_rate", self.head_error_rate),
            ("frame_drop_rate", self.frame_drop_rate),
        ] {
            if !(0.0..=1.0).contains(&rate) || rate.is_nan() {
                return Err(HarnessError::Spec(format!("{name} {rate} outside [0, 1]")));
            }
        }
        Ok(())
    }
}

/// Corrupt a corpus: drop whole frames, flip role labels to a different
/// label from the corpus pool, and replace head lemmas from the corpus
/// lemma pool. All rates zero returns the input unchanged. Decisions come
/// from one seeded stream in frame order, so equal seeds corrupt equally.
pub fn inject_noise(frames: &[Frame], noise: &NoiseSpec) -> Result<Vec<Frame>, HarnessError> {
    noise.validate()?;
    if noise.is_clean() {
        return Ok(frames.to_vec());
    }
    let labels: Vec<&str> = frames
        .iter()
        .flat_map(|f| f.args.iter().map(|a| a.role.as_str()))
        .collect::<BTreeSet<_>>()
        .into_iter()
        .collect();
    let lemmas: Vec<&str> = frames
        .iter()
        .flat_map(|f| {
            f.args
                .iter()
                .map(|a| a.head_lemma.as_str())
                .chain(std::iter::once(f.predicate_lemma.as_str()))
        })
        .collect::<BTreeSet<_>>()
        .into_iter()
        .collect();
    let mut rng = ChaCha8Rng::seed_from_u64(noise.seed);
    let mut out = Vec::with_capacity(frames.len());
    for frame in frames {
        if noise.frame_drop_rate > 0.0 && rng.gen_bool(noise.frame_drop_rate) {
            continue;
        }
        let mut frame = frame.clone();
        for arg in &mut frame.args {
            if noise.role_flip_rate > 0.0 && rng.gen_bool(noise.role_flip_rate) && labels.len() > 1
            {
                let pos = labels
                    .binary_search(&arg.role.as_str())
                    .expect("pool contains every corpus label");
                let pick = rng.gen_range(0..labels.len() - 1);
                arg.role = labels[if pick >= pos { pick + 1 } else { pick }].to_string();
            }
            if noise.head_error_rate > 0.0 && rng.gen_bool(noise.head_error_rate) {
                arg.head_lemma = lemmas[rng.gen_range(0..lemmas.len())].to_string();
            }
        }
        out.push(frame);
    }
    Ok(out)
}

fn default_dim() -> usize {
    DEFAULT_DIM
}

fn default_blocks() -> usize {
    DEFAULT_BLOCKS
}

fn default_dev_fraction() -> f64 {
    0.1
}

fn default_test_fraction() -> f64 {
    0.1
}

fn default_vocab_limit() -> usize {
    DEFAULT_VOCAB_LIMIT
}

fn default_faithful_max() -> bool {
    true
}

/// Grid of sweep cells: every fraction × roleset × noise level, `n_runs`
/// seeded runs each.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepGrid {
    pub fractions: Vec<f64>,
    pub rolesets: Vec<RoleSetConfig>,
    pub noise_levels: Vec<NoiseSpec>,
    pub n_runs: usize,
    pub base: TrainConfig,
    #[serde(default = "default_dim")]
    pub dim: usize,
    #[serde(default = "default_blocks")]
    pub blocks: usize,
    /// Fraction of non-test sentences held out for early stopping.
    #[serde(default = "default_dev_fraction")]
    pub dev_fraction: f64,
    /// Fraction of sentences held out, uncorrupted, for accuracy.
    #[serde(default = "default_test_fraction")]
    pub test_fraction: f64,
    #[serde(default = "default_vocab_limit")]
    pub vocab_limit: usize,
    /// When true, the reported maximum ρ is the maximum over every epoch's
    /// parameters; when false, the cheaper best-dev-checkpoint ρ stands in.
    #[serde(default = "default_faithful_max")]
    pub faithful_max: bool,
}

impl SweepGrid {
    pub fn validate(&self) -> Result<(), HarnessError> {
        if self.fractions.is_empty() || self.rolesets.is_empty() || self.noise_levels.is_empty() {
            return Err(HarnessError::Spec(
                "fractions, rolesets and noise_levels must be non-empty".into(),
            ));
        }
        for &f in &self.fractions {
            if !(f > 0.0 && f <= 1.0) {
                return Err(HarnessError::Spec(format!("fraction {f} outside (0, 1]")));
            }
        }
        for nz in &self.noise_levels {
            nz.validate()?;
        }
        if self.n_runs == 0 {
            return Err(HarnessError::Spec("n_runs must be at least 1".into()));
        }
        if self.dim == 0 || self.blocks == 0 {
            return Err(HarnessError::Spec("dim and blocks must be positive".into()));
        }
        if !(0.0..1.0).contains(&self.dev_fraction)
            || !(0.0..1.0).contains(&self.test_fraction)
            || self.dev_fraction + self.test_fraction >= 1.0
        {
            return Err(HarnessError::Spec(
                "dev and test fractions must lie in [0, 1) and leave training data".into(),
            ));
        }
        self.base.validate()?;
        Ok(())
    }
}

/// Env var consulted for the sweep worker count when the caller passes
/// none. This is the only environment configuration the harness reads.
pub const WORKERS_ENV: &str = "ROLEFIT_WORKERS";

pub const DOMAIN_TRAIN: u8 = 0;
pub const DOMAIN_NOISE_TRAIN: u8 = 1;
pub const DOMAIN_NOISE_DEV: u8 = 2;

/// Seed for one run of one sweep cell: SHA-256 over the base seed, the
/// cell coordinates, the run index, and a domain tag, taking the first 8
/// digest bytes little-endian. Stable across platforms and worker counts.
pub fn cell_seed(
    base_seed: u64,
    fraction: f64,
    roleset_name: &str,
    noise: &NoiseSpec,
    run: usize,
    domain: u8,
) -> u64 {
    let mut h = Sha256::new();
    h.update(base_seed.to_le_bytes());
    h.update(fraction.to_bits().to_le_bytes());
    h.update(roleset_name.as_bytes());
    h.update([0u8]);
    h.update(noise.role_flip_rate.to_bits().to_le_bytes());
    h.update(noise.head_error_rate.to_bits().to_le_bytes());
    h.update(noise.frame_drop_rate.to_bits().to_le_bytes());
    h.update((run as u64).to_le_bytes());
    h.update([domain]);
    let digest = h.finalize();
    u64::from_le_bytes(digest[..8].try_into().expect("digest has 32 bytes"))
}

fn sentence_keys(frames: &[Frame]) -> Vec<(String, String)> {
    let mut seen = BTreeSet::new();
    let mut keys = Vec::new();
    for f in frames {
        let key = (f.doc_id.clone(), f.sent_id.clone());
        if seen.insert(key.clone()) {
            keys.push(key);
        }
    }
    keys
}

fn frames_with_keys(frames: &[Frame], keys: &BTreeSet<(String, String)>) -> Vec<Frame> {
    frames
        .iter()
        .filter(|f| keys.contains(&(f.doc_id.clone(), f.sent_id.clone())))
        .cloned()
        .collect()
}

/// Train, dev, and test frame partitions, in that order.
pub type SplitFrames = (Vec<Frame>, Vec<Frame>, Vec<Frame>);

/// Sentence-level train/dev/test split by even stride over distinct
/// sentences in first-appearance order. The test stride runs over all
/// sentences; the dev stride runs over the remainder. Deterministic and
/// seed-free, so every sweep cell sees the same split.
pub fn split_sentences(
    frames: &[Frame],
    dev_fraction: f64,
    test_fraction: f64,
) -> Result<SplitFrames, HarnessError> {
    let keys = sentence_keys(frames);
    let n = keys.len();
    let test_picks: BTreeSet<usize> = if test_fraction > 0.0 && n > 0 {
        stride_indices(n, test_fraction)?.into_iter().collect()
    } else {
        BTreeSet::new()
    };
    let remaining: Vec<usize> = (0..n).filter(|i| !test_picks.contains(i)).collect();
    let dev_picks: BTreeSet<usize> = if dev_fraction > 0.0 && !remaining.is_empty() {
        stride_indices(remaining.len(), dev_fraction)?
            .into_iter()
            .map(|i| remaining[i])
            .collect()
    } else {
        BTreeSet::new()
    };
    let mut test_keys = BTreeSet::new();
    let mut dev_keys = BTreeSet::new();
    let mut train_keys = BTreeSet::new();
    for (i, key) in keys.into_iter().enumerate() {
        if test_picks.contains(&i) {
            test_keys.insert(key);
        } else if dev_picks.contains(&i) {
            dev_keys.insert(key);
        } else {
            train_keys.insert(key);
        }
    }
    Ok((
        frames_with_keys(frames, &train_keys),
        frames_with_keys(frames, &dev_keys),
        frames_with_keys(frames, &test_keys),
    ))
}

/// Keep an evenly strided fraction of distinct sentences.
pub fn subset_sentences(frames: &[Frame], fraction: f64) -> Result<Vec<Frame>, HarnessError> {
    let keys = sentence_keys(frames);
    if keys.is_empty() {
        return Ok(Vec::new());
    }
    let picks = stride_indices(keys.len(), fraction)?;
    let picked: BTreeSet<(String, String)> = picks.into_iter().map(|i| keys[i].clone()).collect();
    Ok(frames_with_keys(frames, &picked))
}

/// One sweep-report row: a cell's coordinates plus mean ± std of each
/// metric across its runs. Metrics a cell could not produce stay `None`;
/// failures land in `error` without aborting the sweep.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReportRow {
    pub fraction: f64,
    pub roleset: String,
    pub role_flip: f64,
    pub head_error: f64,
    pub frame_drop: f64,
    pub n_runs: usize,
    pub role_acc: Option<(f64, f64)>,
    pub word_acc: Option<(f64, f64)>,
    pub rho_final: Option<(f64, f64)>,
    pub rho_max: Option<(f64, f64)>,
    pub error: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct SweepReport {
    pub rows: Vec<ReportRow>,
}

#[allow(clippy::too_many_arguments)]
fn run_once(
    grid: &SweepGrid,
    train_all: &[Frame],
    dev_all: &[Frame],
    test_samples_for: &dyn Fn(&RoleSet, &Vocabulary) -> Vec<Sample>,
    norms: Option<&[NormItem]>,
    fraction: f64,
    rs: &RoleSet,
    noise: &NoiseSpec,
    run: usize,
) -> Result<(BTreeMap<String, f64>, Vec<String>), HarnessError> {
    let train_seed = cell_seed(grid.base.seed, fraction, rs.name(), noise, run, DOMAIN_TRAIN);
    let train_subset = subset_sentences(train_all, fraction)?;
    let train_noisy = inject_noise(
        &train_subset,
        &NoiseSpec {
            seed: cell_seed(
                grid.base.seed,
                fraction,
                rs.name(),
                noise,
                run,
                DOMAIN_NOISE_TRAIN,
            ),
            ..*noise
        },
    )?;
    let dev_noisy = inject_noise(
        dev_all,
        &NoiseSpec {
            seed: cell_seed(
                grid.base.seed,
                fraction,
                rs.name(),
                noise,
                run,
                DOMAIN_NOISE_DEV,
            ),
            ..*noise
        },
    )?;
    let vocab = Vocabulary::build(&train_noisy, grid.vocab_limit);
    let params = init_for(rs, &vocab, grid.dim, grid.blocks, train_seed);
    let config = TrainConfig {
        seed: train_seed,
        ..grid.base.clone()
    };

    let mut warnings = Vec::new();
    let mut rho_running_max: Option<f64> = None;
    let outcome = {
        let vocab_ref = &vocab;
        let rho_max_slot = &mut rho_running_max;
        train_with_hook(
            &train_noisy,
            &dev_noisy,
            rs,
            &vocab,
            params,
            &config,
            |_, epoch_params| {
                if grid.faithful_max {
                    if let Some(norms) = norms {
                        if let Ok(rho) = norms_rho(epoch_params, norms, rs, vocab_ref) {
                            *rho_max_slot =
                                Some(rho_max_slot.map_or(rho, |best: f64| best.max(rho)));
                        }
                    }
                }
            },
        )?
    };

    let samples = test_samples_for(rs, &vocab);
    let (role_acc, word_acc) =
        crate::eval::evaluate_accuracy(&outcome.final_params, &samples)?;
    let mut metrics = BTreeMap::new();
    metrics.insert("role_acc".to_string(), role_acc);
    metrics.insert("word_acc".to_string(), word_acc);

    if let Some(norms) = norms {
        match norms_rho(&outcome.final_params, norms, rs, &vocab) {
            Ok(rho) => {
                metrics.insert("rho_final".to_string(), rho);
            }
            Err(e) => warnings.push(format!("run {run}: rho_final: {e}")),
        }
        let rho_max = if grid.faithful_max {
            rho_running_max
        } else {
            match norms_rho(&outcome.best_params, norms, rs, &vocab) {
                Ok(rho) => Some(rho),
                Err(e) => {
                    warnings.push(format!("run {run}: rho_max: {e}"));
                    None
                }
            }
        };
        match rho_max {
            Some(rho) => {
                metrics.insert("rho_max".to_string(), rho);
            }
            None if grid.faithful_max => {
                warnings.push(format!("run {run}: rho_max degenerate at every epoch"));
            }
            None => {}
        }
    }
    Ok((metrics, warnings))
}

#[allow(clippy::too_many_arguments)]
fn run_cell(
    grid: &SweepGrid,
    train_all: &[Frame],
    dev_all: &[Frame],
    test_frames: &[Frame],
    norms: Option<&[NormItem]>,
    fraction: f64,
    rs: &RoleSet,
    noise: &NoiseSpec,
) -> ReportRow {
    let mut runs = Vec::new();
    let mut problems = Vec::new();
    // test samples depend only on the cell's roleset and vocabulary, which
    // vary per run with the noisy training subset, so build them per run
    let test_samples_for = |rs: &RoleSet, vocab: &Vocabulary| -> Vec<Sample> {
        test_frames
            .iter()
            .flat_map(|f| make_samples(f, rs, vocab))
            .collect()
    };
    for run in 0..grid.n_runs {
        match run_once(
            grid,
            train_all,
            dev_all,
            &test_samples_for,
            norms,
            fraction,
            rs,
            noise,
            run,
        ) {
            Ok((metrics, warnings)) => {
                runs.push(metrics);
                problems.extend(warnings);
            }
            Err(e) => problems.push(format!("run {run}: {e}")),
        }
    }
    let agg = aggregate_runs(&runs);
    let pick = |key: &str| agg.get(key).map(|s: &MetricSummary| (s.mean, s.std));
    ReportRow {
        fraction,
        roleset: rs.name().to_string(),
        role_flip: noise.role_flip_rate,
        head_error: noise.head_error_rate,
        frame_drop: noise.frame_drop_rate,
        n_runs: grid.n_runs,
        role_acc: pick("role_acc"),
        word_acc: pick("word_acc"),
        rho_final: pick("rho_final"),
        rho_max: pick("rho_max"),
        error: if problems.is_empty() {
            None
        } else {
            Some(problems.join("; "))
        },
    }
}

fn env_workers() -> Option<usize> {
    std::env::var(WORKERS_ENV)
        .ok()
        .and_then(|v| v.parse().ok())
        .filter(|&n| n > 0)
}

/// Run every cell of a grid over a corpus. Cells are independent and may
/// run on parallel workers; rows always come back in grid order (fractions
/// outermost, then rolesets, then noise levels) with identical contents
/// regardless of the worker count. `workers` falls back to the
/// `ROLEFIT_WORKERS` env var, then to the process-wide default.
pub fn run_sweep(
    grid: &SweepGrid,
    frames: &[Frame],
    norms: Option<&[NormItem]>,
    workers: Option<usize>,
) -> Result<SweepReport, HarnessError> {
    grid.validate()?;
    let rolesets: Vec<RoleSet> = grid
        .rolesets
        .iter()
        .map(|cfg| RoleSet::from_config(cfg.clone()))
        .collect::<Result<_, _>>()?;
    let (train_all, dev_all, test_frames) =
        split_sentences(frames, grid.dev_fraction, grid.test_fraction)?;

    let mut cells = Vec::new();
    for &fraction in &grid.fractions {
        for rs in &rolesets {
            for noise in &grid.noise_levels {
                cells.push((fraction, rs, noise));
            }
        }
    }
    let execute = || {
        cells
            .par_iter()
            .map(|&(fraction, rs, noise)| {
                run_cell(
                    grid,
                    &train_all,
                    &dev_all,
                    &test_frames,
                    norms,
                    fraction,
                    rs,
                    noise,
                )
            })
            .collect::<Vec<ReportRow>>()
    };
    let rows = match workers.or_else(env_workers) {
        Some(n) => rayon::ThreadPoolBuilder::new()
            .num_threads(n)
            .build()
            .map_err(|e| HarnessError::Spec(format!("worker pool: {e}")))?
            .install(execute),
        None => execute(),
    };
    Ok(SweepReport { rows })
}

pub const REPORT_CSV_HEADER: &str = "fraction,roleset,role_flip,head_error,frame_drop,n_runs,\
     role_acc_mean,role_acc_std,word_acc_mean,word_acc_std,\
     rho_final_mean,rho_final_std,rho_max_mean,rho_max_std,error";

fn csv_pair(pair: Option<(f64, f64)>) -> String {
    match pair {
        Some((mean, std)) => format!("{mean:.6},{std:.6}"),
        None => ",".to_string(),
    }
}

fn csv_quote(text: &str) -> String {
    if text.contains(',') || text.contains('"') || text.contains('\n') {
        format!("\"{}\"", text.replace('"', "\"\""))
    } else {
        text.to_string()
    }
}

/// Render a report as CSV, one row per cell, deterministic bytes for a
/// deterministic report. An empty report is just the header line.
pub fn report_csv(report: &SweepReport) -> String {
    let mut out = String::from(REPORT_CSV_HEADER.trim());
    out = out.replace("     ", ""); // collapse the line-broken header
    out.push('\n');
    for row in &report.rows {
        out.push_str(&format!(
            "{:.6},{},{:.6},{:.6},{:.6},{},{},{},{},{},{}\n",
            row.fraction,
            row.roleset,
            row.role_flip,
            row.head_error,
            row.frame_drop,
            row.n_runs,
            csv_pair(row.role_acc),
            csv_pair(row.word_acc),
            csv_pair(row.rho_final),
            csv_pair(row.rho_max),
            csv_quote(row.error.as_deref().unwrap_or("")),
        ));
    }
    out
}

fn parse_pair(mean: &str, std: &str, line: usize) -> Result<Option<(f64, f64)>, HarnessError> {
    match (mean.is_empty(), std.is_empty()) {
        (true, true) => Ok(None),
        (false, false) => {
            let m = mean.parse().map_err(|_| HarnessError::Report(format!(
                "line {line}: bad mean {mean:?}"
            )))?;
            let s = std.parse().map_err(|_| HarnessError::Report(format!(
                "line {line}: bad std {std:?}"
            )))?;
            Ok(Some((m, s)))
        }
        _ => Err(HarnessError::Report(format!(
            "line {line}: mean and std must both be present or both empty"
        ))),
    }
}

/// Parse a report CSV produced by `report_csv`; parsing then re-rendering
/// reproduces the bytes exactly.
pub fn parse_report_csv(text: &str) -> Result<SweepReport, HarnessError> {
    let mut lines = text.lines();
    let header = lines
        .next()
        .ok_or_else(|| HarnessError::Report("empty report".into()))?;
    let expected = REPORT_CSV_HEADER.replace("     ", "");
    if header != expected {
        return Err(HarnessError::Report(format!("unexpected header {header:?}")));
    }
    let mut rows = Vec::new();
    for (i, line) in lines.enumerate() {
        let line_no = i + 2;
        let fields: Vec<&str> = line.splitn(15, ',').collect();
        if fields.len() != 15 {
            return Err(HarnessError::Report(format!(
                "line {line_no}: expected 15 fields, found {}",
                fields.len()
            )));
        }
        let num = |field: &str, what: &str| -> Result<f64, HarnessError> {
            field.parse().map_err(|_| {
                HarnessError::Report(format!("line {line_no}: bad {what} {field:?}"))
            })
        };
        let error_field = fields[14];
        let error = if error_field.is_empty() {
            None
        } else if let Some(inner) = error_field
            .strip_prefix('"')
            .and_then(|s| s.strip_suffix('"'))
        {
            Some(inner.replace("\"\"", "\""))
        } else {
            Some(error_field.to_string())
        };
        rows.push(ReportRow {
            fraction: num(fields[0], "fraction")?,
            roleset: fields[1].to_string(),
            role_flip: num(fields[2], "role_flip")?,
            head_error: num(fields[3], "head_error")?,
            frame_drop: num(fields[4], "frame_drop")?,
            n_runs: fields[5].parse().map_err(|_| {
                HarnessError::Report(format!("line {line_no}: bad n_runs {:?}", fields[5]))
            })?,
            role_acc: parse_pair(fields[6], fields[7], line_no)?,
            word_acc: parse_pair(fields[8], fields[9], line_no)?,
            rho_final: parse_pair(fields[10], fields[11], line_no)?,
            rho_max: parse_pair(fields[12], fields[13], line_no)?,
            error,
        });
    }
    Ok(SweepReport { rows })
}

pub fn report_json(report: &SweepReport) -> String {
    let mut text = serde_json::to_string_pretty(report).expect("report serializes");
    text.push('\n');
    text
}

/// Write `report.csv` and `report.json` under a directory, creating it if
/// needed. Returns the two paths.
pub fn emit_report(report: &SweepReport, dir: &Path) -> Result<(PathBuf, PathBuf), HarnessError> {
    std::fs::create_dir_all(dir)?;
    let csv_path = dir.join("report.csv");
    let json_path = dir.join("report.json");
    let mut csv = std::fs::File::create(&csv_path)?;
    csv.write_all(report_csv(report).as_bytes())?;
    let mut json = std::fs::File::create(&json_path)?;
    json.write_all(report_json(report).as_bytes())?;
    Ok((csv_path, json_path))
}
