//! Role inventories and word vocabularies.
//!
//! A `RoleSet` is an explicit list of role labels plus two reserved labels:
//! `<MISSING>` for padding absent context slots and `<UNKNOWN>` for any
//! corpus label outside the explicit list. Granularity ladders grow the
//! baseline inventory one label at a time in a fixed order.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};
use thiserror::Error;

use crate::corpus::Frame;

#[derive(Debug, Error)]
pub enum RoleSetError {
    /// Ladder step count exceeds the available labels.
    #[error("range error: {0}")]
    Range(String),
    /// Explicit labels are malformed (duplicates, reserved names, no PRD).
    #[error("invalid roleset: {0}")]
    Invalid(String),
}

/// Reserved label for an absent context slot.
pub const MISSING_LABEL: &str = "<MISSING>";
/// Reserved label for corpus roles outside the explicit inventory.
pub const UNKNOWN_LABEL: &str = "<UNKNOWN>";
/// Predicate pseudo-role; every inventory must contain it.
pub const PRD_LABEL: &str = "PRD";

/// The six-label baseline inventory: predicate, two core arguments, three
/// modifiers.
pub const BASELINE_LABELS: [&str; 6] = ["PRD", "ARG0", "ARG1", "ARGM-TMP", "ARGM-LOC", "ARGM-MNR"];

/// Labels beyond the baseline in descending corpus frequency. Walking this
/// list end to end grows the baseline into the full inventory.
pub const BY_FREQUENCY_LABELS: [&str; 19] = [
    "ARG2", "ARGM-MOD", "ARGM-ADV", "ARGM-DIS", "ARGM-NEG", "ARGM-PRP", "ARGM-DIR", "ARGM-ADJ",
    "ARG3", "ARGM-CAU", "ARG4", "ARGM-EXT", "ARGM-PRD", "ARGM-LVB", "ARGM-GOL", "ARGM-COM",
    "ARGM-PNC", "ARGM-REC", "ARG5",
];

/// Core numbered arguments beyond the baseline.
pub const ARGS_ONLY_LABELS: [&str; 4] = ["ARG2", "ARG3", "ARG4", "ARG5"];

/// Expansion orders for growing the baseline inventory.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Ladder {
    /// Add labels in descending corpus frequency.
    ByFrequency,
    /// Add only core numbered arguments.
    ArgsOnly,
}

impl Ladder {
    pub fn labels(self) -> &'static [&'static str] {
        match self {
            Ladder::ByFrequency => &BY_FREQUENCY_LABELS,
            Ladder::ArgsOnly => &ARGS_ONLY_LABELS,
        }
    }
}

impl std::str::FromStr for Ladder {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.to_ascii_lowercase().as_str() {
            "by-frequency" | "by_frequency" => Ok(Ladder::ByFrequency),
            "args-only" | "args_only" => Ok(Ladder::ArgsOnly),
            other => Err(format!("unknown ladder: {other}")),
        }
    }
}

/// Serialized form of a role inventory.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct RoleSetConfig {
    pub name: String,
    pub explicit: Vec<String>,
}

/// A role inventory: explicit labels at indices `0..n`, then `<MISSING>` at
/// `n` and `<UNKNOWN>` at `n + 1`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct RoleSet {
    name: String,
    explicit: Vec<String>,
    index: BTreeMap<String, usize>,
}

impl RoleSet {
    pub fn new(name: impl Into<String>, explicit: Vec<String>) -> Result<Self, RoleSetError> {
        let name = name.into();
        if !explicit.iter().any(|l| l == PRD_LABEL) {
            return Err(RoleSetError::Invalid(format!(
                "inventory must contain {PRD_LABEL}"
            )));
        }
        let mut index = BTreeMap::new();
        for (i, label) in explicit.iter().enumerate() {
            if label == MISSING_LABEL || label == UNKNOWN_LABEL {
                return Err(RoleSetError::Invalid(format!(
                    "reserved label {label} cannot be explicit"
                )));
            }
            if index.insert(label.clone(), i).is_some() {
                return Err(RoleSetError::Invalid(format!("duplicate label {label}")));
            }
        }
        Ok(RoleSet {
            name,
            explicit,
            index,
        })
    }

    /// The six-label baseline inventory.
    pub fn baseline() -> Self {
        RoleSet::new(
            "2Args3Mods",
            BASELINE_LABELS.iter().map(|s| s.to_string()).collect(),
        )
        .expect("baseline inventory is valid")
    }

    pub fn from_config(config: RoleSetConfig) -> Result<Self, RoleSetError> {
        RoleSet::new(config.name, config.explicit)
    }

    pub fn to_config(&self) -> RoleSetConfig {
        RoleSetConfig {
            name: self.name.clone(),
            explicit: self.explicit.clone(),
        }
    }

    pub fn name(&self) -> &str {
        &self.name
    }

    pub fn explicit_labels(&self) -> &[String] {
        &self.explicit
    }

    /// Total label count including the two reserved labels.
    pub fn len(&self) -> usize {
        self.explicit.len() + 2
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    pub fn missing_index(&self) -> usize {
        self.explicit.len()
    }

    pub fn unknown_index(&self) -> usize {
        self.explicit.len() + 1
    }

    pub fn prd_index(&self) -> usize {
        self.index[PRD_LABEL]
    }

    /// Map a corpus label to its index. Total: anything outside the
    /// explicit inventory maps to `<UNKNOWN>`.
    pub fn map_role(&self, label: &str) -> usize {
        match label {
            MISSING_LABEL => self.missing_index(),
            UNKNOWN_LABEL => self.unknown_index(),
            _ => self
                .index
                .get(label)
                .copied()
                .unwrap_or_else(|| self.unknown_index()),
        }
    }

    /// Index of an explicit label, if present.
    pub fn explicit_index(&self, label: &str) -> Option<usize> {
        self.index.get(label).copied()
    }

    pub fn label(&self, index: usize) -> &str {
        if index < self.explicit.len() {
            &self.explicit[index]
        } else if index == self.missing_index() {
            MISSING_LABEL
        } else if index == self.unknown_index() {
            UNKNOWN_LABEL
        } else {
            panic!("role index {index} out of range for {} labels", self.len())
        }
    }
}

/// Inventory name for a given extra-label count: `{n}Args{m}Mods` counting
/// numbered arguments and modifiers over the whole inventory (PRD excluded),
/// or `all.args+mods` once the frequency ladder is exhausted.
fn roleset_name(explicit: &[String], ladder: Ladder, steps: usize) -> String {
    if ladder == Ladder::ByFrequency && steps == BY_FREQUENCY_LABELS.len() {
        return "all.args+mods".to_string();
    }
    let args = explicit.iter().filter(|l| l.starts_with("ARG") && !l.starts_with("ARGM")).count();
    let mods = explicit.iter().filter(|l| l.starts_with("ARGM")).count();
    format!("{args}Args{mods}Mods")
}

/// Grow the baseline inventory by the first `steps` labels of a ladder.
/// Step 0 is the baseline itself.
pub fn expand_roleset(ladder: Ladder, steps: usize) -> Result<RoleSet, RoleSetError> {
    let extra = ladder.labels();
    if steps > extra.len() {
        return Err(RoleSetError::Range(format!(
            "ladder has {} labels, {steps} requested",
            extra.len()
        )));
    }
    let mut explicit: Vec<String> = BASELINE_LABELS.iter().map(|s| s.to_string()).collect();
    explicit.extend(extra[..steps].iter().map(|s| s.to_string()));
    let name = roleset_name(&explicit, ladder, steps);
    RoleSet::new(name, explicit)
}

/// Every inventory along a ladder, from the baseline to the full expansion.
pub fn ladder_rolesets(ladder: Ladder) -> Vec<RoleSet> {
    (0..=ladder.labels().len())
        .map(|steps| expand_roleset(ladder, steps).expect("ladder step is valid"))
        .collect()
}

/// Default vocabulary size cap.
pub const DEFAULT_VOCAB_LIMIT: usize = 50_000;

/// Frequency-pruned lemma vocabulary. Indices `0..len` are the kept lemmas;
/// `len` is the out-of-vocabulary index shared by everything else.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Vocabulary {
    lemmas: Vec<String>,
    index: BTreeMap<String, usize>,
}

impl Vocabulary {
    /// Build from predicate and argument-head lemma counts, keeping the
    /// `limit` most frequent (ties broken by lemma, so builds are
    /// reproducible).
    pub fn build(frames: &[Frame], limit: usize) -> Self {
        let mut counts: BTreeMap<&str, u64> = BTreeMap::new();
        for frame in frames {
            *counts.entry(&frame.predicate_lemma).or_insert(0) += 1;
            for arg in &frame.args {
                *counts.entry(&arg.head_lemma).or_insert(0) += 1;
            }
        }
        let mut ranked: Vec<(&str, u64)> = counts.into_iter().collect();
        ranked.sort_by(|a, b| b.1.cmp(&a.1).then_with(|| a.0.cmp(b.0)));
        ranked.truncate(limit);
        let lemmas: Vec<String> = ranked.into_iter().map(|(l, _)| l.to_string()).collect();
        Vocabulary::from_lemmas(lemmas)
    }

    /// Rebuild from an already-ordered lemma list (checkpoint loading).
    pub fn from_lemmas(lemmas: Vec<String>) -> Self {
        let index = lemmas
            .iter()
            .enumerate()
            .map(|(i, l)| (l.clone(), i))
            .collect();
        Vocabulary { lemmas, index }
    }

    /// Kept lemma count, excluding the OOV slot.
    pub fn len(&self) -> usize {
        self.lemmas.len()
    }

    pub fn is_empty(&self) -> bool {
        self.lemmas.is_empty()
    }

    pub fn oov_index(&self) -> usize {
        self.lemmas.len()
    }

    /// Total index count including the OOV slot.
    pub fn total(&self) -> usize {
        self.lemmas.len() + 1
    }

    /// Map a lemma to its index; out-of-vocabulary lemmas share one index.
    pub fn map_word(&self, lemma: &str) -> usize {
        self.index
            .get(lemma)
            .copied()
            .unwrap_or_else(|| self.oov_index())
    }

    pub fn contains(&self, lemma: &str) -> bool {
        self.index.contains_key(lemma)
    }

    pub fn lemma(&self, index: usize) -> Option<&str> {
        self.lemmas.get(index).map(|s| s.as_str())
    }

    pub fn lemmas(&self) -> &[String] {
        &self.lemmas
    }

    /// Order-sensitive content hash, for checking that a checkpoint and a
    /// corpus agree on word indices.
    pub fn content_hash(&self) -> u64 {
        let mut hasher = Sha256::new();
        for lemma in &self.lemmas {
            hasher.update(lemma.as_bytes());
            hasher.update([0u8]);
        }
        let digest = hasher.finalize();
        u64::from_le_bytes(digest[..8].try_into().expect("digest is long enough"))
    }
}
