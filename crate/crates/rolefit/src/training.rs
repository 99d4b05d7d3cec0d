//! Frame-to-sample conversion, mini-batch SGD with early stopping, and
//! checkpoint files.
//!
//! Training is strictly sequential: for a fixed seed the trajectory is
//! bitwise reproducible, independent of any worker pool configured by the
//! caller.

use std::collections::BTreeSet;
use std::io::{BufWriter, Read, Write};
use std::path::Path;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::corpus::Frame;
use crate::model::{
    argmax, backward, cross_entropy, forward, sgd_step, ModelDims, ModelInput, ModelParams,
};
use crate::roleset::{RoleSet, RoleSetConfig, Vocabulary};

#[derive(Debug, Error)]
pub enum TrainError {
    #[error("config error: {0}")]
    Config(String),
    #[error("format error: {0}")]
    Format(String),
    #[error("io error: {0}")]
    Io(#[from] std::io::Error),
}

/// One multi-task training sample: the target (role, word) pair is held
/// out of the context; the context always keeps the (PRD, predicate) pair.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Sample {
    pub context: Vec<(usize, usize)>,
    pub target_role: usize,
    pub target_word: usize,
}

/// Convert one frame into samples: arguments are mapped through the role
/// inventory and vocabulary, deduplicated by mapped role (first occurrence
/// wins, so context roles stay pairwise distinct), and each retained
/// argument becomes the target of one sample with the remaining pairs plus
/// (PRD, predicate) as context.
pub fn make_samples(frame: &Frame, rs: &RoleSet, vocab: &Vocabulary) -> Vec<Sample> {
    let prd = (rs.prd_index(), vocab.map_word(&frame.predicate_lemma));
    let mut seen: BTreeSet<usize> = BTreeSet::new();
    seen.insert(prd.0);
    let mut retained: Vec<(usize, usize)> = Vec::with_capacity(frame.args.len());
    for arg in &frame.args {
        let role = rs.map_role(&arg.role);
        if seen.insert(role) {
            retained.push((role, vocab.map_word(&arg.head_lemma)));
        }
    }
    retained
        .iter()
        .enumerate()
        .map(|(i, &(target_role, target_word))| {
            let mut context = Vec::with_capacity(retained.len());
            context.push(prd);
            context.extend(
                retained
                    .iter()
                    .enumerate()
                    .filter(|&(j, _)| j != i)
                    .map(|(_, &p)| p),
            );
            Sample {
                context,
                target_role,
                target_word,
            }
        })
        .collect()
}

fn default_batch_size() -> usize {
    1024
}
fn default_lr() -> f64 {
    0.1
}
fn default_max_epochs() -> usize {
    30
}
fn default_patience() -> usize {
    2
}
fn default_shuffle() -> bool {
    true
}

/// SGD configuration: constant learning rate, no decay, no momentum.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrainConfig {
    #[serde(default = "default_batch_size")]
    pub batch_size: usize,
    #[serde(default = "default_lr")]
    pub lr: f64,
    #[serde(default = "default_max_epochs")]
    pub max_epochs: usize,
    #[serde(default = "default_patience")]
    pub patience: usize,
    #[serde(default)]
    pub seed: u64,
    #[serde(default = "default_shuffle")]
    pub shuffle: bool,
}

impl Default for TrainConfig {
    fn default() -> Self {
        TrainConfig {
            batch_size: default_batch_size(),
            lr: default_lr(),
            max_epochs: default_max_epochs(),
            patience: default_patience(),
            seed: 0,
            shuffle: default_shuffle(),
        }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<(), TrainError> {
        if self.batch_size < 1 {
            return Err(TrainError::Config("batch_size must be at least 1".into()));
        }
        if self.patience < 1 {
            return Err(TrainError::Config("patience must be at least 1".into()));
        }
        if self.max_epochs < 1 {
            return Err(TrainError::Config("max_epochs must be at least 1".into()));
        }
        if !(self.lr >= 0.0 && self.lr.is_finite()) {
            return Err(TrainError::Config("lr must be finite and non-negative".into()));
        }
        Ok(())
    }
}

/// Early-stop verdict for one observed dev loss.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Verdict {
    pub improved: bool,
    pub stop: bool,
}

/// Stops when dev loss has failed to improve (strictly) for `patience`
/// consecutive epochs. Epochs are 1-based.
#[derive(Debug, Clone)]
pub struct EarlyStopper {
    patience: usize,
    epoch: usize,
    best_loss: f64,
    best_epoch: usize,
    streak: usize,
}

impl EarlyStopper {
    pub fn new(patience: usize) -> Self {
        assert!(patience >= 1, "patience must be at least 1");
        EarlyStopper {
            patience,
            epoch: 0,
            best_loss: f64::INFINITY,
            best_epoch: 0,
            streak: 0,
        }
    }

    pub fn observe(&mut self, dev_loss: f64) -> Verdict {
        self.epoch += 1;
        let improved = dev_loss < self.best_loss;
        if improved {
            self.best_loss = dev_loss;
            self.best_epoch = self.epoch;
            self.streak = 0;
        } else {
            self.streak += 1;
        }
        Verdict {
            improved,
            stop: self.streak >= self.patience,
        }
    }

    pub fn best_epoch(&self) -> usize {
        self.best_epoch
    }

    pub fn best_loss(&self) -> f64 {
        self.best_loss
    }
}

/// One epoch's summary metrics.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EpochRecord {
    pub epoch: usize,
    pub train_loss: f64,
    pub dev_loss: f64,
    pub dev_role_acc: f64,
    pub dev_word_acc: f64,
}

/// Per-epoch metrics plus where training stopped and which epoch had the
/// best dev loss. Epochs are 1-based.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrainHistory {
    pub epochs: Vec<EpochRecord>,
    pub best_epoch: usize,
    pub stopped_epoch: usize,
}

/// History as CSV, one row per epoch.
pub fn history_csv(history: &TrainHistory) -> String {
    let mut out = String::from("epoch,train_loss,dev_loss,dev_role_acc,dev_word_acc\n");
    for r in &history.epochs {
        out.push_str(&format!(
            "{},{:.6},{:.6},{:.6},{:.6}\n",
            r.epoch, r.train_loss, r.dev_loss, r.dev_role_acc, r.dev_word_acc
        ));
    }
    out
}

/// Training result: the last-epoch parameters, the best-dev-loss
/// parameters, and the history.
#[derive(Debug, Clone)]
pub struct TrainOutcome {
    pub final_params: ModelParams,
    pub best_params: ModelParams,
    pub history: TrainHistory,
}

struct Prepared {
    role_input: ModelInput,
    word_input: ModelInput,
    target_role: usize,
    target_word: usize,
}

fn prepare(frames: &[Frame], rs: &RoleSet, vocab: &Vocabulary) -> Vec<Prepared> {
    frames
        .iter()
        .flat_map(|f| make_samples(f, rs, vocab))
        .map(|s| Prepared {
            role_input: ModelInput::role_task(s.context.clone(), s.target_word),
            word_input: ModelInput::word_task(s.context, s.target_role),
            target_role: s.target_role,
            target_word: s.target_word,
        })
        .collect()
}

fn dataset_metrics(params: &ModelParams, set: &[Prepared]) -> (f64, f64, f64) {
    let mut loss_sum = 0.0;
    let mut role_hits = 0usize;
    let mut word_hits = 0usize;
    for s in set {
        let rt = forward(params, &s.role_input).expect("prepared sample indices are in range");
        loss_sum += cross_entropy(&rt.role_logits, s.target_role);
        if argmax(&rt.role_logits) == s.target_role {
            role_hits += 1;
        }
        let wt = forward(params, &s.word_input).expect("prepared sample indices are in range");
        loss_sum += cross_entropy(&wt.word_logits, s.target_word);
        if argmax(&wt.word_logits) == s.target_word {
            word_hits += 1;
        }
    }
    let n = set.len() as f64;
    (loss_sum / n, role_hits as f64 / n, word_hits as f64 / n)
}

/// Mini-batch SGD over seeded-shuffled samples. Both heads train on every
/// sample: the role cross-entropy is charged on the role-task trace and the
/// word cross-entropy on the word-task trace; batch gradients are the mean
/// over samples. The final short batch is kept. Early stopping watches dev
/// loss; an empty dev set disables it and makes `best` track `final`.
pub fn train(
    frames_train: &[Frame],
    frames_dev: &[Frame],
    rs: &RoleSet,
    vocab: &Vocabulary,
    params: ModelParams,
    config: &TrainConfig,
) -> Result<TrainOutcome, TrainError> {
    train_with_hook(frames_train, frames_dev, rs, vocab, params, config, |_, _| {})
}

/// `train` with a per-epoch callback receiving the epoch number and the
/// parameters as of that epoch's end, for callers that track epoch-wise
/// evaluation maxima.
pub fn train_with_hook(
    frames_train: &[Frame],
    frames_dev: &[Frame],
    rs: &RoleSet,
    vocab: &Vocabulary,
    params: ModelParams,
    config: &TrainConfig,
    mut epoch_hook: impl FnMut(usize, &ModelParams),
) -> Result<TrainOutcome, TrainError> {
    config.validate()?;
    let train_set = prepare(frames_train, rs, vocab);
    if train_set.is_empty() {
        return Err(TrainError::Config(
            "training data produced zero samples".into(),
        ));
    }
    let dev_set = prepare(frames_dev, rs, vocab);

    let mut params = params;
    let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
    let mut stopper = EarlyStopper::new(config.patience);
    let mut best_params = params.clone();
    let mut epochs = Vec::new();
    let mut order: Vec<usize> = (0..train_set.len()).collect();
    let mut stopped_epoch = 0;

    for epoch in 1..=config.max_epochs {
        stopped_epoch = epoch;
        if config.shuffle {
            order.shuffle(&mut rng);
        }
        let mut train_loss_sum = 0.0;
        for batch in order.chunks(config.batch_size) {
            let mut grads = params.zeros_like();
            let scale = 1.0 / batch.len() as f64;
            for &idx in batch {
                let s = &train_set[idx];
                let rt =
                    forward(&params, &s.role_input).expect("prepared sample indices are in range");
                train_loss_sum += cross_entropy(&rt.role_logits, s.target_role);
                backward(&params, &rt, Some(s.target_role), None, scale, &mut grads);
                let wt =
                    forward(&params, &s.word_input).expect("prepared sample indices are in range");
                train_loss_sum += cross_entropy(&wt.word_logits, s.target_word);
                backward(&params, &wt, None, Some(s.target_word), scale, &mut grads);
            }
            sgd_step(&mut params, &grads, config.lr);
        }
        let train_loss = train_loss_sum / train_set.len() as f64;

        if dev_set.is_empty() {
            epochs.push(EpochRecord {
                epoch,
                train_loss,
                dev_loss: 0.0,
                dev_role_acc: 0.0,
                dev_word_acc: 0.0,
            });
            epoch_hook(epoch, &params);
            continue;
        }

        let (dev_loss, dev_role_acc, dev_word_acc) = dataset_metrics(&params, &dev_set);
        epochs.push(EpochRecord {
            epoch,
            train_loss,
            dev_loss,
            dev_role_acc,
            dev_word_acc,
        });
        epoch_hook(epoch, &params);

        let verdict = stopper.observe(dev_loss);
        if verdict.improved {
            best_params = params.clone();
        }
        if verdict.stop {
            break;
        }
    }

    let best_epoch = if dev_set.is_empty() {
        best_params = params.clone();
        stopped_epoch
    } else {
        stopper.best_epoch()
    };
    Ok(TrainOutcome {
        final_params: params,
        best_params,
        history: TrainHistory {
            epochs,
            best_epoch,
            stopped_epoch,
        },
    })
}

pub const CHECKPOINT_MAGIC: [u8; 4] = *b"RFCK";
pub const CHECKPOINT_VERSION: u32 = 1;

/// Checkpoint metadata: everything needed to evaluate the parameters
/// without the original corpus.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CheckpointMeta {
    pub roleset: RoleSetConfig,
    pub vocab_lemmas: Vec<String>,
    pub vocab_hash: u64,
    pub dims: ModelDims,
    pub config: TrainConfig,
    pub epoch: usize,
}

/// A self-contained model snapshot: parameters plus the inventory and
/// vocabulary they were trained against.
#[derive(Debug, Clone)]
pub struct Checkpoint {
    pub params: ModelParams,
    pub meta: CheckpointMeta,
}

impl Checkpoint {
    pub fn new(
        params: ModelParams,
        rs: &RoleSet,
        vocab: &Vocabulary,
        config: &TrainConfig,
        epoch: usize,
    ) -> Self {
        let meta = CheckpointMeta {
            roleset: rs.to_config(),
            vocab_lemmas: vocab.lemmas().to_vec(),
            vocab_hash: vocab.content_hash(),
            dims: params.dims,
            config: config.clone(),
            epoch,
        };
        Checkpoint { params, meta }
    }

    pub fn roleset(&self) -> Result<RoleSet, TrainError> {
        RoleSet::from_config(self.meta.roleset.clone())
            .map_err(|e| TrainError::Format(e.to_string()))
    }

    pub fn vocabulary(&self) -> Vocabulary {
        Vocabulary::from_lemmas(self.meta.vocab_lemmas.clone())
    }
}

/// Binary layout: magic, u32 version, u64 metadata length, metadata JSON,
/// then every tensor's f64 values little-endian in canonical tensor order.
pub fn save_checkpoint(path: &Path, ckpt: &Checkpoint) -> Result<(), TrainError> {
    let meta_bytes =
        serde_json::to_vec(&ckpt.meta).map_err(|e| TrainError::Format(e.to_string()))?;
    let mut w = BufWriter::new(std::fs::File::create(path)?);
    w.write_all(&CHECKPOINT_MAGIC)?;
    w.write_all(&CHECKPOINT_VERSION.to_le_bytes())?;
    w.write_all(&(meta_bytes.len() as u64).to_le_bytes())?;
    w.write_all(&meta_bytes)?;
    for (_, t) in ckpt.params.tensors() {
        for &v in &t.data {
            w.write_all(&v.to_le_bytes())?;
        }
    }
    w.flush()?;
    Ok(())
}

/// Load and validate a checkpoint: magic, version, metadata consistency,
/// vocabulary hash, and exact parameter byte count all checked.
pub fn load_checkpoint(path: &Path) -> Result<Checkpoint, TrainError> {
    let mut bytes = Vec::new();
    std::fs::File::open(path)?.read_to_end(&mut bytes)?;
    if bytes.len() < 16 {
        return Err(TrainError::Format("truncated header".into()));
    }
    if bytes[0..4] != CHECKPOINT_MAGIC {
        return Err(TrainError::Format("bad magic".into()));
    }
    let version = u32::from_le_bytes(bytes[4..8].try_into().expect("slice is 4 bytes"));
    if version != CHECKPOINT_VERSION {
        return Err(TrainError::Format(format!(
            "unsupported version {version}, expected {CHECKPOINT_VERSION}"
        )));
    }
    let meta_len = u64::from_le_bytes(bytes[8..16].try_into().expect("slice is 8 bytes")) as usize;
    let body = 16usize
        .checked_add(meta_len)
        .ok_or_else(|| TrainError::Format("metadata length overflows".into()))?;
    if bytes.len() < body {
        return Err(TrainError::Format("truncated metadata".into()));
    }
    let meta: CheckpointMeta = serde_json::from_slice(&bytes[16..body])
        .map_err(|e| TrainError::Format(format!("bad metadata: {e}")))?;

    let rs = RoleSet::from_config(meta.roleset.clone())
        .map_err(|e| TrainError::Format(format!("bad roleset: {e}")))?;
    if rs.len() != meta.dims.role_labels {
        return Err(TrainError::Format(format!(
            "roleset has {} labels but dims declare {}",
            rs.len(),
            meta.dims.role_labels
        )));
    }
    if meta.vocab_lemmas.len() != meta.dims.vocab_words {
        return Err(TrainError::Format(format!(
            "vocabulary has {} lemmas but dims declare {}",
            meta.vocab_lemmas.len(),
            meta.dims.vocab_words
        )));
    }
    let vocab = Vocabulary::from_lemmas(meta.vocab_lemmas.clone());
    if vocab.content_hash() != meta.vocab_hash {
        return Err(TrainError::Format("vocabulary hash mismatch".into()));
    }

    let mut params = ModelParams::zeros(meta.dims);
    let expected = params.num_params() * 8;
    let tail = &bytes[body..];
    if tail.len() < expected {
        return Err(TrainError::Format("truncated parameters".into()));
    }
    if tail.len() > expected {
        return Err(TrainError::Format("trailing bytes after parameters".into()));
    }
    let mut offset = 0;
    for (_, t) in params.tensors_mut() {
        for v in &mut t.data {
            *v = f64::from_le_bytes(
                tail[offset..offset + 8]
                    .try_into()
                    .expect("slice is 8 bytes"),
            );
            offset += 8;
        }
    }
    Ok(Checkpoint { params, meta })
}

/// Initialize parameters sized for a roleset and vocabulary.
pub fn init_for(rs: &RoleSet, vocab: &Vocabulary, dim: usize, blocks: usize, seed: u64) -> ModelParams {
    let dims = ModelDims::new(vocab.len(), rs.len())
        .with_dim(dim)
        .with_blocks(blocks);
    crate::model::init_params(dims, seed)
}


#[cfg(test)]
mod shuffle_tests {
    use rand::seq::SliceRandom;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn shuffle_is_a_permutation() {
        let mut rng = ChaCha8Rng::seed_from_u64(12);
        let mut order: Vec<usize> = (0..100).collect();
        order.shuffle(&mut rng);
        let mut sorted = order.clone();
        sorted.sort_unstable();
        assert_eq!(sorted, (0..100).collect::<Vec<_>>());
        assert_ne!(order, (0..100).collect::<Vec<_>>());
    }
}
