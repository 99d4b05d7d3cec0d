//! Multi-task event-representation models over semantic-frame corpora.
//!
//! The crate covers the full experiment loop at desk scale:
//!
//! - [`corpus`]: parse, validate, align, split, and summarize frame corpora
//!   stored as line-delimited JSON records.
//! - [`roleset`]: thematic role label spaces (with reserved MISSING/UNKNOWN
//!   labels), granularity expansion ladders, and the pruned lemma vocabulary.
//! - [`model`]: a shared residual encoder over (role, word) pairs with a
//!   role-prediction head and a word-prediction head, plus exact analytic
//!   gradients checked against finite differences.
//! - [`training`]: frame-to-sample conversion, mini-batch SGD with early
//!   stopping, and self-contained checkpoints.
//! - [`eval`]: held-out accuracy, thematic-fit scoring, tie-aware Spearman
//!   correlation against human norms, and cross-run variance aggregation.
//! - [`harness`]: synthetic corpus generation with an exact Bayes oracle,
//!   annotation-noise injection, and reproducible sweep orchestration.

pub mod corpus;
pub mod eval;
pub mod harness;
pub mod model;
pub mod roleset;
pub mod training;

pub use corpus::{Frame, FrameArg, Source};
pub use eval::{spearman, thematic_fit_score, NormItem};
pub use harness::{NoiseSpec, SweepGrid, SweepReport, SynthSpec};
pub use model::{ModelDims, ModelParams};
pub use roleset::{Ladder, RoleSet, Vocabulary};
pub use training::{Checkpoint, Sample, TrainConfig};
