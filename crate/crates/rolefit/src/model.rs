//! The multi-task residual network: a shared encoder over (role, word)
//! pairs feeding a role-prediction head and a word-prediction head, with
//! exact analytic gradients.
//!
//! The encoder is the mean over all input pairs of the elementwise product
//! `word_emb[w] ⊙ role_emb[r]`, passed through residual blocks
//! `h ← h + W2·relu(W1·h + b1) + b2`. A query with an absent role uses a
//! dedicated learned QUERY role row; a query with an absent word uses the
//! out-of-vocabulary word row. Both heads share the encoder and all of its
//! parameters.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Error)]
pub enum ModelError {
    #[error("index error: {0}")]
    Index(String),
}

/// Dense row-major matrix. Bias vectors are 1-row matrices so every
/// parameter tensor walks through one code path.
#[derive(Debug, Clone, PartialEq)]
pub struct Mat {
    pub rows: usize,
    pub cols: usize,
    pub data: Vec<f64>,
}

impl Mat {
    pub fn zeros(rows: usize, cols: usize) -> Self {
        Mat {
            rows,
            cols,
            data: vec![0.0; rows * cols],
        }
    }

    pub fn from_fn(rows: usize, cols: usize, mut f: impl FnMut(usize, usize) -> f64) -> Self {
        let mut data = Vec::with_capacity(rows * cols);
        for i in 0..rows {
            for j in 0..cols {
                data.push(f(i, j));
            }
        }
        Mat { rows, cols, data }
    }

    #[inline]
    pub fn at(&self, i: usize, j: usize) -> f64 {
        self.data[i * self.cols + j]
    }

    #[inline]
    pub fn at_mut(&mut self, i: usize, j: usize) -> &mut f64 {
        &mut self.data[i * self.cols + j]
    }

    #[inline]
    pub fn row(&self, i: usize) -> &[f64] {
        &self.data[i * self.cols..(i + 1) * self.cols]
    }

    #[inline]
    pub fn row_mut(&mut self, i: usize) -> &mut [f64] {
        &mut self.data[i * self.cols..(i + 1) * self.cols]
    }
}

pub const DEFAULT_DIM: usize = 256;
pub const DEFAULT_BLOCKS: usize = 2;

/// Model shape. `vocab_words` counts kept lemmas (the OOV row is extra);
/// `role_labels` counts all role indices including the reserved labels
/// (the QUERY row is extra).
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct ModelDims {
    pub vocab_words: usize,
    pub role_labels: usize,
    pub dim: usize,
    pub blocks: usize,
}

impl ModelDims {
    pub fn new(vocab_words: usize, role_labels: usize) -> Self {
        ModelDims {
            vocab_words,
            role_labels,
            dim: DEFAULT_DIM,
            blocks: DEFAULT_BLOCKS,
        }
    }

    pub fn with_dim(mut self, dim: usize) -> Self {
        self.dim = dim;
        self
    }

    pub fn with_blocks(mut self, blocks: usize) -> Self {
        self.blocks = blocks;
        self
    }

    /// Word embedding rows: kept lemmas plus the OOV row.
    pub fn word_rows(&self) -> usize {
        self.vocab_words + 1
    }

    /// Role embedding rows: role labels plus the QUERY row.
    pub fn role_rows(&self) -> usize {
        self.role_labels + 1
    }

    /// Placeholder word index for word-task queries (the OOV row).
    pub fn oov_word(&self) -> usize {
        self.vocab_words
    }

    /// Placeholder role index for role-task queries.
    pub fn query_role(&self) -> usize {
        self.role_labels
    }
}

/// One affine head: `logits[k] = b[k] + Σ_j h[j]·w[j][k]`.
#[derive(Debug, Clone, PartialEq)]
pub struct Affine {
    pub w: Mat,
    pub b: Mat,
}

/// One residual block: `out = h + W2·relu(W1·h + b1) + b2`.
#[derive(Debug, Clone, PartialEq)]
pub struct ResidualBlock {
    pub w1: Mat,
    pub b1: Mat,
    pub w2: Mat,
    pub b2: Mat,
}

/// All trainable parameters. The same struct doubles as the gradient
/// accumulator, mirroring shapes exactly.
#[derive(Debug, Clone, PartialEq)]
pub struct ModelParams {
    pub dims: ModelDims,
    pub word_emb: Mat,
    pub role_emb: Mat,
    pub blocks: Vec<ResidualBlock>,
    pub role_head: Affine,
    pub word_head: Affine,
}

/// Draw embeddings and weights uniform in ±1/√d from a seeded generator;
/// biases start at zero. Bitwise deterministic for a fixed seed.
pub fn init_params(dims: ModelDims, seed: u64) -> ModelParams {
    assert!(dims.dim >= 1, "dim must be at least 1");
    assert!(dims.blocks >= 1, "block count must be at least 1");
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let bound = 1.0 / (dims.dim as f64).sqrt();
    let mut uniform =
        |rows: usize, cols: usize| Mat::from_fn(rows, cols, |_, _| rng.gen_range(-bound..bound));
    let d = dims.dim;
    let word_emb = uniform(dims.word_rows(), d);
    let role_emb = uniform(dims.role_rows(), d);
    let blocks = (0..dims.blocks)
        .map(|_| ResidualBlock {
            w1: uniform(d, d),
            b1: Mat::zeros(1, d),
            w2: uniform(d, d),
            b2: Mat::zeros(1, d),
        })
        .collect();
    let role_head = Affine {
        w: uniform(d, dims.role_labels),
        b: Mat::zeros(1, dims.role_labels),
    };
    let word_head = Affine {
        w: uniform(d, dims.word_rows()),
        b: Mat::zeros(1, dims.word_rows()),
    };
    ModelParams {
        dims,
        word_emb,
        role_emb,
        blocks,
        role_head,
        word_head,
    }
}

impl ModelParams {
    /// All-zero parameters of the given shape (gradient accumulators).
    pub fn zeros(dims: ModelDims) -> Self {
        let d = dims.dim;
        ModelParams {
            dims,
            word_emb: Mat::zeros(dims.word_rows(), d),
            role_emb: Mat::zeros(dims.role_rows(), d),
            blocks: (0..dims.blocks)
                .map(|_| ResidualBlock {
                    w1: Mat::zeros(d, d),
                    b1: Mat::zeros(1, d),
                    w2: Mat::zeros(d, d),
                    b2: Mat::zeros(1, d),
                })
                .collect(),
            role_head: Affine {
                w: Mat::zeros(d, dims.role_labels),
                b: Mat::zeros(1, dims.role_labels),
            },
            word_head: Affine {
                w: Mat::zeros(d, dims.word_rows()),
                b: Mat::zeros(1, dims.word_rows()),
            },
        }
    }

    pub fn zeros_like(&self) -> Self {
        ModelParams::zeros(self.dims)
    }

    /// Every tensor with a stable name, in canonical order. The order
    /// defines the checkpoint layout and the update loop pairing.
    pub fn tensors(&self) -> Vec<(String, &Mat)> {
        let mut v: Vec<(String, &Mat)> = vec![
            ("word_emb".into(), &self.word_emb),
            ("role_emb".into(), &self.role_emb),
        ];
        for (i, b) in self.blocks.iter().enumerate() {
            v.push((format!("block{i}.w1"), &b.w1));
            v.push((format!("block{i}.b1"), &b.b1));
            v.push((format!("block{i}.w2"), &b.w2));
            v.push((format!("block{i}.b2"), &b.b2));
        }
        v.push(("role_head.w".into(), &self.role_head.w));
        v.push(("role_head.b".into(), &self.role_head.b));
        v.push(("word_head.w".into(), &self.word_head.w));
        v.push(("word_head.b".into(), &self.word_head.b));
        v
    }

    pub fn tensors_mut(&mut self) -> Vec<(String, &mut Mat)> {
        let mut v: Vec<(String, &mut Mat)> = vec![
            ("word_emb".into(), &mut self.word_emb),
            ("role_emb".into(), &mut self.role_emb),
        ];
        for (i, b) in self.blocks.iter_mut().enumerate() {
            v.push((format!("block{i}.w1"), &mut b.w1));
            v.push((format!("block{i}.b1"), &mut b.b1));
            v.push((format!("block{i}.w2"), &mut b.w2));
            v.push((format!("block{i}.b2"), &mut b.b2));
        }
        v.push(("role_head.w".into(), &mut self.role_head.w));
        v.push(("role_head.b".into(), &mut self.role_head.b));
        v.push(("word_head.w".into(), &mut self.word_head.w));
        v.push(("word_head.b".into(), &mut self.word_head.b));
        v
    }

    pub fn num_params(&self) -> usize {
        self.tensors().iter().map(|(_, m)| m.data.len()).sum()
    }
}

/// The field a query leaves open. A role-task query supplies the word and
/// asks for its role; a word-task query supplies the role and asks for the
/// filler word.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Query {
    RoleFor { word: usize },
    WordFor { role: usize },
}

/// One encoder input: context pairs plus a query. Context is sorted at
/// construction so that logically equal inputs produce bitwise identical
/// activations regardless of the order pairs were assembled in.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ModelInput {
    context: Vec<(usize, usize)>,
    query: Query,
}

impl ModelInput {
    pub fn role_task(mut context: Vec<(usize, usize)>, word: usize) -> Self {
        context.sort_unstable();
        ModelInput {
            context,
            query: Query::RoleFor { word },
        }
    }

    pub fn word_task(mut context: Vec<(usize, usize)>, role: usize) -> Self {
        context.sort_unstable();
        ModelInput {
            context,
            query: Query::WordFor { role },
        }
    }

    pub fn context(&self) -> &[(usize, usize)] {
        &self.context
    }

    pub fn query(&self) -> Query {
        self.query
    }
}

/// Per-block activations cached for the backward pass.
#[derive(Debug, Clone)]
pub struct BlockTrace {
    /// Block input h.
    pub input: Vec<f64>,
    /// Pre-activation W1·h + b1.
    pub z1: Vec<f64>,
    /// relu(z1).
    pub a: Vec<f64>,
}

/// Everything forward computed, kept for backward.
#[derive(Debug, Clone)]
pub struct ForwardTrace {
    /// All encoded pairs: sorted context plus the query pair last.
    pub pairs: Vec<(usize, usize)>,
    pub h0: Vec<f64>,
    pub blocks: Vec<BlockTrace>,
    /// Final encoder output.
    pub h: Vec<f64>,
    pub role_logits: Vec<f64>,
    pub word_logits: Vec<f64>,
}

fn head_logits(head: &Affine, h: &[f64]) -> Vec<f64> {
    let mut logits = head.b.data.clone();
    for (j, &hj) in h.iter().enumerate() {
        if hj == 0.0 {
            continue;
        }
        for (lk, &wjk) in logits.iter_mut().zip(head.w.row(j)) {
            *lk += hj * wjk;
        }
    }
    logits
}

/// Run the encoder and both heads, caching activations.
pub fn forward(params: &ModelParams, input: &ModelInput) -> Result<ForwardTrace, ModelError> {
    let dims = params.dims;
    let query_pair = match input.query {
        Query::RoleFor { word } => (dims.query_role(), word),
        Query::WordFor { role } => (role, dims.oov_word()),
    };
    let mut pairs = input.context.to_vec();
    pairs.push(query_pair);
    for &(r, w) in &pairs {
        if r >= dims.role_rows() {
            return Err(ModelError::Index(format!(
                "role index {r} out of range for {} rows",
                dims.role_rows()
            )));
        }
        if w >= dims.word_rows() {
            return Err(ModelError::Index(format!(
                "word index {w} out of range for {} rows",
                dims.word_rows()
            )));
        }
    }

    let d = dims.dim;
    let mut h0 = vec![0.0; d];
    for &(r, w) in &pairs {
        let re = params.role_emb.row(r);
        let we = params.word_emb.row(w);
        for j in 0..d {
            h0[j] += re[j] * we[j];
        }
    }
    let inv_m = 1.0 / pairs.len() as f64;
    for v in &mut h0 {
        *v *= inv_m;
    }

    let mut h = h0.clone();
    let mut blocks = Vec::with_capacity(params.blocks.len());
    for blk in &params.blocks {
        let mut z1 = blk.b1.data.clone();
        for (i, z) in z1.iter_mut().enumerate() {
            let row = blk.w1.row(i);
            for (j, &hj) in h.iter().enumerate() {
                *z += row[j] * hj;
            }
        }
        let a: Vec<f64> = z1.iter().map(|&z| if z > 0.0 { z } else { 0.0 }).collect();
        let mut out = h.clone();
        for (i, o) in out.iter_mut().enumerate() {
            let row = blk.w2.row(i);
            let mut acc = blk.b2.data[i];
            for (j, &aj) in a.iter().enumerate() {
                acc += row[j] * aj;
            }
            *o += acc;
        }
        blocks.push(BlockTrace { input: h, z1, a });
        h = out;
    }

    let role_logits = head_logits(&params.role_head, &h);
    let word_logits = head_logits(&params.word_head, &h);
    Ok(ForwardTrace {
        pairs,
        h0,
        blocks,
        h,
        role_logits,
        word_logits,
    })
}

/// Index of the largest value, lowest index on ties.
pub fn argmax(xs: &[f64]) -> usize {
    let mut best = 0;
    let mut best_v = f64::NEG_INFINITY;
    for (i, &v) in xs.iter().enumerate() {
        if v > best_v {
            best = i;
            best_v = v;
        }
    }
    best
}

pub fn log_sum_exp(xs: &[f64]) -> f64 {
    let m = xs.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    if m.is_infinite() {
        return m;
    }
    m + xs.iter().map(|&x| (x - m).exp()).sum::<f64>().ln()
}

pub fn softmax(xs: &[f64]) -> Vec<f64> {
    let m = xs.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let exps: Vec<f64> = xs.iter().map(|&x| (x - m).exp()).collect();
    let z: f64 = exps.iter().sum();
    exps.into_iter().map(|e| e / z).collect()
}

/// Stabilized cross-entropy: `log_sum_exp(logits) − logits[target]`.
pub fn cross_entropy(logits: &[f64], target: usize) -> f64 {
    log_sum_exp(logits) - logits[target]
}

/// Total loss of a trace: the cross-entropies of whichever targets are
/// supplied, summed. A training sample charges its role target to the
/// role-task trace and its word target to the word-task trace.
pub fn loss(trace: &ForwardTrace, target_role: Option<usize>, target_word: Option<usize>) -> f64 {
    let mut total = 0.0;
    if let Some(t) = target_role {
        total += cross_entropy(&trace.role_logits, t);
    }
    if let Some(t) = target_word {
        total += cross_entropy(&trace.word_logits, t);
    }
    total
}

fn head_backward(head: &Affine, ghead: &mut Affine, h: &[f64], g: &[f64], gh: &mut [f64]) {
    for (bk, &gk) in ghead.b.data.iter_mut().zip(g) {
        *bk += gk;
    }
    for (j, &hj) in h.iter().enumerate() {
        let wrow = head.w.row(j);
        let gwrow = ghead.w.row_mut(j);
        let mut acc = 0.0;
        for (k, &gk) in g.iter().enumerate() {
            gwrow[k] += hj * gk;
            acc += wrow[k] * gk;
        }
        gh[j] += acc;
    }
}

/// Accumulate `scale · ∂loss/∂θ` into `grads` for the loss of `trace` with
/// the supplied targets. Gradients are exact; relu takes subgradient 0 at
/// the kink. Callers pass `scale = 1/batch` to build mean-reduced batch
/// gradients.
#[allow(clippy::needless_range_loop)]
pub fn backward(
    params: &ModelParams,
    trace: &ForwardTrace,
    target_role: Option<usize>,
    target_word: Option<usize>,
    scale: f64,
    grads: &mut ModelParams,
) {
    let d = params.dims.dim;
    let mut gh = vec![0.0; d];
    if let Some(t) = target_role {
        let mut g = softmax(&trace.role_logits);
        g[t] -= 1.0;
        for v in &mut g {
            *v *= scale;
        }
        head_backward(&params.role_head, &mut grads.role_head, &trace.h, &g, &mut gh);
    }
    if let Some(t) = target_word {
        let mut g = softmax(&trace.word_logits);
        g[t] -= 1.0;
        for v in &mut g {
            *v *= scale;
        }
        head_backward(&params.word_head, &mut grads.word_head, &trace.h, &g, &mut gh);
    }

    for i in (0..params.blocks.len()).rev() {
        let blk = &params.blocks[i];
        let tr = &trace.blocks[i];
        let gb = &mut grads.blocks[i];

        let mut ga = vec![0.0; d];
        for r in 0..d {
            let g = gh[r];
            gb.b2.data[r] += g;
            if g != 0.0 {
                let w2row = blk.w2.row(r);
                let gw2row = gb.w2.row_mut(r);
                for c in 0..d {
                    gw2row[c] += g * tr.a[c];
                    ga[c] += w2row[c] * g;
                }
            }
        }

        let mut gh_in = gh.clone();
        for r in 0..d {
            let gz = if tr.z1[r] > 0.0 { ga[r] } else { 0.0 };
            if gz != 0.0 {
                gb.b1.data[r] += gz;
                let w1row = blk.w1.row(r);
                let gw1row = gb.w1.row_mut(r);
                for c in 0..d {
                    gw1row[c] += gz * tr.input[c];
                    gh_in[c] += w1row[c] * gz;
                }
            }
        }
        gh = gh_in;
    }

    let inv_m = 1.0 / trace.pairs.len() as f64;
    for &(r, w) in &trace.pairs {
        let we = params.word_emb.row(w);
        let gre = grads.role_emb.row_mut(r);
        for j in 0..d {
            gre[j] += gh[j] * we[j] * inv_m;
        }
        let re = params.role_emb.row(r);
        let gwe = grads.word_emb.row_mut(w);
        for j in 0..d {
            gwe[j] += gh[j] * re[j] * inv_m;
        }
    }
}

/// One plain gradient step: `p ← p − lr·g`. No momentum, no decay.
pub fn sgd_step(params: &mut ModelParams, grads: &ModelParams, lr: f64) {
    let gs = grads.tensors();
    for ((pname, p), (gname, g)) in params.tensors_mut().into_iter().zip(gs) {
        debug_assert_eq!(pname, gname);
        for (pv, &gv) in p.data.iter_mut().zip(&g.data) {
            *pv -= lr * gv;
        }
    }
}

pub const GRAD_CHECK_EPSILON: f64 = 1e-4;
pub const GRAD_CHECK_TOL: f64 = 1e-4;

#[derive(Debug, Clone)]
pub struct GradCheck {
    pub max_rel_err: f64,
    /// Tensor and flat index of the worst coordinate.
    pub worst: String,
    pub coords_checked: usize,
    pub passed: bool,
}

fn loss_at(params: &ModelParams, input: &ModelInput, tr: Option<usize>, tw: Option<usize>) -> f64 {
    let trace = forward(params, input).expect("grad check input validated by first forward");
    loss(&trace, tr, tw)
}

/// Compare a gradient structure against central finite differences over
/// every coordinate. Relative error per coordinate is
/// `|analytic − numeric| / max(|analytic|, |numeric|, 1e-8)`.
pub fn finite_difference_error(
    params: &ModelParams,
    analytic: &ModelParams,
    input: &ModelInput,
    target_role: Option<usize>,
    target_word: Option<usize>,
    epsilon: f64,
) -> Result<(f64, String, usize), ModelError> {
    forward(params, input)?;
    let mut probe = params.clone();
    let n_tensors = params.tensors().len();
    let mut max_rel = 0.0;
    let mut worst = String::new();
    let mut checked = 0usize;
    for ti in 0..n_tensors {
        let len = params.tensors()[ti].1.data.len();
        for ci in 0..len {
            let orig = probe.tensors()[ti].1.data[ci];
            probe.tensors_mut()[ti].1.data[ci] = orig + epsilon;
            let lp = loss_at(&probe, input, target_role, target_word);
            probe.tensors_mut()[ti].1.data[ci] = orig - epsilon;
            let lm = loss_at(&probe, input, target_role, target_word);
            probe.tensors_mut()[ti].1.data[ci] = orig;
            let numeric = (lp - lm) / (2.0 * epsilon);
            let a = analytic.tensors()[ti].1.data[ci];
            let rel = (a - numeric).abs() / a.abs().max(numeric.abs()).max(1e-8);
            checked += 1;
            if rel > max_rel {
                max_rel = rel;
                worst = format!("{}[{}]", params.tensors()[ti].0, ci);
            }
        }
    }
    Ok((max_rel, worst, checked))
}

/// Full-coordinate gradient check of `backward` against central finite
/// differences. Only tractable on small models.
pub fn grad_check(
    params: &ModelParams,
    input: &ModelInput,
    target_role: Option<usize>,
    target_word: Option<usize>,
    epsilon: f64,
    tol: f64,
) -> Result<GradCheck, ModelError> {
    let trace = forward(params, input)?;
    let mut grads = params.zeros_like();
    backward(params, &trace, target_role, target_word, 1.0, &mut grads);
    let (max_rel_err, worst, coords_checked) =
        finite_difference_error(params, &grads, input, target_role, target_word, epsilon)?;
    Ok(GradCheck {
        max_rel_err,
        worst,
        coords_checked,
        passed: max_rel_err < tol,
    })
}
