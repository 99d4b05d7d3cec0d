//! Command-line front end: corpus utilities, training, evaluation,
//! synthetic corpus generation, and sweep orchestration.

use std::collections::BTreeSet;
use std::path::{Path, PathBuf};

use anyhow::{bail, Context, Result};
use clap::{Args, Parser, Subcommand};
use serde_json::json;

use rolefit::corpus::{
    self, corpus_stats, load_frames, role_histogram, serialize_frames, split_files, Source,
};
use rolefit::eval::{evaluate_accuracy, evaluate_norms, load_norms};
use rolefit::harness::{
    emit_report, generate_synthetic, run_sweep, split_sentences, subset_sentences, SweepGrid,
    SynthSpec,
};
use rolefit::model::{DEFAULT_BLOCKS, DEFAULT_DIM};
use rolefit::roleset::{expand_roleset, Ladder, RoleSet, Vocabulary, DEFAULT_VOCAB_LIMIT};
use rolefit::training::{
    history_csv, load_checkpoint, make_samples, save_checkpoint, train, Checkpoint, Sample,
    TrainConfig,
};

#[derive(Parser)]
#[command(name = "rolefit", version, about = "Train and evaluate multi-task event representations over semantic-frame corpora")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Inspect and transform frame corpora.
    Corpus {
        #[command(subcommand)]
        command: CorpusCommand,
    },
    /// Inspect role inventories.
    Roleset {
        #[command(subcommand)]
        command: RolesetCommand,
    },
    /// Train a model and write checkpoints.
    Train(TrainArgs),
    /// Evaluate a trained checkpoint.
    Eval {
        #[command(subcommand)]
        command: EvalCommand,
    },
    /// Generate a synthetic corpus from a generator spec.
    Synth(SynthArgs),
    /// Run a fraction × roleset × noise sweep grid.
    Sweep(SweepArgs),
}

#[derive(Subcommand)]
enum CorpusCommand {
    /// Sentence/frame counts, mismatch ratio, and the role histogram.
    Stats {
        #[arg(long)]
        input: PathBuf,
    },
    /// Deterministic dev/test file-index split.
    Split {
        /// Total number of corpus files.
        #[arg(long)]
        total: usize,
        /// Comma-separated dev file indices; defaults depend on the total.
        #[arg(long, value_delimiter = ',')]
        dev: Option<Vec<usize>>,
        /// Comma-separated test file indices; defaults depend on the total.
        #[arg(long, value_delimiter = ',')]
        test: Option<Vec<usize>>,
    },
    /// Keep an evenly strided fraction of sentences.
    Subset {
        #[arg(long)]
        input: PathBuf,
        #[arg(long)]
        fraction: f64,
        #[arg(long)]
        out: PathBuf,
    },
    /// Drop frames from the given sources.
    Filter {
        #[arg(long)]
        input: PathBuf,
        /// Source to exclude (repeatable): BNC, UKWAC, or SYNTH.
        #[arg(long = "exclude-source", required = true)]
        exclude_source: Vec<Source>,
        #[arg(long)]
        out: PathBuf,
    },
}

#[derive(Subcommand)]
enum RolesetCommand {
    /// Print an inventory's name, labels, and reserved indices.
    Show(RolesetShowArgs),
}

#[derive(Args)]
struct RolesetShowArgs {
    /// Inventory to show: "baseline", "LADDER:STEPS" (e.g. by-frequency:3),
    /// or a path to a roleset config JSON file.
    #[arg(long, default_value = "baseline")]
    roleset: String,
    /// Shorthand for --roleset LADDER:STEPS.
    #[arg(long, conflicts_with = "roleset")]
    ladder: Option<Ladder>,
    #[arg(long, requires = "ladder")]
    steps: Option<usize>,
}

#[derive(Args)]
struct TrainArgs {
    #[arg(long)]
    corpus: PathBuf,
    /// "baseline", "LADDER:STEPS", or a roleset config JSON path.
    #[arg(long, default_value = "baseline")]
    roleset: String,
    /// Fraction of training sentences to keep (evenly strided).
    #[arg(long, default_value_t = 1.0)]
    fraction: f64,
    /// Fraction of sentences held out for early stopping.
    #[arg(long, default_value_t = 0.1)]
    dev_fraction: f64,
    #[arg(long, default_value_t = 1024)]
    batch: usize,
    #[arg(long, default_value_t = 0.1)]
    lr: f64,
    #[arg(long, default_value_t = 30)]
    epochs: usize,
    #[arg(long, default_value_t = 2)]
    patience: usize,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long, default_value_t = false)]
    no_shuffle: bool,
    #[arg(long, default_value_t = DEFAULT_DIM)]
    dim: usize,
    #[arg(long, default_value_t = DEFAULT_BLOCKS)]
    blocks: usize,
    #[arg(long, default_value_t = DEFAULT_VOCAB_LIMIT)]
    vocab_limit: usize,
    /// Where the final-epoch checkpoint goes.
    #[arg(long)]
    out: PathBuf,
    /// Where the best-dev-loss checkpoint goes (default: the output path
    /// with its extension changed to `best`).
    #[arg(long)]
    best_out: Option<PathBuf>,
    /// Optional per-epoch history CSV.
    #[arg(long)]
    history: Option<PathBuf>,
}

#[derive(Subcommand)]
enum EvalCommand {
    /// Role and word argmax accuracy of a checkpoint over a corpus.
    Accuracy {
        #[arg(long)]
        ckpt: PathBuf,
        #[arg(long)]
        corpus: PathBuf,
    },
    /// Rank correlation of thematic-fit scores against human norms.
    Norms {
        #[arg(long)]
        ckpt_final: PathBuf,
        #[arg(long)]
        ckpt_best: PathBuf,
        #[arg(long)]
        norms: PathBuf,
    },
}

#[derive(Args)]
struct SynthArgs {
    /// Generator spec JSON file.
    #[arg(long)]
    spec: PathBuf,
    #[arg(long)]
    out: PathBuf,
}

#[derive(Args)]
struct SweepArgs {
    /// Sweep grid JSON file.
    #[arg(long)]
    grid: PathBuf,
    #[arg(long)]
    corpus: PathBuf,
    /// Optional norms TSV for rank-correlation columns.
    #[arg(long)]
    norms: Option<PathBuf>,
    /// Output directory for report.csv and report.json.
    #[arg(long)]
    out: PathBuf,
    /// Worker thread count; falls back to ROLEFIT_WORKERS, then all cores.
    #[arg(long)]
    workers: Option<usize>,
}

fn resolve_roleset(arg: &str) -> Result<RoleSet> {
    if arg == "baseline" {
        return Ok(RoleSet::baseline());
    }
    if let Some((ladder, steps)) = arg.split_once(':') {
        if let Ok(ladder) = ladder.parse::<Ladder>() {
            let steps: usize = steps
                .parse()
                .with_context(|| format!("bad ladder steps in {arg:?}"))?;
            return Ok(expand_roleset(ladder, steps)?);
        }
    }
    let path = Path::new(arg);
    if path.exists() {
        let text = std::fs::read_to_string(path)
            .with_context(|| format!("reading roleset config {}", path.display()))?;
        let config = serde_json::from_str(&text)
            .with_context(|| format!("parsing roleset config {}", path.display()))?;
        return Ok(RoleSet::from_config(config)?);
    }
    bail!("roleset {arg:?} is neither \"baseline\", \"LADDER:STEPS\", nor an existing config file");
}

fn write_frames(path: &Path, frames: &[corpus::Frame]) -> Result<()> {
    std::fs::write(path, serialize_frames(frames))
        .with_context(|| format!("writing {}", path.display()))?;
    Ok(())
}

fn print_json(value: &serde_json::Value) {
    println!("{}", serde_json::to_string_pretty(value).expect("json serializes"));
}

fn cmd_corpus(cmd: CorpusCommand) -> Result<()> {
    match cmd {
        CorpusCommand::Stats { input } => {
            let frames = load_frames(&input)?;
            let stats = corpus_stats(&frames);
            let histogram: Vec<serde_json::Value> = role_histogram(&frames)
                .into_iter()
                .map(|(label, count)| json!({ "role": label, "count": count }))
                .collect();
            print_json(&json!({
                "sentences": stats.sentence_count,
                "frames": stats.frame_count,
                "mismatch_ratio": stats.mismatch_ratio,
                "roles": histogram,
            }));
        }
        CorpusCommand::Split { total, dev, test } => {
            let split = split_files(total, dev, test)?;
            print_json(&serde_json::to_value(&split)?);
        }
        CorpusCommand::Subset {
            input,
            fraction,
            out,
        } => {
            let frames = load_frames(&input)?;
            let subset = subset_sentences(&frames, fraction)?;
            write_frames(&out, &subset)?;
            print_json(&json!({
                "sentences_in": corpus::count_frames(&frames).0,
                "sentences_out": corpus::count_frames(&subset).0,
                "frames_out": subset.len(),
                "out": out,
            }));
        }
        CorpusCommand::Filter {
            input,
            exclude_source,
            out,
        } => {
            let frames = load_frames(&input)?;
            let total = frames.len();
            let excluded: BTreeSet<Source> = exclude_source.into_iter().collect();
            let kept = corpus::filter_by_source(frames, &excluded);
            write_frames(&out, &kept)?;
            print_json(&json!({
                "frames_in": total,
                "frames_out": kept.len(),
                "out": out,
            }));
        }
    }
    Ok(())
}

fn cmd_roleset_show(args: RolesetShowArgs) -> Result<()> {
    let rs = match args.ladder {
        Some(ladder) => expand_roleset(ladder, args.steps.unwrap_or(0))?,
        None => resolve_roleset(&args.roleset)?,
    };
    print_json(&json!({
        "name": rs.name(),
        "explicit": rs.explicit_labels(),
        "size": rs.len(),
        "missing_index": rs.missing_index(),
        "unknown_index": rs.unknown_index(),
    }));
    Ok(())
}

fn cmd_train(args: TrainArgs) -> Result<()> {
    let frames = load_frames(&args.corpus)?;
    let rs = resolve_roleset(&args.roleset)?;
    let (train_all, dev, _) = split_sentences(&frames, args.dev_fraction, 0.0)?;
    let train_frames = subset_sentences(&train_all, args.fraction)?;
    let vocab = Vocabulary::build(&train_frames, args.vocab_limit);
    let config = TrainConfig {
        batch_size: args.batch,
        lr: args.lr,
        max_epochs: args.epochs,
        patience: args.patience,
        seed: args.seed,
        shuffle: !args.no_shuffle,
    };
    let params = rolefit::training::init_for(&rs, &vocab, args.dim, args.blocks, args.seed);
    let outcome = train(&train_frames, &dev, &rs, &vocab, params, &config)?;

    let best_path = args
        .best_out
        .clone()
        .unwrap_or_else(|| args.out.with_extension("best"));
    let ckpt_final = Checkpoint::new(
        outcome.final_params,
        &rs,
        &vocab,
        &config,
        outcome.history.stopped_epoch,
    );
    save_checkpoint(&args.out, &ckpt_final)?;
    let ckpt_best = Checkpoint::new(
        outcome.best_params,
        &rs,
        &vocab,
        &config,
        outcome.history.best_epoch,
    );
    save_checkpoint(&best_path, &ckpt_best)?;
    if let Some(history_path) = &args.history {
        std::fs::write(history_path, history_csv(&outcome.history))
            .with_context(|| format!("writing {}", history_path.display()))?;
    }

    let last = outcome.history.epochs.last();
    print_json(&json!({
        "stopped_epoch": outcome.history.stopped_epoch,
        "best_epoch": outcome.history.best_epoch,
        "train_loss": last.map(|r| r.train_loss),
        "dev_loss": last.map(|r| r.dev_loss),
        "dev_role_acc": last.map(|r| r.dev_role_acc),
        "dev_word_acc": last.map(|r| r.dev_word_acc),
        "final_ckpt": args.out,
        "best_ckpt": best_path,
    }));
    Ok(())
}

fn cmd_eval(cmd: EvalCommand) -> Result<()> {
    match cmd {
        EvalCommand::Accuracy { ckpt, corpus } => {
            let ckpt = load_checkpoint(&ckpt)?;
            let rs = ckpt.roleset()?;
            let vocab = ckpt.vocabulary();
            let frames = load_frames(&corpus)?;
            let samples: Vec<Sample> = frames
                .iter()
                .flat_map(|f| make_samples(f, &rs, &vocab))
                .collect();
            let (role_acc, word_acc) = evaluate_accuracy(&ckpt.params, &samples)?;
            print_json(&json!({
                "samples": samples.len(),
                "role_acc": role_acc,
                "word_acc": word_acc,
            }));
        }
        EvalCommand::Norms {
            ckpt_final,
            ckpt_best,
            norms,
        } => {
            let final_ckpt = load_checkpoint(&ckpt_final)?;
            let best_ckpt = load_checkpoint(&ckpt_best)?;
            let rs = final_ckpt.roleset()?;
            let vocab = final_ckpt.vocabulary();
            if best_ckpt.meta.vocab_hash != final_ckpt.meta.vocab_hash
                || best_ckpt.meta.roleset != final_ckpt.meta.roleset
            {
                bail!("checkpoints disagree on vocabulary or role inventory");
            }
            let items = load_norms(&norms)?;
            let (rho_final, rho_max) =
                evaluate_norms(&final_ckpt.params, &best_ckpt.params, &items, &rs, &vocab)?;
            print_json(&json!({
                "items": items.len(),
                "rho_final": rho_final,
                "rho_max": rho_max,
            }));
        }
    }
    Ok(())
}

fn cmd_synth(args: SynthArgs) -> Result<()> {
    let text = std::fs::read_to_string(&args.spec)
        .with_context(|| format!("reading spec {}", args.spec.display()))?;
    let spec: SynthSpec =
        serde_json::from_str(&text).with_context(|| format!("parsing {}", args.spec.display()))?;
    let frames = generate_synthetic(&spec)?;
    write_frames(&args.out, &frames)?;
    let (sentences, total) = corpus::count_frames(&frames);
    print_json(&json!({
        "sentences": sentences,
        "frames": total,
        "out": args.out,
    }));
    Ok(())
}

fn cmd_sweep(args: SweepArgs) -> Result<()> {
    let text = std::fs::read_to_string(&args.grid)
        .with_context(|| format!("reading grid {}", args.grid.display()))?;
    let grid: SweepGrid =
        serde_json::from_str(&text).with_context(|| format!("parsing {}", args.grid.display()))?;
    let frames = load_frames(&args.corpus)?;
    let norms = match &args.norms {
        Some(path) => Some(load_norms(path)?),
        None => None,
    };
    let report = run_sweep(&grid, &frames, norms.as_deref(), args.workers)?;
    let (csv_path, json_path) = emit_report(&report, &args.out)?;
    let failed = report.rows.iter().filter(|r| r.error.is_some()).count();
    print_json(&json!({
        "cells": report.rows.len(),
        "cells_with_errors": failed,
        "csv": csv_path,
        "json": json_path,
    }));
    Ok(())
}

fn main() -> Result<()> {
    // Die silently when a downstream pipe closes, like any line-oriented tool.
    #[cfg(unix)]
    unsafe {
        libc::signal(libc::SIGPIPE, libc::SIG_DFL);
    }
    let cli = Cli::parse();
    match cli.command {
        Command::Corpus { command } => cmd_corpus(command),
        Command::Roleset {
            command: RolesetCommand::Show(args),
        } => cmd_roleset_show(args),
        Command::Train(args) => cmd_train(args),
        Command::Eval { command } => cmd_eval(command),
        Command::Synth(args) => cmd_synth(args),
        Command::Sweep(args) => cmd_sweep(args),
    }
}
