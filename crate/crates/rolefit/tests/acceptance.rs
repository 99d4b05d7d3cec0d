//! Acceptance gate: one test per release criterion, each printing a
//! single PASS/FAIL line. Tolerances and budgets are pinned here and are
//! not to be loosened to make a failing criterion pass.

use std::collections::BTreeMap;
use std::time::Instant;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use rolefit::corpus::{parse_frames, serialize_frames, split_files};
use rolefit::eval::{aggregate_runs, spearman, EvalError};
use rolefit::harness::{
    bayes_oracle, generate_synthetic, report_csv, run_sweep, split_sentences, CountDist,
    NoiseSpec, ReportRow, SweepGrid, SweepReport, SynthSpec, REPORT_CSV_HEADER,
};
use rolefit::model::{grad_check, init_params, ModelDims, ModelInput, GRAD_CHECK_EPSILON};
use rolefit::roleset::{RoleSet, Vocabulary};
use rolefit::training::{make_samples, train, EarlyStopper, Sample, TrainConfig};

fn check(number: u32, name: &str, pass: bool, detail: &str) {
    let verdict = if pass { "PASS" } else { "FAIL" };
    println!("acceptance {number:02} {name}: {verdict} ({detail})");
    assert!(pass, "acceptance {number:02} {name}: {detail}");
}

#[test]
fn acceptance_01_gradient_check() {
    let started = Instant::now();
    let rs = RoleSet::baseline();
    let dims = ModelDims::new(20, rs.len()).with_dim(4).with_blocks(2);
    let params = init_params(dims, 12345);
    let input = ModelInput::role_task(vec![(rs.prd_index(), 0), (1, 3), (2, 7)], 11);
    let report =
        grad_check(&params, &input, Some(4), Some(11), GRAD_CHECK_EPSILON, 1e-4).unwrap();
    let elapsed = started.elapsed().as_secs_f64();
    check(
        1,
        "analytic gradients match finite differences",
        report.max_rel_err < 1e-4 && elapsed < 5.0,
        &format!(
            "max_rel_err {:.3e} at {} ({} coords, {elapsed:.2} s)",
            report.max_rel_err, report.worst, report.coords_checked
        ),
    );
}

fn oracle_spec() -> SynthSpec {
    // 5 verbs, 6 roles, 50 nouns (48 across disjoint role bands plus 2
    // never-generated padding nouns), 20k sentences
    let mut spec = SynthSpec::role_banded(
        5,
        &["ARG0", "ARG1", "ARG2", "ARG3", "ARGM-TMP", "ARGM-LOC"],
        &[0.30, 0.24, 0.16, 0.12, 0.10, 0.08],
        8,
        0.5,
        20_000,
        20260819,
    );
    spec.nouns.push("n48".into());
    spec.nouns.push("n49".into());
    for per_role in &mut spec.noun_probs {
        for row in per_role.iter_mut() {
            row.push(0.0);
            row.push(0.0);
        }
    }
    spec
}

fn synth_roleset(name: &str, roles: &[&str]) -> RoleSet {
    let mut labels = vec!["PRD".to_string()];
    labels.extend(roles.iter().map(|r| r.to_string()));
    RoleSet::new(name, labels).expect("valid explicit labels")
}

#[test]
fn acceptance_02_model_approaches_bayes_oracle() {
    let started = Instant::now();
    let spec = oracle_spec();
    let (oracle_role, oracle_word) = bayes_oracle(&spec).unwrap();
    let frames = generate_synthetic(&spec).unwrap();
    let rs = synth_roleset(
        "synth6",
        &["ARG0", "ARG1", "ARG2", "ARG3", "ARGM-TMP", "ARGM-LOC"],
    );
    let (train_frames, dev, test) = split_sentences(&frames, 0.05, 0.1).unwrap();
    let vocab = Vocabulary::build(&train_frames, 1000);
    let config = TrainConfig {
        batch_size: 256,
        lr: 0.25,
        max_epochs: 40,
        patience: 6,
        seed: 7,
        shuffle: true,
    };
    let params = rolefit::training::init_for(&rs, &vocab, 16, 2, 7);
    let outcome = train(&train_frames, &dev, &rs, &vocab, params, &config).unwrap();
    let samples: Vec<Sample> = test
        .iter()
        .flat_map(|f| make_samples(f, &rs, &vocab))
        .collect();
    let (role_acc, word_acc) =
        rolefit::eval::evaluate_accuracy(&outcome.final_params, &samples).unwrap();
    let elapsed = started.elapsed().as_secs_f64();

    let role_gap = (role_acc - oracle_role).abs();
    let word_gap = (word_acc - oracle_word).abs();
    let upper_bound_ok =
        role_acc <= oracle_role + 0.02 && word_acc <= oracle_word + 0.02;
    check(
        2,
        "trained model reaches the exact Bayes oracle",
        role_gap <= 0.02 && word_gap <= 0.02 && upper_bound_ok && elapsed < 180.0,
        &format!(
            "role {role_acc:.4} vs oracle {oracle_role:.4}, word {word_acc:.4} vs oracle \
             {oracle_word:.4}, {} test samples, {elapsed:.1} s",
            samples.len()
        ),
    );
}

const MODERATE: NoiseSpec = NoiseSpec {
    role_flip_rate: 0.10,
    head_error_rate: 0.10,
    frame_drop_rate: 0.16,
    seed: 0,
};
const HEAVY: NoiseSpec = NoiseSpec {
    role_flip_rate: 0.25,
    head_error_rate: 0.25,
    frame_drop_rate: 0.30,
    seed: 0,
};

/// Four-role banded corpus shared by the directional criteria.
fn banded_frames(
    n_sentences: usize,
    band_size: usize,
    peak: f64,
    seed: u64,
) -> Vec<rolefit::corpus::Frame> {
    let spec = SynthSpec::role_banded(
        4,
        &["ARG0", "ARG1", "ARG2", "ARGM-TMP"],
        &[0.35, 0.30, 0.20, 0.15],
        band_size,
        peak,
        n_sentences,
        seed,
    );
    generate_synthetic(&spec).unwrap()
}

fn banded_grid(
    fractions: Vec<f64>,
    noise_levels: Vec<NoiseSpec>,
    config: TrainConfig,
    dim: usize,
) -> SweepGrid {
    let rs = synth_roleset("synth4", &["ARG0", "ARG1", "ARG2", "ARGM-TMP"]);
    SweepGrid {
        fractions,
        rolesets: vec![rs.to_config()],
        noise_levels,
        n_runs: 3,
        base: config,
        dim,
        blocks: 1,
        dev_fraction: 0.1,
        test_fraction: 0.1,
        vocab_limit: 10_000,
        faithful_max: false,
    }
}

fn cell<'a>(report: &'a SweepReport, fraction: f64, noise: &NoiseSpec) -> &'a ReportRow {
    report
        .rows
        .iter()
        .find(|r| {
            r.fraction == fraction
                && r.role_flip == noise.role_flip_rate
                && r.head_error == noise.head_error_rate
                && r.frame_drop == noise.frame_drop_rate
        })
        .expect("cell present in report")
}

fn mean_of(row: &ReportRow, metric: &str) -> f64 {
    let pair = match metric {
        "role_acc" => row.role_acc,
        "word_acc" => row.word_acc,
        other => panic!("unknown metric {other}"),
    };
    pair.unwrap_or_else(|| panic!("cell {}/{} missing {metric}", row.fraction, row.role_flip)).0
}

#[test]
fn acceptance_03_annotation_quality_degrades_role_accuracy() {
    // Every noun here has a deterministic role, so converged clean role
    // accuracy is exactly 1.0. Head replacement draws uniform over the
    // lemma pool, which pumps the corpus role marginal into every noun's
    // observed label cell; for an ultra-rare noun those pump-ins outnumber
    // its true occurrences and ARG0 overtakes the true minor role. Mass
    // alone sets the flip threshold: xb nouns (mass .0014) flip already at
    // moderate noise, xa nouns (.0045) only at heavy noise, solids never.
    // The observed margins are large fractions of each rare cell, far
    // outside optimizer wander, so the converged ladder
    // 1.000 > ~.983 > ~.957 is stable.
    let xa = 0.0045;
    let xb = 0.0014;
    let s = 0.11 - 2.0 * xa - 4.0 * xb;
    let minor = |base: usize| {
        let mut row = vec![0.0; 22];
        row[base] = xa / 0.11;
        row[base + 1] = xa / 0.11;
        for k in 2..=5 {
            row[base + k] = xb / 0.11;
        }
        row[base + 6] = s / 0.11;
        row
    };
    let mut arg0 = vec![0.0; 22];
    arg0[0] = 1.0;
    // nouns: a0, then [xa*2, xb*4, s] per minor role
    let noun_probs = vec![vec![arg0, minor(1), minor(8), minor(15)]];
    let mut nouns = vec!["a0".to_string()];
    for r in 1..=3 {
        nouns.push(format!("xa{r}p"));
        nouns.push(format!("xa{r}q"));
        for v in ["a", "b", "c", "d"] {
            nouns.push(format!("xb{r}{v}"));
        }
        nouns.push(format!("s{r}"));
    }
    let spec = SynthSpec {
        verbs: vec!["v0".into()],
        nouns,
        roles: vec!["ARG0".into(), "ARG1".into(), "ARG2".into(), "ARGM-TMP".into()],
        verb_probs: None,
        role_probs: vec![vec![0.67, 0.11, 0.11, 0.11]],
        noun_probs,
        n_sentences: 60_000,
        frames_per_sentence: CountDist {
            counts: vec![1, 2],
            probs: vec![0.8, 0.2],
        },
        args_per_frame: CountDist::fixed(1),
        seed: 42,
    };
    let frames = generate_synthetic(&spec).unwrap();
    let grid = banded_grid(
        vec![1.0],
        vec![NoiseSpec::clean(0), MODERATE, HEAVY],
        TrainConfig {
            batch_size: 64,
            lr: 0.1,
            max_epochs: 30,
            patience: 30,
            seed: 1234,
            shuffle: true,
        },
        8,
    );
    let report = run_sweep(&grid, &frames, None, None).unwrap();
    let stats = |noise: &NoiseSpec| cell(&report, 1.0, noise).role_acc.unwrap();
    let clean = stats(&NoiseSpec::clean(0));
    let moderate = stats(&MODERATE);
    let heavy = stats(&HEAVY);
    check(
        3,
        "role accuracy strictly decreases as noise grows",
        clean.0 > moderate.0 && moderate.0 > heavy.0,
        &format!(
            "clean {:.4}±{:.4}, moderate {:.4}±{:.4}, heavy {:.4}±{:.4}",
            clean.0, clean.1, moderate.0, moderate.1, heavy.0, heavy.1
        ),
    );
}

#[test]
fn acceptance_04_training_data_quantity_helps() {
    // top three fractions all converge to the same band-peak fixed point
    // (exact accuracy ties on the shared test split); the 1% cell lands
    // wherever its small budget leaves it, necessarily at or below them
    let frames = banded_frames(20_000, 4, 0.7, 7);
    let grid = banded_grid(
        vec![0.01, 0.1, 0.5, 1.0],
        vec![NoiseSpec::clean(0)],
        TrainConfig {
            batch_size: 64,
            lr: 0.2,
            max_epochs: 16,
            patience: 16,
            seed: 77,
            shuffle: true,
        },
        8,
    );
    let report = run_sweep(&grid, &frames, None, None).unwrap();
    let clean = NoiseSpec::clean(0);
    let fractions = [0.01, 0.1, 0.5, 1.0];
    let roles: Vec<f64> = fractions
        .iter()
        .map(|&f| mean_of(cell(&report, f, &clean), "role_acc"))
        .collect();
    let words: Vec<f64> = fractions
        .iter()
        .map(|&f| mean_of(cell(&report, f, &clean), "word_acc"))
        .collect();
    let non_decreasing = |xs: &[f64]| xs.windows(2).all(|w| w[1] >= w[0]);
    check(
        4,
        "accuracy is non-decreasing in the training fraction",
        non_decreasing(&roles) && non_decreasing(&words),
        &format!("role {roles:.4?}, word {words:.4?}"),
    );
}

#[test]
fn acceptance_05_small_clean_beats_large_noisy() {
    // Label flips are not symmetric across conditionals: a dominant role's
    // filler distribution leaks into every minor role cell. Here ARG0
    // (weight 0.70) emits exactly the minor cells' runner-up nouns, so at
    // heavy flip rates the leaked mass pushes each runner-up past the true
    // peak (for ARG1: n1 at .0402 observed vs n0 at .0309). A converged
    // noisy model picks the runner-up for every minor query and lands at
    // word accuracy .373 on clean test, while the clean tenth resolves the
    // true .55-vs-.45 peaks and converges to .403. Single-arg frames keep
    // that arithmetic exact.
    let dist = |pairs: &[(usize, f64)]| -> Vec<f64> {
        let mut row = vec![0.0; 6];
        for &(i, p) in pairs {
            row[i] = p;
        }
        row
    };
    let spec = SynthSpec {
        verbs: vec!["v0".into()],
        nouns: (0..6).map(|i| format!("n{i}")).collect(),
        roles: vec!["ARG0".into(), "ARG1".into(), "ARG2".into(), "ARGM-TMP".into()],
        verb_probs: None,
        role_probs: vec![vec![0.70, 0.10, 0.10, 0.10]],
        noun_probs: vec![vec![
            dist(&[(1, 0.34), (3, 0.33), (5, 0.33)]),
            dist(&[(0, 0.55), (1, 0.45)]),
            dist(&[(2, 0.55), (3, 0.45)]),
            dist(&[(4, 0.55), (5, 0.45)]),
        ]],
        n_sentences: 48_000,
        frames_per_sentence: CountDist {
            counts: vec![1, 2],
            probs: vec![0.8, 0.2],
        },
        args_per_frame: CountDist::fixed(1),
        seed: 11,
    };
    let frames = generate_synthetic(&spec).unwrap();
    let rs = synth_roleset("synth4", &["ARG0", "ARG1", "ARG2", "ARGM-TMP"]);
    let base = TrainConfig {
        batch_size: 32,
        lr: 0.2,
        max_epochs: 30,
        patience: 30,
        seed: 1234,
        shuffle: true,
    };
    let single_cell = |fraction: f64, noise: NoiseSpec| SweepGrid {
        fractions: vec![fraction],
        rolesets: vec![rs.to_config()],
        noise_levels: vec![noise],
        n_runs: 3,
        base: base.clone(),
        dim: 8,
        blocks: 1,
        dev_fraction: 0.1,
        test_fraction: 0.1,
        vocab_limit: 10_000,
        faithful_max: false,
    };
    let clean_report = run_sweep(&single_cell(0.1, NoiseSpec::clean(0)), &frames, None, None).unwrap();
    let noisy_report = run_sweep(&single_cell(1.0, HEAVY), &frames, None, None).unwrap();
    let small_clean = cell(&clean_report, 0.1, &NoiseSpec::clean(0)).word_acc.unwrap();
    let large_noisy = cell(&noisy_report, 1.0, &HEAVY).word_acc.unwrap();
    check(
        5,
        "clean tenth beats heavy-noise whole on word accuracy",
        small_clean.0 > large_noisy.0,
        &format!(
            "clean 10% {:.4}±{:.4} vs noisy 100% {:.4}±{:.4}",
            small_clean.0, small_clean.1, large_noisy.0, large_noisy.1
        ),
    );
}

#[test]
fn acceptance_06_finer_roleset_lifts_word_accuracy() {
    // ARG2 and ARG3 carry distinct filler signal; collapsing both onto the
    // UNKNOWN row forces one shared prediction
    let spec = SynthSpec::role_banded(
        6,
        &["ARG0", "ARG1", "ARG2", "ARG3"],
        &[0.30, 0.25, 0.25, 0.20],
        6,
        0.6,
        3_000,
        7,
    );
    let frames = generate_synthetic(&spec).unwrap();
    let coarse = synth_roleset("base2args", &["ARG0", "ARG1"]);
    let fine = synth_roleset("plus-arg2", &["ARG0", "ARG1", "ARG2"]);
    let grid = SweepGrid {
        fractions: vec![1.0],
        rolesets: vec![coarse.to_config(), fine.to_config()],
        noise_levels: vec![NoiseSpec::clean(0)],
        n_runs: 3,
        base: TrainConfig {
            batch_size: 64,
            lr: 0.2,
            max_epochs: 40,
            patience: 2,
            seed: 99,
            shuffle: true,
        },
        dim: 16,
        blocks: 1,
        dev_fraction: 0.1,
        test_fraction: 0.1,
        vocab_limit: 10_000,
        faithful_max: false,
    };
    let report = run_sweep(&grid, &frames, None, None).unwrap();
    let coarse_acc = report.rows[0].word_acc.expect("coarse cell succeeded").0;
    let fine_acc = report.rows[1].word_acc.expect("fine cell succeeded").0;
    check(
        6,
        "adding ARG2 to the inventory lifts word accuracy",
        fine_acc - coarse_acc >= 0.005,
        &format!("coarse {coarse_acc:.4}, fine {fine_acc:.4}"),
    );
}

fn reference_spearman(x: &[f64], y: &[f64]) -> Option<f64> {
    // independent O(n²) ranks and textbook Pearson
    let rank = |xs: &[f64]| -> Vec<f64> {
        xs.iter()
            .map(|&v| {
                let smaller = xs.iter().filter(|&&o| o < v).count() as f64;
                let equal = xs.iter().filter(|&&o| o == v).count() as f64;
                1.0 + smaller + (equal - 1.0) / 2.0
            })
            .collect()
    };
    let rx = rank(x);
    let ry = rank(y);
    let n = rx.len() as f64;
    let mx = rx.iter().sum::<f64>() / n;
    let my = ry.iter().sum::<f64>() / n;
    let cov: f64 = rx.iter().zip(&ry).map(|(a, b)| (a - mx) * (b - my)).sum();
    let vx: f64 = rx.iter().map(|a| (a - mx) * (a - mx)).sum();
    let vy: f64 = ry.iter().map(|b| (b - my) * (b - my)).sum();
    if vx == 0.0 || vy == 0.0 {
        return None;
    }
    Some(cov / (vx * vy).sqrt())
}

#[test]
fn acceptance_07_rank_correlation_matches_reference() {
    let mut rng = ChaCha8Rng::seed_from_u64(555);
    let mut worst: f64 = 0.0;
    let mut compared = 0;
    for _ in 0..1000 {
        // draws from a small integer range force plenty of ties
        let x: Vec<f64> = (0..50).map(|_| rng.gen_range(0..12) as f64).collect();
        let y: Vec<f64> = (0..50)
            .map(|i| {
                if rng.gen_bool(0.5) {
                    x[i] + rng.gen_range(0..3) as f64
                } else {
                    rng.gen_range(0..12) as f64
                }
            })
            .collect();
        match (spearman(&x, &y), reference_spearman(&x, &y)) {
            (Ok(fast), Some(slow)) => {
                worst = worst.max((fast - slow).abs());
                compared += 1;
            }
            (Err(EvalError::Degenerate(_)), None) => {}
            (fast, slow) => panic!("disagreement on degeneracy: {fast:?} vs {slow:?}"),
        }
    }
    check(
        7,
        "rank correlation matches brute-force reference",
        compared >= 990 && worst < 1e-12,
        &format!("{compared} pairs compared, worst |Δ| {worst:.3e}"),
    );
}

#[test]
fn acceptance_08_aggregation_and_report_variance_columns() {
    let runs: Vec<BTreeMap<String, f64>> = [0.50, 0.52, 0.54]
        .iter()
        .map(|&v| BTreeMap::from([("role_acc".to_string(), v)]))
        .collect();
    let agg = aggregate_runs(&runs);
    let summary = &agg["role_acc"];
    let exact = (summary.mean - 0.52).abs() <= 1e-14 && (summary.std - 0.02).abs() <= 1e-14;

    let columns_ok = ["role_acc", "word_acc", "rho_final", "rho_max"].iter().all(|m| {
        REPORT_CSV_HEADER.contains(&format!("{m}_mean"))
            && REPORT_CSV_HEADER.contains(&format!("{m}_std"))
    });
    let row = ReportRow {
        fraction: 1.0,
        roleset: "2Args3Mods".into(),
        role_flip: 0.0,
        head_error: 0.0,
        frame_drop: 0.0,
        n_runs: 3,
        role_acc: Some((summary.mean, summary.std)),
        word_acc: Some((0.31, 0.01)),
        rho_final: Some((0.9102, 0.0063)),
        rho_max: Some((0.93, 0.001)),
        error: None,
    };
    let csv = report_csv(&SweepReport { rows: vec![row] });
    let row_ok = csv.contains("0.520000,0.020000") && csv.contains("0.910200,0.006300");
    check(
        8,
        "run aggregation is exact and reports carry mean and std",
        exact && columns_ok && row_ok,
        &format!(
            "mean {:.17}, std {:.17}, columns_ok {columns_ok}, row_ok {row_ok}",
            summary.mean, summary.std
        ),
    );
}

#[test]
fn acceptance_09_sweep_reports_are_worker_count_invariant() {
    let spec = SynthSpec::role_banded(
        3,
        &["ARG0", "ARG1", "ARGM-TMP"],
        &[0.5, 0.3, 0.2],
        4,
        0.7,
        400,
        17,
    );
    let frames = generate_synthetic(&spec).unwrap();
    let grid = SweepGrid {
        fractions: vec![0.5, 1.0],
        rolesets: vec![RoleSet::baseline().to_config()],
        noise_levels: vec![NoiseSpec::clean(0), MODERATE],
        n_runs: 2,
        base: TrainConfig {
            batch_size: 64,
            lr: 0.2,
            max_epochs: 3,
            patience: 3,
            seed: 5,
            shuffle: true,
        },
        dim: 8,
        blocks: 1,
        dev_fraction: 0.1,
        test_fraction: 0.1,
        vocab_limit: 1000,
        faithful_max: false,
    };
    let serial = run_sweep(&grid, &frames, None, Some(1)).unwrap();
    let parallel = run_sweep(&grid, &frames, None, Some(4)).unwrap();
    let serial_again = run_sweep(&grid, &frames, None, Some(1)).unwrap();
    let csv_equal = report_csv(&serial) == report_csv(&parallel)
        && report_csv(&serial) == report_csv(&serial_again);
    let json_equal = serde_json::to_string(&serial).unwrap()
        == serde_json::to_string(&parallel).unwrap();
    check(
        9,
        "sweep reports are byte-identical across worker counts",
        csv_equal && json_equal,
        &format!("csv_equal {csv_equal}, json_equal {json_equal}"),
    );
}

#[test]
fn acceptance_10_corpus_round_trip_split_and_histogram() {
    let raw = include_str!("../data/sample_corpus.jsonl");
    let outcome = parse_frames(raw.as_bytes()).unwrap();
    let parse_clean = outcome.errors.is_empty();
    let round_trip = serialize_frames(&outcome.frames) == raw;

    let split = split_files(3490, None, None).unwrap();
    let expected_dev = vec![
        217, 435, 651, 868, 1085, 1302, 1519, 1736, 1953, 2170, 2387, 2604, 2821, 3038, 3255,
        3472,
    ];
    let expected_test = vec![
        218, 436, 652, 869, 1086, 1303, 1520, 1737, 1954, 2171, 2388, 2605, 2822, 3039, 3256,
        3473,
    ];
    let split_ok = split.dev_files == expected_dev
        && split.test_files == expected_test
        && split.train_files.len() == 3490 - 32;

    // independent recount straight off the raw text
    let mut expected: BTreeMap<String, u64> = BTreeMap::new();
    for line in raw.lines() {
        *expected.entry("PRD".to_string()).or_insert(0) += 1;
        let mut rest = line;
        while let Some(pos) = rest.find("\"role\":\"") {
            rest = &rest[pos + 8..];
            let end = rest.find('"').unwrap();
            *expected.entry(rest[..end].to_string()).or_insert(0) += 1;
            rest = &rest[end..];
        }
    }
    let histogram: BTreeMap<String, u64> = rolefit::corpus::role_histogram(&outcome.frames)
        .into_iter()
        .collect();
    let histogram_ok = histogram == expected;
    check(
        10,
        "bundled corpus round-trips, splits, and recounts",
        parse_clean && round_trip && split_ok && histogram_ok,
        &format!(
            "parse_clean {parse_clean}, round_trip {round_trip}, split_ok {split_ok}, \
             histogram_ok {histogram_ok}"
        ),
    );
}

#[test]
fn acceptance_11_early_stopping_rule() {
    let mut stopper = EarlyStopper::new(1);
    let first = stopper.observe(1.0);
    let second = stopper.observe(0.9);
    let third = stopper.observe(0.95);
    check(
        11,
        "dev-loss trace [1.0, 0.9, 0.95] stops at epoch 3 with best 2",
        first.improved && second.improved && !third.improved && third.stop
            && !first.stop && !second.stop && stopper.best_epoch() == 2,
        &format!(
            "verdicts ({},{},{}), best_epoch {}",
            first.stop, second.stop, third.stop, stopper.best_epoch()
        ),
    );
}
