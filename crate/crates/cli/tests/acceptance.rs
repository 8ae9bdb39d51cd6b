//! Acceptance gate. Prints one PASS/FAIL/SKIP line per criterion and exits
//! nonzero if any criterion fails. Runs without the libtest harness so the
//! lines are always visible.
//!
//! Datasets that are not shipped are read from `ZFP_KDD_PATH` (the KDD Cup
//! 1999 10% file) and `ZFP_POWERGRID_PATH` (power-grid CSV with a `marker`
//! column); criteria needing them are skipped when the variables are unset.

use std::path::{Path, PathBuf};
use std::time::Instant;

use clap::Parser;
use zfp_cli::args::{Cli, Command, TrainArgs};
use zfp_cli::{cmd_train, TrainReport};
use zfp_core::cart::{DecisionTree, TrainConfig};
use zfp_core::dataset::{synth_constellation, ConstellationSpec, Label, LabeledDataset, Preset};
use zfp_core::oracle::{crafted_cases, min_ones, zsvm_grid_min, GridSpec};
use zfp_core::removal::run_removal;
use zfp_core::rulegen::{extract_rules, Action};
use zfp_core::swarm::{parse_checkpoints_csv, run as run_swarm, SwarmConfig};
use zfp_core::zsvm::{fit_zsvm, CostConfig, FitReport, SolverConfig};

const KDD_POSITIVES: f64 = 204_458.0;
const POWERGRID_POSITIVES: f64 = 3_415.0;

enum Verdict {
    Pass(String),
    Fail(String),
    Skip(String),
}

struct Gate {
    failed: usize,
}

impl Gate {
    fn report(&mut self, id: u32, title: &str, started: Instant, verdict: Verdict) {
        let secs = started.elapsed().as_secs_f64();
        let (tag, detail) = match verdict {
            Verdict::Pass(d) => ("PASS", d),
            Verdict::Fail(d) => {
                self.failed += 1;
                ("FAIL", d)
            }
            Verdict::Skip(d) => ("SKIP", d),
        };
        println!("{tag} criterion {id} ({title}) [{secs:.1}s]: {detail}");
    }
}

struct Case {
    name: String,
    csv: PathBuf,
    cart: TrainConfig,
}

fn write_csv(ds: &LabeledDataset, path: &Path) {
    let mut text = ds.feature_names().join(",") + ",label\n";
    for i in 0..ds.len() {
        let row: Vec<String> = ds.row(i).iter().map(|v| v.to_string()).collect();
        let label = if ds.label(i) == Label::Positive { "1" } else { "0" };
        text.push_str(&format!("{},{label}\n", row.join(",")));
    }
    std::fs::write(path, text).unwrap();
}

/// Fifty random constellations: alternating 2-D and 10-D, one to three
/// blobs per class at varying separation, every fifth quantized so exact
/// duplicates across classes occur, every fourth trained depth-limited.
fn synthetic_cases(dir: &Path) -> Vec<Case> {
    (0..50u64)
        .map(|i| {
            let d = if i % 2 == 0 { 2 } else { 10 };
            let spread = [0.5, 1.0, 2.0, 4.0][(i / 2 % 4) as usize];
            let quantize = (i % 5 == 0).then_some(0.5);
            let spec = ConstellationSpec::random_mixture(d, 1 + (i % 3) as usize, spread, 80, quantize, 7000 + i);
            let ds = synth_constellation(&spec, i).unwrap();
            let csv = dir.join(format!("synth-{i}.csv"));
            write_csv(&ds, &csv);
            let cart = TrainConfig {
                max_depth: (i % 4 == 3).then_some(4),
                ..Default::default()
            };
            Case {
                name: format!("synth-{i}"),
                csv,
                cart,
            }
        })
        .collect()
}

fn train(dataset: &str, format: &str, cart: &TrainConfig, out: &Path, workers: usize, extra: &[&str]) -> TrainReport {
    let mut argv: Vec<String> = [
        "zfp", "train", "--dataset", dataset, "--format", format, "--out",
    ]
    .iter()
    .map(|s| s.to_string())
    .collect();
    argv.push(out.to_str().unwrap().into());
    argv.extend(["--workers".into(), workers.to_string(), "--seed".into(), "0".into()]);
    if let Some(d) = cart.max_depth {
        argv.extend(["--max-depth".into(), d.to_string()]);
    }
    argv.extend(extra.iter().map(|s| s.to_string()));
    let Command::Train(args) = Cli::parse_from(argv).command else {
        unreachable!()
    };
    let args: TrainArgs = args;
    cmd_train(&args).unwrap_or_else(|e| panic!("train on {dataset} failed: {e}"))
}

/// Rules replayed over the training rows agree with the tree, and the rules
/// are pairwise disjoint.
fn rules_match(tree: &DecisionTree, ds: &LabeledDataset) -> Result<(), String> {
    let rules = extract_rules(tree);
    if !rules.check_disjoint().disjoint {
        return Err("overlapping rules".into());
    }
    for i in 0..ds.len() {
        let rejected = rules.apply(ds.row(i)).unwrap() == Action::Reject;
        let flagged = tree.predict(ds.row(i)).unwrap() == Label::Positive;
        if rejected != flagged {
            return Err(format!("row {i} disagrees"));
        }
    }
    Ok(())
}

fn main() {
    let mut gate = Gate { failed: 0 };
    let dir = tempfile::tempdir().unwrap();
    let kdd = std::env::var_os("ZFP_KDD_PATH").map(PathBuf::from);
    let powergrid = std::env::var_os("ZFP_POWERGRID_PATH").map(PathBuf::from);

    // Criteria 1, 2 and 9 share the same runs.
    let started = Instant::now();
    let cases = synthetic_cases(dir.path());
    let mut models: Vec<(String, DecisionTree, LabeledDataset)> = Vec::new();
    let mut c1_fail = Vec::new();
    let mut c2_fail = Vec::new();
    let mut c9_fail = Vec::new();
    let mut checkpoint_csvs = Vec::new();
    for case in &cases {
        let out = dir.path().join(format!("{}-w1", case.name));
        let r = train(case.csv.to_str().unwrap(), "csv", &case.cart, &out, 1, &[]);
        if r.confusion.fp != 0 {
            c1_fail.push(format!("{} FP={}", case.name, r.confusion.fp));
        }
        if !r.best_fitness_trajectory.windows(2).all(|w| w[0] <= w[1]) {
            c2_fail.push(case.name.clone());
        }
        checkpoint_csvs.push(std::fs::read(out.join("checkpoints.csv")).unwrap());
        models.push((case.name.clone(), r.tree, r.dataset));
    }
    let mut kdd_note = "KDD subsamples skipped (ZFP_KDD_PATH unset)".to_string();
    if let Some(path) = &kdd {
        for n in [5_000usize, 20_000] {
            let out = dir.path().join(format!("kdd-{n}"));
            let n_s = n.to_string();
            let r = train(path.to_str().unwrap(), "kdd", &TrainConfig::default(), &out, 4, &["--subsample", &n_s]);
            if r.confusion.fp != 0 {
                c1_fail.push(format!("kdd-{n} FP={}", r.confusion.fp));
            }
            if !r.best_fitness_trajectory.windows(2).all(|w| w[0] <= w[1]) {
                c2_fail.push(format!("kdd-{n}"));
            }
            models.push((format!("kdd-{n}"), r.tree, r.dataset));
        }
        kdd_note = "KDD 5k/20k subsamples included".into();
    }
    let c1_secs = started.elapsed();
    gate.report(
        1,
        "zero-FP soundness",
        started,
        if c1_fail.is_empty() {
            Verdict::Pass(format!("{} synthetic runs with FP = 0; {kdd_note}", cases.len()))
        } else {
            Verdict::Fail(c1_fail.join(", "))
        },
    );
    let started = Instant::now();
    gate.report(
        2,
        "monotone best fitness",
        started,
        if c2_fail.is_empty() {
            Verdict::Pass(format!("{} trajectories non-decreasing", models.len()))
        } else {
            Verdict::Fail(format!("decreasing in {}", c2_fail.join(", ")))
        },
    );

    let started = Instant::now();
    let mut c3_fail = Vec::new();
    let mut easy_equal = 0;
    let crafted = crafted_cases();
    for case in &crafted {
        let oracle = min_ones(&case.dataset, &case.cart).unwrap();
        let cfg = SwarmConfig {
            max_iterations: if case.easy { 50 } else { 200 },
            ..Default::default()
        };
        let best = run_swarm(&case.dataset, &case.cart, &cfg, 1).unwrap().best.fitness as usize;
        if best > oracle.max_retained {
            c3_fail.push(format!("{} best {best} > optimum {}", case.name, oracle.max_retained));
        }
        if case.easy {
            if best == oracle.max_retained {
                easy_equal += 1;
            } else {
                c3_fail.push(format!("{} best {best} != optimum {}", case.name, oracle.max_retained));
            }
        }
    }
    gate.report(
        3,
        "exhaustive optimum at tiny scale",
        started,
        if c3_fail.is_empty() {
            Verdict::Pass(format!(
                "{} cases within optimum, {easy_equal}/10 easy cases equal within 50 iterations",
                crafted.len()
            ))
        } else {
            Verdict::Fail(c3_fail.join("; "))
        },
    );

    let started = Instant::now();
    match &kdd {
        None => gate.report(4, "KDD checkpoint trend", started, Verdict::Skip("ZFP_KDD_PATH unset".into())),
        Some(path) => {
            let out = dir.path().join("kdd-full");
            let r = train(path.to_str().unwrap(), "kdd", &TrainConfig::default(), &out, 4, &[]);
            let rows = parse_checkpoints_csv(&r.checkpoints_csv).unwrap();
            let mut problems = Vec::new();
            for c in &rows {
                if c.confusion.fp != 0 {
                    problems.push(format!("FP={} at {}", c.confusion.fp, c.iteration));
                }
                if c.iteration >= 100 && (c.confusion.tp as f64) < 0.985 * KDD_POSITIVES {
                    problems.push(format!("TP={} at {}", c.confusion.tp, c.iteration));
                }
            }
            let summary: Vec<String> = rows.iter().map(|c| format!("{}:{}", c.iteration, c.confusion.tp)).collect();
            models.push(("kdd-full".into(), r.tree, r.dataset));
            gate.report(
                4,
                "KDD checkpoint trend",
                started,
                if problems.is_empty() {
                    Verdict::Pass(format!("FP = 0 throughout; TP by iteration {}", summary.join(" ")))
                } else {
                    Verdict::Fail(problems.join(", "))
                },
            );
        }
    }

    let started = Instant::now();
    match &powergrid {
        None => gate.report(5, "power-grid checkpoint trend", started, Verdict::Skip("ZFP_POWERGRID_PATH unset".into())),
        Some(path) => {
            let out = dir.path().join("powergrid");
            let r = train(path.to_str().unwrap(), "powergrid", &TrainConfig::default(), &out, 4, &[]);
            let rows = parse_checkpoints_csv(&r.checkpoints_csv).unwrap();
            let mut problems = Vec::new();
            if rows.iter().any(|c| c.confusion.fp != 0) {
                problems.push("FP > 0 at a checkpoint".to_string());
            }
            if !rows.windows(2).all(|w| w[0].confusion.tp <= w[1].confusion.tp) {
                problems.push("TP decreases".into());
            }
            match rows.iter().find(|c| c.iteration == 500) {
                Some(c) if (c.confusion.tp as f64) >= 0.85 * POWERGRID_POSITIVES => {}
                Some(c) => problems.push(format!("TP={} at 500", c.confusion.tp)),
                None => problems.push("no checkpoint at 500".into()),
            }
            let summary: Vec<String> = rows.iter().map(|c| format!("{}:{}", c.iteration, c.confusion.tp)).collect();
            models.push(("powergrid".into(), r.tree, r.dataset));
            gate.report(
                5,
                "power-grid checkpoint trend",
                started,
                if problems.is_empty() {
                    Verdict::Pass(format!("FP = 0 throughout; TP by iteration {}", summary.join(" ")))
                } else {
                    Verdict::Fail(problems.join(", "))
                },
            );
        }
    }

    let started = Instant::now();
    let mut c6_fail = Vec::new();
    let mut max_rounds = 0;
    for (case, (_, _, ds)) in cases.iter().zip(&models) {
        let r = run_removal(ds, &case.cart).unwrap();
        let rounds = r.trace.rounds.len();
        max_rounds = max_rounds.max(rounds);
        if rounds > ds.n_pos() + 1 {
            c6_fail.push(format!("{} took {rounds} rounds", case.name));
        }
        if r.full_confusion.fp != 0 {
            c6_fail.push(format!("{} FP={}", case.name, r.full_confusion.fp));
        }
        if r.trace.rounds.iter().any(|round| round.r > 1.0) {
            c6_fail.push(format!("{} cost rose within a round", case.name));
        }
    }
    gate.report(
        6,
        "removal baseline",
        started,
        if c6_fail.is_empty() {
            Verdict::Pass(format!(
                "{} sets reach FP = 0 with r <= 1 every round; at most {max_rounds} rounds",
                cases.len()
            ))
        } else {
            Verdict::Fail(c6_fail.join(", "))
        },
    );

    let started = Instant::now();
    gate.report(7, "linear classifier failure modes", started, criterion_7());

    let started = Instant::now();
    let mut c8_fail = Vec::new();
    for (name, tree, ds) in &models {
        if let Err(e) = rules_match(tree, ds) {
            c8_fail.push(format!("{name}: {e}"));
        }
    }
    gate.report(
        8,
        "rule/tree equivalence",
        started,
        if c8_fail.is_empty() {
            Verdict::Pass(format!("{} models replayed, all rulesets disjoint", models.len()))
        } else {
            Verdict::Fail(c8_fail.join(", "))
        },
    );

    let started = Instant::now();
    for (case, first) in cases.iter().zip(&checkpoint_csvs) {
        let out = dir.path().join(format!("{}-w4", case.name));
        train(case.csv.to_str().unwrap(), "csv", &case.cart, &out, 4, &[]);
        if std::fs::read(out.join("checkpoints.csv")).unwrap() != *first {
            c9_fail.push(case.name.clone());
        }
    }
    gate.report(
        9,
        "determinism across worker counts",
        started,
        if c9_fail.is_empty() {
            Verdict::Pass(format!("{} checkpoint CSVs byte-identical for 1 and 4 workers", cases.len()))
        } else {
            Verdict::Fail(format!("differ: {}", c9_fail.join(", ")))
        },
    );

    println!(
        "acceptance: {} failed; criterion 1 runs took {:.1}s",
        gate.failed,
        c1_secs.as_secs_f64()
    );
    if gate.failed > 0 {
        std::process::exit(1);
    }
}

fn criterion_7() -> Verdict {
    let ds = synth_constellation(&Preset::Outliers.spec(), 0).unwrap();
    let solver = SolverConfig::default();
    let grid = GridSpec::default();
    let mut fits: Vec<FitReport> = Vec::new();
    let cells = [(1.0, 1.0), (50.0, 50.0), (10.0, 1.0), (100.0, 1.0), (100.0, 10.0), (1000.0, 10.0)];
    for (c1, c2) in cells {
        let costs = CostConfig::new(c1, c2).unwrap();
        let fit = match fit_zsvm(&ds, &costs, &solver) {
            Ok(f) => f,
            Err(e) => return Verdict::Fail(format!("fit at ({c1},{c2}) failed: {e}")),
        };
        let oracle = zsvm_grid_min(&ds, &costs, &grid).unwrap();
        if fit.objective > 1.02 * oracle.objective {
            return Verdict::Fail(format!(
                "objective at ({c1},{c2}) is {} vs oracle {}",
                fit.objective, oracle.objective
            ));
        }
        fits.push(fit);
    }
    let (g1, g50) = (fits[0].gutter, fits[1].gutter);
    if g50 >= g1 {
        return Verdict::Fail(format!("gutter at c=50 ({g50}) not below c=1 ({g1})"));
    }
    let heavy = fits
        .iter()
        .find(|f| f.costs.c1 / f.costs.c2 >= 10.0 && f.confusion.fp > 0);
    let Some(heavy) = heavy else {
        return Verdict::Fail("no cell with c1/c2 >= 10 keeps a false positive".into());
    };
    let mut same_ratio = None;
    for (i, a) in fits.iter().enumerate() {
        for b in &fits[i + 1..] {
            let equal_ratio = (a.costs.c1 / a.costs.c2 - b.costs.c1 / b.costs.c2).abs() < 1e-12;
            if equal_ratio && a.confusion != b.confusion && same_ratio.is_none() {
                same_ratio = Some((a.costs, b.costs));
            }
        }
    }
    let Some((a, b)) = same_ratio else {
        return Verdict::Fail("equal-ratio cells all share a confusion matrix".into());
    };
    Verdict::Pass(format!(
        "gutter {g50:.3} (c=50) < {g1:.3} (c=1); ({},{}) keeps FP={}; ({},{}) vs ({},{}) differ; all {} fits within 2% of oracle",
        heavy.costs.c1, heavy.costs.c2, heavy.confusion.fp, a.c1, a.c2, b.c1, b.c2, fits.len()
    ))
}
