//! Command implementations behind the `zfp` binary.
//!
//! Each `cmd_*` function does its work without printing and returns a
//! report; [`run`] prints the reports and maps outcomes to exit codes:
//! 0 when the produced or checked model has no false positives on its
//! training data, 1 when it has some, 2 on any error.

pub mod args;
pub mod manifest;
pub mod model;

use std::path::{Path, PathBuf};

use clap::Parser;
use zfp_core::cart::{evaluate, ConfusionMatrix, DecisionTree};
use zfp_core::classifier::Cart;
use zfp_core::dataset::{
    file_digest, load_csv, load_kdd, load_powergrid, synth_constellation, CodeMap, CsvOptions, DatasetManifest,
    LabeledDataset, Preset,
};
use zfp_core::removal::{run_removal, ConvergenceTrace};
use zfp_core::rulegen::{extract_rules_with, Format, Polarity, RuleSet};
use zfp_core::swarm::{checkpoints_csv, Swarm};
use zfp_core::zsvm::{sweep_costs, write_sweep_csv, CostConfig, SolverConfig, SweepRow};

use args::{Cli, Command, DataFormat, DatasetArgs, EvalArgs, ParseRulesArgs, RemovalArgs, RuleFormat, RulesArgs,
    SweepArgs, TrainArgs};
use manifest::{RunInputs, RunManifest};
use model::{load_model, ModelFile};

pub const EXIT_OK: i32 = 0;
pub const EXIT_FALSE_POSITIVES: i32 = 1;
pub const EXIT_ERROR: i32 = 2;

#[derive(Debug, thiserror::Error)]
pub enum CliError {
    #[error(transparent)]
    Core(#[from] zfp_core::Error),
    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        source: std::io::Error,
    },
    #[error(transparent)]
    Json(#[from] serde_json::Error),
    #[error("{0}")]
    Usage(String),
}

impl CliError {
    pub(crate) fn io(path: &Path, source: std::io::Error) -> Self {
        CliError::Io {
            path: path.to_path_buf(),
            source,
        }
    }
}

pub type Result<T, E = CliError> = std::result::Result<T, E>;

fn status_for(cm: &ConfusionMatrix) -> i32 {
    if cm.fp == 0 {
        EXIT_OK
    } else {
        EXIT_FALSE_POSITIVES
    }
}

/// Load a dataset as described on the command line. `codes` fixes the
/// category encoding, e.g. to match a trained model.
pub fn load_dataset(args: &DatasetArgs, codes: Option<CodeMap>) -> Result<(LabeledDataset, DatasetManifest)> {
    let (ds, digest) = match args.format {
        DataFormat::Synth => {
            let preset = Preset::from_name(&args.dataset).ok_or_else(|| {
                let names: Vec<&str> = Preset::ALL.iter().map(|p| p.name()).collect();
                CliError::Usage(format!("unknown preset {:?}; known: {}", args.dataset, names.join(", ")))
            })?;
            let ds = synth_constellation(&preset.spec(), args.seed)?;
            let digest = ds.content_digest();
            (ds, digest)
        }
        format => {
            let path = Path::new(&args.dataset);
            let ds = match format {
                DataFormat::Csv => load_csv(
                    path,
                    &CsvOptions {
                        label_column: args.label_col.clone(),
                        positive_labels: args.positive_labels.clone(),
                        negative_labels: None,
                        drop_columns: args.drop_cols.clone(),
                        categorical_columns: args.categorical_cols.clone(),
                        codes,
                    },
                )?,
                DataFormat::Kdd => load_kdd(path, codes)?,
                DataFormat::Powergrid => load_powergrid(path, codes)?,
                DataFormat::Synth => unreachable!(),
            };
            (ds, file_digest(path)?)
        }
    };
    let ds = if args.format != DataFormat::Csv && !args.drop_cols.is_empty() {
        ds.drop_features(&args.drop_cols)?
    } else {
        ds
    };
    let ds = match args.subsample {
        Some(n) => ds.subsample(n, args.seed)?,
        None => ds,
    };
    let manifest = ds.manifest(args.dataset.clone(), digest);
    Ok((ds, manifest))
}

fn create_dir(dir: &Path) -> Result<()> {
    std::fs::create_dir_all(dir).map_err(|e| CliError::io(dir, e))
}

fn workers(requested: Option<usize>) -> Result<usize> {
    match requested {
        Some(0) => Err(CliError::Usage("--workers must be at least 1".into())),
        Some(n) => Ok(n),
        None => Ok(std::thread::available_parallelism().map_or(1, |n| n.get())),
    }
}

pub struct TrainReport {
    pub status: i32,
    pub dataset: LabeledDataset,
    pub tree: DecisionTree,
    pub fitness: u64,
    /// Recomputed from the tree, not copied from the search record.
    pub confusion: ConfusionMatrix,
    pub best_fitness_trajectory: Vec<u64>,
    pub checkpoints_csv: String,
    pub iterations: usize,
    pub manifest: RunManifest,
}

pub fn cmd_train(args: &TrainArgs) -> Result<TrainReport> {
    let (ds, dataset_manifest) = load_dataset(&args.data, None)?;
    let cart = args.cart.config();
    cart.validate()?;
    let swarm_cfg = args.swarm.config(args.data.seed);
    let n_workers = workers(args.swarm.workers)?;
    let mut inputs = RunInputs::new("train", dataset_manifest, args.data.subsample, args.data.seed);
    inputs.cart = Some(cart);
    inputs.swarm = Some(swarm_cfg.clone());
    let mut manifest = RunManifest::new(inputs, args.swarm.workers);

    let run = Swarm::new(&ds, Cart(cart), swarm_cfg, n_workers)?.run()?;
    let tree = run.best.boundary;
    let confusion = evaluate(&tree, &ds)?;

    create_dir(&args.out)?;
    let model = ModelFile::new(&tree, ds.codes().clone(), manifest.digest.clone(), run.best.fitness, confusion)?;
    manifest.write_artifact(&args.out, "best_model.json", &model.to_json()?)?;
    let checkpoints = checkpoints_csv(&run.checkpoints);
    manifest.write_artifact(&args.out, "checkpoints.csv", &checkpoints)?;
    let log = serde_json::json!({
        "manifest_digest": manifest.digest,
        "iterations": run.iterations,
        "target_reached": run.target_reached,
        "log": run.log,
    });
    manifest.write_artifact(&args.out, "iteration_log.json", &(serde_json::to_string(&log)? + "\n"))?;
    manifest.save(&args.out)?;

    Ok(TrainReport {
        status: status_for(&confusion),
        dataset: ds,
        tree,
        fitness: run.best.fitness,
        confusion,
        best_fitness_trajectory: run.log.best_fitness,
        checkpoints_csv: checkpoints,
        iterations: run.iterations,
        manifest,
    })
}

pub struct EvalReport {
    pub status: i32,
    pub confusion: ConfusionMatrix,
}

pub fn cmd_eval(args: &EvalArgs) -> Result<EvalReport> {
    let model = load_model(&args.model)?;
    let (ds, _) = load_dataset(&args.data, model.codes)?;
    let confusion = evaluate(&model.tree, &ds)?;
    Ok(EvalReport {
        status: status_for(&confusion),
        confusion,
    })
}

pub struct RulesReport {
    pub status: i32,
    pub rules: RuleSet,
    pub text: String,
}

pub fn cmd_rules(args: &RulesArgs) -> Result<RulesReport> {
    let model = load_model(&args.model)?;
    let polarity = if args.accept {
        Polarity::AcceptRules
    } else {
        Polarity::RejectRules
    };
    let rules = extract_rules_with(&model.tree, polarity);
    let text = rules.render(match args.format {
        RuleFormat::Text => Format::Text,
        RuleFormat::Machine => Format::Machine,
    });
    if let Some(out) = &args.out {
        std::fs::write(out, &text).map_err(|e| CliError::io(out, e))?;
    }
    let status = model.training_confusion.as_ref().map_or(EXIT_OK, status_for);
    Ok(RulesReport { status, rules, text })
}

pub fn cmd_parse_rules(args: &ParseRulesArgs) -> Result<RuleSet> {
    let text = std::fs::read_to_string(&args.input).map_err(|e| CliError::io(&args.input, e))?;
    Ok(RuleSet::parse_machine(&text)?)
}

fn parse_grid(cells: &[String]) -> Result<Vec<CostConfig>> {
    cells
        .iter()
        .map(|cell| {
            let bad = || CliError::Usage(format!("cost cell {cell:?} is not c1:c2"));
            let (a, b) = cell.split_once(':').ok_or_else(bad)?;
            let c1: f64 = a.trim().parse().map_err(|_| bad())?;
            let c2: f64 = b.trim().parse().map_err(|_| bad())?;
            Ok(CostConfig::new(c1, c2)?)
        })
        .collect()
}

pub struct SweepReport {
    pub rows: Vec<SweepRow>,
    pub csv: String,
    pub manifest: RunManifest,
}

pub fn cmd_sweep(args: &SweepArgs) -> Result<SweepReport> {
    let data = DatasetArgs {
        dataset: args.preset.clone(),
        format: DataFormat::Synth,
        label_col: String::new(),
        positive_labels: Vec::new(),
        drop_cols: Vec::new(),
        categorical_cols: Vec::new(),
        subsample: None,
        seed: args.seed,
    };
    let (ds, dataset_manifest) = load_dataset(&data, None)?;
    let grid = parse_grid(&args.grid)?;
    let solver = SolverConfig::default();
    let mut inputs = RunInputs::new("sweep", dataset_manifest, None, args.seed);
    inputs.extra = serde_json::json!({ "grid": grid, "solver": solver });
    let mut manifest = RunManifest::new(inputs, None);

    let rows = sweep_costs(&ds, &grid, &solver)?;
    let mut buf = Vec::new();
    write_sweep_csv(&rows, &mut buf).expect("writing to memory");
    let csv = String::from_utf8(buf).expect("ascii output");
    create_dir(&args.out)?;
    manifest.write_artifact(&args.out, "sweep.csv", &csv)?;
    manifest.save(&args.out)?;
    Ok(SweepReport { rows, csv, manifest })
}

pub struct RemovalReport {
    pub status: i32,
    pub dataset: LabeledDataset,
    pub tree: DecisionTree,
    pub confusion: ConfusionMatrix,
    pub trace: ConvergenceTrace,
    pub manifest: RunManifest,
}

pub fn cmd_removal(args: &RemovalArgs) -> Result<RemovalReport> {
    let (ds, dataset_manifest) = load_dataset(&args.data, None)?;
    let cart = args.cart.config();
    cart.validate()?;
    let mut inputs = RunInputs::new("removal", dataset_manifest, args.data.subsample, args.data.seed);
    inputs.cart = Some(cart);
    let mut manifest = RunManifest::new(inputs, None);

    let result = run_removal(&ds, &cart)?;
    let confusion = evaluate(&result.model, &ds)?;
    create_dir(&args.out)?;
    let model = ModelFile::new(
        &result.model,
        ds.codes().clone(),
        manifest.digest.clone(),
        result.retained.count_ones(..) as u64,
        confusion,
    )?;
    manifest.write_artifact(&args.out, "model.json", &model.to_json()?)?;
    manifest.write_artifact(&args.out, "trace.csv", &result.trace.to_csv())?;
    manifest.save(&args.out)?;
    Ok(RemovalReport {
        status: status_for(&confusion),
        dataset: ds,
        tree: result.model,
        confusion,
        trace: result.trace,
        manifest,
    })
}

fn confusion_table(cm: &ConfusionMatrix) -> String {
    format!("TN\tTP\tFN\tFP\n{}\t{}\t{}\t{}", cm.tn, cm.tp, cm.fn_, cm.fp)
}

fn dispatch(cli: Cli) -> Result<i32> {
    match cli.command {
        Command::Train(args) => {
            let r = cmd_train(&args)?;
            print!("{}", r.checkpoints_csv);
            println!("{}", confusion_table(&r.confusion));
            println!(
                "best retains {} of {} attacks after {} iterations; outputs in {}",
                r.fitness,
                r.dataset.n_pos(),
                r.iterations,
                args.out.display()
            );
            Ok(r.status)
        }
        Command::Eval(args) => {
            let r = cmd_eval(&args)?;
            println!("{}", confusion_table(&r.confusion));
            Ok(r.status)
        }
        Command::Rules(args) => {
            let r = cmd_rules(&args)?;
            if args.out.is_none() {
                print!("{}", r.text);
            }
            Ok(r.status)
        }
        Command::ParseRules(args) => {
            let rules = cmd_parse_rules(&args)?;
            print!("{}", rules.render(Format::Machine));
            eprintln!("{} rules, default {}", rules.rules.len(), rules.default_action);
            Ok(EXIT_OK)
        }
        Command::Sweep(args) => {
            let r = cmd_sweep(&args)?;
            print!("{}", r.csv);
            Ok(EXIT_OK)
        }
        Command::Removal(args) => {
            let r = cmd_removal(&args)?;
            print!("{}", r.trace.to_csv());
            println!("{}", confusion_table(&r.confusion));
            Ok(r.status)
        }
    }
}

/// Parse arguments, run the command and return the process exit code.
pub fn run<I, T>(argv: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<std::ffi::OsString> + Clone,
{
    let cli = match Cli::try_parse_from(argv) {
        Ok(cli) => cli,
        Err(e) => {
            let code = if e.use_stderr() { EXIT_ERROR } else { EXIT_OK };
            let _ = e.print();
            return code;
        }
    };
    match dispatch(cli) {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e}");
            EXIT_ERROR
        }
    }
}
