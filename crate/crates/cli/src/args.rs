use std::path::PathBuf;

use clap::{Args, Parser, Subcommand, ValueEnum};
use zfp_core::cart::TrainConfig;
use zfp_core::swarm::SwarmConfig;

#[derive(Debug, Parser)]
#[command(name = "zfp", version, about = "Learn firewall rules with zero false positives")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Run the swarm search and write the best model, checkpoints, log and manifest.
    Train(TrainArgs),
    /// Print the confusion matrix of a model on a dataset.
    Eval(EvalArgs),
    /// Compile a model into firewall rules.
    Rules(RulesArgs),
    /// Parse a machine-format ruleset and print it back.
    ParseRules(ParseRulesArgs),
    /// Sweep slack costs of the linear classifier on a synthetic constellation.
    Sweep(SweepArgs),
    /// Run the greedy positive-removal baseline.
    Removal(RemovalArgs),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum DataFormat {
    Csv,
    Kdd,
    Powergrid,
    /// `--dataset` names a built-in constellation preset.
    Synth,
}

#[derive(Debug, Clone, Args)]
pub struct DatasetArgs {
    /// Input file, or preset name with `--format synth`.
    #[arg(long)]
    pub dataset: String,
    #[arg(long, value_enum, default_value_t = DataFormat::Csv)]
    pub format: DataFormat,
    /// Label column for CSV input.
    #[arg(long, default_value = "label")]
    pub label_col: String,
    /// Label values counted as attacks for CSV input.
    #[arg(long, value_delimiter = ',', default_value = "1")]
    pub positive_labels: Vec<String>,
    #[arg(long, value_delimiter = ',')]
    pub drop_cols: Vec<String>,
    /// CSV columns holding symbolic values.
    #[arg(long, value_delimiter = ',')]
    pub categorical_cols: Vec<String>,
    /// Stratified subsample size.
    #[arg(long)]
    pub subsample: Option<usize>,
    #[arg(long, env = "ZFP_SEED", default_value_t = 0)]
    pub seed: u64,
}

#[derive(Debug, Clone, Args)]
pub struct CartArgs {
    /// Maximum tree depth; unlimited when omitted.
    #[arg(long)]
    pub max_depth: Option<usize>,
    #[arg(long, default_value_t = 1)]
    pub min_leaf: u64,
    #[arg(long, default_value_t = 0.0)]
    pub min_impurity_decrease: f64,
}

impl CartArgs {
    pub fn config(&self) -> TrainConfig {
        TrainConfig {
            max_depth: self.max_depth,
            min_samples_leaf: self.min_leaf,
            min_impurity_decrease: self.min_impurity_decrease,
        }
    }
}

#[derive(Debug, Clone, Args)]
pub struct SwarmArgs {
    #[arg(long, default_value_t = 5)]
    pub population: usize,
    #[arg(long, default_value_t = 1.5)]
    pub k_growth: f64,
    #[arg(long, default_value_t = 1000)]
    pub max_iters: usize,
    /// Stop once the best model misses at most this many attacks.
    #[arg(long, default_value_t = 0)]
    pub target_fn: u64,
    #[arg(long, value_delimiter = ',', default_value = "10,50,100,500,1000")]
    pub checkpoints: Vec<usize>,
    /// Selection weight of positives already held by the best model.
    #[arg(long, default_value_t = 4.0)]
    pub best_weight: f64,
    /// Worker threads; defaults to the available cores. Results do not
    /// depend on it.
    #[arg(long)]
    pub workers: Option<usize>,
}

impl SwarmArgs {
    pub fn config(&self, seed: u64) -> SwarmConfig {
        SwarmConfig {
            population: self.population,
            k_growth: self.k_growth,
            max_iterations: self.max_iters,
            target_fn: self.target_fn,
            checkpoints: self.checkpoints.clone(),
            best_weight: self.best_weight,
            seed,
            ..SwarmConfig::default()
        }
    }
}

#[derive(Debug, Clone, Args)]
pub struct TrainArgs {
    #[command(flatten)]
    pub data: DatasetArgs,
    #[command(flatten)]
    pub cart: CartArgs,
    #[command(flatten)]
    pub swarm: SwarmArgs,
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Debug, Clone, Args)]
pub struct EvalArgs {
    /// Model written by `train` or `removal`, or a bare tree file.
    #[arg(long)]
    pub model: PathBuf,
    #[command(flatten)]
    pub data: DatasetArgs,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum RuleFormat {
    /// `IF ... then REJECT` lines.
    Text,
    /// Lossless format accepted by `parse-rules`.
    Machine,
}

#[derive(Debug, Clone, Args)]
pub struct RulesArgs {
    #[arg(long)]
    pub model: PathBuf,
    #[arg(long, value_enum, default_value_t = RuleFormat::Text)]
    pub format: RuleFormat,
    /// Emit ACCEPT rules for normal regions over a default deny.
    #[arg(long)]
    pub accept: bool,
    /// Output file; stdout when omitted.
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Clone, Args)]
pub struct ParseRulesArgs {
    pub input: PathBuf,
}

#[derive(Debug, Clone, Args)]
pub struct SweepArgs {
    #[arg(long, default_value = "outliers")]
    pub preset: String,
    #[arg(long, env = "ZFP_SEED", default_value_t = 0)]
    pub seed: u64,
    /// Cost cells as `c1:c2`, comma separated.
    #[arg(
        long,
        value_delimiter = ',',
        default_value = "1:1,50:50,10:1,100:1,0.1:0.1,1:0.1,10:0.1,10:10,100:10"
    )]
    pub grid: Vec<String>,
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Debug, Clone, Args)]
pub struct RemovalArgs {
    #[command(flatten)]
    pub data: DatasetArgs,
    #[command(flatten)]
    pub cart: CartArgs,
    #[arg(long)]
    pub out: PathBuf,
}
