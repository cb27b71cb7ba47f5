use std::path::PathBuf;

use clap::{Args, Parser, Subcommand, ValueEnum};
use serde::Serialize;

use pmt_core::boost::GbConfig;
use pmt_core::ensemble::{ForestConfig, GbBagConfig, PipelineOptions};
use pmt_core::featsel::EliminationConfig;
use pmt_core::resample::AdasynConfig;

/// Coverage-aware predictive mutation testing.
#[derive(Debug, Parser, Serialize)]
#[command(name = "pmt", version, about, propagate_version = true)]
pub struct Cli {
    /// Seed for every random choice in the run.
    #[arg(long, global = true, default_value_t = 0)]
    pub seed: u64,

    /// Worker threads (default: all cores). Outputs do not depend on this.
    #[arg(long, global = true)]
    pub threads: Option<usize>,

    /// Feature schema JSON (default: the built-in 30-feature schema).
    #[arg(long, global = true)]
    pub schema: Option<PathBuf>,

    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand, Serialize)]
#[serde(tag = "subcommand", rename_all = "kebab-case")]
pub enum Command {
    /// Write a synthetic mutant corpus.
    Generate(GenerateArgs),
    /// Split a corpus into train/valid/test by project.
    Split(SplitArgs),
    /// Keep only mutants covered by at least one test.
    FilterCovered(FilterArgs),
    /// Fit the combined model (encode, ADASYN, feature elimination, ensemble).
    Train(TrainArgs),
    /// Score mutants with a trained model.
    Predict(PredictArgs),
    /// Per-project AUC, MCC and adjusted balanced accuracy.
    Evaluate(EvaluateArgs),
    /// Run recursive feature elimination and write the surviving schema.
    SelectFeatures(SelectArgs),
    /// Permutation importance of a trained model's features.
    Importance(ImportanceArgs),
    /// Rank approaches from per-project reports with Scott-Knott ESD.
    Compare(CompareArgs),
    /// Train on unfiltered synthetic data and compare AUC on all vs covered mutants.
    Inflation(InflationArgs),
}

#[derive(Debug, Clone, Copy, ValueEnum, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum Preset {
    Default,
    Weak,
    Zero,
}

#[derive(Debug, Args, Serialize)]
pub struct CorpusArgs {
    /// Signal strength preset.
    #[arg(long, value_enum, default_value_t = Preset::Default)]
    pub preset: Preset,
    #[arg(long, default_value_t = 50)]
    pub projects: usize,
    #[arg(long, default_value_t = 200)]
    pub mutants_min: usize,
    #[arg(long, default_value_t = 400)]
    pub mutants_max: usize,
    #[arg(long, default_value_t = 0.625)]
    pub uncovered_fraction: f64,
    #[arg(long, default_value_t = 0.67)]
    pub kill_rate: f64,
    /// Feature drawn as independent noise (repeatable).
    #[arg(long = "noise")]
    pub noise: Vec<String>,
    /// Planted copy, as TARGET=SOURCE (repeatable).
    #[arg(long = "duplicate")]
    pub duplicate: Vec<String>,
}

#[derive(Debug, Args, Serialize)]
pub struct GenerateArgs {
    #[arg(long)]
    pub out: PathBuf,
    #[command(flatten)]
    pub corpus: CorpusArgs,
}

#[derive(Debug, Args, Serialize)]
pub struct SplitArgs {
    #[arg(long = "in")]
    pub input: PathBuf,
    /// Directory receiving train.csv, valid.csv and test.csv.
    #[arg(long)]
    pub out_dir: PathBuf,
    /// Train, validation and test fractions.
    #[arg(long, value_delimiter = ',', num_args = 3, default_values_t = [0.8, 0.1, 0.1])]
    pub fractions: Vec<f64>,
}

#[derive(Debug, Args, Serialize)]
pub struct FilterArgs {
    #[arg(long = "in")]
    pub input: PathBuf,
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Debug, Args, Serialize)]
pub struct ModelArgs {
    #[arg(long, default_value_t = 5)]
    pub adasyn_k: usize,
    #[arg(long, default_value_t = 1.0)]
    pub adasyn_beta: f64,
    /// Skip ADASYN rebalancing.
    #[arg(long)]
    pub no_adasyn: bool,
    /// Random Forest size; 0 drops the forest.
    #[arg(long, default_value_t = 100)]
    pub rf_trees: usize,
    /// Fraction of features tried at each split.
    #[arg(long, default_value_t = 0.7)]
    pub rf_max_features: f64,
    /// Number of gradient boosters in the bag; 0 drops the bag.
    #[arg(long, default_value_t = 50)]
    pub gb_bag: usize,
    #[arg(long, default_value_t = 100)]
    pub gb_iters: usize,
    #[arg(long, default_value_t = 0.1)]
    pub gb_lr: f64,
    #[arg(long, default_value_t = 31)]
    pub gb_leaves: usize,
    #[arg(long, default_value_t = 0.01)]
    pub elim_importance_threshold: f64,
    #[arg(long, default_value_t = 0.9)]
    pub elim_rho_threshold: f64,
    /// Shuffles per feature when measuring importance.
    #[arg(long, default_value_t = 5)]
    pub elim_repeats: usize,
}

impl ModelArgs {
    pub fn options(&self, eliminate: bool, seed: u64) -> PipelineOptions {
        PipelineOptions {
            adasyn: (!self.no_adasyn).then_some(AdasynConfig {
                k: self.adasyn_k,
                beta: self.adasyn_beta,
                seed: 0,
            }),
            forest: (self.rf_trees > 0).then_some(ForestConfig {
                n_trees: self.rf_trees,
                max_features_fraction: self.rf_max_features,
                ..ForestConfig::default()
            }),
            gb_bag: (self.gb_bag > 0).then_some(GbBagConfig {
                n_models: self.gb_bag,
                inner: GbConfig {
                    n_iterations: self.gb_iters,
                    learning_rate: self.gb_lr,
                    max_leaf_nodes: self.gb_leaves,
                    ..GbConfig::default()
                },
                ..GbBagConfig::default()
            }),
            elimination: eliminate.then_some(EliminationConfig {
                importance_threshold: self.elim_importance_threshold,
                rho_threshold: self.elim_rho_threshold,
                repeats: self.elim_repeats,
                seed: 0,
            }),
        }
        .with_seed(seed)
    }
}

#[derive(Debug, Args, Serialize)]
pub struct TrainArgs {
    #[arg(long)]
    pub train: PathBuf,
    /// Validation set driving feature elimination.
    #[arg(long)]
    pub valid: Option<PathBuf>,
    #[arg(long)]
    pub out: PathBuf,
    /// Keep every feature.
    #[arg(long)]
    pub no_elimination: bool,
    #[command(flatten)]
    pub model: ModelArgs,
}

#[derive(Debug, Args, Serialize)]
pub struct PredictArgs {
    #[arg(long)]
    pub model: PathBuf,
    #[arg(long = "in")]
    pub input: PathBuf,
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Debug, Args, Serialize)]
pub struct EvaluateArgs {
    #[arg(long)]
    pub model: PathBuf,
    #[arg(long = "in")]
    pub input: PathBuf,
    /// Per-project CSV; the aggregate summary goes to `<out>.summary.json`.
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Debug, Args, Serialize)]
pub struct SelectArgs {
    #[arg(long)]
    pub train: PathBuf,
    #[arg(long)]
    pub valid: PathBuf,
    /// Elimination trace (JSON).
    #[arg(long)]
    pub out_trace: PathBuf,
    /// Schema of the surviving features, usable as `--schema` for `train`.
    #[arg(long)]
    pub out_schema: PathBuf,
    #[command(flatten)]
    pub model: ModelArgs,
}

#[derive(Debug, Args, Serialize)]
pub struct ImportanceArgs {
    #[arg(long)]
    pub model: PathBuf,
    #[arg(long = "in")]
    pub input: PathBuf,
    #[arg(long)]
    pub out: PathBuf,
    #[arg(long, default_value_t = 5)]
    pub repeats: usize,
}

#[derive(Debug, Clone, Copy, ValueEnum, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Metric {
    Auc,
    Mcc,
    BalAccAdj,
}

#[derive(Debug, Args, Serialize)]
pub struct CompareArgs {
    /// Per-project report CSVs from `evaluate`, one per approach.
    #[arg(required = true, num_args = 2..)]
    pub reports: Vec<PathBuf>,
    /// Group names, in report order (default: file stems).
    #[arg(long = "name")]
    pub names: Vec<String>,
    #[arg(long, value_enum, default_value_t = Metric::Auc)]
    pub metric: Metric,
    #[arg(long, default_value_t = 0.05)]
    pub sk_alpha: f64,
    /// Splits with |Cohen's d| at or below this merge.
    #[arg(long, default_value_t = 0.2)]
    pub sk_delta: f64,
    /// Apply ln(1 + x) before ranking.
    #[arg(long)]
    pub log_transform: bool,
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Debug, Args, Serialize)]
pub struct InflationArgs {
    #[arg(long)]
    pub out: PathBuf,
    #[command(flatten)]
    pub corpus: CorpusArgs,
    /// Run feature elimination during training.
    #[arg(long)]
    pub eliminate: bool,
    #[command(flatten)]
    pub model: ModelArgs,
}
