//! Random Forest, a bag of gradient boosters, and their averaged combination.
//!
//! Every member draws from its own stream `derive(seed, index)`, so fitting in
//! parallel gives the same members as fitting one after another.

use std::path::Path;

use rand::Rng as _;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::boost::{fit_gb_on_rows, Binner, GbConfig, GradientBoostedModel};
use crate::dataset::{apply_encoding, fit_frequency_encoding, Dataset, EncoderState, FeatureSchema, Label};
use crate::error::{Error, Result};
use crate::featsel::{recursive_elimination, EliminationConfig, EliminationTrace, Scorer};
use crate::matrix::Matrix;
use crate::resample::{adasyn, AdasynConfig};
use crate::seed;
use crate::tree::{fit_tree_weighted, DecisionTree, Presorted, TreeConfig};

pub const MODEL_FORMAT: &str = "pmt-combined-model";
pub const MODEL_FORMAT_VERSION: u32 = 1;
/// Scores at or above this are classified Killed.
pub const KILL_THRESHOLD: f64 = 0.5;
const SINGLE_CLASS_REDRAWS: usize = 10;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ForestConfig {
    pub n_trees: usize,
    pub max_features_fraction: f64,
    pub bootstrap: bool,
    pub min_samples_leaf: usize,
    pub max_depth: Option<usize>,
    pub seed: u64,
}

impl Default for ForestConfig {
    fn default() -> Self {
        Self {
            n_trees: 100,
            max_features_fraction: 0.7,
            bootstrap: true,
            min_samples_leaf: 1,
            max_depth: None,
            seed: 0,
        }
    }
}

impl ForestConfig {
    fn tree_config(&self) -> TreeConfig {
        TreeConfig {
            max_features_fraction: self.max_features_fraction,
            min_samples_leaf: self.min_samples_leaf,
            max_depth: self.max_depth,
        }
    }
}

fn bootstrap_weights(n: usize, rng: &mut seed::Rng) -> Vec<u32> {
    let mut w = vec![0u32; n];
    for _ in 0..n {
        w[rng.random_range(0..n)] += 1;
    }
    w
}

pub fn fit_forest(x: &Matrix, y: &[bool], cfg: &ForestConfig) -> Result<Vec<DecisionTree>> {
    if cfg.n_trees == 0 {
        return Err(Error::InvalidInput("forest needs at least one tree".into()));
    }
    let tree_cfg = cfg.tree_config();
    tree_cfg.validate()?;
    if x.is_empty() {
        return Err(Error::InvalidInput("cannot fit a forest on empty input".into()));
    }
    if y.len() != x.rows() {
        return Err(Error::InvalidInput("labels do not match row count".into()));
    }
    let presorted = Presorted::new(x);
    (0..cfg.n_trees)
        .into_par_iter()
        .map(|i| {
            let mut rng = seed::derived_rng(cfg.seed, i as u64);
            let weights = if cfg.bootstrap {
                bootstrap_weights(x.rows(), &mut rng)
            } else {
                vec![1; x.rows()]
            };
            fit_tree_weighted(x, y, &weights, Some(&presorted), &tree_cfg, &mut rng)
        })
        .collect()
}

/// Mean of the member probabilities.
pub fn predict_forest(forest: &[DecisionTree], x: &[f64]) -> Result<f64> {
    if forest.is_empty() {
        return Err(Error::InvalidInput("empty forest".into()));
    }
    let mut sum = 0.0;
    for t in forest {
        sum += t.predict_proba(x)?;
    }
    Ok(sum / forest.len() as f64)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GbBagConfig {
    pub n_models: usize,
    /// Fit each member on a bootstrap resample rather than the full data.
    pub subsample: bool,
    pub inner: GbConfig,
    pub seed: u64,
}

impl Default for GbBagConfig {
    fn default() -> Self {
        Self {
            n_models: 50,
            subsample: true,
            inner: GbConfig::default(),
            seed: 0,
        }
    }
}

pub fn fit_gb_bag(x: &Matrix, y: &[bool], cfg: &GbBagConfig) -> Result<Vec<GradientBoostedModel>> {
    if cfg.n_models == 0 {
        return Err(Error::InvalidInput("bag needs at least one booster".into()));
    }
    cfg.inner.validate()?;
    if x.is_empty() {
        return Err(Error::InvalidInput("cannot fit a bag on empty input".into()));
    }
    if y.len() != x.rows() {
        return Err(Error::InvalidInput("labels do not match row count".into()));
    }
    if y.iter().all(|&v| v) || y.iter().all(|&v| !v) {
        return Err(Error::SingleClass("gradient-boosting bag"));
    }
    let n = x.rows();
    let binner = Binner::fit(x, cfg.inner.n_bins);
    let binned = binner.transform(x);
    (0..cfg.n_models)
        .into_par_iter()
        .map(|i| {
            let rows: Vec<u32> = if cfg.subsample {
                let mut rng = seed::derived_rng(cfg.seed, i as u64);
                let mut attempt = 0;
                loop {
                    let rows: Vec<u32> = (0..n).map(|_| rng.random_range(0..n) as u32).collect();
                    let pos = rows.iter().filter(|&&r| y[r as usize]).count();
                    if pos > 0 && pos < n {
                        break rows;
                    }
                    attempt += 1;
                    if attempt > SINGLE_CLASS_REDRAWS {
                        return Err(Error::SingleClass("bootstrap draw for a booster"));
                    }
                }
            } else {
                (0..n as u32).collect()
            };
            fit_gb_on_rows(&binner, &binned, y, &rows, x.cols(), &cfg.inner, false).map(|f| f.model)
        })
        .collect()
}

pub fn predict_gb_bag(bag: &[GradientBoostedModel], x: &[f64]) -> Result<f64> {
    if bag.is_empty() {
        return Err(Error::InvalidInput("empty boosting bag".into()));
    }
    let mut sum = 0.0;
    for m in bag {
        sum += m.predict_proba(x)?;
    }
    Ok(sum / bag.len() as f64)
}

/// The two sub-ensembles without schema or encoder; scores encoded rows.
#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct Members {
    pub forest: Vec<DecisionTree>,
    pub gb_bag: Vec<GradientBoostedModel>,
}

impl Members {
    fn n_features(&self) -> Option<usize> {
        self.forest
            .first()
            .map(|t| t.n_features())
            .or(self.gb_bag.first().map(|m| m.n_features))
    }

    pub fn predict(&self, x: &[f64]) -> Result<f64> {
        mean_prediction(&self.forest, &self.gb_bag, x)
    }

    pub fn predict_matrix(&self, x: &Matrix) -> Result<Vec<f64>> {
        if let Some(f) = self.n_features() {
            if x.cols() != f {
                return Err(Error::Schema(format!("matrix has {} columns, model expects {f}", x.cols())));
            }
        }
        (0..x.rows()).into_par_iter().map(|i| self.predict(x.row(i))).collect()
    }
}

impl Scorer for Members {
    fn score(&self, x: &Matrix) -> Result<Vec<f64>> {
        self.predict_matrix(x)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CombinedModel {
    pub format: String,
    pub format_version: u32,
    pub artifact_version: String,
    /// Selected features, in model column order.
    pub schema: FeatureSchema,
    /// Frequency tables for the selected categorical features.
    pub encoder: EncoderState,
    pub forest: Vec<DecisionTree>,
    pub gb_bag: Vec<GradientBoostedModel>,
    pub threshold: f64,
}

impl CombinedModel {
    pub fn new(schema: FeatureSchema, encoder: EncoderState, members: Members) -> Result<Self> {
        if members.forest.is_empty() && members.gb_bag.is_empty() {
            return Err(Error::InvalidInput("model has no members".into()));
        }
        if let Some(f) = members.n_features() {
            if f != schema.len() {
                return Err(Error::Schema(format!("members use {f} features, schema has {}", schema.len())));
            }
        }
        let encoder = restrict_encoder(&encoder, &schema);
        Ok(Self {
            format: MODEL_FORMAT.to_string(),
            format_version: MODEL_FORMAT_VERSION,
            artifact_version: crate::ARTIFACT_VERSION.to_string(),
            schema,
            encoder,
            forest: members.forest,
            gb_bag: members.gb_bag,
            threshold: KILL_THRESHOLD,
        })
    }

    pub fn selected_features(&self) -> Vec<String> {
        self.schema.names()
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string(self)?)
    }

    pub fn from_json(s: &str) -> Result<Self> {
        #[derive(Deserialize)]
        struct Header {
            format: String,
            format_version: u32,
        }
        let h: Header = serde_json::from_str(s)?;
        if h.format != MODEL_FORMAT {
            return Err(Error::Schema(format!("not a model file (format '{}')", h.format)));
        }
        if h.format_version != MODEL_FORMAT_VERSION {
            return Err(Error::ModelVersion {
                found: h.format_version,
                expected: MODEL_FORMAT_VERSION,
            });
        }
        let m: CombinedModel = serde_json::from_str(s)?;
        if m.forest.is_empty() && m.gb_bag.is_empty() {
            return Err(Error::Schema("model file has no members".into()));
        }
        Ok(m)
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let s = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::from_json(&s)
    }
}

/// Mean of the forest score and the bag score; a missing sub-ensemble is
/// left out of the mean.
fn mean_prediction(forest: &[DecisionTree], gb_bag: &[GradientBoostedModel], x: &[f64]) -> Result<f64> {
    match (forest.is_empty(), gb_bag.is_empty()) {
        (false, false) => Ok((predict_forest(forest, x)? + predict_gb_bag(gb_bag, x)?) / 2.0),
        (false, true) => predict_forest(forest, x),
        (true, false) => predict_gb_bag(gb_bag, x),
        (true, true) => Err(Error::InvalidInput("model has no members".into())),
    }
}

fn restrict_encoder(enc: &EncoderState, schema: &FeatureSchema) -> EncoderState {
    EncoderState {
        tables: enc
            .tables
            .iter()
            .filter(|(name, _)| schema.get(name).is_some_and(|f| f.is_categorical()))
            .map(|(k, v)| (k.clone(), v.clone()))
            .collect(),
    }
}

/// Score of one encoded row over the selected features.
pub fn predict_combined(model: &CombinedModel, x: &[f64]) -> Result<f64> {
    if x.len() != model.schema.len() {
        return Err(Error::Schema(format!(
            "row has {} values, model expects {} features",
            x.len(),
            model.schema.len()
        )));
    }
    mean_prediction(&model.forest, &model.gb_bag, x)
}

pub fn label_for(score: f64, threshold: f64) -> Label {
    Label::from_killed(score >= threshold)
}

pub fn classify(model: &CombinedModel, x: &[f64]) -> Result<Label> {
    predict_combined(model, x).map(|s| label_for(s, model.threshold))
}

/// Encodes `ds` with the model's encoder and scores every record.
pub fn score_dataset(model: &CombinedModel, ds: &Dataset) -> Result<Vec<f64>> {
    let x = encode_for_model(model, ds)?;
    (0..x.rows())
        .into_par_iter()
        .map(|i| mean_prediction(&model.forest, &model.gb_bag, x.row(i)))
        .collect()
}

pub fn encode_for_model(model: &CombinedModel, ds: &Dataset) -> Result<Matrix> {
    let sub = ds.with_schema(&model.schema)?;
    apply_encoding(&sub, &model.encoder)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PipelineOptions {
    pub adasyn: Option<AdasynConfig>,
    pub forest: Option<ForestConfig>,
    pub gb_bag: Option<GbBagConfig>,
    pub elimination: Option<EliminationConfig>,
}

impl Default for PipelineOptions {
    fn default() -> Self {
        Self {
            adasyn: Some(AdasynConfig::default()),
            forest: Some(ForestConfig::default()),
            gb_bag: Some(GbBagConfig::default()),
            elimination: Some(EliminationConfig::default()),
        }
    }
}

impl PipelineOptions {
    /// Gives every stage its own stream derived from one run seed.
    pub fn with_seed(mut self, run_seed: u64) -> Self {
        if let Some(a) = &mut self.adasyn {
            a.seed = seed::derive(run_seed, 0);
        }
        if let Some(f) = &mut self.forest {
            f.seed = seed::derive(run_seed, 1);
        }
        if let Some(g) = &mut self.gb_bag {
            g.seed = seed::derive(run_seed, 2);
        }
        if let Some(e) = &mut self.elimination {
            e.seed = seed::derive(run_seed, 3);
        }
        self
    }
}

pub fn fit_members(x: &Matrix, y: &[bool], opts: &PipelineOptions) -> Result<Members> {
    if opts.forest.is_none() && opts.gb_bag.is_none() {
        return Err(Error::InvalidInput("pipeline needs a forest, a boosting bag, or both".into()));
    }
    let forest = match &opts.forest {
        Some(c) => fit_forest(x, y, c)?,
        None => Vec::new(),
    };
    let gb_bag = match &opts.gb_bag {
        Some(c) => fit_gb_bag(x, y, c)?,
        None => Vec::new(),
    };
    Ok(Members { forest, gb_bag })
}

#[derive(Debug, Clone)]
pub struct PipelineFit {
    pub model: CombinedModel,
    pub elimination: Option<EliminationTrace>,
}

/// Encode, rebalance once, optionally eliminate features against the
/// validation AUC, then fit the final ensemble on the surviving columns.
pub fn fit_pipeline(train: &Dataset, valid: &Dataset, opts: &PipelineOptions) -> Result<PipelineFit> {
    if train.is_empty() {
        return Err(Error::InvalidInput("empty training set".into()));
    }
    let encoder = fit_frequency_encoding(train)?;
    let x = apply_encoding(train, &encoder)?;
    let y = train.labels();
    let (xr, yr) = match &opts.adasyn {
        Some(c) => adasyn(&x, &y, c)?,
        None => (x.clone(), y.clone()),
    };
    let names = train.schema().names();

    let (selected, members, trace) = match &opts.elimination {
        Some(cfg) if names.len() >= 2 => {
            if valid.is_empty() {
                return Err(Error::InvalidInput("feature elimination needs a validation set".into()));
            }
            let vx = apply_encoding(valid, &encoder)?;
            let vy = valid.labels();
            let mut last: Option<(Vec<usize>, Members)> = None;
            let trace = recursive_elimination(
                &x,
                &vx,
                &vy,
                &names,
                |active: &[usize]| {
                    let m = fit_members(&xr.select_columns(active), &yr, opts)?;
                    last = Some((active.to_vec(), m.clone()));
                    Ok(m)
                },
                cfg,
            )?;
            let members = match last {
                Some((cols, m)) if cols == trace.survivor_indices => m,
                _ => fit_members(&xr.select_columns(&trace.survivor_indices), &yr, opts)?,
            };
            (trace.survivor_indices.clone(), members, Some(trace))
        }
        _ => {
            let all: Vec<usize> = (0..names.len()).collect();
            (all, fit_members(&xr, &yr, opts)?, None)
        }
    };
    let selected_names: Vec<&str> = selected.iter().map(|&j| names[j].as_str()).collect();
    let schema = train.schema().subset(&selected_names)?;
    let model = CombinedModel::new(schema, encoder, members)?;
    Ok(PipelineFit {
        model,
        elimination: trace,
    })
}
