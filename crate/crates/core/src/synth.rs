//! Synthetic mutant corpora with planted signal, noise and redundancy.
//!
//! Each project gets its own random offset on the kill log-odds and its own
//! location shift per feature, so models must generalize across projects.
//! Uncovered mutants carry zero dynamic features and always survive. The
//! global bias on the log-odds is calibrated by bisection so the covered kill
//! rate matches the requested rate.

use std::collections::BTreeMap;

use rand::Rng as _;
use rand_distr::{Distribution, StandardNormal};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::boost::sigmoid;
use crate::dataset::{
    filter_covered, split_by_project, Dataset, FeatureKind, FeatureSchema, FeatureSpec, Label, Level,
    MutantRecord, Value, MUTATOR_CLASS, NUM_ASSERT_IN_TC, NUM_ASSERT_IN_TM, NUM_EXECUTED, NUM_TEST_COVER,
    RETURN_TYPE,
};
use crate::ensemble::{fit_pipeline, score_dataset, PipelineOptions};
use crate::error::{Error, Result};
use crate::metrics::{evaluate_scores, Aggregate, EvalReport};
use crate::seed;

/// Features whose values are ratios in [0, 1].
const UNIT_INTERVAL: &[&str] = &["ppabstractness", "ppdistance", "ppinstability"];

const MUTATORS: &[(&str, f64)] = &[
    ("NegateConditionals", 0.22),
    ("VoidMethodCall", 0.14),
    ("ReturnVals", 0.12),
    ("ConditionalsBoundary", 0.10),
    ("Math", 0.10),
    ("EmptyObjectReturnVals", 0.08),
    ("NullReturnVals", 0.08),
    ("Increments", 0.06),
    ("BooleanTrueReturnVals", 0.05),
    ("InvertNegatives", 0.05),
];

const RETURN_TYPES: &[(&str, f64)] = &[
    ("void", 0.35),
    ("boolean", 0.15),
    ("int", 0.15),
    ("Object", 0.12),
    ("String", 0.10),
    ("long", 0.05),
    ("double", 0.04),
    ("List", 0.04),
];

const GENERIC_TOKENS: &[(&str, f64)] = &[("t0", 0.4), ("t1", 0.25), ("t2", 0.15), ("t3", 0.1), ("t4", 0.1)];

/// Log-odds effect of the i-th token of a categorical feature.
const TOKEN_EFFECTS: &[f64] = &[0.8, -0.6, 0.3, -0.2, 0.5, -0.8, 0.1, -0.4, 0.6, 0.0];

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SignalWeight {
    pub feature: String,
    pub weight: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SynthConfig {
    pub schema: FeatureSchema,
    pub n_projects: usize,
    /// Inclusive range of mutants per project.
    pub mutants_per_project: (usize, usize),
    pub uncovered_fraction: f64,
    pub covered_kill_rate: f64,
    /// Per-feature weights on the standardized latent value.
    pub signal: Vec<SignalWeight>,
    /// Features drawn i.i.d. uniform (or uniform tokens), independent of everything.
    pub noise_features: Vec<String>,
    /// `target -> source`: the target column is overwritten with a copy of the source.
    pub duplicate_of: BTreeMap<String, String>,
    /// Standard deviation of the per-project offset on the kill log-odds.
    pub project_offset_sd: f64,
    /// Standard deviation of the per-project location shift of each feature.
    pub feature_shift_sd: f64,
    pub seed: u64,
}

fn weights(pairs: &[(&str, f64)]) -> Vec<SignalWeight> {
    pairs
        .iter()
        .map(|&(f, w)| SignalWeight {
            feature: f.to_string(),
            weight: w,
        })
        .collect()
}

const DEFAULT_SIGNAL: &[(&str, f64)] = &[
    (NUM_TEST_COVER, 0.9),
    (NUM_ASSERT_IN_TC, 0.7),
    (NUM_EXECUTED, 0.6),
    (NUM_ASSERT_IN_TM, 0.5),
    (MUTATOR_CLASS, 0.6),
    ("mmhalsteadDifficulty", -0.3),
    ("ccfanIn", 0.2),
];

impl Default for SynthConfig {
    fn default() -> Self {
        Self {
            schema: FeatureSchema::default_schema(),
            n_projects: 50,
            mutants_per_project: (200, 400),
            uncovered_fraction: 0.625,
            covered_kill_rate: 0.67,
            signal: weights(DEFAULT_SIGNAL),
            noise_features: Vec::new(),
            duplicate_of: BTreeMap::new(),
            project_offset_sd: 0.5,
            feature_shift_sd: 0.3,
            seed: 0,
        }
    }
}

impl SynthConfig {
    /// Default corpus with every signal weight scaled down to a quarter.
    pub fn weak_signal() -> Self {
        let mut c = Self::default();
        for w in &mut c.signal {
            w.weight *= 0.25;
        }
        c
    }

    /// No feature carries information about the label.
    pub fn zero_signal() -> Self {
        Self {
            signal: Vec::new(),
            ..Self::default()
        }
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |m: String| Err(Error::InvalidInput(m));
        if self.n_projects == 0 {
            return bad("n_projects must be positive".into());
        }
        let (lo, hi) = self.mutants_per_project;
        if lo == 0 || lo > hi {
            return bad(format!("mutants_per_project range ({lo}, {hi}) is invalid"));
        }
        if !(0.0..=1.0).contains(&self.uncovered_fraction) {
            return bad(format!("uncovered_fraction={} outside [0,1]", self.uncovered_fraction));
        }
        if !(self.covered_kill_rate > 0.0 && self.covered_kill_rate < 1.0) {
            return bad(format!("covered_kill_rate={} outside (0,1)", self.covered_kill_rate));
        }
        if !(self.project_offset_sd >= 0.0 && self.feature_shift_sd >= 0.0) {
            return bad("standard deviations must be non-negative".into());
        }
        for name in [NUM_EXECUTED, NUM_TEST_COVER] {
            match self.schema.get(name) {
                Some(f) if f.kind == FeatureKind::Numeric => {}
                _ => return bad(format!("schema needs numeric `{name}` to mark coverage")),
            }
        }
        let known = |n: &str| self.schema.get(n).is_some();
        for w in &self.signal {
            if !known(&w.feature) {
                return bad(format!("signal feature `{}` not in schema", w.feature));
            }
            if !w.weight.is_finite() {
                return bad(format!("signal weight for `{}` is not finite", w.feature));
            }
            if self.noise_features.contains(&w.feature) {
                return bad(format!("`{}` is both signal and noise", w.feature));
            }
        }
        for n in &self.noise_features {
            if !known(n) {
                return bad(format!("noise feature `{n}` not in schema"));
            }
            if is_dynamic(&self.schema, n) {
                return bad(format!("noise feature `{n}` is a dynamic feature"));
            }
        }
        for (target, source) in &self.duplicate_of {
            let (Some(t), Some(s)) = (self.schema.get(target), self.schema.get(source)) else {
                return bad(format!("duplicate `{target}` <- `{source}` names an unknown feature"));
            };
            if t.kind != s.kind {
                return bad(format!("duplicate `{target}` <- `{source}` mixes feature kinds"));
            }
            if target == source || self.duplicate_of.contains_key(source) {
                return bad(format!("duplicate `{target}` <- `{source}` must copy an original column"));
            }
            if self.signal.iter().any(|w| &w.feature == target) || self.noise_features.contains(target) {
                return bad(format!("duplicate target `{target}` cannot also be signal or noise"));
            }
            if is_dynamic(&self.schema, target) {
                return bad(format!("duplicate target `{target}` is a dynamic feature"));
            }
        }
        Ok(())
    }
}

fn is_dynamic(schema: &FeatureSchema, name: &str) -> bool {
    schema.get(name).is_some_and(|f| f.level == Level::Dynamic)
}

/// How one feature is drawn.
#[derive(Debug, Clone, Copy)]
enum Marginal {
    /// Rounded log-normal, at least `min`; zeroed when uncovered.
    DynamicCount { mu: f64, sigma: f64, min: f64 },
    LogNormal { mu: f64, sigma: f64 },
    Unit,
    Tokens(&'static [(&'static str, f64)]),
    NoiseNumeric,
    NoiseTokens(&'static [(&'static str, f64)]),
    Copy(usize),
}

fn token_table(name: &str) -> &'static [(&'static str, f64)] {
    match name {
        MUTATOR_CLASS => MUTATORS,
        RETURN_TYPE => RETURN_TYPES,
        _ => GENERIC_TOKENS,
    }
}

fn marginal(cfg: &SynthConfig, spec: &FeatureSpec) -> Marginal {
    let name = spec.name.as_str();
    if let Some(src) = cfg.duplicate_of.get(name) {
        return Marginal::Copy(cfg.schema.index_of(src).expect("validated"));
    }
    let noise = cfg.noise_features.iter().any(|n| n == name);
    match spec.kind {
        FeatureKind::Categorical if noise => Marginal::NoiseTokens(token_table(name)),
        FeatureKind::Categorical => Marginal::Tokens(token_table(name)),
        FeatureKind::Numeric if noise => Marginal::NoiseNumeric,
        FeatureKind::Numeric if spec.level == Level::Dynamic => match name {
            NUM_EXECUTED => Marginal::DynamicCount { mu: 2.0, sigma: 1.2, min: 1.0 },
            NUM_TEST_COVER => Marginal::DynamicCount { mu: 1.0, sigma: 1.0, min: 1.0 },
            NUM_ASSERT_IN_TC => Marginal::DynamicCount { mu: 1.5, sigma: 1.0, min: 0.0 },
            _ => Marginal::DynamicCount { mu: 0.5, sigma: 1.0, min: 0.0 },
        },
        FeatureKind::Numeric if UNIT_INTERVAL.contains(&name) => Marginal::Unit,
        FeatureKind::Numeric => Marginal::LogNormal { mu: 2.0, sigma: 0.8 },
    }
}

/// Token effects of `table`, centred and scaled to unit variance under the
/// table's own token probabilities.
fn standardized_effects(table: &[(&str, f64)]) -> Vec<f64> {
    let total: f64 = table.iter().map(|t| t.1).sum();
    let effect = |i: usize| TOKEN_EFFECTS[i % TOKEN_EFFECTS.len()];
    let mean: f64 = table.iter().enumerate().map(|(i, t)| t.1 / total * effect(i)).sum();
    let var: f64 = table
        .iter()
        .enumerate()
        .map(|(i, t)| t.1 / total * (effect(i) - mean).powi(2))
        .sum();
    let sd = var.sqrt();
    (0..table.len())
        .map(|i| if sd > 0.0 { (effect(i) - mean) / sd } else { 0.0 })
        .collect()
}

fn draw_token(table: &'static [(&'static str, f64)], rng: &mut seed::Rng) -> usize {
    let total: f64 = table.iter().map(|t| t.1).sum();
    let mut u = rng.random::<f64>() * total;
    for (i, t) in table.iter().enumerate() {
        if u < t.1 {
            return i;
        }
        u -= t.1;
    }
    table.len() - 1
}

struct Draw {
    values: Vec<Value>,
    covered: bool,
    /// Log-odds before the calibrated bias.
    logit: f64,
    u: f64,
}

fn draw_project(cfg: &SynthConfig, marginals: &[Marginal], weight: &[f64], p: usize) -> Vec<Draw> {
    let mut rng = seed::derived_rng(cfg.seed, p as u64);
    let normal = |rng: &mut seed::Rng| -> f64 { StandardNormal.sample(rng) };
    let (lo, hi) = cfg.mutants_per_project;
    let n = rng.random_range(lo..=hi);
    let offset = cfg.project_offset_sd * normal(&mut rng);
    let shifts: Vec<f64> = marginals.iter().map(|_| cfg.feature_shift_sd * normal(&mut rng)).collect();
    let token_z: Vec<Vec<f64>> = marginals
        .iter()
        .map(|m| match *m {
            Marginal::Tokens(t) => standardized_effects(t),
            _ => Vec::new(),
        })
        .collect();

    let mut out = Vec::with_capacity(n);
    for _ in 0..n {
        let covered = rng.random::<f64>() >= cfg.uncovered_fraction;
        let mut values = Vec::with_capacity(marginals.len());
        let mut logit = offset;
        for (j, m) in marginals.iter().enumerate() {
            let (value, z) = match *m {
                Marginal::DynamicCount { mu, sigma, min } => {
                    let z = normal(&mut rng);
                    if covered {
                        let v = (mu + shifts[j] + sigma * z).exp().round().max(min);
                        (Value::Num(v), z)
                    } else {
                        (Value::Num(0.0), 0.0)
                    }
                }
                Marginal::LogNormal { mu, sigma } => {
                    let z = normal(&mut rng);
                    (Value::Num((mu + shifts[j] + sigma * z).exp()), z)
                }
                Marginal::Unit => {
                    let u: f64 = rng.random();
                    (Value::Num(u), (u - 0.5) * 12f64.sqrt())
                }
                Marginal::Tokens(t) => {
                    let i = draw_token(t, &mut rng);
                    (Value::Cat(t[i].0.to_string()), token_z[j][i])
                }
                Marginal::NoiseNumeric => (Value::Num(rng.random()), 0.0),
                Marginal::NoiseTokens(t) => {
                    let i = rng.random_range(0..t.len());
                    (Value::Cat(t[i].0.to_string()), 0.0)
                }
                Marginal::Copy(_) => (Value::Num(0.0), 0.0),
            };
            logit += weight[j] * z;
            values.push(value);
        }
        for (j, m) in marginals.iter().enumerate() {
            if let Marginal::Copy(src) = *m {
                values[j] = values[src].clone();
            }
        }
        out.push(Draw {
            values,
            covered,
            logit,
            u: rng.random(),
        });
    }
    out
}

/// Bias `b` with `mean(sigmoid(logit + b)) == rate` over the given logits.
fn calibrate_bias(logits: &[f64], rate: f64) -> Result<f64> {
    let mean_rate = |b: f64| logits.iter().map(|&l| sigmoid(l + b)).sum::<f64>() / logits.len() as f64;
    let (mut lo, mut hi) = (-60.0, 60.0);
    if !(mean_rate(lo) < rate && rate < mean_rate(hi)) {
        return Err(Error::InvalidInput(format!(
            "covered kill rate {rate} is unreachable with the configured signal"
        )));
    }
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if mean_rate(mid) < rate {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    Ok(0.5 * (lo + hi))
}

pub fn generate(cfg: &SynthConfig) -> Result<Dataset> {
    cfg.validate()?;
    let features = cfg.schema.features();
    let marginals: Vec<Marginal> = features.iter().map(|f| marginal(cfg, f)).collect();
    let mut weight = vec![0.0; features.len()];
    for w in &cfg.signal {
        weight[cfg.schema.index_of(&w.feature).expect("validated")] += w.weight;
    }
    let projects: Vec<Vec<Draw>> = (0..cfg.n_projects)
        .into_par_iter()
        .map(|p| draw_project(cfg, &marginals, &weight, p))
        .collect();

    let covered_logits: Vec<f64> = projects
        .iter()
        .flatten()
        .filter(|d| d.covered)
        .map(|d| d.logit)
        .collect();
    let bias = if covered_logits.is_empty() {
        0.0
    } else {
        calibrate_bias(&covered_logits, cfg.covered_kill_rate)?
    };

    let width = (cfg.n_projects.max(1) - 1).to_string().len().max(3);
    let mut records = Vec::with_capacity(projects.iter().map(Vec::len).sum());
    for (p, draws) in projects.into_iter().enumerate() {
        let project = format!("proj-{p:0width$}");
        for d in draws {
            let killed = d.covered && d.u < sigmoid(d.logit + bias);
            records.push(MutantRecord {
                project: project.clone(),
                label: Label::from_killed(killed),
                values: d.values,
            });
        }
    }
    Dataset::new(cfg.schema.clone(), records)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct InflationResult {
    pub seed: u64,
    /// Per-project test AUC over every mutant.
    pub auc_all: Aggregate,
    /// Per-project test AUC over covered mutants only.
    pub auc_covered_only: Aggregate,
    pub report_all: EvalReport,
    pub report_covered_only: EvalReport,
}

impl InflationResult {
    /// Mean AUC on all mutants minus mean AUC on covered mutants.
    pub fn gap(&self) -> Option<f64> {
        Some(self.auc_all.mean? - self.auc_covered_only.mean?)
    }
}

fn evaluate(model: &crate::ensemble::CombinedModel, ds: &Dataset) -> Result<EvalReport> {
    let scores = score_dataset(model, ds)?;
    let projects: Vec<&str> = ds.records().iter().map(|r| r.project.as_str()).collect();
    evaluate_scores(&projects, &scores, &ds.labels(), model.threshold)
}

/// Trains on unfiltered data (uncovered mutants included) and scores the test
/// projects twice: once on every mutant, once on covered mutants only.
pub fn inflation_experiment(cfg: &SynthConfig, opts: &PipelineOptions) -> Result<InflationResult> {
    let ds = generate(cfg)?;
    let (train, valid, test) = split_by_project(&ds, (0.8, 0.1, 0.1), seed::derive(cfg.seed, 1))?;
    let opts = opts.with_seed(seed::derive(cfg.seed, 2));
    let model = fit_pipeline(&train, &valid, &opts)?.model;
    let report_all = evaluate(&model, &test)?;
    let report_covered_only = evaluate(&model, &filter_covered(&test))?;
    Ok(InflationResult {
        seed: cfg.seed,
        auc_all: report_all.summary.auc,
        auc_covered_only: report_covered_only.summary.auc,
        report_all,
        report_covered_only,
    })
}
