//! Permutation importance, Spearman correlation and recursive elimination of
//! noisy and redundant features.

use rand::seq::SliceRandom;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::matrix::Matrix;
use crate::metrics::{average_ranks, roc_auc};
use crate::seed;

/// Anything that maps a design matrix to one killed-probability per row.
pub trait Scorer: Sync {
    fn score(&self, x: &Matrix) -> Result<Vec<f64>>;
}

impl<F> Scorer for F
where
    F: Fn(&Matrix) -> Result<Vec<f64>> + Sync,
{
    fn score(&self, x: &Matrix) -> Result<Vec<f64>> {
        self(x)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FeatureImportance {
    pub name: String,
    /// Baseline AUC minus the mean AUC over shuffles; negative means noise.
    pub importance: f64,
    /// Importance clamped at 0 and divided by the sum of clamped importances.
    pub share: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ImportanceReport {
    pub baseline_auc: f64,
    pub repeats: usize,
    pub features: Vec<FeatureImportance>,
}

impl ImportanceReport {
    /// Features ordered from most to least important.
    pub fn ranked(&self) -> Vec<&FeatureImportance> {
        let mut v: Vec<&FeatureImportance> = self.features.iter().collect();
        v.sort_by(|a, b| b.importance.total_cmp(&a.importance));
        v
    }
}

/// Each column is shuffled `repeats` times, every shuffle with its own
/// derived stream, so results do not depend on evaluation order.
pub fn permutation_importance<S: Scorer + ?Sized>(
    model: &S,
    x: &Matrix,
    y: &[bool],
    names: &[String],
    repeats: usize,
    seed: u64,
) -> Result<ImportanceReport> {
    if x.is_empty() {
        return Err(Error::InvalidInput("importance needs a non-empty validation set".into()));
    }
    if names.len() != x.cols() || y.len() != x.rows() {
        return Err(Error::InvalidInput("names, labels and matrix disagree in shape".into()));
    }
    if repeats == 0 {
        return Err(Error::InvalidInput("repeats must be at least 1".into()));
    }
    let baseline_auc = roc_auc(&model.score(x)?, y)?;
    let importances: Vec<f64> = (0..x.cols())
        .into_par_iter()
        .map(|j| -> Result<f64> {
            let feature_seed = seed::derive(seed, j as u64);
            let mut shuffled = x.clone();
            let original = x.column(j);
            let mut total = 0.0;
            for r in 0..repeats {
                let mut col = original.clone();
                col.shuffle(&mut seed::derived_rng(feature_seed, r as u64));
                for (i, v) in col.into_iter().enumerate() {
                    shuffled.set(i, j, v);
                }
                total += roc_auc(&model.score(&shuffled)?, y)?;
            }
            Ok(baseline_auc - total / repeats as f64)
        })
        .collect::<Result<_>>()?;
    let positive: f64 = importances.iter().map(|v| v.max(0.0)).sum();
    let features = names
        .iter()
        .zip(&importances)
        .map(|(name, &importance)| FeatureImportance {
            name: name.clone(),
            importance,
            share: if positive > 0.0 {
                importance.max(0.0) / positive
            } else {
                0.0
            },
        })
        .collect();
    Ok(ImportanceReport {
        baseline_auc,
        repeats,
        features,
    })
}

/// Pearson correlation of tie-averaged ranks.
pub fn spearman_rho(x: &[f64], y: &[f64]) -> Result<f64> {
    if x.len() != y.len() {
        return Err(Error::InvalidInput("vectors differ in length".into()));
    }
    if x.len() < 2 {
        return Err(Error::InvalidInput("correlation needs at least 2 values".into()));
    }
    let (rx, ry) = (average_ranks(x), average_ranks(y));
    let n = rx.len() as f64;
    let (mx, my) = (rx.iter().sum::<f64>() / n, ry.iter().sum::<f64>() / n);
    let (mut sxy, mut sxx, mut syy) = (0.0, 0.0, 0.0);
    for (a, b) in rx.iter().zip(&ry) {
        let (da, db) = (a - mx, b - my);
        sxy += da * db;
        sxx += da * da;
        syy += db * db;
    }
    if sxx == 0.0 || syy == 0.0 {
        return Err(Error::Undefined("rank correlation of a constant vector"));
    }
    Ok((sxy / (sxx * syy).sqrt()).clamp(-1.0, 1.0))
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EliminationConfig {
    /// Features whose importance share falls below this are noisy.
    pub importance_threshold: f64,
    /// Pairs whose `|rho|` exceeds this are redundant.
    pub rho_threshold: f64,
    pub repeats: usize,
    pub seed: u64,
}

impl Default for EliminationConfig {
    fn default() -> Self {
        Self {
            importance_threshold: 0.01,
            rho_threshold: 0.9,
            repeats: 5,
            seed: 0,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Reason {
    Noisy { importance: f64, share: f64 },
    Redundant { partner: String, rho: f64 },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Round {
    pub removed: String,
    pub reason: Reason,
    pub valid_auc: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EliminationTrace {
    pub rounds: Vec<Round>,
    pub survivors: Vec<String>,
    /// Column indices of the survivors in the original matrix.
    pub survivor_indices: Vec<usize>,
    /// Importances from the last fit, over the survivors.
    pub final_importance: ImportanceReport,
    pub warning: Option<String>,
}

/// Pairwise Spearman matrix; `None` where a column is constant.
pub fn correlation_matrix(x: &Matrix) -> Vec<Vec<Option<f64>>> {
    let cols: Vec<Vec<f64>> = (0..x.cols()).map(|j| x.column(j)).collect();
    let pairs: Vec<(usize, usize)> = (0..cols.len())
        .flat_map(|i| (i + 1..cols.len()).map(move |j| (i, j)))
        .collect();
    let values: Vec<Option<f64>> = pairs
        .par_iter()
        .map(|&(i, j)| spearman_rho(&cols[i], &cols[j]).ok())
        .collect();
    let mut m = vec![vec![None; cols.len()]; cols.len()];
    for (&(i, j), v) in pairs.iter().zip(values) {
        m[i][j] = v;
        m[j][i] = v;
    }
    m
}

/// Repeatedly fits a model on the active columns and removes one feature per
/// round: first the less important member of the most correlated pair above
/// the rho threshold, otherwise the feature with the most negative importance,
/// otherwise the lowest share under the importance threshold.
///
/// `fit` receives the active column indices and returns a scorer over a
/// matrix holding exactly those columns in that order. Correlation is measured
/// on `train_x`; importance on `valid_x`.
pub fn recursive_elimination<S, F>(
    train_x: &Matrix,
    valid_x: &Matrix,
    valid_y: &[bool],
    names: &[String],
    mut fit: F,
    cfg: &EliminationConfig,
) -> Result<EliminationTrace>
where
    S: Scorer,
    F: FnMut(&[usize]) -> Result<S>,
{
    let f = names.len();
    if f < 2 {
        return Err(Error::InvalidInput("elimination needs at least 2 features".into()));
    }
    if train_x.cols() != f || valid_x.cols() != f {
        return Err(Error::InvalidInput("feature names do not match matrix widths".into()));
    }
    let rho = correlation_matrix(train_x);
    let mut active: Vec<usize> = (0..f).collect();
    let mut rounds = Vec::new();
    let mut round = 0u64;
    loop {
        let model = fit(&active)?;
        let vx = valid_x.select_columns(&active);
        let active_names: Vec<String> = active.iter().map(|&j| names[j].clone()).collect();
        let report = permutation_importance(
            &model,
            &vx,
            valid_y,
            &active_names,
            cfg.repeats,
            seed::derive(cfg.seed, round),
        )?;
        round += 1;

        let pick = choose_removal(&active, &rho, &report, names, cfg);
        let Some((pos, reason)) = pick else {
            return Ok(finish(rounds, active, names, report, None));
        };
        if active.len() == 1 {
            let w = format!(
                "stopped before removing '{}': the feature set would be empty",
                names[active[pos]]
            );
            return Ok(finish(rounds, active, names, report, Some(w)));
        }
        rounds.push(Round {
            removed: names[active[pos]].clone(),
            reason,
            valid_auc: report.baseline_auc,
        });
        active.remove(pos);
    }
}

fn finish(
    rounds: Vec<Round>,
    active: Vec<usize>,
    names: &[String],
    final_importance: ImportanceReport,
    warning: Option<String>,
) -> EliminationTrace {
    EliminationTrace {
        rounds,
        survivors: active.iter().map(|&j| names[j].clone()).collect(),
        survivor_indices: active,
        final_importance,
        warning,
    }
}

/// Position in `active` of the feature to drop, if any rule fires.
fn choose_removal(
    active: &[usize],
    rho: &[Vec<Option<f64>>],
    report: &ImportanceReport,
    names: &[String],
    cfg: &EliminationConfig,
) -> Option<(usize, Reason)> {
    let imp = |p: usize| report.features[p].importance;

    let mut best: Option<(f64, usize, usize)> = None;
    for a in 0..active.len() {
        for b in a + 1..active.len() {
            if let Some(r) = rho[active[a]][active[b]] {
                if r.abs() > cfg.rho_threshold && best.is_none_or(|(br, _, _)| r.abs() > br) {
                    best = Some((r.abs(), a, b));
                }
            }
        }
    }
    if let Some((_, a, b)) = best {
        // ties drop the later column
        let (drop, keep) = if imp(a) < imp(b) { (a, b) } else { (b, a) };
        return Some((
            drop,
            Reason::Redundant {
                partner: names[active[keep]].clone(),
                rho: rho[active[a]][active[b]].unwrap(),
            },
        ));
    }

    let lowest_by = |key: &dyn Fn(usize) -> f64, ok: &dyn Fn(usize) -> bool| {
        (0..active.len())
            .filter(|&p| ok(p))
            .min_by(|&p, &q| key(p).total_cmp(&key(q)).then(q.cmp(&p)))
    };
    let noisy = |p: usize| Reason::Noisy {
        importance: report.features[p].importance,
        share: report.features[p].share,
    };
    if let Some(p) = lowest_by(&imp, &|p| imp(p) < 0.0) {
        return Some((p, noisy(p)));
    }
    let share = |p: usize| report.features[p].share;
    lowest_by(&share, &|p| share(p) < cfg.importance_threshold).map(|p| (p, noisy(p)))
}
