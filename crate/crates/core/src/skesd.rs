//! Scott-Knott ESD ranking.
//!
//! Groups are ordered by mean and split recursively at the boundary that
//! maximizes the between-group sum of squares of group means. A split stands
//! only when the Scott-Knott likelihood-ratio statistic exceeds the
//! chi-square critical value and the effect size between the pooled halves is
//! non-negligible; otherwise the groups share a rank.

use std::f64::consts::PI;

use serde::{Deserialize, Serialize};
use statrs::distribution::{ChiSquared, ContinuousCDF};

use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MetricGroup {
    pub name: String,
    pub observations: Vec<f64>,
}

impl MetricGroup {
    pub fn new(name: impl Into<String>, observations: Vec<f64>) -> Self {
        Self {
            name: name.into(),
            observations,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SkConfig {
    pub alpha: f64,
    /// Splits with `|d|` at or below this are merged.
    pub negligible_threshold: f64,
    /// Apply `ln(1 + x)` to every observation first.
    pub log_transform: bool,
}

impl Default for SkConfig {
    fn default() -> Self {
        Self {
            alpha: 0.05,
            negligible_threshold: 0.2,
            log_transform: false,
        }
    }
}

fn mean(v: &[f64]) -> f64 {
    v.iter().sum::<f64>() / v.len() as f64
}

fn sum_sq_dev(v: &[f64]) -> f64 {
    let m = mean(v);
    v.iter().map(|x| (x - m) * (x - m)).sum()
}

/// Cohen's d with the pooled (n - 1) standard deviation. A zero pooled
/// deviation gives 0 for equal means and a signed infinity otherwise.
pub fn cohens_delta(a: &[f64], b: &[f64]) -> Result<f64> {
    if a.len() < 2 || b.len() < 2 {
        return Err(Error::InvalidInput("effect size needs at least 2 observations per side".into()));
    }
    let diff = mean(a) - mean(b);
    let pooled_var = (sum_sq_dev(a) + sum_sq_dev(b)) / (a.len() + b.len() - 2) as f64;
    if pooled_var == 0.0 {
        return Ok(if diff == 0.0 {
            0.0
        } else {
            f64::INFINITY.copysign(diff)
        });
    }
    Ok(diff / pooled_var.sqrt())
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum MergeReason {
    SingleGroup,
    NotSignificant,
    NegligibleEffect,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Partition {
    Split {
        lambda: f64,
        critical: f64,
        delta: f64,
        high: Box<Partition>,
        low: Box<Partition>,
    },
    Rank {
        rank: usize,
        groups: Vec<String>,
        reason: MergeReason,
        /// Statistics of the rejected best split, when there was one.
        lambda: Option<f64>,
        critical: Option<f64>,
        delta: Option<f64>,
    },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GroupRank {
    pub name: String,
    pub rank: usize,
    pub mean: f64,
    pub n: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RankResult {
    /// Groups in descending order of mean.
    pub groups: Vec<GroupRank>,
    pub partition: Partition,
    pub n_ranks: usize,
}

impl RankResult {
    pub fn rank_of(&self, name: &str) -> Option<usize> {
        self.groups.iter().find(|g| g.name == name).map(|g| g.rank)
    }
}

struct Prepared {
    name: String,
    obs: Vec<f64>,
    mean: f64,
    var: f64,
}

struct Ctx<'a> {
    groups: &'a [Prepared],
    /// Variance of a group mean: pooled within-group variance over mean n.
    s2_mean: f64,
    /// Error degrees of freedom N - k.
    v: f64,
    cfg: SkConfig,
    next_rank: usize,
}

pub fn scott_knott_esd(groups: &[MetricGroup], cfg: &SkConfig) -> Result<RankResult> {
    if groups.is_empty() {
        return Err(Error::InvalidInput("no groups to rank".into()));
    }
    if !(cfg.alpha > 0.0 && cfg.alpha < 1.0) {
        return Err(Error::InvalidInput(format!("alpha={} outside (0,1)", cfg.alpha)));
    }
    if !(cfg.negligible_threshold >= 0.0) {
        return Err(Error::InvalidInput("negligible threshold must be non-negative".into()));
    }
    let mut prepared = Vec::with_capacity(groups.len());
    for g in groups {
        if g.observations.len() < 2 {
            return Err(Error::InvalidInput(format!(
                "group '{}' has {} observations, need at least 2",
                g.name,
                g.observations.len()
            )));
        }
        if g.observations.iter().any(|x| !x.is_finite()) {
            return Err(Error::InvalidInput(format!("group '{}' has a non-finite value", g.name)));
        }
        let obs: Vec<f64> = if cfg.log_transform {
            if g.observations.iter().any(|&x| x <= -1.0) {
                return Err(Error::InvalidInput(format!(
                    "group '{}' has values <= -1; log transform undefined",
                    g.name
                )));
            }
            g.observations.iter().map(|x| x.ln_1p()).collect()
        } else {
            g.observations.clone()
        };
        let m = mean(&obs);
        prepared.push(Prepared {
            name: g.name.clone(),
            var: sum_sq_dev(&obs) / (obs.len() - 1) as f64,
            mean: m,
            obs,
        });
    }
    prepared.sort_by(|a, b| {
        b.mean
            .total_cmp(&a.mean)
            .then(a.var.total_cmp(&b.var))
            .then(b.obs.len().cmp(&a.obs.len()))
            .then(a.name.cmp(&b.name))
    });

    let k = prepared.len();
    let n_total: usize = prepared.iter().map(|g| g.obs.len()).sum();
    let sse: f64 = prepared.iter().map(|g| sum_sq_dev(&g.obs)).sum();
    let v = (n_total - k) as f64;
    let mse = sse / v;
    let mean_n = n_total as f64 / k as f64;
    let mut ctx = Ctx {
        groups: &prepared,
        s2_mean: mse / mean_n,
        v,
        cfg: *cfg,
        next_rank: 1,
    };
    let partition = ctx.partition(0, k)?;
    let n_ranks = ctx.next_rank - 1;

    let mut ranks = vec![0; k];
    assign_ranks(&partition, &prepared, &mut ranks);
    let groups = prepared
        .iter()
        .zip(ranks)
        .map(|(g, rank)| GroupRank {
            name: g.name.clone(),
            rank,
            mean: g.mean,
            n: g.obs.len(),
        })
        .collect();
    Ok(RankResult {
        groups,
        partition,
        n_ranks,
    })
}

fn assign_ranks(p: &Partition, groups: &[Prepared], out: &mut [usize]) {
    match p {
        Partition::Split { high, low, .. } => {
            assign_ranks(high, groups, out);
            assign_ranks(low, groups, out);
        }
        Partition::Rank { rank, groups: names, .. } => {
            for name in names {
                // names are unique positions in order; match by first unassigned
                if let Some(i) = groups.iter().enumerate().position(|(i, g)| &g.name == name && out[i] == 0) {
                    out[i] = *rank;
                }
            }
        }
    }
}

impl Ctx<'_> {
    fn leaf(&mut self, lo: usize, hi: usize, reason: MergeReason, stats: Option<(f64, f64, f64)>) -> Partition {
        let rank = self.next_rank;
        self.next_rank += 1;
        Partition::Rank {
            rank,
            groups: self.groups[lo..hi].iter().map(|g| g.name.clone()).collect(),
            reason,
            lambda: stats.map(|s| s.0),
            critical: stats.map(|s| s.1),
            delta: stats.map(|s| s.2),
        }
    }

    fn partition(&mut self, lo: usize, hi: usize) -> Result<Partition> {
        let k = hi - lo;
        if k == 1 {
            return Ok(self.leaf(lo, hi, MergeReason::SingleGroup, None));
        }
        let means: Vec<f64> = self.groups[lo..hi].iter().map(|g| g.mean).collect();
        let grand = mean(&means);

        // best boundary by between-group sum of squares of the means
        let mut best = (f64::NEG_INFINITY, 1);
        for j in 1..k {
            let (a, b) = means.split_at(j);
            let (ma, mb) = (mean(a), mean(b));
            let b0 = a.len() as f64 * (ma - grand).powi(2) + b.len() as f64 * (mb - grand).powi(2);
            if b0 > best.0 {
                best = (b0, j);
            }
        }
        let (b0, j) = best;

        let ss_means: f64 = means.iter().map(|m| (m - grand).powi(2)).sum();
        let sigma0 = (ss_means + self.v * self.s2_mean) / (k as f64 + self.v);
        let lambda = if sigma0 > 0.0 {
            PI / (2.0 * (PI - 2.0)) * b0 / sigma0
        } else if b0 > 0.0 {
            f64::INFINITY
        } else {
            0.0
        };
        let df = k as f64 / (PI - 2.0);
        let critical = ChiSquared::new(df)
            .map_err(|e| Error::InvalidInput(format!("chi-square df {df}: {e}")))?
            .inverse_cdf(1.0 - self.cfg.alpha);

        let mid = lo + j;
        let pool = |r: std::ops::Range<usize>| -> Vec<f64> {
            self.groups[r].iter().flat_map(|g| g.obs.iter().copied()).collect()
        };
        let delta = cohens_delta(&pool(lo..mid), &pool(mid..hi))?;
        let stats = Some((lambda, critical, delta));

        if !(lambda > critical) {
            return Ok(self.leaf(lo, hi, MergeReason::NotSignificant, stats));
        }
        if !(delta.abs() > self.cfg.negligible_threshold) {
            return Ok(self.leaf(lo, hi, MergeReason::NegligibleEffect, stats));
        }
        let high = self.partition(lo, mid)?;
        let low = self.partition(mid, hi)?;
        Ok(Partition::Split {
            lambda,
            critical,
            delta,
            high: Box::new(high),
            low: Box::new(low),
        })
    }
}
