//! Histogram gradient boosting for binary log-loss.
//!
//! Features are quantile-binned once; each iteration grows a leaf-wise
//! regression tree on the gradients `p - y` and hessians `p(1 - p)` of the
//! current raw scores. Leaf values are Newton steps `-G / (H + l2)` shrunk by
//! the learning rate. Trees store real-valued thresholds (upper bin edges), so
//! prediction never needs the binner.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::matrix::Matrix;
use crate::tree::{self, midpoint, Node, NodeArrays};

const MIN_HESSIAN_TO_SPLIT: f64 = 1e-3;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GbConfig {
    pub n_iterations: usize,
    pub learning_rate: f64,
    pub max_leaf_nodes: usize,
    /// At most 256 so bin indices fit a byte.
    pub n_bins: usize,
    pub l2_regularization: f64,
    pub min_samples_leaf: usize,
}

impl Default for GbConfig {
    fn default() -> Self {
        Self {
            n_iterations: 100,
            learning_rate: 0.1,
            max_leaf_nodes: 31,
            n_bins: 255,
            l2_regularization: 0.0,
            min_samples_leaf: 20,
        }
    }
}

impl GbConfig {
    pub fn validate(&self) -> Result<()> {
        let bad = |m: String| Err(Error::InvalidInput(m));
        if self.n_iterations == 0 {
            return bad("n_iterations must be at least 1".into());
        }
        if !(self.learning_rate > 0.0 && self.learning_rate.is_finite()) {
            return bad(format!("learning_rate={} must be positive", self.learning_rate));
        }
        if self.max_leaf_nodes < 2 {
            return bad("max_leaf_nodes must be at least 2".into());
        }
        if !(2..=256).contains(&self.n_bins) {
            return bad(format!("n_bins={} outside 2..=256", self.n_bins));
        }
        if !(self.l2_regularization >= 0.0) {
            return bad("l2_regularization must be non-negative".into());
        }
        if self.min_samples_leaf == 0 {
            return bad("min_samples_leaf must be positive".into());
        }
        Ok(())
    }
}

/// Per-feature bin edges. A value lands in bin `#{edges < value}`, so
/// `bin <= b` exactly when `value <= edges[b]`.
#[derive(Debug, Clone, PartialEq)]
pub struct Binner {
    edges: Vec<Vec<f64>>,
}

impl Binner {
    /// With at most `n_bins` distinct values the edges are the midpoints
    /// between consecutive distinct values; otherwise they sit at quantiles.
    pub fn fit(x: &Matrix, n_bins: usize) -> Self {
        let edges = (0..x.cols())
            .map(|j| {
                let mut col = x.column(j);
                col.sort_by(f64::total_cmp);
                let mut distinct = col.clone();
                distinct.dedup();
                if distinct.len() <= n_bins {
                    distinct.windows(2).map(|w| midpoint(w[0], w[1])).collect()
                } else {
                    let n = col.len();
                    let mut e: Vec<f64> = Vec::with_capacity(n_bins - 1);
                    for q in 1..n_bins {
                        let v = col[(q * n / n_bins).min(n - 1)];
                        // next distinct value above v
                        let pos = distinct.partition_point(|&d| d <= v);
                        if pos < distinct.len() {
                            let t = midpoint(v, distinct[pos]);
                            if e.last().is_none_or(|&last| t > last) {
                                e.push(t);
                            }
                        }
                    }
                    e
                }
            })
            .collect();
        Self { edges }
    }

    pub fn edges(&self, feature: usize) -> &[f64] {
        &self.edges[feature]
    }

    fn n_bins(&self, feature: usize) -> usize {
        self.edges[feature].len() + 1
    }

    #[inline]
    fn bin(&self, feature: usize, v: f64) -> u8 {
        self.edges[feature].partition_point(|&e| e < v) as u8
    }

    pub fn transform(&self, x: &Matrix) -> BinnedMatrix {
        let cols = x.cols();
        let mut bins = Vec::with_capacity(x.rows() * cols);
        for r in x.iter_rows() {
            bins.extend((0..cols).map(|j| self.bin(j, r[j])));
        }
        BinnedMatrix {
            rows: x.rows(),
            cols,
            bins,
        }
    }
}

#[derive(Debug, Clone)]
pub struct BinnedMatrix {
    rows: usize,
    cols: usize,
    bins: Vec<u8>,
}

impl BinnedMatrix {
    #[cfg(test)]
    fn get(&self, r: usize, j: usize) -> u8 {
        self.bins[r * self.cols + j]
    }

    pub fn rows(&self) -> usize {
        self.rows
    }
}

/// Regression tree whose leaves hold additive raw-score contributions.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "NodeArrays", into = "NodeArrays")]
pub struct RegressionTree {
    nodes: Vec<Node>,
    n_features: usize,
}

impl From<RegressionTree> for NodeArrays {
    fn from(t: RegressionTree) -> Self {
        tree::nodes_to_arrays(&t.nodes, t.n_features)
    }
}

impl TryFrom<NodeArrays> for RegressionTree {
    type Error = Error;
    fn try_from(a: NodeArrays) -> Result<Self> {
        let nodes = tree::arrays_to_nodes(&a)?;
        RegressionTree::from_nodes(nodes, a.n_features)
    }
}

impl RegressionTree {
    pub fn from_nodes(nodes: Vec<Node>, n_features: usize) -> Result<Self> {
        tree::validate_nodes(&nodes, n_features)?;
        Ok(Self { nodes, n_features })
    }

    pub fn nodes(&self) -> &[Node] {
        &self.nodes
    }

    pub fn n_leaves(&self) -> usize {
        self.nodes.iter().filter(|n| matches!(n, Node::Leaf { .. })).count()
    }

    #[inline]
    pub fn predict(&self, x: &[f64]) -> f64 {
        tree::route(&self.nodes, x)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GradientBoostedModel {
    /// Log-odds of the training positive rate.
    pub baseline: f64,
    pub trees: Vec<RegressionTree>,
    pub n_features: usize,
    pub config: GbConfig,
}

pub fn sigmoid(z: f64) -> f64 {
    if z >= 0.0 {
        1.0 / (1.0 + (-z).exp())
    } else {
        let e = z.exp();
        e / (1.0 + e)
    }
}

/// `log(1 + e^z)` without overflow.
fn softplus(z: f64) -> f64 {
    if z > 0.0 {
        z + (-z).exp().ln_1p()
    } else {
        z.exp().ln_1p()
    }
}

/// Mean binary log-loss of raw scores `z`.
pub fn log_loss_raw(z: &[f64], y: &[bool]) -> f64 {
    let s: f64 = z
        .iter()
        .zip(y)
        .map(|(&z, &y)| softplus(z) - if y { z } else { 0.0 })
        .sum();
    s / z.len() as f64
}

impl GradientBoostedModel {
    pub fn raw_score(&self, x: &[f64]) -> Result<f64> {
        if x.len() != self.n_features {
            return Err(Error::InvalidInput(format!(
                "row has {} features, model expects {}",
                x.len(),
                self.n_features
            )));
        }
        Ok(self.raw_score_unchecked(x))
    }

    #[inline]
    pub(crate) fn raw_score_unchecked(&self, x: &[f64]) -> f64 {
        self.baseline + self.trees.iter().map(|t| t.predict(x)).sum::<f64>()
    }

    pub fn predict_proba(&self, x: &[f64]) -> Result<f64> {
        self.raw_score(x).map(sigmoid)
    }

}

pub fn predict_proba_gb(model: &GradientBoostedModel, x: &[f64]) -> Result<f64> {
    model.predict_proba(x)
}

/// A fitted model plus the training log-loss after the baseline (entry 0)
/// and after every iteration.
#[derive(Debug, Clone)]
pub struct GbFit {
    pub model: GradientBoostedModel,
    pub loss_trace: Vec<f64>,
}

pub fn fit_gb(x: &Matrix, y: &[bool], cfg: &GbConfig) -> Result<GradientBoostedModel> {
    fit_gb_traced(x, y, cfg).map(|f| f.model)
}

pub fn fit_gb_traced(x: &Matrix, y: &[bool], cfg: &GbConfig) -> Result<GbFit> {
    cfg.validate()?;
    if y.len() != x.rows() {
        return Err(Error::InvalidInput("labels do not match row count".into()));
    }
    let binner = Binner::fit(x, cfg.n_bins);
    let binned = binner.transform(x);
    let rows: Vec<u32> = (0..x.rows() as u32).collect();
    fit_gb_on_rows(&binner, &binned, y, &rows, x.cols(), cfg, true)
}

/// Fits on a subset of rows of a pre-binned matrix; `rows` may repeat
/// (bootstrap). `y` is indexed by original row.
pub(crate) fn fit_gb_on_rows(
    binner: &Binner,
    binned: &BinnedMatrix,
    y: &[bool],
    rows: &[u32],
    n_features: usize,
    cfg: &GbConfig,
    trace: bool,
) -> Result<GbFit> {
    cfg.validate()?;
    if rows.is_empty() {
        return Err(Error::InvalidInput("cannot boost on empty input".into()));
    }
    let n = rows.len();
    let labels: Vec<bool> = rows.iter().map(|&r| y[r as usize]).collect();
    let n_pos = labels.iter().filter(|&&v| v).count();
    if n_pos == 0 || n_pos == n {
        return Err(Error::SingleClass("gradient boosting"));
    }
    let rate = n_pos as f64 / n as f64;
    let baseline = (rate / (1.0 - rate)).ln();

    let mut raw = vec![baseline; n];
    let mut grad = vec![0.0; n];
    let mut hess = vec![0.0; n];
    let mut loss_trace = Vec::new();
    if trace {
        loss_trace.push(log_loss_raw(&raw, &labels));
    }
    let mut grower = Grower::new(binner, binned, rows, cfg);
    let mut trees = Vec::with_capacity(cfg.n_iterations);
    for _ in 0..cfg.n_iterations {
        for i in 0..n {
            let p = sigmoid(raw[i]);
            grad[i] = p - if labels[i] { 1.0 } else { 0.0 };
            hess[i] = p * (1.0 - p);
        }
        let (tree, leaves) = grower.grow(&grad, &hess, n_features);
        for (value, members) in leaves {
            for i in members {
                raw[i as usize] += value;
            }
        }
        trees.push(tree);
        if trace {
            loss_trace.push(log_loss_raw(&raw, &labels));
        }
    }
    Ok(GbFit {
        model: GradientBoostedModel {
            baseline,
            trees,
            n_features,
            config: *cfg,
        },
        loss_trace,
    })
}

#[derive(Debug, Clone, Copy, Default)]
struct Bin {
    g: f64,
    h: f64,
    c: u32,
}

struct SplitInfo {
    gain: f64,
    feature: usize,
    bin: u8,
}

struct Leaf {
    node: usize,
    /// positions into the fitting sample (not original row ids)
    members: Vec<u32>,
    hist: Vec<Bin>,
    g: f64,
    h: f64,
    split: Option<SplitInfo>,
}

struct Grower<'a> {
    binner: &'a Binner,
    binned: &'a BinnedMatrix,
    rows: &'a [u32],
    cfg: &'a GbConfig,
    offsets: Vec<usize>,
    hist_len: usize,
}

impl<'a> Grower<'a> {
    fn new(binner: &'a Binner, binned: &'a BinnedMatrix, rows: &'a [u32], cfg: &'a GbConfig) -> Self {
        let mut offsets = Vec::with_capacity(binned.cols + 1);
        let mut acc = 0;
        for j in 0..binned.cols {
            offsets.push(acc);
            acc += binner.n_bins(j);
        }
        offsets.push(acc);
        Self {
            binner,
            binned,
            rows,
            cfg,
            offsets,
            hist_len: acc,
        }
    }

    fn histogram(&self, members: &[u32], grad: &[f64], hess: &[f64]) -> Vec<Bin> {
        let mut hist = vec![Bin::default(); self.hist_len];
        let cols = self.binned.cols;
        for &m in members {
            let r = self.rows[m as usize] as usize;
            let (g, h) = (grad[m as usize], hess[m as usize]);
            let row_bins = &self.binned.bins[r * cols..(r + 1) * cols];
            for (j, &b) in row_bins.iter().enumerate() {
                let e = &mut hist[self.offsets[j] + b as usize];
                e.g += g;
                e.h += h;
                e.c += 1;
            }
        }
        hist
    }

    fn best_split(&self, hist: &[Bin], g: f64, h: f64, count: usize) -> Option<SplitInfo> {
        let l2 = self.cfg.l2_regularization;
        let msl = self.cfg.min_samples_leaf as u32;
        if count < 2 * self.cfg.min_samples_leaf {
            return None;
        }
        let parent = g * g / (h + l2);
        let mut best: Option<SplitInfo> = None;
        for j in 0..self.binned.cols {
            let bins = &hist[self.offsets[j]..self.offsets[j + 1]];
            let (mut gl, mut hl, mut cl) = (0.0, 0.0, 0u32);
            for (b, e) in bins.iter().enumerate().take(bins.len() - 1) {
                gl += e.g;
                hl += e.h;
                cl += e.c;
                let cr = count as u32 - cl;
                if cl < msl || cr < msl {
                    continue;
                }
                let (gr, hr) = (g - gl, h - hl);
                if hl < MIN_HESSIAN_TO_SPLIT || hr < MIN_HESSIAN_TO_SPLIT {
                    continue;
                }
                let gain = gl * gl / (hl + l2) + gr * gr / (hr + l2) - parent;
                if gain > best.as_ref().map_or(tree::MIN_GAIN, |s| s.gain + tree::MIN_GAIN) {
                    best = Some(SplitInfo {
                        gain,
                        feature: j,
                        bin: b as u8,
                    });
                }
            }
        }
        best
    }

    fn make_leaf(&self, node: usize, members: Vec<u32>, hist: Vec<Bin>) -> Leaf {
        let j0 = &hist[self.offsets[0]..self.offsets[1]];
        let (g, h) = j0.iter().fold((0.0, 0.0), |(g, h), e| (g + e.g, h + e.h));
        let split = self.best_split(&hist, g, h, members.len());
        Leaf {
            node,
            members,
            hist,
            g,
            h,
            split,
        }
    }

    /// Leaf-wise growth up to `max_leaf_nodes`. Returns the tree and, per
    /// leaf, its value and member positions.
    fn grow(&mut self, grad: &[f64], hess: &[f64], n_features: usize) -> (RegressionTree, Vec<(f64, Vec<u32>)>) {
        let all: Vec<u32> = (0..self.rows.len() as u32).collect();
        let hist = self.histogram(&all, grad, hess);
        let mut nodes = vec![Node::Leaf { value: 0.0 }];
        let mut open = vec![self.make_leaf(0, all, hist)];

        while open.len() < self.cfg.max_leaf_nodes {
            // highest gain first; ties go to the earliest-created leaf
            let pick = open
                .iter()
                .enumerate()
                .filter(|(_, l)| l.split.is_some())
                .max_by(|(ia, a), (ib, b)| {
                    let ga = a.split.as_ref().unwrap().gain;
                    let gb = b.split.as_ref().unwrap().gain;
                    ga.total_cmp(&gb).then(ib.cmp(ia))
                })
                .map(|(i, _)| i);
            let Some(i) = pick else { break };
            let leaf = open.remove(i);
            let split = leaf.split.as_ref().unwrap();
            let (feature, bin) = (split.feature, split.bin);
            let cols = self.binned.cols;
            let (left, right): (Vec<u32>, Vec<u32>) = leaf.members.iter().partition(|&&m| {
                self.binned.bins[self.rows[m as usize] as usize * cols + feature] <= bin
            });
            let (small, large_is_left) = if left.len() <= right.len() {
                (&left, false)
            } else {
                (&right, true)
            };
            let small_hist = self.histogram(small, grad, hess);
            let large_hist: Vec<Bin> = leaf
                .hist
                .iter()
                .zip(&small_hist)
                .map(|(p, s)| Bin {
                    g: p.g - s.g,
                    h: p.h - s.h,
                    c: p.c - s.c,
                })
                .collect();
            let (lh, rh) = if large_is_left {
                (large_hist, small_hist)
            } else {
                (small_hist, large_hist)
            };
            let l_id = nodes.len();
            let r_id = l_id + 1;
            nodes.push(Node::Leaf { value: 0.0 });
            nodes.push(Node::Leaf { value: 0.0 });
            nodes[leaf.node] = Node::Split {
                feature,
                threshold: self.binner.edges(feature)[bin as usize],
                left: l_id,
                right: r_id,
            };
            open.push(self.make_leaf(l_id, left, lh));
            open.push(self.make_leaf(r_id, right, rh));
        }
        let done = open;

        let l2 = self.cfg.l2_regularization;
        let lr = self.cfg.learning_rate;
        let mut leaves = Vec::with_capacity(done.len());
        for leaf in done {
            let value = if leaf.h + l2 > 0.0 {
                -leaf.g / (leaf.h + l2) * lr
            } else {
                0.0
            };
            nodes[leaf.node] = Node::Leaf { value };
            leaves.push((value, leaf.members));
        }
        (
            RegressionTree {
                nodes,
                n_features,
            },
            leaves,
        )
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn one_d(values: &[f64]) -> Matrix {
        let rows: Vec<Vec<f64>> = values.iter().map(|&v| vec![v]).collect();
        Matrix::from_rows(&rows).unwrap()
    }

    fn small_cfg(t: usize) -> GbConfig {
        GbConfig {
            n_iterations: t,
            min_samples_leaf: 1,
            ..Default::default()
        }
    }

    #[test]
    fn constant_labels_rejected() {
        let x = one_d(&[0.0, 1.0, 2.0]);
        assert!(matches!(fit_gb(&x, &[true; 3], &small_cfg(5)), Err(Error::SingleClass(_))));
    }

    #[test]
    fn zero_learning_rate_rejected() {
        let x = one_d(&[0.0, 1.0]);
        let cfg = GbConfig {
            learning_rate: 0.0,
            ..small_cfg(1)
        };
        assert!(fit_gb(&x, &[true, false], &cfg).is_err());
    }

    #[test]
    fn separable_loss_strictly_decreases() {
        let xs: Vec<f64> = (0..40).map(|i| i as f64).collect();
        let x = one_d(&xs);
        let y: Vec<bool> = (0..40).map(|i| i >= 20).collect();
        let fit = fit_gb_traced(&x, &y, &small_cfg(10)).unwrap();
        assert_eq!(fit.loss_trace.len(), 11);
        for w in fit.loss_trace.windows(2) {
            assert!(w[1] < w[0], "loss trace {:?}", fit.loss_trace);
        }
    }

    #[test]
    fn tiny_learning_rate_stays_at_base_rate() {
        let x = one_d(&[0.0, 1.0, 2.0, 3.0]);
        let y = [false, true, true, true];
        let cfg = GbConfig {
            learning_rate: 1e-12,
            ..small_cfg(3)
        };
        let m = fit_gb(&x, &y, &cfg).unwrap();
        for v in [0.0, 3.0] {
            assert!((m.predict_proba(&[v]).unwrap() - 0.75).abs() < 1e-9);
        }
    }

    #[test]
    fn zero_trees_predicts_base_rate() {
        let m = GradientBoostedModel {
            baseline: (0.3f64 / 0.7).ln(),
            trees: vec![],
            n_features: 2,
            config: GbConfig::default(),
        };
        assert!((m.predict_proba(&[1.0, 2.0]).unwrap() - 0.3).abs() < 1e-15);
        assert!(m.predict_proba(&[1.0]).is_err());
    }

    #[test]
    fn hand_scored_model() {
        let t1 = RegressionTree::from_nodes(
            vec![
                Node::Split {
                    feature: 0,
                    threshold: 0.5,
                    left: 1,
                    right: 2,
                },
                Node::Leaf { value: -0.2 },
                Node::Leaf { value: 0.3 },
            ],
            2,
        )
        .unwrap();
        let t2 = RegressionTree::from_nodes(
            vec![
                Node::Split {
                    feature: 1,
                    threshold: 10.0,
                    left: 1,
                    right: 2,
                },
                Node::Leaf { value: 0.05 },
                Node::Leaf { value: -0.4 },
            ],
            2,
        )
        .unwrap();
        let m = GradientBoostedModel {
            baseline: 0.1,
            trees: vec![t1, t2],
            n_features: 2,
            config: GbConfig::default(),
        };
        for (x, raw) in [([0.0, 0.0], 0.1 - 0.2 + 0.05), ([1.0, 11.0], 0.1 + 0.3 - 0.4)] {
            let expected = 1.0 / (1.0 + (-raw as f64).exp());
            assert!((m.predict_proba(&x).unwrap() - expected).abs() < 1e-12);
        }
    }

    #[test]
    fn sigmoid_monotone_in_leaf_value() {
        let mut last = 0.0;
        for v in [-1e6, -5.0, 0.0, 2.0, 40.0, 1e6] {
            let t = RegressionTree::from_nodes(vec![Node::Leaf { value: v }], 1).unwrap();
            let m = GradientBoostedModel {
                baseline: 0.0,
                trees: vec![t],
                n_features: 1,
                config: GbConfig::default(),
            };
            let p = m.predict_proba(&[0.0]).unwrap();
            assert!((0.0..=1.0).contains(&p));
            assert!(p >= last);
            last = p;
        }
    }

    #[test]
    fn binner_uses_midpoints_when_few_values() {
        let x = one_d(&[3.0, 1.0, 2.0, 2.0, 1.0]);
        let b = Binner::fit(&x, 255);
        assert_eq!(b.edges(0), &[1.5, 2.5]);
        let bm = b.transform(&x);
        let bins: Vec<u8> = (0..5).map(|i| bm.get(i, 0)).collect();
        assert_eq!(bins, vec![2, 0, 1, 1, 0]);
    }

    #[test]
    fn binner_caps_bin_count() {
        let xs: Vec<f64> = (0..1000).map(|i| (i as f64).powf(1.3)).collect();
        let x = one_d(&xs);
        let b = Binner::fit(&x, 16);
        assert!(b.edges(0).len() <= 15);
        assert!(b.edges(0).windows(2).all(|w| w[0] < w[1]));
        let bm = b.transform(&x);
        for i in 0..1000 {
            let bin = bm.get(i, 0) as usize;
            let edges = b.edges(0);
            assert!(bin == edges.len() || xs[i] <= edges[bin]);
            assert!(bin == 0 || xs[i] > edges[bin - 1]);
        }
    }

    #[test]
    fn first_split_matches_exact_enumeration() {
        // with fewer distinct values than bins, the first stump must pick the
        // same split as an exact search over all midpoints
        let rows: Vec<Vec<f64>> = (0..30)
            .map(|i| vec![(i % 7) as f64, ((i * 3) % 5) as f64 * 0.5])
            .collect();
        let x = Matrix::from_rows(&rows).unwrap();
        let y: Vec<bool> = (0..30).map(|i| (i % 7) >= 3 && i % 4 != 0).collect();
        let cfg = GbConfig {
            max_leaf_nodes: 2,
            ..small_cfg(1)
        };
        let m = fit_gb(&x, &y, &cfg).unwrap();

        let rate = y.iter().filter(|&&v| v).count() as f64 / 30.0;
        let g: Vec<f64> = y.iter().map(|&v| rate - if v { 1.0 } else { 0.0 }).collect();
        let h = rate * (1.0 - rate);
        let (gt, ht) = (g.iter().sum::<f64>(), h * 30.0);
        let mut best = (f64::NEG_INFINITY, 0, 0.0);
        for j in 0..2 {
            let mut vals = x.column(j);
            vals.sort_by(f64::total_cmp);
            vals.dedup();
            for w in vals.windows(2) {
                let t = (w[0] + w[1]) / 2.0;
                let (mut gl, mut hl) = (0.0, 0.0);
                for i in 0..30 {
                    if x.get(i, j) <= t {
                        gl += g[i];
                        hl += h;
                    }
                }
                let gain = gl * gl / hl + (gt - gl).powi(2) / (ht - hl) - gt * gt / ht;
                if gain > best.0 + 1e-12 {
                    best = (gain, j, t);
                }
            }
        }
        match m.trees[0].nodes()[0] {
            Node::Split { feature, threshold, .. } => {
                assert_eq!(feature, best.1);
                assert_eq!(threshold, best.2);
            }
            _ => panic!("expected a split"),
        }
    }

    #[test]
    fn serde_roundtrip_is_exact() {
        let rows: Vec<Vec<f64>> = (0..200)
            .map(|i| vec![(i as f64 * 0.7).sin(), (i as f64 * 0.13).cos() * 3.0])
            .collect();
        let x = Matrix::from_rows(&rows).unwrap();
        let y: Vec<bool> = rows.iter().map(|r| r[0] + 0.3 * r[1] > 0.1).collect();
        let m = fit_gb(&x, &y, &GbConfig { n_iterations: 20, ..Default::default() }).unwrap();
        let back: GradientBoostedModel = serde_json::from_str(&serde_json::to_string(&m).unwrap()).unwrap();
        assert_eq!(m, back);
        for r in x.iter_rows() {
            assert_eq!(m.predict_proba(r).unwrap().to_bits(), back.predict_proba(r).unwrap().to_bits());
        }
    }
}
