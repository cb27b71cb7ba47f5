//! CART classification tree with Gini splits and per-node feature
//! subsampling.
//!
//! Fitting works on presorted per-feature row orders: each node owns one
//! contiguous segment in every feature's order, and a split stably partitions
//! those segments. Rows carry integer weights so a bootstrap resample is just a
//! weight vector.

use rand::seq::index;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::matrix::Matrix;
use crate::seed::Rng;

/// Splits must beat the parent by more than this (normalized Gini decrease).
pub(crate) const MIN_GAIN: f64 = 1e-12;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TreeConfig {
    /// Share of features considered at each split, in (0, 1].
    pub max_features_fraction: f64,
    pub min_samples_leaf: usize,
    pub max_depth: Option<usize>,
}

impl Default for TreeConfig {
    fn default() -> Self {
        Self {
            max_features_fraction: 1.0,
            min_samples_leaf: 1,
            max_depth: None,
        }
    }
}

impl TreeConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.max_features_fraction > 0.0 && self.max_features_fraction <= 1.0) {
            return Err(Error::InvalidInput(format!(
                "max_features_fraction={} outside (0, 1]",
                self.max_features_fraction
            )));
        }
        if self.min_samples_leaf == 0 {
            return Err(Error::InvalidInput("min_samples_leaf must be positive".into()));
        }
        Ok(())
    }

    /// Features drawn per split: `ceil(fraction * n_features)`.
    pub fn features_per_split(&self, n_features: usize) -> usize {
        ((self.max_features_fraction * n_features as f64 - 1e-9).ceil() as usize).clamp(1, n_features)
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Node {
    /// Rows with `x[feature] <= threshold` go left.
    Split {
        feature: usize,
        threshold: f64,
        left: usize,
        right: usize,
    },
    /// Killed fraction of the (weighted) training rows reaching this leaf.
    Leaf { value: f64 },
}

/// Binary tree stored as a node array; node 0 is the root.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "NodeArrays", into = "NodeArrays")]
pub struct DecisionTree {
    nodes: Vec<Node>,
    n_features: usize,
}

/// Column-wise node storage used in model files. `feature < 0` marks a leaf
/// whose value is kept in `value`; splits keep their threshold there.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub(crate) struct NodeArrays {
    pub(crate) n_features: usize,
    feature: Vec<i64>,
    value: Vec<f64>,
    left: Vec<u32>,
    right: Vec<u32>,
}

impl From<DecisionTree> for NodeArrays {
    fn from(t: DecisionTree) -> Self {
        nodes_to_arrays(&t.nodes, t.n_features)
    }
}

impl TryFrom<NodeArrays> for DecisionTree {
    type Error = Error;
    fn try_from(a: NodeArrays) -> Result<Self> {
        let nodes = arrays_to_nodes(&a)?;
        DecisionTree::from_nodes(nodes, a.n_features)
    }
}

pub(crate) fn nodes_to_arrays(nodes: &[Node], n_features: usize) -> NodeArrays {
    let mut a = NodeArrays {
        n_features,
        feature: Vec::with_capacity(nodes.len()),
        value: Vec::with_capacity(nodes.len()),
        left: Vec::with_capacity(nodes.len()),
        right: Vec::with_capacity(nodes.len()),
    };
    for n in nodes {
        match *n {
            Node::Split {
                feature,
                threshold,
                left,
                right,
            } => {
                a.feature.push(feature as i64);
                a.value.push(threshold);
                a.left.push(left as u32);
                a.right.push(right as u32);
            }
            Node::Leaf { value } => {
                a.feature.push(-1);
                a.value.push(value);
                a.left.push(0);
                a.right.push(0);
            }
        }
    }
    a
}

pub(crate) fn arrays_to_nodes(a: &NodeArrays) -> Result<Vec<Node>> {
    let n = a.feature.len();
    if a.value.len() != n || a.left.len() != n || a.right.len() != n {
        return Err(Error::InvalidInput("tree arrays have different lengths".into()));
    }
    Ok((0..n)
        .map(|i| {
            if a.feature[i] < 0 {
                Node::Leaf { value: a.value[i] }
            } else {
                Node::Split {
                    feature: a.feature[i] as usize,
                    threshold: a.value[i],
                    left: a.left[i] as usize,
                    right: a.right[i] as usize,
                }
            }
        })
        .collect())
}

/// Checks that `nodes` form a tree rooted at 0: children point forward, every
/// node is reached exactly once, features are in range.
pub(crate) fn validate_nodes(nodes: &[Node], n_features: usize) -> Result<()> {
    if nodes.is_empty() {
        return Err(Error::InvalidInput("tree has no nodes".into()));
    }
    let mut seen = vec![false; nodes.len()];
    seen[0] = true;
    for (i, n) in nodes.iter().enumerate() {
        if let Node::Split {
            feature,
            left,
            right,
            ..
        } = *n
        {
            if feature >= n_features {
                return Err(Error::InvalidInput(format!("node {i} splits on feature {feature}")));
            }
            for c in [left, right] {
                if c <= i || c >= nodes.len() || seen[c] {
                    return Err(Error::InvalidInput(format!("node {i} has invalid child {c}")));
                }
                seen[c] = true;
            }
        }
    }
    if seen.iter().any(|s| !s) {
        return Err(Error::InvalidInput("tree has unreachable nodes".into()));
    }
    Ok(())
}

#[inline]
pub(crate) fn route(nodes: &[Node], x: &[f64]) -> f64 {
    let mut i = 0;
    loop {
        match nodes[i] {
            Node::Leaf { value } => return value,
            Node::Split {
                feature,
                threshold,
                left,
                right,
            } => i = if x[feature] <= threshold { left } else { right },
        }
    }
}

impl DecisionTree {
    /// Wraps a hand-built node array after checking it is a proper tree.
    pub fn from_nodes(nodes: Vec<Node>, n_features: usize) -> Result<Self> {
        validate_nodes(&nodes, n_features)?;
        Ok(Self { nodes, n_features })
    }

    pub fn nodes(&self) -> &[Node] {
        &self.nodes
    }

    pub fn n_features(&self) -> usize {
        self.n_features
    }

    pub fn n_leaves(&self) -> usize {
        self.nodes.iter().filter(|n| matches!(n, Node::Leaf { .. })).count()
    }

    pub fn depth(&self) -> usize {
        fn go(nodes: &[Node], i: usize) -> usize {
            match nodes[i] {
                Node::Leaf { .. } => 0,
                Node::Split { left, right, .. } => 1 + go(nodes, left).max(go(nodes, right)),
            }
        }
        go(&self.nodes, 0)
    }

    pub fn predict_proba(&self, x: &[f64]) -> Result<f64> {
        if x.len() != self.n_features {
            return Err(Error::InvalidInput(format!(
                "row has {} features, tree expects {}",
                x.len(),
                self.n_features
            )));
        }
        Ok(route(&self.nodes, x))
    }

}

pub fn predict_proba_tree(tree: &DecisionTree, x: &[f64]) -> Result<f64> {
    tree.predict_proba(x)
}

/// Row orders of every column sorted by value (ties by row index). Shared by
/// all trees fitted on the same matrix.
#[derive(Debug, Clone)]
pub struct Presorted {
    order: Vec<Vec<u32>>,
}

impl Presorted {
    pub fn new(x: &Matrix) -> Self {
        let order = (0..x.cols())
            .map(|j| {
                let mut idx: Vec<u32> = (0..x.rows() as u32).collect();
                idx.sort_by(|&a, &b| {
                    x.get(a as usize, j)
                        .total_cmp(&x.get(b as usize, j))
                        .then(a.cmp(&b))
                });
                idx
            })
            .collect();
        Self { order }
    }
}

pub fn fit_tree(x: &Matrix, y: &[bool], cfg: &TreeConfig, rng: &mut Rng) -> Result<DecisionTree> {
    let weights = vec![1u32; x.rows()];
    fit_tree_weighted(x, y, &weights, None, cfg, rng)
}

/// Fits a tree where row `i` counts `weights[i]` times (0 drops it).
pub fn fit_tree_weighted(
    x: &Matrix,
    y: &[bool],
    weights: &[u32],
    presorted: Option<&Presorted>,
    cfg: &TreeConfig,
    rng: &mut Rng,
) -> Result<DecisionTree> {
    cfg.validate()?;
    let n_features = x.cols();
    if x.rows() == 0 || weights.iter().all(|&w| w == 0) {
        return Err(Error::InvalidInput("cannot fit a tree on empty input".into()));
    }
    if n_features == 0 {
        return Err(Error::InvalidInput("cannot fit a tree without features".into()));
    }
    if y.len() != x.rows() || weights.len() != x.rows() {
        return Err(Error::InvalidInput("labels/weights do not match row count".into()));
    }

    let owned;
    let presorted = match presorted {
        Some(p) => p,
        None => {
            owned = Presorted::new(x);
            &owned
        }
    };
    let order: Vec<Vec<u32>> = presorted
        .order
        .iter()
        .map(|o| o.iter().copied().filter(|&r| weights[r as usize] > 0).collect())
        .collect();
    let n_active = order[0].len();
    let mut builder = Builder {
        x,
        y,
        weights,
        cfg,
        n_try: cfg.features_per_split(n_features),
        order,
        scratch: vec![0; n_active],
        goes_left: vec![false; x.rows()],
        nodes: Vec::new(),
    };
    builder.grow(0, n_active, 0, rng);
    Ok(DecisionTree {
        nodes: builder.nodes,
        n_features,
    })
}

/// `(p² + (w-p)²) / w`; the weighted Gini impurity of a node is `w - score`.
#[inline]
fn purity_score(w: f64, p: f64) -> f64 {
    if w <= 0.0 {
        0.0
    } else {
        (p * p + (w - p) * (w - p)) / w
    }
}

struct Builder<'a> {
    x: &'a Matrix,
    y: &'a [bool],
    weights: &'a [u32],
    cfg: &'a TreeConfig,
    n_try: usize,
    order: Vec<Vec<u32>>,
    scratch: Vec<u32>,
    goes_left: Vec<bool>,
    nodes: Vec<Node>,
}

struct BestSplit {
    gain: f64,
    feature: usize,
    threshold: f64,
}

impl Builder<'_> {
    fn grow(&mut self, start: usize, end: usize, depth: usize, rng: &mut Rng) -> usize {
        let id = self.nodes.len();
        let (w, p) = self.order[0][start..end].iter().fold((0u64, 0u64), |(w, p), &r| {
            let wr = self.weights[r as usize] as u64;
            (w + wr, p + if self.y[r as usize] { wr } else { 0 })
        });
        let value = p as f64 / w as f64;
        self.nodes.push(Node::Leaf { value });

        let pure = p == 0 || p == w;
        let depth_capped = self.cfg.max_depth.is_some_and(|d| depth >= d);
        if pure || depth_capped || w < 2 * self.cfg.min_samples_leaf as u64 {
            return id;
        }
        let Some(best) = self.best_split(start, end, w as f64, p as f64, rng) else {
            return id;
        };

        // stable partition of every feature's segment
        for &r in &self.order[0][start..end] {
            self.goes_left[r as usize] = self.x.get(r as usize, best.feature) <= best.threshold;
        }
        let mut mid = start;
        for f in 0..self.order.len() {
            let seg = &mut self.order[f][start..end];
            let mut l = 0;
            let mut rcount = 0;
            for k in 0..seg.len() {
                let r = seg[k];
                if self.goes_left[r as usize] {
                    seg[l] = r;
                    l += 1;
                } else {
                    self.scratch[rcount] = r;
                    rcount += 1;
                }
            }
            seg[l..].copy_from_slice(&self.scratch[..rcount]);
            mid = start + l;
        }

        let left = self.grow(start, mid, depth + 1, rng);
        let right = self.grow(mid, end, depth + 1, rng);
        self.nodes[id] = Node::Split {
            feature: best.feature,
            threshold: best.threshold,
            left,
            right,
        };
        id
    }

    fn best_split(&self, start: usize, end: usize, w: f64, p: f64, rng: &mut Rng) -> Option<BestSplit> {
        let n_features = self.order.len();
        let mut features: Vec<usize> = if self.n_try >= n_features {
            (0..n_features).collect()
        } else {
            index::sample(rng, n_features, self.n_try).into_vec()
        };
        // ties between features resolve to the lower index
        features.sort_unstable();

        let msl = self.cfg.min_samples_leaf as f64;
        let parent = purity_score(w, p);
        let mut best: Option<BestSplit> = None;
        for &f in &features {
            let seg = &self.order[f][start..end];
            let (mut wl, mut pl) = (0.0, 0.0);
            for k in 0..seg.len() - 1 {
                let r = seg[k] as usize;
                let wr = self.weights[r] as f64;
                wl += wr;
                if self.y[r] {
                    pl += wr;
                }
                let v = self.x.get(r, f);
                let next = self.x.get(seg[k + 1] as usize, f);
                if v == next || wl < msl || w - wl < msl {
                    continue;
                }
                let gain = (purity_score(wl, pl) + purity_score(w - wl, p - pl) - parent) / w;
                if gain > best.as_ref().map_or(MIN_GAIN, |b| b.gain + MIN_GAIN) {
                    best = Some(BestSplit {
                        gain,
                        feature: f,
                        threshold: midpoint(v, next),
                    });
                }
            }
        }
        best
    }
}

/// Threshold strictly below `hi` and at least `lo`.
pub(crate) fn midpoint(lo: f64, hi: f64) -> f64 {
    let m = lo + (hi - lo) / 2.0;
    if m >= hi {
        lo
    } else {
        m
    }
}
