//! ADASYN adaptive synthetic minority oversampling.
//!
//! Minority rows whose neighbourhoods are dominated by the majority class are
//! "hard" and receive proportionally more synthetic neighbours. Synthetic rows
//! are linear interpolations between a minority seed and one of its minority
//! nearest neighbours.

use rand::Rng as _;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::matrix::Matrix;
use crate::seed;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AdasynConfig {
    /// Neighbour count used both for difficulty estimation and interpolation.
    pub k: usize,
    /// Fraction of the class deficit to fill; 1 equalizes the classes.
    pub beta: f64,
    pub seed: u64,
}

impl Default for AdasynConfig {
    fn default() -> Self {
        Self {
            k: 5,
            beta: 1.0,
            seed: 0,
        }
    }
}

/// Provenance of one appended row: `x[seed_row] + lambda * (x[neighbor_row] - x[seed_row])`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SyntheticRow {
    pub seed_row: usize,
    pub neighbor_row: usize,
    pub lambda: f64,
}

#[derive(Debug, Clone)]
pub struct Resampled {
    pub x: Matrix,
    pub y: Vec<bool>,
    /// One entry per appended row, in output order (rows `n..`).
    pub synthetic: Vec<SyntheticRow>,
    /// Synthetic count allotted to each minority row, indexed like `minority_rows`.
    pub allocation: Vec<usize>,
    pub minority_rows: Vec<usize>,
}

fn sq_dist(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum()
}

/// The `k` candidates nearest to `query` (itself excluded), ordered by
/// ascending distance with ties broken by lower row index.
fn nearest_among(points: &Matrix, query: usize, candidates: &[usize], k: usize) -> Vec<usize> {
    let q = points.row(query);
    let mut d: Vec<(f64, usize)> = candidates
        .iter()
        .filter(|&&c| c != query)
        .map(|&c| (sq_dist(q, points.row(c)), c))
        .collect();
    let cmp = |a: &(f64, usize), b: &(f64, usize)| a.0.total_cmp(&b.0).then(a.1.cmp(&b.1));
    if k < d.len() {
        d.select_nth_unstable_by(k, cmp);
        d.truncate(k);
    }
    d.sort_unstable_by(cmp);
    d.into_iter().map(|(_, i)| i).collect()
}

/// Euclidean k-nearest rows of `query_row`, self excluded, nearest first;
/// equal distances are ordered by row index.
pub fn knn_indices(points: &Matrix, query_row: usize, k: usize) -> Result<Vec<usize>> {
    let n = points.rows();
    if query_row >= n {
        return Err(Error::InvalidInput(format!("query row {query_row} out of range for {n} rows")));
    }
    if k == 0 || k >= n {
        return Err(Error::InvalidInput(format!("k={k} must be in 1..{n}")));
    }
    let all: Vec<usize> = (0..n).collect();
    Ok(nearest_among(points, query_row, &all, k))
}

/// Per-column min-max scaling to [0, 1]; constant columns become 0.
fn min_max_scaled(x: &Matrix) -> Matrix {
    let (n, d) = (x.rows(), x.cols());
    let mut lo = vec![f64::INFINITY; d];
    let mut hi = vec![f64::NEG_INFINITY; d];
    for r in x.iter_rows() {
        for j in 0..d {
            lo[j] = lo[j].min(r[j]);
            hi[j] = hi[j].max(r[j]);
        }
    }
    let mut out = Matrix::zeros(n, d);
    for i in 0..n {
        for j in 0..d {
            let span = hi[j] - lo[j];
            if span > 0.0 {
                out.set(i, j, (x.get(i, j) - lo[j]) / span);
            }
        }
    }
    out
}

/// Splits `total` into integer parts proportional to `weights` (largest
/// remainder, ties to the lower index). Uniform when all weights are zero.
pub fn largest_remainder(weights: &[f64], total: usize) -> Vec<usize> {
    if weights.is_empty() {
        return Vec::new();
    }
    let sum: f64 = weights.iter().sum();
    let quotas: Vec<f64> = if sum > 0.0 {
        weights.iter().map(|w| w / sum * total as f64).collect()
    } else {
        vec![total as f64 / weights.len() as f64; weights.len()]
    };
    let mut parts: Vec<usize> = quotas.iter().map(|q| q.floor() as usize).collect();
    let assigned: usize = parts.iter().sum();
    let mut order: Vec<usize> = (0..weights.len()).collect();
    order.sort_by(|&a, &b| {
        let fa = quotas[a] - quotas[a].floor();
        let fb = quotas[b] - quotas[b].floor();
        fb.total_cmp(&fa).then(a.cmp(&b))
    });
    for &i in order.iter().take(total.saturating_sub(assigned)) {
        parts[i] += 1;
    }
    parts
}

/// ADASYN with full provenance of the appended rows.
pub fn adasyn_detailed(x: &Matrix, y: &[bool], cfg: &AdasynConfig) -> Result<Resampled> {
    let n = x.rows();
    if y.len() != n {
        return Err(Error::InvalidInput(format!("{} labels for {n} rows", y.len())));
    }
    let n_pos = y.iter().filter(|&&v| v).count();
    let n_neg = n - n_pos;
    if n_pos == 0 || n_neg == 0 {
        return Err(Error::SingleClass("ADASYN"));
    }
    if cfg.k == 0 || cfg.k >= n {
        return Err(Error::InvalidInput(format!("ADASYN k={} must be in 1..{n}", cfg.k)));
    }
    if !(0.0..=1.0).contains(&cfg.beta) {
        return Err(Error::InvalidInput(format!("ADASYN beta={} outside [0, 1]", cfg.beta)));
    }

    let minority_label = n_pos < n_neg;
    let minority_rows: Vec<usize> = (0..n).filter(|&i| y[i] == minority_label).collect();
    let deficit = n_pos.abs_diff(n_neg);
    let total = (deficit as f64 * cfg.beta).round() as usize;

    let unchanged = |allocation| Resampled {
        x: x.clone(),
        y: y.to_vec(),
        synthetic: Vec::new(),
        allocation,
        minority_rows: minority_rows.clone(),
    };
    if total == 0 {
        return Ok(unchanged(vec![0; minority_rows.len()]));
    }

    // neighbour search runs on scaled copies; emitted coordinates are raw
    let scaled = min_max_scaled(x);
    let all_rows: Vec<usize> = (0..n).collect();
    let k = cfg.k;
    let difficulty: Vec<f64> = minority_rows
        .par_iter()
        .map(|&i| {
            let nn = nearest_among(&scaled, i, &all_rows, k);
            nn.iter().filter(|&&j| y[j] != minority_label).count() as f64 / k as f64
        })
        .collect();
    let allocation = largest_remainder(&difficulty, total);

    let k_min = k.min(minority_rows.len() - 1);
    let minority_neighbors: Vec<Vec<usize>> = minority_rows
        .par_iter()
        .zip(allocation.par_iter())
        .map(|(&i, &g)| {
            if g == 0 || k_min == 0 {
                Vec::new()
            } else {
                nearest_among(&scaled, i, &minority_rows, k_min)
            }
        })
        .collect();

    let mut rng = seed::rng(cfg.seed);
    let mut out = x.clone();
    let mut labels = y.to_vec();
    let mut synthetic = Vec::with_capacity(total);
    let mut row = vec![0.0; x.cols()];
    for (pos, &i) in minority_rows.iter().enumerate() {
        let nbrs = &minority_neighbors[pos];
        for _ in 0..allocation[pos] {
            // a lone minority row can only be copied
            let z = if nbrs.is_empty() {
                i
            } else {
                nbrs[rng.random_range(0..nbrs.len())]
            };
            let lambda: f64 = rng.random();
            let (xi, xz) = (x.row(i), x.row(z));
            for j in 0..row.len() {
                row[j] = xi[j] + lambda * (xz[j] - xi[j]);
            }
            out.push_row(&row)?;
            labels.push(minority_label);
            synthetic.push(SyntheticRow {
                seed_row: i,
                neighbor_row: z,
                lambda,
            });
        }
    }
    Ok(Resampled {
        x: out,
        y: labels,
        synthetic,
        allocation,
        minority_rows,
    })
}

/// Original rows first, then the synthetic minority rows.
pub fn adasyn(x: &Matrix, y: &[bool], cfg: &AdasynConfig) -> Result<(Matrix, Vec<bool>)> {
    let r = adasyn_detailed(x, y, cfg)?;
    Ok((r.x, r.y))
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn line(n: usize) -> Matrix {
        let rows: Vec<Vec<f64>> = (0..n).map(|i| vec![i as f64]).collect();
        Matrix::from_rows(&rows).unwrap()
    }

    #[test]
    fn knn_on_a_line() {
        let m = line(4);
        assert_eq!(knn_indices(&m, 0, 2).unwrap(), vec![1, 2]);
        assert_eq!(knn_indices(&m, 0, 3).unwrap(), vec![1, 2, 3]);
        assert_eq!(knn_indices(&m, 2, 2).unwrap(), vec![1, 3]);
        assert!(knn_indices(&m, 0, 4).is_err());
        assert!(knn_indices(&m, 0, 0).is_err());
    }

    #[test]
    fn knn_duplicates_break_ties_by_index() {
        let m = Matrix::from_rows(&[[1.0, 1.0], [0.0, 0.0], [1.0, 1.0], [1.0, 1.0], [0.0, 0.0]]).unwrap();
        // exhaustive oracle: sort every other row by (distance, index)
        for q in 0..5 {
            let mut all: Vec<(f64, usize)> = (0..5)
                .filter(|&j| j != q)
                .map(|j| (sq_dist(m.row(q), m.row(j)), j))
                .collect();
            all.sort_by(|a, b| a.0.partial_cmp(&b.0).unwrap().then(a.1.cmp(&b.1)));
            for k in 1..5 {
                let expected: Vec<usize> = all.iter().take(k).map(|p| p.1).collect();
                assert_eq!(knn_indices(&m, q, k).unwrap(), expected);
            }
        }
    }

    #[test]
    fn largest_remainder_sums_exactly() {
        assert_eq!(largest_remainder(&[1.0, 1.0, 1.0], 4), vec![2, 1, 1]);
        assert_eq!(largest_remainder(&[0.0, 0.0], 3), vec![2, 1]);
        assert_eq!(largest_remainder(&[0.2, 0.0, 0.6], 4), vec![1, 0, 3]);
    }

    #[test]
    fn balanced_input_is_unchanged() {
        let x = line(6);
        let y = vec![true, false, true, false, true, false];
        let (x2, y2) = adasyn(&x, &y, &AdasynConfig::default()).unwrap();
        assert_eq!(x2, x);
        assert_eq!(y2, y);
    }

    #[test]
    fn two_minority_six_majority() {
        // hand trace, k = 2:
        //  minority a=(0,0): nearest are (0.1,0)[maj] and (0,0.1)[maj] -> r = 1
        //  minority b=(5,5): nearest are (5.1,5)[maj] and (0.2,0)... (far) -> r = 1 as well
        // both r equal -> G = 4 split 2/2; each interpolates towards the other minority row
        let x = Matrix::from_rows(&[
            [0.0, 0.0],
            [0.1, 0.0],
            [0.0, 0.1],
            [0.1, 0.1],
            [5.0, 5.0],
            [5.1, 5.0],
            [5.0, 5.1],
            [5.1, 5.1],
        ])
        .unwrap();
        let y = vec![false, true, true, true, false, true, true, true];
        let cfg = AdasynConfig { k: 2, beta: 1.0, seed: 3 };
        let r = adasyn_detailed(&x, &y, &cfg).unwrap();
        assert_eq!(r.minority_rows, vec![0, 4]);
        assert_eq!(r.allocation, vec![2, 2]);
        assert_eq!(r.x.rows(), 12);
        assert_eq!(r.y.iter().filter(|&&v| !v).count(), 6);
        for s in &r.synthetic {
            assert_eq!(s.neighbor_row, if s.seed_row == 0 { 4 } else { 0 });
        }
    }

    #[test]
    fn pure_minority_neighbourhood_gets_nothing() {
        // minority cluster at 0..3 is isolated; a single minority row sits in the majority
        let mut rows: Vec<[f64; 1]> = vec![[0.0], [0.01], [0.02], [0.03]];
        rows.extend((0..8).map(|i| [10.0 + i as f64 * 0.01]));
        rows.push([10.035]);
        let y: Vec<bool> = (0..13).map(|i| (4..12).contains(&i)).collect();
        let x = Matrix::from_rows(&rows).unwrap();
        let r = adasyn_detailed(&x, &y, &AdasynConfig { k: 3, beta: 1.0, seed: 1 }).unwrap();
        assert_eq!(r.minority_rows, vec![0, 1, 2, 3, 12]);
        assert_eq!(r.allocation, vec![0, 0, 0, 0, 3]);
    }

    #[test]
    fn single_class_and_bad_k() {
        let x = line(4);
        assert!(matches!(
            adasyn(&x, &[true; 4], &AdasynConfig::default()),
            Err(Error::SingleClass(_))
        ));
        let y = vec![true, true, true, false];
        assert!(adasyn(&x, &y, &AdasynConfig { k: 4, ..Default::default() }).is_err());
        assert!(adasyn(&x, &y, &AdasynConfig { k: 0, ..Default::default() }).is_err());
    }

    fn toy() -> impl Strategy<Value = (Vec<Vec<f64>>, Vec<bool>, u64)> {
        (8usize..40, 1usize..4, any::<u64>()).prop_flat_map(|(n, d, s)| {
            (
                proptest::collection::vec(proptest::collection::vec(-5.0f64..5.0, d), n),
                proptest::collection::vec(proptest::bool::weighted(0.25), n),
                Just(s),
            )
        })
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(64))]

        #[test]
        fn originals_kept_and_interpolation_holds((rows, y, s) in toy()) {
            let pos = y.iter().filter(|&&v| v).count();
            prop_assume!(pos >= 1 && pos < y.len());
            let x = Matrix::from_rows(&rows).unwrap();
            let cfg = AdasynConfig { k: 3.min(rows.len() - 1), beta: 1.0, seed: s };
            let r = adasyn_detailed(&x, &y, &cfg).unwrap();
            for i in 0..x.rows() {
                prop_assert_eq!(r.x.row(i), x.row(i));
                prop_assert_eq!(r.y[i], y[i]);
            }
            let minority = r.minority_rows.len();
            let after_min = r.y.iter().filter(|&&v| v == y[r.minority_rows[0]]).count();
            let after_maj = r.y.len() - after_min;
            prop_assert!(after_min.abs_diff(after_maj) <= minority);
            for (s, out) in r.synthetic.iter().zip(x.rows()..) {
                prop_assert!((0.0..=1.0).contains(&s.lambda));
                for j in 0..x.cols() {
                    let (a, b) = (x.get(s.seed_row, j), x.get(s.neighbor_row, j));
                    let v = r.x.get(out, j);
                    prop_assert!((v - (a + s.lambda * (b - a))).abs() <= 1e-9);
                    prop_assert!(v >= a.min(b) - 1e-9 && v <= a.max(b) + 1e-9);
                }
            }
            let again = adasyn_detailed(&x, &y, &cfg).unwrap();
            prop_assert_eq!(again.x, r.x);
        }
    }
}
