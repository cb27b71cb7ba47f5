//! Imbalance-robust evaluation metrics and per-project reports.
//!
//! Killed is the positive class throughout.

use std::collections::BTreeMap;
use std::io::{Read, Write};
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct ConfusionMatrix {
    pub tp: u64,
    pub fp: u64,
    pub tn: u64,
    #[serde(rename = "fn")]
    pub fn_: u64,
}

impl ConfusionMatrix {
    pub fn from_predictions(predicted: &[bool], actual: &[bool]) -> Self {
        let mut cm = Self::default();
        for (&p, &a) in predicted.iter().zip(actual) {
            match (p, a) {
                (true, true) => cm.tp += 1,
                (true, false) => cm.fp += 1,
                (false, false) => cm.tn += 1,
                (false, true) => cm.fn_ += 1,
            }
        }
        cm
    }

    pub fn total(&self) -> u64 {
        self.tp + self.fp + self.tn + self.fn_
    }

    /// Swaps the roles of the two classes.
    pub fn swapped(&self) -> Self {
        Self {
            tp: self.tn,
            tn: self.tp,
            fp: self.fn_,
            fn_: self.fp,
        }
    }
}

/// Average 1-based ranks; tied values share the mean of their positions.
pub fn average_ranks(values: &[f64]) -> Vec<f64> {
    let mut order: Vec<usize> = (0..values.len()).collect();
    order.sort_by(|&a, &b| values[a].total_cmp(&values[b]));
    let mut ranks = vec![0.0; values.len()];
    let mut i = 0;
    while i < order.len() {
        let mut j = i + 1;
        while j < order.len() && values[order[j]] == values[order[i]] {
            j += 1;
        }
        let avg = (i + 1 + j) as f64 / 2.0;
        for &k in &order[i..j] {
            ranks[k] = avg;
        }
        i = j;
    }
    ranks
}

/// Area under the ROC curve via the Mann-Whitney rank sum, which counts tied
/// positive/negative pairs as one half.
pub fn roc_auc(scores: &[f64], labels: &[bool]) -> Result<f64> {
    if scores.len() != labels.len() {
        return Err(Error::InvalidInput("scores and labels differ in length".into()));
    }
    if scores.iter().any(|s| s.is_nan()) {
        return Err(Error::InvalidInput("NaN score".into()));
    }
    let n_pos = labels.iter().filter(|&&l| l).count();
    let n_neg = labels.len() - n_pos;
    if n_pos == 0 || n_neg == 0 {
        return Err(Error::Undefined("AUC needs both classes"));
    }
    let ranks = average_ranks(scores);
    let rank_sum: f64 = ranks.iter().zip(labels).filter(|(_, &l)| l).map(|(r, _)| r).sum();
    let (p, n) = (n_pos as f64, n_neg as f64);
    Ok((rank_sum - p * (p + 1.0) / 2.0) / (p * n))
}

/// Matthews correlation; 0 when any marginal is empty.
pub fn mcc(cm: &ConfusionMatrix) -> f64 {
    let (tp, fp, tn, fn_) = (cm.tp as f64, cm.fp as f64, cm.tn as f64, cm.fn_ as f64);
    // grouped so that swapping the classes multiplies the same pairs
    let denom = ((tp + fp) * (tn + fn_)) * ((tp + fn_) * (tn + fp));
    if denom == 0.0 {
        return 0.0;
    }
    (tp * tn - fp * fn_) / denom.sqrt()
}

/// Balanced accuracy rescaled so chance is 0 and perfect is 1.
pub fn balanced_accuracy_adjusted(cm: &ConfusionMatrix) -> Result<f64> {
    let pos = cm.tp + cm.fn_;
    let neg = cm.tn + cm.fp;
    if pos == 0 || neg == 0 {
        return Err(Error::Undefined("balanced accuracy needs both classes"));
    }
    let tpr = cm.tp as f64 / pos as f64;
    let tnr = cm.tn as f64 / neg as f64;
    let bal = (tpr + tnr) / 2.0;
    Ok((bal - 0.5) / 0.5)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ProjectRow {
    pub project: String,
    pub auc: Option<f64>,
    pub mcc: f64,
    pub bal_acc_adj: Option<f64>,
    pub n: usize,
    pub killed: usize,
    pub survived: usize,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Aggregate {
    pub mean: Option<f64>,
    pub median: Option<f64>,
    pub defined: usize,
    pub undefined: usize,
}

impl Aggregate {
    pub fn of(values: impl IntoIterator<Item = Option<f64>>) -> Self {
        let mut defined = Vec::new();
        let mut undefined = 0;
        for v in values {
            match v {
                Some(x) => defined.push(x),
                None => undefined += 1,
            }
        }
        defined.sort_by(f64::total_cmp);
        let n = defined.len();
        let mean = (n > 0).then(|| defined.iter().sum::<f64>() / n as f64);
        let median = (n > 0).then(|| {
            if n % 2 == 1 {
                defined[n / 2]
            } else {
                (defined[n / 2 - 1] + defined[n / 2]) / 2.0
            }
        });
        Self {
            mean,
            median,
            defined: n,
            undefined,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Summary {
    pub projects: usize,
    pub auc: Aggregate,
    pub mcc: Aggregate,
    pub bal_acc_adj: Aggregate,
    /// Projects whose AUC is defined and below 0.5.
    pub worse_than_random: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvalReport {
    pub rows: Vec<ProjectRow>,
    pub summary: Summary,
}

impl EvalReport {
    /// Builds a report, recomputing every aggregate from `rows`.
    pub fn from_rows(rows: Vec<ProjectRow>) -> Self {
        let summary = Summary {
            projects: rows.len(),
            auc: Aggregate::of(rows.iter().map(|r| r.auc)),
            mcc: Aggregate::of(rows.iter().map(|r| Some(r.mcc))),
            bal_acc_adj: Aggregate::of(rows.iter().map(|r| r.bal_acc_adj)),
            worse_than_random: rows.iter().filter(|r| r.auc.is_some_and(|a| a < 0.5)).count(),
        };
        Self { rows, summary }
    }

    pub fn aucs(&self) -> Vec<f64> {
        self.rows.iter().filter_map(|r| r.auc).collect()
    }
}

/// Scores one project's mutants. `threshold` is inclusive on the Killed side.
pub fn project_row(project: &str, scores: &[f64], labels: &[bool], threshold: f64) -> ProjectRow {
    let predicted: Vec<bool> = scores.iter().map(|&s| s >= threshold).collect();
    let cm = ConfusionMatrix::from_predictions(&predicted, labels);
    let killed = labels.iter().filter(|&&l| l).count();
    ProjectRow {
        project: project.to_string(),
        auc: roc_auc(scores, labels).ok(),
        mcc: mcc(&cm),
        bal_acc_adj: balanced_accuracy_adjusted(&cm).ok(),
        n: labels.len(),
        killed,
        survived: labels.len() - killed,
    }
}

/// Groups scored records by project (first-appearance order) and builds the
/// report.
pub fn evaluate_scores(projects: &[&str], scores: &[f64], labels: &[bool], threshold: f64) -> Result<EvalReport> {
    if scores.is_empty() {
        return Err(Error::InvalidInput("cannot evaluate an empty test set".into()));
    }
    if projects.len() != scores.len() || labels.len() != scores.len() {
        return Err(Error::InvalidInput("projects, scores and labels differ in length".into()));
    }
    let mut order: Vec<&str> = Vec::new();
    let mut groups: BTreeMap<&str, (Vec<f64>, Vec<bool>)> = BTreeMap::new();
    for ((&p, &s), &l) in projects.iter().zip(scores).zip(labels) {
        let g = groups.entry(p).or_insert_with(|| {
            order.push(p);
            (Vec::new(), Vec::new())
        });
        g.0.push(s);
        g.1.push(l);
    }
    let rows = order
        .iter()
        .map(|p| {
            let (s, l) = &groups[p];
            project_row(p, s, l, threshold)
        })
        .collect();
    Ok(EvalReport::from_rows(rows))
}

const REPORT_HEADER: [&str; 7] = ["project", "auc", "mcc", "bal_acc_adj", "n", "killed", "survived"];

fn opt_cell(v: Option<f64>) -> String {
    v.map(|x| x.to_string()).unwrap_or_default()
}

pub fn write_report_csv<W: Write>(report: &EvalReport, w: W) -> Result<()> {
    let mut wtr = csv::Writer::from_writer(w);
    wtr.write_record(REPORT_HEADER)?;
    for r in &report.rows {
        wtr.write_record([
            r.project.clone(),
            opt_cell(r.auc),
            r.mcc.to_string(),
            opt_cell(r.bal_acc_adj),
            r.n.to_string(),
            r.killed.to_string(),
            r.survived.to_string(),
        ])?;
    }
    wtr.flush().map_err(|e| Error::Csv(e.into()))?;
    Ok(())
}

pub fn read_report_csv<R: Read>(r: R) -> Result<EvalReport> {
    let mut rdr = csv::Reader::from_reader(r);
    let headers = rdr.headers()?.clone();
    let idx = |name: &str| {
        headers
            .iter()
            .position(|h| h == name)
            .ok_or_else(|| Error::MissingColumn(name.to_string()))
    };
    let cols: Vec<usize> = REPORT_HEADER.iter().map(|h| idx(h)).collect::<Result<_>>()?;
    let mut rows = Vec::new();
    for (i, rec) in rdr.records().enumerate() {
        let rec = rec?;
        let row = i + 1;
        let cell = |c: usize| rec.get(cols[c]).unwrap_or("").trim();
        let parse_f = |c: usize| -> Result<Option<f64>> {
            let s = cell(c);
            if s.is_empty() {
                return Ok(None);
            }
            s.parse::<f64>()
                .ok()
                .filter(|v| v.is_finite())
                .map(Some)
                .ok_or_else(|| Error::Parse {
                    row,
                    column: REPORT_HEADER[c].to_string(),
                    value: s.to_string(),
                })
        };
        let parse_u = |c: usize| -> Result<usize> {
            cell(c).parse::<usize>().map_err(|_| Error::Parse {
                row,
                column: REPORT_HEADER[c].to_string(),
                value: cell(c).to_string(),
            })
        };
        let mcc = parse_f(2)?.ok_or_else(|| Error::Parse {
            row,
            column: "mcc".into(),
            value: String::new(),
        })?;
        rows.push(ProjectRow {
            project: cell(0).to_string(),
            auc: parse_f(1)?,
            mcc,
            bal_acc_adj: parse_f(3)?,
            n: parse_u(4)?,
            killed: parse_u(5)?,
            survived: parse_u(6)?,
        });
    }
    Ok(EvalReport::from_rows(rows))
}

pub fn load_report_csv(path: &Path) -> Result<EvalReport> {
    let f = std::fs::File::open(path).map_err(|e| Error::io(path, e))?;
    read_report_csv(f)
}
