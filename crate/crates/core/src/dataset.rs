//! Mutant feature data model, CSV ingestion, coverage filtering, project
//! splits and frequency encoding of categorical features.

use std::collections::{BTreeMap, HashMap, HashSet};
use std::fs::File;
use std::io::{Read, Write};
use std::path::Path;

use rand::seq::SliceRandom;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::matrix::Matrix;
use crate::seed;

pub const NUM_EXECUTED: &str = "numExecuted";
pub const NUM_TEST_COVER: &str = "numTestCover";
pub const NUM_ASSERT_IN_TM: &str = "numAssertInTM";
pub const NUM_ASSERT_IN_TC: &str = "numAssertInTC";
pub const MUTATOR_CLASS: &str = "MutatorClass";
pub const RETURN_TYPE: &str = "returnType";

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum FeatureKind {
    Numeric,
    Categorical,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Level {
    Dynamic,
    Static,
}

/// Code granularity a metric is computed at. Static metrics carry a
/// `mm`/`cc`/`pp` name prefix for method/class/package level.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Granularity {
    Mutant,
    Method,
    Class,
    Package,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct FeatureSpec {
    pub name: String,
    pub kind: FeatureKind,
    pub level: Level,
    pub granularity: Granularity,
}

impl FeatureSpec {
    pub fn new(name: &str, kind: FeatureKind, level: Level, granularity: Granularity) -> Self {
        Self {
            name: name.to_string(),
            kind,
            level,
            granularity,
        }
    }

    pub fn is_categorical(&self) -> bool {
        self.kind == FeatureKind::Categorical
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(try_from = "SchemaFile", into = "SchemaFile")]
pub struct FeatureSchema {
    features: Vec<FeatureSpec>,
}

#[derive(Serialize, Deserialize)]
struct SchemaFile {
    features: Vec<FeatureSpec>,
}

impl TryFrom<SchemaFile> for FeatureSchema {
    type Error = Error;
    fn try_from(f: SchemaFile) -> Result<Self> {
        FeatureSchema::new(f.features)
    }
}

impl From<FeatureSchema> for SchemaFile {
    fn from(s: FeatureSchema) -> Self {
        SchemaFile {
            features: s.features,
        }
    }
}

/// Static metric names from the default feature list, in order, with the
/// granularity implied by their prefix.
const STATIC_NUMERIC: &[&str] = &[
    "ppavcc",
    "cchalsteadCumulativeBugs",
    "ppRVF",
    "ppnumberOfMethods",
    "ppnumberOfClasses",
    "ppmaintainabilityIndexNC",
    "ppfanout",
    "ccmaintainabilityIndex",
    "mmhalsteadDifficulty",
    "ppabstractness",
    "ppmaintainabilityIndex",
    "ccexternalMethodCalls",
    "mminstanceVariablesReferenced",
    "ccimportedPackages",
    "ppdistance",
    "ccfanIn",
    "ppfanin",
    "pploc",
    "ccmaintainabilityIndexNC",
    "mmexternalMethodsCalled",
    "ppinstability",
    "ppmaxcc",
    "mmvariablesReferenced",
    "ccunweightedClassSize",
];

fn granularity_from_prefix(name: &str) -> Granularity {
    match name.get(..2) {
        Some("mm") => Granularity::Method,
        Some("cc") => Granularity::Class,
        Some("pp") => Granularity::Package,
        _ => Granularity::Mutant,
    }
}

impl FeatureSchema {
    pub fn new(features: Vec<FeatureSpec>) -> Result<Self> {
        let mut seen = HashSet::new();
        for f in &features {
            if f.name.is_empty() {
                return Err(Error::Schema("empty feature name".into()));
            }
            if f.name == "project" || f.name == "label" {
                return Err(Error::Schema(format!("`{}` is a reserved column", f.name)));
            }
            if !seen.insert(f.name.as_str()) {
                return Err(Error::Schema(format!("duplicate feature `{}`", f.name)));
            }
        }
        Ok(Self { features })
    }

    /// The 30-feature default: the 29 listed metrics plus `numAssertInTM`.
    pub fn default_schema() -> Self {
        use FeatureKind::*;
        use Granularity::*;
        use Level::*;

        let mut features = vec![
            FeatureSpec::new(NUM_EXECUTED, Numeric, Dynamic, Mutant),
            FeatureSpec::new(MUTATOR_CLASS, Categorical, Static, Mutant),
            FeatureSpec::new(NUM_ASSERT_IN_TC, Numeric, Dynamic, Mutant),
            FeatureSpec::new(NUM_TEST_COVER, Numeric, Dynamic, Mutant),
        ];
        for &name in STATIC_NUMERIC {
            features.push(FeatureSpec::new(name, Numeric, Static, granularity_from_prefix(name)));
            // keep the listed position of returnType (between ppdistance and ccfanIn)
            if name == "ppdistance" {
                features.push(FeatureSpec::new(RETURN_TYPE, Categorical, Static, Method));
            }
        }
        features.push(FeatureSpec::new(NUM_ASSERT_IN_TM, Numeric, Dynamic, Mutant));
        Self { features }
    }

    pub fn features(&self) -> &[FeatureSpec] {
        &self.features
    }

    pub fn len(&self) -> usize {
        self.features.len()
    }

    pub fn is_empty(&self) -> bool {
        self.features.is_empty()
    }

    pub fn names(&self) -> Vec<String> {
        self.features.iter().map(|f| f.name.clone()).collect()
    }

    pub fn index_of(&self, name: &str) -> Option<usize> {
        self.features.iter().position(|f| f.name == name)
    }

    pub fn get(&self, name: &str) -> Option<&FeatureSpec> {
        self.features.iter().find(|f| f.name == name)
    }

    /// Sub-schema with the named features, in the given order.
    pub fn subset<S: AsRef<str>>(&self, names: &[S]) -> Result<Self> {
        let features = names
            .iter()
            .map(|n| {
                self.get(n.as_ref())
                    .cloned()
                    .ok_or_else(|| Error::Schema(format!("unknown feature `{}`", n.as_ref())))
            })
            .collect::<Result<Vec<_>>>()?;
        Self::new(features)
    }

    pub fn from_json_file(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let file = File::open(path).map_err(|e| Error::io(path, e))?;
        Ok(serde_json::from_reader(file)?)
    }

    pub fn to_json_string(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)?)
    }
}

impl Default for FeatureSchema {
    fn default() -> Self {
        Self::default_schema()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Label {
    Killed,
    Survived,
}

impl Label {
    pub fn parse(s: &str) -> Option<Self> {
        if s.eq_ignore_ascii_case("killed") {
            Some(Label::Killed)
        } else if s.eq_ignore_ascii_case("survived") {
            Some(Label::Survived)
        } else {
            None
        }
    }

    pub fn as_str(self) -> &'static str {
        match self {
            Label::Killed => "killed",
            Label::Survived => "survived",
        }
    }

    /// Killed is the positive class.
    pub fn is_killed(self) -> bool {
        self == Label::Killed
    }

    pub fn from_killed(killed: bool) -> Self {
        if killed {
            Label::Killed
        } else {
            Label::Survived
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum Value {
    Num(f64),
    Cat(String),
}

impl Value {
    pub fn as_num(&self) -> Option<f64> {
        match self {
            Value::Num(v) => Some(*v),
            Value::Cat(_) => None,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct MutantRecord {
    pub project: String,
    pub label: Label,
    /// One value per schema feature, in schema order.
    pub values: Vec<Value>,
}

/// A validated, immutable corpus of mutants.
#[derive(Debug, Clone, PartialEq)]
pub struct Dataset {
    schema: FeatureSchema,
    records: Vec<MutantRecord>,
}

impl Dataset {
    /// Validates every record against the schema, including the coverage
    /// consistency rule for `numExecuted`/`numTestCover`. Row numbers in
    /// errors are 1-based record positions.
    pub fn new(schema: FeatureSchema, records: Vec<MutantRecord>) -> Result<Self> {
        let exec = schema.index_of(NUM_EXECUTED);
        let cover = schema.index_of(NUM_TEST_COVER);
        for (i, r) in records.iter().enumerate() {
            let row = i + 1;
            if r.project.is_empty() {
                return Err(Error::Validation {
                    row,
                    column: "project".into(),
                    message: "empty project identifier".into(),
                });
            }
            if r.values.len() != schema.len() {
                return Err(Error::Validation {
                    row,
                    column: "*".into(),
                    message: format!("{} values for {} features", r.values.len(), schema.len()),
                });
            }
            for (spec, v) in schema.features.iter().zip(&r.values) {
                let ok = match (spec.kind, v) {
                    (FeatureKind::Numeric, Value::Num(x)) => x.is_finite(),
                    (FeatureKind::Categorical, Value::Cat(_)) => true,
                    _ => false,
                };
                if !ok {
                    return Err(Error::Validation {
                        row,
                        column: spec.name.clone(),
                        message: format!("value {v:?} does not match kind {:?}", spec.kind),
                    });
                }
            }
            check_coverage(row, r, exec, cover)?;
        }
        Ok(Self { schema, records })
    }

    pub fn empty(schema: FeatureSchema) -> Self {
        Self {
            schema,
            records: Vec::new(),
        }
    }

    pub fn schema(&self) -> &FeatureSchema {
        &self.schema
    }

    pub fn records(&self) -> &[MutantRecord] {
        &self.records
    }

    pub fn len(&self) -> usize {
        self.records.len()
    }

    pub fn is_empty(&self) -> bool {
        self.records.is_empty()
    }

    /// `true` for Killed, in record order.
    pub fn labels(&self) -> Vec<bool> {
        self.records.iter().map(|r| r.label.is_killed()).collect()
    }

    /// Distinct project identifiers in order of first appearance.
    pub fn projects(&self) -> Vec<String> {
        let mut seen = HashSet::new();
        self.records
            .iter()
            .filter(|r| seen.insert(r.project.as_str()))
            .map(|r| r.project.clone())
            .collect()
    }

    pub fn numeric_column(&self, name: &str) -> Option<Vec<f64>> {
        let j = self.schema.index_of(name)?;
        self.records.iter().map(|r| r.values[j].as_num()).collect()
    }

    /// Records satisfying `keep`, in order, sharing this dataset's schema.
    pub fn filter(&self, mut keep: impl FnMut(&MutantRecord) -> bool) -> Dataset {
        Dataset {
            schema: self.schema.clone(),
            records: self.records.iter().filter(|r| keep(r)).cloned().collect(),
        }
    }

    /// Restricts the dataset to a sub-schema (features addressed by name).
    pub fn with_schema(&self, schema: &FeatureSchema) -> Result<Dataset> {
        let idx = schema
            .features
            .iter()
            .map(|f| {
                self.schema
                    .index_of(&f.name)
                    .ok_or_else(|| Error::MissingColumn(f.name.clone()))
            })
            .collect::<Result<Vec<_>>>()?;
        let records = self
            .records
            .iter()
            .map(|r| MutantRecord {
                project: r.project.clone(),
                label: r.label,
                values: idx.iter().map(|&j| r.values[j].clone()).collect(),
            })
            .collect();
        Ok(Dataset {
            schema: schema.clone(),
            records,
        })
    }

    pub fn concat(&self, other: &Dataset) -> Result<Dataset> {
        if self.schema != other.schema {
            return Err(Error::Schema("cannot concatenate datasets with different schemas".into()));
        }
        let mut records = self.records.clone();
        records.extend(other.records.iter().cloned());
        Ok(Dataset {
            schema: self.schema.clone(),
            records,
        })
    }
}

fn check_coverage(
    row: usize,
    r: &MutantRecord,
    exec: Option<usize>,
    cover: Option<usize>,
) -> Result<()> {
    let get = |j: Option<usize>| j.and_then(|j| r.values[j].as_num());
    let e = get(exec);
    let c = get(cover);
    for (v, name) in [(e, NUM_EXECUTED), (c, NUM_TEST_COVER)] {
        if matches!(v, Some(x) if x < 0.0) {
            return Err(Error::Validation {
                row,
                column: name.into(),
                message: "must be non-negative".into(),
            });
        }
    }
    if let (Some(e), Some(c)) = (e, c) {
        if (e > 0.0) != (c > 0.0) {
            return Err(Error::Validation {
                row,
                column: NUM_TEST_COVER.into(),
                message: format!("inconsistent coverage: {NUM_EXECUTED}={e} but {NUM_TEST_COVER}={c}"),
            });
        }
    }
    Ok(())
}

fn parse_number(s: &str) -> Option<f64> {
    let t = s.trim();
    if t.is_empty() {
        return None;
    }
    t.parse::<f64>().ok().filter(|v| v.is_finite())
}

/// Reads a dataset from CSV with a `project,label,<feature...>` header.
/// Columns not in the schema are ignored.
pub fn load_csv(path: impl AsRef<Path>, schema: &FeatureSchema) -> Result<Dataset> {
    let path = path.as_ref();
    let file = File::open(path).map_err(|e| Error::io(path, e))?;
    read_csv(file, schema)
}

pub fn read_csv<R: Read>(reader: R, schema: &FeatureSchema) -> Result<Dataset> {
    let mut rdr = csv::ReaderBuilder::new().has_headers(true).from_reader(reader);
    let headers = rdr.headers()?.clone();
    let col = |name: &str| {
        headers
            .iter()
            .position(|h| h.trim() == name)
            .ok_or_else(|| Error::MissingColumn(name.to_string()))
    };
    let project_col = col("project")?;
    let label_col = col("label")?;
    let feature_cols = schema
        .features
        .iter()
        .map(|f| col(&f.name))
        .collect::<Result<Vec<_>>>()?;

    let mut records = Vec::new();
    for (i, rec) in rdr.records().enumerate() {
        let rec = rec?;
        let row = i + 1;
        let field = |c: usize| rec.get(c).unwrap_or("");
        let label_raw = field(label_col).trim();
        let label = Label::parse(label_raw).ok_or_else(|| Error::UnknownLabel {
            row,
            value: label_raw.to_string(),
        })?;
        let mut values = Vec::with_capacity(schema.len());
        for (spec, &c) in schema.features.iter().zip(&feature_cols) {
            let raw = field(c);
            let v = match spec.kind {
                FeatureKind::Numeric => Value::Num(parse_number(raw).ok_or_else(|| Error::Parse {
                    row,
                    column: spec.name.clone(),
                    value: raw.to_string(),
                })?),
                FeatureKind::Categorical => Value::Cat(raw.trim().to_string()),
            };
            values.push(v);
        }
        records.push(MutantRecord {
            project: field(project_col).trim().to_string(),
            label,
            values,
        });
    }
    Dataset::new(schema.clone(), records)
}

/// Writes the dataset as CSV. Numbers use the shortest representation that
/// parses back to the same `f64`.
pub fn write_csv<W: Write>(ds: &Dataset, writer: W) -> Result<()> {
    let mut w = csv::Writer::from_writer(writer);
    let mut header = vec!["project".to_string(), "label".to_string()];
    header.extend(ds.schema.names());
    w.write_record(&header)?;
    let mut fields: Vec<String> = Vec::with_capacity(header.len());
    for r in &ds.records {
        fields.clear();
        fields.push(r.project.clone());
        fields.push(r.label.as_str().to_string());
        for v in &r.values {
            fields.push(match v {
                Value::Num(x) => format!("{x}"),
                Value::Cat(s) => s.clone(),
            });
        }
        w.write_record(&fields)?;
    }
    w.flush().map_err(|e| Error::io("<csv writer>", e))?;
    Ok(())
}

/// A mutant is covered when at least one test executes it.
pub fn is_covered(schema: &FeatureSchema, r: &MutantRecord) -> bool {
    match schema.index_of(NUM_TEST_COVER) {
        Some(j) => r.values[j].as_num().is_some_and(|c| c >= 1.0),
        // no coverage column: nothing can be identified as uncovered
        None => true,
    }
}

/// Keeps the records with `numTestCover >= 1`, in order.
pub fn filter_covered(ds: &Dataset) -> Dataset {
    ds.filter(|r| is_covered(&ds.schema, r))
}

/// Project counts for a train/valid/test split of `n_projects`. The holdout
/// partitions get `ceil(fraction * n)` projects and train takes the rest.
pub fn partition_sizes(n_projects: usize, fractions: (f64, f64, f64)) -> Result<[usize; 3]> {
    let (tr, va, te) = fractions;
    if [tr, va, te].iter().any(|f| !(f.is_finite() && *f > 0.0)) {
        return Err(Error::InvalidInput("split fractions must be positive".into()));
    }
    if ((tr + va + te) - 1.0).abs() > 1e-6 {
        return Err(Error::InvalidInput(format!(
            "split fractions sum to {}, expected 1",
            tr + va + te
        )));
    }
    if n_projects < 3 {
        return Err(Error::InvalidInput(format!(
            "{n_projects} projects cannot fill 3 partitions"
        )));
    }
    let n = n_projects as f64;
    let holdout = |f: f64| ((f * n - 1e-9).ceil() as usize).max(1);
    let valid = holdout(va);
    let test = holdout(te);
    if valid + test >= n_projects {
        return Err(Error::InvalidInput(format!(
            "{n_projects} projects leave none for training"
        )));
    }
    Ok([n_projects - valid - test, valid, test])
}

/// Assigns whole projects to train/valid/test at random under `seed`.
pub fn split_by_project(
    ds: &Dataset,
    fractions: (f64, f64, f64),
    seed: u64,
) -> Result<(Dataset, Dataset, Dataset)> {
    let mut projects = ds.projects();
    let [n_train, n_valid, _] = partition_sizes(projects.len(), fractions)?;
    // sort first so the assignment depends on the project set, not file order
    projects.sort();
    projects.shuffle(&mut seed::rng(seed));
    let part: HashMap<&str, usize> = projects
        .iter()
        .enumerate()
        .map(|(i, p)| {
            let k = if i < n_train {
                0
            } else if i < n_train + n_valid {
                1
            } else {
                2
            };
            (p.as_str(), k)
        })
        .collect();
    let pick = |k: usize| ds.filter(|r| part[r.project.as_str()] == k);
    Ok((pick(0), pick(1), pick(2)))
}

/// Per categorical feature, the occurrence count of every category seen in
/// the fitting data.
#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct EncoderState {
    pub tables: BTreeMap<String, BTreeMap<String, u64>>,
}

impl EncoderState {
    /// Fitted count for `token`, 0 when it was never seen.
    pub fn encode(&self, feature: &str, token: &str) -> Option<f64> {
        self.tables
            .get(feature)
            .map(|t| t.get(token).copied().unwrap_or(0) as f64)
    }
}

pub fn fit_frequency_encoding(train: &Dataset) -> Result<EncoderState> {
    if train.is_empty() {
        return Err(Error::InvalidInput("cannot fit an encoder on an empty dataset".into()));
    }
    let mut tables = BTreeMap::new();
    for (j, spec) in train.schema.features.iter().enumerate() {
        if !spec.is_categorical() {
            continue;
        }
        let mut counts: BTreeMap<String, u64> = BTreeMap::new();
        for r in &train.records {
            if let Value::Cat(tok) = &r.values[j] {
                *counts.entry(tok.clone()).or_default() += 1;
            }
        }
        tables.insert(spec.name.clone(), counts);
    }
    Ok(EncoderState { tables })
}

/// Numeric design matrix in schema column order; categorical tokens are
/// replaced by their fitted frequency (0 when unseen).
pub fn apply_encoding(ds: &Dataset, enc: &EncoderState) -> Result<Matrix> {
    let cats: Vec<&str> = ds
        .schema
        .features
        .iter()
        .filter(|f| f.is_categorical())
        .map(|f| f.name.as_str())
        .collect();
    if cats.len() != enc.tables.len() || cats.iter().any(|c| !enc.tables.contains_key(*c)) {
        return Err(Error::Schema(format!(
            "encoder fitted on categorical features {:?}, dataset has {:?}",
            enc.tables.keys().collect::<Vec<_>>(),
            cats
        )));
    }
    let cols = ds.schema.len();
    let mut data = Vec::with_capacity(ds.len() * cols);
    for r in &ds.records {
        for (spec, v) in ds.schema.features.iter().zip(&r.values) {
            data.push(match v {
                Value::Num(x) => *x,
                Value::Cat(tok) => enc.encode(&spec.name, tok).unwrap_or(0.0),
            });
        }
    }
    Matrix::from_vec(ds.len(), cols, data)
}
