use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

use serde::Serialize;

use pmt_core::dataset::{filter_covered, load_csv, split_by_project, write_csv, Dataset, FeatureSchema};
use pmt_core::ensemble::{encode_for_model, fit_pipeline, label_for, score_dataset, CombinedModel, Members};
use pmt_core::featsel::permutation_importance;
use pmt_core::metrics::{evaluate_scores, load_report_csv, write_report_csv, EvalReport};
use pmt_core::skesd::{scott_knott_esd, MetricGroup, RankResult, SkConfig};
use pmt_core::synth::{generate, inflation_experiment, SynthConfig};

use crate::args::*;
use crate::output::{sidecar, write_atomic, write_json, RunManifest};
use crate::CliError;

type Result<T> = std::result::Result<T, CliError>;

fn path_str(p: &Path) -> String {
    p.display().to_string()
}

fn manifest<A: Serialize>(cli: &Cli, name: &str, args: &A, inputs: &[&Path], outputs: &[&Path]) -> Result<()> {
    RunManifest {
        subcommand: name,
        artifact_version: pmt_core::ARTIFACT_VERSION,
        seed: cli.seed,
        threads: rayon::current_num_threads(),
        args,
        inputs: inputs.iter().map(|p| path_str(p)).collect(),
        outputs: outputs.iter().map(|p| path_str(p)).collect(),
    }
    .write()
}

fn schema(cli: &Cli) -> Result<FeatureSchema> {
    Ok(match &cli.schema {
        Some(p) => FeatureSchema::from_json_file(p)?,
        None => FeatureSchema::default_schema(),
    })
}

/// Schema used to read data scored by `model`: `--schema` if given, else the
/// model's own feature list.
fn scoring_schema(cli: &Cli, model: &CombinedModel) -> Result<FeatureSchema> {
    match &cli.schema {
        Some(p) => Ok(FeatureSchema::from_json_file(p)?),
        None => Ok(model.schema.clone()),
    }
}

fn write_dataset(path: &Path, ds: &Dataset) -> Result<()> {
    let mut buf = Vec::new();
    write_csv(ds, &mut buf)?;
    write_atomic(path, &buf)
}

pub fn run(cli: &Cli) -> Result<()> {
    match &cli.command {
        Command::Generate(a) => cmd_generate(cli, a),
        Command::Split(a) => cmd_split(cli, a),
        Command::FilterCovered(a) => cmd_filter_covered(cli, a),
        Command::Train(a) => cmd_train(cli, a),
        Command::Predict(a) => cmd_predict(cli, a),
        Command::Evaluate(a) => cmd_evaluate(cli, a),
        Command::SelectFeatures(a) => cmd_select_features(cli, a),
        Command::Importance(a) => cmd_importance(cli, a),
        Command::Compare(a) => cmd_compare(cli, a),
        Command::Inflation(a) => cmd_inflation(cli, a),
    }
}

fn synth_config(cli: &Cli, a: &CorpusArgs) -> Result<SynthConfig> {
    let mut cfg = match a.preset {
        Preset::Default => SynthConfig::default(),
        Preset::Weak => SynthConfig::weak_signal(),
        Preset::Zero => SynthConfig::zero_signal(),
    };
    if cli.schema.is_some() {
        cfg.schema = schema(cli)?;
        let s = &cfg.schema;
        cfg.signal.retain(|w| s.get(&w.feature).is_some());
    }
    cfg.n_projects = a.projects;
    cfg.mutants_per_project = (a.mutants_min, a.mutants_max);
    cfg.uncovered_fraction = a.uncovered_fraction;
    cfg.covered_kill_rate = a.kill_rate;
    cfg.noise_features = a.noise.clone();
    cfg.signal.retain(|w| !a.noise.contains(&w.feature));
    let mut dups = BTreeMap::new();
    for d in &a.duplicate {
        let Some((t, s)) = d.split_once('=') else {
            return Err(CliError::Usage(format!("--duplicate expects TARGET=SOURCE, got {d:?}")));
        };
        dups.insert(t.trim().to_string(), s.trim().to_string());
    }
    cfg.signal.retain(|w| !dups.contains_key(&w.feature));
    cfg.duplicate_of = dups;
    cfg.seed = cli.seed;
    Ok(cfg)
}

fn cmd_generate(cli: &Cli, a: &GenerateArgs) -> Result<()> {
    let cfg = synth_config(cli, &a.corpus)?;
    let ds = generate(&cfg)?;
    write_dataset(&a.out, &ds)?;
    let cfg_path = sidecar(&a.out, "config.json");
    write_json(&cfg_path, &cfg)?;
    manifest(cli, "generate", a, &[], &[&a.out, &cfg_path])?;
    println!("wrote {} mutants from {} projects to {}", ds.len(), cfg.n_projects, a.out.display());
    Ok(())
}

fn cmd_split(cli: &Cli, a: &SplitArgs) -> Result<()> {
    let schema = schema(cli)?;
    let ds = load_csv(&a.input, &schema)?;
    let f = (a.fractions[0], a.fractions[1], a.fractions[2]);
    let (train, valid, test) = split_by_project(&ds, f, cli.seed)?;
    std::fs::create_dir_all(&a.out_dir).map_err(|e| CliError::io(&a.out_dir, e))?;
    let paths: Vec<PathBuf> = ["train.csv", "valid.csv", "test.csv"].iter().map(|n| a.out_dir.join(n)).collect();
    for (p, d) in paths.iter().zip([&train, &valid, &test]) {
        write_dataset(p, d)?;
        println!("{}: {} projects, {} mutants", p.display(), d.projects().len(), d.len());
    }
    let outs: Vec<&Path> = paths.iter().map(PathBuf::as_path).collect();
    manifest(cli, "split", a, &[&a.input], &outs)
}

fn cmd_filter_covered(cli: &Cli, a: &FilterArgs) -> Result<()> {
    let ds = load_csv(&a.input, &schema(cli)?)?;
    let kept = filter_covered(&ds);
    write_dataset(&a.out, &kept)?;
    println!("kept {} of {} mutants", kept.len(), ds.len());
    manifest(cli, "filter-covered", a, &[&a.input], &[&a.out])
}

fn cmd_train(cli: &Cli, a: &TrainArgs) -> Result<()> {
    let schema = schema(cli)?;
    let eliminate = !a.no_elimination;
    let train = load_csv(&a.train, &schema)?;
    let valid = match &a.valid {
        Some(p) => load_csv(p, &schema)?,
        None if eliminate => {
            return Err(CliError::Usage("--valid is required unless --no-elimination is given".into()));
        }
        None => Dataset::empty(schema.clone()),
    };
    let opts = a.model.options(eliminate, cli.seed);
    let fit = fit_pipeline(&train, &valid, &opts)?;
    let mut json = fit.model.to_json()?;
    json.push('\n');
    write_atomic(&a.out, json.as_bytes())?;
    let mut outputs: Vec<PathBuf> = vec![a.out.clone()];
    if let Some(trace) = &fit.elimination {
        let p = sidecar(&a.out, "elimination.json");
        write_json(&p, trace)?;
        outputs.push(p);
        if let Some(w) = &trace.warning {
            eprintln!("warning: {w}");
        }
    }
    println!(
        "trained on {} mutants; {} features selected: {}",
        train.len(),
        fit.model.schema.len(),
        fit.model.selected_features().join(", ")
    );
    let mut inputs: Vec<&Path> = vec![&a.train];
    if let Some(v) = &a.valid {
        inputs.push(v);
    }
    let outs: Vec<&Path> = outputs.iter().map(PathBuf::as_path).collect();
    manifest(cli, "train", a, &inputs, &outs)
}

fn load_scored(cli: &Cli, model_path: &Path, input: &Path) -> Result<(CombinedModel, Dataset, Vec<f64>)> {
    let model = CombinedModel::load(model_path)?;
    let ds = load_csv(input, &scoring_schema(cli, &model)?)?;
    let scores = score_dataset(&model, &ds)?;
    Ok((model, ds, scores))
}

fn cmd_predict(cli: &Cli, a: &PredictArgs) -> Result<()> {
    let (model, ds, scores) = load_scored(cli, &a.model, &a.input)?;
    let mut buf = String::from("project,label,score,predicted\n");
    for (r, s) in ds.records().iter().zip(&scores) {
        let project = if r.project.contains([',', '"', '\n']) {
            format!("\"{}\"", r.project.replace('"', "\"\""))
        } else {
            r.project.clone()
        };
        buf.push_str(&format!(
            "{project},{},{s},{}\n",
            r.label.as_str(),
            label_for(*s, model.threshold).as_str()
        ));
    }
    write_atomic(&a.out, buf.as_bytes())?;
    manifest(cli, "predict", a, &[&a.model, &a.input], &[&a.out])
}

fn cmd_evaluate(cli: &Cli, a: &EvaluateArgs) -> Result<()> {
    let (model, ds, scores) = load_scored(cli, &a.model, &a.input)?;
    let projects: Vec<&str> = ds.records().iter().map(|r| r.project.as_str()).collect();
    let report = evaluate_scores(&projects, &scores, &ds.labels(), model.threshold)?;
    let mut buf = Vec::new();
    write_report_csv(&report, &mut buf)?;
    write_atomic(&a.out, &buf)?;
    let summary_path = sidecar(&a.out, "summary.json");
    write_json(&summary_path, &report.summary)?;
    print_summary(&report);
    manifest(cli, "evaluate", a, &[&a.model, &a.input], &[&a.out, &summary_path])
}

fn fmt_opt(v: Option<f64>) -> String {
    v.map_or_else(|| "undefined".to_string(), |x| format!("{x:.4}"))
}

fn print_summary(r: &EvalReport) {
    let s = &r.summary;
    println!(
        "{} projects | AUC mean {} median {} ({} undefined) | MCC mean {} | BalAcc(adj) mean {} | AUC < 0.5 in {} projects",
        s.projects,
        fmt_opt(s.auc.mean),
        fmt_opt(s.auc.median),
        s.auc.undefined,
        fmt_opt(s.mcc.mean),
        fmt_opt(s.bal_acc_adj.mean),
        s.worse_than_random
    );
}

fn cmd_select_features(cli: &Cli, a: &SelectArgs) -> Result<()> {
    let schema = schema(cli)?;
    let train = load_csv(&a.train, &schema)?;
    let valid = load_csv(&a.valid, &schema)?;
    let fit = fit_pipeline(&train, &valid, &a.model.options(true, cli.seed))?;
    let trace = fit
        .elimination
        .ok_or_else(|| CliError::Usage("feature selection needs at least 2 features".into()))?;
    write_json(&a.out_trace, &trace)?;
    let mut s = fit.model.schema.to_json_string()?;
    s.push('\n');
    write_atomic(&a.out_schema, s.as_bytes())?;
    for r in &trace.rounds {
        println!("removed {} ({:?})", r.removed, r.reason);
    }
    if let Some(w) = &trace.warning {
        eprintln!("warning: {w}");
    }
    println!("{} features survive: {}", trace.survivors.len(), trace.survivors.join(", "));
    manifest(cli, "select-features", a, &[&a.train, &a.valid], &[&a.out_trace, &a.out_schema])
}

fn cmd_importance(cli: &Cli, a: &ImportanceArgs) -> Result<()> {
    let model = CombinedModel::load(&a.model)?;
    let ds = load_csv(&a.input, &scoring_schema(cli, &model)?)?;
    let x = encode_for_model(&model, &ds)?;
    let members = Members {
        forest: model.forest.clone(),
        gb_bag: model.gb_bag.clone(),
    };
    let report = permutation_importance(&members, &x, &ds.labels(), &model.selected_features(), a.repeats, cli.seed)?;
    write_json(&a.out, &report)?;
    for f in report.ranked() {
        println!("{:<32} {:>9.5} {:>7.4}", f.name, f.importance, f.share);
    }
    manifest(cli, "importance", a, &[&a.model, &a.input], &[&a.out])
}

#[derive(Serialize)]
struct CompareOutput<'a> {
    metric: Metric,
    config: SkConfig,
    sources: Vec<String>,
    result: &'a RankResult,
}

fn cmd_compare(cli: &Cli, a: &CompareArgs) -> Result<()> {
    if !a.names.is_empty() && a.names.len() != a.reports.len() {
        return Err(CliError::Usage(format!(
            "{} names given for {} reports",
            a.names.len(),
            a.reports.len()
        )));
    }
    let mut groups = Vec::with_capacity(a.reports.len());
    for (i, p) in a.reports.iter().enumerate() {
        let report = load_report_csv(p)?;
        let obs: Vec<f64> = report
            .rows
            .iter()
            .filter_map(|r| match a.metric {
                Metric::Auc => r.auc,
                Metric::Mcc => Some(r.mcc),
                Metric::BalAccAdj => r.bal_acc_adj,
            })
            .collect();
        let name = match a.names.get(i) {
            Some(n) => n.clone(),
            None => p.file_stem().map_or_else(|| path_str(p), |s| s.to_string_lossy().into_owned()),
        };
        groups.push(MetricGroup::new(name, obs));
    }
    let mut seen = std::collections::HashSet::new();
    if !groups.iter().all(|g| seen.insert(g.name.clone())) {
        return Err(CliError::Usage("group names must be unique; pass --name for each report".into()));
    }
    let config = SkConfig {
        alpha: a.sk_alpha,
        negligible_threshold: a.sk_delta,
        log_transform: a.log_transform,
    };
    let result = scott_knott_esd(&groups, &config)?;
    write_json(
        &a.out,
        &CompareOutput {
            metric: a.metric,
            config,
            sources: a.reports.iter().map(|p| path_str(p)).collect(),
            result: &result,
        },
    )?;
    println!("{:<4} {:<24} {:>8} {:>5}", "rank", "group", "mean", "n");
    for g in &result.groups {
        println!("{:<4} {:<24} {:>8.4} {:>5}", g.rank, g.name, g.mean, g.n);
    }
    let inputs: Vec<&Path> = a.reports.iter().map(PathBuf::as_path).collect();
    manifest(cli, "compare", a, &inputs, &[&a.out])
}

fn cmd_inflation(cli: &Cli, a: &InflationArgs) -> Result<()> {
    let cfg = synth_config(cli, &a.corpus)?;
    let opts = a.model.options(a.eliminate, cli.seed);
    let result = inflation_experiment(&cfg, &opts)?;
    write_json(&a.out, &result)?;
    println!(
        "AUC all mutants: mean {} median {} | covered only: mean {} median {} | gap {}",
        fmt_opt(result.auc_all.mean),
        fmt_opt(result.auc_all.median),
        fmt_opt(result.auc_covered_only.mean),
        fmt_opt(result.auc_covered_only.median),
        fmt_opt(result.gap())
    );
    manifest(cli, "inflation", a, &[], &[&a.out])
}
