//! Subcommand implementations. File paths go to stdout, one per line;
//! diagnostics go to stderr.

use std::collections::BTreeMap;
use std::fs;
use std::path::{Path, PathBuf};

use clap::ValueEnum;

use shapkit::dataset::{load_csv, one_hot_encode, Dataset, Schema, StandardizationStats};
use shapkit::demo;
use shapkit::importance::{
    beta_importance, gain_importance, l1_importance, variance_importance, ImportanceReport,
};
use shapkit::model::{parse_model, serialize_model, Model};
use shapkit::packing::{
    grouped_importance, pack, resolve_groups, suggest_groups, FeatureGroup, SuggestMode,
};
use shapkit::plots::{
    dependence_plot, importance_plot, pdp_plot, summary_plot, PlotOutput, PlotSpec,
};
use shapkit::{explain, ShapMatrix, ShapSidecar};

use crate::error::CliError;

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum MethodArg {
    Variance,
    #[value(name = "l1")]
    L1,
    Gain,
    Beta,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum PlotKindArg {
    Summary,
    Dependence,
    Pdp,
    Importance,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum SuggestArg {
    Prefix,
    Covariance,
}

impl From<SuggestArg> for SuggestMode {
    fn from(a: SuggestArg) -> Self {
        match a {
            SuggestArg::Prefix => SuggestMode::Prefix,
            SuggestArg::Covariance => SuggestMode::Covariance,
        }
    }
}

// ---------------------------------------------------------------------------
// File plumbing
// ---------------------------------------------------------------------------

fn read_file(path: &Path) -> Result<String, CliError> {
    fs::read_to_string(path)
        .map_err(|e| CliError::Parse(format!("cannot read {}: {e}", path.display())))
}

fn write_output(path: &Path, content: &str) -> Result<(), CliError> {
    fs::write(path, content)
        .map_err(|e| CliError::Other(format!("cannot write {}: {e}", path.display())))?;
    println!("{}", path.display());
    Ok(())
}

fn ensure_dir(path: &Path) -> Result<(), CliError> {
    fs::create_dir_all(path)
        .map_err(|e| CliError::Other(format!("cannot create directory {}: {e}", path.display())))
}

fn load_model(path: &Path) -> Result<Model, CliError> {
    Ok(parse_model(&read_file(path)?)?)
}

fn load_schema(path: Option<&PathBuf>) -> Result<Schema, CliError> {
    match path {
        None => Ok(Schema::default()),
        Some(p) => serde_json::from_str(&read_file(p)?)
            .map_err(|e| CliError::Parse(format!("malformed schema {}: {e}", p.display()))),
    }
}

/// Loads a CSV under its schema and one-hot encodes any nominal columns,
/// so the resulting feature space matches what models are trained on.
fn load_dataset(path: &Path, schema: &Schema) -> Result<Dataset, CliError> {
    let dataset = load_csv(&read_file(path)?, schema)?;
    if schema.nominal_columns.is_empty() {
        Ok(dataset)
    } else {
        Ok(one_hot_encode(&dataset, schema.max_cardinality)?)
    }
}

/// shap.csv -> shap_meta.json, next to it.
fn sidecar_path(csv_path: &Path) -> PathBuf {
    let stem = csv_path
        .file_stem()
        .and_then(|s| s.to_str())
        .unwrap_or("shap");
    csv_path.with_file_name(format!("{stem}_meta.json"))
}

fn load_shap(path: &Path) -> Result<ShapMatrix, CliError> {
    let sidecar: ShapSidecar = serde_json::from_str(&read_file(&sidecar_path(path))?)
        .map_err(|e| CliError::Parse(format!("malformed sidecar for {}: {e}", path.display())))?;
    Ok(ShapMatrix::from_csv(&read_file(path)?, &sidecar)?)
}

fn require<'a, T>(value: Option<&'a T>, what: &str) -> Result<&'a T, CliError> {
    value.ok_or_else(|| CliError::Parse(format!("{what} is required for this command")))
}

/// Attribution matrix from --shap when given, otherwise computed from
/// --model/--data.
fn obtain_shap(
    shap: Option<&PathBuf>,
    model: Option<&PathBuf>,
    data: Option<&PathBuf>,
    schema: Option<&PathBuf>,
) -> Result<ShapMatrix, CliError> {
    if let Some(path) = shap {
        return load_shap(path);
    }
    let model = load_model(require(model, "--shap or --model/--data")?)?;
    let schema = load_schema(schema)?;
    let dataset = load_dataset(require(data, "--data")?, &schema)?;
    Ok(explain(&model, &dataset)?)
}

fn write_shap(out: &Path, stem: &str, shap: &ShapMatrix) -> Result<(), CliError> {
    write_output(&out.join(format!("{stem}.csv")), &shap.to_csv())?;
    let sidecar = serde_json::to_string_pretty(&shap.sidecar()).expect("sidecar serializes");
    write_output(&out.join(format!("{stem}_meta.json")), &sidecar)
}

fn write_plot(out: &Path, stem: &str, plot: &PlotOutput) -> Result<(), CliError> {
    for w in &plot.warnings {
        eprintln!("warning: {w}");
    }
    write_output(&out.join(format!("{stem}.svg")), &plot.svg)?;
    write_output(&out.join(format!("{stem}.csv")), &plot.csv)
}

fn sanitize(name: &str) -> String {
    name.chars()
        .map(|c| if c.is_ascii_alphanumeric() { c } else { '_' })
        .collect()
}

// ---------------------------------------------------------------------------
// Subcommands
// ---------------------------------------------------------------------------

pub fn cmd_explain(
    model: &Path,
    data: &Path,
    schema: Option<&PathBuf>,
    out: &Path,
) -> Result<(), CliError> {
    let model = load_model(model)?;
    let schema = load_schema(schema)?;
    let dataset = load_dataset(data, &schema)?;
    let shap = explain(&model, &dataset)?;
    ensure_dir(out)?;
    write_shap(out, "shap", &shap)
}

fn importance_report(
    method: MethodArg,
    shap: Option<&PathBuf>,
    model: Option<&PathBuf>,
    data: Option<&PathBuf>,
    schema: Option<&PathBuf>,
) -> Result<ImportanceReport, CliError> {
    match method {
        MethodArg::Variance => Ok(variance_importance(&obtain_shap(
            shap, model, data, schema,
        )?)),
        MethodArg::L1 => Ok(l1_importance(&obtain_shap(shap, model, data, schema)?)),
        MethodArg::Gain => match load_model(require(model, "--model")?)? {
            Model::Ensemble(ensemble) => Ok(gain_importance(&ensemble)?),
            Model::Glm(_) => Err(CliError::GainUnavailable(
                "gain requires a tree ensemble model".into(),
            )),
        },
        MethodArg::Beta => match load_model(require(model, "--model")?)? {
            Model::Glm(glm) => {
                let schema = load_schema(schema)?;
                let dataset = load_dataset(require(data, "--data")?, &schema)?;
                let aligned = dataset.aligned_to(glm.feature_names())?;
                let stats = StandardizationStats::compute(&aligned)?;
                Ok(beta_importance(&glm, &stats)?)
            }
            Model::Ensemble(_) => Err(CliError::BetaRequiresGlm),
        },
    }
}

pub fn cmd_importance(
    method: MethodArg,
    shap: Option<&PathBuf>,
    model: Option<&PathBuf>,
    data: Option<&PathBuf>,
    schema: Option<&PathBuf>,
    out: &Path,
) -> Result<(), CliError> {
    let report = importance_report(method, shap, model, data, schema)?;
    ensure_dir(out)?;
    let doc = serde_json::to_string_pretty(&report.to_document()).expect("report serializes");
    write_output(&out.join("importance.json"), &doc)
}

#[allow(clippy::too_many_arguments)]
pub fn cmd_plot(
    kind: PlotKindArg,
    model: Option<&PathBuf>,
    data: Option<&PathBuf>,
    schema: Option<&PathBuf>,
    shap: Option<&PathBuf>,
    feature: Option<&String>,
    color_by: Option<&String>,
    method: MethodArg,
    spec: &PlotSpec,
    grid: usize,
    out: &Path,
) -> Result<(), CliError> {
    ensure_dir(out)?;
    match kind {
        PlotKindArg::Summary => {
            let schema = load_schema(schema)?;
            let dataset = load_dataset(require(data, "--data")?, &schema)?;
            let shap = match shap {
                Some(p) => load_shap(p)?,
                None => explain(&load_model(require(model, "--shap or --model")?)?, &dataset)?,
            };
            let plot = summary_plot(&shap, &dataset, spec)?;
            write_plot(out, "summary", &plot)
        }
        PlotKindArg::Dependence => {
            let feature = require(feature, "--feature")?;
            let schema = load_schema(schema)?;
            let dataset = load_dataset(require(data, "--data")?, &schema)?;
            let shap = match shap {
                Some(p) => load_shap(p)?,
                None => explain(&load_model(require(model, "--shap or --model")?)?, &dataset)?,
            };
            let plot =
                dependence_plot(&shap, &dataset, feature, color_by.map(|s| s.as_str()), spec)?;
            write_plot(out, &format!("dependence_{}", sanitize(feature)), &plot)
        }
        PlotKindArg::Pdp => {
            let feature = require(feature, "--feature")?;
            let model = load_model(require(model, "--model")?)?;
            let schema = load_schema(schema)?;
            let dataset = load_dataset(require(data, "--data")?, &schema)?;
            let (_, plot) = pdp_plot(&model, &dataset, feature, grid, spec)?;
            write_plot(out, &format!("pdp_{}", sanitize(feature)), &plot)
        }
        PlotKindArg::Importance => {
            let report = importance_report(method, shap, model, data, schema)?;
            let plot = importance_plot(&report, spec.top_k, spec);
            write_plot(out, "importance", &plot)
        }
    }
}

#[allow(clippy::too_many_arguments)]
pub fn cmd_pack(
    shap: Option<&PathBuf>,
    model: Option<&PathBuf>,
    data: Option<&PathBuf>,
    schema: Option<&PathBuf>,
    groups_file: Option<&PathBuf>,
    suggest: Option<SuggestArg>,
    threshold: f64,
    out: &Path,
) -> Result<(), CliError> {
    let shap = obtain_shap(shap, model, data, schema)?;
    let groups: Vec<FeatureGroup> = match (groups_file, suggest) {
        (Some(path), _) => {
            let doc: BTreeMap<String, Vec<String>> = serde_json::from_str(&read_file(path)?)
                .map_err(|e| {
                    CliError::Parse(format!("malformed groups file {}: {e}", path.display()))
                })?;
            let named: Vec<(String, Vec<String>)> = doc.into_iter().collect();
            resolve_groups(&shap, &named)?
        }
        (None, Some(mode)) => suggest_groups(&shap, mode.into(), threshold)?,
        (None, None) => return Err(CliError::Parse("--groups or --suggest is required".into())),
    };
    if groups.is_empty() {
        eprintln!("warning: no groups to pack; output equals the input matrix");
    }

    let packed = pack(&shap, &groups)?;
    let report = variance_importance(&packed);

    // The pairwise-covariance route and the packed-column variance are
    // the same number; the report carries both so the identity is visible.
    let groups_doc: Vec<serde_json::Value> = groups
        .iter()
        .map(|g| {
            let members: Vec<&str> = g
                .members()
                .iter()
                .map(|&i| shap.feature_names[i].as_str())
                .collect();
            let grouped = grouped_importance(&shap, g);
            let original = variance_importance(&shap);
            let member_sum: f64 = g.members().iter().map(|&i| original.scores[i]).sum();
            let packed_idx = packed.feature_index(g.name()).expect("group column exists");
            let packed_score = report.scores[packed_idx];
            serde_json::json!({
                "name": g.name(),
                "members": members,
                "grouped_importance": grouped,
                "member_importance_sum": member_sum,
                "covariance_term": grouped - member_sum,
                "packed_column_importance": packed_score,
                "identity_gap": grouped - packed_score,
            })
        })
        .collect();
    let mut doc = report.to_document();
    doc["groups"] = serde_json::Value::Array(groups_doc);

    ensure_dir(out)?;
    write_shap(out, "packed_shap", &packed)?;
    write_output(
        &out.join("packed_importance.json"),
        &serde_json::to_string_pretty(&doc).expect("report serializes"),
    )
}

pub fn cmd_demo_consistency(out: Option<&PathBuf>) -> Result<(), CliError> {
    let report = demo::consistency_demo().report;
    if !(report.gain_rank_dropped && report.variance_rank_rose && report.variance_score_increased) {
        return Err(CliError::Other(
            "consistency fixture failed its own checks".into(),
        ));
    }
    let json = serde_json::to_string_pretty(&report).expect("report serializes");
    match out {
        Some(dir) => {
            ensure_dir(dir)?;
            write_output(&dir.join("consistency_report.json"), &json)
        }
        None => {
            println!("{json}");
            Ok(())
        }
    }
}

pub fn cmd_demo_data(out: &Path, seed: u64, rows: usize) -> Result<(), CliError> {
    let demo = demo::synthetic_demo(seed, rows);
    ensure_dir(out)?;
    write_output(
        &out.join("data.csv"),
        &demo.dataset.to_csv(Some(demo::DEMO_LABEL_COLUMN)),
    )?;
    write_output(
        &out.join("schema.json"),
        &serde_json::to_string_pretty(&demo.schema).expect("schema serializes"),
    )?;
    write_output(&out.join("model.json"), &serialize_model(&demo.model))
}
