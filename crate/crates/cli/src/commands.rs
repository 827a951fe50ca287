use std::collections::BTreeMap;
use std::fs::{self, File};
use std::io::BufWriter;
use std::path::Path;

use labelind::ingest::{encode_features, load_cases};
use labelind::runner::{load_report, report_case};
use labelind::synthgen::{generate, write_public_csv, write_truth_csv};
use labelind::{DataSource, ExperimentConfig, FeatureSchema, GeneratorConfig, LabelStatus};
use serde_json::{json, Value};

use crate::error::{Class, CliError};
use crate::{render, ImportanceArgs, IngestArgs, Preset, ReportArgs, RunArgs, SynthArgs};

type Result<T> = std::result::Result<T, CliError>;

fn preset(p: Preset, seed: u64) -> GeneratorConfig {
    match p {
        Preset::Default => GeneratorConfig {
            seed,
            ..GeneratorConfig::default()
        },
        Preset::Confounded => GeneratorConfig::confounded(seed),
    }
}

fn read_json(path: &Path) -> Result<Value> {
    let text = fs::read_to_string(path).map_err(|e| CliError::io(path, e))?;
    serde_json::from_str(&text).map_err(|e| CliError::new(Class::Config, format!("{}: {e}", path.display())))
}

/// Overlays the keys of `patch` onto `base`, recursing into objects.
fn merge(base: &mut Value, patch: Value) {
    match (base, patch) {
        (Value::Object(b), Value::Object(p)) => {
            for (k, v) in p {
                merge(b.entry(k).or_insert(Value::Null), v);
            }
        }
        (b, p) => *b = p,
    }
}

fn create(path: &Path) -> Result<BufWriter<File>> {
    if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
        fs::create_dir_all(dir).map_err(|e| CliError::io(dir, e))?;
    }
    File::create(path).map(BufWriter::new).map_err(|e| CliError::io(path, e))
}

fn print_json(value: &impl serde::Serialize) {
    println!("{}", serde_json::to_string_pretty(value).expect("output serializes"));
}

pub fn synth(args: SynthArgs) -> Result<()> {
    let mut config = preset(args.preset, 0);
    if let Some(path) = &args.config {
        let mut value = serde_json::to_value(&config).expect("generator config serializes");
        merge(&mut value, read_json(path)?);
        config = serde_json::from_value(value)
            .map_err(|e| CliError::new(Class::Config, format!("{}: {e}", path.display())))?;
    }
    if let Some(v) = args.n_cases {
        config.n_cases = v;
    }
    if let Some(v) = args.seed {
        config.seed = v;
    }
    if let Some(v) = args.confounding {
        config.confounding_strength = v;
    }
    if let Some(v) = args.detention_rate {
        config.detention_rate = v;
    }
    let cases = generate(&config)?;
    let schema = config.schema();
    write_public_csv(&cases, &schema, create(&args.out)?)?;
    if let Some(path) = &args.schema_out {
        fs::write(path, schema.to_json()).map_err(|e| CliError::io(path, e))?;
    }
    if let Some(path) = &args.truth_out {
        write_truth_csv(&cases, create(path)?)?;
    }
    let detained = cases.iter().filter(|c| c.truth.detained).count();
    let observed = cases.iter().filter(|c| c.record.fta_observed).count();
    eprintln!(
        "wrote {} cases ({detained} detained, {observed} observed FTA) to {}",
        cases.len(),
        args.out.display()
    );
    Ok(())
}

pub fn ingest(args: IngestArgs) -> Result<()> {
    let schema = FeatureSchema::from_path(&args.schema)?;
    let cases = load_cases(&args.data, &schema)?;
    let matrix = encode_features(&cases, &schema)?;
    if let Some(path) = &args.encoded_out {
        matrix
            .write_csv(create(path)?)
            .map_err(|e| CliError::new(Class::Io, format!("{}: {e}", path.display())))?;
    }
    let mut statuses: BTreeMap<String, usize> = BTreeMap::new();
    let mut strata = [[0usize; 2]; 2];
    for c in &cases {
        *statuses.entry(c.bail_status.kind().to_string()).or_default() += 1;
        let s = usize::from(c.label_status() == LabelStatus::Indeterminate);
        strata[s][usize::from(c.fta_observed)] += 1;
    }
    let summary = json!({
        "cases": cases.len(),
        "features": matrix.n_cols(),
        "determinate": { "cases": strata[0][0] + strata[0][1], "fta": strata[0][1] },
        "indeterminate": { "cases": strata[1][0] + strata[1][1], "fta": strata[1][1] },
        "bail_status": statuses,
    });
    if args.json {
        print_json(&summary);
    } else {
        print!("{}", render::ingest_summary(&summary));
    }
    Ok(())
}

fn run_config(args: &RunArgs) -> Result<ExperimentConfig> {
    let seed = args.seed.unwrap_or(0);
    let mut config = match &args.config {
        Some(path) => {
            let value = read_json(path)?;
            ExperimentConfig::from_json(&value.to_string())?
        }
        None => ExperimentConfig::new(DataSource::Synthetic(preset(args.preset.unwrap_or(Preset::Default), seed))),
    };
    if let (Some(path), Some(schema)) = (&args.data, &args.schema) {
        config.data = DataSource::Csv {
            path: path.clone(),
            schema: schema.clone(),
        };
    } else if let (Some(p), Some(_)) = (args.preset, &args.config) {
        config.data = DataSource::Synthetic(preset(p, seed));
    }
    if let Some(v) = args.seed {
        config.seed = v;
    }
    if let Some(v) = args.subsets {
        config.n_subsets = v;
    }
    if let Some(v) = &args.methods {
        config.methods = v.clone();
    }
    if let Some(v) = &args.models {
        config.models = v.clone();
    }
    if let Some(v) = args.clip {
        config.imputation.clip = v;
    }
    if let Some(v) = args.k {
        config.imputation.nn.k = v;
    }
    if let Some(v) = &args.out {
        config.output_dir = Some(v.clone());
    }
    config.validate()?;
    Ok(config)
}

pub fn run(args: RunArgs) -> Result<()> {
    let config = run_config(&args)?;
    let outcome = labelind::run_experiment(&config)?;
    eprintln!("trained {} models, reused {}", outcome.trained, outcome.reused);
    if args.json {
        print_json(&outcome.report);
    } else {
        print!("{}", render::report(&outcome.report));
    }
    Ok(())
}

pub fn report(args: ReportArgs) -> Result<()> {
    if let Some(ids) = &args.cases {
        let summaries = report_case(ids, &args.run)?;
        if args.json {
            print_json(&summaries);
        } else {
            print!("{}", render::cases(&summaries));
        }
        return Ok(());
    }
    let report = load_report(&args.run)?;
    if args.json {
        print_json(&report);
    } else {
        print!("{}", render::report(&report));
    }
    Ok(())
}

pub fn importance(args: ImportanceArgs) -> Result<()> {
    let report = load_report(&args.run)?;
    if report.importance.is_empty() {
        return Err(CliError::new(
            Class::Config,
            "run has no boosted-tree models; include xgboost in the model list",
        ));
    }
    if args.json {
        let top: BTreeMap<_, _> = report.importance.iter().map(|(m, r)| (m, r.top(args.top))).collect();
        print_json(&top);
    } else {
        print!("{}", render::importance(&report, args.top));
    }
    Ok(())
}
