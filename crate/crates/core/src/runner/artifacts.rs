//! On-disk layout of one experiment run.
//!
//! ```text
//! <run>/config.json                 config snapshot
//! <run>/split.json                  train and test case ids
//! <run>/test_cases.csv              case_id, fta, label_status
//! <run>/subsets/<method>.json       balanced subset membership
//! <run>/models/<method>/<model>/subset_NN.json
//! <run>/predictions/<method>/<model>/subset_NN.csv
//! <run>/reports/report.json, mcc_table.csv, histograms.csv,
//!               distances.csv, importance_<method>.csv
//! ```
//!
//! Files are written to a temporary name and renamed into place, so a file
//! that exists is complete.

use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};

use serde::Serialize;

use super::RunError;
use crate::domain::{ImputationMethod, LabelStatus, ModelKind};
use crate::evaluation::TestSet;

pub struct RunLayout {
    root: PathBuf,
}

impl RunLayout {
    pub fn new(root: impl Into<PathBuf>) -> Self {
        Self { root: root.into() }
    }

    pub fn root(&self) -> &Path {
        &self.root
    }

    pub fn config(&self) -> PathBuf {
        self.root.join("config.json")
    }

    pub fn split(&self) -> PathBuf {
        self.root.join("split.json")
    }

    pub fn test_cases(&self) -> PathBuf {
        self.root.join("test_cases.csv")
    }

    pub fn subsets(&self, method: ImputationMethod) -> PathBuf {
        self.root.join("subsets").join(format!("{method}.json"))
    }

    pub fn model(&self, method: ImputationMethod, model: ModelKind, subset: usize) -> PathBuf {
        self.root
            .join("models")
            .join(method.as_str())
            .join(model.as_str())
            .join(format!("subset_{subset:02}.json"))
    }

    pub fn predictions(&self, method: ImputationMethod, model: ModelKind, subset: usize) -> PathBuf {
        self.root
            .join("predictions")
            .join(method.as_str())
            .join(model.as_str())
            .join(format!("subset_{subset:02}.csv"))
    }

    pub fn report(&self, name: &str) -> PathBuf {
        self.root.join("reports").join(name)
    }
}

fn io_err(path: &Path) -> impl FnOnce(std::io::Error) -> RunError + '_ {
    move |source| RunError::Io {
        path: path.to_path_buf(),
        source,
    }
}

/// Writes `bytes` to `path` via a temporary sibling and a rename.
pub fn write_atomic(path: &Path, bytes: &[u8]) -> Result<(), RunError> {
    if let Some(dir) = path.parent() {
        fs::create_dir_all(dir).map_err(io_err(dir))?;
    }
    let mut tmp = path.as_os_str().to_owned();
    tmp.push(".tmp");
    let tmp = PathBuf::from(tmp);
    let mut f = fs::File::create(&tmp).map_err(io_err(&tmp))?;
    f.write_all(bytes).map_err(io_err(&tmp))?;
    f.sync_all().map_err(io_err(&tmp))?;
    drop(f);
    fs::rename(&tmp, path).map_err(io_err(path))
}

pub fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<(), RunError> {
    let mut text = serde_json::to_string_pretty(value).map_err(|e| RunError::Json(e.to_string()))?;
    text.push('\n');
    write_atomic(path, text.as_bytes())
}

pub fn read_to_string(path: &Path) -> Result<String, RunError> {
    fs::read_to_string(path).map_err(io_err(path))
}

/// `case_id,probability`, one row per test case. Probabilities use the
/// shortest representation that parses back to the same value.
pub fn prediction_csv(case_ids: &[String], probabilities: &[f64]) -> String {
    let mut out = String::from("case_id,probability\n");
    for (id, p) in case_ids.iter().zip(probabilities) {
        out.push_str(id);
        out.push(',');
        out.push_str(&p.to_string());
        out.push('\n');
    }
    out
}

pub fn read_prediction_csv(path: &Path) -> Result<(Vec<String>, Vec<f64>), RunError> {
    let mut rdr = csv::Reader::from_path(path).map_err(|e| RunError::Artifact {
        path: path.to_path_buf(),
        message: e.to_string(),
    })?;
    let mut ids = Vec::new();
    let mut probs = Vec::new();
    for rec in rdr.records() {
        let bad = |message: String| RunError::Artifact {
            path: path.to_path_buf(),
            message,
        };
        let rec = rec.map_err(|e| bad(e.to_string()))?;
        ids.push(rec.get(0).ok_or_else(|| bad("missing case_id".into()))?.to_string());
        let p = rec.get(1).ok_or_else(|| bad("missing probability".into()))?;
        probs.push(p.parse::<f64>().map_err(|e| bad(format!("probability `{p}`: {e}")))?);
    }
    Ok((ids, probs))
}

pub fn test_cases_csv(test: &TestSet) -> String {
    let mut out = String::from("case_id,fta,label_status\n");
    for ((id, y), s) in test.case_ids.iter().zip(&test.labels).zip(&test.label_status) {
        out.push_str(&format!("{id},{},{s}\n", u8::from(*y)));
    }
    out
}

pub fn read_test_cases_csv(path: &Path) -> Result<TestSet, RunError> {
    let bad = |message: String| RunError::Artifact {
        path: path.to_path_buf(),
        message,
    };
    let mut rdr = csv::Reader::from_path(path).map_err(|e| bad(e.to_string()))?;
    let mut test = TestSet {
        case_ids: Vec::new(),
        labels: Vec::new(),
        label_status: Vec::new(),
    };
    for rec in rdr.records() {
        let rec = rec.map_err(|e| bad(e.to_string()))?;
        let field = |i: usize| rec.get(i).ok_or_else(|| bad(format!("row has no column {i}")));
        test.case_ids.push(field(0)?.to_string());
        test.labels.push(field(1)? == "1");
        test.label_status.push(match field(2)? {
            "determinate" => LabelStatus::Determinate,
            "indeterminate" => LabelStatus::Indeterminate,
            other => return Err(bad(format!("unknown label status `{other}`"))),
        });
    }
    Ok(test)
}
