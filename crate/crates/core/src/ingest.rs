//! CSV ingestion, schema validation and feature encoding.
//!
//! The schema is a JSON document. It names the identifier, outcome and bail
//! status columns, the lookup from raw status strings to [`BailKind`], the
//! revocation-cause lookup, the encoding of every model feature, and the
//! features that must never reach a model.

use std::collections::{BTreeMap, BTreeSet, HashMap, HashSet};
use std::fs::File;
use std::io::Read;
use std::path::Path;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::domain::{BailKind, BailStatus, CaseRecord};
use crate::matrix::{FeatureMatrix, MatrixError};

/// Features dropped before encoding: two irrelevant to appearance, four only
/// known after bail has been decided.
pub const EXCLUDED_FEATURES: [&str; 6] = [
    "date",
    "magistrate",
    "bailType",
    "bailAmount",
    "bailStatus",
    "bailDenied",
];

#[derive(Debug, Error)]
pub enum IngestError {
    #[error("missing column `{column}`")]
    MissingColumn { column: String },
    #[error("row {row}, column `{column}`: unknown bail status `{value}`")]
    UnknownBailStatus {
        row: usize,
        column: String,
        value: String,
    },
    #[error("row {row}, column `{column}`: cannot parse `{value}`")]
    UnparseableValue {
        row: usize,
        column: String,
        value: String,
    },
    #[error("row {row}, column `{column}`: missing value")]
    MissingValue { row: usize, column: String },
    #[error("row {row}, column `{column}`: value `{value}` is not allowed by the schema")]
    ValueOutOfSchema {
        row: usize,
        column: String,
        value: String,
    },
    #[error("row {row}: duplicate case id `{case_id}`")]
    DuplicateCaseId { row: usize, case_id: String },
    #[error("row {row}: revoked case but the schema has no revocation-cause lookup")]
    MissingRevocationLookup { row: usize },
    #[error("invalid schema: {0}")]
    InvalidSchema(String),
    #[error(transparent)]
    Matrix(#[from] MatrixError),
    #[error(transparent)]
    Csv(#[from] csv::Error),
    #[error(transparent)]
    Json(#[from] serde_json::Error),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

/// One bin of a binned numeric feature. `upper: None` marks an open-ended
/// top bin such as "65+".
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Bin {
    pub label: String,
    pub lower: f64,
    #[serde(default)]
    pub upper: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum FeatureKind {
    /// Encoded as the midpoint of the bin. Open-ended bins use
    /// `open_upper_cap` as their upper edge.
    BinnedNumeric {
        bins: Vec<Bin>,
        #[serde(default)]
        open_upper_cap: Option<f64>,
    },
    /// Encoded as the zero-based rank in `order`.
    Ordinal { order: Vec<String> },
    /// One-hot over `categories`, plus a `<name>=missing` column when
    /// `missing_category` is set.
    Categorical {
        categories: Vec<String>,
        #[serde(default)]
        missing_category: bool,
    },
    Boolean,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FeatureSpec {
    pub name: String,
    #[serde(flatten)]
    pub kind: FeatureKind,
}

/// Maps revocation-cause codes to "revoked because of FTA".
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RevocationLookup {
    pub column: String,
    pub fta_values: Vec<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FeatureSchema {
    #[serde(default = "default_id_column")]
    pub id_column: String,
    #[serde(default = "default_fta_column")]
    pub fta_column: String,
    #[serde(default = "default_status_column")]
    pub bail_status_column: String,
    /// Raw status string to kind. Canonical spellings ("Posted",
    /// "Partial Posting", ...) are accepted when this is empty.
    #[serde(default)]
    pub status_lookup: BTreeMap<String, BailKind>,
    #[serde(default)]
    pub revocation: Option<RevocationLookup>,
    pub features: Vec<FeatureSpec>,
    pub excluded_features: Vec<String>,
    /// Raw strings treated as a missing value.
    #[serde(default = "default_missing_tokens")]
    pub missing_tokens: Vec<String>,
}

fn default_id_column() -> String {
    "case_id".into()
}

fn default_fta_column() -> String {
    "fta".into()
}

fn default_status_column() -> String {
    "bailStatus".into()
}

fn default_missing_tokens() -> Vec<String> {
    vec![String::new(), "NA".into()]
}

impl FeatureSchema {
    pub fn from_json(text: &str) -> Result<Self, IngestError> {
        let schema: FeatureSchema = serde_json::from_str(text)?;
        schema.validate()?;
        Ok(schema)
    }

    pub fn from_path(path: impl AsRef<Path>) -> Result<Self, IngestError> {
        Self::from_json(&std::fs::read_to_string(path)?)
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("schema serializes")
    }

    pub fn validate(&self) -> Result<(), IngestError> {
        let invalid = |msg: String| Err(IngestError::InvalidSchema(msg));
        let excluded: BTreeSet<&str> = self.excluded_features.iter().map(String::as_str).collect();
        let expected: BTreeSet<&str> = EXCLUDED_FEATURES.into_iter().collect();
        if excluded != expected || excluded.len() != self.excluded_features.len() {
            return invalid(format!(
                "excluded_features must be exactly {:?}",
                EXCLUDED_FEATURES
            ));
        }
        let mut seen = HashSet::new();
        for spec in &self.features {
            if excluded.contains(spec.name.as_str()) {
                return invalid(format!("feature `{}` is excluded", spec.name));
            }
            if [&self.id_column, &self.fta_column].contains(&&spec.name) {
                return invalid(format!("feature `{}` is a reserved column", spec.name));
            }
            if !seen.insert(spec.name.as_str()) {
                return invalid(format!("feature `{}` declared twice", spec.name));
            }
            match &spec.kind {
                FeatureKind::BinnedNumeric {
                    bins,
                    open_upper_cap,
                } => {
                    if bins.is_empty() {
                        return invalid(format!("feature `{}` has no bins", spec.name));
                    }
                    for (i, bin) in bins.iter().enumerate() {
                        let upper = match bin.upper {
                            Some(u) => u,
                            None if i + 1 == bins.len() => match open_upper_cap {
                                Some(cap) => *cap,
                                None => {
                                    return invalid(format!(
                                        "feature `{}`: open bin `{}` needs open_upper_cap",
                                        spec.name, bin.label
                                    ))
                                }
                            },
                            None => {
                                return invalid(format!(
                                    "feature `{}`: only the last bin may be open-ended",
                                    spec.name
                                ))
                            }
                        };
                        if !(bin.lower.is_finite() && upper.is_finite() && bin.lower < upper) {
                            return invalid(format!(
                                "feature `{}`: bin `{}` has bad edges",
                                spec.name, bin.label
                            ));
                        }
                        if let Some(next) = bins.get(i + 1) {
                            if next.lower < upper {
                                return invalid(format!(
                                    "feature `{}`: bins overlap or are unsorted",
                                    spec.name
                                ));
                            }
                        }
                    }
                }
                FeatureKind::Ordinal { order } if order.is_empty() => {
                    return invalid(format!("feature `{}` has an empty order", spec.name))
                }
                FeatureKind::Categorical { categories, .. } if categories.is_empty() => {
                    return invalid(format!("feature `{}` has no categories", spec.name))
                }
                _ => {}
            }
        }
        Ok(())
    }

    fn is_missing(&self, raw: &str) -> bool {
        self.missing_tokens.iter().any(|t| t == raw.trim())
    }

    fn parse_status(&self, raw: &str) -> Option<BailKind> {
        let raw = raw.trim();
        if self.status_lookup.is_empty() {
            BailKind::from_canonical(raw)
        } else {
            self.status_lookup.get(raw).copied()
        }
    }

    /// Encoded column names, in output order.
    pub fn column_names(&self) -> Vec<String> {
        let mut names = Vec::new();
        for spec in &self.features {
            match &spec.kind {
                FeatureKind::Categorical {
                    categories,
                    missing_category,
                } => {
                    names.extend(categories.iter().map(|c| format!("{}={}", spec.name, c)));
                    if *missing_category {
                        names.push(format!("{}=missing", spec.name));
                    }
                }
                _ => names.push(spec.name.clone()),
            }
        }
        names
    }
}

pub fn parse_bool(raw: &str) -> Option<bool> {
    match raw.trim().to_ascii_lowercase().as_str() {
        "1" | "true" | "yes" | "y" | "t" => Some(true),
        "0" | "false" | "no" | "n" | "f" => Some(false),
        _ => None,
    }
}

/// Loads and validates every row of a case CSV.
pub fn load_cases(path: impl AsRef<Path>, schema: &FeatureSchema) -> Result<Vec<CaseRecord>, IngestError> {
    read_cases(File::open(path)?, schema)
}

pub fn read_cases<R: Read>(reader: R, schema: &FeatureSchema) -> Result<Vec<CaseRecord>, IngestError> {
    schema.validate()?;
    let mut rdr = csv::ReaderBuilder::new().has_headers(true).from_reader(reader);
    let headers = rdr.headers()?.clone();
    let index: HashMap<&str, usize> = headers.iter().enumerate().map(|(i, h)| (h, i)).collect();
    let find = |name: &str| {
        index.get(name).copied().ok_or_else(|| IngestError::MissingColumn {
            column: name.to_string(),
        })
    };

    let id_col = find(&schema.id_column)?;
    let fta_col = find(&schema.fta_column)?;
    let status_col = find(&schema.bail_status_column)?;
    let revocation_col = match &schema.revocation {
        Some(r) => Some(find(&r.column)?),
        None => None,
    };
    let mut raw_cols: Vec<(String, usize, bool)> = Vec::new();
    for spec in &schema.features {
        let categorical = matches!(spec.kind, FeatureKind::Categorical { .. });
        raw_cols.push((spec.name.clone(), find(&spec.name)?, categorical));
    }
    // Excluded features are kept raw when present, never encoded.
    for name in &schema.excluded_features {
        if let Some(&i) = index.get(name.as_str()) {
            raw_cols.push((name.clone(), i, true));
        }
    }

    let mut seen_ids = HashSet::new();
    let mut cases = Vec::new();
    for (i, rec) in rdr.records().enumerate() {
        let rec = rec?;
        let row = i + 1;
        let cell = |c: usize| rec.get(c).unwrap_or("");

        let case_id = cell(id_col).trim().to_string();
        if !seen_ids.insert(case_id.clone()) {
            return Err(IngestError::DuplicateCaseId { row, case_id });
        }
        let fta_raw = cell(fta_col);
        let fta_observed = parse_bool(fta_raw).ok_or_else(|| IngestError::UnparseableValue {
            row,
            column: schema.fta_column.clone(),
            value: fta_raw.to_string(),
        })?;
        let status_raw = cell(status_col);
        let kind = schema
            .parse_status(status_raw)
            .ok_or_else(|| IngestError::UnknownBailStatus {
                row,
                column: schema.bail_status_column.clone(),
                value: status_raw.to_string(),
            })?;
        let due_to_fta = if kind == BailKind::Revoked {
            match (&schema.revocation, revocation_col) {
                (Some(lookup), Some(c)) => lookup.fta_values.iter().any(|v| v == cell(c).trim()),
                _ => return Err(IngestError::MissingRevocationLookup { row }),
            }
        } else {
            false
        };
        let bail_status = BailStatus::new(kind, due_to_fta).expect("cause only set on Revoked");

        let mut features = BTreeMap::new();
        for (name, c, categorical) in &raw_cols {
            let value = cell(*c);
            if !categorical && schema.is_missing(value) {
                return Err(IngestError::MissingValue {
                    row,
                    column: name.clone(),
                });
            }
            features.insert(name.clone(), value.to_string());
        }
        cases.push(CaseRecord::new(case_id, features, bail_status, fta_observed));
    }
    Ok(cases)
}

fn bin_midpoint(bins: &[Bin], cap: Option<f64>, raw: &str) -> Option<f64> {
    let raw = raw.trim();
    let upper = |b: &Bin| b.upper.or(cap);
    let mid = |b: &Bin| upper(b).map(|u| 0.5 * (b.lower + u));
    if let Some(b) = bins.iter().find(|b| b.label == raw) {
        return mid(b);
    }
    let x: f64 = raw.parse().ok()?;
    bins.iter()
        .find(|b| x >= b.lower && b.upper.is_none_or(|u| x < u))
        .and_then(mid)
}

/// Encodes raw case features into a numeric matrix in schema order.
pub fn encode_features(cases: &[CaseRecord], schema: &FeatureSchema) -> Result<FeatureMatrix, IngestError> {
    schema.validate()?;
    let column_names = schema.column_names();
    let p = column_names.len();
    let mut values = vec![0.0; cases.len() * p];
    for (r, case) in cases.iter().enumerate() {
        let row = r + 1;
        let out = &mut values[r * p..(r + 1) * p];
        let mut col = 0;
        for spec in &schema.features {
            let raw = case.features.get(&spec.name).ok_or_else(|| IngestError::MissingColumn {
                column: spec.name.clone(),
            })?;
            let out_of_schema = || IngestError::ValueOutOfSchema {
                row,
                column: spec.name.clone(),
                value: raw.clone(),
            };
            match &spec.kind {
                FeatureKind::BinnedNumeric {
                    bins,
                    open_upper_cap,
                } => {
                    out[col] = bin_midpoint(bins, *open_upper_cap, raw).ok_or_else(out_of_schema)?;
                    col += 1;
                }
                FeatureKind::Ordinal { order } => {
                    let rank = order.iter().position(|o| o == raw.trim()).ok_or_else(out_of_schema)?;
                    out[col] = rank as f64;
                    col += 1;
                }
                FeatureKind::Categorical {
                    categories,
                    missing_category,
                } => {
                    let width = categories.len() + usize::from(*missing_category);
                    match categories.iter().position(|c| c == raw.trim()) {
                        Some(k) => out[col + k] = 1.0,
                        None if *missing_category && schema.is_missing(raw) => {
                            out[col + categories.len()] = 1.0
                        }
                        None => return Err(out_of_schema()),
                    }
                    col += width;
                }
                FeatureKind::Boolean => {
                    out[col] = if parse_bool(raw).ok_or_else(out_of_schema)? { 1.0 } else { 0.0 };
                    col += 1;
                }
            }
        }
        debug_assert_eq!(col, p);
    }
    let ids = cases.iter().map(|c| c.case_id.clone()).collect();
    Ok(FeatureMatrix::new(ids, column_names, values)?)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::domain::LabelStatus;

    const SCHEMA: &str = r#"{
        "revocation": {"column": "revocationCause", "fta_values": ["FTA"]},
        "features": [
            {"name": "age", "kind": "binned_numeric", "open_upper_cap": 80,
             "bins": [{"label": "18-24", "lower": 18, "upper": 25},
                      {"label": "25-64", "lower": 25, "upper": 65},
                      {"label": "65+", "lower": 65}]},
            {"name": "employment", "kind": "ordinal", "order": ["low", "mid", "high"]},
            {"name": "attorney", "kind": "categorical", "categories": ["A", "B", "C"]},
            {"name": "race", "kind": "categorical", "categories": ["X", "Y"], "missing_category": true},
            {"name": "felony", "kind": "boolean"}
        ],
        "excluded_features": ["date", "magistrate", "bailType", "bailAmount", "bailStatus", "bailDenied"]
    }"#;

    const CSV: &str = "case_id,fta,bailStatus,revocationCause,age,employment,attorney,race,felony,magistrate,bailAmount\n\
        c1,0,Denied,,18-24,low,B,X,1,M1,500\n\
        c2,1,Posted,,65+,high,A,,0,M2,100\n\
        c3,1,Revoked,FTA,30,mid,C,Y,true,M1,0\n\
        c4,0,Revoked,Other,25-64,mid,C,Y,false,M3,0\n";

    fn schema() -> FeatureSchema {
        FeatureSchema::from_json(SCHEMA).unwrap()
    }

    #[test]
    fn loads_and_classifies() {
        let cases = read_cases(CSV.as_bytes(), &schema()).unwrap();
        assert_eq!(cases.len(), 4);
        assert_eq!(cases[0].label_status(), LabelStatus::Indeterminate);
        assert_eq!(cases[1].label_status(), LabelStatus::Determinate);
        assert_eq!(cases[2].label_status(), LabelStatus::Determinate);
        assert_eq!(cases[3].label_status(), LabelStatus::Indeterminate);
        assert!(cases[1].fta_observed);
    }

    #[test]
    fn missing_fta_column() {
        let csv = "case_id,bailStatus,age\nc1,Posted,18-24\n";
        let err = read_cases(csv.as_bytes(), &schema()).unwrap_err();
        assert!(matches!(err, IngestError::MissingColumn { ref column } if column == "fta"));
    }

    #[test]
    fn unknown_status_names_row_and_column() {
        let csv = CSV.replace("c2,1,Posted", "c2,1,Parole");
        match read_cases(csv.as_bytes(), &schema()).unwrap_err() {
            IngestError::UnknownBailStatus { row, column, value } => {
                assert_eq!((row, column.as_str(), value.as_str()), (2, "bailStatus", "Parole"));
            }
            other => panic!("unexpected {other}"),
        }
    }

    #[test]
    fn revoked_without_lookup_is_an_error() {
        let mut s = schema();
        s.revocation = None;
        let err = read_cases(CSV.as_bytes(), &s).unwrap_err();
        assert!(matches!(err, IngestError::MissingRevocationLookup { row: 3 }));
    }

    #[test]
    fn numeric_missing_is_an_error() {
        let csv = CSV.replace("c1,0,Denied,,18-24", "c1,0,Denied,,");
        let err = read_cases(csv.as_bytes(), &schema()).unwrap_err();
        assert!(matches!(err, IngestError::MissingValue { row: 1, ref column } if column == "age"));
    }

    #[test]
    fn unparseable_fta() {
        let csv = CSV.replace("c1,0,", "c1,maybe,");
        let err = read_cases(csv.as_bytes(), &schema()).unwrap_err();
        assert!(matches!(err, IngestError::UnparseableValue { row: 1, .. }));
    }

    #[test]
    fn encoding_matches_definitions() {
        let cases = read_cases(CSV.as_bytes(), &schema()).unwrap();
        let m = encode_features(&cases, &schema()).unwrap();
        assert_eq!(
            m.column_names(),
            &[
                "age",
                "employment",
                "attorney=A",
                "attorney=B",
                "attorney=C",
                "race=X",
                "race=Y",
                "race=missing",
                "felony"
            ]
        );
        // [18, 25) -> 21.5; categorical B -> (0, 1, 0)
        assert_eq!(m.row(0), &[21.5, 0.0, 0.0, 1.0, 0.0, 1.0, 0.0, 0.0, 1.0]);
        // open-ended bin uses the cap; missing race goes to its own column
        assert_eq!(m.row(1), &[72.5, 2.0, 1.0, 0.0, 0.0, 0.0, 0.0, 1.0, 0.0]);
        // numeric raw value falls in [25, 65)
        assert_eq!(m.get(2, 0), 45.0);
    }

    #[test]
    fn excluded_features_never_encoded() {
        let cases = read_cases(CSV.as_bytes(), &schema()).unwrap();
        assert_eq!(cases[0].features["magistrate"], "M1");
        let m = encode_features(&cases, &schema()).unwrap();
        for name in m.column_names() {
            let base = name.split('=').next().unwrap();
            assert!(!EXCLUDED_FEATURES.contains(&base), "{name}");
        }
    }

    #[test]
    fn value_out_of_schema() {
        let csv = CSV.replace("c1,0,Denied,,18-24,low,B", "c1,0,Denied,,18-24,low,Z");
        let cases = read_cases(csv.as_bytes(), &schema()).unwrap();
        let err = encode_features(&cases, &schema()).unwrap_err();
        assert!(matches!(err, IngestError::ValueOutOfSchema { row: 1, ref value, .. } if value == "Z"));
    }

    #[test]
    fn schema_must_exclude_exactly_six() {
        let bad = SCHEMA.replace("\"bailDenied\"", "\"bailDeniedX\"");
        assert!(matches!(
            FeatureSchema::from_json(&bad),
            Err(IngestError::InvalidSchema(_))
        ));
        let bad = SCHEMA.replace("\"name\": \"felony\"", "\"name\": \"magistrate\"");
        assert!(FeatureSchema::from_json(&bad).is_err());
    }

    #[test]
    fn open_bin_requires_cap() {
        let bad = SCHEMA.replace("\"open_upper_cap\": 80,", "");
        assert!(FeatureSchema::from_json(&bad).is_err());
    }

    #[test]
    fn duplicate_ids_rejected() {
        let csv = CSV.replace("c2,", "c1,");
        assert!(matches!(
            read_cases(csv.as_bytes(), &schema()),
            Err(IngestError::DuplicateCaseId { row: 2, .. })
        ));
    }
}
