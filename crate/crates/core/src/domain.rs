//! Core case types and the determinacy rule.
//!
//! A case's FTA label is *determinate* when nothing about the bail outcome
//! forced the defendant's appearance (or non-appearance). Pretrial detention
//! censors the outcome, so every status that implies detention yields an
//! *indeterminate* label.

use std::collections::BTreeMap;
use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

/// Bail status as recorded at the end of the pretrial phase.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum BailKind {
    Posted,
    Forfeited,
    Revoked,
    Denied,
    Set,
    PartialPosting,
    BondTerminated,
}

impl BailKind {
    pub const ALL: [BailKind; 7] = [
        BailKind::Posted,
        BailKind::Forfeited,
        BailKind::Revoked,
        BailKind::Denied,
        BailKind::Set,
        BailKind::PartialPosting,
        BailKind::BondTerminated,
    ];

    /// Canonical spelling used in exported CSV files.
    pub fn as_str(self) -> &'static str {
        match self {
            BailKind::Posted => "Posted",
            BailKind::Forfeited => "Forfeited",
            BailKind::Revoked => "Revoked",
            BailKind::Denied => "Denied",
            BailKind::Set => "Set",
            BailKind::PartialPosting => "Partial Posting",
            BailKind::BondTerminated => "Bond Terminated",
        }
    }

    /// Parses the canonical spelling. Dataset-specific spellings go through
    /// the schema's status lookup instead.
    pub fn from_canonical(s: &str) -> Option<BailKind> {
        BailKind::ALL.into_iter().find(|k| k.as_str() == s)
    }
}

impl fmt::Display for BailKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

/// A bail status together with the revocation cause.
///
/// `revocation_due_to_fta` can only be set on [`BailKind::Revoked`]; the
/// constructor enforces this.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct BailStatus {
    kind: BailKind,
    revocation_due_to_fta: bool,
}

impl BailStatus {
    pub fn new(kind: BailKind, revocation_due_to_fta: bool) -> Option<Self> {
        if revocation_due_to_fta && kind != BailKind::Revoked {
            return None;
        }
        Some(Self {
            kind,
            revocation_due_to_fta,
        })
    }

    /// Status without an FTA revocation cause.
    pub fn plain(kind: BailKind) -> Self {
        Self {
            kind,
            revocation_due_to_fta: false,
        }
    }

    pub fn revoked(due_to_fta: bool) -> Self {
        Self {
            kind: BailKind::Revoked,
            revocation_due_to_fta: due_to_fta,
        }
    }

    pub fn kind(&self) -> BailKind {
        self.kind
    }

    pub fn revocation_due_to_fta(&self) -> bool {
        self.revocation_due_to_fta
    }

    /// Every distinct status configuration: the seven kinds plus the
    /// FTA-caused revocation.
    pub fn all_configurations() -> Vec<BailStatus> {
        let mut out: Vec<BailStatus> = BailKind::ALL.iter().map(|&k| Self::plain(k)).collect();
        out.push(Self::revoked(true));
        out
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum LabelStatus {
    Determinate,
    Indeterminate,
}

impl LabelStatus {
    pub fn is_determinate(self) -> bool {
        self == LabelStatus::Determinate
    }
}

impl fmt::Display for LabelStatus {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            LabelStatus::Determinate => f.write_str("determinate"),
            LabelStatus::Indeterminate => f.write_str("indeterminate"),
        }
    }
}

/// Maps a bail status to the determinacy of its FTA label.
///
/// Posted, Forfeited and FTA-caused revocations leave the outcome observed.
/// Everything else implies pretrial detention.
pub fn classify_label_status(status: BailStatus) -> LabelStatus {
    match status.kind() {
        BailKind::Posted | BailKind::Forfeited => LabelStatus::Determinate,
        BailKind::Revoked if status.revocation_due_to_fta() => LabelStatus::Determinate,
        BailKind::Revoked
        | BailKind::Denied
        | BailKind::Set
        | BailKind::PartialPosting
        | BailKind::BondTerminated => LabelStatus::Indeterminate,
    }
}

/// One bail case.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CaseRecord {
    pub case_id: String,
    /// Raw feature values keyed by column name, as they appear in the source.
    pub features: BTreeMap<String, String>,
    pub bail_status: BailStatus,
    /// `true` when the defendant failed to appear.
    pub fta_observed: bool,
    label_status: LabelStatus,
}

impl CaseRecord {
    pub fn new(
        case_id: impl Into<String>,
        features: BTreeMap<String, String>,
        bail_status: BailStatus,
        fta_observed: bool,
    ) -> Self {
        Self {
            case_id: case_id.into(),
            features,
            bail_status,
            fta_observed,
            label_status: classify_label_status(bail_status),
        }
    }

    pub fn label_status(&self) -> LabelStatus {
        self.label_status
    }
}

/// The five ways of assigning training labels to indeterminate cases.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ImputationMethod {
    /// Keep observed labels as they are.
    Corr,
    /// Detention as failure: indeterminate cases become FTA.
    Daf,
    /// Observed only: drop indeterminate cases.
    Obs,
    /// Observed only, inverse-propensity weighted.
    ObsIp,
    /// Nearest-neighbour label imputation.
    Nn,
}

impl ImputationMethod {
    pub const ALL: [ImputationMethod; 5] = [
        ImputationMethod::Corr,
        ImputationMethod::Daf,
        ImputationMethod::Obs,
        ImputationMethod::ObsIp,
        ImputationMethod::Nn,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            ImputationMethod::Corr => "corr",
            ImputationMethod::Daf => "daf",
            ImputationMethod::Obs => "obs",
            ImputationMethod::ObsIp => "obs_ip",
            ImputationMethod::Nn => "nn",
        }
    }
}

impl fmt::Display for ImputationMethod {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for ImputationMethod {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "corr" => Ok(ImputationMethod::Corr),
            "daf" => Ok(ImputationMethod::Daf),
            "obs" => Ok(ImputationMethod::Obs),
            "obs_ip" | "obs+ip" => Ok(ImputationMethod::ObsIp),
            "nn" => Ok(ImputationMethod::Nn),
            other => Err(format!("unknown imputation method `{other}`")),
        }
    }
}

/// The three classifier families.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ModelKind {
    Logistic,
    RandomForest,
    Xgboost,
}

impl ModelKind {
    pub const ALL: [ModelKind; 3] = [ModelKind::Logistic, ModelKind::RandomForest, ModelKind::Xgboost];

    pub fn as_str(self) -> &'static str {
        match self {
            ModelKind::Logistic => "logistic",
            ModelKind::RandomForest => "random_forest",
            ModelKind::Xgboost => "xgboost",
        }
    }
}

impl fmt::Display for ModelKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for ModelKind {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "logistic" | "lr" => Ok(ModelKind::Logistic),
            "random_forest" | "rf" => Ok(ModelKind::RandomForest),
            "xgboost" | "gbdt" | "xgb" => Ok(ModelKind::Xgboost),
            other => Err(format!("unknown model kind `{other}`")),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn posted_is_determinate() {
        assert_eq!(
            classify_label_status(BailStatus::plain(BailKind::Posted)),
            LabelStatus::Determinate
        );
    }

    #[test]
    fn denied_is_indeterminate() {
        assert_eq!(
            classify_label_status(BailStatus::plain(BailKind::Denied)),
            LabelStatus::Indeterminate
        );
    }

    #[test]
    fn revocation_cause_splits_revoked() {
        assert_eq!(classify_label_status(BailStatus::revoked(true)), LabelStatus::Determinate);
        assert_eq!(classify_label_status(BailStatus::revoked(false)), LabelStatus::Indeterminate);
    }

    #[test]
    fn fta_revocation_only_on_revoked() {
        for kind in BailKind::ALL {
            let ok = BailStatus::new(kind, true).is_some();
            assert_eq!(ok, kind == BailKind::Revoked, "{kind}");
            assert!(BailStatus::new(kind, false).is_some());
        }
    }

    #[test]
    fn every_configuration_is_classified_once() {
        let configs = BailStatus::all_configurations();
        assert_eq!(configs.len(), 8);
        let determinate = configs
            .iter()
            .filter(|s| classify_label_status(**s).is_determinate())
            .count();
        assert_eq!(determinate, 3);
    }

    #[test]
    fn case_record_derives_label_status() {
        let rec = CaseRecord::new("c1", BTreeMap::new(), BailStatus::plain(BailKind::Set), false);
        assert_eq!(rec.label_status(), LabelStatus::Indeterminate);
    }

    #[test]
    fn method_names_round_trip() {
        for m in ImputationMethod::ALL {
            assert_eq!(m.as_str().parse::<ImputationMethod>().unwrap(), m);
        }
        for m in ModelKind::ALL {
            assert_eq!(m.as_str().parse::<ModelKind>().unwrap(), m);
        }
    }
}
