//! Plain-text rendering of reports.

use std::fmt::Write;

use labelind::evaluation::{PairMean, Summary};
use labelind::runner::CaseSummary;
use labelind::EvaluationReport;
use serde_json::Value;

fn summary(s: Option<Summary>) -> String {
    match s {
        Some(s) => format!("{:7.2} ± {:5.2}", s.mean, s.std),
        None => format!("{:>15}", "n/a"),
    }
}

fn probability(p: Option<f64>) -> String {
    p.map_or_else(|| "n/a".into(), |p| format!("{p:.4}"))
}

pub fn ingest_summary(s: &Value) -> String {
    let mut out = String::new();
    let _ = writeln!(out, "cases: {}  encoded columns: {}", s["cases"], s["features"]);
    for stratum in ["determinate", "indeterminate"] {
        let _ = writeln!(
            out,
            "{stratum}: {} cases, {} observed FTA",
            s[stratum]["cases"], s[stratum]["fta"]
        );
    }
    if let Some(statuses) = s["bail_status"].as_object() {
        for (status, n) in statuses {
            let _ = writeln!(out, "  {status}: {n}");
        }
    }
    out
}

fn pairs(out: &mut String, title: &str, pairs: &[PairMean]) {
    let _ = writeln!(out, "{title}");
    let mut sorted: Vec<&PairMean> = pairs.iter().collect();
    sorted.sort_by(|a, b| a.wasserstein.total_cmp(&b.wasserstein));
    for p in sorted {
        let _ = writeln!(out, "  {:>13} vs {:<13} {:.4}", p.a, p.b, p.wasserstein);
    }
}

pub fn report(r: &EvaluationReport) -> String {
    let mut out = String::new();
    let _ = writeln!(
        out,
        "scaled MCC over {} subsets (threshold {}), mean ± std",
        r.mcc.n_subsets, r.mcc.threshold
    );
    let _ = writeln!(out, "{:<8} {:<14} {:>15} {:>15}", "method", "model", "determinate", "indeterminate");
    for c in &r.mcc.cells {
        let _ = writeln!(
            out,
            "{:<8} {:<14} {} {}",
            c.method.as_str(),
            c.model.as_str(),
            summary(c.determinate),
            summary(c.indeterminate)
        );
    }
    let _ = writeln!(out, "\nmean predicted FTA probability");
    let _ = writeln!(out, "{:<8} {:<14} {:>11} {:>13}", "method", "model", "determinate", "indeterminate");
    for m in &r.mean_predictions {
        let _ = writeln!(
            out,
            "{:<8} {:<14} {:>11} {:>13}",
            m.method.as_str(),
            m.model.as_str(),
            probability(m.determinate),
            probability(m.indeterminate)
        );
    }
    let e = &r.effect;
    let _ = writeln!(
        out,
        "\nmean Wasserstein distance: across methods {:.4}, across models {:.4}",
        e.method_axis_mean, e.model_axis_mean
    );
    pairs(&mut out, "method pairs (model fixed, averaged)", &e.method_pairs);
    pairs(&mut out, "model pairs (method fixed, averaged)", &e.model_pairs);
    out
}

pub fn cases(summaries: &[CaseSummary]) -> String {
    let mut out = String::new();
    for s in summaries {
        let _ = writeln!(out, "{}", s.case_id);
        for m in &s.means {
            let _ = writeln!(
                out,
                "  {:<8} {:<14} {:.4}  ({} subsets)",
                m.method.as_str(),
                m.model.as_str(),
                m.mean,
                m.n_subsets
            );
        }
    }
    out
}

pub fn importance(r: &EvaluationReport, top: usize) -> String {
    let mut out = String::new();
    for (method, ranking) in &r.importance {
        let _ = writeln!(out, "{method} ({} models)", ranking.n_models);
        if ranking.n_models == 0 {
            let _ = writeln!(out, "  no boosted model made a split");
            continue;
        }
        for (i, f) in ranking.top(top).iter().enumerate() {
            let _ = writeln!(out, "  {}. {:<24} {:.4}", i + 1, f.feature, f.mean_gain);
        }
    }
    out
}
