//! Plot-ready CSV and JSON tables.
//!
//! CSV files open with `#`-prefixed metadata lines (tool version, then the
//! run configuration as one line of JSON) followed by a header row. JSON
//! files are objects `{"tool", "config", ...}`. Output is a pure function of
//! the inputs, so equal metadata implies byte-identical files.

use serde::Serialize;
use serde_json::{json, Value};

use crate::bootstrap::CurveBand;
use crate::estimators::{RocCurve, StepCdf};
use crate::fairness::FairnessReport;
use crate::synthetic::CoverageReport;

pub const TOOL: &str = concat!("uroc ", env!("CARGO_PKG_VERSION"));

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Metadata {
    pub tool: String,
    pub config: Value,
}

impl Metadata {
    pub fn new(config: Value) -> Self {
        Self {
            tool: TOOL.to_string(),
            config,
        }
    }

    fn csv_preamble(&self) -> String {
        format!("# tool: {}\n# config: {}\n", self.tool, self.config)
    }

    fn json_with(&self, body: Value) -> String {
        let mut obj = json!({ "tool": self.tool, "config": self.config });
        if let (Value::Object(dst), Value::Object(src)) = (&mut obj, body) {
            dst.extend(src);
        }
        let mut s = serde_json::to_string_pretty(&obj).expect("JSON values always serialize");
        s.push('\n');
        s
    }
}

fn num(x: f64) -> String {
    x.to_string()
}

fn opt(x: Option<f64>) -> String {
    x.map(num).unwrap_or_default()
}

fn table(meta: &Metadata, header: &str, rows: impl Iterator<Item = String>) -> String {
    let mut out = meta.csv_preamble();
    out.push_str(header);
    out.push('\n');
    for row in rows {
        out.push_str(&row);
        out.push('\n');
    }
    out
}

/// `alpha,value`.
pub fn curve_csv(meta: &Metadata, curve: &RocCurve) -> String {
    table(
        meta,
        "alpha,value",
        curve
            .alphas
            .iter()
            .zip(&curve.values)
            .map(|(a, v)| format!("{},{}", num(*a), num(*v))),
    )
}

pub fn curve_json(meta: &Metadata, curve: &RocCurve) -> String {
    let data: Vec<Value> = curve
        .alphas
        .iter()
        .zip(&curve.values)
        .map(|(a, v)| json!({ "alpha": a, "value": v }))
        .collect();
    meta.json_with(json!({ "data": data }))
}

/// `alpha,value` where missing values are empty fields.
pub fn optional_curve_csv(meta: &Metadata, alphas: &[f64], values: &[Option<f64>]) -> String {
    table(
        meta,
        "alpha,value",
        alphas
            .iter()
            .zip(values)
            .map(|(a, v)| format!("{},{}", num(*a), opt(*v))),
    )
}

pub fn optional_curve_json(meta: &Metadata, alphas: &[f64], values: &[Option<f64>]) -> String {
    let data: Vec<Value> = alphas
        .iter()
        .zip(values)
        .map(|(a, v)| json!({ "alpha": a, "value": v }))
        .collect();
    meta.json_with(json!({ "data": data }))
}

/// `threshold,cumulative`.
pub fn cdf_csv(meta: &Metadata, cdf: &StepCdf) -> String {
    table(
        meta,
        "threshold,cumulative",
        cdf.thresholds()
            .iter()
            .zip(cdf.cum_weight())
            .map(|(t, c)| format!("{},{}", num(*t), num(*c))),
    )
}

/// `alpha,estimate,lower,upper,replicate_std`.
pub fn band_csv(meta: &Metadata, band: &CurveBand) -> String {
    table(
        meta,
        "alpha,estimate,lower,upper,replicate_std",
        (0..band.alphas.len()).map(|i| {
            format!(
                "{},{},{},{},{}",
                num(band.alphas[i]),
                num(band.estimate[i]),
                num(band.lower[i]),
                num(band.upper[i]),
                num(band.replicate_std[i])
            )
        }),
    )
}

pub fn band_json(meta: &Metadata, band: &CurveBand) -> String {
    let data: Vec<Value> = (0..band.alphas.len())
        .map(|i| {
            json!({
                "alpha": band.alphas[i],
                "estimate": band.estimate[i],
                "lower": band.lower[i],
                "upper": band.upper[i],
                "replicate_std": band.replicate_std[i],
            })
        })
        .collect();
    meta.json_with(json!({
        "B": band.replicates,
        "alpha_CI": band.alpha_ci,
        "seed": band.seed,
        "mode": band.mode,
        "scope": band.scope,
        "data": data,
    }))
}

pub const FAIRNESS_HEADER: &str =
    "alpha,metric,side,classic,lower,upper,replicate_std,normalized_std,floored_groups";

/// One row per α in [`FAIRNESS_HEADER`] layout.
pub fn fairness_csv(meta: &Metadata, report: &FairnessReport) -> String {
    table(
        meta,
        FAIRNESS_HEADER,
        (0..report.alphas.len()).map(|i| {
            format!(
                "{},{},{},{},{},{},{},{},{}",
                num(report.alphas[i]),
                report.metric,
                report.side,
                num(report.classic[i]),
                opt(report.lower[i]),
                opt(report.upper[i]),
                opt(report.replicate_std[i]),
                opt(report.normalized_std[i]),
                report.floored_groups[i]
            )
        }),
    )
}

pub fn fairness_json(meta: &Metadata, report: &FairnessReport) -> String {
    let data: Vec<Value> = (0..report.alphas.len())
        .map(|i| {
            json!({
                "alpha": report.alphas[i],
                "classic": report.classic[i],
                "vstat": report.vstat[i],
                "bootstrap_mean": report.bootstrap_mean[i],
                "lower": report.lower[i],
                "upper": report.upper[i],
                "replicate_std": report.replicate_std[i],
                "normalized_std": report.normalized_std[i],
                "floored_groups": report.floored_groups[i],
                "excluded_replicates": report.excluded_replicates[i],
            })
        })
        .collect();
    meta.json_with(json!({
        "metric": report.metric,
        "side": report.side,
        "B": report.replicates,
        "alpha_CI": report.alpha_ci,
        "seed": report.seed,
        "zero_policy": report.zero_policy,
        "data": data,
    }))
}

/// `alpha,mode,coverage,reps,B`.
pub fn coverage_csv(meta: &Metadata, report: &CoverageReport) -> String {
    let rows = report.alphas.iter().enumerate().flat_map(|(i, a)| {
        [
            ("recentered", report.recentered[i]),
            ("naive", report.naive[i]),
        ]
        .into_iter()
        .map(move |(mode, c)| {
            format!(
                "{},{mode},{},{},{}",
                num(*a),
                num(c),
                report.reps,
                report.replicates
            )
        })
    });
    table(meta, "alpha,mode,coverage,reps,B", rows)
}

pub fn coverage_json(meta: &Metadata, report: &CoverageReport) -> String {
    let data: Vec<Value> = (0..report.alphas.len())
        .map(|i| {
            json!({
                "alpha": report.alphas[i],
                "truth": report.truth[i],
                "recentered": report.recentered[i],
                "naive": report.naive[i],
            })
        })
        .collect();
    meta.json_with(json!({
        "reps": report.reps,
        "B": report.replicates,
        "alpha_CI": report.alpha_ci,
        "data": data,
    }))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn curve_csv_layout() {
        let meta = Metadata::new(json!({"seed": 1}));
        let curve = RocCurve {
            alphas: vec![0.1, 0.5],
            values: vec![0.25, 0.0],
        };
        let csv = curve_csv(&meta, &curve);
        let lines: Vec<&str> = csv.lines().collect();
        assert!(lines[0].starts_with("# tool: uroc "));
        assert_eq!(lines[1], "# config: {\"seed\":1}");
        assert_eq!(&lines[2..], &["alpha,value", "0.1,0.25", "0.5,0"]);

        let parsed: Value = serde_json::from_str(&curve_json(&meta, &curve)).unwrap();
        assert_eq!(parsed["data"][0]["value"], json!(0.25));
        assert_eq!(parsed["config"]["seed"], json!(1));
    }

    #[test]
    fn missing_values_are_empty() {
        let meta = Metadata::new(Value::Null);
        let csv = optional_curve_csv(&meta, &[0.1, 0.2], &[Some(0.5), None]);
        assert!(csv.ends_with("alpha,value\n0.1,0.5\n0.2,\n"));
        let parsed: Value =
            serde_json::from_str(&optional_curve_json(&meta, &[0.1], &[None])).unwrap();
        assert!(parsed["data"][0]["value"].is_null());
    }
}
