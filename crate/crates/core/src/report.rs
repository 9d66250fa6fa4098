//! Versioned JSON reports and their flat CSV and text renderings.

use serde::Serialize;
use serde_json::{Map, Value as Json};

use crate::band::Band;
use crate::bma::{BmaFit, BmaPValues, CoefficientSummary, ModelEntry};
use crate::error::{Error, Result};
use crate::glm::pvalue::PosteriorPredictiveCheck;
use crate::glm::GlmFit;
use crate::ic::InformationCriteria;
use crate::linear::{Diagnostics, LinearFit};
use crate::mc_plan::SamplePlan;
use crate::np_boot::NpFit;
use crate::summary::{BayesFactor, InferenceSummary, Rope};
use crate::survival::{SurvivalCurve, SurvivalFit};

/// Bumped whenever a field is renamed or removed.
pub const SCHEMA_VERSION: u32 = 1;
pub const SCHEMA_NAME: &str = "bayesics.report";

#[derive(Debug, Clone, Serialize)]
pub struct Report {
    pub schema: &'static str,
    pub schema_version: u32,
    pub command: String,
    pub seed: u64,
    /// Echo of the parsed command-line options.
    pub config: Json,
    pub result: Json,
}

impl Report {
    pub fn new(command: &str, seed: u64, config: impl Serialize, result: impl Serialize) -> Result<Report> {
        Ok(Report {
            schema: SCHEMA_NAME,
            schema_version: SCHEMA_VERSION,
            command: command.to_string(),
            seed,
            config: to_json(config)?,
            result: to_json(result)?,
        })
    }

    pub fn to_json_string(&self) -> Result<String> {
        let mut s = serde_json::to_string_pretty(self).map_err(|e| Error::Numerical(format!("cannot serialize report: {e}")))?;
        s.push('\n');
        Ok(s)
    }
}

pub fn to_json(value: impl Serialize) -> Result<Json> {
    serde_json::to_value(value).map_err(|e| Error::Numerical(format!("cannot serialize report: {e}")))
}

/// Serialized name of a unit enum variant.
fn json_str(value: impl Serialize) -> Result<String> {
    Ok(to_json(value)?.as_str().unwrap_or_default().to_string())
}

#[derive(Debug, Clone, Serialize)]
pub struct LmReport {
    pub formula: String,
    pub n: usize,
    pub dropped_rows: usize,
    pub prior: String,
    pub coefficients: Vec<InferenceSummary>,
    pub full_vs_null: BayesFactor,
    pub log_marginal_likelihood: f64,
    pub information_criteria: InformationCriteria,
    pub diagnostics: Diagnostics,
    pub band: Option<Band>,
}

pub fn lm_report(fit: &LinearFit, ci_level: f64, rope: Option<Rope>, band: Option<&str>) -> Result<LmReport> {
    Ok(LmReport {
        formula: fit.design.formula.to_string(),
        n: fit.design.n(),
        dropped_rows: fit.design.dropped_rows,
        prior: json_str(fit.prior.kind)?,
        coefficients: fit.summaries(ci_level, rope)?,
        full_vs_null: fit.full_vs_null()?,
        log_marginal_likelihood: fit.log_marginal_likelihood,
        information_criteria: fit.information_criteria()?,
        diagnostics: fit.diagnostics(),
        band: band.map(|v| fit.credible_band(v, None, ci_level)).transpose()?,
    })
}

#[derive(Debug, Clone, Serialize)]
pub struct GlmReport {
    pub formula: String,
    pub family: String,
    pub link: String,
    pub method: String,
    pub n: usize,
    pub dropped_rows: usize,
    /// "ratio" when coefficients are reported exponentiated.
    pub scale: String,
    pub prior: Vec<PriorEntry>,
    pub coefficients: Vec<InferenceSummary>,
    pub approximation_steps: usize,
    pub elbo_trace: Vec<f64>,
    pub information_criteria: Option<InformationCriteria>,
    pub posterior_predictive_check: Option<PosteriorPredictiveCheck>,
    pub band: Option<Band>,
    pub sample_plans: Vec<SamplePlan>,
}

#[derive(Debug, Clone, Serialize)]
pub struct PriorEntry {
    pub label: String,
    pub mean: f64,
    pub sd: f64,
}

pub fn glm_report(
    fit: &GlmFit,
    ci_level: f64,
    rope: Option<Rope>,
    ic: bool,
    check: Option<PosteriorPredictiveCheck>,
    band: Option<&str>,
) -> Result<GlmReport> {
    Ok(GlmReport {
        formula: fit.design.formula.to_string(),
        family: fit.family.to_string(),
        link: fit.family.link().to_string(),
        method: json_str(fit.approx.method)?,
        n: fit.design.n(),
        dropped_rows: fit.design.dropped_rows,
        scale: if fit.family.ratio_scale() { "ratio" } else { "identity" }.into(),
        prior: fit
            .prior
            .labels
            .iter()
            .zip(fit.prior.mean.iter().zip(&fit.prior.sd))
            .map(|(l, (m, s))| PriorEntry { label: l.clone(), mean: *m, sd: *s })
            .collect(),
        coefficients: fit.summaries(ci_level, rope)?,
        approximation_steps: fit.approx.steps,
        elbo_trace: fit.approx.elbo_trace.clone(),
        information_criteria: if ic { Some(fit.information_criteria()?) } else { None },
        posterior_predictive_check: check,
        band: band.map(|v| fit.credible_band(v, None, ci_level)).transpose()?,
        sample_plans: fit.sample_plans.clone(),
    })
}

#[derive(Debug, Clone, Serialize)]
pub struct NpReport {
    pub formula: String,
    pub family: String,
    pub loss: String,
    pub n: usize,
    pub replicates: usize,
    pub point_estimate: Vec<f64>,
    pub coefficients: Vec<InferenceSummary>,
    pub band: Option<Band>,
    pub sample_plans: Vec<SamplePlan>,
}

pub fn np_report(fit: &NpFit, ci_level: f64, rope: Option<Rope>, band: Option<&str>) -> Result<NpReport> {
    Ok(NpReport {
        formula: fit.design.formula.to_string(),
        family: fit.family.to_string(),
        loss: json_str(fit.loss)?,
        n: fit.design.n(),
        replicates: fit.draws.rows(),
        point_estimate: fit.point_estimate.clone(),
        coefficients: fit.summaries(ci_level, rope)?,
        band: band.map(|v| fit.credible_band(v, None, ci_level)).transpose()?,
        sample_plans: fit.sample_plans.clone(),
    })
}

#[derive(Debug, Clone, Serialize)]
pub struct BmaReport {
    pub formula: String,
    pub n: usize,
    /// Models sorted by posterior probability.
    pub models: Vec<ModelEntry>,
    pub coefficients: Vec<CoefficientSummary>,
    pub posterior_predictive_check: Option<BmaPValues>,
    pub sample_plans: Vec<SamplePlan>,
}

pub fn bma_report(fit: &BmaFit, check: Option<BmaPValues>) -> BmaReport {
    let mut models = fit.models.clone();
    models.sort_by(|a, b| b.probability.total_cmp(&a.probability));
    BmaReport {
        formula: fit.design.formula.to_string(),
        n: fit.design.n(),
        models,
        coefficients: fit.coefficients.clone(),
        posterior_predictive_check: check,
        sample_plans: fit.sample_plans.clone(),
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct SurvivalReport {
    pub fit: SurvivalFit,
    /// Single-curve fit used as the reference model when groups are compared.
    pub pooled_fit: Option<SurvivalFit>,
    pub bayes_factor: Option<BayesFactor>,
    pub curves: Vec<SurvivalCurve>,
}

/// One flattened summary record.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SummaryRow {
    /// JSON path of the record inside the report.
    pub path: String,
    pub label: String,
    pub post_mean: f64,
    pub ci_lower: f64,
    pub ci_upper: f64,
    pub prob_direction: Option<f64>,
    pub rope_prob: Option<f64>,
    pub bayes_factor: Option<f64>,
    pub interpretation: Option<String>,
}

fn is_summary(m: &Map<String, Json>) -> bool {
    ["label", "post_mean", "ci_lower", "ci_upper"].iter().all(|k| m.contains_key(*k))
}

fn is_bayes_factor(m: &Map<String, Json>) -> bool {
    ["value", "orientation", "interpretation"].iter().all(|k| m.contains_key(*k))
}

fn walk(value: &Json, path: &str, summaries: &mut Vec<SummaryRow>, bfs: &mut Vec<(String, String, f64, String)>) {
    match value {
        Json::Object(m) if is_summary(m) => {
            let num = |k: &str| m.get(k).and_then(Json::as_f64);
            summaries.push(SummaryRow {
                path: path.to_string(),
                label: m["label"].as_str().unwrap_or_default().to_string(),
                post_mean: num("post_mean").unwrap_or(f64::NAN),
                ci_lower: num("ci_lower").unwrap_or(f64::NAN),
                ci_upper: num("ci_upper").unwrap_or(f64::NAN),
                prob_direction: num("prob_direction"),
                rope_prob: num("rope_prob"),
                bayes_factor: num("bayes_factor"),
                interpretation: m.get("bf_interpretation").and_then(Json::as_str).map(str::to_string),
            });
        }
        Json::Object(m) if is_bayes_factor(m) => bfs.push((
            path.to_string(),
            m["orientation"].as_str().unwrap_or_default().to_string(),
            m["value"].as_f64().unwrap_or(f64::NAN),
            m["interpretation"].as_str().unwrap_or_default().to_string(),
        )),
        Json::Object(m) => {
            for (k, v) in m {
                walk(v, &format!("{path}/{k}"), summaries, bfs);
            }
        }
        Json::Array(a) => {
            for (i, v) in a.iter().enumerate() {
                walk(v, &format!("{path}/{i}"), summaries, bfs);
            }
        }
        _ => {}
    }
}

/// Every summary record in a report, in document order.
pub fn summary_rows(result: &Json) -> Vec<SummaryRow> {
    let mut rows = Vec::new();
    walk(result, "", &mut rows, &mut Vec::new());
    rows
}

/// The summary records as CSV.
pub fn summaries_csv(result: &Json) -> Result<String> {
    let mut w = csv::Writer::from_writer(Vec::new());
    for row in summary_rows(result) {
        w.serialize(row)?;
    }
    let bytes = w.into_inner().map_err(|e| Error::Numerical(format!("cannot write CSV: {e}")))?;
    Ok(String::from_utf8_lossy(&bytes).into_owned())
}

/// Survival curves of a survfit result as long-format CSV, one row per group
/// and time; `None` when the result carries no curves.
pub fn curves_csv(result: &Json) -> Result<Option<String>> {
    let Some(curves) = result.get("curves").and_then(Json::as_array) else {
        return Ok(None);
    };
    let mut w = csv::Writer::from_writer(Vec::new());
    w.write_record(["group", "t", "median", "lower", "upper"])?;
    for c in curves {
        let group = c["group"].as_str().unwrap_or_default();
        for p in c["points"].as_array().into_iter().flatten() {
            let num = |k: &str| p[k].as_f64().map_or_else(|| "NA".to_string(), |v| v.to_string());
            w.write_record([group.to_string(), num("t"), num("median"), num("lower"), num("upper")])?;
        }
    }
    let bytes = w.into_inner().map_err(|e| Error::Numerical(format!("cannot write CSV: {e}")))?;
    Ok(Some(String::from_utf8_lossy(&bytes).into_owned()))
}

fn fmt_num(v: f64) -> String {
    if v.is_nan() {
        "NA".into()
    } else if v != 0.0 && (v.abs() < 1e-3 || v.abs() >= 1e5) {
        format!("{v:.3e}")
    } else {
        format!("{v:.4}")
    }
}

fn fmt_opt(v: Option<f64>) -> String {
    v.map_or_else(|| "NA".into(), fmt_num)
}

/// Human-readable tables of every summary and Bayes factor in a report.
pub fn pretty(report: &Report) -> String {
    let mut rows = Vec::new();
    let mut bfs = Vec::new();
    walk(&report.result, "", &mut rows, &mut bfs);
    let mut out = format!("--- bayesics {} (seed {}) ---\n", report.command, report.seed);
    for (_, orientation, value, interpretation) in &bfs {
        out.push_str(&format!("Bayes factor, {orientation}: {}\n      => Level of evidence: {interpretation}\n", fmt_num(*value)));
    }
    if !rows.is_empty() {
        let header = ["Variable", "Post Mean", "Lower", "Upper", "Prob Dir", "ROPE", "BF", "Evidence"];
        let table: Vec<[String; 8]> = rows
            .iter()
            .map(|r| {
                [
                    r.label.clone(),
                    fmt_num(r.post_mean),
                    fmt_num(r.ci_lower),
                    fmt_num(r.ci_upper),
                    fmt_opt(r.prob_direction),
                    fmt_opt(r.rope_prob),
                    fmt_opt(r.bayes_factor),
                    r.interpretation.clone().unwrap_or_default(),
                ]
            })
            .collect();
        let widths: Vec<usize> = (0..8)
            .map(|j| table.iter().map(|r| r[j].chars().count()).chain([header[j].len()]).max().unwrap_or(0))
            .collect();
        let line = |cells: &[String]| {
            let mut s = String::new();
            for (j, c) in cells.iter().enumerate() {
                if j == 0 {
                    s.push_str(&format!("{c:<w$}", w = widths[j]));
                } else {
                    s.push_str(&format!("  {c:>w$}", w = widths[j]));
                }
            }
            s.trim_end().to_string() + "\n"
        };
        out.push_str(&line(&header.map(String::from)));
        for r in &table {
            out.push_str(&line(r));
        }
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    fn sample() -> Json {
        serde_json::json!({
            "coefficients": [
                {"label": "x", "post_mean": 1.0, "ci_lower": 0.5, "ci_upper": 1.5, "ci_level": 0.95,
                 "prob_direction": 0.99, "rope_prob": 0.01, "rope_bounds": [-0.1, 0.1],
                 "bayes_factor": 12.0, "bf_interpretation": "Strong (in favor of keeping in the model)"}
            ],
            "full_vs_null": {"value": 3.0, "log10_value": 0.477, "orientation": "full model vs null model",
                             "jeffreys_label": "Barely worth mentioning", "direction": "d", "interpretation": "i"}
        })
    }

    #[test]
    fn walker_finds_records() {
        let rows = summary_rows(&sample());
        assert_eq!(rows.len(), 1);
        assert_eq!(rows[0].path, "/coefficients/0");
        let csv = summaries_csv(&sample()).unwrap();
        assert!(csv.starts_with("path,label,post_mean"));
        let r = Report::new("lm", 1, serde_json::json!({}), sample()).unwrap();
        let text = pretty(&r);
        assert!(text.contains("full model vs null model"));
        assert!(text.contains("Strong (in favor of keeping in the model)"));
    }
}
