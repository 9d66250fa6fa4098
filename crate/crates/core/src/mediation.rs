//! Causal mediation analysis with independent Bayesian mediator and outcome
//! submodels and simulated potential outcomes.

use std::collections::BTreeSet;

use serde::Serialize;

use crate::data::Dataset;
use crate::design::{build_design, DesignSpec, TermKind, Value};
use crate::dist::sample_normal;
use crate::error::{ensure, Error, Result};
use crate::formula::Formula;
use crate::glm::{fit_glm, Family, GlmFit, GlmOptions};
use crate::linear::{fit_lm, LinearFit, LmPrior};
use crate::mc_plan::{run_adaptive_sampler, DrawMatrix, SamplePlan, SamplerConfig};
use crate::rng::{Rng, Streams};
use crate::stats;
use crate::summary::{default_rope, summarize_draws, InferenceSummary, Rope, RopeRule};

/// Mediator or outcome submodel.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SubModel {
    /// Conjugate normal linear model.
    Linear,
    Glm(Family),
}

impl std::str::FromStr for SubModel {
    type Err = Error;

    fn from_str(s: &str) -> Result<SubModel> {
        match s {
            "lm" | "linear" => Ok(SubModel::Linear),
            _ => Ok(SubModel::Glm(s.parse()?)),
        }
    }
}

impl std::fmt::Display for SubModel {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            SubModel::Linear => f.write_str("lm"),
            SubModel::Glm(family) => write!(f, "glm ({family})"),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct MediationOptions {
    pub mediator_model: SubModel,
    pub outcome_model: SubModel,
    /// Explicit (control, treated) values; inferred when absent.
    pub treatment_levels: Option<(Value, Value)>,
    pub ci_level: f64,
    pub rope_override: Option<Rope>,
    pub glm: GlmOptions,
    pub sampler: SamplerConfig,
}

impl Default for MediationOptions {
    fn default() -> Self {
        MediationOptions {
            mediator_model: SubModel::Linear,
            outcome_model: SubModel::Linear,
            treatment_levels: None,
            ci_level: 0.95,
            rope_override: None,
            glm: GlmOptions::default(),
            sampler: SamplerConfig::default(),
        }
    }
}

enum Fitted {
    Linear(LinearFit),
    Glm(GlmFit),
}

impl Fitted {
    fn fit(design: &DesignSpec, model: SubModel, glm: &GlmOptions, streams: &mut Streams) -> Result<Fitted> {
        Ok(match model {
            SubModel::Linear => Fitted::Linear(fit_lm(design, &LmPrior::ZellnerG)?),
            SubModel::Glm(family) => {
                let opts = GlmOptions { offset: None, ..glm.clone() };
                Fitted::Glm(fit_glm(design, family, &opts, streams)?)
            }
        })
    }

    fn width(&self) -> usize {
        match self {
            Fitted::Linear(f) => f.design.p() + 1,
            Fitted::Glm(f) => f.q().max(f.design.p() + 1),
        }
    }

    /// Fills coefficients then the auxiliary parameter (sigma for linear
    /// models, the family's own parameter otherwise).
    fn sample(&self, rng: &mut Rng, out: &mut [f64]) {
        match self {
            Fitted::Linear(f) => {
                let p = f.design.p();
                let s2 = f.posterior.sample(rng, &mut out[..p]);
                out[p] = s2.sqrt();
            }
            Fitted::Glm(f) => {
                let q = f.q();
                f.sample_param(rng, &mut out[..q]);
            }
        }
    }

    /// Simulates a response at linear predictor `eta`.
    fn simulate(&self, rng: &mut Rng, eta: f64, theta: &[f64], z: f64) -> f64 {
        match self {
            Fitted::Linear(f) => eta + theta[f.design.p()] * z,
            Fitted::Glm(f) => {
                let aux = if f.family.n_aux() == 1 { theta[f.design.p()] } else { 0.0 };
                f.family.sample(rng, eta, aux)
            }
        }
    }

    fn mean(&self, eta: f64) -> f64 {
        match self {
            Fitted::Linear(_) => eta,
            Fitted::Glm(f) => f.family.inverse_link(eta),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct MediationFit {
    pub treatment: String,
    pub mediator: String,
    pub outcome: String,
    pub control_level: Value,
    pub treated_level: Value,
    pub mediator_model: String,
    pub outcome_model: String,
    pub n: usize,
    /// ACME(control), ACME(treated), ADE(control), ADE(treated), average
    /// ACME, average ADE, total effect, in that order.
    pub effects: Vec<InferenceSummary>,
    /// Present only when the total effect has a clear direction.
    pub proportion_mediated: Option<InferenceSummary>,
    #[serde(skip)]
    pub draws: DrawMatrix,
    pub sample_plans: Vec<SamplePlan>,
}

pub const EFFECT_LABELS: [&str; 7] =
    ["ACME (control)", "ACME (treated)", "ADE (control)", "ADE (treated)", "ACME (average)", "ADE (average)", "Total effect"];

/// Total effect PDir above which the proportion mediated is reported.
pub const PROPORTION_PDIR: f64 = 0.95;

fn common_designs(mediator: &Formula, outcome: &Formula, data: &Dataset) -> Result<(DesignSpec, DesignSpec)> {
    let dm = build_design(mediator, data)?;
    let dy = build_design(outcome, data)?;
    if dm.rows == dy.rows {
        return Ok((dm, dy));
    }
    let keep: BTreeSet<usize> = dm.rows.iter().copied().collect();
    let rows: Vec<usize> = dy.rows.iter().copied().filter(|r| keep.contains(r)).collect();
    ensure!(rows.len() >= 3, Design, "mediator and outcome models share only {} complete rows", rows.len());
    let sub = data.select_rows(&rows);
    Ok((build_design(mediator, &sub)?, build_design(outcome, &sub)?))
}

fn term_index(design: &DesignSpec, name: &str, role: &str) -> Result<usize> {
    design
        .terms
        .iter()
        .position(|t| t.name == name)
        .ok_or_else(|| Error::Design(format!("{role} '{name}' is not a term of the {} model", design.response_name)))
}

fn treatment_values(design: &DesignSpec, term: usize) -> Result<(Value, Value)> {
    let t = &design.terms[term];
    match &t.kind {
        TermKind::Factor { levels } => {
            ensure!(levels.len() == 2, Design, "treatment '{}' must be binary, found {} levels", t.name, levels.len());
            Ok((Value::Level(levels[0].clone()), Value::Level(levels[1].clone())))
        }
        TermKind::Numeric { .. } => {
            let mut seen: Vec<f64> = Vec::new();
            for row in &design.raw {
                if let Value::Num(x) = row[term] {
                    if !seen.contains(&x) {
                        seen.push(x);
                    }
                }
            }
            ensure!(seen.len() == 2, Design, "treatment '{}' must be binary, found {} distinct values", t.name, seen.len());
            seen.sort_by(f64::total_cmp);
            Ok((Value::Num(seen[0]), Value::Num(seen[1])))
        }
    }
}

/// Raw values standing for mediator 0 and 1 in the outcome design.
fn mediator_codes(outcome: &DesignSpec, term: usize, mediator: &DesignSpec) -> Result<(Value, Value)> {
    match &outcome.terms[term].kind {
        TermKind::Numeric { .. } => Ok((Value::Num(0.0), Value::Num(1.0))),
        TermKind::Factor { .. } => match &mediator.response_levels {
            Some((a, b)) => Ok((Value::Level(a.clone()), Value::Level(b.clone()))),
            None => Err(Error::Design(format!(
                "mediator '{}' is categorical in the outcome model but not a binary response",
                mediator.response_name
            ))),
        },
    }
}

fn encode_with(design: &DesignSpec, raw: &[Value], replace: &[(usize, &Value)]) -> Result<Vec<f64>> {
    let mut values = raw.to_vec();
    for (j, v) in replace {
        values[*j] = (*v).clone();
    }
    design.encode(&values)
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

/// Fits both submodels and simulates the mediation effects.
pub fn mediate(
    mediator_formula: &Formula,
    outcome_formula: &Formula,
    treatment: &str,
    data: &Dataset,
    opts: &MediationOptions,
    streams: &mut Streams,
) -> Result<MediationFit> {
    let (dm, dy) = common_designs(mediator_formula, outcome_formula, data)?;
    let mediator = dm.response_name.clone();
    let tm = term_index(&dm, treatment, "treatment")?;
    let ty = term_index(&dy, treatment, "treatment")?;
    let my = term_index(&dy, &mediator, "mediator")?;
    let (t0, t1) = match &opts.treatment_levels {
        Some(levels) => levels.clone(),
        None => treatment_values(&dm, tm)?,
    };
    let (m0, m1) = mediator_codes(&dy, my, &dm)?;

    // Design rows per unit: mediator model under t0, t1; outcome model under
    // (t, mediator code) for t in {t0, t1} and codes {0, 1}. The outcome
    // predictor is affine in the mediator, so two codes suffice.
    let n = dm.n();
    let mut med_rows = Vec::with_capacity(n);
    let mut out_rows = Vec::with_capacity(n);
    for i in 0..n {
        let rm = &dm.raw[i];
        med_rows.push([encode_with(&dm, rm, &[(tm, &t0)])?, encode_with(&dm, rm, &[(tm, &t1)])?]);
        let ry = &dy.raw[i];
        out_rows.push([
            [encode_with(&dy, ry, &[(ty, &t0), (my, &m0)])?, encode_with(&dy, ry, &[(ty, &t0), (my, &m1)])?],
            [encode_with(&dy, ry, &[(ty, &t1), (my, &m0)])?, encode_with(&dy, ry, &[(ty, &t1), (my, &m1)])?],
        ]);
    }

    let med_fit = Fitted::fit(&dm, opts.mediator_model, &opts.glm, streams)?;
    let out_fit = Fitted::fit(&dy, opts.outcome_model, &opts.glm, streams)?;
    let (wm, wy) = (med_fit.width(), out_fit.width());

    let labels: Vec<&str> = EFFECT_LABELS.to_vec();
    let (draws, sample_plans) = run_adaptive_sampler(
        |rng, out| {
            let mut theta_m = vec![0.0; wm];
            let mut theta_y = vec![0.0; wy];
            med_fit.sample(rng, &mut theta_m);
            out_fit.sample(rng, &mut theta_y);
            // y[t][s]: mean outcome under treatment t with mediator drawn under s
            let mut y = [[0.0; 2]; 2];
            for i in 0..n {
                let z = sample_normal(rng);
                let m = [
                    med_fit.simulate(rng, dot(&med_rows[i][0], &theta_m), &theta_m, z),
                    med_fit.simulate(rng, dot(&med_rows[i][1], &theta_m), &theta_m, z),
                ];
                for (t, rows) in out_rows[i].iter().enumerate() {
                    let e0 = dot(&rows[0], &theta_y);
                    let e1 = dot(&rows[1], &theta_y);
                    for s in 0..2 {
                        y[t][s] += out_fit.mean(e0 + m[s] * (e1 - e0));
                    }
                }
            }
            let nf = n as f64;
            let y = y.map(|r| r.map(|v| v / nf));
            let acme = [y[0][1] - y[0][0], y[1][1] - y[1][0]];
            let ade = [y[1][0] - y[0][0], y[1][1] - y[0][1]];
            let total = y[1][1] - y[0][0];
            out[..7].copy_from_slice(&[
                acme[0],
                acme[1],
                ade[0],
                ade[1],
                (acme[0] + acme[1]) / 2.0,
                (ade[0] + ade[1]) / 2.0,
                total,
            ]);
            out[7] = (acme[0] + acme[1]) / 2.0 / total;
            Ok(())
        },
        8,
        &labels,
        &opts.sampler,
        streams,
    )?;

    let y = dy.y()?;
    let rope = match opts.rope_override {
        Some(r) => Some(r),
        None => default_rope(RopeRule::MeanDifference { pooled_sd: stats::sd(y.as_slice()) }).ok(),
    };
    let effects = EFFECT_LABELS
        .iter()
        .enumerate()
        .map(|(j, label)| summarize_draws(label, &draws.column(j), opts.ci_level, rope, 0.0))
        .collect::<Result<Vec<_>>>()?;
    let proportion_mediated = if effects[6].prob_direction > PROPORTION_PDIR {
        Some(summarize_draws("Proportion mediated", &draws.column(7), opts.ci_level, None, 0.0)?)
    } else {
        None
    };
    Ok(MediationFit {
        treatment: treatment.to_string(),
        mediator,
        outcome: dy.response_name.clone(),
        control_level: t0,
        treated_level: t1,
        mediator_model: opts.mediator_model.to_string(),
        outcome_model: opts.outcome_model.to_string(),
        n,
        effects,
        proportion_mediated,
        draws,
        sample_plans,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::formula::parse_formula;
    use crate::special::logistic;
    use rand::Rng as _;

    fn data(n: usize, a: f64, b: f64, binary_y: bool, seed: u64) -> Dataset {
        let mut rng = Streams::new(seed).rng();
        let mut tr = Vec::new();
        let mut w = Vec::new();
        let mut m = Vec::new();
        let mut y = Vec::new();
        for i in 0..n {
            let t = (i % 2) as f64;
            let wi = sample_normal(&mut rng);
            let mi = a * t + 0.5 * wi + sample_normal(&mut rng);
            let eta = 0.5 * t + b * mi + 0.3 * wi;
            let yi = if binary_y { f64::from(u8::from(rng.gen::<f64>() < logistic(eta - 0.5))) } else { eta + sample_normal(&mut rng) };
            tr.push(t);
            w.push(wi);
            m.push(mi);
            y.push(yi);
        }
        Dataset::from_numeric(vec![("rx", tr), ("w", w), ("m", m), ("y", y)]).unwrap()
    }

    fn run(d: &Dataset, opts: &MediationOptions) -> Result<MediationFit> {
        mediate(&parse_formula("m ~ rx + w").unwrap(), &parse_formula("y ~ rx + m + w").unwrap(), "rx", d, opts, &mut Streams::new(9))
    }

    #[test]
    fn linear_acme_recovers_product_of_paths() {
        let fit = run(&data(2000, 1.0, 2.0, false, 1), &MediationOptions::default()).unwrap();
        let acme = &fit.effects[4];
        assert!(acme.post_mean > 1.8 && acme.post_mean < 2.2, "{}", acme.post_mean);
        for r in fit.draws.iter_rows() {
            assert!((r[0] - r[1]).abs() < 1e-10);
            assert!((r[6] - (r[1] + r[2])).abs() < 1e-10);
            assert!((r[6] - (r[0] + r[3])).abs() < 1e-10);
        }
        assert!(fit.proportion_mediated.is_some());
    }

    #[test]
    fn null_mediator_path() {
        let fit = run(&data(2000, 1.0, 0.0, false, 2), &MediationOptions::default()).unwrap();
        let acme = &fit.effects[4];
        assert!(acme.prob_direction < 0.975, "{}", acme.prob_direction);
        assert!(acme.rope_prob.unwrap() > 0.9);
    }

    #[test]
    fn binary_outcome_decomposes() {
        let opts = MediationOptions { outcome_model: SubModel::Glm(Family::Binomial), ..Default::default() };
        let fit = run(&data(600, 1.0, 1.0, true, 3), &opts).unwrap();
        for r in fit.draws.iter_rows() {
            assert!((r[6] - (r[1] + r[2])).abs() < 1e-12);
        }
        assert!(fit.effects[4].post_mean > 0.0);
        assert!(fit.effects[6].ci_lower > -1.0 && fit.effects[6].ci_upper < 1.0);
    }

    #[test]
    fn rejects_bad_inputs() {
        let d = data(50, 1.0, 1.0, false, 4);
        let f = |s: &str| parse_formula(s).unwrap();
        let opts = MediationOptions::default();
        let err = mediate(&f("m ~ w + rx"), &f("y ~ rx + w"), "rx", &d, &opts, &mut Streams::new(1)).unwrap_err();
        assert!(err.to_string().contains("mediator 'm'"), "{err}");
        let err = mediate(&f("m ~ w + rx"), &f("y ~ rx + m + w"), "w", &d, &opts, &mut Streams::new(1)).unwrap_err();
        assert!(err.to_string().contains("binary"), "{err}");
    }
}
