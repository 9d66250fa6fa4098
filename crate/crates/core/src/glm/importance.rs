//! Importance sampling with a multivariate-t proposal at the Laplace fit.

use nalgebra::{DMatrix, DVector};
use rand::Rng as _;
use serde::Serialize;

use super::Objective;
use crate::dist::{sample_gamma, sample_normal};
use crate::error::{Error, Result};
use crate::mc_plan::{draw_fixed, plan_from_pilot, DrawMatrix, SamplePlan, SamplerConfig};
use crate::rng::{Rng, Streams};

pub const PROPOSAL_DF: f64 = 5.0;

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ImportanceInfo {
    pub proposal_df: f64,
    pub proposal_draws: usize,
    pub effective_sample_size: f64,
    pub pilot_effective_sample_size: f64,
    pub resampled_draws: usize,
}

pub struct ImportanceResult {
    pub m: DVector<f64>,
    pub c: DMatrix<f64>,
    /// Equally weighted draws obtained by resampling.
    pub draws: DrawMatrix,
    pub plans: Vec<SamplePlan>,
    pub info: ImportanceInfo,
}

struct Proposal {
    m: DVector<f64>,
    l: DMatrix<f64>,
    log_det: f64,
}

impl Proposal {
    fn sample(&self, rng: &mut Rng) -> DVector<f64> {
        let q = self.m.len();
        let z = DVector::from_fn(q, |_, _| sample_normal(rng));
        let w = sample_gamma(rng, PROPOSAL_DF / 2.0, 0.5);
        &self.m + &self.l * z * (PROPOSAL_DF / w).sqrt()
    }

    /// Log density up to a constant shared by all draws.
    fn ln_pdf(&self, theta: &DVector<f64>) -> f64 {
        let q = self.m.len() as f64;
        let d = self.l.solve_lower_triangular(&(theta - &self.m)).expect("triangular factor");
        -0.5 * (PROPOSAL_DF + q) * (d.norm_squared() / PROPOSAL_DF).ln_1p() - self.log_det
    }
}

fn weighted(obj: &Objective, prop: &Proposal, n: usize, streams: &mut Streams) -> Result<(DrawMatrix, Vec<f64>, f64)> {
    let q = prop.m.len();
    let rows = draw_fixed(
        |rng, out| {
            let theta = prop.sample(rng);
            out[..q].copy_from_slice(theta.as_slice());
            out[q] = obj.value(&theta) - prop.ln_pdf(&theta);
            Ok(())
        },
        q + 1,
        n,
        streams,
    )?;
    let logw = rows.column(q);
    let max = logw.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    if !max.is_finite() {
        return Err(Error::Numerical("all importance weights are zero".into()));
    }
    let w: Vec<f64> = logw.iter().map(|l| (l - max).exp()).collect();
    let sum: f64 = w.iter().sum();
    let w: Vec<f64> = w.iter().map(|x| x / sum).collect();
    let ess = 1.0 / w.iter().map(|x| x * x).sum::<f64>();
    let thetas: Vec<f64> = rows.iter_rows().flat_map(|r| r[..q].to_vec()).collect();
    Ok((DrawMatrix::new(q, thetas), w, ess))
}

/// Systematic resampling of `n` rows with the given normalized weights.
fn resample(draws: &DrawMatrix, w: &[f64], n: usize, rng: &mut Rng) -> DrawMatrix {
    let u0: f64 = rng.gen::<f64>() / n as f64;
    let mut out = Vec::with_capacity(n * draws.width());
    let mut cum = w[0];
    let mut i = 0;
    for k in 0..n {
        let u = u0 + k as f64 / n as f64;
        while u > cum && i + 1 < w.len() {
            i += 1;
            cum += w[i];
        }
        out.extend_from_slice(draws.row(i));
    }
    DrawMatrix::new(draws.width(), out)
}

pub fn fit_importance(
    obj: &Objective,
    m0: &DVector<f64>,
    c0: &DMatrix<f64>,
    labels: &[&str],
    cfg: &SamplerConfig,
    streams: &mut Streams,
) -> Result<ImportanceResult> {
    let l = c0
        .clone()
        .cholesky()
        .ok_or_else(|| Error::Numerical("Laplace covariance is not positive definite".into()))?
        .l();
    let log_det = l.diagonal().iter().map(|d| d.ln()).sum();
    let prop = Proposal { m: m0.clone(), l, log_det };
    let q = m0.len();

    let n_pilot = (4 * cfg.pilot_size).max(2000);
    let (pilot, w, pilot_ess) = weighted(obj, &prop, n_pilot, streams)?;
    let mut rng = streams.rng();
    let pilot_sir = resample(&pilot, &w, cfg.pilot_size, &mut rng);
    let plans = labels
        .iter()
        .enumerate()
        .map(|(j, label)| plan_from_pilot(label, &pilot_sir.column(j), &cfg.target))
        .collect::<Result<Vec<_>>>()?;
    let target = plans.iter().map(|p| p.total_draws).max().unwrap_or(cfg.pilot_size as u64) as f64;
    // the resampled draws behave like ESS iid draws, so inflate accordingly
    let needed = (target * n_pilot as f64 / pilot_ess).ceil().max(target);
    if needed > cfg.hard_cap as f64 {
        return Err(Error::Numerical(format!(
            "importance sampling needs {needed:.0} proposal draws, above the cap of {}; use a larger epsilon",
            cfg.hard_cap
        )));
    }
    let (draws, w, ess) = weighted(obj, &prop, needed as usize, streams)?;
    let mut m = DVector::zeros(q);
    for (row, wi) in draws.iter_rows().zip(&w) {
        m += DVector::from_column_slice(row) * *wi;
    }
    let mut c = DMatrix::zeros(q, q);
    for (row, wi) in draws.iter_rows().zip(&w) {
        let d = DVector::from_column_slice(row) - &m;
        c += &d * d.transpose() * *wi;
    }
    let resampled = resample(&draws, &w, target as usize, &mut rng);
    Ok(ImportanceResult {
        m,
        c,
        info: ImportanceInfo {
            proposal_df: PROPOSAL_DF,
            proposal_draws: needed as usize,
            effective_sample_size: ess,
            pilot_effective_sample_size: pilot_ess,
            resampled_draws: resampled.rows(),
        },
        draws: resampled,
        plans,
    })
}
