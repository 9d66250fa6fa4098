//! Loss-likelihood bootstrap: generalized posterior draws from Dirichlet-
//! weighted loss minimization.

use std::sync::atomic::{AtomicUsize, Ordering};

use nalgebra::{DMatrix, DVector};
use rand_distr::{Distribution, Exp1};
use serde::{Deserialize, Serialize};

use crate::band::{band_grid, Band, BandPoint, DEFAULT_GRID_POINTS};
use crate::design::{DesignSpec, Value};
use crate::error::{ensure, Error, Result};
use crate::glm::{coefficient_rope, exponentiate, Family, Objective};
use crate::mc_plan::{run_adaptive_sampler, DrawMatrix, PrecisionTarget, SamplePlan, SamplerConfig, Tolerance};
use crate::optim::{newton_maximize, NewtonConfig};
use crate::rng::{Rng, Streams};
use crate::stats;
use crate::summary::{summarize_draws, InferenceSummary, Rope};

/// Replicate cap for the bootstrap planner.
pub const MAX_REPLICATES: u64 = 100_000;

/// Default tolerance as a fraction of the pilot SD; coarser than for cheap
/// conjugate draws because every replicate is an optimization.
pub const DEFAULT_SD_FRACTION: f64 = 0.05;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Loss {
    /// Negative log likelihood of the family.
    SelfInformation,
    /// Squared error (gaussian family only).
    SquaredError,
}

impl std::str::FromStr for Loss {
    type Err = Error;

    fn from_str(s: &str) -> Result<Loss> {
        match s {
            "self-information" => Ok(Loss::SelfInformation),
            "squared-error" => Ok(Loss::SquaredError),
            _ => Err(Error::InvalidArgument(format!("unknown loss '{s}' (expected self-information or squared-error)"))),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct NpOptions {
    pub loss: Loss,
    pub ci_level: f64,
    pub rope_override: Option<Rope>,
    pub sampler: SamplerConfig,
    pub newton: NewtonConfig,
}

impl Default for NpOptions {
    fn default() -> Self {
        NpOptions {
            loss: Loss::SelfInformation,
            ci_level: 0.95,
            rope_override: None,
            sampler: SamplerConfig {
                hard_cap: MAX_REPLICATES,
                target: PrecisionTarget { epsilon: Tolerance::SdFraction(DEFAULT_SD_FRACTION), ..PrecisionTarget::default() },
                ..SamplerConfig::default()
            },
            newton: NewtonConfig::default(),
        }
    }
}

#[derive(Debug, Clone)]
pub struct NpFit {
    pub design: DesignSpec,
    pub family: Family,
    pub loss: Loss,
    pub param_labels: Vec<String>,
    /// Minimizer with equal weights.
    pub point_estimate: Vec<f64>,
    pub draws: DrawMatrix,
    pub sample_plans: Vec<SamplePlan>,
}

struct Minimizer<'a> {
    x: &'a DMatrix<f64>,
    y: &'a [f64],
    family: Family,
    gaussian_ls: bool,
    start: DVector<f64>,
    newton: NewtonConfig,
}

impl Minimizer<'_> {
    /// Minimizes the loss with observation weights `w` (already scaled by n).
    fn solve(&self, w: &[f64]) -> Result<DVector<f64>> {
        if self.gaussian_ls {
            let p = self.x.ncols();
            let mut xtwx = DMatrix::zeros(p, p);
            let mut xtwy = DVector::zeros(p);
            for (i, row) in self.x.row_iter().enumerate() {
                let r = row.transpose();
                xtwx += &r * row * w[i];
                xtwy += r * (w[i] * self.y[i]);
            }
            return xtwx
                .cholesky()
                .map(|c| c.solve(&xtwy))
                .ok_or_else(|| Error::Numerical("weighted design is rank deficient".into()));
        }
        let obj = Objective { x: self.x, y: self.y, offset: None, family: self.family, prior: None, weights: Some(w) };
        Ok(newton_maximize(&|t| obj.value_grad(t), self.start.clone(), &self.newton)?.x)
    }
}

/// Dirichlet(1, ..., 1) weights scaled to sum to `n`.
fn dirichlet_weights(rng: &mut Rng, n: usize) -> Vec<f64> {
    let e: Vec<f64> = (0..n).map(|_| Exp1.sample(rng)).collect();
    let total: f64 = e.iter().sum();
    e.iter().map(|v| v * n as f64 / total).collect()
}

pub fn fit_np_glm(design: &DesignSpec, family: Family, opts: &NpOptions, streams: &mut Streams) -> Result<NpFit> {
    design.ensure_full_rank()?;
    let y = design.y()?.as_slice().to_vec();
    family.check_response(&y)?;
    if opts.loss == Loss::SquaredError {
        ensure!(family == Family::Gaussian, InvalidArgument, "squared-error loss requires the gaussian family");
    }
    let gaussian_ls = family == Family::Gaussian;
    let mut param_labels = design.labels.clone();
    if !gaussian_ls {
        if let Some(name) = family.aux_name() {
            param_labels.push(name.to_string());
        }
    }
    let q = param_labels.len();
    let start = {
        let obj = Objective { x: &design.x, y: &y, offset: None, family, prior: None, weights: None };
        obj.start(design.intercept_column()).rows(0, q).into_owned()
    };
    let mut minimizer = Minimizer { x: &design.x, y: &y, family, gaussian_ls, start, newton: opts.newton };
    let equal = vec![1.0; y.len()];
    let point = minimizer.solve(&equal)?;
    minimizer.start = point.clone();

    let failures = AtomicUsize::new(0);
    let labels: Vec<&str> = param_labels.iter().map(String::as_str).collect();
    let (draws, sample_plans) = run_adaptive_sampler(
        |rng, out| {
            let mut last = None;
            for _ in 0..2 {
                let w = dirichlet_weights(rng, y.len());
                match minimizer.solve(&w) {
                    Ok(b) => {
                        out.copy_from_slice(b.as_slice());
                        return Ok(());
                    }
                    Err(e) => last = Some(e),
                }
            }
            let k = failures.fetch_add(1, Ordering::Relaxed) + 1;
            Err(Error::Convergence(format!(
                "bootstrap replicate failed twice (failure #{k}): {}",
                last.map(|e| e.to_string()).unwrap_or_default()
            )))
        },
        q,
        &labels,
        &opts.sampler,
        streams,
    )?;
    Ok(NpFit {
        design: design.clone(),
        family,
        loss: opts.loss,
        param_labels,
        point_estimate: point.as_slice().to_vec(),
        draws,
        sample_plans,
    })
}

impl NpFit {
    /// Coefficient summaries; ratio families are reported exponentiated.
    pub fn summaries(&self, ci_level: f64, rope_override: Option<Rope>) -> Result<Vec<InferenceSummary>> {
        let p = self.design.p();
        let ratio = self.family.ratio_scale();
        (0..self.param_labels.len())
            .map(|j| {
                let is_aux = j >= p;
                let rope = if is_aux || self.design.kinds[j] == crate::design::ColumnKind::Intercept {
                    None
                } else if let Some(r) = rope_override {
                    Some(if ratio { Rope::new(r.lower.ln(), r.upper.ln())? } else { r })
                } else {
                    coefficient_rope(&self.design, self.family, j)
                };
                let col = self.draws.column(j);
                let s = summarize_draws(&self.param_labels[j], &col, ci_level, rope, 0.0)?;
                if ratio || is_aux {
                    let m = stats::mean(&col.iter().map(|v| v.exp()).collect::<Vec<_>>());
                    let mut s = exponentiate(s, m);
                    if is_aux {
                        s.label = "size".into();
                    }
                    Ok(s)
                } else {
                    Ok(s)
                }
            })
            .collect()
    }

    /// Pointwise band of per-replicate fitted curves on the response scale.
    pub fn credible_band(&self, variable: &str, exemplar: Option<Vec<Value>>, ci_level: f64) -> Result<Band> {
        let grid = band_grid(&self.design, variable, exemplar, DEFAULT_GRID_POINTS)?;
        let p = self.design.p();
        let tail = (1.0 - ci_level) / 2.0;
        let points = grid
            .xs
            .iter()
            .zip(&grid.rows)
            .map(|(x, row)| {
                let mu: Vec<f64> = self
                    .draws
                    .iter_rows()
                    .map(|d| self.family.inverse_link(row.iter().zip(&d[..p]).map(|(a, b)| a * b).sum()))
                    .collect();
                let sorted = stats::sorted(&mu);
                BandPoint {
                    x: x.clone(),
                    center: stats::quantile_sorted(&sorted, 0.5),
                    lower: stats::quantile_sorted(&sorted, tail),
                    upper: stats::quantile_sorted(&sorted, 1.0 - tail),
                }
            })
            .collect();
        Ok(Band {
            variable: variable.to_string(),
            scale: "response".into(),
            ci_level,
            exemplar: grid.exemplar,
            medoid_row: grid.medoid_row,
            points,
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::data::Dataset;
    use crate::design::build_design;
    use crate::dist::sample_normal;
    use crate::formula::parse_formula;

    fn design(formula: &str, cols: Vec<(&str, Vec<f64>)>) -> DesignSpec {
        build_design(&parse_formula(formula).unwrap(), &Dataset::from_numeric(cols).unwrap()).unwrap()
    }

    #[test]
    fn intercept_only_is_weighted_mean() {
        let y = vec![1.0, 4.0, 2.5, 7.0, 3.0, 5.5];
        let d = design("y ~ 1", vec![("y", y.clone())]);
        let fit = fit_np_glm(&d, Family::Gaussian, &NpOptions::default(), &mut Streams::new(1)).unwrap();
        assert!((fit.point_estimate[0] - stats::mean(&y)).abs() < 1e-12);
        assert!((stats::mean(&fit.draws.column(0)) - stats::mean(&y)).abs() < 0.05);
        let mut rng = Streams::new(2).rng();
        let w = dirichlet_weights(&mut rng, y.len());
        assert!((w.iter().sum::<f64>() - y.len() as f64).abs() < 1e-12);
    }

    #[test]
    fn equal_weights_reproduce_mle() {
        let mut rng = Streams::new(3).rng();
        let x: Vec<f64> = (0..200).map(|_| sample_normal(&mut rng)).collect();
        let y: Vec<f64> = x.iter().map(|v| f64::from(u8::from(sample_normal(&mut rng) < 0.7 * v))).collect();
        let d = design("y ~ x", vec![("x", x), ("y", y.clone())]);
        let opts = NpOptions { sampler: SamplerConfig::with_target(PrecisionTarget::absolute(0.05, 0.95, 0.95)), ..Default::default() };
        let fit = fit_np_glm(&d, Family::Binomial, &opts, &mut Streams::new(4)).unwrap();
        let obj = Objective { x: &d.x, y: &y, offset: None, family: Family::Binomial, prior: None, weights: None };
        let (_, g) = obj.value_grad(&DVector::from_column_slice(&fit.point_estimate));
        assert!(g.amax() < 1e-6);
        let s = fit.summaries(0.95, None).unwrap();
        assert!(s[1].ci_lower > 1.0);
    }

    #[test]
    fn band_is_monotone_for_positive_slope() {
        let mut rng = Streams::new(5).rng();
        let x: Vec<f64> = (0..100).map(|i| i as f64 / 100.0).collect();
        let y: Vec<f64> = x.iter().map(|v| 2.0 * v + 0.3 * sample_normal(&mut rng)).collect();
        let d = design("y ~ x", vec![("x", x), ("y", y)]);
        let fit = fit_np_glm(&d, Family::Gaussian, &NpOptions::default(), &mut Streams::new(6)).unwrap();
        let band = fit.credible_band("x", None, 0.95).unwrap();
        assert!(band.points.windows(2).all(|w| w[1].center > w[0].center));
        let width = |p: &BandPoint| p.upper - p.lower;
        let mid = &band.points[band.points.len() / 2];
        assert!(width(&band.points[0]) > width(mid));
        assert!(width(band.points.last().unwrap()) > width(mid));
    }
}
