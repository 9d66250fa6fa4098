//! Generalized linear models with approximate posteriors: fixed-form
//! variational Bayes (default), Laplace, and importance sampling.

pub mod family;
pub mod importance;
pub mod pvalue;
pub mod vb;

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

pub use family::Family;
use importance::{fit_importance, ImportanceInfo};
use vb::{fit_vb, VbConfig};

use crate::band::{band_grid, Band, BandPoint, DEFAULT_GRID_POINTS};
use crate::design::{ColumnKind, DesignSpec, Value};
use crate::dist::{sample_normal, ClosedForm};
use crate::error::{ensure, Error, Result};
use crate::ic::{aic_bic, dic, waic, InformationCriteria};
use crate::mc_plan::{draw_fixed, run_adaptive_sampler, DrawMatrix, SamplePlan, SamplerConfig};
use crate::optim::{newton_maximize, NewtonConfig};
use crate::rng::{Rng, Streams};
use crate::special::LN_SQRT_2PI;
use crate::stats;
use crate::summary::{
    default_rope, summarize_closed_form, summarize_draws, BayesFactor, InferenceSummary, Rope, RopeRule,
};

/// Independent normal priors on every parameter (coefficients, then the
/// log-scale auxiliary parameter if any).
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct GlmPrior {
    pub labels: Vec<String>,
    pub mean: Vec<f64>,
    pub sd: Vec<f64>,
}

impl GlmPrior {
    fn ln_pdf(&self, theta: &DVector<f64>) -> (f64, DVector<f64>) {
        let mut v = 0.0;
        let mut g = DVector::zeros(theta.len());
        for j in 0..theta.len() {
            let z = (theta[j] - self.mean[j]) / self.sd[j];
            v += -0.5 * z * z - self.sd[j].ln() - LN_SQRT_2PI;
            g[j] = -z / self.sd[j];
        }
        (v, g)
    }

    fn flat(q: usize) -> GlmPrior {
        GlmPrior { labels: vec![String::new(); q], mean: vec![0.0; q], sd: vec![1e4; q] }
    }
}

/// Default priors: a one-SD covariate change is 95% likely to shift the link
/// by less than 2 (5 response SDs for gaussian); vague intercept.
pub fn default_prior(design: &DesignSpec, family: Family) -> Result<GlmPrior> {
    let y = design.y()?;
    let sy = if y.len() > 1 { stats::sd(y.as_slice()) } else { 1.0 };
    let sy = if sy > 0.0 { sy } else { 1.0 };
    let mut labels = design.labels.clone();
    let mut mean = Vec::new();
    let mut sd = Vec::new();
    for j in 0..design.p() {
        match design.kinds[j] {
            ColumnKind::Intercept => {
                if family == Family::Gaussian {
                    mean.push(stats::mean(y.as_slice()));
                    sd.push(10.0 * sy);
                } else {
                    mean.push(0.0);
                    sd.push(10.0);
                }
            }
            _ => {
                let sx = design.column_sd[j].filter(|s| *s > 0.0).unwrap_or(1.0);
                mean.push(0.0);
                sd.push(if family == Family::Gaussian { 5.0 * sy / (1.959964 * sx) } else { 2.0 / (1.959964 * sx) });
            }
        }
    }
    if let Some(name) = family.aux_name() {
        labels.push(name.to_string());
        mean.push(if family == Family::Gaussian { (sy * sy).ln() } else { 0.0 });
        sd.push(3.0);
    }
    Ok(GlmPrior { labels, mean, sd })
}

/// Log posterior (or weighted log likelihood) of a GLM.
pub struct Objective<'a> {
    pub x: &'a DMatrix<f64>,
    pub y: &'a [f64],
    pub offset: Option<&'a [f64]>,
    pub family: Family,
    pub prior: Option<&'a GlmPrior>,
    /// Per-observation likelihood weights.
    pub weights: Option<&'a [f64]>,
}

impl Objective<'_> {
    pub fn q(&self) -> usize {
        self.x.ncols() + self.family.n_aux()
    }

    fn aux(&self, theta: &DVector<f64>) -> f64 {
        if self.family.n_aux() == 1 {
            theta[self.x.ncols()]
        } else {
            0.0
        }
    }

    pub fn eta(&self, theta: &DVector<f64>) -> DVector<f64> {
        let p = self.x.ncols();
        let mut eta = self.x * theta.rows(0, p);
        if let Some(off) = self.offset {
            for (e, o) in eta.iter_mut().zip(off) {
                *e += o;
            }
        }
        eta
    }

    pub fn pointwise(&self, theta: &DVector<f64>) -> Vec<f64> {
        let eta = self.eta(theta);
        let aux = self.aux(theta);
        self.y.iter().zip(eta.iter()).map(|(&y, &e)| self.family.log_lik(y, e, aux)).collect()
    }

    pub fn value(&self, theta: &DVector<f64>) -> f64 {
        self.value_grad(theta).0
    }

    pub fn value_grad(&self, theta: &DVector<f64>) -> (f64, DVector<f64>) {
        let p = self.x.ncols();
        let eta = self.eta(theta);
        let aux = self.aux(theta);
        let mut v = 0.0;
        let mut d = DVector::zeros(self.y.len());
        let mut g_aux = 0.0;
        for i in 0..self.y.len() {
            let w = self.weights.map_or(1.0, |w| w[i]);
            v += w * self.family.log_lik(self.y[i], eta[i], aux);
            let (de, da) = self.family.grad(self.y[i], eta[i], aux);
            d[i] = w * de;
            g_aux += w * da;
        }
        let mut g = DVector::zeros(self.q());
        g.rows_mut(0, p).copy_from(&(self.x.transpose() * d));
        if self.family.n_aux() == 1 {
            g[p] = g_aux;
        }
        if let Some(prior) = self.prior {
            let (pv, pg) = prior.ln_pdf(theta);
            v += pv;
            g += pg;
        }
        (v, g)
    }

    /// Starting values: intercept at the link of the mean response.
    pub fn start(&self, intercept: Option<usize>) -> DVector<f64> {
        let mut x0 = DVector::zeros(self.q());
        let ybar = stats::mean(self.y);
        if let Some(j) = intercept {
            let mu = match self.family {
                Family::Binomial => ybar.clamp(0.01, 0.99),
                Family::Poisson | Family::NegBinomial => ybar.max(0.01),
                Family::Gaussian => ybar,
            };
            x0[j] = self.family.link_fn(mu);
        }
        match self.family {
            Family::Gaussian => {
                let v = stats::variance(self.y);
                x0[self.x.ncols()] = if v > 0.0 { v.ln() } else { 0.0 };
            }
            Family::NegBinomial => x0[self.x.ncols()] = 0.0,
            _ => {}
        }
        x0
    }

    pub fn laplace(&self, intercept: Option<usize>, cfg: &NewtonConfig) -> Result<(DVector<f64>, DMatrix<f64>)> {
        let r = newton_maximize(&|t| self.value_grad(t), self.start(intercept), cfg)?;
        let prec = -r.hessian;
        let c = prec
            .clone()
            .cholesky()
            .ok_or_else(|| Error::Numerical("posterior curvature at the mode is not negative definite".into()))?
            .inverse();
        Ok((r.x, c))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Method {
    Vb,
    Laplace,
    Importance,
}

impl std::str::FromStr for Method {
    type Err = Error;

    fn from_str(s: &str) -> Result<Method> {
        match s {
            "vb" => Ok(Method::Vb),
            "laplace" => Ok(Method::Laplace),
            "importance" => Ok(Method::Importance),
            _ => Err(Error::InvalidArgument(format!("unknown method '{s}' (expected vb, laplace or importance)"))),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct GlmOptions {
    pub method: Method,
    pub prior: Option<GlmPrior>,
    pub offset: Option<Vec<f64>>,
    pub vb: VbConfig,
    pub newton: NewtonConfig,
    pub sampler: SamplerConfig,
}

impl Default for GlmOptions {
    fn default() -> Self {
        GlmOptions {
            method: Method::Vb,
            prior: None,
            offset: None,
            vb: VbConfig::default(),
            newton: NewtonConfig::default(),
            sampler: SamplerConfig::default(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct GaussianApprox {
    pub method: Method,
    pub m: DVector<f64>,
    pub c: DMatrix<f64>,
    pub elbo_trace: Vec<f64>,
    pub steps: usize,
}

#[derive(Debug, Clone)]
pub struct GlmFit {
    pub design: DesignSpec,
    pub family: Family,
    pub prior: GlmPrior,
    pub offset: Option<Vec<f64>>,
    pub approx: GaussianApprox,
    pub importance: Option<ImportanceInfo>,
    /// Posterior draws of all parameters (link scale, log auxiliary).
    pub draws: DrawMatrix,
    pub sample_plans: Vec<SamplePlan>,
    pub param_labels: Vec<String>,
    factor: DMatrix<f64>,
}

pub fn fit_glm(design: &DesignSpec, family: Family, opts: &GlmOptions, streams: &mut Streams) -> Result<GlmFit> {
    design.ensure_full_rank()?;
    let y = design.y()?.as_slice().to_vec();
    family.check_response(&y)?;
    if let Some(off) = &opts.offset {
        ensure!(off.len() == y.len(), InvalidArgument, "offset has {} values for {} observations", off.len(), y.len());
        ensure!(off.iter().all(|o| o.is_finite()), InvalidArgument, "offset must be finite");
    }
    let prior = match &opts.prior {
        Some(p) => p.clone(),
        None => default_prior(design, family)?,
    };
    let q = design.p() + family.n_aux();
    ensure!(prior.mean.len() == q && prior.sd.len() == q, InvalidArgument, "prior must have {q} entries");
    ensure!(prior.sd.iter().all(|s| *s > 0.0), InvalidArgument, "prior SDs must be positive");
    let obj = Objective {
        x: &design.x,
        y: &y,
        offset: opts.offset.as_deref(),
        family,
        prior: Some(&prior),
        weights: None,
    };
    let (m0, c0) = obj.laplace(design.intercept_column(), &opts.newton)?;
    check_separation(design, family, &m0)?;
    let param_labels = prior.labels.clone();
    let label_refs: Vec<&str> = param_labels.iter().map(String::as_str).collect();

    let (approx, importance, draws, plans) = match opts.method {
        Method::Importance => {
            let r = fit_importance(&obj, &m0, &c0, &label_refs, &opts.sampler, streams)?;
            let approx = GaussianApprox { method: Method::Importance, m: r.m, c: r.c, elbo_trace: vec![], steps: 0 };
            (approx, Some(r.info), Some(r.draws), r.plans)
        }
        Method::Laplace => {
            (GaussianApprox { method: Method::Laplace, m: m0, c: c0, elbo_trace: vec![], steps: 0 }, None, None, vec![])
        }
        Method::Vb => {
            let mut rng = streams.rng();
            let r = fit_vb(&obj, &m0, &c0, &opts.vb, &mut rng)?;
            (GaussianApprox { method: Method::Vb, m: r.m, c: r.c, elbo_trace: r.elbo_trace, steps: r.steps }, None, None, vec![])
        }
    };
    let factor = approx
        .c
        .clone()
        .cholesky()
        .ok_or_else(|| Error::Numerical("approximate posterior covariance is not positive definite".into()))?
        .l();
    let (draws, sample_plans) = match draws {
        Some(d) => (d, plans),
        None => {
            let (m, l) = (&approx.m, &factor);
            run_adaptive_sampler(
                |rng, out| {
                    gaussian_draw(m, l, rng, out);
                    Ok(())
                },
                q,
                &label_refs,
                &opts.sampler,
                streams,
            )?
        }
    };
    Ok(GlmFit {
        design: design.clone(),
        family,
        prior,
        offset: opts.offset.clone(),
        approx,
        importance,
        draws,
        sample_plans,
        param_labels,
        factor,
    })
}

fn gaussian_draw(m: &DVector<f64>, l: &DMatrix<f64>, rng: &mut Rng, out: &mut [f64]) {
    let q = m.len();
    let z: Vec<f64> = (0..q).map(|_| sample_normal(rng)).collect();
    for i in 0..q {
        let mut acc = m[i];
        for (k, zk) in z.iter().enumerate().take(i + 1) {
            acc += l[(i, k)] * zk;
        }
        out[i] = acc;
    }
}

/// A logistic coefficient whose mode implies an absurd effect per covariate SD
/// signals (quasi-)complete separation.
fn check_separation(design: &DesignSpec, family: Family, m: &DVector<f64>) -> Result<()> {
    if family != Family::Binomial {
        return Ok(());
    }
    for j in 0..design.p() {
        if design.kinds[j] == ColumnKind::Intercept {
            continue;
        }
        let sx = design.column_sd[j].unwrap_or(1.0);
        if (m[j] * sx).abs() > 15.0 {
            return Err(Error::Numerical(format!(
                "separation detected: the response is (nearly) perfectly predicted by '{}'",
                design.labels[j]
            )));
        }
    }
    Ok(())
}

/// Link-scale default ROPE for design column `j` (none for the intercept).
pub fn coefficient_rope(design: &DesignSpec, family: Family, j: usize) -> Option<Rope> {
    let kind = design.kinds[j];
    let sx = design.column_sd[j].unwrap_or(f64::NAN);
    if family == Family::Gaussian {
        let sy = design.y().map(|y| stats::sd(y.as_slice())).unwrap_or(f64::NAN);
        return match kind {
            ColumnKind::Intercept => None,
            ColumnKind::Numeric => default_rope(RopeRule::LinearSlope { response_sd: sy, covariate_sd: sx }).ok(),
            ColumnKind::FactorContrast => default_rope(RopeRule::MeanDifference { pooled_sd: sy }).ok(),
        };
    }
    match kind {
        ColumnKind::Intercept => None,
        ColumnKind::Numeric => default_rope(RopeRule::LinkContinuous { covariate_sd: sx }).ok(),
        ColumnKind::FactorContrast => default_rope(RopeRule::LinkBinary).ok(),
    }
}

/// Re-expresses a link-scale summary on the ratio scale.
pub(crate) fn exponentiate(mut s: InferenceSummary, mean: f64) -> InferenceSummary {
    s.post_mean = mean;
    s.ci_lower = s.ci_lower.exp();
    s.ci_upper = s.ci_upper.exp();
    s.rope_bounds = s.rope_bounds.map(|(a, b)| (a.exp(), b.exp()));
    s
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum PredictKind {
    Link,
    Response,
    Predictive,
}

impl GlmFit {
    pub fn q(&self) -> usize {
        self.param_labels.len()
    }

    pub fn objective<'a>(&'a self, y: &'a [f64]) -> Objective<'a> {
        Objective {
            x: &self.design.x,
            y,
            offset: self.offset.as_deref(),
            family: self.family,
            prior: Some(&self.prior),
            weights: None,
        }
    }

    fn response(&self) -> Vec<f64> {
        self.design.y().map(|y| y.as_slice().to_vec()).unwrap_or_default()
    }

    /// Draws one parameter vector from the fitted posterior.
    pub fn sample_param(&self, rng: &mut Rng, out: &mut [f64]) {
        if self.importance.is_some() {
            let i = rand::Rng::gen_range(rng, 0..self.draws.rows());
            out.copy_from_slice(self.draws.row(i));
        } else {
            gaussian_draw(&self.approx.m, &self.factor, rng, out);
        }
    }

    /// Link-scale default ROPE for column `j`.
    pub fn coefficient_rope(&self, j: usize) -> Option<Rope> {
        coefficient_rope(&self.design, self.family, j)
    }

    /// Savage–Dickey Bayes factors (prior over approximate posterior density
    /// at zero) for every non-intercept coefficient.
    pub fn coefficient_bayes_factors(&self) -> Vec<(String, BayesFactor)> {
        (0..self.design.p())
            .filter(|&j| self.design.kinds[j] != ColumnKind::Intercept)
            .map(|j| {
                let label = self.design.labels[j].clone();
                let prior = ClosedForm::Normal { mean: self.prior.mean[j], sd: self.prior.sd[j] };
                let post = ClosedForm::Normal { mean: self.approx.m[j], sd: self.approx.c[(j, j)].sqrt() };
                let bf = BayesFactor::from_ln(
                    prior.ln_pdf(0.0) - post.ln_pdf(0.0),
                    &format!("{label} != 0 vs {label} = 0"),
                    "in favor of keeping in the model",
                    "in favor of excluding from the model",
                );
                (label, bf)
            })
            .collect()
    }

    /// Coefficient summaries (ratio scale for non-gaussian families) plus the
    /// auxiliary parameter on its natural scale.
    pub fn summaries(&self, ci_level: f64, rope_override: Option<Rope>) -> Result<Vec<InferenceSummary>> {
        let bfs = self.coefficient_bayes_factors();
        let ratio = self.family.ratio_scale();
        let mut out = Vec::new();
        for j in 0..self.q() {
            let is_aux = j >= self.design.p();
            let label = &self.param_labels[j];
            let rope = if is_aux || self.design.kinds[j] == ColumnKind::Intercept {
                None
            } else if let Some(r) = rope_override {
                // overrides are given on the reporting scale
                Some(if ratio { Rope::new(r.lower.ln(), r.upper.ln())? } else { r })
            } else {
                self.coefficient_rope(j)
            };
            let exp_scale = ratio || is_aux;
            let (m, sd) = (self.approx.m[j], self.approx.c[(j, j)].sqrt());
            let mut s = if self.importance.is_some() {
                let col = self.draws.column(j);
                let s = summarize_draws(label, &col, ci_level, rope, 0.0)?;
                if exp_scale {
                    exponentiate(s, stats::mean(&col.iter().map(|v| v.exp()).collect::<Vec<_>>()))
                } else {
                    s
                }
            } else {
                let s = summarize_closed_form(label, &ClosedForm::Normal { mean: m, sd }, ci_level, rope, 0.0)?;
                if exp_scale {
                    exponentiate(s, (m + sd * sd / 2.0).exp())
                } else {
                    s
                }
            };
            if is_aux {
                s.label = match self.family {
                    Family::Gaussian => "sigma2".into(),
                    _ => "size".into(),
                };
            }
            if let Some((_, bf)) = bfs.iter().find(|(l, _)| l == label) {
                s = s.with_bayes_factor(bf);
            }
            out.push(s);
        }
        Ok(out)
    }

    pub fn information_criteria(&self) -> Result<InformationCriteria> {
        let y = self.response();
        let n = y.len();
        let flat = GlmPrior::flat(self.q());
        let ml_obj = Objective { prior: Some(&flat), ..self.objective(&y) };
        let max_ll = newton_maximize(&|t| ml_obj.value_grad(t), self.approx.m.clone(), &NewtonConfig::default())
            .map(|r| ml_obj.pointwise(&r.x).iter().sum::<f64>())?;
        let (aic, bic) = aic_bic(max_ll, self.q(), n);

        let obj = self.objective(&y);
        let s = self.draws.rows();
        let mut mean_theta = DVector::zeros(self.q());
        let mut run_max = vec![f64::NEG_INFINITY; n];
        let mut run_sum = vec![0.0; n];
        let mut mean = vec![0.0; n];
        let mut m2 = vec![0.0; n];
        let mut total = 0.0;
        for (k, row) in self.draws.iter_rows().enumerate() {
            let theta = DVector::from_column_slice(row);
            mean_theta += &theta / s as f64;
            let ll = obj.pointwise(&theta);
            for i in 0..n {
                let l = ll[i];
                if l > run_max[i] {
                    run_sum[i] = run_sum[i] * (run_max[i] - l).exp() + 1.0;
                    run_max[i] = l;
                } else {
                    run_sum[i] += (l - run_max[i]).exp();
                }
                let d = l - mean[i];
                mean[i] += d / (k + 1) as f64;
                m2[i] += d * (l - mean[i]);
                total += l;
            }
        }
        let e_ll = total / s as f64;
        let ll_bar: f64 = obj.pointwise(&mean_theta).iter().sum();
        let (dic, p_dic) = dic(ll_bar, e_ll);
        let lppd: Vec<f64> = (0..n).map(|i| run_max[i] + (run_sum[i] / s as f64).ln()).collect();
        let var: Vec<f64> = m2.iter().map(|v| v / (s as f64 - 1.0)).collect();
        let (waic, p_waic) = waic(&lppd, &var);
        Ok(InformationCriteria { aic, bic, dic, p_dic, waic, p_waic })
    }

    fn eta_draws(&self, row: &[f64]) -> Vec<f64> {
        let p = self.design.p();
        self.draws.iter_rows().map(|d| row.iter().zip(&d[..p]).map(|(a, b)| a * b).sum()).collect()
    }

    /// Pointwise band for the mean response as `variable` varies.
    pub fn credible_band(&self, variable: &str, exemplar: Option<Vec<Value>>, ci_level: f64) -> Result<Band> {
        let grid = band_grid(&self.design, variable, exemplar, DEFAULT_GRID_POINTS)?;
        let tail = (1.0 - ci_level) / 2.0;
        let points = grid
            .xs
            .iter()
            .zip(&grid.rows)
            .map(|(x, row)| {
                let mu: Vec<f64> = self.eta_draws(row).into_iter().map(|e| self.family.inverse_link(e)).collect();
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

    /// Summaries for new covariate rows (term values aligned with the model terms).
    pub fn predict(
        &self,
        rows: &[Vec<Value>],
        kind: PredictKind,
        ci_level: f64,
        streams: &mut Streams,
    ) -> Result<Vec<InferenceSummary>> {
        ensure!(!rows.is_empty(), InvalidArgument, "no rows to predict");
        let p = self.design.p();
        rows.iter()
            .enumerate()
            .map(|(i, values)| {
                let x = self.design.encode(values)?;
                let eta = self.eta_draws(&x);
                let vals: Vec<f64> = match kind {
                    PredictKind::Link => eta,
                    PredictKind::Response => eta.into_iter().map(|e| self.family.inverse_link(e)).collect(),
                    PredictKind::Predictive => {
                        let aux: Vec<f64> = if self.family.n_aux() == 1 { self.draws.column(p) } else { vec![0.0; eta.len()] };
                        let fam = self.family;
                        let n = eta.len();
                        draw_fixed(
                            |rng, out| {
                                let k = rand::Rng::gen_range(rng, 0..n);
                                out[0] = fam.sample(rng, eta[k], aux[k]);
                                Ok(())
                            },
                            1,
                            n,
                            streams,
                        )?
                        .column(0)
                    }
                };
                summarize_draws(&format!("row {}", i + 1), &vals, ci_level, None, 0.0)
            })
            .collect()
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::data::Dataset;
    use crate::design::build_design;
    use crate::formula::parse_formula;
    use crate::linear::{fit_lm, LmPrior, NigPrior};
    use crate::special::logistic;
    use rand::Rng as _;

    fn logistic_data(n: usize, seed: u64) -> DesignSpec {
        let mut rng = Streams::new(seed).rng();
        let x1: Vec<f64> = (0..n).map(|_| sample_normal(&mut rng)).collect();
        let x2: Vec<f64> = (0..n).map(|_| sample_normal(&mut rng)).collect();
        let y = x1
            .iter()
            .zip(&x2)
            .map(|(a, b)| f64::from(u8::from(rng.gen::<f64>() < logistic(-0.3 + 0.8 * a - 0.5 * b))))
            .collect();
        build_design(&parse_formula("y ~ x1 + x2").unwrap(), &Dataset::from_numeric(vec![("x1", x1), ("x2", x2), ("y", y)]).unwrap())
            .unwrap()
    }

    fn kl_gauss(m1: &DVector<f64>, c1: &DMatrix<f64>, m2: &DVector<f64>, c2: &DMatrix<f64>) -> f64 {
        let k = m1.len() as f64;
        let c2i = c2.clone().try_inverse().unwrap();
        let d = m2 - m1;
        0.5 * ((&c2i * c1).trace() + (d.transpose() * &c2i * &d)[(0, 0)] - k + (c2.determinant() / c1.determinant()).ln())
    }

    #[test]
    fn elbo_gradient_matches_finite_differences() {
        let d = logistic_data(60, 1);
        let y = d.y().unwrap().as_slice().to_vec();
        let prior = default_prior(&d, Family::Binomial).unwrap();
        let obj = Objective { x: &d.x, y: &y, offset: None, family: Family::Binomial, prior: Some(&prior), weights: None };
        let (m0, c0) = obj.laplace(Some(0), &NewtonConfig::default()).unwrap();
        let l0 = c0.cholesky().unwrap().l();
        let mut rng = Streams::new(2).rng();
        let params: Vec<f64> = (0..vb::n_params(3)).map(|_| 0.3 * sample_normal(&mut rng)).collect();
        let eps: Vec<DVector<f64>> = (0..10).map(|_| DVector::from_fn(3, |_, _| sample_normal(&mut rng))).collect();
        let (_, grad) = vb::elbo_and_grad(&obj, &m0, &l0, &params, &eps);
        for i in 0..params.len() {
            let h = 1e-6;
            let mut p1 = params.clone();
            p1[i] += h;
            let mut p2 = params.clone();
            p2[i] -= h;
            let fd = (vb::elbo_and_grad(&obj, &m0, &l0, &p1, &eps).0 - vb::elbo_and_grad(&obj, &m0, &l0, &p2, &eps).0) / (2.0 * h);
            assert!((grad[i] - fd).abs() <= 1e-4 * fd.abs().max(1e-2), "param {i}: {} vs {fd}", grad[i]);
        }
    }

    #[test]
    fn vb_agrees_with_laplace_and_raises_elbo() {
        let d = logistic_data(500, 3);
        let mut streams = Streams::new(4);
        let vb = fit_glm(&d, Family::Binomial, &GlmOptions::default(), &mut streams).unwrap();
        let lap = fit_glm(&d, Family::Binomial, &GlmOptions { method: Method::Laplace, ..Default::default() }, &mut streams).unwrap();
        let kl = kl_gauss(&vb.approx.m, &vb.approx.c, &lap.approx.m, &lap.approx.c);
        assert!(kl < 0.1, "KL {kl}");
        let t = &vb.approx.elbo_trace;
        let first: f64 = t[..100].iter().sum::<f64>() / 100.0;
        let last: f64 = t[t.len() - 100..].iter().sum::<f64>() / 100.0;
        assert!(last >= first - 0.05, "{first} -> {last}");
    }

    #[test]
    fn importance_consistent_with_vb() {
        let d = logistic_data(300, 5);
        let mut streams = Streams::new(6);
        let vb = fit_glm(&d, Family::Binomial, &GlmOptions::default(), &mut streams).unwrap();
        let is = fit_glm(&d, Family::Binomial, &GlmOptions { method: Method::Importance, ..Default::default() }, &mut streams)
            .unwrap();
        let info = is.importance.as_ref().unwrap();
        assert!(info.effective_sample_size > 1000.0);
        for j in 0..3 {
            let se = (vb.approx.c[(j, j)] / info.effective_sample_size).sqrt();
            assert!((vb.approx.m[j] - is.approx.m[j]).abs() < 3.0 * (2.0f64).sqrt() * se + 0.02 * vb.approx.c[(j, j)].sqrt());
        }
    }

    #[test]
    fn gaussian_family_matches_linear_model() {
        let mut rng = Streams::new(7).rng();
        let x: Vec<f64> = (0..200).map(|_| sample_normal(&mut rng)).collect();
        let y: Vec<f64> = x.iter().map(|v| 1.0 + 0.5 * v + sample_normal(&mut rng)).collect();
        let d = build_design(&parse_formula("y ~ x").unwrap(), &Dataset::from_numeric(vec![("x", x), ("y", y)]).unwrap()).unwrap();
        let lm_prior = NigPrior::custom(DVector::zeros(2), DMatrix::identity(2, 2) * 1e-8, 1e-6, 1e-6).unwrap();
        let lm = fit_lm(&d, &LmPrior::Custom(lm_prior)).unwrap();
        let prior = GlmPrior { labels: vec!["a".into(), "b".into(), "s".into()], mean: vec![0.0; 3], sd: vec![1e4, 1e4, 1e2] };
        let glm = fit_glm(&d, Family::Gaussian, &GlmOptions { prior: Some(prior), ..Default::default() }, &mut Streams::new(8)).unwrap();
        for j in 0..2 {
            let sd = lm.posterior.coef_marginal(j).variance().sqrt();
            assert!((glm.approx.m[j] - lm.posterior.mu_n[j]).abs() < 0.02 * sd, "coef {j}");
        }
        let lic = lm.information_criteria().unwrap();
        let gic = glm.information_criteria().unwrap();
        assert!((lic.aic - gic.aic).abs() < 0.5);
        assert!((lic.waic - gic.waic).abs() < 0.5, "{} vs {}", lic.waic, gic.waic);
    }

    #[test]
    fn all_zero_response_pushes_intercept_down() {
        let y = vec![0.0; 30];
        let d = build_design(&parse_formula("y ~ 1").unwrap(), &Dataset::from_numeric(vec![("y", y)]).unwrap()).unwrap();
        let fit = fit_glm(&d, Family::Binomial, &GlmOptions::default(), &mut Streams::new(1)).unwrap();
        let below = ClosedForm::Normal { mean: fit.approx.m[0], sd: fit.approx.c[(0, 0)].sqrt() }.cdf(0.0);
        assert!(below > 0.999);
    }

    #[test]
    fn separation_is_reported() {
        let x: Vec<f64> = (0..40).map(f64::from).collect();
        let y = x.iter().map(|v| f64::from(u8::from(*v >= 20.0))).collect();
        let d = build_design(&parse_formula("y ~ x").unwrap(), &Dataset::from_numeric(vec![("x", x), ("y", y)]).unwrap()).unwrap();
        let prior = GlmPrior { labels: vec!["a".into(), "x".into()], mean: vec![0.0; 2], sd: vec![1e3, 1e3] };
        let err = fit_glm(&d, Family::Binomial, &GlmOptions { prior: Some(prior), method: Method::Laplace, ..Default::default() }, &mut Streams::new(1));
        assert!(err.unwrap_err().to_string().contains("'x'"));
    }

    #[test]
    fn band_is_probability_and_centered() {
        let d = logistic_data(200, 9);
        let fit = fit_glm(&d, Family::Binomial, &GlmOptions { method: Method::Laplace, ..Default::default() }, &mut Streams::new(2)).unwrap();
        let band = fit.credible_band("x1", None, 0.95).unwrap();
        assert!(band.points.iter().all(|p| p.lower > 0.0 && p.upper < 1.0));
        assert!(band.points.windows(2).all(|w| (w[1].center - w[0].center) * fit.approx.m[1].signum() > 0.0));
        let row = fit.design.encode(&band.exemplar).unwrap();
        let eta: f64 = row.iter().zip(fit.approx.m.iter()).map(|(a, b)| a * b).sum();
        let preds = fit.predict(std::slice::from_ref(&band.exemplar), PredictKind::Response, 0.95, &mut Streams::new(3)).unwrap();
        assert!((preds[0].post_mean - logistic(eta)).abs() < 0.02);
        let pred = fit.predict(std::slice::from_ref(&band.exemplar), PredictKind::Predictive, 0.95, &mut Streams::new(3)).unwrap();
        assert!(pred[0].ci_lower == 0.0 || pred[0].ci_upper == 1.0);
        assert!(fit.predict(&[], PredictKind::Link, 0.95, &mut Streams::new(3)).is_err());
    }
}
