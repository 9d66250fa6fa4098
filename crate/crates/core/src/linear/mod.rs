//! Conjugate normal–inverse-gamma linear regression.
//!
//! Model: `y | beta, sigma2 ~ N(X beta, sigma2 I)`, `beta | sigma2 ~ N(mu, sigma2 V^-1)`,
//! `sigma2 ~ IG(a/2, b/2)`. Everything here is closed form.

pub mod aov;
pub mod groups;
pub mod hetero;

use nalgebra::{DMatrix, DVector};
use serde::Serialize;

use crate::band::{band_grid, Band, BandPoint, DEFAULT_GRID_POINTS};
use crate::design::{ColumnKind, DesignSpec, Value};
use crate::dist::{sample_gamma, sample_normal, ClosedForm};
use crate::elicit::{find_invgamma_parms, InvGammaTarget};
use crate::error::{ensure, Error, Result};
use crate::ic::{aic_bic, dic, waic, InformationCriteria};
use crate::rng::Rng;
use crate::special::{digamma, ln_gamma, norm_ppf, trigamma, LN_SQRT_2PI};
use crate::stats;
use crate::summary::{default_rope, summarize_closed_form, BayesFactor, InferenceSummary, Rope, RopeRule};

/// Prior precision factor of a vague intercept (prior SD of ten residual SDs).
pub const INTERCEPT_PRECISION: f64 = 0.01;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum PriorKind {
    ZellnerG,
    Conjugate,
    Custom,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct NigPrior {
    pub mu: DVector<f64>,
    /// Precision factor: `beta | sigma2 ~ N(mu, sigma2 V^-1)`.
    pub v: DMatrix<f64>,
    pub a: f64,
    pub b: f64,
    pub kind: PriorKind,
    pub g: Option<f64>,
}

impl NigPrior {
    pub fn custom(mu: DVector<f64>, v: DMatrix<f64>, a: f64, b: f64) -> Result<NigPrior> {
        let prior = NigPrior { mu, v, a, b, kind: PriorKind::Custom, g: None };
        prior.validate()?;
        Ok(prior)
    }

    pub fn validate(&self) -> Result<()> {
        let p = self.mu.len();
        ensure!(self.v.nrows() == p && self.v.ncols() == p, InvalidArgument, "prior precision must be {p}x{p}");
        ensure!(self.a > 0.0 && self.b > 0.0, InvalidArgument, "inverse-gamma hyperparameters must be positive");
        ensure!(
            (&self.v - self.v.transpose()).amax() <= 1e-10 * self.v.amax().max(1.0),
            InvalidArgument,
            "prior precision must be symmetric"
        );
        ensure!(self.v.clone().cholesky().is_some(), InvalidArgument, "prior precision must be positive definite");
        Ok(())
    }

    /// Marginal prior of coefficient `j` (Student t).
    pub fn coef_marginal(&self, j: usize) -> ClosedForm {
        let vinv = self.v.clone().try_inverse().expect("validated prior precision");
        ClosedForm::StudentT { loc: self.mu[j], scale: (self.b / self.a * vinv[(j, j)]).sqrt(), df: self.a }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct NigPosterior {
    pub mu_n: DVector<f64>,
    pub v_n: DMatrix<f64>,
    pub v_n_inv: DMatrix<f64>,
    pub a_n: f64,
    pub b_n: f64,
    /// `U` with `U U^T = V_n^-1`, for sampling.
    #[serde(skip)]
    factor: DMatrix<f64>,
}

impl NigPosterior {
    pub fn p(&self) -> usize {
        self.mu_n.len()
    }

    pub fn coef_marginal(&self, j: usize) -> ClosedForm {
        ClosedForm::StudentT {
            loc: self.mu_n[j],
            scale: (self.b_n / self.a_n * self.v_n_inv[(j, j)]).sqrt(),
            df: self.a_n,
        }
    }

    pub fn sigma2(&self) -> ClosedForm {
        ClosedForm::InvGamma { shape: self.a_n / 2.0, rate: self.b_n / 2.0 }
    }

    /// Posterior of the linear combination `row . beta`.
    pub fn linear_combination(&self, row: &[f64]) -> ClosedForm {
        let x = DVector::from_column_slice(row);
        let q = (x.transpose() * &self.v_n_inv * &x)[(0, 0)];
        ClosedForm::StudentT { loc: x.dot(&self.mu_n), scale: (self.b_n / self.a_n * q).sqrt(), df: self.a_n }
    }

    /// Posterior predictive of a new response at `row`.
    pub fn predictive(&self, row: &[f64]) -> ClosedForm {
        let x = DVector::from_column_slice(row);
        let q = (x.transpose() * &self.v_n_inv * &x)[(0, 0)];
        ClosedForm::StudentT { loc: x.dot(&self.mu_n), scale: (self.b_n / self.a_n * (1.0 + q)).sqrt(), df: self.a_n }
    }

    /// Draws `(beta, sigma2)`; `beta` is written into `out`.
    pub fn sample(&self, rng: &mut Rng, out: &mut [f64]) -> f64 {
        let tau = sample_gamma(rng, self.a_n / 2.0, self.b_n / 2.0);
        let sigma = tau.powf(-0.5);
        let p = self.p();
        let z: Vec<f64> = (0..p).map(|_| sample_normal(rng)).collect();
        for (i, o) in out.iter_mut().enumerate().take(p) {
            let mut acc = self.mu_n[i];
            for (k, zk) in z.iter().enumerate().take(i + 1) {
                acc += sigma * self.factor[(i, k)] * zk;
            }
            *o = acc;
        }
        sigma * sigma
    }
}

/// Conjugate update; returns the posterior and the log marginal likelihood.
pub fn nig_update(x: &DMatrix<f64>, y: &DVector<f64>, prior: &NigPrior) -> Result<(NigPosterior, f64)> {
    let n = x.nrows();
    ensure!(y.len() == n, InvalidArgument, "response length {} does not match {n} design rows", y.len());
    ensure!(x.ncols() == prior.mu.len(), InvalidArgument, "prior has {} coefficients, design has {}", prior.mu.len(), x.ncols());
    let xt = x.transpose();
    let v_n = &prior.v + &xt * x;
    let chol_n = v_n
        .clone()
        .cholesky()
        .ok_or_else(|| Error::Numerical("posterior precision is not positive definite".into()))?;
    let chol_0 = prior
        .v
        .clone()
        .cholesky()
        .ok_or_else(|| Error::InvalidArgument("prior precision must be positive definite".into()))?;
    let mu_n = chol_n.solve(&(&prior.v * &prior.mu + &xt * y));
    let resid = y - x * &mu_n;
    let shift = &mu_n - &prior.mu;
    // equivalent to b + y'y + mu'V mu - mu_n'V_n mu_n, but never negative
    let b_n = prior.b + resid.norm_squared() + (shift.transpose() * &prior.v * &shift)[(0, 0)];
    let a_n = prior.a + n as f64;
    let log_det = |l: &DMatrix<f64>| 2.0 * l.diagonal().iter().map(|d| d.ln()).sum::<f64>();
    let log_ml = -(n as f64) / 2.0 * std::f64::consts::PI.ln() + 0.5 * log_det(&chol_0.l()) - 0.5 * log_det(&chol_n.l())
        + prior.a / 2.0 * prior.b.ln()
        - a_n / 2.0 * b_n.ln()
        + ln_gamma(a_n / 2.0)
        - ln_gamma(prior.a / 2.0);
    ensure!(log_ml.is_finite() && b_n > 0.0, Numerical, "non-finite marginal likelihood");
    let v_n_inv = chol_n.inverse();
    let factor = v_n_inv
        .clone()
        .cholesky()
        .map(|c| c.l())
        .ok_or_else(|| Error::Numerical("posterior covariance is not positive definite".into()))?;
    Ok((NigPosterior { mu_n, v_n, v_n_inv, a_n, b_n, factor }, log_ml))
}

/// `(a, b)` for `sigma2 ~ IG(a/2, b/2)` giving 50% prior probability that R²
/// lies between 0.1 and 0.9.
pub fn r_squared_invgamma(response_variance: f64) -> Result<(f64, f64)> {
    let p = find_invgamma_parms(InvGammaTarget::RSquared { response_variance })?;
    Ok((2.0 * p.shape, 2.0 * p.rate))
}

#[derive(Debug, Clone, PartialEq)]
pub enum LmPrior {
    /// Zellner's g prior with g = n on the non-intercept columns.
    ZellnerG,
    /// Independent coefficients: 95% sure a one-SD covariate change moves the
    /// mean by less than five response SDs.
    Conjugate,
    Custom(NigPrior),
}

fn response_moments(y: &DVector<f64>) -> Result<(f64, f64)> {
    let v = stats::variance(y.as_slice());
    ensure!(v > 0.0, Data, "response has zero variance");
    Ok((stats::mean(y.as_slice()), v))
}

pub fn build_prior(design: &DesignSpec, kind: &LmPrior) -> Result<NigPrior> {
    let y = design.y()?;
    let (ybar, s2) = response_moments(y)?;
    let p = design.p();
    let (a, b) = r_squared_invgamma(s2)?;
    let mut mu = DVector::zeros(p);
    let mut v = DMatrix::zeros(p, p);
    let start = usize::from(design.has_intercept());
    if design.has_intercept() {
        mu[0] = ybar;
        v[(0, 0)] = INTERCEPT_PRECISION;
    }
    match kind {
        LmPrior::Custom(prior) => {
            ensure!(prior.mu.len() == p, InvalidArgument, "custom prior has {} coefficients, design has {p}", prior.mu.len());
            prior.validate()?;
            Ok(prior.clone())
        }
        LmPrior::ZellnerG => {
            let g = design.n() as f64;
            let mut xs = design.x.columns(start, p - start).into_owned();
            if design.has_intercept() {
                for mut c in xs.column_iter_mut() {
                    let m = c.mean();
                    c.add_scalar_mut(-m);
                }
            }
            let block = xs.transpose() * &xs / g;
            v.view_mut((start, start), (p - start, p - start)).copy_from(&block);
            let prior = NigPrior { mu, v, a, b, kind: PriorKind::ZellnerG, g: Some(g) };
            prior.validate()?;
            Ok(prior)
        }
        LmPrior::Conjugate => {
            for j in start..p {
                let sx = design.column_sd[j].unwrap_or(1.0);
                v[(j, j)] = (1.959964 * sx / 5.0).powi(2);
            }
            let prior = NigPrior { mu, v, a, b, kind: PriorKind::Conjugate, g: None };
            prior.validate()?;
            Ok(prior)
        }
    }
}

#[derive(Debug, Clone)]
pub struct LinearFit {
    pub design: DesignSpec,
    pub prior: NigPrior,
    pub posterior: NigPosterior,
    pub log_marginal_likelihood: f64,
    pub fitted: Vec<f64>,
    pub residuals: Vec<f64>,
}

pub fn fit_lm(design: &DesignSpec, prior: &LmPrior) -> Result<LinearFit> {
    design.ensure_full_rank()?;
    let y = design.y()?;
    if !matches!(prior, LmPrior::Custom(_)) {
        ensure!(design.n() > design.p(), Design, "default priors need more observations ({}) than coefficients ({})", design.n(), design.p());
    }
    let prior = build_prior(design, prior)?;
    let (posterior, log_ml) = nig_update(&design.x, y, &prior)?;
    let fitted = (&design.x * &posterior.mu_n).as_slice().to_vec();
    let residuals = y.iter().zip(&fitted).map(|(a, b)| a - b).collect();
    Ok(LinearFit { design: design.clone(), prior, posterior, log_marginal_likelihood: log_ml, fitted, residuals })
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Diagnostics {
    pub fitted: Vec<f64>,
    pub residuals: Vec<f64>,
    /// (theoretical normal quantile, standardized residual), sorted.
    pub qq: Vec<(f64, f64)>,
}

/// Plotting positions used for normal QQ plots.
pub fn ppoints(n: usize) -> Vec<f64> {
    let a = if n <= 10 { 3.0 / 8.0 } else { 0.5 };
    (1..=n).map(|i| (i as f64 - a) / (n as f64 + 1.0 - 2.0 * a)).collect()
}

pub fn qq_pairs(residuals: &[f64]) -> Vec<(f64, f64)> {
    let sd = if residuals.len() > 1 { stats::sd(residuals) } else { 0.0 };
    let sorted = stats::sorted(residuals);
    ppoints(sorted.len())
        .into_iter()
        .zip(sorted)
        .map(|(p, r)| (norm_ppf(p), if sd > 0.0 { r / sd } else { 0.0 }))
        .collect()
}

impl LinearFit {
    pub fn response_sd(&self) -> f64 {
        self.design.y().map(|y| stats::sd(y.as_slice())).unwrap_or(f64::NAN)
    }

    /// Default ROPE for coefficient `j`; none for the intercept.
    pub fn coefficient_rope(&self, j: usize) -> Option<Rope> {
        let sy = self.response_sd();
        match self.design.kinds[j] {
            ColumnKind::Intercept => None,
            ColumnKind::Numeric => default_rope(RopeRule::LinearSlope {
                response_sd: sy,
                covariate_sd: self.design.column_sd[j].unwrap_or(f64::NAN),
            })
            .ok(),
            ColumnKind::FactorContrast => default_rope(RopeRule::MeanDifference { pooled_sd: sy }).ok(),
        }
    }

    /// Savage–Dickey Bayes factors for every non-intercept coefficient.
    pub fn coefficient_bayes_factors(&self) -> Result<Vec<(String, BayesFactor)>> {
        let mut out = Vec::new();
        for j in 0..self.design.p() {
            if self.design.kinds[j] == ColumnKind::Intercept {
                continue;
            }
            let label = &self.design.labels[j];
            let prior0 = self.prior.coef_marginal(j).ln_pdf(0.0);
            let post0 = self.posterior.coef_marginal(j).ln_pdf(0.0);
            ensure!(prior0.is_finite(), Numerical, "prior density at zero is zero for '{label}'; Bayes factor undefined");
            out.push((
                label.clone(),
                BayesFactor::from_ln(
                    prior0 - post0,
                    &format!("{label} != 0 vs {label} = 0"),
                    "in favor of keeping in the model",
                    "in favor of excluding from the model",
                ),
            ));
        }
        Ok(out)
    }

    /// Evidence of the fitted model against the intercept-only model with the
    /// same variance prior and intercept prior.
    pub fn null_log_marginal_likelihood(&self) -> Result<f64> {
        ensure!(self.design.has_intercept(), Design, "full-vs-null Bayes factor needs an intercept");
        let y = self.design.y()?;
        let null = NigPrior {
            mu: DVector::from_element(1, self.prior.mu[0]),
            v: DMatrix::from_element(1, 1, self.prior.v[(0, 0)]),
            a: self.prior.a,
            b: self.prior.b,
            kind: self.prior.kind,
            g: None,
        };
        let x0 = DMatrix::from_element(self.design.n(), 1, 1.0);
        Ok(nig_update(&x0, y, &null)?.1)
    }

    pub fn full_vs_null(&self) -> Result<BayesFactor> {
        let ln = self.log_marginal_likelihood - self.null_log_marginal_likelihood()?;
        Ok(BayesFactor::from_ln(ln, "full model vs null model", "in favor of the full model", "in favor of the null model"))
    }

    pub fn summaries(&self, ci_level: f64, rope_override: Option<Rope>) -> Result<Vec<InferenceSummary>> {
        let bfs = self.coefficient_bayes_factors()?;
        let mut out = Vec::new();
        for j in 0..self.design.p() {
            let rope = match self.design.kinds[j] {
                ColumnKind::Intercept => None,
                _ => rope_override.or_else(|| self.coefficient_rope(j)),
            };
            let label = &self.design.labels[j];
            let mut s = summarize_closed_form(label, &self.posterior.coef_marginal(j), ci_level, rope, 0.0)?;
            if let Some((_, bf)) = bfs.iter().find(|(l, _)| l == label) {
                s = s.with_bayes_factor(bf);
            }
            out.push(s);
        }
        out.push(summarize_closed_form("sigma2", &self.posterior.sigma2(), ci_level, None, 0.0)?);
        Ok(out)
    }

    pub fn max_log_likelihood(&self) -> Result<f64> {
        let y = self.design.y()?;
        let x = &self.design.x;
        let beta = x
            .clone()
            .svd(true, true)
            .solve(y, 1e-12)
            .map_err(|e| Error::Numerical(format!("least squares failed: {e}")))?;
        let rss = (y - x * beta).norm_squared();
        let n = self.design.n() as f64;
        Ok(-n / 2.0 * ((2.0 * std::f64::consts::PI * rss / n).ln() + 1.0))
    }

    /// Pointwise leverage `x_i' V_n^-1 x_i`.
    fn leverages(&self) -> Vec<f64> {
        let xv = &self.design.x * &self.posterior.v_n_inv;
        (0..self.design.n()).map(|i| xv.row(i).dot(&self.design.x.row(i))).collect()
    }

    pub fn information_criteria(&self) -> Result<InformationCriteria> {
        let n = self.design.n();
        let (aic, bic) = aic_bic(self.max_log_likelihood()?, self.design.p() + 1, n);
        let post = &self.posterior;
        let (alpha, beta) = (post.a_n / 2.0, post.b_n / 2.0);
        let h = self.leverages();
        let rss: f64 = self.residuals.iter().map(|e| e * e).sum();
        let nf = n as f64;
        ensure!(alpha > 1.0, Numerical, "posterior mean of sigma2 undefined (a_n <= 2)");
        let sigma2_bar = beta / (alpha - 1.0);
        let ll_bar = -nf * LN_SQRT_2PI - nf / 2.0 * sigma2_bar.ln() - rss / (2.0 * sigma2_bar);
        let e_log_sigma2 = beta.ln() - digamma(alpha);
        let e_quad = rss * alpha / beta + h.iter().sum::<f64>();
        let e_ll = -nf * LN_SQRT_2PI - nf / 2.0 * e_log_sigma2 - 0.5 * e_quad;
        let (dic, p_dic) = dic(ll_bar, e_ll);

        let y = self.design.y()?;
        let mut lppd = Vec::with_capacity(n);
        let mut var = Vec::with_capacity(n);
        for i in 0..n {
            let e = self.residuals[i];
            let pred = ClosedForm::StudentT {
                loc: self.fitted[i],
                scale: (post.b_n / post.a_n * (1.0 + h[i])).sqrt(),
                df: post.a_n,
            };
            lppd.push(pred.ln_pdf(y[i]));
            let e2 = e * e;
            let var_u = trigamma(alpha);
            let var_r = 2.0 * h[i] * h[i] + 4.0 * h[i] * e2 * alpha / beta + e2 * e2 * alpha / (beta * beta);
            let cov = -e2 / beta;
            var.push(0.25 * (var_u + var_r + 2.0 * cov));
        }
        let (waic, p_waic) = waic(&lppd, &var);
        Ok(InformationCriteria { aic, bic, dic, p_dic, waic, p_waic })
    }

    pub fn diagnostics(&self) -> Diagnostics {
        Diagnostics { fitted: self.fitted.clone(), residuals: self.residuals.clone(), qq: qq_pairs(&self.residuals) }
    }

    /// Pointwise t-based band for the mean response as `variable` varies.
    pub fn credible_band(&self, variable: &str, exemplar: Option<Vec<Value>>, ci_level: f64) -> Result<Band> {
        let grid = band_grid(&self.design, variable, exemplar, DEFAULT_GRID_POINTS)?;
        let tail = (1.0 - ci_level) / 2.0;
        let points = grid
            .xs
            .iter()
            .zip(&grid.rows)
            .map(|(x, row)| {
                let d = self.posterior.linear_combination(row);
                BandPoint { x: x.clone(), center: d.mean(), lower: d.quantile(tail), upper: d.quantile(1.0 - tail) }
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
    use crate::formula::parse_formula;
    use crate::rng::Streams;
    use approx::assert_relative_eq;

    fn design(f: &str, cols: Vec<(&str, Vec<f64>)>) -> DesignSpec {
        build_design(&parse_formula(f).unwrap(), &Dataset::from_numeric(cols).unwrap()).unwrap()
    }

    fn sim(n: usize, slope: f64, seed: u64) -> DesignSpec {
        let mut rng = Streams::new(seed).rng();
        let x: Vec<f64> = (0..n).map(|_| sample_normal(&mut rng)).collect();
        let y = x.iter().map(|xi| slope * xi + sample_normal(&mut rng)).collect();
        design("y ~ x", vec![("x", x), ("y", y)])
    }

    #[test]
    fn vague_intercept_only_recovers_mean() {
        let d = design("y ~ 1", vec![("y", vec![1.0, 2.0, 4.0, 7.0])]);
        let prior = NigPrior::custom(DVector::from_element(1, 0.0), DMatrix::from_element(1, 1, 1e-10), 1e-6, 1e-6).unwrap();
        let fit = fit_lm(&d, &LmPrior::Custom(prior)).unwrap();
        assert_relative_eq!(fit.posterior.mu_n[0], 3.5, epsilon = 1e-8);
    }

    #[test]
    fn slope_recovered() {
        let fit = fit_lm(&sim(25, 0.25, 1), &LmPrior::ZellnerG).unwrap();
        let d = fit.posterior.coef_marginal(1);
        assert!((d.mean() - 0.25).abs() < 3.0 * d.variance().sqrt());
    }

    #[test]
    fn vague_limit_matches_ols() {
        let d = sim(30, 1.0, 2);
        let y = d.y().unwrap().clone();
        let xtx_inv = (d.x.transpose() * &d.x).try_inverse().unwrap();
        let ols = &xtx_inv * d.x.transpose() * &y;
        let s2 = (&y - &d.x * &ols).norm_squared() / 28.0;
        let target = s2 * xtx_inv[(1, 1)] * (28.0 / 30.0);
        let mut last = f64::INFINITY;
        for eps in [1e-2, 1e-4, 1e-6, 1e-8] {
            let prior = NigPrior::custom(DVector::zeros(2), DMatrix::identity(2, 2) * eps, eps, eps).unwrap();
            let post = fit_lm(&d, &LmPrior::Custom(prior)).unwrap().posterior;
            let gap = (&post.mu_n - &ols).amax() + (post.b_n / post.a_n * post.v_n_inv[(1, 1)] / target - 1.0).abs();
            assert!(gap < last);
            last = gap;
        }
        assert!(last < 1e-6, "{last}");
    }

    #[test]
    fn bayes_factors_invariant_to_rescaling() {
        let d1 = sim(40, 0.3, 3);
        let x: Vec<f64> = d1.x.column(1).iter().copied().collect();
        let y: Vec<f64> = d1.y().unwrap().iter().copied().collect();
        let d2 = design("y ~ x", vec![("x", x.iter().map(|v| v * 7.5).collect()), ("y", y)]);
        let f1 = fit_lm(&d1, &LmPrior::ZellnerG).unwrap();
        let f2 = fit_lm(&d2, &LmPrior::ZellnerG).unwrap();
        let b1 = f1.coefficient_bayes_factors().unwrap()[0].1.log10_value;
        let b2 = f2.coefficient_bayes_factors().unwrap()[0].1.log10_value;
        assert!((b1 - b2).abs() < 1e-10);
        assert!((f1.full_vs_null().unwrap().log10_value - f2.full_vs_null().unwrap().log10_value).abs() < 1e-10);
    }

    #[test]
    fn null_data_favors_null() {
        let favors = (0..40)
            .filter(|&s| fit_lm(&sim(400, 0.0, 100 + s), &LmPrior::ZellnerG).unwrap().full_vs_null().unwrap().value < 1.0)
            .count();
        assert!(favors >= 36, "{favors}");
    }

    #[test]
    fn ic_identities() {
        let fit = fit_lm(&sim(30, 0.5, 5), &LmPrior::ZellnerG).unwrap();
        let ic = fit.information_criteria().unwrap();
        assert!((ic.aic - ic.bic - (2.0 * 3.0 - 3.0 * 30f64.ln())).abs() < 1e-9);
        assert!(ic.p_dic > 0.0 && ic.p_waic > 0.0);
    }

    #[test]
    fn perfect_fit_residuals_vanish() {
        let x = vec![1.0, 2.0, 3.0, 4.0, 5.0, 6.0];
        let y = x.iter().map(|v| 2.0 + 3.0 * v).collect();
        let d = design("y ~ x", vec![("x", x), ("y", y)]);
        let prior = NigPrior::custom(DVector::zeros(2), DMatrix::identity(2, 2) * 1e-12, 1e-6, 1e-12).unwrap();
        let fit = fit_lm(&d, &LmPrior::Custom(prior)).unwrap();
        assert!(fit.diagnostics().residuals.iter().all(|r| r.abs() < 1e-6));
    }

    #[test]
    fn band_matches_linear_combination() {
        let fit = fit_lm(&sim(20, 1.0, 6), &LmPrior::ZellnerG).unwrap();
        let band = fit.credible_band("x", None, 0.95).unwrap();
        let row = fit.design.encode(&[band.points[7].x.clone()]).unwrap();
        let s = summarize_closed_form("b", &fit.posterior.linear_combination(&row), 0.95, None, 0.0).unwrap();
        assert!((s.ci_lower - band.points[7].lower).abs() < 1e-8);
        let flat = fit_lm(&design("y ~ x", vec![("x", vec![1.0, 2.0, 3.0, 5.0]), ("y", vec![1.0, 0.0, 2.0, 1.0])]), &LmPrior::ZellnerG)
            .unwrap();
        assert!(flat.credible_band("nope", None, 0.95).is_err());
    }

    #[test]
    fn sample_matches_posterior_moments() {
        let fit = fit_lm(&sim(30, 0.5, 8), &LmPrior::ZellnerG).unwrap();
        let mut rng = Streams::new(1).rng();
        let mut b = [0.0; 2];
        let draws: Vec<f64> = (0..40_000)
            .map(|_| {
                fit.posterior.sample(&mut rng, &mut b);
                b[1]
            })
            .collect();
        let m = fit.posterior.coef_marginal(1);
        assert!((stats::mean(&draws) - m.mean()).abs() < 4.0 * (m.variance() / 40_000.0).sqrt());
        assert!((stats::variance(&draws) / m.variance() - 1.0).abs() < 0.03);
    }
}
