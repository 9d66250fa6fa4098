//! Normal–inverse-gamma posteriors for a single sample of normal data.

use serde::Serialize;

use crate::dist::{sample_gamma, sample_normal, ClosedForm};
use crate::error::{ensure, Result};
use crate::rng::Rng;
use crate::special::ln_gamma;
use crate::stats;

/// `mu | sigma2 ~ N(mean, sigma2 / precision)`, `sigma2 ~ IG(a/2, b/2)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct GroupPrior {
    pub mean: f64,
    pub precision: f64,
    pub a: f64,
    pub b: f64,
}

impl GroupPrior {
    /// Nearly flat prior centered at `center`.
    pub fn vague(center: f64) -> GroupPrior {
        GroupPrior { mean: center, precision: 0.001, a: 0.002, b: 0.002 }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct GroupPosterior {
    pub label: String,
    pub n: usize,
    pub sample_mean: f64,
    pub sample_variance: f64,
    pub mean_n: f64,
    pub precision_n: f64,
    pub a_n: f64,
    pub b_n: f64,
    pub log_marginal_likelihood: f64,
}

pub fn fit_group(label: &str, y: &[f64], prior: &GroupPrior) -> Result<GroupPosterior> {
    let n = y.len();
    ensure!(n >= 2, Data, "group '{label}' needs at least two observations, has {n}");
    ensure!(y.iter().all(|v| v.is_finite()), Data, "group '{label}' has non-finite values");
    let nf = n as f64;
    let ybar = stats::mean(y);
    let ss: f64 = y.iter().map(|v| (v - ybar).powi(2)).sum();
    let precision_n = prior.precision + nf;
    let mean_n = (prior.precision * prior.mean + nf * ybar) / precision_n;
    let b_n = prior.b + ss + prior.precision * nf / precision_n * (ybar - prior.mean).powi(2);
    let a_n = prior.a + nf;
    let log_ml = -nf / 2.0 * std::f64::consts::PI.ln() + 0.5 * prior.precision.ln() - 0.5 * precision_n.ln()
        + prior.a / 2.0 * prior.b.ln()
        - a_n / 2.0 * b_n.ln()
        + ln_gamma(a_n / 2.0)
        - ln_gamma(prior.a / 2.0);
    Ok(GroupPosterior {
        label: label.to_string(),
        n,
        sample_mean: ybar,
        sample_variance: ss / (nf - 1.0),
        mean_n,
        precision_n,
        a_n,
        b_n,
        log_marginal_likelihood: log_ml,
    })
}

impl GroupPosterior {
    pub fn mean_marginal(&self) -> ClosedForm {
        ClosedForm::StudentT {
            loc: self.mean_n,
            scale: (self.b_n / (self.a_n * self.precision_n)).sqrt(),
            df: self.a_n,
        }
    }

    pub fn sigma2(&self) -> ClosedForm {
        ClosedForm::InvGamma { shape: self.a_n / 2.0, rate: self.b_n / 2.0 }
    }

    /// One joint draw of `(mu, sigma2)`.
    pub fn sample(&self, rng: &mut Rng) -> (f64, f64) {
        let s2 = 1.0 / sample_gamma(rng, self.a_n / 2.0, self.b_n / 2.0);
        (self.mean_n + (s2 / self.precision_n).sqrt() * sample_normal(rng), s2)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::linear::{nig_update, NigPrior};
    use approx::assert_relative_eq;
    use nalgebra::{DMatrix, DVector};

    #[test]
    fn agrees_with_regression_update() {
        let y = [3.1, 4.7, 2.2, 5.0, 3.9];
        let prior = GroupPrior { mean: 1.0, precision: 0.3, a: 2.0, b: 1.5 };
        let g = fit_group("g", &y, &prior).unwrap();
        let nig = NigPrior::custom(DVector::from_element(1, 1.0), DMatrix::from_element(1, 1, 0.3), 2.0, 1.5).unwrap();
        let (post, lml) = nig_update(&DMatrix::from_element(5, 1, 1.0), &DVector::from_column_slice(&y), &nig).unwrap();
        assert_relative_eq!(g.mean_n, post.mu_n[0], epsilon = 1e-12);
        assert_relative_eq!(g.b_n, post.b_n, epsilon = 1e-12);
        assert_relative_eq!(g.log_marginal_likelihood, lml, epsilon = 1e-10);
    }

    #[test]
    fn singleton_rejected() {
        assert!(fit_group("g", &[1.0], &GroupPrior::vague(0.0)).is_err());
    }
}
