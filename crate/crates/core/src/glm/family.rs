//! Response families with canonical links.

use rand::Rng as _;
use rand_distr::{Distribution, Poisson};
use serde::{Deserialize, Serialize};

use crate::dist::{sample_gamma, sample_normal};
use crate::error::{ensure, Result};
use crate::rng::Rng;
use crate::special::{digamma, ln_gamma, log1p_exp, logistic, LN_SQRT_2PI};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Family {
    Gaussian,
    Binomial,
    Poisson,
    #[serde(rename = "negbinom")]
    NegBinomial,
}

impl std::str::FromStr for Family {
    type Err = crate::Error;

    fn from_str(s: &str) -> Result<Family> {
        match s {
            "gaussian" => Ok(Family::Gaussian),
            "binomial" => Ok(Family::Binomial),
            "poisson" => Ok(Family::Poisson),
            "negbinom" => Ok(Family::NegBinomial),
            _ => Err(crate::Error::InvalidArgument(format!(
                "unknown family '{s}' (expected gaussian, binomial, poisson or negbinom)"
            ))),
        }
    }
}

impl std::fmt::Display for Family {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            Family::Gaussian => "gaussian",
            Family::Binomial => "binomial",
            Family::Poisson => "poisson",
            Family::NegBinomial => "negbinom",
        })
    }
}

impl Family {
    pub fn link(&self) -> &'static str {
        match self {
            Family::Gaussian => "identity",
            Family::Binomial => "logit",
            Family::Poisson | Family::NegBinomial => "log",
        }
    }

    /// Name of the log-scale auxiliary parameter, if the family has one.
    pub fn aux_name(&self) -> Option<&'static str> {
        match self {
            Family::Gaussian => Some("log_sigma2"),
            Family::NegBinomial => Some("log_size"),
            _ => None,
        }
    }

    pub fn n_aux(&self) -> usize {
        usize::from(self.aux_name().is_some())
    }

    /// Whether coefficients are reported as ratios (odds or rate ratios).
    pub fn ratio_scale(&self) -> bool {
        !matches!(self, Family::Gaussian)
    }

    pub fn check_response(&self, y: &[f64]) -> Result<()> {
        match self {
            Family::Gaussian => {
                ensure!(y.iter().all(|v| v.is_finite()), Data, "gaussian response must be finite")
            }
            Family::Binomial => ensure!(
                y.iter().all(|&v| v == 0.0 || v == 1.0),
                Data,
                "binomial response must be coded 0/1"
            ),
            Family::Poisson | Family::NegBinomial => ensure!(
                y.iter().all(|&v| v >= 0.0 && v.fract() == 0.0 && v.is_finite()),
                Data,
                "{self} response must be non-negative integers"
            ),
        }
        Ok(())
    }

    pub fn inverse_link(&self, eta: f64) -> f64 {
        match self {
            Family::Gaussian => eta,
            Family::Binomial => logistic(eta),
            Family::Poisson | Family::NegBinomial => eta.exp(),
        }
    }

    pub fn link_fn(&self, mu: f64) -> f64 {
        match self {
            Family::Gaussian => mu,
            Family::Binomial => (mu / (1.0 - mu)).ln(),
            Family::Poisson | Family::NegBinomial => mu.ln(),
        }
    }

    pub fn variance(&self, mu: f64, aux: f64) -> f64 {
        match self {
            Family::Gaussian => aux.exp(),
            Family::Binomial => mu * (1.0 - mu),
            Family::Poisson => mu,
            Family::NegBinomial => mu + mu * mu / aux.exp(),
        }
    }

    /// Log density of one observation; `aux` is ignored by one-parameter families.
    pub fn log_lik(&self, y: f64, eta: f64, aux: f64) -> f64 {
        match self {
            Family::Gaussian => -LN_SQRT_2PI - 0.5 * aux - 0.5 * (y - eta).powi(2) / aux.exp(),
            Family::Binomial => y * eta - log1p_exp(eta),
            Family::Poisson => y * eta - eta.exp() - ln_gamma(y + 1.0),
            Family::NegBinomial => {
                let phi = aux.exp();
                let log_phi_mu = log_add(aux, eta);
                ln_gamma(y + phi) - ln_gamma(phi) - ln_gamma(y + 1.0) + phi * (aux - log_phi_mu) + y * (eta - log_phi_mu)
            }
        }
    }

    /// Derivatives of `log_lik` with respect to `eta` and `aux`.
    pub fn grad(&self, y: f64, eta: f64, aux: f64) -> (f64, f64) {
        match self {
            Family::Gaussian => {
                let r = y - eta;
                let s = aux.exp();
                (r / s, -0.5 + r * r / (2.0 * s))
            }
            Family::Binomial => (y - logistic(eta), 0.0),
            Family::Poisson => (y - eta.exp(), 0.0),
            Family::NegBinomial => {
                let phi = aux.exp();
                let mu = eta.exp();
                let w = (phi / (phi + mu)).min(1.0);
                let d_eta = (y - mu) * w;
                let log_w = aux - log_add(aux, eta);
                let d_aux = phi * (digamma(y + phi) - digamma(phi) + log_w + 1.0 - (y + phi) / (phi + mu));
                (d_eta, d_aux)
            }
        }
    }

    pub fn sample(&self, rng: &mut Rng, eta: f64, aux: f64) -> f64 {
        match self {
            Family::Gaussian => eta + (0.5 * aux).exp() * sample_normal(rng),
            Family::Binomial => f64::from(u8::from(rng.gen::<f64>() < logistic(eta))),
            Family::Poisson => poisson(rng, eta.exp()),
            Family::NegBinomial => {
                let phi = aux.exp();
                let lambda = sample_gamma(rng, phi, phi / eta.exp());
                poisson(rng, lambda)
            }
        }
    }
}

fn log_add(a: f64, b: f64) -> f64 {
    let m = a.max(b);
    m + ((a - m).exp() + (b - m).exp()).ln()
}

fn poisson(rng: &mut Rng, lambda: f64) -> f64 {
    if !(lambda > 0.0) {
        return 0.0;
    }
    if !lambda.is_finite() || lambda > 1e15 {
        return lambda;
    }
    Poisson::new(lambda).map(|d| d.sample(rng)).unwrap_or(lambda)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::Streams;

    const FAMILIES: [Family; 4] = [Family::Gaussian, Family::Binomial, Family::Poisson, Family::NegBinomial];

    #[test]
    fn gradients_match_finite_differences() {
        for fam in FAMILIES {
            for &(y, eta, aux) in &[(1.0, 0.3, -0.2), (0.0, -1.2, 0.7), (4.0, 1.1, 1.5)] {
                if fam == Family::Binomial && y > 1.0 {
                    continue;
                }
                let h = 1e-6;
                let (ge, ga) = fam.grad(y, eta, aux);
                let fe = (fam.log_lik(y, eta + h, aux) - fam.log_lik(y, eta - h, aux)) / (2.0 * h);
                assert!((ge - fe).abs() < 1e-6 * (1.0 + fe.abs()), "{fam} d_eta {ge} vs {fe}");
                if fam.n_aux() == 1 {
                    let fa = (fam.log_lik(y, eta, aux + h) - fam.log_lik(y, eta, aux - h)) / (2.0 * h);
                    assert!((ga - fa).abs() < 1e-6 * (1.0 + fa.abs()), "{fam} d_aux {ga} vs {fa}");
                }
            }
        }
    }

    #[test]
    fn negbinom_pmf_sums_to_one() {
        let total: f64 = (0..2000).map(|y| Family::NegBinomial.log_lik(y as f64, 1.5, 0.7f64.ln()).exp()).sum();
        assert!((total - 1.0).abs() < 1e-9);
    }

    #[test]
    fn negbinom_sampling_moments() {
        let mut rng = Streams::new(3).rng();
        let (eta, aux) = (1.0, 0.7f64.ln());
        let ys: Vec<f64> = (0..200_000).map(|_| Family::NegBinomial.sample(&mut rng, eta, aux)).collect();
        let mu = f64::exp(eta);
        assert!((crate::stats::mean(&ys) / mu - 1.0).abs() < 0.02);
        let v = Family::NegBinomial.variance(mu, aux);
        assert!((crate::stats::variance(&ys) / v - 1.0).abs() < 0.05);
    }

    #[test]
    fn response_checks() {
        assert!(Family::Binomial.check_response(&[0.0, 1.0, 2.0]).is_err());
        assert!(Family::Poisson.check_response(&[0.0, 1.5]).is_err());
        assert!(Family::Poisson.check_response(&[0.0, 3.0]).is_ok());
        assert!("weibull".parse::<Family>().is_err());
    }
}
