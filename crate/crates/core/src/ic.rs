//! Information criteria shared by the regression modules.

use serde::Serialize;

use crate::special::log_sum_exp;

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct InformationCriteria {
    pub aic: f64,
    pub bic: f64,
    pub dic: f64,
    pub p_dic: f64,
    pub waic: f64,
    pub p_waic: f64,
}

pub fn aic_bic(max_loglik: f64, n_params: usize, n: usize) -> (f64, f64) {
    let k = n_params as f64;
    (-2.0 * max_loglik + 2.0 * k, -2.0 * max_loglik + k * (n as f64).ln())
}

/// DIC from the log likelihood at the posterior mean and its posterior
/// expectation: returns `(dic, p_d)`.
pub fn dic(loglik_at_mean: f64, expected_loglik: f64) -> (f64, f64) {
    let p_d = 2.0 * (loglik_at_mean - expected_loglik);
    (-2.0 * loglik_at_mean + 2.0 * p_d, p_d)
}

/// WAIC from pointwise log predictive densities and posterior variances of
/// the pointwise log likelihood: returns `(waic, p_waic)`.
pub fn waic(lppd: &[f64], var_loglik: &[f64]) -> (f64, f64) {
    let p: f64 = var_loglik.iter().sum();
    (-2.0 * (lppd.iter().sum::<f64>() - p), p)
}

/// Draw-based pointwise quantities: `loglik[s][i]` is log p(y_i | theta_s).
/// Returns `(lppd_i, var_i)` per observation.
pub fn pointwise_from_draws(loglik: &[Vec<f64>]) -> (Vec<f64>, Vec<f64>) {
    let s = loglik.len();
    let n = loglik.first().map_or(0, Vec::len);
    let mut lppd = Vec::with_capacity(n);
    let mut var = Vec::with_capacity(n);
    let mut col = vec![0.0; s];
    for i in 0..n {
        for (c, row) in col.iter_mut().zip(loglik) {
            *c = row[i];
        }
        lppd.push(log_sum_exp(&col) - (s as f64).ln());
        var.push(crate::stats::variance(&col));
    }
    (lppd, var)
}
