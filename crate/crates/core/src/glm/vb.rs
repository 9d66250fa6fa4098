//! Fixed-form variational Bayes with a full-covariance Gaussian.
//!
//! The optimization runs in coordinates whitened by the Laplace fit,
//! `theta = m0 + L0 z`, where the posterior is close to standard normal. The
//! variational family is `z ~ N(mu, S S^T)` with `S` lower triangular and a
//! log-parameterized diagonal. Gradients use the reparameterization
//! `z = mu + S eps`.

use nalgebra::{DMatrix, DVector};
use serde::Serialize;

use super::Objective;
use crate::dist::sample_normal;
use crate::error::{Error, Result};
use crate::rng::Rng;
use crate::special::LN_SQRT_2PI;

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct VbConfig {
    /// Monte Carlo draws per gradient estimate.
    pub samples: usize,
    pub max_steps: usize,
    /// Moving-average window for the convergence rule.
    pub window: usize,
    /// Stop when the windowed ELBO improves by less than this fraction.
    pub rel_tol: f64,
    pub adam_lr: f64,
    /// Iterate-averaged SGD steps run after convergence.
    pub polyak_steps: usize,
    pub polyak_lr: f64,
}

impl Default for VbConfig {
    fn default() -> Self {
        VbConfig {
            samples: 10,
            max_steps: 50_000,
            window: 50,
            rel_tol: 1e-4,
            adam_lr: 0.01,
            polyak_steps: 2000,
            polyak_lr: 0.02,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct VbResult {
    pub m: DVector<f64>,
    pub c: DMatrix<f64>,
    pub elbo_trace: Vec<f64>,
    pub steps: usize,
}

pub(crate) fn n_params(q: usize) -> usize {
    q + q * (q + 1) / 2
}

/// Splits packed parameters into `mu` and `S` (diagonal exponentiated).
pub(crate) fn unpack(params: &[f64], q: usize) -> (DVector<f64>, DMatrix<f64>) {
    let mu = DVector::from_column_slice(&params[..q]);
    let mut s = DMatrix::zeros(q, q);
    let mut k = q;
    for i in 0..q {
        for j in 0..=i {
            s[(i, j)] = if i == j { params[k].exp() } else { params[k] };
            k += 1;
        }
    }
    (mu, s)
}

fn pack_identity(q: usize) -> Vec<f64> {
    vec![0.0; n_params(q)]
}

/// Stochastic ELBO estimate with fixed noise `eps`, and its exact gradient in
/// packed coordinates.
pub(crate) fn elbo_and_grad(
    obj: &Objective,
    m0: &DVector<f64>,
    l0: &DMatrix<f64>,
    params: &[f64],
    eps: &[DVector<f64>],
) -> (f64, Vec<f64>) {
    let q = m0.len();
    let (mu, s) = unpack(params, q);
    let mut value = 0.0;
    let mut g_mu = DVector::zeros(q);
    let mut g_s = DMatrix::zeros(q, q);
    let k = eps.len() as f64;
    for e in eps {
        let z = &mu + &s * e;
        let theta = m0 + l0 * &z;
        let (lp, g) = obj.value_grad(&theta);
        value += lp / k;
        let gz = l0.transpose() * g;
        g_mu += &gz / k;
        g_s += (&gz * e.transpose()) / k;
    }
    let log_det_l0: f64 = l0.diagonal().iter().map(|d| d.ln()).sum();
    let mut log_det_s = 0.0;
    let mut grad = g_mu.as_slice().to_vec();
    for i in 0..q {
        for j in 0..=i {
            if i == j {
                log_det_s += s[(i, i)].ln();
                // d/d(log s_ii): chain rule plus the entropy term
                grad.push(s[(i, i)] * g_s[(i, i)] + 1.0);
            } else {
                grad.push(g_s[(i, j)]);
            }
        }
    }
    let entropy = log_det_s + log_det_l0 + q as f64 * (0.5 + LN_SQRT_2PI);
    (value + entropy, grad)
}

fn draw_eps(rng: &mut Rng, q: usize, k: usize) -> Vec<DVector<f64>> {
    (0..k).map(|_| DVector::from_fn(q, |_, _| sample_normal(rng))).collect()
}

/// Fits the variational Gaussian starting from the Laplace fit `(m0, c0)`.
pub fn fit_vb(obj: &Objective, m0: &DVector<f64>, c0: &DMatrix<f64>, cfg: &VbConfig, rng: &mut Rng) -> Result<VbResult> {
    let q = m0.len();
    let l0 = c0
        .clone()
        .cholesky()
        .ok_or_else(|| Error::Numerical("Laplace covariance is not positive definite".into()))?
        .l();
    let mut params = pack_identity(q);
    let np = params.len();
    let (b1, b2) = (0.9, 0.999);
    let mut m1 = vec![0.0; np];
    let mut m2 = vec![0.0; np];
    let mut trace = Vec::new();
    let w = cfg.window.max(1);
    let mut converged = false;
    let mut step = 0;
    while step < cfg.max_steps {
        let eps = draw_eps(rng, q, cfg.samples);
        let (elbo, grad) = elbo_and_grad(obj, m0, &l0, &params, &eps);
        if !elbo.is_finite() || grad.iter().any(|g| !g.is_finite()) {
            return Err(Error::Numerical(format!("ELBO became non-finite at step {step}")));
        }
        trace.push(elbo);
        step += 1;
        let t = step as i32;
        for i in 0..np {
            m1[i] = b1 * m1[i] + (1.0 - b1) * grad[i];
            m2[i] = b2 * m2[i] + (1.0 - b2) * grad[i] * grad[i];
            let mh = m1[i] / (1.0 - b1.powi(t));
            let vh = m2[i] / (1.0 - b2.powi(t));
            params[i] += cfg.adam_lr * mh / (vh.sqrt() + 1e-8);
        }
        if step >= 2 * w && step % w == 0 {
            let now: f64 = trace[step - w..].iter().sum::<f64>() / w as f64;
            let before: f64 = trace[step - 2 * w..step - w].iter().sum::<f64>() / w as f64;
            if (now - before) / before.abs().max(1e-12) < cfg.rel_tol {
                converged = true;
                break;
            }
        }
    }
    if !converged {
        let tail: Vec<String> = trace.iter().rev().take(5).map(|v| format!("{v:.4}")).collect();
        return Err(Error::Convergence(format!(
            "variational optimization did not converge in {} steps (last ELBO values: {})",
            cfg.max_steps,
            tail.join(", ")
        )));
    }
    let mut avg = vec![0.0; np];
    for k in 0..cfg.polyak_steps {
        let eps = draw_eps(rng, q, cfg.samples);
        let (elbo, grad) = elbo_and_grad(obj, m0, &l0, &params, &eps);
        trace.push(elbo);
        for i in 0..np {
            params[i] += cfg.polyak_lr * grad[i];
            avg[i] += (params[i] - avg[i]) / (k + 1) as f64;
        }
    }
    let final_params = if cfg.polyak_steps > 0 { avg } else { params };
    let (mu, s) = unpack(&final_params, q);
    let m = m0 + &l0 * mu;
    let ls = &l0 * s;
    let c = &ls * ls.transpose();
    Ok(VbResult { m, c, elbo_trace: trace, steps: step + cfg.polyak_steps })
}
