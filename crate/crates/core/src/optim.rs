//! Damped Newton maximization with finite-difference Hessians.

use nalgebra::{DMatrix, DVector};

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct NewtonConfig {
    pub tol: f64,
    pub max_iter: usize,
}

impl Default for NewtonConfig {
    fn default() -> Self {
        NewtonConfig { tol: 1e-8, max_iter: 200 }
    }
}

#[derive(Debug, Clone)]
pub struct NewtonResult {
    pub x: DVector<f64>,
    pub value: f64,
    /// Hessian of the objective at the maximum (negative definite).
    pub hessian: DMatrix<f64>,
    pub iterations: usize,
}

/// Hessian by central differences of an analytic gradient, symmetrized.
pub fn numerical_hessian(grad: &dyn Fn(&DVector<f64>) -> DVector<f64>, x: &DVector<f64>) -> DMatrix<f64> {
    let q = x.len();
    let mut h = DMatrix::zeros(q, q);
    let mut xp = x.clone();
    for j in 0..q {
        let step = 1e-5 * x[j].abs().max(1.0);
        xp[j] = x[j] + step;
        let gp = grad(&xp);
        xp[j] = x[j] - step;
        let gm = grad(&xp);
        xp[j] = x[j];
        h.set_column(j, &((gp - gm) / (2.0 * step)));
    }
    (&h + h.transpose()) * 0.5
}

/// Objective value and gradient at a point.
pub type ValueGrad<'a> = dyn Fn(&DVector<f64>) -> (f64, DVector<f64>) + 'a;

/// Maximizes `f` given `fg(x) = (f(x), grad f(x))`, starting at `x0`.
pub fn newton_maximize(
    fg: &ValueGrad,
    x0: DVector<f64>,
    cfg: &NewtonConfig,
) -> Result<NewtonResult> {
    let grad = |x: &DVector<f64>| fg(x).1;
    let mut x = x0;
    let (mut fx, mut g) = fg(&x);
    if !fx.is_finite() {
        return Err(Error::Numerical("objective is not finite at the starting point".into()));
    }
    let q = x.len();
    for iter in 0..cfg.max_iter {
        let h = numerical_hessian(&grad, &x);
        let neg = -&h;
        let mut lambda = 0.0;
        let dir = loop {
            let m = &neg + DMatrix::identity(q, q) * lambda;
            if let Some(ch) = m.cholesky() {
                break ch.solve(&g);
            }
            lambda = if lambda == 0.0 { 1e-6 * neg.diagonal().amax().max(1.0) } else { lambda * 10.0 };
            if lambda > 1e12 {
                return Err(Error::Numerical("Newton system could not be regularized".into()));
            }
        };
        let mut t = 1.0;
        let mut accepted = None;
        for _ in 0..60 {
            let cand = &x + &dir * t;
            let (fc, gc) = fg(&cand);
            if fc.is_finite() && fc >= fx - 1e-12 * fx.abs() {
                accepted = Some((cand, fc, gc));
                break;
            }
            t *= 0.5;
        }
        let Some((xn, fn_, gn)) = accepted else {
            // no ascent possible along the Newton direction: at a maximum up to rounding
            if g.amax() < cfg.tol.sqrt() * (1.0 + fx.abs()) {
                return Ok(NewtonResult { hessian: h, x, value: fx, iterations: iter });
            }
            return Err(Error::Convergence("line search failed to improve the objective".into()));
        };
        let step = (&xn - &x).amax();
        let scale = 1.0 + x.amax();
        x = xn;
        fx = fn_;
        g = gn;
        if step < cfg.tol * scale || g.amax() < cfg.tol * (1.0 + fx.abs()) {
            let hessian = numerical_hessian(&grad, &x);
            return Ok(NewtonResult { x, value: fx, hessian, iterations: iter + 1 });
        }
    }
    Err(Error::Convergence(format!("Newton's method did not converge in {} iterations", cfg.max_iter)))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn maximizes_concave_quadratic() {
        let a = DMatrix::from_row_slice(2, 2, &[2.0, 0.5, 0.5, 1.0]);
        let b = DVector::from_vec(vec![1.0, -3.0]);
        let fg = |x: &DVector<f64>| (-0.5 * (x.transpose() * &a * x)[(0, 0)] + b.dot(x), &b - &a * x);
        let r = newton_maximize(&fg, DVector::zeros(2), &NewtonConfig::default()).unwrap();
        let exact = a.clone().try_inverse().unwrap() * &b;
        assert!((r.x - exact).amax() < 1e-8);
        assert!((r.hessian + a).amax() < 1e-6);
    }

    #[test]
    fn handles_non_quadratic() {
        // f(x) = -cosh(x - 2): maximum at 2, far from quadratic at the start
        let fg = |x: &DVector<f64>| (-(x[0] - 2.0).cosh(), DVector::from_element(1, -(x[0] - 2.0).sinh()));
        let r = newton_maximize(&fg, DVector::from_element(1, -8.0), &NewtonConfig::default()).unwrap();
        assert!((r.x[0] - 2.0).abs() < 1e-8);
    }
}
