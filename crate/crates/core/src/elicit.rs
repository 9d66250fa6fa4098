//! Prior elicitation: find Beta and inverse-gamma hyperparameters matching
//! user statements about means, quantiles or explained variance.

use serde::Serialize;

use crate::dist::ClosedForm;
use crate::error::{ensure, Result};

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct BetaParms {
    pub shape1: f64,
    pub shape2: f64,
    /// False when no pair matches the target and the closest fit is returned.
    pub exact: bool,
}

const SHAPE_LO: f64 = 1e-3;
const SHAPE_HI: f64 = 1e3;

/// Bisection on `log(x)` over the shape search box. Returns the root if `f`
/// changes sign, otherwise the grid point with smallest `|f|` and `false`.
fn log_bisect(f: impl Fn(f64) -> f64, tol: f64) -> (f64, bool) {
    let grid: Vec<f64> = (0..=240)
        .map(|i| (SHAPE_LO.ln() + (SHAPE_HI.ln() - SHAPE_LO.ln()) * i as f64 / 240.0).exp())
        .collect();
    let vals: Vec<f64> = grid.iter().map(|&x| f(x)).collect();
    for i in 0..grid.len() - 1 {
        let (fa, fb) = (vals[i], vals[i + 1]);
        if fa == 0.0 {
            return (grid[i], true);
        }
        if fa.is_finite() && fb.is_finite() && fa.signum() != fb.signum() {
            let (mut lo, mut hi, mut flo) = (grid[i].ln(), grid[i + 1].ln(), fa);
            for _ in 0..200 {
                let mid = 0.5 * (lo + hi);
                let fm = f(mid.exp());
                if fm.abs() < tol || hi - lo < 1e-15 {
                    return (mid.exp(), true);
                }
                if fm.signum() == flo.signum() {
                    lo = mid;
                    flo = fm;
                } else {
                    hi = mid;
                }
            }
            return ((0.5 * (lo + hi)).exp(), true);
        }
    }
    let best = (0..grid.len())
        .filter(|&i| vals[i].is_finite())
        .min_by(|&a, &b| vals[a].abs().total_cmp(&vals[b].abs()))
        .unwrap_or(0);
    (grid[best], vals[best].abs() < tol)
}

/// Beta shapes with the given mean whose `quantile_prob` quantile equals
/// `quantile_value`.
pub fn find_beta_parms(mean: f64, quantile_prob: f64, quantile_value: f64) -> Result<BetaParms> {
    ensure!(mean > 0.0 && mean < 1.0, InvalidArgument, "target mean must lie in (0, 1), got {mean}");
    ensure!(quantile_prob > 0.0 && quantile_prob < 1.0, InvalidArgument, "quantile probability must lie in (0, 1), got {quantile_prob}");
    ensure!(quantile_value > 0.0 && quantile_value < 1.0, InvalidArgument, "quantile value must lie in (0, 1), got {quantile_value}");
    let shape2 = |a: f64| a * (1.0 - mean) / mean;
    let miss = |a: f64| ClosedForm::Beta { a, b: shape2(a) }.quantile(quantile_prob) - quantile_value;
    if miss(1.0).abs() < 1e-10 && (mean - 0.5).abs() < 1e-12 {
        return Ok(BetaParms { shape1: 1.0, shape2: 1.0, exact: true });
    }
    let (a, exact) = log_bisect(miss, 1e-10);
    Ok(BetaParms { shape1: a, shape2: shape2(a), exact })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct InvGammaParms {
    pub shape: f64,
    pub rate: f64,
    pub exact: bool,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum InvGammaTarget {
    TwoQuantiles { p1: f64, v1: f64, p2: f64, v2: f64 },
    /// 50% prior probability that R² lies in (0.1, 0.9), given the response variance.
    RSquared { response_variance: f64 },
}

/// Inverse-gamma (shape, rate) matching two quantiles.
pub fn find_invgamma_parms(target: InvGammaTarget) -> Result<InvGammaParms> {
    let (p1, v1, p2, v2) = match target {
        InvGammaTarget::TwoQuantiles { p1, v1, p2, v2 } => (p1, v1, p2, v2),
        InvGammaTarget::RSquared { response_variance: s2 } => {
            ensure!(s2 > 0.0 && s2.is_finite(), InvalidArgument, "response variance must be positive, got {s2}");
            (0.25, (1.0 - 0.9 * 0.9) * s2, 0.75, (1.0 - 0.1 * 0.1) * s2)
        }
    };
    ensure!(v1 > 0.0 && v2 > 0.0, InvalidArgument, "quantile values must be positive");
    ensure!(v1 < v2, InvalidArgument, "first quantile value must be below the second ({v1} >= {v2})");
    ensure!(0.0 < p1 && p1 < p2 && p2 < 1.0, InvalidArgument, "quantile probabilities must satisfy 0 < p1 < p2 < 1");
    // the rate is a pure scale: fix it from the first quantile, search the shape
    let unit_q = |shape: f64, p: f64| ClosedForm::InvGamma { shape, rate: 1.0 }.quantile(p);
    let rate = |shape: f64| v1 / unit_q(shape, p1);
    let miss = |shape: f64| (rate(shape) * unit_q(shape, p2) / v2).ln();
    let (shape, exact) = log_bisect(miss, 1e-9);
    Ok(InvGammaParms { shape, rate: rate(shape), exact })
}
