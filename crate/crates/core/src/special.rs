//! Special functions and scalar distribution helpers.

use statrs::function::{beta, erf, gamma};

pub const SQRT_2PI: f64 = 2.506_628_274_631_000_7;
pub const LN_SQRT_2PI: f64 = 0.918_938_533_204_672_8;

pub fn ln_gamma(x: f64) -> f64 {
    gamma::ln_gamma(x)
}

pub fn digamma(x: f64) -> f64 {
    gamma::digamma(x)
}

pub fn trigamma(mut x: f64) -> f64 {
    let mut acc = 0.0;
    while x < 12.0 {
        acc += 1.0 / (x * x);
        x += 1.0;
    }
    let x2 = 1.0 / (x * x);
    acc + 1.0 / x
        + x2 / 2.0
        + (1.0 / x) * x2 * (1.0 / 6.0 - x2 * (1.0 / 30.0 - x2 * (1.0 / 42.0 - x2 / 30.0)))
}

pub fn ln_beta(a: f64, b: f64) -> f64 {
    ln_gamma(a) + ln_gamma(b) - ln_gamma(a + b)
}

/// Regularized lower incomplete gamma P(a, x).
pub fn gamma_p(a: f64, x: f64) -> f64 {
    if x <= 0.0 {
        return 0.0;
    }
    if x < a + 1.0 {
        return gamma_p_series(a, x);
    }
    gamma::gamma_lr(a, x)
}

// statrs flushes x below 1e-15 to zero, which breaks tiny lower quantiles.
fn gamma_p_series(a: f64, x: f64) -> f64 {
    let (mut term, mut sum, mut k) = (1.0 / a, 1.0 / a, a);
    for _ in 0..1000 {
        k += 1.0;
        term *= x / k;
        sum += term;
        if term < sum * 1e-17 {
            break;
        }
    }
    (a * x.ln() - x - ln_gamma(a)).exp() * sum
}

/// Regularized upper incomplete gamma Q(a, x).
pub fn gamma_q(a: f64, x: f64) -> f64 {
    if x <= 0.0 {
        return 1.0;
    }
    if x < a + 1.0 {
        return 1.0 - gamma_p_series(a, x);
    }
    gamma::gamma_ur(a, x)
}

/// Regularized incomplete beta I_x(a, b).
pub fn beta_inc(a: f64, b: f64, x: f64) -> f64 {
    if x <= 0.0 {
        0.0
    } else if x >= 1.0 {
        1.0
    } else {
        beta::beta_reg(a, b, x)
    }
}

pub fn norm_pdf(x: f64) -> f64 {
    (-0.5 * x * x).exp() / SQRT_2PI
}

pub fn norm_cdf(x: f64) -> f64 {
    0.5 * libm::erfc(-x / std::f64::consts::SQRT_2)
}

pub fn norm_ppf(p: f64) -> f64 {
    if p <= 0.0 {
        return f64::NEG_INFINITY;
    }
    if p >= 1.0 {
        return f64::INFINITY;
    }
    if p > 0.5 {
        return -norm_ppf(1.0 - p);
    }
    let x = -std::f64::consts::SQRT_2 * erf::erfc_inv(2.0 * p);
    // one Halley step to polish the library's inverse
    let e = norm_cdf(x) - p;
    let u = e / norm_pdf(x);
    x - u / (1.0 + x * u / 2.0)
}

/// Magnitude of the two-sided standard-normal critical value for coverage `s`,
/// i.e. |z_{(1-s)/2}|.
pub fn z_two_sided(s: f64) -> f64 {
    -norm_ppf((1.0 - s) / 2.0)
}

/// Numerically stable log(1 + exp(x)).
pub fn log1p_exp(x: f64) -> f64 {
    if x > 35.0 {
        x
    } else if x < -35.0 {
        x.exp()
    } else {
        x.exp().ln_1p()
    }
}

pub fn logistic(x: f64) -> f64 {
    if x >= 0.0 {
        1.0 / (1.0 + (-x).exp())
    } else {
        let e = x.exp();
        e / (1.0 + e)
    }
}

pub fn log_sum_exp(xs: &[f64]) -> f64 {
    let m = xs.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    if !m.is_finite() {
        return m;
    }
    m + xs.iter().map(|x| (x - m).exp()).sum::<f64>().ln()
}

/// Solves `cdf(x) = p` for a continuous increasing `cdf` on `(lo, hi)` using
/// Newton steps safeguarded by bisection. Infinite bounds are bracketed by
/// expansion from `x0`.
pub(crate) fn invert_cdf(
    cdf: impl Fn(f64) -> f64,
    pdf: impl Fn(f64) -> f64,
    p: f64,
    x0: f64,
    lo: f64,
    hi: f64,
) -> f64 {
    let (mut a, mut b) = (lo, hi);
    if !a.is_finite() {
        let mut step = 1.0_f64.max(x0.abs());
        a = x0 - step;
        while cdf(a) > p {
            step *= 2.0;
            a = x0 - step;
            if step > 1e300 {
                return f64::NEG_INFINITY;
            }
        }
    }
    if !b.is_finite() {
        let mut step = 1.0_f64.max(x0.abs());
        b = x0 + step;
        while cdf(b) < p {
            step *= 2.0;
            b = x0 + step;
            if step > 1e300 {
                return f64::INFINITY;
            }
        }
    }
    let mut x = if x0 > a && x0 < b { x0 } else { 0.5 * (a + b) };
    for _ in 0..400 {
        let f = cdf(x) - p;
        if f == 0.0 {
            return x;
        }
        if f < 0.0 {
            a = x;
        } else {
            b = x;
        }
        let d = pdf(x);
        let mut next = if d > 0.0 && d.is_finite() { x - f / d } else { f64::NAN };
        if !(next > a && next < b) {
            next = 0.5 * (a + b);
        }
        if (next - x).abs() <= 1e-15 * x.abs().max(1e-300) || (b - a) <= 4e-16 * a.abs().max(b.abs()) {
            return next;
        }
        x = next;
    }
    x
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    #[test]
    fn normal_quantiles() {
        assert_relative_eq!(norm_ppf(0.975), 1.959_963_984_540_054, epsilon = 1e-12);
        assert_relative_eq!(z_two_sided(0.95), 1.959_963_984_540_054, epsilon = 1e-12);
        assert_relative_eq!(norm_cdf(norm_ppf(0.01)), 0.01, epsilon = 1e-14);
    }

    #[test]
    fn trigamma_values() {
        // trigamma(1) = pi^2 / 6
        assert_relative_eq!(trigamma(1.0), std::f64::consts::PI.powi(2) / 6.0, epsilon = 1e-12);
        assert_relative_eq!(trigamma(0.5), std::f64::consts::PI.powi(2) / 2.0, epsilon = 1e-12);
        assert_relative_eq!(trigamma(100.0), 0.010_050_166_663_333_571, epsilon = 1e-14);
    }

    #[test]
    fn invert_cdf_recovers_normal_quantile() {
        let x = invert_cdf(norm_cdf, norm_pdf, 0.025, 0.0, f64::NEG_INFINITY, f64::INFINITY);
        assert_relative_eq!(x, -1.959_963_984_540_054, epsilon = 1e-10);
    }

    #[test]
    fn log_sum_exp_is_stable() {
        assert_relative_eq!(log_sum_exp(&[1000.0, 1000.0]), 1000.0 + 2f64.ln(), epsilon = 1e-12);
    }
}
