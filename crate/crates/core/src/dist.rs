//! Univariate distributions with exact densities, CDFs and quantiles.

use rand::Rng as _;
use rand_distr::{Distribution, Gamma as GammaSampler, StandardNormal};
use serde::Serialize;

use crate::error::{ensure, Result};
use crate::rng::Rng;
use crate::special::{
    beta_inc, gamma_p, gamma_q, invert_cdf, ln_beta, ln_gamma, norm_cdf, norm_ppf,
    LN_SQRT_2PI,
};

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
#[serde(tag = "family", rename_all = "snake_case")]
pub enum ClosedForm {
    StudentT { loc: f64, scale: f64, df: f64 },
    Normal { mean: f64, sd: f64 },
    /// Shape/rate parameterization.
    Gamma { shape: f64, rate: f64 },
    Beta { a: f64, b: f64 },
    /// Shape/rate parameterization: density ∝ x^{-shape-1} exp(-rate/x).
    InvGamma { shape: f64, rate: f64 },
}

impl ClosedForm {
    pub fn validate(&self) -> Result<()> {
        let ok = |x: f64| x.is_finite() && x > 0.0;
        match *self {
            ClosedForm::StudentT { loc, scale, df } => {
                ensure!(loc.is_finite() && ok(scale) && ok(df), InvalidArgument, "student-t requires finite loc, scale > 0, df > 0 (got {loc}, {scale}, {df})");
            }
            ClosedForm::Normal { mean, sd } => {
                ensure!(mean.is_finite() && ok(sd), InvalidArgument, "normal requires finite mean and sd > 0 (got {mean}, {sd})");
            }
            ClosedForm::Gamma { shape, rate } | ClosedForm::InvGamma { shape, rate } => {
                ensure!(ok(shape) && ok(rate), InvalidArgument, "shape and rate must be positive (got {shape}, {rate})");
            }
            ClosedForm::Beta { a, b } => {
                ensure!(ok(a) && ok(b), InvalidArgument, "beta shapes must be positive (got {a}, {b})");
            }
        }
        Ok(())
    }

    pub fn support(&self) -> (f64, f64) {
        match self {
            ClosedForm::StudentT { .. } | ClosedForm::Normal { .. } => {
                (f64::NEG_INFINITY, f64::INFINITY)
            }
            ClosedForm::Gamma { .. } | ClosedForm::InvGamma { .. } => (0.0, f64::INFINITY),
            ClosedForm::Beta { .. } => (0.0, 1.0),
        }
    }

    pub fn mean(&self) -> f64 {
        match *self {
            ClosedForm::StudentT { loc, df, .. } => {
                if df > 1.0 {
                    loc
                } else {
                    f64::NAN
                }
            }
            ClosedForm::Normal { mean, .. } => mean,
            ClosedForm::Gamma { shape, rate } => shape / rate,
            ClosedForm::Beta { a, b } => a / (a + b),
            ClosedForm::InvGamma { shape, rate } => {
                if shape > 1.0 {
                    rate / (shape - 1.0)
                } else {
                    f64::INFINITY
                }
            }
        }
    }

    pub fn variance(&self) -> f64 {
        match *self {
            ClosedForm::StudentT { scale, df, .. } => {
                if df > 2.0 {
                    scale * scale * df / (df - 2.0)
                } else {
                    f64::INFINITY
                }
            }
            ClosedForm::Normal { sd, .. } => sd * sd,
            ClosedForm::Gamma { shape, rate } => shape / (rate * rate),
            ClosedForm::Beta { a, b } => a * b / ((a + b).powi(2) * (a + b + 1.0)),
            ClosedForm::InvGamma { shape, rate } => {
                if shape > 2.0 {
                    rate * rate / ((shape - 1.0).powi(2) * (shape - 2.0))
                } else {
                    f64::INFINITY
                }
            }
        }
    }

    pub fn ln_pdf(&self, x: f64) -> f64 {
        let (lo, hi) = self.support();
        if x < lo || x > hi {
            return f64::NEG_INFINITY;
        }
        match *self {
            ClosedForm::StudentT { loc, scale, df } => {
                let z = (x - loc) / scale;
                ln_gamma((df + 1.0) / 2.0)
                    - ln_gamma(df / 2.0)
                    - 0.5 * (df * std::f64::consts::PI).ln()
                    - scale.ln()
                    - (df + 1.0) / 2.0 * (z * z / df).ln_1p()
            }
            ClosedForm::Normal { mean, sd } => {
                let z = (x - mean) / sd;
                -LN_SQRT_2PI - sd.ln() - 0.5 * z * z
            }
            ClosedForm::Gamma { shape, rate } => {
                if x == 0.0 {
                    return if shape < 1.0 { f64::INFINITY } else if shape == 1.0 { rate.ln() } else { f64::NEG_INFINITY };
                }
                shape * rate.ln() - ln_gamma(shape) + (shape - 1.0) * x.ln() - rate * x
            }
            ClosedForm::Beta { a, b } => {
                (a - 1.0) * x.ln() + (b - 1.0) * (-x).ln_1p() - ln_beta(a, b)
            }
            ClosedForm::InvGamma { shape, rate } => {
                if x == 0.0 {
                    return f64::NEG_INFINITY;
                }
                shape * rate.ln() - ln_gamma(shape) - (shape + 1.0) * x.ln() - rate / x
            }
        }
    }

    pub fn pdf(&self, x: f64) -> f64 {
        self.ln_pdf(x).exp()
    }

    pub fn cdf(&self, x: f64) -> f64 {
        match *self {
            ClosedForm::StudentT { loc, scale, df } => {
                let t = (x - loc) / scale;
                if !t.is_finite() {
                    return if t > 0.0 { 1.0 } else { 0.0 };
                }
                let tail = 0.5 * beta_inc(df / 2.0, 0.5, df / (df + t * t));
                if t > 0.0 {
                    1.0 - tail
                } else {
                    tail
                }
            }
            ClosedForm::Normal { mean, sd } => norm_cdf((x - mean) / sd),
            ClosedForm::Gamma { shape, rate } => gamma_p(shape, rate * x),
            ClosedForm::Beta { a, b } => beta_inc(a, b, x),
            ClosedForm::InvGamma { shape, rate } => {
                if x <= 0.0 {
                    0.0
                } else {
                    gamma_q(shape, rate / x)
                }
            }
        }
    }

    /// Upper tail 1 - F(x), computed without cancellation where it matters.
    pub fn sf(&self, x: f64) -> f64 {
        match *self {
            ClosedForm::Normal { mean, sd } => norm_cdf(-(x - mean) / sd),
            ClosedForm::StudentT { loc, scale, df } => {
                ClosedForm::StudentT { loc: -loc, scale, df }.cdf(-x)
            }
            ClosedForm::Gamma { shape, rate } => gamma_q(shape, rate * x),
            ClosedForm::Beta { a, b } => beta_inc(b, a, 1.0 - x),
            ClosedForm::InvGamma { shape, rate } => {
                if x <= 0.0 {
                    1.0
                } else {
                    gamma_p(shape, rate / x)
                }
            }
        }
    }

    pub fn quantile(&self, p: f64) -> f64 {
        if p <= 0.0 {
            return self.support().0;
        }
        if p >= 1.0 {
            return self.support().1;
        }
        match *self {
            ClosedForm::Normal { mean, sd } => mean + sd * norm_ppf(p),
            ClosedForm::StudentT { loc, scale, df } => {
                // symmetric: solve on the lower half for accuracy
                let q = if p < 0.5 { p } else { 1.0 - p };
                let std = ClosedForm::StudentT { loc: 0.0, scale: 1.0, df };
                let z = invert_cdf(
                    |t| std.cdf(t),
                    |t| std.pdf(t),
                    q,
                    norm_ppf(q),
                    f64::NEG_INFINITY,
                    0.0,
                );
                let z = if p < 0.5 { z } else { -z };
                loc + scale * z
            }
            ClosedForm::Gamma { shape, rate } => {
                let unit = ClosedForm::Gamma { shape, rate: 1.0 };
                let x0 = shape.max(1e-3);
                invert_cdf(|x| unit.cdf(x), |x| unit.pdf(x), p, x0, 0.0, f64::INFINITY) / rate
            }
            ClosedForm::InvGamma { shape, rate } => {
                let g = ClosedForm::Gamma { shape, rate: 1.0 };
                rate / g.quantile(1.0 - p)
            }
            ClosedForm::Beta { a, b } => {
                let d = *self;
                invert_cdf(|x| d.cdf(x), |x| d.pdf(x), p, a / (a + b), 0.0, 1.0)
            }
        }
    }

    pub fn sample(&self, rng: &mut Rng) -> f64 {
        match *self {
            ClosedForm::Normal { mean, sd } => {
                let z: f64 = StandardNormal.sample(rng);
                mean + sd * z
            }
            ClosedForm::StudentT { loc, scale, df } => {
                let z: f64 = StandardNormal.sample(rng);
                let g = sample_gamma(rng, df / 2.0, df / 2.0);
                loc + scale * z / g.sqrt()
            }
            ClosedForm::Gamma { shape, rate } => sample_gamma(rng, shape, rate),
            ClosedForm::InvGamma { shape, rate } => 1.0 / sample_gamma(rng, shape, rate),
            ClosedForm::Beta { a, b } => {
                let x = sample_gamma(rng, a, 1.0);
                let y = sample_gamma(rng, b, 1.0);
                x / (x + y)
            }
        }
    }
}

/// Gamma(shape, rate) draw.
pub fn sample_gamma(rng: &mut Rng, shape: f64, rate: f64) -> f64 {
    if shape < 1.0 {
        // boost small shapes: G(a) = G(a + 1) U^{1/a}
        let g = GammaSampler::new(shape + 1.0, 1.0).expect("valid gamma").sample(rng);
        let u: f64 = rng.gen::<f64>().max(f64::MIN_POSITIVE);
        return g * u.powf(1.0 / shape) / rate;
    }
    GammaSampler::new(shape, 1.0 / rate).expect("valid gamma").sample(rng)
}

pub fn sample_normal(rng: &mut Rng) -> f64 {
    StandardNormal.sample(rng)
}
