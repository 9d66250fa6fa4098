//! Posterior summaries: credible intervals, probability of direction, ROPE
//! probabilities and Bayes-factor interpretation.

use serde::Serialize;

use crate::dist::ClosedForm;
use crate::error::{ensure, Error, Result};
use crate::special::norm_cdf;
use crate::stats;

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct InferenceSummary {
    pub label: String,
    pub post_mean: f64,
    pub ci_lower: f64,
    pub ci_upper: f64,
    pub ci_level: f64,
    pub prob_direction: f64,
    pub rope_prob: Option<f64>,
    pub rope_bounds: Option<(f64, f64)>,
    pub bayes_factor: Option<f64>,
    pub bf_interpretation: Option<String>,
}

impl InferenceSummary {
    pub fn with_bayes_factor(mut self, bf: &BayesFactor) -> Self {
        self.bayes_factor = Some(bf.value);
        self.bf_interpretation = Some(bf.interpretation.clone());
        self
    }

    pub fn with_label(mut self, label: impl Into<String>) -> Self {
        self.label = label.into();
        self
    }
}

/// Interval of practically negligible values on the estimand's scale.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Rope {
    pub lower: f64,
    pub upper: f64,
}

impl Rope {
    pub fn new(lower: f64, upper: f64) -> Result<Rope> {
        ensure!(lower < upper, InvalidArgument, "ROPE lower bound {lower} must be below upper bound {upper}");
        Ok(Rope { lower, upper })
    }

    pub fn symmetric(half_width: f64) -> Result<Rope> {
        Rope::new(-half_width, half_width)
    }

    pub fn exp(self) -> Rope {
        Rope { lower: self.lower.exp(), upper: self.upper.exp() }
    }

    pub fn contains(&self, x: f64) -> bool {
        x > self.lower && x < self.upper
    }
}

/// Half-width of the default link-scale ROPE for a binary covariate.
pub fn log_small_ratio() -> f64 {
    1.125f64.ln()
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum RopeRule {
    /// Difference of means; `pooled_sd` is the root mean of the group variances.
    MeanDifference { pooled_sd: f64 },
    LinearSlope { response_sd: f64, covariate_sd: f64 },
    /// Log odds ratio or log rate ratio for a binary or factor covariate.
    LinkBinary,
    /// Log odds or log rate slope for a continuous covariate.
    LinkContinuous { covariate_sd: f64 },
}

/// Default ROPE bounds on the estimand's own scale (link scale for GLMs).
pub fn default_rope(rule: RopeRule) -> Result<Rope> {
    let positive = |name: &str, v: f64| -> Result<()> {
        ensure!(v > 0.0 && !v.is_nan(), InvalidArgument, "{name} must be positive for a default ROPE, got {v}");
        Ok(())
    };
    match rule {
        RopeRule::MeanDifference { pooled_sd } => {
            positive("pooled SD", pooled_sd)?;
            Rope::symmetric(0.1 * pooled_sd)
        }
        RopeRule::LinearSlope { response_sd, covariate_sd } => {
            positive("response SD", response_sd)?;
            positive("covariate SD", covariate_sd)?;
            Rope::symmetric(0.1 * response_sd / covariate_sd)
        }
        RopeRule::LinkBinary => Rope::symmetric(log_small_ratio()),
        RopeRule::LinkContinuous { covariate_sd } => {
            positive("covariate SD", covariate_sd)?;
            // a small ratio across the central four SDs of the covariate
            let hw = log_small_ratio() / (4.0 * covariate_sd);
            if hw > 0.0 {
                Rope::symmetric(hw)
            } else {
                Ok(Rope { lower: 0.0, upper: 0.0 })
            }
        }
    }
}

fn check_level(ci_level: f64) -> Result<()> {
    ensure!(ci_level > 0.0 && ci_level < 1.0, InvalidArgument, "credible level must lie in (0, 1), got {ci_level}");
    Ok(())
}

/// Summarizes iid posterior draws with an equal-tailed interval.
pub fn summarize_draws(
    label: &str,
    draws: &[f64],
    ci_level: f64,
    rope: Option<Rope>,
    null_value: f64,
) -> Result<InferenceSummary> {
    check_level(ci_level)?;
    ensure!(draws.len() >= 2, InvalidArgument, "need at least two draws to summarize '{label}'");
    ensure!(draws.iter().all(|x| !x.is_nan()), Numerical, "draws for '{label}' contain NaN");
    let sorted = stats::sorted(draws);
    let n = draws.len() as f64;
    let tail = (1.0 - ci_level) / 2.0;
    let above = draws.iter().filter(|&&x| x > null_value).count() as f64 / n;
    let below = draws.iter().filter(|&&x| x < null_value).count() as f64 / n;
    Ok(InferenceSummary {
        label: label.to_string(),
        post_mean: stats::mean(draws),
        ci_lower: stats::quantile_sorted(&sorted, tail),
        ci_upper: stats::quantile_sorted(&sorted, 1.0 - tail),
        ci_level,
        prob_direction: above.max(below),
        rope_prob: rope.map(|r| draws.iter().filter(|&&x| r.contains(x)).count() as f64 / n),
        rope_bounds: rope.map(|r| (r.lower, r.upper)),
        bayes_factor: None,
        bf_interpretation: None,
    })
}

/// Exact summary of a closed-form posterior.
pub fn summarize_closed_form(
    label: &str,
    dist: &ClosedForm,
    ci_level: f64,
    rope: Option<Rope>,
    null_value: f64,
) -> Result<InferenceSummary> {
    check_level(ci_level)?;
    dist.validate()?;
    let tail = (1.0 - ci_level) / 2.0;
    let below = dist.cdf(null_value);
    let above = dist.sf(null_value);
    Ok(InferenceSummary {
        label: label.to_string(),
        post_mean: dist.mean(),
        ci_lower: dist.quantile(tail),
        ci_upper: dist.quantile(1.0 - tail),
        ci_level,
        prob_direction: below.max(above),
        rope_prob: rope.map(|r| (dist.cdf(r.upper) - dist.cdf(r.lower)).max(0.0)),
        rope_bounds: rope.map(|r| (r.lower, r.upper)),
        bayes_factor: None,
        bf_interpretation: None,
    })
}

/// Per-draw exceedance-in-pairs rate Pr(Y_g > Y_h | parameters) for two
/// normal populations.
pub fn epr_draws(mu_g: &[f64], var_g: &[f64], mu_h: &[f64], var_h: &[f64]) -> Result<Vec<f64>> {
    let n = mu_g.len();
    ensure!(
        var_g.len() == n && mu_h.len() == n && var_h.len() == n,
        InvalidArgument,
        "EPR needs the same number of draws for every parameter"
    );
    Ok((0..n).map(|i| norm_cdf((mu_g[i] - mu_h[i]) / (var_g[i] + var_h[i]).sqrt())).collect())
}

pub fn epr(
    label: &str,
    mu_g: &[f64],
    var_g: &[f64],
    mu_h: &[f64],
    var_h: &[f64],
    ci_level: f64,
) -> Result<InferenceSummary> {
    summarize_draws(label, &epr_draws(mu_g, var_g, mu_h, var_h)?, ci_level, None, 0.5)
}

pub const JEFFREYS_LABELS: [&str; 5] =
    ["Barely worth mentioning", "Substantial", "Strong", "Very strong", "Decisive"];

/// Jeffreys' evidence category for a Bayes factor, symmetric in `bf` and `1/bf`.
pub fn jeffreys_label(bf: f64) -> &'static str {
    let strength = bf.max(1.0 / bf).log10();
    let idx = if strength.is_nan() || strength < 0.5 {
        0
    } else if strength < 1.0 {
        1
    } else if strength < 1.5 {
        2
    } else if strength < 2.0 {
        3
    } else {
        4
    };
    JEFFREYS_LABELS[idx]
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct BayesFactor {
    pub value: f64,
    pub log10_value: f64,
    /// Which hypothesis is in the numerator and which in the denominator.
    pub orientation: String,
    pub jeffreys_label: String,
    pub direction: String,
    pub interpretation: String,
}

impl BayesFactor {
    /// `favors` and `disfavors` describe the numerator and denominator
    /// hypotheses as direction phrases.
    pub fn new(value: f64, orientation: &str, favors: &str, disfavors: &str) -> Result<BayesFactor> {
        if !(value > 0.0) || value.is_infinite() {
            return Err(Error::Numerical(format!("Bayes factor for {orientation} is not a positive finite number ({value})")));
        }
        Ok(Self::from_log10(value.log10(), orientation, favors, disfavors))
    }

    /// Builds from a log10 value so extreme factors keep their magnitude.
    pub fn from_log10(log10_value: f64, orientation: &str, favors: &str, disfavors: &str) -> BayesFactor {
        let value = 10f64.powf(log10_value);
        let label = jeffreys_label(10f64.powf(log10_value.abs().min(300.0)));
        let direction = if log10_value >= 0.0 { favors } else { disfavors };
        BayesFactor {
            value,
            log10_value,
            orientation: orientation.to_string(),
            jeffreys_label: label.to_string(),
            direction: direction.to_string(),
            interpretation: format!("{label} ({direction})"),
        }
    }

    pub fn from_ln(ln_value: f64, orientation: &str, favors: &str, disfavors: &str) -> BayesFactor {
        Self::from_log10(ln_value / std::f64::consts::LN_10, orientation, favors, disfavors)
    }

    /// Bayes factor for keeping a coefficient (numerator) versus dropping it.
    pub fn keep_vs_drop(value: f64, term: &str) -> Result<BayesFactor> {
        BayesFactor::new(
            value,
            &format!("{term} != 0 vs {term} = 0"),
            "in favor of keeping in the model",
            "in favor of excluding from the model",
        )
    }

    pub fn inverse(&self) -> BayesFactor {
        let parts: Vec<&str> = self.orientation.splitn(2, " vs ").collect();
        let orientation = if parts.len() == 2 {
            format!("{} vs {}", parts[1], parts[0])
        } else {
            format!("inverse of {}", self.orientation)
        };
        let mut out = BayesFactor::from_log10(-self.log10_value, &orientation, "", "");
        out.value = 1.0 / self.value;
        out.direction = self.direction.clone();
        out.interpretation = format!("{} ({})", out.jeffreys_label, out.direction);
        out
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dist::sample_normal;
    use crate::rng::Streams;
    use crate::special::norm_ppf;
    use approx::assert_relative_eq;
    use proptest::prelude::*;

    #[test]
    fn pdir_extremes() {
        let pos: Vec<f64> = (1..100).map(f64::from).collect();
        assert_eq!(summarize_draws("x", &pos, 0.95, None, 0.0).unwrap().prob_direction, 1.0);
        let mut rng = Streams::new(4).rng();
        let z: Vec<f64> = (0..1_000_000).map(|_| sample_normal(&mut rng)).collect();
        let s = summarize_draws("z", &z, 0.95, Some(Rope::symmetric(0.1).unwrap()), 0.0).unwrap();
        assert!((s.prob_direction - 0.5).abs() < 0.003);
        let exact = norm_cdf(0.1) - norm_cdf(-0.1);
        assert!((s.rope_prob.unwrap() - exact).abs() < 0.002);
        assert!((s.ci_lower - norm_ppf(0.025)).abs() < 0.01);
        assert!((s.ci_upper - norm_ppf(0.975)).abs() < 0.01);
    }

    #[test]
    fn summarize_rejects_bad_input() {
        assert!(summarize_draws("x", &[1.0], 0.95, None, 0.0).is_err());
        assert!(summarize_draws("x", &[1.0, f64::NAN], 0.95, None, 0.0).is_err());
        assert!(summarize_draws("x", &[1.0, 2.0], 1.5, None, 0.0).is_err());
    }

    #[test]
    fn closed_form_examples() {
        let n = summarize_closed_form("n", &ClosedForm::Normal { mean: 0.0, sd: 1.0 }, 0.95, None, 0.0).unwrap();
        assert_relative_eq!(n.ci_lower, -1.959963984540054, epsilon = 1e-9);
        assert_relative_eq!(n.ci_upper, 1.959963984540054, epsilon = 1e-9);
        let b = summarize_closed_form("b", &ClosedForm::Beta { a: 1.0, b: 1.0 }, 0.95, None, 0.5).unwrap();
        assert_relative_eq!(b.ci_lower, 0.025, epsilon = 1e-9);
        assert_relative_eq!(b.ci_upper, 0.975, epsilon = 1e-9);
        let g = summarize_closed_form("g", &ClosedForm::Gamma { shape: 3.0, rate: 2.0 }, 0.95, None, 1.0).unwrap();
        assert_relative_eq!(g.post_mean, 1.5, epsilon = 1e-12);
        assert!(summarize_closed_form("t", &ClosedForm::StudentT { loc: 0.0, scale: 1.0, df: 0.0 }, 0.95, None, 0.0).is_err());
    }

    #[test]
    fn epr_examples() {
        let e = epr_draws(&[1.0, 2.0], &[0.5, 2.0], &[0.0, 0.0], &[0.5, 2.0]).unwrap();
        assert_relative_eq!(e[0], 0.841_344_746_068_542_9, epsilon = 1e-12);
        assert_relative_eq!(e[1], 0.841_344_746_068_542_9, epsilon = 1e-12);
        let same = epr_draws(&[3.0; 4], &[1.0; 4], &[3.0; 4], &[1.0; 4]).unwrap();
        assert!(same.iter().all(|&x| x == 0.5));
        assert!(epr_draws(&[1.0], &[1.0, 2.0], &[1.0], &[1.0]).is_err());
    }

    #[test]
    fn jeffreys_examples() {
        assert_eq!(jeffreys_label(10.6), "Strong");
        assert_eq!(jeffreys_label(0.129), "Substantial");
        assert_eq!(jeffreys_label(1.21e-6), "Decisive");
        assert_eq!(jeffreys_label(1.0), "Barely worth mentioning");
        let bf = BayesFactor::keep_vs_drop(10.6, "rx").unwrap();
        assert_eq!(bf.interpretation, "Strong (in favor of keeping in the model)");
        let bf = BayesFactor::keep_vs_drop(0.129, "gender").unwrap();
        assert_eq!(bf.interpretation, "Substantial (in favor of excluding from the model)");
        assert!(BayesFactor::new(0.0, "a vs b", "", "").is_err());
    }

    #[test]
    fn bf_inverse_flips_orientation() {
        let bf = BayesFactor::new(20.0, "A vs B", "in favor of A", "in favor of B").unwrap();
        let inv = bf.inverse();
        assert_eq!(inv.orientation, "B vs A");
        assert_relative_eq!(inv.value * bf.value, 1.0, epsilon = 1e-15);
        assert_eq!(inv.jeffreys_label, bf.jeffreys_label);
    }

    #[test]
    fn default_rope_examples() {
        let r = default_rope(RopeRule::LinkBinary).unwrap().exp();
        assert!((r.lower - 0.889).abs() < 5e-4 && (r.upper - 1.125).abs() < 1e-12);
        let r = default_rope(RopeRule::MeanDifference { pooled_sd: 1.0 }).unwrap();
        assert_relative_eq!(r.upper, 0.1);
        let r = default_rope(RopeRule::LinkContinuous { covariate_sd: 1e300 }).unwrap();
        assert!(r.upper < 1e-200);
        assert!(default_rope(RopeRule::LinearSlope { response_sd: 1.0, covariate_sd: 0.0 }).is_err());
    }

    proptest! {
        #[test]
        fn rope_partition(draws in proptest::collection::vec(-5.0f64..5.0, 2..200), hw in 0.01f64..3.0) {
            let rope = Rope::symmetric(hw).unwrap();
            let s = summarize_draws("x", &draws, 0.9, Some(rope), 0.0).unwrap();
            let outside = draws.iter().filter(|&&x| !rope.contains(x)).count() as f64 / draws.len() as f64;
            prop_assert!((s.rope_prob.unwrap() + outside - 1.0).abs() < 1e-12);
        }

        #[test]
        fn jeffreys_symmetric(log_bf in -6.0f64..6.0) {
            let bf = 10f64.powf(log_bf);
            prop_assert_eq!(jeffreys_label(bf), jeffreys_label(1.0 / bf));
        }

        #[test]
        fn slope_rope_homogeneous(sy in 0.01f64..100.0, sx in 0.01f64..100.0) {
            let a = default_rope(RopeRule::LinearSlope { response_sd: sy, covariate_sd: sx }).unwrap();
            let b = default_rope(RopeRule::LinearSlope { response_sd: 2.0 * sy, covariate_sd: 2.0 * sx }).unwrap();
            prop_assert!((a.upper - b.upper).abs() <= 1e-12 * a.upper);
        }
    }
}
