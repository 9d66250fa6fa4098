//! Quadrature oracles shared by the oracle tests and the acceptance suite.
//!
//! Each oracle integrates an unnormalized log posterior kernel written
//! directly from likelihood times prior, never from conjugate update rules.
#![allow(dead_code)]

use bayesics::data::Dataset;
use bayesics::design::build_design;
use bayesics::formula::parse_formula;
use bayesics::linear::{fit_lm, LmPrior};
use bayesics::rng::Streams;
use bayesics::simple::{
    poisson_test, prop_test, sign_test, t_test_one, BetaPrior, BinomialSample, CountSample, GammaPrior, TestOptions,
};
use bayesics::summary::InferenceSummary;
use rand::Rng as _;

const PIECES: usize = 16;
const DROP: f64 = 60.0;

fn de(f: impl Fn(f64) -> f64, a: f64, b: f64) -> f64 {
    if b <= a {
        return 0.0;
    }
    quadrature::integrate(f, a, b, 1e-13).integral
}

fn piecewise(f: &dyn Fn(f64) -> f64, a: f64, b: f64, pieces: usize) -> f64 {
    let h = (b - a) / pieces as f64;
    (0..pieces).map(|i| de(f, a + i as f64 * h, a + (i + 1) as f64 * h)).sum()
}

/// Posterior mean and equal-tailed interval of a scalar parameter.
#[derive(Debug, Clone, Copy)]
pub struct Oracle {
    pub mean: f64,
    pub lower: f64,
    pub upper: f64,
    pub sd: f64,
}

/// A unimodal log kernel on `(lo, hi)`; `guess` must lie in the bulk.
pub struct Kernel<'a> {
    pub log_kernel: &'a dyn Fn(f64) -> f64,
    pub lo: f64,
    pub hi: f64,
    pub guess: f64,
}

impl Kernel<'_> {
    /// Grows outward from the guess until the kernel has fallen by `DROP` nats.
    fn window(&self) -> (f64, f64) {
        let top = (self.log_kernel)(self.guess);
        let reach = |dir: f64, bound: f64| {
            let mut step = 1e-3 * (1.0 + self.guess.abs());
            loop {
                let x = self.guess + dir * step;
                if (dir < 0.0 && x <= bound) || (dir > 0.0 && x >= bound) {
                    return bound;
                }
                if (self.log_kernel)(x) < top - DROP {
                    return x;
                }
                step *= 1.5;
            }
        };
        (reach(-1.0, self.lo), reach(1.0, self.hi))
    }

    pub fn oracle(&self, ci_level: f64) -> Oracle {
        let (a, b) = self.window();
        let peak = (0..=400)
            .map(|i| a + (b - a) * i as f64 / 400.0)
            .filter(|&x| x > self.lo && x < self.hi)
            .map(|x| (self.log_kernel)(x))
            .fold(f64::NEG_INFINITY, f64::max);
        let dens = |x: f64| {
            if x <= self.lo || x >= self.hi {
                0.0
            } else {
                ((self.log_kernel)(x) - peak).exp()
            }
        };
        let z = piecewise(&dens, a, b, PIECES);
        let mean = piecewise(&|x| x * dens(x), a, b, PIECES) / z;
        let var = piecewise(&|x| (x - mean).powi(2) * dens(x), a, b, PIECES) / z;
        let cdf = |x: f64| piecewise(&dens, a, x, PIECES) / z;
        let quantile = |p: f64| {
            let (mut l, mut u) = (a, b);
            let mut x = mean;
            for _ in 0..200 {
                let f = cdf(x) - p;
                if f.abs() < 1e-15 {
                    break;
                }
                if f > 0.0 {
                    u = x;
                } else {
                    l = x;
                }
                // Newton step on the CDF, bisection when it leaves the bracket
                let d = dens(x) / z;
                let next = if d > 0.0 { x - f / d } else { f64::NAN };
                x = if next > l && next < u { next } else { 0.5 * (l + u) };
                if (u - l).abs() < 1e-14 * (1.0 + x.abs()) {
                    break;
                }
            }
            x
        };
        let tail = (1.0 - ci_level) / 2.0;
        Oracle { mean, lower: quantile(tail), upper: quantile(1.0 - tail), sd: var.sqrt() }
    }
}

/// Largest discrepancy relative to `max(|oracle value|, posterior SD)`.
pub fn discrepancy(s: &InferenceSummary, o: &Oracle) -> f64 {
    [(s.post_mean, o.mean), (s.ci_lower, o.lower), (s.ci_upper, o.upper)]
        .iter()
        .map(|(got, want)| (got - want).abs() / want.abs().max(o.sd))
        .fold(0.0, f64::max)
}

pub struct Case {
    pub name: String,
    pub summary: InferenceSummary,
    pub oracle: Oracle,
}

impl Case {
    pub fn error(&self) -> f64 {
        discrepancy(&self.summary, &self.oracle)
    }
}

fn beta_oracle(a: f64, b: f64, ci: f64) -> Oracle {
    let lk = move |p: f64| (a - 1.0) * p.ln() + (b - 1.0) * (-p).ln_1p();
    Kernel { log_kernel: &lk, lo: 0.0, hi: 1.0, guess: a / (a + b) }.oracle(ci)
}

/// One randomized instance of each closed-form analysis, from `seed`.
pub fn random_cases(seed: u64) -> Vec<Case> {
    let mut rng = Streams::new(seed).rng();
    let ci = [0.8, 0.9, 0.95, 0.99][rng.gen_range(0..4)];
    let opts = TestOptions { ci_level: ci, ..Default::default() };
    let mut cases = Vec::new();

    // one-sample normal mean
    let n = rng.gen_range(3..30);
    let loc: f64 = rng.gen_range(-5.0..5.0);
    let scale: f64 = rng.gen_range(0.2..4.0);
    let y: Vec<f64> = (0..n).map(|_| loc + scale * bayesics::dist::sample_normal(&mut rng)).collect();
    let null = rng.gen_range(-1.0..1.0);
    let t = t_test_one(&y, null, &opts).unwrap();
    let (m0, k0, a0, b0) = (t.prior.mean, t.prior.precision, t.prior.a, t.prior.b);
    let yc = y.clone();
    let expo = (n as f64 + 1.0 + a0) / 2.0;
    let lk = move |mu: f64| {
        let q = b0 + yc.iter().map(|v| (v - mu).powi(2)).sum::<f64>() + k0 * (mu - m0).powi(2);
        -expo * q.ln()
    };
    let ybar = y.iter().sum::<f64>() / n as f64;
    cases.push(Case {
        name: format!("ttest n={n}"),
        summary: t.mean.clone(),
        oracle: Kernel { log_kernel: &lk, lo: f64::NEG_INFINITY, hi: f64::INFINITY, guess: ybar }.oracle(ci),
    });

    // one proportion
    let trials = rng.gen_range(1..200u64);
    let successes = rng.gen_range(0..=trials);
    let prior = if rng.gen_bool(0.5) { BetaPrior::JEFFREYS } else { BetaPrior::new(rng.gen_range(0.5..5.0), rng.gen_range(0.5..5.0)).unwrap() };
    let p = prop_test(&[BinomialSample { successes, trials }], prior, &opts, &mut Streams::new(seed)).unwrap();
    cases.push(Case {
        name: format!("prop {successes}/{trials}"),
        summary: p.proportions[0].clone(),
        oracle: beta_oracle(prior.a + successes as f64, prior.b + (trials - successes) as f64, ci),
    });

    // one Poisson rate
    let count = rng.gen_range(0..100u64);
    let offset = rng.gen_range(0.5..50.0);
    let gp = if rng.gen_bool(0.5) { GammaPrior::DEFAULT } else { GammaPrior::new(rng.gen_range(0.5..3.0), rng.gen_range(0.1..2.0)).unwrap() };
    let r = poisson_test(&[CountSample { count, offset }], gp, None, &opts, &mut Streams::new(seed)).unwrap();
    let (shape, rate, c) = (gp.shape, gp.rate, count as f64);
    let lk = move |l: f64| (shape - 1.0 + c) * l.ln() - (rate + offset) * l;
    cases.push(Case {
        name: format!("poisson {count}/{offset:.2}"),
        summary: r.rates[0].clone(),
        oracle: Kernel { log_kernel: &lk, lo: 0.0, hi: f64::INFINITY, guess: (shape + c) / (rate + offset) }.oracle(ci),
    });

    // sign test
    let m = rng.gen_range(1..60);
    let shift = rng.gen_range(-1.0..1.0);
    let diffs: Vec<f64> = (0..m).map(|_| shift + bayesics::dist::sample_normal(&mut rng)).collect();
    let s = sign_test(&diffs, BetaPrior::JEFFREYS, &opts).unwrap();
    let pos = diffs.iter().filter(|&&d| d > 0.0).count() as f64;
    let neg = diffs.iter().filter(|&&d| d < 0.0).count() as f64;
    cases.push(Case {
        name: format!("sign {pos}+/{neg}-"),
        summary: s.prob_positive.clone(),
        oracle: beta_oracle(0.5 + pos, 0.5 + neg, ci),
    });

    // simple linear regression, both default priors
    let n = rng.gen_range(6..30);
    let slope = rng.gen_range(-2.0..2.0);
    let x: Vec<f64> = (0..n).map(|_| rng.gen_range(-3.0..3.0)).collect();
    let y: Vec<f64> = x.iter().map(|v| 1.0 + slope * v + bayesics::dist::sample_normal(&mut rng)).collect();
    let data = Dataset::from_numeric(vec![("x", x.clone()), ("y", y.clone())]).unwrap();
    let design = build_design(&parse_formula("y ~ x").unwrap(), &data).unwrap();
    for kind in [LmPrior::ZellnerG, LmPrior::Conjugate] {
        let fit = fit_lm(&design, &kind).unwrap();
        let summaries = fit.summaries(ci, None).unwrap();
        let pr = &fit.prior;
        for (j, summary) in summaries.iter().take(2).enumerate() {
            cases.push(Case {
                name: format!("lm {kind:?} coef {j} n={n}"),
                summary: summary.clone(),
                oracle: regression_oracle(&x, &y, pr, j, ci),
            });
        }
    }
    cases
}

/// Marginal posterior of coefficient `j` in `y = b0 + b1 x` under a
/// normal-inverse-gamma prior: sigma2 integrates out in closed form to
/// `Q(beta)^-(n+p+a)/2`, the other coefficient numerically.
fn regression_oracle(x: &[f64], y: &[f64], prior: &bayesics::linear::NigPrior, j: usize, ci: f64) -> Oracle {
    let n = x.len() as f64;
    let (mu, v, a, b) = (prior.mu.clone(), prior.v.clone(), prior.a, prior.b);
    let expo = (n + 2.0 + a) / 2.0;
    let q = |b0: f64, b1: f64| {
        let rss: f64 = x.iter().zip(y).map(|(xi, yi)| (yi - b0 - b1 * xi).powi(2)).sum();
        let d = [b0 - mu[0], b1 - mu[1]];
        let pen = v[(0, 0)] * d[0] * d[0] + 2.0 * v[(0, 1)] * d[0] * d[1] + v[(1, 1)] * d[1] * d[1];
        b + rss + pen
    };
    // least-squares fit, for guesses only
    let xbar = x.iter().sum::<f64>() / n;
    let ybar = y.iter().sum::<f64>() / n;
    let sxy: f64 = x.iter().zip(y).map(|(a, b)| (a - xbar) * (b - ybar)).sum();
    let sxx: f64 = x.iter().map(|a| (a - xbar).powi(2)).sum();
    let ols = [ybar - sxy / sxx * xbar, sxy / sxx];
    let other = 1 - j;
    let inner_ref = -expo * q(ols[0], ols[1]).ln();
    let log_marginal = |t: f64| {
        let joint = |s: f64| {
            let (b0, b1) = if j == 0 { (t, s) } else { (s, t) };
            -expo * q(b0, b1).ln() - inner_ref
        };
        // conditional mode of the other coefficient; Q is convex along it
        let span = 1e3 * (1.0 + ols[other].abs());
        let mode = golden(&|s| -joint(s), ols[other] - span, ols[other] + span);
        let k = Kernel { log_kernel: &joint, lo: f64::NEG_INFINITY, hi: f64::INFINITY, guess: mode };
        let (lo, hi) = k.window();
        let top = joint(mode);
        (piecewise(&|s| (joint(s) - top).exp(), lo, hi, 4)).ln() + top
    };
    Kernel { log_kernel: &log_marginal, lo: f64::NEG_INFINITY, hi: f64::INFINITY, guess: ols[j] }.oracle(ci)
}

fn golden(f: &dyn Fn(f64) -> f64, mut a: f64, mut b: f64) -> f64 {
    let r = (5f64.sqrt() - 1.0) / 2.0;
    let mut c = b - r * (b - a);
    let mut d = a + r * (b - a);
    while (b - a).abs() > 1e-10 * (1.0 + a.abs()) {
        if f(c) < f(d) {
            b = d;
        } else {
            a = c;
        }
        c = b - r * (b - a);
        d = a + r * (b - a);
    }
    0.5 * (a + b)
}

/// Log marginal likelihood of `events` exponential events over `exposure`
/// under a Gamma(shape, rate) hazard prior, integrated over the log hazard.
pub fn hazard_log_ml_quadrature(shape: f64, rate: f64, events: f64, exposure: f64) -> f64 {
    let ln_f = |u: f64| {
        let l = u.exp();
        shape * rate.ln() - libm::lgamma(shape) + shape * u - rate * l + events * u - l * exposure
    };
    let mode = ((shape + events) / (rate + exposure)).ln();
    let top = ln_f(mode);
    let k = Kernel { log_kernel: &|u| ln_f(u) - top, lo: f64::NEG_INFINITY, hi: f64::INFINITY, guess: mode };
    let (a, b) = k.window();
    piecewise(&|u| (ln_f(u) - top).exp(), a, b, PIECES).ln() + top
}
