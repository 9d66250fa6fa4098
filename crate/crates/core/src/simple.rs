//! One- and two-sample analyses with conjugate posteriors.

use serde::Serialize;

use crate::dist::ClosedForm;
use crate::error::{ensure, Result};
use crate::linear::aov::{compare_groups, CompareOptions, GroupComparison};
use crate::linear::groups::{fit_group, GroupPosterior, GroupPrior};
use crate::linear::qq_pairs;
use crate::mc_plan::{run_adaptive_sampler, SamplePlan, SamplerConfig};
use crate::rng::{Rng, Streams};
use crate::special::ln_gamma;
use crate::special::ln_beta;
use crate::stats;
use crate::summary::{
    default_rope, summarize_closed_form, summarize_draws, BayesFactor, InferenceSummary, Rope, RopeRule,
};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TestOptions {
    pub ci_level: f64,
    /// Replaces the default ROPE; given on the reported scale.
    pub rope_override: Option<Rope>,
    pub sampler: SamplerConfig,
}

impl Default for TestOptions {
    fn default() -> Self {
        TestOptions { ci_level: 0.95, rope_override: None, sampler: SamplerConfig::default() }
    }
}

/// The odds-ratio and rate-ratio ROPE shared by the count analyses.
fn ratio_rope(opts: &TestOptions) -> Rope {
    opts.rope_override.unwrap_or_else(|| default_rope(RopeRule::LinkBinary).expect("fixed bounds").exp())
}

fn summarize_ratio(label: &str, log_draws: &[f64], opts: &TestOptions) -> Result<InferenceSummary> {
    let ratios: Vec<f64> = log_draws.iter().map(|v| v.exp()).collect();
    summarize_draws(label, &ratios, opts.ci_level, Some(ratio_rope(opts)), 1.0)
}

/// Two posteriors are drawn in a canonical order so that swapping the
/// samples mirrors every draw exactly.
fn canonical_swap(a: (f64, f64), b: (f64, f64)) -> bool {
    a.partial_cmp(&b) == Some(std::cmp::Ordering::Greater)
}

fn draw_pair(d1: &ClosedForm, d2: &ClosedForm, swap: bool, rng: &mut Rng) -> (f64, f64) {
    if swap {
        let b = d2.sample(rng);
        (d1.sample(rng), b)
    } else {
        let a = d1.sample(rng);
        (a, d2.sample(rng))
    }
}

// ---------------------------------------------------------------- t test

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct QqGroup {
    pub label: String,
    pub sample_sd: f64,
    pub pairs: Vec<(f64, f64)>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct OneSampleT {
    pub null_value: f64,
    pub prior: GroupPrior,
    pub posterior: GroupPosterior,
    pub mean: InferenceSummary,
    pub variance: InferenceSummary,
    /// Mean differs from the null value vs equals it (Savage–Dickey).
    pub bayes_factor: BayesFactor,
    pub qq: QqGroup,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct TwoSampleT {
    pub comparison: GroupComparison,
    pub qq: Vec<QqGroup>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
#[serde(tag = "design", rename_all = "snake_case")]
pub enum TTest {
    OneSample(OneSampleT),
    TwoSample(TwoSampleT),
}

fn qq_group(label: &str, y: &[f64]) -> QqGroup {
    let m = stats::mean(y);
    let sd = stats::sd(y);
    let z: Vec<f64> = y.iter().map(|v| (v - m) / sd).collect();
    QqGroup { label: label.to_string(), sample_sd: sd, pairs: qq_pairs(&z) }
}

/// One-sample inference on a normal mean relative to `null_value`.
pub fn t_test_one(y: &[f64], null_value: f64, opts: &TestOptions) -> Result<OneSampleT> {
    ensure!(y.len() >= 2, Data, "need at least two observations, got {}", y.len());
    let prior = GroupPrior::vague(null_value);
    let post = fit_group("y", y, &prior)?;
    let rope = match opts.rope_override {
        Some(r) => r,
        None => {
            let r = default_rope(RopeRule::MeanDifference { pooled_sd: stats::sd(y) })?;
            Rope::new(null_value + r.lower, null_value + r.upper)?
        }
    };
    let mean = summarize_closed_form("mean", &post.mean_marginal(), opts.ci_level, Some(rope), null_value)?;
    let variance = summarize_closed_form("variance", &post.sigma2(), opts.ci_level, None, 0.0)?;
    let prior_marginal = ClosedForm::StudentT {
        loc: prior.mean,
        scale: (prior.b / (prior.a * prior.precision)).sqrt(),
        df: prior.a,
    };
    let bayes_factor = BayesFactor::from_ln(
        prior_marginal.ln_pdf(null_value) - post.mean_marginal().ln_pdf(null_value),
        &format!("mean != {null_value} vs mean = {null_value}"),
        "in favor of a different mean",
        "in favor of the null mean",
    );
    let mean = mean.with_bayes_factor(&bayes_factor);
    Ok(OneSampleT { null_value, prior, posterior: post, mean, variance, bayes_factor, qq: qq_group("y", y) })
}

/// Two-sample comparison of normal means (unequal variances by default).
pub fn t_test_two(
    response: &str,
    factor: &str,
    groups: &[(String, Vec<f64>)],
    opts: &CompareOptions,
    streams: &mut Streams,
) -> Result<TwoSampleT> {
    ensure!(groups.len() == 2, Data, "a two-sample t test needs exactly two groups, got {}", groups.len());
    let comparison = compare_groups(response, factor, groups, opts, streams)?;
    let qq = groups.iter().map(|(l, y)| qq_group(l, y)).collect();
    Ok(TwoSampleT { comparison, qq })
}

// --------------------------------------------------------- proportions

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct BetaPrior {
    pub a: f64,
    pub b: f64,
}

impl BetaPrior {
    pub const JEFFREYS: BetaPrior = BetaPrior { a: 0.5, b: 0.5 };
    pub const UNIFORM: BetaPrior = BetaPrior { a: 1.0, b: 1.0 };

    pub fn new(a: f64, b: f64) -> Result<BetaPrior> {
        ensure!(a > 0.0 && b > 0.0, InvalidArgument, "beta prior shapes must be positive, got ({a}, {b})");
        Ok(BetaPrior { a, b })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct BinomialSample {
    pub successes: u64,
    pub trials: u64,
}

impl BinomialSample {
    fn validate(&self, label: &str) -> Result<()> {
        ensure!(self.trials > 0, Data, "{label}: number of trials must be positive");
        ensure!(self.successes <= self.trials, Data, "{label}: successes exceed trials");
        Ok(())
    }

    fn posterior(&self, prior: BetaPrior) -> ClosedForm {
        ClosedForm::Beta { a: prior.a + self.successes as f64, b: prior.b + (self.trials - self.successes) as f64 }
    }

    fn ln_evidence(&self, prior: BetaPrior) -> f64 {
        let (y, n) = (self.successes as f64, self.trials as f64);
        ln_beta(prior.a + y, prior.b + n - y) - ln_beta(prior.a, prior.b)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ProportionTest {
    pub prior: BetaPrior,
    pub samples: Vec<BinomialSample>,
    /// Closed-form posterior summary of each proportion.
    pub proportions: Vec<InferenceSummary>,
    /// Two samples only: first minus second.
    pub difference: Option<InferenceSummary>,
    /// Two samples only: odds of the first over odds of the second.
    pub odds_ratio: Option<InferenceSummary>,
    /// Two samples only: different vs common proportion.
    pub bayes_factor: Option<BayesFactor>,
    pub sample_plans: Vec<SamplePlan>,
}

/// Inference on one proportion, or a comparison of two.
pub fn prop_test(
    samples: &[BinomialSample],
    prior: BetaPrior,
    opts: &TestOptions,
    streams: &mut Streams,
) -> Result<ProportionTest> {
    ensure!(matches!(samples.len(), 1 | 2), InvalidArgument, "expected one or two samples, got {}", samples.len());
    for (i, s) in samples.iter().enumerate() {
        s.validate(&format!("sample {}", i + 1))?;
    }
    let ci = opts.ci_level;
    let proportions = samples
        .iter()
        .enumerate()
        .map(|(i, s)| summarize_closed_form(&format!("p{}", i + 1), &s.posterior(prior), ci, None, 0.5))
        .collect::<Result<Vec<_>>>()?;
    let mut out = ProportionTest {
        prior,
        samples: samples.to_vec(),
        proportions,
        difference: None,
        odds_ratio: None,
        bayes_factor: None,
        sample_plans: vec![],
    };
    if samples.len() == 2 {
        let (d1, d2) = (samples[0].posterior(prior), samples[1].posterior(prior));
        let (diff, or, plans) = compare_proportions(&d1, &d2, ("p1 - p2", "odds ratio"), opts, streams)?;
        let pooled = BinomialSample {
            successes: samples[0].successes + samples[1].successes,
            trials: samples[0].trials + samples[1].trials,
        };
        let ln_bf = samples[0].ln_evidence(prior) + samples[1].ln_evidence(prior) - pooled.ln_evidence(prior);
        let bf = BayesFactor::from_ln(
            ln_bf,
            "different proportions vs common proportion",
            "in favor of different proportions",
            "in favor of a common proportion",
        );
        out.odds_ratio = Some(or.with_bayes_factor(&bf));
        out.difference = Some(diff);
        out.bayes_factor = Some(bf);
        out.sample_plans = plans;
    }
    Ok(out)
}

type Comparison = (InferenceSummary, InferenceSummary, Vec<SamplePlan>);

fn compare_proportions(
    d1: &ClosedForm,
    d2: &ClosedForm,
    labels: (&str, &str),
    opts: &TestOptions,
    streams: &mut Streams,
) -> Result<Comparison> {
    let swap = match (d1, d2) {
        (ClosedForm::Beta { a, b }, ClosedForm::Beta { a: c, b: d }) => canonical_swap((*a, *b), (*c, *d)),
        _ => false,
    };
    let (draws, plans) = run_adaptive_sampler(
        |rng, out| {
            let (p1, p2) = draw_pair(d1, d2, swap, rng);
            out[0] = p1 - p2;
            // planned on the log scale so that swapping the samples changes nothing
            out[1] = (p1 / (1.0 - p1)).ln() - (p2 / (1.0 - p2)).ln();
            Ok(())
        },
        2,
        &[labels.0, labels.1],
        &opts.sampler,
        streams,
    )?;
    let diff = summarize_draws(labels.0, &draws.column(0), opts.ci_level, None, 0.0)?;
    let or = summarize_ratio(labels.1, &draws.column(1), opts)?;
    Ok((diff, or, plans))
}

// -------------------------------------------------------------- counts

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct GammaPrior {
    pub shape: f64,
    pub rate: f64,
}

impl GammaPrior {
    /// Gamma(1/2, 0): scale free and proper after any observation.
    pub const DEFAULT: GammaPrior = GammaPrior { shape: 0.5, rate: 0.0 };

    pub fn new(shape: f64, rate: f64) -> Result<GammaPrior> {
        ensure!(shape > 0.0 && rate >= 0.0, InvalidArgument, "gamma prior needs shape > 0 and rate >= 0");
        Ok(GammaPrior { shape, rate })
    }

    fn is_proper(&self) -> bool {
        self.rate > 0.0
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct CountSample {
    pub count: u64,
    /// Exposure (time at risk, population size, ...).
    pub offset: f64,
}

impl CountSample {
    fn posterior(&self, prior: GammaPrior) -> ClosedForm {
        ClosedForm::Gamma { shape: prior.shape + self.count as f64, rate: prior.rate + self.offset }
    }

    /// Log marginal likelihood without the `offset^y / y!` factor, which
    /// cancels in every comparison.
    fn ln_evidence(&self, prior: GammaPrior) -> f64 {
        let y = self.count as f64;
        prior.shape * prior.rate.ln() - ln_gamma(prior.shape) + ln_gamma(prior.shape + y)
            - (prior.shape + y) * (prior.rate + self.offset).ln()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct PoissonTest {
    pub prior: GammaPrior,
    pub samples: Vec<CountSample>,
    pub rates: Vec<InferenceSummary>,
    /// Two samples only: first rate over second.
    pub rate_ratio: Option<InferenceSummary>,
    /// Two samples with a proper prior only: different vs common rate.
    pub bayes_factor: Option<BayesFactor>,
    pub sample_plans: Vec<SamplePlan>,
}

/// Inference on one Poisson rate, or the ratio of two. `null_rate` sets the
/// reference for the probability of direction of a single rate.
pub fn poisson_test(
    samples: &[CountSample],
    prior: GammaPrior,
    null_rate: Option<f64>,
    opts: &TestOptions,
    streams: &mut Streams,
) -> Result<PoissonTest> {
    ensure!(matches!(samples.len(), 1 | 2), InvalidArgument, "expected one or two samples, got {}", samples.len());
    for (i, s) in samples.iter().enumerate() {
        ensure!(s.offset > 0.0 && s.offset.is_finite(), Data, "sample {}: offset must be positive", i + 1);
    }
    let rates = samples
        .iter()
        .enumerate()
        .map(|(i, s)| {
            summarize_closed_form(&format!("rate{}", i + 1), &s.posterior(prior), opts.ci_level, None, null_rate.unwrap_or(0.0))
        })
        .collect::<Result<Vec<_>>>()?;
    let mut out = PoissonTest { prior, samples: samples.to_vec(), rates, rate_ratio: None, bayes_factor: None, sample_plans: vec![] };
    if samples.len() == 2 {
        let (d1, d2) = (samples[0].posterior(prior), samples[1].posterior(prior));
        let key = |s: &CountSample| (s.count as f64, s.offset);
        let swap = canonical_swap(key(&samples[0]), key(&samples[1]));
        let (draws, plans) = run_adaptive_sampler(
            |rng, out| {
                let (l1, l2) = draw_pair(&d1, &d2, swap, rng);
                out[0] = l1.ln() - l2.ln();
                Ok(())
            },
            1,
            &["rate ratio"],
            &opts.sampler,
            streams,
        )?;
        let mut ratio = summarize_ratio("rate ratio", &draws.column(0), opts)?;
        if prior.is_proper() {
            let pooled = CountSample { count: samples[0].count + samples[1].count, offset: samples[0].offset + samples[1].offset };
            let bf = BayesFactor::from_ln(
                samples[0].ln_evidence(prior) + samples[1].ln_evidence(prior) - pooled.ln_evidence(prior),
                "different rates vs common rate",
                "in favor of different rates",
                "in favor of a common rate",
            );
            ratio = ratio.with_bayes_factor(&bf);
            out.bayes_factor = Some(bf);
        }
        out.rate_ratio = Some(ratio);
        out.sample_plans = plans;
    }
    Ok(out)
}

// ------------------------------------------------------------ sign test

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SignTest {
    pub prior: BetaPrior,
    pub positive: usize,
    pub negative: usize,
    pub zeros_dropped: usize,
    /// Posterior of Pr(difference > 0).
    pub prob_positive: InferenceSummary,
    pub bayes_factor: BayesFactor,
}

pub fn sign_test(differences: &[f64], prior: BetaPrior, opts: &TestOptions) -> Result<SignTest> {
    ensure!(differences.iter().all(|d| !d.is_nan()), Data, "differences contain NaN");
    let positive = differences.iter().filter(|&&d| d > 0.0).count();
    let negative = differences.iter().filter(|&&d| d < 0.0).count();
    let zeros_dropped = differences.len() - positive - negative;
    ensure!(positive + negative > 0, Data, "all differences are zero");
    let post = ClosedForm::Beta { a: prior.a + positive as f64, b: prior.b + negative as f64 };
    let rope = opts.rope_override.unwrap_or(Rope { lower: 0.45, upper: 0.55 });
    let pri = ClosedForm::Beta { a: prior.a, b: prior.b };
    let bayes_factor = BayesFactor::from_ln(
        pri.ln_pdf(0.5) - post.ln_pdf(0.5),
        "Pr(positive) != 0.5 vs Pr(positive) = 0.5",
        "in favor of a systematic difference",
        "in favor of no systematic difference",
    );
    let prob_positive =
        summarize_closed_form("Pr(positive)", &post, opts.ci_level, Some(rope), 0.5)?.with_bayes_factor(&bayes_factor);
    Ok(SignTest { prior, positive, negative, zeros_dropped, prob_positive, bayes_factor })
}

// ------------------------------------------------- contingency tables

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ChisqTest {
    /// Sampling scheme behind the marginal likelihoods.
    pub scheme: String,
    pub table: Vec<Vec<u64>>,
    /// Independence vs saturated association model.
    pub bayes_factor: BayesFactor,
    /// Posterior of each cell probability, row-major.
    pub cells: Vec<InferenceSummary>,
}

fn ln_dirichlet_multinomial(counts: &[f64]) -> f64 {
    let k = counts.len() as f64;
    let n: f64 = counts.iter().sum();
    ln_gamma(k) - ln_gamma(n + k) + counts.iter().map(|c| ln_gamma(c + 1.0)).sum::<f64>()
}

/// Independence in an r x c table under joint multinomial sampling with
/// uniform Dirichlet priors on the cells and on both margins.
pub fn chisq_test(table: &[Vec<u64>], opts: &TestOptions) -> Result<ChisqTest> {
    let r = table.len();
    ensure!(r >= 2, Data, "table needs at least two rows");
    let c = table[0].len();
    ensure!(c >= 2, Data, "table needs at least two columns");
    ensure!(table.iter().all(|row| row.len() == c), Data, "table rows have different lengths");
    let cells: Vec<f64> = table.iter().flatten().map(|&v| v as f64).collect();
    let total: f64 = cells.iter().sum();
    ensure!(total > 0.0, Data, "table is empty");
    let rows: Vec<f64> = table.iter().map(|row| row.iter().sum::<u64>() as f64).collect();
    let cols: Vec<f64> = (0..c).map(|j| table.iter().map(|row| row[j]).sum::<u64>() as f64).collect();
    let ln_bf = ln_dirichlet_multinomial(&rows) + ln_dirichlet_multinomial(&cols) - ln_dirichlet_multinomial(&cells);
    let bayes_factor = BayesFactor::from_ln(
        ln_bf,
        "independence vs association",
        "in favor of independence",
        "in favor of association",
    );
    let k = cells.len() as f64;
    let summaries = cells
        .iter()
        .enumerate()
        .map(|(idx, &n)| {
            let d = ClosedForm::Beta { a: n + 1.0, b: total + k - n - 1.0 };
            summarize_closed_form(&format!("p[{},{}]", idx / c + 1, idx % c + 1), &d, opts.ci_level, None, 0.0)
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(ChisqTest {
        scheme: "joint multinomial, Dirichlet(1) priors".into(),
        table: table.to_vec(),
        bayes_factor,
        cells: summaries,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CaseControl {
    pub prior: BetaPrior,
    /// Exposure among cases and among controls.
    pub cases: BinomialSample,
    pub controls: BinomialSample,
    pub exposure_cases: InferenceSummary,
    pub exposure_controls: InferenceSummary,
    pub odds_ratio: InferenceSummary,
    pub sample_plans: Vec<SamplePlan>,
}

/// Exposure odds ratio, cases over controls.
pub fn case_control(
    cases: BinomialSample,
    controls: BinomialSample,
    prior: BetaPrior,
    opts: &TestOptions,
    streams: &mut Streams,
) -> Result<CaseControl> {
    cases.validate("cases")?;
    controls.validate("controls")?;
    let (d1, d2) = (cases.posterior(prior), controls.posterior(prior));
    let exposure_cases = summarize_closed_form("exposure among cases", &d1, opts.ci_level, None, 0.5)?;
    let exposure_controls = summarize_closed_form("exposure among controls", &d2, opts.ci_level, None, 0.5)?;
    let (_, odds_ratio, sample_plans) = compare_proportions(&d1, &d2, ("exposure difference", "odds ratio"), opts, streams)?;
    Ok(CaseControl { prior, cases, controls, exposure_cases, exposure_controls, odds_ratio, sample_plans })
}
