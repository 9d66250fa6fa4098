//! Monte Carlo sample-size planning for accurate interval estimates.
//!
//! Posterior quantiles estimated from `L` iid draws have asymptotic standard
//! error `sqrt(p (1 - p) / L) / density(quantile)`, which is usually much
//! larger than the standard error of the posterior mean. The planner draws a
//! pilot sample, estimates the density at both credible-interval endpoints and
//! sizes the run so that every monitored endpoint (and the mean) is within
//! `epsilon` of its true value with probability `s`.

use rayon::prelude::*;
use serde::Serialize;

use crate::error::{ensure, Error, Result};
use crate::rng::{Rng, StreamId, Streams};
use crate::special::{norm_pdf, z_two_sided};
use crate::stats;

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
#[serde(tag = "kind", content = "value", rename_all = "snake_case")]
pub enum Tolerance {
    /// Margin of error in the estimand's units.
    Absolute(f64),
    /// Margin of error as a fraction of the pilot posterior SD.
    SdFraction(f64),
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct PrecisionTarget {
    pub epsilon: Tolerance,
    /// Probability that the Monte Carlo error stays within `epsilon`.
    pub s: f64,
    pub ci_level: f64,
}

impl Default for PrecisionTarget {
    fn default() -> Self {
        PrecisionTarget { epsilon: Tolerance::SdFraction(0.02), s: 0.95, ci_level: 0.95 }
    }
}

impl PrecisionTarget {
    pub fn absolute(epsilon: f64, s: f64, ci_level: f64) -> Self {
        PrecisionTarget { epsilon: Tolerance::Absolute(epsilon), s, ci_level }
    }

    pub fn validate(&self) -> Result<()> {
        let eps = match self.epsilon {
            Tolerance::Absolute(e) | Tolerance::SdFraction(e) => e,
        };
        ensure!(eps > 0.0 && eps.is_finite(), InvalidArgument, "epsilon must be positive, got {eps}");
        ensure!(self.s > 0.0 && self.s < 1.0, InvalidArgument, "s must lie in (0, 1), got {}", self.s);
        ensure!(self.ci_level > 0.0 && self.ci_level < 1.0, InvalidArgument, "ci_level must lie in (0, 1), got {}", self.ci_level);
        Ok(())
    }

    pub fn alpha_half(&self) -> f64 {
        (1.0 - self.ci_level) / 2.0
    }

    fn resolve(&self, pilot_sd: f64) -> f64 {
        match self.epsilon {
            Tolerance::Absolute(e) => e,
            Tolerance::SdFraction(f) => f * pilot_sd,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SamplePlan {
    pub label: String,
    /// Draws the plan was estimated from.
    pub pilot_size: usize,
    pub epsilon: f64,
    pub s: f64,
    pub ci_level: f64,
    pub density_at_lower: f64,
    pub density_at_upper: f64,
    pub l_lower: u64,
    pub l_upper: u64,
    pub m: u64,
    pub total_draws: u64,
    /// The pilot draws had no spread; no planning was possible or needed.
    pub degenerate: bool,
}

/// Draws needed so the empirical `alpha_half` quantile lies within
/// `epsilon` of the truth with probability `s`.
pub fn quantile_sample_size(alpha_half: f64, s: f64, epsilon: f64, density: f64) -> Result<u64> {
    ensure!(alpha_half > 0.0 && alpha_half < 0.5, InvalidArgument, "tail probability must lie in (0, 0.5), got {alpha_half}");
    ensure!(s > 0.0 && s < 1.0, InvalidArgument, "s must lie in (0, 1), got {s}");
    ensure!(epsilon > 0.0, InvalidArgument, "epsilon must be positive, got {epsilon}");
    if !(density > 0.0) || !density.is_finite() {
        return Err(Error::Numerical(format!(
            "estimated density at the quantile is {density}; draw a larger pilot sample"
        )));
    }
    let z = z_two_sided(s);
    Ok((alpha_half * (1.0 - alpha_half) * (z / (epsilon * density)).powi(2)).ceil() as u64)
}

/// Draws needed so the Monte Carlo mean lies within `epsilon` of the posterior
/// mean with probability `s`.
pub fn mean_sample_size(variance: f64, s: f64, epsilon: f64) -> Result<u64> {
    ensure!(variance > 0.0 && variance.is_finite(), InvalidArgument, "variance must be positive, got {variance}");
    ensure!(s > 0.0 && s < 1.0, InvalidArgument, "s must lie in (0, 1), got {s}");
    ensure!(epsilon > 0.0, InvalidArgument, "epsilon must be positive, got {epsilon}");
    Ok((variance * (z_two_sided(s) / epsilon).powi(2)).ceil() as u64)
}

/// Ratio of draws needed for the lower interval endpoint versus the mean.
pub fn sample_size_ratio(alpha: f64, variance: f64, density_at_quantile: f64) -> f64 {
    let h = alpha / 2.0;
    h * (1.0 - h) / (variance * density_at_quantile * density_at_quantile)
}

/// Gaussian-kernel density estimate (Silverman bandwidth) at the empirical
/// type-7 `p`-quantile of `draws`.
pub fn estimate_density_at_quantile(draws: &[f64], p: f64) -> Result<f64> {
    ensure!(draws.len() >= 100, InvalidArgument, "need at least 100 pilot draws, got {}", draws.len());
    ensure!(draws.iter().all(|x| x.is_finite()), Numerical, "pilot draws contain non-finite values");
    let sorted = stats::sorted(draws);
    density_at_quantile_sorted(&sorted, p)
}

fn density_at_quantile_sorted(sorted: &[f64], p: f64) -> Result<f64> {
    let n = sorted.len() as f64;
    let at = stats::quantile_sorted(sorted, p);
    let sd = stats::sd(sorted);
    let iqr = stats::quantile_sorted(sorted, 0.75) - stats::quantile_sorted(sorted, 0.25);
    let spread = if iqr > 0.0 { sd.min(iqr / 1.349) } else { sd };
    let h = 0.9 * spread * n.powf(-0.2);
    if !(h > 0.0) {
        return Err(Error::Numerical("zero kernel bandwidth: all pilot draws are identical".into()));
    }
    let dens = sorted.iter().map(|x| norm_pdf((at - x) / h)).sum::<f64>() / (n * h);
    Ok(dens)
}

/// Plans one estimand from its pilot draws.
pub fn plan_from_pilot(label: &str, pilot: &[f64], target: &PrecisionTarget) -> Result<SamplePlan> {
    plan_with_floor(label, pilot, target, pilot.len())
}

/// As `plan_from_pilot`, but never asking for fewer than `floor` draws.
fn plan_with_floor(label: &str, pilot: &[f64], target: &PrecisionTarget, floor: usize) -> Result<SamplePlan> {
    target.validate()?;
    ensure!(pilot.iter().all(|x| x.is_finite()), Numerical, "non-finite draws for '{label}'");
    let sorted = stats::sorted(pilot);
    let sd = stats::sd(&sorted);
    let n = pilot.len();
    let eps = target.resolve(sd);
    let mut plan = SamplePlan {
        label: label.to_string(),
        pilot_size: n,
        epsilon: eps,
        s: target.s,
        ci_level: target.ci_level,
        density_at_lower: f64::NAN,
        density_at_upper: f64::NAN,
        l_lower: 0,
        l_upper: 0,
        m: 0,
        total_draws: floor as u64,
        degenerate: false,
    };
    if !(sd > 0.0) || !(eps > 0.0) {
        plan.degenerate = true;
        return Ok(plan);
    }
    let ah = target.alpha_half();
    plan.density_at_lower = density_at_quantile_sorted(&sorted, ah)?;
    plan.density_at_upper = density_at_quantile_sorted(&sorted, 1.0 - ah)?;
    plan.l_lower = quantile_sample_size(ah, target.s, eps, plan.density_at_lower)?;
    plan.l_upper = quantile_sample_size(ah, target.s, eps, plan.density_at_upper)?;
    plan.m = mean_sample_size(sd * sd, target.s, eps)?;
    plan.total_draws = (floor as u64).max(plan.l_lower).max(plan.l_upper).max(plan.m);
    Ok(plan)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct SamplerConfig {
    pub target: PrecisionTarget,
    pub pilot_size: usize,
    pub hard_cap: u64,
    pub batch_size: usize,
}

impl Default for SamplerConfig {
    fn default() -> Self {
        SamplerConfig { target: PrecisionTarget::default(), pilot_size: 500, hard_cap: 10_000_000, batch_size: 250 }
    }
}

impl SamplerConfig {
    pub fn with_target(target: PrecisionTarget) -> Self {
        SamplerConfig { target, ..Default::default() }
    }
}

/// Row-major matrix of draws: one row per iid draw.
#[derive(Debug, Clone, PartialEq)]
pub struct DrawMatrix {
    width: usize,
    data: Vec<f64>,
}

impl DrawMatrix {
    pub fn new(width: usize, data: Vec<f64>) -> Self {
        assert!(width > 0 && data.len().is_multiple_of(width));
        DrawMatrix { width, data }
    }

    pub fn rows(&self) -> usize {
        self.data.len() / self.width
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn row(&self, i: usize) -> &[f64] {
        &self.data[i * self.width..(i + 1) * self.width]
    }

    pub fn column(&self, j: usize) -> Vec<f64> {
        self.data.iter().skip(j).step_by(self.width).copied().collect()
    }

    pub fn iter_rows(&self) -> impl Iterator<Item = &[f64]> {
        self.data.chunks_exact(self.width)
    }
}

/// Re-planning rounds after the pilot plan has been drawn.
const MAX_REFINEMENTS: usize = 3;

/// Draws iid samples until every monitored estimand meets its precision plan.
///
/// `draw_fn` fills one row of `width` values; the first `labels.len()`
/// entries are the monitored estimands, any remaining entries are carried
/// along unplanned. Batches are generated in parallel, each on its own
/// deterministic substream, so the output depends only on the seed.
pub fn run_adaptive_sampler<F>(
    draw_fn: F,
    width: usize,
    labels: &[&str],
    config: &SamplerConfig,
    streams: &mut Streams,
) -> Result<(DrawMatrix, Vec<SamplePlan>)>
where
    F: Fn(&mut Rng, &mut [f64]) -> Result<()> + Sync,
{
    config.target.validate()?;
    ensure!(labels.len() <= width && width > 0, InvalidArgument, "monitored estimands exceed draw width");
    ensure!(config.pilot_size >= 100, InvalidArgument, "pilot size must be at least 100");
    let stream = streams.reserve();
    let batch = config.batch_size.max(1);
    let gen_batches = |range: std::ops::Range<usize>| generate(&draw_fn, stream, range, batch, width);

    let pilot_batches = config.pilot_size.div_ceil(batch);
    let mut data = gen_batches(0..pilot_batches)?;
    let pilot = DrawMatrix::new(width, data[..config.pilot_size * width].to_vec());

    let plan_all = |m: &DrawMatrix| {
        labels
            .iter()
            .enumerate()
            .map(|(j, label)| plan_with_floor(label, &m.column(j), &config.target, config.pilot_size))
            .collect::<Result<Vec<_>>>()
    };
    let needed = |plans: &[SamplePlan]| -> Result<usize> {
        let total = plans.iter().map(|p| p.total_draws).max().unwrap_or(config.pilot_size as u64);
        if total > config.hard_cap {
            return Err(Error::Numerical(format!(
                "precision plan needs {total} draws, above the cap of {}; use a larger epsilon",
                config.hard_cap
            )));
        }
        Ok(total as usize)
    };
    let mut plans = plan_all(&pilot)?;
    let mut total = needed(&plans)?;
    let mut have_batches = pilot_batches;
    // a pilot-based density is biased upward in the tails, so re-plan from
    // every draw made so far and top up until the plan is met
    for round in 0..=MAX_REFINEMENTS {
        let want_batches = total.div_ceil(batch);
        if want_batches > have_batches {
            data.extend(gen_batches(have_batches..want_batches)?);
            have_batches = want_batches;
        }
        if round == MAX_REFINEMENTS || total == config.pilot_size {
            break;
        }
        let revised = plan_all(&DrawMatrix::new(width, data[..total * width].to_vec()))?;
        let revised_total = needed(&revised)?;
        plans = revised;
        if revised_total <= total {
            break;
        }
        total = revised_total;
    }
    data.truncate(total * width);
    Ok((DrawMatrix::new(width, data), plans))
}

fn generate<F>(draw_fn: &F, stream: StreamId, range: std::ops::Range<usize>, batch: usize, width: usize) -> Result<Vec<f64>>
where
    F: Fn(&mut Rng, &mut [f64]) -> Result<()> + Sync,
{
    let chunks: Vec<Result<Vec<f64>>> = range
        .into_par_iter()
        .map(|b| {
            let mut rng = stream.batch(b as u64);
            let mut out = vec![0.0; batch * width];
            for row in out.chunks_exact_mut(width) {
                draw_fn(&mut rng, row)?;
            }
            Ok(out)
        })
        .collect();
    let mut data = Vec::new();
    for c in chunks {
        data.extend(c?);
    }
    Ok(data)
}

/// Draws exactly `n` rows, batched in parallel on deterministic substreams.
pub fn draw_fixed<F>(draw_fn: F, width: usize, n: usize, streams: &mut Streams) -> Result<DrawMatrix>
where
    F: Fn(&mut Rng, &mut [f64]) -> Result<()> + Sync,
{
    ensure!(width > 0, InvalidArgument, "draw width must be positive");
    let batch = SamplerConfig::default().batch_size;
    let stream = streams.reserve();
    let mut data = generate(&draw_fn, stream, 0..n.div_ceil(batch), batch, width)?;
    data.truncate(n * width);
    Ok(DrawMatrix::new(width, data))
}

/// Sizes a run for the mean of a bounded quantity such as a tail probability.
pub fn proportion_sample_size(p_hat: f64, s: f64, epsilon: f64, pilot: usize) -> Result<usize> {
    let v = (p_hat * (1.0 - p_hat)).max(1e-4);
    Ok((mean_sample_size(v, s, epsilon)? as usize).max(pilot))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dist::sample_normal;
    use crate::special::norm_ppf;
    use rand::Rng as _;

    fn phi_at(p: f64) -> f64 {
        norm_pdf(norm_ppf(p))
    }

    #[test]
    fn quantile_sample_size_examples() {
        assert_eq!(quantile_sample_size(0.025, 0.95, 0.1, 0.058440).unwrap(), 2742);
        assert_eq!(quantile_sample_size(0.025, 0.95, 0.1, phi_at(0.025)).unwrap(), 2742);
        let l1 = 0.025 * 0.975 * (z_two_sided(0.95) / (0.1 * 0.058440)).powi(2);
        let l2 = 0.025 * 0.975 * (z_two_sided(0.95) / (0.2 * 0.058440)).powi(2);
        assert!((l1 / l2 - 4.0).abs() < 1e-12);
        assert_eq!(quantile_sample_size(0.005, 0.95, 0.1, 0.014460).unwrap(), 9141);
        assert!(quantile_sample_size(0.025, 0.95, 0.1, 0.0).is_err());
    }

    #[test]
    fn mean_sample_size_examples() {
        assert_eq!(mean_sample_size(1.0, 0.95, 0.1).unwrap(), 385);
        assert_eq!(mean_sample_size(4.0, 0.95, 0.1).unwrap(), 1537);
        assert_eq!(mean_sample_size(1.0, 0.95, 0.01).unwrap(), 38415);
    }

    #[test]
    fn ratio_examples() {
        let r95 = sample_size_ratio(0.05, 1.0, phi_at(0.025));
        assert!((r95 - 7.136).abs() < 0.001, "{r95}");
        let r99 = sample_size_ratio(0.01, 1.0, phi_at(0.005));
        assert!((r99 - 23.79).abs() < 0.01, "{r99}");
    }

    #[test]
    fn ratio_consistent_with_sizes() {
        for (alpha, v, d) in [(0.05, 1.0, 0.0584), (0.1, 2.5, 0.03), (0.01, 0.3, 0.2)] {
            for (s, eps) in [(0.95, 0.1), (0.9, 0.01), (0.99, 0.05)] {
                let z = z_two_sided(s);
                let m_raw = v * (z / eps).powi(2);
                let l_raw = (alpha / 2.0) * (1.0 - alpha / 2.0) * (z / (eps * d)).powi(2);
                assert!((sample_size_ratio(alpha, v, d) * m_raw - l_raw).abs() < 1e-6 * l_raw);
                let l = quantile_sample_size(alpha / 2.0, s, eps, d).unwrap() as f64;
                assert!((l - l_raw).abs() <= 1.0);
            }
        }
    }

    #[test]
    fn monotonicity() {
        let l = |s: f64, e: f64, d: f64| quantile_sample_size(0.025, s, e, d).unwrap();
        assert!(l(0.95, 0.05, 0.05) > l(0.95, 0.1, 0.05));
        assert!(l(0.99, 0.1, 0.05) > l(0.95, 0.1, 0.05));
        assert!(l(0.95, 0.1, 0.02) > l(0.95, 0.1, 0.05));
    }

    #[test]
    fn kde_normal_and_uniform() {
        let mut rng = Streams::new(11).rng();
        let z: Vec<f64> = (0..100_000).map(|_| sample_normal(&mut rng)).collect();
        let d = estimate_density_at_quantile(&z, 0.025).unwrap();
        assert!((d - 0.0584).abs() < 0.005, "{d}");
        let u: Vec<f64> = (0..100_000).map(|_| rng.gen::<f64>()).collect();
        let d = estimate_density_at_quantile(&u, 0.5).unwrap();
        assert!((d - 1.0).abs() < 0.05, "{d}");
        assert!(estimate_density_at_quantile(&[1.0; 200], 0.5).is_err());
        assert!(estimate_density_at_quantile(&[1.0; 20], 0.5).is_err());
    }

    fn normal_draw(rng: &mut Rng, out: &mut [f64]) -> Result<()> {
        out[0] = sample_normal(rng);
        Ok(())
    }

    #[test]
    fn sampler_normal_posterior() {
        let cfg = SamplerConfig::with_target(PrecisionTarget::absolute(0.1, 0.95, 0.95));
        let (draws, plans) = run_adaptive_sampler(normal_draw, 1, &["z"], &cfg, &mut Streams::new(3)).unwrap();
        assert!((1200..4500).contains(&draws.rows()), "{:?}", plans);
        assert!(plans[0].total_draws as usize <= draws.rows());
        assert!(plans[0].l_lower > plans[0].m);
    }

    #[test]
    fn sampler_large_epsilon_uses_pilot() {
        let cfg = SamplerConfig::with_target(PrecisionTarget::absolute(1000.0, 0.95, 0.95));
        let (draws, _) = run_adaptive_sampler(normal_draw, 1, &["z"], &cfg, &mut Streams::new(3)).unwrap();
        assert_eq!(draws.rows(), 500);
    }

    #[test]
    fn sampler_takes_max_over_estimands() {
        let cfg = SamplerConfig::with_target(PrecisionTarget::absolute(0.1, 0.95, 0.95));
        let two = |rng: &mut Rng, out: &mut [f64]| {
            out[0] = sample_normal(rng);
            out[1] = 3.0 * sample_normal(rng);
            Ok(())
        };
        let (draws, plans) = run_adaptive_sampler(two, 2, &["a", "b"], &cfg, &mut Streams::new(5)).unwrap();
        let max = plans.iter().map(|p| p.total_draws).max().unwrap() as usize;
        assert!(draws.rows() >= max);
        assert!(plans[1].total_draws > plans[0].total_draws);
    }

    #[test]
    fn sampler_is_deterministic_and_pilot_stable() {
        let cfg = SamplerConfig::with_target(PrecisionTarget::absolute(0.1, 0.95, 0.95));
        let a = run_adaptive_sampler(normal_draw, 1, &["z"], &cfg, &mut Streams::new(9)).unwrap().0;
        let b = run_adaptive_sampler(normal_draw, 1, &["z"], &cfg, &mut Streams::new(9)).unwrap().0;
        assert_eq!(a, b);
        let big = SamplerConfig::with_target(PrecisionTarget::absolute(1000.0, 0.95, 0.95));
        let c = run_adaptive_sampler(normal_draw, 1, &["z"], &big, &mut Streams::new(9)).unwrap().0;
        assert_eq!(c.column(0)[..], a.column(0)[..500]);
    }

    #[test]
    fn sampler_hard_cap() {
        let cfg = SamplerConfig {
            hard_cap: 1000,
            ..SamplerConfig::with_target(PrecisionTarget::absolute(0.01, 0.95, 0.95))
        };
        let err = run_adaptive_sampler(normal_draw, 1, &["z"], &cfg, &mut Streams::new(1)).unwrap_err();
        assert!(err.to_string().contains("larger epsilon"));
    }

    #[test]
    fn sampler_propagates_draw_errors() {
        let cfg = SamplerConfig::default();
        let bad = |_: &mut Rng, _: &mut [f64]| Err(Error::Numerical("boom".into()));
        assert!(run_adaptive_sampler(bad, 1, &["z"], &cfg, &mut Streams::new(1)).is_err());
    }

    #[test]
    fn coverage_property() {
        let cfg = SamplerConfig::with_target(PrecisionTarget::absolute(0.1, 0.95, 0.95));
        let truth = norm_ppf(0.025);
        let mut streams = Streams::new(2024);
        let reps = 500;
        let hits = (0..reps)
            .filter(|_| {
                let (d, _) = run_adaptive_sampler(normal_draw, 1, &["z"], &cfg, &mut streams).unwrap();
                (stats::quantile(&d.column(0), 0.025) - truth).abs() < 0.1
            })
            .count();
        assert!(hits as f64 / reps as f64 >= 0.95 - 0.03, "coverage {hits}/{reps}");
    }
}
