//! Piecewise-exponential survival with conjugate gamma hazards.

use serde::Serialize;

use crate::design::{DesignResponse, DesignSpec, TermKind, Value};
use crate::dist::ClosedForm;
use crate::error::{ensure, Error, Result};
use crate::mc_plan::{run_adaptive_sampler, SamplePlan, SamplerConfig};
use crate::rng::Streams;
use crate::special::ln_gamma;
use crate::stats;
use crate::summary::{summarize_closed_form, BayesFactor, InferenceSummary};

pub const DEFAULT_MAX_INTERVALS: usize = 10;
pub const DEFAULT_CURVE_POINTS: usize = 50;
/// One event's worth of prior information per interval.
pub const DEFAULT_PRIOR_SHAPE: f64 = 1.0;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SurvivalOptions {
    /// Largest number of hazard intervals considered.
    pub max_intervals: usize,
    /// Use exactly this many intervals instead of selecting.
    pub intervals: Option<usize>,
    /// Prior shape of every interval hazard; the rate is set so the prior
    /// mean equals the overall event rate.
    pub prior_shape: f64,
    pub ci_level: f64,
    pub curve_points: usize,
    pub sampler: SamplerConfig,
}

impl Default for SurvivalOptions {
    fn default() -> Self {
        SurvivalOptions {
            max_intervals: DEFAULT_MAX_INTERVALS,
            intervals: None,
            prior_shape: DEFAULT_PRIOR_SHAPE,
            ci_level: 0.95,
            curve_points: DEFAULT_CURVE_POINTS,
            sampler: SamplerConfig::default(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Interval {
    pub start: f64,
    /// `None` for the open-ended last interval.
    pub end: Option<f64>,
    pub events: usize,
    pub exposure: f64,
    pub prior_shape: f64,
    pub prior_rate: f64,
}

impl Interval {
    pub fn posterior(&self) -> ClosedForm {
        ClosedForm::Gamma { shape: self.prior_shape + self.events as f64, rate: self.prior_rate + self.exposure }
    }

    /// Closed-form log marginal likelihood of the interval's data.
    pub fn log_marginal_likelihood(&self) -> f64 {
        let (a, b, d) = (self.prior_shape, self.prior_rate, self.events as f64);
        a * b.ln() - ln_gamma(a) + ln_gamma(a + d) - (a + d) * (b + self.exposure).ln()
    }

    fn overlap(&self, t: f64) -> f64 {
        let end = self.end.unwrap_or(f64::INFINITY);
        (t.min(end) - self.start).max(0.0)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct GroupHazards {
    pub label: String,
    pub n: usize,
    pub events: usize,
    pub intervals: Vec<Interval>,
    pub log_marginal_likelihood: f64,
    pub hazards: Vec<InferenceSummary>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct KnotCandidate {
    pub intervals: usize,
    pub log_marginal_likelihood: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SurvivalFit {
    /// Formula text, used to name the model in Bayes factors.
    pub model: String,
    pub grouping: Option<String>,
    /// Interior knots.
    pub knots: Vec<f64>,
    pub candidates: Vec<KnotCandidate>,
    pub groups: Vec<GroupHazards>,
    pub log_marginal_likelihood: f64,
    pub n: usize,
    pub total_time: f64,
    pub total_events: usize,
    pub max_time: f64,
}

/// Interior knots at event-time quantiles, deduplicated.
pub fn quantile_knots(event_times: &[f64], intervals: usize) -> Vec<f64> {
    if intervals <= 1 || event_times.is_empty() {
        return vec![];
    }
    let sorted = stats::sorted(event_times);
    let mut knots: Vec<f64> = (1..intervals)
        .map(|j| stats::quantile_sorted(&sorted, j as f64 / intervals as f64))
        .filter(|&k| k > 0.0)
        .collect();
    knots.dedup();
    knots
}

/// Events and exposure per interval for one group.
pub fn tabulate(time: &[f64], event: &[bool], knots: &[f64], prior: (f64, f64)) -> Vec<Interval> {
    let mut bounds = vec![0.0];
    bounds.extend_from_slice(knots);
    let mut out: Vec<Interval> = bounds
        .iter()
        .enumerate()
        .map(|(k, &start)| Interval {
            start,
            end: bounds.get(k + 1).copied(),
            events: 0,
            exposure: 0.0,
            prior_shape: prior.0,
            prior_rate: prior.1,
        })
        .collect();
    for (&t, &e) in time.iter().zip(event) {
        for iv in out.iter_mut() {
            iv.exposure += iv.overlap(t);
            let inside = t > iv.start && iv.end.is_none_or(|end| t <= end);
            if e && inside {
                iv.events += 1;
            }
        }
    }
    out
}

struct GroupData {
    label: String,
    time: Vec<f64>,
    event: Vec<bool>,
}

fn split_groups(design: &DesignSpec) -> Result<(Option<String>, Vec<GroupData>)> {
    let DesignResponse::Survival { time, event } = &design.response else {
        return Err(Error::Formula("survival models need a Surv(time, event) response".into()));
    };
    ensure!(time.iter().all(|&t| t > 0.0 && t.is_finite()), Data, "survival times must be positive");
    match design.terms.len() {
        0 => Ok((None, vec![GroupData { label: "all".into(), time: time.clone(), event: event.clone() }])),
        1 => {
            let term = &design.terms[0];
            let TermKind::Factor { levels } = &term.kind else {
                return Err(Error::Design(format!("grouping variable '{}' must be categorical", term.name)));
            };
            let mut groups: Vec<GroupData> =
                levels.iter().map(|l| GroupData { label: l.clone(), time: vec![], event: vec![] }).collect();
            for (i, row) in design.raw.iter().enumerate() {
                if let Value::Level(l) = &row[0] {
                    let g = groups.iter_mut().find(|g| &g.label == l).expect("level from design");
                    g.time.push(time[i]);
                    g.event.push(event[i]);
                }
            }
            Ok((Some(term.name.clone()), groups))
        }
        _ => Err(Error::Design("survival models take at most one grouping factor".into())),
    }
}

fn fit_groups(groups: &[GroupData], knots: &[f64], prior: (f64, f64), ci: f64) -> Result<Vec<GroupHazards>> {
    groups
        .iter()
        .map(|g| {
            let intervals = tabulate(&g.time, &g.event, knots, prior);
            let hazards = intervals
                .iter()
                .enumerate()
                .map(|(k, iv)| summarize_closed_form(&format!("hazard {} [{}]", g.label, k + 1), &iv.posterior(), ci, None, 0.0))
                .collect::<Result<Vec<_>>>()?;
            Ok(GroupHazards {
                label: g.label.clone(),
                n: g.time.len(),
                events: g.event.iter().filter(|&&e| e).count(),
                log_marginal_likelihood: intervals.iter().map(Interval::log_marginal_likelihood).sum(),
                intervals,
                hazards,
            })
        })
        .collect()
}

pub fn fit_survival(design: &DesignSpec, opts: &SurvivalOptions) -> Result<SurvivalFit> {
    ensure!(opts.prior_shape > 0.0, InvalidArgument, "prior shape must be positive");
    ensure!(opts.max_intervals >= 1, InvalidArgument, "need at least one interval");
    let (grouping, groups) = split_groups(design)?;
    for g in &groups {
        ensure!(g.event.iter().any(|&e| e), Data, "group '{}' has no events", g.label);
    }
    let all_times: Vec<f64> = groups.iter().flat_map(|g| g.time.iter().copied()).collect();
    let event_times: Vec<f64> =
        groups.iter().flat_map(|g| g.time.iter().zip(&g.event).filter(|(_, &e)| e).map(|(&t, _)| t)).collect();
    let total_time: f64 = all_times.iter().sum();
    let total_events = event_times.len();
    let rate = total_events as f64 / total_time;
    let prior = (opts.prior_shape, opts.prior_shape / rate);

    let candidates: Vec<usize> = match opts.intervals {
        Some(k) => vec![k.max(1)],
        None => (1..=opts.max_intervals).collect(),
    };
    let mut scored = Vec::new();
    for &k in &candidates {
        let knots = quantile_knots(&event_times, k);
        let fits = fit_groups(&groups, &knots, prior, opts.ci_level)?;
        let lml: f64 = fits.iter().map(|g| g.log_marginal_likelihood).sum();
        scored.push((KnotCandidate { intervals: knots.len() + 1, log_marginal_likelihood: lml }, knots, fits));
    }
    let best = scored
        .iter()
        .enumerate()
        .max_by(|a, b| a.1 .0.log_marginal_likelihood.total_cmp(&b.1 .0.log_marginal_likelihood))
        .map(|(i, _)| i)
        .expect("at least one candidate");
    let candidates_out = scored.iter().map(|s| s.0.clone()).collect();
    let (chosen, knots, fits) = scored.swap_remove(best);
    Ok(SurvivalFit {
        model: design.formula.to_string(),
        grouping,
        knots,
        candidates: candidates_out,
        log_marginal_likelihood: chosen.log_marginal_likelihood,
        groups: fits,
        n: all_times.len(),
        total_time,
        total_events,
        max_time: all_times.iter().copied().fold(0.0, f64::max),
    })
}

/// Evidence for `a` over `b`; both must be fitted to the same observations.
pub fn survival_bayes_factor(a: &SurvivalFit, b: &SurvivalFit) -> Result<BayesFactor> {
    ensure!(
        a.n == b.n && a.total_events == b.total_events && (a.total_time - b.total_time).abs() <= 1e-9 * a.total_time,
        InvalidArgument,
        "models were fitted to different data"
    );
    let describe = |f: &SurvivalFit| match &f.grouping {
        Some(g) => format!("separate survival curves by {g}"),
        None => "one survival curve for all".to_string(),
    };
    let (da, db) = (describe(a), describe(b));
    Ok(BayesFactor::from_ln(
        a.log_marginal_likelihood - b.log_marginal_likelihood,
        &format!("{} ({da}) vs {} ({db})", a.model, b.model),
        &format!("in favor of {da}"),
        &format!("in favor of {db}"),
    ))
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CurvePoint {
    pub t: f64,
    pub median: f64,
    pub lower: f64,
    pub upper: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SurvivalCurve {
    pub group: String,
    pub ci_level: f64,
    pub points: Vec<CurvePoint>,
    pub sample_plans: Vec<SamplePlan>,
}

/// S(t) = exp(-cumulative hazard) for hazards `lambda` on `intervals`.
pub fn survival_at(intervals: &[Interval], lambda: &[f64], t: f64) -> f64 {
    (-intervals.iter().zip(lambda).map(|(iv, l)| l * iv.overlap(t)).sum::<f64>()).exp()
}

/// Evenly spaced times from 0 to the longest observed follow-up.
pub fn curve_grid(fit: &SurvivalFit, points: usize) -> Vec<f64> {
    let points = points.max(2);
    (0..points).map(|i| fit.max_time * i as f64 / (points - 1) as f64).collect()
}

/// Pointwise survival bands for one group over `times`.
pub fn survival_curve(
    fit: &SurvivalFit,
    group: &str,
    times: &[f64],
    opts: &SurvivalOptions,
    streams: &mut Streams,
) -> Result<SurvivalCurve> {
    ensure!(times.iter().all(|&t| t >= 0.0), InvalidArgument, "curve times must be non-negative");
    ensure!(!times.is_empty(), InvalidArgument, "no curve times given");
    let g = fit
        .groups
        .iter()
        .find(|g| g.label == group)
        .ok_or_else(|| Error::InvalidArgument(format!("unknown group '{group}'")))?;
    let post: Vec<ClosedForm> = g.intervals.iter().map(Interval::posterior).collect();
    let labels: Vec<String> = times.iter().map(|t| format!("S({t})")).collect();
    let label_refs: Vec<&str> = labels.iter().map(String::as_str).collect();
    let (draws, sample_plans) = run_adaptive_sampler(
        |rng, out| {
            let lambda: Vec<f64> = post.iter().map(|d| d.sample(rng)).collect();
            for (o, &t) in out.iter_mut().zip(times) {
                *o = survival_at(&g.intervals, &lambda, t);
            }
            Ok(())
        },
        times.len(),
        &label_refs,
        &opts.sampler,
        streams,
    )?;
    let tail = (1.0 - opts.ci_level) / 2.0;
    let points = times
        .iter()
        .enumerate()
        .map(|(j, &t)| {
            let sorted = stats::sorted(&draws.column(j));
            CurvePoint {
                t,
                median: stats::quantile_sorted(&sorted, 0.5),
                lower: stats::quantile_sorted(&sorted, tail),
                upper: stats::quantile_sorted(&sorted, 1.0 - tail),
            }
        })
        .collect();
    Ok(SurvivalCurve { group: group.to_string(), ci_level: opts.ci_level, points, sample_plans })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::data::{Column, Dataset};
    use crate::design::build_design;
    use crate::dist::sample_gamma;
    use crate::formula::parse_formula;

    fn data(rates: &[f64], n: usize, seed: u64) -> Dataset {
        let mut rng = Streams::new(seed).rng();
        let mut time = vec![];
        let mut cens = vec![];
        let mut grp = vec![];
        for (g, &r) in rates.iter().enumerate() {
            for _ in 0..n {
                let t = sample_gamma(&mut rng, 1.0, r);
                let c = sample_gamma(&mut rng, 1.0, 0.3 * r);
                time.push(t.min(c));
                cens.push(if t <= c { 1.0 } else { 0.0 });
                grp.push(Some(format!("g{g}")));
            }
        }
        Dataset::new(vec![
            ("time".into(), Column::Numeric(time.into_iter().map(Some).collect())),
            ("cens".into(), Column::Numeric(cens.into_iter().map(Some).collect())),
            ("grp".into(), Column::categorical(&grp)),
        ])
        .unwrap()
    }

    fn fit(d: &Dataset, f: &str) -> SurvivalFit {
        fit_survival(&build_design(&parse_formula(f).unwrap(), d).unwrap(), &SurvivalOptions::default()).unwrap()
    }

    #[test]
    fn exposure_is_conserved() {
        let time = [0.5, 1.2, 3.0, 0.1, 2.2];
        let event = [true, false, true, true, false];
        for knots in [vec![], vec![1.0], vec![0.3, 1.0, 2.5]] {
            let iv = tabulate(&time, &event, &knots, (1.0, 1.0));
            let total: f64 = iv.iter().map(|i| i.exposure).sum();
            assert!((total - time.iter().sum::<f64>()).abs() < 1e-12);
            assert_eq!(iv.iter().map(|i| i.events).sum::<usize>(), 3);
        }
    }

    #[test]
    fn single_interval_is_exponential_conjugacy() {
        let iv = tabulate(&[1.0, 2.0, 4.0], &[true, true, true], &[], (2.0, 3.0));
        assert_eq!(iv[0].posterior(), ClosedForm::Gamma { shape: 5.0, rate: 10.0 });
    }

    #[test]
    fn separated_hazards_are_detected() {
        let d = data(&[1.0, 5.0], 200, 1);
        let pooled = fit(&d, "Surv(time, cens) ~ 1");
        let split = fit(&d, "Surv(time, cens) ~ grp");
        let bf = survival_bayes_factor(&pooled, &split).unwrap();
        assert!(bf.log10_value < -2.0, "{}", bf.log10_value);
        let back = survival_bayes_factor(&split, &pooled).unwrap();
        assert!((bf.value * back.value - 1.0).abs() < 1e-10);
        assert!(bf.interpretation.contains("separate survival curves by grp"));
    }

    #[test]
    fn curves_start_at_one_and_decrease() {
        let d = data(&[1.0], 150, 2);
        let f = fit(&d, "Surv(time, cens) ~ 1");
        let times = curve_grid(&f, 20);
        let c = survival_curve(&f, "all", &times, &SurvivalOptions::default(), &mut Streams::new(3)).unwrap();
        assert_eq!(c.points[0].median, 1.0);
        assert_eq!(c.points[0].lower, 1.0);
        assert!(c.points.windows(2).all(|w| w[1].median <= w[0].median));
        assert!(c.points.iter().all(|p| p.lower <= p.median && p.median <= p.upper));
    }

    #[test]
    fn single_interval_median_curve() {
        let d = data(&[0.7], 100, 4);
        let design = build_design(&parse_formula("Surv(time, cens) ~ 1").unwrap(), &d).unwrap();
        let opts = SurvivalOptions { intervals: Some(1), ..Default::default() };
        let f = fit_survival(&design, &opts).unwrap();
        let post = f.groups[0].intervals[0].posterior();
        let times = [0.5, 1.0, 2.0];
        let sampler = SamplerConfig::with_target(crate::mc_plan::PrecisionTarget::absolute(0.0005, 0.95, 0.95));
        let c = survival_curve(&f, "all", &times, &SurvivalOptions { sampler, ..opts }, &mut Streams::new(5)).unwrap();
        for p in &c.points {
            let exact = (-post.quantile(0.5) * p.t).exp();
            assert!((p.median - exact).abs() < 1e-3, "{} vs {exact}", p.median);
        }
    }
}
