//! One-way analysis of variance with separate group variances.

use serde::Serialize;

use nalgebra::{DMatrix, DVector};

use super::groups::{fit_group, GroupPosterior, GroupPrior};
use super::{nig_update, NigPrior};
use crate::design::{DesignSpec, TermKind, Value};
use crate::error::{ensure, Error, Result};
use crate::mc_plan::{run_adaptive_sampler, DrawMatrix, SamplePlan, SamplerConfig};
use crate::rng::Streams;
use crate::special::norm_cdf;
use crate::stats;
use crate::summary::{
    default_rope, summarize_closed_form, summarize_draws, BayesFactor, InferenceSummary, Rope, RopeRule,
};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CompareOptions {
    pub ci_level: f64,
    pub rope_override: Option<Rope>,
    pub sampler: SamplerConfig,
    /// Pool one residual variance across groups instead of one per group.
    pub equal_variance: bool,
}

impl Default for CompareOptions {
    fn default() -> Self {
        CompareOptions { ci_level: 0.95, rope_override: None, sampler: SamplerConfig::default(), equal_variance: false }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct GroupComparison {
    pub response: String,
    pub factor: String,
    /// "unequal" or "equal".
    pub variance_model: String,
    pub prior: GroupPrior,
    pub groups: Vec<GroupPosterior>,
    pub level_means: Vec<InferenceSummary>,
    pub level_variances: Vec<InferenceSummary>,
    /// First-listed level minus second-listed level, for every pair.
    pub differences: Vec<InferenceSummary>,
    /// Pr(a draw from the first level exceeds a draw from the second).
    pub epr: Vec<InferenceSummary>,
    pub bayes_factor: BayesFactor,
    pub sample_plans: Vec<SamplePlan>,
}

/// Compares normal group means; each group gets its own mean and variance.
pub fn compare_groups(
    response: &str,
    factor: &str,
    groups: &[(String, Vec<f64>)],
    opts: &CompareOptions,
    streams: &mut Streams,
) -> Result<GroupComparison> {
    ensure!(groups.len() >= 2, Data, "need at least two groups, got {}", groups.len());
    let all: Vec<f64> = groups.iter().flat_map(|(_, y)| y.iter().copied()).collect();
    let prior = GroupPrior::vague(stats::mean(&all));
    let fits = groups.iter().map(|(l, y)| fit_group(l, y, &prior)).collect::<Result<Vec<_>>>()?;
    if opts.equal_variance {
        return compare_equal_variance(response, factor, groups, &all, prior, fits, opts, streams);
    }
    let pooled = fit_group("pooled", &all, &prior)?;
    let ln_bf = fits.iter().map(|g| g.log_marginal_likelihood).sum::<f64>() - pooled.log_marginal_likelihood;
    let bayes_factor = means_bf(ln_bf);

    let ci = opts.ci_level;
    let level_means = fits
        .iter()
        .map(|g| summarize_closed_form(&format!("mean {}", g.label), &g.mean_marginal(), ci, None, 0.0))
        .collect::<Result<Vec<_>>>()?;
    let level_variances = fits
        .iter()
        .map(|g| summarize_closed_form(&format!("variance {}", g.label), &g.sigma2(), ci, None, 0.0))
        .collect::<Result<Vec<_>>>()?;

    let (pairs, labels) = pair_list(&fits);
    let label_refs: Vec<&str> = labels.iter().map(String::as_str).collect();
    let np = pairs.len();
    let draw = |rng: &mut crate::rng::Rng, out: &mut [f64]| {
        let params: Vec<(f64, f64)> = fits.iter().map(|g| g.sample(rng)).collect();
        for (i, &(g, h)) in pairs.iter().enumerate() {
            let ((mg, vg), (mh, vh)) = (params[g], params[h]);
            out[i] = mg - mh;
            out[np + i] = norm_cdf((mg - mh) / (vg + vh).sqrt());
        }
        Ok(())
    };
    let (draws, sample_plans) = run_adaptive_sampler(draw, 2 * np, &label_refs, &opts.sampler, streams)?;
    let (differences, epr) = pair_summaries(&fits, &pairs, &labels, &draws, opts)?;
    Ok(GroupComparison {
        response: response.to_string(),
        factor: factor.to_string(),
        variance_model: "unequal".into(),
        prior,
        groups: fits,
        level_means,
        level_variances,
        differences,
        epr,
        bayes_factor,
        sample_plans,
    })
}

fn means_bf(ln_bf: f64) -> BayesFactor {
    BayesFactor::from_ln(
        ln_bf,
        "separate group means vs common mean",
        "in favor of different means",
        "in favor of a common mean",
    )
}

fn pair_list(fits: &[GroupPosterior]) -> (Vec<(usize, usize)>, Vec<String>) {
    let k = fits.len();
    let pairs: Vec<(usize, usize)> = (0..k).flat_map(|g| (g + 1..k).map(move |h| (g, h))).collect();
    let mut labels: Vec<String> = pairs.iter().map(|&(g, h)| format!("{} - {}", fits[g].label, fits[h].label)).collect();
    labels.extend(pairs.iter().map(|&(g, h)| format!("EPR {} > {}", fits[g].label, fits[h].label)));
    (pairs, labels)
}

type PairSummaries = (Vec<InferenceSummary>, Vec<InferenceSummary>);

fn pair_summaries(
    fits: &[GroupPosterior],
    pairs: &[(usize, usize)],
    labels: &[String],
    draws: &DrawMatrix,
    opts: &CompareOptions,
) -> Result<PairSummaries> {
    let np = pairs.len();
    let ci = opts.ci_level;
    let mut differences = Vec::with_capacity(np);
    let mut epr = Vec::with_capacity(np);
    for (i, &(g, h)) in pairs.iter().enumerate() {
        let pooled_sd = ((fits[g].sample_variance + fits[h].sample_variance) / 2.0).sqrt();
        let rope = match opts.rope_override {
            Some(r) => Some(r),
            None => default_rope(RopeRule::MeanDifference { pooled_sd }).ok(),
        };
        differences.push(summarize_draws(&labels[i], &draws.column(i), ci, rope, 0.0)?);
        epr.push(summarize_draws(&labels[np + i], &draws.column(np + i), ci, None, 0.5)?);
    }
    Ok((differences, epr))
}

/// Cell-means model with one shared variance.
#[allow(clippy::too_many_arguments)]
fn compare_equal_variance(
    response: &str,
    factor: &str,
    groups: &[(String, Vec<f64>)],
    all: &[f64],
    prior: GroupPrior,
    fits: Vec<GroupPosterior>,
    opts: &CompareOptions,
    streams: &mut Streams,
) -> Result<GroupComparison> {
    let k = groups.len();
    let n = all.len();
    let mut x = DMatrix::zeros(n, k);
    let mut row = 0;
    for (g, (_, y)) in groups.iter().enumerate() {
        for _ in 0..y.len() {
            x[(row, g)] = 1.0;
            row += 1;
        }
    }
    let y = DVector::from_column_slice(all);
    let nig = NigPrior::custom(DVector::from_element(k, prior.mean), DMatrix::identity(k, k) * prior.precision, prior.a, prior.b)?;
    let (post, ml_sep) = nig_update(&x, &y, &nig)?;
    let common = NigPrior::custom(DVector::from_element(1, prior.mean), DMatrix::identity(1, 1) * prior.precision, prior.a, prior.b)?;
    let (_, ml_common) = nig_update(&DMatrix::from_element(n, 1, 1.0), &y, &common)?;
    let bayes_factor = means_bf(ml_sep - ml_common);

    let ci = opts.ci_level;
    let level_means = fits
        .iter()
        .enumerate()
        .map(|(g, f)| summarize_closed_form(&format!("mean {}", f.label), &post.coef_marginal(g), ci, None, 0.0))
        .collect::<Result<Vec<_>>>()?;
    let level_variances = vec![summarize_closed_form("variance (common)", &post.sigma2(), ci, None, 0.0)?];

    let (pairs, labels) = pair_list(&fits);
    let label_refs: Vec<&str> = labels.iter().map(String::as_str).collect();
    let np = pairs.len();
    let draw = |rng: &mut crate::rng::Rng, out: &mut [f64]| {
        let mut beta = vec![0.0; k];
        let s2 = post.sample(rng, &mut beta);
        for (i, &(g, h)) in pairs.iter().enumerate() {
            out[i] = beta[g] - beta[h];
            out[np + i] = norm_cdf((beta[g] - beta[h]) / (2.0 * s2).sqrt());
        }
        Ok(())
    };
    let (draws, sample_plans) = run_adaptive_sampler(draw, 2 * np, &label_refs, &opts.sampler, streams)?;
    let (differences, epr) = pair_summaries(&fits, &pairs, &labels, &draws, opts)?;
    Ok(GroupComparison {
        response: response.to_string(),
        factor: factor.to_string(),
        variance_model: "equal".into(),
        prior,
        groups: fits,
        level_means,
        level_variances,
        differences,
        epr,
        bayes_factor,
        sample_plans,
    })
}

/// Response values for each factor level.
pub type Groups = Vec<(String, Vec<f64>)>;

/// Splits a one-factor design's response by factor level, in level order.
pub fn groups_from_design(design: &DesignSpec) -> Result<(String, Groups)> {
    ensure!(design.terms.len() == 1, Design, "expected exactly one grouping factor, got {} terms", design.terms.len());
    let term = &design.terms[0];
    let levels = match &term.kind {
        TermKind::Factor { levels } => levels.clone(),
        TermKind::Numeric { .. } => {
            return Err(Error::Design(format!("grouping variable '{}' must be categorical", term.name)))
        }
    };
    let y = design.y()?;
    let mut groups: Vec<(String, Vec<f64>)> = levels.into_iter().map(|l| (l, Vec::new())).collect();
    for (i, row) in design.raw.iter().enumerate() {
        if let Value::Level(l) = &row[0] {
            if let Some(g) = groups.iter_mut().find(|(name, _)| name == l) {
                g.1.push(y[i]);
            }
        }
    }
    Ok((term.name.clone(), groups))
}

pub fn fit_aov(design: &DesignSpec, opts: &CompareOptions, streams: &mut Streams) -> Result<GroupComparison> {
    let (factor, groups) = groups_from_design(design)?;
    for (l, y) in &groups {
        ensure!(y.len() >= 2, Data, "level '{l}' of '{factor}' has fewer than two observations");
    }
    compare_groups(&design.response_name, &factor, &groups, opts, streams)
}
