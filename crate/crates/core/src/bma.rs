//! Bayesian model averaging over all subsets of linear-model terms.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::design::DesignSpec;
use crate::dist::{sample_normal, ClosedForm};
use crate::error::{ensure, Error, Result};
use crate::linear::{fit_lm, LinearFit, LmPrior};
use crate::mc_plan::{draw_fixed, proportion_sample_size, run_adaptive_sampler, DrawMatrix, SamplePlan, SamplerConfig};
use crate::rng::{Rng, Streams};
use crate::special::{ln_gamma, log_sum_exp};
use crate::stats;
use crate::summary::InferenceSummary;

pub const DEFAULT_MAX_TERMS: usize = 15;
pub const PVALUE_QUANTILES: [f64; 5] = [0.1, 0.25, 0.5, 0.75, 0.9];

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ModelPrior {
    Uniform,
    /// Beta-binomial(1, 1) on the number of included terms.
    BetaBinomial,
}

impl std::str::FromStr for ModelPrior {
    type Err = Error;

    fn from_str(s: &str) -> Result<ModelPrior> {
        match s {
            "uniform" => Ok(ModelPrior::Uniform),
            "beta-binomial" => Ok(ModelPrior::BetaBinomial),
            _ => Err(Error::InvalidArgument(format!("unknown model prior '{s}' (expected uniform or beta-binomial)"))),
        }
    }
}

impl ModelPrior {
    fn ln_prior(&self, size: usize, total: usize) -> f64 {
        match self {
            ModelPrior::Uniform => 0.0,
            ModelPrior::BetaBinomial => {
                let ln_choose = ln_gamma(total as f64 + 1.0) - ln_gamma(size as f64 + 1.0) - ln_gamma((total - size) as f64 + 1.0);
                -ln_choose
            }
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct BmaOptions {
    pub model_prior: ModelPrior,
    pub max_terms: usize,
    pub ci_level: f64,
    pub sampler: SamplerConfig,
}

impl Default for BmaOptions {
    fn default() -> Self {
        BmaOptions {
            model_prior: ModelPrior::Uniform,
            max_terms: DEFAULT_MAX_TERMS,
            ci_level: 0.95,
            sampler: SamplerConfig::default(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ModelEntry {
    /// Names of the included terms.
    pub terms: Vec<String>,
    pub log_marginal_likelihood: f64,
    pub log_prior: f64,
    pub probability: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CoefficientSummary {
    pub label: String,
    pub inclusion_probability: f64,
    /// Over the mixture, with the coefficient set to 0 in models without it.
    pub unconditional: InferenceSummary,
    /// Over the models that include the coefficient.
    pub conditional: Option<InferenceSummary>,
}

#[derive(Debug, Clone)]
pub struct BmaFit {
    pub design: DesignSpec,
    pub models: Vec<ModelEntry>,
    pub fits: Vec<LinearFit>,
    /// Design columns of the full model used by each submodel.
    pub columns: Vec<Vec<usize>>,
    pub coefficients: Vec<CoefficientSummary>,
    /// Coefficient draws (full width) followed by the sampled model index.
    pub draws: DrawMatrix,
    pub sample_plans: Vec<SamplePlan>,
}

fn subsets(k: usize) -> Vec<Vec<usize>> {
    (0u64..1 << k).map(|mask| (0..k).filter(|&t| mask >> t & 1 == 1).collect()).collect()
}

fn pick(cum: &[f64], u: f64) -> usize {
    cum.partition_point(|&c| c < u).min(cum.len() - 1)
}

/// Inclusion probability above which a coefficient's draws are planned.
const MONITOR_INCLUSION: f64 = 0.99;

/// Posterior of one coefficient: weighted Student t components plus a point
/// mass at zero from the models that leave it out.
struct CoefMixture {
    parts: Vec<(f64, ClosedForm)>,
    zero: f64,
}

impl CoefMixture {
    fn total(&self) -> f64 {
        self.parts.iter().map(|(w, _)| w).sum::<f64>() + self.zero
    }

    /// Pr(beta <= x), normalized.
    fn cdf(&self, x: f64) -> f64 {
        let cont: f64 = self.parts.iter().map(|(w, d)| w * d.cdf(x)).sum();
        (cont + if x >= 0.0 { self.zero } else { 0.0 }) / self.total()
    }

    /// Smallest x with cdf(x) >= p.
    fn quantile(&self, p: f64) -> f64 {
        let (mut lo, mut hi) = self.parts.iter().fold((0.0f64, 0.0f64), |(lo, hi), (_, d)| {
            (lo.min(d.quantile(1e-12)), hi.max(d.quantile(1.0 - 1e-12)))
        });
        if self.zero > 0.0 && self.cdf(0.0) >= p && self.cdf(-f64::MIN_POSITIVE) < p {
            return 0.0;
        }
        for _ in 0..200 {
            let mid = 0.5 * (lo + hi);
            if self.cdf(mid) >= p {
                hi = mid;
            } else {
                lo = mid;
            }
        }
        hi
    }

    fn summary(&self, label: &str, ci_level: f64) -> Result<InferenceSummary> {
        ensure!(ci_level > 0.0 && ci_level < 1.0, InvalidArgument, "credible level must lie in (0, 1), got {ci_level}");
        let total = self.total();
        let tail = (1.0 - ci_level) / 2.0;
        let below: f64 = self.parts.iter().map(|(w, d)| w * d.cdf(0.0)).sum::<f64>() / total;
        let above: f64 = self.parts.iter().map(|(w, d)| w * d.sf(0.0)).sum::<f64>() / total;
        Ok(InferenceSummary {
            label: label.to_string(),
            post_mean: self.parts.iter().map(|(w, d)| w * d.mean()).sum::<f64>() / total,
            ci_lower: self.quantile(tail),
            ci_upper: self.quantile(1.0 - tail),
            ci_level,
            prob_direction: below.max(above),
            rope_prob: None,
            rope_bounds: None,
            bayes_factor: None,
            bf_interpretation: None,
        })
    }
}

pub fn fit_bma(design: &DesignSpec, opts: &BmaOptions, streams: &mut Streams) -> Result<BmaFit> {
    let k = design.terms.len();
    ensure!(k >= 1, Design, "model averaging needs at least one term");
    ensure!(
        k <= opts.max_terms,
        Design,
        "{k} terms give {} models, above the enumeration cap of {} terms; reduce the number of covariates",
        1u64 << k.min(63),
        opts.max_terms
    );
    design.ensure_full_rank()?;
    let sets = subsets(k);
    let fits = sets
        .par_iter()
        .map(|keep| fit_lm(&design.subset_terms(keep), &LmPrior::ZellnerG))
        .collect::<Result<Vec<_>>>()?;
    let columns: Vec<Vec<usize>> = sets
        .iter()
        .map(|keep| {
            let mut cols: Vec<usize> = design.intercept_column().into_iter().collect();
            for &t in keep {
                let term = &design.terms[t];
                cols.extend(term.first_column..term.first_column + term.width);
            }
            cols
        })
        .collect();
    let ln_post: Vec<f64> = fits
        .iter()
        .zip(&sets)
        .map(|(f, s)| f.log_marginal_likelihood + opts.model_prior.ln_prior(s.len(), k))
        .collect();
    let norm = log_sum_exp(&ln_post);
    let models: Vec<ModelEntry> = sets
        .iter()
        .zip(&fits)
        .zip(&ln_post)
        .map(|((s, f), lp)| ModelEntry {
            terms: s.iter().map(|&t| design.terms[t].name.clone()).collect(),
            log_marginal_likelihood: f.log_marginal_likelihood,
            log_prior: opts.model_prior.ln_prior(s.len(), k),
            probability: (lp - norm).exp(),
        })
        .collect();
    let probs: Vec<f64> = models.iter().map(|m| m.probability).collect();
    let mut cum = Vec::with_capacity(probs.len());
    let mut acc = 0.0;
    for p in &probs {
        acc += p;
        cum.push(acc);
    }

    let p = design.p();
    let inclusion: Vec<f64> =
        (0..p).map(|j| columns.iter().zip(&probs).filter(|(c, _)| c.contains(&j)).map(|(_, p)| p).sum()).collect();
    // a coefficient left out of some models has a point mass at zero, whose
    // tail quantiles no finite plan can pin down; plan on the others only
    let monitored: Vec<usize> = (0..p).filter(|&j| inclusion[j] >= MONITOR_INCLUSION).collect();
    let labels: Vec<&str> = monitored.iter().map(|&j| design.labels[j].as_str()).collect();
    let lead = monitored.len();
    let (wide, sample_plans) = run_adaptive_sampler(
        |rng, out| {
            let m = pick(&cum, rand::Rng::gen::<f64>(rng) * acc);
            let cols = &columns[m];
            let mut beta = vec![0.0; cols.len()];
            fits[m].posterior.sample(rng, &mut beta);
            let row = &mut out[lead..];
            row[..p].fill(0.0);
            for (c, b) in cols.iter().zip(&beta) {
                row[*c] = *b;
            }
            row[p] = m as f64;
            for (i, &j) in monitored.iter().enumerate() {
                out[i] = out[lead + j];
            }
            Ok(())
        },
        lead + p + 1,
        &labels,
        &opts.sampler,
        streams,
    )?;
    let draws = DrawMatrix::new(p + 1, wide.iter_rows().flat_map(|r| r[lead..].iter().copied()).collect());

    let coefficients = (0..p)
        .map(|j| {
            let parts = |included_only: bool| CoefMixture {
                parts: fits
                    .iter()
                    .zip(&columns)
                    .zip(&probs)
                    .filter_map(|((f, c), &w)| c.iter().position(|&cj| cj == j).map(|pos| (w, f.posterior.coef_marginal(pos))))
                    .collect(),
                zero: if included_only { 0.0 } else { 1.0 - inclusion[j] },
            };
            let unconditional = parts(false).summary(&design.labels[j], opts.ci_level)?;
            let conditional = if inclusion[j] > 0.0 && inclusion[j] < 1.0 - 1e-12 {
                Some(parts(true).summary(&format!("{} | included", design.labels[j]), opts.ci_level)?)
            } else {
                None
            };
            Ok(CoefficientSummary {
                label: design.labels[j].clone(),
                inclusion_probability: inclusion[j],
                unconditional,
                conditional,
            })
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(BmaFit { design: design.clone(), models, fits, columns, coefficients, draws, sample_plans })
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct QuantilePValue {
    pub quantile: f64,
    pub observed: f64,
    pub p_value: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct BmaPValues {
    pub draws: usize,
    pub p_values: Vec<QuantilePValue>,
}

impl BmaFit {
    fn replicate_quantiles(&self, rng: &mut Rng, probs: &[f64], out: &mut [f64]) {
        let p = self.design.p();
        let row = self.draws.row(rand::Rng::gen_range(rng, 0..self.draws.rows()));
        let m = row[p] as usize;
        // sigma2 is not stored with the draw, so take a fresh joint draw from the chosen model
        let cols = &self.columns[m];
        let mut beta = vec![0.0; cols.len()];
        let s2 = self.fits[m].posterior.sample(rng, &mut beta);
        let x = &self.fits[m].design.x;
        let s = s2.sqrt();
        let yrep: Vec<f64> = (0..x.nrows())
            .map(|i| (0..cols.len()).map(|c| x[(i, c)] * beta[c]).sum::<f64>() + s * sample_normal(rng))
            .collect();
        let sorted = stats::sorted(&yrep);
        for (o, &q) in out.iter_mut().zip(probs) {
            *o = stats::quantile_sorted(&sorted, q);
        }
    }

    /// Posterior predictive p-values Pr(T(y_rep) < T(y)) for sample quantiles
    /// of the response, replicating through the model mixture.
    pub fn bayesian_pvalues(&self, probs: &[f64], streams: &mut Streams) -> Result<BmaPValues> {
        ensure!(!probs.is_empty() && probs.iter().all(|&q| q > 0.0 && q < 1.0), InvalidArgument, "quantile probabilities must lie in (0, 1)");
        let y = self.design.y()?;
        let observed: Vec<f64> = {
            let sorted = stats::sorted(y.as_slice());
            probs.iter().map(|&q| stats::quantile_sorted(&sorted, q)).collect()
        };
        let pilot_n = 500;
        let run = |n: usize, streams: &mut Streams| {
            draw_fixed(
                |rng, out| {
                    self.replicate_quantiles(rng, probs, out);
                    Ok(())
                },
                probs.len(),
                n,
                streams,
            )
        };
        let frac = |d: &DrawMatrix, j: usize| d.column(j).iter().filter(|&&t| t < observed[j]).count() as f64 / d.rows() as f64;
        let pilot = run(pilot_n, streams)?;
        let mut n = pilot_n;
        for j in 0..probs.len() {
            n = n.max(proportion_sample_size(frac(&pilot, j), 0.95, 0.01, pilot_n)?);
        }
        let all = run(n, streams)?;
        let p_values = probs
            .iter()
            .enumerate()
            .map(|(j, &q)| QuantilePValue { quantile: q, observed: observed[j], p_value: frac(&all, j) })
            .collect();
        Ok(BmaPValues { draws: n, p_values })
    }
}
