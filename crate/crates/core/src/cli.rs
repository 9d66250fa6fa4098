//! Command-line front end: one subcommand per analysis, CSV in, one
//! versioned JSON report out.

use std::collections::HashMap;
use std::ffi::OsString;
use std::io::Write;
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand, ValueEnum};
use serde::Serialize;

use crate::bma::{fit_bma, BmaOptions, ModelPrior, PVALUE_QUANTILES};
use crate::data::{read_csv, Column, Dataset, TypeHint};
use crate::design::{build_design, DesignSpec};
use crate::elicit::{find_beta_parms, find_invgamma_parms, InvGammaTarget};
use crate::error::{Error, Result};
use crate::formula::{parse_formula, Formula, Terms};
use crate::glm::pvalue::bayesian_pvalue;
use crate::glm::{fit_glm, Family, GlmOptions, Method};
use crate::linear::aov::{fit_aov, groups_from_design, CompareOptions};
use crate::linear::hetero::heteroscedasticity_bf;
use crate::linear::{fit_lm, LmPrior};
use crate::mc_plan::{
    mean_sample_size, quantile_sample_size, sample_size_ratio, PrecisionTarget, SamplerConfig, Tolerance,
};
use crate::mediation::{mediate, MediationOptions, SubModel};
use crate::np_boot::{fit_np_glm, Loss, NpOptions};
use crate::report::{bma_report, curves_csv, glm_report, lm_report, np_report, pretty, summaries_csv, Report, SurvivalReport};
use crate::rng::Streams;
use crate::simple::{
    case_control, chisq_test, poisson_test, prop_test, sign_test, t_test_one, t_test_two, BetaPrior, BinomialSample,
    CountSample, GammaPrior, TTest, TestOptions,
};
use crate::summary::Rope;
use crate::survival::{curve_grid, fit_survival, survival_bayes_factor, survival_curve, SurvivalOptions};

pub const DEFAULT_SEED: u64 = 2026;

#[derive(Debug, Parser, Serialize)]
#[command(name = "bayesics", version, about = "Bayesian analyses with closed-form posteriors and planned Monte Carlo accuracy")]
#[command(arg_required_else_help = true)]
pub struct Cli {
    #[command(flatten)]
    pub common: Common,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Args, Serialize)]
pub struct Common {
    /// Random seed; runs with the same seed give identical reports.
    #[arg(long, global = true, env = "BAYESICS_SEED", default_value_t = DEFAULT_SEED)]
    pub seed: u64,
    /// Worker threads (defaults to all cores).
    // not echoed: results are identical for any thread count
    #[serde(skip)]
    #[arg(long, global = true, env = "BAYESICS_THREADS")]
    pub threads: Option<usize>,
    /// Credible level of every interval.
    #[arg(long, global = true, default_value_t = 0.95)]
    pub ci_level: f64,
    /// Monte Carlo tolerance for interval endpoints, in the estimand's units.
    #[arg(long = "mc-epsilon", global = true, conflicts_with = "mc_epsilon_sd")]
    pub mc_epsilon: Option<f64>,
    /// Monte Carlo tolerance as a fraction of the posterior SD.
    #[arg(long = "mc-epsilon-sd", global = true)]
    pub mc_epsilon_sd: Option<f64>,
    /// Probability that every endpoint is within the tolerance.
    #[arg(long, global = true, default_value_t = 0.95)]
    pub mc_prob: f64,
    /// ROPE bounds "LOWER,UPPER" on the reported scale, replacing the default.
    #[arg(long, global = true, allow_hyphen_values = true)]
    pub rope: Option<String>,
    /// Report path (stdout when absent).
    #[arg(long, short, global = true)]
    pub output: Option<PathBuf>,
    #[arg(long, global = true, value_enum, default_value_t = Format::Json)]
    pub format: Format,
    /// Print a summary table to stdout; the report is written only with --output.
    #[arg(long, global = true)]
    pub pretty: bool,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum Format {
    Json,
    /// Flat table of every summary record; survival curves for survfit
    Csv,
}

#[derive(Debug, Args, Serialize)]
pub struct DataArgs {
    /// CSV file with a header row.
    #[arg(long)]
    pub data: PathBuf,
    /// Columns to read as categorical even when numeric.
    #[arg(long, value_delimiter = ',')]
    pub categorical: Vec<String>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum LmPriorArg {
    Zellner,
    Conjugate,
}

#[derive(Debug, Subcommand, Serialize)]
#[serde(tag = "subcommand", rename_all = "kebab-case")]
pub enum Command {
    /// Conjugate normal linear regression.
    Lm {
        #[command(flatten)]
        data: DataArgs,
        #[arg(long)]
        formula: String,
        #[arg(long, value_enum, default_value_t = LmPriorArg::Zellner)]
        prior: LmPriorArg,
        /// Covariate for a credible band of the mean response.
        #[arg(long)]
        band: Option<String>,
    },
    /// One-way comparison of normal group means.
    Aov {
        #[command(flatten)]
        data: DataArgs,
        #[arg(long)]
        formula: String,
        #[arg(long)]
        equal_variance: bool,
    },
    /// Generalized linear model with an approximate posterior.
    Glm {
        #[command(flatten)]
        data: DataArgs,
        #[arg(long)]
        formula: String,
        #[arg(long, default_value = "gaussian")]
        family: String,
        #[arg(long, default_value = "vb")]
        method: String,
        /// Column added to the linear predictor (already on the link scale).
        #[arg(long)]
        offset: Option<String>,
        /// Compute the posterior predictive p-value.
        #[arg(long)]
        pvalue: bool,
        /// Write the (replicated, observed) discrepancy pairs to this CSV.
        #[arg(long, requires = "pvalue")]
        pvalue_pairs: Option<PathBuf>,
        /// Compute AIC, BIC, DIC and WAIC.
        #[arg(long)]
        ic: bool,
        #[arg(long)]
        band: Option<String>,
    },
    /// Loss-likelihood bootstrap regression.
    Npglm {
        #[command(flatten)]
        data: DataArgs,
        #[arg(long)]
        formula: String,
        #[arg(long, default_value = "gaussian")]
        family: String,
        #[arg(long, default_value = "self-information")]
        loss: String,
        #[arg(long)]
        band: Option<String>,
    },
    /// One-sample ("y ~ 1") or two-sample ("y ~ group") test of normal means.
    Ttest {
        #[command(flatten)]
        data: DataArgs,
        #[arg(long)]
        formula: String,
        /// Null mean of a one-sample test.
        #[arg(long, default_value_t = 0.0, allow_hyphen_values = true)]
        mu: f64,
        #[arg(long)]
        equal_variance: bool,
    },
    /// One proportion or the comparison of two.
    Prop {
        #[arg(long, value_delimiter = ',', required = true)]
        successes: Vec<u64>,
        #[arg(long, value_delimiter = ',', required = true)]
        trials: Vec<u64>,
        /// jeffreys, uniform or "A,B" beta shapes.
        #[arg(long, default_value = "jeffreys")]
        prior: String,
    },
    /// One Poisson rate or the ratio of two.
    Poisson {
        #[arg(long, value_delimiter = ',', required = true)]
        counts: Vec<u64>,
        /// Exposure per sample (defaults to 1).
        #[arg(long, value_delimiter = ',')]
        offsets: Vec<f64>,
        #[arg(long, default_value_t = 0.5)]
        prior_shape: f64,
        #[arg(long, default_value_t = 0.0)]
        prior_rate: f64,
        #[arg(long)]
        null_rate: Option<f64>,
    },
    /// Sign test on paired differences.
    Sign {
        #[command(flatten)]
        data: DataArgs,
        /// Column of differences.
        #[arg(long, conflicts_with = "pair", required_unless_present = "pair")]
        column: Option<String>,
        /// Two columns "A,B"; differences are A - B.
        #[arg(long, value_delimiter = ',', num_args = 2)]
        pair: Option<Vec<String>>,
        #[arg(long, default_value = "jeffreys")]
        prior: String,
    },
    /// Independence in a contingency table.
    Chisq {
        /// Counts, rows separated by ';' and cells by ','.
        #[arg(long, conflicts_with = "data", required_unless_present = "data")]
        table: Option<String>,
        #[arg(long, requires_all = ["rows", "cols"])]
        data: Option<PathBuf>,
        #[arg(long)]
        rows: Option<String>,
        #[arg(long)]
        cols: Option<String>,
    },
    /// Exposure odds ratio in a case-control study.
    Casecontrol {
        #[arg(long)]
        exposed_cases: u64,
        #[arg(long)]
        cases: u64,
        #[arg(long)]
        exposed_controls: u64,
        #[arg(long)]
        controls: u64,
        #[arg(long, default_value = "jeffreys")]
        prior: String,
    },
    /// Piecewise-exponential survival curves, "Surv(time, event) ~ group".
    Survfit {
        #[command(flatten)]
        data: DataArgs,
        #[arg(long)]
        formula: String,
        /// Fixed number of hazard intervals (selected by evidence otherwise).
        #[arg(long)]
        intervals: Option<usize>,
        #[arg(long, default_value_t = crate::survival::DEFAULT_MAX_INTERVALS)]
        max_intervals: usize,
        #[arg(long, default_value_t = crate::survival::DEFAULT_CURVE_POINTS)]
        curve_points: usize,
        #[arg(long, default_value_t = crate::survival::DEFAULT_PRIOR_SHAPE)]
        prior_shape: f64,
    },
    /// Model averaging over all subsets of linear-model terms.
    Bma {
        #[command(flatten)]
        data: DataArgs,
        #[arg(long)]
        formula: String,
        /// uniform or beta-binomial.
        #[arg(long, default_value = "uniform")]
        model_prior: String,
        #[arg(long)]
        pvalue: bool,
    },
    /// Causal mediation analysis.
    Mediate {
        #[command(flatten)]
        data: DataArgs,
        #[arg(long)]
        mediator_formula: String,
        #[arg(long)]
        outcome_formula: String,
        #[arg(long)]
        treatment: String,
        /// lm or a GLM family.
        #[arg(long, default_value = "lm")]
        mediator_model: String,
        #[arg(long, default_value = "lm")]
        outcome_model: String,
    },
    /// Beta shapes from a mean and one quantile.
    ElicitBeta {
        #[arg(long)]
        mean: f64,
        #[arg(long)]
        prob: f64,
        #[arg(long)]
        value: f64,
    },
    /// Inverse-gamma parameters from two quantiles or a response variance.
    ElicitInvgamma {
        #[arg(long, requires_all = ["v1", "p2", "v2"], required_unless_present = "response_variance")]
        p1: Option<f64>,
        #[arg(long)]
        v1: Option<f64>,
        #[arg(long)]
        p2: Option<f64>,
        #[arg(long)]
        v2: Option<f64>,
        #[arg(long, conflicts_with = "p1")]
        response_variance: Option<f64>,
    },
    /// Bayes factor for equal versus unequal group variances.
    Heterosced {
        #[command(flatten)]
        data: DataArgs,
        #[arg(long)]
        formula: String,
    },
    /// Monte Carlo sample sizes for an interval endpoint and a mean.
    Mcplan {
        /// One minus the credible level.
        #[arg(long, default_value_t = 0.05)]
        alpha: f64,
        #[arg(long, default_value_t = 0.95)]
        s: f64,
        #[arg(long)]
        epsilon: f64,
        /// Posterior density at the lower endpoint.
        #[arg(long)]
        density: f64,
        /// Posterior variance.
        #[arg(long, default_value_t = 1.0)]
        variance: f64,
    },
}

impl Command {
    fn name(&self) -> &'static str {
        match self {
            Command::Lm { .. } => "lm",
            Command::Aov { .. } => "aov",
            Command::Glm { .. } => "glm",
            Command::Npglm { .. } => "npglm",
            Command::Ttest { .. } => "ttest",
            Command::Prop { .. } => "prop",
            Command::Poisson { .. } => "poisson",
            Command::Sign { .. } => "sign",
            Command::Chisq { .. } => "chisq",
            Command::Casecontrol { .. } => "casecontrol",
            Command::Survfit { .. } => "survfit",
            Command::Bma { .. } => "bma",
            Command::Mediate { .. } => "mediate",
            Command::ElicitBeta { .. } => "elicit-beta",
            Command::ElicitInvgamma { .. } => "elicit-invgamma",
            Command::Heterosced { .. } => "heterosced",
            Command::Mcplan { .. } => "mcplan",
        }
    }
}

impl Common {
    fn rope(&self) -> Result<Option<Rope>> {
        self.rope
            .as_deref()
            .map(|s| {
                let parts: Vec<&str> = s.split(',').map(str::trim).collect();
                let bad = || Error::InvalidArgument(format!("--rope expects LOWER,UPPER, got '{s}'"));
                if parts.len() != 2 {
                    return Err(bad());
                }
                let lo: f64 = parts[0].parse().map_err(|_| bad())?;
                let hi: f64 = parts[1].parse().map_err(|_| bad())?;
                Rope::new(lo, hi)
            })
            .transpose()
    }

    /// Sampler settings, starting from `base` when no tolerance is given.
    fn sampler(&self, base: SamplerConfig) -> SamplerConfig {
        let epsilon = match (self.mc_epsilon, self.mc_epsilon_sd) {
            (Some(e), _) => Tolerance::Absolute(e),
            (None, Some(f)) => Tolerance::SdFraction(f),
            (None, None) => base.target.epsilon,
        };
        SamplerConfig { target: PrecisionTarget { epsilon, s: self.mc_prob, ci_level: self.ci_level }, ..base }
    }

    fn test_options(&self) -> Result<TestOptions> {
        Ok(TestOptions { ci_level: self.ci_level, rope_override: self.rope()?, sampler: self.sampler(SamplerConfig::default()) })
    }

    fn compare_options(&self, equal_variance: bool) -> Result<CompareOptions> {
        Ok(CompareOptions {
            ci_level: self.ci_level,
            rope_override: self.rope()?,
            sampler: self.sampler(SamplerConfig::default()),
            equal_variance,
        })
    }
}

fn load(args: &DataArgs) -> Result<Dataset> {
    let hints: HashMap<String, TypeHint> = args.categorical.iter().map(|c| (c.clone(), TypeHint::Categorical)).collect();
    read_csv(&args.data, &hints)
}

fn design(args: &DataArgs, formula: &str) -> Result<(Dataset, DesignSpec)> {
    let data = load(args)?;
    let d = build_design(&parse_formula(formula)?, &data)?;
    Ok((data, d))
}

fn beta_prior(text: &str) -> Result<BetaPrior> {
    match text {
        "jeffreys" => Ok(BetaPrior::JEFFREYS),
        "uniform" => Ok(BetaPrior::UNIFORM),
        _ => {
            let v: Vec<f64> = text
                .split(',')
                .map(|s| s.trim().parse::<f64>())
                .collect::<std::result::Result<_, _>>()
                .map_err(|_| Error::InvalidArgument(format!("prior must be jeffreys, uniform or 'A,B', got '{text}'")))?;
            if v.len() != 2 {
                return Err(Error::InvalidArgument(format!("prior must be jeffreys, uniform or 'A,B', got '{text}'")));
            }
            BetaPrior::new(v[0], v[1])
        }
    }
}

fn parse_table(text: &str) -> Result<Vec<Vec<u64>>> {
    text.split(';')
        .map(|row| {
            row.split(',')
                .map(|c| {
                    c.trim().parse::<u64>().map_err(|_| Error::InvalidArgument(format!("table cell '{c}' is not a count")))
                })
                .collect()
        })
        .collect()
}

/// Row levels, column levels and counts.
type CrossTab = (Vec<String>, Vec<String>, Vec<Vec<u64>>);

/// Cross-tabulates two columns, levels in sorted order.
fn cross_tab(data: &Dataset, rows: &str, cols: &str) -> Result<CrossTab> {
    let labels = |name: &str| -> Result<Vec<Option<String>>> {
        match data.column(name) {
            Some(Column::Categorical { levels, codes }) => Ok(codes.iter().map(|c| c.map(|k| levels[k].clone())).collect()),
            Some(Column::Numeric(v)) => Ok(v.iter().map(|x| x.map(|x| x.to_string())).collect()),
            None => Err(Error::Data(format!("no column named '{name}'"))),
        }
    };
    let (r, c) = (labels(rows)?, labels(cols)?);
    let levels = |v: &[Option<String>]| -> Vec<String> {
        v.iter().flatten().cloned().collect::<std::collections::BTreeSet<_>>().into_iter().collect()
    };
    let (rl, cl) = (levels(&r), levels(&c));
    let mut table = vec![vec![0u64; cl.len()]; rl.len()];
    for (a, b) in r.iter().zip(&c) {
        if let (Some(a), Some(b)) = (a, b) {
            let i = rl.iter().position(|x| x == a).expect("level present");
            let j = cl.iter().position(|x| x == b).expect("level present");
            table[i][j] += 1;
        }
    }
    Ok((rl, cl, table))
}

fn intercept_only(f: &Formula) -> Formula {
    Formula { terms: Terms::InterceptOnly, ..f.clone() }
}

fn write_pairs(path: &Path, pairs: &[(f64, f64)]) -> Result<()> {
    let mut w = csv::Writer::from_path(path)?;
    w.write_record(["t_replicated", "t_observed"])?;
    for (a, b) in pairs {
        w.write_record([a.to_string(), b.to_string()])?;
    }
    w.flush()?;
    Ok(())
}

#[derive(Serialize)]
struct ChisqReport {
    row_variable: Option<String>,
    column_variable: Option<String>,
    row_levels: Vec<String>,
    column_levels: Vec<String>,
    test: crate::simple::ChisqTest,
}

#[derive(Serialize)]
struct McPlanReport {
    alpha: f64,
    s: f64,
    epsilon: f64,
    density: f64,
    variance: f64,
    /// Draws for the lower interval endpoint.
    quantile_draws: u64,
    /// Draws for the posterior mean.
    mean_draws: u64,
    ratio: f64,
}

#[derive(Serialize)]
struct HeteroReport {
    response: String,
    factor: String,
    group_sizes: Vec<(String, usize)>,
    bayes_factor: crate::summary::BayesFactor,
}

/// Runs one analysis and returns its report.
pub fn execute(cli: &Cli) -> Result<Report> {
    let c = &cli.common;
    let mut streams = Streams::new(c.seed);
    let ci = c.ci_level;
    let result = match &cli.command {
        Command::Lm { data, formula, prior, band } => {
            let (_, d) = design(data, formula)?;
            let prior = match prior {
                LmPriorArg::Zellner => LmPrior::ZellnerG,
                LmPriorArg::Conjugate => LmPrior::Conjugate,
            };
            let fit = fit_lm(&d, &prior)?;
            crate::report::to_json(lm_report(&fit, ci, c.rope()?, band.as_deref())?)?
        }
        Command::Aov { data, formula, equal_variance } => {
            let (_, d) = design(data, formula)?;
            crate::report::to_json(fit_aov(&d, &c.compare_options(*equal_variance)?, &mut streams)?)?
        }
        Command::Glm { data, formula, family, method, offset, pvalue, pvalue_pairs, ic, band } => {
            let (dataset, d) = design(data, formula)?;
            let family: Family = family.parse()?;
            let offset = match offset {
                Some(col) => {
                    let all = dataset.numeric(col)?;
                    Some(d.rows.iter().map(|&r| all[r]).collect())
                }
                None => None,
            };
            let opts = GlmOptions {
                method: method.parse::<Method>()?,
                offset,
                sampler: c.sampler(GlmOptions::default().sampler),
                ..GlmOptions::default()
            };
            let fit = fit_glm(&d, family, &opts, &mut streams)?;
            let check = if *pvalue { Some(bayesian_pvalue(&fit, &mut streams)?) } else { None };
            if let (Some(path), Some(chk)) = (pvalue_pairs, &check) {
                write_pairs(path, &chk.pairs)?;
            }
            crate::report::to_json(glm_report(&fit, ci, c.rope()?, *ic, check, band.as_deref())?)?
        }
        Command::Npglm { data, formula, family, loss, band } => {
            let (_, d) = design(data, formula)?;
            let base = NpOptions::default();
            let opts = NpOptions { loss: loss.parse::<Loss>()?, ci_level: ci, rope_override: c.rope()?, sampler: c.sampler(base.sampler), ..base };
            let fit = fit_np_glm(&d, family.parse()?, &opts, &mut streams)?;
            crate::report::to_json(np_report(&fit, ci, c.rope()?, band.as_deref())?)?
        }
        Command::Ttest { data, formula, mu, equal_variance } => {
            let (_, d) = design(data, formula)?;
            let t = if d.terms.is_empty() {
                TTest::OneSample(t_test_one(d.y()?.as_slice(), *mu, &c.test_options()?)?)
            } else {
                let (factor, groups) = groups_from_design(&d)?;
                TTest::TwoSample(t_test_two(&d.response_name, &factor, &groups, &c.compare_options(*equal_variance)?, &mut streams)?)
            };
            crate::report::to_json(t)?
        }
        Command::Prop { successes, trials, prior } => {
            if successes.len() != trials.len() {
                return Err(Error::InvalidArgument("--successes and --trials need the same number of values".into()));
            }
            let samples: Vec<BinomialSample> =
                successes.iter().zip(trials).map(|(&s, &t)| BinomialSample { successes: s, trials: t }).collect();
            crate::report::to_json(prop_test(&samples, beta_prior(prior)?, &c.test_options()?, &mut streams)?)?
        }
        Command::Poisson { counts, offsets, prior_shape, prior_rate, null_rate } => {
            let offsets = if offsets.is_empty() { vec![1.0; counts.len()] } else { offsets.clone() };
            if offsets.len() != counts.len() {
                return Err(Error::InvalidArgument("--counts and --offsets need the same number of values".into()));
            }
            let samples: Vec<CountSample> =
                counts.iter().zip(&offsets).map(|(&count, &offset)| CountSample { count, offset }).collect();
            let prior = GammaPrior::new(*prior_shape, *prior_rate)?;
            crate::report::to_json(poisson_test(&samples, prior, *null_rate, &c.test_options()?, &mut streams)?)?
        }
        Command::Sign { data, column, pair, prior } => {
            let dataset = load(data)?;
            let diffs = match (column, pair) {
                (Some(col), _) => dataset.numeric(col)?,
                (None, Some(p)) => {
                    let (a, b) = (dataset.numeric(&p[0])?, dataset.numeric(&p[1])?);
                    a.iter().zip(&b).map(|(x, y)| x - y).collect()
                }
                (None, None) => return Err(Error::InvalidArgument("give --column or --pair".into())),
            };
            crate::report::to_json(sign_test(&diffs, beta_prior(prior)?, &c.test_options()?)?)?
        }
        Command::Chisq { table, data, rows, cols } => {
            let report = match (table, data, rows, cols) {
                (Some(t), _, _, _) => {
                    let t = parse_table(t)?;
                    ChisqReport {
                        row_variable: None,
                        column_variable: None,
                        row_levels: (1..=t.len()).map(|i| i.to_string()).collect(),
                        column_levels: (1..=t.first().map_or(0, Vec::len)).map(|i| i.to_string()).collect(),
                        test: chisq_test(&t, &c.test_options()?)?,
                    }
                }
                (None, Some(path), Some(r), Some(k)) => {
                    let dataset = read_csv(path, &HashMap::new())?;
                    let (rl, cl, t) = cross_tab(&dataset, r, k)?;
                    ChisqReport {
                        row_variable: Some(r.clone()),
                        column_variable: Some(k.clone()),
                        row_levels: rl,
                        column_levels: cl,
                        test: chisq_test(&t, &c.test_options()?)?,
                    }
                }
                _ => return Err(Error::InvalidArgument("give --table, or --data with --rows and --cols".into())),
            };
            crate::report::to_json(report)?
        }
        Command::Casecontrol { exposed_cases, cases, exposed_controls, controls, prior } => crate::report::to_json(case_control(
            BinomialSample { successes: *exposed_cases, trials: *cases },
            BinomialSample { successes: *exposed_controls, trials: *controls },
            beta_prior(prior)?,
            &c.test_options()?,
            &mut streams,
        )?)?,
        Command::Survfit { data, formula, intervals, max_intervals, curve_points, prior_shape } => {
            let (dataset, d) = design(data, formula)?;
            let opts = SurvivalOptions {
                max_intervals: *max_intervals,
                intervals: *intervals,
                prior_shape: *prior_shape,
                ci_level: ci,
                curve_points: *curve_points,
                sampler: c.sampler(SamplerConfig::default()),
            };
            let fit = fit_survival(&d, &opts)?;
            let (pooled_fit, bayes_factor) = if fit.grouping.is_some() {
                let pooled = fit_survival(&build_design(&intercept_only(&d.formula), &dataset.select_rows(&d.rows))?, &opts)?;
                let bf = survival_bayes_factor(&fit, &pooled)?;
                (Some(pooled), Some(bf))
            } else {
                (None, None)
            };
            let times = curve_grid(&fit, *curve_points);
            let curves = fit
                .groups
                .iter()
                .map(|g| survival_curve(&fit, &g.label, &times, &opts, &mut streams))
                .collect::<Result<Vec<_>>>()?;
            crate::report::to_json(SurvivalReport { fit, pooled_fit, bayes_factor, curves })?
        }
        Command::Bma { data, formula, model_prior, pvalue } => {
            let (_, d) = design(data, formula)?;
            let opts = BmaOptions {
                model_prior: model_prior.parse::<ModelPrior>()?,
                ci_level: ci,
                sampler: c.sampler(SamplerConfig::default()),
                ..BmaOptions::default()
            };
            let fit = fit_bma(&d, &opts, &mut streams)?;
            let check = if *pvalue { Some(fit.bayesian_pvalues(&PVALUE_QUANTILES, &mut streams)?) } else { None };
            crate::report::to_json(bma_report(&fit, check))?
        }
        Command::Mediate { data, mediator_formula, outcome_formula, treatment, mediator_model, outcome_model } => {
            let dataset = load(data)?;
            let opts = MediationOptions {
                mediator_model: mediator_model.parse::<SubModel>()?,
                outcome_model: outcome_model.parse::<SubModel>()?,
                ci_level: ci,
                rope_override: c.rope()?,
                sampler: c.sampler(SamplerConfig::default()),
                ..MediationOptions::default()
            };
            let fit = mediate(
                &parse_formula(mediator_formula)?,
                &parse_formula(outcome_formula)?,
                treatment,
                &dataset,
                &opts,
                &mut streams,
            )?;
            crate::report::to_json(fit)?
        }
        Command::ElicitBeta { mean, prob, value } => crate::report::to_json(find_beta_parms(*mean, *prob, *value)?)?,
        Command::ElicitInvgamma { p1, v1, p2, v2, response_variance } => {
            let target = match (response_variance, p1, v1, p2, v2) {
                (Some(s2), ..) => InvGammaTarget::RSquared { response_variance: *s2 },
                (None, Some(p1), Some(v1), Some(p2), Some(v2)) => InvGammaTarget::TwoQuantiles { p1: *p1, v1: *v1, p2: *p2, v2: *v2 },
                _ => return Err(Error::InvalidArgument("give --p1 --v1 --p2 --v2, or --response-variance".into())),
            };
            crate::report::to_json(find_invgamma_parms(target)?)?
        }
        Command::Heterosced { data, formula } => {
            let (_, d) = design(data, formula)?;
            let (factor, groups) = groups_from_design(&d)?;
            let refs: Vec<(&str, &[f64])> = groups.iter().map(|(l, y)| (l.as_str(), y.as_slice())).collect();
            crate::report::to_json(HeteroReport {
                response: d.response_name.clone(),
                factor,
                group_sizes: groups.iter().map(|(l, y)| (l.clone(), y.len())).collect(),
                bayes_factor: heteroscedasticity_bf(&refs)?,
            })?
        }
        Command::Mcplan { alpha, s, epsilon, density, variance } => crate::report::to_json(McPlanReport {
            alpha: *alpha,
            s: *s,
            epsilon: *epsilon,
            density: *density,
            variance: *variance,
            quantile_draws: quantile_sample_size(alpha / 2.0, *s, *epsilon, *density)?,
            mean_draws: mean_sample_size(*variance, *s, *epsilon)?,
            ratio: sample_size_ratio(*alpha, *variance, *density),
        })?,
    };
    Report::new(cli.command.name(), c.seed, cli, result)
}

fn emit(cli: &Cli, report: &Report, stdout: &mut dyn Write) -> Result<()> {
    let body = match cli.common.format {
        Format::Json => report.to_json_string()?,
        Format::Csv => match curves_csv(&report.result)? {
            Some(curves) => curves,
            None => summaries_csv(&report.result)?,
        },
    };
    if cli.common.pretty {
        stdout.write_all(pretty(report).as_bytes())?;
    }
    match &cli.common.output {
        Some(path) => std::fs::write(path, body)?,
        None if !cli.common.pretty => stdout.write_all(body.as_bytes())?,
        None => {}
    }
    Ok(())
}

/// Parses `args` (program name first) into options, or the rendered usage error.
pub fn parse_args<I, T>(args: I) -> std::result::Result<Cli, String>
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    Cli::try_parse_from(args).map_err(|e| e.render().to_string())
}

/// Parses `args` (program name first), runs the analysis and returns the
/// process exit code: 0 on success, 2 on user error, 3 on numerical failure.
pub fn run<I, T>(args: I, stdout: &mut dyn Write, stderr: &mut dyn Write) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            let text = e.render().to_string();
            if e.use_stderr() {
                let _ = stderr.write_all(text.as_bytes());
            } else {
                let _ = stdout.write_all(text.as_bytes());
            }
            return e.exit_code();
        }
    };
    if let Some(n) = cli.common.threads {
        // the global pool can only be set once per process
        let _ = rayon::ThreadPoolBuilder::new().num_threads(n.max(1)).build_global();
    }
    match execute(&cli).and_then(|r| emit(&cli, &r, stdout)) {
        Ok(()) => 0,
        Err(e) => {
            let _ = writeln!(stderr, "error: {e}");
            if e.is_numerical() {
                3
            } else {
                2
            }
        }
    }
}
