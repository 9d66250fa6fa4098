//! Posterior predictive p-value with a chi-square discrepancy.

use serde::Serialize;

use super::GlmFit;
use crate::error::Result;
use crate::mc_plan::{draw_fixed, proportion_sample_size, DrawMatrix};
use crate::rng::Streams;

const PILOT: usize = 500;

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct PosteriorPredictiveCheck {
    /// Probability that replicated data are less discrepant than observed.
    pub p_value: f64,
    pub draws: usize,
    /// Pairs `(T(y_rep, theta), T(y, theta))` per draw.
    #[serde(skip)]
    pub pairs: Vec<(f64, f64)>,
}

fn chi_square(y: &[f64], mu: &[f64], var: &[f64]) -> f64 {
    y.iter().zip(mu).zip(var).map(|((y, m), v)| (y - m).powi(2) / v.max(1e-300)).sum()
}

fn pairs(fit: &GlmFit, n: usize, streams: &mut Streams) -> Result<DrawMatrix> {
    let y = fit.design.y()?.as_slice().to_vec();
    let p = fit.design.p();
    let q = fit.q();
    let offset = fit.offset.clone();
    draw_fixed(
        |rng, out| {
            let mut theta = vec![0.0; q];
            fit.sample_param(rng, &mut theta);
            let aux = if fit.family.n_aux() == 1 { theta[p] } else { 0.0 };
            let mut mu = Vec::with_capacity(y.len());
            let mut var = Vec::with_capacity(y.len());
            let mut rep = Vec::with_capacity(y.len());
            for i in 0..y.len() {
                let mut eta: f64 = (0..p).map(|j| fit.design.x[(i, j)] * theta[j]).sum();
                if let Some(off) = &offset {
                    eta += off[i];
                }
                let m = fit.family.inverse_link(eta);
                mu.push(m);
                var.push(fit.family.variance(m, aux));
                rep.push(fit.family.sample(rng, eta, aux));
            }
            out[0] = chi_square(&rep, &mu, &var);
            out[1] = chi_square(&y, &mu, &var);
            Ok(())
        },
        2,
        n,
        streams,
    )
}

/// Runs a pilot, then enough draws for the p-value to be accurate to 0.01
/// with 95% probability.
pub fn bayesian_pvalue(fit: &GlmFit, streams: &mut Streams) -> Result<PosteriorPredictiveCheck> {
    let pilot = pairs(fit, PILOT, streams)?;
    let p_hat = pilot.iter_rows().filter(|r| r[0] < r[1]).count() as f64 / PILOT as f64;
    let n = proportion_sample_size(p_hat, 0.95, 0.01, PILOT)?.max(PILOT);
    let all = pairs(fit, n, streams)?;
    let pairs: Vec<(f64, f64)> = all.iter_rows().map(|r| (r[0], r[1])).collect();
    let p_value = pairs.iter().filter(|(rep, obs)| rep < obs).count() as f64 / n as f64;
    Ok(PosteriorPredictiveCheck { p_value, draws: n, pairs })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::data::Dataset;
    use crate::design::build_design;
    use crate::dist::sample_gamma;
    use crate::formula::parse_formula;
    use crate::glm::{fit_glm, Family, GlmOptions, Method};
    use rand_distr::{Distribution, Poisson};

    fn counts(overdispersed: bool, seed: u64) -> crate::design::DesignSpec {
        let mut rng = Streams::new(seed).rng();
        let x: Vec<f64> = (0..300).map(|i| f64::from(i % 10) / 10.0).collect();
        let y = x
            .iter()
            .map(|v| {
                let mu = (1.0 + 0.5 * v).exp();
                let lam = if overdispersed { sample_gamma(&mut rng, 0.7, 0.7 / mu) } else { mu };
                Poisson::new(lam.max(1e-9)).unwrap().sample(&mut rng)
            })
            .collect();
        build_design(&parse_formula("y ~ x").unwrap(), &Dataset::from_numeric(vec![("x", x), ("y", y)]).unwrap()).unwrap()
    }

    #[test]
    fn flags_overdispersion_only_when_present() {
        let opts = GlmOptions { method: Method::Laplace, ..Default::default() };
        let good = fit_glm(&counts(false, 1), Family::Poisson, &opts, &mut Streams::new(2)).unwrap();
        let bad = fit_glm(&counts(true, 1), Family::Poisson, &opts, &mut Streams::new(2)).unwrap();
        let pg = bayesian_pvalue(&good, &mut Streams::new(3)).unwrap();
        let pb = bayesian_pvalue(&bad, &mut Streams::new(3)).unwrap();
        assert!(pg.p_value < 0.95, "{}", pg.p_value);
        assert!(pb.p_value > 0.99, "{}", pb.p_value);
        assert!(pg.draws >= PILOT);
        let nb = fit_glm(&counts(true, 1), Family::NegBinomial, &opts, &mut Streams::new(2)).unwrap();
        assert!(bayesian_pvalue(&nb, &mut Streams::new(3)).unwrap().p_value < 0.95);
    }
}
