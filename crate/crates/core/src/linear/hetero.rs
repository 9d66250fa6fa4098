//! Bayes factor for equal versus unequal group variances.

use nalgebra::{DMatrix, DVector};

use super::groups::{fit_group, GroupPrior};
use super::{nig_update, r_squared_invgamma, NigPrior, PriorKind, INTERCEPT_PRECISION};
use crate::error::{ensure, Result};
use crate::stats;
use crate::summary::BayesFactor;

/// Evidence for one shared variance (with separate means) against separate
/// variances, both with matched normal–inverse-gamma priors.
pub fn heteroscedasticity_bf(groups: &[(&str, &[f64])]) -> Result<BayesFactor> {
    ensure!(groups.len() >= 2, InvalidArgument, "need at least two groups, got {}", groups.len());
    for (label, y) in groups {
        ensure!(y.len() >= 2, Data, "group '{label}' needs at least two observations");
        ensure!(stats::variance(y) > 0.0, Data, "group '{label}' has zero variance");
    }
    let all: Vec<f64> = groups.iter().flat_map(|(_, y)| y.iter().copied()).collect();
    let center = stats::mean(&all);
    let (a, b) = r_squared_invgamma(stats::variance(&all))?;
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
    let shared = NigPrior {
        mu: DVector::from_element(k, center),
        v: DMatrix::identity(k, k) * INTERCEPT_PRECISION,
        a,
        b,
        kind: PriorKind::Custom,
        g: None,
    };
    let (_, ml_equal) = nig_update(&x, &DVector::from_vec(all), &shared)?;
    let prior = GroupPrior { mean: center, precision: INTERCEPT_PRECISION, a, b };
    let mut ml_unequal = 0.0;
    for (label, y) in groups {
        ml_unequal += fit_group(label, y, &prior)?.log_marginal_likelihood;
    }
    Ok(BayesFactor::from_ln(
        ml_equal - ml_unequal,
        "equal variances vs unequal variances",
        "in favor of equal variances",
        "in favor of unequal variances",
    ))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dist::sample_normal;
    use crate::rng::Streams;

    fn normals(rng: &mut crate::rng::Rng, n: usize, sd: f64) -> Vec<f64> {
        (0..n).map(|_| sd * sample_normal(rng)).collect()
    }

    #[test]
    fn identical_groups_favor_equal() {
        let y = [1.0, 2.5, 3.0, 4.2, 0.7, 2.2];
        assert!(heteroscedasticity_bf(&[("a", &y), ("b", &y)]).unwrap().value >= 1.0);
    }

    #[test]
    fn same_distribution_usually_equal() {
        let mut streams = Streams::new(77);
        let hits = (0..200)
            .filter(|_| {
                let mut rng = streams.rng();
                let a = normals(&mut rng, 30, 1.0);
                let b = normals(&mut rng, 30, 1.0);
                heteroscedasticity_bf(&[("a", &a), ("b", &b)]).unwrap().value > 1.0
            })
            .count();
        assert!(hits >= 140, "{hits}");
    }

    #[test]
    fn very_different_variances_decisive() {
        let mut streams = Streams::new(78);
        let hits = (0..200)
            .filter(|_| {
                let mut rng = streams.rng();
                let a = normals(&mut rng, 100, 1.0);
                let b = normals(&mut rng, 100, 5.0);
                heteroscedasticity_bf(&[("a", &a), ("b", &b)]).unwrap().log10_value < -2.0
            })
            .count();
        assert!(hits >= 190, "{hits}");
    }
}
