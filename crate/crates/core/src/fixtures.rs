//! Seeded simulated datasets used by the acceptance suite and shipped as CSV.

use rand::Rng as _;
use rand_distr::{Distribution, Exp1, Poisson};

use crate::data::{Column, Dataset};
use crate::dist::{sample_gamma, sample_normal};
use crate::rng::Streams;

/// Seed of the shipped copies of both simulated datasets.
pub const FIXTURE_SEED: u64 = 2026;

pub const NEGBIN_N: usize = 500;
pub const NEGBIN_SIZE: f64 = 0.7;
pub const QUADRATIC_N: usize = 100;

/// Overdispersed counts: `outcome ~ NB(mu, size 0.7)` with
/// `mu = exp(-2 + x1 + 2 [x3 in {d, e}] + time)`, x1 and x2 standard normal,
/// x3 five equal blocks `a..e`, time standard exponential.
pub fn negbin_dataset(seed: u64) -> Dataset {
    let mut rng = Streams::new(seed).rng();
    let n = NEGBIN_N;
    let x1: Vec<f64> = (0..n).map(|_| sample_normal(&mut rng)).collect();
    let x2: Vec<f64> = (0..n).map(|_| sample_normal(&mut rng)).collect();
    let x3: Vec<Option<&str>> = (0..n).map(|i| Some(["a", "b", "c", "d", "e"][i / (n / 5)])).collect();
    let time: Vec<f64> = (0..n).map(|_| Exp1.sample(&mut rng)).collect();
    let outcome: Vec<f64> = (0..n)
        .map(|i| {
            let high = matches!(x3[i], Some("d" | "e"));
            let mu = (-2.0 + x1[i] + 2.0 * f64::from(u8::from(high)) + time[i]).exp();
            let lambda = sample_gamma(&mut rng, NEGBIN_SIZE, NEGBIN_SIZE / mu);
            if lambda <= 0.0 {
                0.0
            } else {
                Poisson::new(lambda).map(|p| p.sample(&mut rng)).unwrap_or(0.0)
            }
        })
        .collect();
    let num = |v: Vec<f64>| Column::Numeric(v.into_iter().map(Some).collect());
    Dataset::new(vec![
        ("x1".into(), num(x1)),
        ("x2".into(), num(x2)),
        ("x3".into(), Column::categorical(&x3)),
        ("time".into(), num(time)),
        ("outcome".into(), num(outcome)),
    ])
    .expect("columns have equal length")
}

/// Skewed non-linear regression data: `y = 20 x^2 + Gamma(2, rate 0.5)`,
/// `x ~ U(0, 1)`.
pub fn quadratic_dataset(seed: u64) -> Dataset {
    let mut rng = Streams::new(seed).rng();
    let x: Vec<f64> = (0..QUADRATIC_N).map(|_| rng.gen::<f64>()).collect();
    let y: Vec<f64> = x.iter().map(|v| 20.0 * v * v + sample_gamma(&mut rng, 2.0, 0.5)).collect();
    Dataset::from_numeric(vec![("x", x), ("y", y)]).expect("columns have equal length")
}
