use bayesics::data::{Column, Dataset};
use bayesics::design::build_design;
use bayesics::dist::sample_normal;
use bayesics::fixtures::quadratic_dataset;
use bayesics::formula::parse_formula;
use bayesics::glm::Family;
use bayesics::linear::{fit_lm, LmPrior};
use bayesics::np_boot::{fit_np_glm, NpOptions};
use bayesics::rng::Streams;

fn width(lower: f64, upper: f64) -> f64 {
    upper - lower
}

#[test]
fn well_specified_large_sample_agrees_with_parametric() {
    let mut rng = Streams::new(11).rng();
    let x: Vec<f64> = (0..500).map(|_| sample_normal(&mut rng)).collect();
    let y: Vec<f64> = x.iter().map(|&v| 1.0 + 0.5 * v + sample_normal(&mut rng)).collect();
    let data = Dataset::new(vec![
        ("x".into(), Column::Numeric(x.into_iter().map(Some).collect())),
        ("y".into(), Column::Numeric(y.into_iter().map(Some).collect())),
    ])
    .unwrap();
    let d = build_design(&parse_formula("y ~ x").unwrap(), &data).unwrap();
    let lm = fit_lm(&d, &LmPrior::ZellnerG).unwrap().summaries(0.95, None).unwrap();
    let np = fit_np_glm(&d, Family::Gaussian, &NpOptions::default(), &mut Streams::new(3))
        .unwrap()
        .summaries(0.95, None)
        .unwrap();
    let ratio = width(np[1].ci_lower, np[1].ci_upper) / width(lm[1].ci_lower, lm[1].ci_upper);
    assert!((ratio - 1.0).abs() < 0.2, "width ratio {ratio}");
    assert!((np[1].post_mean - lm[1].post_mean).abs() < 0.25 * width(lm[1].ci_lower, lm[1].ci_upper));
}

#[test]
fn bands_widen_at_covariate_extremes() {
    let d = build_design(&parse_formula("y ~ x").unwrap(), &quadratic_dataset(5)).unwrap();
    let fit = fit_np_glm(&d, Family::Gaussian, &NpOptions::default(), &mut Streams::new(5)).unwrap();
    let band = fit.credible_band("x", None, 0.95).unwrap();
    let widths: Vec<f64> = band.points.iter().map(|p| width(p.lower, p.upper)).collect();
    let narrowest = widths.iter().copied().fold(f64::INFINITY, f64::min);
    assert!(widths[0] > narrowest && widths[widths.len() - 1] > narrowest);
    assert!(band.points.iter().all(|p| p.lower <= p.center && p.center <= p.upper));
}
