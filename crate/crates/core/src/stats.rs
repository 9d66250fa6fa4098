//! Small descriptive-statistics helpers shared across modules.

pub fn mean(x: &[f64]) -> f64 {
    x.iter().sum::<f64>() / x.len() as f64
}

/// Sample variance (n - 1 denominator).
pub fn variance(x: &[f64]) -> f64 {
    let m = mean(x);
    x.iter().map(|v| (v - m).powi(2)).sum::<f64>() / (x.len() as f64 - 1.0)
}

pub fn sd(x: &[f64]) -> f64 {
    variance(x).sqrt()
}

pub fn sorted(x: &[f64]) -> Vec<f64> {
    let mut v = x.to_vec();
    v.sort_by(f64::total_cmp);
    v
}

/// Type-7 (linear interpolation) quantile of sorted data.
pub fn quantile_sorted(sorted: &[f64], p: f64) -> f64 {
    let n = sorted.len();
    if n == 1 {
        return sorted[0];
    }
    let h = (n as f64 - 1.0) * p.clamp(0.0, 1.0);
    let lo = h.floor() as usize;
    let hi = (lo + 1).min(n - 1);
    sorted[lo] + (h - lo as f64) * (sorted[hi] - sorted[lo])
}

pub fn quantile(x: &[f64], p: f64) -> f64 {
    quantile_sorted(&sorted(x), p)
}

/// Weighted quantile: smallest value whose cumulative normalized weight reaches `p`.
pub fn weighted_quantile(values: &[f64], weights: &[f64], p: f64) -> f64 {
    let mut idx: Vec<usize> = (0..values.len()).collect();
    idx.sort_by(|&a, &b| values[a].total_cmp(&values[b]));
    let total: f64 = weights.iter().sum();
    let mut acc = 0.0;
    for &i in &idx {
        acc += weights[i] / total;
        if acc >= p {
            return values[i];
        }
    }
    values[*idx.last().unwrap()]
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn type7_matches_r() {
        // quantile(c(1, 2, 4, 8), c(0.1, 0.5, 0.9), type = 7)
        let x = [1.0, 2.0, 4.0, 8.0];
        assert!((quantile_sorted(&x, 0.1) - 1.3).abs() < 1e-12);
        assert!((quantile_sorted(&x, 0.5) - 3.0).abs() < 1e-12);
        assert!((quantile_sorted(&x, 0.9) - 6.8).abs() < 1e-12);
    }

    #[test]
    fn weighted_quantile_equal_weights() {
        let x = [3.0, 1.0, 2.0, 4.0];
        assert_eq!(weighted_quantile(&x, &[1.0; 4], 0.5), 2.0);
        assert_eq!(weighted_quantile(&x, &[0.0, 0.0, 0.0, 1.0], 0.1), 4.0);
    }
}
