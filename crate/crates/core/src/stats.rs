//! Summary statistics used by the studies and the acceptance checks.

use alloc::vec::Vec;

// no_std float math; the lint misses uses that shadow unstable inherent methods.
#[allow(unused_imports)]
use num_traits::Float;
use rand::Rng;

use crate::error::{Error, Result};

pub fn mean(xs: &[f64]) -> Result<f64> {
    if xs.is_empty() {
        return Err(Error::Empty("mean of no values"));
    }
    Ok(xs.iter().sum::<f64>() / xs.len() as f64)
}

/// Sample standard deviation (n - 1 denominator); 0 for a single value.
pub fn std_dev(xs: &[f64]) -> Result<f64> {
    let m = mean(xs)?;
    if xs.len() < 2 {
        return Ok(0.0);
    }
    let ss: f64 = xs.iter().map(|x| (x - m) * (x - m)).sum();
    Ok((ss / (xs.len() - 1) as f64).sqrt())
}

/// Percentile with linear interpolation between closest ranks, `p` in [0, 100].
pub fn percentile(xs: &[f64], p: f64) -> Result<f64> {
    if xs.is_empty() {
        return Err(Error::Empty("percentile of no values"));
    }
    if !(0.0..=100.0).contains(&p) {
        return Err(Error::InvalidConfig(alloc::format!("percentile {p}")));
    }
    let mut v = xs.to_vec();
    v.sort_by(f64::total_cmp);
    let pos = p / 100.0 * (v.len() - 1) as f64;
    let lo = pos.floor() as usize;
    let hi = pos.ceil() as usize;
    Ok(v[lo] + (v[hi] - v[lo]) * (pos - lo as f64))
}

/// Kendall rank correlation (tau-b, tie corrected).
pub fn kendall_tau(a: &[f64], b: &[f64]) -> Result<f64> {
    if a.len() != b.len() {
        return Err(Error::SizeMismatch(alloc::format!("{} vs {}", a.len(), b.len())));
    }
    if a.len() < 2 {
        return Err(Error::TooFewRecords(a.len()));
    }
    let (mut concordant, mut discordant, mut ties_a, mut ties_b) = (0i64, 0i64, 0i64, 0i64);
    for i in 0..a.len() {
        for j in i + 1..a.len() {
            let da = a[i].total_cmp(&a[j]) as i64;
            let db = b[i].total_cmp(&b[j]) as i64;
            match (da, db) {
                (0, 0) => {}
                (0, _) => ties_a += 1,
                (_, 0) => ties_b += 1,
                _ if da == db => concordant += 1,
                _ => discordant += 1,
            }
        }
    }
    let n1 = (concordant + discordant + ties_a) as f64;
    let n2 = (concordant + discordant + ties_b) as f64;
    if n1 == 0.0 || n2 == 0.0 {
        return Ok(0.0);
    }
    Ok((concordant - discordant) as f64 / (n1 * n2).sqrt())
}

pub fn mean_abs_error(pred: &[f64], truth: &[f64]) -> Result<f64> {
    if pred.len() != truth.len() {
        return Err(Error::SizeMismatch(alloc::format!("{} vs {}", pred.len(), truth.len())));
    }
    let d: Vec<f64> = pred.iter().zip(truth).map(|(p, t)| (p - t).abs()).collect();
    mean(&d)
}

/// Percentile bootstrap interval for the mean of `xs` at level `1 - alpha`.
pub fn bootstrap_mean_ci<R: Rng + ?Sized>(xs: &[f64], resamples: usize, alpha: f64, rng: &mut R) -> Result<(f64, f64)> {
    if xs.is_empty() {
        return Err(Error::Empty("bootstrap of no values"));
    }
    if resamples == 0 || !(0.0..1.0).contains(&alpha) {
        return Err(Error::InvalidConfig(alloc::format!("resamples {resamples} alpha {alpha}")));
    }
    let means: Vec<f64> = (0..resamples)
        .map(|_| (0..xs.len()).map(|_| xs[rng.random_range(0..xs.len())]).sum::<f64>() / xs.len() as f64)
        .collect();
    Ok((percentile(&means, 50.0 * alpha)?, percentile(&means, 100.0 - 50.0 * alpha)?))
}

/// Exact expected minimum of `k` values drawn without replacement from `population`.
pub fn expected_min_without_replacement(population: &[f64], k: usize) -> Result<f64> {
    let n = population.len();
    if k == 0 || k > n {
        return Err(Error::TooManySamples { requested: k, available: n });
    }
    let mut v = population.to_vec();
    v.sort_by(f64::total_cmp);
    // P(min is the i-th smallest) = C(n-i, k-1) / C(n, k), built by ratios.
    let mut p = k as f64 / n as f64;
    let mut total = 0.0;
    for i in 1..=n - k + 1 {
        total += p * v[i - 1];
        p *= (n - i + 1 - k) as f64 / (n - i) as f64;
    }
    Ok(total)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::seed;

    #[test]
    fn percentiles_match_linear_rule() {
        let xs = [3.0, 1.0, 4.0, 1.0, 5.0, 9.0, 2.0, 6.0];
        // sorted 1 1 2 3 4 5 6 9; p30 at 2.1 -> 2 + 0.1, p70 at 4.9 -> 4 + 0.9
        assert!((percentile(&xs, 30.0).unwrap() - 2.1).abs() < 1e-12);
        assert!((percentile(&xs, 70.0).unwrap() - 4.9).abs() < 1e-12);
        assert_eq!(percentile(&xs, 0.0).unwrap(), 1.0);
        assert_eq!(percentile(&xs, 100.0).unwrap(), 9.0);
    }

    #[test]
    fn mean_and_std() {
        assert_eq!(mean(&[1.0, 2.0, 3.0]).unwrap(), 2.0);
        assert!((std_dev(&[2.0, 4.0, 4.0, 4.0, 5.0, 5.0, 7.0, 9.0]).unwrap() - (32.0f64 / 7.0).sqrt()).abs() < 1e-12);
        assert!(mean(&[]).is_err());
    }

    #[test]
    fn kendall_known_values() {
        let a = [1.0, 2.0, 3.0, 4.0];
        assert_eq!(kendall_tau(&a, &a).unwrap(), 1.0);
        assert_eq!(kendall_tau(&a, &[4.0, 3.0, 2.0, 1.0]).unwrap(), -1.0);
        // 5 concordant, 1 discordant over 6 pairs.
        assert!((kendall_tau(&a, &[1.0, 3.0, 2.0, 4.0]).unwrap() - 4.0 / 6.0).abs() < 1e-12);
    }

    #[test]
    fn expected_min_matches_enumeration() {
        let pop = [0.5, 0.1, 0.9, 0.3, 0.7];
        // all 10 pairs: min averaged by brute force
        let mut s = 0.0;
        for i in 0..5 {
            for j in i + 1..5 {
                s += f64::min(pop[i], pop[j]);
            }
        }
        assert!((expected_min_without_replacement(&pop, 2).unwrap() - s / 10.0).abs() < 1e-12);
        assert!((expected_min_without_replacement(&pop, 5).unwrap() - 0.1).abs() < 1e-12);
        assert!((expected_min_without_replacement(&pop, 1).unwrap() - 0.5).abs() < 1e-12);
    }

    #[test]
    fn bootstrap_brackets_mean() {
        let xs: Vec<f64> = (0..50).map(|i| i as f64 / 10.0).collect();
        let (lo, hi) = bootstrap_mean_ci(&xs, 500, 0.05, &mut seed::rng(0)).unwrap();
        let m = mean(&xs).unwrap();
        assert!(lo < m && m < hi);
    }
}
