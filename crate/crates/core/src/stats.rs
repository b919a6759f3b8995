//! Goodness-of-fit statistics used by the statistical gates.

use serde::Serialize;
use statrs::distribution::{ChiSquared, ContinuousCDF};

use crate::error::{Error, Result};

/// Sample mean and standard error `s/√n`.
pub fn mean_stderr(values: &[f64]) -> (f64, f64) {
    let n = values.len();
    if n == 0 {
        return (f64::NAN, f64::NAN);
    }
    let mean = values.iter().sum::<f64>() / n as f64;
    if n < 2 {
        return (mean, f64::INFINITY);
    }
    let var = values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (n - 1) as f64;
    (mean, (var / n as f64).sqrt())
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct ChiSquare {
    pub statistic: f64,
    pub dof: usize,
    pub p_value: f64,
    /// Bins left after pooling neighbours with expected count below 5.
    pub bins: usize,
}

/// Pearson test of `observed` counts against category probabilities.
///
/// `probs` is rescaled to sum to one. Adjacent categories are pooled left
/// to right until each pooled bin expects at least 5 counts; a short tail
/// is merged into the last bin.
pub fn chi_square(observed: &[u64], probs: &[f64]) -> Result<ChiSquare> {
    if observed.len() != probs.len() || observed.is_empty() {
        return Err(Error::DimensionMismatch {
            expected: probs.len(),
            found: observed.len(),
            context: "chi-square categories",
        });
    }
    if probs.iter().any(|p| !(*p >= 0.0)) {
        return Err(Error::InvalidArgument("probabilities must be non-negative".into()));
    }
    let total_p: f64 = probs.iter().sum();
    let n: u64 = observed.iter().sum();
    if !(total_p > 0.0) || n == 0 {
        return Err(Error::InvalidArgument("empty chi-square test".into()));
    }
    let mut pooled: Vec<(f64, f64)> = Vec::new();
    let (mut o_acc, mut e_acc) = (0.0, 0.0);
    for (&o, &p) in observed.iter().zip(probs) {
        o_acc += o as f64;
        e_acc += n as f64 * p / total_p;
        if e_acc >= 5.0 {
            pooled.push((o_acc, e_acc));
            o_acc = 0.0;
            e_acc = 0.0;
        }
    }
    if o_acc > 0.0 || e_acc > 0.0 {
        match pooled.last_mut() {
            Some(last) => {
                last.0 += o_acc;
                last.1 += e_acc;
            }
            None => pooled.push((o_acc, e_acc)),
        }
    }
    let statistic: f64 = pooled.iter().map(|(o, e)| (o - e).powi(2) / e).sum();
    let dof = pooled.len().saturating_sub(1);
    let p_value = if dof == 0 {
        1.0
    } else {
        let dist = ChiSquared::new(dof as f64).map_err(|e| Error::InvalidArgument(e.to_string()))?;
        dist.sf(statistic)
    };
    Ok(ChiSquare {
        statistic,
        dof,
        p_value,
        bins: pooled.len(),
    })
}

fn sorted(v: &[f64]) -> Result<Vec<f64>> {
    if v.is_empty() || v.iter().any(|x| x.is_nan()) {
        return Err(Error::InvalidArgument("KS sample must be non-empty and NaN-free".into()));
    }
    let mut s = v.to_vec();
    s.sort_by(|a, b| a.partial_cmp(b).unwrap());
    Ok(s)
}

/// Two-sample Kolmogorov-Smirnov distance. Infinite values (censored
/// observations) are allowed and compare equal to each other.
pub fn ks_two_sample(a: &[f64], b: &[f64]) -> Result<f64> {
    let (a, b) = (sorted(a)?, sorted(b)?);
    let (na, nb) = (a.len() as f64, b.len() as f64);
    let (mut i, mut j) = (0, 0);
    let mut d: f64 = 0.0;
    while i < a.len() && j < b.len() {
        let x = a[i].min(b[j]);
        while i < a.len() && a[i] == x {
            i += 1;
        }
        while j < b.len() && b[j] == x {
            j += 1;
        }
        d = d.max((i as f64 / na - j as f64 / nb).abs());
    }
    Ok(d)
}

/// One-sample KS distance against a continuous CDF.
pub fn ks_one_sample(sample: &[f64], cdf: impl Fn(f64) -> f64) -> Result<f64> {
    let s = sorted(sample)?;
    let n = s.len() as f64;
    Ok(s.iter().enumerate().fold(0.0f64, |d, (i, &x)| {
        let f = cdf(x);
        d.max((i as f64 + 1.0) / n - f).max(f - i as f64 / n)
    }))
}

/// Asymptotic p-value of a KS distance `d` with effective size `n`
/// (`n·m/(n+m)` for two samples), with Stephens' small-sample correction.
pub fn ks_p_value(d: f64, n: f64) -> f64 {
    let sn = n.sqrt();
    let lambda = (sn + 0.12 + 0.11 / sn) * d;
    if lambda < 1e-3 {
        return 1.0;
    }
    let mut sum = 0.0;
    for k in 1..=100 {
        let k = k as f64;
        let term = 2.0 * (-1f64).powf(k - 1.0) * (-2.0 * k * k * lambda * lambda).exp();
        sum += term;
        if term.abs() < 1e-16 {
            break;
        }
    }
    sum.clamp(0.0, 1.0)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn mean_and_stderr() {
        let (m, s) = mean_stderr(&[1.0, 2.0, 3.0, 4.0]);
        assert_eq!(m, 2.5);
        assert!((s - (1.666_666_666_666_666_7f64 / 4.0).sqrt()).abs() < 1e-15);
    }

    #[test]
    fn chi_square_perfect_fit() {
        let r = chi_square(&[30, 70], &[0.3, 0.7]).unwrap();
        assert_eq!(r.statistic, 0.0);
        assert_eq!(r.dof, 1);
        assert!((r.p_value - 1.0).abs() < 1e-12);
    }

    #[test]
    fn chi_square_known_value() {
        // (60−50)²/50 + (40−50)²/50 = 4, df 1: p = 0.0455
        let r = chi_square(&[60, 40], &[0.5, 0.5]).unwrap();
        assert!((r.statistic - 4.0).abs() < 1e-12);
        assert!((r.p_value - 0.0455).abs() < 1e-4);
    }

    #[test]
    fn chi_square_pools_sparse_bins() {
        let r = chi_square(&[1, 0, 2, 50, 47], &[0.01, 0.01, 0.01, 0.5, 0.47]).unwrap();
        assert_eq!(r.bins, 2);
    }

    #[test]
    fn ks_distances() {
        assert_eq!(ks_two_sample(&[1.0, 2.0], &[1.0, 2.0]).unwrap(), 0.0);
        assert_eq!(ks_two_sample(&[1.0, 2.0], &[3.0, 4.0]).unwrap(), 1.0);
        let inf = f64::INFINITY;
        assert_eq!(ks_two_sample(&[1.0, inf], &[1.0, inf]).unwrap(), 0.0);
        let d = ks_one_sample(&[0.5], |x| x).unwrap();
        assert_eq!(d, 0.5);
    }

    #[test]
    fn ks_p_value_reference_points() {
        // Kolmogorov distribution: P(K > 1.3581) = 0.05
        let n: f64 = 1e8;
        assert!((ks_p_value(1.3581 / n.sqrt(), n) - 0.05).abs() < 1e-3);
        assert_eq!(ks_p_value(0.0, 100.0), 1.0);
        assert!(ks_p_value(0.5, 1000.0) < 1e-10);
    }
}
