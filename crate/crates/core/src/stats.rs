//! Interval estimates and two-sample tests.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};
use statrs::distribution::{ChiSquared, ContinuousCDF, Normal};

use crate::error::{invalid, Result, UrnError};

/// Wilson score interval for `successes` out of `trials` at confidence `level`.
pub fn wilson_interval(successes: u64, trials: u64, level: f64) -> Result<(f64, f64)> {
    if trials == 0 {
        return invalid("trials must be at least 1");
    }
    if successes > trials {
        return invalid("successes cannot exceed trials");
    }
    if !(level > 0.0 && level < 1.0) {
        return invalid("level must lie in (0, 1)");
    }
    let z = Normal::standard().inverse_cdf(0.5 + level / 2.0);
    let n = trials as f64;
    let phat = successes as f64 / n;
    let z2 = z * z;
    let denom = 1.0 + z2 / n;
    let center = (phat + z2 / (2.0 * n)) / denom;
    let half = z * (phat * (1.0 - phat) / n + z2 / (4.0 * n * n)).sqrt() / denom;
    let lo = if successes == 0 {
        0.0
    } else {
        (center - half).max(0.0)
    };
    let hi = if successes == trials {
        1.0
    } else {
        (center + half).min(1.0)
    };
    Ok((lo, hi))
}

/// Category counts of one outcome in the two samples.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CategoryCount {
    pub outcome: Vec<u64>,
    pub count_a: u64,
    pub count_b: u64,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TestMethod {
    ChiSquare,
    KolmogorovSmirnov,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TestReport {
    pub method: TestMethod,
    pub statistic: f64,
    pub dof: Option<u64>,
    pub p_value: f64,
    pub n_a: u64,
    pub n_b: u64,
    pub categories: Vec<CategoryCount>,
}

/// Expected cell count below which categories are pooled.
const MIN_EXPECTED: f64 = 5.0;

/// Chi-square test of homogeneity between two samples of discrete outcomes.
///
/// Categories whose expected count falls below 5 in either sample are pooled
/// into one cell before the statistic is formed.
pub fn chi_square_homogeneity(a: &[Vec<u64>], b: &[Vec<u64>]) -> Result<TestReport> {
    let mut table: BTreeMap<&[u64], (u64, u64)> = BTreeMap::new();
    for x in a {
        table.entry(x.as_slice()).or_default().0 += 1;
    }
    for x in b {
        table.entry(x.as_slice()).or_default().1 += 1;
    }
    let (na, nb) = (a.len() as f64, b.len() as f64);
    let n = na + nb;
    let mut cells: Vec<(u64, u64)> = Vec::new();
    let mut pooled = (0u64, 0u64);
    for &(ca, cb) in table.values() {
        let tot = (ca + cb) as f64;
        if tot * na.min(nb) / n < MIN_EXPECTED {
            pooled.0 += ca;
            pooled.1 += cb;
        } else {
            cells.push((ca, cb));
        }
    }
    if pooled.0 + pooled.1 > 0 {
        cells.push(pooled);
    }
    let categories = table
        .iter()
        .map(|(k, &(ca, cb))| CategoryCount {
            outcome: k.to_vec(),
            count_a: ca,
            count_b: cb,
        })
        .collect();
    let mut stat = 0.0;
    for &(ca, cb) in &cells {
        let tot = (ca + cb) as f64;
        let (ea, eb) = (tot * na / n, tot * nb / n);
        stat += (ca as f64 - ea).powi(2) / ea + (cb as f64 - eb).powi(2) / eb;
    }
    let dof = cells.len().saturating_sub(1) as u64;
    let p_value = if dof == 0 {
        1.0
    } else {
        ChiSquared::new(dof as f64)
            .map_err(|e| UrnError::Internal(e.to_string()))?
            .sf(stat)
    };
    Ok(TestReport {
        method: TestMethod::ChiSquare,
        statistic: stat,
        dof: Some(dof),
        p_value,
        n_a: a.len() as u64,
        n_b: b.len() as u64,
        categories,
    })
}

/// Asymptotic Kolmogorov survival function `P(K > lambda)`.
fn kolmogorov_sf(lambda: f64) -> f64 {
    if lambda < 0.2 {
        return 1.0;
    }
    let mut sum = 0.0;
    for k in 1..=100 {
        let k = k as f64;
        let term = (-2.0 * k * k * lambda * lambda).exp();
        sum += if k as u64 % 2 == 1 { term } else { -term };
        if term < 1e-16 {
            break;
        }
    }
    (2.0 * sum).clamp(0.0, 1.0)
}

/// Two-sample Kolmogorov–Smirnov test with the asymptotic p-value.
pub fn ks_two_sample(a: &[f64], b: &[f64]) -> Result<TestReport> {
    if a.is_empty() || b.is_empty() {
        return invalid("both samples must be non-empty");
    }
    if a.iter().chain(b).any(|v| v.is_nan()) {
        return invalid("samples contain NaN");
    }
    let mut xs = a.to_vec();
    let mut ys = b.to_vec();
    xs.sort_by(f64::total_cmp);
    ys.sort_by(f64::total_cmp);
    let (na, nb) = (xs.len(), ys.len());
    let (mut i, mut j, mut d) = (0usize, 0usize, 0.0f64);
    while i < na && j < nb {
        let t = xs[i].min(ys[j]);
        while i < na && xs[i] <= t {
            i += 1;
        }
        while j < nb && ys[j] <= t {
            j += 1;
        }
        d = d.max((i as f64 / na as f64 - j as f64 / nb as f64).abs());
    }
    let ne = (na * nb) as f64 / (na + nb) as f64;
    let lambda = (ne.sqrt() + 0.12 + 0.11 / ne.sqrt()) * d;
    Ok(TestReport {
        method: TestMethod::KolmogorovSmirnov,
        statistic: d,
        dof: None,
        p_value: kolmogorov_sf(lambda),
        n_a: na as u64,
        n_b: nb as u64,
        categories: Vec::new(),
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn wilson_examples() {
        let (lo, hi) = wilson_interval(0, 100, 0.95).unwrap();
        assert_eq!(lo, 0.0);
        // z^2 / (n + z^2) with z = 1.959964
        assert!((hi - 0.036995).abs() < 1e-5, "{hi}");
        let (lo, hi) = wilson_interval(50, 100, 0.95).unwrap();
        assert!(((lo + hi) / 2.0 - 0.5).abs() < 1e-12);
        assert_eq!(wilson_interval(100, 100, 0.95).unwrap().1, 1.0);
        assert!(wilson_interval(3, 2, 0.95).is_err());
        assert!(wilson_interval(0, 0, 0.95).is_err());
    }

    #[test]
    fn chi_square_on_known_table() {
        // 2x2 table [[30, 10], [20, 20]]: statistic 5.3333, p = 0.020921
        let a: Vec<Vec<u64>> = (0..40).map(|i| vec![(i >= 30) as u64]).collect();
        let b: Vec<Vec<u64>> = (0..40).map(|i| vec![(i >= 20) as u64]).collect();
        let r = chi_square_homogeneity(&a, &b).unwrap();
        assert!((r.statistic - 16.0 / 3.0).abs() < 1e-12);
        assert!((r.p_value - 0.020921335337794).abs() < 1e-9);
        assert_eq!(r.dof, Some(1));
    }

    #[test]
    fn ks_examples() {
        let a: Vec<f64> = (0..1000).map(|i| i as f64 / 1000.0).collect();
        let same = ks_two_sample(&a, &a).unwrap();
        assert_eq!(same.statistic, 0.0);
        assert_eq!(same.p_value, 1.0);
        let shifted: Vec<f64> = a.iter().map(|x| x + 0.2).collect();
        let r = ks_two_sample(&a, &shifted).unwrap();
        assert!((r.statistic - 0.2).abs() <= 1.5e-3, "{}", r.statistic);
        assert!(r.p_value < 1e-10);
        // lambda = 1.36 is the classical 5% point
        assert!((kolmogorov_sf(1.358) - 0.05).abs() < 1e-3);
    }
}
