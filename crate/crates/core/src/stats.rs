//! Correlation coefficients, Welch's t-test and percentiles.
//!
//! p-values use the usual asymptotic approximations: Student's t with n − 2
//! degrees of freedom for Pearson and Spearman, the tie-corrected normal
//! approximation for Kendall's tau-b and the Welch–Satterthwaite t for the
//! two-sample test.

use serde::{Deserialize, Serialize};
use statrs::distribution::{ContinuousCDF, Normal, StudentsT};
use thiserror::Error;

#[derive(Debug, Error, PartialEq)]
pub enum StatsError {
    #[error("length mismatch: {0} vs {1}")]
    LengthMismatch(usize, usize),
    #[error("need at least {needed} observations, got {got}")]
    TooFew { needed: usize, got: usize },
    #[error("undefined correlation: zero variance")]
    UndefinedCorrelation,
    #[error("undefined correlation: all values tied")]
    AllTied,
    #[error("percentile of an empty sample")]
    Empty,
    #[error("quantile {0} outside [0, 100]")]
    InvalidQuantile(f64),
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CorrelationResult {
    pub coefficient: f64,
    pub p_value: f64,
    pub n: usize,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct WelchResult {
    pub t: f64,
    pub df: f64,
    pub p: f64,
}

pub fn mean(values: &[f64]) -> f64 {
    values.iter().sum::<f64>() / values.len() as f64
}

/// Population standard deviation (divides by n).
pub fn population_std(values: &[f64]) -> f64 {
    if values.is_empty() {
        return 0.0;
    }
    let m = mean(values);
    (values.iter().map(|v| (v - m).powi(2)).sum::<f64>() / values.len() as f64).sqrt()
}

/// Unbiased sample variance (divides by n − 1).
pub fn sample_variance(values: &[f64]) -> f64 {
    let m = mean(values);
    values.iter().map(|v| (v - m).powi(2)).sum::<f64>() / (values.len() as f64 - 1.0)
}

fn check_pair(x: &[f64], y: &[f64]) -> Result<usize, StatsError> {
    if x.len() != y.len() {
        return Err(StatsError::LengthMismatch(x.len(), y.len()));
    }
    if x.len() < 2 {
        return Err(StatsError::TooFew { needed: 2, got: x.len() });
    }
    Ok(x.len())
}

fn two_sided_t(t: f64, df: f64) -> f64 {
    if !t.is_finite() {
        return 0.0;
    }
    if df <= 0.0 {
        return 1.0;
    }
    let dist = StudentsT::new(0.0, 1.0, df).expect("positive degrees of freedom");
    (2.0 * dist.sf(t.abs())).min(1.0)
}

fn two_sided_normal(z: f64) -> f64 {
    if !z.is_finite() {
        return 0.0;
    }
    let dist = Normal::new(0.0, 1.0).expect("standard normal");
    (2.0 * dist.sf(z.abs())).min(1.0)
}

fn correlation_p(r: f64, n: usize) -> f64 {
    if n <= 2 {
        return 1.0;
    }
    if r.abs() >= 1.0 {
        return 0.0;
    }
    let df = (n - 2) as f64;
    two_sided_t(r * (df / (1.0 - r * r)).sqrt(), df)
}

/// Pearson product-moment correlation.
pub fn pearson(x: &[f64], y: &[f64]) -> Result<CorrelationResult, StatsError> {
    let n = check_pair(x, y)?;
    let (mx, my) = (mean(x), mean(y));
    let (mut sxy, mut sxx, mut syy) = (0.0, 0.0, 0.0);
    for (a, b) in x.iter().zip(y) {
        let (dx, dy) = (a - mx, b - my);
        sxy += dx * dy;
        sxx += dx * dx;
        syy += dy * dy;
    }
    if sxx == 0.0 || syy == 0.0 {
        return Err(StatsError::UndefinedCorrelation);
    }
    let r = (sxy / (sxx.sqrt() * syy.sqrt())).clamp(-1.0, 1.0);
    Ok(CorrelationResult {
        coefficient: r,
        p_value: correlation_p(r, n),
        n,
    })
}

/// 1-based ranks with ties sharing their mean rank.
pub fn average_ranks(values: &[f64]) -> Vec<f64> {
    let mut order: Vec<usize> = (0..values.len()).collect();
    order.sort_by(|&a, &b| values[a].total_cmp(&values[b]));
    let mut ranks = vec![0.0; values.len()];
    let mut i = 0;
    while i < order.len() {
        let mut j = i + 1;
        while j < order.len() && values[order[j]] == values[order[i]] {
            j += 1;
        }
        // Positions i..j hold ranks i+1..=j.
        let rank = (i + 1 + j) as f64 / 2.0;
        for &idx in &order[i..j] {
            ranks[idx] = rank;
        }
        i = j;
    }
    ranks
}

/// Spearman's rho: Pearson over average ranks.
pub fn spearman(x: &[f64], y: &[f64]) -> Result<CorrelationResult, StatsError> {
    check_pair(x, y)?;
    pearson(&average_ranks(x), &average_ranks(y))
}

/// Sizes of runs of equal values in a sorted slice.
fn tie_groups(sorted: &[f64]) -> Vec<u64> {
    let mut groups = Vec::new();
    let mut i = 0;
    while i < sorted.len() {
        let mut j = i + 1;
        while j < sorted.len() && sorted[j] == sorted[i] {
            j += 1;
        }
        if j - i > 1 {
            groups.push((j - i) as u64);
        }
        i = j;
    }
    groups
}

/// Counts strict inversions while merge-sorting `v`.
fn count_inversions(v: &mut [f64], buf: &mut Vec<f64>) -> u64 {
    let n = v.len();
    if n < 2 {
        return 0;
    }
    let mid = n / 2;
    let mut inv = count_inversions(&mut v[..mid], buf) + count_inversions(&mut v[mid..], buf);
    buf.clear();
    let (mut i, mut j) = (0, mid);
    while i < mid && j < n {
        if v[j] < v[i] {
            inv += (mid - i) as u64;
            buf.push(v[j]);
            j += 1;
        } else {
            buf.push(v[i]);
            i += 1;
        }
    }
    buf.extend_from_slice(&v[i..mid]);
    buf.extend_from_slice(&v[j..n]);
    v.copy_from_slice(buf);
    inv
}

/// Kendall's tau-b in O(n log n) (Knight's algorithm).
pub fn kendall_tau_b(x: &[f64], y: &[f64]) -> Result<CorrelationResult, StatsError> {
    let n = check_pair(x, y)?;
    let mut pairs: Vec<(f64, f64)> = x.iter().copied().zip(y.iter().copied()).collect();
    pairs.sort_by(|a, b| a.0.total_cmp(&b.0).then(a.1.total_cmp(&b.1)));

    let pairs_of = |t: u64| t * (t - 1) / 2;
    let xs: Vec<f64> = pairs.iter().map(|p| p.0).collect();
    let x_groups = tie_groups(&xs);
    let tied_x: u64 = x_groups.iter().map(|&t| pairs_of(t)).sum();

    let mut tied_xy = 0u64;
    let mut i = 0;
    while i < pairs.len() {
        let mut j = i + 1;
        while j < pairs.len() && pairs[j] == pairs[i] {
            j += 1;
        }
        tied_xy += pairs_of((j - i) as u64);
        i = j;
    }

    let mut ys: Vec<f64> = pairs.iter().map(|p| p.1).collect();
    let discordant = count_inversions(&mut ys, &mut Vec::with_capacity(n));
    let y_groups = tie_groups(&ys);
    let tied_y: u64 = y_groups.iter().map(|&t| pairs_of(t)).sum();

    let total = pairs_of(n as u64);
    if tied_x == total || tied_y == total {
        return Err(StatsError::AllTied);
    }
    let s = total as f64 - tied_x as f64 - tied_y as f64 + tied_xy as f64 - 2.0 * discordant as f64;
    let tau = (s / ((total - tied_x) as f64).sqrt() / ((total - tied_y) as f64).sqrt()).clamp(-1.0, 1.0);

    let nf = n as f64;
    let sum_with = |groups: &[u64], f: &dyn Fn(f64) -> f64| groups.iter().map(|&t| f(t as f64)).sum::<f64>();
    let v0 = nf * (nf - 1.0) * (2.0 * nf + 5.0);
    let vt = sum_with(&x_groups, &|t| t * (t - 1.0) * (2.0 * t + 5.0));
    let vu = sum_with(&y_groups, &|t| t * (t - 1.0) * (2.0 * t + 5.0));
    let v1 = sum_with(&x_groups, &|t| t * (t - 1.0)) * sum_with(&y_groups, &|t| t * (t - 1.0));
    let v2 = sum_with(&x_groups, &|t| t * (t - 1.0) * (t - 2.0)) * sum_with(&y_groups, &|t| t * (t - 1.0) * (t - 2.0));
    let mut var = (v0 - vt - vu) / 18.0 + v1 / (2.0 * nf * (nf - 1.0));
    if n > 2 {
        var += v2 / (9.0 * nf * (nf - 1.0) * (nf - 2.0));
    }
    let p_value = if var > 0.0 { two_sided_normal(s / var.sqrt()) } else { 1.0 };
    Ok(CorrelationResult {
        coefficient: tau,
        p_value,
        n,
    })
}

/// Welch's unequal-variance two-sample t-test (two-sided).
pub fn welch_t(a: &[f64], b: &[f64]) -> Result<WelchResult, StatsError> {
    for s in [a, b] {
        if s.len() < 2 {
            return Err(StatsError::TooFew { needed: 2, got: s.len() });
        }
    }
    let (na, nb) = (a.len() as f64, b.len() as f64);
    let (ma, mb) = (mean(a), mean(b));
    let (qa, qb) = (sample_variance(a) / na, sample_variance(b) / nb);
    let se2 = qa + qb;
    if se2 == 0.0 {
        let df = na + nb - 2.0;
        return Ok(if ma == mb {
            WelchResult { t: 0.0, df, p: 1.0 }
        } else {
            WelchResult {
                t: (ma - mb).signum() * f64::INFINITY,
                df,
                p: 0.0,
            }
        });
    }
    let t = (ma - mb) / se2.sqrt();
    let df = se2 * se2 / (qa * qa / (na - 1.0) + qb * qb / (nb - 1.0));
    Ok(WelchResult {
        t,
        df,
        p: two_sided_t(t, df),
    })
}

/// Linear-interpolation percentile (`q` in [0, 100]).
pub fn percentile(values: &[f64], q: f64) -> Result<f64, StatsError> {
    if values.is_empty() {
        return Err(StatsError::Empty);
    }
    if !(0.0..=100.0).contains(&q) {
        return Err(StatsError::InvalidQuantile(q));
    }
    let mut sorted = values.to_vec();
    sorted.sort_by(f64::total_cmp);
    let pos = q / 100.0 * (sorted.len() - 1) as f64;
    let lo = pos.floor() as usize;
    let hi = pos.ceil() as usize;
    Ok(sorted[lo] + (pos - lo as f64) * (sorted[hi] - sorted[lo]))
}

pub fn median(values: &[f64]) -> Result<f64, StatsError> {
    percentile(values, 50.0)
}
