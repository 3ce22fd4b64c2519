//! Two-sided Wilcoxon rank-sum test.

use serde::{Deserialize, Serialize};
use statrs::distribution::{ContinuousCDF, Normal};

/// Combined sample sizes up to this use exact enumeration.
pub const EXACT_LIMIT: usize = 12;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum RankSumMethod {
    Exact,
    Normal,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct RankSumResult {
    /// Sum of the first sample's ranks.
    pub statistic: f64,
    pub p_value: f64,
    pub method: RankSumMethod,
}

#[derive(Debug, thiserror::Error, PartialEq)]
pub enum StatsError {
    #[error("both samples must be nonempty")]
    EmptySample,
    #[error("samples must be finite")]
    NonFinite,
}

/// Midranks (1-based) of `values`, with the tie groups' sizes.
pub fn midranks(values: &[f64]) -> (Vec<f64>, Vec<usize>) {
    let mut order: Vec<usize> = (0..values.len()).collect();
    order.sort_by(|&a, &b| values[a].total_cmp(&values[b]));
    let mut ranks = vec![0.0; values.len()];
    let mut ties = Vec::new();
    let mut i = 0;
    while i < order.len() {
        let mut j = i + 1;
        while j < order.len() && values[order[j]] == values[order[i]] {
            j += 1;
        }
        let r = (i + 1 + j) as f64 / 2.0;
        for &k in &order[i..j] {
            ranks[k] = r;
        }
        ties.push(j - i);
        i = j;
    }
    (ranks, ties)
}

fn check(a: &[f64], b: &[f64]) -> Result<(), StatsError> {
    if a.is_empty() || b.is_empty() {
        return Err(StatsError::EmptySample);
    }
    if a.iter().chain(b).any(|x| !x.is_finite()) {
        return Err(StatsError::NonFinite);
    }
    Ok(())
}

fn pooled(a: &[f64], b: &[f64]) -> (Vec<f64>, Vec<usize>, f64, f64) {
    let all: Vec<f64> = a.iter().chain(b).copied().collect();
    let (ranks, ties) = midranks(&all);
    let w: f64 = ranks[..a.len()].iter().sum();
    let mean = a.len() as f64 * (all.len() + 1) as f64 / 2.0;
    (ranks, ties, w, mean)
}

/// Fraction of all `C(N, n_a)` rank assignments at least as far from the
/// null mean as the observed one.
pub fn rank_sum_exact(a: &[f64], b: &[f64]) -> Result<RankSumResult, StatsError> {
    check(a, b)?;
    let (ranks, _, w, mean) = pooled(a, b);
    let observed = (w - mean).abs();
    let n = ranks.len();
    let k = a.len();
    let (mut extreme, mut total) = (0u64, 0u64);
    let mut idx: Vec<usize> = (0..k).collect();
    loop {
        let s: f64 = idx.iter().map(|&i| ranks[i]).sum();
        total += 1;
        // midranks are multiples of 1/2, so the comparison is exact up to rounding slack
        if (s - mean).abs() >= observed - 1e-9 {
            extreme += 1;
        }
        let Some(pos) = (0..k).rev().find(|&p| idx[p] < n - k + p) else {
            break;
        };
        idx[pos] += 1;
        for p in pos + 1..k {
            idx[p] = idx[p - 1] + 1;
        }
    }
    Ok(RankSumResult {
        statistic: w,
        p_value: extreme as f64 / total as f64,
        method: RankSumMethod::Exact,
    })
}

/// Normal approximation with tie-corrected variance and a 1/2 continuity
/// correction.
pub fn rank_sum_normal(a: &[f64], b: &[f64]) -> Result<RankSumResult, StatsError> {
    check(a, b)?;
    let (_, ties, w, mean) = pooled(a, b);
    let (n1, n2) = (a.len() as f64, b.len() as f64);
    let n = n1 + n2;
    let tie_term: f64 = ties.iter().map(|&t| (t as f64).powi(3) - t as f64).sum();
    let var = n1 * n2 / 12.0 * ((n + 1.0) - tie_term / (n * (n - 1.0)));
    let p = if var <= 0.0 {
        1.0
    } else {
        let z = ((w - mean).abs() - 0.5).max(0.0) / var.sqrt();
        let std = Normal::new(0.0, 1.0).expect("standard normal");
        (2.0 * (1.0 - std.cdf(z))).min(1.0)
    };
    Ok(RankSumResult {
        statistic: w,
        p_value: p,
        method: RankSumMethod::Normal,
    })
}

/// Exact for small combined samples, normal approximation otherwise.
pub fn wilcoxon_rank_sum(a: &[f64], b: &[f64]) -> Result<RankSumResult, StatsError> {
    if a.len() + b.len() <= EXACT_LIMIT {
        rank_sum_exact(a, b)
    } else {
        rank_sum_normal(a, b)
    }
}

/// `(mean, 1.96·sd/√n)`; zero width for a single value.
pub fn mean_ci(values: &[f64]) -> (f64, f64) {
    if values.is_empty() {
        return (0.0, 0.0);
    }
    let n = values.len() as f64;
    let mean = values.iter().sum::<f64>() / n;
    if values.len() < 2 {
        return (mean, 0.0);
    }
    let var = values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (n - 1.0);
    (mean, 1.96 * (var / n).sqrt())
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn separated_triples() {
        let r = wilcoxon_rank_sum(&[1.0, 2.0, 3.0], &[4.0, 5.0, 6.0]).unwrap();
        assert_eq!(r.method, RankSumMethod::Exact);
        assert_eq!(r.statistic, 6.0);
        assert!((r.p_value - 0.1).abs() < 1e-15);
    }

    #[test]
    fn all_tied_is_p_one() {
        let r = rank_sum_exact(&[2.0, 2.0], &[2.0, 2.0, 2.0]).unwrap();
        assert_eq!(r.p_value, 1.0);
        assert_eq!(rank_sum_normal(&[2.0; 3], &[2.0; 3]).unwrap().p_value, 1.0);
    }

    #[test]
    fn midranks_with_ties() {
        let (r, t) = midranks(&[3.0, 1.0, 3.0, 2.0]);
        assert_eq!(r, vec![3.5, 1.0, 3.5, 2.0]);
        assert_eq!(t, vec![1, 1, 2]);
    }

    #[test]
    fn errors() {
        assert_eq!(wilcoxon_rank_sum(&[], &[1.0]).unwrap_err(), StatsError::EmptySample);
        assert_eq!(wilcoxon_rank_sum(&[f64::NAN], &[1.0]).unwrap_err(), StatsError::NonFinite);
    }

    #[test]
    fn large_samples_use_the_approximation() {
        let a: Vec<f64> = (0..10).map(f64::from).collect();
        let b: Vec<f64> = (5..15).map(f64::from).collect();
        assert_eq!(wilcoxon_rank_sum(&a, &b).unwrap().method, RankSumMethod::Normal);
    }

    #[test]
    fn mean_ci_values() {
        assert_eq!(mean_ci(&[2.0]), (2.0, 0.0));
        let (m, h) = mean_ci(&[1.0, 3.0]);
        assert_eq!(m, 2.0);
        assert!((h - 1.96 * (2.0f64 / 2.0).sqrt()).abs() < 1e-12);
    }

    proptest! {
        #[test]
        fn swapping_samples_keeps_p(
            a in proptest::collection::vec(0u8..6, 1..6),
            b in proptest::collection::vec(0u8..6, 1..6),
        ) {
            let a: Vec<f64> = a.into_iter().map(f64::from).collect();
            let b: Vec<f64> = b.into_iter().map(f64::from).collect();
            let x = rank_sum_exact(&a, &b).unwrap();
            let y = rank_sum_exact(&b, &a).unwrap();
            prop_assert!((x.p_value - y.p_value).abs() < 1e-12);
            prop_assert!(x.p_value > 0.0 && x.p_value <= 1.0);
            let n = (a.len() + b.len()) as f64;
            prop_assert!((x.statistic + y.statistic - n * (n + 1.0) / 2.0).abs() < 1e-9);
        }
    }
}
