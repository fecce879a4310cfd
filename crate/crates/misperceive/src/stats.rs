//! Rank-based group comparison: the Kruskal-Wallis H test with tie
//! correction, and the chi-square upper tail for its asymptotic p-value.
//!
//! With pooled mid-ranks r̄ᵢ over N observations in k groups,
//!
//! ```text
//! H₀ = 12 / (N(N+1)) · Σ nᵢ·r̄ᵢ² − 3(N+1)
//! H  = H₀ / (1 − Σ(t³ − t) / (N³ − N))        (t over tie-group sizes)
//! p  = Q(H; df = k − 1)                        (chi-square upper tail)
//! ```
//!
//! When every observation is identical the correction denominator is 0 and
//! H is defined as 0. The tie correction is always applied; on tie-free
//! data it reduces to the plain statistic.

use serde::Serialize;
use thiserror::Error;

#[derive(Debug, Error)]
pub enum StatsError {
    #[error("kruskal-wallis needs at least two groups, got {0}")]
    TooFewGroups(usize),
    #[error("group {0} is empty")]
    EmptyGroup(usize),
    #[error("kruskal-wallis needs at least three observations in total, got {0}")]
    TooFewObservations(usize),
    #[error("observations must be finite numbers")]
    NonFiniteObservation,
    #[error("chi-square argument must be ≥ 0, got {0}")]
    NegativeX(f64),
    #[error("degrees of freedom must be ≥ 1")]
    ZeroDf,
}

/// Outcome of a Kruskal-Wallis comparison.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct KWResult {
    /// Tie-corrected H statistic (asymptotically chi-square).
    pub h: f64,
    /// Degrees of freedom: number of groups − 1.
    pub df: usize,
    /// Asymptotic upper-tail probability.
    pub p: f64,
}

/// Mid-ranks 1..N; tied values share the mean of their rank span.
pub fn rank_with_ties(values: &[f64]) -> Vec<f64> {
    let mut order: Vec<usize> = (0..values.len()).collect();
    order.sort_by(|&a, &b| values[a].total_cmp(&values[b]));
    let mut ranks = vec![0.0; values.len()];
    let mut i = 0;
    while i < order.len() {
        let mut j = i;
        while j + 1 < order.len() && values[order[j + 1]] == values[order[i]] {
            j += 1;
        }
        // positions i..=j (0-based) share the mean rank of span i+1..=j+1
        let mean = (i + 1 + j + 1) as f64 / 2.0;
        for &idx in &order[i..=j] {
            ranks[idx] = mean;
        }
        i = j + 1;
    }
    ranks
}

/// Tie-corrected Kruskal-Wallis test over two or more groups of ordinal
/// values.
pub fn kruskal_wallis(groups: &[Vec<f64>]) -> Result<KWResult, StatsError> {
    if groups.len() < 2 {
        return Err(StatsError::TooFewGroups(groups.len()));
    }
    for (i, g) in groups.iter().enumerate() {
        if g.is_empty() {
            return Err(StatsError::EmptyGroup(i));
        }
        if g.iter().any(|v| !v.is_finite()) {
            return Err(StatsError::NonFiniteObservation);
        }
    }
    let n: usize = groups.iter().map(Vec::len).sum();
    if n < 3 {
        return Err(StatsError::TooFewObservations(n));
    }

    let pooled: Vec<f64> = groups.iter().flatten().copied().collect();
    let ranks = rank_with_ties(&pooled);

    let nf = n as f64;
    let mut offset = 0;
    let mut sum_term = 0.0;
    for g in groups {
        let group_ranks = &ranks[offset..offset + g.len()];
        let mean_rank = group_ranks.iter().sum::<f64>() / g.len() as f64;
        sum_term += g.len() as f64 * mean_rank * mean_rank;
        offset += g.len();
    }
    let h_uncorrected = 12.0 / (nf * (nf + 1.0)) * sum_term - 3.0 * (nf + 1.0);

    let mut sorted = pooled.clone();
    sorted.sort_by(f64::total_cmp);
    let mut tie_sum = 0.0;
    let mut i = 0;
    while i < sorted.len() {
        let mut j = i;
        while j + 1 < sorted.len() && sorted[j + 1] == sorted[i] {
            j += 1;
        }
        let t = (j - i + 1) as f64;
        tie_sum += t * t * t - t;
        i = j + 1;
    }
    let correction = 1.0 - tie_sum / (nf * nf * nf - nf);

    let h = if correction == 0.0 {
        0.0 // every observation identical
    } else {
        (h_uncorrected / correction).max(0.0)
    };
    let df = groups.len() - 1;
    let p = chi_square_sf(h, df)?;
    Ok(KWResult { h, df, p })
}

/// Upper-tail probability of the chi-square distribution with `df`
/// degrees of freedom, via the regularized upper incomplete gamma
/// function Q(df/2, x/2).
pub fn chi_square_sf(x: f64, df: usize) -> Result<f64, StatsError> {
    if df == 0 {
        return Err(StatsError::ZeroDf);
    }
    if x.is_nan() || x < 0.0 {
        return Err(StatsError::NegativeX(x));
    }
    if x == 0.0 {
        return Ok(1.0);
    }
    Ok(statrs::function::gamma::gamma_ur(df as f64 / 2.0, x / 2.0))
}
