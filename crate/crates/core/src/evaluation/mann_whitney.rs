//! Two-sample Mann-Whitney U test.
//!
//! Samples are ranked jointly with average ranks for ties. The reported
//! statistic is `min(U_A, U_B)`. The two-sided p-value comes from the exact
//! null distribution of U for small tie-free samples and from the normal
//! approximation (tie-corrected variance, continuity correction) otherwise.

use serde::{Deserialize, Serialize};

use crate::error::EvalError;

/// Largest `n1 + n2` for which the exact distribution is used by default.
pub const EXACT_MAX_TOTAL: usize = 16;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PValueMethod {
    Exact,
    NormalApproximation,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MannWhitneyResult {
    /// `min(U_A, U_B)`.
    pub u_statistic: f64,
    /// U of the first sample, `R_A - n1(n1+1)/2`.
    pub u_first: f64,
    pub n1: usize,
    pub n2: usize,
    /// Continuity-corrected z; never positive under the min-U convention.
    pub z_score: f64,
    pub p_two_sided: f64,
    pub tie_corrected: bool,
    /// All values identical: variance is zero and p is 1 by convention.
    pub degenerate_variance: bool,
    pub method: PValueMethod,
}

pub fn mann_whitney_u(sample_a: &[f64], sample_b: &[f64]) -> Result<MannWhitneyResult, EvalError> {
    mann_whitney_u_with(sample_a, sample_b, None)
}

/// Runs the test with a forced p-value method, or the automatic choice when
/// `method` is `None`.
pub fn mann_whitney_u_with(
    sample_a: &[f64],
    sample_b: &[f64],
    method: Option<PValueMethod>,
) -> Result<MannWhitneyResult, EvalError> {
    if sample_a.is_empty() || sample_b.is_empty() {
        return Err(EvalError::EmptySample);
    }
    if sample_a.iter().chain(sample_b).any(|v| !v.is_finite()) {
        return Err(EvalError::NonFiniteSample);
    }
    let n1 = sample_a.len();
    let n2 = sample_b.len();
    let total = n1 + n2;

    let (ranks, tie_term) = joint_ranks(sample_a, sample_b);
    let rank_sum_a: f64 = ranks[..n1].iter().sum();
    let u_first = rank_sum_a - (n1 * (n1 + 1)) as f64 / 2.0;
    let product = (n1 * n2) as f64;
    let u_statistic = u_first.min(product - u_first);
    let has_ties = tie_term > 0.0;

    let mean = product / 2.0;
    let n = total as f64;
    let variance = if total > 1 {
        product / 12.0 * ((n + 1.0) - tie_term / (n * (n - 1.0)))
    } else {
        0.0
    };
    let degenerate_variance = variance <= 0.0;
    let z_score = if degenerate_variance {
        0.0
    } else {
        -((mean - u_statistic) - 0.5).max(0.0) / variance.sqrt()
    };

    let method = match method {
        Some(PValueMethod::Exact) if has_ties => return Err(EvalError::ExactWithTies),
        Some(m) => m,
        None if !has_ties && total <= EXACT_MAX_TOTAL => PValueMethod::Exact,
        None => PValueMethod::NormalApproximation,
    };

    let p_two_sided = match method {
        PValueMethod::Exact => exact_p_two_sided(n1, n2, u_statistic),
        PValueMethod::NormalApproximation if degenerate_variance => 1.0,
        PValueMethod::NormalApproximation => (2.0 * standard_normal_cdf(z_score)).min(1.0),
    };

    Ok(MannWhitneyResult {
        u_statistic,
        u_first,
        n1,
        n2,
        z_score,
        p_two_sided,
        tie_corrected: has_ties,
        degenerate_variance,
        method,
    })
}

fn standard_normal_cdf(z: f64) -> f64 {
    0.5 * libm::erfc(-z / std::f64::consts::SQRT_2)
}

/// Average ranks (1-based) of the concatenation `a ++ b`, plus the tie term
/// `sum(t^3 - t)` over groups of tied values.
fn joint_ranks(a: &[f64], b: &[f64]) -> (Vec<f64>, f64) {
    let values: Vec<f64> = a.iter().chain(b).copied().collect();
    let mut order: Vec<usize> = (0..values.len()).collect();
    order.sort_by(|&i, &j| values[i].total_cmp(&values[j]));

    let mut ranks = vec![0.0; values.len()];
    let mut tie_term = 0.0;
    let mut start = 0;
    while start < order.len() {
        let mut end = start + 1;
        while end < order.len() && values[order[end]] == values[order[start]] {
            end += 1;
        }
        // positions start..end share the average of ranks start+1..=end
        let average = (start + 1 + end) as f64 / 2.0;
        for &idx in &order[start..end] {
            ranks[idx] = average;
        }
        let t = (end - start) as f64;
        tie_term += t * t * t - t;
        start = end;
    }
    (ranks, tie_term)
}

/// Number of arrangements of `n1` first-sample and `n2` second-sample items
/// giving each value of U_A, for U_A in `0..=n1*n2`.
pub fn exact_u_distribution(n1: usize, n2: usize) -> Vec<u64> {
    // table[i][j] holds the distribution for sample sizes (i, j)
    let mut table: Vec<Vec<Vec<u64>>> = vec![vec![Vec::new(); n2 + 1]; n1 + 1];
    for i in 0..=n1 {
        for j in 0..=n2 {
            let mut dist = vec![0u64; i * j + 1];
            if i == 0 || j == 0 {
                dist[0] = 1;
            } else {
                // largest item belongs to sample A: it outranks all j items of B
                for (u, c) in table[i - 1][j].iter().enumerate() {
                    dist[u + j] += c;
                }
                for (u, c) in table[i][j - 1].iter().enumerate() {
                    dist[u] += c;
                }
            }
            table[i][j] = dist;
        }
    }
    std::mem::take(&mut table[n1][n2])
}

fn exact_p_two_sided(n1: usize, n2: usize, u_min: f64) -> f64 {
    let dist = exact_u_distribution(n1, n2);
    let total: u64 = dist.iter().sum();
    let bound = u_min.floor() as usize;
    let tail: u64 = dist.iter().take(bound + 1).sum();
    (2.0 * tail as f64 / total as f64).min(1.0)
}
