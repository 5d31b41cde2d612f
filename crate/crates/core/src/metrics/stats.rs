//! Paired-sample statistics: Wilcoxon signed-rank, Bland–Altman agreement
//! limits, and mean absolute error.
//!
//! Wilcoxon conventions: zero differences are dropped before ranking; tied
//! absolute differences receive their average rank; the two-sided p-value is
//! `min(1, 2·min(P(W⁺ ≤ w), P(W⁺ ≥ w)))` under the exact null distribution
//! (all 2ⁿ sign assignments) for small n, and a normal approximation with
//! tie and continuity corrections otherwise.

use serde::Serialize;
use thiserror::Error;

#[derive(Debug, Error)]
pub enum StatsError {
    #[error("all paired differences are zero; the test statistic is undefined")]
    AllZeroDifferences,
    #[error("paired inputs have different lengths: {0} vs {1}")]
    LengthMismatch(usize, usize),
    #[error("need at least {needed} samples, got {got}")]
    TooFewSamples { needed: usize, got: usize },
    #[error("exact enumeration is limited to n <= {max}, got {got}")]
    ExactTooLarge { max: usize, got: usize },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum WilcoxonMethod {
    /// Exact for n ≤ 12, normal approximation above.
    Auto,
    Exact,
    NormalApprox,
}

#[derive(Debug, Clone, Copy, Serialize)]
pub struct WilcoxonResult {
    /// Sum of the ranks of the positive differences.
    pub w_plus: f64,
    /// Classical T statistic: min(W⁺, W⁻).
    pub statistic: f64,
    /// Two-sided p-value.
    pub p_value: f64,
    /// Number of nonzero differences actually ranked.
    pub n: usize,
    /// Whether the p-value came from exact enumeration.
    pub exact: bool,
}

const EXACT_LIMIT_AUTO: usize = 12;
const EXACT_LIMIT_HARD: usize = 20;

/// Average ranks of the absolute differences (midranks for ties).
fn midranks(abs: &[f64]) -> Vec<f64> {
    let mut order: Vec<usize> = (0..abs.len()).collect();
    order.sort_by(|&i, &j| abs[i].total_cmp(&abs[j]));
    let mut ranks = vec![0.0; abs.len()];
    let mut i = 0;
    while i < order.len() {
        let mut j = i;
        while j + 1 < order.len() && abs[order[j + 1]] == abs[order[i]] {
            j += 1;
        }
        // Positions i..=j (0-based) share the average of ranks i+1..=j+1.
        let avg = (i + j + 2) as f64 / 2.0;
        for &k in &order[i..=j] {
            ranks[k] = avg;
        }
        i = j + 1;
    }
    ranks
}

fn exact_p(ranks: &[f64], w_obs: f64) -> f64 {
    let n = ranks.len();
    let total = 1u64 << n;
    let mut le = 0u64;
    let mut ge = 0u64;
    for signs in 0..total {
        let w: f64 = (0..n).filter(|&i| signs >> i & 1 == 1).map(|i| ranks[i]).sum();
        if w <= w_obs + 1e-9 {
            le += 1;
        }
        if w >= w_obs - 1e-9 {
            ge += 1;
        }
    }
    let tail = le.min(ge) as f64 / total as f64;
    (2.0 * tail).min(1.0)
}

/// Standard normal CDF via the Abramowitz–Stegun 7.1.26 erf polynomial
/// (absolute error below 1.5e-7, ample for p-values).
pub fn normal_cdf(z: f64) -> f64 {
    let x = z / std::f64::consts::SQRT_2;
    let t = 1.0 / (1.0 + 0.3275911 * x.abs());
    let poly = t
        * (0.254829592
            + t * (-0.284496736 + t * (1.421413741 + t * (-1.453152027 + t * 1.061405429))));
    let erf_abs = 1.0 - poly * (-x * x).exp();
    let erf = if x < 0.0 { -erf_abs } else { erf_abs };
    0.5 * (1.0 + erf)
}

fn approx_p(ranks: &[f64], w_plus: f64) -> f64 {
    let n = ranks.len() as f64;
    let mean = n * (n + 1.0) / 4.0;
    // Tie correction: subtract Σ(t³−t)/48 over groups of tied ranks.
    let mut sorted = ranks.to_vec();
    sorted.sort_by(f64::total_cmp);
    let mut tie_term = 0.0;
    let mut i = 0;
    while i < sorted.len() {
        let mut j = i;
        while j + 1 < sorted.len() && sorted[j + 1] == sorted[i] {
            j += 1;
        }
        let t = (j - i + 1) as f64;
        tie_term += (t.powi(3) - t) / 48.0;
        i = j + 1;
    }
    let var = n * (n + 1.0) * (2.0 * n + 1.0) / 24.0 - tie_term;
    if var <= 0.0 {
        return 1.0;
    }
    let z = ((w_plus - mean).abs() - 0.5).max(0.0) / var.sqrt();
    (2.0 * (1.0 - normal_cdf(z))).clamp(0.0, 1.0)
}

pub fn wilcoxon_signed_rank_with(
    diffs: &[f64],
    method: WilcoxonMethod,
) -> Result<WilcoxonResult, StatsError> {
    let nonzero: Vec<f64> = diffs.iter().copied().filter(|&d| d != 0.0).collect();
    if nonzero.is_empty() {
        return Err(StatsError::AllZeroDifferences);
    }
    let n = nonzero.len();
    let abs: Vec<f64> = nonzero.iter().map(|d| d.abs()).collect();
    let ranks = midranks(&abs);
    let w_plus: f64 =
        nonzero.iter().zip(&ranks).filter(|(&d, _)| d > 0.0).map(|(_, &r)| r).sum();
    let w_minus = n as f64 * (n as f64 + 1.0) / 2.0 - w_plus;

    let exact = match method {
        WilcoxonMethod::Exact => {
            if n > EXACT_LIMIT_HARD {
                return Err(StatsError::ExactTooLarge { max: EXACT_LIMIT_HARD, got: n });
            }
            true
        }
        WilcoxonMethod::Auto => n <= EXACT_LIMIT_AUTO,
        WilcoxonMethod::NormalApprox => false,
    };
    let p_value =
        if exact { exact_p(&ranks, w_plus) } else { approx_p(&ranks, w_plus) };
    Ok(WilcoxonResult { w_plus, statistic: w_plus.min(w_minus), p_value, n, exact })
}

pub fn wilcoxon_signed_rank(diffs: &[f64]) -> Result<WilcoxonResult, StatsError> {
    wilcoxon_signed_rank_with(diffs, WilcoxonMethod::Auto)
}

#[derive(Debug, Clone, Copy, Serialize)]
pub struct BlandAltman {
    /// Mean of (auto − reference).
    pub bias: f64,
    /// Sample standard deviation of the differences (n−1).
    pub sd: f64,
    pub loa_low: f64,
    pub loa_high: f64,
}

pub fn bland_altman(auto: &[f64], reference: &[f64]) -> Result<BlandAltman, StatsError> {
    if auto.len() != reference.len() {
        return Err(StatsError::LengthMismatch(auto.len(), reference.len()));
    }
    if auto.len() < 2 {
        return Err(StatsError::TooFewSamples { needed: 2, got: auto.len() });
    }
    let diffs: Vec<f64> = auto.iter().zip(reference).map(|(a, r)| a - r).collect();
    let n = diffs.len() as f64;
    let bias = diffs.iter().sum::<f64>() / n;
    let sd =
        (diffs.iter().map(|d| (d - bias).powi(2)).sum::<f64>() / (n - 1.0)).sqrt();
    Ok(BlandAltman { bias, sd, loa_low: bias - 1.96 * sd, loa_high: bias + 1.96 * sd })
}

#[derive(Debug, Clone, Copy, Serialize)]
pub struct MaeSummary {
    pub mean: f64,
    /// Sample standard deviation of |auto − reference| (0 when n = 1).
    pub sd: f64,
    pub n: usize,
}

pub fn mae(auto: &[f64], reference: &[f64]) -> Result<MaeSummary, StatsError> {
    if auto.len() != reference.len() {
        return Err(StatsError::LengthMismatch(auto.len(), reference.len()));
    }
    if auto.is_empty() {
        return Err(StatsError::TooFewSamples { needed: 1, got: 0 });
    }
    let abs: Vec<f64> = auto.iter().zip(reference).map(|(a, r)| (a - r).abs()).collect();
    let n = abs.len() as f64;
    let mean = abs.iter().sum::<f64>() / n;
    let sd = if abs.len() > 1 {
        (abs.iter().map(|d| (d - mean).powi(2)).sum::<f64>() / (n - 1.0)).sqrt()
    } else {
        0.0
    };
    Ok(MaeSummary { mean, sd, n: abs.len() })
}
