//! Two-sample Welch t-test.

mod special;

use serde::{Deserialize, Serialize};

pub use special::{ln_beta, ln_gamma, reg_inc_beta, student_t_cdf, student_t_two_sided};

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum StatsError {
    #[error("each group needs at least 2 samples (got {n_a} and {n_b})")]
    InsufficientData { n_a: usize, n_b: usize },
    #[error("both groups are constant; the t statistic is undefined")]
    ZeroVariance,
    #[error("samples must be finite")]
    NonFinite,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GroupSummary {
    pub n: usize,
    pub mean: f64,
    /// Unbiased sample variance.
    pub variance: f64,
}

impl GroupSummary {
    pub fn of(samples: &[f64]) -> Self {
        let n = samples.len();
        let mean = samples.iter().sum::<f64>() / n as f64;
        // two-pass with the compensating term keeps shifted data exact to rounding
        let (mut ss, mut comp) = (0.0, 0.0);
        for &x in samples {
            let d = x - mean;
            ss += d * d;
            comp += d;
        }
        let variance = if n > 1 {
            (ss - comp * comp / n as f64) / (n - 1) as f64
        } else {
            0.0
        };
        Self {
            n,
            mean,
            variance: variance.max(0.0),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TTestResult {
    pub t_stat: f64,
    /// Welch–Satterthwaite degrees of freedom.
    pub dof: f64,
    /// Two-sided p-value, in `(0, 1]`.
    pub p_value: f64,
    pub group_a: GroupSummary,
    pub group_b: GroupSummary,
}

/// Welch's unequal-variance t-test of `mean(a) == mean(b)`.
pub fn welch_ttest(group_a: &[f64], group_b: &[f64]) -> Result<TTestResult, StatsError> {
    if group_a.len() < 2 || group_b.len() < 2 {
        return Err(StatsError::InsufficientData {
            n_a: group_a.len(),
            n_b: group_b.len(),
        });
    }
    if group_a.iter().chain(group_b).any(|v| !v.is_finite()) {
        return Err(StatsError::NonFinite);
    }
    let a = GroupSummary::of(group_a);
    let b = GroupSummary::of(group_b);
    if a.variance == 0.0 && b.variance == 0.0 {
        return Err(StatsError::ZeroVariance);
    }
    let sa = a.variance / a.n as f64;
    let sb = b.variance / b.n as f64;
    let se2 = sa + sb;
    let t_stat = (a.mean - b.mean) / se2.sqrt();
    let dof = se2 * se2 / (sa * sa / (a.n - 1) as f64 + sb * sb / (b.n - 1) as f64);
    // an underflowed tail still reports a positive p
    let p_value = student_t_two_sided(t_stat, dof).clamp(f64::MIN_POSITIVE, 1.0);
    Ok(TTestResult {
        t_stat,
        dof,
        p_value,
        group_a: a,
        group_b: b,
    })
}
