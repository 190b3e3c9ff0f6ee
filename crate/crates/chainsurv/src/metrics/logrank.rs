//! Two-group log-rank test with hypergeometric variance.

use super::chi2::chi2_sf;
use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy)]
pub struct LogRankResult {
    pub statistic: f64,
    pub p_value: f64,
    pub dof: u32,
}

/// Standard two-group log-rank test: U = sum over distinct event times of
/// (observed - expected) events in group A, V the summed hypergeometric
/// variance, statistic = U^2 / V, p from the chi-square(1) tail.
pub fn log_rank(
    times_a: &[f64],
    cens_a: &[u8],
    times_b: &[f64],
    cens_b: &[u8],
) -> Result<LogRankResult> {
    if times_a.is_empty() || times_b.is_empty() {
        return Err(Error::contract("log_rank: both groups must be non-empty"));
    }
    if times_a.len() != cens_a.len() || times_b.len() != cens_b.len() {
        return Err(Error::contract("log_rank: length mismatch"));
    }

    // merged subject list: (time, censored, group)
    let mut subjects: Vec<(f64, u8, u8)> = Vec::with_capacity(times_a.len() + times_b.len());
    subjects.extend(times_a.iter().zip(cens_a).map(|(&t, &c)| (t, c, 0u8)));
    subjects.extend(times_b.iter().zip(cens_b).map(|(&t, &c)| (t, c, 1u8)));
    subjects.sort_by(|x, y| x.0.total_cmp(&y.0));

    let mut at_risk = [times_a.len() as f64, times_b.len() as f64];
    let mut u = 0.0; // sum of O_a - E_a
    let mut v = 0.0;

    let n = subjects.len();
    let mut i = 0;
    while i < n {
        let t = subjects[i].0;
        let mut deaths = [0.0f64, 0.0];
        let mut removed = [0.0f64, 0.0];
        while i < n && subjects[i].0 == t {
            let (_, c, g) = subjects[i];
            if c == 0 {
                deaths[g as usize] += 1.0;
            }
            removed[g as usize] += 1.0;
            i += 1;
        }
        let d = deaths[0] + deaths[1];
        let n_tot = at_risk[0] + at_risk[1];
        if d > 0.0 && n_tot > 0.0 {
            let expected_a = d * at_risk[0] / n_tot;
            u += deaths[0] - expected_a;
            if n_tot > 1.0 {
                v += d * (at_risk[0] / n_tot) * (at_risk[1] / n_tot) * (n_tot - d)
                    / (n_tot - 1.0);
            }
        }
        at_risk[0] -= removed[0];
        at_risk[1] -= removed[1];
    }

    if v <= 0.0 {
        return Err(Error::validation(
            "log_rank: zero variance (no usable events)",
        ));
    }
    let statistic = u * u / v;
    let p_value = chi2_sf(statistic, 1)?;
    Ok(LogRankResult {
        statistic,
        p_value,
        dof: 1,
    })
}
