//! Harrell's concordance index for censored survival data.

use crate::error::{Error, Result};

/// Fraction of comparable patient pairs whose predicted risk ordering matches
/// their survival ordering.
///
/// A pair (i, j) is comparable when `t_i < t_j` and subject i is uncensored
/// (its event was observed, so we know it happened first). The pair is
/// concordant when the shorter-lived subject has the higher risk score; score
/// ties count 1/2. Tied times are never comparable.
///
/// `censorship` uses 1 = censored, 0 = event observed.
pub fn c_index(scores: &[f64], times: &[f64], censorship: &[u8]) -> Result<f64> {
    if scores.len() != times.len() || times.len() != censorship.len() {
        return Err(Error::contract(format!(
            "c_index: length mismatch ({}, {}, {})",
            scores.len(),
            times.len(),
            censorship.len()
        )));
    }
    if scores.len() < 2 {
        return Err(Error::contract("c_index: need at least 2 subjects"));
    }
    if let Some(bad) = censorship.iter().find(|&&c| c > 1) {
        return Err(Error::contract(format!(
            "c_index: censorship must be 0 or 1, got {bad}"
        )));
    }

    // Iterate subjects ordered by time; each uncensored subject is compared
    // against everyone with a strictly later time.
    let mut order: Vec<usize> = (0..times.len()).collect();
    order.sort_by(|&a, &b| times[a].total_cmp(&times[b]));

    let mut concordant = 0.0f64;
    let mut comparable = 0u64;
    for (rank, &i) in order.iter().enumerate() {
        if censorship[i] == 1 {
            continue;
        }
        for &j in &order[rank + 1..] {
            if times[j] <= times[i] {
                continue; // tied times are not comparable
            }
            comparable += 1;
            if scores[i] > scores[j] {
                concordant += 1.0;
            } else if scores[i] == scores[j] {
                concordant += 0.5;
            }
        }
    }

    if comparable == 0 {
        return Err(Error::validation(
            "c_index: no comparable pairs (all censored or all times tied)",
        ));
    }
    Ok(concordant / comparable as f64)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn perfectly_ranked_cohort_scores_one() {
        let scores = [0.9, 0.8, 0.2, 0.1];
        let times = [1.0, 2.0, 3.0, 4.0];
        let cens = [0, 0, 0, 0];
        assert_eq!(c_index(&scores, &times, &cens).unwrap(), 1.0);
    }

    #[test]
    fn inverted_scores_score_zero() {
        let scores = [-0.9, -0.8, -0.2, -0.1];
        let times = [1.0, 2.0, 3.0, 4.0];
        let cens = [0, 0, 0, 0];
        assert_eq!(c_index(&scores, &times, &cens).unwrap(), 0.0);
    }

    #[test]
    fn all_tied_scores_give_chance_level() {
        let scores = [0.5, 0.5, 0.5, 0.5];
        let times = [1.0, 2.0, 3.0, 4.0];
        let cens = [0, 0, 0, 0];
        assert_eq!(c_index(&scores, &times, &cens).unwrap(), 0.5);
    }

    #[test]
    fn censored_subjects_contribute_no_early_pairs() {
        // subject 0 censored at t=1: pairs (0, *) are not comparable
        let scores = [0.1, 0.9, 0.5];
        let times = [1.0, 2.0, 3.0];
        let cens = [1, 0, 0];
        // only (1, 2) comparable and concordant
        assert_eq!(c_index(&scores, &times, &cens).unwrap(), 1.0);
    }

    #[test]
    fn all_censored_is_an_error() {
        let scores = [0.1, 0.9];
        let times = [1.0, 2.0];
        assert!(c_index(&scores, &times, &[1, 1]).is_err());
    }

    #[test]
    fn tied_times_are_excluded() {
        let scores = [0.9, 0.1];
        let times = [2.0, 2.0];
        assert!(c_index(&scores, &times, &[0, 0]).is_err());
    }
}
