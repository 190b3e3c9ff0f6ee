//! Survival evaluation: concordance, Kaplan-Meier estimation, and the
//! two-group log-rank test.

mod chi2;
mod concordance;
mod km;
mod logrank;

pub use chi2::chi2_sf;
pub use concordance::c_index;
pub use km::{km_estimate, KmCurve};
pub use logrank::{log_rank, LogRankResult};

/// Split subject indices into (high-risk, low-risk) halves at the median
/// score; subjects tied with the median go to the low-risk group.
pub fn median_split(scores: &[f64]) -> (Vec<usize>, Vec<usize>) {
    let mut sorted: Vec<f64> = scores.to_vec();
    sorted.sort_by(f64::total_cmp);
    let n = sorted.len();
    let median = if n % 2 == 1 {
        sorted[n / 2]
    } else {
        (sorted[n / 2 - 1] + sorted[n / 2]) / 2.0
    };
    let mut high = Vec::new();
    let mut low = Vec::new();
    for (i, &s) in scores.iter().enumerate() {
        if s > median {
            high.push(i);
        } else {
            low.push(i);
        }
    }
    (high, low)
}
