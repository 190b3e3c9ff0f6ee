//! Kaplan-Meier product-limit estimator with Greenwood variance and
//! complementary log-log 95% confidence bands.

use std::io::Write;

use crate::error::{Error, Result};

/// Step curve over the distinct event times.
#[derive(Debug, Clone)]
pub struct KmCurve {
    /// Sorted distinct times at which at least one event occurred.
    pub event_times: Vec<f64>,
    /// S(t) immediately after each event time.
    pub survival: Vec<f64>,
    pub ci_low: Vec<f64>,
    pub ci_high: Vec<f64>,
    /// Subjects at risk just before each event time.
    pub n_at_risk: Vec<usize>,
    pub n_total: usize,
    pub n_events: usize,
}

impl KmCurve {
    /// Step-function evaluation: S(t) for arbitrary t (1 before the first
    /// event, constant between events).
    pub fn survival_at(&self, t: f64) -> f64 {
        let mut s = 1.0;
        for (et, sv) in self.event_times.iter().zip(&self.survival) {
            if *et <= t {
                s = *sv;
            } else {
                break;
            }
        }
        s
    }

    /// CSV export: `time,survival,ci_low,ci_high,n_at_risk`.
    pub fn write_csv<W: Write>(&self, mut w: W) -> Result<()> {
        writeln!(w, "time,survival,ci_low,ci_high,n_at_risk")?;
        for i in 0..self.event_times.len() {
            writeln!(
                w,
                "{},{},{},{},{}",
                self.event_times[i],
                self.survival[i],
                self.ci_low[i],
                self.ci_high[i],
                self.n_at_risk[i]
            )?;
        }
        Ok(())
    }
}

/// Product-limit estimate. `censorship` uses 1 = censored; censored subjects
/// at an event time stay in that time's risk set (events first convention).
pub fn km_estimate(times: &[f64], censorship: &[u8]) -> Result<KmCurve> {
    if times.is_empty() {
        return Err(Error::contract("km_estimate: empty input"));
    }
    if times.len() != censorship.len() {
        return Err(Error::contract(format!(
            "km_estimate: length mismatch ({} vs {})",
            times.len(),
            censorship.len()
        )));
    }
    if times.iter().any(|t| !t.is_finite()) {
        return Err(Error::contract("km_estimate: non-finite time"));
    }

    let mut order: Vec<usize> = (0..times.len()).collect();
    order.sort_by(|&a, &b| times[a].total_cmp(&times[b]));

    let n = times.len();
    let mut event_times = Vec::new();
    let mut survival = Vec::new();
    let mut ci_low = Vec::new();
    let mut ci_high = Vec::new();
    let mut n_at_risk = Vec::new();

    let mut at_risk = n;
    let mut s = 1.0;
    let mut greenwood = 0.0; // sum of d / (n (n - d))
    let mut n_events = 0usize;

    let mut i = 0;
    while i < n {
        let t = times[order[i]];
        let mut d = 0usize;
        let mut removed = 0usize;
        while i < n && times[order[i]] == t {
            if censorship[order[i]] == 0 {
                d += 1;
            }
            removed += 1;
            i += 1;
        }
        if d > 0 {
            let nf = at_risk as f64;
            let df = d as f64;
            s *= 1.0 - df / nf;
            if at_risk > d {
                greenwood += df / (nf * (nf - df));
            } else {
                greenwood = f64::INFINITY;
            }
            let (lo, hi) = cloglog_band(s, greenwood);
            event_times.push(t);
            survival.push(s);
            ci_low.push(lo);
            ci_high.push(hi);
            n_at_risk.push(at_risk);
            n_events += d;
        }
        at_risk -= removed;
    }

    Ok(KmCurve {
        event_times,
        survival,
        ci_low,
        ci_high,
        n_at_risk,
        n_total: n,
        n_events,
    })
}

/// 95% band on the complementary log-log scale; degenerates to a point at
/// S = 0 or S = 1.
fn cloglog_band(s: f64, greenwood: f64) -> (f64, f64) {
    if s <= 0.0 {
        return (0.0, 0.0);
    }
    if s >= 1.0 {
        return (1.0, 1.0);
    }
    if !greenwood.is_finite() {
        return (0.0, 1.0);
    }
    let z = 1.959963984540054; // Phi^{-1}(0.975)
    let log_s = s.ln();
    let se_theta = greenwood.sqrt() / log_s.abs();
    let theta = (-log_s).ln();
    let lo = (-((theta + z * se_theta).exp())).exp();
    let hi = (-((theta - z * se_theta).exp())).exp();
    (lo.clamp(0.0, 1.0), hi.clamp(0.0, 1.0))
}
