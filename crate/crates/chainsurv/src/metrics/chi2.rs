//! Chi-square survival function via the regularized incomplete gamma
//! function (series expansion for small arguments, continued fraction for
//! large), following the classic Numerical Recipes split.

use crate::error::{Error, Result};

const EPS: f64 = 1e-15;
const MAX_ITER: usize = 500;

/// P(X > x) for X ~ chi-square with `dof` degrees of freedom.
pub fn chi2_sf(x: f64, dof: u32) -> Result<f64> {
    if !(x >= 0.0) {
        return Err(Error::contract(format!("chi2_sf: x must be >= 0, got {x}")));
    }
    if dof == 0 {
        return Err(Error::contract("chi2_sf: dof must be >= 1"));
    }
    if x == 0.0 {
        return Ok(1.0);
    }
    let a = dof as f64 / 2.0;
    let half = x / 2.0;
    // regularized upper gamma Q(a, x/2)
    let q = if half < a + 1.0 {
        1.0 - gamma_p_series(a, half)
    } else {
        gamma_q_cf(a, half)
    };
    Ok(q.clamp(0.0, 1.0))
}

/// Regularized lower incomplete gamma P(a,x) by series expansion.
fn gamma_p_series(a: f64, x: f64) -> f64 {
    let mut term = 1.0 / a;
    let mut sum = term;
    let mut ap = a;
    for _ in 0..MAX_ITER {
        ap += 1.0;
        term *= x / ap;
        sum += term;
        if term.abs() < sum.abs() * EPS {
            break;
        }
    }
    sum * (-x + a * x.ln() - ln_gamma(a)).exp()
}

/// Regularized upper incomplete gamma Q(a,x) by Lentz continued fraction.
fn gamma_q_cf(a: f64, x: f64) -> f64 {
    let tiny = 1e-300;
    let mut b = x + 1.0 - a;
    let mut c = 1.0 / tiny;
    let mut d = 1.0 / b;
    let mut h = d;
    for i in 1..=MAX_ITER {
        let an = -(i as f64) * (i as f64 - a);
        b += 2.0;
        d = an * d + b;
        if d.abs() < tiny {
            d = tiny;
        }
        c = b + an / c;
        if c.abs() < tiny {
            c = tiny;
        }
        d = 1.0 / d;
        let del = d * c;
        h *= del;
        if (del - 1.0).abs() < EPS {
            break;
        }
    }
    (-x + a * x.ln() - ln_gamma(a)).exp() * h
}

/// Lanczos approximation of ln Γ(x) for x > 0.
fn ln_gamma(x: f64) -> f64 {
    const COEF: [f64; 6] = [
        76.18009172947146,
        -86.50532032941677,
        24.01409824083091,
        -1.231739572450155,
        0.1208650973866179e-2,
        -0.5395239384953e-5,
    ];
    let tmp = x + 5.5;
    let tmp = tmp - (x + 0.5) * tmp.ln();
    let mut ser = 1.000000000190015;
    for (j, c) in COEF.iter().enumerate() {
        ser += c / (x + 1.0 + j as f64);
    }
    -tmp + (2.5066282746310005 * ser / x).ln()
}
