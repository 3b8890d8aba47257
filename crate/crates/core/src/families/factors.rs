//! Closed-form one-step Bayes factors `H_t(1) = p₁(y)/p₂(y)` between two
//! models of the same family.

use super::ConjugateParams;
use crate::error::{Error, Result};
use crate::special::log_gamma;

fn positive(name: &'static str, v: f64) -> Result<()> {
    if v > 0.0 && v.is_finite() {
        Ok(())
    } else {
        Err(Error::domain(name, v, "positive and finite"))
    }
}

/// Gamma responses with shared shape `alpha`, models differing in
/// `(r, s)` (e.g. through the discount factor).
pub fn log_h1_gamma_delta(
    p1: ConjugateParams,
    p2: ConjugateParams,
    y: f64,
    alpha: f64,
) -> Result<f64> {
    positive("y", y)?;
    positive("alpha", alpha)?;
    let term = |p: ConjugateParams| -> Result<f64> {
        let a = alpha * p.s + 1.0;
        Ok(a * p.r.ln() + log_gamma(a + alpha)? - log_gamma(a)? - (a + alpha) * (p.r + y).ln())
    };
    Ok(term(p1)? - term(p2)?)
}

/// Gamma responses sharing `(r, s)` but with shapes `a1` against `a2`.
pub fn log_h1_gamma_alpha(p: ConjugateParams, y: f64, a1: f64, a2: f64) -> Result<f64> {
    positive("y", y)?;
    positive("alpha", a1)?;
    positive("alpha", a2)?;
    let (r, s) = (p.r, p.s);
    Ok(s * (a1 - a2) * r.ln()
        + (a1 - a2) * y.ln()
        + (s + 1.0) * (a2 - a1) * (r + y).ln()
        + log_gamma(a2)?
        - log_gamma(a1)?
        + log_gamma(a1 * s + a1 + 1.0)?
        - log_gamma(a2 * s + a2 + 1.0)?
        + log_gamma(a2 * s + 1.0)?
        - log_gamma(a1 * s + 1.0)?)
}

/// Log-normal responses with observation variances `v1`, `v2`.
pub fn log_h1_lognormal(
    p1: ConjugateParams,
    v1: f64,
    p2: ConjugateParams,
    v2: f64,
    y: f64,
) -> Result<f64> {
    positive("y", y)?;
    let z = y.ln();
    let w1 = v1 + 1.0 / p1.s;
    let w2 = v2 + 1.0 / p2.s;
    positive("predictive variance", w1)?;
    positive("predictive variance", w2)?;
    let e1 = z - p1.r / p1.s;
    let e2 = z - p2.r / p2.s;
    Ok(0.5 * (w2 / w1).ln() + e2 * e2 / (2.0 * w2) - e1 * e1 / (2.0 * w1))
}

/// Weibull responses with common shape `nu`.
pub fn log_h1_weibull(p1: ConjugateParams, p2: ConjugateParams, y: f64, nu: f64) -> Result<f64> {
    positive("y", y)?;
    let x = y.powf(nu);
    let term =
        |p: ConjugateParams| (p.s - 1.0).ln() + (p.s - 1.0) * p.r.ln() - p.s * (p.r + x).ln();
    Ok(term(p1) - term(p2))
}

/// Pareto responses.
pub fn log_h1_pareto(p1: ConjugateParams, p2: ConjugateParams, y: f64) -> Result<f64> {
    if !(y >= 1.0) {
        return Err(Error::domain("y", y, "y >= 1"));
    }
    let l = y.ln();
    let term = |p: ConjugateParams| {
        (p.s + 1.0) * p.r.ln() + (p.s + 1.0).ln() - (p.s + 2.0) * (p.r + l).ln()
    };
    Ok(term(p1) - term(p2))
}
