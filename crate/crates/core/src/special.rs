//! Log-gamma, digamma and trigamma, plus the half-line Gaussian integral.
//!
//! `Exact` evaluation lifts the argument with the recurrence until it is at
//! least [`LIFT_THRESHOLD`] and then sums an eight-term asymptotic series.
//! `PaperApprox` evaluates the short closed forms
//! `ψ(x) ≈ log x + 1/(2x)` and `ψ'(x) ≈ (1 − 1/(2x))/x` that appear in the
//! original posterior-moment formulas. Note the sign of the `1/(2x)` term is
//! the opposite of the true asymptotic expansion. `Matched` keeps only the
//! leading terms `log x` and `1/x`.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Recurrence lift target for the asymptotic series.
pub const LIFT_THRESHOLD: f64 = 10.0;

const HALF_LN_2PI: f64 = 0.918_938_533_204_672_8;

// B_{2k} / (2k (2k-1)), k = 1..8
const LN_GAMMA_SERIES: [f64; 8] = [
    1.0 / 12.0,
    -1.0 / 360.0,
    1.0 / 1260.0,
    -1.0 / 1680.0,
    1.0 / 1188.0,
    -691.0 / 360_360.0,
    1.0 / 156.0,
    -3617.0 / 122_400.0,
];

// -B_{2k} / (2k), k = 1..8
const DIGAMMA_SERIES: [f64; 8] = [
    -1.0 / 12.0,
    1.0 / 120.0,
    -1.0 / 252.0,
    1.0 / 240.0,
    -1.0 / 132.0,
    691.0 / 32_760.0,
    -1.0 / 12.0,
    3617.0 / 8160.0,
];

// B_{2k}, k = 1..8
const TRIGAMMA_SERIES: [f64; 8] = [
    1.0 / 6.0,
    -1.0 / 30.0,
    1.0 / 42.0,
    -1.0 / 30.0,
    5.0 / 66.0,
    -691.0 / 2730.0,
    7.0 / 6.0,
    -3617.0 / 510.0,
];

/// Selects how digamma and trigamma are evaluated.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ApproxMode {
    /// Recurrence plus asymptotic series, accurate to 1e-10.
    #[default]
    Exact,
    /// The short printed approximations, kept for reproducing published
    /// posterior-moment and discount formulas.
    PaperApprox,
    /// `ψ(x) ≈ log x`, `ψ'(x) ≈ 1/x`: the identities moment matching
    /// inverts, so posterior moments re-match to exactly the conjugate
    /// update. Discounting follows `Exact`.
    Matched,
}

fn check_positive(function: &'static str, x: f64) -> Result<()> {
    if x.is_finite() && x > 0.0 {
        Ok(())
    } else {
        Err(Error::domain(function, x, "finite and > 0"))
    }
}

/// Horner evaluation of `Σ c_k u^k` for k = 0..n-1.
fn poly(coeffs: &[f64], u: f64) -> f64 {
    coeffs.iter().rev().fold(0.0, |acc, c| acc * u + c)
}

/// `log Γ(x)` for `x > 0`.
pub fn log_gamma(x: f64) -> Result<f64> {
    check_positive("log_gamma", x)?;
    let mut z = x;
    let mut shift = 1.0;
    while z < LIFT_THRESHOLD {
        shift *= z;
        z += 1.0;
    }
    let inv = 1.0 / z;
    let series = inv * poly(&LN_GAMMA_SERIES, inv * inv);
    Ok((z - 0.5) * z.ln() - z + HALF_LN_2PI + series - shift.ln())
}

/// Digamma `ψ(x) = d log Γ(x) / dx`.
pub fn digamma(x: f64, mode: ApproxMode) -> Result<f64> {
    check_positive("digamma", x)?;
    Ok(match mode {
        ApproxMode::Exact => digamma_exact(x),
        ApproxMode::PaperApprox => x.ln() + 0.5 / x,
        ApproxMode::Matched => x.ln(),
    })
}

/// Trigamma `ψ'(x)`.
pub fn trigamma(x: f64, mode: ApproxMode) -> Result<f64> {
    check_positive("trigamma", x)?;
    Ok(match mode {
        ApproxMode::Exact => trigamma_exact(x),
        ApproxMode::PaperApprox => (1.0 - 0.5 / x) / x,
        ApproxMode::Matched => 1.0 / x,
    })
}

fn digamma_exact(x: f64) -> f64 {
    let mut z = x;
    let mut acc = 0.0;
    while z < LIFT_THRESHOLD {
        acc -= 1.0 / z;
        z += 1.0;
    }
    let inv2 = 1.0 / (z * z);
    acc + z.ln() - 0.5 / z + inv2 * poly(&DIGAMMA_SERIES, inv2)
}

fn trigamma_exact(x: f64) -> f64 {
    let mut z = x;
    let mut acc = 0.0;
    while z < LIFT_THRESHOLD {
        acc += 1.0 / (z * z);
        z += 1.0;
    }
    let inv = 1.0 / z;
    let inv2 = inv * inv;
    acc + inv + 0.5 * inv2 + inv2 * inv * poly(&TRIGAMMA_SERIES, inv2)
}

/// `∫₀^∞ exp(−b (y − a)²) dy = ½ √(π/b) · erfc(−a √b)`.
pub fn gaussian_tail_integral(a: f64, b: f64) -> Result<f64> {
    if !(b.is_finite() && b > 0.0) {
        return Err(Error::domain(
            "gaussian_tail_integral",
            b,
            "b finite and > 0",
        ));
    }
    if a.is_nan() {
        return Err(Error::domain("gaussian_tail_integral", a, "a not NaN"));
    }
    Ok(0.5 * (std::f64::consts::PI / b).sqrt() * libm::erfc(-a * b.sqrt()))
}

/// Natural log of [`gaussian_tail_integral`], stable for large negative `a`.
pub fn ln_gaussian_tail_integral(a: f64, b: f64) -> Result<f64> {
    let value = gaussian_tail_integral(a, b)?;
    if value > 1e-300 {
        return Ok(value.ln());
    }
    // erfc(x) ~ exp(-x²) / (x √π) for large x
    let x = -a * b.sqrt();
    Ok((0.5 * (std::f64::consts::PI / b).sqrt()).ln()
        - x * x
        - (x * std::f64::consts::PI.sqrt()).ln())
}

/// `log B(a, b)`.
pub fn log_beta(a: f64, b: f64) -> Result<f64> {
    Ok(log_gamma(a)? + log_gamma(b)? - log_gamma(a + b)?)
}

/// `log C(n, k)` for real-valued arguments.
pub(crate) fn log_binomial(n: f64, k: f64) -> Result<f64> {
    if k == 0.0 || k == n {
        return Ok(0.0);
    }
    Ok(log_gamma(n + 1.0)? - log_gamma(k + 1.0)? - log_gamma(n - k + 1.0)?)
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::f64::consts::PI;

    const EULER_GAMMA: f64 = 0.577_215_664_901_532_9;

    #[test]
    fn log_gamma_small_integers() {
        assert!(log_gamma(1.0).unwrap().abs() < 1e-14);
        assert!(log_gamma(2.0).unwrap().abs() < 1e-14);
        assert!((log_gamma(5.0).unwrap() - 24f64.ln()).abs() < 1e-13);
        assert!((log_gamma(0.5).unwrap() - 0.5 * PI.ln()).abs() < 1e-13);
    }

    #[test]
    fn log_gamma_matches_libm() {
        for &x in &[1e-6, 1e-3, 0.1, 0.7, 1.5, 3.3, 9.99, 10.0, 27.5, 1e3, 1e8] {
            let ours = log_gamma(x).unwrap();
            let theirs = libm::lgamma(x);
            assert!(
                (ours - theirs).abs() <= 1e-10 * theirs.abs().max(1.0),
                "x={x}: {ours} vs {theirs}"
            );
        }
    }

    #[test]
    fn log_gamma_recurrence() {
        for i in 1..200 {
            let x = 1e-3 * 1.07f64.powi(i);
            let lhs = log_gamma(x + 1.0).unwrap();
            let rhs = log_gamma(x).unwrap() + x.ln();
            assert!((lhs - rhs).abs() < 1e-12 * rhs.abs().max(1.0), "x={x}");
        }
    }

    #[test]
    fn domain_errors() {
        assert!(log_gamma(0.0).is_err());
        assert!(log_gamma(-1.0).is_err());
        assert!(log_gamma(f64::NAN).is_err());
        assert!(digamma(0.0, ApproxMode::Exact).is_err());
        assert!(trigamma(f64::INFINITY, ApproxMode::Exact).is_err());
        assert!(gaussian_tail_integral(0.0, 0.0).is_err());
        assert!(gaussian_tail_integral(0.0, -2.0).is_err());
    }

    #[test]
    fn digamma_at_one_is_minus_euler_gamma() {
        // Independent series: ψ(1) = -γ with γ = lim (H_n - ln n); use
        // the convergent form γ = Σ_{k≥1} (1/k - ln(1 + 1/k)).
        let mut gamma = 0.0;
        for k in 1..2_000_000u64 {
            let k = k as f64;
            gamma += 1.0 / k - (1.0 / k).ln_1p();
        }
        // tail Σ_{k>N} ~ 1/(2N)
        gamma += 1.0 / (2.0 * 2_000_000.0);
        assert!((gamma - EULER_GAMMA).abs() < 1e-12);
        let psi1 = digamma(1.0, ApproxMode::Exact).unwrap();
        assert!((psi1 + gamma).abs() < 1e-10, "{psi1}");
        assert!((psi1 + 0.577_215_664_9).abs() < 1e-9);
    }

    #[test]
    fn trigamma_at_one_is_basel_sum() {
        let n = 1_000_000u64;
        let mut sum: f64 = (1..=n).map(|k| 1.0 / (k as f64 * k as f64)).sum();
        sum += 1.0 / n as f64; // integral tail bound, error O(1/n²)
        assert!((sum - PI * PI / 6.0).abs() < 1e-11);
        let t1 = trigamma(1.0, ApproxMode::Exact).unwrap();
        assert!((t1 - PI * PI / 6.0).abs() < 1e-10, "{t1}");
    }

    #[test]
    fn recurrences_hold() {
        for &x in &[0.5, 1.0, 3.0] {
            let d = digamma(x + 1.0, ApproxMode::Exact).unwrap()
                - digamma(x, ApproxMode::Exact).unwrap();
            assert!((d - 1.0 / x).abs() < 1e-12);
        }
        for &x in &[1.0, 2.0] {
            let d = trigamma(x, ApproxMode::Exact).unwrap()
                - trigamma(x + 1.0, ApproxMode::Exact).unwrap();
            assert!((d - 1.0 / (x * x)).abs() < 1e-12);
        }
    }

    #[test]
    fn digamma_half_and_derivative_of_log_gamma() {
        let half = digamma(0.5, ApproxMode::Exact).unwrap();
        assert!((half - (-EULER_GAMMA - 2.0 * 2f64.ln())).abs() < 1e-12);
        // central difference of log Γ
        for &x in &[0.3, 2.5, 14.0] {
            let h = 1e-5;
            let fd = (libm::lgamma(x + h) - libm::lgamma(x - h)) / (2.0 * h);
            assert!((fd - digamma(x, ApproxMode::Exact).unwrap()).abs() < 1e-8);
        }
    }

    #[test]
    fn paper_approx_closed_forms() {
        let d = digamma(10.0, ApproxMode::PaperApprox).unwrap();
        assert!((d - (10f64.ln() + 0.05)).abs() < 1e-15);
        assert!((d - 2.352_585_1).abs() < 1e-7);
        let t = trigamma(2.0, ApproxMode::PaperApprox).unwrap();
        assert!((t - 0.375).abs() < 1e-15);
    }

    #[test]
    fn paper_approx_is_within_order_one_over_x() {
        for i in 0..400 {
            let x = 2.0 + 0.25 * i as f64;
            let gap = (digamma(x, ApproxMode::PaperApprox).unwrap()
                - digamma(x, ApproxMode::Exact).unwrap())
            .abs();
            assert!(gap <= 1.1 / x, "x={x} gap={gap}");
        }
    }

    #[test]
    fn gaussian_tail_integral_limits() {
        let v = gaussian_tail_integral(0.0, 1.0).unwrap();
        assert!((v - PI.sqrt() / 2.0).abs() < 1e-15);
        let far = gaussian_tail_integral(50.0, 3.0).unwrap();
        assert!((far - (PI / 3.0).sqrt()).abs() < 1e-14);
        let neg = ln_gaussian_tail_integral(-40.0, 1.0).unwrap();
        assert!(neg.is_finite() && neg < -1500.0);
    }

    #[test]
    fn gaussian_tail_integral_against_trapezoid() {
        // a=1, b=2: composite Simpson over [0, 12] with a fine grid
        let (a, b) = (1.0, 2.0);
        let n = 200_000;
        let h = 12.0 / n as f64;
        let f = |y: f64| (-b * (y - a) * (y - a)).exp();
        let mut s = f(0.0) + f(12.0);
        for i in 1..n {
            let w = if i % 2 == 1 { 4.0 } else { 2.0 };
            s += w * f(i as f64 * h);
        }
        let simpson = s * h / 3.0;
        let closed = gaussian_tail_integral(a, b).unwrap();
        assert!((simpson - closed).abs() < 1e-8);
    }
}
