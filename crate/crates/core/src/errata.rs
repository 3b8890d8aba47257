//! Published formulas that disagree with their own conjugate derivation.
//!
//! The table ships as `errata.tsv`; every row names an oracle check that
//! recomputes the quantity three ways: from the printed form, from the
//! derived form used by this crate, and by brute force.

use crate::error::{Error, Result};
use crate::families::{ConjugateLaw, ConjugateParams, Family, ObsContext};
use crate::oracle::{pdf_integral, pmf_sum, OracleReport, Region, TailBound};
use crate::quadrature::{integrate, integrate_above, QuadOptions};
use crate::special::{digamma, log_binomial, log_gamma, ApproxMode};

pub const ERRATA_TSV: &str = include_str!("../errata.tsv");

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Erratum {
    pub id: String,
    pub location: String,
    pub printed: String,
    pub derived: String,
    pub oracle: String,
}

/// Parsed rows of the shipped table.
pub fn table() -> Result<Vec<Erratum>> {
    let mut rows = Vec::new();
    for (i, line) in ERRATA_TSV.lines().enumerate().skip(1) {
        if line.trim().is_empty() {
            continue;
        }
        let cols: Vec<&str> = line.split('\t').collect();
        if cols.len() != 5 {
            return Err(Error::Structural(format!(
                "errata row {} has {} columns, expected 5",
                i + 1,
                cols.len()
            )));
        }
        rows.push(Erratum {
            id: cols[0].into(),
            location: cols[1].into(),
            printed: cols[2].into(),
            derived: cols[3].into(),
            oracle: cols[4].into(),
        });
    }
    Ok(rows)
}

/// One quantity computed from the printed form, the derived form and a
/// brute-force oracle.
#[derive(Debug, Clone)]
pub struct ErratumCheck {
    pub oracle_id: String,
    pub printed: f64,
    pub derived: f64,
    pub oracle: f64,
    pub rel_tol: f64,
}

impl ErratumCheck {
    fn rel(a: f64, b: f64) -> f64 {
        (a - b).abs() / b.abs().max(1e-300)
    }

    pub fn derived_agrees(&self) -> bool {
        Self::rel(self.derived, self.oracle) <= self.rel_tol
    }

    /// The printed value misses the oracle by more than a hundred times
    /// the tolerance.
    pub fn printed_detected(&self) -> bool {
        !(Self::rel(self.printed, self.oracle) <= 100.0 * self.rel_tol)
    }

    pub fn passed(&self) -> bool {
        self.derived_agrees() && self.printed_detected()
    }

    /// The derived value against the oracle, with the printed value noted.
    pub fn report(&self) -> OracleReport {
        let mut r = OracleReport::relative(
            self.oracle_id.clone(),
            self.derived,
            self.oracle,
            self.rel_tol,
        );
        r.note = Some(format!(
            "printed {:.10e} ({})",
            self.printed,
            if self.printed_detected() {
                "discrepancy detected"
            } else {
                "not distinguishable"
            }
        ));
        if !self.passed() {
            r.verdict = crate::oracle::Verdict::Fail;
        }
        r
    }
}

fn quad() -> QuadOptions {
    QuadOptions {
        abs_tol: 1e-14,
        rel_tol: 1e-12,
        max_intervals: 8000,
        initial_panels: 32,
    }
}

/// Mean of `x` under the normalised density `exp(δ · ln_pdf)` on the law's
/// support.
fn powered_mean(law: ConjugateLaw, delta: f64) -> f64 {
    let f = |x: f64| (delta * law.ln_pdf(x)).exp();
    let (m, sd) = (law.mean(), law.variance().sqrt() / delta.sqrt());
    let o = quad();
    let (z, z1) = match law.support() {
        (Some(lo), Some(hi)) => (
            integrate(f, lo, hi, o).value,
            integrate(|x| x * f(x), lo, hi, o).value,
        ),
        (Some(lo), None) => (
            integrate_above(f, lo, m.ln(), 2.0, o).value,
            integrate_above(|x| x * f(x), lo, m.ln(), 2.0, o).value,
        ),
        _ => (
            integrate(f, m - 40.0 * sd, m + 40.0 * sd, o).value,
            integrate(|x| x * f(x), m - 40.0 * sd, m + 40.0 * sd, o).value,
        ),
    };
    z1 / z
}

/// Variance under the powered density, for laws on the whole line.
fn powered_variance(law: ConjugateLaw, delta: f64) -> f64 {
    let f = |x: f64| (delta * law.ln_pdf(x)).exp();
    let (m, sd) = (law.mean(), law.variance().sqrt() / delta.sqrt());
    let (lo, hi) = (m - 40.0 * sd, m + 40.0 * sd);
    let o = quad();
    let z = integrate(f, lo, hi, o).value;
    let mu = integrate(|x| x * f(x), lo, hi, o).value / z;
    integrate(|x| (x - mu) * (x - mu) * f(x), lo, hi, o).value / z
}

fn pmf_moments<F: Fn(u64) -> f64>(pmf: F, n: u64) -> (f64, f64, f64) {
    let (mut s0, mut s1, mut s2) = (0.0, 0.0, 0.0);
    for k in 0..=n {
        let p = pmf(k);
        let x = k as f64;
        s0 += p;
        s1 += x * p;
        s2 += x * x * p;
    }
    let mean = s1 / s0;
    (s0, mean, s2 / s0 - mean * mean)
}

fn check(id: &str, printed: f64, derived: f64, oracle: f64, rel_tol: f64) -> ErratumCheck {
    ErratumCheck {
        oracle_id: id.into(),
        printed,
        derived,
        oracle,
        rel_tol,
    }
}

/// Runs the named oracle check.
pub fn run_check(oracle_id: &str) -> Result<ErratumCheck> {
    match oracle_id {
        "binomial-forecast-mean" | "binomial-forecast-variance" => {
            let (r, s, n) = (2.0, 5.0, 10u32);
            let p = ConjugateParams::new(r, s);
            let ctx = ObsContext::with_n(n);
            let fam = Family::Binomial;
            let pmf = |k: u64| {
                fam.forecast_logdensity(p, k as f64, &ctx)
                    .map_or(0.0, f64::exp)
            };
            let (_, mean, var) = pmf_moments(pmf, n as u64);
            let (dm, dv) = fam.forecast_moments(p, &ctx)?;
            let nf = n as f64;
            if oracle_id.ends_with("mean") {
                let printed = nf * (r + 1.0) / (r + s + 1.0);
                Ok(check(oracle_id, printed, dm, mean, 1e-10))
            } else {
                let a = r + s + 1.0;
                let printed = nf * (r + 1.0) / a - nf * (r + 1.0) * (r + 2.0) / (a * (a + 1.0))
                    + nf * nf * (r + 1.0) * s / (a * a * (a + 1.0));
                Ok(check(oracle_id, printed, dv, var, 1e-10))
            }
        }
        "binomial-pmf-total" => {
            let (r, s, n) = (2.0, 5.0, 10u32);
            let p = ConjugateParams::new(r, s);
            let ctx = ObsContext::with_n(n);
            let nf = n as f64;
            let derived = |k: u64| {
                Family::Binomial
                    .forecast_logdensity(p, k as f64, &ctx)
                    .map_or(0.0, f64::exp)
            };
            // the printed pmf term by term, from gamma functions
            let printed = |k: u64| {
                let y = k as f64;
                let l = log_gamma(s).unwrap_or(f64::NAN)
                    - log_gamma(r).unwrap_or(f64::NAN)
                    - log_gamma(s - r).unwrap_or(f64::NAN)
                    - log_gamma(s + nf).unwrap_or(f64::NAN)
                    - nf.ln()
                    + log_binomial(nf, y).unwrap_or(f64::NAN)
                    + log_gamma(r + y).unwrap_or(f64::NAN)
                    + log_gamma(s - r + nf - y).unwrap_or(f64::NAN);
                l.exp()
            };
            let bound = TailBound::Finite(n as u64);
            let tp = pmf_sum(printed, bound, 1e-14).total;
            let td = pmf_sum(derived, bound, 1e-14).total;
            Ok(check(oracle_id, tp, td, 1.0, 1e-12))
        }
        "binomial-discount" => {
            let post = ConjugateParams::new(4.0, 13.0);
            let delta = 0.7;
            let ctx = ObsContext::with_n(10);
            let fam = Family::Binomial;
            let oracle = powered_mean(fam.conjugate_law(post, &ctx)?, delta);
            let mean_of = |p: ConjugateParams| fam.conjugate_law(p, &ctx).map(|l| l.mean());
            let derived =
                mean_of(fam.power_discount(post, delta, &ctx, &ctx, ApproxMode::Exact)?)?;
            let printed =
                mean_of(fam.power_discount(post, delta, &ctx, &ctx, ApproxMode::PaperApprox)?)?;
            Ok(check(oracle_id, printed, derived, oracle, 1e-9))
        }
        "pareto-predictive-total" => {
            let (r, s) = (1.5f64, 3.0f64);
            let region = Region::Above {
                lower: 1.0,
                center: r.ln(),
                width: 3.0,
            };
            let printed = |y: f64| {
                if y <= 1.0 {
                    return 0.0;
                }
                (s + 1.0) * r.powf(s + 1.0) / (y * (r + y.ln()).powf(s + 1.0))
            };
            let p = ConjugateParams::new(r, s);
            let ctx = ObsContext::default();
            let derived = |y: f64| {
                if y <= 1.0 {
                    return 0.0;
                }
                Family::Pareto
                    .forecast_logdensity(p, y, &ctx)
                    .map_or(0.0, f64::exp)
            };
            let tp = pdf_integral("printed", printed, region, 1e-10).oracle_value;
            let td = pdf_integral("derived", derived, region, 1e-10).oracle_value;
            Ok(check(oracle_id, tp, td, 1.0, 1e-8))
        }
        "pareto-posterior-log-mean" => {
            let (r, s, y) = (1.5f64, 3.0, 4.0f64);
            // posterior of λ is Gamma(s + 2, r + log y)
            let law = ConjugateLaw::Gamma {
                shape: s + 2.0,
                rate: r + y.ln(),
            };
            let f = |x: f64| law.ln_pdf(x).exp();
            let o = quad();
            let oracle = integrate_above(|x| x.ln() * f(x), 0.0, law.mean().ln(), 2.0, o).value
                / integrate_above(f, 0.0, law.mean().ln(), 2.0, o).value;
            let ctx = ObsContext::default();
            let post = Family::Pareto.posterior_params(ConjugateParams::new(r, s), y, &ctx)?;
            let derived = Family::Pareto
                .posterior_predictor_moments(post, &ctx, ApproxMode::Exact)?
                .f;
            let printed = digamma(s + y.ln() + 1.0, ApproxMode::Exact)? - (r + 1.0).ln();
            Ok(check(oracle_id, printed, derived, oracle, 1e-9))
        }
        "negbin-pmf-total" => {
            let (r, s, n) = (3.0, 2.0, 10u32);
            let nf = n as f64;
            let p = ConjugateParams::new(r, s);
            let ctx = ObsContext::with_n(n);
            let printed = |k: u64| {
                let y = k as f64;
                let l = log_gamma(r + nf + s + 1.0).unwrap_or(f64::NAN)
                    + log_gamma(r + y).unwrap_or(f64::NAN)
                    + log_gamma(nf * s + nf + 1.0).unwrap_or(f64::NAN)
                    - log_gamma(r).unwrap_or(f64::NAN)
                    - log_gamma(nf * s + 1.0).unwrap_or(f64::NAN)
                    - log_gamma(r + y + nf * s + nf + 1.0).unwrap_or(f64::NAN)
                    + log_binomial(y + nf - 1.0, nf - 1.0).unwrap_or(f64::NAN);
                l.exp()
            };
            let derived = |k: u64| {
                Family::NegativeBinomial
                    .forecast_logdensity(p, k as f64, &ctx)
                    .map_or(0.0, f64::exp)
            };
            let bound = crate::oracle::discrete_tail_bound(Family::NegativeBinomial, p, &ctx)?;
            let tp = pmf_sum(printed, bound, 1e-10).total;
            let td = pmf_sum(derived, bound, 1e-10).total;
            Ok(check(oracle_id, tp, td, 1.0, 1e-8))
        }
        "normal-discount" | "lognormal-discount" => {
            let fam = if oracle_id.starts_with("log") {
                Family::LogNormal
            } else {
                Family::Normal
            };
            let ctx = ObsContext::with_v(1.0);
            let post = ConjugateParams::new(1.2, 2.5);
            let delta = 0.8;
            let oracle = powered_variance(fam.conjugate_law(post, &ctx)?, delta);
            let var_of = |p: ConjugateParams| fam.conjugate_law(p, &ctx).map(|l| l.variance());
            let derived =
                var_of(fam.power_discount(post, delta, &ctx, &ctx, ApproxMode::Exact)?)?;
            let printed =
                var_of(fam.power_discount(post, delta, &ctx, &ctx, ApproxMode::PaperApprox)?)?;
            Ok(check(oracle_id, printed, derived, oracle, 1e-9))
        }
        "weibull-discount" => {
            let ctx = ObsContext::with_nu(2.0);
            let post = ConjugateParams::new(3.0, 7.0);
            let delta = 0.75;
            let fam = Family::Weibull;
            // the conjugate variable is 1/λ ~ Gamma(s − 1, r)
            let precision = |p: ConjugateParams| ConjugateLaw::Gamma {
                shape: p.s - 1.0,
                rate: p.r,
            };
            let oracle = powered_mean(precision(post), delta);
            let derived =
                precision(fam.power_discount(post, delta, &ctx, &ctx, ApproxMode::Exact)?).mean();
            let printed =
                precision(fam.power_discount(post, delta, &ctx, &ctx, ApproxMode::PaperApprox)?)
                    .mean();
            Ok(check(oracle_id, printed, derived, oracle, 1e-9))
        }
        "inverse-gaussian-normaliser" => {
            let (r, s) = (2.0f64, 1.3f64);
            // ∫ 2/μ³ exp(−r/μ² + 2s/μ) dμ = 1/κ
            let kernel = |mu: f64| {
                if mu <= 0.0 {
                    return 0.0;
                }
                (std::f64::consts::LN_2 - 3.0 * mu.ln() - r / (mu * mu) + 2.0 * s / mu).exp()
            };
            let z = integrate_above(kernel, 0.0, 0.0, 2.0, quad()).value;
            Ok(check(
                oracle_id,
                crate::families::kappa_printed(r, s),
                crate::families::kappa(r, s)?,
                1.0 / z,
                1e-9,
            ))
        }
        "negbin-initial-mean" => {
            // π0 ~ Beta(2, 1)
            let law = ConjugateLaw::Beta { a: 2.0, b: 1.0 };
            let o = quad();
            let oracle = integrate(|x| x * law.ln_pdf(x).exp(), 0.0, 1.0, o).value;
            Ok(check(oracle_id, 2.0, law.mean(), oracle, 1e-12))
        }
        "volatility-precision-mean" => {
            // y² | β ~ G(1/2, β); 1/σ² = 2β
            let (r, s) = (3.0f64, 4.0f64);
            let ctx = ObsContext::with_alpha(0.5);
            let beta = Family::Gamma.conjugate_law(ConjugateParams::new(r, s), &ctx)?;
            let f = |x: f64| 0.5 * beta.ln_pdf(0.5 * x).exp();
            let o = quad();
            let c = (2.0 * beta.mean()).ln();
            let oracle = integrate_above(|x| x * f(x), 0.0, c, 2.0, o).value
                / integrate_above(f, 0.0, c, 2.0, o).value;
            let derived = (s / 2.0 + 1.0) / (r / 2.0);
            let printed = ((s + 3.0) / 2.0) / (r / 2.0);
            Ok(check(oracle_id, printed, derived, oracle, 1e-9))
        }
        "gamma-bf-delta" | "gamma-bf-alpha" => {
            let (p1, p2, y) = (
                ConjugateParams::new(2.5, 3.0),
                ConjugateParams::new(1.5, 1.2),
                1.7,
            );
            let ratio = |a: ConjugateParams,
                         ca: &ObsContext,
                         b: ConjugateParams,
                         cb: &ObsContext|
             -> Result<f64> {
                Ok(Family::Gamma.forecast_logdensity(a, y, ca)?
                    - Family::Gamma.forecast_logdensity(b, y, cb)?)
            };
            if oracle_id.ends_with("delta") {
                let alpha = 2.0;
                let ctx = ObsContext::with_alpha(alpha);
                let oracle = ratio(p1, &ctx, p2, &ctx)?;
                let derived = crate::families::log_h1_gamma_delta(p1, p2, y, alpha)?;
                let printed_term = |p: ConjugateParams| -> Result<f64> {
                    let a = alpha * p.s;
                    Ok(a * p.r.ln() + log_gamma(a + alpha + 1.0)?
                        - (a + alpha + 1.0) * (p.r + y).ln()
                        - log_gamma(p.r)?)
                };
                let printed = printed_term(p1)? - printed_term(p2)?;
                Ok(check(oracle_id, printed, derived, oracle, 1e-10))
            } else {
                let (a1, a2) = (2.0, 0.5);
                let oracle = ratio(
                    p1,
                    &ObsContext::with_alpha(a1),
                    p1,
                    &ObsContext::with_alpha(a2),
                )?;
                let derived = crate::families::log_h1_gamma_alpha(p1, y, a1, a2)?;
                let (r, s) = (p1.r, p1.s);
                let printed = s * (a1 - a2) * r.ln()
                    + (a1 - a2) * y.ln()
                    + (s + 1.0) * (a2 - a1) * (r + y).ln()
                    + log_gamma(a2)?
                    - log_gamma(a1)?
                    + log_gamma(a1 * s + a1 + 1.0)?
                    - log_gamma(a2 * s + a2 + 1.0)?;
                Ok(check(oracle_id, printed, derived, oracle, 1e-10))
            }
        }
        "lognormal-bf" => {
            let (p1, v1, p2, v2, y) = (
                ConjugateParams::new(0.4, 2.0),
                0.5,
                ConjugateParams::new(-0.3, 1.5),
                1.5,
                3.0f64,
            );
            let oracle = Family::LogNormal.forecast_logdensity(p1, y, &ObsContext::with_v(v1))?
                - Family::LogNormal.forecast_logdensity(p2, y, &ObsContext::with_v(v2))?;
            let derived = crate::families::log_h1_lognormal(p1, v1, p2, v2, y)?;
            let z = y.ln();
            let e1 = z - p1.r / p1.s;
            let e2 = z - p2.r / p2.s;
            let printed = 0.5 * ((v2 + 1.0 / p2.s) / (v1 + 1.0 / p1.s)).ln()
                + e2 * e2 / (2.0 * (v2 - 1.0 / p2.s))
                - e1 * e1 / (2.0 * (v1 - 1.0 / p1.s));
            Ok(check(oracle_id, printed, derived, oracle, 1e-10))
        }
        "pareto-bf" => {
            let (p1, p2, y) = (
                ConjugateParams::new(2.0, 3.0),
                ConjugateParams::new(0.8, 1.5),
                2.5f64,
            );
            let ctx = ObsContext::default();
            let oracle = Family::Pareto.forecast_logdensity(p1, y, &ctx)?
                - Family::Pareto.forecast_logdensity(p2, y, &ctx)?;
            let derived = crate::families::log_h1_pareto(p1, p2, y)?;
            let l = y.ln();
            let printed =
                (p1.s + 1.0) * p1.r.ln() + (p1.s + 1.0).ln() + (p1.s + 1.0) * (p2.r + l).ln()
                    - (p2.s + 1.0) * p2.r.ln()
                    - (p2.s + 1.0).ln()
                    - (p2.s + 1.0) * (p1.r + l).ln();
            Ok(check(oracle_id, printed, derived, oracle, 1e-10))
        }
        other => Err(Error::Config(format!("no errata check named `{other}`"))),
    }
}

/// Runs every row's check.
pub fn check_all() -> Result<Vec<(Erratum, ErratumCheck)>> {
    table()?
        .into_iter()
        .map(|e| {
            let c = run_check(&e.oracle)?;
            Ok((e, c))
        })
        .collect()
}
