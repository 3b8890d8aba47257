//! Brute-force checks for closed-form results: truncated summation with a
//! certified tail bound, adaptive quadrature, and Monte Carlo moments.

use std::fmt;

use rand::SeedableRng;
use rand_chacha::ChaCha20Rng;
use serde::Serialize;

use crate::error::Result;
use crate::families::{ConjugateParams, Family, ObsContext, Support};
use crate::quadrature::{integrate, integrate_above, integrate_line, QuadOptions, Quadrature};

/// Hard cap on the number of summed terms.
pub const TERM_CAP: u64 = 1_000_000;

/// Default certified tail mass for discrete sums.
pub const DEFAULT_TAIL_TOL: f64 = 1e-12;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum Verdict {
    Pass,
    Fail,
    Inconclusive,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct OracleReport {
    pub target: String,
    pub closed_form: f64,
    pub oracle_value: f64,
    pub abs_error: f64,
    pub rel_error: f64,
    pub tolerance: f64,
    pub verdict: Verdict,
    pub note: Option<String>,
}

impl OracleReport {
    /// Compares against an absolute tolerance.
    pub fn absolute(target: impl Into<String>, closed: f64, oracle: f64, tol: f64) -> Self {
        Self::build(target.into(), closed, oracle, tol, false)
    }

    /// Compares against a relative tolerance.
    pub fn relative(target: impl Into<String>, closed: f64, oracle: f64, tol: f64) -> Self {
        Self::build(target.into(), closed, oracle, tol, true)
    }

    fn build(target: String, closed: f64, oracle: f64, tol: f64, relative: bool) -> Self {
        let abs_error = (closed - oracle).abs();
        let rel_error = if oracle != 0.0 {
            abs_error / oracle.abs()
        } else {
            abs_error
        };
        let err = if relative { rel_error } else { abs_error };
        let verdict = if !oracle.is_finite() || !closed.is_finite() {
            if closed == oracle {
                Verdict::Pass
            } else {
                Verdict::Fail
            }
        } else if err <= tol {
            Verdict::Pass
        } else {
            Verdict::Fail
        };
        OracleReport {
            target,
            closed_form: closed,
            oracle_value: oracle,
            abs_error,
            rel_error,
            tolerance: tol,
            verdict,
            note: None,
        }
    }

    pub fn inconclusive(mut self, why: impl Into<String>) -> Self {
        self.verdict = Verdict::Inconclusive;
        self.note = Some(why.into());
        self
    }

    pub fn passed(&self) -> bool {
        self.verdict == Verdict::Pass
    }
}

impl fmt::Display for OracleReport {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let tag = match self.verdict {
            Verdict::Pass => "PASS",
            Verdict::Fail => "FAIL",
            Verdict::Inconclusive => "INCONCLUSIVE",
        };
        write!(
            f,
            "[{tag}] {}: closed={:.12e} oracle={:.12e} abs={:.3e} rel={:.3e} tol={:.1e}",
            self.target,
            self.closed_form,
            self.oracle_value,
            self.abs_error,
            self.rel_error,
            self.tolerance
        )?;
        if let Some(note) = &self.note {
            write!(f, " ({note})")?;
        }
        Ok(())
    }
}

/// How the mass beyond the last summed term is bounded.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum TailBound {
    /// Support ends at this value; the sum is exact.
    Finite(u64),
    /// `p(k+1)/p(k)` is monotone in `k` and tends to `limit < 1`; the tail
    /// after `K` is at most `p(K) ρ/(1 − ρ)` with `ρ = max(ratio_K, limit)`.
    MonotoneRatio { limit: f64 },
    /// Chebyshev–Markov with a known second moment: `P(Y > K) ≤ m2/(K+1)²`.
    SecondMoment(f64),
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PmfSum {
    pub total: f64,
    pub terms: u64,
    pub tail_bound: f64,
    pub certified: bool,
}

/// Sums `pmf(0), pmf(1), …` until the certified tail falls below
/// `tail_tol` or [`TERM_CAP`] is reached.
pub fn pmf_sum<F: Fn(u64) -> f64>(pmf: F, bound: TailBound, tail_tol: f64) -> PmfSum {
    let mut total = 0.0;
    let mut prev = f64::NAN;
    let mut k = 0u64;
    loop {
        let p = pmf(k);
        total += p;
        let tail = match bound {
            TailBound::Finite(n) => {
                if k >= n {
                    0.0
                } else {
                    f64::INFINITY
                }
            }
            TailBound::MonotoneRatio { limit } => {
                let ratio = if prev > 0.0 { p / prev } else { f64::NAN };
                let rho = ratio.max(limit);
                if k > 0 && rho < 1.0 && p.is_finite() {
                    p * rho / (1.0 - rho)
                } else {
                    f64::INFINITY
                }
            }
            TailBound::SecondMoment(m2) => m2 / ((k + 1) as f64).powi(2),
        };
        if tail <= tail_tol {
            return PmfSum {
                total,
                terms: k + 1,
                tail_bound: tail,
                certified: true,
            };
        }
        if k + 1 >= TERM_CAP {
            return PmfSum {
                total,
                terms: k + 1,
                tail_bound: tail,
                certified: false,
            };
        }
        prev = p;
        k += 1;
    }
}

/// Total predictive mass by summation; passes when `|Σp − 1| ≤ tol` with a
/// certified tail below `tol`.
pub fn pmf_total<F: Fn(u64) -> f64>(
    target: impl Into<String>,
    pmf: F,
    bound: TailBound,
    tol: f64,
) -> OracleReport {
    let sum = pmf_sum(pmf, bound, tol.min(1e-6) * 1e-2);
    let report = OracleReport::absolute(target, 1.0, sum.total, tol);
    if sum.certified {
        report
    } else {
        report.inconclusive(format!(
            "term cap reached, tail bound {:.3e}",
            sum.tail_bound
        ))
    }
}

/// Integration region for continuous densities.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Region {
    /// Whole line, centred at `center` with spread `width`.
    Line {
        center: f64,
        width: f64,
    },
    /// `(lower, ∞)`, with the log-excess centred at `center`.
    Above {
        lower: f64,
        center: f64,
        width: f64,
    },
    Interval {
        lo: f64,
        hi: f64,
    },
}

impl Region {
    pub fn integrate<F: Fn(f64) -> f64>(&self, f: F, opts: QuadOptions) -> Quadrature {
        match *self {
            Region::Line { center, width } => integrate_line(f, center, width, opts),
            Region::Above {
                lower,
                center,
                width,
            } => integrate_above(f, lower, center, width, opts),
            Region::Interval { lo, hi } => integrate(f, lo, hi, opts),
        }
    }
}

fn opts(tol: f64) -> QuadOptions {
    QuadOptions {
        abs_tol: (tol * 1e-2).max(1e-14),
        rel_tol: 1e-13,
        max_intervals: 6000,
        initial_panels: 32,
    }
}

/// `∫ pdf` over `region`, compared with 1.
pub fn pdf_integral<F: Fn(f64) -> f64>(
    target: impl Into<String>,
    pdf: F,
    region: Region,
    tol: f64,
) -> OracleReport {
    let q = region.integrate(pdf, opts(tol));
    let report = OracleReport::absolute(target, 1.0, q.value, tol);
    if q.converged {
        report
    } else {
        report.inconclusive(format!("quadrature error estimate {:.3e}", q.error))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Moment {
    Mean,
    Variance,
}

/// Mean or variance of a density by quadrature, compared with `closed`
/// to a relative tolerance.
pub fn moment_by_oracle<F: Fn(f64) -> f64>(
    target: impl Into<String>,
    pdf: F,
    region: Region,
    moment: Moment,
    closed: f64,
    rel_tol: f64,
) -> OracleReport {
    let o = QuadOptions {
        abs_tol: 1e-13,
        rel_tol: rel_tol * 1e-3,
        max_intervals: 8000,
        initial_panels: 32,
    };
    let mass = region.integrate(&pdf, o);
    let m1 = region.integrate(|x| x * pdf(x), o);
    let (value, converged) = match moment {
        Moment::Mean => (m1.value / mass.value, m1.converged && mass.converged),
        Moment::Variance => {
            let mean = m1.value / mass.value;
            let c2 = region.integrate(|x| (x - mean) * (x - mean) * pdf(x), o);
            (c2.value / mass.value, c2.converged && m1.converged)
        }
    };
    let report = OracleReport::relative(target, closed, value, rel_tol);
    if converged {
        report
    } else {
        report.inconclusive("quadrature did not converge")
    }
}

/// Mean or variance of a discrete law by summation, stopped once past the
/// bulk the terms stay negligible (or at the term cap).
pub fn pmf_moment<F: Fn(u64) -> f64>(
    target: impl Into<String>,
    pmf: F,
    bound: TailBound,
    moment: Moment,
    closed: f64,
    rel_tol: f64,
) -> OracleReport {
    let mut s0 = 0.0;
    let mut s1 = 0.0;
    let mut s2 = 0.0;
    let mut k = 0u64;
    let limit = match bound {
        TailBound::Finite(n) => n,
        _ => TERM_CAP - 1,
    };
    let mut quiet = 0;
    while k <= limit {
        let p = pmf(k);
        let x = k as f64;
        s0 += p;
        s1 += x * p;
        s2 += x * x * p;
        // stop once the second-moment increments are negligible for a while
        if s0 > 0.5 && p <= 1e-17 * s0 && x * x * p <= 1e-17 * s2.max(1e-300) {
            quiet += 1;
            if quiet > 64 {
                break;
            }
        } else {
            quiet = 0;
        }
        k += 1;
    }
    let mean = s1 / s0;
    let value = match moment {
        Moment::Mean => mean,
        Moment::Variance => s2 / s0 - mean * mean,
    };
    let report = OracleReport::relative(target, closed, value, rel_tol);
    if k > limit && !matches!(bound, TailBound::Finite(_)) {
        report.inconclusive("term cap reached")
    } else {
        report
    }
}

/// Monte Carlo mean or variance with a 3σ acceptance band.
pub fn mc_moment<F: FnMut(&mut ChaCha20Rng) -> f64>(
    target: impl Into<String>,
    mut sampler: F,
    n_draws: usize,
    seed: u64,
    moment: Moment,
    closed: f64,
) -> OracleReport {
    let n_draws = n_draws.max(1000);
    let mut rng = ChaCha20Rng::seed_from_u64(seed);
    let xs: Vec<f64> = (0..n_draws).map(|_| sampler(&mut rng)).collect();
    let n = n_draws as f64;
    let mean = xs.iter().sum::<f64>() / n;
    let m2 = xs.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / n;
    let (value, se) = match moment {
        Moment::Mean => (mean, (m2 / n).sqrt()),
        Moment::Variance => {
            let m4 = xs.iter().map(|x| (x - mean).powi(4)).sum::<f64>() / n;
            (m2 * n / (n - 1.0), ((m4 - m2 * m2) / n).sqrt())
        }
    };
    let band = 3.0 * se;
    let mut report = OracleReport::absolute(target, closed, value, band);
    report.note = Some(format!("{n_draws} draws, 3-sigma band"));
    report
}

/// Integration region suited to a family's predictive law.
pub fn predictive_region(family: Family, p: ConjugateParams, ctx: &ObsContext) -> Result<Region> {
    let support = family.support(ctx)?;
    let (m, v) = family.statistic_moments(p, ctx)?;
    Ok(match support {
        Support::Real => Region::Line {
            center: m,
            width: v.sqrt().max(1e-3),
        },
        Support::Above { lower } => {
            let center = match family {
                Family::Weibull => {
                    let nu = ctx.nu.unwrap_or(1.0);
                    (m.max(1e-300)).ln() / nu
                }
                Family::LogNormal => m,
                Family::Pareto => (m.exp() - 1.0).max(1e-300).ln(),
                Family::InverseGamma => -(m.max(1e-300)).ln(),
                _ => {
                    let mean = family.conjugate_law(p, ctx)?.mean();
                    family.conditional_mean(mean, ctx)?.max(1e-300).ln()
                }
            };
            let width = match family {
                Family::LogNormal => v.sqrt().max(0.05),
                Family::Normal => 1.0,
                _ => 1.0,
            };
            Region::Above {
                lower,
                center: if center.is_finite() { center } else { 0.0 },
                width,
            }
        }
        Support::Counts { .. } => Region::Interval { lo: 0.0, hi: 0.0 },
    })
}

/// Total predictive mass of a family at `(r, s)`: summation for discrete
/// families, quadrature otherwise.
pub fn predictive_total(
    family: Family,
    p: ConjugateParams,
    ctx: &ObsContext,
    tol: f64,
) -> Result<OracleReport> {
    let target = format!("{family} predictive mass at (r={}, s={})", p.r, p.s);
    let pmf = |k: u64| {
        family
            .forecast_logdensity(p, k as f64, ctx)
            .map(f64::exp)
            .unwrap_or(f64::NAN)
    };
    Ok(match family.support(ctx)? {
        Support::Counts { upper: Some(n) } => pmf_total(target, pmf, TailBound::Finite(n), tol),
        Support::Counts { upper: None } => {
            let bound = discrete_tail_bound(family, p, ctx)?;
            pmf_total(target, pmf, bound, tol)
        }
        _ if family == Family::Pareto => {
            // the tail in y runs past f64 range: integrate u = log y up to
            // U_MAX and add the remaining mass from the distribution function
            const U_MAX: f64 = 700.0;
            let near = integrate(
                |t| {
                    let u = U_MAX * t;
                    family
                        .forecast_logdensity(p, u.exp(), ctx)
                        .map(|l| (l + u).exp() * U_MAX)
                        .unwrap_or(0.0)
                },
                0.0,
                1.0,
                opts(tol),
            );
            let tail = 1.0 - family.forecast_cdf(p, U_MAX.exp(), ctx)?;
            let report = OracleReport::absolute(target, 1.0, near.value + tail, tol);
            if near.converged {
                report
            } else {
                report.inconclusive(format!("quadrature error estimate {:.3e}", near.error))
            }
        }
        _ => {
            let region = predictive_region(family, p, ctx)?;
            pdf_integral(
                target,
                |y| {
                    family
                        .forecast_logdensity(p, y, ctx)
                        .map(f64::exp)
                        .unwrap_or(0.0)
                },
                region,
                tol,
            )
        }
    })
}

/// Tail bound for the unbounded discrete predictives. The negative-binomial
/// bound uses `E y²` from the mixing integral over the conjugate law, not the
/// closed-form predictive variance.
pub fn discrete_tail_bound(
    family: Family,
    p: ConjugateParams,
    ctx: &ObsContext,
) -> Result<TailBound> {
    Ok(match family {
        Family::Poisson => TailBound::MonotoneRatio {
            limit: 1.0 / (1.0 + p.s),
        },
        _ => {
            let n = ctx.n.unwrap_or(1) as f64;
            let law = family.conjugate_law(p, ctx)?;
            let (_, hi) = law.support();
            let conditional_m2 = |pi: f64| {
                let m = n * (1.0 - pi) / pi;
                n * (1.0 - pi) / (pi * pi) + m * m
            };
            let q = integrate(
                |pi| conditional_m2(pi) * law.ln_pdf(pi).exp(),
                0.0,
                hi.unwrap_or(1.0),
                QuadOptions::default().with_abs_tol(1e-10),
            );
            TailBound::SecondMoment(q.value * (1.0 + 1e-6) + q.error)
        }
    })
}
