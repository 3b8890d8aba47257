use crate::special::{ln_gaussian_tail_integral, log_beta, log_gamma};

use super::inverse_gaussian::ln_kappa;

/// Distribution of a family's state parameter under given `(r, s)`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum ConjugateLaw {
    /// `Beta(a, b)` on a probability.
    Beta {
        a: f64,
        b: f64,
    },
    /// Gamma with shape and rate.
    Gamma {
        shape: f64,
        rate: f64,
    },
    /// Inverse gamma with shape and scale (`1/x ~ Gamma(shape, scale)`).
    InverseGamma {
        shape: f64,
        scale: f64,
    },
    Normal {
        mean: f64,
        variance: f64,
    },
    /// Law of the inverse-Gaussian mean `μ`, with density
    /// `κ(r, s) · 2/μ³ · exp(−r/μ² + 2s/μ)`.
    InverseGaussianMean {
        r: f64,
        s: f64,
    },
}

impl ConjugateLaw {
    pub fn ln_pdf(&self, x: f64) -> f64 {
        match *self {
            ConjugateLaw::Beta { a, b } => {
                if !(x > 0.0 && x < 1.0) {
                    return f64::NEG_INFINITY;
                }
                (a - 1.0) * x.ln() + (b - 1.0) * (-x).ln_1p() - log_beta(a, b).unwrap_or(f64::NAN)
            }
            ConjugateLaw::Gamma { shape, rate } => {
                if !(x > 0.0) {
                    return f64::NEG_INFINITY;
                }
                shape * rate.ln() - log_gamma(shape).unwrap_or(f64::NAN) + (shape - 1.0) * x.ln()
                    - rate * x
            }
            ConjugateLaw::InverseGamma { shape, scale } => {
                if !(x > 0.0) {
                    return f64::NEG_INFINITY;
                }
                shape * scale.ln()
                    - log_gamma(shape).unwrap_or(f64::NAN)
                    - (shape + 1.0) * x.ln()
                    - scale / x
            }
            ConjugateLaw::Normal { mean, variance } => super::normal_logpdf(x, mean, variance),
            ConjugateLaw::InverseGaussianMean { r, s } => {
                if !(x > 0.0) {
                    return f64::NEG_INFINITY;
                }
                ln_kappa(r, s).unwrap_or(f64::NAN) + std::f64::consts::LN_2
                    - 3.0 * x.ln()
                    - r / (x * x)
                    + 2.0 * s / x
            }
        }
    }

    pub fn mean(&self) -> f64 {
        match *self {
            ConjugateLaw::Beta { a, b } => a / (a + b),
            ConjugateLaw::Gamma { shape, rate } => shape / rate,
            ConjugateLaw::InverseGamma { shape, scale } => {
                if shape > 1.0 {
                    scale / (shape - 1.0)
                } else {
                    f64::INFINITY
                }
            }
            ConjugateLaw::Normal { mean, .. } => mean,
            ConjugateLaw::InverseGaussianMean { r, s } => {
                // 2κ e^{s²/r} G(s/r, r), assembled in logs
                let lk = ln_kappa(r, s).unwrap_or(f64::NAN);
                let lg = ln_gaussian_tail_integral(s / r, r).unwrap_or(f64::NAN);
                (std::f64::consts::LN_2 + lk + s * s / r + lg).exp()
            }
        }
    }

    /// Variance, `f64::INFINITY` where it does not exist.
    pub fn variance(&self) -> f64 {
        match *self {
            ConjugateLaw::Beta { a, b } => a * b / ((a + b) * (a + b) * (a + b + 1.0)),
            ConjugateLaw::Gamma { shape, rate } => shape / (rate * rate),
            ConjugateLaw::InverseGamma { shape, scale } => {
                if shape > 2.0 {
                    scale * scale / ((shape - 1.0) * (shape - 1.0) * (shape - 2.0))
                } else {
                    f64::INFINITY
                }
            }
            ConjugateLaw::Normal { variance, .. } => variance,
            ConjugateLaw::InverseGaussianMean { .. } => f64::INFINITY,
        }
    }

    /// Lower end of the support (`None` for the real line) and upper end
    /// (`None` for unbounded).
    pub fn support(&self) -> (Option<f64>, Option<f64>) {
        match self {
            ConjugateLaw::Beta { .. } => (Some(0.0), Some(1.0)),
            ConjugateLaw::Normal { .. } => (None, None),
            _ => (Some(0.0), None),
        }
    }

    /// A rough location and log-scale spread, used to centre quadrature.
    pub fn scale_hint(&self) -> (f64, f64) {
        match *self {
            ConjugateLaw::Beta { a, b } => (a / (a + b), (a * b).sqrt() / (a + b)),
            ConjugateLaw::Gamma { shape, rate } => ((shape / rate).ln(), 1.0 / shape.sqrt()),
            ConjugateLaw::InverseGamma { shape, scale } => {
                ((scale / shape).ln(), 1.0 / shape.sqrt())
            }
            ConjugateLaw::Normal { mean, variance } => (mean, variance.sqrt()),
            ConjugateLaw::InverseGaussianMean { r, s } => {
                // 1/μ is roughly N(s/r, 1/(2r)) truncated to the positive axis
                let centre = (s / r).max(1.0 / r.sqrt());
                ((1.0 / centre).ln(), 1.0)
            }
        }
    }
}

/// Normalising integral `∫₀^∞ 2x exp(−r x² + 2 s x) dx` in closed form.
#[cfg(test)]
pub(crate) fn ig_normaliser(r: f64, s: f64) -> f64 {
    1.0 / r
        + 2.0 * s / r
            * (s * s / r).exp()
            * crate::special::gaussian_tail_integral(s / r, r).unwrap_or(f64::NAN)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::quadrature::{integrate, integrate_above, QuadOptions};

    fn total(law: ConjugateLaw) -> f64 {
        let (c, w) = law.scale_hint();
        match law.support() {
            (Some(lo), Some(hi)) => {
                integrate(|x| law.ln_pdf(x).exp(), lo, hi, QuadOptions::default()).value
            }
            (Some(lo), None) => {
                integrate_above(|x| law.ln_pdf(x).exp(), lo, c, w, QuadOptions::default()).value
            }
            _ => {
                crate::quadrature::integrate_line(
                    |x| law.ln_pdf(x).exp(),
                    c,
                    w,
                    QuadOptions::default(),
                )
                .value
            }
        }
    }

    #[test]
    fn laws_normalise() {
        let laws = [
            ConjugateLaw::Beta { a: 2.0, b: 3.5 },
            ConjugateLaw::Gamma {
                shape: 3.0,
                rate: 0.5,
            },
            ConjugateLaw::InverseGamma {
                shape: 4.0,
                scale: 2.0,
            },
            ConjugateLaw::Normal {
                mean: 1.0,
                variance: 0.3,
            },
            ConjugateLaw::InverseGaussianMean { r: 2.0, s: 1.0 },
        ];
        for law in laws {
            assert!((total(law) - 1.0).abs() < 1e-7, "{law:?}: {}", total(law));
        }
    }

    #[test]
    fn ig_normaliser_matches_quadrature() {
        for &(r, s) in &[(2.0, 1.0), (0.5, 0.0), (3.0, 4.0)] {
            let q = integrate_above(
                |x| 2.0 * x * (-r * x * x + 2.0 * s * x).exp(),
                0.0,
                0.0,
                1.0,
                QuadOptions::default(),
            );
            let closed = ig_normaliser(r, s);
            assert!((q.value - closed).abs() < 1e-8 * closed, "{r} {s}");
        }
    }
}
