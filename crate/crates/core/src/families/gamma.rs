use rand::RngCore;
use rand_distr::{Distribution, Gamma as GammaDist};

use super::{
    check_positive_obs, conjugate_err, lognormal_transition, ConjugateLaw, ConjugateParams,
    FamilyOps, ObsContext, Support,
};
use crate::error::{Error, Result};
use crate::special::{digamma, log_gamma, trigamma, ApproxMode};
use crate::state_space::PredictorMoments;

/// `y | β ~ Gamma(α, β)` (shape, rate) with `β ~ Gamma(α s + 1, r)` and
/// `η = log β`. With `inverse` set, `1/y` follows that gamma law.
pub(crate) struct Gamma {
    pub inverse: bool,
}

impl Gamma {
    fn z(&self, y: f64) -> f64 {
        if self.inverse {
            1.0 / y
        } else {
            y
        }
    }

    fn shape(&self, p: ConjugateParams, ctx: &ObsContext) -> Result<(f64, f64)> {
        let alpha = ctx.shape_alpha(self.name())?;
        Ok((alpha, alpha * p.s + 1.0))
    }
}

impl FamilyOps for Gamma {
    fn name(&self) -> &'static str {
        if self.inverse {
            "inverse-gamma"
        } else {
            "gamma"
        }
    }

    fn support(&self, _ctx: &ObsContext) -> Result<Support> {
        Ok(Support::Above { lower: 0.0 })
    }

    fn check_obs(&self, y: f64, _ctx: &ObsContext) -> Result<()> {
        check_positive_obs(self.name(), y)
    }

    fn check_params(&self, p: ConjugateParams, ctx: &ObsContext) -> Result<()> {
        let (_, a) = self.shape(p, ctx)?;
        if p.r > 0.0 && a > 0.0 && p.r.is_finite() && a.is_finite() {
            Ok(())
        } else {
            Err(conjugate_err(
                self.name(),
                p,
                "need r > 0 and alpha*s + 1 > 0",
            ))
        }
    }

    fn link(&self, state: f64) -> f64 {
        state.ln()
    }

    fn inverse_link(&self, eta: f64) -> f64 {
        eta.exp()
    }

    fn conditional_mean(&self, state: f64, ctx: &ObsContext) -> Result<f64> {
        let alpha = ctx.shape_alpha(self.name())?;
        Ok(if self.inverse {
            if alpha > 1.0 {
                state / (alpha - 1.0)
            } else {
                f64::INFINITY
            }
        } else {
            alpha / state
        })
    }

    fn matching(&self, pm: PredictorMoments, ctx: &ObsContext) -> Result<ConjugateParams> {
        let alpha = ctx.shape_alpha(self.name())?;
        let p = ConjugateParams::new((-pm.f).exp() / pm.q, (1.0 - pm.q) / (alpha * pm.q));
        if p.s <= 0.0 {
            return Err(conjugate_err(
                self.name(),
                p,
                &format!("q = {} >= 1; the forecast mean is infinite, shrink q", pm.q),
            ));
        }
        self.check_params(p, ctx)?;
        Ok(p)
    }

    fn q_limit(&self, _f: f64) -> Option<f64> {
        Some(1.0)
    }

    fn approx_moments(&self, p: ConjugateParams, ctx: &ObsContext) -> Result<PredictorMoments> {
        let (_, a) = self.shape(p, ctx)?;
        Ok(PredictorMoments::new((a / p.r).ln(), 1.0 / a))
    }

    fn posterior(&self, p: ConjugateParams, y: f64, _ctx: &ObsContext) -> Result<ConjugateParams> {
        Ok(ConjugateParams::new(p.r + self.z(y), p.s + 1.0))
    }

    fn predictor_moments(
        &self,
        p: ConjugateParams,
        ctx: &ObsContext,
        mode: ApproxMode,
    ) -> Result<PredictorMoments> {
        let (_, a) = self.shape(p, ctx)?;
        Ok(PredictorMoments::new(
            digamma(a, mode)? - p.r.ln(),
            trigamma(a, mode)?,
        ))
    }

    fn forecast_logdensity(&self, p: ConjugateParams, y: f64, ctx: &ObsContext) -> Result<f64> {
        let (alpha, a) = self.shape(p, ctx)?;
        let z = self.z(y);
        let dens = a * p.r.ln() + log_gamma(a + alpha)? - log_gamma(alpha)? - log_gamma(a)?
            + (alpha - 1.0) * z.ln()
            - (a + alpha) * (p.r + z).ln();
        Ok(if self.inverse {
            dens - 2.0 * y.ln()
        } else {
            dens
        })
    }

    fn forecast_moments(&self, p: ConjugateParams, ctx: &ObsContext) -> Result<(f64, f64)> {
        let (alpha, a) = self.shape(p, ctx)?;
        if !self.inverse {
            return self.statistic_moments(p, ctx);
        }
        let mean = if alpha > 1.0 {
            a / (p.r * (alpha - 1.0))
        } else {
            f64::INFINITY
        };
        let var = if alpha > 2.0 {
            (a * (a + 1.0) / (alpha - 2.0) + a) / (p.r * p.r * (alpha - 1.0) * (alpha - 1.0))
        } else {
            f64::INFINITY
        };
        Ok((mean, var))
    }

    fn statistic_moments(&self, p: ConjugateParams, ctx: &ObsContext) -> Result<(f64, f64)> {
        let (alpha, _) = self.shape(p, ctx)?;
        let (r, s) = (p.r, p.s);
        let mean = if s > 0.0 { r / s } else { f64::INFINITY };
        let var = if alpha * s > 1.0 {
            r * r * (s + 1.0) / (s * s * (alpha * s - 1.0))
        } else {
            f64::INFINITY
        };
        Ok((mean, var))
    }

    fn discount(
        &self,
        post: ConjugateParams,
        delta: f64,
        ctx: &ObsContext,
        next: &ObsContext,
        _mode: ApproxMode,
    ) -> Result<ConjugateParams> {
        let alpha = ctx.shape_alpha(self.name())?;
        let alpha_next = next.shape_alpha(self.name()).unwrap_or(alpha);
        Ok(ConjugateParams::new(
            delta * post.r,
            delta * alpha * post.s / alpha_next,
        ))
    }

    fn law(&self, p: ConjugateParams, ctx: &ObsContext) -> Result<ConjugateLaw> {
        let (_, a) = self.shape(p, ctx)?;
        Ok(ConjugateLaw::Gamma {
            shape: a,
            rate: p.r,
        })
    }

    fn obs_logdensity(&self, y: f64, state: f64, ctx: &ObsContext) -> Result<f64> {
        if !(state > 0.0) {
            return Err(Error::domain("gamma state", state, "beta > 0"));
        }
        let alpha = ctx.shape_alpha(self.name())?;
        let z = self.z(y);
        let dens = alpha * state.ln() + (alpha - 1.0) * z.ln() - state * z - log_gamma(alpha)?;
        Ok(if self.inverse {
            dens - 2.0 * y.ln()
        } else {
            dens
        })
    }

    fn transition_logdensity(&self, now: f64, prev: f64, omega: f64) -> Result<f64> {
        lognormal_transition(now, prev, omega)
    }

    fn sample(&self, state: f64, ctx: &ObsContext, rng: &mut dyn RngCore) -> Result<f64> {
        let alpha = ctx.shape_alpha(self.name())?;
        let dist = GammaDist::new(alpha, 1.0 / state)
            .map_err(|_| Error::domain("gamma state", state, "beta > 0"))?;
        let z: f64 = dist.sample(rng);
        Ok(if self.inverse { 1.0 / z } else { z })
    }
}

/// Law of the variance `σ²` in the squared-return model
/// `y² | σ² ~ Gamma(1/2, 1/(2σ²))`: inverse gamma with the given shape and
/// scale.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct VolatilityLaw {
    pub shape: f64,
    pub scale: f64,
}

impl VolatilityLaw {
    pub fn mean(&self) -> f64 {
        if self.shape > 1.0 {
            self.scale / (self.shape - 1.0)
        } else {
            f64::INFINITY
        }
    }

    pub fn variance(&self) -> f64 {
        if self.shape > 2.0 {
            let m = self.mean();
            m * m / (self.shape - 2.0)
        } else {
            f64::INFINITY
        }
    }
}

/// `σ²` law implied by gamma-family parameters `(r, s)` fitted to squared
/// returns with shape `alpha` (1/2 for Gaussian returns):
/// `β = 1/(2σ²) ~ Gamma(α s + 1, r)` gives `σ² ~ IG(α s + 1, r/2)`.
pub fn volatility_posterior(p: ConjugateParams, alpha: f64) -> VolatilityLaw {
    VolatilityLaw {
        shape: alpha * p.s + 1.0,
        scale: p.r / 2.0,
    }
}

/// Exponentially weighted mean of a squared-return history, most recent
/// last: `Σ δ^i y²_{k+1−i} / Σ δ^i` for `i = 1..k`. Equals `r/s` after
/// `k` discounted updates from `r = s = 0`.
pub fn ewma_volatility(squared: &[f64], delta: f64) -> Result<f64> {
    crate::state_space::check_delta(delta)?;
    if squared.is_empty() {
        return Err(Error::Structural("empty squared-return history".into()));
    }
    let mut num = 0.0;
    let mut den = 0.0;
    let mut w = 1.0;
    for &y2 in squared.iter().rev() {
        w *= delta;
        num += w * y2;
        den += w;
    }
    Ok(num / den)
}
