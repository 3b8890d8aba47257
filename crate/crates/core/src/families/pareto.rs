use rand::RngCore;

use super::{
    conjugate_err, obs_err, open_uniform, ConjugateLaw, ConjugateParams, FamilyOps, ObsContext,
    Support, LN_2PI,
};
use crate::error::{Error, Result};
use crate::special::{digamma, trigamma, ApproxMode};
use crate::state_space::PredictorMoments;

const NAME: &str = "pareto";

/// `p(y | λ) = λ y^{−λ−1}` on `y ≥ 1`, `λ ~ Gamma(s + 1, r)`, `η = log λ`.
pub(crate) struct Pareto;

impl FamilyOps for Pareto {
    fn name(&self) -> &'static str {
        NAME
    }

    fn support(&self, _ctx: &ObsContext) -> Result<Support> {
        Ok(Support::Above { lower: 1.0 })
    }

    fn check_obs(&self, y: f64, _ctx: &ObsContext) -> Result<()> {
        if y.is_finite() && y >= 1.0 {
            Ok(())
        } else {
            Err(obs_err(NAME, y, "expected y >= 1"))
        }
    }

    fn check_params(&self, p: ConjugateParams, _ctx: &ObsContext) -> Result<()> {
        if p.r > 0.0 && p.s + 1.0 > 0.0 && p.r.is_finite() && p.s.is_finite() {
            Ok(())
        } else {
            Err(conjugate_err(NAME, p, "need r > 0 and s + 1 > 0"))
        }
    }

    fn link(&self, state: f64) -> f64 {
        state.ln()
    }

    fn inverse_link(&self, eta: f64) -> f64 {
        eta.exp()
    }

    fn conditional_mean(&self, state: f64, _ctx: &ObsContext) -> Result<f64> {
        Ok(if state > 1.0 {
            state / (state - 1.0)
        } else {
            f64::INFINITY
        })
    }

    fn matching(&self, pm: PredictorMoments, ctx: &ObsContext) -> Result<ConjugateParams> {
        let p = ConjugateParams::new((-pm.f).exp() / pm.q, (1.0 - pm.q) / pm.q);
        self.check_params(p, ctx)?;
        Ok(p)
    }

    fn approx_moments(&self, p: ConjugateParams, _ctx: &ObsContext) -> Result<PredictorMoments> {
        let a = p.s + 1.0;
        Ok(PredictorMoments::new((a / p.r).ln(), 1.0 / a))
    }

    fn posterior(&self, p: ConjugateParams, y: f64, _ctx: &ObsContext) -> Result<ConjugateParams> {
        Ok(ConjugateParams::new(p.r + y.ln(), p.s + 1.0))
    }

    fn predictor_moments(
        &self,
        p: ConjugateParams,
        _ctx: &ObsContext,
        mode: ApproxMode,
    ) -> Result<PredictorMoments> {
        let a = p.s + 1.0;
        Ok(PredictorMoments::new(
            digamma(a, mode)? - p.r.ln(),
            trigamma(a, mode)?,
        ))
    }

    fn forecast_logdensity(&self, p: ConjugateParams, y: f64, _ctx: &ObsContext) -> Result<f64> {
        let (r, s) = (p.r, p.s);
        Ok((s + 1.0).ln() + (s + 1.0) * r.ln() - y.ln() - (s + 2.0) * (r + y.ln()).ln())
    }

    /// `λ` puts mass below 1, so neither moment of `y` exists.
    fn forecast_moments(&self, _p: ConjugateParams, _ctx: &ObsContext) -> Result<(f64, f64)> {
        Ok((f64::INFINITY, f64::INFINITY))
    }

    /// Moments of `log y`: mean `r/s`, variance `r²(s + 1)/(s²(s − 1))`.
    fn statistic_moments(&self, p: ConjugateParams, _ctx: &ObsContext) -> Result<(f64, f64)> {
        let (r, s) = (p.r, p.s);
        let mean = if s > 0.0 { r / s } else { f64::INFINITY };
        let var = if s > 1.0 {
            r * r * (s + 1.0) / (s * s * (s - 1.0))
        } else {
            f64::INFINITY
        };
        Ok((mean, var))
    }

    fn forecast_sf(&self, p: ConjugateParams, y: f64, _ctx: &ObsContext) -> Option<f64> {
        if y <= 1.0 {
            return Some(1.0);
        }
        Some((-(p.s + 1.0) * (y.ln() / p.r).ln_1p()).exp())
    }

    fn discount(
        &self,
        post: ConjugateParams,
        delta: f64,
        ctx: &ObsContext,
        _next: &ObsContext,
        _mode: ApproxMode,
    ) -> Result<ConjugateParams> {
        let p = ConjugateParams::new(delta * post.r, delta * post.s);
        self.check_params(p, ctx)?;
        Ok(p)
    }

    fn law(&self, p: ConjugateParams, _ctx: &ObsContext) -> Result<ConjugateLaw> {
        Ok(ConjugateLaw::Gamma {
            shape: p.s + 1.0,
            rate: p.r,
        })
    }

    fn obs_logdensity(&self, y: f64, state: f64, _ctx: &ObsContext) -> Result<f64> {
        if !(state > 0.0) {
            return Err(Error::domain("pareto state", state, "lambda > 0"));
        }
        Ok(state.ln() - (state + 1.0) * y.ln())
    }

    /// Density of `λ_t | λ_{t−1}` under a normal shock on
    /// `log(1 − 1/λ)`, defined for `λ > 1`.
    fn transition_logdensity(&self, now: f64, prev: f64, omega: f64) -> Result<f64> {
        for v in [now, prev] {
            if !(v > 1.0 && v.is_finite()) {
                return Err(Error::domain("pareto transition", v, "lambda > 1"));
            }
        }
        let shock = (now * (prev - 1.0) / (prev * (now - 1.0))).ln();
        Ok(-0.5 * (LN_2PI + omega.ln())
            - now.ln()
            - (now - 1.0).ln()
            - shock * shock / (2.0 * omega))
    }

    fn sample(&self, state: f64, _ctx: &ObsContext, rng: &mut dyn RngCore) -> Result<f64> {
        if !(state > 0.0) {
            return Err(Error::domain("pareto state", state, "lambda > 0"));
        }
        Ok(open_uniform(rng).powf(-1.0 / state))
    }
}

/// `x ~ Beta(λ, 1)` on (0, 1) maps to a Pareto(λ) observation `1/x`.
pub fn beta_upper_to_pareto(x: f64) -> Result<f64> {
    if x > 0.0 && x <= 1.0 {
        Ok(1.0 / x)
    } else {
        Err(obs_err(NAME, x, "beta observation must lie in (0, 1]"))
    }
}

/// `x ~ Beta(1, λ)` on (0, 1) maps to a Pareto(λ) observation `1/(1 − x)`.
pub fn beta_lower_to_pareto(x: f64) -> Result<f64> {
    if (0.0..1.0).contains(&x) {
        Ok(1.0 / (1.0 - x))
    } else {
        Err(obs_err(NAME, x, "beta observation must lie in [0, 1)"))
    }
}
