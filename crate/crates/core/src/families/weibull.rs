use rand::RngCore;

use super::{
    check_positive_obs, conjugate_err, lognormal_transition, open_uniform, ConjugateLaw,
    ConjugateParams, FamilyOps, ObsContext, Support,
};
use crate::error::{Error, Result};
use crate::special::{digamma, log_gamma, trigamma, ApproxMode};
use crate::state_space::PredictorMoments;

const NAME: &str = "weibull";

/// `p(y | λ) = (ν/λ) y^{ν−1} exp(−y^ν/λ)` with `1/λ ~ Gamma(s − 1, r)` and
/// `η = log λ`. `ν = 1` gives the exponential.
pub(crate) struct Weibull;

impl FamilyOps for Weibull {
    fn name(&self) -> &'static str {
        NAME
    }

    fn support(&self, _ctx: &ObsContext) -> Result<Support> {
        Ok(Support::Above { lower: 0.0 })
    }

    fn check_obs(&self, y: f64, _ctx: &ObsContext) -> Result<()> {
        check_positive_obs(NAME, y)
    }

    fn check_params(&self, p: ConjugateParams, _ctx: &ObsContext) -> Result<()> {
        if p.r > 0.0 && p.s > 1.0 && p.r.is_finite() && p.s.is_finite() {
            Ok(())
        } else {
            Err(conjugate_err(NAME, p, "need r > 0 and s > 1"))
        }
    }

    fn link(&self, state: f64) -> f64 {
        state.ln()
    }

    fn inverse_link(&self, eta: f64) -> f64 {
        eta.exp()
    }

    fn conditional_mean(&self, state: f64, ctx: &ObsContext) -> Result<f64> {
        let nu = ctx.shape_nu(NAME)?;
        Ok(state.powf(1.0 / nu) * log_gamma(1.0 + 1.0 / nu)?.exp())
    }

    fn matching(&self, pm: PredictorMoments, ctx: &ObsContext) -> Result<ConjugateParams> {
        let p = ConjugateParams::new(pm.f.exp() / pm.q, (1.0 + pm.q) / pm.q);
        self.check_params(p, ctx)?;
        Ok(p)
    }

    fn approx_moments(&self, p: ConjugateParams, _ctx: &ObsContext) -> Result<PredictorMoments> {
        Ok(PredictorMoments::new(
            (p.r / (p.s - 1.0)).ln(),
            1.0 / (p.s - 1.0),
        ))
    }

    fn posterior(&self, p: ConjugateParams, y: f64, ctx: &ObsContext) -> Result<ConjugateParams> {
        let nu = ctx.shape_nu(NAME)?;
        Ok(ConjugateParams::new(p.r + y.powf(nu), p.s + 1.0))
    }

    fn predictor_moments(
        &self,
        p: ConjugateParams,
        _ctx: &ObsContext,
        mode: ApproxMode,
    ) -> Result<PredictorMoments> {
        Ok(PredictorMoments::new(
            p.r.ln() - digamma(p.s - 1.0, mode)?,
            trigamma(p.s - 1.0, mode)?,
        ))
    }

    fn forecast_logdensity(&self, p: ConjugateParams, y: f64, ctx: &ObsContext) -> Result<f64> {
        let nu = ctx.shape_nu(NAME)?;
        let (r, s) = (p.r, p.s);
        Ok(
            nu.ln() + (s - 1.0).ln() + (s - 1.0) * r.ln() + (nu - 1.0) * y.ln()
                - s * (r + y.powf(nu)).ln(),
        )
    }

    /// Moments of `y` itself: `E y^k = Γ(1 + k/ν) r^{k/ν} Γ(s − 1 − k/ν)/Γ(s − 1)`.
    fn forecast_moments(&self, p: ConjugateParams, ctx: &ObsContext) -> Result<(f64, f64)> {
        let nu = ctx.shape_nu(NAME)?;
        let a = p.s - 1.0;
        let raw = |k: f64| -> Result<f64> {
            if a <= k / nu {
                return Ok(f64::INFINITY);
            }
            Ok(
                (log_gamma(1.0 + k / nu)? + (k / nu) * p.r.ln() + log_gamma(a - k / nu)?
                    - log_gamma(a)?)
                .exp(),
            )
        };
        let m1 = raw(1.0)?;
        let m2 = raw(2.0)?;
        let var = if m2.is_finite() {
            m2 - m1 * m1
        } else {
            f64::INFINITY
        };
        Ok((m1, var))
    }

    /// Moments of `y^ν`: mean `r/(s − 2)`, variance
    /// `r²(s − 1)/((s − 2)²(s − 3))`.
    fn statistic_moments(&self, p: ConjugateParams, _ctx: &ObsContext) -> Result<(f64, f64)> {
        let (r, s) = (p.r, p.s);
        let mean = if s > 2.0 {
            r / (s - 2.0)
        } else {
            f64::INFINITY
        };
        let var = if s > 3.0 {
            r * r * (s - 1.0) / ((s - 2.0) * (s - 2.0) * (s - 3.0))
        } else {
            f64::INFINITY
        };
        Ok((mean, var))
    }

    fn forecast_sf(&self, p: ConjugateParams, y: f64, ctx: &ObsContext) -> Option<f64> {
        let nu = ctx.shape_nu(NAME).ok()?;
        if y <= 0.0 {
            return Some(1.0);
        }
        Some((-(p.s - 1.0) * (y.powf(nu) / p.r).ln_1p()).exp())
    }

    fn discount(
        &self,
        post: ConjugateParams,
        delta: f64,
        ctx: &ObsContext,
        _next: &ObsContext,
        mode: ApproxMode,
    ) -> Result<ConjugateParams> {
        let s = match mode {
            ApproxMode::Exact | ApproxMode::Matched => delta * (post.s - 2.0) + 2.0,
            ApproxMode::PaperApprox => delta * post.s,
        };
        let p = ConjugateParams::new(delta * post.r, s);
        self.check_params(p, ctx)?;
        Ok(p)
    }

    fn law(&self, p: ConjugateParams, _ctx: &ObsContext) -> Result<ConjugateLaw> {
        Ok(ConjugateLaw::InverseGamma {
            shape: p.s - 1.0,
            scale: p.r,
        })
    }

    fn obs_logdensity(&self, y: f64, state: f64, ctx: &ObsContext) -> Result<f64> {
        if !(state > 0.0) {
            return Err(Error::domain("weibull state", state, "lambda > 0"));
        }
        let nu = ctx.shape_nu(NAME)?;
        Ok(nu.ln() - state.ln() + (nu - 1.0) * y.ln() - y.powf(nu) / state)
    }

    fn transition_logdensity(&self, now: f64, prev: f64, omega: f64) -> Result<f64> {
        lognormal_transition(now, prev, omega)
    }

    fn sample(&self, state: f64, ctx: &ObsContext, rng: &mut dyn RngCore) -> Result<f64> {
        let nu = ctx.shape_nu(NAME)?;
        Ok((-state * open_uniform(rng).ln()).powf(1.0 / nu))
    }
}
