use rand::RngCore;
use rand_distr::{Distribution, Poisson as PoissonDist};

use super::{
    check_count, conjugate_err, lognormal_transition, ConjugateLaw, ConjugateParams, FamilyOps,
    ObsContext, Support,
};
use crate::error::{Error, Result};
use crate::special::{digamma, log_gamma, trigamma, ApproxMode};
use crate::state_space::PredictorMoments;

const NAME: &str = "poisson";

/// `y | λ ~ Poisson(λ)`, `λ ~ Gamma(r, s)` (shape, rate), log link.
pub(crate) struct Poisson;

impl FamilyOps for Poisson {
    fn name(&self) -> &'static str {
        NAME
    }

    fn support(&self, _ctx: &ObsContext) -> Result<Support> {
        Ok(Support::Counts { upper: None })
    }

    fn check_obs(&self, y: f64, _ctx: &ObsContext) -> Result<()> {
        check_count(NAME, y, None)
    }

    fn check_params(&self, p: ConjugateParams, _ctx: &ObsContext) -> Result<()> {
        if p.r > 0.0 && p.s > 0.0 && p.r.is_finite() && p.s.is_finite() {
            Ok(())
        } else {
            Err(conjugate_err(NAME, p, "need r > 0 and s > 0"))
        }
    }

    fn link(&self, state: f64) -> f64 {
        state.ln()
    }

    fn inverse_link(&self, eta: f64) -> f64 {
        eta.exp()
    }

    fn conditional_mean(&self, state: f64, _ctx: &ObsContext) -> Result<f64> {
        Ok(state)
    }

    fn matching(&self, pm: PredictorMoments, ctx: &ObsContext) -> Result<ConjugateParams> {
        let p = ConjugateParams::new(1.0 / pm.q, (-pm.f).exp() / pm.q);
        self.check_params(p, ctx)?;
        Ok(p)
    }

    fn approx_moments(&self, p: ConjugateParams, _ctx: &ObsContext) -> Result<PredictorMoments> {
        Ok(PredictorMoments::new((p.r / p.s).ln(), 1.0 / p.r))
    }

    fn posterior(&self, p: ConjugateParams, y: f64, _ctx: &ObsContext) -> Result<ConjugateParams> {
        Ok(ConjugateParams::new(p.r + y, p.s + 1.0))
    }

    fn predictor_moments(
        &self,
        p: ConjugateParams,
        _ctx: &ObsContext,
        mode: ApproxMode,
    ) -> Result<PredictorMoments> {
        Ok(PredictorMoments::new(
            digamma(p.r, mode)? - p.s.ln(),
            trigamma(p.r, mode)?,
        ))
    }

    fn forecast_logdensity(&self, p: ConjugateParams, y: f64, _ctx: &ObsContext) -> Result<f64> {
        let (r, s) = (p.r, p.s);
        Ok(
            log_gamma(r + y)? - log_gamma(r)? - log_gamma(y + 1.0)? + r * (s / (1.0 + s)).ln()
                - y * s.ln_1p(),
        )
    }

    fn forecast_moments(&self, p: ConjugateParams, _ctx: &ObsContext) -> Result<(f64, f64)> {
        Ok((p.r / p.s, p.r * (p.s + 1.0) / (p.s * p.s)))
    }

    fn discount(
        &self,
        post: ConjugateParams,
        delta: f64,
        ctx: &ObsContext,
        _next: &ObsContext,
        _mode: ApproxMode,
    ) -> Result<ConjugateParams> {
        let p = ConjugateParams::new(delta * (post.r - 1.0) + 1.0, delta * post.s);
        self.check_params(p, ctx)?;
        Ok(p)
    }

    fn law(&self, p: ConjugateParams, _ctx: &ObsContext) -> Result<ConjugateLaw> {
        Ok(ConjugateLaw::Gamma {
            shape: p.r,
            rate: p.s,
        })
    }

    fn obs_logdensity(&self, y: f64, state: f64, _ctx: &ObsContext) -> Result<f64> {
        if !(state > 0.0) {
            return Err(Error::domain("poisson state", state, "lambda > 0"));
        }
        Ok(y * state.ln() - state - log_gamma(y + 1.0)?)
    }

    fn transition_logdensity(&self, now: f64, prev: f64, omega: f64) -> Result<f64> {
        lognormal_transition(now, prev, omega)
    }

    fn sample(&self, state: f64, _ctx: &ObsContext, rng: &mut dyn RngCore) -> Result<f64> {
        let dist = PoissonDist::new(state)
            .map_err(|_| Error::domain("poisson state", state, "0 < lambda < 1.8e19"))?;
        Ok(dist.sample(rng))
    }
}
