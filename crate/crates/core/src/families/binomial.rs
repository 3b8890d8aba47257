use rand::RngCore;
use rand_distr::{Binomial as BinomialDist, Distribution};

use super::{
    check_count, conjugate_err, expit, logit, logit_transition, ConjugateLaw, ConjugateParams,
    FamilyOps, ObsContext, Support,
};
use crate::error::{Error, Result};
use crate::special::{digamma, log_beta, log_binomial, trigamma, ApproxMode};
use crate::state_space::PredictorMoments;

const NAME: &str = "binomial";

/// `y | π ~ Bin(n, π)`, `π ~ Beta(r, s − r)`, logit link.
pub(crate) struct Binomial;

impl FamilyOps for Binomial {
    fn name(&self) -> &'static str {
        NAME
    }

    fn support(&self, ctx: &ObsContext) -> Result<Support> {
        Ok(Support::Counts {
            upper: Some(ctx.trials(NAME)? as u64),
        })
    }

    fn check_obs(&self, y: f64, ctx: &ObsContext) -> Result<()> {
        check_count(NAME, y, Some(ctx.trials(NAME)?))
    }

    fn check_params(&self, p: ConjugateParams, _ctx: &ObsContext) -> Result<()> {
        if p.r > 0.0 && p.s > p.r && p.s.is_finite() {
            Ok(())
        } else {
            Err(conjugate_err(NAME, p, "need s > r > 0"))
        }
    }

    fn link(&self, state: f64) -> f64 {
        logit(state)
    }

    fn inverse_link(&self, eta: f64) -> f64 {
        expit(eta)
    }

    fn conditional_mean(&self, state: f64, ctx: &ObsContext) -> Result<f64> {
        Ok(ctx.trials(NAME)? * state)
    }

    fn matching(&self, pm: PredictorMoments, _ctx: &ObsContext) -> Result<ConjugateParams> {
        let e = pm.f.exp();
        let p = ConjugateParams::new((1.0 + e) / pm.q, (2.0 + e + 1.0 / e) / pm.q);
        self.check_params(p, _ctx)?;
        Ok(p)
    }

    fn approx_moments(&self, p: ConjugateParams, _ctx: &ObsContext) -> Result<PredictorMoments> {
        let b = p.s - p.r;
        Ok(PredictorMoments::new((p.r / b).ln(), 1.0 / p.r + 1.0 / b))
    }

    fn posterior(&self, p: ConjugateParams, y: f64, ctx: &ObsContext) -> Result<ConjugateParams> {
        Ok(ConjugateParams::new(p.r + y, p.s + ctx.trials(NAME)?))
    }

    fn predictor_moments(
        &self,
        p: ConjugateParams,
        _ctx: &ObsContext,
        mode: ApproxMode,
    ) -> Result<PredictorMoments> {
        let (a, b) = (p.r, p.s - p.r);
        Ok(PredictorMoments::new(
            digamma(a, mode)? - digamma(b, mode)?,
            trigamma(a, mode)? + trigamma(b, mode)?,
        ))
    }

    fn forecast_logdensity(&self, p: ConjugateParams, y: f64, ctx: &ObsContext) -> Result<f64> {
        let n = ctx.trials(NAME)?;
        let (a, b) = (p.r, p.s - p.r);
        Ok(log_binomial(n, y)? + log_beta(a + y, b + n - y)? - log_beta(a, b)?)
    }

    fn forecast_moments(&self, p: ConjugateParams, ctx: &ObsContext) -> Result<(f64, f64)> {
        let n = ctx.trials(NAME)?;
        let (r, s) = (p.r, p.s);
        let mean = n * r / s;
        let var = n * r * (s - r) * (s + n) / (s * s * (s + 1.0));
        Ok((mean, var))
    }

    fn discount(
        &self,
        post: ConjugateParams,
        delta: f64,
        _ctx: &ObsContext,
        _next: &ObsContext,
        mode: ApproxMode,
    ) -> Result<ConjugateParams> {
        let r = delta * (post.r - 1.0) + 1.0;
        let s = match mode {
            ApproxMode::Exact | ApproxMode::Matched => delta * post.s + 2.0 - 2.0 * delta,
            ApproxMode::PaperApprox => delta * post.s + 2.0 - delta,
        };
        let p = ConjugateParams::new(r, s);
        self.check_params(p, _ctx)?;
        Ok(p)
    }

    fn law(&self, p: ConjugateParams, _ctx: &ObsContext) -> Result<ConjugateLaw> {
        Ok(ConjugateLaw::Beta {
            a: p.r,
            b: p.s - p.r,
        })
    }

    fn obs_logdensity(&self, y: f64, state: f64, ctx: &ObsContext) -> Result<f64> {
        if !(state > 0.0 && state < 1.0) {
            return Err(Error::domain("binomial state", state, "0 < pi < 1"));
        }
        let n = ctx.trials(NAME)?;
        Ok(log_binomial(n, y)? + y * state.ln() + (n - y) * (-state).ln_1p())
    }

    fn transition_logdensity(&self, now: f64, prev: f64, omega: f64) -> Result<f64> {
        logit_transition(now, prev, omega)
    }

    fn sample(&self, state: f64, ctx: &ObsContext, rng: &mut dyn RngCore) -> Result<f64> {
        let n = ctx.trials(NAME)? as u64;
        let dist = BinomialDist::new(n, state)
            .map_err(|_| Error::domain("binomial state", state, "0 <= pi <= 1"))?;
        Ok(dist.sample(rng) as f64)
    }
}
