use rand::RngCore;

use super::{
    check_count, conjugate_err, expit, logit, logit_transition, open_uniform, ConjugateLaw,
    ConjugateParams, FamilyOps, ObsContext, Support,
};
use crate::error::{Error, Result};
use crate::special::{digamma, log_beta, log_binomial, trigamma, ApproxMode};
use crate::state_space::PredictorMoments;

const NAME: &str = "negative-binomial";

/// `y | π` counts failures before the `n`-th success,
/// `π ~ Beta(n s + 1, r)`, logit link. `n = 1` is the geometric case.
pub(crate) struct NegativeBinomial;

impl FamilyOps for NegativeBinomial {
    fn name(&self) -> &'static str {
        NAME
    }

    fn support(&self, _ctx: &ObsContext) -> Result<Support> {
        Ok(Support::Counts { upper: None })
    }

    fn check_obs(&self, y: f64, _ctx: &ObsContext) -> Result<()> {
        check_count(NAME, y, None)
    }

    fn check_params(&self, p: ConjugateParams, ctx: &ObsContext) -> Result<()> {
        let n = ctx.trials(NAME)?;
        if p.r > 0.0 && n * p.s + 1.0 > 0.0 && p.r.is_finite() && p.s.is_finite() {
            Ok(())
        } else {
            Err(conjugate_err(NAME, p, "need r > 0 and n*s + 1 > 0"))
        }
    }

    fn link(&self, state: f64) -> f64 {
        logit(state)
    }

    fn inverse_link(&self, eta: f64) -> f64 {
        expit(eta)
    }

    fn conditional_mean(&self, state: f64, ctx: &ObsContext) -> Result<f64> {
        Ok(ctx.trials(NAME)? * (1.0 - state) / state)
    }

    fn matching(&self, pm: PredictorMoments, ctx: &ObsContext) -> Result<ConjugateParams> {
        let n = ctx.trials(NAME)?;
        let e = pm.f.exp();
        let p = ConjugateParams::new((1.0 + 1.0 / e) / pm.q, (1.0 + e - pm.q) / (n * pm.q));
        if p.s <= 0.0 {
            return Err(conjugate_err(
                NAME,
                p,
                &format!(
                    "q = {} >= 1 + exp(f) = {}; the forecast mean is infinite, shrink q",
                    pm.q,
                    1.0 + e
                ),
            ));
        }
        self.check_params(p, ctx)?;
        Ok(p)
    }

    fn q_limit(&self, f: f64) -> Option<f64> {
        Some(1.0 + f.exp())
    }

    fn approx_moments(&self, p: ConjugateParams, ctx: &ObsContext) -> Result<PredictorMoments> {
        let a = ctx.trials(NAME)? * p.s + 1.0;
        Ok(PredictorMoments::new((a / p.r).ln(), 1.0 / a + 1.0 / p.r))
    }

    fn posterior(&self, p: ConjugateParams, y: f64, _ctx: &ObsContext) -> Result<ConjugateParams> {
        Ok(ConjugateParams::new(p.r + y, p.s + 1.0))
    }

    fn predictor_moments(
        &self,
        p: ConjugateParams,
        ctx: &ObsContext,
        mode: ApproxMode,
    ) -> Result<PredictorMoments> {
        let a = ctx.trials(NAME)? * p.s + 1.0;
        Ok(PredictorMoments::new(
            digamma(a, mode)? - digamma(p.r, mode)?,
            trigamma(a, mode)? + trigamma(p.r, mode)?,
        ))
    }

    fn forecast_logdensity(&self, p: ConjugateParams, y: f64, ctx: &ObsContext) -> Result<f64> {
        let n = ctx.trials(NAME)?;
        let (a, b) = (n * p.s + 1.0, p.r);
        Ok(log_binomial(y + n - 1.0, n - 1.0)? + log_beta(a + n, b + y)? - log_beta(a, b)?)
    }

    fn forecast_moments(&self, p: ConjugateParams, ctx: &ObsContext) -> Result<(f64, f64)> {
        let n = ctx.trials(NAME)?;
        let (a, b) = (n * p.s + 1.0, p.r);
        let mean = if a > 1.0 { p.r / p.s } else { f64::INFINITY };
        let var = if a > 2.0 {
            n * b * (n + a - 1.0) * (a + b - 1.0) / ((a - 2.0) * (a - 1.0) * (a - 1.0))
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
        let n = ctx.trials(NAME)?;
        let n_next = next.trials(NAME).unwrap_or(n);
        let p = ConjugateParams::new(delta * (post.r - 1.0) + 1.0, delta * n * post.s / n_next);
        self.check_params(p, next)?;
        Ok(p)
    }

    fn law(&self, p: ConjugateParams, ctx: &ObsContext) -> Result<ConjugateLaw> {
        Ok(ConjugateLaw::Beta {
            a: ctx.trials(NAME)? * p.s + 1.0,
            b: p.r,
        })
    }

    fn obs_logdensity(&self, y: f64, state: f64, ctx: &ObsContext) -> Result<f64> {
        if !(state > 0.0 && state < 1.0) {
            return Err(Error::domain(
                "negative binomial state",
                state,
                "0 < pi < 1",
            ));
        }
        let n = ctx.trials(NAME)?;
        Ok(log_binomial(y + n - 1.0, n - 1.0)? + n * state.ln() + y * (-state).ln_1p())
    }

    fn transition_logdensity(&self, now: f64, prev: f64, omega: f64) -> Result<f64> {
        logit_transition(now, prev, omega)
    }

    fn sample(&self, state: f64, ctx: &ObsContext, rng: &mut dyn RngCore) -> Result<f64> {
        if !(state > 0.0 && state <= 1.0) {
            return Err(Error::domain(
                "negative binomial state",
                state,
                "0 < pi <= 1",
            ));
        }
        let n = ctx.trials(NAME)? as u32;
        if state == 1.0 {
            return Ok(0.0);
        }
        // sum of n geometric failure counts by inversion
        let denom = (-state).ln_1p();
        let mut total = 0.0;
        for _ in 0..n {
            total += (open_uniform(rng).ln() / denom).floor();
        }
        Ok(total)
    }
}
