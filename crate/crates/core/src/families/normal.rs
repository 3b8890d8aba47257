use rand::RngCore;

use super::{
    check_positive_obs, conjugate_err, normal_logpdf, normal_sf, standard_normal, ConjugateLaw,
    ConjugateParams, FamilyOps, ObsContext, Support,
};
use crate::error::{Error, Result};
use crate::special::ApproxMode;
use crate::state_space::PredictorMoments;

/// `y | μ ~ N(μ, V)` with `μ ~ N(r/s, 1/s)`, identity link. With `log` set
/// the same mechanics apply to `log y` (log-normal response).
pub(crate) struct Normal {
    pub log: bool,
}

impl Normal {
    fn z(&self, y: f64) -> f64 {
        if self.log {
            y.ln()
        } else {
            y
        }
    }
}

impl FamilyOps for Normal {
    fn name(&self) -> &'static str {
        if self.log {
            "lognormal"
        } else {
            "normal"
        }
    }

    fn support(&self, _ctx: &ObsContext) -> Result<Support> {
        Ok(if self.log {
            Support::Above { lower: 0.0 }
        } else {
            Support::Real
        })
    }

    fn check_obs(&self, y: f64, _ctx: &ObsContext) -> Result<()> {
        if self.log {
            check_positive_obs(self.name(), y)
        } else if y.is_finite() {
            Ok(())
        } else {
            Err(super::obs_err(self.name(), y, "expected a finite value"))
        }
    }

    fn check_params(&self, p: ConjugateParams, _ctx: &ObsContext) -> Result<()> {
        if p.s > 0.0 && p.s.is_finite() && p.r.is_finite() {
            Ok(())
        } else {
            Err(conjugate_err(self.name(), p, "need s > 0"))
        }
    }

    fn link(&self, state: f64) -> f64 {
        state
    }

    fn inverse_link(&self, eta: f64) -> f64 {
        eta
    }

    fn conditional_mean(&self, state: f64, ctx: &ObsContext) -> Result<f64> {
        if self.log {
            Ok((state + 0.5 * ctx.variance(self.name())?).exp())
        } else {
            Ok(state)
        }
    }

    fn matching(&self, pm: PredictorMoments, _ctx: &ObsContext) -> Result<ConjugateParams> {
        Ok(ConjugateParams::new(pm.f / pm.q, 1.0 / pm.q))
    }

    fn approx_moments(&self, p: ConjugateParams, _ctx: &ObsContext) -> Result<PredictorMoments> {
        Ok(PredictorMoments::new(p.r / p.s, 1.0 / p.s))
    }

    fn posterior(&self, p: ConjugateParams, y: f64, ctx: &ObsContext) -> Result<ConjugateParams> {
        let v = ctx.variance(self.name())?;
        Ok(ConjugateParams::new(p.r + self.z(y) / v, p.s + 1.0 / v))
    }

    fn predictor_moments(
        &self,
        p: ConjugateParams,
        _ctx: &ObsContext,
        _mode: ApproxMode,
    ) -> Result<PredictorMoments> {
        Ok(PredictorMoments::new(p.r / p.s, 1.0 / p.s))
    }

    fn forecast_logdensity(&self, p: ConjugateParams, y: f64, ctx: &ObsContext) -> Result<f64> {
        let v = ctx.variance(self.name())?;
        let dens = normal_logpdf(self.z(y), p.r / p.s, v + 1.0 / p.s);
        Ok(if self.log { dens - y.ln() } else { dens })
    }

    fn forecast_moments(&self, p: ConjugateParams, ctx: &ObsContext) -> Result<(f64, f64)> {
        let v = ctx.variance(self.name())?;
        let (m, var) = (p.r / p.s, v + 1.0 / p.s);
        if self.log {
            let mean = (m + 0.5 * var).exp();
            Ok((mean, var.exp_m1() * (2.0 * m + var).exp()))
        } else {
            Ok((m, var))
        }
    }

    fn statistic_moments(&self, p: ConjugateParams, ctx: &ObsContext) -> Result<(f64, f64)> {
        let v = ctx.variance(self.name())?;
        Ok((p.r / p.s, v + 1.0 / p.s))
    }

    fn forecast_sf(&self, p: ConjugateParams, y: f64, ctx: &ObsContext) -> Option<f64> {
        let v = ctx.variance(self.name()).ok()?;
        if self.log && y <= 0.0 {
            return Some(1.0);
        }
        Some(normal_sf(self.z(y), p.r / p.s, v + 1.0 / p.s))
    }

    fn discount(
        &self,
        post: ConjugateParams,
        delta: f64,
        _ctx: &ObsContext,
        _next: &ObsContext,
        mode: ApproxMode,
    ) -> Result<ConjugateParams> {
        let k = match mode {
            ApproxMode::Exact | ApproxMode::Matched => delta,
            ApproxMode::PaperApprox => delta * delta,
        };
        Ok(ConjugateParams::new(k * post.r, k * post.s))
    }

    fn law(&self, p: ConjugateParams, _ctx: &ObsContext) -> Result<ConjugateLaw> {
        Ok(ConjugateLaw::Normal {
            mean: p.r / p.s,
            variance: 1.0 / p.s,
        })
    }

    fn obs_logdensity(&self, y: f64, state: f64, ctx: &ObsContext) -> Result<f64> {
        let v = ctx.variance(self.name())?;
        let dens = normal_logpdf(self.z(y), state, v);
        Ok(if self.log { dens - y.ln() } else { dens })
    }

    fn transition_logdensity(&self, now: f64, prev: f64, omega: f64) -> Result<f64> {
        if !(now.is_finite() && prev.is_finite()) {
            return Err(Error::domain("transition_logdensity", now, "finite state"));
        }
        Ok(normal_logpdf(now, prev, omega))
    }

    fn sample(&self, state: f64, ctx: &ObsContext, rng: &mut dyn RngCore) -> Result<f64> {
        let v = ctx.variance(self.name())?;
        let x = state + v.sqrt() * standard_normal(rng);
        Ok(if self.log { x.exp() } else { x })
    }
}
