use rand::RngCore;

use super::{
    check_positive_obs, conjugate_err, lognormal_transition, open_uniform, standard_normal,
    ConjugateLaw, ConjugateParams, FamilyOps, ObsContext, Support, LN_2PI,
};
use crate::error::{Error, Result};
use crate::special::{ln_gaussian_tail_integral, ApproxMode};
use crate::state_space::PredictorMoments;

const NAME: &str = "inverse-gaussian";

/// `y | μ ~ IG(μ, λ)` with known `λ`; the conjugate prior on
/// `γ = −1/μ²` is `exp(r γ + 2 s √−γ)`, so `a(φ) = 2/λ`.
pub(crate) struct InverseGaussian;

/// `log κ(r, s)` with `κ = r / (1 + 2 s e^{s²/r} G(s/r, r))` and
/// `G(a, b) = ∫₀^∞ exp(−b (y − a)²) dy`.
pub fn ln_kappa(r: f64, s: f64) -> Result<f64> {
    if !(r > 0.0 && r.is_finite()) {
        return Err(Error::domain("kappa", r, "r > 0"));
    }
    if !(s >= 0.0 && s.is_finite()) {
        return Err(Error::domain("kappa", s, "s >= 0"));
    }
    if s == 0.0 {
        return Ok(r.ln());
    }
    let lt = (2.0 * s).ln() + s * s / r + ln_gaussian_tail_integral(s / r, r)?;
    // log(1 + e^lt)
    let softplus = if lt > 0.0 {
        lt + (-lt).exp().ln_1p()
    } else {
        lt.exp().ln_1p()
    };
    Ok(r.ln() - softplus)
}

pub fn kappa(r: f64, s: f64) -> Result<f64> {
    Ok(ln_kappa(r, s)?.exp())
}

/// The normaliser as printed, `r (e^{s²/r} s √(π/r) + 1)^{−1}`, which omits
/// the `erfc(−s/√r)` factor and agrees with [`kappa`] only at `s = 0`.
pub fn kappa_printed(r: f64, s: f64) -> f64 {
    r / ((s * s / r).exp() * s * (std::f64::consts::PI / r).sqrt() + 1.0)
}

impl FamilyOps for InverseGaussian {
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
        if p.r > 0.0 && p.s >= 0.0 && p.r.is_finite() && p.s.is_finite() {
            Ok(())
        } else {
            Err(conjugate_err(NAME, p, "need r > 0 and s >= 0"))
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

    fn matching(&self, _pm: PredictorMoments, _ctx: &ObsContext) -> Result<ConjugateParams> {
        Err(Error::Unsupported {
            family: NAME,
            operation: "closed-form moment matching (use discount mode)",
        })
    }

    fn approx_moments(&self, _p: ConjugateParams, _ctx: &ObsContext) -> Result<PredictorMoments> {
        Err(Error::Unsupported {
            family: NAME,
            operation: "closed-form predictor moments",
        })
    }

    fn posterior(&self, p: ConjugateParams, y: f64, ctx: &ObsContext) -> Result<ConjugateParams> {
        let lambda = ctx.scale_lambda(NAME)?;
        Ok(ConjugateParams::new(
            p.r + 0.5 * lambda * y,
            p.s + 0.5 * lambda,
        ))
    }

    fn predictor_moments(
        &self,
        _p: ConjugateParams,
        _ctx: &ObsContext,
        _mode: ApproxMode,
    ) -> Result<PredictorMoments> {
        Err(Error::Unsupported {
            family: NAME,
            operation: "closed-form predictor moments",
        })
    }

    fn forecast_logdensity(&self, p: ConjugateParams, y: f64, ctx: &ObsContext) -> Result<f64> {
        let lambda = ctx.scale_lambda(NAME)?;
        let post = self.posterior(p, y, ctx)?;
        Ok(
            0.5 * (lambda.ln() - LN_2PI - 3.0 * y.ln()) - lambda / (2.0 * y) + ln_kappa(p.r, p.s)?
                - ln_kappa(post.r, post.s)?,
        )
    }

    /// The mean is `E μ`; the variance is infinite because `E μ³` is.
    fn forecast_moments(&self, p: ConjugateParams, ctx: &ObsContext) -> Result<(f64, f64)> {
        Ok((self.law(p, ctx)?.mean(), f64::INFINITY))
    }

    fn discount(
        &self,
        post: ConjugateParams,
        delta: f64,
        _ctx: &ObsContext,
        _next: &ObsContext,
        _mode: ApproxMode,
    ) -> Result<ConjugateParams> {
        Ok(ConjugateParams::new(delta * post.r, delta * post.s))
    }

    fn law(&self, p: ConjugateParams, _ctx: &ObsContext) -> Result<ConjugateLaw> {
        Ok(ConjugateLaw::InverseGaussianMean { r: p.r, s: p.s })
    }

    fn obs_logdensity(&self, y: f64, state: f64, ctx: &ObsContext) -> Result<f64> {
        if !(state > 0.0) {
            return Err(Error::domain("inverse gaussian state", state, "mu > 0"));
        }
        let lambda = ctx.scale_lambda(NAME)?;
        let d = y - state;
        Ok(
            0.5 * (lambda.ln() - LN_2PI - 3.0 * y.ln())
                - lambda * d * d / (2.0 * state * state * y),
        )
    }

    fn transition_logdensity(&self, now: f64, prev: f64, omega: f64) -> Result<f64> {
        lognormal_transition(now, prev, omega)
    }

    /// Michael–Schucany–Haas transformation.
    fn sample(&self, state: f64, ctx: &ObsContext, rng: &mut dyn RngCore) -> Result<f64> {
        let lambda = ctx.scale_lambda(NAME)?;
        let mu = state;
        let z = standard_normal(rng);
        let w = z * z;
        let x = mu + mu * mu * w / (2.0 * lambda)
            - mu / (2.0 * lambda) * (4.0 * mu * lambda * w + mu * mu * w * w).sqrt();
        let u = open_uniform(rng);
        Ok(if u <= mu / (mu + x) { x } else { mu * mu / x })
    }
}
