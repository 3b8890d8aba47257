//! Response families: conjugate matching, posterior updates, predictive
//! laws, discounting, transition densities and samplers.
//!
//! Every family works in a two-number conjugate parameterisation `(r, s)`.
//! The posterior of an observation is again written in the prior's `(r, s)`
//! coordinates, so one law maps `(r, s)` to the distribution of the state
//! parameter whether it is a prior or a posterior.

mod binomial;
mod factors;
mod gamma;
mod inverse_gaussian;
mod law;
mod negative_binomial;
mod normal;
mod pareto;
mod poisson;
mod weibull;

use std::fmt;
use std::str::FromStr;

use rand::RngCore;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::quadrature::{integrate, integrate_above, QuadOptions};
use crate::special::ApproxMode;
use crate::state_space::PredictorMoments;

pub use factors::{
    log_h1_gamma_alpha, log_h1_gamma_delta, log_h1_lognormal, log_h1_pareto, log_h1_weibull,
};
pub use gamma::{ewma_volatility, volatility_posterior, VolatilityLaw};
pub use inverse_gaussian::{kappa, kappa_printed, ln_kappa};
pub use law::ConjugateLaw;
pub use pareto::{beta_lower_to_pareto, beta_upper_to_pareto};

/// The two conjugate-prior hyperparameters.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ConjugateParams {
    pub r: f64,
    pub s: f64,
}

impl ConjugateParams {
    pub fn new(r: f64, s: f64) -> Self {
        ConjugateParams { r, s }
    }
}

/// Known nuisance quantities. Each family reads only its own field.
#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize, Deserialize)]
pub struct ObsContext {
    /// Trials (binomial) or target successes (negative binomial).
    pub n: Option<u32>,
    /// Observation variance for the normal and log-normal families.
    pub v: Option<f64>,
    /// Gamma shape.
    pub alpha: Option<f64>,
    /// Weibull shape.
    pub nu: Option<f64>,
    /// Inverse-Gaussian shape.
    pub lambda: Option<f64>,
}

impl ObsContext {
    pub fn with_n(n: u32) -> Self {
        ObsContext {
            n: Some(n),
            ..Default::default()
        }
    }
    pub fn with_v(v: f64) -> Self {
        ObsContext {
            v: Some(v),
            ..Default::default()
        }
    }
    pub fn with_alpha(alpha: f64) -> Self {
        ObsContext {
            alpha: Some(alpha),
            ..Default::default()
        }
    }
    pub fn with_nu(nu: f64) -> Self {
        ObsContext {
            nu: Some(nu),
            ..Default::default()
        }
    }
    pub fn with_lambda(lambda: f64) -> Self {
        ObsContext {
            lambda: Some(lambda),
            ..Default::default()
        }
    }

    fn positive(value: Option<f64>, family: &'static str, field: &'static str) -> Result<f64> {
        match value {
            Some(v) if v.is_finite() && v > 0.0 => Ok(v),
            _ => Err(Error::Context { family, field }),
        }
    }

    pub(crate) fn trials(&self, family: &'static str) -> Result<f64> {
        match self.n {
            Some(n) if n >= 1 => Ok(n as f64),
            _ => Err(Error::Context { family, field: "n" }),
        }
    }
    pub(crate) fn variance(&self, family: &'static str) -> Result<f64> {
        Self::positive(self.v, family, "v")
    }
    pub(crate) fn shape_alpha(&self, family: &'static str) -> Result<f64> {
        Self::positive(self.alpha, family, "alpha")
    }
    pub(crate) fn shape_nu(&self, family: &'static str) -> Result<f64> {
        Self::positive(self.nu, family, "nu")
    }
    pub(crate) fn scale_lambda(&self, family: &'static str) -> Result<f64> {
        Self::positive(self.lambda, family, "lambda")
    }
}

/// Support of the one-step predictive distribution.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Support {
    /// Non-negative integers, optionally bounded above.
    Counts { upper: Option<u64> },
    /// Real line.
    Real,
    /// The half-line above `lower` (open at 0, closed at 1 for Pareto).
    Above { lower: f64 },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Family {
    Binomial,
    Poisson,
    NegativeBinomial,
    Normal,
    LogNormal,
    Gamma,
    InverseGamma,
    Weibull,
    Pareto,
    InverseGaussian,
}

pub const ALL_FAMILIES: [Family; 10] = [
    Family::Binomial,
    Family::Poisson,
    Family::NegativeBinomial,
    Family::Normal,
    Family::LogNormal,
    Family::Gamma,
    Family::InverseGamma,
    Family::Weibull,
    Family::Pareto,
    Family::InverseGaussian,
];

pub(crate) trait FamilyOps: Sync {
    fn name(&self) -> &'static str;
    fn support(&self, ctx: &ObsContext) -> Result<Support>;
    fn check_obs(&self, y: f64, ctx: &ObsContext) -> Result<()>;
    fn check_params(&self, p: ConjugateParams, ctx: &ObsContext) -> Result<()>;

    fn link(&self, state: f64) -> f64;
    fn inverse_link(&self, eta: f64) -> f64;
    fn conditional_mean(&self, state: f64, ctx: &ObsContext) -> Result<f64>;

    fn matching(&self, pm: PredictorMoments, ctx: &ObsContext) -> Result<ConjugateParams>;
    fn q_limit(&self, _f: f64) -> Option<f64> {
        None
    }
    fn approx_moments(&self, p: ConjugateParams, ctx: &ObsContext) -> Result<PredictorMoments>;
    fn posterior(&self, p: ConjugateParams, y: f64, ctx: &ObsContext) -> Result<ConjugateParams>;
    fn predictor_moments(
        &self,
        p: ConjugateParams,
        ctx: &ObsContext,
        mode: ApproxMode,
    ) -> Result<PredictorMoments>;

    fn forecast_logdensity(&self, p: ConjugateParams, y: f64, ctx: &ObsContext) -> Result<f64>;
    fn forecast_moments(&self, p: ConjugateParams, ctx: &ObsContext) -> Result<(f64, f64)>;
    /// Closed-form `P(Y > y)` where one exists.
    fn forecast_sf(&self, _p: ConjugateParams, _y: f64, _ctx: &ObsContext) -> Option<f64> {
        None
    }
    fn statistic_moments(&self, p: ConjugateParams, ctx: &ObsContext) -> Result<(f64, f64)> {
        self.forecast_moments(p, ctx)
    }

    fn discount(
        &self,
        post: ConjugateParams,
        delta: f64,
        ctx: &ObsContext,
        next: &ObsContext,
        mode: ApproxMode,
    ) -> Result<ConjugateParams>;

    fn law(&self, p: ConjugateParams, ctx: &ObsContext) -> Result<ConjugateLaw>;
    fn obs_logdensity(&self, y: f64, state: f64, ctx: &ObsContext) -> Result<f64>;
    fn transition_logdensity(&self, now: f64, prev: f64, omega: f64) -> Result<f64>;
    fn sample(&self, state: f64, ctx: &ObsContext, rng: &mut dyn RngCore) -> Result<f64>;
}

impl Family {
    fn ops(self) -> &'static dyn FamilyOps {
        match self {
            Family::Binomial => &binomial::Binomial,
            Family::Poisson => &poisson::Poisson,
            Family::NegativeBinomial => &negative_binomial::NegativeBinomial,
            Family::Normal => &normal::Normal { log: false },
            Family::LogNormal => &normal::Normal { log: true },
            Family::Gamma => &gamma::Gamma { inverse: false },
            Family::InverseGamma => &gamma::Gamma { inverse: true },
            Family::Weibull => &weibull::Weibull,
            Family::Pareto => &pareto::Pareto,
            Family::InverseGaussian => &inverse_gaussian::InverseGaussian,
        }
    }

    pub fn name(self) -> &'static str {
        self.ops().name()
    }

    pub fn is_discrete(self) -> bool {
        matches!(
            self,
            Family::Binomial | Family::Poisson | Family::NegativeBinomial
        )
    }

    /// False only for the inverse Gaussian, which must run in discount mode.
    pub fn has_closed_moment_matching(self) -> bool {
        self != Family::InverseGaussian
    }

    /// False where the predictive mean of `y` is infinite for every `(r, s)`
    /// (Pareto) or the variance is (inverse Gaussian).
    pub fn has_closed_forecast_moments(self) -> bool {
        !matches!(self, Family::Pareto | Family::InverseGaussian)
    }

    pub fn support(self, ctx: &ObsContext) -> Result<Support> {
        self.ops().support(ctx)
    }

    pub fn check_obs(self, y: f64, ctx: &ObsContext) -> Result<()> {
        self.ops().check_obs(y, ctx)
    }

    pub fn check_params(self, p: ConjugateParams, ctx: &ObsContext) -> Result<()> {
        self.ops().check_params(p, ctx)
    }

    /// `g(state)`, where the state is the family's natural scalar parameter
    /// (probability, rate, mean or scale; see [`ConjugateLaw`]).
    pub fn link(self, state: f64) -> f64 {
        self.ops().link(state)
    }

    pub fn inverse_link(self, eta: f64) -> f64 {
        self.ops().inverse_link(eta)
    }

    /// `E(y | state)`.
    pub fn conditional_mean(self, state: f64, ctx: &ObsContext) -> Result<f64> {
        self.ops().conditional_mean(state, ctx)
    }

    /// Solves the approximate moment equations for `(r, s)`.
    pub fn conjugate_from_moments(
        self,
        pm: PredictorMoments,
        ctx: &ObsContext,
    ) -> Result<ConjugateParams> {
        if !(pm.q > 0.0 && pm.q.is_finite()) {
            return Err(Error::DegeneratePredictor { q: pm.q });
        }
        if !pm.f.is_finite() {
            return Err(Error::domain("conjugate_from_moments", pm.f, "finite f"));
        }
        self.ops().matching(pm, ctx)
    }

    /// Upper limit on `q` beyond which matching leaves the usable domain.
    pub fn q_limit(self, f: f64) -> Option<f64> {
        self.ops().q_limit(f)
    }

    /// The `ψ(x) ≈ log x`, `ψ'(x) ≈ 1/x` moment identities evaluated at
    /// `(r, s)`. Inverts [`Family::conjugate_from_moments`] exactly.
    pub fn approx_moments(self, p: ConjugateParams, ctx: &ObsContext) -> Result<PredictorMoments> {
        self.ops().approx_moments(p, ctx)
    }

    pub fn posterior_params(
        self,
        p: ConjugateParams,
        y: f64,
        ctx: &ObsContext,
    ) -> Result<ConjugateParams> {
        self.check_obs(y, ctx)?;
        self.check_params(p, ctx)?;
        self.ops().posterior(p, y, ctx)
    }

    /// Mean and variance of the linear predictor under `(r, s)`.
    pub fn predictor_moments(
        self,
        p: ConjugateParams,
        ctx: &ObsContext,
        mode: ApproxMode,
    ) -> Result<PredictorMoments> {
        self.check_params(p, ctx)?;
        self.ops().predictor_moments(p, ctx, mode)
    }

    /// `(f*, q*)` from posterior parameters.
    pub fn posterior_predictor_moments(
        self,
        posterior: ConjugateParams,
        ctx: &ObsContext,
        mode: ApproxMode,
    ) -> Result<PredictorMoments> {
        self.predictor_moments(posterior, ctx, mode)
    }

    pub fn forecast_logdensity(self, p: ConjugateParams, y: f64, ctx: &ObsContext) -> Result<f64> {
        self.check_params(p, ctx)?;
        if self.check_obs(y, ctx).is_err() {
            return Ok(f64::NEG_INFINITY);
        }
        self.ops().forecast_logdensity(p, y, ctx)
    }

    /// Predictive mean and variance of `y`; `f64::INFINITY` where the moment
    /// does not exist.
    pub fn forecast_moments(self, p: ConjugateParams, ctx: &ObsContext) -> Result<(f64, f64)> {
        self.check_params(p, ctx)?;
        self.ops().forecast_moments(p, ctx)
    }

    /// Predictive moments of the sufficient statistic: `y^ν` for the Weibull,
    /// `log y` for the Pareto and `y` otherwise.
    pub fn statistic_moments(self, p: ConjugateParams, ctx: &ObsContext) -> Result<(f64, f64)> {
        self.check_params(p, ctx)?;
        self.ops().statistic_moments(p, ctx)
    }

    /// Predictive distribution function `P(Y ≤ y)`.
    pub fn forecast_cdf(self, p: ConjugateParams, y: f64, ctx: &ObsContext) -> Result<f64> {
        self.check_params(p, ctx)?;
        let ops = self.ops();
        if let Some(sf) = ops.forecast_sf(p, y, ctx) {
            return Ok((1.0 - sf).clamp(0.0, 1.0));
        }
        match ops.support(ctx)? {
            Support::Counts { upper } => {
                if y < 0.0 {
                    return Ok(0.0);
                }
                let top = upper.map_or(y.floor(), |u| y.floor().min(u as f64)) as u64;
                let mut acc = 0.0;
                for k in 0..=top {
                    acc += ops.forecast_logdensity(p, k as f64, ctx)?.exp();
                }
                Ok(acc.min(1.0))
            }
            Support::Real => {
                let upper = integrate_above(
                    |x| {
                        ops.forecast_logdensity(p, x, ctx)
                            .map(f64::exp)
                            .unwrap_or(0.0)
                    },
                    y,
                    0.0,
                    1.0,
                    QuadOptions::default(),
                );
                Ok((1.0 - upper.value).clamp(0.0, 1.0))
            }
            Support::Above { lower } => {
                if y <= lower {
                    return Ok(0.0);
                }
                let below = integrate(
                    |x| {
                        ops.forecast_logdensity(p, x, ctx)
                            .map(f64::exp)
                            .unwrap_or(0.0)
                    },
                    lower,
                    y,
                    QuadOptions::default().with_abs_tol(1e-10),
                );
                Ok(below.value.clamp(0.0, 1.0))
            }
        }
    }

    /// Predictive quantile by inversion of [`Family::forecast_cdf`].
    pub fn forecast_quantile(self, p: ConjugateParams, prob: f64, ctx: &ObsContext) -> Result<f64> {
        if !(prob > 0.0 && prob < 1.0) {
            return Err(Error::domain("forecast_quantile", prob, "0 < p < 1"));
        }
        let support = self.support(ctx)?;
        if let Support::Counts { upper } = support {
            let ops = self.ops();
            let cap = upper.unwrap_or(crate::oracle::TERM_CAP);
            let mut acc = 0.0;
            for k in 0..=cap {
                acc += ops.forecast_logdensity(p, k as f64, ctx)?.exp();
                if acc >= prob {
                    return Ok(k as f64);
                }
            }
            return Ok(cap as f64);
        }
        let (mut lo, mut hi) = match support {
            Support::Above { lower } => (lower, lower + 1.0),
            _ => (-1.0, 1.0),
        };
        if matches!(support, Support::Real) {
            while self.forecast_cdf(p, lo, ctx)? > prob {
                lo = 2.0 * lo - 1.0;
                if lo < -1e300 {
                    break;
                }
            }
        }
        while self.forecast_cdf(p, hi, ctx)? < prob {
            let base = if let Support::Above { lower } = support {
                lower
            } else {
                0.0
            };
            hi = base + 2.0 * (hi - base).max(1.0);
            if hi > 1e300 {
                return Ok(f64::INFINITY);
            }
        }
        for _ in 0..200 {
            let mid = 0.5 * (lo + hi);
            if self.forecast_cdf(p, mid, ctx)? < prob {
                lo = mid;
            } else {
                hi = mid;
            }
            if hi - lo <= 1e-10 * hi.abs().max(1.0) {
                break;
            }
        }
        Ok(0.5 * (lo + hi))
    }

    /// Next prior from a posterior by power discounting.
    ///
    /// `ApproxMode::Exact` raises the posterior density of the conjugate
    /// variable to the power `δ`; `ApproxMode::PaperApprox` applies the
    /// published closed maps where they differ.
    pub fn power_discount(
        self,
        posterior: ConjugateParams,
        delta: f64,
        ctx: &ObsContext,
        next: &ObsContext,
        mode: ApproxMode,
    ) -> Result<ConjugateParams> {
        crate::state_space::check_delta(delta)?;
        self.check_params(posterior, ctx)?;
        self.ops().discount(posterior, delta, ctx, next, mode)
    }

    /// The distribution of the state parameter under `(r, s)`.
    pub fn conjugate_law(self, p: ConjugateParams, ctx: &ObsContext) -> Result<ConjugateLaw> {
        self.check_params(p, ctx)?;
        self.ops().law(p, ctx)
    }

    /// Posterior mean of the state parameter, the plug-in path used by the
    /// likelihood.
    pub fn state_estimate(self, p: ConjugateParams, ctx: &ObsContext) -> Result<f64> {
        Ok(self.conjugate_law(p, ctx)?.mean())
    }

    /// `log p(y | state)`.
    pub fn obs_logdensity(self, y: f64, state: f64, ctx: &ObsContext) -> Result<f64> {
        self.check_obs(y, ctx)?;
        self.ops().obs_logdensity(y, state, ctx)
    }

    /// `log p(state_t | state_{t−1})` for a random walk on the predictor with
    /// innovation variance `omega`.
    pub fn transition_logdensity(self, now: f64, prev: f64, omega: f64) -> Result<f64> {
        if !(omega > 0.0 && omega.is_finite()) {
            return Err(Error::domain("transition_logdensity", omega, "omega > 0"));
        }
        self.ops().transition_logdensity(now, prev, omega)
    }

    /// One draw of `y` given the state parameter.
    pub fn sample_obs(self, state: f64, ctx: &ObsContext, rng: &mut dyn RngCore) -> Result<f64> {
        self.ops().sample(state, ctx, rng)
    }
}

impl fmt::Display for Family {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Family {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let key = s.trim().to_ascii_lowercase().replace('_', "-");
        let fam = match key.as_str() {
            "binomial" => Family::Binomial,
            "poisson" => Family::Poisson,
            "negative-binomial" | "negbin" | "nb" | "geometric" => Family::NegativeBinomial,
            "normal" | "gaussian" => Family::Normal,
            "lognormal" | "log-normal" => Family::LogNormal,
            "gamma" => Family::Gamma,
            "inverse-gamma" | "invgamma" => Family::InverseGamma,
            "weibull" | "exponential" => Family::Weibull,
            "pareto" => Family::Pareto,
            "inverse-gaussian" | "wald" => Family::InverseGaussian,
            _ => return Err(Error::Config(format!("unknown family `{s}`"))),
        };
        Ok(fam)
    }
}

// Helpers shared by the family implementations.

pub(crate) const LN_2PI: f64 = 1.837_877_066_409_345_5;

pub(crate) fn normal_logpdf(x: f64, mean: f64, var: f64) -> f64 {
    let d = x - mean;
    -0.5 * (LN_2PI + var.ln() + d * d / var)
}

pub(crate) fn normal_sf(x: f64, mean: f64, var: f64) -> f64 {
    0.5 * libm::erfc((x - mean) / (2.0 * var).sqrt())
}

pub(crate) fn logit(p: f64) -> f64 {
    (p / (1.0 - p)).ln()
}

pub(crate) fn expit(x: f64) -> f64 {
    if x >= 0.0 {
        1.0 / (1.0 + (-x).exp())
    } else {
        let e = x.exp();
        e / (1.0 + e)
    }
}

/// Log-normal transition density on a positive state.
pub(crate) fn lognormal_transition(now: f64, prev: f64, omega: f64) -> Result<f64> {
    if !(now > 0.0 && prev > 0.0) {
        return Err(Error::domain(
            "transition_logdensity",
            now.min(prev),
            "state > 0",
        ));
    }
    Ok(normal_logpdf(now.ln(), prev.ln(), omega) - now.ln())
}

/// Logit-normal transition density on a probability.
pub(crate) fn logit_transition(now: f64, prev: f64, omega: f64) -> Result<f64> {
    for v in [now, prev] {
        if !(v > 0.0 && v < 1.0) {
            return Err(Error::domain("transition_logdensity", v, "0 < state < 1"));
        }
    }
    Ok(normal_logpdf(logit(now), logit(prev), omega) - now.ln() - (1.0 - now).ln())
}

pub(crate) fn conjugate_err(family: &'static str, p: ConjugateParams, hint: &str) -> Error {
    Error::ConjugateDomain {
        family,
        r: p.r,
        s: p.s,
        hint: hint.to_string(),
    }
}

pub(crate) fn obs_err(family: &'static str, y: f64, reason: &'static str) -> Error {
    Error::Observation { family, y, reason }
}

pub(crate) fn check_count(family: &'static str, y: f64, upper: Option<f64>) -> Result<()> {
    if !(y.is_finite() && y >= 0.0 && y.fract() == 0.0) {
        return Err(obs_err(family, y, "expected a non-negative integer"));
    }
    if let Some(n) = upper {
        if y > n {
            return Err(obs_err(family, y, "exceeds the number of trials"));
        }
    }
    Ok(())
}

pub(crate) fn check_positive_obs(family: &'static str, y: f64) -> Result<()> {
    if y.is_finite() && y > 0.0 {
        Ok(())
    } else {
        Err(obs_err(family, y, "expected a positive value"))
    }
}

/// Uniform draw on the open interval (0, 1).
pub(crate) fn open_uniform(rng: &mut dyn RngCore) -> f64 {
    loop {
        let u = (rng.next_u64() >> 11) as f64 * (1.0 / (1u64 << 53) as f64);
        if u > 0.0 {
            return u;
        }
    }
}

/// Standard normal draw by Box–Muller (one variate per pair of uniforms).
pub(crate) fn standard_normal(rng: &mut dyn RngCore) -> f64 {
    let u1 = open_uniform(rng);
    let u2 = open_uniform(rng);
    (-2.0 * u1.ln()).sqrt() * (2.0 * std::f64::consts::PI * u2).cos()
}

#[cfg(test)]
mod tests;
