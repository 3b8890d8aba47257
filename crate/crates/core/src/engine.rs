//! Sequential filtering and forecasting.
//!
//! Two exclusive modes: `StateSpace` propagates `(m, P)` through a linear
//! evolution and matches conjugate parameters to the predictor moments each
//! step; `PowerDiscount` carries `(r, s)` directly and flattens the posterior
//! by a discount factor.

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::families::{ConjugateParams, Family, ObsContext};
use crate::special::ApproxMode;
use crate::state_space::{
    bayes_linear_update, check_delta, k_step_predictor, predictor_moments, propagate,
    PredictorMoments, StateMoments, StateSpaceModel,
};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum EngineMode {
    StateSpace,
    PowerDiscount,
}

/// What to do when matched conjugate parameters or an observation fall
/// outside the family domain.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ClampPolicy {
    #[default]
    Error,
    /// Shrink `q` to half its domain limit, scaling the prior state
    /// covariance `R` by the same factor, or skip an unusable observation;
    /// either way a warning is recorded on the step.
    ClampAndLog,
}

#[derive(Debug, Clone, PartialEq)]
pub struct EngineConfig {
    pub mode: EngineMode,
    pub family: Family,
    pub model: Option<StateSpaceModel>,
    pub delta: Option<f64>,
    pub initial: Option<ConjugateParams>,
    pub approx: ApproxMode,
    pub clamp: ClampPolicy,
}

impl EngineConfig {
    pub fn state_space(family: Family, model: StateSpaceModel) -> Self {
        EngineConfig {
            mode: EngineMode::StateSpace,
            family,
            model: Some(model),
            delta: None,
            initial: None,
            approx: ApproxMode::Exact,
            clamp: ClampPolicy::Error,
        }
    }

    pub fn power_discount(family: Family, delta: f64, initial: ConjugateParams) -> Self {
        EngineConfig {
            mode: EngineMode::PowerDiscount,
            family,
            model: None,
            delta: Some(delta),
            initial: Some(initial),
            approx: ApproxMode::Exact,
            clamp: ClampPolicy::Error,
        }
    }

    pub fn with_approx(mut self, approx: ApproxMode) -> Self {
        self.approx = approx;
        self
    }

    pub fn with_clamp(mut self, clamp: ClampPolicy) -> Self {
        self.clamp = clamp;
        self
    }

    pub fn validate(&self) -> Result<()> {
        match self.mode {
            EngineMode::StateSpace => {
                let model = self.model.as_ref().ok_or_else(|| {
                    Error::Config("state-space mode needs a state-space model".into())
                })?;
                model.validate()?;
                if !self.family.has_closed_moment_matching() {
                    return Err(Error::Unsupported {
                        family: self.family.name(),
                        operation: "state-space mode (use discount mode)",
                    });
                }
            }
            EngineMode::PowerDiscount => {
                let delta = self
                    .delta
                    .ok_or_else(|| Error::Config("discount mode needs delta".into()))?;
                check_delta(delta)
                    .map_err(|_| Error::Config(format!("delta = {delta} is outside (0, 1]")))?;
                let p = self
                    .initial
                    .ok_or_else(|| Error::Config("discount mode needs initial (r0, s0)".into()))?;
                if !(p.r.is_finite() && p.s.is_finite()) {
                    return Err(Error::Config("initial (r0, s0) must be finite".into()));
                }
            }
        }
        Ok(())
    }

    fn model(&self) -> Result<&StateSpaceModel> {
        self.model
            .as_ref()
            .ok_or_else(|| Error::Config("state-space mode needs a state-space model".into()))
    }

    fn delta(&self) -> Result<f64> {
        self.delta
            .ok_or_else(|| Error::Config("discount mode needs delta".into()))
    }
}

/// One observation with its known context; `y = None` marks a gap.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Observation {
    pub y: Option<f64>,
    pub ctx: ObsContext,
}

impl Observation {
    pub fn new(y: f64, ctx: ObsContext) -> Self {
        Observation { y: Some(y), ctx }
    }

    pub fn missing(ctx: ObsContext) -> Self {
        Observation { y: None, ctx }
    }
}

/// Filter state between steps.
#[derive(Debug, Clone, PartialEq)]
pub enum FilterState {
    StateSpace {
        t: usize,
        moments: StateMoments,
        ctx: Option<ObsContext>,
    },
    PowerDiscount {
        t: usize,
        /// Posterior of the last step, or the initial prior before any step.
        params: ConjugateParams,
        ctx: Option<ObsContext>,
    },
}

impl FilterState {
    pub fn initial(config: &EngineConfig) -> Result<Self> {
        config.validate()?;
        Ok(match config.mode {
            EngineMode::StateSpace => FilterState::StateSpace {
                t: 0,
                moments: config.model()?.initial_moments(),
                ctx: None,
            },
            EngineMode::PowerDiscount => FilterState::PowerDiscount {
                t: 0,
                params: config
                    .initial
                    .ok_or_else(|| Error::Config("discount mode needs initial (r0, s0)".into()))?,
                ctx: None,
            },
        })
    }

    /// Number of steps taken.
    pub fn t(&self) -> usize {
        match self {
            FilterState::StateSpace { t, .. } | FilterState::PowerDiscount { t, .. } => *t,
        }
    }

    fn last_ctx(&self) -> Option<ObsContext> {
        match self {
            FilterState::StateSpace { ctx, .. } | FilterState::PowerDiscount { ctx, .. } => *ctx,
        }
    }
}

/// Audit trail for one step. `m` and `p` (row-major) are empty in discount
/// mode; `next_r`, `next_s` are empty in state-space mode.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StepRecord {
    pub t: usize,
    pub y: Option<f64>,
    pub f: Option<f64>,
    pub q: Option<f64>,
    pub r: f64,
    pub s: f64,
    pub post_r: f64,
    pub post_s: f64,
    pub f_star: Option<f64>,
    pub q_star: Option<f64>,
    pub m: Vec<f64>,
    pub p: Vec<f64>,
    pub next_r: Option<f64>,
    pub next_s: Option<f64>,
    pub one_step_log_density: Option<f64>,
    pub forecast_mean: f64,
    pub forecast_variance: f64,
    /// Posterior mean of the state parameter.
    pub state_estimate: f64,
    pub warnings: Vec<String>,
}

impl StepRecord {
    pub fn prior(&self) -> ConjugateParams {
        ConjugateParams::new(self.r, self.s)
    }

    pub fn posterior(&self) -> ConjugateParams {
        ConjugateParams::new(self.post_r, self.post_s)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ForecastRecord {
    pub ell: usize,
    pub r: f64,
    pub s: f64,
    pub f: Option<f64>,
    pub q: Option<f64>,
    pub mean: f64,
    pub variance: f64,
    pub warnings: Vec<String>,
}

impl ForecastRecord {
    pub fn params(&self) -> ConjugateParams {
        ConjugateParams::new(self.r, self.s)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct FilterRun {
    pub records: Vec<StepRecord>,
    pub state: FilterState,
}

fn flatten(p: &DMatrix<f64>) -> Vec<f64> {
    // nalgebra stores column-major; P is symmetric but emit rows anyway
    p.transpose().as_slice().to_vec()
}

/// Matches `(r, s)` to `pm`, shrinking `q` under `ClampAndLog` when the
/// family's domain requires it. Returns the moments actually used.
fn match_params(
    config: &EngineConfig,
    pm: PredictorMoments,
    ctx: &ObsContext,
    warnings: &mut Vec<String>,
) -> Result<(ConjugateParams, PredictorMoments)> {
    let family = config.family;
    match family.conjugate_from_moments(pm, ctx) {
        Ok(p) => Ok((p, pm)),
        Err(err @ Error::ConjugateDomain { .. }) if config.clamp == ClampPolicy::ClampAndLog => {
            let limit = family.q_limit(pm.f).ok_or(err)?;
            let clamped = PredictorMoments::new(pm.f, 0.5 * limit);
            let p = family.conjugate_from_moments(clamped, ctx)?;
            warnings.push(format!(
                "q = {:.6e} clamped to {:.6e} (domain limit {:.6e})",
                pm.q, clamped.q, limit
            ));
            Ok((p, clamped))
        }
        Err(e) => Err(e),
    }
}

/// Returns `Some(y)` when the observation should update the filter.
fn usable_obs(
    config: &EngineConfig,
    obs: &Observation,
    warnings: &mut Vec<String>,
) -> Result<Option<f64>> {
    let Some(y) = obs.y else {
        warnings.push("missing observation".into());
        return Ok(None);
    };
    match config.family.check_obs(y, &obs.ctx) {
        Ok(()) => Ok(Some(y)),
        Err(e) if config.clamp == ClampPolicy::ClampAndLog => {
            warnings.push(format!("{e}; treated as missing"));
            Ok(None)
        }
        Err(e) => Err(e),
    }
}

/// One prior → predictive → posterior cycle.
pub fn filter_step(
    state: &FilterState,
    config: &EngineConfig,
    obs: &Observation,
) -> Result<(FilterState, StepRecord)> {
    match config.mode {
        EngineMode::StateSpace => filter_step_with(state, config, config.model()?, obs),
        EngineMode::PowerDiscount => discount_step(state, config, obs),
    }
}

/// State-space step with an explicit (possibly time-varying) model.
pub fn filter_step_with(
    state: &FilterState,
    config: &EngineConfig,
    model: &StateSpaceModel,
    obs: &Observation,
) -> Result<(FilterState, StepRecord)> {
    let FilterState::StateSpace { t, moments, .. } = state else {
        return Err(Error::Config(
            "state does not match state-space mode".into(),
        ));
    };
    if !config.family.has_closed_moment_matching() {
        return Err(Error::Unsupported {
            family: config.family.name(),
            operation: "state-space mode (use discount mode)",
        });
    }
    let t = t + 1;
    let family = config.family;
    let ctx = &obs.ctx;
    let mut warnings = Vec::new();

    let (h, mut r) = propagate(moments, model)?;
    let raw = predictor_moments(&h, &r, &model.f)?;
    let (prior, pm) = match_params(config, raw, ctx, &mut warnings)?;
    if pm.q != raw.q {
        // keep F'RF equal to the clamped q so the update gain stays consistent
        r *= pm.q / raw.q;
    }
    let (forecast_mean, forecast_variance) = family.forecast_moments(prior, ctx)?;
    let y = usable_obs(config, obs, &mut warnings)?;

    let (post, star, next, log_density) = match y {
        Some(y) => {
            let log_density = family.forecast_logdensity(prior, y, ctx)?;
            let post = family.posterior_params(prior, y, ctx)?;
            let star = family.posterior_predictor_moments(post, ctx, config.approx)?;
            let next = bayes_linear_update(&h, &r, &model.f, pm, star)?;
            (post, Some(star), next, Some(log_density))
        }
        None => (prior, None, StateMoments { m: h, p: r }, None),
    };
    let record = StepRecord {
        t,
        y: obs.y,
        f: Some(pm.f),
        q: Some(pm.q),
        r: prior.r,
        s: prior.s,
        post_r: post.r,
        post_s: post.s,
        f_star: star.map(|s| s.f),
        q_star: star.map(|s| s.q),
        m: next.m.as_slice().to_vec(),
        p: flatten(&next.p),
        next_r: None,
        next_s: None,
        one_step_log_density: log_density,
        forecast_mean,
        forecast_variance,
        state_estimate: family.state_estimate(post, ctx)?,
        warnings,
    };
    Ok((
        FilterState::StateSpace {
            t,
            moments: next,
            ctx: Some(*ctx),
        },
        record,
    ))
}

fn discount_step(
    state: &FilterState,
    config: &EngineConfig,
    obs: &Observation,
) -> Result<(FilterState, StepRecord)> {
    let FilterState::PowerDiscount {
        t,
        params,
        ctx: prev_ctx,
    } = state
    else {
        return Err(Error::Config("state does not match discount mode".into()));
    };
    let family = config.family;
    let delta = config.delta()?;
    let ctx = &obs.ctx;
    let mut warnings = Vec::new();

    let prior = match prev_ctx {
        Some(prev) => family.power_discount(*params, delta, prev, ctx, config.approx)?,
        None => *params,
    };
    family.check_params(prior, ctx)?;
    let pm = family.predictor_moments(prior, ctx, config.approx).ok();
    let (forecast_mean, forecast_variance) = family.forecast_moments(prior, ctx)?;
    let y = usable_obs(config, obs, &mut warnings)?;

    let (post, log_density) = match y {
        Some(y) => (
            family.posterior_params(prior, y, ctx)?,
            Some(family.forecast_logdensity(prior, y, ctx)?),
        ),
        None => (prior, None),
    };
    let star = if y.is_some() {
        family
            .posterior_predictor_moments(post, ctx, config.approx)
            .ok()
    } else {
        None
    };
    let next = family.power_discount(post, delta, ctx, ctx, config.approx)?;
    let record = StepRecord {
        t: t + 1,
        y: obs.y,
        f: pm.map(|p| p.f),
        q: pm.map(|p| p.q),
        r: prior.r,
        s: prior.s,
        post_r: post.r,
        post_s: post.s,
        f_star: star.map(|s| s.f),
        q_star: star.map(|s| s.q),
        m: Vec::new(),
        p: Vec::new(),
        next_r: Some(next.r),
        next_s: Some(next.s),
        one_step_log_density: log_density,
        forecast_mean,
        forecast_variance,
        state_estimate: family.state_estimate(post, ctx)?,
        warnings,
    };
    Ok((
        FilterState::PowerDiscount {
            t: t + 1,
            params: post,
            ctx: Some(*ctx),
        },
        record,
    ))
}

/// Folds [`filter_step`] over a series. Under `ClampAndLog` a failing step is
/// retried as a missing observation and the failure recorded.
pub fn run_filter(series: &[Observation], config: &EngineConfig) -> Result<FilterRun> {
    run_from(FilterState::initial(config)?, series, config, None)
}

/// [`run_filter`] with one state-space model per step.
pub fn run_filter_varying(
    series: &[Observation],
    config: &EngineConfig,
    models: &[StateSpaceModel],
) -> Result<FilterRun> {
    if config.mode != EngineMode::StateSpace {
        return Err(Error::Config(
            "time-varying models need state-space mode".into(),
        ));
    }
    if models.len() != series.len() {
        return Err(Error::Structural(format!(
            "{} models for {} observations",
            models.len(),
            series.len()
        )));
    }
    run_from(FilterState::initial(config)?, series, config, Some(models))
}

fn run_from(
    mut state: FilterState,
    series: &[Observation],
    config: &EngineConfig,
    models: Option<&[StateSpaceModel]>,
) -> Result<FilterRun> {
    if series.is_empty() {
        return Err(Error::Structural("empty series".into()));
    }
    let mut records = Vec::with_capacity(series.len());
    for (i, obs) in series.iter().enumerate() {
        let step = |o: &Observation| match models {
            Some(ms) => filter_step_with(&state, config, &ms[i], o),
            None => filter_step(&state, config, o),
        };
        let (next, record) = match step(obs) {
            Ok(out) => out,
            Err(e) if config.clamp == ClampPolicy::ClampAndLog && obs.y.is_some() => {
                let (next, mut record) = step(&Observation::missing(obs.ctx))?;
                record.y = obs.y;
                record
                    .warnings
                    .push(format!("step failed ({e}); observation skipped"));
                (next, record)
            }
            Err(e) => return Err(e),
        };
        state = next;
        records.push(record);
    }
    Ok(FilterRun { records, state })
}

/// `ℓ`-step forecast from the current state. `future` defaults to the last
/// observed context.
pub fn forecast(
    state: &FilterState,
    config: &EngineConfig,
    ell: usize,
    future: Option<ObsContext>,
) -> Result<ForecastRecord> {
    if ell == 0 {
        return Err(Error::domain("forecast", 0.0, "ell >= 1"));
    }
    let family = config.family;
    let ctx = future.or(state.last_ctx()).unwrap_or_default();
    let mut warnings = Vec::new();
    let (params, pm) = match state {
        FilterState::StateSpace { moments, .. } => {
            let raw = k_step_predictor(moments, config.model()?, ell)?;
            let (p, pm) = match_params(config, raw, &ctx, &mut warnings)?;
            (p, Some(pm))
        }
        FilterState::PowerDiscount {
            params, ctx: last, ..
        } => {
            let p = match last {
                Some(last) => {
                    family.power_discount(*params, config.delta()?, last, &ctx, config.approx)?
                }
                None => *params,
            };
            (p, family.predictor_moments(p, &ctx, config.approx).ok())
        }
    };
    let (mean, variance) = family.forecast_moments(params, &ctx)?;
    Ok(ForecastRecord {
        ell,
        r: params.r,
        s: params.s,
        f: pm.map(|p| p.f),
        q: pm.map(|p| p.q),
        mean,
        variance,
        warnings,
    })
}

/// Forecasts for `ℓ = 1..=horizon`.
pub fn forecast_path(
    state: &FilterState,
    config: &EngineConfig,
    horizon: usize,
    future: Option<ObsContext>,
) -> Result<Vec<ForecastRecord>> {
    (1..=horizon)
        .map(|ell| forecast(state, config, ell, future))
        .collect()
}

/// Mean vector and covariance of the final state-space moments.
pub fn state_moments(state: &FilterState) -> Option<(DVector<f64>, DMatrix<f64>)> {
    match state {
        FilterState::StateSpace { moments, .. } => Some((moments.m.clone(), moments.p.clone())),
        FilterState::PowerDiscount { .. } => None,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::state_space::{build_random_walk, build_trend_harmonics, Innovation};

    fn poisson_discount(delta: f64) -> EngineConfig {
        EngineConfig::power_discount(Family::Poisson, delta, ConjugateParams::new(1.0, 1.0))
    }

    fn obs(ys: &[f64]) -> Vec<Observation> {
        ys.iter()
            .map(|&y| Observation::new(y, ObsContext::default()))
            .collect()
    }

    #[test]
    fn discount_identity_step() {
        let cfg = poisson_discount(1.0);
        let run = run_filter(&obs(&[2.0]), &cfg).unwrap();
        let rec = &run.records[0];
        assert_eq!((rec.post_r, rec.post_s), (3.0, 2.0));
        assert_eq!((rec.next_r, rec.next_s), (Some(3.0), Some(2.0)));
    }

    #[test]
    fn half_discount_step() {
        let run = run_filter(&obs(&[2.0]), &poisson_discount(0.5)).unwrap();
        let rec = &run.records[0];
        assert_eq!((rec.next_r, rec.next_s), (Some(2.0), Some(1.0)));
    }

    #[test]
    fn three_point_hand_trace() {
        // prior (1,1); y=1 -> (2,2) -> (1.5,1); y=0 -> (1.5,2) -> (1.25,1);
        // y=2 -> (3.25,2) -> (2.125,1)
        let run = run_filter(&obs(&[1.0, 0.0, 2.0]), &poisson_discount(0.5)).unwrap();
        let priors: Vec<_> = run.records.iter().map(|r| (r.r, r.s)).collect();
        assert_eq!(priors, vec![(1.0, 1.0), (1.5, 1.0), (1.25, 1.0)]);
        let last = run.records.last().unwrap();
        assert_eq!((last.post_r, last.post_s), (3.25, 2.0));
        assert_eq!((last.next_r, last.next_s), (Some(2.125), Some(1.0)));
        // NB(r, 1/(1+s)) predictive at y=1 under (1,1): r=1 -> geometric 1/2 * 1/2
        assert!((run.records[0].one_step_log_density.unwrap() - 0.25f64.ln()).abs() < 1e-14);
    }

    #[test]
    fn static_run_matches_batch_conjugacy() {
        let ys = [3.0, 1.0, 4.0, 1.0, 5.0];
        let run = run_filter(&obs(&ys), &poisson_discount(1.0)).unwrap();
        let last = run.records.last().unwrap();
        assert_eq!(last.post_r, 1.0 + ys.iter().sum::<f64>());
        assert_eq!(last.post_s, 1.0 + ys.len() as f64);
        let mut rev = ys;
        rev.reverse();
        let run_rev = run_filter(&obs(&rev), &poisson_discount(1.0)).unwrap();
        assert_eq!(run_rev.records.last().unwrap().post_r, last.post_r);
        let d1 = run_filter(&obs(&ys), &poisson_discount(0.7)).unwrap();
        let d2 = run_filter(&obs(&rev), &poisson_discount(0.7)).unwrap();
        assert_ne!(d1.records, d2.records);
    }

    #[test]
    fn single_step_equals_run() {
        let cfg = poisson_discount(0.8);
        let data = obs(&[4.0]);
        let run = run_filter(&data, &cfg).unwrap();
        let (_, rec) = filter_step(&FilterState::initial(&cfg).unwrap(), &cfg, &data[0]).unwrap();
        assert_eq!(run.records[0], rec);
    }

    #[test]
    fn discount_forecast_is_flat() {
        let cfg = poisson_discount(0.6);
        let run = run_filter(&obs(&[2.0, 5.0, 3.0]), &cfg).unwrap();
        let f1 = forecast(&run.state, &cfg, 1, None).unwrap();
        let f5 = forecast(&run.state, &cfg, 5, None).unwrap();
        assert_eq!((f1.r, f1.s, f1.mean), (f5.r, f5.s, f5.mean));
        let last = run.records.last().unwrap();
        assert_eq!((Some(f1.r), Some(f1.s)), (last.next_r, last.next_s));
    }

    #[test]
    fn one_step_forecast_is_next_prior() {
        let model = build_random_walk();
        let cfg = EngineConfig::state_space(Family::Poisson, model);
        let data = obs(&[2.0, 3.0, 1.0, 6.0]);
        let run = run_filter(&data[..3], &cfg).unwrap();
        let fc = forecast(&run.state, &cfg, 1, None).unwrap();
        let full = run_filter(&data, &cfg).unwrap();
        let rec = &full.records[3];
        assert_eq!((fc.r, fc.s, fc.f, fc.q), (rec.r, rec.s, rec.f, rec.q));
        assert_eq!(fc.mean, rec.forecast_mean);
    }

    #[test]
    fn seasonal_forecast_matches_unrolled_evolution() {
        let model = build_trend_harmonics(4, 0.01, 0.01).unwrap();
        let cfg = EngineConfig::state_space(Family::Binomial, model.clone());
        let ctx = ObsContext::with_n(20);
        let data: Vec<_> = [8.0, 12.0, 15.0, 9.0, 7.0, 13.0]
            .iter()
            .map(|&y| Observation::new(y, ctx))
            .collect();
        let run = run_filter(&data, &cfg).unwrap();
        let (m, p) = state_moments(&run.state).unwrap();
        let omega = match &model.innovation {
            Innovation::Fixed(o) => o.clone(),
            Innovation::Discount(_) => unreachable!(),
        };
        let (mut a, mut r) = (m, p);
        for _ in 0..4 {
            a = &model.g * a;
            r = &model.g * r * model.g.transpose() + &omega;
        }
        let f4 = forecast(&run.state, &cfg, 4, None).unwrap();
        assert!((f4.f.unwrap() - model.f.dot(&a)).abs() < 1e-10);
        assert!((f4.q.unwrap() - (&r * &model.f).dot(&model.f)).abs() < 1e-10);
    }

    #[test]
    fn missing_observation_holds_moments() {
        let cfg = EngineConfig::state_space(Family::Poisson, build_random_walk());
        let data = vec![
            Observation::new(3.0, ObsContext::default()),
            Observation::missing(ObsContext::default()),
        ];
        let run = run_filter(&data, &cfg).unwrap();
        let rec = &run.records[1];
        assert!(rec.one_step_log_density.is_none());
        assert_eq!(rec.m[0], run.records[0].m[0]);
        assert_eq!(rec.p[0], run.records[0].p[0] + 1.0);

        let dcfg = poisson_discount(0.5);
        let run = run_filter(&data, &dcfg).unwrap();
        let rec = &run.records[1];
        assert_eq!((rec.post_r, rec.post_s), (rec.r, rec.s));
        assert_eq!(rec.next_r, Some(0.5 * (rec.r - 1.0) + 1.0));
    }

    #[test]
    fn support_violation_respects_policy() {
        let data = obs(&[2.0, -1.0, 3.0]);
        assert!(matches!(
            run_filter(&data, &poisson_discount(0.9)),
            Err(Error::Observation { .. })
        ));
        let cfg = poisson_discount(0.9).with_clamp(ClampPolicy::ClampAndLog);
        let run = run_filter(&data, &cfg).unwrap();
        assert_eq!(run.records.len(), 3);
        assert!(!run.records[1].warnings.is_empty());
    }

    #[test]
    fn inverse_gaussian_needs_discount_mode() {
        let cfg = EngineConfig::state_space(Family::InverseGaussian, build_random_walk());
        assert!(matches!(
            run_filter(&obs(&[1.0]), &cfg),
            Err(Error::Unsupported { .. })
        ));
        let cfg = EngineConfig::power_discount(
            Family::InverseGaussian,
            0.9,
            ConjugateParams::new(1.0, 1.0),
        );
        let data = vec![Observation::new(2.0, ObsContext::with_lambda(0.5))];
        let run = run_filter(&data, &cfg).unwrap();
        assert!(run.records[0].f.is_none());
        assert!(run.records[0].one_step_log_density.unwrap().is_finite());
    }

    #[test]
    fn negative_binomial_clamp() {
        // P0 large enough that q exceeds 1 + e^f on the first step
        let model = build_random_walk()
            .with_prior(
                DVector::from_element(1, 0.0),
                DMatrix::from_element(1, 1, 50.0),
            )
            .unwrap();
        let ctx = ObsContext::with_n(5);
        let data = vec![Observation::new(4.0, ctx)];
        let cfg = EngineConfig::state_space(Family::NegativeBinomial, model);
        assert!(matches!(
            run_filter(&data, &cfg),
            Err(Error::ConjugateDomain { .. })
        ));
        let run = run_filter(&data, &cfg.with_clamp(ClampPolicy::ClampAndLog)).unwrap();
        assert!(run.records[0].warnings[0].contains("clamped"));
        assert_eq!(run.records[0].q, Some(1.0));
    }

    #[test]
    fn matched_mode_static_run_is_conjugate() {
        let model = StateSpaceModel::new(
            DVector::from_element(1, 1.0),
            DMatrix::identity(1, 1),
            DMatrix::zeros(1, 1),
            DVector::zeros(1),
            DMatrix::from_element(1, 1, 0.5),
        )
        .unwrap();
        let ctx = ObsContext::with_nu(2.0);
        let ys = [0.7, 1.3, 0.4, 2.2, 0.9, 1.1];
        let data: Vec<_> = ys.iter().map(|&y| Observation::new(y, ctx)).collect();
        let cfg =
            EngineConfig::state_space(Family::Weibull, model).with_approx(ApproxMode::Matched);
        let run = run_filter(&data, &cfg).unwrap();
        let first = &run.records[0];
        let last = run.records.last().unwrap();
        let sum: f64 = ys[..5].iter().map(|y| y * y).sum();
        assert!((last.r - (first.r + sum)).abs() < 1e-9 * last.r);
        assert!((last.s - (first.s + 5.0)).abs() < 1e-9 * last.s);

        // exact posterior moments re-match to roughly half an observation
        let run = run_filter(&data, &cfg.with_approx(ApproxMode::Exact)).unwrap();
        let gained = run.records.last().unwrap().s - run.records[0].s;
        assert!(gained > 2.0 && gained < 3.5, "{gained}");
    }

    #[test]
    fn config_validation() {
        assert!(matches!(
            run_filter(&obs(&[1.0]), &poisson_discount(1.2)),
            Err(Error::Config(_))
        ));
        assert!(matches!(
            run_filter(&[], &poisson_discount(0.5)),
            Err(Error::Structural(_))
        ));
    }
}
