//! Plug-in log-likelihood, cumulative Bayes factors, predictive scores,
//! forecast MSE and discount-factor grid search.

use rayon::prelude::*;
use serde::Serialize;

use crate::engine::{run_filter, EngineConfig, EngineMode, Observation, StepRecord};
use crate::error::{Error, Result};
use crate::families::{ConjugateLaw, Family};
use crate::state_space::Innovation;

/// Which point estimate of the state parameter the plug-in likelihood uses.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum PlugIn {
    /// Posterior mean of the state parameter.
    #[default]
    Mean,
    /// `1 / E(1/state)`: for the Weibull, `(r + y^ν)/s` in prior
    /// coordinates.
    Harmonic,
}

/// Plug-in state path from filter records.
pub fn plugin_path(
    family: Family,
    records: &[StepRecord],
    data: &[Observation],
    how: PlugIn,
) -> Result<Vec<f64>> {
    if records.len() != data.len() {
        return Err(Error::Structural(format!(
            "{} records for {} observations",
            records.len(),
            data.len()
        )));
    }
    match how {
        PlugIn::Mean => Ok(records.iter().map(|r| r.state_estimate).collect()),
        PlugIn::Harmonic => records
            .iter()
            .zip(data)
            .map(|(rec, obs)| {
                match family.conjugate_law(rec.posterior(), &obs.ctx)? {
                    // state = 1/x with x ~ Gamma(a, b): E x = a/b
                    ConjugateLaw::InverseGamma { shape, scale } => Ok(scale / shape),
                    // state = x itself: E(1/x) = b/(a − 1)
                    ConjugateLaw::Gamma { shape, rate } if shape > 1.0 => Ok((shape - 1.0) / rate),
                    _ => Err(Error::Unsupported {
                        family: family.name(),
                        operation: "harmonic plug-in estimate",
                    }),
                }
            })
            .collect(),
    }
}

/// Observation terms plus random-walk transition terms along `path`.
/// Without `initial` the transition sum starts at the second step.
/// Missing observations contribute only their transition term.
pub fn log_likelihood(
    family: Family,
    path: &[f64],
    data: &[Observation],
    omega: f64,
    initial: Option<f64>,
) -> Result<f64> {
    if path.len() != data.len() {
        return Err(Error::Structural(format!(
            "state path of length {} for {} observations",
            path.len(),
            data.len()
        )));
    }
    let mut total = 0.0;
    let mut prev = initial;
    for (i, (&state, obs)) in path.iter().zip(data).enumerate() {
        let t = i + 1;
        let eval = |e: Error| Error::Evaluation {
            t,
            reason: e.to_string(),
        };
        if let Some(y) = obs.y {
            total += family.obs_logdensity(y, state, &obs.ctx).map_err(eval)?;
        }
        if let Some(p) = prev {
            total += family
                .transition_logdensity(state, p, omega)
                .map_err(eval)?;
        }
        prev = Some(state);
    }
    Ok(total)
}

/// [`log_likelihood`] at the plug-in path of a filter run.
pub fn record_log_likelihood(
    family: Family,
    records: &[StepRecord],
    data: &[Observation],
    omega: f64,
    how: PlugIn,
) -> Result<f64> {
    let path = plugin_path(family, records, data, how)?;
    log_likelihood(family, &path, data, omega, None)
}

/// The squared-return volatility likelihood in its printed shorthand:
/// `−(T/2) log(2Ωπ²) − Σ log y² − (1/2Ω) Σ (log β_t − log β_{t−1})²`,
/// with `β_0 = beta0`.
///
/// It differs from [`log_likelihood`] for the gamma family (`α = 1/2` on
/// `y²`, transition from `β_0`) by `Σ (½ log y² − ½ log β − β y²)`.
pub fn volatility_loglik_printed(
    returns: &[f64],
    beta: &[f64],
    beta0: f64,
    omega: f64,
) -> Result<f64> {
    if returns.len() != beta.len() {
        return Err(Error::Structural(
            "returns and beta differ in length".into(),
        ));
    }
    let t_len = returns.len() as f64;
    let mut ll = -0.5 * t_len * (2.0 * omega * std::f64::consts::PI.powi(2)).ln();
    let mut prev = beta0;
    for (&y, &b) in returns.iter().zip(beta) {
        ll -= (y * y).ln();
        let d = b.ln() - prev.ln();
        ll -= d * d / (2.0 * omega);
        prev = b;
    }
    Ok(ll)
}

/// Sum of the one-step predictive log-densities.
pub fn log_predictive_score(records: &[StepRecord]) -> f64 {
    records.iter().filter_map(|r| r.one_step_log_density).sum()
}

/// One-step forecast mean squared error over steps with an observation
/// and a finite forecast mean.
pub fn mse(records: &[StepRecord]) -> f64 {
    let (sum, n) = records
        .iter()
        .filter_map(|r| r.y.map(|y| (y, r.forecast_mean)))
        .filter(|(_, m)| m.is_finite())
        .fold((0.0, 0usize), |(s, n), (y, m)| {
            (s + (y - m) * (y - m), n + 1)
        });
    if n == 0 {
        0.0
    } else {
        sum / n as f64
    }
}

/// Mean squared difference between paired forecasts and observations.
pub fn mse_pairs(forecasts: &[f64], observed: &[f64]) -> Result<f64> {
    if forecasts.len() != observed.len() {
        return Err(Error::Structural("forecast and data lengths differ".into()));
    }
    if forecasts.is_empty() {
        return Ok(0.0);
    }
    let s: f64 = forecasts
        .iter()
        .zip(observed)
        .map(|(f, y)| (y - f) * (y - f))
        .sum();
    Ok(s / forecasts.len() as f64)
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ModelComparison {
    pub window: usize,
    pub log_h1: Vec<f64>,
    pub h1: Vec<f64>,
    /// `log H_t(k)` for the requested window `k`.
    pub log_hk: Vec<f64>,
    /// `log H_t(t)`, the running product from the first step.
    pub log_cumulative: Vec<f64>,
    pub mean_h1: f64,
    pub log_scores: [f64; 2],
}

impl ModelComparison {
    pub fn hk(&self) -> Vec<f64> {
        self.log_hk.iter().map(|l| l.exp()).collect()
    }
}

/// Bayes factors of model 1 against model 2. Steps without an observation
/// contribute `H_t(1) = 1`; windows reaching before the first step are
/// truncated there.
pub fn bayes_factors(
    model1: &[StepRecord],
    model2: &[StepRecord],
    window: usize,
) -> Result<ModelComparison> {
    if model1.len() != model2.len() {
        return Err(Error::Structural(format!(
            "record sequences differ in length ({} vs {})",
            model1.len(),
            model2.len()
        )));
    }
    if model1.is_empty() {
        return Err(Error::Structural("no records to compare".into()));
    }
    let log_h1: Vec<f64> = model1
        .iter()
        .zip(model2)
        .map(
            |(a, b)| match (a.one_step_log_density, b.one_step_log_density) {
                (Some(x), Some(y)) => x - y,
                _ => 0.0,
            },
        )
        .collect();
    let mut log_cumulative = Vec::with_capacity(log_h1.len());
    let mut acc = 0.0;
    for l in &log_h1 {
        acc += l;
        log_cumulative.push(acc);
    }
    let log_hk = (0..log_h1.len())
        .map(|t| {
            let start = (t + 1).saturating_sub(window);
            log_h1[start..=t].iter().sum()
        })
        .collect();
    let h1: Vec<f64> = log_h1.iter().map(|l| l.exp()).collect();
    let mean_h1 = h1.iter().sum::<f64>() / h1.len() as f64;
    Ok(ModelComparison {
        window,
        log_h1,
        h1,
        log_hk,
        log_cumulative,
        mean_h1,
        log_scores: [log_predictive_score(model1), log_predictive_score(model2)],
    })
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct GridRow {
    pub delta: f64,
    pub mse: Option<f64>,
    pub log_likelihood: Option<f64>,
    pub log_score: Option<f64>,
    pub error: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct GridTable {
    pub rows: Vec<GridRow>,
    pub argmin_mse: Option<f64>,
    pub argmax_log_likelihood: Option<f64>,
}

/// Likelihood settings for [`grid_search_delta`].
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GridOptions {
    pub omega: f64,
    pub plug_in: PlugIn,
}

impl Default for GridOptions {
    fn default() -> Self {
        GridOptions {
            omega: 1.0,
            plug_in: PlugIn::Mean,
        }
    }
}

/// Applies `delta` to a configuration: the discount factor itself in
/// discount mode, a discount innovation in state-space mode.
pub fn with_delta(template: &EngineConfig, delta: f64) -> Result<EngineConfig> {
    let mut cfg = template.clone();
    match cfg.mode {
        EngineMode::PowerDiscount => cfg.delta = Some(delta),
        EngineMode::StateSpace => {
            let model = cfg
                .model
                .take()
                .ok_or_else(|| Error::Config("state-space mode needs a model".into()))?;
            cfg.model = Some(model.with_innovation(Innovation::Discount(delta))?);
        }
    }
    cfg.validate()?;
    Ok(cfg)
}

/// One full run per grid value; cells run in parallel, failures are kept
/// per cell.
pub fn grid_search_delta(
    template: &EngineConfig,
    data: &[Observation],
    grid: &[f64],
    opts: GridOptions,
) -> GridTable {
    let rows: Vec<GridRow> = grid
        .par_iter()
        .map(|&delta| {
            let cell = || -> Result<(f64, f64, f64)> {
                let cfg = with_delta(template, delta)?;
                let run = run_filter(data, &cfg)?;
                let ll = record_log_likelihood(
                    cfg.family,
                    &run.records,
                    data,
                    opts.omega,
                    opts.plug_in,
                )?;
                Ok((mse(&run.records), ll, log_predictive_score(&run.records)))
            };
            match cell() {
                Ok((m, ll, score)) => GridRow {
                    delta,
                    mse: Some(m),
                    log_likelihood: Some(ll),
                    log_score: Some(score),
                    error: None,
                },
                Err(e) => GridRow {
                    delta,
                    mse: None,
                    log_likelihood: None,
                    log_score: None,
                    error: Some(e.to_string()),
                },
            }
        })
        .collect();
    let best = |key: fn(&GridRow) -> Option<f64>, lower: bool| {
        rows.iter()
            .filter_map(|r| key(r).filter(|v| v.is_finite()).map(|v| (r.delta, v)))
            .fold(None, |acc: Option<(f64, f64)>, (d, v)| match acc {
                Some((_, bv)) if (lower && v >= bv) || (!lower && v <= bv) => acc,
                _ => Some((d, v)),
            })
            .map(|(d, _)| d)
    };
    GridTable {
        argmin_mse: best(|r| r.mse, true),
        argmax_log_likelihood: best(|r| r.log_likelihood, false),
        rows,
    }
}

/// `delta` values from `lo` to `hi` inclusive in `steps` equal steps.
pub fn delta_grid(lo: f64, hi: f64, steps: usize) -> Vec<f64> {
    if steps == 0 {
        return vec![lo];
    }
    (0..=steps)
        .map(|i| lo + (hi - lo) * i as f64 / steps as f64)
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::engine::Observation;
    use crate::families::{ConjugateParams, ObsContext};

    fn rec(ld: Option<f64>, y: Option<f64>, mean: f64) -> StepRecord {
        StepRecord {
            t: 0,
            y,
            f: None,
            q: None,
            r: 1.0,
            s: 1.0,
            post_r: 1.0,
            post_s: 1.0,
            f_star: None,
            q_star: None,
            m: vec![],
            p: vec![],
            next_r: None,
            next_s: None,
            one_step_log_density: ld,
            forecast_mean: mean,
            forecast_variance: 1.0,
            state_estimate: 1.0,
            warnings: vec![],
        }
    }

    #[test]
    fn single_normal_observation_at_mode() {
        let data = [Observation::new(0.0, ObsContext::with_v(1.0))];
        let ll = log_likelihood(Family::Normal, &[0.0], &data, 1.0, None).unwrap();
        assert!((ll + 0.5 * (2.0 * std::f64::consts::PI).ln()).abs() < 1e-15);
    }

    #[test]
    fn volatility_printed_form_identity() {
        let y = [0.3f64, -0.1, 0.2];
        let beta = [2.0f64, 3.0, 1.5];
        let (beta0, omega) = (2.5, 0.7);
        let data: Vec<_> = y
            .iter()
            .map(|v| Observation::new(v * v, ObsContext::with_alpha(0.5)))
            .collect();
        let general = log_likelihood(Family::Gamma, &beta, &data, omega, Some(beta0)).unwrap();
        let printed = volatility_loglik_printed(&y, &beta, beta0, omega).unwrap();
        let gap: f64 = y
            .iter()
            .zip(&beta)
            .map(|(v, b)| 0.5 * (v * v).ln() - 0.5 * b.ln() - b * v * v)
            .sum();
        assert!((general - printed - gap).abs() < 1e-12);
        // hand value for the printed form
        let mut hand = -1.5 * (2.0 * omega * std::f64::consts::PI.powi(2)).ln();
        hand -= (0.09f64).ln() + (0.01f64).ln() + (0.04f64).ln();
        hand -= ((2.0f64 / 2.5).ln().powi(2) + (1.5f64).ln().powi(2) + (0.5f64).ln().powi(2))
            / (2.0 * omega);
        assert!((printed - hand).abs() < 1e-12);
    }

    #[test]
    fn perturbing_a_state_lowers_transition_likelihood() {
        let data: Vec<_> = [1.0, 1.0, 1.0]
            .iter()
            .map(|&y| Observation::new(y, ObsContext::with_v(1.0)))
            .collect();
        let base = log_likelihood(Family::Normal, &[1.0, 1.0, 1.0], &data, 0.5, None).unwrap();
        let bumped = log_likelihood(Family::Normal, &[1.0, 1.4, 1.0], &data, 0.5, None).unwrap();
        assert!(bumped < base);
    }

    #[test]
    fn pareto_domain_error_names_step() {
        let data: Vec<_> = [2.0, 3.0]
            .iter()
            .map(|&y| Observation::new(y, ObsContext::default()))
            .collect();
        let err = log_likelihood(Family::Pareto, &[2.0, 0.8], &data, 1.0, None).unwrap_err();
        assert!(matches!(err, Error::Evaluation { t: 2, .. }));
    }

    #[test]
    fn identical_models_give_unit_factors() {
        let a: Vec<_> = [-1.0, -2.5, -0.3]
            .iter()
            .map(|&l| rec(Some(l), Some(0.0), 0.0))
            .collect();
        let cmp = bayes_factors(&a, &a, 2).unwrap();
        assert!(cmp.h1.iter().all(|&h| h == 1.0));
        assert!(cmp.hk().iter().all(|&h| h == 1.0));
        assert_eq!(cmp.mean_h1, 1.0);
    }

    #[test]
    fn windows_compose() {
        let a: Vec<_> = [-1.0, -2.0, -0.5, -1.5]
            .iter()
            .map(|&l| rec(Some(l), None, 0.0))
            .collect();
        let b: Vec<_> = [-1.2, -1.0, -0.9, -1.1]
            .iter()
            .map(|&l| rec(Some(l), None, 0.0))
            .collect();
        let c = bayes_factors(&a, &b, 2).unwrap();
        for t in 1..4 {
            let want = c.h1[t - 1] * c.h1[t];
            assert!((c.hk()[t] - want).abs() < 1e-14 * want);
        }
        let back = bayes_factors(&b, &a, 1).unwrap();
        for t in 0..4 {
            assert!((c.h1[t] * back.h1[t] - 1.0).abs() < 1e-12);
        }
        assert!(bayes_factors(&a, &b[..3], 1).is_err());
    }

    #[test]
    fn mse_examples() {
        let perfect = vec![rec(None, Some(2.0), 2.0), rec(None, Some(3.0), 3.0)];
        assert_eq!(mse(&perfect), 0.0);
        let flat = vec![rec(None, Some(1.0), 0.0), rec(None, Some(-1.0), 0.0)];
        assert_eq!(mse(&flat), 1.0);
        assert_eq!(mse_pairs(&[0.0, 0.0], &[1.0, -1.0]).unwrap(), 1.0);
    }

    #[test]
    fn single_cell_grid_equals_direct_run() {
        let data: Vec<_> = [3.0, 1.0, 4.0, 1.0, 5.0, 9.0]
            .iter()
            .map(|&y| Observation::new(y, ObsContext::default()))
            .collect();
        let cfg =
            EngineConfig::power_discount(Family::Poisson, 0.5, ConjugateParams::new(1.0, 1.0));
        let table = grid_search_delta(&cfg, &data, &[0.8], GridOptions::default());
        let run = run_filter(&data, &with_delta(&cfg, 0.8).unwrap()).unwrap();
        let row = &table.rows[0];
        assert_eq!(row.mse, Some(mse(&run.records)));
        let ll =
            record_log_likelihood(Family::Poisson, &run.records, &data, 1.0, PlugIn::Mean).unwrap();
        assert_eq!(row.log_likelihood, Some(ll));
        assert_eq!(table.argmin_mse, Some(0.8));
    }

    #[test]
    fn grid_keeps_failed_cells() {
        let data = [Observation::new(1.0, ObsContext::default())];
        let cfg =
            EngineConfig::power_discount(Family::Poisson, 0.5, ConjugateParams::new(1.0, 1.0));
        let table = grid_search_delta(&cfg, &data, &[0.5, 1.5], GridOptions::default());
        assert!(table.rows[0].error.is_none());
        assert!(table.rows[1].error.is_some());
    }
}
