//! Browser bindings. Each export returns a JSON string so the page needs no
//! generated type glue beyond `wasm-bindgen`'s string passing.

use dglm::diagnostics::bayes_factors;
use dglm::engine::{run_filter, EngineConfig, FilterRun};
use dglm::simulate::{simulate_generic, Evolution, SimSeries, SimSpec};
use dglm::survival::survivor_prediction;
use dglm::{ConjugateParams, Family, ObsContext};
use serde::Serialize;
use wasm_bindgen::prelude::*;

fn demo_context() -> ObsContext {
    ObsContext {
        n: Some(20),
        v: Some(0.5),
        alpha: Some(2.0),
        nu: Some(2.0),
        lambda: Some(1.0),
    }
}

/// First of a few small priors that the family accepts.
fn default_prior(family: Family, ctx: &ObsContext) -> Result<ConjugateParams, String> {
    [(1.0, 1.0), (1.0, 2.0), (2.0, 3.0), (0.0, 1.0)]
        .into_iter()
        .map(|(r, s)| ConjugateParams::new(r, s))
        .find(|p| family.check_params(*p, ctx).is_ok())
        .ok_or_else(|| format!("no default prior for {family}"))
}

fn simulate(family: Family, length: usize, omega: f64, seed: u64) -> Result<SimSeries, String> {
    simulate_generic(&SimSpec {
        family,
        length,
        evolution: Evolution::RandomWalk { eta0: 0.0, omega },
        ctx: demo_context(),
        seed,
    })
    .map_err(|e| e.to_string())
}

fn filter(family: Family, series: &SimSeries, delta: f64) -> Result<FilterRun, String> {
    let ctx = demo_context();
    let cfg = EngineConfig::power_discount(family, delta, default_prior(family, &ctx)?);
    run_filter(&series.observations, &cfg).map_err(|e| e.to_string())
}

#[derive(Serialize)]
struct FilterView {
    y: Vec<f64>,
    truth: Vec<f64>,
    mean: Vec<f64>,
    lower: Vec<Option<f64>>,
    upper: Vec<Option<f64>>,
    log_score: f64,
}

pub fn simulate_and_filter_json(
    family: &str,
    length: usize,
    omega: f64,
    delta: f64,
    seed: u64,
) -> Result<String, String> {
    let family: Family = family.parse().map_err(|e: dglm::Error| e.to_string())?;
    let series = simulate(family, length, omega, seed)?;
    let run = filter(family, &series, delta)?;
    let ctx = demo_context();
    let band = |prob| {
        run.records
            .iter()
            .map(|r| family.forecast_quantile(r.prior(), prob, &ctx).ok())
            .collect()
    };
    let truth = series
        .states
        .iter()
        .map(|&x| family.conditional_mean(x, &ctx).unwrap_or(f64::NAN))
        .collect();
    let view = FilterView {
        y: series.values(),
        truth,
        mean: run.records.iter().map(|r| r.forecast_mean).collect(),
        lower: band(0.05),
        upper: band(0.95),
        log_score: dglm::diagnostics::log_predictive_score(&run.records),
    };
    serde_json::to_string(&view).map_err(|e| e.to_string())
}

#[derive(Serialize)]
struct Curve {
    gap: Vec<f64>,
    survival: Vec<f64>,
}

pub fn survivor_curve_json(
    r: f64,
    s: f64,
    nu: f64,
    max_gap: f64,
    points: usize,
) -> Result<String, String> {
    let points = points.max(2);
    let gap: Vec<f64> = (0..points)
        .map(|i| max_gap * i as f64 / (points - 1) as f64)
        .collect();
    let survival = gap
        .iter()
        .map(|&g| survivor_prediction(r, s, g, nu))
        .collect::<Result<Vec<_>, _>>()
        .map_err(|e| e.to_string())?;
    serde_json::to_string(&Curve { gap, survival }).map_err(|e| e.to_string())
}

#[derive(Serialize)]
struct Factors {
    h1: Vec<f64>,
    log_cumulative: Vec<f64>,
    mean_h1: f64,
}

pub fn bayes_factor_series_json(
    family: &str,
    length: usize,
    omega: f64,
    delta1: f64,
    delta2: f64,
    seed: u64,
) -> Result<String, String> {
    let family: Family = family.parse().map_err(|e: dglm::Error| e.to_string())?;
    let series = simulate(family, length, omega, seed)?;
    let a = filter(family, &series, delta1)?;
    let b = filter(family, &series, delta2)?;
    let c = bayes_factors(&a.records, &b.records, 1).map_err(|e| e.to_string())?;
    serde_json::to_string(&Factors {
        h1: c.h1,
        log_cumulative: c.log_cumulative,
        mean_h1: c.mean_h1,
    })
    .map_err(|e| e.to_string())
}

/// Simulates a random-walk series and filters it by power discounting.
#[wasm_bindgen]
pub fn simulate_and_filter(
    family: &str,
    length: usize,
    omega: f64,
    delta: f64,
    seed: u32,
) -> Result<String, JsError> {
    simulate_and_filter_json(family, length, omega, delta, seed as u64)
        .map_err(|e| JsError::new(&e))
}

/// Predictive survivor function on `points` gaps in `[0, max_gap]`.
#[wasm_bindgen]
pub fn survivor_curve(
    r: f64,
    s: f64,
    nu: f64,
    max_gap: f64,
    points: usize,
) -> Result<String, JsError> {
    survivor_curve_json(r, s, nu, max_gap, points).map_err(|e| JsError::new(&e))
}

/// One-step Bayes factors of discount `delta1` against `delta2` on a
/// simulated series.
#[wasm_bindgen]
pub fn bayes_factor_series(
    family: &str,
    length: usize,
    omega: f64,
    delta1: f64,
    delta2: f64,
    seed: u32,
) -> Result<String, JsError> {
    bayes_factor_series_json(family, length, omega, delta1, delta2, seed as u64)
        .map_err(|e| JsError::new(&e))
}

#[cfg(test)]
mod tests {
    use super::*;
    use serde_json::Value;

    #[test]
    fn filter_view_has_one_entry_per_step() {
        for fam in ["poisson", "weibull", "lognormal", "binomial", "gamma"] {
            let v: Value =
                serde_json::from_str(&simulate_and_filter_json(fam, 40, 0.05, 0.9, 3).unwrap())
                    .unwrap();
            assert_eq!(v["y"].as_array().unwrap().len(), 40, "{fam}");
            assert_eq!(v["mean"].as_array().unwrap().len(), 40, "{fam}");
            assert_eq!(v["truth"].as_array().unwrap().len(), 40, "{fam}");
        }
    }

    #[test]
    fn survivor_curve_starts_at_one_and_falls() {
        let v: Value =
            serde_json::from_str(&survivor_curve_json(2.0, 3.0, 1.0, 4.0, 5).unwrap()).unwrap();
        let s: Vec<f64> = v["survival"]
            .as_array()
            .unwrap()
            .iter()
            .map(|x| x.as_f64().unwrap())
            .collect();
        assert_eq!(s[0], 1.0);
        assert!((s[1] - 4.0 / 9.0).abs() < 1e-15);
        assert!(s.windows(2).all(|w| w[1] < w[0]));
    }

    #[test]
    fn equal_discounts_give_unit_factors() {
        let v: Value = serde_json::from_str(
            &bayes_factor_series_json("poisson", 30, 0.05, 0.8, 0.8, 1).unwrap(),
        )
        .unwrap();
        assert_eq!(v["mean_h1"], 1.0);
    }

    #[test]
    fn bad_family_is_reported() {
        assert!(simulate_and_filter_json("cauchy", 10, 0.1, 0.9, 1).is_err());
    }
}
