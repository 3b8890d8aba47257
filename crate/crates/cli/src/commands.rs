//! Subcommand bodies. Each writes JSON lines (or plot data) to `out`.

use std::io::Write;

use dglm::diagnostics::{
    bayes_factors, grid_search_delta, log_predictive_score, mse, record_log_likelihood, GridOptions,
};
use dglm::engine::{forecast_path, run_filter, FilterRun, StepRecord};
use dglm::simulate::{
    simulate_generic, simulate_negative_binomial, simulate_weibull, Evolution, SimSpec,
};
use dglm::state_space::Innovation;
use dglm::survival::{exponential_survivor, fit_survival, survivor_prediction, SurvivalModel};
use dglm::{ConjugateParams, Family, ObsContext};
use serde::Serialize;
use serde_json::json;

use crate::config::RunConfig;
use crate::data::{parse_series, parse_subjects, parse_survivor_rows, parse_table, Series};
use crate::error::CliError;

fn line(out: &mut dyn Write, value: &impl Serialize) -> Result<(), CliError> {
    serde_json::to_writer(&mut *out, value)?;
    out.write_all(b"\n")?;
    Ok(())
}

#[derive(Serialize)]
struct StepLine<'a> {
    kind: &'static str,
    label: &'a str,
    #[serde(flatten)]
    record: &'a StepRecord,
}

fn fmt_opt(v: Option<f64>) -> String {
    v.filter(|x| x.is_finite())
        .map(|x| x.to_string())
        .unwrap_or_default()
}

fn interval(family: Family, p: ConjugateParams, ctx: &ObsContext) -> (Option<f64>, Option<f64>) {
    (
        family.forecast_quantile(p, 0.025, ctx).ok(),
        family.forecast_quantile(p, 0.975, ctx).ok(),
    )
}

fn run(cfg: &RunConfig, text: &str) -> Result<(Series, FilterRun), CliError> {
    let engine = cfg.engine()?;
    let series = parse_series(text, cfg.context())?;
    let run = run_filter(&series.observations, &engine)?;
    Ok((series, run))
}

pub fn fit(cfg: &RunConfig, text: &str, plot: bool, out: &mut dyn Write) -> Result<(), CliError> {
    let family = cfg.family()?;
    let (series, run) = run(cfg, text)?;
    if plot {
        writeln!(out, "t,y,forecast_mean,lower,upper")?;
        for ((label, obs), rec) in series
            .labels
            .iter()
            .zip(&series.observations)
            .zip(&run.records)
        {
            let (lo, hi) = interval(family, rec.prior(), &obs.ctx);
            writeln!(
                out,
                "{label},{},{},{},{}",
                fmt_opt(obs.y),
                fmt_opt(Some(rec.forecast_mean)),
                fmt_opt(lo),
                fmt_opt(hi)
            )?;
        }
        return Ok(());
    }
    for (label, rec) in series.labels.iter().zip(&run.records) {
        line(
            out,
            &StepLine {
                kind: "step",
                label,
                record: rec,
            },
        )?;
    }
    let ll = record_log_likelihood(
        family,
        &run.records,
        &series.observations,
        cfg.likelihood_omega.unwrap_or(1.0),
        cfg.plug_in()?,
    );
    let warnings: usize = run.records.iter().map(|r| r.warnings.len()).sum();
    line(
        out,
        &json!({
            "kind": "summary",
            "steps": run.records.len(),
            "mse": mse(&run.records),
            "log_likelihood": ll.as_ref().ok(),
            "log_likelihood_error": ll.as_ref().err().map(|e| e.to_string()),
            "log_score": log_predictive_score(&run.records),
            "warnings": warnings,
        }),
    )
}

pub fn forecast(
    cfg: &RunConfig,
    text: &str,
    plot: bool,
    out: &mut dyn Write,
) -> Result<(), CliError> {
    let family = cfg.family()?;
    let engine = cfg.engine()?;
    let horizon = cfg.horizon.unwrap_or(1);
    if horizon == 0 {
        return Err(CliError::Config("horizon must be at least 1".into()));
    }
    let (series, run) = run(cfg, text)?;
    let future = series.observations.last().map(|o| o.ctx);
    let path = forecast_path(&run.state, &engine, horizon, future)?;
    let ctx = future.unwrap_or_default();
    if plot {
        writeln!(out, "ell,forecast_mean,lower,upper")?;
    }
    for rec in &path {
        let (lo, hi) = interval(family, rec.params(), &ctx);
        if plot {
            writeln!(
                out,
                "{},{},{},{}",
                rec.ell,
                fmt_opt(Some(rec.mean)),
                fmt_opt(lo),
                fmt_opt(hi)
            )?;
        } else {
            let median = family.forecast_quantile(rec.params(), 0.5, &ctx).ok();
            line(
                out,
                &json!({
                    "kind": "forecast",
                    "ell": rec.ell,
                    "r": rec.r,
                    "s": rec.s,
                    "f": rec.f,
                    "q": rec.q,
                    "mean": rec.mean,
                    "variance": rec.variance,
                    "q025": lo,
                    "q50": median,
                    "q975": hi,
                    "warnings": rec.warnings,
                }),
            )?;
        }
    }
    Ok(())
}

pub fn compare(
    a: &RunConfig,
    b: &RunConfig,
    text: &str,
    plot: bool,
    out: &mut dyn Write,
) -> Result<(), CliError> {
    if a.family()? != b.family()? {
        return Err(CliError::Config(
            "compared models must share a response family".into(),
        ));
    }
    let window = a.window.unwrap_or(1);
    let (ra, rb) = std::thread::scope(|scope| {
        let ha = scope.spawn(|| run(a, text));
        let hb = scope.spawn(|| run(b, text));
        (ha.join(), hb.join())
    });
    let (series, ra) = ra.map_err(|_| CliError::Numeric("model A panicked".into()))??;
    let (_, rb) = rb.map_err(|_| CliError::Numeric("model B panicked".into()))??;
    let cmp = bayes_factors(&ra.records, &rb.records, window)?;
    if plot {
        writeln!(out, "t,h1,log_h1,log_hk,log_cumulative")?;
    }
    for (i, label) in series.labels.iter().enumerate() {
        if plot {
            writeln!(
                out,
                "{label},{},{},{},{}",
                cmp.h1[i], cmp.log_h1[i], cmp.log_hk[i], cmp.log_cumulative[i]
            )?;
        } else {
            line(
                out,
                &json!({
                    "kind": "bayes-factor",
                    "label": label,
                    "t": i + 1,
                    "h1": cmp.h1[i],
                    "log_h1": cmp.log_h1[i],
                    "log_hk": cmp.log_hk[i],
                    "log_cumulative": cmp.log_cumulative[i],
                }),
            )?;
        }
    }
    if !plot {
        line(
            out,
            &json!({
                "kind": "summary",
                "window": cmp.window,
                "mean_h1": cmp.mean_h1,
                "log_cumulative": cmp.log_cumulative.last(),
                "log_score_a": cmp.log_scores[0],
                "log_score_b": cmp.log_scores[1],
                "mse_a": mse(&ra.records),
                "mse_b": mse(&rb.records),
            }),
        )?;
    }
    Ok(())
}

pub fn simulate(cfg: &RunConfig, out: &mut dyn Write) -> Result<(), CliError> {
    let family = cfg.family()?;
    let length = cfg.length.unwrap_or(100);
    let seed = cfg.seed.unwrap_or(0);
    let omega = cfg.omega.unwrap_or(1.0);
    let series = match family {
        Family::Weibull if cfg.model.is_none() => simulate_weibull(
            length,
            cfg.nu.unwrap_or(1.0),
            cfg.lambda0.unwrap_or(1.0),
            omega,
            seed,
        )?,
        Family::NegativeBinomial if cfg.model.is_none() => {
            simulate_negative_binomial(length, cfg.n.unwrap_or(10), omega, seed)?
        }
        _ => {
            let evolution = match cfg.model.as_deref() {
                None | Some("random-walk") if cfg.omega_matrix.is_none() => Evolution::RandomWalk {
                    eta0: cfg.eta0.unwrap_or(0.0),
                    omega,
                },
                _ => {
                    let mut c = cfg.clone();
                    c.delta = None;
                    c.innovation = Some("fixed".into());
                    let model = c.state_model()?;
                    if let Innovation::Discount(_) = model.innovation {
                        return Err(CliError::Config(
                            "simulation needs a fixed innovation covariance".into(),
                        ));
                    }
                    Evolution::Linear(model)
                }
            };
            simulate_generic(&SimSpec {
                family,
                length,
                evolution,
                ctx: cfg.context(),
                seed,
            })?
        }
    };
    out.write_all(series.to_dsv().as_bytes())?;
    Ok(())
}

/// `lo:hi[:step]` (step 0.05, `hi` always included) or a comma list.
pub fn parse_grid(spec: &str) -> Result<Vec<f64>, CliError> {
    let bad = || CliError::Config(format!("cannot parse grid `{spec}`"));
    let num = |s: &str| s.trim().parse::<f64>().map_err(|_| bad());
    if spec.contains(':') {
        let parts: Vec<&str> = spec.split(':').collect();
        if parts.len() > 3 {
            return Err(bad());
        }
        let (lo, hi) = (num(parts[0])?, num(parts[1])?);
        let step = if parts.len() == 3 {
            num(parts[2])?
        } else {
            0.05
        };
        if !(step > 0.0 && lo <= hi) {
            return Err(bad());
        }
        let mut grid = Vec::new();
        let mut k = 0;
        loop {
            let v = lo + step * k as f64;
            if v > hi - 1e-9 {
                break;
            }
            grid.push((v * 1e10).round() / 1e10);
            k += 1;
        }
        grid.push(hi);
        Ok(grid)
    } else {
        spec.split(',').map(num).collect()
    }
}

pub fn gridsearch(
    cfg: &RunConfig,
    grid: &[f64],
    text: &str,
    out: &mut dyn Write,
) -> Result<(), CliError> {
    let mut template_cfg = cfg.clone();
    if template_cfg.delta.is_none() {
        template_cfg.delta = grid.first().copied();
    }
    let template = template_cfg.engine()?;
    let series = parse_series(text, cfg.context())?;
    let opts = GridOptions {
        omega: cfg.likelihood_omega.unwrap_or(1.0),
        plug_in: cfg.plug_in()?,
    };
    let table = grid_search_delta(&template, &series.observations, grid, opts);
    for row in &table.rows {
        line(
            out,
            &json!({
                "kind": "grid",
                "delta": row.delta,
                "mse": row.mse,
                "log_likelihood": row.log_likelihood,
                "log_score": row.log_score,
                "error": row.error,
            }),
        )?;
    }
    line(
        out,
        &json!({
            "kind": "summary",
            "argmin_mse": table.argmin_mse,
            "argmax_log_likelihood": table.argmax_log_likelihood,
        }),
    )
}

pub fn survival(cfg: &RunConfig, text: &str, out: &mut dyn Write) -> Result<(), CliError> {
    let table = parse_table(text)?;
    if table.column("r").is_some() {
        for (r, s, gap, nu) in parse_survivor_rows(&table)? {
            let value = if nu == 1.0 {
                exponential_survivor(r, s, gap)?
            } else {
                survivor_prediction(r, s, gap, nu)?
            };
            line(
                out,
                &json!({"kind": "survivor", "r": r, "s": s, "gap": gap, "nu": nu, "survival": value}),
            )?;
        }
        return Ok(());
    }
    let subjects = parse_subjects(&table)?;
    let boundaries = cfg
        .boundaries
        .clone()
        .ok_or_else(|| CliError::Config("survival fitting needs `boundaries`".into()))?;
    let n_cov = subjects.first().map(|s| s.covariates.len()).unwrap_or(0);
    let mut model = SurvivalModel::new(
        boundaries,
        n_cov,
        cfg.nu.unwrap_or(1.0),
        cfg.omega.unwrap_or(0.1),
    )?;
    model.approx = cfg.approx()?;
    model.censored_exposure = cfg.censored_exposure.unwrap_or(false);
    if let Some(k) = cfg.p0_scale {
        let d = model.dim();
        model.p0 = nalgebra::DMatrix::identity(d, d) * k;
    }
    let gaps = cfg.gaps.clone().unwrap_or_else(|| vec![0.5, 1.0, 2.0]);
    let fit = fit_survival(&model, &subjects, &gaps)?;
    for iv in &fit.intervals {
        line(out, &json!({"kind": "interval", "fit": iv}))?;
    }
    for c in &fit.curves {
        line(out, &json!({"kind": "curve", "curve": c}))?;
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn grid_parsing() {
        let g = parse_grid("0.5:0.99").unwrap();
        assert_eq!(g.len(), 11);
        assert_eq!(g[0], 0.5);
        assert_eq!(g[9], 0.95);
        assert_eq!(g[10], 0.99);
        assert_eq!(parse_grid("0.7,0.9").unwrap(), vec![0.7, 0.9]);
        assert!(parse_grid("a:b").is_err());
    }

    #[test]
    fn survivor_row() {
        let mut out = Vec::new();
        survival(&RunConfig::default(), "r,s,gap,nu\n2,3,1,1\n", &mut out).unwrap();
        let v: serde_json::Value = serde_json::from_slice(&out).unwrap();
        assert!((v["survival"].as_f64().unwrap() - 4.0 / 9.0).abs() < 1e-15);
    }

    #[test]
    fn poisson_discount_fit_matches_hand_trace() {
        let cfg = RunConfig {
            family: Some("poisson".into()),
            delta: Some(0.5),
            r0: Some(3.0),
            s0: Some(2.0),
            ..Default::default()
        };
        let mut out = Vec::new();
        fit(&cfg, "t,y\n1,1\n2,0\n3,2\n", false, &mut out).unwrap();
        let lines: Vec<serde_json::Value> = out
            .split(|&b| b == b'\n')
            .filter(|l| !l.is_empty())
            .map(|l| serde_json::from_slice(l).unwrap())
            .collect();
        assert_eq!(lines.len(), 4);
        // prior (3, 2) -> posterior (4, 3) -> next prior (0.5 * 3 + 1, 0.5 * 3)
        assert_eq!(lines[0]["post_r"], 4.0);
        assert_eq!(lines[0]["post_s"], 3.0);
        assert_eq!(lines[1]["r"], 2.5);
        assert_eq!(lines[1]["s"], 1.5);
        assert_eq!(lines[3]["kind"], "summary");
    }
}
