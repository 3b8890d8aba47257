//! Dynamic Weibull survival model over a partition of the time axis.
//!
//! Interval `t` covers `(y_{t−1}, y_t]`. The log hazard of individual `j` is
//! `F_j'θ_t` with `F_j = [1, x_j']'` and a random-walk state. Within an
//! interval the Weibull filter sees each death's gap `y − y_{t−1}`; since the
//! Weibull predictor is `log λ = −log hazard`, the design used internally is
//! `−F_j`.

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::families::{ConjugateParams, Family, ObsContext};
use crate::special::ApproxMode;
use crate::state_space::{
    bayes_linear_update, predictor_moments, propagate, Innovation, StateMoments, StateSpaceModel,
};

/// `S = (1 + gap^ν / r)^{−(s−1)}`.
pub fn survivor_prediction(r: f64, s: f64, gap: f64, nu: f64) -> Result<f64> {
    if !(s > 1.0 && s.is_finite()) {
        return Err(Error::domain("survivor_prediction", s, "s > 1"));
    }
    if !(r > 0.0 && r.is_finite()) {
        return Err(Error::domain("survivor_prediction", r, "r > 0"));
    }
    if !(gap >= 0.0) {
        return Err(Error::domain("survivor_prediction", gap, "gap >= 0"));
    }
    if !(nu > 0.0 && nu.is_finite()) {
        return Err(Error::domain("survivor_prediction", nu, "nu > 0"));
    }
    Ok((-(s - 1.0) * (gap.powf(nu) / r).ln_1p()).exp())
}

/// The exponential special case, `(r/(r + gap))^{s−1}`.
pub fn exponential_survivor(r: f64, s: f64, gap: f64) -> Result<f64> {
    if !(s > 1.0 && r > 0.0 && gap >= 0.0) {
        return Err(Error::domain(
            "exponential_survivor",
            s,
            "s > 1, r > 0, gap >= 0",
        ));
    }
    // same evaluation order as the Weibull form so ν = 1 agrees bitwise
    Ok((-(s - 1.0) * (gap / r).ln_1p()).exp())
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Subject {
    pub id: String,
    /// Death or censoring time.
    pub time: f64,
    pub event: bool,
    #[serde(default)]
    pub covariates: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SurvivalModel {
    /// `0 = y_0 < y_1 < … < y_T`.
    pub boundaries: Vec<f64>,
    pub nu: f64,
    pub m0: DVector<f64>,
    pub p0: DMatrix<f64>,
    pub innovation: Innovation,
    pub approx: ApproxMode,
    /// When set, individuals that leave an interval alive (or are censored
    /// inside it) update `r` by their exposure `e^ν` with no change to `s`.
    /// Off by default: only deaths update.
    pub censored_exposure: bool,
}

impl SurvivalModel {
    /// Random-walk coefficients with `Ω = omega · I`.
    pub fn new(boundaries: Vec<f64>, n_covariates: usize, nu: f64, omega: f64) -> Result<Self> {
        let d = n_covariates + 1;
        let model = SurvivalModel {
            boundaries,
            nu,
            m0: DVector::zeros(d),
            p0: DMatrix::identity(d, d),
            innovation: Innovation::Fixed(DMatrix::identity(d, d) * omega),
            approx: ApproxMode::Exact,
            censored_exposure: false,
        };
        model.validate()?;
        Ok(model)
    }

    pub fn dim(&self) -> usize {
        self.m0.len()
    }

    pub fn validate(&self) -> Result<()> {
        let b = &self.boundaries;
        if b.len() < 2 {
            return Err(Error::Structural("need at least one interval".into()));
        }
        if b[0] != 0.0 {
            return Err(Error::Structural("first boundary must be 0".into()));
        }
        if b.windows(2).any(|w| !(w[1] > w[0]) || !w[1].is_finite()) {
            return Err(Error::Structural(
                "boundaries must be strictly increasing".into(),
            ));
        }
        if !(self.nu > 0.0 && self.nu.is_finite()) {
            return Err(Error::domain("survival model", self.nu, "nu > 0"));
        }
        self.evolution(DVector::from_element(self.dim(), 1.0))?
            .validate()
    }

    fn evolution(&self, design: DVector<f64>) -> Result<StateSpaceModel> {
        let d = self.dim();
        if design.len() != d {
            return Err(Error::Structural(format!(
                "design has {} entries, model has {d}",
                design.len()
            )));
        }
        Ok(StateSpaceModel {
            f: design,
            g: DMatrix::identity(d, d),
            innovation: self.innovation.clone(),
            m0: self.m0.clone(),
            p0: self.p0.clone(),
        })
    }

    /// `−[1, x']'`.
    pub fn design(&self, covariates: &[f64]) -> Result<DVector<f64>> {
        if covariates.len() + 1 != self.dim() {
            return Err(Error::Structural(format!(
                "{} covariates, model expects {}",
                covariates.len(),
                self.dim() - 1
            )));
        }
        let mut v = Vec::with_capacity(self.dim());
        v.push(-1.0);
        v.extend(covariates.iter().map(|x| -x));
        Ok(DVector::from_vec(v))
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct IntervalFit {
    pub index: usize,
    pub start: f64,
    pub end: f64,
    pub at_risk: usize,
    pub deaths: usize,
    pub prior_m: Vec<f64>,
    pub prior_p: Vec<f64>,
    pub m: Vec<f64>,
    pub p: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SurvivorCurve {
    pub id: String,
    pub interval: usize,
    pub r: f64,
    pub s: f64,
    pub gaps: Vec<f64>,
    pub survival: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SurvivalFit {
    pub intervals: Vec<IntervalFit>,
    pub curves: Vec<SurvivorCurve>,
}

fn flat(p: &DMatrix<f64>) -> Vec<f64> {
    p.transpose().as_slice().to_vec()
}

/// Filters interval by interval. Each interval: one evolution step, a
/// survivor curve for every individual at risk (evaluated at `gaps`), then
/// sequential updates in ascending id order.
pub fn fit_survival(
    model: &SurvivalModel,
    subjects: &[Subject],
    gaps: &[f64],
) -> Result<SurvivalFit> {
    model.validate()?;
    if subjects.is_empty() {
        return Err(Error::Structural("no survival records".into()));
    }
    let mut order: Vec<&Subject> = subjects.iter().collect();
    order.sort_by(|a, b| a.id.cmp(&b.id));
    for s in &order {
        if !(s.time >= 0.0 && s.time.is_finite()) {
            return Err(Error::Structural(format!(
                "subject {}: invalid time {}",
                s.id, s.time
            )));
        }
        model.design(&s.covariates)?;
    }

    let family = Family::Weibull;
    let ctx = ObsContext::with_nu(model.nu);
    let base = model.evolution(model.design(&order[0].covariates)?)?;
    let mut moments = StateMoments {
        m: model.m0.clone(),
        p: model.p0.clone(),
    };
    let mut intervals = Vec::new();
    let mut curves = Vec::new();

    for (idx, w) in model.boundaries.windows(2).enumerate() {
        let (start, end) = (w[0], w[1]);
        let (h, r) = propagate(&moments, &base)?;
        let at_risk: Vec<&Subject> = order.iter().copied().filter(|s| s.time > start).collect();

        for s in &at_risk {
            let pm = predictor_moments(&h, &r, &model.design(&s.covariates)?)?;
            let params = family.conjugate_from_moments(pm, &ctx)?;
            let survival = gaps
                .iter()
                .map(|&g| survivor_prediction(params.r, params.s, g, model.nu))
                .collect::<Result<Vec<_>>>()?;
            curves.push(SurvivorCurve {
                id: s.id.clone(),
                interval: idx + 1,
                r: params.r,
                s: params.s,
                gaps: gaps.to_vec(),
                survival,
            });
        }

        let (mut a, mut c) = (h.clone(), r.clone());
        let mut deaths = 0;
        for s in &at_risk {
            let died = s.event && s.time <= end;
            let exposure = s.time.min(end) - start;
            if !died && !model.censored_exposure {
                continue;
            }
            let design = model.design(&s.covariates)?;
            let pm = predictor_moments(&a, &c, &design)?;
            let prior = family.conjugate_from_moments(pm, &ctx)?;
            let post = if died {
                deaths += 1;
                family.posterior_params(prior, exposure, &ctx)?
            } else {
                ConjugateParams::new(prior.r + exposure.powf(model.nu), prior.s)
            };
            let star = family.posterior_predictor_moments(post, &ctx, model.approx)?;
            let next = bayes_linear_update(&a, &c, &design, pm, star)?;
            a = next.m;
            c = next.p;
        }
        intervals.push(IntervalFit {
            index: idx + 1,
            start,
            end,
            at_risk: at_risk.len(),
            deaths,
            prior_m: h.as_slice().to_vec(),
            prior_p: flat(&r),
            m: a.as_slice().to_vec(),
            p: flat(&c),
        });
        moments = StateMoments { m: a, p: c };
    }
    Ok(SurvivalFit { intervals, curves })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::engine::{run_filter, EngineConfig, Observation};
    use crate::quadrature::{integrate_above, QuadOptions};
    use rand::SeedableRng;
    use rand_chacha::ChaCha20Rng;

    #[test]
    fn boundary_and_substitution() {
        assert_eq!(survivor_prediction(2.0, 3.0, 0.0, 1.7).unwrap(), 1.0);
        let v = survivor_prediction(2.0, 3.0, 1.0, 1.0).unwrap();
        assert!((v - 4.0 / 9.0).abs() < 1e-15);
        assert_eq!(v, exponential_survivor(2.0, 3.0, 1.0).unwrap());
        assert!(survivor_prediction(2.0, 1.0, 1.0, 1.0).is_err());
    }

    #[test]
    fn matches_mixing_integral() {
        // S = ∫ exp(−gap^ν x) Gamma(x; s − 1, r) dx with x = 1/λ
        let (r, s, nu, gap) = (2.0f64, 3.0f64, 2.0f64, 1.0f64);
        let a = s - 1.0;
        let lg = crate::special::log_gamma(a).unwrap();
        let q = integrate_above(
            |x: f64| (-gap.powf(nu) * x + a * r.ln() + (a - 1.0) * x.ln() - r * x - lg).exp(),
            0.0,
            0.0,
            1.0,
            QuadOptions::default().with_abs_tol(1e-12),
        );
        let closed = survivor_prediction(r, s, gap, nu).unwrap();
        assert!((q.value - closed).abs() < 1e-8, "{} vs {closed}", q.value);
    }

    #[test]
    fn monotone_in_gap() {
        let mut prev = 1.0;
        for i in 1..50 {
            let v = survivor_prediction(1.5, 4.0, i as f64 * 0.3, 1.5).unwrap();
            assert!(v < prev);
            prev = v;
        }
        assert!(prev < 1e-3);
    }

    #[test]
    fn single_death_reduces_to_filter_step() {
        let model = SurvivalModel::new(vec![0.0, 2.0], 0, 1.5, 0.3).unwrap();
        let subjects = vec![Subject {
            id: "a".into(),
            time: 1.2,
            event: true,
            covariates: vec![],
        }];
        let fit = fit_survival(&model, &subjects, &[0.5]).unwrap();

        let ss = StateSpaceModel::new(
            DVector::from_element(1, -1.0),
            DMatrix::identity(1, 1),
            DMatrix::from_element(1, 1, 0.3),
            DVector::zeros(1),
            DMatrix::identity(1, 1),
        )
        .unwrap();
        let cfg = EngineConfig::state_space(Family::Weibull, ss);
        let run = run_filter(&[Observation::new(1.2, ObsContext::with_nu(1.5))], &cfg).unwrap();
        let rec = &run.records[0];
        assert_eq!(fit.intervals[0].m, rec.m);
        assert_eq!(fit.intervals[0].p, rec.p);
        assert_eq!((fit.curves[0].r, fit.curves[0].s), (rec.r, rec.s));
    }

    #[test]
    fn identical_covariates_identical_curves() {
        let model = SurvivalModel::new(vec![0.0, 1.0, 2.0], 1, 1.0, 0.1).unwrap();
        let subjects = vec![
            Subject {
                id: "a".into(),
                time: 1.5,
                event: false,
                covariates: vec![0.4],
            },
            Subject {
                id: "b".into(),
                time: 1.7,
                event: true,
                covariates: vec![0.4],
            },
            Subject {
                id: "c".into(),
                time: 0.3,
                event: true,
                covariates: vec![-1.0],
            },
        ];
        let fit = fit_survival(&model, &subjects, &[0.2, 0.6]).unwrap();
        for interval in 1..=2 {
            let a = fit
                .curves
                .iter()
                .find(|c| c.id == "a" && c.interval == interval)
                .unwrap();
            let b = fit
                .curves
                .iter()
                .find(|c| c.id == "b" && c.interval == interval)
                .unwrap();
            assert_eq!(a.survival, b.survival);
        }
        assert_eq!(fit.intervals[0].at_risk, 3);
        assert_eq!(fit.intervals[1].at_risk, 2);
        assert_eq!(fit.intervals[0].deaths, 1);
    }

    fn exponential_cohort(n: usize, seed: u64) -> Vec<Subject> {
        let mut rng = ChaCha20Rng::seed_from_u64(seed);
        (0..n)
            .map(|i| Subject {
                id: format!("{i:05}"),
                time: Family::Weibull
                    .sample_obs(1.0, &ObsContext::with_nu(1.0), &mut rng)
                    .unwrap(),
                event: true,
                covariates: vec![],
            })
            .collect()
    }

    #[test]
    fn constant_hazard_median() {
        let mut subjects = exponential_cohort(400, 21);
        subjects.push(Subject {
            id: "late".into(),
            time: 75.0,
            event: true,
            covariates: vec![],
        });
        let mut model = SurvivalModel::new(vec![0.0, 50.0, 100.0], 0, 1.0, 1e-4).unwrap();
        model.p0 = DMatrix::from_element(1, 1, 100.0);
        model.approx = ApproxMode::Matched;
        let fit = fit_survival(&model, &subjects, &[std::f64::consts::LN_2]).unwrap();
        assert_eq!(fit.intervals[0].deaths, 400);
        let curve = fit.curves.iter().find(|c| c.interval == 2).unwrap();
        assert_eq!(curve.id, "late");
        // sampling sd of the rate estimate is 1/sqrt(400)
        assert!(
            (curve.survival[0] - 0.5).abs() < 0.05,
            "{}",
            curve.survival[0]
        );
    }

    #[test]
    fn exposure_updates_recover_rate_over_many_intervals() {
        let subjects = exponential_cohort(2000, 5);
        let bounds: Vec<f64> = (0..=8).map(|i| i as f64 * 0.25).collect();
        let mut model = SurvivalModel::new(bounds, 0, 1.0, 1e-4).unwrap();
        model.censored_exposure = true;
        model.approx = ApproxMode::Matched;
        model.p0 = DMatrix::from_element(1, 1, 100.0);
        let fit = fit_survival(&model, &subjects, &[std::f64::consts::LN_2]).unwrap();
        let last = fit.curves.iter().rev().find(|c| c.interval == 8).unwrap();
        assert!(
            (last.survival[0] - 0.5).abs() < 0.05,
            "{}",
            last.survival[0]
        );
    }

    #[test]
    fn rejects_bad_input() {
        assert!(SurvivalModel::new(vec![0.0, 1.0, 1.0], 0, 1.0, 0.1).is_err());
        let model = SurvivalModel::new(vec![0.0, 1.0], 0, 1.0, 0.1).unwrap();
        assert!(fit_survival(&model, &[], &[]).is_err());
    }
}
