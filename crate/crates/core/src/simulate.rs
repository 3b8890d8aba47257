//! Synthetic series: the negative-binomial and Weibull study recipes and a
//! generic generator for any family.
//!
//! All draws come from `ChaCha20Rng::seed_from_u64(seed)` (rand_chacha 0.9).
//! Normal variates use Box–Muller on 53-bit open uniforms, so a seed gives
//! the same series on every platform.

use nalgebra::{DMatrix, DVector, SymmetricEigen};
use rand::{RngCore, SeedableRng};
use rand_chacha::ChaCha20Rng;
use serde::{Deserialize, Serialize};

use crate::engine::Observation;
use crate::error::{Error, Result};
use crate::families::{open_uniform, standard_normal, Family, ObsContext};
use crate::state_space::{Innovation, StateSpaceModel};

/// A generated series: the state parameter path and the observations.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SimSeries {
    pub family: Family,
    pub states: Vec<f64>,
    pub observations: Vec<Observation>,
}

impl SimSeries {
    pub fn values(&self) -> Vec<f64> {
        self.observations.iter().filter_map(|o| o.y).collect()
    }

    /// Delimited text with header `t,y` (plus `n` for the binomial and
    /// negative-binomial families); `t` runs from 1.
    pub fn to_dsv(&self) -> String {
        let with_n = matches!(self.family, Family::Binomial | Family::NegativeBinomial);
        let mut out = String::from(if with_n { "t,y,n\n" } else { "t,y\n" });
        for (i, obs) in self.observations.iter().enumerate() {
            let y = obs.y.map(|v| v.to_string()).unwrap_or_default();
            if with_n {
                let n = obs.ctx.n.map(|v| v.to_string()).unwrap_or_default();
                out.push_str(&format!("{},{},{}\n", i + 1, y, n));
            } else {
                out.push_str(&format!("{},{}\n", i + 1, y));
            }
        }
        out
    }
}

fn rng_for(seed: u64) -> ChaCha20Rng {
    ChaCha20Rng::seed_from_u64(seed)
}

fn check_len(t_len: usize) -> Result<()> {
    if t_len == 0 {
        Err(Error::Config("series length must be at least 1".into()))
    } else {
        Ok(())
    }
}

fn check_omega(omega: f64) -> Result<()> {
    if omega.is_finite() && omega >= 0.0 {
        Ok(())
    } else {
        Err(Error::Config(format!(
            "innovation variance {omega} must be >= 0"
        )))
    }
}

/// `π_0 ~ Beta(2, 1)`, `π_t = π_{t−1}/(π_{t−1} + e^{ω_t} − π_{t−1} e^{ω_t})`
/// with `ω_t ~ N(0, Ω)`, and `y_t ~ NB(n, π_t)` counting failures.
pub fn simulate_negative_binomial(
    t_len: usize,
    n: u32,
    omega: f64,
    seed: u64,
) -> Result<SimSeries> {
    check_len(t_len)?;
    check_omega(omega)?;
    if n == 0 {
        return Err(Error::Config("n must be at least 1".into()));
    }
    let mut rng = rng_for(seed);
    let ctx = ObsContext::with_n(n);
    // Beta(2, 1) has distribution function x², so sqrt(U) is exact
    let mut pi = open_uniform(&mut rng).sqrt();
    let mut states = Vec::with_capacity(t_len);
    let mut observations = Vec::with_capacity(t_len);
    for _ in 0..t_len {
        let e = (omega.sqrt() * standard_normal(&mut rng)).exp();
        pi = pi / (pi + e - pi * e);
        let y = Family::NegativeBinomial.sample_obs(pi, &ctx, &mut rng)?;
        states.push(pi);
        observations.push(Observation::new(y, ctx));
    }
    Ok(SimSeries {
        family: Family::NegativeBinomial,
        states,
        observations,
    })
}

/// `λ_t = e^{ω_t} λ_{t−1}` with `ω_t ~ N(0, Ω)`, and `y_t = (−λ_t log U)^{1/ν}`.
pub fn simulate_weibull(
    t_len: usize,
    nu: f64,
    lambda0: f64,
    omega: f64,
    seed: u64,
) -> Result<SimSeries> {
    check_len(t_len)?;
    check_omega(omega)?;
    if !(nu > 0.0 && lambda0 > 0.0) {
        return Err(Error::Config("nu and lambda0 must be positive".into()));
    }
    let mut rng = rng_for(seed);
    let ctx = ObsContext::with_nu(nu);
    let mut lambda = lambda0;
    let mut states = Vec::with_capacity(t_len);
    let mut observations = Vec::with_capacity(t_len);
    for _ in 0..t_len {
        lambda *= (omega.sqrt() * standard_normal(&mut rng)).exp();
        let y = Family::Weibull.sample_obs(lambda, &ctx, &mut rng)?;
        states.push(lambda);
        observations.push(Observation::new(y, ctx));
    }
    Ok(SimSeries {
        family: Family::Weibull,
        states,
        observations,
    })
}

/// How the linear predictor evolves.
#[derive(Debug, Clone, PartialEq)]
pub enum Evolution {
    /// `η_t = η_{t−1} + ω_t`, `ω_t ~ N(0, Ω)`, from `η_0 = eta0`.
    RandomWalk { eta0: f64, omega: f64 },
    /// `θ_t = G θ_{t−1} + ω_t`, `η_t = F'θ_t`, from `θ_0 = m0`. Needs a
    /// fixed innovation covariance.
    Linear(StateSpaceModel),
}

#[derive(Debug, Clone, PartialEq)]
pub struct SimSpec {
    pub family: Family,
    pub length: usize,
    pub evolution: Evolution,
    pub ctx: ObsContext,
    pub seed: u64,
}

/// Symmetric square root of a positive semidefinite matrix.
fn psd_sqrt(m: &DMatrix<f64>) -> DMatrix<f64> {
    let eig = SymmetricEigen::new(m.clone());
    let root = eig.eigenvalues.map(|v| v.max(0.0).sqrt());
    &eig.eigenvectors * DMatrix::from_diagonal(&root) * eig.eigenvectors.transpose()
}

fn normal_vector(d: usize, rng: &mut dyn RngCore) -> DVector<f64> {
    DVector::from_iterator(d, (0..d).map(|_| standard_normal(rng)))
}

/// State path through the evolution, observations through the family
/// sampler.
pub fn simulate_generic(spec: &SimSpec) -> Result<SimSeries> {
    check_len(spec.length)?;
    let family = spec.family;
    let mut rng = rng_for(spec.seed);
    let mut etas = Vec::with_capacity(spec.length);
    let mut states = Vec::with_capacity(spec.length);
    let mut observations = Vec::with_capacity(spec.length);

    let mut step_eta: Box<dyn FnMut(&mut ChaCha20Rng) -> f64> = match &spec.evolution {
        Evolution::RandomWalk { eta0, omega } => {
            check_omega(*omega)?;
            let sd = omega.sqrt();
            let mut eta = *eta0;
            Box::new(move |rng| {
                eta += sd * standard_normal(rng);
                eta
            })
        }
        Evolution::Linear(model) => {
            model.validate()?;
            let Innovation::Fixed(omega) = &model.innovation else {
                return Err(Error::Unsupported {
                    family: family.name(),
                    operation: "simulation under a discount innovation",
                });
            };
            let root = psd_sqrt(omega);
            let mut theta = model.m0.clone();
            let (g, f) = (model.g.clone(), model.f.clone());
            let d = model.dim();
            Box::new(move |rng| {
                theta = &g * &theta + &root * normal_vector(d, rng);
                f.dot(&theta)
            })
        }
    };
    for _ in 0..spec.length {
        let eta = step_eta(&mut rng);
        let state = family.inverse_link(eta);
        let y = family.sample_obs(state, &spec.ctx, &mut rng)?;
        family.check_obs(y, &spec.ctx)?;
        etas.push(eta);
        states.push(state);
        observations.push(Observation::new(y, spec.ctx));
    }
    Ok(SimSeries {
        family,
        states,
        observations,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::state_space::build_trend_harmonics;

    #[test]
    fn frozen_negative_binomial_probability() {
        let s = simulate_negative_binomial(50, 10, 0.0, 3).unwrap();
        assert!(s.states.iter().all(|&p| p == s.states[0]));
    }

    #[test]
    fn reruns_are_identical() {
        assert_eq!(
            simulate_negative_binomial(100, 10, 1.0, 11).unwrap(),
            simulate_negative_binomial(100, 10, 1.0, 11).unwrap()
        );
        let a = simulate_weibull(500, 3.0, 1.0, 1.0, 7).unwrap();
        assert_eq!(
            a.to_dsv(),
            simulate_weibull(500, 3.0, 1.0, 1.0, 7).unwrap().to_dsv()
        );
        assert_ne!(a, simulate_weibull(500, 3.0, 1.0, 1.0, 8).unwrap());
    }

    #[test]
    fn negative_binomial_mean_at_half() {
        let mut rng = rng_for(5);
        let ctx = ObsContext::with_n(10);
        let n = 100_000;
        let mean = (0..n)
            .map(|_| {
                Family::NegativeBinomial
                    .sample_obs(0.5, &ctx, &mut rng)
                    .unwrap()
            })
            .sum::<f64>()
            / n as f64;
        assert!((mean - 10.0).abs() < 0.1, "{mean}");
    }

    #[test]
    fn frozen_exponential_mean() {
        let s = simulate_weibull(100_000, 1.0, 1.0, 0.0, 1).unwrap();
        let ys = s.values();
        let mean = ys.iter().sum::<f64>() / ys.len() as f64;
        assert!((mean - 1.0).abs() < 0.02, "{mean}");
    }

    #[test]
    fn frozen_weibull_cube_mean() {
        let s = simulate_weibull(100_000, 3.0, 1.0, 0.0, 2).unwrap();
        let ys = s.values();
        let mean = ys.iter().map(|y| y.powi(3)).sum::<f64>() / ys.len() as f64;
        assert!((mean - 1.0).abs() < 0.02, "{mean}");
    }

    #[test]
    fn frozen_generic_normal_and_poisson() {
        let spec = SimSpec {
            family: Family::Normal,
            length: 20_000,
            evolution: Evolution::RandomWalk {
                eta0: 2.0,
                omega: 0.0,
            },
            ctx: ObsContext::with_v(1.0),
            seed: 4,
        };
        let s = simulate_generic(&spec).unwrap();
        let ys = s.values();
        let n = ys.len() as f64;
        let mean = ys.iter().sum::<f64>() / n;
        let var = ys.iter().map(|y| (y - mean).powi(2)).sum::<f64>() / (n - 1.0);
        assert!((mean - 2.0).abs() < 3.0 / n.sqrt());
        assert!((var - 1.0).abs() < 3.0 * (2.0 / n).sqrt());

        let spec = SimSpec {
            family: Family::Poisson,
            evolution: Evolution::RandomWalk {
                eta0: 1.5f64.ln(),
                omega: 0.0,
            },
            ctx: ObsContext::default(),
            ..spec
        };
        let s = simulate_generic(&spec).unwrap();
        assert!(s.states.iter().all(|&l| (l - 1.5).abs() < 1e-12));
        let ys = s.values();
        assert!(ys.iter().all(|y| y.fract() == 0.0 && *y >= 0.0));
        let mean = ys.iter().sum::<f64>() / n;
        assert!((mean - 1.5).abs() < 3.0 * (1.5 / n).sqrt());
    }

    #[test]
    fn seasonal_binomial_has_period_four() {
        let mut model = build_trend_harmonics(4, 0.0, 1e-6).unwrap();
        model.m0 = DVector::from_vec(vec![0.0, 0.0, 1.2, 0.0, 0.0]);
        let spec = SimSpec {
            family: Family::Binomial,
            length: 400,
            evolution: Evolution::Linear(model),
            ctx: ObsContext::with_n(50),
            seed: 9,
        };
        let ys = simulate_generic(&spec).unwrap().values();
        let mean = ys.iter().sum::<f64>() / ys.len() as f64;
        let acf = |lag: usize| {
            let c: f64 = (lag..ys.len())
                .map(|i| (ys[i] - mean) * (ys[i - lag] - mean))
                .sum();
            let v: f64 = ys.iter().map(|y| (y - mean).powi(2)).sum();
            c / v
        };
        assert!(acf(4) > 0.5, "lag-4 acf {}", acf(4));
        assert!(acf(2) < -0.5, "lag-2 acf {}", acf(2));
    }

    #[test]
    fn discount_innovation_cannot_be_simulated() {
        let model = crate::state_space::build_random_walk()
            .with_innovation(Innovation::Discount(0.9))
            .unwrap();
        let spec = SimSpec {
            family: Family::Poisson,
            length: 3,
            evolution: Evolution::Linear(model),
            ctx: ObsContext::default(),
            seed: 0,
        };
        assert!(matches!(
            simulate_generic(&spec),
            Err(Error::Unsupported { .. })
        ));
    }

    #[test]
    fn dsv_layout() {
        let s = simulate_negative_binomial(2, 10, 1.0, 1).unwrap();
        let text = s.to_dsv();
        let mut lines = text.lines();
        assert_eq!(lines.next(), Some("t,y,n"));
        assert!(lines.next().unwrap().starts_with("1,"));
    }
}
