//! Run configuration: a flat TOML file, overridden key by key by flags.

use std::path::{Path, PathBuf};

use dglm::diagnostics::PlugIn;
use dglm::engine::{ClampPolicy, EngineConfig};
use dglm::state_space::{
    build_linear_trend, build_random_walk, build_trend_harmonics, Innovation, StateSpaceModel,
};
use dglm::{ApproxMode, ConjugateParams, Family, ObsContext};
use nalgebra::{DMatrix, DVector};
use serde::Deserialize;

use crate::error::CliError;

/// Environment variable naming a default config file.
pub const CONFIG_ENV: &str = "DGLM_CONFIG";

#[derive(Debug, Clone, Default, PartialEq, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    pub family: Option<String>,
    /// `state-space` or `discount`.
    pub mode: Option<String>,
    pub delta: Option<f64>,

    /// `random-walk`, `linear-trend`, `trend-harmonics` or `custom`.
    pub model: Option<String>,
    pub cycle: Option<usize>,
    /// Scalar innovation variance (random walk, trend block of harmonics).
    pub omega: Option<f64>,
    pub omega_seasonal: Option<f64>,
    /// `fixed` or `discount`; defaults to `discount` when a delta is set and
    /// no omega is.
    pub innovation: Option<String>,
    pub f: Option<Vec<f64>>,
    pub g: Option<Vec<Vec<f64>>>,
    pub omega_matrix: Option<Vec<Vec<f64>>>,
    pub m0: Option<Vec<f64>>,
    pub p0: Option<Vec<Vec<f64>>>,
    pub p0_scale: Option<f64>,

    pub r0: Option<f64>,
    pub s0: Option<f64>,

    pub n: Option<u32>,
    pub v: Option<f64>,
    pub alpha: Option<f64>,
    pub nu: Option<f64>,
    pub lambda: Option<f64>,

    pub horizon: Option<usize>,
    /// `exact`, `paper` or `matched`.
    pub approx: Option<String>,
    /// `error` or `log`.
    pub clamp: Option<String>,
    pub seed: Option<u64>,
    pub input: Option<PathBuf>,
    pub output: Option<PathBuf>,

    /// Transition variance used by the plug-in likelihood.
    pub likelihood_omega: Option<f64>,
    /// `mean` or `harmonic`.
    pub plug_in: Option<String>,
    /// Bayes-factor window for `compare`.
    pub window: Option<usize>,

    // simulation
    pub length: Option<usize>,
    pub eta0: Option<f64>,
    pub lambda0: Option<f64>,

    // survival
    pub boundaries: Option<Vec<f64>>,
    pub gaps: Option<Vec<f64>>,
    pub censored_exposure: Option<bool>,
}

macro_rules! overlay {
    ($dst:ident, $src:ident; $($field:ident),* $(,)?) => {
        $( if $src.$field.is_some() { $dst.$field = $src.$field.clone(); } )*
    };
}

impl RunConfig {
    pub fn from_toml(text: &str) -> Result<Self, CliError> {
        toml::from_str(text).map_err(|e| CliError::Config(format!("config: {e}")))
    }

    pub fn load(path: &Path) -> Result<Self, CliError> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| CliError::Config(format!("cannot read {}: {e}", path.display())))?;
        Self::from_toml(&text)
    }

    /// Loads `explicit`, else the file named by `DGLM_CONFIG`, else defaults.
    pub fn resolve(explicit: Option<&Path>) -> Result<Self, CliError> {
        match explicit {
            Some(p) => Self::load(p),
            None => match std::env::var_os(CONFIG_ENV) {
                Some(p) if !p.is_empty() => Self::load(Path::new(&p)),
                _ => Ok(Self::default()),
            },
        }
    }

    /// Keys set in `other` replace ours.
    pub fn overlay(&mut self, other: &RunConfig) {
        overlay!(self, other;
            family, mode, delta, model, cycle, omega, omega_seasonal, innovation, f, g,
            omega_matrix, m0, p0, p0_scale, r0, s0, n, v, alpha, nu, lambda, horizon,
            approx, clamp, seed, input, output, likelihood_omega, plug_in, window, length,
            eta0, lambda0, boundaries, gaps, censored_exposure,
        );
    }

    pub fn family(&self) -> Result<Family, CliError> {
        let name = self
            .family
            .as_deref()
            .ok_or_else(|| CliError::Config("no family given (--family or `family`)".into()))?;
        name.parse::<Family>().map_err(CliError::from)
    }

    pub fn context(&self) -> ObsContext {
        ObsContext {
            n: self.n,
            v: self.v,
            alpha: self.alpha,
            nu: self.nu,
            lambda: self.lambda,
        }
    }

    pub fn approx(&self) -> Result<ApproxMode, CliError> {
        match self.approx.as_deref().unwrap_or("exact") {
            "exact" => Ok(ApproxMode::Exact),
            "paper" => Ok(ApproxMode::PaperApprox),
            "matched" => Ok(ApproxMode::Matched),
            other => Err(CliError::Config(format!(
                "approx must be exact, paper or matched, not `{other}`"
            ))),
        }
    }

    pub fn clamp(&self) -> Result<ClampPolicy, CliError> {
        match self.clamp.as_deref().unwrap_or("error") {
            "error" => Ok(ClampPolicy::Error),
            "log" => Ok(ClampPolicy::ClampAndLog),
            other => Err(CliError::Config(format!(
                "clamp must be error or log, not `{other}`"
            ))),
        }
    }

    pub fn plug_in(&self) -> Result<PlugIn, CliError> {
        match self.plug_in.as_deref().unwrap_or("mean") {
            "mean" => Ok(PlugIn::Mean),
            "harmonic" => Ok(PlugIn::Harmonic),
            other => Err(CliError::Config(format!(
                "plug_in must be mean or harmonic, not `{other}`"
            ))),
        }
    }

    pub fn is_discount(&self) -> Result<bool, CliError> {
        match self.mode.as_deref().unwrap_or("discount") {
            "discount" => Ok(true),
            "state-space" => Ok(false),
            other => Err(CliError::Config(format!(
                "mode must be state-space or discount, not `{other}`"
            ))),
        }
    }

    fn matrix(rows: &[Vec<f64>], what: &str) -> Result<DMatrix<f64>, CliError> {
        let n = rows.len();
        if n == 0 || rows.iter().any(|r| r.len() != rows[0].len()) {
            return Err(CliError::Config(format!(
                "{what} must be a non-empty rectangular matrix"
            )));
        }
        let flat: Vec<f64> = rows.iter().flatten().copied().collect();
        Ok(DMatrix::from_row_slice(n, rows[0].len(), &flat))
    }

    pub fn state_model(&self) -> Result<StateSpaceModel, CliError> {
        let mut model = match self.model.as_deref().unwrap_or("random-walk") {
            "random-walk" => build_random_walk(),
            "linear-trend" => build_linear_trend(),
            "trend-harmonics" => build_trend_harmonics(
                self.cycle.unwrap_or(12),
                self.omega.unwrap_or(0.0),
                self.omega_seasonal.unwrap_or(0.0),
            )?,
            "custom" => {
                let f = self
                    .f
                    .clone()
                    .ok_or_else(|| CliError::Config("custom model needs `f`".into()))?;
                let d = f.len();
                let g = match &self.g {
                    Some(g) => Self::matrix(g, "g")?,
                    None => DMatrix::identity(d, d),
                };
                StateSpaceModel {
                    f: DVector::from_vec(f),
                    g,
                    innovation: Innovation::Fixed(DMatrix::identity(d, d)),
                    m0: DVector::zeros(d),
                    p0: DMatrix::identity(d, d),
                }
            }
            other => {
                return Err(CliError::Config(format!(
                    "unknown model `{other}` (random-walk, linear-trend, trend-harmonics, custom)"
                )))
            }
        };
        let d = model.dim();
        if let Some(om) = &self.omega_matrix {
            model.innovation = Innovation::Fixed(Self::matrix(om, "omega_matrix")?);
        } else if let (Some(w), false) =
            (self.omega, self.model.as_deref() == Some("trend-harmonics"))
        {
            model.innovation = Innovation::Fixed(DMatrix::identity(d, d) * w);
        }
        let use_discount = match self.innovation.as_deref() {
            Some("discount") => true,
            Some("fixed") => false,
            Some(other) => {
                return Err(CliError::Config(format!(
                    "innovation must be fixed or discount, not `{other}`"
                )))
            }
            None => self.delta.is_some() && self.omega.is_none() && self.omega_matrix.is_none(),
        };
        if use_discount {
            let delta = self
                .delta
                .ok_or_else(|| CliError::Config("discount innovation needs delta".into()))?;
            model.innovation = Innovation::Discount(delta);
        }
        if let Some(m0) = &self.m0 {
            model.m0 = DVector::from_vec(m0.clone());
        }
        if let Some(p0) = &self.p0 {
            model.p0 = Self::matrix(p0, "p0")?;
        } else if let Some(k) = self.p0_scale {
            model.p0 = DMatrix::identity(d, d) * k;
        }
        model.validate()?;
        Ok(model)
    }

    pub fn engine(&self) -> Result<EngineConfig, CliError> {
        let family = self.family()?;
        let cfg = if self.is_discount()? {
            let delta = self
                .delta
                .ok_or_else(|| CliError::Config("discount mode needs --delta".into()))?;
            let initial = ConjugateParams::new(self.r0.unwrap_or(1.0), self.s0.unwrap_or(1.0));
            EngineConfig::power_discount(family, delta, initial)
        } else {
            EngineConfig::state_space(family, self.state_model()?)
        };
        let cfg = cfg.with_approx(self.approx()?).with_clamp(self.clamp()?);
        cfg.validate()?;
        Ok(cfg)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn unknown_keys_are_rejected() {
        assert!(RunConfig::from_toml("famly = \"poisson\"").is_err());
    }

    #[test]
    fn overlay_prefers_the_flag() {
        let mut base = RunConfig::from_toml("family = \"poisson\"\ndelta = 0.9").unwrap();
        let flags = RunConfig {
            delta: Some(0.5),
            ..Default::default()
        };
        base.overlay(&flags);
        assert_eq!(base.delta, Some(0.5));
        assert_eq!(base.family.as_deref(), Some("poisson"));
    }

    #[test]
    fn state_space_with_delta_uses_discount_innovation() {
        let c = RunConfig::from_toml(
            "family = \"weibull\"\nmode = \"state-space\"\ndelta = 0.9\np0_scale = 1000.0",
        )
        .unwrap();
        let model = c.state_model().unwrap();
        assert_eq!(model.innovation, Innovation::Discount(0.9));
        assert_eq!(model.p0[(0, 0)], 1000.0);
    }

    #[test]
    fn bad_delta_is_a_config_error() {
        let c = RunConfig::from_toml("family = \"poisson\"\ndelta = 1.2").unwrap();
        assert!(matches!(c.engine(), Err(CliError::Config(_))));
    }
}
