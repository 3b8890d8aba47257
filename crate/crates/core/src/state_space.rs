//! Linear state evolution: prior propagation, predictor moments, the
//! Bayes-linear update and k-step predictor moments.

use nalgebra::{DMatrix, DVector, SymmetricEigen};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Eigenvalue floor used when checking covariance matrices.
pub const PSD_TOLERANCE: f64 = 1e-10;

/// How the innovation covariance of the evolution is specified.
#[derive(Debug, Clone, PartialEq)]
pub enum Innovation {
    /// A fixed covariance matrix `Ω`.
    Fixed(DMatrix<f64>),
    /// `Ω_t = (1 − δ)/δ · P_{t−1}`.
    Discount(f64),
}

#[derive(Debug, Clone, PartialEq)]
pub struct StateSpaceModel {
    pub f: DVector<f64>,
    pub g: DMatrix<f64>,
    pub innovation: Innovation,
    pub m0: DVector<f64>,
    pub p0: DMatrix<f64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct StateMoments {
    pub m: DVector<f64>,
    pub p: DMatrix<f64>,
}

/// Mean and variance of the linear predictor.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PredictorMoments {
    pub f: f64,
    pub q: f64,
}

impl PredictorMoments {
    pub fn new(f: f64, q: f64) -> Self {
        PredictorMoments { f, q }
    }
}

fn dim_err(what: &str, expected: usize, got: usize) -> Error {
    Error::Structural(format!("{what}: expected dimension {expected}, got {got}"))
}

fn check_square(name: &str, m: &DMatrix<f64>, d: usize) -> Result<()> {
    if m.nrows() != d || m.ncols() != d {
        return Err(Error::Structural(format!(
            "{name} is {}x{}, expected {d}x{d}",
            m.nrows(),
            m.ncols()
        )));
    }
    Ok(())
}

/// Smallest eigenvalue of the symmetric part of `m`.
pub fn min_eigenvalue(m: &DMatrix<f64>) -> f64 {
    if m.nrows() == 1 {
        return m[(0, 0)];
    }
    let sym = symmetrize(m);
    SymmetricEigen::new(sym)
        .eigenvalues
        .iter()
        .cloned()
        .fold(f64::INFINITY, f64::min)
}

pub fn is_psd(m: &DMatrix<f64>) -> bool {
    m.iter().all(|v| v.is_finite()) && min_eigenvalue(m) >= -PSD_TOLERANCE
}

pub(crate) fn symmetrize(m: &DMatrix<f64>) -> DMatrix<f64> {
    (m + m.transpose()) * 0.5
}

/// Symmetrizes `m` and clamps eigenvalues below the tolerance floor to zero.
/// Returns true when clamping was needed.
pub(crate) fn enforce_psd(m: &mut DMatrix<f64>) -> bool {
    let sym = symmetrize(m);
    *m = sym;
    if m.nrows() == 1 {
        if m[(0, 0)] < -PSD_TOLERANCE {
            m[(0, 0)] = 0.0;
            return true;
        }
        return false;
    }
    let eig = SymmetricEigen::new(m.clone());
    if eig.eigenvalues.iter().all(|&v| v >= -PSD_TOLERANCE) {
        return false;
    }
    let clamped = eig.eigenvalues.map(|v| v.max(0.0));
    *m = &eig.eigenvectors * DMatrix::from_diagonal(&clamped) * eig.eigenvectors.transpose();
    true
}

impl StateSpaceModel {
    /// Builds a model with a fixed innovation covariance and validates it.
    pub fn new(
        f: DVector<f64>,
        g: DMatrix<f64>,
        omega: DMatrix<f64>,
        m0: DVector<f64>,
        p0: DMatrix<f64>,
    ) -> Result<Self> {
        let model = StateSpaceModel {
            f,
            g,
            innovation: Innovation::Fixed(omega),
            m0,
            p0,
        };
        model.validate()?;
        Ok(model)
    }

    pub fn dim(&self) -> usize {
        self.f.len()
    }

    pub fn with_prior(mut self, m0: DVector<f64>, p0: DMatrix<f64>) -> Result<Self> {
        self.m0 = m0;
        self.p0 = p0;
        self.validate()?;
        Ok(self)
    }

    pub fn with_innovation(mut self, innovation: Innovation) -> Result<Self> {
        self.innovation = innovation;
        self.validate()?;
        Ok(self)
    }

    pub fn validate(&self) -> Result<()> {
        let d = self.f.len();
        if d == 0 {
            return Err(Error::Structural("design vector F is empty".into()));
        }
        check_square("G", &self.g, d)?;
        check_square("P0", &self.p0, d)?;
        if self.m0.len() != d {
            return Err(dim_err("m0", d, self.m0.len()));
        }
        match &self.innovation {
            Innovation::Fixed(omega) => {
                check_square("Omega", omega, d)?;
                if !is_psd(omega) {
                    return Err(Error::Structural(
                        "Omega is not symmetric positive semidefinite".into(),
                    ));
                }
            }
            Innovation::Discount(delta) => check_delta(*delta)?,
        }
        if !is_psd(&self.p0) {
            return Err(Error::Structural(
                "P0 is not symmetric positive semidefinite".into(),
            ));
        }
        Ok(())
    }

    pub fn initial_moments(&self) -> StateMoments {
        StateMoments {
            m: self.m0.clone(),
            p: self.p0.clone(),
        }
    }

    /// Innovation covariance to add after evolving from `prev`.
    pub fn omega_for(&self, prev: &DMatrix<f64>) -> Result<DMatrix<f64>> {
        match &self.innovation {
            Innovation::Fixed(omega) => Ok(omega.clone()),
            Innovation::Discount(delta) => discount_innovation(prev, *delta),
        }
    }
}

pub(crate) fn check_delta(delta: f64) -> Result<()> {
    if delta.is_finite() && delta > 0.0 && delta <= 1.0 {
        Ok(())
    } else {
        Err(Error::domain("discount factor", delta, "0 < delta <= 1"))
    }
}

/// `h = G m`, `R = G P G' + Ω`.
pub fn propagate(
    prev: &StateMoments,
    model: &StateSpaceModel,
) -> Result<(DVector<f64>, DMatrix<f64>)> {
    let d = model.dim();
    if prev.m.len() != d {
        return Err(dim_err("state mean", d, prev.m.len()));
    }
    check_square("state covariance", &prev.p, d)?;
    let h = &model.g * &prev.m;
    let mut r = &model.g * &prev.p * model.g.transpose() + model.omega_for(&prev.p)?;
    enforce_psd(&mut r);
    Ok((h, r))
}

/// `f = F'h`, `q = F'RF`.
pub fn predictor_moments(
    h: &DVector<f64>,
    r: &DMatrix<f64>,
    f: &DVector<f64>,
) -> Result<PredictorMoments> {
    let d = f.len();
    if h.len() != d {
        return Err(dim_err("h", d, h.len()));
    }
    check_square("R", r, d)?;
    let mean = f.dot(h);
    let q = (r * f).dot(f);
    if !(q > 0.0) || !q.is_finite() {
        return Err(Error::DegeneratePredictor { q });
    }
    Ok(PredictorMoments { f: mean, q })
}

/// Moves `(h, R)` to `(m, P)` given the change in predictor moments from
/// `prior` to `posterior`.
pub fn bayes_linear_update(
    h: &DVector<f64>,
    r: &DMatrix<f64>,
    f: &DVector<f64>,
    prior: PredictorMoments,
    posterior: PredictorMoments,
) -> Result<StateMoments> {
    if !(prior.q > 0.0) {
        return Err(Error::DegeneratePredictor { q: prior.q });
    }
    let rf = r * f;
    let m = h + &rf * ((posterior.f - prior.f) / prior.q);
    let shrink = (1.0 - posterior.q / prior.q) / prior.q;
    let mut p = r - &rf * rf.transpose() * shrink;
    enforce_psd(&mut p);
    Ok(StateMoments { m, p })
}

/// Predictor moments `ℓ` steps ahead of `current`.
pub fn k_step_predictor(
    current: &StateMoments,
    model: &StateSpaceModel,
    ell: usize,
) -> Result<PredictorMoments> {
    if ell == 0 {
        return Err(Error::domain("k_step_predictor", 0.0, "ell >= 1"));
    }
    let omega = model.omega_for(&current.p)?;
    let mut gl = DMatrix::<f64>::identity(model.dim(), model.dim());
    let mut innov = DMatrix::<f64>::zeros(model.dim(), model.dim());
    for _ in 0..ell {
        innov += &gl * &omega * gl.transpose();
        gl = &model.g * gl;
    }
    let h = &gl * &current.m;
    let mut r = &gl * &current.p * gl.transpose() + innov;
    enforce_psd(&mut r);
    predictor_moments(&h, &r, &model.f)
}

/// `(1 − δ)/δ · P`.
pub fn discount_innovation(p_prev: &DMatrix<f64>, delta: f64) -> Result<DMatrix<f64>> {
    check_delta(delta)?;
    Ok(p_prev * ((1.0 - delta) / delta))
}

/// Scalar random walk `θ_t = θ_{t−1} + ω_t` with `Ω = 1`, `m0 = 0`, `P0 = 1`.
pub fn build_random_walk() -> StateSpaceModel {
    StateSpaceModel {
        f: DVector::from_element(1, 1.0),
        g: DMatrix::identity(1, 1),
        innovation: Innovation::Fixed(DMatrix::identity(1, 1)),
        m0: DVector::zeros(1),
        p0: DMatrix::identity(1, 1),
    }
}

/// Level plus slope: `F = [1, 0]'`, `G = [[1, 1], [0, 1]]`.
pub fn build_linear_trend() -> StateSpaceModel {
    StateSpaceModel {
        f: DVector::from_vec(vec![1.0, 0.0]),
        g: DMatrix::from_row_slice(2, 2, &[1.0, 1.0, 0.0, 1.0]),
        innovation: Innovation::Fixed(DMatrix::identity(2, 2)),
        m0: DVector::zeros(2),
        p0: DMatrix::identity(2, 2),
    }
}

/// Linear trend plus a full harmonic seasonal block of period `cycle`.
///
/// The seasonal block holds one rotation per harmonic `j < cycle/2` and the
/// Nyquist entry `−1`. `Ω = blockdiag(omega_trend · I₂, omega_seas · I)`.
pub fn build_trend_harmonics(
    cycle: usize,
    omega_trend: f64,
    omega_seas: f64,
) -> Result<StateSpaceModel> {
    if cycle < 2 || cycle % 2 != 0 {
        return Err(Error::Unsupported {
            family: "state space",
            operation: "harmonic blocks with an odd cycle length",
        });
    }
    if !(omega_trend >= 0.0 && omega_seas >= 0.0) {
        return Err(Error::Structural(
            "harmonic innovation variances must be non-negative".into(),
        ));
    }
    let half = cycle / 2;
    let d = 2 + 2 * (half - 1) + 1;
    let mut f = DVector::zeros(d);
    let mut g = DMatrix::zeros(d, d);
    let mut omega = DMatrix::zeros(d, d);
    f[0] = 1.0;
    g[(0, 0)] = 1.0;
    g[(0, 1)] = 1.0;
    g[(1, 1)] = 1.0;
    omega[(0, 0)] = omega_trend;
    omega[(1, 1)] = omega_trend;
    let mut at = 2;
    for j in 1..half {
        let w = 2.0 * std::f64::consts::PI * j as f64 / cycle as f64;
        let (s, c) = w.sin_cos();
        f[at] = 1.0;
        g[(at, at)] = c;
        g[(at, at + 1)] = s;
        g[(at + 1, at)] = -s;
        g[(at + 1, at + 1)] = c;
        at += 2;
    }
    f[at] = 1.0;
    g[(at, at)] = -1.0;
    for i in 2..d {
        omega[(i, i)] = omega_seas;
    }
    // exact zeros for the quarter-turn rotation instead of 6e-17
    g.iter_mut().for_each(|v| {
        if v.abs() < 1e-15 {
            *v = 0.0
        }
    });
    Ok(StateSpaceModel {
        f,
        g,
        innovation: Innovation::Fixed(omega),
        m0: DVector::zeros(d),
        p0: DMatrix::identity(d, d),
    })
}
