//! Dynamic generalized linear models: conjugate filtering, power discounting,
//! multi-step forecasting and Bayes-factor monitoring for ten response
//! families, plus the quadrature and summation oracles used to check them.

pub mod diagnostics;
pub mod engine;
pub mod errata;
pub mod error;
pub mod families;
pub mod oracle;
pub mod quadrature;
pub mod simulate;
pub mod special;
pub mod state_space;
pub mod survival;

pub use error::{Error, Result};
pub use families::{ConjugateLaw, ConjugateParams, Family, ObsContext};
pub use special::ApproxMode;
pub use state_space::{Innovation, PredictorMoments, StateMoments, StateSpaceModel};
