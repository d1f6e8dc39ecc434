//! Modeling toolkit for self-propagating malware epidemics.
//!
//! The library covers five compartmental models (SI, SIS, SIR, SEIR and the
//! dormancy-aware SIIDR), both as deterministic ODE systems and as
//! chain-binomial stochastic processes; contagion on arbitrary graphs via a
//! discrete-time probability-evolution system with its spectral stability
//! threshold; reconstruction of epidemic curves from network connection logs;
//! AIC-based model selection; and likelihood-free posterior inference of the
//! SIIDR transition rates (ABC rejection and ABC-SMC with a nearest-neighbor
//! perturbation kernel).
//!
//! The deterministic model math is generic over the scalar type through
//! [`float::Float`]; the aliases at the crate root fix it to `f64`, which is
//! what the rest of the toolkit (and the `spm-epi` CLI) uses.

pub mod abc;
pub mod error;
pub mod float;
pub mod graph;
pub mod models;
pub mod nlds;
pub mod quantile;
pub mod select;
pub mod stochastic;
pub mod trace;

pub use error::{Error, Result};
pub use models::Model;

/// Default scalar for the toolkit.
pub type Real = f64;

/// [`models::RateParams`] over [`Real`].
pub type RateParams = models::RateParams<Real>;
/// [`models::CompartmentState`] over [`Real`].
pub type CompartmentState = models::CompartmentState<Real>;
/// [`models::Trajectory`] over [`Real`].
pub type Trajectory = models::Trajectory<Real>;
/// [`models::LyapunovSeries`] over [`Real`].
pub type LyapunovSeries = models::LyapunovSeries<Real>;
/// [`models::Equilibria`] over [`Real`].
pub type Equilibria = models::Equilibria<Real>;
