//! Ruin probabilities of an insurance reserve with two-sided compound Poisson
//! business activity, invested in an asset following geometric Brownian motion.
//!
//! Three independent routes to the ruin probability are provided and meant to
//! be checked against each other:
//!
//! * [`mc`]: Monte Carlo over the embedded jump chain ([`path_sim`]);
//! * [`solver`]: the integro-differential equation for exponential jumps,
//!   solved as a linear boundary value problem;
//! * [`asymptotics`]: the characteristic roots of the third-order ODE for the
//!   density of the survival probability and power-law tail fitting, with
//!   [`fundamental`] solutions of that ODE.

pub mod asymptotics;
pub mod error;
pub mod fundamental;
pub mod io;
pub mod mc;
pub mod model;
pub mod numerics;
pub mod path_sim;
pub mod rng;
pub mod solver;

pub use error::{Result, RuinError};
pub use model::{DerivedParams, Interarrival, IssueCode, ModelParams, ValidationReport};
