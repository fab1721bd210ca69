//! Biased random walks on the integers with random, site-dependent trapping.
//!
//! The crate generates the waiting-time environments (i.i.d. Pareto, comb
//! with geometric traps, ladder with Markov trap lengths), simulates the
//! reduced time-changed walk as well as the explicit trap graphs, and
//! compares the empirical speed with the closed form `tanh(λ) / E[w₀]`.

pub mod environment;
pub mod error;
pub mod estimators;
pub mod experiment;
pub mod holding_times;
pub mod rng_streams;
pub mod site_table;
pub mod trap_formulas;
pub mod walk_engine;

pub use error::{Error, Result};
