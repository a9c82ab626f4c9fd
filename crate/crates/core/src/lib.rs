//! Optimal AdaBoost over midpoint decision stumps, run as a dynamical system
//! on the example-weight simplex and instrumented with detectors for ties,
//! unique-stump growth, weight-orbit cycles and decision-boundary mass.

pub mod cli;
pub mod datagen;
pub mod domain;
pub mod dynamics;
pub mod engine;
pub mod error;
pub mod num;
pub mod rng;
pub mod stumps;
pub mod trace;
pub mod weights;

pub use domain::{mistake_vector, Dataset, Example, MistakeVector, Sign, Stump};
pub use engine::{
    boost_round, init_weights, run_boost, BoostRun, HaltReason, InitMode, RoundRecord, RunConfig,
};
pub use error::{Error, Result};
pub use num::Num;
pub use stumps::{select_optimal, HypothesisInventory};
pub use weights::{weighted_error, Arithmetic, Backend, Exact, Float, WeightState};
