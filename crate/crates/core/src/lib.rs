//! Solvers, bounds and simulators for repeated games in which a patient
//! player 1 makes announcements and is either an honest type (keeps their
//! word) or an opportunistic type.
//!
//! Everything numeric is generic over [`Scalar`]; the `*64` aliases below fix
//! the scalar to `f64`, which is what the command-line front end uses.

pub mod beliefs;
pub mod error;
pub mod game;
pub mod lp;
pub mod scalar;
pub mod simulator;
pub mod solvers;
pub mod strategies;
pub mod verify;

pub use error::{Error, Result};
pub use game::{ActionSet, Environment, SignalStructure, StageGame};
pub use scalar::Scalar;

pub type StageGame64 = game::StageGame<f64>;
pub type StageGame32 = game::StageGame<f32>;
pub type Environment64 = game::Environment<f64>;
pub type Environment32 = game::Environment<f32>;
pub type SignalStructure64 = game::SignalStructure<f64>;
pub type SignalStructure32 = game::SignalStructure<f32>;
pub type BeliefState64 = beliefs::BeliefState<f64>;
pub type BeliefState32 = beliefs::BeliefState<f32>;
pub type Assessment64 = beliefs::Assessment<f64>;
pub type Assessment32 = beliefs::Assessment<f32>;
pub type BoundReport64 = beliefs::BoundReport<f64>;
pub type BoundReport32 = beliefs::BoundReport<f32>;
pub type BoundInputs64 = beliefs::BoundInputs<f64>;
pub type BoundInputs32 = beliefs::BoundInputs<f32>;
pub type NoCommSolution64 = solvers::NoCommSolution<f64>;
pub type NoCommSolution32 = solvers::NoCommSolution<f32>;
pub type RecommendationSolution64 = solvers::RecommendationSolution<f64>;
pub type RecommendationSolution32 = solvers::RecommendationSolution<f32>;
pub type V1PrimeWitness64 = solvers::V1PrimeWitness<f64>;
pub type V1PrimeWitness32 = solvers::V1PrimeWitness<f32>;
pub type AutomatonProfile64 = strategies::AutomatonProfile<f64>;
pub type AutomatonProfile32 = strategies::AutomatonProfile<f32>;
pub type SimConfig64 = simulator::SimConfig<f64>;
pub type SimConfig32 = simulator::SimConfig<f32>;
pub type SimResult64 = simulator::SimResult<f64>;
pub type SimResult32 = simulator::SimResult<f32>;
pub type Trajectory64 = simulator::Trajectory<f64>;
pub type Trajectory32 = simulator::Trajectory<f32>;
pub type QualityGame64 = simulator::QualityGame<f64>;
pub type QualityGame32 = simulator::QualityGame<f32>;
