//! Predictive-score model combination: score estimation from posterior
//! draws, locking and quacking pools, weight fitting, baselines and a
//! self-normalized sampler for locked densities.

pub mod baselines;
pub mod error;
pub mod experiments;
pub mod grid;
pub mod io;
pub mod models;
pub mod numeric;
pub mod optimizer;
pub mod pooling;
pub mod predictive;
pub mod psis;
pub mod rng;
pub mod sampler;

pub use error::{Error, Result};
pub use grid::GridDensity;
pub use models::{Derivs, Draws, Likelihood, ScenarioConfig};
pub use optimizer::{fit_locking, fit_quacking, grid_oracle, FitResult, LockingOptions, QuackingOptions};
pub use pooling::{ObjectiveCoefficients, QuackParams, SimplexWeights};
pub use predictive::{EvalTensor, PointEvaluations, ScoreEstimate, ScoreOptions, ScoreTable};
