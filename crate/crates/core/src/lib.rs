pub mod bounds;
pub mod cli;
pub mod error;
pub mod mdp;
pub mod montecarlo;
pub mod norms;
pub mod operators;
pub mod rng;
pub mod sa;

pub use error::{Error, Result};
pub use norms::NormSpec;
pub use operators::StochasticOperator;
pub use sa::{run_sa, StepSchedule, Trajectory};
