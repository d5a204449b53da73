//! Budgeted sensor scheduling for batch state estimation.
//!
//! Given a Gaussian prior over the stacked states `x_{1:K}` of a process at `K`
//! measurement times and `m` candidate sensors with nonlinear measurement maps and
//! Gaussian noise, choose at most `s_k` sensors at each step to minimize the
//! conditional entropy of the batch state given the selected measurements.
//!
//! * [`blocklinalg`]: block-tridiagonal log-determinants and solves, linear in `K`.
//! * [`process_models`]: tracking and Gauss-Markov priors, sparse or dense.
//! * [`sensing`]: measurement models, sensor suites, schedules.
//! * [`entropy_oracle`]: closed-form conditional entropy in precision or covariance
//!   form, posterior covariance, MAP linearization.
//! * [`scheduler`]: per-step greedy (eager and lazy), random baseline.
//! * [`exhaustive`]: enumeration of all schedules and approximation certificates.

pub mod blocklinalg;
pub mod entropy_oracle;
mod error;
pub mod exhaustive;
pub mod instances;
pub mod process_models;
pub mod scheduler;
pub mod sensing;
pub mod timing;

pub use blocklinalg::{BlockDiagonalMatrix, BlockTridiagonalMatrix};
pub use entropy_oracle::{EntropyForm, EntropyObjective, OracleContext};
pub use error::{Error, Result};
pub use exhaustive::{BoundCertificate, EnumerationMode, EnumerationOptions, EnumerationResult};
pub use process_models::{GaussianPrior, PriorForm};
pub use scheduler::{GreedyOptions, GreedyTrace, Pick, StepTrace};
pub use sensing::{Schedule, Sensor, SensorKind, SensorSuite};

pub use nalgebra;
