//! Innovation-method parameter estimation for diffusion processes observed at
//! discrete times with noise.
//!
//! The crate simulates SDE data ([`simulate`]), evaluates the innovation
//! fitness `q(α)` with a Local Linearization filter ([`llfilter`],
//! [`objective`]) and minimises it with a continuous UMDA ([`umdac`]),
//! optionally followed by box-constrained Nelder–Mead ([`local`]). The
//! [`experiment`] module drives whole studies from a flat config file and
//! writes CSV results; it backs the `innovest` binary.

pub mod error;
pub mod experiment;
pub mod llfilter;
pub mod local;
pub mod model;
pub mod objective;
pub mod rng;
pub mod simulate;
pub mod umdac;

pub use error::{Error, Result};
pub use llfilter::{run_filter, run_filter_with, FilterOptions, FilterRun, FilterState};
pub use local::{local_minimize, loa_estimate, refined_estimate, LocalConfig};
pub use model::{EstimationProblem, ParameterBox, StateSpaceModel};
pub use objective::{q_fitness, q_fitness_with, FitnessEvaluation, InnovationObjective, Objective, PENALTY};
pub use rng::RngStream;
pub use simulate::{ObservationSeries, Trajectory};
pub use umdac::{umdac_minimize, EstimationResult, UmdacConfig};
