//! Policy-landscape exploration over an agent-based epidemic simulator.
//!
//! The pipeline: generate a synthetic population, run replicated
//! simulations over a Latin hypercube of the ten intervention levers, fit a
//! two-stage emulator (boosted trees for the mean, heteroskedastic Gaussian
//! process for the residual), then search millions of emulated policy
//! mixtures for the least intensive ones that meet an outcome goal.

pub mod abm;
pub mod calibration;
pub mod design;
pub mod emulator;
pub mod error;
pub mod explorer;
pub mod policy;
pub mod population;
pub mod stats;
pub mod store;

pub use abm::{run_replicates, run_simulation, DiseaseParams, SimOutcome, Simulation};
pub use design::DesignMatrix;
pub use emulator::{EmulatedOutcomes, Emulator, EmulatorConfig, Outcome, Prediction};
pub use error::{Error, Result};
pub use policy::{PolicyVector, N_POLICIES, POLICY_SPECS};
pub use population::{Population, PopulationConfig};
