//! Benchmark harness: reproducible random problems, reference oracles, the
//! two simulation-study suites, and their CSV renderings.
//!
//! Everything here is fixed to the crate's default precision ([`crate::Real`]);
//! the numeric core underneath stays scalar-generic.

pub mod csv;
pub mod experiments;
pub mod generate;
pub mod oracle;
pub mod rng;

pub use experiments::{
    run_infeasibility_experiment, run_settling_experiment, ExperimentError, ExperimentSpec,
    InfeasibilityRow, InfeasibilitySummary, SettlingCurve, SettlingResults, SettlingSample,
};
pub use generate::{generate_random, generate_random_with_witness};
pub use oracle::{reference_solution, OracleError, RefSolution};
pub use rng::SplitMix64;
