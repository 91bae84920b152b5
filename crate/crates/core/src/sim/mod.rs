//! Simulation harness: seeded generators, experiment configs and Monte
//! Carlo drivers for type I curves, power curves, stopping-time
//! distributions and moment checks.

pub mod config;
pub mod experiments;
pub mod format;
pub mod generators;
pub mod rng;

pub use config::{ExperimentConfig, ExperimentKind, SpecGrid};
pub use experiments::{
    run_experiment, run_moment_check, run_power_experiment, run_stopping_experiment, run_type1_experiment, stopping_times,
    write_output, ExperimentOutput, MomentRow, PowerRow, StoppingResult, StoppingRow, Type1Result, Type1Row,
};
pub use generators::{gen_coin_stream, gen_gaussian_pair_stream, CoinStream, DcovStream, GaussianPairStream, GeneratorSpec};
