//! Quantized-channel simulation and operational rate measurement.

pub mod entropy;
pub mod operational;
pub mod quantizer;
pub mod runner;
pub mod sparse;

pub use entropy::{empirical_entropy_rate, entropy_rate_with_ci, EntropyEstimate};
pub use operational::{operational_rate_point, operational_run, OperationalRatePoint, OperationalRun, DEFAULT_MARKOV_ORDER};
pub use quantizer::UniformQuantizer;
pub use runner::{
    burn_in_for, empirical_output_power, simulate_awgn_loop, simulate_loop, simulate_quantized_loop, Channel,
    SymbolTrace,
};
pub use sparse::SparseSystem;
