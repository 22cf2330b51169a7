//! Rate lower bound through the auxiliary AWGN coding loop.

pub mod design;
pub mod directed;
pub mod maps;
pub mod shaping;
pub mod solve;
pub mod youla;

pub use design::{Decoder, Encoder, LoopDesign};
pub use maps::{closed_loop_maps, snr_and_variance, snr_and_variance_shifted, ClosedLoopMaps, SnrVariance};
pub use shaping::{NoiseShaper, Shaping};
pub use directed::{refine, DirectedOptimum, RefineOptions};
pub use solve::{design_for, lower_bound_curve, phi_at_order, phi_of_d, rate_bits, snr_feasible, snr_stage, RatePoint};
pub use youla::{build_default_program, build_youla_program, WeightedOptimum, YoulaOptions, YoulaProgram};
