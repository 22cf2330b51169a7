//! Discrete-time LTI machinery: filters, realizations, interconnections and spectra.

pub mod filter;
pub mod interconnect;
pub mod linalg;
pub mod plant;
pub mod spectrum;
pub mod ss;

pub use filter::RationalFilter;
pub use interconnect::{BlockId, Interconnection, Signal};
pub use plant::{PlantRealization, TwoByTwoPlant};
pub use spectrum::{FrequencyGrid, SpectrumGrid, DEFAULT_GRID_SIZE};
pub use ss::{delay_augment, realize, shift_register, StateSpaceSystem};
