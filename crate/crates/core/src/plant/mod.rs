//! Equivalent-circuit SOA plant: the 9th-order transfer function, its
//! conditioned state-space realization and the time-domain simulator.

mod diode;
mod sim;
mod state_space;
mod tf;

pub use diode::{fit_diode_params, DiodeParams, BOLTZMANN, ELEMENTARY_CHARGE};
pub use sim::{simulate, ResponseTrace, SimState, Simulator, DEFAULT_OVERSAMPLE};
pub use state_space::{to_state_space, StateSpaceModel, DEFAULT_FREQ_SCALE};
pub use tf::{
    canonical_tf, crossing_frequency, frequency_response, log_space, make_variants, variant_table, TransferFunction, VariantSpec,
    VariantTarget,
};
