//! Truncated lattice, Fourier transform, multipliers, symbols, potentials,
//! spectral windows and wave packets.

mod field;
mod fourier;
mod grid;
mod packet;
mod potential;
pub mod symbols;
mod window;

pub use field::{LatticeField, MomentumField};
pub use fourier::{Fourier, Multiplier};
pub use grid::{LatticeBox, MomentumGrid};
pub use packet::{build_wavepacket, PacketSpec};
pub use potential::{
    discrete_derivative, japanese_bracket, potential_eval, ContinuumPotential, ExtensionPolicy,
    Point, Potential, PotentialFamily, PotentialSpec, SiteTable,
};
pub use symbols::{
    evaluate_symbols, free_symbol, hessian_det, speed_squared, threshold_set, velocity, Symbols,
};
pub use window::{min_speed_on_shell, spectral_window, EnergyWindow};
