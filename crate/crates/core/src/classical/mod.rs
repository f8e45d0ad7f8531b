//! Hamilton flow of `p(x, xi) = p0(xi) + V(x)` on `R^d x T^d` and the escape,
//! asymptotic-momentum and derivative estimates built on it.

mod asymptotics;
mod flow;
mod region;

pub use asymptotics::{asymptotic_momentum, AsymptoticReport};
pub use flow::{integrate_flow, uniform_times, FlowParams, Integrator, PhasePoint, StepGrowth, Trajectory};
pub use region::{
    escape_constants, min_speed_on_energy_band, region_escape_probe, sample_region,
    variational_probe, EscapeConstants, EscapeReport, Region, Sign, VariationalReport,
};
