//! Boundary-driven Kawasaki dynamics in diffusive time scaling and its observables.

mod expansion;
mod observables;
mod rates;
mod replicas;
mod sim;

pub use expansion::{
    convolved_empirical_density, log_log_slope, quasi_random_configuration, rate_expansion_residual,
};
pub use observables::{
    block_average, empirical_density, mollify, pin_boundary, replica_mean, sample_bernoulli,
    sample_bernoulli_with, ReplicaMean,
};
pub use rates::{
    boundary_rate, empirical_pairing, exchange_rate, tilt_factor, Event, Side, TiltField,
};
pub use replicas::{replica_rng, run_replicas, stationary_sample, StationarySample};
pub use sim::{
    event_rates, kmc_step, simulate, simulate_direct, simulate_with, KmcState, SimParams, StepRecord,
    Trajectory,
};
