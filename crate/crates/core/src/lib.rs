pub mod controlled;
pub mod covariance;
pub mod error;
pub mod experiment;
pub mod grid;
pub mod integrators;
pub mod lift;
pub mod moments;
pub mod simulate;
pub mod stats;
