//! Monte-Carlo study of dirty-paper precoding over a fading channel.
//!
//! The channel is `Y = H(X + S) + Z`: the transmitter knows the additive
//! interference S ahead of time and precodes against it, while the fading
//! matrix H is known to it perfectly, through a quantizer, or not at all.
//! Everything here revolves around the inflation factor W — the matrix in
//! the auxiliary variable U = X + WS — and the achievable rate it buys
//! under each knowledge model.
//!
//! The crate is layered front to back:
//!
//! - [`numerics`]: dense complex matrices, log-determinants, spectral
//!   splits — the small checked core everything computes with.
//! - [`stream`] and [`stats`]: splittable random streams for reproducible
//!   parallel sampling, scalar-Gaussian helpers, truncated normals.
//! - [`channel`]: channel configurations, fading laws, the CSIT quantizer,
//!   and conditional samplers.
//! - [`rate`]: the rate estimator and its paired no-interference bound.
//! - [`solvers`]: ways to choose W — closed forms, coordinate descent, a
//!   damped fixed point, and a brute-force grid oracle.
//! - [`experiments`]: power sweeps, CSV emission, config files, and the
//!   high-power consistency checks the CLI exposes.

pub mod channel;
pub mod experiments;
pub mod numerics;
pub mod rate;
pub mod solvers;
pub mod stats;
pub mod stream;

pub use channel::{ChannelConfig, CsitModel, FadingKind};
pub use rate::{achievable_rate, delta_r, no_interference_bound, MonteCarloConfig};
pub use solvers::{InflationFactor, SolverConfig};
pub use stream::RandomStream;
