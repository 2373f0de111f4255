//! Ship maneuvering core for a harbour training simulator.
//!
//! The crate holds everything that is pure computation:
//!
//! - [`dynamics`]: planar MMG maneuvering model (hull, propeller, rudder,
//!   thrusters, optional wind) integrated with classical Runge-Kutta.
//! - [`seakeeping`]: closed-form heave/pitch/roll oscillators driven by a
//!   regular wave and stepped in the time domain.
//! - [`trials`]: fast-time circle, zigzag and stop trials with metrics and
//!   CSV export.
//! - [`port`]: harbour geometry, depth lookup and the collision, grounding
//!   and channel-occupancy predicates, plus scenario files.
//!
//! Nothing here does I/O except the explicit file loaders and exporters.

pub mod config;
pub mod dynamics;
pub mod error;
pub mod parallel;
pub mod port;
pub mod seakeeping;
pub mod trials;
pub mod units;

pub use dynamics::ShipConfig;
pub use dynamics::{Controls, Environment, ForceSet, ManeuverState};
pub use error::{ConfigError, DynamicsError};
