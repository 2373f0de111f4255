//! Networked side of the harbour simulator: the federation runtime, the
//! ship bridge federate and the control tower federate.

pub mod bridge;
#[cfg(feature = "ui")]
pub mod gateway;
pub mod local;
pub mod rti;
pub mod tower;
