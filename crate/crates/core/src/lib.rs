//! Physical removal attacks on spinning LiDAR: echo/filter modelling,
//! attack synthesis, detection, and downstream braking consequences.

// `!(x > 0.0)` is how validation rejects NaN along with the rest
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod attack;
pub mod defense;
pub mod echo_pipeline;
pub mod error;
pub mod harness;
pub mod io;
pub mod kinematics;
pub mod laser_safety;
pub mod perception;
pub mod scene;
pub mod sensor_model;

pub use error::{Error, FormatError, Position, Result};
