//! Control of end effectors driven by parallel actuators: kinematics and
//! dynamics on the configuration manifold, force distribution, linear
//! single-actuator control lifted to the whole robot, and a plant simulator.

pub mod actuator;
pub mod config;
pub mod controller;
pub mod distribution;
pub mod dynamics;
pub mod error;
pub mod kinematics;
pub mod manifold;
pub mod plant;
pub mod poly;
pub mod trace;
pub mod trajectory;

pub use error::{Error, Result};
pub use manifold::{ActuatorVector, Cotangent, Manifold, Pose, Tangent};
