//! Timeliness metrics of a slotted energy-harvesting actuator with a
//! one-packet data cache and a one-packet battery.
//!
//! Three independent routes compute the average age of information (AoI),
//! age of actuation (AoA) and age of actuated information (AoAI):
//!
//! * [`engine`]: Monte Carlo simulation of the slot dynamics.
//! * [`analytic`]: closed-form rational functions of the arrival rates.
//! * [`markov`]: truncated Markov chains solved numerically, plus a
//!   level-recursion series for the AoA.
//!
//! [`validation`] cross-checks the routes against each other.

pub mod analytic;
pub mod cli;
pub mod engine;
pub mod error;
pub mod markov;
pub mod model;
pub mod output;
pub mod validation;

pub use error::{Error, Result};
pub use model::{make_params, shorthand, AgeVector, Metric, Params, Shorthand, SlotEvents, SystemState};
