//! Energy-aware task offloading for a master robot (acting as an edge server)
//! leading a team of slave robots.
//!
//! Each task runs in three stages: the slaves sense and collect data, then
//! each slave computes part of it locally and offloads the rest to the master,
//! and finally the master computes or forwards its share to a base station.
//! Two allocation schemes are provided:
//!
//! * [`mrc_op`]: min-max energy balancing through dual decomposition of the
//!   epigraph problem.
//! * [`mrc_rp`]: the robust scheme, which weights sensing by remaining battery
//!   energy and offloads by a KKT threshold policy with a Lambert-W closed form.
//!
//! [`baseline_gop`] is a greedy offloading baseline, [`oracle`] holds brute-force
//! references, and [`sim`] plays multi-task episodes with battery depletion.

pub mod baseline_gop;
pub mod cli;
pub mod error;
pub mod exec;
pub mod model;
pub mod mrc_op;
pub mod mrc_rp;
pub mod numerics;
pub mod oracle;
pub mod sim;

pub use error::{Error, Result};
