//! Decentralized Parareal.
//!
//! Every rank runs an autonomous state machine over one coarse time interval
//! at a time and talks only to its ring predecessor and successor. The
//! numerical side is hidden behind [`parareal::PropagatorSlot`], so solvers
//! never see ranks or messages.
//!
//! * [`parareal`]: state vectors, windows, the slot contract, convergence test
//!   and serial reference drivers.
//! * [`transport`]: ordered neighbor channels, trace log and runners.
//! * [`controller`]: the per-rank automaton.
//! * [`solvers`]: a scalar test equation and a linear rotating shallow-water
//!   solver with a spectral exponential integrator.
//! * [`harness`]: configuration, runs, sweeps, metrics and self-checks.

pub mod controller;
pub mod error;
pub mod harness;
pub mod parareal;
pub mod solvers;
pub mod transport;

pub use error::{Error, Result};
