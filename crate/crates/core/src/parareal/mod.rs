//! Parareal mathematics: state vectors, coarse windows, the propagator slot
//! contract and the convergence test. Nothing in here knows about ranks or
//! messages.

mod criterion;
mod serial;
mod slot;
mod state;
mod window;

pub use criterion::{ConvergenceCriterion, NormRule, DEFAULT_THRESHOLD};
pub use serial::{coarse_sweep, serial_fine_reference, serial_fine_trajectory, PararealSweeps};
pub use slot::{Propagator, PropagatorSlot, Slot, SlotBuffers};
pub use state::{LayoutTag, StateVector};
pub use window::{TimeWindow, WINDOW_LENGTH_RTOL};
