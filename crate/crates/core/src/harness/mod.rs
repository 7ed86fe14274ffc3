//! Configuration, runs, sweeps, metrics and self-checks.

mod config;
mod metrics;
mod run;
mod sweep;
pub mod verify;

pub use config::{Overrides, RunConfig, SolverKind, SweepConfig, INTERVAL_COUNT_TOL};
pub use metrics::{RunMetrics, SpeedupModel};
pub use run::{
    default_slot, make_propagator, run_parareal, run_parareal_with, run_serial_reference,
    PararealRun, SerialReference,
};
pub use sweep::{sweep, SweepReport, SweepRow, REPORT_HEADER};
pub use verify::{verify, verify_with, CheckResult, VerifyReport};
