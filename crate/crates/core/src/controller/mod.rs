//! The per-rank Parareal controller: a six-state automaton driven by its own
//! state, the predecessor's forwarded state and the convergence test.

mod rank;
mod run;
mod state;

pub use rank::{
    Finalization, IntervalRecord, OutputRecord, RankController, RankCounters, StepCosts,
};
pub use run::{run_ring, RingOptions, RingOutcome, SchedulerKind};
pub use state::{GlobalPlan, IntervalAssignment, RankState};
