use std::sync::Arc;
use std::time::Duration;

use serde::{Deserialize, Serialize};

use super::rank::{IntervalRecord, RankController, StepCosts};
use super::state::GlobalPlan;
use crate::error::{Error, Result};
use crate::parareal::{PropagatorSlot, StateVector};
use crate::transport::{
    ring, run_concurrent, run_deterministic, ChannelStats, LogicalClock, SchedulerStats, TraceLog,
};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum SchedulerKind {
    #[serde(rename = "det")]
    Deterministic,
    #[serde(rename = "conc")]
    Concurrent,
}

#[derive(Clone, Copy, Debug)]
pub struct RingOptions {
    pub scheduler: SchedulerKind,
    pub seed: u64,
    pub costs: StepCosts,
    pub trace: bool,
    pub keep_outputs: bool,
    pub timeout: Option<Duration>,
}

impl Default for RingOptions {
    fn default() -> Self {
        RingOptions {
            scheduler: SchedulerKind::Deterministic,
            seed: 0,
            costs: StepCosts::default(),
            trace: false,
            keep_outputs: false,
            timeout: None,
        }
    }
}

/// Everything left after all ranks exited.
pub struct RingOutcome {
    pub plan: GlobalPlan,
    pub ranks: Vec<RankController>,
    pub scheduler: SchedulerStats,
    pub trace: Option<Arc<TraceLog>>,
}

impl RingOutcome {
    /// Value at the end of the last interval.
    pub fn final_output(&self) -> Result<&StateVector> {
        self.ranks
            .iter()
            .find_map(|r| r.final_output())
            .ok_or_else(|| Error::Protocol("no rank finished the last interval".into()))
    }

    /// Interval records sorted by interval index.
    pub fn intervals(&self) -> Vec<IntervalRecord> {
        let mut all: Vec<IntervalRecord> = self
            .ranks
            .iter()
            .flat_map(|r| r.records().iter().cloned())
            .collect();
        all.sort_by_key(|r| r.interval);
        all
    }

    /// Per-rank statistics of the channel into that rank.
    pub fn inbound_stats(&self) -> Vec<ChannelStats> {
        self.ranks
            .iter()
            .map(|r| r.link().inbound.stats())
            .collect()
    }

    pub fn channels_conserve_envelopes(&self) -> bool {
        self.ranks
            .iter()
            .all(|r| r.link().inbound.conserves_envelopes())
    }

    /// Modeled cost at which the last interval became final.
    pub fn completion_cost(&self) -> f64 {
        self.intervals().last().map(|r| r.cost).unwrap_or(0.0)
    }
}

/// Builds a ring of `plan.ranks` controllers, one slot each, and runs it to
/// completion.
pub fn run_ring(
    plan: GlobalPlan,
    mut make_slot: impl FnMut(usize) -> Result<Box<dyn PropagatorSlot>>,
    options: RingOptions,
) -> Result<RingOutcome> {
    let clock = Arc::new(LogicalClock::default());
    let trace = options
        .trace
        .then(|| Arc::new(TraceLog::new(clock.clone())));
    let links = ring(plan.ranks, trace.clone());
    let mut ranks = links
        .into_iter()
        .enumerate()
        .map(|(r, link)| {
            Ok(
                RankController::new(r, plan, make_slot(r)?, link, clock.clone())?
                    .with_costs(options.costs)
                    .keep_outputs(options.keep_outputs),
            )
        })
        .collect::<Result<Vec<_>>>()?;
    let scheduler = match options.scheduler {
        SchedulerKind::Deterministic => {
            run_deterministic(&mut ranks, options.seed, &clock, options.timeout)?
        }
        SchedulerKind::Concurrent => run_concurrent(&mut ranks, &clock, options.timeout)?,
    };
    Ok(RingOutcome {
        plan,
        ranks,
        scheduler,
        trace,
    })
}
