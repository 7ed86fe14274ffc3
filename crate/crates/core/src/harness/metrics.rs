use std::fmt::Write as _;

use super::config::RunConfig;
use crate::controller::{Finalization, RingOutcome, SchedulerKind};
use crate::error::Result;
use crate::parareal::{NormRule, StateVector};

/// Critical-path cost model: serial fine work over the cost at which the last
/// interval became final.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct SpeedupModel {
    pub cost_fine: f64,
    pub cost_coarse: f64,
    pub intervals: usize,
    pub completion_cost: f64,
}

impl SpeedupModel {
    /// Baseline `M·c_F`.
    pub fn speedup(&self) -> f64 {
        self.intervals as f64 * self.cost_fine / self.completion_cost
    }

    /// Baseline `M·(c_F + c_G)`, i.e. charging the serial run for a coarse sweep too.
    pub fn speedup_with_coarse_baseline(&self) -> f64 {
        self.intervals as f64 * (self.cost_fine + self.cost_coarse) / self.completion_cost
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct RunMetrics {
    pub solver: &'static str,
    pub resolution: Option<usize>,
    pub ranks: usize,
    pub intervals: usize,
    pub threshold: f64,
    pub norm: NormRule,
    pub scheduler: SchedulerKind,
    pub seed: u64,
    /// Correction iterations per interval, in interval order.
    pub iterations: Vec<u32>,
    /// Number of intervals finalized as window head.
    pub window_heads: usize,
    pub rank_fine_steps: Vec<u64>,
    pub rank_coarse_steps: Vec<u64>,
    pub total_fine_steps: u64,
    pub total_coarse_steps: u64,
    pub envelopes_sent: u64,
    pub envelopes_dropped: u64,
    pub envelopes_discarded: u64,
    pub max_queue_depth: usize,
    pub final_error_l2: f64,
    pub final_error_lmax: f64,
    pub final_error_min: f64,
    pub ticks: u64,
    pub rounds: u64,
    pub speedup: SpeedupModel,
    /// Per-interval fine counts add up to the rank counters.
    pub work_conserved: bool,
    /// Only measured for the concurrent runner; deterministic records stay
    /// byte-identical across runs.
    pub wallclock_secs: Option<f64>,
}

impl RunMetrics {
    pub fn collect(
        cfg: &RunConfig,
        outcome: &RingOutcome,
        result: &StateVector,
        reference: &StateVector,
    ) -> Result<Self> {
        let intervals = outcome.intervals();
        let diff = result.checked_sub(reference)?;
        let l2 = diff.norm_l2();
        let lmax = diff.norm_max();
        let stats = outcome.inbound_stats();
        let rank_fine_steps: Vec<u64> = outcome
            .ranks
            .iter()
            .map(|r| r.counters().fine_steps)
            .collect();
        let rank_coarse_steps: Vec<u64> = outcome
            .ranks
            .iter()
            .map(|r| r.counters().coarse_steps)
            .collect();
        let total_fine_steps = rank_fine_steps.iter().sum();
        let per_interval_fine: u64 = intervals.iter().map(|r| r.fine_steps).sum();
        Ok(RunMetrics {
            solver: cfg.solver.name(),
            resolution: cfg.resolution(),
            ranks: outcome.plan.ranks,
            intervals: outcome.plan.total_intervals,
            threshold: cfg.threshold,
            norm: cfg.norm,
            scheduler: cfg.scheduler,
            seed: cfg.seed,
            iterations: intervals.iter().map(|r| r.iterations).collect(),
            window_heads: intervals
                .iter()
                .filter(|r| r.finalization == Finalization::WindowHead)
                .count(),
            total_coarse_steps: rank_coarse_steps.iter().sum(),
            rank_fine_steps,
            rank_coarse_steps,
            total_fine_steps,
            envelopes_sent: stats.iter().map(|s| s.sent).sum(),
            envelopes_dropped: stats.iter().map(|s| s.dropped).sum(),
            envelopes_discarded: outcome
                .ranks
                .iter()
                .map(|r| r.counters().discarded_after_convergence)
                .sum(),
            max_queue_depth: stats.iter().map(|s| s.max_depth).max().unwrap_or(0),
            final_error_l2: l2,
            final_error_lmax: lmax,
            final_error_min: l2.min(lmax),
            ticks: outcome.scheduler.ticks,
            rounds: outcome.scheduler.rounds,
            speedup: SpeedupModel {
                cost_fine: cfg.cost_fine,
                cost_coarse: cfg.cost_coarse,
                intervals: outcome.plan.total_intervals,
                completion_cost: outcome.completion_cost(),
            },
            work_conserved: per_interval_fine == total_fine_steps,
            wallclock_secs: None,
        })
    }

    pub fn max_iterations(&self) -> u32 {
        self.iterations.iter().copied().max().unwrap_or(0)
    }

    /// Final error below the threshold, or an exact match.
    pub fn converged(&self) -> bool {
        self.final_error_min < self.threshold || self.final_error_min == 0.0
    }

    /// One `key=value` line per field.
    pub fn to_record(&self) -> String {
        fn join<T: ToString>(v: &[T]) -> String {
            v.iter().map(T::to_string).collect::<Vec<_>>().join(",")
        }
        let mut s = String::new();
        let scheduler = match self.scheduler {
            SchedulerKind::Deterministic => "det",
            SchedulerKind::Concurrent => "conc",
        };
        let resolution = self
            .resolution
            .map(|n| n.to_string())
            .unwrap_or_else(|| "-".into());
        let lines = [
            ("solver", self.solver.to_string()),
            ("resolution", resolution),
            ("ranks", self.ranks.to_string()),
            ("intervals", self.intervals.to_string()),
            ("threshold", self.threshold.to_string()),
            ("norm", self.norm.to_string()),
            ("scheduler", scheduler.to_string()),
            ("seed", self.seed.to_string()),
            ("iterations", join(&self.iterations)),
            ("max_iterations", self.max_iterations().to_string()),
            ("window_heads", self.window_heads.to_string()),
            ("rank_fine_steps", join(&self.rank_fine_steps)),
            ("rank_coarse_steps", join(&self.rank_coarse_steps)),
            ("total_fine_steps", self.total_fine_steps.to_string()),
            ("total_coarse_steps", self.total_coarse_steps.to_string()),
            ("envelopes_sent", self.envelopes_sent.to_string()),
            ("envelopes_dropped", self.envelopes_dropped.to_string()),
            ("envelopes_discarded", self.envelopes_discarded.to_string()),
            ("max_queue_depth", self.max_queue_depth.to_string()),
            ("final_error_l2", self.final_error_l2.to_string()),
            ("final_error_lmax", self.final_error_lmax.to_string()),
            ("final_error_min", self.final_error_min.to_string()),
            ("ticks", self.ticks.to_string()),
            ("rounds", self.rounds.to_string()),
            ("cost_fine", self.speedup.cost_fine.to_string()),
            ("cost_coarse", self.speedup.cost_coarse.to_string()),
            ("completion_cost", self.speedup.completion_cost.to_string()),
            ("modeled_speedup", self.speedup.speedup().to_string()),
            (
                "modeled_speedup_coarse_baseline",
                self.speedup.speedup_with_coarse_baseline().to_string(),
            ),
            ("work_conserved", self.work_conserved.to_string()),
        ];
        for (k, v) in lines {
            let _ = writeln!(s, "{k}={v}");
        }
        if let Some(w) = self.wallclock_secs {
            let _ = writeln!(s, "wallclock_secs={w}");
        }
        s
    }
}
