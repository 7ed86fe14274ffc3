use std::fmt;

use crate::error::{Error, Result};
use crate::parareal::{ConvergenceCriterion, StateVector, TimeWindow};

/// The six states of a rank's protocol automaton.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum RankState {
    Setup,
    FirstInSlidingWindow,
    FollowerInSlidingWindow,
    Idle,
    LastConverged,
    Exit,
}

impl RankState {
    /// Rank 0 starts in `Setup`, all others idle.
    pub fn initial(rank: usize) -> Self {
        if rank == 0 {
            RankState::Setup
        } else {
            RankState::Idle
        }
    }

    /// States allowed to originate simulation data.
    pub fn may_send_data(self) -> bool {
        matches!(
            self,
            RankState::Setup
                | RankState::FirstInSlidingWindow
                | RankState::FollowerInSlidingWindow
                | RankState::LastConverged
        )
    }

    pub fn tag(self) -> &'static str {
        match self {
            RankState::Setup => "setup",
            RankState::FirstInSlidingWindow => "first",
            RankState::FollowerInSlidingWindow => "follower",
            RankState::Idle => "idle",
            RankState::LastConverged => "last_converged",
            RankState::Exit => "exit",
        }
    }
}

impl fmt::Display for RankState {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.tag())
    }
}

/// Global parameters every rank agrees on before the run.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct GlobalPlan {
    pub total_intervals: usize,
    pub coarse_step: f64,
    pub ranks: usize,
    pub criterion: ConvergenceCriterion,
}

impl GlobalPlan {
    pub fn new(
        total_intervals: usize,
        coarse_step: f64,
        ranks: usize,
        criterion: ConvergenceCriterion,
    ) -> Result<Self> {
        if total_intervals == 0 {
            return Err(Error::config(
                "intervals",
                "need at least one coarse interval",
            ));
        }
        if ranks == 0 {
            return Err(Error::config("ranks", "need at least one rank"));
        }
        if !(coarse_step.is_finite() && coarse_step > 0.0) {
            return Err(Error::config("dt_coarse", "must be positive and finite"));
        }
        if criterion.threshold.is_nan() || criterion.threshold < 0.0 {
            return Err(Error::config("threshold", "must be nonnegative"));
        }
        Ok(GlobalPlan {
            total_intervals,
            coarse_step,
            ranks,
            criterion,
        })
    }

    /// Plan covering `[0, horizon]`; the horizon must be an integer number of
    /// coarse steps.
    pub fn for_horizon(
        horizon: f64,
        coarse_step: f64,
        ranks: usize,
        criterion: ConvergenceCriterion,
    ) -> Result<Self> {
        let m = (horizon / coarse_step).round();
        if m.is_nan() || m < 1.0 || (m * coarse_step - horizon).abs() > 1e-10 * horizon.abs() {
            return Err(Error::config(
                "t_end",
                format!("horizon {horizon} is not an integer multiple of dt_coarse {coarse_step}"),
            ));
        }
        GlobalPlan::new(m as usize, coarse_step, ranks, criterion)
    }

    pub fn horizon(&self) -> f64 {
        self.total_intervals as f64 * self.coarse_step
    }

    pub fn last_interval(&self) -> usize {
        self.total_intervals - 1
    }

    pub fn window(&self, interval: usize) -> Result<TimeWindow> {
        if interval >= self.total_intervals {
            return Err(Error::Protocol(format!(
                "interval {interval} lies beyond the horizon ({} intervals)",
                self.total_intervals
            )));
        }
        TimeWindow::for_interval(interval, self.coarse_step)
    }

    pub fn successor(&self, rank: usize) -> usize {
        (rank + 1) % self.ranks
    }
}

/// The interval a rank currently works on.
#[derive(Clone, Debug)]
pub struct IntervalAssignment {
    pub interval: usize,
    pub window: TimeWindow,
    /// Corrected outputs produced so far on this interval.
    pub iteration_count: u32,
    pub last_output: Option<StateVector>,
    /// Start data of the previous iteration.
    pub last_start: Option<StateVector>,
    /// Set when the convergence test (not the window-head rule) finished the
    /// interval.
    pub converged: bool,
    pub fine_steps: u64,
    pub coarse_steps: u64,
}

impl IntervalAssignment {
    pub fn new(window: TimeWindow) -> Self {
        IntervalAssignment {
            interval: window.interval,
            window,
            iteration_count: 0,
            last_output: None,
            last_start: None,
            converged: false,
            fine_steps: 0,
            coarse_steps: 0,
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn initial_states() {
        assert_eq!(RankState::initial(0), RankState::Setup);
        assert_eq!(RankState::initial(1), RankState::Idle);
        assert_eq!(RankState::initial(7), RankState::Idle);
    }

    #[test]
    fn idle_and_exit_never_send_data() {
        assert!(!RankState::Idle.may_send_data());
        assert!(!RankState::Exit.may_send_data());
        assert!(RankState::Setup.may_send_data());
    }

    #[test]
    fn plan_validation() {
        let c = ConvergenceCriterion::default();
        let plan = GlobalPlan::for_horizon(40.0, 0.1, 8, c).unwrap();
        assert_eq!(plan.total_intervals, 400);
        assert!(GlobalPlan::for_horizon(40.0, 0.3, 8, c).is_err());
        assert!(GlobalPlan::new(4, 0.1, 0, c).is_err());
        assert!(GlobalPlan::new(0, 0.1, 1, c).is_err());
        assert!(matches!(plan.window(400), Err(Error::Protocol(_))));
        let w = plan.window(6).unwrap();
        assert!((w.t_start - 0.6).abs() < 1e-12 && (w.t_end - 0.7).abs() < 1e-12);
    }

    #[test]
    fn ring_successor_wraps() {
        let plan = GlobalPlan::new(4, 0.1, 3, ConvergenceCriterion::default()).unwrap();
        assert_eq!(plan.successor(0), 1);
        assert_eq!(plan.successor(2), 0);
        let single = GlobalPlan::new(4, 0.1, 1, ConvergenceCriterion::default()).unwrap();
        assert_eq!(single.successor(0), 0);
    }
}
