//! One rank's protocol automaton.
//!
//! A step executes at most one state handler and never blocks: whenever the
//! handler needs an envelope that has not arrived yet it reports
//! [`StepOutcome::Blocked`] without side effects, and the runner decides how
//! to wait.

use std::sync::Arc;

use super::state::{GlobalPlan, IntervalAssignment, RankState};
use crate::error::{Error, Result};
use crate::parareal::{PropagatorSlot, StateVector};
use crate::transport::{
    EndOfStream, Envelope, EnvelopeKind, LogicalClock, Process, RankLink, Receiver, StepOutcome,
};

/// Abstract cost of one propagator application, used for the critical-path
/// model.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct StepCosts {
    pub fine: f64,
    pub coarse: f64,
}

impl Default for StepCosts {
    fn default() -> Self {
        StepCosts {
            fine: 1.0,
            coarse: 0.0,
        }
    }
}

/// How an interval's final value came about.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Finalization {
    /// Fine step from final start data.
    WindowHead,
    /// Convergence test passed with converged input.
    Converged,
}

#[derive(Clone, Debug, PartialEq)]
pub struct IntervalRecord {
    pub interval: usize,
    pub rank: usize,
    pub iterations: u32,
    pub fine_steps: u64,
    pub coarse_steps: u64,
    pub finalization: Finalization,
    /// Logical clock tick at which the interval became final.
    pub tick: u64,
    /// Modeled cost clock of the owning rank at that moment.
    pub cost: f64,
}

/// A forwarded value kept for field dumps.
#[derive(Clone, Debug, PartialEq)]
pub struct OutputRecord {
    pub interval: usize,
    pub iteration: u32,
    pub state: StateVector,
}

#[derive(Clone, Debug, Default, PartialEq)]
pub struct RankCounters {
    pub fine_steps: u64,
    pub coarse_steps: u64,
    pub data_sent: u64,
    pub exits_sent: u64,
    /// Data envelopes superseded while idle.
    pub dropped: u64,
    /// Data envelopes discarded after the last interval converged.
    pub discarded_after_convergence: u64,
    pub intervals_assigned: u64,
}

pub struct RankController {
    rank: usize,
    plan: GlobalPlan,
    slot: Box<dyn PropagatorSlot>,
    link: RankLink,
    clock: Arc<LogicalClock>,
    costs: StepCosts,
    state: RankState,
    assignment: Option<IntervalAssignment>,
    /// Follower has run fine + difference and waits for new start data.
    awaiting_data: bool,
    exit_sent: bool,
    cost_clock: f64,
    counters: RankCounters,
    records: Vec<IntervalRecord>,
    outputs: Vec<OutputRecord>,
    keep_outputs: bool,
    final_output: Option<StateVector>,
    transitions: Vec<RankState>,
}

impl RankController {
    pub fn new(
        rank: usize,
        plan: GlobalPlan,
        slot: Box<dyn PropagatorSlot>,
        link: RankLink,
        clock: Arc<LogicalClock>,
    ) -> Result<Self> {
        if rank >= plan.ranks {
            return Err(Error::config(
                "ranks",
                format!("rank {rank} outside a ring of {}", plan.ranks),
            ));
        }
        let state = RankState::initial(rank);
        Ok(RankController {
            rank,
            plan,
            slot,
            link,
            clock,
            costs: StepCosts::default(),
            state,
            assignment: None,
            awaiting_data: false,
            exit_sent: false,
            cost_clock: 0.0,
            counters: RankCounters::default(),
            records: Vec::new(),
            outputs: Vec::new(),
            keep_outputs: false,
            final_output: None,
            transitions: vec![state],
        })
    }

    pub fn with_costs(mut self, costs: StepCosts) -> Self {
        self.costs = costs;
        self
    }

    /// Keep every forwarded value for later inspection.
    pub fn keep_outputs(mut self, keep: bool) -> Self {
        self.keep_outputs = keep;
        self
    }

    /// Overrides the initial state; used by tests that start mid-protocol.
    pub fn force_state(&mut self, state: RankState) {
        self.state = state;
        self.transitions.push(state);
    }

    pub fn rank(&self) -> usize {
        self.rank
    }
    pub fn state(&self) -> RankState {
        self.state
    }
    pub fn assignment(&self) -> Option<&IntervalAssignment> {
        self.assignment.as_ref()
    }
    pub fn counters(&self) -> &RankCounters {
        &self.counters
    }
    pub fn records(&self) -> &[IntervalRecord] {
        &self.records
    }
    pub fn outputs(&self) -> &[OutputRecord] {
        &self.outputs
    }
    pub fn final_output(&self) -> Option<&StateVector> {
        self.final_output.as_ref()
    }
    pub fn cost_clock(&self) -> f64 {
        self.cost_clock
    }
    pub fn transitions(&self) -> &[RankState] {
        &self.transitions
    }
    pub fn link(&self) -> &RankLink {
        &self.link
    }

    fn transition(&mut self, next: RankState) {
        if next != self.state {
            self.transitions.push(next);
        }
        self.state = next;
    }

    fn assignment_mut(&mut self) -> Result<&mut IntervalAssignment> {
        self.assignment
            .as_mut()
            .ok_or_else(|| Error::Protocol("no interval assigned".into()))
    }

    fn assign(&mut self, interval: usize, start: Option<StateVector>) -> Result<()> {
        let window = self.plan.window(interval)?;
        self.slot.set_simulation_timeframe(window)?;
        let mut a = IntervalAssignment::new(window);
        if let Some(data) = start {
            self.slot.set_simulation_data(data.clone())?;
            a.last_start = Some(data);
        }
        self.assignment = Some(a);
        self.awaiting_data = false;
        self.counters.intervals_assigned += 1;
        Ok(())
    }

    fn run_fine(&mut self) -> Result<()> {
        self.slot.run_timestep_fine()?;
        self.cost_clock += self.costs.fine;
        self.counters.fine_steps += 1;
        self.assignment_mut()?.fine_steps += 1;
        Ok(())
    }

    fn run_coarse(&mut self) -> Result<()> {
        self.slot.run_timestep_coarse()?;
        self.cost_clock += self.costs.coarse;
        self.counters.coarse_steps += 1;
        self.assignment_mut()?.coarse_steps += 1;
        Ok(())
    }

    fn absorb_stamp(&mut self, env: &Envelope) {
        self.cost_clock = self.cost_clock.max(env.cost_stamp);
    }

    /// Forwards `payload` as the start data of the next interval. Senders
    /// never name an interval beyond the horizon.
    fn forward(&mut self, iteration: u32, payload: StateVector, converged: bool) -> Result<()> {
        let interval = self.assignment_mut()?.interval + 1;
        if interval >= self.plan.total_intervals {
            return Err(Error::Protocol(format!(
                "rank {} tried to forward data for interval {interval} beyond the horizon",
                self.rank
            )));
        }
        let env = Envelope::data(interval, iteration, payload, self.state, converged)?
            .with_cost_stamp(self.cost_clock);
        self.link.outbound.send(env)?;
        self.counters.data_sent += 1;
        Ok(())
    }

    fn keep(&mut self, iteration: u32, state: &StateVector) -> Result<()> {
        if self.keep_outputs {
            let interval = self.assignment_mut()?.interval;
            self.outputs.push(OutputRecord {
                interval,
                iteration,
                state: state.clone(),
            });
        }
        Ok(())
    }

    fn finalize(&mut self, how: Finalization, value: &StateVector) -> Result<()> {
        let tick = self.clock.now();
        let cost = self.cost_clock;
        let rank = self.rank;
        let a = self.assignment_mut()?;
        let record = IntervalRecord {
            interval: a.interval,
            rank,
            iterations: a.iteration_count,
            fine_steps: a.fine_steps,
            coarse_steps: a.coarse_steps,
            finalization: how,
            tick,
            cost,
        };
        let last = a.interval == self.plan.last_interval();
        self.records.push(record);
        if last {
            self.final_output = Some(value.clone());
        }
        Ok(())
    }

    fn is_last_interval(&self) -> bool {
        self.assignment
            .as_ref()
            .is_some_and(|a| a.interval == self.plan.last_interval())
    }

    fn enter_exit(&mut self) -> StepOutcome {
        self.transition(RankState::Exit);
        self.link.outbound.close();
        StepOutcome::Exited
    }

    /// Rank 0 only: initial values, coarse predictor for interval 1, then
    /// window head on interval 0.
    pub fn step_setup(&mut self) -> Result<StepOutcome> {
        if self.rank != 0 {
            return Err(Error::Protocol(format!(
                "rank {} cannot run the setup state",
                self.rank
            )));
        }
        self.assign(0, None)?;
        self.slot.setup_initial_values()?;
        let start = self.slot.start_data()?;
        self.assignment_mut()?.last_start = Some(start);
        if self.plan.total_intervals > 1 {
            self.run_coarse()?;
            let predictor = self.slot.data_timestep_coarse()?;
            self.forward(0, predictor, false)?;
        }
        self.transition(RankState::FirstInSlidingWindow);
        Ok(StepOutcome::Progressed)
    }

    /// Window head: the start data is final, so one fine step finishes the
    /// interval.
    pub fn step_first_in_window(&mut self) -> Result<StepOutcome> {
        self.run_fine()?;
        let fine = self.slot.data_timestep_fine()?;
        let label = self.assignment_mut()?.iteration_count + 1;
        self.keep(label, &fine)?;
        self.finalize(Finalization::WindowHead, &fine)?;
        if self.is_last_interval() {
            self.transition(RankState::LastConverged);
        } else {
            self.forward(label, fine, true)?;
            self.transition(RankState::Idle);
        }
        Ok(StepOutcome::Progressed)
    }

    /// One correction iteration, split at the wait for new start data.
    pub fn step_follower(&mut self) -> Result<StepOutcome> {
        if !self.awaiting_data {
            self.run_fine()?;
            self.slot.compute_difference()?;
            self.awaiting_data = true;
            return Ok(StepOutcome::Progressed);
        }
        let env = match self.link.inbound.try_receive() {
            Ok(Some(env)) => env,
            Ok(None) => return Ok(StepOutcome::Blocked),
            Err(EndOfStream) => {
                return Err(Error::Deadlock(format!(
                    "rank {} waits for data but its inbound channel ended",
                    self.rank
                )))
            }
        };
        let interval = self.assignment_mut()?.interval;
        let payload = match env.kind {
            EnvelopeKind::SimulationData {
                interval: got,
                payload,
                ..
            } if got == interval => payload,
            EnvelopeKind::SimulationData { interval: got, .. } => {
                return Err(Error::Protocol(format!(
                    "rank {} follows interval {interval} but received data for {got}",
                    self.rank
                )))
            }
            EnvelopeKind::Exit => {
                return Err(Error::Protocol(format!(
                    "rank {} received exit while iterating interval {interval}",
                    self.rank
                )))
            }
        };
        self.cost_clock = self.cost_clock.max(env.cost_stamp);
        let predecessor_converged = env.sender_converged;

        let criterion = self.plan.criterion;
        let start_shift = match &self.assignment_mut()?.last_start {
            Some(prev) => criterion.measure(&payload.checked_sub(prev)?),
            None => f64::INFINITY,
        };
        self.slot.set_simulation_data(payload.clone())?;
        self.run_coarse()?;
        self.slot.compute_output_data()?;
        let output = self.slot.output_data()?;
        let estimate = self.slot.error_estimation(&criterion)?;
        let converged = criterion.is_converged(estimate) && criterion.is_converged(start_shift);

        let a = self.assignment_mut()?;
        a.iteration_count += 1;
        a.last_start = Some(payload);
        a.last_output = Some(output.clone());
        let iteration = a.iteration_count;
        let final_here = predecessor_converged && converged;
        if final_here {
            a.converged = true;
        }
        self.awaiting_data = false;
        self.keep(iteration, &output)?;

        if !self.is_last_interval() {
            self.forward(iteration, output.clone(), final_here)?;
        }
        if !predecessor_converged {
            return Ok(StepOutcome::Progressed);
        }
        if converged {
            self.finalize(Finalization::Converged, &output)?;
            if self.is_last_interval() {
                self.transition(RankState::LastConverged);
            } else {
                self.transition(RankState::Idle);
            }
        } else {
            self.transition(RankState::FirstInSlidingWindow);
        }
        Ok(StepOutcome::Progressed)
    }

    /// Waits for the next assignment, dropping superseded data.
    pub fn step_idle(&mut self) -> Result<StepOutcome> {
        let drained = match self.link.inbound.try_drain_to_latest() {
            Ok(Some(d)) => d,
            Ok(None) => return Ok(StepOutcome::Blocked),
            Err(EndOfStream) => return Ok(self.enter_exit()),
        };
        self.counters.dropped += drained.dropped as u64;
        let env = drained.envelope;
        self.absorb_stamp(&env);
        let (interval, payload) = match env.kind {
            EnvelopeKind::Exit => {
                self.link.outbound.send(Envelope::exit(RankState::Idle))?;
                self.counters.exits_sent += 1;
                return Ok(self.enter_exit());
            }
            EnvelopeKind::SimulationData {
                interval, payload, ..
            } => (interval, payload),
        };
        if interval >= self.plan.total_intervals {
            return Err(Error::Protocol(format!(
                "rank {} received data for interval {interval} beyond the horizon",
                self.rank
            )));
        }
        self.assign(interval, Some(payload))?;
        if env.sender_state == RankState::LastConverged {
            self.transition(RankState::LastConverged);
        } else if env.sender_converged {
            self.transition(RankState::FirstInSlidingWindow);
        } else {
            self.transition(RankState::FollowerInSlidingWindow);
            self.run_coarse()?;
            if !self.is_last_interval() {
                let predictor = self.slot.data_timestep_coarse()?;
                self.forward(0, predictor, false)?;
            }
        }
        Ok(StepOutcome::Progressed)
    }

    /// Announces termination and drains the inbound channel until the exit
    /// signal has travelled around the ring.
    pub fn step_last_converged(&mut self) -> Result<StepOutcome> {
        if !self.exit_sent {
            self.link
                .outbound
                .send(Envelope::exit(RankState::LastConverged))?;
            self.exit_sent = true;
            self.counters.exits_sent += 1;
            return Ok(StepOutcome::Progressed);
        }
        match self.link.inbound.try_receive() {
            Ok(None) => Ok(StepOutcome::Blocked),
            Err(EndOfStream) => Ok(self.enter_exit()),
            Ok(Some(env)) if env.is_exit() => Ok(self.enter_exit()),
            Ok(Some(_)) => {
                self.counters.discarded_after_convergence += 1;
                Ok(StepOutcome::Progressed)
            }
        }
    }

    pub fn step(&mut self) -> Result<StepOutcome> {
        match self.state {
            RankState::Setup => self.step_setup(),
            RankState::FirstInSlidingWindow => self.step_first_in_window(),
            RankState::FollowerInSlidingWindow => self.step_follower(),
            RankState::Idle => self.step_idle(),
            RankState::LastConverged => self.step_last_converged(),
            RankState::Exit => Ok(StepOutcome::Exited),
        }
    }
}

impl Process for RankController {
    fn step(&mut self) -> Result<StepOutcome> {
        RankController::step(self)
    }

    fn inbound(&self) -> &Receiver {
        &self.link.inbound
    }
}
