//! The per-rank simulation slot.
//!
//! A solver only provides the mathematics through [`Propagator`]; the
//! [`Slot`] wrapper owns the five buffers (start, fine, coarse, difference,
//! output), tracks which of them are valid, and enforces the call order the
//! controller relies on. Controllers talk to the object-safe
//! [`PropagatorSlot`] trait so test fixtures can stand in for a real slot.

use super::criterion::ConvergenceCriterion;
use super::state::{LayoutTag, StateVector};
use super::window::TimeWindow;
use crate::error::{Error, Result};

/// Solver-side mathematics: an initial condition and two propagators over one
/// coarse window.
pub trait Propagator: Send {
    fn layout(&self) -> LayoutTag;

    /// State at `t = 0`.
    fn initial_value(&self) -> StateVector;

    /// Called whenever the slot is retargeted. Implementations may cache
    /// per-length data here but must not rebuild one-time state.
    fn prepare_window(&mut self, _window: &TimeWindow) -> Result<()> {
        Ok(())
    }

    fn fine(&mut self, start: &StateVector, window: &TimeWindow) -> Result<StateVector>;

    fn coarse(&mut self, start: &StateVector, window: &TimeWindow) -> Result<StateVector>;

    /// Number of fine sub-steps taken over `window`.
    fn fine_substeps(&self, _window: &TimeWindow) -> usize {
        1
    }
}

impl<P: Propagator + ?Sized> Propagator for Box<P> {
    fn layout(&self) -> LayoutTag {
        (**self).layout()
    }
    fn initial_value(&self) -> StateVector {
        (**self).initial_value()
    }
    fn prepare_window(&mut self, window: &TimeWindow) -> Result<()> {
        (**self).prepare_window(window)
    }
    fn fine(&mut self, start: &StateVector, window: &TimeWindow) -> Result<StateVector> {
        (**self).fine(start, window)
    }
    fn coarse(&mut self, start: &StateVector, window: &TimeWindow) -> Result<StateVector> {
        (**self).coarse(start, window)
    }
    fn fine_substeps(&self, window: &TimeWindow) -> usize {
        (**self).fine_substeps(window)
    }
}

/// The simulation-layer interface seen by the controller.
pub trait PropagatorSlot: Send {
    fn layout(&self) -> LayoutTag;
    fn window(&self) -> Option<TimeWindow>;
    fn set_simulation_timeframe(&mut self, window: TimeWindow) -> Result<()>;
    fn setup_initial_values(&mut self) -> Result<()>;
    fn set_simulation_data(&mut self, data: StateVector) -> Result<()>;
    fn run_timestep_fine(&mut self) -> Result<()>;
    fn run_timestep_coarse(&mut self) -> Result<()>;
    fn compute_difference(&mut self) -> Result<()>;
    fn compute_output_data(&mut self) -> Result<()>;
    fn output_data(&self) -> Result<StateVector>;
    fn data_timestep_fine(&self) -> Result<StateVector>;
    fn data_timestep_coarse(&self) -> Result<StateVector>;
    fn start_data(&self) -> Result<StateVector>;
    /// Norm of the change of the output buffer since the previous iteration on
    /// this window, or `+∞` when there is no previous output.
    fn error_estimation(&self, criterion: &ConvergenceCriterion) -> Result<f64>;
}

/// A buffer entry together with the bookkeeping needed to validate its use.
#[derive(Clone, Debug)]
struct Tagged {
    data: StateVector,
    /// Start-data generation the value was computed from.
    generation: u64,
    /// Position in the slot's operation sequence.
    seq: u64,
}

/// The start, fine, coarse, difference and output buffers of one slot.
#[derive(Clone, Debug, Default)]
pub struct SlotBuffers {
    start: Option<Tagged>,
    fine: Option<Tagged>,
    coarse: Option<Tagged>,
    difference: Option<Tagged>,
    output: Option<Tagged>,
    previous_output: Option<StateVector>,
}

impl SlotBuffers {
    pub fn start_valid(&self) -> bool {
        self.start.is_some()
    }
    pub fn fine_valid(&self) -> bool {
        self.fine.is_some()
    }
    pub fn coarse_valid(&self) -> bool {
        self.coarse.is_some()
    }
    pub fn difference_valid(&self) -> bool {
        self.difference.is_some()
    }
    pub fn output_valid(&self) -> bool {
        self.output.is_some()
    }
}

fn missing(buffer: &str, op: &str) -> Error {
    Error::Protocol(format!("{op}: {buffer} buffer is not valid"))
}

/// Default [`PropagatorSlot`] implementation over any [`Propagator`].
pub struct Slot<P> {
    propagator: P,
    coarse_step: f64,
    layout: LayoutTag,
    window: Option<TimeWindow>,
    buffers: SlotBuffers,
    generation: u64,
    seq: u64,
}

impl<P: Propagator> Slot<P> {
    /// One-time construction; later windows are assigned without rebuilding
    /// the propagator.
    pub fn new(propagator: P, coarse_step: f64) -> Result<Self> {
        if !(coarse_step.is_finite() && coarse_step > 0.0) {
            return Err(Error::config("dt_coarse", "must be positive and finite"));
        }
        let layout = propagator.layout();
        Ok(Slot {
            propagator,
            coarse_step,
            layout,
            window: None,
            buffers: SlotBuffers::default(),
            generation: 0,
            seq: 0,
        })
    }

    pub fn propagator(&self) -> &P {
        &self.propagator
    }

    pub fn propagator_mut(&mut self) -> &mut P {
        &mut self.propagator
    }

    pub fn buffers(&self) -> &SlotBuffers {
        &self.buffers
    }

    pub fn coarse_step(&self) -> f64 {
        self.coarse_step
    }

    fn next_seq(&mut self) -> u64 {
        self.seq += 1;
        self.seq
    }

    fn require_window(&self, op: &str) -> Result<TimeWindow> {
        self.window
            .ok_or_else(|| Error::Protocol(format!("{op}: no simulation timeframe assigned")))
    }

    fn store_start(&mut self, data: StateVector) {
        self.generation += 1;
        let seq = self.next_seq();
        self.buffers.start = Some(Tagged {
            data,
            generation: self.generation,
            seq,
        });
    }

    fn finite_or_err(v: StateVector, what: &str) -> Result<StateVector> {
        if v.is_finite() {
            Ok(v)
        } else {
            Err(Error::Numerical(format!(
                "{what} produced non-finite values"
            )))
        }
    }
}

impl<P: Propagator> PropagatorSlot for Slot<P> {
    fn layout(&self) -> LayoutTag {
        self.layout.clone()
    }

    fn window(&self) -> Option<TimeWindow> {
        self.window
    }

    fn set_simulation_timeframe(&mut self, window: TimeWindow) -> Result<()> {
        window.check_step(self.coarse_step)?;
        self.propagator.prepare_window(&window)?;
        self.window = Some(window);
        self.buffers = SlotBuffers::default();
        Ok(())
    }

    fn setup_initial_values(&mut self) -> Result<()> {
        let window = self.require_window("setup_initial_values")?;
        if window.t_start != 0.0 {
            return Err(Error::Protocol(format!(
                "setup_initial_values requires t_start = 0, window starts at {}",
                window.t_start
            )));
        }
        let initial = self.propagator.initial_value();
        self.store_start(initial);
        Ok(())
    }

    fn set_simulation_data(&mut self, data: StateVector) -> Result<()> {
        if data.layout() != &self.layout {
            return Err(Error::Data(format!(
                "layout mismatch: slot expects {}, got {}",
                self.layout,
                data.layout()
            )));
        }
        if !data.is_finite() {
            return Err(Error::Data(
                "simulation data contains non-finite values".into(),
            ));
        }
        self.store_start(data);
        Ok(())
    }

    fn run_timestep_fine(&mut self) -> Result<()> {
        let window = self.require_window("run_timestep_fine")?;
        let start = self
            .buffers
            .start
            .clone()
            .ok_or_else(|| missing("start", "run_timestep_fine"))?;
        let out = self.propagator.fine(&start.data, &window)?;
        let out = Self::finite_or_err(out, "fine propagator")?;
        let seq = self.next_seq();
        self.buffers.fine = Some(Tagged {
            data: out,
            generation: start.generation,
            seq,
        });
        Ok(())
    }

    fn run_timestep_coarse(&mut self) -> Result<()> {
        let window = self.require_window("run_timestep_coarse")?;
        let start = self
            .buffers
            .start
            .clone()
            .ok_or_else(|| missing("start", "run_timestep_coarse"))?;
        let out = self.propagator.coarse(&start.data, &window)?;
        let out = Self::finite_or_err(out, "coarse propagator")?;
        let seq = self.next_seq();
        self.buffers.coarse = Some(Tagged {
            data: out,
            generation: start.generation,
            seq,
        });
        Ok(())
    }

    fn compute_difference(&mut self) -> Result<()> {
        let fine = self
            .buffers
            .fine
            .as_ref()
            .ok_or_else(|| missing("fine", "compute_difference"))?;
        let coarse = self
            .buffers
            .coarse
            .as_ref()
            .ok_or_else(|| missing("coarse", "compute_difference"))?;
        if fine.generation != coarse.generation {
            return Err(Error::Protocol(
                "compute_difference: fine and coarse results stem from different start data".into(),
            ));
        }
        let data = fine.data.checked_sub(&coarse.data)?;
        let generation = fine.generation;
        let seq = self.next_seq();
        self.buffers.difference = Some(Tagged {
            data,
            generation,
            seq,
        });
        Ok(())
    }

    fn compute_output_data(&mut self) -> Result<()> {
        let diff = self
            .buffers
            .difference
            .as_ref()
            .ok_or_else(|| missing("difference", "compute_output_data"))?;
        let coarse = self
            .buffers
            .coarse
            .as_ref()
            .ok_or_else(|| missing("coarse", "compute_output_data"))?;
        if coarse.seq < diff.seq {
            return Err(Error::Protocol(
                "compute_output_data: no coarse step was run after compute_difference".into(),
            ));
        }
        let data = coarse.data.checked_add(&diff.data)?;
        let generation = coarse.generation;
        let seq = self.next_seq();
        if let Some(old) = self.buffers.output.take() {
            self.buffers.previous_output = Some(old.data);
        }
        self.buffers.output = Some(Tagged {
            data,
            generation,
            seq,
        });
        Ok(())
    }

    fn output_data(&self) -> Result<StateVector> {
        self.buffers
            .output
            .as_ref()
            .map(|t| t.data.clone())
            .ok_or_else(|| missing("output", "output_data"))
    }

    fn data_timestep_fine(&self) -> Result<StateVector> {
        self.buffers
            .fine
            .as_ref()
            .map(|t| t.data.clone())
            .ok_or_else(|| missing("fine", "data_timestep_fine"))
    }

    fn data_timestep_coarse(&self) -> Result<StateVector> {
        self.buffers
            .coarse
            .as_ref()
            .map(|t| t.data.clone())
            .ok_or_else(|| missing("coarse", "data_timestep_coarse"))
    }

    fn start_data(&self) -> Result<StateVector> {
        self.buffers
            .start
            .as_ref()
            .map(|t| t.data.clone())
            .ok_or_else(|| missing("start", "start_data"))
    }

    fn error_estimation(&self, criterion: &ConvergenceCriterion) -> Result<f64> {
        let current = self
            .buffers
            .output
            .as_ref()
            .ok_or_else(|| missing("output", "error_estimation"))?;
        match &self.buffers.previous_output {
            None => Ok(f64::INFINITY),
            Some(prev) => Ok(criterion.measure(&current.data.checked_sub(prev)?)),
        }
    }
}
