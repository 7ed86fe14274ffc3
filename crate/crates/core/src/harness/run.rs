use std::fs;
use std::path::Path;
use std::time::Instant;

use super::config::{RunConfig, SolverKind};
use super::metrics::RunMetrics;
use crate::controller::{run_ring, RingOptions, RingOutcome, SchedulerKind};
use crate::error::{Error, Result};
use crate::parareal::{serial_fine_reference, Propagator, PropagatorSlot, Slot, StateVector};
use crate::solvers::rswe::write_field_dump;
use crate::solvers::{DahlquistPropagator, RswePropagator};

/// Builds the propagator pair selected by `cfg`.
pub fn make_propagator(cfg: &RunConfig) -> Result<Box<dyn Propagator>> {
    Ok(match cfg.solver {
        SolverKind::Dahlquist => Box::new(DahlquistPropagator::new(cfg.dahlquist, cfg.dt_coarse)?),
        SolverKind::Rswe => Box::new(RswePropagator::new(cfg.rswe, cfg.dt_coarse)?),
    })
}

/// The standard slot for `cfg`, one per rank.
pub fn default_slot(cfg: &RunConfig) -> Result<Box<dyn PropagatorSlot>> {
    Ok(Box::new(Slot::new(make_propagator(cfg)?, cfg.dt_coarse)?))
}

pub struct SerialReference {
    pub state: StateVector,
    pub fine_steps: u64,
    pub wallclock_secs: f64,
}

/// Fine propagator alone over `[0, T]`, window by window.
pub fn run_serial_reference(cfg: &RunConfig) -> Result<SerialReference> {
    cfg.validate()?;
    let started = Instant::now();
    let mut prop = make_propagator(cfg)?;
    let u0 = prop.initial_value();
    let state = serial_fine_reference(&mut prop, &u0, 0.0, cfg.t_end, cfg.dt_coarse)?;
    Ok(SerialReference {
        state,
        fine_steps: cfg.intervals()? as u64,
        wallclock_secs: started.elapsed().as_secs_f64(),
    })
}

pub struct PararealRun {
    pub outcome: RingOutcome,
    pub metrics: RunMetrics,
    pub reference: StateVector,
}

/// Runs the ring with the standard slots and writes the requested outputs.
pub fn run_parareal(cfg: &RunConfig) -> Result<PararealRun> {
    run_parareal_with(cfg, &default_slot)
}

/// Like [`run_parareal`] but with caller-supplied slots.
pub fn run_parareal_with(
    cfg: &RunConfig,
    make_slot: &dyn Fn(&RunConfig) -> Result<Box<dyn PropagatorSlot>>,
) -> Result<PararealRun> {
    cfg.validate()?;
    let plan = cfg.plan()?;
    let options = RingOptions {
        scheduler: cfg.scheduler,
        seed: cfg.seed,
        costs: cfg.costs(),
        trace: cfg.trace_out.is_some(),
        keep_outputs: cfg.dump_fields.is_some(),
        timeout: cfg.timeout(),
    };
    let started = Instant::now();
    let outcome = run_ring(plan, |_| make_slot(cfg), options)?;
    let wallclock = started.elapsed().as_secs_f64();

    let reference = run_serial_reference(cfg)?.state;
    let result = outcome.final_output()?.clone();
    let mut metrics = RunMetrics::collect(cfg, &outcome, &result, &reference)?;
    if cfg.scheduler == SchedulerKind::Concurrent {
        metrics.wallclock_secs = Some(wallclock);
    }

    if let Some(path) = &cfg.metrics_out {
        write_file(path, &metrics.to_record())?;
    }
    if let Some(path) = &cfg.trace_out {
        let text = outcome
            .trace
            .as_ref()
            .map(|t| t.to_text())
            .unwrap_or_default();
        write_file(path, &text)?;
    }
    if let Some(dir) = &cfg.dump_fields {
        for rank in &outcome.ranks {
            for out in rank.outputs() {
                write_field_dump(
                    dir,
                    &out.state,
                    cfg.rswe.resolution,
                    out.interval,
                    out.iteration,
                )?;
            }
        }
    }
    Ok(PararealRun {
        outcome,
        metrics,
        reference,
    })
}

pub(crate) fn write_file(path: &Path, text: &str) -> Result<()> {
    if let Some(parent) = path.parent() {
        if !parent.as_os_str().is_empty() {
            fs::create_dir_all(parent)?;
        }
    }
    fs::write(path, text).map_err(|e| Error::Io(format!("{}: {e}", path.display())))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn dahlquist_reference_value() {
        let cfg = RunConfig {
            t_end: 1.0,
            ..RunConfig::default()
        };
        let r = run_serial_reference(&cfg).unwrap();
        assert!((r.state.values()[0] - (-1.0_f64).exp()).abs() < 1e-12);
        assert_eq!(r.fine_steps, 10);
    }

    #[test]
    fn small_dahlquist_run_converges() {
        let cfg = RunConfig {
            t_end: 1.6,
            ranks: 4,
            ..RunConfig::default()
        };
        let run = run_parareal(&cfg).unwrap();
        assert!(run.metrics.final_error_min < cfg.threshold);
        assert_eq!(run.metrics.iterations.len(), 16);
        assert!(run.metrics.work_conserved);
    }
}
