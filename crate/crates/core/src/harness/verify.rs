//! Small-scale self-checks of the whole stack, reported per check.

use std::collections::BTreeMap;
use std::fmt::Write as _;

use super::config::{RunConfig, SolverKind};
use super::run::{default_slot, make_propagator, run_parareal_with};
use crate::controller::{run_ring, RankState, RingOptions, RingOutcome};
use crate::error::{Error, Result};
use crate::parareal::{serial_fine_trajectory, PararealSweeps, PropagatorSlot, StateVector};
use crate::solvers::dahlquist::CoarseScheme;
use crate::solvers::rswe::energy;
use crate::solvers::{RsweConfig, RsweModel};
use crate::transport::{channel, Envelope, TraceEvent, TraceOp};

pub type SlotFactory<'a> = &'a dyn Fn(&RunConfig) -> Result<Box<dyn PropagatorSlot>>;

#[derive(Clone, Debug, PartialEq)]
pub struct CheckResult {
    pub name: &'static str,
    pub passed: bool,
    pub detail: String,
}

#[derive(Clone, Debug, Default, PartialEq)]
pub struct VerifyReport {
    pub checks: Vec<CheckResult>,
}

impl VerifyReport {
    pub fn all_passed(&self) -> bool {
        self.checks.iter().all(|c| c.passed)
    }

    pub fn check(&self, name: &str) -> Option<&CheckResult> {
        self.checks.iter().find(|c| c.name == name)
    }

    pub fn to_text(&self) -> String {
        let mut s = String::new();
        for c in &self.checks {
            let status = if c.passed { "PASS" } else { "FAIL" };
            let _ = writeln!(s, "{status} {}: {}", c.name, c.detail);
        }
        s
    }
}

/// Every event travels from a rank to its ring successor.
pub fn trace_is_local(events: &[TraceEvent], ranks: usize) -> bool {
    events.iter().all(|e| e.to == (e.from + 1) % ranks)
}

/// Per-channel `(send, recv, drop)` counts from a trace.
pub fn trace_counts(events: &[TraceEvent]) -> BTreeMap<(usize, usize), (u64, u64, u64)> {
    let mut m = BTreeMap::new();
    for e in events {
        let c = m.entry((e.from, e.to)).or_insert((0, 0, 0));
        match e.op {
            TraceOp::Send => c.0 += 1,
            TraceOp::Recv => c.1 += 1,
            TraceOp::Drop => c.2 += 1,
        }
    }
    m
}

/// `sent = received + dropped + still queued` on every channel, both from the
/// trace and from the channel counters.
pub fn trace_conserves(outcome: &RingOutcome) -> bool {
    let Some(trace) = &outcome.trace else {
        return false;
    };
    let counts = trace_counts(&trace.events());
    let from_trace = outcome.ranks.iter().all(|r| {
        let inbound = &r.link().inbound;
        let (s, rv, d) = counts
            .get(&(inbound.from_rank(), inbound.to_rank()))
            .copied()
            .unwrap_or_default();
        s == rv + d + inbound.queued() as u64
    });
    from_trace && outcome.channels_conserve_envelopes()
}

/// Relative energy change over one exact step of `dt`.
pub fn energy_drift(model: &mut RsweModel, state: &StateVector, dt: f64) -> Result<f64> {
    let c = *model.config();
    let before = energy(state, c.gravity, c.depth)?;
    let after = energy(&model.exponential_step(state, dt)?, c.gravity, c.depth)?;
    Ok((after - before).abs() / before)
}

/// Relative distance between `step(dt)∘step(dt)` and `step(2dt)`.
pub fn semigroup_defect(model: &mut RsweModel, state: &StateVector, dt: f64) -> Result<f64> {
    let twice = model.exponential_step(state, dt)?;
    let twice = model.exponential_step(&twice, dt)?;
    let once = model.exponential_step(state, 2.0 * dt)?;
    Ok(twice.checked_sub(&once)?.norm_l2() / once.norm_l2())
}

fn relative_error(a: &StateVector, b: &StateVector) -> Result<f64> {
    Ok(a.checked_sub(b)?.norm_l2() / b.norm_l2().max(f64::MIN_POSITIVE))
}

fn dahlquist_config(intervals: usize, ranks: usize, seed: u64) -> RunConfig {
    RunConfig {
        solver: SolverKind::Dahlquist,
        t_end: intervals as f64 * 0.1,
        dt_coarse: 0.1,
        ranks,
        seed,
        ..RunConfig::default()
    }
}

/// Slots for every interval, the initial value and the serial fine trajectory.
type SweepSetup = (Vec<Box<dyn PropagatorSlot>>, StateVector, Vec<StateVector>);

fn sweeps_for(cfg: &RunConfig, make_slot: SlotFactory) -> Result<SweepSetup> {
    let m = cfg.intervals()?;
    let slots = (0..m).map(|_| make_slot(cfg)).collect::<Result<Vec<_>>>()?;
    let mut prop = make_propagator(cfg)?;
    let u0 = prop.initial_value();
    let reference = serial_fine_trajectory(&mut prop, &u0, 0.0, cfg.t_end, cfg.dt_coarse)?;
    Ok((slots, u0, reference))
}

/// After `k` correction sweeps the first `k` interval endpoints equal the
/// serial fine values.
pub fn check_exactness_in_k(make_slot: SlotFactory) -> Result<String> {
    let cfg = dahlquist_config(8, 8, 0);
    let (mut slots, u0, reference) = sweeps_for(&cfg, make_slot)?;
    let mut sweeps = PararealSweeps::new(&mut slots, u0, cfg.dt_coarse)?;
    let mut worst = 0.0_f64;
    for k in 1..=8 {
        let latest = sweeps.iterate()?;
        for n in 1..=k {
            let err = relative_error(&latest[n], &reference[n])?;
            worst = worst.max(err);
            if err > 1e-12 {
                return Err(Error::Numerical(format!(
                    "after {k} sweeps endpoint {n} is off by {err:e}"
                )));
            }
        }
    }
    Ok(format!("M=8, worst relative error {worst:e}"))
}

/// Identical propagators: one correction reaches the fine solution.
pub fn check_collapse(make_slot: SlotFactory) -> Result<String> {
    let mut cfg = dahlquist_config(4, 4, 0);
    cfg.dahlquist.coarse = CoarseScheme::ExactExponential;
    let (mut slots, u0, reference) = sweeps_for(&cfg, make_slot)?;
    let mut sweeps = PararealSweeps::new(&mut slots, u0, cfg.dt_coarse)?;
    let first = sweeps.iterate()?.to_vec();
    for (n, (a, b)) in first.iter().zip(&reference).enumerate() {
        let err = relative_error(a, b)?;
        if err > 1e-12 {
            return Err(Error::Numerical(format!(
                "endpoint {n} off by {err:e} after one sweep"
            )));
        }
    }
    let second = sweeps.iterate()?.to_vec();
    for (a, b) in second.iter().zip(&first) {
        if a.checked_sub(b)?.norm_max() != 0.0 {
            return Err(Error::Numerical(
                "second sweep still changed the iterate".into(),
            ));
        }
    }
    // In the ring every corrected output already equals the fine value; the
    // +∞ first estimate means convergence is only detected one iteration later.
    let outcome = run_ring(
        cfg.plan()?,
        |_| make_slot(&cfg),
        RingOptions {
            keep_outputs: true,
            ..RingOptions::default()
        },
    )?;
    let mut outputs = 0;
    for rank in &outcome.ranks {
        for out in rank.outputs().iter().filter(|o| o.iteration >= 1) {
            let err = relative_error(&out.state, &reference[out.interval + 1])?;
            if err > 1e-12 {
                return Err(Error::Numerical(format!(
                    "interval {} iteration {} off by {err:e}",
                    out.interval, out.iteration
                )));
            }
            outputs += 1;
        }
    }
    let k = outcome
        .intervals()
        .iter()
        .map(|r| r.iterations)
        .max()
        .unwrap_or(0);
    let final_error = relative_error(outcome.final_output()?, &reference[cfg.intervals()?])?;
    if k > 2 || final_error >= 1e-12 {
        return Err(Error::Numerical(format!(
            "ring run: max iterations {k}, final error {final_error:e}"
        )));
    }
    Ok(format!(
        "{outputs} corrected outputs exact, max iterations {k}, final error {final_error:e}"
    ))
}

/// Every rank exits on a grid of ring sizes and horizons.
pub fn check_termination(seed: u64, make_slot: SlotFactory) -> Result<String> {
    let mut runs = 0;
    for p in [1, 2, 4, 8] {
        for m in [1, 4, 16, 40] {
            let cfg = dahlquist_config(m, p, seed);
            let outcome = run_ring(
                cfg.plan()?,
                |_| make_slot(&cfg),
                RingOptions {
                    seed,
                    costs: cfg.costs(),
                    ..RingOptions::default()
                },
            )
            .map_err(|e| Error::Protocol(format!("P={p} M={m}: {e}")))?;
            if outcome.ranks.iter().any(|r| r.state() != RankState::Exit) {
                return Err(Error::Protocol(format!("P={p} M={m}: a rank did not exit")));
            }
            runs += 1;
        }
    }
    Ok(format!("{runs} runs terminated"))
}

fn traced_ring(cfg: &RunConfig, make_slot: SlotFactory) -> Result<RingOutcome> {
    run_ring(
        cfg.plan()?,
        |_| make_slot(cfg),
        RingOptions {
            seed: cfg.seed,
            costs: cfg.costs(),
            trace: true,
            ..RingOptions::default()
        },
    )
}

/// Envelopes only travel to the ring successor.
pub fn check_locality(seed: u64, make_slot: SlotFactory) -> Result<String> {
    let cfg = dahlquist_config(16, 4, seed);
    let outcome = traced_ring(&cfg, make_slot)?;
    let events = outcome
        .trace
        .as_ref()
        .map(|t| t.events())
        .unwrap_or_default();
    if !trace_is_local(&events, cfg.ranks) {
        return Err(Error::Protocol(
            "envelope between non-adjacent ranks".into(),
        ));
    }
    Ok(format!(
        "{} trace events, all successor-bound",
        events.len()
    ))
}

/// No envelope is lost or invented.
pub fn check_conservation(seed: u64, make_slot: SlotFactory) -> Result<String> {
    let cfg = dahlquist_config(16, 4, seed);
    let outcome = traced_ring(&cfg, make_slot)?;
    if !trace_conserves(&outcome) {
        return Err(Error::Protocol("sent ≠ received + dropped + queued".into()));
    }
    let sent: u64 = outcome.inbound_stats().iter().map(|s| s.sent).sum();
    Ok(format!("{sent} envelopes accounted for"))
}

/// Two runs with one seed yield identical traces and metrics.
pub fn check_determinism(seed: u64, make_slot: SlotFactory) -> Result<String> {
    let cfg = dahlquist_config(16, 4, seed);
    let render = || -> Result<(String, String)> {
        let outcome = traced_ring(&cfg, make_slot)?;
        let trace = outcome
            .trace
            .as_ref()
            .map(|t| t.to_text())
            .unwrap_or_default();
        let records = format!("{:?}", outcome.intervals());
        Ok((trace, records))
    };
    let a = render()?;
    let b = render()?;
    if a != b {
        return Err(Error::Protocol(format!(
            "seed {seed} produced two different runs"
        )));
    }
    Ok(format!("seed {seed}, {} trace bytes", a.0.len()))
}

/// Two queued data envelopes for one interval collapse into one drop.
pub fn check_stale_drop() -> Result<String> {
    let (tx, rx) = channel(0, 1, None);
    let payload = StateVector::new(vec![1.0], crate::parareal::LayoutTag::new("check"));
    for k in 1..=2 {
        tx.send(Envelope::data(
            3,
            k,
            payload.clone(),
            RankState::FollowerInSlidingWindow,
            false,
        )?)?;
    }
    let drained = rx
        .try_drain_to_latest()
        .map_err(|_| Error::Transport("channel closed".into()))?
        .ok_or_else(|| Error::Transport("nothing queued".into()))?;
    if drained.dropped != 1 || drained.envelope.iteration() != Some(2) || rx.stats().dropped != 1 {
        return Err(Error::Transport(format!(
            "dropped {} envelopes",
            drained.dropped
        )));
    }
    Ok("1 drop, newest kept".into())
}

/// Exact-step energy conservation and the semigroup property on 16².
pub fn check_physics() -> Result<String> {
    let cfg = RsweConfig::default();
    let mut model = RsweModel::new(cfg)?;
    let u0 = cfg.gaussian_initial_state();
    let drift = energy_drift(&mut model, &u0, 0.1)?;
    let defect = semigroup_defect(&mut model, &u0, 0.1)?;
    if drift > 1e-8 || defect > 1e-10 {
        return Err(Error::Numerical(format!(
            "energy drift {drift:e}, semigroup defect {defect:e}"
        )));
    }
    Ok(format!(
        "energy drift {drift:e}, semigroup defect {defect:e}"
    ))
}

/// A small shallow-water ring against its serial reference.
pub fn check_rswe_end_to_end(seed: u64, make_slot: SlotFactory) -> Result<String> {
    let cfg = RunConfig {
        t_end: 0.8,
        ranks: 4,
        seed,
        rswe: RsweConfig {
            resolution: 8,
            coarse_modes: Some(4),
            ..RsweConfig::default()
        },
        ..RunConfig::desk_rswe()
    };
    let run = run_parareal_with(&cfg, make_slot)?;
    if !run.metrics.converged() {
        return Err(Error::Numerical(format!(
            "final error {:e}",
            run.metrics.final_error_min
        )));
    }
    Ok(format!(
        "8², M=8, final error {:e}",
        run.metrics.final_error_min
    ))
}

pub fn verify(seed: u64) -> VerifyReport {
    verify_with(seed, &default_slot)
}

/// Runs every check with slots from `make_slot`.
pub fn verify_with(seed: u64, make_slot: SlotFactory) -> VerifyReport {
    let checks: Vec<(&'static str, Result<String>)> = vec![
        ("exactness_in_k", check_exactness_in_k(make_slot)),
        ("collapse", check_collapse(make_slot)),
        ("termination", check_termination(seed, make_slot)),
        ("locality", check_locality(seed, make_slot)),
        ("conservation", check_conservation(seed, make_slot)),
        ("determinism", check_determinism(seed, make_slot)),
        ("stale_drop", check_stale_drop()),
        ("physics", check_physics()),
        ("rswe_end_to_end", check_rswe_end_to_end(seed, make_slot)),
    ];
    VerifyReport {
        checks: checks
            .into_iter()
            .map(|(name, r)| match r {
                Ok(detail) => CheckResult {
                    name,
                    passed: true,
                    detail,
                },
                Err(e) => CheckResult {
                    name,
                    passed: false,
                    detail: e.to_string(),
                },
            })
            .collect(),
    }
}
