use std::path::PathBuf;

use pint::controller::{Finalization, SchedulerKind};
use pint::harness::verify::check_exactness_in_k;
use pint::harness::{
    self, default_slot, run_parareal, run_serial_reference, verify_with, RunConfig, SolverKind,
    SweepConfig, REPORT_HEADER,
};
use pint::parareal::{
    ConvergenceCriterion, LayoutTag, Propagator, PropagatorSlot, StateVector, TimeWindow,
};
use pint::solvers::{RsweConfig, RswePropagator};
use pint::{Error, Result};

fn configs_dir() -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("../../configs")
}

fn dahlquist(intervals: usize, ranks: usize) -> RunConfig {
    RunConfig {
        solver: SolverKind::Dahlquist,
        t_end: intervals as f64 * 0.1,
        ranks,
        ..RunConfig::default()
    }
}

/// One interval of the pipelined ring, replayed on scalars: how many
/// corrections it took, whether it ended as window head, its final value, and
/// the messages it handed to its successor.
struct Replayed {
    iterations: u32,
    head: bool,
    value: f64,
    sent: Vec<f64>,
}

/// Independent replay of the ring for `P ≥ M` on `du/dt = −u` with an exact
/// fine step and a forward Euler coarse step of 0.1.
fn pipeline_oracle(intervals: usize, u0: f64, threshold: f64) -> Vec<Replayed> {
    let f = |u: f64| u * (-0.1f64).exp();
    let g = |u: f64| u + -0.1 * u;
    let mut out = vec![Replayed {
        iterations: 0,
        head: true,
        value: f(u0),
        sent: vec![g(u0), f(u0)],
    }];
    for _ in 1..intervals {
        let msgs = out.last().unwrap().sent.clone();
        let last = msgs.len() - 1;
        let mut outputs = vec![g(msgs[0])];
        for i in 1..=last {
            outputs.push(g(msgs[i]) + (f(msgs[i - 1]) - g(msgs[i - 1])));
            if i < last {
                continue;
            }
            let estimate = if i == 1 {
                f64::INFINITY
            } else {
                (outputs[i] - outputs[i - 1]).abs()
            };
            let shift = (msgs[i] - msgs[i - 1]).abs();
            let converged = estimate < threshold && shift < threshold;
            let mut sent = outputs.clone();
            let value = if converged {
                outputs[i]
            } else {
                sent.push(f(msgs[i]));
                f(msgs[i])
            };
            out.push(Replayed {
                iterations: i as u32,
                head: !converged,
                value,
                sent,
            });
        }
    }
    out
}

#[test]
fn serial_reference_at_t1() {
    let cfg = dahlquist(10, 1);
    let r = run_serial_reference(&cfg).unwrap();
    assert!((r.state.values()[0] - 0.367879).abs() < 1e-6);
    assert_eq!(r.fine_steps, 10);
}

/// The replay assumes every follower sees every message. An idle rank that
/// drains a queue of two skips ahead, so only drop-free runs are compared.
#[test]
fn ring_iterations_match_the_pipeline_oracle() {
    for (m, threshold) in [
        (4, 1e-5),
        (4, 1e-8),
        (4, 1e-3),
        (2, 1e-5),
        (8, 1e-5),
        (8, 1e-10),
    ] {
        let oracle = pipeline_oracle(m, 1.0, threshold);
        for scheduler in [SchedulerKind::Deterministic, SchedulerKind::Concurrent] {
            let mut compared = 0;
            for seed in 0..12 {
                let cfg = RunConfig {
                    threshold,
                    scheduler,
                    seed,
                    ..dahlquist(m, m)
                };
                let run = run_parareal(&cfg).unwrap();
                let label = format!("M=P={m} eps={threshold:e} {scheduler:?} seed={seed}");
                assert!(run.metrics.converged(), "{label}");
                if run.metrics.envelopes_dropped > 0 {
                    continue;
                }
                compared += 1;
                let records = run.outcome.intervals();
                assert_eq!(records.len(), m, "{label}");
                for (r, o) in records.iter().zip(&oracle) {
                    assert_eq!(
                        r.iterations, o.iterations,
                        "{label} interval {}",
                        r.interval
                    );
                    assert_eq!(
                        r.finalization == Finalization::WindowHead,
                        o.head,
                        "{label} interval {}",
                        r.interval
                    );
                }
                let got = run.outcome.final_output().unwrap().values()[0];
                let want = oracle.last().unwrap().value;
                assert!(
                    (got - want).abs() <= 1e-12 * want.abs(),
                    "{label}: {got} vs {want}"
                );
            }
            if scheduler == SchedulerKind::Deterministic {
                assert!(
                    compared > 0,
                    "M=P={m} eps={threshold:e}: every seed dropped"
                );
            }
        }
    }
}

#[test]
fn four_by_four_counts() {
    let oracle = pipeline_oracle(4, 1.0, 1e-5);
    let counts: Vec<u32> = oracle.iter().map(|o| o.iterations).collect();
    let run = run_parareal(&dahlquist(4, 4)).unwrap();
    assert_eq!(run.metrics.envelopes_dropped, 0);
    assert_eq!(run.metrics.iterations, counts);
    assert!(run.metrics.final_error_min < 1e-5);
}

#[test]
fn fine_steps_add_up() {
    for cfg in [
        dahlquist(40, 8),
        dahlquist(16, 3),
        dahlquist(7, 1),
        dahlquist(400, 8),
    ] {
        let run = run_parareal(&cfg).unwrap();
        let m = &run.metrics;
        let iterations: u64 = m.iterations.iter().map(|&k| k as u64).sum();
        assert_eq!(m.total_fine_steps, iterations + m.window_heads as u64);
        assert_eq!(m.total_fine_steps, m.rank_fine_steps.iter().sum::<u64>());
        assert!(m.work_conserved);
        assert_eq!(m.iterations.len(), m.intervals);
    }
}

#[test]
fn rswe_zero_state_stays_zero() {
    let mut cfg = RunConfig::desk_rswe();
    cfg.t_end = 0.4;
    cfg.ranks = 2;
    cfg.rswe.gaussian_amplitude = 0.0;
    let run = run_parareal(&cfg).unwrap();
    assert_eq!(run.outcome.final_output().unwrap().norm_max(), 0.0);
    assert_eq!(run.metrics.final_error_min, 0.0);
}

#[test]
fn rswe_single_interval_is_one_fine_step() {
    let mut cfg = RunConfig::desk_rswe();
    cfg.t_end = 0.1;
    cfg.ranks = 1;
    let serial = run_serial_reference(&cfg).unwrap().state;
    let mut p = RswePropagator::new(cfg.rswe, 0.1).unwrap();
    let u0 = p.initial_value();
    let one = p
        .fine(&u0, &TimeWindow::for_interval(0, 0.1).unwrap())
        .unwrap();
    assert_eq!(serial.values(), one.values());
    let run = run_parareal(&cfg).unwrap();
    assert_eq!(run.outcome.final_output().unwrap().values(), one.values());
}

#[test]
fn per_rank_work_drops_from_four_ranks_on() {
    let mut base = RunConfig::desk_rswe();
    base.t_end = 2.0;
    base.rswe.resolution = 8;
    base.rswe.coarse_modes = Some(4);
    let sweep = SweepConfig {
        base: Some(base),
        ranks: vec![1, 2, 4, 8],
        ..SweepConfig::default()
    };
    let report = harness::sweep(&sweep.expand());
    assert_eq!(report.failures().count(), 0);
    let per_rank: Vec<f64> = report
        .rows
        .iter()
        .map(|row| {
            let m = row.result.as_ref().unwrap();
            assert!(m.converged());
            m.total_fine_steps as f64 / m.ranks as f64
        })
        .collect();
    assert!(per_rank[3] <= per_rank[2], "{per_rank:?}");

    let csv = report.to_csv();
    let mut lines = csv.lines();
    assert_eq!(lines.next(), Some(REPORT_HEADER));
    let ranks: Vec<&str> = lines.map(|l| l.split(',').nth(2).unwrap()).collect();
    assert_eq!(ranks, ["1", "2", "4", "8"]);
}

#[test]
fn shipped_configs_converge() {
    for name in ["dahlquist.toml", "rswe_desk.toml"] {
        let cfg = RunConfig::load(&configs_dir().join(name)).unwrap();
        let run = run_parareal(&cfg).unwrap();
        assert!(
            run.metrics.final_error_min < cfg.threshold || run.metrics.final_error_min == 0.0,
            "{name}: {:e}",
            run.metrics.final_error_min
        );
    }
    let sweep = SweepConfig::load(&configs_dir().join("sweep.toml")).unwrap();
    let runs = sweep.expand();
    assert_eq!(
        runs.iter().map(|c| c.ranks).collect::<Vec<_>>(),
        [1, 2, 4, 8]
    );
}

#[test]
fn shipped_desk_config_is_the_preset() {
    let cfg = RunConfig::load(&configs_dir().join("rswe_desk.toml")).unwrap();
    assert_eq!(cfg, RunConfig::desk_rswe());
}

#[test]
fn outputs_are_written() {
    let dir = tempfile::tempdir().unwrap();
    let mut cfg = RunConfig::desk_rswe();
    cfg.t_end = 0.3;
    cfg.ranks = 2;
    cfg.rswe.resolution = 8;
    cfg.rswe.coarse_modes = Some(4);
    cfg.metrics_out = Some(dir.path().join("m.txt"));
    cfg.trace_out = Some(dir.path().join("t.csv"));
    cfg.dump_fields = Some(dir.path().join("fields"));
    run_parareal(&cfg).unwrap();

    let metrics = std::fs::read_to_string(dir.path().join("m.txt")).unwrap();
    assert!(metrics.lines().all(|l| l.contains('=')));
    assert!(metrics.contains("solver=rswe\n"));
    assert!(!metrics.contains("wallclock"));

    let trace = std::fs::read_to_string(dir.path().join("t.csv")).unwrap();
    assert!(!trace.is_empty());
    for line in trace.lines() {
        let cols: Vec<&str> = line.split(',').collect();
        assert_eq!(cols.len(), 8, "{line}");
        assert!(["send", "recv", "drop"].contains(&cols[1]), "{line}");
    }

    let dumps = std::fs::read_dir(dir.path().join("fields"))
        .unwrap()
        .count();
    // Three fields for every kept output.
    assert!(dumps >= 9 && dumps.is_multiple_of(3), "{dumps}");
}

#[test]
fn concurrent_runs_report_wallclock() {
    let cfg = RunConfig {
        scheduler: SchedulerKind::Concurrent,
        ..dahlquist(16, 4)
    };
    let run = run_parareal(&cfg).unwrap();
    assert!(run.metrics.wallclock_secs.is_some());
    assert!(run.metrics.to_record().contains("wallclock_secs="));
}

#[test]
fn bad_configs_are_config_errors() {
    let mut cfg = dahlquist(4, 0);
    assert_eq!(run_parareal(&cfg).err().map(|e| e.exit_code()), Some(2));
    cfg.ranks = 2;
    cfg.t_end = 0.35;
    assert!(matches!(
        run_parareal(&cfg),
        Err(Error::Configuration { .. })
    ));
    let mut cfg = RunConfig::desk_rswe();
    cfg.rswe.dt_fine = 0.003;
    assert!(matches!(
        run_parareal(&cfg),
        Err(Error::Configuration { .. })
    ));
}

#[test]
fn verify_is_reproducible() {
    let a = harness::verify(1);
    let b = harness::verify(1);
    assert!(a.all_passed(), "{}", a.to_text());
    assert_eq!(a.to_text(), b.to_text());
    assert_eq!(a.checks.len(), 9);
}

/// Applies the correction with the wrong sign: `G(new) − (F(old) − G(old))`.
struct WrongSign(Box<dyn PropagatorSlot>);

impl PropagatorSlot for WrongSign {
    fn layout(&self) -> LayoutTag {
        self.0.layout()
    }
    fn window(&self) -> Option<TimeWindow> {
        self.0.window()
    }
    fn set_simulation_timeframe(&mut self, window: TimeWindow) -> Result<()> {
        self.0.set_simulation_timeframe(window)
    }
    fn setup_initial_values(&mut self) -> Result<()> {
        self.0.setup_initial_values()
    }
    fn set_simulation_data(&mut self, data: StateVector) -> Result<()> {
        self.0.set_simulation_data(data)
    }
    fn run_timestep_fine(&mut self) -> Result<()> {
        self.0.run_timestep_fine()
    }
    fn run_timestep_coarse(&mut self) -> Result<()> {
        self.0.run_timestep_coarse()
    }
    fn compute_difference(&mut self) -> Result<()> {
        self.0.compute_difference()
    }
    fn compute_output_data(&mut self) -> Result<()> {
        self.0.compute_output_data()
    }
    fn output_data(&self) -> Result<StateVector> {
        let right = self.0.output_data()?;
        self.0
            .data_timestep_coarse()?
            .scaled(2.0)
            .checked_sub(&right)
    }
    fn data_timestep_fine(&self) -> Result<StateVector> {
        self.0.data_timestep_fine()
    }
    fn data_timestep_coarse(&self) -> Result<StateVector> {
        self.0.data_timestep_coarse()
    }
    fn start_data(&self) -> Result<StateVector> {
        self.0.start_data()
    }
    fn error_estimation(&self, criterion: &ConvergenceCriterion) -> Result<f64> {
        self.0.error_estimation(criterion)
    }
}

fn wrong_sign(cfg: &RunConfig) -> Result<Box<dyn PropagatorSlot>> {
    Ok(Box::new(WrongSign(default_slot(cfg)?)))
}

#[test]
fn wrong_sign_breaks_exactness() {
    assert!(check_exactness_in_k(&default_slot).is_ok());
    assert!(check_exactness_in_k(&wrong_sign).is_err());
    let report = verify_with(0, &wrong_sign);
    let check = report.check("exactness_in_k").unwrap();
    assert!(!check.passed);
    assert!(report.to_text().contains("FAIL exactness_in_k"));
    assert!(!report.all_passed());
}

#[test]
fn sweep_keeps_failed_rows() {
    let sweep = SweepConfig {
        runs: vec![dahlquist(4, 2), dahlquist(4, 0), RunConfig::default()],
        ..SweepConfig::default()
    };
    let report = harness::sweep(&sweep.expand()[..2]);
    assert_eq!(report.failures().count(), 1);
    let csv = report.to_csv();
    let rows: Vec<&str> = csv.lines().collect();
    assert_eq!(rows.len(), 3);
    assert!(rows[2].starts_with("dahlquist,-,0,"), "{}", rows[2]);
}

#[test]
fn rswe_config_validation_through_toml() {
    let text = "solver = \"rswe\"\nt_end = 0.2\n[rswe]\nresolution = 12\n";
    assert!(matches!(
        RunConfig::from_toml_str(text),
        Err(Error::Configuration { .. })
    ));
    assert!(RunConfig::from_toml_str("bogus = 1").is_err());
    let ok = RsweConfig {
        resolution: 32,
        ..RsweConfig::default()
    };
    assert!(ok.validate(0.1).is_ok());
}
