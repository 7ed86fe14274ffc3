use std::fmt::Write as _;

use super::config::RunConfig;
use super::metrics::RunMetrics;
use super::run::run_parareal;
use crate::error::Error;

pub const REPORT_HEADER: &str = "solver,resolution,ranks,intervals,maxIterations,totalFineSteps,modeledSpeedup,finalErrorL2,finalErrorLmax";

pub struct SweepRow {
    pub config: RunConfig,
    pub result: Result<RunMetrics, Error>,
}

#[derive(Default)]
pub struct SweepReport {
    pub rows: Vec<SweepRow>,
}

impl SweepReport {
    pub fn failures(&self) -> impl Iterator<Item = (&RunConfig, &Error)> {
        self.rows
            .iter()
            .filter_map(|r| r.result.as_ref().err().map(|e| (&r.config, e)))
    }

    /// Header plus one line per run; failed runs keep their identifying
    /// columns and leave the measured ones empty.
    pub fn to_csv(&self) -> String {
        let mut s = String::new();
        s.push_str(REPORT_HEADER);
        s.push('\n');
        for row in &self.rows {
            let c = &row.config;
            let resolution = c
                .resolution()
                .map(|n| n.to_string())
                .unwrap_or_else(|| "-".into());
            let intervals = c.intervals().map(|m| m.to_string()).unwrap_or_default();
            let _ = write!(
                s,
                "{},{},{},{},",
                c.solver.name(),
                resolution,
                c.ranks,
                intervals
            );
            match &row.result {
                Ok(m) => {
                    let _ = writeln!(
                        s,
                        "{},{},{},{},{}",
                        m.max_iterations(),
                        m.total_fine_steps,
                        m.speedup.speedup(),
                        m.final_error_l2,
                        m.final_error_lmax
                    );
                }
                Err(_) => s.push_str(",,,,\n"),
            }
        }
        s
    }
}

/// Runs every config; a failing run is recorded and the sweep continues.
/// Per-run output files are not written.
pub fn sweep(configs: &[RunConfig]) -> SweepReport {
    let rows = configs
        .iter()
        .map(|cfg| {
            let mut quiet = cfg.clone();
            quiet.metrics_out = None;
            quiet.trace_out = None;
            quiet.dump_fields = None;
            SweepRow {
                config: cfg.clone(),
                result: run_parareal(&quiet).map(|r| r.metrics),
            }
        })
        .collect();
    SweepReport { rows }
}
