use std::fs;
use std::path::{Path, PathBuf};
use std::str::FromStr;
use std::time::Duration;

use serde::{Deserialize, Serialize};

use crate::controller::{GlobalPlan, SchedulerKind, StepCosts};
use crate::error::{Error, Result};
use crate::parareal::{ConvergenceCriterion, NormRule, DEFAULT_THRESHOLD};
use crate::solvers::{CoarseMode, DahlquistConfig, RsweConfig};

/// Tolerance on `T/ΔT` being an integer.
pub const INTERVAL_COUNT_TOL: f64 = 1e-9;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum SolverKind {
    Dahlquist,
    Rswe,
}

impl SolverKind {
    pub fn name(self) -> &'static str {
        match self {
            SolverKind::Dahlquist => "dahlquist",
            SolverKind::Rswe => "rswe",
        }
    }
}

impl FromStr for SolverKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "dahlquist" => Ok(SolverKind::Dahlquist),
            "rswe" => Ok(SolverKind::Rswe),
            other => Err(Error::config("solver", format!("unknown solver {other:?}"))),
        }
    }
}

impl FromStr for SchedulerKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "det" | "deterministic" => Ok(SchedulerKind::Deterministic),
            "conc" | "concurrent" => Ok(SchedulerKind::Concurrent),
            other => Err(Error::config(
                "scheduler",
                format!("unknown scheduler {other:?}"),
            )),
        }
    }
}

/// One run: solver, time decomposition, ring size, criterion and outputs.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RunConfig {
    pub solver: SolverKind,
    pub t_end: f64,
    pub dt_coarse: f64,
    pub ranks: usize,
    pub threshold: f64,
    pub norm: NormRule,
    pub scheduler: SchedulerKind,
    pub seed: u64,
    /// Abstract cost of one fine application in the speedup model.
    pub cost_fine: f64,
    /// Abstract cost of one coarse application in the speedup model.
    pub cost_coarse: f64,
    pub timeout_secs: Option<f64>,
    pub metrics_out: Option<PathBuf>,
    pub trace_out: Option<PathBuf>,
    pub dump_fields: Option<PathBuf>,
    pub dahlquist: DahlquistConfig,
    pub rswe: RsweConfig,
}

impl Default for RunConfig {
    fn default() -> Self {
        RunConfig {
            solver: SolverKind::Dahlquist,
            t_end: 40.0,
            dt_coarse: 0.1,
            ranks: 8,
            threshold: DEFAULT_THRESHOLD,
            norm: NormRule::MinOfBoth,
            scheduler: SchedulerKind::Deterministic,
            seed: 0,
            cost_fine: 1.0,
            cost_coarse: 0.01,
            timeout_secs: None,
            metrics_out: None,
            trace_out: None,
            dump_fields: None,
            dahlquist: DahlquistConfig::default(),
            rswe: RsweConfig::default(),
        }
    }
}

/// Values given on the command line; each one present replaces the file value.
#[derive(Clone, Debug, Default)]
pub struct Overrides {
    pub solver: Option<SolverKind>,
    pub ranks: Option<usize>,
    pub t_end: Option<f64>,
    pub dt_coarse: Option<f64>,
    pub dt_fine: Option<f64>,
    pub resolution: Option<usize>,
    pub threshold: Option<f64>,
    pub norm: Option<NormRule>,
    pub scheduler: Option<SchedulerKind>,
    pub seed: Option<u64>,
    pub metrics_out: Option<PathBuf>,
    pub trace_out: Option<PathBuf>,
    pub dump_fields: Option<PathBuf>,
    pub timeout_secs: Option<f64>,
}

impl RunConfig {
    /// The scaled shallow-water experiment: 16² grid, T = 4, eight ranks,
    /// coarse propagator on the lowest 8×8 modes.
    pub fn desk_rswe() -> Self {
        RunConfig {
            solver: SolverKind::Rswe,
            t_end: 4.0,
            ranks: 8,
            rswe: RsweConfig {
                resolution: 16,
                coarse: CoarseMode::Truncated,
                coarse_modes: Some(8),
                ..RsweConfig::default()
            },
            ..RunConfig::default()
        }
    }

    pub fn from_toml_str(text: &str) -> Result<Self> {
        let cfg: RunConfig = toml::from_str(text).map_err(|e| toml_error(&e))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = fs::read_to_string(path)
            .map_err(|e| Error::config("config", format!("{}: {e}", path.display())))?;
        Self::from_toml_str(&text)
    }

    /// Applies command-line values and revalidates.
    pub fn with_overrides(mut self, o: &Overrides) -> Result<Self> {
        if let Some(v) = o.solver {
            self.solver = v;
        }
        if let Some(v) = o.ranks {
            self.ranks = v;
        }
        if let Some(v) = o.t_end {
            self.t_end = v;
        }
        if let Some(v) = o.dt_coarse {
            self.dt_coarse = v;
        }
        if let Some(v) = o.dt_fine {
            self.rswe.dt_fine = v;
            let ratio = self.dt_coarse / v;
            if ratio.is_finite() && ratio >= 1.0 {
                self.dahlquist.fine_steps_per_coarse = ratio.round() as usize;
            }
        }
        if let Some(v) = o.resolution {
            self.rswe.resolution = v;
        }
        if let Some(v) = o.threshold {
            self.threshold = v;
        }
        if let Some(v) = o.norm {
            self.norm = v;
        }
        if let Some(v) = o.scheduler {
            self.scheduler = v;
        }
        if let Some(v) = o.seed {
            self.seed = v;
        }
        if let Some(v) = &o.metrics_out {
            self.metrics_out = Some(v.clone());
        }
        if let Some(v) = &o.trace_out {
            self.trace_out = Some(v.clone());
        }
        if let Some(v) = &o.dump_fields {
            self.dump_fields = Some(v.clone());
        }
        if let Some(v) = o.timeout_secs {
            self.timeout_secs = Some(v);
        }
        self.validate()?;
        Ok(self)
    }

    /// Number of coarse intervals `M = T/ΔT`.
    pub fn intervals(&self) -> Result<usize> {
        if !(self.dt_coarse > 0.0 && self.dt_coarse.is_finite()) {
            return Err(Error::config("dt_coarse", "must be positive and finite"));
        }
        if !(self.t_end > 0.0 && self.t_end.is_finite()) {
            return Err(Error::config("t_end", "must be positive and finite"));
        }
        let ratio = self.t_end / self.dt_coarse;
        let m = ratio.round();
        if m < 1.0 || (ratio - m).abs() > INTERVAL_COUNT_TOL * ratio.max(1.0) {
            return Err(Error::config(
                "t_end",
                format!(
                    "T = {} is not an integer multiple of ΔT = {}",
                    self.t_end, self.dt_coarse
                ),
            ));
        }
        Ok(m as usize)
    }

    pub fn criterion(&self) -> ConvergenceCriterion {
        ConvergenceCriterion::new(self.threshold, self.norm)
    }

    pub fn plan(&self) -> Result<GlobalPlan> {
        GlobalPlan::new(
            self.intervals()?,
            self.dt_coarse,
            self.ranks,
            self.criterion(),
        )
    }

    pub fn costs(&self) -> StepCosts {
        StepCosts {
            fine: self.cost_fine,
            coarse: self.cost_coarse,
        }
    }

    pub fn timeout(&self) -> Option<Duration> {
        self.timeout_secs.map(Duration::from_secs_f64)
    }

    /// Grid size for the report; `None` for the scalar problem.
    pub fn resolution(&self) -> Option<usize> {
        match self.solver {
            SolverKind::Dahlquist => None,
            SolverKind::Rswe => Some(self.rswe.resolution),
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.ranks == 0 {
            return Err(Error::config("ranks", "need at least one rank"));
        }
        self.intervals()?;
        if !(self.threshold >= 0.0 && self.threshold.is_finite()) {
            return Err(Error::config("threshold", "must be finite and nonnegative"));
        }
        if !(self.cost_fine > 0.0 && self.cost_fine.is_finite()) {
            return Err(Error::config("cost_fine", "must be positive"));
        }
        if !(self.cost_coarse >= 0.0 && self.cost_coarse.is_finite()) {
            return Err(Error::config("cost_coarse", "must be nonnegative"));
        }
        if let Some(t) = self.timeout_secs {
            if !(t > 0.0 && t.is_finite()) {
                return Err(Error::config("timeout_secs", "must be positive"));
            }
        }
        match self.solver {
            SolverKind::Dahlquist => {
                if self.dump_fields.is_some() {
                    return Err(Error::config(
                        "dump_fields",
                        "field dumps are only available for rswe",
                    ));
                }
                self.dahlquist.validate(self.dt_coarse)
            }
            SolverKind::Rswe => self.rswe.validate(self.dt_coarse),
        }
    }
}

/// A list of runs: an explicit `[[runs]]` array plus the cross product of
/// `ranks × resolutions` applied to `base`.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SweepConfig {
    pub report_out: Option<PathBuf>,
    pub base: Option<RunConfig>,
    pub ranks: Vec<usize>,
    pub resolutions: Vec<usize>,
    pub runs: Vec<RunConfig>,
}

impl SweepConfig {
    pub fn from_toml_str(text: &str) -> Result<Self> {
        toml::from_str(text).map_err(|e| toml_error(&e))
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = fs::read_to_string(path)
            .map_err(|e| Error::config("config", format!("{}: {e}", path.display())))?;
        Self::from_toml_str(&text)
    }

    /// Expanded run list, in report order. Invalid entries are kept so the
    /// sweep can report them per row.
    pub fn expand(&self) -> Vec<RunConfig> {
        let mut out = Vec::new();
        if let Some(base) = &self.base {
            let ranks = if self.ranks.is_empty() {
                vec![base.ranks]
            } else {
                self.ranks.clone()
            };
            let resolutions = if self.resolutions.is_empty() {
                vec![base.rswe.resolution]
            } else {
                self.resolutions.clone()
            };
            for &n in &resolutions {
                for &p in &ranks {
                    let mut cfg = base.clone();
                    cfg.ranks = p;
                    cfg.rswe.resolution = n;
                    out.push(cfg);
                }
            }
        }
        out.extend(self.runs.iter().cloned());
        out
    }
}

fn toml_error(e: &toml::de::Error) -> Error {
    Error::config("config", e.message())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn defaults() {
        let c = RunConfig::default();
        assert_eq!(c.t_end, 40.0);
        assert_eq!(c.dt_coarse, 0.1);
        assert_eq!(c.threshold, 1e-5);
        assert_eq!(c.norm, NormRule::MinOfBoth);
        assert_eq!(c.intervals().unwrap(), 400);
        c.validate().unwrap();
        let empty = RunConfig::from_toml_str("").unwrap();
        assert_eq!(empty, c);
    }

    #[test]
    fn non_integer_interval_count() {
        let c = RunConfig {
            dt_coarse: 0.3,
            ..RunConfig::default()
        };
        match c.validate() {
            Err(Error::Configuration { field, .. }) => assert_eq!(field, "t_end"),
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn zero_ranks() {
        let err = RunConfig::from_toml_str("ranks = 0").unwrap_err();
        assert!(matches!(err, Error::Configuration { ref field, .. } if field == "ranks"));
    }

    #[test]
    fn toml_sections_and_overrides() {
        let text = r#"
            solver = "rswe"
            t_end = 0.4
            ranks = 2
            norm = "l2"
            scheduler = "conc"
            [rswe]
            resolution = 8
            coarse_modes = 4
        "#;
        let c = RunConfig::from_toml_str(text).unwrap();
        assert_eq!(c.solver, SolverKind::Rswe);
        assert_eq!(c.rswe.resolution, 8);
        assert_eq!(c.rswe.coarse_modes, Some(4));
        assert_eq!(c.scheduler, SchedulerKind::Concurrent);
        let o = Overrides {
            ranks: Some(4),
            resolution: Some(16),
            norm: Some(NormRule::Lmax),
            ..Overrides::default()
        };
        let c = c.with_overrides(&o).unwrap();
        assert_eq!(
            (c.ranks, c.rswe.resolution, c.norm),
            (4, 16, NormRule::Lmax)
        );
        assert!(RunConfig::from_toml_str("bogus = 1").is_err());
    }

    #[test]
    fn dt_fine_override_reaches_both_solvers() {
        let o = Overrides {
            dt_fine: Some(0.002),
            ..Overrides::default()
        };
        let c = RunConfig::default().with_overrides(&o).unwrap();
        assert_eq!(c.rswe.dt_fine, 0.002);
        assert_eq!(c.dahlquist.fine_steps_per_coarse, 50);
    }

    #[test]
    fn desk_preset_is_valid() {
        let c = RunConfig::desk_rswe();
        c.validate().unwrap();
        assert_eq!(c.intervals().unwrap(), 40);
    }

    #[test]
    fn sweep_expansion() {
        let text = r#"
            ranks = [1, 2]
            resolutions = [8, 16]
            [base]
            solver = "rswe"
            t_end = 0.2
            [[runs]]
            t_end = 1.0
        "#;
        let s = SweepConfig::from_toml_str(text).unwrap();
        let runs = s.expand();
        assert_eq!(runs.len(), 5);
        assert_eq!(
            runs[..4]
                .iter()
                .map(|r| (r.rswe.resolution, r.ranks))
                .collect::<Vec<_>>(),
            vec![(8, 1), (8, 2), (16, 1), (16, 2)]
        );
        assert_eq!(runs[4].solver, SolverKind::Dahlquist);
        assert!(SweepConfig::default().expand().is_empty());
    }
}
