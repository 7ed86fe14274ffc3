use crate::error::{Error, Result};

/// Relative tolerance for matching a window length against the coarse step.
pub const WINDOW_LENGTH_RTOL: f64 = 1e-12;

/// One coarse time interval `[t_start, t_end]` with its index in the plan.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct TimeWindow {
    pub t_start: f64,
    pub t_end: f64,
    pub interval: usize,
}

impl TimeWindow {
    pub fn new(t_start: f64, t_end: f64, interval: usize) -> Result<Self> {
        if !(t_start.is_finite() && t_end.is_finite()) {
            return Err(Error::config("window", "non-finite bounds"));
        }
        if t_end <= t_start {
            return Err(Error::config(
                "window",
                format!("t_end ({t_end}) must exceed t_start ({t_start})"),
            ));
        }
        Ok(TimeWindow {
            t_start,
            t_end,
            interval,
        })
    }

    /// The window `[n·dt, (n+1)·dt]`, computed by multiplication so that
    /// boundaries do not drift with the interval index.
    pub fn for_interval(interval: usize, coarse_step: f64) -> Result<Self> {
        TimeWindow::new(
            interval as f64 * coarse_step,
            (interval + 1) as f64 * coarse_step,
            interval,
        )
    }

    pub fn length(&self) -> f64 {
        self.t_end - self.t_start
    }

    pub fn matches_step(&self, coarse_step: f64) -> bool {
        (self.length() - coarse_step).abs()
            <= WINDOW_LENGTH_RTOL * coarse_step.abs().max(self.t_end.abs())
    }

    pub fn check_step(&self, coarse_step: f64) -> Result<()> {
        if self.matches_step(coarse_step) {
            Ok(())
        } else {
            Err(Error::config(
                "window",
                format!(
                    "length {} of interval {} differs from the coarse step {}",
                    self.length(),
                    self.interval,
                    coarse_step
                ),
            ))
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn reversed_window_is_rejected() {
        assert!(matches!(
            TimeWindow::new(0.2, 0.1, 0),
            Err(Error::Configuration { .. })
        ));
        assert!(TimeWindow::new(0.1, 0.1, 0).is_err());
    }

    #[test]
    fn interval_windows_match_step_far_out() {
        for n in [0, 3, 11, 399] {
            let w = TimeWindow::for_interval(n, 0.1).unwrap();
            assert!(w.matches_step(0.1), "interval {n}: {w:?}");
        }
        let w = TimeWindow::new(0.0, 0.3, 0).unwrap();
        assert!(w.check_step(0.1).is_err());
    }
}
