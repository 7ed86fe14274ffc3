//! Serial drivers: the coarse predictor sweep, the fine reference solution,
//! and synchronous Parareal correction sweeps.

use super::slot::{Propagator, PropagatorSlot};
use super::state::StateVector;
use super::window::TimeWindow;
use crate::error::{Error, Result};

fn check_finite(v: &StateVector, what: &str) -> Result<()> {
    if v.is_finite() {
        Ok(())
    } else {
        Err(Error::Numerical(format!(
            "{what} produced non-finite values"
        )))
    }
}

/// Serial application of the coarse propagator over consecutive windows.
///
/// Returns `[U_0, U_1, ..., U_N]` with `U_0 = u0`.
pub fn coarse_sweep<P: Propagator + ?Sized>(
    propagator: &mut P,
    u0: &StateVector,
    windows: &[TimeWindow],
) -> Result<Vec<StateVector>> {
    if windows.is_empty() {
        return Err(Error::config(
            "intervals",
            "coarse sweep needs at least one interval",
        ));
    }
    let mut out = Vec::with_capacity(windows.len() + 1);
    out.push(u0.clone());
    for w in windows {
        propagator.prepare_window(w)?;
        let next = propagator.coarse(out.last().expect("non-empty"), w)?;
        check_finite(&next, "coarse sweep")?;
        out.push(next);
    }
    Ok(out)
}

/// Fine solution at `t_end`, obtained by applying the fine propagator window
/// by window (windows of length `coarse_step`) starting from `u0` at `t_start`.
pub fn serial_fine_reference<P: Propagator + ?Sized>(
    propagator: &mut P,
    u0: &StateVector,
    t_start: f64,
    t_end: f64,
    coarse_step: f64,
) -> Result<StateVector> {
    Ok(
        serial_fine_trajectory(propagator, u0, t_start, t_end, coarse_step)?
            .pop()
            .expect("trajectory holds the start value"),
    )
}

/// Like [`serial_fine_reference`] but keeps the value at every window boundary.
pub fn serial_fine_trajectory<P: Propagator + ?Sized>(
    propagator: &mut P,
    u0: &StateVector,
    t_start: f64,
    t_end: f64,
    coarse_step: f64,
) -> Result<Vec<StateVector>> {
    if t_end < t_start {
        return Err(Error::config("t_end", "must not precede t_start"));
    }
    let span = t_end - t_start;
    let mut out = vec![u0.clone()];
    if span == 0.0 {
        return Ok(out);
    }
    let count = (span / coarse_step).round();
    if count < 1.0 || ((count * coarse_step - span).abs() > 1e-9 * span) {
        return Err(Error::config(
            "dt_coarse",
            format!("span {span} is not an integer multiple of {coarse_step}"),
        ));
    }
    for n in 0..count as usize {
        let w = TimeWindow::new(
            t_start + n as f64 * coarse_step,
            t_start + (n + 1) as f64 * coarse_step,
            n,
        )?;
        propagator.prepare_window(&w)?;
        let next = propagator.fine(out.last().expect("non-empty"), &w)?;
        check_finite(&next, "fine reference")?;
        out.push(next);
    }
    Ok(out)
}

/// Synchronous Parareal: one slot per interval, iterated through the slot
/// call sequence the decentralized controller uses.
///
/// `iterates[k][n]` is `U_n^k`; `iterates[0]` is the coarse predictor.
pub struct PararealSweeps<'a> {
    slots: &'a mut [Box<dyn PropagatorSlot>],
    iterates: Vec<Vec<StateVector>>,
}

impl<'a> PararealSweeps<'a> {
    /// Assigns window `n` to `slots[n]` and runs the coarse predictor sweep.
    pub fn new(
        slots: &'a mut [Box<dyn PropagatorSlot>],
        u0: StateVector,
        coarse_step: f64,
    ) -> Result<Self> {
        if slots.is_empty() {
            return Err(Error::config("intervals", "need at least one slot"));
        }
        let mut predictor = vec![u0];
        for (n, slot) in slots.iter_mut().enumerate() {
            slot.set_simulation_timeframe(TimeWindow::for_interval(n, coarse_step)?)?;
            slot.set_simulation_data(predictor[n].clone())?;
            slot.run_timestep_coarse()?;
            predictor.push(slot.data_timestep_coarse()?);
        }
        Ok(PararealSweeps {
            slots,
            iterates: vec![predictor],
        })
    }

    /// One correction sweep:
    /// `U_{n+1}^{k+1} = G(U_n^{k+1}) + F(U_n^k) − G(U_n^k)`.
    pub fn iterate(&mut self) -> Result<&[StateVector]> {
        let prev = self.iterates.last().expect("predictor present");
        // Fine solves over all intervals are independent of each other.
        for (n, slot) in self.slots.iter_mut().enumerate() {
            slot.set_simulation_data(prev[n].clone())?;
            slot.run_timestep_fine()?;
            slot.run_timestep_coarse()?;
            slot.compute_difference()?;
        }
        let mut next = vec![prev[0].clone()];
        for slot in self.slots.iter_mut() {
            slot.set_simulation_data(next.last().expect("non-empty").clone())?;
            slot.run_timestep_coarse()?;
            slot.compute_output_data()?;
            next.push(slot.output_data()?);
        }
        self.iterates.push(next);
        Ok(self.iterates.last().expect("just pushed"))
    }

    pub fn iterates(&self) -> &[Vec<StateVector>] {
        &self.iterates
    }

    pub fn latest(&self) -> &[StateVector] {
        self.iterates.last().expect("predictor present")
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::parareal::{LayoutTag, Slot};

    struct Scalar {
        fine_factor: fn(f64) -> f64,
        coarse_factor: fn(f64) -> f64,
    }

    impl Propagator for Scalar {
        fn layout(&self) -> LayoutTag {
            LayoutTag::new("scalar")
        }
        fn initial_value(&self) -> StateVector {
            StateVector::new(vec![1.0], self.layout())
        }
        fn fine(&mut self, s: &StateVector, w: &TimeWindow) -> Result<StateVector> {
            Ok(s.scaled((self.fine_factor)(w.length())))
        }
        fn coarse(&mut self, s: &StateVector, w: &TimeWindow) -> Result<StateVector> {
            Ok(s.scaled((self.coarse_factor)(w.length())))
        }
    }

    fn decay_exact(dt: f64) -> f64 {
        (-dt).exp()
    }
    fn decay_euler(dt: f64) -> f64 {
        1.0 - dt
    }
    fn identity(_: f64) -> f64 {
        1.0
    }

    fn u(x: f64) -> StateVector {
        StateVector::new(vec![x], LayoutTag::new("scalar"))
    }

    fn windows(m: usize, dt: f64) -> Vec<TimeWindow> {
        (0..m)
            .map(|n| TimeWindow::for_interval(n, dt).unwrap())
            .collect()
    }

    #[test]
    fn coarse_sweep_exact_exponential() {
        let mut p = Scalar {
            fine_factor: decay_exact,
            coarse_factor: decay_exact,
        };
        let out = coarse_sweep(&mut p, &u(1.0), &windows(2, 0.5)).unwrap();
        let got: Vec<f64> = out.iter().map(|s| s.values()[0]).collect();
        let want = [1.0, 0.6065306597126334, 0.36787944117144233];
        for (g, w) in got.iter().zip(want) {
            assert!((g - w).abs() < 1e-15, "{got:?}");
        }
    }

    #[test]
    fn coarse_sweep_forward_euler() {
        let mut p = Scalar {
            fine_factor: decay_exact,
            coarse_factor: decay_euler,
        };
        let out = coarse_sweep(&mut p, &u(1.0), &windows(3, 0.1)).unwrap();
        let got: Vec<f64> = out.iter().map(|s| s.values()[0]).collect();
        for (g, w) in got.iter().zip([1.0, 0.9, 0.81, 0.729]) {
            assert!((g - w).abs() < 1e-15, "{got:?}");
        }
    }

    #[test]
    fn coarse_sweep_identity_map() {
        let mut p = Scalar {
            fine_factor: identity,
            coarse_factor: identity,
        };
        let out = coarse_sweep(&mut p, &u(0.3), &windows(5, 0.1)).unwrap();
        assert!(out.iter().all(|s| s.values() == [0.3]));
    }

    #[test]
    fn fine_reference() {
        let mut p = Scalar {
            fine_factor: decay_exact,
            coarse_factor: decay_euler,
        };
        let r = serial_fine_reference(&mut p, &u(1.0), 0.0, 1.0, 0.1).unwrap();
        assert!((r.values()[0] - 0.36787944117144233).abs() < 1e-14);
        let same = serial_fine_reference(&mut p, &u(0.7), 2.0, 2.0, 0.1).unwrap();
        assert_eq!(same.values(), &[0.7]);
        assert!(serial_fine_reference(&mut p, &u(1.0), 0.0, 0.25, 0.1).is_err());
    }

    #[test]
    fn sweeps_reach_fine_solution_after_m_iterations() {
        let m = 5;
        let mut slots: Vec<Box<dyn PropagatorSlot>> = (0..m)
            .map(|_| {
                Box::new(
                    Slot::new(
                        Scalar {
                            fine_factor: decay_exact,
                            coarse_factor: decay_euler,
                        },
                        0.1,
                    )
                    .unwrap(),
                ) as Box<dyn PropagatorSlot>
            })
            .collect();
        let mut sweeps = PararealSweeps::new(&mut slots, u(1.0), 0.1).unwrap();
        for _ in 0..m {
            sweeps.iterate().unwrap();
        }
        for (n, v) in sweeps.latest().iter().enumerate() {
            let exact = (-(n as f64) * 0.1).exp();
            assert!((v.values()[0] - exact).abs() <= 1e-12 * exact, "n={n}");
        }
    }
}
