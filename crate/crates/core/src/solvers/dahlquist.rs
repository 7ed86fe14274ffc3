//! The scalar test equation `u' = λu`, whose closed-form solution makes it the
//! reference problem for the protocol.

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::parareal::{LayoutTag, Propagator, StateVector, TimeWindow};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum CoarseScheme {
    ExactExponential,
    ForwardEuler,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum FineScheme {
    ExactExponential,
    Rk4,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct DahlquistConfig {
    pub lambda: f64,
    /// Imaginary part of λ; nonzero values switch to a two-component state.
    pub lambda_im: f64,
    pub u0: f64,
    pub fine_steps_per_coarse: usize,
    pub coarse: CoarseScheme,
    pub fine: FineScheme,
}

impl Default for DahlquistConfig {
    fn default() -> Self {
        DahlquistConfig {
            lambda: -1.0,
            lambda_im: 0.0,
            u0: 1.0,
            fine_steps_per_coarse: 100,
            coarse: CoarseScheme::ForwardEuler,
            fine: FineScheme::ExactExponential,
        }
    }
}

impl DahlquistConfig {
    pub fn lambda(&self) -> Complex64 {
        Complex64::new(self.lambda, self.lambda_im)
    }

    pub fn is_complex(&self) -> bool {
        self.lambda_im != 0.0
    }

    pub fn validate(&self, coarse_step: f64) -> Result<()> {
        if !(self.lambda.is_finite() && self.lambda_im.is_finite() && self.u0.is_finite()) {
            return Err(Error::config("lambda", "λ and u0 must be finite"));
        }
        if self.fine_steps_per_coarse == 0 {
            return Err(Error::config("fine_steps_per_coarse", "must be positive"));
        }
        if self.coarse == CoarseScheme::ForwardEuler
            && !self.is_complex()
            && self.lambda < 0.0
            && coarse_step >= 2.0 / self.lambda.abs()
        {
            return Err(Error::config(
                "dt_coarse",
                format!(
                    "forward Euler is unstable for λ = {} with step {coarse_step} (needs < {})",
                    self.lambda,
                    2.0 / self.lambda.abs()
                ),
            ));
        }
        Ok(())
    }
}

/// `u·e^{λΔt}`.
pub fn exact_step(lambda: Complex64, u: Complex64, dt: f64) -> Complex64 {
    u * (lambda * dt).exp()
}

/// `u·(1 + λΔt)`.
pub fn euler_step(lambda: Complex64, u: Complex64, dt: f64) -> Complex64 {
    u * (1.0 + lambda * dt)
}

/// Classical RK4 with `substeps` equal steps over `dt`.
pub fn rk4(lambda: Complex64, mut u: Complex64, dt: f64, substeps: usize) -> Complex64 {
    let h = dt / substeps as f64;
    for _ in 0..substeps {
        let k1 = lambda * u;
        let k2 = lambda * (u + 0.5 * h * k1);
        let k3 = lambda * (u + 0.5 * h * k2);
        let k4 = lambda * (u + h * k3);
        u += h / 6.0 * (k1 + 2.0 * k2 + 2.0 * k3 + k4);
    }
    u
}

pub struct DahlquistPropagator {
    config: DahlquistConfig,
    layout: LayoutTag,
}

impl DahlquistPropagator {
    pub fn new(config: DahlquistConfig, coarse_step: f64) -> Result<Self> {
        config.validate(coarse_step)?;
        let layout = if config.is_complex() {
            LayoutTag::new("dahlquist:complex")
        } else {
            LayoutTag::new("dahlquist:real")
        };
        Ok(DahlquistPropagator { config, layout })
    }

    pub fn config(&self) -> &DahlquistConfig {
        &self.config
    }

    fn read(&self, s: &StateVector) -> Result<Complex64> {
        if s.layout() != &self.layout {
            return Err(Error::Data(format!(
                "expected layout {}, got {}",
                self.layout,
                s.layout()
            )));
        }
        match s.values() {
            [re] if !self.config.is_complex() => Ok(Complex64::new(*re, 0.0)),
            [re, im] if self.config.is_complex() => Ok(Complex64::new(*re, *im)),
            other => Err(Error::Data(format!(
                "dahlquist state has {} entries",
                other.len()
            ))),
        }
    }

    fn write(&self, u: Complex64) -> StateVector {
        let values = if self.config.is_complex() {
            vec![u.re, u.im]
        } else {
            vec![u.re]
        };
        StateVector::new(values, self.layout.clone())
    }
}

impl Propagator for DahlquistPropagator {
    fn layout(&self) -> LayoutTag {
        self.layout.clone()
    }

    fn initial_value(&self) -> StateVector {
        self.write(Complex64::new(self.config.u0, 0.0))
    }

    fn fine(&mut self, start: &StateVector, window: &TimeWindow) -> Result<StateVector> {
        let u = self.read(start)?;
        let lambda = self.config.lambda();
        let out = match self.config.fine {
            FineScheme::ExactExponential => exact_step(lambda, u, window.length()),
            FineScheme::Rk4 => rk4(
                lambda,
                u,
                window.length(),
                self.config.fine_steps_per_coarse,
            ),
        };
        Ok(self.write(out))
    }

    fn coarse(&mut self, start: &StateVector, window: &TimeWindow) -> Result<StateVector> {
        let u = self.read(start)?;
        let lambda = self.config.lambda();
        let out = match self.config.coarse {
            CoarseScheme::ExactExponential => exact_step(lambda, u, window.length()),
            CoarseScheme::ForwardEuler => euler_step(lambda, u, window.length()),
        };
        Ok(self.write(out))
    }

    fn fine_substeps(&self, _window: &TimeWindow) -> usize {
        match self.config.fine {
            FineScheme::ExactExponential => 1,
            FineScheme::Rk4 => self.config.fine_steps_per_coarse,
        }
    }
}
