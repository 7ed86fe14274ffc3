//! Linearized rotating shallow-water equations on `[0, 2π)²`:
//!
//! ```text
//! ∂h/∂t = −H(∂u/∂x + ∂v/∂y)
//! ∂u/∂t =  f v − g ∂h/∂x
//! ∂v/∂t = −f u − g ∂h/∂y
//! ```
//!
//! In Fourier space each wavenumber pair evolves under a 3×3 block `L(k)`
//! with eigenvalues `0, ±iω`, `ω² = f² + gH|k|²`, so
//! `exp(tL) = I + sin(ωt)/ω · L + (1 − cos ωt)/ω² · L²` exactly.

use std::f64::consts::PI;
use std::fs;
use std::path::{Path, PathBuf};

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use super::spectral::SpectralGrid;
use crate::error::{Error, Result};
use crate::parareal::{LayoutTag, Propagator, StateVector, TimeWindow};

/// Relative tolerance for "ΔT is an integer multiple of dtFine".
pub const SUBSTEP_RTOL: f64 = 1e-9;

pub const FIELD_NAMES: [&str; 3] = ["h", "u", "v"];

pub type Block = [[Complex64; 3]; 3];

const ZERO: Complex64 = Complex64::new(0.0, 0.0);
const ONE: Complex64 = Complex64::new(1.0, 0.0);

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum CoarseMode {
    /// One exponential step of ΔT on the full spectrum.
    Full,
    /// Keep only `|k_x|, |k_y| < N_c/2`, then one exponential step of ΔT.
    Truncated,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RsweConfig {
    pub resolution: usize,
    pub coriolis: f64,
    pub gravity: f64,
    pub depth: f64,
    pub dt_fine: f64,
    pub gaussian_amplitude: f64,
    pub gaussian_width: f64,
    pub center_x: f64,
    pub center_y: f64,
    pub coarse: CoarseMode,
    /// `N_c`; defaults to `N/2` when absent.
    pub coarse_modes: Option<usize>,
}

impl Default for RsweConfig {
    fn default() -> Self {
        RsweConfig {
            resolution: 16,
            coriolis: 1.0,
            gravity: 1.0,
            depth: 1.0,
            dt_fine: 0.001,
            gaussian_amplitude: 0.5,
            gaussian_width: 5.0,
            center_x: PI,
            center_y: PI,
            coarse: CoarseMode::Truncated,
            coarse_modes: None,
        }
    }
}

impl RsweConfig {
    pub fn wave_speed(&self) -> f64 {
        (self.gravity * self.depth).sqrt()
    }

    pub fn effective_coarse_modes(&self) -> usize {
        self.coarse_modes.unwrap_or(self.resolution / 2)
    }

    /// Number of fine substeps per window of length `coarse_step`.
    pub fn substeps(&self, coarse_step: f64) -> Result<usize> {
        let ratio = coarse_step / self.dt_fine;
        let rounded = ratio.round();
        if rounded < 1.0 || (ratio - rounded).abs() > SUBSTEP_RTOL * ratio.max(1.0) {
            return Err(Error::config(
                "dt_fine",
                format!(
                    "coarse step {coarse_step} is not an integer multiple of dt_fine {}",
                    self.dt_fine
                ),
            ));
        }
        Ok(rounded as usize)
    }

    pub fn validate(&self, coarse_step: f64) -> Result<()> {
        let n = self.resolution;
        if !(8..=128).contains(&n) || !n.is_power_of_two() {
            return Err(Error::config(
                "resolution",
                format!("{n} is not one of 8, 16, 32, 64, 128"),
            ));
        }
        for (name, v) in [
            ("coriolis", self.coriolis),
            ("gravity", self.gravity),
            ("depth", self.depth),
            ("gaussian_amplitude", self.gaussian_amplitude),
            ("gaussian_width", self.gaussian_width),
            ("center_x", self.center_x),
            ("center_y", self.center_y),
        ] {
            if !v.is_finite() {
                return Err(Error::config(name, "must be finite"));
            }
        }
        if self.gravity <= 0.0 || self.depth <= 0.0 {
            return Err(Error::config("gravity", "g and H must be positive"));
        }
        if !(self.dt_fine > 0.0 && self.dt_fine.is_finite()) {
            return Err(Error::config("dt_fine", "must be positive"));
        }
        // Nominal wave CFL bound on the fine step.
        let dx = 2.0 * PI / n as f64;
        let courant = self.wave_speed() * self.dt_fine / dx;
        if courant > 1.0 {
            return Err(Error::config(
                "dt_fine",
                format!("Courant number {courant:.3} exceeds 1 at resolution {n}"),
            ));
        }
        if self.coarse == CoarseMode::Truncated {
            let nc = self.effective_coarse_modes();
            if nc < 2 || nc > n || !nc.is_multiple_of(2) {
                return Err(Error::config(
                    "coarse_modes",
                    format!("N_c = {nc} must be even and within [2, {n}]"),
                ));
            }
        }
        self.substeps(coarse_step)?;
        Ok(())
    }

    /// Layout tag encoding the grid size and field order.
    pub fn layout(&self) -> LayoutTag {
        let n = self.resolution;
        LayoutTag::new(format!("rswe:{n}x{n}:h,u,v"))
    }

    pub fn gaussian_height(&self, x: f64, y: f64) -> f64 {
        let dx = x - self.center_x;
        let dy = y - self.center_y;
        self.gaussian_amplitude * (-self.gaussian_width * (dx * dx + dy * dy)).exp()
    }

    /// Gaussian height bump, velocities at rest.
    pub fn gaussian_initial_state(&self) -> StateVector {
        let n = self.resolution;
        let dx = 2.0 * PI / n as f64;
        let mut values = vec![0.0; 3 * n * n];
        for j in 0..n {
            for i in 0..n {
                values[j * n + i] = self.gaussian_height(i as f64 * dx, j as f64 * dx);
            }
        }
        StateVector::new(values, self.layout())
    }
}

/// Splits a flattened state into its `h`, `u`, `v` fields.
pub fn fields(state: &StateVector) -> Result<[&[f64]; 3]> {
    let len = state.len();
    if !len.is_multiple_of(3) {
        return Err(Error::Data(format!("rswe state of length {len}")));
    }
    let m = len / 3;
    let v = state.values();
    Ok([&v[..m], &v[m..2 * m], &v[2 * m..]])
}

/// `E = Σ (g h² + H(u² + v²))` over grid points.
pub fn energy(state: &StateVector, gravity: f64, depth: f64) -> Result<f64> {
    let [h, u, v] = fields(state)?;
    let mut e = 0.0;
    for p in 0..h.len() {
        e += gravity * h[p] * h[p] + depth * (u[p] * u[p] + v[p] * v[p]);
    }
    Ok(e)
}

/// The linear block for one wavenumber pair.
pub fn operator_block(kx: f64, ky: f64, f: f64, g: f64, depth: f64) -> Block {
    let i = Complex64::new(0.0, 1.0);
    [
        [ZERO, -i * depth * kx, -i * depth * ky],
        [-i * g * kx, ZERO, Complex64::new(f, 0.0)],
        [-i * g * ky, Complex64::new(-f, 0.0), ZERO],
    ]
}

pub fn block_mul(a: &Block, b: &Block) -> Block {
    let mut out = [[ZERO; 3]; 3];
    for r in 0..3 {
        for c in 0..3 {
            out[r][c] = a[r][0] * b[0][c] + a[r][1] * b[1][c] + a[r][2] * b[2][c];
        }
    }
    out
}

pub fn block_apply(a: &Block, x: [Complex64; 3]) -> [Complex64; 3] {
    [
        a[0][0] * x[0] + a[0][1] * x[1] + a[0][2] * x[2],
        a[1][0] * x[0] + a[1][1] * x[1] + a[1][2] * x[2],
        a[2][0] * x[0] + a[2][1] * x[1] + a[2][2] * x[2],
    ]
}

/// `exp(tL(k))` in closed form.
pub fn exponential_block(kx: f64, ky: f64, f: f64, g: f64, depth: f64, t: f64) -> Block {
    let l = operator_block(kx, ky, f, g, depth);
    let omega = (f * f + g * depth * (kx * kx + ky * ky)).sqrt();
    let mut e = [[ZERO; 3]; 3];
    for (d, row) in e.iter_mut().enumerate() {
        row[d] = ONE;
    }
    if omega == 0.0 {
        return e;
    }
    let s = (omega * t).sin() / omega;
    let half = (0.5 * omega * t).sin() / omega;
    let c = 2.0 * half * half;
    let l2 = block_mul(&l, &l);
    for r in 0..3 {
        for col in 0..3 {
            e[r][col] += l[r][col] * s + l2[r][col] * c;
        }
    }
    e
}

/// Spectral RSWE state handling: transforms, tendencies and exponential steps.
pub struct RsweModel {
    config: RsweConfig,
    grid: SpectralGrid,
}

impl RsweModel {
    pub fn new(config: RsweConfig) -> Result<Self> {
        let grid = SpectralGrid::new(config.resolution)?;
        Ok(RsweModel { config, grid })
    }

    pub fn config(&self) -> &RsweConfig {
        &self.config
    }

    pub fn grid(&self) -> &SpectralGrid {
        &self.grid
    }

    fn check(&self, state: &StateVector) -> Result<()> {
        let expected = self.config.layout();
        if state.layout() != &expected || state.len() != 3 * self.grid.points() {
            return Err(Error::Data(format!(
                "expected {expected} with {} values, got {} with {}",
                3 * self.grid.points(),
                state.layout(),
                state.len()
            )));
        }
        Ok(())
    }

    /// Block matrices for every mode, row-major over `(k_y, k_x)` indices.
    pub fn exponential_blocks(&self, t: f64) -> Vec<Block> {
        let n = self.grid.size();
        let c = &self.config;
        let mut blocks = Vec::with_capacity(n * n);
        for j in 0..n {
            let ky = self.grid.derivative_wavenumber(j);
            for i in 0..n {
                let kx = self.grid.derivative_wavenumber(i);
                blocks.push(exponential_block(kx, ky, c.coriolis, c.gravity, c.depth, t));
            }
        }
        blocks
    }

    pub fn to_spectral(&mut self, state: &StateVector) -> Result<[Vec<Complex64>; 3]> {
        self.check(state)?;
        let [h, u, v] = fields(state)?;
        Ok([
            self.grid.forward(h),
            self.grid.forward(u),
            self.grid.forward(v),
        ])
    }

    pub fn from_spectral(&mut self, spectra: &[Vec<Complex64>; 3]) -> Result<StateVector> {
        let mut values = Vec::with_capacity(3 * self.grid.points());
        // Largest single-mode amplitude anywhere in the state.
        let reference = spectra
            .iter()
            .flat_map(|s| s.iter())
            .map(|c| c.norm())
            .fold(0.0, f64::max)
            / self.grid.points() as f64;
        for s in spectra {
            values.extend(self.grid.inverse_with_scale(s, reference)?);
        }
        let out = StateVector::new(values, self.config.layout());
        if !out.is_finite() {
            return Err(Error::Numerical("non-finite RSWE field".into()));
        }
        Ok(out)
    }

    /// Zeroes every mode with `|k_x| ≥ N_c/2` or `|k_y| ≥ N_c/2`.
    pub fn truncate(&self, spectra: &mut [Vec<Complex64>; 3], coarse_modes: usize) {
        let n = self.grid.size();
        let cutoff = (coarse_modes / 2) as f64;
        for j in 0..n {
            let ky = self.grid.wavenumber(j).abs();
            for i in 0..n {
                let kx = self.grid.wavenumber(i).abs();
                if kx >= cutoff || ky >= cutoff {
                    for s in spectra.iter_mut() {
                        s[j * n + i] = ZERO;
                    }
                }
            }
        }
    }

    /// Applies `blocks` to the spectra `repeat` times.
    pub fn apply_blocks(spectra: &mut [Vec<Complex64>; 3], blocks: &[Block], repeat: usize) {
        for (p, block) in blocks.iter().enumerate() {
            let mut x = [spectra[0][p], spectra[1][p], spectra[2][p]];
            for _ in 0..repeat {
                x = block_apply(block, x);
            }
            for (s, xv) in spectra.iter_mut().zip(x) {
                s[p] = xv;
            }
        }
    }

    /// Exact step of length `dt` (negative values step backwards).
    pub fn exponential_step(&mut self, state: &StateVector, dt: f64) -> Result<StateVector> {
        let mut spectra = self.to_spectral(state)?;
        let blocks = self.exponential_blocks(dt);
        Self::apply_blocks(&mut spectra, &blocks, 1);
        self.from_spectral(&spectra)
    }

    /// Right-hand side `L·U` evaluated with spectral derivatives.
    pub fn tendency(&mut self, state: &StateVector) -> Result<StateVector> {
        self.check(state)?;
        let [h, u, v] = fields(state)?;
        let c = self.config;
        let hx = self.grid.derivative_x(h)?;
        let hy = self.grid.derivative_y(h)?;
        let ux = self.grid.derivative_x(u)?;
        let vy = self.grid.derivative_y(v)?;
        let m = h.len();
        let mut out = vec![0.0; 3 * m];
        for p in 0..m {
            out[p] = -c.depth * (ux[p] + vy[p]);
            out[m + p] = c.coriolis * v[p] - c.gravity * hx[p];
            out[2 * m + p] = -c.coriolis * u[p] - c.gravity * hy[p];
        }
        Ok(StateVector::new(out, c.layout()))
    }
}

/// Propagator pair over one coarse window: the fine side takes `ΔT/dtFine`
/// exact substeps, the coarse side one exact step of ΔT, optionally on a
/// truncated spectrum.
pub struct RswePropagator {
    model: RsweModel,
    substeps: usize,
    fine_blocks: Vec<Block>,
    coarse_blocks: Vec<Block>,
    coarse_length: f64,
    dump_dir: Option<PathBuf>,
}

impl RswePropagator {
    pub fn new(config: RsweConfig, coarse_step: f64) -> Result<Self> {
        config.validate(coarse_step)?;
        let substeps = config.substeps(coarse_step)?;
        let model = RsweModel::new(config)?;
        let fine_blocks = model.exponential_blocks(config.dt_fine);
        let coarse_blocks = model.exponential_blocks(coarse_step);
        Ok(RswePropagator {
            model,
            substeps,
            fine_blocks,
            coarse_blocks,
            coarse_length: coarse_step,
            dump_dir: None,
        })
    }

    /// Writes each output handed to [`RswePropagator::dump`] below `dir`.
    pub fn with_dump_dir(mut self, dir: impl Into<PathBuf>) -> Self {
        self.dump_dir = Some(dir.into());
        self
    }

    pub fn model(&self) -> &RsweModel {
        &self.model
    }

    pub fn model_mut(&mut self) -> &mut RsweModel {
        &mut self.model
    }

    pub fn substeps(&self) -> usize {
        self.substeps
    }

    pub fn dump(&self, state: &StateVector, interval: usize, iteration: u32) -> Result<()> {
        match &self.dump_dir {
            Some(dir) => write_field_dump(
                dir,
                state,
                self.model.config.resolution,
                interval,
                iteration,
            ),
            None => Ok(()),
        }
    }
}

impl Propagator for RswePropagator {
    fn layout(&self) -> LayoutTag {
        self.model.config.layout()
    }

    fn initial_value(&self) -> StateVector {
        self.model.config.gaussian_initial_state()
    }

    fn prepare_window(&mut self, window: &TimeWindow) -> Result<()> {
        let substeps = self.model.config.substeps(window.length())?;
        if substeps != self.substeps {
            return Err(Error::config(
                "dt_coarse",
                format!(
                    "window of length {} does not match the configured coarse step {}",
                    window.length(),
                    self.coarse_length
                ),
            ));
        }
        Ok(())
    }

    fn fine(&mut self, start: &StateVector, _window: &TimeWindow) -> Result<StateVector> {
        let mut spectra = self.model.to_spectral(start)?;
        RsweModel::apply_blocks(&mut spectra, &self.fine_blocks, self.substeps);
        self.model.from_spectral(&spectra)
    }

    fn coarse(&mut self, start: &StateVector, _window: &TimeWindow) -> Result<StateVector> {
        let mut spectra = self.model.to_spectral(start)?;
        if self.model.config.coarse == CoarseMode::Truncated {
            let nc = self.model.config.effective_coarse_modes();
            self.model.truncate(&mut spectra, nc);
        }
        RsweModel::apply_blocks(&mut spectra, &self.coarse_blocks, 1);
        self.model.from_spectral(&spectra)
    }

    fn fine_substeps(&self, _window: &TimeWindow) -> usize {
        self.substeps
    }
}

pub fn field_dump_name(field: &str, interval: usize, iteration: u32) -> String {
    format!("field_{field}_n{interval}_k{iteration}.csv")
}

/// Writes `h`, `u`, `v` as row-major comma-separated grids, one file each.
pub fn write_field_dump(
    dir: &Path,
    state: &StateVector,
    resolution: usize,
    interval: usize,
    iteration: u32,
) -> Result<()> {
    fs::create_dir_all(dir)?;
    let all = fields(state)?;
    for (name, field) in FIELD_NAMES.iter().zip(all) {
        if field.len() != resolution * resolution {
            return Err(Error::Data(format!(
                "field {name} has {} values for a {resolution}² grid",
                field.len()
            )));
        }
        let mut text = String::new();
        for row in field.chunks(resolution) {
            let line: Vec<String> = row.iter().map(|v| format!("{v:e}")).collect();
            text.push_str(&line.join(","));
            text.push('\n');
        }
        fs::write(dir.join(field_dump_name(name, interval, iteration)), text)?;
    }
    Ok(())
}
