//! 2-D Fourier transforms on the doubly periodic square `[0, 2π)²`.
//!
//! Fields are stored row-major, `field[j * n + i]` being the value at
//! `x = 2πi/n`, `y = 2πj/n`.

use std::f64::consts::PI;
use std::sync::Arc;

use num_complex::Complex64;
use rustfft::{Fft, FftPlanner};

use crate::error::{Error, Result};

/// Imaginary residue tolerated after an inverse transform, relative to the
/// largest real magnitude.
pub const IMAG_RESIDUE_RTOL: f64 = 1e-10;

pub struct SpectralGrid {
    n: usize,
    forward: Arc<dyn Fft<f64>>,
    inverse: Arc<dyn Fft<f64>>,
    /// Signed integer wavenumber for each index.
    wavenumbers: Vec<f64>,
    /// Wavenumbers used for derivatives; the Nyquist entry is zero so that
    /// derivatives of real fields stay real.
    derivative_wavenumbers: Vec<f64>,
    scratch: Vec<Complex64>,
}

impl SpectralGrid {
    pub fn new(n: usize) -> Result<Self> {
        if n < 2 || !n.is_power_of_two() {
            return Err(Error::config(
                "resolution",
                format!("grid size {n} must be a power of two ≥ 2"),
            ));
        }
        let mut planner = FftPlanner::new();
        let forward = planner.plan_fft_forward(n);
        let inverse = planner.plan_fft_inverse(n);
        let wavenumbers: Vec<f64> = (0..n)
            .map(|i| {
                if i <= n / 2 {
                    i as f64
                } else {
                    i as f64 - n as f64
                }
            })
            .collect();
        let derivative_wavenumbers = wavenumbers
            .iter()
            .enumerate()
            .map(|(i, &k)| if i == n / 2 { 0.0 } else { k })
            .collect();
        let scratch_len = forward
            .get_inplace_scratch_len()
            .max(inverse.get_inplace_scratch_len());
        Ok(SpectralGrid {
            n,
            forward,
            inverse,
            wavenumbers,
            derivative_wavenumbers,
            scratch: vec![Complex64::new(0.0, 0.0); scratch_len],
        })
    }

    pub fn size(&self) -> usize {
        self.n
    }

    pub fn points(&self) -> usize {
        self.n * self.n
    }

    pub fn spacing(&self) -> f64 {
        2.0 * PI / self.n as f64
    }

    pub fn coordinate(&self, index: usize) -> f64 {
        index as f64 * self.spacing()
    }

    pub fn wavenumber(&self, index: usize) -> f64 {
        self.wavenumbers[index]
    }

    pub fn derivative_wavenumber(&self, index: usize) -> f64 {
        self.derivative_wavenumbers[index]
    }

    fn transpose(&self, data: &mut [Complex64]) {
        let n = self.n;
        for j in 0..n {
            for i in (j + 1)..n {
                data.swap(j * n + i, i * n + j);
            }
        }
    }

    fn transform(&mut self, data: &mut [Complex64], forward: bool) {
        let fft = if forward {
            self.forward.clone()
        } else {
            self.inverse.clone()
        };
        // Rows, then columns via transposition.
        fft.process_with_scratch(data, &mut self.scratch);
        self.transpose(data);
        fft.process_with_scratch(data, &mut self.scratch);
        self.transpose(data);
    }

    /// Unnormalized forward transform of a real field.
    pub fn forward(&mut self, field: &[f64]) -> Vec<Complex64> {
        assert_eq!(field.len(), self.points(), "field size");
        let mut data: Vec<Complex64> = field.iter().map(|&v| Complex64::new(v, 0.0)).collect();
        self.transform(&mut data, true);
        data
    }

    /// Inverse transform (normalized by `1/n²`) back to a real field.
    pub fn inverse(&mut self, spectrum: &[Complex64]) -> Result<Vec<f64>> {
        self.inverse_with_scale(spectrum, 0.0)
    }

    /// As [`inverse`](Self::inverse), judging the imaginary residue against
    /// `max(reference, largest real magnitude)`. Fields that are pure roundoff
    /// inside a larger state need the state's scale here.
    pub fn inverse_with_scale(
        &mut self,
        spectrum: &[Complex64],
        reference: f64,
    ) -> Result<Vec<f64>> {
        assert_eq!(spectrum.len(), self.points(), "spectrum size");
        let mut data = spectrum.to_vec();
        self.transform(&mut data, false);
        let scale = 1.0 / self.points() as f64;
        let mut max_re = 0.0_f64;
        let mut max_im = 0.0_f64;
        let field: Vec<f64> = data
            .iter()
            .map(|c| {
                max_re = max_re.max((c.re * scale).abs());
                max_im = max_im.max((c.im * scale).abs());
                c.re * scale
            })
            .collect();
        let scale_ref = max_re.max(reference);
        if max_im > IMAG_RESIDUE_RTOL * scale_ref.max(1e-300) && max_im > 1e-300 {
            return Err(Error::Numerical(format!(
                "inverse transform left imaginary residue {max_im:e} (real scale {scale_ref:e})"
            )));
        }
        Ok(field)
    }

    /// `∂f/∂x` computed spectrally.
    pub fn derivative_x(&mut self, field: &[f64]) -> Result<Vec<f64>> {
        let n = self.n;
        let mut s = self.forward(field);
        for j in 0..n {
            for i in 0..n {
                s[j * n + i] *= Complex64::new(0.0, self.derivative_wavenumbers[i]);
            }
        }
        self.inverse(&s)
    }

    /// `∂f/∂y` computed spectrally.
    pub fn derivative_y(&mut self, field: &[f64]) -> Result<Vec<f64>> {
        let n = self.n;
        let mut s = self.forward(field);
        for j in 0..n {
            let k = Complex64::new(0.0, self.derivative_wavenumbers[j]);
            for i in 0..n {
                s[j * n + i] *= k;
            }
        }
        self.inverse(&s)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn sample(grid: &SpectralGrid, f: impl Fn(f64, f64) -> f64) -> Vec<f64> {
        let n = grid.size();
        let mut out = Vec::with_capacity(n * n);
        for j in 0..n {
            for i in 0..n {
                out.push(f(grid.coordinate(i), grid.coordinate(j)));
            }
        }
        out
    }

    #[test]
    fn rejects_non_power_of_two() {
        assert!(SpectralGrid::new(12).is_err());
        assert!(SpectralGrid::new(1).is_err());
    }

    #[test]
    fn round_trip() {
        let mut g = SpectralGrid::new(16).unwrap();
        let f = sample(&g, |x, y| (x + 0.3).sin() * (2.0 * y).cos() + 0.1 * x);
        let s = g.forward(&f);
        let back = g.inverse(&s).unwrap();
        for (a, b) in f.iter().zip(&back) {
            assert!((a - b).abs() < 1e-13);
        }
    }

    #[test]
    fn derivative_of_cosine_is_exact_for_resolvable_modes() {
        let mut g = SpectralGrid::new(16).unwrap();
        for k in 0..=8 {
            let kf = k as f64;
            let f = sample(&g, |x, _| (kf * x).cos());
            let dfdx = g.derivative_x(&f).unwrap();
            let expected = sample(&g, |x, _| -kf * (kf * x).sin());
            for (a, b) in dfdx.iter().zip(&expected) {
                assert!((a - b).abs() < 1e-10, "k={k}: {a} vs {b}");
            }
            let fy = sample(&g, |_, y| (kf * y).cos());
            let dfdy = g.derivative_y(&fy).unwrap();
            let expected_y = sample(&g, |_, y| -kf * (kf * y).sin());
            for (a, b) in dfdy.iter().zip(&expected_y) {
                assert!((a - b).abs() < 1e-10, "k={k}: {a} vs {b}");
            }
        }
    }

    #[test]
    fn complex_spectrum_is_rejected() {
        let mut g = SpectralGrid::new(8).unwrap();
        let mut s = vec![Complex64::new(0.0, 0.0); 64];
        // A lone mode without its conjugate partner is not a real field.
        s[1] = Complex64::new(0.0, 64.0);
        assert!(matches!(g.inverse(&s), Err(Error::Numerical(_))));
    }
}
