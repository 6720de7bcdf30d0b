//! Truncated Fourier series on the unit torus in one or two dimensions.
//!
//! Spectra use the convention f(y) = sum_k c_k exp(2 pi i k . y) with the
//! wavenumber set {-M/2+1 .. M/2-1} per dimension; the Nyquist plane is
//! kept empty so that derivative factors stay real-symmetric and padding
//! between grids is lossless.

use num_complex::Complex64;
use rustfft::FftPlanner;

pub const TWO_PI: f64 = 2.0 * std::f64::consts::PI;

/// Uniform grid on T^d with M modes (and M physical points) per dimension.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct TorusGrid {
    pub dim: usize,
    pub modes: usize,
}

impl TorusGrid {
    pub fn new(dim: usize, modes: usize) -> TorusGrid {
        assert!(dim == 1 || dim == 2, "torus dimension must be 1 or 2");
        assert!(modes >= 4 && modes % 2 == 0, "modes must be even and >= 4");
        TorusGrid { dim, modes }
    }

    pub fn len(&self) -> usize {
        self.modes.pow(self.dim as u32)
    }

    #[allow(clippy::len_without_is_empty)]
    pub fn spacing(&self) -> f64 {
        1.0 / self.modes as f64
    }

    /// Signed wavenumber for a storage index along one dimension.
    pub fn wavenumber(&self, j: usize) -> i64 {
        let m = self.modes as i64;
        let j = j as i64;
        if j <= m / 2 {
            j
        } else {
            j - m
        }
    }

    /// Physical grid point for a flat storage index.
    pub fn point(&self, flat: usize) -> Vec<f64> {
        let m = self.modes;
        match self.dim {
            1 => vec![flat as f64 / m as f64],
            2 => vec![(flat / m) as f64 / m as f64, (flat % m) as f64 / m as f64],
            _ => unreachable!(),
        }
    }

    /// Wavenumber vector for a flat storage index.
    pub fn wavevector(&self, flat: usize) -> [i64; 2] {
        let m = self.modes;
        match self.dim {
            1 => [self.wavenumber(flat), 0],
            2 => [self.wavenumber(flat / m), self.wavenumber(flat % m)],
            _ => unreachable!(),
        }
    }

    fn is_nyquist(&self, flat: usize) -> bool {
        let m = self.modes as i64;
        let k = self.wavevector(flat);
        k[0] == m / 2 || (self.dim == 2 && k[1] == m / 2)
    }

    /// Forward transform, physical values -> normalized spectrum.
    /// The Nyquist plane of the result is cleared.
    pub fn forward(&self, phys: &[Complex64]) -> Vec<Complex64> {
        assert_eq!(phys.len(), self.len());
        let mut data = phys.to_vec();
        self.fft_all(&mut data, false);
        let scale = 1.0 / self.len() as f64;
        for (flat, v) in data.iter_mut().enumerate() {
            *v *= scale;
            if self.is_nyquist(flat) {
                *v = Complex64::new(0.0, 0.0);
            }
        }
        data
    }

    /// Inverse transform, spectrum -> physical values.
    pub fn inverse(&self, spec: &[Complex64]) -> Vec<Complex64> {
        assert_eq!(spec.len(), self.len());
        let mut data = spec.to_vec();
        self.fft_all(&mut data, true);
        data
    }

    pub fn real_values(&self, spec: &[Complex64]) -> Vec<f64> {
        self.inverse(spec).iter().map(|v| v.re).collect()
    }

    /// Largest imaginary residue of the reconstruction; small for
    /// Hermitian-symmetric spectra.
    pub fn realness_defect(&self, spec: &[Complex64]) -> f64 {
        self.inverse(spec)
            .iter()
            .map(|v| v.im.abs())
            .fold(0.0, f64::max)
    }

    fn fft_all(&self, data: &mut [Complex64], inverse: bool) {
        let mut planner = FftPlanner::new();
        let m = self.modes;
        let fft = if inverse {
            planner.plan_fft_inverse(m)
        } else {
            planner.plan_fft_forward(m)
        };
        match self.dim {
            1 => fft.process(data),
            2 => {
                // rows (second index contiguous)
                for row in data.chunks_exact_mut(m) {
                    fft.process(row);
                }
                // columns
                let mut col = vec![Complex64::new(0.0, 0.0); m];
                for j in 0..m {
                    for i in 0..m {
                        col[i] = data[i * m + j];
                    }
                    fft.process(&mut col);
                    for i in 0..m {
                        data[i * m + j] = col[i];
                    }
                }
            }
            _ => unreachable!(),
        }
    }

    /// Embed a spectrum into a finer grid with `fine_modes` per dimension.
    pub fn pad_spectrum(&self, spec: &[Complex64], fine_modes: usize) -> Vec<Complex64> {
        assert!(fine_modes >= self.modes);
        let fine = TorusGrid::new(self.dim, fine_modes);
        let mut out = vec![Complex64::new(0.0, 0.0); fine.len()];
        let m = self.modes;
        let mf = fine_modes as i64;
        for (flat, &v) in spec.iter().enumerate() {
            if self.is_nyquist(flat) {
                continue;
            }
            let k = self.wavevector(flat);
            let j0 = k[0].rem_euclid(mf) as usize;
            let fine_flat = match self.dim {
                1 => j0,
                2 => j0 * fine_modes + k[1].rem_euclid(mf) as usize,
                _ => unreachable!(),
            };
            out[fine_flat] = v;
        }
        let _ = m;
        out
    }

    /// Restrict a finer-grid spectrum back onto this grid, dropping modes
    /// outside the band (the 3/2-rule dealias step).
    pub fn truncate_spectrum(&self, fine_spec: &[Complex64], fine_modes: usize) -> Vec<Complex64> {
        let fine = TorusGrid::new(self.dim, fine_modes);
        assert_eq!(fine_spec.len(), fine.len());
        let mut out = vec![Complex64::new(0.0, 0.0); self.len()];
        let mf = fine_modes as i64;
        for (flat, v) in out.iter_mut().enumerate() {
            if self.is_nyquist(flat) {
                continue;
            }
            let k = self.wavevector(flat);
            let j0 = k[0].rem_euclid(mf) as usize;
            let fine_flat = match self.dim {
                1 => j0,
                2 => j0 * fine_modes + k[1].rem_euclid(mf) as usize,
                _ => unreachable!(),
            };
            *v = fine_spec[fine_flat];
        }
        out
    }

    /// Grid used for dealiased pseudospectral products.
    pub fn dealias_modes(&self) -> usize {
        let mp = (3 * self.modes).div_ceil(2);
        if mp % 2 == 0 {
            mp
        } else {
            mp + 1
        }
    }

    /// First-derivative spectral factor i 2 pi k_i (Nyquist cleared).
    pub fn deriv1_factor(&self, flat: usize, dir: usize) -> Complex64 {
        if self.is_nyquist(flat) {
            return Complex64::new(0.0, 0.0);
        }
        let k = self.wavevector(flat);
        Complex64::new(0.0, TWO_PI * k[dir] as f64)
    }

    /// Second-derivative spectral factor -(2 pi)^2 k_i k_j (Nyquist cleared).
    pub fn deriv2_factor(&self, flat: usize, i: usize, j: usize) -> f64 {
        if self.is_nyquist(flat) {
            return 0.0;
        }
        let k = self.wavevector(flat);
        -TWO_PI * TWO_PI * (k[i] as f64) * (k[j] as f64)
    }
}

/// A real periodic scalar field stored as a truncated Fourier series.
#[derive(Debug, Clone)]
pub struct PeriodicField {
    pub grid: TorusGrid,
    pub coeffs: Vec<Complex64>,
    pub mean_zero: bool,
}

impl PeriodicField {
    pub fn from_spectrum(grid: TorusGrid, mut coeffs: Vec<Complex64>, mean_zero: bool) -> PeriodicField {
        if mean_zero {
            coeffs[0] = Complex64::new(0.0, 0.0);
        }
        PeriodicField { grid, coeffs, mean_zero }
    }

    pub fn from_values(grid: TorusGrid, values: &[f64], mean_zero: bool) -> PeriodicField {
        let phys: Vec<Complex64> = values.iter().map(|&v| Complex64::new(v, 0.0)).collect();
        Self::from_spectrum(grid, grid.forward(&phys), mean_zero)
    }

    pub fn mean(&self) -> f64 {
        self.coeffs[0].re
    }

    pub fn values(&self) -> Vec<f64> {
        self.grid.real_values(&self.coeffs)
    }

    /// Physical values on a finer grid, by spectral interpolation.
    pub fn values_on(&self, fine_modes: usize) -> Vec<f64> {
        let fine = TorusGrid::new(self.grid.dim, fine_modes);
        fine.real_values(&self.grid.pad_spectrum(&self.coeffs, fine_modes))
    }

    pub fn derivative2(&self, i: usize, j: usize) -> PeriodicField {
        let coeffs = self
            .coeffs
            .iter()
            .enumerate()
            .map(|(flat, v)| v * self.grid.deriv2_factor(flat, i, j))
            .collect();
        PeriodicField::from_spectrum(self.grid, coeffs, false)
    }

    pub fn derivative1(&self, i: usize) -> PeriodicField {
        let coeffs = self
            .coeffs
            .iter()
            .enumerate()
            .map(|(flat, v)| v * self.grid.deriv1_factor(flat, i))
            .collect();
        PeriodicField::from_spectrum(self.grid, coeffs, false)
    }

    pub fn norm_l2(&self) -> f64 {
        self.coeffs.iter().map(|v| v.norm_sqr()).sum::<f64>().sqrt()
    }

    pub fn realness_defect(&self) -> f64 {
        self.grid.realness_defect(&self.coeffs)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn forward_inverse_round_trip_1d() {
        let g = TorusGrid::new(1, 16);
        let vals: Vec<f64> = (0..16)
            .map(|j| {
                let y = j as f64 / 16.0;
                1.0 + (TWO_PI * y).sin() + 0.5 * (2.0 * TWO_PI * y).cos()
            })
            .collect();
        let f = PeriodicField::from_values(g, &vals, false);
        let back = f.values();
        for (a, b) in vals.iter().zip(&back) {
            assert!((a - b).abs() < 1e-12);
        }
        assert!((f.mean() - 1.0).abs() < 1e-12);
        assert!(f.realness_defect() < 1e-12);
    }

    #[test]
    fn spectral_derivative_of_sine() {
        let g = TorusGrid::new(1, 32);
        let vals: Vec<f64> = (0..32).map(|j| (TWO_PI * j as f64 / 32.0).sin()).collect();
        let f = PeriodicField::from_values(g, &vals, false);
        let d1 = f.derivative1(0).values();
        let d2 = f.derivative2(0, 0).values();
        for j in 0..32 {
            let y = j as f64 / 32.0;
            assert!((d1[j] - TWO_PI * (TWO_PI * y).cos()).abs() < 1e-10);
            assert!((d2[j] + TWO_PI * TWO_PI * (TWO_PI * y).sin()).abs() < 1e-9);
        }
    }

    #[test]
    fn pad_preserves_values_2d() {
        let g = TorusGrid::new(2, 8);
        let vals: Vec<f64> = (0..64)
            .map(|flat| {
                let p = g.point(flat);
                (TWO_PI * p[0]).cos() * (TWO_PI * p[1]).sin() + 2.0
            })
            .collect();
        let f = PeriodicField::from_values(g, &vals, false);
        let fine = f.values_on(12);
        let gf = TorusGrid::new(2, 12);
        for flat in 0..gf.len() {
            let p = gf.point(flat);
            let expect = (TWO_PI * p[0]).cos() * (TWO_PI * p[1]).sin() + 2.0;
            assert!((fine[flat] - expect).abs() < 1e-10);
        }
    }

    #[test]
    fn truncate_inverts_pad() {
        let g = TorusGrid::new(1, 8);
        let vals: Vec<f64> = (0..8).map(|j| (TWO_PI * j as f64 / 8.0).sin() + 0.3).collect();
        let f = PeriodicField::from_values(g, &vals, false);
        let padded = g.pad_spectrum(&f.coeffs, g.dealias_modes());
        let back = g.truncate_spectrum(&padded, g.dealias_modes());
        for (a, b) in f.coeffs.iter().zip(&back) {
            assert!((a - b).norm() < 1e-13);
        }
    }
}
