use std::sync::Arc;

use num_complex::Complex64;
use rustfft::{Fft, FftPlanner};
use serde::{Deserialize, Serialize};

use super::SimError;

/// Uniform periodic grid on `[0, L)^d` with `N` points per axis.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PeriodicGrid {
    pub d: usize,
    pub n: usize,
    pub length: f64,
}

impl PeriodicGrid {
    pub fn new(d: usize, n: usize, length: f64) -> Result<Self, SimError> {
        let (lo, hi) = match d {
            1 => (32, 1024),
            2 => (32, 256),
            3 => (16, 64),
            _ => return Err(SimError::Grid(format!("dimension {d} not supported (1, 2 or 3)"))),
        };
        if !n.is_power_of_two() || n < lo || n > hi {
            return Err(SimError::Grid(format!("{n} points per axis: need a power of two in [{lo}, {hi}] for d = {d}")));
        }
        if !(length > 0.0 && length.is_finite()) {
            return Err(SimError::Grid(format!("box length must be positive, got {length}")));
        }
        Ok(Self { d, n, length })
    }

    /// Total number of points.
    pub fn len(&self) -> usize {
        self.n.pow(self.d as u32)
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    pub fn dx(&self) -> f64 {
        self.length / self.n as f64
    }

    pub fn cell_volume(&self) -> f64 {
        self.dx().powi(self.d as i32)
    }

    /// Per-axis indices of a flat index; the last axis varies fastest.
    pub fn multi_index(&self, mut flat: usize) -> Vec<usize> {
        let mut idx = vec![0; self.d];
        for a in (0..self.d).rev() {
            idx[a] = flat % self.n;
            flat /= self.n;
        }
        idx
    }

    pub fn flat_index(&self, idx: &[usize]) -> usize {
        idx.iter().fold(0, |acc, &i| acc * self.n + i)
    }

    /// Signed wavenumber index in FFT order.
    pub fn signed(&self, i: usize) -> i64 {
        if i < self.n / 2 { i as i64 } else { i as i64 - self.n as i64 }
    }

    pub fn wavenumbers(&self, flat: usize) -> Vec<i64> {
        self.multi_index(flat).into_iter().map(|i| self.signed(i)).collect()
    }

    /// `ξ_k = 2πk / L`.
    pub fn xi(&self, flat: usize) -> Vec<f64> {
        let scale = 2.0 * std::f64::consts::PI / self.length;
        self.wavenumbers(flat).into_iter().map(|k| k as f64 * scale).collect()
    }

    pub fn position(&self, flat: usize) -> Vec<f64> {
        self.multi_index(flat).into_iter().map(|i| i as f64 * self.dx()).collect()
    }

    /// True for modes carrying the Nyquist index on some axis; they have no
    /// real-valued partner and are kept at zero.
    pub fn is_nyquist(&self, flat: usize) -> bool {
        self.multi_index(flat).contains(&(self.n / 2))
    }

    /// 2/3 rule: modes with some `|k_a| > N/3` are removed after each
    /// nonlinear evaluation.
    pub fn is_aliased(&self, flat: usize) -> bool {
        self.wavenumbers(flat).iter().any(|k| 3 * k.unsigned_abs() as usize > self.n)
    }
}

/// Multidimensional FFT by successive one-dimensional transforms.
pub struct Transform {
    grid: PeriodicGrid,
    forward: Arc<dyn Fft<f64>>,
    inverse: Arc<dyn Fft<f64>>,
}

impl Transform {
    pub fn new(grid: PeriodicGrid) -> Self {
        let mut planner = FftPlanner::new();
        Self { grid, forward: planner.plan_fft_forward(grid.n), inverse: planner.plan_fft_inverse(grid.n) }
    }

    fn apply(&self, data: &mut [Complex64], plan: &Arc<dyn Fft<f64>>) {
        let (n, d) = (self.grid.n, self.grid.d);
        let total = self.grid.len();
        let mut line = vec![Complex64::new(0.0, 0.0); n];
        let mut scratch = vec![Complex64::new(0.0, 0.0); plan.get_inplace_scratch_len()];
        for axis in 0..d {
            let stride = n.pow((d - 1 - axis) as u32);
            for start in 0..total {
                // first element of each line along `axis`
                if (start / stride) % n != 0 {
                    continue;
                }
                for (i, z) in line.iter_mut().enumerate() {
                    *z = data[start + i * stride];
                }
                plan.process_with_scratch(&mut line, &mut scratch);
                for (i, z) in line.iter().enumerate() {
                    data[start + i * stride] = *z;
                }
            }
        }
    }

    /// Unnormalized forward transform `Û_k = Σ_x U(x) e^{−iξ_k·x}`.
    pub fn forward(&self, data: &mut [Complex64]) {
        self.apply(data, &self.forward);
    }

    /// Inverse transform including the `1/N^d` factor.
    pub fn inverse(&self, data: &mut [Complex64]) {
        self.apply(data, &self.inverse);
        let s = 1.0 / self.grid.len() as f64;
        data.iter_mut().for_each(|z| *z *= s);
    }

    pub fn forward_real(&self, field: &[f64]) -> Vec<Complex64> {
        let mut data: Vec<Complex64> = field.iter().map(|&x| Complex64::new(x, 0.0)).collect();
        self.forward(&mut data);
        data
    }

    pub fn inverse_real(&self, spectrum: &[Complex64]) -> Vec<f64> {
        let mut data = spectrum.to_vec();
        self.inverse(&mut data);
        data.into_iter().map(|z| z.re).collect()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn grid_bounds() {
        assert!(PeriodicGrid::new(1, 256, 100.0).is_ok());
        assert!(PeriodicGrid::new(1, 100, 100.0).is_err());
        assert!(PeriodicGrid::new(2, 512, 1.0).is_err());
        assert!(PeriodicGrid::new(3, 64, 1.0).is_ok());
        assert!(PeriodicGrid::new(3, 8, 1.0).is_err());
        assert!(PeriodicGrid::new(4, 16, 1.0).is_err());
    }

    #[test]
    fn indices_round_trip() {
        let g = PeriodicGrid::new(3, 16, 1.0).unwrap();
        for flat in [0, 1, 17, 300, g.len() - 1] {
            assert_eq!(g.flat_index(&g.multi_index(flat)), flat);
        }
        assert_eq!(g.wavenumbers(g.len() - 1), vec![-1, -1, -1]);
    }

    #[test]
    fn transform_of_a_plane_wave() {
        let g = PeriodicGrid::new(2, 32, 2.0).unwrap();
        let fft = Transform::new(g);
        let k = [3usize, 5usize];
        let field: Vec<f64> = (0..g.len())
            .map(|f| {
                let x = g.position(f);
                let xi = [2.0 * std::f64::consts::PI * k[0] as f64 / g.length, 2.0 * std::f64::consts::PI * k[1] as f64 / g.length];
                (xi[0] * x[0] + xi[1] * x[1]).cos()
            })
            .collect();
        let spec = fft.forward_real(&field);
        let hit = g.flat_index(&k);
        let partner = g.flat_index(&[g.n - k[0], g.n - k[1]]);
        for (f, z) in spec.iter().enumerate() {
            let want = if f == hit || f == partner { g.len() as f64 / 2.0 } else { 0.0 };
            assert!((z.re - want).abs() < 1e-9 && z.im.abs() < 1e-9, "{f} {z}");
        }
        let back = fft.inverse_real(&spec);
        for (a, b) in back.iter().zip(&field) {
            assert!((a - b).abs() < 1e-13);
        }
    }
}
