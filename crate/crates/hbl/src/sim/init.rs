//! Initial data generators. A field is stored component-major:
//! `field[i][x]` is component `i` at grid point `x`.

use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::grid::{PeriodicGrid, Transform};

pub type Field = Vec<Vec<f64>>;

fn targets(n_components: usize, component: Option<usize>) -> Vec<bool> {
    (0..n_components).map(|i| component.map_or(true, |c| c == i)).collect()
}

/// `amplitude · exp(−|x − c|² / (2 width²))` centred in the box.
pub fn gaussian(grid: &PeriodicGrid, n_components: usize, amplitude: f64, width: f64, component: Option<usize>) -> Field {
    let center = grid.length / 2.0;
    let profile: Vec<f64> = (0..grid.len())
        .map(|f| {
            let r2: f64 = grid.position(f).iter().map(|x| (x - center).powi(2)).sum();
            amplitude * (-r2 / (2.0 * width * width)).exp()
        })
        .collect();
    targets(n_components, component)
        .into_iter()
        .map(|on| if on { profile.clone() } else { vec![0.0; grid.len()] })
        .collect()
}

/// Random Fourier coefficients on `|k_a| ≤ band`, rescaled so that the
/// largest point value is `amplitude`.
pub fn band_limited_noise(
    grid: &PeriodicGrid,
    n_components: usize,
    amplitude: f64,
    band: usize,
    seed: u64,
    component: Option<usize>,
) -> Field {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let fft = Transform::new(*grid);
    targets(n_components, component)
        .into_iter()
        .map(|on| {
            if !on {
                return vec![0.0; grid.len()];
            }
            let spec: Vec<Complex64> = (0..grid.len())
                .map(|f| {
                    let inside = !grid.is_nyquist(f) && grid.wavenumbers(f).iter().all(|k| k.unsigned_abs() as usize <= band);
                    let z = Complex64::new(rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0));
                    if inside { z } else { Complex64::new(0.0, 0.0) }
                })
                .collect();
            let field = fft.inverse_real(&spec);
            let peak = field.iter().fold(0.0f64, |m, x| m.max(x.abs()));
            let s = if peak > 0.0 { amplitude / peak } else { 0.0 };
            field.into_iter().map(|x| x * s).collect()
        })
        .collect()
}

/// `amplitude · cos(ξ_k · x)`.
pub fn single_mode(grid: &PeriodicGrid, n_components: usize, amplitude: f64, k: &[i64], component: Option<usize>) -> Field {
    let scale = 2.0 * std::f64::consts::PI / grid.length;
    let profile: Vec<f64> = (0..grid.len())
        .map(|f| {
            let phase: f64 = grid.position(f).iter().zip(k).map(|(x, &k)| x * k as f64 * scale).sum();
            amplitude * phase.cos()
        })
        .collect();
    targets(n_components, component)
        .into_iter()
        .map(|on| if on { profile.clone() } else { vec![0.0; grid.len()] })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn noise_is_seeded_and_scaled() {
        let g = PeriodicGrid::new(1, 64, 10.0).unwrap();
        let a = band_limited_noise(&g, 2, 0.3, 5, 7, Some(1));
        let b = band_limited_noise(&g, 2, 0.3, 5, 7, Some(1));
        assert_eq!(a, b);
        assert!(a[0].iter().all(|&x| x == 0.0));
        let peak = a[1].iter().fold(0.0f64, |m, x| m.max(x.abs()));
        assert!((peak - 0.3).abs() < 1e-15);
        assert_ne!(a, band_limited_noise(&g, 2, 0.3, 5, 8, Some(1)));
    }

    #[test]
    fn gaussian_peaks_at_center() {
        let g = PeriodicGrid::new(1, 64, 16.0).unwrap();
        let f = gaussian(&g, 1, 2.0, 1.0, None);
        assert_eq!(f[0][32], 2.0);
    }
}
