//! Sampling grids on the unit sphere and in the radial frequency variable.

#[allow(unused_imports)]
use num_traits::Float;
use alloc::vec::Vec;
use core::f64::consts::PI;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub const DEFAULT_CIRCLE_POINTS: usize = 720;
pub const DEFAULT_SPHERE_POINTS: usize = 2000;
pub const DEFAULT_RADIAL_MIN: f64 = 1e-3;
pub const DEFAULT_RADIAL_MAX: f64 = 1e3;
pub const DEFAULT_RADIAL_COUNT: usize = 61;

/// Radical inverse of `index` in the given prime base.
pub fn halton(mut index: usize, base: usize) -> f64 {
    let mut f = 1.0;
    let mut r = 0.0;
    let b = base as f64;
    while index > 0 {
        f /= b;
        r += f * (index % base) as f64;
        index /= base;
    }
    r
}

pub const PRIMES: [usize; 16] = [2, 3, 5, 7, 11, 13, 17, 19, 23, 29, 31, 37, 41, 43, 47, 53];

/// Deterministic, roughly uniform points on `S^{d-1}`.
///
/// `d = 1` is exactly `{+1, -1}`; `d = 2` uses equally spaced angles; `d = 3`
/// the Fibonacci lattice; higher dimensions normalize accepted Halton points
/// of the unit ball.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SphereGrid {
    pub d: usize,
    pub density: usize,
    pub points: Vec<Vec<f64>>,
}

impl SphereGrid {
    pub fn new(d: usize, density: usize) -> Result<Self> {
        if d == 0 {
            return Err(Error::Validation("sphere grid needs d >= 1".into()));
        }
        if d > PRIMES.len() {
            return Err(Error::Validation("sphere grid supports d <= 16".into()));
        }
        let points = match d {
            1 => alloc::vec![alloc::vec![1.0], alloc::vec![-1.0]],
            _ if density == 0 => return Err(Error::Validation("sphere grid density must be positive".into())),
            2 => (0..density)
                .map(|k| {
                    let t = 2.0 * PI * k as f64 / density as f64;
                    alloc::vec![t.cos(), t.sin()]
                })
                .collect(),
            3 => fibonacci(density),
            _ => halton_sphere(d, density),
        };
        Ok(Self { d, density: if d == 1 { 2 } else { density }, points })
    }

    /// 2 points for `d = 1`, 720 for `d = 2`, 2000 otherwise.
    pub fn default_for(d: usize) -> Result<Self> {
        let density = match d {
            1 => 2,
            2 => DEFAULT_CIRCLE_POINTS,
            _ => DEFAULT_SPHERE_POINTS,
        };
        Self::new(d, density)
    }

    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    pub fn iter(&self) -> impl Iterator<Item = &[f64]> {
        self.points.iter().map(|p| p.as_slice())
    }

    /// Surface area of `S^{d-1}`.
    pub fn area(&self) -> f64 {
        sphere_area(self.d)
    }
}

pub fn sphere_area(d: usize) -> f64 {
    // |S^{d-1}| = 2 π^{d/2} / Γ(d/2)
    let half = d as f64 / 2.0;
    2.0 * PI.powf(half) / gamma_half_integer(d)
}

// Γ(d/2) for positive integers d
fn gamma_half_integer(d: usize) -> f64 {
    let (mut g, mut x) = if d % 2 == 0 { (1.0, 1.0) } else { (PI.sqrt(), 0.5) };
    let target = d as f64 / 2.0;
    while x < target - 0.25 {
        g *= x;
        x += 1.0;
    }
    g
}

fn fibonacci(count: usize) -> Vec<Vec<f64>> {
    let golden = PI * (3.0 - 5.0f64.sqrt());
    (0..count)
        .map(|k| {
            let z = 1.0 - (2.0 * k as f64 + 1.0) / count as f64;
            let rad = (1.0 - z * z).max(0.0).sqrt();
            let phi = golden * k as f64;
            normalize(alloc::vec![rad * phi.cos(), rad * phi.sin(), z])
        })
        .collect()
}

fn halton_sphere(d: usize, count: usize) -> Vec<Vec<f64>> {
    let mut out = Vec::with_capacity(count);
    let mut index = 1;
    while out.len() < count {
        let p: Vec<f64> = (0..d).map(|j| 2.0 * halton(index, PRIMES[j]) - 1.0).collect();
        index += 1;
        let r2: f64 = p.iter().map(|x| x * x).sum();
        if r2 <= 1.0 && r2 > 1e-4 {
            out.push(normalize(p));
        }
    }
    out
}

fn normalize(mut v: Vec<f64>) -> Vec<f64> {
    let n = v.iter().map(|x| x * x).sum::<f64>().sqrt();
    for x in &mut v {
        *x /= n;
    }
    v
}

/// Log-spaced magnitudes `|ξ|` in `[min, max]`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RadialGrid {
    pub min: f64,
    pub max: f64,
    pub count: usize,
    pub values: Vec<f64>,
}

impl RadialGrid {
    pub fn new(min: f64, max: f64, count: usize) -> Result<Self> {
        if !(min > 0.0 && max > min && max.is_finite()) {
            return Err(Error::Validation(alloc::format!("radial grid needs 0 < min < max, got [{min}, {max}]")));
        }
        if count < 2 {
            return Err(Error::Validation("radial grid needs at least 2 points".into()));
        }
        let (lo, hi) = (min.ln(), max.ln());
        let mut values: Vec<f64> = (0..count)
            .map(|k| (lo + (hi - lo) * k as f64 / (count - 1) as f64).exp())
            .collect();
        values[0] = min;
        values[count - 1] = max;
        Ok(Self { min, max, count, values })
    }

    pub fn iter(&self) -> impl Iterator<Item = f64> + '_ {
        self.values.iter().copied()
    }
}

impl Default for RadialGrid {
    fn default() -> Self {
        Self::new(DEFAULT_RADIAL_MIN, DEFAULT_RADIAL_MAX, DEFAULT_RADIAL_COUNT).expect("valid defaults")
    }
}
