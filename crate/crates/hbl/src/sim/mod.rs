//! Periodic pseudo-spectral integration: exact per-mode propagation of a
//! linear symbol and a Strang splitting for Jin-Xin systems.

pub mod grid;
pub mod init;
pub mod snapshot;

use hbl_core::decay::{rho, Symbol};
use hbl_core::linalg::{self, c, CMat};
use hbl_core::model::{build_jinxin, JinXinSpec};
use hbl_core::quadrature::fit_line;
use num_complex::Complex64;
use rayon::prelude::*;
use serde::Serialize;

pub use grid::{PeriodicGrid, Transform};
pub use init::Field;

/// Norm values below this are treated as zero by the fits.
pub const NORM_FLOOR: f64 = 1e-300;

#[derive(Debug, thiserror::Error)]
pub enum SimError {
    #[error("invalid grid: {0}")]
    Grid(String),
    #[error("CFL violation: dt = {dt} exceeds 0.5·Δx/λ_max = {limit}")]
    Cfl { dt: f64, limit: f64 },
    #[error("{0}")]
    Precondition(String),
    #[error(transparent)]
    Core(#[from] hbl_core::Error),
    #[error("fit window {0}")]
    Window(String),
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SimOptions {
    /// Indices `s` of the recorded `‖Λ^s U‖`.
    pub sobolev: Vec<f64>,
    /// Keep `|Û(t, k)|` for every mode and output time.
    pub record_modes: bool,
    /// Keep the physical field at every output time.
    pub record_fields: bool,
    pub dealias: bool,
}

impl Default for SimOptions {
    fn default() -> Self {
        Self { sobolev: Vec::new(), record_modes: false, record_fields: false, dealias: true }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Integrator {
    pub method: &'static str,
    pub dt: Option<f64>,
    pub steps: usize,
    pub dealias: bool,
    pub grid: PeriodicGrid,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SobolevSeries {
    pub s: f64,
    pub values: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SimResult {
    pub times: Vec<f64>,
    pub l2: Vec<f64>,
    pub linf: Vec<f64>,
    pub sobolev: Vec<SobolevSeries>,
    /// Spatial mean of every component, per output time.
    pub mean: Vec<Vec<f64>>,
    /// `|Û(t, k)| / N^d` per output time and flat mode index.
    #[serde(skip)]
    pub modes: Vec<Vec<f64>>,
    #[serde(skip)]
    pub fields: Vec<Field>,
    #[serde(skip)]
    pub final_field: Field,
    /// Fourier coefficients at the last output time.
    #[serde(skip)]
    pub final_spectrum: Vec<Vec<Complex64>>,
    pub integrator: Integrator,
    pub aborted: Option<String>,
}

impl SimResult {
    fn new(integrator: Integrator, opts: &SimOptions) -> Self {
        Self {
            times: Vec::new(),
            l2: Vec::new(),
            linf: Vec::new(),
            sobolev: opts.sobolev.iter().map(|&s| SobolevSeries { s, values: Vec::new() }).collect(),
            mean: Vec::new(),
            modes: Vec::new(),
            fields: Vec::new(),
            final_field: Vec::new(),
            final_spectrum: Vec::new(),
            integrator,
            aborted: None,
        }
    }

    fn observe(&mut self, t: f64, spectra: &[Vec<Complex64>], fft: &Transform, opts: &SimOptions) {
        let grid = self.integrator.grid;
        let npts = grid.len();
        let field: Field = spectra.iter().map(|s| fft.inverse_real(s)).collect();
        let vol = grid.cell_volume();
        let sq: f64 = field.iter().flatten().map(|x| x * x).sum();
        self.l2.push((sq * vol).sqrt());
        let linf = (0..npts)
            .map(|p| field.iter().map(|comp| comp[p] * comp[p]).sum::<f64>().sqrt())
            .fold(0.0, f64::max);
        self.linf.push(linf);
        let power: Vec<f64> = (0..npts).map(|f| spectra.iter().map(|s| s[f].norm_sqr()).sum()).collect();
        for series in &mut self.sobolev {
            let acc: f64 = power
                .iter()
                .enumerate()
                .map(|(f, p)| {
                    let k2: f64 = grid.xi(f).iter().map(|x| x * x).sum();
                    (1.0 + k2).powf(series.s) * p
                })
                .sum();
            series.values.push((acc * vol / npts as f64).sqrt());
        }
        self.mean.push(spectra.iter().map(|s| s[0].re / npts as f64).collect());
        if opts.record_modes {
            self.modes.push(power.iter().map(|p| p.sqrt() / npts as f64).collect());
        }
        if opts.record_fields {
            self.fields.push(field.clone());
        }
        self.times.push(t);
        self.final_field = field;
        self.final_spectrum = spectra.to_vec();
    }
}

fn check_field(grid: &PeriodicGrid, u0: &Field, n: usize) -> Result<(), SimError> {
    if u0.len() != n {
        return Err(SimError::Precondition(format!("initial data has {} components, system has {n}", u0.len())));
    }
    if let Some(c) = u0.iter().find(|c| c.len() != grid.len()) {
        return Err(SimError::Precondition(format!("component has {} values, grid has {}", c.len(), grid.len())));
    }
    if u0.iter().flatten().any(|x| !x.is_finite()) {
        return Err(SimError::Precondition("initial data is not finite".into()));
    }
    Ok(())
}

fn check_times(times: &[f64]) -> Result<(), SimError> {
    if times.is_empty() || !(times[0] >= 0.0) || times.windows(2).any(|w| !(w[1] > w[0])) || times.iter().any(|t| !t.is_finite()) {
        return Err(SimError::Precondition("output times must be finite, nonnegative and strictly increasing".into()));
    }
    Ok(())
}

fn to_spectra(fft: &Transform, grid: &PeriodicGrid, u0: &Field) -> Vec<Vec<Complex64>> {
    u0.iter()
        .map(|comp| {
            let mut s = fft.forward_real(comp);
            for (f, z) in s.iter_mut().enumerate() {
                if grid.is_nyquist(f) {
                    *z = c(0.0);
                }
            }
            s
        })
        .collect()
}

fn mat_vec(m: &CMat, spectra: &[Vec<Complex64>], f: usize) -> Vec<Complex64> {
    let n = spectra.len();
    (0..n).map(|i| (0..n).map(|j| m[(i, j)] * spectra[j][f]).sum()).collect()
}

/// `Û(t, k) = exp(𝓜(ξ_k)t) Û₀(k)` at every output time. Nyquist modes are
/// set to zero.
pub fn simulate_linear<S: Symbol + Sync + ?Sized>(
    sym: &S,
    grid: &PeriodicGrid,
    u0: &Field,
    times: &[f64],
    opts: &SimOptions,
) -> Result<SimResult, SimError> {
    if sym.dim() != grid.d {
        return Err(SimError::Precondition(format!("system dimension {} differs from grid dimension {}", sym.dim(), grid.d)));
    }
    let n = sym.symbol(&vec![0.0; grid.d]).nrows();
    check_field(grid, u0, n)?;
    check_times(times)?;
    let fft = Transform::new(*grid);
    let hat0 = to_spectra(&fft, grid, u0);
    let symbols: Vec<CMat> = (0..grid.len()).into_par_iter().map(|f| sym.symbol(&grid.xi(f))).collect();
    let integrator = Integrator { method: "exact", dt: None, steps: 0, dealias: false, grid: *grid };
    let mut res = SimResult::new(integrator, opts);
    for &t in times {
        let per_mode: Vec<Vec<Complex64>> = (0..grid.len())
            .into_par_iter()
            .map(|f| {
                if grid.is_nyquist(f) {
                    vec![c(0.0); n]
                } else {
                    mat_vec(&linalg::expm(&(&symbols[f] * c(t))), &hat0, f)
                }
            })
            .collect();
        let spectra: Vec<Vec<Complex64>> = (0..n).map(|i| per_mode.iter().map(|v| v[i]).collect()).collect();
        res.observe(t, &spectra, &fft, opts);
    }
    Ok(res)
}

/// `0.5·Δx / max_j λ_max(√b^j)`.
pub fn cfl_limit(jx: &JinXinSpec, grid: &PeriodicGrid) -> f64 {
    0.5 * grid.dx() / jx.max_speed()
}

/// `0.25·Δx / max_j λ_max(√b^j)`.
pub fn default_dt(jx: &JinXinSpec, grid: &PeriodicGrid) -> f64 {
    0.5 * cfl_limit(jx, grid)
}

/// Step indices nearest to the requested times.
fn output_steps(times: &[f64], dt: f64) -> Vec<usize> {
    let mut steps: Vec<usize> = times.iter().map(|t| (t / dt).round() as usize).collect();
    steps.dedup();
    steps
}

/// Strang splitting: half-step exact transport with `−iÃ(ξ_k)`, full-step
/// exact relaxation `v^j ← F^j(u) + (v^j − F^j(u))e^{−Δt/ε}`, half-step
/// transport. Requested times are rounded to multiples of `dt`.
pub fn simulate_jinxin(
    jx: &JinXinSpec,
    grid: &PeriodicGrid,
    u0: &Field,
    times: &[f64],
    dt: f64,
    opts: &SimOptions,
) -> Result<SimResult, SimError> {
    let polys = jx
        .flux_poly
        .as_ref()
        .ok_or_else(|| SimError::Precondition("simulation needs flux_poly".into()))?;
    if jx.d != grid.d {
        return Err(SimError::Precondition(format!("system dimension {} differs from grid dimension {}", jx.d, grid.d)));
    }
    if !(dt > 0.0 && dt.is_finite()) {
        return Err(SimError::Precondition(format!("time step must be positive, got {dt}")));
    }
    let limit = cfl_limit(jx, grid);
    if dt > limit * (1.0 + 1e-12) {
        return Err(SimError::Cfl { dt, limit });
    }
    let (m, n) = (jx.m, jx.n());
    check_field(grid, u0, n)?;
    check_times(times)?;
    let spec = build_jinxin(jx)?;
    let fft = Transform::new(*grid);
    let npts = grid.len();
    let half: Vec<CMat> = (0..npts)
        .into_par_iter()
        .map(|f| {
            let xi = grid.xi(f);
            let mut a = CMat::zeros(n, n);
            for (aj, x) in spec.flux_jacobians.iter().zip(&xi) {
                a += linalg::to_complex(aj) * c(*x);
            }
            linalg::expm(&(a * Complex64::new(0.0, -0.5 * dt)))
        })
        .collect();
    let transport = |state: &mut Vec<Vec<Complex64>>| {
        let per_mode: Vec<Vec<Complex64>> = (0..npts).into_par_iter().map(|f| mat_vec(&half[f], state, f)).collect();
        for (f, v) in per_mode.into_iter().enumerate() {
            for (i, z) in v.into_iter().enumerate() {
                state[i][f] = z;
            }
        }
    };
    let decay = (-dt / jx.eps).exp();
    let mut u_point = vec![0.0; m];
    let mut f_point = vec![0.0; m];
    let mut relax = |state: &mut Vec<Vec<Complex64>>| {
        let u: Vec<Vec<f64>> = state[..m].iter().map(|s| fft.inverse_real(s)).collect();
        for (j, poly) in polys.iter().enumerate() {
            let mut flux: Vec<Vec<f64>> = vec![vec![0.0; npts]; m];
            for p in 0..npts {
                for (i, up) in u_point.iter_mut().enumerate() {
                    *up = u[i][p];
                }
                poly.eval_into(&u_point, &mut f_point);
                for (i, fp) in f_point.iter().enumerate() {
                    flux[i][p] = *fp;
                }
            }
            for (i, comp) in flux.iter().enumerate() {
                let mut fh = fft.forward_real(comp);
                for (f, z) in fh.iter_mut().enumerate() {
                    if grid.is_nyquist(f) || (opts.dealias && grid.is_aliased(f)) {
                        *z = c(0.0);
                    }
                }
                let v = &mut state[m * (j + 1) + i];
                for (vz, fz) in v.iter_mut().zip(&fh) {
                    *vz = fz + (*vz - fz) * decay;
                }
            }
        }
    };

    let steps_out = output_steps(times, dt);
    let total = *steps_out.last().expect("nonempty times");
    let integrator = Integrator { method: "strang", dt: Some(dt), steps: 0, dealias: opts.dealias, grid: *grid };
    let mut res = SimResult::new(integrator, opts);
    let mut state = to_spectra(&fft, grid, u0);
    let mut next = 0;
    if steps_out[0] == 0 {
        res.observe(0.0, &state, &fft, opts);
        next = 1;
    }
    for step in 1..=total {
        let prev = state.clone();
        transport(&mut state);
        relax(&mut state);
        transport(&mut state);
        if state.iter().flatten().any(|z| !z.re.is_finite() || !z.im.is_finite()) {
            res.aborted = Some(format!("non-finite state at t = {}; kept the state at t = {}", step as f64 * dt, (step - 1) as f64 * dt));
            res.final_spectrum = prev.clone();
            res.final_field = prev.iter().map(|s| fft.inverse_real(s)).collect();
            res.integrator.steps = step - 1;
            return Ok(res);
        }
        res.integrator.steps = step;
        if next < steps_out.len() && steps_out[next] == step {
            res.observe(step as f64 * dt, &state, &fft, opts);
            next += 1;
        }
    }
    Ok(res)
}

/// Fitted decay of one norm series.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct NormFit {
    pub norm: String,
    pub points: usize,
    /// Slope of `log ‖U‖` against `log(1 + t)`.
    pub power_slope: f64,
    pub power_residual: f64,
    /// `−` slope of `log ‖U‖` against `t`.
    pub exp_rate: f64,
    pub exp_residual: f64,
    /// The better description by residual: `"power"` or `"exponential"`.
    pub preferred: &'static str,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub note: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct DecayFits {
    pub window: (f64, f64),
    pub fits: Vec<NormFit>,
}

/// Fits of a single series on `window`.
pub fn fit_series(name: &str, times: &[f64], values: &[f64], window: (f64, f64)) -> NormFit {
    let mut dropped = 0;
    let mut pts = Vec::new();
    for (&t, &v) in times.iter().zip(values) {
        if t < window.0 || t > window.1 {
            continue;
        }
        if v > NORM_FLOOR {
            pts.push((t, v));
        } else {
            dropped += 1;
        }
    }
    let mut note = (dropped > 0).then(|| format!("window truncated: {dropped} values below {NORM_FLOOR:e}"));
    let x_pow: Vec<f64> = pts.iter().map(|p| (1.0 + p.0).ln()).collect();
    let x_exp: Vec<f64> = pts.iter().map(|p| p.0).collect();
    let y: Vec<f64> = pts.iter().map(|p| p.1.ln()).collect();
    let (pw, ex) = (fit_line(&x_pow, &y), fit_line(&x_exp, &y));
    if pw.is_none() {
        note = Some(String::from("fewer than two usable points"));
    }
    let pw = pw.map_or((f64::NAN, f64::NAN), |f| (f.slope, f.residual));
    let ex = ex.map_or((f64::NAN, f64::NAN), |f| (-f.slope, f.residual));
    NormFit {
        norm: name.to_string(),
        points: pts.len(),
        power_slope: pw.0,
        power_residual: pw.1,
        exp_rate: ex.0,
        exp_residual: ex.1,
        preferred: if pw.1 <= ex.1 { "power" } else { "exponential" },
        note,
    }
}

/// Power-law and exponential fits of every recorded norm on `window`.
pub fn measure_decay(res: &SimResult, window: (f64, f64)) -> Result<DecayFits, SimError> {
    let (lo, hi) = match (res.times.first(), res.times.last()) {
        (Some(&a), Some(&b)) => (a, b),
        _ => return Err(SimError::Window("empty time series".into())),
    };
    let slack = 1e-9 * hi.abs().max(1.0);
    if !(window.0 < window.1) || window.0 < lo - slack || window.1 > hi + slack {
        return Err(SimError::Window(format!("[{}, {}] not inside the simulated span [{lo}, {hi}]", window.0, window.1)));
    }
    let mut fits = vec![
        fit_series("L2", &res.times, &res.l2, window),
        fit_series("Linf", &res.times, &res.linf, window),
    ];
    for s in &res.sobolev {
        fits.push(fit_series(&format!("H^{}", s.s), &res.times, &s.values, window));
    }
    Ok(DecayFits { window, fits })
}

/// `t = 0` followed by `count` geometrically spaced times ending at `t_final`,
/// the first at `max(t_min, t_final·1e−3)`.
pub fn geometric_times(t_final: f64, count: usize, t_min: f64) -> Vec<f64> {
    let lo = t_min.max(t_final * 1e-3).min(t_final);
    let mut out = vec![0.0];
    if count == 1 || lo == t_final {
        out.push(t_final);
        return out;
    }
    let (a, b) = (lo.ln(), t_final.ln());
    for k in 0..count {
        out.push((a + (b - a) * k as f64 / (count - 1) as f64).exp());
    }
    out
}

/// Snaps times to multiples of `dt`, dropping duplicates.
pub fn snap_times(times: &[f64], dt: f64) -> Vec<f64> {
    output_steps(times, dt).into_iter().map(|s| s as f64 * dt).collect()
}

/// Mode amplitude checked against `C e^{−cρ(|ξ_k|)t} |Û₀(k)|`.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct EnvelopeCheck {
    pub k: Vec<i64>,
    pub t: f64,
    pub amplitude: f64,
    pub bound: f64,
    pub ok: bool,
}

/// Compares recorded mode amplitudes with a decay certificate `(C, c)`.
/// Needs `record_modes` and an output at `t = 0`.
pub fn envelope_check(res: &SimResult, big_c: f64, c_rate: f64) -> Result<Vec<EnvelopeCheck>, SimError> {
    if res.modes.is_empty() || res.times[0] != 0.0 {
        return Err(SimError::Precondition("envelope check needs recorded modes including t = 0".into()));
    }
    let grid = res.integrator.grid;
    let a0 = &res.modes[0];
    let floor = 1e-12 * a0.iter().fold(0.0f64, |m, x| m.max(*x));
    let mut out = Vec::new();
    for (ti, &t) in res.times.iter().enumerate() {
        for (f, &amp) in res.modes[ti].iter().enumerate() {
            if a0[f] <= floor {
                continue;
            }
            let r = grid.xi(f).iter().map(|x| x * x).sum::<f64>().sqrt();
            let bound = big_c * (-c_rate * rho(r) * t).exp() * a0[f];
            out.push(EnvelopeCheck { k: grid.wavenumbers(f), t, amplitude: amp, bound, ok: amp <= bound * (1.0 + 1e-9) + floor });
        }
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use hbl_core::model::fixtures::telegraph;

    #[test]
    fn power_and_exponential_fits() {
        let t: Vec<f64> = (0..200).map(|i| i as f64 * 0.5).collect();
        let p: Vec<f64> = t.iter().map(|t| (1.0 + t).powf(-0.75)).collect();
        let f = fit_series("x", &t, &p, (1.0, 99.0));
        assert!((f.power_slope + 0.75).abs() < 1e-6);
        assert_eq!(f.preferred, "power");
        let e: Vec<f64> = t.iter().map(|t| (-0.3 * t).exp()).collect();
        let f = fit_series("x", &t, &e, (1.0, 99.0));
        assert!((f.exp_rate - 0.3).abs() < 1e-9);
        assert!(f.power_residual > 1.0);
        assert_eq!(f.preferred, "exponential");
    }

    #[test]
    fn tiny_norms_truncate_the_window() {
        let t = [1.0, 2.0, 3.0, 4.0];
        let f = fit_series("x", &t, &[1.0, 0.5, 0.0, 0.0], (1.0, 4.0));
        assert_eq!(f.points, 2);
        assert!(f.note.unwrap().contains("truncated"));
    }

    #[test]
    fn window_must_lie_in_span() {
        let g = PeriodicGrid::new(1, 32, 6.0).unwrap();
        let u0 = init::gaussian(&g, 2, 1.0, 0.5, Some(0));
        let res = simulate_linear(&telegraph(), &g, &u0, &[0.0, 1.0, 2.0], &SimOptions::default()).unwrap();
        assert!(measure_decay(&res, (0.5, 2.0)).is_ok());
        assert!(measure_decay(&res, (0.5, 3.0)).is_err());
    }

    #[test]
    fn geometric_cadence() {
        let t = geometric_times(50.0, 10, 0.1);
        assert_eq!(t[0], 0.0);
        assert!((t[1] - 0.1).abs() < 1e-12);
        assert!((t.last().unwrap() - 50.0).abs() < 1e-9);
        assert!(t.windows(2).all(|w| w[1] > w[0]));
    }
}
