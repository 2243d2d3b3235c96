//! Structural conditions (H), (RH), (K) and the dissipation conditions
//! (D1)-(D3), decided on sampled frequency grids.

#[allow(unused_imports)]
use num_traits::Float;
use alloc::format;
use alloc::string::String;
use alloc::vec;
use alloc::vec::Vec;

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::decay::rho;
use crate::error::{Error, Result};
use crate::grid::{RadialGrid, SphereGrid};
use crate::linalg::{self, c, CMat, RMat, IMAG};
use crate::model::{second_order_reduction, BalanceLawSpec, JinXinSpec, LinearSystem};
use crate::report::{ConditionReport, CurvePoint, GridMeta, Verdict, Witness};
use crate::spectral::{self, default_cluster_tol, eig_grouped, is_real_semisimple};

/// Asymptotic guard radii for (D1).
pub const GUARD_SMALL: f64 = 1e-6;
pub const GUARD_LARGE: f64 = 1e6;
const MAX_WITNESSES: usize = 8;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct Tolerances {
    /// Largest `|Im λ|` accepted as a real eigenvalue.
    pub real_imag: f64,
    /// Stable compatibility requires projected real parts below `-compat`.
    pub compat: f64,
    /// (D1) requires `max Re λ(rω) < -d1_rel·ρ(r)`.
    pub d1_rel: f64,
    /// (RH) requires `max Re spec(q_v) < -rh`.
    pub rh: f64,
    /// Eigenvalue clustering distance; `None` uses `1e-6(1 + ‖M‖_F)`.
    pub cluster: Option<f64>,
    /// Local refinement of the worst grid point.
    pub refine: bool,
}

impl Default for Tolerances {
    fn default() -> Self {
        Self { real_imag: 1e-8, compat: 1e-10, d1_rel: 1e-10, rh: 1e-10, cluster: None, refine: true }
    }
}

impl Tolerances {
    fn cluster_tol(&self, m: &CMat) -> f64 {
        self.cluster.unwrap_or_else(|| default_cluster_tol(m))
    }
}

fn sphere_meta(grid: &SphereGrid, tol: f64) -> GridMeta {
    GridMeta { d: grid.d, sphere_points: grid.len(), radial: None, tol }
}

fn scale(x: &[f64], r: f64) -> Vec<f64> {
    x.iter().map(|v| v * r).collect()
}

fn normalize(v: &mut [f64]) {
    let n = v.iter().map(|x| x * x).sum::<f64>().sqrt();
    for x in v.iter_mut() {
        *x /= n;
    }
}

/// Orthonormal basis of the tangent space of the sphere at `omega`.
fn tangent_basis(omega: &[f64]) -> Vec<Vec<f64>> {
    let d = omega.len();
    let mut basis: Vec<Vec<f64>> = Vec::new();
    for k in 0..d {
        let mut e = vec![0.0; d];
        e[k] = 1.0;
        for b in core::iter::once(omega).chain(basis.iter().map(|b| b.as_slice())) {
            let dot: f64 = e.iter().zip(b).map(|(x, y)| x * y).sum();
            for (x, y) in e.iter_mut().zip(b) {
                *x -= dot * y;
            }
        }
        let n = e.iter().map(|x| x * x).sum::<f64>().sqrt();
        if n > 1e-8 {
            for x in &mut e {
                *x /= n;
            }
            basis.push(e);
        }
        if basis.len() + 1 == d {
            break;
        }
    }
    basis
}

/// Compass search on the sphere for a smaller value of `f`, starting at
/// `omega` with angular step `step`. Points where `f` errors are skipped.
pub fn refine_on_sphere<F>(f: F, omega: &[f64], value: f64, step: f64) -> (Vec<f64>, f64)
where
    F: Fn(&[f64]) -> Option<f64>,
{
    let mut best = omega.to_vec();
    let mut best_val = value;
    if omega.len() < 2 {
        return (best, best_val);
    }
    let mut h = step;
    let mut evals = 0;
    while h > 1e-7 && evals < 200 {
        let mut improved = false;
        for t in tangent_basis(&best) {
            for sign in [1.0, -1.0] {
                let mut trial: Vec<f64> = best.iter().zip(&t).map(|(w, e)| w + sign * h * e).collect();
                normalize(&mut trial);
                evals += 1;
                if let Some(v) = f(&trial) {
                    if v < best_val {
                        best_val = v;
                        best = trial;
                        improved = true;
                    }
                }
            }
        }
        if !improved {
            h *= 0.5;
        }
    }
    (best, best_val)
}

fn angular_step(grid: &SphereGrid) -> f64 {
    match grid.d {
        1 => 0.0,
        2 => 2.0 * core::f64::consts::PI / grid.len() as f64,
        d => (grid.area() / grid.len() as f64).powf(1.0 / (d - 1) as f64),
    }
}

/// Keeps the report's witness list short: the worst point plus the first few
/// violations in grid order.
struct WitnessLog {
    failing: Vec<Witness>,
    worst: Option<Witness>,
}

impl WitnessLog {
    fn new() -> Self {
        Self { failing: Vec::new(), worst: None }
    }

    fn offer(&mut self, w: Witness) {
        if w.margin <= 0.0 && self.failing.len() < MAX_WITNESSES {
            self.failing.push(w.clone());
        }
        if self.worst.as_ref().map_or(true, |b| w.margin < b.margin) {
            self.worst = Some(w);
        }
    }

    fn into_report(self, report: &mut ConditionReport) {
        let worst = self.worst;
        for w in self.failing {
            report.witness(w);
        }
        if let Some(w) = worst {
            report.margin = report.margin.min(w.margin);
            if !report.witnesses.iter().any(|x| x == &w) {
                report.witnesses.insert(0, w);
            }
        }
    }
}

/// Hyperbolicity: `A(ω)` real semi-simple at every grid point with a constant
/// multiplicity pattern.
pub fn check_h(sys: &LinearSystem, grid: &SphereGrid, tol: &Tolerances) -> Result<ConditionReport> {
    let mut report = ConditionReport::new("H", sphere_meta(grid, tol.real_imag));
    let mut log = WitnessLog::new();
    let mut pattern: Option<Vec<usize>> = None;
    let mut varying = false;
    for omega in grid.iter() {
        let chk = is_real_semisimple(&sys.a_omega(omega), tol.real_imag)?;
        let detail = match chk.verdict {
            Verdict::Holds => String::from("real semi-simple"),
            Verdict::Inconclusive => String::from("rank test borderline"),
            Verdict::Fails => String::from("eigenvalue not real or defective"),
        };
        report.downgrade(chk.verdict);
        log.offer(Witness::new(omega, chk.witness, chk.margin, detail));
        let mut mult = chk.multiplicities.clone();
        mult.sort_unstable();
        match &pattern {
            None => pattern = Some(mult),
            Some(p) if grid.d > 1 && *p != mult => varying = true,
            _ => {}
        }
    }
    log.into_report(&mut report);
    if varying && report.verdict == Verdict::Holds {
        report.verdict = Verdict::Inconclusive;
        report.note("multiplicities vary over the sphere; constant hyperbolicity not established");
    }
    Ok(report.finish())
}

/// (RH) on the lower-right block `q_v` of the source Jacobian.
pub fn check_rh(spec: &BalanceLawSpec, tol: &Tolerances) -> Result<ConditionReport> {
    let (m, r) = (spec.m, spec.n - spec.m);
    let qv = spec.source_jacobian.view((m, m), (r, r)).into_owned();
    check_rh_block(&qv, tol)
}

pub fn check_rh_block(qv: &RMat, tol: &Tolerances) -> Result<ConditionReport> {
    let mut report = ConditionReport::new("RH", GridMeta { tol: tol.rh, ..GridMeta::default() });
    let eigs = linalg::eigenvalues(&linalg::to_complex(qv))?;
    let worst = eigs.iter().copied().max_by(|a, b| a.re.total_cmp(&b.re)).unwrap_or(c(f64::NEG_INFINITY));
    report.margin = -worst.re;
    let fails = worst.re >= -tol.rh;
    if fails {
        report.verdict = Verdict::Fails;
        report.margin = report.margin.min(0.0);
    }
    report.witness(Witness::new(&[], Some(worst), report.margin, "eigenvalue of q_v with largest real part"));
    Ok(report.finish())
}

/// Kawashima-Shizuta: `ker(λ − A(ω)) ∩ ker 𝓛 = {0}` for every eigenvalue λ
/// of `A(ω)`, decided by the smallest singular value of `[λI − A(ω); 𝓛]`.
pub fn check_k(sys: &LinearSystem, grid: &SphereGrid, tol: &Tolerances) -> Result<ConditionReport> {
    let n = sys.n;
    let source = linalg::to_complex(&sys.source);
    let mut report = ConditionReport::new("K", sphere_meta(grid, tol.real_imag));
    let mut log = WitnessLog::new();
    for omega in grid.iter() {
        let a = linalg::to_complex(&sys.a_omega(omega));
        let scale = 1.0 + linalg::spectral_norm(&a) + linalg::spectral_norm(&source);
        let thr = f64::EPSILON.sqrt() * scale;
        for lam in linalg::eigenvalues(&a)? {
            let mut stacked = CMat::zeros(2 * n, n);
            stacked.view_mut((0, 0), (n, n)).copy_from(&(CMat::identity(n, n) * lam - &a));
            stacked.view_mut((n, 0), (n, n)).copy_from(&source);
            let smin = linalg::singular_values(&stacked).last().copied().unwrap_or(0.0);
            let margin = smin - thr;
            if margin <= 0.0 {
                report.downgrade(Verdict::Fails);
            } else if smin <= 10.0 * thr {
                report.downgrade(Verdict::Inconclusive);
            }
            log.offer(Witness::new(omega, Some(lam), margin, "smallest singular value of [λ − A(ω); 𝓛] minus threshold"));
        }
    }
    log.into_report(&mut report);
    Ok(report.finish())
}

/// Pointwise (SC)′ data at one direction.
#[derive(Debug, Clone, PartialEq)]
pub struct CompatPoint {
    /// `-max Re spec(J_L h J_R) - tol` over all groups.
    pub margin: f64,
    pub worst_eigenvalue: Complex64,
    pub worst_group: Complex64,
    pub multiplicities: Vec<usize>,
    /// Projected eigenvalues per group, in group order.
    pub projected: Vec<(Complex64, Vec<Complex64>)>,
}

/// Evaluates (SC)′ for `h` against the groups of `big_h` at a single point.
///
/// Errors when `big_h` is not semi-simple or has an eigenvalue off the
/// imaginary axis.
pub fn compat_at(big_h: &CMat, h: &CMat, tol: &Tolerances) -> Result<CompatPoint> {
    let ctol = tol.cluster_tol(big_h);
    let groups = eig_grouped(big_h, ctol)?;
    let mut out = CompatPoint {
        margin: f64::INFINITY,
        worst_eigenvalue: c(f64::NEG_INFINITY),
        worst_group: c(0.0),
        multiplicities: Vec::with_capacity(groups.len()),
        projected: Vec::with_capacity(groups.len()),
    };
    for g in &groups {
        if g.value.re.abs() > tol.real_imag.max(ctol) {
            return Err(Error::Precondition {
                condition: "purely imaginary reference spectrum",
                detail: format!("eigenvalue {} has nonzero real part", g.value),
            });
        }
        let eigs = linalg::eigenvalues(&g.project(h))?;
        for &z in &eigs {
            let m = -z.re - tol.compat;
            if m < out.margin {
                out.margin = m;
                out.worst_eigenvalue = z;
                out.worst_group = g.value;
            }
        }
        out.multiplicities.push(g.multiplicity);
        out.projected.push((g.value, eigs));
    }
    Ok(out)
}

/// Stable compatibility (SC)′ of the family `h(ω)` with `H(ω)` on a grid.
///
/// Holds when every projected block is strictly stable and the group
/// multiplicities do not change over the sphere; pointwise success with
/// changing multiplicities is inconclusive.
pub fn stable_compat<F, G>(name: &str, big_h: F, h: G, grid: &SphereGrid, tol: &Tolerances) -> Result<ConditionReport>
where
    F: Fn(&[f64]) -> CMat,
    G: Fn(&[f64]) -> CMat,
{
    let mut report = ConditionReport::new(name, sphere_meta(grid, tol.compat));
    let mut log = WitnessLog::new();
    let mut pattern: Option<Vec<usize>> = None;
    let mut varying = false;
    let mut worst: Option<(Vec<f64>, f64)> = None;
    for omega in grid.iter() {
        match compat_at(&big_h(omega), &h(omega), tol) {
            Ok(p) => {
                if p.margin <= 0.0 {
                    report.downgrade(Verdict::Fails);
                }
                if worst.as_ref().map_or(true, |w| p.margin < w.1) {
                    worst = Some((omega.to_vec(), p.margin));
                }
                let detail = format!("projected block of group {} has eigenvalue {}", p.worst_group, p.worst_eigenvalue);
                log.offer(Witness::new(omega, Some(p.worst_eigenvalue), p.margin, detail));
                let mut mult = p.multiplicities;
                mult.sort_unstable();
                match &pattern {
                    None => pattern = Some(mult),
                    Some(q) if grid.d > 1 && *q != mult => varying = true,
                    _ => {}
                }
            }
            Err(Error::NotSemisimple { eigenvalue }) => {
                report.downgrade(Verdict::Fails);
                log.offer(Witness::new(omega, Some(eigenvalue), 0.0, "reference matrix is not semi-simple"));
            }
            Err(Error::Precondition { detail, .. }) => {
                report.downgrade(Verdict::Fails);
                log.offer(Witness::new(omega, None, 0.0, detail));
            }
            Err(e) => return Err(e),
        }
    }
    if tol.refine && grid.d > 1 {
        if let Some((omega, value)) = worst {
            let f = |w: &[f64]| compat_at(&big_h(w), &h(w), tol).ok().map(|p| p.margin);
            let (w, v) = refine_on_sphere(f, &omega, value, angular_step(grid));
            if v < value {
                if let Ok(p) = compat_at(&big_h(&w), &h(&w), tol) {
                    if v <= 0.0 {
                        report.downgrade(Verdict::Fails);
                    }
                    log.offer(Witness::new(&w, Some(p.worst_eigenvalue), v, "refined worst direction"));
                }
            }
        }
    }
    log.into_report(&mut report);
    if varying && report.verdict == Verdict::Holds {
        report.verdict = Verdict::Inconclusive;
        report.note("group multiplicities vary over the sphere; only the pointwise test passed");
    }
    Ok(report.finish())
}

/// Largest real part of `spec 𝓜(ξ)`.
fn abscissa(sys: &LinearSystem, xi: &[f64]) -> Result<(f64, Complex64)> {
    let eigs = linalg::eigenvalues(&sys.symbol(xi))?;
    let z = eigs.iter().copied().max_by(|a, b| a.re.total_cmp(&b.re)).unwrap_or(c(0.0));
    Ok((z.re, z))
}

/// Radial scan for (D1) shared by the full symbol and the Jin-Xin pencil.
fn d1_scan<F>(
    name: &str,
    eval: F,
    rgrid: &RadialGrid,
    sgrid: &SphereGrid,
    tol: &Tolerances,
) -> Result<ConditionReport>
where
    F: Fn(&[f64]) -> Result<(f64, Complex64)>,
{
    let meta = GridMeta {
        d: sgrid.d,
        sphere_points: sgrid.len(),
        radial: Some((rgrid.min, rgrid.max, rgrid.count)),
        tol: tol.d1_rel,
    };
    let mut report = ConditionReport::new(name, meta);
    let mut log = WitnessLog::new();
    let mut worst: Option<(f64, Vec<f64>, f64)> = None;
    for r in rgrid.iter() {
        let thr = tol.d1_rel * rho(r);
        let mut curve_max = f64::NEG_INFINITY;
        for omega in sgrid.iter() {
            let xi = scale(omega, r);
            let (re, z) = eval(&xi)?;
            curve_max = curve_max.max(re);
            let margin = -re - thr;
            if margin <= 0.0 {
                report.downgrade(Verdict::Fails);
            }
            if worst.as_ref().map_or(true, |w| margin < w.2) {
                worst = Some((r, omega.to_vec(), margin));
            }
            log.offer(Witness::new(&xi, Some(z), margin, "eigenvalue of largest real part at ξ"));
        }
        report.curve.push(CurvePoint { radius: r, max_re: curve_max });
    }
    if tol.refine {
        if let Some((r0, omega, value)) = worst {
            // golden-section in log r between the neighbouring grid radii
            let idx = rgrid.values.iter().position(|&r| r == r0).unwrap_or(0);
            let lo = rgrid.values[idx.saturating_sub(1)].ln();
            let hi = rgrid.values[(idx + 1).min(rgrid.count - 1)].ln();
            let f = |lr: f64, w: &[f64]| -> Option<f64> {
                let r = lr.exp();
                eval(&scale(w, r)).ok().map(|(re, _)| -re - tol.d1_rel * rho(r))
            };
            let (mut a, mut b) = (lo, hi);
            let g = 0.5 * (5.0f64.sqrt() - 1.0);
            for _ in 0..40 {
                let x1 = b - g * (b - a);
                let x2 = a + g * (b - a);
                match (f(x1, &omega), f(x2, &omega)) {
                    (Some(f1), Some(f2)) if f1 < f2 => b = x2,
                    (Some(_), Some(_)) => a = x1,
                    _ => break,
                }
            }
            let lr = 0.5 * (a + b);
            let mut best_r = r0;
            let mut best_w = omega.clone();
            let mut best_v = value;
            if let Some(v) = f(lr, &omega) {
                if v < best_v {
                    best_v = v;
                    best_r = lr.exp();
                }
            }
            if sgrid.d > 1 {
                let rr = best_r;
                let fw = |w: &[f64]| f(rr.ln(), w);
                let (w, v) = refine_on_sphere(fw, &best_w, best_v, angular_step(sgrid));
                best_w = w;
                best_v = v;
            }
            if best_v < value {
                let xi = scale(&best_w, best_r);
                let (_, z) = eval(&xi)?;
                if best_v <= 0.0 {
                    report.downgrade(Verdict::Fails);
                }
                log.offer(Witness::new(&xi, Some(z), best_v, "refined worst frequency"));
            }
        }
    }
    log.into_report(&mut report);
    Ok(report)
}

/// Asymptotic guard evaluation at `|ξ| = r` over the sphere grid.
fn guard<F>(eval: &F, r: f64, sgrid: &SphereGrid) -> Result<(f64, Vec<f64>, Complex64)>
where
    F: Fn(&[f64]) -> Result<(f64, Complex64)>,
{
    let mut worst = (f64::NEG_INFINITY, Vec::new(), c(0.0));
    for omega in sgrid.iter() {
        let xi = scale(omega, r);
        let (re, z) = eval(&xi)?;
        if re > worst.0 {
            worst = (re, xi, z);
        }
    }
    Ok(worst)
}

/// (D1): `max Re spec 𝓜(rω) < −tol·ρ(r)` on the grid, with guards at
/// `|ξ| = 1e−6` and `1e6`. A guard value above the eigenvalue resolution is a
/// failure; otherwise the endpoint behaviour is reported through (D2)/(D3).
pub fn check_d1(sys: &LinearSystem, rgrid: &RadialGrid, sgrid: &SphereGrid, tol: &Tolerances) -> Result<ConditionReport> {
    let eval = |xi: &[f64]| abscissa(sys, xi);
    let mut report = d1_scan("D1", eval, rgrid, sgrid, tol)?;
    let d2 = sys.normal_form().ok().map(|nf| check_d2(&nf, sgrid, &Tolerances { refine: false, ..*tol }));
    let d3 = check_d3(sys, sgrid, &Tolerances { refine: false, ..*tol });
    let gates = [
        (GUARD_SMALL, "D2", d2.map(|r| r.map(|r| r.verdict))),
        (GUARD_LARGE, "D3", Some(d3.map(|r| r.verdict))),
    ];
    for (r, cond, gate) in gates {
        let (re, xi, z) = guard(&eval, r, sgrid)?;
        let resolution = 1e3 * f64::EPSILON * linalg::frobenius(&sys.symbol(&xi));
        if re > resolution {
            report.downgrade(Verdict::Fails);
            report.margin = report.margin.min(-re);
            report.witness(Witness::new(&xi, Some(z), -re, format!("asymptotic guard at |ξ| = {r:e}")));
        } else {
            let gate = match gate {
                Some(Ok(v)) => v.as_str(),
                _ => "unavailable",
            };
            report.note(format!(
                "guard |ξ| = {r:e}: max Re λ = {re:.3e} (resolution {resolution:.1e}); endpoint governed by {cond}, which {gate}"
            ));
        }
    }
    Ok(report.finish())
}

/// (D2) for a system in normal form: `A₁₁(ω)` real semi-simple and
/// `A₁₂(ω)L⁻¹A₂₁(ω)` stably compatible with `−iA₁₁(ω)`.
pub fn check_d2(sys: &LinearSystem, grid: &SphereGrid, tol: &Tolerances) -> Result<ConditionReport> {
    let owned;
    let sys = if sys.is_normal_form() {
        sys
    } else {
        owned = sys.normal_form()?;
        &owned
    };
    let linv = linalg::inverse_real(&sys.l_block())?;
    let mut report = ConditionReport::new("D2", sphere_meta(grid, tol.compat));
    let mut semi = ConditionReport::new("D2 semi-simplicity", sphere_meta(grid, tol.real_imag));
    let mut log = WitnessLog::new();
    for omega in grid.iter() {
        let chk = is_real_semisimple(&sys.blocks(omega).a11, tol.real_imag)?;
        semi.downgrade(chk.verdict);
        log.offer(Witness::new(omega, chk.witness, chk.margin, "A₁₁(ω) real semi-simplicity"));
    }
    log.into_report(&mut semi);
    let compat = stable_compat(
        "D2 compatibility",
        |w| sys.blocks(w).a11.map(|x| -IMAG * x),
        |w| {
            let b = sys.blocks(w);
            linalg::to_complex(&(&b.a12 * &linv * &b.a21))
        },
        grid,
        tol,
    )?;
    report.margin = compat.margin;
    report.verdict = compat.verdict;
    report.witnesses = compat.witnesses;
    report.notes = compat.notes;
    if semi.verdict != Verdict::Holds {
        report.absorb(semi.finish());
    }
    Ok(report.finish())
}

/// (D3): `𝓛` stably compatible with `−iA(ω)`.
pub fn check_d3(sys: &LinearSystem, grid: &SphereGrid, tol: &Tolerances) -> Result<ConditionReport> {
    let source = linalg::to_complex(&sys.source);
    stable_compat("D3", |w| sys.a_omega(w).map(|x| -IMAG * x), |_| source.clone(), grid, tol)
}

/// Reduced Jin-Xin conditions plus the sufficient dissipation condition.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct JinXinReport {
    pub d1: ConditionReport,
    pub d2: ConditionReport,
    pub d3: ConditionReport,
    /// Definiteness of the symmetric part of `(δ_jk b^j − K^j K^k)`.
    pub disp2: ConditionReport,
    /// `Some(true)` when all `b^j` are scalar multiples of the identity, the
    /// dissipation condition holds and so do all three reduced conditions.
    pub sufficient_implies: Option<bool>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub notes: Vec<String>,
}

impl JinXinReport {
    pub fn reports(&self) -> [&ConditionReport; 4] {
        [&self.d1, &self.d2, &self.d3, &self.disp2]
    }
}

/// `𝓑(ω)^{-1/2}` and the symmetric eigen-groups of `𝓑(ω)`.
fn sqrt_groups(b: &RMat, tol: &Tolerances) -> Result<(RMat, Vec<RMat>)> {
    let eig = b.clone().symmetric_eigen();
    let vals: Vec<f64> = eig.eigenvalues.iter().copied().collect();
    let lmax = vals.iter().copied().fold(0.0, f64::max);
    let lmin = vals.iter().copied().fold(f64::INFINITY, f64::min);
    if !(lmin > 0.0) || lmax / lmin > 1e10 {
        return Err(Error::Precondition {
            condition: "positive definite 𝓑(ω)",
            detail: format!("eigenvalues in [{lmin:e}, {lmax:e}]"),
        });
    }
    let m = b.nrows();
    let inv_sqrt = RMat::from_diagonal(&nalgebra::DVector::from_iterator(m, vals.iter().map(|v| 1.0 / v.sqrt())));
    let q = &eig.eigenvectors;
    let b_inv_sqrt = q * inv_sqrt * q.transpose();
    let ctol = tol.cluster.unwrap_or(1e-6 * (1.0 + linalg::frobenius_real(b)));
    let cvals: Vec<Complex64> = vals.iter().map(|&v| c(v.sqrt())).collect();
    let groups = spectral::cluster(&cvals, ctol)
        .into_iter()
        .map(|cl| RMat::from_fn(m, cl.len(), |i, j| q[(i, cl[j])]))
        .collect();
    Ok((b_inv_sqrt, groups))
}

/// Evaluates (D1)₂ through the pencil roots, (D2)₂ and (D3)₂ on the grids,
/// and the sufficient condition `Re(δ_jk b^j − K^j K^k) > 0`.
///
/// The reduced conditions are stated at `ε = 1`; a system with another
/// relaxation rate is the rescaling `t = εs, x = εy` of the `ε = 1` system
/// with the same `b` and `K`, so its verdicts coincide.
pub fn check_jinxin(jx: &JinXinSpec, rgrid: &RadialGrid, sgrid: &SphereGrid, tol: &Tolerances) -> Result<JinXinReport> {
    jx.validate()?;
    if sgrid.d != jx.d {
        return Err(Error::Dimension { what: "sphere grid dimension", expected: jx.d, found: sgrid.d });
    }
    let mut notes = Vec::new();
    let unit = JinXinSpec { eps: 1.0, ..jx.clone() };
    if jx.eps != 1.0 {
        notes.push(format!(
            "rescaled time convention: ε = {} maps to ε = 1 under t = εs, x = εy; reduced conditions are evaluated at ε = 1",
            jx.eps
        ));
    }
    let wave = second_order_reduction(&unit)?;
    let pencil = |xi: &[f64]| -> Result<(f64, Complex64)> {
        let roots = wave.pencil_roots(xi)?;
        let z = roots.iter().copied().max_by(|a, b| a.re.total_cmp(&b.re)).unwrap_or(c(0.0));
        Ok((z.re, z))
    };
    let d1 = d1_scan("D1_2", pencil, rgrid, sgrid, tol)?.finish();

    let d2 = stable_compat(
        "D2_2",
        |w| unit.k_symbol(w).map(|x| -IMAG * x),
        |w| {
            let k = unit.k_symbol(w);
            linalg::to_complex(&(&k * &k - unit.b_symbol(w)))
        },
        sgrid,
        tol,
    )?;

    let d3 = check_d3_reduced(&unit, sgrid, tol)?;

    let disp2 = check_disp2(&unit);
    let scalar_b = unit.b.iter().all(|b| {
        let s = b[(0, 0)];
        (b - RMat::identity(unit.m, unit.m) * s).amax() <= 1e-12 * (1.0 + s.abs())
    });
    let sufficient_implies = if scalar_b && disp2.holds() {
        Some(d1.holds() && d2.holds() && d3.holds())
    } else {
        None
    };
    if sufficient_implies == Some(false) {
        notes.push(String::from("sufficient dissipation condition holds but a reduced condition does not"));
    }
    Ok(JinXinReport { d1, d2, d3, disp2, sufficient_implies, notes })
}

/// (D3)₂: `−I ± 𝓑(ω)^{-1/2}K(ω)` stably compatible with `i𝓑(ω)`.
pub fn check_d3_reduced(jx: &JinXinSpec, grid: &SphereGrid, tol: &Tolerances) -> Result<ConditionReport> {
    let m = jx.m;
    let mut report = ConditionReport::new("D3_2", sphere_meta(grid, tol.compat));
    let mut log = WitnessLog::new();
    let mut pattern: Option<Vec<usize>> = None;
    let mut varying = false;
    let eval = |omega: &[f64]| -> Result<(f64, Complex64, Vec<usize>)> {
        let (b_is, groups) = sqrt_groups(&jx.b_symbol(omega), tol)?;
        let bk = &b_is * jx.k_symbol(omega);
        let mut worst = (f64::INFINITY, c(0.0));
        let mut mult = Vec::new();
        for p in &groups {
            mult.push(p.ncols());
            for sign in [1.0, -1.0] {
                let h = -RMat::identity(m, m) + &bk * sign;
                let block = p.transpose() * h * p;
                for z in linalg::eigenvalues(&linalg::to_complex(&block))? {
                    let margin = -z.re - tol.compat;
                    if margin < worst.0 {
                        worst = (margin, z);
                    }
                }
            }
        }
        mult.sort_unstable();
        Ok((worst.0, worst.1, mult))
    };
    let mut worst_point: Option<(Vec<f64>, f64)> = None;
    for omega in grid.iter() {
        match eval(omega) {
            Ok((margin, z, mult)) => {
                if margin <= 0.0 {
                    report.downgrade(Verdict::Fails);
                }
                if worst_point.as_ref().map_or(true, |w| margin < w.1) {
                    worst_point = Some((omega.to_vec(), margin));
                }
                log.offer(Witness::new(omega, Some(z), margin, "projected block −I ± 𝓑^{-1/2}K"));
                match &pattern {
                    None => pattern = Some(mult),
                    Some(q) if grid.d > 1 && *q != mult => varying = true,
                    _ => {}
                }
            }
            Err(Error::Precondition { detail, .. }) => {
                report.downgrade(Verdict::Fails);
                log.offer(Witness::new(omega, None, 0.0, detail));
            }
            Err(e) => return Err(e),
        }
    }
    if tol.refine && grid.d > 1 {
        if let Some((omega, value)) = worst_point {
            let f = |w: &[f64]| eval(w).ok().map(|x| x.0);
            let (w, v) = refine_on_sphere(f, &omega, value, angular_step(grid));
            if v < value {
                if let Ok((margin, z, _)) = eval(&w) {
                    if margin <= 0.0 {
                        report.downgrade(Verdict::Fails);
                    }
                    log.offer(Witness::new(&w, Some(z), margin, "refined worst direction"));
                }
            }
        }
    }
    log.into_report(&mut report);
    if varying && report.verdict == Verdict::Holds {
        report.verdict = Verdict::Inconclusive;
        report.note("eigenvalue multiplicities of 𝓑(ω) vary over the sphere");
    }
    Ok(report.finish())
}

/// Sufficient condition: `λ_min` of the symmetric part of the `md × md`
/// matrix `(δ_jk b^j − K^j K^k)_{j,k}` is positive.
pub fn check_disp2(jx: &JinXinSpec) -> ConditionReport {
    let (d, m) = (jx.d, jx.m);
    let mut h = RMat::zeros(m * d, m * d);
    for j in 0..d {
        for k in 0..d {
            let mut blk = -(&jx.flux_jac[j] * &jx.flux_jac[k]);
            if j == k {
                blk += &jx.b[j];
            }
            h.view_mut((j * m, k * m), (m, m)).copy_from(&blk);
        }
    }
    let sym = (&h + h.transpose()) * 0.5;
    let lmin = sym.symmetric_eigen().eigenvalues.iter().copied().fold(f64::INFINITY, f64::min);
    let mut report = ConditionReport::new("disp2", GridMeta { d, ..GridMeta::default() });
    report.margin = lmin;
    if lmin <= 0.0 {
        report.verdict = Verdict::Fails;
    }
    report.witness(Witness::new(&[], Some(c(lmin)), lmin, "smallest eigenvalue of the symmetric part"));
    report.finish()
}

/// The six conditions in the order H, RH, K, D1, D2, D3.
pub fn check_all(
    spec: &BalanceLawSpec,
    rgrid: &RadialGrid,
    sgrid: &SphereGrid,
    tol: &Tolerances,
) -> Result<Vec<ConditionReport>> {
    let sys = crate::model::linearize(spec)?;
    let mut out = vec![check_h(&sys, sgrid, tol)?, check_rh(spec, tol)?, check_k(&sys, sgrid, tol)?];
    out.push(check_d1(&sys, rgrid, sgrid, tol)?);
    match sys.normal_form() {
        Ok(nf) => out.push(check_d2(&nf, sgrid, tol)?),
        Err(e) => {
            let mut r = ConditionReport::new("D2", sphere_meta(sgrid, tol.compat));
            r.verdict = Verdict::Inconclusive;
            r.note(format!("normal form unavailable: {e}"));
            out.push(r.finish());
        }
    }
    out.push(check_d3(&sys, sgrid, tol)?);
    Ok(out)
}
