//! Frequency-dependent symmetrizers, pointwise decay certificates for
//! `exp(𝓜(ξ)t)`, eigenvalue expansions at small and large frequencies and
//! semigroup decay rates.

#[allow(unused_imports)]
use num_traits::Float;
use alloc::format;
use alloc::string::String;
use alloc::vec;
use alloc::vec::Vec;

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::grid::{RadialGrid, SphereGrid};
use crate::linalg::{self, c, CMat, RMat, IMAG};
use crate::model::LinearSystem;
use crate::quadrature::{fit_line, gauss_legendre_on, LineFit};
use crate::report::{GridMeta, Witness};
use crate::spectral::{default_cluster_tol, eig_grouped, lyapunov_symmetrizer, EigenGroup};

/// `ρ(τ) = τ² / (1 + τ²)`.
pub fn rho(tau: f64) -> f64 {
    let t2 = tau * tau;
    t2 / (1.0 + t2)
}

fn norm(x: &[f64]) -> f64 {
    x.iter().map(|v| v * v).sum::<f64>().sqrt()
}

fn scale(x: &[f64], r: f64) -> Vec<f64> {
    x.iter().map(|v| v * r).collect()
}

/// A Fourier multiplier `ξ ↦ 𝓜(ξ)` whose propagator is examined.
pub trait Symbol {
    /// Spatial dimension.
    fn dim(&self) -> usize;

    fn symbol(&self, xi: &[f64]) -> CMat;

    /// `‖exp(𝓜(ξ)t)‖₂`.
    fn propagator_norm(&self, xi: &[f64], t: f64) -> f64 {
        linalg::spectral_norm(&linalg::expm(&(self.symbol(xi) * c(t))))
    }

    /// `lim_{r→0} −max Re spec 𝓜(rω) / ρ(r)` when known in closed form.
    fn small_rate(&self, _omega: &[f64]) -> Option<f64> {
        None
    }

    /// `lim_{r→∞} −max Re spec 𝓜(rω)` when known in closed form.
    fn large_rate(&self, _omega: &[f64]) -> Option<f64> {
        None
    }
}

impl Symbol for LinearSystem {
    fn dim(&self) -> usize {
        self.d
    }

    fn symbol(&self, xi: &[f64]) -> CMat {
        LinearSystem::symbol(self, xi)
    }

    fn small_rate(&self, omega: &[f64]) -> Option<f64> {
        let nf = self.normal_form().ok()?;
        let (a11, h) = nf.small_frequency_blocks(omega).ok()?;
        let a = linalg::to_complex(&a11);
        let groups = eig_grouped(&a, default_cluster_tol(&a)).ok()?;
        let h = linalg::to_complex(&h);
        let mut worst = f64::NEG_INFINITY;
        for g in &groups {
            for z in linalg::eigenvalues(&g.project(&h)).ok()? {
                worst = worst.max(z.re);
            }
        }
        Some(-worst)
    }

    fn large_rate(&self, omega: &[f64]) -> Option<f64> {
        let a = linalg::to_complex(&self.a_omega(omega));
        let groups = eig_grouped(&a, default_cluster_tol(&a)).ok()?;
        let l = linalg::to_complex(&self.source);
        let mut worst = f64::NEG_INFINITY;
        for g in &groups {
            for z in linalg::eigenvalues(&g.project(&l)).ok()? {
                worst = worst.max(z.re);
            }
        }
        Some(-worst)
    }
}

/// The scalar multiplier `−i a·ξ − ρ(|ξ|)`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScalarModelSymbol {
    pub d: usize,
    pub drift: Vec<f64>,
}

impl ScalarModelSymbol {
    pub fn new(d: usize) -> Self {
        Self { d, drift: vec![0.0; d] }
    }

    pub fn with_drift(drift: Vec<f64>) -> Self {
        Self { d: drift.len(), drift }
    }
}

impl Symbol for ScalarModelSymbol {
    fn dim(&self) -> usize {
        self.d
    }

    fn symbol(&self, xi: &[f64]) -> CMat {
        let dot: f64 = self.drift.iter().zip(xi).map(|(a, x)| a * x).sum();
        CMat::from_element(1, 1, -IMAG * dot - c(rho(norm(xi))))
    }

    fn propagator_norm(&self, xi: &[f64], t: f64) -> f64 {
        (-rho(norm(xi)) * t).exp()
    }

    fn small_rate(&self, _omega: &[f64]) -> Option<f64> {
        Some(1.0)
    }

    fn large_rate(&self, _omega: &[f64]) -> Option<f64> {
        Some(1.0)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Regime {
    Small,
    Mid,
    Large,
}

impl Regime {
    /// `|ξ| ≤ 0.1` is small, `|ξ| ≥ 10` large.
    pub fn of_radius(r: f64) -> Regime {
        if r <= 0.1 {
            Regime::Small
        } else if r >= 10.0 {
            Regime::Large
        } else {
            Regime::Mid
        }
    }
}

/// Hermitian `D` with `Re(D𝓜(ξ)) ≤ −certified_c·ρ(|ξ|)·I`, scaled to
/// `λ_max(D) = 1`.
#[derive(Debug, Clone, PartialEq)]
pub struct Symmetrizer {
    pub xi: Vec<f64>,
    pub d: CMat,
    pub regime: Regime,
    pub certified_c: f64,
    pub lambda_min: f64,
    pub lambda_max: f64,
}

impl Symmetrizer {
    /// `λ_max(Re(D𝓜) + c ρ I)`, nonpositive up to rounding.
    pub fn verification_residual(&self, m: &CMat) -> f64 {
        let n = m.nrows();
        let r = rho(norm(&self.xi));
        let herm = linalg::hermitian_part(&(&self.d * m)) + CMat::identity(n, n) * c(self.certified_c * r);
        linalg::hermitian_eigenvalues(&herm).last().copied().unwrap_or(0.0)
    }
}

fn finish_symmetrizer(d: CMat, m: &CMat, xi: &[f64], regime: Regime) -> Result<Symmetrizer> {
    let d = linalg::hermitian_part(&d);
    let ev = linalg::hermitian_eigenvalues(&d);
    let (lo, hi) = (ev[0], *ev.last().expect("nonempty"));
    if !(lo > 0.0) {
        return Err(Error::Precondition { condition: "positive definite symmetrizer", detail: format!("λ_min(D) = {lo:e}") });
    }
    let d = d * c(1.0 / hi);
    let r = rho(norm(xi));
    let neg = -linalg::hermitian_part(&(&d * m));
    let certified_c = linalg::hermitian_eigenvalues(&neg)[0] / r;
    if !(certified_c > 0.0) {
        return Err(Error::RegimeBoundary { radius: norm(xi), gap: certified_c });
    }
    Ok(Symmetrizer { xi: xi.to_vec(), d, regime, certified_c, lambda_min: lo / hi, lambda_max: 1.0 })
}

/// Mid-frequency symmetrizer: the Lyapunov solution of `M*D + DM = −I`.
pub fn symmetrizer_mid(sys: &LinearSystem, xi: &[f64]) -> Result<Symmetrizer> {
    let m = sys.symbol(xi);
    let d = lyapunov_symmetrizer(&m)?;
    finish_symmetrizer(d, &m, xi, Regime::Mid)
}

/// `T = T₀(I + sZ)` with `Z_lk = G_lk / (i(μ_l − μ_k))` and `G = T₀⁻¹ h T₀`,
/// where `T₀` collects the right projectors of `groups`; returns
/// `T⁻* diag(D_l) T⁻¹` with `D_l` the Lyapunov symmetrizers of the `G_ll`.
///
/// With `N = −iΓ + s h` this removes the off-diagonal coupling of `h` to first
/// order in `s`. A non-Hurwitz diagonal block is reported as
/// [`Error::NotHurwitz`] carrying the offending eigenvalue.
pub fn corrected_block_symmetrizer(groups: &[EigenGroup], h: &CMat, s: f64) -> Result<CMat> {
    let n = h.nrows();
    let mut t0 = CMat::zeros(n, n);
    let mut offsets = Vec::with_capacity(groups.len());
    let mut off = 0;
    for g in groups {
        t0.view_mut((0, off), (n, g.multiplicity)).copy_from(&g.j_r);
        offsets.push(off);
        off += g.multiplicity;
    }
    let gmat = linalg::inverse(&t0)? * h * &t0;
    let mut z = CMat::zeros(n, n);
    let mut blocks = Vec::with_capacity(groups.len());
    for (l, gl) in groups.iter().enumerate() {
        let (ol, al) = (offsets[l], gl.multiplicity);
        blocks.push(lyapunov_symmetrizer(&gmat.view((ol, ol), (al, al)).into_owned())?);
        for (k, gk) in groups.iter().enumerate() {
            if k != l {
                let (ok, ak) = (offsets[k], gk.multiplicity);
                let denom = IMAG * (gl.value - gk.value);
                let blk = gmat.view((ol, ok), (al, ak)).map(|x| x / denom);
                z.view_mut((ol, ok), (al, ak)).copy_from(&blk);
            }
        }
    }
    let t = &t0 * (CMat::identity(n, n) + z * c(s));
    let t_inv = linalg::inverse(&t)?;
    let refs: Vec<&CMat> = blocks.iter().collect();
    Ok(t_inv.adjoint() * linalg::block_diag(&refs) * t_inv)
}

fn normal_form_pair(sys: &LinearSystem) -> Result<(LinearSystem, Option<RMat>)> {
    if sys.is_normal_form() {
        Ok((sys.clone(), None))
    } else {
        Ok((sys.normal_form()?, Some(sys.normal_form_transform()?)))
    }
}

/// Small-frequency symmetrizer at `ξ = κω`.
///
/// The spectrum of `𝓜(κω)` is split into the `m` eigenvalues nearest zero and
/// the rest; the graph-form bases `[I; X]` and `[Y; I]` of the two invariant
/// subspaces block-diagonalize `𝓜` into a slow block `≈ −iκA₁₁ + κ²A₁₂L⁻¹A₂₁`
/// and a fast block `≈ L`. The slow block gets the corrected group
/// symmetrizer of `A₁₂L⁻¹A₂₁` over the groups of `A₁₁(ω)`, the fast block
/// the Lyapunov symmetrizer of `L`.
pub fn symmetrizer_small(sys: &LinearSystem, kappa: f64, omega: &[f64]) -> Result<Symmetrizer> {
    let (nf, transform) = normal_form_pair(sys)?;
    let (m, n) = (nf.m, nf.n);
    let l = linalg::to_complex(&nf.l_block());
    let d2 = lyapunov_symmetrizer(&l).map_err(|e| Error::Precondition { condition: "RH", detail: format!("{e}") })?;
    let (a11, h) = nf.small_frequency_blocks(omega)?;
    let a11 = linalg::to_complex(&a11);
    let groups = eig_grouped(&a11, default_cluster_tol(&a11))
        .map_err(|e| Error::Precondition { condition: "D2", detail: format!("A₁₁(ω): {e}") })?;
    let d1 = corrected_block_symmetrizer(&groups, &linalg::to_complex(&h), kappa).map_err(|e| match e {
        Error::NotHurwitz { eigenvalue } => Error::Precondition {
            condition: "D2",
            detail: format!("projected block has eigenvalue {eigenvalue}"),
        },
        other => other,
    })?;

    let xi = scale(omega, kappa);
    let mm = nf.symbol(&xi);
    let (q, t) = linalg::schur(&mm)?;
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&i, &j| t[(i, i)].norm().total_cmp(&t[(j, j)].norm()));
    let slow_max = t[(order[m - 1], order[m - 1])].norm();
    let fast_min = t[(order[m], order[m])].norm();
    let gap = fast_min - slow_max;
    if gap < 10.0 * default_cluster_tol(&mm) || slow_max > 0.5 * fast_min {
        return Err(Error::RegimeBoundary { radius: kappa, gap });
    }
    let mut select = vec![false; n];
    for &i in &order[..m] {
        select[i] = true;
    }
    let not_select: Vec<bool> = select.iter().map(|s| !s).collect();
    let qs = linalg::invariant_subspace(&q, &t, &select);
    let qf = linalg::invariant_subspace(&q, &t, &not_select);
    let r = n - m;
    let x = qs.view((m, 0), (r, m)) * linalg::inverse(&qs.view((0, 0), (m, m)).into_owned())?;
    let y = qf.view((0, 0), (m, r)) * linalg::inverse(&qf.view((m, 0), (r, r)).into_owned())?;
    let mut w = CMat::identity(n, n);
    w.view_mut((m, 0), (r, m)).copy_from(&x);
    w.view_mut((0, m), (m, r)).copy_from(&y);
    let w_inv = linalg::inverse(&w)?;
    let mut d = w_inv.adjoint() * linalg::block_diag(&[&d1, &d2]) * w_inv;
    if let Some(tr) = transform {
        let t_inv = linalg::to_complex(&linalg::inverse_real(&tr)?);
        d = t_inv.adjoint() * d * t_inv;
    }
    finish_symmetrizer(d, &sys.symbol(&xi), &xi, Regime::Small)
}

/// Large-frequency symmetrizer from the groups of `A(ω)` and the projected
/// source blocks, with the first-order correction in `ν = 1/|ξ|`.
pub fn symmetrizer_large(sys: &LinearSystem, xi: &[f64]) -> Result<Symmetrizer> {
    let r = norm(xi);
    let omega = scale(xi, 1.0 / r);
    let a = linalg::to_complex(&sys.a_omega(&omega));
    let groups = eig_grouped(&a, default_cluster_tol(&a))?;
    let l = linalg::to_complex(&sys.source);
    let d = corrected_block_symmetrizer(&groups, &l, 1.0 / r).map_err(|e| match e {
        Error::NotHurwitz { eigenvalue } => Error::D3Violation { omega: omega.clone(), eigenvalue },
        other => other,
    })?;
    finish_symmetrizer(d, &sys.symbol(xi), xi, Regime::Large)
}

/// Asymptotic rates with a real part at or below this are treated as zero.
pub const RATE_FLOOR: f64 = 1e-8;
/// Largest admissible envelope constant `C`.
pub const MAX_CONSTANT: f64 = 1e6;
/// Fraction of the rate infimum used as the certified `c`.
pub const SAFETY: f64 = 0.9;
pub const GUARD_SMALL: f64 = 1e-6;
pub const GUARD_LARGE: f64 = 1e6;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EnvelopeRow {
    pub radius: f64,
    pub t: f64,
    /// Largest `‖exp(𝓜(ξ)t)‖₂` over the sphere at this radius.
    pub norm: f64,
    /// Largest `‖exp(𝓜(ξ)t)‖₂ · exp(cρ(|ξ|)t)`.
    pub ratio: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct WorstRatio {
    pub xi: Vec<f64>,
    pub t: f64,
    pub ratio: f64,
}

/// Why a certificate failed and where.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DecayWitness {
    pub regime: Regime,
    pub xi: Vec<f64>,
    /// `max Re spec 𝓜(ξ)` at the witness frequency.
    pub max_re: f64,
    /// The decay rate attributed to this frequency regime.
    pub rate: f64,
    pub detail: String,
}

/// Certified pair `(C, c)` with `‖exp(𝓜(ξ)t)‖₂ ≤ C exp(−cρ(|ξ|)t)` on the grid.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DecayCertificate {
    pub grid: GridMeta,
    pub times: Vec<f64>,
    /// Infimum of `−max Re spec 𝓜(ξ) / ρ(|ξ|)` including the asymptotic limits.
    pub rate_infimum: f64,
    /// Which term attains the infimum: `grid`, `small` or `large`.
    pub rate_source: String,
    pub c: f64,
    #[serde(rename = "C")]
    pub big_c: f64,
    pub worst: WorstRatio,
    pub pass: bool,
    pub witness: Option<DecayWitness>,
    pub envelope: Vec<EnvelopeRow>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub notes: Vec<String>,
}

impl DecayCertificate {
    pub fn as_witness(&self) -> Option<Witness> {
        self.witness
            .as_ref()
            .map(|w| Witness::new(&w.xi, Some(c(w.max_re)), -w.max_re, w.detail.clone()))
    }
}

fn abscissa<S: Symbol + ?Sized>(sym: &S, xi: &[f64]) -> Result<f64> {
    linalg::spectral_abscissa(&sym.symbol(xi))
}

/// Certifies the pointwise envelope of `exp(𝓜(ξ)t)`.
///
/// `c` is `0.9` times the infimum of `−max Re spec 𝓜(ξ)/ρ(|ξ|)` over the grid,
/// clipped by the small- and large-frequency limits of that quotient; `C` is
/// the largest observed `‖exp(𝓜(ξ)t)‖₂ exp(cρ(|ξ|)t)`. The certificate passes
/// when the infimum exceeds [`RATE_FLOOR`] and `C ≤ 1e6`.
pub fn certify_decay<S: Symbol + ?Sized>(
    sym: &S,
    rgrid: &RadialGrid,
    sgrid: &SphereGrid,
    times: &[f64],
) -> Result<DecayCertificate> {
    let mut notes = Vec::new();
    let mut grid_rate = (f64::INFINITY, Vec::new(), 0.0);
    let mut spectra = Vec::with_capacity(rgrid.count * sgrid.len());
    for r in rgrid.iter() {
        for omega in sgrid.iter() {
            let xi = scale(omega, r);
            let re = abscissa(sym, &xi)?;
            let rate = -re / rho(r);
            if rate < grid_rate.0 {
                grid_rate = (rate, xi.clone(), re);
            }
            spectra.push((r, xi, re));
        }
    }
    let mut small = (f64::INFINITY, Vec::new(), 0.0);
    let mut large = (f64::INFINITY, Vec::new(), 0.0);
    for omega in sgrid.iter() {
        let xs = scale(omega, GUARD_SMALL);
        let re_s = abscissa(sym, &xs)?;
        let rs = sym.small_rate(omega).unwrap_or(-re_s / rho(GUARD_SMALL));
        if rs < small.0 {
            small = (rs, xs, re_s);
        }
        let xl = scale(omega, GUARD_LARGE);
        let re_l = abscissa(sym, &xl)?;
        let rl = sym.large_rate(omega).unwrap_or(-re_l / rho(GUARD_LARGE));
        if rl < large.0 {
            large = (rl, xl, re_l);
        }
    }
    let candidates = [("grid", &grid_rate), ("small", &small), ("large", &large)];
    let (source, best) = candidates
        .iter()
        .min_by(|a, b| a.1 .0.total_cmp(&b.1 .0))
        .map(|(s, b)| (*s, *b))
        .expect("three candidates");
    let rate_infimum = best.0;
    let cval = SAFETY * rate_infimum;
    let c_eff = cval.max(0.0);
    if cval <= 0.0 {
        notes.push(String::from("no positive rate; ratios evaluated with c = 0"));
    }

    let mut envelope = Vec::with_capacity(rgrid.count * times.len());
    let mut worst = WorstRatio { xi: Vec::new(), t: 0.0, ratio: f64::NEG_INFINITY };
    let per_r = sgrid.len();
    for (ir, r) in rgrid.iter().enumerate() {
        let mut rows: Vec<EnvelopeRow> = times
            .iter()
            .map(|&t| EnvelopeRow { radius: r, t, norm: 0.0, ratio: 0.0 })
            .collect();
        for (_, xi, _) in &spectra[ir * per_r..(ir + 1) * per_r] {
            for (row, &t) in rows.iter_mut().zip(times) {
                let nrm = sym.propagator_norm(xi, t);
                let ratio = nrm * (c_eff * rho(r) * t).exp();
                let ratio = if ratio.is_nan() { f64::INFINITY } else { ratio };
                row.norm = row.norm.max(nrm);
                row.ratio = row.ratio.max(ratio);
                if ratio > worst.ratio {
                    worst = WorstRatio { xi: xi.clone(), t, ratio };
                }
            }
        }
        envelope.extend(rows);
    }
    let big_c = worst.ratio.max(1.0);
    let rate_ok = rate_infimum > RATE_FLOOR;
    let const_ok = big_c.is_finite() && big_c <= MAX_CONSTANT;
    let pass = rate_ok && const_ok;
    let witness = if !rate_ok {
        let regime = match source {
            "small" => Regime::Small,
            "large" => Regime::Large,
            _ => Regime::of_radius(norm(&best.1)),
        };
        Some(DecayWitness {
            regime,
            xi: best.1.clone(),
            max_re: best.2,
            rate: rate_infimum,
            detail: format!("decay rate {rate_infimum:.3e} from the {source} term is not positive"),
        })
    } else if !const_ok {
        let re = abscissa(sym, &worst.xi)?;
        Some(DecayWitness {
            regime: Regime::of_radius(norm(&worst.xi)),
            xi: worst.xi.clone(),
            max_re: re,
            rate: rate_infimum,
            detail: format!("envelope ratio {:.3e} at t = {} exceeds {MAX_CONSTANT:e}", worst.ratio, worst.t),
        })
    } else {
        None
    };
    Ok(DecayCertificate {
        grid: GridMeta {
            d: sgrid.d,
            sphere_points: sgrid.len(),
            radial: Some((rgrid.min, rgrid.max, rgrid.count)),
            tol: RATE_FLOOR,
        },
        times: times.to_vec(),
        rate_infimum,
        rate_source: String::from(source),
        c: cval,
        big_c,
        worst,
        pass,
        witness,
        envelope,
        notes,
    })
}

/// One eigenvalue branch of an expansion.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Branch {
    /// `μ_l` (small) or `γ_l` (large).
    pub center: Complex64,
    pub multiplicity: usize,
    /// `ζ_l` or `β_l` from the projected block.
    pub projected: Complex64,
    /// Richardson-extrapolated finite-difference value.
    pub finite_difference: Complex64,
    /// Unextrapolated difference quotient at the initial step.
    pub raw: Complex64,
    pub relative_deviation: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AsymptoticExpansion {
    pub omega: Vec<f64>,
    pub regime: Regime,
    pub h: f64,
    pub branches: Vec<Branch>,
    /// Small regime: extrapolated limits of the non-vanishing branches paired
    /// with the nearest eigenvalue of `L`.
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub fast_limits: Vec<(Complex64, Complex64)>,
    /// Large regime: `(|ξ|, max |Re λ(ξ) − Re β|)` for the matched branches.
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub large_radius_check: Vec<(f64, f64)>,
}

impl AsymptoticExpansion {
    pub fn max_relative_deviation(&self) -> f64 {
        self.branches.iter().map(|b| b.relative_deviation).fold(0.0, f64::max)
    }

    pub fn fast_limit_deviation(&self) -> Option<f64> {
        if self.fast_limits.is_empty() {
            return None;
        }
        Some(self.fast_limits.iter().map(|(a, b)| (a - b).norm()).fold(0.0, f64::max))
    }
}

/// Indices of the `alpha` eigenvalues nearest `target`; errors when they are
/// not well separated from the rest.
fn nearest(eigs: &[Complex64], target: Complex64, alpha: usize, at: f64) -> Result<Vec<usize>> {
    let mut idx: Vec<usize> = (0..eigs.len()).collect();
    idx.sort_by(|&i, &j| (eigs[i] - target).norm().total_cmp(&(eigs[j] - target).norm()));
    let inner = (eigs[idx[alpha - 1]] - target).norm();
    if alpha < eigs.len() {
        let outer = (eigs[idx[alpha]] - target).norm();
        if inner > 0.5 * outer {
            return Err(Error::BranchCrossing { at });
        }
    }
    idx.truncate(alpha);
    Ok(idx)
}

/// Pairs each reference value with a distinct candidate, greedily by distance.
fn match_values(reference: &[Complex64], candidates: &[Complex64]) -> Vec<Complex64> {
    let mut used = vec![false; candidates.len()];
    let mut pairs: Vec<(f64, usize, usize)> = Vec::new();
    for (i, a) in reference.iter().enumerate() {
        for (j, b) in candidates.iter().enumerate() {
            pairs.push(((a - b).norm(), i, j));
        }
    }
    pairs.sort_by(|a, b| a.0.total_cmp(&b.0));
    let mut out = vec![c(f64::NAN); reference.len()];
    let mut done = vec![false; reference.len()];
    for (_, i, j) in pairs {
        if !done[i] && !used[j] {
            out[i] = candidates[j];
            done[i] = true;
            used[j] = true;
        }
    }
    out
}

fn richardson(q: &[Complex64; 3]) -> Complex64 {
    // q(s) = v + a s + b s² + O(s³) at s, s/2, s/4
    (q[2] * c(8.0) - q[1] * c(6.0) + q[0]) / c(3.0)
}

fn relative(a: Complex64, b: Complex64) -> f64 {
    (a - b).norm() / a.norm().max(1e-12)
}

/// For each group and each step `s ∈ {h, h/2, h/4}`, selects the `α`
/// eigenvalues of the family at `s` nearest the group's target, turns them
/// into difference quotients, matches them with the projected values and
/// extrapolates. Also returns the unselected eigenvalues at every step.
fn extrapolate_branches<E, T, Q>(
    groups: &[EigenGroup],
    projected: &[Vec<Complex64>],
    h: f64,
    eigs_at: E,
    target_at: T,
    quotient: Q,
) -> Result<(Vec<Branch>, Vec<Vec<Complex64>>)>
where
    E: Fn(f64) -> Result<Vec<Complex64>>,
    T: Fn(&EigenGroup, f64) -> Complex64,
    Q: Fn(Complex64, Complex64, f64) -> Complex64,
{
    let steps = [h, h / 2.0, h / 4.0];
    let mut quotients: Vec<Vec<[Complex64; 3]>> = projected.iter().map(|p| vec![[c(0.0); 3]; p.len()]).collect();
    let mut rest = Vec::with_capacity(steps.len());
    for (k, &s) in steps.iter().enumerate() {
        let eigs = eigs_at(s)?;
        let mut taken = vec![false; eigs.len()];
        for (gi, g) in groups.iter().enumerate() {
            let target = target_at(g, s);
            let sel = nearest(&eigs, target, g.multiplicity, s)?;
            let qs: Vec<Complex64> = sel
                .iter()
                .map(|&i| {
                    taken[i] = true;
                    quotient(eigs[i], target, s)
                })
                .collect();
            for (b, v) in match_values(&projected[gi], &qs).into_iter().enumerate() {
                quotients[gi][b][k] = v;
            }
        }
        rest.push(eigs.iter().zip(&taken).filter(|(_, t)| !**t).map(|(z, _)| *z).collect());
    }
    let mut branches = Vec::new();
    for (gi, g) in groups.iter().enumerate() {
        for (b, &p) in projected[gi].iter().enumerate() {
            let q = quotients[gi][b];
            let fd = richardson(&q);
            branches.push(Branch {
                center: g.value,
                multiplicity: g.multiplicity,
                projected: p,
                finite_difference: fd,
                raw: q[0],
                relative_deviation: relative(p, fd),
            });
        }
    }
    Ok((branches, rest))
}

/// Small-frequency expansion `λ(κω) = −iκμ_l + κ²ζ_l + o(κ²)`.
///
/// Route (a): `ζ_l` are the eigenvalues of `J_L A₁₂L⁻¹A₂₁ J_R` per group of
/// `A₁₁(ω)`. Route (b): Richardson extrapolation of `(λ(κ) + iκμ_l)/κ²` over
/// `κ = h, h/2, h/4`. The remaining branches are extrapolated to `κ = 0` and
/// paired with the spectrum of `L`.
pub fn expand_small(sys: &LinearSystem, omega: &[f64], h: f64) -> Result<AsymptoticExpansion> {
    let (nf, _) = normal_form_pair(sys)?;
    let (a11, hm) = nf.small_frequency_blocks(omega)?;
    let a = linalg::to_complex(&a11);
    let groups = eig_grouped(&a, default_cluster_tol(&a))
        .map_err(|e| Error::Precondition { condition: "D2", detail: format!("A₁₁(ω): {e}") })?;
    let hc = linalg::to_complex(&hm);
    let projected: Vec<Vec<Complex64>> =
        groups.iter().map(|g| linalg::eigenvalues(&g.project(&hc))).collect::<Result<_>>()?;
    let (branches, rest) = extrapolate_branches(
        &groups,
        &projected,
        h,
        |s| linalg::eigenvalues(&nf.symbol(&scale(omega, s))),
        |g, s| -IMAG * g.value * c(s),
        |z, target, s| (z - target) / c(s * s),
    )?;
    let l_eigs = linalg::eigenvalues(&linalg::to_complex(&nf.l_block()))?;
    let per_step: Vec<Vec<Complex64>> = rest.iter().map(|r| match_values(&l_eigs, r)).collect();
    let fast_limits = l_eigs
        .iter()
        .enumerate()
        .map(|(i, &l)| (l, richardson(&[per_step[0][i], per_step[1][i], per_step[2][i]])))
        .collect();
    Ok(AsymptoticExpansion {
        omega: omega.to_vec(),
        regime: Regime::Small,
        h,
        branches,
        fast_limits,
        large_radius_check: Vec::new(),
    })
}

/// Large-frequency expansion `λ(ξ) = −i|ξ|γ_l + β_l + o(1)`.
///
/// Route (a): `β_l` are the eigenvalues of `J_L 𝓛 J_R` per group of `A(ω)`.
/// Route (b): Richardson extrapolation of `(η(ν) + iγ_l)/ν` for the
/// eigenvalues `η(ν)` of `−iA(ω) + ν𝓛`, `ν = h, h/2, h/4`. The values are
/// also compared with `Re λ(ξ)` at `|ξ| = 1e3` and `1e4`.
pub fn expand_large(sys: &LinearSystem, omega: &[f64], h: f64) -> Result<AsymptoticExpansion> {
    let a = linalg::to_complex(&sys.a_omega(omega));
    let groups = eig_grouped(&a, default_cluster_tol(&a))?;
    let l = linalg::to_complex(&sys.source);
    let projected: Vec<Vec<Complex64>> =
        groups.iter().map(|g| linalg::eigenvalues(&g.project(&l))).collect::<Result<_>>()?;
    let skew = a.map(|x| -IMAG * x);
    let (branches, _) = extrapolate_branches(
        &groups,
        &projected,
        h,
        |nu| linalg::eigenvalues(&(&skew + &l * c(nu))),
        |g, _| -IMAG * g.value,
        |z, target, nu| (z - target) / c(nu),
    )?;
    let targets: Vec<Complex64> = groups.iter().map(|g| -IMAG * g.value).collect();
    let mut large_radius_check = Vec::new();
    for r in [1e3, 1e4] {
        let eigs = linalg::eigenvalues(&sys.symbol(&scale(omega, r)))?;
        let mut dev: f64 = 0.0;
        for (gi, g) in groups.iter().enumerate() {
            let target = targets[gi] * c(r);
            let sel = nearest(&eigs, target, g.multiplicity, 1.0 / r)?;
            let mut got: Vec<f64> = sel.iter().map(|&i| eigs[i].re).collect();
            let mut want: Vec<f64> = projected[gi].iter().map(|z| z.re).collect();
            got.sort_by(f64::total_cmp);
            want.sort_by(f64::total_cmp);
            for (x, y) in got.iter().zip(&want) {
                dev = dev.max((x - y).abs());
            }
        }
        large_radius_check.push((r, dev));
    }
    Ok(AsymptoticExpansion {
        omega: omega.to_vec(),
        regime: Regime::Large,
        h,
        branches,
        fast_limits: Vec::new(),
        large_radius_check,
    })
}

/// Radial-spherical quadrature settings for [`semigroup_decay`].
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct QuadratureConfig {
    pub nodes: usize,
    pub r_min: f64,
    pub r_max: f64,
    pub window: (f64, f64),
    /// Largest admissible ratio of the outer-shell estimate to the integral
    /// inside the fit window.
    pub tail_tol: f64,
}

impl Default for QuadratureConfig {
    fn default() -> Self {
        Self { nodes: 128, r_min: 1e-4, r_max: 1e4, window: (1e2, 1e4), tail_tol: 1e-3 }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SemigroupDecay {
    pub d: usize,
    pub times: Vec<f64>,
    /// `G(t) = (∫ ‖exp(𝓜(ξ)t)‖₂² dξ)^{1/2}`.
    pub g: Vec<f64>,
    /// Outer-shell estimate relative to the computed integral, per time.
    pub tail_ratio: Vec<f64>,
    pub window: (f64, f64),
    /// Fit of `log G` against `log(1 + t)` inside the window.
    pub fit: LineFit,
    pub expected_slope: f64,
}

/// Evaluates `G(t)` by Gauss-Legendre quadrature in `log|ξ|` on
/// `[r_min, r_max]` times the sphere grid, plus the inner ball `|ξ| < r_min`,
/// and fits the algebraic rate on the window.
pub fn semigroup_decay<S: Symbol + ?Sized>(
    sym: &S,
    sgrid: &SphereGrid,
    times: &[f64],
    cfg: &QuadratureConfig,
) -> Result<SemigroupDecay> {
    let d = sym.dim();
    if sgrid.d != d {
        return Err(Error::Dimension { what: "sphere grid dimension", expected: d, found: sgrid.d });
    }
    let (s_nodes, s_weights) = gauss_legendre_on(cfg.nodes, cfg.r_min.ln(), cfg.r_max.ln());
    let (sh_nodes, sh_weights) = gauss_legendre_on(16, cfg.r_max.ln(), (2.0 * cfg.r_max).ln());
    let area = sgrid.area();
    let npts = sgrid.len() as f64;
    let mut xis: Vec<(f64, f64, Vec<Vec<f64>>)> = Vec::new();
    for (&s, &w) in s_nodes.iter().zip(&s_weights) {
        let r = s.exp();
        xis.push((r, w * r.powi(d as i32) * area / npts, sgrid.iter().map(|o| scale(o, r)).collect()));
    }
    for (pts, label) in xis.iter().map(|x| (&x.2, "quadrature node")) {
        for xi in pts {
            let re = abscissa(sym, xi)?;
            if !(re < 0.0) {
                return Err(Error::Precondition {
                    condition: "decay certificate",
                    detail: format!("spectral abscissa {re:e} ≥ 0 at {label} |ξ| = {:e}", norm(xi)),
                });
            }
        }
    }
    let shell: Vec<(f64, Vec<Vec<f64>>)> = sh_nodes
        .iter()
        .zip(&sh_weights)
        .map(|(&s, &w)| {
            let r = s.exp();
            (w * r.powi(d as i32) * area / npts, sgrid.iter().map(|o| scale(o, r)).collect())
        })
        .collect();
    let inner_pts: Vec<Vec<f64>> = sgrid.iter().map(|o| scale(o, cfg.r_min)).collect();
    let inner_weight = area / d as f64 * cfg.r_min.powi(d as i32) / npts;

    let mut g = Vec::with_capacity(times.len());
    let mut tail_ratio = Vec::with_capacity(times.len());
    for &t in times {
        let sq = |xi: &Vec<f64>| {
            let v = sym.propagator_norm(xi, t);
            v * v
        };
        let main: f64 = xis.iter().map(|(_, w, pts)| w * pts.iter().map(sq).sum::<f64>()).sum();
        let inner = inner_weight * inner_pts.iter().map(sq).sum::<f64>();
        let outer: f64 = shell.iter().map(|(w, pts)| w * pts.iter().map(sq).sum::<f64>()).sum();
        let total = main + inner;
        let ratio = outer / total;
        if t >= cfg.window.0 && t <= cfg.window.1 && !(ratio <= cfg.tail_tol) {
            return Err(Error::Quadrature { t, tail_ratio: ratio, hint: "increase r_max or the number of nodes" });
        }
        g.push(total.sqrt());
        tail_ratio.push(ratio);
    }
    let (x, y): (Vec<f64>, Vec<f64>) = times
        .iter()
        .zip(&g)
        .filter(|(t, _)| **t >= cfg.window.0 && **t <= cfg.window.1)
        .map(|(t, g)| ((1.0 + t).ln(), g.ln()))
        .unzip();
    let fit = fit_line(&x, &y).ok_or(Error::Validation(String::from("fit window needs two distinct times")))?;
    Ok(SemigroupDecay {
        d,
        times: times.to_vec(),
        g,
        tail_ratio,
        window: cfg.window,
        fit,
        expected_slope: -(d as f64) / 4.0,
    })
}

/// `count` log-spaced times in `[lo, hi]`.
pub fn log_times(lo: f64, hi: f64, count: usize) -> Vec<f64> {
    let (a, b) = (lo.ln(), hi.ln());
    (0..count)
        .map(|k| (a + (b - a) * k as f64 / (count.max(2) - 1) as f64).exp())
        .collect()
}

/// `count` equally spaced times in `[0, t_max]`.
pub fn linear_times(t_max: f64, count: usize) -> Vec<f64> {
    (0..count).map(|k| t_max * k as f64 / (count.max(2) - 1) as f64).collect()
}
