//! Balance-law systems, their constant-coefficient linearizations, normal
//! forms and the Jin-Xin relaxation assembly.

#[allow(unused_imports)]
use num_traits::Float;
use alloc::format;
use alloc::vec::Vec;

use num_complex::Complex64;

use crate::error::{Error, Result};
use crate::linalg::{self, c, CMat, RMat, IMAG};
use crate::poly::PolyMap;

const FLUX_JACOBIAN_TOL: f64 = 1e-10;
const SYMMETRY_TOL: f64 = 1e-12;
const NORMAL_FORM_COND_LIMIT: f64 = 1e12;

/// A system `U_t + Σ_j f^j(U)_{x_j} = Q(U)` described by its Jacobians at a
/// rest state `Ū`. The first `m` components are conserved, so the first `m`
/// rows of `DQ(Ū)` vanish.
#[derive(Debug, Clone, PartialEq)]
pub struct BalanceLawSpec {
    pub d: usize,
    pub n: usize,
    pub m: usize,
    pub equilibrium: Vec<f64>,
    pub flux_jacobians: Vec<RMat>,
    pub source_jacobian: RMat,
    /// Optional polynomial fluxes `f^j`, one map `ℝ^n → ℝ^n` per direction.
    pub flux_poly: Option<Vec<PolyMap>>,
}

impl BalanceLawSpec {
    pub fn new(
        m: usize,
        equilibrium: Vec<f64>,
        flux_jacobians: Vec<RMat>,
        source_jacobian: RMat,
        flux_poly: Option<Vec<PolyMap>>,
    ) -> Result<Self> {
        let spec = Self {
            d: flux_jacobians.len(),
            n: equilibrium.len(),
            m,
            equilibrium,
            flux_jacobians,
            source_jacobian,
            flux_poly,
        };
        spec.validate()?;
        Ok(spec)
    }

    pub fn r(&self) -> usize {
        self.n - self.m
    }

    pub fn validate(&self) -> Result<()> {
        let (d, n, m) = (self.d, self.n, self.m);
        if d == 0 {
            return Err(Error::Validation("spatial dimension must be at least 1".into()));
        }
        if m == 0 || m >= n {
            return Err(Error::Validation(format!("need 1 <= m < n, got m = {m}, n = {n}")));
        }
        if self.flux_jacobians.len() != d {
            return Err(Error::Dimension { what: "flux Jacobian count", expected: d, found: self.flux_jacobians.len() });
        }
        for a in &self.flux_jacobians {
            check_square(a, n, "flux Jacobian")?;
        }
        check_square(&self.source_jacobian, n, "source Jacobian")?;
        let all = self
            .flux_jacobians
            .iter()
            .flat_map(|a| a.iter())
            .chain(self.source_jacobian.iter())
            .chain(self.equilibrium.iter());
        if all.clone().any(|x| !x.is_finite()) {
            return Err(Error::Validation("non-finite matrix entry".into()));
        }
        for i in 0..m {
            for j in 0..n {
                if self.source_jacobian[(i, j)] != 0.0 {
                    return Err(Error::Validation(format!(
                        "source Jacobian must vanish on the first {m} rows, entry ({i}, {j}) = {}",
                        self.source_jacobian[(i, j)]
                    )));
                }
            }
        }
        if let Some(polys) = &self.flux_poly {
            if polys.len() != d {
                return Err(Error::Dimension { what: "flux polynomial count", expected: d, found: polys.len() });
            }
            for (j, p) in polys.iter().enumerate() {
                if p.nvars != n {
                    return Err(Error::Dimension { what: "flux polynomial variables", expected: n, found: p.nvars });
                }
                p.validate(n)?;
                let jac = p.jacobian(&self.equilibrium);
                let dev = (&jac - &self.flux_jacobians[j]).amax();
                if dev > FLUX_JACOBIAN_TOL {
                    return Err(Error::Validation(format!(
                        "flux polynomial {j} has Jacobian deviating by {dev:.3e} from the given A^{j}"
                    )));
                }
            }
        }
        Ok(())
    }
}

fn check_square(a: &RMat, n: usize, what: &'static str) -> Result<()> {
    if a.nrows() != n {
        return Err(Error::Dimension { what, expected: n, found: a.nrows() });
    }
    if a.ncols() != n {
        return Err(Error::Dimension { what, expected: n, found: a.ncols() });
    }
    Ok(())
}

/// The four blocks of `A(ω)` for the split `ℝ^n = ℝ^m × ℝ^r`.
#[derive(Debug, Clone, PartialEq)]
pub struct Blocks {
    pub a11: RMat,
    pub a12: RMat,
    pub a21: RMat,
    pub a22: RMat,
}

/// Constant-coefficient linearization `U_t + Σ A^j U_{x_j} = 𝓛 U`.
///
/// `source` holds the full source Jacobian. In normal form it equals
/// `diag(0, L)`; [`LinearSystem::normal_form`] produces that representation.
#[derive(Debug, Clone, PartialEq)]
pub struct LinearSystem {
    pub d: usize,
    pub n: usize,
    pub m: usize,
    pub a: Vec<RMat>,
    pub source: RMat,
}

impl LinearSystem {
    pub fn r(&self) -> usize {
        self.n - self.m
    }

    /// `A(ω) = Σ_j A^j ω_j`.
    pub fn a_omega(&self, omega: &[f64]) -> RMat {
        let mut out = RMat::zeros(self.n, self.n);
        for (a, &w) in self.a.iter().zip(omega) {
            out += a * w;
        }
        out
    }

    /// The Fourier symbol `𝓜(ξ) = -i A(ξ) + 𝓛`.
    pub fn symbol(&self, xi: &[f64]) -> CMat {
        let a = self.a_omega(xi);
        let mut out = linalg::to_complex(&self.source);
        for (o, &x) in out.iter_mut().zip(a.iter()) {
            *o -= IMAG * x;
        }
        out
    }

    pub fn blocks(&self, omega: &[f64]) -> Blocks {
        let a = self.a_omega(omega);
        let (m, r) = (self.m, self.r());
        Blocks {
            a11: a.view((0, 0), (m, m)).into_owned(),
            a12: a.view((0, m), (m, r)).into_owned(),
            a21: a.view((m, 0), (r, m)).into_owned(),
            a22: a.view((m, m), (r, r)).into_owned(),
        }
    }

    /// Lower-right `r × r` source block `L = q_v(Ū)`.
    pub fn l_block(&self) -> RMat {
        self.source.view((self.m, self.m), (self.r(), self.r())).into_owned()
    }

    /// Lower-left `r × m` source block `q_u(Ū)`.
    pub fn coupling_block(&self) -> RMat {
        self.source.view((self.m, 0), (self.r(), self.m)).into_owned()
    }

    pub fn is_normal_form(&self) -> bool {
        let scale = 1.0 + self.source.amax();
        self.coupling_block().amax() <= 1e-14 * scale
    }

    /// Basis change `T = [[I, 0], [-q_v⁻¹ q_u, I]]` giving `Ã^j = T⁻¹ A^j T`
    /// and `𝓛 = diag(0, q_v)`. Identity when already in normal form.
    pub fn normal_form(&self) -> Result<LinearSystem> {
        let t = self.normal_form_transform()?;
        let mut out = self.conjugate(&t)?;
        // the lower-left block cancels analytically
        let (m, r) = (self.m, self.r());
        out.source.view_mut((m, 0), (r, m)).fill(0.0);
        out.source.view_mut((0, 0), (m, self.n)).fill(0.0);
        Ok(out)
    }

    /// The transform `T` used by [`LinearSystem::normal_form`].
    pub fn normal_form_transform(&self) -> Result<RMat> {
        let (n, m, r) = (self.n, self.m, self.r());
        let qv = self.l_block();
        let cond = linalg::condition_number(&linalg::to_complex(&qv));
        if !(cond <= NORMAL_FORM_COND_LIMIT) {
            return Err(Error::NotTransformable { cond });
        }
        let x = linalg::inverse_real(&qv)? * self.coupling_block();
        let mut t = RMat::identity(n, n);
        t.view_mut((m, 0), (r, m)).copy_from(&(-x));
        Ok(t)
    }

    /// `(T⁻¹ A^j T, T⁻¹ 𝓛 T)`.
    pub fn conjugate(&self, t: &RMat) -> Result<LinearSystem> {
        let tinv = linalg::inverse_real(t)?;
        Ok(LinearSystem {
            d: self.d,
            n: self.n,
            m: self.m,
            a: self.a.iter().map(|a| &tinv * a * t).collect(),
            source: &tinv * &self.source * t,
        })
    }

    /// `(A₁₁(ω), A₁₂(ω) L⁻¹ A₂₁(ω))` for a system in normal form.
    pub fn small_frequency_blocks(&self, omega: &[f64]) -> Result<(RMat, RMat)> {
        let b = self.blocks(omega);
        let linv = linalg::inverse_real(&self.l_block())?;
        Ok((b.a11, &b.a12 * linv * &b.a21))
    }
}

/// Reads `A^j` and `𝓛 = DQ(Ū)` from the balance law without any transformation.
pub fn linearize(spec: &BalanceLawSpec) -> Result<LinearSystem> {
    spec.validate()?;
    Ok(LinearSystem {
        d: spec.d,
        n: spec.n,
        m: spec.m,
        a: spec.flux_jacobians.clone(),
        source: spec.source_jacobian.clone(),
    })
}

pub fn to_normal_form(spec: &BalanceLawSpec) -> Result<LinearSystem> {
    linearize(spec)?.normal_form()
}

/// Jin-Xin relaxation of the conservation law `u_t + Σ F^j(u)_{x_j} = 0`:
///
/// ```text
/// u_t + Σ_j v^j_{x_j} = 0
/// v^j_t + b^j u_{x_j} = -(v^j - F^j(u)) / ε
/// ```
#[derive(Debug, Clone, PartialEq)]
pub struct JinXinSpec {
    pub d: usize,
    pub m: usize,
    /// Symmetric positive definite `m × m` wave-speed matrices.
    pub b: Vec<RMat>,
    pub eps: f64,
    /// `K^j = D_u F^j(0)`.
    pub flux_jac: Vec<RMat>,
    /// Optional polynomial `F^j`, one map `ℝ^m → ℝ^m` per direction.
    pub flux_poly: Option<Vec<PolyMap>>,
}

impl JinXinSpec {
    pub fn new(b: Vec<RMat>, eps: f64, flux_jac: Vec<RMat>, flux_poly: Option<Vec<PolyMap>>) -> Result<Self> {
        let m = b.first().map(|x| x.nrows()).unwrap_or(0);
        let spec = Self { d: b.len(), m, b, eps, flux_jac, flux_poly };
        spec.validate()?;
        Ok(spec)
    }

    /// Linear fluxes `F^j(u) = K^j u`, with `ε = 1`.
    pub fn linear(b: Vec<RMat>, flux_jac: Vec<RMat>) -> Result<Self> {
        Self::new(b, 1.0, flux_jac, None)
    }

    pub fn n(&self) -> usize {
        self.m * (self.d + 1)
    }

    pub fn validate(&self) -> Result<()> {
        let (d, m) = (self.d, self.m);
        if d == 0 || m == 0 {
            return Err(Error::Validation("Jin-Xin system needs d >= 1 and m >= 1".into()));
        }
        if !(self.eps > 0.0 && self.eps.is_finite()) {
            return Err(Error::Validation(format!("relaxation rate must be positive, got {}", self.eps)));
        }
        if self.flux_jac.len() != d {
            return Err(Error::Dimension { what: "flux Jacobian count", expected: d, found: self.flux_jac.len() });
        }
        for (j, b) in self.b.iter().enumerate() {
            check_square(b, m, "wave-speed matrix b^j")?;
            if b.iter().any(|x| !x.is_finite()) {
                return Err(Error::Validation("non-finite entry in b".into()));
            }
            if (b - b.transpose()).amax() > SYMMETRY_TOL {
                return Err(Error::Validation(format!("b^{} is not symmetric", j + 1)));
            }
            if b.clone().cholesky().is_none() {
                return Err(Error::Validation(format!("b^{} is not positive definite", j + 1)));
            }
        }
        for k in &self.flux_jac {
            check_square(k, m, "flux Jacobian K^j")?;
            if k.iter().any(|x| !x.is_finite()) {
                return Err(Error::Validation("non-finite entry in K".into()));
            }
        }
        if let Some(polys) = &self.flux_poly {
            if polys.len() != d {
                return Err(Error::Dimension { what: "flux polynomial count", expected: d, found: polys.len() });
            }
            let zero = alloc::vec![0.0; m];
            for (j, p) in polys.iter().enumerate() {
                if p.nvars != m {
                    return Err(Error::Dimension { what: "flux polynomial variables", expected: m, found: p.nvars });
                }
                p.validate(m)?;
                if p.eval(&zero).iter().any(|v| v.abs() > FLUX_JACOBIAN_TOL) {
                    return Err(Error::Validation(format!("F^{} must vanish at the rest state u = 0", j + 1)));
                }
                let dev = (&p.jacobian(&zero) - &self.flux_jac[j]).amax();
                if dev > FLUX_JACOBIAN_TOL {
                    return Err(Error::Validation(format!(
                        "flux polynomial {} has Jacobian deviating by {dev:.3e} from K^{}",
                        j + 1,
                        j + 1
                    )));
                }
            }
        }
        Ok(())
    }

    /// `K(ξ) = Σ_j K^j ξ_j`.
    pub fn k_symbol(&self, xi: &[f64]) -> RMat {
        let mut out = RMat::zeros(self.m, self.m);
        for (k, &x) in self.flux_jac.iter().zip(xi) {
            out += k * x;
        }
        out
    }

    /// `𝓑(ξ) = Σ_j b^j ξ_j²`.
    pub fn b_symbol(&self, xi: &[f64]) -> RMat {
        let mut out = RMat::zeros(self.m, self.m);
        for (b, &x) in self.b.iter().zip(xi) {
            out += b * (x * x);
        }
        out
    }

    /// `D_u F = (K^1; …; K^d)`, an `md × m` matrix.
    pub fn stacked_flux_jacobian(&self) -> RMat {
        let (d, m) = (self.d, self.m);
        let mut out = RMat::zeros(m * d, m);
        for (j, k) in self.flux_jac.iter().enumerate() {
            out.view_mut((j * m, 0), (m, m)).copy_from(k);
        }
        out
    }

    /// `max_j λ_max(√b^j)`, the largest characteristic speed.
    pub fn max_speed(&self) -> f64 {
        self.b
            .iter()
            .map(|b| b.clone().symmetric_eigen().eigenvalues.iter().copied().fold(0.0, f64::max).sqrt())
            .fold(0.0, f64::max)
    }
}

/// Assembles the `m(d+1)`-dimensional balance law of a Jin-Xin system in the
/// variables `U = (u, v^1, …, v^d)`.
pub fn build_jinxin(jx: &JinXinSpec) -> Result<BalanceLawSpec> {
    jx.validate()?;
    let (d, m) = (jx.d, jx.m);
    let n = jx.n();
    let mut flux = Vec::with_capacity(d);
    for (j, b) in jx.b.iter().enumerate() {
        let mut a = RMat::zeros(n, n);
        // top row block: (E^j)^t selects v^j
        a.view_mut((0, m * (j + 1)), (m, m)).copy_from(&RMat::identity(m, m));
        // B^j places b^j in the v^j row block
        a.view_mut((m * (j + 1), 0), (m, m)).copy_from(b);
        flux.push(a);
    }
    let mut dq = RMat::zeros(n, n);
    let inv_eps = 1.0 / jx.eps;
    dq.view_mut((m, 0), (m * d, m)).copy_from(&(jx.stacked_flux_jacobian() * inv_eps));
    dq.view_mut((m, m), (m * d, m * d)).copy_from(&(RMat::identity(m * d, m * d) * -inv_eps));
    BalanceLawSpec::new(m, alloc::vec![0.0; n], flux, dq, None)
}

/// Normal form of a Jin-Xin system via `T = [[I_m, 0], [D_uF, I_{md}]]`.
/// The blocks satisfy `A₁₁(ω) = K(ω)` and `A₁₂ L⁻¹ A₂₁ = ε(K(ω)² - 𝓑(ω))`.
pub fn jinxin_normal_form(jx: &JinXinSpec) -> Result<LinearSystem> {
    let spec = build_jinxin(jx)?;
    let (d, m) = (jx.d, jx.m);
    let n = jx.n();
    let duf = jx.stacked_flux_jacobian();
    let mut t = RMat::identity(n, n);
    t.view_mut((m, 0), (m * d, m)).copy_from(&duf);
    let mut tinv = RMat::identity(n, n);
    tinv.view_mut((m, 0), (m * d, m)).copy_from(&(-duf));
    let a: Vec<RMat> = spec.flux_jacobians.iter().map(|a| &tinv * a * &t).collect();
    let mut source = RMat::zeros(n, n);
    source
        .view_mut((m, m), (m * d, m * d))
        .copy_from(&(RMat::identity(m * d, m * d) * (-1.0 / jx.eps)));
    let sys = LinearSystem { d, n, m, a, source };
    debug_assert!({
        let omega: Vec<f64> = (0..d).map(|j| 1.0 / (1.0 + j as f64)).collect();
        let (a11, h) = sys.small_frequency_blocks(&omega).expect("invertible L");
        let k = jx.k_symbol(&omega);
        let want = (&k * &k - jx.b_symbol(&omega)) * jx.eps;
        (a11 - k).amax() < 1e-9 && (h - &want).amax() < 1e-9 * (1.0 + want.amax())
    });
    Ok(sys)
}

/// Coefficients of the damped wave system satisfied by `u`:
/// `u_tt - Σ b^j u_{x_j x_j} + damping·u_t + Σ convection^j u_{x_j} = 0`.
#[derive(Debug, Clone, PartialEq)]
pub struct WaveCoefficients {
    pub b: Vec<RMat>,
    pub damping: RMat,
    pub convection: Vec<RMat>,
}

impl WaveCoefficients {
    /// The `2m` roots λ of `det(λ² + λ·damping + 𝓑(ξ) + i Σ convection^j ξ_j) = 0`,
    /// from the companion linearization.
    pub fn pencil_roots(&self, xi: &[f64]) -> Result<Vec<Complex64>> {
        linalg::eigenvalues(&self.companion(xi))
    }

    pub fn companion(&self, xi: &[f64]) -> CMat {
        let m = self.damping.nrows();
        let mut stiff = CMat::zeros(m, m);
        for ((b, k), &x) in self.b.iter().zip(&self.convection).zip(xi) {
            stiff += linalg::to_complex(b) * c(x * x) + linalg::to_complex(k) * (IMAG * x);
        }
        let mut comp = CMat::zeros(2 * m, 2 * m);
        comp.view_mut((0, m), (m, m)).copy_from(&CMat::identity(m, m));
        comp.view_mut((m, 0), (m, m)).copy_from(&(-stiff));
        comp.view_mut((m, m), (m, m)).copy_from(&(-linalg::to_complex(&self.damping)));
        comp
    }
}

/// Eliminating `v` gives `u_tt - Σ b^j u_{x_j x_j} + u_t/ε + Σ K^j u_{x_j}/ε = 0`
/// for the linearized flux.
pub fn second_order_reduction(jx: &JinXinSpec) -> Result<WaveCoefficients> {
    jx.validate()?;
    let inv_eps = 1.0 / jx.eps;
    Ok(WaveCoefficients {
        b: jx.b.clone(),
        damping: RMat::identity(jx.m, jx.m) * inv_eps,
        convection: jx.flux_jac.iter().map(|k| k * inv_eps).collect(),
    })
}

/// Systems used throughout tests, the CLI examples and the acceptance suite.
pub mod fixtures {
    use super::*;

    /// The damped telegraph system `u_t + v_x = 0`, `v_t + u_x = -v`.
    pub fn telegraph_spec() -> BalanceLawSpec {
        BalanceLawSpec::new(
            1,
            alloc::vec![0.0, 0.0],
            alloc::vec![RMat::from_row_slice(2, 2, &[0.0, 1.0, 1.0, 0.0])],
            RMat::from_row_slice(2, 2, &[0.0, 0.0, 0.0, -1.0]),
            None,
        )
        .expect("valid fixture")
    }

    pub fn telegraph() -> LinearSystem {
        linearize(&telegraph_spec()).expect("valid fixture")
    }

    /// Flux Jacobian of `F(u) = (u₁ - u₂, u₂ - u₁)`.
    pub fn kappa_flux_jacobian() -> RMat {
        RMat::from_row_slice(2, 2, &[1.0, -1.0, -1.0, 1.0])
    }

    /// One-dimensional Jin-Xin system with `m = 2`, `b = diag(κ₁, κ₂)` and
    /// `F(u) = (u₁ - u₂, u₂ - u₁)`.
    pub fn kappa_jinxin(k1: f64, k2: f64) -> JinXinSpec {
        JinXinSpec::linear(
            alloc::vec![RMat::from_diagonal(&nalgebra::DVector::from_vec(alloc::vec![k1, k2]))],
            alloc::vec![kappa_flux_jacobian()],
        )
        .expect("positive kappa")
    }

    /// Scalar Jin-Xin system (`m = 1`) with scalar wave speeds and convection.
    pub fn scalar_jinxin(b: &[f64], k: &[f64]) -> JinXinSpec {
        JinXinSpec::linear(
            b.iter().map(|&x| RMat::from_element(1, 1, x)).collect(),
            k.iter().map(|&x| RMat::from_element(1, 1, x)).collect(),
        )
        .expect("positive wave speeds")
    }
}
