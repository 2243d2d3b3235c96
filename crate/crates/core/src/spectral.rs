//! Eigenvalue grouping with right/left projectors, semi-simplicity tests,
//! Lyapunov symmetrizers and the common block-symmetrizer search.

#[allow(unused_imports)]
use num_traits::Float;
use alloc::vec;
use alloc::vec::Vec;
use core::cmp::Ordering;

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::grid::{halton, PRIMES};
use crate::linalg::{self, c, CMat, RMat};
use crate::report::Verdict;

pub const EIGVEC_COND_LIMIT: f64 = 1e10;
/// Safety factor on the `N·eps·σ_max` rank threshold.
pub const RANK_SAFETY: f64 = 64.0;
pub const HURWITZ_TOL: f64 = 1e-10;
pub const MAX_NULLSPACE_DIM: usize = 10;

/// One cluster of eigenvalues with its spectral projector factors.
#[derive(Debug, Clone, PartialEq)]
pub struct EigenGroup {
    /// Mean of the clustered eigenvalues.
    pub value: Complex64,
    pub multiplicity: usize,
    pub eigenvalues: Vec<Complex64>,
    /// `N × α` basis of the invariant subspace.
    pub j_r: CMat,
    /// `α × N` dual rows, `J_L J_R = I`.
    pub j_l: CMat,
    /// `‖M J_R − J_R (J_L M J_R)‖_F`.
    pub residual: f64,
}

impl EigenGroup {
    /// Total projection `P = J_R J_L`.
    pub fn projector(&self) -> CMat {
        &self.j_r * &self.j_l
    }

    /// `J_L h J_R`.
    pub fn project(&self, h: &CMat) -> CMat {
        &self.j_l * h * &self.j_r
    }
}

pub fn default_cluster_tol(m: &CMat) -> f64 {
    1e-6 * (1.0 + linalg::frobenius(m))
}

/// Single-linkage clusters of `values` at distance `tol`, as index lists in
/// ascending index order.
pub fn cluster(values: &[Complex64], tol: f64) -> Vec<Vec<usize>> {
    let n = values.len();
    let mut parent: Vec<usize> = (0..n).collect();
    fn find(p: &mut [usize], mut i: usize) -> usize {
        while p[i] != i {
            p[i] = p[p[i]];
            i = p[i];
        }
        i
    }
    for i in 0..n {
        for j in (i + 1)..n {
            if (values[i] - values[j]).norm() <= tol {
                let (a, b) = (find(&mut parent, i), find(&mut parent, j));
                if a != b {
                    parent[a.max(b)] = a.min(b);
                }
            }
        }
    }
    let mut groups: Vec<Vec<usize>> = Vec::new();
    let mut root_of: Vec<Option<usize>> = vec![None; n];
    for i in 0..n {
        let r = find(&mut parent, i);
        match root_of[r] {
            Some(g) => groups[g].push(i),
            None => {
                root_of[r] = Some(groups.len());
                groups.push(vec![i]);
            }
        }
    }
    groups
}

fn mean(values: &[Complex64]) -> Complex64 {
    values.iter().sum::<Complex64>() / c(values.len() as f64)
}

/// Orders by imaginary part, then real part; parts closer than `tol` tie.
pub fn order_values(a: Complex64, b: Complex64, tol: f64) -> Ordering {
    if (a.im - b.im).abs() > tol {
        a.im.total_cmp(&b.im)
    } else if (a.re - b.re).abs() > tol {
        a.re.total_cmp(&b.re)
    } else {
        Ordering::Equal
    }
}

/// Groups the spectrum of `m` into single-linkage clusters and returns, for
/// each, an invariant-subspace basis `J_R` and the matching rows `J_L` of the
/// inverse of the full basis matrix.
pub fn eig_grouped(m: &CMat, cluster_tol: f64) -> Result<Vec<EigenGroup>> {
    let n = m.nrows();
    if n == 0 {
        return Ok(Vec::new());
    }
    let (q, t) = linalg::schur(m)?;
    let eigs: Vec<Complex64> = (0..n).map(|i| t[(i, i)]).collect();
    let mut clusters = cluster(&eigs, cluster_tol);
    clusters.sort_by(|a, b| {
        let va: Vec<Complex64> = a.iter().map(|&i| eigs[i]).collect();
        let vb: Vec<Complex64> = b.iter().map(|&i| eigs[i]).collect();
        order_values(mean(&va), mean(&vb), cluster_tol)
    });

    let mut v = CMat::zeros(n, n);
    let mut col = 0;
    let mut bases = Vec::with_capacity(clusters.len());
    for cl in &clusters {
        let mut select = vec![false; n];
        for &i in cl {
            select[i] = true;
        }
        let basis = linalg::invariant_subspace(&q, &t, &select);
        v.view_mut((0, col), (n, cl.len())).copy_from(&basis);
        bases.push(basis);
        col += cl.len();
    }

    let values: Vec<Complex64> = clusters.iter().map(|cl| mean(&cl.iter().map(|&i| eigs[i]).collect::<Vec<_>>())).collect();
    let cond = linalg::condition_number(&v);
    if !(cond <= EIGVEC_COND_LIMIT) {
        // report the cluster whose eigenvalue sits closest to another one
        let mut worst = values[0];
        let mut best_gap = f64::INFINITY;
        for i in 0..values.len() {
            for j in 0..values.len() {
                if i != j && (values[i] - values[j]).norm() < best_gap {
                    best_gap = (values[i] - values[j]).norm();
                    worst = values[i];
                }
            }
        }
        return Err(Error::NotSemisimple { eigenvalue: worst });
    }
    let w = linalg::inverse(&v)?;
    let m_norm = linalg::frobenius(m);

    let mut groups = Vec::with_capacity(clusters.len());
    let mut row = 0;
    for ((cl, basis), value) in clusters.iter().zip(bases).zip(values) {
        let alpha = cl.len();
        let j_l = w.view((row, 0), (alpha, n)).into_owned();
        row += alpha;
        let block = &j_l * m * &basis;
        let dev = linalg::frobenius(&(&block - CMat::identity(alpha, alpha) * value));
        let thr = (alpha as f64 * cluster_tol).max(1e-12 * (1.0 + m_norm));
        if dev > thr {
            return Err(Error::NotSemisimple { eigenvalue: value });
        }
        let residual = linalg::frobenius(&(m * &basis - &basis * &block));
        groups.push(EigenGroup {
            value,
            multiplicity: alpha,
            eigenvalues: cl.iter().map(|&i| eigs[i]).collect(),
            j_r: basis,
            j_l,
            residual,
        });
    }
    Ok(groups)
}

/// Result of [`is_real_semisimple`].
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SemisimpleCheck {
    pub verdict: Verdict,
    /// First eigenvalue that is non-real or defective.
    pub witness: Option<Complex64>,
    /// Multiplicities of the real eigenvalue clusters, in ascending order.
    pub multiplicities: Vec<usize>,
    pub values: Vec<f64>,
    /// Distance to the nearest violation: smallest positive slack among the
    /// imaginary-part and rank tests, nonpositive on failure.
    pub margin: f64,
}

impl SemisimpleCheck {
    pub fn ok(&self) -> bool {
        self.verdict == Verdict::Holds
    }
}

/// Decides whether every eigenvalue of `m` is real (`|Im| < tol`) with
/// geometric multiplicity equal to its algebraic multiplicity.
///
/// Geometric multiplicity is the number of singular values of `m − μI` at or
/// below `RANK_SAFETY·N·eps·σ_max(m)` plus the cluster spread. When any of
/// the relevant singular values lies within a factor 10 above that threshold
/// the answer is inconclusive.
pub fn is_real_semisimple(m: &RMat, tol: f64) -> Result<SemisimpleCheck> {
    let n = m.nrows();
    let mc = linalg::to_complex(m);
    let eigs = linalg::eigenvalues(&mc)?;
    let mut check = SemisimpleCheck {
        verdict: Verdict::Holds,
        witness: None,
        multiplicities: Vec::new(),
        values: Vec::new(),
        margin: f64::INFINITY,
    };
    for &z in &eigs {
        let slack = tol - z.im.abs();
        check.margin = check.margin.min(slack);
        if slack <= 0.0 {
            check.verdict = Verdict::Fails;
            check.witness.get_or_insert(z);
        }
    }
    if check.verdict == Verdict::Fails {
        return Ok(check);
    }
    let smax = linalg::spectral_norm(&mc);
    let base = RANK_SAFETY * n as f64 * f64::EPSILON * smax;
    let mut clusters = cluster(&eigs, default_cluster_tol(&mc));
    clusters.sort_by(|a, b| eigs[a[0]].re.total_cmp(&eigs[b[0]].re));
    for cl in clusters {
        let vals: Vec<Complex64> = cl.iter().map(|&i| eigs[i]).collect();
        let mu = mean(&vals).re;
        let spread = vals.iter().map(|z| (z - c(mu)).norm()).fold(0.0, f64::max);
        let alpha = cl.len();
        check.multiplicities.push(alpha);
        check.values.push(mu);
        let thr = base + spread;
        let shifted = m - RMat::identity(n, n) * mu;
        let sv = linalg::singular_values(&linalg::to_complex(&shifted));
        // the α smallest singular values must vanish numerically
        let largest_small = sv[n - alpha];
        if largest_small > 10.0 * thr {
            check.verdict = Verdict::Fails;
            check.witness.get_or_insert(c(mu));
            check.margin = check.margin.min(0.0);
        } else if largest_small > thr {
            check.verdict = check.verdict.and(Verdict::Inconclusive);
            check.witness.get_or_insert(c(mu));
        }
    }
    if check.margin == f64::INFINITY {
        check.margin = tol;
    }
    Ok(check)
}

/// The unique Hermitian `D` with `M* D + D M = −I`, for Hurwitz `M`.
pub fn lyapunov_symmetrizer(m: &CMat) -> Result<CMat> {
    let eigs = linalg::eigenvalues(m)?;
    if let Some(&z) = eigs.iter().max_by(|a, b| a.re.total_cmp(&b.re)) {
        if z.re > -HURWITZ_TOL {
            return Err(Error::NotHurwitz { eigenvalue: z });
        }
    }
    let n = m.nrows();
    let d = linalg::solve_lyapunov(m, &(-CMat::identity(n, n)))?;
    let d = linalg::hermitian_part(&d);
    let lmin = linalg::hermitian_eigenvalues(&d).first().copied().unwrap_or(1.0);
    if !(lmin > 0.0) {
        return Err(Error::NotHurwitz { eigenvalue: eigs[0] });
    }
    Ok(d)
}

/// Outcome of [`common_block_symmetrizer`].
#[derive(Debug, Clone, PartialEq)]
pub enum BlockSymmetrizer {
    /// Symmetric positive definite `S = diag(S₁, S₂)` with every `S A^j`
    /// symmetric; scaled to `λ_max(S) = 1`.
    Found(RMat),
    /// The admissible cone contains no positive definite matrix that the
    /// search could locate.
    NoneFound { nullspace_dim: usize, best_min_eigenvalue: f64 },
    /// Nullspace too large for the exhaustive search.
    Inconclusive { nullspace_dim: usize },
}

impl BlockSymmetrizer {
    pub fn found(&self) -> Option<&RMat> {
        match self {
            BlockSymmetrizer::Found(s) => Some(s),
            _ => None,
        }
    }
}

fn sym_index(m: usize, r: usize) -> Vec<(usize, usize)> {
    let mut idx = Vec::new();
    for (off, size) in [(0, m), (m, r)] {
        for i in 0..size {
            for j in i..size {
                idx.push((off + i, off + j));
            }
        }
    }
    idx
}

fn assemble(idx: &[(usize, usize)], coeffs: impl Iterator<Item = f64>, n: usize) -> RMat {
    let mut s = RMat::zeros(n, n);
    for (&(i, j), x) in idx.iter().zip(coeffs) {
        s[(i, j)] = x;
        s[(j, i)] = x;
    }
    s
}

fn min_eig(s: &RMat) -> f64 {
    s.clone().symmetric_eigen().eigenvalues.iter().copied().fold(f64::INFINITY, f64::min)
}

/// Searches for a symmetric positive definite `S = diag(S₁, S₂)` (blocks of
/// size `m` and `r`) with `S A^j = (A^j)ᵗ S` for every `j`.
///
/// The admissible `S` form a linear space computed as a nullspace; since
/// `λ_min` is concave on it, a deterministic scan of the unit sphere in
/// coefficient space followed by compass refinement finds a definite member
/// whenever one exists with a non-degenerate margin.
pub fn common_block_symmetrizer(a: &[RMat], m: usize, r: usize) -> Result<BlockSymmetrizer> {
    let n = m + r;
    for x in a {
        if x.nrows() != n || x.ncols() != n {
            return Err(Error::Dimension { what: "flux matrix", expected: n, found: x.nrows() });
        }
    }
    let idx = sym_index(m, r);
    let p = idx.len();
    let mut rows: Vec<Vec<f64>> = Vec::new();
    for x in a {
        // columns of the constraint matrix: (S A - Aᵗ S) for each basis S
        let images: Vec<RMat> = (0..p)
            .map(|k| {
                let s = assemble(&idx, (0..p).map(|l| if l == k { 1.0 } else { 0.0 }), n);
                &s * x - x.transpose() * &s
            })
            .collect();
        for i in 0..n {
            for j in (i + 1)..n {
                rows.push(images.iter().map(|img| img[(i, j)]).collect());
            }
        }
    }
    let cons = RMat::from_fn(rows.len(), p, |i, j| rows[i][j]);
    let scale = cons.amax().max(1.0);
    let null = if rows.is_empty() {
        RMat::identity(p, p)
    } else {
        linalg::nullspace(&(cons / scale), 1e-10)
    };
    let k = null.ncols();
    if k == 0 {
        return Ok(BlockSymmetrizer::NoneFound { nullspace_dim: 0, best_min_eigenvalue: f64::NEG_INFINITY });
    }
    if k > MAX_NULLSPACE_DIM {
        return Ok(BlockSymmetrizer::Inconclusive { nullspace_dim: k });
    }
    let basis: Vec<RMat> = (0..k).map(|c| assemble(&idx, null.column(c).iter().copied(), n)).collect();
    let combine = |coef: &[f64]| -> RMat {
        let mut s = RMat::zeros(n, n);
        for (b, &x) in basis.iter().zip(coef) {
            s += b * x;
        }
        s
    };
    let objective = |coef: &[f64]| -> f64 {
        let norm = coef.iter().map(|x| x * x).sum::<f64>().sqrt();
        if norm == 0.0 {
            return f64::NEG_INFINITY;
        }
        min_eig(&combine(coef)) / norm
    };

    let mut best = vec![0.0; k];
    let mut best_val = f64::NEG_INFINITY;
    let consider = |coef: Vec<f64>, best: &mut Vec<f64>, best_val: &mut f64| {
        let v = objective(&coef);
        if v > *best_val {
            *best_val = v;
            *best = coef;
        }
    };
    for j in 0..k {
        for sign in [1.0, -1.0] {
            let mut e = vec![0.0; k];
            e[j] = sign;
            consider(e, &mut best, &mut best_val);
        }
    }
    if k > 1 {
        let samples = 400 * k;
        for s in 1..=samples {
            let coef: Vec<f64> = (0..k).map(|j| 2.0 * halton(s, PRIMES[j]) - 1.0).collect();
            consider(coef, &mut best, &mut best_val);
        }
        let mut step = 0.5;
        while step > 1e-9 {
            let mut improved = false;
            for j in 0..k {
                for sign in [1.0, -1.0] {
                    let mut trial = best.clone();
                    let norm = trial.iter().map(|x| x * x).sum::<f64>().sqrt();
                    trial[j] += sign * step * norm;
                    let v = objective(&trial);
                    if v > best_val {
                        best_val = v;
                        best = trial;
                        improved = true;
                    }
                }
            }
            if !improved {
                step *= 0.5;
            }
        }
    }
    let s = combine(&best);
    let smax = s.amax();
    if best_val > 1e-8 && smax > 0.0 {
        let s = &s / s.clone().symmetric_eigen().eigenvalues.iter().copied().fold(0.0, f64::max);
        Ok(BlockSymmetrizer::Found(s))
    } else {
        Ok(BlockSymmetrizer::NoneFound { nullspace_dim: k, best_min_eigenvalue: best_val })
    }
}
