//! Dense linear algebra helpers: complex Schur with reordering, Lyapunov
//! solves, the matrix exponential and a few norms.

#[allow(unused_imports)]
use num_traits::Float;
use alloc::vec::Vec;

use nalgebra::DMatrix;
use num_complex::Complex64;

use crate::error::{Error, Result};

pub type CMat = DMatrix<Complex64>;
pub type RMat = DMatrix<f64>;

pub const IMAG: Complex64 = Complex64::new(0.0, 1.0);

#[inline]
pub fn c(re: f64) -> Complex64 {
    Complex64::new(re, 0.0)
}

pub fn to_complex(m: &RMat) -> CMat {
    m.map(c)
}

pub fn hermitian_part(m: &CMat) -> CMat {
    (m + m.adjoint()) * c(0.5)
}

pub fn frobenius(m: &CMat) -> f64 {
    m.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt()
}

pub fn frobenius_real(m: &RMat) -> f64 {
    m.iter().map(|z| z * z).sum::<f64>().sqrt()
}

/// Singular values, descending.
pub fn singular_values(m: &CMat) -> Vec<f64> {
    if m.is_empty() {
        return Vec::new();
    }
    let mut s: Vec<f64> = m.clone().svd(false, false).singular_values.iter().copied().collect();
    s.sort_by(|a, b| b.total_cmp(a));
    s
}

pub fn spectral_norm(m: &CMat) -> f64 {
    singular_values(m).first().copied().unwrap_or(0.0)
}

pub fn condition_number(m: &CMat) -> f64 {
    let s = singular_values(m);
    match (s.first(), s.last()) {
        (Some(&hi), Some(&lo)) if lo > 0.0 => hi / lo,
        _ => f64::INFINITY,
    }
}

/// Eigenvalues of the Hermitian part of `m`, ascending.
pub fn hermitian_eigenvalues(m: &CMat) -> Vec<f64> {
    let h = hermitian_part(m);
    let mut ev: Vec<f64> = h.symmetric_eigen().eigenvalues.iter().copied().collect();
    ev.sort_by(|a, b| a.total_cmp(b));
    ev
}

pub fn inverse(m: &CMat) -> Result<CMat> {
    m.clone().try_inverse().ok_or(Error::Singular)
}

pub fn inverse_real(m: &RMat) -> Result<RMat> {
    m.clone().try_inverse().ok_or(Error::Singular)
}

/// Complex Schur factorization `m = Q T Q*` with `T` upper triangular.
pub fn schur(m: &CMat) -> Result<(CMat, CMat)> {
    let n = m.nrows();
    if n == 0 {
        return Ok((CMat::zeros(0, 0), CMat::zeros(0, 0)));
    }
    let schur = nalgebra::linalg::Schur::try_new(m.clone(), f64::EPSILON, 1000 * n.max(10))
        .ok_or(Error::NoConvergence)?;
    let (q, mut t) = schur.unpack();
    for j in 0..n {
        for i in (j + 1)..n {
            t[(i, j)] = Complex64::new(0.0, 0.0);
        }
    }
    Ok((q, t))
}

pub fn eigenvalues(m: &CMat) -> Result<Vec<Complex64>> {
    let (_, t) = schur(m)?;
    Ok((0..t.nrows()).map(|i| t[(i, i)]).collect())
}

/// Largest real part of the spectrum.
pub fn spectral_abscissa(m: &CMat) -> Result<f64> {
    Ok(eigenvalues(m)?
        .iter()
        .map(|z| z.re)
        .fold(f64::NEG_INFINITY, f64::max))
}

fn lartg(f: Complex64, g: Complex64) -> (f64, Complex64) {
    let nf = f.norm();
    let ng = g.norm();
    if ng == 0.0 {
        (1.0, c(0.0))
    } else if nf == 0.0 {
        (0.0, g.conj() / ng)
    } else {
        let norm = nf.hypot(ng);
        (nf / norm, (f / nf) * g.conj() / norm)
    }
}

// x <- c x + s y, y <- c y - conj(s) x
fn rot(x: &mut [Complex64], y: &mut [Complex64], cs: f64, sn: Complex64) {
    for (a, b) in x.iter_mut().zip(y.iter_mut()) {
        let tmp = *a * cs + sn * *b;
        *b = *b * cs - sn.conj() * *a;
        *a = tmp;
    }
}

/// Swap the adjacent diagonal entries `k`, `k + 1` of the Schur form.
fn swap_adjacent(q: &mut CMat, t: &mut CMat, k: usize) {
    let n = t.nrows();
    let t11 = t[(k, k)];
    let t22 = t[(k + 1, k + 1)];
    let (cs, sn) = lartg(t[(k, k + 1)], t22 - t11);
    if k + 2 < n {
        let mut rk: Vec<Complex64> = (k + 2..n).map(|j| t[(k, j)]).collect();
        let mut rk1: Vec<Complex64> = (k + 2..n).map(|j| t[(k + 1, j)]).collect();
        rot(&mut rk, &mut rk1, cs, sn);
        for (idx, j) in (k + 2..n).enumerate() {
            t[(k, j)] = rk[idx];
            t[(k + 1, j)] = rk1[idx];
        }
    }
    if k > 0 {
        let mut ck: Vec<Complex64> = (0..k).map(|i| t[(i, k)]).collect();
        let mut ck1: Vec<Complex64> = (0..k).map(|i| t[(i, k + 1)]).collect();
        rot(&mut ck, &mut ck1, cs, sn.conj());
        for i in 0..k {
            t[(i, k)] = ck[i];
            t[(i, k + 1)] = ck1[i];
        }
    }
    t[(k, k)] = t22;
    t[(k + 1, k + 1)] = t11;
    let mut qk: Vec<Complex64> = q.column(k).iter().copied().collect();
    let mut qk1: Vec<Complex64> = q.column(k + 1).iter().copied().collect();
    rot(&mut qk, &mut qk1, cs, sn.conj());
    for i in 0..q.nrows() {
        q[(i, k)] = qk[i];
        q[(i, k + 1)] = qk1[i];
    }
}

/// Reorder a Schur factorization so the selected eigenvalues (by original
/// diagonal position) occupy the leading diagonal block. The leading columns
/// of the returned `Q` span the corresponding invariant subspace.
pub fn reorder_schur(q: &CMat, t: &CMat, select: &[bool]) -> (CMat, CMat) {
    let mut q = q.clone();
    let mut t = t.clone();
    let mut target = 0;
    for (k, &sel) in select.iter().enumerate() {
        if sel {
            let mut pos = k;
            while pos > target {
                swap_adjacent(&mut q, &mut t, pos - 1);
                pos -= 1;
            }
            target += 1;
        }
    }
    (q, t)
}

/// Orthonormal basis (columns) of the invariant subspace belonging to the
/// eigenvalues selected by `select` in the diagonal of `t`.
pub fn invariant_subspace(q: &CMat, t: &CMat, select: &[bool]) -> CMat {
    let k = select.iter().filter(|&&s| s).count();
    let (q2, _) = reorder_schur(q, t, select);
    q2.columns(0, k).into_owned()
}

/// Solves `M* X + X M = C` by the Bartels-Stewart recursion on the Schur
/// form of `M`. Requires `λ_i* + λ_j ≠ 0` for all eigenvalue pairs.
pub fn solve_lyapunov(m: &CMat, rhs: &CMat) -> Result<CMat> {
    let n = m.nrows();
    let (q, t) = schur(m)?;
    let f = q.adjoint() * rhs * &q;
    let mut y = CMat::zeros(n, n);
    for i in 0..n {
        for j in 0..n {
            let mut acc = f[(i, j)];
            for k in 0..i {
                acc -= t[(k, i)].conj() * y[(k, j)];
            }
            for k in 0..j {
                acc -= y[(i, k)] * t[(k, j)];
            }
            let den = t[(i, i)].conj() + t[(j, j)];
            if den.norm() == 0.0 {
                return Err(Error::Singular);
            }
            y[(i, j)] = acc / den;
        }
    }
    Ok(&q * y * q.adjoint())
}

fn one_norm(m: &CMat) -> f64 {
    (0..m.ncols())
        .map(|j| m.column(j).iter().map(|z| z.norm()).sum::<f64>())
        .fold(0.0, f64::max)
}

const PADE13: [f64; 14] = [
    64764752532480000.0,
    32382376266240000.0,
    7771770303897600.0,
    1187353796428800.0,
    129060195264000.0,
    10559470521600.0,
    670442572800.0,
    33522128640.0,
    1323241920.0,
    40840800.0,
    960960.0,
    16380.0,
    182.0,
    1.0,
];
const THETA13: f64 = 5.371920351148152;

/// Matrix exponential by scaling and squaring with the degree-13 Padé
/// approximant.
pub fn expm(m: &CMat) -> CMat {
    let n = m.nrows();
    let ident = CMat::identity(n, n);
    let norm = one_norm(m);
    if !norm.is_finite() {
        return CMat::from_element(n, n, Complex64::new(f64::NAN, f64::NAN));
    }
    let s = if norm > THETA13 {
        (norm / THETA13).log2().ceil().max(0.0) as i32
    } else {
        0
    };
    let a = m * c(0.5f64.powi(s));
    let b = PADE13;
    let a2 = &a * &a;
    let a4 = &a2 * &a2;
    let a6 = &a4 * &a2;
    let u_inner = &a6 * (&a6 * c(b[13]) + &a4 * c(b[11]) + &a2 * c(b[9]))
        + &a6 * c(b[7])
        + &a4 * c(b[5])
        + &a2 * c(b[3])
        + &ident * c(b[1]);
    let u = &a * u_inner;
    let v = &a6 * (&a6 * c(b[12]) + &a4 * c(b[10]) + &a2 * c(b[8]))
        + &a6 * c(b[6])
        + &a4 * c(b[4])
        + &a2 * c(b[2])
        + &ident * c(b[0]);
    let p = &v + &u;
    let qm = &v - &u;
    let mut r = qm.lu().solve(&p).unwrap_or_else(|| CMat::from_element(n, n, c(f64::NAN)));
    for _ in 0..s {
        r = &r * &r;
    }
    r
}

/// Orthonormal basis of the numerical null space of a real matrix
/// (singular values below `rel_tol * σ_max`), as columns.
pub fn nullspace(m: &RMat, rel_tol: f64) -> RMat {
    let cols = m.ncols();
    if m.nrows() == 0 {
        return RMat::identity(cols, cols);
    }
    // pad to at least square so the SVD exposes all right singular vectors
    let rows = m.nrows().max(cols);
    let mut padded = RMat::zeros(rows, cols);
    padded.view_mut((0, 0), (m.nrows(), cols)).copy_from(m);
    let svd = padded.svd(false, true);
    let v_t = svd.v_t.expect("requested V^T");
    let smax = svd.singular_values.iter().copied().fold(0.0, f64::max);
    let thr = rel_tol * smax.max(f64::MIN_POSITIVE);
    let idx: Vec<usize> = svd
        .singular_values
        .iter()
        .enumerate()
        .filter(|(_, &s)| s <= thr)
        .map(|(i, _)| i)
        .collect();
    let mut out = RMat::zeros(cols, idx.len());
    for (k, &i) in idx.iter().enumerate() {
        for j in 0..cols {
            out[(j, k)] = v_t[(i, j)];
        }
    }
    out
}

pub fn block_diag(blocks: &[&CMat]) -> CMat {
    let n: usize = blocks.iter().map(|b| b.nrows()).sum();
    let mut out = CMat::zeros(n, n);
    let mut off = 0;
    for b in blocks {
        out.view_mut((off, off), (b.nrows(), b.ncols())).copy_from(*b);
        off += b.nrows();
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    fn cm(rows: usize, cols: usize, data: &[(f64, f64)]) -> CMat {
        CMat::from_row_iterator(rows, cols, data.iter().map(|&(a, b)| Complex64::new(a, b)))
    }

    #[test]
    fn schur_reconstructs_and_reorders() {
        let m = cm(
            3,
            3,
            &[(1.0, 0.5), (2.0, 0.0), (0.0, -1.0), (0.3, 0.0), (-2.0, 1.0), (1.0, 1.0), (0.0, 2.0), (0.5, 0.0), (3.0, 0.0)],
        );
        let (q, t) = schur(&m).unwrap();
        assert!(frobenius(&(&q * &t * q.adjoint() - &m)) < 1e-12);
        let (q2, t2) = reorder_schur(&q, &t, &[false, false, true]);
        assert!(frobenius(&(&q2 * &t2 * q2.adjoint() - &m)) < 1e-12);
        assert!((t2[(0, 0)] - t[(2, 2)]).norm() < 1e-12);
        for j in 0..3 {
            for i in j + 1..3 {
                assert!(t2[(i, j)].norm() < 1e-14);
            }
        }
    }

    #[test]
    fn lyapunov_residual() {
        let m = cm(2, 2, &[(-1.0, 0.0), (100.0, 0.0), (0.0, 0.0), (-1.0, 0.0)]);
        let rhs = -CMat::identity(2, 2);
        let x = solve_lyapunov(&m, &rhs).unwrap();
        let res = m.adjoint() * &x + &x * &m - &rhs;
        assert!(frobenius(&res) < 1e-8);
    }

    #[test]
    fn expm_of_diagonal_and_nilpotent() {
        let d = cm(2, 2, &[(-1.0, 3.0), (0.0, 0.0), (0.0, 0.0), (2.0, 0.0)]);
        let e = expm(&(d * c(4.0)));
        let want0 = (Complex64::new(-1.0, 3.0) * 4.0).exp();
        assert!((e[(0, 0)] - want0).norm() < 1e-13);
        assert!((e[(1, 1)] - c(8.0f64.exp())).norm() / 8.0f64.exp() < 1e-13);
        // exp([[0, a], [0, 0]]) = [[1, a], [0, 1]]
        let nmat = cm(2, 2, &[(0.0, 0.0), (50.0, 0.0), (0.0, 0.0), (0.0, 0.0)]);
        let e = expm(&nmat);
        assert!((e[(0, 1)] - c(50.0)).norm() < 1e-10);
        assert!((e[(0, 0)] - c(1.0)).norm() < 1e-12);
    }

    #[test]
    fn nullspace_of_rank_one() {
        let m = RMat::from_row_slice(1, 3, &[1.0, 1.0, 0.0]);
        let ns = nullspace(&m, 1e-12);
        assert_eq!(ns.ncols(), 2);
        assert!((&m * &ns).norm() < 1e-12);
    }
}
