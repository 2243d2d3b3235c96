//! Spectral analysis of linearized hyperbolic balance laws
//! `U_t + Σ_j A^j U_{x_j} = 𝓛 U` with a source acting on the last `r` components.
//!
//! The crate decides the structural conditions (hyperbolicity, relaxation
//! structure, Kawashima-Shizuta) and the dissipation conditions D1-D3 on
//! sampled frequency grids, builds frequency-dependent symmetrizers, certifies
//! pointwise Fourier decay envelopes and evaluates the resulting semigroup
//! decay rates. Jin-Xin relaxation systems get dedicated assembly and reduced
//! checks.
//!
//! Everything here is pure computation on dense matrices and is `no_std`
//! (with `alloc`). File formats, the command line and the time integrators
//! live in the `hbl` crate.

#![no_std]

extern crate alloc;
#[cfg(test)]
extern crate std;

pub mod decay;
pub mod dissipativity;
pub mod error;
pub mod grid;
pub mod linalg;
pub mod model;
pub mod poly;
pub mod quadrature;
pub mod report;
pub mod spectral;

pub use error::{Error, Result};
pub use linalg::{CMat, RMat};
pub use model::{BalanceLawSpec, JinXinSpec, LinearSystem};
pub use report::{ConditionReport, Verdict, Witness};
