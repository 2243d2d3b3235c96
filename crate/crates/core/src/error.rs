use alloc::string::String;

use num_complex::Complex64;

pub type Result<T, E = Error> = core::result::Result<T, E>;

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum Error {
    #[error("invalid system: {0}")]
    Validation(String),

    #[error("dimension mismatch in {what}: expected {expected}, found {found}")]
    Dimension {
        what: &'static str,
        expected: usize,
        found: usize,
    },

    #[error("not transformable to normal form (RH): q_v has condition number {cond:.3e}")]
    NotTransformable { cond: f64 },

    #[error("matrix is not semi-simple: eigenvalue {eigenvalue} has a nontrivial Jordan block")]
    NotSemisimple { eigenvalue: Complex64 },

    #[error("matrix is not Hurwitz (D1 violated): eigenvalue {eigenvalue} has real part >= -1e-10")]
    NotHurwitz { eigenvalue: Complex64 },

    #[error("Schur iteration did not converge")]
    NoConvergence,

    #[error("singular matrix")]
    Singular,

    #[error("regime boundary at |xi| = {radius}: spectral gap {gap:.3e} too small, use the mid-frequency construction")]
    RegimeBoundary { radius: f64, gap: f64 },

    #[error("D3 violated at omega = {omega:?}: projected block has eigenvalue {eigenvalue}")]
    D3Violation {
        omega: alloc::vec::Vec<f64>,
        eigenvalue: Complex64,
    },

    #[error("precondition {condition} fails: {detail}")]
    Precondition {
        condition: &'static str,
        detail: String,
    },

    #[error("eigenvalue branch crossing detected at parameter {at:.3e}")]
    BranchCrossing { at: f64 },

    #[error("quadrature did not converge: tail ratio {tail_ratio:.3e} at t = {t}; {hint}")]
    Quadrature {
        t: f64,
        tail_ratio: f64,
        hint: &'static str,
    },
}
