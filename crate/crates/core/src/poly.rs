//! Multivariate polynomial maps used for nonlinear fluxes. Jacobians are
//! obtained by exact differentiation of the coefficient tables.

#[allow(unused_imports)]
use num_traits::Float;
use alloc::format;
use alloc::vec::Vec;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::RMat;

pub const MAX_DEGREE: u32 = 4;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Monomial {
    pub coeff: f64,
    /// One exponent per variable.
    pub powers: Vec<u32>,
}

impl Monomial {
    pub fn degree(&self) -> u32 {
        self.powers.iter().sum()
    }

    fn eval(&self, x: &[f64]) -> f64 {
        self.powers
            .iter()
            .zip(x)
            .fold(self.coeff, |acc, (&p, &xi)| acc * xi.powi(p as i32))
    }

    fn partial(&self, var: usize, x: &[f64]) -> f64 {
        let p = self.powers[var];
        if p == 0 {
            return 0.0;
        }
        let mut acc = self.coeff * p as f64;
        for (k, (&pk, &xk)) in self.powers.iter().zip(x).enumerate() {
            let e = if k == var { pk - 1 } else { pk };
            acc *= xk.powi(e as i32);
        }
        acc
    }
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(transparent)]
pub struct Polynomial {
    pub terms: Vec<Monomial>,
}

impl Polynomial {
    pub fn eval(&self, x: &[f64]) -> f64 {
        self.terms.iter().map(|t| t.eval(x)).sum()
    }

    pub fn degree(&self) -> u32 {
        self.terms.iter().map(Monomial::degree).max().unwrap_or(0)
    }
}

/// A polynomial map `ℝ^nvars → ℝ^{components.len()}`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PolyMap {
    pub nvars: usize,
    pub components: Vec<Polynomial>,
}

impl PolyMap {
    /// The linear map `x ↦ M x`.
    pub fn linear(m: &RMat) -> Self {
        let nvars = m.ncols();
        let components = (0..m.nrows())
            .map(|i| Polynomial {
                terms: (0..nvars)
                    .filter(|&j| m[(i, j)] != 0.0)
                    .map(|j| {
                        let mut powers = alloc::vec![0; nvars];
                        powers[j] = 1;
                        Monomial { coeff: m[(i, j)], powers }
                    })
                    .collect(),
            })
            .collect();
        Self { nvars, components }
    }

    pub fn validate(&self, outputs: usize) -> Result<()> {
        if self.components.len() != outputs {
            return Err(Error::Dimension {
                what: "flux polynomial components",
                expected: outputs,
                found: self.components.len(),
            });
        }
        for poly in &self.components {
            for t in &poly.terms {
                if t.powers.len() != self.nvars {
                    return Err(Error::Dimension {
                        what: "monomial exponent list",
                        expected: self.nvars,
                        found: t.powers.len(),
                    });
                }
                if !t.coeff.is_finite() {
                    return Err(Error::Validation(format!("non-finite coefficient {}", t.coeff)));
                }
            }
            if poly.degree() > MAX_DEGREE {
                return Err(Error::Validation(format!(
                    "polynomial degree {} exceeds {MAX_DEGREE}",
                    poly.degree()
                )));
            }
        }
        Ok(())
    }

    pub fn eval(&self, x: &[f64]) -> Vec<f64> {
        self.components.iter().map(|p| p.eval(x)).collect()
    }

    pub fn eval_into(&self, x: &[f64], out: &mut [f64]) {
        for (o, p) in out.iter_mut().zip(&self.components) {
            *o = p.eval(x);
        }
    }

    pub fn jacobian(&self, x: &[f64]) -> RMat {
        let mut jac = RMat::zeros(self.components.len(), self.nvars);
        for (i, p) in self.components.iter().enumerate() {
            for t in &p.terms {
                for var in 0..self.nvars {
                    jac[(i, var)] += t.partial(var, x);
                }
            }
        }
        jac
    }

    pub fn degree(&self) -> u32 {
        self.components.iter().map(Polynomial::degree).max().unwrap_or(0)
    }
}
