//! Verdicts, witnesses and condition reports.

#[allow(unused_imports)]
use num_traits::Float;
use alloc::string::String;
use alloc::vec::Vec;

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Verdict {
    Holds,
    Inconclusive,
    Fails,
}

impl Verdict {
    /// The weaker of two verdicts: any failure wins, then any abstention.
    pub fn and(self, other: Verdict) -> Verdict {
        match (self, other) {
            (Verdict::Fails, _) | (_, Verdict::Fails) => Verdict::Fails,
            (Verdict::Inconclusive, _) | (_, Verdict::Inconclusive) => Verdict::Inconclusive,
            _ => Verdict::Holds,
        }
    }

    pub fn as_str(self) -> &'static str {
        match self {
            Verdict::Holds => "holds",
            Verdict::Inconclusive => "inconclusive",
            Verdict::Fails => "fails",
        }
    }
}

/// An offending (or extremal) point in frequency space.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Witness {
    /// A direction `ω` or a frequency `ξ`, as stated by `detail`.
    pub point: Vec<f64>,
    pub eigenvalue: Option<Complex64>,
    pub margin: f64,
    pub detail: String,
}

impl Witness {
    pub fn new(point: &[f64], eigenvalue: Option<Complex64>, margin: f64, detail: impl Into<String>) -> Self {
        Self { point: point.to_vec(), eigenvalue, margin, detail: detail.into() }
    }

    /// `|ξ|` of the witness point.
    pub fn radius(&self) -> f64 {
        self.point.iter().map(|x| x * x).sum::<f64>().sqrt()
    }
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct GridMeta {
    pub d: usize,
    pub sphere_points: usize,
    pub radial: Option<(f64, f64, usize)>,
    pub tol: f64,
}

/// One sample of the worst real part over the sphere at a given radius.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CurvePoint {
    pub radius: f64,
    pub max_re: f64,
}

/// Outcome of one condition check.
///
/// `margin` is the smallest distance to violation over the grid: it is
/// `≤ 0` exactly when the verdict is [`Verdict::Fails`], and a failing report
/// always carries at least one witness.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ConditionReport {
    pub condition: String,
    pub verdict: Verdict,
    pub margin: f64,
    pub witnesses: Vec<Witness>,
    pub grid: GridMeta,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub notes: Vec<String>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub curve: Vec<CurvePoint>,
}

impl ConditionReport {
    pub fn new(condition: impl Into<String>, grid: GridMeta) -> Self {
        Self {
            condition: condition.into(),
            verdict: Verdict::Holds,
            margin: f64::INFINITY,
            witnesses: Vec::new(),
            grid,
            notes: Vec::new(),
            curve: Vec::new(),
        }
    }

    pub fn holds(&self) -> bool {
        self.verdict == Verdict::Holds
    }

    pub fn fails(&self) -> bool {
        self.verdict == Verdict::Fails
    }

    pub fn note(&mut self, text: impl Into<String>) {
        self.notes.push(text.into());
    }

    /// Lowers the verdict to `v` if that is weaker.
    pub fn downgrade(&mut self, v: Verdict) {
        self.verdict = self.verdict.and(v);
    }

    pub fn witness(&mut self, w: Witness) {
        self.witnesses.push(w);
    }

    /// Merges a sub-report (used for combined conditions).
    pub fn absorb(&mut self, other: ConditionReport) {
        self.verdict = self.verdict.and(other.verdict);
        self.margin = self.margin.min(other.margin);
        self.witnesses.extend(other.witnesses);
        self.notes.extend(other.notes.into_iter().map(|n| alloc::format!("{}: {n}", other.condition)));
    }

    /// Clamps the margin so that its sign agrees with the verdict.
    pub fn finish(mut self) -> Self {
        if !self.margin.is_finite() {
            self.margin = if self.margin > 0.0 { f64::MAX } else { f64::MIN };
        }
        match self.verdict {
            Verdict::Fails => {
                if self.margin > 0.0 {
                    self.margin = 0.0;
                }
                debug_assert!(!self.witnesses.is_empty(), "failing report without witness");
            }
            _ => {
                if self.margin <= 0.0 {
                    self.margin = f64::MIN_POSITIVE;
                }
            }
        }
        self
    }

    pub fn invariants_hold(&self) -> bool {
        let fails = self.verdict == Verdict::Fails;
        (self.margin <= 0.0) == fails && (!fails || !self.witnesses.is_empty())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn verdict_combination() {
        use Verdict::*;
        assert_eq!(Holds.and(Holds), Holds);
        assert_eq!(Holds.and(Inconclusive), Inconclusive);
        assert_eq!(Inconclusive.and(Fails), Fails);
    }

    #[test]
    fn finish_enforces_margin_sign() {
        let mut r = ConditionReport::new("X", GridMeta::default());
        r.margin = -1.0;
        assert!(r.clone().finish().invariants_hold());
        r.verdict = Verdict::Fails;
        r.margin = 0.5;
        r.witness(Witness::new(&[1.0], None, 0.5, "w"));
        let r = r.finish();
        assert!(r.invariants_hold());
        assert_eq!(r.margin, 0.0);
    }
}
