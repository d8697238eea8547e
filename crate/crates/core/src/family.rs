//! Set families and analytic tail bounds used by certificates.

use crate::error::{Error, Result};
use serde::{Deserialize, Serialize};
use std::collections::BTreeMap;

/// A sequence of atom sets `A_n`, `n ≥ 1`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case", deny_unknown_fields)]
pub enum SetFamily {
    /// `A_n = A` for every `n`.
    Single { atoms: Vec<i64> },
    /// `A_n = {n + offset}`.
    ShiftedSingletons { offset: i64 },
    /// `A_n` listed for finitely many `n`; absent elsewhere.
    Explicit { sets: BTreeMap<u64, Vec<i64>> },
}

impl SetFamily {
    pub fn set(&self, n: u64) -> Option<Vec<i64>> {
        match self {
            SetFamily::Single { atoms } => Some(atoms.clone()),
            SetFamily::ShiftedSingletons { offset } => Some(vec![n as i64 + offset]),
            SetFamily::Explicit { sets } => sets.get(&n).cloned(),
        }
    }
}

/// Declared domination `a_n ≤ bound(n)` used beyond the scanned range.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case", deny_unknown_fields)]
pub enum TailBound {
    /// `a_n ≤ c ρ^n`, `0 < ρ < 1`.
    Geometric { c: f64, rho: f64 },
    /// `a_n ≤ c n^{-s}`, `s > 1`.
    PSeries { c: f64, s: f64 },
}

impl TailBound {
    pub fn validate(&self) -> Result<()> {
        let ok = match *self {
            TailBound::Geometric { c, rho } => c > 0.0 && rho > 0.0 && rho < 1.0,
            TailBound::PSeries { c, s } => c > 0.0 && s > 1.0,
        };
        if ok {
            Ok(())
        } else {
            Err(Error::MalformedCertificate(format!("tail bound {self:?} has invalid parameters")))
        }
    }

    pub fn term(&self, n: u64) -> f64 {
        match *self {
            TailBound::Geometric { c, rho } => c * rho.powf(n as f64),
            TailBound::PSeries { c, s } => c * (n as f64).powf(-s),
        }
    }

    /// Upper bound on `Σ_{n > h} a_n`.
    pub fn tail_after(&self, h: u64) -> f64 {
        match *self {
            TailBound::Geometric { c, rho } => c * rho.powf(h as f64 + 1.0) / (1.0 - rho),
            TailBound::PSeries { c, s } => {
                if h == 0 {
                    f64::INFINITY
                } else {
                    c * (h as f64).powf(1.0 - s) / (s - 1.0)
                }
            }
        }
    }

    /// First scanned `(n, a_n)` the bound fails to dominate.
    pub fn first_violation(&self, terms: &[(u64, f64)]) -> Option<u64> {
        terms
            .iter()
            .find(|(n, a)| *a > self.term(*n) * (1.0 + 1e-12))
            .map(|(n, _)| *n)
    }
}

/// Finite-scan divergence heuristic: the tail half of the scanned terms
/// carries at least half the mass of the head half.
pub(crate) fn looks_divergent(terms: &[f64]) -> bool {
    if terms.len() < 2 {
        return terms.iter().any(|t| !t.is_finite());
    }
    if terms.iter().any(|t| !t.is_finite()) {
        return true;
    }
    let mid = terms.len() / 2;
    let head: f64 = terms[..mid].iter().sum();
    let tail: f64 = terms[mid..].iter().sum();
    tail > 0.0 && tail >= 0.5 * head
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn geometric_tail_is_exact_for_geometric_terms() {
        let t = TailBound::Geometric { c: 1.0, rho: 0.5 };
        assert_eq!(t.tail_after(10), 2f64.powi(-10));
        let terms: Vec<_> = (1..20).map(|n| (n, 0.5f64.powi(n as i32))).collect();
        assert_eq!(t.first_violation(&terms), None);
        assert_eq!(TailBound::Geometric { c: 1.0, rho: 0.4 }.first_violation(&terms), Some(1));
    }

    #[test]
    fn p_series_tail_dominates() {
        let t = TailBound::PSeries { c: 1.0, s: 2.0 };
        let exact: f64 = (11..200_000).map(|n| 1.0 / (n as f64 * n as f64)).sum();
        assert!(t.tail_after(10) >= exact);
        assert!(TailBound::PSeries { c: 1.0, s: 1.0 }.validate().is_err());
    }

    #[test]
    fn divergence_heuristic() {
        assert!(looks_divergent(&[1.0; 100]));
        assert!(!looks_divergent(&(1..100).map(|n| 0.5f64.powi(n)).collect::<Vec<_>>()));
        assert!(!looks_divergent(&(1..1000).map(|n| 1.0 / (n as f64).powi(2)).collect::<Vec<_>>()));
    }
}
