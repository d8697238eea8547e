//! Orbit simulation, density estimation and the explicit irregular vectors.

mod construct;
mod density;

pub use construct::{
    construct_dc_vector, construct_ddc_vector, DcVectorPlan, DdcVector, Truncation,
};
pub use density::{brute_density_counts, density_estimate, DensityEstimate, IndexSet};

use crate::error::{Error, Result};
use crate::numeric::{csum, CompensatedSum};
use crate::system::{AtomicSystem, SpaceKind};
use serde::{Deserialize, Serialize};
use std::collections::BTreeMap;

/// Finitely supported function on atoms.
#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(transparent)]
pub struct SparseVector {
    pub entries: BTreeMap<i64, f64>,
}

impl SparseVector {
    pub fn new() -> Self {
        Self::default()
    }

    /// `e_i`.
    pub fn basis(i: i64) -> Self {
        Self::from_pairs([(i, 1.0)])
    }

    /// `c · χ_B`.
    pub fn indicator(b: &[i64], c: f64) -> Self {
        Self::from_pairs(b.iter().map(|&x| (x, c)))
    }

    pub fn from_pairs<I: IntoIterator<Item = (i64, f64)>>(pairs: I) -> Self {
        let mut v = Self::new();
        for (x, c) in pairs {
            v.add_at(x, c);
        }
        v
    }

    pub fn add_at(&mut self, x: i64, c: f64) {
        if c == 0.0 {
            return;
        }
        let e = self.entries.entry(x).or_insert(0.0);
        *e += c;
        if *e == 0.0 {
            self.entries.remove(&x);
        }
    }

    pub fn get(&self, x: i64) -> f64 {
        self.entries.get(&x).copied().unwrap_or(0.0)
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn scaled(&self, c: f64) -> Self {
        Self::from_pairs(self.entries.iter().map(|(x, v)| (*x, v * c)))
    }

    /// `self + c · other`.
    pub fn axpy(&self, c: f64, other: &Self) -> Self {
        let mut out = self.clone();
        for (x, v) in &other.entries {
            out.add_at(*x, c * v);
        }
        out
    }

    /// Norm in the system's space: `(Σ μ({x}) |v(x)|^p)^{1/p}` or `max |v(x)|`.
    pub fn norm(&self, system: &AtomicSystem) -> Result<f64> {
        match system.space() {
            SpaceKind::Lp { p } => {
                let mut acc = CompensatedSum::new();
                for (x, v) in &self.entries {
                    acc.add(system.mass_at(*x)? * v.abs().powf(p));
                }
                Ok(acc.value().powf(1.0 / p))
            }
            SpaceKind::SupNorm => Ok(self.entries.values().fold(0.0f64, |a, v| a.max(v.abs()))),
        }
    }
}

/// `C_{w,f} v = w · (v ∘ f)`.
pub fn apply_operator(system: &AtomicSystem, v: &SparseVector) -> Result<SparseVector> {
    let mut out = SparseVector::new();
    for (y, c) in &v.entries {
        for x in system.preimages(*y) {
            let w = system.weight_at(x)?;
            out.add_at(x, w * c);
        }
    }
    Ok(out)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SupportSummary {
    pub size: usize,
    pub min: Option<i64>,
    pub max: Option<i64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OrbitSeries {
    pub n_max: u64,
    /// `‖T^n y‖` for `n = 1..=n_max`.
    pub norms: Vec<f64>,
    /// `(1/N) Σ_{n=1}^N ‖T^n y‖` for `N = 1..=n_max`.
    pub cesaro: Vec<f64>,
    pub support_drift: Vec<SupportSummary>,
}

pub const DEFAULT_SUPPORT_CAP: usize = 1_000_000;

pub fn orbit_norm_series(system: &AtomicSystem, v: &SparseVector, n_max: u64) -> Result<OrbitSeries> {
    orbit_norm_series_capped(system, v, n_max, DEFAULT_SUPPORT_CAP)
}

pub fn orbit_norm_series_capped(
    system: &AtomicSystem,
    v: &SparseVector,
    n_max: u64,
    cap: usize,
) -> Result<OrbitSeries> {
    let mut cur = v.clone();
    let mut norms = Vec::with_capacity(n_max as usize);
    let mut cesaro = Vec::with_capacity(n_max as usize);
    let mut drift = Vec::with_capacity(n_max as usize);
    let mut acc = CompensatedSum::new();
    for n in 1..=n_max {
        cur = apply_operator(system, &cur)?;
        if cur.len() > cap {
            return Err(Error::SupportExplosion {
                size: cur.len(),
                cap,
            });
        }
        let nv = cur.norm(system)?;
        norms.push(nv);
        acc.add(nv);
        cesaro.push(acc.value() / n as f64);
        drift.push(SupportSummary {
            size: cur.len(),
            min: cur.entries.keys().next().copied(),
            max: cur.entries.keys().next_back().copied(),
        });
    }
    Ok(OrbitSeries {
        n_max,
        norms,
        cesaro,
        support_drift: drift,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct IrregularityThresholds {
    pub epsilon: f64,
    pub big: f64,
}

impl Default for IrregularityThresholds {
    fn default() -> Self {
        Self {
            epsilon: 1e-6,
            big: 1e6,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TailStats {
    pub min: f64,
    pub max: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct IrregularityReport {
    pub horizon: u64,
    pub thresholds: IrregularityThresholds,
    pub norm_tail: TailStats,
    pub cesaro_tail: TailStats,
    pub small_density: DensityEstimate,
    pub large_density: DensityEstimate,
    /// Irregularity notions the finite data does not contradict.
    pub consistent_with: Vec<String>,
}

fn tail_stats(xs: &[f64]) -> TailStats {
    let h = xs.len();
    let tail = &xs[h / 2..];
    TailStats {
        min: tail.iter().copied().fold(f64::INFINITY, f64::min),
        max: tail.iter().copied().fold(f64::NEG_INFINITY, f64::max),
    }
}

/// Finite-horizon statistics of an orbit; labels never assert asymptotics.
pub fn irregularity_report(series: &OrbitSeries, thresholds: IrregularityThresholds) -> IrregularityReport {
    let h = series.norms.len() as u64;
    let small: Vec<bool> = series.norms.iter().map(|v| *v < thresholds.epsilon).collect();
    let large: Vec<bool> = series.norms.iter().map(|v| *v > thresholds.big).collect();
    let small_set = IndexSet::ExplicitBitset { bits: small };
    let large_set = IndexSet::ExplicitBitset { bits: large };
    let small_density = density_estimate(&small_set, h);
    let large_density = density_estimate(&large_set, h);
    let norm_tail = if h == 0 { TailStats { min: 0.0, max: 0.0 } } else { tail_stats(&series.norms) };
    let cesaro_tail = if h == 0 { TailStats { min: 0.0, max: 0.0 } } else { tail_stats(&series.cesaro) };
    let all_min = series.norms.iter().copied().fold(f64::INFINITY, f64::min);
    let all_max = series.norms.iter().copied().fold(0.0f64, f64::max);
    let mut labels = Vec::new();
    let vanishes = all_min < thresholds.epsilon;
    let explodes = all_max > thresholds.big;
    if vanishes && explodes {
        labels.push("irregular".to_string());
    }
    if vanishes && all_max > 0.0 && norm_tail.max > 0.0 {
        labels.push("semi-irregular".to_string());
    }
    if small_density.upper_stat > 0.5 && large_density.upper_stat > 0.5 {
        labels.push("distributionally-irregular".to_string());
    }
    let ces_min = series.cesaro.iter().copied().fold(f64::INFINITY, f64::min);
    let ces_max = series.cesaro.iter().copied().fold(0.0f64, f64::max);
    if ces_min < thresholds.epsilon && ces_max > thresholds.big {
        labels.push("absolutely-mean-irregular".to_string());
    }
    IrregularityReport {
        horizon: h,
        thresholds,
        norm_tail,
        cesaro_tail,
        small_density,
        large_density,
        consistent_with: labels,
    }
}

/// Mean of a slice by compensated summation.
pub(crate) fn mean(xs: &[f64]) -> f64 {
    if xs.is_empty() {
        0.0
    } else {
        csum(xs.iter().copied()) / xs.len() as f64
    }
}
