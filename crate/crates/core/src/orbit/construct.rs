use super::{apply_operator, IndexSet, SparseVector};
use crate::error::{Error, Result};
use crate::family::{looks_divergent, SetFamily, TailBound};
use crate::numeric::CompensatedSum;
use crate::system::{AtomicSystem, SpaceKind};
use serde::{Deserialize, Serialize};
use std::collections::BTreeSet;

/// Where a constructed infinite sum is cut.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Truncation {
    /// Stop once the remaining tail bound drops below `1e-12` of the partial norm.
    #[default]
    Auto,
    Fixed(u64),
}

const AUTO_TOLERANCE: f64 = 1e-12;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DcTerm {
    pub n: u64,
    pub a: f64,
    pub r: f64,
    pub c: f64,
    /// `a_n / √r_n`, the norm contribution of `c_n χ_{A_n}`.
    pub contribution: f64,
    /// `Σ_{m ≤ n} a_m / √r_m`.
    pub partial_sum: f64,
    /// `1/√r_n ≤ ‖T^n y‖`.
    pub lower_bound: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DcVectorPlan {
    pub horizon: u64,
    pub terms: Vec<DcTerm>,
    pub scanned_sum: f64,
    pub tail: Option<TailBound>,
    pub tail_verified: bool,
    pub tail_mass: f64,
    pub two_sqrt_r1: f64,
    pub bound_holds: bool,
    pub truncated_at: u64,
    pub vector: SparseVector,
    pub norm_bound: f64,
}

/// Per-index norm quantities `(ν(A), m_n)`: `μ(A)^{1/p}` and `μ_n(f^{-n}(A))^{1/p}`
/// in `L^p`, `1` and `‖w^{(n)}‖_{f^{-n}(A)}` in sup-norm spaces.
fn dc_masses(system: &AtomicSystem, a: &[i64], n: u64) -> Result<(f64, f64)> {
    for &x in a {
        if let Some((z, _)) = system.preimages_n(x, n)?.into_iter().find(|(_, l)| *l == f64::NEG_INFINITY) {
            return Err(Error::NonpositiveWeight { index: z });
        }
    }
    match system.space() {
        SpaceKind::Lp { p } => Ok((
            system.mass_of(a)?.powf(1.0 / p),
            system.mu_n_preimage(a, n)?.powf(1.0 / p),
        )),
        SpaceKind::SupNorm => Ok((1.0, system.sup_weight_on_preimage(a, n)?)),
    }
}

/// Builds `y = Σ_{n∈E} c_n χ_{A_n}` with `a_n = ν(A_n)/m_n`,
/// `r_n = Σ_{i≥n} a_i` and `c_n = 1/(√r_n m_n)`, and checks
/// `Σ a_n/√r_n ≤ 2√r_1`.
pub fn construct_dc_vector(
    system: &AtomicSystem,
    family: &SetFamily,
    e: &IndexSet,
    horizon: u64,
    tail: Option<TailBound>,
    truncation: Truncation,
) -> Result<DcVectorPlan> {
    let mut raw = Vec::new();
    for n in 1..=horizon {
        if !e.contains(n) {
            continue;
        }
        let Some(a_set) = family.set(n) else { continue };
        let (nu, m) = dc_masses(system, &a_set, n)?;
        if m == 0.0 {
            return Err(Error::DivergentASeries);
        }
        raw.push((n, nu / m, m, a_set));
    }
    if raw.is_empty() {
        return Err(Error::DivergentASeries);
    }
    let scanned: Vec<(u64, f64)> = raw.iter().map(|(n, a, _, _)| (*n, *a)).collect();
    let tail_verified = match tail {
        Some(t) => {
            t.validate()?;
            t.first_violation(&scanned).is_none()
        }
        None => false,
    };
    let tail_mass = if tail_verified { tail.expect("tail").tail_after(horizon) } else { 0.0 };
    if !tail_verified && looks_divergent(&scanned.iter().map(|t| t.1).collect::<Vec<_>>()) {
        return Err(Error::DivergentASeries);
    }
    let mut r = vec![0.0; raw.len()];
    let mut acc = CompensatedSum::new();
    acc.add(tail_mass);
    for k in (0..raw.len()).rev() {
        acc.add(raw[k].1);
        r[k] = acc.value();
    }
    let scanned_sum = r[0] - tail_mass;
    let two_sqrt_r1 = 2.0 * r[0].sqrt();
    let mut partial = CompensatedSum::new();
    let mut terms = Vec::with_capacity(raw.len());
    for (k, (n, a, m, _)) in raw.iter().enumerate() {
        let sr = r[k].sqrt();
        let contribution = a / sr;
        partial.add(contribution);
        terms.push(DcTerm {
            n: *n,
            a: *a,
            r: r[k],
            c: 1.0 / (sr * m),
            contribution,
            partial_sum: partial.value(),
            lower_bound: 1.0 / sr,
        });
    }
    let bound_holds = terms.iter().all(|t| t.partial_sum <= two_sqrt_r1 * (1.0 + 1e-12));
    let cut = match truncation {
        Truncation::Fixed(t) => terms.iter().rposition(|x| x.n <= t).map_or(0, |k| k + 1),
        Truncation::Auto => {
            let mut k = terms.len();
            for (j, t) in terms.iter().enumerate() {
                let rest = r.get(j + 1).copied().unwrap_or(tail_mass);
                if 2.0 * rest.sqrt() < AUTO_TOLERANCE * t.partial_sum {
                    k = j + 1;
                    break;
                }
            }
            k
        }
    };
    let mut vector = SparseVector::new();
    for (t, (_, _, _, a_set)) in terms.iter().zip(&raw).take(cut) {
        for &x in a_set {
            vector.add_at(x, t.c);
        }
    }
    let norm_bound = if cut == 0 { 0.0 } else { terms[cut - 1].partial_sum };
    Ok(DcVectorPlan {
        horizon,
        truncated_at: if cut == 0 { 0 } else { terms[cut - 1].n },
        terms,
        scanned_sum,
        tail,
        tail_verified,
        tail_mass,
        two_sqrt_r1,
        bound_holds,
        vector,
        norm_bound,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DdcVector {
    pub k: u64,
    pub horizon: u64,
    /// `(n, ∫_{f^n(B')} v_n^{-p} dμ)` for scanned `n ∈ D`, `n ≥ k`.
    pub terms: Vec<(u64, f64)>,
    pub scanned_sum: f64,
    pub tail: Option<TailBound>,
    pub tail_verified: bool,
    pub truncated_at: u64,
    pub vector: SparseVector,
    pub norm: f64,
    /// `μ(B')^{1/p}` (or `1` in sup-norm spaces).
    pub lower_bound: f64,
    /// `(n, ‖T^n φ_k‖)` for the checked indices.
    pub orbit_checks: Vec<(u64, f64)>,
    pub lower_bound_holds: bool,
}

/// Orbit of `B'` with `ln|w^{(n)}|` at each atom, rejecting branching and
/// returning orbits.
fn wandering_orbit(system: &AtomicSystem, b: &[i64], horizon: u64) -> Result<Vec<Vec<(i64, f64)>>> {
    let mut cur: Vec<(i64, f64)> = b.iter().map(|&x| (x, 0.0)).collect();
    let mut seen: BTreeSet<i64> = b.iter().copied().collect();
    let mut out = vec![cur.clone()];
    for _ in 1..=horizon {
        let mut next = Vec::with_capacity(cur.len());
        for (x, l) in &cur {
            let w = system.weight_at(*x)?;
            if w == 0.0 {
                return Err(Error::NonpositiveWeight { index: *x });
            }
            let y = system.image(*x)?;
            if system.preimages(y).len() > 1 {
                return Err(Error::NonInjectiveMap { atom: y });
            }
            if !seen.insert(y) {
                return Err(Error::DivergentSum);
            }
            next.push((y, l + w.abs().ln()));
        }
        out.push(next.clone());
        cur = next;
    }
    Ok(out)
}

/// `φ_k = Σ_{n∈D, n≥k} v_n^{-1} χ_{f^n(B')}` with `v_n(f^n x) = |w^{(n)}(x)|`.
pub fn construct_ddc_vector(
    system: &AtomicSystem,
    b_prime: &[i64],
    d: &IndexSet,
    k: u64,
    horizon: u64,
    tail: Option<TailBound>,
    truncation: Truncation,
) -> Result<DdcVector> {
    let k = k.max(1);
    let orbit = wandering_orbit(system, b_prime, horizon)?;
    let p = system.space().p();
    let mut terms = Vec::new();
    for n in k..=horizon {
        if !d.contains(n) {
            continue;
        }
        let mut acc = CompensatedSum::new();
        let mut sup = 0.0f64;
        for (y, l) in &orbit[n as usize] {
            match p {
                Some(p) => acc.add(system.mass_at(*y)? * (-p * l).exp()),
                None => sup = sup.max((-l).exp()),
            }
        }
        terms.push((n, if p.is_some() { acc.value() } else { sup }));
    }
    let tail_verified = match tail {
        Some(t) => {
            t.validate()?;
            t.first_violation(&terms).is_none()
        }
        None => false,
    };
    let values: Vec<f64> = terms.iter().map(|t| t.1).collect();
    if values.is_empty() || (!tail_verified && looks_divergent(&values)) {
        return Err(Error::DivergentSum);
    }
    let scanned_sum = values.iter().copied().sum::<f64>();
    let cut_n = match truncation {
        Truncation::Fixed(t) => t,
        Truncation::Auto => {
            let mut suffix = vec![0.0; values.len() + 1];
            if tail_verified {
                suffix[values.len()] = tail.expect("tail").tail_after(horizon);
            }
            for j in (0..values.len()).rev() {
                suffix[j] = suffix[j + 1] + values[j];
            }
            let mut cut = horizon;
            for j in 0..values.len() {
                let partial = suffix[0] - suffix[j + 1];
                if suffix[j + 1] < AUTO_TOLERANCE * partial {
                    cut = terms[j].0;
                    break;
                }
            }
            cut
        }
    };
    let mut vector = SparseVector::new();
    for &(n, _) in terms.iter().filter(|t| t.0 <= cut_n) {
        for (y, l) in &orbit[n as usize] {
            vector.add_at(*y, (-l).exp());
        }
    }
    let norm = vector.norm(system)?;
    let lower_bound = match p {
        Some(p) => system.mass_of(b_prime)?.powf(1.0 / p),
        None => 1.0,
    };
    let check_to = cut_n.min(k + 60);
    let mut orbit_checks = Vec::new();
    let mut v = vector.clone();
    for n in 1..=check_to {
        v = apply_operator(system, &v)?;
        if n >= k && d.contains(n) {
            orbit_checks.push((n, v.norm(system)?));
        }
    }
    let lower_bound_holds = orbit_checks.iter().all(|(_, x)| *x >= lower_bound * (1.0 - 1e-12));
    Ok(DdcVector {
        k,
        horizon,
        terms,
        scanned_sum,
        tail,
        tail_verified,
        truncated_at: cut_n,
        vector,
        norm,
        lower_bound,
        orbit_checks,
        lower_bound_holds,
    })
}
