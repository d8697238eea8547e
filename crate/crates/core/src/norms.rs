//! Iterate norms `‖T^n‖`, the absolute Cesàro constant `N_p(T)` and Cesàro
//! mean diagnostics.
//!
//! ## Formulas
//!
//! On `L^p` of an atomic measure the supremum over sets of
//! `μ_n(f^{-n}(B))/μ(B)` is attained on atoms, so
//!
//! ```text
//! ‖T^n‖ = sup_x (μ_n(f^{-n}{x}) / μ{x})^{1/p}          (Lp)
//! ‖T^n‖ = ‖w^{(n)}‖_∞                                   (sup norm)
//! N_p(T) = sup_{x,N} (1/N) Σ_{n=1}^N μ_n(f^{-n}{x})/μ{x}  (Lp)
//! N_p(T) = sup_N (1/N) Σ_{n=1}^N ‖w^{(n)}‖^p              (sup norm)
//! ```
//!
//! For a unilateral shift the Lp sum at index `i` stops at `min(N, i-1)`.

use crate::error::{Error, Result};
use crate::numeric::{CompensatedSum, ExtReal};
use crate::orbit::{apply_operator, SparseVector};
use crate::system::{AtomicSystem, SpaceKind, Structure};
use crate::weight::{Domain, Frontier, Generator, Scan, WeightSpec};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

pub const DEFAULT_INDEX_MAX: i64 = 100_000;
pub const DEFAULT_CESARO_N: u64 = 10_000;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ScanOptions {
    /// Largest atom index visited by scans of infinite families.
    pub index_max: i64,
}

impl Default for ScanOptions {
    fn default() -> Self {
        Self {
            index_max: DEFAULT_INDEX_MAX,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct NormValue {
    pub value: ExtReal,
    pub log_value: f64,
    /// Closed form or exhaustive scan.
    pub exact: bool,
    /// Scanned maximum sits at the scan edge, so the true supremum may be larger.
    pub divergent: bool,
    pub witness: Option<i64>,
}

impl NormValue {
    fn from_log(log_value: f64, exact: bool, divergent: bool, witness: Option<i64>) -> Self {
        Self {
            value: ExtReal::from_f64(log_value.exp()),
            log_value,
            exact,
            divergent,
            witness,
        }
    }
}

/// Inclusive index range covering every distinct window of length `n` of a
/// table-like spec, together with the flag that the table is finite data.
fn table_cover(spec: &WeightSpec, n: u64, stride: i64) -> Option<(i64, i64)> {
    let (origin, len) = match &spec.generator {
        Generator::Table { values, origin, .. } => (*origin, values.len() as i64),
        Generator::StepFunction {
            values,
            origin,
            cell_width,
            ..
        } if *cell_width == 1.0 && origin.fract() == 0.0 => (*origin as i64, values.len() as i64),
        _ => return None,
    };
    let reach = n as i64 * stride;
    let lo = origin - reach;
    let lo = if spec.domain == Domain::Unilateral { lo.max(1) } else { lo };
    Some((lo, origin + len))
}

fn frontier_of(spec: &WeightSpec) -> Frontier {
    match &spec.generator {
        Generator::Table { frontier, .. } | Generator::StepFunction { frontier, .. } => *frontier,
        _ => Frontier::Error,
    }
}

/// Maximum of `ln|w^{(n)}(z)|` over `z ∈ [lo, hi]`, skipping windows that
/// leave an error-frontier table. Ties go to the smallest `z`.
fn scan_log_wn(system: &AtomicSystem, n: u64, lo: i64, hi: i64) -> Result<Option<(f64, i64)>> {
    let mut best: Option<(f64, i64)> = None;
    for z in lo..=hi {
        if !system.contains(z) {
            continue;
        }
        match system.log_wn(z, n) {
            Ok(v) => {
                if best.is_none_or(|(b, _)| v > b) {
                    best = Some((v, z));
                }
            }
            Err(Error::IndexOutOfDomain { .. }) => continue,
            Err(e) => return Err(e),
        }
    }
    Ok(best)
}

/// Log-domain `ln Σ exp(x_i)`.
fn log_sum_exp(xs: &[f64]) -> f64 {
    let m = xs.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    if m == f64::NEG_INFINITY {
        return m;
    }
    let mut acc = CompensatedSum::new();
    for x in xs {
        acc.add((x - m).exp());
    }
    m + acc.value().ln()
}

/// `(ln ‖T^n‖, witness)` for `n = 1..=n_max` on an explicit finite system,
/// by propagating `μ_n(f^{-n}{x})` (Lp) or `|w^{(n)}|` (sup norm).
fn explicit_series(system: &AtomicSystem, n_max: u64) -> Result<Vec<(f64, i64)>> {
    let atoms = system.scan_atoms(0);
    let pos: std::collections::HashMap<i64, usize> = atoms.iter().enumerate().map(|(k, x)| (*x, k)).collect();
    let log_w: Vec<f64> = atoms
        .iter()
        .map(|&x| system.weight_at(x).map(|w| if w == 0.0 { f64::NEG_INFINITY } else { w.abs().ln() }))
        .collect::<Result<_>>()?;
    let image: Vec<usize> = atoms.iter().map(|&x| system.image(x).map(|y| pos[&y])).collect::<Result<_>>()?;
    let log_m: Vec<f64> = atoms.iter().map(|&x| system.mass_at(x).map(f64::ln)).collect::<Result<_>>()?;
    let mut out = Vec::with_capacity(n_max as usize);
    match system.space() {
        SpaceKind::Lp { p } => {
            let mut g = log_m.clone();
            for _ in 0..n_max {
                let mut parts: Vec<Vec<f64>> = vec![Vec::new(); atoms.len()];
                for (y, gy) in g.iter().enumerate() {
                    parts[image[y]].push(gy + p * log_w[y]);
                }
                g = parts.iter().map(|v| log_sum_exp(v)).collect();
                let mut best = (f64::NEG_INFINITY, atoms[0]);
                for (k, gx) in g.iter().enumerate() {
                    let v = (gx - log_m[k]) / p;
                    if v > best.0 {
                        best = (v, atoms[k]);
                    }
                }
                out.push(best);
            }
        }
        SpaceKind::SupNorm => {
            let mut h = vec![0.0f64; atoms.len()];
            for _ in 0..n_max {
                h = (0..atoms.len()).map(|z| log_w[z] + h[image[z]]).collect();
                let mut best = (f64::NEG_INFINITY, atoms[0]);
                for (k, v) in h.iter().enumerate() {
                    if *v > best.0 {
                        best = (*v, atoms[k]);
                    }
                }
                out.push(best);
            }
        }
    }
    Ok(out)
}

pub fn iterate_norm(system: &AtomicSystem, n: u64) -> Result<NormValue> {
    iterate_norm_with(system, n, &ScanOptions::default())
}

/// `‖T^n‖`, exact for closed-form families, tables and finite systems.
pub fn iterate_norm_with(system: &AtomicSystem, n: u64, opts: &ScanOptions) -> Result<NormValue> {
    if n == 0 {
        return Ok(NormValue::from_log(0.0, true, false, None));
    }
    match system.structure() {
        Structure::Shift { spec, stride, .. } => {
            if *stride == 1 {
                if let Ok(s) = spec.sup_window_product(n, Scan::Exact) {
                    return Ok(NormValue::from_log(
                        s.value.to_f64().ln(),
                        true,
                        false,
                        Some(s.witness),
                    ));
                }
            }
            if let Some((lo, hi)) = table_cover(spec, n, *stride) {
                let best = scan_log_wn(system, n, lo, hi)?;
                let (v, w) = match (best, frontier_of(spec)) {
                    (Some(b), _) => b,
                    (None, _) => (f64::NEG_INFINITY, lo),
                };
                return Ok(NormValue::from_log(v, true, false, Some(w)));
            }
            let (lo, hi) = match spec.domain {
                Domain::Unilateral => (1, opts.index_max),
                Domain::Bilateral => (-opts.index_max, opts.index_max),
            };
            let (v, w) = scan_log_wn(system, n, lo, hi)?.unwrap_or((f64::NEG_INFINITY, lo));
            let at_edge = w == hi || (spec.domain == Domain::Bilateral && w == lo);
            Ok(NormValue::from_log(v, false, at_edge, Some(w)))
        }
        Structure::ExplicitFinite { .. } => {
            let (v, w) = *explicit_series(system, n)?.last().expect("n ≥ 1");
            Ok(NormValue::from_log(v, true, false, Some(w)))
        }
        Structure::ExplicitWithTail { tail_start, .. } => {
            let hi = tail_start + opts.index_max;
            let mut best: Option<(f64, i64)> = None;
            for x in system.scan_atoms(opts.index_max as u64) {
                let v = match system.space() {
                    SpaceKind::Lp { p } => {
                        let pre = system.preimages_n(x, n)?;
                        let logs: Vec<f64> = pre
                            .iter()
                            .map(|(z, l)| system.mass_at(*z).map(|m| m.ln() + p * l))
                            .collect::<Result<_>>()?;
                        (log_sum_exp(&logs) - system.mass_at(x)?.ln()) / p
                    }
                    SpaceKind::SupNorm => system.log_wn(x, n)?,
                };
                if best.is_none_or(|(b, _)| v > b) {
                    best = Some((v, x));
                }
            }
            let (v, w) = best.expect("scan atoms nonempty");
            Ok(NormValue::from_log(v, false, w == hi, Some(w)))
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NormSeries {
    pub n_max: u64,
    /// `‖T^n‖` for `n = 1..=n_max`.
    pub values: Vec<ExtReal>,
    pub witnesses: Vec<Option<i64>>,
    pub exact: bool,
    pub divergent: bool,
}

pub fn norm_series(system: &AtomicSystem, n_max: u64) -> Result<NormSeries> {
    norm_series_with(system, n_max, &ScanOptions::default())
}

pub fn norm_series_with(system: &AtomicSystem, n_max: u64, opts: &ScanOptions) -> Result<NormSeries> {
    let vals: Vec<NormValue> = if matches!(system.structure(), Structure::ExplicitFinite { .. }) {
        explicit_series(system, n_max)?
            .into_iter()
            .map(|(v, w)| NormValue::from_log(v, true, false, Some(w)))
            .collect()
    } else {
        (1..=n_max)
            .into_par_iter()
            .map(|n| iterate_norm_with(system, n, opts))
            .collect::<Result<_>>()?
    };
    Ok(NormSeries {
        n_max,
        exact: vals.iter().all(|v| v.exact),
        divergent: vals.iter().any(|v| v.divergent),
        witnesses: vals.iter().map(|v| v.witness).collect(),
        values: vals.into_iter().map(|v| v.value).collect(),
    })
}

/// `(μ_n(f^{-n}{x}) / μ{x})^{1/p}` (Lp) for `n = 1..=n_max`; for a shift this
/// is the backward window product `|w_{x-n} ⋯ w_{x-1}|`.
pub fn atom_ratio_series(system: &AtomicSystem, x: i64, n_max: u64) -> Result<Vec<f64>> {
    let mut out = Vec::with_capacity(n_max as usize);
    if let Structure::Shift { spec, stride: 1, .. } = system.structure() {
        let mut log = 0.0f64;
        for n in 1..=n_max {
            let z = x - n as i64;
            if spec.domain == Domain::Unilateral && z < 1 {
                out.resize(n_max as usize, 0.0);
                break;
            }
            let w = spec.magnitude(z)?;
            if w == 0.0 {
                out.resize(n_max as usize, 0.0);
                break;
            }
            log += w.ln();
            out.push(log.exp());
        }
        return Ok(out);
    }
    let p = system.space().p().unwrap_or(1.0);
    let mx = system.mass_at(x)?;
    let mut frontier = vec![(x, 0.0f64)];
    for _ in 0..n_max {
        let mut next = Vec::new();
        for (z, l) in &frontier {
            for y in system.preimages(*z) {
                let w = system.weight_at(y)?;
                let lw = if w == 0.0 { f64::NEG_INFINITY } else { w.abs().ln() };
                next.push((y, l + lw));
            }
        }
        frontier = next;
        let mut acc = CompensatedSum::new();
        for (z, l) in &frontier {
            acc.add(system.mass_at(*z)? * (p * l).exp());
        }
        out.push((acc.value() / mx).powf(1.0 / p));
    }
    Ok(out)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CesaroOptions {
    pub horizon: u64,
    pub index_lo: i64,
    pub index_hi: i64,
    /// Exponent of the Cesàro sum; defaults to the space exponent.
    pub exponent: Option<f64>,
}

impl Default for CesaroOptions {
    fn default() -> Self {
        Self {
            horizon: DEFAULT_CESARO_N,
            index_lo: -DEFAULT_INDEX_MAX,
            index_hi: DEFAULT_INDEX_MAX,
            exponent: None,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case")]
pub enum ClosedForm {
    /// The statistic equals `value` exactly.
    Equal { value: f64 },
    /// The statistic is at most `bound` for every horizon.
    Bounded { bound: f64 },
    /// The statistic tends to `+∞`.
    Divergent,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CesaroWitness {
    pub index: Option<i64>,
    pub n: u64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct IndexCurve {
    pub index: i64,
    /// `(1/N) Σ_{n≤N} a_n^r` for `N = 1..=horizon`.
    pub values: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CesaroBoundReport {
    pub p: Option<f64>,
    pub exponent: f64,
    pub horizon_n: u64,
    pub index_range: (i64, i64),
    pub value: ExtReal,
    pub scanned_max: f64,
    pub witness: CesaroWitness,
    pub closed_form: Option<ClosedForm>,
    /// The exponent differs from the space exponent, so basis vectors only
    /// give a lower bound for the operator constant.
    pub lower_bound_only: bool,
    pub divergence_flag: bool,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub per_index_curves: Option<Vec<IndexCurve>>,
}

fn power(x: f64, r: f64) -> f64 {
    if r == 1.0 {
        x
    } else if r == 2.0 {
        x * x
    } else {
        x.powf(r)
    }
}

/// Best `(1/N) Σ_{n≤N} a_n^r` over `N ≤ horizon` for one atom.
fn atom_cesaro_best(system: &AtomicSystem, x: i64, horizon: u64, r: f64) -> Result<(f64, u64)> {
    let a = atom_ratio_series(system, x, horizon)?;
    let mut acc = CompensatedSum::new();
    let mut best = (0.0f64, 1u64);
    for (k, v) in a.iter().enumerate() {
        if *v == 0.0 && acc.value() == 0.0 {
            continue;
        }
        acc.add(power(*v, r));
        let avg = acc.value() / (k + 1) as f64;
        if avg > best.0 {
            best = (avg, k as u64 + 1);
        }
    }
    Ok(best)
}

fn shift_closed_form(spec: &WeightSpec, space: SpaceKind, r: f64) -> Option<ClosedForm> {
    let by_constant = |c: f64| {
        if c <= 1.0 {
            ClosedForm::Equal { value: c.powf(r) }
        } else {
            ClosedForm::Divergent
        }
    };
    match (&spec.generator, space) {
        (Generator::Constant { value }, _) => Some(by_constant(value.abs())),
        (Generator::Geometric { r: g }, _) => Some(by_constant(g.abs())),
        (Generator::PiecewiseBilateral { negative, positive }, _) => {
            let magnitude = |g: &Generator| match g {
                Generator::Constant { value } => Some(value.abs()),
                Generator::Geometric { r } => Some(r.abs()),
                _ => None,
            };
            let (a, b) = (magnitude(negative)?, magnitude(positive)?);
            if a > 1.0 || b > 1.0 {
                Some(ClosedForm::Divergent)
            } else {
                Some(ClosedForm::Bounded { bound: 1.0 })
            }
        }
        (Generator::Periodic { block }, _)
            if block.iter().all(|v| *v != 0.0) && block.iter().map(|v| v.abs().ln()).sum::<f64>() > 1e-12 =>
        {
            Some(ClosedForm::Divergent)
        }
        (Generator::RatioPower { .. }, SpaceKind::SupNorm) => Some(ClosedForm::Divergent),
        (Generator::RatioPower { q }, SpaceKind::Lp { .. }) => {
            if r < *q {
                Some(ClosedForm::Bounded {
                    bound: 2.0 / (1.0 - r / q),
                })
            } else {
                Some(ClosedForm::Divergent)
            }
        }
        _ => None,
    }
}

/// Scan size used as supporting evidence when a closed form settles the value.
const CLOSED_FORM_SCAN_CAP: i64 = 2_000;

/// Scanned `N_p`-type statistic with closed forms where available.
pub fn np_cesaro(system: &AtomicSystem, opts: &CesaroOptions) -> Result<CesaroBoundReport> {
    np_cesaro_with_curves(system, opts, &[])
}

/// As [`np_cesaro`], also returning per-`N` curves for the listed atoms.
pub fn np_cesaro_with_curves(
    system: &AtomicSystem,
    opts: &CesaroOptions,
    curve_atoms: &[i64],
) -> Result<CesaroBoundReport> {
    let space = system.space();
    let r = opts.exponent.or(space.p()).unwrap_or(1.0);
    let lower_bound_only = match space {
        SpaceKind::Lp { p } => r != p,
        SpaceKind::SupNorm => false,
    };
    let horizon = opts.horizon.max(1);
    let closed_form = match system.structure() {
        Structure::Shift { spec, stride: 1, .. } => shift_closed_form(spec, space, r),
        _ => None,
    };
    let (horizon, index_lo, index_hi) = match closed_form {
        Some(ClosedForm::Equal { .. } | ClosedForm::Divergent) => (
            horizon.min(CLOSED_FORM_SCAN_CAP as u64),
            opts.index_lo.max(-CLOSED_FORM_SCAN_CAP),
            opts.index_hi.min(CLOSED_FORM_SCAN_CAP),
        ),
        _ => (horizon, opts.index_lo, opts.index_hi),
    };
    let (scanned_max, witness, edge) = match space {
        SpaceKind::SupNorm => {
            let scan = ScanOptions {
                index_max: index_hi.max(1),
            };
            let series = norm_series_with(system, horizon, &scan)?;
            let mut acc = CompensatedSum::new();
            let mut best = (0.0f64, 1u64);
            for (k, v) in series.values.iter().enumerate() {
                acc.add(power(v.to_f64(), r));
                let avg = acc.value() / (k + 1) as f64;
                if avg > best.0 {
                    best = (avg, k as u64 + 1);
                }
            }
            (best.0, CesaroWitness { index: None, n: best.1 }, series.divergent)
        }
        SpaceKind::Lp { .. } => {
            let atoms: Vec<i64> = match system.structure() {
                Structure::Shift { spec, .. } => {
                    let lo = if spec.domain == Domain::Unilateral {
                        index_lo.max(1)
                    } else {
                        index_lo
                    };
                    (lo..=index_hi).collect()
                }
                Structure::ExplicitFinite { .. } => system.scan_atoms(0),
                Structure::ExplicitWithTail { tail_start, .. } => {
                    system.scan_atoms((index_hi - tail_start).max(0) as u64)
                }
            };
            if atoms.is_empty() {
                return Err(Error::InvalidSpec("empty index range".into()));
            }
            let results: Vec<(f64, u64)> = atoms
                .par_iter()
                .map(|&x| atom_cesaro_best(system, x, horizon, r))
                .collect::<Result<_>>()?;
            let mut best = (0.0f64, atoms[0], 1u64);
            for (x, (v, n)) in atoms.iter().zip(&results) {
                if *v > best.0 {
                    best = (*v, *x, *n);
                }
            }
            let edge = !matches!(system.structure(), Structure::ExplicitFinite { .. })
                && (best.1 == *atoms.last().expect("nonempty") || best.2 == horizon);
            (
                best.0,
                CesaroWitness {
                    index: Some(best.1),
                    n: best.2,
                },
                edge,
            )
        }
    };
    let curves = if curve_atoms.is_empty() {
        None
    } else {
        let mut out = Vec::new();
        for &x in curve_atoms {
            let a = atom_ratio_series(system, x, horizon)?;
            let mut acc = CompensatedSum::new();
            let values = a
                .iter()
                .enumerate()
                .map(|(k, v)| {
                    acc.add(power(*v, r));
                    acc.value() / (k + 1) as f64
                })
                .collect();
            out.push(IndexCurve { index: x, values });
        }
        Some(out)
    };
    let value = match closed_form {
        Some(ClosedForm::Divergent) => ExtReal::PosInf,
        Some(ClosedForm::Equal { value }) => ExtReal::Finite(value),
        _ => ExtReal::Finite(scanned_max),
    };
    Ok(CesaroBoundReport {
        p: space.p(),
        exponent: r,
        horizon_n: horizon,
        index_range: (index_lo, index_hi),
        value,
        scanned_max,
        witness,
        closed_form,
        lower_bound_only,
        divergence_flag: edge && !matches!(closed_form, Some(ClosedForm::Bounded { .. } | ClosedForm::Equal { .. })),
        per_index_curves: curves,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct JensenReport {
    pub q: f64,
    pub p: f64,
    pub windows: u64,
    /// Largest `mean_q − mean_p^{q/p}` over scanned windows.
    pub max_excess: f64,
    pub worst: Option<(i64, u64)>,
}

/// Checks `(1/N)Σ a_n^q ≤ ((1/N)Σ a_n^p)^{q/p}` on every window `(x, N)`.
pub fn jensen_check(system: &AtomicSystem, q: f64, p: f64, horizon: u64, atoms: &[i64]) -> Result<JensenReport> {
    let mut windows = 0;
    let mut max_excess = f64::NEG_INFINITY;
    let mut worst = None;
    for &x in atoms {
        let a = atom_ratio_series(system, x, horizon)?;
        let mut sq = CompensatedSum::new();
        let mut sp = CompensatedSum::new();
        for (k, v) in a.iter().enumerate() {
            sq.add(v.powf(q));
            sp.add(v.powf(p));
            let n = (k + 1) as f64;
            let excess = sq.value() / n - (sp.value() / n).powf(q / p);
            windows += 1;
            if excess > max_excess {
                max_excess = excess;
                worst = Some((x, k as u64 + 1));
            }
        }
    }
    Ok(JensenReport {
        q,
        p,
        windows,
        max_excess,
        worst,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Trend {
    Contracting,
    Expanding,
    Stationary,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CesaroMeanSeries {
    pub n_max: u64,
    /// `M_n y` for `n = 0..=n_max`.
    pub means: Vec<SparseVector>,
    pub mean_norms: Vec<f64>,
    /// `‖M_{n+1} y − M_n y‖` for `n = 0..n_max`.
    pub deltas: Vec<f64>,
    pub trend: Trend,
}

/// `M_n y = (1/(n+1)) Σ_{k=0}^n T^k y`, computed incrementally.
pub fn cesaro_mean_series(system: &AtomicSystem, y: &SparseVector, n_max: u64) -> Result<CesaroMeanSeries> {
    let mut orbit = y.clone();
    let mut mean = y.clone();
    let mut means = vec![mean.clone()];
    let mut mean_norms = vec![mean.norm(system)?];
    let mut deltas = Vec::with_capacity(n_max as usize);
    for n in 1..=n_max {
        orbit = apply_operator(system, &orbit)?;
        let step = orbit.axpy(-1.0, &mean).scaled(1.0 / (n as f64 + 1.0));
        deltas.push(step.norm(system)?);
        mean = mean.axpy(1.0, &step);
        mean_norms.push(mean.norm(system)?);
        means.push(mean.clone());
    }
    let trend = if deltas.len() < 4 {
        Trend::Stationary
    } else {
        let q = deltas.len() / 4;
        let head = crate::orbit::mean(&deltas[..q]);
        let tail = crate::orbit::mean(&deltas[deltas.len() - q..]);
        if tail < 0.5 * head {
            Trend::Contracting
        } else if tail > 2.0 * head {
            Trend::Expanding
        } else {
            Trend::Stationary
        }
    };
    Ok(CesaroMeanSeries {
        n_max,
        means,
        mean_norms,
        deltas,
        trend,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GapCheckpoint {
    pub n: u64,
    pub index_max: i64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GapConfig {
    pub c0_n_max: u64,
    /// Scan range for window suprema without a closed form.
    pub c0_index_max: i64,
    pub lp_checkpoints: Vec<GapCheckpoint>,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LpGapPoint {
    pub n: u64,
    pub index_max: i64,
    /// `V_N = sup_i (1/N) Σ_{n=1}^{min(N,i-1)} |w_{i-n} ⋯ w_{i-1}|^p`.
    pub value: f64,
    pub witness: i64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FormulaGapReport {
    pub p: f64,
    /// `(1/N) Σ_{n=1}^N (sup_i |w_i ⋯ w_{i+n-1}|)^p` for `N = 1..=c0_n_max`.
    pub c0: Vec<f64>,
    pub c0_sup: f64,
    pub c0_sup_at: u64,
    pub c0_exact: bool,
    pub lp: Vec<LpGapPoint>,
    pub lp_sup: f64,
    pub gap: f64,
}

/// Streaming `V_N` scan: `S(i+1) = w_i^p (1 + S(i) − [i > N] P(i−N, N)^p)`
/// over a ring of the last `N` log-weights, resynchronised by direct
/// summation every `N` steps.
fn lp_side(spec: &WeightSpec, p: f64, n: u64, index_max: i64) -> Result<(f64, i64)> {
    let len = n as usize;
    // Ring slot `j % N` holds `p ln|w_j|`, or `None` for a zero weight.
    let mut ring: Vec<Option<f64>> = vec![Some(0.0); len];
    let mut window_log = 0.0f64;
    let mut zeros_in_window = 0usize;
    let direct = |ring: &[Option<f64>], i: i64| -> (f64, f64, usize) {
        let mut acc = CompensatedSum::new();
        let mut log = 0.0;
        let mut alive = true;
        let mut zeros = 0;
        let filled = n.min((i - 1).max(0) as u64) as i64;
        for m in 1..=filled {
            match ring[((i - m) as u64 % n) as usize] {
                Some(l) => log += l,
                None => {
                    alive = false;
                    zeros += 1;
                }
            }
            if alive {
                acc.add(log.exp());
            }
        }
        (acc.value(), log, zeros)
    };
    let mut s = 0.0f64;
    let mut best = (0.0f64, 1i64);
    for i in 1..=index_max {
        if i > 1 {
            let prev = i - 1;
            let w = spec.magnitude(prev)?;
            let lw = (w != 0.0).then(|| p * w.ln());
            let slot = (prev as u64 % n) as usize;
            let full = prev > n as i64;
            let dropped = if full && zeros_in_window == 0 { window_log.exp() } else { 0.0 };
            if full {
                match ring[slot] {
                    Some(l) => window_log -= l,
                    None => zeros_in_window -= 1,
                }
            }
            ring[slot] = lw;
            match lw {
                Some(l) => window_log += l,
                None => zeros_in_window += 1,
            }
            if (i as u64) % n == 0 {
                let (sum, log, zeros) = direct(&ring, i);
                s = sum;
                window_log = log;
                zeros_in_window = zeros;
            } else {
                s = match lw {
                    Some(l) => l.exp() * (1.0 + s - dropped),
                    None => 0.0,
                };
            }
        }
        if s > best.0 {
            best = (s, i);
        }
    }
    Ok((best.0 / n as f64, best.1))
}

/// Per-index `ℓ^p` Cesàro statistic against the global sup-norm statistic.
pub fn formula_gap_report(spec: &WeightSpec, p: f64, config: &GapConfig) -> Result<FormulaGapReport> {
    if spec.domain != Domain::Unilateral {
        return Err(Error::DomainMismatch("formula gap report needs a unilateral spec".into()));
    }
    let mut c0 = Vec::with_capacity(config.c0_n_max as usize);
    let mut acc = CompensatedSum::new();
    let mut c0_exact = true;
    for n in 1..=config.c0_n_max {
        let s = match spec.sup_window_product(n, Scan::Exact) {
            Ok(s) => s,
            Err(Error::ExactUnavailable) => {
                c0_exact = false;
                spec.sup_window_product(
                    n,
                    Scan::Range {
                        lo: 1,
                        hi: config.c0_index_max,
                    },
                )?
            }
            Err(e) => return Err(e),
        };
        acc.add(s.value.to_f64().powf(p));
        c0.push(acc.value() / n as f64);
    }
    let (c0_sup_at, c0_sup) = c0
        .iter()
        .enumerate()
        .fold((0u64, f64::NEG_INFINITY), |b, (k, v)| if *v > b.1 { (k as u64 + 1, *v) } else { b });
    let lp: Vec<LpGapPoint> = config
        .lp_checkpoints
        .par_iter()
        .map(|cp| {
            let (value, witness) = lp_side(spec, p, cp.n, cp.index_max)?;
            Ok(LpGapPoint {
                n: cp.n,
                index_max: cp.index_max,
                value,
                witness,
            })
        })
        .collect::<Result<_>>()?;
    let lp_sup = lp.iter().map(|x| x.value).fold(f64::NEG_INFINITY, f64::max);
    Ok(FormulaGapReport {
        p,
        c0,
        c0_sup,
        c0_sup_at,
        c0_exact,
        gap: c0_sup - lp_sup,
        lp,
        lp_sup,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::numeric::{harmonic, rel_diff};
    use crate::system::{build_shift_system, ExplicitAtom};
    use crate::weight::root_block_start;
    use proptest::prelude::*;

    fn shift(spec: WeightSpec, space: SpaceKind) -> AtomicSystem {
        build_shift_system(spec, space, None).unwrap()
    }

    fn lp(p: f64) -> SpaceKind {
        SpaceKind::Lp { p }
    }

    #[test]
    fn iterate_norm_examples() {
        let c2 = shift(WeightSpec::constant(Domain::Unilateral, 2.0), lp(1.0));
        let v = iterate_norm(&c2, 5).unwrap();
        assert!(v.exact && rel_diff(v.value.to_f64(), 32.0) < 1e-14);
        let rp = shift(WeightSpec::ratio_power(3.0).unwrap(), lp(2.0));
        let v = iterate_norm(&rp, 7).unwrap();
        assert!(rel_diff(v.value.to_f64(), 2.0) < 1e-14 && v.witness == Some(1));
        let half = shift(WeightSpec::constant(Domain::Bilateral, 0.5), lp(1.0));
        assert!(rel_diff(iterate_norm(&half, 3).unwrap().value.to_f64(), 0.125) < 1e-14);
    }

    #[test]
    fn norm_series_examples() {
        let one = shift(WeightSpec::constant(Domain::Unilateral, 1.0), lp(2.0));
        let s = norm_series(&one, 10).unwrap();
        assert!(s.exact && s.values.iter().all(|v| *v == ExtReal::Finite(1.0)));
        let rp = shift(WeightSpec::ratio_power(2.0).unwrap(), lp(2.0));
        let s = norm_series(&rp, 4).unwrap();
        for (k, v) in s.values.iter().enumerate() {
            assert!(rel_diff(v.to_f64(), ((k + 2) as f64).sqrt()) < 1e-14);
        }
        let per = shift(
            WeightSpec::unilateral(Generator::Periodic { block: vec![2.0, 0.5] }).unwrap(),
            SpaceKind::SupNorm,
        );
        let s = norm_series(&per, 2).unwrap();
        assert!(rel_diff(s.values[0].to_f64(), 2.0) < 1e-15 && rel_diff(s.values[1].to_f64(), 1.0) < 1e-15);
    }

    #[test]
    fn table_norms_are_exhaustive() {
        let t = WeightSpec::table(Domain::Unilateral, vec![0.5, 3.0, 3.0, 0.2], 1, Frontier::Zero).unwrap();
        let s = shift(t, lp(1.0));
        let v = iterate_norm(&s, 2).unwrap();
        assert!(v.exact && rel_diff(v.value.to_f64(), 9.0) < 1e-14 && v.witness == Some(2));
        let h = WeightSpec::table(Domain::Unilateral, vec![0.5, 1.5], 1, Frontier::Hold).unwrap();
        let v = iterate_norm(&shift(h, lp(1.0)), 6).unwrap();
        assert!(v.exact && rel_diff(v.value.to_f64(), 1.5f64.powi(6)) < 1e-14);
    }

    #[test]
    fn explicit_norms_follow_cycles() {
        let atoms = vec![
            ExplicitAtom { id: 1, image: 2, mass: 1.0, weight: 2.0 },
            ExplicitAtom { id: 2, image: 1, mass: 1.0, weight: 0.25 },
        ];
        let s = AtomicSystem::new(Structure::ExplicitFinite { atoms }, lp(1.0)).unwrap();
        let ns = norm_series(&s, 4).unwrap();
        assert!(rel_diff(ns.values[0].to_f64(), 2.0) < 1e-14);
        assert!(rel_diff(ns.values[1].to_f64(), 0.5) < 1e-14);
        assert!(rel_diff(ns.values[2].to_f64(), 1.0) < 1e-14);
        let sup = s.with_space(SpaceKind::SupNorm).unwrap();
        assert!(rel_diff(iterate_norm(&sup, 3).unwrap().value.to_f64(), 1.0) < 1e-14);
    }

    #[test]
    fn np_cesaro_examples() {
        let one = shift(WeightSpec::constant(Domain::Unilateral, 1.0), lp(3.0));
        let opts = CesaroOptions { horizon: 50, index_lo: 1, index_hi: 200, exponent: None };
        let r = np_cesaro(&one, &opts).unwrap();
        assert_eq!(r.value, ExtReal::Finite(1.0));
        assert!((r.scanned_max - 1.0).abs() < 1e-12);
        let rp = shift(WeightSpec::ratio_power(2.0).unwrap(), lp(1.0));
        let r = np_cesaro(&rp, &CesaroOptions { horizon: 200, index_lo: 1, index_hi: 2000, exponent: None }).unwrap();
        assert_eq!(r.closed_form, Some(ClosedForm::Bounded { bound: 4.0 }));
        assert!(r.scanned_max <= 4.0);
        let c = np_cesaro_with_curves(&rp, &CesaroOptions { horizon: 5, index_lo: 1, index_hi: 3, exponent: None }, &[1])
            .unwrap();
        assert!(c.per_index_curves.unwrap()[0].values.iter().all(|v| *v == 0.0));
    }

    #[test]
    fn harmonic_witness_for_equal_exponents() {
        let rp = shift(WeightSpec::ratio_power(2.0).unwrap(), lp(2.0));
        let i = 500i64;
        let a = atom_ratio_series(&rp, i, (i - 1) as u64).unwrap();
        let s: f64 = a.iter().map(|v| v * v).sum::<f64>() / (i - 1) as f64;
        let expected = i as f64 / (i - 1) as f64 * harmonic((i - 1) as u64);
        assert!(rel_diff(s, expected) < 1e-12);
        let r = np_cesaro(&rp, &CesaroOptions { horizon: 100, index_lo: 1, index_hi: 200, exponent: None }).unwrap();
        assert_eq!(r.value, ExtReal::PosInf);
    }

    #[test]
    fn cesaro_mean_examples() {
        let one = shift(WeightSpec::constant(Domain::Unilateral, 1.0), lp(1.0));
        let m = cesaro_mean_series(&one, &SparseVector::basis(2), 20).unwrap();
        for n in 1..=20usize {
            let expected = SparseVector::from_pairs([(1, 1.0), (2, 1.0)]).scaled(1.0 / (n as f64 + 1.0));
            for x in [1, 2] {
                assert!((m.means[n].get(x) - expected.get(x)).abs() < 1e-15);
            }
        }
        assert_eq!(m.trend, Trend::Contracting);
        let zero = shift(WeightSpec::constant(Domain::Unilateral, 0.0), lp(1.0));
        let m = cesaro_mean_series(&zero, &SparseVector::basis(4), 5).unwrap();
        assert!((m.means[5].get(4) - 1.0 / 6.0).abs() < 1e-15);
        let two = shift(WeightSpec::constant(Domain::Unilateral, 2.0), lp(1.0));
        let y = SparseVector::basis(40);
        let m = cesaro_mean_series(&two, &y, 30).unwrap();
        assert_eq!(m.trend, Trend::Expanding);
        let mut direct = SparseVector::new();
        let mut v = y.clone();
        for _ in 0..=30 {
            direct = direct.axpy(1.0, &v);
            v = apply_operator(&two, &v).unwrap();
        }
        let direct = direct.scaled(1.0 / 31.0);
        assert!(rel_diff(m.mean_norms[30], direct.norm(&two).unwrap()) < 1e-12);
    }

    #[test]
    fn formula_gap_constant_weights() {
        let cfg = GapConfig {
            c0_n_max: 10,
            c0_index_max: 100,
            lp_checkpoints: (1..=10).map(|n| GapCheckpoint { n, index_max: 60 }).collect(),
        };
        let one = formula_gap_report(&WeightSpec::constant(Domain::Unilateral, 1.0), 1.0, &cfg).unwrap();
        assert!((one.c0_sup - 1.0).abs() < 1e-12 && (one.lp_sup - 1.0).abs() < 1e-12);
        let two = formula_gap_report(&WeightSpec::constant(Domain::Unilateral, 2.0), 1.0, &cfg).unwrap();
        let expected = (1..=10).map(|n| 2f64.powi(n)).sum::<f64>() / 10.0;
        assert_eq!(two.c0_sup_at, 10);
        assert!(rel_diff(two.c0_sup, expected) < 1e-12 && rel_diff(two.lp_sup, expected) < 1e-12);
    }

    #[test]
    fn lp_streaming_matches_direct() {
        let spec = WeightSpec::unilateral(Generator::RootBlocks).unwrap();
        let rb = shift(spec.clone(), lp(1.0));
        for n in [3u64, 7, 12] {
            let hi = root_block_start(n as i64 + 2);
            let (v, _) = lp_side(&spec, 1.0, n, hi).unwrap();
            let mut best = 0.0f64;
            for i in 1..=hi {
                let a = atom_ratio_series(&rb, i, n).unwrap();
                best = best.max(a.iter().sum::<f64>() / n as f64);
            }
            assert!(rel_diff(v, best) < 1e-12, "n={n}");
        }
        let vals = vec![2.0, 0.5, 0.0, 3.0, 1.5, 0.0, 0.0, 2.5, 1.2, 0.8, 2.0, 1.1];
        let t = WeightSpec::table(Domain::Unilateral, vals, 1, Frontier::Hold).unwrap();
        let ts = shift(t.clone(), lp(2.0));
        for n in [1u64, 2, 3, 5] {
            let (v, _) = lp_side(&t, 2.0, n, 30).unwrap();
            let mut best = 0.0f64;
            for i in 1..=30 {
                let a = atom_ratio_series(&ts, i, n).unwrap();
                best = best.max(a.iter().map(|x| x * x).sum::<f64>() / n as f64);
            }
            assert!(rel_diff(v, best) < 1e-12, "table n={n}");
        }
    }

    proptest! {
        #[test]
        fn submultiplicative(vals in prop::collection::vec(0.1f64..3.0, 30), n in 1u64..8, m in 1u64..8, p in 1.0f64..3.0) {
            let t = WeightSpec::table(Domain::Unilateral, vals, 1, Frontier::Zero).unwrap();
            let s = shift(t, lp(p));
            let a = iterate_norm(&s, n + m).unwrap().value.to_f64();
            let b = iterate_norm(&s, n).unwrap().value.to_f64() * iterate_norm(&s, m).unwrap().value.to_f64();
            prop_assert!(a <= b * (1.0 + 1e-9));
        }

        #[test]
        fn power_bounded_implies_finite_cesaro(vals in prop::collection::vec(0.1f64..1.0, 30), p in 1.0f64..3.0) {
            let t = WeightSpec::table(Domain::Unilateral, vals, 1, Frontier::Hold).unwrap();
            let s = shift(t, lp(p));
            let series = norm_series(&s, 20).unwrap();
            let c = series.values.iter().map(|v| v.to_f64()).fold(0.0, f64::max);
            let r = np_cesaro(&s, &CesaroOptions { horizon: 20, index_lo: 1, index_hi: 60, exponent: None }).unwrap();
            prop_assert!(r.scanned_max <= c.powf(p) * (1.0 + 1e-12));
        }

        #[test]
        fn jensen_on_tables(vals in prop::collection::vec(0.1f64..3.0, 40)) {
            let t = WeightSpec::table(Domain::Unilateral, vals, 1, Frontier::Zero).unwrap();
            let s = shift(t, lp(2.0));
            let atoms: Vec<i64> = (1..=45).collect();
            let r = jensen_check(&s, 1.0, 2.0, 30, &atoms).unwrap();
            prop_assert!(r.max_excess <= 1e-12);
        }
    }
}
