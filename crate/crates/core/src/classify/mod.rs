//! Verdicts for boundedness and chaos properties.
//!
//! A verdict separates how strongly a conclusion is backed (`status`) from the
//! conclusion itself (`holds`). Closed forms give `ExactByClosedForm`, finite
//! checks of a characterization's hypotheses with declared tail bounds give
//! `CertifiedByTheorem`, and everything else is finite-horizon evidence.

mod distributional;

pub use distributional::{
    bayart_certificate, classify_dissipative_ddc, dc_certificate_check, dc_density_criterion, dcsum_test,
    DcCertificate, DcCheckReport, DcStage, DcSumReport, DdcReport, DensityCriterionReport, StageCheck,
    VanishingCheck,
};

use crate::error::{Error, Result};
use crate::norms::{
    atom_ratio_series, norm_series_with, np_cesaro, CesaroBoundReport, CesaroOptions, ClosedForm, ScanOptions,
};
use crate::numeric::{CompensatedSum, ExtReal};
use crate::system::{AtomicSystem, SpaceKind, Structure};
use crate::weight::{Domain, Frontier, Generator, WeightSpec};
use serde::{Deserialize, Serialize};
use std::collections::BTreeSet;

/// Finite statistics at or below this count as vanishing.
pub const VANISH_TOL: f64 = 1e-9;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "name", rename_all = "snake_case")]
pub enum Property {
    PowerBounded,
    LiYorke,
    DistributionalChaos,
    DenselyDistributionalChaos,
    AbsolutelyCesaroBounded { p: f64 },
    MeanLiYorke,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Status {
    ExactByClosedForm,
    CertifiedByTheorem,
    SupportedAtHorizon,
    RefutedAtHorizon,
    Inconclusive,
}

impl Status {
    fn rank(self) -> u8 {
        match self {
            Status::ExactByClosedForm => 4,
            Status::CertifiedByTheorem => 3,
            Status::SupportedAtHorizon | Status::RefutedAtHorizon => 2,
            Status::Inconclusive => 0,
        }
    }

    /// Closed form or certificate.
    pub fn is_conclusive(self) -> bool {
        self.rank() >= 3
    }

    fn weaker(self, other: Status) -> Status {
        if other.rank() < self.rank() {
            other
        } else {
            self
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Witness {
    pub label: String,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub index: Option<i64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub n: Option<u64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub value: Option<f64>,
}

impl Witness {
    fn new(label: &str) -> Self {
        Self {
            label: label.to_string(),
            index: None,
            n: None,
            value: None,
        }
    }

    fn at_n(mut self, n: u64) -> Self {
        self.n = Some(n);
        self
    }

    fn at_index(mut self, i: i64) -> Self {
        self.index = Some(i);
        self
    }

    fn with_value(mut self, v: f64) -> Self {
        self.value = Some(v);
        self
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CycleProduct {
    /// Smallest atom on the cycle.
    pub atom: i64,
    pub period: u64,
    pub log_product: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Certificate {
    ClosedForm {
        rule: String,
    },
    CycleProducts {
        cycles: Vec<CycleProduct>,
    },
    NormScan {
        horizon: u64,
        observed_sup: f64,
        bound: Option<f64>,
        exact: bool,
    },
    BackwardProducts {
        horizon: u64,
        running_min_tail: f64,
        exact_limit: Option<ExtReal>,
        cesaro_min_tail: Option<f64>,
    },
    Cesaro(Box<CesaroBoundReport>),
    Distributional(Box<DcCheckReport>),
    DensityCriterion(Box<DensityCriterionReport>),
    DcSum(Box<DcSumReport>),
    Dissipative(Box<DdcReport>),
    FamilyConditions(Box<FamilyConditionsReport>),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Verdict {
    pub property: Property,
    pub status: Status,
    /// Whether the property holds; `None` when undecided.
    pub holds: Option<bool>,
    pub horizon: u64,
    pub witnesses: Vec<Witness>,
    pub certificate: Option<Certificate>,
    pub theorem_tag: String,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub notes: Vec<String>,
    /// Verdicts this one was derived from.
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub supporting: Vec<Verdict>,
}

impl Verdict {
    fn new(property: Property, status: Status, holds: Option<bool>, horizon: u64, tag: &str) -> Self {
        Self {
            property,
            status,
            holds,
            horizon,
            witnesses: Vec::new(),
            certificate: None,
            theorem_tag: tag.to_string(),
            notes: Vec::new(),
            supporting: Vec::new(),
        }
    }

    fn inconclusive(property: Property, horizon: u64, tag: &str, note: impl Into<String>) -> Self {
        let mut v = Self::new(property, Status::Inconclusive, None, horizon, tag);
        v.notes.push(note.into());
        v
    }
}

/// Whether the window products of a generator stay bounded, when decidable
/// from its closed form.
pub(crate) fn generator_bounded(g: &Generator, domain: Domain) -> Option<bool> {
    match g {
        Generator::Constant { value } => Some(value.abs() <= 1.0),
        Generator::Geometric { r } => Some(r.abs() <= 1.0),
        Generator::RatioPower { .. } => Some(false),
        Generator::RootBlocks => Some(true),
        Generator::Periodic { block } => {
            let log_p: f64 = block
                .iter()
                .map(|v| if *v == 0.0 { f64::NEG_INFINITY } else { v.abs().ln() })
                .sum();
            Some(log_p <= 1e-12)
        }
        Generator::PiecewiseBilateral { negative, positive } => {
            match (generator_bounded(negative, domain), generator_bounded(positive, domain)) {
                (Some(a), Some(b)) => Some(a && b),
                (Some(false), _) | (_, Some(false)) => Some(false),
                _ => None,
            }
        }
        Generator::Table { values, frontier, .. } | Generator::StepFunction { values, frontier, .. } => {
            match frontier {
                Frontier::Zero => Some(true),
                Frontier::Hold => {
                    let last = values.last()?.abs() <= 1.0;
                    let first = values.first()?.abs() <= 1.0;
                    Some(if domain == Domain::Bilateral { first && last } else { last })
                }
                Frontier::Error => None,
            }
        }
    }
}

/// Whether the products grow exponentially somewhere, forcing every Cesàro
/// average of their powers to diverge.
fn generator_grows_exponentially(g: &Generator) -> bool {
    match g {
        Generator::Constant { value } => value.abs() > 1.0,
        Generator::Geometric { r } => r.abs() > 1.0,
        Generator::Periodic { block } => {
            block.iter().all(|v| *v != 0.0) && block.iter().map(|v| v.abs().ln()).sum::<f64>() > 1e-12
        }
        Generator::PiecewiseBilateral { negative, positive } => {
            generator_grows_exponentially(negative) || generator_grows_exponentially(positive)
        }
        _ => false,
    }
}

fn zero_weight_index(spec: &WeightSpec) -> Option<i64> {
    fn in_generator(g: &Generator, side_anchor: i64) -> Option<i64> {
        match g {
            Generator::Constant { value } if *value == 0.0 => Some(side_anchor),
            Generator::Geometric { r } if *r == 0.0 => Some(side_anchor),
            Generator::Periodic { block } => block.iter().position(|v| *v == 0.0).map(|k| k as i64 + 1),
            Generator::PiecewiseBilateral { negative, positive } => {
                in_generator(negative, 0).or_else(|| in_generator(positive, 1))
            }
            Generator::Table {
                values, origin, frontier,
            } => values
                .iter()
                .position(|v| *v == 0.0)
                .map(|k| origin + k as i64)
                .or(if *frontier == Frontier::Zero { Some(origin - 1) } else { None }),
            Generator::StepFunction { values, frontier, .. } => {
                if values.contains(&0.0) || *frontier == Frontier::Zero {
                    Some(0)
                } else {
                    None
                }
            }
            _ => None,
        }
    }
    in_generator(&spec.generator, 0)
}

/// Cycles of an explicit finite system with their weight products.
pub fn cycle_products(system: &AtomicSystem) -> Result<Vec<CycleProduct>> {
    let atoms = system.scan_atoms(0);
    let mut seen_cycles = BTreeSet::new();
    let mut out = Vec::new();
    for &start in &atoms {
        let mut x = start;
        for _ in 0..atoms.len() {
            x = system.image(x)?;
        }
        let mut cycle = vec![x];
        let mut y = system.image(x)?;
        while y != x {
            cycle.push(y);
            y = system.image(y)?;
        }
        let head = *cycle.iter().min().expect("nonempty");
        if !seen_cycles.insert(head) {
            continue;
        }
        let mut acc = CompensatedSum::new();
        let mut log = 0.0f64;
        for &z in &cycle {
            let w = system.weight_at(z)?;
            if w == 0.0 {
                log = f64::NEG_INFINITY;
            } else {
                acc.add(w.abs().ln());
            }
        }
        if log == 0.0 {
            log = acc.value();
        }
        out.push(CycleProduct {
            atom: head,
            period: cycle.len() as u64,
            log_product: log,
        });
    }
    out.sort_by_key(|c| c.atom);
    Ok(out)
}

/// `μ_n(f^{-n}(B))` (Lp) or `‖w^{(n)}‖` on `f^{-n}(B)` (sup norm) for `n = 1..=h`.
pub(crate) fn set_profile(system: &AtomicSystem, b: &[i64], h: u64) -> Result<Vec<f64>> {
    match system.space() {
        SpaceKind::Lp { p } => {
            let mut out = vec![0.0f64; h as usize];
            for &x in b {
                let m = system.mass_at(x)?;
                for (k, a) in atom_ratio_series(system, x, h)?.iter().enumerate() {
                    out[k] += m * a.powf(p);
                }
            }
            Ok(out)
        }
        SpaceKind::SupNorm => {
            if system.is_plain_shift() {
                let mut out = vec![0.0f64; h as usize];
                for &x in b {
                    for (k, a) in atom_ratio_series(system, x, h)?.iter().enumerate() {
                        out[k] = out[k].max(*a);
                    }
                }
                return Ok(out);
            }
            let mut frontier: Vec<(i64, f64)> = b.iter().map(|&x| (x, 0.0)).collect();
            let mut out = Vec::with_capacity(h as usize);
            for _ in 0..h {
                let mut next = Vec::new();
                for (z, l) in &frontier {
                    for y in system.preimages(*z) {
                        let w = system.weight_at(y)?;
                        let lw = if w == 0.0 { f64::NEG_INFINITY } else { w.abs().ln() };
                        next.push((y, l + lw));
                    }
                }
                frontier = next;
                out.push(frontier.iter().map(|(_, l)| l.exp()).fold(0.0, f64::max));
            }
            Ok(out)
        }
    }
}

fn tail_min(xs: &[f64]) -> f64 {
    let start = xs.len() / 2;
    xs[start..].iter().copied().fold(f64::INFINITY, f64::min)
}

fn running_means(xs: &[f64]) -> Vec<f64> {
    let mut acc = CompensatedSum::new();
    xs.iter()
        .enumerate()
        .map(|(k, v)| {
            acc.add(*v);
            acc.value() / (k + 1) as f64
        })
        .collect()
}

/// Power-boundedness from closed forms, cycle products or the norm series.
///
/// With a user bound `C`, the first `n ≤ horizon` with `‖T^n‖ > C` refutes it.
pub fn classify_power_bounded(system: &AtomicSystem, horizon: u64, bound: Option<f64>) -> Result<Verdict> {
    classify_power_bounded_with(system, horizon, bound, &ScanOptions::default())
}

pub fn classify_power_bounded_with(
    system: &AtomicSystem,
    horizon: u64,
    bound: Option<f64>,
    scan: &ScanOptions,
) -> Result<Verdict> {
    let horizon = horizon.max(1);
    let tag = "power-bounded-iff-bounded-window-products";
    let closed = match system.structure() {
        Structure::Shift { spec, stride, .. }
            if *stride == 1
                || matches!(spec.generator, Generator::Table { .. } | Generator::StepFunction { .. }) =>
        {
            generator_bounded(&spec.generator, spec.domain).map(|b| (b, None))
        }
        Structure::ExplicitFinite { .. } => {
            let cycles = cycle_products(system)?;
            Some((cycles.iter().all(|c| c.log_product <= 1e-12), Some(cycles)))
        }
        // The tail chain alone carries the tail window products.
        Structure::ExplicitWithTail { tail, .. } => match generator_bounded(&tail.generator, tail.domain) {
            Some(false) => Some((false, None)),
            _ => None,
        },
        _ => None,
    };
    let need_series = bound.is_some() || closed.is_none();
    let series = if need_series {
        Some(norm_series_with(system, horizon, scan)?)
    } else {
        None
    };
    if let (Some(c), Some(s)) = (bound, &series) {
        if let Some(k) = s.values.iter().position(|v| v.to_f64() > c) {
            let mut v = Verdict::new(Property::PowerBounded, Status::RefutedAtHorizon, Some(false), horizon, tag);
            v.witnesses.push(
                Witness::new("iterate norm exceeds bound")
                    .at_n(k as u64 + 1)
                    .with_value(s.values[k].to_f64()),
            );
            if let Some(w) = s.witnesses[k] {
                v.witnesses[0].index = Some(w);
            }
            v.certificate = Some(Certificate::NormScan {
                horizon,
                observed_sup: s.values[..=k].iter().map(|x| x.to_f64()).fold(0.0, f64::max),
                bound,
                exact: s.exact,
            });
            return Ok(v);
        }
    }
    if let Some((bounded, cycles)) = closed {
        let mut v = Verdict::new(
            Property::PowerBounded,
            Status::ExactByClosedForm,
            Some(bounded),
            horizon,
            tag,
        );
        v.certificate = Some(match cycles {
            Some(cycles) => Certificate::CycleProducts { cycles },
            None => Certificate::ClosedForm {
                rule: if bounded {
                    "window products bounded".into()
                } else {
                    "window products unbounded".into()
                },
            },
        });
        if !bounded {
            let nv = crate::norms::iterate_norm_with(system, horizon, scan)?;
            v.witnesses.push(
                Witness::new("iterate norm at horizon")
                    .at_n(horizon)
                    .with_value(nv.value.to_f64()),
            );
        }
        return Ok(v);
    }
    let s = series.expect("series computed");
    let observed = s.values.iter().map(|x| x.to_f64()).fold(0.0, f64::max);
    let half = s.values.len().div_ceil(2);
    let early = s.values[..half].iter().map(|x| x.to_f64()).fold(0.0, f64::max);
    let rising = s.values.len() > 1 && observed > early * (1.0 + 1e-9);
    let mut v = if s.divergent {
        Verdict::inconclusive(
            Property::PowerBounded,
            horizon,
            tag,
            "iterate norms peak at the edge of the scanned index range",
        )
    } else if rising {
        Verdict::inconclusive(Property::PowerBounded, horizon, tag, "iterate norms still rising at the horizon")
    } else {
        Verdict::new(Property::PowerBounded, Status::SupportedAtHorizon, Some(true), horizon, tag)
    };
    v.certificate = Some(Certificate::NormScan {
        horizon,
        observed_sup: observed,
        bound,
        exact: s.exact,
    });
    Ok(v)
}

fn require_shift(system: &AtomicSystem) -> Result<&WeightSpec> {
    match system.structure() {
        Structure::Shift { spec, stride: 1, .. } => Ok(spec),
        _ => Err(Error::DomainMismatch("needs a shift-structured system with unit stride".into())),
    }
}

fn check_nonzero_bilateral(spec: &WeightSpec) -> Result<()> {
    if spec.domain == Domain::Bilateral {
        if let Some(index) = zero_weight_index(spec) {
            return Err(Error::ZeroWeightBilateral { index });
        }
    }
    Ok(())
}

/// Li-Yorke chaos of a weighted shift: unilateral shifts are Li-Yorke exactly
/// when not power-bounded; bilateral ones also need
/// `liminf_n |w_{-n} ⋯ w_{-1}| = 0`.
pub fn classify_li_yorke(system: &AtomicSystem, horizon: u64) -> Result<Verdict> {
    let spec = require_shift(system)?;
    check_nonzero_bilateral(spec)?;
    let horizon = horizon.max(1);
    let pb = classify_power_bounded(system, horizon, None)?;
    let mut v = match spec.domain {
        Domain::Unilateral => Verdict::new(
            Property::LiYorke,
            pb.status,
            pb.holds.map(|b| !b),
            horizon,
            "li-yorke-unilateral-iff-not-power-bounded",
        ),
        Domain::Bilateral => {
            let tag = "li-yorke-bilateral-iff-unbounded-and-backward-liminf-zero";
            let lim = spec.liminf_backward_products(horizon)?;
            let mut v = match pb.holds {
                Some(true) => Verdict::new(Property::LiYorke, pb.status, Some(false), horizon, tag),
                None => Verdict::inconclusive(Property::LiYorke, horizon, tag, "power-boundedness undecided"),
                Some(false) => match lim.exact_limit {
                    Some(l) => Verdict::new(
                        Property::LiYorke,
                        pb.status.weaker(Status::ExactByClosedForm),
                        Some(l == ExtReal::Finite(0.0)),
                        horizon,
                        tag,
                    ),
                    None if lim.running_min_tail <= VANISH_TOL => {
                        Verdict::new(Property::LiYorke, Status::SupportedAtHorizon, Some(true), horizon, tag)
                    }
                    None => Verdict::inconclusive(
                        Property::LiYorke,
                        horizon,
                        tag,
                        "backward products do not vanish within the horizon",
                    ),
                },
            };
            v.certificate = Some(Certificate::BackwardProducts {
                horizon,
                running_min_tail: lim.running_min_tail,
                exact_limit: lim.exact_limit,
                cesaro_min_tail: None,
            });
            v
        }
    };
    v.witnesses = pb.witnesses.clone();
    v.supporting.push(pb);
    Ok(v)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AcbOptions {
    pub horizon: u64,
    pub index_max: i64,
    /// Cesàro exponent; defaults to the space exponent.
    pub exponent: Option<f64>,
    /// User bound whose excess refutes the property.
    pub bound: Option<f64>,
}

impl Default for AcbOptions {
    fn default() -> Self {
        Self {
            horizon: crate::norms::DEFAULT_CESARO_N,
            index_max: crate::norms::DEFAULT_INDEX_MAX,
            exponent: None,
            bound: None,
        }
    }
}

/// Absolute Cesàro boundedness through the scanned `N_p` statistic and its
/// closed forms.
pub fn classify_acb(system: &AtomicSystem, opts: &AcbOptions) -> Result<Verdict> {
    let copts = CesaroOptions {
        horizon: opts.horizon.max(1),
        index_lo: -opts.index_max,
        index_hi: opts.index_max,
        exponent: opts.exponent,
    };
    let mut report = np_cesaro(system, &copts)?;
    if report.closed_form.is_none() {
        if let Structure::Shift { spec, stride: 1, .. } = system.structure() {
            if generator_grows_exponentially(&spec.generator) {
                report.closed_form = Some(ClosedForm::Divergent);
                report.value = ExtReal::PosInf;
            } else if let Generator::PiecewiseBilateral { negative, positive } = &spec.generator {
                let small = |g: &Generator| match g {
                    Generator::Constant { value } => value.abs() <= 1.0,
                    Generator::Geometric { r } => r.abs() <= 1.0,
                    _ => false,
                };
                if small(negative) && small(positive) {
                    report.closed_form = Some(ClosedForm::Bounded { bound: 1.0 });
                }
            }
        }
    }
    let r = report.exponent;
    let property = Property::AbsolutelyCesaroBounded { p: r };
    let horizon = report.horizon_n;
    let tag = "absolute-cesaro-bound-per-atom-formula";
    let mut v = match (system.structure(), report.closed_form) {
        (Structure::ExplicitFinite { .. }, _) => {
            let cycles = cycle_products(system)?;
            let bounded = cycles.iter().all(|c| c.log_product <= 1e-12);
            let mut v = Verdict::new(property, Status::ExactByClosedForm, Some(bounded), horizon, tag);
            v.notes.push(format!("{} cycles checked", cycles.len()));
            v
        }
        (_, Some(ClosedForm::Equal { value })) => {
            let mut v = Verdict::new(property, Status::ExactByClosedForm, Some(true), horizon, tag);
            v.witnesses.push(Witness::new("cesaro constant").with_value(value));
            v
        }
        (_, Some(ClosedForm::Bounded { bound })) => {
            if report.scanned_max <= bound * (1.0 + 1e-12) {
                let mut v = Verdict::new(property, Status::CertifiedByTheorem, Some(true), horizon, tag);
                v.witnesses.push(Witness::new("certified bound").with_value(bound));
                v
            } else {
                Verdict::inconclusive(property, horizon, tag, "scanned statistic exceeds the closed-form bound")
            }
        }
        (Structure::Shift { spec, .. }, Some(ClosedForm::Divergent)) => {
            if let (Generator::RatioPower { .. }, SpaceKind::Lp { .. }) = (&spec.generator, system.space()) {
                let i = opts.index_max.max(2);
                let a = atom_ratio_series(system, i, (i - 1) as u64)?;
                let mut acc = CompensatedSum::new();
                for x in &a {
                    acc.add(x.powf(r));
                }
                let value = acc.value() / (i - 1) as f64;
                let mut v = Verdict::new(property, Status::CertifiedByTheorem, Some(false), horizon, tag);
                v.witnesses.push(
                    Witness::new("per-index cesaro average over the full orbit")
                        .at_index(i)
                        .at_n((i - 1) as u64)
                        .with_value(value),
                );
                v.notes.push("per-index averages grow like a harmonic sum".into());
                v
            } else {
                let mut v = Verdict::new(property, Status::ExactByClosedForm, Some(false), horizon, tag);
                v.witnesses.push(
                    Witness::new("scanned cesaro average")
                        .at_n(report.witness.n)
                        .with_value(report.scanned_max),
                );
                if let Some(i) = report.witness.index {
                    v.witnesses[0].index = Some(i);
                }
                v
            }
        }
        _ => {
            if let Some(c) = opts.bound.filter(|c| report.scanned_max > *c) {
                let mut v = Verdict::new(property, Status::RefutedAtHorizon, Some(false), horizon, tag);
                let mut w = Witness::new("cesaro average exceeds bound")
                    .at_n(report.witness.n)
                    .with_value(report.scanned_max);
                w.index = report.witness.index;
                v.witnesses.push(w);
                v.notes.push(format!("bound {c}"));
                v
            } else if report.divergence_flag {
                Verdict::inconclusive(property, horizon, tag, "scanned maximum sits at the scan edge")
            } else {
                Verdict::new(property, Status::SupportedAtHorizon, Some(true), horizon, tag)
            }
        }
    };
    if report.lower_bound_only && v.holds == Some(true) && v.status.is_conclusive() {
        v.status = Status::SupportedAtHorizon;
        v.notes
            .push("exponent differs from the space exponent; basis vectors give a lower bound only".into());
    }
    v.certificate = Some(Certificate::Cesaro(Box::new(report)));
    Ok(v)
}

/// Per-set statistics for the family conditions on mean Li-Yorke chaos.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FamilySetStats {
    pub set: Vec<i64>,
    /// Tail-half minimum of `(1/N) Σ μ_n(f^{-n}(B))^{1/p}`.
    pub vanishing_stat: f64,
    /// `sup_N (1/N) Σ μ_n(f^{-n}(B))/μ(B)`.
    pub necessary_sup: f64,
    /// `sup_N (1/N) Σ μ_n(f^{-n}(B))^{1/p}/μ(B)`.
    pub sufficient_sup: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FamilyConditionsReport {
    pub horizon: u64,
    pub p: f64,
    pub large: f64,
    pub sets: Vec<FamilySetStats>,
    pub vanishing_all: bool,
    pub necessary_unbounded: bool,
    pub sufficient_unbounded: bool,
    /// The necessary condition holds while the sufficient one does not.
    pub gap: bool,
}

/// Large-value threshold for finite-horizon unboundedness of family sums.
pub const FAMILY_LARGE: f64 = 1e6;

pub fn family_conditions(system: &AtomicSystem, family: &[Vec<i64>], horizon: u64) -> Result<FamilyConditionsReport> {
    if family.is_empty() || family.iter().any(|b| b.is_empty()) {
        return Err(Error::EmptyFamily);
    }
    let p = system.space().p().unwrap_or(1.0);
    let mut sets = Vec::new();
    for b in family {
        let prof = set_profile(system, b, horizon.max(2))?;
        let (roots, mass): (Vec<f64>, f64) = match system.space() {
            SpaceKind::Lp { p } => (prof.iter().map(|m| m.powf(1.0 / p)).collect(), system.mass_of(b)?),
            SpaceKind::SupNorm => (prof.clone(), 1.0),
        };
        let vanishing_stat = tail_min(&running_means(&roots));
        let necessary_sup = running_means(&prof).iter().copied().fold(0.0, f64::max) / mass;
        let sufficient_sup = running_means(&roots).iter().copied().fold(0.0, f64::max) / mass;
        sets.push(FamilySetStats {
            set: b.clone(),
            vanishing_stat,
            necessary_sup,
            sufficient_sup,
        });
    }
    let vanishing_all = sets.iter().all(|s| s.vanishing_stat <= VANISH_TOL);
    let necessary_unbounded = sets.iter().any(|s| s.necessary_sup > FAMILY_LARGE);
    let sufficient_unbounded = sets.iter().any(|s| s.sufficient_sup > FAMILY_LARGE);
    Ok(FamilyConditionsReport {
        horizon,
        p,
        large: FAMILY_LARGE,
        sets,
        vanishing_all,
        necessary_unbounded,
        sufficient_unbounded,
        gap: necessary_unbounded && !sufficient_unbounded,
    })
}

/// Mean Li-Yorke chaos.
///
/// Bilateral shifts: not ACB and `liminf_N (1/N) Σ |w_{-n} ⋯ w_{-1}| = 0`.
/// Unilateral shifts: not ACB. Other systems: the family conditions on a
/// user family, reported without claiming the equivalence.
pub fn classify_mean_li_yorke(
    system: &AtomicSystem,
    opts: &AcbOptions,
    family: Option<&[Vec<i64>]>,
) -> Result<Verdict> {
    let horizon = opts.horizon.max(2);
    if let Structure::Shift { spec, stride: 1, .. } = system.structure() {
        check_nonzero_bilateral(spec)?;
        let acb = classify_acb(system, opts)?;
        if spec.domain == Domain::Unilateral {
            let status = if acb.status.is_conclusive() {
                Status::CertifiedByTheorem
            } else {
                acb.status
            };
            let mut v = Verdict::new(
                Property::MeanLiYorke,
                status,
                acb.holds.map(|b| !b),
                horizon,
                "mean-li-yorke-unilateral-iff-not-acb",
            );
            if status == Status::RefutedAtHorizon {
                v.status = Status::SupportedAtHorizon;
            }
            v.supporting.push(acb);
            return Ok(v);
        }
        let tag = "mean-li-yorke-bilateral-iff-not-acb-and-backward-cesaro-liminf-zero";
        let lim = spec.liminf_backward_products(horizon)?;
        let mut log = 0.0f64;
        let mut products = Vec::with_capacity(horizon as usize);
        for n in 1..=horizon {
            log += spec.magnitude(-(n as i64))?.ln();
            products.push(log.exp());
        }
        let cesaro_min_tail = tail_min(&running_means(&products));
        let exact_zero = lim.exact_limit.map(|l| l == ExtReal::Finite(0.0));
        let mut v = match (exact_zero, acb.holds, acb.status.is_conclusive()) {
            (Some(false), _, _) => {
                Verdict::new(Property::MeanLiYorke, Status::CertifiedByTheorem, Some(false), horizon, tag)
            }
            (_, Some(true), true) => {
                Verdict::new(Property::MeanLiYorke, Status::CertifiedByTheorem, Some(false), horizon, tag)
            }
            (Some(true), Some(false), true) => {
                Verdict::new(Property::MeanLiYorke, Status::CertifiedByTheorem, Some(true), horizon, tag)
            }
            (_, Some(false), _) if cesaro_min_tail <= VANISH_TOL => {
                Verdict::new(Property::MeanLiYorke, Status::SupportedAtHorizon, Some(true), horizon, tag)
            }
            _ => Verdict::inconclusive(Property::MeanLiYorke, horizon, tag, "finite evidence is mixed"),
        };
        v.certificate = Some(Certificate::BackwardProducts {
            horizon,
            running_min_tail: lim.running_min_tail,
            exact_limit: lim.exact_limit,
            cesaro_min_tail: Some(cesaro_min_tail),
        });
        v.supporting.push(acb);
        return Ok(v);
    }
    let tag = "mean-li-yorke-family-conditions";
    let Some(family) = family else {
        return Ok(Verdict::inconclusive(
            Property::MeanLiYorke,
            horizon,
            tag,
            "general systems need a user family of finite atom sets",
        ));
    };
    let report = family_conditions(system, family, horizon)?;
    let mut v = if report.vanishing_all && report.sufficient_unbounded {
        Verdict::new(Property::MeanLiYorke, Status::SupportedAtHorizon, Some(true), horizon, tag)
    } else {
        let mut v = Verdict::inconclusive(Property::MeanLiYorke, horizon, tag, "family conditions not met at horizon");
        if report.gap && report.p > 1.0 {
            v.notes.push(
                "necessary condition met but sufficient condition not; they differ for p > 1".into(),
            );
        }
        v
    };
    v.certificate = Some(Certificate::FamilyConditions(Box::new(report)));
    Ok(v)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case")]
pub enum SubspaceMode {
    Power,
    Cesaro { p: f64 },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SubspaceSetCheck {
    pub set: Vec<i64>,
    pub membership_stat: f64,
    pub qualifies: bool,
    /// Largest orbit statistic of the normalized indicator within the horizon.
    pub restricted_sup: f64,
    pub witness_n: u64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SubspaceReport {
    pub mode: SubspaceMode,
    pub horizon: u64,
    pub sets: Vec<SubspaceSetCheck>,
    /// Maximum over qualifying sets.
    pub restricted_sup: f64,
    pub exceeds_bound: Option<bool>,
}

/// Boundedness of the orbit restricted to normalized indicators of a finite
/// family, after filtering the sets by the vanishing membership statistic.
pub fn subspace_boundedness_check(
    system: &AtomicSystem,
    family: &[Vec<i64>],
    mode: SubspaceMode,
    horizon: u64,
    bound: Option<f64>,
) -> Result<SubspaceReport> {
    if family.is_empty() || family.iter().any(|b| b.is_empty()) {
        return Err(Error::EmptyFamily);
    }
    let h = horizon.max(2);
    let mut sets = Vec::new();
    for b in family {
        let prof = set_profile(system, b, h)?;
        let (norms, member_series): (Vec<f64>, Vec<f64>) = match system.space() {
            SpaceKind::Lp { p } => {
                let m = system.mass_of(b)?;
                let norms = prof.iter().map(|x| (x / m).powf(1.0 / p)).collect();
                let series = match mode {
                    SubspaceMode::Power => prof.clone(),
                    SubspaceMode::Cesaro { .. } => running_means(&prof.iter().map(|x| x.powf(1.0 / p)).collect::<Vec<_>>()),
                };
                (norms, series)
            }
            SpaceKind::SupNorm => {
                let series = match mode {
                    SubspaceMode::Power => prof.clone(),
                    SubspaceMode::Cesaro { .. } => running_means(&prof),
                };
                (prof.clone(), series)
            }
        };
        let membership_stat = tail_min(&member_series);
        let stat: Vec<f64> = match mode {
            SubspaceMode::Power => norms,
            SubspaceMode::Cesaro { p } => running_means(&norms.iter().map(|x| x.powf(p)).collect::<Vec<_>>()),
        };
        let (k, restricted_sup) = stat
            .iter()
            .enumerate()
            .fold((0usize, 0.0f64), |b, (k, v)| if *v > b.1 { (k, *v) } else { b });
        sets.push(SubspaceSetCheck {
            set: b.clone(),
            membership_stat,
            qualifies: membership_stat <= VANISH_TOL,
            restricted_sup,
            witness_n: k as u64 + 1,
        });
    }
    let restricted_sup = sets
        .iter()
        .filter(|s| s.qualifies)
        .map(|s| s.restricted_sup)
        .fold(0.0, f64::max);
    Ok(SubspaceReport {
        mode,
        horizon: h,
        exceeds_bound: bound.map(|c| restricted_sup > c),
        sets,
        restricted_sup,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::numeric::{harmonic, rel_diff};
    use crate::system::{build_shift_system, ExplicitAtom};
    use proptest::prelude::*;

    fn shift(spec: WeightSpec, space: SpaceKind) -> AtomicSystem {
        build_shift_system(spec, space, None).unwrap()
    }

    fn l1() -> SpaceKind {
        SpaceKind::Lp { p: 1.0 }
    }

    fn pw(neg: f64, pos: f64) -> WeightSpec {
        WeightSpec::piecewise(Generator::Constant { value: neg }, Generator::Constant { value: pos }).unwrap()
    }

    #[test]
    fn power_bounded_examples() {
        let half = shift(WeightSpec::constant(Domain::Unilateral, 0.5), l1());
        let v = classify_power_bounded(&half, 50, None).unwrap();
        assert_eq!((v.status, v.holds), (Status::ExactByClosedForm, Some(true)));
        let rp = shift(WeightSpec::ratio_power(2.0).unwrap(), l1());
        let v = classify_power_bounded(&rp, 50, None).unwrap();
        assert_eq!((v.status, v.holds), (Status::ExactByClosedForm, Some(false)));
        let two = shift(WeightSpec::constant(Domain::Unilateral, 2.0), l1());
        let v = classify_power_bounded(&two, 50, Some(100.0)).unwrap();
        assert_eq!((v.status, v.holds), (Status::RefutedAtHorizon, Some(false)));
        assert_eq!(v.witnesses[0].n, Some(7));
    }

    #[test]
    fn power_bounded_with_tail() {
        let tail_system = |c: f64| {
            let structure = Structure::ExplicitWithTail {
                core: vec![ExplicitAtom { id: 0, image: 0, mass: 1.0, weight: 0.5 }],
                tail_start: 1,
                tail: WeightSpec::constant(Domain::Unilateral, c),
                tail_mass: 1.0,
            };
            AtomicSystem::new(structure, l1()).unwrap()
        };
        let v = classify_power_bounded_with(&tail_system(2.0), 20, None, &ScanOptions { index_max: 200 }).unwrap();
        assert_eq!((v.status, v.holds), (Status::ExactByClosedForm, Some(false)));
        let v = classify_power_bounded_with(&tail_system(1.0), 20, None, &ScanOptions { index_max: 200 }).unwrap();
        assert_eq!((v.status, v.holds), (Status::SupportedAtHorizon, Some(true)));
    }

    #[test]
    fn power_bounded_on_cycles() {
        let atoms = vec![
            ExplicitAtom { id: 1, image: 2, mass: 1.0, weight: 2.0 },
            ExplicitAtom { id: 2, image: 1, mass: 1.0, weight: 0.5 },
            ExplicitAtom { id: 3, image: 1, mass: 1.0, weight: 5.0 },
        ];
        let s = AtomicSystem::new(Structure::ExplicitFinite { atoms }, l1()).unwrap();
        let v = classify_power_bounded(&s, 20, None).unwrap();
        assert_eq!(v.holds, Some(true));
        let atoms = vec![
            ExplicitAtom { id: 1, image: 2, mass: 1.0, weight: 2.0 },
            ExplicitAtom { id: 2, image: 1, mass: 1.0, weight: 0.6 },
        ];
        let s = AtomicSystem::new(Structure::ExplicitFinite { atoms }, l1()).unwrap();
        assert_eq!(classify_power_bounded(&s, 20, None).unwrap().holds, Some(false));
        assert_eq!(classify_acb(&s, &AcbOptions { horizon: 20, ..Default::default() }).unwrap().holds, Some(false));
    }

    #[test]
    fn li_yorke_examples() {
        let v = classify_li_yorke(&shift(WeightSpec::constant(Domain::Unilateral, 2.0), l1()), 100).unwrap();
        assert_eq!((v.status, v.holds), (Status::ExactByClosedForm, Some(true)));
        let v = classify_li_yorke(&shift(WeightSpec::constant(Domain::Unilateral, 0.5), l1()), 100).unwrap();
        assert_eq!((v.status, v.holds), (Status::ExactByClosedForm, Some(false)));
        let v = classify_li_yorke(&shift(pw(2.0, 0.5), l1()), 100).unwrap();
        assert_eq!((v.status, v.holds), (Status::ExactByClosedForm, Some(false)));
        assert_eq!(v.supporting[0].holds, Some(false));
        let v = classify_li_yorke(&shift(pw(0.5, 2.0), l1()), 100).unwrap();
        assert_eq!(v.holds, Some(true));
        let err = classify_li_yorke(&shift(pw(0.0, 2.0), l1()), 100).unwrap_err();
        assert!(matches!(err, Error::ZeroWeightBilateral { .. }));
    }

    #[test]
    fn acb_examples() {
        let rp = shift(WeightSpec::ratio_power(2.0).unwrap(), l1());
        let opts = AcbOptions { horizon: 100, index_max: 1000, exponent: None, bound: None };
        let v = classify_acb(&rp, &opts).unwrap();
        assert_eq!((v.status, v.holds), (Status::CertifiedByTheorem, Some(true)));
        assert_eq!(v.witnesses[0].value, Some(4.0));
        let rp2 = shift(WeightSpec::ratio_power(2.0).unwrap(), SpaceKind::Lp { p: 2.0 });
        let v = classify_acb(&rp2, &AcbOptions { index_max: 10_000, ..opts }).unwrap();
        assert_eq!((v.status, v.holds), (Status::CertifiedByTheorem, Some(false)));
        let i = 10_000.0;
        let expected = i / (i - 1.0) * harmonic(9_999);
        assert!(rel_diff(v.witnesses[0].value.unwrap(), expected) < 1e-9);
        let one = shift(WeightSpec::constant(Domain::Bilateral, 1.0), l1());
        let v = classify_acb(&one, &opts).unwrap();
        assert_eq!((v.status, v.holds), (Status::ExactByClosedForm, Some(true)));
    }

    #[test]
    fn mean_li_yorke_examples() {
        let opts = AcbOptions { horizon: 200, index_max: 200, exponent: None, bound: None };
        let v = classify_mean_li_yorke(&shift(pw(0.5, 2.0), l1()), &opts, None).unwrap();
        assert_eq!((v.status, v.holds), (Status::CertifiedByTheorem, Some(true)));
        let v = classify_mean_li_yorke(&shift(pw(2.0, 0.5), l1()), &opts, None).unwrap();
        assert_eq!(v.holds, Some(false));
        let v = classify_mean_li_yorke(&shift(WeightSpec::constant(Domain::Bilateral, 1.0), l1()), &opts, None).unwrap();
        assert_eq!((v.status, v.holds), (Status::CertifiedByTheorem, Some(false)));
        let v = classify_mean_li_yorke(
            &shift(WeightSpec::constant(Domain::Unilateral, 2.0), l1()),
            &opts,
            None,
        )
        .unwrap();
        assert_eq!(v.holds, Some(true));
    }

    #[test]
    fn family_conditions_report_gap() {
        let atoms = vec![
            ExplicitAtom { id: 1, image: 1, mass: 1.0, weight: 1.0 },
            ExplicitAtom { id: 2, image: 1, mass: 1.0, weight: 1.0 },
        ];
        let s = AtomicSystem::new(Structure::ExplicitFinite { atoms }, SpaceKind::Lp { p: 2.0 }).unwrap();
        let v = classify_mean_li_yorke(&s, &AcbOptions { horizon: 50, ..Default::default() }, Some(&[vec![2]])).unwrap();
        assert_eq!(v.status, Status::Inconclusive);
        assert!(matches!(v.certificate, Some(Certificate::FamilyConditions(_))));
        assert!(classify_mean_li_yorke(&s, &AcbOptions::default(), Some(&[])).is_err());
    }

    #[test]
    fn subspace_examples() {
        let rp = shift(WeightSpec::ratio_power(1.0).unwrap(), l1());
        let r = subspace_boundedness_check(&rp, &[vec![5]], SubspaceMode::Power, 20, None).unwrap();
        assert!(r.sets[0].qualifies && r.sets[0].membership_stat == 0.0);
        let r = subspace_boundedness_check(&shift(pw(2.0, 0.5), l1()), &[vec![0], vec![3]], SubspaceMode::Power, 40, None)
            .unwrap();
        assert!(r.sets.iter().all(|s| !s.qualifies));
        let one = shift(WeightSpec::constant(Domain::Bilateral, 1.0), l1());
        let r = subspace_boundedness_check(&one, &[vec![0], vec![1, 4]], SubspaceMode::Power, 30, Some(2.0)).unwrap();
        assert!(r.sets.iter().all(|s| (s.restricted_sup - 1.0).abs() < 1e-15));
        assert_eq!(r.exceeds_bound, Some(false));
        assert_eq!(subspace_boundedness_check(&one, &[], SubspaceMode::Power, 3, None).unwrap_err(), Error::EmptyFamily);
    }

    #[test]
    fn verdict_json_round_trip() {
        let rp = shift(WeightSpec::ratio_power(2.0).unwrap(), l1());
        let v = classify_acb(&rp, &AcbOptions { horizon: 20, index_max: 50, exponent: None, bound: None }).unwrap();
        let s = serde_json::to_string(&v).unwrap();
        let back: Verdict = serde_json::from_str(&s).unwrap();
        assert_eq!(back, v);
        let v = classify_li_yorke(&shift(pw(2.0, 0.5), l1()), 30).unwrap();
        let back: Verdict = serde_json::from_str(&serde_json::to_string(&v).unwrap()).unwrap();
        assert_eq!(back, v);
    }

    proptest! {
        #[test]
        fn unilateral_dichotomy(c in 0.1f64..3.0, h in 5u64..60) {
            let s = shift(WeightSpec::constant(Domain::Unilateral, c), l1());
            let pb = classify_power_bounded(&s, h, None).unwrap();
            let ly = classify_li_yorke(&s, h).unwrap();
            prop_assert_eq!(pb.status, Status::ExactByClosedForm);
            prop_assert_eq!(ly.holds, pb.holds.map(|b| !b));
        }

        #[test]
        fn conclusive_verdicts_stable_in_horizon(c in 0.1f64..3.0, h in 5u64..40) {
            let s = shift(WeightSpec::constant(Domain::Unilateral, c), l1());
            let a = classify_acb(&s, &AcbOptions { horizon: h, index_max: 50, exponent: None, bound: None }).unwrap();
            let b = classify_acb(&s, &AcbOptions { horizon: 2 * h, index_max: 100, exponent: None, bound: None }).unwrap();
            prop_assert!(a.status.is_conclusive());
            prop_assert_eq!((a.status, a.holds), (b.status, b.holds));
        }

        #[test]
        fn cycle_products_match_norm_growth(ws in prop::collection::vec(0.2f64..2.0, 2..6)) {
            let n = ws.len() as i64;
            let atoms: Vec<ExplicitAtom> = ws
                .iter()
                .enumerate()
                .map(|(k, w)| ExplicitAtom { id: k as i64, image: (k as i64 + 1) % n, mass: 1.0, weight: *w })
                .collect();
            let s = AtomicSystem::new(Structure::ExplicitFinite { atoms }, l1()).unwrap();
            let c = cycle_products(&s).unwrap();
            prop_assert_eq!(c.len(), 1);
            let lp: f64 = ws.iter().map(|w| w.ln()).sum();
            prop_assert!((c[0].log_product - lp).abs() < 1e-12);
            let norm = crate::norms::iterate_norm(&s, n as u64 * 3).unwrap();
            let each_max = (0..ws.len()).map(|_| 3.0 * lp).fold(f64::NEG_INFINITY, f64::max);
            prop_assert!((norm.log_value - each_max).abs() < 1e-9);
        }
    }
}
