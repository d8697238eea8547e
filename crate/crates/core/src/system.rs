//! Atomic measure-space model of the weighted composition operator
//! `C_{w,f} φ = (φ ∘ f) · w`.
//!
//! Atoms are integers. A shift-structured system maps `k ↦ k + stride` and
//! takes its weights from a [`WeightSpec`]; explicit systems list every atom
//! with its image, mass and weight, optionally followed by a forward-shift
//! tail `tail_start, tail_start + 1, …`.

use crate::error::{Error, Result};
use crate::numeric::CompensatedSum;
use crate::weight::{Domain, Generator, WeightSpec};
use serde::{Deserialize, Serialize};
use std::collections::{BTreeMap, BTreeSet, HashMap};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum SpaceKind {
    Lp { p: f64 },
    SupNorm,
}

impl SpaceKind {
    pub fn p(&self) -> Option<f64> {
        match self {
            SpaceKind::Lp { p } => Some(*p),
            SpaceKind::SupNorm => None,
        }
    }
}

fn one() -> f64 {
    1.0
}

fn one_i() -> i64 {
    1
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExplicitAtom {
    pub id: i64,
    pub image: i64,
    #[serde(default = "one")]
    pub mass: f64,
    #[serde(default = "one")]
    pub weight: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case", deny_unknown_fields)]
pub enum Structure {
    Shift {
        spec: WeightSpec,
        #[serde(default = "one_i")]
        stride: i64,
        #[serde(default = "one")]
        mass: f64,
    },
    ExplicitFinite {
        atoms: Vec<ExplicitAtom>,
    },
    ExplicitWithTail {
        core: Vec<ExplicitAtom>,
        tail_start: i64,
        /// Unilateral spec; tail atom `k` carries weight `w_{k - tail_start + 1}`.
        tail: WeightSpec,
        #[serde(default = "one")]
        tail_mass: f64,
    },
}

#[derive(Debug, Clone)]
struct ExplicitIndex {
    by_id: HashMap<i64, usize>,
    preimages: HashMap<i64, Vec<i64>>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(try_from = "SystemDoc", into = "SystemDoc")]
pub struct AtomicSystem {
    structure: Structure,
    space: SpaceKind,
    index: Option<ExplicitIndex>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct SystemDoc {
    structure: Structure,
    space: SpaceKind,
}

impl TryFrom<SystemDoc> for AtomicSystem {
    type Error = Error;
    fn try_from(d: SystemDoc) -> Result<Self> {
        AtomicSystem::new(d.structure, d.space)
    }
}

impl From<AtomicSystem> for SystemDoc {
    fn from(s: AtomicSystem) -> Self {
        SystemDoc {
            structure: s.structure,
            space: s.space,
        }
    }
}

impl PartialEq for AtomicSystem {
    fn eq(&self, other: &Self) -> bool {
        self.structure == other.structure && self.space == other.space
    }
}

/// A possibly infinite set of atoms: finitely many listed atoms, optionally
/// every atom `≥ ray_from`, or every integer.
#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct AtomRegion {
    pub finite: BTreeSet<i64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub ray_from: Option<i64>,
    #[serde(default)]
    pub all_integers: bool,
}

impl AtomRegion {
    pub fn contains(&self, x: i64) -> bool {
        self.all_integers || self.finite.contains(&x) || self.ray_from.is_some_and(|r| x >= r)
    }

    pub fn is_empty(&self) -> bool {
        self.finite.is_empty() && self.ray_from.is_none() && !self.all_integers
    }

    fn finite_set(atoms: impl IntoIterator<Item = i64>) -> Self {
        Self {
            finite: atoms.into_iter().collect(),
            ..Self::default()
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BoundednessViolation {
    pub atom: i64,
    pub n: u64,
    pub lhs: f64,
    pub rhs: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BoundednessReport {
    pub horizon: u64,
    pub c_min: f64,
    pub witness: i64,
    pub scanned_atoms: usize,
    pub lemma_checks: usize,
    pub violations: Vec<BoundednessViolation>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct HopfPartition {
    pub conservative: AtomRegion,
    pub dissipative: AtomRegion,
    pub wandering_generator: Option<BTreeSet<i64>>,
    /// Period of each listed conservative atom.
    pub periods: BTreeMap<i64, u64>,
    /// Steps over which `f^n(W) ∩ W = ∅` was checked.
    pub verified_horizon: u64,
}

const LEMMA_ATOMS: usize = 64;
const LEMMA_STEPS: u64 = 64;

impl AtomicSystem {
    pub fn new(structure: Structure, space: SpaceKind) -> Result<Self> {
        if let SpaceKind::Lp { p } = space {
            if !(p.is_finite() && p >= 1.0) {
                return Err(Error::InvalidSpec("Lp spaces need p ≥ 1".into()));
            }
        }
        let index = match &structure {
            Structure::Shift { spec, stride, mass } => {
                spec.validate()?;
                if *stride < 1 {
                    return Err(Error::InvalidSpec("shift stride must be at least 1".into()));
                }
                check_mass(*mass)?;
                None
            }
            Structure::ExplicitFinite { atoms } => Some(index_atoms(atoms, None)?),
            Structure::ExplicitWithTail {
                core,
                tail_start,
                tail,
                tail_mass,
            } => {
                tail.validate()?;
                check_mass(*tail_mass)?;
                if tail.domain != Domain::Unilateral {
                    return Err(Error::UndecidableTail);
                }
                if core.iter().any(|a| a.id >= *tail_start) {
                    return Err(Error::InvalidSpec("core atoms must lie below tail_start".into()));
                }
                Some(index_atoms(core, Some(*tail_start))?)
            }
        };
        Ok(Self {
            structure,
            space,
            index,
        })
    }

    pub fn structure(&self) -> &Structure {
        &self.structure
    }

    pub fn space(&self) -> SpaceKind {
        self.space
    }

    pub fn with_space(&self, space: SpaceKind) -> Result<Self> {
        Self::new(self.structure.clone(), space)
    }

    /// The weight spec of a shift-structured system.
    pub fn shift_spec(&self) -> Option<&WeightSpec> {
        match &self.structure {
            Structure::Shift { spec, .. } => Some(spec),
            _ => None,
        }
    }

    /// Shift with unit stride and unit masses.
    pub fn is_plain_shift(&self) -> bool {
        matches!(&self.structure, Structure::Shift { stride: 1, mass, .. } if *mass == 1.0)
    }

    pub fn contains(&self, x: i64) -> bool {
        match &self.structure {
            Structure::Shift { spec, .. } => spec.domain == Domain::Bilateral || x >= 1,
            Structure::ExplicitFinite { .. } => self.idx().by_id.contains_key(&x),
            Structure::ExplicitWithTail { tail_start, .. } => {
                x >= *tail_start || self.idx().by_id.contains_key(&x)
            }
        }
    }

    fn idx(&self) -> &ExplicitIndex {
        self.index.as_ref().expect("explicit index")
    }

    fn explicit_atom(&self, x: i64) -> Option<&ExplicitAtom> {
        let i = *self.index.as_ref()?.by_id.get(&x)?;
        match &self.structure {
            Structure::ExplicitFinite { atoms } => Some(&atoms[i]),
            Structure::ExplicitWithTail { core, .. } => Some(&core[i]),
            Structure::Shift { .. } => None,
        }
    }

    fn absent(&self, x: i64) -> Error {
        Error::IndexOutOfDomain { index: x }
    }

    /// `f(x)`.
    pub fn image(&self, x: i64) -> Result<i64> {
        if !self.contains(x) {
            return Err(self.absent(x));
        }
        Ok(match &self.structure {
            Structure::Shift { stride, .. } => x + stride,
            Structure::ExplicitFinite { .. } => self.explicit_atom(x).expect("atom").image,
            Structure::ExplicitWithTail { tail_start, .. } => {
                if x >= *tail_start {
                    x + 1
                } else {
                    self.explicit_atom(x).expect("atom").image
                }
            }
        })
    }

    /// `w(x)`.
    pub fn weight_at(&self, x: i64) -> Result<f64> {
        if !self.contains(x) {
            return Err(self.absent(x));
        }
        match &self.structure {
            Structure::Shift { spec, .. } => spec.weight(x),
            Structure::ExplicitFinite { .. } => Ok(self.explicit_atom(x).expect("atom").weight),
            Structure::ExplicitWithTail {
                tail_start, tail, ..
            } => {
                if x >= *tail_start {
                    tail.weight(x - tail_start + 1)
                } else {
                    Ok(self.explicit_atom(x).expect("atom").weight)
                }
            }
        }
    }

    /// `μ({x})`.
    pub fn mass_at(&self, x: i64) -> Result<f64> {
        if !self.contains(x) {
            return Err(self.absent(x));
        }
        Ok(match &self.structure {
            Structure::Shift { mass, .. } => *mass,
            Structure::ExplicitFinite { .. } => self.explicit_atom(x).expect("atom").mass,
            Structure::ExplicitWithTail {
                tail_start,
                tail_mass,
                ..
            } => {
                if x >= *tail_start {
                    *tail_mass
                } else {
                    self.explicit_atom(x).expect("atom").mass
                }
            }
        })
    }

    /// `f^{-1}({x})`, ascending.
    pub fn preimages(&self, x: i64) -> Vec<i64> {
        match &self.structure {
            Structure::Shift { spec, stride, .. } => {
                let y = x - stride;
                if spec.domain == Domain::Bilateral || y >= 1 {
                    vec![y]
                } else {
                    vec![]
                }
            }
            Structure::ExplicitFinite { .. } => {
                self.idx().preimages.get(&x).cloned().unwrap_or_default()
            }
            Structure::ExplicitWithTail { tail_start, .. } => {
                let mut v = self.idx().preimages.get(&x).cloned().unwrap_or_default();
                if x > *tail_start {
                    v.push(x - 1);
                }
                v
            }
        }
    }

    /// `ln|w^{(n)}(x)| = Σ_{j<n} ln|w(f^j x)|`.
    pub fn log_wn(&self, x: i64, n: u64) -> Result<f64> {
        if let Structure::Shift { spec, stride: 1, .. } = &self.structure {
            if !self.contains(x) {
                return Err(self.absent(x));
            }
            return spec.log_window_product(x, n);
        }
        let mut acc = CompensatedSum::new();
        let mut y = x;
        for _ in 0..n {
            let w = self.weight_at(y)?;
            if w == 0.0 {
                return Ok(f64::NEG_INFINITY);
            }
            acc.add(w.abs().ln());
            y = self.image(y)?;
        }
        Ok(acc.value())
    }

    /// `f^n(x)`.
    pub fn iterate_map(&self, x: i64, n: u64) -> Result<i64> {
        if let Structure::Shift { stride, .. } = &self.structure {
            if !self.contains(x) {
                return Err(self.absent(x));
            }
            return Ok(x + stride * n as i64);
        }
        let mut y = x;
        for _ in 0..n {
            y = self.image(y)?;
        }
        Ok(y)
    }

    /// Atoms `z` with `f^n(z) = x`, each with `ln|w^{(n)}(z)|`.
    pub fn preimages_n(&self, x: i64, n: u64) -> Result<Vec<(i64, f64)>> {
        if !self.contains(x) {
            return Err(self.absent(x));
        }
        if let Structure::Shift { spec, stride, .. } = &self.structure {
            let z = x - stride * n as i64;
            if !self.contains(z) {
                return Ok(vec![]);
            }
            let l = if *stride == 1 {
                spec.log_window_product(z, n)?
            } else {
                self.log_wn(z, n)?
            };
            return Ok(vec![(z, l)]);
        }
        let mut frontier = vec![(x, 0.0f64)];
        for _ in 0..n {
            let mut next = Vec::new();
            for (z, l) in frontier {
                for y in self.preimages(z) {
                    let w = self.weight_at(y)?;
                    let lw = if w == 0.0 { f64::NEG_INFINITY } else { w.abs().ln() };
                    next.push((y, l + lw));
                }
            }
            if next.is_empty() {
                return Ok(next);
            }
            frontier = next;
        }
        frontier.sort_by_key(|e| e.0);
        Ok(frontier)
    }

    /// `μ_n(f^{-n}(B)) = Σ_{f^n z ∈ B} μ({z}) |w^{(n)}(z)|^p`.
    pub fn mu_n_preimage(&self, b: &[i64], n: u64) -> Result<f64> {
        let p = self.space.p().ok_or(Error::SupNormMismatch)?;
        let atoms: BTreeSet<i64> = b.iter().copied().collect();
        let mut acc = CompensatedSum::new();
        for x in atoms {
            for (z, l) in self.preimages_n(x, n)? {
                acc.add(self.mass_at(z)? * (p * l).exp());
            }
        }
        Ok(acc.value())
    }

    /// `μ(B)`.
    pub fn mass_of(&self, b: &[i64]) -> Result<f64> {
        let atoms: BTreeSet<i64> = b.iter().copied().collect();
        let mut acc = CompensatedSum::new();
        for x in atoms {
            acc.add(self.mass_at(x)?);
        }
        Ok(acc.value())
    }

    /// `‖w^{(n)}‖` restricted to `f^{-n}(B)`; zero on an empty preimage.
    pub fn sup_weight_on_preimage(&self, b: &[i64], n: u64) -> Result<f64> {
        let mut best = 0.0f64;
        for &x in b {
            for (_, l) in self.preimages_n(x, n)? {
                best = best.max(l.exp());
            }
        }
        Ok(best)
    }

    /// Atoms visited by finite scans: all explicit atoms, tail and shift
    /// atoms up to `horizon` steps from the start.
    pub fn scan_atoms(&self, horizon: u64) -> Vec<i64> {
        let h = horizon as i64;
        match &self.structure {
            Structure::Shift { spec, .. } => match spec.domain {
                Domain::Unilateral => (1..=h.max(1)).collect(),
                Domain::Bilateral => (-h..=h).collect(),
            },
            Structure::ExplicitFinite { atoms } => {
                let mut v: Vec<i64> = atoms.iter().map(|a| a.id).collect();
                v.sort_unstable();
                v
            }
            Structure::ExplicitWithTail {
                core, tail_start, ..
            } => {
                let mut v: Vec<i64> = core.iter().map(|a| a.id).collect();
                v.sort_unstable();
                v.extend(*tail_start..=*tail_start + h);
                v
            }
        }
    }

    /// Smallest `c` with `∫_{{x}} |w|^p dμ ≤ c μ(f({x}))` over scanned atoms,
    /// plus checks of `μ_n({x}) ≤ c^n μ(f^n({x}))` on a sample.
    pub fn validate_boundedness(&self, horizon: u64) -> Result<BoundednessReport> {
        let p = self.space.p().ok_or(Error::SupNormMismatch)?;
        let atoms = self.scan_atoms(horizon);
        let mut c_min = 0.0f64;
        let mut witness = atoms.first().copied().unwrap_or(0);
        for &x in &atoms {
            let fx = self.image(x)?;
            let r = self.mass_at(x)? * self.weight_at(x)?.abs().powf(p) / self.mass_at(fx)?;
            if r > c_min {
                c_min = r;
                witness = x;
            }
        }
        let mut violations = Vec::new();
        let mut checks = 0;
        let steps = horizon.min(LEMMA_STEPS);
        for &x in atoms.iter().take(LEMMA_ATOMS) {
            let mut y = x;
            let mut log_w = CompensatedSum::new();
            let mx = self.mass_at(x)?.ln();
            for n in 1..=steps {
                let w = self.weight_at(y)?;
                log_w.add(if w == 0.0 { f64::NEG_INFINITY } else { w.abs().ln() });
                y = self.image(y)?;
                let lhs = mx + p * log_w.value();
                let rhs = n as f64 * c_min.ln() + self.mass_at(y)?.ln();
                checks += 1;
                if lhs > rhs + 1e-12 * rhs.abs().max(1.0) {
                    violations.push(BoundednessViolation {
                        atom: x,
                        n,
                        lhs: lhs.exp(),
                        rhs: rhs.exp(),
                    });
                }
            }
        }
        Ok(BoundednessReport {
            horizon,
            c_min,
            witness,
            scanned_atoms: atoms.len(),
            lemma_checks: checks,
            violations,
        })
    }

    /// Conservative/dissipative split of the atoms with a wandering generator.
    ///
    /// The map must be injective on the dissipative part: every dissipative
    /// atom has at most one preimage.
    pub fn hopf_decompose(&self, horizon: u64) -> Result<HopfPartition> {
        match &self.structure {
            Structure::Shift { spec, stride, .. } => {
                let (dissipative, w) = match spec.domain {
                    Domain::Bilateral => (
                        AtomRegion {
                            all_integers: true,
                            ..AtomRegion::default()
                        },
                        (0..*stride).collect::<BTreeSet<_>>(),
                    ),
                    Domain::Unilateral => (
                        AtomRegion {
                            ray_from: Some(1),
                            ..AtomRegion::default()
                        },
                        (1..=*stride).collect(),
                    ),
                };
                let verified = self.verify_wandering(&w, horizon)?;
                Ok(HopfPartition {
                    conservative: AtomRegion::default(),
                    dissipative,
                    wandering_generator: Some(w),
                    periods: BTreeMap::new(),
                    verified_horizon: verified,
                })
            }
            Structure::ExplicitFinite { atoms } | Structure::ExplicitWithTail { core: atoms, .. } => {
                let tail_start = match &self.structure {
                    Structure::ExplicitWithTail { tail_start, .. } => Some(*tail_start),
                    _ => None,
                };
                let mut periods = BTreeMap::new();
                let bound = atoms.len() as u64;
                for a in atoms {
                    let mut y = a.image;
                    for k in 1..=bound {
                        if tail_start.is_some_and(|t| y >= t) {
                            break;
                        }
                        if y == a.id {
                            periods.insert(a.id, k);
                            break;
                        }
                        y = self.image(y)?;
                    }
                }
                let conservative = AtomRegion::finite_set(periods.keys().copied());
                let mut dissipative = AtomRegion::finite_set(
                    atoms.iter().map(|a| a.id).filter(|x| !periods.contains_key(x)),
                );
                dissipative.ray_from = tail_start;
                let mut heads = BTreeSet::new();
                let mut candidates: Vec<i64> = dissipative.finite.iter().copied().collect();
                candidates.extend(tail_start);
                for x in candidates {
                    let pre = self.preimages(x);
                    if pre.len() > 1 {
                        return Err(Error::NonInjectiveMap { atom: x });
                    }
                    if pre.is_empty() {
                        heads.insert(x);
                    }
                }
                if let Some(t) = tail_start {
                    if self.preimages(t + 1).len() > 1 {
                        return Err(Error::NonInjectiveMap { atom: t + 1 });
                    }
                }
                let (w, verified) = if dissipative.is_empty() {
                    (None, 0)
                } else {
                    let v = self.verify_wandering(&heads, horizon)?;
                    (Some(heads), v)
                };
                Ok(HopfPartition {
                    conservative,
                    dissipative,
                    wandering_generator: w,
                    periods,
                    verified_horizon: verified,
                })
            }
        }
    }

    /// Checks `f^n(W) ∩ W = ∅` for `1 ≤ n ≤ horizon`, which is equivalent to
    /// pairwise disjointness of the preimages `f^{-n}(W)`.
    fn verify_wandering(&self, w: &BTreeSet<i64>, horizon: u64) -> Result<u64> {
        for &x in w {
            let mut y = x;
            for n in 1..=horizon {
                y = self.image(y)?;
                if w.contains(&y) {
                    return Err(Error::InvalidSpec(format!(
                        "wandering check failed: f^{n}({x}) = {y} returns to the generator"
                    )));
                }
            }
        }
        Ok(horizon)
    }
}

fn check_mass(m: f64) -> Result<()> {
    if m.is_finite() && m > 0.0 {
        Ok(())
    } else {
        Err(Error::InvalidSpec("atom masses must be finite and positive".into()))
    }
}

fn index_atoms(atoms: &[ExplicitAtom], tail_start: Option<i64>) -> Result<ExplicitIndex> {
    let mut by_id = HashMap::new();
    for (i, a) in atoms.iter().enumerate() {
        if by_id.insert(a.id, i).is_some() {
            return Err(Error::InvalidSpec(format!("duplicate atom {}", a.id)));
        }
        check_mass(a.mass)?;
        if !a.weight.is_finite() {
            return Err(Error::NonFiniteWeight { index: a.id });
        }
    }
    let mut preimages: HashMap<i64, Vec<i64>> = HashMap::new();
    for a in atoms {
        let in_tail = tail_start.is_some_and(|t| a.image >= t);
        if !in_tail && !by_id.contains_key(&a.image) {
            return Err(Error::InvalidSpec(format!(
                "atom {} maps to undescribed atom {}",
                a.id, a.image
            )));
        }
        preimages.entry(a.image).or_default().push(a.id);
    }
    for v in preimages.values_mut() {
        v.sort_unstable();
    }
    Ok(ExplicitIndex { by_id, preimages })
}

/// Weighted backward shift on `ℓ^p(ℕ)`, `ℓ^p(ℤ)`, `c_0(ℕ)` or `c_0(ℤ)`.
pub fn build_shift_system(spec: WeightSpec, space: SpaceKind, mass: Option<f64>) -> Result<AtomicSystem> {
    AtomicSystem::new(
        Structure::Shift {
            spec,
            stride: 1,
            mass: mass.unwrap_or(1.0),
        },
        space,
    )
}

/// Atomic form of a weighted translation `φ ↦ w · φ(· + 1)` whose weights
/// are constant on grid cells.
///
/// Cells are split into atoms of width `1/m` (mass `1/m`), where `m` is
/// `refine` or, by default, the reciprocal of a sub-unit cell width. The
/// translation moves every atom `m` places. Unilateral translations live on
/// `[1, ∞)` with atom `k` covering `[1 + (k-1)/m, 1 + k/m)`; bilateral ones
/// on `ℝ` with atom `k` covering `[k/m, (k+1)/m)`.
pub fn reduce_translation(
    step: &Generator,
    domain: Domain,
    space: SpaceKind,
    refine: Option<u32>,
) -> Result<AtomicSystem> {
    let Generator::StepFunction {
        values,
        origin,
        cell_width,
        frontier,
    } = step
    else {
        return Err(Error::InvalidSpec("translation reduction needs a step function".into()));
    };
    if !(cell_width.is_finite() && *cell_width > 0.0) {
        return Err(Error::NonUnitGrid);
    }
    let m = match refine {
        Some(m) if m >= 1 => m as f64,
        Some(_) => return Err(Error::NonUnitGrid),
        None if *cell_width < 1.0 => (1.0 / cell_width).round(),
        None => 1.0,
    };
    let per_cell = cell_width * m;
    let per_cell_i = per_cell.round();
    if (per_cell - per_cell_i).abs() > 1e-9 || per_cell_i < 1.0 {
        return Err(Error::NonUnitGrid);
    }
    let base = match domain {
        Domain::Unilateral => (origin - 1.0) * m + 1.0,
        Domain::Bilateral => origin * m,
    };
    if (base - base.round()).abs() > 1e-9 {
        return Err(Error::NonUnitGrid);
    }
    let refined: Vec<f64> = values
        .iter()
        .flat_map(|v| std::iter::repeat_n(*v, per_cell_i as usize))
        .collect();
    let spec = WeightSpec::new(
        domain,
        Generator::Table {
            values: refined,
            origin: base.round() as i64,
            frontier: *frontier,
        },
    )?;
    AtomicSystem::new(
        Structure::Shift {
            spec,
            stride: m as i64,
            mass: 1.0 / m,
        },
        space,
    )
}

/// Atoms of a translation system covering `[lo, hi)`; both ends must lie on
/// the atom grid.
pub fn translation_cells(system: &AtomicSystem, lo: f64, hi: f64) -> Result<Vec<i64>> {
    let Structure::Shift { spec, stride, .. } = system.structure() else {
        return Err(Error::InvalidSpec("not a translation system".into()));
    };
    let m = *stride as f64;
    let to_atom = |x: f64| -> Result<i64> {
        let k = match spec.domain {
            Domain::Unilateral => (x - 1.0) * m + 1.0,
            Domain::Bilateral => x * m,
        };
        if (k - k.round()).abs() > 1e-9 {
            return Err(Error::NonUnitGrid);
        }
        Ok(k.round() as i64)
    };
    Ok((to_atom(lo)?..to_atom(hi)?).collect())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::numeric::rel_diff;
    use crate::weight::Frontier;
    use proptest::prelude::*;

    fn lp(p: f64) -> SpaceKind {
        SpaceKind::Lp { p }
    }

    fn atom(id: i64, image: i64) -> ExplicitAtom {
        ExplicitAtom {
            id,
            image,
            mass: 1.0,
            weight: 1.0,
        }
    }

    fn six_atoms() -> AtomicSystem {
        let atoms = vec![atom(1, 2), atom(2, 3), atom(3, 1), atom(4, 5), atom(5, 6), atom(6, 1)];
        AtomicSystem::new(Structure::ExplicitFinite { atoms }, lp(1.0)).unwrap()
    }

    #[test]
    fn shift_mu_n_examples() {
        let s = build_shift_system(WeightSpec::constant(Domain::Unilateral, 2.0), lp(1.0), None).unwrap();
        assert!(rel_diff(s.mu_n_preimage(&[5], 3).unwrap(), 8.0) < 1e-14);
        assert_eq!(s.mu_n_preimage(&[1], 1).unwrap(), 0.0);
        assert_eq!(s.image(4).unwrap(), 5);
        assert_eq!(s.preimages(1), Vec::<i64>::new());
        let t = WeightSpec::table(Domain::Bilateral, vec![1.0; 21], -10, Frontier::Error).unwrap();
        let b = build_shift_system(t, lp(1.0), None).unwrap();
        assert!(rel_diff(b.mu_n_preimage(&[0], 5).unwrap(), 1.0) < 1e-15);
    }

    #[test]
    fn sup_norm_rejects_mu_n() {
        let s = build_shift_system(WeightSpec::ratio_power(2.0).unwrap(), SpaceKind::SupNorm, None).unwrap();
        assert_eq!(s.mu_n_preimage(&[3], 1), Err(Error::SupNormMismatch));
    }

    #[test]
    fn error_frontier_table_rejects_out_of_range() {
        let t = WeightSpec::table(Domain::Unilateral, vec![1.0, 2.0, 3.0], 1, Frontier::Error).unwrap();
        let s = build_shift_system(t, lp(2.0), None).unwrap();
        assert!(s.mu_n_preimage(&[4], 3).is_ok());
        assert!(matches!(s.mu_n_preimage(&[6], 2), Err(Error::IndexOutOfDomain { .. })));
    }

    #[test]
    fn sup_weight_examples() {
        let s = build_shift_system(WeightSpec::constant(Domain::Unilateral, 2.0), SpaceKind::SupNorm, None)
            .unwrap();
        assert!(rel_diff(s.sup_weight_on_preimage(&[5], 3).unwrap(), 8.0) < 1e-14);
        assert_eq!(s.sup_weight_on_preimage(&[2], 4).unwrap(), 0.0);
        let p = WeightSpec::bilateral(Generator::Periodic { block: vec![2.0, 0.5] }).unwrap();
        let s = build_shift_system(p, SpaceKind::SupNorm, None).unwrap();
        assert!(rel_diff(s.sup_weight_on_preimage(&[0], 2).unwrap(), 1.0) < 1e-15);
    }

    #[test]
    fn translation_reduction() {
        let step = Generator::StepFunction {
            values: vec![2.0; 50],
            origin: 1.0,
            cell_width: 1.0,
            frontier: Frontier::Hold,
        };
        let s = reduce_translation(&step, Domain::Unilateral, lp(1.0), None).unwrap();
        let b = translation_cells(&s, 5.0, 6.0).unwrap();
        assert_eq!(b, vec![5]);
        assert!(rel_diff(s.mu_n_preimage(&b, 3).unwrap(), 8.0) < 1e-14);

        let fine = reduce_translation(&step, Domain::Unilateral, lp(1.0), Some(2)).unwrap();
        let b2 = translation_cells(&fine, 5.0, 6.0).unwrap();
        assert_eq!(b2.len(), 2);
        assert_eq!(fine.mass_at(b2[0]).unwrap(), 0.5);
        for n in 1..4 {
            assert!(rel_diff(fine.mu_n_preimage(&b2, n).unwrap(), s.mu_n_preimage(&b, n).unwrap()) < 1e-14);
        }

        let unit = Generator::StepFunction {
            values: vec![1.0; 20],
            origin: 1.0,
            cell_width: 1.0,
            frontier: Frontier::Zero,
        };
        let s = reduce_translation(&unit, Domain::Unilateral, lp(1.0), None).unwrap();
        assert_eq!(s.mu_n_preimage(&[10, 11], 4).unwrap(), 2.0);
        assert_eq!(s.mu_n_preimage(&[3], 4).unwrap(), 0.0);

        let odd = Generator::StepFunction {
            values: vec![1.0],
            origin: 0.0,
            cell_width: 0.3,
            frontier: Frontier::Zero,
        };
        assert_eq!(
            reduce_translation(&odd, Domain::Bilateral, lp(1.0), None).unwrap_err(),
            Error::NonUnitGrid
        );
    }

    #[test]
    fn boundedness_examples() {
        let two = build_shift_system(WeightSpec::constant(Domain::Unilateral, 2.0), lp(1.0), None).unwrap();
        let r = two.validate_boundedness(50).unwrap();
        assert!(rel_diff(r.c_min, 2.0) < 1e-15 && r.violations.is_empty());
        let one = build_shift_system(WeightSpec::constant(Domain::Unilateral, 1.0), lp(3.0), None).unwrap();
        let r = one.validate_boundedness(50).unwrap();
        assert_eq!(r.c_min, 1.0);
        assert!(r.violations.is_empty() && r.lemma_checks > 0);
        let rp = build_shift_system(WeightSpec::ratio_power(2.0).unwrap(), lp(2.0), None).unwrap();
        let r = rp.validate_boundedness(100).unwrap();
        assert!(rel_diff(r.c_min, 2.0) < 1e-15);
        assert_eq!(r.witness, 1);
        assert!(r.violations.is_empty());
    }

    #[test]
    fn hopf_examples() {
        let cycle: Vec<_> = (0..5).map(|i| atom(i, (i + 1) % 5)).collect();
        let s = AtomicSystem::new(Structure::ExplicitFinite { atoms: cycle }, lp(1.0)).unwrap();
        let h = s.hopf_decompose(1000).unwrap();
        assert_eq!(h.conservative.finite.len(), 5);
        assert!(h.dissipative.is_empty() && h.wandering_generator.is_none());
        assert!(h.periods.values().all(|p| *p == 5));

        let b = build_shift_system(WeightSpec::constant(Domain::Bilateral, 1.0), lp(1.0), None).unwrap();
        let h = b.hopf_decompose(1000).unwrap();
        assert!(h.dissipative.all_integers && h.conservative.is_empty());
        assert_eq!(h.wandering_generator, Some(BTreeSet::from([0])));
        assert_eq!(h.verified_horizon, 1000);

        let h = six_atoms().hopf_decompose(1000).unwrap();
        assert_eq!(h.conservative.finite, BTreeSet::from([1, 2, 3]));
        assert_eq!(h.dissipative.finite, BTreeSet::from([4, 5, 6]));
        assert_eq!(h.wandering_generator, Some(BTreeSet::from([4])));
        assert_eq!(h.verified_horizon, 1000);
    }

    #[test]
    fn hopf_rejects_merging_dissipative_chains() {
        let atoms = vec![atom(1, 1), atom(2, 4), atom(3, 4), atom(4, 1)];
        let s = AtomicSystem::new(Structure::ExplicitFinite { atoms }, lp(1.0)).unwrap();
        assert_eq!(s.hopf_decompose(10).unwrap_err(), Error::NonInjectiveMap { atom: 4 });
    }

    #[test]
    fn tail_system_structure() {
        let core = vec![atom(-2, -1), atom(-1, 0)];
        let s = AtomicSystem::new(
            Structure::ExplicitWithTail {
                core,
                tail_start: 0,
                tail: WeightSpec::constant(Domain::Unilateral, 2.0),
                tail_mass: 1.0,
            },
            lp(1.0),
        )
        .unwrap();
        assert_eq!(s.image(5).unwrap(), 6);
        assert_eq!(s.preimages(0), vec![-1]);
        assert!(rel_diff(s.mu_n_preimage(&[3], 5).unwrap(), 8.0) < 1e-14);
        let h = s.hopf_decompose(100).unwrap();
        assert_eq!(h.wandering_generator, Some(BTreeSet::from([-2])));
        assert!(h.dissipative.contains(1_000_000));
    }

    #[test]
    fn explicit_mu_n_follows_branches() {
        let s = six_atoms();
        assert_eq!(s.mu_n_preimage(&[1], 3).unwrap(), 2.0);
        assert_eq!(s.preimages_n(1, 3).unwrap().iter().map(|e| e.0).collect::<Vec<_>>(), vec![1, 4]);
    }

    #[test]
    fn json_round_trip_and_unknown_keys() {
        let s = six_atoms();
        let j = serde_json::to_string(&s).unwrap();
        let back: AtomicSystem = serde_json::from_str(&j).unwrap();
        assert_eq!(back, s);
        let bad = j.replace("\"space\"", "\"bogus\":1,\"space\"");
        assert!(serde_json::from_str::<AtomicSystem>(&bad).is_err());
    }

    proptest! {
        #[test]
        fn mu_n_is_additive(vals in prop::collection::vec(0.1f64..3.0, 30), b1 in prop::collection::btree_set(1i64..30, 1..5), b2 in prop::collection::btree_set(1i64..30, 1..5), n in 1u64..10, p in 1.0f64..3.0) {
            let t = WeightSpec::table(Domain::Unilateral, vals, 1, Frontier::Zero).unwrap();
            let s = build_shift_system(t, lp(p), None).unwrap();
            let b1: Vec<i64> = b1.into_iter().collect();
            let b2: Vec<i64> = b2.into_iter().filter(|x| !b1.contains(x)).collect();
            let mut u = b1.clone();
            u.extend(&b2);
            let whole = s.mu_n_preimage(&u, n).unwrap();
            let parts = s.mu_n_preimage(&b1, n).unwrap() + s.mu_n_preimage(&b2, n).unwrap();
            prop_assert!(rel_diff(whole, parts) < 1e-12);
        }

        #[test]
        fn shift_consistency(q in 0.3f64..4.0, i in 1i64..500, n in 1u64..600, p in 1.0f64..4.0) {
            let spec = WeightSpec::ratio_power(q).unwrap();
            let s = build_shift_system(spec.clone(), lp(p), None).unwrap();
            let expected = spec.backward_window_product(i, n).unwrap().powf(p);
            prop_assert!(rel_diff(s.mu_n_preimage(&[i], n).unwrap(), expected) < 1e-12);
        }

        #[test]
        fn lemma_holds_on_random_tables(vals in prop::collection::vec(0.1f64..3.0, 20), p in 1.0f64..3.0) {
            let t = WeightSpec::table(Domain::Unilateral, vals, 1, Frontier::Hold).unwrap();
            let s = build_shift_system(t, lp(p), None).unwrap();
            prop_assert!(s.validate_boundedness(40).unwrap().violations.is_empty());
        }
    }
}
