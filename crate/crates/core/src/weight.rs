//! Weight sequences and their window products.
//!
//! A [`WeightSpec`] describes `w : ℕ → ℝ` or `w : ℤ → ℝ`. Window products
//! `|w_i ⋯ w_{i+n-1}|` are accumulated as sums of `ln|w_j|` and exponentiated
//! only when a plain value is requested, so horizons near `10^6` neither
//! overflow nor underflow.

use crate::error::{Error, Result};
use crate::numeric::{CompensatedSum, ExtReal};
use serde::{Deserialize, Serialize};
use std::collections::HashMap;
use std::hash::{DefaultHasher, Hash, Hasher};
use std::sync::Mutex;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Domain {
    /// Indices `1, 2, 3, …`.
    #[serde(alias = "unilateral_n")]
    Unilateral,
    /// Indices in `ℤ`.
    #[serde(alias = "bilateral_z")]
    Bilateral,
}

/// What a table returns outside its stored range.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Frontier {
    Zero,
    Hold,
    #[default]
    Error,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case", deny_unknown_fields)]
pub enum Generator {
    Constant {
        value: f64,
    },
    /// `w_n = ((n+1)/n)^(1/q)`, unilateral only.
    RatioPower {
        q: f64,
    },
    Geometric {
        r: f64,
    },
    /// `w_i = block[(i-1) mod len]`.
    Periodic {
        block: Vec<f64>,
    },
    PiecewiseBilateral {
        negative: Box<Generator>,
        positive: Box<Generator>,
    },
    /// `w_i = values[i - origin]`.
    Table {
        values: Vec<f64>,
        origin: i64,
        #[serde(default)]
        frontier: Frontier,
    },
    /// Weights constant on cells `[origin + k·cell_width, origin + (k+1)·cell_width)`.
    StepFunction {
        values: Vec<f64>,
        origin: f64,
        cell_width: f64,
        #[serde(default)]
        frontier: Frontier,
    },
    /// Concatenated blocks `z^(m) = (e^{1/m} repeated m times, e^{-1})`, `m ≥ 2`.
    RootBlocks,
}

fn default_true() -> bool {
    true
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct WeightSpec {
    pub domain: Domain,
    pub generator: Generator,
    #[serde(default = "default_true")]
    pub magnitude_only: bool,
}

/// How `sup_window_product` searches for the supremum.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Scan {
    Exact,
    Range { lo: i64, hi: i64 },
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SupWindow {
    pub value: ExtReal,
    pub witness: i64,
    pub exact: bool,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BackwardLiminf {
    pub running_min_tail: f64,
    pub exact_limit: Option<ExtReal>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum Side {
    Negative,
    Positive,
}

/// Start index of block `m ≥ 2` in [`Generator::RootBlocks`].
pub fn root_block_start(m: i64) -> i64 {
    m * (m + 1) / 2 - 2
}

/// Block number and offset of index `i ≥ 1` in [`Generator::RootBlocks`].
fn root_block_locate(i: i64) -> (i64, i64) {
    let mut m = ((((8 * (i + 2)) as f64 + 1.0).sqrt() - 1.0) / 2.0).floor() as i64;
    m = m.max(2);
    while root_block_start(m) > i {
        m -= 1;
    }
    while root_block_start(m + 1) <= i {
        m += 1;
    }
    (m, i - root_block_start(m))
}

/// `Σ_{1 ≤ j < i} ln w_j` for [`Generator::RootBlocks`]; lies in `[0, 1]`.
fn root_block_prefix(i: i64) -> f64 {
    if i <= 1 {
        return 0.0;
    }
    let (m, o) = root_block_locate(i);
    if o <= m {
        o as f64 / m as f64
    } else {
        0.0
    }
}

/// First `i` with `|w_i ⋯ w_{i+n-1}| = e` in [`Generator::RootBlocks`], `n ≥ 2`.
///
/// The prefix log is `0` exactly at block starts `s(m)` and `1` exactly at
/// `s(m') + m'`, so the window must run from `s(m)` to `s(m') + m'`.
fn root_block_sup_witness(n: i64) -> i64 {
    for m in 2..=n {
        let target = n + root_block_start(m);
        let mut k = ((((8 * (target + 2)) as f64 + 9.0).sqrt() - 3.0) / 2.0).floor() as i64;
        k = k.max(m);
        while root_block_start(k) + k < target {
            k += 1;
        }
        if root_block_start(k) + k == target {
            return root_block_start(m);
        }
    }
    root_block_start(n)
}

fn ln_abs(x: f64) -> f64 {
    if x == 0.0 {
        f64::NEG_INFINITY
    } else {
        x.abs().ln()
    }
}

impl Generator {
    fn validate(&self, domain: Domain, nested: Option<Side>) -> Result<()> {
        let bad = |m: &str| Err(Error::InvalidSpec(m.to_string()));
        match self {
            Generator::Constant { value } => {
                if !value.is_finite() {
                    return bad("constant weight must be finite");
                }
            }
            Generator::Geometric { r } => {
                if !(r.is_finite() && *r > 0.0) {
                    return bad("geometric ratio must be finite and positive");
                }
            }
            Generator::RatioPower { q } => {
                if !(q.is_finite() && *q > 0.0) {
                    return bad("ratio-power exponent q must be positive");
                }
                if domain == Domain::Bilateral && nested != Some(Side::Positive) {
                    return bad("ratio-power weights are defined on positive indices only");
                }
            }
            Generator::RootBlocks => {
                if domain == Domain::Bilateral && nested != Some(Side::Positive) {
                    return bad("root-block weights are defined on positive indices only");
                }
            }
            Generator::Periodic { block } => {
                if block.is_empty() {
                    return bad("periodic block must be nonempty");
                }
                if block.iter().any(|v| !v.is_finite()) {
                    return bad("periodic block entries must be finite");
                }
            }
            Generator::PiecewiseBilateral { negative, positive } => {
                if domain != Domain::Bilateral || nested.is_some() {
                    return bad("piecewise generator requires a bilateral domain at top level");
                }
                negative.validate(domain, Some(Side::Negative))?;
                positive.validate(domain, Some(Side::Positive))?;
            }
            Generator::Table { values, .. } => {
                if let Some(k) = values.iter().position(|v| !v.is_finite()) {
                    return bad(&format!("table value at position {k} is not finite"));
                }
            }
            Generator::StepFunction {
                values,
                origin,
                cell_width,
                ..
            } => {
                if let Some(k) = values.iter().position(|v| !v.is_finite()) {
                    return bad(&format!("step value at position {k} is not finite"));
                }
                if !(cell_width.is_finite() && *cell_width > 0.0) || !origin.is_finite() {
                    return bad("step function needs a finite origin and positive cell width");
                }
            }
        }
        Ok(())
    }

    fn signed(&self, i: i64) -> Result<f64> {
        Ok(match self {
            Generator::Constant { value } => *value,
            Generator::Geometric { r } => *r,
            Generator::RatioPower { q } => {
                let x = i as f64;
                ((x + 1.0) / x).powf(1.0 / q)
            }
            Generator::Periodic { block } => block[(i - 1).rem_euclid(block.len() as i64) as usize],
            Generator::PiecewiseBilateral { negative, positive } => {
                if i <= 0 {
                    negative.signed(i)?
                } else {
                    positive.signed(i)?
                }
            }
            Generator::Table {
                values,
                origin,
                frontier,
            } => table_value(values, *origin, *frontier, i)?,
            Generator::StepFunction { .. } => {
                let (values, origin, frontier) = self.unit_table()?;
                table_value(values, origin, frontier, i)?
            }
            Generator::RootBlocks => {
                let (m, o) = root_block_locate(i);
                if o < m {
                    (1.0 / m as f64).exp()
                } else {
                    (-1.0f64).exp()
                }
            }
        })
    }

    /// Step function read as a unit-grid table.
    fn unit_table(&self) -> Result<(&[f64], i64, Frontier)> {
        match self {
            Generator::StepFunction {
                values,
                origin,
                cell_width,
                frontier,
            } => {
                if *cell_width != 1.0 || origin.fract() != 0.0 {
                    return Err(Error::NonUnitGrid);
                }
                Ok((values, *origin as i64, *frontier))
            }
            _ => unreachable!("unit_table on a non-step generator"),
        }
    }

    /// `Σ_{j=i}^{i+n-1} ln|w_j|`, closed form where one exists.
    fn log_window(&self, i: i64, n: u64) -> Result<f64> {
        if n == 0 {
            return Ok(0.0);
        }
        let nf = n as f64;
        match self {
            Generator::Constant { value } => Ok(nf * ln_abs(*value)),
            Generator::Geometric { r } => Ok(nf * r.ln()),
            Generator::RatioPower { q } => Ok((nf / i as f64).ln_1p() / q),
            Generator::RootBlocks => Ok(root_block_prefix(i + n as i64) - root_block_prefix(i)),
            Generator::Periodic { block } => {
                let len = block.len() as u64;
                let (full, rest) = (n / len, n % len);
                let mut acc = CompensatedSum::new();
                if full > 0 {
                    let period = block.iter().map(|v| ln_abs(*v)).fold(0.0, |a, b| a + b);
                    acc.add(full as f64 * period);
                }
                let start = i + (full * len) as i64;
                for j in 0..rest as i64 {
                    acc.add(ln_abs(self.signed(start + j)?));
                }
                Ok(acc.value())
            }
            Generator::PiecewiseBilateral { negative, positive } => {
                let last = i + n as i64 - 1;
                if last <= 0 {
                    negative.log_window(i, n)
                } else if i >= 1 {
                    positive.log_window(i, n)
                } else {
                    let neg_len = (1 - i) as u64;
                    Ok(negative.log_window(i, neg_len)? + positive.log_window(1, n - neg_len)?)
                }
            }
            Generator::Table { .. } | Generator::StepFunction { .. } => {
                let mut acc = CompensatedSum::new();
                for j in 0..n as i64 {
                    let l = ln_abs(self.signed(i + j)?);
                    if l == f64::NEG_INFINITY {
                        return Ok(l);
                    }
                    acc.add(l);
                }
                Ok(acc.value())
            }
        }
    }

    /// Largest `ln|w_i ⋯ w_{i+n-1}|` over one side of the origin, with its
    /// first attaining index in the canonical search range.
    fn half_sup(&self, n: u64, side: Side) -> Result<(f64, i64)> {
        let anchor = match side {
            Side::Positive => 1,
            Side::Negative => 1 - n as i64,
        };
        match self {
            Generator::Constant { .. } | Generator::Geometric { .. } => {
                Ok((self.log_window(anchor, n)?, anchor))
            }
            Generator::RatioPower { .. } => Ok((self.log_window(1, n)?, 1)),
            Generator::RootBlocks => {
                if n == 1 {
                    Ok((0.5, 1))
                } else {
                    Ok((1.0, root_block_sup_witness(n as i64)))
                }
            }
            Generator::Periodic { block } => {
                let len = block.len() as i64;
                let lo = match side {
                    Side::Positive => 1,
                    Side::Negative => anchor - len + 1,
                };
                let mut best = (f64::NEG_INFINITY, lo);
                for i in lo..lo + len {
                    let v = self.log_window(i, n)?;
                    if v > best.0 {
                        best = (v, i);
                    }
                }
                Ok(best)
            }
            _ => Err(Error::ExactUnavailable),
        }
    }

    fn max_magnitude(&self) -> ExtReal {
        let m = match self {
            Generator::Constant { value } => value.abs(),
            Generator::Geometric { r } => *r,
            Generator::RatioPower { q } => 2f64.powf(1.0 / q),
            Generator::RootBlocks => 0.5f64.exp(),
            Generator::Periodic { block } => block.iter().fold(0.0f64, |a, v| a.max(v.abs())),
            Generator::PiecewiseBilateral { negative, positive } => {
                return negative.max_magnitude().max_ext(positive.max_magnitude())
            }
            Generator::Table { values, .. } | Generator::StepFunction { values, .. } => {
                values.iter().fold(0.0f64, |a, v| a.max(v.abs()))
            }
        };
        ExtReal::from_f64(m)
    }

    /// Exact `lim_{n→∞} |w_{-n} ⋯ w_{-1}|` when the generator forces it.
    fn backward_limit(&self) -> Option<ExtReal> {
        let by_magnitude = |m: f64| {
            Some(if m < 1.0 {
                ExtReal::Finite(0.0)
            } else if m == 1.0 {
                ExtReal::Finite(1.0)
            } else {
                ExtReal::PosInf
            })
        };
        match self {
            Generator::Constant { value } => by_magnitude(value.abs()),
            Generator::Geometric { r } => by_magnitude(*r),
            Generator::Periodic { block } => {
                let len = block.len() as i64;
                let log_p: f64 = block.iter().map(|v| ln_abs(*v)).sum();
                if log_p.abs() <= 1e-12 {
                    let mut min = 1.0f64;
                    for r in 1..len {
                        let v = self.log_window(-r, r as u64).ok()?.exp();
                        min = min.min(v);
                    }
                    Some(ExtReal::Finite(min))
                } else if log_p < 0.0 {
                    Some(ExtReal::Finite(0.0))
                } else {
                    Some(ExtReal::PosInf)
                }
            }
            Generator::PiecewiseBilateral { negative, .. } => negative.backward_limit(),
            Generator::Table {
                values, frontier, ..
            } => match frontier {
                Frontier::Zero => Some(ExtReal::Finite(0.0)),
                Frontier::Hold => values.first().and_then(|v| by_magnitude(v.abs())),
                Frontier::Error => None,
            },
            _ => None,
        }
    }
}

trait MaxExt {
    fn max_ext(self, other: Self) -> Self;
}

impl MaxExt for ExtReal {
    fn max_ext(self, other: Self) -> Self {
        if self >= other {
            self
        } else {
            other
        }
    }
}

fn table_value(values: &[f64], origin: i64, frontier: Frontier, i: i64) -> Result<f64> {
    let k = i - origin;
    if k >= 0 && (k as usize) < values.len() {
        return Ok(values[k as usize]);
    }
    match frontier {
        Frontier::Zero => Ok(0.0),
        Frontier::Error => Err(Error::IndexOutOfDomain { index: i }),
        Frontier::Hold => {
            if values.is_empty() {
                Ok(0.0)
            } else if k < 0 {
                Ok(values[0])
            } else {
                Ok(values[values.len() - 1])
            }
        }
    }
}

impl WeightSpec {
    pub fn new(domain: Domain, generator: Generator) -> Result<Self> {
        let s = Self {
            domain,
            generator,
            magnitude_only: true,
        };
        s.validate()?;
        Ok(s)
    }

    pub fn unilateral(generator: Generator) -> Result<Self> {
        Self::new(Domain::Unilateral, generator)
    }

    pub fn bilateral(generator: Generator) -> Result<Self> {
        Self::new(Domain::Bilateral, generator)
    }

    pub fn constant(domain: Domain, value: f64) -> Self {
        Self::new(domain, Generator::Constant { value }).expect("finite constant")
    }

    pub fn ratio_power(q: f64) -> Result<Self> {
        Self::unilateral(Generator::RatioPower { q })
    }

    pub fn piecewise(negative: Generator, positive: Generator) -> Result<Self> {
        Self::bilateral(Generator::PiecewiseBilateral {
            negative: Box::new(negative),
            positive: Box::new(positive),
        })
    }

    pub fn table(domain: Domain, values: Vec<f64>, origin: i64, frontier: Frontier) -> Result<Self> {
        Self::new(
            domain,
            Generator::Table {
                values,
                origin,
                frontier,
            },
        )
    }

    pub fn validate(&self) -> Result<()> {
        self.generator.validate(self.domain, None)
    }

    /// Stable identifier of the spec, used to key caches.
    pub fn spec_id(&self) -> u64 {
        let mut h = DefaultHasher::new();
        format!("{self:?}").hash(&mut h);
        h.finish()
    }

    pub fn is_bilateral(&self) -> bool {
        self.domain == Domain::Bilateral
    }

    /// Whether the generator has closed-form window products and suprema.
    pub fn is_analytic(&self) -> bool {
        self.generator.half_sup(1, Side::Positive).is_ok()
            && match &self.generator {
                Generator::PiecewiseBilateral { negative, .. } => {
                    negative.half_sup(1, Side::Negative).is_ok()
                }
                _ => true,
            }
    }

    /// Largest weight magnitude; tables with huge entries are accepted and
    /// can be flagged through this value.
    pub fn max_weight_magnitude(&self) -> ExtReal {
        self.generator.max_magnitude()
    }

    fn check_index(&self, i: i64) -> Result<()> {
        if self.domain == Domain::Unilateral && i < 1 {
            return Err(Error::IndexOutOfDomain { index: i });
        }
        Ok(())
    }

    /// Signed weight `w_i`.
    pub fn weight(&self, i: i64) -> Result<f64> {
        self.check_index(i)?;
        let v = self.generator.signed(i)?;
        if !v.is_finite() {
            return Err(Error::NonFiniteWeight { index: i });
        }
        Ok(v)
    }

    /// `|w_i|`.
    pub fn magnitude(&self, i: i64) -> Result<f64> {
        Ok(self.weight(i)?.abs())
    }

    /// `ln|w_i ⋯ w_{i+n-1}|`, `-inf` when a factor vanishes.
    pub fn log_window_product(&self, i: i64, n: u64) -> Result<f64> {
        if n == 0 {
            return Ok(0.0);
        }
        self.check_index(i)?;
        let v = self.generator.log_window(i, n)?;
        if v.is_nan() {
            return Err(Error::NonFiniteWeight { index: i });
        }
        Ok(v)
    }

    /// `|w_i ⋯ w_{i+n-1}|`.
    pub fn window_product(&self, i: i64, n: u64) -> Result<f64> {
        Ok(self.log_window_product(i, n)?.exp())
    }

    /// `|w_{i-n} ⋯ w_{i-1}|`; zero for unilateral specs when `n ≥ i`.
    pub fn backward_window_product(&self, i: i64, n: u64) -> Result<f64> {
        if n == 0 {
            return Ok(1.0);
        }
        let start = i - n as i64;
        if self.domain == Domain::Unilateral && start < 1 {
            return Ok(0.0);
        }
        self.window_product(start, n)
    }

    /// `ln|w_{i-n} ⋯ w_{i-1}|`; `-inf` for unilateral specs when `n ≥ i`.
    pub fn log_backward_window_product(&self, i: i64, n: u64) -> Result<f64> {
        if n == 0 {
            return Ok(0.0);
        }
        let start = i - n as i64;
        if self.domain == Domain::Unilateral && start < 1 {
            return Ok(f64::NEG_INFINITY);
        }
        self.log_window_product(start, n)
    }

    /// `sup_i |w_i ⋯ w_{i+n-1}|` with its first attaining index.
    ///
    /// Bilateral families whose supremum is attained on an unbounded set of
    /// indices report the first attaining index of a canonical period
    /// (`0` for constants).
    pub fn sup_window_product(&self, n: u64, scan: Scan) -> Result<SupWindow> {
        if n == 0 {
            return Err(Error::InvalidSpec("window length must be positive".into()));
        }
        match scan {
            Scan::Exact => {
                let (log_v, witness) = self.exact_log_sup(n)?;
                Ok(SupWindow {
                    value: ExtReal::from_f64(log_v.exp()),
                    witness,
                    exact: true,
                })
            }
            Scan::Range { lo, hi } => {
                let lo = if self.domain == Domain::Unilateral { lo.max(1) } else { lo };
                if lo > hi {
                    return Err(Error::InvalidSpec("empty scan range".into()));
                }
                let mut best: Option<(f64, i64)> = None;
                for i in lo..=hi {
                    match self.log_window_product(i, n) {
                        Ok(v) => {
                            if best.is_none_or(|(b, _)| v > b) {
                                best = Some((v, i));
                            }
                        }
                        Err(Error::IndexOutOfDomain { .. }) => continue,
                        Err(e) => return Err(e),
                    }
                }
                let (v, w) = best.ok_or(Error::IndexOutOfDomain { index: lo })?;
                Ok(SupWindow {
                    value: ExtReal::from_f64(v.exp()),
                    witness: w,
                    exact: false,
                })
            }
        }
    }

    fn exact_log_sup(&self, n: u64) -> Result<(f64, i64)> {
        let g = &self.generator;
        match (self.domain, g) {
            (_, Generator::Table { .. } | Generator::StepFunction { .. }) => {
                Err(Error::ExactUnavailable)
            }
            (Domain::Unilateral, _) => g.half_sup(n, Side::Positive),
            (Domain::Bilateral, Generator::Constant { .. } | Generator::Geometric { .. }) => {
                Ok((g.log_window(0, n)?, 0))
            }
            (Domain::Bilateral, Generator::Periodic { .. }) => g.half_sup(n, Side::Positive),
            (Domain::Bilateral, Generator::PiecewiseBilateral { negative, positive }) => {
                let mut cands = vec![negative.half_sup(n, Side::Negative)?];
                for i in (2 - n as i64)..=0 {
                    cands.push((g.log_window(i, n)?, i));
                }
                cands.push(positive.half_sup(n, Side::Positive)?);
                let mut best = cands[0];
                for c in cands.into_iter().skip(1) {
                    if c.0 > best.0 || (c.0 == best.0 && c.1 < best.1) {
                        best = c;
                    }
                }
                Ok(best)
            }
            _ => Err(Error::ExactUnavailable),
        }
    }

    /// Finite-horizon view of `liminf_n |w_{-n} ⋯ w_{-1}|`.
    pub fn liminf_backward_products(&self, horizon: u64) -> Result<BackwardLiminf> {
        if self.domain != Domain::Bilateral {
            return Err(Error::DomainMismatch(
                "backward products at the origin need a bilateral spec".into(),
            ));
        }
        let horizon = horizon.max(1);
        let mut min = f64::INFINITY;
        for n in horizon.div_ceil(2)..=horizon {
            let v = self.backward_window_product(0, n)?;
            min = min.min(v);
        }
        Ok(BackwardLiminf {
            running_min_tail: min,
            exact_limit: self.generator.backward_limit(),
        })
    }
}

/// Memo of log window products for one spec; safe for concurrent use.
#[derive(Debug)]
pub struct WindowProductCache {
    spec: WeightSpec,
    spec_id: u64,
    memo: Mutex<HashMap<(i64, u64), f64>>,
}

impl WindowProductCache {
    pub fn new(spec: WeightSpec) -> Self {
        let spec_id = spec.spec_id();
        Self {
            spec,
            spec_id,
            memo: Mutex::new(HashMap::new()),
        }
    }

    pub fn spec_id(&self) -> u64 {
        self.spec_id
    }

    pub fn len(&self) -> usize {
        self.memo.lock().expect("cache lock").len()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn log_window_product(&self, i: i64, n: u64) -> Result<f64> {
        if let Some(v) = self.memo.lock().expect("cache lock").get(&(i, n)) {
            return Ok(*v);
        }
        let v = self.spec.log_window_product(i, n)?;
        self.memo.lock().expect("cache lock").insert((i, n), v);
        Ok(v)
    }
}
