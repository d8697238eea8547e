use serde::{Deserialize, Serialize};

/// A subset of `ℕ = {1, 2, …}` decidable up to some horizon.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case", deny_unknown_fields)]
pub enum IndexSet {
    /// `bits[k]` tells whether `k + 1` belongs; nothing beyond `bits.len()`.
    ExplicitBitset { bits: Vec<bool> },
    /// `preperiod` covers `1..=preperiod.len()`, then `period` repeats.
    EventuallyPeriodic { preperiod: Vec<bool>, period: Vec<bool> },
    /// `n` belongs when `series[n-1]` is above (or below) `threshold`.
    Predicate {
        series: Vec<f64>,
        threshold: f64,
        #[serde(default)]
        below: bool,
    },
}

impl IndexSet {
    /// All of `ℕ`.
    pub fn all() -> Self {
        IndexSet::EventuallyPeriodic {
            preperiod: vec![],
            period: vec![true],
        }
    }

    pub fn evens() -> Self {
        IndexSet::EventuallyPeriodic {
            preperiod: vec![],
            period: vec![false, true],
        }
    }

    /// A finite set, stored as eventually zero.
    pub fn finite(members: &[u64]) -> Self {
        let top = members.iter().copied().max().unwrap_or(0) as usize;
        let mut pre = vec![false; top];
        for &m in members {
            if m >= 1 {
                pre[m as usize - 1] = true;
            }
        }
        IndexSet::EventuallyPeriodic {
            preperiod: pre,
            period: vec![false],
        }
    }

    pub fn from_fn(horizon: u64, f: impl Fn(u64) -> bool) -> Self {
        IndexSet::ExplicitBitset {
            bits: (1..=horizon).map(f).collect(),
        }
    }

    pub fn contains(&self, n: u64) -> bool {
        if n == 0 {
            return false;
        }
        let k = (n - 1) as usize;
        match self {
            IndexSet::ExplicitBitset { bits } => bits.get(k).copied().unwrap_or(false),
            IndexSet::EventuallyPeriodic { preperiod, period } => {
                if k < preperiod.len() {
                    preperiod[k]
                } else if period.is_empty() {
                    false
                } else {
                    period[(k - preperiod.len()) % period.len()]
                }
            }
            IndexSet::Predicate {
                series,
                threshold,
                below,
            } => series.get(k).is_some_and(|v| if *below { v < threshold } else { v > threshold }),
        }
    }

    /// Largest `n` for which membership is stored rather than extrapolated.
    pub fn decidable_horizon(&self) -> Option<u64> {
        match self {
            IndexSet::ExplicitBitset { bits } => Some(bits.len() as u64),
            IndexSet::EventuallyPeriodic { .. } => None,
            IndexSet::Predicate { series, .. } => Some(series.len() as u64),
        }
    }

    /// `card(D ∩ [1, n])`, in closed form for eventually periodic sets.
    pub fn count_upto(&self, n: u64) -> u64 {
        match self {
            IndexSet::EventuallyPeriodic { preperiod, period } => {
                let pre = preperiod.len() as u64;
                let head = preperiod.iter().take(n.min(pre) as usize).filter(|b| **b).count() as u64;
                if n <= pre || period.is_empty() {
                    return head;
                }
                let rest = n - pre;
                let len = period.len() as u64;
                let ones = period.iter().filter(|b| **b).count() as u64;
                let partial = period.iter().take((rest % len) as usize).filter(|b| **b).count() as u64;
                head + (rest / len) * ones + partial
            }
            _ => (1..=n).filter(|m| self.contains(*m)).count() as u64,
        }
    }

    /// Members in `[1, n]`, ascending.
    pub fn members_upto(&self, n: u64) -> Vec<u64> {
        (1..=n).filter(|m| self.contains(*m)).collect()
    }

    /// `(lower, upper)` density for eventually periodic sets.
    pub fn exact_density(&self) -> Option<(f64, f64)> {
        match self {
            IndexSet::EventuallyPeriodic { period, .. } => {
                let d = if period.is_empty() {
                    0.0
                } else {
                    period.iter().filter(|b| **b).count() as f64 / period.len() as f64
                };
                Some((d, d))
            }
            _ => None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DensityEstimate {
    pub horizon: u64,
    pub lower_stat: f64,
    pub upper_stat: f64,
    pub exact: Option<(f64, f64)>,
}

/// Extremes of `card(D ∩ [1, n]) / n` over the tail half `⌈H/2⌉ ≤ n ≤ H`.
pub fn density_estimate(d: &IndexSet, horizon: u64) -> DensityEstimate {
    let exact = d.exact_density();
    if horizon == 0 {
        return DensityEstimate {
            horizon,
            lower_stat: 0.0,
            upper_stat: 0.0,
            exact,
        };
    }
    let start = horizon.div_ceil(2).max(1);
    let mut count = d.count_upto(start - 1);
    let mut lo = f64::INFINITY;
    let mut hi = f64::NEG_INFINITY;
    for n in start..=horizon {
        if d.contains(n) {
            count += 1;
        }
        let r = count as f64 / n as f64;
        lo = lo.min(r);
        hi = hi.max(r);
    }
    DensityEstimate {
        horizon,
        lower_stat: lo,
        upper_stat: hi,
        exact,
    }
}

/// `card(D ∩ [1, n])` for every `n ≤ horizon`, by testing each index.
pub fn brute_density_counts(d: &IndexSet, horizon: u64) -> Vec<u64> {
    let mut out = Vec::with_capacity(horizon as usize);
    let mut c = 0;
    for n in 1..=horizon {
        if d.contains(n) {
            c += 1;
        }
        out.push(c);
    }
    out
}
