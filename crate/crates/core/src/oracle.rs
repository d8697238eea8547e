//! Brute-force checks on dense truncations: matrix powers, direct norm
//! maximization and exhaustive counting.

use crate::error::{Error, Result};
use crate::norms::iterate_norm;
use crate::numeric::rel_diff;
use crate::system::{build_shift_system, AtomicSystem, SpaceKind};
use crate::weight::{Domain, Frontier, WeightSpec};
use nalgebra::DMatrix;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use std::collections::{BTreeSet, HashMap};

pub const DEFAULT_DENSE_CAP: usize = 2048;
pub const DEFAULT_SEED: u64 = 0x5eed_0001;

/// One-step matrix `M[x][y] = w(x)` when `f(x) = y`, restricted to a window.
#[derive(Debug, Clone)]
pub struct DenseTruncation {
    pub dim: usize,
    pub matrix: DMatrix<f64>,
    /// Row/column `k` is atom `basis[k]`.
    pub basis: Vec<i64>,
    index: HashMap<i64, usize>,
}

impl DenseTruncation {
    pub fn position(&self, x: i64) -> Option<usize> {
        self.index.get(&x).copied()
    }

    /// `M^n` by repeated multiplication.
    pub fn power(&self, n: u64) -> DMatrix<f64> {
        let mut out = DMatrix::identity(self.dim, self.dim);
        for _ in 0..n {
            out = &out * &self.matrix;
        }
        out
    }
}

pub fn dense_truncation(system: &AtomicSystem, lo: i64, hi: i64) -> Result<DenseTruncation> {
    dense_truncation_with_cap(system, lo, hi, DEFAULT_DENSE_CAP)
}

pub fn dense_truncation_with_cap(system: &AtomicSystem, lo: i64, hi: i64, cap: usize) -> Result<DenseTruncation> {
    if hi < lo {
        return Err(Error::InvalidSpec(format!("empty window [{lo}, {hi}]")));
    }
    let span = (hi - lo + 1) as usize;
    if span > cap {
        return Err(Error::WindowTooLarge { dim: span, cap });
    }
    let basis: Vec<i64> = (lo..=hi).filter(|x| system.contains(*x)).collect();
    let index: HashMap<i64, usize> = basis.iter().enumerate().map(|(k, x)| (*x, k)).collect();
    let dim = basis.len();
    let mut matrix = DMatrix::zeros(dim, dim);
    for (r, &x) in basis.iter().enumerate() {
        if let Some(&c) = index.get(&system.image(x)?) {
            matrix[(r, c)] = system.weight_at(x)?;
        }
    }
    Ok(DenseTruncation {
        dim,
        matrix,
        basis,
        index,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BruteNorm {
    pub n: u64,
    pub value: f64,
    /// Largest singular value of the mass-scaled clean block, `p = 2` only.
    pub singular_value: Option<f64>,
    /// Rows or columns free of truncation effects.
    pub clean: usize,
}

/// Column `y` is clean when every `n`-step preimage lies in the window.
fn clean_columns(trunc: &DenseTruncation, system: &AtomicSystem, n: u64) -> Result<Vec<usize>> {
    let mut out = Vec::new();
    for (c, &y) in trunc.basis.iter().enumerate() {
        if system
            .preimages_n(y, n)?
            .iter()
            .all(|(z, _)| trunc.position(*z).is_some())
        {
            out.push(c);
        }
    }
    Ok(out)
}

/// Row `x` is clean when `f^j(x)` stays in the window for `j ≤ n`.
fn clean_rows(trunc: &DenseTruncation, system: &AtomicSystem, n: u64) -> Result<Vec<usize>> {
    let mut out = Vec::new();
    'rows: for (r, &x) in trunc.basis.iter().enumerate() {
        let mut y = x;
        for _ in 0..n {
            y = system.image(y)?;
            if trunc.position(y).is_none() {
                continue 'rows;
            }
        }
        out.push(r);
    }
    Ok(out)
}

/// Operator norm of `T^n` read off the matrix power: weighted column
/// `ℓ^p` norms in `L^p`, maximal row sum in the sup norm.
pub fn brute_norm_of_power(
    trunc: &DenseTruncation,
    system: &AtomicSystem,
    power: &DMatrix<f64>,
    n: u64,
) -> Result<BruteNorm> {
    match system.space() {
        SpaceKind::SupNorm => {
            let rows = clean_rows(trunc, system, n)?;
            if rows.is_empty() {
                return Err(Error::BoundaryContamination);
            }
            let value = rows
                .iter()
                .map(|&r| power.row(r).iter().map(|v| v.abs()).sum::<f64>())
                .fold(0.0, f64::max);
            Ok(BruteNorm {
                n,
                value,
                singular_value: None,
                clean: rows.len(),
            })
        }
        SpaceKind::Lp { p } => {
            let cols = clean_columns(trunc, system, n)?;
            if cols.is_empty() {
                return Err(Error::BoundaryContamination);
            }
            let mass: Vec<f64> = trunc.basis.iter().map(|x| system.mass_at(*x)).collect::<Result<_>>()?;
            let mut value = 0.0f64;
            for &c in &cols {
                let s: f64 = (0..trunc.dim).map(|r| mass[r] * power[(r, c)].abs().powf(p)).sum();
                value = value.max((s / mass[c]).powf(1.0 / p));
            }
            let singular_value = if p == 2.0 {
                let scaled = DMatrix::from_fn(trunc.dim, cols.len(), |r, k| {
                    let c = cols[k];
                    power[(r, c)] * (mass[r] / mass[c]).sqrt()
                });
                Some(scaled.singular_values().max())
            } else {
                None
            };
            Ok(BruteNorm {
                n,
                value,
                singular_value,
                clean: cols.len(),
            })
        }
    }
}

pub fn brute_norm(trunc: &DenseTruncation, system: &AtomicSystem, n: u64) -> Result<BruteNorm> {
    brute_norm_of_power(trunc, system, &trunc.power(n), n)
}

/// `brute_norm` for `n = 1..=n_max`, one multiplication per step.
pub fn brute_norm_series(trunc: &DenseTruncation, system: &AtomicSystem, n_max: u64) -> Result<Vec<BruteNorm>> {
    let mut power = DMatrix::identity(trunc.dim, trunc.dim);
    let mut out = Vec::with_capacity(n_max as usize);
    for n in 1..=n_max {
        power = &power * &trunc.matrix;
        out.push(brute_norm_of_power(trunc, system, &power, n)?);
    }
    Ok(out)
}

/// `card{1 ≤ n ≤ N : pred(n)}` by exhaustive scan.
pub fn brute_count(n_max: u64, pred: impl Fn(u64) -> bool) -> u64 {
    (1..=n_max).filter(|n| pred(*n)).count() as u64
}

/// Ratios `Σ_j b_j μ_n(f^{-n}(B_j)) / Σ_j b_j μ(B_j)` for `n = 1..=N` from a
/// dense orbit of `g = Σ_j b_j^{1/p} 1_{B_j}` on the window `[lo, hi]`, and
/// the count of ratios above `k`.
pub fn brute_weighted_ratio_count(
    system: &AtomicSystem,
    window: (i64, i64),
    sets: &[Vec<i64>],
    coefficients: &[f64],
    n_max: u64,
    k: f64,
) -> Result<(u64, Vec<f64>)> {
    let p = system.space().p().ok_or(Error::SupNormMismatch)?;
    if sets.len() != coefficients.len() {
        return Err(Error::InvalidSpec("sets and coefficients differ in length".into()));
    }
    let (lo, hi) = window;
    let atoms: Vec<i64> = (lo..=hi).filter(|x| system.contains(*x)).collect();
    let index: HashMap<i64, usize> = atoms.iter().enumerate().map(|(k, x)| (*x, k)).collect();
    let mut g = vec![0.0f64; atoms.len()];
    let mut support = BTreeSet::new();
    let mut denom = 0.0;
    for (b, c) in sets.iter().zip(coefficients) {
        for &x in b {
            let Some(&ix) = index.get(&x) else {
                return Err(Error::BoundaryContamination);
            };
            if !support.insert(x) {
                return Err(Error::InvalidSpec(format!("atom {x} appears in two sets")));
            }
            g[ix] = c.powf(1.0 / p);
            denom += c * system.mass_at(x)?;
        }
    }
    // Atoms outside the window that feed the support within N steps would be missed.
    for &x in &atoms {
        if system.preimages(x).iter().all(|z| index.contains_key(z)) {
            continue;
        }
        let mut y = x;
        for _ in 0..n_max {
            if support.contains(&y) {
                return Err(Error::BoundaryContamination);
            }
            y = system.image(y)?;
        }
    }
    let weights: Vec<f64> = atoms.iter().map(|x| system.weight_at(*x)).collect::<Result<_>>()?;
    let mass: Vec<f64> = atoms.iter().map(|x| system.mass_at(*x)).collect::<Result<_>>()?;
    let image: Vec<Option<usize>> = atoms
        .iter()
        .map(|x| system.image(*x).map(|y| index.get(&y).copied()))
        .collect::<Result<_>>()?;
    let mut v = g;
    let mut next = vec![0.0f64; atoms.len()];
    let mut ratios = Vec::with_capacity(n_max as usize);
    for _ in 0..n_max {
        for r in 0..atoms.len() {
            next[r] = image[r].map_or(0.0, |c| weights[r] * v[c]);
        }
        std::mem::swap(&mut v, &mut next);
        let num: f64 = if p == 1.0 {
            v.iter().zip(&mass).map(|(a, m)| m * a.abs()).sum()
        } else if p == 2.0 {
            v.iter().zip(&mass).map(|(a, m)| m * a * a).sum()
        } else {
            v.iter().zip(&mass).map(|(a, m)| m * a.abs().powf(p)).sum()
        };
        ratios.push(num / denom);
    }
    let count = ratios.iter().filter(|r| **r > k).count() as u64;
    Ok((count, ratios))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OracleCase {
    pub case: usize,
    pub space: SpaceKind,
    pub n: u64,
    pub closed: f64,
    pub brute: f64,
    pub rel_delta: f64,
    pub singular_delta: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OracleReport {
    pub seed: u64,
    pub cases: usize,
    pub length: usize,
    pub n_max: u64,
    pub tolerance: f64,
    pub max_rel_delta: f64,
    pub comparisons: Vec<OracleCase>,
    pub passes: bool,
}

/// Seeded unilateral table with weights uniform in `[lo, hi]`.
pub fn random_table(rng: &mut impl Rng, length: usize, lo: f64, hi: f64) -> Result<WeightSpec> {
    let values = (0..length).map(|_| rng.random_range(lo..=hi)).collect();
    WeightSpec::table(Domain::Unilateral, values, 1, Frontier::Zero)
}

/// `iterate_norm` against `brute_norm` on seeded random tables in `ℓ^1`,
/// `ℓ^2` and the sup norm.
pub fn random_table_check(seed: u64, cases: usize, length: usize, n_max: u64, tolerance: f64) -> Result<OracleReport> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let specs: Vec<WeightSpec> = (0..cases)
        .map(|_| random_table(&mut rng, length, 0.1, 3.0))
        .collect::<Result<_>>()?;
    let spaces = [SpaceKind::Lp { p: 1.0 }, SpaceKind::Lp { p: 2.0 }, SpaceKind::SupNorm];
    let mut comparisons = Vec::new();
    for (case, spec) in specs.into_iter().enumerate() {
        for space in spaces {
            let system = build_shift_system(spec.clone(), space, None)?;
            let trunc = dense_truncation(&system, 1, length as i64 + n_max as i64 + 1)?;
            for b in brute_norm_series(&trunc, &system, n_max)? {
                let closed = iterate_norm(&system, b.n)?.value.to_f64();
                comparisons.push(OracleCase {
                    case,
                    space,
                    n: b.n,
                    closed,
                    brute: b.value,
                    rel_delta: rel_diff(closed, b.value),
                    singular_delta: b.singular_value.map(|s| rel_diff(s, b.value)),
                });
            }
        }
    }
    let max_rel_delta = comparisons
        .iter()
        .flat_map(|c| std::iter::once(c.rel_delta).chain(c.singular_delta))
        .fold(0.0, f64::max);
    Ok(OracleReport {
        seed,
        cases,
        length,
        n_max,
        tolerance,
        max_rel_delta,
        passes: max_rel_delta <= tolerance,
        comparisons,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::classify::bayart_certificate;
    use crate::system::{ExplicitAtom, Structure};

    fn shift(values: Vec<f64>, space: SpaceKind) -> AtomicSystem {
        let spec = WeightSpec::table(Domain::Unilateral, values, 1, Frontier::Zero).unwrap();
        build_shift_system(spec, space, None).unwrap()
    }

    #[test]
    fn shift_matrix_is_superdiagonal() {
        let s = shift(vec![2.0, 3.0, 5.0], SpaceKind::Lp { p: 1.0 });
        let t = dense_truncation(&s, 1, 4).unwrap();
        assert_eq!(t.dim, 4);
        for r in 0..4 {
            for c in 0..4 {
                let want = if c == r + 1 { [2.0, 3.0, 5.0][r] } else { 0.0 };
                assert_eq!(t.matrix[(r, c)], want);
            }
        }
    }

    #[test]
    fn permutation_matrix_scaled_by_weights() {
        let atoms = vec![
            ExplicitAtom { id: 1, image: 2, mass: 1.0, weight: 2.0 },
            ExplicitAtom { id: 2, image: 3, mass: 1.0, weight: 3.0 },
            ExplicitAtom { id: 3, image: 1, mass: 1.0, weight: 4.0 },
        ];
        let s = AtomicSystem::new(Structure::ExplicitFinite { atoms }, SpaceKind::SupNorm).unwrap();
        let t = dense_truncation(&s, 1, 3).unwrap();
        assert_eq!(t.matrix[(0, 1)], 2.0);
        assert_eq!(t.matrix[(1, 2)], 3.0);
        assert_eq!(t.matrix[(2, 0)], 4.0);
        assert_eq!(t.matrix.iter().filter(|v| **v != 0.0).count(), 3);
        assert_eq!(brute_norm(&t, &s, 3).unwrap().value, 24.0);
    }

    #[test]
    fn constant_two_square_and_norm() {
        let spec = WeightSpec::constant(Domain::Unilateral, 2.0);
        let s = build_shift_system(spec, SpaceKind::Lp { p: 1.0 }, None).unwrap();
        let t = dense_truncation(&s, 1, 3).unwrap();
        let sq = t.power(2);
        assert_eq!(sq[(0, 2)], 4.0);
        assert_eq!(sq.iter().filter(|v| **v != 0.0).count(), 1);
        let t = dense_truncation(&s, 1, 20).unwrap();
        assert_eq!(brute_norm(&t, &s, 5).unwrap().value, 32.0);
        assert_eq!(iterate_norm(&s, 5).unwrap().value.to_f64(), 32.0);
        let one = build_shift_system(WeightSpec::constant(Domain::Unilateral, 1.0), SpaceKind::SupNorm, None).unwrap();
        let t = dense_truncation(&one, 1, 20).unwrap();
        assert_eq!(brute_norm(&t, &one, 7).unwrap().value, 1.0);
    }

    #[test]
    fn random_table_singular_values_agree() {
        let mut rng = ChaCha8Rng::seed_from_u64(DEFAULT_SEED);
        let spec = random_table(&mut rng, 16, 0.1, 3.0).unwrap();
        let s = build_shift_system(spec, SpaceKind::Lp { p: 2.0 }, None).unwrap();
        let t = dense_truncation(&s, 1, 20).unwrap();
        let b = brute_norm(&t, &s, 3).unwrap();
        let cube = t.power(3);
        let max_entry = cube.iter().map(|v| v.abs()).fold(0.0, f64::max);
        assert!(rel_diff(b.value, max_entry) < 1e-12);
        assert!(rel_diff(b.singular_value.unwrap(), b.value) < 1e-9);
        assert!(rel_diff(iterate_norm(&s, 3).unwrap().value.to_f64(), b.value) < 1e-9);
    }

    #[test]
    fn window_cap_and_contamination() {
        let s = shift(vec![1.0; 8], SpaceKind::SupNorm);
        assert_eq!(
            dense_truncation_with_cap(&s, 1, 100, 50).unwrap_err(),
            Error::WindowTooLarge { dim: 100, cap: 50 }
        );
        let t = dense_truncation(&s, 1, 3).unwrap();
        assert_eq!(brute_norm(&t, &s, 5).unwrap_err(), Error::BoundaryContamination);
    }

    #[test]
    fn counting() {
        assert_eq!(brute_count(10, |_| false), 0);
        assert_eq!(brute_count(10, |_| true), 10);
        assert_eq!(brute_count(10, |n| n % 3 == 0), 3);
    }

    #[test]
    fn bayart_window_count() {
        let spec = WeightSpec::ratio_power(1.0).unwrap();
        let s = build_shift_system(spec, SpaceKind::Lp { p: 1.0 }, None).unwrap();
        let stage = &bayart_certificate(&[3]).stages[0];
        let (count, ratios) =
            brute_weighted_ratio_count(&s, (1, 84), &stage.sets, &stage.coefficients, stage.horizon, 3.0).unwrap();
        assert_eq!(count, 43);
        assert_eq!(brute_count(56, |n| n >= 28 && ratios[n as usize - 1] > 3.0), 29);
    }

    #[test]
    fn small_oracle_run_passes() {
        let r = random_table_check(DEFAULT_SEED, 3, 12, 6, 1e-9).unwrap();
        assert!(r.passes, "{}", r.max_rel_delta);
        assert_eq!(r.comparisons.len(), 3 * 3 * 6);
    }

    mod props {
        use super::*;
        use proptest::prelude::*;

        proptest! {
            #![proptest_config(ProptestConfig::with_cases(32))]
            #[test]
            fn power_associativity(values in proptest::collection::vec(0.1f64..3.0, 4..12), n in 0u64..5, m in 0u64..5) {
                let s = shift(values.clone(), SpaceKind::Lp { p: 1.0 });
                let t = dense_truncation(&s, 1, values.len() as i64 + 2).unwrap();
                let a = t.power(n + m);
                let b = t.power(n) * t.power(m);
                for (x, y) in a.iter().zip(b.iter()) {
                    prop_assert_eq!(*x == 0.0, *y == 0.0);
                    prop_assert!((x - y).abs() <= 1e-12 * x.abs().max(1.0));
                }
            }
        }
    }
}
