use super::{
    generator_bounded, set_profile, Certificate, Property, Status, Verdict, Witness, VANISH_TOL,
};
use crate::error::{Error, Result};
use crate::family::{SetFamily, TailBound};
use crate::orbit::{construct_dc_vector, construct_ddc_vector, density_estimate, DcVectorPlan, DensityEstimate, DdcVector, IndexSet, Truncation};
use crate::system::{AtomicSystem, SpaceKind, Structure};
use crate::weight::{Domain, Generator, Scan, WeightSpec};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use std::collections::BTreeSet;

/// One stage `k` of a distributional-chaos certificate: sets `B_{i_j}` with
/// coefficients `b_j` and the horizon `N_k`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DcStage {
    pub k: u64,
    pub horizon: u64,
    pub sets: Vec<Vec<i64>>,
    /// Ignored in sup-norm spaces, where each stage holds a single set.
    #[serde(default)]
    pub coefficients: Vec<f64>,
}

fn default_vanish_tol() -> f64 {
    VANISH_TOL
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DcCertificate {
    pub d: IndexSet,
    pub epsilon: f64,
    pub stages: Vec<DcStage>,
    /// Horizon for the vanishing check; defaults to the largest `N_k`.
    #[serde(default)]
    pub vanish_horizon: Option<u64>,
    #[serde(default = "default_vanish_tol")]
    pub vanish_tolerance: f64,
}

/// Stages `k ∈ ks` with `n_k = ⌈k^k⌉ + 1`, `N_k = k n_k`, singletons
/// `{n_k + j}` and `b_j = 1/(n_k + j)` for `j = 1..=(k-1) n_k`.
pub fn bayart_certificate(ks: &[u64]) -> DcCertificate {
    let mut stages = Vec::new();
    let mut top = 0i64;
    for &k in ks {
        let nk = (k as f64).powf(k as f64).ceil() as i64 + 1;
        let r = (k as i64 - 1) * nk;
        let atoms: Vec<i64> = (1..=r).map(|j| nk + j).collect();
        top = top.max(nk + r);
        stages.push(DcStage {
            k,
            horizon: k * nk as u64,
            coefficients: atoms.iter().map(|i| 1.0 / *i as f64).collect(),
            sets: atoms.into_iter().map(|i| vec![i]).collect(),
        });
    }
    let eps = ks.iter().map(|&k| (k as f64 - 2.0) / k as f64).fold(1.0, f64::min);
    DcCertificate {
        d: IndexSet::all(),
        epsilon: eps,
        stages,
        vanish_horizon: Some(2 * top as u64 + 2),
        vanish_tolerance: VANISH_TOL,
    }
}

impl DcCertificate {
    pub fn validate(&self, system: &AtomicSystem) -> Result<()> {
        let bad = |m: String| Err(Error::MalformedCertificate(m));
        if !(self.epsilon > 0.0 && self.epsilon <= 1.0) {
            return bad(format!("epsilon {} outside (0, 1]", self.epsilon));
        }
        if self.stages.is_empty() {
            return bad("no stages".into());
        }
        for w in self.stages.windows(2) {
            if w[1].horizon <= w[0].horizon {
                return bad(format!("N_k not strictly increasing at k = {}", w[1].k));
            }
        }
        for s in &self.stages {
            if s.horizon == 0 || s.sets.is_empty() || s.sets.iter().any(|b| b.is_empty()) {
                return bad(format!("stage {} is empty", s.k));
            }
            if let Some(x) = s.sets.iter().flatten().find(|x| !system.contains(**x)) {
                return bad(format!("atom {x} is not in the system"));
            }
            match system.space() {
                SpaceKind::Lp { .. } => {
                    if s.coefficients.len() != s.sets.len() {
                        return bad(format!("stage {} has {} sets and {} coefficients", s.k, s.sets.len(), s.coefficients.len()));
                    }
                    if s.coefficients.iter().any(|b| !(*b > 0.0 && b.is_finite())) {
                        return bad(format!("stage {} has a nonpositive coefficient", s.k));
                    }
                }
                SpaceKind::SupNorm => {
                    if s.sets.len() != 1 {
                        return bad(format!("stage {} needs exactly one set in a sup-norm space", s.k));
                    }
                }
            }
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StageCheck {
    pub k: u64,
    pub horizon: u64,
    /// `card{1 ≤ n ≤ N_k : ratio(n) > k}`.
    pub count: u64,
    /// `ε N_k`.
    pub required: f64,
    pub margin: f64,
    pub max_ratio: f64,
    pub passes: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct VanishingCheck {
    pub horizon: u64,
    /// Largest `μ_n(f^{-n}(B))` over sets and `n ∈ D` in the tail half.
    pub tail_max: f64,
    /// Every tail value is exactly zero.
    pub exact_zero: bool,
    pub passes: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DcCheckReport {
    pub epsilon: f64,
    pub stages: Vec<StageCheck>,
    pub vanishing: VanishingCheck,
    pub d_density: DensityEstimate,
    pub all_pass: bool,
}

/// `ratio(n)` for `n = 1..=N` on a unit-stride shift with singleton sets,
/// from one table of prefix logs.
fn shift_singleton_ratios(spec: &WeightSpec, p: f64, atoms: &[i64], coef: &[f64], n_max: u64) -> Result<Vec<f64>> {
    let lo_atom = *atoms.iter().min().expect("nonempty");
    let hi = *atoms.iter().max().expect("nonempty");
    let lo = match spec.domain {
        Domain::Unilateral => (lo_atom - n_max as i64).max(1),
        Domain::Bilateral => lo_atom - n_max as i64,
    };
    let mut prefix = Vec::with_capacity((hi - lo + 1) as usize);
    let mut acc = crate::numeric::CompensatedSum::new();
    prefix.push(0.0);
    let mut dead = false;
    for i in lo..hi {
        let m = spec.magnitude(i)?;
        if m == 0.0 {
            dead = true;
        }
        acc.add(if m == 0.0 { 0.0 } else { m.ln() });
        prefix.push(acc.value());
    }
    if dead {
        return Err(Error::NonpositiveWeight { index: lo });
    }
    let denom: f64 = coef.iter().sum();
    Ok((1..=n_max)
        .into_par_iter()
        .map(|n| {
            let mut s = crate::numeric::CompensatedSum::new();
            for (x, b) in atoms.iter().zip(coef) {
                let z = x - n as i64;
                if z < lo {
                    continue;
                }
                let l = prefix[(x - lo) as usize] - prefix[(z - lo) as usize];
                s.add(b * (p * l).exp());
            }
            s.value() / denom
        })
        .collect())
}

/// `ratio(n)` for one stage, `n = 1..=N_k`: weighted `μ_n` ratio in `L^p`,
/// `‖w^{(n)}‖` on the preimage in sup-norm spaces.
pub(crate) fn stage_ratios(system: &AtomicSystem, stage: &DcStage) -> Result<Vec<f64>> {
    let n_max = stage.horizon;
    match system.space() {
        SpaceKind::SupNorm => set_profile(system, &stage.sets[0], n_max),
        SpaceKind::Lp { p } => {
            if let Structure::Shift { spec, stride: 1, .. } = system.structure() {
                if stage.sets.iter().all(|b| b.len() == 1) {
                    let atoms: Vec<i64> = stage.sets.iter().map(|b| b[0]).collect();
                    return shift_singleton_ratios(spec, p, &atoms, &stage.coefficients, n_max);
                }
            }
            let mut num = vec![0.0f64; n_max as usize];
            let mut denom = 0.0;
            for (b, c) in stage.sets.iter().zip(&stage.coefficients) {
                denom += c * system.mass_of(b)?;
                for (k, m) in set_profile(system, b, n_max)?.iter().enumerate() {
                    num[k] += c * m;
                }
            }
            Ok(num.into_iter().map(|x| x / denom).collect())
        }
    }
}

fn vanishing_check(system: &AtomicSystem, sets: &BTreeSet<Vec<i64>>, d: &IndexSet, h: u64, tol: f64) -> Result<VanishingCheck> {
    let start = h.div_ceil(2).max(1);
    let unilateral_shift = matches!(
        system.structure(),
        Structure::Shift { spec, .. } if spec.domain == Domain::Unilateral
    );
    let mut tail_max = 0.0f64;
    for b in sets {
        if unilateral_shift && start as i64 >= *b.iter().max().expect("nonempty") {
            continue;
        }
        let prof = set_profile(system, b, h)?;
        for n in start..=h {
            if d.contains(n) {
                tail_max = tail_max.max(prof[n as usize - 1]);
            }
        }
    }
    Ok(VanishingCheck {
        horizon: h,
        tail_max,
        exact_zero: tail_max == 0.0,
        passes: tail_max <= tol,
    })
}

/// Replays a distributional-chaos certificate: vanishing along `D` and, per
/// stage, the exact count of `n ≤ N_k` with weighted ratio above `k`.
pub fn dc_certificate_check(system: &AtomicSystem, cert: &DcCertificate) -> Result<Verdict> {
    cert.validate(system)?;
    let tag = "distributional-chaos-weighted-ratio-criterion";
    let mut stages = Vec::with_capacity(cert.stages.len());
    for s in &cert.stages {
        let ratios = stage_ratios(system, s)?;
        let count = ratios.iter().filter(|r| **r > s.k as f64).count() as u64;
        let required = cert.epsilon * s.horizon as f64;
        stages.push(StageCheck {
            k: s.k,
            horizon: s.horizon,
            count,
            required,
            margin: count as f64 - required,
            max_ratio: ratios.iter().copied().fold(0.0, f64::max),
            passes: count as f64 >= required,
        });
    }
    let sets: BTreeSet<Vec<i64>> = cert.stages.iter().flat_map(|s| s.sets.iter().cloned()).collect();
    let vh = cert
        .vanish_horizon
        .unwrap_or_else(|| cert.stages.iter().map(|s| s.horizon).max().unwrap_or(1));
    let vanishing = vanishing_check(system, &sets, &cert.d, vh, cert.vanish_tolerance)?;
    let d_density = density_estimate(&cert.d, vh);
    let d_full_exact = d_density.exact.is_some_and(|(_, u)| u == 1.0);
    let all_pass = vanishing.passes && stages.iter().all(|s| s.passes);
    let mut v = if !stages.iter().all(|s| s.passes) {
        Verdict::inconclusive(
            Property::DistributionalChaos,
            vh,
            tag,
            "some stage misses the required count",
        )
    } else if vanishing.passes && vanishing.exact_zero && d_full_exact {
        Verdict::new(Property::DistributionalChaos, Status::CertifiedByTheorem, Some(true), vh, tag)
    } else if vanishing.passes {
        Verdict::new(Property::DistributionalChaos, Status::SupportedAtHorizon, Some(true), vh, tag)
    } else {
        Verdict::inconclusive(
            Property::DistributionalChaos,
            vh,
            tag,
            "set measures do not vanish along D within the horizon",
        )
    };
    for s in &stages {
        v.witnesses.push(
            Witness::new("stage count")
                .at_n(s.horizon)
                .with_value(s.count as f64),
        );
    }
    v.certificate = Some(Certificate::Distributional(Box::new(DcCheckReport {
        epsilon: cert.epsilon,
        stages,
        vanishing,
        d_density,
        all_pass,
    })));
    Ok(v)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DensityCriterionReport {
    pub k_max: u64,
    pub n_max: u64,
    /// `sup_{N ≤ N_max} (1/N) card{n ≤ N : S(n) > k}` for `k = 1..=k_max`.
    pub per_k: Vec<f64>,
    pub statistic: f64,
    pub closed_form: bool,
    pub unbounded: Option<bool>,
    pub backward_limit: Option<crate::numeric::ExtReal>,
}

/// Density statistic of the window suprema `S(n) = sup_i |w_i ⋯ w_{i+n-1}|`
/// for a weighted shift on the sup-norm space.
pub fn dc_density_criterion(spec: &WeightSpec, k_max: u64, n_max: u64, index_max: i64) -> Result<Verdict> {
    let k_max = k_max.max(1);
    let n_max = n_max.max(1);
    let tag = "distributional-chaos-window-supremum-density";
    let mut closed = true;
    let mut s = Vec::with_capacity(n_max as usize);
    for n in 1..=n_max {
        let w = match spec.sup_window_product(n, Scan::Exact) {
            Ok(w) => w,
            Err(Error::ExactUnavailable) => {
                closed = false;
                let lo = if spec.domain == Domain::Bilateral { -index_max } else { 1 };
                spec.sup_window_product(n, Scan::Range { lo, hi: index_max })?
            }
            Err(e) => return Err(e),
        };
        s.push(w.value.to_f64());
    }
    let per_k: Vec<f64> = (1..=k_max)
        .map(|k| {
            let mut count = 0u64;
            let mut best = 0.0f64;
            for (j, v) in s.iter().enumerate() {
                if *v > k as f64 {
                    count += 1;
                }
                best = best.max(count as f64 / (j + 1) as f64);
            }
            best
        })
        .collect();
    let statistic = per_k.iter().copied().fold(f64::INFINITY, f64::min);
    let unbounded = if closed { generator_bounded(&spec.generator, spec.domain).map(|b| !b) } else { None };
    let backward_limit = match spec.domain {
        Domain::Bilateral => spec.liminf_backward_products(n_max)?.exact_limit,
        Domain::Unilateral => None,
    };
    let precondition = match spec.domain {
        Domain::Unilateral => Some(true),
        Domain::Bilateral => backward_limit.map(|l| l == crate::numeric::ExtReal::Finite(0.0)),
    };
    let mut v = match (precondition, unbounded) {
        (Some(false), _) => Verdict::inconclusive(
            Property::DistributionalChaos,
            n_max,
            tag,
            "backward products do not vanish, so this route does not apply",
        ),
        (Some(true), Some(true)) => {
            let mut v = Verdict::new(Property::DistributionalChaos, Status::ExactByClosedForm, Some(true), n_max, tag);
            v.notes.push("window suprema tend to infinity, so every count has density one".into());
            v
        }
        (Some(true), Some(false)) => Verdict::inconclusive(
            Property::DistributionalChaos,
            n_max,
            tag,
            "window suprema stay bounded, so the statistic vanishes for large k",
        ),
        _ if statistic > 0.0 => {
            Verdict::new(Property::DistributionalChaos, Status::SupportedAtHorizon, Some(true), n_max, tag)
        }
        _ => Verdict::inconclusive(Property::DistributionalChaos, n_max, tag, "statistic is zero at horizon"),
    };
    v.witnesses.push(Witness::new("density statistic").at_n(n_max).with_value(statistic));
    v.certificate = Some(Certificate::DensityCriterion(Box::new(DensityCriterionReport {
        k_max,
        n_max,
        per_k,
        statistic,
        closed_form: closed,
        unbounded,
        backward_limit,
    })));
    Ok(v)
}

/// Geometric tail for constant-magnitude shifts, checked against the scanned
/// terms before use.
fn builtin_tail(system: &AtomicSystem, power: f64, scale: f64) -> Option<TailBound> {
    let spec = system.shift_spec()?;
    let c = match spec.generator {
        Generator::Constant { value } => value.abs(),
        Generator::Geometric { r } => r.abs(),
        _ => return None,
    };
    if c > 1.0 {
        Some(TailBound::Geometric {
            c: scale,
            rho: c.powf(-power),
        })
    } else {
        None
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DcSumReport {
    pub vanishing: VanishingCheck,
    pub e_density: DensityEstimate,
    pub d_density: DensityEstimate,
    pub plan: Option<DcVectorPlan>,
}

/// Summability test: vanishing of `μ_n(f^{-n}(A_k))` along `D` and
/// `Σ_{n∈E} (μ(A_n)/μ_n(f^{-n}(A_n)))^{1/p} < ∞`, with the explicit vector
/// construction as certificate.
pub fn dcsum_test(
    system: &AtomicSystem,
    family: &SetFamily,
    d: &IndexSet,
    e: &IndexSet,
    tail: Option<TailBound>,
    horizon: u64,
) -> Result<Verdict> {
    let horizon = horizon.max(2);
    let tag = "distributional-chaos-summable-ratios";
    let sample: BTreeSet<Vec<i64>> = (1..=horizon.min(64)).filter_map(|n| family.set(n)).collect();
    let vanishing = vanishing_check(system, &sample, d, horizon, VANISH_TOL)?;
    let e_density = density_estimate(e, horizon);
    let d_density = density_estimate(d, horizon);
    let tail = tail.or_else(|| builtin_tail(system, 1.0, 1.0));
    let plan = match construct_dc_vector(system, family, e, horizon, tail, Truncation::Auto) {
        Ok(p) => Some(p),
        Err(Error::DivergentASeries) => None,
        Err(err) => return Err(err),
    };
    let e_positive = e_density.exact.map_or(e_density.upper_stat > 0.0, |(_, u)| u > 0.0);
    let d_full = d_density.exact.is_some_and(|(_, u)| u == 1.0);
    let mut v = match &plan {
        None => Verdict::inconclusive(
            Property::DistributionalChaos,
            horizon,
            tag,
            "ratio series does not converge within the horizon",
        ),
        Some(p) if p.tail_verified && p.bound_holds && vanishing.exact_zero && e_positive && d_full => {
            Verdict::new(Property::DistributionalChaos, Status::CertifiedByTheorem, Some(true), horizon, tag)
        }
        Some(p) if p.bound_holds && vanishing.passes && e_positive => {
            Verdict::new(Property::DistributionalChaos, Status::SupportedAtHorizon, Some(true), horizon, tag)
        }
        Some(_) => Verdict::inconclusive(Property::DistributionalChaos, horizon, tag, "hypotheses not met at horizon"),
    };
    if let Some(p) = &plan {
        v.witnesses.push(Witness::new("scanned ratio sum").at_n(horizon).with_value(p.scanned_sum));
    }
    v.certificate = Some(Certificate::DcSum(Box::new(DcSumReport {
        vanishing,
        e_density,
        d_density,
        plan,
    })));
    Ok(v)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DdcReport {
    pub b_prime: Vec<i64>,
    pub dissipative_check: bool,
    pub vanishing: VanishingCheck,
    pub d_density: DensityEstimate,
    pub vector: Option<DdcVector>,
}

/// Dense distributional chaos from a wandering set `B'` in the dissipative
/// part with summable `Σ_{n∈D} ∫_{f^n(B')} v_n^{-p} dμ`.
pub fn classify_dissipative_ddc(
    system: &AtomicSystem,
    b_prime: Option<&[i64]>,
    d: &IndexSet,
    horizon: u64,
    tail: Option<TailBound>,
) -> Result<Verdict> {
    let horizon = horizon.max(2);
    let tag = "dense-distributional-chaos-dissipative-summability";
    let hopf = system.hopf_decompose(horizon)?;
    if hopf.dissipative.is_empty() {
        return Err(Error::NoDissipativePart);
    }
    let b: Vec<i64> = match (b_prime, &hopf.wandering_generator) {
        (Some(b), _) => b.to_vec(),
        (None, Some(w)) => w.iter().copied().collect(),
        (None, None) => {
            return Ok(Verdict::inconclusive(
                Property::DenselyDistributionalChaos,
                horizon,
                tag,
                "no finite wandering generator",
            ))
        }
    };
    let dissipative_check = b.iter().all(|x| hopf.dissipative.contains(*x));
    let unilateral_shift = matches!(
        system.structure(),
        Structure::Shift { spec, .. } if spec.domain == Domain::Unilateral
    );
    let sample: BTreeSet<Vec<i64>> = system.scan_atoms(64).into_iter().take(64).map(|x| vec![x]).collect();
    let mut vanishing = vanishing_check(system, &sample, &IndexSet::all(), horizon, VANISH_TOL)?;
    vanishing.exact_zero &= unilateral_shift;
    let d_density = density_estimate(d, horizon);
    let power = system.space().p().unwrap_or(1.0);
    let mass = match system.space() {
        SpaceKind::Lp { .. } => system.mass_of(&b)?,
        SpaceKind::SupNorm => 1.0,
    };
    let tail = tail.or_else(|| builtin_tail(system, power, mass));
    let (vector, note) = match construct_ddc_vector(system, &b, d, 1, horizon, tail, Truncation::Auto) {
        Ok(v) => (Some(v), None),
        Err(Error::NonInjectiveMap { atom }) => (None, Some(format!("map is not injective at atom {atom}"))),
        Err(Error::DivergentSum) => (None, Some("orbit sum does not converge".to_string())),
        Err(e) => return Err(e),
    };
    let d_positive = d_density.exact.map_or(d_density.upper_stat > 0.0, |(_, u)| u > 0.0);
    let mut v = match &vector {
        None => Verdict::inconclusive(
            Property::DenselyDistributionalChaos,
            horizon,
            tag,
            note.unwrap_or_default(),
        ),
        Some(x)
            if dissipative_check
                && x.tail_verified
                && x.lower_bound_holds
                && vanishing.exact_zero
                && d_density.exact.is_some_and(|(_, u)| u > 0.0) =>
        {
            Verdict::new(Property::DenselyDistributionalChaos, Status::CertifiedByTheorem, Some(true), horizon, tag)
        }
        Some(x) if dissipative_check && x.lower_bound_holds && vanishing.passes && d_positive => {
            Verdict::new(Property::DenselyDistributionalChaos, Status::SupportedAtHorizon, Some(true), horizon, tag)
        }
        Some(_) => Verdict::inconclusive(Property::DenselyDistributionalChaos, horizon, tag, "hypotheses not met at horizon"),
    };
    if let Some(x) = &vector {
        v.witnesses.push(Witness::new("scanned orbit sum").at_n(horizon).with_value(x.scanned_sum));
    }
    v.certificate = Some(Certificate::Dissipative(Box::new(DdcReport {
        b_prime: b,
        dissipative_check,
        vanishing,
        d_density,
        vector,
    })));
    Ok(v)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::numeric::harmonic;
    use crate::system::{build_shift_system, ExplicitAtom};

    fn l1() -> SpaceKind {
        SpaceKind::Lp { p: 1.0 }
    }

    fn bayart() -> AtomicSystem {
        build_shift_system(WeightSpec::ratio_power(1.0).unwrap(), l1(), None).unwrap()
    }

    #[test]
    fn bayart_stage_three() {
        let cert = bayart_certificate(&[3]);
        assert_eq!(cert.stages[0].horizon, 84);
        assert_eq!(cert.stages[0].sets.len(), 56);
        let v = dc_certificate_check(&bayart(), &cert).unwrap();
        assert_eq!((v.status, v.holds), (Status::CertifiedByTheorem, Some(true)));
        let Some(Certificate::Distributional(r)) = &v.certificate else { panic!() };
        assert_eq!(r.stages[0].count, 43);
        let ratios = stage_ratios(&bayart(), &cert.stages[0]).unwrap();
        let in_window = (28..=56).filter(|n| ratios[*n as usize - 1] > 3.0).count();
        assert_eq!(in_window, 29);
        let lower = harmonic(28) / (harmonic(84) - harmonic(28));
        assert!(lower > 3.0);
        assert!((28..=56).all(|n| ratios[n as usize - 1] >= lower * (1.0 - 1e-12)));
    }

    #[test]
    fn failing_and_malformed_certificates() {
        let half = build_shift_system(WeightSpec::constant(Domain::Unilateral, 0.5), l1(), None).unwrap();
        let cert = bayart_certificate(&[3]);
        let v = dc_certificate_check(&half, &cert).unwrap();
        assert_eq!((v.status, v.holds), (Status::Inconclusive, None));
        let mut bad = bayart_certificate(&[3, 4]);
        bad.stages[1].horizon = 10;
        assert!(matches!(dc_certificate_check(&bayart(), &bad), Err(Error::MalformedCertificate(_))));
        let mut bad = bayart_certificate(&[3]);
        bad.epsilon = 0.0;
        assert!(matches!(dc_certificate_check(&bayart(), &bad), Err(Error::MalformedCertificate(_))));
    }

    #[test]
    fn generic_path_matches_singleton_path() {
        let s = bayart();
        let mut stage = bayart_certificate(&[3]).stages.remove(0);
        let fast = stage_ratios(&s, &stage).unwrap();
        stage.sets.push(vec![40, 41]);
        stage.coefficients.push(0.0);
        stage.coefficients.pop();
        stage.sets.pop();
        let sets = stage.sets.clone();
        let coef = stage.coefficients.clone();
        let mut num = vec![0.0; stage.horizon as usize];
        for (b, c) in sets.iter().zip(&coef) {
            for (k, m) in set_profile(&s, b, stage.horizon).unwrap().iter().enumerate() {
                num[k] += c * m;
            }
        }
        let denom: f64 = coef.iter().sum();
        for (a, b) in fast.iter().zip(num) {
            assert!((a - b / denom).abs() <= 1e-12 * a.max(1.0));
        }
    }

    #[test]
    fn density_criterion_examples() {
        let rp = WeightSpec::ratio_power(1.0).unwrap();
        let v = dc_density_criterion(&rp, 5, 200, 1000).unwrap();
        assert_eq!((v.status, v.holds), (Status::ExactByClosedForm, Some(true)));
        let Some(Certificate::DensityCriterion(r)) = &v.certificate else { panic!() };
        assert!((r.per_k[4] - (200.0 - 5.0 + 1.0) / 200.0).abs() < 1e-15);
        let half = WeightSpec::constant(Domain::Unilateral, 0.5);
        let v = dc_density_criterion(&half, 3, 50, 100).unwrap();
        assert_eq!(v.holds, None);
        let Some(Certificate::DensityCriterion(r)) = &v.certificate else { panic!() };
        assert_eq!(r.statistic, 0.0);
        let bi = WeightSpec::constant(Domain::Bilateral, 2.0);
        assert_eq!(dc_density_criterion(&bi, 3, 50, 100).unwrap().status, Status::Inconclusive);
    }

    #[test]
    fn dcsum_examples() {
        let two = build_shift_system(WeightSpec::constant(Domain::Unilateral, 2.0), l1(), None).unwrap();
        let fam = SetFamily::ShiftedSingletons { offset: 1 };
        let v = dcsum_test(&two, &fam, &IndexSet::all(), &IndexSet::all(), None, 200).unwrap();
        assert_eq!((v.status, v.holds), (Status::CertifiedByTheorem, Some(true)));
        let one = build_shift_system(WeightSpec::constant(Domain::Unilateral, 1.0), l1(), None).unwrap();
        let v = dcsum_test(&one, &fam, &IndexSet::all(), &IndexSet::all(), None, 200).unwrap();
        assert_eq!(v.status, Status::Inconclusive);
        let sup = two.with_space(SpaceKind::SupNorm).unwrap();
        let v = dcsum_test(&sup, &fam, &IndexSet::all(), &IndexSet::all(), None, 200).unwrap();
        assert_eq!((v.status, v.holds), (Status::CertifiedByTheorem, Some(true)));
    }

    #[test]
    fn dissipative_examples() {
        let two = build_shift_system(WeightSpec::constant(Domain::Unilateral, 2.0), l1(), None).unwrap();
        let v = classify_dissipative_ddc(&two, Some(&[1]), &IndexSet::all(), 200, None).unwrap();
        assert_eq!((v.status, v.holds), (Status::CertifiedByTheorem, Some(true)));
        let atoms = (0..4)
            .map(|k| ExplicitAtom { id: k, image: (k + 1) % 4, mass: 1.0, weight: 1.0 })
            .collect();
        let perm = AtomicSystem::new(Structure::ExplicitFinite { atoms }, l1()).unwrap();
        assert_eq!(
            classify_dissipative_ddc(&perm, None, &IndexSet::all(), 100, None).unwrap_err(),
            Error::NoDissipativePart
        );
    }
}
