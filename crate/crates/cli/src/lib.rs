//! Command-line front end: JSON job configs in, JSON reports and CSV series out.

pub mod config;
pub mod report;

use clap::{Args, Parser, Subcommand};
use config::{read_json, ConfigError, Expectation, JobConfig, PropertyName};
use opchaos_core::classify::{classify_acb, classify_dissipative_ddc, classify_li_yorke, classify_mean_li_yorke};
use opchaos_core::classify::{classify_power_bounded_with, dc_certificate_check, dc_density_criterion, dcsum_test};
use opchaos_core::norms::{np_cesaro, norm_series_with, CesaroOptions, ScanOptions};
use opchaos_core::oracle::{brute_weighted_ratio_count, random_table_check, DEFAULT_SEED};
use opchaos_core::orbit::{
    brute_density_counts, density_estimate, irregularity_report, orbit_norm_series, IrregularityThresholds,
};
use opchaos_core::{
    bayart_certificate, AcbOptions, AtomicSystem, DcCertificate, IndexSet, SetFamily, SparseVector, SpaceKind,
    Structure, Verdict,
};
use serde::Serialize;
use std::ffi::OsString;
use std::path::{Path, PathBuf};

pub const EXIT_OK: i32 = 0;
pub const EXIT_OTHER: i32 = 1;
pub const EXIT_CONFIG: i32 = 2;
pub const EXIT_MISMATCH: i32 = 3;

#[derive(Debug, thiserror::Error)]
pub enum CliError {
    #[error(transparent)]
    Config(#[from] ConfigError),
    #[error("{0}")]
    Core(#[from] opchaos_core::Error),
    #[error("{0}")]
    Io(#[from] std::io::Error),
    #[error("{0}")]
    Mismatch(String),
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Config(_) => EXIT_CONFIG,
            CliError::Core(opchaos_core::Error::MalformedCertificate(_) | opchaos_core::Error::InvalidSpec(_)) => {
                EXIT_CONFIG
            }
            CliError::Mismatch(_) => EXIT_MISMATCH,
            _ => EXIT_OTHER,
        }
    }
}

#[derive(Debug, Parser)]
#[command(name = "opchaos", version, about = "Iterate norms and chaos verdicts for weighted shift and composition operators")]
pub struct Cli {
    /// Worker threads; 1 gives byte-identical reports.
    #[arg(long, global = true, env = "OPCHAOS_THREADS")]
    pub threads: Option<usize>,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Args)]
pub struct Common {
    /// Job config (JSON).
    #[arg(long)]
    pub config: PathBuf,
    /// Report path; stdout when absent.
    #[arg(long)]
    pub output: Option<PathBuf>,
    /// Overrides `horizons.index_max`
    #[arg(long)]
    pub index_max: Option<i64>,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Evaluate properties and emit verdicts with certificates.
    Classify {
        #[command(flatten)]
        common: Common,
        #[arg(long = "property", value_enum)]
        properties: Vec<PropertyName>,
        /// Distributional-chaos certificate (JSON).
        #[arg(long)]
        certificate: Option<PathBuf>,
        /// Expected outcome, one per property or one for all.
        #[arg(long = "expect", value_enum)]
        expect: Vec<Expectation>,
        /// Overrides `horizons.cesaro_n`
        #[arg(long)]
        cesaro_n: Option<u64>,
        /// Overrides `horizons.norm_n`
        #[arg(long)]
        norm_n: Option<u64>,
    },
    /// Iterate norms `‖T^n‖` for `n = 1..=n_max`.
    Norms {
        #[command(flatten)]
        common: Common,
        #[arg(long, default_value_t = 20)]
        n_max: u64,
        /// Include the Cesàro statistic.
        #[arg(long)]
        cesaro: bool,
        #[arg(long)]
        csv: Option<PathBuf>,
    },
    /// Orbit norms and Cesàro means of a finitely supported vector.
    Orbit {
        #[command(flatten)]
        common: Common,
        #[arg(long)]
        n_max: Option<u64>,
        /// Start from the basis vector at this atom.
        #[arg(long)]
        basis: Option<i64>,
        #[arg(long)]
        csv: Option<PathBuf>,
    },
    /// Replay a distributional-chaos certificate.
    Certificate {
        #[command(flatten)]
        common: Common,
        /// Certificate file (JSON)
        #[arg(long, conflicts_with = "bayart")]
        certificate: Option<PathBuf>,
        /// Stages of the built-in certificate for `w_n = (n+1)/n`.
        #[arg(long, value_delimiter = ',')]
        bayart: Vec<u64>,
        /// Write the certificate that was checked.
        #[arg(long)]
        emit: Option<PathBuf>,
        /// Recount every stage on a dense truncation.
        #[arg(long)]
        brute: bool,
    },
    /// Compare closed-form iterate norms with dense matrix powers.
    OracleCheck {
        #[arg(long, default_value_t = DEFAULT_SEED)]
        seed: u64,
        #[arg(long, default_value_t = 100)]
        cases: usize,
        #[arg(long, default_value_t = 64)]
        length: usize,
        #[arg(long, default_value_t = 16)]
        n_max: u64,
        #[arg(long, default_value_t = 1e-9)]
        tolerance: f64,
        #[arg(long)]
        output: Option<PathBuf>,
    },
    /// Lower and upper density statistics of an index set.
    Density {
        /// Index set (JSON).
        #[arg(long, conflicts_with = "preset")]
        set: Option<PathBuf>,
        #[arg(long, value_enum)]
        preset: Option<Preset>,
        #[arg(long, default_value_t = 1 << 20)]
        horizon: u64,
        #[arg(long)]
        output: Option<PathBuf>,
    },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, clap::ValueEnum)]
pub enum Preset {
    All,
    Evens,
    /// `n` with `⌊log₂ n⌋` even.
    Dyadic,
}

fn load(common: &Common) -> Result<JobConfig, CliError> {
    let mut cfg = JobConfig::load(&common.config)?;
    if let Some(i) = common.index_max {
        cfg.horizons.index_max = i;
    }
    Ok(cfg)
}

fn output_path<'a>(flag: &'a Option<PathBuf>, cfg: &'a JobConfig) -> Option<&'a Path> {
    flag.as_deref().or(cfg.output.as_deref())
}

#[derive(Serialize)]
struct PropertyVerdict {
    property: &'static str,
    verdict: Verdict,
}

#[derive(Serialize)]
struct ExpectationCheck {
    property: &'static str,
    expected: Expectation,
    matched: bool,
}

#[derive(Serialize)]
struct ClassifyReport<'a> {
    command: &'static str,
    system: &'a AtomicSystem,
    horizons: config::Horizons,
    verdicts: Vec<PropertyVerdict>,
    #[serde(skip_serializing_if = "Vec::is_empty")]
    expectations: Vec<ExpectationCheck>,
}

fn classify_one(cfg: &JobConfig, prop: PropertyName, certificate: Option<&Path>) -> Result<Verdict, CliError> {
    let s = &cfg.system;
    let h = cfg.horizons;
    let acb = AcbOptions {
        horizon: h.cesaro_n,
        index_max: h.index_max,
        exponent: cfg.cesaro_exponent,
        bound: None,
    };
    let all = IndexSet::all();
    let d = cfg.index_set.as_ref().unwrap_or(&all);
    Ok(match prop {
        PropertyName::PowerBounded => {
            classify_power_bounded_with(s, h.norm_n, cfg.power_bound, &ScanOptions { index_max: h.index_max })?
        }
        PropertyName::LiYorke => classify_li_yorke(s, h.norm_n)?,
        PropertyName::AbsolutelyCesaroBounded => classify_acb(s, &acb)?,
        PropertyName::MeanLiYorke => classify_mean_li_yorke(s, &acb, cfg.mean_li_yorke_sets.as_deref())?,
        PropertyName::DenselyDistributionalChaos => {
            classify_dissipative_ddc(s, cfg.wandering_set.as_deref(), d, h.norm_n, cfg.tail)?
        }
        PropertyName::DistributionalChaos => {
            if let Some(path) = certificate {
                let cert: DcCertificate = read_json(path)?;
                dc_certificate_check(s, &cert)?
            } else if let (SpaceKind::SupNorm, Structure::Shift { spec, stride: 1, .. }) = (s.space(), s.structure()) {
                dc_density_criterion(spec, 10, h.norm_n, h.index_max)?
            } else {
                let fallback = SetFamily::ShiftedSingletons { offset: 1 };
                let family = cfg.family.as_ref().unwrap_or(&fallback);
                dcsum_test(s, family, d, &all, cfg.tail, h.norm_n)?
            }
        }
    })
}

fn classify(
    common: &Common,
    properties: &[PropertyName],
    certificate: Option<&Path>,
    expect: &[Expectation],
    cesaro_n: Option<u64>,
    norm_n: Option<u64>,
) -> Result<(), CliError> {
    let mut cfg = load(common)?;
    if let Some(n) = cesaro_n {
        cfg.horizons.cesaro_n = n;
    }
    if let Some(n) = norm_n {
        cfg.horizons.norm_n = n;
    }
    let props: Vec<PropertyName> = if properties.is_empty() { cfg.properties.clone() } else { properties.to_vec() };
    let expect: Vec<Expectation> = if expect.is_empty() { cfg.expect.clone() } else { expect.to_vec() };
    if !(expect.is_empty() || expect.len() == 1 || expect.len() == props.len()) {
        return Err(ConfigError::Invalid(format!(
            "{} expectations for {} properties",
            expect.len(),
            props.len()
        ))
        .into());
    }
    let cert = certificate.map(Path::to_path_buf).or_else(|| cfg.certificate.clone());
    let mut verdicts = Vec::new();
    for &p in &props {
        verdicts.push(PropertyVerdict {
            property: p.as_str(),
            verdict: classify_one(&cfg, p, cert.as_deref())?,
        });
    }
    let expectations: Vec<ExpectationCheck> = verdicts
        .iter()
        .enumerate()
        .filter_map(|(k, v)| {
            let e = *expect.get(k).or(if expect.len() == 1 { expect.first() } else { None })?;
            Some(ExpectationCheck {
                property: v.property,
                expected: e,
                matched: e.matches(&v.verdict),
            })
        })
        .collect();
    let report = ClassifyReport {
        command: "classify",
        system: &cfg.system,
        horizons: cfg.horizons,
        verdicts,
        expectations,
    };
    report::emit(&report, output_path(&common.output, &cfg))?;
    let missed: Vec<String> = report
        .expectations
        .iter()
        .filter(|e| !e.matched)
        .map(|e| format!("{}: expected {:?}", e.property, e.expected))
        .collect();
    if missed.is_empty() {
        Ok(())
    } else {
        Err(CliError::Mismatch(missed.join("; ")))
    }
}

fn norms(common: &Common, n_max: u64, cesaro: bool, csv: Option<&Path>) -> Result<(), CliError> {
    let cfg = load(common)?;
    let scan = ScanOptions { index_max: cfg.horizons.index_max };
    let series = norm_series_with(&cfg.system, n_max, &scan)?;
    let cesaro = if cesaro {
        let opts = CesaroOptions {
            horizon: cfg.horizons.cesaro_n,
            index_lo: -cfg.horizons.index_max,
            index_hi: cfg.horizons.index_max,
            exponent: cfg.cesaro_exponent,
        };
        Some(np_cesaro(&cfg.system, &opts)?)
    } else {
        None
    };
    if let Some(path) = csv.or(cfg.csv.as_deref()) {
        let rows = series.values.iter().enumerate().map(|(k, v)| {
            vec![
                (k + 1).to_string(),
                report::fmt_f64(v.to_f64()),
                series.witnesses[k].map(|w| w.to_string()).unwrap_or_default(),
            ]
        });
        report::write_csv(path, &["n", "norm", "witness"], rows)?;
    }
    #[derive(Serialize)]
    struct NormsReport<'a> {
        command: &'static str,
        system: &'a AtomicSystem,
        series: opchaos_core::NormSeries,
        #[serde(skip_serializing_if = "Option::is_none")]
        cesaro: Option<opchaos_core::CesaroBoundReport>,
    }
    let r = NormsReport { command: "norms", system: &cfg.system, series, cesaro };
    report::emit(&r, output_path(&common.output, &cfg))?;
    Ok(())
}

fn orbit(common: &Common, n_max: Option<u64>, basis: Option<i64>, csv: Option<&Path>) -> Result<(), CliError> {
    let cfg = load(common)?;
    let n_max = n_max.unwrap_or(cfg.horizons.orbit_n);
    let y = match (basis, &cfg.vector) {
        (Some(i), _) => SparseVector::basis(i),
        (None, Some(pairs)) => SparseVector::from_pairs(pairs.iter().copied()),
        (None, None) => SparseVector::basis(cfg.system.scan_atoms(0).first().copied().unwrap_or(1)),
    };
    let series = orbit_norm_series(&cfg.system, &y, n_max)?;
    let irregularity = irregularity_report(&series, IrregularityThresholds::default());
    if let Some(path) = csv.or(cfg.csv.as_deref()) {
        let rows = (0..series.norms.len()).map(|k| {
            vec![
                (k + 1).to_string(),
                report::fmt_f64(series.norms[k]),
                report::fmt_f64(series.cesaro[k]),
            ]
        });
        report::write_csv(path, &["n", "norm", "cesaro_mean"], rows)?;
    }
    #[derive(Serialize)]
    struct OrbitReport<'a> {
        command: &'static str,
        system: &'a AtomicSystem,
        start: SparseVector,
        series: opchaos_core::OrbitSeries,
        irregularity: opchaos_core::orbit::IrregularityReport,
    }
    let r = OrbitReport { command: "orbit", system: &cfg.system, start: y, series, irregularity };
    report::emit(&r, output_path(&common.output, &cfg))?;
    Ok(())
}

#[derive(Serialize)]
struct BruteStage {
    k: u64,
    count: u64,
    brute_count: u64,
    agrees: bool,
}

fn certificate(
    common: &Common,
    file: Option<&Path>,
    bayart: &[u64],
    emit: Option<&Path>,
    brute: bool,
) -> Result<(), CliError> {
    let cfg = load(common)?;
    let cert: DcCertificate = match (file.map(Path::to_path_buf).or_else(|| cfg.certificate.clone()), bayart) {
        (Some(p), _) => read_json(&p)?,
        (None, ks) if !ks.is_empty() => bayart_certificate(ks),
        (None, _) => return Err(ConfigError::Invalid("no certificate: pass --certificate or --bayart".into()).into()),
    };
    if let Some(p) = emit {
        report::emit(&cert, Some(p))?;
    }
    let verdict = dc_certificate_check(&cfg.system, &cert)?;
    let mut brute_stages = Vec::new();
    if brute {
        let Some(opchaos_core::Certificate::Distributional(r)) = &verdict.certificate else {
            unreachable!("certificate checks carry their report")
        };
        for (st, chk) in cert.stages.iter().zip(&r.stages) {
            let atoms = st.sets.iter().flatten();
            let lo = atoms.clone().min().copied().unwrap_or(1) - st.horizon as i64;
            let lo = if cfg.system.contains(lo) { lo } else { 1.max(lo) };
            let hi = atoms.max().copied().unwrap_or(1);
            let (count, _) =
                brute_weighted_ratio_count(&cfg.system, (lo, hi), &st.sets, &st.coefficients, st.horizon, st.k as f64)?;
            brute_stages.push(BruteStage { k: st.k, count: chk.count, brute_count: count, agrees: count == chk.count });
        }
    }
    #[derive(Serialize)]
    struct CertificateReport<'a> {
        command: &'static str,
        system: &'a AtomicSystem,
        verdict: Verdict,
        #[serde(skip_serializing_if = "Vec::is_empty")]
        brute: Vec<BruteStage>,
    }
    let r = CertificateReport { command: "certificate", system: &cfg.system, verdict, brute: brute_stages };
    report::emit(&r, output_path(&common.output, &cfg))?;
    if r.brute.iter().any(|b| !b.agrees) {
        return Err(CliError::Mismatch("brute recount disagrees with the certificate check".into()));
    }
    Ok(())
}

fn oracle_check(
    seed: u64,
    cases: usize,
    length: usize,
    n_max: u64,
    tolerance: f64,
    output: Option<&Path>,
) -> Result<(), CliError> {
    let r = random_table_check(seed, cases, length, n_max, tolerance)?;
    report::emit(&r, output)?;
    if r.passes {
        Ok(())
    } else {
        Err(CliError::Mismatch(format!("max relative delta {:e} above {tolerance:e}", r.max_rel_delta)))
    }
}

fn density(set: Option<&Path>, preset: Option<Preset>, horizon: u64, output: Option<&Path>) -> Result<(), CliError> {
    let d: IndexSet = match (set, preset) {
        (Some(p), _) => read_json(p)?,
        (None, Some(Preset::All)) => IndexSet::all(),
        (None, Some(Preset::Evens)) => IndexSet::evens(),
        (None, Some(Preset::Dyadic)) => IndexSet::from_fn(horizon, |n| n.ilog2() % 2 == 0),
        (None, None) => return Err(ConfigError::Invalid("pass --set or --preset".into()).into()),
    };
    let estimate = density_estimate(&d, horizon);
    let brute = brute_density_counts(&d, horizon);
    #[derive(Serialize)]
    struct Checkpoint {
        n: u64,
        count: u64,
        brute_count: u64,
    }
    let checkpoints: Vec<Checkpoint> = (0..64)
        .map(|k| 1u64 << k)
        .take_while(|n| *n <= horizon)
        .chain(std::iter::once(horizon))
        .map(|n| Checkpoint { n, count: d.count_upto(n), brute_count: brute[n as usize - 1] })
        .collect();
    let agrees = checkpoints.iter().all(|c| c.count == c.brute_count);
    #[derive(Serialize)]
    struct DensityReport {
        command: &'static str,
        estimate: opchaos_core::DensityEstimate,
        checkpoints: Vec<Checkpoint>,
        brute_agrees: bool,
    }
    report::emit(&DensityReport { command: "density", estimate, checkpoints, brute_agrees: agrees }, output)?;
    if agrees {
        Ok(())
    } else {
        Err(CliError::Mismatch("closed-form counts disagree with brute counts".into()))
    }
}

fn dispatch(cli: &Cli) -> Result<(), CliError> {
    match &cli.command {
        Command::Classify { common, properties, certificate, expect, cesaro_n, norm_n } => {
            classify(common, properties, certificate.as_deref(), expect, *cesaro_n, *norm_n)
        }
        Command::Norms { common, n_max, cesaro, csv } => norms(common, *n_max, *cesaro, csv.as_deref()),
        Command::Orbit { common, n_max, basis, csv } => orbit(common, *n_max, *basis, csv.as_deref()),
        Command::Certificate { common, certificate: file, bayart, emit, brute } => {
            certificate(common, file.as_deref(), bayart, emit.as_deref(), *brute)
        }
        Command::OracleCheck { seed, cases, length, n_max, tolerance, output } => {
            oracle_check(*seed, *cases, *length, *n_max, *tolerance, output.as_deref())
        }
        Command::Density { set, preset, horizon, output } => density(set.as_deref(), *preset, *horizon, output.as_deref()),
    }
}

/// Runs the CLI and returns the process exit code.
pub fn run<I, T>(argv: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(argv) {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { EXIT_CONFIG } else { EXIT_OK };
        }
    };
    if let Some(n) = cli.threads {
        if let Err(e) = rayon::ThreadPoolBuilder::new().num_threads(n.max(1)).build_global() {
            eprintln!("opchaos: thread pool: {e}");
        }
    }
    match dispatch(&cli) {
        Ok(()) => EXIT_OK,
        Err(e) => {
            eprintln!("opchaos: {e}");
            e.exit_code()
        }
    }
}
