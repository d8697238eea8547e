use opchaos_core::{AtomicSystem, IndexSet, SetFamily, TailBound};
use serde::{Deserialize, Serialize};
use std::path::{Path, PathBuf};

#[derive(Debug, thiserror::Error)]
pub enum ConfigError {
    #[error("cannot read {path}: {source}")]
    Io {
        path: PathBuf,
        source: std::io::Error,
    },
    #[error("{file}: at {pointer}: {message}")]
    Schema {
        file: String,
        pointer: String,
        message: String,
    },
    #[error("{0}")]
    Invalid(String),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize, clap::ValueEnum)]
#[serde(rename_all = "kebab-case")]
pub enum PropertyName {
    PowerBounded,
    LiYorke,
    DistributionalChaos,
    DenselyDistributionalChaos,
    AbsolutelyCesaroBounded,
    MeanLiYorke,
}

impl PropertyName {
    pub fn as_str(self) -> &'static str {
        match self {
            PropertyName::PowerBounded => "power-bounded",
            PropertyName::LiYorke => "li-yorke",
            PropertyName::DistributionalChaos => "distributional-chaos",
            PropertyName::DenselyDistributionalChaos => "densely-distributional-chaos",
            PropertyName::AbsolutelyCesaroBounded => "absolutely-cesaro-bounded",
            PropertyName::MeanLiYorke => "mean-li-yorke",
        }
    }
}

/// Matched against a verdict: a status name, or `holds` / `refuted` /
/// `undecided` for the truth value.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, clap::ValueEnum)]
#[serde(rename_all = "kebab-case")]
pub enum Expectation {
    Holds,
    Refuted,
    Undecided,
    ExactByClosedForm,
    CertifiedByTheorem,
    SupportedAtHorizon,
    RefutedAtHorizon,
    Inconclusive,
}

impl Expectation {
    pub fn matches(self, v: &opchaos_core::Verdict) -> bool {
        use opchaos_core::Status;
        match self {
            Expectation::Holds => v.holds == Some(true),
            Expectation::Refuted => v.holds == Some(false),
            Expectation::Undecided => v.holds.is_none(),
            Expectation::ExactByClosedForm => v.status == Status::ExactByClosedForm,
            Expectation::CertifiedByTheorem => v.status == Status::CertifiedByTheorem,
            Expectation::SupportedAtHorizon => v.status == Status::SupportedAtHorizon,
            Expectation::RefutedAtHorizon => v.status == Status::RefutedAtHorizon,
            Expectation::Inconclusive => v.status == Status::Inconclusive,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct Horizons {
    /// Largest atom index scanned in infinite families.
    pub index_max: i64,
    /// Cesàro horizon `N`.
    pub cesaro_n: u64,
    /// Orbit length.
    pub orbit_n: u64,
    /// Iterate-norm horizon for power boundedness and distributional checks.
    pub norm_n: u64,
}

impl Default for Horizons {
    fn default() -> Self {
        Self {
            index_max: 100_000,
            cesaro_n: 10_000,
            orbit_n: 1_000,
            norm_n: 1_000,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct JobConfig {
    pub system: AtomicSystem,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub properties: Vec<PropertyName>,
    #[serde(default)]
    pub horizons: Horizons,
    /// Distributional-chaos certificate file, relative to the config.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub certificate: Option<PathBuf>,
    /// Sets `A_n` for the summable-ratio test.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub family: Option<SetFamily>,
    /// Sets for the mean Li-Yorke family conditions.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub mean_li_yorke_sets: Option<Vec<Vec<i64>>>,
    /// Wandering set for dense distributional chaos.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub wandering_set: Option<Vec<i64>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub index_set: Option<IndexSet>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub tail: Option<TailBound>,
    /// Refutes power boundedness once an iterate norm exceeds it.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub power_bound: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub cesaro_exponent: Option<f64>,
    /// Orbit start as `[atom, coefficient]` pairs.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub vector: Option<Vec<(i64, f64)>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub output: Option<PathBuf>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub csv: Option<PathBuf>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub expect: Vec<Expectation>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub seed: Option<u64>,
}

/// JSON pointer for a deserialization path.
fn pointer(path: &serde_path_to_error::Path) -> String {
    use serde_path_to_error::Segment;
    let mut out = String::new();
    for seg in path.iter() {
        let part = match seg {
            Segment::Seq { index } => index.to_string(),
            Segment::Map { key } => key.replace('~', "~0").replace('/', "~1"),
            Segment::Enum { variant } => variant.clone(),
            Segment::Unknown => "?".into(),
        };
        out.push('/');
        out.push_str(&part);
    }
    if out.is_empty() {
        out.push('/');
    }
    out
}

/// Parses JSON into `T`, reporting failures with a JSON pointer.
pub fn parse_json<T: serde::de::DeserializeOwned>(text: &str, file: &str) -> Result<T, ConfigError> {
    let de = &mut serde_json::Deserializer::from_str(text);
    serde_path_to_error::deserialize(de).map_err(|e| ConfigError::Schema {
        file: file.to_string(),
        pointer: pointer(e.path()),
        message: e.inner().to_string(),
    })
}

pub fn read_json<T: serde::de::DeserializeOwned>(path: &Path) -> Result<T, ConfigError> {
    let text = std::fs::read_to_string(path).map_err(|source| ConfigError::Io {
        path: path.to_path_buf(),
        source,
    })?;
    parse_json(&text, &path.display().to_string())
}

impl JobConfig {
    /// Loads a config and resolves its relative paths against its directory.
    pub fn load(path: &Path) -> Result<Self, ConfigError> {
        let mut cfg: JobConfig = read_json(path)?;
        let base = path.parent().unwrap_or(Path::new("."));
        if let Some(c) = &cfg.certificate {
            if c.is_relative() {
                cfg.certificate = Some(base.join(c));
            }
        }
        Ok(cfg)
    }
}
