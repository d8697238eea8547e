//! Iterate norms, Cesàro bounds and certificate-checked chaos criteria for
//! weighted shifts, weighted translations and weighted composition operators
//! on atomic measure spaces.

pub mod classify;
pub mod error;
pub mod family;
pub mod norms;
pub mod numeric;
pub mod oracle;
pub mod orbit;
pub mod system;
pub mod weight;

pub use classify::{
    bayart_certificate, classify_acb, classify_dissipative_ddc, classify_li_yorke, classify_mean_li_yorke,
    classify_power_bounded, dc_certificate_check, dc_density_criterion, dcsum_test, subspace_boundedness_check,
    AcbOptions, Certificate, DcCertificate, DcStage, Property, Status, SubspaceMode, Verdict, Witness,
};
pub use error::{Error, Result};
pub use family::{SetFamily, TailBound};
pub use norms::{
    cesaro_mean_series, formula_gap_report, iterate_norm, iterate_norm_with, jensen_check, norm_series,
    norm_series_with, np_cesaro, CesaroBoundReport, CesaroOptions, ClosedForm, FormulaGapReport, GapCheckpoint,
    GapConfig, NormSeries, NormValue, ScanOptions,
};
pub use numeric::{CompensatedSum, ExtReal};
pub use oracle::{
    brute_count, brute_norm, brute_norm_series, brute_weighted_ratio_count, dense_truncation, random_table_check,
    BruteNorm, DenseTruncation, OracleReport,
};
pub use orbit::{
    apply_operator, construct_dc_vector, construct_ddc_vector, density_estimate, irregularity_report,
    orbit_norm_series, DensityEstimate, IndexSet, OrbitSeries, SparseVector, Truncation,
};
pub use system::{
    build_shift_system, reduce_translation, translation_cells, AtomRegion, AtomicSystem, BoundednessReport,
    ExplicitAtom, HopfPartition, SpaceKind, Structure,
};
pub use weight::{BackwardLiminf, Domain, Frontier, Generator, Scan, SupWindow, WeightSpec, WindowProductCache};
