//! Stylized facts of financial correlation matrices and a comparative
//! report between a reference set and a candidate set.

pub mod hierarchy;
pub mod mst;
pub mod power_law;
pub mod report;
pub mod spectrum;
pub mod stats;

pub use hierarchy::hierarchy_score;
pub use mst::{mst, MstEdge, MstSummary};
pub use power_law::{power_law_fit, PowerLawFit, PowerLawOptions};
pub use report::{stylized_report, ReportConfig, StylizedFactsReport, Thresholds};
pub use spectrum::{
    eigen_spectrum, marchenko_pastur_density, perron_frobenius_check, MarchenkoPasturParams,
    PerronFrobenius, SpectrumSummary,
};
pub use stats::{ks_two_sample, pairwise_stats, Histogram, KsResult, PairwiseStats};
