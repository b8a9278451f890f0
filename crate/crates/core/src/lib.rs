//! Region-industry economic complexity analytics built from firm-registry data.
//!
//! The pipeline goes: parse registry CSVs into firm records ([`ingest`]),
//! aggregate paid-up capital into a weighted region-industry panel and
//! binarize it through revealed comparative advantage ([`panel`]), then score
//! regions and industries with the spectral complexity index ([`complexity`])
//! and the nonlinear fitness-complexity iteration ([`fitness`]). Statistical
//! fits and rank time series live in [`analytics`]; similarity graphs,
//! spanning trees and matrix ordering in [`netlab`]. [`export`] writes the
//! CSV/JSON artifacts consumed by the CLI.
//!
//! All computations are deterministic: given the same inputs the same bytes
//! come out, whether or not the `parallel` feature (rayon) is enabled.

pub mod analytics;
pub mod complexity;
pub mod error;
pub mod exec;
pub mod export;
pub mod fitness;
pub mod ingest;
pub mod linalg;
pub mod netlab;
pub mod panel;

pub use error::{Error, Result};
