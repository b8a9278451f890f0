//! Error type shared by the whole crate.

use thiserror::Error;

/// Which side of the bipartite matrix a marginal belongs to.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Marginal {
    Region,
    Industry,
}

impl std::fmt::Display for Marginal {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            Marginal::Region => write!(f, "region"),
            Marginal::Industry => write!(f, "industry"),
        }
    }
}

#[derive(Debug, Error)]
pub enum Error {
    #[error("schema error: mapped column `{0}` not found in header")]
    MissingColumn(String),

    #[error("schema error: {0}")]
    Schema(String),

    #[error("input is empty")]
    EmptyInput,

    #[error("config error: {0}")]
    Config(String),

    #[error(transparent)]
    Csv(#[from] csv::Error),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error("cannot build a panel: no records with positive capital")]
    EmptyPanel,

    #[error("{kind} `{label}` has a zero marginal sum; prune the matrix first")]
    ZeroMarginal { kind: Marginal, label: String },

    #[error("matrix is empty after pruning")]
    EmptyAfterPrune,

    #[error("complexity index needs at least 3 {kind} labels, found {found}")]
    TooFewLabels { kind: Marginal, found: usize },

    #[error("degenerate {kind} spectrum: |lambda2 - lambda3| = {gap:.3e} is below tolerance")]
    DegenerateSpectrum { kind: Marginal, gap: f64 },

    #[error("spectral sanity check failed: {0}")]
    SpectralAssertion(String),

    #[error("numerical underflow in fitness iteration at step {iteration}")]
    NumericalUnderflow { iteration: usize },

    #[error("label mismatch: {0}")]
    LabelMismatch(String),

    #[error("similarity graph is disconnected; components: {}", format_components(.components))]
    Disconnected { components: Vec<Vec<String>> },

    #[error("{what} must be positive and finite")]
    NonPositive { what: String },

    #[error("zero variance in {0}")]
    ZeroVariance(String),

    #[error("need at least {needed} {what}, got {got}")]
    TooFewPoints {
        needed: usize,
        got: usize,
        what: String,
    },

    #[error("no points fall inside the fitting window [{lo}, {hi}]")]
    EmptyWindow { lo: f64, hi: f64 },

    #[error("no fiscal year produced a valid complexity index")]
    NoValidYears,
}

fn format_components(components: &[Vec<String>]) -> String {
    components
        .iter()
        .map(|c| format!("{{{}}}", c.join(", ")))
        .collect::<Vec<_>>()
        .join(" ")
}

pub type Result<T> = std::result::Result<T, Error>;

impl Error {
    /// True for errors that stem from bad usage or a broken schema/config,
    /// as opposed to data that fails a computation's preconditions.
    pub fn is_usage(&self) -> bool {
        matches!(
            self,
            Error::MissingColumn(_) | Error::Schema(_) | Error::Config(_) | Error::EmptyInput
        )
    }
}
