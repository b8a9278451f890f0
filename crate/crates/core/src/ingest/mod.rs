//! Firm-registry ingestion: CSV parsing, validation, normalization and
//! fiscal-year snapshots.
//!
//! Registry exports vary in column naming, date formats, status codes and
//! region spellings, so parsing is driven by a [`Schema`] (column mapping plus
//! parse options) and an optional [`RegionAliases`] table. Well-formed rows
//! become [`FirmRecord`]s; everything else becomes a [`RejectRow`] with a
//! reason code, and `rows read = records + rejects` always holds.

mod parse;
mod schema;

pub use parse::{
    derive_nic2, filter_active, parse_registry, snapshot, FirmRecord, Nic2, ParseOutcome,
    RejectReason, RejectRow, SnapshotSpec, Status,
};
pub use schema::{RegionAliases, Schema};

/// Default fiscal-year cutoff: April 1 (month, day).
pub const DEFAULT_FISCAL_CUTOFF: (u32, u32) = (4, 1);
