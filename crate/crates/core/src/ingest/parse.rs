//! Registry CSV parsing and fiscal-year snapshots.

use std::collections::HashSet;
use std::io::Read;

use chrono::NaiveDate;
use serde::{Deserialize, Serialize};

use super::schema::{normalize_label, RegionAliases, Schema};
use crate::error::{Error, Result};
use crate::exec;

const PARSE_CHUNK: usize = 4096;

/// Registration status of a firm at extraction time.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub enum Status {
    Active,
    Other(String),
}

impl Status {
    pub fn as_str(&self) -> &str {
        match self {
            Status::Active => "ACTV",
            Status::Other(s) => s,
        }
    }
}

/// One validated registry row.
///
/// `paid_up_capital` is stored in minor currency units (hundredths), parsed
/// exactly from the decimal text; aggregation therefore never touches
/// floating point. `nic2` is the two-character industry class derived from
/// `nic_full`.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct FirmRecord {
    pub firm_id: String,
    pub region: String,
    pub nic_full: String,
    pub nic2: String,
    pub incorporation_date: NaiveDate,
    pub status: Status,
    pub paid_up_capital: u64,
}

/// Result of classifying a raw NIC code at the two-digit level.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Nic2 {
    Class(String),
    /// Category "00" (unclassified) or a code that does not start with two digits.
    Excluded,
}

/// Why a row was rejected.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum RejectReason {
    MalformedRow,
    MissingFirmId,
    DuplicateFirmId,
    EmptyRegion,
    UnknownRegion,
    ExcludedIndustry,
    BadIndustry,
    BadDate,
    MissingCapital,
    NegativeCapital,
    BadCapital,
}

impl RejectReason {
    pub fn as_str(&self) -> &'static str {
        match self {
            RejectReason::MalformedRow => "MalformedRow",
            RejectReason::MissingFirmId => "MissingFirmId",
            RejectReason::DuplicateFirmId => "DuplicateFirmId",
            RejectReason::EmptyRegion => "EmptyRegion",
            RejectReason::UnknownRegion => "UnknownRegion",
            RejectReason::ExcludedIndustry => "ExcludedIndustry",
            RejectReason::BadIndustry => "BadIndustry",
            RejectReason::BadDate => "BadDate",
            RejectReason::MissingCapital => "MissingCapital",
            RejectReason::NegativeCapital => "NegativeCapital",
            RejectReason::BadCapital => "BadCapital",
        }
    }
}

/// A rejected input row: 1-based data row number, reason, and the offending value.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct RejectRow {
    pub row: u64,
    pub reason: RejectReason,
    pub detail: String,
}

/// Everything `parse_registry` produces. `rows_read = records + rejects`.
#[derive(Debug, Clone)]
pub struct ParseOutcome {
    pub records: Vec<FirmRecord>,
    pub rejects: Vec<RejectRow>,
    pub rows_read: u64,
}

/// Two-digit industry class from a raw NIC code.
///
/// Takes the first two characters after trimming, left-padding single-digit
/// codes with "0". Codes in class "00" and codes that do not start with
/// digits are `Excluded`.
pub fn derive_nic2(nic_full: &str) -> Nic2 {
    let trimmed = nic_full.trim();
    let mut chars = trimmed.chars();
    let class: String = match (chars.next(), chars.next()) {
        (None, _) => return Nic2::Excluded,
        (Some(a), None) => {
            if !a.is_ascii_digit() {
                return Nic2::Excluded;
            }
            format!("0{a}")
        }
        (Some(a), Some(b)) => {
            if !a.is_ascii_digit() || !b.is_ascii_digit() {
                return Nic2::Excluded;
            }
            format!("{a}{b}")
        }
    };
    if class == "00" {
        Nic2::Excluded
    } else {
        Nic2::Class(class)
    }
}

/// Parse a money amount into exact minor units (hundredths).
///
/// Accepts an optional fractional part of up to two digits and ignores comma
/// group separators. Anything with a leading minus is `NegativeCapital`.
fn parse_capital_minor(raw: &str) -> std::result::Result<u64, RejectReason> {
    let cleaned: String = raw.trim().chars().filter(|c| *c != ',').collect();
    if cleaned.is_empty() {
        return Err(RejectReason::MissingCapital);
    }
    if cleaned.starts_with('-') {
        return Err(RejectReason::NegativeCapital);
    }
    let (int_part, frac_part) = match cleaned.split_once('.') {
        Some((i, f)) => (i, f),
        None => (cleaned.as_str(), ""),
    };
    if int_part.is_empty() && frac_part.is_empty() {
        return Err(RejectReason::BadCapital);
    }
    if !int_part.chars().all(|c| c.is_ascii_digit())
        || !frac_part.chars().all(|c| c.is_ascii_digit())
        || frac_part.len() > 2
    {
        return Err(RejectReason::BadCapital);
    }
    let major: u64 = if int_part.is_empty() {
        0
    } else {
        int_part.parse().map_err(|_| RejectReason::BadCapital)?
    };
    let minor: u64 = match frac_part.len() {
        0 => 0,
        1 => frac_part.parse::<u64>().unwrap() * 10,
        _ => frac_part.parse::<u64>().unwrap(),
    };
    major
        .checked_mul(100)
        .and_then(|m| m.checked_add(minor))
        .ok_or(RejectReason::BadCapital)
}

fn parse_date(raw: &str, formats: &[String]) -> Option<NaiveDate> {
    let trimmed = raw.trim();
    formats
        .iter()
        .find_map(|f| NaiveDate::parse_from_str(trimmed, f).ok())
}

struct ColumnIndices {
    firm_id: usize,
    region: usize,
    nic: usize,
    incorporation_date: usize,
    status: usize,
    paid_up_capital: usize,
}

fn resolve_columns(headers: &csv::StringRecord, schema: &Schema) -> Result<ColumnIndices> {
    let find = |name: &str| -> Result<usize> {
        headers
            .iter()
            .position(|h| h.trim().eq_ignore_ascii_case(name.trim()))
            .ok_or_else(|| Error::MissingColumn(name.to_string()))
    };
    Ok(ColumnIndices {
        firm_id: find(&schema.firm_id)?,
        region: find(&schema.region)?,
        nic: find(&schema.nic)?,
        incorporation_date: find(&schema.incorporation_date)?,
        status: find(&schema.status)?,
        paid_up_capital: find(&schema.paid_up_capital)?,
    })
}

fn parse_row(
    row_number: u64,
    record: &csv::StringRecord,
    cols: &ColumnIndices,
    schema: &Schema,
    aliases: Option<&RegionAliases>,
) -> std::result::Result<FirmRecord, RejectRow> {
    let reject = |reason: RejectReason, detail: &str| RejectRow {
        row: row_number,
        reason,
        detail: detail.to_string(),
    };
    let field = |idx: usize| record.get(idx).unwrap_or("").trim();

    let firm_id = field(cols.firm_id);
    if firm_id.is_empty() {
        return Err(reject(RejectReason::MissingFirmId, ""));
    }

    let raw_region = field(cols.region);
    if raw_region.is_empty() {
        return Err(reject(RejectReason::EmptyRegion, ""));
    }
    let region = match aliases {
        Some(table) => match table.resolve(raw_region) {
            Some(canonical) => canonical.to_string(),
            None => return Err(reject(RejectReason::UnknownRegion, raw_region)),
        },
        None => normalize_label(raw_region),
    };

    let nic_full = field(cols.nic);
    if nic_full.is_empty() {
        return Err(reject(RejectReason::BadIndustry, ""));
    }
    let nic2 = match derive_nic2(nic_full) {
        Nic2::Class(c) => c,
        Nic2::Excluded => return Err(reject(RejectReason::ExcludedIndustry, nic_full)),
    };

    let raw_date = field(cols.incorporation_date);
    let incorporation_date = match parse_date(raw_date, &schema.date_formats) {
        Some(d) => d,
        None => return Err(reject(RejectReason::BadDate, raw_date)),
    };

    let raw_status = field(cols.status);
    let status = if schema.is_active_status(raw_status) {
        Status::Active
    } else {
        Status::Other(raw_status.to_string())
    };

    let raw_capital = field(cols.paid_up_capital);
    let paid_up_capital = match parse_capital_minor(raw_capital) {
        Ok(v) => v,
        Err(reason) => return Err(reject(reason, raw_capital)),
    };

    Ok(FirmRecord {
        firm_id: firm_id.to_string(),
        region,
        nic_full: nic_full.to_string(),
        nic2,
        incorporation_date,
        status,
        paid_up_capital,
    })
}

/// Parse a registry CSV into records and rejects.
///
/// The header is resolved against `schema` case-insensitively; a missing
/// mapped column or an input without data rows is fatal. Rows are parsed in
/// chunks (in parallel when the `parallel` feature is on) and reassembled in
/// input order, then duplicate `firm_id`s are rejected keeping the first
/// occurrence, so the outcome never depends on thread scheduling.
pub fn parse_registry<R: Read>(
    source: R,
    schema: &Schema,
    aliases: Option<&RegionAliases>,
) -> Result<ParseOutcome> {
    let mut reader = csv::ReaderBuilder::new()
        .flexible(true)
        .trim(csv::Trim::None)
        .from_reader(source);

    let headers = reader
        .headers()
        .map_err(|_| Error::EmptyInput)?
        .clone();
    if headers.is_empty() || (headers.len() == 1 && headers[0].trim().is_empty()) {
        return Err(Error::EmptyInput);
    }
    let cols = resolve_columns(&headers, schema)?;

    let rows: Vec<std::result::Result<csv::StringRecord, String>> = reader
        .into_records()
        .map(|r| r.map_err(|e| e.to_string()))
        .collect();
    if rows.is_empty() {
        return Err(Error::EmptyInput);
    }
    let rows_read = rows.len() as u64;

    let numbered: Vec<(u64, std::result::Result<csv::StringRecord, String>)> = rows
        .into_iter()
        .enumerate()
        .map(|(i, r)| (i as u64 + 1, r))
        .collect();

    let chunks: Vec<&[(u64, std::result::Result<csv::StringRecord, String>)]> =
        numbered.chunks(PARSE_CHUNK).collect();
    let parsed_chunks: Vec<Vec<(u64, std::result::Result<FirmRecord, RejectRow>)>> =
        exec::map(&chunks, |chunk| {
            chunk
                .iter()
                .map(|(row_number, row)| {
                    let parsed = match row {
                        Ok(record) => parse_row(*row_number, record, &cols, schema, aliases),
                        Err(detail) => Err(RejectRow {
                            row: *row_number,
                            reason: RejectReason::MalformedRow,
                            detail: detail.clone(),
                        }),
                    };
                    (*row_number, parsed)
                })
                .collect()
        });

    let mut records = Vec::new();
    let mut rejects = Vec::new();
    let mut seen_ids: HashSet<String> = HashSet::new();
    for (row_number, item) in parsed_chunks.into_iter().flatten() {
        match item {
            Ok(record) => {
                if seen_ids.insert(record.firm_id.clone()) {
                    records.push(record);
                } else {
                    rejects.push(RejectRow {
                        row: row_number,
                        reason: RejectReason::DuplicateFirmId,
                        detail: record.firm_id,
                    });
                }
            }
            Err(reject) => rejects.push(reject),
        }
    }

    debug_assert_eq!(rows_read as usize, records.len() + rejects.len());
    Ok(ParseOutcome {
        records,
        rejects,
        rows_read,
    })
}

/// Keep only records with `Status::Active`; returns the dropped count.
pub fn filter_active(records: Vec<FirmRecord>) -> (Vec<FirmRecord>, usize) {
    let before = records.len();
    let kept: Vec<FirmRecord> = records
        .into_iter()
        .filter(|r| r.status == Status::Active)
        .collect();
    let dropped = before - kept.len();
    (kept, dropped)
}

/// A fiscal-year snapshot boundary.
///
/// A firm belongs to fiscal year `Y` when it was incorporated strictly before
/// the cutoff date (April 1 of `Y` by default) and is active at extraction.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub struct SnapshotSpec {
    pub fiscal_year: i32,
    pub cutoff: NaiveDate,
}

impl SnapshotSpec {
    pub fn new(fiscal_year: i32, cutoff_month_day: (u32, u32)) -> Result<Self> {
        let (month, day) = cutoff_month_day;
        let cutoff = NaiveDate::from_ymd_opt(fiscal_year, month, day).ok_or_else(|| {
            Error::Config(format!(
                "invalid fiscal cutoff {month:02}-{day:02} for year {fiscal_year}"
            ))
        })?;
        Ok(SnapshotSpec {
            fiscal_year,
            cutoff,
        })
    }

    /// April 1 of the fiscal year.
    pub fn april_first(fiscal_year: i32) -> Self {
        Self::new(fiscal_year, super::DEFAULT_FISCAL_CUTOFF)
            .expect("April 1 exists in every year")
    }
}

/// Records incorporated strictly before the snapshot cutoff.
///
/// Expects an already active-filtered input; status is evaluated at
/// extraction only, so earlier snapshots are projections of the current
/// active set.
pub fn snapshot<'a>(records: &'a [FirmRecord], spec: &SnapshotSpec) -> Vec<&'a FirmRecord> {
    records
        .iter()
        .filter(|r| r.incorporation_date < spec.cutoff)
        .collect()
}
