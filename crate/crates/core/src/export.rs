//! CSV and JSON writers for every artifact the pipeline emits.
//!
//! Numeric CSV cells use 17 significant digits so every double round-trips
//! exactly; JSON goes through serde with struct-ordered fields. All writers
//! are pure functions of their inputs, which is what makes repeated runs
//! byte-identical.

use std::io::Write;

use serde::Serialize;

use crate::analytics::RankEvolution;
use crate::complexity::ComplexityResult;
use crate::error::Result;
use crate::fitness::{ranks, FitnessResult};
use crate::ingest::{FirmRecord, RejectRow};
use crate::netlab::{OrderedMatrix, SimilarityGraph, Tree};
use crate::panel::{BinaryMatrix, PruneLog, RcaMatrix, RegionIndustryPanel};

/// Lossless float formatting: 17 significant digits.
pub fn fmt_f64(value: f64) -> String {
    format!("{value:.16e}")
}

/// Canonical normalized-records CSV; re-parses with the default schema.
pub fn write_records_csv<W: Write>(writer: &mut W, records: &[FirmRecord]) -> Result<()> {
    writeln!(
        writer,
        "firm_id,region,nic_full,nic2,incorporation_date,status,paid_up_capital"
    )?;
    for r in records {
        writeln!(
            writer,
            "{},{},{},{},{},{},{}.{:02}",
            r.firm_id,
            r.region,
            r.nic_full,
            r.nic2,
            r.incorporation_date.format("%Y-%m-%d"),
            r.status.as_str(),
            r.paid_up_capital / 100,
            r.paid_up_capital % 100,
        )?;
    }
    Ok(())
}

pub fn write_rejects_csv<W: Write>(writer: &mut W, rejects: &[RejectRow]) -> Result<()> {
    let mut csv_writer = csv::Writer::from_writer(writer);
    csv_writer.write_record(["row", "reason", "detail"])?;
    for r in rejects {
        csv_writer.write_record([r.row.to_string().as_str(), r.reason.as_str(), &r.detail])?;
    }
    csv_writer.flush()?;
    Ok(())
}

fn write_labeled_matrix<W: Write, F>(
    writer: &mut W,
    corner: &str,
    row_labels: &[String],
    col_labels: &[String],
    cell: F,
) -> Result<()>
where
    F: Fn(usize, usize) -> String,
{
    writeln!(writer, "{corner},{}", col_labels.join(","))?;
    for (i, row_label) in row_labels.iter().enumerate() {
        let cells: Vec<String> = (0..col_labels.len()).map(|j| cell(i, j)).collect();
        writeln!(writer, "{row_label},{}", cells.join(","))?;
    }
    Ok(())
}

pub fn write_panel_csv<W: Write>(writer: &mut W, panel: &RegionIndustryPanel) -> Result<()> {
    write_labeled_matrix(writer, "region", &panel.regions, &panel.industries, |i, j| {
        fmt_f64(panel.weights[[i, j]])
    })
}

pub fn write_rca_csv<W: Write>(writer: &mut W, rca: &RcaMatrix) -> Result<()> {
    write_labeled_matrix(writer, "region", &rca.regions, &rca.industries, |i, j| {
        fmt_f64(rca.values[[i, j]])
    })
}

pub fn write_binary_csv<W: Write>(writer: &mut W, bm: &BinaryMatrix) -> Result<()> {
    write_labeled_matrix(writer, "region", &bm.regions, &bm.industries, |i, j| {
        bm.m[[i, j]].to_string()
    })
}

pub fn write_similarity_csv<W: Write>(writer: &mut W, graph: &SimilarityGraph) -> Result<()> {
    write_labeled_matrix(writer, "region", &graph.nodes, &graph.nodes, |i, j| {
        fmt_f64(graph.weights[[i, j]])
    })
}

/// Metadata bundled with a serialized panel.
#[derive(Debug, Serialize)]
pub struct PanelEnvelope<'a> {
    pub fiscal_year: i32,
    pub threshold: f64,
    pub snapshot_size: usize,
    pub grand_total: f64,
    pub regions: usize,
    pub industries: usize,
    pub prune: &'a PruneLog,
}

pub fn write_json<W: Write, T: Serialize>(writer: &mut W, value: &T) -> Result<()> {
    serde_json::to_writer_pretty(&mut *writer, value)
        .map_err(|e| crate::error::Error::Schema(format!("json serialization: {e}")))?;
    writeln!(writer)?;
    Ok(())
}

pub fn write_eci_csv<W: Write>(writer: &mut W, result: &ComplexityResult) -> Result<()> {
    writeln!(writer, "region,eci")?;
    for (region, value) in result.regions.iter().zip(&result.eci) {
        writeln!(writer, "{region},{}", fmt_f64(*value))?;
    }
    Ok(())
}

pub fn write_pci_csv<W: Write>(writer: &mut W, result: &ComplexityResult) -> Result<()> {
    writeln!(writer, "industry,pci")?;
    for (industry, value) in result.industries.iter().zip(&result.pci) {
        writeln!(writer, "{industry},{}", fmt_f64(*value))?;
    }
    Ok(())
}

/// Diagnostics block accompanying the complexity CSVs.
#[derive(Debug, Serialize)]
pub struct ComplexityDiagnostics<'a> {
    pub eigenvalues: &'a [f64],
    pub eci_flipped: bool,
    pub pci_flipped: bool,
    /// The orientation convention, spelled out for the reader.
    pub orientation: &'static str,
    pub prune: &'a PruneLog,
}

impl<'a> ComplexityDiagnostics<'a> {
    pub fn new(result: &'a ComplexityResult, prune: &'a PruneLog) -> Self {
        ComplexityDiagnostics {
            eigenvalues: &result.eigenvalues,
            eci_flipped: result.sign_anchor.eci_flipped,
            pci_flipped: result.sign_anchor.pci_flipped,
            orientation: "eci correlates non-negatively with diversification; \
                          pci correlates non-negatively with negative ubiquity",
            prune,
        }
    }
}

pub fn write_fitness_regions_csv<W: Write>(writer: &mut W, result: &FitnessResult) -> Result<()> {
    let ranked = ranks(result);
    writeln!(writer, "region,fitness,rank")?;
    for ((region, value), (_, rank)) in result
        .regions
        .iter()
        .zip(&result.fitness)
        .zip(&ranked.regions)
    {
        writeln!(writer, "{region},{},{rank}", fmt_f64(*value))?;
    }
    Ok(())
}

pub fn write_fitness_industries_csv<W: Write>(
    writer: &mut W,
    result: &FitnessResult,
) -> Result<()> {
    let ranked = ranks(result);
    writeln!(writer, "industry,complexity,rank")?;
    for ((industry, value), (_, rank)) in result
        .industries
        .iter()
        .zip(&result.industry_complexity)
        .zip(&ranked.industries)
    {
        writeln!(writer, "{industry},{},{rank}", fmt_f64(*value))?;
    }
    Ok(())
}

#[derive(Debug, Serialize)]
pub struct FitnessDiagnostics {
    pub iterations_run: usize,
    pub converged: bool,
    pub stable_iterations: usize,
    pub rank_stability_window: usize,
    pub max_iter: usize,
    pub log_domain: bool,
    pub initialization: &'static str,
}

impl FitnessDiagnostics {
    pub fn new(result: &FitnessResult, window: usize, max_iter: usize) -> Self {
        FitnessDiagnostics {
            iterations_run: result.iterations_run,
            converged: result.converged,
            stable_iterations: result.stable_iterations,
            rank_stability_window: window,
            max_iter,
            log_domain: result.log_domain,
            initialization: "uniform",
        }
    }
}

pub fn write_growth_csv<W: Write>(
    writer: &mut W,
    counts: &std::collections::BTreeMap<i32, u64>,
) -> Result<()> {
    writeln!(writer, "fiscal_year,active_firms")?;
    for (year, count) in counts {
        writeln!(writer, "{year},{count}")?;
    }
    Ok(())
}

pub fn write_ccdf_csv<W: Write>(writer: &mut W, points: &[(f64, f64)]) -> Result<()> {
    writeln!(writer, "x,ccdf")?;
    for (x, p) in points {
        writeln!(writer, "{},{}", fmt_f64(*x), fmt_f64(*p))?;
    }
    Ok(())
}

pub fn write_diversification_ubiquity_csv<W: Write>(
    writer: &mut W,
    rows: &[(String, f64, f64)],
) -> Result<()> {
    writeln!(writer, "region,diversification,avg_neighbor_ubiquity")?;
    for (region, k0, k1) in rows {
        writeln!(writer, "{region},{},{}", fmt_f64(*k0), fmt_f64(*k1))?;
    }
    Ok(())
}

/// Regression scatter data: per-region x value, income and residual.
pub fn write_regression_csv<W: Write>(
    writer: &mut W,
    x_name: &str,
    xs: &[(String, f64)],
    income: &std::collections::BTreeMap<String, f64>,
    residuals: &[(String, f64)],
) -> Result<()> {
    writeln!(writer, "region,{x_name},gsdp_per_capita,residual_ln_income")?;
    let residual_by_region: std::collections::BTreeMap<&str, f64> = residuals
        .iter()
        .map(|(r, e)| (r.as_str(), *e))
        .collect();
    for (region, x) in xs {
        if let (Some(&gsdp), Some(&residual)) = (
            income.get(region),
            residual_by_region.get(region.as_str()),
        ) {
            writeln!(
                writer,
                "{region},{},{},{}",
                fmt_f64(*x),
                fmt_f64(gsdp),
                fmt_f64(residual)
            )?;
        }
    }
    Ok(())
}

/// Wide rank table: one row per region, one column per year, empty when the
/// region is absent that year.
pub fn write_rank_evolution_csv<W: Write>(writer: &mut W, evolution: &RankEvolution) -> Result<()> {
    let year_headers: Vec<String> = evolution.years.iter().map(|y| y.to_string()).collect();
    writeln!(writer, "region,{}", year_headers.join(","))?;
    for (region_index, region) in evolution.regions.iter().enumerate() {
        let cells: Vec<String> = evolution
            .ranks
            .iter()
            .map(|year_row| {
                year_row[region_index]
                    .map(|rank| rank.to_string())
                    .unwrap_or_default()
            })
            .collect();
        writeln!(writer, "{region},{}", cells.join(","))?;
    }
    Ok(())
}

pub fn write_mst_edges_csv<W: Write>(writer: &mut W, tree: &Tree) -> Result<()> {
    writeln!(writer, "u,v,similarity")?;
    for edge in &tree.edges {
        writeln!(writer, "{},{},{}", edge.u, edge.v, fmt_f64(edge.similarity))?;
    }
    Ok(())
}

/// Node-link JSON for graph tooling.
#[derive(Debug, Serialize)]
pub struct GraphJson<'a> {
    pub nodes: &'a [String],
    pub edges: Vec<GraphEdgeJson<'a>>,
}

#[derive(Debug, Serialize)]
pub struct GraphEdgeJson<'a> {
    pub source: &'a str,
    pub target: &'a str,
    pub similarity: f64,
}

impl<'a> GraphJson<'a> {
    pub fn from_tree(tree: &'a Tree) -> Self {
        GraphJson {
            nodes: &tree.nodes,
            edges: tree
                .edges
                .iter()
                .map(|e| GraphEdgeJson {
                    source: &e.u,
                    target: &e.v,
                    similarity: e.similarity,
                })
                .collect(),
        }
    }
}

/// Sidecar describing how an ordered matrix was permuted.
#[derive(Debug, Serialize)]
pub struct PermutationSidecar<'a> {
    pub rows: &'a [String],
    pub columns: &'a [String],
    /// Original row index of each output row.
    pub row_permutation: &'a [usize],
    pub col_permutation: &'a [usize],
    pub triangularity: f64,
}

impl<'a> PermutationSidecar<'a> {
    pub fn new(ordered: &'a OrderedMatrix, triangularity: f64) -> Self {
        PermutationSidecar {
            rows: &ordered.matrix.regions,
            columns: &ordered.matrix.industries,
            row_permutation: &ordered.row_permutation,
            col_permutation: &ordered.col_permutation,
            triangularity,
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::ingest::{parse_registry, Schema, Status};
    use chrono::NaiveDate;
    use ndarray::array;

    fn sample_records() -> Vec<FirmRecord> {
        vec![
            FirmRecord {
                firm_id: "U1".into(),
                region: "Karnataka".into(),
                nic_full: "62011".into(),
                nic2: "62".into(),
                incorporation_date: NaiveDate::from_ymd_opt(2015, 6, 1).unwrap(),
                status: Status::Active,
                paid_up_capital: 1234567,
            },
            FirmRecord {
                firm_id: "U2".into(),
                region: "Delhi".into(),
                nic_full: "7".into(),
                nic2: "07".into(),
                incorporation_date: NaiveDate::from_ymd_opt(2010, 1, 31).unwrap(),
                status: Status::Other("STOF".into()),
                paid_up_capital: 50,
            },
        ]
    }

    #[test]
    fn records_round_trip_through_csv() {
        let records = sample_records();
        let mut buffer = Vec::new();
        write_records_csv(&mut buffer, &records).unwrap();
        let outcome = parse_registry(buffer.as_slice(), &Schema::canonical(), None).unwrap();
        assert!(outcome.rejects.is_empty());
        assert_eq!(outcome.records, records);
    }

    #[test]
    fn float_formatting_round_trips() {
        for value in [1.0, -0.333333333333333314, 1e-300, 98765.4321, 0.1 + 0.2] {
            let text = fmt_f64(value);
            let back: f64 = text.parse().unwrap();
            assert_eq!(back.to_bits(), value.to_bits(), "{text}");
        }
    }

    #[test]
    fn labeled_matrix_layout() {
        let panel = RegionIndustryPanel {
            regions: vec!["A".into(), "B".into()],
            industries: vec!["11".into(), "62".into()],
            weights: array![[1.0, 2.0], [3.0, 4.0]],
        };
        let mut buffer = Vec::new();
        write_panel_csv(&mut buffer, &panel).unwrap();
        let text = String::from_utf8(buffer).unwrap();
        let mut lines = text.lines();
        assert_eq!(lines.next().unwrap(), "region,11,62");
        assert!(lines.next().unwrap().starts_with("A,"));
        assert!(lines.next().unwrap().starts_with("B,"));
    }

    #[test]
    fn rank_evolution_csv_marks_absent_years_empty() {
        let evolution = RankEvolution {
            years: vec![2020, 2021],
            regions: vec!["A".into(), "B".into()],
            ranks: vec![vec![Some(1), None], vec![Some(2), Some(1)]],
            skipped: vec![],
        };
        let mut buffer = Vec::new();
        write_rank_evolution_csv(&mut buffer, &evolution).unwrap();
        let text = String::from_utf8(buffer).unwrap();
        assert!(text.contains("region,2020,2021"));
        assert!(text.contains("A,1,2"));
        assert!(text.contains("B,,1"));
    }
}
