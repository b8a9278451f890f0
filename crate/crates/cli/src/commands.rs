//! Command implementations: each builds its artifacts in memory, writes them
//! through the manifest builder, and finishes with `manifest.json`.

use std::collections::{BTreeMap, HashSet};
use std::io::Write as _;
use std::path::{Path, PathBuf};

use anyhow::{anyhow, Context, Result};
use serde::Serialize;

use ecomplex::analytics::{self, FitSummary, IncomeTable};
use ecomplex::complexity::{self, ComplexityResult};
use ecomplex::error::Error as CoreError;
use ecomplex::exec;
use ecomplex::export;
use ecomplex::fitness::{fitness_complexity, FitnessOptions, FitnessResult};
use ecomplex::ingest::{
    filter_active, parse_registry, snapshot, FirmRecord, RegionAliases, RejectRow, Schema,
    SnapshotSpec,
};
use ecomplex::netlab::{self, OrderedMatrix};
use ecomplex::panel::{aggregate, binarize, prune, rca, BinaryMatrix, PruneLog, RcaMatrix,
    RegionIndustryPanel};

use crate::manifest::ManifestBuilder;
use crate::Ctx;

// ---------------------------------------------------------------- ingest --

pub fn cmd_ingest(
    ctx: &Ctx,
    inputs: &[PathBuf],
    schema_flag: Option<PathBuf>,
    aliases_flag: Option<PathBuf>,
) -> Result<()> {
    let schema_path = schema_flag.or_else(|| ctx.schema.clone());
    let schema = match &schema_path {
        Some(path) => Schema::from_toml_path(path)?,
        None => Schema::canonical(),
    };
    let aliases_path = aliases_flag.or_else(|| ctx.aliases.clone());
    let aliases = aliases_path
        .as_ref()
        .map(|path| RegionAliases::from_toml_path(path))
        .transpose()?;

    // Parse every file first: schema errors must abort before any output.
    let mut parsed = Vec::new();
    for path in inputs {
        let file = std::fs::File::open(path)
            .with_context(|| format!("opening {}", path.display()))?;
        let outcome = parse_registry(file, &schema, aliases.as_ref())
            .with_context(|| format!("parsing {}", path.display()))?;
        parsed.push((path.clone(), outcome));
    }

    let mut manifest_inputs: Vec<PathBuf> = inputs.to_vec();
    manifest_inputs.extend(schema_path.iter().cloned());
    manifest_inputs.extend(aliases_path.iter().cloned());
    let mut config = ctx.config_pairs();
    if let Some(path) = &schema_path {
        config.insert("schema".into(), path.display().to_string());
    }
    if let Some(path) = &aliases_path {
        config.insert("aliases".into(), path.display().to_string());
    }
    let mut builder = ManifestBuilder::create(&ctx.out, "ingest", config, &manifest_inputs)?;

    // Merge files in order, demoting firm ids already seen to rejects.
    let mut records: Vec<FirmRecord> = Vec::new();
    let mut seen: HashSet<String> = HashSet::new();
    let mut rejects: Vec<(String, RejectRow)> = Vec::new();
    let mut rows_total: u64 = 0;
    for (path, outcome) in parsed {
        let file_name = path.display().to_string();
        rows_total += outcome.rows_read;
        for record in outcome.records {
            if seen.insert(record.firm_id.clone()) {
                records.push(record);
            } else {
                rejects.push((
                    file_name.clone(),
                    RejectRow {
                        row: 0,
                        reason: ecomplex::ingest::RejectReason::DuplicateFirmId,
                        detail: record.firm_id,
                    },
                ));
            }
        }
        for reject in outcome.rejects {
            rejects.push((file_name.clone(), reject));
        }
    }

    let mut records_csv = Vec::new();
    export::write_records_csv(&mut records_csv, &records)?;
    builder.write_file("records.csv", &records_csv)?;

    let mut rejects_csv = Vec::new();
    writeln!(rejects_csv, "file,row,reason,detail")?;
    for (file, reject) in &rejects {
        writeln!(
            rejects_csv,
            "{file},{},{},{}",
            reject.row,
            reject.reason.as_str(),
            reject.detail.replace(',', ";")
        )?;
    }
    builder.write_file("rejects.csv", &rejects_csv)?;

    let reject_fraction = rejects.len() as f64 / rows_total as f64;
    builder.note(format!(
        "rows: {rows_total}, accepted: {}, rejected: {} ({reject_fraction:.4})",
        records.len(),
        rejects.len()
    ));
    let over_limit = reject_fraction > ctx.max_reject;
    if over_limit {
        builder.note(format!(
            "reject fraction {reject_fraction:.4} exceeds --max-reject {}",
            ctx.max_reject
        ));
    }
    let run_dir = builder.run_dir().to_path_buf();
    builder.finalize()?;
    println!("ingest: {} records, {} rejects -> {}", records.len(), rejects.len(), run_dir.display());

    if over_limit {
        return Err(anyhow!(
            "reject fraction {reject_fraction:.4} exceeds --max-reject {}",
            ctx.max_reject
        ));
    }
    Ok(())
}

// ------------------------------------------------------ shared plumbing --

/// Read a normalized records CSV (canonical schema). Any reject means the
/// file is not a product of `ingest` and is refused.
fn load_records(path: &Path) -> Result<Vec<FirmRecord>> {
    let file =
        std::fs::File::open(path).with_context(|| format!("opening {}", path.display()))?;
    let outcome = parse_registry(file, &Schema::canonical(), None)?;
    if !outcome.rejects.is_empty() {
        let first = &outcome.rejects[0];
        return Err(anyhow!(
            "{} is not a normalized records file: row {} rejected ({})",
            path.display(),
            first.row,
            first.reason.as_str()
        ));
    }
    Ok(outcome.records)
}

/// Everything the pipeline computes for one fiscal year.
struct YearArtifacts {
    year: i32,
    snapshot_size: usize,
    panel: RegionIndustryPanel,
    rca: RcaMatrix,
    matrix: BinaryMatrix,
    prune_log: PruneLog,
    complexity: ComplexityResult,
    fitness: FitnessResult,
    fitness_options: FitnessOptions,
    fitness_note: Option<String>,
    ordered: OrderedMatrix,
    triangularity: f64,
}

fn fitness_with_fallback(
    matrix: &BinaryMatrix,
    options: &FitnessOptions,
) -> Result<(FitnessResult, Option<String>), CoreError> {
    match fitness_complexity(matrix, options) {
        Ok(result) => Ok((result, None)),
        Err(CoreError::NumericalUnderflow { iteration }) => {
            let retry = FitnessOptions {
                log_domain: true,
                ..options.clone()
            };
            let result = fitness_complexity(matrix, &retry)?;
            Ok((
                result,
                Some(format!(
                    "linear iteration underflowed at step {iteration}; recomputed in log domain"
                )),
            ))
        }
        Err(other) => Err(other),
    }
}

fn compute_year(
    active: &[FirmRecord],
    year: i32,
    ctx: &Ctx,
    fitness_options: &FitnessOptions,
) -> Result<YearArtifacts, CoreError> {
    let spec = SnapshotSpec::new(year, ctx.fiscal_cutoff)?;
    let members = snapshot(active, &spec);
    let snapshot_size = members.len();
    let panel = aggregate(members)?;
    let rca_matrix = rca(&panel)?;
    let raw = binarize(&rca_matrix, ctx.threshold);
    let (matrix, prune_log) = prune(&raw)?;
    let complexity_result = complexity::eci(&matrix)?;
    let (fitness_result, fitness_note) = fitness_with_fallback(&matrix, fitness_options)?;
    let ordered = netlab::ordered_matrix(&matrix, &fitness_result)?;
    let triangularity = netlab::triangularity(&ordered.matrix);
    Ok(YearArtifacts {
        year,
        snapshot_size,
        panel,
        rca: rca_matrix,
        matrix,
        prune_log,
        complexity: complexity_result,
        fitness: fitness_result,
        fitness_options: fitness_options.clone(),
        fitness_note,
        ordered,
        triangularity,
    })
}

fn active_records(path: &Path) -> Result<Vec<FirmRecord>> {
    let records = load_records(path)?;
    let (active, dropped) = filter_active(records);
    if active.is_empty() {
        return Err(CoreError::EmptyPanel.into());
    }
    if dropped > 0 {
        eprintln!("ecomplex: note: dropped {dropped} inactive records");
    }
    Ok(active)
}

fn write_year_stage(
    builder: &mut ManifestBuilder,
    year: &YearArtifacts,
    ctx: &Ctx,
) -> Result<()> {
    let prefix = format!("year-{}", year.year);
    let mut buffer;

    buffer = Vec::new();
    export::write_panel_csv(&mut buffer, &year.panel)?;
    builder.write_file(&format!("{prefix}/panel.csv"), &buffer)?;

    buffer = Vec::new();
    export::write_rca_csv(&mut buffer, &year.rca)?;
    builder.write_file(&format!("{prefix}/rca.csv"), &buffer)?;

    buffer = Vec::new();
    export::write_binary_csv(&mut buffer, &year.matrix)?;
    builder.write_file(&format!("{prefix}/m.csv"), &buffer)?;

    buffer = Vec::new();
    export::write_json(
        &mut buffer,
        &export::PanelEnvelope {
            fiscal_year: year.year,
            threshold: ctx.threshold,
            snapshot_size: year.snapshot_size,
            grand_total: year.panel.grand_total(),
            regions: year.panel.regions.len(),
            industries: year.panel.industries.len(),
            prune: &year.prune_log,
        },
    )?;
    builder.write_file(&format!("{prefix}/panel.json"), &buffer)?;

    buffer = Vec::new();
    export::write_eci_csv(&mut buffer, &year.complexity)?;
    builder.write_file(&format!("{prefix}/eci.csv"), &buffer)?;

    buffer = Vec::new();
    export::write_pci_csv(&mut buffer, &year.complexity)?;
    builder.write_file(&format!("{prefix}/pci.csv"), &buffer)?;

    buffer = Vec::new();
    export::write_json(
        &mut buffer,
        &export::ComplexityDiagnostics::new(&year.complexity, &year.prune_log),
    )?;
    builder.write_file(&format!("{prefix}/complexity.json"), &buffer)?;

    buffer = Vec::new();
    export::write_fitness_regions_csv(&mut buffer, &year.fitness)?;
    builder.write_file(&format!("{prefix}/fitness_regions.csv"), &buffer)?;

    buffer = Vec::new();
    export::write_fitness_industries_csv(&mut buffer, &year.fitness)?;
    builder.write_file(&format!("{prefix}/fitness_industries.csv"), &buffer)?;

    buffer = Vec::new();
    export::write_json(
        &mut buffer,
        &export::FitnessDiagnostics::new(
            &year.fitness,
            year.fitness_options.rank_stability_window,
            year.fitness_options.max_iter,
        ),
    )?;
    builder.write_file(&format!("{prefix}/fitness.json"), &buffer)?;
    if let Some(note) = &year.fitness_note {
        builder.note(format!("{prefix}: {note}"));
    }

    buffer = Vec::new();
    export::write_binary_csv(&mut buffer, &year.ordered.matrix)?;
    builder.write_file(&format!("{prefix}/ordered_matrix.csv"), &buffer)?;

    buffer = Vec::new();
    export::write_json(
        &mut buffer,
        &export::PermutationSidecar::new(&year.ordered, year.triangularity),
    )?;
    builder.write_file(&format!("{prefix}/ordered_permutation.json"), &buffer)?;

    Ok(())
}

// ----------------------------------------------------- per-year commands --

pub fn cmd_panel(ctx: &Ctx, records_path: &Path, year_flag: Option<i32>) -> Result<()> {
    let year = ctx.resolve_year(year_flag)?;
    let active = active_records(records_path)?;
    let artifacts = compute_year(&active, year, ctx, &FitnessOptions::default())?;

    let mut config = ctx.config_pairs();
    config.insert("year".into(), year.to_string());
    let mut builder =
        ManifestBuilder::create(&ctx.out, "panel", config, &[records_path.to_path_buf()])?;
    let prefix = format!("year-{year}");

    let mut buffer = Vec::new();
    export::write_panel_csv(&mut buffer, &artifacts.panel)?;
    builder.write_file(&format!("{prefix}/panel.csv"), &buffer)?;
    buffer = Vec::new();
    export::write_rca_csv(&mut buffer, &artifacts.rca)?;
    builder.write_file(&format!("{prefix}/rca.csv"), &buffer)?;
    buffer = Vec::new();
    export::write_binary_csv(&mut buffer, &artifacts.matrix)?;
    builder.write_file(&format!("{prefix}/m.csv"), &buffer)?;

    buffer = Vec::new();
    export::write_json(
        &mut buffer,
        &export::PanelEnvelope {
            fiscal_year: year,
            threshold: ctx.threshold,
            snapshot_size: artifacts.snapshot_size,
            grand_total: artifacts.panel.grand_total(),
            regions: artifacts.panel.regions.len(),
            industries: artifacts.panel.industries.len(),
            prune: &artifacts.prune_log,
        },
    )?;
    builder.write_file(&format!("{prefix}/panel.json"), &buffer)?;

    let run_dir = builder.run_dir().to_path_buf();
    builder.finalize()?;
    println!("panel: year {year} -> {}", run_dir.display());
    Ok(())
}

pub fn cmd_eci(ctx: &Ctx, records_path: &Path, year_flag: Option<i32>) -> Result<()> {
    let year = ctx.resolve_year(year_flag)?;
    let active = active_records(records_path)?;
    let artifacts = compute_year(&active, year, ctx, &FitnessOptions::default())?;

    let mut config = ctx.config_pairs();
    config.insert("year".into(), year.to_string());
    let mut builder =
        ManifestBuilder::create(&ctx.out, "eci", config, &[records_path.to_path_buf()])?;
    let prefix = format!("year-{year}");

    let mut buffer = Vec::new();
    export::write_eci_csv(&mut buffer, &artifacts.complexity)?;
    builder.write_file(&format!("{prefix}/eci.csv"), &buffer)?;
    buffer = Vec::new();
    export::write_pci_csv(&mut buffer, &artifacts.complexity)?;
    builder.write_file(&format!("{prefix}/pci.csv"), &buffer)?;
    buffer = Vec::new();
    export::write_json(
        &mut buffer,
        &export::ComplexityDiagnostics::new(&artifacts.complexity, &artifacts.prune_log),
    )?;
    builder.write_file(&format!("{prefix}/complexity.json"), &buffer)?;

    let run_dir = builder.run_dir().to_path_buf();
    builder.finalize()?;
    println!("eci: year {year} -> {}", run_dir.display());
    Ok(())
}

pub fn cmd_fitness(
    ctx: &Ctx,
    records_path: &Path,
    year_flag: Option<i32>,
    max_iter: Option<usize>,
    stability_window: Option<usize>,
) -> Result<()> {
    let year = ctx.resolve_year(year_flag)?;
    let options = FitnessOptions {
        max_iter: max_iter.unwrap_or(1000),
        rank_stability_window: stability_window.unwrap_or(10),
        ..FitnessOptions::default()
    };
    let active = active_records(records_path)?;
    let artifacts = compute_year(&active, year, ctx, &options)?;

    let mut config = ctx.config_pairs();
    config.insert("year".into(), year.to_string());
    config.insert("max_iter".into(), options.max_iter.to_string());
    config.insert(
        "stability_window".into(),
        options.rank_stability_window.to_string(),
    );
    let mut builder =
        ManifestBuilder::create(&ctx.out, "fitness", config, &[records_path.to_path_buf()])?;
    let prefix = format!("year-{year}");

    let mut buffer = Vec::new();
    export::write_fitness_regions_csv(&mut buffer, &artifacts.fitness)?;
    builder.write_file(&format!("{prefix}/fitness_regions.csv"), &buffer)?;
    buffer = Vec::new();
    export::write_fitness_industries_csv(&mut buffer, &artifacts.fitness)?;
    builder.write_file(&format!("{prefix}/fitness_industries.csv"), &buffer)?;
    buffer = Vec::new();
    export::write_json(
        &mut buffer,
        &export::FitnessDiagnostics::new(&artifacts.fitness, options.rank_stability_window, options.max_iter),
    )?;
    builder.write_file(&format!("{prefix}/fitness.json"), &buffer)?;
    buffer = Vec::new();
    export::write_binary_csv(&mut buffer, &artifacts.ordered.matrix)?;
    builder.write_file(&format!("{prefix}/ordered_matrix.csv"), &buffer)?;
    buffer = Vec::new();
    export::write_json(
        &mut buffer,
        &export::PermutationSidecar::new(&artifacts.ordered, artifacts.triangularity),
    )?;
    builder.write_file(&format!("{prefix}/ordered_permutation.json"), &buffer)?;
    if let Some(note) = &artifacts.fitness_note {
        builder.note(note.clone());
    }

    let run_dir = builder.run_dir().to_path_buf();
    builder.finalize()?;
    println!("fitness: year {year} -> {}", run_dir.display());
    Ok(())
}

pub fn cmd_mst(ctx: &Ctx, records_path: &Path, year_flag: Option<i32>) -> Result<()> {
    let year = ctx.resolve_year(year_flag)?;
    let active = active_records(records_path)?;
    let spec = SnapshotSpec::new(year, ctx.fiscal_cutoff)?;
    let members = snapshot(&active, &spec);
    let panel = aggregate(members)?;
    let rca_matrix = rca(&panel)?;
    let (matrix, _) = prune(&binarize(&rca_matrix, ctx.threshold))?;
    let graph = netlab::similarity(&matrix)?;
    let tree = netlab::mst(&graph)?;

    let mut config = ctx.config_pairs();
    config.insert("year".into(), year.to_string());
    let mut builder =
        ManifestBuilder::create(&ctx.out, "mst", config, &[records_path.to_path_buf()])?;
    let prefix = format!("year-{year}");

    let mut buffer = Vec::new();
    export::write_similarity_csv(&mut buffer, &graph)?;
    builder.write_file(&format!("{prefix}/similarity.csv"), &buffer)?;
    buffer = Vec::new();
    export::write_mst_edges_csv(&mut buffer, &tree)?;
    builder.write_file(&format!("{prefix}/mst_edges.csv"), &buffer)?;
    buffer = Vec::new();
    export::write_json(&mut buffer, &export::GraphJson::from_tree(&tree))?;
    builder.write_file(&format!("{prefix}/mst.json"), &buffer)?;

    let run_dir = builder.run_dir().to_path_buf();
    builder.finalize()?;
    println!("mst: year {year} -> {}", run_dir.display());
    Ok(())
}

// --------------------------------------------------- cross-year commands --

struct AcrossInputs<'a> {
    ctx: &'a Ctx,
    active: &'a [FirmRecord],
    years: &'a [i32],
    analysis_year: i32,
    analysis: &'a YearArtifacts,
    mle: bool,
}

/// Firm counts per fiscal year; zero-count years are excluded (they carry no
/// information for the log-linear fit) and reported.
fn yearly_counts(
    active: &[FirmRecord],
    years: &[i32],
    cutoff: (u32, u32),
) -> Result<(BTreeMap<i32, u64>, Vec<i32>)> {
    let mut counts = BTreeMap::new();
    let mut excluded = Vec::new();
    for &year in years {
        let spec = SnapshotSpec::new(year, cutoff)?;
        let n = snapshot(active, &spec).len() as u64;
        if n == 0 {
            excluded.push(year);
        } else {
            counts.insert(year, n);
        }
    }
    Ok((counts, excluded))
}

fn write_across_stage(builder: &mut ManifestBuilder, inputs: &AcrossInputs) -> Result<()> {
    let ctx = inputs.ctx;

    // firm growth over the requested years
    let (counts, excluded) = yearly_counts(inputs.active, inputs.years, ctx.fiscal_cutoff)?;
    if !excluded.is_empty() {
        let rendered: Vec<String> = excluded.iter().map(|y| y.to_string()).collect();
        builder.note(format!(
            "growth fit excluded zero-count years: {}",
            rendered.join(",")
        ));
    }
    let mut buffer = Vec::new();
    export::write_growth_csv(&mut buffer, &counts)?;
    builder.write_file("across/growth.csv", &buffer)?;
    match analytics::firm_growth_fit(&counts) {
        Ok(fit) => {
            buffer = Vec::new();
            export::write_json(&mut buffer, &fit)?;
            builder.write_file("across/growth_fit.json", &buffer)?;
        }
        Err(error) => builder.note(format!("growth fit skipped: {error}")),
    }

    // capital distribution for the analysis year
    let spec = SnapshotSpec::new(inputs.analysis_year, ctx.fiscal_cutoff)?;
    let members = snapshot(inputs.active, &spec);
    let mut capitals: Vec<f64> = members
        .iter()
        .filter(|r| r.paid_up_capital > 0)
        .map(|r| r.paid_up_capital as f64 / 100.0)
        .collect();
    let zero_capital = members.len() - capitals.len();
    if zero_capital > 0 {
        builder.note(format!(
            "ccdf excludes {zero_capital} firms with zero capital"
        ));
    }
    capitals.sort_by(|a, b| a.partial_cmp(b).unwrap());
    let ccdf_points = analytics::ccdf(&capitals)?;
    buffer = Vec::new();
    export::write_ccdf_csv(&mut buffer, &ccdf_points)?;
    builder.write_file("across/ccdf.csv", &buffer)?;

    let window = match ctx.powerlaw_window {
        Some(window) => window,
        None => analytics::default_powerlaw_window(&capitals)?,
    };
    match analytics::powerlaw_fit(&ccdf_points, window) {
        Ok(fit) => {
            buffer = Vec::new();
            export::write_json(&mut buffer, &fit)?;
            builder.write_file("across/powerlaw_fit.json", &buffer)?;
        }
        Err(error) => builder.note(format!("power-law fit skipped: {error}")),
    }
    if inputs.mle {
        match analytics::powerlaw_mle(&capitals, window.0) {
            Ok(mle) => {
                buffer = Vec::new();
                export::write_json(&mut buffer, &mle)?;
                builder.write_file("across/powerlaw_mle.json", &buffer)?;
            }
            Err(error) => builder.note(format!("power-law MLE skipped: {error}")),
        }
    }

    // diversification vs mean neighbor ubiquity for the analysis year
    let rows = analytics::diversification_ubiquity(&inputs.analysis.matrix)?;
    buffer = Vec::new();
    export::write_diversification_ubiquity_csv(&mut buffer, &rows)?;
    builder.write_file("across/diversification_ubiquity.csv", &buffer)?;
    let k0: Vec<f64> = rows.iter().map(|(_, k0, _)| *k0).collect();
    let k1: Vec<f64> = rows.iter().map(|(_, _, k1)| *k1).collect();
    match analytics::pearson(&k0, &k1) {
        Ok((r, p)) => {
            #[derive(Serialize)]
            struct Fig2 {
                pearson_r: f64,
                p_value: f64,
                n: usize,
                note: &'static str,
            }
            buffer = Vec::new();
            export::write_json(
                &mut buffer,
                &Fig2 {
                    pearson_r: r,
                    p_value: p,
                    n: k0.len(),
                    note: "sign as computed on (diversification, mean neighbor ubiquity)",
                },
            )?;
            builder.write_file("across/diversification_ubiquity.json", &buffer)?;
        }
        Err(error) => builder.note(format!("diversification-ubiquity correlation skipped: {error}")),
    }

    // income regressions when a table is supplied
    if let Some(income_path) = &ctx.income {
        let tag = income_path
            .file_stem()
            .map(|s| s.to_string_lossy().to_string())
            .unwrap_or_else(|| "income".into());
        let income = IncomeTable::from_path(income_path, &tag)?;

        #[derive(Serialize)]
        struct Regression<'a> {
            fit: &'a FitSummary,
            income_source: &'a str,
            residuals: &'a [(String, f64)],
        }

        let eci_pairs: Vec<(String, f64)> = inputs
            .analysis
            .complexity
            .regions
            .iter()
            .cloned()
            .zip(inputs.analysis.complexity.eci.iter().copied())
            .collect();
        match analytics::income_regression_eci(&eci_pairs, &income) {
            Ok((fit, residuals)) => {
                buffer = Vec::new();
                export::write_json(
                    &mut buffer,
                    &Regression {
                        fit: &fit,
                        income_source: &tag,
                        residuals: &residuals,
                    },
                )?;
                builder.write_file("across/eci_income.json", &buffer)?;
                buffer = Vec::new();
                export::write_regression_csv(
                    &mut buffer,
                    "eci",
                    &eci_pairs,
                    &income.values,
                    &residuals,
                )?;
                builder.write_file("across/eci_income.csv", &buffer)?;
            }
            Err(error) => builder.note(format!("eci-income regression skipped: {error}")),
        }

        let fitness_pairs: Vec<(String, f64)> = inputs
            .analysis
            .fitness
            .regions
            .iter()
            .cloned()
            .zip(inputs.analysis.fitness.fitness.iter().copied())
            .collect();
        match analytics::income_regression_fitness(&fitness_pairs, &income) {
            Ok((fit, residuals)) => {
                buffer = Vec::new();
                export::write_json(
                    &mut buffer,
                    &Regression {
                        fit: &fit,
                        income_source: &tag,
                        residuals: &residuals,
                    },
                )?;
                builder.write_file("across/fitness_income.json", &buffer)?;
                buffer = Vec::new();
                export::write_regression_csv(
                    &mut buffer,
                    "fitness",
                    &fitness_pairs,
                    &income.values,
                    &residuals,
                )?;
                builder.write_file("across/fitness_income.csv", &buffer)?;
            }
            Err(error) => builder.note(format!("fitness-income regression skipped: {error}")),
        }
    }

    Ok(())
}

pub fn cmd_fits(
    ctx: &Ctx,
    records_path: &Path,
    year_flag: Option<i32>,
    mle: bool,
) -> Result<()> {
    let years = ctx.require_years()?;
    let analysis_year = ctx.resolve_year(year_flag)?;
    let active = active_records(records_path)?;
    let analysis = compute_year(&active, analysis_year, ctx, &FitnessOptions::default())?;

    let mut config = ctx.config_pairs();
    config.insert("analysis_year".into(), analysis_year.to_string());
    config.insert("mle".into(), mle.to_string());
    let mut inputs: Vec<PathBuf> = vec![records_path.to_path_buf()];
    inputs.extend(ctx.income.iter().cloned());
    let mut builder = ManifestBuilder::create(&ctx.out, "fits", config, &inputs)?;

    write_across_stage(
        &mut builder,
        &AcrossInputs {
            ctx,
            active: &active,
            years: &years,
            analysis_year,
            analysis: &analysis,
            mle,
        },
    )?;

    let run_dir = builder.run_dir().to_path_buf();
    builder.finalize()?;
    println!("fits: analysis year {analysis_year} -> {}", run_dir.display());
    Ok(())
}

pub fn cmd_rank_evolution(ctx: &Ctx, records_path: &Path) -> Result<()> {
    let years = ctx.require_years()?;
    let active = active_records(records_path)?;

    // per-year matrices; years whose panel/matrix cannot be built are skipped
    // here, years whose complexity is degenerate are skipped by the ranker
    let built: Vec<(i32, Result<BinaryMatrix, String>)> = exec::map(&years, |&year| {
        let outcome = (|| -> Result<BinaryMatrix, CoreError> {
            let spec = SnapshotSpec::new(year, ctx.fiscal_cutoff)?;
            let panel = aggregate(snapshot(&active, &spec))?;
            let (matrix, _) = prune(&binarize(&rca(&panel)?, ctx.threshold))?;
            Ok(matrix)
        })();
        (year, outcome.map_err(|e| e.to_string()))
    });
    let mut snapshots = Vec::new();
    let mut build_failures = Vec::new();
    for (year, outcome) in built {
        match outcome {
            Ok(matrix) => snapshots.push((year, matrix)),
            Err(reason) => build_failures.push((year, reason)),
        }
    }
    if snapshots.is_empty() {
        return Err(CoreError::NoValidYears.into());
    }
    let evolution = analytics::rank_evolution(&snapshots)?;

    let mut builder = ManifestBuilder::create(
        &ctx.out,
        "rank-evolution",
        ctx.config_pairs(),
        &[records_path.to_path_buf()],
    )?;
    let mut buffer = Vec::new();
    export::write_rank_evolution_csv(&mut buffer, &evolution)?;
    builder.write_file("across/rank_evolution.csv", &buffer)?;

    #[derive(Serialize)]
    struct EvolutionMeta<'a> {
        years: &'a [i32],
        skipped_build: &'a [(i32, String)],
        skipped_complexity: &'a [(i32, String)],
    }
    buffer = Vec::new();
    export::write_json(
        &mut buffer,
        &EvolutionMeta {
            years: &evolution.years,
            skipped_build: &build_failures,
            skipped_complexity: &evolution.skipped,
        },
    )?;
    builder.write_file("across/rank_evolution.json", &buffer)?;
    for (year, reason) in build_failures.iter().chain(evolution.skipped.iter()) {
        builder.note(format!("year {year} skipped: {reason}"));
    }

    let run_dir = builder.run_dir().to_path_buf();
    builder.finalize()?;
    println!(
        "rank-evolution: {} of {} years -> {}",
        evolution.years.len(),
        years.len(),
        run_dir.display()
    );
    Ok(())
}

pub fn cmd_pipeline(ctx: &Ctx, records_path: &Path, mle: bool) -> Result<()> {
    let years = ctx.require_years()?;
    let active = active_records(records_path)?;

    let mut config = ctx.config_pairs();
    config.insert("mle".into(), mle.to_string());
    let mut inputs: Vec<PathBuf> = vec![records_path.to_path_buf()];
    inputs.extend(ctx.income.iter().cloned());
    let mut builder = ManifestBuilder::create(&ctx.out, "pipeline", config, &inputs)?;

    // compute every year (in parallel when enabled), then write in order
    let fitness_options = FitnessOptions::default();
    let computed: Vec<Result<YearArtifacts, CoreError>> =
        exec::map(&years, |&year| compute_year(&active, year, ctx, &fitness_options));

    let mut artifacts = Vec::new();
    for (year, outcome) in years.iter().zip(computed) {
        match outcome {
            Ok(year_artifacts) => artifacts.push(year_artifacts),
            Err(error) => {
                builder.note(format!("aborted at year {year}: {error}"));
                builder.finalize()?;
                return Err(error.into());
            }
        }
    }

    for year_artifacts in &artifacts {
        write_year_stage(&mut builder, year_artifacts, ctx)?;
    }

    // cross-year stages use the last requested year for the distributional
    // and regression analyses
    let analysis = artifacts.last().expect("years is non-empty");
    let across = AcrossInputs {
        ctx,
        active: &active,
        years: &years,
        analysis_year: analysis.year,
        analysis,
        mle,
    };
    if let Err(error) = write_across_stage(&mut builder, &across) {
        builder.note(format!("aborted in cross-year stage: {error}"));
        builder.finalize()?;
        return Err(error);
    }

    let snapshots: Vec<(i32, BinaryMatrix)> = artifacts
        .iter()
        .map(|a| (a.year, a.matrix.clone()))
        .collect();
    let evolution = analytics::rank_evolution(&snapshots)?;
    let mut buffer = Vec::new();
    export::write_rank_evolution_csv(&mut buffer, &evolution)?;
    builder.write_file("across/rank_evolution.csv", &buffer)?;

    let run_dir = builder.run_dir().to_path_buf();
    builder.finalize()?;
    println!(
        "pipeline: {} years -> {}",
        artifacts.len(),
        run_dir.display()
    );
    Ok(())
}
