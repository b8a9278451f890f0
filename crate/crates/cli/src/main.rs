//! Command-line pipeline for region-industry complexity analytics.

mod commands;
mod manifest;

use std::collections::BTreeMap;
use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use serde::Deserialize;

/// Flag errors and other bad invocations; exits with code 2.
#[derive(Debug)]
pub struct UsageError(pub String);

impl std::fmt::Display for UsageError {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "{}", self.0)
    }
}

impl std::error::Error for UsageError {}

#[derive(Parser)]
#[command(
    name = "ecomplex",
    version,
    about = "Region-industry complexity analytics from firm-registry CSVs"
)]
struct Cli {
    #[command(flatten)]
    globals: GlobalArgs,
    #[command(subcommand)]
    command: Command,
}

#[derive(Args, Debug, Default)]
struct GlobalArgs {
    /// RCA threshold for the binary specialization matrix (default 1.0)
    #[arg(long, global = true)]
    threshold: Option<f64>,
    /// Fiscal-year cutoff as MM-DD (default 04-01)
    #[arg(long, global = true, value_name = "MM-DD")]
    fiscal_cutoff: Option<String>,
    /// Fiscal years, e.g. `2016-2018` or `2016,2018`
    #[arg(long, global = true, value_name = "SPEC")]
    years: Option<String>,
    /// Two-column income CSV (region,gsdp_per_capita)
    #[arg(long, global = true, value_name = "FILE")]
    income: Option<PathBuf>,
    /// Output root directory (default `out`)
    #[arg(long, global = true, value_name = "DIR")]
    out: Option<PathBuf>,
    /// Abort ingest when the rejected-row fraction exceeds this (default 1.0)
    #[arg(long, global = true, value_name = "FRACTION")]
    max_reject: Option<f64>,
    /// Power-law fitting window as LO:HI on the capital axis
    #[arg(long, global = true, value_name = "LO:HI")]
    powerlaw_window: Option<String>,
}

/// Optional config file named by the `ECOMPLEX_CONFIG` env var; flags win
/// over config values, config values win over built-in defaults.
#[derive(Debug, Default, Deserialize)]
#[serde(default, deny_unknown_fields)]
struct ConfigFile {
    threshold: Option<f64>,
    fiscal_cutoff: Option<String>,
    years: Option<String>,
    income: Option<PathBuf>,
    out: Option<PathBuf>,
    max_reject: Option<f64>,
    powerlaw_window: Option<String>,
    schema: Option<PathBuf>,
    aliases: Option<PathBuf>,
}

#[derive(Subcommand)]
enum Command {
    /// Parse raw registry CSVs into normalized records plus rejects
    Ingest {
        /// Input registry CSV files, processed in order
        #[arg(long, required = true, num_args = 1.., value_name = "FILE")]
        input: Vec<PathBuf>,
        /// TOML column mapping (defaults to the canonical column names)
        #[arg(long, value_name = "FILE")]
        schema: Option<PathBuf>,
        /// TOML region alias table; when given, unknown regions are rejects
        #[arg(long, value_name = "FILE")]
        aliases: Option<PathBuf>,
    },
    /// Weighted panel, RCA and binary matrix for one fiscal year
    Panel {
        #[arg(long, value_name = "FILE")]
        records: PathBuf,
        #[arg(long)]
        year: Option<i32>,
    },
    /// Economic complexity index (regions and industries) for one year
    Eci {
        #[arg(long, value_name = "FILE")]
        records: PathBuf,
        #[arg(long)]
        year: Option<i32>,
    },
    /// Fitness-complexity scores and the ordered matrix for one year
    Fitness {
        #[arg(long, value_name = "FILE")]
        records: PathBuf,
        #[arg(long)]
        year: Option<i32>,
        /// Iteration cap (default 1000)
        #[arg(long)]
        max_iter: Option<usize>,
        /// Consecutive rank-stable iterations required to converge (default 10)
        #[arg(long)]
        stability_window: Option<usize>,
    },
    /// Growth, capital-distribution and correlation fits
    Fits {
        #[arg(long, value_name = "FILE")]
        records: PathBuf,
        /// Year for the distribution/matrix analyses (default: last of --years)
        #[arg(long)]
        year: Option<i32>,
        /// Also compute the Hill maximum-likelihood power-law estimate
        #[arg(long)]
        mle: bool,
    },
    /// Complexity rankings per fiscal year
    RankEvolution {
        #[arg(long, value_name = "FILE")]
        records: PathBuf,
    },
    /// Region similarity graph and its maximum-similarity spanning tree
    Mst {
        #[arg(long, value_name = "FILE")]
        records: PathBuf,
        #[arg(long)]
        year: Option<i32>,
    },
    /// Everything: per-year analyses plus cross-year fits under one manifest
    Pipeline {
        #[arg(long, value_name = "FILE")]
        records: PathBuf,
        #[arg(long)]
        mle: bool,
    },
}

/// Effective configuration after merging flags, the env config file and
/// defaults.
#[derive(Debug, Clone)]
pub struct Ctx {
    pub threshold: f64,
    pub fiscal_cutoff: (u32, u32),
    pub years: Option<Vec<i32>>,
    pub income: Option<PathBuf>,
    pub out: PathBuf,
    pub max_reject: f64,
    pub powerlaw_window: Option<(f64, f64)>,
    pub schema: Option<PathBuf>,
    pub aliases: Option<PathBuf>,
}

impl Ctx {
    /// The effective configuration as manifest-ready key/value strings.
    pub fn config_pairs(&self) -> BTreeMap<String, String> {
        let mut pairs = BTreeMap::new();
        pairs.insert("threshold".into(), format!("{}", self.threshold));
        pairs.insert(
            "fiscal_cutoff".into(),
            format!("{:02}-{:02}", self.fiscal_cutoff.0, self.fiscal_cutoff.1),
        );
        if let Some(years) = &self.years {
            let rendered: Vec<String> = years.iter().map(|y| y.to_string()).collect();
            pairs.insert("years".into(), rendered.join(","));
        }
        if let Some(income) = &self.income {
            pairs.insert("income".into(), income.display().to_string());
        }
        pairs.insert("max_reject".into(), format!("{}", self.max_reject));
        if let Some((lo, hi)) = self.powerlaw_window {
            pairs.insert("powerlaw_window".into(), format!("{lo}:{hi}"));
        }
        pairs
    }

    pub fn require_years(&self) -> anyhow::Result<Vec<i32>> {
        self.years
            .clone()
            .ok_or_else(|| UsageError("this command needs --years".into()).into())
    }

    /// The analysis year: the flag if given, otherwise the last of `--years`.
    pub fn resolve_year(&self, flag: Option<i32>) -> anyhow::Result<i32> {
        if let Some(year) = flag {
            return Ok(year);
        }
        self.years
            .as_ref()
            .and_then(|years| years.last().copied())
            .ok_or_else(|| UsageError("pass --year or --years".into()).into())
    }
}

fn parse_fiscal_cutoff(text: &str) -> anyhow::Result<(u32, u32)> {
    let parts: Vec<&str> = text.split('-').collect();
    let err = || UsageError(format!("--fiscal-cutoff wants MM-DD, got `{text}`"));
    if parts.len() != 2 {
        return Err(err().into());
    }
    let month: u32 = parts[0].parse().map_err(|_| err())?;
    let day: u32 = parts[1].parse().map_err(|_| err())?;
    if !(1..=12).contains(&month) || !(1..=31).contains(&day) {
        return Err(err().into());
    }
    Ok((month, day))
}

fn parse_years(text: &str) -> anyhow::Result<Vec<i32>> {
    let err = |detail: &str| UsageError(format!("--years `{text}`: {detail}"));
    let mut years = Vec::new();
    for piece in text.split(',') {
        let piece = piece.trim();
        if piece.is_empty() {
            continue;
        }
        match piece.split_once('-') {
            Some((a, b)) => {
                let lo: i32 = a.trim().parse().map_err(|_| err("bad range start"))?;
                let hi: i32 = b.trim().parse().map_err(|_| err("bad range end"))?;
                if lo > hi {
                    return Err(err("range start after end").into());
                }
                years.extend(lo..=hi);
            }
            None => years.push(piece.parse().map_err(|_| err("bad year"))?),
        }
    }
    if years.is_empty() {
        return Err(err("no years").into());
    }
    years.sort_unstable();
    years.dedup();
    Ok(years)
}

fn parse_window(text: &str) -> anyhow::Result<(f64, f64)> {
    let err = || UsageError(format!("--powerlaw-window wants LO:HI, got `{text}`"));
    let (a, b) = text.split_once(':').ok_or_else(err)?;
    let lo: f64 = a.trim().parse().map_err(|_| err())?;
    let hi: f64 = b.trim().parse().map_err(|_| err())?;
    if !(lo.is_finite() && hi.is_finite() && lo > 0.0 && lo < hi) {
        return Err(err().into());
    }
    Ok((lo, hi))
}

fn load_config_file() -> anyhow::Result<ConfigFile> {
    match std::env::var_os("ECOMPLEX_CONFIG") {
        Some(path) => {
            let text = std::fs::read_to_string(&path).map_err(|e| {
                UsageError(format!(
                    "config file {} (from ECOMPLEX_CONFIG): {e}",
                    PathBuf::from(&path).display()
                ))
            })?;
            let config: ConfigFile = toml::from_str(&text)
                .map_err(|e| UsageError(format!("config file: {e}")))?;
            Ok(config)
        }
        None => Ok(ConfigFile::default()),
    }
}

fn build_ctx(globals: &GlobalArgs) -> anyhow::Result<Ctx> {
    let config = load_config_file()?;
    let cutoff_text = globals
        .fiscal_cutoff
        .clone()
        .or(config.fiscal_cutoff)
        .unwrap_or_else(|| "04-01".into());
    let years_text = globals.years.clone().or(config.years);
    let window_text = globals.powerlaw_window.clone().or(config.powerlaw_window);
    Ok(Ctx {
        threshold: globals.threshold.or(config.threshold).unwrap_or(1.0),
        fiscal_cutoff: parse_fiscal_cutoff(&cutoff_text)?,
        years: years_text.as_deref().map(parse_years).transpose()?,
        income: globals.income.clone().or(config.income),
        out: globals
            .out
            .clone()
            .or(config.out)
            .unwrap_or_else(|| PathBuf::from("out")),
        max_reject: globals.max_reject.or(config.max_reject).unwrap_or(1.0),
        powerlaw_window: window_text.as_deref().map(parse_window).transpose()?,
        schema: config.schema,
        aliases: config.aliases,
    })
}

fn exit_code_for(error: &anyhow::Error) -> u8 {
    if error.downcast_ref::<UsageError>().is_some() {
        return 2;
    }
    if let Some(core) = error.downcast_ref::<ecomplex::Error>() {
        return if core.is_usage() { 2 } else { 1 };
    }
    1
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let outcome = build_ctx(&cli.globals).and_then(|ctx| match cli.command {
        Command::Ingest {
            input,
            schema,
            aliases,
        } => commands::cmd_ingest(&ctx, &input, schema, aliases),
        Command::Panel { records, year } => commands::cmd_panel(&ctx, &records, year),
        Command::Eci { records, year } => commands::cmd_eci(&ctx, &records, year),
        Command::Fitness {
            records,
            year,
            max_iter,
            stability_window,
        } => commands::cmd_fitness(&ctx, &records, year, max_iter, stability_window),
        Command::Fits { records, year, mle } => commands::cmd_fits(&ctx, &records, year, mle),
        Command::RankEvolution { records } => commands::cmd_rank_evolution(&ctx, &records),
        Command::Mst { records, year } => commands::cmd_mst(&ctx, &records, year),
        Command::Pipeline { records, mle } => commands::cmd_pipeline(&ctx, &records, mle),
    });
    match outcome {
        Ok(()) => ExitCode::SUCCESS,
        Err(error) => {
            eprintln!("ecomplex: error: {error:#}");
            ExitCode::from(exit_code_for(&error))
        }
    }
}
