//! Statistical fits and correlation analyses: exponential firm growth,
//! power-law capital distributions, diversification-ubiquity correlation,
//! income regressions and the rank-evolution time series.
//!
//! Every fit is ordinary least squares on transformed variables, with the
//! Pearson correlation and a two-sided p-value from the t distribution with
//! n - 2 degrees of freedom. A Hill maximum-likelihood estimator for the
//! power-law exponent is available for comparison but is never the default
//! path.

use std::collections::BTreeMap;
use std::io::Read;
use std::path::Path;

use serde::Serialize;
use statrs::distribution::{ContinuousCDF, StudentsT};

use crate::complexity;
use crate::error::{Error, Result};
use crate::exec;
use crate::fitness::rank_desc;
use crate::panel::BinaryMatrix;

/// Functional form a [`FitSummary`] refers to.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum FitModel {
    /// ln(count) regressed on year.
    ExponentialGrowth,
    /// ln(CCDF) regressed on ln(x) inside a window.
    PowerLawCcdf,
    /// ln(y) regressed on x.
    ExponentialOfX,
    /// ln(y) regressed on ln(x).
    PowerLawLogLog,
    Linear,
}

/// A fitted model with its correlation diagnostics.
#[derive(Debug, Clone, Serialize)]
pub struct FitSummary {
    pub model: FitModel,
    pub params: BTreeMap<String, f64>,
    /// Pearson correlation on the transformed variables.
    pub pearson_r: f64,
    /// Two-sided significance of the correlation.
    pub p_value: f64,
    pub n: usize,
    /// Fitting window on the x axis, when one applies.
    pub range: Option<(f64, f64)>,
}

/// Per-capita income by region for one fiscal year.
#[derive(Debug, Clone, PartialEq)]
pub struct IncomeTable {
    pub fiscal_year: String,
    pub values: BTreeMap<String, f64>,
}

impl IncomeTable {
    /// Read a two-column CSV (`region,gsdp_per_capita`) with a header row.
    pub fn from_reader<R: Read>(reader: R, fiscal_year: &str) -> Result<Self> {
        let mut csv_reader = csv::ReaderBuilder::new().from_reader(reader);
        let mut values = BTreeMap::new();
        for row in csv_reader.records() {
            let row = row?;
            let region = row.get(0).unwrap_or("").trim().to_string();
            let raw = row.get(1).unwrap_or("").trim();
            let income: f64 = raw.parse().map_err(|_| Error::NonPositive {
                what: format!("income for `{region}` (`{raw}`)"),
            })?;
            if !(income.is_finite() && income > 0.0) {
                return Err(Error::NonPositive {
                    what: format!("income for `{region}`"),
                });
            }
            if region.is_empty() {
                return Err(Error::Schema("income row with empty region".into()));
            }
            values.insert(region, income);
        }
        if values.is_empty() {
            return Err(Error::EmptyInput);
        }
        Ok(IncomeTable {
            fiscal_year: fiscal_year.to_string(),
            values,
        })
    }

    pub fn from_path(path: &Path, fiscal_year: &str) -> Result<Self> {
        Self::from_reader(std::fs::File::open(path)?, fiscal_year)
    }
}

/// Simple OLS fit of `y = intercept + slope * x`.
#[derive(Debug, Clone, Copy)]
pub struct OlsFit {
    pub slope: f64,
    pub intercept: f64,
    pub r: f64,
    pub p_value: f64,
    pub n: usize,
}

/// Least squares through centered sums, plus the associated correlation.
pub fn ols(xs: &[f64], ys: &[f64]) -> Result<OlsFit> {
    let (r, p_value) = pearson(xs, ys)?;
    let n = xs.len() as f64;
    let mean_x = xs.iter().sum::<f64>() / n;
    let mean_y = ys.iter().sum::<f64>() / n;
    let sxx: f64 = xs.iter().map(|x| (x - mean_x) * (x - mean_x)).sum();
    let sxy: f64 = xs
        .iter()
        .zip(ys)
        .map(|(x, y)| (x - mean_x) * (y - mean_y))
        .sum();
    let slope = sxy / sxx;
    let intercept = mean_y - slope * mean_x;
    Ok(OlsFit {
        slope,
        intercept,
        r,
        p_value,
        n: xs.len(),
    })
}

/// Pearson correlation and its two-sided p-value (t distribution, n - 2
/// degrees of freedom). Requires at least 3 paired points with variance on
/// both sides.
pub fn pearson(xs: &[f64], ys: &[f64]) -> Result<(f64, f64)> {
    if xs.len() != ys.len() {
        return Err(Error::LabelMismatch(format!(
            "pearson inputs have different lengths ({} vs {})",
            xs.len(),
            ys.len()
        )));
    }
    if xs.len() < 3 {
        return Err(Error::TooFewPoints {
            needed: 3,
            got: xs.len(),
            what: "paired observations".into(),
        });
    }
    let n = xs.len() as f64;
    let mean_x = xs.iter().sum::<f64>() / n;
    let mean_y = ys.iter().sum::<f64>() / n;
    let sxx: f64 = xs.iter().map(|x| (x - mean_x) * (x - mean_x)).sum();
    let syy: f64 = ys.iter().map(|y| (y - mean_y) * (y - mean_y)).sum();
    if sxx == 0.0 {
        return Err(Error::ZeroVariance("x values".into()));
    }
    if syy == 0.0 {
        return Err(Error::ZeroVariance("y values".into()));
    }
    let sxy: f64 = xs
        .iter()
        .zip(ys)
        .map(|(x, y)| (x - mean_x) * (y - mean_y))
        .sum();
    let r = (sxy / (sxx * syy).sqrt()).clamp(-1.0, 1.0);

    let df = n - 2.0;
    let denom = 1.0 - r * r;
    let p_value = if denom <= 0.0 {
        0.0
    } else {
        let t = r.abs() * (df / denom).sqrt();
        let dist = StudentsT::new(0.0, 1.0, df)
            .expect("n >= 3 gives positive degrees of freedom");
        2.0 * dist.cdf(-t)
    };
    Ok((r, p_value))
}

/// Exponential growth fit of yearly firm counts: OLS of ln(count) on year.
/// `params` carries `rate` (the exponent per year) and `intercept`.
pub fn firm_growth_fit(counts: &BTreeMap<i32, u64>) -> Result<FitSummary> {
    if counts.len() < 3 {
        return Err(Error::TooFewPoints {
            needed: 3,
            got: counts.len(),
            what: "yearly firm counts".into(),
        });
    }
    if let Some((year, _)) = counts.iter().find(|(_, &c)| c == 0) {
        return Err(Error::NonPositive {
            what: format!("firm count for year {year}"),
        });
    }
    let xs: Vec<f64> = counts.keys().map(|&y| f64::from(y)).collect();
    let ys: Vec<f64> = counts.values().map(|&c| (c as f64).ln()).collect();
    let fit = ols(&xs, &ys)?;
    let mut params = BTreeMap::new();
    params.insert("rate".into(), fit.slope);
    params.insert("intercept".into(), fit.intercept);
    Ok(FitSummary {
        model: FitModel::ExponentialGrowth,
        params,
        pearson_r: fit.r,
        p_value: fit.p_value,
        n: fit.n,
        range: None,
    })
}

/// Empirical complementary CDF at each distinct value, ascending.
/// `P(X >= x)` is 1 at the minimum by construction.
pub fn ccdf(values: &[f64]) -> Result<Vec<(f64, f64)>> {
    if values.is_empty() {
        return Err(Error::EmptyInput);
    }
    if let Some(bad) = values.iter().find(|v| !(v.is_finite() && **v > 0.0)) {
        return Err(Error::NonPositive {
            what: format!("ccdf input value {bad}"),
        });
    }
    let mut sorted = values.to_vec();
    sorted.sort_by(|a, b| a.partial_cmp(b).unwrap());
    let n = sorted.len() as f64;
    let mut points = Vec::new();
    let mut i = 0;
    while i < sorted.len() {
        let x = sorted[i];
        // count of values >= x is everything from the first occurrence on
        points.push((x, (sorted.len() - i) as f64 / n));
        let mut j = i + 1;
        while j < sorted.len() && sorted[j] == x {
            j += 1;
        }
        i = j;
    }
    Ok(points)
}

/// Default power-law fitting window: the 10th to 90th percentile of the
/// positive values (linear interpolation between order statistics).
pub fn default_powerlaw_window(values: &[f64]) -> Result<(f64, f64)> {
    if values.iter().any(|v| !(v.is_finite() && *v > 0.0)) {
        return Err(Error::NonPositive {
            what: "power-law window input".into(),
        });
    }
    if values.len() < 3 {
        return Err(Error::TooFewPoints {
            needed: 3,
            got: values.len(),
            what: "values for the default window".into(),
        });
    }
    let mut sorted = values.to_vec();
    sorted.sort_by(|a, b| a.partial_cmp(b).unwrap());
    Ok((percentile(&sorted, 0.10), percentile(&sorted, 0.90)))
}

fn percentile(sorted: &[f64], q: f64) -> f64 {
    let position = q * (sorted.len() - 1) as f64;
    let lower = position.floor() as usize;
    let upper = position.ceil() as usize;
    if lower == upper {
        sorted[lower]
    } else {
        let w = position - lower as f64;
        sorted[lower] * (1.0 - w) + sorted[upper] * w
    }
}

/// Log-log OLS of CCDF points inside `[lo, hi]` (inclusive).
///
/// `params` carries the raw log-log slope `m`, the density-convention
/// exponent `alpha = m - 1`, and the intercept.
pub fn powerlaw_fit(points: &[(f64, f64)], window: (f64, f64)) -> Result<FitSummary> {
    let (lo, hi) = window;
    let selected: Vec<(f64, f64)> = points
        .iter()
        .copied()
        .filter(|(x, _)| *x >= lo && *x <= hi)
        .collect();
    if selected.is_empty() {
        return Err(Error::EmptyWindow { lo, hi });
    }
    if selected.len() < 3 {
        return Err(Error::TooFewPoints {
            needed: 3,
            got: selected.len(),
            what: "ccdf points in the fitting window".into(),
        });
    }
    if let Some((x, p)) = selected
        .iter()
        .find(|(x, p)| !(x.is_finite() && *x > 0.0 && p.is_finite() && *p > 0.0))
    {
        return Err(Error::NonPositive {
            what: format!("ccdf point ({x}, {p})"),
        });
    }
    let xs: Vec<f64> = selected.iter().map(|(x, _)| x.ln()).collect();
    let ys: Vec<f64> = selected.iter().map(|(_, p)| p.ln()).collect();
    let fit = ols(&xs, &ys)?;
    let mut params = BTreeMap::new();
    params.insert("slope".into(), fit.slope);
    params.insert("alpha".into(), fit.slope - 1.0);
    params.insert("intercept".into(), fit.intercept);
    Ok(FitSummary {
        model: FitModel::PowerLawCcdf,
        params,
        pearson_r: fit.r,
        p_value: fit.p_value,
        n: fit.n,
        range: Some(window),
    })
}

/// Hill maximum-likelihood power-law estimate, for comparison with the OLS
/// fit. `alpha` follows the same negative density convention.
#[derive(Debug, Clone, Copy, Serialize)]
pub struct PowerLawMle {
    pub alpha: f64,
    pub x_min: f64,
    pub n_tail: usize,
}

pub fn powerlaw_mle(values: &[f64], x_min: f64) -> Result<PowerLawMle> {
    if !(x_min.is_finite() && x_min > 0.0) {
        return Err(Error::NonPositive {
            what: "x_min".into(),
        });
    }
    let tail: Vec<f64> = values.iter().copied().filter(|v| *v >= x_min).collect();
    if tail.len() < 3 {
        return Err(Error::TooFewPoints {
            needed: 3,
            got: tail.len(),
            what: "tail values above x_min".into(),
        });
    }
    let log_sum: f64 = tail.iter().map(|v| (v / x_min).ln()).sum();
    if log_sum <= 0.0 {
        return Err(Error::ZeroVariance("tail values (all equal to x_min)".into()));
    }
    let alpha_hat = 1.0 + tail.len() as f64 / log_sum;
    Ok(PowerLawMle {
        alpha: -alpha_hat,
        x_min,
        n_tail: tail.len(),
    })
}

fn match_regions(
    values: &[(String, f64)],
    income: &IncomeTable,
) -> Result<(Vec<String>, Vec<f64>, Vec<f64>)> {
    let mut labels = Vec::new();
    let mut xs = Vec::new();
    let mut ys = Vec::new();
    for (region, value) in values {
        if let Some(&gsdp) = income.values.get(region) {
            labels.push(region.clone());
            xs.push(*value);
            ys.push(gsdp);
        }
    }
    if labels.len() < 3 {
        return Err(Error::TooFewPoints {
            needed: 3,
            got: labels.len(),
            what: "regions present in both the index and the income table".into(),
        });
    }
    Ok((labels, xs, ys))
}

/// Exponential income fit: OLS of ln(income) on the complexity index.
/// Returns the fit plus the per-region residuals of ln(income).
pub fn income_regression_eci(
    eci: &[(String, f64)],
    income: &IncomeTable,
) -> Result<(FitSummary, Vec<(String, f64)>)> {
    let (labels, xs, ys) = match_regions(eci, income)?;
    let log_ys: Vec<f64> = ys.iter().map(|y| y.ln()).collect();
    let fit = ols(&xs, &log_ys)?;
    let residuals: Vec<(String, f64)> = labels
        .into_iter()
        .zip(xs.iter().zip(&log_ys))
        .map(|(label, (x, log_y))| (label, log_y - (fit.intercept + fit.slope * x)))
        .collect();
    let mut params = BTreeMap::new();
    params.insert("slope".into(), fit.slope);
    params.insert("intercept".into(), fit.intercept);
    Ok((
        FitSummary {
            model: FitModel::ExponentialOfX,
            params,
            pearson_r: fit.r,
            p_value: fit.p_value,
            n: fit.n,
            range: None,
        },
        residuals,
    ))
}

/// Power-law income fit: OLS of ln(income) on ln(fitness).
pub fn income_regression_fitness(
    fitness: &[(String, f64)],
    income: &IncomeTable,
) -> Result<(FitSummary, Vec<(String, f64)>)> {
    if let Some((region, v)) = fitness.iter().find(|(_, v)| !(v.is_finite() && *v > 0.0)) {
        return Err(Error::NonPositive {
            what: format!("fitness for `{region}` ({v})"),
        });
    }
    let (labels, xs, ys) = match_regions(fitness, income)?;
    let log_xs: Vec<f64> = xs.iter().map(|x| x.ln()).collect();
    let log_ys: Vec<f64> = ys.iter().map(|y| y.ln()).collect();
    let fit = ols(&log_xs, &log_ys)?;
    let residuals: Vec<(String, f64)> = labels
        .into_iter()
        .zip(log_xs.iter().zip(&log_ys))
        .map(|(label, (x, log_y))| (label, log_y - (fit.intercept + fit.slope * x)))
        .collect();
    let mut params = BTreeMap::new();
    params.insert("exponent".into(), fit.slope);
    params.insert("intercept".into(), fit.intercept);
    Ok((
        FitSummary {
            model: FitModel::PowerLawLogLog,
            params,
            pearson_r: fit.r,
            p_value: fit.p_value,
            n: fit.n,
            range: None,
        },
        residuals,
    ))
}

/// Diversification and mean neighbor ubiquity per region (the order-1
/// reflection), the two axes of the diversification-ubiquity plane.
pub fn diversification_ubiquity(bm: &BinaryMatrix) -> Result<Vec<(String, f64, f64)>> {
    let traces = complexity::reflections(bm, 1)?;
    Ok(bm
        .regions
        .iter()
        .enumerate()
        .map(|(s, region)| {
            (
                region.clone(),
                traces[0].region_values[s],
                traces[1].region_values[s],
            )
        })
        .collect())
}

/// Per-year complexity rankings aligned on the union of region labels.
#[derive(Debug, Clone)]
pub struct RankEvolution {
    pub years: Vec<i32>,
    /// Union of region labels across valid years, sorted.
    pub regions: Vec<String>,
    /// `ranks[year_index][region_index]`; `None` when the region is absent.
    pub ranks: Vec<Vec<Option<u32>>>,
    /// Years that failed the complexity preconditions, with the reason.
    pub skipped: Vec<(i32, String)>,
}

/// Rank regions by complexity for every snapshot year (1 = highest index).
///
/// Years whose matrix fails the complexity preconditions are skipped and
/// reported; it is an error when every year fails. Yearly computations run in
/// parallel when the `parallel` feature is on; assembly is ordered by year.
pub fn rank_evolution(snapshots: &[(i32, BinaryMatrix)]) -> Result<RankEvolution> {
    let computed: Vec<(i32, std::result::Result<ComputedYear, String>)> =
        exec::map(snapshots, |(year, bm)| {
            let outcome = complexity::eci(bm)
                .map(|result| ComputedYear {
                    regions: result.regions.clone(),
                    ranks: rank_desc(&result.regions, &result.eci),
                })
                .map_err(|e| e.to_string());
            (*year, outcome)
        });

    let mut years = Vec::new();
    let mut skipped = Vec::new();
    let mut valid: Vec<(i32, ComputedYear)> = Vec::new();
    for (year, outcome) in computed {
        match outcome {
            Ok(computed_year) => {
                years.push(year);
                valid.push((year, computed_year));
            }
            Err(reason) => skipped.push((year, reason)),
        }
    }
    if valid.is_empty() {
        return Err(Error::NoValidYears);
    }

    let mut union: Vec<String> = valid
        .iter()
        .flat_map(|(_, y)| y.regions.iter().cloned())
        .collect();
    union.sort();
    union.dedup();

    let ranks = valid
        .iter()
        .map(|(_, computed_year)| {
            let by_region: BTreeMap<&str, u32> = computed_year
                .regions
                .iter()
                .zip(&computed_year.ranks)
                .map(|(r, &rank)| (r.as_str(), rank))
                .collect();
            union
                .iter()
                .map(|region| by_region.get(region.as_str()).copied())
                .collect()
        })
        .collect();

    Ok(RankEvolution {
        years,
        regions: union,
        ranks,
        skipped,
    })
}

struct ComputedYear {
    regions: Vec<String>,
    ranks: Vec<u32>,
}

#[cfg(test)]
mod tests {
    use super::*;
    use ndarray::array;

    fn assert_close(a: f64, b: f64, tol: f64) {
        assert!((a - b).abs() <= tol, "{a} vs {b} (tol {tol})");
    }

    /// Independent OLS oracle using the normal equations on x values shifted
    /// by the first observation (the shift keeps the sums well conditioned).
    fn ols_oracle(xs: &[f64], ys: &[f64]) -> (f64, f64) {
        let n = xs.len() as f64;
        let x0 = xs[0];
        let shifted: Vec<f64> = xs.iter().map(|x| x - x0).collect();
        let sum_x: f64 = shifted.iter().sum();
        let sum_y: f64 = ys.iter().sum();
        let sum_xy: f64 = shifted.iter().zip(ys).map(|(x, y)| x * y).sum();
        let sum_xx: f64 = shifted.iter().map(|x| x * x).sum();
        let slope = (n * sum_xy - sum_x * sum_y) / (n * sum_xx - sum_x * sum_x);
        let shifted_intercept = (sum_y - slope * sum_x) / n;
        (slope, shifted_intercept - slope * x0)
    }

    /// p-value oracle: integrate the t density numerically (Simpson) instead
    /// of going through any library CDF. The tail beyond the cut is handled
    /// with the substitution u = 1/x, which turns the polynomially decaying
    /// integrand into a smooth one on a finite interval.
    fn p_value_oracle(t: f64, df: f64) -> f64 {
        let density = |x: f64| (1.0 + x * x / df).powf(-(df + 1.0) / 2.0);
        let tail_density =
            |u: f64| df.powf((df + 1.0) / 2.0) * u.powf(df - 1.0) * (df * u * u + 1.0).powf(-(df + 1.0) / 2.0);
        let simpson = |f: &dyn Fn(f64) -> f64, a: f64, b: f64, steps: usize| {
            let h = (b - a) / steps as f64;
            let mut total = f(a) + f(b);
            for i in 1..steps {
                let weight = if i % 2 == 1 { 4.0 } else { 2.0 };
                total += weight * f(a + i as f64 * h);
            }
            total * h / 3.0
        };
        let cut = t.abs();
        let tail = simpson(&tail_density, 0.0, 1.0 / cut, 200_000);
        let head = simpson(&density, 0.0, cut, 200_000);
        2.0 * tail / (2.0 * (head + tail))
    }

    #[test]
    fn growth_fit_recovers_noiseless_rate() {
        let mut counts = BTreeMap::new();
        for t in 0..12 {
            let value = (0.1 * f64::from(t)).exp() * 1000.0;
            counts.insert(2010 + t, value.round() as u64);
        }
        // rounding to integers perturbs the series slightly; use exact powers
        let mut exact = BTreeMap::new();
        for t in 0..6 {
            exact.insert(2010 + t, 1000u64 * 1024u64.pow(t as u32));
        }
        // ln of exact geometric series is perfectly linear
        let fit = firm_growth_fit(&exact).unwrap();
        assert_close(fit.params["rate"], 1024f64.ln(), 1e-10);
        assert_close(fit.pearson_r, 1.0, 1e-12);
        assert_close(fit.p_value, 0.0, 1e-12);

        let rough = firm_growth_fit(&counts).unwrap();
        assert_close(rough.params["rate"], 0.1, 1e-3);
    }

    #[test]
    fn growth_fit_rejects_zero_counts_and_short_series() {
        let mut counts = BTreeMap::new();
        counts.insert(2010, 5u64);
        counts.insert(2011, 6u64);
        assert!(firm_growth_fit(&counts).is_err());
        counts.insert(2012, 0u64);
        assert!(matches!(
            firm_growth_fit(&counts),
            Err(Error::NonPositive { .. })
        ));
    }

    #[test]
    fn growth_fit_matches_ols_oracle_on_seeded_noise() {
        use rand::{Rng, SeedableRng};
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(42);
        let mut counts = BTreeMap::new();
        for t in 0..20 {
            let noise: f64 = rng.random_range(0.9..1.1);
            let value = (0.112 * f64::from(t)).exp() * 5000.0 * noise;
            counts.insert(2005 + t, value as u64);
        }
        let fit = firm_growth_fit(&counts).unwrap();
        let xs: Vec<f64> = counts.keys().map(|&y| f64::from(y)).collect();
        let ys: Vec<f64> = counts.values().map(|&c| (c as f64).ln()).collect();
        let (slope, intercept) = ols_oracle(&xs, &ys);
        assert_close(fit.params["rate"], slope, 1e-10);
        assert_close(fit.params["intercept"], intercept, 1e-10);
    }

    #[test]
    fn ccdf_matches_definition() {
        let points = ccdf(&[1.0, 2.0, 4.0]).unwrap();
        assert_eq!(points, vec![(1.0, 1.0), (2.0, 2.0 / 3.0), (4.0, 1.0 / 3.0)]);
    }

    #[test]
    fn ccdf_of_equal_values_is_single_point() {
        let points = ccdf(&[3.0, 3.0, 3.0]).unwrap();
        assert_eq!(points, vec![(3.0, 1.0)]);
    }

    #[test]
    fn ccdf_rejects_non_positive_values() {
        assert!(ccdf(&[]).is_err());
        assert!(matches!(ccdf(&[1.0, 0.0]), Err(Error::NonPositive { .. })));
        assert!(matches!(ccdf(&[1.0, -2.0]), Err(Error::NonPositive { .. })));
    }

    #[test]
    fn ccdf_matches_counting_oracle_on_seeded_pareto() {
        use rand::{Rng, SeedableRng};
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(7);
        let values: Vec<f64> = (0..1000)
            .map(|_| {
                let u: f64 = rng.random::<f64>();
                (1.0 - u).powf(-1.0 / 1.8)
            })
            .collect();
        let points = ccdf(&values).unwrap();
        for (x, p) in points {
            let count = values.iter().filter(|v| **v >= x).count();
            assert_close(p, count as f64 / values.len() as f64, 1e-15);
        }
    }

    #[test]
    fn powerlaw_fit_recovers_exact_slope() {
        // exact CCDF P(x) = x^{-0.808} on a grid
        let points: Vec<(f64, f64)> = (1..50)
            .map(|i| {
                let x = 1.0 + f64::from(i) * 0.5;
                (x, x.powf(-0.808))
            })
            .collect();
        let fit = powerlaw_fit(&points, (1.0, 30.0)).unwrap();
        assert_close(fit.params["slope"], -0.808, 1e-10);
        assert_close(fit.params["alpha"], -1.808, 1e-10);
        assert_close(fit.pearson_r, -1.0, 1e-10);
    }

    #[test]
    fn powerlaw_fit_zipf_slope() {
        let points: Vec<(f64, f64)> = (1..20).map(|i| (f64::from(i), 1.0 / f64::from(i))).collect();
        let fit = powerlaw_fit(&points, (1.0, 19.0)).unwrap();
        assert_close(fit.params["slope"], -1.0, 1e-12);
    }

    #[test]
    fn powerlaw_fit_rejects_empty_window() {
        let points = vec![(1.0, 1.0), (2.0, 0.5), (3.0, 0.25)];
        assert!(matches!(
            powerlaw_fit(&points, (10.0, 20.0)),
            Err(Error::EmptyWindow { .. })
        ));
    }

    #[test]
    fn powerlaw_fit_matches_ols_oracle_on_seeded_sample() {
        use rand::{Rng, SeedableRng};
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(11);
        let values: Vec<f64> = (0..2000)
            .map(|_| {
                let u: f64 = rng.random::<f64>();
                (1.0 - u).powf(-1.0 / 1.808)
            })
            .collect();
        let window = default_powerlaw_window(&values).unwrap();
        let points = ccdf(&values).unwrap();
        let fit = powerlaw_fit(&points, window).unwrap();

        let selected: Vec<(f64, f64)> = points
            .iter()
            .copied()
            .filter(|(x, _)| *x >= window.0 && *x <= window.1)
            .collect();
        let xs: Vec<f64> = selected.iter().map(|(x, _)| x.ln()).collect();
        let ys: Vec<f64> = selected.iter().map(|(_, p)| p.ln()).collect();
        let (slope, intercept) = ols_oracle(&xs, &ys);
        assert_close(fit.params["slope"], slope, 1e-10);
        assert_close(fit.params["intercept"], intercept, 1e-10);
    }

    #[test]
    fn hill_estimator_is_near_planted_exponent() {
        use rand::{Rng, SeedableRng};
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(3);
        let values: Vec<f64> = (0..20000)
            .map(|_| {
                let u: f64 = rng.random::<f64>();
                (1.0 - u).powf(-1.0 / 0.808)
            })
            .collect();
        // density exponent is -(1 + 0.808) = -1.808
        let mle = powerlaw_mle(&values, 1.0).unwrap();
        assert!((mle.alpha - (-1.808)).abs() < 0.05, "alpha {}", mle.alpha);
        assert_eq!(mle.n_tail, values.len());
    }

    #[test]
    fn pearson_of_affine_relation_is_exactly_one() {
        let xs = [1.0, 2.0, 3.0, 4.0];
        let ys: Vec<f64> = xs.iter().map(|x| 2.0 * x + 1.0).collect();
        let (r, p) = pearson(&xs, &ys).unwrap();
        assert_eq!(r, 1.0);
        assert_eq!(p, 0.0);
        let ys_down: Vec<f64> = xs.iter().map(|x| -0.5 * x + 3.0).collect();
        let (r, _) = pearson(&xs, &ys_down).unwrap();
        assert_eq!(r, -1.0);
    }

    #[test]
    fn pearson_matches_hand_computed_five_point_dataset() {
        // xs = 1..5, ys = (2,1,4,3,7); by hand r = 12 / sqrt(10 * 21.2) = 6/sqrt(53)
        let xs = [1.0, 2.0, 3.0, 4.0, 5.0];
        let ys = [2.0, 1.0, 4.0, 3.0, 7.0];
        let (r, p) = pearson(&xs, &ys).unwrap();
        assert_close(r, 6.0 / 53f64.sqrt(), 1e-12);
        // p-value against a quadrature oracle of the t distribution
        let t = r * (3.0 / (1.0 - r * r)).sqrt();
        assert_close(p, p_value_oracle(t, 3.0), 1e-10);
    }

    #[test]
    fn pearson_rejects_degenerate_inputs() {
        assert!(pearson(&[1.0, 2.0], &[1.0, 2.0]).is_err());
        assert!(matches!(
            pearson(&[1.0, 1.0, 1.0], &[1.0, 2.0, 3.0]),
            Err(Error::ZeroVariance(_))
        ));
    }

    fn income(entries: &[(&str, f64)]) -> IncomeTable {
        IncomeTable {
            fiscal_year: "2023-24".into(),
            values: entries
                .iter()
                .map(|(r, v)| (r.to_string(), *v))
                .collect(),
        }
    }

    #[test]
    fn eci_income_regression_recovers_exact_relation() {
        let eci: Vec<(String, f64)> = [("A", -1.0), ("B", 0.0), ("C", 1.0), ("D", 2.0)]
            .iter()
            .map(|(r, v)| (r.to_string(), *v))
            .collect();
        let table = income(&[
            ("A", (10.0f64 + 0.5 * -1.0).exp()),
            ("B", (10.0f64).exp()),
            ("C", (10.0f64 + 0.5).exp()),
            ("D", (10.0f64 + 1.0).exp()),
        ]);
        let (fit, residuals) = income_regression_eci(&eci, &table).unwrap();
        assert_close(fit.params["slope"], 0.5, 1e-10);
        assert_close(fit.params["intercept"], 10.0, 1e-10);
        assert_close(fit.pearson_r, 1.0, 1e-12);
        for (_, residual) in residuals {
            assert_close(residual, 0.0, 1e-10);
        }
    }

    #[test]
    fn fitness_income_regression_recovers_power_law() {
        let fitness: Vec<(String, f64)> = [("A", 0.5), ("B", 1.0), ("C", 2.0), ("D", 4.0)]
            .iter()
            .map(|(r, v)| (r.to_string(), *v))
            .collect();
        let table = income(&[
            ("A", 3.0 * 0.5f64.powf(1.7)),
            ("B", 3.0),
            ("C", 3.0 * 2.0f64.powf(1.7)),
            ("D", 3.0 * 4.0f64.powf(1.7)),
        ]);
        let (fit, residuals) = income_regression_fitness(&fitness, &table).unwrap();
        assert_close(fit.params["exponent"], 1.7, 1e-10);
        assert_close(fit.params["intercept"], 3.0f64.ln(), 1e-10);
        assert_close(fit.pearson_r, 1.0, 1e-12);
        let residual_mean: f64 =
            residuals.iter().map(|(_, e)| e).sum::<f64>() / residuals.len() as f64;
        assert_close(residual_mean, 0.0, 1e-10);
    }

    #[test]
    fn income_regressions_match_ols_oracle_on_toy_table() {
        let eci: Vec<(String, f64)> = [("A", -0.9), ("B", 0.3), ("C", 0.8), ("D", 1.4)]
            .iter()
            .map(|(r, v)| (r.to_string(), *v))
            .collect();
        let table = income(&[("A", 900.0), ("B", 1800.0), ("C", 1500.0), ("D", 4200.0)]);
        let (fit, _) = income_regression_eci(&eci, &table).unwrap();
        let xs = [-0.9, 0.3, 0.8, 1.4];
        let ys: Vec<f64> = [900.0f64, 1800.0, 1500.0, 4200.0]
            .iter()
            .map(|v| v.ln())
            .collect();
        let (slope, intercept) = ols_oracle(&xs, &ys);
        assert_close(fit.params["slope"], slope, 1e-10);
        assert_close(fit.params["intercept"], intercept, 1e-10);
    }

    #[test]
    fn income_regression_requires_three_matched_regions() {
        let eci: Vec<(String, f64)> = [("A", 0.0), ("B", 1.0), ("X", 2.0)]
            .iter()
            .map(|(r, v)| (r.to_string(), *v))
            .collect();
        let table = income(&[("A", 1.0), ("B", 2.0), ("C", 3.0)]);
        assert!(matches!(
            income_regression_eci(&eci, &table),
            Err(Error::TooFewPoints { .. })
        ));
    }

    #[test]
    fn income_table_rejects_non_positive_values() {
        let err = IncomeTable::from_reader("region,gsdp\nA,-3\n".as_bytes(), "2023-24");
        assert!(err.is_err());
    }

    fn nested(n: usize) -> BinaryMatrix {
        let mut m = ndarray::Array2::zeros((n, n));
        for i in 0..n {
            for j in 0..(n - i) {
                m[[i, j]] = 1;
            }
        }
        BinaryMatrix::new(
            (0..n).map(|i| format!("R{i}")).collect(),
            (0..n).map(|j| format!("P{j}")).collect(),
            m,
        )
    }

    #[test]
    fn diversification_ubiquity_matches_reflections() {
        let bm = BinaryMatrix::new(
            vec!["A".into(), "B".into(), "C".into()],
            vec!["p".into(), "q".into(), "r".into()],
            array![[1, 1, 1], [1, 1, 0], [1, 0, 0]],
        );
        let rows = diversification_ubiquity(&bm).unwrap();
        assert_eq!(rows[0], ("A".into(), 3.0, 2.0));
        assert_eq!(rows[1], ("B".into(), 2.0, 2.5));
        assert_eq!(rows[2], ("C".into(), 1.0, 3.0));
    }

    #[test]
    fn rank_evolution_single_year_matches_eci_order() {
        let bm = nested(4);
        let evolution = rank_evolution(&[(2020, bm.clone())]).unwrap();
        assert_eq!(evolution.years, vec![2020]);
        assert_eq!(evolution.ranks.len(), 1);
        let ranks: Vec<u32> = evolution.ranks[0].iter().map(|r| r.unwrap()).collect();
        assert_eq!(ranks, vec![1, 2, 3, 4]);
        assert!(evolution.skipped.is_empty());
    }

    #[test]
    fn rank_evolution_identical_snapshots_are_identical_rows() {
        let bm = nested(5);
        let evolution = rank_evolution(&[(2020, bm.clone()), (2021, bm)]).unwrap();
        assert_eq!(evolution.ranks[0], evolution.ranks[1]);
    }

    #[test]
    fn rank_evolution_skips_degenerate_years() {
        let good = nested(4);
        let degenerate = BinaryMatrix::new(
            vec!["A".into(), "B".into(), "C".into()],
            vec!["p".into(), "q".into(), "r".into()],
            array![[1, 1, 1], [1, 1, 1], [1, 1, 1]],
        );
        let evolution = rank_evolution(&[(2019, degenerate), (2020, good)]).unwrap();
        assert_eq!(evolution.years, vec![2020]);
        assert_eq!(evolution.skipped.len(), 1);
        assert_eq!(evolution.skipped[0].0, 2019);
    }

    #[test]
    fn rank_evolution_errors_when_no_year_is_valid() {
        let degenerate = BinaryMatrix::new(
            vec!["A".into(), "B".into()],
            vec!["p".into(), "q".into()],
            array![[1, 1], [1, 1]],
        );
        assert!(matches!(
            rank_evolution(&[(2019, degenerate)]),
            Err(Error::NoValidYears)
        ));
    }

    #[test]
    fn rank_rows_are_permutations_each_year() {
        let evolution = rank_evolution(&[(2020, nested(6)), (2021, nested(4))]).unwrap();
        for row in &evolution.ranks {
            let mut present: Vec<u32> = row.iter().flatten().copied().collect();
            present.sort_unstable();
            let expected: Vec<u32> = (1..=present.len() as u32).collect();
            assert_eq!(present, expected);
        }
    }

    #[test]
    fn fits_are_order_invariant() {
        let xs = [3.0, 1.0, 2.0, 5.0, 4.0];
        let ys = [9.5, 2.0, 4.1, 25.0, 16.2];
        let (r1, p1) = pearson(&xs, &ys).unwrap();
        let mut pairs: Vec<(f64, f64)> = xs.iter().copied().zip(ys.iter().copied()).collect();
        pairs.reverse();
        let xs2: Vec<f64> = pairs.iter().map(|(x, _)| *x).collect();
        let ys2: Vec<f64> = pairs.iter().map(|(_, y)| *y).collect();
        let (r2, p2) = pearson(&xs2, &ys2).unwrap();
        assert_close(r1, r2, 1e-15);
        assert_close(p1, p2, 1e-15);
    }
}
