//! The nonlinear fitness-complexity fixed point.
//!
//! Starting from uniform vectors, region fitness sums the complexities of the
//! industries it hosts, while industry complexity is the inverse of the sum
//! of inverse fitnesses of its hosts; both updates read the previous step's
//! values and each vector is divided by its mean afterwards. Absolute values
//! can keep drifting (some components decay to zero on non-nested matrices),
//! but the rankings settle, so convergence is declared when both rankings
//! have been stable for a configurable window of consecutive iterations.

use serde::Serialize;

use crate::error::{Error, Result};
use crate::panel::BinaryMatrix;

/// Iteration controls.
#[derive(Debug, Clone)]
pub struct FitnessOptions {
    pub max_iter: usize,
    /// Consecutive iterations with unchanged rankings required to stop.
    pub rank_stability_window: usize,
    /// Record every iterate (for diagnostics and tests).
    pub record_trace: bool,
    /// Carry log-domain values; survives the underflow that kills the linear
    /// iteration when complexities collapse toward zero.
    pub log_domain: bool,
}

impl Default for FitnessOptions {
    fn default() -> Self {
        FitnessOptions {
            max_iter: 1000,
            rank_stability_window: 10,
            record_trace: false,
            log_domain: false,
        }
    }
}

/// One recorded iterate.
#[derive(Debug, Clone)]
pub struct FitnessIterate {
    pub fitness: Vec<f64>,
    pub complexity: Vec<f64>,
}

/// Fitness per region and complexity per industry, both mean 1.
#[derive(Debug, Clone)]
pub struct FitnessResult {
    pub regions: Vec<String>,
    pub industries: Vec<String>,
    pub fitness: Vec<f64>,
    pub industry_complexity: Vec<f64>,
    pub iterations_run: usize,
    pub converged: bool,
    /// Consecutive iterations with stable rankings at the stop.
    pub stable_iterations: usize,
    pub log_domain: bool,
    pub trace: Option<Vec<FitnessIterate>>,
}

/// Dense 1-based ranks: regions by descending fitness, industries by
/// descending complexity, ties broken by label.
#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct FitnessRanks {
    pub regions: Vec<(String, u32)>,
    pub industries: Vec<(String, u32)>,
}

/// Rank positions (1 = largest value) per original index, ties broken by
/// ascending label.
pub(crate) fn rank_desc(labels: &[String], values: &[f64]) -> Vec<u32> {
    debug_assert_eq!(labels.len(), values.len());
    let mut order: Vec<usize> = (0..values.len()).collect();
    order.sort_by(|&i, &j| {
        values[j]
            .partial_cmp(&values[i])
            .expect("rank values must be comparable")
            .then_with(|| labels[i].cmp(&labels[j]))
    });
    let mut ranks = vec![0u32; values.len()];
    for (position, &index) in order.iter().enumerate() {
        ranks[index] = position as u32 + 1;
    }
    ranks
}

struct Adjacency {
    /// Industries per region.
    rows: Vec<Vec<usize>>,
    /// Regions per industry.
    cols: Vec<Vec<usize>>,
}

fn adjacency(bm: &BinaryMatrix) -> Adjacency {
    let (n_regions, n_industries) = bm.shape();
    let mut rows = vec![Vec::new(); n_regions];
    let mut cols = vec![Vec::new(); n_industries];
    for s in 0..n_regions {
        for p in 0..n_industries {
            if bm.m[[s, p]] != 0 {
                rows[s].push(p);
                cols[p].push(s);
            }
        }
    }
    Adjacency { rows, cols }
}

fn all_positive_finite(values: &[f64]) -> bool {
    values.iter().all(|v| v.is_finite() && *v > 0.0)
}

fn normalize_mean(values: &mut [f64]) {
    let mean = values.iter().sum::<f64>() / values.len() as f64;
    for v in values.iter_mut() {
        *v /= mean;
    }
}

fn logsumexp<I: Iterator<Item = f64> + Clone>(values: I) -> f64 {
    let max = values.clone().fold(f64::NEG_INFINITY, f64::max);
    if !max.is_finite() {
        return max;
    }
    max + values.map(|v| (v - max).exp()).sum::<f64>().ln()
}

/// Run the coupled fitness-complexity iteration on a pruned matrix.
///
/// In the default linear mode a non-finite or non-positive intermediate stops
/// the run with [`Error::NumericalUnderflow`] carrying the iteration index;
/// retrying with `log_domain = true` evaluates the same recursion on
/// logarithms (sums via log-sum-exp) and cannot underflow. Values returned
/// from the log-domain mode are exponentiated at the end, clamping anything
/// below the smallest positive double.
pub fn fitness_complexity(bm: &BinaryMatrix, options: &FitnessOptions) -> Result<FitnessResult> {
    bm.require_pruned()?;
    if options.max_iter < 1 {
        return Err(Error::Config("fitness needs max_iter >= 1".into()));
    }
    if options.log_domain {
        iterate_log_domain(bm, options)
    } else {
        iterate_linear(bm, options)
    }
}

fn iterate_linear(bm: &BinaryMatrix, options: &FitnessOptions) -> Result<FitnessResult> {
    let (n_regions, n_industries) = bm.shape();
    let adj = adjacency(bm);

    let mut fitness = vec![1.0; n_regions];
    let mut complexity = vec![1.0; n_industries];
    let mut region_ranks = rank_desc(&bm.regions, &fitness);
    let mut industry_ranks = rank_desc(&bm.industries, &complexity);

    let mut trace = options.record_trace.then(Vec::new);
    let mut stable = 0usize;
    let mut iterations_run = 0usize;

    for iteration in 1..=options.max_iter {
        let new_fitness: Vec<f64> = adj
            .rows
            .iter()
            .map(|industries| industries.iter().map(|&p| complexity[p]).sum())
            .collect();
        let new_complexity: Vec<f64> = adj
            .cols
            .iter()
            .map(|regions| 1.0 / regions.iter().map(|&s| 1.0 / fitness[s]).sum::<f64>())
            .collect();

        fitness = new_fitness;
        complexity = new_complexity;
        if !all_positive_finite(&fitness) || !all_positive_finite(&complexity) {
            return Err(Error::NumericalUnderflow { iteration });
        }
        normalize_mean(&mut fitness);
        normalize_mean(&mut complexity);
        if !all_positive_finite(&fitness) || !all_positive_finite(&complexity) {
            return Err(Error::NumericalUnderflow { iteration });
        }

        if let Some(t) = trace.as_mut() {
            t.push(FitnessIterate {
                fitness: fitness.clone(),
                complexity: complexity.clone(),
            });
        }

        iterations_run = iteration;
        let new_region_ranks = rank_desc(&bm.regions, &fitness);
        let new_industry_ranks = rank_desc(&bm.industries, &complexity);
        if new_region_ranks == region_ranks && new_industry_ranks == industry_ranks {
            stable += 1;
        } else {
            stable = 0;
        }
        region_ranks = new_region_ranks;
        industry_ranks = new_industry_ranks;
        if stable >= options.rank_stability_window {
            break;
        }
    }

    Ok(FitnessResult {
        regions: bm.regions.clone(),
        industries: bm.industries.clone(),
        fitness,
        industry_complexity: complexity,
        iterations_run,
        converged: stable >= options.rank_stability_window,
        stable_iterations: stable,
        log_domain: false,
        trace,
    })
}

fn iterate_log_domain(bm: &BinaryMatrix, options: &FitnessOptions) -> Result<FitnessResult> {
    let (n_regions, n_industries) = bm.shape();
    let adj = adjacency(bm);

    let mut log_fitness = vec![0.0f64; n_regions];
    let mut log_complexity = vec![0.0f64; n_industries];
    let mut region_ranks = rank_desc(&bm.regions, &log_fitness);
    let mut industry_ranks = rank_desc(&bm.industries, &log_complexity);

    let mut trace = options.record_trace.then(Vec::new);
    let mut stable = 0usize;
    let mut iterations_run = 0usize;

    for iteration in 1..=options.max_iter {
        let new_log_fitness: Vec<f64> = adj
            .rows
            .iter()
            .map(|industries| logsumexp(industries.iter().map(|&p| log_complexity[p])))
            .collect();
        let new_log_complexity: Vec<f64> = adj
            .cols
            .iter()
            .map(|regions| -logsumexp(regions.iter().map(|&s| -log_fitness[s])))
            .collect();

        log_fitness = new_log_fitness;
        log_complexity = new_log_complexity;

        // normalize by the mean: subtract log(sum exp(x)) - log(n)
        let shift_f = logsumexp(log_fitness.iter().copied()) - (n_regions as f64).ln();
        for v in log_fitness.iter_mut() {
            *v -= shift_f;
        }
        let shift_q = logsumexp(log_complexity.iter().copied()) - (n_industries as f64).ln();
        for v in log_complexity.iter_mut() {
            *v -= shift_q;
        }

        if log_fitness.iter().chain(&log_complexity).any(|v| v.is_nan()) {
            return Err(Error::NumericalUnderflow { iteration });
        }

        if let Some(t) = trace.as_mut() {
            t.push(FitnessIterate {
                fitness: log_fitness.iter().map(|v| clamp_exp(*v)).collect(),
                complexity: log_complexity.iter().map(|v| clamp_exp(*v)).collect(),
            });
        }

        iterations_run = iteration;
        let new_region_ranks = rank_desc(&bm.regions, &log_fitness);
        let new_industry_ranks = rank_desc(&bm.industries, &log_complexity);
        if new_region_ranks == region_ranks && new_industry_ranks == industry_ranks {
            stable += 1;
        } else {
            stable = 0;
        }
        region_ranks = new_region_ranks;
        industry_ranks = new_industry_ranks;
        if stable >= options.rank_stability_window {
            break;
        }
    }

    Ok(FitnessResult {
        regions: bm.regions.clone(),
        industries: bm.industries.clone(),
        fitness: log_fitness.iter().map(|v| clamp_exp(*v)).collect(),
        industry_complexity: log_complexity.iter().map(|v| clamp_exp(*v)).collect(),
        iterations_run,
        converged: stable >= options.rank_stability_window,
        stable_iterations: stable,
        log_domain: true,
        trace,
    })
}

fn clamp_exp(log_value: f64) -> f64 {
    log_value.exp().max(f64::MIN_POSITIVE)
}

/// Dense rank lists for a fitness result.
pub fn ranks(result: &FitnessResult) -> FitnessRanks {
    let region_ranks = rank_desc(&result.regions, &result.fitness);
    let industry_ranks = rank_desc(&result.industries, &result.industry_complexity);
    FitnessRanks {
        regions: result
            .regions
            .iter()
            .cloned()
            .zip(region_ranks)
            .collect(),
        industries: result
            .industries
            .iter()
            .cloned()
            .zip(industry_ranks)
            .collect(),
    }
}
