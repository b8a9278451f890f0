//! Method-of-reflections iterates, the transformed similarity matrices and
//! the spectral complexity indices.
//!
//! The region-region matrix is row-stochastic but not symmetric. It is
//! similar to a symmetric matrix through conjugation with the square root of
//! the diversification diagonal, so the spectrum is real; we decompose the
//! symmetric conjugate and map the eigenvectors back. The index is the
//! standardized eigenvector of the second largest eigenvalue, oriented so
//! that it correlates non-negatively with diversification (and the industry
//! index with rarity, i.e. negative ubiquity).

use ndarray::Array2;
use serde::Serialize;

use crate::error::{Error, Marginal, Result};
use crate::linalg;
use crate::panel::BinaryMatrix;

/// Spectra closer than this between the second and third eigenvalue are
/// treated as degenerate: the index direction would be arbitrary.
pub const DEGENERACY_TOL: f64 = 1e-9;

const LEADING_EIGENVALUE_TOL: f64 = 1e-8;

/// One order of the reflections recursion.
#[derive(Debug, Clone, PartialEq)]
pub struct ReflectionsTrace {
    pub order: usize,
    pub region_values: Vec<f64>,
    pub industry_values: Vec<f64>,
}

/// How the index signs were fixed.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub struct SignAnchor {
    /// Whether the raw region eigenvector was negated to correlate
    /// non-negatively with diversification.
    pub eci_flipped: bool,
    /// Whether the raw industry eigenvector was negated to correlate
    /// non-negatively with negative ubiquity.
    pub pci_flipped: bool,
}

/// Standardized complexity indices plus spectral diagnostics.
#[derive(Debug, Clone, PartialEq)]
pub struct ComplexityResult {
    pub regions: Vec<String>,
    pub industries: Vec<String>,
    /// Region index, mean 0 and sample standard deviation 1.
    pub eci: Vec<f64>,
    /// Industry index, standardized likewise.
    pub pci: Vec<f64>,
    /// Real spectrum of the region-region matrix, descending.
    pub eigenvalues: Vec<f64>,
    pub sign_anchor: SignAnchor,
}

/// Reflections iterates for orders `0..=max_order`.
///
/// Order 0 is exactly (diversification, ubiquity); each later order averages
/// the other side's previous order over the bipartite links.
pub fn reflections(bm: &BinaryMatrix, max_order: usize) -> Result<Vec<ReflectionsTrace>> {
    bm.require_pruned()?;
    let (n_regions, n_industries) = bm.shape();
    let mut region_values: Vec<f64> = bm.diversification.iter().map(|&d| f64::from(d)).collect();
    let mut industry_values: Vec<f64> = bm.ubiquity.iter().map(|&u| f64::from(u)).collect();

    let mut traces = vec![ReflectionsTrace {
        order: 0,
        region_values: region_values.clone(),
        industry_values: industry_values.clone(),
    }];

    for order in 1..=max_order {
        let next_region: Vec<f64> = (0..n_regions)
            .map(|s| {
                let sum: f64 = (0..n_industries)
                    .filter(|&p| bm.m[[s, p]] != 0)
                    .map(|p| industry_values[p])
                    .sum();
                sum / f64::from(bm.diversification[s])
            })
            .collect();
        let next_industry: Vec<f64> = (0..n_industries)
            .map(|p| {
                let sum: f64 = (0..n_regions)
                    .filter(|&s| bm.m[[s, p]] != 0)
                    .map(|s| region_values[s])
                    .sum();
                sum / f64::from(bm.ubiquity[p])
            })
            .collect();
        region_values = next_region;
        industry_values = next_industry;
        traces.push(ReflectionsTrace {
            order,
            region_values: region_values.clone(),
            industry_values: industry_values.clone(),
        });
    }
    Ok(traces)
}

/// The region-region transformed matrix: shared industries weighted by the
/// inverse of the row's diversification and each industry's ubiquity.
/// Row-stochastic by construction.
pub fn transformed_region_matrix(bm: &BinaryMatrix) -> Result<Array2<f64>> {
    bm.require_pruned()?;
    let (n_regions, n_industries) = bm.shape();
    let mut out = Array2::zeros((n_regions, n_regions));
    for s in 0..n_regions {
        for s2 in 0..n_regions {
            let mut sum = 0.0;
            for p in 0..n_industries {
                if bm.m[[s, p]] != 0 && bm.m[[s2, p]] != 0 {
                    sum += 1.0 / (f64::from(bm.diversification[s]) * f64::from(bm.ubiquity[p]));
                }
            }
            out[[s, s2]] = sum;
        }
    }
    Ok(out)
}

/// Industry-industry counterpart of [`transformed_region_matrix`].
pub fn transformed_industry_matrix(bm: &BinaryMatrix) -> Result<Array2<f64>> {
    bm.require_pruned()?;
    let (n_regions, n_industries) = bm.shape();
    let mut out = Array2::zeros((n_industries, n_industries));
    for p in 0..n_industries {
        for p2 in 0..n_industries {
            let mut sum = 0.0;
            for s in 0..n_regions {
                if bm.m[[s, p]] != 0 && bm.m[[s, p2]] != 0 {
                    sum += 1.0 / (f64::from(bm.ubiquity[p]) * f64::from(bm.diversification[s]));
                }
            }
            out[[p, p2]] = sum;
        }
    }
    Ok(out)
}

/// Second eigenvector of a row-stochastic transformed matrix, extracted via
/// the symmetric conjugate. `degrees` is the diagonal that makes
/// `D^{1/2} T D^{-1/2}` symmetric. Returns (eigenvalues desc, raw index).
fn second_eigenvector(
    transformed: &Array2<f64>,
    degrees: &[u32],
    side: Marginal,
) -> Result<(Vec<f64>, Vec<f64>)> {
    let n = transformed.nrows();
    if n < 3 {
        return Err(Error::TooFewLabels {
            kind: side,
            found: n,
        });
    }
    let sqrt_deg: Vec<f64> = degrees.iter().map(|&d| f64::from(d).sqrt()).collect();

    // Symmetric conjugate; build the upper triangle and mirror so the input
    // to the eigensolver is exactly symmetric.
    let mut sym = Array2::zeros((n, n));
    for i in 0..n {
        for j in i..n {
            let value = transformed[[i, j]] * sqrt_deg[i] / sqrt_deg[j];
            sym[[i, j]] = value;
            sym[[j, i]] = value;
        }
    }

    let (eigenvalues, eigenvectors) = linalg::jacobi_eigh(&sym);

    if (eigenvalues[0] - 1.0).abs() > LEADING_EIGENVALUE_TOL {
        return Err(Error::SpectralAssertion(format!(
            "leading eigenvalue of the {side} matrix is {} instead of 1",
            eigenvalues[0]
        )));
    }
    let gap = (eigenvalues[1] - eigenvalues[2]).abs();
    if gap < DEGENERACY_TOL {
        return Err(Error::DegenerateSpectrum { kind: side, gap });
    }

    // Map the symmetric eigenvector back to the transformed matrix's basis.
    let raw: Vec<f64> = (0..n).map(|i| eigenvectors[[i, 1]] / sqrt_deg[i]).collect();
    Ok((eigenvalues, raw))
}

/// Orient so the correlation with `anchor` is non-negative.
///
/// A correlation within rounding distance of zero (symmetric structures
/// produce mathematically exact zeros whose computed value straddles zero
/// depending on summation order) falls back to making the entry of the
/// lexicographically smallest label with a nonzero value positive; anchoring
/// on labels rather than positions keeps the orientation equivariant under
/// row permutations.
fn orient(values: &mut [f64], anchor: &[f64], labels: &[String]) -> bool {
    let signal = linalg::centered_dot(values, anchor);
    let scale =
        (linalg::centered_dot(values, values) * linalg::centered_dot(anchor, anchor)).sqrt();
    let flip = if scale > 0.0 && (signal / scale).abs() > 1e-12 {
        signal < 0.0
    } else {
        let mut order: Vec<usize> = (0..labels.len()).collect();
        order.sort_by(|&i, &j| labels[i].cmp(&labels[j]));
        order
            .into_iter()
            .find(|&i| values[i].abs() > 1e-12)
            .is_some_and(|i| values[i] < 0.0)
    };
    if flip {
        for v in values.iter_mut() {
            *v = -*v;
        }
    }
    flip
}

/// Economic complexity of regions and industries from the pruned binary
/// matrix.
///
/// Errors when either side has fewer than 3 labels or when the second and
/// third eigenvalues are closer than [`DEGENERACY_TOL`] (identical rows at
/// small sizes being the common cause).
pub fn eci(bm: &BinaryMatrix) -> Result<ComplexityResult> {
    bm.require_pruned()?;

    let region_t = transformed_region_matrix(bm)?;
    let (eigenvalues, raw_region) =
        second_eigenvector(&region_t, &bm.diversification, Marginal::Region)?;
    let mut eci = linalg::standardize(&raw_region)?;
    let diversification: Vec<f64> = bm.diversification.iter().map(|&d| f64::from(d)).collect();
    let eci_flipped = orient(&mut eci, &diversification, &bm.regions);

    let industry_t = transformed_industry_matrix(bm)?;
    let (_, raw_industry) = second_eigenvector(&industry_t, &bm.ubiquity, Marginal::Industry)?;
    let mut pci = linalg::standardize(&raw_industry)?;
    let rarity: Vec<f64> = bm.ubiquity.iter().map(|&u| -f64::from(u)).collect();
    let pci_flipped = orient(&mut pci, &rarity, &bm.industries);

    Ok(ComplexityResult {
        regions: bm.regions.clone(),
        industries: bm.industries.clone(),
        eci,
        pci,
        eigenvalues,
        sign_anchor: SignAnchor {
            eci_flipped,
            pci_flipped,
        },
    })
}

/// Region index estimated by re-standardized even-order reflections instead
/// of the eigensolver: the order-0 vector is standardized, multiplied by the
/// transformed matrix once per even order, and re-standardized each time so
/// the iterates cannot collapse onto the uniform vector.
///
/// With a well-separated second eigenvalue this converges (up to sign) to the
/// spectral index and serves as its independent cross-check.
pub fn reflection_eci_estimate(bm: &BinaryMatrix, order: usize) -> Result<Vec<f64>> {
    if order < 2 || order % 2 != 0 {
        return Err(Error::Config(format!(
            "reflection estimate needs a positive even order, got {order}"
        )));
    }
    let transformed = transformed_region_matrix(bm)?;
    let diversification: Vec<f64> = bm.diversification.iter().map(|&d| f64::from(d)).collect();
    let mut z = linalg::standardize(&diversification)?;
    for _ in 0..order / 2 {
        let next: Vec<f64> = (0..z.len())
            .map(|s| (0..z.len()).map(|s2| transformed[[s, s2]] * z[s2]).sum())
            .collect();
        z = linalg::standardize(&next)?;
    }
    Ok(z)
}
