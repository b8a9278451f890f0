//! Weighted region-industry panels, revealed comparative advantage and the
//! binary specialization matrix.

use std::collections::{BTreeMap, BTreeSet};

use ndarray::Array2;
use serde::Serialize;

use crate::error::{Error, Marginal, Result};
use crate::ingest::FirmRecord;

/// RCA threshold used throughout unless a caller overrides it.
pub const DEFAULT_RCA_THRESHOLD: f64 = 1.0;

/// Dense weighted matrix of summed paid-up capital per region and industry.
///
/// Labels are sorted lexicographically and duplicate-free; weights are
/// converted from exact integer minor-unit sums, so identical inputs always
/// produce identical panels.
#[derive(Debug, Clone, PartialEq)]
pub struct RegionIndustryPanel {
    pub regions: Vec<String>,
    pub industries: Vec<String>,
    pub weights: Array2<f64>,
}

impl RegionIndustryPanel {
    pub fn grand_total(&self) -> f64 {
        self.weights.iter().sum()
    }
}

/// RCA values for every region-industry pair of a panel.
#[derive(Debug, Clone, PartialEq)]
pub struct RcaMatrix {
    pub regions: Vec<String>,
    pub industries: Vec<String>,
    pub values: Array2<f64>,
}

/// The binary specialization matrix with its degree vectors.
#[derive(Debug, Clone, PartialEq)]
pub struct BinaryMatrix {
    pub regions: Vec<String>,
    pub industries: Vec<String>,
    pub m: Array2<u8>,
    /// Row sums: number of industries each region is specialized in.
    pub diversification: Vec<u32>,
    /// Column sums: number of regions each industry appears in.
    pub ubiquity: Vec<u32>,
}

impl BinaryMatrix {
    /// Build from entries, computing the degree vectors.
    pub fn new(regions: Vec<String>, industries: Vec<String>, m: Array2<u8>) -> Self {
        assert_eq!(m.nrows(), regions.len());
        assert_eq!(m.ncols(), industries.len());
        let diversification = m
            .rows()
            .into_iter()
            .map(|row| row.iter().map(|&x| u32::from(x)).sum())
            .collect();
        let ubiquity = m
            .columns()
            .into_iter()
            .map(|col| col.iter().map(|&x| u32::from(x)).sum())
            .collect();
        BinaryMatrix {
            regions,
            industries,
            m,
            diversification,
            ubiquity,
        }
    }

    pub fn shape(&self) -> (usize, usize) {
        (self.regions.len(), self.industries.len())
    }

    /// Every row and column has at least one entry.
    pub fn is_pruned(&self) -> bool {
        self.diversification.iter().all(|&d| d > 0) && self.ubiquity.iter().all(|&u| u > 0)
    }

    /// Error naming the first degenerate label, if any.
    pub fn require_pruned(&self) -> Result<()> {
        if let Some(i) = self.diversification.iter().position(|&d| d == 0) {
            return Err(Error::ZeroMarginal {
                kind: Marginal::Region,
                label: self.regions[i].clone(),
            });
        }
        if let Some(j) = self.ubiquity.iter().position(|&u| u == 0) {
            return Err(Error::ZeroMarginal {
                kind: Marginal::Industry,
                label: self.industries[j].clone(),
            });
        }
        Ok(())
    }
}

/// Labels removed by [`prune`], in removal order.
#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize)]
pub struct PruneLog {
    pub removed_regions: Vec<String>,
    pub removed_industries: Vec<String>,
    pub passes: usize,
}

impl PruneLog {
    pub fn is_empty(&self) -> bool {
        self.removed_regions.is_empty() && self.removed_industries.is_empty()
    }
}

/// Sum paid-up capital per region-industry pair; labels are drawn from the
/// records and sorted.
///
/// Fails when no record carries positive capital (the grand total would be
/// zero and every share downstream would divide by it).
pub fn aggregate<'a, I>(records: I) -> Result<RegionIndustryPanel>
where
    I: IntoIterator<Item = &'a FirmRecord>,
{
    let records: Vec<&FirmRecord> = records.into_iter().collect();
    let mut regions: BTreeSet<&str> = BTreeSet::new();
    let mut industries: BTreeSet<&str> = BTreeSet::new();
    for r in &records {
        regions.insert(&r.region);
        industries.insert(&r.nic2);
    }
    let regions: Vec<String> = regions.into_iter().map(String::from).collect();
    let industries: Vec<String> = industries.into_iter().map(String::from).collect();
    let (panel, skipped) = aggregate_into(records, &regions, &industries)?;
    debug_assert_eq!(skipped, 0);
    Ok(panel)
}

/// Like [`aggregate`], but over caller-supplied label universes.
///
/// Records whose region or industry is not in the given sets are skipped and
/// counted. Labels are sorted and must be duplicate-free.
pub fn aggregate_into<'a, I>(
    records: I,
    regions: &[String],
    industries: &[String],
) -> Result<(RegionIndustryPanel, usize)>
where
    I: IntoIterator<Item = &'a FirmRecord>,
{
    let mut regions: Vec<String> = regions.to_vec();
    let mut industries: Vec<String> = industries.to_vec();
    regions.sort();
    industries.sort();
    if regions.windows(2).any(|w| w[0] == w[1]) {
        return Err(Error::LabelMismatch("duplicate region label".into()));
    }
    if industries.windows(2).any(|w| w[0] == w[1]) {
        return Err(Error::LabelMismatch("duplicate industry label".into()));
    }

    let region_index: BTreeMap<&str, usize> = regions
        .iter()
        .enumerate()
        .map(|(i, r)| (r.as_str(), i))
        .collect();
    let industry_index: BTreeMap<&str, usize> = industries
        .iter()
        .enumerate()
        .map(|(j, p)| (p.as_str(), j))
        .collect();

    // Exact integer accumulation in minor units; floats only at the end.
    let mut sums: Vec<u128> = vec![0; regions.len() * industries.len()];
    let mut skipped = 0usize;
    let mut any = false;
    for record in records {
        match (
            region_index.get(record.region.as_str()),
            industry_index.get(record.nic2.as_str()),
        ) {
            (Some(&s), Some(&p)) => {
                sums[s * industries.len() + p] += u128::from(record.paid_up_capital);
                any = true;
            }
            _ => skipped += 1,
        }
    }
    if !any || sums.iter().all(|&x| x == 0) {
        return Err(Error::EmptyPanel);
    }

    let weights = Array2::from_shape_vec(
        (regions.len(), industries.len()),
        sums.into_iter().map(|x| x as f64 / 100.0).collect(),
    )
    .expect("shape matches by construction");

    Ok((
        RegionIndustryPanel {
            regions,
            industries,
            weights,
        },
        skipped,
    ))
}

/// Revealed comparative advantage: each region-industry share relative to the
/// industry's overall share.
///
/// Both marginals must be strictly positive; a zero row or column is reported
/// with its label so the caller can prune or investigate.
pub fn rca(panel: &RegionIndustryPanel) -> Result<RcaMatrix> {
    let (n_regions, n_industries) = panel.weights.dim();
    let row_sums: Vec<f64> = (0..n_regions)
        .map(|s| panel.weights.row(s).iter().sum())
        .collect();
    let col_sums: Vec<f64> = (0..n_industries)
        .map(|p| panel.weights.column(p).iter().sum())
        .collect();
    let total: f64 = row_sums.iter().sum();

    if let Some(s) = row_sums.iter().position(|&x| x <= 0.0) {
        return Err(Error::ZeroMarginal {
            kind: Marginal::Region,
            label: panel.regions[s].clone(),
        });
    }
    if let Some(p) = col_sums.iter().position(|&x| x <= 0.0) {
        return Err(Error::ZeroMarginal {
            kind: Marginal::Industry,
            label: panel.industries[p].clone(),
        });
    }

    let mut values = Array2::zeros((n_regions, n_industries));
    for s in 0..n_regions {
        for p in 0..n_industries {
            values[[s, p]] = (panel.weights[[s, p]] / row_sums[s]) / (col_sums[p] / total);
        }
    }
    Ok(RcaMatrix {
        regions: panel.regions.clone(),
        industries: panel.industries.clone(),
        values,
    })
}

/// Threshold an RCA matrix into the binary specialization matrix.
///
/// The comparison is `rca >= threshold`, exact, with no epsilon.
pub fn binarize(rca: &RcaMatrix, threshold: f64) -> BinaryMatrix {
    let m = rca.values.mapv(|v| u8::from(v >= threshold));
    BinaryMatrix::new(rca.regions.clone(), rca.industries.clone(), m)
}

/// Remove all-zero rows and columns until none remain.
///
/// Rows are checked first, then columns, repeating to a fixpoint; removed
/// labels are logged in removal order. An input that prunes away completely
/// is an error.
pub fn prune(bm: &BinaryMatrix) -> Result<(BinaryMatrix, PruneLog)> {
    let mut keep_rows: Vec<usize> = (0..bm.regions.len()).collect();
    let mut keep_cols: Vec<usize> = (0..bm.industries.len()).collect();
    let mut log = PruneLog::default();

    loop {
        log.passes += 1;
        let mut changed = false;

        keep_rows.retain(|&s| {
            let alive = keep_cols.iter().any(|&p| bm.m[[s, p]] != 0);
            if !alive {
                log.removed_regions.push(bm.regions[s].clone());
                changed = true;
            }
            alive
        });
        keep_cols.retain(|&p| {
            let alive = keep_rows.iter().any(|&s| bm.m[[s, p]] != 0);
            if !alive {
                log.removed_industries.push(bm.industries[p].clone());
                changed = true;
            }
            alive
        });

        if !changed {
            break;
        }
    }

    if keep_rows.is_empty() || keep_cols.is_empty() {
        return Err(Error::EmptyAfterPrune);
    }

    let mut m = Array2::zeros((keep_rows.len(), keep_cols.len()));
    for (i, &s) in keep_rows.iter().enumerate() {
        for (j, &p) in keep_cols.iter().enumerate() {
            m[[i, j]] = bm.m[[s, p]];
        }
    }
    let regions = keep_rows.iter().map(|&s| bm.regions[s].clone()).collect();
    let industries = keep_cols.iter().map(|&p| bm.industries[p].clone()).collect();
    Ok((BinaryMatrix::new(regions, industries, m), log))
}
