//! Property tests for the algebraic invariants of the pipeline.

use chrono::NaiveDate;
use ndarray::Array2;
use proptest::prelude::*;

use ecomplex::complexity;
use ecomplex::export;
use ecomplex::fitness::{fitness_complexity, FitnessOptions};
use ecomplex::ingest::{parse_registry, FirmRecord, Schema, Status};
use ecomplex::panel::{binarize, prune, rca, BinaryMatrix, RegionIndustryPanel};

fn panel_strategy(max_dim: usize) -> impl Strategy<Value = RegionIndustryPanel> {
    (2..=max_dim, 2..=max_dim)
        .prop_flat_map(|(s, p)| {
            proptest::collection::vec(1u32..1_000_000, s * p).prop_map(move |cells| {
                let weights = Array2::from_shape_vec(
                    (s, p),
                    cells.into_iter().map(f64::from).collect(),
                )
                .unwrap();
                RegionIndustryPanel {
                    regions: (0..s).map(|i| format!("R{i:02}")).collect(),
                    industries: (0..p).map(|j| format!("P{j:02}")).collect(),
                    weights,
                }
            })
        })
}

fn binary_matrix_strategy(max_dim: usize) -> impl Strategy<Value = BinaryMatrix> {
    (3..=max_dim, 3..=max_dim)
        .prop_flat_map(|(s, p)| {
            proptest::collection::vec(proptest::bool::weighted(0.5), s * p).prop_map(
                move |cells| {
                    let m = Array2::from_shape_vec(
                        (s, p),
                        cells.into_iter().map(u8::from).collect(),
                    )
                    .unwrap();
                    BinaryMatrix::new(
                        (0..s).map(|i| format!("R{i:02}")).collect(),
                        (0..p).map(|j| format!("P{j:02}")).collect(),
                        m,
                    )
                },
            )
        })
}

fn record_strategy() -> impl Strategy<Value = FirmRecord> {
    (
        "[A-Z][A-Z0-9]{4,9}",
        prop_oneof![Just("Karnataka"), Just("Delhi"), Just("Goa"), Just("Assam")],
        1u32..=99,
        0u32..5000,
        prop_oneof![
            Just(Status::Active),
            Just(Status::Other("STOF".to_string())),
            Just(Status::Other("DSLV".to_string()))
        ],
        0u64..10_000_000_000,
    )
        .prop_map(|(firm_id, region, nic, day_offset, status, capital)| {
            let nic2 = format!("{nic:02}");
            let date = NaiveDate::from_ymd_opt(2000, 1, 1).unwrap()
                + chrono::Duration::days(i64::from(day_offset));
            FirmRecord {
                firm_id,
                region: region.to_string(),
                nic_full: nic2.clone(),
                nic2,
                incorporation_date: date,
                status,
                paid_up_capital: capital,
            }
        })
}

proptest! {
    /// Sum over industries of RCA times the industry's national share is 1
    /// for every region.
    #[test]
    fn rca_share_identity(panel in panel_strategy(15)) {
        let rca_matrix = rca(&panel).unwrap();
        let (n_regions, n_industries) = panel.weights.dim();
        let total: f64 = panel.weights.iter().sum();
        for s in 0..n_regions {
            let mut acc = 0.0;
            for p in 0..n_industries {
                let industry_share = panel.weights.column(p).sum() / total;
                acc += rca_matrix.values[[s, p]] * industry_share;
            }
            prop_assert!((acc - 1.0).abs() <= 1e-12, "region {s}: {acc}");
        }
    }

    /// Scaling all weights by a power of two leaves RCA (and the binary
    /// matrix) bit-identical; powers of two commute exactly with IEEE
    /// rounding, which is what makes bitwise equality attainable at all.
    #[test]
    fn rca_scale_invariance(panel in panel_strategy(10), exponent in -3i32..=40) {
        let baseline = rca(&panel).unwrap();
        let mut scaled = panel.clone();
        let factor = 2f64.powi(exponent);
        scaled.weights.mapv_inplace(|w| w * factor);
        let rescaled = rca(&scaled).unwrap();
        for (a, b) in baseline.values.iter().zip(rescaled.values.iter()) {
            prop_assert_eq!(a.to_bits(), b.to_bits());
        }
        let m1 = binarize(&baseline, 1.0);
        let m2 = binarize(&rescaled, 1.0);
        prop_assert_eq!(m1.m, m2.m);
    }

    /// Raising the binarization threshold never adds a 1.
    #[test]
    fn binarize_is_monotone_in_threshold(
        panel in panel_strategy(10),
        lo in 0.2f64..1.0,
        delta in 0.0f64..1.5,
    ) {
        let rca_matrix = rca(&panel).unwrap();
        let coarse = binarize(&rca_matrix, lo + delta);
        let fine = binarize(&rca_matrix, lo);
        for (a, b) in coarse.m.iter().zip(fine.m.iter()) {
            prop_assert!(a <= b);
        }
    }

    #[test]
    fn prune_is_idempotent(bm in binary_matrix_strategy(12)) {
        if let Ok((once, _)) = prune(&bm) {
            let (twice, log) = prune(&once).unwrap();
            prop_assert_eq!(once, twice);
            prop_assert!(log.is_empty());
        }
    }

    /// Writing records to the canonical CSV and re-parsing them yields the
    /// identical records and zero rejects.
    #[test]
    fn records_round_trip(mut records in proptest::collection::vec(record_strategy(), 1..40)) {
        // the parser rejects duplicate ids, so make them unique up front
        let mut seen = std::collections::HashSet::new();
        records.retain(|r| seen.insert(r.firm_id.clone()));

        let mut buffer = Vec::new();
        export::write_records_csv(&mut buffer, &records).unwrap();
        let outcome = parse_registry(buffer.as_slice(), &Schema::canonical(), None).unwrap();
        prop_assert!(outcome.rejects.is_empty(), "rejects: {:?}", outcome.rejects);
        prop_assert_eq!(outcome.records, records);
    }

    /// Row-stochasticity of the transformed matrix and a unit leading
    /// eigenvalue on random pruned matrices.
    #[test]
    fn transformed_matrix_is_row_stochastic(bm in binary_matrix_strategy(12)) {
        if let Ok((pruned, _)) = prune(&bm) {
            let t = complexity::transformed_region_matrix(&pruned).unwrap();
            for row in t.rows() {
                prop_assert!((row.sum() - 1.0).abs() <= 1e-12);
            }
            // detailed balance: D * T is symmetric, so the spectrum is real
            let n = t.nrows();
            for i in 0..n {
                for j in 0..n {
                    let left = f64::from(pruned.diversification[i]) * t[[i, j]];
                    let right = f64::from(pruned.diversification[j]) * t[[j, i]];
                    prop_assert!((left - right).abs() <= 1e-12);
                }
            }
        }
    }

    /// Permuting region rows (labels attached) permutes the index identically.
    #[test]
    fn eci_is_permutation_equivariant(bm in binary_matrix_strategy(8), seed in 0u64..1000) {
        let Ok((pruned, _)) = prune(&bm) else { return Ok(()) };
        let Ok(base) = complexity::eci(&pruned) else { return Ok(()) };

        use rand::seq::SliceRandom;
        use rand::SeedableRng;
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(seed);
        let mut order: Vec<usize> = (0..pruned.regions.len()).collect();
        order.shuffle(&mut rng);

        let mut m = Array2::zeros(pruned.m.dim());
        for (new_row, &old_row) in order.iter().enumerate() {
            for j in 0..pruned.industries.len() {
                m[[new_row, j]] = pruned.m[[old_row, j]];
            }
        }
        let permuted = BinaryMatrix::new(
            order.iter().map(|&i| pruned.regions[i].clone()).collect(),
            pruned.industries.clone(),
            m,
        );
        let result = complexity::eci(&permuted).unwrap();
        for (new_row, &old_row) in order.iter().enumerate() {
            prop_assert!(
                (result.eci[new_row] - base.eci[old_row]).abs() <= 1e-9,
                "row {old_row} -> {new_row}: {} vs {}",
                result.eci[new_row],
                base.eci[old_row]
            );
        }
    }

    /// A region whose industry set strictly contains another's keeps strictly
    /// larger fitness at every iteration.
    #[test]
    fn fitness_respects_row_domination(
        bm in binary_matrix_strategy(8),
        row in 0usize..8,
    ) {
        let Ok((pruned, _)) = prune(&bm) else { return Ok(()) };
        let (n_regions, n_industries) = pruned.shape();
        let dominated = row % n_regions;

        // plant a dominating row: everything the dominated row has, plus one
        let mut m = Array2::zeros((n_regions + 1, n_industries));
        for s in 0..n_regions {
            for p in 0..n_industries {
                m[[s, p]] = pruned.m[[s, p]];
            }
        }
        let mut extended = false;
        for p in 0..n_industries {
            let bit = pruned.m[[dominated, p]];
            m[[n_regions, p]] = bit;
            if !extended && bit == 0 {
                m[[n_regions, p]] = 1;
                extended = true;
            }
        }
        if !extended {
            return Ok(()); // dominated row already full; nothing to dominate with
        }
        let extra_industry = (0..n_industries)
            .find(|&p| m[[n_regions, p]] == 1 && pruned.m[[dominated, p]] == 0)
            .unwrap();
        let mut regions: Vec<String> = pruned.regions.clone();
        regions.push("RDOM".to_string());
        let planted = BinaryMatrix::new(regions, pruned.industries.clone(), m);

        let result = fitness_complexity(
            &planted,
            &FitnessOptions {
                record_trace: true,
                max_iter: 60,
                rank_stability_window: usize::MAX,
                ..FitnessOptions::default()
            },
        )
        .unwrap();
        // Strict dominance holds in exact arithmetic. In doubles it holds
        // until the extra industry's complexity drops below the resolution
        // of the shared sum, after which the two fitnesses tie exactly.
        let mut previous_extra_complexity = 1.0f64;
        for (n, iterate) in result.trace.as_ref().unwrap().iter().enumerate() {
            let dominating = iterate.fitness[n_regions];
            let lesser = iterate.fitness[dominated];
            let resolvable = previous_extra_complexity > dominating * 1e-13;
            if resolvable {
                prop_assert!(
                    dominating > lesser,
                    "domination violated at iteration {} ({dominating} vs {lesser})",
                    n + 1
                );
            } else {
                prop_assert!(
                    dominating >= lesser,
                    "dominated row overtook at iteration {}",
                    n + 1
                );
            }
            previous_extra_complexity = iterate.complexity[extra_industry];
        }
    }
}
