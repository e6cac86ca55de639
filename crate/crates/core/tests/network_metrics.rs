use invamp::io_model::*;
use invamp::network_metrics::*;
use invamp::Error;
use nalgebra::{DMatrix, DVector};
use proptest::prelude::*;

fn chain() -> NetworkModel {
    NetworkModel::from_atilde(
        DMatrix::from_row_slice(2, 2, &[0.0, 0.0, 0.5, 0.0]),
        DMatrix::from_column_slice(2, 1, &[1.0, 0.0]),
        DVector::from_element(1, 1.0),
    )
    .unwrap()
}

fn toy_table() -> IoTable {
    load_io_table(concat!(env!("CARGO_MANIFEST_DIR"), "/tests/fixtures/toy2.csv")).unwrap()
}

fn neumann(m: &DMatrix<f64>, terms: usize) -> DMatrix<f64> {
    let n = m.nrows();
    let mut acc = DMatrix::identity(n, n);
    let mut p = DMatrix::identity(n, n);
    for _ in 1..terms {
        p = &p * m;
        acc += &p;
    }
    acc
}

/// Σ_n ((1 − ω^{n+1})/(1 − ω)) Ã^n B_j / L̃B_j by brute force.
fn ucal_series(model: &NetworkModel, w: f64, terms: usize) -> DMatrix<f64> {
    let n = model.n_sectors();
    let mut num = DMatrix::zeros(n, model.n_destinations());
    let mut p = DMatrix::identity(n, n);
    for k in 0..terms {
        num += &p * &model.b * ((1.0 - w.powi(k as i32 + 1)) / (1.0 - w));
        p = &p * &model.atilde;
    }
    let lb = neumann(&model.atilde, terms) * &model.b;
    num.zip_map(&lb, |a, b| if b > 0.0 { a / b } else { f64::NAN })
}

#[test]
fn leontief_of_zero_is_identity() {
    let m = NetworkModel::from_atilde(DMatrix::zeros(3, 3), DMatrix::from_element(3, 1, 1.0 / 3.0), DVector::from_element(1, 1.0)).unwrap();
    assert_eq!(leontief(&m).unwrap(), DMatrix::identity(3, 3));
}

#[test]
fn leontief_of_nilpotent_chain_is_finite_sum() {
    let m = chain();
    let l = leontief(&m).unwrap();
    assert!((l - (DMatrix::identity(2, 2) + &m.atilde)).abs().max() < 1e-15);
}

#[test]
fn leontief_matches_truncated_series() {
    let m = synthesize(&SyntheticSpec::random(20, 3, 0.3, 11)).unwrap();
    let l = leontief(&m).unwrap();
    let tail = neumann_tail_bound(&m.atilde, 60);
    assert!(tail < 1e-9);
    assert!((&l - neumann(&m.atilde, 60)).abs().max() < 1e-9);
    let n = m.n_sectors();
    assert!((&l * (DMatrix::identity(n, n) - &m.atilde) - DMatrix::identity(n, n)).abs().max() < 1e-10);
}

#[test]
fn toy_upstreamness_and_downstreamness() {
    let t = toy_table();
    let u = upstreamness(&t).unwrap().values;
    assert!((u[0] - 1.0).abs() < 1e-14 && (u[1] - 2.0).abs() < 1e-14);
    // Oracle: D = Σ_k (𝒜ᵀ)^k 1 with 𝒜 nilpotent.
    let d = downstreamness(&t).unwrap().values;
    assert!((d[0] - 1.5).abs() < 1e-14 && (d[1] - 1.0).abs() < 1e-14);
}

#[test]
fn line_upstreamness_counts_stages() {
    let m = synthesize(&SyntheticSpec::line(5, 0.6)).unwrap();
    let t = table_from_model(&m).unwrap();
    let u = upstreamness(&t).unwrap().values;
    for (d, v) in u.iter().enumerate() {
        assert!((v - (d as f64 + 1.0)).abs() < 1e-12, "sector {d}: {v}");
    }
    assert_eq!(model_upstreamness(&m).unwrap().values.iter().map(|v| v.round()).collect::<Vec<_>>(), vec![1.0, 2.0, 3.0, 4.0, 5.0]);
}

#[test]
fn line_downstreamness_approaches_length() {
    let mut last = 0.0;
    for w in [0.9, 0.99, 0.999] {
        let t = table_from_model(&synthesize(&SyntheticSpec::line(4, w)).unwrap()).unwrap();
        last = downstreamness(&t).unwrap().values[0];
    }
    assert!((last - 4.0).abs() < 1e-2, "{last}");
}

#[test]
fn zero_output_sector_is_excluded() {
    let z = DMatrix::zeros(2, 2);
    let f = DMatrix::from_column_slice(2, 1, &[1.0, 0.0]);
    let t = IoTable::new(vec![SectorLabel::new("a", "c0", "i"), SectorLabel::new("b", "c0", "j")], vec!["c0".into()], z, f, None, None).unwrap();
    let u = upstreamness(&t).unwrap();
    assert_eq!(u.excluded, vec![1]);
    assert!(u.values[1].is_nan());
}

#[test]
fn intermediary_exposure_is_half_half() {
    // Wood sells 1 to domestic consumers and 1 to furniture, which exports everything.
    let sectors = vec![SectorLabel::new("furniture", "home", "f"), SectorLabel::new("wood", "home", "w")];
    let z = DMatrix::from_row_slice(2, 2, &[0.0, 0.0, 1.0, 0.0]);
    let f = DMatrix::from_row_slice(2, 2, &[0.0, 2.0, 1.0, 0.0]);
    let t = IoTable::new(sectors, vec!["home".into(), "abroad".into()], z, f, None, None).unwrap();
    let m = build_network_with(&t, Weighting::Direct).unwrap();
    let xi = exposure_shares(&m).unwrap().xi;
    assert!((xi[(1, 0)] - 0.5).abs() < 1e-14 && (xi[(1, 1)] - 0.5).abs() < 1e-14);
    assert!((xi[(0, 1)] - 1.0).abs() < 1e-14);
}

#[test]
fn single_destination_and_symmetric_shares() {
    let m = synthesize(&SyntheticSpec::random(8, 1, 0.4, 2)).unwrap();
    assert!(exposure_shares(&m).unwrap().xi.iter().all(|v| (v - 1.0).abs() < 1e-14));
    let sym = NetworkModel::from_atilde(
        DMatrix::from_row_slice(2, 2, &[0.0, 0.0, 0.3, 0.0]),
        DMatrix::from_row_slice(2, 3, &[1.0, 1.0, 1.0, 0.0, 0.0, 0.0]),
        DVector::from_element(3, 2.0),
    )
    .unwrap();
    let xi = exposure_shares(&sym).unwrap().xi;
    assert!(xi.iter().all(|v| (v - 1.0 / 3.0).abs() < 1e-14));
    let h = hhi(&xi).unwrap();
    assert!(h.iter().all(|v| (v - 1.0 / 3.0).abs() < 1e-14));
}

#[test]
fn hhi_arithmetic() {
    let h = hhi(&DMatrix::from_row_slice(2, 2, &[0.7, 0.3, 1.0, 0.0])).unwrap();
    assert!((h[0] - 0.58).abs() < 1e-15);
    assert_eq!(h[1], 1.0);
    assert!(hhi(&DMatrix::from_row_slice(1, 2, &[0.7, 0.4])).is_err());
}

#[test]
fn chain_inventory_upstreamness() {
    let p = OmegaParams::new(0.4, 0.7).unwrap();
    assert!((p.omega() - 0.88).abs() < 1e-15);
    let iu = inventory_upstreamness(&chain(), &p).unwrap();
    assert!((iu.ucal[(0, 0)] - 1.0).abs() < 1e-14);
    assert!((iu.ucal[(1, 0)] - 1.88).abs() < 1e-14);
    let closed = inventory_upstreamness_resolvent(&chain(), &p).unwrap();
    assert!((closed[(1, 0)] - 1.88).abs() < 1e-12);
}

#[test]
fn small_omega_collapses_to_one() {
    let m = synthesize(&SyntheticSpec::random(10, 2, 0.4, 5)).unwrap();
    let p = OmegaParams { alpha: 1.0 / 0.9 - 1e-9, rho: 0.1 };
    let iu = inventory_upstreamness(&m, &p).unwrap();
    assert!(iu.ucal.iter().filter(|v| v.is_finite()).all(|v| (v - 1.0).abs() < 1e-7));
}

#[test]
fn near_unit_persistence_recovers_upstreamness() {
    let m = synthesize(&SyntheticSpec::random(20, 3, 0.3, 9)).unwrap();
    let p = OmegaParams::new(0.4, 1.0 - 1e-6).unwrap();
    let avg = inventory_upstreamness(&m, &p).unwrap().avg;
    let u = model_upstreamness(&m).unwrap().values;
    assert!((avg - u).abs().max() < 1e-4);
}

#[test]
fn omega_outside_unit_interval_is_a_domain_error() {
    assert!(matches!(OmegaParams::new(2.0, 0.3), Err(Error::Domain(_))));
    assert!(matches!(OmegaParams::new(0.4, -1.0), Err(Error::Domain(_))));
    let p = OmegaParams { alpha: 4.0, rho: 0.5 };
    assert!(matches!(inventory_upstreamness(&chain(), &p), Err(Error::Domain(_))));
}

#[test]
fn smaller_consumption_weight_means_more_upstream() {
    let m = NetworkModel::from_atilde(
        DMatrix::from_row_slice(3, 3, &[0.0, 0.0, 0.0, 0.3, 0.0, 0.0, 0.3, 0.0, 0.0]),
        DMatrix::from_column_slice(3, 1, &[0.5, 0.1, 0.4]),
        DVector::from_element(1, 1.0),
    )
    .unwrap();
    let iu = inventory_upstreamness(&m, &OmegaParams::new(0.4, 0.7).unwrap()).unwrap();
    assert!(iu.ucal[(1, 0)] > iu.ucal[(2, 0)]);
}

#[test]
fn weighted_shock_cases() {
    let p = OmegaParams::new(0.4, 0.7).unwrap();
    let m = synthesize(&SyntheticSpec::random(15, 2, 0.3, 21)).unwrap();
    assert!(weighted_shock(&m, &p, &DVector::zeros(2)).unwrap().iter().all(|v| v.abs() < 1e-15));
    let one = synthesize(&SyntheticSpec::random(15, 1, 0.3, 21)).unwrap();
    let v = weighted_shock(&one, &p, &DVector::from_element(1, 1.0)).unwrap();
    let avg = inventory_upstreamness(&one, &p).unwrap().avg;
    assert!((v - avg).abs().max() < 1e-12);
    let eta = DVector::from_vec(vec![1.0, -1.0]);
    let v = weighted_shock(&m, &p, &eta).unwrap();
    let iu = inventory_upstreamness(&m, &p).unwrap();
    let xi = exposure_shares(&m).unwrap().xi;
    for r in 0..15 {
        let mut s = 0.0;
        for j in 0..2 {
            if xi[(r, j)] > 0.0 {
                s += iu.ucal[(r, j)] * xi[(r, j)] * eta[j];
            }
        }
        assert!((v[r] - s).abs() < 1e-10, "sector {r}");
    }
}

#[test]
fn weighted_shock_without_inventories_uses_double_sum() {
    let m = synthesize(&SyntheticSpec::random(10, 3, 0.3, 4)).unwrap();
    let p = OmegaParams::new(0.0, 0.7).unwrap();
    let eta = DVector::from_vec(vec![0.1, -0.2, 0.05]);
    let v = weighted_shock(&m, &p, &eta).unwrap();
    let iu = inventory_upstreamness(&m, &p).unwrap();
    let u = model_upstreamness(&m).unwrap().values;
    assert!(v.iter().all(|x| x.is_finite()));
    assert!((iu.avg - u).abs().max() < 1e-10);
}

#[test]
fn discretize_rules() {
    let m = chain();
    let empty = discretize(&m, 10.0, &[], -0.1, 0.1).unwrap();
    assert!(empty.adjacency.iter().all(|v| *v == 0));
    let d = discretize(&m, 0.2, &[-0.1 - 1e-9, -0.1, 0.0, 0.0999, 0.1, 0.3], -0.1, 0.1).unwrap();
    assert_eq!(d.adjacency[(1, 0)], 1);
    assert_eq!(d.adjacency.iter().map(|v| *v as u32).sum::<u32>(), 1);
    assert_eq!(d.shocks, vec![Some(-1), Some(-1), Some(0), Some(0), None, None]);
    assert!(discretize(&m, 0.2, &[], 0.1, 0.2).is_err());
}

proptest! {
    #[test]
    fn series_and_bounds(seed in 0u64..500, j in 1usize..4, alpha in 0.05f64..0.9, rho in 0.0f64..0.95) {
        let m = synthesize(&SyntheticSpec::random(10, j, 0.3, seed)).unwrap();
        let p = OmegaParams::new(alpha, rho).unwrap();
        let iu = inventory_upstreamness(&m, &p).unwrap();
        let series = ucal_series(&m, p.omega(), 400);
        let closed = inventory_upstreamness_resolvent(&m, &p).unwrap();
        let u = model_upstreamness(&m).unwrap().values;
        let xi = exposure_shares(&m).unwrap().xi;
        for r in 0..10 {
            for c in 0..j {
                let v = iu.ucal[(r, c)];
                if v.is_finite() {
                    prop_assert!((v - series[(r, c)]).abs() < 1e-9);
                    prop_assert!((v - closed[(r, c)]).abs() < 1e-9 * v.max(1.0) / (1.0 - p.omega()).min(1.0));
                    prop_assert!(v >= 1.0 - 1e-12);
                }
            }
            prop_assert!((xi.row(r).sum() - 1.0).abs() < 1e-12);
            prop_assert!(iu.avg[r] >= 1.0 - 1e-12 && iu.avg[r] <= u[r] + 1e-12);
        }
    }

    #[test]
    fn ucal_rises_with_persistence_and_loading_rises_with_alpha(seed in 0u64..200, a in 0.05f64..0.5, r in 0.05f64..0.85) {
        let m = synthesize(&SyntheticSpec::random(8, 2, 0.4, seed)).unwrap();
        let base = inventory_upstreamness(&m, &OmegaParams::new(a, r).unwrap()).unwrap().ucal;
        let up_a = inventory_upstreamness(&m, &OmegaParams::new(a + 0.3, r).unwrap()).unwrap().ucal;
        let up_r = inventory_upstreamness(&m, &OmegaParams::new(a, r + 0.1).unwrap()).unwrap().ucal;
        for k in 0..base.len() {
            if base[k].is_finite() {
                prop_assert!(up_r[k] >= base[k] - 1e-12);
                // ω falls as α rises, so 𝒰 falls while αρ𝒰 rises.
                prop_assert!(up_a[k] <= base[k] + 1e-12);
                prop_assert!((a + 0.3) * up_a[k] >= a * base[k] - 1e-12);
            }
        }
    }

    #[test]
    fn metrics_are_scale_invariant(seed in 0u64..200, k in 0.01f64..100.0) {
        let t = table_from_model(&synthesize(&SyntheticSpec::random(8, 2, 0.4, seed)).unwrap()).unwrap();
        let p = OmegaParams::new(0.4, 0.7).unwrap();
        let a = position_metrics(&t, &build_network(&t).unwrap(), &p).unwrap();
        let s = t.scaled(k);
        let b = position_metrics(&s, &build_network(&s).unwrap(), &p).unwrap();
        prop_assert!((a.u - b.u).abs().max() < 1e-12);
        prop_assert!((a.ddown - b.ddown).abs().max() < 1e-12);
        prop_assert!((a.xi - b.xi).abs().max() < 1e-12);
        prop_assert!((a.hhi - b.hhi).abs().max() < 1e-12);
        prop_assert!((a.ucal_avg - b.ucal_avg).abs().max() < 1e-12);
    }
}
