//! Dataset files and normalization on realistic layouts.

mod common;

use std::path::Path;

use mfrpn::data::{compute_stats, load_dataset, normalize, write_dataset, Dataset};
use mfrpn::metrics::{grouped_metrics, Grouping, MetricConfig};
use mfrpn::rpn::PredictiveEnsemble;
use mfrpn::Matrix;
use rand_distr::{Distribution, Normal};

fn lonlat_fixture() -> Dataset {
    load_dataset(&Path::new(env!("CARGO_MANIFEST_DIR")).join("tests/fixtures/lonlat/lonlat.json")).unwrap()
}

#[test]
fn hand_built_lonlat_fixture_loads() {
    let ds = lonlat_fixture();
    assert_eq!(ds.len(), 4);
    assert_eq!(ds.targets().col(0), vec![-45.0, -27.0, 45.0, 63.0]);
    assert_eq!(ds.inputs().row(3), &[0.5, 0.5]);
    assert_eq!(ds.sample_coords(1), &[0, 0, 1]);
    assert!(ds.is_raw());
}

#[test]
fn lonlat_fixture_groups_into_four_cells() {
    let ds = lonlat_fixture();
    let y = ds.targets().clone();
    let mut shifted = y.clone();
    shifted.as_mut_slice().iter_mut().for_each(|v| *v += 2.0);
    let pred = PredictiveEnsemble::from_members(vec![y, shifted]).unwrap();
    let report = grouped_metrics("fixture", &ds, &pred, Grouping::LonLat, &MetricConfig::default()).unwrap();
    assert_eq!(report.rows.len(), 4);
    for row in &report.rows {
        assert_eq!(row.count, 1);
        assert_eq!(row.mae, 1.0);
        assert_eq!(row.sigma_mean, 1.0);
        assert_eq!(row.r2, None);
    }
    assert_eq!(common::brute_force_grouped(&ds, &pred).unwrap(), 1 + 4 + 2 + 1);
}

#[test]
fn written_fixture_reloads_identically() {
    let ds = lonlat_fixture();
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("copy.json");
    write_dataset(&ds, &path).unwrap();
    let back = load_dataset(&path).unwrap();
    assert_eq!(back.inputs(), ds.inputs());
    assert_eq!(back.targets(), ds.targets());
    assert_eq!(back.axes(), ds.axes());
    assert_eq!(back.coord_index(), ds.coord_index());
    for f in ["inputs", "targets", "coords", "index"] {
        let a = std::fs::read(dir.path().join(format!("copy.{f}"))).unwrap();
        let b = std::fs::read(Path::new(env!("CARGO_MANIFEST_DIR")).join(format!("tests/fixtures/lonlat/lonlat.{f}"))).unwrap();
        assert_eq!(a, b, "{f}");
    }
}

fn sample(n: usize, mean: f64, std: f64, seed: u64) -> Dataset {
    let mut rng = common::rng(seed);
    let d = Normal::new(mean, std).unwrap();
    let x: Vec<f64> = (0..n).map(|_| d.sample(&mut rng)).collect();
    Dataset::from_arrays("t", Matrix::column(&x), Matrix::column(&x)).unwrap()
}

fn moments(ds: &Dataset) -> (f64, f64) {
    let v = ds.inputs().col(0);
    let n = v.len() as f64;
    let m = v.iter().sum::<f64>() / n;
    (m, (v.iter().map(|x| (x - m) * (x - m)).sum::<f64>() / n).sqrt())
}

#[test]
fn shifted_test_set_is_tamer_under_warm_stats() {
    // historical climate, a warmer low-fidelity climate, and a warm test period
    let historical = sample(2000, 280.0, 2.0, 1);
    let warm_lf = sample(2000, 285.0, 4.0, 2);
    let warm_test = sample(500, 286.0, 3.0, 3);
    let (m_hist, s_hist) = moments(&normalize(&warm_test, &compute_stats(&historical).unwrap()).unwrap());
    let (m_lf, s_lf) = moments(&normalize(&warm_test, &compute_stats(&warm_lf).unwrap()).unwrap());
    assert!(m_hist > 2.5 && s_hist > 1.3, "historical stats: mean {m_hist}, std {s_hist}");
    assert!(m_lf.abs() < 0.5 && (s_lf - 1.0).abs() < 0.4, "low-fidelity stats: mean {m_lf}, std {s_lf}");
}
