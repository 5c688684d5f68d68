use std::path::{Path, PathBuf};

use aatr::dataio::{
    load_dataset, load_long_csv, read_wide_csv, write_columns, write_wide_csv, DatasetSpec, ResponseSource,
    ResponseTransform,
};
use aatr::grid::GridSpec;
use nalgebra::{DMatrix, DVector};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

const GRID: GridSpec = GridSpec { p: 24, a: -1.0, b: 1.0 };

fn write(dir: &Path, name: &str, text: &str) -> PathBuf {
    let p = dir.join(name);
    std::fs::write(&p, text).unwrap();
    p
}

fn hourly(units: &[&str], value: impl Fn(usize, usize) -> f64) -> String {
    let mut s = String::from("unit,time,value\n");
    for (u, name) in units.iter().enumerate() {
        for h in 0..24 {
            s.push_str(&format!("{name},{h:02}:00,{}\n", value(u, h)));
        }
    }
    s
}

#[test]
fn two_hourly_units_give_a_two_row_dataset() {
    let dir = tempfile::tempdir().unwrap();
    let curves = write(dir.path(), "c.csv", &hourly(&["b", "a"], |u, h| (u * 10 + h) as f64));
    let resp = write(dir.path(), "r.csv", "unit,response\na,1.5\nb,-2\n");
    let loaded = load_dataset(&DatasetSpec::new(curves, ResponseSource::File(resp), GRID)).unwrap();
    assert_eq!(loaded.units, ["a", "b"]);
    assert_eq!(loaded.dataset.x().shape(), (2, 24));
    assert_eq!(loaded.dataset.y().as_slice(), [1.5, -2.0]);
    assert!(loaded.excluded.is_empty());
    // Hourly samples land at cell starts, so a linear profile is shifted by
    // half an hour at each grid midpoint.
    let row_a: Vec<f64> = loaded.dataset.x().row(0).iter().copied().collect();
    for (k, v) in row_a.iter().enumerate().take(23) {
        assert!((v - (10.0 + k as f64 + 0.5)).abs() < 1e-9, "cell {k}: {v}");
    }
}

#[test]
fn sparse_units_are_excluded_and_reported() {
    let dir = tempfile::tempdir().unwrap();
    let mut text = hourly(&["full"], |_, h| (h as f64).sin());
    for h in [1, 9, 17] {
        text.push_str(&format!("sparse,{h:02}:00,1.0\n"));
    }
    let curves = write(dir.path(), "c.csv", &text);
    let resp = write(dir.path(), "r.csv", "unit,response\nfull,1\nsparse,2\n");
    let loaded = load_dataset(&DatasetSpec::new(curves, ResponseSource::File(resp), GRID)).unwrap();
    assert_eq!(loaded.units, ["full"]);
    assert_eq!(loaded.excluded.len(), 1);
    assert_eq!(loaded.excluded[0].unit_id, "sparse");
    assert!(loaded.excluded[0].reason.contains('3'));
}

#[test]
fn duplicate_timestamp_names_the_unit() {
    let dir = tempfile::tempdir().unwrap();
    let mut text = hourly(&["u1", "u2"], |_, h| h as f64);
    text.push_str("u2,05:00,3.0\n");
    let curves = write(dir.path(), "c.csv", &text);
    let spec = DatasetSpec::new(&curves, ResponseSource::File(curves.clone()), GRID);
    let err = load_long_csv(&curves, &spec).unwrap_err().to_string();
    assert!(err.contains("u2") && err.contains("duplicate"), "{err}");
}

#[test]
fn malformed_rows_are_reported_with_line_numbers() {
    let dir = tempfile::tempdir().unwrap();
    let mut text = hourly(&["u1"], |_, h| h as f64);
    text.push_str("u1,25:99,1.0\nu1,03:30,abc\n");
    let curves = write(dir.path(), "c.csv", &text);
    let resp = write(dir.path(), "r.csv", "unit,response\nu1,1\n");
    let err = load_dataset(&DatasetSpec::new(curves, ResponseSource::File(resp), GRID))
        .unwrap_err()
        .to_string();
    assert!(err.contains("line 26") && err.contains("line 27"), "{err}");
}

#[test]
fn unit_mismatch_lists_both_sides() {
    let dir = tempfile::tempdir().unwrap();
    let curves = write(dir.path(), "c.csv", &hourly(&["a", "b"], |_, h| h as f64));
    let resp = write(dir.path(), "r.csv", "unit,response\na,1\nz,2\n");
    let err = load_dataset(&DatasetSpec::new(curves, ResponseSource::File(resp), GRID))
        .unwrap_err()
        .to_string();
    assert!(err.contains("\"b\"") && err.contains("\"z\""), "{err}");
}

#[test]
fn response_column_with_transforms() {
    let dir = tempfile::tempdir().unwrap();
    let mut text = String::from("unit,time,value,load\n");
    for (u, name) in ["d1", "d2"].iter().enumerate() {
        for h in 0..24 {
            text.push_str(&format!("{name},{h}.5,{},{}\n", (h * (u + 1)) as f64, (u + 1) as f64 * if h < 12 { 1.0 } else { 3.0 }));
        }
    }
    let curves = write(dir.path(), "c.csv", &text);
    let mut spec = DatasetSpec::new(&curves, ResponseSource::Column("load".into()), GRID);
    spec.response_transform = ResponseTransform::Mean;
    let mean = load_dataset(&spec).unwrap();
    assert_eq!(mean.dataset.y().as_slice(), [2.0, 4.0]);
    spec.response_transform = ResponseTransform::Log;
    let log = load_dataset(&spec).unwrap();
    assert!((log.dataset.y()[1] - 4f64.ln()).abs() < 1e-15);
    spec.response_transform = ResponseTransform::Identity;
    assert!(load_dataset(&spec).is_err());
}

#[test]
fn wide_files_round_trip_exactly() {
    let dir = tempfile::tempdir().unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(17);
    let x = DMatrix::from_fn(7, 13, |_, _| rng.random::<f64>() * 10f64.powi(rng.random_range(-8..8)));
    let y = DVector::from_fn(7, |_, _| -rng.random::<f64>() / 3.0);
    let units: Vec<String> = (0..7).map(|i| format!("id-{i}")).collect();
    let path = dir.path().join("w.csv");
    write_wide_csv(&path, Some(&units), &x, Some(&y)).unwrap();
    let t = read_wide_csv(&path).unwrap();
    assert_eq!(t.x, x);
    assert_eq!(t.y.unwrap(), y);
    assert_eq!(t.units.unwrap(), units);

    let bare = dir.path().join("bare.csv");
    write_wide_csv(&bare, None, &x, None).unwrap();
    let t = read_wide_csv(&bare).unwrap();
    assert!(t.y.is_none() && t.units.is_none());
    assert_eq!(t.unit_labels()[0], "1");
    assert_eq!(t.x, x);
}

#[test]
fn column_files_round_trip_exactly() {
    let dir = tempfile::tempdir().unwrap();
    let a = [0.1, 1.0 / 3.0, -2.5e-300, f64::MAX];
    let b = [std::f64::consts::PI, 0.0, -0.0, 1e300];
    let path = dir.path().join("c.csv");
    write_columns(&path, &["a", "b"], &[&a, &b]).unwrap();
    let mut r = csv::Reader::from_path(&path).unwrap();
    for (i, rec) in r.records().enumerate() {
        let rec = rec.unwrap();
        assert_eq!(rec[0].parse::<f64>().unwrap().to_bits(), a[i].to_bits());
        assert_eq!(rec[1].parse::<f64>().unwrap().to_bits(), b[i].to_bits());
    }
}

#[test]
fn wide_file_with_ragged_rows_is_rejected() {
    let dir = tempfile::tempdir().unwrap();
    let path = write(dir.path(), "w.csv", "y,x_1,x_2\n1,2,3\n4,5\n");
    assert!(read_wide_csv(&path).is_err());
}
