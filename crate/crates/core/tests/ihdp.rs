use std::fs;
use std::path::Path;

mod common;

use common::fixture;
use deconfound::error::Error;
use deconfound::ihdp::{header, load_realization, make_splits, part_path, write_realization, IHDP_COVARIATES};

fn write_raw(dir: &Path, name: &str, text: &str) {
    fs::write(dir.join(name), text).unwrap();
}

#[test]
fn round_trip_is_bit_exact() {
    let dir = tempfile::tempdir().unwrap();
    let real = fixture(1, 125);
    write_realization(dir.path(), &real).unwrap();
    let back = load_realization(dir.path(), 1).unwrap();
    assert_eq!(back, real);
    assert_eq!(back.n_rows(), 747);
    assert_eq!(back.n_treated(), 139);
    assert_eq!(back.combined().dim(), 25);
    assert!(back.warnings.is_empty());
}

#[test]
fn unexpected_treated_count_only_warns() {
    let dir = tempfile::tempdir().unwrap();
    write_realization(dir.path(), &fixture(2, 100)).unwrap();
    let back = load_realization(dir.path(), 2).unwrap();
    assert_eq!(back.n_treated(), 114);
    assert_eq!(back.warnings.len(), 1);
}

#[test]
fn missing_file() {
    let dir = tempfile::tempdir().unwrap();
    match load_realization(dir.path(), 3) {
        Err(Error::MissingFile(p)) => assert_eq!(p, part_path(dir.path(), "train", 3)),
        other => panic!("{other:?}"),
    }
}

fn row(n: usize, t: &str) -> String {
    let mut fields = vec!["0.5".to_string(); n];
    fields[IHDP_COVARIATES] = t.into();
    fields.join(",")
}

#[test]
fn short_header_is_reported_at_line_one() {
    let dir = tempfile::tempdir().unwrap();
    let mut h = header();
    h.remove(24);
    write_raw(dir.path(), "ihdp_train_4.csv", &format!("{}\n{}\n", h.join(","), row(29, "1")));
    match load_realization(dir.path(), 4) {
        Err(Error::Data { line, msg, path }) => {
            assert_eq!(line, 1);
            assert!(msg.contains("29 columns"), "{msg}");
            assert!(path.ends_with("ihdp_train_4.csv"));
        }
        other => panic!("{other:?}"),
    }
}

#[test]
fn ragged_row_and_bad_treatment_name_the_line() {
    let dir = tempfile::tempdir().unwrap();
    let h = header().join(",");
    write_raw(dir.path(), "ihdp_train_5.csv", &format!("{h}\n{}\n{}\n", row(30, "1"), row(29, "0")));
    match load_realization(dir.path(), 5) {
        Err(Error::Data { line, msg, .. }) => assert_eq!((line, msg.contains("29 fields")), (3, true), "{msg}"),
        other => panic!("{other:?}"),
    }
    write_raw(dir.path(), "ihdp_train_6.csv", &format!("{h}\n{}\n{}\n", row(30, "1"), row(30, "0.5")));
    match load_realization(dir.path(), 6) {
        Err(Error::Data { line, msg, .. }) => assert_eq!((line, msg.contains("treatment")), (3, true), "{msg}"),
        other => panic!("{other:?}"),
    }
}

#[test]
fn wrong_row_count() {
    let dir = tempfile::tempdir().unwrap();
    let mut real = fixture(7, 125);
    real.test.data = real.test.data.subset(&[0, 1, 2]);
    real.test.y_cfactual = real.test.y_cfactual.slice(ndarray::s![..3]).to_owned();
    write_realization(dir.path(), &real).unwrap();
    match load_realization(dir.path(), 7) {
        Err(Error::Data { msg, .. }) => assert!(msg.contains("675 rows"), "{msg}"),
        other => panic!("{other:?}"),
    }
}

#[test]
fn validation_split_protocol() {
    let real = fixture(8, 125);
    let s = make_splits(&real, 0.2, 3).unwrap();
    assert_eq!(s.val.len(), 134);
    assert_eq!(s.train.len(), 672 - 134);
    assert_eq!(s.test, real.test.data);
    let again = make_splits(&real, 0.2, 3).unwrap();
    assert_eq!(again.val, s.val);
    // train and val partition the training portion
    let mut all: Vec<u64> = s.in_sample().y.iter().map(|v| v.to_bits()).collect();
    let mut orig: Vec<u64> = real.train.data.y.iter().map(|v| v.to_bits()).collect();
    all.sort_unstable();
    orig.sort_unstable();
    assert_eq!(all, orig);
    assert_ne!(make_splits(&real, 0.2, 4).unwrap().val, s.val);
}
