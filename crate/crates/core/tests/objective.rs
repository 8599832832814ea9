mod common;

use deconfound::autograd::Tape;
use deconfound::rng::SeededRng;
use deconfound::train::{total_objective, train, AlphaMode, TrainConfig};
use deconfound::zoo::{EstimatorSpec, Model};

fn build(name: &str, seed: u64) -> Model {
    Model::build(&EstimatorSpec::from_name(name).unwrap(), 25, &mut SeededRng::new(seed)).unwrap()
}

fn bare() -> TrainConfig {
    TrainConfig {
        l2_lambda1: 0.0,
        ortho_lambda2: 0.0,
        ..TrainConfig::default()
    }
}

#[test]
fn tarnet_without_regularisers_is_outcome_loss() {
    let m = build("tarnet", 1);
    let batch = common::synthetic_batch(40, 2);
    let mut tape = Tape::new();
    let parts = total_objective(&mut tape, &m, &batch, 0.0, &bare()).unwrap();
    assert_eq!(tape.scalar(parts.total), tape.scalar(parts.outcome));
    assert!(parts.propensity.is_none() && parts.l2.is_none() && parts.disentangle.is_none());
}

#[test]
fn half_alpha_halves_supervised_sum() {
    let m = build("snet", 3);
    let batch = common::synthetic_batch(40, 4);
    let mut tape = Tape::new();
    let unit = total_objective(&mut tape, &m, &batch, 0.0, &bare()).unwrap();
    let cfg = TrainConfig {
        alpha_mode: AlphaMode::Alpha,
        alpha: 0.5,
        ..bare()
    };
    let half = total_objective(&mut tape, &m, &batch, 0.0, &cfg).unwrap();
    assert!((tape.scalar(half.total) - 0.5 * tape.scalar(unit.total)).abs() < 1e-12);
}

#[test]
fn snet_objective_composition() {
    let m = build("snet", 5);
    let batch = common::synthetic_batch(40, 6);
    let cfg = TrainConfig {
        l2_lambda1: 0.003,
        ortho_lambda2: 0.7,
        ..TrainConfig::default()
    };
    let mut tape = Tape::new();
    let p = total_objective(&mut tape, &m, &batch, 0.0, &cfg).unwrap();
    let expected = tape.scalar(p.outcome)
        + tape.scalar(p.propensity.unwrap())
        + 0.003 * tape.scalar(p.l2.unwrap())
        + 0.7 * tape.scalar(p.disentangle.unwrap());
    assert!((tape.scalar(p.total) - expected).abs() < 1e-12);
    let r2: f64 = m
        .params
        .iter()
        .filter(|(_, p)| p.kind == deconfound::autograd::ParamKind::Weight)
        .map(|(_, p)| p.value.mapv(|v| v * v).sum())
        .sum();
    assert!((tape.scalar(p.l2.unwrap()) - r2).abs() < 1e-9 * r2);
}

#[test]
fn cfrnet_single_group_batch_skips_discrepancy() {
    let m = build("cfrnet", 7);
    let mut batch = common::synthetic_batch(30, 8);
    batch.t.fill(1.0);
    let mut tape = Tape::new();
    let p = total_objective(&mut tape, &m, &batch, 0.0, &bare()).unwrap();
    assert!(p.mmd_skipped && p.mmd.is_none());
    assert_eq!(tape.scalar(p.total), tape.scalar(p.outcome));
}

#[test]
fn dragonnet_tr_adds_targeted_term() {
    let m = build("dragonnet_tr", 9);
    let batch = common::synthetic_batch(30, 10);
    let mut tape = Tape::new();
    let p = total_objective(&mut tape, &m, &batch, 0.0, &bare()).unwrap();
    let expected = tape.scalar(p.outcome) + tape.scalar(p.propensity.unwrap()) + tape.scalar(p.targeted.unwrap());
    assert!((tape.scalar(p.total) - expected).abs() < 1e-12);
}

#[test]
fn training_is_deterministic() {
    let data = common::synthetic_batch(200, 11);
    let train_rows = data.subset(&(0..140).collect::<Vec<_>>());
    let val_rows = data.subset(&(140..200).collect::<Vec<_>>());
    let cfg = TrainConfig {
        max_epochs: 4,
        lr: 1e-3,
        batch_size: 32,
        seed: 5,
        ..TrainConfig::default()
    };
    let run = || {
        let mut m = build("snet+", 12);
        let report = train(&mut m, &train_rows, &val_rows, &cfg).unwrap();
        (m.params.values(), report)
    };
    let (a, ra) = run();
    let (b, rb) = run();
    assert_eq!(a, b);
    assert_eq!(ra, rb);
    assert_eq!(ra.epochs_run, 4);
    assert!(!ra.diverged);
}

#[test]
fn training_lowers_validation_loss() {
    let data = common::synthetic_batch(300, 13);
    let train_rows = data.subset(&(0..200).collect::<Vec<_>>());
    let val_rows = data.subset(&(200..300).collect::<Vec<_>>());
    let cfg = TrainConfig {
        max_epochs: 30,
        lr: 1e-3,
        ..TrainConfig::default()
    };
    let mut m = build("tarnet", 14);
    let report = train(&mut m, &train_rows, &val_rows, &cfg).unwrap();
    let first = report.trace[0].val_loss;
    assert!(report.best_val_loss().unwrap() < first);
}
