#![allow(dead_code)]

use deconfound::autograd::ParamStore;
use deconfound::data::ObservationalDataset;
use deconfound::dgp::{generate, DgpConfig};
use deconfound::ihdp::{IhdpPart, IhdpRealization, IHDP_COVARIATES};
use deconfound::rng::SeededRng;
use ndarray::{Array1, Array2};

/// Small synthetic batch from the default generator.
pub fn synthetic_batch(n: usize, seed: u64) -> ObservationalDataset {
    generate(&DgpConfig {
        n,
        seed,
        ..DgpConfig::default()
    })
    .unwrap()
    .data
}

/// Relative error with a floor on the denominator so that gradients at the
/// level of finite-difference round-off do not dominate.
pub fn rel_err(a: f64, b: f64) -> f64 {
    (a - b).abs() / a.abs().max(b.abs()).max(1e-6)
}

/// Central finite difference of `f` with respect to one parameter entry.
pub fn central_difference(
    store: &mut ParamStore,
    id: deconfound::autograd::ParamId,
    entry: (usize, usize),
    h: f64,
    mut f: impl FnMut(&ParamStore) -> f64,
) -> f64 {
    let orig = store.get(id).value[entry];
    store.get_mut(id).value[entry] = orig + h;
    let plus = f(store);
    store.get_mut(id).value[entry] = orig - h;
    let minus = f(store);
    store.get_mut(id).value[entry] = orig;
    (plus - minus) / (2.0 * h)
}

/// A few deterministic entry positions per tensor.
pub fn sample_entries(shape: (usize, usize), k: usize, rng: &mut SeededRng) -> Vec<(usize, usize)> {
    let total = shape.0 * shape.1;
    let mut picks: Vec<usize> = (0..k.min(total)).map(|_| (rng.uniform(0.0, 1.0) * total as f64) as usize % total).collect();
    picks.sort();
    picks.dedup();
    picks.into_iter().map(|i| (i / shape.1, i % shape.1)).collect()
}

pub fn fixture_part(rows: usize, treated: usize, rng: &mut SeededRng) -> IhdpPart {
    let x = Array2::from_shape_fn((rows, IHDP_COVARIATES), |_| rng.normal() * 1.234_567_890_123_456_7);
    let t = Array1::from_shape_fn(rows, |i| if i < treated { 1.0 } else { 0.0 });
    let mu0 = Array1::from_shape_fn(rows, |_| rng.normal() + 2.0);
    let mu1 = &mu0 + 4.0 + Array1::from_shape_fn(rows, |_| rng.uniform(0.0, 1.0) / 3.0);
    let y = Array1::from_shape_fn(rows, |i| if t[i] == 1.0 { mu1[i] } else { mu0[i] } + rng.normal());
    let y_cf = Array1::from_shape_fn(rows, |i| if t[i] == 1.0 { mu0[i] } else { mu1[i] } + rng.normal());
    IhdpPart {
        data: ObservationalDataset::new(x, t, y).unwrap().with_oracle(mu0, mu1).unwrap(),
        y_cfactual: y_cf,
    }
}

/// IHDP-shaped realization: 672 train and 75 test rows.
pub fn fixture(id: usize, train_treated: usize) -> IhdpRealization {
    let mut rng = SeededRng::new(id as u64);
    IhdpRealization {
        id,
        train: fixture_part(672, train_treated, &mut rng),
        test: fixture_part(75, 14, &mut rng),
        warnings: Vec::new(),
    }
}
