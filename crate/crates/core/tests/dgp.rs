use deconfound::dgp::{generate, split, DgpConfig};

fn big() -> deconfound::dgp::SyntheticDataset {
    generate(&DgpConfig {
        n: 100_000,
        seed: 17,
        ..DgpConfig::default()
    })
    .unwrap()
}

#[test]
fn population_moments() {
    let ds = big();
    let n = ds.data.len() as f64;
    let cfg = &ds.config;
    // E[x^2] = 1 per effect-modifier column
    let mean_cate = ds.cate().sum() / n;
    assert!((mean_cate - cfg.d_tau() as f64).abs() < 0.05, "{mean_cate}");
    let mean_mu0 = ds.mu0().sum() / n;
    assert!((mean_mu0 - (cfg.d_c + cfg.d_o) as f64).abs() < 0.1, "{mean_mu0}");
    let treated = ds.data.n_treated() as f64 / n;
    let mean_pi = ds.pi.sum() / n;
    assert!((treated - mean_pi).abs() < 0.01, "{treated} {mean_pi}");
    let mut pi = ds.pi.to_vec();
    pi.sort_by(f64::total_cmp);
    assert!((pi[pi.len() / 2] - 0.5).abs() < 1e-3);
}

#[test]
fn noise_has_unit_scale() {
    let ds = big();
    let n = ds.data.len() as f64;
    let resid: Vec<f64> = (0..ds.data.len())
        .map(|i| {
            let mu = if ds.data.t[i] == 1.0 { ds.mu1()[i] } else { ds.mu0()[i] };
            ds.data.y[i] - mu
        })
        .collect();
    let mean = resid.iter().sum::<f64>() / n;
    let var = resid.iter().map(|r| (r - mean).powi(2)).sum::<f64>() / (n - 1.0);
    assert!(mean.abs() < 0.02 && (var - 1.0).abs() < 0.03, "{mean} {var}");
}

#[test]
fn structural_invariants() {
    let ds = generate(&DgpConfig::default()).unwrap();
    assert!(ds.cate().iter().all(|&c| c >= 0.0));
    assert!(ds.pi.iter().all(|&p| p > 0.0 && p < 1.0));
    assert!(ds.mu0().iter().all(|&m| m >= 0.0));
}

#[test]
fn seeds_reproduce_and_differ() {
    let a = generate(&DgpConfig::default()).unwrap();
    let b = generate(&DgpConfig::default()).unwrap();
    assert_eq!(a.data, b.data);
    let c = generate(&DgpConfig { seed: 1, ..DgpConfig::default() }).unwrap();
    assert_ne!(a.data.x, c.data.x);
}

#[test]
fn splits_are_disjoint_and_complete() {
    let ds = generate(&DgpConfig::default()).unwrap();
    let s = split(&ds.data, 0.3, 0.3, 4).unwrap();
    assert_eq!(s.train.len() + s.val.len() + s.test.len(), 3000);
    assert_eq!(s.in_sample().len(), s.train.len() + s.val.len());
    let total: f64 = ds.data.y.sum();
    let parts = s.train.y.sum() + s.val.y.sum() + s.test.y.sum();
    assert!((total - parts).abs() < 1e-6);
}
