use ndarray::Array2;
use proptest::prelude::*;

use deconfound::autograd::{AdamState, ParamKind, ParamStore};
use deconfound::data::holdout_indices;
use deconfound::dgp::{draw_covariates, generate, generate_from, split_indices, DgpConfig};
use deconfound::disentangle::{contribution_vector, orthogonality_loss, ortho_regulariser, ContributionVector, Factor};
use deconfound::eval::pehe;
use deconfound::train::{lambda_schedule, EarlyStopState, StopDecision};

const FACTORS: [Factor; 3] = [Factor::Instrument, Factor::Confounder, Factor::Adjustment];

fn wbar_strategy(d: usize) -> impl Strategy<Value = Vec<Vec<f64>>> {
    prop::collection::vec(prop::collection::vec(0.0f64..2.0, d), 2..4)
}

fn contribs(vs: &[Vec<f64>]) -> Vec<ContributionVector> {
    vs.iter()
        .zip(FACTORS)
        .map(|(v, factor)| ContributionVector { factor, wbar: v.clone() })
        .collect()
}

fn small_config(n: usize, seed: u64) -> DgpConfig {
    DgpConfig {
        d: 12,
        d_o: 2,
        d_t: 2,
        d_c: 4,
        n,
        seed,
        ..DgpConfig::default()
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn orthogonality_nonnegative_and_zero_on_disjoint_support(vs in wbar_strategy(6), mask in 0usize..3) {
        let c = contribs(&vs);
        prop_assert!(orthogonality_loss(&c).unwrap() >= 0.0);
        // give each variable to exactly one representation
        let disjoint: Vec<Vec<f64>> = vs
            .iter()
            .enumerate()
            .map(|(k, v)| v.iter().enumerate().map(|(j, &x)| if (j + mask) % vs.len() == k { x } else { 0.0 }).collect())
            .collect();
        prop_assert_eq!(orthogonality_loss(&contribs(&disjoint)).unwrap(), 0.0);
    }

    #[test]
    fn orthogonality_positive_on_shared_support(vs in wbar_strategy(5), j in 0usize..5) {
        let mut vs = vs;
        for v in &mut vs {
            v[j] += 0.5;
        }
        prop_assert!(orthogonality_loss(&contribs(&vs)).unwrap() > 0.0);
    }

    #[test]
    fn permuting_inputs_permutes_contributions(seed in 0u64..1000, perm in Just((0..6).collect::<Vec<usize>>()).prop_shuffle()) {
        let w1 = draw_covariates(6, 4, seed);
        let w2 = draw_covariates(4, 3, seed + 1);
        let v = draw_covariates(6, 4, seed + 2);
        let permuted = |m: &Array2<f64>| Array2::from_shape_fn(m.dim(), |(i, k)| m[[perm[i], k]]);
        let a = vec![
            contribution_vector(Factor::Instrument, &[&w1, &w2]).unwrap(),
            contribution_vector(Factor::Confounder, &[&v]).unwrap(),
        ];
        let (pw1, pv) = (permuted(&w1), permuted(&v));
        let b = vec![
            contribution_vector(Factor::Instrument, &[&pw1, &w2]).unwrap(),
            contribution_vector(Factor::Confounder, &[&pv]).unwrap(),
        ];
        for (ca, cb) in a.iter().zip(&b) {
            for (i, &p) in perm.iter().enumerate() {
                prop_assert_eq!(cb.wbar[i], ca.wbar[p]);
            }
        }
        let (la, lb) = (orthogonality_loss(&a).unwrap(), orthogonality_loss(&b).unwrap());
        prop_assert!((la - lb).abs() <= 1e-12 * la.max(1.0));
        let (ra, rb) = (ortho_regulariser(&a).unwrap(), ortho_regulariser(&b).unwrap());
        prop_assert!((ra - rb).abs() <= 1e-12 * ra.max(1.0));
    }

    #[test]
    fn lambda_schedule_monotone_and_bounded(lambda0 in 0.001f64..10.0, gamma in 1u32..2000, epoch in 0usize..5000) {
        let a = lambda_schedule(epoch, lambda0, gamma);
        let b = lambda_schedule(epoch + 1, lambda0, gamma);
        prop_assert!(a >= 0.0 && a <= b && b <= lambda0);
    }

    #[test]
    fn cate_depends_only_on_effect_modifiers(seed in 0u64..500, shift in -3.0f64..3.0) {
        let cfg = small_config(40, seed);
        let x = draw_covariates(cfg.n, cfg.d, seed);
        let base = generate_from(&cfg, x.clone()).unwrap();
        let tau_start = cfg.d_c + cfg.d_o + cfg.d_t;
        let mut moved = x.clone();
        moved.slice_mut(ndarray::s![.., ..tau_start]).mapv_inplace(|v| v * 0.5 + shift);
        let other = generate_from(&cfg, moved).unwrap().cate();
        for (a, b) in other.iter().zip(base.cate().iter()) {
            prop_assert!((a - b).abs() <= 1e-12 * b.abs().max(1.0), "{} {}", a, b);
        }
    }

    #[test]
    fn propensity_depends_only_on_treatment_covariates(seed in 0u64..500, shift in -3.0f64..3.0) {
        let cfg = small_config(40, seed);
        let x = draw_covariates(cfg.n, cfg.d, seed);
        let base = generate_from(&cfg, x.clone()).unwrap();
        let mut moved = x.clone();
        let (o_start, t_start) = (cfg.d_c, cfg.d_c + cfg.d_o);
        moved.slice_mut(ndarray::s![.., o_start..t_start]).mapv_inplace(|v| v + shift);
        moved.slice_mut(ndarray::s![.., t_start + cfg.d_t..]).mapv_inplace(|v| v - shift);
        let other = generate_from(&cfg, moved).unwrap();
        prop_assert_eq!(&other.pi, &base.pi);
        prop_assert_eq!(&other.data.t, &base.data.t);
    }

    #[test]
    fn pehe_symmetric_and_shift_invariant(
        pairs in prop::collection::vec((-50.0f64..50.0, -50.0f64..50.0), 1..40),
        c in -100.0f64..100.0,
    ) {
        let (a, b): (Vec<f64>, Vec<f64>) = pairs.into_iter().unzip();
        let p = pehe(&a, &b).unwrap();
        prop_assert!(p >= 0.0);
        prop_assert_eq!(p, pehe(&b, &a).unwrap());
        let sa: Vec<f64> = a.iter().map(|v| v + c).collect();
        let sb: Vec<f64> = b.iter().map(|v| v + c).collect();
        prop_assert!((pehe(&sa, &sb).unwrap() - p).abs() <= 1e-9 * p.max(1.0));
    }

    #[test]
    fn adam_second_moment_nonnegative(grads in prop::collection::vec(prop::collection::vec(-5.0f64..5.0, 3), 1..10)) {
        let mut store = ParamStore::new();
        let id = store.add("w", Array2::zeros((1, 3)), ParamKind::Weight);
        let mut adam = AdamState::new(&store);
        for (k, g) in grads.iter().enumerate() {
            store.get_mut(id).grad = Array2::from_shape_vec((1, 3), g.clone()).unwrap();
            adam.step(&mut store, 1e-3).unwrap();
            prop_assert_eq!(adam.steps(), k as u64 + 1);
            prop_assert_eq!(adam.second_moment(0).dim(), store.get(id).value.dim());
            prop_assert!(adam.second_moment(0).iter().all(|&v| v >= 0.0));
            prop_assert!(store.get(id).value.iter().all(|v| v.is_finite()));
        }
    }

    #[test]
    fn early_stopping_keeps_the_best(losses in prop::collection::vec(0.0f64..10.0, 1..60), patience in 1usize..8) {
        let mut state = EarlyStopState::new(patience);
        let mut seen = Vec::new();
        for (epoch, &l) in losses.iter().enumerate() {
            seen.push(l);
            let decision = state.observe(epoch, l, || vec![Array2::from_elem((1, 1), l)]);
            prop_assert!(state.epochs_since_improvement <= patience);
            if decision == StopDecision::Stop {
                break;
            }
        }
        let best = seen.iter().copied().fold(f64::INFINITY, f64::min);
        prop_assert_eq!(state.best_val_loss, best);
        prop_assert_eq!(state.best_params.unwrap()[0][[0, 0]], best);
        prop_assert_eq!(seen[state.best_epoch.unwrap()], best);
    }

    #[test]
    fn splits_partition_rows(n in 10usize..500, seed in 0u64..1000, test in 0.1f64..0.5, val in 0.1f64..0.5) {
        let (tr, va, te) = split_indices(n, test, val, seed).unwrap();
        let mut all: Vec<usize> = tr.iter().chain(&va).chain(&te).copied().collect();
        all.sort_unstable();
        prop_assert_eq!(all, (0..n).collect::<Vec<_>>());
        let (kept, held) = holdout_indices(n, val, seed);
        prop_assert_eq!(held.len(), (n as f64 * val).floor() as usize);
        let mut both: Vec<usize> = kept.into_iter().chain(held).collect();
        both.sort_unstable();
        prop_assert_eq!(both, (0..n).collect::<Vec<_>>());
    }
}

#[test]
fn selection_bias_grows_with_xi() {
    let corr = |xi: f64| {
        let cfg = DgpConfig {
            xi,
            n: 20_000,
            seed: 4,
            ..DgpConfig::default()
        };
        let ds = generate(&cfg).unwrap();
        let x = &ds.data.x;
        let s: Vec<f64> = (0..cfg.n)
            .map(|i| (0..cfg.d_c).chain(cfg.d_c + cfg.d_o..cfg.d_c + cfg.d_o + cfg.d_t).map(|j| x[[i, j]].powi(2)).sum::<f64>() / cfg.d_ct() as f64)
            .collect();
        let t = ds.data.t.to_vec();
        let n = cfg.n as f64;
        let (ms, mt) = (s.iter().sum::<f64>() / n, t.iter().sum::<f64>() / n);
        let cov: f64 = s.iter().zip(&t).map(|(a, b)| (a - ms) * (b - mt)).sum();
        let vs: f64 = s.iter().map(|a| (a - ms).powi(2)).sum();
        let vt: f64 = t.iter().map(|b| (b - mt).powi(2)).sum();
        (cov / (vs * vt).sqrt(), ds)
    };
    let (c0, flat) = corr(0.0);
    let (c3, _) = corr(3.0);
    assert!(flat.pi.iter().all(|&p| p == 0.5));
    assert!(c0.abs() < 0.03 && c3 > c0 + 0.2, "{c0} {c3}");
}

#[test]
fn oracle_cate_matches_surface_columns() {
    let ds = generate(&small_config(300, 9)).unwrap();
    let from_surfaces: Vec<f64> = ds.mu1().iter().zip(ds.mu0()).map(|(a, b)| a - b).collect();
    let oracle = ds.data.cate().unwrap().to_vec();
    assert_eq!(pehe(&oracle, &from_surfaces).unwrap(), 0.0);
    assert_eq!(pehe(&ds.cate().to_vec(), &from_surfaces).unwrap(), 0.0);
}
