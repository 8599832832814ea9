use std::fs;

use log::info;

use super::config::ExperimentConfig;
use super::runner::{fit_unit, thread_pool, unit_splits};
use crate::error::{Error, Result};
use crate::train::{coefficient_search, factual_loss, AlphaMode, AlphaSearch};
use crate::zoo::EstimatorSpec;
use rayon::prelude::*;

/// Mean validation factual loss over `cfg.n_seeds` seeds at a fixed alpha.
pub fn alpha_score(cfg: &ExperimentConfig, spec: &EstimatorSpec, alpha: f64) -> Result<f64> {
    let pool = thread_pool(cfg.jobs)?;
    let losses: Vec<Result<f64>> = pool.install(|| {
        (0..cfg.n_seeds as u64)
            .into_par_iter()
            .map(|seed| {
                let mut config = cfg.resolve(spec, seed)?.config;
                config.alpha_mode = AlphaMode::Alpha;
                config.alpha = alpha;
                let splits = unit_splits(cfg, seed, None)?;
                let (model, report) = fit_unit(spec, &splits, &config)?;
                if report.diverged {
                    return Ok(f64::INFINITY);
                }
                let pred = model.forward(&splits.val.x, 0.0)?;
                Ok(factual_loss(
                    splits.val.y.as_slice().expect("contiguous"),
                    splits.val.t.as_slice().expect("contiguous"),
                    pred.mu0_hat.as_slice().expect("contiguous"),
                    pred.mu1_hat.as_slice().expect("contiguous"),
                ))
            })
            .collect()
    });
    let losses: Vec<f64> = losses.into_iter().collect::<Result<_>>()?;
    Ok(losses.iter().sum::<f64>() / losses.len() as f64)
}

/// Coefficient search for one estimator; writes `alpha_search.csv` with the visited sequence.
pub fn tune_alpha(cfg: &ExperimentConfig, spec: &EstimatorSpec) -> Result<AlphaSearch> {
    if !spec.family.has_propensity_head() {
        return Err(Error::InvalidSpec(format!("{} has no propensity loss to weigh", spec.name())));
    }
    let search = coefficient_search(|alpha| {
        let s = alpha_score(cfg, spec, alpha)?;
        info!("{} alpha {alpha}: validation factual loss {s}", spec.name());
        Ok(s)
    })?;
    fs::create_dir_all(&cfg.out_dir)?;
    let mut w = csv::Writer::from_path(cfg.out_dir.join("alpha_search.csv"))?;
    w.write_record(["step", "alpha", "score"])?;
    for (i, (a, s)) in search.visited.iter().enumerate() {
        w.write_record([i.to_string(), a.to_string(), s.to_string()])?;
    }
    w.flush()?;
    Ok(search)
}
