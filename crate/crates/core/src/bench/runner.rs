use std::collections::BTreeMap;
use std::fs;
use std::io::BufWriter;
use std::path::Path;

use log::{info, warn};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::config::{BenchSource, ExperimentConfig};
use crate::data::{ObservationalDataset, Splits};
use crate::dgp::{self, DgpConfig, SweepKind};
use crate::error::{Error, Result};
use crate::eval::{aggregate, pehe, predict_cate, AggregateReport, EvalReport};
use crate::ihdp::{self, IhdpRealization};
use crate::rng::{streams, SeededRng};
use crate::train::{train, AlphaMode, TrainConfig, TrainReport};
use crate::zoo::{EstimatorSpec, Model};

/// Held-out share of every synthetic dataset.
pub const SYNTHETIC_TEST_FRACTION: f64 = 0.3;

/// One persisted (estimator, seed, realization) result.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunRecord {
    pub estimator: String,
    pub seed: u64,
    pub realization: Option<usize>,
    pub dataset: String,
    pub lambda0: f64,
    pub gamma: u32,
    pub alpha_mode: AlphaMode,
    pub alpha: f64,
    pub diverged: bool,
    pub epochs_run: usize,
    pub best_epoch: Option<usize>,
    pub pehe_in: Option<f64>,
    pub pehe_out: Option<f64>,
}

impl RunRecord {
    pub fn eval_report(&self) -> EvalReport {
        EvalReport {
            estimator: self.estimator.clone(),
            seed: self.seed,
            realization: self.realization,
            diverged: self.diverged,
            pehe_in: self.pehe_in,
            pehe_out: self.pehe_out,
        }
    }

    pub fn trace_name(&self) -> String {
        let base = format!("{}_s{}", self.estimator.replace('+', "_plus"), self.seed);
        match self.realization {
            Some(r) => format!("{base}_r{r}.csv"),
            None => format!("{base}.csv"),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SummaryRow {
    pub estimator: String,
    pub n_runs: usize,
    pub n_diverged: usize,
    pub pehe_in_mean: f64,
    pub pehe_in_se: Option<f64>,
    pub pehe_out_mean: f64,
    pub pehe_out_se: Option<f64>,
}

impl From<&AggregateReport> for SummaryRow {
    fn from(a: &AggregateReport) -> Self {
        Self {
            estimator: a.estimator.clone(),
            n_runs: a.n_runs,
            n_diverged: a.n_diverged,
            pehe_in_mean: a.pehe_in.mean,
            pehe_in_se: a.pehe_in.se,
            pehe_out_mean: a.pehe_out.mean,
            pehe_out_se: a.pehe_out.se,
        }
    }
}

#[derive(Debug, Clone)]
pub struct ExperimentOutcome {
    pub records: Vec<RunRecord>,
    pub summary: Vec<AggregateReport>,
}

enum Source {
    Synthetic(DgpConfig),
    Ihdp(BTreeMap<usize, IhdpRealization>),
}

impl Source {
    fn load(src: &BenchSource) -> Result<Self> {
        match src {
            BenchSource::Synthetic(d) => Ok(Source::Synthetic(d.clone())),
            BenchSource::Ihdp { root, realizations } => {
                if !root.is_dir() {
                    return Err(Error::MissingFile(root.clone()));
                }
                let mut map = BTreeMap::new();
                for r in realizations.clone() {
                    map.insert(r, ihdp::load_realization(root, r)?);
                }
                Ok(Source::Ihdp(map))
            }
        }
    }

    fn units(&self, n_seeds: usize) -> Vec<(u64, Option<usize>)> {
        let seeds = 0..n_seeds as u64;
        match self {
            Source::Synthetic(_) => seeds.map(|s| (s, None)).collect(),
            Source::Ihdp(map) => map.keys().flat_map(|&r| seeds.clone().map(move |s| (s, Some(r)))).collect(),
        }
    }

    /// Splits for one unit. Synthetic data is regenerated from `seed`.
    fn splits(&self, seed: u64, realization: Option<usize>, config: &TrainConfig) -> Result<Splits> {
        match (self, realization) {
            (Source::Synthetic(base), _) => {
                let ds = dgp::generate(&DgpConfig {
                    seed: base.seed + seed,
                    ..base.clone()
                })?;
                dgp::split(&ds.data, SYNTHETIC_TEST_FRACTION, config.val_fraction, seed)
            }
            (Source::Ihdp(map), Some(r)) => ihdp::make_splits(&map[&r], config.val_fraction, seed),
            (Source::Ihdp(_), None) => unreachable!("IHDP units carry a realization"),
        }
    }
}

fn pehe_on(model: &Model, data: &ObservationalDataset) -> Result<f64> {
    let truth = data
        .cate()
        .ok_or_else(|| Error::InvalidConfig("evaluation data lacks noiseless outcomes".into()))?;
    let est = predict_cate(model, &data.x)?;
    pehe(est.as_slice().expect("contiguous"), truth.as_slice().expect("contiguous"))
}

/// Trains one model and scores it. Returns the fitted model as well.
pub fn fit_unit(
    spec: &EstimatorSpec,
    splits: &Splits,
    config: &TrainConfig,
) -> Result<(Model, TrainReport)> {
    let mut model = Model::build(spec, splits.train.dim(), &mut SeededRng::derive(config.seed, streams::INIT))?;
    let report = train(&mut model, &splits.train, &splits.val, config)?;
    Ok((model, report))
}

fn run_unit(
    cfg: &ExperimentConfig,
    source: &Source,
    spec: &EstimatorSpec,
    seed: u64,
    realization: Option<usize>,
) -> Result<(RunRecord, TrainReport)> {
    let resolved = cfg.resolve(spec, seed)?;
    let tag = match realization {
        Some(r) => format!("{} seed {seed} realization {r}", spec.name()),
        None => format!("{} seed {seed}", spec.name()),
    };
    info!("{tag}: {}", resolved.describe());
    let config = resolved.config;
    let splits = source.splits(seed, realization, &config)?;
    let (model, report) = fit_unit(spec, &splits, &config)?;
    let (pehe_in, pehe_out) = if report.diverged {
        warn!("{tag}: diverged after {} epochs; excluded from aggregates", report.epochs_run);
        (None, None)
    } else {
        (Some(pehe_on(&model, &splits.in_sample())?), Some(pehe_on(&model, &splits.test)?))
    };
    let record = RunRecord {
        estimator: spec.name(),
        seed,
        realization,
        dataset: resolved.dataset_label,
        lambda0: config.lambda0,
        gamma: config.gamma,
        alpha_mode: config.alpha_mode,
        alpha: config.alpha,
        diverged: report.diverged,
        epochs_run: report.epochs_run,
        best_epoch: report.best_epoch,
        pehe_in,
        pehe_out,
    };
    Ok((record, report))
}

pub(crate) fn thread_pool(jobs: usize) -> Result<rayon::ThreadPool> {
    rayon::ThreadPoolBuilder::new()
        .num_threads(jobs.max(1))
        .build()
        .map_err(|e| Error::InvalidConfig(format!("cannot start {jobs} workers: {e}")))
}

/// Trains and evaluates every estimator on every seed (and realization),
/// then writes `runs.csv`, `summary.csv` and `traces/` under the output directory.
pub fn run_experiment(cfg: &ExperimentConfig) -> Result<ExperimentOutcome> {
    let source = Source::load(&cfg.source)?;
    let units = source.units(cfg.n_seeds);
    let jobs: Vec<(&EstimatorSpec, u64, Option<usize>)> = cfg
        .estimators
        .iter()
        .flat_map(|spec| units.iter().map(move |&(s, r)| (spec, s, r)))
        .collect();
    let pool = thread_pool(cfg.jobs)?;
    let results: Vec<Result<(RunRecord, TrainReport)>> = pool.install(|| {
        jobs.par_iter()
            .map(|&(spec, seed, r)| run_unit(cfg, &source, spec, seed, r))
            .collect()
    });
    let results: Vec<(RunRecord, TrainReport)> = results.into_iter().collect::<Result<_>>()?;

    fs::create_dir_all(cfg.out_dir.join("traces"))?;
    for (rec, report) in &results {
        let f = fs::File::create(cfg.out_dir.join("traces").join(rec.trace_name()))?;
        report.write_trace(BufWriter::new(f))?;
    }
    let records: Vec<RunRecord> = results.into_iter().map(|(r, _)| r).collect();
    write_runs(&cfg.out_dir.join("runs.csv"), &records)?;
    let summary = summarise(&records)?;
    write_summary(&cfg.out_dir.join("summary.csv"), &summary)?;
    Ok(ExperimentOutcome { records, summary })
}

/// Aggregates per estimator in first-appearance order. Estimators whose runs
/// all diverged are left out with a warning; it is an error if none remain.
pub fn summarise(records: &[RunRecord]) -> Result<Vec<AggregateReport>> {
    let mut order: Vec<&str> = Vec::new();
    for r in records {
        if !order.contains(&r.estimator.as_str()) {
            order.push(&r.estimator);
        }
    }
    let mut out = Vec::new();
    let mut diverged = 0;
    for name in order {
        let reports: Vec<EvalReport> = records
            .iter()
            .filter(|r| r.estimator == name)
            .map(RunRecord::eval_report)
            .collect();
        match aggregate(&reports) {
            Ok(a) => out.push(a),
            Err(Error::NoCompletedRuns { diverged: d }) => {
                warn!("{name}: all {d} runs diverged");
                diverged += d;
            }
            Err(e) => return Err(e),
        }
    }
    if out.is_empty() {
        return Err(Error::NoCompletedRuns { diverged });
    }
    Ok(out)
}

pub fn write_runs(path: &Path, records: &[RunRecord]) -> Result<()> {
    let mut w = csv::Writer::from_path(path)?;
    for r in records {
        w.serialize(r)?;
    }
    w.flush()?;
    Ok(())
}

pub fn read_runs(path: &Path) -> Result<Vec<RunRecord>> {
    if !path.is_file() {
        return Err(Error::MissingFile(path.to_path_buf()));
    }
    let mut r = csv::Reader::from_path(path)?;
    r.deserialize().map(|row| row.map_err(Error::from)).collect()
}

pub fn write_summary(path: &Path, summary: &[AggregateReport]) -> Result<()> {
    let mut w = csv::Writer::from_path(path)?;
    for a in summary {
        w.serialize(SummaryRow::from(a))?;
    }
    w.flush()?;
    Ok(())
}

/// Long-format plot data row.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepRow {
    pub x_value: usize,
    pub estimator: String,
    pub n_runs: usize,
    pub pehe_out_mean: f64,
    pub pehe_out_se: Option<f64>,
    pub pehe_in_mean: f64,
    pub pehe_in_se: Option<f64>,
}

/// Runs the experiment once per sweep member under `out_dir/x_<value>` and
/// writes `out_dir/sweep.csv`. Cells short of `n_seeds` completed runs are logged.
pub fn sweep(kind: SweepKind, cfg: &ExperimentConfig) -> Result<Vec<SweepRow>> {
    let base = match &cfg.source {
        BenchSource::Synthetic(d) => d.clone(),
        BenchSource::Ihdp { .. } => return Err(Error::InvalidConfig("sweeps use the synthetic benchmark".into())),
    };
    let mut rows = Vec::new();
    for (x, dgp) in dgp::sweep_configs(kind, &base) {
        let member = ExperimentConfig {
            source: BenchSource::Synthetic(dgp),
            out_dir: cfg.out_dir.join(format!("x_{x}")),
            ..cfg.clone()
        };
        let outcome = run_experiment(&member)?;
        for a in &outcome.summary {
            if a.n_runs < cfg.n_seeds {
                warn!("x={x} {}: only {} of {} runs completed", a.estimator, a.n_runs, cfg.n_seeds);
            }
            rows.push(SweepRow {
                x_value: x,
                estimator: a.estimator.clone(),
                n_runs: a.n_runs,
                pehe_out_mean: a.pehe_out.mean,
                pehe_out_se: a.pehe_out.se,
                pehe_in_mean: a.pehe_in.mean,
                pehe_in_se: a.pehe_in.se,
            });
        }
    }
    fs::create_dir_all(&cfg.out_dir)?;
    let mut w = csv::Writer::from_path(cfg.out_dir.join("sweep.csv"))?;
    for r in &rows {
        w.serialize(r)?;
    }
    w.flush()?;
    Ok(rows)
}

/// Training and evaluation data for a single seed/realization, as used by `hist` and `tune-alpha`.
pub fn unit_splits(cfg: &ExperimentConfig, seed: u64, realization: Option<usize>) -> Result<Splits> {
    let source = Source::load(&match (&cfg.source, realization) {
        (BenchSource::Ihdp { root, .. }, Some(r)) => BenchSource::Ihdp {
            root: root.clone(),
            realizations: r..=r,
        },
        (other, _) => other.clone(),
    })?;
    let realization = match &source {
        Source::Ihdp(map) => Some(realization.unwrap_or(*map.keys().next().expect("non-empty range"))),
        Source::Synthetic(_) => None,
    };
    source.splits(seed, realization, &cfg.train)
}
