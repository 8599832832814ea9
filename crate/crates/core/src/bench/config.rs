use std::collections::BTreeMap;
use std::fmt;
use std::ops::RangeInclusive;
use std::path::{Path, PathBuf};

use serde::Deserialize;

use super::tables::{Benchmark, DefaultAlphaTable, DefaultLambdaTable, IHDP_COEFF_LABEL, IHDP_LABEL};
use crate::dgp::DgpConfig;
use crate::error::{Error, Result};
use crate::train::{AlphaMode, TrainConfig};
use crate::zoo::EstimatorSpec;

/// Values a user may pin for the adversarial schedule and loss weighting.
#[derive(Debug, Clone, Default, PartialEq, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ScheduleOverrides {
    pub lambda0: Option<f64>,
    pub gamma: Option<u32>,
    pub alpha: Option<f64>,
    pub alpha_mode: Option<AlphaMode>,
}

impl ScheduleOverrides {
    fn or(&self, other: &Self) -> Self {
        Self {
            lambda0: self.lambda0.or(other.lambda0),
            gamma: self.gamma.or(other.gamma),
            alpha: self.alpha.or(other.alpha),
            alpha_mode: self.alpha_mode.or(other.alpha_mode),
        }
    }
}

/// TOML experiment file.
///
/// ```toml
/// [train]
/// max_epochs = 300
///
/// [dgp]
/// n = 5000
///
/// [estimators."snet+"]
/// lambda0 = 1.7
/// ```
#[derive(Debug, Clone, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ConfigFile {
    #[serde(default)]
    pub train: toml::Table,
    #[serde(default)]
    pub dgp: toml::Table,
    #[serde(default)]
    pub estimators: BTreeMap<String, ScheduleOverrides>,
}

impl ConfigFile {
    pub fn load(path: &Path) -> Result<Self> {
        if !path.is_file() {
            return Err(Error::MissingFile(path.to_path_buf()));
        }
        Self::parse(&std::fs::read_to_string(path)?)
    }

    pub fn parse(text: &str) -> Result<Self> {
        Ok(toml::from_str(text)?)
    }

    /// Schedule keys set in `[train]` or the estimator's own section, the latter winning.
    fn schedule_for(&self, estimator: &str) -> Result<ScheduleOverrides> {
        let mut global = toml::Table::new();
        for key in ["lambda0", "gamma", "alpha", "alpha_mode"] {
            if let Some(v) = self.train.get(key) {
                global.insert(key.into(), v.clone());
            }
        }
        let global: ScheduleOverrides = global.try_into().map_err(|e: toml::de::Error| Error::InvalidConfig(e.to_string()))?;
        let own = self.estimators.get(estimator).cloned().unwrap_or_default();
        Ok(own.or(&global))
    }
}

fn merge<T>(base: &T, patch: &toml::Table) -> Result<T>
where
    T: serde::Serialize + serde::de::DeserializeOwned,
{
    let mut table = toml::Table::try_from(base).map_err(|e| Error::InvalidConfig(e.to_string()))?;
    for (k, v) in patch {
        table.insert(k.clone(), v.clone());
    }
    table.try_into().map_err(|e: toml::de::Error| Error::InvalidConfig(e.to_string()))
}

#[derive(Debug, Clone, PartialEq)]
pub enum BenchSource {
    Synthetic(DgpConfig),
    Ihdp {
        root: PathBuf,
        realizations: RangeInclusive<usize>,
    },
}

impl BenchSource {
    pub fn benchmark(&self) -> Benchmark {
        match self {
            BenchSource::Synthetic(_) => Benchmark::Synthetic,
            BenchSource::Ihdp { .. } => Benchmark::Ihdp,
        }
    }
}

/// Parses `A..B` (inclusive) or a single `A`.
pub fn parse_realizations(text: &str) -> Result<RangeInclusive<usize>> {
    let bad = || Error::InvalidConfig(format!("realization range `{text}` is not of the form A..B"));
    let (a, b) = match text.split_once("..") {
        Some((a, b)) => (a, b.trim_start_matches('=')),
        None => (text, text),
    };
    let a: usize = a.trim().parse().map_err(|_| bad())?;
    let b: usize = b.trim().parse().map_err(|_| bad())?;
    if a == 0 || b < a {
        return Err(bad());
    }
    Ok(a..=b)
}

#[derive(Debug, Clone)]
pub struct ExperimentConfig {
    pub estimators: Vec<EstimatorSpec>,
    pub source: BenchSource,
    pub n_seeds: usize,
    /// Benchmark defaults patched by the config file; schedule fields are
    /// resolved per estimator by [`ExperimentConfig::resolve`].
    pub train: TrainConfig,
    pub file: ConfigFile,
    pub flags: ScheduleOverrides,
    pub out_dir: PathBuf,
    pub jobs: usize,
}

/// Where a resolved value came from.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Origin {
    Flag,
    File,
    Table,
    Default,
}

impl fmt::Display for Origin {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Origin::Flag => "flag",
            Origin::File => "config",
            Origin::Table => "table",
            Origin::Default => "default",
        })
    }
}

fn pick<T: Copy>(flag: Option<T>, file: Option<T>, table: Option<T>, default: T) -> (T, Origin) {
    flag.map(|v| (v, Origin::Flag))
        .or(file.map(|v| (v, Origin::File)))
        .or(table.map(|v| (v, Origin::Table)))
        .unwrap_or((default, Origin::Default))
}

#[derive(Debug, Clone, PartialEq)]
pub struct Resolved {
    pub config: TrainConfig,
    pub dataset_label: String,
    pub origins: [Origin; 4],
}

impl Resolved {
    pub fn describe(&self) -> String {
        let c = &self.config;
        let [l, g, m, a] = self.origins;
        format!(
            "lambda0={} ({l}) gamma={} ({g}) alpha_mode={:?} ({m}) alpha={} ({a}) on {}",
            c.lambda0, c.gamma, c.alpha_mode, c.alpha, self.dataset_label
        )
    }
}

/// Training defaults for a benchmark before any user input.
pub fn benchmark_train_defaults(bench: Benchmark) -> TrainConfig {
    match bench {
        Benchmark::Synthetic => TrainConfig::default(),
        Benchmark::Ihdp => TrainConfig {
            val_fraction: 0.2,
            ortho_lambda2: 0.0,
            ..TrainConfig::default()
        },
    }
}

pub fn default_alpha_mode(bench: Benchmark) -> AlphaMode {
    match bench {
        Benchmark::Synthetic => AlphaMode::Alpha,
        Benchmark::Ihdp => AlphaMode::Unit,
    }
}

impl ExperimentConfig {
    pub fn new(
        estimators: Vec<EstimatorSpec>,
        source: BenchSource,
        n_seeds: usize,
        file: ConfigFile,
        flags: ScheduleOverrides,
        out_dir: PathBuf,
        jobs: usize,
    ) -> Result<Self> {
        if estimators.is_empty() {
            return Err(Error::InvalidConfig("no estimators selected".into()));
        }
        if n_seeds == 0 {
            return Err(Error::InvalidConfig("at least one seed is required".into()));
        }
        let mut train_patch = file.train.clone();
        for key in ["lambda0", "gamma", "alpha", "alpha_mode", "seed"] {
            train_patch.remove(key);
        }
        let train = merge(&benchmark_train_defaults(source.benchmark()), &train_patch)?;
        train.validate()?;
        let source = match source {
            BenchSource::Synthetic(dgp) => {
                let dgp: DgpConfig = merge(&dgp, &file.dgp)?;
                dgp.validate()?;
                BenchSource::Synthetic(dgp)
            }
            other => other,
        };
        Ok(Self {
            estimators,
            source,
            n_seeds,
            train,
            file,
            flags,
            out_dir,
            jobs: jobs.max(1),
        })
    }

    pub fn dataset_label(&self, mode: AlphaMode) -> String {
        match (&self.source, mode) {
            (BenchSource::Synthetic(dgp), _) => dgp.label(),
            (BenchSource::Ihdp { .. }, AlphaMode::Unit) => IHDP_LABEL.into(),
            (BenchSource::Ihdp { .. }, AlphaMode::Alpha) => IHDP_COEFF_LABEL.into(),
        }
    }

    /// Training configuration for one estimator: flag > config file > tables.
    pub fn resolve(&self, spec: &EstimatorSpec, seed: u64) -> Result<Resolved> {
        let family = spec.family;
        let bench = self.source.benchmark();
        let file = self.file.schedule_for(&spec.name())?;
        let base = &self.train;

        let (mut mode, mut mode_origin) = pick(self.flags.alpha_mode, file.alpha_mode, None, default_alpha_mode(bench));
        if !family.has_propensity_head() && mode == AlphaMode::Alpha {
            mode = AlphaMode::Unit;
            mode_origin = Origin::Default;
        }
        let label = self.dataset_label(mode);
        let table_lambda = if spec.adversarial {
            DefaultLambdaTable::get(family, &label)
        } else {
            None
        };
        let (lambda0, l_origin) = pick(self.flags.lambda0, file.lambda0, table_lambda.map(|t| t.0), base.lambda0);
        let (gamma, g_origin) = pick(self.flags.gamma, file.gamma, table_lambda.map(|t| t.1), base.gamma);
        let (alpha, a_origin) = pick(self.flags.alpha, file.alpha, DefaultAlphaTable::get(family, bench), base.alpha);

        let config = TrainConfig {
            lambda0,
            gamma,
            alpha,
            alpha_mode: mode,
            seed,
            ..base.clone()
        };
        config.validate()?;
        Ok(Resolved {
            config,
            dataset_label: label,
            origins: [l_origin, g_origin, mode_origin, a_origin],
        })
    }
}
