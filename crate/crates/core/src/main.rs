use std::fs;
use std::io::BufWriter;
use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};
use log::info;

use deconfound::bench::{
    self, parse_realizations, BenchSource, ConfigFile, ExperimentConfig, ScheduleOverrides,
};
use deconfound::dgp::{self, DgpConfig, SweepKind};
use deconfound::eval::propensity_histogram;
use deconfound::ihdp;
use deconfound::train::AlphaMode;
use deconfound::zoo::EstimatorSpec;
use deconfound::Result;

#[derive(Parser)]
#[command(name = "deconfound", version, about = "Treatment-effect estimator benchmarks")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Train and evaluate estimators over seeds (and IHDP realizations).
    Run(Common),
    /// Repeat `run` over the dataset-size or confounding sweep.
    Sweep {
        #[arg(long, value_enum)]
        kind: SweepArg,
        #[command(flatten)]
        common: Common,
    },
    /// Search the outcome/propensity coefficient for each estimator.
    TuneAlpha(Common),
    /// Print the comparison table for a run directory.
    Report {
        #[arg(long, default_value = "out")]
        out: PathBuf,
    },
    /// Write synthetic datasets, one CSV per seed.
    GenData(Common),
    /// Train once per seed and write propensity histograms.
    Hist {
        #[arg(long, default_value_t = 20)]
        bins: usize,
        #[command(flatten)]
        common: Common,
    },
}

#[derive(Clone, Copy, ValueEnum)]
enum SweepArg {
    Size,
    Confounding,
}

#[derive(Clone, Copy, ValueEnum)]
enum BenchArg {
    Synthetic,
    Ihdp,
}

#[derive(Clone, Copy, ValueEnum)]
enum AlphaModeArg {
    Unit,
    Alpha,
}

#[derive(Args)]
struct Common {
    #[arg(long, value_enum, default_value = "synthetic")]
    bench: BenchArg,
    /// Synthetic dataset size.
    #[arg(long)]
    n: Option<usize>,
    /// Number of confounding covariates.
    #[arg(long)]
    confounders: Option<usize>,
    #[arg(long)]
    noise_sigma: Option<f64>,
    /// Comma-separated estimator names, e.g. `snet,snet+`.
    #[arg(long, value_delimiter = ',')]
    estimators: Option<Vec<String>>,
    #[arg(long, default_value_t = 10)]
    seeds: usize,
    #[arg(long, default_value_t = 1)]
    jobs: usize,
    #[arg(long, default_value = "out")]
    out: PathBuf,
    #[arg(long)]
    lambda0: Option<f64>,
    #[arg(long)]
    gamma: Option<u32>,
    #[arg(long)]
    alpha: Option<f64>,
    #[arg(long, value_enum)]
    alpha_mode: Option<AlphaModeArg>,
    /// IHDP CSV directory; defaults to `DECONFOUND_IHDP_DIR`.
    #[arg(long)]
    ihdp_dir: Option<PathBuf>,
    #[arg(long, default_value = "1..100")]
    realizations: String,
    /// TOML file with `[train]`, `[dgp]` and `[estimators."name"]` sections.
    #[arg(long)]
    config: Option<PathBuf>,
}

impl Common {
    fn experiment(&self) -> Result<ExperimentConfig> {
        let names = self.estimators.clone().unwrap_or_else(bench::canonical_order);
        let specs = names
            .iter()
            .map(|n| EstimatorSpec::from_name(n))
            .collect::<Result<Vec<_>>>()?;
        let source = match self.bench {
            BenchArg::Synthetic => BenchSource::Synthetic(DgpConfig::default()),
            BenchArg::Ihdp => BenchSource::Ihdp {
                root: ihdp::resolve_root(self.ihdp_dir.as_deref())?,
                realizations: parse_realizations(&self.realizations)?,
            },
        };
        let file = match &self.config {
            Some(p) => ConfigFile::load(p)?,
            None => ConfigFile::default(),
        };
        let flags = ScheduleOverrides {
            lambda0: self.lambda0,
            gamma: self.gamma,
            alpha: self.alpha,
            alpha_mode: self.alpha_mode.map(|m| match m {
                AlphaModeArg::Unit => AlphaMode::Unit,
                AlphaModeArg::Alpha => AlphaMode::Alpha,
            }),
        };
        let mut cfg = ExperimentConfig::new(specs, source, self.seeds, file, flags, self.out.clone(), self.jobs)?;
        if let BenchSource::Synthetic(d) = &mut cfg.source {
            if let Some(n) = self.n {
                d.n = n;
            }
            if let Some(c) = self.confounders {
                d.d_c = c;
            }
            if let Some(s) = self.noise_sigma {
                d.noise_sigma = s;
            }
            d.validate()?;
        }
        Ok(cfg)
    }
}

fn run(cli: Cli) -> Result<()> {
    match cli.command {
        Command::Run(common) => {
            let cfg = common.experiment()?;
            let outcome = bench::run_experiment(&cfg)?;
            print!("{}", bench::render(&outcome.records)?);
            info!("records written to {}", cfg.out_dir.display());
        }
        Command::Sweep { kind, common } => {
            let cfg = common.experiment()?;
            let kind = match kind {
                SweepArg::Size => SweepKind::Size,
                SweepArg::Confounding => SweepKind::Confounding,
            };
            let rows = bench::sweep(kind, &cfg)?;
            println!("x_value,estimator,pehe_out_mean,pehe_in_mean");
            for r in rows {
                println!("{},{},{:.4},{:.4}", r.x_value, r.estimator, r.pehe_out_mean, r.pehe_in_mean);
            }
        }
        Command::TuneAlpha(common) => {
            let cfg = common.experiment()?;
            for spec in &cfg.estimators {
                let sub = ExperimentConfig {
                    out_dir: cfg.out_dir.join(spec.name().replace('+', "_plus")),
                    ..cfg.clone()
                };
                let s = bench::tune_alpha(&sub, spec)?;
                let path: Vec<String> = s.visited.iter().map(|(a, _)| a.to_string()).collect();
                println!("{}: alpha {} (visited {})", spec.name(), s.best, path.join(" -> "));
            }
        }
        Command::Report { out } => print!("{}", bench::report(&out)?),
        Command::GenData(common) => {
            let cfg = common.experiment()?;
            let BenchSource::Synthetic(base) = &cfg.source else {
                return Err(deconfound::Error::InvalidConfig("gen-data writes synthetic data only".into()));
            };
            fs::create_dir_all(&cfg.out_dir)?;
            for seed in 0..cfg.n_seeds as u64 {
                let c = DgpConfig {
                    seed: base.seed + seed,
                    ..base.clone()
                };
                let path = cfg.out_dir.join(format!("{}_s{seed}.csv", c.label()));
                dgp::generate(&c)?.save_csv(&path)?;
                println!("{}", path.display());
            }
        }
        Command::Hist { bins, common } => {
            let cfg = common.experiment()?;
            fs::create_dir_all(&cfg.out_dir)?;
            for spec in &cfg.estimators {
                for seed in 0..cfg.n_seeds as u64 {
                    let config = cfg.resolve(spec, seed)?.config;
                    let splits = bench::unit_splits(&cfg, seed, None)?;
                    let (model, _) = bench::fit_unit(spec, &splits, &config)?;
                    let hist = propensity_histogram(&model, &splits.in_sample().x, bins)?;
                    let path = cfg
                        .out_dir
                        .join(format!("hist_{}_s{seed}.csv", spec.name().replace('+', "_plus")));
                    hist.write_csv(BufWriter::new(fs::File::create(&path)?))?;
                    println!("{}", path.display());
                }
            }
        }
    }
    Ok(())
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("info")).init();
    match run(Cli::parse()) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::FAILURE
        }
    }
}
