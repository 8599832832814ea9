//! Synthetic observational data with known potential outcomes.
//!
//! Covariates are independent standard normals laid out as
//! `[confounders | outcome-only | treatment-only | effect modifiers]`.
//! Outcome surfaces are sums of squares over the relevant blocks and the
//! treatment probability is a logistic function of the mean squared
//! confounder/treatment covariate, centred at its sample median.

use std::io::Write;
use std::path::Path;

use ndarray::{s, Array1, Array2};
use serde::{Deserialize, Serialize};

use crate::autograd::{sigmoid, Matrix};
use crate::data::{ObservationalDataset, Splits};
use crate::error::{Error, Result};
use crate::rng::{streams, SeededRng};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct DgpConfig {
    /// Total covariates.
    pub d: usize,
    /// Outcome-only covariates.
    pub d_o: usize,
    /// Treatment-only covariates.
    pub d_t: usize,
    /// Confounders.
    pub d_c: usize,
    /// Selection-bias strength.
    pub xi: f64,
    pub noise_sigma: f64,
    pub n: usize,
    pub seed: u64,
}

impl Default for DgpConfig {
    fn default() -> Self {
        Self {
            d: 25,
            d_o: 5,
            d_t: 5,
            d_c: 10,
            xi: 3.0,
            noise_sigma: 1.0,
            n: 3000,
            seed: 0,
        }
    }
}

impl DgpConfig {
    /// Effect-modifying covariates: whatever is left of `d`.
    pub fn d_tau(&self) -> usize {
        self.d - self.d_o - self.d_t - self.d_c
    }

    pub fn d_ct(&self) -> usize {
        self.d_c + self.d_t
    }

    /// Label in the `w5-c10-o5-3K` style.
    pub fn label(&self) -> String {
        let size = if self.n.is_multiple_of(1000) {
            format!("{}K", self.n / 1000)
        } else {
            self.n.to_string()
        };
        format!("w{}-c{}-o{}-{}", self.d_t, self.d_c, self.d_o, size)
    }

    pub fn validate(&self) -> Result<()> {
        if self.d_o + self.d_t + self.d_c > self.d {
            return Err(Error::InvalidConfig(format!(
                "d_o + d_t + d_c = {} exceeds d = {}",
                self.d_o + self.d_t + self.d_c,
                self.d
            )));
        }
        if self.d_ct() == 0 {
            return Err(Error::InvalidConfig(
                "propensity is undefined without confounder or treatment covariates".into(),
            ));
        }
        if !(self.xi >= 0.0) || !(self.noise_sigma >= 0.0) {
            return Err(Error::InvalidConfig("xi and noise_sigma must be non-negative".into()));
        }
        if self.n == 0 {
            return Err(Error::InvalidConfig("n must be positive".into()));
        }
        Ok(())
    }

    fn blocks(&self) -> ColumnBlocks {
        let c = 0..self.d_c;
        let o = self.d_c..self.d_c + self.d_o;
        let t = o.end..o.end + self.d_t;
        let tau = t.end..self.d;
        ColumnBlocks { c, o, t, tau }
    }
}

struct ColumnBlocks {
    c: std::ops::Range<usize>,
    o: std::ops::Range<usize>,
    t: std::ops::Range<usize>,
    tau: std::ops::Range<usize>,
}

#[derive(Debug, Clone)]
pub struct SyntheticDataset {
    pub config: DgpConfig,
    /// Covariates, treatments, noisy outcomes and the noiseless surfaces.
    pub data: ObservationalDataset,
    /// True propensities.
    pub pi: Array1<f64>,
}

impl SyntheticDataset {
    pub fn mu0(&self) -> &Array1<f64> {
        self.data.mu0.as_ref().expect("synthetic data carries its oracle")
    }

    pub fn mu1(&self) -> &Array1<f64> {
        self.data.mu1.as_ref().expect("synthetic data carries its oracle")
    }

    pub fn cate(&self) -> Array1<f64> {
        self.mu1() - self.mu0()
    }

    /// CSV with columns `x0..x{d-1},t,y,mu0,mu1,pi`.
    pub fn write_csv<W: Write>(&self, w: W) -> Result<()> {
        let mut out = csv::Writer::from_writer(w);
        let d = self.data.dim();
        let mut header: Vec<String> = (0..d).map(|j| format!("x{j}")).collect();
        header.extend(["t", "y", "mu0", "mu1", "pi"].map(String::from));
        out.write_record(&header)?;
        let (mu0, mu1) = (self.mu0(), self.mu1());
        for i in 0..self.data.len() {
            let mut row: Vec<String> = self.data.x.row(i).iter().map(|v| v.to_string()).collect();
            row.push(self.data.t[i].to_string());
            row.push(self.data.y[i].to_string());
            row.push(mu0[i].to_string());
            row.push(mu1[i].to_string());
            row.push(self.pi[i].to_string());
            out.write_record(&row)?;
        }
        out.flush()?;
        Ok(())
    }

    pub fn save_csv(&self, path: &Path) -> Result<()> {
        let f = std::fs::File::create(path)?;
        self.write_csv(std::io::BufWriter::new(f))
    }
}

/// Standard normal covariates for a config's seed; shared across configs
/// that differ only in how columns are assigned to blocks.
pub fn draw_covariates(n: usize, d: usize, seed: u64) -> Matrix {
    let mut rng = SeededRng::derive(seed, streams::DATA);
    Array2::from_shape_simple_fn((n, d), || rng.normal())
}

fn sum_sq(x: &Matrix, cols: std::ops::Range<usize>) -> Array1<f64> {
    if cols.is_empty() {
        return Array1::zeros(x.nrows());
    }
    x.slice(s![.., cols]).map_axis(ndarray::Axis(1), |r| r.iter().map(|v| v * v).sum())
}

fn median(values: &Array1<f64>) -> f64 {
    let mut v = values.to_vec();
    v.sort_by(|a, b| a.total_cmp(b));
    let n = v.len();
    if n % 2 == 1 {
        v[n / 2]
    } else {
        0.5 * (v[n / 2 - 1] + v[n / 2])
    }
}

pub fn generate(config: &DgpConfig) -> Result<SyntheticDataset> {
    config.validate()?;
    let x = draw_covariates(config.n, config.d, config.seed);
    generate_from(config, x)
}

/// Builds outcomes and treatments on top of given covariates.
pub fn generate_from(config: &DgpConfig, x: Matrix) -> Result<SyntheticDataset> {
    config.validate()?;
    if x.dim() != (config.n, config.d) {
        return Err(Error::Shape {
            op: "generate_from",
            lhs: x.dim(),
            rhs: (config.n, config.d),
        });
    }
    let b = config.blocks();
    let co = &sum_sq(&x, b.c.clone()) + &sum_sq(&x, b.o.clone());
    let tau = sum_sq(&x, b.tau.clone());
    let mu0 = co;
    let mu1 = &mu0 + &tau;

    let ct = (&sum_sq(&x, b.c.clone()) + &sum_sq(&x, b.t.clone())) / config.d_ct() as f64;
    let omega = median(&ct);
    let pi = ct.mapv(|s| sigmoid(config.xi * (s - omega)));

    let mut rng = SeededRng::derive(config.seed, streams::DATA + 100);
    let t = pi.mapv(|p| if rng.bernoulli(p) { 1.0 } else { 0.0 });
    let noise = Array1::from_shape_simple_fn(config.n, || rng.normal());
    let y = Array1::from_shape_fn(config.n, |i| {
        let base = if t[i] == 1.0 { mu1[i] } else { mu0[i] };
        base + config.noise_sigma * noise[i]
    });

    let data = ObservationalDataset::new(x, t, y)?.with_oracle(mu0, mu1)?;
    Ok(SyntheticDataset {
        config: config.clone(),
        data,
        pi,
    })
}

/// Index partition: `(train, val, test)`.
pub fn split_indices(n: usize, test_frac: f64, val_frac: f64, seed: u64) -> Result<(Vec<usize>, Vec<usize>, Vec<usize>)> {
    for f in [test_frac, val_frac] {
        if !(f > 0.0 && f < 1.0) {
            return Err(Error::InvalidConfig(format!("split fraction {f} outside (0, 1)")));
        }
    }
    let n_test = (n as f64 * test_frac).floor() as usize;
    let n_val = ((n - n_test) as f64 * val_frac).floor() as usize;
    let n_train = n - n_test - n_val;
    if n_test == 0 || n_val == 0 || n_train == 0 {
        return Err(Error::InvalidConfig(format!(
            "split of {n} rows leaves an empty partition (train {n_train}, val {n_val}, test {n_test})"
        )));
    }
    let perm = SeededRng::derive(seed, streams::SPLIT).permutation(n);
    let test = perm[..n_test].to_vec();
    let val = perm[n_test..n_test + n_val].to_vec();
    let train = perm[n_test + n_val..].to_vec();
    Ok((train, val, test))
}

pub fn split(data: &ObservationalDataset, test_frac: f64, val_frac: f64, seed: u64) -> Result<Splits> {
    let (train, val, test) = split_indices(data.len(), test_frac, val_frac, seed)?;
    Ok(Splits {
        train: data.subset(&train),
        val: data.subset(&val),
        test: data.subset(&test),
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SweepKind {
    Size,
    Confounding,
}

/// Sweep members as `(x_value, config)`.
pub fn sweep_configs(kind: SweepKind, base: &DgpConfig) -> Vec<(usize, DgpConfig)> {
    match kind {
        SweepKind::Size => [2000, 3000, 5000, 7000]
            .into_iter()
            .map(|n| {
                let c = DgpConfig {
                    n,
                    d_t: 5,
                    d_c: 10,
                    d_o: 5,
                    ..base.clone()
                };
                (n, c)
            })
            .collect(),
        SweepKind::Confounding => (10..=13)
            .map(|d_c| {
                let c = DgpConfig {
                    n: 3000,
                    d_t: 5,
                    d_o: 5,
                    d_c,
                    ..base.clone()
                };
                (d_c, c)
            })
            .collect(),
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn zero_row_has_zero_surfaces() {
        let cfg = DgpConfig {
            n: 3,
            ..DgpConfig::default()
        };
        let ds = generate_from(&cfg, Array2::zeros((3, 25))).unwrap();
        assert!(ds.mu0().iter().all(|&v| v == 0.0));
        assert!(ds.cate().iter().all(|&v| v == 0.0));
    }

    #[test]
    fn split_sizes() {
        let (train, val, test) = split_indices(3000, 0.3, 0.3, 1).unwrap();
        assert_eq!((train.len(), val.len(), test.len()), (1470, 630, 900));
        let mut all: Vec<usize> = train.iter().chain(&val).chain(&test).copied().collect();
        all.sort();
        assert_eq!(all, (0..3000).collect::<Vec<_>>());
        assert_eq!(split_indices(3000, 0.3, 0.3, 1).unwrap().1, val);
    }

    #[test]
    fn empty_partition_rejected() {
        assert!(split_indices(2, 0.3, 0.3, 0).is_err());
    }

    #[test]
    fn no_propensity_columns_rejected() {
        let cfg = DgpConfig {
            d_c: 0,
            d_t: 0,
            ..DgpConfig::default()
        };
        assert!(generate(&cfg).is_err());
    }

    #[test]
    fn labels() {
        assert_eq!(DgpConfig::default().label(), "w5-c10-o5-3K");
        let c = &sweep_configs(SweepKind::Confounding, &DgpConfig::default())[3].1;
        assert_eq!(c.label(), "w5-c13-o5-3K");
        assert_eq!(c.d_tau(), 2);
    }

    #[test]
    fn sweeps() {
        let base = DgpConfig::default();
        let size: Vec<usize> = sweep_configs(SweepKind::Size, &base).iter().map(|s| s.0).collect();
        assert_eq!(size, vec![2000, 3000, 5000, 7000]);
        assert_eq!(sweep_configs(SweepKind::Size, &base)[1].1, base);
        let conf = sweep_configs(SweepKind::Confounding, &base);
        assert_eq!(conf.iter().map(|s| s.0).collect::<Vec<_>>(), vec![10, 11, 12, 13]);
        assert!(conf.iter().all(|(_, c)| c.xi == 3.0));
    }

    #[test]
    fn csv_header() {
        let ds = generate(&DgpConfig {
            n: 4,
            d: 5,
            d_c: 2,
            d_o: 1,
            d_t: 1,
            ..DgpConfig::default()
        })
        .unwrap();
        let mut buf = Vec::new();
        ds.write_csv(&mut buf).unwrap();
        let text = String::from_utf8(buf).unwrap();
        assert_eq!(text.lines().next().unwrap(), "x0,x1,x2,x3,x4,t,y,mu0,mu1,pi");
        assert_eq!(text.lines().count(), 5);
    }
}
