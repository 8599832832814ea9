use ndarray::{Array1, Axis};

use crate::autograd::Matrix;
use crate::error::{Error, Result};
use crate::rng::{streams, SeededRng};

/// Covariates, binary treatments and observed outcomes, with the noiseless
/// outcome surfaces attached when the data come from a simulator.
#[derive(Debug, Clone, PartialEq)]
pub struct ObservationalDataset {
    pub x: Matrix,
    pub t: Array1<f64>,
    pub y: Array1<f64>,
    pub mu0: Option<Array1<f64>>,
    pub mu1: Option<Array1<f64>>,
}

impl ObservationalDataset {
    pub fn new(x: Matrix, t: Array1<f64>, y: Array1<f64>) -> Result<Self> {
        let n = x.nrows();
        if t.len() != n || y.len() != n {
            return Err(Error::InvalidConfig(format!(
                "dataset arrays disagree on length: x {n}, t {}, y {}",
                t.len(),
                y.len()
            )));
        }
        if t.iter().any(|&v| v != 0.0 && v != 1.0) {
            return Err(Error::InvalidConfig("treatments must be 0 or 1".into()));
        }
        Ok(Self {
            x,
            t,
            y,
            mu0: None,
            mu1: None,
        })
    }

    pub fn with_oracle(mut self, mu0: Array1<f64>, mu1: Array1<f64>) -> Result<Self> {
        if mu0.len() != self.len() || mu1.len() != self.len() {
            return Err(Error::InvalidConfig("oracle surfaces have the wrong length".into()));
        }
        self.mu0 = Some(mu0);
        self.mu1 = Some(mu1);
        Ok(self)
    }

    pub fn len(&self) -> usize {
        self.x.nrows()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn dim(&self) -> usize {
        self.x.ncols()
    }

    pub fn n_treated(&self) -> usize {
        self.t.iter().filter(|&&v| v == 1.0).count()
    }

    /// True effect `mu1 - mu0` when the oracle is available.
    pub fn cate(&self) -> Option<Array1<f64>> {
        match (&self.mu0, &self.mu1) {
            (Some(m0), Some(m1)) => Some(m1 - m0),
            _ => None,
        }
    }

    pub fn subset(&self, idx: &[usize]) -> Self {
        Self {
            x: self.x.select(Axis(0), idx),
            t: self.t.select(Axis(0), idx),
            y: self.y.select(Axis(0), idx),
            mu0: self.mu0.as_ref().map(|m| m.select(Axis(0), idx)),
            mu1: self.mu1.as_ref().map(|m| m.select(Axis(0), idx)),
        }
    }

    /// Rows of `self` followed by rows of `other`.
    pub fn concat(&self, other: &Self) -> Result<Self> {
        if self.dim() != other.dim() {
            return Err(Error::Shape {
                op: "dataset concat",
                lhs: self.x.dim(),
                rhs: other.x.dim(),
            });
        }
        let cat = |a: &Array1<f64>, b: &Array1<f64>| {
            ndarray::concatenate(Axis(0), &[a.view(), b.view()]).expect("1-d concat")
        };
        let oracle = |a: &Option<Array1<f64>>, b: &Option<Array1<f64>>| match (a, b) {
            (Some(a), Some(b)) => Some(cat(a, b)),
            _ => None,
        };
        Ok(Self {
            x: ndarray::concatenate(Axis(0), &[self.x.view(), other.x.view()]).expect("dims checked"),
            t: cat(&self.t, &other.t),
            y: cat(&self.y, &other.y),
            mu0: oracle(&self.mu0, &other.mu0),
            mu1: oracle(&self.mu1, &other.mu1),
        })
    }
}

/// Train / validation / test partition of one dataset.
#[derive(Debug, Clone)]
pub struct Splits {
    pub train: ObservationalDataset,
    pub val: ObservationalDataset,
    pub test: ObservationalDataset,
}

impl Splits {
    /// Everything that is not held out (train followed by validation).
    pub fn in_sample(&self) -> ObservationalDataset {
        self.train.concat(&self.val).expect("splits share a column count")
    }
}

/// Seeded `(kept, held_out)` row indices with `floor(frac * n)` held out, each sorted.
pub fn holdout_indices(n: usize, frac: f64, seed: u64) -> (Vec<usize>, Vec<usize>) {
    let n_out = (n as f64 * frac).floor() as usize;
    let perm = SeededRng::derive(seed, streams::SPLIT).permutation(n);
    let mut held = perm[..n_out].to_vec();
    let mut kept = perm[n_out..].to_vec();
    held.sort_unstable();
    kept.sort_unstable();
    (kept, held)
}
