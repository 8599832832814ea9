//! Plug-in effect predictions, PEHE, and multi-run aggregation.

use std::io::Write;

use ndarray::Array1;

use crate::autograd::Matrix;
use crate::error::{Error, Result};
use crate::zoo::Model;

/// `mu1_hat - mu0_hat` for every row.
pub fn predict_cate(model: &Model, x: &Matrix) -> Result<Array1<f64>> {
    Ok(model.forward(x, 0.0)?.cate())
}

/// Root mean squared error between predicted and true effects.
pub fn pehe(e_hat: &[f64], e_true: &[f64]) -> Result<f64> {
    if e_hat.is_empty() || e_hat.len() != e_true.len() {
        return Err(Error::InvalidConfig(format!(
            "pehe needs equal non-empty lengths, got {} and {}",
            e_hat.len(),
            e_true.len()
        )));
    }
    let mse = e_hat
        .iter()
        .zip(e_true)
        .map(|(a, b)| (a - b).powi(2))
        .sum::<f64>()
        / e_hat.len() as f64;
    Ok(mse.sqrt())
}

/// One (estimator, seed, realization) run.
#[derive(Debug, Clone, PartialEq)]
pub struct EvalReport {
    pub estimator: String,
    pub seed: u64,
    pub realization: Option<usize>,
    pub diverged: bool,
    pub pehe_in: Option<f64>,
    pub pehe_out: Option<f64>,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MeanSe {
    pub mean: f64,
    /// `None` for a single run.
    pub se: Option<f64>,
}

impl MeanSe {
    pub fn of(values: &[f64]) -> Option<Self> {
        let n = values.len();
        if n == 0 {
            return None;
        }
        let mean = values.iter().sum::<f64>() / n as f64;
        let se = (n > 1).then(|| {
            let var = values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (n - 1) as f64;
            var.sqrt() / (n as f64).sqrt()
        });
        Some(Self { mean, se })
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct AggregateReport {
    pub estimator: String,
    pub n_runs: usize,
    pub n_diverged: usize,
    pub pehe_in: MeanSe,
    pub pehe_out: MeanSe,
}

/// Mean and standard error (n-1 deviation over sqrt n) across completed runs.
pub fn aggregate(reports: &[EvalReport]) -> Result<AggregateReport> {
    let completed: Vec<&EvalReport> = reports.iter().filter(|r| !r.diverged).collect();
    let n_diverged = reports.len() - completed.len();
    let ins: Vec<f64> = completed.iter().filter_map(|r| r.pehe_in).collect();
    let outs: Vec<f64> = completed.iter().filter_map(|r| r.pehe_out).collect();
    match (MeanSe::of(&ins), MeanSe::of(&outs)) {
        (Some(pehe_in), Some(pehe_out)) => Ok(AggregateReport {
            estimator: reports[0].estimator.clone(),
            n_runs: completed.len(),
            n_diverged,
            pehe_in,
            pehe_out,
        }),
        _ => Err(Error::NoCompletedRuns { diverged: n_diverged }),
    }
}

/// Histogram bin counts of propensity predictions over `bins` equal-width bins of [0, 1].
#[derive(Debug, Clone, PartialEq)]
pub struct Histogram {
    pub edges: Vec<f64>,
    pub counts: Vec<usize>,
}

impl Histogram {
    pub fn from_values(values: &[f64], bins: usize) -> Self {
        assert!(bins > 0, "histogram needs at least one bin");
        let edges: Vec<f64> = (0..=bins).map(|i| i as f64 / bins as f64).collect();
        let mut counts = vec![0; bins];
        for &v in values {
            let b = ((v * bins as f64).floor() as isize).clamp(0, bins as isize - 1) as usize;
            counts[b] += 1;
        }
        Self { edges, counts }
    }

    /// `bin_lo,bin_hi,count` lines.
    pub fn write_csv<W: Write>(&self, mut w: W) -> std::io::Result<()> {
        writeln!(w, "bin_lo,bin_hi,count")?;
        for (i, c) in self.counts.iter().enumerate() {
            writeln!(w, "{},{},{}", self.edges[i], self.edges[i + 1], c)?;
        }
        Ok(())
    }
}

pub fn propensity_histogram(model: &Model, x: &Matrix, bins: usize) -> Result<Histogram> {
    if !model.family().has_propensity_head() {
        return Err(Error::InvalidSpec(format!("{} has no propensity head", model.family())));
    }
    let pred = model.forward(x, 0.0)?;
    let pi = pred.pi_hat.expect("family has a propensity head");
    Ok(Histogram::from_values(pi.as_slice().expect("contiguous"), bins))
}
