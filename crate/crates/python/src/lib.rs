//! Python bindings: synthetic data, estimator training and evaluation.

use ndarray::{Array1, Array2};
use pyo3::exceptions::PyValueError;
use pyo3::prelude::*;
use pyo3::types::PyDict;

use deconfound::data::{holdout_indices, ObservationalDataset};
use deconfound::dgp::{self, DgpConfig};
use deconfound::rng::{streams, SeededRng};
use deconfound::train::{self, AlphaMode, TrainConfig};
use deconfound::zoo::{EstimatorSpec, Model};

fn value_err(e: deconfound::Error) -> PyErr {
    PyValueError::new_err(e.to_string())
}

fn to_matrix(rows: Vec<Vec<f64>>) -> PyResult<Array2<f64>> {
    let n = rows.len();
    let d = rows.first().map_or(0, Vec::len);
    if rows.iter().any(|r| r.len() != d) {
        return Err(PyValueError::new_err("covariate rows must all have the same length"));
    }
    Array2::from_shape_vec((n, d), rows.into_iter().flatten().collect())
        .map_err(|e| PyValueError::new_err(e.to_string()))
}

fn rows_of(x: &Array2<f64>) -> Vec<Vec<f64>> {
    x.rows().into_iter().map(|r| r.to_vec()).collect()
}

/// Draws a synthetic dataset. Returns a dict with `x`, `t`, `y`, `mu0`, `mu1` and `pi`.
#[pyfunction]
#[pyo3(signature = (n=3000, confounders=10, noise_sigma=1.0, seed=0))]
fn generate<'py>(
    py: Python<'py>,
    n: usize,
    confounders: usize,
    noise_sigma: f64,
    seed: u64,
) -> PyResult<Bound<'py, PyDict>> {
    let cfg = DgpConfig {
        n,
        d_c: confounders,
        noise_sigma,
        seed,
        ..DgpConfig::default()
    };
    let ds = dgp::generate(&cfg).map_err(value_err)?;
    let out = PyDict::new(py);
    out.set_item("x", rows_of(&ds.data.x))?;
    out.set_item("t", ds.data.t.to_vec())?;
    out.set_item("y", ds.data.y.to_vec())?;
    out.set_item("mu0", ds.mu0().to_vec())?;
    out.set_item("mu1", ds.mu1().to_vec())?;
    out.set_item("pi", ds.pi.to_vec())?;
    out.set_item("label", cfg.label())?;
    Ok(out)
}

#[pyfunction]
fn pehe(e_hat: Vec<f64>, e_true: Vec<f64>) -> PyResult<f64> {
    deconfound::eval::pehe(&e_hat, &e_true).map_err(value_err)
}

#[pyfunction]
fn lambda_schedule(epoch: usize, lambda0: f64, gamma: u32) -> f64 {
    train::lambda_schedule(epoch, lambda0, gamma)
}

/// A treatment-effect estimator such as `tarnet`, `snet` or `snet+`.
#[pyclass(name = "Estimator")]
struct PyEstimator {
    spec: EstimatorSpec,
    config: TrainConfig,
    model: Option<Model>,
}

#[pymethods]
impl PyEstimator {
    #[new]
    #[pyo3(signature = (
        name,
        seed=0,
        max_epochs=1000,
        lr=1e-4,
        batch_size=100,
        patience=50,
        l2=1e-4,
        ortho=0.01,
        lambda0=1.0,
        gamma=1,
        alpha=None,
    ))]
    #[allow(clippy::too_many_arguments)]
    fn new(
        name: &str,
        seed: u64,
        max_epochs: usize,
        lr: f64,
        batch_size: usize,
        patience: usize,
        l2: f64,
        ortho: f64,
        lambda0: f64,
        gamma: u32,
        alpha: Option<f64>,
    ) -> PyResult<Self> {
        let spec = EstimatorSpec::from_name(name).map_err(value_err)?;
        let config = TrainConfig {
            seed,
            max_epochs,
            lr,
            batch_size,
            patience,
            l2_lambda1: l2,
            ortho_lambda2: ortho,
            lambda0,
            gamma,
            alpha_mode: if alpha.is_some() { AlphaMode::Alpha } else { AlphaMode::Unit },
            alpha: alpha.unwrap_or(0.5),
            ..TrainConfig::default()
        };
        config.validate().map_err(value_err)?;
        Ok(Self {
            spec,
            config,
            model: None,
        })
    }

    #[getter]
    fn name(&self) -> String {
        self.spec.name()
    }

    #[getter]
    fn is_fitted(&self) -> bool {
        self.model.is_some()
    }

    /// Trains on `(x, t, y)` holding out `val_fraction` of rows for early
    /// stopping. Returns a dict with `epochs_run`, `best_epoch`, `diverged`
    /// and the per-epoch `val_loss` trace.
    #[pyo3(signature = (x, t, y, val_fraction=0.3))]
    fn fit<'py>(
        &mut self,
        py: Python<'py>,
        x: Vec<Vec<f64>>,
        t: Vec<f64>,
        y: Vec<f64>,
        val_fraction: f64,
    ) -> PyResult<Bound<'py, PyDict>> {
        if !(val_fraction > 0.0 && val_fraction < 1.0) {
            return Err(PyValueError::new_err("val_fraction must lie in (0, 1)"));
        }
        let x = to_matrix(x)?;
        let data = ObservationalDataset::new(x, Array1::from(t), Array1::from(y)).map_err(value_err)?;
        let spec = self.spec.clone();
        let config = self.config.clone();
        let (model, report) = py
            .detach(move || -> deconfound::Result<_> {
                let (kept, held) = holdout_indices(data.len(), val_fraction, config.seed);
                let (tr, val) = (data.subset(&kept), data.subset(&held));
                let mut model = Model::build(&spec, data.dim(), &mut SeededRng::derive(config.seed, streams::INIT))?;
                let report = train::train(&mut model, &tr, &val, &config)?;
                Ok((model, report))
            })
            .map_err(value_err)?;
        self.model = Some(model);
        let out = PyDict::new(py);
        out.set_item("epochs_run", report.epochs_run)?;
        out.set_item("best_epoch", report.best_epoch)?;
        out.set_item("diverged", report.diverged)?;
        out.set_item("val_loss", report.trace.iter().map(|r| r.val_loss).collect::<Vec<_>>())?;
        Ok(out)
    }

    /// `(mu0_hat, mu1_hat, pi_hat)`; `pi_hat` is `None` without a propensity head.
    #[allow(clippy::type_complexity)]
    fn predict(&self, x: Vec<Vec<f64>>) -> PyResult<(Vec<f64>, Vec<f64>, Option<Vec<f64>>)> {
        let model = self.fitted()?;
        let p = model.forward(&to_matrix(x)?, 0.0).map_err(value_err)?;
        Ok((p.mu0_hat.to_vec(), p.mu1_hat.to_vec(), p.pi_hat.map(|v| v.to_vec())))
    }

    fn predict_cate(&self, x: Vec<Vec<f64>>) -> PyResult<Vec<f64>> {
        let model = self.fitted()?;
        deconfound::eval::predict_cate(model, &to_matrix(x)?)
            .map(|c| c.to_vec())
            .map_err(value_err)
    }

    fn num_parameters(&self) -> PyResult<usize> {
        Ok(self.fitted()?.num_parameters())
    }

    fn __repr__(&self) -> String {
        format!("Estimator({:?}, fitted={})", self.spec.name(), self.model.is_some())
    }
}

impl PyEstimator {
    fn fitted(&self) -> PyResult<&Model> {
        self.model
            .as_ref()
            .ok_or_else(|| PyValueError::new_err("estimator is not fitted; call fit() first"))
    }
}

#[pymodule]
fn pydeconfound(m: &Bound<'_, PyModule>) -> PyResult<()> {
    m.add_class::<PyEstimator>()?;
    m.add_function(wrap_pyfunction!(generate, m)?)?;
    m.add_function(wrap_pyfunction!(pehe, m)?)?;
    m.add_function(wrap_pyfunction!(lambda_schedule, m)?)?;
    Ok(())
}
