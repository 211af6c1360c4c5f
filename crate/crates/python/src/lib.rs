//! Python bindings: synthetic data, detector fitting and scoring, and the
//! evaluation statistics.

use pyo3::exceptions::{PyArithmeticError, PyValueError};
use pyo3::prelude::*;

use gaal_core::baselines;
use gaal_core::detector::{fit_detector, DetectorKind, DetectorSpec, ModelFile};
use gaal_core::gaal::EpochRecord;
use gaal_core::stats;
use gaal_core::{gen_synthetic, Error, Family, Matrix, Provenance, SynthSpec};

fn py_err(e: Error) -> PyErr {
    if e.is_numeric() {
        PyArithmeticError::new_err(e.to_string())
    } else {
        PyValueError::new_err(e.to_string())
    }
}

fn matrix(rows: &[Vec<f64>]) -> PyResult<Matrix> {
    Matrix::from_rows(rows).map_err(py_err)
}

fn rows(x: &Matrix) -> Vec<Vec<f64>> {
    (0..x.rows()).map(|i| x.row(i).to_vec()).collect()
}

/// Min-max normalized features with optional 0/1 labels (1 = outlier).
#[pyclass(name = "Dataset", module = "gaal")]
struct PyDataset {
    inner: gaal_core::Dataset,
}

#[pymethods]
impl PyDataset {
    /// Normalizes raw rows column-wise to [0, 1].
    #[new]
    #[pyo3(signature = (rows, labels=None))]
    fn new(rows: Vec<Vec<f64>>, labels: Option<Vec<u8>>) -> PyResult<Self> {
        let inner = gaal_core::Dataset::from_raw(matrix(&rows)?, labels, Provenance::InMemory).map_err(py_err)?;
        Ok(Self { inner })
    }

    #[getter]
    fn n(&self) -> usize {
        self.inner.n()
    }

    #[getter]
    fn d(&self) -> usize {
        self.inner.d()
    }

    #[getter]
    fn features(&self) -> Vec<Vec<f64>> {
        rows(&self.inner.features)
    }

    #[getter]
    fn labels(&self) -> Option<Vec<u8>> {
        self.inner.labels.clone()
    }

    fn to_csv(&self) -> String {
        self.inner.to_csv_string()
    }

    fn __repr__(&self) -> String {
        format!("Dataset(n={}, d={})", self.inner.n(), self.inner.d())
    }
}

/// Generates one of the four synthetic families.
#[pyfunction]
#[pyo3(signature = (family, n, d, rate=0.02, irrelevant=0.0, seed=0))]
fn synth(family: &str, n: usize, d: usize, rate: f64, irrelevant: f64, seed: u64) -> PyResult<PyDataset> {
    let family: Family = family.parse().map_err(py_err)?;
    let spec = SynthSpec {
        outlier_rate: rate,
        irrelevant_ratio: irrelevant,
        seed,
        ..SynthSpec::new(family, n, d)
    };
    Ok(PyDataset {
        inner: gen_synthetic(&spec).map_err(py_err)?,
    })
}

/// A fitted detector: the saved model plus the training telemetry.
#[pyclass(name = "Model", module = "gaal")]
struct PyModel {
    inner: ModelFile,
    telemetry: Vec<EpochRecord>,
}

#[pymethods]
impl PyModel {
    #[getter]
    fn detector(&self) -> &'static str {
        self.inner.detector.name()
    }

    /// Rows of `(epoch, d_loss, g_loss, auc)`.
    #[getter]
    fn telemetry(&self) -> Vec<(usize, f64, Option<f64>, Option<f64>)> {
        self.telemetry
            .iter()
            .map(|r| (r.epoch, r.d_loss, r.g_loss, r.auc))
            .collect()
    }

    /// Scores raw rows, applying the training normalization first.
    fn score(&self, rows: Vec<Vec<f64>>) -> PyResult<Vec<f64>> {
        self.inner.score_raw(&matrix(&rows)?).map_err(py_err)
    }

    /// Scores rows of a dataset that is already normalized.
    fn score_dataset(&self, data: &PyDataset) -> PyResult<Vec<f64>> {
        self.inner.score_normalized(&data.inner.features).map_err(py_err)
    }

    fn to_json(&self) -> PyResult<String> {
        self.inner.to_json().map_err(py_err)
    }

    #[staticmethod]
    fn from_json(text: &str) -> PyResult<Self> {
        Ok(Self {
            inner: ModelFile::from_json(text).map_err(py_err)?,
            telemetry: Vec::new(),
        })
    }
}

/// Trains `mo-gaal`, `so-gaal`, `agpo` or `knn` on a dataset.
#[pyfunction]
#[pyo3(signature = (data, detector="mo-gaal", seed=0, k=None, max_epochs=None, d_patience=None, lr_g=None, lr_d=None, knn_k=None, agpo_epochs=None))]
#[allow(clippy::too_many_arguments)]
fn fit(
    py: Python<'_>,
    data: &PyDataset,
    detector: &str,
    seed: u64,
    k: Option<usize>,
    max_epochs: Option<usize>,
    d_patience: Option<usize>,
    lr_g: Option<f64>,
    lr_d: Option<f64>,
    knn_k: Option<usize>,
    agpo_epochs: Option<usize>,
) -> PyResult<PyModel> {
    let kind: DetectorKind = detector.parse().map_err(py_err)?;
    let mut spec = DetectorSpec::new(kind);
    let g = &mut spec.gaal;
    g.k = k.unwrap_or(g.k);
    g.max_epochs = max_epochs.unwrap_or(g.max_epochs);
    g.d_patience = d_patience.unwrap_or(g.d_patience);
    g.lr_g = lr_g.unwrap_or(g.lr_g);
    g.lr_d = lr_d.unwrap_or(g.lr_d);
    spec.knn_k = knn_k.or(spec.knn_k);
    spec.agpo_epochs = agpo_epochs.or(spec.agpo_epochs);
    spec.validate().map_err(py_err)?;
    let outcome = py.detach(|| fit_detector(&spec, &data.inner, seed)).map_err(py_err)?;
    Ok(PyModel {
        inner: outcome.model,
        telemetry: outcome.telemetry,
    })
}

/// Distance from each row to its k-th nearest other row.
#[pyfunction]
fn knn_score(rows: Vec<Vec<f64>>, k: usize) -> PyResult<Vec<f64>> {
    baselines::knn_score(&matrix(&rows)?, k).map_err(py_err)
}

/// Area under the ROC curve; higher scores mean more outlying.
#[pyfunction]
fn roc_auc(scores: Vec<f64>, labels: Vec<u8>) -> PyResult<f64> {
    stats::roc_auc(&scores, &labels).map_err(py_err)
}

/// Average rank per algorithm over a datasets × algorithms AUC table.
#[pyfunction]
fn average_ranks(auc: Vec<Vec<Option<f64>>>) -> PyResult<Vec<f64>> {
    stats::average_ranks(&auc).map_err(py_err)
}

/// Friedman statistic and its bracket term for average ranks over `n_datasets`.
#[pyfunction]
fn friedman(avg_ranks: Vec<f64>, n_datasets: usize) -> PyResult<(f64, f64)> {
    let f = stats::friedman_statistic(&avg_ranks, n_datasets).map_err(py_err)?;
    Ok((f.statistic, f.bracket))
}

/// Nemenyi critical difference for `k` algorithms over `n_datasets`.
#[pyfunction]
fn nemenyi_cd(k: usize, n_datasets: usize, q_alpha: f64) -> PyResult<f64> {
    stats::nemenyi_cd(k, n_datasets, q_alpha).map_err(py_err)
}

#[pymodule]
#[pyo3(name = "gaal")]
fn gaal_module(m: &Bound<'_, PyModule>) -> PyResult<()> {
    m.add_class::<PyDataset>()?;
    m.add_class::<PyModel>()?;
    m.add_function(wrap_pyfunction!(synth, m)?)?;
    m.add_function(wrap_pyfunction!(fit, m)?)?;
    m.add_function(wrap_pyfunction!(knn_score, m)?)?;
    m.add_function(wrap_pyfunction!(roc_auc, m)?)?;
    m.add_function(wrap_pyfunction!(average_ranks, m)?)?;
    m.add_function(wrap_pyfunction!(friedman, m)?)?;
    m.add_function(wrap_pyfunction!(nemenyi_cd, m)?)?;
    Ok(())
}
