//! Python bindings: `import gmpl` exposes dataset loading, splitting,
//! synthetic generation, the three training algorithms, and model I/O.

use std::path::PathBuf;

use pyo3::exceptions::{PyIOError, PyValueError};
use pyo3::prelude::*;

use gmpl_core::data;
use gmpl_core::lfa::LatentFactors;
use gmpl_core::trainer::{self, Algorithm, TrainConfig};
use gmpl_core::Error;

fn pyerr(e: Error) -> PyErr {
    match &e {
        Error::Io { .. } => PyIOError::new_err(e.to_string()),
        _ => PyValueError::new_err(e.to_string()),
    }
}

/// A sparse rating matrix with external-id maps.
#[pyclass(frozen)]
pub struct Dataset {
    inner: data::SparseRatings,
}

#[pymethods]
impl Dataset {
    /// Load a rating-triple file ("user item rating" per line).
    #[staticmethod]
    #[pyo3(signature = (path, delimiter="auto"))]
    fn load(path: PathBuf, delimiter: &str) -> PyResult<Dataset> {
        let delim: data::Delimiter = delimiter.parse().map_err(PyValueError::new_err)?;
        Ok(Dataset {
            inner: data::load_dataset(path, delim).map_err(pyerr)?,
        })
    }

    #[getter]
    fn n_users(&self) -> usize {
        self.inner.n_users()
    }

    #[getter]
    fn n_items(&self) -> usize {
        self.inner.n_items()
    }

    #[getter]
    fn density(&self) -> f64 {
        self.inner.density()
    }

    #[getter]
    fn duplicates(&self) -> usize {
        self.inner.duplicates()
    }

    fn __len__(&self) -> usize {
        self.inner.len()
    }

    /// The observed entries as (user_id, item_id, rating) triples.
    fn triples(&self) -> Vec<(String, String, f64)> {
        self.inner
            .entries()
            .iter()
            .map(|e| {
                (
                    self.inner.user_id(e.user).unwrap_or_default().to_string(),
                    self.inner.item_id(e.item).unwrap_or_default().to_string(),
                    e.rating,
                )
            })
            .collect()
    }

    /// Seeded entry subsample keeping roughly `fraction` of the ratings.
    fn subsample(&self, fraction: f64, seed: u64) -> PyResult<Dataset> {
        Ok(Dataset {
            inner: self.inner.subsample(fraction, seed).map_err(pyerr)?,
        })
    }

    fn __repr__(&self) -> String {
        format!(
            "Dataset({} users, {} items, {} ratings)",
            self.inner.n_users(),
            self.inner.n_items(),
            self.inner.len()
        )
    }
}

/// A train/validation/test partition sharing one dense id space.
#[pyclass(frozen)]
pub struct Split {
    inner: data::DatasetSplit,
}

#[pymethods]
impl Split {
    /// Load a split directory written by `write_dir` or `gmpl split`.
    #[staticmethod]
    fn read_dir(path: PathBuf) -> PyResult<Split> {
        Ok(Split {
            inner: data::DatasetSplit::read_dir(&path).map_err(pyerr)?,
        })
    }

    /// Persist as three triple files plus a JSON manifest.
    fn write_dir(&self, path: PathBuf) -> PyResult<()> {
        self.inner
            .write_dir(&path, &self.inner.manifest())
            .map_err(pyerr)
    }

    #[getter]
    fn seed(&self) -> u64 {
        self.inner.seed
    }

    #[getter]
    fn sizes(&self) -> (usize, usize, usize) {
        (
            self.inner.train.len(),
            self.inner.validation.len(),
            self.inner.test.len(),
        )
    }

    fn __repr__(&self) -> String {
        let (k, o, g) = self.sizes();
        format!("Split(train={k}, validation={o}, test={g}, seed={})", self.inner.seed)
    }
}

/// A trained pair of latent factor matrices.
#[pyclass(frozen)]
pub struct Model {
    inner: LatentFactors,
}

#[pymethods]
impl Model {
    #[staticmethod]
    fn load(path: PathBuf) -> PyResult<Model> {
        Ok(Model {
            inner: LatentFactors::read_file(&path).map_err(pyerr)?,
        })
    }

    fn save(&self, path: PathBuf) -> PyResult<()> {
        self.inner.write_file(&path).map_err(pyerr)
    }

    #[getter]
    fn shape(&self) -> (usize, usize, usize) {
        (self.inner.n_users(), self.inner.n_items(), self.inner.dim())
    }

    /// RMSE over one partition of a split: "train", "validation", or "test".
    #[pyo3(signature = (split, partition="test"))]
    fn rmse(&self, split: &Split, partition: &str) -> PyResult<f64> {
        let part = match partition {
            "train" => &split.inner.train,
            "validation" => &split.inner.validation,
            "test" => &split.inner.test,
            other => {
                return Err(PyValueError::new_err(format!(
                    "unknown partition {other:?}"
                )))
            }
        };
        self.inner.rmse(part.entries()).map_err(pyerr)
    }

    /// Predict ratings for (user_id, item_id) pairs; unknown ids give None.
    fn estimate(&self, split: &Split, pairs: Vec<(String, String)>) -> Vec<Option<f64>> {
        trainer::estimate_missing(&self.inner, &split.inner.train, &pairs)
            .into_iter()
            .map(|r| r.ok())
            .collect()
    }
}

/// The result of one training run.
#[pyclass(frozen)]
pub struct Report {
    inner: trainer::TrainReport,
}

#[pymethods]
impl Report {
    #[getter]
    fn algorithm(&self) -> String {
        self.inner.algorithm.to_string()
    }

    #[getter]
    fn seed(&self) -> u64 {
        self.inner.seed
    }

    #[getter]
    fn final_test_rmse(&self) -> f64 {
        self.inner.final_test_rmse
    }

    #[getter]
    fn best_val_rmse(&self) -> f64 {
        self.inner.best_val_rmse
    }

    #[getter]
    fn final_val_rmse(&self) -> f64 {
        self.inner.final_val_rmse
    }

    #[getter]
    fn iterations(&self) -> usize {
        self.inner.iterations()
    }

    #[getter]
    fn converged_iteration(&self) -> usize {
        self.inner.converged_iteration
    }

    #[getter]
    fn total_seconds(&self) -> f64 {
        self.inner.total_seconds
    }

    #[getter]
    fn time_to_best_s(&self) -> f64 {
        self.inner.time_to_best_s
    }

    #[getter]
    fn eta(&self) -> f64 {
        self.inner.eta
    }

    /// Winning regularization coefficient ("lambda" is a Python keyword).
    #[getter]
    fn lambda_(&self) -> f64 {
        self.inner.lambda
    }

    /// Per-iteration curve in the CSV schema used by the CLI.
    fn curve_csv(&self) -> String {
        self.inner.curve_csv()
    }

    /// Summary JSON string as written by the CLI.
    fn summary(&self, dataset: &str) -> String {
        self.inner.summary_json(dataset).to_string()
    }

    fn __repr__(&self) -> String {
        format!(
            "Report({}, seed={}, final_test_rmse={})",
            self.inner.algorithm, self.inner.seed, self.inner.final_test_rmse
        )
    }
}

/// Seeded entry-level split into train/validation/test.
#[pyfunction]
#[pyo3(signature = (dataset, ratios=(0.7, 0.1, 0.2), seed=0))]
fn split_dataset(dataset: &Dataset, ratios: (f64, f64, f64), seed: u64) -> PyResult<Split> {
    Ok(Split {
        inner: data::split_dataset(&dataset.inner, ratios, seed).map_err(pyerr)?,
    })
}

/// Seeded low-rank synthetic matrix; returns (dataset, ground-truth model).
#[pyfunction]
#[pyo3(signature = (n_users, n_items, rank, density, noise_sd=0.0, seed=0))]
fn generate_synthetic(
    n_users: usize,
    n_items: usize,
    rank: usize,
    density: f64,
    noise_sd: f64,
    seed: u64,
) -> PyResult<(Dataset, Model)> {
    let (ratings, truth) =
        data::generate_synthetic(n_users, n_items, rank, density, noise_sd, seed).map_err(pyerr)?;
    Ok((Dataset { inner: ratings }, Model { inner: truth }))
}

/// Train one model. `algorithm` is "gmpso", "pso", or "sgd"; plain SGD
/// needs `eta` and `lam` unless `grid=True` tunes them on the log-2 grid.
#[pyfunction]
#[pyo3(signature = (
    split, algorithm="gmpso", f=20, q=10, max_iters=1000, tol=1e-5, seed=0,
    eta=None, lam=None, grid=false
))]
#[allow(clippy::too_many_arguments)]
fn train(
    split: &Split,
    algorithm: &str,
    f: usize,
    q: usize,
    max_iters: usize,
    tol: f64,
    seed: u64,
    eta: Option<f64>,
    lam: Option<f64>,
    grid: bool,
) -> PyResult<(Model, Report)> {
    let algorithm: Algorithm = algorithm.parse().map_err(PyValueError::new_err)?;
    let cfg = TrainConfig {
        f,
        q,
        max_iters,
        tol,
        seed,
        algorithm,
        fixed_eta: eta,
        fixed_lambda: lam,
        ..TrainConfig::default()
    };
    let (factors, report) = match algorithm {
        Algorithm::GmPso => trainer::train_gmpl(&split.inner, &cfg),
        Algorithm::Pso => trainer::train_pso(&split.inner, &cfg),
        Algorithm::Sgd if grid => trainer::grid_search_sgd(&split.inner, &cfg),
        Algorithm::Sgd => {
            if eta.is_none() {
                return Err(PyValueError::new_err("eta required for sgd (or grid=True)"));
            }
            if lam.is_none() {
                return Err(PyValueError::new_err("lam required for sgd (or grid=True)"));
            }
            trainer::train_sgd(&split.inner, &cfg)
        }
    }
    .map_err(pyerr)?;
    Ok((Model { inner: factors }, Report { inner: report }))
}

#[pymodule]
fn gmpl(m: &Bound<'_, PyModule>) -> PyResult<()> {
    m.add_class::<Dataset>()?;
    m.add_class::<Split>()?;
    m.add_class::<Model>()?;
    m.add_class::<Report>()?;
    m.add_function(wrap_pyfunction!(split_dataset, m)?)?;
    m.add_function(wrap_pyfunction!(generate_synthetic, m)?)?;
    m.add_function(wrap_pyfunction!(train, m)?)?;
    Ok(())
}

#[cfg(all(test, not(feature = "extension-module")))]
mod tests {
    use super::*;
    use pyo3::types::IntoPyDict;

    #[test]
    fn roundtrip_through_python() {
        Python::initialize();
        Python::attach(|py| {
            let module = PyModule::new(py, "gmpl").unwrap();
            gmpl(&module).unwrap();
            let ns = [("gmpl", module)].into_py_dict(py).unwrap();
            py.run(
                c"
data, truth = gmpl.generate_synthetic(20, 15, 2, 0.5, noise_sd=0.0, seed=3)
assert len(data) > 0 and data.n_users == 20
split = gmpl.split_dataset(data, seed=3)
model, report = gmpl.train(split, algorithm='gmpso', f=2, q=2, max_iters=2, tol=0.0, seed=3)
assert report.iterations == 2
assert report.final_test_rmse == model.rmse(split, 'test')
preds = model.estimate(split, [('u0', 'i0'), ('nope', 'i0')])
assert preds[0] is not None and preds[1] is None
",
                Some(&ns),
                None,
            )
            .unwrap();
        });
    }
}
