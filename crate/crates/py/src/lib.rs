//! Python bindings for the lossland toolkit: dataset generation/IO, training,
//! direction bases, landscape grids, trajectories, and SVG rendering.

use std::path::PathBuf;

use pyo3::exceptions::{PyIOError, PyValueError};
use pyo3::prelude::*;

use lossland::graph;
use lossland::landscape;
use lossland::model;
use lossland::projection;
use lossland::snapshot;
use lossland::svg;
use lossland::train as train_mod;

fn err(e: lossland::Error) -> PyErr {
    match e {
        lossland::Error::Io(inner) => PyIOError::new_err(inner.to_string()),
        other => PyValueError::new_err(other.to_string()),
    }
}

#[pyclass(name = "Graph", skip_from_py_object)]
#[derive(Clone)]
struct PyGraph {
    inner: lossland::Graph,
}

#[pymethods]
impl PyGraph {
    #[getter]
    fn num_nodes(&self) -> usize {
        self.inner.num_nodes
    }

    #[getter]
    fn num_edge_entries(&self) -> usize {
        self.inner.col_indices.len()
    }

    #[getter]
    fn num_classes(&self) -> usize {
        self.inner.num_classes
    }

    #[getter]
    fn feature_dim(&self) -> usize {
        self.inner.features.cols()
    }

    #[getter]
    fn labels(&self) -> Vec<usize> {
        self.inner.labels.clone()
    }

    fn neighbors(&self, i: usize) -> PyResult<Vec<usize>> {
        if i >= self.inner.num_nodes {
            return Err(PyValueError::new_err(format!("node {i} out of range")));
        }
        Ok(self.inner.neighbors(i).to_vec())
    }

    /// Drop each undirected edge independently, keeping `keep_fraction`.
    fn sparsify(&self, keep_fraction: f64, seed: u64) -> PyResult<PyGraph> {
        Ok(PyGraph {
            inner: graph::sparsify_edges(&self.inner, keep_fraction, seed).map_err(err)?,
        })
    }

    /// Mean pairwise row distance over mean row norm of Â^l X.
    fn oversmoothing_score(&self, num_propagations: usize) -> PyResult<f64> {
        let prop = graph::normalize_adjacency(&self.inner);
        let mut x = self.inner.features.clone();
        for _ in 0..num_propagations {
            x = prop.matmul(&x);
        }
        model::oversmoothing_score(&x).map_err(err)
    }

    fn write_dataset(&self, dir: PathBuf) -> PyResult<()> {
        lossland::dataset::write_dataset_dir(&self.inner, &dir).map_err(err)
    }

    #[staticmethod]
    fn load_dataset(dir: PathBuf) -> PyResult<PyGraph> {
        Ok(PyGraph {
            inner: lossland::dataset::load_node_classification_dataset(&dir).map_err(err)?,
        })
    }

    #[staticmethod]
    fn synthetic_sbm(
        num_blocks: usize,
        nodes_per_block: usize,
        p_in: f64,
        p_out: f64,
        feature_dim: usize,
        seed: u64,
    ) -> PyResult<PyGraph> {
        Ok(PyGraph {
            inner: graph::generate_synthetic_sbm(
                num_blocks,
                nodes_per_block,
                p_in,
                p_out,
                feature_dim,
                seed,
            )
            .map_err(err)?,
        })
    }
}

#[pyclass(name = "ModelConfig", skip_from_py_object)]
#[derive(Clone)]
struct PyModelConfig {
    inner: model::ModelConfig,
}

#[pymethods]
impl PyModelConfig {
    #[new]
    #[pyo3(signature = (architecture, num_layers, hidden_dim, jumping_knowledge="none", seed=0))]
    fn new(
        architecture: &str,
        num_layers: usize,
        hidden_dim: usize,
        jumping_knowledge: &str,
        seed: u64,
    ) -> PyResult<Self> {
        let architecture = match architecture {
            "gcn" => model::Architecture::Gcn,
            "gat" => model::Architecture::Gat,
            "gin" => model::Architecture::Gin,
            other => return Err(PyValueError::new_err(format!("unknown architecture {other:?}"))),
        };
        let jumping_knowledge = match jumping_knowledge {
            "none" => model::JumpingKnowledge::None,
            "concat" => model::JumpingKnowledge::Concat,
            "sum" => model::JumpingKnowledge::Sum,
            other => return Err(PyValueError::new_err(format!("unknown jumping knowledge {other:?}"))),
        };
        let inner = model::ModelConfig {
            architecture,
            num_layers,
            hidden_dim,
            jumping_knowledge,
            gin_epsilon_init: 0.0,
            gat_leaky_slope: 0.2,
            seed,
        };
        inner.validate().map_err(err)?;
        Ok(PyModelConfig { inner })
    }

    #[getter]
    fn config_hash(&self) -> u64 {
        self.inner.hash()
    }
}

#[pyclass(name = "TrainRecord")]
struct PyTrainRecord {
    inner: lossland::TrainRecord,
}

#[pymethods]
impl PyTrainRecord {
    #[getter]
    fn num_snapshots(&self) -> usize {
        self.inner.num_snapshots()
    }

    #[getter]
    fn dim(&self) -> usize {
        self.inner.dim()
    }

    #[getter]
    fn best_epoch(&self) -> usize {
        self.inner.best_epoch
    }

    #[getter]
    fn train_loss(&self) -> Vec<f64> {
        self.inner.train_loss.clone()
    }

    #[getter]
    fn val_loss(&self) -> Vec<f64> {
        self.inner.val_loss.clone()
    }

    #[getter]
    fn train_acc(&self) -> Vec<f64> {
        self.inner.train_acc.clone()
    }

    #[getter]
    fn val_acc(&self) -> Vec<f64> {
        self.inner.val_acc.clone()
    }

    fn save(&self, path: PathBuf) -> PyResult<()> {
        snapshot::write_snapshots(&self.inner, &path).map_err(err)
    }

    #[staticmethod]
    fn load(path: PathBuf) -> PyResult<PyTrainRecord> {
        Ok(PyTrainRecord {
            inner: snapshot::read_snapshots(&path).map_err(err)?,
        })
    }
}

#[pyfunction]
#[pyo3(signature = (config, graph, epochs_max=1000, patience=50, lr=0.01, weight_decay=0.002))]
fn train(
    config: &PyModelConfig,
    graph: &PyGraph,
    epochs_max: usize,
    patience: usize,
    lr: f64,
    weight_decay: f64,
) -> PyResult<PyTrainRecord> {
    let opts = train_mod::TrainOptions {
        epochs_max,
        patience,
        adam: lossland::optim::AdamConfig {
            lr,
            weight_decay,
            ..lossland::optim::AdamConfig::default()
        },
    };
    Ok(PyTrainRecord {
        inner: train_mod::train(&config.inner, &graph.inner, &opts).map_err(err)?,
    })
}

#[pyclass(name = "DirectionPair", skip_from_py_object)]
#[derive(Clone)]
struct PyDirectionPair {
    inner: projection::DirectionPair,
}

#[pymethods]
impl PyDirectionPair {
    #[getter]
    fn method(&self) -> String {
        self.inner.method.to_string()
    }

    #[getter]
    fn dim(&self) -> usize {
        self.inner.dim()
    }

    #[getter]
    fn orthonormality_defect(&self) -> f64 {
        self.inner.orthonormality_defect
    }

    #[getter]
    fn b1(&self) -> Vec<f64> {
        self.inner.b1.clone()
    }

    #[getter]
    fn b2(&self) -> Vec<f64> {
        self.inner.b2.clone()
    }

    fn save(&self, path: PathBuf) -> PyResult<()> {
        snapshot::write_directions(&self.inner, &path).map_err(err)
    }

    #[staticmethod]
    fn load(path: PathBuf) -> PyResult<PyDirectionPair> {
        Ok(PyDirectionPair {
            inner: snapshot::read_directions(&path).map_err(err)?,
        })
    }
}

#[pyfunction]
#[pyo3(signature = (record, method, batch_size=None, seed=0))]
fn compute_directions(
    record: &PyTrainRecord,
    method: &str,
    batch_size: Option<usize>,
    seed: u64,
) -> PyResult<PyDirectionPair> {
    let method: projection::ProjectionMethod = method.parse().map_err(err)?;
    let inner = match method {
        projection::ProjectionMethod::Random => projection::random_directions_filter_normalized(
            &record.inner.layout,
            &record.inner.theta_star(),
            seed,
        )
        .map_err(err)?,
        projection::ProjectionMethod::PcaGram | projection::ProjectionMethod::PcaNaive => {
            let diff = projection::build_difference_matrix(&record.inner).map_err(err)?;
            let mode = if method == projection::ProjectionMethod::PcaGram {
                projection::PcaMode::Gram
            } else {
                projection::PcaMode::Naive
            };
            projection::pca_directions(&diff, mode).map_err(err)?
        }
        projection::ProjectionMethod::Learnable => {
            let diff = projection::build_difference_matrix(&record.inner).map_err(err)?;
            let mut opts = projection::FitOptions::defaults_for(diff.rows());
            if let Some(b) = batch_size {
                opts.batch_size = b;
            }
            opts.seed = seed;
            projection::fit_learnable_projection(&diff, &opts).map_err(err)?
        }
    };
    Ok(PyDirectionPair { inner })
}

/// Per-snapshot l1 reconstruction errors and their total.
#[pyfunction]
fn reconstruction_error(
    record: &PyTrainRecord,
    directions: &PyDirectionPair,
) -> PyResult<(Vec<f64>, f64)> {
    let diff = projection::build_difference_matrix(&record.inner).map_err(err)?;
    projection::reconstruction_error_l1(&diff, &directions.inner).map_err(err)
}

#[pyclass(name = "LandscapeGrid")]
struct PyLandscapeGrid {
    inner: landscape::LandscapeGrid,
}

#[pymethods]
impl PyLandscapeGrid {
    #[getter]
    fn resolution(&self) -> usize {
        self.inner.resolution
    }

    #[getter]
    fn x_range(&self) -> (f64, f64) {
        self.inner.x_range
    }

    #[getter]
    fn y_range(&self) -> (f64, f64) {
        self.inner.y_range
    }

    /// Row-major values, row = y index.
    #[getter]
    fn values(&self) -> Vec<f64> {
        self.inner.values.clone()
    }

    fn value(&self, ix: usize, iy: usize) -> PyResult<f64> {
        if ix >= self.inner.resolution || iy >= self.inner.resolution {
            return Err(PyValueError::new_err("grid index out of range"));
        }
        Ok(self.inner.value(ix, iy))
    }

    fn count_strict_local_minima(&self) -> usize {
        landscape::count_strict_local_minima(&self.inner)
    }

    #[pyo3(signature = (path, trajectory=None, levels=10, log_levels=false))]
    fn render_svg(
        &self,
        path: PathBuf,
        trajectory: Option<&PyTrajectory>,
        levels: usize,
        log_levels: bool,
    ) -> PyResult<()> {
        let levels = if log_levels {
            svg::Levels::LogCount(levels)
        } else {
            svg::Levels::Count(levels)
        };
        svg::render_contour_svg(
            &self.inner,
            trajectory.map(|t| &t.inner),
            &levels,
            &path,
        )
        .map_err(err)
    }
}

#[pyfunction]
#[pyo3(signature = (config, graph, record, directions, range=1.0, resolution=51, mask="train"))]
#[allow(clippy::too_many_arguments)]
fn evaluate_landscape(
    config: &PyModelConfig,
    graph: &PyGraph,
    record: &PyTrainRecord,
    directions: &PyDirectionPair,
    range: f64,
    resolution: usize,
    mask: &str,
) -> PyResult<PyLandscapeGrid> {
    let mask: landscape::MaskKind = mask.parse().map_err(err)?;
    let inner = landscape::evaluate_landscape_grid(
        &config.inner,
        &graph.inner,
        &record.inner.theta_star(),
        &directions.inner,
        (-range, range),
        (-range, range),
        resolution,
        mask,
        "python",
    )
    .map_err(err)?;
    Ok(PyLandscapeGrid { inner })
}

#[pyclass(name = "Trajectory")]
struct PyTrajectory {
    inner: landscape::Trajectory2D,
}

#[pymethods]
impl PyTrajectory {
    /// (epoch, x, y, residual_l1, train_loss) per snapshot.
    #[getter]
    fn points(&self) -> Vec<(usize, f64, f64, f64, f64)> {
        self.inner
            .points
            .iter()
            .map(|p| (p.epoch, p.x, p.y, p.residual_l1, p.train_loss))
            .collect()
    }

    #[getter]
    fn method(&self) -> String {
        self.inner.method.to_string()
    }
}

#[pyfunction]
fn project_trajectory(
    record: &PyTrainRecord,
    directions: &PyDirectionPair,
) -> PyResult<PyTrajectory> {
    Ok(PyTrajectory {
        inner: landscape::project_trajectory(&record.inner, &directions.inner).map_err(err)?,
    })
}

#[pymodule]
fn lossland_py(m: &Bound<'_, PyModule>) -> PyResult<()> {
    m.add_class::<PyGraph>()?;
    m.add_class::<PyModelConfig>()?;
    m.add_class::<PyTrainRecord>()?;
    m.add_class::<PyDirectionPair>()?;
    m.add_class::<PyLandscapeGrid>()?;
    m.add_class::<PyTrajectory>()?;
    m.add_function(wrap_pyfunction!(train, m)?)?;
    m.add_function(wrap_pyfunction!(compute_directions, m)?)?;
    m.add_function(wrap_pyfunction!(reconstruction_error, m)?)?;
    m.add_function(wrap_pyfunction!(evaluate_landscape, m)?)?;
    m.add_function(wrap_pyfunction!(project_trajectory, m)?)?;
    Ok(())
}
