//! Python bindings. Volumes and matrices cross the boundary as flat lists of
//! floats in the library's native order (x fastest for volumes, row-major for
//! matrices).

use std::path::PathBuf;

use pyo3::exceptions::{PyIOError, PyValueError};
use pyo3::prelude::*;

use hilbert_fc::experiments::{ClassPair, ExperimentConfig, Precision, TrainConfig};
use hilbert_fc::features::ClassLabel;
use hilbert_fc::nn::{Arch, Tensor};
use hilbert_fc::Error;

fn py_err(e: Error) -> PyErr {
    match e {
        Error::Io { .. } => PyIOError::new_err(e.to_string()),
        other => PyValueError::new_err(other.to_string()),
    }
}

fn arch(name: &str) -> PyResult<Arch> {
    name.parse().map_err(py_err)
}

#[pyclass(module = "hilbert_fc_py")]
struct HilbertCurve {
    inner: hilbert_fc::hilbert::HilbertCurve,
}

#[pymethods]
impl HilbertCurve {
    #[new]
    fn new(order: u32) -> PyResult<Self> {
        Ok(HilbertCurve {
            inner: hilbert_fc::hilbert::HilbertCurve::new(order).map_err(py_err)?,
        })
    }

    #[getter]
    fn order(&self) -> u32 {
        self.inner.order()
    }

    #[getter]
    fn side(&self) -> usize {
        self.inner.side()
    }

    #[getter]
    fn total_cells(&self) -> usize {
        self.inner.total_cells()
    }

    fn index_to_coord(&self, h: usize) -> PyResult<(usize, usize, usize)> {
        let [x, y, z] = self.inner.index_to_coord(h).map_err(py_err)?;
        Ok((x, y, z))
    }

    fn coord_to_index(&self, x: usize, y: usize, z: usize) -> PyResult<usize> {
        self.inner.coord_to_index([x, y, z]).map_err(py_err)
    }
}

#[pyclass(module = "hilbert_fc_py", from_py_object)]
#[derive(Clone)]
struct CorrelationMatrix {
    inner: hilbert_fc::features::CorrelationMatrix,
}

#[pymethods]
impl CorrelationMatrix {
    #[getter]
    fn size(&self) -> usize {
        self.inner.size
    }

    #[getter]
    fn subject_id(&self) -> String {
        self.inner.subject_id.clone()
    }

    #[getter]
    fn label(&self) -> String {
        self.inner.label.to_string()
    }

    #[getter]
    fn values(&self) -> Vec<f64> {
        self.inner.values.clone()
    }

    fn get(&self, i: usize, j: usize) -> PyResult<f64> {
        if i >= self.inner.size || j >= self.inner.size {
            return Err(PyValueError::new_err(format!("index ({i}, {j}) out of range")));
        }
        Ok(self.inner.get(i, j))
    }

    fn check_invariants(&self) -> PyResult<()> {
        self.inner.check_invariants().map_err(py_err)
    }

    fn save(&self, dir: PathBuf) -> PyResult<String> {
        let p = hilbert_fc::features::write_matrix(&self.inner, &dir).map_err(py_err)?;
        Ok(p.display().to_string())
    }

    #[staticmethod]
    fn load(csv: PathBuf) -> PyResult<Self> {
        Ok(CorrelationMatrix {
            inner: hilbert_fc::features::read_matrix(&csv).map_err(py_err)?,
        })
    }
}

#[pyclass(module = "hilbert_fc_py")]
struct Volume {
    inner: hilbert_fc::volume::Volume4D,
}

#[pymethods]
impl Volume {
    #[new]
    fn new(dims: [usize; 4], voxel_mm: [f64; 3], tr_seconds: f64, data: Vec<f64>) -> PyResult<Self> {
        Ok(Volume {
            inner: hilbert_fc::volume::Volume4D::new(dims, voxel_mm, tr_seconds, data).map_err(py_err)?,
        })
    }

    #[staticmethod]
    fn read(path: PathBuf) -> PyResult<Self> {
        Ok(Volume {
            inner: hilbert_fc::volume::read_volume(&path).map_err(py_err)?,
        })
    }

    fn write_nifti(&self, path: PathBuf) -> PyResult<()> {
        hilbert_fc::volume::write_nifti(&self.inner, &path).map_err(py_err)
    }

    #[getter]
    fn dims(&self) -> [usize; 4] {
        self.inner.dims()
    }

    #[getter]
    fn tr_seconds(&self) -> f64 {
        self.inner.tr_seconds()
    }

    #[getter]
    fn data(&self) -> Vec<f64> {
        self.inner.data().to_vec()
    }

    /// Per-voxel mean over frames.
    fn time_average(&self) -> Vec<f64> {
        hilbert_fc::preprocess::time_average(&self.inner).data().to_vec()
    }

    fn smooth(&self, fwhm_mm: f64) -> PyResult<Volume> {
        Ok(Volume {
            inner: hilbert_fc::preprocess::gaussian_smooth(&self.inner, fwhm_mm).map_err(py_err)?,
        })
    }
}

#[pyclass(module = "hilbert_fc_py")]
struct Model {
    inner: hilbert_fc::nn::Model<f64>,
}

#[pymethods]
impl Model {
    #[new]
    #[pyo3(signature = (arch_name, side = 90, seed = 0))]
    fn new(arch_name: &str, side: usize, seed: u64) -> PyResult<Self> {
        Ok(Model {
            inner: hilbert_fc::nn::Model::new(arch(arch_name)?, side, seed).map_err(py_err)?,
        })
    }

    #[getter]
    fn core_params(&self) -> usize {
        self.inner.param_count_core()
    }

    #[getter]
    fn head_params(&self) -> usize {
        self.inner.param_count_head()
    }

    fn layer_param_counts(&self) -> Vec<(String, usize)> {
        self.inner.layer_param_counts()
    }

    fn spatial_trace(&self) -> Vec<usize> {
        self.inner.spatial_trace()
    }

    /// Logits for a row-major `side * side` input.
    fn forward(&mut self, values: Vec<f64>) -> PyResult<Vec<f64>> {
        let [c, h, w] = self.inner.input_shape();
        let x = Tensor::new([c, h, w], values).map_err(py_err)?;
        self.inner.forward(&x).map_err(py_err)
    }
}

/// Pearson correlation of two equal-length arrays.
#[pyfunction]
fn pearson_spatial(v: Vec<f64>, w: Vec<f64>) -> PyResult<f64> {
    hilbert_fc::features::pearson_spatial(&v, &w)
        .map(|p| p.value)
        .map_err(py_err)
}

#[pyfunction]
fn slice_shift_seconds(n_slices: usize, k: usize, tr_seconds: f64) -> f64 {
    hilbert_fc::preprocess::slice_shift_seconds(n_slices, k, tr_seconds)
}

#[pyfunction]
fn fwhm_to_sigma(fwhm: f64) -> f64 {
    hilbert_fc::preprocess::fwhm_to_sigma(fwhm)
}

/// Synthetic matrices for `classes` (labels such as "CN", "AD").
#[pyfunction]
#[pyo3(signature = (per_class = 100, separation = 1.0, regions = 90, half_length = 50, seed = 0, classes = vec!["CN".to_string(), "AD".to_string()]))]
fn gen_cohort_matrices(
    per_class: usize,
    separation: f64,
    regions: usize,
    half_length: usize,
    seed: u64,
    classes: Vec<String>,
) -> PyResult<Vec<CorrelationMatrix>> {
    let classes = classes
        .iter()
        .map(|c| c.parse::<ClassLabel>())
        .collect::<Result<Vec<_>, _>>()
        .map_err(py_err)?;
    let spec = hilbert_fc::synth::SynthSpec {
        n_per_class: per_class,
        classes,
        r_regions: regions,
        half_length,
        separation,
        seed,
        ..Default::default()
    };
    Ok(hilbert_fc::synth::gen_cohort_matrices(&spec)
        .map_err(py_err)?
        .into_iter()
        .map(|inner| CorrelationMatrix { inner })
        .collect())
}

/// Repeated split/train/evaluate. Returns mean and population std of the
/// accuracy, sensitivity and specificity in percent, plus per-rep accuracies.
#[pyfunction]
#[pyo3(signature = (matrices, arch_name = "net4", reps = 30, epochs = 200, lr = 1e-4, batch = 4, seed = 0, pair = "CN-AD", f32 = false, shuffle_labels = false))]
#[allow(clippy::too_many_arguments)]
fn run_experiment(
    py: Python<'_>,
    matrices: Vec<CorrelationMatrix>,
    arch_name: &str,
    reps: usize,
    epochs: usize,
    lr: f64,
    batch: usize,
    seed: u64,
    pair: &str,
    f32: bool,
    shuffle_labels: bool,
) -> PyResult<Vec<(String, f64, f64)>> {
    let cfg = ExperimentConfig {
        arch: arch(arch_name)?,
        half_length: matrices.first().and_then(|m| m.inner.half_length),
        repetitions: reps,
        train: TrainConfig {
            epochs,
            batch_size: batch,
            lr,
            seed: 0,
        },
        pair: pair.parse::<ClassPair>().map_err(py_err)?,
        precision: if f32 { Precision::F32 } else { Precision::F64 },
        shuffle_labels,
        ..Default::default()
    };
    let data: Vec<_> = matrices.into_iter().map(|m| m.inner).collect();
    let report = py
        .detach(|| hilbert_fc::experiments::run_experiment(&data, &cfg, seed))
        .map_err(py_err)?;
    let a = &report.aggregate;
    let mut out = vec![
        ("acc".to_string(), a.acc.mean, a.acc.std),
        ("se".to_string(), a.se.mean, a.se.std),
        ("sp".to_string(), a.sp.mean, a.sp.std),
    ];
    out.extend(
        report
            .reps
            .iter()
            .map(|r| (format!("rep{}", r.rep), 100.0 * r.counts.accuracy(), 0.0)),
    );
    Ok(out)
}

/// Runs the command-line tool with `args` (without the program name) and
/// returns its exit code.
#[pyfunction]
fn cli(py: Python<'_>, args: Vec<String>) -> i32 {
    let argv: Vec<String> = std::iter::once("hilbert-fc".to_string()).chain(args).collect();
    py.detach(|| hilbert_fc::cli::run(argv))
}

#[pymodule]
fn hilbert_fc_py(m: &Bound<'_, PyModule>) -> PyResult<()> {
    m.add_class::<HilbertCurve>()?;
    m.add_class::<CorrelationMatrix>()?;
    m.add_class::<Volume>()?;
    m.add_class::<Model>()?;
    m.add_function(wrap_pyfunction!(pearson_spatial, m)?)?;
    m.add_function(wrap_pyfunction!(slice_shift_seconds, m)?)?;
    m.add_function(wrap_pyfunction!(fwhm_to_sigma, m)?)?;
    m.add_function(wrap_pyfunction!(gen_cohort_matrices, m)?)?;
    m.add_function(wrap_pyfunction!(run_experiment, m)?)?;
    m.add_function(wrap_pyfunction!(cli, m)?)?;
    Ok(())
}
