use pyo3::exceptions::{PyArithmeticError, PyValueError};
use pyo3::prelude::*;
use pyo3::types::PyDict;

use livfuse_core::experiment::{class_names, ModelArchive};
use livfuse_core::gbdt::{train_gbdt, GbdtConfig, GbdtModel};
use livfuse_core::image::{self, GrayImage, ImagePreprocConfig};
use livfuse_core::metrics::{evaluate as evaluate_core, MetricsReport};
use livfuse_core::softmax::{train_softmax, SoftmaxConfig, SoftmaxModel};
use livfuse_core::{AlignMode, Error, FeatureMatrix, LabelVector, ModalityOutput, ProbabilityMatrix};

fn to_py(e: Error) -> PyErr {
    match e {
        Error::Numeric(_) => PyArithmeticError::new_err(e.to_string()),
        _ => PyValueError::new_err(e.to_string()),
    }
}

fn matrix(rows: Vec<Vec<f64>>) -> PyResult<FeatureMatrix> {
    FeatureMatrix::from_rows(&rows).map_err(to_py)
}

fn probabilities(rows: Vec<Vec<f64>>) -> PyResult<ProbabilityMatrix> {
    ProbabilityMatrix::from_rows(&rows).map_err(to_py)
}

fn gray(rows: Vec<Vec<u8>>) -> PyResult<GrayImage> {
    let slices: Vec<&[u8]> = rows.iter().map(Vec::as_slice).collect();
    GrayImage::from_rows(&slices).map_err(to_py)
}

/// Fusion weights proportional to the given accuracies.
#[pyfunction]
fn compute_weights(accuracies: Vec<f64>) -> PyResult<Vec<f64>> {
    Ok(livfuse_core::compute_weights(&accuracies).map_err(to_py)?.as_slice().to_vec())
}

/// Fuses per-modality `(ids, probability rows)` pairs. Returns
/// `(ids, fused rows, classes)`.
/// Ids, fused probability rows and predicted classes.
type FusedRows = (Vec<String>, Vec<Vec<f64>>, Vec<usize>);

#[pyfunction]
#[pyo3(signature = (modalities, accuracies, mode = "strict"))]
fn fuse(
    modalities: Vec<(Vec<String>, Vec<Vec<f64>>)>,
    accuracies: Vec<f64>,
    mode: &str,
) -> PyResult<FusedRows> {
    if modalities.len() != accuracies.len() {
        return Err(PyValueError::new_err("one accuracy per modality is required"));
    }
    let mode: AlignMode = mode.parse().map_err(to_py)?;
    let outputs = modalities
        .into_iter()
        .zip(&accuracies)
        .enumerate()
        .map(|(k, ((ids, rows), &a))| ModalityOutput::new(format!("m{k}"), a, ids, probabilities(rows)?).map_err(to_py))
        .collect::<PyResult<Vec<_>>>()?;
    let weights = livfuse_core::compute_weights(&accuracies).map_err(to_py)?;
    let aligned = livfuse_core::align_by_id(&outputs, mode).map_err(to_py)?;
    let h = livfuse_core::fuse(&aligned.outputs, &weights).map_err(to_py)?;
    Ok((h.ids, h.probs.to_rows(), h.classes))
}

/// Argmax per row, ties to the lowest class index.
#[pyfunction]
fn predict_class(rows: Vec<Vec<f64>>) -> PyResult<Vec<usize>> {
    Ok(livfuse_core::predict_class(&probabilities(rows)?))
}

#[pyclass(name = "MetricsReport", frozen, module = "livfuse")]
struct PyMetrics(MetricsReport);

#[pymethods]
impl PyMetrics {
    #[getter]
    fn accuracy(&self) -> f64 {
        self.0.accuracy
    }

    #[getter]
    fn precision(&self) -> Vec<f64> {
        self.0.per_class.iter().map(|m| m.precision).collect()
    }

    #[getter]
    fn recall(&self) -> Vec<f64> {
        self.0.per_class.iter().map(|m| m.recall).collect()
    }

    #[getter]
    fn f1(&self) -> Vec<f64> {
        self.0.per_class.iter().map(|m| m.f1).collect()
    }

    #[getter]
    fn confusion(&self) -> Vec<Vec<u64>> {
        self.0.confusion.clone()
    }

    fn to_json(&self) -> PyResult<String> {
        serde_json::to_string(&self.0).map_err(|e| PyValueError::new_err(e.to_string()))
    }

    fn __repr__(&self) -> String {
        format!("MetricsReport(accuracy={}, classes={})", self.0.accuracy, self.0.n_classes())
    }
}

#[pyfunction]
fn evaluate(y_true: Vec<usize>, y_pred: Vec<usize>, n_classes: usize) -> PyResult<PyMetrics> {
    Ok(PyMetrics(evaluate_core(&y_true, &y_pred, n_classes).map_err(to_py)?))
}

/// Normalized symmetric co-occurrence matrix of an 8-bit image.
#[pyfunction]
fn glcm(pixels: Vec<Vec<u8>>, offset: (i32, i32), levels: usize) -> PyResult<Vec<Vec<f64>>> {
    let m = image::glcm(&gray(pixels)?, offset, levels).map_err(to_py)?;
    Ok(m.values().chunks(levels).map(<[f64]>::to_vec).collect())
}

/// Contrast, correlation, energy, homogeneity and entropy of a GLCM.
#[pyfunction]
fn haralick<'py>(py: Python<'py>, matrix: Vec<Vec<f64>>) -> PyResult<Bound<'py, PyDict>> {
    let levels = matrix.len();
    let m = image::Glcm::from_values(levels, matrix.concat()).map_err(to_py)?;
    let h = image::haralick(&m).map_err(to_py)?;
    let d = PyDict::new(py);
    d.set_item("contrast", h.contrast)?;
    d.set_item("correlation", h.correlation)?;
    d.set_item("energy", h.energy)?;
    d.set_item("homogeneity", h.homogeneity)?;
    d.set_item("entropy", h.entropy)?;
    Ok(d)
}

/// Decodes binary PGM bytes into rows of integer pixel values.
#[pyfunction]
fn load_pgm(data: &[u8]) -> PyResult<Vec<Vec<u16>>> {
    let img = image::load_pgm(data).map_err(to_py)?;
    Ok(img.pixels().chunks(img.width()).map(|r| r.iter().map(|&p| u16::from(p)).collect()).collect())
}

/// Texture feature vector of an image under the default preprocessing,
/// optionally with a different target size and gray-level count.
#[pyfunction]
#[pyo3(signature = (pixels, target = None, gray_levels = None))]
fn extract_features(pixels: Vec<Vec<u8>>, target: Option<(usize, usize)>, gray_levels: Option<usize>) -> PyResult<Vec<f64>> {
    let mut cfg = ImagePreprocConfig::default();
    if let Some((h, w)) = target {
        cfg.target_height = h;
        cfg.target_width = w;
    }
    if let Some(g) = gray_levels {
        cfg.gray_levels = g;
    }
    image::extract_features(&gray(pixels)?, &cfg).map_err(to_py)
}

/// Paired synthetic dataset as a dict of ids, labels and both feature blocks.
#[pyfunction]
fn generate_synthetic<'py>(py: Python<'py>, n: usize, noise: f64, seed: u64) -> PyResult<Bound<'py, PyDict>> {
    let data = livfuse_core::experiment::generate_synthetic(n, noise, seed).map_err(to_py)?;
    let rows = |m: &FeatureMatrix| m.rows().map(<[f64]>::to_vec).collect::<Vec<_>>();
    let d = PyDict::new(py);
    d.set_item("ids", data.ids.clone())?;
    d.set_item("labels", data.labels.clone())?;
    d.set_item("tabular", rows(&data.tabular))?;
    d.set_item("tabular_names", data.tabular.names().to_vec())?;
    d.set_item("image", rows(&data.image))?;
    d.set_item("image_names", data.image.names().to_vec())?;
    Ok(d)
}

#[pyclass(name = "GbdtModel", frozen, module = "livfuse")]
struct PyGbdt(GbdtModel);

#[pymethods]
impl PyGbdt {
    #[staticmethod]
    #[pyo3(signature = (x, y, n_classes = 3, rounds = 200, learning_rate = 0.1, max_depth = 6, l2_leaf = 1.0, seed = 0))]
    #[allow(clippy::too_many_arguments)]
    fn train(
        x: Vec<Vec<f64>>,
        y: Vec<usize>,
        n_classes: usize,
        rounds: usize,
        learning_rate: f64,
        max_depth: usize,
        l2_leaf: f64,
        seed: u64,
    ) -> PyResult<Self> {
        let cfg = GbdtConfig { rounds, learning_rate, max_depth, l2_leaf, n_classes, seed, ..Default::default() };
        let y = LabelVector::new(y, n_classes).map_err(to_py)?;
        Ok(Self(train_gbdt(&matrix(x)?, &y, &cfg).map_err(to_py)?))
    }

    fn predict_proba(&self, x: Vec<Vec<f64>>) -> PyResult<Vec<Vec<f64>>> {
        Ok(self.0.predict_proba(&matrix(x)?).map_err(to_py)?.to_rows())
    }

    #[getter]
    fn loss_history(&self) -> Vec<f64> {
        self.0.loss_history().to_vec()
    }

    fn to_json(&self) -> PyResult<String> {
        serde_json::to_string(&self.0).map_err(|e| PyValueError::new_err(e.to_string()))
    }

    #[staticmethod]
    fn from_json(text: &str) -> PyResult<Self> {
        let m: GbdtModel = serde_json::from_str(text).map_err(|e| PyValueError::new_err(e.to_string()))?;
        m.validate().map_err(to_py)?;
        Ok(Self(m))
    }
}

#[pyclass(name = "SoftmaxModel", frozen, module = "livfuse")]
struct PySoftmax(SoftmaxModel);

#[pymethods]
impl PySoftmax {
    #[staticmethod]
    #[pyo3(signature = (x, y, n_classes = 3, epochs = 300, batch_size = 32, learning_rate = 0.1, l2 = 1e-4, seed = 0))]
    #[allow(clippy::too_many_arguments)]
    fn train(
        x: Vec<Vec<f64>>,
        y: Vec<usize>,
        n_classes: usize,
        epochs: usize,
        batch_size: usize,
        learning_rate: f64,
        l2: f64,
        seed: u64,
    ) -> PyResult<Self> {
        let cfg = SoftmaxConfig { epochs, batch_size, learning_rate, l2, n_classes, seed };
        let y = LabelVector::new(y, n_classes).map_err(to_py)?;
        Ok(Self(train_softmax(&matrix(x)?, &y, &cfg).map_err(to_py)?))
    }

    fn predict_proba(&self, x: Vec<Vec<f64>>) -> PyResult<Vec<Vec<f64>>> {
        Ok(self.0.predict_proba(&matrix(x)?).map_err(to_py)?.to_rows())
    }

    #[getter]
    fn loss_history(&self) -> Vec<f64> {
        self.0.loss_history().to_vec()
    }

    fn to_json(&self) -> PyResult<String> {
        serde_json::to_string(&self.0).map_err(|e| PyValueError::new_err(e.to_string()))
    }

    #[staticmethod]
    fn from_json(text: &str) -> PyResult<Self> {
        let m: SoftmaxModel = serde_json::from_str(text).map_err(|e| PyValueError::new_err(e.to_string()))?;
        m.validate().map_err(to_py)?;
        Ok(Self(m))
    }
}

/// A saved model archive as written by the `livfuse` command line tool.
#[pyclass(name = "ModelArchive", frozen, module = "livfuse")]
struct PyArchive(ModelArchive);

#[pymethods]
impl PyArchive {
    #[staticmethod]
    fn load(path: std::path::PathBuf) -> PyResult<Self> {
        Ok(Self(ModelArchive::load(&path).map_err(to_py)?))
    }

    #[getter]
    fn kind(&self) -> &'static str {
        self.0.model.kind()
    }

    #[getter]
    fn validation_accuracy(&self) -> f64 {
        self.0.validation_accuracy
    }

    /// Scores already-encoded feature rows.
    fn predict_proba(&self, x: Vec<Vec<f64>>) -> PyResult<Vec<Vec<f64>>> {
        Ok(self.0.model.predict_proba(&matrix(x)?).map_err(to_py)?.to_rows())
    }
}

#[pymodule]
pub fn livfuse(m: &Bound<'_, PyModule>) -> PyResult<()> {
    m.add_function(wrap_pyfunction!(compute_weights, m)?)?;
    m.add_function(wrap_pyfunction!(fuse, m)?)?;
    m.add_function(wrap_pyfunction!(predict_class, m)?)?;
    m.add_function(wrap_pyfunction!(evaluate, m)?)?;
    m.add_function(wrap_pyfunction!(glcm, m)?)?;
    m.add_function(wrap_pyfunction!(haralick, m)?)?;
    m.add_function(wrap_pyfunction!(load_pgm, m)?)?;
    m.add_function(wrap_pyfunction!(extract_features, m)?)?;
    m.add_function(wrap_pyfunction!(generate_synthetic, m)?)?;
    m.add_class::<PyMetrics>()?;
    m.add_class::<PyGbdt>()?;
    m.add_class::<PySoftmax>()?;
    m.add_class::<PyArchive>()?;
    m.add("CLASS_NAMES", class_names(3))?;
    Ok(())
}
