//! Python bindings: simulate the built-in designs, fit the three-step
//! estimator, run the two-stage structure identification and full Monte
//! Carlo studies from Python.

use pyo3::exceptions::PyValueError;
use pyo3::prelude::*;
use pyo3::types::PyDict;

use vcam_core::estimation::{fit_three_step, select_by_bic, EstimationConfig};
use vcam_core::identification::{identify, PenaltyConfig};
use vcam_core::numerics::RngStream;
use vcam_core::simulation::{run_monte_carlo, Example, FitCounts, ScenarioSpec};
use vcam_core::{io, IdentificationResult, TimeSeriesDataset, VcamFit};

fn err(e: vcam_core::Error) -> PyErr {
    PyValueError::new_err(e.to_string())
}

fn example_from_str(name: &str) -> PyResult<Example> {
    match name {
        "ex1" => Ok(Example::One),
        "ex2" => Ok(Example::Two),
        _ => Err(PyValueError::new_err(format!(
            "unknown example `{name}` (expected ex1 or ex2)"
        ))),
    }
}

/// An observed sample: response series plus covariate columns.
#[pyclass(name = "Dataset", skip_from_py_object)]
#[derive(Clone)]
struct PyDataset {
    inner: TimeSeriesDataset,
}

#[pymethods]
impl PyDataset {
    #[new]
    fn new(y: Vec<f64>, x: Vec<Vec<f64>>) -> PyResult<Self> {
        Ok(Self {
            inner: TimeSeriesDataset::new(y, x).map_err(err)?,
        })
    }

    #[staticmethod]
    fn from_csv(text: &str) -> PyResult<Self> {
        Ok(Self {
            inner: io::dataset_from_csv(text).map_err(err)?,
        })
    }

    fn to_csv(&self) -> String {
        io::dataset_to_csv(&self.inner)
    }

    fn __len__(&self) -> usize {
        self.inner.len()
    }

    #[getter]
    fn covariate_count(&self) -> usize {
        self.inner.covariate_count()
    }

    fn covariate_range(&self, k: usize) -> PyResult<(f64, f64)> {
        if k >= self.inner.covariate_count() {
            return Err(PyValueError::new_err(format!("no covariate {k}")));
        }
        Ok(self.inner.covariate_range(k))
    }

    #[getter]
    fn y(&self) -> Vec<f64> {
        self.inner.y.iter().cloned().collect()
    }
}

/// A fitted model: normalized coefficient curves and additive functions.
#[pyclass(name = "Fit", skip_from_py_object)]
#[derive(Clone)]
struct PyFit {
    inner: VcamFit,
}

#[pymethods]
impl PyFit {
    #[getter]
    fn rss(&self) -> f64 {
        self.inner.diagnostics.rss
    }

    #[getter]
    fn segment_length(&self) -> usize {
        self.inner.diagnostics.segment_length
    }

    #[getter]
    fn interior_knots(&self) -> usize {
        self.inner.diagnostics.interior_knots
    }

    #[getter]
    fn covariate_count(&self) -> usize {
        self.inner.covariate_count()
    }

    /// Regression surface at rescaled time `u` and covariate vector `x`.
    fn evaluate(&self, u: f64, x: Vec<f64>) -> PyResult<f64> {
        self.inner.evaluate(u, &x).map_err(err)
    }

    /// `(x, value)` pairs for coefficient curve `k` (0 is the intercept).
    #[pyo3(signature = (k, points=201))]
    fn alpha_grid(&self, k: usize, points: usize) -> PyResult<Vec<(f64, f64)>> {
        self.inner
            .alpha
            .get(k)
            .ok_or_else(|| PyValueError::new_err(format!("no coefficient curve {k}")))?
            .grid(points)
            .map_err(err)
    }

    /// `(x, value)` pairs for additive function `k` (1-based).
    #[pyo3(signature = (k, points=201))]
    fn beta_grid(&self, k: usize, points: usize) -> PyResult<Vec<(f64, f64)>> {
        if k == 0 {
            return Err(PyValueError::new_err("additive functions are 1-based"));
        }
        self.inner
            .beta
            .get(k - 1)
            .ok_or_else(|| PyValueError::new_err(format!("no additive function {k}")))?
            .grid(points)
            .map_err(err)
    }

    fn to_text(&self) -> String {
        io::fit_to_text(&self.inner)
    }

    #[staticmethod]
    fn from_text(text: &str) -> PyResult<Self> {
        Ok(Self {
            inner: io::fit_from_text(text).map_err(err)?,
        })
    }
}

/// Structure identification outcome: which coefficient curves are constant
/// and which additive functions are linear.
#[pyclass(name = "Identification")]
struct PyIdentification {
    inner: IdentificationResult,
}

#[pymethods]
impl PyIdentification {
    #[getter]
    fn alpha_constant(&self) -> Vec<bool> {
        self.inner.alpha_constant.clone()
    }

    #[getter]
    fn beta_linear(&self) -> Vec<bool> {
        self.inner.beta_linear.clone()
    }

    #[getter(lambda_)]
    fn lambda_(&self) -> f64 {
        self.inner.lambda
    }

    #[getter]
    fn mu(&self) -> f64 {
        self.inner.mu
    }

    #[getter]
    fn d1(&self) -> usize {
        self.inner.d1
    }

    #[getter]
    fn d2(&self) -> usize {
        self.inner.d2
    }

    #[getter]
    fn converged(&self) -> bool {
        self.inner.stage1_converged && self.inner.stage2_converged
    }
}

/// Draw one dataset from a built-in simulation design.
#[pyfunction]
#[pyo3(signature = (example, t, seed=0, stream=1))]
fn simulate(example: &str, t: usize, seed: u64, stream: u64) -> PyResult<PyDataset> {
    let mut rng = RngStream::new(seed, stream);
    let (data, _truth) = example_from_str(example)?
        .generate(t, &mut rng)
        .map_err(err)?;
    Ok(PyDataset { inner: data })
}

#[allow(clippy::too_many_arguments)]
fn estimation_config(
    order_step1: Option<usize>,
    order_step2: Option<usize>,
    order_step3: Option<usize>,
    k_grid: Option<Vec<usize>>,
    i_grid: Option<Vec<usize>>,
    anchor: Option<f64>,
    extra_rounds: Option<usize>,
) -> EstimationConfig {
    let mut cfg = EstimationConfig::default();
    if let Some(v) = order_step1 {
        cfg.order_step1 = v;
    }
    if let Some(v) = order_step2 {
        cfg.order_step2 = v;
    }
    if let Some(v) = order_step3 {
        cfg.order_step3 = v;
    }
    if let Some(v) = k_grid {
        cfg.k_grid = v;
    }
    if let Some(v) = i_grid {
        cfg.i_grid = v;
    }
    if let Some(v) = anchor {
        cfg.anchor = v;
    }
    if let Some(v) = extra_rounds {
        cfg.extra_rounds = v;
    }
    cfg
}

/// Three-step estimator; `i`/`k` fix the segment length and knot count,
/// otherwise BIC selects both from the grids.
#[pyfunction]
#[pyo3(signature = (dataset, i=None, k=None, order_step1=None, order_step2=None,
                    order_step3=None, k_grid=None, i_grid=None, anchor=None,
                    extra_rounds=None))]
#[allow(clippy::too_many_arguments)]
fn fit(
    dataset: &PyDataset,
    i: Option<usize>,
    k: Option<usize>,
    order_step1: Option<usize>,
    order_step2: Option<usize>,
    order_step3: Option<usize>,
    k_grid: Option<Vec<usize>>,
    i_grid: Option<Vec<usize>>,
    anchor: Option<f64>,
    extra_rounds: Option<usize>,
) -> PyResult<PyFit> {
    let cfg = estimation_config(
        order_step1,
        order_step2,
        order_step3,
        k_grid,
        i_grid,
        anchor,
        extra_rounds,
    );
    let inner = match (i, k) {
        (Some(i), Some(k)) => fit_three_step(&dataset.inner, &cfg, i, k).map_err(err)?,
        (None, None) => select_by_bic(&dataset.inner, &cfg).map_err(err)?.2,
        _ => {
            return Err(PyValueError::new_err(
                "i and k must be given together",
            ))
        }
    };
    Ok(PyFit { inner })
}

/// Two-stage penalized structure identification on a completed fit.
#[pyfunction]
#[pyo3(signature = (dataset, fitted, lambda_grid=None, mu_grid=None, scad_a=None,
                    zero_threshold=None, max_iter=None, penalty_scale=None))]
#[allow(clippy::too_many_arguments)]
fn identify_structure(
    dataset: &PyDataset,
    fitted: &PyFit,
    lambda_grid: Option<Vec<f64>>,
    mu_grid: Option<Vec<f64>>,
    scad_a: Option<f64>,
    zero_threshold: Option<f64>,
    max_iter: Option<usize>,
    penalty_scale: Option<f64>,
) -> PyResult<PyIdentification> {
    let mut cfg = PenaltyConfig::default();
    if let Some(v) = lambda_grid {
        cfg.lambda_grid = v;
    }
    if let Some(v) = mu_grid {
        cfg.mu_grid = v;
    }
    if let Some(v) = scad_a {
        cfg.a = v;
    }
    if let Some(v) = zero_threshold {
        cfg.zero_threshold = v;
    }
    if let Some(v) = max_iter {
        cfg.max_iter = v;
    }
    if let Some(v) = penalty_scale {
        cfg.penalty_scale = Some(v);
    }
    let order_step2 = fitted.inner.alpha[0].basis.order();
    let order_step3 = fitted
        .inner
        .beta
        .first()
        .map(|b| b.basis.order())
        .unwrap_or(order_step2);
    let inner = identify(&dataset.inner, &fitted.inner, order_step2, order_step3, &cfg)
        .map_err(err)?;
    Ok(PyIdentification { inner })
}

fn counts_tuple(c: Option<FitCounts>) -> Option<(usize, usize, usize)> {
    c.map(|c| (c.correct, c.over, c.under))
}

/// Monte Carlo study over a built-in design; returns a result dictionary
/// including the machine-readable CSV report.
#[pyfunction]
#[pyo3(signature = (example, t=None, q=None, seed=None, fixed_i=None, fixed_k=None,
                    identification=None, comparisons=None))]
#[allow(clippy::too_many_arguments)]
fn monte_carlo<'py>(
    py: Python<'py>,
    example: &str,
    t: Option<usize>,
    q: Option<usize>,
    seed: Option<u64>,
    fixed_i: Option<usize>,
    fixed_k: Option<usize>,
    identification: Option<bool>,
    comparisons: Option<bool>,
) -> PyResult<Bound<'py, PyDict>> {
    example_from_str(example)?;
    let mut spec = match example {
        "ex1" => ScenarioSpec::example1(300, 100, 0),
        _ => ScenarioSpec::example2_identification(900, 100, 0),
    };
    if let Some(v) = t {
        spec.t = v;
    }
    if let Some(v) = q {
        spec.replications = v;
    }
    if let Some(v) = seed {
        spec.base_seed = v;
    }
    match (fixed_i, fixed_k) {
        (None, None) => {}
        (Some(0), Some(0)) => spec.fixed_i_k = None,
        (Some(i), Some(k)) => spec.fixed_i_k = Some((i, k)),
        _ => {
            return Err(PyValueError::new_err(
                "fixed_i and fixed_k must be given together (both 0 selects by BIC)",
            ))
        }
    }
    if let Some(v) = identification {
        spec.run_identification = v;
    }
    if let Some(v) = comparisons {
        spec.run_comparisons = v;
    }

    let report = run_monte_carlo(&spec).map_err(err)?;
    let out = PyDict::new(py);
    out.set_item("t", report.t)?;
    out.set_item("replications", report.replications)?;
    out.set_item("completed", report.completed)?;
    out.set_item("function_names", &report.function_names)?;
    out.set_item(
        "three_step_mean",
        report.three_step.iter().map(|s| s.mean).collect::<Vec<_>>(),
    )?;
    out.set_item(
        "three_step_sd",
        report.three_step.iter().map(|s| s.sd).collect::<Vec<_>>(),
    )?;
    out.set_item(
        "oracle_mean",
        report
            .oracle
            .iter()
            .map(|s| s.map(|v| v.mean))
            .collect::<Vec<_>>(),
    )?;
    out.set_item("additive_terms", counts_tuple(report.additive_terms))?;
    out.set_item("varying_terms", counts_tuple(report.varying_terms))?;
    out.set_item("true_model", counts_tuple(report.true_model))?;
    out.set_item("chosen_lambda", &report.chosen_lambda)?;
    out.set_item("chosen_mu", &report.chosen_mu)?;
    out.set_item("csv", io::mc_report_to_csv(&report))?;
    Ok(out)
}

#[pymodule]
fn vcam_py(m: &Bound<'_, PyModule>) -> PyResult<()> {
    m.add_class::<PyDataset>()?;
    m.add_class::<PyFit>()?;
    m.add_class::<PyIdentification>()?;
    m.add_function(wrap_pyfunction!(simulate, m)?)?;
    m.add_function(wrap_pyfunction!(fit, m)?)?;
    m.add_function(wrap_pyfunction!(identify_structure, m)?)?;
    m.add_function(wrap_pyfunction!(monte_carlo, m)?)?;
    Ok(())
}
