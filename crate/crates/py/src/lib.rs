//! Python bindings. Dense matrices cross the boundary as lists of rows.
//!
//! User-supplied operator closures are not exposed; specs are built from the
//! standard operation names.

use pyo3::exceptions::{PyIOError, PyMemoryError, PyValueError};
use pyo3::prelude::*;
use pyo3::types::PyDict;

use fusedmm::io::{self, RmatParams};
use fusedmm::perf::{self, PerfEstimate};
use fusedmm::{
    apps, kernel, reference, ConfigError, DenseMatrix, KernelError, MatrixError, ReferenceError,
    StandardOp,
};

fn value_err(e: impl std::fmt::Display) -> PyErr {
    PyValueError::new_err(e.to_string())
}

fn reference_err(e: ReferenceError) -> PyErr {
    match e {
        ReferenceError::Allocation { .. } => PyMemoryError::new_err(e.to_string()),
        e => value_err(e),
    }
}

fn kernel_err(e: KernelError) -> PyErr {
    value_err(e)
}

fn dense(rows: Vec<Vec<f64>>, dim_hint: usize) -> PyResult<DenseMatrix<f64>> {
    if rows.is_empty() {
        return Ok(DenseMatrix::zeros(0, dim_hint));
    }
    DenseMatrix::from_rows(&rows).map_err(|e: MatrixError| value_err(e))
}

fn rows(z: &DenseMatrix<f64>) -> Vec<Vec<f64>> {
    z.to_rows()
}

/// Sparse matrix in CSR form with `float64` values.
#[pyclass(name = "CsrMatrix", module = "fusedmm_py", frozen)]
struct PyCsr {
    inner: fusedmm::CsrMatrix<f64>,
}

#[pymethods]
impl PyCsr {
    #[new]
    fn new(
        nrows: usize,
        ncols: usize,
        row_ptr: Vec<usize>,
        col_idx: Vec<u64>,
        values: Vec<f64>,
    ) -> PyResult<Self> {
        let inner =
            fusedmm::CsrMatrix::new(nrows, ncols, row_ptr, col_idx, values).map_err(value_err)?;
        Ok(Self { inner })
    }

    /// Duplicate entries are summed.
    #[staticmethod]
    fn from_coo(entries: Vec<(usize, usize, f64)>, nrows: usize, ncols: usize) -> PyResult<Self> {
        let inner = fusedmm::CsrMatrix::from_coo(&entries, nrows, ncols).map_err(value_err)?;
        Ok(Self { inner })
    }

    #[getter]
    fn nrows(&self) -> usize {
        self.inner.nrows()
    }

    #[getter]
    fn ncols(&self) -> usize {
        self.inner.ncols()
    }

    #[getter]
    fn nnz(&self) -> usize {
        self.inner.nnz()
    }

    #[getter]
    fn row_ptr(&self) -> Vec<usize> {
        self.inner.row_ptr().to_vec()
    }

    #[getter]
    fn col_idx(&self) -> Vec<u64> {
        self.inner.col_idx().to_vec()
    }

    #[getter]
    fn values(&self) -> Vec<f64> {
        self.inner.values().to_vec()
    }

    fn to_coo(&self) -> Vec<(usize, usize, f64)> {
        self.inner.to_coo()
    }

    fn sorted(&self) -> Self {
        Self {
            inner: self.inner.sorted(),
        }
    }

    fn stats<'py>(&self, py: Python<'py>) -> PyResult<Bound<'py, PyDict>> {
        let s = self.inner.stats();
        let d = PyDict::new(py);
        d.set_item("nrows", s.nrows)?;
        d.set_item("ncols", s.ncols)?;
        d.set_item("nnz", s.nnz)?;
        d.set_item("avg_degree", s.avg_degree)?;
        d.set_item("max_degree", s.max_degree)?;
        Ok(d)
    }

    fn __repr__(&self) -> String {
        format!(
            "CsrMatrix(nrows={}, ncols={}, nnz={})",
            self.inner.nrows(),
            self.inner.ncols(),
            self.inner.nnz()
        )
    }

    fn __eq__(&self, other: &Self) -> bool {
        self.inner == other.inner
    }
}

fn standard_op(name: &str, alpha: Option<f64>) -> PyResult<StandardOp> {
    Ok(match name.to_ascii_uppercase().as_str() {
        "ADD" => StandardOp::Add,
        "MUL" => StandardOp::Mul,
        "SEL2ND" => StandardOp::Sel2nd,
        "SUB" => StandardOp::Sub,
        "SIGMOID" => StandardOp::Sigmoid,
        "SCAL" => StandardOp::Scal(alpha.ok_or_else(|| value_err("SCAL needs alpha"))?),
        "NORM" => StandardOp::Norm,
        "RSUM" => StandardOp::Rsum,
        "RMUL" => StandardOp::Rmul,
        "ASUM" => StandardOp::Asum,
        "AMAX" => StandardOp::Amax,
        "NOOP" => StandardOp::Noop,
        other => return Err(value_err(format!("unknown operation {other:?}"))),
    })
}

/// Five-slot operator spec from standard names, e.g.
/// `OpSpec("MUL", "RSUM", "SIGMOID", "MUL", "ASUM")`.
#[pyclass(name = "OpSpec", module = "fusedmm_py", frozen)]
struct PyOpSpec {
    inner: fusedmm::OpSpec<f64>,
}

#[pymethods]
impl PyOpSpec {
    #[new]
    #[pyo3(signature = (vop, rop, sop, mop, aop, alpha=None))]
    fn new(
        vop: &str,
        rop: &str,
        sop: &str,
        mop: &str,
        aop: &str,
        alpha: Option<f64>,
    ) -> PyResult<Self> {
        let ops = [
            standard_op(vop, alpha)?,
            standard_op(rop, alpha)?,
            standard_op(sop, alpha)?,
            standard_op(mop, alpha)?,
            standard_op(aop, alpha)?,
        ];
        let inner = fusedmm::OpSpec::from_standard(ops).map_err(|e: ConfigError| value_err(e))?;
        Ok(Self { inner })
    }

    /// `sigmoid_embed`, `spmm_gcn`, `fr_layout` or `generic`.
    #[getter]
    fn pattern(&self) -> &'static str {
        match self.inner.pattern() {
            fusedmm::KnownPattern::SigmoidEmbed => "sigmoid_embed",
            fusedmm::KnownPattern::SpmmGcn => "spmm_gcn",
            fusedmm::KnownPattern::FrLayout => "fr_layout",
            fusedmm::KnownPattern::Generic => "generic",
        }
    }

    #[getter]
    fn message_is_scalar(&self) -> bool {
        self.inner.message_is_scalar()
    }

    fn __repr__(&self) -> String {
        format!("OpSpec{:?}", self.inner)
    }
}

#[pyfunction]
#[pyo3(signature = (a, x, y, spec, threads=1))]
fn fused_mm(
    py: Python<'_>,
    a: &PyCsr,
    x: Vec<Vec<f64>>,
    y: Vec<Vec<f64>>,
    spec: &PyOpSpec,
    threads: usize,
) -> PyResult<Vec<Vec<f64>>> {
    let d = y.first().map_or(0, Vec::len);
    let (x, y) = (dense(x, d)?, dense(y, d)?);
    let z = py
        .detach(|| kernel::fused_mm(&a.inner, &x, &y, &spec.inner, threads))
        .map_err(kernel_err)?;
    Ok(rows(&z))
}

/// Staged SDDMM then SpMM, materializing the per-edge messages.
#[pyfunction]
fn unfused(
    a: &PyCsr,
    x: Vec<Vec<f64>>,
    y: Vec<Vec<f64>>,
    spec: &PyOpSpec,
) -> PyResult<Vec<Vec<f64>>> {
    let d = y.first().map_or(0, Vec::len);
    let (x, y) = (dense(x, d)?, dense(y, d)?);
    let z = reference::unfused(&a.inner, &x, &y, &spec.inner).map_err(reference_err)?;
    Ok(rows(&z))
}

#[pyfunction]
fn dense_oracle(
    a: &PyCsr,
    x: Vec<Vec<f64>>,
    y: Vec<Vec<f64>>,
    spec: &PyOpSpec,
) -> PyResult<Vec<Vec<f64>>> {
    let d = y.first().map_or(0, Vec::len);
    let (x, y) = (dense(x, d)?, dense(y, d)?);
    let z = reference::dense_oracle(&a.inner, &x, &y, &spec.inner).map_err(reference_err)?;
    Ok(rows(&z))
}

#[pyfunction]
#[pyo3(signature = (a, x, y, threads=1))]
fn embedding_step(
    a: &PyCsr,
    x: Vec<Vec<f64>>,
    y: Vec<Vec<f64>>,
    threads: usize,
) -> PyResult<Vec<Vec<f64>>> {
    let d = y.first().map_or(0, Vec::len);
    let z = apps::embedding_step(&a.inner, &dense(x, d)?, &dense(y, d)?, threads)
        .map_err(kernel_err)?;
    Ok(rows(&z))
}

#[pyfunction]
#[pyo3(signature = (a, x, y, alpha=1.0, threads=1))]
fn fr_layout_step(
    a: &PyCsr,
    x: Vec<Vec<f64>>,
    y: Vec<Vec<f64>>,
    alpha: f64,
    threads: usize,
) -> PyResult<Vec<Vec<f64>>> {
    let d = y.first().map_or(0, Vec::len);
    let z = apps::fr_layout_step(&a.inner, &dense(x, d)?, &dense(y, d)?, alpha, threads)
        .map_err(kernel_err)?;
    Ok(rows(&z))
}

/// `A @ Y`.
#[pyfunction]
#[pyo3(signature = (a, y, threads=1))]
fn gcn_forward(a: &PyCsr, y: Vec<Vec<f64>>, threads: usize) -> PyResult<Vec<Vec<f64>>> {
    let z = apps::gcn_forward(&a.inner, &dense(y, 0)?, threads).map_err(kernel_err)?;
    Ok(rows(&z))
}

/// Row boundaries of the 1D partition into `threads` parts.
#[pyfunction]
fn part1d(a: &PyCsr, threads: usize) -> PyResult<Vec<usize>> {
    let plan = kernel::part1d(&a.inner, threads).map_err(kernel_err)?;
    Ok(plan.boundaries().to_vec())
}

#[pyfunction]
fn arithmetic_intensity(avg_degree: f64, d: usize) -> PyResult<f64> {
    perf::arithmetic_intensity(avg_degree, d).map_err(value_err)
}

#[pyfunction]
#[pyo3(signature = (m, n, d, nnz, bandwidth_gbps=100.0, peak_gflops=None))]
fn perf_estimate<'py>(
    py: Python<'py>,
    m: u64,
    n: u64,
    d: u64,
    nnz: u64,
    bandwidth_gbps: f64,
    peak_gflops: Option<f64>,
) -> PyResult<Bound<'py, PyDict>> {
    let est = PerfEstimate::new(m, n, d, nnz).map_err(value_err)?;
    let out = PyDict::new(py);
    out.set_item("flops", est.flops)?;
    out.set_item("bytes_moved", est.bytes_moved)?;
    out.set_item("ai_lower_bound", est.ai_lower_bound)?;
    out.set_item("mem_fused_bytes", est.mem_fused_bytes)?;
    out.set_item("mem_unfused_extra_bytes", est.mem_unfused_extra_bytes)?;
    out.set_item(
        "attainable_gflops",
        est.attainable_gflops(bandwidth_gbps, peak_gflops),
    )?;
    Ok(out)
}

#[pyfunction]
#[pyo3(signature = (scale, edge_factor, seed=1, a=0.57, b=0.19, c=0.19, d=0.05))]
fn rmat(
    scale: u32,
    edge_factor: usize,
    seed: u64,
    a: f64,
    b: f64,
    c: f64,
    d: f64,
) -> PyResult<PyCsr> {
    let params = RmatParams::new(scale, edge_factor, seed).with_probs(a, b, c, d);
    let inner = io::rmat_generate(&params).map_err(value_err)?;
    Ok(PyCsr { inner })
}

#[pyfunction]
fn read_matrix_market(path: &str) -> PyResult<PyCsr> {
    let inner = io::read_matrix_market(path).map_err(|e| match e {
        io::MtxError::Io(e) => PyIOError::new_err(e.to_string()),
        e => value_err(e),
    })?;
    Ok(PyCsr { inner })
}

#[pyfunction]
fn write_matrix_market(a: &PyCsr, path: &str) -> PyResult<()> {
    io::write_matrix_market(&a.inner, path).map_err(|e| PyIOError::new_err(e.to_string()))
}

#[pymodule]
pub fn fusedmm_py(m: &Bound<'_, PyModule>) -> PyResult<()> {
    m.add_class::<PyCsr>()?;
    m.add_class::<PyOpSpec>()?;
    m.add_function(wrap_pyfunction!(fused_mm, m)?)?;
    m.add_function(wrap_pyfunction!(unfused, m)?)?;
    m.add_function(wrap_pyfunction!(dense_oracle, m)?)?;
    m.add_function(wrap_pyfunction!(embedding_step, m)?)?;
    m.add_function(wrap_pyfunction!(fr_layout_step, m)?)?;
    m.add_function(wrap_pyfunction!(gcn_forward, m)?)?;
    m.add_function(wrap_pyfunction!(part1d, m)?)?;
    m.add_function(wrap_pyfunction!(arithmetic_intensity, m)?)?;
    m.add_function(wrap_pyfunction!(perf_estimate, m)?)?;
    m.add_function(wrap_pyfunction!(rmat, m)?)?;
    m.add_function(wrap_pyfunction!(read_matrix_market, m)?)?;
    m.add_function(wrap_pyfunction!(write_matrix_market, m)?)?;
    Ok(())
}
