//! Python bindings: matrices are passed as lists of rows.

use pyo3::exceptions::{PyIndexError, PyValueError};
use pyo3::prelude::*;

use mla_core::kernels::{gemm, trsm_llu};
use mla_core::lu::{flops_lu, lu_unb};
use mla_core::{lu_factor, residual_packed, BlockConfig, CacheConfig, Matrix, PivotVector, Policy, Variant, WorkerPool};

fn value_err(e: mla_core::Error) -> PyErr {
    PyValueError::new_err(e.to_string())
}

/// Dense column-major matrix of floats.
#[pyclass(name = "Matrix", from_py_object)]
#[derive(Clone)]
struct PyMatrix {
    inner: Matrix,
}

#[pymethods]
impl PyMatrix {
    #[new]
    fn new(rows: Vec<Vec<f64>>) -> PyResult<Self> {
        Ok(PyMatrix {
            inner: Matrix::from_rows(&rows).map_err(value_err)?,
        })
    }

    #[staticmethod]
    fn zeros(rows: usize, cols: usize) -> Self {
        PyMatrix {
            inner: Matrix::zeros(rows, cols),
        }
    }

    /// Uniform (0, 1) entries from a seeded ChaCha8 stream.
    #[staticmethod]
    #[pyo3(signature = (rows, cols, seed=1))]
    fn random(rows: usize, cols: usize, seed: u64) -> Self {
        PyMatrix {
            inner: Matrix::random(rows, cols, seed),
        }
    }

    #[getter]
    fn shape(&self) -> (usize, usize) {
        (self.inner.rows(), self.inner.cols())
    }

    fn get(&self, i: usize, j: usize) -> PyResult<f64> {
        if i >= self.inner.rows() || j >= self.inner.cols() {
            return Err(PyIndexError::new_err(format!("({i}, {j}) out of range")));
        }
        Ok(self.inner.get(i, j))
    }

    fn to_rows(&self) -> Vec<Vec<f64>> {
        self.inner.to_rows()
    }

    fn frobenius_norm(&self) -> f64 {
        mla_core::frobenius_norm(self.inner.as_ref())
    }

    fn __repr__(&self) -> String {
        format!("Matrix({}x{})", self.inner.rows(), self.inner.cols())
    }
}

/// Factors `a` and returns `(factors, ipiv, et_events, zero_pivot)`.
#[pyfunction]
#[pyo3(signature = (a, algo="lu", b_outer=256, b_inner=32, threads=1, t_pf=1, q=4))]
#[allow(clippy::too_many_arguments)]
fn lu(
    py: Python<'_>,
    a: &PyMatrix,
    algo: &str,
    b_outer: usize,
    b_inner: usize,
    threads: usize,
    t_pf: usize,
    q: usize,
) -> PyResult<(PyMatrix, Vec<usize>, usize, Option<usize>)> {
    let variant: Variant = algo.parse().map_err(value_err)?;
    let block = BlockConfig::new(b_outer, b_inner).map_err(value_err)?;
    let policy = Policy::new(variant, block).with_t_pf(t_pf).with_q(q);
    let pool = WorkerPool::new(threads).map_err(value_err)?;
    let mut f = a.inner.clone();
    let r = py
        .detach(|| lu_factor(f.as_mut(), &policy, &pool, None))
        .map_err(value_err)?;
    Ok((PyMatrix { inner: f }, r.ipiv.as_slice().to_vec(), r.et_events, r.zero_pivot))
}

/// Unblocked LU; returns `(factors, ipiv)`.
#[pyfunction]
fn lu_unblocked(a: &PyMatrix) -> PyResult<(PyMatrix, Vec<usize>)> {
    let mut f = a.inner.clone();
    let r = lu_unb(f.as_mut()).map_err(value_err)?;
    Ok((PyMatrix { inner: f }, r.ipiv.as_slice().to_vec()))
}

/// `||P A - L U||_F / ||A||_F` for factors stored in place.
#[pyfunction]
fn residual(a: &PyMatrix, factors: &PyMatrix, ipiv: Vec<usize>) -> PyResult<f64> {
    let piv = PivotVector::from_indices(ipiv, 0).map_err(value_err)?;
    residual_packed(a.inner.as_ref(), factors.inner.as_ref(), &piv).map_err(value_err)
}

/// Returns `alpha*C + beta*A*B`.
#[pyfunction]
#[pyo3(signature = (c, a, b, alpha=1.0, beta=1.0))]
fn gemm_update(c: &PyMatrix, a: &PyMatrix, b: &PyMatrix, alpha: f64, beta: f64) -> PyResult<PyMatrix> {
    let mut out = c.inner.clone();
    gemm(out.as_mut(), a.inner.as_ref(), b.inner.as_ref(), alpha, beta, &CacheConfig::default()).map_err(value_err)?;
    Ok(PyMatrix { inner: out })
}

/// Returns `trilu(L)^{-1} B`.
#[pyfunction]
fn trsm(l: &PyMatrix, b: &PyMatrix) -> PyResult<PyMatrix> {
    let mut out = b.inner.clone();
    trsm_llu(l.inner.as_ref(), out.as_mut()).map_err(value_err)?;
    Ok(PyMatrix { inner: out })
}

#[pyfunction(name = "flops_lu")]
fn py_flops_lu(m: usize, n: usize) -> f64 {
    flops_lu(m, n)
}

#[pymodule]
fn mla(m: &Bound<'_, PyModule>) -> PyResult<()> {
    m.add_class::<PyMatrix>()?;
    m.add_function(wrap_pyfunction!(lu, m)?)?;
    m.add_function(wrap_pyfunction!(lu_unblocked, m)?)?;
    m.add_function(wrap_pyfunction!(residual, m)?)?;
    m.add_function(wrap_pyfunction!(gemm_update, m)?)?;
    m.add_function(wrap_pyfunction!(trsm, m)?)?;
    m.add_function(wrap_pyfunction!(py_flops_lu, m)?)?;
    m.add("VARIANTS", Variant::ALL.iter().map(|v| v.name()).collect::<Vec<_>>())?;
    Ok(())
}
