//! Python bindings: materials, benchmark meshes, assembly, the LDLT inertia
//! and the benchmark runner.

use std::path::PathBuf;

use pyo3::exceptions::{PyRuntimeError, PyValueError};
use pyo3::prelude::*;
use pyo3::types::PyDict;

use phasefrac::assembly::{Assembler as CoreAssembler, Mode, State};
use phasefrac::bench::{self, Scale};
use phasefrac::linsolve::{ldlt_factorize, SparseSymmetric};
use phasefrac::mesh::{build_benchmark_mesh, parse_abaqus_inp, write_abaqus_inp, Benchmark, Component, GeometrySpec};
use phasefrac::solvers::{self, SolverKind};

fn value_err(e: impl std::fmt::Display) -> PyErr {
    PyValueError::new_err(e.to_string())
}

fn runtime_err(e: impl std::fmt::Display) -> PyErr {
    PyRuntimeError::new_err(e.to_string())
}

fn to_py_json<'py, T: serde::Serialize>(py: Python<'py>, v: &T) -> PyResult<Bound<'py, PyAny>> {
    let text = serde_json::to_string(v).map_err(runtime_err)?;
    py.import("json")?.call_method1("loads", (text,))
}

fn component(c: &str) -> PyResult<Component> {
    match c {
        "x" | "X" => Ok(Component::X),
        "y" | "Y" => Ok(Component::Y),
        other => Err(value_err(format!("component must be 'x' or 'y', got '{other}'"))),
    }
}

#[pyclass(name = "Material", frozen)]
struct PyMaterial {
    inner: phasefrac::MaterialParams,
}

#[pymethods]
impl PyMaterial {
    #[new]
    #[pyo3(signature = (youngs_modulus, poisson_ratio, gc, l, tol_ir = 0.01))]
    fn new(youngs_modulus: f64, poisson_ratio: f64, gc: f64, l: f64, tol_ir: f64) -> PyResult<Self> {
        let inner = phasefrac::MaterialParams::new(youngs_modulus, poisson_ratio, gc, l, tol_ir).map_err(value_err)?;
        Ok(PyMaterial { inner })
    }

    #[getter]
    fn lame(&self) -> (f64, f64) {
        (self.inner.lambda, self.inner.mu)
    }

    #[getter]
    fn gamma(&self) -> f64 {
        self.inner.gamma
    }

    #[getter]
    fn l(&self) -> f64 {
        self.inner.length
    }

    fn __repr__(&self) -> String {
        let m = &self.inner;
        format!("Material(E={}, nu={}, gc={}, l={}, tol_ir={})", m.youngs_modulus, m.poisson_ratio, m.gc, m.length, m.tol_ir)
    }
}

#[pyclass(name = "Mesh")]
struct PyMesh {
    inner: phasefrac::Mesh,
}

#[pymethods]
impl PyMesh {
    /// Graded, notched mesh of a named benchmark.
    #[staticmethod]
    #[pyo3(signature = (name, l, refinement_ratio = 0.2, coarse_h = None))]
    fn benchmark(name: &str, l: f64, refinement_ratio: f64, coarse_h: Option<f64>) -> PyResult<Self> {
        let b: Benchmark = name.parse().map_err(value_err)?;
        let mut spec = GeometrySpec::new(b, l);
        spec.refinement_ratio = refinement_ratio;
        spec.coarse_h = coarse_h;
        let inner = build_benchmark_mesh(&spec).map_err(value_err)?;
        Ok(PyMesh { inner })
    }

    #[staticmethod]
    fn from_inp(text: &str) -> PyResult<Self> {
        let inp = parse_abaqus_inp(text).map_err(value_err)?;
        Ok(PyMesh { inner: inp.mesh })
    }

    fn to_inp(&self) -> String {
        write_abaqus_inp(&self.inner)
    }

    #[getter]
    fn n_nodes(&self) -> usize {
        self.inner.n_nodes()
    }

    #[getter]
    fn n_elements(&self) -> usize {
        self.inner.n_elements()
    }

    #[getter]
    fn nodes(&self) -> Vec<(f64, f64)> {
        self.inner.nodes.iter().map(|p| (p[0], p[1])).collect()
    }

    #[getter]
    fn elements(&self) -> Vec<[usize; 4]> {
        self.inner.elements.clone()
    }

    #[getter]
    fn thickness(&self) -> f64 {
        self.inner.thickness
    }

    #[setter]
    fn set_thickness(&mut self, t: f64) -> PyResult<()> {
        if !(t > 0.0) {
            return Err(value_err("thickness must be positive"));
        }
        self.inner.thickness = t;
        Ok(())
    }

    fn set_names(&self) -> Vec<String> {
        self.inner.boundary_sets.keys().cloned().collect()
    }

    fn node_set(&self, name: &str) -> PyResult<Vec<usize>> {
        Ok(self.inner.set(name).map_err(value_err)?.to_vec())
    }

    fn area(&self) -> f64 {
        self.inner.area()
    }

    /// Writes a legacy VTK file; missing fields are written as zeros.
    #[pyo3(signature = (path, u = None, d = None))]
    fn write_vtk(&self, path: PathBuf, u: Option<Vec<f64>>, d: Option<Vec<f64>>) -> PyResult<()> {
        let mut st = State::zeros(self.inner.n_nodes());
        if let Some(u) = u {
            st.u = u;
        }
        if let Some(d) = d {
            st.d = d;
        }
        bench::write_vtk(&self.inner, &st, path).map_err(runtime_err)
    }
}

#[pyclass(name = "Assembler", frozen)]
struct PyAssembler {
    inner: CoreAssembler,
    n_nodes: usize,
}

impl PyAssembler {
    fn state(&self, u: Vec<f64>, d: Vec<f64>, d_prev: Option<Vec<f64>>) -> PyResult<State> {
        let m = self.n_nodes;
        if u.len() != 2 * m || d.len() != m {
            return Err(value_err(format!("expected {} displacements and {m} damage values", 2 * m)));
        }
        let mut st = State::zeros(m);
        st.u = u;
        st.d = d;
        if let Some(p) = d_prev {
            if p.len() != m {
                return Err(value_err(format!("expected {m} previous damage values")));
            }
            st.d_prev = p;
        }
        Ok(st)
    }
}

#[pymethods]
impl PyAssembler {
    #[new]
    fn new(mesh: &PyMesh, material: &PyMaterial) -> PyResult<Self> {
        let inner = CoreAssembler::new(&mesh.inner, material.inner).map_err(value_err)?;
        Ok(PyAssembler { n_nodes: mesh.inner.n_nodes(), inner })
    }

    #[getter]
    fn n_dofs(&self) -> usize {
        self.inner.n_dofs()
    }

    /// Residual `[R_u (interleaved), R_d]`. With `d_tilde` the displacement
    /// rows use the frozen degradation of the quasi-monolithic scheme.
    #[pyo3(signature = (u, d, d_prev = None, d_tilde = None))]
    fn residual(
        &self,
        u: Vec<f64>,
        d: Vec<f64>,
        d_prev: Option<Vec<f64>>,
        d_tilde: Option<Vec<f64>>,
    ) -> PyResult<Vec<f64>> {
        let st = self.state(u, d, d_prev)?;
        let mode = match &d_tilde {
            Some(t) => Mode::QuasiMonolithic(t),
            None => Mode::Full,
        };
        self.inner.assemble_residual(&st, mode).map_err(value_err)
    }

    /// Lower triangle of the symmetric Jacobian as `(rows, cols, values)`.
    #[pyo3(signature = (u, d, d_prev = None))]
    fn jacobian(
        &self,
        u: Vec<f64>,
        d: Vec<f64>,
        d_prev: Option<Vec<f64>>,
    ) -> PyResult<(Vec<usize>, Vec<usize>, Vec<f64>)> {
        let st = self.state(u, d, d_prev)?;
        let j = self.inner.assemble_jacobian(&st).map_err(value_err)?;
        let mut rows = Vec::with_capacity(j.nnz());
        let mut cols = Vec::with_capacity(j.nnz());
        for c in 0..j.dim() {
            for k in j.col_ptr()[c]..j.col_ptr()[c + 1] {
                rows.push(j.row_idx()[k]);
                cols.push(c);
            }
        }
        Ok((rows, cols, j.values().to_vec()))
    }

    #[pyo3(signature = (u, d, d_prev = None))]
    fn energy(&self, u: Vec<f64>, d: Vec<f64>, d_prev: Option<Vec<f64>>) -> PyResult<f64> {
        let st = self.state(u, d, d_prev)?;
        self.inner.total_energy(&st).map_err(value_err)
    }

    #[pyo3(signature = (u, d, set, component, d_prev = None))]
    fn reaction(&self, u: Vec<f64>, d: Vec<f64>, set: &str, component: &str, d_prev: Option<Vec<f64>>) -> PyResult<f64> {
        let c = self::component(component)?;
        let st = self.state(u, d, d_prev)?;
        self.inner.reaction_on_set(&st, set, c).map_err(value_err)
    }
}

/// Inertia `(n_pos, n_neg, n_zero)` of `A + tau I` for a dense symmetric `A`.
#[pyfunction]
#[pyo3(signature = (matrix, tau = 0.0))]
fn inertia(matrix: Vec<Vec<f64>>, tau: f64) -> PyResult<(usize, usize, usize)> {
    let n = matrix.len();
    let mut triplets = Vec::new();
    for (i, row) in matrix.iter().enumerate() {
        if row.len() != n {
            return Err(value_err("matrix must be square"));
        }
        for (j, &v) in row.iter().enumerate().take(i + 1) {
            if (v - matrix[j][i]).abs() > 1e-12 * v.abs().max(1.0) {
                return Err(value_err("matrix must be symmetric"));
            }
            triplets.push((i, j, v));
        }
    }
    let a = SparseSymmetric::from_triplets(n, &triplets).map_err(value_err)?;
    let f = ldlt_factorize(&a, tau).map_err(runtime_err)?;
    let i = f.inertia();
    Ok((i.n_pos, i.n_neg, i.n_zero))
}

/// Linear extrapolation in pseudo-time from `(t1, d1)` and `(t2, d2)`.
#[pyfunction]
fn extrapolate(d1: Vec<f64>, d2: Vec<f64>, t: f64, t1: f64, t2: f64) -> PyResult<Vec<f64>> {
    if d1.len() != d2.len() {
        return Err(value_err("fields differ in length"));
    }
    Ok(solvers::extrapolate(&d1, &d2, t, t1, t2))
}

/// Validated configuration as a dict.
#[pyfunction]
#[pyo3(signature = (path, scale = "paper"))]
fn load_config<'py>(py: Python<'py>, path: PathBuf, scale: &str) -> PyResult<Bound<'py, PyAny>> {
    let scale: Scale = scale.parse().map_err(value_err)?;
    let cfg = bench::load_config(path).map_err(value_err)?.at_scale(scale);
    to_py_json(py, &cfg)
}

/// Runs a benchmark and returns its summary dict; artifacts are written as
/// by the command-line runner.
#[pyfunction]
#[pyo3(signature = (config, solver, scale = "paper", out = None, dump_stride = None, qm_max_corrections = None))]
fn run_benchmark<'py>(
    py: Python<'py>,
    config: PathBuf,
    solver: &str,
    scale: &str,
    out: Option<PathBuf>,
    dump_stride: Option<usize>,
    qm_max_corrections: Option<usize>,
) -> PyResult<Bound<'py, PyAny>> {
    let kind: SolverKind = solver.parse().map_err(value_err)?;
    let scale: Scale = scale.parse().map_err(value_err)?;
    let mut cfg = bench::load_config(config).map_err(value_err)?.at_scale(scale);
    if let Some(o) = out {
        cfg.output.directory = o;
    }
    if let Some(s) = dump_stride {
        cfg.output.dump_stride = s;
    }
    if let Some(n) = qm_max_corrections {
        cfg.solver.max_qm_corrections = n;
    }
    let run = py.detach(|| bench::run_benchmark(&cfg, kind)).map_err(runtime_err)?;
    let summary = to_py_json(py, &run.summary)?;
    let fd: Vec<(f64, f64)> = run.force_displacement();
    let dict = PyDict::new(py);
    dict.set_item("summary", summary)?;
    dict.set_item("force_displacement", fd)?;
    dict.set_item("out_dir", run.out_dir)?;
    Ok(dict.into_any())
}

/// Markdown comparison table of several `summary.json` files.
#[pyfunction]
fn compare_runs(paths: Vec<PathBuf>) -> PyResult<String> {
    let summaries = paths
        .iter()
        .map(bench::RunSummary::read)
        .collect::<Result<Vec<_>, _>>()
        .map_err(value_err)?;
    Ok(bench::compare_runs(&summaries).map_err(value_err)?.to_markdown())
}

#[pymodule]
fn pyphasefrac(m: &Bound<'_, PyModule>) -> PyResult<()> {
    m.add_class::<PyMaterial>()?;
    m.add_class::<PyMesh>()?;
    m.add_class::<PyAssembler>()?;
    m.add_function(wrap_pyfunction!(inertia, m)?)?;
    m.add_function(wrap_pyfunction!(extrapolate, m)?)?;
    m.add_function(wrap_pyfunction!(load_config, m)?)?;
    m.add_function(wrap_pyfunction!(run_benchmark, m)?)?;
    m.add_function(wrap_pyfunction!(compare_runs, m)?)?;
    Ok(())
}
