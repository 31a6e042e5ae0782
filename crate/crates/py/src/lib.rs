//! Python bindings: load problems from TOML, solve, simulate and verify.

use std::path::PathBuf;

use exitgame::cli::{self, Command, RunConfig};
use exitgame::config::{self, ProblemConfig};
use exitgame::grid::{build_grid, GridSpec};
use exitgame::hamiltonian::{saddle_point, Costate, HamiltonianKind};
use exitgame::oracle::{brute_value, exactify};
use exitgame::simulator::{dpp_residual, play};
use exitgame::solver::{boundary_gaps, solve, solve_both, Convention, SchemeParams};
use exitgame::strategy::{feedback_strategy, ControlSignal, Player};
use exitgame::GameError;
use pyo3::exceptions::{PyRuntimeError, PyValueError};
use pyo3::prelude::*;
use pyo3::types::PyDict;

fn err(e: GameError) -> PyErr {
    match e {
        GameError::NonConvergence { .. } | GameError::Io(_) => PyRuntimeError::new_err(e.to_string()),
        _ => PyValueError::new_err(e.to_string()),
    }
}

fn convention(name: &str) -> PyResult<Convention> {
    match name.to_ascii_lowercase().as_str() {
        "lower" => Ok(Convention::Lower),
        "upper" => Ok(Convention::Upper),
        _ => Err(PyValueError::new_err(format!("convention must be 'lower' or 'upper', got {name:?}"))),
    }
}

/// A game loaded from a TOML problem file, with its scheme defaults.
#[pyclass(name = "Problem", module = "exitgame_py", frozen)]
struct PyProblem {
    cfg: ProblemConfig,
}

#[pymethods]
impl PyProblem {
    #[staticmethod]
    fn from_toml(text: &str) -> PyResult<Self> {
        Ok(Self {
            cfg: config::parse_config(text).map_err(err)?,
        })
    }

    #[staticmethod]
    fn load(path: PathBuf) -> PyResult<Self> {
        Ok(Self {
            cfg: config::load_config(&path).map_err(err)?,
        })
    }

    #[getter]
    fn name(&self) -> &str {
        &self.cfg.name
    }

    /// `(n, m)`: state dimensions of X and Y.
    #[getter]
    fn dims(&self) -> (usize, usize) {
        (self.cfg.problem.n(), self.cfg.problem.m())
    }

    #[getter]
    fn discount(&self) -> f64 {
        self.cfg.problem.discount()
    }

    #[getter]
    fn default_grid(&self) -> Vec<usize> {
        self.cfg.scheme.grid.clone()
    }

    #[getter]
    fn default_dt(&self) -> f64 {
        self.cfg.scheme.dt
    }

    fn running_cost(&self, x: Vec<f64>, y: Vec<f64>, a: Vec<f64>, b: Vec<f64>) -> f64 {
        self.cfg.problem.running(&x, &y, &a, &b)
    }

    /// `(status, number of corner samples violating ψ_Y ≤ ψ_XY ≤ ψ_X)`
    #[pyo3(signature = (per_axis = 5))]
    fn validate_exit_costs(&self, per_axis: usize) -> PyResult<(String, usize)> {
        let r = self.cfg.problem.validate_exit_costs(per_axis).map_err(err)?;
        Ok((format!("{:?}", r.status).to_uppercase(), r.violations.len()))
    }

    /// `(status, zeta_x, zeta_y, c_tilde)`
    #[pyo3(signature = (per_axis = 5))]
    fn validate_controllability(&self, per_axis: usize) -> PyResult<(String, f64, f64, f64)> {
        let r = self.cfg.problem.validate_controllability(per_axis).map_err(err)?;
        Ok((format!("{:?}", r.status).to_uppercase(), r.zeta_x, r.zeta_y, r.c_tilde))
    }

    /// `(value, gap, a index, b index)` of the upper or lower Hamiltonian.
    #[pyo3(signature = (x, y, p, q, kind = "upper"))]
    fn hamiltonian(&self, x: Vec<f64>, y: Vec<f64>, p: Vec<f64>, q: Vec<f64>, kind: &str) -> PyResult<(f64, f64, usize, usize)> {
        let pr = &self.cfg.problem;
        if x.len() != pr.n() || p.len() != pr.n() || y.len() != pr.m() || q.len() != pr.m() {
            return Err(PyValueError::new_err("state and costate lengths must match the problem dimensions"));
        }
        let kind = match kind {
            "upper" => HamiltonianKind::Upper,
            "lower" => HamiltonianKind::Lower,
            _ => return Err(PyValueError::new_err("kind must be 'upper' or 'lower'")),
        };
        let s = saddle_point(pr, kind, &x, &y, &Costate::new(p, q));
        Ok((s.value, s.gap, s.a, s.b))
    }

    fn __repr__(&self) -> String {
        let (n, m) = self.dims();
        format!("Problem(name={:?}, n={n}, m={m})", self.cfg.name)
    }
}

/// A solved value grid.
#[pyclass(name = "ValueGrid", module = "exitgame_py", frozen)]
struct PyValueGrid {
    grid: exitgame::ValueGrid,
    #[pyo3(get)]
    iterations: usize,
    #[pyo3(get)]
    contraction: f64,
    #[pyo3(get)]
    final_residual: f64,
}

#[pymethods]
impl PyValueGrid {
    #[getter]
    fn nodes(&self) -> Vec<usize> {
        self.grid.nodes_per_axis().to_vec()
    }

    #[getter]
    fn values(&self) -> Vec<f64> {
        self.grid.values().to_vec()
    }

    #[getter]
    fn roles(&self) -> Vec<&'static str> {
        self.grid.roles().iter().map(|r| r.tag()).collect()
    }

    fn coords(&self, idx: usize) -> PyResult<Vec<f64>> {
        if idx >= self.grid.len() {
            return Err(PyValueError::new_err(format!("node {idx} out of range")));
        }
        Ok(self.grid.coords(idx))
    }

    fn value_at(&self, x: Vec<f64>, y: Vec<f64>) -> PyResult<f64> {
        self.grid.value_at(&x, &y).map_err(err)
    }

    fn __len__(&self) -> usize {
        self.grid.len()
    }
}

fn scheme(pr: &PyProblem, dt: Option<f64>, tol: Option<f64>, max_iters: Option<usize>, conv: Convention) -> SchemeParams {
    let s = &pr.cfg.scheme;
    SchemeParams::new(dt.unwrap_or(s.dt), tol.unwrap_or(s.tol), max_iters.unwrap_or(s.max_iters), conv)
}

fn grid_of(pr: &PyProblem, nodes: Option<Vec<usize>>) -> PyResult<exitgame::ValueGrid> {
    let nodes = nodes.unwrap_or_else(|| pr.cfg.scheme.grid.clone());
    build_grid(&pr.cfg.problem, &GridSpec::new(nodes)).map_err(err)
}

/// Solves the lower (default) or upper value by value iteration.
#[pyfunction]
#[pyo3(name = "solve", signature = (problem, convention = "lower", grid = None, dt = None, tol = None, max_iters = None))]
fn py_solve(
    py: Python<'_>,
    problem: &PyProblem,
    convention: &str,
    grid: Option<Vec<usize>>,
    dt: Option<f64>,
    tol: Option<f64>,
    max_iters: Option<usize>,
) -> PyResult<PyValueGrid> {
    let conv = self::convention(convention)?;
    let g = grid_of(problem, grid)?;
    let sp = scheme(problem, dt, tol, max_iters, conv);
    let (v, r) = py.detach(|| solve(&problem.cfg.problem, &g, &sp)).map_err(err)?;
    Ok(PyValueGrid {
        grid: v,
        iterations: r.iterations,
        contraction: r.contraction_estimate,
        final_residual: r.final_residual,
    })
}

/// `(lower, upper, gap)`
#[pyfunction]
#[pyo3(name = "solve_both", signature = (problem, grid = None, dt = None, tol = None))]
fn py_solve_both(
    py: Python<'_>,
    problem: &PyProblem,
    grid: Option<Vec<usize>>,
    dt: Option<f64>,
    tol: Option<f64>,
) -> PyResult<(PyValueGrid, PyValueGrid, f64)> {
    let g = grid_of(problem, grid)?;
    let sp = scheme(problem, dt, tol, None, Convention::Lower);
    let b = py.detach(|| solve_both(&problem.cfg.problem, &g, &sp)).map_err(err)?;
    let wrap = |grid, r: exitgame::SolveReport| PyValueGrid {
        grid,
        iterations: r.iterations,
        contraction: r.contraction_estimate,
        final_residual: r.final_residual,
    };
    Ok((wrap(b.lower, b.lower_report), wrap(b.upper, b.upper_report), b.gap))
}

/// `(max (V − ψ_X) on X-boundary nodes, max (ψ_Y − V) on Y-boundary nodes)`
#[pyfunction]
fn boundary_check(problem: &PyProblem, values: &PyValueGrid) -> (f64, f64) {
    let b = boundary_gaps(&problem.cfg.problem, &values.grid);
    (b.x_excess, b.y_deficit)
}

/// One-step DPP residual of a solved grid at `(x, y)`.
#[pyfunction]
#[pyo3(signature = (problem, values, x, y, steps = 1))]
fn dpp(problem: &PyProblem, values: &PyValueGrid, x: Vec<f64>, y: Vec<f64>, steps: usize) -> PyResult<f64> {
    let dt = values.grid.meta.map(|m| m.dt).unwrap_or(problem.cfg.scheme.dt);
    dpp_residual(&problem.cfg.problem, &values.grid, &x, &y, steps as f64 * dt, 0).map_err(err)
}

/// Plays the lower-value feedback of X against the opponent signal `beta`
/// (a list of controls, one per step, last one repeated).
#[pyfunction]
#[pyo3(signature = (problem, values, x0, y0, beta, horizon = 5.0))]
fn simulate<'py>(
    py: Python<'py>,
    problem: &PyProblem,
    values: &PyValueGrid,
    x0: Vec<f64>,
    y0: Vec<f64>,
    beta: Vec<Vec<f64>>,
    horizon: f64,
) -> PyResult<Bound<'py, PyDict>> {
    let p = &problem.cfg.problem;
    let dt = values
        .grid
        .meta
        .map(|m| m.dt)
        .ok_or_else(|| PyValueError::new_err("values must come from solve()"))?;
    let beta = ControlSignal::new(dt, beta).map_err(err)?;
    beta.validate(p.controls_b()).map_err(err)?;
    let gamma = feedback_strategy(p, &values.grid, Player::X, dt).map_err(err)?;
    let o = play(p, &x0, &y0, &gamma, &beta, horizon).map_err(err)?;
    let d = PyDict::new(py);
    d.set_item("cost", o.cost)?;
    d.set_item("exit_case", o.exit_case.to_string())?;
    d.set_item("tau", o.tau)?;
    d.set_item("tau_x", o.tau_x)?;
    d.set_item("tau_y", o.tau_y)?;
    d.set_item("tail_bound", o.tail_bound)?;
    d.set_item("times", o.times)?;
    d.set_item("path_x", o.path_x)?;
    d.set_item("path_y", o.path_y)?;
    d.set_item("controls_a", o.controls_a)?;
    Ok(d)
}

/// Largest per-node difference between the solver and the brute-force
/// finite game, over both conventions; the instance must be node-exact.
#[pyfunction]
#[pyo3(signature = (problem, grid = None, dt = None))]
fn oracle_error(py: Python<'_>, problem: &PyProblem, grid: Option<Vec<usize>>, dt: Option<f64>) -> PyResult<f64> {
    let p = &problem.cfg.problem;
    let g = grid_of(problem, grid)?;
    let sp = scheme(problem, dt, Some(1e-13), Some(10_000_000), Convention::Lower);
    py.detach(|| {
        let d = exactify(p, &g, &sp)?;
        let mut worst: f64 = 0.0;
        for conv in [Convention::Lower, Convention::Upper] {
            let (v, _) = solve(p, &g, &sp.with_convention(conv))?;
            for (a, b) in v.values().iter().zip(brute_value(&d, conv)) {
                worst = worst.max((a - b).abs());
            }
        }
        Ok(worst)
    })
    .map_err(err)
}

/// Runs a command-line command; returns the report as ordered `(key, value)`
/// pairs.
#[pyfunction]
#[pyo3(signature = (config, command = "solve", out = PathBuf::from("out"), seed = 0))]
fn run_command(py: Python<'_>, config: PathBuf, command: &str, out: PathBuf, seed: u64) -> PyResult<Vec<(String, String)>> {
    use clap::ValueEnum;
    let command = Command::from_str(command, true).map_err(PyValueError::new_err)?;
    let rc = RunConfig {
        config,
        command,
        out,
        seed,
        grid: None,
        dt: None,
        tol: None,
        max_iters: None,
        levels: 3,
    };
    let r = py.detach(|| cli::run(&rc)).map_err(err)?;
    Ok(r.entries().to_vec())
}

#[pymodule]
fn exitgame_py(m: &Bound<'_, PyModule>) -> PyResult<()> {
    m.add_class::<PyProblem>()?;
    m.add_class::<PyValueGrid>()?;
    m.add_function(wrap_pyfunction!(py_solve, m)?)?;
    m.add_function(wrap_pyfunction!(py_solve_both, m)?)?;
    m.add_function(wrap_pyfunction!(boundary_check, m)?)?;
    m.add_function(wrap_pyfunction!(dpp, m)?)?;
    m.add_function(wrap_pyfunction!(simulate, m)?)?;
    m.add_function(wrap_pyfunction!(oracle_error, m)?)?;
    m.add_function(wrap_pyfunction!(run_command, m)?)?;
    Ok(())
}
