//! TOML problem files.
//!
//! ```toml
//! name = "eikonal"
//! [omegaX]
//! lo = [0.0]
//! hi = [1.0]
//! [omegaY]
//! lo = [-1.0]
//! hi = [1.0]
//! [controls]
//! A = [-1.0, 0.0, 1.0]        # scalars, or lists of vectors
//! B = [0.0]
//! [dynamics]
//! builtin = "eikonal"         # linear | eikonal | surge_tank | polynomial
//! lipschitz = 1.0
//! bound = 1.0
//! [costs]
//! discount = 1.0
//! running = 1.0               # a constant, or a list of terms {c, x, y, a, b}
//! exit_x = 0.0
//! exit_y = 0.0
//! exit_xy = 0.0
//! ```
//!
//! Optional `[dynamics.params]`, `[scheme]`, `[simulate]` and `[verify]`
//! tables are described on the corresponding structs.

use std::ops::Range;
use std::path::Path;
use std::sync::Arc;

use serde::Deserialize;
use toml::Spanned;

use crate::error::{GameError, Result};
use crate::linalg::Matrix;
use crate::poly::{Polynomial, Term};
use crate::problem::{BoxDomain, ControlSet, CostSplit, Costs, Dynamics, GameProblem, StateControlFn, XDrift};

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct RawConfig {
    name: Option<String>,
    #[serde(rename = "omegaX")]
    omega_x: Spanned<RawBox>,
    #[serde(rename = "omegaY")]
    omega_y: Spanned<RawBox>,
    controls: Spanned<RawControls>,
    dynamics: Spanned<RawDynamics>,
    costs: Spanned<RawCosts>,
    scheme: Option<Spanned<RawScheme>>,
    simulate: Option<Spanned<RawSimulate>>,
    verify: Option<Spanned<VerifyConfig>>,
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct RawBox {
    lo: Vec<f64>,
    hi: Vec<f64>,
}

#[derive(Deserialize)]
#[serde(untagged)]
enum RawPoint {
    Scalar(f64),
    Vector(Vec<f64>),
}

impl RawPoint {
    fn into_vec(self) -> Vec<f64> {
        match self {
            RawPoint::Scalar(v) => vec![v],
            RawPoint::Vector(v) => v,
        }
    }
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct RawControls {
    #[serde(rename = "A")]
    a: Vec<RawPoint>,
    #[serde(rename = "B")]
    b: Vec<RawPoint>,
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct RawDynamics {
    builtin: String,
    lipschitz: f64,
    bound: f64,
    #[serde(default)]
    params: RawParams,
}

/// Parameters of the builtin dynamics; each builtin rejects keys it does
/// not use.
#[derive(Default, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawParams {
    /// linear: `x' = Fx x + f0 + G a + D b`, `y' = Fy y + g0 + H b`
    #[serde(rename = "Fx")]
    fx: Option<Vec<Vec<f64>>>,
    f0: Option<Vec<f64>>,
    #[serde(rename = "G")]
    g: Option<Vec<Vec<f64>>>,
    #[serde(rename = "D")]
    d: Option<Vec<Vec<f64>>>,
    #[serde(rename = "Fy")]
    fy: Option<Vec<Vec<f64>>>,
    g0: Option<Vec<f64>>,
    #[serde(rename = "H")]
    h: Option<Vec<Vec<f64>>>,
    /// eikonal: `x' = speed_x a`, `y' = speed_y b`
    speed_x: Option<f64>,
    speed_y: Option<f64>,
    /// polynomial: one term list per component, over `(x, a)` and `(y, b)`
    x: Option<Vec<Vec<RawTerm>>>,
    y: Option<Vec<Vec<RawTerm>>>,
}

#[derive(Clone, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawTerm {
    c: f64,
    x: Option<Vec<u32>>,
    y: Option<Vec<u32>>,
    a: Option<Vec<u32>>,
    b: Option<Vec<u32>>,
}

#[derive(Deserialize)]
#[serde(untagged)]
enum RawCost {
    Constant(f64),
    Terms(Vec<RawTerm>),
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct RawCosts {
    discount: f64,
    split: Option<String>,
    running: RawCost,
    exit_x: RawCost,
    exit_y: RawCost,
    exit_xy: RawCost,
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct RawScheme {
    dt: Option<f64>,
    tol: Option<f64>,
    max_iters: Option<usize>,
    grid: Option<Vec<usize>>,
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct RawStart {
    x: Vec<f64>,
    y: Vec<f64>,
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct RawSimulate {
    horizon: f64,
    dt: Option<f64>,
    #[serde(default)]
    starts: Vec<RawStart>,
    random_signals: Option<usize>,
    max_run: Option<usize>,
}

/// Discretisation of the value iteration.
#[derive(Clone, Debug, PartialEq)]
pub struct SchemeConfig {
    pub dt: f64,
    pub tol: f64,
    pub max_iters: usize,
    /// Nodes per axis, `x` axes first.
    pub grid: Vec<usize>,
}

/// Plays of the lower feedback strategy against constant and random
/// maximiser signals from each start point.
#[derive(Clone, Debug, PartialEq)]
pub struct SimulateConfig {
    pub horizon: f64,
    /// Step of the plays; `None` reuses the scheme step.
    pub dt: Option<f64>,
    pub starts: Vec<(Vec<f64>, Vec<f64>)>,
    pub random_signals: usize,
    pub max_run: usize,
}

/// Settings of the `verify` command.
#[derive(Clone, Debug, PartialEq, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct VerifyConfig {
    pub trials: usize,
    pub max_delta: f64,
    pub t_star: f64,
    pub horizon: f64,
    pub corner_samples: usize,
    pub boundary_samples: usize,
    pub spot_samples: usize,
    /// Controls probed per player in the DPP residual game tree.
    pub dpp_probe: usize,
    /// Largest number of interior nodes whose DPP residual is evaluated.
    pub dpp_nodes: usize,
}

impl Default for VerifyConfig {
    fn default() -> Self {
        Self {
            trials: 100,
            max_delta: 0.05,
            t_star: 0.25,
            horizon: 2.0,
            corner_samples: 5,
            boundary_samples: 5,
            spot_samples: 5,
            dpp_probe: 3,
            dpp_nodes: 200,
        }
    }
}

#[derive(Clone, Debug)]
pub struct ProblemConfig {
    pub name: String,
    pub problem: GameProblem,
    pub scheme: SchemeConfig,
    pub simulate: SimulateConfig,
    pub verify: VerifyConfig,
}

fn line_of(src: &str, offset: usize) -> usize {
    src[..offset.min(src.len())].bytes().filter(|&b| b == b'\n').count() + 1
}

struct Ctx<'a> {
    src: &'a str,
}

impl Ctx<'_> {
    fn err(&self, span: &Range<usize>, msg: impl std::fmt::Display) -> GameError {
        GameError::Config(format!("line {}: {msg}", line_of(self.src, span.start)))
    }
}

pub fn load_config(path: impl AsRef<Path>) -> Result<ProblemConfig> {
    let path = path.as_ref();
    let src = std::fs::read_to_string(path)
        .map_err(|e| GameError::Config(format!("cannot read {}: {e}", path.display())))?;
    parse_config(&src).map_err(|e| match e {
        GameError::Config(m) => GameError::Config(format!("{}: {m}", path.display())),
        other => other,
    })
}

pub fn parse_config(src: &str) -> Result<ProblemConfig> {
    let raw: RawConfig = toml::from_str(src).map_err(|e| {
        let line = e.span().map_or(0, |s| line_of(src, s.start));
        GameError::Config(format!("line {line}: {}", e.message()))
    })?;
    let cx = Ctx { src };

    let ox_span = raw.omega_x.span();
    let ox = raw.omega_x.into_inner();
    let omega_x = BoxDomain::new(ox.lo, ox.hi).map_err(|e| cx.err(&ox_span, e))?;
    let oy_span = raw.omega_y.span();
    let oy = raw.omega_y.into_inner();
    let omega_y = BoxDomain::new(oy.lo, oy.hi).map_err(|e| cx.err(&oy_span, e))?;
    let (n, m) = (omega_x.dim(), omega_y.dim());

    let c_span = raw.controls.span();
    let ctl = raw.controls.into_inner();
    let controls_a = ControlSet::new(ctl.a.into_iter().map(RawPoint::into_vec).collect()).map_err(|e| cx.err(&c_span, e))?;
    let controls_b = ControlSet::new(ctl.b.into_iter().map(RawPoint::into_vec).collect()).map_err(|e| cx.err(&c_span, e))?;
    let (p, q) = (controls_a.dim(), controls_b.dim());

    let d_span = raw.dynamics.span();
    let dynamics = build_dynamics(raw.dynamics.into_inner(), (n, m, p, q)).map_err(|e| cx.err(&d_span, e))?;

    let k_span = raw.costs.span();
    let costs = build_costs(raw.costs.into_inner(), (n, m, p, q)).map_err(|e| cx.err(&k_span, e))?;

    let problem = GameProblem::new(omega_x, omega_y, dynamics, controls_a, controls_b, costs).map_err(|e| {
        GameError::Config(format!("line {}: {e}", line_of(src, d_span.start)))
    })?;

    let scheme = match raw.scheme {
        Some(s) => {
            let span = s.span();
            build_scheme(&problem, Some(s.into_inner())).map_err(|e| cx.err(&span, e))?
        }
        None => build_scheme(&problem, None).map_err(GameError::Config)?,
    };

    let simulate = match raw.simulate {
        Some(s) => {
            let span = s.span();
            let s = s.into_inner();
            if !(s.horizon > 0.0) {
                return Err(cx.err(&span, "simulate.horizon must be positive"));
            }
            if s.dt.is_some_and(|dt| !(dt > 0.0)) {
                return Err(cx.err(&span, "simulate.dt must be positive"));
            }
            let mut starts = Vec::new();
            for st in s.starts {
                if st.x.len() != n || st.y.len() != m {
                    return Err(cx.err(&span, format!("start point needs x of length {n} and y of length {m}")));
                }
                if !problem.omega_x().contains(&st.x) || !problem.omega_y().contains(&st.y) {
                    return Err(cx.err(&span, format!("start point ({:?}, {:?}) lies outside the domains", st.x, st.y)));
                }
                starts.push((st.x, st.y));
            }
            SimulateConfig {
                horizon: s.horizon,
                dt: s.dt,
                starts,
                random_signals: s.random_signals.unwrap_or(2),
                max_run: s.max_run.unwrap_or(20).max(1),
            }
        }
        None => SimulateConfig {
            horizon: 2.0,
            dt: None,
            starts: vec![(problem.omega_x().center(), problem.omega_y().center())],
            random_signals: 2,
            max_run: 20,
        },
    };

    let verify = match raw.verify {
        Some(v) => {
            let span = v.span();
            let v = v.into_inner();
            if v.trials == 0 || !(v.t_star > 0.0) || !(v.horizon > 0.0) || v.max_delta < 0.0 {
                return Err(cx.err(&span, "verify needs trials > 0, t_star > 0, horizon > 0, max_delta >= 0"));
            }
            v
        }
        None => VerifyConfig::default(),
    };

    Ok(ProblemConfig {
        name: raw.name.unwrap_or_else(|| "game".into()),
        problem,
        scheme,
        simulate,
        verify,
    })
}

fn matrix(rows: Option<Vec<Vec<f64>>>, shape: (usize, usize), what: &str, default: Matrix) -> std::result::Result<Matrix, String> {
    let Some(rows) = rows else {
        return Ok(default);
    };
    let m = Matrix::from_rows(&rows).ok_or_else(|| format!("{what}: rows have different lengths"))?;
    if (m.rows(), m.cols()) != shape || (rows.is_empty() && shape.0 > 0) {
        return Err(format!("{what} must be {}x{}, got {}x{}", shape.0, shape.1, m.rows(), m.cols()));
    }
    Ok(m)
}

fn vector(v: Option<Vec<f64>>, len: usize, what: &str) -> std::result::Result<Vec<f64>, String> {
    let v = v.unwrap_or_else(|| vec![0.0; len]);
    if v.len() != len {
        return Err(format!("{what} must have length {len}, got {}", v.len()));
    }
    Ok(v)
}

fn identity_or_err(rows: usize, cols: usize, what: &str) -> std::result::Result<Matrix, String> {
    if rows == cols {
        Ok(Matrix::identity(rows))
    } else {
        Err(format!("{what} must be given: control dimension {cols} differs from state dimension {rows}"))
    }
}

fn reject_params(pr: &RawParams, builtin: &str, allowed: &[&str]) -> std::result::Result<(), String> {
    let present = [
        ("Fx", pr.fx.is_some()),
        ("f0", pr.f0.is_some()),
        ("G", pr.g.is_some()),
        ("D", pr.d.is_some()),
        ("Fy", pr.fy.is_some()),
        ("g0", pr.g0.is_some()),
        ("H", pr.h.is_some()),
        ("speed_x", pr.speed_x.is_some()),
        ("speed_y", pr.speed_y.is_some()),
        ("x", pr.x.is_some()),
        ("y", pr.y.is_some()),
    ];
    match present.iter().find(|(k, set)| *set && !allowed.contains(k)) {
        Some((k, _)) => Err(format!("parameter `{k}` is not used by builtin `{builtin}`")),
        None => Ok(()),
    }
}

fn build_dynamics(raw: RawDynamics, (n, m, p, q): (usize, usize, usize, usize)) -> std::result::Result<Dynamics, String> {
    let pr = raw.params;
    let (drift_x, drift_y): (XDrift, StateControlFn) = match raw.builtin.as_str() {
        "linear" => {
            reject_params(&pr, "linear", &["Fx", "f0", "G", "D", "Fy", "g0", "H"])?;
            let fx = matrix(pr.fx, (n, n), "Fx", Matrix::zeros(n, n))?;
            let f0 = vector(pr.f0, n, "f0")?;
            let g = match pr.g {
                Some(rows) => matrix(Some(rows), (n, p), "G", Matrix::zeros(n, p))?,
                None => identity_or_err(n, p, "G")?,
            };
            let d = matrix(pr.d, (n, q), "D", Matrix::zeros(n, q))?;
            let fy = matrix(pr.fy, (m, m), "Fy", Matrix::zeros(m, m))?;
            let g0 = vector(pr.g0, m, "g0")?;
            let h = match pr.h {
                Some(rows) => matrix(Some(rows), (m, q), "H", Matrix::zeros(m, q))?,
                None => identity_or_err(m, q, "H")?,
            };
            let base = Arc::new(move |x: &[f64]| {
                let mut v = f0.clone();
                fx.apply_add(x, &mut v);
                v
            });
            let dy: StateControlFn = Arc::new(move |y: &[f64], b: &[f64]| {
                let mut v = g0.clone();
                fy.apply_add(y, &mut v);
                h.apply_add(b, &mut v);
                v
            });
            (XDrift::Affine { base, input: g, coupling: d }, dy)
        }
        "eikonal" => {
            reject_params(&pr, "eikonal", &["speed_x", "speed_y"])?;
            if p != n || q != m {
                return Err("eikonal needs control dimensions equal to state dimensions".into());
            }
            let sx = pr.speed_x.unwrap_or(1.0);
            let sy = pr.speed_y.unwrap_or(1.0);
            let dx: StateControlFn = Arc::new(move |_: &[f64], a: &[f64]| a.iter().map(|v| sx * v).collect());
            let dy: StateControlFn = Arc::new(move |_: &[f64], b: &[f64]| b.iter().map(|v| sy * v).collect());
            (XDrift::Decoupled(dx), dy)
        }
        "surge_tank" => {
            reject_params(&pr, "surge_tank", &[])?;
            if n != 2 || p != 1 || q != 1 {
                return Err("surge_tank needs a 2-dimensional x and scalar controls".into());
            }
            // volume x1, rate x2: x1' = x2, x2' = -a + b; y is inert
            let base = Arc::new(|x: &[f64]| vec![x[1], 0.0]);
            let input = Matrix::from_rows(&[vec![0.0], vec![-1.0]]).expect("shape");
            let coupling = Matrix::from_rows(&[vec![0.0], vec![1.0]]).expect("shape");
            let dy: StateControlFn = Arc::new(move |_: &[f64], _: &[f64]| vec![0.0; m]);
            (XDrift::Affine { base, input, coupling }, dy)
        }
        "polynomial" => {
            reject_params(&pr, "polynomial", &["x", "y"])?;
            let px = components(pr.x.ok_or("polynomial needs params.x")?, n, &[n, p], &["x", "a"])?;
            let py = components(pr.y.ok_or("polynomial needs params.y")?, m, &[m, q], &["y", "b"])?;
            let dx: StateControlFn = Arc::new(move |x: &[f64], a: &[f64]| px.iter().map(|c| c.eval(&[x, a])).collect());
            let dy: StateControlFn = Arc::new(move |y: &[f64], b: &[f64]| py.iter().map(|c| c.eval(&[y, b])).collect());
            (XDrift::Decoupled(dx), dy)
        }
        other => return Err(format!("unknown builtin `{other}` (expected linear, eikonal, surge_tank or polynomial)")),
    };
    Dynamics::new(drift_x, drift_y, raw.lipschitz, raw.bound).map_err(|e| e.to_string())
}

fn components(raw: Vec<Vec<RawTerm>>, len: usize, dims: &[usize], names: &[&str]) -> std::result::Result<Vec<Polynomial>, String> {
    if raw.len() != len {
        return Err(format!("expected {len} drift components, got {}", raw.len()));
    }
    raw.into_iter().map(|terms| polynomial(terms, dims, names)).collect()
}

/// Builds a polynomial whose variable groups are named `names`; terms may
/// only mention those groups.
fn polynomial(raw: Vec<RawTerm>, dims: &[usize], names: &[&str]) -> std::result::Result<Polynomial, String> {
    let mut terms = Vec::with_capacity(raw.len());
    for t in raw {
        let by_name = [("x", t.x), ("y", t.y), ("a", t.a), ("b", t.b)];
        let mut powers = vec![Vec::new(); names.len()];
        for (name, pw) in by_name {
            let Some(pw) = pw else { continue };
            let g = names
                .iter()
                .position(|n| *n == name)
                .ok_or_else(|| format!("term mentions `{name}`, allowed here: {}", names.join(", ")))?;
            powers[g] = pw;
        }
        terms.push(Term { coef: t.c, powers });
    }
    Polynomial::new(dims.to_vec(), terms)
}

fn cost_poly(raw: RawCost, dims: &[usize], names: &[&str]) -> std::result::Result<Polynomial, String> {
    match raw {
        RawCost::Constant(c) if c.is_finite() => Ok(Polynomial::constant(dims.to_vec(), c)),
        RawCost::Constant(c) => Err(format!("cost constant {c} is not finite")),
        RawCost::Terms(t) => polynomial(t, dims, names),
    }
}

/// The strongest split the running-cost polynomial satisfies.
fn infer_split(l: &Polynomial) -> CostSplit {
    const X: usize = 0;
    const Y: usize = 1;
    const A: usize = 2;
    const B: usize = 3;
    if l.mixes(&[A, B]) {
        CostSplit::Coupled
    } else if l.couples(&[X, Y], &[A, B]) {
        CostSplit::Separated
    } else {
        CostSplit::StateControlSum
    }
}

fn build_costs(raw: RawCosts, (n, m, p, q): (usize, usize, usize, usize)) -> std::result::Result<Costs, String> {
    let running = cost_poly(raw.running, &[n, m, p, q], &["x", "y", "a", "b"])?;
    let exit = |c| cost_poly(c, &[n, m], &["x", "y"]);
    let (ex, ey, exy) = (exit(raw.exit_x)?, exit(raw.exit_y)?, exit(raw.exit_xy)?);
    let inferred = infer_split(&running);
    let split = match raw.split.as_deref() {
        None => inferred,
        Some("coupled") => CostSplit::Coupled,
        Some("separated") => {
            if inferred == CostSplit::Coupled {
                return Err("split = \"separated\" but the running cost has a term mixing a and b".into());
            }
            CostSplit::Separated
        }
        Some("state_control_sum") => {
            if inferred != CostSplit::StateControlSum {
                return Err("split = \"state_control_sum\" but the running cost couples the states and controls".into());
            }
            CostSplit::StateControlSum
        }
        Some(other) => return Err(format!("unknown split `{other}` (expected coupled, separated or state_control_sum)")),
    };
    Costs::new(
        Arc::new(move |x, y, a, b| running.eval(&[x, y, a, b])),
        Arc::new(move |x, y| ex.eval(&[x, y])),
        Arc::new(move |x, y| ey.eval(&[x, y])),
        Arc::new(move |x, y| exy.eval(&[x, y])),
        raw.discount,
        split,
    )
    .map_err(|e| e.to_string())
}

fn build_scheme(p: &GameProblem, raw: Option<RawScheme>) -> std::result::Result<SchemeConfig, String> {
    let d = p.n() + p.m();
    let raw = raw.unwrap_or(RawScheme {
        dt: None,
        tol: None,
        max_iters: None,
        grid: None,
    });
    let grid = match raw.grid {
        None => vec![21; d],
        Some(g) if g.len() == 1 => vec![g[0]; d],
        Some(g) if g.len() == d => g,
        Some(g) => return Err(format!("scheme.grid needs 1 or {d} entries, got {}", g.len())),
    };
    if grid.iter().any(|&k| k < 2) {
        return Err("scheme.grid needs at least 2 nodes per axis".into());
    }
    let dt = match raw.dt {
        Some(dt) => dt,
        None => {
            let lo = p.omega_x().lo().iter().chain(p.omega_y().lo());
            let hi = p.omega_x().hi().iter().chain(p.omega_y().hi());
            let h = lo
                .zip(hi)
                .zip(&grid)
                .map(|((l, u), &k)| (u - l) / (k - 1) as f64)
                .fold(f64::INFINITY, f64::min);
            0.5 * h / p.dynamics().bound()
        }
    };
    let tol = raw.tol.unwrap_or(1e-8);
    if !(dt > 0.0) || !(tol > 0.0) {
        return Err("scheme.dt and scheme.tol must be positive".into());
    }
    Ok(SchemeConfig {
        dt,
        tol,
        max_iters: raw.max_iters.unwrap_or(100_000),
        grid,
    })
}
