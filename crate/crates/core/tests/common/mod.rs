#![allow(dead_code)]

use std::sync::Arc;

use exitgame::grid::{build_grid, GridSpec, ValueGrid};
use exitgame::problem::{drift, BoxDomain, ControlSet, CostSplit, Costs, Dynamics, GameProblem, XDrift};
use exitgame::solver::{solve, Convention, SchemeParams};

pub fn unit() -> BoxDomain {
    BoxDomain::new(vec![0.0], vec![1.0]).unwrap()
}

pub fn interval(lo: f64, hi: f64) -> BoxDomain {
    BoxDomain::new(vec![lo], vec![hi]).unwrap()
}

pub fn scalars(v: &[f64]) -> ControlSet {
    ControlSet::scalars(v).unwrap()
}

pub type Running = fn(&[f64], &[f64], &[f64], &[f64]) -> f64;

pub fn costs(l: Running, psi: (f64, f64, f64), discount: f64, split: CostSplit) -> Costs {
    Costs::new(
        Arc::new(l),
        Arc::new(move |_, _| psi.0),
        Arc::new(move |_, _| psi.1),
        Arc::new(move |_, _| psi.2),
        discount,
        split,
    )
    .unwrap()
}

/// Single-player exit problem on (0, 1): `x' = a`, unit running cost,
/// exit cost `psi_x`; Y is a motionless dummy on (-1, 1).
pub fn eikonal(psi_x: f64) -> GameProblem {
    GameProblem::new(
        unit(),
        interval(-1.0, 1.0),
        Dynamics::new(XDrift::Decoupled(drift(|_, a| a.to_vec())), drift(|_, _| vec![0.0]), 1.0, 1.0).unwrap(),
        scalars(&[-1.0, 0.0, 1.0]),
        scalars(&[0.0]),
        Costs::constant(1.0, psi_x, 0.0, 0.0, 1.0).unwrap(),
    )
    .unwrap()
}

pub fn eikonal_exact(x: f64) -> f64 {
    1.0 - (-(x.min(1.0 - x))).exp()
}

/// `x' = sx a`, `y' = sy b` on unit intervals with the given control sets,
/// running cost and exit costs `(ψ_X, ψ_Y, ψ_XY)`.
#[allow(clippy::too_many_arguments)]
pub fn integrators(
    a: &[f64],
    b: &[f64],
    speeds: (f64, f64),
    l: Running,
    psi: (f64, f64, f64),
    discount: f64,
    split: CostSplit,
    bound: f64,
) -> GameProblem {
    let (sx, sy) = speeds;
    GameProblem::new(
        unit(),
        unit(),
        Dynamics::new(
            XDrift::Decoupled(drift(move |_, a| vec![sx * a[0]])),
            drift(move |_, b| vec![sy * b[0]]),
            1.0,
            bound,
        )
        .unwrap(),
        scalars(a),
        scalars(b),
        costs(l, psi, discount, split),
    )
    .unwrap()
}

/// The separated-cost pursuit instance used for the strategy suites.
pub fn pursuit() -> GameProblem {
    integrators(
        &[-1.0, 0.0, 1.0],
        &[-1.0, 0.0, 1.0],
        (1.0, 1.0),
        |x, y, a, b| 0.25 * (x[0] - y[0]).powi(2) + 0.25 * a[0].abs() + 0.25 * b[0].abs(),
        (1.0, 0.0, 0.5),
        1.0,
        CostSplit::StateControlSum,
        1.0,
    )
}

/// `f = a`, `g = b`, `A = B = {-1, 1}`, `ℓ = a·b`.
pub fn bilinear() -> GameProblem {
    integrators(
        &[-1.0, 1.0],
        &[-1.0, 1.0],
        (1.0, 1.0),
        |_, _, a, b| a[0] * b[0],
        (0.0, 0.0, 0.0),
        1.0,
        CostSplit::Coupled,
        1.0,
    )
}

pub fn zero_game() -> GameProblem {
    GameProblem::new(
        unit(),
        unit(),
        Dynamics::new(XDrift::Decoupled(drift(|_, _| vec![0.0])), drift(|_, _| vec![0.0]), 1.0, 1.0).unwrap(),
        scalars(&[-1.0, 1.0]),
        scalars(&[-1.0, 1.0]),
        Costs::constant(0.0, 0.0, 0.0, 0.0, 1.0).unwrap(),
    )
    .unwrap()
}

pub fn grid(p: &GameProblem, nodes: &[usize]) -> ValueGrid {
    build_grid(p, &GridSpec::new(nodes.to_vec())).unwrap()
}

pub fn solved(p: &GameProblem, nodes: &[usize], dt: f64, tol: f64, conv: Convention) -> ValueGrid {
    let g = grid(p, nodes);
    solve(p, &g, &SchemeParams::new(dt, tol, 1_000_000, conv)).unwrap().0
}

pub fn bundled(name: &str) -> std::path::PathBuf {
    std::path::Path::new(env!("CARGO_MANIFEST_DIR")).join("examples").join(name)
}
