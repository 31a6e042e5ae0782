//! Euler integration of the joint game, exit detection and classification,
//! discounted cost accounting, and DPP residuals of solved grids.

use std::fmt;
use std::io::Write;

use crate::error::{GameError, Result};
use crate::grid::ValueGrid;
use crate::linalg;
use crate::problem::{BoxDomain, GameProblem};
use crate::solver::{discrete_opt, Convention};
use crate::strategy::{ControlSignal, Player, StrategyMap};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum ExitCase {
    XOnly,
    YOnly,
    Simultaneous,
    Never,
}

impl fmt::Display for ExitCase {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            ExitCase::XOnly => "X_ONLY",
            ExitCase::YOnly => "Y_ONLY",
            ExitCase::Simultaneous => "SIMULTANEOUS",
            ExitCase::Never => "NEVER",
        })
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct GameOutcome {
    pub times: Vec<f64>,
    pub path_x: Vec<Vec<f64>>,
    pub path_y: Vec<Vec<f64>>,
    /// Controls applied on `[times[k], times[k+1])`.
    pub controls_a: Vec<Vec<f64>>,
    pub controls_b: Vec<Vec<f64>>,
    /// `+inf` when not observed.
    pub tau_x: f64,
    pub tau_y: f64,
    pub tau: f64,
    pub exit_case: ExitCase,
    pub cost: f64,
    /// Bound `M e^{−λT} / λ` on the neglected tail for NEVER outcomes, else 0.
    pub tail_bound: f64,
}

impl GameOutcome {
    /// Trajectory rows `t,x...,y...,a...,b...`; the final row (exit or
    /// horizon state) repeats the last controls.
    pub fn write_csv<W: Write>(&self, mut w: W) -> std::io::Result<()> {
        let n = self.path_x.first().map_or(0, Vec::len);
        let m = self.path_y.first().map_or(0, Vec::len);
        let da = self.controls_a.first().map_or(0, Vec::len);
        let db = self.controls_b.first().map_or(0, Vec::len);
        let mut header = vec!["t".to_string()];
        header.extend((0..n).map(|i| format!("x{i}")));
        header.extend((0..m).map(|i| format!("y{i}")));
        header.extend((0..da).map(|i| format!("a{i}")));
        header.extend((0..db).map(|i| format!("b{i}")));
        writeln!(w, "{}", header.join(","))?;
        for k in 0..self.times.len() {
            let kc = k.min(self.controls_a.len().saturating_sub(1));
            let mut row = vec![self.times[k].to_string()];
            row.extend(self.path_x[k].iter().map(f64::to_string));
            row.extend(self.path_y[k].iter().map(f64::to_string));
            if !self.controls_a.is_empty() {
                row.extend(self.controls_a[kc].iter().map(f64::to_string));
                row.extend(self.controls_b[kc].iter().map(f64::to_string));
            }
            writeln!(w, "{}", row.join(","))?;
        }
        Ok(())
    }

    pub fn summary(&self) -> Vec<(String, String)> {
        vec![
            ("tau_x".into(), fmt_time(self.tau_x)),
            ("tau_y".into(), fmt_time(self.tau_y)),
            ("tau".into(), fmt_time(self.tau)),
            ("exit_case".into(), self.exit_case.to_string()),
            ("cost".into(), self.cost.to_string()),
            ("tail_bound".into(), self.tail_bound.to_string()),
        ]
    }
}

fn fmt_time(t: f64) -> String {
    if t.is_finite() {
        t.to_string()
    } else {
        "inf".into()
    }
}

fn check_start(p: &GameProblem, x0: &[f64], y0: &[f64]) -> Result<()> {
    if x0.len() != p.n() || y0.len() != p.m() {
        return Err(GameError::DimensionMismatch(format!(
            "start point has dims ({}, {}), problem has ({}, {})",
            x0.len(),
            y0.len(),
            p.n(),
            p.m()
        )));
    }
    if !p.omega_x().contains(x0) || !p.omega_y().contains(y0) {
        return Err(GameError::Simulation(format!("start ({x0:?}, {y0:?}) is outside the closed domains")));
    }
    Ok(())
}

pub fn horizon_steps(horizon: f64, dt: f64) -> usize {
    ((horizon / dt) * (1.0 - 1e-12)).ceil().max(1.0) as usize
}

/// Integrates both players under the given signals up to the first exit or
/// the horizon.
///
/// Crossing instants are refined linearly inside the step. When only one
/// player crosses in a step, the other is advanced one more step to see
/// whether it crosses within `dt` of the first; if so the exit is
/// SIMULTANEOUS and `ψ_XY` is charged at the two crossing points.
pub fn integrate(
    p: &GameProblem,
    x0: &[f64],
    y0: &[f64],
    alpha: &ControlSignal,
    beta: &ControlSignal,
    horizon: f64,
) -> Result<GameOutcome> {
    if !(horizon > 0.0) {
        return Err(GameError::Simulation(format!("horizon must be positive, got {horizon}")));
    }
    let dt = alpha.dt();
    if (beta.dt() - dt).abs() > 1e-12 * dt {
        return Err(GameError::Simulation(format!(
            "signals have different steps ({dt} and {})",
            beta.dt()
        )));
    }
    check_start(p, x0, y0)?;
    let lambda = p.discount();
    let (ox, oy) = (p.omega_x(), p.omega_y());
    let steps = horizon_steps(horizon, dt);
    let mut out = GameOutcome {
        times: vec![0.0],
        path_x: vec![x0.to_vec()],
        path_y: vec![y0.to_vec()],
        controls_a: Vec::new(),
        controls_b: Vec::new(),
        tau_x: f64::INFINITY,
        tau_y: f64::INFINITY,
        tau: f64::INFINITY,
        exit_case: ExitCase::Never,
        cost: 0.0,
        tail_bound: 0.0,
    };
    let (mut x, mut y) = (x0.to_vec(), y0.to_vec());
    for k in 0..steps {
        let t = k as f64 * dt;
        let (a, b) = (alpha.at(k), beta.at(k));
        let x1 = linalg::axpy(&x, dt, &p.velocity_x(&x, a, b));
        let y1 = linalg::axpy(&y, dt, &p.velocity_y(&y, b));
        let mut ex = ox.exit_point(&x, &x1).map(|(th, z)| (t + th * dt, z));
        let mut ey = oy.exit_point(&y, &y1).map(|(th, z)| (t + th * dt, z));
        out.controls_a.push(a.to_vec());
        out.controls_b.push(b.to_vec());
        if ex.is_none() && ey.is_none() {
            out.cost += (-lambda * t).exp() * p.running(&x, &y, a, b) * dt;
            x = x1;
            y = y1;
            out.times.push(t + dt);
            out.path_x.push(x.clone());
            out.path_y.push(y.clone());
            continue;
        }
        // one more step for the player that has not crossed yet
        let (a2, b2) = (alpha.at(k + 1), beta.at(k + 1));
        if ex.is_none() {
            let x2 = linalg::axpy(&x1, dt, &p.velocity_x(&x1, a2, b2));
            ex = ox.exit_point(&x1, &x2).map(|(th, z)| (t + dt + th * dt, z));
        } else if ey.is_none() {
            let y2 = linalg::axpy(&y1, dt, &p.velocity_y(&y1, b2));
            ey = oy.exit_point(&y1, &y2).map(|(th, z)| (t + dt + th * dt, z));
        }
        let tx = ex.as_ref().map_or(f64::INFINITY, |e| e.0);
        let ty = ey.as_ref().map_or(f64::INFINITY, |e| e.0);
        let tau = tx.min(ty);
        let case = if (tx - ty).abs() <= dt * (1.0 + 1e-9) {
            ExitCase::Simultaneous
        } else if tx < ty {
            ExitCase::XOnly
        } else {
            ExitCase::YOnly
        };
        let s = (tau - t) / dt;
        let x_tau = ox.clamp(&linalg::axpy(&x, s, &linalg::sub(&x1, &x)));
        let y_tau = oy.clamp(&linalg::axpy(&y, s, &linalg::sub(&y1, &y)));
        let (xe, ye, psi) = match case {
            ExitCase::XOnly => {
                let xe = ex.unwrap().1;
                let psi = p.costs().exit_x(&xe, &y_tau);
                (xe, y_tau, psi)
            }
            ExitCase::YOnly => {
                let ye = ey.unwrap().1;
                let psi = p.costs().exit_y(&x_tau, &ye);
                (x_tau, ye, psi)
            }
            _ => {
                let (xe, ye) = (ex.unwrap().1, ey.unwrap().1);
                let psi = p.costs().exit_xy(&xe, &ye);
                (xe, ye, psi)
            }
        };
        out.cost += (-lambda * t).exp() * p.running(&x, &y, a, b) * (tau - t);
        out.cost += (-lambda * tau).exp() * psi;
        out.tau_x = if case == ExitCase::YOnly { f64::INFINITY } else { tx };
        out.tau_y = if case == ExitCase::XOnly { f64::INFINITY } else { ty };
        out.tau = tau;
        out.exit_case = case;
        out.times.push(tau);
        out.path_x.push(xe);
        out.path_y.push(ye);
        return Ok(out);
    }
    let t_end = steps as f64 * dt;
    out.tail_bound = p.dynamics().bound() * (-lambda * t_end).exp() / lambda;
    Ok(out)
}

/// `J(x0, y0, γ[β], β)`: the strategy responds to the whole signal first
/// (non-anticipation makes that equivalent to stepwise play).
pub fn play(
    p: &GameProblem,
    x0: &[f64],
    y0: &[f64],
    gamma: &StrategyMap,
    beta: &ControlSignal,
    horizon: f64,
) -> Result<GameOutcome> {
    if gamma.player() != Player::X {
        return Err(GameError::InvalidStrategy("play expects a strategy of player X".into()));
    }
    let beta = extend(beta, horizon_steps(horizon, beta.dt()) + 1);
    let alpha = gamma.respond((x0, y0), &beta)?;
    integrate(p, x0, y0, &alpha, &beta, horizon)
}

/// `J(x0, y0, α, ξ[α])` for a strategy of player Y.
pub fn play_upper(
    p: &GameProblem,
    x0: &[f64],
    y0: &[f64],
    alpha: &ControlSignal,
    xi: &StrategyMap,
    horizon: f64,
) -> Result<GameOutcome> {
    if xi.player() != Player::Y {
        return Err(GameError::InvalidStrategy("play_upper expects a strategy of player Y".into()));
    }
    let alpha = extend(alpha, horizon_steps(horizon, alpha.dt()) + 1);
    let beta = xi.respond((x0, y0), &alpha)?;
    integrate(p, x0, y0, &alpha, &beta, horizon)
}

fn extend(s: &ControlSignal, len: usize) -> ControlSignal {
    if s.len() >= len {
        return s.clone();
    }
    let samples = (0..len).map(|k| s.at(k).to_vec()).collect();
    ControlSignal::new(s.dt(), samples).expect("extension of a valid signal")
}

/// Trajectory of one player, integrated for the full step count regardless
/// of exits, with the first exit time recorded.
#[derive(Clone, Debug, PartialEq)]
pub struct SoloPath {
    pub dt: f64,
    pub states: Vec<Vec<f64>>,
    pub exit_time: Option<f64>,
}

impl SoloPath {
    /// Linear interpolation of the states at time `t` (clamped to the path).
    pub fn state_at(&self, t: f64) -> Vec<f64> {
        let s = (t / self.dt).max(0.0);
        let k = (s.floor() as usize).min(self.states.len() - 1);
        if k + 1 >= self.states.len() {
            return self.states[k].clone();
        }
        let th = s - k as f64;
        linalg::axpy(&self.states[k], th, &linalg::sub(&self.states[k + 1], &self.states[k]))
    }

    pub fn exit_or(&self, fallback: f64) -> f64 {
        self.exit_time.unwrap_or(fallback)
    }
}

fn solo(dom: &BoxDomain, z0: &[f64], steps: usize, dt: f64, step: impl Fn(usize, &[f64]) -> Vec<f64>) -> SoloPath {
    let mut states = Vec::with_capacity(steps + 1);
    states.push(z0.to_vec());
    let mut exit_time = None;
    for k in 0..steps {
        let z = &states[k];
        let z1 = step(k, z);
        if exit_time.is_none() {
            if let Some(th) = dom.crossing_fraction(z, &z1) {
                exit_time = Some((k as f64 + th) * dt);
            }
        }
        states.push(z1);
    }
    SoloPath { dt, states, exit_time }
}

pub fn solo_path_x(p: &GameProblem, x0: &[f64], alpha: &ControlSignal, beta: &ControlSignal, steps: usize) -> SoloPath {
    let dt = alpha.dt();
    solo(p.omega_x(), x0, steps, dt, |k, x| {
        linalg::axpy(x, dt, &p.velocity_x(x, alpha.at(k), beta.at(k)))
    })
}

pub fn solo_path_y(p: &GameProblem, y0: &[f64], beta: &ControlSignal, steps: usize) -> SoloPath {
    let dt = beta.dt();
    solo(p.omega_y(), y0, steps, dt, |k, y| linalg::axpy(y, dt, &p.velocity_y(y, beta.at(k))))
}

/// Discounted running cost `∫_0^t_end e^{−λs} ℓ ds` along two solo paths,
/// left-endpoint rule with a partial final step.
pub fn running_cost(
    p: &GameProblem,
    px: &SoloPath,
    py: &SoloPath,
    alpha: &ControlSignal,
    beta: &ControlSignal,
    t_end: f64,
) -> f64 {
    let dt = px.dt;
    let mut total = 0.0;
    let mut k = 0;
    while (k as f64) * dt < t_end && k < px.states.len() && k < py.states.len() {
        let t = k as f64 * dt;
        let h = dt.min(t_end - t);
        total += (-p.discount() * t).exp() * p.running(&px.states[k], &py.states[k], alpha.at(k), beta.at(k)) * h;
        k += 1;
    }
    total
}

/// Strided subsample of `0..len` with at most `cap` entries (`cap = 0`
/// keeps everything).
pub fn probe_indices(len: usize, cap: usize) -> Vec<usize> {
    if cap == 0 || cap >= len {
        return (0..len).collect();
    }
    if cap == 1 {
        return vec![0];
    }
    let mut idx: Vec<usize> = (0..cap)
        .map(|i| ((i as f64) * (len - 1) as f64 / (cap - 1) as f64).round() as usize)
        .collect();
    idx.dedup();
    idx
}

/// `|g(z0) − W|` where `W` is the discrete game value over `t / dt` steps
/// of the one-step game tree from `z0` with terminal payoff `g`, exits
/// charged with `g` at the crossing point. Controls per player are capped
/// at `probe_controls` by a strided subsample.
pub fn dpp_residual(p: &GameProblem, g: &ValueGrid, x0: &[f64], y0: &[f64], t: f64, probe_controls: usize) -> Result<f64> {
    let meta = g
        .meta
        .ok_or_else(|| GameError::Simulation("grid has no solver metadata (dt, convention)".into()))?;
    dpp_residual_with(p, g, x0, y0, t, probe_controls, meta.dt, meta.convention)
}

#[allow(clippy::too_many_arguments)]
pub fn dpp_residual_with(
    p: &GameProblem,
    g: &ValueGrid,
    x0: &[f64],
    y0: &[f64],
    t: f64,
    probe_controls: usize,
    dt: f64,
    conv: Convention,
) -> Result<f64> {
    check_start(p, x0, y0)?;
    let k = (t / dt).round();
    if k < 1.0 || (k * dt - t).abs() > 1e-9 * t.max(dt) {
        return Err(GameError::Simulation(format!("t = {t} is not a positive multiple of dt = {dt}")));
    }
    let ia = probe_indices(p.controls_a().len(), probe_controls);
    let ib = probe_indices(p.controls_b().len(), probe_controls);
    let tree = Tree { p, g, dt, conv, ia: &ia, ib: &ib };
    let w = tree.value(x0, y0, k as usize)?;
    Ok((g.value_at(x0, y0)? - w).abs())
}

struct Tree<'a> {
    p: &'a GameProblem,
    g: &'a ValueGrid,
    dt: f64,
    conv: Convention,
    ia: &'a [usize],
    ib: &'a [usize],
}

impl Tree<'_> {
    fn value(&self, x: &[f64], y: &[f64], depth: usize) -> Result<f64> {
        if depth == 0 {
            return self.g.value_at(x, y);
        }
        let p = self.p;
        let lambda = p.discount();
        let dt = self.dt;
        let mut table = Vec::with_capacity(self.ia.len() * self.ib.len());
        for &i in self.ia {
            let a = p.controls_a().get(i);
            for &j in self.ib {
                let b = p.controls_b().get(j);
                let x1 = linalg::axpy(x, dt, &p.velocity_x(x, a, b));
                let y1 = linalg::axpy(y, dt, &p.velocity_y(y, b));
                let thx = p.omega_x().crossing_fraction(x, &x1);
                let thy = p.omega_y().crossing_fraction(y, &y1);
                let l = p.running(x, y, a, b);
                let q = match (thx, thy) {
                    (None, None) => dt * l + (-lambda * dt).exp() * self.value(&x1, &y1, depth - 1)?,
                    _ => {
                        let th = thx.unwrap_or(1.0).min(thy.unwrap_or(1.0));
                        let xe = p.omega_x().clamp(&linalg::axpy(x, th, &linalg::sub(&x1, x)));
                        let ye = p.omega_y().clamp(&linalg::axpy(y, th, &linalg::sub(&y1, y)));
                        th * dt * l + (-lambda * th * dt).exp() * self.g.value_at(&xe, &ye)?
                    }
                };
                table.push(q);
            }
        }
        Ok(discrete_opt(&table, self.ia.len(), self.ib.len(), self.conv).2)
    }
}
