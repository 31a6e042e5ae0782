//! Semi-Lagrangian value iteration for the lower and upper values.
//!
//! One sweep computes, at every node,
//! `S = opt { dt·ℓ + e^{−λ dt} · I[v](clamped Euler foot) }`
//! (LOWER: `max_b min_a`; UPPER: `min_a max_b`) and then applies the
//! boundary operator of the node's role: `min(ψ_X, S)` on X faces,
//! `max(ψ_Y, S)` on Y faces, and a clamp between the two at corners.
//! `ψ_XY` takes no part here; it only enters the simulator's accounting.

use std::fmt;

use rayon::prelude::*;

use crate::error::{GameError, Result};
use crate::grid::{NodeRole, SolveMeta, ValueGrid};
use crate::problem::GameProblem;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum Convention {
    /// Lower value: outer max over `b`, inner min over `a`.
    Lower,
    /// Upper value: outer min over `a`, inner max over `b`.
    Upper,
}

impl fmt::Display for Convention {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Convention::Lower => "LOWER",
            Convention::Upper => "UPPER",
        })
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct SchemeParams {
    pub dt: f64,
    pub tol: f64,
    pub max_iters: usize,
    pub convention: Convention,
}

impl SchemeParams {
    pub fn new(dt: f64, tol: f64, max_iters: usize, convention: Convention) -> Self {
        Self {
            dt,
            tol,
            max_iters,
            convention,
        }
    }

    pub fn with_convention(mut self, convention: Convention) -> Self {
        self.convention = convention;
        self
    }

    /// Checks `dt·λ < 1` and `dt·M ≤ h_min` against a problem and grid.
    pub fn check(&self, p: &GameProblem, g: &ValueGrid) -> Result<()> {
        if !(self.dt > 0.0 && self.dt.is_finite()) {
            return Err(GameError::InvalidScheme(format!("dt must be positive, got {}", self.dt)));
        }
        if !(self.tol > 0.0) {
            return Err(GameError::InvalidScheme(format!("tol must be positive, got {}", self.tol)));
        }
        if self.max_iters == 0 {
            return Err(GameError::InvalidScheme("max_iters must be positive".into()));
        }
        if self.dt * p.discount() >= 1.0 {
            return Err(GameError::InvalidScheme(format!(
                "dt * lambda = {} must be below 1",
                self.dt * p.discount()
            )));
        }
        let h = g.min_spacing();
        if self.dt * p.dynamics().bound() > h * (1.0 + 1e-12) {
            return Err(GameError::InvalidScheme(format!(
                "dt * M = {} exceeds the smallest cell size {h}",
                self.dt * p.dynamics().bound()
            )));
        }
        Ok(())
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct SolveReport {
    pub convention: Convention,
    pub iterations: usize,
    pub final_residual: f64,
    /// Largest ratio of successive sweep residuals (0 if fewer than two
    /// informative sweeps).
    pub contraction_estimate: f64,
    /// Corner nodes where `ψ_Y > ψ_X`, so the clamp bounds were swapped.
    pub boundary_violations: usize,
    pub residuals: Vec<f64>,
}

/// Clamps the foot of `(x, y)` to the closed boxes and concatenates it.
pub fn clamped_foot(p: &GameProblem, x: &[f64], y: &[f64], a: &[f64], b: &[f64], dt: f64) -> Vec<f64> {
    let fx = p.velocity_x(x, a, b);
    let gy = p.velocity_y(y, b);
    let ox = p.omega_x();
    let oy = p.omega_y();
    let mut z = Vec::with_capacity(x.len() + y.len());
    for i in 0..x.len() {
        z.push((x[i] + dt * fx[i]).clamp(ox.lo()[i], ox.hi()[i]));
    }
    for j in 0..y.len() {
        z.push((y[j] + dt * gy[j]).clamp(oy.lo()[j], oy.hi()[j]));
    }
    z
}

/// One-step payoffs `dt·ℓ + e^{−λ dt} I[values](foot)` at `(x, y)`, laid
/// out `[a][b]`.
pub fn q_table(p: &GameProblem, g: &ValueGrid, values: &[f64], x: &[f64], y: &[f64], dt: f64) -> Vec<f64> {
    let rho = (-p.discount() * dt).exp();
    let mut stencil = Vec::with_capacity(1 << g.dim());
    let mut table = Vec::with_capacity(p.controls_a().len() * p.controls_b().len());
    for a in p.controls_a().points() {
        for b in p.controls_b().points() {
            let z = clamped_foot(p, x, y, a, b, dt);
            g.stencil_into(&z, &mut stencil);
            let v: f64 = stencil.iter().map(|&(i, w)| w * values[i]).sum();
            table.push(dt * p.running(x, y, a, b) + rho * v);
        }
    }
    table
}

/// Discrete min-max of a `[a][b]` table under `conv`, first-index ties.
/// Returns `(a*, b*, value)`; for LOWER `b*` is the outer maximiser and `a*`
/// the best reply to it, for UPPER the roles swap.
pub fn discrete_opt(table: &[f64], na: usize, nb: usize, conv: Convention) -> (usize, usize, f64) {
    match conv {
        Convention::Lower => {
            let mut best = (0, 0, f64::NEG_INFINITY);
            for j in 0..nb {
                let mut inner = (0, f64::INFINITY);
                for i in 0..na {
                    let v = table[i * nb + j];
                    if v < inner.1 {
                        inner = (i, v);
                    }
                }
                if inner.1 > best.2 {
                    best = (inner.0, j, inner.1);
                }
            }
            best
        }
        Convention::Upper => {
            let mut best = (0, 0, f64::INFINITY);
            for i in 0..na {
                let mut inner = (0, f64::NEG_INFINITY);
                for j in 0..nb {
                    let v = table[i * nb + j];
                    if v > inner.1 {
                        inner = (j, v);
                    }
                }
                if inner.1 < best.2 {
                    best = (i, inner.0, inner.1);
                }
            }
            best
        }
    }
}

/// Boundary operator of a node role; `psi_x`/`psi_y` are read only where
/// the role needs them.
pub fn boundary_operator(role: NodeRole, s: f64, psi_x: f64, psi_y: f64) -> f64 {
    match role {
        NodeRole::Interior => s,
        NodeRole::XFace => s.min(psi_x),
        NodeRole::YFace => s.max(psi_y),
        NodeRole::Corner => s.clamp(psi_y.min(psi_x), psi_y.max(psi_x)),
    }
}

fn exit_data(p: &GameProblem, role: NodeRole, x: &[f64], y: &[f64]) -> (f64, f64) {
    let psi_x = if role.on_x_boundary() { p.costs().exit_x(x, y) } else { 0.0 };
    let psi_y = if role.on_y_boundary() { p.costs().exit_y(x, y) } else { 0.0 };
    (psi_x, psi_y)
}

/// The scheme's update at one node, evaluated directly from the problem.
pub fn bellman_update(p: &GameProblem, g: &ValueGrid, sp: &SchemeParams, node: usize) -> f64 {
    bellman_update_with(p, g, g.values(), sp, node)
}

fn bellman_update_with(p: &GameProblem, g: &ValueGrid, values: &[f64], sp: &SchemeParams, node: usize) -> f64 {
    let (x, y) = g.node_point(node);
    let t = q_table(p, g, values, &x, &y, sp.dt);
    let (_, _, s) = discrete_opt(&t, p.controls_a().len(), p.controls_b().len(), sp.convention);
    let role = g.role(node);
    let (psi_x, psi_y) = exit_data(p, role, &x, &y);
    boundary_operator(role, s, psi_x, psi_y)
}

/// Precomputed running costs, interpolation stencils and exit costs.
struct Plan {
    na: usize,
    nb: usize,
    rho: f64,
    cost: Vec<f64>,
    start: Vec<u32>,
    idx: Vec<u32>,
    w: Vec<f64>,
    psi_x: Vec<f64>,
    psi_y: Vec<f64>,
}

/// Plans larger than this many stencil entries fall back to direct evaluation.
const PLAN_CAP: usize = 30_000_000;

impl Plan {
    fn build(p: &GameProblem, g: &ValueGrid, dt: f64) -> Option<Self> {
        let na = p.controls_a().len();
        let nb = p.controls_b().len();
        let entries = g.len().checked_mul(na * nb)?.checked_mul(1 << g.dim())?;
        if entries > PLAN_CAP || g.len() * na * nb >= u32::MAX as usize {
            return None;
        }
        let per_node: Vec<(Vec<f64>, Vec<u32>, Vec<u32>, Vec<f64>, f64, f64)> = (0..g.len())
            .into_par_iter()
            .map(|node| {
                let (x, y) = g.node_point(node);
                let mut cost = Vec::with_capacity(na * nb);
                let mut lens = Vec::with_capacity(na * nb);
                let mut idx = Vec::new();
                let mut w = Vec::new();
                let mut st = Vec::with_capacity(1 << g.dim());
                for a in p.controls_a().points() {
                    for b in p.controls_b().points() {
                        cost.push(dt * p.running(&x, &y, a, b));
                        g.stencil_into(&clamped_foot(p, &x, &y, a, b, dt), &mut st);
                        lens.push(st.len() as u32);
                        for &(i, wi) in &st {
                            idx.push(i as u32);
                            w.push(wi);
                        }
                    }
                }
                let (px, py) = exit_data(p, g.role(node), &x, &y);
                (cost, lens, idx, w, px, py)
            })
            .collect();
        let mut plan = Plan {
            na,
            nb,
            rho: (-p.discount() * dt).exp(),
            cost: Vec::with_capacity(g.len() * na * nb),
            start: Vec::with_capacity(g.len() * na * nb + 1),
            idx: Vec::new(),
            w: Vec::new(),
            psi_x: Vec::with_capacity(g.len()),
            psi_y: Vec::with_capacity(g.len()),
        };
        plan.start.push(0);
        for (cost, lens, idx, w, px, py) in per_node {
            plan.cost.extend(cost);
            for l in lens {
                let last = *plan.start.last().unwrap();
                plan.start.push(last + l);
            }
            plan.idx.extend(idx);
            plan.w.extend(w);
            plan.psi_x.push(px);
            plan.psi_y.push(py);
        }
        Some(plan)
    }

    #[inline]
    fn q(&self, e: usize, old: &[f64]) -> f64 {
        let (s, t) = (self.start[e] as usize, self.start[e + 1] as usize);
        let v: f64 = self.idx[s..t]
            .iter()
            .zip(&self.w[s..t])
            .map(|(&i, &w)| w * old[i as usize])
            .sum();
        self.cost[e] + self.rho * v
    }

    fn update(&self, node: usize, role: NodeRole, old: &[f64], conv: Convention) -> f64 {
        let base = node * self.na * self.nb;
        let (na, nb) = (self.na, self.nb);
        let s = match conv {
            Convention::Lower => {
                let mut outer = f64::NEG_INFINITY;
                for j in 0..nb {
                    let mut inner = f64::INFINITY;
                    for i in 0..na {
                        inner = inner.min(self.q(base + i * nb + j, old));
                    }
                    outer = outer.max(inner);
                }
                outer
            }
            Convention::Upper => {
                let mut outer = f64::INFINITY;
                for i in 0..na {
                    let mut inner = f64::NEG_INFINITY;
                    for j in 0..nb {
                        inner = inner.max(self.q(base + i * nb + j, old));
                    }
                    outer = outer.min(inner);
                }
                outer
            }
        };
        boundary_operator(role, s, self.psi_x[node], self.psi_y[node])
    }
}

/// Corner nodes where the exit-cost ordering `ψ_Y ≤ ψ_X` fails.
pub fn corner_violations(p: &GameProblem, g: &ValueGrid) -> usize {
    (0..g.len())
        .filter(|&i| g.role(i) == NodeRole::Corner)
        .filter(|&i| {
            let (x, y) = g.node_point(i);
            p.costs().exit_y(&x, &y) > p.costs().exit_x(&x, &y)
        })
        .count()
}

/// Jacobi value iteration from the values in `g` until the sup-norm change
/// of a sweep is at most `tol`.
pub fn solve(p: &GameProblem, g: &ValueGrid, sp: &SchemeParams) -> Result<(ValueGrid, SolveReport)> {
    sp.check(p, g)?;
    let plan = Plan::build(p, g, sp.dt);
    let mut old = g.values().to_vec();
    let mut new = old.clone();
    let mut residuals = Vec::new();
    let mut contraction: f64 = 0.0;
    for _ in 0..sp.max_iters {
        let res = match &plan {
            Some(plan) => new
                .par_iter_mut()
                .enumerate()
                .map(|(i, out)| {
                    *out = plan.update(i, g.role(i), &old, sp.convention);
                    (*out - old[i]).abs()
                })
                .reduce(|| 0.0, f64::max),
            None => new
                .par_iter_mut()
                .enumerate()
                .map(|(i, out)| {
                    *out = bellman_update_with(p, g, &old, sp, i);
                    (*out - old[i]).abs()
                })
                .reduce(|| 0.0, f64::max),
        };
        if !res.is_finite() {
            return Err(GameError::NonConvergence {
                iterations: residuals.len() + 1,
                residual: res,
            });
        }
        if let Some(&prev) = residuals.last() {
            let scale = new.iter().fold(1.0f64, |m, v: &f64| m.max(v.abs()));
            if prev > 1e-9 * scale {
                contraction = contraction.max(res / prev);
            }
        }
        residuals.push(res);
        std::mem::swap(&mut old, &mut new);
        if res <= sp.tol {
            let mut out = g.clone();
            out.set_values(old)?;
            out.meta = Some(SolveMeta {
                convention: sp.convention,
                dt: sp.dt,
            });
            return Ok((
                out,
                SolveReport {
                    convention: sp.convention,
                    iterations: residuals.len(),
                    final_residual: res,
                    contraction_estimate: contraction,
                    boundary_violations: corner_violations(p, g),
                    residuals,
                },
            ));
        }
    }
    Err(GameError::NonConvergence {
        iterations: sp.max_iters,
        residual: residuals.last().copied().unwrap_or(f64::NAN),
    })
}

/// Worst violations of `V ≤ ψ_X` on X-boundary nodes and `V ≥ ψ_Y` on
/// Y-boundary nodes (corners count for both); negative means slack.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct BoundaryGaps {
    pub x_nodes: usize,
    /// `max (V − ψ_X)`
    pub x_excess: f64,
    pub y_nodes: usize,
    /// `max (ψ_Y − V)`
    pub y_deficit: f64,
}

impl BoundaryGaps {
    pub fn holds(&self, tol: f64) -> bool {
        self.x_excess <= tol && self.y_deficit <= tol
    }
}

pub fn boundary_gaps(p: &GameProblem, g: &ValueGrid) -> BoundaryGaps {
    let mut out = BoundaryGaps {
        x_nodes: 0,
        x_excess: f64::NEG_INFINITY,
        y_nodes: 0,
        y_deficit: f64::NEG_INFINITY,
    };
    for i in 0..g.len() {
        let role = g.role(i);
        let (x, y) = g.node_point(i);
        let v = g.values()[i];
        if role.on_x_boundary() {
            out.x_nodes += 1;
            out.x_excess = out.x_excess.max(v - p.costs().exit_x(&x, &y));
        }
        if role.on_y_boundary() {
            out.y_nodes += 1;
            out.y_deficit = out.y_deficit.max(p.costs().exit_y(&x, &y) - v);
        }
    }
    out
}

#[derive(Clone, Debug)]
pub struct BothSolution {
    pub lower: ValueGrid,
    pub upper: ValueGrid,
    pub lower_report: SolveReport,
    pub upper_report: SolveReport,
    /// `max_node |V̄ − V̲|`
    pub gap: f64,
}

pub fn solve_both(p: &GameProblem, g: &ValueGrid, sp: &SchemeParams) -> Result<BothSolution> {
    let (lower, lower_report) = solve(p, g, &sp.with_convention(Convention::Lower))?;
    let (upper, upper_report) = solve(p, g, &sp.with_convention(Convention::Upper))?;
    let gap = lower.sup_distance(&upper);
    Ok(BothSolution {
        lower,
        upper,
        lower_report,
        upper_report,
        gap,
    })
}
