//! Uniform tensor grids on `Ω̄_X × Ω̄_Y`, boundary-role tags and multilinear
//! interpolation.

use std::fmt;
use std::io::Write;

use crate::error::{GameError, Result};
use crate::problem::GameProblem;
use crate::solver::Convention;

/// Where a node sits relative to the three boundary strata.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum NodeRole {
    Interior,
    XFace,
    YFace,
    Corner,
}

impl NodeRole {
    pub fn on_x_boundary(self) -> bool {
        matches!(self, NodeRole::XFace | NodeRole::Corner)
    }

    pub fn on_y_boundary(self) -> bool {
        matches!(self, NodeRole::YFace | NodeRole::Corner)
    }

    pub fn tag(self) -> &'static str {
        match self {
            NodeRole::Interior => "INTERIOR",
            NodeRole::XFace => "X_FACE",
            NodeRole::YFace => "Y_FACE",
            NodeRole::Corner => "CORNER",
        }
    }
}

impl fmt::Display for NodeRole {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.tag())
    }
}

/// Grid resolution plus safety caps.
#[derive(Clone, Debug, PartialEq)]
pub struct GridSpec {
    /// Nodes per axis, x axes first then y axes.
    pub nodes: Vec<usize>,
    pub max_dim: usize,
    pub max_nodes: usize,
}

impl GridSpec {
    pub fn new(nodes: Vec<usize>) -> Self {
        Self {
            nodes,
            max_dim: 4,
            max_nodes: 4_000_000,
        }
    }

    /// Same node count on every axis of a problem with `dim` axes.
    pub fn uniform(dim: usize, nodes: usize) -> Self {
        Self::new(vec![nodes; dim])
    }
}

/// How a grid's values were produced; feedback synthesis needs it.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct SolveMeta {
    pub convention: Convention,
    pub dt: f64,
}

#[derive(Clone, Debug)]
pub struct ValueGrid {
    n: usize,
    lo: Vec<f64>,
    hi: Vec<f64>,
    h: Vec<f64>,
    nodes: Vec<usize>,
    strides: Vec<usize>,
    values: Vec<f64>,
    roles: Vec<NodeRole>,
    pub meta: Option<SolveMeta>,
}

/// Snap threshold (in cell units) for treating a coordinate as a node.
const SNAP: f64 = 1e-10;

pub fn build_grid(p: &GameProblem, spec: &GridSpec) -> Result<ValueGrid> {
    let n = p.n();
    let m = p.m();
    let d = n + m;
    if spec.nodes.len() != d {
        return Err(GameError::DimensionMismatch(format!(
            "grid has {} axes, problem has {d}",
            spec.nodes.len()
        )));
    }
    if d > spec.max_dim.min(8) {
        return Err(GameError::GridTooLarge(format!(
            "{d} state dimensions exceed the cap of {}",
            spec.max_dim.min(8)
        )));
    }
    if let Some(k) = spec.nodes.iter().position(|&k| k < 2) {
        return Err(GameError::InvalidScheme(format!("axis {k} needs at least 2 nodes")));
    }
    let total = spec
        .nodes
        .iter()
        .try_fold(1usize, |acc, &k| acc.checked_mul(k))
        .filter(|&t| t <= spec.max_nodes)
        .ok_or_else(|| {
            GameError::GridTooLarge(format!(
                "{:?} nodes per axis exceed the cap of {} nodes",
                spec.nodes, spec.max_nodes
            ))
        })?;
    let lo: Vec<f64> = p.omega_x().lo().iter().chain(p.omega_y().lo()).copied().collect();
    let hi: Vec<f64> = p.omega_x().hi().iter().chain(p.omega_y().hi()).copied().collect();
    let h = (0..d).map(|i| (hi[i] - lo[i]) / (spec.nodes[i] - 1) as f64).collect();
    let mut strides = vec![1; d];
    for i in (0..d.saturating_sub(1)).rev() {
        strides[i] = strides[i + 1] * spec.nodes[i + 1];
    }
    let mut g = ValueGrid {
        n,
        lo,
        hi,
        h,
        nodes: spec.nodes.clone(),
        strides,
        values: vec![0.0; total],
        roles: Vec::with_capacity(total),
        meta: None,
    };
    for idx in 0..total {
        let mi = g.multi_index(idx);
        let edge = |i: usize| mi[i] == 0 || mi[i] == g.nodes[i] - 1;
        let on_x = (0..n).any(edge);
        let on_y = (n..d).any(edge);
        g.roles.push(match (on_x, on_y) {
            (false, false) => NodeRole::Interior,
            (true, false) => NodeRole::XFace,
            (false, true) => NodeRole::YFace,
            (true, true) => NodeRole::Corner,
        });
    }
    Ok(g)
}

impl ValueGrid {
    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub fn dim(&self) -> usize {
        self.nodes.len()
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn nodes_per_axis(&self) -> &[usize] {
        &self.nodes
    }

    pub fn spacing(&self) -> &[f64] {
        &self.h
    }

    pub fn min_spacing(&self) -> f64 {
        self.h.iter().copied().fold(f64::INFINITY, f64::min)
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn values_mut(&mut self) -> &mut [f64] {
        &mut self.values
    }

    pub fn set_values(&mut self, values: Vec<f64>) -> Result<()> {
        if values.len() != self.values.len() {
            return Err(GameError::DimensionMismatch(format!(
                "{} values for a grid of {} nodes",
                values.len(),
                self.values.len()
            )));
        }
        self.values = values;
        Ok(())
    }

    pub fn roles(&self) -> &[NodeRole] {
        &self.roles
    }

    pub fn role(&self, idx: usize) -> NodeRole {
        self.roles[idx]
    }

    /// `[interior, x_face, y_face, corner]`
    pub fn role_counts(&self) -> [usize; 4] {
        let mut c = [0; 4];
        for r in &self.roles {
            c[match r {
                NodeRole::Interior => 0,
                NodeRole::XFace => 1,
                NodeRole::YFace => 2,
                NodeRole::Corner => 3,
            }] += 1;
        }
        c
    }

    pub fn multi_index(&self, mut idx: usize) -> Vec<usize> {
        let mut mi = vec![0; self.dim()];
        for i in 0..self.dim() {
            mi[i] = idx / self.strides[i];
            idx %= self.strides[i];
        }
        mi
    }

    pub fn flat_index(&self, mi: &[usize]) -> usize {
        mi.iter().zip(&self.strides).map(|(i, s)| i * s).sum()
    }

    fn axis_coord(&self, axis: usize, i: usize) -> f64 {
        if i == self.nodes[axis] - 1 {
            self.hi[axis]
        } else {
            self.lo[axis] + i as f64 * self.h[axis]
        }
    }

    /// Joint coordinates `(x, y)` of a node, concatenated.
    pub fn coords(&self, idx: usize) -> Vec<f64> {
        self.multi_index(idx)
            .iter()
            .enumerate()
            .map(|(axis, &i)| self.axis_coord(axis, i))
            .collect()
    }

    pub fn node_point(&self, idx: usize) -> (Vec<f64>, Vec<f64>) {
        let mut z = self.coords(idx);
        let y = z.split_off(self.n);
        (z, y)
    }

    pub fn contains(&self, z: &[f64]) -> bool {
        z.len() == self.dim()
            && (0..self.dim()).all(|i| {
                let s = SNAP * self.h[i];
                z[i] >= self.lo[i] - s && z[i] <= self.hi[i] + s
            })
    }

    /// Cell index and local coordinate in `[0, 1]` along one axis.
    fn locate(&self, axis: usize, v: f64) -> (usize, f64) {
        let mut t = (v - self.lo[axis]) / self.h[axis];
        let r = t.round();
        if (t - r).abs() < SNAP {
            t = r;
        }
        let last = self.nodes[axis] - 2;
        let t = t.clamp(0.0, (last + 1) as f64);
        let i = (t.floor() as usize).min(last);
        (i, t - i as f64)
    }

    /// Nonzero multilinear weights at `z` (caller guarantees `z` in the box).
    pub fn stencil_into(&self, z: &[f64], out: &mut Vec<(usize, f64)>) {
        out.clear();
        let d = self.dim();
        let mut base = 0;
        let mut frac = [0.0; 8];
        for axis in 0..d {
            let (i, w) = self.locate(axis, z[axis]);
            base += i * self.strides[axis];
            frac[axis] = w;
        }
        for corner in 0..(1usize << d) {
            let mut w = 1.0;
            let mut idx = base;
            for axis in 0..d {
                if corner >> axis & 1 == 1 {
                    w *= frac[axis];
                    idx += self.strides[axis];
                } else {
                    w *= 1.0 - frac[axis];
                }
                if w == 0.0 {
                    break;
                }
            }
            if w != 0.0 {
                out.push((idx, w));
            }
        }
    }

    pub fn stencil(&self, z: &[f64]) -> Vec<(usize, f64)> {
        let mut out = Vec::with_capacity(1 << self.dim());
        self.stencil_into(z, &mut out);
        out
    }

    /// Interpolates `values` (same layout as this grid) at `z`.
    pub fn interpolate_with(&self, values: &[f64], z: &[f64]) -> Result<f64> {
        if !self.contains(z) {
            return Err(GameError::OutsideGrid { point: z.to_vec() });
        }
        Ok(self.stencil(z).iter().map(|&(i, w)| w * values[i]).sum())
    }

    pub fn interpolate(&self, z: &[f64]) -> Result<f64> {
        self.interpolate_with(&self.values, z)
    }

    /// Interpolation at `(x, y)` given separately.
    pub fn value_at(&self, x: &[f64], y: &[f64]) -> Result<f64> {
        let z: Vec<f64> = x.iter().chain(y).copied().collect();
        self.interpolate(&z)
    }

    /// Index of the node at `z`, if `z` is a node up to the snap tolerance.
    pub fn node_at(&self, z: &[f64]) -> Option<usize> {
        if !self.contains(z) {
            return None;
        }
        let mut idx = 0;
        for axis in 0..self.dim() {
            let t = (z[axis] - self.lo[axis]) / self.h[axis];
            let r = t.round();
            if (t - r).abs() > 1e-9 {
                return None;
            }
            idx += (r as usize).min(self.nodes[axis] - 1) * self.strides[axis];
        }
        Some(idx)
    }

    /// One CSV row per node: coordinates, role tag, value.
    pub fn write_csv<W: Write>(&self, mut w: W) -> std::io::Result<()> {
        let mut header: Vec<String> = (0..self.n).map(|i| format!("x{i}")).collect();
        header.extend((0..self.dim() - self.n).map(|i| format!("y{i}")));
        header.push("role".into());
        header.push("value".into());
        writeln!(w, "{}", header.join(","))?;
        for idx in 0..self.len() {
            for c in self.coords(idx) {
                write!(w, "{c},")?;
            }
            writeln!(w, "{},{}", self.roles[idx], self.values[idx])?;
        }
        Ok(())
    }

    pub fn sup_distance(&self, other: &ValueGrid) -> f64 {
        self.values
            .iter()
            .zip(&other.values)
            .map(|(a, b)| (a - b).abs())
            .fold(0.0, f64::max)
    }
}
