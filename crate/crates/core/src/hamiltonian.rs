//! Upper and lower Hamiltonians by enumeration over the finite control sets.
//!
//! With `H(a, b) = −f(x, a, b)·p − g(y, b)·q − ℓ(x, y, a, b)`:
//!
//! * upper: `UH = min_b max_a H`, the Hamiltonian of the lower value;
//! * lower: `LH = max_a min_b H`, the Hamiltonian of the upper value.

use crate::linalg::dot;
use crate::problem::GameProblem;

#[derive(Clone, Debug, PartialEq)]
pub struct Costate {
    pub p: Vec<f64>,
    pub q: Vec<f64>,
}

impl Costate {
    pub fn new(p: Vec<f64>, q: Vec<f64>) -> Self {
        Self { p, q }
    }

    pub fn zero(n: usize, m: usize) -> Self {
        Self {
            p: vec![0.0; n],
            q: vec![0.0; m],
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum HamiltonianKind {
    Upper,
    Lower,
}

/// Optimising control indices for one Hamiltonian, its value, and `UH − LH`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Saddle {
    pub a: usize,
    pub b: usize,
    pub value: f64,
    pub gap: f64,
}

/// `H(a, b)` laid out row-major as `[a][b]`.
fn payoff_table(p: &GameProblem, x: &[f64], y: &[f64], co: &Costate) -> (Vec<f64>, usize) {
    debug_assert_eq!(co.p.len(), p.n());
    debug_assert_eq!(co.q.len(), p.m());
    let nb = p.controls_b().len();
    let gq: Vec<f64> = p
        .controls_b()
        .points()
        .iter()
        .map(|b| dot(&p.velocity_y(y, b), &co.q))
        .collect();
    let mut table = Vec::with_capacity(p.controls_a().len() * nb);
    for a in p.controls_a().points() {
        for (j, b) in p.controls_b().points().iter().enumerate() {
            let fp = dot(&p.velocity_x(x, a, b), &co.p);
            table.push(-fp - gq[j] - p.running(x, y, a, b));
        }
    }
    (table, nb)
}

/// `(argmin_b max_a, argmax_a at that b, value)`
fn min_max(table: &[f64], na: usize, nb: usize) -> (usize, usize, f64) {
    let mut best = (0, 0, f64::INFINITY);
    for j in 0..nb {
        let mut inner = (0, f64::NEG_INFINITY);
        for i in 0..na {
            let v = table[i * nb + j];
            if v > inner.1 {
                inner = (i, v);
            }
        }
        if inner.1 < best.2 {
            best = (inner.0, j, inner.1);
        }
    }
    best
}

/// `(argmax_a min_b, argmin_b at that a, value)`
fn max_min(table: &[f64], na: usize, nb: usize) -> (usize, usize, f64) {
    let mut best = (0, 0, f64::NEG_INFINITY);
    for i in 0..na {
        let mut inner = (0, f64::INFINITY);
        for j in 0..nb {
            let v = table[i * nb + j];
            if v < inner.1 {
                inner = (j, v);
            }
        }
        if inner.1 > best.2 {
            best = (i, inner.0, inner.1);
        }
    }
    best
}

pub fn upper_hamiltonian(p: &GameProblem, x: &[f64], y: &[f64], co: &Costate) -> f64 {
    let (t, nb) = payoff_table(p, x, y, co);
    min_max(&t, p.controls_a().len(), nb).2
}

pub fn lower_hamiltonian(p: &GameProblem, x: &[f64], y: &[f64], co: &Costate) -> f64 {
    let (t, nb) = payoff_table(p, x, y, co);
    max_min(&t, p.controls_a().len(), nb).2
}

pub fn hamiltonian(p: &GameProblem, kind: HamiltonianKind, x: &[f64], y: &[f64], co: &Costate) -> f64 {
    match kind {
        HamiltonianKind::Upper => upper_hamiltonian(p, x, y, co),
        HamiltonianKind::Lower => lower_hamiltonian(p, x, y, co),
    }
}

/// Optimising pair for `kind`, with first-index tie-breaking. The gap is
/// always `UH − LH ≥ 0`, whichever convention is requested.
pub fn saddle_point(p: &GameProblem, kind: HamiltonianKind, x: &[f64], y: &[f64], co: &Costate) -> Saddle {
    let (t, nb) = payoff_table(p, x, y, co);
    let na = p.controls_a().len();
    let up = min_max(&t, na, nb);
    let lo = max_min(&t, na, nb);
    let gap = up.2 - lo.2;
    let (a, b, value) = match kind {
        HamiltonianKind::Upper => up,
        HamiltonianKind::Lower => lo,
    };
    Saddle { a, b, value, gap }
}
