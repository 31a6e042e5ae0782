//! Brute-force ground truth for node-exact instances.
//!
//! [`exactify`] turns a problem whose Euler feet all land on grid nodes into a
//! finite game; [`brute_value`] solves that game by memoised finite-horizon
//! recursion. Nothing here calls into the solver.

use std::collections::HashMap;

use crate::error::{GameError, Result};
use crate::grid::ValueGrid;
use crate::problem::GameProblem;
use crate::solver::{Convention, SchemeParams};

const SNAP: f64 = 1e-9;
const HORIZON_TOL: f64 = 1e-13;

/// What happens at a state besides continuing play.
#[derive(Clone, Copy, Debug, PartialEq)]
pub enum StopRule {
    Continue,
    /// The minimiser may stop and pay `psi_x`.
    ExitX(f64),
    /// The maximiser may stop and collect `psi_y`.
    ExitY(f64),
    /// Both boundaries: the continuation value is clamped between the two.
    Corner { psi_x: f64, psi_y: f64 },
}

impl StopRule {
    fn apply(self, s: f64) -> f64 {
        match self {
            StopRule::Continue => s,
            StopRule::ExitX(px) => {
                if px < s {
                    px
                } else {
                    s
                }
            }
            StopRule::ExitY(py) => {
                if py > s {
                    py
                } else {
                    s
                }
            }
            StopRule::Corner { psi_x, psi_y } => {
                let (lo, hi) = if psi_y <= psi_x { (psi_y, psi_x) } else { (psi_x, psi_y) };
                if s < lo {
                    lo
                } else if s > hi {
                    hi
                } else {
                    s
                }
            }
        }
    }

    fn magnitude(self) -> f64 {
        match self {
            StopRule::Continue => 0.0,
            StopRule::ExitX(v) | StopRule::ExitY(v) => v.abs(),
            StopRule::Corner { psi_x, psi_y } => psi_x.abs().max(psi_y.abs()),
        }
    }
}

/// A finite discounted game: at state `s` the players pick `(a, b)`, the
/// minimiser pays `stage[s][a][b]` and play moves to `next[s][a][b]`.
#[derive(Clone, Debug, PartialEq)]
pub struct DiscreteGame {
    n_a: usize,
    n_b: usize,
    next: Vec<usize>,
    stage: Vec<f64>,
    discount: f64,
    stop: Vec<StopRule>,
}

impl DiscreteGame {
    pub fn new(n_a: usize, n_b: usize, next: Vec<usize>, stage: Vec<f64>, discount: f64, stop: Vec<StopRule>) -> Result<Self> {
        let n = stop.len();
        if n == 0 || n_a == 0 || n_b == 0 {
            return Err(GameError::NotExactifiable("empty state or control space".into()));
        }
        if next.len() != n * n_a * n_b || stage.len() != next.len() {
            return Err(GameError::DimensionMismatch(format!(
                "transition tables need {} entries, got {} and {}",
                n * n_a * n_b,
                next.len(),
                stage.len()
            )));
        }
        if let Some(&bad) = next.iter().find(|&&s| s >= n) {
            return Err(GameError::NotExactifiable(format!("transition to unknown state {bad}")));
        }
        if !(0.0..1.0).contains(&discount) {
            return Err(GameError::NotExactifiable(format!("discount factor {discount} not in [0, 1)")));
        }
        if stage.iter().any(|c| !c.is_finite()) {
            return Err(GameError::NotExactifiable("non-finite stage cost".into()));
        }
        Ok(Self {
            n_a,
            n_b,
            next,
            stage,
            discount,
            stop,
        })
    }

    pub fn states(&self) -> usize {
        self.stop.len()
    }

    pub fn controls(&self) -> (usize, usize) {
        (self.n_a, self.n_b)
    }

    pub fn discount(&self) -> f64 {
        self.discount
    }

    pub fn next(&self, s: usize, a: usize, b: usize) -> usize {
        self.next[(s * self.n_a + a) * self.n_b + b]
    }

    pub fn stage(&self, s: usize, a: usize, b: usize) -> f64 {
        self.stage[(s * self.n_a + a) * self.n_b + b]
    }

    pub fn stop(&self, s: usize) -> StopRule {
        self.stop[s]
    }

    /// The same game with state `s` renamed `perm[s]`.
    pub fn relabel(&self, perm: &[usize]) -> Result<Self> {
        let n = self.states();
        let mut seen = vec![false; n];
        if perm.len() != n || perm.iter().any(|&t| t >= n || std::mem::replace(&mut seen[t], true)) {
            return Err(GameError::DimensionMismatch("relabelling must be a permutation".into()));
        }
        let per = self.n_a * self.n_b;
        let mut next = vec![0; n * per];
        let mut stage = vec![0.0; n * per];
        let mut stop = vec![StopRule::Continue; n];
        for s in 0..n {
            let t = perm[s];
            stop[t] = self.stop[s];
            for k in 0..per {
                next[t * per + k] = perm[self.next[s * per + k]];
                stage[t * per + k] = self.stage[s * per + k];
            }
        }
        Self::new(self.n_a, self.n_b, next, stage, self.discount, stop)
    }

    /// Bound on any value: stage costs summed geometrically, or a stop payoff.
    fn value_bound(&self) -> f64 {
        let c = self.stage.iter().fold(0.0f64, |m, v| m.max(v.abs()));
        let psi = self.stop.iter().fold(0.0f64, |m, r| m.max(r.magnitude()));
        c / (1.0 - self.discount) + psi
    }

    /// Smallest horizon `N` with `discount^N · bound < 1e-13`.
    pub fn horizon(&self) -> usize {
        let m = self.value_bound();
        if m == 0.0 || self.discount == 0.0 {
            return 1;
        }
        ((HORIZON_TOL / m).ln() / self.discount.ln()).ceil().max(1.0) as usize
    }
}

fn axis_index(c: f64, lo: f64, h: f64, n: usize) -> Option<usize> {
    let r = ((c - lo) / h).round();
    if r < 0.0 || r > (n - 1) as f64 {
        return None;
    }
    let node = lo + r * h;
    ((node - c).abs() <= SNAP).then_some(r as usize)
}

fn on_face(z: &[f64], lo: &[f64], hi: &[f64]) -> bool {
    z.iter()
        .zip(lo.iter().zip(hi))
        .any(|(&c, (&l, &u))| (c - l).abs() <= SNAP || (c - u).abs() <= SNAP)
}

/// The finite game the scheme solves on `g`, provided every clamped Euler
/// foot is a grid node (within `1e-9`).
pub fn exactify(p: &GameProblem, g: &ValueGrid, sp: &SchemeParams) -> Result<DiscreteGame> {
    let dt = sp.dt;
    if !(dt > 0.0) {
        return Err(GameError::InvalidScheme(format!("dt must be positive, got {dt}")));
    }
    let (n, m) = (p.n(), p.m());
    let dims = g.nodes_per_axis().to_vec();
    let mut lo = p.omega_x().lo().to_vec();
    lo.extend_from_slice(p.omega_y().lo());
    let mut hi = p.omega_x().hi().to_vec();
    hi.extend_from_slice(p.omega_y().hi());
    if dims.len() != n + m || dims.iter().any(|&k| k < 2) {
        return Err(GameError::DimensionMismatch("grid does not match the problem".into()));
    }
    let h: Vec<f64> = (0..n + m).map(|i| (hi[i] - lo[i]) / (dims[i] - 1) as f64).collect();
    let na = p.controls_a().len();
    let nb = p.controls_b().len();
    let total: usize = dims.iter().product();
    let mut next = Vec::with_capacity(total * na * nb);
    let mut stage = Vec::with_capacity(total * na * nb);
    let mut stop = Vec::with_capacity(total);

    let mut idx = vec![0usize; dims.len()];
    for _ in 0..total {
        let z: Vec<f64> = (0..dims.len())
            .map(|i| if idx[i] + 1 == dims[i] { hi[i] } else { lo[i] + idx[i] as f64 * h[i] })
            .collect();
        let (x, y) = z.split_at(n);
        for a in p.controls_a().points() {
            for b in p.controls_b().points() {
                let vx = p.velocity_x(x, a, b);
                let vy = p.velocity_y(y, b);
                let mut flat = 0;
                for i in 0..n + m {
                    let v = if i < n { vx[i] } else { vy[i - n] };
                    let c = (z[i] + dt * v).max(lo[i]).min(hi[i]);
                    let k = axis_index(c, lo[i], h[i], dims[i]).ok_or_else(|| {
                        GameError::NotExactifiable(format!("foot coordinate {c} on axis {i} from {z:?} is off-node"))
                    })?;
                    flat = flat * dims[i] + k;
                }
                next.push(flat);
                stage.push(dt * p.running(x, y, a, b));
            }
        }
        let bx = on_face(x, p.omega_x().lo(), p.omega_x().hi());
        let by = on_face(y, p.omega_y().lo(), p.omega_y().hi());
        stop.push(match (bx, by) {
            (false, false) => StopRule::Continue,
            (true, false) => StopRule::ExitX(p.costs().exit_x(x, y)),
            (false, true) => StopRule::ExitY(p.costs().exit_y(x, y)),
            (true, true) => StopRule::Corner {
                psi_x: p.costs().exit_x(x, y),
                psi_y: p.costs().exit_y(x, y),
            },
        });
        for i in (0..dims.len()).rev() {
            idx[i] += 1;
            if idx[i] < dims[i] {
                break;
            }
            idx[i] = 0;
        }
    }
    DiscreteGame::new(na, nb, next, stage, (-p.discount() * dt).exp(), stop)
}

struct Memo<'a> {
    d: &'a DiscreteGame,
    conv: Convention,
    table: HashMap<(usize, usize), f64>,
}

impl Memo<'_> {
    /// Value of the game truncated to `k` remaining moves, zero afterwards.
    fn value(&mut self, k: usize, s: usize) -> f64 {
        if k == 0 {
            return 0.0;
        }
        if let Some(&v) = self.table.get(&(k, s)) {
            return v;
        }
        let (na, nb) = self.d.controls();
        let rho = self.d.discount();
        let mut payoff = vec![vec![0.0; nb]; na];
        for (a, row) in payoff.iter_mut().enumerate() {
            for (b, cell) in row.iter_mut().enumerate() {
                let t = self.d.next(s, a, b);
                *cell = self.d.stage(s, a, b) + rho * self.value(k - 1, t);
            }
        }
        let cont = match self.conv {
            Convention::Lower => (0..nb)
                .map(|b| (0..na).map(|a| payoff[a][b]).fold(f64::INFINITY, f64::min))
                .fold(f64::NEG_INFINITY, f64::max),
            Convention::Upper => payoff
                .iter()
                .map(|row| row.iter().copied().fold(f64::NEG_INFINITY, f64::max))
                .fold(f64::INFINITY, f64::min),
        };
        let v = self.d.stop(s).apply(cont);
        self.table.insert((k, s), v);
        v
    }
}

/// Value per state of `d` under `conv`, from a horizon long enough that the
/// truncation error is below `1e-13`.
pub fn brute_value(d: &DiscreteGame, conv: Convention) -> Vec<f64> {
    let horizon = d.horizon();
    let d = d.clone();
    // recursion depth equals the horizon; give it room
    std::thread::Builder::new()
        .stack_size((64 << 20) | (horizon * 1024))
        .spawn(move || {
            let mut memo = Memo {
                d: &d,
                conv,
                table: HashMap::new(),
            };
            (0..d.states()).map(|s| memo.value(horizon, s)).collect::<Vec<_>>()
        })
        .expect("spawn oracle thread")
        .join()
        .expect("oracle thread panicked")
}
