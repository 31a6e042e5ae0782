//! Control signals, non-anticipating strategies, and the constrained
//! (boundary-respecting) tunings of signals and strategies.
//!
//! A strategy for one player maps the opponent's whole control signal to
//! its own. All maps built here are non-anticipating: step `k` of the
//! response depends only on steps `0..=k` of the input.

use std::fmt;
use std::io::Write;
use std::sync::Arc;

use rand::Rng;

use crate::error::{GameError, Result};
use crate::grid::ValueGrid;
use crate::linalg;
use crate::problem::{BoxDomain, ControlSet, GameProblem};
use crate::solver::{q_table, Convention};

pub use crate::problem::Player;

/// Piecewise-constant control path: sample `k` acts on `[k dt, (k+1) dt)`.
/// Past the last sample the signal repeats it.
#[derive(Clone, Debug, PartialEq)]
pub struct ControlSignal {
    dt: f64,
    samples: Vec<Vec<f64>>,
}

impl ControlSignal {
    pub fn new(dt: f64, samples: Vec<Vec<f64>>) -> Result<Self> {
        if !(dt > 0.0 && dt.is_finite()) {
            return Err(GameError::InvalidSignal(format!("dt must be positive, got {dt}")));
        }
        if samples.is_empty() {
            return Err(GameError::InvalidSignal("signal has no samples".into()));
        }
        let d = samples[0].len();
        if samples.iter().any(|s| s.len() != d) {
            return Err(GameError::InvalidSignal("samples have mixed dimensions".into()));
        }
        Ok(Self { dt, samples })
    }

    pub fn constant(dt: f64, control: &[f64], steps: usize) -> Result<Self> {
        Self::new(dt, vec![control.to_vec(); steps.max(1)])
    }

    /// Signal of `steps` samples drawn from `set` in runs of random length
    /// (1 to `max_run` steps).
    pub fn random<R: Rng + ?Sized>(rng: &mut R, set: &ControlSet, dt: f64, steps: usize, max_run: usize) -> Self {
        let mut samples = Vec::with_capacity(steps);
        while samples.len() < steps.max(1) {
            let c = set.get(rng.random_range(0..set.len()));
            let run = rng.random_range(1..=max_run.max(1));
            for _ in 0..run {
                samples.push(c.to_vec());
            }
        }
        samples.truncate(steps.max(1));
        Self { dt, samples }
    }

    pub fn dt(&self) -> f64 {
        self.dt
    }

    pub fn len(&self) -> usize {
        self.samples.len()
    }

    pub fn is_empty(&self) -> bool {
        self.samples.is_empty()
    }

    pub fn horizon(&self) -> f64 {
        self.dt * self.samples.len() as f64
    }

    pub fn samples(&self) -> &[Vec<f64>] {
        &self.samples
    }

    pub fn at(&self, k: usize) -> &[f64] {
        &self.samples[k.min(self.samples.len() - 1)]
    }

    pub fn validate(&self, set: &ControlSet) -> Result<()> {
        for (k, s) in self.samples.iter().enumerate() {
            if set.index_of(s).is_none() {
                return Err(GameError::InvalidSignal(format!(
                    "sample {k} = {s:?} is not in the control set"
                )));
            }
        }
        Ok(())
    }

    pub fn prefix(&self, k: usize) -> Self {
        Self {
            dt: self.dt,
            samples: self.samples[..k.clamp(1, self.samples.len())].to_vec(),
        }
    }

    /// First step where the two signals differ (within the shorter length).
    pub fn first_difference(&self, other: &ControlSignal) -> Option<usize> {
        self.samples.iter().zip(&other.samples).position(|(a, b)| a != b)
    }

    /// Equal on steps `0..k`.
    pub fn agrees_with(&self, other: &ControlSignal, k: usize) -> bool {
        k <= self.len() && k <= other.len() && self.samples[..k] == other.samples[..k]
    }

    /// CSV rows `step,time,c0,c1,...`.
    pub fn write_csv<W: Write>(&self, mut w: W) -> std::io::Result<()> {
        let d = self.samples[0].len();
        let cols: Vec<String> = (0..d).map(|i| format!("c{i}")).collect();
        writeln!(w, "step,time,{}", cols.join(","))?;
        for (k, s) in self.samples.iter().enumerate() {
            let vals: Vec<String> = s.iter().map(|v| v.to_string()).collect();
            writeln!(w, "{k},{},{}", k as f64 * self.dt, vals.join(","))?;
        }
        Ok(())
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum StrategyKind {
    Feedback,
    Tuned,
    User,
}

impl fmt::Display for StrategyKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            StrategyKind::Feedback => "FEEDBACK",
            StrategyKind::Tuned => "TUNED",
            StrategyKind::User => "USER",
        })
    }
}

trait Respond: Send + Sync {
    fn respond(&self, start: (&[f64], &[f64]), opponent: &ControlSignal) -> Result<ControlSignal>;
}

/// Non-anticipating map from the opponent's signals to `player`'s signals.
#[derive(Clone)]
pub struct StrategyMap {
    player: Player,
    kind: StrategyKind,
    inner: Arc<dyn Respond>,
}

impl fmt::Debug for StrategyMap {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("StrategyMap")
            .field("player", &self.player)
            .field("kind", &self.kind)
            .finish_non_exhaustive()
    }
}

struct FnStrategy<F>(F);

impl<F> Respond for FnStrategy<F>
where
    F: Fn(usize, &[Vec<f64>]) -> Vec<f64> + Send + Sync,
{
    fn respond(&self, _start: (&[f64], &[f64]), opponent: &ControlSignal) -> Result<ControlSignal> {
        let samples = (0..opponent.len())
            .map(|k| (self.0)(k, &opponent.samples()[..=k]))
            .collect();
        ControlSignal::new(opponent.dt(), samples)
    }
}

impl StrategyMap {
    /// User strategy: step `k` is `f(k, opponent[0..=k])`, non-anticipating
    /// by construction.
    pub fn from_fn<F>(player: Player, f: F) -> Self
    where
        F: Fn(usize, &[Vec<f64>]) -> Vec<f64> + Send + Sync + 'static,
    {
        Self {
            player,
            kind: StrategyKind::User,
            inner: Arc::new(FnStrategy(f)),
        }
    }

    pub fn constant(player: Player, control: Vec<f64>) -> Self {
        Self::from_fn(player, move |_, _| control.clone())
    }

    /// Ignores the opponent and plays a fixed signal (repeating its last sample).
    pub fn open_loop(player: Player, signal: ControlSignal) -> Self {
        Self::from_fn(player, move |k, _| signal.at(k).to_vec())
    }

    pub fn player(&self) -> Player {
        self.player
    }

    pub fn kind(&self) -> StrategyKind {
        self.kind
    }

    /// Response to `opponent` for a play starting at `start = (x, y)`.
    /// Tuned maps carry their own start points and ignore `start`.
    pub fn respond(&self, start: (&[f64], &[f64]), opponent: &ControlSignal) -> Result<ControlSignal> {
        self.inner.respond(start, opponent)
    }
}

struct Feedback {
    problem: GameProblem,
    grid: Arc<ValueGrid>,
    player: Player,
    dt: f64,
    scheme_dt: f64,
    convention: Convention,
}

impl Feedback {
    fn choose(&self, x: &[f64], y: &[f64], opp: &[f64]) -> Result<Vec<f64>> {
        let p = &self.problem;
        let (na, nb) = (p.controls_a().len(), p.controls_b().len());
        let t = q_table(p, &self.grid, self.grid.values(), x, y, self.scheme_dt);
        let opp_index = |set: &ControlSet| {
            set.index_of(opp)
                .ok_or_else(|| GameError::InvalidSignal(format!("opponent control {opp:?} is not in its control set")))
        };
        match (self.player, self.convention) {
            (Player::X, conv) => {
                let (mut best, mut value) = (0, f64::INFINITY);
                match conv {
                    Convention::Lower => {
                        let j = opp_index(p.controls_b())?;
                        for i in 0..na {
                            if t[i * nb + j] < value {
                                (best, value) = (i, t[i * nb + j]);
                            }
                        }
                    }
                    Convention::Upper => {
                        for i in 0..na {
                            let worst = (0..nb).map(|j| t[i * nb + j]).fold(f64::NEG_INFINITY, f64::max);
                            if worst < value {
                                (best, value) = (i, worst);
                            }
                        }
                    }
                }
                if p.omega_x().on_boundary(x) && p.costs().exit_x(x, y) < value {
                    if let Some(i) = self.outward_x(x) {
                        best = i;
                    }
                }
                Ok(p.controls_a().get(best).to_vec())
            }
            (Player::Y, conv) => {
                let (mut best, mut value) = (0, f64::NEG_INFINITY);
                match conv {
                    Convention::Lower => {
                        for j in 0..nb {
                            let worst = (0..na).map(|i| t[i * nb + j]).fold(f64::INFINITY, f64::min);
                            if worst > value {
                                (best, value) = (j, worst);
                            }
                        }
                    }
                    Convention::Upper => {
                        let i = opp_index(p.controls_a())?;
                        for j in 0..nb {
                            if t[i * nb + j] > value {
                                (best, value) = (j, t[i * nb + j]);
                            }
                        }
                    }
                }
                if p.omega_y().on_boundary(y) && p.costs().exit_y(x, y) > value {
                    if let Some(j) = self.outward_y(y) {
                        best = j;
                    }
                }
                Ok(p.controls_b().get(best).to_vec())
            }
        }
    }

    /// Control leaving the box fastest (worst case over the opponent), if any leaves.
    fn outward_x(&self, x: &[f64]) -> Option<usize> {
        let p = &self.problem;
        let faces = p.omega_x().active_faces(x);
        let mut best = (None, 0.0);
        for (i, a) in p.controls_a().points().iter().enumerate() {
            let speed = p
                .controls_b()
                .points()
                .iter()
                .flat_map(|b| {
                    let v = p.velocity_x(x, a, b);
                    faces.iter().map(move |f| -f.inward_component(&v)).collect::<Vec<_>>()
                })
                .fold(f64::INFINITY, f64::min);
            if speed > best.1 {
                best = (Some(i), speed);
            }
        }
        best.0
    }

    fn outward_y(&self, y: &[f64]) -> Option<usize> {
        let p = &self.problem;
        let faces = p.omega_y().active_faces(y);
        let mut best = (None, 0.0);
        for (j, b) in p.controls_b().points().iter().enumerate() {
            let v = p.velocity_y(y, b);
            let speed = faces.iter().map(|f| -f.inward_component(&v)).fold(f64::INFINITY, f64::min);
            if speed > best.1 {
                best = (Some(j), speed);
            }
        }
        best.0
    }
}

impl Respond for Feedback {
    fn respond(&self, start: (&[f64], &[f64]), opponent: &ControlSignal) -> Result<ControlSignal> {
        let p = &self.problem;
        if (opponent.dt() - self.dt).abs() > 1e-12 * self.dt {
            return Err(GameError::InvalidSignal(format!(
                "opponent signal has dt {}, strategy steps with {}",
                opponent.dt(),
                self.dt
            )));
        }
        let (mut x, mut y) = (start.0.to_vec(), start.1.to_vec());
        let fallback = match self.player {
            Player::X => p.controls_a().get(0).to_vec(),
            Player::Y => p.controls_b().get(0).to_vec(),
        };
        let mut over = !(p.omega_x().contains(&x) && p.omega_y().contains(&y));
        let mut out = Vec::with_capacity(opponent.len());
        for k in 0..opponent.len() {
            if over {
                out.push(fallback.clone());
                continue;
            }
            let opp = opponent.at(k);
            let own = self.choose(&x, &y, opp)?;
            let (a, b) = match self.player {
                Player::X => (own.as_slice(), opp),
                Player::Y => (opp, own.as_slice()),
            };
            let x1 = linalg::axpy(&x, self.dt, &p.velocity_x(&x, a, b));
            let y1 = linalg::axpy(&y, self.dt, &p.velocity_y(&y, b));
            over = p.omega_x().crossing_fraction(&x, &x1).is_some()
                || p.omega_y().crossing_fraction(&y, &y1).is_some();
            out.push(own);
            x = x1;
            y = y1;
        }
        ControlSignal::new(opponent.dt(), out)
    }
}

/// Strategy reading the optimising control off a solved grid at the current
/// simulated state. The inner optimiser of the grid's convention also sees
/// the opponent's current control; the outer one does not. A player standing
/// on its own boundary exits when its exit cost beats continuing.
pub fn feedback_strategy(p: &GameProblem, g: &ValueGrid, player: Player, dt: f64) -> Result<StrategyMap> {
    let meta = g
        .meta
        .ok_or_else(|| GameError::InvalidStrategy("value grid was not produced by the solver".into()))?;
    if !(dt > 0.0) {
        return Err(GameError::InvalidStrategy(format!("dt must be positive, got {dt}")));
    }
    Ok(StrategyMap {
        player,
        kind: StrategyKind::Feedback,
        inner: Arc::new(Feedback {
            problem: p.clone(),
            grid: Arc::new(g.clone()),
            player,
            dt,
            scheme_dt: meta.dt,
            convention: meta.convention,
        }),
    })
}

#[derive(Clone, Debug, PartialEq)]
pub enum EpsMode {
    /// `e^{L t*} ‖z1 − z2‖`, independent of the controls.
    GronwallBound,
    /// Largest exterior distance reached from `z2` over a finite probe
    /// family, before `z1` exits or `t*` passes. Diagnostic only.
    Sampled { probes: Vec<ControlSignal> },
}

#[derive(Clone, Debug, PartialEq)]
pub struct SonerParams {
    pub t_star: f64,
    pub k_gain: f64,
    pub zeta: f64,
    pub c_tilde: f64,
    pub eps_mode: EpsMode,
}

impl SonerParams {
    /// Gain `k = 2 / (ζ − C̃)`; requires `ζ > C̃`.
    pub fn auto(t_star: f64, zeta: f64, c_tilde: f64) -> Result<Self> {
        if !(t_star > 0.0) {
            return Err(GameError::InvalidStrategy(format!("t_star must be positive, got {t_star}")));
        }
        if !(zeta > c_tilde) || !zeta.is_finite() {
            return Err(GameError::MarginTooSmall { zeta, c_tilde });
        }
        Ok(Self {
            t_star,
            k_gain: 2.0 / (zeta - c_tilde),
            zeta,
            c_tilde,
            eps_mode: EpsMode::GronwallBound,
        })
    }

    /// Margins taken from a controllability report for `player`.
    pub fn from_report(report: &crate::problem::ControllabilityReport, player: Player, t_star: f64) -> Result<Self> {
        match player {
            Player::X => Self::auto(t_star, report.zeta_x, report.c_tilde),
            Player::Y => Self::auto(t_star, report.zeta_y, 0.0),
        }
    }
}

fn domain(p: &GameProblem, player: Player) -> &BoxDomain {
    match player {
        Player::X => p.omega_x(),
        Player::Y => p.omega_y(),
    }
}

/// Excursion bound `ε` for the tuning of `player` between start points
/// `z1` (reference) and `z2` (constrained), ignoring any coupling.
pub fn epsilon_bound(p: &GameProblem, z1: &[f64], z2: &[f64], sp: &SonerParams, player: Player) -> f64 {
    match &sp.eps_mode {
        EpsMode::GronwallBound => (p.dynamics().lipschitz() * sp.t_star).exp() * linalg::dist(z1, z2),
        EpsMode::Sampled { probes } => probes
            .iter()
            .map(|probe| sampled_excursion(p, z1, z2, sp.t_star, player, probe))
            .fold(0.0, f64::max),
    }
}

fn sampled_excursion(p: &GameProblem, z1: &[f64], z2: &[f64], t_star: f64, player: Player, probe: &ControlSignal) -> f64 {
    let dom = domain(p, player);
    let dt = probe.dt();
    let b_ref = p.controls_b().get(0).to_vec();
    let step = |z: &[f64], c: &[f64]| match player {
        Player::X => linalg::axpy(z, dt, &p.velocity_x(z, c, &b_ref)),
        Player::Y => linalg::axpy(z, dt, &p.velocity_y(z, c)),
    };
    let (mut u, mut w) = (z1.to_vec(), z2.to_vec());
    let mut eps: f64 = dom.exterior_distance(&w);
    let steps = (t_star / dt - 1e-9).ceil() as usize;
    for k in 0..steps {
        let u1 = step(&u, probe.at(k));
        let w1 = step(&w, probe.at(k));
        if let Some((theta, _)) = dom.exit_point(&u, &u1) {
            let wt = linalg::axpy(&w, theta, &linalg::sub(&w1, &w));
            eps = eps.max(dom.exterior_distance(&wt));
            break;
        }
        eps = eps.max(dom.exterior_distance(&w1));
        u = u1;
        w = w1;
    }
    eps
}

/// Excursion bound for X under the weakly coupled drift `f(x) + G a + D b`:
/// the Gronwall bound plus the drift gap caused by playing `β` against
/// `β̃`, which differ on at most `4 · n_legs · ⌈k_Y ε_Y / dt⌉ dt` worth of
/// `|D b|` per leg of X.
pub fn epsilon_bound_coupled(
    p: &GameProblem,
    (x1, x2): (&[f64], &[f64]),
    (y1, y2): (&[f64], &[f64]),
    sx: &SonerParams,
    sy: &SonerParams,
    dt: f64,
) -> f64 {
    let base = linalg::dist(x1, x2);
    let drift_gap = match p.dynamics().coupling() {
        Some(d) => {
            let eps_y = epsilon_bound(p, y1, y2, sy, Player::Y);
            let legs = (sx.t_star / sy.t_star - 1e-9).ceil().max(1.0);
            let inserted = insertion_steps(sy.k_gain, eps_y, dt) as f64 * dt;
            4.0 * d.frobenius() * p.controls_b().max_norm() * legs * inserted
        }
        None => 0.0,
    };
    (p.dynamics().lipschitz() * sx.t_star).exp() * (base + drift_gap)
}

/// `⌈k ε / dt⌉`, with a relative guard against rounding up exact multiples.
pub fn insertion_steps(k_gain: f64, eps: f64, dt: f64) -> usize {
    let r = k_gain * eps / dt;
    if r <= 0.0 {
        0
    } else {
        (r * (1.0 - 1e-12)).ceil() as usize
    }
}

/// Result of a tuning pass.
#[derive(Clone, Debug, PartialEq)]
pub struct Tuning {
    pub signal: ControlSignal,
    /// Steps inserted in total.
    pub inserted: usize,
    /// Output step at which each insertion started.
    pub insert_at: Vec<usize>,
}

/// Core of the construction: copy `source` while the trajectory from
/// `start` stays off the boundary; at the first contact in each leg of
/// length `t_star` insert `n_insert` steps of an inward control at the
/// contact point, then continue copying `source` delayed. Stops tuning once
/// the trajectory has left the box.
fn soner_tune(
    dom: &BoxDomain,
    start: &[f64],
    source: &ControlSignal,
    n_insert: usize,
    t_star: f64,
    step: impl Fn(usize, &[f64], &[f64]) -> Vec<f64>,
    inward: impl Fn(&[f64]) -> Result<Vec<f64>>,
) -> Result<Tuning> {
    let dt = source.dt();
    let mut out: Vec<Vec<f64>> = Vec::with_capacity(source.len() + n_insert);
    let mut insert_at = Vec::new();
    let mut z = start.to_vec();
    let mut last_leg: Option<usize> = None;
    let mut alive = dom.contains(&z);
    let mut j = 0;
    while j < source.len() {
        let k = out.len();
        let c = source.at(j);
        if alive && n_insert > 0 {
            let leg = (k as f64 * dt / t_star + 1e-9).floor() as usize;
            if last_leg != Some(leg) {
                let next = step(k, &z, c);
                if let Some((_, hit)) = dom.first_contact(&z, &next) {
                    let c0 = inward(&hit)?;
                    insert_at.push(k);
                    for _ in 0..n_insert {
                        z = step(out.len(), &z, &c0);
                        out.push(c0.clone());
                    }
                    last_leg = Some(leg);
                    if !dom.contains(&z) {
                        alive = false;
                    }
                    continue;
                }
            }
        }
        let next = step(k, &z, c);
        if dom.crossing_fraction(&z, &next).is_some() {
            alive = false;
        }
        z = next;
        out.push(c.to_vec());
        j += 1;
    }
    Ok(Tuning {
        signal: ControlSignal::new(dt, out)?,
        inserted: insert_at.len() * n_insert,
        insert_at,
    })
}

/// Tunes the maximiser's signal `beta` so the trajectory from `y2` stays in
/// `Ω̄_Y` at least as long as the one from `y1` under `beta`.
pub fn tune_control(p: &GameProblem, beta: &ControlSignal, y1: &[f64], y2: &[f64], sp: &SonerParams) -> Result<ControlSignal> {
    Ok(tune_control_detailed(p, beta, y1, y2, sp)?.signal)
}

pub fn tune_control_detailed(
    p: &GameProblem,
    beta: &ControlSignal,
    y1: &[f64],
    y2: &[f64],
    sp: &SonerParams,
) -> Result<Tuning> {
    beta.validate(p.controls_b())?;
    let dt = beta.dt();
    let eps = epsilon_bound(p, y1, y2, sp, Player::Y);
    let n = insertion_steps(sp.k_gain, eps, dt);
    soner_tune(
        p.omega_y(),
        y2,
        beta,
        n,
        sp.t_star,
        |_, y, b| linalg::axpy(y, dt, &p.velocity_y(y, b)),
        |hit| {
            let (j, _) = p.inward_control(Player::Y, hit)?;
            Ok(p.controls_b().get(j).to_vec())
        },
    )
}

struct Tuned {
    problem: GameProblem,
    gamma: StrategyMap,
    x1: Vec<f64>,
    x2: Vec<f64>,
    y1: Vec<f64>,
    y2: Vec<f64>,
    sx: SonerParams,
    sy: SonerParams,
}

/// Everything a tuned response is built from; handy for certification.
#[derive(Clone, Debug)]
pub struct TunedResponse {
    pub beta_tilde: Tuning,
    /// `γ[β̃]`, the untuned response played from `(x2, y2)`.
    pub alpha: ControlSignal,
    /// `γ̃[β]`, the tuned response played from `x1` against `β`.
    pub alpha_tilde: Tuning,
}

impl Tuned {
    fn full(&self, beta: &ControlSignal) -> Result<TunedResponse> {
        let p = &self.problem;
        let dt = beta.dt();
        let beta_tilde = tune_control_detailed(p, beta, &self.y1, &self.y2, &self.sy)?;
        let alpha = self.gamma.respond((&self.x2, &self.y2), &beta_tilde.signal)?;
        let eps = epsilon_bound_coupled(
            p,
            (&self.x1, &self.x2),
            (&self.y1, &self.y2),
            &self.sx,
            &self.sy,
            dt,
        );
        let n = insertion_steps(self.sx.k_gain, eps, dt);
        let alpha_tilde = soner_tune(
            p.omega_x(),
            &self.x1,
            &alpha,
            n,
            self.sx.t_star,
            |k, x, a| linalg::axpy(x, dt, &p.velocity_x(x, a, beta.at(k))),
            |hit| {
                let (i, _) = p.inward_control(Player::X, hit)?;
                Ok(p.controls_a().get(i).to_vec())
            },
        )?;
        Ok(TunedResponse {
            beta_tilde,
            alpha,
            alpha_tilde,
        })
    }
}

impl Respond for Tuned {
    fn respond(&self, _start: (&[f64], &[f64]), beta: &ControlSignal) -> Result<ControlSignal> {
        Ok(self.full(beta)?.alpha_tilde.signal)
    }
}

/// Constrained strategy `γ̃` for X built from `gamma`: it tunes the
/// opponent's signal, plays `γ` against the tuned signal from `(x2, y2)`,
/// and applies the same insertion construction to the resulting control
/// along the trajectory from `x1` driven by the actual opponent signal.
pub struct TunedStrategy {
    inner: Arc<Tuned>,
}

impl TunedStrategy {
    pub fn map(&self) -> StrategyMap {
        StrategyMap {
            player: Player::X,
            kind: StrategyKind::Tuned,
            inner: self.inner.clone(),
        }
    }

    pub fn respond_full(&self, beta: &ControlSignal) -> Result<TunedResponse> {
        self.inner.full(beta)
    }
}

pub fn tune_strategy(
    p: &GameProblem,
    gamma: &StrategyMap,
    (x1, x2): (&[f64], &[f64]),
    (y1, y2): (&[f64], &[f64]),
    sx: &SonerParams,
    sy: &SonerParams,
) -> Result<TunedStrategy> {
    if gamma.player() != Player::X {
        return Err(GameError::InvalidStrategy("tune_strategy expects a strategy of player X".into()));
    }
    if p.dynamics().coupling().is_some() && !(sx.zeta > sx.c_tilde) {
        return Err(GameError::MarginTooSmall {
            zeta: sx.zeta,
            c_tilde: sx.c_tilde,
        });
    }
    for (z, dom, name) in [(x1, p.omega_x(), "x1"), (x2, p.omega_x(), "x2"), (y1, p.omega_y(), "y1"), (y2, p.omega_y(), "y2")] {
        if z.len() != dom.dim() || !dom.contains(z) {
            return Err(GameError::InvalidStrategy(format!("{name} = {z:?} is not in its closed domain")));
        }
    }
    Ok(TunedStrategy {
        inner: Arc::new(Tuned {
            problem: p.clone(),
            gamma: gamma.clone(),
            x1: x1.to_vec(),
            x2: x2.to_vec(),
            y1: y1.to_vec(),
            y2: y2.to_vec(),
            sx: sx.clone(),
            sy: sy.clone(),
        }),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::problem::*;

    fn unit_game() -> GameProblem {
        GameProblem::new(
            BoxDomain::new(vec![0.0], vec![1.0]).unwrap(),
            BoxDomain::new(vec![0.0], vec![1.0]).unwrap(),
            Dynamics::new(XDrift::Decoupled(drift(|_, a| a.to_vec())), drift(|_, b| b.to_vec()), 1.0, 1.0).unwrap(),
            ControlSet::scalars(&[-1.0, 0.0, 1.0]).unwrap(),
            ControlSet::scalars(&[-1.0, 0.0, 1.0]).unwrap(),
            Costs::constant(1.0, 0.0, 0.0, 0.0, 1.0).unwrap(),
        )
        .unwrap()
    }

    #[test]
    fn signal_extends_with_last_sample() {
        let s = ControlSignal::new(0.1, vec![vec![1.0], vec![2.0]]).unwrap();
        assert_eq!(s.at(5), &[2.0]);
        assert!((s.horizon() - 0.2).abs() < 1e-15);
        assert!(ControlSignal::new(0.0, vec![vec![1.0]]).is_err());
    }

    #[test]
    fn epsilon_zero_for_equal_points() {
        let p = unit_game();
        let sp = SonerParams::auto(0.25, 1.0, 0.0).unwrap();
        assert_eq!(epsilon_bound(&p, &[0.3], &[0.3], &sp, Player::Y), 0.0);
        assert_eq!(sp.k_gain, 2.0);
    }

    #[test]
    fn margin_must_exceed_coupling() {
        assert!(matches!(SonerParams::auto(0.2, 0.5, 0.5), Err(GameError::MarginTooSmall { .. })));
    }

    #[test]
    fn tuning_without_contact_is_identity() {
        let p = unit_game();
        let sp = SonerParams::auto(0.25, 1.0, 0.0).unwrap();
        let beta = ControlSignal::constant(0.01, &[0.0], 50).unwrap();
        let t = tune_control(&p, &beta, &[0.5], &[0.52], &sp).unwrap();
        assert_eq!(t, beta);
    }

    #[test]
    fn tuning_inserts_inward_steps_at_contact() {
        let p = unit_game();
        let sp = SonerParams::auto(0.25, 1.0, 0.0).unwrap();
        let beta = ControlSignal::constant(0.01, &[-1.0], 20).unwrap();
        let t = tune_control_detailed(&p, &beta, &[0.2], &[0.15], &sp).unwrap();
        let n = insertion_steps(2.0, (0.25f64).exp() * 0.05, 0.01);
        assert_eq!(t.inserted, n);
        assert_eq!(t.signal.len(), 20 + n);
        assert_eq!(t.insert_at, vec![14]);
        assert_eq!(t.signal.at(14), &[1.0]);

        // a later leg may touch again and gets its own insertion
        let long = ControlSignal::constant(0.01, &[-1.0], 40).unwrap();
        let t = tune_control_detailed(&p, &long, &[0.2], &[0.15], &sp).unwrap();
        assert_eq!(t.insert_at.len(), 2);
        assert!(t.insert_at[1] >= 25);
    }

    #[test]
    fn insertion_rounding() {
        assert_eq!(insertion_steps(2.0, 0.0, 0.01), 0);
        assert_eq!(insertion_steps(1.0, 0.03, 0.01), 3);
        assert_eq!(insertion_steps(1.0, 0.0301, 0.01), 4);
    }
}
