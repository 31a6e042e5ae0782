//! Game data: box domains, finite control sets, dynamics, costs, and the
//! sampling-based validation reports (exit-cost compatibility, boundary
//! controllability, declared constants).

use std::fmt;
use std::sync::Arc;

use crate::error::{GameError, Result};
use crate::linalg::{self, tensor_samples, Matrix};

pub type StateControlFn = Arc<dyn Fn(&[f64], &[f64]) -> Vec<f64> + Send + Sync>;
pub type StateFn = Arc<dyn Fn(&[f64]) -> Vec<f64> + Send + Sync>;
pub type RunningCostFn = Arc<dyn Fn(&[f64], &[f64], &[f64], &[f64]) -> f64 + Send + Sync>;
pub type ExitCostFn = Arc<dyn Fn(&[f64], &[f64]) -> f64 + Send + Sync>;

/// Coordinates closer than this to a face count as lying on it.
pub const BOUNDARY_TOL: f64 = 1e-12;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum Side {
    Lo,
    Hi,
}

/// One face `{z_axis = lo}` or `{z_axis = hi}` of a box.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub struct Face {
    pub axis: usize,
    pub side: Side,
}

impl Face {
    /// Component of `v` along the inward unit normal.
    pub fn inward_component(&self, v: &[f64]) -> f64 {
        match self.side {
            Side::Lo => v[self.axis],
            Side::Hi => -v[self.axis],
        }
    }
}

impl fmt::Display for Face {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let s = match self.side {
            Side::Lo => "lo",
            Side::Hi => "hi",
        };
        write!(f, "{}{}", s, self.axis)
    }
}

/// Axis-aligned box `Π (lo_i, hi_i)`. A zero-dimensional box is a single
/// point with empty boundary, i.e. a player that can never exit.
#[derive(Clone, Debug, PartialEq)]
pub struct BoxDomain {
    lo: Vec<f64>,
    hi: Vec<f64>,
}

impl BoxDomain {
    pub fn new(lo: Vec<f64>, hi: Vec<f64>) -> Result<Self> {
        if lo.len() != hi.len() {
            return Err(GameError::InvalidDomain(format!(
                "lo has {} entries but hi has {}",
                lo.len(),
                hi.len()
            )));
        }
        for (i, (l, h)) in lo.iter().zip(&hi).enumerate() {
            if !(l.is_finite() && h.is_finite() && l < h) {
                return Err(GameError::InvalidDomain(format!(
                    "axis {i}: need finite lo < hi, got [{l}, {h}]"
                )));
            }
        }
        Ok(Self { lo, hi })
    }

    pub fn point() -> Self {
        Self {
            lo: Vec::new(),
            hi: Vec::new(),
        }
    }

    pub fn dim(&self) -> usize {
        self.lo.len()
    }

    pub fn lo(&self) -> &[f64] {
        &self.lo
    }

    pub fn hi(&self) -> &[f64] {
        &self.hi
    }

    pub fn center(&self) -> Vec<f64> {
        self.lo.iter().zip(&self.hi).map(|(l, h)| 0.5 * (l + h)).collect()
    }

    fn slack(&self, i: usize) -> f64 {
        BOUNDARY_TOL * (1.0 + self.lo[i].abs().max(self.hi[i].abs()))
    }

    /// Membership in the closed box, with a rounding slack.
    pub fn contains(&self, z: &[f64]) -> bool {
        (0..self.dim()).all(|i| z[i] >= self.lo[i] - self.slack(i) && z[i] <= self.hi[i] + self.slack(i))
    }

    /// Faces that `z` lies on (within tolerance) or beyond.
    pub fn active_faces(&self, z: &[f64]) -> Vec<Face> {
        let mut faces = Vec::new();
        for i in 0..self.dim() {
            if z[i] <= self.lo[i] + self.slack(i) {
                faces.push(Face { axis: i, side: Side::Lo });
            }
            if z[i] >= self.hi[i] - self.slack(i) {
                faces.push(Face { axis: i, side: Side::Hi });
            }
        }
        faces
    }

    pub fn on_boundary(&self, z: &[f64]) -> bool {
        self.contains(z) && !self.active_faces(z).is_empty()
    }

    pub fn in_interior(&self, z: &[f64]) -> bool {
        self.contains(z) && self.active_faces(z).is_empty()
    }

    pub fn clamp(&self, z: &[f64]) -> Vec<f64> {
        z.iter()
            .enumerate()
            .map(|(i, &v)| v.clamp(self.lo[i], self.hi[i]))
            .collect()
    }

    /// Euclidean distance from `z` to the closed box (0 inside).
    pub fn exterior_distance(&self, z: &[f64]) -> f64 {
        (0..self.dim())
            .map(|i| {
                let e = (self.lo[i] - z[i]).max(z[i] - self.hi[i]).max(0.0);
                e * e
            })
            .sum::<f64>()
            .sqrt()
    }

    pub fn faces(&self) -> Vec<Face> {
        (0..self.dim())
            .flat_map(|axis| [Face { axis, side: Side::Lo }, Face { axis, side: Side::Hi }])
            .collect()
    }

    /// Uniform tensor samples of one face (`per_axis` points along each free axis).
    pub fn face_samples(&self, face: Face, per_axis: usize) -> Vec<Vec<f64>> {
        let mut lo = self.lo.clone();
        let mut hi = self.hi.clone();
        let v = match face.side {
            Side::Lo => self.lo[face.axis],
            Side::Hi => self.hi[face.axis],
        };
        lo.remove(face.axis);
        hi.remove(face.axis);
        tensor_samples(&lo, &hi, per_axis)
            .into_iter()
            .map(|mut p| {
                p.insert(face.axis, v);
                p
            })
            .collect()
    }

    /// Fraction `θ ∈ [0, 1]` along the segment `z0 → z1` at which it first
    /// leaves the closed box, or `None` if `z1` is still inside.
    pub fn crossing_fraction(&self, z0: &[f64], z1: &[f64]) -> Option<f64> {
        let mut theta: Option<f64> = None;
        for i in 0..self.dim() {
            let s = self.slack(i);
            let bound = if z1[i] < self.lo[i] - s {
                self.lo[i]
            } else if z1[i] > self.hi[i] + s {
                self.hi[i]
            } else {
                continue;
            };
            let dz = z1[i] - z0[i];
            let t = if dz == 0.0 { 0.0 } else { ((bound - z0[i]) / dz).clamp(0.0, 1.0) };
            theta = Some(theta.map_or(t, |old: f64| old.min(t)));
        }
        theta
    }

    /// Like [`crossing_fraction`](Self::crossing_fraction), also returning
    /// the crossing point projected onto the closed box.
    pub fn exit_point(&self, z0: &[f64], z1: &[f64]) -> Option<(f64, Vec<f64>)> {
        let theta = self.crossing_fraction(z0, z1)?;
        Some((theta, self.clamp(&linalg::axpy(z0, theta, &linalg::sub(z1, z0)))))
    }

    /// First point of the segment `z0 → z1` lying on the boundary or
    /// beyond, counting a segment that merely touches a face.
    pub fn first_contact(&self, z0: &[f64], z1: &[f64]) -> Option<(f64, Vec<f64>)> {
        if !self.active_faces(z0).is_empty() {
            return Some((0.0, self.clamp(z0)));
        }
        let mut theta: Option<f64> = None;
        for i in 0..self.dim() {
            let s = self.slack(i);
            let bound = if z1[i] <= self.lo[i] + s {
                self.lo[i]
            } else if z1[i] >= self.hi[i] - s {
                self.hi[i]
            } else {
                continue;
            };
            let dz = z1[i] - z0[i];
            let t = if dz == 0.0 { 0.0 } else { ((bound - z0[i]) / dz).clamp(0.0, 1.0) };
            theta = Some(theta.map_or(t, |old: f64| old.min(t)));
        }
        let theta = theta?;
        let mut p = self.clamp(&linalg::axpy(z0, theta, &linalg::sub(z1, z0)));
        // snap the touching coordinates so the point registers as boundary
        for i in 0..self.dim() {
            if (p[i] - self.lo[i]).abs() <= 2.0 * self.slack(i) {
                p[i] = self.lo[i];
            } else if (p[i] - self.hi[i]).abs() <= 2.0 * self.slack(i) {
                p[i] = self.hi[i];
            }
        }
        Some((theta, p))
    }
}

/// Finite sample of a compact control set.
#[derive(Clone, Debug, PartialEq)]
pub struct ControlSet {
    points: Vec<Vec<f64>>,
}

impl ControlSet {
    pub fn new(points: Vec<Vec<f64>>) -> Result<Self> {
        let Some(first) = points.first() else {
            return Err(GameError::InvalidControls("control set is empty".into()));
        };
        let d = first.len();
        for (i, p) in points.iter().enumerate() {
            if p.len() != d {
                return Err(GameError::InvalidControls(format!(
                    "control {i} has dimension {}, expected {d}",
                    p.len()
                )));
            }
            if p.iter().any(|v| !v.is_finite()) {
                return Err(GameError::InvalidControls(format!("control {i} is not finite")));
            }
            if points[..i].contains(p) {
                return Err(GameError::InvalidControls(format!("duplicate control {p:?}")));
            }
        }
        Ok(Self { points })
    }

    /// Scalar controls `{v_0, v_1, ...}`.
    pub fn scalars(values: &[f64]) -> Result<Self> {
        Self::new(values.iter().map(|&v| vec![v]).collect())
    }

    pub fn points(&self) -> &[Vec<f64>] {
        &self.points
    }

    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    pub fn dim(&self) -> usize {
        self.points[0].len()
    }

    pub fn get(&self, i: usize) -> &[f64] {
        &self.points[i]
    }

    pub fn index_of(&self, c: &[f64]) -> Option<usize> {
        self.points.iter().position(|p| p.as_slice() == c)
    }

    pub fn max_norm(&self) -> f64 {
        self.points.iter().map(|p| linalg::norm(p)).fold(0.0, f64::max)
    }
}

/// Drift of player X: either decoupled `f(x, a)` or the weakly coupled
/// affine form `f(x) + G a + D b`.
#[derive(Clone)]
pub enum XDrift {
    Decoupled(StateControlFn),
    Affine {
        base: StateFn,
        input: Matrix,
        coupling: Matrix,
    },
}

impl fmt::Debug for XDrift {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            XDrift::Decoupled(_) => f.write_str("Decoupled(..)"),
            XDrift::Affine { input, coupling, .. } => f
                .debug_struct("Affine")
                .field("input", input)
                .field("coupling", coupling)
                .finish_non_exhaustive(),
        }
    }
}

#[derive(Clone, Debug)]
pub struct Dynamics {
    drift_x: XDrift,
    drift_y: DriftY,
    lipschitz: f64,
    bound: f64,
}

#[derive(Clone)]
struct DriftY(StateControlFn);

impl fmt::Debug for DriftY {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str("DriftY(..)")
    }
}

impl Dynamics {
    pub fn new(drift_x: XDrift, drift_y: StateControlFn, lipschitz: f64, bound: f64) -> Result<Self> {
        if !(lipschitz > 0.0 && lipschitz.is_finite()) {
            return Err(GameError::InvalidDomain(format!("lipschitz constant must be positive, got {lipschitz}")));
        }
        if !(bound > 0.0 && bound.is_finite()) {
            return Err(GameError::InvalidDomain(format!("bound must be positive, got {bound}")));
        }
        Ok(Self {
            drift_x,
            drift_y: DriftY(drift_y),
            lipschitz,
            bound,
        })
    }

    pub fn drift_x(&self) -> &XDrift {
        &self.drift_x
    }

    pub fn lipschitz(&self) -> f64 {
        self.lipschitz
    }

    pub fn bound(&self) -> f64 {
        self.bound
    }

    pub fn coupling(&self) -> Option<&Matrix> {
        match &self.drift_x {
            XDrift::Affine { coupling, .. } if !coupling.is_zero() => Some(coupling),
            _ => None,
        }
    }

    pub fn velocity_x(&self, x: &[f64], a: &[f64], b: &[f64]) -> Vec<f64> {
        match &self.drift_x {
            XDrift::Decoupled(f) => f(x, a),
            XDrift::Affine { base, input, coupling } => {
                let mut v = base(x);
                input.apply_add(a, &mut v);
                coupling.apply_add(b, &mut v);
                v
            }
        }
    }

    /// `f(x) + G a`, the part of the X drift not driven by the opponent.
    pub fn own_velocity_x(&self, x: &[f64], a: &[f64]) -> Option<Vec<f64>> {
        match &self.drift_x {
            XDrift::Decoupled(_) => None,
            XDrift::Affine { base, input, .. } => {
                let mut v = base(x);
                input.apply_add(a, &mut v);
                Some(v)
            }
        }
    }

    pub fn velocity_y(&self, y: &[f64], b: &[f64]) -> Vec<f64> {
        (self.drift_y.0)(y, b)
    }
}

/// Which additive split of the running cost in the controls holds.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum CostSplit {
    /// No split declared.
    Coupled,
    /// `ℓ1(x,y,a) + ℓ2(x,y,b)`.
    Separated,
    /// `ℓ1(x,y) + ℓ2(a) + ℓ3(b)`.
    StateControlSum,
}

impl CostSplit {
    pub fn is_decoupled(self) -> bool {
        self != CostSplit::Coupled
    }

    pub fn is_separated(self) -> bool {
        self != CostSplit::Coupled
    }
}

#[derive(Clone)]
pub struct Costs {
    running: RunningCostFn,
    exit_x: ExitCostFn,
    exit_y: ExitCostFn,
    exit_xy: ExitCostFn,
    discount: f64,
    split: CostSplit,
}

impl fmt::Debug for Costs {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("Costs")
            .field("discount", &self.discount)
            .field("split", &self.split)
            .finish_non_exhaustive()
    }
}

impl Costs {
    pub fn new(
        running: RunningCostFn,
        exit_x: ExitCostFn,
        exit_y: ExitCostFn,
        exit_xy: ExitCostFn,
        discount: f64,
        split: CostSplit,
    ) -> Result<Self> {
        if !(discount > 0.0 && discount.is_finite()) {
            return Err(GameError::InvalidDomain(format!("discount must be positive, got {discount}")));
        }
        Ok(Self {
            running,
            exit_x,
            exit_y,
            exit_xy,
            discount,
            split,
        })
    }

    /// Constant running and exit costs.
    pub fn constant(running: f64, psi_x: f64, psi_y: f64, psi_xy: f64, discount: f64) -> Result<Self> {
        Self::new(
            Arc::new(move |_, _, _, _| running),
            Arc::new(move |_, _| psi_x),
            Arc::new(move |_, _| psi_y),
            Arc::new(move |_, _| psi_xy),
            discount,
            CostSplit::StateControlSum,
        )
    }

    pub fn running(&self, x: &[f64], y: &[f64], a: &[f64], b: &[f64]) -> f64 {
        (self.running)(x, y, a, b)
    }

    pub fn exit_x(&self, x: &[f64], y: &[f64]) -> f64 {
        (self.exit_x)(x, y)
    }

    pub fn exit_y(&self, x: &[f64], y: &[f64]) -> f64 {
        (self.exit_y)(x, y)
    }

    pub fn exit_xy(&self, x: &[f64], y: &[f64]) -> f64 {
        (self.exit_xy)(x, y)
    }

    pub fn discount(&self) -> f64 {
        self.discount
    }

    pub fn split(&self) -> CostSplit {
        self.split
    }

    pub fn decoupled(&self) -> bool {
        self.split.is_decoupled()
    }
}

/// A complete exit-time game instance. Immutable once built; cheap to clone.
#[derive(Clone, Debug)]
pub struct GameProblem {
    omega_x: BoxDomain,
    omega_y: BoxDomain,
    dynamics: Dynamics,
    controls_a: ControlSet,
    controls_b: ControlSet,
    costs: Costs,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Status {
    Pass,
    Warn,
    Fail,
}

impl fmt::Display for Status {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Status::Pass => "PASS",
            Status::Warn => "WARN",
            Status::Fail => "FAIL",
        })
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct CornerViolation {
    pub x: Vec<f64>,
    pub y: Vec<f64>,
    pub psi_y: f64,
    pub psi_xy: f64,
    pub psi_x: f64,
}

#[derive(Clone, Debug, PartialEq)]
pub struct ExitCostReport {
    pub status: Status,
    pub samples: usize,
    pub violations: Vec<CornerViolation>,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Player {
    X,
    Y,
}

/// Controllability check at one sampled boundary point.
#[derive(Clone, Debug, PartialEq)]
pub struct BoundaryCheck {
    pub player: Player,
    pub face: Face,
    pub point: Vec<f64>,
    /// Index of the control with the best worst-case inward speed.
    pub inward: Option<usize>,
    pub outward: Option<usize>,
    /// Best worst-case inward normal speed (positive when an inward control exists).
    pub inward_speed: f64,
    pub outward_speed: f64,
    /// Inward speed of the chosen control without the opponent's term; the
    /// margin `ζ` of the weakly coupled setting. Equals `inward_speed` when
    /// the drift is decoupled.
    pub zeta: f64,
}

impl BoundaryCheck {
    pub fn passed(&self) -> bool {
        self.inward.is_some() && self.outward.is_some()
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct ControllabilityReport {
    pub status: Status,
    pub checks: Vec<BoundaryCheck>,
    /// Smallest margin over passing X points (`+inf` when none sampled).
    pub zeta_x: f64,
    pub zeta_y: f64,
    /// Upper bound for `|D b · ξ|` over faces and `b`; 0 when decoupled.
    pub c_tilde: f64,
}

impl ControllabilityReport {
    pub fn face_status(&self, player: Player, face: Face) -> Status {
        let mut any = false;
        for c in self.checks.iter().filter(|c| c.player == player && c.face == face) {
            any = true;
            if !c.passed() {
                return Status::Fail;
            }
        }
        if any {
            Status::Pass
        } else {
            Status::Warn
        }
    }
}

/// Sampled check of the declared constants and cost signs.
#[derive(Clone, Debug, PartialEq)]
pub struct SpotCheckReport {
    pub status: Status,
    pub max_speed: f64,
    pub bound: f64,
    pub min_cost: f64,
    pub max_cost: f64,
    pub costs_finite: bool,
    pub lipschitz_estimate: f64,
    pub lipschitz: f64,
}

impl GameProblem {
    pub fn new(
        omega_x: BoxDomain,
        omega_y: BoxDomain,
        dynamics: Dynamics,
        controls_a: ControlSet,
        controls_b: ControlSet,
        costs: Costs,
    ) -> Result<Self> {
        let n = omega_x.dim();
        let m = omega_y.dim();
        if n + m == 0 {
            return Err(GameError::DimensionMismatch("both state spaces are zero-dimensional".into()));
        }
        if let XDrift::Affine { input, coupling, .. } = dynamics.drift_x() {
            if input.rows() != n || input.cols() != controls_a.dim() {
                return Err(GameError::DimensionMismatch(format!(
                    "input matrix is {}x{}, expected {}x{}",
                    input.rows(),
                    input.cols(),
                    n,
                    controls_a.dim()
                )));
            }
            if coupling.rows() != n || coupling.cols() != controls_b.dim() {
                return Err(GameError::DimensionMismatch(format!(
                    "coupling matrix is {}x{}, expected {}x{}",
                    coupling.rows(),
                    coupling.cols(),
                    n,
                    controls_b.dim()
                )));
            }
        }
        let xc = omega_x.center();
        let yc = omega_y.center();
        for a in controls_a.points() {
            let v = dynamics.velocity_x(&xc, a, controls_b.get(0));
            if v.len() != n {
                return Err(GameError::DimensionMismatch(format!(
                    "X drift returns {} components, state has {n}",
                    v.len()
                )));
            }
        }
        for b in controls_b.points() {
            let v = dynamics.velocity_y(&yc, b);
            if v.len() != m {
                return Err(GameError::DimensionMismatch(format!(
                    "Y drift returns {} components, state has {m}",
                    v.len()
                )));
            }
        }
        Ok(Self {
            omega_x,
            omega_y,
            dynamics,
            controls_a,
            controls_b,
            costs,
        })
    }

    pub fn omega_x(&self) -> &BoxDomain {
        &self.omega_x
    }

    pub fn omega_y(&self) -> &BoxDomain {
        &self.omega_y
    }

    pub fn dynamics(&self) -> &Dynamics {
        &self.dynamics
    }

    pub fn controls_a(&self) -> &ControlSet {
        &self.controls_a
    }

    pub fn controls_b(&self) -> &ControlSet {
        &self.controls_b
    }

    pub fn costs(&self) -> &Costs {
        &self.costs
    }

    pub fn n(&self) -> usize {
        self.omega_x.dim()
    }

    pub fn m(&self) -> usize {
        self.omega_y.dim()
    }

    pub fn discount(&self) -> f64 {
        self.costs.discount()
    }

    pub fn velocity_x(&self, x: &[f64], a: &[f64], b: &[f64]) -> Vec<f64> {
        self.dynamics.velocity_x(x, a, b)
    }

    pub fn velocity_y(&self, y: &[f64], b: &[f64]) -> Vec<f64> {
        self.dynamics.velocity_y(y, b)
    }

    pub fn running(&self, x: &[f64], y: &[f64], a: &[f64], b: &[f64]) -> f64 {
        self.costs.running(x, y, a, b)
    }

    fn check_point_dims(&self, x: &[f64], y: &[f64]) -> Result<()> {
        if x.len() != self.n() || y.len() != self.m() {
            return Err(GameError::DimensionMismatch(format!(
                "point has dims ({}, {}), problem has ({}, {})",
                x.len(),
                y.len(),
                self.n(),
                self.m()
            )));
        }
        Ok(())
    }

    /// Checks `ψ_Y ≤ ψ_XY ≤ ψ_X` on a uniform tensor sample of the corner set
    /// `∂Ω_X × ∂Ω_Y`. Violations are a warning: the solver still runs but the
    /// value may be discontinuous at the corner.
    pub fn validate_exit_costs(&self, corner_samples: usize) -> Result<ExitCostReport> {
        if corner_samples == 0 {
            return Err(GameError::DimensionMismatch("corner_samples must be positive".into()));
        }
        let xs = boundary_samples(&self.omega_x, corner_samples);
        let ys = boundary_samples(&self.omega_y, corner_samples);
        let mut violations = Vec::new();
        let mut samples = 0;
        for x in &xs {
            for y in &ys {
                self.check_point_dims(x, y)?;
                samples += 1;
                let psi_x = self.costs.exit_x(x, y);
                let psi_y = self.costs.exit_y(x, y);
                let psi_xy = self.costs.exit_xy(x, y);
                if !(psi_y <= psi_xy && psi_xy <= psi_x) {
                    violations.push(CornerViolation {
                        x: x.clone(),
                        y: y.clone(),
                        psi_y,
                        psi_xy,
                        psi_x,
                    });
                }
            }
        }
        let status = if violations.is_empty() { Status::Pass } else { Status::Warn };
        Ok(ExitCostReport {
            status,
            samples,
            violations,
        })
    }

    /// Worst case over `b` of the inward normal speed of X under control `a`
    /// on all `faces`, together with the opponent-free part.
    fn x_inward_speed(&self, x: &[f64], a: &[f64], faces: &[Face]) -> (f64, f64) {
        let mut worst = f64::INFINITY;
        let mut own = f64::INFINITY;
        for face in faces {
            match self.dynamics.own_velocity_x(x, a) {
                Some(v0) => {
                    let o = face.inward_component(&v0);
                    own = own.min(o);
                    for b in self.controls_b.points() {
                        let v = self.dynamics.velocity_x(x, a, b);
                        worst = worst.min(face.inward_component(&v));
                    }
                }
                None => {
                    let v = self.dynamics.velocity_x(x, a, self.controls_b.get(0));
                    let s = face.inward_component(&v);
                    worst = worst.min(s);
                    own = own.min(s);
                }
            }
        }
        (worst, own)
    }

    fn x_outward_speed(&self, x: &[f64], a: &[f64], faces: &[Face]) -> f64 {
        let mut worst = f64::INFINITY;
        for face in faces {
            if self.dynamics.coupling().is_some() {
                for b in self.controls_b.points() {
                    let v = self.dynamics.velocity_x(x, a, b);
                    worst = worst.min(-face.inward_component(&v));
                }
            } else {
                let v = self.dynamics.velocity_x(x, a, self.controls_b.get(0));
                worst = worst.min(-face.inward_component(&v));
            }
        }
        worst
    }

    /// Control of X with the largest worst-case inward speed across `faces`
    /// at `x`; ties go to the first listed control. Returns the index and
    /// the speed (positive iff the control strictly enters).
    pub fn best_inward_x(&self, x: &[f64], faces: &[Face]) -> (usize, f64, f64) {
        let mut best = (0, f64::NEG_INFINITY, f64::NEG_INFINITY);
        for (i, a) in self.controls_a.points().iter().enumerate() {
            let (s, own) = self.x_inward_speed(x, a, faces);
            if s > best.1 {
                best = (i, s, own);
            }
        }
        best
    }

    pub fn best_inward_y(&self, y: &[f64], faces: &[Face]) -> (usize, f64) {
        let mut best = (0, f64::NEG_INFINITY);
        for (i, b) in self.controls_b.points().iter().enumerate() {
            let v = self.dynamics.velocity_y(y, b);
            let s = faces.iter().map(|f| f.inward_component(&v)).fold(f64::INFINITY, f64::min);
            if s > best.1 {
                best = (i, s);
            }
        }
        best
    }

    /// Inward control for the player at a boundary (or just-crossed) point.
    pub fn inward_control(&self, player: Player, z: &[f64]) -> Result<(usize, f64)> {
        let domain = match player {
            Player::X => &self.omega_x,
            Player::Y => &self.omega_y,
        };
        let faces = domain.active_faces(z);
        if faces.is_empty() {
            return Err(GameError::NoInwardControl { point: z.to_vec() });
        }
        let (idx, speed) = match player {
            Player::X => {
                let (i, s, _) = self.best_inward_x(z, &faces);
                (i, s)
            }
            Player::Y => self.best_inward_y(z, &faces),
        };
        if speed > 0.0 {
            Ok((idx, speed))
        } else {
            Err(GameError::NoInwardControl { point: z.to_vec() })
        }
    }

    /// Samples every face of both boxes and looks for a strictly entering and
    /// a strictly exiting control at each sample. Under the weakly coupled
    /// drift the entering/exiting property must hold for every opponent
    /// control, and the opponent-free margin `ζ` is reported.
    pub fn validate_controllability(&self, boundary_samples: usize) -> Result<ControllabilityReport> {
        if boundary_samples == 0 {
            return Err(GameError::DimensionMismatch("boundary_samples must be positive".into()));
        }
        let mut checks = Vec::new();
        for face in self.omega_x.faces() {
            for x in self.omega_x.face_samples(face, boundary_samples) {
                let faces = [face];
                let (ia, inward_speed, zeta) = self.best_inward_x(&x, &faces);
                let mut out = (0, f64::NEG_INFINITY);
                for (i, a) in self.controls_a.points().iter().enumerate() {
                    let s = self.x_outward_speed(&x, a, &faces);
                    if s > out.1 {
                        out = (i, s);
                    }
                }
                checks.push(BoundaryCheck {
                    player: Player::X,
                    face,
                    point: x,
                    inward: (inward_speed > 0.0).then_some(ia),
                    outward: (out.1 > 0.0).then_some(out.0),
                    inward_speed,
                    outward_speed: out.1,
                    zeta,
                });
            }
        }
        for face in self.omega_y.faces() {
            for y in self.omega_y.face_samples(face, boundary_samples) {
                let faces = [face];
                let (ib, inward_speed) = self.best_inward_y(&y, &faces);
                let mut out = (0, f64::NEG_INFINITY);
                for (i, b) in self.controls_b.points().iter().enumerate() {
                    let v = self.dynamics.velocity_y(&y, b);
                    let s = -face.inward_component(&v);
                    if s > out.1 {
                        out = (i, s);
                    }
                }
                checks.push(BoundaryCheck {
                    player: Player::Y,
                    face,
                    point: y,
                    inward: (inward_speed > 0.0).then_some(ib),
                    outward: (out.1 > 0.0).then_some(out.0),
                    inward_speed,
                    outward_speed: out.1,
                    zeta: inward_speed,
                });
            }
        }
        let min_zeta = |p: Player| {
            checks
                .iter()
                .filter(|c| c.player == p && c.passed())
                .map(|c| c.zeta)
                .fold(f64::INFINITY, f64::min)
        };
        let mut c_tilde: f64 = 0.0;
        if let Some(d) = self.dynamics.coupling() {
            for face in self.omega_x.faces() {
                for b in self.controls_b.points() {
                    c_tilde = c_tilde.max(face.inward_component(&d.apply(b)).abs());
                }
            }
        }
        let status = if checks.iter().all(BoundaryCheck::passed) {
            Status::Pass
        } else {
            Status::Fail
        };
        Ok(ControllabilityReport {
            status,
            zeta_x: min_zeta(Player::X),
            zeta_y: min_zeta(Player::Y),
            c_tilde,
            checks,
        })
    }

    /// Samples drift magnitudes, running and exit costs, and a Lipschitz
    /// quotient of the drifts over sample pairs. The declared bound `M` must
    /// dominate both speeds and costs.
    pub fn spot_check(&self, per_axis: usize) -> SpotCheckReport {
        let xs = tensor_samples(self.omega_x.lo(), self.omega_x.hi(), per_axis);
        let ys = tensor_samples(self.omega_y.lo(), self.omega_y.hi(), per_axis);
        let mut max_speed: f64 = 0.0;
        let mut lip: f64 = 0.0;
        let mut min_cost = f64::INFINITY;
        let mut max_cost = f64::NEG_INFINITY;
        let mut finite = true;
        let mut note_cost = |c: f64| {
            if !c.is_finite() {
                finite = false;
            }
            min_cost = min_cost.min(c);
            max_cost = max_cost.max(c);
        };
        for x in &xs {
            for a in self.controls_a.points() {
                for b in self.controls_b.points() {
                    let v = self.velocity_x(x, a, b);
                    max_speed = max_speed.max(linalg::norm(&v));
                    for x2 in &xs {
                        let d = linalg::dist(x, x2);
                        if d > 0.0 {
                            let v2 = self.velocity_x(x2, a, b);
                            lip = lip.max(linalg::dist(&v, &v2) / d);
                        }
                    }
                }
            }
        }
        for y in &ys {
            for b in self.controls_b.points() {
                let v = self.velocity_y(y, b);
                max_speed = max_speed.max(linalg::norm(&v));
                for y2 in &ys {
                    let d = linalg::dist(y, y2);
                    if d > 0.0 {
                        let v2 = self.velocity_y(y2, b);
                        lip = lip.max(linalg::dist(&v, &v2) / d);
                    }
                }
            }
        }
        for x in &xs {
            for y in &ys {
                for a in self.controls_a.points() {
                    for b in self.controls_b.points() {
                        note_cost(self.running(x, y, a, b));
                    }
                }
            }
        }
        for x in boundary_samples(&self.omega_x, per_axis) {
            for y in &ys {
                note_cost(self.costs.exit_x(&x, y));
            }
        }
        for y in boundary_samples(&self.omega_y, per_axis) {
            for x in &xs {
                note_cost(self.costs.exit_y(x, &y));
            }
            for x in boundary_samples(&self.omega_x, per_axis) {
                note_cost(self.costs.exit_xy(&x, &y));
            }
        }
        let bound = self.dynamics.bound();
        let lipschitz = self.dynamics.lipschitz();
        let ok = finite
            && min_cost >= 0.0
            && max_cost <= bound * (1.0 + 1e-12)
            && max_speed <= bound * (1.0 + 1e-12)
            && lip <= lipschitz * (1.0 + 1e-9);
        SpotCheckReport {
            status: if ok { Status::Pass } else { Status::Fail },
            max_speed,
            bound,
            min_cost,
            max_cost,
            costs_finite: finite,
            lipschitz_estimate: lip,
            lipschitz,
        }
    }
}

/// Union of tensor samples over all faces, deduplicated (a zero-dimensional
/// box has no boundary and yields nothing).
fn boundary_samples(domain: &BoxDomain, per_axis: usize) -> Vec<Vec<f64>> {
    let mut out: Vec<Vec<f64>> = Vec::new();
    for face in domain.faces() {
        for p in domain.face_samples(face, per_axis) {
            if !out.contains(&p) {
                out.push(p);
            }
        }
    }
    out
}

/// Convenience constructor for drift closures.
pub fn drift<F>(f: F) -> StateControlFn
where
    F: Fn(&[f64], &[f64]) -> Vec<f64> + Send + Sync + 'static,
{
    Arc::new(f)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn one_d(drift_x: StateControlFn, a: &[f64]) -> GameProblem {
        GameProblem::new(
            BoxDomain::new(vec![0.0], vec![1.0]).unwrap(),
            BoxDomain::new(vec![-1.0], vec![1.0]).unwrap(),
            Dynamics::new(XDrift::Decoupled(drift_x), drift(|_, _| vec![0.0]), 1.0, 1.0).unwrap(),
            ControlSet::scalars(a).unwrap(),
            ControlSet::scalars(&[0.0]).unwrap(),
            Costs::constant(1.0, 0.0, 0.0, 0.0, 1.0).unwrap(),
        )
        .unwrap()
    }

    fn with_exit_costs(psi_y: f64, psi_xy: f64, psi_x: f64) -> GameProblem {
        GameProblem::new(
            BoxDomain::new(vec![0.0], vec![1.0]).unwrap(),
            BoxDomain::new(vec![0.0], vec![1.0]).unwrap(),
            Dynamics::new(XDrift::Decoupled(drift(|_, a| a.to_vec())), drift(|_, b| b.to_vec()), 1.0, 1.0).unwrap(),
            ControlSet::scalars(&[-1.0, 1.0]).unwrap(),
            ControlSet::scalars(&[-1.0, 1.0]).unwrap(),
            Costs::constant(0.0, psi_x, psi_y, psi_xy, 1.0).unwrap(),
        )
        .unwrap()
    }

    #[test]
    fn box_rejects_degenerate_axes() {
        assert!(BoxDomain::new(vec![1.0], vec![1.0]).is_err());
        assert!(BoxDomain::new(vec![0.0, 0.0], vec![1.0]).is_err());
        assert!(BoxDomain::new(vec![f64::NAN], vec![1.0]).is_err());
    }

    #[test]
    fn control_set_rejects_duplicates_and_empty() {
        assert!(ControlSet::new(vec![]).is_err());
        assert!(ControlSet::scalars(&[1.0, 1.0]).is_err());
        assert!(ControlSet::new(vec![vec![1.0], vec![1.0, 2.0]]).is_err());
    }

    #[test]
    fn crossing_fraction_detects_exit() {
        let b = BoxDomain::new(vec![0.0], vec![1.0]).unwrap();
        assert_eq!(b.crossing_fraction(&[0.5], &[0.9]), None);
        assert_eq!(b.crossing_fraction(&[0.0], &[-0.1]), Some(0.0));
        let t = b.crossing_fraction(&[0.9], &[1.1]).unwrap();
        assert!((t - 0.5).abs() < 1e-12);
        // touching the face is not an exit
        assert_eq!(b.crossing_fraction(&[0.9], &[1.0]), None);
    }

    #[test]
    fn exit_cost_ordering_pass() {
        let r = with_exit_costs(1.0, 2.0, 3.0).validate_exit_costs(3).unwrap();
        assert_eq!(r.status, Status::Pass);
        assert_eq!(r.samples, 4);
    }

    #[test]
    fn exit_cost_ordering_reversed_warns_everywhere() {
        let r = with_exit_costs(3.0, 2.0, 1.0).validate_exit_costs(3).unwrap();
        assert_eq!(r.status, Status::Warn);
        assert_eq!(r.violations.len(), r.samples);
    }

    #[test]
    fn exit_cost_equal_zero_passes() {
        let r = with_exit_costs(0.0, 0.0, 0.0).validate_exit_costs(5).unwrap();
        assert_eq!(r.status, Status::Pass);
    }

    #[test]
    fn exit_cost_report_is_deterministic() {
        let p = with_exit_costs(3.0, 2.0, 1.0);
        assert_eq!(p.validate_exit_costs(4).unwrap(), p.validate_exit_costs(4).unwrap());
    }

    #[test]
    fn controllability_symmetric_controls() {
        let p = one_d(drift(|_, a| a.to_vec()), &[-1.0, 1.0]);
        let r = p.validate_controllability(3).unwrap();
        let x_checks: Vec<_> = r.checks.iter().filter(|c| c.player == Player::X).collect();
        assert_eq!(x_checks.len(), 2);
        assert!(x_checks.iter().all(|c| c.passed() && c.zeta == 1.0));
        assert_eq!(r.zeta_x, 1.0);
        // Y has g = 0 so its faces fail; X faces pass
        assert_eq!(r.status, Status::Fail);
        assert_eq!(r.face_status(Player::X, Face { axis: 0, side: Side::Lo }), Status::Pass);
        assert_eq!(r.face_status(Player::Y, Face { axis: 0, side: Side::Lo }), Status::Fail);
    }

    #[test]
    fn controllability_fixed_drift_fails() {
        let p = one_d(drift(|_, _| vec![1.0]), &[-1.0, 1.0]);
        let r = p.validate_controllability(2).unwrap();
        let hi = r
            .checks
            .iter()
            .find(|c| c.player == Player::X && c.face.side == Side::Hi)
            .unwrap();
        assert!(hi.inward.is_none());
        let lo = r
            .checks
            .iter()
            .find(|c| c.player == Player::X && c.face.side == Side::Lo)
            .unwrap();
        assert!(lo.outward.is_none());
        assert_eq!(r.status, Status::Fail);
    }

    #[test]
    fn spot_check_flags_negative_costs() {
        let mut p = one_d(drift(|_, a| a.to_vec()), &[-1.0, 1.0]);
        assert_eq!(p.spot_check(3).status, Status::Pass);
        p.costs = Costs::constant(-1.0, 0.0, 0.0, 0.0, 1.0).unwrap();
        assert_eq!(p.spot_check(3).status, Status::Fail);
    }
}
