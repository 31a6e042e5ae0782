//! Randomised certification of the constrained-strategy properties i)-vi):
//! prefix preservation, exit-time ordering, trajectory deviation and
//! running-cost deviation of tuned versus untuned plays.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::error::{GameError, Result};
use crate::linalg;
use crate::problem::{BoxDomain, ControlSet, GameProblem};
use crate::simulator::{horizon_steps, running_cost, solo_path_x, solo_path_y};
use crate::strategy::{tune_strategy, ControlSignal, Player, SonerParams, StrategyMap};

#[derive(Clone, Debug, PartialEq)]
pub struct CertConfig {
    pub trials: usize,
    pub seed: u64,
    /// Largest joint start-point perturbation `‖Δ‖`.
    pub max_delta: f64,
    pub horizon: f64,
    pub dt: f64,
    pub sx: SonerParams,
    pub sy: SonerParams,
    /// Constant `C` in the deviation modulus `C e^{LT} ‖Δ‖ + 2 dt M`.
    pub modulus_c: f64,
    /// Longest run of a constant control in random signals.
    pub max_run: usize,
}

impl CertConfig {
    pub fn new(trials: usize, seed: u64, max_delta: f64, horizon: f64, dt: f64, sx: SonerParams, sy: SonerParams) -> Self {
        Self {
            trials,
            seed,
            max_delta,
            horizon,
            dt,
            sx,
            sy,
            modulus_c: 1.0,
            max_run: 20,
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct CheckStat {
    pub name: &'static str,
    pub trials: usize,
    pub passed: usize,
    /// Smallest `bound − observed` seen (negative on failure).
    pub worst_margin: f64,
    /// False when the instance lacks the structure the bound relies on.
    pub certified: bool,
}

impl CheckStat {
    fn new(name: &'static str, certified: bool) -> Self {
        Self {
            name,
            trials: 0,
            passed: 0,
            worst_margin: f64::INFINITY,
            certified,
        }
    }

    fn record(&mut self, margin: f64) {
        self.trials += 1;
        if margin >= 0.0 {
            self.passed += 1;
        }
        self.worst_margin = self.worst_margin.min(margin);
    }

    pub fn all_passed(&self) -> bool {
        self.passed == self.trials
    }

    pub fn status(&self) -> &'static str {
        if !self.certified {
            "NOT_CERTIFIED"
        } else if self.all_passed() {
            "PASS"
        } else {
            "FAIL"
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct CertReport {
    pub checks: Vec<CheckStat>,
}

impl CertReport {
    pub fn check(&self, name: &str) -> Option<&CheckStat> {
        self.checks.iter().find(|c| c.name == name)
    }

    /// Every certified check passed in every trial.
    pub fn passed(&self) -> bool {
        self.checks.iter().filter(|c| c.certified).all(CheckStat::all_passed)
    }
}

fn random_point<R: Rng>(rng: &mut R, dom: &BoxDomain) -> Vec<f64> {
    let mut z: Vec<f64> = (0..dom.dim())
        .map(|i| rng.random_range(dom.lo()[i]..=dom.hi()[i]))
        .collect();
    if dom.dim() > 0 && rng.random_bool(0.2) {
        let i = rng.random_range(0..dom.dim());
        z[i] = if rng.random_bool(0.5) { dom.lo()[i] } else { dom.hi()[i] };
    }
    z
}

fn random_direction<R: Rng>(rng: &mut R, d: usize) -> Vec<f64> {
    loop {
        let v: Vec<f64> = (0..d).map(|_| rng.random_range(-1.0..=1.0)).collect();
        let n = linalg::norm(&v);
        if n > 1e-3 && n <= 1.0 {
            return v.iter().map(|x| x / n).collect();
        }
    }
}

/// A random strategy for X: open loop, or a memoryless reaction table
/// `a_k = table[index of b_k]`.
fn random_gamma<R: Rng>(rng: &mut R, p: &GameProblem, dt: f64, steps: usize, max_run: usize) -> StrategyMap {
    if rng.random_bool(0.5) {
        StrategyMap::open_loop(Player::X, ControlSignal::random(rng, p.controls_a(), dt, steps, max_run))
    } else {
        let a = p.controls_a().clone();
        let b = p.controls_b().clone();
        let table: Vec<usize> = (0..b.len()).map(|_| rng.random_range(0..a.len())).collect();
        StrategyMap::from_fn(Player::X, move |k, prefix| {
            let j = b.index_of(&prefix[k]).unwrap_or(0);
            a.get(table[j]).to_vec()
        })
    }
}

fn diverging_copy<R: Rng>(rng: &mut R, beta: &ControlSignal, set: &ControlSet, d: usize, max_run: usize) -> ControlSignal {
    let tail = ControlSignal::random(rng, set, beta.dt(), beta.len(), max_run);
    let mut samples: Vec<Vec<f64>> = beta.samples()[..d].to_vec();
    samples.extend(tail.samples()[d..].iter().cloned());
    if set.len() > 1 && samples[d] == beta.samples()[d] {
        let j = set.index_of(&samples[d]).unwrap_or(0);
        samples[d] = set.get((j + 1) % set.len()).to_vec();
    }
    ControlSignal::new(beta.dt(), samples).expect("nonempty signal")
}

/// Runs `trials` random start pairs, signals and strategies through the
/// tuned constructions and scores the six properties.
pub fn certify_assumption2(p: &GameProblem, cfg: &CertConfig) -> Result<CertReport> {
    if cfg.trials == 0 || !(cfg.horizon > 0.0) || !(cfg.dt > 0.0) || cfg.max_delta < 0.0 {
        return Err(GameError::InvalidStrategy(
            "certification needs trials > 0, horizon > 0, dt > 0, max_delta >= 0".into(),
        ));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let (dt, big_t) = (cfg.dt, cfg.horizon);
    let steps = horizon_steps(big_t, dt);
    let l = p.dynamics().lipschitz();
    let m_bound = p.dynamics().bound();
    let lambda = p.discount();
    let coupled = p.dynamics().coupling().is_some();
    let mut st = [
        CheckStat::new("i", true),
        CheckStat::new("ii", true),
        CheckStat::new("iii", true),
        CheckStat::new("iv", true),
        CheckStat::new("v", true),
        CheckStat::new("vi", p.costs().split().is_separated()),
    ];
    for _ in 0..cfg.trials {
        let x1 = random_point(&mut rng, p.omega_x());
        let y1 = random_point(&mut rng, p.omega_y());
        let dir = random_direction(&mut rng, p.n() + p.m());
        let r = rng.random_range(0.0..=cfg.max_delta);
        let x2 = p.omega_x().clamp(&linalg::axpy(&x1, r, &dir[..p.n()]));
        let y2 = p.omega_y().clamp(&linalg::axpy(&y1, r, &dir[p.n()..]));
        let dx = linalg::dist(&x1, &x2);
        let dy = linalg::dist(&y1, &y2);
        let dxy = (dx * dx + dy * dy).sqrt();

        let beta = ControlSignal::random(&mut rng, p.controls_b(), dt, steps, cfg.max_run);
        let gamma = random_gamma(&mut rng, p, dt, steps, cfg.max_run);
        let tuned = tune_strategy(p, &gamma, (&x1, &x2), (&y1, &y2), &cfg.sx, &cfg.sy)?;
        let resp = tuned.respond_full(&beta)?;

        // i) prefix preservation of both tunings
        let d = rng.random_range(1..steps.max(2));
        let beta2 = diverging_copy(&mut rng, &beta, p.controls_b(), d.min(beta.len() - 1), cfg.max_run);
        let shared = beta.first_difference(&beta2).unwrap_or(beta.len());
        let resp2 = tuned.respond_full(&beta2)?;
        let ok_i = resp.beta_tilde.signal.agrees_with(&resp2.beta_tilde.signal, shared)
            && resp.alpha_tilde.signal.agrees_with(&resp2.alpha_tilde.signal, shared);
        st[0].record(if ok_i { 0.0 } else { -1.0 });

        let bt = &resp.beta_tilde.signal;
        let py1 = solo_path_y(p, &y1, &beta, steps);
        let py2 = solo_path_y(p, &y2, bt, steps);
        let px2 = solo_path_x(p, &x2, &resp.alpha, bt, steps);
        let px1 = solo_path_x(p, &x1, &resp.alpha_tilde.signal, &beta, steps);
        let cap = |t: Option<f64>| t.unwrap_or(f64::INFINITY).min(big_t);
        let t_tilde = cap(px2.exit_time).min(cap(py1.exit_time));

        // ii) / iii) exit-time ordering within one step
        st[1].record(cap(px1.exit_time) - cap(px2.exit_time) + dt);
        st[2].record(cap(py2.exit_time) - cap(py1.exit_time) + dt);

        // iv) / v) deviation at the capped time
        let slack = 2.0 * dt * m_bound;
        let growth = cfg.modulus_c * (l * big_t).exp();
        let dev_x = linalg::dist(&px1.state_at(t_tilde), &px2.state_at(t_tilde));
        let dev_y = linalg::dist(&py1.state_at(t_tilde), &py2.state_at(t_tilde));
        let dx_eff = if coupled { dx + dy } else { dx };
        st[3].record(growth * dx_eff + slack - dev_x);
        st[4].record(growth * dy + slack - dev_y);

        // vi) running cost up to the capped time
        let j1 = running_cost(p, &px1, &py1, &resp.alpha_tilde.signal, &beta, t_tilde);
        let j2 = running_cost(p, &px2, &py2, &resp.alpha, bt, t_tilde);
        let s = (resp.alpha_tilde.inserted + resp.beta_tilde.inserted) as f64 * dt;
        let envelope = l * t_tilde * (cfg.modulus_c * (l * t_tilde).exp() * dxy + slack + m_bound * s)
            + m_bound * s * (2.0 + (lambda + l) * t_tilde)
            + slack;
        st[5].record(envelope - (j1 - j2).abs());
    }
    Ok(CertReport { checks: st.to_vec() })
}
