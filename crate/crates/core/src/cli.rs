//! Command-line driver: loads a problem file, runs one command and writes
//! CSV artifacts plus `report.txt` into the output directory.

use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};

use clap::{Parser, ValueEnum};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::certify::{certify_assumption2, CertConfig};
use crate::config::{load_config, ProblemConfig};
use crate::error::{GameError, Result};
use crate::grid::{build_grid, GridSpec, NodeRole, ValueGrid};
use crate::oracle::{brute_value, exactify};
use crate::problem::{GameProblem, Status};
use crate::report::Report;
use crate::simulator::{dpp_residual_with, horizon_steps, play};
use crate::solver::{boundary_gaps, solve, Convention, SchemeParams, SolveReport};
use crate::strategy::{feedback_strategy, ControlSignal, Player, SonerParams};

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum)]
pub enum Command {
    Solve,
    #[value(name = "solve_both", alias = "solve-both")]
    SolveBoth,
    Simulate,
    Verify,
    Oracle,
    Sweep,
}

#[derive(Clone, Debug, Parser)]
#[command(name = "exitgame", about = "Exit-time differential game solver")]
pub struct RunConfig {
    /// Problem file (TOML).
    #[arg(long)]
    pub config: PathBuf,
    #[arg(long, value_enum, default_value = "solve")]
    pub command: Command,
    /// Output directory, created if missing.
    #[arg(long, default_value = "out")]
    pub out: PathBuf,
    /// Seed of every randomised procedure.
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    /// Nodes per axis: one value for all axes or one per axis.
    #[arg(long, value_delimiter = ',')]
    pub grid: Option<Vec<usize>>,
    /// Time step, overriding the problem file.
    #[arg(long)]
    pub dt: Option<f64>,
    /// Sup-norm stopping tolerance of value iteration.
    #[arg(long)]
    pub tol: Option<f64>,
    /// Iteration cap of value iteration.
    #[arg(long)]
    pub max_iters: Option<usize>,
    /// Refinement levels of `sweep`, the finest serving as reference.
    #[arg(long, default_value_t = 3)]
    pub levels: usize,
}

/// Value grid and scheme after applying command-line overrides.
fn setup(cfg: &ProblemConfig, rc: &RunConfig) -> Result<(ValueGrid, SchemeParams)> {
    let p = &cfg.problem;
    let d = p.n() + p.m();
    let nodes = match &rc.grid {
        None => cfg.scheme.grid.clone(),
        Some(g) if g.len() == 1 => vec![g[0]; d],
        Some(g) if g.len() == d => g.clone(),
        Some(g) => {
            return Err(GameError::Config(format!("--grid needs 1 or {d} values, got {}", g.len())));
        }
    };
    let g = build_grid(p, &GridSpec::new(nodes))?;
    let sp = SchemeParams::new(
        rc.dt.unwrap_or(cfg.scheme.dt),
        rc.tol.unwrap_or(cfg.scheme.tol),
        rc.max_iters.unwrap_or(cfg.scheme.max_iters),
        Convention::Lower,
    );
    Ok((g, sp))
}

fn write_grid(dir: &Path, name: &str, g: &ValueGrid) -> Result<()> {
    g.write_csv(BufWriter::new(File::create(dir.join(name))?))?;
    Ok(())
}

fn push_solve(r: &mut Report, tag: &str, s: &SolveReport) {
    r.push(format!("{tag}.iterations"), s.iterations);
    r.push(format!("{tag}.final_residual"), s.final_residual);
    r.push(format!("{tag}.contraction_estimate"), s.contraction_estimate);
    r.push(format!("{tag}.boundary_violations"), s.boundary_violations);
}

/// Solve under `conv`, recording non-convergence as a failed check.
fn solve_checked(p: &GameProblem, g: &ValueGrid, sp: &SchemeParams, conv: Convention, r: &mut Report) -> Result<Option<ValueGrid>> {
    let tag = conv.to_string().to_lowercase();
    match solve(p, g, &sp.with_convention(conv)) {
        Ok((v, s)) => {
            push_solve(r, &tag, &s);
            r.check(&format!("{tag}.converged"), true);
            Ok(Some(v))
        }
        Err(GameError::NonConvergence { iterations, residual }) => {
            r.push(format!("{tag}.iterations"), iterations);
            r.push(format!("{tag}.final_residual"), residual);
            r.check(&format!("{tag}.converged"), false);
            Ok(None)
        }
        Err(e) => Err(e),
    }
}

/// Runs one command; the returned report is also written to `report.txt`.
pub fn run(rc: &RunConfig) -> Result<Report> {
    let cfg = load_config(&rc.config)?;
    std::fs::create_dir_all(&rc.out)?;
    let mut r = Report::new();
    r.push("name", &cfg.name);
    r.push("command", format!("{:?}", rc.command).to_lowercase());
    r.push("seed", rc.seed);
    let (g, sp) = setup(&cfg, rc)?;
    r.push("grid", format!("{:?}", g.nodes_per_axis()).replace(' ', ""));
    r.push("dt", sp.dt);
    r.push("tol", sp.tol);
    match rc.command {
        Command::Solve => cmd_solve(&cfg, &g, &sp, rc, &mut r)?,
        Command::SolveBoth => cmd_solve_both(&cfg, &g, &sp, rc, &mut r)?,
        Command::Simulate => cmd_simulate(&cfg, &g, &sp, rc, &mut r)?,
        Command::Verify => cmd_verify(&cfg, &g, &sp, rc, &mut r)?,
        Command::Oracle => cmd_oracle(&cfg, &g, &sp, &mut r)?,
        Command::Sweep => cmd_sweep(&cfg, &g, &sp, rc, &mut r)?,
    }
    r.push("status", if r.all_passed() { "PASS" } else { "FAIL" });
    r.write_to(BufWriter::new(File::create(rc.out.join("report.txt"))?))?;
    Ok(r)
}

fn cmd_solve(cfg: &ProblemConfig, g: &ValueGrid, sp: &SchemeParams, rc: &RunConfig, r: &mut Report) -> Result<()> {
    if let Some(v) = solve_checked(&cfg.problem, g, sp, Convention::Lower, r)? {
        write_grid(&rc.out, "value_lower.csv", &v)?;
    }
    Ok(())
}

fn cmd_solve_both(cfg: &ProblemConfig, g: &ValueGrid, sp: &SchemeParams, rc: &RunConfig, r: &mut Report) -> Result<()> {
    let lower = solve_checked(&cfg.problem, g, sp, Convention::Lower, r)?;
    let upper = solve_checked(&cfg.problem, g, sp, Convention::Upper, r)?;
    if let Some(v) = &lower {
        write_grid(&rc.out, "value_lower.csv", v)?;
    }
    if let Some(v) = &upper {
        write_grid(&rc.out, "value_upper.csv", v)?;
    }
    if let (Some(lo), Some(up)) = (lower, upper) {
        r.push("gap", lo.sup_distance(&up));
    }
    Ok(())
}

fn cmd_simulate(cfg: &ProblemConfig, g: &ValueGrid, sp: &SchemeParams, rc: &RunConfig, r: &mut Report) -> Result<()> {
    let p = &cfg.problem;
    let Some(v) = solve_checked(p, g, sp, Convention::Lower, r)? else {
        return Ok(());
    };
    let sim = &cfg.simulate;
    let dt = sim.dt.unwrap_or(sp.dt);
    let steps = horizon_steps(sim.horizon, dt);
    let gamma = feedback_strategy(p, &v, Player::X, dt)?;
    let mut rng = ChaCha8Rng::seed_from_u64(rc.seed);
    let mut k = 0;
    for (s, (x0, y0)) in sim.starts.iter().enumerate() {
        r.push(format!("start_{s}.value_lower"), v.value_at(x0, y0)?);
        let mut signals: Vec<(String, ControlSignal)> = Vec::new();
        for (j, b) in p.controls_b().points().iter().enumerate() {
            signals.push((format!("constant_{j}"), ControlSignal::constant(dt, b, steps)?));
        }
        for j in 0..sim.random_signals {
            let beta = ControlSignal::random(&mut rng, p.controls_b(), dt, steps, sim.max_run);
            signals.push((format!("random_{j}"), beta));
        }
        for (label, beta) in signals {
            let o = play(p, x0, y0, &gamma, &beta, sim.horizon)?;
            o.write_csv(BufWriter::new(File::create(rc.out.join(format!("outcome_{k}.csv")))?))?;
            let mut txt = Report::new();
            txt.push("start", s);
            txt.push("x0", format!("{x0:?}").replace(' ', ""));
            txt.push("y0", format!("{y0:?}").replace(' ', ""));
            txt.push("beta", &label);
            for (key, val) in o.summary() {
                txt.push(key, val);
            }
            txt.write_to(BufWriter::new(File::create(rc.out.join(format!("outcome_{k}.txt")))?))?;
            r.push(format!("outcome_{k}.start"), s);
            r.push(format!("outcome_{k}.beta"), label);
            r.extend(&format!("outcome_{k}"), o.summary());
            k += 1;
        }
    }
    r.push("outcomes", k);
    Ok(())
}

fn cmd_verify(cfg: &ProblemConfig, g: &ValueGrid, sp: &SchemeParams, rc: &RunConfig, r: &mut Report) -> Result<()> {
    let p = &cfg.problem;
    let vc = &cfg.verify;

    let ec = p.validate_exit_costs(vc.corner_samples)?;
    r.push("exit_costs.status", ec.status);
    r.push("exit_costs.samples", ec.samples);
    r.push("exit_costs.violations", ec.violations.len());

    let cr = p.validate_controllability(vc.boundary_samples)?;
    r.push("controllability.status", cr.status);
    r.push("controllability.zeta_x", cr.zeta_x);
    r.push("controllability.zeta_y", cr.zeta_y);
    r.push("controllability.c_tilde", cr.c_tilde);
    r.check("controllability", cr.status != Status::Fail);

    let sc = p.spot_check(vc.spot_samples);
    r.push("spot_check.max_speed", sc.max_speed);
    r.push("spot_check.min_cost", sc.min_cost);
    r.push("spot_check.max_cost", sc.max_cost);
    r.push("spot_check.lipschitz_estimate", sc.lipschitz_estimate);
    r.check("spot_check", sc.status != Status::Fail);

    let rho = (-p.discount() * sp.dt).exp();
    r.push("rho", rho);
    for conv in [Convention::Lower, Convention::Upper] {
        let tag = conv.to_string().to_lowercase();
        let sp = sp.with_convention(conv);
        let (v, s) = match solve(p, g, &sp) {
            Ok(x) => x,
            Err(GameError::NonConvergence { iterations, residual }) => {
                r.push(format!("{tag}.iterations"), iterations);
                r.push(format!("{tag}.final_residual"), residual);
                r.check(&format!("{tag}.converged"), false);
                continue;
            }
            Err(e) => return Err(e),
        };
        push_solve(r, &tag, &s);
        r.check(&format!("{tag}.converged"), true);
        r.check(&format!("{tag}.contraction"), s.contraction_estimate <= rho + 1e-6);

        let bg = boundary_gaps(p, &v);
        r.push(format!("{tag}.boundary.x_excess"), bg.x_excess);
        r.push(format!("{tag}.boundary.y_deficit"), bg.y_deficit);
        r.check(&format!("{tag}.boundary_inequalities"), bg.holds(sp.tol));

        let interior: Vec<usize> = (0..v.len()).filter(|&i| v.role(i) == NodeRole::Interior).collect();
        let stride = interior.len().div_ceil(vc.dpp_nodes.max(1)).max(1);
        let mut worst: f64 = 0.0;
        let mut count = 0;
        for &i in interior.iter().step_by(stride) {
            let (x, y) = v.node_point(i);
            worst = worst.max(dpp_residual_with(p, &v, &x, &y, sp.dt, usize::MAX, sp.dt, conv)?);
            count += 1;
        }
        let bound = sp.tol + 10.0 * sp.dt * sp.dt;
        r.push(format!("{tag}.dpp.nodes"), count);
        r.push(format!("{tag}.dpp.max_residual"), worst);
        r.push(format!("{tag}.dpp.bound"), bound);
        r.check(&format!("{tag}.dpp"), worst <= bound);
    }

    let params = SonerParams::from_report(&cr, Player::X, vc.t_star)
        .and_then(|sx| Ok((sx, SonerParams::from_report(&cr, Player::Y, vc.t_star)?)));
    match params {
        Ok((sx, sy)) => {
            let mut cc = CertConfig::new(vc.trials, rc.seed, vc.max_delta, vc.horizon, sp.dt, sx, sy);
            cc.max_run = cfg.simulate.max_run;
            match certify_assumption2(p, &cc) {
                Ok(rep) => {
                    for c in &rep.checks {
                        let key = format!("certify.{}", c.name);
                        r.push(format!("{key}.passed"), format!("{}/{}", c.passed, c.trials));
                        r.push(format!("{key}.worst_margin"), c.worst_margin);
                        r.push(format!("{key}.status"), c.status());
                        if c.certified {
                            r.check(&key, c.all_passed());
                        }
                    }
                }
                Err(e) => {
                    r.push("certify.error", e);
                    r.check("certify", false);
                }
            }
        }
        Err(e) => {
            r.push("certify.error", e);
            r.check("certify", false);
        }
    }
    Ok(())
}

fn cmd_oracle(cfg: &ProblemConfig, g: &ValueGrid, sp: &SchemeParams, r: &mut Report) -> Result<()> {
    let p = &cfg.problem;
    let d = match exactify(p, g, sp) {
        Ok(d) => d,
        Err(e @ GameError::NotExactifiable(_)) => {
            r.push("oracle.error", e);
            r.check("oracle.exactifiable", false);
            return Ok(());
        }
        Err(e) => return Err(e),
    };
    r.check("oracle.exactifiable", true);
    r.push("oracle.states", d.states());
    r.push("oracle.horizon", d.horizon());
    // the iteration must stop well inside the comparison tolerance
    let rho = d.discount();
    let tight = sp.tol.min((1e-10 * (1.0 - rho)).max(1e-14));
    for conv in [Convention::Lower, Convention::Upper] {
        let tag = conv.to_string().to_lowercase();
        let brute = brute_value(&d, conv);
        let tuned = SchemeParams::new(sp.dt, tight, sp.max_iters.max(1_000_000), conv);
        let Some(v) = solve_checked(p, g, &tuned, conv, r)? else {
            continue;
        };
        let err = v.values().iter().zip(&brute).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max);
        r.push(format!("oracle.{tag}.max_error"), err);
        r.check(&format!("oracle.{tag}"), err <= 1e-9);
    }
    Ok(())
}

fn cmd_sweep(cfg: &ProblemConfig, g: &ValueGrid, sp: &SchemeParams, rc: &RunConfig, r: &mut Report) -> Result<()> {
    let p = &cfg.problem;
    let levels = rc.levels.max(2);
    let mut solutions = Vec::with_capacity(levels);
    let mut nodes = g.nodes_per_axis().to_vec();
    let mut dt = sp.dt;
    for _ in 0..levels {
        let grid = build_grid(p, &GridSpec::new(nodes.clone()))?;
        let (v, s) = solve(p, &grid, &SchemeParams::new(dt, sp.tol, sp.max_iters, Convention::Lower))?;
        solutions.push((v, s, dt));
        nodes = nodes.iter().map(|&k| 2 * k - 1).collect();
        dt *= 0.5;
    }
    let (reference, _, _) = solutions.last().expect("at least two levels");
    let mut w = BufWriter::new(File::create(rc.out.join("sweep.csv"))?);
    writeln!(w, "level,nodes,dt,iterations,sup_error")?;
    let mut errors = Vec::new();
    for (lvl, (v, s, dt)) in solutions.iter().enumerate() {
        let err = if lvl + 1 == solutions.len() {
            0.0
        } else {
            (0..v.len())
                .map(|i| {
                    let (x, y) = v.node_point(i);
                    (v.values()[i] - reference.value_at(&x, &y).unwrap_or(f64::NAN)).abs()
                })
                .fold(0.0, f64::max)
        };
        writeln!(w, "{lvl},{},{dt},{},{err}", v.len(), s.iterations)?;
        r.push(format!("sweep.level_{lvl}.nodes"), v.len());
        r.push(format!("sweep.level_{lvl}.sup_error"), err);
        if lvl + 1 < solutions.len() {
            errors.push(err);
        }
    }
    w.flush()?;
    r.check("sweep.monotone", errors.windows(2).all(|e| e[1] <= e[0]));
    Ok(())
}
