//! Scenario execution. `prepare` performs every validation step and is shared by `explain` and
//! `run`, so a dry run rejects exactly what a real run would.

use std::fs;
use std::path::{Path, PathBuf};
use std::time::Instant;

use anyhow::{Context, Result};
use mcfhomog::discrepancy::{
    comparison_constants, discrepancy, discrepancy_brute_force, modified_discrepancy, omega, omega_threshold_n, r0, Direction,
};
use mcfhomog::forcing::ForcingField;
use mcfhomog::io::{write_snapshot, Table};
use mcfhomog::laminar::{
    construct_subsolution_profile, construct_supersolution_profile, extract_traveling_wave, fingering_run, linear_fit, residual_check,
    verify_corollary, GraphGrid, GraphSolver,
};
use mcfhomog::levelset::{extract_front, solve, Grid, LevelSetField, SchemeParams, Solver};
use mcfhomog::obstacle::{check_lcp, Kind, LcpConfig, ObstacleProblem, ObstacleRun};
use mcfhomog::speeds::{circle_direction, estimate_both, sweep_directions, twisted_box, Method, SpeedConfig, SpeedEstimate};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::Serialize;
use serde_json::{json, Value};

use crate::config::{bad, EstimatorSpec, InitialSpec, MethodSpec, RunConfig, Scenario, SideSpec};

#[derive(Clone, Debug)]
pub struct Options {
    pub out: PathBuf,
    /// Directory against which relative paths in the config resolve.
    pub base_dir: PathBuf,
    /// `laminar --corollary`.
    pub corollary: bool,
}

#[derive(Clone, Debug, Serialize)]
pub struct ForcingInfo {
    pub label: String,
    pub dim: usize,
    pub m0: f64,
    #[serde(rename = "M0")]
    pub big_m0: f64,
    #[serde(rename = "L0")]
    pub l0: f64,
}

#[derive(Clone, Debug, Serialize)]
pub struct Manifest {
    pub tool: String,
    pub version: String,
    pub library_version: String,
    pub scenario: Scenario,
    pub seed: u64,
    pub workers: usize,
    pub config: RunConfig,
    pub forcing: ForcingInfo,
    pub outputs: Vec<String>,
    pub summary: Value,
    pub wall_time_s: f64,
}

/// Validated inputs plus the resource plan reported by `explain`.
pub struct Prepared {
    pub scenario: Scenario,
    pub config: RunConfig,
    pub g: ForcingField,
    pub plan: Vec<(String, String)>,
    corollary: bool,
}

fn kv(plan: &mut Vec<(String, String)>, k: &str, v: impl ToString) {
    plan.push((k.to_string(), v.to_string()));
}

fn steps_for(horizon: f64, dt: f64) -> u64 {
    (horizon / dt).ceil() as u64
}

fn level_set_plan(plan: &mut Vec<(String, String)>, prefix: &str, grid: &Grid, dt: f64, horizon: f64) {
    kv(plan, &format!("{prefix}grid_shape"), format!("{:?}", grid.shape));
    kv(plan, &format!("{prefix}dx"), grid.dx);
    kv(plan, &format!("{prefix}nodes"), grid.len());
    kv(plan, &format!("{prefix}cfl_dt"), dt);
    kv(plan, &format!("{prefix}steps"), steps_for(horizon, dt));
    // State, forcing cache, update buffer and padded copy.
    kv(plan, &format!("{prefix}memory_bytes"), 4 * 8 * grid.len());
}

fn estimator_config(e: &EstimatorSpec, horizon: f64, scheme: &SchemeParams) -> SpeedConfig {
    SpeedConfig {
        cells_per_period: e.cells_per_period,
        box_periods: e.box_periods,
        radius: e.radius,
        horizon,
        samples: e.samples,
        probe_horizon: e.probe_horizon,
        bisection_iters: e.bisection_iters,
        scheme: scheme.clone(),
    }
}

fn estimator_plan(plan: &mut Vec<(String, String)>, g: &ForcingField, e: &EstimatorSpec, cfg: &SpeedConfig, dirs: &[Vec<f64>], eps: f64) -> Result<()> {
    let n = g.dim() as f64;
    if e.radius < n.sqrt() {
        return Err(mcfhomog::Error::Parameter(format!("cylinder radius {} < sqrt(n) = {}", e.radius, n.sqrt())).into());
    }
    if e.method != MethodSpec::ObstacleBisection && cfg.horizon < 20.0 / g.lower {
        return Err(mcfhomog::Error::Precondition(format!("front-tracking horizon {} < 20/m0 = {}", cfg.horizon, 20.0 / g.lower)).into());
    }
    for d in dirs {
        if d.len() != g.dim() {
            return bad(format!("direction {d:?} has dimension {} but the forcing has {}", d.len(), g.dim())).map_err(Into::into);
        }
    }
    let grid = twisted_box(&dirs[0], eps, cfg)?;
    let dt = Solver::new(&grid, eps, g, &cfg.scheme)?.max_dt();
    kv(plan, "directions", dirs.len());
    kv(plan, "box_shape", format!("{:?}", grid.shape));
    kv(plan, "dx", grid.dx);
    kv(plan, "cfl_dt", dt);
    kv(plan, "memory_bytes_per_direction", 4 * 8 * grid.len());
    if e.method != MethodSpec::ObstacleBisection {
        kv(plan, "front_tracking_steps_per_direction", steps_for(cfg.horizon, dt));
    }
    if e.method != MethodSpec::FrontTracking {
        // Two bracket probes plus one per iteration, for head and tail.
        let probes = 2 * (e.bisection_iters + 2) as u64;
        kv(plan, "bisection_steps_per_direction", probes * steps_for(cfg.probe_horizon, dt));
    }
    Ok(())
}

pub fn prepare(scenario: Scenario, config: &RunConfig, opts: &Options) -> Result<Prepared> {
    config.validate(scenario)?;
    let g = config.forcing.build(&opts.base_dir)?;
    let mut plan = Vec::new();
    kv(&mut plan, "scenario", scenario.as_str());
    kv(&mut plan, "forcing", g.label());
    kv(&mut plan, "m0", g.lower);
    kv(&mut plan, "M0", g.upper);
    kv(&mut plan, "L0", g.lipschitz);
    kv(&mut plan, "eps", config.eps);
    kv(&mut plan, "horizon", config.horizon);
    let scheme = config.scheme.level_set();
    let dirs = &config.directions;
    let corollary = opts.corollary || config.laminar.as_ref().is_some_and(|l| l.corollary);
    match scenario {
        Scenario::Simulate => {
            let spec = config.simulate.as_ref().expect("validated");
            let grid = config.grid.as_ref().expect("validated").build(dirs.first().map(|d| d.as_slice()), config.eps)?;
            match &spec.initial {
                InitialSpec::Planar { .. } if dirs.is_empty() => return bad("planar initial data needs directions[0]").map_err(Into::into),
                InitialSpec::Ball { center, radius } if center.len() != grid.dim() || !(*radius > 0.0) => {
                    return bad("ball needs a center of the grid dimension and a positive radius").map_err(Into::into)
                }
                _ => {}
            }
            if spec.outputs == 0 {
                return bad("simulate.outputs must be positive").map_err(Into::into);
            }
            let dt = Solver::new(&grid, config.eps, &g, &scheme)?.max_dt();
            level_set_plan(&mut plan, "", &grid, dt, config.horizon);
        }
        Scenario::Obstacle => {
            let spec = config.obstacle.as_ref().expect("validated");
            let grid = config.grid.as_ref().expect("validated").build(Some(&dirs[0]), config.eps)?;
            let problem = ObstacleProblem::new(&dirs[0], spec.r, spec.rdot, spec.s)?;
            let kind = side(spec.side);
            let run = ObstacleRun::new(kind, &problem, &g, grid.clone(), &scheme, config.horizon)?;
            level_set_plan(&mut plan, "", &grid, run.solver.max_dt(), config.horizon);
            kv(&mut plan, "barrier_warning", run.barrier_warning);
        }
        Scenario::Speeds => {
            let e = config.speeds.as_ref().expect("validated");
            let cfg = estimator_config(e, config.horizon, &scheme);
            estimator_plan(&mut plan, &g, e, &cfg, dirs, config.eps)?;
        }
        Scenario::Sweep => {
            let spec = config.sweep.as_ref().expect("validated");
            if g.dim() != 2 {
                return bad("sweep directions lie on the circle: the forcing must be 2D").map_err(Into::into);
            }
            if spec.count < 3 {
                return bad("sweep.count must be at least 3").map_err(Into::into);
            }
            if spec.estimator.method == MethodSpec::Both {
                return bad("sweep.method must be front_tracking or obstacle_bisection").map_err(Into::into);
            }
            let cfg = estimator_config(&spec.estimator, config.horizon, &scheme);
            estimator_plan(&mut plan, &g, &spec.estimator, &cfg, &sweep_dirs(spec.count), config.eps)?;
        }
        Scenario::Finger => {
            let spec = config.finger.as_ref().expect("validated");
            if !(spec.t_fit > 0.0 && spec.t_fit < config.horizon) || spec.samples < 3 {
                return bad("finger needs 0 < t_fit < horizon and samples >= 3").map_err(Into::into);
            }
            graph_plan(&mut plan, &g, spec.cells, config)?;
        }
        Scenario::Laminar => {
            let spec = config.laminar.as_ref().expect("validated");
            if corollary {
                let p = config.forcing.corollary().ok_or_else(|| crate::config::ConfigError("laminar --corollary needs forcing.kind = \"corollary\"".into()))?;
                if !(spec.t_fit > 0.0 && spec.t_fit < config.horizon) {
                    return bad("laminar needs 0 < t_fit < horizon").map_err(Into::into);
                }
                kv(&mut plan, "sbar_lower", p.sbar_lower());
                kv(&mut plan, "sunder_upper", p.sunder_upper());
                kv(&mut plan, "required_rate", 0.9 * (p.sbar_lower() - p.sunder_upper()));
            } else if spec.wave_speeds.is_none() || spec.levels.is_empty() {
                return bad("laminar without --corollary needs wave_speeds and levels").map_err(Into::into);
            }
            graph_plan(&mut plan, &g, spec.cells, config)?;
        }
        Scenario::Discrepancy => {
            let spec = config.discrepancy.as_ref().expect("validated");
            if spec.n_max == 0 || spec.rows == 0 || !(spec.delta > 0.0) {
                return bad("discrepancy needs n_max >= 1, rows >= 1 and delta > 0").map_err(Into::into);
            }
            for d in dirs {
                let dir = Direction::new(d)?;
                kv(&mut plan, &format!("direction[{d:?}]"), format!("{:?}", dir.rationality));
            }
            kv(&mut plan, "n_max", spec.n_max);
            kv(&mut plan, "random_cases", spec.random_cases);
        }
        Scenario::Lcp => {
            let spec = config.lcp.as_ref().expect("validated");
            if dirs[0].len() != g.dim() && dirs[0].len() != g.dim() + 1 {
                return bad("lcp direction must match the forcing dimension (or exceed it by one for a laminar field)").map_err(Into::into);
            }
            let n = dirs[0].len();
            let c = comparison_constants(config.horizon, g.lower, g.upper, g.lipschitz, n)?;
            let big_r = (12.0 * (3.0 * n as f64 + g.upper + 27.0) / g.lipschitz).max(6.0);
            kv(&mut plan, "R", big_r);
            kv(&mut plan, "delta", c.delta_t / 2.0);
            kv(&mut plan, "s1", spec.s1);
            kv(&mut plan, "s2", spec.s2);
            kv(&mut plan, "cells_per_period", spec.cells_per_period);
        }
    }
    Ok(Prepared { scenario, config: config.clone(), g, plan, corollary })
}

fn graph_plan(plan: &mut Vec<(String, String)>, g: &ForcingField, cells: usize, config: &RunConfig) -> Result<()> {
    let grid = GraphGrid::torus(g.dim(), cells)?;
    let dt = GraphSolver::new(&grid, g, &config.scheme.graph())?.max_dt();
    kv(plan, "graph_shape", format!("{:?}", vec![cells; g.dim()]));
    kv(plan, "dx", grid.dx);
    kv(plan, "cfl_dt", dt);
    kv(plan, "steps", steps_for(config.horizon, dt));
    kv(plan, "memory_bytes", 6 * 8 * grid.len());
    Ok(())
}

fn side(s: SideSpec) -> Kind {
    match s {
        SideSpec::Sub => Kind::Sub,
        SideSpec::Super => Kind::Super,
    }
}

fn sweep_dirs(count: usize) -> Vec<Vec<f64>> {
    (0..count).map(|k| circle_direction(2.0 * std::f64::consts::PI * k as f64 / count as f64)).collect()
}

/// Text of the dry-run report.
pub fn explain(p: &Prepared) -> String {
    p.plan.iter().map(|(k, v)| format!("{k} = {v}\n")).collect()
}

struct Sink {
    dir: PathBuf,
    files: Vec<String>,
}

impl Sink {
    fn csv(&mut self, name: &str, t: &Table) -> Result<()> {
        t.write(&self.dir.join(name))?;
        self.files.push(name.to_string());
        Ok(())
    }

    fn json<T: Serialize>(&mut self, name: &str, v: &T) -> Result<()> {
        fs::write(self.dir.join(name), serde_json::to_string_pretty(v)? + "\n")?;
        self.files.push(name.to_string());
        Ok(())
    }

    fn snapshot(&mut self, stem: &str, st: &LevelSetField) -> Result<()> {
        write_snapshot(&self.dir, stem, st)?;
        self.files.push(format!("{stem}.pgm"));
        self.files.push(format!("{stem}.json"));
        Ok(())
    }
}

pub fn run(p: &Prepared, opts: &Options) -> Result<Manifest> {
    let start = Instant::now();
    fs::create_dir_all(&opts.out).with_context(|| format!("cannot create {}", opts.out.display()))?;
    let mut sink = Sink { dir: opts.out.clone(), files: Vec::new() };
    let summary = match p.scenario {
        Scenario::Simulate => run_simulate(p, &mut sink)?,
        Scenario::Obstacle => run_obstacle(p, &mut sink)?,
        Scenario::Speeds => run_speeds(p, &mut sink)?,
        Scenario::Sweep => run_sweep(p, &mut sink)?,
        Scenario::Finger => run_finger(p, &mut sink)?,
        Scenario::Laminar => run_laminar(p, &mut sink)?,
        Scenario::Discrepancy => run_discrepancy(p, &mut sink)?,
        Scenario::Lcp => run_lcp(p, &mut sink)?,
    };
    sink.json("summary.json", &summary)?;
    let g = &p.g;
    let mut outputs = sink.files.clone();
    outputs.sort();
    let manifest = Manifest {
        tool: "mcfhomog".into(),
        version: env!("CARGO_PKG_VERSION").into(),
        library_version: mcfhomog::VERSION.into(),
        scenario: p.scenario,
        seed: p.config.seed,
        workers: rayon::current_num_threads(),
        config: p.config.clone(),
        forcing: ForcingInfo { label: g.label().into(), dim: g.dim(), m0: g.lower, big_m0: g.upper, l0: g.lipschitz },
        outputs,
        summary,
        wall_time_s: start.elapsed().as_secs_f64(),
    };
    fs::write(opts.out.join("manifest.json"), serde_json::to_string_pretty(&manifest)? + "\n")?;
    Ok(manifest)
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

fn run_simulate(p: &Prepared, sink: &mut Sink) -> Result<Value> {
    let c = &p.config;
    let spec = c.simulate.as_ref().expect("validated");
    let grid = c.grid.as_ref().expect("validated").build(c.directions.first().map(|d| d.as_slice()), c.eps)?;
    let n = grid.dim();
    let solver = Solver::new(&grid, c.eps, &p.g, &c.scheme.level_set())?;
    let nu = c.directions.first().cloned().unwrap_or_else(|| {
        let mut e = vec![0.0; n];
        e[n - 1] = 1.0;
        e
    });
    let (mut state, center) = match &spec.initial {
        InitialSpec::Planar { offset } => (LevelSetField::planar(grid, c.eps, &nu, *offset), None),
        InitialSpec::Ball { center, radius } => {
            let cc = center.clone();
            let r = *radius;
            (LevelSetField::from_fn(grid, c.eps, move |x| r - x.iter().zip(&cc).map(|(a, b)| (a - b).powi(2)).sum::<f64>().sqrt()), Some(center.clone()))
        }
    };
    let mut table = Table::new(if center.is_some() { &["t", "head", "tail", "r_min", "r_mean", "r_max"] } else { &["t", "head", "tail"] });
    let (mut ts, mut heads) = (Vec::new(), Vec::new());
    let mut steps = 0;
    for i in 0..=spec.outputs {
        let t = c.horizon * i as f64 / spec.outputs as f64;
        if i > 0 {
            steps += solve(&solver, &mut state, t, None, |_| {})?;
        }
        let front = extract_front(&state, 0.0);
        if front.is_empty() {
            return Err(mcfhomog::Error::Geometry(format!("front left the grid by t = {t}")).into());
        }
        let proj: Vec<f64> = front.iter().map(|x| dot(x, &nu)).collect();
        let head = proj.iter().fold(f64::NEG_INFINITY, |m, v| m.max(*v));
        let tail = proj.iter().fold(f64::INFINITY, |m, v| m.min(*v));
        let mut row = vec![t, head, tail];
        if let Some(cc) = &center {
            let r: Vec<f64> = front.iter().map(|x| x.iter().zip(cc).map(|(a, b)| (a - b).powi(2)).sum::<f64>().sqrt()).collect();
            row.push(r.iter().fold(f64::INFINITY, |m, v| m.min(*v)));
            row.push(r.iter().sum::<f64>() / r.len() as f64);
            row.push(r.iter().fold(f64::NEG_INFINITY, |m, v| m.max(*v)));
        }
        table.push_floats(&row);
        ts.push(t);
        heads.push(head);
        if spec.snapshots && n == 2 {
            sink.snapshot(&format!("u_{i:04}"), &state)?;
        }
    }
    sink.csv("front.csv", &table)?;
    let (slope, _, se) = linear_fit(&ts, &heads);
    Ok(json!({ "head_slope": slope, "head_slope_se": se, "steps": steps, "dt": solver.max_dt() }))
}

fn run_obstacle(p: &Prepared, sink: &mut Sink) -> Result<Value> {
    let c = &p.config;
    let spec = c.obstacle.as_ref().expect("validated");
    let grid = c.grid.as_ref().expect("validated").build(Some(&c.directions[0]), c.eps)?;
    let problem = ObstacleProblem::new(&c.directions[0], spec.r, spec.rdot, spec.s)?;
    let mut run = ObstacleRun::new(side(spec.side), &problem, &p.g, grid, &c.scheme.level_set(), c.horizon)?;
    let mut table = Table::new(&["t", "axis_gap", "max_gap", "min_gap", "touching_fraction"]);
    let n_out = spec.outputs.max(1);
    for i in 0..=n_out {
        let t = c.horizon * i as f64 / n_out as f64;
        if i > 0 {
            run.advance_to(t)?;
        }
        let s = run.stats();
        table.push_floats(&[s.t, s.axis_gap, s.max_gap, s.min_gap, s.touching_fraction]);
    }
    sink.csv("obstacle.csv", &table)?;
    if run.state.grid.dim() == 2 {
        sink.snapshot("obstacle_final", &run.state)?;
    }
    let s = run.stats();
    Ok(json!({ "final": s, "barrier_warning": run.barrier_warning }))
}

fn methods(m: MethodSpec) -> Vec<Method> {
    match m {
        MethodSpec::FrontTracking => vec![Method::FrontTracking],
        MethodSpec::ObstacleBisection => vec![Method::ObstacleBisection],
        MethodSpec::Both => vec![Method::FrontTracking, Method::ObstacleBisection],
    }
}

fn nu_header(n: usize) -> Vec<String> {
    (0..n).map(|a| format!("nu_{a}")).collect()
}

fn run_speeds(p: &Prepared, sink: &mut Sink) -> Result<Value> {
    let c = &p.config;
    let e = c.speeds.as_ref().expect("validated");
    let cfg = estimator_config(e, c.horizon, &c.scheme.level_set());
    let ms = methods(e.method);
    let jobs: Vec<(usize, Method)> = (0..c.directions.len()).flat_map(|i| ms.iter().map(move |m| (i, *m))).collect();
    let results: Vec<mcfhomog::Result<(SpeedEstimate, SpeedEstimate)>> =
        jobs.par_iter().map(|(i, m)| estimate_both(&c.directions[*i], &p.g, &cfg, *m)).collect();
    let n = p.g.dim();
    let mut header = vec!["index".to_string()];
    header.extend(nu_header(n));
    header.extend(["method", "s_head", "hw_head", "s_tail", "hw_tail", "ordered"].map(String::from));
    let mut table = Table { header, rows: Vec::new() };
    let mut est = Vec::new();
    let mut all_ordered = true;
    for ((i, m), r) in jobs.iter().zip(results) {
        let (h, t) = r?;
        let ordered = t.value <= h.value + h.half_width + t.half_width;
        all_ordered &= ordered;
        let mut row = vec![i.to_string()];
        row.extend(c.directions[*i].iter().map(|v| v.to_string()));
        row.extend([m.as_str().to_string(), h.value.to_string(), h.half_width.to_string(), t.value.to_string(), t.half_width.to_string(), ordered.to_string()]);
        table.push(row);
        est.push((*i, *m, h, t));
    }
    sink.csv("speeds.csv", &table)?;
    let mut summary = json!({ "all_ordered": all_ordered });
    if e.method == MethodSpec::Both {
        let mut cross = Table::new(&["index", "head_ft", "head_bis", "head_agree", "tail_ft", "tail_bis", "tail_agree"]);
        let mut all_agree = true;
        for i in 0..c.directions.len() {
            let pick = |m: Method| est.iter().find(|e| e.0 == i && e.1 == m).expect("both methods ran");
            let (ft, bi) = (pick(Method::FrontTracking), pick(Method::ObstacleBisection));
            let agree = |a: &SpeedEstimate, b: &SpeedEstimate| (a.value - b.value).abs() <= a.half_width + b.half_width;
            let (ha, ta) = (agree(&ft.2, &bi.2), agree(&ft.3, &bi.3));
            all_agree &= ha && ta;
            cross.push(vec![
                i.to_string(),
                ft.2.value.to_string(),
                bi.2.value.to_string(),
                ha.to_string(),
                ft.3.value.to_string(),
                bi.3.value.to_string(),
                ta.to_string(),
            ]);
        }
        sink.csv("cross.csv", &cross)?;
        summary["all_agree"] = json!(all_agree);
    }
    Ok(summary)
}

fn run_sweep(p: &Prepared, sink: &mut Sink) -> Result<Value> {
    let c = &p.config;
    let spec = c.sweep.as_ref().expect("validated");
    let cfg = estimator_config(&spec.estimator, c.horizon, &c.scheme.level_set());
    let method = methods(spec.estimator.method)[0];
    let table = sweep_directions(&p.g, &sweep_dirs(spec.count), &cfg, method)?;
    let mut out = Table::new(&["theta", "nu_x", "nu_y", "s_head", "s_tail", "hw_head", "hw_tail", "method", "ordered"]);
    for r in &table.rows {
        out.push(vec![
            r.theta.to_string(),
            r.nu[0].to_string(),
            r.nu[1].to_string(),
            r.s_head.to_string(),
            r.s_tail.to_string(),
            r.hw_head.to_string(),
            r.hw_tail.to_string(),
            r.method.as_str().to_string(),
            r.ordered.to_string(),
        ]);
    }
    sink.csv("sweep.csv", &out)?;
    let head_table: Vec<(f64, f64)> = table.rows.iter().map(|r| (r.theta, r.s_head)).collect();
    let tail_table: Vec<(f64, f64)> = table.rows.iter().map(|r| (r.theta, r.s_tail)).collect();
    sink.json("speed_table.json", &json!({ "head": head_table, "tail": tail_table }))?;
    Ok(json!({ "max_variation": table.max_variation, "all_ordered": table.rows.iter().all(|r| r.ordered) }))
}

fn run_finger(p: &Prepared, sink: &mut Sink) -> Result<Value> {
    let c = &p.config;
    let spec = c.finger.as_ref().expect("validated");
    let grid = GraphGrid::torus(p.g.dim(), spec.cells)?;
    let rep = fingering_run(&p.g, &grid, &c.scheme.graph(), c.horizon, spec.t_fit, spec.samples)?;
    let mut t = Table::new(&["t", "spread"]);
    for (a, b) in rep.times.iter().zip(&rep.spread) {
        t.push_floats(&[*a, *b]);
    }
    sink.csv("finger.csv", &t)?;
    let mut summary = json!({ "rate": rep.rate, "rate_half_width": rep.rate_half_width });
    if let Some(cp) = c.forcing.corollary() {
        let required = 0.9 * (cp.sbar_lower() - cp.sunder_upper());
        summary["required_rate"] = json!(required);
        summary["passed"] = json!(rep.rate >= required);
    }
    Ok(summary)
}

fn run_laminar(p: &Prepared, sink: &mut Sink) -> Result<Value> {
    let c = &p.config;
    let spec = c.laminar.as_ref().expect("validated");
    let params = c.scheme.graph();
    let grid = GraphGrid::torus(p.g.dim(), spec.cells)?;
    if p.corollary {
        let cp = c.forcing.corollary().expect("validated");
        let (sbar, sunder) = (cp.sbar_lower(), cp.sunder_upper());
        let sub = construct_subsolution_profile(cp.r1, &cp.y1, sbar)?;
        let sup = construct_supersolution_profile(cp.r2, cp.big_r, &cp.y2, sunder)?;
        let tol = spec.residual_tol;
        let sub_rep = residual_check(&sub, sbar, &p.g, &grid, tol)?;
        let sup_rep = residual_check(&sup, sunder, &p.g, &grid, tol)?;
        // Negative controls: speeds that cannot be certified must be rejected.
        let sub_ctl = residual_check(&sub, cp.g_high, &p.g, &grid, tol)?;
        let sup_ctl = residual_check(&sup, 1.0 / (cp.big_r - cp.r2), &p.g, &grid, tol)?;
        let cor = verify_corollary(&cp, spec.cells, &params, c.horizon, spec.t_fit)?;
        if let Some(f) = &cor.fingering {
            let mut t = Table::new(&["t", "spread"]);
            for (a, b) in f.times.iter().zip(&f.spread) {
                t.push_floats(&[*a, *b]);
            }
            sink.csv("finger.csv", &t)?;
        }
        let checks = [
            ("hypotheses", cor.hypotheses_ok),
            ("subsolution_residual", sub_rep.passed),
            ("supersolution_residual", sup_rep.passed),
            ("subsolution_control_rejected", !sub_ctl.passed),
            ("supersolution_control_rejected", !sup_ctl.passed),
            ("fingering_rate", cor.passed),
        ];
        let mut t = Table::new(&["check", "passed"]);
        for (k, v) in checks {
            t.push(vec![k.to_string(), v.to_string()]);
            println!("{} {k}", if v { "PASS" } else { "FAIL" });
        }
        sink.csv("certificates.csv", &t)?;
        let passed = checks.iter().all(|(_, v)| *v);
        println!("{} corollary", if passed { "PASS" } else { "FAIL" });
        sink.json(
            "laminar.json",
            &json!({ "corollary": cor, "sub": sub_rep, "super": sup_rep, "sub_control": sub_ctl, "super_control": sup_ctl }),
        )?;
        Ok(json!({ "passed": passed, "rate": cor.fingering.as_ref().map(|f| f.rate), "required_rate": cor.required_rate }))
    } else {
        let [sh, st] = spec.wave_speeds.expect("validated");
        let mut summary = serde_json::Map::new();
        for (name, kind, s) in [("sub", Kind::Sub, sh), ("super", Kind::Super, st)] {
            let w = extract_traveling_wave(&p.g, &grid, &params, kind, s, &spec.levels)?;
            let mut header: Vec<String> = (0..grid.dim()).map(|a| format!("y_{a}")).collect();
            header.extend(["profile", "mask"].map(String::from));
            let mut t = Table { header, rows: Vec::new() };
            for k in 0..grid.len() {
                let mut row: Vec<String> = grid.position(k).iter().map(|v| v.to_string()).collect();
                row.push(w.profile[k].to_string());
                row.push(w.mask[k].to_string());
                t.push(row);
            }
            sink.csv(&format!("wave_{name}.csv"), &t)?;
            summary.insert(
                name.into(),
                json!({ "speed": w.speed, "status": w.status, "ladder": w.ladder, "boundary_curvature_error": w.boundary_curvature_error }),
            );
        }
        Ok(Value::Object(summary))
    }
}

fn run_discrepancy(p: &Prepared, sink: &mut Sink) -> Result<Value> {
    let c = &p.config;
    let spec = c.discrepancy.as_ref().expect("validated");
    let mut per_dir = Vec::new();
    let mut ns: Vec<usize> = (0..spec.rows)
        .map(|i| {
            let f = if spec.rows > 1 { i as f64 / (spec.rows - 1) as f64 } else { 1.0 };
            (spec.n_max as f64).powf(f).round() as usize
        })
        .collect();
    ns.dedup();
    for (i, d) in c.directions.iter().enumerate() {
        let dir = Direction::new(d)?;
        let m = dir.m();
        let mut header = vec!["N".to_string()];
        header.extend((0..m.len()).map(|j| format!("dstar_{j}")));
        header.push("omega".into());
        let rows: Vec<Vec<String>> = ns
            .par_iter()
            .map(|&nn| {
                let mut row = vec![nn.to_string()];
                row.extend(m.iter().map(|x| modified_discrepancy(*x, nn).to_string()));
                row.push(omega(&dir, nn).to_string());
                row
            })
            .collect();
        sink.csv(&format!("discrepancy_{i}.csv"), &Table { header, rows })?;
        let threshold = omega_threshold_n(&dir, spec.delta, spec.n_max);
        let r0v = r0(&dir, spec.delta, spec.n_max).ok();
        per_dir.push(json!({ "nu": d, "rationality": dir.rationality, "threshold_n": threshold, "R0": r0v }));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(c.seed);
    let cases: Vec<(f64, usize)> = (0..spec.random_cases).map(|_| (rng.gen::<f64>(), rng.gen_range(1..=200))).collect();
    let rows: Vec<(f64, usize, f64, f64, f64)> = cases
        .par_iter()
        .map(|&(x, nn)| (x, nn, modified_discrepancy(x, nn), discrepancy(x, nn), discrepancy_brute_force(x, nn)))
        .collect();
    let mut t = Table::new(&["x", "N", "dstar", "d", "d_brute", "ok"]);
    let mut failures = 0;
    for (x, nn, ds, dd, db) in rows {
        let ok = ds <= dd && dd <= 2.0 * ds && (dd - db).abs() <= 1e-12;
        failures += usize::from(!ok);
        t.push(vec![x.to_string(), nn.to_string(), ds.to_string(), dd.to_string(), db.to_string(), ok.to_string()]);
    }
    sink.csv("random_cases.csv", &t)?;
    Ok(json!({ "directions": per_dir, "random_failures": failures }))
}

fn run_lcp(p: &Prepared, sink: &mut Sink) -> Result<Value> {
    let c = &p.config;
    let spec = c.lcp.as_ref().expect("validated");
    let cfg = LcpConfig { cells_per_period: spec.cells_per_period, samples: spec.samples, scheme: c.scheme.level_set(), graph: c.scheme.graph() };
    let rep = check_lcp(&c.directions[0], spec.s1, spec.s2, &p.g, c.horizon, &cfg)?;
    let mut t = Table::new(&["t", "margin", "control_margin"]);
    for ((a, b), d) in rep.times.iter().zip(&rep.margins).zip(&rep.control_margins) {
        t.push_floats(&[*a, *b, *d]);
    }
    sink.csv("lcp.csv", &t)?;
    sink.json("lcp.json", &rep)?;
    Ok(json!({ "path": rep.path, "ordered": rep.ordered, "control_fails": rep.control_fails, "min_margin": rep.min_margin }))
}

/// Resolves the output directory: `--out`, then the config's `out`, then `out/<scenario>`.
pub fn output_dir(cli: Option<&Path>, config: &RunConfig, scenario: Scenario) -> PathBuf {
    cli.map(Path::to_path_buf).or_else(|| config.out.clone()).unwrap_or_else(|| PathBuf::from("out").join(scenario.as_str()))
}
