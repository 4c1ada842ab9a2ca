//! Head/tail speed estimation (front tracking and obstacle bisection), detachment detection,
//! direction sweeps, fingering metrics and envelope checks.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::forcing::ForcingField;
use crate::laminar::linear_fit;
use crate::levelset::{extract_front, lateral_distance, solve, Boundary, Grid, LevelSetField, SchemeParams, Solver};
use crate::obstacle::{Kind, ObstacleProblem, ObstacleRun};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SpeedConfig {
    /// Nodes per lattice period (`eps/dx`).
    pub cells_per_period: usize,
    /// Edge of the twisted-periodic box, in periods.
    pub box_periods: usize,
    /// Radius of the cylinder `Ω(0, r; nu)` in which head and tail are read (at least `sqrt(n)`).
    pub radius: f64,
    /// Front-tracking horizon.
    pub horizon: f64,
    pub samples: usize,
    /// Horizon of each bisection probe.
    pub probe_horizon: f64,
    pub bisection_iters: usize,
    pub scheme: SchemeParams,
}

impl Default for SpeedConfig {
    fn default() -> Self {
        SpeedConfig {
            cells_per_period: 16,
            box_periods: 1,
            radius: 3.0,
            horizon: 40.0,
            samples: 200,
            probe_horizon: 32.0,
            bisection_iters: 8,
            scheme: SchemeParams::default(),
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SpeedKind {
    Head,
    Tail,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Method {
    FrontTracking,
    ObstacleBisection,
}

impl Method {
    pub fn as_str(self) -> &'static str {
        match self {
            Method::FrontTracking => "front_tracking",
            Method::ObstacleBisection => "obstacle_bisection",
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct SpeedEstimate {
    pub nu: Vec<f64>,
    pub kind: SpeedKind,
    pub value: f64,
    pub method: Method,
    pub half_width: f64,
    pub horizon: f64,
}

pub fn twisted_box(nu: &[f64], eps: f64, cfg: &SpeedConfig) -> Result<Grid> {
    Grid::twisted(nu, eps, cfg.box_periods, cfg.cells_per_period)
}

/// `(sup, inf)` of `y.nu` over the whole-space level-`mu` set inside `Ω(0, r; nu)`, for a field on
/// [`Grid::twisted`]: the translate `box + L k` holds the box's level `mu + L k.nu`.
pub fn lattice_front_extent(state: &LevelSetField, nu: &[f64], r: f64, mu: f64) -> Option<(f64, f64)> {
    let grid = &state.grid;
    let n = grid.dim();
    let side = grid.shape[0] as f64 * grid.dx;
    let diam = side * (n as f64).sqrt();
    let (umin, umax) = state.min_max();
    let (c0, c1) = (umin - mu - grid.dx, umax - mu + grid.dx);
    let reach = r + diam;
    let lo: Vec<i64> = (0..n).map(|a| (((c0 * nu[a]).min(c1 * nu[a]) - reach) / side).floor() as i64).collect();
    let hi: Vec<i64> = (0..n).map(|a| (((c0 * nu[a]).max(c1 * nu[a]) + reach) / side).ceil() as i64).collect();
    let mut k = lo.clone();
    let mut head = f64::NEG_INFINITY;
    let mut tail = f64::INFINITY;
    loop {
        let shift: Vec<f64> = k.iter().map(|v| *v as f64 * side).collect();
        let c: f64 = shift.iter().zip(nu).map(|(a, b)| a * b).sum();
        let lateral = shift.iter().zip(nu).map(|(a, b)| (a - c * b).powi(2)).sum::<f64>().sqrt();
        if c >= c0 && c <= c1 && lateral <= reach {
            for x in extract_front(state, mu + c) {
                let y: Vec<f64> = x.iter().zip(&shift).map(|(a, b)| a + b).collect();
                if lateral_distance(&y, &vec![0.0; n], nu) < r {
                    let p: f64 = y.iter().zip(nu).map(|(a, b)| a * b).sum();
                    head = head.max(p);
                    tail = tail.min(p);
                }
            }
        }
        let mut a = 0;
        loop {
            if a == n {
                return (head > f64::NEG_INFINITY).then_some((head, tail));
            }
            k[a] += 1;
            if k[a] <= hi[a] {
                break;
            }
            k[a] = lo[a];
            a += 1;
        }
    }
}

fn check_nu(nu: &[f64], g: &ForcingField) -> Result<()> {
    let nn = nu.iter().map(|v| v * v).sum::<f64>().sqrt();
    if (nn - 1.0).abs() > 1e-9 {
        return Err(Error::Parameter(format!("|nu| = {nn} != 1")));
    }
    if nu.len() != g.dim() {
        return Err(Error::Parameter("nu and forcing dimensions differ".into()));
    }
    Ok(())
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct FrontTrack {
    pub times: Vec<f64>,
    pub head: Vec<f64>,
    pub tail: Vec<f64>,
}

/// Solves from `u0 = -x.nu` on the twisted box and samples `(head, tail)` of the zero front.
pub fn track_planar_front(nu: &[f64], g: &ForcingField, eps: f64, cfg: &SpeedConfig, horizon: f64) -> Result<FrontTrack> {
    check_nu(nu, g)?;
    let n = nu.len();
    if cfg.radius < (n as f64).sqrt() {
        return Err(Error::Parameter(format!("cylinder radius {} below sqrt(n)", cfg.radius)));
    }
    let grid = twisted_box(nu, eps, cfg)?;
    let solver = Solver::new(&grid, eps, g, &cfg.scheme)?;
    let mut st = LevelSetField::planar(grid, eps, nu, 0.0);
    let mut track = FrontTrack { times: Vec::new(), head: Vec::new(), tail: Vec::new() };
    for i in 1..=cfg.samples {
        let t = horizon * i as f64 / cfg.samples as f64;
        solve(&solver, &mut st, t, None, |_| {})?;
        let (h, tl) = lattice_front_extent(&st, nu, cfg.radius * eps, 0.0).ok_or_else(|| Error::Internal("no front found".into()))?;
        track.times.push(t);
        track.head.push(h);
        track.tail.push(tl);
    }
    Ok(track)
}

fn fit_second_half(times: &[f64], ys: &[f64], horizon: f64, dx: f64) -> (f64, f64) {
    let (xs, vs): (Vec<f64>, Vec<f64>) = times.iter().zip(ys).filter(|(t, _)| **t >= horizon / 2.0).map(|(t, y)| (*t, *y)).unzip();
    let (slope, _, se) = linear_fit(&xs, &vs);
    (slope, 2.0 * se + dx / horizon)
}

/// Head and tail slopes of the planar front (least squares over the second half of `[0, T]`).
pub fn estimate_speed_front_tracking(nu: &[f64], g: &ForcingField, cfg: &SpeedConfig) -> Result<(SpeedEstimate, SpeedEstimate, FrontTrack)> {
    let need = 20.0 / g.lower;
    if cfg.horizon < need {
        return Err(Error::Precondition(format!("horizon {} below 20/m0 = {need}", cfg.horizon)));
    }
    let track = track_planar_front(nu, g, 1.0, cfg, cfg.horizon)?;
    let dx = 1.0 / cfg.cells_per_period as f64;
    let (h, hw_h) = fit_second_half(&track.times, &track.head, cfg.horizon, dx);
    let (t, hw_t) = fit_second_half(&track.times, &track.tail, cfg.horizon, dx);
    let mk = |kind, value, half_width| SpeedEstimate { nu: nu.to_vec(), kind, value, method: Method::FrontTracking, half_width, horizon: cfg.horizon };
    Ok((mk(SpeedKind::Head, h, hw_h), mk(SpeedKind::Tail, t, hw_t), track))
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum DetachStatus {
    Detached,
    Attached,
    Undecided,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct DetachmentReport {
    pub level: f64,
    pub r: f64,
    pub first_detach_time: Option<f64>,
    pub persistent: bool,
    pub min_gap_after: f64,
    pub status: DetachStatus,
}

/// Applies the grid detachment rule to a sampled gap history: detached when `gap >= 2 dx` holds
/// from some time on and throughout the last quarter of the horizon; attached when the final gap
/// is below `2 dx`; undecided otherwise.
pub fn detect_detachment(times: &[f64], gaps: &[f64], dx: f64, level: f64, r: f64) -> DetachmentReport {
    let thr = 2.0 * dx;
    let horizon = times.last().copied().unwrap_or(0.0);
    let mut first = None;
    for i in (0..gaps.len()).rev() {
        if gaps[i] >= thr {
            first = Some(i);
        } else {
            break;
        }
    }
    let first_detach_time = first.map(|i| times[i]);
    let min_gap_after = first.map(|i| gaps[i..].iter().fold(f64::INFINITY, |m, v| m.min(*v))).unwrap_or(f64::NAN);
    let persistent = first_detach_time.is_some_and(|t| t <= 0.75 * horizon);
    let status = if persistent {
        DetachStatus::Detached
    } else if gaps.last().is_none_or(|g| *g < thr) {
        DetachStatus::Attached
    } else {
        DetachStatus::Undecided
    };
    DetachmentReport { level, r, first_detach_time, persistent, min_gap_after, status }
}

/// Gap history of one global-variant obstacle run (`s t - head` for sub, `tail - s t` for super).
pub fn probe_detachment(nu: &[f64], g: &ForcingField, kind: Kind, s: f64, horizon: f64, cfg: &SpeedConfig) -> Result<DetachmentReport> {
    check_nu(nu, g)?;
    let grid = twisted_box(nu, 1.0, cfg)?;
    let dx = grid.dx;
    let problem = ObstacleProblem::global(nu, s)?;
    let mut run = ObstacleRun::new(kind, &problem, g, grid, &cfg.scheme, horizon)?;
    let mut times = Vec::new();
    let mut gaps = Vec::new();
    let m = cfg.samples.max(16);
    for i in 1..=m {
        let t = horizon * i as f64 / m as f64;
        run.advance_to(t)?;
        let (h, tl) = lattice_front_extent(&run.state, nu, cfg.radius, 0.0).ok_or_else(|| Error::Internal("no front found".into()))?;
        times.push(t);
        gaps.push(match kind {
            Kind::Sub => s * t - h,
            Kind::Super => tl - s * t,
        });
    }
    Ok(detect_detachment(&times, &gaps, dx, 0.0, cfg.radius))
}

fn detaches(nu: &[f64], g: &ForcingField, kind: Kind, s: f64, cfg: &SpeedConfig) -> Result<bool> {
    let r = probe_detachment(nu, g, kind, s, cfg.probe_horizon, cfg)?;
    match r.status {
        DetachStatus::Detached => Ok(true),
        DetachStatus::Attached => Ok(false),
        DetachStatus::Undecided => {
            let r = probe_detachment(nu, g, kind, s, 2.0 * cfg.probe_horizon, cfg)?;
            match r.status {
                DetachStatus::Detached => Ok(true),
                DetachStatus::Attached => Ok(false),
                DetachStatus::Undecided => Err(Error::Undecided(format!("detachment at s = {s} undecided after doubling the horizon"))),
            }
        }
    }
}

/// Head: smallest `s` whose obstacle subsolution detaches; tail: largest `s` whose obstacle
/// supersolution detaches. Whole-space (twisted-periodic) variant.
pub fn estimate_speed_obstacle_bisection(nu: &[f64], g: &ForcingField, kind: SpeedKind, cfg: &SpeedConfig) -> Result<SpeedEstimate> {
    check_nu(nu, g)?;
    let span = g.upper - g.lower;
    let pad = 0.25 * span + 0.1;
    let (okind, mut lo, mut hi) = match kind {
        SpeedKind::Head => (Kind::Sub, g.lower, g.upper + pad),
        SpeedKind::Tail => (Kind::Super, (g.lower - pad).max(0.05 * g.lower), g.upper),
    };
    // Invariant: for head, lo attached and hi detached; for tail, lo detached and hi attached.
    let want_hi = kind == SpeedKind::Head;
    if detaches(nu, g, okind, hi, cfg)? != want_hi || detaches(nu, g, okind, lo, cfg)? == want_hi {
        return Err(Error::Undecided(format!("bracket [{lo}, {hi}] does not separate detachment")));
    }
    for _ in 0..cfg.bisection_iters {
        let mid = 0.5 * (lo + hi);
        if detaches(nu, g, okind, mid, cfg)? == want_hi {
            hi = mid;
        } else {
            lo = mid;
        }
    }
    let dx = 1.0 / cfg.cells_per_period as f64;
    Ok(SpeedEstimate {
        nu: nu.to_vec(),
        kind,
        value: 0.5 * (lo + hi),
        method: Method::ObstacleBisection,
        half_width: 0.5 * (hi - lo) + 4.0 * dx / cfg.probe_horizon,
        horizon: cfg.probe_horizon,
    })
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct SweepRow {
    pub theta: f64,
    pub nu: Vec<f64>,
    pub s_head: f64,
    pub s_tail: f64,
    pub hw_head: f64,
    pub hw_tail: f64,
    pub method: Method,
    pub ordered: bool,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct SweepTable {
    pub rows: Vec<SweepRow>,
    /// Largest `|s(nu_i) - s(nu_j)| / |nu_i - nu_j|` over adjacent samples (head and tail).
    pub max_variation: f64,
}

/// Direction `(cos theta, sin theta)`.
pub fn circle_direction(theta: f64) -> Vec<f64> {
    vec![theta.cos(), theta.sin()]
}

pub fn estimate_both(nu: &[f64], g: &ForcingField, cfg: &SpeedConfig, method: Method) -> Result<(SpeedEstimate, SpeedEstimate)> {
    match method {
        Method::FrontTracking => estimate_speed_front_tracking(nu, g, cfg).map(|(h, t, _)| (h, t)),
        Method::ObstacleBisection => Ok((
            estimate_speed_obstacle_bisection(nu, g, SpeedKind::Head, cfg)?,
            estimate_speed_obstacle_bisection(nu, g, SpeedKind::Tail, cfg)?,
        )),
    }
}

pub fn sweep_directions(g: &ForcingField, directions: &[Vec<f64>], cfg: &SpeedConfig, method: Method) -> Result<SweepTable> {
    if directions.len() < 3 {
        return Err(Error::Parameter("a sweep needs at least 3 directions".into()));
    }
    let results: Vec<Result<(SpeedEstimate, SpeedEstimate)>> = directions.par_iter().map(|nu| estimate_both(nu, g, cfg, method)).collect();
    let mut rows = Vec::with_capacity(directions.len());
    for (nu, r) in directions.iter().zip(results) {
        let (h, t) = r?;
        let theta = if nu.len() == 2 { nu[1].atan2(nu[0]) } else { f64::NAN };
        rows.push(SweepRow {
            theta,
            nu: nu.clone(),
            s_head: h.value,
            s_tail: t.value,
            hw_head: h.half_width,
            hw_tail: t.half_width,
            method,
            ordered: t.value <= h.value + h.half_width + t.half_width,
        });
    }
    let mut max_variation: f64 = 0.0;
    for w in rows.windows(2) {
        let d = w[0].nu.iter().zip(&w[1].nu).map(|(a, b)| (a - b).powi(2)).sum::<f64>().sqrt();
        if d > 0.0 {
            max_variation = max_variation.max((w[0].s_head - w[1].s_head).abs() / d).max((w[0].s_tail - w[1].s_tail).abs() / d);
        }
    }
    Ok(SweepTable { rows, max_variation })
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct FingerSeries {
    pub times: Vec<f64>,
    pub spread: Vec<f64>,
    pub rate: f64,
    /// Largest decrease of the spread between consecutive samples.
    pub max_drop: f64,
}

/// `spread(t) = head(t) - tail(t)` with its least-squares rate over `[t_fit, T]`.
pub fn fingering_metric(track: &FrontTrack, t_fit: f64) -> FingerSeries {
    let spread: Vec<f64> = track.head.iter().zip(&track.tail).map(|(h, t)| h - t).collect();
    let (xs, ys): (Vec<f64>, Vec<f64>) = track.times.iter().zip(&spread).filter(|(t, _)| **t >= t_fit).map(|(t, s)| (*t, *s)).unzip();
    let (rate, _, _) = linear_fit(&xs, &ys);
    let max_drop = spread.windows(2).fold(0.0f64, |m, w| m.max(w[0] - w[1]));
    FingerSeries { times: track.times.clone(), spread, rate, max_drop }
}

pub const CLAMP_SKIP: usize = 8;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Anchor {
    pub x: Vec<f64>,
    pub nu: Vec<f64>,
    /// Head speed `s_bar(nu)` used for the half-space `(x - x_i).nu_i <= s t`.
    pub speed: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct EnvelopeReport {
    pub nodes_checked: usize,
    pub violations: usize,
    pub worst_excess: f64,
    pub worst_point: Vec<f64>,
    pub initial_ok: bool,
}

impl EnvelopeReport {
    pub fn passed(&self) -> bool {
        self.violations == 0 && self.initial_ok
    }
}

/// Checks that `{u >= 0}` stays inside the intersection of `(x - x_i).nu_i <= s_i t`, dilated by `3 dx`.
/// Nodes within `CLAMP_SKIP` cells of a clamped face are skipped (the constant extension there is not
/// the whole-space flow).
pub fn check_envelope(snapshots: &[LevelSetField], anchors: &[Anchor]) -> EnvelopeReport {
    let mut rep = EnvelopeReport { nodes_checked: 0, violations: 0, worst_excess: f64::NEG_INFINITY, worst_point: Vec::new(), initial_ok: true };
    for st in snapshots {
        let dx = st.grid.dx;
        let mut idx = vec![0; st.grid.dim()];
        let tol = if st.time == 0.0 { 1e-12 } else { 3.0 * dx };
        for (k, v) in st.values.iter().enumerate() {
            if *v < 0.0 {
                continue;
            }
            st.grid.unravel(k, &mut idx);
            let near_wall = (0..st.grid.dim()).any(|a| {
                st.grid.boundary[a] == Boundary::Clamped && (idx[a] < CLAMP_SKIP || idx[a] + CLAMP_SKIP >= st.grid.shape[a])
            });
            if near_wall {
                continue;
            }
            let x = st.grid.position_flat(k);
            rep.nodes_checked += 1;
            let excess = anchors
                .iter()
                .map(|a| x.iter().zip(&a.x).zip(&a.nu).map(|((p, q), n)| (p - q) * n).sum::<f64>() - a.speed * st.time)
                .fold(f64::NEG_INFINITY, f64::max);
            if excess > rep.worst_excess {
                rep.worst_excess = excess;
                rep.worst_point = x.clone();
            }
            if excess > tol {
                if st.time == 0.0 {
                    rep.initial_ok = false;
                } else {
                    rep.violations += 1;
                }
            }
        }
    }
    rep
}
