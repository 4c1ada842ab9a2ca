//! Obstacle sub/supersolutions in moving cylinders, explicit boundary barriers and the
//! Birkhoff monotonicity checks.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::forcing::ForcingField;
use crate::discrepancy::{comparison_constants, is_comparison_consistent, lattice_min_shift, ConsistencyReport, Direction};
use crate::laminar::{GraphCylinder, GraphGrid, GraphObstacleRun, GraphParams};
use crate::levelset::{Boundary, Grid, LevelSetField, SchemeParams, Solver};

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

fn norm(a: &[f64]) -> f64 {
    dot(a, a).sqrt()
}

/// Component of `v` orthogonal to the unit vector `nu`.
fn perp_norm(v: &[f64], nu: &[f64]) -> f64 {
    let p = dot(v, nu);
    v.iter().zip(nu).map(|(a, b)| (a - p * b).powi(2)).sum::<f64>().sqrt()
}

/// Planar obstacle `O(x, t) = x.q + s t |q|`, moving with speed `s` along `nu = -q/|q|`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Obstacle {
    pub nu: Vec<f64>,
    pub q: Vec<f64>,
    pub s: f64,
}

impl Obstacle {
    pub fn new(q: Vec<f64>, s: f64) -> Result<Self> {
        let qn = norm(&q);
        if !(qn > 0.0) || !qn.is_finite() {
            return Err(Error::Parameter("obstacle slope q must be nonzero".into()));
        }
        Ok(Obstacle { nu: q.iter().map(|v| -v / qn).collect(), q, s })
    }

    /// Unit slope `q = -nu`.
    pub fn unit(nu: &[f64], s: f64) -> Result<Self> {
        Self::new(nu.iter().map(|v| -v).collect(), s)
    }

    pub fn value(&self, x: &[f64], t: f64) -> f64 {
        dot(x, &self.q) + self.s * t * norm(&self.q)
    }
}

/// `C(t) = {x : |(x - x0) - ((x - x0).nu) nu| < R + Rdot t}`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Cylinder {
    pub nu: Vec<f64>,
    pub x0: Vec<f64>,
    pub r: f64,
    pub rdot: f64,
}

impl Cylinder {
    pub fn radius(&self, t: f64) -> f64 {
        self.r + self.rdot * t
    }

    pub fn lateral(&self, x: &[f64]) -> f64 {
        let d: Vec<f64> = x.iter().zip(&self.x0).map(|(a, b)| a - b).collect();
        perp_norm(&d, &self.nu)
    }

    pub fn contains(&self, x: &[f64], t: f64) -> bool {
        self.lateral(x) < self.radius(t)
    }
}

/// `a = (nu, R, Rdot, q, s)`. `r = inf` selects the whole-space (global) variant.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ObstacleProblem {
    pub nu: Vec<f64>,
    pub r: f64,
    pub rdot: f64,
    pub q: Vec<f64>,
    pub s: f64,
}

impl ObstacleProblem {
    pub fn new(nu: &[f64], r: f64, rdot: f64, s: f64) -> Result<Self> {
        let n = norm(nu);
        if (n - 1.0).abs() > 1e-12 {
            return Err(Error::Parameter(format!("|nu| = {n} != 1")));
        }
        if !(r > 0.0) {
            return Err(Error::Parameter(format!("cylinder radius must be positive, got {r}")));
        }
        Ok(ObstacleProblem { nu: nu.to_vec(), r, rdot, q: nu.iter().map(|v| -v).collect(), s })
    }

    pub fn global(nu: &[f64], s: f64) -> Result<Self> {
        Self::new(nu, f64::INFINITY, 0.0, s)
    }

    pub fn obstacle(&self) -> Obstacle {
        Obstacle { nu: self.nu.clone(), q: self.q.clone(), s: self.s }
    }

    pub fn cylinder(&self) -> Cylinder {
        Cylinder { nu: self.nu.clone(), x0: vec![0.0; self.nu.len()], r: self.r, rdot: self.rdot }
    }

    pub fn validate(&self, horizon: f64) -> Result<()> {
        let qn = norm(&self.q);
        let nu_q: Vec<f64> = self.q.iter().map(|v| -v / qn).collect();
        if !(qn > 0.0) || nu_q.iter().zip(&self.nu).any(|(a, b)| (a - b).abs() > 1e-12) {
            return Err(Error::Parameter("need q != 0 and nu = -q/|q|".into()));
        }
        if !(self.r + self.rdot * horizon > 0.0) {
            return Err(Error::Parameter(format!("R + Rdot T = {} must stay positive", self.r + self.rdot * horizon)));
        }
        Ok(())
    }

    /// `sigma` of the admissible normals of the subsolution barrier (needs `Rdot >= 0`, `s >= m0`).
    pub fn sigma_sub(&self, m0: f64) -> f64 {
        let (rd, s) = (self.rdot, self.s);
        (m0 * s + rd * (rd * rd + s * s - m0 * m0).max(0.0).sqrt()) / (rd * rd + s * s)
    }

    /// `sigma = s/sqrt(Rdot^2 + s^2)` of the supersolution barrier.
    pub fn sigma_super(&self) -> f64 {
        self.s / (self.rdot * self.rdot + self.s * self.s).sqrt()
    }

    /// `sup_mu V_mu`: `-|q| x.nu + (|q|/sigma)(sqrt(1 - sigma^2)(|x_perp| - R) + m0 t)`.
    pub fn barrier_sub(&self, x: &[f64], t: f64, m0: f64) -> f64 {
        let sg = self.sigma_sub(m0);
        let qn = norm(&self.q);
        let c = (1.0 - sg * sg).max(0.0).sqrt();
        -qn * dot(x, &self.nu) + qn / sg * (c * (perp_norm(x, &self.nu) - self.r) + m0 * t)
    }

    /// `inf_mu V_mu`: `-|q| sigma (sigma x.nu + sqrt(1 - sigma^2)|x_perp| - R Rdot sigma/s - sqrt(Rdot^2 + s^2) t)`.
    pub fn barrier_super(&self, x: &[f64], t: f64) -> f64 {
        let sg = self.sigma_super();
        let qn = norm(&self.q);
        let c = (1.0 - sg * sg).max(0.0).sqrt();
        let shift = self.r * self.rdot * sg / self.s + (self.rdot * self.rdot + self.s * self.s).sqrt() * t;
        -qn * sg * (sg * dot(x, &self.nu) + c * perp_norm(x, &self.nu) - shift)
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Kind {
    Sub,
    Super,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct ObstacleStats {
    pub t: f64,
    /// Signed distance to the obstacle (`O - u` for sub, `u - O` for super) on the axis at the obstacle front.
    pub axis_gap: f64,
    pub max_gap: f64,
    pub min_gap: f64,
    pub touching_fraction: f64,
}

/// Projected explicit evolution approximating the obstacle sub/supersolution.
/// Nodes outside the cylinder are clamped to the obstacle.
pub struct ObstacleRun<'a> {
    pub kind: Kind,
    pub problem: ObstacleProblem,
    pub solver: Solver<'a>,
    pub state: LevelSetField,
    /// Barrier data unavailable (`Rdot < sqrt(M0^2 - s^2)` for the supersolution).
    pub barrier_warning: bool,
    xq: Vec<f64>,
    along: Vec<f64>,
    lateral: Vec<f64>,
    interior: Vec<bool>,
    qn: f64,
}

/// Cells kept clear of the caps when reporting or comparing.
pub const CAP_MARGIN: usize = 8;

impl<'a> ObstacleRun<'a> {
    pub fn new(kind: Kind, problem: &ObstacleProblem, g: &'a ForcingField, grid: Grid, params: &SchemeParams, horizon: f64) -> Result<Self> {
        problem.validate(horizon)?;
        if problem.nu.len() != grid.dim() {
            return Err(Error::Parameter("nu and grid dimensions differ".into()));
        }
        let solver = Solver::new(&grid, 1.0, g, params)?;
        let cyl = problem.cylinder();
        let n = grid.dim();
        let axis = (0..n).max_by(|a, b| problem.nu[*a].abs().total_cmp(&problem.nu[*b].abs())).unwrap_or(0);
        let rmax = cyl.radius(0.0).max(cyl.radius(horizon));
        let mut xq = Vec::with_capacity(grid.len());
        let mut along = Vec::with_capacity(grid.len());
        let mut lateral = Vec::with_capacity(grid.len());
        let mut interior = Vec::with_capacity(grid.len());
        let mut idx = [0usize; 3];
        for k in 0..grid.len() {
            grid.unravel(k, &mut idx[..n]);
            let x = grid.position(&idx[..n]);
            xq.push(dot(&x, &problem.q));
            along.push(dot(&x, &problem.nu));
            let lat = cyl.lateral(&x);
            lateral.push(lat);
            let on_side = (0..n).any(|a| a != axis && !matches!(grid.boundary[a], Boundary::Periodic { .. }) && (idx[a] == 0 || idx[a] + 1 == grid.shape[a]));
            if on_side && lat < rmax {
                return Err(Error::Geometry(format!("cylinder of radius {rmax} leaves the grid through a lateral face")));
            }
            interior.push(idx[axis] >= CAP_MARGIN && idx[axis] + CAP_MARGIN < grid.shape[axis]);
        }
        let barrier_warning = kind == Kind::Super
            && problem.rdot < (g.upper * g.upper - problem.s * problem.s).max(0.0).sqrt();
        let qn = norm(&problem.q);
        let values = xq.clone();
        let state = LevelSetField { grid, values, time: 0.0, eps: 1.0 };
        Ok(ObstacleRun { kind, problem: problem.clone(), solver, state, barrier_warning, xq, along, lateral, interior, qn })
    }

    pub fn obstacle_at(&self, k: usize, t: f64) -> f64 {
        self.xq[k] + self.problem.s * t * self.qn
    }

    pub fn inside(&self, k: usize, t: f64) -> bool {
        self.lateral[k] < self.problem.r + self.problem.rdot * t
    }

    /// Node is away from caps and at least `band` (physical) inside the cylinder at time `t`.
    pub fn reportable(&self, k: usize, t: f64, band: f64) -> bool {
        self.interior[k] && self.lateral[k] < self.problem.r + self.problem.rdot * t - band
    }

    pub fn lateral_of(&self, k: usize) -> f64 {
        self.lateral[k]
    }

    pub fn along_of(&self, k: usize) -> f64 {
        self.along[k]
    }

    fn project(&mut self) {
        let t = self.state.time;
        for k in 0..self.state.values.len() {
            let o = self.obstacle_at(k, t);
            let v = &mut self.state.values[k];
            if !(self.lateral[k] < self.problem.r + self.problem.rdot * t) {
                *v = o;
            } else {
                *v = match self.kind {
                    Kind::Sub => v.min(o),
                    Kind::Super => v.max(o),
                };
            }
        }
    }

    /// Advances to exactly `t_end` (last step clipped).
    pub fn advance_to(&mut self, t_end: f64) -> Result<()> {
        let dtm = self.solver.max_dt();
        let mut steps = 0usize;
        while self.state.time < t_end - 1e-12 * t_end.max(1.0) {
            if steps >= self.solver.params.max_steps {
                return Err(Error::Budget { steps, target: t_end });
            }
            let dt = dtm.min(t_end - self.state.time);
            self.solver.step(&mut self.state, dt)?;
            self.project();
            steps += 1;
        }
        self.state.time = self.state.time.max(t_end);
        Ok(())
    }

    pub fn gap(&self, k: usize) -> f64 {
        let o = self.obstacle_at(k, self.state.time);
        match self.kind {
            Kind::Sub => o - self.state.values[k],
            Kind::Super => self.state.values[k] - o,
        }
    }

    pub fn stats(&self) -> ObstacleStats {
        let t = self.state.time;
        let dx = self.state.grid.dx;
        let rad = self.problem.r + self.problem.rdot * t;
        let inner_r = if rad.is_finite() { 0.5 * rad } else { f64::INFINITY };
        let (mut max_gap, mut min_gap, mut touching, mut count) = (f64::NEG_INFINITY, f64::INFINITY, 0usize, 0usize);
        let mut axis = (f64::INFINITY, 0.0);
        let front = self.problem.s * t;
        for k in 0..self.state.values.len() {
            if !self.interior[k] || self.lateral[k] >= inner_r {
                continue;
            }
            let gp = self.gap(k);
            max_gap = max_gap.max(gp);
            min_gap = min_gap.min(gp);
            count += 1;
            if gp.abs() < dx {
                touching += 1;
            }
            let score = (self.along[k] - front).abs() + self.lateral[k];
            if score < axis.0 {
                axis = (score, gp);
            }
        }
        ObstacleStats {
            t,
            axis_gap: axis.1,
            max_gap,
            min_gap,
            touching_fraction: if count > 0 { touching as f64 / count as f64 } else { 0.0 },
        }
    }
}

/// Runs the projected evolution to `horizon` and returns the final state.
pub fn evolve<'a>(kind: Kind, problem: &ObstacleProblem, g: &'a ForcingField, grid: Grid, params: &SchemeParams, horizon: f64) -> Result<ObstacleRun<'a>> {
    let mut run = ObstacleRun::new(kind, problem, g, grid, params, horizon)?;
    run.advance_to(horizon)?;
    Ok(run)
}

pub fn evolve_sub<'a>(problem: &ObstacleProblem, g: &'a ForcingField, grid: Grid, params: &SchemeParams, horizon: f64) -> Result<ObstacleRun<'a>> {
    evolve(Kind::Sub, problem, g, grid, params, horizon)
}

pub fn evolve_super<'a>(problem: &ObstacleProblem, g: &'a ForcingField, grid: Grid, params: &SchemeParams, horizon: f64) -> Result<ObstacleRun<'a>> {
    evolve(Kind::Super, problem, g, grid, params, horizon)
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum BirkhoffVariant {
    ExpandingSub,
    ExpandingSuper,
    StaticSub,
    StaticSuper,
    ShrinkingSub,
    ShrinkingSuper,
}

impl BirkhoffVariant {
    pub const ALL: [BirkhoffVariant; 6] = [
        BirkhoffVariant::ExpandingSub,
        BirkhoffVariant::ExpandingSuper,
        BirkhoffVariant::StaticSub,
        BirkhoffVariant::StaticSuper,
        BirkhoffVariant::ShrinkingSub,
        BirkhoffVariant::ShrinkingSuper,
    ];

    pub fn kind(self) -> Kind {
        match self {
            BirkhoffVariant::ExpandingSub | BirkhoffVariant::StaticSub | BirkhoffVariant::ShrinkingSub => Kind::Sub,
            _ => Kind::Super,
        }
    }
}

/// One Birkhoff claim: `problem` is `a` (or `a1` for the static pair, whose second radius is `r2`).
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct BirkhoffCase {
    pub variant: BirkhoffVariant,
    pub problem: ObstacleProblem,
    pub r2: f64,
    pub dz: Vec<f64>,
    pub dt: f64,
    /// Laminar forcing: the last shift coordinate may be any real.
    pub laminar: bool,
}

fn fail(msg: String) -> Result<()> {
    Err(Error::Precondition(msg))
}

/// Checks the admissibility inequalities of the selected variant.
pub fn birkhoff_admissible(case: &BirkhoffCase, m0: f64, big_m0: f64) -> Result<()> {
    let p = &case.problem;
    let n = case.dz.len();
    if n != p.nu.len() {
        return fail("dz has the wrong dimension".into());
    }
    let integral = if case.laminar { n - 1 } else { n };
    if case.dz[..integral].iter().any(|v| (v - v.round()).abs() > 1e-12) {
        return fail(format!("dz = {:?} is not a lattice vector", case.dz));
    }
    let dn = dot(&case.dz, &p.nu);
    let dp = perp_norm(&case.dz, &p.nu);
    let (s, dt, rd) = (p.s, case.dt, p.rdot);
    match case.variant {
        BirkhoffVariant::ExpandingSub | BirkhoffVariant::ExpandingSuper if rd < 0.0 => fail(format!("expanding variant needs Rdot >= 0, got {rd}")),
        BirkhoffVariant::ShrinkingSub | BirkhoffVariant::ShrinkingSuper if rd >= 0.0 => fail(format!("shrinking variant needs Rdot < 0, got {rd}")),
        BirkhoffVariant::StaticSub | BirkhoffVariant::StaticSuper if rd != 0.0 || !(case.r2 > p.r) => {
            fail(format!("static pair needs Rdot = 0 and R1 < R2 (R1 = {}, R2 = {})", p.r, case.r2))
        }
        BirkhoffVariant::ExpandingSub if !(dt > 0.0 && 0.0 < s * dt && s * dt <= dn) => fail(format!("violates 0 < s dt <= dz.nu ({} vs {dn})", s * dt)),
        BirkhoffVariant::ExpandingSuper if !(dt > 0.0 && s * dt >= dn && dn > 0.0) => fail(format!("violates s dt >= dz.nu > 0 ({} vs {dn})", s * dt)),
        BirkhoffVariant::ExpandingSub | BirkhoffVariant::ExpandingSuper if !(rd * dt >= dp) => fail(format!("violates Rdot dt >= |dz_perp| ({} vs {dp})", rd * dt)),
        BirkhoffVariant::StaticSub if !(dt >= 0.0 && 0.0 < s * dt && s * dt <= dn) => fail(format!("violates 0 < s dt <= dz.nu ({} vs {dn})", s * dt)),
        BirkhoffVariant::StaticSuper if !(dt >= 0.0 && s * dt >= dn && dn > 0.0) => fail(format!("violates s dt >= dz.nu > 0 ({} vs {dn})", s * dt)),
        BirkhoffVariant::StaticSub | BirkhoffVariant::StaticSuper if !(case.r2 - p.r >= dp) => fail(format!("violates R2 - R1 >= |dz_perp| ({} vs {dp})", case.r2 - p.r)),
        BirkhoffVariant::ShrinkingSub if !(dt > 0.0 && m0 * dt >= dn && dn > 0.0) => fail(format!("violates m0 dt >= dz.nu > 0 ({} vs {dn})", m0 * dt)),
        BirkhoffVariant::ShrinkingSuper if !(dt > 0.0 && dn >= big_m0 * dt) => fail(format!("violates dz.nu >= M0 dt >= 0 ({dn} vs {})", big_m0 * dt)),
        BirkhoffVariant::ShrinkingSub | BirkhoffVariant::ShrinkingSuper if !(-rd * dt >= dp) => fail(format!("violates (-Rdot) dt >= |dz_perp| ({} vs {dp})", -rd * dt)),
        _ => Ok(()),
    }
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct BirkhoffReport {
    pub variant: BirkhoffVariant,
    pub max_violation: f64,
    pub nodes_compared: usize,
}

/// Evaluates the claimed inequality at the sample times (all nodes at least two cells inside the
/// relevant cylinders and clear of the caps). The shift must be a whole number of cells.
pub fn check_birkhoff(case: &BirkhoffCase, g: &ForcingField, grid: &Grid, params: &SchemeParams, times: &[f64]) -> Result<BirkhoffReport> {
    birkhoff_admissible(case, g.lower, g.upper)?;
    let n = grid.dim();
    let dx = grid.dx;
    let mut cells = Vec::with_capacity(n);
    for v in &case.dz {
        let c = v / dx;
        if (c - c.round()).abs() > 1e-9 {
            return Err(Error::Precondition(format!("shift component {v} is not a multiple of dx = {dx}")));
        }
        cells.push(c.round() as i64);
    }
    let kind = case.variant.kind();
    let horizon = times.iter().fold(0.0f64, |m, t| m.max(*t)) + case.dt;
    let mut run_a = ObstacleRun::new(kind, &case.problem, g, grid.clone(), params, horizon)?;
    let mut run_b = match case.variant {
        BirkhoffVariant::StaticSub | BirkhoffVariant::StaticSuper => {
            let mut p2 = case.problem.clone();
            p2.r = case.r2;
            Some(ObstacleRun::new(kind, &p2, g, grid.clone(), params, horizon)?)
        }
        _ => None,
    };
    let mut sorted: Vec<f64> = times.to_vec();
    sorted.sort_by(f64::total_cmp);
    let strides = grid.strides();
    let band = 2.0 * dx;
    let mut rep = BirkhoffReport { variant: case.variant, max_violation: 0.0, nodes_compared: 0 };
    for t in sorted {
        run_a.advance_to(t)?;
        let early = run_a.state.values.clone();
        let (late, late_run) = match run_b.as_mut() {
            Some(b) => {
                b.advance_to(t + case.dt)?;
                (b.state.values.clone(), &*b)
            }
            None => {
                // Rerun from scratch so both snapshots come from the same step sequence up to t.
                let mut c = ObstacleRun::new(kind, &case.problem, g, grid.clone(), params, horizon)?;
                c.advance_to(t + case.dt)?;
                let v = c.state.values.clone();
                (v, &run_a)
            }
        };
        let mut idx = [0usize; 3];
        for k in 0..grid.len() {
            grid.unravel(k, &mut idx[..n]);
            let mut j: i64 = 0;
            let mut ok = true;
            for a in 0..n {
                let i = idx[a] as i64 + cells[a];
                if i < 0 || i >= grid.shape[a] as i64 {
                    ok = false;
                    break;
                }
                j += i * strides[a] as i64;
            }
            if !ok {
                continue;
            }
            let j = j as usize;
            // (base node, shifted node): shifted = base + dz.
            let (viol, keep) = match case.variant {
                BirkhoffVariant::ExpandingSub => (late[j] - early[k], run_a.reportable(k, t, band) && run_a.reportable(j, t + case.dt, band)),
                BirkhoffVariant::ExpandingSuper => (early[k] - late[j], run_a.reportable(k, t, band) && run_a.reportable(j, t + case.dt, band)),
                BirkhoffVariant::StaticSub => (late[j] - early[k], run_a.reportable(k, t, band) && late_run.reportable(j, t, band)),
                BirkhoffVariant::StaticSuper => (early[k] - late[j], run_a.reportable(k, t, band) && late_run.reportable(j, t, band)),
                // x = shifted node, x - dz = base node.
                BirkhoffVariant::ShrinkingSub => (early[k] - late[j], run_a.reportable(j, t + case.dt, band) && run_a.reportable(k, t, band)),
                BirkhoffVariant::ShrinkingSuper => (late[j] - early[k], run_a.reportable(j, t + case.dt, band) && run_a.reportable(k, t, band)),
            };
            if keep {
                rep.nodes_compared += 1;
                rep.max_violation = rep.max_violation.max(viol);
            }
        }
    }
    Ok(rep)
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct LcpConfig {
    pub cells_per_period: usize,
    pub samples: usize,
    pub scheme: SchemeParams,
    pub graph: GraphParams,
}

impl Default for LcpConfig {
    fn default() -> Self {
        LcpConfig { cells_per_period: 16, samples: 20, scheme: SchemeParams::default(), graph: GraphParams::default() }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct LcpReport {
    /// `graph` (laminar field, `nu = e_n`) or `level_set`.
    pub path: String,
    pub xi0: Vec<i64>,
    pub big_r: f64,
    pub rdot: f64,
    pub delta: f64,
    pub consistency: ConsistencyReport,
    pub times: Vec<f64>,
    /// `min (U_1(x - xi0, t) - U_2(x, t))` per sample.
    pub margins: Vec<f64>,
    /// Same with `xi0` replaced by `-xi0` (negative control).
    pub control_margins: Vec<f64>,
    pub min_margin: f64,
    pub ordered: bool,
    pub control_fails: bool,
}

/// Local comparison check: evolves the obstacle subsolution at `s2` and the supersolution at `s1`
/// in cylinders of radius `R = max(6, 12(3n + M0 + 27)/L0)` expanding at `4 M0 R/delta`, and
/// checks `U_2(x, t) < U_1(x - xi0, t)`. Because the expansion rate dwarfs any numerical domain of
/// dependence, both runs use the periodic representation (twisted box, or the unit torus for a
/// laminar graph): `U(x - xi0) = U(x) + xi0.nu` there.
pub fn check_lcp(nu: &[f64], s1: f64, s2: f64, g: &ForcingField, horizon: f64, cfg: &LcpConfig) -> Result<LcpReport> {
    let n = nu.len();
    let laminar = g.dim() + 1 == n;
    if !laminar && g.dim() != n {
        return Err(Error::Parameter(format!("forcing of dimension {} does not fit nu in R^{n}", g.dim())));
    }
    let (m0, big_m0) = (g.lower, g.upper);
    if m0 == big_m0 {
        return Err(Error::NotApplicable("constant forcing forces s1 = s2".into()));
    }
    if !(m0 <= s1 && s1 < s2 && s2 <= big_m0) {
        return Err(Error::Precondition(format!("need m0 <= s1 < s2 <= M0, got {m0} <= {s1} < {s2} <= {big_m0}")));
    }
    if !(horizon > 0.0) {
        return Err(Error::Parameter("horizon must be positive".into()));
    }
    let dir = Direction::new(nu)?;
    let nu = dir.nu.clone();
    if laminar && nu[..n - 1].iter().any(|v| v.abs() > 1e-12) {
        return Err(Error::NotApplicable("the graph formulation needs nu = e_n".into()));
    }
    let l0 = g.lipschitz.max(f64::MIN_POSITIVE);
    let big_r = (12.0 * (3.0 * n as f64 + big_m0 + 27.0) / l0).max(6.0);
    let consts = comparison_constants(horizon, m0, big_m0, l0, n)?;
    let delta = consts.delta_t / 2.0;
    let rdot = if delta > 0.0 { (4.0 * big_m0 * big_r / delta).min(f64::MAX) } else { f64::MAX };
    let consistency = is_comparison_consistent(&dir, &consts, big_r, laminar);
    let xi0 = lattice_min_shift(&nu, 1.0);
    let shift: f64 = xi0.iter().zip(&nu).map(|(k, v)| *k as f64 * v).sum();
    let times: Vec<f64> = (1..=cfg.samples).map(|i| horizon * i as f64 / cfg.samples as f64).collect();
    let mut margins = Vec::with_capacity(times.len());
    let mut control = Vec::with_capacity(times.len());
    let mut record = |lower: &[f64], upper: &[f64]| {
        let d = lower.iter().zip(upper).map(|(a, b)| a - b).fold(f64::INFINITY, f64::min);
        margins.push(d + shift);
        control.push(d - shift);
    };
    let path = if laminar {
        let grid = GraphGrid::torus(n - 1, cfg.cells_per_period)?;
        let cyl = GraphCylinder { center: vec![0.5; n - 1], r: big_r, rdot };
        let mut sub = GraphObstacleRun::new(Kind::Sub, s2, g, &grid, &cfg.graph, Some(cyl.clone()))?;
        let mut sup = GraphObstacleRun::new(Kind::Super, s1, g, &grid, &cfg.graph, Some(cyl))?;
        for t in &times {
            sub.advance_to(*t, |_| {})?;
            sup.advance_to(*t, |_| {})?;
            // Graph heights: the level-set ordering reads W_1(y) + xi0_n > W_2(y).
            record(&sup.state.values, &sub.state.values);
        }
        "graph"
    } else {
        let grid = Grid::twisted(&nu, 1.0, 1, cfg.cells_per_period)?;
        let dx = grid.dx;
        let probe = Solver::new(&grid, 1.0, g, &cfg.scheme)?;
        let dt = probe.max_dt();
        let spread = (cfg.scheme.stencil_radius.ceil() + 1.0) * dx;
        let need = 0.5 * big_r + spread * (horizon / dt).ceil();
        let have = big_r + rdot * dt;
        if have < need {
            return Err(Error::Resource { what: "cylinder radius after one step".into(), required: need, available: have });
        }
        let p2 = ObstacleProblem::new(&nu, big_r, rdot, s2)?;
        let p1 = ObstacleProblem::new(&nu, big_r, rdot, s1)?;
        let mut sub = ObstacleRun::new(Kind::Sub, &p2, g, grid.clone(), &cfg.scheme, horizon)?;
        let mut sup = ObstacleRun::new(Kind::Super, &p1, g, grid, &cfg.scheme, horizon)?;
        for t in &times {
            sub.advance_to(*t)?;
            sup.advance_to(*t)?;
            // Level-set values: U_1(x - xi0) = U_1(x) + xi0.nu on the twisted box.
            record(&sup.state.values, &sub.state.values);
        }
        "level_set"
    };
    let min_margin = margins.iter().copied().fold(f64::INFINITY, f64::min);
    let control_min = control.iter().copied().fold(f64::INFINITY, f64::min);
    Ok(LcpReport {
        path: path.into(),
        xi0,
        big_r,
        rdot,
        delta,
        consistency,
        times,
        margins,
        control_margins: control,
        min_margin,
        ordered: min_margin > 0.0,
        control_fails: control_min <= 0.0,
    })
}
