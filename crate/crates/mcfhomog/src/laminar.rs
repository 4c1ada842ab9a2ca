//! Graph form of the flow for laminar forcing `g(x) = g'(x')`: the front is `x_n = U(x', t)` with
//! `U_t = W div(DU/W) + g' W`, `W = sqrt(1 + |DU|^2)`. Obstacle graphs, detachment times,
//! traveling-wave extraction and the explicit radial profiles with residual certificates.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::forcing::{torus_distance, CorollaryParams, ForcingField};
use crate::obstacle::Kind;

/// Clip height for the unbounded radial profiles.
pub const H_MAX: f64 = 20.0;

/// Uniform grid over a box in `R^d` (`d = n - 1`), periodic (torus) or with constant extension.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct GraphGrid {
    pub shape: Vec<usize>,
    pub dx: f64,
    pub origin: Vec<f64>,
    pub periodic: bool,
}

impl GraphGrid {
    /// The unit torus `[0,1)^d` with `m` nodes per axis.
    pub fn torus(d: usize, m: usize) -> Result<Self> {
        Self::periodic_box(d, 0.0, 1, m)
    }

    /// `[lo, lo + periods)^d` with `m` nodes per unit period, periodic.
    pub fn periodic_box(d: usize, lo: f64, periods: usize, m: usize) -> Result<Self> {
        if !(1..=2).contains(&d) || m < 4 || periods == 0 {
            return Err(Error::Parameter(format!("graph grid needs d in 1..=2 and m >= 4 (d = {d}, m = {m})")));
        }
        Ok(GraphGrid { shape: vec![m * periods; d], dx: 1.0 / m as f64, origin: vec![lo; d], periodic: true })
    }

    pub fn dim(&self) -> usize {
        self.shape.len()
    }

    pub fn len(&self) -> usize {
        self.shape.iter().product()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn position(&self, k: usize) -> Vec<f64> {
        let mut out = vec![0.0; self.dim()];
        let mut f = k;
        for a in (0..self.dim()).rev() {
            out[a] = self.origin[a] + (f % self.shape[a]) as f64 * self.dx;
            f /= self.shape[a];
        }
        out
    }

    /// `neighbours[a][side][k]`: index of `k -/+ e_a` (`side` 0/1), wrapped or clamped.
    fn neighbours(&self) -> Vec<[Vec<usize>; 2]> {
        let d = self.dim();
        let mut strides = vec![1usize; d];
        for a in (0..d - 1).rev() {
            strides[a] = strides[a + 1] * self.shape[a + 1];
        }
        (0..d)
            .map(|a| {
                let len = self.shape[a];
                let mk = |side: i64| -> Vec<usize> {
                    (0..self.len())
                        .map(|k| {
                            let i = (k / strides[a]) % len;
                            let j = i as i64 + side;
                            let j = if self.periodic { j.rem_euclid(len as i64) } else { j.clamp(0, len as i64 - 1) } as usize;
                            k - i * strides[a] + j * strides[a]
                        })
                        .collect()
                };
                [mk(-1), mk(1)]
            })
            .collect()
    }
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct GraphState {
    pub grid: GraphGrid,
    pub values: Vec<f64>,
    pub time: f64,
}

impl GraphState {
    pub fn flat(grid: GraphGrid, h: f64) -> Self {
        let values = vec![h; grid.len()];
        GraphState { grid, values, time: 0.0 }
    }

    pub fn from_fn<F: Fn(&[f64]) -> f64>(grid: GraphGrid, f: F) -> Self {
        let values = (0..grid.len()).map(|k| f(&grid.position(k))).collect();
        GraphState { grid, values, time: 0.0 }
    }

    pub fn max(&self) -> f64 {
        self.values.iter().fold(f64::NEG_INFINITY, |m, v| m.max(*v))
    }

    pub fn min(&self) -> f64 {
        self.values.iter().fold(f64::INFINITY, |m, v| m.min(*v))
    }

    pub fn spread(&self) -> f64 {
        self.max() - self.min()
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct GraphParams {
    pub cfl: f64,
    pub max_steps: usize,
}

impl Default for GraphParams {
    fn default() -> Self {
        GraphParams { cfl: 0.9, max_steps: 20_000_000 }
    }
}

/// Pointwise pieces of the discrete operator.
#[derive(Clone, Debug, Default)]
pub struct OperatorTerms {
    /// `W` from centred differences.
    pub w: Vec<f64>,
    /// Flux-form `div(DU/W)` with `W` at half points.
    pub div: Vec<f64>,
    /// `W` from the upwind (Rouy-Tourin) gradient, used with the forcing.
    pub w_up: Vec<f64>,
}

pub struct GraphSolver<'a> {
    pub g: &'a ForcingField,
    pub grid: GraphGrid,
    pub gcache: Vec<f64>,
    nb: Vec<[Vec<usize>; 2]>,
    dt_max: f64,
    pub params: GraphParams,
}

impl<'a> GraphSolver<'a> {
    pub fn new(grid: &GraphGrid, g: &'a ForcingField, params: &GraphParams) -> Result<Self> {
        if g.dim() != grid.dim() {
            return Err(Error::Parameter(format!("g' has dimension {} but the graph grid has {}", g.dim(), grid.dim())));
        }
        if !(params.cfl > 0.0 && params.cfl <= 1.0) {
            return Err(Error::Parameter("cfl must lie in (0, 1]".into()));
        }
        let d = grid.dim() as f64;
        let dx = grid.dx;
        let dt_max = params.cfl * (dx * dx / (2.0 * d)).min(dx / (d.sqrt() * g.upper));
        let gcache = (0..grid.len()).map(|k| g.eval(&grid.position(k))).collect();
        Ok(GraphSolver { g, grid: grid.clone(), gcache, nb: grid.neighbours(), dt_max, params: params.clone() })
    }

    pub fn max_dt(&self) -> f64 {
        self.dt_max
    }

    pub fn operator(&self, u: &[f64]) -> OperatorTerms {
        let d = self.grid.dim();
        let dx = self.grid.dx;
        let n = u.len();
        let nb = &self.nb;
        // flux[a][k]: (DU/W)_a at k + e_a/2.
        let flux: Vec<Vec<f64>> = (0..d)
            .map(|a| {
                (0..n)
                    .into_par_iter()
                    .map(|k| {
                        let p = nb[a][1][k];
                        let ga = (u[p] - u[k]) / dx;
                        let mut w2 = 1.0 + ga * ga;
                        for b in (0..d).filter(|b| *b != a) {
                            let gb = (u[nb[b][1][k]] - u[nb[b][0][k]] + u[nb[b][1][p]] - u[nb[b][0][p]]) / (4.0 * dx);
                            w2 += gb * gb;
                        }
                        ga / w2.sqrt()
                    })
                    .collect()
            })
            .collect();
        let terms: Vec<(f64, f64, f64)> = (0..n)
            .into_par_iter()
            .map(|k| {
                let (mut wc, mut wu, mut div) = (1.0, 1.0, 0.0);
                for a in 0..d {
                    let (l, r) = (u[nb[a][0][k]], u[nb[a][1][k]]);
                    let c = (r - l) / (2.0 * dx);
                    wc += c * c;
                    let m = (l - u[k]).max(r - u[k]).max(0.0) / dx;
                    wu += m * m;
                    div += (flux[a][k] - flux[a][nb[a][0][k]]) / dx;
                }
                (wc.sqrt(), div, wu.sqrt())
            })
            .collect();
        let mut out = OperatorTerms::default();
        for (w, dv, wu) in terms {
            out.w.push(w);
            out.div.push(dv);
            out.w_up.push(wu);
        }
        out
    }

    pub fn step(&self, state: &mut GraphState, dt: f64) -> Result<()> {
        if dt > self.dt_max * (1.0 + 1e-12) {
            return Err(Error::Cfl { dt, max: self.dt_max });
        }
        let t = self.operator(&state.values);
        for (k, v) in state.values.iter_mut().enumerate() {
            let nv = *v + dt * (t.w[k] * t.div[k] + self.gcache[k] * t.w_up[k]);
            if !nv.is_finite() {
                return Err(Error::Blowup { cell: vec![k] });
            }
            *v = nv;
        }
        state.time += dt;
        Ok(())
    }
}

/// Evolves to `t_end` calling `observe` after each step.
pub fn evolve_graph<F: FnMut(&GraphState)>(solver: &GraphSolver, state: &mut GraphState, t_end: f64, mut observe: F) -> Result<usize> {
    let mut steps = 0;
    while state.time < t_end - 1e-12 * t_end.max(1.0) {
        if steps >= solver.params.max_steps {
            return Err(Error::Budget { steps, target: t_end });
        }
        solver.step(state, solver.max_dt().min(t_end - state.time))?;
        steps += 1;
        observe(state);
    }
    Ok(steps)
}

/// Lateral disk `|y - center| < r + rdot t` outside of which the graph is held on the obstacle.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct GraphCylinder {
    pub center: Vec<f64>,
    pub r: f64,
    pub rdot: f64,
}

/// Graph obstacle evolution from `U = 0` with projection onto `U <= s t` (sub) or `U >= s t` (super).
pub struct GraphObstacleRun<'a> {
    pub kind: Kind,
    pub s: f64,
    pub solver: GraphSolver<'a>,
    pub state: GraphState,
    pub cylinder: Option<GraphCylinder>,
    radial: Vec<f64>,
}

impl<'a> GraphObstacleRun<'a> {
    pub fn new(kind: Kind, s: f64, g: &'a ForcingField, grid: &GraphGrid, params: &GraphParams, cylinder: Option<GraphCylinder>) -> Result<Self> {
        let solver = GraphSolver::new(grid, g, params)?;
        let radial = match &cylinder {
            Some(c) => (0..grid.len())
                .map(|k| {
                    let y = grid.position(k);
                    y.iter().zip(&c.center).map(|(a, b)| (a - b).powi(2)).sum::<f64>().sqrt()
                })
                .collect(),
            None => Vec::new(),
        };
        Ok(GraphObstacleRun { kind, s, solver, state: GraphState::flat(grid.clone(), 0.0), cylinder, radial })
    }

    pub fn advance_to<F: FnMut(&GraphState)>(&mut self, t_end: f64, mut observe: F) -> Result<()> {
        let mut steps = 0usize;
        while self.state.time < t_end - 1e-12 * t_end.max(1.0) {
            if steps >= self.solver.params.max_steps {
                return Err(Error::Budget { steps, target: t_end });
            }
            let dt = self.solver.max_dt().min(t_end - self.state.time);
            self.solver.step(&mut self.state, dt)?;
            let t = self.state.time;
            let o = self.s * t;
            let rad = self.cylinder.as_ref().map(|c| c.r + c.rdot * t);
            for (k, v) in self.state.values.iter_mut().enumerate() {
                if rad.is_some_and(|r| self.radial[k] >= r) {
                    *v = o;
                } else {
                    *v = match self.kind {
                        Kind::Sub => v.min(o),
                        Kind::Super => v.max(o),
                    };
                }
            }
            steps += 1;
            observe(&self.state);
        }
        Ok(())
    }

    /// `s t - max U` (sub) or `min U - s t` (super).
    pub fn gap(&self) -> f64 {
        let o = self.s * self.state.time;
        match self.kind {
            Kind::Sub => o - self.state.max(),
            Kind::Super => self.state.min() - o,
        }
    }
}

pub fn evolve_graph_obstacle<'a>(s: f64, g: &'a ForcingField, grid: &GraphGrid, params: &GraphParams, t_end: f64, kind: Kind) -> Result<GraphObstacleRun<'a>> {
    if !(s >= g.lower && s <= g.upper) {
        return Err(Error::Precondition(format!("obstacle speed {s} outside [m0, M0] = [{}, {}]", g.lower, g.upper)));
    }
    let mut run = GraphObstacleRun::new(kind, s, g, grid, params, None)?;
    run.advance_to(t_end, |_| {})?;
    Ok(run)
}

/// First time the whole graph is one unit off the obstacle: `U < s t - 1` (sub) or `U > s t + 1`
/// (super). `None` if not reached by `horizon`.
pub fn measure_t_star(s: f64, g: &ForcingField, grid: &GraphGrid, params: &GraphParams, kind: Kind, horizon: f64) -> Result<Option<f64>> {
    let mut run = GraphObstacleRun::new(kind, s, g, grid, params, None)?;
    let mut hit = None;
    let target = 1.0;
    let mut steps = 0usize;
    while run.state.time < horizon && hit.is_none() {
        let t_next = (run.state.time + run.solver.max_dt()).min(horizon);
        run.advance_to(t_next, |_| {})?;
        if run.gap() > target {
            hit = Some(run.state.time);
        }
        steps += 1;
        if steps > params.max_steps {
            return Err(Error::Budget { steps, target: horizon });
        }
    }
    Ok(hit)
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum WaveStatus {
    Converged,
    Undecided,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct LadderLevel {
    pub level: usize,
    pub speed: f64,
    pub mask_fraction: f64,
    pub mask_change: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct TravelingWaveProfile {
    pub kind: Kind,
    pub speed: f64,
    pub mask: Vec<bool>,
    pub profile: Vec<f64>,
    pub status: WaveStatus,
    pub ladder: Vec<LadderLevel>,
    /// Median of `|kappa - g|/g` over the mask boundary.
    pub boundary_curvature_error: Option<f64>,
}

/// Ladder `s_l = s_bar + 1/l^2`, `t_l = l` (sub; mirrored for super), profile `U(t_l) - s_l t_l`
/// recentred to max 0 (sub) / min 0 (super); mask `E = {|profile| < 2 M0}`.
pub fn extract_traveling_wave(g: &ForcingField, grid: &GraphGrid, params: &GraphParams, kind: Kind, speed_est: f64, levels: &[usize]) -> Result<TravelingWaveProfile> {
    if levels.is_empty() {
        return Err(Error::Parameter("empty ladder".into()));
    }
    let cut = 2.0 * g.upper;
    let mut ladder = Vec::new();
    let mut prev: Option<Vec<bool>> = None;
    let mut last = (Vec::new(), Vec::new(), speed_est);
    for &l in levels {
        let dl = 1.0 / (l * l) as f64;
        let s = match kind {
            Kind::Sub => (speed_est + dl).min(g.upper),
            Kind::Super => (speed_est - dl).max(g.lower),
        };
        let mut run = GraphObstacleRun::new(kind, s, g, grid, params, None)?;
        run.advance_to(l as f64, |_| {})?;
        let shifted: Vec<f64> = run.state.values.iter().map(|v| v - s * l as f64).collect();
        let anchor = match kind {
            Kind::Sub => shifted.iter().fold(f64::NEG_INFINITY, |m, v| m.max(*v)),
            Kind::Super => shifted.iter().fold(f64::INFINITY, |m, v| m.min(*v)),
        };
        let profile: Vec<f64> = shifted.iter().map(|v| v - anchor).collect();
        let mask: Vec<bool> = profile.iter().map(|v| v.abs() < cut).collect();
        let frac = mask.iter().filter(|b| **b).count() as f64 / mask.len() as f64;
        let change = prev
            .as_ref()
            .map(|p| p.iter().zip(&mask).filter(|(a, b)| a != b).count() as f64 / mask.len() as f64)
            .unwrap_or(1.0);
        ladder.push(LadderLevel { level: l, speed: s, mask_fraction: frac, mask_change: change });
        prev = Some(mask.clone());
        last = (mask, profile, s);
    }
    let (mask, profile, speed) = last;
    let status = if ladder.len() >= 2 && ladder.last().is_some_and(|l| l.mask_change <= 0.01) { WaveStatus::Converged } else { WaveStatus::Undecided };
    let solver = GraphSolver::new(grid, g, params)?;
    let boundary_curvature_error = boundary_curvature(&solver, &profile, &mask);
    Ok(TravelingWaveProfile { kind, speed, mask, profile, status, ladder, boundary_curvature_error })
}

/// Level-set curvature `-div(DU/|DU|)` on mask-boundary nodes against `g`.
fn boundary_curvature(solver: &GraphSolver, u: &[f64], mask: &[bool]) -> Option<f64> {
    let d = solver.grid.dim();
    let dx = solver.grid.dx;
    let nb = &solver.nb;
    let mut errs: Vec<f64> = Vec::new();
    for k in 0..u.len() {
        if !mask[k] || !(0..d).any(|a| !mask[nb[a][0][k]] || !mask[nb[a][1][k]]) {
            continue;
        }
        let grad = |j: usize| -> Vec<f64> { (0..d).map(|a| (u[nb[a][1][j]] - u[nb[a][0][j]]) / (2.0 * dx)).collect() };
        let unit = |j: usize| -> Vec<f64> {
            let gv = grad(j);
            let nrm = gv.iter().map(|v| v * v).sum::<f64>().sqrt().max(1e-12);
            gv.iter().map(|v| v / nrm).collect()
        };
        let mut div = 0.0;
        for a in 0..d {
            div += (unit(nb[a][1][k])[a] - unit(nb[a][0][k])[a]) / (2.0 * dx);
        }
        let g = solver.gcache[k];
        errs.push(((-div).abs() - g).abs() / g);
    }
    if errs.is_empty() {
        return None;
    }
    errs.sort_by(f64::total_cmp);
    Some(errs[errs.len() / 2])
}

/// Radial profile `U(|y - center|)` on the torus, defined on its domain `E`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RadialProfile {
    pub kind: Kind,
    pub center: Vec<f64>,
    /// `r1` (sub: domain `r < r1`) or `r2` (super: domain `r > r2`).
    pub r_in: f64,
    /// `R` for the supersolution profile (flat beyond it).
    pub r_out: f64,
    pub speed: f64,
}

pub fn construct_subsolution_profile(r1: f64, y1: &[f64], sbar: f64) -> Result<RadialProfile> {
    if !(r1 > 0.0 && r1 < 0.5) {
        return Err(Error::Parameter(format!("need 0 < r1 < 1/2, got {r1}")));
    }
    Ok(RadialProfile { kind: Kind::Sub, center: y1.to_vec(), r_in: r1, r_out: r1, speed: sbar })
}

pub fn construct_supersolution_profile(r2: f64, big_r: f64, y2: &[f64], sunder: f64) -> Result<RadialProfile> {
    if !(r2 > 0.0 && r2 < big_r && big_r < 0.5) {
        return Err(Error::Parameter(format!("need 0 < r2 < R < 1/2 (r2 = {r2}, R = {big_r})")));
    }
    Ok(RadialProfile { kind: Kind::Super, center: y2.to_vec(), r_in: r2, r_out: big_r, speed: sunder })
}

impl RadialProfile {
    /// Unclipped closed form; `None` outside the domain.
    pub fn value(&self, r: f64) -> Option<f64> {
        match self.kind {
            Kind::Sub => (r < self.r_in).then(|| r + self.r_in * ((self.r_in - r) / self.r_in).ln()),
            Kind::Super => {
                let (r2, big_r) = (self.r_in, self.r_out);
                if r <= r2 {
                    None
                } else if r >= big_r {
                    Some(0.0)
                } else {
                    Some((big_r - r2) * ((big_r - r2) / (r - r2)).ln() - (big_r - r))
                }
            }
        }
    }

    /// Radial derivative: `zeta = r/(r - r1)` or `eta = min((r - R)/(r - r2), 0)`.
    pub fn slope(&self, r: f64) -> Option<f64> {
        match self.kind {
            Kind::Sub => (r < self.r_in).then(|| r / (r - self.r_in)),
            Kind::Super => (r > self.r_in).then(|| ((r - self.r_out) / (r - self.r_in)).min(0.0)),
        }
    }

    /// Grid sample clipped to `[-H_MAX, H_MAX]`; outside the domain the clip value is used.
    pub fn sample(&self, grid: &GraphGrid) -> (Vec<f64>, Vec<bool>) {
        let clip = match self.kind {
            Kind::Sub => -H_MAX,
            Kind::Super => H_MAX,
        };
        (0..grid.len())
            .map(|k| {
                let r = torus_distance(&grid.position(k), &self.center);
                match self.value(r) {
                    Some(v) => (v.clamp(-H_MAX, H_MAX), true),
                    None => (clip, false),
                }
            })
            .unzip()
    }
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct ResidualReport {
    pub kind: Kind,
    pub speed: f64,
    pub nodes_checked: usize,
    pub failures: usize,
    /// Most adverse normalized residual (minimum for sub, maximum for super).
    pub worst: f64,
    pub worst_position: Vec<f64>,
    pub passed: bool,
}

/// Evaluates `res = (W div(DU/W) + g W_up - s)/W` of `U + s t` at mask nodes at least two cells
/// from the mask boundary and from the clip band; sub needs `res >= -tol`, super `res <= tol`,
/// with `tol = rel_tol (|g W_up/W| + |s/W| + |div|)`.
pub fn residual_check(profile: &RadialProfile, speed: f64, g: &ForcingField, grid: &GraphGrid, rel_tol: f64) -> Result<ResidualReport> {
    let solver = GraphSolver::new(grid, g, &GraphParams::default())?;
    let (u, mask) = profile.sample(grid);
    let ops = solver.operator(&u);
    let band = 2.0 * grid.dx;
    let mut rep = ResidualReport {
        kind: profile.kind,
        speed,
        nodes_checked: 0,
        failures: 0,
        worst: match profile.kind {
            Kind::Sub => f64::INFINITY,
            Kind::Super => f64::NEG_INFINITY,
        },
        worst_position: Vec::new(),
        passed: true,
    };
    for k in 0..u.len() {
        if !mask[k] {
            continue;
        }
        let y = grid.position(k);
        let r = torus_distance(&y, &profile.center);
        let off_edge = match profile.kind {
            Kind::Sub => r < profile.r_in - band,
            Kind::Super => r > profile.r_in + band,
        };
        // Stay clear of the clipped band: the profile must not be clipped within two cells.
        let clear = match profile.kind {
            Kind::Sub => profile.value(r + band).is_some_and(|v| v > -H_MAX),
            Kind::Super => profile.value(r - band).is_some_and(|v| v < H_MAX),
        };
        if !off_edge || !clear {
            continue;
        }
        let (w, div, wu) = (ops.w[k], ops.div[k], ops.w_up[k]);
        let gk = solver.gcache[k];
        let res = (w * div + gk * wu - speed) / w;
        let tol = rel_tol * ((gk * wu / w).abs() + (speed / w).abs() + div.abs());
        rep.nodes_checked += 1;
        let (bad, worse) = match profile.kind {
            Kind::Sub => (res < -tol, res < rep.worst),
            Kind::Super => (res > tol, res > rep.worst),
        };
        if bad {
            rep.failures += 1;
        }
        if worse {
            rep.worst = res;
            rep.worst_position = y;
        }
    }
    rep.passed = rep.failures == 0 && rep.nodes_checked > 0;
    Ok(rep)
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct FingeringReport {
    pub times: Vec<f64>,
    pub spread: Vec<f64>,
    pub rate: f64,
    pub rate_half_width: f64,
}

/// Least-squares slope of `ys` against `xs` and its standard error.
pub fn linear_fit(xs: &[f64], ys: &[f64]) -> (f64, f64, f64) {
    let n = xs.len() as f64;
    let mx = xs.iter().sum::<f64>() / n;
    let my = ys.iter().sum::<f64>() / n;
    let sxx: f64 = xs.iter().map(|x| (x - mx).powi(2)).sum();
    let sxy: f64 = xs.iter().zip(ys).map(|(x, y)| (x - mx) * (y - my)).sum();
    let slope = if sxx > 0.0 { sxy / sxx } else { 0.0 };
    let icpt = my - slope * mx;
    let rss: f64 = xs.iter().zip(ys).map(|(x, y)| (y - icpt - slope * x).powi(2)).sum();
    let se = if n > 2.0 && sxx > 0.0 { (rss / (n - 2.0) / sxx).sqrt() } else { 0.0 };
    (slope, icpt, se)
}

/// Flat start, free graph flow; spread `max U - min U` sampled `samples` times and fitted on `[t_fit, T]`.
pub fn fingering_run(g: &ForcingField, grid: &GraphGrid, params: &GraphParams, horizon: f64, t_fit: f64, samples: usize) -> Result<FingeringReport> {
    let solver = GraphSolver::new(grid, g, params)?;
    let mut st = GraphState::flat(grid.clone(), 0.0);
    let mut times = Vec::with_capacity(samples);
    let mut spread = Vec::with_capacity(samples);
    for i in 1..=samples {
        let t = horizon * i as f64 / samples as f64;
        evolve_graph(&solver, &mut st, t, |_| {})?;
        times.push(t);
        spread.push(st.spread());
    }
    let (xs, ys): (Vec<f64>, Vec<f64>) = times.iter().zip(&spread).filter(|(t, _)| **t >= t_fit - 1e-12).map(|(t, s)| (*t, *s)).unzip();
    let (rate, _, se) = linear_fit(&xs, &ys);
    Ok(FingeringReport { times, spread, rate, rate_half_width: 2.0 * se })
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct CorollaryReport {
    pub min_e1: f64,
    pub max_e2: f64,
    pub hypotheses_ok: bool,
    pub hypothesis_message: Option<String>,
    pub sbar_lower: f64,
    pub sunder_upper: f64,
    pub required_rate: f64,
    pub fingering: Option<FingeringReport>,
    pub passed: bool,
}

/// Checks the hypotheses on the sampled field (dense lattice), then measures the fingering rate.
pub fn verify_corollary(p: &CorollaryParams, cells: usize, params: &GraphParams, horizon: f64, t_fit: f64) -> Result<CorollaryReport> {
    let sbar = p.sbar_lower();
    let sunder = p.sunder_upper();
    let required = 0.9 * (sbar - sunder);
    let mut rep = CorollaryReport {
        min_e1: f64::NAN,
        max_e2: f64::NAN,
        hypotheses_ok: false,
        hypothesis_message: None,
        sbar_lower: sbar,
        sunder_upper: sunder,
        required_rate: required,
        fingering: None,
        passed: false,
    };
    if let Err(e) = p.validate() {
        rep.hypothesis_message = Some(e.to_string());
        return Ok(rep);
    }
    let g = ForcingField::corollary(p)?;
    let dense = GraphGrid::torus(p.n - 1, 512.max(cells))?;
    let (mut min_e1, mut max_e2) = (f64::INFINITY, f64::NEG_INFINITY);
    for k in 0..dense.len() {
        let y = dense.position(k);
        let v = g.eval(&y);
        if torus_distance(&y, &p.y1) < p.r1 {
            min_e1 = min_e1.min(v);
        }
        if torus_distance(&y, &p.y2) > p.r2 {
            max_e2 = max_e2.max(v);
        }
    }
    rep.min_e1 = min_e1;
    rep.max_e2 = max_e2;
    let n = p.n as f64;
    let lb = 2f64.sqrt() * n / p.r1;
    let ok = min_e1 > lb && p.sigma < min_e1 - (lb + 2.0 / (p.big_r - p.r2)) && max_e2 < p.sigma.min(n - 2.0);
    rep.hypotheses_ok = ok;
    if !ok {
        rep.hypothesis_message = Some(format!("sampled field violates the hypotheses (min_E1 g = {min_e1}, max_E2 g = {max_e2})"));
        return Ok(rep);
    }
    let grid = GraphGrid::torus(p.n - 1, cells)?;
    let f = fingering_run(&g, &grid, params, horizon, t_fit, 50)?;
    rep.passed = f.rate >= required;
    rep.fingering = Some(f);
    Ok(rep)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn flat_graph_moves_at_c() {
        let g = ForcingField::constant(2, 1.5).unwrap();
        let grid = GraphGrid::torus(2, 16).unwrap();
        let s = GraphSolver::new(&grid, &g, &GraphParams::default()).unwrap();
        let mut st = GraphState::flat(grid, 0.0);
        evolve_graph(&s, &mut st, 0.5, |_| {}).unwrap();
        assert!(st.values.iter().all(|v| (v - 0.75).abs() < 1e-12));
    }

    #[test]
    fn small_oscillation_decays_like_heat() {
        let g = ForcingField::constant(1, 1.0).unwrap();
        let grid = GraphGrid::torus(1, 64).unwrap();
        let a = 1e-3;
        let mut st = GraphState::from_fn(grid.clone(), |y| a * (2.0 * std::f64::consts::PI * y[0]).sin());
        let s = GraphSolver::new(&grid, &g, &GraphParams::default()).unwrap();
        let t = 0.01;
        evolve_graph(&s, &mut st, t, |_| {}).unwrap();
        let amp = 0.5 * st.spread();
        let expect = a * (-4.0 * std::f64::consts::PI.powi(2) * t).exp();
        assert!(amp < a && (amp - expect).abs() < 0.05 * a, "{amp} vs {expect}");
    }

    #[test]
    fn obstacle_graph_gap_and_t_star() {
        let g = ForcingField::constant(2, 1.0).unwrap();
        let grid = GraphGrid::torus(2, 8).unwrap();
        let p = GraphParams::default();
        let run = evolve_graph_obstacle(1.0, &g, &grid, &p, 1.0, Kind::Sub).unwrap();
        assert!(run.gap().abs() < 1e-12);
        let g2 = ForcingField::custom(2, 1.0, 2.0, 0.0, |_| 1.0);
        let run = evolve_graph_obstacle(2.0, &g2, &grid, &p, 1.0, Kind::Sub).unwrap();
        assert!((run.gap() - 1.0).abs() < 0.1);
        let ts = measure_t_star(2.0, &g2, &grid, &p, Kind::Sub, 3.0).unwrap().unwrap();
        assert!((ts - 1.0).abs() < 0.2 && ts >= 1.0 - 1e-9);
        assert!(measure_t_star(1.0, &g, &grid, &p, Kind::Sub, 2.0).unwrap().is_none());
        let ladder: Vec<f64> = [1.25, 1.5, 2.0].iter().map(|s| measure_t_star(*s, &g2, &grid, &p, Kind::Sub, 10.0).unwrap().unwrap()).collect();
        assert!(ladder[0] >= ladder[1] && ladder[1] >= ladder[2]);
    }

    fn simpson<F: Fn(f64) -> f64>(f: F, a: f64, b: f64, n: usize) -> f64 {
        let h = (b - a) / n as f64;
        let mut s = f(a) + f(b);
        for i in 1..n {
            s += f(a + i as f64 * h) * if i % 2 == 1 { 4.0 } else { 2.0 };
        }
        s * h / 3.0
    }

    #[test]
    fn profiles_match_quadrature() {
        let p1 = construct_subsolution_profile(0.15, &[0.5, 0.5], 16.0).unwrap();
        assert_eq!(p1.value(0.0), Some(0.0));
        assert!(p1.value(0.15 - 1e-12).unwrap() < -3.0);
        assert!(p1.value(0.15).is_none());
        let p2 = construct_supersolution_profile(0.25, 0.45, &[0.5, 0.5], 11.0).unwrap();
        assert_eq!(p2.value(0.45), Some(0.0));
        assert!(p2.value(0.25 + 1e-12).unwrap() > 4.0);
        assert!(p2.value(0.25).is_none());
        for i in 0..50 {
            let r = 0.14 * i as f64 / 49.0;
            let q = simpson(|x| p1.slope(x).unwrap(), 0.0, r, 2000);
            assert!((q - p1.value(r).unwrap()).abs() < 1e-8);
            let r = 0.26 + 0.19 * i as f64 / 49.0;
            let q = -simpson(|x| p2.slope(x).unwrap(), r, 0.45, 2000);
            assert!((q - p2.value(r).unwrap()).abs() < 1e-8);
        }
        assert!(construct_subsolution_profile(0.6, &[0.0], 1.0).is_err());
    }

    #[test]
    fn residual_certificates_and_controls() {
        let cp = CorollaryParams::reference();
        let g = ForcingField::corollary(&cp).unwrap();
        let grid = GraphGrid::torus(2, 256).unwrap();
        let sub = construct_subsolution_profile(cp.r1, &cp.y1, cp.sbar_lower()).unwrap();
        let r = residual_check(&sub, cp.sbar_lower(), &g, &grid, 0.05).unwrap();
        assert!(r.passed, "{r:?}");
        assert!(!residual_check(&sub, cp.g_high, &g, &grid, 0.05).unwrap().passed);
        let sup = construct_supersolution_profile(cp.r2, cp.big_r, &cp.y2, cp.sunder_upper()).unwrap();
        let r = residual_check(&sup, cp.sunder_upper(), &g, &grid, 0.05).unwrap();
        assert!(r.passed, "{r:?}");
        let neg = 1.0 / (cp.big_r - cp.r2);
        assert!(!residual_check(&sup, neg, &g, &grid, 0.05).unwrap().passed);
    }

    #[test]
    fn corollary_rejects_bad_forcing() {
        let mut cp = CorollaryParams::reference();
        cp.g_low = 1.5;
        let rep = verify_corollary(&cp, 32, &GraphParams::default(), 0.1, 0.05).unwrap();
        assert!(!rep.hypotheses_ok && rep.fingering.is_none() && !rep.passed);
    }

    #[test]
    fn constant_forcing_wave_is_flat() {
        let g = ForcingField::constant(2, 1.0).unwrap();
        let grid = GraphGrid::torus(2, 8).unwrap();
        let w = extract_traveling_wave(&g, &grid, &GraphParams::default(), Kind::Sub, 1.0, &[2, 4]).unwrap();
        assert!(w.mask.iter().all(|b| *b));
        assert!(w.profile.iter().all(|v| v.abs() < 1e-9));
    }
}
