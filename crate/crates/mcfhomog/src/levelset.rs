//! Explicit monotone solver for `u_t = eps tr{D^2u (I - p⊗p)} + g(x/eps)|Du|` on uniform grids,
//! plus front extraction and a first-order solver for the homogenized equation `u_t = s(-Du/|Du|)|Du|`.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::forcing::ForcingField;

/// Boundary handling per axis. `Periodic { jump }` means `u(x + L e_a) = u(x) + jump`
/// (a twisted period, exact for planar data `-x.nu` with `jump = -L nu_a`).
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Boundary {
    Periodic { jump: f64 },
    Clamped,
}

impl Boundary {
    pub fn periodic() -> Self {
        Boundary::Periodic { jump: 0.0 }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct Grid {
    pub shape: Vec<usize>,
    pub dx: f64,
    pub origin: Vec<f64>,
    pub boundary: Vec<Boundary>,
    /// Integer node shift of the moving window; node `i` sits at `origin + (i + offset) dx`.
    pub window_offset: Vec<i64>,
}

impl Grid {
    pub fn new(shape: Vec<usize>, dx: f64, origin: Vec<f64>, boundary: Vec<Boundary>) -> Result<Self> {
        let n = shape.len();
        if !(2..=3).contains(&n) {
            return Err(Error::Parameter(format!("grid dimension must be 2 or 3, got {n}")));
        }
        if origin.len() != n || boundary.len() != n {
            return Err(Error::Parameter("origin/boundary length must match shape".into()));
        }
        if !(dx > 0.0) || shape.iter().any(|s| *s < 4) {
            return Err(Error::Parameter(format!("need dx > 0 and shape >= 4 per axis (dx = {dx}, shape = {shape:?})")));
        }
        Ok(Grid { shape, dx, origin, boundary, window_offset: vec![0; n] })
    }

    /// Box `[0, b eps)^n` with every axis twisted-periodic (`jump = -b eps nu_a`), `cells` nodes per
    /// period. Planar data `-x.nu` and the solution started from it satisfy
    /// `u(x + eps k) = u(x) - eps k.nu` for `k` in `Z^n`, so the box carries the whole-space solution.
    pub fn twisted(nu: &[f64], eps: f64, periods: usize, cells: usize) -> Result<Self> {
        let side = periods as f64 * eps;
        let boundary = nu.iter().map(|v| Boundary::Periodic { jump: -side * v }).collect();
        Self::new(vec![periods * cells; nu.len()], eps / cells as f64, vec![0.0; nu.len()], boundary)
    }

    /// Clamped box `[lo, hi]^n` sampled with `cells` nodes per axis (node-centred on the endpoints).
    pub fn square(n: usize, lo: f64, hi: f64, cells: usize) -> Result<Self> {
        let dx = (hi - lo) / (cells - 1) as f64;
        Self::new(vec![cells; n], dx, vec![lo; n], vec![Boundary::Clamped; n])
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

    pub fn strides(&self) -> Vec<usize> {
        let mut s = vec![1; self.dim()];
        for a in (0..self.dim() - 1).rev() {
            s[a] = s[a + 1] * self.shape[a + 1];
        }
        s
    }

    pub fn unravel(&self, mut flat: usize, out: &mut [usize]) {
        for a in (0..self.dim()).rev() {
            out[a] = flat % self.shape[a];
            flat /= self.shape[a];
        }
    }

    pub fn ravel(&self, idx: &[usize]) -> usize {
        idx.iter().zip(&self.shape).fold(0, |acc, (i, s)| acc * s + i)
    }

    pub fn coord(&self, axis: usize, i: usize) -> f64 {
        self.origin[axis] + (i as i64 + self.window_offset[axis]) as f64 * self.dx
    }

    pub fn position(&self, idx: &[usize]) -> Vec<f64> {
        idx.iter().enumerate().map(|(a, i)| self.coord(a, *i)).collect()
    }

    pub fn position_flat(&self, flat: usize) -> Vec<f64> {
        let mut idx = [0usize; 3];
        self.unravel(flat, &mut idx[..self.dim()]);
        self.position(&idx[..self.dim()])
    }

    /// Physical extent `shape * dx` along an axis (the period length for periodic axes).
    pub fn extent(&self, axis: usize) -> f64 {
        self.shape[axis] as f64 * self.dx
    }

    /// Node index of a physical point when it lies exactly (to 1e-9 cells) on a node.
    pub fn node_of(&self, x: &[f64]) -> Option<Vec<usize>> {
        let mut idx = Vec::with_capacity(self.dim());
        for a in 0..self.dim() {
            let c = (x[a] - self.origin[a]) / self.dx - self.window_offset[a] as f64;
            let r = c.round();
            if (c - r).abs() > 1e-9 || r < 0.0 || r >= self.shape[a] as f64 {
                return None;
            }
            idx.push(r as usize);
        }
        Some(idx)
    }
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct LevelSetField {
    pub grid: Grid,
    pub values: Vec<f64>,
    pub time: f64,
    pub eps: f64,
}

impl LevelSetField {
    pub fn from_fn<F: Fn(&[f64]) -> f64>(grid: Grid, eps: f64, f: F) -> Self {
        let values = (0..grid.len()).map(|k| f(&grid.position_flat(k))).collect();
        LevelSetField { grid, values, time: 0.0, eps }
    }

    /// Planar data `u0 = -x.nu + c`.
    pub fn planar(grid: Grid, eps: f64, nu: &[f64], c: f64) -> Self {
        Self::from_fn(grid, eps, |x| c - x.iter().zip(nu).map(|(a, b)| a * b).sum::<f64>())
    }

    pub fn min_max(&self) -> (f64, f64) {
        self.values
            .iter()
            .fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), v| (lo.min(*v), hi.max(*v)))
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Curvature {
    /// Median of interpolated values on a sphere of radius `stencil_radius * dx` (monotone).
    Median,
    /// Central differences with regularized projection `p = Du/sqrt(|Du|^2 + grad_reg^2)`.
    Central,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SchemeParams {
    pub cfl_factor: f64,
    pub grad_reg: f64,
    pub max_steps: usize,
    pub curvature: Curvature,
    /// Median stencil radius in cells.
    pub stencil_radius: f64,
}

impl Default for SchemeParams {
    fn default() -> Self {
        SchemeParams { cfl_factor: 0.9, grad_reg: 1e-4, max_steps: 5_000_000, curvature: Curvature::Median, stencil_radius: 3.0 }
    }
}

/// Sample directions for the median stencil: 16 on the circle, 32 on the sphere, closed under `-`.
fn median_directions(n: usize) -> Vec<Vec<f64>> {
    if n == 2 {
        (0..16)
            .map(|k| {
                let t = 2.0 * std::f64::consts::PI * k as f64 / 16.0;
                vec![t.cos(), t.sin()]
            })
            .collect()
    } else {
        let half = 16;
        let golden = std::f64::consts::PI * (3.0 - 5f64.sqrt());
        let mut dirs = Vec::with_capacity(2 * half);
        for k in 0..half {
            let z = 1.0 - (k as f64 + 0.5) / half as f64; // upper hemisphere
            let r = (1.0 - z * z).sqrt();
            let t = golden * k as f64;
            dirs.push(vec![r * t.cos(), r * t.sin(), z]);
        }
        let neg: Vec<Vec<f64>> = dirs.iter().map(|d| d.iter().map(|v| -v).collect()).collect();
        dirs.extend(neg);
        dirs
    }
}

/// Moving-window policy along one axis (the propagation axis).
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Window {
    pub axis: usize,
    /// Minimum distance in cells between the front and either cap.
    pub margin: usize,
    /// Shift quantum in cells (a whole number of lattice periods).
    pub quantum: usize,
}

/// Precomputed stencil and forcing cache for one grid geometry.
pub struct Solver<'a> {
    pub g: &'a ForcingField,
    pub params: SchemeParams,
    pub eps: f64,
    grid_shape: Vec<usize>,
    dx: f64,
    boundary: Vec<Boundary>,
    ghost: usize,
    pshape: Vec<usize>,
    pstrides: Vec<usize>,
    /// Interpolation taps of the median samples, flattened: sample `j` uses `tap_off/tap_w[tap_start[j]..tap_start[j+1]]`.
    tap_start: Vec<usize>,
    tap_off: Vec<isize>,
    tap_w: Vec<f64>,
    curv_coef: f64,
    /// `g(x/eps)` at the nodes; valid across window shifts by whole periods.
    pub gcache: Vec<f64>,
    /// Cells per lattice period (`eps/dx`) when integral.
    pub period_cells: Option<usize>,
    dt_max: f64,
}

impl<'a> Solver<'a> {
    pub fn new(grid: &Grid, eps: f64, g: &'a ForcingField, params: &SchemeParams) -> Result<Self> {
        let n = grid.dim();
        if g.dim() != n {
            return Err(Error::Parameter(format!("forcing dimension {} != grid dimension {n}", g.dim())));
        }
        if !(eps > 0.0 && eps <= 1.0) {
            return Err(Error::Parameter(format!("eps must lie in (0, 1], got {eps}")));
        }
        if !(params.cfl_factor > 0.0 && params.cfl_factor <= 1.0) {
            return Err(Error::Parameter("cfl_factor must lie in (0, 1]".into()));
        }
        if !(params.grad_reg > 0.0 && params.grad_reg <= grid.dx) {
            return Err(Error::Parameter(format!("grad_reg must lie in (0, dx], got {}", params.grad_reg)));
        }
        let ratio = eps / grid.dx;
        let period_cells = if (ratio - ratio.round()).abs() < 1e-9 * ratio.max(1.0) && ratio.round() >= 1.0 {
            Some(ratio.round() as usize)
        } else {
            None
        };
        let (ghost, taps, curv_coef) = match params.curvature {
            Curvature::Median => {
                let rho = params.stencil_radius;
                if !(rho >= 1.0) {
                    return Err(Error::Parameter("stencil_radius must be >= 1 cell".into()));
                }
                let ghost = rho.ceil() as usize + 1;
                (ghost, Vec::new(), 2.0 * (n as f64 - 1.0) / (rho * grid.dx).powi(2))
            }
            Curvature::Central => (1, Vec::new(), 0.0),
        };
        let pshape: Vec<usize> = grid.shape.iter().map(|s| s + 2 * ghost).collect();
        let mut pstrides = vec![1usize; n];
        for a in (0..n - 1).rev() {
            pstrides[a] = pstrides[a + 1] * pshape[a + 1];
        }
        let taps = if params.curvature == Curvature::Median {
            median_directions(n)
                .iter()
                .map(|d| {
                    let off: Vec<f64> = d.iter().map(|v| v * params.stencil_radius).collect();
                    let base: Vec<f64> = off.iter().map(|o| o.floor()).collect();
                    let frac: Vec<f64> = off.iter().zip(&base).map(|(o, b)| o - b).collect();
                    let mut t = Vec::new();
                    for corner in 0..(1usize << n) {
                        let mut w = 1.0;
                        let mut flat: isize = 0;
                        for a in 0..n {
                            let hi = (corner >> a) & 1;
                            w *= if hi == 1 { frac[a] } else { 1.0 - frac[a] };
                            flat += (base[a] as isize + hi as isize) * pstrides[a] as isize;
                        }
                        if w > 1e-14 {
                            t.push((flat, w));
                        }
                    }
                    t
                })
                .collect()
        } else {
            taps
        };
        let mut tap_start = vec![0usize];
        let (mut tap_off, mut tap_w) = (Vec::new(), Vec::new());
        for t in &taps {
            for (o, w) in t {
                tap_off.push(*o);
                tap_w.push(*w);
            }
            tap_start.push(tap_off.len());
        }
        let gcache = forcing_cache(grid, eps, g, period_cells);
        let nf = n as f64;
        let dt_max = match params.curvature {
            Curvature::Median => params.cfl_factor / (eps * curv_coef + nf.sqrt() * g.upper / grid.dx),
            Curvature::Central => {
                params.cfl_factor * (grid.dx / (nf * g.upper)).min(grid.dx * grid.dx / (2.0 * nf * eps))
            }
        };
        Ok(Solver {
            g,
            params: params.clone(),
            eps,
            grid_shape: grid.shape.clone(),
            dx: grid.dx,
            boundary: grid.boundary.clone(),
            ghost,
            pshape,
            pstrides,
            tap_start,
            tap_off,
            tap_w,
            curv_coef,
            gcache,
            period_cells,
            dt_max,
        })
    }

    /// Largest admissible explicit step (monotonicity/CFL bound of the selected stencil).
    pub fn max_dt(&self) -> f64 {
        self.dt_max
    }

    /// Maps a (possibly ghost) index on `axis` to an interior index plus the periodic jump.
    fn wrap(&self, axis: usize, i: i64) -> (usize, f64) {
        let len = self.grid_shape[axis] as i64;
        if (0..len).contains(&i) {
            return (i as usize, 0.0);
        }
        match self.boundary[axis] {
            Boundary::Periodic { jump } => (i.rem_euclid(len) as usize, i.div_euclid(len) as f64 * jump),
            Boundary::Clamped => (i.clamp(0, len - 1) as usize, 0.0),
        }
    }

    fn fill_padded(&self, values: &[f64], pad: &mut [f64]) {
        let n = self.grid_shape.len();
        let g = self.ghost as i64;
        let last = n - 1;
        let (plen, len) = (self.pshape[last], self.grid_shape[last]);
        let mut gstrides = vec![1usize; n];
        for a in (0..last).rev() {
            gstrides[a] = gstrides[a + 1] * self.grid_shape[a + 1];
        }
        // Ghost columns of the last axis, shared by every row.
        let cols: Vec<(usize, f64)> = (0..plen).map(|c| self.wrap(last, c as i64 - g)).collect();
        let rows = pad.len() / plen;
        let mut c = vec![0usize; last];
        for r in 0..rows {
            let mut f = r;
            for a in (0..last).rev() {
                c[a] = f % self.pshape[a];
                f /= self.pshape[a];
            }
            let (mut base, mut shift) = (0usize, 0.0);
            for a in 0..last {
                let (i, s) = self.wrap(a, c[a] as i64 - g);
                base += i * gstrides[a];
                shift += s;
            }
            let src = &values[base..base + len];
            let dst = &mut pad[r * plen..(r + 1) * plen];
            for (slot, (i, s)) in dst.iter_mut().zip(&cols) {
                *slot = src[*i] + shift + s;
            }
        }
    }

    /// One explicit Euler step of size `dt` (must not exceed `max_dt`).
    pub fn step(&self, state: &mut LevelSetField, dt: f64) -> Result<()> {
        if dt > self.dt_max * (1.0 + 1e-12) {
            return Err(Error::Cfl { dt, max: self.dt_max });
        }
        let n = self.grid_shape.len();
        let mut pad = vec![0.0; self.pshape.iter().product()];
        self.fill_padded(&state.values, &mut pad);
        let row = self.grid_shape[1..].iter().product::<usize>();
        let mut out = vec![0.0; state.values.len()];
        let eps = self.eps;
        let dx = self.dx;
        let results: Vec<Result<()>> = out
            .par_chunks_mut(row)
            .enumerate()
            .map(|(i0, chunk)| {
                let mut idx = [0usize; 3];
                let mut samples = [0.0f64; 32];
                for (r, slot) in chunk.iter_mut().enumerate() {
                    idx[0] = i0;
                    let mut f = r;
                    for a in (1..n).rev() {
                        idx[a] = f % self.grid_shape[a];
                        f /= self.grid_shape[a];
                    }
                    let mut q = 0usize;
                    for a in 0..n {
                        q += (idx[a] + self.ghost) * self.pstrides[a];
                    }
                    let u = pad[q];
                    let mut up2 = 0.0;
                    for a in 0..n {
                        let s = self.pstrides[a];
                        let m = (pad[q - s] - u).max(pad[q + s] - u).max(0.0);
                        up2 += m * m;
                    }
                    let grad = up2.sqrt() / dx;
                    let curv = match self.params.curvature {
                        Curvature::Median => {
                            let k = self.tap_start.len() - 1;
                            for (j, slot) in samples[..k].iter_mut().enumerate() {
                                let (a, b) = (self.tap_start[j], self.tap_start[j + 1]);
                                let mut v = 0.0;
                                for (off, w) in self.tap_off[a..b].iter().zip(&self.tap_w[a..b]) {
                                    v += w * pad[(q as isize + off) as usize];
                                }
                                *slot = v;
                            }
                            let s = &mut samples[..k];
                            let (lower, upper_mid, _) = s.select_nth_unstable_by(k / 2, f64::total_cmp);
                            let hi = *upper_mid;
                            let lo = lower.iter().fold(f64::NEG_INFINITY, |m, v| m.max(*v));
                            self.curv_coef * (0.5 * (lo + hi) - u)
                        }
                        Curvature::Central => {
                            let mut p = [0.0f64; 3];
                            let mut p2 = 0.0;
                            for a in 0..n {
                                let s = self.pstrides[a];
                                p[a] = (pad[q + s] - pad[q - s]) / (2.0 * dx);
                                p2 += p[a] * p[a];
                            }
                            let inv = 1.0 / (p2 + self.params.grad_reg * self.params.grad_reg).sqrt();
                            for pa in p.iter_mut().take(n) {
                                *pa *= inv;
                            }
                            let mut acc = 0.0;
                            for a in 0..n {
                                let s = self.pstrides[a];
                                let uaa = (pad[q + s] - 2.0 * u + pad[q - s]) / (dx * dx);
                                acc += uaa * (1.0 - p[a] * p[a]);
                                for b in a + 1..n {
                                    let t = self.pstrides[b];
                                    let uab = (pad[q + s + t] - pad[q + s - t] - pad[q - s + t] + pad[q - s - t]) / (4.0 * dx * dx);
                                    acc -= 2.0 * p[a] * p[b] * uab;
                                }
                            }
                            acc
                        }
                    };
                    let flat = i0 * row + r;
                    let v = u + dt * (eps * curv + self.gcache[flat] * grad);
                    if !v.is_finite() {
                        return Err(Error::Blowup { cell: idx[..n].to_vec() });
                    }
                    *slot = v;
                }
                Ok(())
            })
            .collect();
        for r in results {
            r?;
        }
        state.values = out;
        state.time += dt;
        Ok(())
    }

    /// Shifts the window if the level-`mu` front approaches a cap. Returns the applied shift (cells).
    pub fn recentre(&self, state: &mut LevelSetField, w: &Window, mu: f64) -> Result<i64> {
        if let Some(p) = self.period_cells {
            if w.quantum % p != 0 {
                return Err(Error::Parameter(format!("window quantum {} is not a multiple of the period {p}", w.quantum)));
            }
        } else {
            return Err(Error::Parameter("moving window needs eps/dx integral".into()));
        }
        let Some((lo, hi)) = front_rows(state, w.axis, mu) else { return Ok(0) };
        let len = state.grid.shape[w.axis];
        let q = w.quantum;
        let mut shift: i64 = 0;
        if hi + w.margin + 1 >= len {
            let need = hi + w.margin + 2 - len;
            shift = (need.div_ceil(q) * q) as i64;
        } else if lo < w.margin {
            let need = w.margin - lo;
            shift = -((need.div_ceil(q) * q) as i64);
        }
        if shift == 0 {
            return Ok(0);
        }
        let new_lo = lo as i64 - shift;
        let new_hi = hi as i64 - shift;
        if new_lo < 0 || new_hi >= len as i64 {
            return Err(Error::Geometry(format!(
                "front spans rows {lo}..{hi}; window of {len} cells cannot hold it with margin {}",
                w.margin
            )));
        }
        shift_window(state, w.axis, shift);
        Ok(shift)
    }
}

fn forcing_cache(grid: &Grid, eps: f64, g: &ForcingField, period_cells: Option<usize>) -> Vec<f64> {
    let n = grid.dim();
    (0..grid.len())
        .into_par_iter()
        .map(|k| {
            let mut idx = [0usize; 3];
            grid.unravel(k, &mut idx[..n]);
            let mut y = [0.0f64; 3];
            for a in 0..n {
                let cell = idx[a] as i64 + grid.window_offset[a];
                y[a] = match period_cells {
                    Some(p) => grid.origin[a] / eps + cell.rem_euclid(p as i64) as f64 / p as f64,
                    None => (grid.origin[a] + cell as f64 * grid.dx) / eps,
                };
            }
            g.eval(&y[..n])
        })
        .collect()
}

/// Range of rows (along `axis`) containing a sign change of `u - mu` to the next row.
pub fn front_rows(state: &LevelSetField, axis: usize, mu: f64) -> Option<(usize, usize)> {
    let grid = &state.grid;
    let strides = grid.strides();
    let s = strides[axis];
    let len = grid.shape[axis];
    let mut lo = usize::MAX;
    let mut hi = 0usize;
    let mut idx = [0usize; 3];
    for k in 0..grid.len() {
        grid.unravel(k, &mut idx[..grid.dim()]);
        let i = idx[axis];
        if i + 1 >= len {
            continue;
        }
        let a = state.values[k] > mu;
        let b = state.values[k + s] > mu;
        if a != b {
            lo = lo.min(i);
            hi = hi.max(i + 1);
        }
    }
    (lo != usize::MAX).then_some((lo, hi))
}

/// Moves the window by `shift` cells along `axis` (positive = forward), filling exposed rows by
/// linear extrapolation of the last two rows (a constant fill leaves a kink whose upwind smearing
/// reaches the front).
pub fn shift_window(state: &mut LevelSetField, axis: usize, shift: i64) {
    let grid = &state.grid;
    let n = grid.dim();
    let len = grid.shape[axis] as i64;
    let strides = grid.strides();
    let old = state.values.clone();
    let mut idx = [0usize; 3];
    for k in 0..grid.len() {
        grid.unravel(k, &mut idx[..n]);
        let src = idx[axis] as i64 + shift;
        let base = k - idx[axis] * strides[axis];
        let at = |i: i64| old[base + i as usize * strides[axis]];
        state.values[k] = if src < 0 {
            at(0) + (at(0) - at(1)) * (-src) as f64
        } else if src >= len {
            at(len - 1) + (at(len - 1) - at(len - 2)) * (src - len + 1) as f64
        } else {
            at(src)
        };
    }
    state.grid.window_offset[axis] += shift;
}

/// Level-`mu` crossing points on grid edges (linear interpolation). Wrap edges of periodic axes
/// are included, with the crossing placed past the last node.
pub fn extract_front(state: &LevelSetField, mu: f64) -> Vec<Vec<f64>> {
    let grid = &state.grid;
    let n = grid.dim();
    let strides = grid.strides();
    let mut pts = Vec::new();
    let mut idx = [0usize; 3];
    for k in 0..grid.len() {
        grid.unravel(k, &mut idx[..n]);
        let u = state.values[k];
        for a in 0..n {
            let v = if idx[a] + 1 < grid.shape[a] {
                state.values[k + strides[a]]
            } else if let Boundary::Periodic { jump } = grid.boundary[a] {
                state.values[k - idx[a] * strides[a]] + jump
            } else {
                continue;
            };
            if (u > mu) != (v > mu) {
                let th = (u - mu) / (u - v);
                let mut x = grid.position(&idx[..n]);
                x[a] += th * grid.dx;
                pts.push(x);
            }
        }
    }
    pts
}

/// Static cylinder `Ω(x0, r; nu) = {x : |(x - x0) - ((x - x0).nu) nu| < r}`.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct CylinderSection {
    pub x0: Vec<f64>,
    pub r: f64,
}

pub fn lateral_distance(x: &[f64], x0: &[f64], nu: &[f64]) -> f64 {
    let d: Vec<f64> = x.iter().zip(x0).map(|(a, b)| a - b).collect();
    let p: f64 = d.iter().zip(nu).map(|(a, b)| a * b).sum();
    d.iter().zip(nu).map(|(a, b)| (a - p * b).powi(2)).sum::<f64>().sqrt()
}

/// `(head, tail) = (sup x.nu, inf x.nu)` over the level-`mu` front, optionally inside a cylinder.
pub fn front_extent(state: &LevelSetField, mu: f64, nu: &[f64], cyl: Option<&CylinderSection>) -> Option<(f64, f64)> {
    let mut head = f64::NEG_INFINITY;
    let mut tail = f64::INFINITY;
    for x in extract_front(state, mu) {
        if let Some(c) = cyl {
            if lateral_distance(&x, &c.x0, nu) >= c.r {
                continue;
            }
        }
        let p: f64 = x.iter().zip(nu).map(|(a, b)| a * b).sum();
        head = head.max(p);
        tail = tail.min(p);
    }
    head.is_finite().then_some((head, tail))
}

/// Runs `solver` from `state` to time `t_end`, optionally recentring a moving window, and calls
/// `observe` after every step. Returns the number of steps taken.
pub fn solve<F>(solver: &Solver, state: &mut LevelSetField, t_end: f64, window: Option<&Window>, mut observe: F) -> Result<usize>
where
    F: FnMut(&LevelSetField),
{
    if !(t_end > state.time) {
        return Err(Error::Precondition(format!("T = {t_end} must exceed the current time {}", state.time)));
    }
    let dtm = solver.max_dt();
    let mut steps = 0usize;
    while state.time < t_end - 1e-12 * t_end.max(1.0) {
        if steps >= solver.params.max_steps {
            return Err(Error::Budget { steps, target: t_end });
        }
        let dt = dtm.min(t_end - state.time);
        solver.step(state, dt)?;
        if let Some(w) = window {
            solver.recentre(state, w, 0.0)?;
        }
        steps += 1;
        observe(state);
    }
    Ok(steps)
}

/// Tabulated speed `s(nu)` for the homogenized equation.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SpeedTable {
    Constant(f64),
    /// 2D table of `(theta, s)` pairs, linearly interpolated in the angle (periodic).
    Angular(Vec<(f64, f64)>),
}

impl SpeedTable {
    pub fn validate(&self) -> Result<()> {
        let bad = match self {
            SpeedTable::Constant(c) => !(*c > 0.0),
            SpeedTable::Angular(t) => t.is_empty() || t.iter().any(|(_, s)| !(*s > 0.0)),
        };
        if bad {
            return Err(Error::Parameter("tabulated speeds must be positive".into()));
        }
        Ok(())
    }

    pub fn max(&self) -> f64 {
        match self {
            SpeedTable::Constant(c) => *c,
            SpeedTable::Angular(t) => t.iter().fold(0.0f64, |m, (_, s)| m.max(*s)),
        }
    }

    pub fn eval(&self, nu: &[f64]) -> f64 {
        match self {
            SpeedTable::Constant(c) => *c,
            SpeedTable::Angular(t) => {
                let tau = 2.0 * std::f64::consts::PI;
                let th = nu[1].atan2(nu[0]).rem_euclid(tau);
                let m = t.len();
                let mut sorted = t.clone();
                sorted.sort_by(|a, b| a.0.total_cmp(&b.0));
                for k in 0..m {
                    let (a, sa) = sorted[k];
                    let (mut b, sb) = sorted[(k + 1) % m];
                    if k + 1 == m {
                        b += tau;
                    }
                    let mut x = th;
                    if x < a {
                        x += tau;
                    }
                    if x >= a && x <= b {
                        let w = if b > a { (x - a) / (b - a) } else { 0.0 };
                        return sa + w * (sb - sa);
                    }
                }
                sorted[0].1
            }
        }
    }
}

/// First-order upwind solve of `u_t = s(-Du/|Du|)|Du|` (Rouy-Tourin gradient, explicit Euler).
pub fn solve_homogenized(speed: &SpeedTable, u0: &LevelSetField, t_end: f64, cfl: f64) -> Result<LevelSetField> {
    speed.validate()?;
    let mut state = u0.clone();
    let grid = u0.grid.clone();
    let n = grid.dim();
    let one = ForcingField::constant(n, 1.0)?;
    let params = SchemeParams { curvature: Curvature::Central, grad_reg: grid.dx, ..SchemeParams::default() };
    let helper = Solver::new(&grid, 1.0, &one, &params)?;
    let dt_max = cfl * grid.dx / (n as f64 * speed.max());
    let strides = helper.pstrides.clone();
    let ghost = helper.ghost;
    let mut pad = vec![0.0; helper.pshape.iter().product()];
    while state.time < t_end - 1e-12 {
        let dt = dt_max.min(t_end - state.time);
        helper.fill_padded(&state.values, &mut pad);
        let mut idx = [0usize; 3];
        let mut out = state.values.clone();
        for (k, slot) in out.iter_mut().enumerate() {
            grid.unravel(k, &mut idx[..n]);
            let q: usize = (0..n).map(|a| (idx[a] + ghost) * strides[a]).sum();
            let u = pad[q];
            let mut p = [0.0f64; 3];
            let mut p2 = 0.0;
            for a in 0..n {
                let s = strides[a];
                let (dm, dp) = (pad[q - s] - u, pad[q + s] - u);
                let m = dm.max(dp).max(0.0);
                // Signed upwind derivative: the larger neighbour fixes the orientation.
                p[a] = if m == 0.0 { 0.0 } else if dp >= dm { m / grid.dx } else { -m / grid.dx };
                p2 += p[a] * p[a];
            }
            let gn = p2.sqrt();
            if gn > 0.0 {
                let nu: Vec<f64> = p[..n].iter().map(|v| -v / gn).collect();
                *slot = u + dt * speed.eval(&nu) * gn;
            }
        }
        state.values = out;
        state.time += dt;
    }
    Ok(state)
}
