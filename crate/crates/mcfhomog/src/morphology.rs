//! Inf-convolution (discrete erosion by variable Euclidean balls) and its structural checks.

use std::sync::Arc;

use rayon::prelude::*;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::levelset::{Boundary, Grid, LevelSetField};

const TIE: f64 = 1e-12;

fn in_ball(d2: f64, r_cells: f64) -> bool {
    d2 <= r_cells * r_cells * (1.0 + TIE)
}

/// Resolves node `idx + off`; periodic axes wrap (adding the twist), clamped axes drop the node.
fn neighbour(grid: &Grid, idx: &[usize], off: &[i64], strides: &[usize]) -> Option<(usize, f64)> {
    let mut flat = 0usize;
    let mut shift = 0.0;
    for a in 0..grid.dim() {
        let len = grid.shape[a] as i64;
        let mut i = idx[a] as i64 + off[a];
        if i < 0 || i >= len {
            match grid.boundary[a] {
                Boundary::Periodic { jump } => {
                    shift += i.div_euclid(len) as f64 * jump;
                    i = i.rem_euclid(len);
                }
                Boundary::Clamped => return None,
            }
        }
        flat += i as usize * strides[a];
    }
    Some((flat, shift))
}

fn ball_offsets(n: usize, r_cells: f64) -> Vec<Vec<i64>> {
    let k = (r_cells * (1.0 + TIE)).floor() as i64;
    let side = (2 * k + 1) as usize;
    let mut out = Vec::new();
    for code in 0..side.pow(n as u32) {
        let mut c = code;
        let mut off = vec![0i64; n];
        for o in off.iter_mut() {
            *o = (c % side) as i64 - k;
            c /= side;
        }
        let d2: i64 = off.iter().map(|v| v * v).sum();
        if in_ball(d2 as f64, r_cells) {
            out.push(off);
        }
    }
    out
}

/// `u^{h-}(x) = min { u(y) : |y - x| <= radius(x) }` over grid nodes (closed ball, brute force).
pub fn inf_convolution(field: &LevelSetField, radius: &[f64]) -> Result<Vec<f64>> {
    let grid = &field.grid;
    if radius.len() != grid.len() {
        return Err(Error::Parameter("radius must have one value per node".into()));
    }
    let margin = grid.shape.iter().map(|s| *s as f64 * grid.dx / 2.0).fold(f64::INFINITY, f64::min);
    if let Some(r) = radius.iter().find(|r| !(**r >= 0.0) || **r > margin) {
        return Err(Error::Domain(format!("erosion radius {r} outside [0, {margin}]")));
    }
    let n = grid.dim();
    let strides = grid.strides();
    let rmax = radius.iter().fold(0.0f64, |m, r| m.max(*r)) / grid.dx;
    let offsets = ball_offsets(n, rmax);
    let out = (0..grid.len())
        .into_par_iter()
        .map(|k| {
            let mut idx = [0usize; 3];
            grid.unravel(k, &mut idx[..n]);
            let rc = radius[k] / grid.dx;
            let mut m = field.values[k];
            for off in &offsets {
                let d2: i64 = off.iter().map(|v| v * v).sum();
                if !in_ball(d2 as f64, rc) {
                    continue;
                }
                if let Some((j, shift)) = neighbour(grid, &idx[..n], off, &strides) {
                    m = m.min(field.values[j] + shift);
                }
            }
            m
        })
        .collect();
    Ok(out)
}

/// Erosion with a constant radius.
pub fn erode(field: &LevelSetField, radius: f64) -> Result<Vec<f64>> {
    inf_convolution(field, &vec![radius; field.grid.len()])
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct ExteriorBallReport {
    pub boundary_nodes: usize,
    pub failures: usize,
    pub vacuous: bool,
}

impl ExteriorBallReport {
    pub fn passed(&self) -> bool {
        self.failures == 0
    }
}

/// For every boundary node `x` of `{u <= mu}` looks for a node `y` with `|y - x|` in
/// `[radius - dx, radius + dx]` whose closed ball of the given radius lies in the set.
pub fn check_exterior_ball(field: &LevelSetField, mu: f64, radius: f64) -> Result<ExteriorBallReport> {
    let grid = &field.grid;
    let n = grid.dim();
    let inside: Vec<bool> = field.values.iter().map(|v| *v <= mu).collect();
    if !inside.iter().any(|b| *b) {
        return Err(Error::Precondition(format!("the {mu}-sublevel set is empty")));
    }
    if radius < grid.dx {
        return Ok(ExteriorBallReport { boundary_nodes: 0, failures: 0, vacuous: true });
    }
    let strides = grid.strides();
    let rc = radius / grid.dx;
    let ball = ball_offsets(n, rc);
    let fits: Vec<bool> = (0..grid.len())
        .into_par_iter()
        .map(|k| {
            let mut idx = [0usize; 3];
            grid.unravel(k, &mut idx[..n]);
            inside[k]
                && ball.iter().all(|off| match neighbour(grid, &idx[..n], off, &strides) {
                    Some((j, _)) => inside[j],
                    None => true,
                })
        })
        .collect();
    let annulus: Vec<Vec<i64>> = ball_offsets(n, rc + 1.0)
        .into_iter()
        .filter(|off| {
            let d = (off.iter().map(|v| v * v).sum::<i64>() as f64).sqrt();
            d >= rc - 1.0 - TIE
        })
        .collect();
    let unit: Vec<Vec<i64>> = (0..n)
        .flat_map(|a| {
            [-1i64, 1].into_iter().map(move |s| {
                let mut o = vec![0i64; n];
                o[a] = s;
                o
            })
        })
        .collect();
    let (boundary_nodes, failures) = (0..grid.len())
        .into_par_iter()
        .map(|k| {
            if !inside[k] {
                return (0, 0);
            }
            let mut idx = [0usize; 3];
            grid.unravel(k, &mut idx[..n]);
            let on_boundary = unit
                .iter()
                .any(|o| matches!(neighbour(grid, &idx[..n], o, &strides), Some((j, _)) if !inside[j]));
            if !on_boundary {
                return (0, 0);
            }
            let ok = annulus
                .iter()
                .any(|o| matches!(neighbour(grid, &idx[..n], o, &strides), Some((j, _)) if fits[j]));
            (1, usize::from(!ok))
        })
        .reduce(|| (0, 0), |a, b| (a.0 + b.0, a.1 + b.1));
    Ok(ExteriorBallReport { boundary_nodes, failures, vacuous: false })
}

type TimeFn = Arc<dyn Fn(f64) -> (f64, f64) + Send + Sync>;
type SpaceFn = Arc<dyn Fn(&[f64]) -> (f64, f64) + Send + Sync>;

/// `h = (r(t), phi(x))`: `r` returns `(r, r')`, `phi` returns `(phi, |D phi|)`.
#[derive(Clone)]
pub struct InfConvParams {
    pub r: TimeFn,
    pub phi: SpaceFn,
    pub phi_grad_bound: f64,
    pub phi_hess_bound: f64,
}

impl InfConvParams {
    /// `gamma(t) = e^{-2 L0 t}/2` with `phi = -9(1+C)/(2CR^2)|x_perp|^2 + (3 - 1/C)/2` (`x_perp` w.r.t. `nu`).
    pub fn lcp_pair(l0: f64, c: f64, big_r: f64, nu: Vec<f64>) -> Result<Self> {
        if !(c > 1.0) || !(big_r > 0.0) || !(l0 > 0.0) {
            return Err(Error::Parameter(format!("need C > 1, R > 0, L0 > 0 (C = {c}, R = {big_r}, L0 = {l0})")));
        }
        let a = 9.0 * (1.0 + c) / (2.0 * c * big_r * big_r);
        let b = 0.5 * (3.0 - 1.0 / c);
        Ok(InfConvParams {
            r: Arc::new(move |t| {
                let g = 0.5 * (-2.0 * l0 * t).exp();
                (g, -2.0 * l0 * g)
            }),
            phi: Arc::new(move |x| {
                let p: f64 = x.iter().zip(&nu).map(|(u, v)| u * v).sum();
                let perp2: f64 = x.iter().zip(&nu).map(|(u, v)| (u - p * v).powi(2)).sum();
                (b - a * perp2, 2.0 * a * perp2.sqrt())
            }),
            phi_grad_bound: 6.0 / big_r,
            phi_hess_bound: 2.0 * a,
        })
    }

    /// Constant radius with `phi = 1`.
    pub fn constant(r: f64) -> Self {
        InfConvParams { r: Arc::new(move |_| (r, 0.0)), phi: Arc::new(|_| (1.0, 0.0)), phi_grad_bound: 0.0, phi_hess_bound: 0.0 }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct EvolutionReport {
    pub samples: usize,
    pub violations: usize,
    pub max_lhs: f64,
    /// `r |D phi| < 1` at every sample.
    pub radius_condition: bool,
}

impl EvolutionReport {
    pub fn passed(&self) -> bool {
        self.violations == 0 && self.radius_condition
    }
}

/// Samples `r' + ((n+1)|D^2 phi|/phi + M0|D phi|/phi + L0) r + |D phi|^2 r/((1 - r|D phi|)^2 phi^2) <= 0`
/// on `points x [0, horizon]` (`nt + 1` times).
pub fn check_evolution_inequality(
    params: &InfConvParams,
    n: usize,
    big_m0: f64,
    l0: f64,
    points: &[Vec<f64>],
    horizon: f64,
    nt: usize,
) -> EvolutionReport {
    let mut rep = EvolutionReport { samples: 0, violations: 0, max_lhs: f64::NEG_INFINITY, radius_condition: true };
    for k in 0..=nt {
        let t = horizon * k as f64 / nt.max(1) as f64;
        let (r, dr) = (params.r)(t);
        for x in points {
            let (phi, dphi) = (params.phi)(x);
            let lhs = dr
                + ((n as f64 + 1.0) * params.phi_hess_bound / phi + big_m0 * dphi / phi + l0) * r
                + dphi * dphi * r / ((1.0 - r * dphi).powi(2) * phi * phi);
            rep.samples += 1;
            rep.max_lhs = rep.max_lhs.max(lhs);
            if !(lhs <= 0.0) {
                rep.violations += 1;
            }
            if !(r * dphi < 1.0) {
                rep.radius_condition = false;
            }
        }
    }
    rep
}

/// The pair used in the local comparison argument with `R = max(6, 12(3n + M0 + 27)/L0)`,
/// sampled over `|x_perp| <= R/3` along `nu = e_n`.
pub fn check_lcp_pair(n: usize, big_m0: f64, l0: f64, c: f64, horizon: f64) -> Result<(f64, EvolutionReport)> {
    let big_r = (12.0 * (3.0 * n as f64 + big_m0 + 27.0) / l0).max(6.0);
    let mut nu = vec![0.0; n];
    nu[n - 1] = 1.0;
    let params = InfConvParams::lcp_pair(l0, c, big_r, nu)?;
    let m = 200;
    let points: Vec<Vec<f64>> = (0..=m)
        .map(|k| {
            let mut x = vec![0.0; n];
            x[0] = big_r / 3.0 * k as f64 / m as f64;
            x
        })
        .collect();
    Ok((big_r, check_evolution_inequality(&params, n, big_m0, l0, &points, horizon, 100)))
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct DtBound {
    pub value: f64,
    pub warning: Option<String>,
}

/// Admissible time step `(C-1) delta^2 / ((n-1) C^2 + C (C-1) M0 delta)` for finite-speed propagation.
pub fn finite_speed_dt_bound(c: f64, delta: f64, n: usize, big_m0: f64) -> Result<DtBound> {
    if !(c > 1.0) || !(delta > 0.0) {
        return Err(Error::Parameter(format!("need C > 1 and delta > 0 (C = {c}, delta = {delta})")));
    }
    let value = (c - 1.0) * delta * delta / ((n as f64 - 1.0) * c * c + c * (c - 1.0) * big_m0 * delta);
    let warning = (n < 2).then(|| format!("dimension n = {n} < 2: curvature term vanishes"));
    Ok(DtBound { value, warning })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn cone() -> LevelSetField {
        let grid = Grid::square(2, -2.0, 2.0, 81).unwrap();
        LevelSetField::from_fn(grid, 1.0, |x| (x[0] * x[0] + x[1] * x[1]).sqrt())
    }

    #[test]
    fn erosion_of_cone() {
        let u = cone();
        let c = 0.25;
        let e = erode(&u, c).unwrap();
        for (k, v) in e.iter().enumerate() {
            let x = u.grid.position_flat(k);
            let r = (x[0] * x[0] + x[1] * x[1]).sqrt();
            if r < 1.5 {
                assert!((v - (r - c).max(0.0)).abs() <= u.grid.dx, "{v} vs {r}");
            }
        }
        assert_eq!(erode(&u, 0.0).unwrap(), u.values);
        assert!(matches!(erode(&u, 3.0), Err(Error::Domain(_))));
    }

    #[test]
    fn constant_field_unchanged() {
        let grid = Grid::square(2, 0.0, 1.0, 11).unwrap();
        let u = LevelSetField::from_fn(grid, 1.0, |_| 3.5);
        assert!(erode(&u, 0.3).unwrap().iter().all(|v| *v == 3.5));
    }

    #[test]
    fn exterior_ball_eroded_and_corner() {
        let u = cone();
        let r = 5.0 * u.grid.dx;
        let mut e = u.clone();
        e.values = erode(&u, r).unwrap();
        let rep = check_exterior_ball(&e, 0.8, r).unwrap();
        assert!(rep.boundary_nodes > 0 && rep.passed(), "{rep:?}");
        let corner = LevelSetField::from_fn(u.grid.clone(), 1.0, |x| x[0].max(x[1]));
        assert!(check_exterior_ball(&corner, 0.0, r).unwrap().failures > 0);
        assert!(check_exterior_ball(&corner, 0.0, 0.5 * u.grid.dx).unwrap().vacuous);
        assert!(check_exterior_ball(&corner, -10.0, r).is_err());
    }

    #[test]
    fn evolution_inequality() {
        let (big_r, rep) = check_lcp_pair(2, 1.0, 1.0, 2.0, 2.0).unwrap();
        assert_eq!(big_r, 408.0);
        assert!(rep.passed(), "{rep:?}");
        let p = InfConvParams::lcp_pair(1.0, 2.0, 408.0, vec![0.0, 1.0]).unwrap();
        assert_eq!((p.r)(0.0).0, 0.5);
        let bad = check_evolution_inequality(&InfConvParams::constant(0.1), 2, 1.0, 1.0, &[vec![0.0, 0.0]], 1.0, 4);
        assert_eq!(bad.violations, 5);
        assert!((bad.max_lhs - 0.1).abs() < 1e-15);
    }

    #[test]
    fn finite_speed_bound() {
        let b = finite_speed_dt_bound(2.0, 1.0, 2, 1.0).unwrap();
        assert!((b.value - 1.0 / 6.0).abs() < 1e-15 && b.warning.is_none());
        assert!(finite_speed_dt_bound(2.0, 1e-8, 2, 1.0).unwrap().value < 1e-15);
        assert!(finite_speed_dt_bound(2.0, 1.0, 1, 1.0).unwrap().warning.is_some());
        assert!(finite_speed_dt_bound(1.0, 1.0, 2, 1.0).is_err());
    }
}
