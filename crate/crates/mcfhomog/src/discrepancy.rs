//! Equidistribution toolkit: discrepancies of `{l x mod 1}`, `omega_nu(N)`, lattice points near
//! irrational hyperplanes, minimal lattice shifts and comparison-consistent triplets.

use serde::Serialize;

use crate::error::{Error, Result};

#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
#[serde(rename_all = "snake_case", tag = "status", content = "value")]
pub enum Rationality {
    /// `d * nu / |nu|_inf` is an integer vector.
    Rational(u64),
    Irrational,
    /// No rational certificate with denominator up to the bound.
    Undecided(u64),
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct Direction {
    pub nu: Vec<f64>,
    pub rationality: Rationality,
}

pub const DENOMINATOR_BOUND: u64 = 1_000_000;

/// Best rational approximation of `r >= 0` with denominator `<= bound` that reproduces `r`
/// to `1e-14` relative accuracy, via the continued fraction expansion.
fn rational_certificate(r: f64, bound: u64) -> Option<u64> {
    let tol = 1e-14 * r.abs().max(1.0);
    let (mut p0, mut q0, mut p1, mut q1) = (0.0f64, 1.0f64, 1.0f64, 0.0f64);
    let mut x = r;
    for _ in 0..64 {
        let a = x.floor();
        let (p2, q2) = (a * p1 + p0, a * q1 + q0);
        if q2 > bound as f64 {
            return None;
        }
        if (r - p2 / q2).abs() <= tol {
            return Some(q2 as u64);
        }
        let frac = x - a;
        if frac <= 0.0 {
            return Some(q2 as u64);
        }
        x = 1.0 / frac;
        p0 = p1;
        q0 = q1;
        p1 = p2;
        q1 = q2;
    }
    None
}

fn gcd(a: u64, b: u64) -> u64 {
    if b == 0 {
        a
    } else {
        gcd(b, a % b)
    }
}

pub fn linf(v: &[f64]) -> f64 {
    v.iter().fold(0.0f64, |m, x| m.max(x.abs()))
}

fn norm(v: &[f64]) -> f64 {
    v.iter().map(|x| x * x).sum::<f64>().sqrt()
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

impl Direction {
    /// Normalizes `v` and classifies it by continued fractions of `|v_j| / |v|_inf`.
    pub fn new(v: &[f64]) -> Result<Self> {
        let nrm = norm(v);
        if !(nrm > 0.0) || v.iter().any(|x| !x.is_finite()) {
            return Err(Error::Parameter("direction must be a finite nonzero vector".into()));
        }
        let nu: Vec<f64> = v.iter().map(|x| x / nrm).collect();
        let m = linf(&nu);
        let mut d = 1u64;
        for x in &nu {
            match rational_certificate(x.abs() / m, DENOMINATOR_BOUND) {
                Some(q) => {
                    d = d / gcd(d, q) * q;
                    if d > DENOMINATOR_BOUND {
                        return Ok(Direction { nu, rationality: Rationality::Undecided(DENOMINATOR_BOUND) });
                    }
                }
                None => return Ok(Direction { nu, rationality: Rationality::Undecided(DENOMINATOR_BOUND) }),
            }
        }
        Ok(Direction { nu, rationality: Rationality::Rational(d) })
    }

    /// A direction known to be irrational by construction (e.g. built from the golden mean).
    pub fn irrational(v: &[f64]) -> Result<Self> {
        let mut d = Self::new(v)?;
        if let Rationality::Rational(q) = d.rationality {
            return Err(Error::Parameter(format!("direction is rational with denominator {q}")));
        }
        d.rationality = Rationality::Irrational;
        Ok(d)
    }

    /// `(1, phi)` normalized, `phi = (sqrt(5) - 1)/2`.
    pub fn golden() -> Self {
        let phi = (5f64.sqrt() - 1.0) / 2.0;
        Self::irrational(&[1.0, phi]).expect("golden direction is irrational")
    }

    pub fn is_rational(&self) -> bool {
        matches!(self.rationality, Rationality::Rational(_))
    }

    pub fn dim(&self) -> usize {
        self.nu.len()
    }

    /// `m_j(nu) = |nu_j| / |nu|_inf`.
    pub fn m(&self) -> Vec<f64> {
        let l = linf(&self.nu);
        self.nu.iter().map(|x| x.abs() / l).collect()
    }
}

fn sorted_fractions(x: f64, n: usize) -> Vec<f64> {
    let mut pts: Vec<f64> = (1..=n)
        .map(|l| {
            let v = l as f64 * x;
            let f = v - v.floor();
            if f >= 1.0 {
                0.0
            } else {
                f
            }
        })
        .collect();
    pts.sort_by(f64::total_cmp);
    pts
}

/// `(A, B)` with `A = 1/(2N) + max(-d_i)`, `B = 1/(2N) + max(d_i)`, `d_i = x_i - (2i-1)/(2N)`.
/// `D*_N = max(A, B)` and `D_N = A + B`; sharing `A`, `B` makes `D* <= D <= 2D*` hold bitwise.
fn half_gaps(x: f64, n: usize) -> (f64, f64) {
    let pts = sorted_fractions(x, n);
    let nn = n as f64;
    let (mut lo, mut hi) = (f64::INFINITY, f64::NEG_INFINITY);
    for (i, p) in pts.iter().enumerate() {
        let d = p - (2.0 * (i + 1) as f64 - 1.0) / (2.0 * nn);
        lo = lo.min(d);
        hi = hi.max(d);
    }
    let h = 1.0 / (2.0 * nn);
    (h + (-lo), h + hi)
}

/// Modified discrepancy `D*_N(x) = 1/(2N) + max_i |x_i - (2i-1)/(2N)|` over the sorted `frac(l x)`.
pub fn modified_discrepancy(x: f64, n: usize) -> f64 {
    assert!(n >= 1, "N must be positive");
    let (a, b) = half_gaps(x, n);
    a.max(b)
}

/// Discrepancy `D_N(x)`: supremum over intervals `[a, b)` of `|A([a,b); N)/N - (b - a)|`,
/// via the sorted-point formula `1/N + max(i/N - x_i) - min(i/N - x_i)`.
pub fn discrepancy(x: f64, n: usize) -> f64 {
    assert!(n >= 1, "N must be positive");
    let (a, b) = half_gaps(x, n);
    a + b
}

/// Independent `D_N` by enumerating every critical interval with endpoints in `{0, x_i, 1}`.
pub fn discrepancy_brute_force(x: f64, n: usize) -> f64 {
    let pts = sorted_fractions(x, n);
    let nn = n as f64;
    let mut best = 0.0f64;
    // Over-counted: closed [x_i, x_j] reached as [x_i, x_j + 0).
    for i in 0..n {
        for j in i..n {
            let cnt = pts.iter().filter(|p| **p >= pts[i] && **p <= pts[j]).count() as f64;
            best = best.max(cnt / nn - (pts[j] - pts[i]));
        }
    }
    // Under-counted: open (e_a, e_b) with e in {0, x_i, 1}; `[0, b)` and `[a, 1)` are covered
    // because an endpoint without a point on it gives the same count.
    let mut ends = Vec::with_capacity(n + 2);
    ends.push(0.0);
    ends.extend_from_slice(&pts);
    ends.push(1.0);
    for a in 0..ends.len() {
        for b in a + 1..ends.len() {
            let (ea, eb) = (ends[a], ends[b]);
            if eb < ea {
                continue;
            }
            let cnt = pts.iter().filter(|p| **p > ea && **p < eb).count() as f64;
            best = best.max((eb - ea) - cnt / nn);
        }
    }
    best
}

/// `omega_nu(N) = 2 min_j D*_N(m_j(nu))`.
pub fn omega(nu: &Direction, n: usize) -> f64 {
    2.0 * nu
        .m()
        .iter()
        .map(|m| modified_discrepancy(*m, n))
        .fold(f64::INFINITY, f64::min)
}

/// Smallest `N <= max_n` with `omega_nu(N) < delta / (3 |nu|_inf)`.
pub fn omega_threshold_n(nu: &Direction, delta: f64, max_n: usize) -> Option<usize> {
    let target = delta / (3.0 * linf(&nu.nu));
    (1..=max_n).find(|n| omega(nu, *n) < target)
}

/// `R0(nu, delta) = 6N + 3 sqrt(n) + 9`.
pub fn r0(nu: &Direction, delta: f64, max_n: usize) -> Result<f64> {
    let nn = omega_threshold_n(nu, delta, max_n).ok_or_else(|| {
        Error::Resource {
            what: "omega threshold N".into(),
            required: f64::INFINITY,
            available: max_n as f64,
        }
    })?;
    Ok(6.0 * nn as f64 + 3.0 * (nu.dim() as f64).sqrt() + 9.0)
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct LatticePoint {
    pub z0: Vec<f64>,
    /// Integer part `z0 - x0` (last entry may be real in the laminar relaxation).
    pub k: Vec<f64>,
}

/// Searches `k in Z^n` (last axis of largest `|nu_j|` solved in closed form) with
/// `delta/3 < k . nu < delta` and `|k - x0| < R/3`; `z0 = x0 + k`.
/// With `laminar = true` the last coordinate of `k` is real (laminar relaxation of the shift).
fn search_lattice(nu: &[f64], delta: f64, x0: &[f64], radius: f64, laminar: bool) -> Option<Vec<f64>> {
    let n = nu.len();
    let rad = radius / 3.0;
    // Solve for the pivot axis; enumerate the others.
    let pivot = if laminar {
        n - 1
    } else {
        (0..n).max_by(|a, b| nu[*a].abs().total_cmp(&nu[*b].abs())).unwrap()
    };
    if nu[pivot].abs() < 1e-300 {
        return None;
    }
    let others: Vec<usize> = (0..n).filter(|a| *a != pivot).collect();
    let lo: Vec<i64> = others.iter().map(|a| (x0[*a] - rad).floor() as i64).collect();
    let hi: Vec<i64> = others.iter().map(|a| (x0[*a] + rad).ceil() as i64).collect();
    let mut cur = lo.clone();
    let mut best: Option<(f64, Vec<f64>)> = None;
    loop {
        let mut k = vec![0.0; n];
        let mut partial = 0.0;
        let mut dist2 = 0.0;
        for (slot, a) in others.iter().enumerate() {
            k[*a] = cur[slot] as f64;
            partial += k[*a] * nu[*a];
            dist2 += (k[*a] - x0[*a]).powi(2);
        }
        if dist2 < rad * rad {
            // delta/3 < partial + k_p nu_p < delta
            let (mut a, mut b) = ((delta / 3.0 - partial) / nu[pivot], (delta - partial) / nu[pivot]);
            if a > b {
                std::mem::swap(&mut a, &mut b);
            }
            let candidates: Vec<f64> = if laminar {
                // Closest admissible real value to x0_p inside the open interval.
                let mid = x0[pivot].clamp(a + (b - a) * 1e-6, b - (b - a) * 1e-6);
                vec![mid]
            } else {
                let first = a.floor() as i64 + 1;
                (first..).take_while(|c| (*c as f64) < b).map(|c| c as f64).collect()
            };
            for kp in candidates {
                k[pivot] = kp;
                let d2 = dist2 + (kp - x0[pivot]).powi(2);
                let proj = dot(&k, nu);
                if d2 < rad * rad && proj > delta / 3.0 && proj < delta {
                    if best.as_ref().map_or(true, |(bd, _)| d2 < *bd) {
                        best = Some((d2, k.clone()));
                    }
                }
            }
        }
        // advance odometer
        let mut axis = 0;
        loop {
            if axis == cur.len() {
                return best.map(|(_, k)| k);
            }
            cur[axis] += 1;
            if cur[axis] <= hi[axis] {
                break;
            }
            cur[axis] = lo[axis];
            axis += 1;
        }
        if others.is_empty() {
            return best.map(|(_, k)| k);
        }
    }
}

/// Verifies (i) `delta/3 < (z0 - x0).nu < delta`, (ii) `|z0 - 2 x0| < R/3`, (iii) `z0 - x0` integral
/// (except the last coordinate in the laminar relaxation).
pub fn verify_lattice_point(nu: &[f64], delta: f64, x0: &[f64], radius: f64, z0: &[f64], laminar: bool) -> Result<()> {
    let k: Vec<f64> = z0.iter().zip(x0).map(|(z, x)| z - x).collect();
    let proj = dot(&k, nu);
    if !(proj > delta / 3.0 && proj < delta) {
        return Err(Error::Internal(format!("(i) fails: (z0 - x0).nu = {proj} not in ({}, {delta})", delta / 3.0)));
    }
    let d: Vec<f64> = z0.iter().zip(x0).map(|(z, x)| z - 2.0 * x).collect();
    if !(norm(&d) < radius / 3.0) {
        return Err(Error::Internal(format!("(ii) fails: |z0 - 2x0| = {} >= R/3", norm(&d))));
    }
    let n = k.len();
    for (a, v) in k.iter().enumerate() {
        if laminar && a == n - 1 {
            continue;
        }
        if (v - v.round()).abs() > 1e-9 {
            return Err(Error::Internal(format!("(iii) fails: component {a} of z0 - x0 = {v}")));
        }
    }
    Ok(())
}

/// Finds `z0` with (i)-(iii) for `x0` on `R S^{n-1} ∩ H_nu` by exhaustive search in the admissible box.
pub fn lattice_point_near_hyperplane(nu: &Direction, delta: f64, x0: &[f64], radius: f64) -> Result<LatticePoint> {
    if nu.is_rational() {
        return Err(Error::NotApplicable("rational direction: lattice values of k.nu are discrete".into()));
    }
    if !(delta > 0.0) {
        return Err(Error::Parameter("delta must be positive".into()));
    }
    let k = search_lattice(&nu.nu, delta, x0, radius, false)
        .ok_or_else(|| Error::Internal(format!("no lattice point found (R = {radius} may be below R0)")))?;
    let z0: Vec<f64> = x0.iter().zip(&k).map(|(x, k)| x + k).collect();
    verify_lattice_point(&nu.nu, delta, x0, radius, &z0, false)?;
    Ok(LatticePoint { z0, k })
}

/// Minimal-norm `xi in Z^n` with `xi . nu > a`, ties broken in ascending lexicographic order.
pub fn lattice_min_shift(nu: &[f64], a: f64) -> Vec<i64> {
    let n = nu.len();
    let mut best: Option<(i64, Vec<i64>)> = None;
    let mut r: i64 = 0;
    loop {
        // Enumerate the shell of the box [-r, r]^n (points with max |xi_j| = r).
        let side = (2 * r + 1) as usize;
        let mut cur = vec![0i64; n];
        for code in 0..side.pow(n as u32) {
            let mut c = code;
            for slot in cur.iter_mut().rev() {
                *slot = (c % side) as i64 - r;
                c /= side;
            }
            if cur.iter().all(|c| c.abs() != r) {
                continue;
            }
            let p: f64 = cur.iter().zip(nu).map(|(c, v)| *c as f64 * v).sum();
            if p > a {
                let n2: i64 = cur.iter().map(|c| c * c).sum();
                let better = match &best {
                    None => true,
                    Some((bn, bv)) => n2 < *bn || (n2 == *bn && cur < *bv),
                };
                if better {
                    best = Some((n2, cur.clone()));
                }
            }
        }
        if let Some((bn, bv)) = &best {
            // Every vector with norm^2 <= bn lies in the box of half-width r once r*r >= bn.
            if r * r >= *bn {
                return bv.clone();
            }
        }
        r += 1;
    }
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct ComparisonConstants {
    pub t: f64,
    pub m0: f64,
    pub big_m0: f64,
    pub l0: f64,
    pub n: usize,
    pub gamma_t: f64,
    pub delta_t: f64,
}

/// `gamma(t) = e^{-2 L0 t} / 2`.
pub fn gamma(l0: f64, t: f64) -> f64 {
    0.5 * (-2.0 * l0 * t).exp()
}

/// `delta(T) = (M0 m0/(M0 - m0)) gamma^2 / (sqrt(M0 gamma + n - 1) + sqrt(n - 1))^2`.
pub fn comparison_constants(t: f64, m0: f64, big_m0: f64, l0: f64, n: usize) -> Result<ComparisonConstants> {
    if !(big_m0 > m0 && m0 > 0.0) {
        return Err(Error::Parameter(format!("need M0 > m0 > 0 (m0 = {m0}, M0 = {big_m0})")));
    }
    if !(l0 > 0.0 && t >= 0.0) {
        return Err(Error::Parameter("need L0 > 0 and T >= 0".into()));
    }
    let g = gamma(l0, t);
    let nm1 = n as f64 - 1.0;
    let den = ((big_m0 * g + nm1).sqrt() + nm1.sqrt()).powi(2);
    let delta = big_m0 * m0 / (big_m0 - m0) * g * g / den;
    Ok(ComparisonConstants { t, m0, big_m0, l0, n, gamma_t: g, delta_t: delta })
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct ConsistencyReport {
    pub consistent: bool,
    pub delta: f64,
    pub samples: usize,
    pub reason: String,
}

/// Samples `x0` on `∂Ω(0,R;nu) ∩ H_nu` and requires a lattice point for every sample with a
/// witness `delta = delta(T)/2`. In the laminar relaxation the last shift coordinate is real.
pub fn is_comparison_consistent(
    nu: &Direction,
    consts: &ComparisonConstants,
    radius: f64,
    laminar: bool,
) -> ConsistencyReport {
    let n = nu.dim();
    let delta = consts.delta_t / 2.0;
    if radius < (n as f64).sqrt() / 2.0 {
        return ConsistencyReport {
            consistent: false,
            delta,
            samples: 0,
            reason: format!("degenerate cylinder: R = {radius} < sqrt(n)/2"),
        };
    }
    let samples = hyperplane_circle_samples(&nu.nu, radius, 16);
    for x0 in &samples {
        match search_lattice(&nu.nu, delta, x0, radius, laminar) {
            Some(k) => {
                let z0: Vec<f64> = x0.iter().zip(&k).map(|(x, k)| x + k).collect();
                if let Err(e) = verify_lattice_point(&nu.nu, delta, x0, radius, &z0, laminar) {
                    return ConsistencyReport { consistent: false, delta, samples: samples.len(), reason: e.to_string() };
                }
                // Statement form (i): z0.nu; equal to the Definition form because x0.nu = 0.
                let zn = dot(&z0, &nu.nu);
                if !(zn > delta / 3.0 - 1e-12 && zn < delta + 1e-12) {
                    return ConsistencyReport {
                        consistent: false,
                        delta,
                        samples: samples.len(),
                        reason: format!("statement form of (i) fails: z0.nu = {zn}"),
                    };
                }
            }
            None => {
                return ConsistencyReport {
                    consistent: false,
                    delta,
                    samples: samples.len(),
                    reason: format!("no lattice point within R/3 of x0 = {x0:?} with k.nu in ({}, {delta})", delta / 3.0),
                }
            }
        }
    }
    ConsistencyReport { consistent: true, delta, samples: samples.len(), reason: "all samples admit lattice points".into() }
}

/// Deterministic points of `R S^{n-1} ∩ H_nu` (an orthonormal frame of `nu^perp` plus angles).
pub fn hyperplane_circle_samples(nu: &[f64], radius: f64, count: usize) -> Vec<Vec<f64>> {
    let basis = orthonormal_complement(nu);
    match basis.len() {
        0 => vec![],
        1 => vec![basis[0].iter().map(|v| v * radius).collect(), basis[0].iter().map(|v| -v * radius).collect()],
        _ => (0..count)
            .map(|k| {
                let th = 2.0 * std::f64::consts::PI * k as f64 / count as f64;
                (0..nu.len())
                    .map(|i| radius * (th.cos() * basis[0][i] + th.sin() * basis[1][i]))
                    .collect()
            })
            .collect(),
    }
}

/// Gram-Schmidt basis of the orthogonal complement of `nu`.
pub fn orthonormal_complement(nu: &[f64]) -> Vec<Vec<f64>> {
    let n = nu.len();
    let u: Vec<f64> = {
        let l = norm(nu);
        nu.iter().map(|v| v / l).collect()
    };
    let mut basis: Vec<Vec<f64>> = vec![u];
    for e in 0..n {
        let mut v = vec![0.0; n];
        v[e] = 1.0;
        for b in &basis {
            let p = dot(&v, b);
            for i in 0..n {
                v[i] -= p * b[i];
            }
        }
        let l = norm(&v);
        if l > 1e-8 {
            basis.push(v.iter().map(|x| x / l).collect());
        }
        if basis.len() == n {
            break;
        }
    }
    basis.remove(0);
    basis
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn modified_discrepancy_half_two() {
        assert_eq!(modified_discrepancy(0.5, 2), 0.5);
        assert_eq!(discrepancy(0.5, 2), 0.5);
        assert_eq!(discrepancy_brute_force(0.5, 2), 0.5);
    }

    #[test]
    fn single_point_formula() {
        for x in [0.1, 0.37, 0.5, 0.83, 2.25] {
            let f: f64 = x - f64::floor(x);
            assert!((modified_discrepancy(x, 1) - (0.5 + (f - 0.5).abs())).abs() < 1e-15);
        }
    }

    #[test]
    fn all_points_at_zero() {
        assert_eq!(discrepancy(0.0, 7), 1.0);
        assert_eq!(discrepancy_brute_force(0.0, 7), 1.0);
    }

    #[test]
    fn golden_mean_decreasing_trend() {
        let phi = (5f64.sqrt() - 1.0) / 2.0;
        assert!(modified_discrepancy(phi, 1000) < 0.01);
        assert!(modified_discrepancy(phi, 1000) < modified_discrepancy(phi, 10));
    }

    #[test]
    fn omega_axis_direction_is_constant() {
        let e1 = Direction::new(&[1.0, 0.0]).unwrap();
        assert!(e1.is_rational());
        for n in [2, 10, 100] {
            assert_eq!(omega(&e1, n), 2.0);
        }
    }

    #[test]
    fn rationality_detection() {
        assert_eq!(Direction::new(&[1.0, 1.0]).unwrap().rationality, Rationality::Rational(1));
        assert_eq!(Direction::new(&[2.0, 3.0]).unwrap().rationality, Rationality::Rational(3));
        let phi = (5f64.sqrt() - 1.0) / 2.0;
        assert_eq!(Direction::new(&[1.0, phi]).unwrap().rationality, Rationality::Undecided(DENOMINATOR_BOUND));
    }

    #[test]
    fn min_shift_examples() {
        assert_eq!(lattice_min_shift(&[1.0, 0.0], 1.0), vec![2, 0]);
        let s = 0.5f64.sqrt();
        assert_eq!(lattice_min_shift(&[s, s], 0.0), vec![0, 1]);
        assert_eq!(lattice_min_shift(&[1.0, 0.0], -0.5), vec![0, 0]);
    }

    #[test]
    fn lattice_point_rational_not_applicable() {
        let e2 = Direction::new(&[0.0, 1.0]).unwrap();
        assert!(matches!(
            lattice_point_near_hyperplane(&e2, 0.3, &[5.0, 0.0], 100.0),
            Err(Error::NotApplicable(_))
        ));
    }

    #[test]
    fn comparison_constants_basics() {
        let c = comparison_constants(0.0, 1.0, 2.0, 1.0, 2).unwrap();
        assert_eq!(c.gamma_t, 0.5);
        assert!(matches!(comparison_constants(1.0, 2.0, 2.0, 1.0, 2), Err(Error::Parameter(_))));
    }

    #[test]
    fn tiny_radius_is_not_consistent() {
        let c = comparison_constants(0.1, 1.0, 2.0, 1.0, 2).unwrap();
        let r = is_comparison_consistent(&Direction::golden(), &c, 0.5, false);
        assert!(!r.consistent);
    }
}
