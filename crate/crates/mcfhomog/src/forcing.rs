//! Periodic forcing fields `g` with certified bounds `m0 <= g <= M0` and Lipschitz constant `L0`.

use std::f64::consts::PI;
use std::fmt;
use std::path::Path;
use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ForcingKind {
    ClosedForm,
    GridSampled,
    Laminar,
}

type CustomFn = Arc<dyn Fn(&[f64]) -> f64 + Send + Sync>;

#[derive(Clone)]
enum Eval {
    Constant(f64),
    /// `mean + amp * prod_i sin(2 pi x_i)`
    SinProduct { mean: f64, amp: f64 },
    /// `mean + amp/n * sum_i sin(2 pi x_i)`
    SinSum { mean: f64, amp: f64 },
    /// `mean + amp * sin(2 pi x_1)`
    Stripes { mean: f64, amp: f64 },
    Grid(Arc<GridSample>),
    Corollary(Arc<CorollaryParams>),
    Lift(Arc<ForcingField>),
    Custom(CustomFn),
}

/// A `Z^n`-periodic positive forcing with declared bounds.
///
/// `lower`, `upper` and `lipschitz` are the certified constants `m0`, `M0`, `L0`.
#[derive(Clone)]
pub struct ForcingField {
    dim: usize,
    kind: ForcingKind,
    pub lower: f64,
    pub upper: f64,
    pub lipschitz: f64,
    label: String,
    eval: Eval,
}

impl fmt::Debug for ForcingField {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("ForcingField")
            .field("label", &self.label)
            .field("dim", &self.dim)
            .field("kind", &self.kind)
            .field("m0", &self.lower)
            .field("M0", &self.upper)
            .field("L0", &self.lipschitz)
            .finish()
    }
}

#[inline]
fn wrap01(v: f64) -> f64 {
    let w = v - v.floor();
    if w >= 1.0 {
        0.0
    } else {
        w
    }
}

/// Distance on the unit torus between two points of equal dimension.
pub fn torus_distance(a: &[f64], b: &[f64]) -> f64 {
    a.iter()
        .zip(b)
        .map(|(x, y)| {
            let d = wrap01(x - y);
            let d = d.min(1.0 - d);
            d * d
        })
        .sum::<f64>()
        .sqrt()
}

/// Quintic smoothstep `6l^5 - 15l^4 + 10l^3`; C^2 with `max S' = 15/8`.
#[inline]
pub fn smoothstep5(l: f64) -> f64 {
    let l = l.clamp(0.0, 1.0);
    l * l * l * (l * (6.0 * l - 15.0) + 10.0)
}

impl ForcingField {
    fn checked(self) -> Result<Self> {
        if !(self.lower > 0.0) {
            return Err(Error::Parameter(format!(
                "m0 = {} must be positive (hypothesis (H))",
                self.lower
            )));
        }
        if self.upper < self.lower || self.lipschitz < 0.0 || !self.upper.is_finite() {
            return Err(Error::Parameter(format!(
                "inconsistent bounds m0 = {}, M0 = {}, L0 = {}",
                self.lower, self.upper, self.lipschitz
            )));
        }
        Ok(self)
    }

    pub fn constant(dim: usize, c: f64) -> Result<Self> {
        ForcingField {
            dim,
            kind: ForcingKind::ClosedForm,
            lower: c,
            upper: c,
            lipschitz: 0.0,
            label: format!("constant({c})"),
            eval: Eval::Constant(c),
        }
        .checked()
    }

    pub fn sin_product(dim: usize, mean: f64, amp: f64) -> Result<Self> {
        ForcingField {
            dim,
            kind: ForcingKind::ClosedForm,
            lower: mean - amp.abs(),
            upper: mean + amp.abs(),
            lipschitz: 2.0 * PI * amp.abs(),
            label: format!("sin_product(mean={mean},amp={amp})"),
            eval: Eval::SinProduct { mean, amp },
        }
        .checked()
    }

    pub fn sin_sum(dim: usize, mean: f64, amp: f64) -> Result<Self> {
        ForcingField {
            dim,
            kind: ForcingKind::ClosedForm,
            lower: mean - amp.abs(),
            upper: mean + amp.abs(),
            lipschitz: 2.0 * PI * amp.abs() / (dim as f64).sqrt(),
            label: format!("sin_sum(mean={mean},amp={amp})"),
            eval: Eval::SinSum { mean, amp },
        }
        .checked()
    }

    pub fn stripes(dim: usize, mean: f64, amp: f64) -> Result<Self> {
        ForcingField {
            dim,
            kind: ForcingKind::ClosedForm,
            lower: mean - amp.abs(),
            upper: mean + amp.abs(),
            lipschitz: 2.0 * PI * amp.abs(),
            label: format!("stripes(mean={mean},amp={amp})"),
            eval: Eval::Stripes { mean, amp },
        }
        .checked()
    }

    /// Closed-form field selected by id: `constant` (uses `mean`), `sin_product`, `sin_sum`, `stripes`.
    pub fn closed_form(id: &str, dim: usize, mean: f64, amp: f64) -> Result<Self> {
        match id {
            "constant" => Self::constant(dim, mean),
            "sin_product" => Self::sin_product(dim, mean, amp),
            "sin_sum" => Self::sin_sum(dim, mean, amp),
            "stripes" => Self::stripes(dim, mean, amp),
            other => Err(Error::Parameter(format!("unknown closed-form forcing id '{other}'"))),
        }
    }

    /// Arbitrary periodic field with declared constants; the caller vouches for periodicity.
    pub fn custom<F>(dim: usize, lower: f64, upper: f64, lipschitz: f64, f: F) -> Self
    where
        F: Fn(&[f64]) -> f64 + Send + Sync + 'static,
    {
        ForcingField {
            dim,
            kind: ForcingKind::ClosedForm,
            lower,
            upper,
            lipschitz,
            label: "custom".into(),
            eval: Eval::Custom(Arc::new(f)),
        }
    }

    /// Periodic multilinear interpolant of samples on the regular lattice `k/shape` of `[0,1)^n`.
    /// Values are in row-major order (last axis fastest).
    pub fn from_grid(shape: Vec<usize>, values: Vec<f64>) -> Result<Self> {
        let sample = GridSample::new(shape, values)?;
        let (lo, hi) = sample.range();
        if !(lo > 0.0) {
            let idx = sample.values.iter().position(|v| *v == lo).unwrap_or(0);
            return Err(Error::HypothesisViolation {
                point: sample.node_point(idx),
                value: lo,
            });
        }
        let lip = sample.lipschitz();
        ForcingField {
            dim: sample.shape.len(),
            kind: ForcingKind::GridSampled,
            lower: lo,
            upper: hi,
            lipschitz: lip,
            label: format!("grid{:?}", sample.shape),
            eval: Eval::Grid(Arc::new(sample)),
        }
        .checked()
    }

    /// Reads a CSV grid sample with header `x1,...,xn,g`.
    pub fn from_csv(path: &Path) -> Result<Self> {
        let mut rdr = csv::Reader::from_path(path).map_err(|e| Error::Io(e.to_string()))?;
        let headers = rdr.headers().map_err(|e| Error::Io(e.to_string()))?.clone();
        let n = headers.len().checked_sub(1).filter(|n| *n >= 1).ok_or_else(|| {
            Error::Parameter("grid CSV needs header x1,...,xn,g".into())
        })?;
        for (i, h) in headers.iter().take(n).enumerate() {
            if h.trim() != format!("x{}", i + 1) {
                return Err(Error::Parameter(format!("grid CSV column {i} should be x{}", i + 1)));
            }
        }
        if headers[n].trim() != "g" {
            return Err(Error::Parameter("grid CSV last column must be g".into()));
        }
        let mut rows = Vec::new();
        for rec in rdr.records() {
            let rec = rec.map_err(|e| Error::Io(e.to_string()))?;
            let vals: std::result::Result<Vec<f64>, _> = rec.iter().map(|s| s.trim().parse::<f64>()).collect();
            let vals = vals.map_err(|e| Error::Parameter(format!("bad number in grid CSV: {e}")))?;
            if vals.len() != n + 1 {
                return Err(Error::Parameter("ragged grid CSV row".into()));
            }
            rows.push(vals);
        }
        let mut shape = Vec::with_capacity(n);
        for axis in 0..n {
            let mut coords: Vec<f64> = rows.iter().map(|r| r[axis]).collect();
            coords.sort_by(f64::total_cmp);
            coords.dedup_by(|a, b| (*a - *b).abs() < 1e-12);
            shape.push(coords.len());
        }
        let total: usize = shape.iter().product();
        if total != rows.len() {
            return Err(Error::Parameter(format!(
                "grid CSV has {} rows but the lattice {shape:?} needs {total}",
                rows.len()
            )));
        }
        let mut values = vec![f64::NAN; total];
        for r in &rows {
            let mut flat = 0usize;
            for axis in 0..n {
                let k = (r[axis] * shape[axis] as f64).round();
                if (k / shape[axis] as f64 - r[axis]).abs() > 1e-9 || k < 0.0 || k >= shape[axis] as f64 {
                    return Err(Error::Parameter(format!(
                        "grid CSV coordinate {} is not on the lattice k/{}",
                        r[axis], shape[axis]
                    )));
                }
                flat = flat * shape[axis] + k as usize;
            }
            values[flat] = r[n];
        }
        if values.iter().any(|v| v.is_nan()) {
            return Err(Error::Parameter("grid CSV has duplicate or missing lattice nodes".into()));
        }
        Self::from_grid(shape, values)
    }

    /// The two-bump laminar forcing on the `(n-1)`-torus.
    pub fn corollary(p: &CorollaryParams) -> Result<Self> {
        p.validate()?;
        let d12 = torus_distance(&p.y1, &p.y2);
        ForcingField {
            dim: p.n - 1,
            kind: ForcingKind::Laminar,
            lower: p.g_low,
            upper: p.g_high,
            lipschitz: (p.g_high - p.g_low) * (15.0 / 8.0) / (p.r2 - p.r1 - d12),
            label: format!("corollary(n={},r1={},r2={},R={})", p.n, p.r1, p.r2, p.big_r),
            eval: Eval::Corollary(Arc::new(p.clone())),
        }
        .checked()
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn kind(&self) -> ForcingKind {
        self.kind
    }

    pub fn label(&self) -> &str {
        &self.label
    }

    pub fn is_constant(&self) -> bool {
        self.lower == self.upper
    }

    /// True when the field ignores its last coordinate (laminar lift).
    pub fn is_laminar_lift(&self) -> bool {
        matches!(self.eval, Eval::Lift(_))
    }

    /// Evaluates `g(x)`; `x` must have `dim()` components.
    pub fn eval(&self, x: &[f64]) -> f64 {
        debug_assert_eq!(x.len(), self.dim);
        match &self.eval {
            Eval::Constant(c) => *c,
            Eval::SinProduct { mean, amp } => {
                mean + amp * x.iter().map(|v| (2.0 * PI * wrap01(*v)).sin()).product::<f64>()
            }
            Eval::SinSum { mean, amp } => {
                mean + amp / x.len() as f64 * x.iter().map(|v| (2.0 * PI * wrap01(*v)).sin()).sum::<f64>()
            }
            Eval::Stripes { mean, amp } => mean + amp * (2.0 * PI * wrap01(x[0])).sin(),
            Eval::Grid(s) => s.interpolate(x),
            Eval::Corollary(p) => p.eval(x),
            Eval::Lift(inner) => inner.eval(&x[..x.len() - 1]),
            Eval::Custom(f) => f(x),
        }
    }
}

/// Lifts `g'` on `R^{n-1}` to the laminar field `g(x', x_n) = g'(x')` on `R^n`.
pub fn make_laminar(gprime: &ForcingField) -> ForcingField {
    ForcingField {
        dim: gprime.dim + 1,
        kind: ForcingKind::Laminar,
        lower: gprime.lower,
        upper: gprime.upper,
        lipschitz: gprime.lipschitz,
        label: format!("laminar({})", gprime.label),
        eval: Eval::Lift(Arc::new(gprime.clone())),
    }
}

/// Samples on the regular periodic lattice of the unit cell.
#[derive(Clone, Debug)]
pub struct GridSample {
    pub shape: Vec<usize>,
    pub values: Vec<f64>,
}

impl GridSample {
    pub fn new(shape: Vec<usize>, values: Vec<f64>) -> Result<Self> {
        if shape.is_empty() || shape.iter().any(|s| *s < 2) {
            return Err(Error::Parameter(format!("grid sample shape {shape:?} needs >= 2 per axis")));
        }
        if shape.iter().product::<usize>() != values.len() {
            return Err(Error::Parameter("grid sample value count does not match shape".into()));
        }
        if values.iter().any(|v| !v.is_finite()) {
            return Err(Error::Parameter("grid sample contains non-finite values".into()));
        }
        Ok(GridSample { shape, values })
    }

    fn range(&self) -> (f64, f64) {
        self.values
            .iter()
            .fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), v| (lo.min(*v), hi.max(*v)))
    }

    fn node_point(&self, mut flat: usize) -> Vec<f64> {
        let mut p = vec![0.0; self.shape.len()];
        for axis in (0..self.shape.len()).rev() {
            p[axis] = (flat % self.shape[axis]) as f64 / self.shape[axis] as f64;
            flat /= self.shape[axis];
        }
        p
    }

    fn at(&self, idx: &[usize]) -> f64 {
        let mut flat = 0usize;
        for (axis, i) in idx.iter().enumerate() {
            flat = flat * self.shape[axis] + (i % self.shape[axis]);
        }
        self.values[flat]
    }

    fn interpolate(&self, x: &[f64]) -> f64 {
        let n = self.shape.len();
        let mut base = [0usize; 8];
        let mut frac = [0.0f64; 8];
        for axis in 0..n {
            let s = wrap01(x[axis]) * self.shape[axis] as f64;
            let b = s.floor();
            base[axis] = (b as usize) % self.shape[axis];
            frac[axis] = s - b;
        }
        let mut acc = 0.0;
        let mut idx = [0usize; 8];
        for corner in 0..(1usize << n) {
            let mut w = 1.0;
            for axis in 0..n {
                let hi = (corner >> axis) & 1 == 1;
                idx[axis] = base[axis] + hi as usize;
                w *= if hi { frac[axis] } else { 1.0 - frac[axis] };
            }
            if w != 0.0 {
                acc += w * self.at(&idx[..n]);
            }
        }
        acc
    }

    /// Exact Lipschitz constant of the multilinear interpolant: the gradient norm is convex
    /// along every coordinate line of a cell, so its maximum sits at a cell corner, where each
    /// component is the difference quotient of the incident cell edge.
    fn lipschitz(&self) -> f64 {
        let n = self.shape.len();
        let total: usize = self.values.len();
        let mut best = 0.0f64;
        let mut cell = vec![0usize; n];
        let mut idx = vec![0usize; n];
        for flat in 0..total {
            let mut f = flat;
            for axis in (0..n).rev() {
                cell[axis] = f % self.shape[axis];
                f /= self.shape[axis];
            }
            for corner in 0..(1usize << n) {
                let mut g2 = 0.0;
                for axis in 0..n {
                    for a in 0..n {
                        idx[a] = cell[a] + ((corner >> a) & 1);
                    }
                    idx[axis] = cell[axis] + 1;
                    let hi = self.at(&idx);
                    idx[axis] = cell[axis];
                    let lo = self.at(&idx);
                    let d = (hi - lo) * self.shape[axis] as f64;
                    g2 += d * d;
                }
                best = best.max(g2.sqrt());
            }
        }
        best
    }
}

/// Parameters of the explicit non-homogenization example.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CorollaryParams {
    pub n: usize,
    pub r1: f64,
    pub r2: f64,
    #[serde(rename = "R")]
    pub big_r: f64,
    pub y1: Vec<f64>,
    pub y2: Vec<f64>,
    pub sigma: f64,
    pub g_high: f64,
    pub g_low: f64,
}

impl CorollaryParams {
    /// Reference parameters `n=3, r1=0.15, r2=0.25, R=0.45, sigma=1, g_high=45, g_low=0.5`.
    pub fn reference() -> Self {
        CorollaryParams {
            n: 3,
            r1: 0.15,
            r2: 0.25,
            big_r: 0.45,
            y1: vec![0.5, 0.5],
            y2: vec![0.5, 0.5],
            sigma: 1.0,
            g_high: 45.0,
            g_low: 0.5,
        }
    }

    /// Certified lower bound of the head speed: `g_high - sqrt(2) n / r1`.
    pub fn sbar_lower(&self) -> f64 {
        self.g_high - 2f64.sqrt() * self.n as f64 / self.r1
    }

    /// Certified upper bound of the tail speed: `2/(R - r2) + sigma`.
    pub fn sunder_upper(&self) -> f64 {
        2.0 / (self.big_r - self.r2) + self.sigma
    }

    pub fn validate(&self) -> Result<()> {
        let fail = |m: String| Err(Error::Parameter(m));
        if self.n < 3 {
            return fail(format!("violates n >= 3 (n = {})", self.n));
        }
        if self.y1.len() != self.n - 1 || self.y2.len() != self.n - 1 {
            return fail(format!("y1, y2 must be points of the {}-torus", self.n - 1));
        }
        if !(0.0 < self.r1 && self.r1 < self.r2 && self.r2 < self.big_r && self.big_r < 0.5) {
            return fail(format!(
                "violates 0 < r1 < r2 < R < 1/2 (r1 = {}, r2 = {}, R = {})",
                self.r1, self.r2, self.big_r
            ));
        }
        let d12 = torus_distance(&self.y1, &self.y2);
        if d12 + self.r1 >= self.r2 {
            return fail(format!(
                "violates B(y1, r1) disjoint from torus \\ B(y2, r2): d(y1,y2) + r1 = {} >= r2 = {}",
                d12 + self.r1,
                self.r2
            ));
        }
        let lb = 2f64.sqrt() * self.n as f64 / self.r1;
        if self.g_high <= lb {
            return fail(format!("violates min_E1 g > sqrt(2) n / r1 = {lb}"));
        }
        let cap = self.g_high - (lb + 2.0 / (self.big_r - self.r2));
        if !(0.0 < self.sigma && self.sigma < cap) {
            return fail(format!(
                "violates 0 < sigma < min_E1 g - (sqrt(2) n / r1 + 2/(R - r2)) = {cap} (sigma = {})",
                self.sigma
            ));
        }
        let cap2 = self.sigma.min(self.n as f64 - 2.0);
        if !(self.g_low < cap2) {
            return fail(format!(
                "violates max_E2 g < min{{sigma, n - 2}} = {cap2} (g_low = {})",
                self.g_low
            ));
        }
        if !(self.g_low > 0.0) {
            return fail(format!("violates g_low > 0 (g_low = {})", self.g_low));
        }
        Ok(())
    }

    fn eval(&self, y: &[f64]) -> f64 {
        let a = torus_distance(y, &self.y1) - self.r1;
        if a <= 0.0 {
            return self.g_high;
        }
        let b = self.r2 - torus_distance(y, &self.y2);
        if b <= 0.0 {
            return self.g_low;
        }
        self.g_high - (self.g_high - self.g_low) * smoothstep5(a / (a + b))
    }
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct HypothesisReport {
    pub m0_est: f64,
    pub big_m0_est: f64,
    pub l0_est: f64,
    pub ok: bool,
}

/// Empirical bounds on the lattice `k/samples` of the unit cell (adjacent difference quotients
/// for the Lipschitz estimate, including the periodic wrap edge).
pub fn validate_hypothesis(field: &ForcingField, samples: usize) -> Result<HypothesisReport> {
    if samples < 2 {
        return Err(Error::Precondition("validate_hypothesis needs samples >= 2 per axis".into()));
    }
    let n = field.dim;
    let total = samples.pow(n as u32);
    let h = 1.0 / samples as f64;
    let mut vals = Vec::with_capacity(total);
    let mut x = vec![0.0; n];
    for flat in 0..total {
        let mut f = flat;
        for axis in (0..n).rev() {
            x[axis] = (f % samples) as f64 * h;
            f /= samples;
        }
        let v = field.eval(&x);
        if !(v > 0.0) {
            return Err(Error::HypothesisViolation { point: x.clone(), value: v });
        }
        vals.push(v);
    }
    let (mut lo, mut hi, mut lip) = (f64::INFINITY, f64::NEG_INFINITY, 0.0f64);
    let mut stride = 1usize;
    let mut strides = vec![0usize; n];
    for axis in (0..n).rev() {
        strides[axis] = stride;
        stride *= samples;
    }
    for (flat, v) in vals.iter().enumerate() {
        lo = lo.min(*v);
        hi = hi.max(*v);
        for axis in 0..n {
            let i = (flat / strides[axis]) % samples;
            let nb = if i + 1 == samples { flat - i * strides[axis] } else { flat + strides[axis] };
            lip = lip.max((vals[nb] - v).abs() / h);
        }
    }
    let tol = 1e-9 * field.upper.abs().max(1.0);
    let ok = lo >= field.lower - tol && hi <= field.upper + tol && lip <= field.lipschitz + tol * (1.0 + field.lipschitz);
    Ok(HypothesisReport { m0_est: lo, big_m0_est: hi, l0_est: lip, ok })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn constant_field_report() {
        let g = ForcingField::constant(2, 1.0).unwrap();
        let r = validate_hypothesis(&g, 8).unwrap();
        assert_eq!((r.m0_est, r.big_m0_est, r.l0_est, r.ok), (1.0, 1.0, 0.0, true));
    }

    #[test]
    fn sin_product_bounds_against_dense_oracle() {
        let g = ForcingField::sin_product(2, 1.0, 0.5).unwrap();
        let r = validate_hypothesis(&g, 64).unwrap();
        // Dense-grid oracle: the extrema 0.5 and 1.5 are attained at quarter points, which lie on the lattice.
        assert!(r.m0_est >= 0.5 - 1e-12 && r.m0_est <= 0.5 + 1e-9);
        assert!(r.big_m0_est <= 1.5 + 1e-12 && r.big_m0_est >= 1.5 - 1e-9);
        assert!(r.ok);
        assert!(r.l0_est <= g.lipschitz);
    }

    #[test]
    fn zero_value_is_a_hypothesis_violation() {
        let g = ForcingField::custom(2, 1e-3, 1.0, 10.0, |x| (2.0 * PI * x[0]).sin().abs());
        match validate_hypothesis(&g, 4) {
            Err(Error::HypothesisViolation { point, .. }) => assert_eq!(point[0], 0.0),
            other => panic!("expected violation, got {other:?}"),
        }
    }

    #[test]
    fn corollary_reference_is_valid() {
        let p = CorollaryParams::reference();
        let g = ForcingField::corollary(&p).unwrap();
        assert!((p.sbar_lower() - (45.0 - 2f64.sqrt() * 3.0 / 0.15)).abs() < 1e-12);
        assert!((p.sbar_lower() - 16.7157).abs() < 1e-3);
        assert_eq!(p.sunder_upper(), 11.0);
        assert_eq!(g.eval(&[0.5, 0.5]), 45.0);
        assert_eq!(g.eval(&[0.0, 0.0]), 0.5);
        let r = validate_hypothesis(&g, 128).unwrap();
        assert!(r.ok, "{r:?} vs L0 = {}", g.lipschitz);
    }

    #[test]
    fn corollary_rejects_bad_parameters() {
        let mut p = CorollaryParams::reference();
        p.g_low = 1.5;
        let e = ForcingField::corollary(&p).unwrap_err().to_string();
        assert!(e.contains("min{sigma, n - 2}"), "{e}");
        let mut p = CorollaryParams::reference();
        p.r1 = 0.3;
        assert!(matches!(ForcingField::corollary(&p), Err(Error::Parameter(_))));
    }

    #[test]
    fn laminar_lift_ignores_last_coordinate() {
        let gp = ForcingField::constant(2, 0.7).unwrap();
        let g = make_laminar(&gp);
        assert_eq!(g.dim(), 3);
        assert_eq!(g.eval(&[0.1, 0.2, 0.3]), 0.7);
        let gc = make_laminar(&ForcingField::corollary(&CorollaryParams::reference()).unwrap());
        for k in 0..10 {
            let y = [0.37 + 0.01 * k as f64, 0.61];
            assert_eq!(gc.eval(&[y[0], y[1], -3.0]), gc.eval(&[y[0], y[1], 7.25 * k as f64]));
        }
    }

    #[test]
    fn grid_sample_interpolates_and_bounds() {
        // g = 1 + x-index pattern on a 4x4 lattice.
        let shape = vec![4, 4];
        let values: Vec<f64> = (0..16).map(|k| 1.0 + (k % 4) as f64 * 0.25).collect();
        let g = ForcingField::from_grid(shape, values).unwrap();
        assert_eq!(g.lower, 1.0);
        assert_eq!(g.upper, 1.75);
        // Steepest edge is the wrap edge 1.75 -> 1.0 over h = 1/4.
        assert!((g.lipschitz - 3.0).abs() < 1e-12);
        assert!((g.eval(&[0.0, 0.125]) - 1.125).abs() < 1e-12);
        let r = validate_hypothesis(&g, 32).unwrap();
        assert!(r.ok);
    }
}
