//! TOML run configuration. Every model constant is an explicit key; only numerical-scheme knobs
//! (CFL factor, stencil radius, step budget) fall back to library defaults.

use std::fmt;
use std::path::{Path, PathBuf};

use mcfhomog::forcing::{make_laminar, CorollaryParams, ForcingField};
use mcfhomog::laminar::GraphParams;
use mcfhomog::levelset::{Boundary, Curvature, Grid, SchemeParams};
use serde::{Deserialize, Serialize};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize, clap::ValueEnum)]
#[serde(rename_all = "snake_case")]
pub enum Scenario {
    Simulate,
    Obstacle,
    Speeds,
    Sweep,
    Finger,
    Laminar,
    Discrepancy,
    Lcp,
}

impl Scenario {
    pub fn as_str(self) -> &'static str {
        match self {
            Scenario::Simulate => "simulate",
            Scenario::Obstacle => "obstacle",
            Scenario::Speeds => "speeds",
            Scenario::Sweep => "sweep",
            Scenario::Finger => "finger",
            Scenario::Laminar => "laminar",
            Scenario::Discrepancy => "discrepancy",
            Scenario::Lcp => "lcp",
        }
    }
}

/// Rejected configuration; reported as `kind=config`.
#[derive(Debug, Clone, PartialEq)]
pub struct ConfigError(pub String);

impl fmt::Display for ConfigError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.0)
    }
}

impl std::error::Error for ConfigError {}

pub fn bad<T>(msg: impl Into<String>) -> Result<T, ConfigError> {
    Err(ConfigError(msg.into()))
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    /// Optional; must agree with the scenario named on the command line.
    pub scenario: Option<Scenario>,
    pub seed: u64,
    /// Horizon `T`.
    pub horizon: f64,
    /// Period scale `eps` of `g(x/eps)`.
    pub eps: f64,
    pub forcing: ForcingSpec,
    pub grid: Option<GridSpec>,
    #[serde(default)]
    pub scheme: SchemeSpec,
    #[serde(default)]
    pub directions: Vec<Vec<f64>>,
    pub out: Option<PathBuf>,
    pub workers: Option<usize>,
    pub simulate: Option<SimulateSpec>,
    pub obstacle: Option<ObstacleSpec>,
    pub speeds: Option<SpeedsSpec>,
    pub sweep: Option<SweepSpec>,
    pub finger: Option<FingerSpec>,
    pub laminar: Option<LaminarSpec>,
    pub discrepancy: Option<DiscrepancySpec>,
    pub lcp: Option<LcpSpec>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum ForcingSpec {
    Constant { dim: usize, value: f64 },
    SinProduct { dim: usize, mean: f64, amp: f64 },
    SinSum { dim: usize, mean: f64, amp: f64 },
    Stripes { dim: usize, mean: f64, amp: f64 },
    /// Periodic grid sample `i,j[,k],value` on `[0,1)^d`.
    Csv { path: PathBuf },
    /// Two-bump laminar base field on the `(n-1)`-torus.
    Corollary {
        n: usize,
        r1: f64,
        r2: f64,
        big_r: f64,
        sigma: f64,
        g_high: f64,
        g_low: f64,
        y1: Vec<f64>,
        y2: Vec<f64>,
    },
    /// `g(x', x_n) = base(x')`.
    Lift { base: Box<ForcingSpec> },
}

impl ForcingSpec {
    pub fn build(&self, base_dir: &Path) -> mcfhomog::Result<ForcingField> {
        match self {
            ForcingSpec::Constant { dim, value } => ForcingField::constant(*dim, *value),
            ForcingSpec::SinProduct { dim, mean, amp } => ForcingField::sin_product(*dim, *mean, *amp),
            ForcingSpec::SinSum { dim, mean, amp } => ForcingField::sin_sum(*dim, *mean, *amp),
            ForcingSpec::Stripes { dim, mean, amp } => ForcingField::stripes(*dim, *mean, *amp),
            ForcingSpec::Csv { path } => ForcingField::from_csv(&base_dir.join(path)),
            ForcingSpec::Corollary { .. } => ForcingField::corollary(&self.corollary().expect("corollary spec")),
            ForcingSpec::Lift { base } => Ok(make_laminar(&base.build(base_dir)?)),
        }
    }

    pub fn corollary(&self) -> Option<CorollaryParams> {
        match self {
            ForcingSpec::Corollary { n, r1, r2, big_r, sigma, g_high, g_low, y1, y2 } => Some(CorollaryParams {
                n: *n,
                r1: *r1,
                r2: *r2,
                big_r: *big_r,
                y1: y1.clone(),
                y2: y2.clone(),
                sigma: *sigma,
                g_high: *g_high,
                g_low: *g_low,
            }),
            _ => None,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum AxisBoundary {
    Periodic,
    Clamped,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum GridSpec {
    /// Explicit box: node `i` of axis `a` at `origin[a] + i dx`.
    Box { shape: Vec<usize>, dx: f64, origin: Vec<f64>, boundary: Vec<AxisBoundary> },
    /// Twisted-periodic box of `periods` lattice periods, `cells` nodes per period, carrying
    /// planar data along the first direction.
    Twisted { periods: usize, cells: usize },
}

impl GridSpec {
    pub fn build(&self, nu: Option<&[f64]>, eps: f64) -> mcfhomog::Result<Grid> {
        match self {
            GridSpec::Box { shape, dx, origin, boundary } => {
                let b = boundary
                    .iter()
                    .map(|b| match b {
                        AxisBoundary::Periodic => Boundary::periodic(),
                        AxisBoundary::Clamped => Boundary::Clamped,
                    })
                    .collect();
                Grid::new(shape.clone(), *dx, origin.clone(), b)
            }
            GridSpec::Twisted { periods, cells } => {
                let nu = nu.ok_or_else(|| mcfhomog::Error::Parameter("twisted grid needs a direction".into()))?;
                Grid::twisted(nu, eps, *periods, *cells)
            }
        }
    }
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SchemeSpec {
    pub cfl_factor: Option<f64>,
    pub grad_reg: Option<f64>,
    pub max_steps: Option<usize>,
    pub curvature: Option<Curvature>,
    pub stencil_radius: Option<f64>,
    pub graph_cfl: Option<f64>,
}

impl SchemeSpec {
    pub fn level_set(&self) -> SchemeParams {
        let d = SchemeParams::default();
        SchemeParams {
            cfl_factor: self.cfl_factor.unwrap_or(d.cfl_factor),
            grad_reg: self.grad_reg.unwrap_or(d.grad_reg),
            max_steps: self.max_steps.unwrap_or(d.max_steps),
            curvature: self.curvature.unwrap_or(d.curvature),
            stencil_radius: self.stencil_radius.unwrap_or(d.stencil_radius),
        }
    }

    pub fn graph(&self) -> GraphParams {
        let d = GraphParams::default();
        GraphParams { cfl: self.graph_cfl.unwrap_or(d.cfl), max_steps: self.max_steps.unwrap_or(d.max_steps) }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum InitialSpec {
    /// `u0 = offset - x.nu` with `nu` the first direction.
    Planar { offset: f64 },
    /// `u0 = radius - |x - center|`.
    Ball { center: Vec<f64>, radius: f64 },
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SimulateSpec {
    pub initial: InitialSpec,
    /// Number of output times after `t = 0`.
    pub outputs: usize,
    #[serde(default)]
    pub snapshots: bool,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SideSpec {
    Sub,
    Super,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ObstacleSpec {
    pub side: SideSpec,
    pub s: f64,
    pub r: f64,
    pub rdot: f64,
    pub outputs: usize,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum MethodSpec {
    FrontTracking,
    ObstacleBisection,
    Both,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct EstimatorSpec {
    pub method: MethodSpec,
    pub cells_per_period: usize,
    pub box_periods: usize,
    /// Cylinder radius in which head and tail are read.
    pub radius: f64,
    pub samples: usize,
    pub probe_horizon: f64,
    pub bisection_iters: usize,
}

pub type SpeedsSpec = EstimatorSpec;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SweepSpec {
    /// Number of equally spaced directions on the circle.
    pub count: usize,
    #[serde(flatten)]
    pub estimator: EstimatorSpec,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FingerSpec {
    pub cells: usize,
    pub t_fit: f64,
    pub samples: usize,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct LaminarSpec {
    /// Verify the two-bump fingering certificate (also selected by `--corollary`).
    #[serde(default)]
    pub corollary: bool,
    pub cells: usize,
    pub t_fit: f64,
    /// Relative tolerance of the profile residual check.
    pub residual_tol: f64,
    /// Traveling-wave mode: speed estimates for the head (sub) and tail (super) ladders.
    #[serde(default)]
    pub wave_speeds: Option<[f64; 2]>,
    #[serde(default)]
    pub levels: Vec<usize>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DiscrepancySpec {
    pub n_max: usize,
    /// Rows written per direction (log-spaced `N`).
    pub rows: usize,
    pub delta: f64,
    /// Random `x` checked against `D* <= D <= 2 D*` (uses `seed`).
    pub random_cases: usize,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct LcpSpec {
    pub s1: f64,
    pub s2: f64,
    pub cells_per_period: usize,
    pub samples: usize,
}

impl RunConfig {
    pub fn from_toml(text: &str) -> Result<Self, ConfigError> {
        toml::from_str(text).map_err(|e| ConfigError(format!("invalid config: {}", e.message())))
    }

    pub fn load(path: &Path) -> Result<Self, ConfigError> {
        let text = std::fs::read_to_string(path).map_err(|e| ConfigError(format!("cannot read {}: {e}", path.display())))?;
        Self::from_toml(&text)
    }

    /// Checks the keys every scenario relies on.
    pub fn validate(&self, scenario: Scenario) -> Result<(), ConfigError> {
        if let Some(s) = self.scenario {
            if s != scenario {
                return bad(format!("config is for scenario {} but {} was requested", s.as_str(), scenario.as_str()));
            }
        }
        if !(self.horizon > 0.0 && self.horizon.is_finite()) {
            return bad(format!("horizon must be positive and finite, got {}", self.horizon));
        }
        if !(self.eps > 0.0 && self.eps.is_finite()) {
            return bad(format!("eps must be positive and finite, got {}", self.eps));
        }
        if self.workers == Some(0) {
            return bad("workers must be at least 1");
        }
        for d in &self.directions {
            let norm = d.iter().map(|v| v * v).sum::<f64>().sqrt();
            if !norm.is_finite() || (norm - 1.0).abs() > 1e-9 {
                return bad(format!("direction {d:?} is not a unit vector"));
            }
        }
        let missing = |name: &str| bad(format!("scenario {} needs a [{name}] section", scenario.as_str()));
        match scenario {
            Scenario::Simulate if self.simulate.is_none() => missing("simulate"),
            Scenario::Obstacle if self.obstacle.is_none() => missing("obstacle"),
            Scenario::Speeds if self.speeds.is_none() => missing("speeds"),
            Scenario::Sweep if self.sweep.is_none() => missing("sweep"),
            Scenario::Finger if self.finger.is_none() => missing("finger"),
            Scenario::Laminar if self.laminar.is_none() => missing("laminar"),
            Scenario::Discrepancy if self.discrepancy.is_none() => missing("discrepancy"),
            Scenario::Lcp if self.lcp.is_none() => missing("lcp"),
            Scenario::Simulate | Scenario::Obstacle if self.grid.is_none() => missing("grid"),
            Scenario::Obstacle | Scenario::Speeds | Scenario::Lcp | Scenario::Discrepancy if self.directions.is_empty() => {
                bad(format!("scenario {} needs at least one entry in directions", scenario.as_str()))
            }
            _ => Ok(()),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    const PLANAR: &str = r#"
seed = 1
horizon = 1.0
eps = 1.0
directions = [[0.0, 1.0]]
[forcing]
kind = "constant"
dim = 2
value = 1.0
[grid]
kind = "box"
shape = [16, 64]
dx = 0.0625
origin = [0.0, -2.0]
boundary = ["periodic", "clamped"]
[simulate]
outputs = 4
initial = { kind = "planar", offset = 0.0 }
"#;

    #[test]
    fn parses_and_validates() {
        let c = RunConfig::from_toml(PLANAR).unwrap();
        c.validate(Scenario::Simulate).unwrap();
        assert!(c.validate(Scenario::Obstacle).is_err());
        let g = c.grid.as_ref().unwrap().build(None, 1.0).unwrap();
        assert_eq!(g.shape, vec![16, 64]);
        assert_eq!(c.scheme.level_set(), SchemeParams::default());
    }

    #[test]
    fn unknown_keys_and_bad_values_rejected() {
        assert!(RunConfig::from_toml(&format!("{PLANAR}\nbogus = 1\n")).is_err());
        let c = RunConfig::from_toml(&PLANAR.replace("horizon = 1.0", "horizon = -1.0")).unwrap();
        assert!(c.validate(Scenario::Simulate).unwrap_err().0.contains("horizon"));
        let c = RunConfig::from_toml(&PLANAR.replace("[[0.0, 1.0]]", "[[0.0, 2.0]]")).unwrap();
        assert!(c.validate(Scenario::Simulate).is_err());
    }

    #[test]
    fn lift_of_corollary() {
        let spec: ForcingSpec = toml::from_str(
            r#"
kind = "lift"
[base]
kind = "corollary"
n = 3
r1 = 0.15
r2 = 0.25
big_r = 0.45
sigma = 1.0
g_high = 45.0
g_low = 0.5
y1 = [0.5, 0.5]
y2 = [0.5, 0.5]
"#,
        )
        .unwrap();
        let g = spec.build(Path::new(".")).unwrap();
        assert_eq!(g.dim(), 3);
        assert!(g.is_laminar_lift());
    }
}
