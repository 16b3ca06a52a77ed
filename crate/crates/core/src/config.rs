use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Initial vorticity perturbation profile.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(try_from = "String", into = "String")]
pub enum Shape {
    /// `G(xi - d) - G(xi + d)` with `d = (1/2, 0)`.
    GaussianDipole,
    /// Product Hermite function; an eigenfunction of the Fokker-Planck operator.
    HermiteMode(u32, u32),
    /// Seeded low-frequency trigonometric polynomial times `G`.
    RandomBandlimited,
}

impl fmt::Display for Shape {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Shape::GaussianDipole => write!(f, "gaussian-dipole"),
            Shape::HermiteMode(a, b) => write!(f, "hermite-mode({a},{b})"),
            Shape::RandomBandlimited => write!(f, "random-bandlimited"),
        }
    }
}

impl FromStr for Shape {
    type Err = String;

    fn from_str(s: &str) -> std::result::Result<Self, String> {
        let s = s.trim();
        match s {
            "gaussian-dipole" => return Ok(Shape::GaussianDipole),
            "random-bandlimited" => return Ok(Shape::RandomBandlimited),
            _ => {}
        }
        let inner = s
            .strip_prefix("hermite-mode(")
            .and_then(|r| r.strip_suffix(')'))
            .ok_or_else(|| {
                format!(
                    "unknown shape {s:?}; expected gaussian-dipole, hermite-mode(n1,n2) or random-bandlimited"
                )
            })?;
        let parts: Vec<&str> = inner.split(',').map(str::trim).collect();
        if parts.len() != 2 {
            return Err(format!("hermite-mode needs two indices, got {inner:?}"));
        }
        let a = parts[0].parse().map_err(|_| format!("bad hermite index {:?}", parts[0]))?;
        let b = parts[1].parse().map_err(|_| format!("bad hermite index {:?}", parts[1]))?;
        Ok(Shape::HermiteMode(a, b))
    }
}

impl TryFrom<String> for Shape {
    type Error = String;
    fn try_from(s: String) -> std::result::Result<Self, String> {
        s.parse()
    }
}

impl From<Shape> for String {
    fn from(s: Shape) -> String {
        s.to_string()
    }
}

/// Which terms of the vorticity equation are integrated.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Model {
    /// The complete coupled system.
    #[default]
    Full,
    /// `(L - alpha Lambda) w` only: no quadratic transport, no density coupling.
    Linear,
}

fn d_n() -> usize {
    256
}
fn d_half_length() -> f64 {
    16.0
}
fn d_t_end() -> f64 {
    6.0
}
fn d_output_interval() -> f64 {
    0.1
}
fn d_cfl() -> f64 {
    0.5
}
fn d_pressure_tol() -> f64 {
    1e-10
}
fn d_eigensolver_tol() -> f64 {
    1e-9
}
fn d_shape() -> Shape {
    Shape::GaussianDipole
}
fn d_one() -> f64 {
    1.0
}
fn d_sobolev_s() -> f64 {
    0.5
}
fn d_picard_p() -> f64 {
    8.0
}
fn d_fit_window() -> [f64; 2] {
    [1.0, 6.0]
}

/// Parameters of one run. Only `alpha` and `epsilon` are required in a config file.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    /// Circulation of the Oseen vortex.
    pub alpha: f64,
    /// Weighted L2 size of the initial vorticity perturbation.
    pub epsilon: f64,
    #[serde(default = "d_n")]
    pub n: usize,
    #[serde(default = "d_half_length")]
    pub half_length: f64,
    /// Fixed time step; `None` selects the CFL step automatically.
    #[serde(default)]
    pub dt: Option<f64>,
    #[serde(default = "d_t_end")]
    pub t_end: f64,
    /// Spacing in tau between diagnostics rows.
    #[serde(default = "d_output_interval")]
    pub output_interval: f64,
    #[serde(default = "d_cfl")]
    pub cfl: f64,
    #[serde(default = "d_pressure_tol")]
    pub pressure_tol: f64,
    #[serde(default = "d_eigensolver_tol")]
    pub eigensolver_tol: f64,
    #[serde(default)]
    pub seed: u64,
    #[serde(default = "d_shape")]
    pub shape: Shape,
    /// Size of `b0` relative to `epsilon`; zero gives a homogeneous fluid.
    #[serde(default = "d_one")]
    pub density_scale: f64,
    /// Coefficient of `-(-Delta)^4 b`; zero disables it.
    #[serde(default)]
    pub hyperviscosity: f64,
    #[serde(default)]
    pub model: Model,
    /// Write a checkpoint every this many output rows; zero disables.
    #[serde(default)]
    pub checkpoint_every: usize,
    #[serde(default = "d_sobolev_s")]
    pub sobolev_s: f64,
    /// Lebesgue exponent of the weighted density difference in the Picard solver.
    #[serde(default = "d_picard_p")]
    pub picard_p: f64,
    #[serde(default = "d_fit_window")]
    pub fit_window: [f64; 2],
    /// Also render an SVG decay plot.
    #[serde(default)]
    pub plot: bool,
}

impl RunConfig {
    /// Config with every optional field at its default.
    pub fn new(alpha: f64, epsilon: f64) -> Self {
        RunConfig {
            alpha,
            epsilon,
            n: d_n(),
            half_length: d_half_length(),
            dt: None,
            t_end: d_t_end(),
            output_interval: d_output_interval(),
            cfl: d_cfl(),
            pressure_tol: d_pressure_tol(),
            eigensolver_tol: d_eigensolver_tol(),
            seed: 0,
            shape: d_shape(),
            density_scale: 1.0,
            hyperviscosity: 0.0,
            model: Model::Full,
            checkpoint_every: 0,
            sobolev_s: d_sobolev_s(),
            picard_p: d_picard_p(),
            fit_window: d_fit_window(),
            plot: false,
        }
    }

    pub fn validate(&self) -> Result<()> {
        let finite = |name: &str, v: f64| {
            if v.is_finite() {
                Ok(())
            } else {
                Err(Error::config(name, "must be finite"))
            }
        };
        finite("alpha", self.alpha)?;
        finite("epsilon", self.epsilon)?;
        if self.epsilon < 0.0 {
            return Err(Error::config("epsilon", format!("must be >= 0, got {}", self.epsilon)));
        }
        if self.n % 2 != 0 || self.n < 8 {
            return Err(Error::config("n", format!("must be even and >= 8, got {}", self.n)));
        }
        if !(self.half_length > 0.0 && self.half_length.is_finite()) {
            return Err(Error::config("half_length", "must be positive"));
        }
        if let Some(dt) = self.dt {
            if !(dt > 0.0 && dt.is_finite()) {
                return Err(Error::config("dt", format!("must be positive, got {dt}")));
            }
        }
        if !(self.t_end >= 0.0 && self.t_end.is_finite()) {
            return Err(Error::config("t_end", "must be >= 0"));
        }
        if !(self.output_interval > 0.0 && self.output_interval.is_finite()) {
            return Err(Error::config("output_interval", "must be positive"));
        }
        if !(self.cfl > 0.0 && self.cfl <= 1.0) {
            return Err(Error::config("cfl", "must lie in (0, 1]"));
        }
        if !(self.pressure_tol > 0.0 && self.pressure_tol <= 1e-6) {
            return Err(Error::config(
                "pressure_tol",
                format!("must lie in (0, 1e-6], got {}", self.pressure_tol),
            ));
        }
        if !(self.eigensolver_tol > 0.0 && self.eigensolver_tol < 1.0) {
            return Err(Error::config("eigensolver_tol", "must lie in (0, 1)"));
        }
        if !(self.density_scale >= 0.0 && self.density_scale.is_finite()) {
            return Err(Error::config("density_scale", "must be >= 0"));
        }
        if !(self.hyperviscosity >= 0.0 && self.hyperviscosity.is_finite()) {
            return Err(Error::config("hyperviscosity", "must be >= 0"));
        }
        if !(self.sobolev_s > 0.0 && self.sobolev_s.is_finite()) {
            return Err(Error::config("sobolev_s", "must be positive"));
        }
        if !(self.picard_p >= 1.0) {
            return Err(Error::config("picard_p", "must be >= 1"));
        }
        let [lo, hi] = self.fit_window;
        if !(lo.is_finite() && hi.is_finite() && lo < hi) {
            return Err(Error::config("fit_window", "must be an increasing pair"));
        }
        Ok(())
    }
}

/// Parse and validate a config from JSON text. Errors name the offending key path.
pub fn config_from_str(text: &str) -> Result<RunConfig> {
    let de = &mut serde_json::Deserializer::from_str(text);
    let cfg: RunConfig = serde_path_to_error::deserialize(de).map_err(|e| {
        let path = e.path().to_string();
        let field = if path == "." { "<root>".to_string() } else { path };
        Error::config(&field, e.into_inner().to_string())
    })?;
    cfg.validate()?;
    Ok(cfg)
}
