//! Measurement: per-step norm records, decay fits, the oscillator spectrum,
//! the estimate-ratio corpus and density transport reports.

pub mod estimates;
pub mod spectrum;
pub mod transport;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::fields::{lp_norm, sobolev_norm, weighted_lp_norm, PerturbationState};
use crate::operators::biot_savart;
use crate::spectral::{gradient, ScalarField};

pub use estimates::{estimate_ratio_suite, CorpusConfig, EstimateReport, EstimateSummary, Suite};
pub use spectrum::{oscillator_spectrum, OscillatorSpectrum};
pub use transport::{transport_invariant_report, TransportReport};

/// Grid quadrature of `w~`.
pub fn mean_vorticity(w_tilde: &ScalarField) -> f64 {
    w_tilde.integral()
}

/// One output row of a run.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DiagnosticsRecord {
    pub tau: f64,
    /// Weighted `L^2` of `w~`.
    pub w_l2w: f64,
    /// Weighted `L^2` of `grad w~`.
    pub grad_l2w: f64,
    /// Weighted `L^2` of `|xi| w~`.
    pub xi_l2w: f64,
    pub b_l2w: f64,
    pub b_linfw: f64,
    pub mean: f64,
    pub w_l4w: f64,
    pub w_linfw: f64,
    pub b_l4w: f64,
    /// `H^s` norm of `w~`, `s` from the config.
    pub w_hs: f64,
    pub b_hs: f64,
    /// Unweighted `L^2` and `L^4` of `b`.
    pub b_l2: f64,
    pub b_l4: f64,
    /// `||v~||_inf`.
    pub vt_inf: f64,
    pub boundary_w: f64,
    pub boundary_b: f64,
    pub pressure_iterations: usize,
    /// Ratio of the CFL limit to the step in use (>= 1 when admissible).
    pub cfl_margin: f64,
}

/// CSV column names, in file order.
pub const CSV_COLUMNS: [&str; 19] = [
    "tau",
    "wL2w",
    "gradL2w",
    "xiL2w",
    "bL2w",
    "bLinfw",
    "mean",
    "wL4w",
    "wLinfw",
    "bL4w",
    "wHs",
    "bHs",
    "bL2",
    "bL4",
    "vtInf",
    "boundaryW",
    "boundaryB",
    "pressureIters",
    "cflMargin",
];

impl DiagnosticsRecord {
    /// Measure a state. `pressure_iterations` and `cfl_margin` come from the integrator.
    pub fn measure(
        state: &PerturbationState,
        sobolev_s: f64,
        pressure_iterations: usize,
        cfl_margin: f64,
    ) -> Result<Self> {
        let w = &state.w_tilde;
        let b = &state.b;
        let gw = gradient(w)?;
        let g = w.grid();
        let xi_w = ScalarField::from_array(g, w.values() * &g.radius_squared().mapv(f64::sqrt));
        let vt = biot_savart(w)?;
        let rec = DiagnosticsRecord {
            tau: state.tau,
            w_l2w: weighted_lp_norm(w, 2.0)?,
            grad_l2w: weighted_lp_norm(&gw.magnitude(), 2.0)?,
            xi_l2w: weighted_lp_norm(&xi_w, 2.0)?,
            b_l2w: weighted_lp_norm(b, 2.0)?,
            b_linfw: weighted_lp_norm(b, f64::INFINITY)?,
            mean: mean_vorticity(w),
            w_l4w: weighted_lp_norm(w, 4.0)?,
            w_linfw: weighted_lp_norm(w, f64::INFINITY)?,
            b_l4w: weighted_lp_norm(b, 4.0)?,
            w_hs: sobolev_norm(w, sobolev_s)?,
            b_hs: sobolev_norm(b, sobolev_s)?,
            b_l2: lp_norm(b, 2.0)?,
            b_l4: lp_norm(b, 4.0)?,
            vt_inf: vt.magnitude().max_abs(),
            boundary_w: w.boundary_mass(),
            boundary_b: b.boundary_mass(),
            pressure_iterations,
            cfl_margin,
        };
        if !rec.all_finite() {
            return Err(Error::Blowup(state.tau));
        }
        Ok(rec)
    }

    pub fn all_finite(&self) -> bool {
        self.float_values().iter().all(|v| v.is_finite())
    }

    fn float_values(&self) -> [f64; 18] {
        [
            self.tau,
            self.w_l2w,
            self.grad_l2w,
            self.xi_l2w,
            self.b_l2w,
            self.b_linfw,
            self.mean,
            self.w_l4w,
            self.w_linfw,
            self.b_l4w,
            self.w_hs,
            self.b_hs,
            self.b_l2,
            self.b_l4,
            self.vt_inf,
            self.boundary_w,
            self.boundary_b,
            self.cfl_margin,
        ]
    }

    /// One CSV line (no trailing newline), columns as in [`CSV_COLUMNS`].
    pub fn csv_row(&self) -> String {
        let v = self.float_values();
        let mut cols: Vec<String> = v[..17].iter().map(|x| x.to_string()).collect();
        cols.push(self.pressure_iterations.to_string());
        cols.push(v[17].to_string());
        cols.join(",")
    }

    /// Parse a line produced by [`DiagnosticsRecord::csv_row`].
    pub fn from_csv_row(line: &str) -> Result<Self> {
        let parts: Vec<&str> = line.trim().split(',').collect();
        if parts.len() != CSV_COLUMNS.len() {
            return Err(Error::Corrupt(format!(
                "diagnostics row has {} columns, expected {}",
                parts.len(),
                CSV_COLUMNS.len()
            )));
        }
        let f = |k: usize| -> Result<f64> {
            parts[k]
                .parse()
                .map_err(|_| Error::Corrupt(format!("bad number {:?} in column {}", parts[k], CSV_COLUMNS[k])))
        };
        Ok(DiagnosticsRecord {
            tau: f(0)?,
            w_l2w: f(1)?,
            grad_l2w: f(2)?,
            xi_l2w: f(3)?,
            b_l2w: f(4)?,
            b_linfw: f(5)?,
            mean: f(6)?,
            w_l4w: f(7)?,
            w_linfw: f(8)?,
            b_l4w: f(9)?,
            w_hs: f(10)?,
            b_hs: f(11)?,
            b_l2: f(12)?,
            b_l4: f(13)?,
            vt_inf: f(14)?,
            boundary_w: f(15)?,
            boundary_b: f(16)?,
            pressure_iterations: parts[17]
                .parse()
                .map_err(|_| Error::Corrupt(format!("bad iteration count {:?}", parts[17])))?,
            cfl_margin: f(18)?,
        })
    }
}

/// Least-squares fit of `log y = log A - gamma tau`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DecayFit {
    pub gamma: f64,
    /// `A = K epsilon`.
    pub amplitude: f64,
    pub r_squared: f64,
    pub samples: usize,
}

impl DecayFit {
    /// `K = A / epsilon`.
    pub fn k_hat(&self, epsilon: f64) -> f64 {
        self.amplitude / epsilon
    }
}

/// Minimum number of samples inside the fit window.
pub const MIN_FIT_SAMPLES: usize = 10;

/// Fit an exponential rate to `(tau, norm)` pairs with `tau` in `[lo, hi]`.
pub fn decay_fit(series: &[(f64, f64)], window: (f64, f64)) -> Result<DecayFit> {
    let (lo, hi) = window;
    let tol = 1e-9;
    let pts: Vec<(f64, f64)> = series
        .iter()
        .copied()
        .filter(|(t, _)| *t >= lo - tol && *t <= hi + tol)
        .collect();
    if pts.len() < MIN_FIT_SAMPLES {
        return Err(Error::Fit(format!(
            "{} samples in window [{lo}, {hi}], need at least {MIN_FIT_SAMPLES}",
            pts.len()
        )));
    }
    if let Some((t, y)) = pts.iter().find(|(_, y)| !(*y > 0.0) || !y.is_finite()) {
        return Err(Error::Fit(format!("non-positive norm {y} at tau = {t}")));
    }
    let n = pts.len() as f64;
    let mx = pts.iter().map(|p| p.0).sum::<f64>() / n;
    let my = pts.iter().map(|p| p.1.ln()).sum::<f64>() / n;
    let mut sxx = 0.0;
    let mut sxy = 0.0;
    let mut syy = 0.0;
    for (t, y) in &pts {
        let (dx, dy) = (t - mx, y.ln() - my);
        sxx += dx * dx;
        sxy += dx * dy;
        syy += dy * dy;
    }
    if sxx == 0.0 {
        return Err(Error::Fit("all samples at one time".into()));
    }
    // a constant series fits exactly with zero slope
    let constant = pts.iter().all(|p| p.1 == pts[0].1);
    let slope = if constant { 0.0 } else { sxy / sxx };
    let intercept = my - slope * mx;
    let ss_res: f64 = pts
        .iter()
        .map(|(t, y)| (y.ln() - intercept - slope * t).powi(2))
        .sum();
    let r_squared = if constant || syy == 0.0 { 1.0 } else { 1.0 - ss_res / syy };
    Ok(DecayFit {
        gamma: -slope + 0.0,
        amplitude: intercept.exp(),
        r_squared,
        samples: pts.len(),
    })
}
