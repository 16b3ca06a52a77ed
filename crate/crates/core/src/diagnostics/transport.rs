//! Density transport checks on stored run series.
//!
//! Under `d_tau b = -((v - xi/2) . grad) b` with `div v = 0` the norms obey
//! `||b(tau)||_p = ||b(0)||_p e^{-tau/p}` exactly; the report tabulates the
//! drift of `||b||_p e^{tau/p}`. For two runs it also tracks the density
//! difference against the accumulated velocity difference.

use serde::Serialize;

use crate::error::{Error, Result};
use crate::fields::{lp_norm, lp_norm_vector, PerturbationState};
use crate::operators::biot_savart;

#[derive(Debug, Clone, Serialize)]
pub struct NormLaw {
    pub p: f64,
    /// `(tau, ||b||_p e^{tau/p})`.
    pub series: Vec<(f64, f64)>,
    /// `max |x(tau)/x(0) - 1|`.
    pub max_relative_drift: f64,
}

#[derive(Debug, Clone, Serialize)]
pub struct PairedSample {
    pub tau: f64,
    /// `||b_2 - b_1||_p`.
    pub density_difference: f64,
    /// `int_0^tau ||v~_2 - v~_1||_inf` (trapezoid rule).
    pub velocity_difference_integral: f64,
}

#[derive(Debug, Clone, Serialize)]
pub struct PairedReport {
    pub p: f64,
    pub samples: Vec<PairedSample>,
    /// Smallest `C` with `||d b(tau)||_p e^{tau/p} <= ||d b(0)||_p + C int ||d v||_inf`
    /// over the series; 0 for identical runs.
    pub empirical_constant: f64,
}

#[derive(Debug, Clone, Serialize)]
pub struct TransportReport {
    pub laws: Vec<NormLaw>,
    pub paired: Option<PairedReport>,
}

fn check_series(series: &[PerturbationState]) -> Result<()> {
    if series.is_empty() {
        return Err(Error::config("series", "empty run series"));
    }
    if series.windows(2).any(|w| !(w[1].tau > w[0].tau)) {
        return Err(Error::config("series", "tau must be strictly increasing"));
    }
    Ok(())
}

/// Drift of `||b||_p e^{tau/p}` for each `p`.
pub fn norm_law(series: &[PerturbationState], p: f64) -> Result<NormLaw> {
    check_series(series)?;
    let mut out = Vec::with_capacity(series.len());
    for st in series {
        out.push((st.tau, lp_norm(&st.b, p)? * (st.tau / p).exp()));
    }
    let x0 = out[0].1;
    let max_relative_drift = if x0 == 0.0 {
        out.iter().map(|v| v.1.abs()).fold(0.0, f64::max)
    } else {
        out.iter().map(|v| (v.1 / x0 - 1.0).abs()).fold(0.0, f64::max)
    };
    Ok(NormLaw {
        p,
        series: out,
        max_relative_drift,
    })
}

/// Compare two runs sampled at the same times.
pub fn paired_report(a: &[PerturbationState], b: &[PerturbationState], p: f64) -> Result<PairedReport> {
    check_series(a)?;
    check_series(b)?;
    if a.len() != b.len() || a.iter().zip(b).any(|(x, y)| (x.tau - y.tau).abs() > 1e-12) {
        return Err(Error::config("series", "paired runs must share sample times"));
    }
    let mut samples = Vec::with_capacity(a.len());
    let mut integral = 0.0;
    let mut prev: Option<(f64, f64)> = None;
    for (x, y) in a.iter().zip(b) {
        let dv = biot_savart(&y.w_tilde)?.sub(&biot_savart(&x.w_tilde)?);
        let dv_inf = lp_norm_vector(&dv, f64::INFINITY)?;
        if let Some((t0, v0)) = prev {
            integral += 0.5 * (x.tau - t0) * (v0 + dv_inf);
        }
        prev = Some((x.tau, dv_inf));
        samples.push(PairedSample {
            tau: x.tau,
            density_difference: lp_norm(&y.b.sub(&x.b), p)?,
            velocity_difference_integral: integral,
        });
    }
    let d0 = samples[0].density_difference;
    let mut c: f64 = 0.0;
    for s in &samples {
        let excess = s.density_difference * (s.tau / p).exp() - d0;
        if excess > 0.0 {
            c = c.max(if s.velocity_difference_integral > 0.0 {
                excess / s.velocity_difference_integral
            } else {
                f64::INFINITY
            });
        }
    }
    Ok(PairedReport {
        p,
        samples,
        empirical_constant: c,
    })
}

/// Norm-law drift for each `p` in `ps`, plus the paired comparison when a second run is given.
pub fn transport_invariant_report(
    series: &[PerturbationState],
    ps: &[f64],
    other: Option<&[PerturbationState]>,
) -> Result<TransportReport> {
    let laws = ps.iter().map(|&p| norm_law(series, p)).collect::<Result<Vec<_>>>()?;
    let paired = match other {
        Some(o) => Some(paired_report(series, o, ps.first().copied().unwrap_or(2.0))?),
        None => None,
    };
    Ok(TransportReport { laws, paired })
}
