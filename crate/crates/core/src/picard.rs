//! Iterative scheme: each iterate solves the system with the advecting
//! velocity and the density coefficient frozen at the previous iterate.
//!
//! Iterate `k+1` transports `b_{k+1}` by `alpha v^G + v~_k` and evolves
//! `w~_{k+1}` with advection by `v~_k` and diffusion/pressure coefficient `b_k`.
//! Iterate 0 is the zero trajectory, so iterate 1 is the linear problem.

use serde::Serialize;

use crate::config::RunConfig;
use crate::error::{Error, Result};
use crate::evolution::{initial_state, subdivide, Frozen, Integrator, StepOptions};
use crate::fields::{weighted_lp_norm_unchecked, PerturbationState};
use crate::spectral::ScalarField;

/// Number of consecutive increases of the iterate difference tolerated.
pub const NON_CONTRACTION_RUN: usize = 3;

/// One iterate: its trajectory on the shared time grid and its distance to the previous iterate.
#[derive(Debug, Clone)]
pub struct PicardIterate {
    pub index: usize,
    /// States at every time of `times`.
    pub trajectory: Vec<PerturbationState>,
    pub times: Vec<f64>,
    /// Indices into `times` of the output samples.
    pub sample_indices: Vec<usize>,
    /// Weighted `L^p` norm of `b_k - b_{k-1}` per time.
    pub delta_b: Vec<f64>,
    /// Weighted `L^2` norm of `w~_k - w~_{k-1}` per time.
    pub delta_w: Vec<f64>,
}

impl PicardIterate {
    /// The zero trajectory on the time grid of `cfg` (iterate 0).
    pub fn seed(initial: &PerturbationState, cfg: &RunConfig) -> Result<Self> {
        let g = initial.grid();
        let integ = Integrator::new(g, StepOptions::from_config(cfg));
        let limit = integ.cfl_limit(initial)?;
        let cap = match cfg.dt {
            Some(dt) if dt > limit * (1.0 + 1e-9) => return Err(Error::Cfl { dt, limit }),
            Some(dt) => dt,
            None => limit,
        };
        let mut times = vec![initial.tau];
        let mut sample_indices = vec![0];
        let span = cfg.t_end - initial.tau;
        let intervals = if span <= 1e-12 {
            0
        } else {
            ((span / cfg.output_interval) - 1e-9).ceil() as usize
        };
        for k in 1..=intervals {
            let start = *times.last().expect("non-empty");
            let target = (initial.tau + k as f64 * cfg.output_interval).min(cfg.t_end);
            let (m, h) = subdivide(target - start, cap);
            for s in 1..=m {
                times.push(if s == m { target } else { start + s as f64 * h });
            }
            sample_indices.push(times.len() - 1);
        }
        let trajectory = times
            .iter()
            .map(|&tau| {
                let mut z = PerturbationState::zero(g);
                z.tau = tau;
                z
            })
            .collect();
        let zeros = vec![0.0; times.len()];
        Ok(PicardIterate {
            index: 0,
            trajectory,
            times,
            sample_indices,
            delta_b: zeros.clone(),
            delta_w: zeros,
        })
    }

    /// `sup_t (delta_b^2 + delta_w^2)`.
    pub fn sup_delta_squared(&self) -> f64 {
        self.delta_b
            .iter()
            .zip(&self.delta_w)
            .map(|(b, w)| b * b + w * w)
            .fold(0.0, f64::max)
    }

    pub fn sup_delta_b(&self) -> f64 {
        self.delta_b.iter().copied().fold(0.0, f64::max)
    }

    pub fn sup_delta_w(&self) -> f64 {
        self.delta_w.iter().copied().fold(0.0, f64::max)
    }

    /// States at the output samples.
    pub fn samples(&self) -> impl Iterator<Item = &PerturbationState> {
        self.sample_indices.iter().map(|&i| &self.trajectory[i])
    }
}

/// Copy without cached spectra, to keep stored trajectories small.
fn compact(s: &PerturbationState) -> PerturbationState {
    let g = s.grid();
    PerturbationState {
        b: ScalarField::from_array(g, s.b.values().clone()),
        w_tilde: ScalarField::from_array(g, s.w_tilde.values().clone()),
        tau: s.tau,
    }
}

/// Next iterate from `initial` data, freezing coefficients at `prev`.
pub fn picard_step_from(prev: &PicardIterate, initial: &PerturbationState, cfg: &RunConfig) -> Result<PicardIterate> {
    let k = prev.index + 1;
    let wrap = |e: Error| Error::Picard {
        index: k,
        source: Box::new(e),
    };
    let g = initial.grid();
    let integ = Integrator::new(g, StepOptions::from_config(cfg));
    let p = cfg.picard_p;
    let mut traj = Vec::with_capacity(prev.times.len());
    let mut delta_b = Vec::with_capacity(prev.times.len());
    let mut delta_w = Vec::with_capacity(prev.times.len());
    let mut state = initial.clone();
    state.tau = prev.times[0];
    let mut f0 = Frozen::from_state(&prev.trajectory[0]).map_err(wrap)?;
    let record = |s: &PerturbationState, j: usize, db: &mut Vec<f64>, dw: &mut Vec<f64>| {
        let old = &prev.trajectory[j];
        db.push(weighted_lp_norm_unchecked(&s.b.sub(&old.b), p));
        dw.push(weighted_lp_norm_unchecked(&s.w_tilde.sub(&old.w_tilde), 2.0));
    };
    record(&state, 0, &mut delta_b, &mut delta_w);
    traj.push(compact(&state));
    for j in 1..prev.times.len() {
        let h = prev.times[j] - prev.times[j - 1];
        let f1 = Frozen::from_state(&prev.trajectory[j]).map_err(wrap)?;
        let fm = Frozen::lerp(&f0, &f1, 0.5);
        let (mut next, _) = integ.step(&state, h, Some([&f0, &fm, &f1])).map_err(wrap)?;
        next.tau = prev.times[j];
        record(&next, j, &mut delta_b, &mut delta_w);
        traj.push(compact(&next));
        state = next;
        f0 = f1;
    }
    Ok(PicardIterate {
        index: k,
        trajectory: traj,
        times: prev.times.clone(),
        sample_indices: prev.sample_indices.clone(),
        delta_b,
        delta_w,
    })
}

/// Next iterate, with initial data built from `cfg`.
pub fn picard_step(prev: &PicardIterate, cfg: &RunConfig) -> Result<PicardIterate> {
    let grid = prev.trajectory[0].grid().clone();
    let initial = initial_state(&grid, cfg)?;
    picard_step_from(prev, &initial, cfg)
}

/// Per-iterate summary.
#[derive(Debug, Clone, Serialize)]
pub struct IterateSummary {
    pub index: usize,
    pub sup_delta_b: f64,
    pub sup_delta_w: f64,
    /// `sqrt(sup_t (delta_b^2 + delta_w^2))`.
    pub sup_delta: f64,
    /// `(tau, delta_b, delta_w)` at the output samples.
    pub samples: Vec<(f64, f64, f64)>,
}

impl IterateSummary {
    fn of(it: &PicardIterate) -> Self {
        IterateSummary {
            index: it.index,
            sup_delta_b: it.sup_delta_b(),
            sup_delta_w: it.sup_delta_w(),
            sup_delta: it.sup_delta_squared().sqrt(),
            samples: it
                .sample_indices
                .iter()
                .map(|&i| (it.times[i], it.delta_b[i], it.delta_w[i]))
                .collect(),
        }
    }
}

#[derive(Debug, Clone)]
pub struct PicardOutcome {
    pub converged: bool,
    pub last: PicardIterate,
    pub history: Vec<IterateSummary>,
}

/// Iterate until `sup_t (delta_b^2 + delta_w^2) < tol^2` or `k_max` iterates.
pub fn picard_solve(cfg: &RunConfig, k_max: usize, tol: f64) -> Result<PicardOutcome> {
    cfg.validate()?;
    let grid = crate::spectral::make_grid(cfg.n, cfg.half_length)?;
    let initial = initial_state(&grid, cfg)?;
    picard_solve_from(&initial, cfg, k_max, tol)
}

/// [`picard_solve`] from given initial data.
pub fn picard_solve_from(initial: &PerturbationState, cfg: &RunConfig, k_max: usize, tol: f64) -> Result<PicardOutcome> {
    if k_max == 0 {
        return Err(Error::config("kmax", "must be >= 1"));
    }
    if !(tol > 0.0) {
        return Err(Error::config("tol", "must be positive"));
    }
    let mut current = PicardIterate::seed(initial, cfg)?;
    let mut history: Vec<IterateSummary> = Vec::new();
    for _ in 0..k_max {
        let next = picard_step_from(&current, initial, cfg)?;
        history.push(IterateSummary::of(&next));
        check_contraction(&history)?;
        let done = next.sup_delta_squared() < tol * tol;
        current = next;
        if done {
            return Ok(PicardOutcome {
                converged: true,
                last: current,
                history,
            });
        }
    }
    Ok(PicardOutcome {
        converged: false,
        last: current,
        history,
    })
}

/// Fails when either difference norm grew over [`NON_CONTRACTION_RUN`]
/// consecutive iterates. Iterate 1 measures the solution itself, not a
/// difference, so comparisons start at iterate 2.
pub fn check_contraction(history: &[IterateSummary]) -> Result<()> {
    let names = ["weighted L^p of delta b", "weighted L^2 of delta w"];
    let pick = |h: &IterateSummary, i: usize| if i == 0 { h.sup_delta_b } else { h.sup_delta_w };
    for (i, name) in names.iter().enumerate() {
        let mut run = 0;
        for w in history.windows(2).filter(|w| w[0].index >= 2) {
            run = if pick(&w[1], i) > pick(&w[0], i) { run + 1 } else { 0 };
            if run >= NON_CONTRACTION_RUN {
                return Err(Error::NonContraction { norm: name.to_string() });
            }
        }
    }
    Ok(())
}

/// Fit of `delta_k(t) ~ A C^k (t^k / k!)^{1 - 1/p}` to an iterate history.
#[derive(Debug, Clone, Copy, Serialize)]
pub struct SummabilityFit {
    pub prefactor: f64,
    pub c: f64,
    /// Root-mean-square relative deviation of the data from the model.
    pub relative_residual: f64,
    pub points: usize,
}

fn ln_factorial(k: usize) -> f64 {
    (2..=k).map(|i| (i as f64).ln()).sum()
}

/// Least squares in log space over iterates `k >= k_min` and samples with `t > t0`.
/// `delta_k(t)` is `sqrt(delta_b^2 + delta_w^2)` at the sample.
pub fn summability_fit(history: &[IterateSummary], p: f64, k_min: usize) -> Result<SummabilityFit> {
    let t0 = history
        .first()
        .and_then(|h| h.samples.first())
        .map(|s| s.0)
        .unwrap_or(0.0);
    let q = 1.0 - 1.0 / p;
    let mut rows = Vec::new();
    for h in history.iter().filter(|h| h.index >= k_min) {
        let k = h.index;
        for &(tau, db, dw) in &h.samples {
            let t = tau - t0;
            let d = db.hypot(dw);
            if t > 0.0 && d > 0.0 {
                let shape = q * (k as f64 * t.ln() - ln_factorial(k));
                rows.push((k as f64, d.ln() - shape, d, shape));
            }
        }
    }
    if rows.len() < 3 {
        return Err(Error::Fit(format!("{} usable points, need at least 3", rows.len())));
    }
    let n = rows.len() as f64;
    let mx = rows.iter().map(|r| r.0).sum::<f64>() / n;
    let my = rows.iter().map(|r| r.1).sum::<f64>() / n;
    let sxx: f64 = rows.iter().map(|r| (r.0 - mx).powi(2)).sum();
    let sxy: f64 = rows.iter().map(|r| (r.0 - mx) * (r.1 - my)).sum();
    let slope = if sxx > 0.0 { sxy / sxx } else { 0.0 };
    let intercept = my - slope * mx;
    let rel: f64 = rows
        .iter()
        .map(|r| {
            let model = (intercept + slope * r.0 + r.3).exp();
            ((r.2 - model) / r.2).powi(2)
        })
        .sum::<f64>()
        / n;
    Ok(SummabilityFit {
        prefactor: intercept.exp(),
        c: slope.exp(),
        relative_residual: rel.sqrt(),
        points: rows.len(),
    })
}

#[cfg(test)]
mod tests;
