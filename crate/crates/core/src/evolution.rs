//! Time integration of the perturbation system
//!
//! `d_tau b  = -((v - xi/2) . grad) b`
//! `d_tau w~ = (L - alpha Lambda) w~ - v~ . grad w~ + div(b (grad w + grad^perp Pi))`
//!
//! with `v = alpha v^G + v~`, `w = alpha G + w~`, by a Lawson (integrating
//! factor) RK4 scheme in Fourier space. The factor `exp(-|k|^2 h)` integrates
//! the Laplacian exactly; every other term is explicit and dealiased.

use ndarray::{Array2, Zip};
use rustfft::num_complex::Complex64;

use crate::config::{Model, RunConfig};
use crate::diagnostics::DiagnosticsRecord;
use crate::error::{Error, Result};
use crate::fields::{make_initial_perturbation, oseen_velocity_profile, project_mean, PerturbationState};
use crate::operators::{biot_savart_coeffs, images_of, velocity_total};
use crate::pressure::perturbation_pressure_gradient;
use crate::spectral::{ScalarField, SpectralGrid, VectorField};

type Coeffs = Array2<Complex64>;

/// `||b||_inf` at which a run is stopped: beyond it the pressure contraction
/// and density positivity are no longer trustworthy.
pub const DENSITY_LIMIT: f64 = 0.9;

/// Coefficient and advecting velocity held fixed during a step (iterative scheme).
#[derive(Clone, Debug)]
pub struct Frozen {
    /// Density perturbation multiplying the diffusion and pressure terms.
    pub b: ScalarField,
    /// Perturbation velocity advecting both unknowns.
    pub nu: VectorField,
}

impl Frozen {
    /// The data of a previous iterate at one instant.
    pub fn from_state(state: &PerturbationState) -> Result<Self> {
        let g = state.grid();
        let nu = biot_savart_coeffs(g, state.w_tilde.coeffs()?);
        Ok(Frozen {
            b: state.b.clone(),
            nu,
        })
    }

    pub fn zero(grid: &SpectralGrid) -> Self {
        Frozen {
            b: ScalarField::zeros(grid),
            nu: VectorField::zeros(grid),
        }
    }

    /// `(1 - theta) a + theta c`.
    pub fn lerp(a: &Frozen, c: &Frozen, theta: f64) -> Frozen {
        let mix = |x: &ScalarField, y: &ScalarField| x.zip_map(y, |p, q| (1.0 - theta) * p + theta * q);
        Frozen {
            b: mix(&a.b, &c.b),
            nu: VectorField {
                x1: mix(&a.nu.x1, &c.nu.x1),
                x2: mix(&a.nu.x2, &c.nu.x2),
            },
        }
    }
}

/// Parameters of the integrator.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct StepOptions {
    pub alpha: f64,
    pub model: Model,
    pub hyperviscosity: f64,
    pub pressure_tol: f64,
    pub cfl: f64,
}

impl StepOptions {
    pub fn new(alpha: f64) -> Self {
        StepOptions {
            alpha,
            model: Model::Full,
            hyperviscosity: 0.0,
            pressure_tol: 1e-10,
            cfl: 0.5,
        }
    }

    pub fn from_config(cfg: &RunConfig) -> Self {
        StepOptions {
            alpha: cfg.alpha,
            model: cfg.model,
            hyperviscosity: cfg.hyperviscosity,
            pressure_tol: cfg.pressure_tol,
            cfl: cfg.cfl,
        }
    }
}

/// What a step reports besides the new state.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct StepInfo {
    /// Largest pressure iteration count over the four stages.
    pub pressure_iterations: usize,
    pub cfl_limit: f64,
}

/// IF-RK4 integrator bound to one grid and parameter set.
pub struct Integrator {
    grid: SpectralGrid,
    opts: StepOptions,
    vg: VectorField,
    gauss: Array2<f64>,
    gauss_coeffs: Coeffs,
    gauss_integral: f64,
}

struct Stage {
    nb: Coeffs,
    nw: Coeffs,
    its: usize,
}

impl Integrator {
    pub fn new(grid: &SpectralGrid, opts: StepOptions) -> Self {
        let gauss = grid
            .radius_squared()
            .mapv(|s| (-s / 4.0).exp() / (4.0 * std::f64::consts::PI));
        let gauss_coeffs = grid.fft(&gauss);
        let gauss_integral = grid.integrate(&gauss);
        Integrator {
            grid: grid.clone(),
            opts,
            vg: oseen_velocity_profile(grid),
            gauss,
            gauss_coeffs,
            gauss_integral,
        }
    }

    pub fn options(&self) -> &StepOptions {
        &self.opts
    }

    pub fn grid(&self) -> &SpectralGrid {
        &self.grid
    }

    /// `cfl dx / max(||alpha v^G + nu||_inf, L/2)`.
    pub fn cfl_limit_for(&self, nu: &VectorField) -> f64 {
        let a = self.opts.alpha;
        let mut vmax: f64 = 0.0;
        Zip::from(self.vg.x1.values())
            .and(self.vg.x2.values())
            .and(nu.x1.values())
            .and(nu.x2.values())
            .for_each(|&g1, &g2, &n1, &n2| {
                vmax = vmax.max((a * g1 + n1).hypot(a * g2 + n2));
            });
        let speed = vmax.max(0.5 * self.grid.half_length());
        self.opts.cfl * self.grid.dx() / speed
    }

    /// CFL limit for the state's own velocity.
    pub fn cfl_limit(&self, state: &PerturbationState) -> Result<f64> {
        let nu = biot_savart_coeffs(&self.grid, state.w_tilde.coeffs()?);
        Ok(self.cfl_limit_for(&nu))
    }

    /// Explicit part of the right-hand side, in coefficient space.
    fn explicit(&self, bc: &Coeffs, wc: &Coeffs, frozen: Option<&Frozen>) -> Result<Stage> {
        let g = &self.grid;
        let alpha = self.opts.alpha;
        let full = self.opts.model == Model::Full;
        // b and w~ are transformed separately: a paired transform leaks
        // round-off of one into the other, which matters when b is tiny
        let (b, w) = (g.ifft(bc), g.ifft(wc));
        let (gb1, gb2) = g.gradient(bc);
        let (gw1, gw2) = g.gradient(wc);
        let vt = biot_savart_coeffs(g, wc);
        let (i1, i2) = images_of(g, &w);
        let nu = frozen.map(|f| &f.nu).unwrap_or(&vt);
        let (n1, n2) = (nu.x1.values(), nu.x2.values());
        let (vg1, vg2) = (self.vg.x1.values(), self.vg.x2.values());
        let (vt1, vt2) = (vt.x1.values(), vt.x2.values());
        let (x1, x2) = (g.xi1(), g.xi2());

        let n = g.n();
        let mut rb = Array2::zeros((n, n));
        let mut rw = Array2::zeros((n, n));
        for i in 0..n {
            for j in 0..n {
                let p = [i, j];
                let (x, y) = (x1[p], x2[p]);
                let (u1, u2) = (vg1[p], vg2[p]);
                let (m1, m2) = (n1[p], n2[p]);
                rb[p] = -((alpha * u1 + m1 - 0.5 * x) * gb1[p] + (alpha * u2 + m2 - 0.5 * y) * gb2[p]);
                let (dw1, dw2) = (gw1[p], gw2[p]);
                // whole-plane velocity of w~ for Lambda
                let (k1, k2) = (vt1[p] - i1[p], vt2[p] - i2[p]);
                let lambda = u1 * dw1 + u2 * dw2 - 0.5 * self.gauss[p] * (k1 * x + k2 * y);
                let mut r = 0.5 * (x * dw1 + y * dw2) - alpha * lambda;
                if full {
                    r -= m1 * dw1 + m2 * dw2;
                }
                rw[p] = r;
            }
        }
        let (mut nb, mut nw) = (g.fft(&rb), g.fft(&rw));
        let mut its = 0;
        let beta = match frozen {
            Some(f) => f.b.clone(),
            None => ScalarField::from_array(g, b),
        };
        if full && beta.max_abs() > 0.0 {
            let w_field = ScalarField::with_coeffs(g, w, wc.clone());
            let (gp, k) =
                perturbation_pressure_gradient(&beta, alpha, &w_field, nu, self.opts.pressure_tol)?;
            its = k;
            let (p1, p2) = (gp.x1.values(), gp.x2.values());
            let bv = beta.values();
            let mut f1 = Array2::zeros((n, n));
            let mut f2 = Array2::zeros((n, n));
            for i in 0..n {
                for j in 0..n {
                    let p = [i, j];
                    let ag = -0.5 * alpha * self.gauss[p];
                    // grad w + grad^perp Pi, grad^perp Pi = (-d2 Pi, d1 Pi)
                    f1[p] = bv[p] * (ag * x1[p] + gw1[p] - p2[p]);
                    f2[p] = bv[p] * (ag * x2[p] + gw2[p] + p1[p]);
                }
            }
            let (mut c1, mut c2) = g.fft_pair(&f1, &f2);
            g.dealias_in_place(&mut c1);
            g.dealias_in_place(&mut c2);
            nw += &g.divergence_coeffs(&c1, &c2);
        }
        g.dealias_in_place(&mut nb);
        g.dealias_in_place(&mut nw);
        nw += wc;
        Ok(Stage { nb, nw, its })
    }

    /// Full right-hand sides `(d_tau b, d_tau w~)` and the pressure iteration count.
    pub fn rhs(&self, state: &PerturbationState, frozen: Option<&Frozen>) -> Result<(ScalarField, ScalarField, usize)> {
        let g = &self.grid;
        let bc = state.b.coeffs()?;
        let wc = state.w_tilde.coeffs()?;
        let st = self.explicit(bc, wc, frozen)?;
        let nu_h = self.opts.hyperviscosity;
        let nb = Array2::from_shape_fn(bc.dim(), |(i, j)| st.nb[[i, j]] - bc[[i, j]] * nu_h * g.k_squared(i, j).powi(4));
        let nw = Array2::from_shape_fn(wc.dim(), |(i, j)| st.nw[[i, j]] - wc[[i, j]] * g.k_squared(i, j));
        let (rb, rw) = (g.ifft(&nb), g.ifft(&nw));
        Ok((ScalarField::from_array(g, rb), ScalarField::from_array(g, rw), st.its))
    }

    fn factors(&self, h: f64) -> (Array2<f64>, Option<Array2<f64>>) {
        let g = &self.grid;
        let n = g.n();
        let ew = Array2::from_shape_fn((n, n), |(i, j)| (-g.k_squared(i, j) * h).exp());
        let nu_h = self.opts.hyperviscosity;
        let eb = if nu_h > 0.0 {
            Some(Array2::from_shape_fn((n, n), |(i, j)| (-nu_h * g.k_squared(i, j).powi(4) * h).exp()))
        } else {
            None
        };
        (ew, eb)
    }

    /// One IF-RK4 step of size `dt`. `frozen` supplies the frozen data at the
    /// start, midpoint and end of the step (iterative scheme only).
    pub fn step(
        &self,
        state: &PerturbationState,
        dt: f64,
        frozen: Option<[&Frozen; 3]>,
    ) -> Result<(PerturbationState, StepInfo)> {
        let g = &self.grid;
        let b0 = state.b.max_abs();
        if b0 >= DENSITY_LIMIT {
            return Err(Error::DensityTooLarge(b0));
        }
        let limit = match frozen {
            Some(f) => self.cfl_limit_for(&f[0].nu),
            None => self.cfl_limit(state)?,
        };
        if !(dt > 0.0) || dt > limit * (1.0 + 1e-9) {
            return Err(Error::Cfl { dt, limit });
        }
        let u_b = state.b.coeffs()?;
        let u_w = state.w_tilde.coeffs()?;
        let (e1, eb1) = self.factors(dt);
        let (e2, eb2) = self.factors(0.5 * dt);
        let h = dt;
        let fz = |k: usize| frozen.map(|f| f[k]);

        let apply = |e: &Option<Array2<f64>>, c: &Coeffs| -> Coeffs {
            match e {
                Some(e) => c * &e.mapv(|v| Complex64::new(v, 0.0)),
                None => c.clone(),
            }
        };
        let apply_w = |e: &Array2<f64>, c: &Coeffs| -> Coeffs {
            let mut out = c.clone();
            Zip::from(&mut out).and(e).for_each(|o, &f| *o *= f);
            out
        };
        let eb1 = eb1.map(Some).unwrap_or(None);
        let eb2 = eb2.map(Some).unwrap_or(None);
        let axpy = |a: &Coeffs, s: f64, b: &Coeffs| -> Coeffs {
            let mut out = a.clone();
            Zip::from(&mut out).and(b).for_each(|o, &v| *o += v * s);
            out
        };

        let k1 = self.explicit(u_b, u_w, fz(0))?;
        let a_b = apply(&eb2, &axpy(u_b, 0.5 * h, &k1.nb));
        let a_w = apply_w(&e2, &axpy(u_w, 0.5 * h, &k1.nw));
        let k2 = self.explicit(&a_b, &a_w, fz(1))?;
        let hb = apply(&eb2, u_b);
        let hw = apply_w(&e2, u_w);
        let c_b = axpy(&hb, 0.5 * h, &k2.nb);
        let c_w = axpy(&hw, 0.5 * h, &k2.nw);
        let k3 = self.explicit(&c_b, &c_w, fz(1))?;
        let fb = apply(&eb1, u_b);
        let fw = apply_w(&e1, u_w);
        let d_b = axpy(&fb, h, &apply(&eb2, &k3.nb));
        let d_w = axpy(&fw, h, &apply_w(&e2, &k3.nw));
        let k4 = self.explicit(&d_b, &d_w, fz(2))?;

        let mut nb = fb;
        let mut nw = fw;
        let s23b = &k2.nb + &k3.nb;
        let s23w = &k2.nw + &k3.nw;
        let t1b = apply(&eb1, &k1.nb);
        let t1w = apply_w(&e1, &k1.nw);
        let t2b = apply(&eb2, &s23b);
        let t2w = apply_w(&e2, &s23w);
        Zip::from(&mut nb).and(&t1b).and(&t2b).and(&k4.nb).for_each(|o, &a, &b, &c| {
            *o += (a + b * 2.0 + c) * (h / 6.0);
        });
        Zip::from(&mut nw).and(&t1w).and(&t2w).and(&k4.nw).for_each(|o, &a, &b, &c| {
            *o += (a + b * 2.0 + c) * (h / 6.0);
        });

        let tau = state.tau + dt;
        let (bv, mut wv) = (g.ifft(&nb), g.ifft(&nw));
        if !(bv.iter().all(|v| v.is_finite()) && wv.iter().all(|v| v.is_finite())) {
            return Err(Error::Blowup(tau));
        }
        // keep int w~ = 0 inside the weighted class
        let c = g.integrate(&wv) / self.gauss_integral;
        Zip::from(&mut wv).and(&self.gauss).for_each(|o, &gg| *o -= c * gg);
        Zip::from(&mut nw).and(&self.gauss_coeffs).for_each(|o, &gg| *o -= gg * c);
        let b = ScalarField::with_coeffs(g, bv, nb);
        let w = ScalarField::with_coeffs(g, wv, nw);
        let b_inf = b.max_abs();
        if b_inf >= DENSITY_LIMIT {
            return Err(Error::DensityTooLarge(b_inf));
        }
        let its = k1.its.max(k2.its).max(k3.its).max(k4.its);
        Ok((
            PerturbationState { b, w_tilde: w, tau },
            StepInfo {
                pressure_iterations: its,
                cfl_limit: limit,
            },
        ))
    }
}

/// `-((v - xi/2) . grad) b`, dealiased.
pub fn rhs_density(b: &ScalarField, v_total: &VectorField) -> Result<ScalarField> {
    rhs_density_hyper(b, v_total, 0.0)
}

/// [`rhs_density`] plus the hyperviscous term `-nu_h (-Delta)^4 b`.
pub fn rhs_density_hyper(b: &ScalarField, v_total: &VectorField, nu_h: f64) -> Result<ScalarField> {
    let g = b.grid();
    let c = b.coeffs()?;
    let (d1, d2) = g.gradient(c);
    let mut r = Array2::zeros(c.dim());
    Zip::from(&mut r)
        .and(&d1)
        .and(&d2)
        .and(v_total.x1.values())
        .and(v_total.x2.values())
        .and(g.xi1())
        .for_each(|o, &a, &bb, &v1, &v2, &x| *o = -((v1 - 0.5 * x) * a + v2 * bb));
    Zip::from(&mut r).and(&d2).and(g.xi2()).for_each(|o, &bb, &y| *o += 0.5 * y * bb);
    let mut rc = g.fft(&r);
    g.dealias_in_place(&mut rc);
    if nu_h > 0.0 {
        Zip::indexed(&mut rc).for_each(|(i, j), o| *o -= c[[i, j]] * nu_h * g.k_squared(i, j).powi(4));
    }
    Ok(ScalarField::from_coeffs(g, &rc))
}

/// `d_tau w~` of the full system with the default pressure tolerance.
pub fn rhs_vorticity(state: &PerturbationState, alpha: f64) -> Result<ScalarField> {
    let it = Integrator::new(state.grid(), StepOptions::new(alpha));
    Ok(it.rhs(state, None)?.1)
}

/// One step with default options.
pub fn step(state: &PerturbationState, alpha: f64, dt: f64) -> Result<PerturbationState> {
    let it = Integrator::new(state.grid(), StepOptions::new(alpha));
    Ok(it.step(state, dt, None)?.0)
}

/// Initial state of a run: the constructed perturbation, band-limited and
/// mean-projected.
pub fn initial_state(grid: &SpectralGrid, cfg: &RunConfig) -> Result<PerturbationState> {
    let st = make_initial_perturbation(grid, cfg)?;
    Ok(PerturbationState {
        b: st.b.dealiased(),
        w_tilde: project_mean(&st.w_tilde.dealiased()),
        tau: st.tau,
    })
}

/// Result of a run: the final state and one record per output time.
#[derive(Debug, Clone)]
pub struct Trajectory {
    pub final_state: PerturbationState,
    pub records: Vec<DiagnosticsRecord>,
    pub steps: usize,
}

/// A run stopped by an error, with everything computed before it.
#[derive(Debug)]
pub struct Aborted {
    pub error: Error,
    /// `final_state` is the last good state.
    pub partial: Trajectory,
}

impl From<Aborted> for Error {
    fn from(a: Aborted) -> Error {
        a.error
    }
}

/// Step size for an interval of length `span`: the largest `span / m` not above `limit`.
pub fn subdivide(span: f64, limit: f64) -> (usize, f64) {
    let m = ((span / limit) - 1e-9).ceil().max(1.0) as usize;
    (m, span / m as f64)
}

/// March `state` to `cfg.t_end`, emitting a record every `cfg.output_interval`.
pub fn simulate(cfg: &RunConfig, state: PerturbationState) -> Result<Trajectory, Aborted> {
    simulate_with(cfg, state, |_, _| Ok(()))
}

/// [`simulate`] with a callback invoked on every emitted record (checkpointing, CSV).
pub fn simulate_with(
    cfg: &RunConfig,
    state: PerturbationState,
    mut observer: impl FnMut(&PerturbationState, &DiagnosticsRecord) -> Result<()>,
) -> Result<Trajectory, Aborted> {
    let grid = state.grid().clone();
    let integ = Integrator::new(&grid, StepOptions::from_config(cfg));
    let mut traj = Trajectory {
        final_state: state,
        records: Vec::new(),
        steps: 0,
    };
    macro_rules! attempt {
        ($e:expr) => {
            match $e {
                Ok(v) => v,
                Err(error) => return Err(Aborted { error, partial: traj }),
            }
        };
    }
    if let Err(error) = cfg.validate() {
        return Err(Aborted { error, partial: traj });
    }
    let tau0 = traj.final_state.tau;
    let limit = attempt!(integ.cfl_limit(&traj.final_state));
    let dt_cap = match cfg.dt {
        Some(dt) if dt > limit * (1.0 + 1e-9) => {
            return Err(Aborted {
                error: Error::Cfl { dt, limit },
                partial: traj,
            })
        }
        Some(dt) => dt,
        None => limit,
    };
    let first = attempt!(DiagnosticsRecord::measure(&traj.final_state, cfg.sobolev_s, 0, limit / dt_cap.min(limit)));
    attempt!(observer(&traj.final_state, &first));
    traj.records.push(first);

    let span = cfg.t_end - tau0;
    let intervals = if span <= 1e-12 {
        0
    } else {
        ((span / cfg.output_interval) - 1e-9).ceil() as usize
    };
    for k in 1..=intervals {
        let target = (tau0 + k as f64 * cfg.output_interval).min(cfg.t_end);
        let start = traj.final_state.tau;
        let limit = attempt!(integ.cfl_limit(&traj.final_state));
        let cap = match cfg.dt {
            Some(dt) => dt,
            None => limit,
        };
        let (m, h) = subdivide(target - start, cap);
        let mut its = 0;
        let mut margin = f64::INFINITY;
        for s in 0..m {
            let (mut next, info) = attempt!(integ.step(&traj.final_state, h, None));
            if s + 1 == m {
                next.tau = target;
            }
            its = its.max(info.pressure_iterations);
            margin = margin.min(info.cfl_limit / h);
            traj.final_state = next;
            traj.steps += 1;
        }
        let rec = attempt!(DiagnosticsRecord::measure(&traj.final_state, cfg.sobolev_s, its, margin));
        attempt!(observer(&traj.final_state, &rec));
        traj.records.push(rec);
    }
    Ok(traj)
}

/// Original-variable fields at physical time `t = e^tau`, sampled on `x = sqrt(t) xi`.
#[derive(Debug, Clone)]
pub struct PhysicalFields {
    pub t: f64,
    /// Sample positions along each axis.
    pub coords: Vec<f64>,
    pub rho: Array2<f64>,
    pub omega: Array2<f64>,
    pub u1: Array2<f64>,
    pub u2: Array2<f64>,
    /// Area element of the physical grid.
    pub cell_area: f64,
}

impl PhysicalFields {
    /// Quadrature `L^p` norm of an array on the physical grid.
    pub fn lp_norm(&self, values: &Array2<f64>, p: f64) -> f64 {
        if p.is_infinite() {
            return values.iter().fold(0.0_f64, |m, v| m.max(v.abs()));
        }
        (values.iter().map(|v| v.abs().powf(p)).sum::<f64>() * self.cell_area).powf(1.0 / p)
    }
}

/// `rho = 1/(1+b)`, `omega(t, x) = w(tau, x/sqrt t)/t`, `u = v/sqrt t`.
pub fn self_similar_to_physical(state: &PerturbationState, alpha: f64) -> Result<PhysicalFields> {
    let g = state.grid();
    let t = state.tau.exp();
    let st = t.sqrt();
    let w = ScalarField::from_fn(g, crate::fields::gaussian).scale(alpha).add(&state.w_tilde);
    let v = velocity_total(alpha, &state.w_tilde)?;
    Ok(PhysicalFields {
        t,
        coords: g.coords().iter().map(|x| x * st).collect(),
        rho: state.b.values().mapv(|b| 1.0 / (1.0 + b)),
        omega: w.values() / t,
        u1: v.x1.values() / st,
        u2: v.x2.values() / st,
        cell_area: g.cell_area() * t,
    })
}

#[cfg(test)]
mod tests;
