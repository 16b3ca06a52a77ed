//! Randomized estimate-ratio corpus.
//!
//! Each functional inequality `A(f) <= C B(f)` is turned into the ratio
//! `A/B` evaluated over a seeded corpus of Gaussian-enveloped fields at two
//! resolutions. Constants are never asserted; a ratio passes when it is finite
//! everywhere and its maximum moves by less than [`STABILITY_TOLERANCE`] under
//! refinement. Exact discrete identities must equal 1 to [`EXACT_TOLERANCE`].

use std::collections::BTreeMap;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::fields::{homogeneous_sobolev_norm, lp_norm, lp_norm_vector, project_mean, random_enveloped_field, sobolev_norm};
use crate::operators::{biot_savart, commutator_is, fractional_laplacian};
use crate::pressure::solve_pressure;
use crate::spectral::{gradient, make_grid, ScalarField, SpectralGrid, VectorField};

pub const STABILITY_TOLERANCE: f64 = 0.2;
pub const EXACT_TOLERANCE: f64 = 1e-12;
const PRESSURE_TOL: f64 = 1e-12;
/// `||b||_inf` of the coefficient fields in the pressure estimates.
const COEFFICIENT_SIZE: f64 = 0.3;

/// Which family of estimates to evaluate.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Suite {
    /// Biot-Savart and commutator estimates.
    Operators,
    /// Elliptic estimates for the pressure.
    Pressure,
    All,
}

impl Suite {
    fn includes(self, family: Family) -> bool {
        match self {
            Suite::All => true,
            Suite::Operators => family == Family::Operators,
            Suite::Pressure => family == Family::Pressure,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum Family {
    Operators,
    Pressure,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct CorpusConfig {
    pub seed: u64,
    pub count: usize,
    /// Highest trigonometric frequency, in units of 1/2.
    pub band: i32,
    /// Coarse and fine grid sizes.
    pub resolutions: [usize; 2],
    pub half_length: f64,
    /// Multiplies every corpus field; 0 gives the degenerate all-zero corpus.
    pub amplitude: f64,
    pub suite: Suite,
}

impl Default for CorpusConfig {
    fn default() -> Self {
        CorpusConfig {
            seed: 0,
            count: 100,
            band: 3,
            resolutions: [128, 256],
            half_length: 16.0,
            amplitude: 1.0,
            suite: Suite::All,
        }
    }
}

/// Statistics of one ratio at one resolution.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RatioStats {
    pub n: usize,
    pub evaluated: usize,
    /// Samples whose denominator vanished.
    pub skipped: usize,
    pub max: f64,
    pub median: f64,
    /// Largest `|ratio - 1|` (meaningful for exact identities).
    pub max_deviation_from_one: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EstimateReport {
    pub name: String,
    pub description: String,
    /// True when the ratio is a discrete identity equal to 1.
    pub exact: bool,
    pub per_resolution: Vec<RatioStats>,
    /// Relative change of the maximum between the two resolutions.
    pub refinement_change: f64,
    pub failures: Vec<String>,
    pub pass: bool,
}

/// Machine-readable summary: pass/fail per estimate.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EstimateSummary {
    pub seed: u64,
    pub count: usize,
    pub resolutions: [usize; 2],
    pub estimates: BTreeMap<String, bool>,
    pub reports: Vec<EstimateReport>,
    pub pass: bool,
}

struct Sample {
    f: ScalarField,
    g: ScalarField,
    /// Coefficient fields with `||b||_inf = 0.3`.
    b1: ScalarField,
    b2: ScalarField,
    force: VectorField,
}

fn sample(grid: &SpectralGrid, seed: u64, index: usize, band: i32, amplitude: f64) -> Sample {
    let mut rng = ChaCha8Rng::seed_from_u64(seed.wrapping_mul(0x9e37_79b9_7f4a_7c15).wrapping_add(index as u64));
    let mut draw = || random_enveloped_field(grid, &mut rng, band);
    let f = project_mean(&draw()).scale(amplitude);
    let g = project_mean(&draw()).scale(amplitude);
    let unit = |h: ScalarField| {
        let m = h.max_abs();
        if m == 0.0 {
            h
        } else {
            h.scale(COEFFICIENT_SIZE / m)
        }
    };
    let b1 = unit(draw().scale(amplitude));
    let b2 = unit(draw().scale(amplitude));
    let force = VectorField {
        x1: draw().scale(amplitude),
        x2: draw().scale(amplitude),
    };
    Sample { f, g, b1, b2, force }
}

type RatioFn = fn(&Sample) -> Result<(f64, f64)>;

struct Estimate {
    name: &'static str,
    description: &'static str,
    family: Family,
    exact: bool,
    ratio: RatioFn,
}

fn hs_vector(v: &VectorField, s: f64) -> Result<f64> {
    Ok(sobolev_norm(&v.x1, s)?.hypot(sobolev_norm(&v.x2, s)?))
}

fn is_vector(v: &VectorField, s: f64) -> Result<VectorField> {
    Ok(VectorField {
        x1: fractional_laplacian(&v.x1, s)?,
        x2: fractional_laplacian(&v.x2, s)?,
    })
}

fn l2_vector(v: &VectorField) -> Result<f64> {
    lp_norm_vector(v, 2.0)
}

fn grad_v_norm(w: &ScalarField, p: f64) -> Result<f64> {
    let v = biot_savart(w)?;
    let a = gradient(&v.x1)?;
    let b = gradient(&v.x2)?;
    // Frobenius norm of the Jacobian
    let m = a.magnitude().zip_map(&b.magnitude(), f64::hypot);
    lp_norm(&m, p)
}

const S: f64 = 0.5;
const SIGMA: f64 = 1.5;

fn estimates() -> Vec<Estimate> {
    vec![
        Estimate {
            name: "bs_l4_from_l43",
            description: "||v||_4 / ||w||_{4/3}",
            family: Family::Operators,
            exact: false,
            ratio: |s| Ok((lp_norm_vector(&biot_savart(&s.f)?, 4.0)?, lp_norm(&s.f, 4.0 / 3.0)?)),
        },
        Estimate {
            name: "bs_linf_interpolation",
            description: "||v||_inf / (||w||_1^{1/3} ||w||_4^{2/3})",
            family: Family::Operators,
            exact: false,
            ratio: |s| {
                let den = lp_norm(&s.f, 1.0)?.powf(1.0 / 3.0) * lp_norm(&s.f, 4.0)?.powf(2.0 / 3.0);
                Ok((lp_norm_vector(&biot_savart(&s.f)?, f64::INFINITY)?, den))
            },
        },
        Estimate {
            name: "bs_gradient_l2",
            description: "||grad v||_2 / ||w||_2",
            family: Family::Operators,
            exact: true,
            ratio: |s| Ok((grad_v_norm(&s.f, 2.0)?, lp_norm(&s.f, 2.0)?)),
        },
        Estimate {
            name: "bs_gradient_l4",
            description: "||grad v||_4 / ||w||_4",
            family: Family::Operators,
            exact: false,
            ratio: |s| Ok((grad_v_norm(&s.f, 4.0)?, lp_norm(&s.f, 4.0)?)),
        },
        Estimate {
            name: "bs_sobolev_isometry",
            description: "||v||_{H^s} / ||w||_{H^{s-1}} (homogeneous), s = 1/2",
            family: Family::Operators,
            exact: true,
            ratio: |s| {
                let v = biot_savart(&s.f)?;
                let num = homogeneous_sobolev_norm(&v.x1, S)?.hypot(homogeneous_sobolev_norm(&v.x2, S)?);
                Ok((num, homogeneous_sobolev_norm(&s.f, S - 1.0)?))
            },
        },
        Estimate {
            name: "commutator_left",
            description: "||[I^s, f] g||_2 / (||I^s f||_2 ||g||_{H^sigma}), s = 1/2, sigma = 3/2",
            family: Family::Operators,
            exact: false,
            ratio: |s| {
                let c = commutator_is(&s.f, &s.g, S)?;
                let den = lp_norm(&fractional_laplacian(&s.f, S)?, 2.0)? * sobolev_norm(&s.g, SIGMA)?;
                Ok((lp_norm(&c, 2.0)?, den))
            },
        },
        Estimate {
            name: "commutator_right",
            description: "||[I^s, f] g||_2 / (||I^s f||_{H^sigma} ||g||_2), s = 1/2, sigma = 3/2",
            family: Family::Operators,
            exact: false,
            ratio: |s| {
                let c = commutator_is(&s.f, &s.g, S)?;
                let den = sobolev_norm(&fractional_laplacian(&s.f, S)?, SIGMA)? * lp_norm(&s.g, 2.0)?;
                Ok((lp_norm(&c, 2.0)?, den))
            },
        },
        Estimate {
            name: "commutator_high_order",
            description: "||[I^s, f] g||_2 / (||I^s f||_2 ||g||_{H^sigma} + ||grad f||_{H^sigma} ||I^{s-1} g||_2), s = sigma = 3/2",
            family: Family::Operators,
            exact: false,
            ratio: |s| {
                let s2 = 1.5;
                let c = commutator_is(&s.f, &s.g, s2)?;
                let a = lp_norm(&fractional_laplacian(&s.f, s2)?, 2.0)? * sobolev_norm(&s.g, SIGMA)?;
                let b = hs_vector(&gradient(&s.f)?, SIGMA)? * lp_norm(&fractional_laplacian(&s.g, s2 - 1.0)?, 2.0)?;
                Ok((lp_norm(&c, 2.0)?, a + b))
            },
        },
        Estimate {
            name: "pressure_l2_bound",
            description: "(1 - ||b||_inf) ||grad Pi||_2 / ||F||_2",
            family: Family::Pressure,
            exact: false,
            ratio: |s| {
                let (gp, _) = solve_pressure(&s.b1, &s.force, PRESSURE_TOL)?;
                Ok(((1.0 - s.b1.max_abs()) * l2_vector(&gp)?, l2_vector(&s.force)?))
            },
        },
        Estimate {
            name: "pressure_coefficient_difference",
            description: "(1 - ||b||_inf)^2 ||grad(Pi_2 - Pi_1)||_2 / (||b_2 - b_1||_4 ||F||_4)",
            family: Family::Pressure,
            exact: false,
            ratio: |s| {
                let (p1, _) = solve_pressure(&s.b1, &s.force, PRESSURE_TOL)?;
                let (p2, _) = solve_pressure(&s.b2, &s.force, PRESSURE_TOL)?;
                let k = 1.0 - s.b1.max_abs().max(s.b2.max_abs());
                let den = lp_norm(&s.b2.sub(&s.b1), 4.0)? * lp_norm_vector(&s.force, 4.0)?;
                Ok((k * k * l2_vector(&p2.sub(&p1))?, den))
            },
        },
        Estimate {
            name: "pressure_fractional_bound",
            description: "||I^s grad Pi||_2 / (||I^s F||_2 + ||I^s b||_{H^sigma} ||F||_2), s = 1/2, sigma = 3/2",
            family: Family::Pressure,
            exact: false,
            ratio: |s| {
                let (gp, _) = solve_pressure(&s.b1, &s.force, PRESSURE_TOL)?;
                let k = 1.0 - s.b1.max_abs();
                let num = k * l2_vector(&is_vector(&gp, S)?)?;
                let den = l2_vector(&is_vector(&s.force, S)?)?
                    + sobolev_norm(&fractional_laplacian(&s.b1, S)?, SIGMA)? * l2_vector(&s.force)? / k;
                Ok((num, den))
            },
        },
    ]
}

fn median(v: &mut [f64]) -> f64 {
    if v.is_empty() {
        return 0.0;
    }
    v.sort_by(f64::total_cmp);
    let m = v.len() / 2;
    if v.len() % 2 == 1 {
        v[m]
    } else {
        0.5 * (v[m - 1] + v[m])
    }
}

/// Evaluate every estimate of `cfg.suite` over the corpus at both resolutions.
pub fn estimate_ratio_suite(cfg: &CorpusConfig) -> Result<EstimateSummary> {
    if cfg.count == 0 {
        return Err(Error::config("count", "corpus must be non-empty"));
    }
    let grids = [
        make_grid(cfg.resolutions[0], cfg.half_length)?,
        make_grid(cfg.resolutions[1], cfg.half_length)?,
    ];
    let list: Vec<Estimate> = estimates().into_iter().filter(|e| cfg.suite.includes(e.family)).collect();
    // ratios[e][r] over samples
    let mut ratios = vec![[Vec::new(), Vec::new()]; list.len()];
    let mut skipped = vec![[0usize; 2]; list.len()];
    let mut failures = vec![Vec::new(); list.len()];
    for (r, grid) in grids.iter().enumerate() {
        for idx in 0..cfg.count {
            let smp = sample(grid, cfg.seed, idx, cfg.band, cfg.amplitude);
            for (e, est) in list.iter().enumerate() {
                match (est.ratio)(&smp) {
                    Ok((_, den)) if den == 0.0 => skipped[e][r] += 1,
                    Ok((num, den)) => {
                        let q = num / den;
                        if q.is_finite() {
                            ratios[e][r].push(q);
                        } else {
                            failures[e].push(format!("n = {}, sample {idx}: ratio {q}", grid.n()));
                        }
                    }
                    Err(err) => failures[e].push(format!("n = {}, sample {idx}: {err}", grid.n())),
                }
            }
        }
    }
    let mut reports = Vec::new();
    for (e, est) in list.iter().enumerate() {
        let mut per = Vec::new();
        for r in 0..2 {
            let vals = &mut ratios[e][r];
            let max = vals.iter().copied().fold(0.0, f64::max);
            let dev = vals.iter().map(|q| (q - 1.0).abs()).fold(0.0, f64::max);
            per.push(RatioStats {
                n: grids[r].n(),
                evaluated: vals.len(),
                skipped: skipped[e][r],
                max,
                median: median(vals),
                max_deviation_from_one: dev,
            });
        }
        let (m0, m1) = (per[0].max, per[1].max);
        let change = if m0 == 0.0 && m1 == 0.0 { 0.0 } else { (m1 - m0).abs() / m0.max(m1) };
        let exact_ok = !est.exact || per.iter().all(|p| p.max_deviation_from_one <= EXACT_TOLERANCE || p.evaluated == 0);
        let pass = failures[e].is_empty() && change < STABILITY_TOLERANCE && exact_ok;
        reports.push(EstimateReport {
            name: est.name.to_string(),
            description: est.description.to_string(),
            exact: est.exact,
            per_resolution: per,
            refinement_change: change,
            failures: std::mem::take(&mut failures[e]),
            pass,
        });
    }
    let estimates = reports.iter().map(|r| (r.name.clone(), r.pass)).collect();
    let pass = reports.iter().all(|r| r.pass);
    Ok(EstimateSummary {
        seed: cfg.seed,
        count: cfg.count,
        resolutions: cfg.resolutions,
        estimates,
        reports,
        pass,
    })
}
