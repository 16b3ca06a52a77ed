//! Variable-coefficient pressure equation `div((1+b) grad Pi) = div F`, solved
//! by the Neumann-series fixed point `grad Pi <- Q(F - b grad Pi)`.

use ndarray::{Array2, Zip};
use rustfft::num_complex::Complex64;

use crate::error::{Error, Result};
use crate::fields::{oseen_kinetic_gradient, oseen_velocity_gradient, oseen_velocity_profile};
use crate::spectral::{ScalarField, SpectralGrid, VectorField};

const ZERO: Complex64 = Complex64 { re: 0.0, im: 0.0 };
const I: Complex64 = Complex64 { re: 0.0, im: 1.0 };

/// Apply `Q = d d^T / |d|^2` in place, `d` the discrete gradient symbol.
fn project_gradient(grid: &SpectralGrid, c1: &mut Array2<Complex64>, c2: &mut Array2<Complex64>) {
    let s = grid.odd_symbol();
    Zip::indexed(c1).and(c2).for_each(|(i, j), a, b| {
        let d2 = s[i] * s[i] + s[j] * s[j];
        if d2 == 0.0 {
            *a = ZERO;
            *b = ZERO;
        } else {
            let dot = (*a * s[i] + *b * s[j]) / d2;
            *a = dot * s[i];
            *b = dot * s[j];
        }
    });
}

/// Gradient part of the Helmholtz decomposition: `Q F = k (k . F_k) / |k|^2`, zero at `k = 0`.
pub fn leray_q(f: &VectorField) -> VectorField {
    let g = f.grid();
    let (mut c1, mut c2) = g.fft_pair(f.x1.values(), f.x2.values());
    project_gradient(g, &mut c1, &mut c2);
    let (a, b) = g.ifft_pair(&c1, &c2);
    VectorField::from_arrays(g, a, b)
}

/// Divergence-free part `P F = F - Q F`.
pub fn leray_p(f: &VectorField) -> VectorField {
    f.sub(&leray_q(f))
}

fn dealias_vector(f: VectorField) -> VectorField {
    let g = f.grid().clone();
    let (mut c1, mut c2) = g.fft_pair(f.x1.values(), f.x2.values());
    g.dealias_in_place(&mut c1);
    g.dealias_in_place(&mut c2);
    let (a, b) = g.ifft_pair(&c1, &c2);
    VectorField::from_arrays(&g, a, b)
}

/// Spectral Jacobian of the periodic velocity of `w`: `[i][j] = d_j v_i`.
pub(crate) fn velocity_jacobian(w: &ScalarField) -> Result<[[Array2<f64>; 2]; 2]> {
    let g = w.grid();
    let c = w.coeffs()?;
    let s = g.odd_symbol();
    let mut d = [
        Array2::from_elem(c.dim(), ZERO),
        Array2::from_elem(c.dim(), ZERO),
        Array2::from_elem(c.dim(), ZERO),
        Array2::from_elem(c.dim(), ZERO),
    ];
    for ((i, j), z) in c.indexed_iter() {
        let d2 = s[i] * s[i] + s[j] * s[j];
        if d2 == 0.0 {
            continue;
        }
        let v1 = I * s[j] * *z / d2;
        let v2 = -I * s[i] * *z / d2;
        d[0][[i, j]] = I * s[i] * v1;
        d[1][[i, j]] = I * s[j] * v1;
        d[2][[i, j]] = I * s[i] * v2;
        d[3][[i, j]] = I * s[j] * v2;
    }
    let (a, b) = g.ifft_pair(&d[0], &d[1]);
    let (e, f) = g.ifft_pair(&d[2], &d[3]);
    Ok([[a, b], [e, f]])
}

/// `grad^perp w` for `w = alpha G + w~`, with the `G` part in closed form.
fn perp_gradient_total(alpha: f64, w_tilde: &ScalarField) -> Result<(Array2<f64>, Array2<f64>)> {
    let g = w_tilde.grid();
    let (mut d1, mut d2) = g.gradient(w_tilde.coeffs()?);
    if alpha != 0.0 {
        Zip::from(&mut d1)
            .and(&mut d2)
            .and(g.xi1())
            .and(g.xi2())
            .for_each(|a, b, &x, &y| {
                let gg = alpha * (-(x * x + y * y) / 4.0).exp() / (4.0 * std::f64::consts::PI);
                *a -= 0.5 * x * gg;
                *b -= 0.5 * y * gg;
            });
    }
    // (d1, d2) -> (-d2, d1)
    Ok((d2.mapv(|v| -v), d1))
}

/// `F = (1+b) Delta v - (v . grad) v` for `v = v_total`, where `v_total` is
/// `alpha v^G` plus the periodic velocity of `w~`.
///
/// `Delta v = grad^perp(alpha G + w~)` and `grad v^G` are taken in closed form
/// (the Oseen velocity is not periodic, so it is never differentiated
/// spectrally); the products are dealiased.
pub fn pressure_rhs(b: &ScalarField, v_total: &VectorField, alpha: f64, w_tilde: &ScalarField) -> Result<VectorField> {
    let g = b.grid();
    if v_total.grid() != g || w_tilde.grid() != g {
        return Err(Error::GridMismatch("pressure_rhs inputs on different grids".into()));
    }
    let (l1, l2) = perp_gradient_total(alpha, w_tilde)?;
    let jt = velocity_jacobian(w_tilde)?;
    let jg = oseen_velocity_gradient(g);
    let v1 = v_total.x1.values();
    let v2 = v_total.x2.values();
    let bb = b.values();
    let mut f1 = Array2::zeros(bb.dim());
    let mut f2 = Array2::zeros(bb.dim());
    for idx in 0..bb.len() {
        let (i, j) = (idx / g.n(), idx % g.n());
        let p = [i, j];
        let grad = |r: usize, c: usize| alpha * jg[r][c].values()[p] + jt[r][c][p];
        let (a, c) = (v1[p], v2[p]);
        let adv1 = a * grad(0, 0) + c * grad(0, 1);
        let adv2 = a * grad(1, 0) + c * grad(1, 1);
        f1[p] = (1.0 + bb[p]) * l1[p] - adv1;
        f2[p] = (1.0 + bb[p]) * l2[p] - adv2;
    }
    Ok(dealias_vector(VectorField::from_arrays(g, f1, f2)))
}

/// Iteration budget `10 ceil(log tol / log ||b||_inf)` (10 when `b = 0`).
pub fn iteration_cap(b_inf: f64, tol: f64) -> usize {
    if b_inf <= 0.0 {
        return 10;
    }
    10 * ((tol.ln() / b_inf.ln() - 1e-9).ceil().max(1.0) as usize)
}

/// `grad Pi` with `div((1+b) grad Pi) = div F`, and the number of fixed-point sweeps.
///
/// Starts from `QF`; each sweep applies `g <- Q(F - b g)` and the loop stops
/// when the relative `L^2` change drops below `tol`. With `b = 0` one sweep
/// confirms `QF`.
pub fn solve_pressure(b: &ScalarField, f: &VectorField, tol: f64) -> Result<(VectorField, usize)> {
    solve_pressure_opts(b, f, tol, false)
}

pub(crate) fn solve_pressure_opts(b: &ScalarField, f: &VectorField, tol: f64, dealias: bool) -> Result<(VectorField, usize)> {
    let g = b.grid();
    if f.grid() != g {
        return Err(Error::GridMismatch("pressure coefficient and forcing on different grids".into()));
    }
    let b_inf = b.max_abs();
    if !b_inf.is_finite() {
        return Err(Error::NonFinite(0, 0));
    }
    if b_inf >= 1.0 {
        return Err(Error::ContractionViolated(b_inf));
    }
    let (mut fc1, mut fc2) = g.fft_pair(f.x1.values(), f.x2.values());
    if dealias {
        g.dealias_in_place(&mut fc1);
        g.dealias_in_place(&mut fc2);
    }
    let (mut c1, mut c2) = (fc1.clone(), fc2.clone());
    project_gradient(g, &mut c1, &mut c2);
    let cap = iteration_cap(b_inf, tol);
    let fx1 = f.x1.values();
    let fx2 = f.x2.values();
    let bv = b.values();
    let mut last = f64::INFINITY;
    for it in 1..=cap {
        let (g1, g2) = g.ifft_pair(&c1, &c2);
        let r1 = fx1 - &(bv * &g1);
        let r2 = fx2 - &(bv * &g2);
        let (mut n1, mut n2) = g.fft_pair(&r1, &r2);
        if dealias {
            g.dealias_in_place(&mut n1);
            g.dealias_in_place(&mut n2);
        }
        project_gradient(g, &mut n1, &mut n2);
        let mut diff = 0.0;
        let mut norm = 0.0;
        Zip::from(&n1).and(&n2).and(&c1).and(&c2).for_each(|a, b, c, d| {
            diff += (a - c).norm_sqr() + (b - d).norm_sqr();
            norm += a.norm_sqr() + b.norm_sqr();
        });
        c1 = n1;
        c2 = n2;
        last = if norm == 0.0 { 0.0 } else { (diff / norm).sqrt() };
        if !last.is_finite() {
            return Err(Error::PressureNotConverged { iterations: it, update: last });
        }
        if last < tol {
            let (a, b) = g.ifft_pair(&c1, &c2);
            return Ok((VectorField::from_arrays(g, a, b), it));
        }
    }
    Err(Error::PressureNotConverged { iterations: cap, update: last })
}

/// `Pi` (mean zero) from a discrete gradient field.
pub fn pressure_from_gradient(grad: &VectorField) -> ScalarField {
    let g = grad.grid();
    let (c1, c2) = g.fft_pair(grad.x1.values(), grad.x2.values());
    let s = g.odd_symbol();
    let c = Array2::from_shape_fn(c1.dim(), |(i, j)| {
        let d2 = s[i] * s[i] + s[j] * s[j];
        if d2 == 0.0 {
            ZERO
        } else {
            -I * (c1[[i, j]] * s[i] + c2[[i, j]] * s[j]) / d2
        }
    });
    ScalarField::from_coeffs(g, &c)
}

/// Pressure gradient of the perturbation system, arranged so that every field
/// passed through the periodic solver decays at the box boundary.
///
/// With `q_G = |v^G|^2/2`, the identity `(v^G . grad) v^G = grad q_G + G (v^G)^perp`
/// lets the slowly decaying `alpha^2 grad q_G` be split off exactly:
/// `grad Pi = S(F') - alpha^2 grad q_G`, where `S` is the fixed-point solve and
/// `F' = (1+b) grad^perp w + alpha^2 b grad q_G - [alpha^2 G (v^G)^perp
/// + alpha (v^G . grad) v~ + alpha (nu . grad) v^G + (nu . grad) v~]`.
///
/// `v~` is the periodic velocity of `w~`; `nu` is the advecting perturbation
/// velocity (`v~` itself, or a frozen one in the iterative scheme).
pub(crate) fn perturbation_pressure_gradient(
    b: &ScalarField,
    alpha: f64,
    w_tilde: &ScalarField,
    nu: &VectorField,
    tol: f64,
) -> Result<(VectorField, usize)> {
    let g = b.grid();
    let (l1, l2) = perp_gradient_total(alpha, w_tilde)?;
    let jt = velocity_jacobian(w_tilde)?;
    let jg = oseen_velocity_gradient(g);
    let vg = oseen_velocity_profile(g);
    let qg = oseen_kinetic_gradient(g);
    let a2 = alpha * alpha;
    let n = g.n();
    let bb = b.values();
    let (vg1, vg2) = (vg.x1.values(), vg.x2.values());
    let (nu1, nu2) = (nu.x1.values(), nu.x2.values());
    let (q1, q2) = (qg.x1.values(), qg.x2.values());
    let mut f1 = Array2::zeros((n, n));
    let mut f2 = Array2::zeros((n, n));
    for i in 0..n {
        for j in 0..n {
            let p = [i, j];
            let (x, y) = (g.coords()[i], g.coords()[j]);
            let gauss = (-(x * x + y * y) / 4.0).exp() / (4.0 * std::f64::consts::PI);
            let (u1, u2) = (vg1[p], vg2[p]);
            let (m1, m2) = (nu1[p], nu2[p]);
            // alpha^2 G (v^G)^perp, (v^G)^perp = (-u2, u1)
            let mut s1 = -a2 * gauss * u2;
            let mut s2 = a2 * gauss * u1;
            // alpha (v^G . grad) v~ + (nu . grad) v~
            s1 += (alpha * u1 + m1) * jt[0][0][p] + (alpha * u2 + m2) * jt[0][1][p];
            s2 += (alpha * u1 + m1) * jt[1][0][p] + (alpha * u2 + m2) * jt[1][1][p];
            // alpha (nu . grad) v^G
            s1 += alpha * (m1 * jg[0][0].values()[p] + m2 * jg[0][1].values()[p]);
            s2 += alpha * (m1 * jg[1][0].values()[p] + m2 * jg[1][1].values()[p]);
            let bp = bb[p];
            f1[p] = (1.0 + bp) * l1[p] + a2 * bp * q1[p] - s1;
            f2[p] = (1.0 + bp) * l2[p] + a2 * bp * q2[p] - s2;
        }
    }
    let forcing = VectorField::from_arrays(g, f1, f2);
    let (grad, its) = solve_pressure_opts(b, &forcing, tol, true)?;
    if a2 == 0.0 {
        return Ok((grad, its));
    }
    Ok((grad.sub(&qg.scale(a2)), its))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fields::{gaussian, project_mean, random_enveloped_field};
    use crate::operators::{biot_savart, velocity_total};
    use crate::spectral::{gradient, make_grid};
    use proptest::prelude::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn rel_l2(a: &VectorField, b: &VectorField) -> f64 {
        let d = a.sub(b);
        let num = d.x1.values().iter().chain(d.x2.values().iter()).map(|v| v * v).sum::<f64>();
        let den = b.x1.values().iter().chain(b.x2.values().iter()).map(|v| v * v).sum::<f64>();
        (num / den).sqrt()
    }

    fn l2(a: &VectorField) -> f64 {
        let s: f64 = a.x1.values().iter().chain(a.x2.values().iter()).map(|v| v * v).sum();
        (s * a.grid().cell_area()).sqrt()
    }

    fn random_vector(g: &SpectralGrid, seed: u64) -> VectorField {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let a = random_enveloped_field(g, &mut rng, 3).dealiased();
        let b = random_enveloped_field(g, &mut rng, 3).dealiased();
        VectorField::new(a, b).unwrap()
    }

    fn perp_grad(f: &ScalarField) -> VectorField {
        gradient(f).unwrap().perp()
    }

    #[test]
    fn q_projector_algebra() {
        let g = make_grid(64, 8.0).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let psi = random_enveloped_field(&g, &mut rng, 3);
        let phi = project_mean(&random_enveloped_field(&g, &mut rng, 3));
        let rot = perp_grad(&psi);
        let q = leray_q(&rot);
        assert!(q.x1.max_abs().max(q.x2.max_abs()) <= 1e-12 * rot.x1.max_abs());
        let grad = gradient(&phi).unwrap();
        assert!(rel_l2(&leray_q(&grad), &grad) < 1e-12);
        let f = random_vector(&g, 3);
        let qf = leray_q(&f);
        assert!(rel_l2(&leray_q(&qf), &qf) < 1e-12);
    }

    #[test]
    fn zero_coefficient_is_one_sweep() {
        let g = make_grid(64, 8.0).unwrap();
        let f = random_vector(&g, 4);
        let (gp, its) = solve_pressure(&ScalarField::zeros(&g), &f, 1e-10).unwrap();
        assert_eq!(its, 1);
        assert!(rel_l2(&gp, &leray_q(&f)) < 1e-14);
    }

    #[test]
    fn constant_coefficient_geometric_series() {
        let g = make_grid(64, 8.0).unwrap();
        let f = random_vector(&g, 5);
        let tol = 1e-10;
        for &c in &[0.3, -0.5, 0.7] {
            let (gp, its) = solve_pressure(&ScalarField::constant(&g, c), &f, tol).unwrap();
            let exact = leray_q(&f).scale(1.0 / (1.0 + c));
            assert!(rel_l2(&gp, &exact) < tol, "c = {c}");
            let predicted = (tol.ln() / c.abs().ln()).ceil() as i64;
            assert!((its as i64 - predicted).abs() <= 2, "c = {c}: {its} vs {predicted}");
        }
    }

    fn manufactured(g: &SpectralGrid, seed: u64, b_inf: f64) -> (ScalarField, VectorField, VectorField) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let pi_star = project_mean(&random_enveloped_field(g, &mut rng, 2)).dealiased();
        let psi = random_enveloped_field(g, &mut rng, 2).dealiased();
        let braw = random_enveloped_field(g, &mut rng, 2).map(|v| v * 4.0 * std::f64::consts::PI);
        let b = braw.scale(b_inf / braw.max_abs());
        let grad = gradient(&pi_star).unwrap();
        let f = grad.mul_scalar(&b.map(|v| 1.0 + v)).add(&perp_grad(&psi));
        (b, f, grad)
    }

    #[test]
    fn manufactured_solution() {
        let g = make_grid(128, 16.0).unwrap();
        let tol = 1e-10;
        let (b, f, exact) = manufactured(&g, 7, 0.3);
        let (gp, _) = solve_pressure(&b, &f, tol).unwrap();
        assert!(rel_l2(&gp, &exact) <= 10.0 * tol);
        // residual contract
        let r = gp.mul_scalar(&b.map(|v| 1.0 + v)).sub(&f).divergence();
        let rl2 = crate::fields::lp_norm(&r, 2.0).unwrap();
        assert!(rl2 <= 2.0 * tol * l2(&f), "{rl2}");
        // pressure recovery up to a constant
        let p = pressure_from_gradient(&gp);
        let back = gradient(&p).unwrap();
        assert!(rel_l2(&back, &exact) <= 10.0 * tol);
    }

    #[test]
    fn contraction_violation() {
        let g = make_grid(32, 4.0).unwrap();
        let f = random_vector(&g, 1);
        let b = ScalarField::constant(&g, -1.0);
        assert!(matches!(solve_pressure(&b, &f, 1e-10), Err(Error::ContractionViolated(_))));
    }

    #[test]
    fn iteration_cap_values() {
        assert_eq!(iteration_cap(0.0, 1e-10), 10);
        assert_eq!(iteration_cap(0.1, 1e-10), 100);
        assert_eq!(iteration_cap(0.5, 1e-10), 340);
    }

    #[test]
    fn rhs_zero_and_linearity() {
        let g = make_grid(128, 16.0).unwrap();
        let z = ScalarField::zeros(&g);
        let f = pressure_rhs(&z, &VectorField::zeros(&g), 0.0, &z).unwrap();
        assert_eq!(f.x1.max_abs() + f.x2.max_abs(), 0.0);

        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let w = project_mean(&random_enveloped_field(&g, &mut rng, 3)).dealiased().scale(0.1);
        let b = random_enveloped_field(&g, &mut rng, 2).scale(0.5);
        let alpha = 1.0;
        let v = velocity_total(alpha, &w).unwrap();
        let f0 = pressure_rhs(&z, &v, alpha, &w).unwrap();
        let fb = pressure_rhs(&b, &v, alpha, &w).unwrap();
        let (l1, l2) = perp_gradient_total(alpha, &w).unwrap();
        let lap = VectorField::from_arrays(&g, l1, l2);
        let expect = dealias_vector(lap.mul_scalar(&b));
        let d = fb.sub(&f0).sub(&expect);
        assert!(d.x1.max_abs().max(d.x2.max_abs()) < 1e-12);
    }

    #[test]
    fn oseen_rhs_self_convergent() {
        let qnorm = |n: usize| {
            let g = make_grid(n, 16.0).unwrap();
            let z = ScalarField::zeros(&g);
            let v = velocity_total(1.0, &z).unwrap();
            l2(&leray_q(&pressure_rhs(&z, &v, 1.0, &z).unwrap()))
        };
        let (a, b) = (qnorm(128), qnorm(256));
        assert!((a - b).abs() <= 1e-6 * b, "{a} vs {b}");
    }

    #[test]
    fn split_pressure_matches_direct_solve() {
        // the localized formulation agrees with solving the literal forcing
        let g = make_grid(128, 16.0).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        let w = project_mean(&random_enveloped_field(&g, &mut rng, 3)).dealiased().scale(0.05);
        let b = ScalarField::from_fn(&g, |x, y| -0.2 * (4.0 * std::f64::consts::PI) * gaussian(x - 0.5, y));
        let alpha = 1.0;
        let vt = biot_savart(&w).unwrap();
        let (split, _) = perturbation_pressure_gradient(&b, alpha, &w, &vt, 1e-12).unwrap();
        let v = velocity_total(alpha, &w).unwrap();
        let f = pressure_rhs(&b, &v, alpha, &w).unwrap();
        let (direct, _) = solve_pressure(&b, &f, 1e-12).unwrap();
        // compare inside r < 8 where the periodic wrap of the literal forcing is negligible
        let mut e: f64 = 0.0;
        let mut m: f64 = 0.0;
        for ((i, j), r2) in g.radius_squared().indexed_iter() {
            if *r2 < 64.0 {
                e = e.max((split.x1.values()[[i, j]] - direct.x1.values()[[i, j]]).abs());
                m = m.max(direct.x1.values()[[i, j]].abs());
            }
        }
        assert!(e < 1e-4 * m, "{e} vs {m}");
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(10))]

        #[test]
        fn prop_q_idempotent(seed in 0u64..10_000) {
            let g = make_grid(32, 6.0).unwrap();
            let f = random_vector(&g, seed);
            let qf = leray_q(&f);
            prop_assert!(rel_l2(&leray_q(&qf), &qf) < 1e-12);
        }

        #[test]
        fn prop_manufactured(seed in 0u64..10_000, b_inf in 0.05f64..0.6) {
            let g = make_grid(64, 12.0).unwrap();
            let tol = 1e-10;
            let (b, f, exact) = manufactured(&g, seed, b_inf);
            let (gp, _) = solve_pressure(&b, &f, tol).unwrap();
            prop_assert!(rel_l2(&gp, &exact) <= 10.0 * tol);
        }
    }
}
