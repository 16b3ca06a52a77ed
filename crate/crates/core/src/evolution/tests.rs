use super::*;
use crate::fields::{gaussian, hermite_function, lp_norm, random_enveloped_field, weighted_lp_norm};
use crate::operators::{biot_savart, op_l};
use crate::spectral::{dealiased_product, gradient, make_grid};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

fn grid128() -> SpectralGrid {
    make_grid(128, 16.0).unwrap()
}

fn generic_state(g: &SpectralGrid, eps: f64, seed: u64) -> PerturbationState {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let w = project_mean(&random_enveloped_field(g, &mut rng, 2).dealiased());
    let w = w.scale(eps / weighted_lp_norm(&w, 2.0).unwrap());
    let b = ScalarField::from_fn(g, |x, y| -(-((x - 0.5).powi(2) + (y + 0.25).powi(2)) / 4.0).exp())
        .scale(eps)
        .dealiased();
    PerturbationState::new(b, project_mean(&w), 0.0).unwrap()
}

fn max_diff(a: &ScalarField, b: &ScalarField) -> f64 {
    a.sub(b).max_abs()
}

#[test]
fn zero_perturbation_is_fixed() {
    let g = grid128();
    let it = Integrator::new(&g, StepOptions::new(1.5));
    let z = PerturbationState::zero(&g);
    let (next, info) = it.step(&z, 0.01, None).unwrap();
    assert!(next.b.max_abs() <= 1e-12);
    assert!(next.w_tilde.max_abs() <= 1e-12);
    assert!((next.tau - 0.01).abs() < 1e-15);
    assert_eq!(info.pressure_iterations, 0);
}

#[test]
fn oseen_vortex_is_steady() {
    let g = make_grid(128, 16.0).unwrap();
    let z = PerturbationState::zero(&g);
    for alpha in [1.0, -3.0] {
        assert!(rhs_vorticity(&z, alpha).unwrap().max_abs() < 1e-8);
    }
}

#[test]
fn rhs_vorticity_linear_part() {
    let g = make_grid(128, 16.0).unwrap();
    let w = ScalarField::from_fn(&g, |x, y| 1e-2 * x * gaussian(x, y));
    let st = PerturbationState::new(ScalarField::zeros(&g), w.clone(), 0.0).unwrap();
    let r = rhs_vorticity(&st, 0.0).unwrap();
    // independent transport term
    let v = biot_savart(&w).unwrap();
    let gw = gradient(&w).unwrap();
    let adv = dealiased_product(&v.x1, &gw.x1).add(&dealiased_product(&v.x2, &gw.x2));
    let expected = w.scale(-0.5).sub(&adv);
    assert!(max_diff(&r, &expected) < 1e-8, "{}", max_diff(&r, &expected));
    assert!(max_diff(&op_l(&w).unwrap(), &w.scale(-0.5)) < 1e-8);
}

#[test]
fn rhs_density_examples() {
    let g = make_grid(128, 16.0).unwrap();
    let zero_v = VectorField::zeros(&g);
    assert_eq!(rhs_density(&ScalarField::zeros(&g), &zero_v).unwrap().max_abs(), 0.0);
    let b = ScalarField::from_fn(&g, |x, y| (-(x * x + y * y) / 4.0).exp());
    let r = rhs_density(&b, &zero_v).unwrap();
    let expected = ScalarField::from_fn(&g, |x, y| -(x * x + y * y) / 4.0 * (-(x * x + y * y) / 4.0).exp());
    assert!(max_diff(&r, &expected) < 1e-8);
    // d/dtau int b = -int b for div-free v, since div(v - xi/2) = -1
    let st = generic_state(&g, 0.1, 4);
    let v = velocity_total(1.0, &st.w_tilde).unwrap();
    let r = rhs_density(&st.b, &v).unwrap();
    assert!((r.integral() + st.b.integral()).abs() < 1e-8 * st.b.integral().abs());
    let h = rhs_density_hyper(&st.b, &v, 1e-3).unwrap();
    assert!(max_diff(&h, &r) > 0.0);
}

#[test]
fn heat_subcase_matches_exact_propagator() {
    let g = grid128();
    let mut opts = StepOptions::new(0.0);
    opts.model = Model::Linear;
    // one step from smooth data: a larger CFL number is safe and lifts the
    // temporal error above round-off
    opts.cfl = 2.0;
    let it = Integrator::new(&g, opts);
    let w0 = hermite_function(&g, 1, 1).scale(0.1);
    let st = PerturbationState::new(ScalarField::zeros(&g), w0.clone(), 0.0).unwrap();
    let mut errs = Vec::new();
    for dt in [0.06, 0.03] {
        let (next, _) = it.step(&st, dt, None).unwrap();
        // eigenvalue of L is -1
        errs.push(max_diff(&next.w_tilde, &w0.scale((-dt).exp())));
    }
    assert!(errs[0] < 1e-9, "{errs:?}");
    // local error O(dt^5): halving dt divides it by about 32
    let ratio = errs[0] / errs[1];
    assert!(ratio > 20.0 && ratio < 45.0, "{errs:?} ratio {ratio}");
}

#[test]
fn fourth_order_under_step_doubling() {
    let g = grid128();
    let it = Integrator::new(&g, StepOptions::new(1.0));
    let st = generic_state(&g, 0.2, 11);
    let horizon = 0.2;
    let run = |m: usize| {
        let mut s = st.clone();
        for _ in 0..m {
            s = it.step(&s, horizon / m as f64, None).unwrap().0;
        }
        s
    };
    let (a, b, c) = (run(16), run(32), run(64));
    let e1 = max_diff(&a.w_tilde, &b.w_tilde).max(max_diff(&a.b, &b.b));
    let e2 = max_diff(&b.w_tilde, &c.w_tilde).max(max_diff(&b.b, &c.b));
    let ratio = e1 / e2;
    assert!((ratio - 16.0).abs() < 0.2 * 16.0, "{e1:e} {e2:e} ratio {ratio}");
}

#[test]
fn mean_is_preserved() {
    let g = grid128();
    let it = Integrator::new(&g, StepOptions::new(1.0));
    let mut s = generic_state(&g, 0.1, 2);
    for _ in 0..10 {
        s = it.step(&s, 0.015, None).unwrap().0;
        assert!(s.w_tilde.integral().abs() <= 1e-12);
    }
}

#[test]
fn cfl_and_density_limits() {
    let g = grid128();
    let it = Integrator::new(&g, StepOptions::new(1.0));
    let s = generic_state(&g, 0.1, 2);
    let limit = it.cfl_limit(&s).unwrap();
    assert!(matches!(it.step(&s, 2.0 * limit, None), Err(Error::Cfl { .. })));
    assert!(matches!(it.step(&s, -0.01, None), Err(Error::Cfl { .. })));
    let big = PerturbationState::new(s.b.scale(0.95 / s.b.max_abs()), s.w_tilde.clone(), 0.0).unwrap();
    assert!(matches!(it.step(&big, 0.01, None), Err(Error::DensityTooLarge(_))));
}

fn short_config(n: usize, t_end: f64) -> RunConfig {
    let mut cfg = RunConfig::new(1.0, 1e-2);
    cfg.n = n;
    cfg.t_end = t_end;
    cfg
}

#[test]
fn simulate_zero_horizon() {
    let cfg = short_config(128, 0.0);
    let g = make_grid(128, 16.0).unwrap();
    let t = simulate(&cfg, initial_state(&g, &cfg).unwrap()).unwrap();
    assert_eq!(t.records.len(), 1);
    assert_eq!(t.steps, 0);
    assert_eq!(t.records[0].tau, 0.0);
}

#[test]
fn simulate_is_deterministic_and_conserves() {
    let mut cfg = short_config(128, 0.5);
    cfg.shape = crate::config::Shape::RandomBandlimited;
    cfg.seed = 9;
    let g = make_grid(128, 16.0).unwrap();
    let rows = || {
        let t = simulate(&cfg, initial_state(&g, &cfg).unwrap()).unwrap();
        t.records.iter().map(|r| r.csv_row()).collect::<Vec<_>>()
    };
    let a = rows();
    assert_eq!(a, rows());
    assert_eq!(a.len(), 6);
    let t = simulate(&cfg, initial_state(&g, &cfg).unwrap()).unwrap();
    let mut prev = -1.0;
    for r in &t.records {
        assert!(r.tau > prev);
        prev = r.tau;
        assert!(r.mean.abs() <= 1e-10);
        assert!(r.cfl_margin >= 1.0);
    }
    assert!((t.final_state.tau - 0.5).abs() < 1e-14);
    // exact density law on the short horizon
    let b0 = lp_norm(&initial_state(&g, &cfg).unwrap().b, 2.0).unwrap();
    let b1 = lp_norm(&t.final_state.b, 2.0).unwrap() * (0.25_f64).exp();
    assert!((b1 / b0 - 1.0).abs() < 1e-3, "{}", b1 / b0);
}

#[test]
fn simulate_rejects_large_user_dt() {
    let mut cfg = short_config(128, 0.1);
    cfg.dt = Some(1.0);
    let g = make_grid(128, 16.0).unwrap();
    let err = simulate(&cfg, initial_state(&g, &cfg).unwrap()).unwrap_err();
    assert!(matches!(err.error, Error::Cfl { .. }));
    assert!(err.partial.records.is_empty());
}

#[test]
fn subdivision() {
    assert_eq!(subdivide(0.1, 0.03), (4, 0.025));
    assert_eq!(subdivide(0.1, 0.1), (1, 0.1));
    assert_eq!(subdivide(0.1, 0.025).0, 4);
}

#[test]
fn physical_variables() {
    let g = make_grid(128, 16.0).unwrap();
    let st = generic_state(&g, 0.1, 1);
    let p = self_similar_to_physical(&st, 1.0).unwrap();
    assert_eq!(p.t, 1.0);
    assert_eq!(p.coords, g.coords().to_vec());
    let w = ScalarField::from_fn(&g, gaussian).add(&st.w_tilde);
    assert!((&p.omega - w.values()).iter().all(|d| d.abs() < 1e-15));

    let alpha = 2.0;
    let mut z = PerturbationState::zero(&g);
    z.tau = 4f64.ln();
    let p = self_similar_to_physical(&z, alpha).unwrap();
    assert!((p.t - 4.0).abs() < 1e-12);
    for (i, x) in p.coords.iter().enumerate().step_by(7) {
        for (j, y) in p.coords.iter().enumerate().step_by(5) {
            let expected = alpha / 4.0 * gaussian(x / 2.0, y / 2.0);
            assert!((p.omega[[i, j]] - expected).abs() < 1e-15);
        }
    }
    // L^2 scaling t^{-(1 - 1/2)}
    let lhs = p.lp_norm(&p.omega, 2.0);
    let rhs = 4f64.powf(-0.5) * lp_norm(&ScalarField::from_fn(&g, gaussian).scale(alpha), 2.0).unwrap();
    assert!((lhs / rhs - 1.0).abs() < 1e-10);
}
