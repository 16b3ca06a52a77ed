use super::*;
use crate::config::Shape;
use crate::evolution::simulate;
use crate::fields::{hermite_function, lp_norm, weighted_lp_norm};
use crate::spectral::make_grid;

fn config(t_end: f64) -> RunConfig {
    let mut cfg = RunConfig::new(1.0, 1e-2);
    cfg.n = 128;
    cfg.t_end = t_end;
    cfg
}

fn summary(index: usize, b: f64, w: f64) -> IterateSummary {
    IterateSummary {
        index,
        sup_delta_b: b,
        sup_delta_w: w,
        sup_delta: b.hypot(w),
        samples: vec![(0.0, 0.0, 0.0), (1.0, b, w)],
    }
}

#[test]
fn zero_data_gives_zero_iterates() {
    let mut cfg = config(0.2);
    cfg.epsilon = 0.0;
    let out = picard_solve(&cfg, 3, 1e-30).unwrap();
    // zero differences converge at once
    assert!(out.converged);
    assert_eq!(out.history.len(), 1);
    let mut it = out.last;
    for k in 2..=3 {
        it = picard_step(&it, &cfg).unwrap();
        assert_eq!(it.index, k);
        for s in &it.trajectory {
            assert_eq!(s.b.max_abs(), 0.0);
            assert_eq!(s.w_tilde.max_abs(), 0.0);
        }
        assert_eq!(it.sup_delta_squared(), 0.0);
    }
}

#[test]
fn first_iterate_is_linear_heat_flow() {
    let mut cfg = config(0.2);
    cfg.alpha = 0.0;
    cfg.density_scale = 0.0;
    cfg.shape = Shape::HermiteMode(1, 0);
    let out = picard_solve(&cfg, 1, 1e-30).unwrap();
    let g = make_grid(128, 16.0).unwrap();
    let w0 = hermite_function(&g, 1, 0);
    let w0 = w0.scale(cfg.epsilon / weighted_lp_norm(&w0, 2.0).unwrap());
    for s in out.last.samples() {
        let exact = w0.scale((-0.5 * s.tau).exp());
        let err = s.w_tilde.sub(&exact).max_abs() / w0.max_abs();
        assert!(err < 1e-6, "tau {} err {err}", s.tau);
    }
}

#[test]
fn huge_tolerance_stops_after_one_iterate() {
    let out = picard_solve(&config(0.1), 10, 1e10).unwrap();
    assert!(out.converged);
    assert_eq!(out.history.len(), 1);
    assert_eq!(out.last.index, 1);
}

#[test]
fn iterates_contract_and_match_direct_solver() {
    let mut cfg = config(0.3);
    cfg.shape = Shape::RandomBandlimited;
    cfg.seed = 5;
    let out = picard_solve(&cfg, 8, 1e-9).unwrap();
    assert!(out.converged, "{:?}", out.history.iter().map(|h| h.sup_delta).collect::<Vec<_>>());
    let h = &out.history;
    assert!(h.len() >= 4);
    for (a, b) in h[2].samples.iter().zip(&h[3].samples).skip(1) {
        assert!(b.1.hypot(b.2) < a.1.hypot(a.2));
    }
    for k in 2..h.len() {
        assert!(h[k].sup_delta < h[k - 1].sup_delta);
    }
    // every iterate keeps the mean and the exact density norm law
    let b0 = lp_norm(&out.last.trajectory[0].b, 2.0).unwrap();
    for s in &out.last.trajectory {
        assert!(s.w_tilde.integral().abs() <= 1e-10);
        let law = lp_norm(&s.b, 2.0).unwrap() * (s.tau / 2.0).exp();
        assert!((law / b0 - 1.0).abs() < 0.01);
    }
    let g = make_grid(128, 16.0).unwrap();
    let direct = simulate(&cfg, crate::evolution::initial_state(&g, &cfg).unwrap()).unwrap();
    let samples: Vec<&PerturbationState> = out.last.samples().collect();
    assert_eq!(samples.len(), direct.records.len());
    let fin = samples.last().unwrap();
    let d = weighted_lp_norm_unchecked(&fin.w_tilde.sub(&direct.final_state.w_tilde), 2.0);
    assert!(d < 1e-6, "{d}");
}

#[test]
fn non_contraction_is_reported() {
    let ok = vec![summary(1, 1.0, 1.0), summary(2, 0.5, 0.5), summary(3, 0.6, 0.1), summary(4, 0.7, 0.05)];
    assert!(check_contraction(&ok).is_ok());
    let mut bad = ok.clone();
    bad.push(summary(5, 0.8, 0.01));
    match check_contraction(&bad) {
        Err(Error::NonContraction { norm }) => assert!(norm.contains("delta b")),
        other => panic!("{other:?}"),
    }
}

#[test]
fn summability_fit_recovers_model() {
    let p = 8.0;
    let q = 1.0 - 1.0 / p;
    let (a, c) = (0.02, 0.3_f64);
    let hist: Vec<IterateSummary> = (1..=6)
        .map(|k| {
            let samples = (0..=10)
                .map(|i| {
                    let t = 0.1 * i as f64;
                    let d = a * c.powi(k as i32) * (t.powi(k as i32) / (1..=k).product::<usize>() as f64).powf(q);
                    (t, d, 0.0)
                })
                .collect();
            IterateSummary {
                index: k,
                sup_delta_b: 0.0,
                sup_delta_w: 0.0,
                sup_delta: 0.0,
                samples,
            }
        })
        .collect();
    let fit = summability_fit(&hist, p, 1).unwrap();
    assert!((fit.c - c).abs() < 1e-9 && (fit.prefactor - a).abs() < 1e-9);
    assert!(fit.relative_residual < 1e-9);
}
