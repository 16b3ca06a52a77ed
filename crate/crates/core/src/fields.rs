//! Oseen profiles, perturbation states and norm functionals.

use std::f64::consts::PI;

use ndarray::Array2;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::config::{RunConfig, Shape};
use crate::error::{Error, Result};
use crate::spectral::{ScalarField, SpectralGrid, VectorField};

/// `G(xi) = exp(-|xi|^2/4) / (4 pi)`.
pub fn gaussian(x1: f64, x2: f64) -> f64 {
    (-(x1 * x1 + x2 * x2) / 4.0).exp() / (4.0 * PI)
}

/// `phi(x) = (1 - e^{-x}) / x`, with `phi(0) = 1`.
fn phi(x: f64) -> f64 {
    if x == 0.0 {
        1.0
    } else {
        -(-x).exp_m1() / x
    }
}

fn phi_prime(x: f64) -> f64 {
    if x < 0.5 {
        // sum_{k>=1} k (-1)^k x^{k-1} / (k+1)!
        let mut sum = 0.0;
        let mut pow = 1.0;
        let mut fact = 2.0;
        for k in 1..30 {
            let term = k as f64 * pow / fact;
            sum += if k % 2 == 1 { -term } else { term };
            pow *= x;
            fact *= (k + 2) as f64;
        }
        sum
    } else {
        let e = (-x).exp();
        (x * e + (-x).exp_m1()) / (x * x)
    }
}

/// Radial factor of the Oseen velocity: `v^G(xi) = xi^perp * oseen_h(|xi|^2)`.
pub fn oseen_h(s: f64) -> f64 {
    phi(s / 4.0) / (8.0 * PI)
}

/// Derivative of [`oseen_h`] with respect to `s = |xi|^2`.
pub fn oseen_h_prime(s: f64) -> f64 {
    phi_prime(s / 4.0) / (32.0 * PI)
}

/// Samples of the Oseen vorticity profile `G`.
pub fn oseen_vorticity_profile(grid: &SpectralGrid) -> ScalarField {
    ScalarField::from_fn(grid, gaussian)
}

/// Samples of the Oseen velocity `v^G = xi^perp (1 - e^{-|xi|^2/4}) / (2 pi |xi|^2)`.
pub fn oseen_velocity_profile(grid: &SpectralGrid) -> VectorField {
    let h = grid.radius_squared().mapv(oseen_h);
    let v1 = -(grid.xi2() * &h);
    let v2 = grid.xi1() * &h;
    VectorField::from_arrays(grid, v1, v2)
}

/// Exact Jacobian of `v^G`: entry `[i][j]` is `d_j v_i`.
pub fn oseen_velocity_gradient(grid: &SpectralGrid) -> [[ScalarField; 2]; 2] {
    let r2 = grid.radius_squared();
    let h = r2.mapv(oseen_h);
    let hp = r2.mapv(oseen_h_prime);
    let x1 = grid.xi1();
    let x2 = grid.xi2();
    let d11 = -2.0 * (x1 * x2 * &hp);
    let d12 = -&h - 2.0 * (x2 * x2 * &hp);
    let d21 = &h + 2.0 * (x1 * x1 * &hp);
    let d22 = 2.0 * (x1 * x2 * &hp);
    let f = |a: Array2<f64>| ScalarField::from_array(grid, a);
    [[f(d11), f(d12)], [f(d21), f(d22)]]
}

/// Gradient of `|v^G|^2 / 2`, which equals `h (G - h) xi`.
pub fn oseen_kinetic_gradient(grid: &SpectralGrid) -> VectorField {
    let c = grid.radius_squared().mapv(|s| {
        let h = oseen_h(s);
        h * ((-s / 4.0).exp() / (4.0 * PI) - h)
    });
    VectorField::from_arrays(grid, grid.xi1() * &c, grid.xi2() * &c)
}

fn check_p(p: f64) -> Result<()> {
    if p >= 1.0 {
        Ok(())
    } else {
        Err(Error::InvalidExponent(p))
    }
}

fn lp_of_iter(values: impl Iterator<Item = f64>, p: f64, cell: f64) -> f64 {
    if p.is_infinite() {
        values.fold(0.0_f64, |m, v| m.max(v.abs()))
    } else if p == 1.0 {
        values.map(f64::abs).sum::<f64>() * cell
    } else if p == 2.0 {
        (values.map(|v| v * v).sum::<f64>() * cell).sqrt()
    } else {
        // scale out the maximum so large p cannot underflow
        let vals: Vec<f64> = values.map(f64::abs).collect();
        let m = vals.iter().copied().fold(0.0_f64, f64::max);
        if m == 0.0 {
            return 0.0;
        }
        let s: f64 = vals.iter().map(|v| (v / m).powf(p)).sum();
        m * (s * cell).powf(1.0 / p)
    }
}

/// Grid-quadrature `L^p` norm; `p = f64::INFINITY` gives the max norm.
pub fn lp_norm(f: &ScalarField, p: f64) -> Result<f64> {
    check_p(p)?;
    let cell = f.grid().cell_area();
    let r = lp_of_iter(f.values().iter().copied(), p, cell);
    if r.is_finite() {
        Ok(r)
    } else {
        Err(Error::NonFinite(0, 0))
    }
}

/// `L^p` norm of `|v|`.
pub fn lp_norm_vector(v: &VectorField, p: f64) -> Result<f64> {
    lp_norm(&v.magnitude(), p)
}

/// Fraction of weighted `L^2` mass in the outermost unit annulus of the weight
/// disk above which a field is declared outside the weighted space.
pub const WEIGHT_EDGE_TOLERANCE: f64 = 1e-3;

fn weighted_samples(f: &ScalarField) -> Vec<f64> {
    f.values()
        .iter()
        .zip(f.grid().weight().iter())
        .filter(|(_, w)| **w > 0.0)
        .map(|(v, w)| v * w)
        .collect()
}

fn check_admissible(f: &ScalarField) -> Result<()> {
    let g = f.grid();
    let edge = (g.weight_radius() - 1.0).max(0.0).powi(2);
    let mut total = 0.0;
    let mut outer = 0.0;
    for ((v, w), s) in f.values().iter().zip(g.weight().iter()).zip(g.radius_squared().iter()) {
        if *w == 0.0 {
            continue;
        }
        let x = v * w;
        if !x.is_finite() {
            return Err(Error::WeightOverflow);
        }
        total += x * x;
        if *s >= edge {
            outer += x * x;
        }
    }
    if !total.is_finite() || outer > WEIGHT_EDGE_TOLERANCE * total {
        return Err(Error::WeightOverflow);
    }
    Ok(())
}

/// `L^p` norm of `G^{-1/2} f`, evaluated on the weight disk.
///
/// Fails with [`Error::WeightOverflow`] when the weighted field is not finite
/// or carries a non-negligible share of its mass at the disk edge, i.e. when
/// `f` does not decay like `G^{1/2}` on this grid.
pub fn weighted_lp_norm(f: &ScalarField, p: f64) -> Result<f64> {
    check_p(p)?;
    check_admissible(f)?;
    Ok(weighted_lp_norm_unchecked(f, p))
}

/// [`weighted_lp_norm`] without the admissibility test, for differences of
/// nearly equal fields whose round-off floor dominates the disk edge.
pub fn weighted_lp_norm_unchecked(f: &ScalarField, p: f64) -> f64 {
    lp_of_iter(weighted_samples(f).into_iter(), p, f.grid().cell_area())
}

/// Weighted norm of `|v|`.
pub fn weighted_lp_norm_vector(v: &VectorField, p: f64) -> Result<f64> {
    weighted_lp_norm(&v.magnitude(), p)
}

/// `<G^{-1/2} f, G^{-1/2} g>` on the weight disk.
pub fn weighted_inner(f: &ScalarField, g: &ScalarField) -> Result<f64> {
    let grid = f.grid();
    let mut s = 0.0;
    for ((a, b), w) in f.values().iter().zip(g.values().iter()).zip(grid.weight().iter()) {
        s += a * b * w * w;
    }
    let s = s * grid.cell_area();
    if s.is_finite() {
        Ok(s)
    } else {
        Err(Error::WeightOverflow)
    }
}

fn spectral_sum(f: &ScalarField, mult: impl Fn(f64) -> f64, skip_zero: bool) -> Result<f64> {
    let g = f.grid();
    let c = f.coeffs()?;
    let mut s = 0.0;
    for ((i, j), z) in c.indexed_iter() {
        if skip_zero && i == 0 && j == 0 {
            continue;
        }
        s += mult(g.k_squared(i, j)) * z.norm_sqr();
    }
    let n2 = (g.n() * g.n()) as f64;
    Ok((s * g.cell_area() / n2).sqrt())
}

/// Inhomogeneous Sobolev norm `(sum (1+|k|^2)^s |f_k|^2)^{1/2}`, normalized so that `s = 0` is the `L^2` norm.
pub fn sobolev_norm(f: &ScalarField, s: f64) -> Result<f64> {
    spectral_sum(f, |k2| (1.0 + k2).powf(s), false)
}

/// Homogeneous Sobolev norm `(sum_{k != 0} |k|^{2s} |f_k|^2)^{1/2}`.
pub fn homogeneous_sobolev_norm(f: &ScalarField, s: f64) -> Result<f64> {
    spectral_sum(f, |k2| k2.powf(s), true)
}

/// Subtract `(int f / int G) G`, leaving a mean-zero field in the weighted class.
pub fn project_mean(f: &ScalarField) -> ScalarField {
    let g = oseen_vorticity_profile(f.grid());
    let c = f.integral() / g.integral();
    f.axpy(-c, &g)
}

/// The perturbation `(b, w~)` at rescaled time `tau`; density is `1/(1+b)`,
/// vorticity is `alpha G + w~`.
#[derive(Clone, Debug)]
pub struct PerturbationState {
    pub b: ScalarField,
    pub w_tilde: ScalarField,
    pub tau: f64,
}

impl PerturbationState {
    pub fn new(b: ScalarField, w_tilde: ScalarField, tau: f64) -> Result<Self> {
        if b.grid() != w_tilde.grid() {
            return Err(Error::GridMismatch("b and w_tilde on different grids".into()));
        }
        Ok(PerturbationState { b, w_tilde, tau })
    }

    pub fn zero(grid: &SpectralGrid) -> Self {
        PerturbationState {
            b: ScalarField::zeros(grid),
            w_tilde: ScalarField::zeros(grid),
            tau: 0.0,
        }
    }

    pub fn grid(&self) -> &SpectralGrid {
        self.b.grid()
    }
}

/// Physicists' Hermite polynomial `H_n(x)`.
pub fn hermite(n: u32, x: f64) -> f64 {
    let (mut a, mut b) = (1.0, 2.0 * x);
    if n == 0 {
        return a;
    }
    for k in 1..n {
        let c = 2.0 * x * b - 2.0 * k as f64 * a;
        a = b;
        b = c;
    }
    b
}

/// `(-1/2)^{n1+n2} H_{n1}(xi1/2) H_{n2}(xi2/2) G`, i.e. `d1^{n1} d2^{n2} G`.
/// It satisfies `L f = -(n1+n2)/2 f`.
pub fn hermite_function(grid: &SpectralGrid, n1: u32, n2: u32) -> ScalarField {
    let c = (-0.5_f64).powi((n1 + n2) as i32);
    ScalarField::from_fn(grid, |x, y| c * hermite(n1, x / 2.0) * hermite(n2, y / 2.0) * gaussian(x, y))
}

/// Random `G`-enveloped field: a trigonometric polynomial with frequencies
/// below `max_freq` (in units of `1/2`) times `G`. Not mean-projected.
pub fn random_enveloped_field(grid: &SpectralGrid, rng: &mut impl Rng, max_freq: i32) -> ScalarField {
    let mut terms = Vec::new();
    for m1 in 0..=max_freq {
        for m2 in -max_freq..=max_freq {
            if m1 == 0 && m2 < 0 {
                continue;
            }
            let a: f64 = rng.random_range(-1.0..1.0);
            let b: f64 = rng.random_range(-1.0..1.0);
            terms.push((0.5 * m1 as f64, 0.5 * m2 as f64, a, b));
        }
    }
    ScalarField::from_fn(grid, |x, y| {
        let mut s = 0.0;
        for &(k1, k2, a, b) in &terms {
            let ph = k1 * x + k2 * y;
            s += a * ph.cos() + b * ph.sin();
        }
        s * gaussian(x, y)
    })
}

/// Center offset of the initial density bump.
pub const DENSITY_BUMP_CENTER: (f64, f64) = (0.5, -0.25);
/// Half-separation of the two poles of the dipole shape.
pub const DIPOLE_OFFSET: f64 = 0.5;

fn initial_vorticity(grid: &SpectralGrid, cfg: &RunConfig) -> ScalarField {
    match cfg.shape {
        Shape::GaussianDipole => {
            let d = DIPOLE_OFFSET;
            ScalarField::from_fn(grid, |x, y| gaussian(x - d, y) - gaussian(x + d, y))
        }
        Shape::HermiteMode(a, b) => hermite_function(grid, a, b),
        Shape::RandomBandlimited => {
            let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
            random_enveloped_field(grid, &mut rng, 3)
        }
    }
}

/// Initial density profile `-exp(-|xi - c|^2/4)` before scaling.
fn initial_density_shape(grid: &SpectralGrid) -> ScalarField {
    let (c1, c2) = DENSITY_BUMP_CENTER;
    ScalarField::from_fn(grid, |x, y| -(-((x - c1).powi(2) + (y - c2).powi(2)) / 4.0).exp())
}

/// Build `(b0, w~0)` for a run.
///
/// `w~0` is the selected shape, mean-projected and scaled to weighted `L^2`
/// norm `epsilon`. `b0` is a negative Gaussian bump scaled so that the larger
/// of its weighted `L^2` and `L^inf` norms equals `epsilon * density_scale`.
pub fn make_initial_perturbation(grid: &SpectralGrid, cfg: &RunConfig) -> Result<PerturbationState> {
    if grid.n() != cfg.n || grid.half_length() != cfg.half_length {
        return Err(Error::GridMismatch(format!(
            "config asks for n = {}, L = {} but grid has n = {}, L = {}",
            cfg.n,
            cfg.half_length,
            grid.n(),
            grid.half_length()
        )));
    }
    if cfg.epsilon < 0.0 {
        return Err(Error::config("epsilon", "must be >= 0"));
    }
    if cfg.epsilon == 0.0 {
        return Ok(PerturbationState::zero(grid));
    }
    let w = project_mean(&initial_vorticity(grid, cfg));
    let wn = weighted_lp_norm(&w, 2.0)?;
    if wn == 0.0 {
        return Err(Error::config(
            "shape",
            format!("{} has no mean-free part", cfg.shape),
        ));
    }
    let w = w.scale(cfg.epsilon / wn);

    let target = cfg.epsilon * cfg.density_scale;
    let b = if target == 0.0 {
        ScalarField::zeros(grid)
    } else {
        let shape = initial_density_shape(grid);
        let size = weighted_lp_norm(&shape, 2.0)?.max(weighted_lp_norm(&shape, f64::INFINITY)?);
        shape.scale(target / size)
    };
    let min_density = 1.0 + b.min();
    if min_density <= 0.0 {
        return Err(Error::DensityNotPositive(min_density));
    }
    PerturbationState::new(b, w, 0.0)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::spectral::{make_grid, spectral_derivative, Axis};

    fn grid() -> SpectralGrid {
        make_grid(256, 16.0).unwrap()
    }

    #[test]
    fn gaussian_values() {
        let g = grid();
        let gf = oseen_vorticity_profile(&g);
        assert!((gf.values()[[128, 128]] - 1.0 / (4.0 * PI)).abs() < 1e-17);
        assert!((1.0 / (4.0 * PI) - 0.0795775).abs() < 1e-7);
        assert!(gaussian(16.0, 0.0) <= 1e-28);
        assert!((gf.integral() - 1.0).abs() < 1e-10);
        assert!((lp_norm(&gf, 1.0).unwrap() - 1.0).abs() < 1e-10);
        assert!((lp_norm(&gf, f64::INFINITY).unwrap() - 1.0 / (4.0 * PI)).abs() < 1e-17);
    }

    #[test]
    fn phi_branches_agree() {
        for &x in &[1e-4, 0.1, 0.49999, 0.5, 0.50001, 2.0, 40.0] {
            let h = 1e-6;
            let fd = (phi(x + h) - phi(x - h)) / (2.0 * h);
            assert!((phi_prime(x) - fd).abs() < 1e-8, "x={x}");
        }
        assert!((phi_prime(0.0) + 0.5).abs() < 1e-15);
        assert!((phi_prime(0.5 - 1e-12) - phi_prime(0.5)).abs() < 1e-12);
    }

    #[test]
    fn velocity_profile_values() {
        let g = grid();
        let v = oseen_velocity_profile(&g);
        assert_eq!(v.x1.values()[[128, 128]], 0.0);
        assert_eq!(v.x2.values()[[128, 128]], 0.0);
        // |xi| = 2 at index 128 + 16
        let m = v.magnitude().values()[[144, 128]];
        let expect = (1.0 - (-1.0_f64).exp()) / (4.0 * PI);
        assert!((m - expect).abs() < 1e-15);
        assert!((expect - 0.0503026).abs() < 1e-7);
        // near origin: v ~ xi^perp / (8 pi)
        assert!((oseen_h(1e-10) - 1.0 / (8.0 * PI)).abs() < 1e-12);
    }

    #[test]
    fn velocity_gradient_matches_finite_differences() {
        let g = make_grid(64, 8.0).unwrap();
        let d = oseen_velocity_gradient(&g);
        let h = 1e-6;
        let v = |x: f64, y: f64| {
            let s = x * x + y * y;
            (-y * oseen_h(s), x * oseen_h(s))
        };
        for &(i, j) in &[(32, 32), (35, 30), (40, 44), (20, 50)] {
            let (x, y) = (g.coords()[i], g.coords()[j]);
            let (a, b) = v(x + h, y);
            let (c, e) = v(x - h, y);
            let (a2, b2) = v(x, y + h);
            let (c2, e2) = v(x, y - h);
            let fd = [[(a - c) / (2.0 * h), (a2 - c2) / (2.0 * h)], [(b - e) / (2.0 * h), (b2 - e2) / (2.0 * h)]];
            for r in 0..2 {
                for s in 0..2 {
                    assert!((d[r][s].values()[[i, j]] - fd[r][s]).abs() < 1e-9);
                }
            }
        }
    }

    #[test]
    fn kinetic_gradient_matches_finite_differences() {
        let g = make_grid(64, 8.0).unwrap();
        let q = oseen_kinetic_gradient(&g);
        let e = |x: f64, y: f64| {
            let s = x * x + y * y;
            0.5 * s * oseen_h(s).powi(2)
        };
        let h = 1e-5;
        for &(i, j) in &[(33, 32), (38, 27), (45, 40)] {
            let (x, y) = (g.coords()[i], g.coords()[j]);
            let d1 = (e(x + h, y) - e(x - h, y)) / (2.0 * h);
            let d2 = (e(x, y + h) - e(x, y - h)) / (2.0 * h);
            assert!((q.x1.values()[[i, j]] - d1).abs() < 1e-10);
            assert!((q.x2.values()[[i, j]] - d2).abs() < 1e-10);
        }
    }

    #[test]
    fn velocity_profile_curl_and_divergence_interior() {
        // v^G is not periodic, so differentiate chi v^G with chi = exp(-r^2/8);
        // exactly, curl(chi v^G) = chi (G - (r^2/4) h(r^2)) and div(chi v^G) = 0.
        let g = grid();
        let chi = g.radius_squared().mapv(|s| (-s / 8.0).exp());
        let chi = ScalarField::from_array(&g, chi);
        let v = oseen_velocity_profile(&g).mul_scalar(&chi);
        let curl = spectral_derivative(&v.x2, Axis::Xi1, 1)
            .unwrap()
            .sub(&spectral_derivative(&v.x1, Axis::Xi2, 1).unwrap());
        let div = spectral_derivative(&v.x1, Axis::Xi1, 1)
            .unwrap()
            .add(&spectral_derivative(&v.x2, Axis::Xi2, 1).unwrap());
        let exact = ScalarField::from_fn(&g, |x, y| {
            let s = x * x + y * y;
            (-s / 8.0).exp() * (gaussian(x, y) - s / 4.0 * oseen_h(s))
        });
        let ce = curl.sub(&exact).max_abs();
        assert!(ce < 1e-8, "curl error {ce}");
        assert!(div.max_abs() < 1e-10, "div error {}", div.max_abs());
    }

    #[test]
    fn weighted_norms_of_gaussian() {
        let g = grid();
        let gf = oseen_vorticity_profile(&g);
        assert!((weighted_lp_norm(&gf, 2.0).unwrap() - 1.0).abs() < 1e-10);
        let sup = weighted_lp_norm(&gf, f64::INFINITY).unwrap();
        assert!((sup - (1.0 / (4.0 * PI)).sqrt()).abs() < 1e-12);
        assert!((sup - 0.2820948).abs() < 1e-7);
        assert_eq!(weighted_lp_norm(&ScalarField::zeros(&g), 2.0).unwrap(), 0.0);
        assert!(matches!(lp_norm(&gf, 0.5), Err(Error::InvalidExponent(_))));
    }

    #[test]
    fn weight_overflow_is_reported() {
        let g = grid();
        let slow = ScalarField::from_fn(&g, |x, y| (-(x * x + y * y) / 8.0).exp());
        assert!(matches!(weighted_lp_norm(&slow, 2.0), Err(Error::WeightOverflow)));
        let one = ScalarField::constant(&g, 1e-3);
        assert!(matches!(weighted_lp_norm(&one, 4.0), Err(Error::WeightOverflow)));
    }

    #[test]
    fn sobolev_definitions() {
        let g = make_grid(64, 6.0).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        let f = random_enveloped_field(&g, &mut rng, 3);
        let l2 = lp_norm(&f, 2.0).unwrap();
        assert!((sobolev_norm(&f, 0.0).unwrap() - l2).abs() < 1e-12 * l2);
        assert_eq!(homogeneous_sobolev_norm(&ScalarField::constant(&g, 3.0), 0.7).unwrap(), 0.0);
        let k = PI / g.half_length();
        let mode = ScalarField::from_fn(&g, |x, _| 2.0 * (k * x).cos());
        let h1 = homogeneous_sobolev_norm(&mode, 1.0).unwrap();
        let m2 = lp_norm(&mode, 2.0).unwrap();
        assert!((h1 - k * m2).abs() < 1e-12 * h1);
    }

    #[test]
    fn hermite_polynomials() {
        assert_eq!(hermite(0, 0.3), 1.0);
        assert_eq!(hermite(1, 0.3), 0.6);
        assert!((hermite(2, 0.3) - (4.0 * 0.09 - 2.0)).abs() < 1e-15);
        assert!((hermite(3, 0.3) - (8.0 * 0.027 - 12.0 * 0.3)).abs() < 1e-15);
    }

    #[test]
    fn initial_perturbation_contract() {
        let g = grid();
        let cfg = RunConfig::new(1.0, 1e-2);
        let st = make_initial_perturbation(&g, &cfg).unwrap();
        assert!(st.w_tilde.integral().abs() < 1e-12);
        assert!((weighted_lp_norm(&st.w_tilde, 2.0).unwrap() - 1e-2).abs() < 1e-12);
        let b2 = weighted_lp_norm(&st.b, 2.0).unwrap();
        let binf = weighted_lp_norm(&st.b, f64::INFINITY).unwrap();
        assert!(b2 <= 1e-2 * (1.0 + 1e-12) && binf <= 1e-2 * (1.0 + 1e-12));
        assert!((b2.max(binf) - 1e-2).abs() < 1e-14);
        assert!(st.b.min() > -1.0);

        let zero = make_initial_perturbation(&g, &RunConfig::new(1.0, 0.0)).unwrap();
        assert_eq!(zero.w_tilde.max_abs(), 0.0);
        assert_eq!(zero.b.max_abs(), 0.0);
    }

    #[test]
    fn hermite_initial_is_odd_mode() {
        let g = grid();
        let mut cfg = RunConfig::new(1.0, 1e-2);
        cfg.shape = Shape::HermiteMode(1, 0);
        let raw = hermite_function(&g, 1, 0);
        assert!(raw.integral().abs() < 1e-14);
        let st = make_initial_perturbation(&g, &cfg).unwrap();
        let x1g = ScalarField::from_fn(&g, |x, y| x * gaussian(x, y));
        let c = st.w_tilde.values()[[140, 128]] / x1g.values()[[140, 128]];
        assert!(st.w_tilde.sub(&x1g.scale(c)).max_abs() < 1e-14);

        cfg.shape = Shape::HermiteMode(0, 0);
        assert!(matches!(make_initial_perturbation(&g, &cfg), Err(Error::Config { .. })));
    }

    #[test]
    fn large_density_rejected() {
        let g = grid();
        let mut cfg = RunConfig::new(1.0, 1.0);
        cfg.density_scale = 100.0;
        assert!(matches!(make_initial_perturbation(&g, &cfg), Err(Error::DensityNotPositive(_))));
    }
}
