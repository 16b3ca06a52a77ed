//! Biot-Savart law, fractional Laplacian and commutators, the Fokker-Planck
//! operator `L`, the linearized advection `Lambda` and the conjugated oscillator.

mod images;

use ndarray::{Array2, Zip};
use rustfft::num_complex::Complex64;

use crate::error::{Error, Result};
use crate::fields::{lp_norm, oseen_velocity_profile};
use crate::spectral::{dealiased_product, ScalarField, SpectralGrid, VectorField};

const I: Complex64 = Complex64 { re: 0.0, im: 1.0 };

/// Relative size of the zero mode above which `biot_savart` refuses its input.
pub const MEAN_TOLERANCE: f64 = 1e-8;

fn check_mean(w: &ScalarField) -> Result<()> {
    let g = w.grid();
    let mean = w.integral();
    // the L2-normalized zero-mode coefficient is mean / (2L)
    let c0 = mean.abs() / (2.0 * g.half_length());
    let norm = lp_norm(w, 2.0)?;
    if c0 > MEAN_TOLERANCE * norm {
        return Err(Error::NonzeroMean { mean });
    }
    Ok(())
}

/// Periodic Biot-Savart velocity from coefficients; the zero mode is dropped.
pub(crate) fn biot_savart_coeffs(grid: &SpectralGrid, c: &Array2<Complex64>) -> VectorField {
    let s = grid.odd_symbol();
    let mut c1 = Array2::zeros(c.dim());
    let mut c2 = Array2::zeros(c.dim());
    for ((i, j), z) in c.indexed_iter() {
        let d2 = s[i] * s[i] + s[j] * s[j];
        if d2 == 0.0 {
            continue;
        }
        let q = *z / d2;
        c1[[i, j]] = I * s[j] * q;
        c2[[i, j]] = -I * s[i] * q;
    }
    let (a, b) = grid.ifft_pair(&c1, &c2);
    VectorField::from_arrays(grid, a, b)
}

/// Velocity `v` with `div v = 0`, `curl v = w` on the periodic box:
/// `v_k = -i k^perp w_k / |k|^2` in the FFT sign convention, `v_0 = 0`.
pub fn biot_savart(w: &ScalarField) -> Result<VectorField> {
    let c = w.coeffs()?;
    check_mean(w)?;
    Ok(biot_savart_coeffs(w.grid(), c))
}

/// Whole-plane Biot-Savart velocity `K_BS * w` for `w` supported well inside
/// the box: the periodic velocity minus the field of the periodic images.
///
/// Accepts nonzero-mean input. Not differentiable spectrally (the image
/// correction is a polynomial).
pub fn biot_savart_whole_plane(w: &ScalarField) -> Result<VectorField> {
    let c = w.coeffs()?;
    let grid = w.grid();
    let v = biot_savart_coeffs(grid, c);
    let (d1, d2) = images::image_velocity(grid, w.values());
    let mut a = v.x1.into_values();
    let mut b = v.x2.into_values();
    a -= &d1;
    b -= &d2;
    Ok(VectorField::from_arrays(grid, a, b))
}

/// Velocity of the periodic images of `w` (subtract from the periodic velocity).
pub(crate) fn images_of(grid: &SpectralGrid, w: &Array2<f64>) -> (Array2<f64>, Array2<f64>) {
    images::image_velocity(grid, w)
}

/// `alpha v^G + biot_savart(w~)`: the velocity of total vorticity `alpha G + w~`.
pub fn velocity_total(alpha: f64, w_tilde: &ScalarField) -> Result<VectorField> {
    let vt = biot_savart(w_tilde)?;
    if alpha == 0.0 {
        return Ok(vt);
    }
    Ok(oseen_velocity_profile(w_tilde.grid()).scale(alpha).add(&vt))
}

/// `I^s f = (-Delta)^{s/2} f`: multiplier `|k|^s`, zero mode mapped to zero.
pub fn fractional_laplacian(f: &ScalarField, s: f64) -> Result<ScalarField> {
    let g = f.grid();
    let c = g.apply_multiplier(f.coeffs()?, |i, j| {
        if i == 0 && j == 0 {
            0.0
        } else {
            g.k_squared(i, j).powf(0.5 * s)
        }
    });
    Ok(ScalarField::from_coeffs(g, &c))
}

/// `I^s(fg) - f I^s g`, both products dealiased.
pub fn commutator_is(f: &ScalarField, g: &ScalarField, s: f64) -> Result<ScalarField> {
    let a = fractional_laplacian(&dealiased_product(f, g), s)?;
    let b = dealiased_product(f, &fractional_laplacian(g, s)?);
    Ok(a.sub(&b))
}

/// `L f = Delta f + (1/2) xi . grad f + f`.
pub fn op_l(f: &ScalarField) -> Result<ScalarField> {
    Ok(op_l_monitored(f)?.0)
}

/// [`op_l`] together with the largest `|f|` on the outer two-cell ring, which
/// bounds the error from the non-periodic factor `xi`.
pub fn op_l_monitored(f: &ScalarField) -> Result<(ScalarField, f64)> {
    let g = f.grid();
    let c = f.coeffs()?;
    let (g1, g2) = g.gradient(c);
    let mut drift = Array2::zeros(c.dim());
    Zip::from(&mut drift)
        .and(&g1)
        .and(&g2)
        .and(g.xi1())
        .and(g.xi2())
        .for_each(|d, &a, &b, &x, &y| *d = 0.5 * (x * a + y * b));
    let mut dc = g.fft(&drift);
    g.dealias_in_place(&mut dc);
    let total = Array2::from_shape_fn(c.dim(), |(i, j)| dc[[i, j]] - c[[i, j]] * g.k_squared(i, j));
    let out = ScalarField::from_coeffs(g, &total).add(f);
    Ok((out, f.boundary_mass()))
}

/// `v^G . grad f + u . grad G` with `u` the velocity of `f`, dealiased.
pub(crate) fn lambda_from_parts(grid: &SpectralGrid, grad_f: (&Array2<f64>, &Array2<f64>), u: &VectorField) -> ScalarField {
    let vg = oseen_velocity_profile(grid);
    let mut out = Array2::zeros(grid_dim(grid));
    Zip::from(&mut out)
        .and(vg.x1.values())
        .and(vg.x2.values())
        .and(grad_f.0)
        .and(grad_f.1)
        .for_each(|o, &v1, &v2, &a, &b| *o = v1 * a + v2 * b);
    // grad G = -(xi/2) G
    Zip::from(&mut out)
        .and(u.x1.values())
        .and(u.x2.values())
        .and(grid.xi1())
        .and(grid.xi2())
        .for_each(|o, &u1, &u2, &x, &y| {
            let gauss = (-(x * x + y * y) / 4.0).exp() / (4.0 * std::f64::consts::PI);
            *o -= 0.5 * gauss * (u1 * x + u2 * y);
        });
    ScalarField::from_array(grid, out).dealiased()
}

fn grid_dim(g: &SpectralGrid) -> (usize, usize) {
    (g.n(), g.n())
}

/// `Lambda f = v^G . grad f + (K_BS * f) . grad G`, using the whole-plane
/// Biot-Savart velocity so that `Lambda` is skew in the weighted inner product.
pub fn op_lambda(f: &ScalarField) -> Result<ScalarField> {
    check_mean(f)?;
    let g = f.grid();
    let (g1, g2) = g.gradient(f.coeffs()?);
    let u = biot_savart_whole_plane(f)?;
    Ok(lambda_from_parts(g, (&g1, &g2), &u))
}

/// `G^{-1/2} (-L) G^{1/2} f = -Delta f + |xi|^2 f / 16 - f / 2`, evaluated directly.
pub fn conjugated_oscillator(f: &ScalarField) -> Result<ScalarField> {
    let g = f.grid();
    let c = g.apply_multiplier(f.coeffs()?, |i, j| g.k_squared(i, j));
    let mut out = g.ifft(&c);
    Zip::from(&mut out)
        .and(f.values())
        .and(g.radius_squared())
        .for_each(|o, &v, &s| *o += (s / 16.0 - 0.5) * v);
    Ok(ScalarField::from_array(g, out))
}
