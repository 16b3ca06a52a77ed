//! Removal of periodic images from the box Biot-Savart velocity.
//!
//! The kernel of the zero-mean periodic Biot-Savart law on a square box of side
//! `P` differs from the whole-plane kernel `x^perp / (2 pi |x|^2)` by
//! `grad^perp H`, with `H` smooth near the origin:
//!
//! `H(z) = -|z|^2 / (4A) - (1/2pi) sum_k Re(G_{4k} z^{4k}) / (4k)`,
//!
//! where `A = P^2` and `G_m = sum' (P (a + ib))^{-m}` are the Eisenstein sums
//! of the square lattice. The correction for a field `f` is then a polynomial
//! in `x` whose coefficients are complex moments of `f`.

use std::f64::consts::PI;

use ndarray::Array2;
use rustfft::num_complex::Complex64;

use crate::spectral::SpectralGrid;

/// `Gamma(1/4)`.
const GAMMA_QUARTER: f64 = 3.625_609_908_221_908_3;

/// Eisenstein sums of the unit square lattice `Z[i]` for `m = 4, 8, 12`.
fn unit_lattice_sums() -> [(usize, f64); 3] {
    let g4 = GAMMA_QUARTER.powi(8) / (960.0 * PI * PI);
    [(4, g4), (8, 3.0 * g4 * g4 / 7.0), (12, 18.0 * g4.powi(3) / 143.0)]
}

const MAX_DEGREE: usize = 11;

fn binomial(n: usize, k: usize) -> f64 {
    let mut r = 1.0;
    for i in 0..k {
        r = r * (n - i) as f64 / (i + 1) as f64;
    }
    r
}

/// Velocity produced on the box by the periodic images of `f` (and by the
/// compensating uniform background), i.e. periodic minus whole-plane velocity.
pub(crate) fn image_velocity(grid: &SpectralGrid, f: &Array2<f64>) -> (Array2<f64>, Array2<f64>) {
    let p = 2.0 * grid.half_length();
    let area = p * p;
    let cell = grid.cell_area();
    let x1 = grid.xi1();
    let x2 = grid.xi2();

    let mut moments = [Complex64::new(0.0, 0.0); MAX_DEGREE + 1];
    let (mut m1, mut m2) = (0.0, 0.0);
    for ((v, a), b) in f.iter().zip(x1.iter()).zip(x2.iter()) {
        if *v == 0.0 {
            continue;
        }
        let y = Complex64::new(*a, *b);
        let mut pow = Complex64::new(*v, 0.0);
        for m in moments.iter_mut() {
            *m += pow;
            pow *= y;
        }
        m1 += a * v;
        m2 += b * v;
    }
    for m in moments.iter_mut() {
        *m *= cell;
    }
    let (m0, m1, m2) = (moments[0].re, m1 * cell, m2 * cell);

    // g'(x) = sum_k a_k x^k
    let mut poly = [Complex64::new(0.0, 0.0); MAX_DEGREE + 1];
    for (m, unit) in unit_lattice_sums() {
        let gm = unit / p.powi(m as i32);
        let c = -gm / (2.0 * PI * m as f64);
        for j in 0..m {
            let sign = if j % 2 == 0 { 1.0 } else { -1.0 };
            poly[m - 1 - j] += moments[j] * (c * m as f64 * binomial(m - 1, j) * sign);
        }
    }

    let mut c1 = Array2::zeros(f.dim());
    let mut c2 = Array2::zeros(f.dim());
    for (((o1, o2), a), b) in c1.iter_mut().zip(c2.iter_mut()).zip(x1.iter()).zip(x2.iter()) {
        let z = Complex64::new(*a, *b);
        let mut g = Complex64::new(0.0, 0.0);
        for k in (0..=MAX_DEGREE).rev() {
            g = g * z + poly[k];
        }
        *o1 = g.im + (b * m0 - m2) / (2.0 * area);
        *o2 = g.re - (a * m0 - m1) / (2.0 * area);
    }
    (c1, c2)
}
