//! Periodic spectral substrate: the truncated plane `[-L, L)^2` sampled on an
//! `n x n` grid, 2D FFTs, spectral differentiation and 2/3-rule dealiasing.
//!
//! Coefficient arrays are unnormalized DFTs indexed `[k1, k2]` in standard FFT
//! order; values are indexed `[i1, i2]` with `values[[i1, i2]] = f(xi1_i1, xi2_i2)`.
//! Every operator in this crate is diagonal in that basis, so the constant
//! phase between index-based and coordinate-based transforms never matters.

use std::fmt;
use std::sync::{Arc, OnceLock};

use ndarray::{Array2, Zip};
use rustfft::num_complex::Complex64;
use rustfft::{Fft, FftPlanner};

use crate::error::{Error, Result};

/// Fraction of the half-width inside which Gaussian-weighted quantities are
/// evaluated. Outside this disk the weight `G^{-1/2}` amplifies round-off
/// beyond double precision.
pub const WEIGHT_RADIUS_FRACTION: f64 = 0.7;

const ZERO: Complex64 = Complex64 { re: 0.0, im: 0.0 };
const I: Complex64 = Complex64 { re: 0.0, im: 1.0 };

/// Coordinate direction of a derivative.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Axis {
    /// First coordinate `xi_1` (array axis 0).
    Xi1,
    /// Second coordinate `xi_2` (array axis 1).
    Xi2,
}

struct GridInner {
    n: usize,
    half_length: f64,
    dx: f64,
    coords: Vec<f64>,
    wavenumbers: Vec<f64>,
    /// Symbol of an odd-order derivative: the wavenumber with Nyquist zeroed.
    odd_symbol: Vec<f64>,
    keep: Vec<bool>,
    xi1: Array2<f64>,
    xi2: Array2<f64>,
    r2: Array2<f64>,
    /// `G^{-1/2}` inside the weight disk, zero outside.
    weight: Array2<f64>,
    forward: Arc<dyn Fft<f64>>,
    inverse: Arc<dyn Fft<f64>>,
}

/// Uniform `n x n` grid on `[-L, L)^2` with its wavenumber tables and FFT plans.
///
/// Cloning is cheap (shared immutable tables).
#[derive(Clone)]
pub struct SpectralGrid(Arc<GridInner>);

impl fmt::Debug for SpectralGrid {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("SpectralGrid")
            .field("n", &self.0.n)
            .field("half_length", &self.0.half_length)
            .finish()
    }
}

impl PartialEq for SpectralGrid {
    fn eq(&self, other: &Self) -> bool {
        Arc::ptr_eq(&self.0, &other.0)
            || (self.0.n == other.0.n && self.0.half_length == other.0.half_length)
    }
}

/// Build a grid; `n` must be even and at least 8, `half_length` positive.
pub fn make_grid(n: usize, half_length: f64) -> Result<SpectralGrid> {
    SpectralGrid::new(n, half_length)
}

impl SpectralGrid {
    pub fn new(n: usize, half_length: f64) -> Result<Self> {
        if n % 2 != 0 {
            return Err(Error::InvalidGrid(format!("n = {n} must be even")));
        }
        if n < 8 {
            return Err(Error::InvalidGrid(format!("n = {n} must be at least 8")));
        }
        if !(half_length > 0.0 && half_length.is_finite()) {
            return Err(Error::InvalidGrid(format!(
                "half length L = {half_length} must be positive"
            )));
        }
        let dx = 2.0 * half_length / n as f64;
        let coords: Vec<f64> = (0..n).map(|i| -half_length + dx * i as f64).collect();
        let base = std::f64::consts::PI / half_length;
        let half = n / 2;
        let wavenumbers: Vec<f64> = (0..n)
            .map(|j| {
                if j <= half {
                    base * j as f64
                } else {
                    base * (j as f64 - n as f64)
                }
            })
            .collect();
        let odd_symbol = wavenumbers
            .iter()
            .enumerate()
            .map(|(j, &k)| if j == half { 0.0 } else { k })
            .collect();
        let keep = (0..n)
            .map(|j| {
                let m = if j <= half { j } else { n - j };
                3 * m < n
            })
            .collect();
        let xi1 = Array2::from_shape_fn((n, n), |(i, _)| coords[i]);
        let xi2 = Array2::from_shape_fn((n, n), |(_, j)| coords[j]);
        let r2 = &xi1 * &xi1 + &xi2 * &xi2;
        let radius = WEIGHT_RADIUS_FRACTION * half_length;
        let norm = (4.0 * std::f64::consts::PI).sqrt();
        let weight = r2.mapv(|s| {
            if s <= radius * radius {
                norm * (s / 8.0).exp()
            } else {
                0.0
            }
        });
        let mut planner = FftPlanner::new();
        let forward = planner.plan_fft_forward(n);
        let inverse = planner.plan_fft_inverse(n);
        Ok(SpectralGrid(Arc::new(GridInner {
            n,
            half_length,
            dx,
            coords,
            wavenumbers,
            odd_symbol,
            keep,
            xi1,
            xi2,
            r2,
            weight,
            forward,
            inverse,
        })))
    }

    pub fn n(&self) -> usize {
        self.0.n
    }

    pub fn half_length(&self) -> f64 {
        self.0.half_length
    }

    pub fn dx(&self) -> f64 {
        self.0.dx
    }

    /// Area element of the rectangle-rule quadrature.
    pub fn cell_area(&self) -> f64 {
        self.0.dx * self.0.dx
    }

    /// Sample positions `-L, -L + dx, ..., L - dx` (same on both axes).
    pub fn coords(&self) -> &[f64] {
        &self.0.coords
    }

    /// Wavenumbers `pi j / L` in FFT order; the Nyquist entry is stored as `+pi n / (2L)`.
    pub fn wavenumbers(&self) -> &[f64] {
        &self.0.wavenumbers
    }

    pub fn nyquist_index(&self) -> usize {
        self.0.n / 2
    }

    pub fn xi1(&self) -> &Array2<f64> {
        &self.0.xi1
    }

    pub fn xi2(&self) -> &Array2<f64> {
        &self.0.xi2
    }

    /// `|xi|^2` at every sample.
    pub fn radius_squared(&self) -> &Array2<f64> {
        &self.0.r2
    }

    /// Radius of the disk on which Gaussian-weighted quantities are evaluated.
    pub fn weight_radius(&self) -> f64 {
        WEIGHT_RADIUS_FRACTION * self.0.half_length
    }

    /// `G^{-1/2}` on the weight disk, zero outside it.
    pub fn weight(&self) -> &Array2<f64> {
        &self.0.weight
    }

    pub(crate) fn odd_symbol(&self) -> &[f64] {
        &self.0.odd_symbol
    }

    /// Whether wavenumber index `j` survives the 2/3 rule.
    pub fn retained(&self, j: usize) -> bool {
        self.0.keep[j]
    }

    /// `|kappa|^2` for coefficient `[k1, k2]` (Nyquist included).
    #[inline]
    pub fn k_squared(&self, k1: usize, k2: usize) -> f64 {
        let a = self.0.wavenumbers[k1];
        let b = self.0.wavenumbers[k2];
        a * a + b * b
    }

    fn check_shape<T>(&self, a: &Array2<T>) {
        assert_eq!(a.dim(), (self.0.n, self.0.n), "array shape does not match grid");
    }

    fn fft2_in_place(&self, data: &mut [Complex64], inverse: bool) {
        let n = self.0.n;
        let plan = if inverse {
            &self.0.inverse
        } else {
            &self.0.forward
        };
        let mut scratch = vec![ZERO; plan.get_inplace_scratch_len()];
        plan.process_with_scratch(data, &mut scratch);
        transpose_square(data, n);
        plan.process_with_scratch(data, &mut scratch);
        transpose_square(data, n);
    }

    /// Unnormalized forward DFT of real samples.
    pub fn fft(&self, values: &Array2<f64>) -> Array2<Complex64> {
        self.check_shape(values);
        let mut buf: Vec<Complex64> = values.iter().map(|&v| Complex64::new(v, 0.0)).collect();
        self.fft2_in_place(&mut buf, false);
        Array2::from_shape_vec((self.0.n, self.0.n), buf).expect("shape")
    }

    /// Forward DFTs of two real arrays with one complex transform.
    pub fn fft_pair(
        &self,
        a: &Array2<f64>,
        b: &Array2<f64>,
    ) -> (Array2<Complex64>, Array2<Complex64>) {
        self.check_shape(a);
        self.check_shape(b);
        let n = self.0.n;
        let mut buf: Vec<Complex64> = a
            .iter()
            .zip(b.iter())
            .map(|(&x, &y)| Complex64::new(x, y))
            .collect();
        self.fft2_in_place(&mut buf, false);
        let mut fa = Array2::from_elem((n, n), ZERO);
        let mut fb = Array2::from_elem((n, n), ZERO);
        for k1 in 0..n {
            let m1 = (n - k1) % n;
            for k2 in 0..n {
                let m2 = (n - k2) % n;
                let z = buf[k1 * n + k2];
                let zc = buf[m1 * n + m2].conj();
                fa[[k1, k2]] = (z + zc) * 0.5;
                fb[[k1, k2]] = (z - zc) * Complex64::new(0.0, -0.5);
            }
        }
        (fa, fb)
    }

    /// Inverse DFT (normalized by `1/n^2`), keeping the real part.
    pub fn ifft(&self, coeffs: &Array2<Complex64>) -> Array2<f64> {
        self.check_shape(coeffs);
        let mut buf: Vec<Complex64> = coeffs.iter().copied().collect();
        self.fft2_in_place(&mut buf, true);
        let scale = 1.0 / (self.0.n * self.0.n) as f64;
        let re: Vec<f64> = buf.iter().map(|z| z.re * scale).collect();
        Array2::from_shape_vec((self.0.n, self.0.n), re).expect("shape")
    }

    /// Inverse DFTs of two Hermitian-symmetric spectra with one complex transform.
    pub fn ifft_pair(
        &self,
        a: &Array2<Complex64>,
        b: &Array2<Complex64>,
    ) -> (Array2<f64>, Array2<f64>) {
        self.check_shape(a);
        self.check_shape(b);
        let mut buf: Vec<Complex64> = a.iter().zip(b.iter()).map(|(&x, &y)| x + I * y).collect();
        self.fft2_in_place(&mut buf, true);
        let scale = 1.0 / (self.0.n * self.0.n) as f64;
        let n = self.0.n;
        let re = buf.iter().map(|z| z.re * scale).collect();
        let im = buf.iter().map(|z| z.im * scale).collect();
        (
            Array2::from_shape_vec((n, n), re).expect("shape"),
            Array2::from_shape_vec((n, n), im).expect("shape"),
        )
    }

    /// Coefficient-wise product with a real multiplier `m(k1_index, k2_index)`.
    pub fn apply_multiplier(
        &self,
        coeffs: &Array2<Complex64>,
        m: impl Fn(usize, usize) -> f64,
    ) -> Array2<Complex64> {
        Array2::from_shape_fn(coeffs.dim(), |(i, j)| coeffs[[i, j]] * m(i, j))
    }

    /// Coefficients of the derivative of the given order along `axis`.
    pub fn derivative_coeffs(
        &self,
        coeffs: &Array2<Complex64>,
        axis: Axis,
        order: u32,
    ) -> Array2<Complex64> {
        let symbol: &[f64] = if order % 2 == 1 {
            &self.0.odd_symbol
        } else {
            &self.0.wavenumbers
        };
        let factor = I.powu(order);
        Array2::from_shape_fn(coeffs.dim(), |(i, j)| {
            let k = match axis {
                Axis::Xi1 => symbol[i],
                Axis::Xi2 => symbol[j],
            };
            coeffs[[i, j]] * factor * k.powi(order as i32)
        })
    }

    /// Real-space gradient from coefficients (first-order symbols, Nyquist zeroed).
    pub fn gradient(&self, coeffs: &Array2<Complex64>) -> (Array2<f64>, Array2<f64>) {
        let s = &self.0.odd_symbol;
        let d1 = Array2::from_shape_fn(coeffs.dim(), |(i, j)| coeffs[[i, j]] * I * s[i]);
        let d2 = Array2::from_shape_fn(coeffs.dim(), |(i, j)| coeffs[[i, j]] * I * s[j]);
        self.ifft_pair(&d1, &d2)
    }

    /// Spectral divergence of a vector field given by its two coefficient arrays.
    pub fn divergence_coeffs(
        &self,
        c1: &Array2<Complex64>,
        c2: &Array2<Complex64>,
    ) -> Array2<Complex64> {
        let s = &self.0.odd_symbol;
        Array2::from_shape_fn(c1.dim(), |(i, j)| I * (c1[[i, j]] * s[i] + c2[[i, j]] * s[j]))
    }

    /// Keep only modes with `3|j| < n` on both axes, so quadratic products of retained modes never alias back into the band.
    pub fn dealias_in_place(&self, coeffs: &mut Array2<Complex64>) {
        let keep = &self.0.keep;
        for ((i, j), c) in coeffs.indexed_iter_mut() {
            if !(keep[i] && keep[j]) {
                *c = ZERO;
            }
        }
    }

    /// Rectangle-rule integral of samples over the box.
    pub fn integrate(&self, values: &Array2<f64>) -> f64 {
        values.sum() * self.cell_area()
    }
}

fn transpose_square(data: &mut [Complex64], n: usize) {
    const B: usize = 16;
    for bi in (0..n).step_by(B) {
        for bj in (bi..n).step_by(B) {
            for i in bi..(bi + B).min(n) {
                let start = if bi == bj { i + 1 } else { bj };
                for j in start..(bj + B).min(n) {
                    data.swap(i * n + j, j * n + i);
                }
            }
        }
    }
}

/// Real samples of one scalar function, with lazily cached Fourier coefficients.
#[derive(Clone, Debug)]
pub struct ScalarField {
    grid: SpectralGrid,
    values: Array2<f64>,
    coeffs: OnceLock<Array2<Complex64>>,
}

impl ScalarField {
    pub fn new(grid: &SpectralGrid, values: Array2<f64>) -> Result<Self> {
        if values.dim() != (grid.n(), grid.n()) {
            return Err(Error::GridMismatch(format!(
                "array of shape {:?} on a {}x{} grid",
                values.dim(),
                grid.n(),
                grid.n()
            )));
        }
        Ok(Self::from_array(grid, values))
    }

    pub(crate) fn from_array(grid: &SpectralGrid, values: Array2<f64>) -> Self {
        debug_assert_eq!(values.dim(), (grid.n(), grid.n()));
        ScalarField {
            grid: grid.clone(),
            values,
            coeffs: OnceLock::new(),
        }
    }

    /// Field whose samples and coefficients are both already known.
    pub(crate) fn with_coeffs(grid: &SpectralGrid, values: Array2<f64>, coeffs: Array2<Complex64>) -> Self {
        let cell = OnceLock::new();
        let _ = cell.set(coeffs);
        ScalarField {
            grid: grid.clone(),
            values,
            coeffs: cell,
        }
    }

    pub fn zeros(grid: &SpectralGrid) -> Self {
        Self::from_array(grid, Array2::zeros((grid.n(), grid.n())))
    }

    pub fn constant(grid: &SpectralGrid, c: f64) -> Self {
        Self::from_array(grid, Array2::from_elem((grid.n(), grid.n()), c))
    }

    /// Sample `f(xi1, xi2)` at every grid point.
    pub fn from_fn(grid: &SpectralGrid, f: impl Fn(f64, f64) -> f64) -> Self {
        let c = grid.coords();
        Self::from_array(grid, Array2::from_shape_fn((grid.n(), grid.n()), |(i, j)| f(c[i], c[j])))
    }

    pub fn grid(&self) -> &SpectralGrid {
        &self.grid
    }

    pub fn values(&self) -> &Array2<f64> {
        &self.values
    }

    /// Mutable access to the samples; drops the cached coefficients.
    pub fn values_mut(&mut self) -> &mut Array2<f64> {
        self.coeffs.take();
        &mut self.values
    }

    pub fn into_values(self) -> Array2<f64> {
        self.values
    }

    /// Fourier coefficients, computed on first use.
    pub fn coeffs(&self) -> Result<&Array2<Complex64>> {
        if let Some(c) = self.coeffs.get() {
            return Ok(c);
        }
        if let Some(((i, j), _)) = self.values.indexed_iter().find(|(_, v)| !v.is_finite()) {
            return Err(Error::NonFinite(i, j));
        }
        Ok(self.coeffs.get_or_init(|| self.grid.fft(&self.values)))
    }

    pub(crate) fn coeffs_unchecked(&self) -> &Array2<Complex64> {
        self.coeffs.get_or_init(|| self.grid.fft(&self.values))
    }

    /// Build a field from coefficients (real part of the inverse transform).
    pub fn from_coeffs(grid: &SpectralGrid, coeffs: &Array2<Complex64>) -> Self {
        Self::from_array(grid, grid.ifft(coeffs))
    }

    pub fn map(&self, f: impl Fn(f64) -> f64) -> Self {
        Self::from_array(&self.grid, self.values.mapv(f))
    }

    pub fn zip_map(&self, other: &ScalarField, f: impl Fn(f64, f64) -> f64) -> Self {
        assert!(self.grid == other.grid, "fields live on different grids");
        let mut out = self.values.clone();
        Zip::from(&mut out).and(&other.values).for_each(|a, &b| *a = f(*a, b));
        Self::from_array(&self.grid, out)
    }

    pub fn scale(&self, a: f64) -> Self {
        self.map(|v| a * v)
    }

    pub fn add(&self, other: &ScalarField) -> Self {
        self.zip_map(other, |a, b| a + b)
    }

    pub fn sub(&self, other: &ScalarField) -> Self {
        self.zip_map(other, |a, b| a - b)
    }

    /// Pointwise product (not dealiased).
    pub fn mul(&self, other: &ScalarField) -> Self {
        self.zip_map(other, |a, b| a * b)
    }

    /// `self + a * other`.
    pub fn axpy(&self, a: f64, other: &ScalarField) -> Self {
        self.zip_map(other, |x, y| x + a * y)
    }

    pub fn max_abs(&self) -> f64 {
        self.values.iter().fold(0.0_f64, |m, v| m.max(v.abs()))
    }

    pub fn min(&self) -> f64 {
        self.values.iter().copied().fold(f64::INFINITY, f64::min)
    }

    /// Grid quadrature of the field over the box.
    pub fn integral(&self) -> f64 {
        self.grid.integrate(&self.values)
    }

    pub fn is_finite(&self) -> bool {
        self.values.iter().all(|v| v.is_finite())
    }

    /// Largest `|f|` on the outer two-cell ring of the box.
    pub fn boundary_mass(&self) -> f64 {
        let n = self.grid.n();
        let mut m = 0.0_f64;
        for ((i, j), v) in self.values.indexed_iter() {
            if i < 2 || j < 2 || i >= n - 2 || j >= n - 2 {
                m = m.max(v.abs());
            }
        }
        m
    }

    /// Project onto the 2/3-rule band.
    pub fn dealiased(&self) -> Self {
        let mut c = self.coeffs_unchecked().clone();
        self.grid.dealias_in_place(&mut c);
        Self::from_coeffs(&self.grid, &c)
    }
}

/// Two scalar components on one grid.
#[derive(Clone, Debug)]
pub struct VectorField {
    pub x1: ScalarField,
    pub x2: ScalarField,
}

impl VectorField {
    pub fn new(x1: ScalarField, x2: ScalarField) -> Result<Self> {
        if x1.grid != x2.grid {
            return Err(Error::GridMismatch("vector components on different grids".into()));
        }
        Ok(VectorField { x1, x2 })
    }

    pub(crate) fn from_arrays(grid: &SpectralGrid, a: Array2<f64>, b: Array2<f64>) -> Self {
        VectorField {
            x1: ScalarField::from_array(grid, a),
            x2: ScalarField::from_array(grid, b),
        }
    }

    pub fn zeros(grid: &SpectralGrid) -> Self {
        VectorField {
            x1: ScalarField::zeros(grid),
            x2: ScalarField::zeros(grid),
        }
    }

    pub fn grid(&self) -> &SpectralGrid {
        self.x1.grid()
    }

    pub fn scale(&self, a: f64) -> Self {
        VectorField {
            x1: self.x1.scale(a),
            x2: self.x2.scale(a),
        }
    }

    pub fn add(&self, other: &VectorField) -> Self {
        VectorField {
            x1: self.x1.add(&other.x1),
            x2: self.x2.add(&other.x2),
        }
    }

    pub fn sub(&self, other: &VectorField) -> Self {
        VectorField {
            x1: self.x1.sub(&other.x1),
            x2: self.x2.sub(&other.x2),
        }
    }

    /// Multiply both components by a scalar field (not dealiased).
    pub fn mul_scalar(&self, f: &ScalarField) -> Self {
        VectorField {
            x1: self.x1.mul(f),
            x2: self.x2.mul(f),
        }
    }

    /// Pointwise magnitude `|v|`.
    pub fn magnitude(&self) -> ScalarField {
        self.x1.zip_map(&self.x2, |a, b| a.hypot(b))
    }

    /// Rotated field `v^perp = (-v2, v1)`.
    pub fn perp(&self) -> Self {
        VectorField {
            x1: self.x2.scale(-1.0),
            x2: self.x1.clone(),
        }
    }

    /// Spectral divergence.
    pub fn divergence(&self) -> ScalarField {
        let g = self.grid();
        let c = g.divergence_coeffs(self.x1.coeffs_unchecked(), self.x2.coeffs_unchecked());
        ScalarField::from_coeffs(g, &c)
    }

    /// Spectral scalar curl `d1 v2 - d2 v1`.
    pub fn curl(&self) -> ScalarField {
        let g = self.grid();
        let s = g.odd_symbol();
        let c1 = self.x1.coeffs_unchecked();
        let c2 = self.x2.coeffs_unchecked();
        let c = Array2::from_shape_fn(c1.dim(), |(i, j)| I * (c2[[i, j]] * s[i] - c1[[i, j]] * s[j]));
        ScalarField::from_coeffs(g, &c)
    }

    pub fn is_finite(&self) -> bool {
        self.x1.is_finite() && self.x2.is_finite()
    }
}

/// Pointwise product followed by 2/3-rule truncation.
pub fn dealiased_product(a: &ScalarField, b: &ScalarField) -> ScalarField {
    a.mul(b).dealiased()
}

/// Unnormalized DFT of the samples; rejects non-finite input.
pub fn transform(f: &ScalarField) -> Result<Array2<Complex64>> {
    f.coeffs().cloned()
}

/// Real field whose unnormalized DFT is `coeffs`.
pub fn inverse_transform(coeffs: &Array2<Complex64>, grid: &SpectralGrid) -> ScalarField {
    ScalarField::from_coeffs(grid, coeffs)
}

/// Derivative of the given order along `axis`: multiplication by `(i kappa)^order`,
/// with the Nyquist mode of odd orders zeroed.
pub fn spectral_derivative(f: &ScalarField, axis: Axis, order: u32) -> Result<ScalarField> {
    if order == 0 {
        return Err(Error::InvalidGrid("derivative order must be positive".into()));
    }
    let c = f.coeffs()?;
    Ok(ScalarField::from_coeffs(
        f.grid(),
        &f.grid().derivative_coeffs(c, axis, order),
    ))
}

/// Spectral gradient of a scalar field.
pub fn gradient(f: &ScalarField) -> Result<VectorField> {
    let (a, b) = f.grid().gradient(f.coeffs()?);
    Ok(VectorField::from_arrays(f.grid(), a, b))
}

/// Spectral Laplacian.
pub fn laplacian(f: &ScalarField) -> Result<ScalarField> {
    let g = f.grid();
    let c = g.apply_multiplier(f.coeffs()?, |i, j| -g.k_squared(i, j));
    Ok(ScalarField::from_coeffs(g, &c))
}

/// 2/3-rule truncation of a coefficient array.
pub fn dealias(coeffs: &Array2<Complex64>, grid: &SpectralGrid) -> Array2<Complex64> {
    let mut c = coeffs.clone();
    grid.dealias_in_place(&mut c);
    c
}
