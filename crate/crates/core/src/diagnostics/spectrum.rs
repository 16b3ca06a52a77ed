//! Lowest eigenvalues of `G^{-1/2} (-L) G^{1/2} = -Delta + |xi|^2/16 - 1/2`.
//!
//! Chebyshev-filtered subspace iteration on the matrix-free operator with a
//! Rayleigh-Ritz step per sweep. The filter damps the (wide) upper part of
//! the discrete spectrum so a small block converges in a few dozen sweeps.

use nalgebra::{DMatrix, SymmetricEigen};
use ndarray::Array2;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::spectral::{ScalarField, SpectralGrid};

/// Largest supported number of eigenvalues.
pub const MAX_EIGENVALUES: usize = 10;
const EXTRA_VECTORS: usize = 8;
const FILTER_DEGREE: usize = 40;
const MAX_SWEEPS: usize = 200;

#[derive(Debug, Clone, Serialize)]
pub struct OscillatorSpectrum {
    /// Ascending.
    pub eigenvalues: Vec<f64>,
    /// `||H x - lambda x|| / ||x||` per eigenpair.
    pub residuals: Vec<f64>,
    pub sweeps: usize,
    #[serde(skip)]
    pub ground_state: Option<ScalarField>,
}

impl OscillatorSpectrum {
    /// Cosine between the computed ground state and `G^{1/2}`.
    pub fn ground_cosine(&self) -> Option<f64> {
        let f = self.ground_state.as_ref()?;
        let g = f.grid();
        let half = g.radius_squared().mapv(|s| (-s / 8.0).exp());
        let v = f.values();
        let dot: f64 = v.iter().zip(half.iter()).map(|(a, b)| a * b).sum();
        let na: f64 = v.iter().map(|a| a * a).sum::<f64>().sqrt();
        let nb: f64 = half.iter().map(|a| a * a).sum::<f64>().sqrt();
        Some((dot / (na * nb)).abs())
    }
}

struct Oscillator<'a> {
    grid: &'a SpectralGrid,
    k2: Array2<f64>,
    potential: Array2<f64>,
}

impl<'a> Oscillator<'a> {
    fn new(grid: &'a SpectralGrid) -> Self {
        let n = grid.n();
        Oscillator {
            grid,
            k2: Array2::from_shape_fn((n, n), |(i, j)| grid.k_squared(i, j)),
            potential: grid.radius_squared().mapv(|s| s / 16.0 - 0.5),
        }
    }

    fn upper_bound(&self) -> f64 {
        let kmax = self.k2.iter().copied().fold(0.0, f64::max);
        let vmax = self.potential.iter().copied().fold(f64::MIN, f64::max);
        kmax + vmax
    }

    fn apply(&self, x: &[f64]) -> Vec<f64> {
        let n = self.grid.n();
        let a = Array2::from_shape_vec((n, n), x.to_vec()).expect("block column has n^2 entries");
        let mut c = self.grid.fft(&a);
        c.zip_mut_with(&self.k2, |z, k| *z *= *k);
        let mut out = self.grid.ifft(&c);
        out.zip_mut_with(&(&a * &self.potential), |o, v| *o += v);
        out.into_raw_vec_and_offset().0
    }

    fn apply_block(&self, x: &DMatrix<f64>) -> DMatrix<f64> {
        let mut out = DMatrix::zeros(x.nrows(), x.ncols());
        for (j, col) in x.column_iter().enumerate() {
            let v: Vec<f64> = col.iter().copied().collect();
            out.set_column(j, &nalgebra::DVector::from_vec(self.apply(&v)));
        }
        out
    }
}

fn orthonormalize(x: DMatrix<f64>) -> DMatrix<f64> {
    x.qr().q()
}

/// The `k` smallest eigenvalues of the conjugated oscillator on `grid`, with
/// residuals below `tol` (relative to the spectral bound).
pub fn oscillator_spectrum(grid: &SpectralGrid, k: usize, tol: f64) -> Result<OscillatorSpectrum> {
    if k == 0 || k > MAX_EIGENVALUES {
        return Err(Error::config("k", format!("must be in 1..={MAX_EIGENVALUES}, got {k}")));
    }
    if !(tol > 0.0) {
        return Err(Error::config("eigensolver_tol", "must be positive"));
    }
    let op = Oscillator::new(grid);
    let n2 = grid.n() * grid.n();
    let m = k + EXTRA_VECTORS;
    let upper = op.upper_bound();
    // random start confined to the region where low modes live
    let mut rng = ChaCha8Rng::seed_from_u64(0x5eed);
    let env = grid.radius_squared().mapv(|s| (-s / 16.0).exp());
    let env: Vec<f64> = env.iter().copied().collect();
    let x0 = DMatrix::from_fn(n2, m, |i, _| env[i] * rng.random_range(-1.0..1.0));
    let mut x = orthonormalize(x0);
    let mut residuals = vec![f64::INFINITY; k];
    for sweep in 1..=MAX_SWEEPS {
        // Rayleigh-Ritz
        let hx = op.apply_block(&x);
        let small = x.transpose() * &hx;
        let small = (&small + small.transpose()) * 0.5;
        let eig = SymmetricEigen::new(small);
        let mut order: Vec<usize> = (0..m).collect();
        order.sort_by(|&a, &b| eig.eigenvalues[a].total_cmp(&eig.eigenvalues[b]));
        let rot = DMatrix::from_fn(m, m, |i, j| eig.eigenvectors[(i, order[j])]);
        let theta: Vec<f64> = order.iter().map(|&i| eig.eigenvalues[i]).collect();
        x = &x * &rot;
        let hx = &hx * &rot;
        for i in 0..k {
            let r = hx.column(i) - x.column(i) * theta[i];
            residuals[i] = r.norm();
        }
        if residuals.iter().all(|r| *r < tol) {
            let col: Vec<f64> = x.column(0).iter().copied().collect();
            let n = grid.n();
            let ground = ScalarField::new(grid, Array2::from_shape_vec((n, n), col).expect("n^2 entries"))?;
            return Ok(OscillatorSpectrum {
                eigenvalues: theta[..k].to_vec(),
                residuals,
                sweeps: sweep,
                ground_state: Some(ground),
            });
        }
        // damp [a, upper], a just above the wanted part of the block
        let a = theta[m - 1];
        x = orthonormalize(chebyshev_filter(&op, &x, a, upper, FILTER_DEGREE));
    }
    Err(Error::EigenNotConverged(residuals))
}

fn chebyshev_filter(op: &Oscillator, x: &DMatrix<f64>, a: f64, b: f64, degree: usize) -> DMatrix<f64> {
    let e = 0.5 * (b - a);
    let c = 0.5 * (b + a);
    let mut prev = x.clone();
    let mut cur = (op.apply_block(x) - x * c) / e;
    for _ in 2..=degree {
        let next = (op.apply_block(&cur) - &cur * c) * (2.0 / e) - &prev;
        prev = cur;
        cur = next;
        // keep the block well scaled
        let s = cur.norm();
        if s > 1e100 {
            cur /= s;
            prev /= s;
        }
    }
    cur
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::spectral::make_grid;
    use nalgebra::SymmetricEigen;

    /// Dense 1D oscillator `-d^2 + x^2/16` with the same Fourier second
    /// derivative, solved directly; 2D levels are sums of two 1D levels.
    fn separable_levels(grid: &SpectralGrid, k: usize) -> Vec<f64> {
        let n = grid.n();
        let x = grid.coords();
        let kw = grid.wavenumbers();
        let h = DMatrix::from_fn(n, n, |i, j| {
            let mut s = 0.0;
            for &q in kw {
                s += q * q * (q * (x[i] - x[j])).cos();
            }
            s / n as f64 + if i == j { x[i] * x[i] / 16.0 } else { 0.0 }
        });
        let mut mu: Vec<f64> = SymmetricEigen::new(h).eigenvalues.iter().copied().collect();
        mu.sort_by(f64::total_cmp);
        let mut levels = Vec::new();
        for a in 0..k {
            for b in 0..k {
                levels.push(mu[a] + mu[b] - 0.5);
            }
        }
        levels.sort_by(f64::total_cmp);
        levels.truncate(k);
        levels
    }

    #[test]
    fn ground_state_alone() {
        let g = make_grid(64, 16.0).unwrap();
        let s = oscillator_spectrum(&g, 1, 1e-9).unwrap();
        assert!(s.eigenvalues[0].abs() < 1e-6);
        assert!(s.ground_cosine().unwrap() > 1.0 - 1e-8);
    }

    #[test]
    fn six_levels_match_dense_oracle() {
        let g = make_grid(128, 16.0).unwrap();
        let s = oscillator_spectrum(&g, 6, 1e-9).unwrap();
        let oracle = separable_levels(&g, 6);
        let exact = [0.0, 0.5, 0.5, 1.0, 1.0, 1.0];
        for i in 0..6 {
            assert!((s.eigenvalues[i] - oracle[i]).abs() < 1e-8, "{:?} vs {:?}", s.eigenvalues, oracle);
            assert!((s.eigenvalues[i] - exact[i]).abs() < 1e-6);
        }
        assert!(s.ground_cosine().unwrap() > 1.0 - 1e-8);
    }

    #[test]
    fn resolution_and_box_independence() {
        let a = oscillator_spectrum(&make_grid(64, 16.0).unwrap(), 3, 1e-9).unwrap();
        let b = oscillator_spectrum(&make_grid(128, 16.0).unwrap(), 3, 1e-9).unwrap();
        let c = oscillator_spectrum(&make_grid(96, 12.0).unwrap(), 3, 1e-9).unwrap();
        for i in 0..3 {
            assert!((a.eigenvalues[i] - b.eigenvalues[i]).abs() < 1e-6);
            assert!((c.eigenvalues[i] - b.eigenvalues[i]).abs() < 1e-6);
        }
    }

    #[test]
    fn rejects_bad_k() {
        let g = make_grid(32, 16.0).unwrap();
        assert!(matches!(oscillator_spectrum(&g, 0, 1e-9), Err(Error::Config { .. })));
        assert!(matches!(oscillator_spectrum(&g, 11, 1e-9), Err(Error::Config { .. })));
    }
}
