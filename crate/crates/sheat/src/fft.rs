//! 2-D FFT utilities tied to the [−L, L)² lattice conventions.
//!
//! With nodes x_i = −L + i·h and frequencies ξ_m = (π/L)·m̃ (m̃ the signed
//! DFT index), the continuous Fourier transform of a sampled function is
//! f̂(ξ_m) = h²·(−1)^{m₁+m₂}·DFT[f]_m. When a multiplier S(ξ) is applied
//! and the transform inverted, the two phase factors cancel, so a Fourier
//! multiplier acts on raw DFT coefficients:
//!     u = IDFT[S·DFT[f]] / N².
//! Synthesizing the kernel of a multiplier (inverse transform of the symbol
//! itself) keeps one phase factor:
//!     K(x_i) = IDFT[S·(−1)^{m₁+m₂}]_i / (4L²).

use std::collections::HashMap;
use std::sync::{Arc, Mutex};

use num_complex::Complex64;
use once_cell::sync::Lazy;
use rustfft::{Fft, FftDirection, FftPlanner};

use crate::grid::{Field, SpaceGrid};

static PLANS: Lazy<Mutex<HashMap<(usize, bool), Arc<dyn Fft<f64>>>>> =
    Lazy::new(|| Mutex::new(HashMap::new()));

fn plan(n: usize, forward: bool) -> Arc<dyn Fft<f64>> {
    let mut cache = PLANS.lock().unwrap();
    cache
        .entry((n, forward))
        .or_insert_with(|| {
            let mut planner = FftPlanner::new();
            let dir = if forward { FftDirection::Forward } else { FftDirection::Inverse };
            planner.plan_fft(n, dir)
        })
        .clone()
}

fn transpose(buf: &mut [Complex64], n: usize) {
    for i in 0..n {
        for j in (i + 1)..n {
            buf.swap(i * n + j, j * n + i);
        }
    }
}

/// Unnormalized 1-D DFT in place over the whole buffer.
pub fn fft1(buf: &mut [Complex64], forward: bool) {
    plan(buf.len(), forward).process(buf);
}

/// Unnormalized 2-D DFT in place (row-major n×n).
pub fn fft2(buf: &mut [Complex64], n: usize) {
    assert_eq!(buf.len(), n * n);
    let f = plan(n, true);
    f.process(buf);
    transpose(buf, n);
    f.process(buf);
    transpose(buf, n);
}

/// Unnormalized 2-D inverse DFT in place; `ifft2(fft2(x)) == n²·x`.
pub fn ifft2(buf: &mut [Complex64], n: usize) {
    assert_eq!(buf.len(), n * n);
    let f = plan(n, false);
    f.process(buf);
    transpose(buf, n);
    f.process(buf);
    transpose(buf, n);
}

/// Raw DFT coefficients of a real field.
pub fn forward_real(field: &Field) -> Vec<Complex64> {
    let n = field.grid.n();
    let mut buf: Vec<Complex64> = field.data.iter().map(|&v| Complex64::new(v, 0.0)).collect();
    fft2(&mut buf, n);
    buf
}

/// Real field from raw DFT coefficients (normalizes by N²).
pub fn inverse_real(grid: SpaceGrid, spec: &[Complex64]) -> Field {
    let n = grid.n();
    let mut buf = spec.to_vec();
    ifft2(&mut buf, n);
    let scale = 1.0 / (n * n) as f64;
    Field {
        grid,
        data: buf.into_iter().map(|c| c.re * scale).collect(),
    }
}

/// Applies the Fourier multiplier ξ ↦ `symbol(|ξ|²)` to a field.
pub fn apply_symbol(field: &Field, symbol: impl Fn(f64) -> f64) -> Field {
    let grid = field.grid;
    let n = grid.n();
    let mut spec = forward_real(field);
    for my in 0..n {
        for mx in 0..n {
            let s = symbol(grid.freq_sq(mx, my));
            spec[my * n + mx] *= s;
        }
    }
    inverse_real(grid, &spec)
}

/// Applies a complex multiplier given componentwise frequencies.
pub fn apply_symbol_xy(field: &Field, symbol: impl Fn(f64, f64) -> Complex64) -> Field {
    let grid = field.grid;
    let n = grid.n();
    let mut spec = forward_real(field);
    for my in 0..n {
        for mx in 0..n {
            let s = symbol(grid.freq_component(mx), grid.freq_component(my));
            spec[my * n + mx] *= s;
        }
    }
    inverse_real(grid, &spec)
}

/// Samples the kernel (inverse Fourier transform) of a radial symbol on the
/// lattice: K = F⁻¹[S], with S evaluated at |ξ|².
pub fn symbol_to_kernel(grid: SpaceGrid, symbol: impl Fn(f64) -> f64) -> Field {
    let n = grid.n();
    let mut buf = vec![Complex64::new(0.0, 0.0); n * n];
    for my in 0..n {
        for mx in 0..n {
            let sign = if (mx + my) % 2 == 0 { 1.0 } else { -1.0 };
            buf[my * n + mx] = Complex64::new(symbol(grid.freq_sq(mx, my)) * sign, 0.0);
        }
    }
    ifft2(&mut buf, n);
    let l = grid.half_width();
    let scale = 1.0 / (4.0 * l * l);
    Field {
        grid,
        data: buf.into_iter().map(|c| c.re * scale).collect(),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::grid::SpaceGrid;

    #[test]
    fn round_trip_restores_field() {
        let g = SpaceGrid::new(16, 2.0).unwrap();
        let f = g.sample(|x| (x[0] * 1.3).sin() + 0.5 * (x[1] * 2.1).cos());
        let spec = forward_real(&f);
        let back = inverse_real(g, &spec);
        for (a, b) in f.data.iter().zip(&back.data) {
            assert!((a - b).abs() < 1e-12);
        }
    }

    #[test]
    fn identity_symbol_is_identity() {
        let g = SpaceGrid::new(32, 1.0).unwrap();
        let f = g.sample(|x| (x[0] + 0.3 * x[1]).tanh());
        let u = apply_symbol(&f, |_| 1.0);
        for (a, b) in f.data.iter().zip(&u.data) {
            assert!((a - b).abs() < 1e-12);
        }
    }

    #[test]
    fn parseval_for_dft() {
        let g = SpaceGrid::new(16, 1.0).unwrap();
        let f = g.sample(|x| x[0] * x[1] + 0.2);
        let spec = forward_real(&f);
        let sum_spatial: f64 = f.data.iter().map(|v| v * v).sum();
        let sum_spec: f64 = spec.iter().map(|c| c.norm_sqr()).sum();
        let n2 = (g.n() * g.n()) as f64;
        assert!((sum_spec - n2 * sum_spatial).abs() / (n2 * sum_spatial) < 1e-12);
    }

    #[test]
    fn gaussian_symbol_yields_heat_kernel() {
        // F⁻¹[e^{−t|ξ|²}](x) = (4πt)^{−1} e^{−|x|²/(4t)} in two dimensions.
        let g = SpaceGrid::new(128, 8.0).unwrap();
        let t = 0.1;
        let k = symbol_to_kernel(g, |xi2| (-t * xi2).exp());
        let mut worst = 0.0_f64;
        for iy in 0..g.n() {
            for ix in 0..g.n() {
                let p = g.node(ix, iy);
                let r2 = p[0] * p[0] + p[1] * p[1];
                let exact = (-r2 / (4.0 * t)).exp() / (4.0 * std::f64::consts::PI * t);
                worst = worst.max((k.at(ix, iy) - exact).abs());
            }
        }
        assert!(worst < 1e-12, "max kernel error {worst}");
    }

    #[test]
    fn kernel_mass_matches_symbol_at_zero() {
        // h²·ΣK = S(0) when the symbol decays inside the band.
        let g = SpaceGrid::new(64, 6.0).unwrap();
        let k = symbol_to_kernel(g, |xi2| (-0.3 * xi2).exp());
        let h = g.spacing();
        let mass: f64 = k.data.iter().sum::<f64>() * h * h;
        assert!((mass - 1.0).abs() < 1e-12, "mass {mass}");
    }

    #[test]
    fn componentwise_symbol_differentiates() {
        // i·ξ₁ acts as ∂/∂x on band-limited fields.
        let g = SpaceGrid::new(64, std::f64::consts::PI).unwrap();
        let f = g.sample(|x| (3.0 * x[0]).sin());
        let dfdx = apply_symbol_xy(&f, |fx, _| Complex64::new(0.0, fx));
        let mut worst = 0.0_f64;
        for iy in 0..g.n() {
            for ix in 0..g.n() {
                let p = g.node(ix, iy);
                worst = worst.max((dfdx.at(ix, iy) - 3.0 * (3.0 * p[0]).cos()).abs());
            }
        }
        assert!(worst < 1e-10, "max derivative error {worst}");
    }
}
