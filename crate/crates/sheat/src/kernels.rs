//! Heat and parabolic Bessel kernels on the plane, and spectral semigroup
//! convolution on the periodic lattice.

use crate::grid::Field;
use crate::numerics::gamma;
use crate::{Error, Result};

/// Planar heat kernel Γ(t, x) = (4πt)⁻¹ e^{−|x|²/4t} for t > 0, and 0 for
/// t ≤ 0 (the kernel carries the indicator of positive time).
pub fn heat_kernel(t: f64, x: [f64; 2]) -> f64 {
    if t <= 0.0 {
        return 0.0;
    }
    let r2 = x[0] * x[0] + x[1] * x[1];
    (-r2 / (4.0 * t)).exp() / (4.0 * std::f64::consts::PI * t)
}

/// Normalization constant c_l = (4π)^{−n/2} / Γ(l/2) with n = 2. This is the
/// constant produced by inverting the space-time symbol (1 + iτ + |ξ|²)^{−l/2}
/// (Laplace transform in τ, then a Gaussian in ξ); it makes c₂ = 1/(4π).
pub fn bessel_normalization(l: f64) -> f64 {
    1.0 / (4.0 * std::f64::consts::PI * gamma(0.5 * l))
}

/// Parabolic Bessel kernel of order l > 0 on the plane, the inverse space-time
/// Fourier transform of (1 + iτ + |ξ|²)^{−l/2}:
///
/// Π_l(t, x) = c_l · t^{l/2 − 2} · e^{−t} · e^{−|x|²/4t}   for t > 0,
///
/// and 0 for t ≤ 0. The unit shift in the symbol contributes the e^{−t}
/// damping, so Π₂(t, x) = e^{−t} Γ(t, x) pointwise.
pub fn parabolic_bessel(l: f64, t: f64, x: [f64; 2]) -> Result<f64> {
    if l <= 0.0 {
        return Err(Error::Unsupported(format!(
            "pointwise parabolic Bessel kernel needs order l > 0, got {l}"
        )));
    }
    if t <= 0.0 {
        return Ok(0.0);
    }
    let r2 = x[0] * x[0] + x[1] * x[1];
    Ok(bessel_normalization(l) * t.powf(0.5 * l - 2.0) * (-t - r2 / (4.0 * t)).exp())
}

/// Heat semigroup convolution Γ(t,·) ∗ f on the periodic lattice, applied as
/// the Fourier multiplier e^{−t|ξ|²}. Exact identity at t = 0; conserves the
/// lattice mean exactly (the symbol is 1 at ξ = 0).
pub fn heat_convolve(field: &Field, t: f64) -> Result<Field> {
    if t < 0.0 {
        return Err(Error::InvalidParameter(format!(
            "semigroup time must be nonnegative, got {t}"
        )));
    }
    if t == 0.0 {
        return Ok(field.clone());
    }
    Ok(crate::fft::apply_symbol(field, |xi2| (-t * xi2).exp()))
}
