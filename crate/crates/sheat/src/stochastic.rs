//! Brownian increments, ensembles, bridge refinement, and left-endpoint
//! Itô integration.
//!
//! Determinism contract: a driver is fully determined by (base seed, stream,
//! refinement level, time grid). Ensembles assign one ChaCha stream per
//! sample, so adding samples never perturbs existing ones, and refining a
//! path draws its bridge midpoints from a generator derived from the level,
//! so every refinement level of the same path is reproducible and coupled
//! to the coarser ones.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};

use crate::grid::TimeGrid;
use crate::{Error, Result};

/// Stable 64-bit mixer used to derive per-level seeds.
fn mix_seed(a: u64, b: u64) -> u64 {
    let mut z = a
        .wrapping_add(0x9E37_79B9_7F4A_7C15)
        .wrapping_add(b.wrapping_mul(0xBF58_476D_1CE4_E5B9));
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// One scalar Brownian path represented by its increments on a uniform
/// grid: `increments[j]` is w(t_{j+1}) − w(t_j).
#[derive(Debug, Clone, PartialEq)]
pub struct BrownianDriver {
    time: TimeGrid,
    base_seed: u64,
    stream: u64,
    level: u32,
    increments: Vec<f64>,
}

impl BrownianDriver {
    /// Fresh path on `time` from (seed, stream).
    pub fn new(time: TimeGrid, base_seed: u64, stream: u64) -> Self {
        let mut rng = ChaCha8Rng::seed_from_u64(base_seed);
        rng.set_stream(stream);
        let sd = time.dt().sqrt();
        let increments = (0..time.steps())
            .map(|_| sd * <StandardNormal as Distribution<f64>>::sample(&StandardNormal, &mut rng))
            .collect();
        BrownianDriver { time, base_seed, stream, level: 0, increments }
    }

    /// Wraps externally supplied increments (used when a transformed copy of
    /// an existing path is needed, e.g. under a parabolic rescaling).
    pub fn from_increments(time: TimeGrid, increments: Vec<f64>) -> Result<Self> {
        if increments.len() != time.steps() {
            return Err(Error::Mismatch(format!(
                "{} increments for a grid with {} steps",
                increments.len(),
                time.steps()
            )));
        }
        Ok(BrownianDriver { time, base_seed: 0, stream: 0, level: 0, increments })
    }

    pub fn time(&self) -> TimeGrid {
        self.time
    }

    pub fn increments(&self) -> &[f64] {
        &self.increments
    }

    pub fn level(&self) -> u32 {
        self.level
    }

    /// Path values at the grid nodes, starting from w(0) = 0; length M + 1.
    pub fn path(&self) -> Vec<f64> {
        let mut w = Vec::with_capacity(self.increments.len() + 1);
        let mut acc = 0.0;
        w.push(acc);
        for &dw in &self.increments {
            acc += dw;
            w.push(acc);
        }
        w
    }

    /// Midpoint (bridge) refinement onto the doubled grid: each increment
    /// Δw over a step of width δ splits into Δw/2 + ξ and Δw/2 − ξ with
    /// ξ ~ N(0, δ/4), which preserves the law of the path and keeps the
    /// coarse increments as pairwise sums of the fine ones.
    pub fn refine(&self) -> Self {
        let fine_time = TimeGrid::new(2 * self.time.steps(), self.time.final_time()).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(mix_seed(self.base_seed, self.level as u64 + 1));
        rng.set_stream(self.stream);
        let sd = (0.25 * self.time.dt()).sqrt();
        let mut fine = Vec::with_capacity(2 * self.increments.len());
        for &dw in &self.increments {
            let xi: f64 =
                sd * <StandardNormal as Distribution<f64>>::sample(&StandardNormal, &mut rng);
            fine.push(0.5 * dw + xi);
            fine.push(0.5 * dw - xi);
        }
        BrownianDriver {
            time: fine_time,
            base_seed: self.base_seed,
            stream: self.stream,
            level: self.level + 1,
            increments: fine,
        }
    }
}

/// Single-path entry point: the path of (seed, stream 0) on `time`.
pub fn sample_brownian(time: TimeGrid, seed: u64) -> BrownianDriver {
    BrownianDriver::new(time, seed, 0)
}

/// Independent paths sharing a base seed, one ChaCha stream per sample.
pub fn ensemble(time: TimeGrid, base_seed: u64, count: usize) -> Vec<BrownianDriver> {
    (0..count).map(|s| BrownianDriver::new(time, base_seed, s as u64)).collect()
}

/// Recipe for a family of independent sample paths: a base seed and a
/// sample count. Sample s always draws from ChaCha stream s of the base
/// seed, so enlarging the ensemble or re-running a subset reproduces the
/// same paths.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct SampleEnsemble {
    pub base_seed: u64,
    pub count: usize,
}

impl SampleEnsemble {
    pub fn new(base_seed: u64, count: usize) -> Self {
        SampleEnsemble { base_seed, count }
    }

    /// The driver of one sample.
    pub fn driver(&self, time: TimeGrid, sample: usize) -> BrownianDriver {
        BrownianDriver::new(time, self.base_seed, sample as u64)
    }

    /// All drivers of the ensemble.
    pub fn drivers(&self, time: TimeGrid) -> Vec<BrownianDriver> {
        ensemble(time, self.base_seed, self.count)
    }
}

/// Left-endpoint Itô integral ∫₀ᵀ K dw ≈ Σ_j K(t_j)·(w(t_{j+1}) − w(t_j)).
/// `integrand[j]` is K at the left node t_j, one value per step.
pub fn ito_integrate(integrand: &[f64], driver: &BrownianDriver) -> Result<f64> {
    if integrand.len() != driver.increments.len() {
        return Err(Error::Mismatch(format!(
            "{} integrand values for {} increments",
            integrand.len(),
            driver.increments.len()
        )));
    }
    Ok(integrand.iter().zip(&driver.increments).map(|(k, dw)| k * dw).sum())
}

/// Monte-Carlo variance of ∫ K dw against the Itô isometry value Σ K(t_j)² Δt.
/// The integral has mean zero, so its sample second moment is the variance.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct IsometryReport {
    /// Sample variance of the Itô integral over the ensemble.
    pub mc_variance: f64,
    /// Deterministic quadrature of ∫ K² dt on the same grid.
    pub quadrature_variance: f64,
    pub samples: usize,
}

impl IsometryReport {
    pub fn ratio(&self) -> f64 {
        self.mc_variance / self.quadrature_variance
    }

    pub fn relative_error(&self) -> f64 {
        (self.mc_variance - self.quadrature_variance).abs() / self.quadrature_variance
    }
}

pub fn isometry_report(
    time: TimeGrid,
    base_seed: u64,
    samples: usize,
    integrand: &[f64],
) -> Result<IsometryReport> {
    let mut acc = 0.0;
    for s in 0..samples {
        let driver = BrownianDriver::new(time, base_seed, s as u64);
        let v = ito_integrate(integrand, &driver)?;
        acc += v * v;
    }
    let quadrature_variance = integrand.iter().map(|k| k * k).sum::<f64>() * time.dt();
    Ok(IsometryReport {
        mc_variance: acc / samples as f64,
        quadrature_variance,
        samples,
    })
}

/// Left- and right-endpoint Riemann sums of ∫ w dw along one path. Their
/// gap is Σ (Δw)², with mean T: the Itô correction that separates the
/// adapted (left-endpoint) integral from the anticipating one. A scheme
/// that accidentally evaluated its integrand at the right endpoint would
/// show up here as a bias of size T.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EndpointProbe {
    pub left: f64,
    pub right: f64,
    pub gap: f64,
}

pub fn endpoint_probe(driver: &BrownianDriver) -> EndpointProbe {
    let w = driver.path();
    let mut left = 0.0;
    let mut right = 0.0;
    for (j, &dw) in driver.increments().iter().enumerate() {
        left += w[j] * dw;
        right += w[j + 1] * dw;
    }
    EndpointProbe { left, right, gap: right - left }
}
