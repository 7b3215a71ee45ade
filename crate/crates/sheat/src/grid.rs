//! Uniform lattices for the computational box [−L, L)² and the time
//! interval [0, T], plus sampled scalar fields on them.
//!
//! The spatial lattice has N points per axis with spacing h = 2L/N, nodes
//! x_i = −L + i·h. Its dual lattice (used by the FFT layer) carries the
//! frequencies ξ = (π/L)·m̃ with m̃ = m for m < N/2 and m − N otherwise.

use crate::geometry::{Point, PolygonDomain};
use crate::{Error, Result};

/// Square periodic lattice on [−L, L)².
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SpaceGrid {
    n: usize,
    l: f64,
}

impl SpaceGrid {
    pub fn new(n: usize, l: f64) -> Result<Self> {
        if n < 8 || !n.is_power_of_two() {
            return Err(Error::InvalidGrid(format!(
                "lattice size must be a power of two and at least 8, got {n}"
            )));
        }
        if !(l > 0.0) {
            return Err(Error::InvalidGrid(format!("box half-width must be positive, got {l}")));
        }
        Ok(SpaceGrid { n, l })
    }

    pub fn n(&self) -> usize {
        self.n
    }

    /// Half-width of the box [−L, L)².
    pub fn half_width(&self) -> f64 {
        self.l
    }

    pub fn spacing(&self) -> f64 {
        2.0 * self.l / self.n as f64
    }

    pub fn num_nodes(&self) -> usize {
        self.n * self.n
    }

    pub fn node(&self, ix: usize, iy: usize) -> Point {
        let h = self.spacing();
        [-self.l + ix as f64 * h, -self.l + iy as f64 * h]
    }

    /// Row-major flat index: x varies fastest.
    pub fn index(&self, ix: usize, iy: usize) -> usize {
        iy * self.n + ix
    }

    /// Signed frequency component for DFT index m.
    pub fn freq_component(&self, m: usize) -> f64 {
        let m_signed = if m < self.n / 2 { m as f64 } else { m as f64 - self.n as f64 };
        std::f64::consts::PI / self.l * m_signed
    }

    /// |ξ|² at DFT index (mx, my).
    pub fn freq_sq(&self, mx: usize, my: usize) -> f64 {
        let fx = self.freq_component(mx);
        let fy = self.freq_component(my);
        fx * fx + fy * fy
    }

    /// Samples a function at the lattice nodes.
    pub fn sample(&self, f: impl Fn(Point) -> f64) -> Field {
        let mut data = vec![0.0; self.num_nodes()];
        for iy in 0..self.n {
            for ix in 0..self.n {
                data[self.index(ix, iy)] = f(self.node(ix, iy));
            }
        }
        Field { grid: *self, data }
    }

    /// Indicator of the open domain D on the lattice.
    pub fn domain_mask(&self, domain: &PolygonDomain) -> Vec<bool> {
        let mut mask = vec![false; self.num_nodes()];
        for iy in 0..self.n {
            for ix in 0..self.n {
                mask[self.index(ix, iy)] = domain.contains(self.node(ix, iy));
            }
        }
        mask
    }
}

/// Scalar field sampled on a `SpaceGrid` (row-major, x fastest).
#[derive(Debug, Clone, PartialEq)]
pub struct Field {
    pub grid: SpaceGrid,
    pub data: Vec<f64>,
}

impl Field {
    pub fn zeros(grid: SpaceGrid) -> Self {
        Field { grid, data: vec![0.0; grid.num_nodes()] }
    }

    pub fn from_data(grid: SpaceGrid, data: Vec<f64>) -> Result<Self> {
        if data.len() != grid.num_nodes() {
            return Err(Error::Mismatch(format!(
                "field data length {} does not match grid with {} nodes",
                data.len(),
                grid.num_nodes()
            )));
        }
        Ok(Field { grid, data })
    }

    pub fn at(&self, ix: usize, iy: usize) -> f64 {
        self.data[self.grid.index(ix, iy)]
    }

    pub fn at_mut(&mut self, ix: usize, iy: usize) -> &mut f64 {
        let i = self.grid.index(ix, iy);
        &mut self.data[i]
    }

    /// Lᵖ norm over the full box with cell weights h².
    pub fn lp_norm(&self, p: f64) -> f64 {
        lp_norm_weighted(&self.data, None, self.grid.spacing(), p)
    }

    /// Lᵖ norm restricted to masked nodes.
    pub fn lp_norm_masked(&self, p: f64, mask: &[bool]) -> f64 {
        lp_norm_weighted(&self.data, Some(mask), self.grid.spacing(), p)
    }

    pub fn max_abs(&self) -> f64 {
        self.data.iter().fold(0.0_f64, |m, &v| m.max(v.abs()))
    }

    pub fn scale(&mut self, c: f64) {
        for v in &mut self.data {
            *v *= c;
        }
    }

    pub fn add_assign(&mut self, other: &Field) -> Result<()> {
        if other.grid != self.grid {
            return Err(Error::Mismatch("cannot add fields on different grids".into()));
        }
        for (a, b) in self.data.iter_mut().zip(&other.data) {
            *a += b;
        }
        Ok(())
    }

    /// Bilinear interpolation treating the lattice as periodic on [−L, L)².
    pub fn interp_bilinear(&self, p: Point) -> f64 {
        let n = self.grid.n();
        let h = self.grid.spacing();
        let l = self.grid.half_width();
        let fx = (p[0] + l) / h;
        let fy = (p[1] + l) / h;
        let ix = fx.floor();
        let iy = fy.floor();
        let tx = fx - ix;
        let ty = fy - iy;
        let wrap = |i: i64| -> usize { i.rem_euclid(n as i64) as usize };
        let (i0, i1) = (wrap(ix as i64), wrap(ix as i64 + 1));
        let (j0, j1) = (wrap(iy as i64), wrap(iy as i64 + 1));
        let v00 = self.at(i0, j0);
        let v10 = self.at(i1, j0);
        let v01 = self.at(i0, j1);
        let v11 = self.at(i1, j1);
        v00 * (1.0 - tx) * (1.0 - ty) + v10 * tx * (1.0 - ty) + v01 * (1.0 - tx) * ty + v11 * tx * ty
    }
}

fn lp_norm_weighted(data: &[f64], mask: Option<&[bool]>, h: f64, p: f64) -> f64 {
    assert!(p >= 1.0, "Lp norms need p >= 1, got {p}");
    let cell = h * h;
    if p.is_infinite() {
        let mut m = 0.0_f64;
        for (i, &v) in data.iter().enumerate() {
            if mask.map_or(true, |mk| mk[i]) {
                m = m.max(v.abs());
            }
        }
        return m;
    }
    if (p - 2.0).abs() < 1e-14 {
        let mut s = 0.0;
        for (i, &v) in data.iter().enumerate() {
            if mask.map_or(true, |mk| mk[i]) {
                s += v * v;
            }
        }
        return (s * cell).sqrt();
    }
    let mut s = 0.0;
    for (i, &v) in data.iter().enumerate() {
        if mask.map_or(true, |mk| mk[i]) {
            s += v.abs().powf(p);
        }
    }
    (s * cell).powf(1.0 / p)
}

/// Uniform partition of [0, T] into M steps (M + 1 nodes).
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TimeGrid {
    m: usize,
    t: f64,
}

impl TimeGrid {
    pub fn new(m: usize, t: f64) -> Result<Self> {
        if m == 0 {
            return Err(Error::InvalidGrid("need at least one time step".into()));
        }
        if !(t > 0.0) {
            return Err(Error::InvalidGrid(format!("final time must be positive, got {t}")));
        }
        Ok(TimeGrid { m, t })
    }

    pub fn steps(&self) -> usize {
        self.m
    }

    pub fn num_nodes(&self) -> usize {
        self.m + 1
    }

    pub fn final_time(&self) -> f64 {
        self.t
    }

    pub fn dt(&self) -> f64 {
        self.t / self.m as f64
    }

    pub fn node(&self, j: usize) -> f64 {
        self.t * j as f64 / self.m as f64
    }
}

/// Time-indexed stack of fields on a common spatial lattice; slice j holds
/// the field at t_j.
#[derive(Debug, Clone, PartialEq)]
pub struct SpaceTimeField {
    pub space: SpaceGrid,
    pub time: TimeGrid,
    data: Vec<f64>,
}

impl SpaceTimeField {
    pub fn zeros(space: SpaceGrid, time: TimeGrid) -> Self {
        SpaceTimeField {
            space,
            time,
            data: vec![0.0; space.num_nodes() * time.num_nodes()],
        }
    }

    pub fn slice(&self, j: usize) -> &[f64] {
        let s = self.space.num_nodes();
        &self.data[j * s..(j + 1) * s]
    }

    pub fn slice_mut(&mut self, j: usize) -> &mut [f64] {
        let s = self.space.num_nodes();
        &mut self.data[j * s..(j + 1) * s]
    }

    pub fn set_slice(&mut self, j: usize, values: &[f64]) -> Result<()> {
        if values.len() != self.space.num_nodes() {
            return Err(Error::Mismatch(format!(
                "slice length {} does not match grid with {} nodes",
                values.len(),
                self.space.num_nodes()
            )));
        }
        self.slice_mut(j).copy_from_slice(values);
        Ok(())
    }

    pub fn field_at(&self, j: usize) -> Field {
        Field { grid: self.space, data: self.slice(j).to_vec() }
    }

    pub fn add_assign(&mut self, other: &SpaceTimeField) -> Result<()> {
        if other.space != self.space || other.time != self.time {
            return Err(Error::Mismatch("cannot add fields on different space-time grids".into()));
        }
        for (a, b) in self.data.iter_mut().zip(&other.data) {
            *a += b;
        }
        Ok(())
    }

    /// Value time series at one spatial node, contiguous in memory order of
    /// the caller's buffer (used by per-node time-regularity sums).
    pub fn node_series(&self, node: usize, out: &mut Vec<f64>) {
        out.clear();
        let s = self.space.num_nodes();
        out.extend((0..self.time.num_nodes()).map(|j| self.data[j * s + node]));
    }
}
