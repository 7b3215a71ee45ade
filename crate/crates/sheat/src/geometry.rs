//! Planar polygonal domains: membership, boundary distance, boundary
//! quadrature, corner-based Lipschitz estimates, and the admissible
//! exponent region for the boundary-correction estimate.

use crate::{Error, Result};

pub type Point = [f64; 2];

/// Tolerance for "point lies on the boundary" decisions. Grid nodes are
/// placed on edges exactly when the domain is grid-aligned, so this only
/// needs to absorb roundoff from coordinate arithmetic.
const ON_BOUNDARY_TOL: f64 = 1e-12;

/// A simple polygon with counterclockwise-ordered vertices. Open set
/// semantics: points on the boundary do not belong to the domain.
#[derive(Debug, Clone, PartialEq)]
pub struct PolygonDomain {
    vertices: Vec<Point>,
}

impl PolygonDomain {
    /// Validates and builds a polygon. Requires at least 3 vertices,
    /// counterclockwise orientation (positive signed area), no repeated
    /// consecutive vertices, and no self-intersections.
    pub fn new(vertices: Vec<Point>) -> Result<Self> {
        if vertices.len() < 3 {
            return Err(Error::InvalidDomain(format!(
                "need at least 3 vertices, got {}",
                vertices.len()
            )));
        }
        let n = vertices.len();
        for i in 0..n {
            let a = vertices[i];
            let b = vertices[(i + 1) % n];
            if dist(a, b) < 1e-14 {
                return Err(Error::InvalidDomain(format!(
                    "repeated consecutive vertex at index {i}"
                )));
            }
        }
        let poly = PolygonDomain { vertices };
        if poly.signed_area() <= 0.0 {
            return Err(Error::InvalidDomain(
                "vertices must be counterclockwise (signed area > 0)".into(),
            ));
        }
        // non-adjacent edges must not intersect
        for i in 0..n {
            for j in (i + 1)..n {
                if j == i || (j + 1) % n == i || (i + 1) % n == j {
                    continue;
                }
                let (a, b) = poly.edge(i);
                let (c, d) = poly.edge(j);
                if segments_intersect(a, b, c, d) {
                    return Err(Error::InvalidDomain(format!(
                        "edges {i} and {j} intersect; polygon must be simple"
                    )));
                }
            }
        }
        Ok(poly)
    }

    /// Unit square (0,1)².
    pub fn unit_square() -> Self {
        PolygonDomain::new(vec![[0.0, 0.0], [1.0, 0.0], [1.0, 1.0], [0.0, 1.0]]).unwrap()
    }

    /// L-shape (0,1)² ∖ [1/2,1]², reentrant corner at (1/2, 1/2).
    pub fn l_shape() -> Self {
        PolygonDomain::new(vec![
            [0.0, 0.0],
            [1.0, 0.0],
            [1.0, 0.5],
            [0.5, 0.5],
            [0.5, 1.0],
            [0.0, 1.0],
        ])
        .unwrap()
    }

    pub fn vertices(&self) -> &[Point] {
        &self.vertices
    }

    pub fn num_edges(&self) -> usize {
        self.vertices.len()
    }

    /// Edge i runs from vertex i to vertex i+1 (cyclic).
    pub fn edge(&self, i: usize) -> (Point, Point) {
        let n = self.vertices.len();
        (self.vertices[i % n], self.vertices[(i + 1) % n])
    }

    pub fn signed_area(&self) -> f64 {
        let n = self.vertices.len();
        let mut s = 0.0;
        for i in 0..n {
            let a = self.vertices[i];
            let b = self.vertices[(i + 1) % n];
            s += a[0] * b[1] - b[0] * a[1];
        }
        0.5 * s
    }

    pub fn area(&self) -> f64 {
        self.signed_area()
    }

    pub fn perimeter(&self) -> f64 {
        (0..self.num_edges())
            .map(|i| {
                let (a, b) = self.edge(i);
                dist(a, b)
            })
            .sum()
    }

    /// Axis-aligned bounding box as ([min_x, min_y], [max_x, max_y]).
    pub fn bounding_box(&self) -> (Point, Point) {
        let mut lo = [f64::INFINITY; 2];
        let mut hi = [f64::NEG_INFINITY; 2];
        for v in &self.vertices {
            for d in 0..2 {
                lo[d] = lo[d].min(v[d]);
                hi[d] = hi[d].max(v[d]);
            }
        }
        (lo, hi)
    }

    /// True if every edge is horizontal or vertical.
    pub fn is_axis_aligned(&self) -> bool {
        (0..self.num_edges()).all(|i| {
            let (a, b) = self.edge(i);
            (a[0] - b[0]).abs() < 1e-14 || (a[1] - b[1]).abs() < 1e-14
        })
    }

    /// Lipschitz constant of the boundary read off the corners: near a vertex
    /// with interior angle θ the boundary is, in coordinates aligned with the
    /// angle bisector, the graph of a two-slope function with slope magnitude
    /// |cot(θ/2)|. Flat vertices contribute 0; a square corner contributes 1.
    pub fn lipschitz_constant(&self) -> f64 {
        let n = self.vertices.len();
        let mut worst: f64 = 0.0;
        for i in 0..n {
            let theta = self.interior_angle(i);
            worst = worst.max((0.5 * theta).tan().recip().abs());
        }
        worst
    }

    /// Interior angle at vertex i, in (0, 2π). Reentrant corners give > π.
    pub fn interior_angle(&self, i: usize) -> f64 {
        let n = self.vertices.len();
        let prev = self.vertices[(i + n - 1) % n];
        let cur = self.vertices[i];
        let next = self.vertices[(i + 1) % n];
        let e_in = [cur[0] - prev[0], cur[1] - prev[1]];
        let e_out = [next[0] - cur[0], next[1] - cur[1]];
        let turn = (cross(e_in, e_out)).atan2(dot(e_in, e_out));
        std::f64::consts::PI - turn
    }

    /// Point-in-domain test with open-set semantics: points within
    /// `ON_BOUNDARY_TOL` of the boundary return false, everything else is
    /// decided by even-odd ray casting (half-open vertical intervals per
    /// edge, so vertices are not double-counted).
    pub fn contains(&self, p: Point) -> bool {
        if self.distance_to_boundary(p) <= ON_BOUNDARY_TOL {
            return false;
        }
        let mut inside = false;
        for i in 0..self.num_edges() {
            let (a, b) = self.edge(i);
            // half-open in y: count the edge if p.y is in [min, max)
            let (ya, yb) = (a[1], b[1]);
            if (ya <= p[1]) != (yb <= p[1]) {
                let t = (p[1] - ya) / (yb - ya);
                let x_cross = a[0] + t * (b[0] - a[0]);
                if x_cross > p[0] {
                    inside = !inside;
                }
            }
        }
        inside
    }

    /// Euclidean distance from `p` to ∂D (zero on the boundary, positive
    /// on both sides).
    pub fn distance_to_boundary(&self, p: Point) -> f64 {
        (0..self.num_edges())
            .map(|i| {
                let (a, b) = self.edge(i);
                point_segment_distance(p, a, b)
            })
            .fold(f64::INFINITY, f64::min)
    }

    /// Midpoint-rule quadrature along ∂D. Each edge is split into
    /// `ceil(length * density)` equal panels; a node sits at each panel
    /// midpoint and carries the panel length as weight, so the weights sum
    /// to the perimeter exactly (up to roundoff). Nodes are ordered by
    /// arclength starting from vertex 0.
    pub fn boundary_quadrature(&self, density: f64) -> Result<BoundaryQuadrature> {
        if !(density > 0.0) {
            return Err(Error::InvalidParameter(format!(
                "quadrature density must be positive, got {density}"
            )));
        }
        let mut nodes = Vec::new();
        let mut offset = 0.0;
        for i in 0..self.num_edges() {
            let (a, b) = self.edge(i);
            let len = dist(a, b);
            let panels = (len * density).ceil().max(1.0) as usize;
            let w = len / panels as f64;
            for j in 0..panels {
                let s = (j as f64 + 0.5) * w;
                let t = s / len;
                nodes.push(BoundaryNode {
                    point: [a[0] + t * (b[0] - a[0]), a[1] + t * (b[1] - a[1])],
                    weight: w,
                    arclength: offset + s,
                    edge: i,
                });
            }
            offset += len;
        }
        Ok(BoundaryQuadrature {
            nodes,
            perimeter: offset,
        })
    }
}

/// One node of a boundary quadrature rule.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BoundaryNode {
    pub point: Point,
    pub weight: f64,
    /// Distance along ∂D from vertex 0 to this node.
    pub arclength: f64,
    /// Index of the edge carrying the node.
    pub edge: usize,
}

/// Ordered midpoint quadrature rule on ∂D.
#[derive(Debug, Clone, PartialEq)]
pub struct BoundaryQuadrature {
    pub nodes: Vec<BoundaryNode>,
    pub perimeter: f64,
}

impl BoundaryQuadrature {
    /// Geodesic (along-the-curve) distance between two nodes.
    pub fn arc_distance(&self, i: usize, j: usize) -> f64 {
        let d = (self.nodes[i].arclength - self.nodes[j].arclength).abs();
        d.min(self.perimeter - d)
    }
}

/// The two built-in domain shapes. The square is smooth enough for every
/// estimate in the laboratory; the L-shape exercises the reentrant corner.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum DomainShape {
    UnitSquare,
    LShape,
}

impl DomainShape {
    pub fn domain(self) -> PolygonDomain {
        match self {
            DomainShape::UnitSquare => PolygonDomain::unit_square(),
            DomainShape::LShape => PolygonDomain::l_shape(),
        }
    }
}

/// Exponent-region parameters: Lebesgue exponent p, smoothness k, and the
/// boundary-opening parameter ε ∈ (0, 1] (ε = 1 corresponds to the smooth
/// case; smaller ε shrinks the admissible region).
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RegionParams {
    pub p: f64,
    pub k: f64,
    pub eps: f64,
}

impl RegionParams {
    pub fn validate(&self) -> Result<()> {
        if !(self.p > 1.0) {
            return Err(Error::InvalidParameter(format!("p must exceed 1, got {}", self.p)));
        }
        if !(self.eps > 0.0 && self.eps <= 1.0) {
            return Err(Error::InvalidParameter(format!(
                "eps must lie in (0, 1], got {}",
                self.eps
            )));
        }
        Ok(())
    }
}

/// Membership in the admissible region R_ε of the (1/p, k) plane.
///
/// The published inequalities use p where the plane is drawn in 1/p, and read
/// literally in p two of the three cases are empty. This function uses the
/// geometric reading: with x = 1/p, p₀ = ½ + ½ε, p₀′ = ½ − ½ε, the region is
/// the union of
///   1. p₀′ < x < p₀ and 0 < k < 1,
///   2. p₀ ≤ x < 1 and 2x − 1 − ε < k < 1,
///   3. 0 < x ≤ p₀′ and 0 < k < 2x + ε,
/// a convex polygon bounded by k = 0, k = 1, k = 2x + ε and k = 2x − 1 − ε,
/// continuous across the case boundaries. `region_diagnostic` also reports
/// the literal-substitution reading for comparison.
pub fn in_region_r_eps(params: RegionParams) -> Result<bool> {
    params.validate()?;
    Ok(region_diagnostic(params)?.geometric)
}

/// Both readings of the published region inequalities.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct RegionDiagnostic {
    /// Bounds transferred to x = 1/p with case ranges ordered so each case is
    /// a nonempty band; this is the reading `in_region_r_eps` uses.
    pub geometric: bool,
    /// Verbatim substitution x = 1/p into the published inequalities
    /// (leaves cases 1 and 2 empty and case 3 with the range x ≥ p₀′).
    pub literal: bool,
}

pub fn region_diagnostic(params: RegionParams) -> Result<RegionDiagnostic> {
    params.validate()?;
    let x = 1.0 / params.p;
    let k = params.k;
    let eps = params.eps;
    let p0 = 0.5 + 0.5 * eps;
    let p0p = 0.5 - 0.5 * eps;

    let case1 = p0p < x && x < p0 && 0.0 < k && k < 1.0;
    let case2 = p0 <= x && x < 1.0 && 2.0 * x - 1.0 - eps < k && k < 1.0;
    let case3 = 0.0 < x && x <= p0p && 0.0 < k && k < 2.0 * x + eps;
    let geometric = case1 || case2 || case3;

    let lit1 = p0 < x && x < p0p && 0.0 < k && k < 1.0;
    let lit2 = 1.0 < x && x <= p0 && 2.0 * x - 1.0 - eps < k && k < 1.0;
    let lit3 = p0p <= x && 0.0 < k && k < 2.0 * x + eps;
    let literal = lit1 || lit2 || lit3;

    Ok(RegionDiagnostic { geometric, literal })
}

fn dot(a: Point, b: Point) -> f64 {
    a[0] * b[0] + a[1] * b[1]
}

fn cross(a: Point, b: Point) -> f64 {
    a[0] * b[1] - a[1] * b[0]
}

pub(crate) fn dist(a: Point, b: Point) -> f64 {
    (a[0] - b[0]).hypot(a[1] - b[1])
}

fn point_segment_distance(p: Point, a: Point, b: Point) -> f64 {
    let ab = [b[0] - a[0], b[1] - a[1]];
    let ap = [p[0] - a[0], p[1] - a[1]];
    let len2 = dot(ab, ab);
    let t = if len2 > 0.0 { (dot(ap, ab) / len2).clamp(0.0, 1.0) } else { 0.0 };
    dist(p, [a[0] + t * ab[0], a[1] + t * ab[1]])
}

/// Proper intersection test for segments, used by the simplicity check.
/// Touching at shared endpoints is filtered out by the caller (adjacent
/// edges are skipped); collinear overlap counts as an intersection.
fn segments_intersect(a: Point, b: Point, c: Point, d: Point) -> bool {
    let d1 = cross([b[0] - a[0], b[1] - a[1]], [c[0] - a[0], c[1] - a[1]]);
    let d2 = cross([b[0] - a[0], b[1] - a[1]], [d[0] - a[0], d[1] - a[1]]);
    let d3 = cross([d[0] - c[0], d[1] - c[1]], [a[0] - c[0], a[1] - c[1]]);
    let d4 = cross([d[0] - c[0], d[1] - c[1]], [b[0] - c[0], b[1] - c[1]]);
    if ((d1 > 0.0 && d2 < 0.0) || (d1 < 0.0 && d2 > 0.0))
        && ((d3 > 0.0 && d4 < 0.0) || (d3 < 0.0 && d4 > 0.0))
    {
        return true;
    }
    // collinear overlap
    let on = |u: Point, v: Point, w: Point| -> bool {
        cross([v[0] - u[0], v[1] - u[1]], [w[0] - u[0], w[1] - u[1]]).abs() < 1e-14
            && w[0] >= u[0].min(v[0]) - 1e-14
            && w[0] <= u[0].max(v[0]) + 1e-14
            && w[1] >= u[1].min(v[1]) - 1e-14
            && w[1] <= u[1].max(v[1]) + 1e-14
    };
    on(a, b, c) || on(a, b, d) || on(c, d, a) || on(c, d, b)
}
