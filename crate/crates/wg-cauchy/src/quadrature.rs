//! Numerical integration on edges and simple polygons.
//!
//! Edges use Gauss-Legendre rules mapped to the physical segment. Polygons
//! (convex or not) are ear-clipped into triangles carrying either a classic
//! symmetric positive rule (low degree) or a tensor-collapsed Gauss rule
//! (higher degree); both keep all weights positive so quadrature Gram
//! matrices stay positive definite.
//!
//! [`exact_polygon_monomial_integral`] provides a closed-form divergence
//! theorem evaluation of monomial integrals, used as an independent check of
//! the composite polygon rules.

use crate::error::{Result, WgError};
use crate::{Point, Vec2};

/// Quadrature rule on a 2D region.
#[derive(Debug, Clone)]
pub struct QuadRule {
    pub points: Vec<Point>,
    pub weights: Vec<f64>,
    pub exactness_degree: usize,
}

impl QuadRule {
    pub fn integrate(&self, f: impl Fn(f64, f64) -> f64) -> f64 {
        self.points
            .iter()
            .zip(&self.weights)
            .map(|(p, w)| w * f(p.x, p.y))
            .sum()
    }

    pub fn total_weight(&self) -> f64 {
        self.weights.iter().sum()
    }
}

/// Sum of `w_i * f(p_i)`.
pub fn integrate(f: impl Fn(f64, f64) -> f64, rule: &QuadRule) -> f64 {
    rule.integrate(f)
}

/// Quadrature rule on a physical edge; carries both the arclength parameter
/// `s in [0,1]` (measured from the edge's first endpoint) and the mapped
/// physical points. Weights sum to the edge length.
#[derive(Debug, Clone)]
pub struct EdgeQuad {
    pub param: Vec<f64>,
    pub points: Vec<Point>,
    pub weights: Vec<f64>,
    pub exactness_degree: usize,
    pub length: f64,
}

impl EdgeQuad {
    pub fn integrate(&self, f: impl Fn(f64, &Point) -> f64) -> f64 {
        (0..self.param.len())
            .map(|i| self.weights[i] * f(self.param[i], &self.points[i]))
            .sum()
    }
}

// ---------------------------------------------------------------------------
// 1D Gauss-Legendre
// ---------------------------------------------------------------------------

/// Gauss-Legendre nodes and weights on [0,1], exact for degree `2n-1`.
pub fn gauss_legendre_01(n: usize) -> (Vec<f64>, Vec<f64>) {
    assert!(n >= 1, "need at least one Gauss point");
    let mut nodes = vec![0.0; n];
    let mut weights = vec![0.0; n];
    for i in 0..n {
        // Newton iteration from the Chebyshev-like initial guess.
        let mut x = (std::f64::consts::PI * (i as f64 + 0.75) / (n as f64 + 0.5)).cos();
        let mut dp = 0.0;
        for _ in 0..100 {
            let (p, d) = legendre_with_derivative(n, x);
            dp = d;
            let dx = p / d;
            x -= dx;
            if dx.abs() < 1e-16 {
                break;
            }
        }
        let (_, d) = legendre_with_derivative(n, x);
        dp = d;
        nodes[i] = 0.5 * (x + 1.0);
        weights[i] = 1.0 / ((1.0 - x * x) * dp * dp);
    }
    // Newton sweeps from the right; report nodes in increasing order.
    nodes.reverse();
    weights.reverse();
    (nodes, weights)
}

fn legendre_with_derivative(n: usize, x: f64) -> (f64, f64) {
    let mut p0 = 1.0;
    let mut p1 = x;
    for j in 2..=n {
        let jf = j as f64;
        let p2 = ((2.0 * jf - 1.0) * x * p1 - (jf - 1.0) * p0) / jf;
        p0 = p1;
        p1 = p2;
    }
    if n == 0 {
        return (1.0, 0.0);
    }
    let d = n as f64 * (x * p1 - p0) / (x * x - 1.0);
    (p1, d)
}

/// Gauss rule on the segment `a`-`b`, exact for polynomials of the arclength
/// parameter up to `degree`. Uses `ceil((degree+1)/2)` points.
pub fn edge_rule(a: &Point, b: &Point, degree: usize) -> Result<EdgeQuad> {
    let d = b - a;
    let length = d.norm();
    if length == 0.0 {
        return Err(WgError::InvalidArgument(
            "degenerate (zero-length) edge".into(),
        ));
    }
    let n = degree / 2 + 1; // = ceil((degree+1)/2)
    let (s, w01) = gauss_legendre_01(n);
    let points = s.iter().map(|&t| a + d * t).collect();
    let weights = w01.iter().map(|&w| w * length).collect();
    Ok(EdgeQuad {
        param: s,
        points,
        weights,
        exactness_degree: 2 * n - 1,
        length,
    })
}

// ---------------------------------------------------------------------------
// Triangle rules
// ---------------------------------------------------------------------------

// Classic symmetric positive rules in barycentric coordinates, weights
// normalized to sum 1. Degree 3 is served by the degree-4 rule: the usual
// 4-point degree-3 rule has a negative centroid weight.
const TRI_DEG1: &[([f64; 3], f64)] = &[([1.0 / 3.0, 1.0 / 3.0, 1.0 / 3.0], 1.0)];

const TRI_DEG2: &[([f64; 3], f64)] = &[
    ([2.0 / 3.0, 1.0 / 6.0, 1.0 / 6.0], 1.0 / 3.0),
    ([1.0 / 6.0, 2.0 / 3.0, 1.0 / 6.0], 1.0 / 3.0),
    ([1.0 / 6.0, 1.0 / 6.0, 2.0 / 3.0], 1.0 / 3.0),
];

const TRI_DEG4: &[([f64; 3], f64)] = &[
    (
        [0.108103018168070, 0.445948490915965, 0.445948490915965],
        0.223381589678011,
    ),
    (
        [0.445948490915965, 0.108103018168070, 0.445948490915965],
        0.223381589678011,
    ),
    (
        [0.445948490915965, 0.445948490915965, 0.108103018168070],
        0.223381589678011,
    ),
    (
        [0.816847572980459, 0.091576213509771, 0.091576213509771],
        0.109951743655322,
    ),
    (
        [0.091576213509771, 0.816847572980459, 0.091576213509771],
        0.109951743655322,
    ),
    (
        [0.091576213509771, 0.091576213509771, 0.816847572980459],
        0.109951743655322,
    ),
];

const TRI_DEG5: &[([f64; 3], f64)] = &[
    ([1.0 / 3.0, 1.0 / 3.0, 1.0 / 3.0], 0.225),
    (
        [0.059715871789770, 0.470142064105115, 0.470142064105115],
        0.132394152788506,
    ),
    (
        [0.470142064105115, 0.059715871789770, 0.470142064105115],
        0.132394152788506,
    ),
    (
        [0.470142064105115, 0.470142064105115, 0.059715871789770],
        0.132394152788506,
    ),
    (
        [0.797426985353087, 0.101286507323456, 0.101286507323456],
        0.125939180544827,
    ),
    (
        [0.101286507323456, 0.101286507323456, 0.797426985353087],
        0.125939180544827,
    ),
    (
        [0.101286507323456, 0.797426985353087, 0.101286507323456],
        0.125939180544827,
    ),
];

fn triangle_signed_area(a: &Point, b: &Point, c: &Point) -> f64 {
    0.5 * ((b.x - a.x) * (c.y - a.y) - (c.x - a.x) * (b.y - a.y))
}

/// Positive-weight rule on the triangle `(a, b, c)`, exact to `degree`.
pub fn triangle_rule(a: &Point, b: &Point, c: &Point, degree: usize) -> QuadRule {
    let area = triangle_signed_area(a, b, c).abs();
    let table: Option<&[([f64; 3], f64)]> = match degree {
        0 | 1 => Some(TRI_DEG1),
        2 => Some(TRI_DEG2),
        3 | 4 => Some(TRI_DEG4),
        5 => Some(TRI_DEG5),
        _ => None,
    };
    if let Some(rows) = table {
        let mut points = Vec::with_capacity(rows.len());
        let mut weights = Vec::with_capacity(rows.len());
        for &(l, w) in rows {
            points.push(Point::new(
                l[0] * a.x + l[1] * b.x + l[2] * c.x,
                l[0] * a.y + l[1] * b.y + l[2] * c.y,
            ));
            weights.push(w * area);
        }
        return QuadRule {
            points,
            weights,
            exactness_degree: degree.max(1),
        };
    }
    // Tensor-collapsed Gauss (Duffy map): x = u, y = v (1-u) on the reference
    // triangle. The extra Jacobian factor (1-u) raises the u-degree by one.
    let nu = (degree + 2).div_ceil(2);
    let nv = (degree + 1).div_ceil(2);
    let (us, wu) = gauss_legendre_01(nu);
    let (vs, wv) = gauss_legendre_01(nv);
    let mut points = Vec::with_capacity(nu * nv);
    let mut weights = Vec::with_capacity(nu * nv);
    let two_area = 2.0 * area;
    for (i, &u) in us.iter().enumerate() {
        for (j, &v) in vs.iter().enumerate() {
            let x = u;
            let y = v * (1.0 - u);
            points.push(Point::new(
                a.x + x * (b.x - a.x) + y * (c.x - a.x),
                a.y + x * (b.y - a.y) + y * (c.y - a.y),
            ));
            weights.push(wu[i] * wv[j] * (1.0 - u) * two_area);
        }
    }
    QuadRule {
        points,
        weights,
        exactness_degree: degree,
    }
}

// ---------------------------------------------------------------------------
// Ear clipping
// ---------------------------------------------------------------------------

fn orient(a: &Point, b: &Point, c: &Point) -> f64 {
    (b.x - a.x) * (c.y - a.y) - (c.x - a.x) * (b.y - a.y)
}

/// Signed (shoelace) area of a polygon; positive for CCW loops.
pub fn polygon_signed_area(pts: &[Point]) -> f64 {
    let n = pts.len();
    let mut acc = 0.0;
    for i in 0..n {
        let p = &pts[i];
        let q = &pts[(i + 1) % n];
        acc += p.x * q.y - q.x * p.y;
    }
    0.5 * acc
}

/// Triangulate a simple CCW polygon by ear clipping. Returns index triples
/// into `pts`; straight (collinear) vertices are tolerated.
pub fn ear_clip(pts: &[Point]) -> Result<Vec<[usize; 3]>> {
    let n = pts.len();
    if n < 3 {
        return Err(WgError::Geometry(format!(
            "polygon needs at least 3 vertices, got {n}"
        )));
    }
    let area = polygon_signed_area(pts);
    if area <= 0.0 {
        return Err(WgError::Geometry(
            "polygon is clockwise or degenerate".into(),
        ));
    }
    // Tolerance on twice-area quantities, relative to the polygon extent.
    let mut ext: f64 = 0.0;
    for p in pts {
        for q in pts {
            ext = ext.max((p - q).norm_squared());
        }
    }
    let eps = 1e-12 * ext.max(f64::MIN_POSITIVE);

    let mut idx: Vec<usize> = (0..n).collect();
    let mut tris = Vec::with_capacity(n - 2);
    while idx.len() > 3 {
        let m = idx.len();
        let mut clipped = false;
        for i in 0..m {
            let prev = idx[(i + m - 1) % m];
            let cur = idx[i];
            let next = idx[(i + 1) % m];
            let cross = orient(&pts[prev], &pts[cur], &pts[next]);
            if cross <= eps {
                continue; // reflex or straight corner
            }
            let blocked = idx.iter().any(|&j| {
                j != prev
                    && j != cur
                    && j != next
                    && point_in_triangle(&pts[j], &pts[prev], &pts[cur], &pts[next], eps)
            });
            if !blocked {
                tris.push([prev, cur, next]);
                idx.remove(i);
                clipped = true;
                break;
            }
        }
        if !clipped {
            return Err(WgError::Geometry(
                "ear clipping failed; polygon may be self-intersecting".into(),
            ));
        }
    }
    let t = [idx[0], idx[1], idx[2]];
    if orient(&pts[t[0]], &pts[t[1]], &pts[t[2]]).abs() > eps {
        tris.push(t);
    }
    Ok(tris)
}

fn point_in_triangle(p: &Point, a: &Point, b: &Point, c: &Point, eps: f64) -> bool {
    orient(a, b, p) >= -eps && orient(b, c, p) >= -eps && orient(c, a, p) >= -eps
}

/// Composite rule on a simple CCW polygon: ear-clipping triangulation with a
/// triangle rule of the requested exactness on each piece.
pub fn cell_rule(vertices: &[Point], degree: usize) -> Result<QuadRule> {
    let tris = ear_clip(vertices)?;
    let mut points = Vec::new();
    let mut weights = Vec::new();
    for t in &tris {
        let r = triangle_rule(&vertices[t[0]], &vertices[t[1]], &vertices[t[2]], degree);
        points.extend(r.points);
        weights.extend(r.weights);
    }
    Ok(QuadRule {
        points,
        weights,
        exactness_degree: degree,
    })
}

// ---------------------------------------------------------------------------
// Divergence-theorem oracle
// ---------------------------------------------------------------------------

fn binomial(n: usize, k: usize) -> f64 {
    let mut acc = 1.0;
    for i in 0..k.min(n - k) {
        acc = acc * (n - i) as f64 / (i + 1) as f64;
    }
    acc
}

/// Exact `integral of x^a y^b` over a simple polygon, via the divergence
/// theorem applied to `F = (x^(a+1) y^b / (a+1), 0)` with closed-form edge
/// integrals. Independent of the triangulation-based rules above.
pub fn exact_polygon_monomial_integral(vertices: &[Point], a: usize, b: usize) -> f64 {
    let n = vertices.len();
    let big_a = a + 1;
    let mut total = 0.0;
    for i in 0..n {
        let p = &vertices[i];
        let q = &vertices[(i + 1) % n];
        let d = q - p;
        // integral over t in [0,1] of (px + t dx)^(a+1) (py + t dy)^b dt
        let mut edge = 0.0;
        for ii in 0..=big_a {
            let cx = binomial(big_a, ii) * p.x.powi((big_a - ii) as i32) * d.x.powi(ii as i32);
            if cx == 0.0 {
                continue;
            }
            for jj in 0..=b {
                let cy = binomial(b, jj) * p.y.powi((b - jj) as i32) * d.y.powi(jj as i32);
                edge += cx * cy / (ii + jj + 1) as f64;
            }
        }
        // n_x dl along the edge equals dy per unit parameter
        total += edge * d.y;
    }
    total / big_a as f64
}
