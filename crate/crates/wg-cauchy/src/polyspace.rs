//! Polynomial spaces on cells and edges: scaled monomial bases, Gram/mass
//! matrices, and L2 projections.
//!
//! Cell bases are monomials in `((x-xc)/h, (y-yc)/h)` about the cell
//! centroid, which keeps Gram-matrix conditioning independent of the mesh
//! size. Edge bases are monomials in `s - 1/2` where `s in [0,1]` runs from
//! the lower-indexed endpoint, so both cells sharing an edge see the same
//! parametrization.

use nalgebra::{Cholesky, DMatrix, DVector};

use crate::assembly::{GlobalDofMap, WgDofVector};
use crate::error::{Result, WgError};
use crate::mesh::PolytopalMesh;
use crate::polynomial::{monomial_exponents, space_dim};
use crate::quadrature::{cell_rule, edge_rule, EdgeQuad, QuadRule};
use crate::{Point, Vec2};

/// Coefficients of an L2 projection in the target basis.
pub type ProjectionResult = DVector<f64>;

/// Scaled monomial basis of `P_k` on a cell, in graded monomial order.
#[derive(Debug, Clone)]
pub struct CellBasis {
    pub degree: usize,
    pub center: Point,
    pub scale: f64,
}

impl CellBasis {
    /// Basis attached to cell `c` of the mesh: centered at the centroid,
    /// scaled by the cell diameter.
    pub fn for_cell(mesh: &PolytopalMesh, c: usize, degree: usize) -> Self {
        CellBasis {
            degree,
            center: mesh.cell_centroid[c],
            scale: mesh.cell_h[c],
        }
    }

    /// Basis with an explicit frame; `with_frame(k, origin, 1.0)` gives raw
    /// monomials.
    pub fn with_frame(degree: usize, center: Point, scale: f64) -> Self {
        CellBasis {
            degree,
            center,
            scale,
        }
    }

    pub fn dim(&self) -> usize {
        space_dim(self.degree)
    }

    fn local(&self, x: f64, y: f64) -> (f64, f64) {
        (
            (x - self.center.x) / self.scale,
            (y - self.center.y) / self.scale,
        )
    }

    pub fn eval(&self, i: usize, x: f64, y: f64) -> f64 {
        let (a, b) = monomial_exponents(i);
        let (xi, eta) = self.local(x, y);
        xi.powi(a as i32) * eta.powi(b as i32)
    }

    /// Evaluates all basis functions at `(x, y)` into `out`.
    pub fn eval_all(&self, x: f64, y: f64, out: &mut [f64]) {
        debug_assert_eq!(out.len(), self.dim());
        let (xi, eta) = self.local(x, y);
        let k = self.degree;
        let mut px = [0.0f64; 16];
        let mut py = [0.0f64; 16];
        px[0] = 1.0;
        py[0] = 1.0;
        for d in 1..=k {
            px[d] = px[d - 1] * xi;
            py[d] = py[d - 1] * eta;
        }
        let mut idx = 0;
        for d in 0..=k {
            for b in 0..=d {
                out[idx] = px[d - b] * py[b];
                idx += 1;
            }
        }
    }

    pub fn grad(&self, i: usize, x: f64, y: f64) -> Vec2 {
        let (a, b) = monomial_exponents(i);
        let (xi, eta) = self.local(x, y);
        let gx = if a == 0 {
            0.0
        } else {
            a as f64 * xi.powi(a as i32 - 1) * eta.powi(b as i32)
        };
        let gy = if b == 0 {
            0.0
        } else {
            b as f64 * xi.powi(a as i32) * eta.powi(b as i32 - 1)
        };
        Vec2::new(gx, gy) / self.scale
    }

    pub fn laplacian(&self, i: usize, x: f64, y: f64) -> f64 {
        let (a, b) = monomial_exponents(i);
        let (xi, eta) = self.local(x, y);
        let mut acc = 0.0;
        if a >= 2 {
            acc += (a * (a - 1)) as f64 * xi.powi(a as i32 - 2) * eta.powi(b as i32);
        }
        if b >= 2 {
            acc += (b * (b - 1)) as f64 * xi.powi(a as i32) * eta.powi(b as i32 - 2);
        }
        acc / (self.scale * self.scale)
    }
}

/// Monomial basis in `(s - 1/2)` on an edge parametrized by `s in [0,1]`.
#[derive(Debug, Clone, Copy)]
pub struct EdgeBasis {
    pub degree: usize,
}

impl EdgeBasis {
    pub fn new(degree: usize) -> Self {
        EdgeBasis { degree }
    }

    pub fn dim(&self) -> usize {
        self.degree + 1
    }

    pub fn eval(&self, i: usize, s: f64) -> f64 {
        (s - 0.5).powi(i as i32)
    }

    pub fn eval_all(&self, s: f64, out: &mut [f64]) {
        debug_assert_eq!(out.len(), self.dim());
        let t = s - 0.5;
        let mut p = 1.0;
        for v in out.iter_mut() {
            *v = p;
            p *= t;
        }
    }
}

// ---------------------------------------------------------------------------
// Gram matrices
// ---------------------------------------------------------------------------

/// Cell mass matrix `M_ij = integral of phi_i phi_j`.
pub fn mass_matrix(basis: &CellBasis, rule: &QuadRule) -> Result<DMatrix<f64>> {
    if rule.exactness_degree < 2 * basis.degree {
        return Err(WgError::InvalidArgument(format!(
            "rule exactness {} too low for degree-{} mass matrix",
            rule.exactness_degree, basis.degree
        )));
    }
    let n = basis.dim();
    let mut m = DMatrix::zeros(n, n);
    let mut vals = vec![0.0; n];
    for (p, &w) in rule.points.iter().zip(&rule.weights) {
        basis.eval_all(p.x, p.y, &mut vals);
        for i in 0..n {
            for j in i..n {
                m[(i, j)] += w * vals[i] * vals[j];
            }
        }
    }
    for i in 0..n {
        for j in 0..i {
            m[(i, j)] = m[(j, i)];
        }
    }
    Ok(m)
}

/// Edge mass matrix in the arclength parameter (includes the edge length).
pub fn edge_mass_matrix(basis: &EdgeBasis, quad: &EdgeQuad) -> DMatrix<f64> {
    let n = basis.dim();
    let mut m = DMatrix::zeros(n, n);
    let mut vals = vec![0.0; n];
    for (idx, &w) in quad.param.iter().zip(&quad.weights) {
        basis.eval_all(*idx, &mut vals);
        for i in 0..n {
            for j in i..n {
                m[(i, j)] += w * vals[i] * vals[j];
            }
        }
    }
    for i in 0..n {
        for j in 0..i {
            m[(i, j)] = m[(j, i)];
        }
    }
    m
}

fn cholesky_solve(
    m: DMatrix<f64>,
    rhs: DVector<f64>,
    what: &str,
) -> Result<DVector<f64>> {
    let chol = Cholesky::new(m).ok_or_else(|| {
        WgError::Numeric(format!("Gram matrix not positive definite ({what})"))
    })?;
    Ok(chol.solve(&rhs))
}

// ---------------------------------------------------------------------------
// Projections
// ---------------------------------------------------------------------------

/// L2 projection of `f` onto the span of `basis` using the given rule.
pub fn project_cell_with_rule(
    f: impl Fn(f64, f64) -> f64,
    basis: &CellBasis,
    rule: &QuadRule,
) -> Result<ProjectionResult> {
    let n = basis.dim();
    let m = mass_matrix(basis, rule)?;
    let mut rhs = DVector::zeros(n);
    let mut vals = vec![0.0; n];
    for (p, &w) in rule.points.iter().zip(&rule.weights) {
        basis.eval_all(p.x, p.y, &mut vals);
        let fv = f(p.x, p.y);
        for i in 0..n {
            rhs[i] += w * fv * vals[i];
        }
    }
    cholesky_solve(m, rhs, "cell projection")
}

/// L2 projection of `f` onto `P_k` of a mesh cell. The quadrature is exact
/// for polynomial `f` of degree `<= k`; pass an explicit elevated rule via
/// [`project_cell_with_rule`] for rough integrands.
pub fn project_cell(
    f: impl Fn(f64, f64) -> f64,
    k: usize,
    mesh: &PolytopalMesh,
    c: usize,
) -> Result<ProjectionResult> {
    let basis = CellBasis::for_cell(mesh, c, k);
    let rule = cell_rule(&mesh.cell_points(c), 2 * k)?;
    project_cell_with_rule(f, &basis, &rule)
}

/// L2-best polynomial of `f` on an edge, in the `(s - 1/2)` basis. `f`
/// receives the arclength parameter and the physical point.
pub fn project_edge(
    f: impl Fn(f64, &Point) -> f64,
    basis: &EdgeBasis,
    quad: &EdgeQuad,
) -> Result<ProjectionResult> {
    let n = basis.dim();
    let m = edge_mass_matrix(basis, quad);
    let mut rhs = DVector::zeros(n);
    let mut vals = vec![0.0; n];
    for i in 0..quad.param.len() {
        basis.eval_all(quad.param[i], &mut vals);
        let fv = f(quad.param[i], &quad.points[i]) * quad.weights[i];
        for j in 0..n {
            rhs[j] += fv * vals[j];
        }
    }
    cholesky_solve(m, rhs, "edge projection")
}

/// Evaluates an edge-basis coefficient vector at parameter `s`.
pub fn eval_edge_poly(coeffs: &DVector<f64>, s: f64) -> f64 {
    let t = s - 0.5;
    let mut acc = 0.0;
    let mut p = 1.0;
    for &c in coeffs.iter() {
        acc += c * p;
        p *= t;
    }
    acc
}

/// Quadrature exactness used when projecting smooth data onto cell spaces.
pub fn data_cell_degree(k: usize) -> usize {
    2 * k + 4
}

/// Quadrature exactness used when projecting smooth data onto edge spaces.
pub fn data_edge_degree(k: usize) -> usize {
    2 * k + 8
}

/// Projects an exact solution into the global weak space: interior values
/// `Q0 u` per cell, traces `Qb u` per edge, and normal fluxes
/// `Qn(grad u . n_e)` per edge in the stored-normal convention.
pub fn project_exact_solution(
    u: impl Fn(f64, f64) -> f64,
    grad_u: impl Fn(f64, f64) -> Vec2,
    mesh: &PolytopalMesh,
    dofs: &GlobalDofMap,
) -> Result<WgDofVector> {
    let k = dofs.k;
    let mut out = WgDofVector::zeros(dofs.n_total);
    for c in 0..mesh.n_cells() {
        let basis = CellBasis::for_cell(mesh, c, k);
        let rule = cell_rule(&mesh.cell_points(c), data_cell_degree(k))?;
        let coeffs = project_cell_with_rule(&u, &basis, &rule)?;
        out.0.rows_mut(dofs.cell_start(c), coeffs.len()).copy_from(&coeffs);
    }
    let trace_basis = EdgeBasis::new(k);
    let flux_basis = EdgeBasis::new(k - 1);
    for e in 0..mesh.n_edges() {
        let (a, b) = mesh.edge_points(e);
        let quad = edge_rule(&a, &b, data_edge_degree(k))?;
        let tr = project_edge(|_, p| u(p.x, p.y), &trace_basis, &quad)?;
        out.0.rows_mut(dofs.trace_start(e), tr.len()).copy_from(&tr);
        let n = mesh.edges[e].normal;
        let fl = project_edge(
            |_, p| grad_u(p.x, p.y).dot(&n),
            &flux_basis,
            &quad,
        )?;
        out.0.rows_mut(dofs.flux_start(e), fl.len()).copy_from(&fl);
    }
    Ok(out)
}
