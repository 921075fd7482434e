//! Per-cell discrete weak operators.
//!
//! On a cell `T` with degree-`k` weak functions `{v0, vb, vn}` the discrete
//! weak gradient and weak Laplacian of degree `k-1` are defined by the moment
//! identities
//!
//! ```text
//!   (grad_w v, psi)_T = -(v0, div psi)_T + <vb, psi.n>_dT
//!   (lap_w v, w)_T    = (v0, lap w)_T - <vb, grad w . n>_dT + <vg.n, w>_dT
//! ```
//!
//! against all `psi in [P_{k-1}(T)]^2` and `w in P_{k-1}(T)`. Only the normal
//! component of the edge gradient unknown enters any of the forms, so each
//! edge stores a single scalar flux `vn` in the stored-normal convention;
//! `vg . n_T = sigma_e * vn` with `sigma_e` the cell's normal sign.
//!
//! The stabilizer couples interior traces to the edge unknowns,
//!
//! ```text
//!   s_T(u, v) = h_T^-3 <u0 - ub, v0 - vb>_dT
//!             + h_T^-1 <(grad u0 - ug).n, (grad v0 - vg).n>_dT .
//! ```
//!
//! All three operators are realized as matrices over the local DOF vector
//! `[interior | per-edge traces | per-edge fluxes]`.

use nalgebra::{Cholesky, DMatrix, DVector};
use std::ops::Range;

use crate::error::{Result, WgError};
use crate::mesh::PolytopalMesh;
use crate::polynomial::space_dim;
use crate::polyspace::{edge_mass_matrix, CellBasis, EdgeBasis};
use crate::quadrature::{cell_rule, edge_rule, EdgeQuad};
use crate::Vec2;

/// Ordering of the local degrees of freedom of one cell:
/// `dim P_k` interior coefficients, then `k+1` trace coefficients per edge,
/// then `k` flux coefficients per edge (edges in cell-loop order).
#[derive(Debug, Clone)]
pub struct LocalDofLayout {
    pub cell: usize,
    pub k: usize,
    pub n_interior: usize,
    pub n_edges: usize,
}

impl LocalDofLayout {
    pub fn new(cell: usize, k: usize, n_edges: usize) -> Self {
        LocalDofLayout {
            cell,
            k,
            n_interior: space_dim(k),
            n_edges,
        }
    }

    pub fn n_local(&self) -> usize {
        self.n_interior + self.n_edges * (2 * self.k + 1)
    }

    pub fn interior(&self) -> Range<usize> {
        0..self.n_interior
    }

    /// Trace block of the `i`-th cell edge.
    pub fn trace(&self, i: usize) -> Range<usize> {
        let start = self.n_interior + i * (self.k + 1);
        start..start + self.k + 1
    }

    /// Flux block of the `i`-th cell edge.
    pub fn flux(&self, i: usize) -> Range<usize> {
        let start = self.n_interior + self.n_edges * (self.k + 1) + i * self.k;
        start..start + self.k
    }
}

/// Weak-operator matrices of one cell.
#[derive(Debug, Clone)]
pub struct LocalWeakOperators {
    pub layout: LocalDofLayout,
    pub basis: CellBasis,
    /// `P_{k-1}` Gram matrix.
    pub gram_km1: DMatrix<f64>,
    /// `(2 npm) x nloc` weak-gradient matrix; rows `0..npm` hold the
    /// `P_{k-1}` coefficients of the x component, the rest the y component.
    pub gradient: DMatrix<f64>,
    /// `npm x nloc` weak-Laplacian matrix.
    pub laplacian: DMatrix<f64>,
    /// `nloc x nloc` symmetric PSD stabilizer matrix.
    pub stabilizer: DMatrix<f64>,
    /// Per-edge normal signs, cell-loop order.
    pub sigma: Vec<f64>,
    pub h_t: f64,
}

impl LocalWeakOperators {
    pub fn n_local(&self) -> usize {
        self.layout.n_local()
    }

    /// Dimension of the `P_{k-1}` residual space.
    pub fn npm(&self) -> usize {
        self.gram_km1.nrows()
    }
}

/// Copies the strict upper triangle onto the lower one, making the matrix
/// bitwise symmetric.
pub(crate) fn mirror_upper(m: &mut DMatrix<f64>) {
    let n = m.nrows();
    for i in 0..n {
        for j in (i + 1)..n {
            m[(j, i)] = m[(i, j)];
        }
    }
}

/// Builds the weak gradient, weak Laplacian, and stabilizer matrices of cell
/// `c` at degree `k >= 1`.
pub fn build_local_operators(
    mesh: &PolytopalMesh,
    c: usize,
    k: usize,
) -> Result<LocalWeakOperators> {
    if k < 1 {
        return Err(WgError::InvalidArgument("degree k must be >= 1".into()));
    }
    let loop_len = mesh.cells[c].len();
    let layout = LocalDofLayout::new(c, k, loop_len);
    let npk = layout.n_interior;
    let npm = space_dim(k - 1);
    let nloc = layout.n_local();
    let basis = CellBasis::for_cell(mesh, c, k);
    let h_t = mesh.cell_h[c];

    let volume_rule = cell_rule(&mesh.cell_points(c), 2 * k)?;
    let mass = crate::polyspace::mass_matrix(&basis, &volume_rule)?;
    let gram_km1 = mass.view((0, 0), (npm, npm)).into_owned();
    let chol = Cholesky::new(gram_km1.clone())
        .ok_or_else(|| WgError::Numeric(format!("degenerate cell {c}: Gram not SPD")))?;

    let trace_basis = EdgeBasis::new(k);
    let flux_basis = EdgeBasis::new(k - 1);

    // Per-edge quadrature in the canonical (lo -> hi) parametrization shared
    // by both adjacent cells.
    struct EdgeCtx {
        quad: EdgeQuad,
        n_cell: Vec2,
        sigma: f64,
    }
    let mut edges = Vec::with_capacity(loop_len);
    for ce in &mesh.cell_edges[c] {
        let (a, b) = mesh.edge_points(ce.edge);
        edges.push(EdgeCtx {
            quad: edge_rule(&a, &b, 2 * k)?,
            n_cell: mesh.edges[ce.edge].normal * ce.sigma,
            sigma: ce.sigma,
        });
    }

    let mut phi = vec![0.0; npk];
    let mut chi = vec![0.0; k + 1];
    let mut chi_f = vec![0.0; k];

    // ---- weak gradient moments -------------------------------------------
    let mut bg = DMatrix::zeros(2 * npm, nloc);
    for (p, &w) in volume_rule.points.iter().zip(&volume_rule.weights) {
        basis.eval_all(p.x, p.y, &mut phi);
        for i in 0..npm {
            let g = basis.grad(i, p.x, p.y);
            // -(v0, div psi) with psi = (phi_i, 0) or (0, phi_i)
            for j in 0..npk {
                bg[(i, j)] -= w * phi[j] * g.x;
                bg[(npm + i, j)] -= w * phi[j] * g.y;
            }
        }
    }
    for (ei, ctx) in edges.iter().enumerate() {
        let cols = layout.trace(ei);
        for q in 0..ctx.quad.param.len() {
            let w = ctx.quad.weights[q];
            let pt = &ctx.quad.points[q];
            trace_basis.eval_all(ctx.quad.param[q], &mut chi);
            for i in 0..npm {
                let v = basis.eval(i, pt.x, pt.y);
                let wx = w * v * ctx.n_cell.x;
                let wy = w * v * ctx.n_cell.y;
                for (jj, col) in cols.clone().enumerate() {
                    bg[(i, col)] += wx * chi[jj];
                    bg[(npm + i, col)] += wy * chi[jj];
                }
            }
        }
    }
    let mut gradient = DMatrix::zeros(2 * npm, nloc);
    gradient
        .view_mut((0, 0), (npm, nloc))
        .copy_from(&chol.solve(&bg.view((0, 0), (npm, nloc)).into_owned()));
    gradient
        .view_mut((npm, 0), (npm, nloc))
        .copy_from(&chol.solve(&bg.view((npm, 0), (npm, nloc)).into_owned()));

    // ---- weak Laplacian moments ------------------------------------------
    let mut bl = DMatrix::zeros(npm, nloc);
    for (p, &w) in volume_rule.points.iter().zip(&volume_rule.weights) {
        basis.eval_all(p.x, p.y, &mut phi);
        for i in 0..npm {
            let lap = basis.laplacian(i, p.x, p.y);
            if lap != 0.0 {
                for j in 0..npk {
                    bl[(i, j)] += w * phi[j] * lap;
                }
            }
        }
    }
    for (ei, ctx) in edges.iter().enumerate() {
        let tcols = layout.trace(ei);
        let fcols = layout.flux(ei);
        for q in 0..ctx.quad.param.len() {
            let w = ctx.quad.weights[q];
            let pt = &ctx.quad.points[q];
            trace_basis.eval_all(ctx.quad.param[q], &mut chi);
            flux_basis.eval_all(ctx.quad.param[q], &mut chi_f);
            for i in 0..npm {
                // -<vb, grad w . n>
                let gn = basis.grad(i, pt.x, pt.y).dot(&ctx.n_cell);
                for (jj, col) in tcols.clone().enumerate() {
                    bl[(i, col)] -= w * gn * chi[jj];
                }
                // +<vg.n, w> with vg.n = sigma * vn
                let v = basis.eval(i, pt.x, pt.y);
                for (jj, col) in fcols.clone().enumerate() {
                    bl[(i, col)] += w * ctx.sigma * v * chi_f[jj];
                }
            }
        }
    }
    let laplacian = chol.solve(&bl);

    // ---- stabilizer --------------------------------------------------------
    let mut stabilizer = DMatrix::zeros(nloc, nloc);
    for (ei, ctx) in edges.iter().enumerate() {
        let me = edge_mass_matrix(&trace_basis, &ctx.quad);
        let me_small = edge_mass_matrix(&flux_basis, &ctx.quad);
        let chol_me = Cholesky::new(me.clone())
            .ok_or_else(|| WgError::Numeric(format!("edge Gram not SPD on cell {c}")))?;
        let chol_ms = Cholesky::new(me_small.clone())
            .ok_or_else(|| WgError::Numeric(format!("edge Gram not SPD on cell {c}")))?;

        // D: coefficients of (v0|_e - vb) in the degree-k edge basis
        let mut moments = DMatrix::zeros(k + 1, npk);
        // N: coefficients of (grad v0 . n_T - sigma vn) in the degree-(k-1) basis
        let mut moments_n = DMatrix::zeros(k, npk);
        for q in 0..ctx.quad.param.len() {
            let w = ctx.quad.weights[q];
            let pt = &ctx.quad.points[q];
            basis.eval_all(pt.x, pt.y, &mut phi);
            trace_basis.eval_all(ctx.quad.param[q], &mut chi);
            flux_basis.eval_all(ctx.quad.param[q], &mut chi_f);
            for j in 0..npk {
                let gn = basis.grad(j, pt.x, pt.y).dot(&ctx.n_cell);
                for i in 0..=k {
                    moments[(i, j)] += w * chi[i] * phi[j];
                }
                for i in 0..k {
                    moments_n[(i, j)] += w * chi_f[i] * gn;
                }
            }
        }
        let mut d = DMatrix::zeros(k + 1, nloc);
        d.view_mut((0, 0), (k + 1, npk))
            .copy_from(&chol_me.solve(&moments));
        for (jj, col) in layout.trace(ei).enumerate() {
            d[(jj, col)] = -1.0;
        }
        let mut nmat = DMatrix::zeros(k, nloc);
        nmat.view_mut((0, 0), (k, npk))
            .copy_from(&chol_ms.solve(&moments_n));
        for (jj, col) in layout.flux(ei).enumerate() {
            nmat[(jj, col)] = -ctx.sigma;
        }
        let w_jump = h_t.powi(-3);
        let w_flux = h_t.powi(-1);
        stabilizer += (d.transpose() * &me * &d) * w_jump;
        stabilizer += (nmat.transpose() * &me_small * &nmat) * w_flux;
    }
    mirror_upper(&mut stabilizer);

    Ok(LocalWeakOperators {
        layout,
        basis,
        gram_km1,
        gradient,
        laplacian,
        stabilizer,
        sigma: edges.iter().map(|e| e.sigma).collect(),
        h_t,
    })
}

/// Residual operator `R = -eps * lap_w + b . grad_w` as a matrix from local
/// DOFs to `P_{k-1}` coefficients.
pub fn residual_operator(ops: &LocalWeakOperators, eps: f64, b: Vec2) -> Result<DMatrix<f64>> {
    if eps <= 0.0 {
        return Err(WgError::InvalidArgument(format!(
            "diffusion coefficient must be positive, got {eps}"
        )));
    }
    Ok(residual_operator_unchecked(ops, eps, b))
}

pub(crate) fn residual_operator_unchecked(
    ops: &LocalWeakOperators,
    eps: f64,
    b: Vec2,
) -> DMatrix<f64> {
    let npm = ops.npm();
    let nloc = ops.n_local();
    let mut r = DMatrix::zeros(npm, nloc);
    for i in 0..npm {
        for j in 0..nloc {
            r[(i, j)] = -eps * ops.laplacian[(i, j)]
                + b.x * ops.gradient[(i, j)]
                + b.y * ops.gradient[(npm + i, j)];
        }
    }
    r
}

/// Local contribution `R^T M R + S` of the least-squares bilinear form,
/// bitwise symmetric.
pub fn local_system_matrix(ops: &LocalWeakOperators, eps: f64, b: Vec2) -> Result<DMatrix<f64>> {
    let r = residual_operator(ops, eps, b)?;
    let mut a = r.transpose() * &ops.gram_km1 * &r + &ops.stabilizer;
    mirror_upper(&mut a);
    Ok(a)
}

/// Local DOF vector of the projection `Q_h u` of a smooth function:
/// `Q0 u` on the cell, `Qb u` and `Qn(grad u . n_e)` on each edge in the
/// stored-normal convention.
pub fn local_projection_dofs(
    mesh: &PolytopalMesh,
    c: usize,
    k: usize,
    u: impl Fn(f64, f64) -> f64,
    grad_u: impl Fn(f64, f64) -> Vec2,
) -> Result<DVector<f64>> {
    use crate::polyspace::{data_cell_degree, data_edge_degree, project_cell_with_rule, project_edge};
    let layout = LocalDofLayout::new(c, k, mesh.cells[c].len());
    let mut v = DVector::zeros(layout.n_local());
    let basis = CellBasis::for_cell(mesh, c, k);
    let rule = cell_rule(&mesh.cell_points(c), data_cell_degree(k))?;
    let interior = project_cell_with_rule(&u, &basis, &rule)?;
    v.rows_mut(0, interior.len()).copy_from(&interior);
    for (ei, ce) in mesh.cell_edges[c].iter().enumerate() {
        let (a, b) = mesh.edge_points(ce.edge);
        let quad = edge_rule(&a, &b, data_edge_degree(k))?;
        let n_e = mesh.edges[ce.edge].normal;
        let tr = project_edge(|_, p| u(p.x, p.y), &EdgeBasis::new(k), &quad)?;
        v.rows_mut(layout.trace(ei).start, k + 1).copy_from(&tr);
        let fl = project_edge(
            |_, p| grad_u(p.x, p.y).dot(&n_e),
            &EdgeBasis::new(k - 1),
            &quad,
        )?;
        v.rows_mut(layout.flux(ei).start, k).copy_from(&fl);
    }
    Ok(v)
}
