//! Global DOF numbering, Cauchy-data imposition, and assembly of the
//! least-squares system.
//!
//! Global numbering is block-wise: all cell-interior coefficients, then all
//! edge-trace coefficients, then all edge-flux coefficients, each in index
//! order. Trace and flux unknowns are single-valued per edge and shared by
//! both adjacent cells; the per-cell normal sign `sigma_e` lives inside the
//! local operators, so scattering needs no sign flips.
//!
//! Cauchy data on Gamma1 (trace = `Qb g1`, flux = `Qn g2`) is imposed by
//! symmetric elimination: constrained columns are moved to the right-hand
//! side and the constrained rows/columns dropped, which keeps the reduced
//! matrix exactly symmetric positive definite.

use nalgebra::{DMatrix, DVector};

use crate::error::{Result, WgError};
use crate::mesh::{EdgeTag, PolytopalMesh};
use crate::polynomial::space_dim;
use crate::polyspace::{data_edge_degree, project_edge, EdgeBasis};
use crate::quadrature::{cell_rule, edge_rule};
use crate::sparse::CsrMatrix;
use crate::weakops::{
    build_local_operators, local_system_matrix, residual_operator_unchecked, LocalWeakOperators,
};
use crate::{Point, Vec2};

/// Block offsets of the global DOF numbering.
#[derive(Debug, Clone)]
pub struct GlobalDofMap {
    pub k: usize,
    pub n_cells: usize,
    pub n_edges: usize,
    /// dim P_k per cell.
    pub np: usize,
    pub n_total: usize,
}

impl GlobalDofMap {
    pub fn new(mesh: &PolytopalMesh, k: usize) -> Result<GlobalDofMap> {
        if k < 1 {
            return Err(WgError::InvalidArgument("degree k must be >= 1".into()));
        }
        let np = space_dim(k);
        let n_cells = mesh.n_cells();
        let n_edges = mesh.n_edges();
        Ok(GlobalDofMap {
            k,
            n_cells,
            n_edges,
            np,
            n_total: n_cells * np + n_edges * (2 * k + 1),
        })
    }

    pub fn cell_start(&self, c: usize) -> usize {
        c * self.np
    }

    pub fn trace_start(&self, e: usize) -> usize {
        self.n_cells * self.np + e * (self.k + 1)
    }

    pub fn flux_start(&self, e: usize) -> usize {
        self.n_cells * self.np + self.n_edges * (self.k + 1) + e * self.k
    }

    /// Global indices of cell `c`'s local DOFs, in local order.
    pub fn local_to_global(&self, mesh: &PolytopalMesh, c: usize) -> Vec<usize> {
        let edges = &mesh.cell_edges[c];
        let mut idx = Vec::with_capacity(self.np + edges.len() * (2 * self.k + 1));
        idx.extend(self.cell_start(c)..self.cell_start(c) + self.np);
        for ce in edges {
            let t = self.trace_start(ce.edge);
            idx.extend(t..t + self.k + 1);
        }
        for ce in edges {
            let f = self.flux_start(ce.edge);
            idx.extend(f..f + self.k);
        }
        idx
    }

    /// All trace and flux DOFs of Gamma1 edges, ascending.
    pub fn constrained_dofs(&self, mesh: &PolytopalMesh) -> Vec<usize> {
        let mut dofs = Vec::new();
        for e in 0..mesh.n_edges() {
            if mesh.edges[e].tag == EdgeTag::Gamma1 {
                let t = self.trace_start(e);
                dofs.extend(t..t + self.k + 1);
            }
        }
        for e in 0..mesh.n_edges() {
            if mesh.edges[e].tag == EdgeTag::Gamma1 {
                let f = self.flux_start(e);
                dofs.extend(f..f + self.k);
            }
        }
        dofs
    }
}

/// Global coefficient vector over the weak space: interior values per cell,
/// traces and normal fluxes per edge.
#[derive(Debug, Clone)]
pub struct WgDofVector(pub DVector<f64>);

impl WgDofVector {
    pub fn zeros(n: usize) -> Self {
        WgDofVector(DVector::zeros(n))
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.len() == 0
    }

    /// Gathers the local DOF vector of cell `c`.
    pub fn local(&self, mesh: &PolytopalMesh, dofs: &GlobalDofMap, c: usize) -> DVector<f64> {
        let idx = dofs.local_to_global(mesh, c);
        DVector::from_iterator(idx.len(), idx.iter().map(|&g| self.0[g]))
    }
}

impl std::ops::Sub<&WgDofVector> for &WgDofVector {
    type Output = WgDofVector;
    fn sub(self, rhs: &WgDofVector) -> WgDofVector {
        WgDofVector(&self.0 - &rhs.0)
    }
}

/// Prescribed values on the constrained (Gamma1) DOFs, sorted by DOF index.
#[derive(Debug, Clone, Default)]
pub struct CauchyData {
    pub dofs: Vec<usize>,
    pub values: Vec<f64>,
}

impl CauchyData {
    pub fn homogeneous(dofs: &GlobalDofMap, mesh: &PolytopalMesh) -> CauchyData {
        let d = dofs.constrained_dofs(mesh);
        let n = d.len();
        let mut out = CauchyData {
            dofs: d,
            values: vec![0.0; n],
        };
        out.sort();
        out
    }

    fn sort(&mut self) {
        let mut pairs: Vec<(usize, f64)> = self
            .dofs
            .iter()
            .copied()
            .zip(self.values.iter().copied())
            .collect();
        pairs.sort_unstable_by_key(|p| p.0);
        self.dofs = pairs.iter().map(|p| p.0).collect();
        self.values = pairs.iter().map(|p| p.1).collect();
    }
}

/// Projects the Cauchy pair onto the Gamma1 edge spaces: traces get
/// `Qb g1`, fluxes get `Qn g2`. `g2` receives the physical point and the
/// outward normal of the edge.
pub fn interpolate_cauchy_data(
    g1: impl Fn(f64, f64) -> f64,
    g2: impl Fn(&Point, &Vec2) -> f64,
    mesh: &PolytopalMesh,
    dofs: &GlobalDofMap,
) -> Result<CauchyData> {
    let k = dofs.k;
    let trace_basis = EdgeBasis::new(k);
    let flux_basis = EdgeBasis::new(k - 1);
    let mut data = CauchyData::default();
    for e in mesh.gamma1_edges() {
        let (a, b) = mesh.edge_points(e);
        let quad = edge_rule(&a, &b, data_edge_degree(k))?;
        let tr = project_edge(|_, p| g1(p.x, p.y), &trace_basis, &quad)?;
        for (i, &v) in tr.iter().enumerate() {
            data.dofs.push(dofs.trace_start(e) + i);
            data.values.push(v);
        }
        let n = mesh.edges[e].normal; // outward on boundary edges
        let fl = project_edge(|_, p| g2(p, &n), &flux_basis, &quad)?;
        for (i, &v) in fl.iter().enumerate() {
            data.dofs.push(dofs.flux_start(e) + i);
            data.values.push(v);
        }
    }
    data.sort();
    Ok(data)
}

/// Builds every cell's weak operators. The per-cell computation is pure, so
/// callers may share the result across assembly and norm evaluations.
pub fn build_local_ops(mesh: &PolytopalMesh, k: usize) -> Result<Vec<LocalWeakOperators>> {
    (0..mesh.n_cells())
        .map(|c| build_local_operators(mesh, c, k))
        .collect()
}

#[derive(Debug, Clone, Default)]
pub struct AssemblyOptions {
    /// Quadrature exactness for the load moments; defaults to `2k + 4`.
    pub f_quadrature_degree: Option<usize>,
}

/// Assembled least-squares system on the free (non-Gamma1) DOFs.
#[derive(Debug, Clone)]
pub struct SparseSpdSystem {
    pub matrix: CsrMatrix,
    pub rhs: DVector<f64>,
    /// free index -> global DOF
    pub free_dofs: Vec<usize>,
    /// global DOF -> free index (usize::MAX when constrained)
    pub dof_to_free: Vec<usize>,
    pub constrained: CauchyData,
    pub n_total: usize,
}

impl SparseSpdSystem {
    pub fn n_free(&self) -> usize {
        self.free_dofs.len()
    }

    /// Expands a free-DOF solution to the full coefficient vector, filling
    /// in the prescribed Cauchy values.
    pub fn expand(&self, x: &DVector<f64>) -> WgDofVector {
        let mut full = DVector::zeros(self.n_total);
        for (i, &g) in self.free_dofs.iter().enumerate() {
            full[g] = x[i];
        }
        for (i, &g) in self.constrained.dofs.iter().enumerate() {
            full[g] = self.constrained.values[i];
        }
        WgDofVector(full)
    }

    /// Restriction of a full vector to the free DOFs.
    pub fn restrict(&self, v: &WgDofVector) -> DVector<f64> {
        DVector::from_iterator(
            self.free_dofs.len(),
            self.free_dofs.iter().map(|&g| v.0[g]),
        )
    }
}

/// Assembles `a(u, v) = sum_T (f, -eps lap_w v + b . grad_w v)_T` over the
/// free DOFs with the Cauchy values eliminated symmetrically.
pub fn assemble(
    mesh: &PolytopalMesh,
    dofs: &GlobalDofMap,
    ops: &[LocalWeakOperators],
    eps: f64,
    b: Vec2,
    f: impl Fn(f64, f64) -> f64,
    data: &CauchyData,
    options: &AssemblyOptions,
) -> Result<SparseSpdSystem> {
    if eps <= 0.0 {
        return Err(WgError::InvalidArgument(format!(
            "diffusion coefficient must be positive, got {eps}"
        )));
    }
    let n = dofs.n_total;
    // constrained lookup
    let mut constrained_value = vec![f64::NAN; n];
    let mut is_constrained = vec![false; n];
    for (i, &d) in data.dofs.iter().enumerate() {
        if d >= n {
            return Err(WgError::InvalidArgument(format!(
                "constrained DOF {d} out of range"
            )));
        }
        is_constrained[d] = true;
        constrained_value[d] = data.values[i];
    }
    let mut dof_to_free = vec![usize::MAX; n];
    let mut free_dofs = Vec::with_capacity(n - data.dofs.len());
    for g in 0..n {
        if !is_constrained[g] {
            dof_to_free[g] = free_dofs.len();
            free_dofs.push(g);
        }
    }
    if free_dofs.is_empty() {
        return Err(WgError::InvalidArgument(
            "all DOFs are constrained; nothing to solve".into(),
        ));
    }

    let f_degree = options.f_quadrature_degree.unwrap_or(2 * dofs.k + 4);
    let mut triplets: Vec<(u32, u32, f64)> = Vec::new();
    let mut rhs = DVector::zeros(free_dofs.len());

    for c in 0..mesh.n_cells() {
        let op = &ops[c];
        let a_loc = local_system_matrix(op, eps, b)?;
        let r = residual_operator_unchecked(op, eps, b);
        // load moments (f, phi_i) against the P_{k-1} basis
        let npm = op.npm();
        let rule = cell_rule(&mesh.cell_points(c), f_degree)?;
        let mut fm = DVector::zeros(npm);
        for (p, &w) in rule.points.iter().zip(&rule.weights) {
            let fv = f(p.x, p.y) * w;
            for i in 0..npm {
                fm[i] += fv * op.basis.eval(i, p.x, p.y);
            }
        }
        let f_loc = r.transpose() * fm;

        let gidx = dofs.local_to_global(mesh, c);
        for (il, &gi) in gidx.iter().enumerate() {
            let fi = dof_to_free[gi];
            if fi == usize::MAX {
                continue;
            }
            rhs[fi] += f_loc[il];
            for (jl, &gj) in gidx.iter().enumerate() {
                let v = a_loc[(il, jl)];
                let fj = dof_to_free[gj];
                if fj == usize::MAX {
                    rhs[fi] -= v * constrained_value[gj];
                } else {
                    triplets.push((fi as u32, fj as u32, v));
                }
            }
        }
    }

    let matrix = CsrMatrix::from_triplets(free_dofs.len(), triplets);
    Ok(SparseSpdSystem {
        matrix,
        rhs,
        free_dofs,
        dof_to_free,
        constrained: data.clone(),
        n_total: n,
    })
}

// ---------------------------------------------------------------------------
// Bilinear forms on full DOF vectors
// ---------------------------------------------------------------------------

/// `a(u, v)` with the given diffusion coefficient: residual product plus
/// stabilizer, summed over cells.
pub fn bilinear_a(
    mesh: &PolytopalMesh,
    dofs: &GlobalDofMap,
    ops: &[LocalWeakOperators],
    eps: f64,
    b: Vec2,
    u: &WgDofVector,
    v: &WgDofVector,
) -> f64 {
    let mut acc = 0.0;
    for c in 0..mesh.n_cells() {
        let op = &ops[c];
        let r = residual_operator_unchecked(op, eps, b);
        let ul = u.local(mesh, dofs, c);
        let vl = v.local(mesh, dofs, c);
        let ru = &r * &ul;
        let rv = &r * &vl;
        acc += (ru.transpose() * &op.gram_km1 * rv)[(0, 0)];
        acc += (ul.transpose() * &op.stabilizer * vl)[(0, 0)];
    }
    acc
}

/// Stabilizer form `s(u, v)`.
pub fn stabilizer_form(
    mesh: &PolytopalMesh,
    dofs: &GlobalDofMap,
    ops: &[LocalWeakOperators],
    u: &WgDofVector,
    v: &WgDofVector,
) -> f64 {
    let mut acc = 0.0;
    for c in 0..mesh.n_cells() {
        let op = &ops[c];
        let ul = u.local(mesh, dofs, c);
        let vl = v.local(mesh, dofs, c);
        acc += (ul.transpose() * &op.stabilizer * vl)[(0, 0)];
    }
    acc
}

/// Energy norm `sqrt(a(v, v))` evaluated with diffusion weight `eps_norm`
/// (the reporting convention uses `eps_norm = 1`) and the configured
/// convection field.
pub fn energy_norm(
    mesh: &PolytopalMesh,
    dofs: &GlobalDofMap,
    ops: &[LocalWeakOperators],
    eps_norm: f64,
    b: Vec2,
    v: &WgDofVector,
) -> f64 {
    bilinear_a(mesh, dofs, ops, eps_norm, b, v, v).max(0.0).sqrt()
}

/// Per-cell L2 projection of `f` onto `P_{k-1}`, as one coefficient vector
/// per cell. Used by the least-squares functional.
pub fn project_f_km1(
    mesh: &PolytopalMesh,
    ops: &[LocalWeakOperators],
    f: impl Fn(f64, f64) -> f64,
    quad_degree: usize,
) -> Result<Vec<DVector<f64>>> {
    let mut out = Vec::with_capacity(mesh.n_cells());
    for (c, op) in ops.iter().enumerate() {
        let rule = cell_rule(&mesh.cell_points(c), quad_degree)?;
        let npm = op.npm();
        let mut rhs = DVector::zeros(npm);
        for (p, &w) in rule.points.iter().zip(&rule.weights) {
            let fv = f(p.x, p.y) * w;
            for i in 0..npm {
                rhs[i] += fv * op.basis.eval(i, p.x, p.y);
            }
        }
        let chol = nalgebra::Cholesky::new(op.gram_km1.clone())
            .ok_or_else(|| WgError::Numeric(format!("cell {c}: Gram not SPD")))?;
        out.push(chol.solve(&rhs));
    }
    Ok(out)
}

/// Value of the least-squares functional
/// `J(v) = sum_T ||-eps lap_w v + b.grad_w v - Q^{k-1} f||_T^2 + s(v, v)`.
pub fn least_squares_functional(
    mesh: &PolytopalMesh,
    dofs: &GlobalDofMap,
    ops: &[LocalWeakOperators],
    eps: f64,
    b: Vec2,
    f_proj: &[DVector<f64>],
    v: &WgDofVector,
) -> f64 {
    let mut acc = 0.0;
    for c in 0..mesh.n_cells() {
        let op = &ops[c];
        let r = residual_operator_unchecked(op, eps, b);
        let vl = v.local(mesh, dofs, c);
        let d = &r * &vl - &f_proj[c];
        acc += (d.transpose() * &op.gram_km1 * &d)[(0, 0)];
        acc += (vl.transpose() * &op.stabilizer * vl)[(0, 0)];
    }
    acc
}

/// Writes the assembled matrix in coordinate text format (debug aid).
pub fn dump_system(system: &SparseSpdSystem, w: &mut impl std::io::Write) -> Result<()> {
    system.matrix.write_coo(w)?;
    Ok(())
}

// A DMatrix-returning helper for small dense checks in tests.
#[allow(dead_code)]
pub(crate) fn to_dense(m: &CsrMatrix) -> DMatrix<f64> {
    let mut d = DMatrix::zeros(m.n, m.n);
    for i in 0..m.n {
        for idx in m.row_ptr[i]..m.row_ptr[i + 1] {
            d[(i, m.col_idx[idx])] = m.values[idx];
        }
    }
    d
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::mesh::{build_nonconvex_pentagon, build_triangular, grid_family, Family};
    use crate::polyspace::project_exact_solution;
    use crate::solver::direct_solve;

    #[test]
    fn dof_counts_triangular_g1_k2() {
        let mesh = build_triangular(1).unwrap();
        let dofs = GlobalDofMap::new(&mesh, 2).unwrap();
        // 2 cells * 6 + 5 edges * (3 + 2) = 37
        assert_eq!(dofs.n_total, 37);
        assert_eq!(dofs.constrained_dofs(&mesh).len(), 10);
    }

    #[test]
    fn dof_counts_pentagon_g1_k1() {
        // hand count: 2 cells * 3 interior + 7 edges * (2 + 1) = 27,
        // with 4 boundary edges (2 on Gamma1) and 3 shared zigzag edges
        let mesh = build_nonconvex_pentagon(1).unwrap();
        assert_eq!(mesh.n_edges(), 7);
        let dofs = GlobalDofMap::new(&mesh, 1).unwrap();
        assert_eq!(dofs.n_total, 27);
        assert_eq!(dofs.constrained_dofs(&mesh).len(), 2 * 3);
    }

    #[test]
    fn blocks_are_disjoint_and_cover() {
        let mesh = build_triangular(2).unwrap();
        let dofs = GlobalDofMap::new(&mesh, 3).unwrap();
        let mut seen = vec![0u8; dofs.n_total];
        for c in 0..mesh.n_cells() {
            for g in dofs.cell_start(c)..dofs.cell_start(c) + dofs.np {
                seen[g] += 1;
            }
        }
        for e in 0..mesh.n_edges() {
            for g in dofs.trace_start(e)..dofs.trace_start(e) + dofs.k + 1 {
                seen[g] += 1;
            }
            for g in dofs.flux_start(e)..dofs.flux_start(e) + dofs.k {
                seen[g] += 1;
            }
        }
        assert!(seen.iter().all(|&s| s == 1));
    }

    #[test]
    fn homogeneous_data_gives_zero_solution() {
        let mesh = build_triangular(2).unwrap();
        let dofs = GlobalDofMap::new(&mesh, 2).unwrap();
        let ops = build_local_ops(&mesh, 2).unwrap();
        let data = CauchyData::homogeneous(&dofs, &mesh);
        let sys = assemble(
            &mesh,
            &dofs,
            &ops,
            1e-2,
            Vec2::new(1.0, 1.0),
            |_, _| 0.0,
            &data,
            &AssemblyOptions::default(),
        )
        .unwrap();
        assert!(sys.rhs.amax() == 0.0);
        let (x, _) = direct_solve(&sys.matrix, &sys.rhs).unwrap();
        assert!(x.amax() < 1e-14);
    }

    #[test]
    fn cauchy_data_for_linear_solution() {
        // u = x: traces reproduce x, fluxes are n_x per edge
        let mesh = build_triangular(1).unwrap();
        let dofs = GlobalDofMap::new(&mesh, 1).unwrap();
        let data = interpolate_cauchy_data(
            |x, _| x,
            |_, n| Vec2::new(1.0, 0.0).dot(n),
            &mesh,
            &dofs,
        )
        .unwrap();
        for (i, &d) in data.dofs.iter().enumerate() {
            // flux DOFs sit at the end of the numbering
            if d >= dofs.flux_start(0) {
                let e = (d - dofs.flux_start(0)) / dofs.k;
                let expect = mesh.edges[e].normal.x;
                assert!((data.values[i] - expect).abs() < 1e-13);
            }
        }
        // left edge (x = 0): trace coefficients of 0, flux = -1
        let left = mesh
            .gamma1_edges()
            .find(|&e| mesh.edge_midpoint(e).x.abs() < 1e-12)
            .unwrap();
        let t0 = dofs.trace_start(left);
        for i in 0..=dofs.k {
            let pos = data.dofs.iter().position(|&d| d == t0 + i).unwrap();
            assert!(data.values[pos].abs() < 1e-14);
        }
        let f0 = dofs.flux_start(left);
        let pos = data.dofs.iter().position(|&d| d == f0).unwrap();
        assert!((data.values[pos] + 1.0).abs() < 1e-13);
    }

    #[test]
    fn bottom_edge_trace_mean_matches_analytic() {
        // g1 = -(2x^3 + y + 1)^2 restricted to y = 0; mean over [0,1] is
        // -(4/7 + 1 + 1) = -18/7
        let mesh = build_triangular(1).unwrap();
        let dofs = GlobalDofMap::new(&mesh, 2).unwrap();
        let g1 = |x: f64, y: f64| -(2.0 * x.powi(3) + y + 1.0).powi(2);
        let data = interpolate_cauchy_data(g1, |_, _| 0.0, &mesh, &dofs).unwrap();
        let bottom = mesh
            .gamma1_edges()
            .find(|&e| mesh.edge_midpoint(e).y.abs() < 1e-12)
            .unwrap();
        let t0 = dofs.trace_start(bottom);
        // mean of the projection = value integral / length; with the
        // (s-1/2)^j basis the mean picks up the even coefficients
        let pos0 = data.dofs.iter().position(|&d| d == t0).unwrap();
        let pos2 = data.dofs.iter().position(|&d| d == t0 + 2).unwrap();
        let mean = data.values[pos0] + data.values[pos2] / 12.0;
        assert!((mean + 18.0 / 7.0).abs() < 1e-12, "mean {mean}");
    }

    #[test]
    fn polynomial_solution_is_reproduced() {
        // degree-k solution with exact data: u_h = Q_h u up to solver error
        let u = |x: f64, y: f64| 1.0 + 2.0 * x + 3.0 * y - x * x + x * y;
        let grad = |x: f64, y: f64| Vec2::new(2.0 - 2.0 * x + y, 3.0 + x);
        let lap = -2.0;
        let eps = 0.1;
        let b = Vec2::new(1.0, 1.0);
        let f = move |x: f64, y: f64| -eps * lap + b.dot(&grad(x, y));
        for family in [Family::Triangular, Family::Pentagon] {
            let mesh = grid_family(family, 2).unwrap();
            let dofs = GlobalDofMap::new(&mesh, 2).unwrap();
            let ops = build_local_ops(&mesh, 2).unwrap();
            let data = interpolate_cauchy_data(u, |p, n| grad(p.x, p.y).dot(n), &mesh, &dofs)
                .unwrap();
            let sys = assemble(&mesh, &dofs, &ops, eps, b, f, &data, &AssemblyOptions::default())
                .unwrap();
            let (x, _) = direct_solve(&sys.matrix, &sys.rhs).unwrap();
            let u_h = sys.expand(&x);
            let q_h = project_exact_solution(u, grad, &mesh, &dofs).unwrap();
            let diff = (&u_h.0 - &q_h.0).amax();
            let scale = q_h.0.amax();
            assert!(diff <= 1e-9 * scale, "{family}: {diff:e} vs scale {scale:e}");
        }
    }

    #[test]
    fn assembled_matrix_is_bitwise_symmetric() {
        let mesh = grid_family(Family::Pentagon, 2).unwrap();
        let dofs = GlobalDofMap::new(&mesh, 2).unwrap();
        let ops = build_local_ops(&mesh, 2).unwrap();
        let data = CauchyData::homogeneous(&dofs, &mesh);
        let sys = assemble(
            &mesh,
            &dofs,
            &ops,
            1e-2,
            Vec2::new(1.0, 1.0),
            |x, y| x + y,
            &data,
            &AssemblyOptions::default(),
        )
        .unwrap();
        assert!(sys.matrix.is_bitwise_symmetric());
        assert!(sys.rhs.iter().all(|v| v.is_finite()));
    }

    #[test]
    fn energy_norm_vanishes_on_pde_kernel_projection() {
        // p = x - y satisfies -lap p + (1,1).grad p = 0; the reporting norm
        // (eps_norm = 1) of Q_h p is zero.
        let mesh = grid_family(Family::Triangular, 2).unwrap();
        let dofs = GlobalDofMap::new(&mesh, 2).unwrap();
        let ops = build_local_ops(&mesh, 2).unwrap();
        let q = project_exact_solution(
            |x, y| x - y,
            |_, _| Vec2::new(1.0, -1.0),
            &mesh,
            &dofs,
        )
        .unwrap();
        let e = energy_norm(&mesh, &dofs, &ops, 1.0, Vec2::new(1.0, 1.0), &q);
        assert!(e < 1e-10, "energy {e}");
        let zero = WgDofVector::zeros(dofs.n_total);
        assert_eq!(energy_norm(&mesh, &dofs, &ops, 1.0, Vec2::new(1.0, 1.0), &zero), 0.0);
    }

    #[test]
    fn error_equation_holds() {
        // a(e_h, v) = -s(Q_h u, v) for the degree-(k+2) manufactured solution
        use rand::prelude::*;
        use rand_chacha::ChaCha8Rng;
        let mut rng = ChaCha8Rng::seed_from_u64(23);
        let k = 2;
        let eps = 0.3;
        let b = Vec2::new(1.0, -2.0);
        let u = crate::polynomial::Poly2::from_coeffs(vec![
            0.5, -1.0, 2.0, 1.0, 0.5, -1.5, 0.25, -0.75, 1.25, 0.5, 0.3, -0.2, 0.7, -0.4, 0.6,
        ]); // degree 4 = k + 2
        let ux = u.dx();
        let uy = u.dy();
        let lap = u.laplacian();
        let f = |x: f64, y: f64| -eps * lap.eval(x, y) + b.x * ux.eval(x, y) + b.y * uy.eval(x, y);
        let mesh = grid_family(Family::Triangular, 2).unwrap();
        let dofs = GlobalDofMap::new(&mesh, k).unwrap();
        let ops = build_local_ops(&mesh, k).unwrap();
        let grad = |x: f64, y: f64| Vec2::new(ux.eval(x, y), uy.eval(x, y));
        let data = interpolate_cauchy_data(
            |x, y| u.eval(x, y),
            |p, n| grad(p.x, p.y).dot(n),
            &mesh,
            &dofs,
        )
        .unwrap();
        let sys = assemble(
            &mesh,
            &dofs,
            &ops,
            eps,
            b,
            f,
            &data,
            &AssemblyOptions {
                f_quadrature_degree: Some(2 * k + 6),
            },
        )
        .unwrap();
        let (x, _) = direct_solve(&sys.matrix, &sys.rhs).unwrap();
        let u_h = sys.expand(&x);
        let q_h = project_exact_solution(|x, y| u.eval(x, y), grad, &mesh, &dofs).unwrap();
        let e_h = &u_h - &q_h;
        let norm_e = energy_norm(&mesh, &dofs, &ops, eps, b, &e_h);
        for _ in 0..20 {
            let mut v = WgDofVector(DVector::from_fn(dofs.n_total, |_, _| {
                rng.random_range(-1.0..1.0)
            }));
            for &d in &sys.constrained.dofs {
                v.0[d] = 0.0;
            }
            let lhs = bilinear_a(&mesh, &dofs, &ops, eps, b, &e_h, &v);
            let rhs = -stabilizer_form(&mesh, &dofs, &ops, &q_h, &v);
            let norm_v = energy_norm(&mesh, &dofs, &ops, eps, b, &v);
            let bound = 1e-8 * (1.0 + norm_e * norm_v);
            assert!(
                (lhs - rhs).abs() <= bound,
                "residual {:.3e} bound {:.3e}",
                (lhs - rhs).abs(),
                bound
            );
        }
    }

    #[test]
    fn solution_minimizes_least_squares_functional() {
        use rand::prelude::*;
        use rand_chacha::ChaCha8Rng;
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let k = 2;
        let eps = 0.5;
        let b = Vec2::new(1.0, 0.5);
        let u = |x: f64, y: f64| (x * y).sin() + x;
        let grad = |x: f64, y: f64| Vec2::new(y * (x * y).cos() + 1.0, x * (x * y).cos());
        let lap = |x: f64, y: f64| -(x * x + y * y) * (x * y).sin();
        let f = move |x: f64, y: f64| -eps * lap(x, y) + b.dot(&grad(x, y));
        let mesh = grid_family(Family::Triangular, 2).unwrap();
        let dofs = GlobalDofMap::new(&mesh, k).unwrap();
        let ops = build_local_ops(&mesh, k).unwrap();
        let data =
            interpolate_cauchy_data(u, |p, n| grad(p.x, p.y).dot(n), &mesh, &dofs).unwrap();
        let sys =
            assemble(&mesh, &dofs, &ops, eps, b, f, &data, &AssemblyOptions::default()).unwrap();
        let (x, _) = direct_solve(&sys.matrix, &sys.rhs).unwrap();
        let u_h = sys.expand(&x);
        let f_proj = project_f_km1(&mesh, &ops, f, 2 * k + 4).unwrap();
        let j0 = least_squares_functional(&mesh, &dofs, &ops, eps, b, &f_proj, &u_h);
        for _ in 0..50 {
            let mut w = WgDofVector(DVector::from_fn(dofs.n_total, |_, _| {
                rng.random_range(-1.0..1.0)
            }));
            for &d in &sys.constrained.dofs {
                w.0[d] = 0.0;
            }
            let v = WgDofVector(&u_h.0 + &w.0);
            let j = least_squares_functional(&mesh, &dofs, &ops, eps, b, &f_proj, &v);
            assert!(j > j0, "perturbed {j} <= optimal {j0}");
        }
    }

    #[test]
    fn rejects_bad_epsilon() {
        let mesh = build_triangular(1).unwrap();
        let dofs = GlobalDofMap::new(&mesh, 1).unwrap();
        let ops = build_local_ops(&mesh, 1).unwrap();
        let data = CauchyData::homogeneous(&dofs, &mesh);
        assert!(matches!(
            assemble(
                &mesh,
                &dofs,
                &ops,
                -1.0,
                Vec2::zeros(),
                |_, _| 0.0,
                &data,
                &AssemblyOptions::default()
            ),
            Err(WgError::InvalidArgument(_))
        ));
    }
}
