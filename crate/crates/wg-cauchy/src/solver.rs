//! Linear solvers for the assembled SPD systems: preconditioned conjugate
//! gradients and a sparse Cholesky oracle.
//!
//! The Cauchy problem yields extremely ill-conditioned systems, so the CG
//! defaults are strict (`tol = 1e-12`, `max_iter = 50 N`) and the study
//! driver prefers the direct factorization for small systems and for
//! vanishing diffusion.

use std::time::Instant;

use faer::sparse::{SparseColMat, Triplet};
use nalgebra::DVector;

use crate::error::{Result, WgError};
use crate::sparse::CsrMatrix;

/// Default relative-residual tolerance for CG.
pub const DEFAULT_TOL: f64 = 1e-12;

/// Default CG iteration cap.
pub fn default_max_iter(n: usize) -> usize {
    50 * n
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SolveMethod {
    Cg,
    Direct,
}

impl std::fmt::Display for SolveMethod {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            SolveMethod::Cg => f.write_str("cg"),
            SolveMethod::Direct => f.write_str("direct"),
        }
    }
}

/// Outcome of a linear solve.
#[derive(Debug, Clone)]
pub struct SolveReport {
    pub method: SolveMethod,
    pub iterations: usize,
    pub rel_residual: f64,
    pub converged: bool,
    pub wall_seconds: f64,
}

/// Jacobi (diagonal) preconditioner.
#[derive(Debug, Clone)]
pub struct JacobiPreconditioner {
    inv_diag: Vec<f64>,
}

impl JacobiPreconditioner {
    pub fn new(a: &CsrMatrix) -> Result<Self> {
        let diag = a.diagonal();
        let mut inv_diag = Vec::with_capacity(diag.len());
        for (i, d) in diag.iter().enumerate() {
            if *d <= 0.0 {
                return Err(WgError::Solver(format!(
                    "matrix not positive definite: diagonal entry {i} is {d}"
                )));
            }
            inv_diag.push(1.0 / d);
        }
        Ok(JacobiPreconditioner { inv_diag })
    }

    fn apply(&self, r: &DVector<f64>, z: &mut DVector<f64>) {
        for i in 0..r.len() {
            z[i] = self.inv_diag[i] * r[i];
        }
    }
}

/// Preconditioned conjugate gradients with the Jacobi preconditioner.
/// Returns the iterate and a report; a report with `converged = false`
/// signals that the tolerance was not reached within `max_iter`.
pub fn cg_solve(
    a: &CsrMatrix,
    rhs: &DVector<f64>,
    tol: f64,
    max_iter: usize,
) -> Result<(DVector<f64>, SolveReport)> {
    cg_solve_traced(a, rhs, tol, max_iter, |_| {})
}

/// CG with a per-iteration callback on the current iterate (used by tests
/// to observe the A-norm error decay).
pub fn cg_solve_traced(
    a: &CsrMatrix,
    rhs: &DVector<f64>,
    tol: f64,
    max_iter: usize,
    mut on_iterate: impl FnMut(&DVector<f64>),
) -> Result<(DVector<f64>, SolveReport)> {
    let start = Instant::now();
    let n = a.n;
    let rhs_norm = rhs.norm();
    let mut x = DVector::zeros(n);
    if rhs_norm == 0.0 {
        return Ok((
            x,
            SolveReport {
                method: SolveMethod::Cg,
                iterations: 0,
                rel_residual: 0.0,
                converged: true,
                wall_seconds: start.elapsed().as_secs_f64(),
            },
        ));
    }
    let precond = JacobiPreconditioner::new(a)?;
    let mut r = rhs.clone();
    let mut z = DVector::zeros(n);
    precond.apply(&r, &mut z);
    let mut p = z.clone();
    let mut rho = r.dot(&z);
    let mut q = DVector::zeros(n);
    let mut rel = 1.0;
    for it in 1..=max_iter {
        a.matvec(p.as_slice(), q.as_mut_slice());
        let pq = p.dot(&q);
        if pq <= 0.0 {
            return Err(WgError::Solver(format!(
                "matrix not positive definite: p'Ap = {pq:.3e} at iteration {it}"
            )));
        }
        let alpha = rho / pq;
        x.axpy(alpha, &p, 1.0);
        r.axpy(-alpha, &q, 1.0);
        on_iterate(&x);
        rel = r.norm() / rhs_norm;
        if rel <= tol {
            return Ok((
                x,
                SolveReport {
                    method: SolveMethod::Cg,
                    iterations: it,
                    rel_residual: rel,
                    converged: true,
                    wall_seconds: start.elapsed().as_secs_f64(),
                },
            ));
        }
        precond.apply(&r, &mut z);
        let rho_new = r.dot(&z);
        let beta = rho_new / rho;
        rho = rho_new;
        // p = z + beta p
        p.axpy(1.0, &z, beta);
    }
    Ok((
        x,
        SolveReport {
            method: SolveMethod::Cg,
            iterations: max_iter,
            rel_residual: rel,
            converged: false,
            wall_seconds: start.elapsed().as_secs_f64(),
        },
    ))
}

/// Sparse Cholesky solve (the verification oracle and the default for
/// vanishing diffusion). Fails with a "not SPD" error on factorization
/// breakdown.
pub fn direct_solve(a: &CsrMatrix, rhs: &DVector<f64>) -> Result<(DVector<f64>, SolveReport)> {
    let start = Instant::now();
    let n = a.n;
    let mut triplets = Vec::with_capacity(a.nnz());
    for i in 0..n {
        for idx in a.row_ptr[i]..a.row_ptr[i + 1] {
            triplets.push(Triplet::new(i, a.col_idx[idx], a.values[idx]));
        }
    }
    let mat = SparseColMat::<usize, f64>::try_new_from_triplets(n, n, &triplets)
        .map_err(|e| WgError::Solver(format!("sparse matrix construction failed: {e:?}")))?;
    let llt = mat
        .as_ref()
        .sp_cholesky(faer::Side::Lower)
        .map_err(|_| WgError::Solver("matrix not positive definite (Cholesky breakdown)".into()))?;
    let b = faer::Mat::from_fn(n, 1, |i, _| rhs[i]);
    let sol = llt.solve(&b);
    let x = DVector::from_fn(n, |i, _| sol[(i, 0)]);

    let rel_residual = if rhs.norm() == 0.0 {
        0.0
    } else {
        let mut ax = vec![0.0; n];
        a.matvec(x.as_slice(), &mut ax);
        let mut diff = 0.0;
        for i in 0..n {
            let d = ax[i] - rhs[i];
            diff += d * d;
        }
        diff.sqrt() / rhs.norm()
    };
    Ok((
        x,
        SolveReport {
            method: SolveMethod::Direct,
            iterations: 0,
            rel_residual,
            converged: true,
            wall_seconds: start.elapsed().as_secs_f64(),
        },
    ))
}

/// Checks that the matrix admits a Cholesky factorization (numerical SPD).
pub fn cholesky_factorizable(a: &CsrMatrix) -> bool {
    let n = a.n;
    let mut triplets = Vec::with_capacity(a.nnz());
    for i in 0..n {
        for idx in a.row_ptr[i]..a.row_ptr[i + 1] {
            triplets.push(Triplet::new(i, a.col_idx[idx], a.values[idx]));
        }
    }
    let Ok(mat) = SparseColMat::<usize, f64>::try_new_from_triplets(n, n, &triplets) else {
        return false;
    };
    mat.as_ref().sp_cholesky(faer::Side::Lower).is_ok()
}

/// `sqrt(v' A v)`.
pub fn a_norm(a: &CsrMatrix, v: &DVector<f64>) -> f64 {
    a.quadratic_form(v.as_slice()).max(0.0).sqrt()
}

#[cfg(test)]
mod tests {
    use super::*;
    use faer::prelude::*;

    fn identity(n: usize) -> CsrMatrix {
        CsrMatrix::from_triplets(n, (0..n as u32).map(|i| (i, i, 1.0)).collect())
    }

    #[test]
    fn cg_identity_one_iteration() {
        let a = identity(4);
        let rhs = DVector::from_vec(vec![1.0, -2.0, 3.0, 0.5]);
        let (x, rep) = cg_solve(&a, &rhs, 1e-12, 100).unwrap();
        assert_eq!(rep.iterations, 1);
        assert!(rep.converged);
        assert!((x - rhs).amax() < 1e-14);
    }

    #[test]
    fn cg_diagonal_system() {
        let a = CsrMatrix::from_triplets(3, vec![(0, 0, 1.0), (1, 1, 2.0), (2, 2, 3.0)]);
        let rhs = DVector::from_vec(vec![1.0, 2.0, 3.0]);
        let (x, rep) = cg_solve(&a, &rhs, 1e-12, 100).unwrap();
        assert!(rep.converged);
        for i in 0..3 {
            assert!((x[i] - 1.0).abs() < 1e-12);
        }
    }

    #[test]
    fn cg_detects_indefinite() {
        let a = CsrMatrix::from_triplets(2, vec![(0, 0, 1.0), (1, 1, -1.0)]);
        let rhs = DVector::from_vec(vec![1.0, 1.0]);
        assert!(matches!(
            cg_solve(&a, &rhs, 1e-12, 10),
            Err(WgError::Solver(_))
        ));
    }

    #[test]
    fn cg_reports_non_convergence() {
        // Moderately conditioned system, absurdly tight iteration cap.
        let a = CsrMatrix::from_triplets(
            3,
            vec![
                (0u32, 0u32, 2.0),
                (0, 1, -1.0),
                (1, 0, -1.0),
                (1, 1, 2.0),
                (1, 2, -1.0),
                (2, 1, -1.0),
                (2, 2, 2.0),
            ],
        );
        let rhs = DVector::from_vec(vec![1.0, 0.0, 1.0]);
        let (_, rep) = cg_solve(&a, &rhs, 1e-15, 1).unwrap();
        assert!(!rep.converged);
        assert_eq!(rep.iterations, 1);
    }

    #[test]
    fn direct_scalar_system() {
        let a = CsrMatrix::from_triplets(1, vec![(0, 0, 2.0)]);
        let rhs = DVector::from_vec(vec![4.0]);
        let (x, rep) = direct_solve(&a, &rhs).unwrap();
        assert!((x[0] - 2.0).abs() < 1e-14);
        assert_eq!(rep.method, SolveMethod::Direct);
    }

    #[test]
    fn direct_recovers_random_spd_solution() {
        use rand::prelude::*;
        use rand_chacha::ChaCha8Rng;
        let mut rng = ChaCha8Rng::seed_from_u64(42);
        let n = 50;
        // A = B' B + I is SPD
        let b = nalgebra::DMatrix::<f64>::from_fn(n, n, |_, _| rng.random_range(-1.0..1.0));
        let a_dense = b.transpose() * &b + nalgebra::DMatrix::identity(n, n);
        let mut triplets = Vec::new();
        for i in 0..n {
            for j in 0..n {
                triplets.push((i as u32, j as u32, a_dense[(i, j)]));
            }
        }
        let a = CsrMatrix::from_triplets(n, triplets);
        let x_star = DVector::from_fn(n, |_, _| rng.random_range(-1.0..1.0));
        let mut rhs = vec![0.0; n];
        a.matvec(x_star.as_slice(), &mut rhs);
        let rhs = DVector::from_vec(rhs);
        let (x, _) = direct_solve(&a, &rhs).unwrap();
        assert!((x - &x_star).amax() < 1e-10);
    }

    #[test]
    fn direct_rejects_indefinite() {
        let a = CsrMatrix::from_triplets(2, vec![(0, 0, 1.0), (0, 1, 3.0), (1, 0, 3.0), (1, 1, 1.0)]);
        let rhs = DVector::from_vec(vec![1.0, 1.0]);
        assert!(matches!(direct_solve(&a, &rhs), Err(WgError::Solver(_))));
        assert!(!cholesky_factorizable(&a));
    }

    #[test]
    fn cg_error_decays_monotonically_in_a_norm() {
        use rand::prelude::*;
        use rand_chacha::ChaCha8Rng;
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let n = 30;
        let b = nalgebra::DMatrix::<f64>::from_fn(n, n, |_, _| rng.random_range(-1.0..1.0));
        let a_dense = b.transpose() * &b + nalgebra::DMatrix::identity(n, n) * 0.1;
        let mut triplets = Vec::new();
        for i in 0..n {
            for j in 0..n {
                triplets.push((i as u32, j as u32, a_dense[(i, j)]));
            }
        }
        let a = CsrMatrix::from_triplets(n, triplets);
        let rhs = DVector::from_fn(n, |_, _| rng.random_range(-1.0..1.0));
        let (x_direct, _) = direct_solve(&a, &rhs).unwrap();
        let mut errs = Vec::new();
        let _ = cg_solve_traced(&a, &rhs, 1e-13, 10 * n, |x| {
            errs.push(a_norm(&a, &(x - &x_direct)));
        })
        .unwrap();
        for w in errs.windows(2) {
            assert!(
                w[1] <= w[0] * (1.0 + 1e-12) + 1e-14,
                "A-norm error increased: {} -> {}",
                w[0],
                w[1]
            );
        }
    }

    #[test]
    fn faer_is_linked_sanely() {
        // guard against silent API drift in the sparse backend
        let a = CsrMatrix::from_triplets(
            3,
            vec![
                (0u32, 0u32, 4.0),
                (0, 1, 1.0),
                (1, 0, 1.0),
                (1, 1, 3.0),
                (1, 2, 1.0),
                (2, 1, 1.0),
                (2, 2, 2.0),
            ],
        );
        let rhs = DVector::from_vec(vec![5.0, 5.0, 3.0]);
        let (x, _) = direct_solve(&a, &rhs).unwrap();
        for i in 0..3 {
            assert!((x[i] - 1.0).abs() < 1e-12);
        }
    }
}
