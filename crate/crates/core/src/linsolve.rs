//! Sparse direct solution of the assembled systems.

use faer::prelude::*;
use faer::sparse::{SparseColMat, Triplet};

use crate::assembly::LinearSystem;
use crate::error::{Error, Result};
use crate::sparse::CsrMatrix;

/// Relative residual above which iterative refinement kicks in.
pub const REFINE_TOL: f64 = 1e-12;
/// Relative residual above which a solve is reported as failed.
pub const FAIL_TOL: f64 = 1e-10;
const MAX_REFINEMENTS: usize = 3;

/// Result of a direct solve.
#[derive(Debug, Clone, PartialEq)]
pub struct SolveOutcome {
    pub x: Vec<f64>,
    /// ‖b − A x‖ / ‖b‖ after refinement.
    pub residual: f64,
    pub refinements: usize,
}

fn norm(v: &[f64]) -> f64 {
    v.iter().map(|a| a * a).sum::<f64>().sqrt()
}

fn residual(a: &CsrMatrix, x: &[f64], b: &[f64]) -> Vec<f64> {
    a.matvec(x).iter().zip(b).map(|(ax, bi)| bi - ax).collect()
}

/// Factorizes `a` once (sparse LU with partial pivoting) and solves A x = b,
/// refining up to three times when the relative residual exceeds 1e-12.
pub fn solve_csr(a: &CsrMatrix, b: &[f64]) -> Result<SolveOutcome> {
    let n = a.dim();
    if b.len() != n {
        return Err(Error::InvalidArgument(format!(
            "right-hand side has length {}, matrix is {n}x{n}",
            b.len()
        )));
    }
    let bnorm = norm(b);
    if bnorm == 0.0 {
        return Ok(SolveOutcome {
            x: vec![0.0; n],
            residual: 0.0,
            refinements: 0,
        });
    }
    if !bnorm.is_finite() {
        return Err(Error::SingularSystem("right-hand side is not finite".into()));
    }

    let trips: Vec<Triplet<usize, usize, f64>> =
        a.triplets().map(|(i, j, v)| Triplet::new(i, j, v)).collect();
    let mat = SparseColMat::<usize, f64>::try_new_from_triplets(n, n, &trips)
        .map_err(|e| Error::SingularSystem(format!("matrix conversion failed: {e:?}")))?;
    let lu = mat
        .sp_lu()
        .map_err(|e| Error::SingularSystem(format!("factorization failed: {e:?}")))?;

    let apply = |rhs: &[f64]| -> Result<Vec<f64>> {
        let mut col = Col::<f64>::from_fn(n, |i| rhs[i]);
        lu.solve_in_place(col.as_mat_mut());
        let out: Vec<f64> = (0..n).map(|i| col[i]).collect();
        if out.iter().all(|v| v.is_finite()) {
            Ok(out)
        } else {
            Err(Error::SingularSystem("factorization produced non-finite values".into()))
        }
    };

    let mut x = apply(b)?;
    let mut r = residual(a, &x, b);
    let mut rel = norm(&r) / bnorm;
    let mut refinements = 0;
    while rel > REFINE_TOL && refinements < MAX_REFINEMENTS {
        let dx = apply(&r)?;
        let trial: Vec<f64> = x.iter().zip(&dx).map(|(a, d)| a + d).collect();
        let r_trial = residual(a, &trial, b);
        let rel_trial = norm(&r_trial) / bnorm;
        refinements += 1;
        if !(rel_trial < rel) {
            break;
        }
        x = trial;
        r = r_trial;
        rel = rel_trial;
    }
    if !rel.is_finite() {
        return Err(Error::SingularSystem("residual is not finite".into()));
    }
    if rel > FAIL_TOL {
        return Err(Error::ResidualTooLarge(rel));
    }
    Ok(SolveOutcome {
        x,
        residual: rel,
        refinements,
    })
}

/// Nodal (u_x, u_y, p) values of a discrete solution.
#[derive(Debug, Clone, PartialEq)]
pub struct SolutionFields {
    pub values: Vec<f64>,
    /// Relative residual of the linear solve.
    pub residual: f64,
}

impl SolutionFields {
    pub fn n_vertices(&self) -> usize {
        self.values.len() / 3
    }

    pub fn u(&self, v: usize) -> [f64; 2] {
        [self.values[3 * v], self.values[3 * v + 1]]
    }

    pub fn p(&self, v: usize) -> f64 {
        self.values[3 * v + 2]
    }
}

/// Solves an assembled system and returns nodal fields.
pub fn solve(system: &LinearSystem) -> Result<SolutionFields> {
    if system.awaiting_constraints() {
        return Err(Error::SingularSystem(
            "strong formulation solved without boundary constraints".into(),
        ));
    }
    let out = solve_csr(&system.matrix, &system.rhs)?;
    Ok(SolutionFields {
        values: system.to_nodal(&out.x),
        residual: out.residual,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn small_indefinite_system() {
        // saddle point [[2, 1], [1, -1]]
        let a = CsrMatrix::from_triplets(2, &[(0, 0, 2.0), (0, 1, 1.0), (1, 0, 1.0), (1, 1, -1.0)]);
        let out = solve_csr(&a, &[3.0, 0.0]).unwrap();
        assert!((out.x[0] - 1.0).abs() < 1e-14 && (out.x[1] - 1.0).abs() < 1e-14);
        assert!(out.residual < 1e-15);
    }

    #[test]
    fn zero_rhs_gives_zero() {
        let a = CsrMatrix::identity(4);
        assert_eq!(solve_csr(&a, &[0.0; 4]).unwrap().x, vec![0.0; 4]);
    }

    #[test]
    fn singular_matrix_is_reported() {
        let a = CsrMatrix::from_triplets(2, &[(0, 0, 1.0), (0, 1, 1.0), (1, 0, 1.0), (1, 1, 1.0)]);
        let err = solve_csr(&a, &[1.0, 2.0]).unwrap_err();
        assert!(err.is_solver_failure(), "{err}");
    }

    #[test]
    fn length_mismatch_is_rejected() {
        assert!(solve_csr(&CsrMatrix::identity(3), &[1.0]).is_err());
    }
}
