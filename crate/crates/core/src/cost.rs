//! The off-norm, the joint-diagonalization cost, and the scalar maps gamma.

use crate::ensemble::Ensemble;
use crate::error::{JdError, Result};
use crate::matrix::{unitary_defect, Mat, Scalar};

/// Unitarity slack accepted by [`cost_y`]. First-order points `I + lambda*G`
/// are unitary only up to O(lambda^2), so the gate is looser than the
/// structural predicates' 1e-10 default.
pub const COST_UNITARY_TOL: f64 = 1e-8;

/// Sum of squared moduli of the off-diagonal entries.
pub fn off(a: &Mat) -> Result<f64> {
    if !a.is_square() {
        return Err(JdError::NonSquare {
            rows: a.n_rows(),
            cols: a.n_cols(),
        });
    }
    let n = a.n_rows();
    let mut s = 0.0;
    for i in 0..n {
        for j in 0..n {
            if i != j {
                s += a[(i, j)].norm_sqr();
            }
        }
    }
    Ok(s)
}

/// Joint-diagonalization cost: sum over k of `off(V^H M_k V)`.
///
/// `V` must be unitary within [`COST_UNITARY_TOL`]; use [`cost_y_at`] to relax
/// the gate (the lambda sweep evaluates points whose unitarity defect is
/// O(lambda^2) above it).
pub fn cost_y(v: &Mat, m: &Ensemble) -> Result<f64> {
    cost_y_at(v, m, COST_UNITARY_TOL)
}

/// [`cost_y`] with an explicit unitarity tolerance.
pub fn cost_y_at(v: &Mat, m: &Ensemble, unitary_tol: f64) -> Result<f64> {
    check_shapes(v, m)?;
    let defect = unitary_defect(v);
    if defect > unitary_tol {
        return Err(JdError::NotUnitary {
            defect,
            tol: unitary_tol,
        });
    }
    Ok(cost_y_unchecked(v, m))
}

/// Cost without the unitarity gate; shapes must already agree.
pub fn cost_y_unchecked(v: &Mat, m: &Ensemble) -> f64 {
    let vh = v.adjoint();
    m.mats()
        .iter()
        .map(|mk| off(&vh.mul(mk).mul(v)).expect("square by construction"))
        .sum()
}

fn check_shapes(v: &Mat, m: &Ensemble) -> Result<()> {
    if !v.is_square() {
        return Err(JdError::NonSquare {
            rows: v.n_rows(),
            cols: v.n_cols(),
        });
    }
    if v.n_rows() != m.dim() {
        return Err(JdError::ShapeMismatch(format!(
            "V is {}x{} but ensemble dimension is {}",
            v.n_rows(),
            v.n_cols(),
            m.dim()
        )));
    }
    Ok(())
}

/// The (i, j) entry of `V^H M_k^H V` (0-based indices).
pub fn gamma(v: &Mat, m: &Ensemble, i: usize, j: usize, k: usize) -> Result<Scalar> {
    let n = m.dim();
    if i >= n || j >= n || k >= m.len() {
        return Err(JdError::IndexOutOfRange(format!(
            "(i, j, k) = ({i}, {j}, {k}) outside n = {n}, m = {}",
            m.len()
        )));
    }
    let c = v.adjoint().mul(&m.mats()[k].adjoint()).mul(v);
    Ok(c[(i, j)])
}

/// Cost recomputed through gamma: sum over k, i != j of |gamma_ijk|^2.
///
/// Equals [`cost_y`] identically: the i != j sums of squared moduli of
/// `V^H M_k^H V` and `V^H M_k V` coincide entrywise under transposition.
pub fn cost_via_gamma(v: &Mat, m: &Ensemble) -> Result<f64> {
    check_shapes(v, m)?;
    let defect = unitary_defect(v);
    if defect > COST_UNITARY_TOL {
        return Err(JdError::NotUnitary {
            defect,
            tol: COST_UNITARY_TOL,
        });
    }
    let vh = v.adjoint();
    let n = m.dim();
    let mut s = 0.0;
    for mk in m.mats() {
        let c = vh.mul(&mk.adjoint()).mul(v);
        for i in 0..n {
            for j in 0..n {
                if i != j {
                    s += c[(i, j)].norm_sqr();
                }
            }
        }
    }
    Ok(s)
}
