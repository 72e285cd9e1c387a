//! The stationarity operator S, its building blocks T_ijk, and the
//! first-order expansion of S around the identity for transvection-perturbed
//! ensembles.

use crate::ensemble::{transvection_matrix, DiagonalSet, Ensemble, PerturbationSetup, Transvection};
use crate::error::{JdError, Result};
use crate::matrix::{fro_dist, is_antihermitian, unit_basis, Mat, Scalar};

/// T_ijk(V) = E_ij C - C E_ij with C = V^H M_k^H V.
pub fn t_map(v: &Mat, m: &Ensemble, i: usize, j: usize, k: usize) -> Result<Mat> {
    let n = m.dim();
    if i >= n || j >= n || k >= m.len() {
        return Err(JdError::IndexOutOfRange(format!(
            "(i, j, k) = ({i}, {j}, {k}) outside n = {n}, m = {}",
            m.len()
        )));
    }
    if v.n_rows() != n || v.n_cols() != n {
        return Err(JdError::ShapeMismatch(format!(
            "V is {}x{}, ensemble dimension {n}",
            v.n_rows(),
            v.n_cols()
        )));
    }
    let c = v.adjoint().mul(&m.mats()[k].adjoint()).mul(v);
    let e = unit_basis(n, i, j)?;
    Ok(e.mul(&c).sub(&c.mul(&e)))
}

/// sum over i != j of conj(x_ij) (E_ij Y - Y E_ij), using the rank-one
/// structure of E_ij so the whole double sum costs O(n^3).
fn weighted_commutators(x: &Mat, y: &Mat) -> Mat {
    let n = x.n_rows();
    let zero = Scalar::new(0.0, 0.0);
    let mut s = Mat::zeros(n, n);
    for i in 0..n {
        for j in 0..n {
            if i == j {
                continue;
            }
            let w = x[(i, j)].conj();
            if w == zero {
                continue;
            }
            for col in 0..n {
                let add = w * y[(j, col)];
                s[(i, col)] += add;
            }
            for row in 0..n {
                let sub = w * y[(row, i)];
                s[(row, j)] -= sub;
            }
        }
    }
    s
}

/// The stationarity operator S(V, M) = sum_k sum_{i != j} conj(gamma_ijk) T_ijk.
///
/// Defined for any square V; the unitarity of evaluation points is a property
/// of the experiments, not of the map, and first-order points I + lambda L
/// are deliberately only unitary up to O(lambda^2).
pub fn s_map(v: &Mat, m: &Ensemble) -> Result<Mat> {
    let n = m.dim();
    if v.n_rows() != n || v.n_cols() != n {
        return Err(JdError::ShapeMismatch(format!(
            "V is {}x{}, ensemble dimension {n}",
            v.n_rows(),
            v.n_cols()
        )));
    }
    let vh = v.adjoint();
    let mut s = Mat::zeros(n, n);
    for mk in m.mats() {
        let c = vh.mul(&mk.adjoint()).mul(v);
        s = s.add(&weighted_commutators(&c, &c));
    }
    Ok(s)
}

/// Normalized distance of S from hermitianity:
/// ||S - S^H||_F / max(1, ||S||_F). Vanishes at stationary points.
pub fn stationarity_residual(v: &Mat, m: &Ensemble) -> Result<f64> {
    let s = s_map(v, m)?;
    let herm_gap = fro_dist(&s, &s.adjoint())?;
    Ok(herm_gap / s.fro_norm().max(1.0))
}

/// The four first-order bookkeeping terms for one (i, j, k): alpha and delta
/// at order zero, beta and epsilon at order one, all built from the
/// generalized transvection K and the tangent L.
pub fn first_order_terms(
    l: &Mat,
    k: &Mat,
    i: usize,
    j: usize,
) -> Result<(Mat, Mat, Scalar, Scalar)> {
    let n = k.n_rows();
    if !k.is_square() || l.n_rows() != n || l.n_cols() != n {
        return Err(JdError::ShapeMismatch(format!(
            "K is {}x{}, L is {}x{}",
            k.n_rows(),
            k.n_cols(),
            l.n_rows(),
            l.n_cols()
        )));
    }
    if i >= n || j >= n || i == j {
        return Err(JdError::IndexOutOfRange(format!(
            "(i, j) = ({i}, {j}) invalid for n = {n}"
        )));
    }
    if !is_antihermitian(l, 1e-8)? {
        return Err(JdError::ShapeMismatch("L must be anti-hermitian".into()));
    }
    let e = unit_basis(n, i, j)?;
    let kh = k.adjoint();
    let lh = l.adjoint();
    let alpha = e.mul(&kh).sub(&kh.mul(&e));
    let beta = e
        .mul(&kh)
        .mul(l)
        .sub(&lh.mul(&kh).mul(&e))
        .add(&e.mul(&lh).mul(&kh).sub(&kh.mul(l).mul(&e)));
    let delta = k[(i, j)];
    let epsilon = k.mul(l)[(i, j)] + lh.mul(k)[(i, j)];
    Ok((alpha, beta, delta, epsilon))
}

/// Parameters of a centered ensemble C_a + lambda B, with B_k = U^H R_k U.
#[derive(Debug, Clone)]
pub struct CenteredParams {
    pub diag: DiagonalSet,
    pub a: Scalar,
    pub tpos: (usize, usize),
    pub conj_r: Vec<Mat>,
}

impl CenteredParams {
    pub fn from_setup(setup: &PerturbationSetup) -> CenteredParams {
        let uh = setup.u.adjoint();
        CenteredParams {
            diag: setup.diag.clone(),
            a: setup.a,
            tpos: setup.tpos,
            conj_r: setup
                .r
                .iter()
                .map(|rk| uh.mul(rk).mul(&setup.u))
                .collect(),
        }
    }

    fn transvection(&self, k: usize) -> Result<Mat> {
        transvection_matrix(
            self.diag.n(),
            &Transvection::new(self.tpos.0, self.tpos.1, self.a),
            Some(self.diag.row(k)),
        )
    }

    /// The centered ensemble itself at a given lambda.
    pub fn ensemble_at(&self, lambda: f64) -> Result<Ensemble> {
        let mats = (0..self.diag.m())
            .map(|k| Ok(self.transvection(k)?.add(&self.conj_r[k].scale_re(lambda))))
            .collect::<Result<Vec<_>>>()?;
        Ensemble::new(mats)
    }
}

/// First-order expansion of S(I + lambda L, C_a + lambda B) in lambda.
///
/// Writing C_k(lambda) = (I + lambda L)^H (K_k + lambda B_k)^H (I + lambda L)
/// = K_k^H + lambda W_k + O(lambda^2) with W_k = B_k^H + L^H K_k^H + K_k^H L,
/// the expansion keeps the constant and linear coefficients of
/// sum conj(C[i][j]) (E_ij C - C E_ij) and drops every lambda^2 term, so the
/// remainder against [`s_map`] on the centered ensemble is quadratic.
pub fn s_first_order(l: &Mat, params: &CenteredParams, lambda: f64) -> Result<Mat> {
    let n = params.diag.n();
    if l.n_rows() != n || l.n_cols() != n {
        return Err(JdError::ShapeMismatch(format!(
            "L is {}x{}, expected {n}x{n}",
            l.n_rows(),
            l.n_cols()
        )));
    }
    if !is_antihermitian(l, 1e-8)? {
        return Err(JdError::ShapeMismatch("L must be anti-hermitian".into()));
    }
    if params.conj_r.len() != params.diag.m() {
        return Err(JdError::ShapeMismatch(
            "one conjugated perturbation per diagonal row required".into(),
        ));
    }
    let lh = l.adjoint();
    let mut s = Mat::zeros(n, n);
    for k in 0..params.diag.m() {
        let kh = params.transvection(k)?.adjoint();
        let w = params.conj_r[k]
            .adjoint()
            .add(&lh.mul(&kh))
            .add(&kh.mul(l));
        let order0 = weighted_commutators(&kh, &kh);
        let order1 = weighted_commutators(&kh, &w).add(&weighted_commutators(&w, &kh));
        s = s.add(&order0).add(&order1.scale_re(lambda));
    }
    Ok(s)
}
