//! Closed-form first-order correction of the joint diagonalizer, and
//! alignment of minimizers modulo the permutation/phase symmetry of the cost.

use rand::seq::SliceRandom;
use rand::Rng;
use rand_chacha::ChaCha8Rng;

use crate::ensemble::{separation_condition, DiagonalSet, PerturbationSetup};
use crate::error::{JdError, Result};
use crate::matrix::{fro_dist, is_unitary, unitary_defect, Mat, Scalar};

/// Permutation times unit-modulus diagonal: the exact symmetry group of the
/// cost. `matrix()` builds J with `J[perm[c]][c] = phases[c]`, so column c of
/// `V J` is `phases[c]` times column `perm[c]` of V.
#[derive(Debug, Clone, PartialEq)]
pub struct AlignmentJ {
    pub perm: Vec<usize>,
    pub phases: Vec<Scalar>,
}

impl AlignmentJ {
    pub fn identity(n: usize) -> Self {
        AlignmentJ {
            perm: (0..n).collect(),
            phases: vec![Scalar::new(1.0, 0.0); n],
        }
    }

    pub fn matrix(&self) -> Mat {
        let n = self.perm.len();
        let mut j = Mat::zeros(n, n);
        for c in 0..n {
            j[(self.perm[c], c)] = self.phases[c];
        }
        j
    }

    /// Random permutation and unit phases, for symmetry tests.
    pub fn random(n: usize, rng: &mut ChaCha8Rng) -> Self {
        let mut perm: Vec<usize> = (0..n).collect();
        perm.shuffle(rng);
        let phases = (0..n)
            .map(|_| {
                let theta: f64 = rng.gen_range(0.0..std::f64::consts::TAU);
                Scalar::new(theta.cos(), theta.sin())
            })
            .collect();
        AlignmentJ { perm, phases }
    }
}

/// First-order coefficient f_ij(k) = (d_j(k) - d_i(k)) / sum_l |d_j(l) - d_i(l)|^2.
pub fn f_coeff(diag: &DiagonalSet, i: usize, j: usize, k: usize) -> Result<Scalar> {
    let n = diag.n();
    if i >= n || j >= n || k >= diag.m() || i == j {
        return Err(JdError::IndexOutOfRange(format!(
            "(i, j, k) = ({i}, {j}, {k}) invalid for n = {n}, m = {}",
            diag.m()
        )));
    }
    let denom: f64 = (0..diag.m())
        .map(|l| (diag.entry(l, j) - diag.entry(l, i)).norm_sqr())
        .sum();
    if denom == 0.0 {
        return Err(JdError::DegenerateSpectra { i, j });
    }
    Ok((diag.entry(k, j) - diag.entry(k, i)) / denom)
}

/// The anti-hermitian first-order correction G with zero diagonal:
/// g_ij = 1/2 sum_k [ conj(f_ij(k)) (u_i^H R_k u_j) + f_ij(k) (u_i^H R_k^H u_j) ].
///
/// Depends only on U, the diagonal table, and the R_k; lambda and a play no
/// role here.
pub fn build_g(setup: &PerturbationSetup) -> Result<Mat> {
    setup.validate()?;
    if !separation_condition(&setup.diag) {
        // surface the first offending pair
        for i in 0..setup.n() {
            for j in 0..setup.n() {
                if i != j {
                    f_coeff(&setup.diag, i, j, 0)?;
                }
            }
        }
    }
    let n = setup.n();
    let uh = setup.u.adjoint();
    // p_k = U^H R_k U, so u_i^H R_k u_j = p_k[i][j] and
    // u_i^H R_k^H u_j = conj(p_k[j][i])
    let p: Vec<Mat> = setup
        .r
        .iter()
        .map(|rk| uh.mul(rk).mul(&setup.u))
        .collect();
    let mut g = Mat::zeros(n, n);
    for i in 0..n {
        for j in 0..n {
            if i == j {
                continue;
            }
            let mut acc = Scalar::new(0.0, 0.0);
            for k in 0..setup.m() {
                let f = f_coeff(&setup.diag, i, j, k)?;
                acc += f.conj() * p[k][(i, j)] + f * p[k][(j, i)].conj();
            }
            g[(i, j)] = acc * 0.5;
        }
    }
    Ok(g)
}

/// The predicted joint diagonalizer U (I + lambda G). Unitary up to
/// O(lambda^2) only.
pub fn predicted_diagonalizer(setup: &PerturbationSetup, g: &Mat) -> Mat {
    let n = setup.n();
    setup
        .u
        .mul(&Mat::identity(n).add(&g.scale_re(setup.lambda)))
}

/// Align V to U over the symmetry group: returns the alignment J, the aligned
/// matrix V J, and the residual ||V J - U||_F.
///
/// J is chosen greedily from P = V^H U: repeatedly take the largest remaining
/// modulus of P (smallest row index on ties), match that V column to that U
/// column, and set the phase so the matched entry becomes positive real.
pub fn align(v: &Mat, u: &Mat) -> Result<(AlignmentJ, Mat, f64)> {
    for m in [v, u] {
        if !is_unitary(m, 1e-8)? {
            return Err(JdError::NotUnitary {
                defect: unitary_defect(m),
                tol: 1e-8,
            });
        }
    }
    if v.n_rows() != u.n_rows() {
        return Err(JdError::ShapeMismatch(format!(
            "{}x{} vs {}x{}",
            v.n_rows(),
            v.n_cols(),
            u.n_rows(),
            u.n_cols()
        )));
    }
    let n = v.n_rows();
    let p = v.adjoint().mul(u);
    let mut row_used = vec![false; n];
    let mut col_used = vec![false; n];
    let mut perm = vec![0usize; n];
    let mut phases = vec![Scalar::new(1.0, 0.0); n];
    for _ in 0..n {
        let mut best = (0usize, 0usize, -1.0f64);
        for r in 0..n {
            if row_used[r] {
                continue;
            }
            for c in 0..n {
                if col_used[c] {
                    continue;
                }
                let mag = p[(r, c)].norm();
                if mag > best.2 + 1e-12 {
                    best = (r, c, mag);
                }
            }
        }
        let (r, c, mag) = best;
        if mag <= 1e-12 {
            return Err(JdError::AmbiguousAlignment);
        }
        row_used[r] = true;
        col_used[c] = true;
        perm[c] = r;
        phases[c] = p[(r, c)] / mag;
    }
    let j = AlignmentJ { perm, phases };
    let aligned = v.mul(&j.matrix());
    let residual = fro_dist(&aligned, u)?;
    Ok((j, aligned, residual))
}
