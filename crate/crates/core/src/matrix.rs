//! Dense complex matrices and the structural predicates used everywhere else.
//!
//! Storage is row-major `Complex64`. Indices are 0-based in code; the CLI and
//! file formats speak 1-based to match the usual linear-algebra convention.

use num_complex::Complex64;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::error::{JdError, Result};

/// Complex scalar used throughout.
pub type Scalar = Complex64;

/// Seed for every random generator in the crate. Same seed, same bits.
///
/// The PRNG is ChaCha8 (`rand_chacha`), chosen because its output stream is
/// specified independently of platform word size and endianness.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct RngSeed(pub u64);

impl RngSeed {
    pub fn rng(self) -> ChaCha8Rng {
        ChaCha8Rng::seed_from_u64(self.0)
    }
}

/// Dense matrix over the complex numbers, row-major.
#[derive(Debug, Clone, PartialEq)]
pub struct Mat {
    rows: usize,
    cols: usize,
    data: Vec<Scalar>,
}

/// On-disk form: `{"rows": n, "cols": n, "entries": [[re, im], ...]}` row-major.
#[derive(Serialize, Deserialize)]
struct MatJson {
    rows: usize,
    cols: usize,
    entries: Vec<[f64; 2]>,
}

impl Serialize for Mat {
    fn serialize<S: serde::Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        MatJson {
            rows: self.rows,
            cols: self.cols,
            entries: self.data.iter().map(|z| [z.re, z.im]).collect(),
        }
        .serialize(s)
    }
}

impl<'de> Deserialize<'de> for Mat {
    fn deserialize<D: serde::Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        let raw = MatJson::deserialize(d)?;
        if raw.entries.len() != raw.rows * raw.cols {
            return Err(serde::de::Error::custom(format!(
                "expected {} entries, got {}",
                raw.rows * raw.cols,
                raw.entries.len()
            )));
        }
        let m = Mat {
            rows: raw.rows,
            cols: raw.cols,
            data: raw
                .entries
                .iter()
                .map(|&[re, im]| Scalar::new(re, im))
                .collect(),
        };
        m.check_finite()
            .map_err(|e| serde::de::Error::custom(e.to_string()))?;
        Ok(m)
    }
}

impl Mat {
    /// Build from a row-major entry list. Panics if the length is wrong.
    pub fn new(rows: usize, cols: usize, data: Vec<Scalar>) -> Self {
        assert_eq!(data.len(), rows * cols, "entry count must be rows*cols");
        Mat { rows, cols, data }
    }

    pub fn zeros(rows: usize, cols: usize) -> Self {
        Mat::new(rows, cols, vec![Scalar::new(0.0, 0.0); rows * cols])
    }

    pub fn identity(n: usize) -> Self {
        let mut m = Mat::zeros(n, n);
        for i in 0..n {
            m[(i, i)] = Scalar::new(1.0, 0.0);
        }
        m
    }

    /// Diagonal matrix from the given entries.
    pub fn diagonal(d: &[Scalar]) -> Self {
        let n = d.len();
        let mut m = Mat::zeros(n, n);
        for i in 0..n {
            m[(i, i)] = d[i];
        }
        m
    }

    /// Convenience constructor from rows of (re, im) pairs; used mostly in tests.
    pub fn from_rows(rows: &[Vec<Scalar>]) -> Self {
        let r = rows.len();
        let c = rows.first().map_or(0, |row| row.len());
        let mut data = Vec::with_capacity(r * c);
        for row in rows {
            assert_eq!(row.len(), c, "ragged rows");
            data.extend_from_slice(row);
        }
        Mat::new(r, c, data)
    }

    /// Real matrix literal.
    pub fn from_real(rows: &[&[f64]]) -> Self {
        let converted: Vec<Vec<Scalar>> = rows
            .iter()
            .map(|r| r.iter().map(|&x| Scalar::new(x, 0.0)).collect())
            .collect();
        Mat::from_rows(&converted)
    }

    pub fn n_rows(&self) -> usize {
        self.rows
    }

    pub fn n_cols(&self) -> usize {
        self.cols
    }

    pub fn is_square(&self) -> bool {
        self.rows == self.cols
    }

    pub fn entries(&self) -> &[Scalar] {
        &self.data
    }

    pub fn check_finite(&self) -> Result<()> {
        for i in 0..self.rows {
            for j in 0..self.cols {
                let z = self[(i, j)];
                if !z.re.is_finite() || !z.im.is_finite() {
                    return Err(JdError::NonFiniteEntry { i, j });
                }
            }
        }
        Ok(())
    }

    /// True when every imaginary part is exactly zero.
    pub fn is_real(&self) -> bool {
        self.data.iter().all(|z| z.im == 0.0)
    }

    /// Conjugate transpose.
    pub fn adjoint(&self) -> Mat {
        let mut out = Mat::zeros(self.cols, self.rows);
        for i in 0..self.rows {
            for j in 0..self.cols {
                out[(j, i)] = self[(i, j)].conj();
            }
        }
        out
    }

    pub fn transpose(&self) -> Mat {
        let mut out = Mat::zeros(self.cols, self.rows);
        for i in 0..self.rows {
            for j in 0..self.cols {
                out[(j, i)] = self[(i, j)];
            }
        }
        out
    }

    pub fn mul(&self, other: &Mat) -> Mat {
        assert_eq!(self.cols, other.rows, "inner dimensions must agree");
        let mut out = Mat::zeros(self.rows, other.cols);
        for i in 0..self.rows {
            for k in 0..self.cols {
                let a = self[(i, k)];
                if a == Scalar::new(0.0, 0.0) {
                    continue;
                }
                for j in 0..other.cols {
                    out[(i, j)] += a * other[(k, j)];
                }
            }
        }
        out
    }

    pub fn add(&self, other: &Mat) -> Mat {
        assert_eq!((self.rows, self.cols), (other.rows, other.cols));
        let data = self
            .data
            .iter()
            .zip(&other.data)
            .map(|(a, b)| a + b)
            .collect();
        Mat::new(self.rows, self.cols, data)
    }

    pub fn sub(&self, other: &Mat) -> Mat {
        assert_eq!((self.rows, self.cols), (other.rows, other.cols));
        let data = self
            .data
            .iter()
            .zip(&other.data)
            .map(|(a, b)| a - b)
            .collect();
        Mat::new(self.rows, self.cols, data)
    }

    pub fn scale(&self, s: Scalar) -> Mat {
        Mat::new(self.rows, self.cols, self.data.iter().map(|a| a * s).collect())
    }

    pub fn scale_re(&self, s: f64) -> Mat {
        self.scale(Scalar::new(s, 0.0))
    }

    /// Frobenius norm.
    pub fn fro_norm(&self) -> f64 {
        self.data.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt()
    }

    /// Largest entry modulus.
    pub fn max_abs(&self) -> f64 {
        self.data.iter().map(|z| z.norm()).fold(0.0, f64::max)
    }

    /// Column `j` as an n x 1 matrix.
    pub fn column(&self, j: usize) -> Mat {
        let mut out = Mat::zeros(self.rows, 1);
        for i in 0..self.rows {
            out[(i, 0)] = self[(i, j)];
        }
        out
    }

    /// Diagonal part, zeroing everything off-diagonal.
    pub fn diag_part(&self) -> Mat {
        assert!(self.is_square());
        let mut out = Mat::zeros(self.rows, self.cols);
        for i in 0..self.rows {
            out[(i, i)] = self[(i, i)];
        }
        out
    }

    /// Determinant by LU with partial pivoting.
    pub fn det(&self) -> Result<Scalar> {
        if !self.is_square() {
            return Err(JdError::NonSquare {
                rows: self.rows,
                cols: self.cols,
            });
        }
        let n = self.rows;
        let mut a = self.clone();
        let mut det = Scalar::new(1.0, 0.0);
        for c in 0..n {
            let (pivot, _) = (c..n)
                .map(|r| (r, a[(r, c)].norm()))
                .fold((c, -1.0), |best, cand| if cand.1 > best.1 { cand } else { best });
            if a[(pivot, c)].norm() == 0.0 {
                return Ok(Scalar::new(0.0, 0.0));
            }
            if pivot != c {
                for j in 0..n {
                    let tmp = a[(c, j)];
                    a[(c, j)] = a[(pivot, j)];
                    a[(pivot, j)] = tmp;
                }
                det = -det;
            }
            det *= a[(c, c)];
            for r in c + 1..n {
                let f = a[(r, c)] / a[(c, c)];
                for j in c..n {
                    let sub = f * a[(c, j)];
                    a[(r, j)] -= sub;
                }
            }
        }
        Ok(det)
    }
}

impl std::ops::Index<(usize, usize)> for Mat {
    type Output = Scalar;
    fn index(&self, (i, j): (usize, usize)) -> &Scalar {
        &self.data[i * self.cols + j]
    }
}

impl std::ops::IndexMut<(usize, usize)> for Mat {
    fn index_mut(&mut self, (i, j): (usize, usize)) -> &mut Scalar {
        &mut self.data[i * self.cols + j]
    }
}

/// Matrix with a single 1 at 0-based position (i, j).
pub fn unit_basis(n: usize, i: usize, j: usize) -> Result<Mat> {
    if i >= n || j >= n {
        return Err(JdError::IndexOutOfRange(format!(
            "({i}, {j}) outside {n}x{n}"
        )));
    }
    let mut m = Mat::zeros(n, n);
    m[(i, j)] = Scalar::new(1.0, 0.0);
    Ok(m)
}

/// True iff `A A^H` is the identity to within `tol` in max-entry modulus.
pub fn is_unitary(a: &Mat, tol: f64) -> Result<bool> {
    if !a.is_square() {
        return Err(JdError::NonSquare {
            rows: a.n_rows(),
            cols: a.n_cols(),
        });
    }
    Ok(unitary_defect(a) <= tol)
}

/// Max-entry modulus of `A A^H - I`.
pub fn unitary_defect(a: &Mat) -> f64 {
    let n = a.n_rows();
    a.mul(&a.adjoint()).sub(&Mat::identity(n)).max_abs()
}

/// True iff `A^H + A` vanishes to within `tol` in max-entry modulus.
pub fn is_antihermitian(a: &Mat, tol: f64) -> Result<bool> {
    if !a.is_square() {
        return Err(JdError::NonSquare {
            rows: a.n_rows(),
            cols: a.n_cols(),
        });
    }
    Ok(a.adjoint().add(a).max_abs() <= tol)
}

/// Frobenius distance between same-shape matrices.
pub fn fro_dist(a: &Mat, b: &Mat) -> Result<f64> {
    if (a.n_rows(), a.n_cols()) != (b.n_rows(), b.n_cols()) {
        return Err(JdError::ShapeMismatch(format!(
            "{}x{} vs {}x{}",
            a.n_rows(),
            a.n_cols(),
            b.n_rows(),
            b.n_cols()
        )));
    }
    Ok(a.sub(b).fro_norm())
}

fn gaussian(rng: &mut ChaCha8Rng) -> f64 {
    StandardNormal.sample(rng)
}

/// Standard complex (or real) Gaussian entry.
pub(crate) fn gaussian_scalar(rng: &mut ChaCha8Rng, real_only: bool) -> Scalar {
    if real_only {
        Scalar::new(gaussian(rng), 0.0)
    } else {
        Scalar::new(
            gaussian(rng) * std::f64::consts::FRAC_1_SQRT_2,
            gaussian(rng) * std::f64::consts::FRAC_1_SQRT_2,
        )
    }
}

/// Seeded Gaussian matrix, real or complex.
pub fn random_gaussian(n_rows: usize, n_cols: usize, seed: RngSeed, real_only: bool) -> Mat {
    let mut rng = seed.rng();
    random_gaussian_with(n_rows, n_cols, &mut rng, real_only)
}

pub(crate) fn random_gaussian_with(
    n_rows: usize,
    n_cols: usize,
    rng: &mut ChaCha8Rng,
    real_only: bool,
) -> Mat {
    let data = (0..n_rows * n_cols)
        .map(|_| gaussian_scalar(rng, real_only))
        .collect();
    Mat::new(n_rows, n_cols, data)
}

/// Haar-ish random unitary (orthogonal when `real_only`): seeded Gaussian
/// matrix orthonormalized column by column with one re-orthogonalization pass.
pub fn random_unitary(n: usize, seed: RngSeed, real_only: bool) -> Mat {
    let mut rng = seed.rng();
    random_unitary_with(n, &mut rng, real_only)
}

pub(crate) fn random_unitary_with(n: usize, rng: &mut ChaCha8Rng, real_only: bool) -> Mat {
    let g = random_gaussian_with(n, n, rng, real_only);
    orthonormalize(&g).expect("Gaussian matrix is almost surely nonsingular")
}

/// Nearest-by-construction unitary: column-wise Gram-Schmidt of a square
/// matrix. For inputs within O(eps) of unitary the result moves each column
/// by O(eps), so this serves as a projection back onto the unitary group.
pub fn orthonormalize(a: &Mat) -> Result<Mat> {
    if !a.is_square() {
        return Err(JdError::NonSquare {
            rows: a.n_rows(),
            cols: a.n_cols(),
        });
    }
    let n = a.n_rows();
    let mut q = a.clone();
    for j in 0..n {
        // two Gram-Schmidt passes keep the defect near machine precision
        for _ in 0..2 {
            for k in 0..j {
                let mut proj = Scalar::new(0.0, 0.0);
                for i in 0..n {
                    proj += q[(i, k)].conj() * q[(i, j)];
                }
                for i in 0..n {
                    let sub = proj * q[(i, k)];
                    q[(i, j)] -= sub;
                }
            }
        }
        let norm: f64 = (0..n).map(|i| q[(i, j)].norm_sqr()).sum::<f64>().sqrt();
        if norm <= 1e-300 {
            return Err(JdError::SingularPivot { col: j });
        }
        for i in 0..n {
            q[(i, j)] /= norm;
        }
    }
    Ok(q)
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn c(re: f64, im: f64) -> Scalar {
        Scalar::new(re, im)
    }

    #[test]
    fn adjoint_identity_fixed_point() {
        let i3 = Mat::identity(3);
        assert_eq!(i3.adjoint(), i3);
    }

    #[test]
    fn adjoint_single_entry() {
        let a = Mat::from_rows(&[vec![c(0.0, 0.0), c(0.0, 1.0)], vec![c(0.0, 0.0), c(0.0, 0.0)]]);
        let expect = Mat::from_rows(&[
            vec![c(0.0, 0.0), c(0.0, 0.0)],
            vec![c(0.0, -1.0), c(0.0, 0.0)],
        ]);
        assert_eq!(a.adjoint(), expect);
    }

    #[test]
    fn adjoint_involution() {
        let a = random_gaussian(4, 4, RngSeed(3), false);
        assert_eq!(a.adjoint().adjoint(), a);
    }

    #[test]
    fn unit_basis_examples() {
        let e = unit_basis(2, 0, 1).unwrap();
        assert_eq!(e, Mat::from_real(&[&[0.0, 1.0], &[0.0, 0.0]]));
        let e = unit_basis(3, 1, 1).unwrap();
        assert_eq!(e[(1, 1)], c(1.0, 0.0));
        assert_eq!(e.fro_norm(), 1.0);
        assert!(unit_basis(2, 2, 0).is_err());
    }

    #[test]
    fn unit_basis_product_rule() {
        // E_ij E_jl = E_il, checked by direct multiplication
        for n in [2usize, 4] {
            for i in 0..n {
                for j in 0..n {
                    for l in 0..n {
                        let prod = unit_basis(n, i, j).unwrap().mul(&unit_basis(n, j, l).unwrap());
                        assert_eq!(prod, unit_basis(n, i, l).unwrap());
                    }
                }
            }
        }
    }

    #[test]
    fn unitary_predicate() {
        assert!(is_unitary(&Mat::identity(3), 1e-12).unwrap());
        assert!(!is_unitary(&Mat::identity(3).scale_re(2.0), 1e-12).unwrap());
        let u = random_unitary(5, RngSeed(7), false);
        assert!(is_unitary(&u, 1e-10).unwrap());
        assert!(is_unitary(&Mat::zeros(2, 3), 1e-10).is_err());
    }

    #[test]
    fn antihermitian_predicate() {
        assert!(is_antihermitian(&Mat::zeros(2, 2), 1e-12).unwrap());
        let a = Mat::from_real(&[&[0.0, 1.0], &[-1.0, 0.0]]);
        assert!(is_antihermitian(&a, 1e-12).unwrap());
        let b = Mat::from_real(&[&[1.0, 0.0], &[0.0, 0.0]]);
        assert!(!is_antihermitian(&b, 1e-12).unwrap());
    }

    #[test]
    fn random_unitary_deterministic() {
        let a = random_unitary(4, RngSeed(42), false);
        let b = random_unitary(4, RngSeed(42), false);
        assert_eq!(a, b);
        assert_ne!(a, random_unitary(4, RngSeed(43), false));
    }

    #[test]
    fn random_unitary_scalar_case() {
        let u = random_unitary(1, RngSeed(9), false);
        assert!((u[(0, 0)].norm() - 1.0).abs() < 1e-12);
    }

    #[test]
    fn random_unitary_real_only_is_orthogonal() {
        let u = random_unitary(5, RngSeed(11), true);
        assert!(u.is_real());
        assert!(is_unitary(&u, 1e-10).unwrap());
    }

    #[test]
    fn random_unitary_det_magnitude() {
        for seed in 0..5u64 {
            let u = random_unitary(5, RngSeed(seed), false);
            assert!((u.det().unwrap().norm() - 1.0).abs() <= 1e-8);
        }
    }

    #[test]
    fn fro_dist_examples() {
        let a = random_gaussian(3, 3, RngSeed(1), false);
        assert_eq!(fro_dist(&a, &a).unwrap(), 0.0);
        let d = fro_dist(&Mat::identity(2), &Mat::zeros(2, 2)).unwrap();
        assert!((d - 2.0f64.sqrt()).abs() < 1e-15);
        assert!(fro_dist(&Mat::zeros(2, 2), &Mat::zeros(3, 3)).is_err());
    }

    #[test]
    fn fro_dist_unitary_invariance() {
        let u = random_unitary(4, RngSeed(5), false);
        let a = random_gaussian(4, 4, RngSeed(6), false);
        let b = random_gaussian(4, 4, RngSeed(7), false);
        let conj = |m: &Mat| u.mul(m).mul(&u.adjoint());
        let lhs = fro_dist(&conj(&a), &conj(&b)).unwrap();
        let rhs = fro_dist(&a, &b).unwrap();
        assert!((lhs - rhs).abs() <= 1e-10 * rhs.max(1.0));
    }

    #[test]
    fn det_matches_hand_values() {
        let a = Mat::from_real(&[&[1.0, 2.0], &[3.0, 4.0]]);
        assert!((a.det().unwrap() - c(-2.0, 0.0)).norm() < 1e-12);
        let rot = Mat::from_real(&[&[0.0, 1.0], &[-1.0, 0.0]]);
        assert!((rot.det().unwrap() - c(1.0, 0.0)).norm() < 1e-12);
    }

    #[test]
    fn json_round_trip() {
        let a = random_gaussian(3, 3, RngSeed(13), false);
        let text = serde_json::to_string(&a).unwrap();
        let back: Mat = serde_json::from_str(&text).unwrap();
        // serde_json prints shortest round-trippable decimals, so this is exact
        assert_eq!(a, back);
    }

    #[test]
    fn json_rejects_non_finite() {
        let text = r#"{"rows":1,"cols":1,"entries":[[1e999,0.0]]}"#;
        assert!(serde_json::from_str::<Mat>(text).is_err());
    }

    proptest! {
        #[test]
        fn prop_adjoint_antidistributes(seed in 0u64..500) {
            let a = random_gaussian(3, 3, RngSeed(seed), false);
            let b = random_gaussian(3, 3, RngSeed(seed + 1000), false);
            let lhs = a.mul(&b).adjoint();
            let rhs = b.adjoint().mul(&a.adjoint());
            prop_assert!(fro_dist(&lhs, &rhs).unwrap() <= 1e-12 * lhs.fro_norm().max(1.0));
        }

        #[test]
        fn prop_fro_dist_triangle(seed in 0u64..500) {
            let a = random_gaussian(3, 3, RngSeed(seed), false);
            let b = random_gaussian(3, 3, RngSeed(seed + 1), false);
            let cmat = random_gaussian(3, 3, RngSeed(seed + 2), false);
            let ab = fro_dist(&a, &b).unwrap();
            let bc = fro_dist(&b, &cmat).unwrap();
            let ac = fro_dist(&a, &cmat).unwrap();
            prop_assert!(ac <= ab + bc + 1e-12);
        }
    }
}
