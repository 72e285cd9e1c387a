//! Matrix families: diagonal sets, exact and perturbed ensembles, generalized
//! transvections, the separation condition, and SL(n) factorization into
//! elementary transvections.

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{JdError, Result};
use crate::matrix::{
    is_unitary, random_gaussian_with, random_unitary_with, Mat, RngSeed, Scalar,
};

/// The m x n table of diagonal entries d_i(k) defining D_1, ..., D_m.
#[derive(Debug, Clone, PartialEq)]
pub struct DiagonalSet {
    m: usize,
    n: usize,
    d: Vec<Scalar>, // row k holds d_1(k), ..., d_n(k)
}

#[derive(Serialize, Deserialize)]
struct DiagonalSetJson {
    m: usize,
    n: usize,
    d: Vec<Vec<[f64; 2]>>,
}

impl Serialize for DiagonalSet {
    fn serialize<S: serde::Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        DiagonalSetJson {
            m: self.m,
            n: self.n,
            d: (0..self.m)
                .map(|k| self.row(k).iter().map(|z| [z.re, z.im]).collect())
                .collect(),
        }
        .serialize(s)
    }
}

impl<'de> Deserialize<'de> for DiagonalSet {
    fn deserialize<D: serde::Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        let raw = DiagonalSetJson::deserialize(d)?;
        let mut flat = Vec::with_capacity(raw.m * raw.n);
        if raw.d.len() != raw.m {
            return Err(serde::de::Error::custom("diagonal set row count mismatch"));
        }
        for row in &raw.d {
            if row.len() != raw.n {
                return Err(serde::de::Error::custom("diagonal set row length mismatch"));
            }
            flat.extend(row.iter().map(|&[re, im]| Scalar::new(re, im)));
        }
        DiagonalSet::new(raw.m, raw.n, flat).map_err(|e| serde::de::Error::custom(e.to_string()))
    }
}

impl DiagonalSet {
    pub fn new(m: usize, n: usize, d: Vec<Scalar>) -> Result<Self> {
        if d.len() != m * n {
            return Err(JdError::ShapeMismatch(format!(
                "diagonal table needs {} entries, got {}",
                m * n,
                d.len()
            )));
        }
        for (idx, z) in d.iter().enumerate() {
            if !z.re.is_finite() || !z.im.is_finite() {
                return Err(JdError::NonFiniteEntry { i: idx / n, j: idx % n });
            }
        }
        Ok(DiagonalSet { m, n, d })
    }

    pub fn from_rows(rows: &[Vec<Scalar>]) -> Result<Self> {
        let m = rows.len();
        let n = rows.first().map_or(0, |r| r.len());
        DiagonalSet::new(m, n, rows.concat())
    }

    pub fn m(&self) -> usize {
        self.m
    }

    pub fn n(&self) -> usize {
        self.n
    }

    /// d_i(k), 0-based.
    pub fn entry(&self, k: usize, i: usize) -> Scalar {
        self.d[k * self.n + i]
    }

    /// Diagonal of D_k.
    pub fn row(&self, k: usize) -> &[Scalar] {
        &self.d[k * self.n..(k + 1) * self.n]
    }

    pub fn matrix(&self, k: usize) -> Mat {
        Mat::diagonal(self.row(k))
    }
}

/// Ordered m-tuple of n x n matrices.
#[derive(Debug, Clone, PartialEq)]
pub struct Ensemble {
    mats: Vec<Mat>,
}

#[derive(Serialize, Deserialize)]
struct EnsembleJson {
    m: usize,
    n: usize,
    mats: Vec<Mat>,
}

impl Serialize for Ensemble {
    fn serialize<S: serde::Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        EnsembleJson {
            m: self.len(),
            n: self.dim(),
            mats: self.mats.clone(),
        }
        .serialize(s)
    }
}

impl<'de> Deserialize<'de> for Ensemble {
    fn deserialize<D: serde::Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        let raw = EnsembleJson::deserialize(d)?;
        let e = Ensemble::new(raw.mats).map_err(|e| serde::de::Error::custom(e.to_string()))?;
        if e.len() != raw.m || e.dim() != raw.n {
            return Err(serde::de::Error::custom("ensemble header disagrees with matrices"));
        }
        Ok(e)
    }
}

impl Ensemble {
    pub fn new(mats: Vec<Mat>) -> Result<Self> {
        let first = mats.first().ok_or(JdError::EmptyFactorList)?;
        if !first.is_square() {
            return Err(JdError::NonSquare {
                rows: first.n_rows(),
                cols: first.n_cols(),
            });
        }
        let n = first.n_rows();
        for m in &mats {
            if m.n_rows() != n || m.n_cols() != n {
                return Err(JdError::ShapeMismatch(format!(
                    "ensemble members must all be {n}x{n}"
                )));
            }
        }
        Ok(Ensemble { mats })
    }

    pub fn mats(&self) -> &[Mat] {
        &self.mats
    }

    pub fn len(&self) -> usize {
        self.mats.len()
    }

    pub fn is_empty(&self) -> bool {
        self.mats.is_empty()
    }

    pub fn dim(&self) -> usize {
        self.mats[0].n_rows()
    }

    /// True when every member has all-zero imaginary parts.
    pub fn is_real(&self) -> bool {
        self.mats.iter().all(Mat::is_real)
    }
}

/// Elementary transvection data: `I + a E_ij` with i != j (0-based).
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Transvection {
    pub i: usize,
    pub j: usize,
    pub a: Scalar,
}

impl Transvection {
    pub fn new(i: usize, j: usize, a: Scalar) -> Self {
        assert_ne!(i, j, "transvection position must be off-diagonal");
        Transvection { i, j, a }
    }
}

/// Generalized transvection K(d_i(k), a): prescribed diagonal with `a` at the
/// off-diagonal position. `None` for the diagonal gives K(1, a), which has
/// unit determinant.
pub fn transvection_matrix(n: usize, t: &Transvection, diag_row: Option<&[Scalar]>) -> Result<Mat> {
    if t.i >= n || t.j >= n {
        return Err(JdError::IndexOutOfRange(format!(
            "transvection position ({}, {}) outside {n}x{n}",
            t.i, t.j
        )));
    }
    let mut m = match diag_row {
        Some(row) => {
            if row.len() != n {
                return Err(JdError::ShapeMismatch(format!(
                    "diagonal row has length {}, expected {n}",
                    row.len()
                )));
            }
            Mat::diagonal(row)
        }
        None => Mat::identity(n),
    };
    m[(t.i, t.j)] = t.a;
    Ok(m)
}

/// Product of the transvection matrices in sequence order.
pub fn transvection_product(n: usize, factors: &[Transvection]) -> Result<Mat> {
    let mut acc = Mat::identity(n);
    for t in factors {
        acc = acc.mul(&transvection_matrix(n, t, None)?);
    }
    Ok(acc)
}

/// Record of (U, D_k, R_k, lambda, a, transvection position) generating one
/// experiment. Indices in `tpos` are 0-based in code, 1-based on disk.
#[derive(Debug, Clone, PartialEq)]
pub struct PerturbationSetup {
    pub u: Mat,
    pub diag: DiagonalSet,
    pub r: Vec<Mat>,
    pub lambda: f64,
    pub a: Scalar,
    pub tpos: (usize, usize),
    pub seed: Option<u64>,
    pub real_only: bool,
}

#[derive(Serialize, Deserialize)]
struct SetupJson {
    n: usize,
    m: usize,
    seed: Option<u64>,
    lambda: f64,
    a: [f64; 2],
    tpos: [usize; 2], // 1-based on disk
    real_only: bool,
    u: Mat,
    diag: DiagonalSet,
    r: Vec<Mat>,
}

impl Serialize for PerturbationSetup {
    fn serialize<S: serde::Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        SetupJson {
            n: self.diag.n(),
            m: self.diag.m(),
            seed: self.seed,
            lambda: self.lambda,
            a: [self.a.re, self.a.im],
            tpos: [self.tpos.0 + 1, self.tpos.1 + 1],
            real_only: self.real_only,
            u: self.u.clone(),
            diag: self.diag.clone(),
            r: self.r.clone(),
        }
        .serialize(s)
    }
}

impl<'de> Deserialize<'de> for PerturbationSetup {
    fn deserialize<D: serde::Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        let raw = SetupJson::deserialize(d)?;
        if raw.tpos[0] == 0 || raw.tpos[1] == 0 {
            return Err(serde::de::Error::custom("tpos is 1-based on disk"));
        }
        let setup = PerturbationSetup {
            u: raw.u,
            diag: raw.diag,
            r: raw.r,
            lambda: raw.lambda,
            a: Scalar::new(raw.a[0], raw.a[1]),
            tpos: (raw.tpos[0] - 1, raw.tpos[1] - 1),
            seed: raw.seed,
            real_only: raw.real_only,
        };
        setup
            .validate()
            .map_err(|e| serde::de::Error::custom(e.to_string()))?;
        Ok(setup)
    }
}

impl PerturbationSetup {
    pub fn n(&self) -> usize {
        self.diag.n()
    }

    pub fn m(&self) -> usize {
        self.diag.m()
    }

    pub fn validate(&self) -> Result<()> {
        let n = self.diag.n();
        if !is_unitary(&self.u, 1e-10)? {
            return Err(JdError::NotUnitary {
                defect: crate::matrix::unitary_defect(&self.u),
                tol: 1e-10,
            });
        }
        if self.u.n_rows() != n {
            return Err(JdError::ShapeMismatch(format!(
                "U is {}x{}, diagonal set has n = {n}",
                self.u.n_rows(),
                self.u.n_cols()
            )));
        }
        if self.r.len() != self.diag.m() {
            return Err(JdError::ShapeMismatch(format!(
                "{} perturbation matrices for m = {}",
                self.r.len(),
                self.diag.m()
            )));
        }
        for rk in &self.r {
            if rk.n_rows() != n || rk.n_cols() != n {
                return Err(JdError::ShapeMismatch(format!(
                    "perturbation matrices must be {n}x{n}"
                )));
            }
        }
        let (i, j) = self.tpos;
        if i == j || i >= n || j >= n {
            return Err(JdError::IndexOutOfRange(format!(
                "transvection position ({i}, {j}) invalid for n = {n}"
            )));
        }
        if !self.lambda.is_finite() || !self.a.re.is_finite() || !self.a.im.is_finite() {
            return Err(JdError::ShapeMismatch("non-finite lambda or a".into()));
        }
        Ok(())
    }

    pub fn with_lambda(&self, lambda: f64) -> PerturbationSetup {
        PerturbationSetup {
            lambda,
            ..self.clone()
        }
    }
}

/// Exact ensemble: k-th member U D_k U^H.
pub fn build_m0(u: &Mat, diag: &DiagonalSet) -> Result<Ensemble> {
    if !is_unitary(u, 1e-8)? {
        return Err(JdError::NotUnitary {
            defect: crate::matrix::unitary_defect(u),
            tol: 1e-8,
        });
    }
    if u.n_rows() != diag.n() {
        return Err(JdError::ShapeMismatch(format!(
            "U is {}x{}, diagonal set has n = {}",
            u.n_rows(),
            u.n_cols(),
            diag.n()
        )));
    }
    let uh = u.adjoint();
    let mats = (0..diag.m())
        .map(|k| u.mul(&diag.matrix(k)).mul(&uh))
        .collect();
    Ensemble::new(mats)
}

/// Perturbed ensemble: k-th member U D_k U^H + lambda R_k.
pub fn build_m_lambda(setup: &PerturbationSetup) -> Result<Ensemble> {
    setup.validate()?;
    let uh = setup.u.adjoint();
    let mats = (0..setup.m())
        .map(|k| {
            setup
                .u
                .mul(&setup.diag.matrix(k))
                .mul(&uh)
                .add(&setup.r[k].scale_re(setup.lambda))
        })
        .collect();
    Ensemble::new(mats)
}

/// Transvection-perturbed ensemble: k-th member U K(d_i(k), a) U^H + lambda R_k.
pub fn build_m_a_lambda(setup: &PerturbationSetup) -> Result<Ensemble> {
    setup.validate()?;
    let n = setup.n();
    let uh = setup.u.adjoint();
    let t = Transvection::new(setup.tpos.0, setup.tpos.1, setup.a);
    let mats = (0..setup.m())
        .map(|k| {
            let kk = transvection_matrix(n, &t, Some(setup.diag.row(k)))?;
            Ok(setup
                .u
                .mul(&kk)
                .mul(&uh)
                .add(&setup.r[k].scale_re(setup.lambda)))
        })
        .collect::<Result<Vec<_>>>()?;
    Ensemble::new(mats)
}

/// The same family centered at U: k-th member K(d_i(k), a) + lambda U^H R_k U.
pub fn build_n_a_lambda(setup: &PerturbationSetup) -> Result<Ensemble> {
    setup.validate()?;
    let n = setup.n();
    let uh = setup.u.adjoint();
    let t = Transvection::new(setup.tpos.0, setup.tpos.1, setup.a);
    let mats = (0..setup.m())
        .map(|k| {
            let kk = transvection_matrix(n, &t, Some(setup.diag.row(k)))?;
            Ok(kk.add(&uh.mul(&setup.r[k]).mul(&setup.u).scale_re(setup.lambda)))
        })
        .collect::<Result<Vec<_>>>()?;
    Ensemble::new(mats)
}

/// True iff every pair i != j is separated by at least one k with
/// d_i(k) != d_j(k), compared exactly.
pub fn separation_condition(diag: &DiagonalSet) -> bool {
    separation_condition_eps(diag, 0.0)
}

/// Gap-threshold variant: a pair counts as unseparated when
/// |d_i(k) - d_j(k)| <= eps for every k.
pub fn separation_condition_eps(diag: &DiagonalSet, eps: f64) -> bool {
    let n = diag.n();
    for i in 0..n {
        for j in i + 1..n {
            let separated = (0..diag.m()).any(|k| {
                let gap = (diag.entry(k, i) - diag.entry(k, j)).norm();
                if eps == 0.0 {
                    gap != 0.0
                } else {
                    gap > eps
                }
            });
            if !separated {
                return false;
            }
        }
    }
    true
}

/// Factor a unit-determinant matrix into elementary transvections K(1, a).
///
/// Gauss-Jordan elimination where every row operation is itself a
/// transvection: the pivot is first driven to exactly 1 by adding a multiple
/// of a lower row (creating one with a unit row-add when the column is zero
/// below the pivot), then the rest of the column is cleared. The recorded
/// operations are inverted in order to give the factorization.
///
/// The output is canonical for this elimination order but not unique in any
/// mathematical sense; different elimination orders give different valid
/// factor lists.
pub fn decompose_transvections(b: &Mat, tol: f64) -> Result<Vec<Transvection>> {
    if !b.is_square() {
        return Err(JdError::NonSquare {
            rows: b.n_rows(),
            cols: b.n_cols(),
        });
    }
    let det = b.det()?;
    if (det - Scalar::new(1.0, 0.0)).norm() > tol {
        return Err(JdError::DeterminantNotOne {
            det: format!("{det}"),
            tol,
        });
    }
    let n = b.n_rows();
    let one = Scalar::new(1.0, 0.0);
    let zero = Scalar::new(0.0, 0.0);
    let pivot_floor = 1e-12 * b.max_abs().max(1.0);
    let mut a = b.clone();
    let mut ops: Vec<Transvection> = Vec::new();

    // row_r += t * row_s, recording the operation
    let row_add = |a: &mut Mat, ops: &mut Vec<Transvection>, r: usize, s: usize, t: Scalar| {
        if t == zero {
            return;
        }
        for j in 0..n {
            let add = t * a[(s, j)];
            a[(r, j)] += add;
        }
        ops.push(Transvection::new(r, s, t));
    };

    for c in 0..n.saturating_sub(1) {
        if a[(c, c)] != one {
            // find a lower row with a usable entry in this column
            let mut source = (c + 1..n).find(|&r| a[(r, c)].norm() > pivot_floor);
            if source.is_none() {
                if a[(c, c)].norm() <= pivot_floor {
                    return Err(JdError::SingularPivot { col: c });
                }
                // column is zero below a nonzero pivot: seed row c+1 from row c
                row_add(&mut a, &mut ops, c + 1, c, one);
                source = Some(c + 1);
            }
            let s = source.expect("pivot source exists");
            let t = (one - a[(c, c)]) / a[(s, c)];
            row_add(&mut a, &mut ops, c, s, t);
        }
        for r in 0..n {
            if r != c && a[(r, c)] != zero {
                let t = -a[(r, c)];
                row_add(&mut a, &mut ops, r, c, t);
            }
        }
    }
    // the first n-1 columns are now those of the identity and the (n,n) entry
    // is det(B) = 1, so only the last column above the diagonal remains
    if n > 0 {
        for r in 0..n - 1 {
            if a[(r, n - 1)] != zero {
                let t = -a[(r, n - 1)];
                row_add(&mut a, &mut ops, r, n - 1, t);
            }
        }
    }
    // L_s ... L_1 B = I, so B = inv(L_1) ... inv(L_s)
    Ok(ops
        .iter()
        .map(|op| Transvection::new(op.i, op.j, -op.a))
        .collect())
}

/// Slot-wise product of factors (C_r + lambda_r D_r): the k-th member of the
/// result is the ordered product over r of the k-th member of each factor.
pub fn product_ensemble(factors: &[(Ensemble, Ensemble, f64)]) -> Result<Ensemble> {
    let (first_c, _, _) = factors.first().ok_or(JdError::EmptyFactorList)?;
    let n = first_c.dim();
    let m = first_c.len();
    for (c, d, _) in factors {
        if c.dim() != n || d.dim() != n || c.len() != m || d.len() != m {
            return Err(JdError::ShapeMismatch(
                "all product factors must share (n, m)".into(),
            ));
        }
    }
    let mut mats = vec![Mat::identity(n); m];
    for (c, d, lambda) in factors {
        for k in 0..m {
            let term = c.mats()[k].add(&d.mats()[k].scale_re(*lambda));
            mats[k] = mats[k].mul(&term);
        }
    }
    Ensemble::new(mats)
}

/// Seeded random experiment setup. The diagonal table is resampled until the
/// separation condition holds with a healthy gap, so the denominators in the
/// first-order coefficients stay well away from zero.
pub fn random_setup(
    n: usize,
    m: usize,
    seed: RngSeed,
    lambda: f64,
    a: Scalar,
    tpos: (usize, usize),
    real_only: bool,
) -> PerturbationSetup {
    assert!(n >= 2 && m >= 1, "need n >= 2 and m >= 1");
    let mut rng = seed.rng();
    let u = random_unitary_with(n, &mut rng, real_only);
    let diag = loop {
        let table = random_gaussian_with(m, n, &mut rng, real_only);
        let diag = DiagonalSet::new(m, n, table.entries().to_vec()).expect("consistent shape");
        if separation_condition(&diag) && min_pair_denominator(&diag) > 0.25 {
            break diag;
        }
    };
    let r = (0..m)
        .map(|_| {
            let rk = random_gaussian_with(n, n, &mut rng, real_only);
            rk.scale_re(1.0 / rk.fro_norm())
        })
        .collect();
    PerturbationSetup {
        u,
        diag,
        r,
        lambda,
        a,
        tpos,
        seed: Some(seed.0),
        real_only,
    }
}

/// Smallest over pairs i < j of sum_k |d_i(k) - d_j(k)|^2.
pub fn min_pair_denominator(diag: &DiagonalSet) -> f64 {
    let n = diag.n();
    let mut best = f64::INFINITY;
    for i in 0..n {
        for j in i + 1..n {
            let s: f64 = (0..diag.m())
                .map(|k| (diag.entry(k, i) - diag.entry(k, j)).norm_sqr())
                .sum();
            best = best.min(s);
        }
    }
    best
}

/// Seeded random special-linear matrix with entries O(1): a Gaussian matrix
/// rescaled to unit determinant.
pub fn random_sl(n: usize, seed: RngSeed, real_only: bool) -> Mat {
    let mut rng = seed.rng();
    loop {
        let g = random_gaussian_with(n, n, &mut rng, real_only);
        let det = g.det().expect("square");
        if det.norm() < 1e-6 {
            continue;
        }
        if real_only {
            let scale = det.re.abs().powf(1.0 / n as f64);
            let mut b = g.scale_re(1.0 / scale);
            if det.re < 0.0 {
                for j in 0..n {
                    b[(0, j)] = -b[(0, j)];
                }
            }
            return b;
        }
        let root = det.powf(1.0 / n as f64);
        return g.scale(Complex64::new(1.0, 0.0) / root);
    }
}
