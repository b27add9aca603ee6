//! Cartan involutions on gl(n, R) and the matching group-level splits.
//!
//! The involution `theta(x) = -x^T` has the skew-symmetric matrices (rotation
//! generators, `k`) as its +1 eigenspace and the symmetric matrices (dilation
//! generators, `p`) as its -1 eigenspace. On the group side, `M -> (M^T)^{-1}`
//! fixes the orthogonal matrices and flips the sign of the `p` factor in
//! `M = e^k e^p`.

mod expm;

use nalgebra::{DMatrix, SVD};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub use expm::{matrix_exp, matrix_log};

/// Reciprocal condition number below which a matrix counts as singular.
pub const DEFAULT_SINGULARITY_FLOOR: f64 = 1e-14;

/// Absolute tolerances used by the structural checks in this module.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Tolerances {
    /// Skewness, symmetry and orthogonality residuals.
    pub structural: f64,
    /// Identities between matrix exponentials.
    pub exponential: f64,
    /// Reciprocal condition floor for invertibility.
    pub singularity_floor: f64,
}

impl Default for Tolerances {
    fn default() -> Self {
        Self {
            structural: 1e-12,
            exponential: 1e-8,
            singularity_floor: DEFAULT_SINGULARITY_FLOOR,
        }
    }
}

/// An element of gl(n, R): a finite square matrix.
#[derive(Debug, Clone, PartialEq)]
pub struct AlgebraElement(DMatrix<f64>);

impl AlgebraElement {
    pub fn new(m: DMatrix<f64>) -> Result<Self> {
        check_square(&m)?;
        if m.nrows() == 0 {
            return Err(Error::Invalid("algebra element of order 0".into()));
        }
        if m.iter().any(|v| !v.is_finite()) {
            return Err(Error::NonFinite { what: "algebra element" });
        }
        Ok(Self(m))
    }

    pub fn from_rows(rows: &[Vec<f64>]) -> Result<Self> {
        Self::new(matrix_from_rows(rows)?)
    }

    /// Wraps a matrix already known to be square and finite.
    pub(crate) fn from_matrix_unchecked(m: DMatrix<f64>) -> Self {
        debug_assert!(m.is_square());
        Self(m)
    }

    pub fn zeros(n: usize) -> Self {
        Self(DMatrix::zeros(n, n))
    }

    pub fn identity(n: usize) -> Self {
        Self(DMatrix::identity(n, n))
    }

    pub fn order(&self) -> usize {
        self.0.nrows()
    }

    pub fn matrix(&self) -> &DMatrix<f64> {
        &self.0
    }

    pub fn into_matrix(self) -> DMatrix<f64> {
        self.0
    }

    pub fn to_rows(&self) -> Vec<Vec<f64>> {
        matrix_to_rows(&self.0)
    }

    pub fn norm(&self) -> f64 {
        self.0.norm()
    }

    pub fn scale(&self, s: f64) -> Self {
        Self(&self.0 * s)
    }

    pub fn is_skew(&self, tol: f64) -> bool {
        skew_residual(&self.0) <= tol
    }

    pub fn is_symmetric(&self, tol: f64) -> bool {
        symmetric_residual(&self.0) <= tol
    }
}

impl std::ops::Add for &AlgebraElement {
    type Output = AlgebraElement;
    fn add(self, rhs: &AlgebraElement) -> AlgebraElement {
        AlgebraElement(&self.0 + &rhs.0)
    }
}

impl std::ops::Sub for &AlgebraElement {
    type Output = AlgebraElement;
    fn sub(self, rhs: &AlgebraElement) -> AlgebraElement {
        AlgebraElement(&self.0 - &rhs.0)
    }
}

impl std::ops::Neg for &AlgebraElement {
    type Output = AlgebraElement;
    fn neg(self) -> AlgebraElement {
        AlgebraElement(-&self.0)
    }
}

/// The skew (`k`, rotation) and symmetric (`p`, dilation) parts of an algebra element.
#[derive(Debug, Clone, PartialEq)]
pub struct CartanSplit {
    pub k_part: AlgebraElement,
    pub p_part: AlgebraElement,
}

impl CartanSplit {
    pub fn recombine(&self) -> AlgebraElement {
        &self.k_part + &self.p_part
    }
}

/// An invertible matrix, an element of GL(n, R).
#[derive(Debug, Clone, PartialEq)]
pub struct GroupElement(DMatrix<f64>);

impl GroupElement {
    pub fn new(m: DMatrix<f64>) -> Result<Self> {
        Self::with_floor(m, DEFAULT_SINGULARITY_FLOOR)
    }

    pub fn with_floor(m: DMatrix<f64>, floor: f64) -> Result<Self> {
        check_square(&m)?;
        if m.nrows() == 0 {
            return Err(Error::Invalid("group element of order 0".into()));
        }
        if m.iter().any(|v| !v.is_finite()) {
            return Err(Error::NonFinite { what: "group element" });
        }
        let rcond = reciprocal_condition(&m);
        if !(rcond > floor) {
            return Err(Error::Singular { condition: 1.0 / rcond });
        }
        Ok(Self(m))
    }

    pub fn from_rows(rows: &[Vec<f64>]) -> Result<Self> {
        Self::new(matrix_from_rows(rows)?)
    }

    pub(crate) fn from_matrix_unchecked(m: DMatrix<f64>) -> Self {
        debug_assert!(m.is_square());
        Self(m)
    }

    pub fn identity(n: usize) -> Self {
        Self(DMatrix::identity(n, n))
    }

    pub fn order(&self) -> usize {
        self.0.nrows()
    }

    pub fn matrix(&self) -> &DMatrix<f64> {
        &self.0
    }

    pub fn into_matrix(self) -> DMatrix<f64> {
        self.0
    }

    pub fn to_rows(&self) -> Vec<Vec<f64>> {
        matrix_to_rows(&self.0)
    }

    pub fn mul(&self, rhs: &GroupElement) -> GroupElement {
        GroupElement(&self.0 * &rhs.0)
    }

    pub fn inverse(&self) -> Result<GroupElement> {
        self.0
            .clone()
            .try_inverse()
            .map(GroupElement)
            .ok_or(Error::Singular { condition: f64::INFINITY })
    }

    /// `||M^T M - I||_F`.
    pub fn orthogonality_residual(&self) -> f64 {
        let n = self.order();
        (self.0.transpose() * &self.0 - DMatrix::<f64>::identity(n, n)).norm()
    }
}

/// `M = orthogonal * positive` with `positive` symmetric positive definite.
#[derive(Debug, Clone, PartialEq)]
pub struct PolarFactors {
    pub orthogonal: GroupElement,
    pub positive: GroupElement,
}

/// Logarithms of the polar factors: `M = exp(k_log) exp(p_log)`.
#[derive(Debug, Clone, PartialEq)]
pub struct GroupSplit {
    pub k_log: AlgebraElement,
    pub p_log: AlgebraElement,
}

/// The Cartan involution of gl(n, R): `x -> -x^T`.
pub fn theta(x: &AlgebraElement) -> AlgebraElement {
    AlgebraElement(-x.0.transpose())
}

/// Splits `x` into its +1 (skew) and -1 (symmetric) eigenparts under `theta`.
pub fn cartan_split(x: &AlgebraElement) -> CartanSplit {
    let (k, p) = split_matrix(&x.0);
    CartanSplit {
        k_part: AlgebraElement(k),
        p_part: AlgebraElement(p),
    }
}

/// Entrywise `(x - x^T)/2` and `(x + x^T)/2`. Both results are exactly
/// skew / exactly symmetric in floating point.
pub(crate) fn split_matrix(x: &DMatrix<f64>) -> (DMatrix<f64>, DMatrix<f64>) {
    let n = x.nrows();
    let k = DMatrix::from_fn(n, n, |i, j| (x[(i, j)] - x[(j, i)]) / 2.0);
    let p = DMatrix::from_fn(n, n, |i, j| (x[(i, j)] + x[(j, i)]) / 2.0);
    (k, p)
}

/// The commutator `xy - yx`.
pub fn bracket(x: &AlgebraElement, y: &AlgebraElement) -> Result<AlgebraElement> {
    same_order(x.order(), y.order())?;
    Ok(AlgebraElement(&x.0 * &y.0 - &y.0 * &x.0))
}

/// The group involution `M -> (M^T)^{-1}`.
pub fn group_involution(m: &GroupElement) -> Result<GroupElement> {
    group_involution_with(m, &Tolerances::default())
}

pub fn group_involution_with(m: &GroupElement, tol: &Tolerances) -> Result<GroupElement> {
    let rcond = reciprocal_condition(&m.0);
    if !(rcond > tol.singularity_floor) {
        return Err(Error::Singular { condition: 1.0 / rcond });
    }
    let inv = m
        .0
        .transpose()
        .try_inverse()
        .ok_or(Error::Singular { condition: 1.0 / rcond })?;
    Ok(GroupElement(inv))
}

/// Polar factorization `M = O P` with `P = (M^T M)^{1/2}`.
///
/// Computed from the SVD `M = U S W^T`: `O = U W^T`, `P = W S W^T`, which is
/// the same pair as the eigen-route without squaring the condition number.
pub fn polar_decompose(m: &GroupElement) -> Result<PolarFactors> {
    let n = m.order();
    let svd = SVD::new(m.0.clone(), true, true);
    let u = svd.u.as_ref().expect("u requested");
    let v_t = svd.v_t.as_ref().expect("v_t requested");
    let smax = svd.singular_values.max();
    let smin = svd.singular_values.min();
    if !(smin > DEFAULT_SINGULARITY_FLOOR * smax) {
        return Err(Error::Singular { condition: smax / smin });
    }
    let orthogonal = u * v_t;
    let w = v_t.transpose();
    let mut positive = &w * DMatrix::from_diagonal(&svd.singular_values) * v_t;
    symmetrize(&mut positive);
    debug_assert_eq!(positive.nrows(), n);
    Ok(PolarFactors {
        orthogonal: GroupElement(orthogonal),
        positive: GroupElement(positive),
    })
}

/// Factors `M = exp(k) exp(p)` with `k` skew and `p` symmetric.
pub fn group_factorize(m: &GroupElement) -> Result<GroupSplit> {
    let polar = polar_decompose(m)?;
    let k_raw = matrix_log(&polar.orthogonal)?;
    // Project onto so(n); the orthogonal factor is orthogonal only to rounding.
    let (k, _) = split_matrix(&k_raw.0);
    let p_log = expm::spd_log(&polar.positive.0)?;
    Ok(GroupSplit {
        k_log: AlgebraElement(k),
        p_log: AlgebraElement(p_log),
    })
}

/// The dual of a group element, `Theta(M) = (M^T)^{-1}`. If `M = e^k e^p`
/// then the dual is `e^k e^{-p}`.
pub fn dual_group_element(m: &GroupElement) -> Result<GroupElement> {
    group_involution(m)
}

/// `B(x, y) = 2n tr(xy) - 2 tr(x) tr(y)`, the Killing form of gl(n, R).
pub fn killing_form(x: &AlgebraElement, y: &AlgebraElement) -> Result<f64> {
    same_order(x.order(), y.order())?;
    let n = x.order() as f64;
    Ok(2.0 * n * (&x.0 * &y.0).trace() - 2.0 * x.0.trace() * y.0.trace())
}

/// `B_theta(x, y) = -B(x, theta y) = 2n tr(x y^T) - 2 tr(x) tr(y)`.
///
/// Positive semidefinite on gl(n, R) with kernel the scalar matrices;
/// positive definite on the traceless part.
pub fn killing_theta_form(x: &AlgebraElement, y: &AlgebraElement) -> Result<f64> {
    same_order(x.order(), y.order())?;
    let n = x.order() as f64;
    Ok(2.0 * n * trace_form(x, y)? - 2.0 * x.0.trace() * y.0.trace())
}

/// The Frobenius inner product `tr(x y^T)`.
pub fn trace_form(x: &AlgebraElement, y: &AlgebraElement) -> Result<f64> {
    same_order(x.order(), y.order())?;
    Ok(x.0.dot(&y.0))
}

/// `||x + x^T||_F`.
pub fn skew_residual(x: &DMatrix<f64>) -> f64 {
    (x + x.transpose()).norm()
}

/// `||x - x^T||_F`.
pub fn symmetric_residual(x: &DMatrix<f64>) -> f64 {
    (x - x.transpose()).norm()
}

pub(crate) fn symmetrize(m: &mut DMatrix<f64>) {
    let n = m.nrows();
    for i in 0..n {
        for j in (i + 1)..n {
            let v = (m[(i, j)] + m[(j, i)]) / 2.0;
            m[(i, j)] = v;
            m[(j, i)] = v;
        }
    }
}

/// `sigma_min / sigma_max`, zero for singular or empty input.
pub fn reciprocal_condition(m: &DMatrix<f64>) -> f64 {
    let sv = m.clone().singular_values();
    let smax = sv.max();
    if smax == 0.0 || !smax.is_finite() {
        return 0.0;
    }
    sv.min() / smax
}

pub fn matrix_from_rows(rows: &[Vec<f64>]) -> Result<DMatrix<f64>> {
    let nrows = rows.len();
    if nrows == 0 {
        return Err(Error::Invalid("empty matrix".into()));
    }
    let ncols = rows[0].len();
    if rows.iter().any(|r| r.len() != ncols) {
        return Err(Error::Invalid("ragged matrix rows".into()));
    }
    Ok(DMatrix::from_fn(nrows, ncols, |i, j| rows[i][j]))
}

pub fn matrix_to_rows(m: &DMatrix<f64>) -> Vec<Vec<f64>> {
    (0..m.nrows())
        .map(|i| (0..m.ncols()).map(|j| m[(i, j)]).collect())
        .collect()
}

fn check_square(m: &DMatrix<f64>) -> Result<()> {
    if !m.is_square() {
        return Err(Error::NotSquare { rows: m.nrows(), cols: m.ncols() });
    }
    Ok(())
}

fn same_order(a: usize, b: usize) -> Result<()> {
    if a != b {
        return Err(Error::OrderMismatch { expected: a, found: b });
    }
    Ok(())
}
