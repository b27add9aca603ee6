//! Matrix exponential and principal logarithm.
//!
//! General matrices use Pade scaling-and-squaring for `exp` and inverse
//! scaling-and-squaring (Denman-Beavers square roots plus an `atanh` series)
//! for `log`. Exactly symmetric input goes through the symmetric
//! eigendecomposition; exactly skew input of order 2 or 3 and orthogonal
//! input of order 2 or 3 use the rotation closed forms.

use nalgebra::{DMatrix, DVector};

use super::{symmetrize, AlgebraElement, GroupElement};
use crate::error::{Error, Result};

const THETA_3: f64 = 1.495585217958292e-2;
const THETA_5: f64 = 2.539398330063230e-1;
const THETA_7: f64 = 9.504178996162932e-1;
const THETA_9: f64 = 2.097847961257068e0;
const THETA_13: f64 = 5.371920351148152e0;

const PADE_3: [f64; 4] = [120.0, 60.0, 12.0, 1.0];
const PADE_5: [f64; 6] = [30240.0, 15120.0, 3360.0, 420.0, 30.0, 1.0];
const PADE_7: [f64; 8] = [17297280.0, 8648640.0, 1995840.0, 277200.0, 25200.0, 1512.0, 56.0, 1.0];
const PADE_9: [f64; 10] = [
    17643225600.0,
    8821612800.0,
    2075673600.0,
    302702400.0,
    30270240.0,
    2162160.0,
    110880.0,
    3960.0,
    90.0,
    1.0,
];
const PADE_13: [f64; 14] = [
    64764752532480000.0,
    32382376266240000.0,
    7771770303897600.0,
    1187353796428800.0,
    129060195264000.0,
    10559470521600.0,
    670442572800.0,
    33522128640.0,
    1323241920.0,
    40840800.0,
    960960.0,
    16380.0,
    182.0,
    1.0,
];

/// Eigenvalues with `re <= 0` and `|im| <= CUT_WIDTH * |lambda|` are on the cut.
const CUT_WIDTH: f64 = 1e-10;
/// `log(I + X)` series is used once `||X||_1` drops below this.
const LOG_SERIES_RADIUS: f64 = 0.25;
const MAX_SQRTS: usize = 64;
/// Orthogonality residual under which order 2/3 input takes the rotation route.
const ROTATION_ROUTE_TOL: f64 = 1e-12;

/// The matrix exponential.
pub fn matrix_exp(x: &AlgebraElement) -> Result<GroupElement> {
    let a = x.matrix();
    if a.iter().any(|v| !v.is_finite()) {
        return Err(Error::NonFinite { what: "exponent" });
    }
    let n = a.nrows();
    let out = if n == 1 {
        DMatrix::from_element(1, 1, a[(0, 0)].exp())
    } else if is_exactly_symmetric(a) {
        let eig = a.clone().symmetric_eigen();
        let mut out = &eig.eigenvectors
            * DMatrix::from_diagonal(&eig.eigenvalues.map(f64::exp))
            * eig.eigenvectors.transpose();
        symmetrize(&mut out);
        out
    } else if n == 2 && is_exactly_skew(a) {
        let phi = a[(1, 0)];
        let (s, c) = phi.sin_cos();
        DMatrix::from_row_slice(2, 2, &[c, -s, s, c])
    } else if n == 3 && is_exactly_skew(a) {
        rodrigues_exp(a)
    } else {
        pade_exp(a)
    };
    if out.iter().any(|v| !v.is_finite()) {
        return Err(Error::NonFinite { what: "matrix exponential (overflow)" });
    }
    Ok(GroupElement::from_matrix_unchecked(out))
}

/// The principal matrix logarithm.
///
/// Fails with [`Error::BranchCut`] when an eigenvalue lies on the closed
/// negative real axis.
pub fn matrix_log(m: &GroupElement) -> Result<AlgebraElement> {
    let a = m.matrix();
    let n = a.nrows();
    if n == 1 {
        let v = a[(0, 0)];
        if v <= 0.0 {
            return Err(Error::BranchCut { re: v, im: 0.0 });
        }
        return Ok(AlgebraElement::from_matrix_unchecked(DMatrix::from_element(1, 1, v.ln())));
    }
    if is_exactly_symmetric(a) {
        return spd_log(a).map(AlgebraElement::from_matrix_unchecked);
    }
    check_spectrum(a)?;
    let n_i = DMatrix::<f64>::identity(n, n);
    if (n == 2 || n == 3) && (a.transpose() * a - &n_i).norm() <= ROTATION_ROUTE_TOL {
        if let Some(l) = rotation_log(a) {
            return Ok(AlgebraElement::from_matrix_unchecked(l));
        }
    }
    let l = inverse_scaling_squaring_log(a)?;
    if l.iter().any(|v| !v.is_finite()) {
        return Err(Error::NonFinite { what: "matrix logarithm" });
    }
    Ok(AlgebraElement::from_matrix_unchecked(l))
}

/// Logarithm of a symmetric positive definite matrix via its eigendecomposition.
pub(crate) fn spd_log(p: &DMatrix<f64>) -> Result<DMatrix<f64>> {
    let eig = p.clone().symmetric_eigen();
    if let Some(&bad) = eig.eigenvalues.iter().find(|&&l| !(l > 0.0)) {
        return Err(Error::BranchCut { re: bad, im: 0.0 });
    }
    let mut out = &eig.eigenvectors
        * DMatrix::from_diagonal(&eig.eigenvalues.map(f64::ln))
        * eig.eigenvectors.transpose();
    symmetrize(&mut out);
    Ok(out)
}

fn is_exactly_symmetric(a: &DMatrix<f64>) -> bool {
    let n = a.nrows();
    (0..n).all(|i| (i + 1..n).all(|j| a[(i, j)] == a[(j, i)]))
}

fn is_exactly_skew(a: &DMatrix<f64>) -> bool {
    let n = a.nrows();
    (0..n).all(|i| a[(i, i)] == 0.0 && (i + 1..n).all(|j| a[(i, j)] == -a[(j, i)]))
}

fn norm1(a: &DMatrix<f64>) -> f64 {
    a.column_iter()
        .map(|c| c.iter().map(|v| v.abs()).sum::<f64>())
        .fold(0.0, f64::max)
}

fn rodrigues_exp(a: &DMatrix<f64>) -> DMatrix<f64> {
    let w = [a[(2, 1)], a[(0, 2)], a[(1, 0)]];
    let phi2 = w.iter().map(|v| v * v).sum::<f64>();
    let phi = phi2.sqrt();
    let (sa, sb) = if phi < 1e-3 {
        (
            1.0 - phi2 / 6.0 + phi2 * phi2 / 120.0,
            0.5 - phi2 / 24.0 + phi2 * phi2 / 720.0,
        )
    } else {
        (phi.sin() / phi, (1.0 - phi.cos()) / phi2)
    };
    DMatrix::identity(3, 3) + a * sa + (a * a) * sb
}

fn pade_exp(a: &DMatrix<f64>) -> DMatrix<f64> {
    let n = a.nrows();
    let eye = DMatrix::<f64>::identity(n, n);
    let nrm = norm1(a);
    let a2 = a * a;
    let low: [(f64, &[f64]); 4] = [
        (THETA_3, &PADE_3),
        (THETA_5, &PADE_5),
        (THETA_7, &PADE_7),
        (THETA_9, &PADE_9),
    ];
    for (theta, b) in low {
        if nrm <= theta {
            let m = b.len() - 1;
            // even powers A^0, A^2, ..., A^{m-1}
            let mut pows = vec![eye.clone()];
            for _ in 1..=m / 2 {
                let next = pows.last().unwrap() * &a2;
                pows.push(next);
            }
            let mut u = DMatrix::zeros(n, n);
            let mut v = DMatrix::zeros(n, n);
            for (k, p) in pows.iter().enumerate() {
                u += p * b[2 * k + 1];
                v += p * b[2 * k];
            }
            let u = a * u;
            return pade_solve(&u, &v);
        }
    }
    let s = if nrm > THETA_13 {
        (nrm / THETA_13).log2().ceil().max(0.0) as i32
    } else {
        0
    };
    let scale = 2f64.powi(-s);
    let a1 = a * scale;
    let a2 = &a1 * &a1;
    let a4 = &a2 * &a2;
    let a6 = &a4 * &a2;
    let b = &PADE_13;
    let u_inner = &a6 * (&a6 * b[13] + &a4 * b[11] + &a2 * b[9]) + &a6 * b[7] + &a4 * b[5] + &a2 * b[3] + &eye * b[1];
    let u = &a1 * u_inner;
    let v = &a6 * (&a6 * b[12] + &a4 * b[10] + &a2 * b[8]) + &a6 * b[6] + &a4 * b[4] + &a2 * b[2] + &eye * b[0];
    let mut r = pade_solve(&u, &v);
    for _ in 0..s {
        r = &r * &r;
    }
    r
}

fn pade_solve(u: &DMatrix<f64>, v: &DMatrix<f64>) -> DMatrix<f64> {
    let q = v - u;
    let p = v + u;
    q.lu().solve(&p).unwrap_or_else(|| DMatrix::from_element(p.nrows(), p.ncols(), f64::NAN))
}

fn check_spectrum(a: &DMatrix<f64>) -> Result<()> {
    let eig = a.complex_eigenvalues();
    for l in eig.iter() {
        let r = l.norm();
        if r == 0.0 || (l.re <= 0.0 && l.im.abs() <= CUT_WIDTH * r) {
            return Err(Error::BranchCut { re: l.re, im: l.im });
        }
    }
    Ok(())
}

/// Closed-form log of a rotation of order 2 or 3; `None` when the angle is
/// too close to pi for the closed form to be accurate.
fn rotation_log(r: &DMatrix<f64>) -> Option<DMatrix<f64>> {
    let n = r.nrows();
    if n == 2 {
        let phi = (r[(1, 0)] - r[(0, 1)]).atan2(r[(0, 0)] + r[(1, 1)]);
        return Some(DMatrix::from_row_slice(2, 2, &[0.0, -phi, phi, 0.0]));
    }
    let w = DVector::from_vec(vec![
        (r[(2, 1)] - r[(1, 2)]) / 2.0,
        (r[(0, 2)] - r[(2, 0)]) / 2.0,
        (r[(1, 0)] - r[(0, 1)]) / 2.0,
    ]);
    let s = w.norm();
    let c = (r.trace() - 1.0) / 2.0;
    let phi = s.atan2(c);
    if phi > std::f64::consts::PI - 1e-3 {
        return None;
    }
    let factor = if phi < 1e-4 { 1.0 + phi * phi / 6.0 } else { phi / s };
    let (k, _) = super::split_matrix(r);
    Some(k * factor)
}

fn inverse_scaling_squaring_log(a: &DMatrix<f64>) -> Result<DMatrix<f64>> {
    let n = a.nrows();
    let eye = DMatrix::<f64>::identity(n, n);
    let mut x = a.clone();
    let mut s = 0i32;
    while norm1(&(&x - &eye)) > LOG_SERIES_RADIUS {
        if s == MAX_SQRTS as i32 {
            return Err(Error::Invalid("matrix logarithm: square-root iteration did not reach the series radius".into()));
        }
        x = sqrtm_denman_beavers(&x)?;
        s += 1;
    }
    let d = &x - &eye;
    // log(I + D) = 2 atanh(Y), Y = D (2I + D)^{-1}
    let denom = (&eye * 2.0 + &d)
        .try_inverse()
        .ok_or(Error::Singular { condition: f64::INFINITY })?;
    let y = &d * denom;
    let y2 = &y * &y;
    let mut term = y.clone();
    let mut sum = y.clone();
    let mut k = 1usize;
    loop {
        term = &term * &y2;
        let add = &term / (2 * k + 1) as f64;
        sum += &add;
        k += 1;
        if add.norm() <= f64::EPSILON * 1e-2 * sum.norm() || k > 200 {
            break;
        }
    }
    Ok(sum * (2.0 * 2f64.powi(s)))
}

fn sqrtm_denman_beavers(a: &DMatrix<f64>) -> Result<DMatrix<f64>> {
    let n = a.nrows();
    let mut y = a.clone();
    let mut z = DMatrix::<f64>::identity(n, n);
    for _ in 0..100 {
        let y_inv = y.clone().try_inverse().ok_or(Error::Singular { condition: f64::INFINITY })?;
        let z_inv = z.clone().try_inverse().ok_or(Error::Singular { condition: f64::INFINITY })?;
        let y_next = (&y + z_inv) * 0.5;
        let z_next = (&z + y_inv) * 0.5;
        let delta = (&y_next - &y).norm();
        y = y_next;
        z = z_next;
        if delta <= 1e-15 * y.norm() {
            return Ok(y);
        }
    }
    Ok(y)
}
