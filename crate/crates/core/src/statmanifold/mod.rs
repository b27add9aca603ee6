//! Statistical families as Riemannian manifolds with dual connections.
//!
//! The Fisher metric `g_ij = E[d_i l d_j l]` and the Amari-Chentsov tensor
//! `T_ijk = E[d_i l d_j l d_k l]` come from quadrature over the family's
//! observation space. Christoffel symbols come from central differences of
//! the quadrature metric, and
//!
//! ```text
//! Gamma(alpha)^k_ij = Gamma(LC)^k_ij - (alpha / 2) g^kl T_ijl.
//! ```
//!
//! In the frame orthonormal for `g` (pointwise Cholesky `g = L L^T`, frame
//! `A = L^{-T}`), the Levi-Civita form is skew-valued and the alpha part is
//! `-(alpha / 2) L^{-1} T_i L^{-T}`, a symmetric-valued form.

mod family;

use std::sync::Arc;

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use crate::connection::{frame_change, ConnectionForm, DomainBox, FnForm, FnGauge, GaugeField, MetricField, SharedForm};
use crate::error::{Error, Result};
use crate::liealg::AlgebraElement;

pub use family::{
    default_domain, expectation, family_by_name, gauss_hermite, normalization, Bernoulli, Gaussian1d, StatFamily,
    BERNOULLI_EDGE, DEFAULT_HERMITE_NODES, GAUSSIAN_MIN_SIGMA,
};

pub const DEFAULT_FD_STEP: f64 = 1e-5;

#[derive(Debug, Clone, PartialEq)]
pub struct FisherMetricValue {
    pub g: DMatrix<f64>,
}

/// Fully symmetric 3-tensor stored densely, index order `(i, j, k)`.
#[derive(Debug, Clone, PartialEq)]
pub struct AmariTensorValue {
    dim: usize,
    data: Vec<f64>,
}

impl AmariTensorValue {
    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn get(&self, i: usize, j: usize, k: usize) -> f64 {
        self.data[(i * self.dim + j) * self.dim + k]
    }

    pub fn to_nested(&self) -> Vec<Vec<Vec<f64>>> {
        nested(self.dim, |i, j, k| self.get(i, j, k))
    }

    /// Largest deviation from full permutation symmetry.
    pub fn symmetry_residual(&self) -> f64 {
        let d = self.dim;
        let mut worst: f64 = 0.0;
        for i in 0..d {
            for j in 0..d {
                for k in 0..d {
                    let v = self.get(i, j, k);
                    for w in [self.get(j, i, k), self.get(i, k, j), self.get(k, j, i)] {
                        worst = worst.max((v - w).abs());
                    }
                }
            }
        }
        worst
    }
}

/// Christoffel symbols `Gamma^k_ij`, stored with `k` outermost.
#[derive(Debug, Clone, PartialEq)]
pub struct ChristoffelValue {
    dim: usize,
    data: Vec<f64>,
}

impl ChristoffelValue {
    pub fn dim(&self) -> usize {
        self.dim
    }

    /// `Gamma^k_{ij}`.
    pub fn get(&self, k: usize, i: usize, j: usize) -> f64 {
        self.data[(k * self.dim + i) * self.dim + j]
    }

    /// Nested arrays `[k][i][j]`.
    pub fn to_nested(&self) -> Vec<Vec<Vec<f64>>> {
        nested(self.dim, |k, i, j| self.get(k, i, j))
    }

    /// `max |Gamma^k_ij - Gamma^k_ji|`.
    pub fn lower_symmetry_residual(&self) -> f64 {
        let d = self.dim;
        let mut worst: f64 = 0.0;
        for k in 0..d {
            for i in 0..d {
                for j in 0..d {
                    worst = worst.max((self.get(k, i, j) - self.get(k, j, i)).abs());
                }
            }
        }
        worst
    }

    /// The connection matrices `(omega_i)^k_j = Gamma^k_ij`.
    pub fn form_matrices(&self) -> Vec<DMatrix<f64>> {
        let d = self.dim;
        (0..d).map(|i| DMatrix::from_fn(d, d, |k, j| self.get(k, i, j))).collect()
    }
}

fn nested(d: usize, f: impl Fn(usize, usize, usize) -> f64) -> Vec<Vec<Vec<f64>>> {
    (0..d).map(|a| (0..d).map(|b| (0..d).map(|c| f(a, b, c)).collect()).collect()).collect()
}

/// Frame in which a statistical connection form is expressed.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Frame {
    /// Coordinate frame `d/d params_j`.
    Coordinate,
    /// Pointwise Fisher-orthonormal frame from the Cholesky factor.
    Orthonormal,
}

impl std::str::FromStr for Frame {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "coordinate" => Ok(Frame::Coordinate),
            "orthonormal" => Ok(Frame::Orthonormal),
            other => Err(Error::Invalid(format!("unknown frame '{other}' (coordinate | orthonormal)"))),
        }
    }
}

/// `g_ij = E[d_i l d_j l]`.
pub fn fisher_metric(family: &dyn StatFamily, point: &[f64]) -> Result<FisherMetricValue> {
    Ok(FisherMetricValue { g: moments(family, point, false)?.0 })
}

/// `T_ijk = E[d_i l d_j l d_k l]`.
pub fn amari_tensor(family: &dyn StatFamily, point: &[f64]) -> Result<AmariTensorValue> {
    Ok(moments(family, point, true)?.1)
}

/// Metric and tensor from a single quadrature pass.
pub fn fisher_and_amari(family: &dyn StatFamily, point: &[f64]) -> Result<(FisherMetricValue, AmariTensorValue)> {
    let (g, t) = moments(family, point, true)?;
    Ok((FisherMetricValue { g }, t))
}

fn moments(family: &dyn StatFamily, point: &[f64], third: bool) -> Result<(DMatrix<f64>, AmariTensorValue)> {
    family.check_point(point)?;
    let d = family.param_dim();
    let mut g = DMatrix::zeros(d, d);
    let mut t = vec![0.0; d * d * d];
    let mut s = vec![0.0; d];
    for (x, q) in family.probability_rule(point) {
        family.score_into(point, x, &mut s);
        for i in 0..d {
            let qi = q * s[i];
            for j in i..d {
                let qij = qi * s[j];
                g[(i, j)] += qij;
                if third {
                    for k in j..d {
                        t[(i * d + j) * d + k] += qij * s[k];
                    }
                }
            }
        }
    }
    for i in 0..d {
        for j in 0..i {
            g[(i, j)] = g[(j, i)];
        }
    }
    if third {
        for i in 0..d {
            for j in i..d {
                for k in j..d {
                    let v = t[(i * d + j) * d + k];
                    for (a, b, c) in [(i, k, j), (j, i, k), (j, k, i), (k, i, j), (k, j, i)] {
                        t[(a * d + b) * d + c] = v;
                    }
                }
            }
        }
    }
    Ok((g, AmariTensorValue { dim: d, data: t }))
}

/// `d g / d params_l` by central differences, one matrix per `l`.
pub fn metric_derivatives(family: &dyn StatFamily, point: &[f64], fd_step: f64) -> Result<Vec<DMatrix<f64>>> {
    Ok(stencil_metrics(family, point, fd_step)?.into_iter().map(|(p, m)| (p - m) / (2.0 * fd_step)).collect())
}

// (g(x + h e_l), g(x - h e_l)) for each axis l
fn stencil_metrics(family: &dyn StatFamily, point: &[f64], fd_step: f64) -> Result<Vec<(DMatrix<f64>, DMatrix<f64>)>> {
    check_fd_step(fd_step)?;
    let d = family.param_dim();
    if point.len() != d {
        return Err(Error::OrderMismatch { expected: d, found: point.len() });
    }
    let mut x = point.to_vec();
    (0..d)
        .map(|l| {
            x[l] = point[l] + fd_step;
            let plus = fisher_metric(family, &x)?.g;
            x[l] = point[l] - fd_step;
            let minus = fisher_metric(family, &x)?.g;
            x[l] = point[l];
            Ok((plus, minus))
        })
        .collect()
}

/// Levi-Civita symbols of the Fisher metric.
pub fn levi_civita(family: &dyn StatFamily, point: &[f64], fd_step: f64) -> Result<ChristoffelValue> {
    alpha_christoffel(family, 0.0, point, fd_step)
}

/// `Gamma(alpha)^k_ij = Gamma(LC)^k_ij - (alpha/2) g^kl T_ijl`.
pub fn alpha_christoffel(family: &dyn StatFamily, alpha: f64, point: &[f64], fd_step: f64) -> Result<ChristoffelValue> {
    if !alpha.is_finite() {
        return Err(Error::NonFinite { what: "alpha" });
    }
    let (g, t) = moments(family, point, alpha != 0.0)?;
    let dg = metric_derivatives(family, point, fd_step)?;
    christoffel_from(&g, &dg, &t, alpha)
}

fn christoffel_from(g: &DMatrix<f64>, dg: &[DMatrix<f64>], t: &AmariTensorValue, alpha: f64) -> Result<ChristoffelValue> {
    let g_inv = invert_spd(g)?;
    let d = g.nrows();
    let mut data = vec![0.0; d * d * d];
    for k in 0..d {
        for i in 0..d {
            for j in 0..d {
                let mut acc = 0.0;
                for l in 0..d {
                    acc += g_inv[(k, l)] * (dg[i][(j, l)] + dg[j][(i, l)] - dg[l][(i, j)]);
                }
                let mut v = 0.5 * acc;
                if alpha != 0.0 {
                    let c: f64 = (0..d).map(|l| g_inv[(k, l)] * t.get(i, j, l)).sum();
                    v -= 0.5 * alpha * c;
                }
                data[(k * d + i) * d + j] = v;
            }
        }
    }
    Ok(ChristoffelValue { dim: d, data })
}

/// `d_k g_ij - g_lj Gamma(alpha)^l_ki - g_il Gamma(-alpha)^l_kj`; zero for a
/// dual pair of connections.
pub fn metric_duality_defect(
    family: &dyn StatFamily,
    alpha: f64,
    point: &[f64],
    (i, j, k): (usize, usize, usize),
    fd_step: f64,
) -> Result<f64> {
    let d = family.param_dim();
    if i >= d || j >= d || k >= d {
        return Err(Error::Invalid(format!("index triple ({i}, {j}, {k}) out of range for dimension {d}")));
    }
    let g = fisher_metric(family, point)?.g;
    let dg = metric_derivatives(family, point, fd_step)?;
    let plus = alpha_christoffel(family, alpha, point, fd_step)?;
    let minus = alpha_christoffel(family, -alpha, point, fd_step)?;
    let mut defect = dg[k][(i, j)];
    for l in 0..d {
        defect -= g[(l, j)] * plus.get(l, k, i) + g[(i, l)] * minus.get(l, k, j);
    }
    Ok(defect)
}

/// The Fisher metric as a fiber inner product on the tangent bundle.
#[derive(Debug, Clone)]
pub struct FisherMetricField {
    family: Arc<dyn StatFamily>,
}

impl FisherMetricField {
    pub fn new(family: Arc<dyn StatFamily>) -> Self {
        Self { family }
    }
}

impl MetricField for FisherMetricField {
    fn fiber_dim(&self) -> usize {
        self.family.param_dim()
    }
    fn eval(&self, x: &[f64]) -> Result<DMatrix<f64>> {
        Ok(fisher_metric(self.family.as_ref(), x)?.g)
    }
}

/// The frame field `A = L^{-T}` with `g = L L^T`; its columns are Fisher-orthonormal.
pub fn orthonormal_gauge(family: Arc<dyn StatFamily>) -> Arc<dyn GaugeField> {
    let d = family.param_dim();
    Arc::new(FnGauge::new(d, move |x| inverse_transpose_factor(&fisher_metric(family.as_ref(), x)?.g)))
}

/// The alpha-connection of `family` as a form over `domain`.
///
/// The orthonormal variant equals `frame_change` of the coordinate form by
/// [`orthonormal_gauge`], with the stencil metrics shared between the
/// Christoffel and gauge derivatives.
pub fn connection_form_of(
    family: Arc<dyn StatFamily>,
    alpha: f64,
    domain: DomainBox,
    frame: Frame,
    fd_step: f64,
) -> Result<SharedForm> {
    check_fd_step(fd_step)?;
    if !alpha.is_finite() {
        return Err(Error::NonFinite { what: "alpha" });
    }
    check_domain(family.as_ref(), &domain)?;
    Ok(Arc::new(StatForm { family, alpha, domain, frame, fd_step }))
}

/// Coordinate-frame alpha-connection via the generic gauge machinery; kept
/// as a cross-check for [`connection_form_of`].
pub fn connection_form_via_gauge(
    family: Arc<dyn StatFamily>,
    alpha: f64,
    domain: DomainBox,
    fd_step: f64,
) -> Result<SharedForm> {
    let coordinate = connection_form_of(family.clone(), alpha, domain, Frame::Coordinate, fd_step)?;
    frame_change(&coordinate, orthonormal_gauge(family), fd_step)
}

#[derive(Debug)]
struct StatForm {
    family: Arc<dyn StatFamily>,
    alpha: f64,
    domain: DomainBox,
    frame: Frame,
    fd_step: f64,
}

impl ConnectionForm for StatForm {
    fn base_dim(&self) -> usize {
        self.family.param_dim()
    }
    fn fiber_dim(&self) -> usize {
        self.family.param_dim()
    }
    fn domain(&self) -> &DomainBox {
        &self.domain
    }

    fn eval(&self, x: &[f64]) -> Result<Vec<AlgebraElement>> {
        self.domain.check(x)?;
        let fam = self.family.as_ref();
        let h = self.fd_step;
        let (g, t) = moments(fam, x, self.alpha != 0.0)?;
        let stencil = stencil_metrics(fam, x, h)?;
        let dg: Vec<DMatrix<f64>> = stencil.iter().map(|(p, m)| (p - m) / (2.0 * h)).collect();
        let coordinate = christoffel_from(&g, &dg, &t, self.alpha)?.form_matrices();
        let mats = match self.frame {
            Frame::Coordinate => coordinate,
            Frame::Orthonormal => {
                // A = L^{-T}, A^{-1} = L^T
                let l = cholesky_factor(&g)?;
                let lt = l.transpose();
                let a = inverse_transpose_factor(&g)?;
                coordinate
                    .iter()
                    .zip(&stencil)
                    .map(|(w, (gp, gm))| {
                        let da = (inverse_transpose_factor(gp)? - inverse_transpose_factor(gm)?) / (2.0 * h);
                        Ok(&lt * w * &a + &lt * da)
                    })
                    .collect::<Result<Vec<_>>>()?
            }
        };
        mats.into_iter().map(AlgebraElement::new).collect()
    }
}

fn inverse_transpose_factor(g: &DMatrix<f64>) -> Result<DMatrix<f64>> {
    cholesky_factor(g)?
        .transpose()
        .try_inverse()
        .ok_or_else(|| Error::Invalid("Cholesky factor is singular".into()))
}

/// The symmetric-valued form `x -> [L^{-1} T_i L^{-T}]_i` with `(T_i)_lj = T_ijl`.
///
/// In the orthonormal frame, `omega_minus` of the alpha-connection equals
/// `-(alpha / 2)` times this form.
pub fn amari_form(family: Arc<dyn StatFamily>, domain: DomainBox) -> Result<SharedForm> {
    check_domain(family.as_ref(), &domain)?;
    let d = family.param_dim();
    let fam = family.clone();
    Ok(Arc::new(FnForm::new(format!("{}-amari", family.name()), d, domain, move |x| {
        let l = cholesky_factor(&fisher_metric(fam.as_ref(), x)?.g)?;
        let l_inv = l.try_inverse().ok_or_else(|| Error::Invalid("Cholesky factor is singular".into()))?;
        let t = amari_tensor(fam.as_ref(), x)?;
        Ok((0..d)
            .map(|i| {
                let ti = DMatrix::from_fn(d, d, |l, j| t.get(i, j, l));
                let mut m = &l_inv * ti * l_inv.transpose();
                crate::liealg::symmetrize(&mut m);
                m
            })
            .collect())
    })))
}

fn check_domain(family: &dyn StatFamily, domain: &DomainBox) -> Result<()> {
    if domain.dim() != family.param_dim() {
        return Err(Error::OrderMismatch { expected: family.param_dim(), found: domain.dim() });
    }
    family.check_point(&domain.lower)?;
    family.check_point(&domain.upper)
}

fn check_fd_step(h: f64) -> Result<()> {
    if !(h > 0.0 && h.is_finite()) {
        return Err(Error::Invalid(format!("finite-difference step must be positive, got {h}")));
    }
    Ok(())
}

fn cholesky_factor(g: &DMatrix<f64>) -> Result<DMatrix<f64>> {
    g.clone()
        .cholesky()
        .map(|c| c.l())
        .ok_or_else(|| Error::Invalid("Fisher metric is not positive definite".into()))
}

fn invert_spd(g: &DMatrix<f64>) -> Result<DMatrix<f64>> {
    g.clone()
        .cholesky()
        .map(|c| c.inverse())
        .ok_or_else(|| Error::Invalid("Fisher metric is not positive definite".into()))
}
