//! Dual and alpha-connections, and frame (gauge) changes.
//!
//! All of these act pointwise on the values of a form. `dual_form`,
//! `omega_minus` and `alpha_form` assume the form is written in a frame that
//! is orthonormal for the intended fiber inner product, so that the Euclidean
//! involution `x -> -x^T` is the right one.

use std::fmt;
use std::sync::Arc;

use nalgebra::DMatrix;

use super::{ConnectionForm, DomainBox, SharedForm};
use crate::error::{Error, Result};
use crate::liealg::{reciprocal_condition, split_matrix, AlgebraElement, DEFAULT_SINGULARITY_FLOOR};

/// Pointwise maps applied to the matrices of a form.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum SplitMap {
    /// `x -> -x^T`.
    Dual,
    /// `x -> x^+ + alpha x^-`.
    Alpha(f64),
    /// `x -> x^-`, the symmetric part.
    Minus,
}

impl SplitMap {
    fn apply(&self, x: &DMatrix<f64>) -> DMatrix<f64> {
        match *self {
            SplitMap::Dual => -x.transpose(),
            SplitMap::Alpha(alpha) => {
                let (k, p) = split_matrix(x);
                k + p * alpha
            }
            SplitMap::Minus => split_matrix(x).1,
        }
    }
}

/// A form obtained from another by a [`SplitMap`].
#[derive(Debug)]
pub struct SplitMapForm {
    inner: SharedForm,
    map: SplitMap,
}

impl SplitMapForm {
    pub fn inner(&self) -> &SharedForm {
        &self.inner
    }

    pub fn map(&self) -> SplitMap {
        self.map
    }
}

impl ConnectionForm for SplitMapForm {
    fn base_dim(&self) -> usize {
        self.inner.base_dim()
    }
    fn fiber_dim(&self) -> usize {
        self.inner.fiber_dim()
    }
    fn domain(&self) -> &DomainBox {
        self.inner.domain()
    }
    fn eval(&self, x: &[f64]) -> Result<Vec<AlgebraElement>> {
        Ok(self
            .inner
            .eval(x)?
            .iter()
            .map(|w| AlgebraElement::from_matrix_unchecked(self.map.apply(w.matrix())))
            .collect())
    }
}

/// The dual connection form `omega* = theta o omega`.
pub fn dual_form(form: &SharedForm) -> SharedForm {
    Arc::new(SplitMapForm { inner: form.clone(), map: SplitMap::Dual })
}

/// The symmetric (dilation) part `omega^-` of a form.
pub fn omega_minus(form: &SharedForm) -> SharedForm {
    Arc::new(SplitMapForm { inner: form.clone(), map: SplitMap::Minus })
}

/// `omega^alpha = omega^+ + alpha omega^-`.
///
/// `alpha = 1` hands back `form` itself and `alpha = -1` its dual.
pub fn alpha_form(form: &SharedForm, alpha: f64) -> Result<SharedForm> {
    if !alpha.is_finite() {
        return Err(Error::NonFinite { what: "alpha" });
    }
    Ok(if alpha == 1.0 {
        form.clone()
    } else if alpha == -1.0 {
        dual_form(form)
    } else {
        Arc::new(SplitMapForm { inner: form.clone(), map: SplitMap::Alpha(alpha) })
    })
}

/// A field of invertible fiber frames `A(x)`.
pub trait GaugeField: Send + Sync {
    fn fiber_dim(&self) -> usize;
    fn eval(&self, x: &[f64]) -> Result<DMatrix<f64>>;
}

type GaugeFn = dyn Fn(&[f64]) -> Result<DMatrix<f64>> + Send + Sync;

/// A gauge field given by a closure.
#[derive(Clone)]
pub struct FnGauge {
    fiber_dim: usize,
    f: Arc<GaugeFn>,
}

impl FnGauge {
    pub fn new<F>(fiber_dim: usize, f: F) -> Self
    where
        F: Fn(&[f64]) -> Result<DMatrix<f64>> + Send + Sync + 'static,
    {
        Self { fiber_dim, f: Arc::new(f) }
    }
}

impl GaugeField for FnGauge {
    fn fiber_dim(&self) -> usize {
        self.fiber_dim
    }
    fn eval(&self, x: &[f64]) -> Result<DMatrix<f64>> {
        (self.f)(x)
    }
}

/// `omega~_i = A^{-1} omega_i A + A^{-1} d_i A`, with `d_i A` by central differences.
pub struct GaugedForm {
    inner: SharedForm,
    gauge: Arc<dyn GaugeField>,
    fd_step: f64,
}

impl fmt::Debug for GaugedForm {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("GaugedForm").field("inner", &self.inner).field("fd_step", &self.fd_step).finish()
    }
}

impl ConnectionForm for GaugedForm {
    fn base_dim(&self) -> usize {
        self.inner.base_dim()
    }
    fn fiber_dim(&self) -> usize {
        self.inner.fiber_dim()
    }
    fn domain(&self) -> &DomainBox {
        self.inner.domain()
    }
    fn eval(&self, x: &[f64]) -> Result<Vec<AlgebraElement>> {
        let omega = self.inner.eval(x)?;
        let a = self.gauge_at(x)?;
        let rcond = reciprocal_condition(&a);
        if !(rcond > DEFAULT_SINGULARITY_FLOOR) {
            return Err(Error::GaugeSingular { point: x.to_vec(), condition: 1.0 / rcond });
        }
        let a_inv = a.clone().try_inverse().ok_or(Error::GaugeSingular {
            point: x.to_vec(),
            condition: f64::INFINITY,
        })?;
        let h = self.fd_step;
        let mut xp = x.to_vec();
        omega
            .iter()
            .enumerate()
            .map(|(i, w)| {
                xp[i] = x[i] + h;
                let a_plus = self.gauge_at(&xp)?;
                xp[i] = x[i] - h;
                let a_minus = self.gauge_at(&xp)?;
                xp[i] = x[i];
                let da = (a_plus - a_minus) / (2.0 * h);
                let out = &a_inv * w.matrix() * &a + &a_inv * da;
                AlgebraElement::new(out)
            })
            .collect()
    }
}

impl GaugedForm {
    fn gauge_at(&self, x: &[f64]) -> Result<DMatrix<f64>> {
        let a = self.gauge.eval(x)?;
        let n = self.inner.fiber_dim();
        if a.nrows() != n || a.ncols() != n {
            return Err(Error::OrderMismatch { expected: n, found: a.nrows() });
        }
        Ok(a)
    }
}

/// Re-expresses `form` in the frame field `A(x)`: a vector with components
/// `u` in the new frame has components `A u` in the old one.
///
/// Transport with the result equals `A(end)^{-1} T A(start)` where `T` is
/// transport with `form`.
pub fn frame_change(form: &SharedForm, gauge: Arc<dyn GaugeField>, fd_step: f64) -> Result<SharedForm> {
    if !(fd_step > 0.0 && fd_step.is_finite()) {
        return Err(Error::Invalid(format!("finite-difference step must be positive, got {fd_step}")));
    }
    if gauge.fiber_dim() != form.fiber_dim() {
        return Err(Error::OrderMismatch { expected: form.fiber_dim(), found: gauge.fiber_dim() });
    }
    Ok(Arc::new(GaugedForm { inner: form.clone(), gauge, fd_step }))
}
