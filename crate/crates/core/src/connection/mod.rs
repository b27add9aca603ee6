//! Connection forms over coordinate charts and parallel transport.
//!
//! A connection form assigns to every chart point `x` one matrix `omega_i(x)`
//! per base direction. A vector `V` is parallel along a curve `gamma` when
//!
//! ```text
//! dV/dt + sum_i omega_i(gamma(t)) * dgamma^i/dt * V = 0
//! ```
//!
//! so skew-valued forms transport by rotations.

mod curve;
mod dual;
mod grid;
mod transport;

use std::fmt;
use std::sync::Arc;

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::liealg::AlgebraElement;

pub use curve::{Curve, Loop, Piece, CLOSURE_TOL};
pub use dual::{alpha_form, dual_form, frame_change, omega_minus, FnGauge, GaugeField, SplitMap, SplitMapForm, GaugedForm};
pub use grid::{GridForm, GridFormFile};
pub use transport::{loop_holonomy, pairing_defect, transport, transport_matrix};

/// Relative slack allowed when testing membership of a point in a domain box.
const DOMAIN_SLACK: f64 = 1e-12;

/// Axis-aligned box `[lower_i, upper_i]` in chart coordinates.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DomainBox {
    pub lower: Vec<f64>,
    pub upper: Vec<f64>,
}

impl DomainBox {
    pub fn new(lower: Vec<f64>, upper: Vec<f64>) -> Result<Self> {
        if lower.is_empty() || lower.len() != upper.len() {
            return Err(Error::Invalid("domain bounds must be non-empty and of equal length".into()));
        }
        if lower.iter().chain(&upper).any(|v| !v.is_finite()) {
            return Err(Error::NonFinite { what: "domain bounds" });
        }
        if lower.iter().zip(&upper).any(|(l, u)| !(l < u)) {
            return Err(Error::Invalid("domain lower bounds must be strictly below upper bounds".into()));
        }
        Ok(Self { lower, upper })
    }

    /// The whole coordinate space.
    pub fn unbounded(dim: usize) -> Self {
        Self { lower: vec![f64::NEG_INFINITY; dim], upper: vec![f64::INFINITY; dim] }
    }

    pub fn dim(&self) -> usize {
        self.lower.len()
    }

    pub fn contains(&self, x: &[f64]) -> bool {
        x.len() == self.dim()
            && x.iter().zip(self.lower.iter().zip(&self.upper)).all(|(&v, (&lo, &hi))| {
                let slack = DOMAIN_SLACK * (1.0 + v.abs());
                v.is_finite() && v >= lo - slack && v <= hi + slack
            })
    }

    pub fn check(&self, x: &[f64]) -> Result<()> {
        if x.len() != self.dim() {
            return Err(Error::OrderMismatch { expected: self.dim(), found: x.len() });
        }
        if !self.contains(x) {
            return Err(Error::Domain {
                point: x.to_vec(),
                reason: format!("outside box {:?}..{:?}", self.lower, self.upper),
            });
        }
        Ok(())
    }
}

/// A point in chart coordinates.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(transparent)]
pub struct ChartPoint(Vec<f64>);

impl ChartPoint {
    pub fn new(coords: Vec<f64>) -> Result<Self> {
        if coords.is_empty() {
            return Err(Error::Invalid("chart point needs at least one coordinate".into()));
        }
        if coords.iter().any(|v| !v.is_finite()) {
            return Err(Error::NonFinite { what: "chart point" });
        }
        Ok(Self(coords))
    }

    pub fn coords(&self) -> &[f64] {
        &self.0
    }

    pub fn dim(&self) -> usize {
        self.0.len()
    }
}

/// A matrix-valued 1-form on a chart: `x -> [omega_1(x), ..., omega_d(x)]`.
///
/// Implementations are immutable and shared freely across threads.
pub trait ConnectionForm: Send + Sync + fmt::Debug {
    fn base_dim(&self) -> usize;
    fn fiber_dim(&self) -> usize;
    fn domain(&self) -> &DomainBox;

    /// Evaluates the `base_dim` matrices of order `fiber_dim` at `x`.
    fn eval(&self, x: &[f64]) -> Result<Vec<AlgebraElement>>;

    /// `sum_i omega_i(x) * velocity_i`.
    fn contract(&self, x: &[f64], velocity: &[f64]) -> Result<DMatrix<f64>> {
        let n = self.fiber_dim();
        let mut out = DMatrix::zeros(n, n);
        for (w, &v) in self.eval(x)?.iter().zip(velocity) {
            if v != 0.0 {
                out += w.matrix() * v;
            }
        }
        Ok(out)
    }
}

pub type SharedForm = Arc<dyn ConnectionForm>;

type FormFn = dyn Fn(&[f64]) -> Result<Vec<DMatrix<f64>>> + Send + Sync;

/// A form given by a closure, used for closed-form registry entries.
#[derive(Clone)]
pub struct FnForm {
    name: String,
    base_dim: usize,
    fiber_dim: usize,
    domain: DomainBox,
    f: Arc<FormFn>,
}

impl FnForm {
    pub fn new<F>(name: impl Into<String>, fiber_dim: usize, domain: DomainBox, f: F) -> Self
    where
        F: Fn(&[f64]) -> Result<Vec<DMatrix<f64>>> + Send + Sync + 'static,
    {
        Self { name: name.into(), base_dim: domain.dim(), fiber_dim, domain, f: Arc::new(f) }
    }

    pub fn name(&self) -> &str {
        &self.name
    }
}

impl fmt::Debug for FnForm {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("FnForm")
            .field("name", &self.name)
            .field("base_dim", &self.base_dim)
            .field("fiber_dim", &self.fiber_dim)
            .finish()
    }
}

impl ConnectionForm for FnForm {
    fn base_dim(&self) -> usize {
        self.base_dim
    }
    fn fiber_dim(&self) -> usize {
        self.fiber_dim
    }
    fn domain(&self) -> &DomainBox {
        &self.domain
    }
    fn eval(&self, x: &[f64]) -> Result<Vec<AlgebraElement>> {
        self.domain.check(x)?;
        let mats = (self.f)(x)?;
        if mats.len() != self.base_dim {
            return Err(Error::OrderMismatch { expected: self.base_dim, found: mats.len() });
        }
        mats.into_iter()
            .map(|m| {
                if m.nrows() != self.fiber_dim || m.ncols() != self.fiber_dim {
                    return Err(Error::OrderMismatch { expected: self.fiber_dim, found: m.nrows() });
                }
                AlgebraElement::new(m)
            })
            .collect()
    }
}

/// A form that is the same at every point.
#[derive(Debug, Clone)]
pub struct ConstantForm {
    domain: DomainBox,
    values: Vec<AlgebraElement>,
}

impl ConstantForm {
    pub fn new(domain: DomainBox, values: Vec<AlgebraElement>) -> Result<Self> {
        if values.len() != domain.dim() {
            return Err(Error::OrderMismatch { expected: domain.dim(), found: values.len() });
        }
        let n = values[0].order();
        if let Some(v) = values.iter().find(|v| v.order() != n) {
            return Err(Error::OrderMismatch { expected: n, found: v.order() });
        }
        Ok(Self { domain, values })
    }

    /// The trivial connection `omega = 0`.
    pub fn zero(domain: DomainBox, fiber_dim: usize) -> Self {
        let values = vec![AlgebraElement::zeros(fiber_dim); domain.dim()];
        Self { domain, values }
    }
}

impl ConnectionForm for ConstantForm {
    fn base_dim(&self) -> usize {
        self.values.len()
    }
    fn fiber_dim(&self) -> usize {
        self.values[0].order()
    }
    fn domain(&self) -> &DomainBox {
        &self.domain
    }
    fn eval(&self, x: &[f64]) -> Result<Vec<AlgebraElement>> {
        self.domain.check(x)?;
        Ok(self.values.clone())
    }
}

/// A field of symmetric positive definite fiber inner products `G(x)`.
pub trait MetricField: Send + Sync {
    fn fiber_dim(&self) -> usize;
    fn eval(&self, x: &[f64]) -> Result<DMatrix<f64>>;
}

/// `G(x) = G` everywhere.
#[derive(Debug, Clone)]
pub struct ConstantMetric(DMatrix<f64>);

impl ConstantMetric {
    pub fn new(g: DMatrix<f64>) -> Result<Self> {
        check_spd(&g)?;
        Ok(Self(g))
    }

    pub fn identity(n: usize) -> Self {
        Self(DMatrix::identity(n, n))
    }
}

impl MetricField for ConstantMetric {
    fn fiber_dim(&self) -> usize {
        self.0.nrows()
    }
    fn eval(&self, _x: &[f64]) -> Result<DMatrix<f64>> {
        Ok(self.0.clone())
    }
}

/// Verifies symmetry (1e-12 relative) and positive definiteness.
pub fn check_spd(g: &DMatrix<f64>) -> Result<()> {
    if !g.is_square() {
        return Err(Error::NotSquare { rows: g.nrows(), cols: g.ncols() });
    }
    if g.iter().any(|v| !v.is_finite()) {
        return Err(Error::NonFinite { what: "metric" });
    }
    if crate::liealg::symmetric_residual(g) > 1e-12 * g.norm().max(1.0) {
        return Err(Error::Invalid("metric is not symmetric".into()));
    }
    if g.clone().cholesky().is_none() {
        return Err(Error::Invalid("metric is not positive definite".into()));
    }
    Ok(())
}
