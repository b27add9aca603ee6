//! Holonomy sampling over small rectangle loops, numerical estimation of the
//! holonomy algebra, and finite-difference curvature.

use nalgebra::DMatrix;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use serde_json::json;

use crate::connection::{loop_holonomy, ChartPoint, ConnectionForm, Curve, DomainBox, Loop};
use crate::error::{Error, Result};
use crate::liealg::{bracket, matrix_log, skew_residual, AlgebraElement, GroupElement};

/// Side halvings tried before a sample is abandoned.
pub const MAX_SIDE_HALVINGS: usize = 8;
pub const MAX_CLOSURE_ROUNDS: usize = 3;
pub const DEFAULT_RANK_TOL: f64 = 1e-8;
/// Logs with Frobenius norm below this are treated as the zero element
/// before normalization; they carry only integrator round-off.
pub const DEFAULT_ZERO_FLOOR: f64 = 1e-9;

/// An axis-aligned rectangle with one corner at `base`, spanning
/// `sides.0` along axis `axes.0` and `sides.1` along axis `axes.1`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RectangleLoopSpec {
    pub base: Vec<f64>,
    pub axes: (usize, usize),
    pub sides: (f64, f64),
}

impl RectangleLoopSpec {
    pub fn validate(&self) -> Result<()> {
        let d = self.base.len();
        let (i, j) = self.axes;
        if i == j || i >= d || j >= d {
            return Err(Error::Invalid(format!("rectangle axes {:?} invalid for dimension {d}", self.axes)));
        }
        let (s, t) = self.sides;
        if !(s > 0.0 && t > 0.0 && s.is_finite() && t.is_finite()) {
            return Err(Error::Invalid(format!("rectangle sides must be positive, got ({s}, {t})")));
        }
        if self.base.iter().any(|v| !v.is_finite()) {
            return Err(Error::NonFinite { what: "rectangle base" });
        }
        Ok(())
    }

    /// Corners in traversal order, starting and ending at `base`.
    pub fn corners(&self) -> [Vec<f64>; 5] {
        let (i, j) = self.axes;
        let p0 = self.base.clone();
        let mut p1 = p0.clone();
        p1[i] += self.sides.0;
        let mut p2 = p1.clone();
        p2[j] += self.sides.1;
        let mut p3 = p0.clone();
        p3[j] += self.sides.1;
        [p0.clone(), p1, p2, p3, p0]
    }

    fn halved(&self) -> Self {
        Self { sides: (0.5 * self.sides.0, 0.5 * self.sides.1), ..self.clone() }
    }
}

/// Builds the rectangle loop traversed `i+, j+, i-, j-` on `t in [0, 4]`
/// as a polyline with `samples_per_side` segments per side.
pub fn rectangle_loop(spec: &RectangleLoopSpec, samples_per_side: usize, domain: &DomainBox) -> Result<Loop> {
    spec.validate()?;
    if samples_per_side < 2 {
        return Err(Error::Invalid("samplesPerSide must be at least 2".into()));
    }
    if domain.dim() != spec.base.len() {
        return Err(Error::OrderMismatch { expected: domain.dim(), found: spec.base.len() });
    }
    let corners = spec.corners();
    for c in &corners[..4] {
        domain.check(c)?;
    }
    let m = samples_per_side;
    let mut samples = Vec::with_capacity(4 * m + 1);
    for side in 0..4 {
        let (a, b) = (&corners[side], &corners[side + 1]);
        for k in 0..m {
            let u = k as f64 / m as f64;
            let p = a.iter().zip(b).map(|(x, y)| x + u * (y - x)).collect();
            samples.push((side as f64 + u, p));
        }
    }
    samples.push((4.0, corners[4].clone()));
    Loop::new(Curve::from_samples(&samples)?)
}

/// One holonomy element with its principal logarithm.
#[derive(Debug, Clone, PartialEq)]
pub struct HolonomySample {
    pub spec: RectangleLoopSpec,
    pub element: GroupElement,
    pub log: AlgebraElement,
}

impl HolonomySample {
    pub fn to_json(&self) -> serde_json::Value {
        json!({
            "spec": self.spec,
            "element": self.element.to_rows(),
            "log": self.log.to_rows(),
        })
    }
}

/// One JSON document per line, in sample order.
pub fn samples_to_json_lines(samples: &[HolonomySample]) -> String {
    let mut out = String::new();
    for s in samples {
        out.push_str(&s.to_json().to_string());
        out.push('\n');
    }
    out
}

/// Holonomy around a single rectangle (sides along the positive axes).
pub fn rectangle_holonomy(form: &dyn ConnectionForm, spec: &RectangleLoopSpec, steps: usize) -> Result<GroupElement> {
    let lp = rectangle_loop(spec, 2, form.domain())?;
    loop_holonomy(&lp, form, steps)
}

fn sample_one(form: &dyn ConnectionForm, spec: RectangleLoopSpec, steps: usize) -> Result<HolonomySample> {
    let mut spec = spec;
    let mut last = String::new();
    for _ in 0..=MAX_SIDE_HALVINGS {
        let element = rectangle_holonomy(form, &spec, steps)?;
        match matrix_log(&element) {
            Ok(log) => return Ok(HolonomySample { spec, element, log }),
            Err(e @ Error::BranchCut { .. }) => {
                last = e.to_string();
                spec = spec.halved();
            }
            Err(e) => return Err(e),
        }
    }
    Err(Error::Sampling { retries: MAX_SIDE_HALVINGS, reason: last })
}

/// Draws `count` rectangles at `base` with uniformly chosen axis pairs and
/// sides in `(0, max_side]`, and computes their holonomies in parallel.
///
/// Specs are drawn sequentially from a ChaCha8 stream seeded with `seed`, so
/// the output is identical across runs and thread counts.
pub fn sample_holonomy(
    form: &dyn ConnectionForm,
    base: &ChartPoint,
    count: usize,
    max_side: f64,
    seed: u64,
    steps: usize,
) -> Result<Vec<HolonomySample>> {
    if count == 0 {
        return Err(Error::Invalid("count must be at least 1".into()));
    }
    if !(max_side > 0.0 && max_side.is_finite()) {
        return Err(Error::Invalid(format!("maxSide must be positive, got {max_side}")));
    }
    let d = form.base_dim();
    if base.dim() != d {
        return Err(Error::OrderMismatch { expected: d, found: base.dim() });
    }
    if d < 2 {
        return Err(Error::Invalid("rectangle loops need a base of dimension at least 2".into()));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let specs: Vec<RectangleLoopSpec> = (0..count)
        .map(|_| {
            let i = rng.random_range(0..d);
            let mut j = rng.random_range(0..d - 1);
            if j >= i {
                j += 1;
            }
            // random::<f64>() is in [0, 1); flip it onto (0, 1]
            let s = max_side * (1.0 - rng.random::<f64>());
            let t = max_side * (1.0 - rng.random::<f64>());
            RectangleLoopSpec { base: base.coords().to_vec(), axes: (i, j), sides: (s, t) }
        })
        .collect();
    specs.into_par_iter().map(|spec| sample_one(form, spec, steps)).collect()
}

/// Numerical basis of the span of a set of holonomy logarithms.
#[derive(Debug, Clone, PartialEq)]
pub struct AlgebraEstimate {
    /// Orthonormal for the trace inner product `tr(x y^T)`.
    pub basis: Vec<AlgebraElement>,
    pub dimension: usize,
    pub in_so: bool,
    /// Largest symmetric-part norm over the basis.
    pub so_residual: f64,
    pub in_sl: bool,
    /// Largest `|trace|` over the basis.
    pub sl_residual: f64,
    /// False when bracket closure was requested and still growing after the
    /// round cap.
    pub closed: bool,
    pub closure_rounds: usize,
}

impl AlgebraEstimate {
    pub fn to_json(&self) -> serde_json::Value {
        json!({
            "basis": self.basis.iter().map(AlgebraElement::to_rows).collect::<Vec<_>>(),
            "dimension": self.dimension,
            "inSO": self.in_so,
            "soResidual": self.so_residual,
            "inSL": self.in_sl,
            "slResidual": self.sl_residual,
            "closed": self.closed,
            "closureRounds": self.closure_rounds,
        })
    }
}

/// Estimates the holonomy algebra from sample logs.
///
/// Uses [`DEFAULT_ZERO_FLOOR`]; see [`estimate_algebra_from_logs`].
pub fn estimate_algebra(samples: &[HolonomySample], closure: bool, tol: f64) -> Result<AlgebraEstimate> {
    let logs: Vec<AlgebraElement> = samples.iter().map(|s| s.log.clone()).collect();
    estimate_algebra_from_logs(&logs, closure, tol, DEFAULT_ZERO_FLOOR)
}

/// Logs below `zero_floor` are dropped, the rest normalized to unit norm and
/// stacked as rows; singular values above `tol * sigma_max` give the basis.
/// With `closure`, pairwise brackets of the basis are added unnormalized and
/// the rank recomputed, at most [`MAX_CLOSURE_ROUNDS`] times.
pub fn estimate_algebra_from_logs(
    logs: &[AlgebraElement],
    closure: bool,
    tol: f64,
    zero_floor: f64,
) -> Result<AlgebraEstimate> {
    let n = logs.first().ok_or_else(|| Error::Invalid("no samples to estimate from".into()))?.order();
    if let Some(bad) = logs.iter().find(|l| l.order() != n) {
        return Err(Error::OrderMismatch { expected: n, found: bad.order() });
    }
    if !(tol > 0.0 && tol.is_finite()) || !(zero_floor >= 0.0) {
        return Err(Error::Invalid(format!("tolerances must be positive, got tol {tol}, floor {zero_floor}")));
    }
    let mut rows: Vec<DMatrix<f64>> = logs.iter().filter_map(|l| normalized(l.matrix(), zero_floor)).collect();
    let mut basis = span_basis(&rows, n, tol);
    let mut closed = true;
    let mut rounds = 0;
    if closure {
        closed = false;
        while rounds < MAX_CLOSURE_ROUNDS {
            rounds += 1;
            let before = basis.len();
            for a in 0..before {
                for b in a + 1..before {
                    // brackets of unit basis elements are already on the
                    // right scale; rescaling near-zero ones would promote
                    // their rounding noise into spurious directions
                    let c = bracket(&basis[a], &basis[b])?.into_matrix();
                    if c.norm().is_finite() {
                        rows.push(c);
                    }
                }
            }
            basis = span_basis(&rows, n, tol);
            if basis.len() == before {
                closed = true;
                break;
            }
        }
    }
    let so_residual = basis.iter().map(|b| 0.5 * skew_residual(b.matrix())).fold(0.0, f64::max);
    let sl_residual = basis.iter().map(|b| b.matrix().trace().abs()).fold(0.0, f64::max);
    Ok(AlgebraEstimate {
        dimension: basis.len(),
        basis,
        in_so: so_residual <= tol,
        so_residual,
        in_sl: sl_residual <= tol,
        sl_residual,
        closed,
        closure_rounds: rounds,
    })
}

fn normalized(m: &DMatrix<f64>, floor: f64) -> Option<DMatrix<f64>> {
    let norm = m.norm();
    (norm > floor && norm.is_finite()).then(|| m / norm)
}

fn span_basis(rows: &[DMatrix<f64>], n: usize, tol: f64) -> Vec<AlgebraElement> {
    if rows.is_empty() {
        return Vec::new();
    }
    let nn = n * n;
    // row-major flattening of each matrix
    let stacked = DMatrix::from_fn(rows.len(), nn, |r, c| rows[r][(c / n, c % n)]);
    let svd = stacked.svd(false, true);
    let v_t = svd.v_t.expect("right singular vectors requested");
    let sigma_max = svd.singular_values.max();
    if sigma_max == 0.0 {
        return Vec::new();
    }
    svd.singular_values
        .iter()
        .enumerate()
        .filter(|(_, &s)| s > tol * sigma_max)
        .map(|(k, _)| AlgebraElement::from_matrix_unchecked(DMatrix::from_fn(n, n, |r, c| v_t[(k, r * n + c)])))
        .collect()
}

/// `F_ij = d_i omega_j - d_j omega_i + [omega_i, omega_j]` at `x` by central
/// differences with step `fd_step`.
///
/// A small rectangle of sides `(e, e)` along `(i, j)` at `x` has holonomy
/// log close to `-e^2 F_ij` under this crate's transport convention.
pub fn curvature_probe(form: &dyn ConnectionForm, x: &[f64], i: usize, j: usize, fd_step: f64) -> Result<AlgebraElement> {
    let d = form.base_dim();
    if x.len() != d {
        return Err(Error::OrderMismatch { expected: d, found: x.len() });
    }
    if i == j || i >= d || j >= d {
        return Err(Error::Invalid(format!("curvature indices ({i}, {j}) invalid for dimension {d}")));
    }
    if !(fd_step > 0.0 && fd_step.is_finite()) {
        return Err(Error::Invalid(format!("finite-difference step must be positive, got {fd_step}")));
    }
    let partial = |axis: usize, comp: usize| -> Result<DMatrix<f64>> {
        let mut p = x.to_vec();
        p[axis] = x[axis] + fd_step;
        let plus = form.eval(&p)?.swap_remove(comp).into_matrix();
        p[axis] = x[axis] - fd_step;
        let minus = form.eval(&p)?.swap_remove(comp).into_matrix();
        Ok((plus - minus) / (2.0 * fd_step))
    };
    let di_wj = partial(i, j)?;
    let dj_wi = partial(j, i)?;
    let w = form.eval(x)?;
    let comm = bracket(&w[i], &w[j])?;
    AlgebraElement::new(di_wj - dj_wi + comm.matrix())
}

/// Least-squares slope of `log y` against `log x`.
pub fn loglog_slope(xs: &[f64], ys: &[f64]) -> Result<f64> {
    if xs.len() != ys.len() || xs.len() < 2 {
        return Err(Error::Invalid("slope fit needs at least two paired points".into()));
    }
    if xs.iter().chain(ys).any(|v| !(*v > 0.0 && v.is_finite())) {
        return Err(Error::Invalid("slope fit needs positive finite values".into()));
    }
    let lx: Vec<f64> = xs.iter().map(|v| v.ln()).collect();
    let ly: Vec<f64> = ys.iter().map(|v| v.ln()).collect();
    let m = lx.len() as f64;
    let mx = lx.iter().sum::<f64>() / m;
    let my = ly.iter().sum::<f64>() / m;
    let sxy: f64 = lx.iter().zip(&ly).map(|(a, b)| (a - mx) * (b - my)).sum();
    let sxx: f64 = lx.iter().map(|a| (a - mx) * (a - mx)).sum();
    Ok(sxy / sxx)
}
