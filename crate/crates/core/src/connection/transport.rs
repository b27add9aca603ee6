use nalgebra::{DMatrix, DVector};

use super::{dual_form, ConnectionForm, Curve, Loop, MetricField, SharedForm};
use crate::error::{Error, Result};
use crate::liealg::GroupElement;

/// Parallel transport of `v0` along `curve`.
///
/// Classical RK4 with `steps` uniform steps on the curve parameter. Steps
/// that straddle a piece boundary are split there, so piecewise curves keep
/// fourth-order accuracy.
pub fn transport(curve: &Curve, form: &dyn ConnectionForm, v0: &DVector<f64>, steps: usize) -> Result<DVector<f64>> {
    if v0.len() != form.fiber_dim() {
        return Err(Error::OrderMismatch { expected: form.fiber_dim(), found: v0.len() });
    }
    let state = DMatrix::from_column_slice(v0.len(), 1, v0.as_slice());
    let out = integrate(curve, form, state, steps)?;
    Ok(out.column(0).into_owned())
}

/// The transport map `V(start) -> V(end)` as a matrix (columns are the
/// transported basis vectors).
pub fn transport_matrix(curve: &Curve, form: &dyn ConnectionForm, steps: usize) -> Result<GroupElement> {
    let n = form.fiber_dim();
    let m = integrate(curve, form, DMatrix::identity(n, n), steps)?;
    GroupElement::new(m)
}

/// Holonomy of `form` around `lp`.
pub fn loop_holonomy(lp: &Loop, form: &dyn ConnectionForm, steps: usize) -> Result<GroupElement> {
    transport_matrix(lp.curve(), form, steps)
}

/// `<T*(l) v, T(l) w>_G - <v, w>_G` at the base point of `lp`, where `T` is
/// transport with `form` and `T*` transport with its dual.
///
/// `form` is taken to be expressed in a frame orthonormal for `metric`; the
/// coordinate vectors `v`, `w` are mapped into that frame at the base point
/// through the Cholesky factor `G = L L^T` (components `L^T v`).
pub fn pairing_defect(
    lp: &Loop,
    form: &SharedForm,
    metric: &dyn MetricField,
    v: &DVector<f64>,
    w: &DVector<f64>,
    steps: usize,
) -> Result<f64> {
    let n = form.fiber_dim();
    for x in [v, w] {
        if x.len() != n {
            return Err(Error::OrderMismatch { expected: n, found: x.len() });
        }
    }
    let base = lp.base_point();
    let g = metric.eval(&base)?;
    let l = g
        .cholesky()
        .ok_or_else(|| Error::Invalid("metric is not positive definite at the base point".into()))?
        .l();
    let lt = l.transpose();
    let u_v = &lt * v;
    let u_w = &lt * w;
    let dual = dual_form(form);
    let a = transport(lp.curve(), dual.as_ref(), &u_v, steps)?;
    let b = transport(lp.curve(), form.as_ref(), &u_w, steps)?;
    Ok(a.dot(&b) - u_v.dot(&u_w))
}

fn integrate(curve: &Curve, form: &dyn ConnectionForm, mut state: DMatrix<f64>, steps: usize) -> Result<DMatrix<f64>> {
    if steps == 0 {
        return Err(Error::Invalid("steps must be at least 1".into()));
    }
    if curve.dim() != form.base_dim() {
        return Err(Error::OrderMismatch { expected: form.base_dim(), found: curve.dim() });
    }
    let t0 = curve.t_start();
    let t1 = curve.t_end();
    let h = (t1 - t0) / steps as f64;
    let mut cache: Option<(f64, usize, DMatrix<f64>)> = None;
    for s in 0..steps {
        let a = t0 + s as f64 * h;
        let b = if s + 1 == steps { t1 } else { t0 + (s + 1) as f64 * h };
        let mut cuts = vec![a];
        cuts.extend(curve.breakpoints_within(a, b));
        cuts.push(b);
        for w in cuts.windows(2) {
            let (c, d) = (w[0], w[1]);
            let piece_idx = curve.piece_index(0.5 * (c + d));
            let generator = |t: f64| -> Result<DMatrix<f64>> {
                let piece = &curve.pieces()[piece_idx];
                form.contract(&piece.point(t), &piece.velocity(t))
            };
            let om_c = match cache.take() {
                Some((tc, pc, m)) if tc == c && pc == piece_idx => m,
                _ => generator(c)?,
            };
            let om_m = generator(0.5 * (c + d))?;
            let om_d = generator(d)?;
            let dt = d - c;
            let k1 = -(&om_c * &state);
            let k2 = -(&om_m * (&state + &k1 * (0.5 * dt)));
            let k3 = -(&om_m * (&state + &k2 * (0.5 * dt)));
            let k4 = -(&om_d * (&state + &k3 * dt));
            state += (k1 + k2 * 2.0 + k3 * 2.0 + k4) * (dt / 6.0);
            if state.iter().any(|v| !v.is_finite()) {
                return Err(Error::BlowUp { t: d });
            }
            cache = Some((d, piece_idx, om_d));
        }
    }
    Ok(state)
}
