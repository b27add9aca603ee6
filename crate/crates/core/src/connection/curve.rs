use serde_json::Value;

use crate::error::{Error, Result};

/// Maximum coordinate gap between the endpoints of a loop.
pub const CLOSURE_TOL: f64 = 1e-12;

/// One smooth piece of a curve on the parameter interval `[t0, t1]`.
#[derive(Debug, Clone, PartialEq)]
pub enum Piece {
    /// Constant-velocity segment. Its velocity is the central difference
    /// of the two samples it joins.
    Linear { t0: f64, t1: f64, from: Vec<f64>, to: Vec<f64> },
    /// Elliptic arc in the coordinate plane `(axes.0, axes.1)`:
    /// `center + radii.0 cos(phi) e_a + radii.1 sin(phi) e_b`, with `phi`
    /// moving linearly from `phase0` to `phase1`.
    Arc {
        t0: f64,
        t1: f64,
        center: Vec<f64>,
        axes: (usize, usize),
        radii: (f64, f64),
        phase0: f64,
        phase1: f64,
    },
}

impl Piece {
    pub fn t_range(&self) -> (f64, f64) {
        match self {
            Piece::Linear { t0, t1, .. } | Piece::Arc { t0, t1, .. } => (*t0, *t1),
        }
    }

    pub fn point(&self, t: f64) -> Vec<f64> {
        match self {
            Piece::Linear { t0, t1, from, to } => {
                let s = (t - t0) / (t1 - t0);
                from.iter().zip(to).map(|(a, b)| a + s * (b - a)).collect()
            }
            Piece::Arc { center, axes, radii, .. } => {
                let phi = self.phase(t);
                let mut p = center.clone();
                p[axes.0] += radii.0 * phi.cos();
                p[axes.1] += radii.1 * phi.sin();
                p
            }
        }
    }

    pub fn velocity(&self, t: f64) -> Vec<f64> {
        match self {
            Piece::Linear { t0, t1, from, to } => {
                let dt = t1 - t0;
                from.iter().zip(to).map(|(a, b)| (b - a) / dt).collect()
            }
            Piece::Arc { t0, t1, center, axes, radii, phase0, phase1 } => {
                let rate = (phase1 - phase0) / (t1 - t0);
                let phi = self.phase(t);
                let mut v = vec![0.0; center.len()];
                v[axes.0] = -radii.0 * phi.sin() * rate;
                v[axes.1] = radii.1 * phi.cos() * rate;
                v
            }
        }
    }

    fn phase(&self, t: f64) -> f64 {
        match self {
            Piece::Arc { t0, t1, phase0, phase1, .. } => phase0 + (phase1 - phase0) * (t - t0) / (t1 - t0),
            Piece::Linear { .. } => 0.0,
        }
    }

    fn shifted(&self, dt: f64) -> Piece {
        let mut p = self.clone();
        match &mut p {
            Piece::Linear { t0, t1, .. } | Piece::Arc { t0, t1, .. } => {
                *t0 += dt;
                *t1 += dt;
            }
        }
        p
    }

    /// The same piece traversed backwards under `t -> total - t`.
    fn reversed(&self, total: f64) -> Piece {
        match self {
            Piece::Linear { t0, t1, from, to } => Piece::Linear {
                t0: total - t1,
                t1: total - t0,
                from: to.clone(),
                to: from.clone(),
            },
            Piece::Arc { t0, t1, center, axes, radii, phase0, phase1 } => Piece::Arc {
                t0: total - t1,
                t1: total - t0,
                center: center.clone(),
                axes: *axes,
                radii: *radii,
                phase0: *phase1,
                phase1: *phase0,
            },
        }
    }
}

/// A piecewise-smooth parameterized path in chart coordinates.
#[derive(Debug, Clone, PartialEq)]
pub struct Curve {
    dim: usize,
    pieces: Vec<Piece>,
}

impl Curve {
    /// Polyline through `(t, point)` samples with strictly increasing `t`.
    pub fn from_samples(samples: &[(f64, Vec<f64>)]) -> Result<Self> {
        if samples.len() < 2 {
            return Err(Error::Invalid("a curve needs at least 2 samples".into()));
        }
        let dim = samples[0].1.len();
        if dim == 0 {
            return Err(Error::Invalid("curve samples need at least one coordinate".into()));
        }
        for (t, p) in samples {
            if p.len() != dim {
                return Err(Error::OrderMismatch { expected: dim, found: p.len() });
            }
            if !t.is_finite() || p.iter().any(|v| !v.is_finite()) {
                return Err(Error::NonFinite { what: "curve sample" });
            }
        }
        let pieces = samples
            .windows(2)
            .map(|w| {
                if !(w[1].0 > w[0].0) {
                    return Err(Error::Invalid(format!(
                        "curve parameter must be strictly increasing ({} then {})",
                        w[0].0, w[1].0
                    )));
                }
                Ok(Piece::Linear { t0: w[0].0, t1: w[1].0, from: w[0].1.clone(), to: w[1].1.clone() })
            })
            .collect::<Result<Vec<_>>>()?;
        Ok(Self { dim, pieces })
    }

    /// Straight segment from `from` at `t0` to `to` at `t1`.
    pub fn segment(from: Vec<f64>, to: Vec<f64>, t0: f64, t1: f64) -> Result<Self> {
        Self::from_samples(&[(t0, from), (t1, to)])
    }

    /// Closed ellipse around `center` in the plane of `axes`, one turn over `[t0, t1]`.
    pub fn ellipse(center: Vec<f64>, axes: (usize, usize), radii: (f64, f64), t0: f64, t1: f64) -> Result<Self> {
        let dim = center.len();
        if axes.0 == axes.1 || axes.0 >= dim || axes.1 >= dim {
            return Err(Error::Invalid(format!("invalid ellipse axes {axes:?} in dimension {dim}")));
        }
        if !(radii.0 > 0.0 && radii.1 > 0.0) || !(t1 > t0) {
            return Err(Error::Invalid("ellipse radii and parameter span must be positive".into()));
        }
        Ok(Self {
            dim,
            pieces: vec![Piece::Arc {
                t0,
                t1,
                center,
                axes,
                radii,
                phase0: 0.0,
                phase1: std::f64::consts::TAU,
            }],
        })
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn pieces(&self) -> &[Piece] {
        &self.pieces
    }

    pub fn t_start(&self) -> f64 {
        self.pieces[0].t_range().0
    }

    pub fn t_end(&self) -> f64 {
        self.pieces[self.pieces.len() - 1].t_range().1
    }

    pub fn start_point(&self) -> Vec<f64> {
        self.pieces[0].point(self.t_start())
    }

    pub fn end_point(&self) -> Vec<f64> {
        self.pieces[self.pieces.len() - 1].point(self.t_end())
    }

    /// Index of the piece whose interval contains `t` (left-closed).
    pub fn piece_index(&self, t: f64) -> usize {
        let idx = self.pieces.partition_point(|p| p.t_range().1 <= t);
        idx.min(self.pieces.len() - 1)
    }

    pub fn point(&self, t: f64) -> Vec<f64> {
        self.pieces[self.piece_index(t)].point(t)
    }

    /// Piece boundaries strictly inside `(a, b)`.
    pub fn breakpoints_within(&self, a: f64, b: f64) -> Vec<f64> {
        let eps = 1e-13 * (b - a).abs().max(f64::MIN_POSITIVE);
        let inner = &self.pieces[..self.pieces.len() - 1];
        let first = inner.partition_point(|p| p.t_range().1 <= a + eps);
        inner[first..]
            .iter()
            .map(|p| p.t_range().1)
            .take_while(|&k| k < b - eps)
            .collect()
    }

    /// The same path traversed in the opposite direction over the same parameter interval.
    pub fn reversed(&self) -> Curve {
        let total = self.t_start() + self.t_end();
        Curve { dim: self.dim, pieces: self.pieces.iter().rev().map(|p| p.reversed(total)).collect() }
    }

    /// `self` followed by `other`, re-timed so that `other` starts where `self` ends.
    pub fn concat(&self, other: &Curve) -> Result<Curve> {
        if other.dim != self.dim {
            return Err(Error::OrderMismatch { expected: self.dim, found: other.dim });
        }
        let gap = max_gap(&self.end_point(), &other.start_point());
        if gap > CLOSURE_TOL {
            return Err(Error::Invalid(format!("curves do not meet: gap {gap:.3e}")));
        }
        let dt = self.t_end() - other.t_start();
        let mut pieces = self.pieces.clone();
        pieces.extend(other.pieces.iter().map(|p| p.shifted(dt)));
        Ok(Curve { dim: self.dim, pieces })
    }

    /// Rows `[t, x_1, ..., x_d]`; arcs are sampled at 64 points each.
    pub fn to_rows(&self) -> Vec<Vec<f64>> {
        let mut rows = Vec::new();
        let mut push = |t: f64, p: Vec<f64>| {
            let mut row = vec![t];
            row.extend(p);
            rows.push(row);
        };
        push(self.t_start(), self.start_point());
        for piece in &self.pieces {
            let (t0, t1) = piece.t_range();
            let m = if matches!(piece, Piece::Arc { .. }) { 64 } else { 1 };
            for k in 1..=m {
                let t = if k == m { t1 } else { t0 + (t1 - t0) * k as f64 / m as f64 };
                push(t, piece.point(t));
            }
        }
        rows
    }

    /// Parses the JSON row format `[[t, x_1, ..., x_d], ...]`.
    pub fn from_json(value: &Value) -> Result<Curve> {
        let rows = value
            .as_array()
            .ok_or_else(|| Error::Invalid("curve JSON must be an array of [t, coords...] rows".into()))?;
        let mut samples = Vec::with_capacity(rows.len());
        for (i, row) in rows.iter().enumerate() {
            let nums = row
                .as_array()
                .ok_or_else(|| Error::Invalid(format!("curve row {i} is not an array")))?
                .iter()
                .map(|v| v.as_f64().ok_or_else(|| Error::Invalid(format!("curve row {i} has a non-numeric entry"))))
                .collect::<Result<Vec<f64>>>()?;
            if nums.len() < 2 {
                return Err(Error::Invalid(format!("curve row {i} needs t and at least one coordinate")));
            }
            samples.push((nums[0], nums[1..].to_vec()));
        }
        Curve::from_samples(&samples)
    }

    pub fn to_json(&self) -> Value {
        serde_json::to_value(self.to_rows()).expect("finite rows serialize")
    }
}

/// A closed curve: first and last points agree to [`CLOSURE_TOL`].
#[derive(Debug, Clone, PartialEq)]
pub struct Loop(Curve);

impl Loop {
    pub fn new(curve: Curve) -> Result<Self> {
        let gap = max_gap(&curve.start_point(), &curve.end_point());
        if gap > CLOSURE_TOL {
            return Err(Error::NotClosed { gap });
        }
        Ok(Self(curve))
    }

    /// The constant loop at `base` over `[0, 1]`.
    pub fn trivial(base: Vec<f64>) -> Result<Self> {
        Self::new(Curve::segment(base.clone(), base, 0.0, 1.0)?)
    }

    pub fn curve(&self) -> &Curve {
        &self.0
    }

    pub fn base_point(&self) -> Vec<f64> {
        self.0.start_point()
    }

    /// The inverse loop.
    pub fn reversed(&self) -> Loop {
        Loop(self.0.reversed())
    }

    /// `self` traversed first, then `other`.
    pub fn concat(&self, other: &Loop) -> Result<Loop> {
        Ok(Loop(self.0.concat(&other.0)?))
    }
}

fn max_gap(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y).abs()).fold(0.0, f64::max)
}
