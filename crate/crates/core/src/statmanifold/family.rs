use std::fmt;
use std::sync::Arc;

use crate::connection::DomainBox;
use crate::error::{Error, Result};

/// Smallest admissible Gaussian scale.
pub const GAUSSIAN_MIN_SIGMA: f64 = 1e-3;
/// Bernoulli success probability is kept inside `[BERNOULLI_EDGE, 1 - BERNOULLI_EDGE]`.
pub const BERNOULLI_EDGE: f64 = 1e-6;
pub const DEFAULT_HERMITE_NODES: usize = 64;

/// A parametric family of densities with its score and integration rule.
pub trait StatFamily: Send + Sync + fmt::Debug {
    fn name(&self) -> &'static str;
    fn param_dim(&self) -> usize;

    /// Rejects points outside the admissible parameter region.
    fn check_point(&self, params: &[f64]) -> Result<()>;

    fn log_density(&self, params: &[f64], x: f64) -> f64;

    /// Writes `d log p / d params_i` at observation `x` into `out`.
    fn score_into(&self, params: &[f64], x: f64, out: &mut [f64]);

    fn score(&self, params: &[f64], x: f64) -> Vec<f64> {
        let mut out = vec![0.0; self.param_dim()];
        self.score_into(params, x, &mut out);
        out
    }

    /// Nodes and base-measure weights: `int f dx ~ sum_i w_i f(x_i)` for the
    /// integrands this family produces (densities times score polynomials).
    fn base_rule(&self, params: &[f64]) -> Vec<(f64, f64)>;

    /// Nodes with weights already multiplied by the density, so that
    /// `E[f] ~ sum_i q_i f(x_i)`.
    fn probability_rule(&self, params: &[f64]) -> Vec<(f64, f64)> {
        self.base_rule(params)
            .into_iter()
            .map(|(x, w)| (x, w * self.log_density(params, x).exp()))
            .collect()
    }
}

/// `E[f(x, score)]` under the family's quadrature rule.
pub fn expectation<F>(family: &dyn StatFamily, params: &[f64], mut f: F) -> Result<f64>
where
    F: FnMut(f64, &[f64]) -> f64,
{
    family.check_point(params)?;
    let mut s = vec![0.0; family.param_dim()];
    Ok(family
        .probability_rule(params)
        .into_iter()
        .map(|(x, q)| {
            family.score_into(params, x, &mut s);
            q * f(x, &s)
        })
        .sum())
}

/// Quadrature of the density itself against the base rule; 1 for a
/// normalized family.
pub fn normalization(family: &dyn StatFamily, params: &[f64]) -> Result<f64> {
    family.check_point(params)?;
    Ok(family.base_rule(params).into_iter().map(|(x, w)| w * family.log_density(params, x).exp()).sum())
}

/// Looks a family up by registry key.
pub fn family_by_name(key: &str) -> Result<Arc<dyn StatFamily>> {
    match key {
        "gaussian1d" => Ok(Arc::new(Gaussian1d::default())),
        "bernoulli" => Ok(Arc::new(Bernoulli)),
        other => Err(Error::Invalid(format!("unknown family '{other}' (known: gaussian1d, bernoulli)"))),
    }
}

/// Default chart box used when a caller does not provide one.
pub fn default_domain(key: &str) -> Result<DomainBox> {
    match key {
        "gaussian1d" => DomainBox::new(vec![-5.0, 0.1], vec![5.0, 10.0]),
        "bernoulli" => DomainBox::new(vec![0.01], vec![0.99]),
        other => Err(Error::Invalid(format!("unknown family '{other}'"))),
    }
}

/// Univariate normal family in `(mu, sigma)` coordinates.
#[derive(Debug, Clone)]
pub struct Gaussian1d {
    nodes: Vec<f64>,
    weights: Vec<f64>,
}

impl Default for Gaussian1d {
    fn default() -> Self {
        Self::with_nodes(DEFAULT_HERMITE_NODES)
    }
}

impl Gaussian1d {
    pub fn with_nodes(n: usize) -> Self {
        let (nodes, weights) = gauss_hermite(n);
        Self { nodes, weights }
    }
}

impl StatFamily for Gaussian1d {
    fn name(&self) -> &'static str {
        "gaussian1d"
    }

    fn param_dim(&self) -> usize {
        2
    }

    fn check_point(&self, p: &[f64]) -> Result<()> {
        if p.len() != 2 {
            return Err(Error::OrderMismatch { expected: 2, found: p.len() });
        }
        if !p[0].is_finite() || !p[1].is_finite() || p[1] < GAUSSIAN_MIN_SIGMA {
            return Err(Error::Domain {
                point: p.to_vec(),
                reason: format!("gaussian1d needs finite mu and sigma >= {GAUSSIAN_MIN_SIGMA}"),
            });
        }
        Ok(())
    }

    fn log_density(&self, p: &[f64], x: f64) -> f64 {
        let (mu, sigma) = (p[0], p[1]);
        let u = (x - mu) / sigma;
        -sigma.ln() - 0.5 * (2.0 * std::f64::consts::PI).ln() - 0.5 * u * u
    }

    fn score_into(&self, p: &[f64], x: f64, out: &mut [f64]) {
        let (mu, sigma) = (p[0], p[1]);
        let u = (x - mu) / sigma;
        out[0] = u / sigma;
        out[1] = (u * u - 1.0) / sigma;
    }

    fn base_rule(&self, p: &[f64]) -> Vec<(f64, f64)> {
        let (mu, sigma) = (p[0], p[1]);
        let scale = std::f64::consts::SQRT_2 * sigma;
        self.nodes
            .iter()
            .zip(&self.weights)
            .map(|(&z, &w)| (mu + scale * z, w * (z * z).exp() * scale))
            .collect()
    }

    // the Hermite weight cancels the density exactly
    fn probability_rule(&self, p: &[f64]) -> Vec<(f64, f64)> {
        let (mu, sigma) = (p[0], p[1]);
        let scale = std::f64::consts::SQRT_2 * sigma;
        let inv_sqrt_pi = 1.0 / std::f64::consts::PI.sqrt();
        self.nodes.iter().zip(&self.weights).map(|(&z, &w)| (mu + scale * z, w * inv_sqrt_pi)).collect()
    }
}

/// Bernoulli family in the success probability `p`.
#[derive(Debug, Clone, Copy, Default)]
pub struct Bernoulli;

impl StatFamily for Bernoulli {
    fn name(&self) -> &'static str {
        "bernoulli"
    }

    fn param_dim(&self) -> usize {
        1
    }

    fn check_point(&self, p: &[f64]) -> Result<()> {
        if p.len() != 1 {
            return Err(Error::OrderMismatch { expected: 1, found: p.len() });
        }
        if !(p[0] >= BERNOULLI_EDGE && p[0] <= 1.0 - BERNOULLI_EDGE) {
            return Err(Error::Domain {
                point: p.to_vec(),
                reason: format!("bernoulli needs p in [{BERNOULLI_EDGE}, 1 - {BERNOULLI_EDGE}]"),
            });
        }
        Ok(())
    }

    fn log_density(&self, p: &[f64], x: f64) -> f64 {
        if x == 1.0 {
            p[0].ln()
        } else {
            (1.0 - p[0]).ln()
        }
    }

    fn score_into(&self, p: &[f64], x: f64, out: &mut [f64]) {
        out[0] = if x == 1.0 { 1.0 / p[0] } else { -1.0 / (1.0 - p[0]) };
    }

    fn base_rule(&self, _p: &[f64]) -> Vec<(f64, f64)> {
        vec![(0.0, 1.0), (1.0, 1.0)]
    }
}

/// Gauss-Hermite nodes and weights for the weight `exp(-z^2)`, by Newton
/// iteration on the orthonormal Hermite recurrence. Nodes are returned in
/// decreasing order.
pub fn gauss_hermite(n: usize) -> (Vec<f64>, Vec<f64>) {
    assert!(n >= 1, "at least one Hermite node");
    const PIM4: f64 = 0.751_125_544_464_942_5; // pi^(-1/4)
    let nf = n as f64;
    let mut x = vec![0.0; n];
    let mut w = vec![0.0; n];
    let m = n.div_ceil(2);
    let mut z = 0.0f64;
    for i in 0..m {
        z = match i {
            0 => (2.0 * nf + 1.0).sqrt() - 1.85575 * (2.0 * nf + 1.0).powf(-1.0 / 6.0),
            1 => z - 1.14 * nf.powf(0.426) / z,
            2 => 1.86 * z - 0.86 * x[0],
            3 => 1.91 * z - 0.91 * x[1],
            _ => 2.0 * z - x[i - 2],
        };
        let mut pp = 0.0;
        for _ in 0..100 {
            let mut p1 = PIM4;
            let mut p2 = 0.0;
            for j in 0..n {
                let p3 = p2;
                p2 = p1;
                let jf = j as f64;
                p1 = z * (2.0 / (jf + 1.0)).sqrt() * p2 - (jf / (jf + 1.0)).sqrt() * p3;
            }
            pp = (2.0 * nf).sqrt() * p2;
            let z1 = z;
            z = z1 - p1 / pp;
            if (z - z1).abs() <= 1e-15 * z.abs().max(1.0) {
                break;
            }
        }
        x[i] = z;
        x[n - 1 - i] = -z;
        w[i] = 2.0 / (pp * pp);
        w[n - 1 - i] = w[i];
    }
    if n % 2 == 1 {
        x[m - 1] = 0.0;
    }
    (x, w)
}
