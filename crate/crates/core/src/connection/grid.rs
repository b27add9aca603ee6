use serde::{Deserialize, Serialize};

use super::{ConnectionForm, DomainBox};
use crate::error::{Error, Result};
use crate::liealg::{matrix_from_rows, matrix_to_rows, AlgebraElement};

use nalgebra::DMatrix;

/// On-disk layout of a grid-sampled form.
///
/// `nodes` lists the grid nodes in row-major order (last axis fastest); each
/// node holds `baseDim` matrices of order `fiberDim` as arrays of rows.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase", deny_unknown_fields)]
pub struct GridFormFile {
    pub base_dim: usize,
    pub fiber_dim: usize,
    pub domain: DomainBox,
    pub shape: Vec<usize>,
    pub nodes: Vec<Vec<Vec<Vec<f64>>>>,
}

/// A form sampled on a regular grid over its domain box and evaluated by
/// multilinear interpolation. Exact at the nodes.
#[derive(Debug, Clone)]
pub struct GridForm {
    domain: DomainBox,
    shape: Vec<usize>,
    fiber_dim: usize,
    nodes: Vec<Vec<DMatrix<f64>>>,
}

impl GridForm {
    pub fn new(domain: DomainBox, shape: Vec<usize>, fiber_dim: usize, nodes: Vec<Vec<DMatrix<f64>>>) -> Result<Self> {
        let d = domain.dim();
        if domain.lower.iter().chain(&domain.upper).any(|v| !v.is_finite()) {
            return Err(Error::Invalid("grid domain must be bounded".into()));
        }
        if shape.len() != d {
            return Err(Error::OrderMismatch { expected: d, found: shape.len() });
        }
        if shape.iter().any(|&s| s < 2) {
            return Err(Error::Invalid("grid needs at least 2 nodes per axis".into()));
        }
        let count: usize = shape.iter().product();
        if nodes.len() != count {
            return Err(Error::Invalid(format!("grid shape {shape:?} needs {count} nodes, got {}", nodes.len())));
        }
        for node in &nodes {
            if node.len() != d {
                return Err(Error::OrderMismatch { expected: d, found: node.len() });
            }
            for m in node {
                if m.nrows() != fiber_dim || m.ncols() != fiber_dim {
                    return Err(Error::OrderMismatch { expected: fiber_dim, found: m.nrows() });
                }
                if m.iter().any(|v| !v.is_finite()) {
                    return Err(Error::NonFinite { what: "grid node" });
                }
            }
        }
        Ok(Self { domain, shape, fiber_dim, nodes })
    }

    /// Samples `form` at the nodes of a grid of the given shape over its domain.
    pub fn sample(form: &dyn ConnectionForm, shape: Vec<usize>) -> Result<Self> {
        let domain = form.domain().clone();
        if shape.len() != domain.dim() || shape.iter().any(|&s| s < 2) {
            return Err(Error::Invalid(format!("invalid grid shape {shape:?}")));
        }
        let count: usize = shape.iter().product();
        let mut nodes = Vec::with_capacity(count);
        for flat in 0..count {
            let x = node_coords(&domain, &shape, flat);
            nodes.push(form.eval(&x)?.into_iter().map(AlgebraElement::into_matrix).collect());
        }
        Self::new(domain, shape, form.fiber_dim(), nodes)
    }

    pub fn shape(&self) -> &[usize] {
        &self.shape
    }

    /// Coordinates of node `flat` (row-major index).
    pub fn node_point(&self, flat: usize) -> Vec<f64> {
        node_coords(&self.domain, &self.shape, flat)
    }

    pub fn from_file(file: GridFormFile) -> Result<Self> {
        if file.domain.dim() != file.base_dim {
            return Err(Error::OrderMismatch { expected: file.base_dim, found: file.domain.dim() });
        }
        let domain = DomainBox::new(file.domain.lower, file.domain.upper)?;
        let nodes = file
            .nodes
            .iter()
            .map(|node| node.iter().map(|m| matrix_from_rows(m)).collect::<Result<Vec<_>>>())
            .collect::<Result<Vec<_>>>()?;
        Self::new(domain, file.shape, file.fiber_dim, nodes)
    }

    pub fn to_file(&self) -> GridFormFile {
        GridFormFile {
            base_dim: self.domain.dim(),
            fiber_dim: self.fiber_dim,
            domain: self.domain.clone(),
            shape: self.shape.clone(),
            nodes: self.nodes.iter().map(|node| node.iter().map(matrix_to_rows).collect()).collect(),
        }
    }

    pub fn from_json_str(s: &str) -> Result<Self> {
        let file: GridFormFile =
            serde_json::from_str(s).map_err(|e| Error::Invalid(format!("grid form JSON: {e}")))?;
        Self::from_file(file)
    }

    pub fn to_json_string(&self) -> String {
        serde_json::to_string(&self.to_file()).expect("grid form serializes")
    }
}

fn node_coords(domain: &DomainBox, shape: &[usize], mut flat: usize) -> Vec<f64> {
    let d = shape.len();
    let mut idx = vec![0; d];
    for ax in (0..d).rev() {
        idx[ax] = flat % shape[ax];
        flat /= shape[ax];
    }
    (0..d)
        .map(|ax| {
            let (lo, hi) = (domain.lower[ax], domain.upper[ax]);
            lo + (hi - lo) * idx[ax] as f64 / (shape[ax] - 1) as f64
        })
        .collect()
}

impl ConnectionForm for GridForm {
    fn base_dim(&self) -> usize {
        self.domain.dim()
    }
    fn fiber_dim(&self) -> usize {
        self.fiber_dim
    }
    fn domain(&self) -> &DomainBox {
        &self.domain
    }
    fn eval(&self, x: &[f64]) -> Result<Vec<AlgebraElement>> {
        self.domain.check(x)?;
        let d = self.shape.len();
        let mut cell = vec![0usize; d];
        let mut frac = vec![0.0; d];
        for ax in 0..d {
            let (lo, hi) = (self.domain.lower[ax], self.domain.upper[ax]);
            let cells = (self.shape[ax] - 1) as f64;
            let mut u = ((x[ax] - lo) / (hi - lo) * cells).clamp(0.0, cells);
            // snap onto nodes so node values are reproduced exactly
            if (u - u.round()).abs() < 1e-9 {
                u = u.round();
            }
            let i = (u.floor() as usize).min(self.shape[ax] - 2);
            cell[ax] = i;
            frac[ax] = u - i as f64;
        }
        let n = self.fiber_dim;
        let mut out = vec![DMatrix::<f64>::zeros(n, n); d];
        for corner in 0..(1usize << d) {
            let mut weight = 1.0;
            let mut flat = 0;
            for ax in 0..d {
                let up = (corner >> (d - 1 - ax)) & 1;
                weight *= if up == 1 { frac[ax] } else { 1.0 - frac[ax] };
                flat = flat * self.shape[ax] + cell[ax] + up;
            }
            if weight == 0.0 {
                continue;
            }
            for (o, m) in out.iter_mut().zip(&self.nodes[flat]) {
                *o += m * weight;
            }
        }
        Ok(out.into_iter().map(AlgebraElement::from_matrix_unchecked).collect())
    }
}
