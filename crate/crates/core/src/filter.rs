//! Vertex-morphing filters and the sigmoid map from unbounded controls to
//! bounded physical fields.

use serde::{Deserialize, Serialize};
use sprs::{CsMat, TriMat};

use crate::error::{invalid, Result};
use crate::fem::Bounds;
use crate::mesh::Point;

/// Row-normalized linear-hat convolution over a set of sites.
#[derive(Debug, Clone)]
pub struct FilterOperator {
    matrix: CsMat<f64>,
    transpose: CsMat<f64>,
    radius: f64,
}

/// `A_pq ∝ max(0, 1 − d_pq/r)`, each row scaled to sum to one.
pub fn build_kernel(sites: &[Point], radius: f64) -> Result<FilterOperator> {
    if !(radius.is_finite() && radius > 0.0) {
        return Err(invalid(format!("filter radius must be > 0, got {radius}")));
    }
    let n = sites.len();
    let mut tri = TriMat::new((n, n));
    let mut row = Vec::new();
    for (p, a) in sites.iter().enumerate() {
        row.clear();
        for (q, b) in sites.iter().enumerate() {
            let d = ((a[0] - b[0]).powi(2) + (a[1] - b[1]).powi(2)).sqrt();
            let w = 1.0 - d / radius;
            if w > 0.0 {
                row.push((q, w));
            }
        }
        let s: f64 = row.iter().map(|(_, w)| w).sum();
        for &(q, w) in &row {
            tri.add_triplet(p, q, w / s);
        }
    }
    let matrix: CsMat<f64> = tri.to_csr();
    let transpose = matrix.transpose_view().to_csr();
    Ok(FilterOperator {
        matrix,
        transpose,
        radius,
    })
}

fn spmv(m: &CsMat<f64>, x: &[f64]) -> Vec<f64> {
    m.outer_iterator()
        .map(|row| row.iter().map(|(j, &v)| v * x[j]).sum())
        .collect()
}

impl FilterOperator {
    pub fn identity(n: usize) -> Self {
        let matrix = CsMat::eye(n);
        Self {
            transpose: matrix.clone(),
            matrix,
            radius: 0.0,
        }
    }

    pub fn matrix(&self) -> &CsMat<f64> {
        &self.matrix
    }

    pub fn radius(&self) -> f64 {
        self.radius
    }

    pub fn len(&self) -> usize {
        self.matrix.rows()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    /// `A · x`.
    pub fn forward(&self, x: &[f64]) -> Vec<f64> {
        spmv(&self.matrix, x)
    }

    /// `Aᵀ · b`.
    pub fn backward(&self, b: &[f64]) -> Vec<f64> {
        spmv(&self.transpose, b)
    }
}

pub fn sigmoid(z: f64) -> f64 {
    if z >= 0.0 {
        1.0 / (1.0 + (-z).exp())
    } else {
        let e = z.exp();
        e / (1.0 + e)
    }
}

/// Control value whose sigmoid image is `v` within `bounds`.
pub fn invert_initial(v: f64, bounds: Bounds) -> f64 {
    let x = ((v - bounds.lo) / bounds.width()).clamp(1e-9, 1.0 - 1e-9);
    (x / (1.0 - x)).ln()
}

/// Order of the filter and the sigmoid in the control-to-physical chain.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ChainOrder {
    /// `lo + (hi − lo)·σ(A·s)`.
    #[default]
    VmThenSigmoid,
    /// `lo + (hi − lo)·A·σ(s)`.
    SigmoidThenVm,
}

/// Control-to-physical map of one field and its adjoint.
#[derive(Debug, Clone)]
pub struct FieldMap {
    pub filter: FilterOperator,
    pub bounds: Bounds,
    pub order: ChainOrder,
}

impl FieldMap {
    pub fn new(filter: FilterOperator, bounds: Bounds, order: ChainOrder) -> Self {
        Self { filter, bounds, order }
    }

    pub fn to_physical(&self, s: &[f64]) -> Vec<f64> {
        let Bounds { lo, hi } = self.bounds;
        let unit = match self.order {
            ChainOrder::VmThenSigmoid => self.filter.forward(s).into_iter().map(sigmoid).collect(),
            ChainOrder::SigmoidThenVm => {
                let sig: Vec<f64> = s.iter().map(|&z| sigmoid(z)).collect();
                self.filter.forward(&sig)
            }
        };
        // the clamp only absorbs roundoff at saturation
        unit.into_iter().map(|v| (lo + (hi - lo) * v).clamp(lo, hi)).collect()
    }

    /// Pulls `dJ/dphysical` back to `dJ/ds`.
    pub fn chain_gradient(&self, s: &[f64], d_phys: &[f64]) -> Vec<f64> {
        let w = self.bounds.width();
        let dsig = |z: f64| {
            let g = sigmoid(z);
            g * (1.0 - g)
        };
        match self.order {
            ChainOrder::VmThenSigmoid => {
                let z = self.filter.forward(s);
                let b: Vec<f64> = z.iter().zip(d_phys).map(|(&z, &d)| w * dsig(z) * d).collect();
                self.filter.backward(&b)
            }
            ChainOrder::SigmoidThenVm => {
                let b: Vec<f64> = d_phys.iter().map(|d| w * d).collect();
                self.filter
                    .backward(&b)
                    .into_iter()
                    .zip(s)
                    .map(|(g, &z)| g * dsig(z))
                    .collect()
            }
        }
    }

    /// Uniform control reproducing the uniform physical value `v`.
    pub fn initial_controls(&self, v: f64) -> Vec<f64> {
        vec![invert_initial(v, self.bounds); self.filter.len()]
    }
}
