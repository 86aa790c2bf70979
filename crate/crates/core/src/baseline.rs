//! Substitute temperature fields for runs that do not identify ΔT.

use crate::error::{invalid, Result};
use crate::mesh::Point;

pub fn constant_field(value: f64, n: usize) -> Vec<f64> {
    vec![value; n]
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct InterpolationConfig {
    pub k: usize,
    /// Queries closer than this to a sensor take its value.
    pub tie_epsilon: f64,
}

impl Default for InterpolationConfig {
    fn default() -> Self {
        Self { k: 3, tie_epsilon: 1e-9 }
    }
}

/// Inverse-distance weighting over the `k` nearest sensors. Equal distances
/// are ordered by sensor index.
pub fn knn_interpolate(sensors: &[Point], values: &[f64], queries: &[Point], cfg: InterpolationConfig) -> Result<Vec<f64>> {
    if cfg.k == 0 {
        return Err(invalid("k must be >= 1"));
    }
    if sensors.len() != values.len() {
        return Err(invalid("sensor point and value counts differ"));
    }
    if sensors.len() < cfg.k {
        return Err(invalid(format!("{} sensors are fewer than k = {}", sensors.len(), cfg.k)));
    }
    let mut dist: Vec<(f64, usize)> = Vec::with_capacity(sensors.len());
    Ok(queries
        .iter()
        .map(|q| {
            dist.clear();
            dist.extend(
                sensors
                    .iter()
                    .enumerate()
                    .map(|(i, s)| (((s[0] - q[0]).powi(2) + (s[1] - q[1]).powi(2)).sqrt(), i)),
            );
            dist.sort_by(|a, b| a.0.total_cmp(&b.0).then(a.1.cmp(&b.1)));
            let near = &dist[..cfg.k];
            if near[0].0 < cfg.tie_epsilon {
                return values[near[0].1];
            }
            let (num, den) = near
                .iter()
                .fold((0.0, 0.0), |(n, d), &(r, i)| (n + values[i] / r, d + 1.0 / r));
            num / den
        })
        .collect())
}
