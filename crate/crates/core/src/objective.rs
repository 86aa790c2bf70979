//! Weighted least-squares sensor mismatch `J = J_D + J_T`.

use crate::error::Result;
use crate::sensors::{max_value_weights, Measurements, SensorSet};

/// Value of each cost term at one state.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct CostBreakdown {
    pub j_total: f64,
    pub j_disp: f64,
    pub j_temp: f64,
}

/// Which terms a driver minimizes.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum Composition {
    /// `J_D + J_T`.
    #[default]
    Full,
    /// `J_D` alone.
    DisplacementOnly,
}

impl Composition {
    pub fn value(&self, c: &CostBreakdown) -> f64 {
        match self {
            Composition::Full => c.j_total,
            Composition::DisplacementOnly => c.j_disp,
        }
    }
}

/// Sensors, their measurements and all weights.
#[derive(Debug, Clone)]
pub struct Objective {
    pub sensors: SensorSet,
    pub measurements: Measurements,
    /// `ω_j`, one per displacement sensor.
    pub omega_disp: Vec<f64>,
    /// `ω_p`, one per temperature sensor.
    pub omega_temp: Vec<f64>,
    /// `Ω₁`.
    pub response_disp: f64,
    /// `Ω₂`.
    pub response_temp: f64,
}

impl Objective {
    /// Binds measurements with max-value normalization.
    pub fn new(sensors: SensorSet, measurements: Measurements, response_disp: f64, response_temp: f64) -> Result<Self> {
        let (wd, wt) = max_value_weights(&sensors, &measurements)?;
        Ok(Self {
            omega_disp: vec![wd; sensors.displacement.len()],
            omega_temp: vec![wt; sensors.temperature.len()],
            sensors,
            measurements,
            response_disp,
            response_temp,
        })
    }

    pub fn cost(&self, u: &[f64], delta_t: &[f64]) -> CostBreakdown {
        let j_disp = 0.5 * self.response_disp * self.disp_mismatch(u).iter().map(|(w, d)| w * d * d).sum::<f64>();
        let j_temp = 0.5 * self.response_temp * self.temp_mismatch(delta_t).iter().map(|(w, d)| w * d * d).sum::<f64>();
        CostBreakdown {
            j_total: j_disp + j_temp,
            j_disp,
            j_temp,
        }
    }

    /// `(ω_j, residual)` for every measured displacement component.
    fn disp_mismatch(&self, u: &[f64]) -> Vec<(f64, f64)> {
        let comp = self.sensors.sample_displacements(u);
        let mut out = Vec::new();
        for (j, s) in self.sensors.displacement.iter().enumerate() {
            for c in 0..2 {
                if s.components.includes(c) {
                    out.push((self.omega_disp[j], comp[j][c] - self.measurements.displacement[j][c]));
                }
            }
        }
        out
    }

    fn temp_mismatch(&self, delta_t: &[f64]) -> Vec<(f64, f64)> {
        self.sensors
            .sample_temperatures(delta_t)
            .iter()
            .zip(&self.measurements.temperature)
            .zip(&self.omega_temp)
            .map(|((c, m), &w)| (w, c - m))
            .collect()
    }

    /// `∂J_D/∂u` as a full-length dof vector.
    pub fn d_disp_du(&self, u: &[f64]) -> Vec<f64> {
        let comp = self.sensors.sample_displacements(u);
        let mut g = vec![0.0; u.len()];
        for (j, s) in self.sensors.displacement.iter().enumerate() {
            for c in 0..2 {
                if !s.components.includes(c) {
                    continue;
                }
                let r = self.response_disp * self.omega_disp[j] * (comp[j][c] - self.measurements.displacement[j][c]);
                for (&n, &w) in s.stencil.nodes.iter().zip(&s.stencil.weights) {
                    g[2 * n + c] += r * w;
                }
            }
        }
        g
    }

    /// Explicit `∂J_T/∂ΔT` as a nodal vector.
    pub fn d_temp_ddt(&self, delta_t: &[f64]) -> Vec<f64> {
        let comp = self.sensors.sample_temperatures(delta_t);
        let mut g = vec![0.0; delta_t.len()];
        for (p, s) in self.sensors.temperature.iter().enumerate() {
            let r = self.response_temp * self.omega_temp[p] * (comp[p] - self.measurements.temperature[p]);
            for (&n, &w) in s.stencil.nodes.iter().zip(&s.stencil.weights) {
                g[n] += r * w;
            }
        }
        g
    }
}
