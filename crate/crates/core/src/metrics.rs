//! Field error metrics against known targets.

use crate::error::{invalid, Result};

/// `‖Q − Q_t‖₂ / ‖Q_t‖₂`.
pub fn rel_l2(field: &[f64], target: &[f64]) -> Result<f64> {
    if field.len() != target.len() {
        return Err(invalid(format!("field length {} vs target length {}", field.len(), target.len())));
    }
    let den: f64 = target.iter().map(|t| t * t).sum::<f64>().sqrt();
    if den == 0.0 {
        return Err(invalid("relative error against a zero target"));
    }
    let num: f64 = field.iter().zip(target).map(|(q, t)| (q - t).powi(2)).sum::<f64>().sqrt();
    Ok(num / den)
}

/// Percent change of `eps` relative to `eps_ref`; negative is an improvement.
pub fn pct_change(eps: f64, eps_ref: f64) -> Result<f64> {
    if !(eps_ref > 0.0) {
        return Err(invalid(format!("reference error must be > 0, got {eps_ref}")));
    }
    Ok(100.0 * (eps - eps_ref) / eps_ref)
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ErrorReport {
    pub eps_e: f64,
    pub eps_t: f64,
    pub eps_e0: f64,
    pub eps_t0: f64,
    pub delta_e: f64,
    pub delta_t: f64,
}

impl ErrorReport {
    /// Errors of the final and the reference fields against the targets.
    pub fn new(
        youngs: &[f64],
        delta_t: &[f64],
        youngs_ref: &[f64],
        delta_t_ref: &[f64],
        youngs_target: &[f64],
        delta_t_target: &[f64],
    ) -> Result<Self> {
        let eps_e = rel_l2(youngs, youngs_target)?;
        let eps_t = rel_l2(delta_t, delta_t_target)?;
        let eps_e0 = rel_l2(youngs_ref, youngs_target)?;
        let eps_t0 = rel_l2(delta_t_ref, delta_t_target)?;
        Ok(Self {
            eps_e,
            eps_t,
            eps_e0,
            eps_t0,
            delta_e: pct_change(eps_e, eps_e0)?,
            delta_t: pct_change(eps_t, eps_t0)?,
        })
    }
}
