//! Affine map from trained weights to conductances in the programmable
//! window, with the bias carried as a per-column current.

use serde::Serialize;

use crate::dpe::{R_MAX, R_MIN};
use crate::error::{DpeError, Result};
use crate::ml::train::TrainedModel;

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ConductanceMap {
    /// Target resistances, `inputs x classes` (ohm).
    pub resistance: Vec<Vec<f64>>,
    /// Conductance per unit of shifted weight (S).
    pub scale: f64,
    /// Added to every weight so the smallest maps to `1 / R_MAX`.
    pub shift: f64,
    /// `b - min(b)` per class, in weight units.
    pub bias_weight: Vec<f64>,
}

impl ConductanceMap {
    /// Per-column bias currents for a READ current that grows by `slope`
    /// amperes per siemens of cell conductance.
    pub fn bias_currents(&self, slope: f64) -> Vec<f64> {
        let kappa = self.scale * slope;
        self.bias_weight.iter().map(|b| kappa * b).collect()
    }
}

/// `G = G_L + s (W + shift)` with `shift = -min W` and
/// `s = (G_H - G_L) / max(W + shift)`. A weight matrix with no spread maps
/// every cell to `G_L` and keeps `s` at one weight unit per window.
pub fn map_to_conductance(model: &TrainedModel) -> Result<ConductanceMap> {
    let flat = model.w.iter().flatten().chain(&model.b);
    if model.w.is_empty() || model.b.is_empty() || flat.clone().any(|v| !v.is_finite()) {
        return Err(DpeError::DegenerateWeights(
            "weights and biases must be non-empty and finite".into(),
        ));
    }
    let (g_l, g_h) = (1.0 / R_MAX, 1.0 / R_MIN);
    let w_min = model.w.iter().flatten().copied().fold(f64::INFINITY, f64::min);
    let w_max = model.w.iter().flatten().copied().fold(f64::NEG_INFINITY, f64::max);
    let shift = -w_min;
    let span = w_max + shift;
    let scale = if span > 0.0 { (g_h - g_l) / span } else { g_h - g_l };
    let resistance = model
        .w
        .iter()
        .map(|row| {
            row.iter()
                .map(|&w| (1.0 / (g_l + scale * (w + shift))).clamp(R_MIN, R_MAX))
                .collect()
        })
        .collect();
    let b_min = model.b.iter().copied().fold(f64::INFINITY, f64::min);
    Ok(ConductanceMap {
        resistance,
        scale,
        shift,
        bias_weight: model.b.iter().map(|b| b - b_min).collect(),
    })
}
