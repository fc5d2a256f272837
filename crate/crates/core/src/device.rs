//! Compact device models: level-1 square-law MOSFET, the filamentary
//! memristor (static resistance, threshold SET dynamics, LRS noise), and
//! process-variation sampling.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Polarity {
    N,
    P,
}

/// Square-law transistor parameters.
///
/// `vth` is stored as a magnitude for both polarities; a P device is
/// evaluated on the negated (source-referenced) gate and drain voltages.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MosfetParams {
    pub polarity: Polarity,
    /// Threshold voltage magnitude (V).
    pub vth: f64,
    /// Transconductance factor including W/L (A/V^2).
    pub kp: f64,
    /// Channel-length modulation (1/V).
    pub lambda: f64,
    /// Standard deviation of the threshold shift (V).
    pub sigma_vth: f64,
    /// Relative standard deviation of `kp`.
    pub sigma_kp_rel: f64,
}

/// Current and its partial derivatives with respect to the controlling
/// (gate) and drain voltages, both polarity-normalized.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MosEval {
    pub id: f64,
    pub gm: f64,
    pub gds: f64,
}

impl MosfetParams {
    pub fn nmos(vth: f64, kp: f64, lambda: f64) -> Self {
        Self {
            polarity: Polarity::N,
            vth,
            kp,
            lambda,
            sigma_vth: 0.0,
            sigma_kp_rel: 0.0,
        }
    }

    pub fn pmos(vth: f64, kp: f64, lambda: f64) -> Self {
        Self {
            polarity: Polarity::P,
            ..Self::nmos(vth, kp, lambda)
        }
    }

    pub fn with_variation(mut self, sigma_vth: f64, sigma_kp_rel: f64) -> Self {
        self.sigma_vth = sigma_vth;
        self.sigma_kp_rel = sigma_kp_rel;
        self
    }

    pub fn validate(&self) -> Result<(), String> {
        let finite = [self.vth, self.kp, self.lambda, self.sigma_vth, self.sigma_kp_rel]
            .iter()
            .all(|v| v.is_finite());
        if !finite {
            return Err("non-finite transistor parameter".into());
        }
        if self.kp <= 0.0 {
            return Err(format!("kp must be positive, got {}", self.kp));
        }
        if self.lambda < 0.0 || self.sigma_vth < 0.0 || self.sigma_kp_rel < 0.0 {
            return Err("lambda and variation sigmas must be non-negative".into());
        }
        Ok(())
    }

    /// Drain current for physical terminal voltages.
    ///
    /// For N devices this is the current flowing drain to source. For P
    /// devices the model runs on `(-vgs, -vds)` and the result is the
    /// current flowing source to drain, so a conducting device of either
    /// polarity returns a positive value.
    pub fn drain_current(&self, vgs: f64, vds: f64) -> f64 {
        match self.polarity {
            Polarity::N => self.conduction(vgs, vds).id,
            Polarity::P => self.conduction(-vgs, -vds).id,
        }
    }

    /// Level-1 evaluation on polarity-normalized voltages. Negative `vds`
    /// swaps the roles of source and drain so the law stays odd-symmetric.
    pub fn conduction(&self, vgs: f64, vds: f64) -> MosEval {
        if vds < 0.0 {
            let rev = self.forward(vgs - vds, -vds);
            return MosEval {
                id: -rev.id,
                gm: -rev.gm,
                gds: rev.gm + rev.gds,
            };
        }
        self.forward(vgs, vds)
    }

    fn forward(&self, vgs: f64, vds: f64) -> MosEval {
        let vov = vgs - self.vth;
        if vov <= 0.0 {
            return MosEval {
                id: 0.0,
                gm: 0.0,
                gds: 0.0,
            };
        }
        let clm = 1.0 + self.lambda * vds;
        if vds < vov {
            let core = vov * vds - 0.5 * vds * vds;
            MosEval {
                id: self.kp * core * clm,
                gm: self.kp * vds * clm,
                gds: self.kp * ((vov - vds) * clm + core * self.lambda),
            }
        } else {
            let core = 0.5 * vov * vov;
            MosEval {
                id: self.kp * core * clm,
                gm: self.kp * vov * clm,
                gds: self.kp * core * self.lambda,
            }
        }
    }

    /// Applies one realized variation draw.
    pub fn perturbed(&self, z_vth: f64, z_kp: f64) -> Self {
        let kp_scale = (1.0 + self.sigma_kp_rel * z_kp).max(KP_FLOOR);
        Self {
            vth: self.vth + self.sigma_vth * z_vth,
            kp: self.kp * kp_scale,
            ..*self
        }
    }
}

/// Lower clamp on the realized kp multiplier; keeps realizations positive.
const KP_FLOOR: f64 = 1e-2;

/// Free-function form of [`MosfetParams::drain_current`].
pub fn mosfet_drain_current(p: &MosfetParams, vgs: f64, vds: f64) -> f64 {
    p.drain_current(vgs, vds)
}

/// Piecewise-linear relative LRS spread as a function of SET drive voltage.
/// Flat extrapolation outside the knot range.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LrsSigma {
    /// `(drive voltage, relative sigma)` pairs sorted by voltage.
    pub knots: Vec<(f64, f64)>,
}

impl LrsSigma {
    pub fn constant(sigma: f64) -> Self {
        Self {
            knots: vec![(0.0, sigma)],
        }
    }

    pub fn at(&self, drive: f64) -> f64 {
        let k = &self.knots;
        match k.len() {
            0 => 0.0,
            1 => k[0].1,
            _ => {
                if drive <= k[0].0 {
                    return k[0].1;
                }
                for pair in k.windows(2) {
                    let ((x0, y0), (x1, y1)) = (pair[0], pair[1]);
                    if drive <= x1 {
                        let t = (drive - x0) / (x1 - x0);
                        return y0 + t * (y1 - y0);
                    }
                }
                k[k.len() - 1].1
            }
        }
    }
}

/// Static and dynamic memristor parameters.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MemristorParams {
    /// Fully-SET resistance bound (ohm).
    pub r_on: f64,
    /// Unformed/HRS-side bound (ohm).
    pub r_off: f64,
    /// SET threshold (V).
    pub v_set: f64,
    /// State growth prefactor (1/s).
    pub a_rate: f64,
    /// Exponential voltage scale of the growth rate (V).
    pub v0: f64,
    pub lrs_sigma: LrsSigma,
}

/// Filament state `w` in [0, 1]; 0 is `r_off`, 1 is `r_on`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MemristorState {
    pub w: f64,
}

impl MemristorParams {
    pub fn validate(&self) -> Result<(), String> {
        if !(self.r_on > 0.0 && self.r_on < self.r_off) {
            return Err(format!(
                "need 0 < r_on < r_off, got r_on={} r_off={}",
                self.r_on, self.r_off
            ));
        }
        if !(self.v_set > 0.0 && self.a_rate > 0.0 && self.v0 > 0.0) {
            return Err("v_set, a_rate and v0 must be positive".into());
        }
        if self.lrs_sigma.knots.iter().any(|&(_, s)| !(s >= 0.0)) {
            return Err("LRS sigma knots must be non-negative".into());
        }
        if self.lrs_sigma.knots.windows(2).any(|p| p[1].0 <= p[0].0) {
            return Err("LRS sigma knots must be strictly increasing in voltage".into());
        }
        Ok(())
    }

    /// Log-linear interpolation between `r_off` (w = 0) and `r_on` (w = 1).
    pub fn resistance(&self, state: MemristorState) -> f64 {
        let w = state.w.clamp(0.0, 1.0);
        if w == 0.0 {
            return self.r_off;
        }
        if w == 1.0 {
            return self.r_on;
        }
        (self.r_off.ln() * (1.0 - w) + self.r_on.ln() * w).exp()
    }

    /// Inverse of [`resistance`](Self::resistance), clamped to the valid range.
    pub fn state_for_resistance(&self, r: f64) -> MemristorState {
        let w = (self.r_off / r).ln() / (self.r_off / self.r_on).ln();
        MemristorState {
            w: w.clamp(0.0, 1.0),
        }
    }

    /// Instantaneous dw/dt at `v_across`; zero at or below threshold.
    pub fn growth_rate(&self, v_across: f64) -> f64 {
        if v_across <= self.v_set {
            0.0
        } else {
            self.a_rate * ((v_across - self.v_set) / self.v0).exp()
        }
    }

    /// One explicit SET update. `noise` scales the growth rate.
    pub fn set_step(
        &self,
        state: MemristorState,
        v_across: f64,
        dt: f64,
        noise: f64,
    ) -> MemristorState {
        if dt <= 0.0 || v_across <= self.v_set {
            return state;
        }
        let dw = dt * noise.max(0.0) * self.growth_rate(v_across);
        MemristorState {
            w: (state.w + dw).min(1.0),
        }
    }
}

pub fn memristor_resistance(m: &MemristorParams, state: MemristorState) -> f64 {
    m.resistance(state)
}

pub fn set_dynamics_step(
    m: &MemristorParams,
    state: MemristorState,
    v_across: f64,
    dt: f64,
    noise: f64,
) -> MemristorState {
    m.set_step(state, v_across, dt, noise)
}

/// One Monte Carlo realization of every transistor in a cell plus the
/// standard-normal draw behind the LRS multiplier.
#[derive(Debug, Clone, PartialEq)]
pub struct VariationSample {
    pub transistors: Vec<MosfetParams>,
    pub lrs_z: f64,
}

impl VariationSample {
    pub fn nominal(devices: &[MosfetParams]) -> Self {
        Self {
            transistors: devices.to_vec(),
            lrs_z: 0.0,
        }
    }

    /// Lognormal multiplier on the programmed resistance for a given
    /// relative sigma.
    pub fn lrs_multiplier(&self, sigma_rel: f64) -> f64 {
        (sigma_rel * self.lrs_z).exp()
    }
}

/// Counter-based generator for a (seed, index) pair: the seed picks the
/// key and the index picks the stream, so draws are order-independent.
pub fn sample_rng(seed: u64, index: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(index);
    rng
}

/// Draws one variation sample for the given nominal device list.
///
/// Each transistor consumes two normals (vth then kp) in list order,
/// followed by one normal for the memristor.
pub fn sample_variation(nominal: &[MosfetParams], seed: u64, index: u64) -> VariationSample {
    let mut rng = sample_rng(seed, index);
    let transistors = nominal
        .iter()
        .map(|p| {
            let z_vth: f64 = StandardNormal.sample(&mut rng);
            let z_kp: f64 = StandardNormal.sample(&mut rng);
            p.perturbed(z_vth, z_kp)
        })
        .collect();
    let lrs_z: f64 = StandardNormal.sample(&mut rng);
    VariationSample { transistors, lrs_z }
}
