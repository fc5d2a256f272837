//! Full parameter set for both cells, its TOML form, and the derived
//! topologies/variation samples.

use std::path::Path;

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::device::{sample_variation, LrsSigma, MemristorParams, MosfetParams, VariationSample};
use crate::error::{DpeError, Result};
use crate::solver::{CellKind, CellTopology, Rails};

pub const CONFIG_VERSION: u32 = 1;

/// Calibrated parameters shipped with the crate.
pub const DEFAULT_CONFIG: &str = include_str!("../../../config/calibrated.toml");

/// Role-specific square-law values; variation sigmas are shared and live in
/// [`Variation`].
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DeviceConfig {
    pub vth: f64,
    pub kp: f64,
    pub lambda: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Variation {
    pub sigma_vth: f64,
    pub sigma_kp_rel: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ReadBias {
    /// Row input during READ (V).
    pub v_in: f64,
    /// 1T1R access gate during READ (V).
    pub v_g: f64,
    /// 3T1R supply during READ (V).
    pub vdd: f64,
    /// MP3 gate during READ (V).
    pub v_readb: f64,
    /// READ window (s).
    pub t_read: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SetBias {
    /// 1T1R access gate during SET (V).
    pub v_g: f64,
    /// 3T1R supply during SET (V); the column is held at 0 V.
    pub vdd: f64,
    /// Starting resistance for the SET-current sweep (ohm).
    pub r_initial: f64,
    /// Pulse length for the SET-current sweep (s).
    pub pulse_width: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct OneT1RDevices {
    pub mn1: DeviceConfig,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ThreeT1RDevices {
    pub mn1: DeviceConfig,
    pub mn2: DeviceConfig,
    pub mp3: DeviceConfig,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CellParams {
    pub version: u32,
    pub read: ReadBias,
    pub set: SetBias,
    pub variation: Variation,
    pub memristor: MemristorParams,
    pub one_t1r: OneT1RDevices,
    pub three_t1r: ThreeT1RDevices,
}

impl Default for CellParams {
    fn default() -> Self {
        Self::from_toml_str(DEFAULT_CONFIG).expect("shipped config must parse")
    }
}

impl CellParams {
    /// Hand-derived starting point for calibration.
    pub fn initial() -> Self {
        let dev = |vth, kp, lambda| DeviceConfig { vth, kp, lambda };
        Self {
            version: CONFIG_VERSION,
            read: ReadBias {
                v_in: 0.6,
                v_g: 1.2,
                vdd: 1.2,
                v_readb: 0.0,
                t_read: 1e-6,
            },
            set: SetBias {
                v_g: 1.2,
                vdd: 3.3,
                r_initial: 1e5,
                pulse_width: 1e-7,
            },
            variation: Variation {
                sigma_vth: 0.02,
                sigma_kp_rel: 0.02,
            },
            memristor: MemristorParams {
                r_on: 1e3,
                r_off: 1e5,
                v_set: 0.7,
                a_rate: 1e-2,
                v0: 6e-3,
                lrs_sigma: LrsSigma {
                    knots: vec![(0.8, 0.3), (0.9, 0.05), (1.2, 0.02)],
                },
            },
            one_t1r: OneT1RDevices {
                mn1: dev(0.8, 6e-4, 4.0),
            },
            three_t1r: ThreeT1RDevices {
                mn1: dev(0.55, 1.2e-3, 0.05),
                mn2: dev(0.41, 1e-5, 0.01),
                mp3: dev(0.4, 2e-3, 0.05),
            },
        }
    }

    pub fn from_toml_str(s: &str) -> Result<Self> {
        let p: Self = toml::from_str(s).map_err(|e| DpeError::Config(e.to_string()))?;
        p.validate()?;
        Ok(p)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let s = std::fs::read_to_string(path)
            .map_err(|e| DpeError::Config(format!("{}: {e}", path.display())))?;
        Self::from_toml_str(&s)
    }

    pub fn to_toml_string(&self) -> String {
        toml::to_string_pretty(self).expect("parameter set serializes")
    }

    /// SHA-256 of the canonical TOML form, hex encoded.
    pub fn hash(&self) -> String {
        let digest = Sha256::digest(self.to_toml_string().as_bytes());
        digest.iter().map(|b| format!("{b:02x}")).collect()
    }

    pub fn validate(&self) -> Result<()> {
        if self.version != CONFIG_VERSION {
            return Err(DpeError::Config(format!(
                "unsupported config version {} (expected {CONFIG_VERSION})",
                self.version
            )));
        }
        self.memristor.validate().map_err(DpeError::Config)?;
        for kind in CellKind::ALL {
            for t in self.transistors(kind) {
                t.validate().map_err(DpeError::Config)?;
            }
        }
        let positive = [
            ("read.t_read", self.read.t_read),
            ("set.r_initial", self.set.r_initial),
            ("set.pulse_width", self.set.pulse_width),
        ];
        for (name, v) in positive {
            if !(v > 0.0 && v.is_finite()) {
                return Err(DpeError::Config(format!("{name} must be positive, got {v}")));
            }
        }
        Ok(())
    }

    /// Nominal transistors in solver order (`[MN1]` or `[MN1, MN2, MP3]`).
    pub fn transistors(&self, kind: CellKind) -> Vec<MosfetParams> {
        let v = self.variation;
        let n = |d: DeviceConfig| {
            MosfetParams::nmos(d.vth, d.kp, d.lambda).with_variation(v.sigma_vth, v.sigma_kp_rel)
        };
        let p = |d: DeviceConfig| {
            MosfetParams::pmos(d.vth, d.kp, d.lambda).with_variation(v.sigma_vth, v.sigma_kp_rel)
        };
        match kind {
            CellKind::OneT1R => vec![n(self.one_t1r.mn1)],
            CellKind::ThreeT1R => vec![
                n(self.three_t1r.mn1),
                n(self.three_t1r.mn2),
                p(self.three_t1r.mp3),
            ],
        }
    }

    pub fn nominal(&self, kind: CellKind) -> VariationSample {
        VariationSample::nominal(&self.transistors(kind))
    }

    pub fn sample(&self, kind: CellKind, seed: u64, index: u64) -> VariationSample {
        sample_variation(&self.transistors(kind), seed, index)
    }

    pub fn read_topology(&self, kind: CellKind) -> CellTopology {
        let r = self.read;
        let rails = match kind {
            CellKind::OneT1R => Rails {
                vdd: r.vdd,
                v_in: r.v_in,
                v_g: r.v_g,
                v_readb: r.v_readb,
                v_column: 0.0,
            },
            CellKind::ThreeT1R => Rails {
                vdd: r.vdd,
                v_in: r.v_in,
                v_g: 0.0,
                v_readb: r.v_readb,
                v_column: r.vdd,
            },
        };
        CellTopology { kind, rails }
    }

    /// SET bias; the drive is applied later on `V_in`.
    pub fn set_topology(&self, kind: CellKind) -> CellTopology {
        let s = self.set;
        CellTopology {
            kind,
            rails: Rails {
                vdd: s.vdd,
                v_in: 0.0,
                v_g: s.v_g,
                v_readb: self.read.v_readb,
                v_column: 0.0,
            },
        }
    }

    /// Supply that pays for the SET current.
    pub fn set_supply(&self, kind: CellKind, drive: f64) -> f64 {
        match kind {
            CellKind::OneT1R => drive,
            CellKind::ThreeT1R => self.set.vdd,
        }
    }
}
