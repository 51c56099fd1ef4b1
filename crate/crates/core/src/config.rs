//! JSON run configuration with optional units on every physical quantity.
//!
//! A quantity is either a bare number in SI units (rates in rad/s) or an object
//! `{"value": 13, "unit": "ppm"}`. Frequencies given in `Hz`, `kHz` or `MHz` are
//! ordinary frequencies and are multiplied by 2π.

use std::f64::consts::PI;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::dynamics::SimConfig;
use crate::error::{Error, Result};
use crate::optimizer::{ApParams, SearchSpace, WpsSearch};
use crate::params::{derive_rates, AtomSpec, CavitySpec, FiberSpec, SetupConfig, DEFAULT_FIBER_SPEED};
use crate::protocols::{sincos_schedule, wps_schedule, DriveSchedule};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Unit {
    #[serde(rename = "ppm")]
    Ppm,
    #[serde(rename = "m")]
    Meter,
    #[serde(rename = "cm")]
    Centimeter,
    #[serde(rename = "km")]
    Kilometer,
    #[serde(rename = "dB_per_km")]
    DbPerKm,
    #[serde(rename = "Hz")]
    Hz,
    #[serde(rename = "kHz")]
    KHz,
    #[serde(rename = "MHz")]
    MHz,
    #[serde(rename = "rad_per_s")]
    RadPerS,
    #[serde(rename = "m_per_s")]
    MeterPerSecond,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum Kind {
    Fraction,
    Length,
    Attenuation,
    Rate,
    Speed,
}

impl Unit {
    fn kind(self) -> Kind {
        match self {
            Unit::Ppm => Kind::Fraction,
            Unit::Meter | Unit::Centimeter | Unit::Kilometer => Kind::Length,
            Unit::DbPerKm => Kind::Attenuation,
            Unit::Hz | Unit::KHz | Unit::MHz | Unit::RadPerS => Kind::Rate,
            Unit::MeterPerSecond => Kind::Speed,
        }
    }

    fn factor(self) -> f64 {
        match self {
            Unit::Ppm => 1e-6,
            Unit::Meter | Unit::DbPerKm | Unit::RadPerS | Unit::MeterPerSecond => 1.0,
            Unit::Centimeter => 1e-2,
            Unit::Kilometer => 1e3,
            Unit::Hz => 2.0 * PI,
            Unit::KHz => 2.0 * PI * 1e3,
            Unit::MHz => 2.0 * PI * 1e6,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum Quantity {
    Plain(f64),
    WithUnit { value: f64, unit: Unit },
}

impl Quantity {
    fn resolve(self, field: &'static str, kind: Kind) -> Result<f64> {
        match self {
            Quantity::Plain(v) => Ok(v),
            Quantity::WithUnit { value, unit } if unit.kind() == kind => Ok(value * unit.factor()),
            Quantity::WithUnit { unit, .. } => {
                Err(Error::invalid(field, format!("unit {unit:?} does not fit a {kind:?} quantity")))
            }
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CavityInput {
    pub length_l: Quantity,
    pub t2: Quantity,
    #[serde(default = "zero")]
    pub loss2: Quantity,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FiberInput {
    pub length_l: Quantity,
    #[serde(default = "zero")]
    pub attenuation: Quantity,
    #[serde(default)]
    pub speed_cf: Option<Quantity>,
}

#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct AtomInput {
    pub g_atc: Option<Quantity>,
    pub delta_at: Option<Quantity>,
    pub gamma_sp: Option<Quantity>,
    /// Overrides `gamma_sp` through C = g_at-c²/(2κΓ).
    pub cooperativity: Option<f64>,
}

fn zero() -> Quantity {
    Quantity::Plain(0.0)
}

/// Drive protocol. Pulse widths are in units of 1/κ_cav, couplings in units of κ.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "lowercase", deny_unknown_fields)]
pub enum ProtocolInput {
    Ap { t_units: f64, x_spl: f64, omega_ratio: f64 },
    Wps { g_max_ratio: f64 },
    Sincos { g0_ratio: f64, t_units: f64 },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    pub cavity: CavityInput,
    #[serde(default)]
    pub cavity_b: Option<CavityInput>,
    pub fiber: FiberInput,
    #[serde(default)]
    pub atom: AtomInput,
    #[serde(default)]
    pub protocol: Option<ProtocolInput>,
    #[serde(default)]
    pub sim: SimConfig,
    #[serde(default)]
    pub search: SearchSpace,
    #[serde(default)]
    pub wps_search: WpsSearch,
}

fn cavity(c: &CavityInput, receiver: bool) -> Result<CavitySpec> {
    let names: [&'static str; 3] = if receiver {
        ["cavity_b.length_l", "cavity_b.t2", "cavity_b.loss2"]
    } else {
        ["cavity.length_l", "cavity.t2", "cavity.loss2"]
    };
    let spec = CavitySpec {
        length_l: c.length_l.resolve(names[0], Kind::Length)?,
        t2: c.t2.resolve(names[1], Kind::Fraction)?,
        loss2: c.loss2.resolve(names[2], Kind::Fraction)?,
    };
    spec.validate().map_err(|e| match e {
        Error::InvalidParameter { field, reason } if receiver => {
            let field = names.iter().copied().find(|n| n.ends_with(field.trim_start_matches("cavity"))).unwrap_or(field);
            Error::InvalidParameter { field, reason }
        }
        e => e,
    })?;
    Ok(spec)
}

impl RunConfig {
    pub fn from_json(text: &str) -> Result<Self> {
        serde_json::from_str(text).map_err(|e| Error::Config(e.to_string()))
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::Config(format!("{}: {e}", path.display())))?;
        Self::from_json(&text)
    }

    /// Resolves units and validates the physical setup.
    pub fn setup(&self) -> Result<SetupConfig> {
        let cav = cavity(&self.cavity, false)?;
        let cavity_b = self.cavity_b.as_ref().map(|c| cavity(c, true)).transpose()?;
        let speed_cf = match self.fiber.speed_cf {
            Some(q) => q.resolve("fiber.speed_cf", Kind::Speed)?,
            None => DEFAULT_FIBER_SPEED,
        };
        let fiber = FiberSpec {
            length_l: self.fiber.length_l.resolve("fiber.length_l", Kind::Length)?,
            attenuation: self.fiber.attenuation.resolve("fiber.attenuation", Kind::Attenuation)?,
            speed_cf,
        };
        fiber.validate()?;
        let d = AtomSpec::default();
        let opt = |q: Option<Quantity>, field, default| q.map_or(Ok(default), |q| q.resolve(field, Kind::Rate));
        let atom = AtomSpec {
            g_atc: opt(self.atom.g_atc, "atom.g_atc", d.g_atc)?,
            delta_at: opt(self.atom.delta_at, "atom.delta_at", d.delta_at)?,
            gamma_sp: opt(self.atom.gamma_sp, "atom.gamma_sp", d.gamma_sp)?,
        };
        let mut cfg = SetupConfig { cavity: cav, cavity_b, fiber, atom };
        cfg.validate()?;
        if let Some(c) = self.atom.cooperativity {
            if !(c > 0.0) {
                return Err(Error::invalid("atom.cooperativity", format!("must be > 0, got {c}")));
            }
            let kappa = derive_rates(&cfg)?.kappa;
            cfg.atom = cfg.atom.with_cooperativity(c, kappa);
        }
        self.sim.validate()?;
        Ok(cfg)
    }

    /// AP parameters from the protocol section, if it describes an AP run.
    pub fn ap_params(&self) -> Option<ApParams> {
        match self.protocol? {
            ProtocolInput::Ap { t_units, x_spl, omega_ratio } => Some(ApParams { t_units, x_spl, omega_ratio }),
            _ => None,
        }
    }

    pub fn schedule(&self) -> Result<DriveSchedule> {
        let cfg = self.setup()?;
        let r = derive_rates(&cfg)?;
        match self.protocol {
            None => Err(Error::Config("missing protocol section".into())),
            Some(ProtocolInput::Ap { t_units, x_spl, omega_ratio }) => {
                crate::optimizer::ap_schedule(&cfg, &ApParams { t_units, x_spl, omega_ratio })
            }
            Some(ProtocolInput::Wps { g_max_ratio }) => {
                wps_schedule(&r, &cfg.atom, g_max_ratio * r.kappa.min(r.node_b.kappa))
            }
            Some(ProtocolInput::Sincos { g0_ratio, t_units }) => {
                sincos_schedule(&r, &cfg.atom, g0_ratio * r.kappa, t_units / r.kappa_cav)
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    const FIG6C: &str = r#"{
        "cavity": {"length_l": {"value": 2, "unit": "cm"}, "t2": {"value": 13, "unit": "ppm"},
                   "loss2": {"value": 2, "unit": "ppm"}},
        "fiber": {"length_l": 400, "attenuation": {"value": 0.2, "unit": "dB_per_km"}},
        "atom": {"g_atc": {"value": 1, "unit": "MHz"}},
        "protocol": {"type": "ap", "t_units": 100, "x_spl": 1.4, "omega_ratio": 0.01}
    }"#;

    #[test]
    fn units_resolve() {
        let rc = RunConfig::from_json(FIG6C).unwrap();
        let cfg = rc.setup().unwrap();
        assert!((cfg.cavity.length_l - 0.02).abs() < 1e-15);
        assert!((cfg.cavity.t2 - 13e-6).abs() < 1e-18);
        assert!((cfg.atom.g_atc - 2.0 * PI * 1e6).abs() < 1e-6);
        assert_eq!(cfg.fiber.speed_cf, DEFAULT_FIBER_SPEED);
        assert!(rc.schedule().is_ok());
    }

    #[test]
    fn unit_kind_mismatch_names_field() {
        let text = FIG6C.replace(r#""value": 13, "unit": "ppm""#, r#""value": 13, "unit": "Hz""#);
        let err = RunConfig::from_json(&text).unwrap().setup().unwrap_err();
        assert!(err.to_string().contains("cavity.t2"), "{err}");
    }

    #[test]
    fn parse_error_has_position() {
        let err = RunConfig::from_json("{\n \"cavity\": ,\n}").unwrap_err();
        assert!(err.to_string().contains("line 2"), "{err}");
    }

    #[test]
    fn cooperativity_sets_decay() {
        let text = FIG6C.replace(r#""atom": {"#, r#""atom": {"cooperativity": 27, "#);
        let cfg = RunConfig::from_json(&text).unwrap().setup().unwrap();
        let k = derive_rates(&cfg).unwrap().kappa;
        let c = crate::analytics::cooperativity(cfg.atom.g_atc, k, cfg.atom.gamma_sp);
        assert!((c - 27.0).abs() < 1e-9);
    }
}
