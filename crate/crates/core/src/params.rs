//! Physical configuration of the two nodes and the fiber, and the rates derived from it.
//!
//! Every rate is an angular frequency in rad/s.

use serde::{Deserialize, Serialize};
use std::f64::consts::{LN_10, PI};

use crate::error::{Error, Result};

pub const SPEED_OF_LIGHT: f64 = 299_792_458.0;

/// Default group velocity in the fiber, 2c/3.
pub const DEFAULT_FIBER_SPEED: f64 = 2.0 * SPEED_OF_LIGHT / 3.0;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CavitySpec {
    /// Cavity length l in meters.
    pub length_l: f64,
    /// Round-trip transmission of the fiber-facing mirror.
    pub t2: f64,
    /// Round-trip undesired loss: outer-mirror transmission plus absorption.
    pub loss2: f64,
}

impl CavitySpec {
    pub fn new(length_l: f64, t2: f64, loss2: f64) -> Result<Self> {
        let c = CavitySpec { length_l, t2, loss2 };
        c.validate()?;
        Ok(c)
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.length_l > 0.0 && self.length_l.is_finite()) {
            return Err(Error::invalid("cavity.length_l", format!("must be > 0, got {}", self.length_l)));
        }
        if !(self.t2 > 0.0 && self.t2 < 1.0) {
            return Err(Error::invalid("cavity.t2", format!("must lie in (0, 1), got {}", self.t2)));
        }
        if !(self.loss2 >= 0.0 && self.loss2 < 1.0) {
            return Err(Error::invalid("cavity.loss2", format!("must lie in [0, 1), got {}", self.loss2)));
        }
        if self.t2 + self.loss2 >= 1.0 {
            return Err(Error::invalid("cavity.loss2", "t2 + loss2 must stay below 1"));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FiberSpec {
    /// Fiber length L in meters.
    pub length_l: f64,
    /// Attenuation X in dB/km.
    pub attenuation: f64,
    /// Speed of light in the fiber, m/s.
    pub speed_cf: f64,
}

impl FiberSpec {
    pub fn new(length_l: f64, attenuation: f64) -> Result<Self> {
        let f = FiberSpec { length_l, attenuation, speed_cf: DEFAULT_FIBER_SPEED };
        f.validate()?;
        Ok(f)
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.length_l > 0.0 && self.length_l.is_finite()) {
            return Err(Error::invalid("fiber.length_l", format!("must be > 0, got {}", self.length_l)));
        }
        if !(self.attenuation >= 0.0 && self.attenuation.is_finite()) {
            return Err(Error::invalid("fiber.attenuation", format!("must be >= 0, got {}", self.attenuation)));
        }
        if !(self.speed_cf > 0.0 && self.speed_cf <= SPEED_OF_LIGHT) {
            return Err(Error::invalid("fiber.speed_cf", format!("must lie in (0, c], got {}", self.speed_cf)));
        }
        Ok(())
    }

    pub fn with_length(mut self, length_l: f64) -> Self {
        self.length_l = length_l;
        self
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AtomSpec {
    /// Atom-cavity coupling g_at-c, rad/s.
    pub g_atc: f64,
    /// Detuning of the Raman transition from the excited state, rad/s.
    pub delta_at: f64,
    /// Spontaneous decay rate of the excited state, rad/s.
    pub gamma_sp: f64,
}

impl Default for AtomSpec {
    fn default() -> Self {
        AtomSpec { g_atc: 2.0 * PI * 1.0e6, delta_at: 2.0 * PI * 100.0e6, gamma_sp: 0.0 }
    }
}

impl AtomSpec {
    pub fn validate(&self) -> Result<()> {
        if !(self.g_atc > 0.0 && self.g_atc.is_finite()) {
            return Err(Error::invalid("atom.g_atc", format!("must be > 0, got {}", self.g_atc)));
        }
        if !(self.delta_at.abs() > 0.0 && self.delta_at.is_finite()) {
            return Err(Error::invalid("atom.delta_at", "must be nonzero"));
        }
        if !(self.gamma_sp >= 0.0 && self.gamma_sp.is_finite()) {
            return Err(Error::invalid("atom.gamma_sp", format!("must be >= 0, got {}", self.gamma_sp)));
        }
        Ok(())
    }

    /// Effective atom-cavity coupling G = g_at-c Ω/Δ_at for a drive Ω.
    pub fn effective_coupling(&self, omega: f64) -> f64 {
        self.g_atc * omega / self.delta_at
    }

    /// Drive amplitude Ω that produces the effective coupling G.
    pub fn drive_for_coupling(&self, g_eff: f64) -> f64 {
        g_eff * self.delta_at / self.g_atc
    }

    /// Sets Γ so that g_at-c²/(2κΓ) equals `c`; `c = inf` switches atomic decay off.
    pub fn with_cooperativity(mut self, c: f64, kappa: f64) -> Self {
        self.gamma_sp = if c.is_infinite() { 0.0 } else { self.g_atc * self.g_atc / (2.0 * kappa * c) };
        self
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SetupConfig {
    pub cavity: CavitySpec,
    /// Receiver cavity when it differs from the sender; `None` mirrors `cavity`.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub cavity_b: Option<CavitySpec>,
    pub fiber: FiberSpec,
    pub atom: AtomSpec,
}

impl SetupConfig {
    pub fn new(cavity: CavitySpec, fiber: FiberSpec, atom: AtomSpec) -> Self {
        SetupConfig { cavity, cavity_b: None, fiber, atom }
    }

    pub fn cavity_a(&self) -> &CavitySpec {
        &self.cavity
    }

    pub fn cavity_b(&self) -> &CavitySpec {
        self.cavity_b.as_ref().unwrap_or(&self.cavity)
    }

    pub fn validate(&self) -> Result<()> {
        self.cavity.validate()?;
        if let Some(b) = &self.cavity_b {
            b.validate()?;
        }
        self.fiber.validate()?;
        self.atom.validate()
    }

    /// Non-fatal remarks about the validity of the model for this setup.
    pub fn warnings(&self) -> Vec<String> {
        let mut out = Vec::new();
        for (name, c) in [("A", self.cavity_a()), ("B", self.cavity_b())] {
            let ratio = c.length_l / self.fiber.length_l;
            if ratio > 0.01 {
                out.push(format!(
                    "cavity {name}: l/L = {ratio:.3} > 0.01, single cavity mode assumption is questionable"
                ));
            }
        }
        out
    }

    pub fn with_fiber_length(mut self, length_l: f64) -> Self {
        self.fiber.length_l = length_l;
        self
    }
}

/// γ_fib = α c_f with α = X ln(10) 10⁻⁴ per meter.
pub fn attenuation_to_rate(x_db_per_km: f64, cf: f64) -> Result<f64> {
    if !(x_db_per_km >= 0.0) {
        return Err(Error::Domain(format!("attenuation must be >= 0 dB/km, got {x_db_per_km}")));
    }
    if !(cf > 0.0) {
        return Err(Error::Domain(format!("fiber speed must be > 0, got {cf}")));
    }
    Ok(x_db_per_km * LN_10 * 1e-4 * cf)
}

/// Rates of one cavity.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct NodeRates {
    pub kappa_cav: f64,
    pub gamma_cav: f64,
    /// Half of the total linewidth: 2κ = κ_cav + γ_cav.
    pub kappa: f64,
    /// Coupling of the cavity mode to each fiber mode.
    pub g_cf: f64,
    pub p_out: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DerivedRates {
    pub kappa_cav: f64,
    pub gamma_cav: f64,
    pub kappa: f64,
    pub fsr_fib: f64,
    pub g_ab: f64,
    pub gamma_fib: f64,
    pub p_out: f64,
    pub p_fib: f64,
    pub p1: f64,
    pub sm_param: f64,
    pub l_eff: f64,
    pub speed_cf: f64,
    pub length_fiber: f64,
    /// Receiver-side rates; equal to the sender's for identical cavities.
    pub node_b: NodeRates,
}

fn node_rates(c: &CavitySpec, fsr: f64) -> NodeRates {
    let kappa_cav = SPEED_OF_LIGHT * c.t2 / (2.0 * c.length_l);
    let gamma_cav = SPEED_OF_LIGHT * c.loss2 / (2.0 * c.length_l);
    NodeRates {
        kappa_cav,
        gamma_cav,
        kappa: 0.5 * (kappa_cav + gamma_cav),
        g_cf: (kappa_cav * fsr / (2.0 * PI)).sqrt(),
        p_out: kappa_cav / (kappa_cav + gamma_cav),
    }
}

pub fn derive_rates(cfg: &SetupConfig) -> Result<DerivedRates> {
    cfg.validate()?;
    let cf = cfg.fiber.speed_cf;
    let big_l = cfg.fiber.length_l;
    let fsr = PI * cf / big_l;
    let gamma_fib = attenuation_to_rate(cfg.fiber.attenuation, cf)?;
    let a = node_rates(cfg.cavity_a(), fsr);
    let b = node_rates(cfg.cavity_b(), fsr);
    let p_fib = fiber_transmission(gamma_fib, big_l, cf);
    Ok(DerivedRates {
        kappa_cav: a.kappa_cav,
        gamma_cav: a.gamma_cav,
        kappa: a.kappa,
        fsr_fib: fsr,
        g_ab: a.g_cf,
        gamma_fib,
        p_out: a.p_out,
        p_fib,
        p1: a.p_out * b.p_out * p_fib,
        sm_param: 2.0 * a.kappa / fsr,
        l_eff: cf / a.kappa,
        speed_cf: cf,
        length_fiber: big_l,
        node_b: b,
    })
}

/// exp(−γ_fib L / c_f). Shared with the analytic module so both agree bit for bit.
pub fn fiber_transmission(gamma_fib: f64, length: f64, cf: f64) -> f64 {
    (-(gamma_fib * length / cf)).exp()
}

impl DerivedRates {
    pub fn node_a(&self) -> NodeRates {
        NodeRates {
            kappa_cav: self.kappa_cav,
            gamma_cav: self.gamma_cav,
            kappa: self.kappa,
            g_cf: self.g_ab,
            p_out: self.p_out,
        }
    }

    /// Fiber propagation delay τ = L / c_f.
    pub fn delay(&self) -> f64 {
        self.length_fiber / self.speed_cf
    }

    /// Fiber loss exponent γ_fib L / c_f.
    pub fn fiber_loss_exponent(&self) -> f64 {
        self.gamma_fib * self.length_fiber / self.speed_cf
    }
}

/// Natural photon length c_f/κ and the shaped photon length c_f/γ_eff for a peak coupling `g_max`.
pub fn photon_lengths(rates: &DerivedRates, g_max: f64) -> Result<(f64, f64)> {
    if !(g_max > 0.0) {
        return Err(Error::Domain(format!("g_max must be > 0, got {g_max}")));
    }
    if g_max >= rates.kappa {
        return Err(Error::Regime { ratio: g_max / rates.kappa, limit: 1.0 });
    }
    let gamma_eff = rates.kappa_cav * (g_max / rates.kappa).powi(2);
    Ok((rates.speed_cf / rates.kappa, rates.speed_cf / gamma_eff))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn cfg(l: f64, t2: f64, loss2: f64, big_l: f64, x: f64) -> SetupConfig {
        SetupConfig::new(
            CavitySpec::new(l, t2, loss2).unwrap(),
            FiberSpec::new(big_l, x).unwrap(),
            AtomSpec::default(),
        )
    }

    #[test]
    fn fiber_rate_examples() {
        let g = attenuation_to_rate(0.2, DEFAULT_FIBER_SPEED).unwrap() / (2.0 * PI);
        assert!((g / 1.5e3 - 1.0).abs() < 0.05, "{g}");
        let g = attenuation_to_rate(3.0, DEFAULT_FIBER_SPEED).unwrap() / (2.0 * PI);
        assert!((g / 22e3 - 1.0).abs() < 0.05, "{g}");
        assert_eq!(attenuation_to_rate(0.0, DEFAULT_FIBER_SPEED).unwrap(), 0.0);
        assert!(attenuation_to_rate(-1.0, DEFAULT_FIBER_SPEED).is_err());
    }

    #[test]
    fn cavity_rate_examples() {
        let r = derive_rates(&cfg(0.02, 5e-6, 5e-6, 500.0, 0.2)).unwrap();
        assert!((r.kappa_cav / (2.0 * PI) / 6e3 - 1.0).abs() < 0.05);
        assert!((r.gamma_cav / (2.0 * PI) / 6e3 - 1.0).abs() < 0.05);
        let r = derive_rates(&cfg(0.0005, 5e-6, 0.0, 500.0, 0.2)).unwrap();
        assert!((r.kappa_cav / (2.0 * PI) / 240e3 - 1.0).abs() < 0.01);
        let r = derive_rates(&cfg(0.02, 5e-6, 2e-6, 500.0, 0.2)).unwrap();
        assert!((r.p_out.powi(2) - 0.51).abs() < 0.005);
    }

    #[test]
    fn invariants_hold() {
        let r = derive_rates(&cfg(0.02, 13e-6, 2e-6, 400.0, 0.2)).unwrap();
        assert_eq!(2.0 * r.kappa, r.kappa_cav + r.gamma_cav);
        assert_eq!(r.p1, r.p_out * r.p_out * r.p_fib);
        assert_eq!(r.sm_param, 2.0 * r.kappa / r.fsr_fib);
        assert_eq!(r.l_eff, r.speed_cf / r.kappa);
        assert_eq!(r.node_b, r.node_a());
    }

    #[test]
    fn photon_length_limits() {
        let r = derive_rates(&cfg(0.02, 13e-6, 0.0, 400.0, 0.2)).unwrap();
        // κ_cav = 2κ, so γ_eff reaches κ at g_max = κ/√2
        let (l_eff, l_ph) = photon_lengths(&r, r.kappa * std::f64::consts::FRAC_1_SQRT_2).unwrap();
        assert!((l_ph / l_eff - 1.0).abs() < 1e-12);
        assert!(matches!(photon_lengths(&r, r.kappa), Err(Error::Regime { .. })));
    }

    #[test]
    fn photon_length_at_tenth_of_kappa() {
        let r = derive_rates(&cfg(0.02, 13e-6, 2e-6, 400.0, 0.2)).unwrap();
        let (l_eff, l_ph) = photon_lengths(&r, r.kappa / 10.0).unwrap();
        // independent evaluation from mirror data
        let kc = SPEED_OF_LIGHT * 13e-6 / 0.04;
        let k = 0.5 * SPEED_OF_LIGHT * 15e-6 / 0.04;
        assert!((l_ph - 100.0 * DEFAULT_FIBER_SPEED / kc).abs() / l_ph < 1e-12);
        assert!((l_ph - 100.0 * l_eff * k / kc).abs() / l_ph < 1e-12);
    }

    #[test]
    fn invalid_specs_rejected() {
        assert!(CavitySpec::new(0.0, 1e-5, 0.0).is_err());
        assert!(CavitySpec::new(0.01, 0.0, 0.0).is_err());
        assert!(CavitySpec::new(0.01, 0.6, 0.5).is_err());
        assert!(FiberSpec::new(100.0, -0.1).is_err());
    }

    #[test]
    fn short_fiber_warns() {
        let c = cfg(0.02, 13e-6, 2e-6, 1.0, 0.2);
        assert_eq!(c.warnings().len(), 2);
        assert!(cfg(0.02, 13e-6, 2e-6, 400.0, 0.2).warnings().is_empty());
    }
}
