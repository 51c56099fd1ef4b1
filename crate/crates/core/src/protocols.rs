//! Classical drive schedules Ω_A(t), Ω_B(t) for the transfer protocols.

use serde::{Deserialize, Serialize};
use std::f64::consts::{FRAC_PI_2, LN_10};

use crate::error::{Error, Result};
use crate::params::{AtomSpec, DerivedRates};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum ProtocolTag {
    Wps,
    ApGauss,
    SinCos,
    /// Time-dependent cavity-fiber couplings; the two channels are g_A(t), g_B(t).
    Photonic,
}

/// Default Gaussian support cutoff in units of T.
pub const DEFAULT_CUTOFF: f64 = 5.0;

/// Largest g_max/κ accepted for wave-packet shaping.
pub const WPS_REGIME_LIMIT: f64 = 0.2;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub enum Shape {
    Wps {
        gamma_max: f64,
        delay: f64,
        t_off: f64,
        /// Extra lead of the receiver plateau before the time-reversed onset.
        launch_offset: f64,
        /// Ω = scale·√γ for each node.
        scale_a: f64,
        scale_b: f64,
    },
    Gaussian { omega_max: f64, width: f64, separation: f64 },
    SinCos { amplitude_a: f64, amplitude_b: f64, width: f64 },
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DriveSchedule {
    pub protocol_tag: ProtocolTag,
    pub t_start: f64,
    pub t_end: f64,
    pub shape: Shape,
}

fn wps_rise(gamma_max: f64, t_off: f64, t: f64) -> f64 {
    if t < -t_off || t > t_off {
        0.0
    } else if t < 0.0 {
        let e = (gamma_max * t).exp();
        gamma_max * e / (2.0 - e)
    } else {
        gamma_max
    }
}

impl DriveSchedule {
    fn inside(&self, t: f64) -> bool {
        t >= self.t_start && t <= self.t_end
    }

    /// Drive amplitudes (Ω_A, Ω_B) at time t, zero outside the support window.
    pub fn omegas(&self, t: f64) -> (f64, f64) {
        if !self.inside(t) {
            return (0.0, 0.0);
        }
        match self.shape {
            Shape::Wps { scale_a, scale_b, .. } => {
                let (ga, gb) = self.wps_rates(t).unwrap_or((0.0, 0.0));
                (scale_a * ga.sqrt(), scale_b * gb.sqrt())
            }
            Shape::Gaussian { omega_max, width, separation } => {
                let ub = t / width;
                let ua = (t - separation) / width;
                (omega_max * (-ua * ua).exp(), omega_max * (-ub * ub).exp())
            }
            Shape::SinCos { amplitude_a, amplitude_b, width } => {
                let x = t / width;
                (amplitude_a * x.sin(), amplitude_b * x.cos())
            }
        }
    }

    pub fn omega_a(&self, t: f64) -> f64 {
        self.omegas(t).0
    }

    pub fn omega_b(&self, t: f64) -> f64 {
        self.omegas(t).1
    }

    /// Emission/absorption rates γ_A(t), γ_B(t) of a wave-packet-shaping schedule.
    pub fn wps_rates(&self, t: f64) -> Option<(f64, f64)> {
        match self.shape {
            Shape::Wps { gamma_max, delay, t_off, launch_offset, .. } => {
                let ga = wps_rise(gamma_max, t_off, t);
                let gb = if t < delay - t_off - launch_offset {
                    0.0
                } else if t <= delay {
                    gamma_max
                } else {
                    wps_rise(gamma_max, t_off, delay - t)
                };
                Some((ga, gb))
            }
            _ => None,
        }
    }

    /// Largest values of (Ω_A, Ω_B) over the window.
    pub fn peaks(&self) -> (f64, f64) {
        match self.shape {
            Shape::Wps { gamma_max, scale_a, scale_b, .. } => (scale_a * gamma_max.sqrt(), scale_b * gamma_max.sqrt()),
            Shape::Gaussian { omega_max, .. } => (omega_max, omega_max),
            Shape::SinCos { amplitude_a, amplitude_b, .. } => (amplitude_a, amplitude_b),
        }
    }

    /// Times inside the window where the drive is not smooth.
    pub fn breakpoints(&self) -> Vec<f64> {
        let mut out = match self.shape {
            Shape::Wps { delay, t_off, launch_offset, .. } => {
                vec![-t_off, 0.0, t_off, delay - t_off - launch_offset, delay, delay + t_off]
            }
            _ => Vec::new(),
        };
        out.retain(|&t| t > self.t_start && t < self.t_end);
        out.sort_by(f64::total_cmp);
        out.dedup();
        out
    }

    pub fn duration(&self) -> f64 {
        self.t_end - self.t_start
    }

    /// Same schedule with the window cut at `t_end`; used for timing scans.
    pub fn with_window(mut self, t_start: f64, t_end: f64) -> Self {
        self.t_start = t_start;
        self.t_end = t_end;
        self
    }
}

/// Wave-packet shaping: a time-symmetric photon emitted by A and absorbed by B under the
/// time-reversed drive, delayed by the fiber transit time.
pub fn wps_schedule(rates: &DerivedRates, atom: &AtomSpec, g_max: f64) -> Result<DriveSchedule> {
    wps_schedule_with_offset(rates, atom, g_max, 0.0)
}

pub fn wps_schedule_with_offset(
    rates: &DerivedRates,
    atom: &AtomSpec,
    g_max: f64,
    launch_offset: f64,
) -> Result<DriveSchedule> {
    if !(g_max > 0.0) {
        return Err(Error::Domain(format!("g_max must be > 0, got {g_max}")));
    }
    if !(launch_offset >= 0.0) {
        return Err(Error::Domain(format!("launch offset must be >= 0, got {launch_offset}")));
    }
    let a = rates.node_a();
    let b = rates.node_b;
    let ratio = g_max / a.kappa.min(b.kappa);
    if ratio >= WPS_REGIME_LIMIT {
        return Err(Error::Regime { ratio, limit: WPS_REGIME_LIMIT });
    }
    let gamma_max = a.kappa_cav * (g_max / a.kappa).powi(2);
    let t_off = 6.0 * LN_10 / gamma_max;
    let delay = rates.delay();
    let scale = |k: f64, kc: f64| atom.delta_at * k / (atom.g_atc * kc.sqrt());
    Ok(DriveSchedule {
        protocol_tag: ProtocolTag::Wps,
        t_start: (-t_off).min(delay - t_off - launch_offset),
        t_end: delay + t_off,
        shape: Shape::Wps {
            gamma_max,
            delay,
            t_off,
            launch_offset,
            scale_a: scale(a.kappa, a.kappa_cav),
            scale_b: scale(b.kappa, b.kappa_cav),
        },
    })
}

/// Counterintuitive Gaussian pair: B peaks at 0, A at x_spl·T.
pub fn ap_gaussian_schedule(omega_max: f64, t: f64, x_spl: f64) -> Result<DriveSchedule> {
    ap_gaussian_schedule_with_cutoff(omega_max, t, x_spl, DEFAULT_CUTOFF)
}

pub fn ap_gaussian_schedule_with_cutoff(omega_max: f64, t: f64, x_spl: f64, cutoff: f64) -> Result<DriveSchedule> {
    if !(t > 0.0) {
        return Err(Error::Domain(format!("pulse width must be > 0, got {t}")));
    }
    if !(x_spl > 0.0) {
        return Err(Error::Domain(format!("x_spl must be > 0, got {x_spl}")));
    }
    if !(omega_max >= 0.0 && cutoff > 0.0) {
        return Err(Error::Domain("omega_max must be >= 0 and cutoff > 0".into()));
    }
    let separation = x_spl * t;
    Ok(DriveSchedule {
        protocol_tag: ProtocolTag::ApGauss,
        t_start: -cutoff * t,
        t_end: separation + cutoff * t,
        shape: Shape::Gaussian { omega_max, width: t, separation },
    })
}

/// Effective atom-fiber couplings g̃_A = g₀ sin(t/T), g̃_B = g₀ cos(t/T) on [0, πT/2],
/// expressed as drives through G = κ g̃/g and Ω = Δ_at G/g_at-c.
pub fn sincos_schedule(rates: &DerivedRates, atom: &AtomSpec, g0_eff: f64, t: f64) -> Result<DriveSchedule> {
    if !(t > 0.0) {
        return Err(Error::Domain(format!("pulse width must be > 0, got {t}")));
    }
    let to_omega = |kappa: f64, g: f64| atom.delta_at * kappa * g0_eff / (g * atom.g_atc);
    Ok(DriveSchedule {
        protocol_tag: ProtocolTag::SinCos,
        t_start: 0.0,
        t_end: FRAC_PI_2 * t,
        shape: Shape::SinCos {
            amplitude_a: to_omega(rates.kappa, rates.g_ab),
            amplitude_b: to_omega(rates.node_b.kappa, rates.node_b.g_cf),
            width: t,
        },
    })
}

/// Sine/cosine cavity-fiber couplings for the purely photonic transfer.
pub fn photonic_sincos(g0: f64, t: f64) -> Result<DriveSchedule> {
    if !(t > 0.0) {
        return Err(Error::Domain(format!("pulse width must be > 0, got {t}")));
    }
    Ok(DriveSchedule {
        protocol_tag: ProtocolTag::Photonic,
        t_start: 0.0,
        t_end: FRAC_PI_2 * t,
        shape: Shape::SinCos { amplitude_a: g0, amplitude_b: g0, width: t },
    })
}

/// The (g̃_A, g̃_B) pair of a sine/cosine schedule, without conversion.
pub fn sincos_couplings(g0: f64, width: f64, t: f64) -> (f64, f64) {
    let x = t / width;
    (g0 * x.sin(), g0 * x.cos())
}
