//! Closed-form transfer probabilities and the optimal-parameter formulas built on them.

use serde::{Deserialize, Serialize};
use std::f64::consts::{FRAC_PI_2, PI};

use crate::error::{Error, Result};
use crate::params::{fiber_transmission, DerivedRates};

/// Inputs shared by the adiabatic-passage formulas.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AnalyticInputs {
    /// Peak effective atom-fiber coupling g₀.
    pub g0: f64,
    /// Pulse width.
    pub t: f64,
    pub gamma_fib: f64,
    pub fsr_fib: f64,
    /// Effective cavity loss rate γ̃_cav.
    pub gamma_cav_eff: f64,
    pub p_out: f64,
    pub length: f64,
    pub cf: f64,
}

impl AnalyticInputs {
    /// Inputs for a peak atom-cavity coupling `g_ratio = G_max/κ`, with γ̃_cav taken at the peak.
    pub fn from_rates(rates: &DerivedRates, g_ratio: f64, t: f64) -> Self {
        AnalyticInputs {
            g0: rates.g_ab * g_ratio,
            t,
            gamma_fib: rates.gamma_fib,
            fsr_fib: rates.fsr_fib,
            gamma_cav_eff: rates.gamma_cav * g_ratio * g_ratio,
            p_out: rates.p_out,
            length: rates.length_fiber,
            cf: rates.speed_cf,
        }
    }

    pub fn f1(&self) -> f64 {
        f1(self.g0, self.t, self.gamma_fib, self.fsr_fib, self.gamma_cav_eff)
    }

    pub fn f_ap(&self) -> Result<f64> {
        f_ap(self.p_out, self.gamma_fib, self.length, self.cf)
    }

    pub fn optimal_t(&self) -> Result<f64> {
        optimal_t(self.gamma_fib, self.fsr_fib, self.gamma_cav_eff, self.g0)
    }
}

pub fn f_stirap(g0: f64, t: f64, gamma_fib: f64) -> f64 {
    (-(gamma_fib / (g0 * g0 * t)) * FRAC_PI_2).exp()
}

pub fn f_fib(g0: f64, t: f64, gamma_fib: f64, fsr_fib: f64) -> f64 {
    let x = g0 * g0 * t;
    (-(gamma_fib * FRAC_PI_2) * (1.0 / x + x / (fsr_fib * fsr_fib))).exp()
}

pub fn f_fib_opt(gamma_fib: f64, length: f64, cf: f64) -> f64 {
    fiber_transmission(gamma_fib, length, cf)
}

fn f1_exponent_coefficients(g0: f64, gamma_fib: f64, fsr_fib: f64, gamma_cav_eff: f64) -> (f64, f64) {
    let g2 = g0 * g0;
    (gamma_fib / g2, gamma_fib * g2 / (fsr_fib * fsr_fib) + 0.25 * gamma_cav_eff)
}

/// Exponent of f1 without the π/2 prefactor: a/T + b T.
fn f1_exponent(t: f64, a: f64, b: f64) -> f64 {
    a / t + b * t
}

pub fn f1(g0: f64, t: f64, gamma_fib: f64, fsr_fib: f64, gamma_cav_eff: f64) -> f64 {
    let (a, b) = f1_exponent_coefficients(g0, gamma_fib, fsr_fib, gamma_cav_eff);
    (-FRAC_PI_2 * f1_exponent(t, a, b)).exp()
}

/// F₁ maximized over the pulse width.
pub fn f_ap(p_out: f64, gamma_fib: f64, length: f64, cf: f64) -> Result<f64> {
    if !(p_out > 0.0 && p_out <= 1.0) {
        return Err(Error::Domain(format!("p_out must lie in (0, 1], got {p_out}")));
    }
    if p_out == 1.0 {
        return Ok(f_fib_opt(gamma_fib, length, cf));
    }
    let p = gamma_fib * length / cf;
    // P·sqrt(1 + π²(1−p)/(2Pp)) written without the 1/P factor
    let exponent = (p * p + 0.5 * PI * PI * p * (1.0 - p_out) / p_out).sqrt();
    Ok((-exponent).exp())
}

/// Pulse width maximizing f1: the stationary point of a/T + bT.
pub fn optimal_t(gamma_fib: f64, fsr_fib: f64, gamma_cav_eff: f64, g0: f64) -> Result<f64> {
    let (a, b) = f1_exponent_coefficients(g0, gamma_fib, fsr_fib, gamma_cav_eff);
    if !(a > 0.0 && b > 0.0) {
        return Err(Error::UnboundedOptimum);
    }
    Ok((a / b).sqrt())
}

/// Bracketed minimization of the f1 exponent, independent of the closed form.
///
/// Bisects the sign of the derivative in log T, so the result is accurate to
/// machine precision in T rather than to sqrt(eps).
pub fn optimal_t_numeric(gamma_fib: f64, fsr_fib: f64, gamma_cav_eff: f64, g0: f64) -> Result<f64> {
    let (a, b) = f1_exponent_coefficients(g0, gamma_fib, fsr_fib, gamma_cav_eff);
    if !(a > 0.0 && b > 0.0) {
        return Err(Error::UnboundedOptimum);
    }
    let slope = |t: f64| -a / (t * t) + b;
    let (mut lo, mut hi) = (1.0_f64, 1.0_f64);
    while slope(lo) >= 0.0 {
        lo *= 0.5;
        if lo < 1e-300 {
            return Err(Error::UnboundedOptimum);
        }
    }
    while slope(hi) <= 0.0 {
        hi *= 2.0;
        if hi > 1e300 {
            return Err(Error::UnboundedOptimum);
        }
    }
    let (mut llo, mut lhi) = (lo.ln(), hi.ln());
    for _ in 0..200 {
        let mid = 0.5 * (llo + lhi);
        if mid == llo || mid == lhi {
            break;
        }
        if slope(mid.exp()) < 0.0 {
            llo = mid;
        } else {
            lhi = mid;
        }
    }
    Ok((0.5 * (llo + lhi)).exp())
}

/// Fiber length where F_AP − P₁ drops to `margin`.
pub fn l_max(p_out: f64, gamma_fib: f64, cf: f64, margin: f64) -> Result<f64> {
    const HI: f64 = 1.0e6;
    let gap = |l: f64| -> Result<f64> {
        let p1 = p_out * p_out * f_fib_opt(gamma_fib, l, cf);
        Ok(f_ap(p_out, gamma_fib, l, cf)? - p1 - margin)
    };
    // the gap can rise before it falls, so locate the last sign change on a log scan
    let mut grid = vec![0.0];
    grid.extend((0..=120).map(|i| 10f64.powf(-1.0 + 7.0 * i as f64 / 120.0)));
    let mut bracket = None;
    let mut prev = (grid[0], gap(grid[0])?);
    for &l in &grid[1..] {
        let v = gap(l)?;
        if prev.1 > 0.0 && v <= 0.0 {
            bracket = Some((prev.0, l));
        }
        prev = (l, v);
    }
    let (mut lo, mut hi) = bracket.ok_or(Error::NoCrossing { lo: 0.0, hi: HI })?;
    while hi - lo > 1e-7 * hi.max(1.0) {
        let mid = 0.5 * (lo + hi);
        if gap(mid)? > 0.0 {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    Ok(0.5 * (lo + hi))
}

/// g_at-c² / (2κΓ); infinite when Γ = 0.
pub fn cooperativity(g_atc: f64, kappa: f64, gamma_sp: f64) -> f64 {
    if gamma_sp == 0.0 {
        f64::INFINITY
    } else {
        g_atc * g_atc / (2.0 * kappa * gamma_sp)
    }
}

pub fn p1_tilde(c: f64, p1: f64) -> f64 {
    if c.is_infinite() {
        return p1;
    }
    let r = c / (0.25 + c);
    r * r * p1
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::params::*;

    fn fig6c(l: f64) -> DerivedRates {
        derive_rates(&SetupConfig::new(
            CavitySpec::new(0.02, 13e-6, 2e-6).unwrap(),
            FiberSpec::new(l, 0.2).unwrap(),
            AtomSpec::default(),
        ))
        .unwrap()
    }

    #[test]
    fn stirap_examples() {
        assert_eq!(f_stirap(1e5, 1e-3, 0.0), 1.0);
        let g0 = 1e5;
        let t = FRAC_PI_2 * 1e4 / (g0 * g0);
        assert!((f_stirap(g0, t, 1e4) - (-1.0f64).exp()).abs() < 1e-14);
        assert!(f_stirap(1e5, 1e3, 1e4) > 1.0 - 1e-8);
    }

    #[test]
    fn fib_examples() {
        let r = fig6c(1000.0);
        let g0 = 1e5;
        let t = r.fsr_fib / (g0 * g0);
        let f = f_fib(g0, t, r.gamma_fib, r.fsr_fib);
        assert!((f - (-r.gamma_fib * PI / r.fsr_fib).exp()).abs() < 1e-14);
        let alpha = 0.2 * std::f64::consts::LN_10 * 1e-4;
        assert!((f - (-alpha * 1000.0f64).exp()).abs() < 1e-12);
        assert!((f - 0.955).abs() < 1e-3);
        assert_eq!(f_fib(g0, t, 0.0, r.fsr_fib), 1.0);
    }

    #[test]
    fn fib_opt_is_p_fib() {
        for l in [1.0, 100.0, 500.0, 12345.0] {
            let r = fig6c(l);
            assert_eq!(f_fib_opt(r.gamma_fib, l, r.speed_cf).to_bits(), r.p_fib.to_bits());
        }
        let g = attenuation_to_rate(3.0, DEFAULT_FIBER_SPEED).unwrap();
        assert!((f_fib_opt(g, 1000.0, DEFAULT_FIBER_SPEED) - 0.501187).abs() < 1e-6);
        assert_eq!(f_fib_opt(g, 0.0, DEFAULT_FIBER_SPEED), 1.0);
    }

    #[test]
    fn f1_reductions() {
        let (g0, t, gf, fsr) = (1.2e5, 2e-4, 9e3, 1.5e6);
        assert_eq!(f1(g0, t, gf, fsr, 0.0), f_fib(g0, t, gf, fsr));
        let gc = 3e3;
        assert!((f1(g0, t, 0.0, fsr, gc) - (-PI * gc * t / 8.0).exp()).abs() < 1e-15);
    }

    #[test]
    fn f_ap_table_rows() {
        let g = attenuation_to_rate(0.2, DEFAULT_FIBER_SPEED).unwrap();
        let f = f_ap(0.713, g, 500.0, DEFAULT_FIBER_SPEED).unwrap();
        assert!((f - 0.806).abs() < 2e-3, "{f}");
        let f = f_ap(0.158, g, 500.0, DEFAULT_FIBER_SPEED).unwrap();
        assert!((f - 0.459).abs() < 2e-3, "{f}");
        assert_eq!(f_ap(1.0, g, 500.0, DEFAULT_FIBER_SPEED).unwrap(), f_fib_opt(g, 500.0, DEFAULT_FIBER_SPEED));
        assert!(f_ap(0.0, g, 500.0, DEFAULT_FIBER_SPEED).is_err());
        assert_eq!(f_ap(0.4, g, 0.0, DEFAULT_FIBER_SPEED).unwrap(), 1.0);
    }

    #[test]
    fn optimal_t_closed_form_matches_numeric() {
        for (gf, gc) in [(9204.0, 0.0), (9204.0, 3747.0), (1.0, 1e5), (1e5, 1.0)] {
            let a = optimal_t(gf, 1.57e6, gc, 3.9e4).unwrap();
            let b = optimal_t_numeric(gf, 1.57e6, gc, 3.9e4).unwrap();
            assert!((a - b).abs() / a < 1e-10, "{a} {b}");
        }
        assert_eq!(optimal_t(0.0, 1.57e6, 0.0, 3.9e4), Err(Error::UnboundedOptimum));
        assert_eq!(optimal_t_numeric(0.0, 1.57e6, 0.0, 3.9e4), Err(Error::UnboundedOptimum));
    }

    #[test]
    fn optimal_t_cavity_lossless_limit() {
        let (g0, fsr) = (3.9e4, 1.57e6);
        let t = optimal_t(9204.0, fsr, 0.0, g0).unwrap();
        assert!((g0 * g0 * t / fsr - 1.0).abs() < 1e-12);
    }

    #[test]
    fn optimal_t_reproduces_f_ap() {
        let r = fig6c(400.0);
        let mut inp = AnalyticInputs::from_rates(&r, 0.5, 0.0);
        inp.t = inp.optimal_t().unwrap();
        assert!((inp.f1() - inp.f_ap().unwrap()).abs() < 1e-10);
        // dense scan over T as an independent oracle
        let best = (0..20001)
            .map(|i| inp.t * 10f64.powf(-1.0 + 2.0 * i as f64 / 20000.0))
            .map(|t| AnalyticInputs { t, ..inp }.f1())
            .fold(0.0, f64::max);
        assert!((best - inp.f1()).abs() < 1e-9);
        let (a, b) = f1_exponent_coefficients(inp.g0, inp.gamma_fib, inp.fsr_fib, inp.gamma_cav_eff);
        let d = |t: f64| -a / (t * t) + b;
        assert!(d(inp.t * 0.999) < 0.0 && d(inp.t * 1.001) > 0.0);
    }

    #[test]
    fn l_max_cases() {
        let g = attenuation_to_rate(0.2, DEFAULT_FIBER_SPEED).unwrap();
        let cf = DEFAULT_FIBER_SPEED;
        assert!(matches!(l_max(1.0, g, cf, 0.05), Err(Error::NoCrossing { .. })));
        assert!(matches!(l_max(0.99, g, cf, 0.05), Err(Error::NoCrossing { .. })));
        let l = l_max(0.5, g, cf, 0.05).unwrap();
        assert!(l > 1000.0 && l < 100_000.0, "{l}");
        let resid = f_ap(0.5, g, l, cf).unwrap() - 0.25 * f_fib_opt(g, l, cf) - 0.05;
        assert!(resid.abs() < 1e-6);
        let g3 = attenuation_to_rate(3.0, cf).unwrap();
        assert!(l_max(0.5, g3, cf, 0.05).unwrap() < l);
    }

    #[test]
    fn l_max_agrees_with_dense_scan() {
        let g = attenuation_to_rate(0.2, DEFAULT_FIBER_SPEED).unwrap();
        let cf = DEFAULT_FIBER_SPEED;
        let l = l_max(0.5, g, cf, 0.05).unwrap();
        let last_above = (0..200_000)
            .map(|i| i as f64 * 0.5)
            .filter(|&x| f_ap(0.5, g, x, cf).unwrap() - 0.25 * f_fib_opt(g, x, cf) > 0.05)
            .fold(0.0, f64::max);
        assert!((last_above - l).abs() < 0.6, "{last_above} {l}");
    }

    #[test]
    fn cooperativity_cases() {
        assert!(cooperativity(1.0, 1.0, 0.0).is_infinite());
        assert!((cooperativity(2.0, 1.0, 2.0) - 1.0).abs() < 1e-15);
        assert_eq!(p1_tilde(f64::INFINITY, 0.4), 0.4);
        assert!((p1_tilde(0.25, 0.8) - 0.2).abs() < 1e-15);
        assert!((p1_tilde(27.0, 0.496) - 0.487).abs() < 5e-4);
        assert!((27.0 / 27.25f64 - 0.9908).abs() < 1e-4);
    }
}
