//! Adaptive Dormand–Prince 5(4) integrator for complex-valued linear systems.

use num_complex::Complex64 as C64;

use crate::error::{Error, Result};

pub trait OdeSystem {
    fn dim(&self) -> usize;
    fn rhs(&self, t: f64, y: &[C64], dy: &mut [C64]);
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct StepControl {
    pub rel_tol: f64,
    pub abs_tol: f64,
    /// Upper bound on the step size; `f64::INFINITY` for none.
    pub h_max: f64,
    pub max_steps: usize,
}

impl Default for StepControl {
    fn default() -> Self {
        StepControl { rel_tol: 1e-8, abs_tol: 1e-10, h_max: f64::INFINITY, max_steps: 50_000_000 }
    }
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct Stats {
    pub accepted: usize,
    pub rejected: usize,
    pub evaluations: usize,
}

const C2: f64 = 1.0 / 5.0;
const C3: f64 = 3.0 / 10.0;
const C4: f64 = 4.0 / 5.0;
const C5: f64 = 8.0 / 9.0;
const A21: f64 = 1.0 / 5.0;
const A31: f64 = 3.0 / 40.0;
const A32: f64 = 9.0 / 40.0;
const A41: f64 = 44.0 / 45.0;
const A42: f64 = -56.0 / 15.0;
const A43: f64 = 32.0 / 9.0;
const A51: f64 = 19372.0 / 6561.0;
const A52: f64 = -25360.0 / 2187.0;
const A53: f64 = 64448.0 / 6561.0;
const A54: f64 = -212.0 / 729.0;
const A61: f64 = 9017.0 / 3168.0;
const A62: f64 = -355.0 / 33.0;
const A63: f64 = 46732.0 / 5247.0;
const A64: f64 = 49.0 / 176.0;
const A65: f64 = -5103.0 / 18656.0;
const B1: f64 = 35.0 / 384.0;
const B3: f64 = 500.0 / 1113.0;
const B4: f64 = 125.0 / 192.0;
const B5: f64 = -2187.0 / 6784.0;
const B6: f64 = 11.0 / 84.0;
const E1: f64 = 71.0 / 57600.0;
const E3: f64 = -71.0 / 16695.0;
const E4: f64 = 71.0 / 1920.0;
const E5: f64 = -17253.0 / 339200.0;
const E6: f64 = 22.0 / 525.0;
const E7: f64 = -1.0 / 40.0;

/// Integrator state that survives between consecutive `advance` calls,
/// so that sampling a trajectory does not reset the step size.
pub struct Dopri5 {
    ctrl: StepControl,
    h: f64,
    k: [Vec<C64>; 7],
    tmp: Vec<C64>,
    y_new: Vec<C64>,
    fsal_valid: bool,
    pub stats: Stats,
}

impl Dopri5 {
    pub fn new(dim: usize, ctrl: StepControl) -> Self {
        let z = || vec![C64::new(0.0, 0.0); dim];
        Dopri5 {
            ctrl,
            h: 0.0,
            k: [z(), z(), z(), z(), z(), z(), z()],
            tmp: z(),
            y_new: z(),
            fsal_valid: false,
            stats: Stats::default(),
        }
    }

    fn initial_step<S: OdeSystem>(&mut self, sys: &S, t: f64, y: &[C64], span: f64) -> f64 {
        // Hairer–Wanner starting step estimate
        let n = y.len() as f64;
        let mut d0 = 0.0;
        let mut d1 = 0.0;
        for (yi, fi) in y.iter().zip(&self.k[0]) {
            let sc = self.ctrl.abs_tol + self.ctrl.rel_tol * yi.norm();
            d0 += (yi.norm() / sc).powi(2);
            d1 += (fi.norm() / sc).powi(2);
        }
        let (d0, d1) = ((d0 / n).sqrt(), (d1 / n).sqrt());
        let h0 = if d0 < 1e-5 || d1 < 1e-5 { 1e-6 * span } else { 0.01 * d0 / d1 };
        let h0 = h0.min(span);
        for (i, yi) in y.iter().enumerate() {
            self.tmp[i] = yi + self.k[0][i] * h0;
        }
        sys.rhs(t + h0, &self.tmp, &mut self.k[1]);
        self.stats.evaluations += 1;
        let mut d2 = 0.0;
        for (i, yi) in y.iter().enumerate() {
            let sc = self.ctrl.abs_tol + self.ctrl.rel_tol * yi.norm();
            d2 += ((self.k[1][i] - self.k[0][i]).norm() / sc).powi(2);
        }
        let d2 = (d2 / n).sqrt() / h0;
        let h1 = if d1.max(d2) <= 1e-15 { (h0 * 1e-3).max(1e-6 * span) } else { (0.01 / d1.max(d2)).powf(0.2) };
        (100.0 * h0).min(h1).min(span).min(self.ctrl.h_max)
    }

    /// Integrates `y` from `t0` to `t1` in place, landing exactly on `t1`.
    pub fn advance<S: OdeSystem>(&mut self, sys: &S, t0: f64, t1: f64, y: &mut [C64]) -> Result<()> {
        let n = y.len();
        debug_assert_eq!(n, sys.dim());
        let span = t1 - t0;
        // spans at the rounding level of t (sample times computed as t0 + k·Δ) are skipped
        if span <= 1e-14 * t0.abs().max(t1.abs()) {
            return Ok(());
        }
        if !self.fsal_valid {
            sys.rhs(t0, y, &mut self.k[0]);
            self.stats.evaluations += 1;
            self.fsal_valid = true;
        }
        if self.h <= 0.0 {
            self.h = self.initial_step(sys, t0, y, span);
        }
        let mut t = t0;
        let mut last_reject = false;
        while t < t1 {
            if self.stats.accepted + self.stats.rejected >= self.ctrl.max_steps {
                return Err(Error::Integrator { t, h: self.h, reason: "step budget exhausted".into() });
            }
            let mut h = self.h.min(self.ctrl.h_max);
            let hitting_end = t + h >= t1 || t + 1.01 * h >= t1;
            if hitting_end {
                h = t1 - t;
            }
            if h <= 1e-14 * t.abs().max(span) {
                return Err(Error::Integrator { t, h, reason: "step size underflow".into() });
            }
            let err = self.trial_step(sys, t, h, y);
            if err <= 1.0 {
                t = if hitting_end { t1 } else { t + h };
                y.copy_from_slice(&self.y_new);
                self.k.swap(0, 6);
                self.stats.accepted += 1;
                let mut fac = 0.9 * err.max(1e-10).powf(-0.2);
                fac = fac.clamp(0.2, 10.0);
                if last_reject {
                    fac = fac.min(1.0);
                }
                last_reject = false;
                // keep the natural step when the last one was shortened to hit t1
                if !hitting_end || h >= self.h {
                    self.h = h * fac;
                }
            } else {
                self.stats.rejected += 1;
                last_reject = true;
                self.h = h * (0.9 * err.powf(-0.2)).max(0.2);
                if !err.is_finite() {
                    self.h = h * 0.1;
                }
            }
        }
        Ok(())
    }

    fn trial_step<S: OdeSystem>(&mut self, sys: &S, t: f64, h: f64, y: &[C64]) -> f64 {
        let n = y.len();
        let [k1, k2, k3, k4, k5, k6, k7] = &mut self.k;
        let tmp = &mut self.tmp;
        for i in 0..n {
            tmp[i] = y[i] + k1[i] * (h * A21);
        }
        sys.rhs(t + C2 * h, tmp, k2);
        for i in 0..n {
            tmp[i] = y[i] + (k1[i] * A31 + k2[i] * A32) * h;
        }
        sys.rhs(t + C3 * h, tmp, k3);
        for i in 0..n {
            tmp[i] = y[i] + (k1[i] * A41 + k2[i] * A42 + k3[i] * A43) * h;
        }
        sys.rhs(t + C4 * h, tmp, k4);
        for i in 0..n {
            tmp[i] = y[i] + (k1[i] * A51 + k2[i] * A52 + k3[i] * A53 + k4[i] * A54) * h;
        }
        sys.rhs(t + C5 * h, tmp, k5);
        for i in 0..n {
            tmp[i] = y[i] + (k1[i] * A61 + k2[i] * A62 + k3[i] * A63 + k4[i] * A64 + k5[i] * A65) * h;
        }
        sys.rhs(t + h, tmp, k6);
        let y_new = &mut self.y_new;
        for i in 0..n {
            y_new[i] = y[i] + (k1[i] * B1 + k3[i] * B3 + k4[i] * B4 + k5[i] * B5 + k6[i] * B6) * h;
        }
        sys.rhs(t + h, y_new, k7);
        self.stats.evaluations += 6;
        let mut acc = 0.0;
        for i in 0..n {
            let e = (k1[i] * E1 + k3[i] * E3 + k4[i] * E4 + k5[i] * E5 + k6[i] * E6 + k7[i] * E7) * h;
            let sc = self.ctrl.abs_tol + self.ctrl.rel_tol * y[i].norm().max(y_new[i].norm());
            acc += e.norm_sqr() / (sc * sc);
        }
        (acc / n as f64).sqrt()
    }

    /// Forget the cached derivative, e.g. after the right-hand side changed discontinuously.
    pub fn reset_fsal(&mut self) {
        self.fsal_valid = false;
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    struct Rotor(f64);
    impl OdeSystem for Rotor {
        fn dim(&self) -> usize {
            1
        }
        fn rhs(&self, _t: f64, y: &[C64], dy: &mut [C64]) {
            dy[0] = C64::new(0.0, -self.0) * y[0];
        }
    }

    struct Damped;
    impl OdeSystem for Damped {
        fn dim(&self) -> usize {
            2
        }
        fn rhs(&self, t: f64, y: &[C64], dy: &mut [C64]) {
            // two-level Rabi flop with decay on the upper level
            let w = 1.0 + 0.5 * t.sin();
            let i = C64::new(0.0, 1.0);
            dy[0] = -i * w * y[1];
            dy[1] = -i * w * y[0] - 0.1 * y[1];
        }
    }

    #[test]
    fn rotor_phase() {
        let mut y = vec![C64::new(1.0, 0.0)];
        let ctrl = StepControl { rel_tol: 1e-10, abs_tol: 1e-12, ..Default::default() };
        let mut s = Dopri5::new(1, ctrl);
        s.advance(&Rotor(3.0), 0.0, 10.0, &mut y).unwrap();
        let exact = C64::from_polar(1.0, -30.0);
        assert!((y[0] - exact).norm() < 1e-8, "{:?}", y[0]);
    }

    #[test]
    fn split_intervals_agree() {
        let ctrl = StepControl { rel_tol: 1e-11, abs_tol: 1e-13, ..Default::default() };
        let mut y1 = vec![C64::new(1.0, 0.0), C64::new(0.0, 0.0)];
        let mut s = Dopri5::new(2, ctrl);
        s.advance(&Damped, 0.0, 7.0, &mut y1).unwrap();
        let mut y2 = vec![C64::new(1.0, 0.0), C64::new(0.0, 0.0)];
        let mut s = Dopri5::new(2, ctrl);
        for k in 0..7 {
            s.advance(&Damped, k as f64, (k + 1) as f64, &mut y2).unwrap();
        }
        assert!((y1[0] - y2[0]).norm() < 1e-9);
        assert!((y1[1] - y2[1]).norm() < 1e-9);
    }

    #[test]
    fn fifth_order_convergence() {
        // global error shrinks by roughly 2^5 per halving of a fixed step
        let run = |h: f64| {
            let ctrl = StepControl { rel_tol: 1.0, abs_tol: 1.0, h_max: h, ..Default::default() };
            let mut y = vec![C64::new(1.0, 0.0)];
            let mut s = Dopri5::new(1, ctrl);
            s.advance(&Rotor(1.0), 0.0, 4.0, &mut y).unwrap();
            (y[0] - C64::from_polar(1.0, -4.0)).norm()
        };
        let ratio = run(0.2) / run(0.1);
        assert!(ratio > 20.0 && ratio < 45.0, "{ratio}");
    }
}
