//! Reduced models: atom–fiber–atom chains with few fiber modes, the three-level
//! STIRAP system, the adiabatic (dark/bright) representation, and the purely
//! photonic cavity–fiber–cavity transfer.

use num_complex::Complex64 as C64;
use serde::{Deserialize, Serialize};
use std::f64::consts::FRAC_PI_2;

use crate::error::{Error, Result};
use crate::ode::{Dopri5, OdeSystem, StepControl};
use crate::protocols::{sincos_couplings, DriveSchedule};

const I: C64 = C64::new(0.0, 1.0);
const ZERO: C64 = C64::new(0.0, 0.0);
const ONE: C64 = C64::new(1.0, 0.0);

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ReducedConfig {
    pub rel_tol: f64,
    pub abs_tol: f64,
    /// Evenly spaced samples recorded over the window; 0 records none.
    pub samples: usize,
}

impl Default for ReducedConfig {
    fn default() -> Self {
        ReducedConfig { rel_tol: 1e-10, abs_tol: 1e-12, samples: 0 }
    }
}

impl ReducedConfig {
    fn ctrl(&self) -> StepControl {
        StepControl { rel_tol: self.rel_tol, abs_tol: self.abs_tol, ..StepControl::default() }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ThreeModeState {
    pub c_a: C64,
    pub c_minus: C64,
    pub c_0: C64,
    pub c_plus: C64,
    pub c_b: C64,
}

impl ThreeModeState {
    pub fn norm_sqr(&self) -> f64 {
        [self.c_a, self.c_minus, self.c_0, self.c_plus, self.c_b].iter().map(|c| c.norm_sqr()).sum()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ThreeModeResult {
    pub fidelity: f64,
    pub series: Vec<(f64, ThreeModeState)>,
    pub final_state: ThreeModeState,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AdiabaticState {
    pub a_plus: C64,
    pub a_dark: C64,
    pub a_minus: C64,
}

/// How the effective cavity loss γ̃_cav enters a sine/cosine drive.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
pub enum CavityLossModel {
    /// Constant at its peak value.
    #[default]
    Peak,
    /// Constant at the mean of sin² over the window, half the peak.
    TimeAveraged,
    /// Follows the instantaneous coupling: γ̃(t) = γ̃_peak (g̃(t)/g₀)².
    Tracking,
}

/// End nodes A and B coupled to fiber modes −N..N; mode n detuned by n·FSR and
/// coupled to B with sign (−1)ⁿ.
struct Chain<C, D> {
    n: usize,
    couplings: C,
    decays: D,
    gamma_fib: f64,
    fsr: f64,
}

impl<C, D> OdeSystem for Chain<C, D>
where
    C: Fn(f64) -> (f64, f64),
    D: Fn(f64) -> (f64, f64),
{
    fn dim(&self) -> usize {
        2 * self.n + 3
    }

    fn rhs(&self, t: f64, y: &[C64], dy: &mut [C64]) {
        let (ga, gb) = (self.couplings)(t);
        let (da, db) = (self.decays)(t);
        let m = 2 * self.n + 1;
        let (xa, xb) = (y[0], y[m + 1]);
        let mut s_a = ZERO;
        let mut s_b = ZERO;
        for k in 0..m {
            let nn = k as i64 - self.n as i64;
            let s = if nn.rem_euclid(2) == 1 { -1.0 } else { 1.0 };
            let c = y[1 + k];
            s_a += c;
            s_b += c * s;
            dy[1 + k] = -(0.5 * self.gamma_fib + I * (nn as f64 * self.fsr)) * c - I * (ga * xa + s * gb * xb);
        }
        dy[0] = -I * ga * s_a - 0.5 * da * xa;
        dy[m + 1] = -I * gb * s_b - 0.5 * db * xb;
    }
}

/// Final state and the sampled trajectory.
type Trajectory = (Vec<C64>, Vec<(f64, Vec<C64>)>);

fn run_chain<C, D>(chain: &Chain<C, D>, t0: f64, t1: f64, cfg: &ReducedConfig) -> Result<Trajectory>
where
    C: Fn(f64) -> (f64, f64),
    D: Fn(f64) -> (f64, f64),
{
    let mut y = vec![ZERO; chain.dim()];
    y[0] = ONE;
    let mut solver = Dopri5::new(chain.dim(), cfg.ctrl());
    let mut series = Vec::new();
    if cfg.samples > 0 {
        series.push((t0, y.clone()));
        let mut t = t0;
        for k in 1..cfg.samples {
            let ts = t0 + (t1 - t0) * k as f64 / (cfg.samples - 1).max(1) as f64;
            solver.advance(chain, t, ts, &mut y)?;
            t = ts;
            series.push((t, y.clone()));
        }
    } else {
        solver.advance(chain, t0, t1, &mut y)?;
    }
    Ok((y, series))
}

fn three_mode_state(y: &[C64]) -> ThreeModeState {
    ThreeModeState { c_a: y[0], c_minus: y[1], c_0: y[2], c_plus: y[3], c_b: y[4] }
}

/// Atom A, fiber modes −1, 0, +1 and atom B with time-dependent effective couplings
/// and effective cavity losses. Returns F = |c_B|² at `t_end`.
pub fn integrate_three_mode<C, D>(
    couplings: C,
    decays: D,
    gamma_fib: f64,
    fsr: f64,
    t_span: (f64, f64),
    cfg: &ReducedConfig,
) -> Result<ThreeModeResult>
where
    C: Fn(f64) -> (f64, f64),
    D: Fn(f64) -> (f64, f64),
{
    let chain = Chain { n: 1, couplings, decays, gamma_fib, fsr };
    let (y, series) = run_chain(&chain, t_span.0, t_span.1, cfg)?;
    let final_state = three_mode_state(&y);
    Ok(ThreeModeResult {
        fidelity: final_state.c_b.norm_sqr(),
        series: series.into_iter().map(|(t, y)| (t, three_mode_state(&y))).collect(),
        final_state,
    })
}

fn warn_validity(g0: f64, gamma_fib: f64, fsr: f64) {
    let detuning = (0.25 * gamma_fib * gamma_fib + fsr * fsr).sqrt();
    if g0 > 0.1 * detuning {
        log::warn!("g0 = {g0:e} is not small against the sideband detuning {detuning:e}");
    }
}

fn decay_profile(model: CavityLossModel, peak: f64, width: f64) -> impl Fn(f64) -> (f64, f64) {
    move |t| match model {
        CavityLossModel::Peak => (peak, peak),
        CavityLossModel::TimeAveraged => (0.5 * peak, 0.5 * peak),
        CavityLossModel::Tracking => {
            let (a, b) = sincos_couplings(1.0, width, t);
            (peak * a * a, peak * b * b)
        }
    }
}

/// Three-mode model under g̃_A = g₀ sin(t/T), g̃_B = g₀ cos(t/T) on [0, πT/2].
pub fn sincos_three_mode(
    g0: f64,
    width: f64,
    gamma_fib: f64,
    fsr: f64,
    gamma_cav_eff: f64,
    model: CavityLossModel,
    cfg: &ReducedConfig,
) -> Result<ThreeModeResult> {
    warn_validity(g0, gamma_fib, fsr);
    integrate_three_mode(
        |t| sincos_couplings(g0, width, t),
        decay_profile(model, gamma_cav_eff, width),
        gamma_fib,
        fsr,
        (0.0, FRAC_PI_2 * width),
        cfg,
    )
}

/// Contributions of the two sidebands to the (A, B) block of the generator after
/// adiabatic elimination. Index 0 is A, index 1 is B.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SidebandCorrections {
    pub from_plus: [[C64; 2]; 2],
    pub from_minus: [[C64; 2]; 2],
}

impl SidebandCorrections {
    pub fn total(&self) -> [[C64; 2]; 2] {
        let (p, m) = (&self.from_plus, &self.from_minus);
        std::array::from_fn(|i| std::array::from_fn(|j| p[i][j] + m[i][j]))
    }
}

/// Eliminates c_{±1} from ċ_{±1} = −(γ/2 ± iδ)c_{±1} − i g̃_A c_A + i g̃_B c_B and
/// collects what each one feeds back into i·ċ_A and i·ċ_B.
pub fn sideband_corrections(ga: f64, gb: f64, gamma_fib: f64, delta: f64) -> SidebandCorrections {
    let block = |s: f64| {
        let denom = C64::new(0.5 * gamma_fib, s * delta);
        let r = ONE / denom;
        // c_s = (−i g̃_A c_A + i g̃_B c_B)·r; A sees +g̃_A c_s, B sees −g̃_B c_s
        [[-I * ga * ga * r, I * ga * gb * r], [I * ga * gb * r, -I * gb * gb * r]]
    };
    SidebandCorrections { from_plus: block(1.0), from_minus: block(-1.0) }
}

struct Effective<C, D> {
    couplings: C,
    decays: D,
    gamma_fib: f64,
    fsr: f64,
}

impl<C, D> OdeSystem for Effective<C, D>
where
    C: Fn(f64) -> (f64, f64),
    D: Fn(f64) -> (f64, f64),
{
    fn dim(&self) -> usize {
        3
    }

    fn rhs(&self, t: f64, y: &[C64], dy: &mut [C64]) {
        let (ga, gb) = (self.couplings)(t);
        let (da, db) = (self.decays)(t);
        let corr = sideband_corrections(ga, gb, self.gamma_fib, self.fsr).total();
        let (ca, c0, cb) = (y[0], y[1], y[2]);
        let ha = corr[0][0] * ca + corr[0][1] * cb + ga * c0 - 0.5 * I * da * ca;
        let h0 = ga * ca + gb * cb - 0.5 * I * self.gamma_fib * c0;
        let hb = corr[1][0] * ca + corr[1][1] * cb + gb * c0 - 0.5 * I * db * cb;
        dy[0] = -I * ha;
        dy[1] = -I * h0;
        dy[2] = -I * hb;
    }
}

/// The 3×3 model (c_A, c_0, c_B) with the sidebands eliminated.
pub fn integrate_effective_three_mode<C, D>(
    couplings: C,
    decays: D,
    gamma_fib: f64,
    fsr: f64,
    t_span: (f64, f64),
    cfg: &ReducedConfig,
) -> Result<f64>
where
    C: Fn(f64) -> (f64, f64),
    D: Fn(f64) -> (f64, f64),
{
    let sys = Effective { couplings, decays, gamma_fib, fsr };
    let mut y = vec![ONE, ZERO, ZERO];
    let mut solver = Dopri5::new(3, cfg.ctrl());
    solver.advance(&sys, t_span.0, t_span.1, &mut y)?;
    Ok(y[2].norm_sqr())
}

pub fn sincos_effective_three_mode(
    g0: f64,
    width: f64,
    gamma_fib: f64,
    fsr: f64,
    gamma_cav_eff: f64,
    model: CavityLossModel,
    cfg: &ReducedConfig,
) -> Result<f64> {
    integrate_effective_three_mode(
        |t| sincos_couplings(g0, width, t),
        decay_profile(model, gamma_cav_eff, width),
        gamma_fib,
        fsr,
        (0.0, FRAC_PI_2 * width),
        cfg,
    )
}

struct ThreeLevel {
    g: f64,
    width: f64,
    gamma_c: f64,
}

impl OdeSystem for ThreeLevel {
    fn dim(&self) -> usize {
        3
    }

    fn rhs(&self, t: f64, y: &[C64], dy: &mut [C64]) {
        let (ga, gb) = sincos_couplings(self.g, self.width, t);
        dy[0] = -I * ga * y[1];
        dy[1] = -I * (ga * y[0] + gb * y[2]) - 0.5 * self.gamma_c * y[1];
        dy[2] = -I * gb * y[1];
    }
}

/// Three-level A–C–B system with a decaying middle level under sine/cosine couplings.
/// Returns (numeric F, closed-form dark-state F).
pub fn stirap_three_level(g: f64, width: f64, gamma_c: f64, cfg: &ReducedConfig) -> Result<(f64, f64)> {
    if !(g > 0.0 && width > 0.0 && gamma_c >= 0.0) {
        return Err(Error::Domain("need g > 0, T > 0 and Γ_C >= 0".into()));
    }
    let sys = ThreeLevel { g, width, gamma_c };
    let mut y = vec![ONE, ZERO, ZERO];
    let mut solver = Dopri5::new(3, cfg.ctrl());
    solver.advance(&sys, 0.0, FRAC_PI_2 * width, &mut y)?;
    let closed = (-(gamma_c / (g * g * width)) * FRAC_PI_2).exp();
    Ok((y[2].norm_sqr(), closed))
}

/// The single-fiber-mode truncation: fiber loss treated as the decay of one middle level.
/// Kept for comparison only; it misses the sideband trade-off.
pub fn f_sfm(g0: f64, width: f64, gamma_fib: f64, cfg: &ReducedConfig) -> Result<f64> {
    stirap_three_level(g0, width, gamma_fib, cfg).map(|(f, _)| f)
}

pub fn dark_bright_transform(c_a: C64, c_c: C64, c_b: C64, g_a: f64, g_b: f64) -> Result<AdiabaticState> {
    let norm = g_a.hypot(g_b);
    if norm == 0.0 {
        return Err(Error::UndefinedBasis);
    }
    let dark = (g_b * c_a - g_a * c_b) / norm;
    let bright = (g_a * c_a + g_b * c_b) / norm;
    let h = std::f64::consts::FRAC_1_SQRT_2;
    Ok(AdiabaticState { a_plus: (bright + c_c) * h, a_dark: dark, a_minus: (bright - c_c) * h })
}

/// Dark-state amplitude with the bright states and sidebands eliminated.
pub fn dark_state_decay(g0: f64, width: f64, gamma_fib: f64, fsr: f64, gamma_cav_eff: f64, t: f64) -> f64 {
    let rate = gamma_fib / (2.0 * g0 * g0 * width * width) + gamma_fib * g0 * g0 / (2.0 * fsr * fsr) + gamma_cav_eff / 8.0;
    (-rate * t).exp()
}

/// Cavity–fiber–cavity transfer with time-dependent cavity-fiber couplings taken from the
/// two channels of `sched`; starts with the photon in cavity A.
pub fn photonic_transfer(sched: &DriveSchedule, gamma_fib: f64, fsr: f64, n_modes: usize, cfg: &ReducedConfig) -> Result<f64> {
    if n_modes < 1 {
        return Err(Error::invalid("n_modes", "must be >= 1"));
    }
    let chain = Chain { n: n_modes, couplings: |t| sched.omegas(t), decays: |_| (0.0, 0.0), gamma_fib, fsr };
    let (y, _) = run_chain(&chain, sched.t_start, sched.t_end, cfg)?;
    Ok(y[2 * n_modes + 2].norm_sqr())
}
