//! Single-excitation dynamics of atom A, cavity a, 2N+1 fiber modes, cavity b and atom B.

use num_complex::Complex64 as C64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::ode::{Dopri5, OdeSystem, StepControl};
use crate::params::{derive_rates, SetupConfig};
use crate::protocols::DriveSchedule;

const I: C64 = C64::new(0.0, 1.0);
const ZERO: C64 = C64::new(0.0, 0.0);

/// Frame for the fiber-mode amplitudes.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
pub enum Frame {
    #[default]
    Lab,
    /// Each fiber mode in its own frame rotating at n·FSR; cheaper when N·FSR ≫ κ.
    Rotating,
}

/// Sign pattern of the receiver cavity's coupling to fiber mode n.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
pub enum CouplingSigns {
    /// (−1)ⁿ, the physical standing-wave pattern.
    #[default]
    Alternating,
    /// All +1. Test hook only.
    Uniform,
}

impl CouplingSigns {
    pub fn sign(self, n: i64) -> f64 {
        match self {
            CouplingSigns::Alternating if n.rem_euclid(2) == 1 => -1.0,
            _ => 1.0,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SimConfig {
    /// Fiber modes run from −N to N.
    pub n_modes: usize,
    pub rel_tol: f64,
    pub abs_tol: f64,
    /// Extra time after the drives end; `None` picks 10/κ.
    pub t_margin: Option<f64>,
    /// Residual photonic population accepted as settled.
    pub settle_eps: f64,
    /// Number of evenly spaced samples over the drive window; 0 records none.
    pub samples: usize,
    pub frame: Frame,
    pub signs: CouplingSigns,
    /// Start in atom B and exchange the roles of the two drives.
    pub mirror: bool,
    /// Mode count above which `converge_modes` gives up.
    pub max_modes: usize,
}

impl Default for SimConfig {
    fn default() -> Self {
        SimConfig {
            n_modes: 2,
            rel_tol: 1e-8,
            abs_tol: 1e-10,
            t_margin: None,
            settle_eps: 1e-6,
            samples: 0,
            frame: Frame::Lab,
            signs: CouplingSigns::Alternating,
            mirror: false,
            max_modes: 4096,
        }
    }
}

impl SimConfig {
    pub fn with_modes(mut self, n: usize) -> Self {
        self.n_modes = n;
        self
    }

    pub fn validate(&self) -> Result<()> {
        if self.n_modes < 1 {
            return Err(Error::invalid("sim.n_modes", "must be >= 1"));
        }
        if !(self.rel_tol > 0.0 && self.abs_tol > 0.0) {
            return Err(Error::invalid("sim.rel_tol", "tolerances must be > 0"));
        }
        if !(self.settle_eps > 0.0) {
            return Err(Error::invalid("sim.settle_eps", "must be > 0"));
        }
        if let Some(m) = self.t_margin {
            if !(m >= 0.0) {
                return Err(Error::invalid("sim.t_margin", "must be >= 0"));
            }
        }
        Ok(())
    }

    fn step_control(&self) -> StepControl {
        StepControl { rel_tol: self.rel_tol, abs_tol: self.abs_tol, ..StepControl::default() }
    }

    fn rotating(&self) -> bool {
        self.frame == Frame::Rotating
    }

    /// Bound used by the norm-budget invariant.
    pub fn budget_tolerance(&self) -> f64 {
        10.0 * self.rel_tol.max(self.abs_tol)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AmplitudeState {
    pub c_atom_a: C64,
    pub c_cav_a: C64,
    /// Fiber modes n = −N..N, index n + N.
    pub c_fiber: Vec<C64>,
    pub c_cav_b: C64,
    pub c_atom_b: C64,
}

impl AmplitudeState {
    pub fn n_modes(&self) -> usize {
        (self.c_fiber.len() - 1) / 2
    }

    pub fn mode(&self, n: i64) -> C64 {
        let idx = n + self.n_modes() as i64;
        if idx < 0 {
            return ZERO;
        }
        self.c_fiber.get(idx as usize).copied().unwrap_or(ZERO)
    }

    pub fn fiber_population(&self) -> f64 {
        self.c_fiber.iter().map(|c| c.norm_sqr()).sum()
    }

    /// Cavities plus fiber.
    pub fn photonic_population(&self) -> f64 {
        self.c_cav_a.norm_sqr() + self.c_cav_b.norm_sqr() + self.fiber_population()
    }

    pub fn norm_sqr(&self) -> f64 {
        self.c_atom_a.norm_sqr() + self.c_atom_b.norm_sqr() + self.photonic_population()
    }
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize, Deserialize)]
pub struct LossLedger {
    pub cavity_a: f64,
    pub cavity_b: f64,
    pub fiber: f64,
    pub atom_a: f64,
    pub atom_b: f64,
}

impl LossLedger {
    pub fn total(&self) -> f64 {
        self.cavity_a + self.cavity_b + self.fiber + self.atom_a + self.atom_b
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Sample {
    pub t: f64,
    pub state: AmplitudeState,
    pub norm: f64,
    pub ledger: LossLedger,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SimResult {
    pub fidelity: f64,
    pub series: Vec<Sample>,
    pub loss_ledger: LossLedger,
    pub n_modes_used: usize,
    pub converged: bool,
    pub final_state: AmplitudeState,
    pub t_final: f64,
    pub steps: usize,
}

impl SimResult {
    /// Population left anywhere except the target atom.
    pub fn residual(&self) -> f64 {
        self.final_state.norm_sqr() - self.fidelity
    }

    /// F + losses + residual − 1.
    pub fn budget_error(&self) -> f64 {
        self.fidelity + self.loss_ledger.total() + self.residual() - 1.0
    }
}

/// Right-hand side of the full model.
///
/// Vector layout: [A, a, c_{−N}..c_N, b, B, five ledger channels].
#[derive(Clone, Copy)]
pub struct FullModel<'s> {
    sched: &'s DriveSchedule,
    n: usize,
    g_a: f64,
    g_b: f64,
    gamma_cav_a: f64,
    gamma_cav_b: f64,
    gamma_fib: f64,
    fsr: f64,
    /// g_at-c/Δ_at: converts a drive into an effective coupling.
    coupling: f64,
    /// Γ/Δ_at²: converts a squared drive into an atomic loss rate.
    atom_loss: Option<f64>,
    signs: CouplingSigns,
    rotating: bool,
    mirror: bool,
}

impl<'s> FullModel<'s> {
    pub fn new(cfg: &SetupConfig, sched: &'s DriveSchedule, sim: &SimConfig, atomic_decay: bool) -> Result<Self> {
        sim.validate()?;
        let r = derive_rates(cfg)?;
        let a = r.node_a();
        let gamma_sp = cfg.atom.gamma_sp;
        Ok(FullModel {
            sched,
            n: sim.n_modes,
            g_a: a.g_cf,
            g_b: r.node_b.g_cf,
            gamma_cav_a: a.gamma_cav,
            gamma_cav_b: r.node_b.gamma_cav,
            gamma_fib: r.gamma_fib,
            fsr: r.fsr_fib,
            coupling: cfg.atom.g_atc / cfg.atom.delta_at,
            atom_loss: (atomic_decay && gamma_sp > 0.0).then(|| gamma_sp / (cfg.atom.delta_at * cfg.atom.delta_at)),
            signs: sim.signs,
            rotating: sim.rotating(),
            mirror: sim.mirror,
        })
    }

    fn m(&self) -> usize {
        2 * self.n + 1
    }

    fn idx_b(&self) -> usize {
        2 + self.m()
    }

    /// Drives seen by nodes A and B, honoring the mirror flag.
    fn drives(&self, t: f64) -> (f64, f64) {
        let (oa, ob) = self.sched.omegas(t);
        if self.mirror {
            (ob, oa)
        } else {
            (oa, ob)
        }
    }

    fn initial(&self) -> Vec<C64> {
        let mut y = vec![ZERO; self.dim()];
        if self.mirror {
            y[self.idx_b() + 1] = C64::new(1.0, 0.0);
        } else {
            y[0] = C64::new(1.0, 0.0);
        }
        y
    }

    /// e^{i·N·FSR·t} and the per-mode step e^{−i·FSR·t}; mode n carries phase e^{−i·n·FSR·t}.
    fn phases(&self, t: f64) -> (C64, C64) {
        let x = self.fsr * t;
        (C64::from_polar(1.0, self.n as f64 * x), C64::from_polar(1.0, -x))
    }

    fn unpack(&self, t: f64, y: &[C64]) -> AmplitudeState {
        let m = self.m();
        let mut fiber = y[2..2 + m].to_vec();
        if self.rotating {
            let (mut p, w) = self.phases(t);
            for c in fiber.iter_mut() {
                *c *= p;
                p *= w;
            }
        }
        AmplitudeState { c_atom_a: y[0], c_cav_a: y[1], c_fiber: fiber, c_cav_b: y[2 + m], c_atom_b: y[3 + m] }
    }

    fn ledger(&self, y: &[C64]) -> LossLedger {
        let o = 4 + self.m();
        LossLedger { cavity_a: y[o].re, cavity_b: y[o + 1].re, fiber: y[o + 2].re, atom_a: y[o + 3].re, atom_b: y[o + 4].re }
    }

    /// Time derivative of a lab-frame amplitude state, for inspection in tests.
    pub fn derivative(&self, t: f64, state: &AmplitudeState) -> AmplitudeState {
        let lab = FullModel { rotating: false, ..*self };
        let m = self.m();
        let mut y = vec![ZERO; lab.dim()];
        y[0] = state.c_atom_a;
        y[1] = state.c_cav_a;
        y[2..2 + m].copy_from_slice(&state.c_fiber);
        y[2 + m] = state.c_cav_b;
        y[3 + m] = state.c_atom_b;
        let mut dy = vec![ZERO; lab.dim()];
        lab.rhs(t, &y, &mut dy);
        AmplitudeState { c_atom_a: dy[0], c_cav_a: dy[1], c_fiber: dy[2..2 + m].to_vec(), c_cav_b: dy[2 + m], c_atom_b: dy[3 + m] }
    }
}

impl OdeSystem for FullModel<'_> {
    fn dim(&self) -> usize {
        self.m() + 9
    }

    fn rhs(&self, t: f64, y: &[C64], dy: &mut [C64]) {
        let n = self.n as i64;
        let m = self.m();
        let (oa, ob) = self.drives(t);
        let (big_ga, big_gb) = (self.coupling * oa, self.coupling * ob);
        let (c_at_a, c_a, c_b, c_at_b) = (y[0], y[1], y[2 + m], y[3 + m]);
        let fiber = &y[2..2 + m];

        let mut s_a = ZERO;
        let mut s_b = ZERO;
        let mut fiber_pop = 0.0;
        if self.rotating {
            let (p0, w) = self.phases(t);
            let mut p = p0;
            for (k, d) in fiber.iter().enumerate() {
                let c = d * p;
                s_a += c;
                s_b += c * self.signs.sign(k as i64 - n);
                fiber_pop += d.norm_sqr();
                p *= w;
            }
            let inflow_a = -I * self.g_a * c_a;
            let inflow_b = -I * self.g_b * c_b;
            let mut p = p0;
            for (k, d) in fiber.iter().enumerate() {
                let s = self.signs.sign(k as i64 - n);
                dy[2 + k] = -0.5 * self.gamma_fib * d + (inflow_a + inflow_b * s) * p.conj();
                p *= w;
            }
        } else {
            let inflow_a = -I * self.g_a * c_a;
            let inflow_b = -I * self.g_b * c_b;
            for (k, c) in fiber.iter().enumerate() {
                let nn = k as i64 - n;
                let s = self.signs.sign(nn);
                s_a += c;
                s_b += c * s;
                fiber_pop += c.norm_sqr();
                dy[2 + k] = -(0.5 * self.gamma_fib + I * (nn as f64 * self.fsr)) * c + inflow_a + inflow_b * s;
            }
        }

        dy[0] = -I * big_ga * c_a;
        dy[1] = -0.5 * self.gamma_cav_a * c_a - I * (big_ga * c_at_a + self.g_a * s_a);
        dy[2 + m] = -0.5 * self.gamma_cav_b * c_b - I * (big_gb * c_at_b + self.g_b * s_b);
        dy[3 + m] = -I * big_gb * c_b;

        let o = 4 + m;
        dy[o] = C64::new(self.gamma_cav_a * c_a.norm_sqr(), 0.0);
        dy[o + 1] = C64::new(self.gamma_cav_b * c_b.norm_sqr(), 0.0);
        dy[o + 2] = C64::new(self.gamma_fib * fiber_pop, 0.0);
        if let Some(k) = self.atom_loss {
            let (la, lb) = (k * oa * oa, k * ob * ob);
            dy[0] -= 0.5 * la * c_at_a;
            dy[3 + m] -= 0.5 * lb * c_at_b;
            dy[o + 3] = C64::new(la * c_at_a.norm_sqr(), 0.0);
            dy[o + 4] = C64::new(lb * c_at_b.norm_sqr(), 0.0);
        } else {
            dy[o + 3] = ZERO;
            dy[o + 4] = ZERO;
        }
    }
}

/// A system the trajectory driver can run: it knows its initial vector and how to read results.
pub(crate) trait Transfer: OdeSystem {
    fn initial(&self) -> Vec<C64>;
    fn state(&self, t: f64, y: &[C64]) -> AmplitudeState;
    fn losses(&self, y: &[C64]) -> LossLedger;
    fn target(&self, state: &AmplitudeState) -> f64;
}

impl Transfer for FullModel<'_> {
    fn initial(&self) -> Vec<C64> {
        FullModel::initial(self)
    }
    fn state(&self, t: f64, y: &[C64]) -> AmplitudeState {
        self.unpack(t, y)
    }
    fn losses(&self, y: &[C64]) -> LossLedger {
        self.ledger(y)
    }
    fn target(&self, s: &AmplitudeState) -> f64 {
        if self.mirror {
            s.c_atom_a.norm_sqr()
        } else {
            s.c_atom_b.norm_sqr()
        }
    }
}

/// Advances through breakpoints, resetting the cached stage so kinks in the drive
/// never sit inside a step.
fn advance_piecewise<S: OdeSystem>(
    solver: &mut Dopri5,
    sys: &S,
    t0: f64,
    t1: f64,
    breaks: &[f64],
    y: &mut [C64],
) -> Result<()> {
    let mut t = t0;
    for &b in breaks.iter().filter(|&&b| b > t0 && b < t1) {
        solver.advance(sys, t, b, y)?;
        solver.reset_fsal();
        t = b;
    }
    solver.advance(sys, t, t1, y)?;
    if y.iter().any(|c| !c.re.is_finite() || !c.im.is_finite()) {
        return Err(Error::Integrator { t: t1, h: 0.0, reason: "non-finite amplitudes".into() });
    }
    Ok(())
}

pub(crate) fn run_transfer<S: Transfer>(
    sys: &S,
    sched: &DriveSchedule,
    sim: &SimConfig,
    default_margin: f64,
    n_modes_used: usize,
) -> Result<SimResult> {
    let mut y = sys.initial();
    let mut solver = Dopri5::new(sys.dim(), sim.step_control());
    let breaks = sched.breakpoints();
    let (t0, t1) = (sched.t_start, sched.t_end);
    let mut series = Vec::with_capacity(sim.samples + 1);
    let record = |t: f64, y: &[C64], series: &mut Vec<Sample>| {
        let state = sys.state(t, y);
        let norm = state.norm_sqr();
        series.push(Sample { t, state, norm, ledger: sys.losses(y) });
    };
    let mut t = t0;
    if sim.samples > 0 {
        record(t0, &y, &mut series);
        for k in 1..sim.samples {
            let ts = if k + 1 == sim.samples { t1 } else { t0 + (t1 - t0) * k as f64 / (sim.samples - 1) as f64 };
            advance_piecewise(&mut solver, sys, t, ts, &breaks, &mut y)?;
            t = ts;
            record(t, &y, &mut series);
        }
    }
    advance_piecewise(&mut solver, sys, t, t1, &breaks, &mut y)?;
    t = t1;
    solver.reset_fsal();

    // let the leftover field leak out so the ledger accounts for it
    let margin = sim.t_margin.unwrap_or(default_margin);
    let mut ext = margin;
    let mut converged = sys.state(t, &y).photonic_population() < sim.settle_eps;
    let mut rounds = 0;
    while !converged && margin > 0.0 && rounds < 4 {
        advance_piecewise(&mut solver, sys, t, t + ext, &[], &mut y)?;
        t += ext;
        converged = sys.state(t, &y).photonic_population() < sim.settle_eps;
        ext *= 2.0;
        rounds += 1;
    }
    let final_state = sys.state(t, &y);
    if sim.samples > 0 && t > t1 {
        record(t, &y, &mut series);
    }
    Ok(SimResult {
        fidelity: sys.target(&final_state),
        series,
        loss_ledger: sys.losses(&y),
        n_modes_used,
        converged,
        final_state,
        t_final: t,
        steps: solver.stats.accepted,
    })
}

/// Full model without atomic decay.
pub fn integrate_full(cfg: &SetupConfig, sched: &DriveSchedule, sim: &SimConfig) -> Result<SimResult> {
    run_full(cfg, sched, sim, false)
}

/// Full model with the effective atomic decay Γ(Ω/Δ_at)² on both atoms.
pub fn integrate_full_with_atomic_decay(cfg: &SetupConfig, sched: &DriveSchedule, sim: &SimConfig) -> Result<SimResult> {
    run_full(cfg, sched, sim, true)
}

fn run_full(cfg: &SetupConfig, sched: &DriveSchedule, sim: &SimConfig, atomic: bool) -> Result<SimResult> {
    let model = FullModel::new(cfg, sched, sim, atomic)?;
    let r = derive_rates(cfg)?;
    let margin = 10.0 / r.kappa.min(r.node_b.kappa);
    run_transfer(&model, sched, sim, margin, sim.n_modes)
}

/// Doubles the mode count from `sim.n_modes` until F changes by less than `delta_tol`.
pub fn converge_modes(cfg: &SetupConfig, sched: &DriveSchedule, sim: &SimConfig, delta_tol: f64) -> Result<SimResult> {
    converge_with(sim, delta_tol, |s| run_full(cfg, sched, s, cfg.atom.gamma_sp > 0.0))
}

pub(crate) fn converge_with<F>(sim: &SimConfig, delta_tol: f64, mut run: F) -> Result<SimResult>
where
    F: FnMut(&SimConfig) -> Result<SimResult>,
{
    if !(delta_tol > 0.0) {
        return Err(Error::invalid("delta_tol", "must be > 0"));
    }
    let mut s = *sim;
    let mut prev = run(&s)?;
    let mut delta = f64::INFINITY;
    while 2 * s.n_modes <= sim.max_modes {
        s.n_modes *= 2;
        let next = run(&s)?;
        delta = (next.fidelity - prev.fidelity).abs();
        if delta < delta_tol {
            return Ok(next);
        }
        prev = next;
    }
    Err(Error::NonConvergence { cap: sim.max_modes, last_delta: delta })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::params::*;
    use crate::protocols::*;

    fn setup(loss2: f64, x: f64, big_l: f64) -> SetupConfig {
        SetupConfig::new(
            CavitySpec::new(0.02, 13e-6, loss2).unwrap(),
            FiberSpec::new(big_l, x).unwrap(),
            AtomSpec::default(),
        )
    }

    fn ap(cfg: &SetupConfig, g_ratio: f64, t_units: f64, x_spl: f64) -> DriveSchedule {
        let r = derive_rates(cfg).unwrap();
        let omega = cfg.atom.drive_for_coupling(g_ratio * r.kappa);
        ap_gaussian_schedule(omega, t_units / r.kappa_cav, x_spl).unwrap()
    }

    #[test]
    fn decoupled_atom_stays() {
        let cfg = setup(2e-6, 0.2, 400.0);
        let s = ap_gaussian_schedule(0.0, 1e-4, 1.4).unwrap();
        let r = integrate_full(&cfg, &s, &SimConfig::default()).unwrap();
        assert_eq!(r.fidelity, 0.0);
        assert_eq!(r.final_state.c_atom_a, C64::new(1.0, 0.0));
    }

    #[test]
    fn budget_closes() {
        let cfg = setup(2e-6, 0.2, 400.0);
        let s = ap(&cfg, 0.5, 50.0, 1.4);
        let sim = SimConfig { samples: 20, ..SimConfig::default() };
        let r = integrate_full(&cfg, &s, &sim).unwrap();
        assert!(r.budget_error().abs() < sim.budget_tolerance(), "{}", r.budget_error());
        for smp in &r.series {
            assert!((smp.norm + smp.ledger.total() - 1.0).abs() < sim.budget_tolerance());
        }
        assert!(r.fidelity > 0.8, "{}", r.fidelity);
    }

    #[test]
    fn sampling_does_not_change_the_result() {
        let cfg = setup(5.233e-6, 0.2, 500.0);
        let s = ap(&cfg, 0.004 * cfg.atom.g_atc / derive_rates(&cfg).unwrap().kappa, 40.0, 1.4);
        let plain = integrate_full(&cfg, &s, &SimConfig::default()).unwrap();
        for samples in [2, 5, 7, 200] {
            let r = integrate_full(&cfg, &s, &SimConfig { samples, ..SimConfig::default() }).unwrap();
            assert_eq!(r.series.len(), samples);
            assert!((r.fidelity - plain.fidelity).abs() < 1e-7, "{samples}");
        }
    }

    #[test]
    fn frames_agree() {
        let cfg = setup(2e-6, 0.2, 400.0);
        let s = ap(&cfg, 0.5, 30.0, 1.4);
        let base = SimConfig { n_modes: 4, rel_tol: 1e-10, abs_tol: 1e-12, ..SimConfig::default() };
        let lab = integrate_full(&cfg, &s, &SimConfig { frame: Frame::Lab, ..base }).unwrap();
        let rot = integrate_full(&cfg, &s, &SimConfig { frame: Frame::Rotating, ..base }).unwrap();
        assert!((lab.fidelity - rot.fidelity).abs() < 1e-6, "{} {}", lab.fidelity, rot.fidelity);
    }

    #[test]
    fn zero_gamma_is_bit_identical() {
        let cfg = setup(2e-6, 0.2, 400.0);
        let s = ap(&cfg, 0.5, 20.0, 1.4);
        let a = integrate_full(&cfg, &s, &SimConfig::default()).unwrap();
        let b = integrate_full_with_atomic_decay(&cfg, &s, &SimConfig::default()).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn even_dark_state_is_odd_bright() {
        let cfg = setup(0.0, 0.0, 400.0);
        let s = ap_gaussian_schedule(0.0, 1e-4, 1.4).unwrap();
        let h = std::f64::consts::FRAC_1_SQRT_2;
        let state = AmplitudeState {
            c_atom_a: ZERO,
            c_cav_a: C64::new(h, 0.0),
            c_fiber: vec![ZERO; 9],
            c_cav_b: C64::new(-h, 0.0),
            c_atom_b: ZERO,
        };
        let phys = FullModel::new(&cfg, &s, &SimConfig::default().with_modes(4), false).unwrap();
        let d = phys.derivative(0.0, &state);
        for n in -4i64..=4 {
            let inflow = d.mode(n).norm();
            if n % 2 == 0 {
                assert!(inflow < 1e-9, "n={n} {inflow}");
            } else {
                assert!(inflow > 1.0, "n={n} {inflow}");
            }
        }
        let sim = SimConfig { signs: CouplingSigns::Uniform, ..SimConfig::default().with_modes(4) };
        let uni = FullModel::new(&cfg, &s, &sim, false).unwrap();
        assert!(uni.derivative(0.0, &state).fiber_population() < 1e-18);
    }

    #[test]
    fn mirror_symmetry_with_uniform_signs() {
        let cfg = setup(2e-6, 0.2, 400.0);
        let s = ap(&cfg, 0.5, 20.0, 1.4);
        let base = SimConfig { signs: CouplingSigns::Uniform, n_modes: 2, ..SimConfig::default() };
        let fwd = integrate_full(&cfg, &s, &base).unwrap();
        let bwd = integrate_full(&cfg, &s, &SimConfig { mirror: true, ..base }).unwrap();
        assert!((fwd.fidelity - bwd.fidelity).abs() < 1e-7, "{} {}", fwd.fidelity, bwd.fidelity);
    }
}
