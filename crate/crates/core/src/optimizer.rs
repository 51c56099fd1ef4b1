//! Grid-then-simplex search over drive parameters.

use argmin::core::{CostFunction, Executor, State};
use argmin::solver::brent::BrentOpt;
use argmin::solver::neldermead::NelderMead;
use argmin_math::ArgminAdd;
use serde::{Deserialize, Serialize};
use std::sync::atomic::{AtomicUsize, Ordering};

use crate::dynamics::{converge_with, integrate_full, integrate_full_with_atomic_decay, SimConfig, SimResult};
use crate::error::{Error, Result};
use crate::parallel::{self, Execution};
use crate::params::{derive_rates, SetupConfig};
use crate::protocols::{ap_gaussian_schedule, wps_schedule, DriveSchedule};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SearchSpace {
    /// Pulse width in units of 1/κ_cav, searched on a log axis.
    pub t_range: (f64, f64),
    pub x_spl_range: (f64, f64),
    /// Ω_max/Δ_at, searched on a log axis.
    pub omega_ratio_range: (f64, f64),
    /// Grid points along (T, x_spl, Ω ratio).
    pub grid_points: [usize; 3],
    pub refine: bool,
    /// Relative F tolerance of the simplex.
    pub refine_tol: f64,
    pub max_refine_iters: u64,
    /// Simplex iterations at the converged mode count; 0 skips the polish.
    pub polish_iters: u64,
    /// Tolerance of the mode-count convergence at the refined point.
    pub delta_tol: f64,
    pub execution: Execution,
}

impl Default for SearchSpace {
    fn default() -> Self {
        SearchSpace {
            t_range: (10.0, 1000.0),
            x_spl_range: (0.8, 2.1),
            omega_ratio_range: (1e-4, 1e-1),
            grid_points: [8, 6, 8],
            refine: true,
            refine_tol: 1e-4,
            max_refine_iters: 200,
            polish_iters: 0,
            delta_tol: 1e-4,
            execution: Execution::Parallel,
        }
    }
}

fn check_range(field: &'static str, r: (f64, f64)) -> Result<()> {
    if !(r.0 > 0.0 && r.1.is_finite() && r.0 <= r.1) {
        return Err(Error::invalid(field, format!("need 0 < lo <= hi, got {:?}", r)));
    }
    Ok(())
}

impl SearchSpace {
    pub fn validate(&self) -> Result<()> {
        check_range("search.t_range", self.t_range)?;
        check_range("search.x_spl_range", self.x_spl_range)?;
        check_range("search.omega_ratio_range", self.omega_ratio_range)?;
        if self.grid_points.contains(&0) {
            return Err(Error::invalid("search.grid_points", "every axis needs at least one point"));
        }
        if !(self.refine_tol > 0.0 && self.delta_tol > 0.0) {
            return Err(Error::invalid("search.refine_tol", "tolerances must be > 0"));
        }
        Ok(())
    }

    fn axes(&self) -> [Vec<f64>; 3] {
        [
            log_axis(self.t_range, self.grid_points[0]),
            lin_axis(self.x_spl_range, self.grid_points[1]),
            log_axis(self.omega_ratio_range, self.grid_points[2]),
        ]
    }
}

fn lin_axis(r: (f64, f64), n: usize) -> Vec<f64> {
    if n == 1 {
        return vec![0.5 * (r.0 + r.1)];
    }
    (0..n).map(|i| r.0 + (r.1 - r.0) * i as f64 / (n - 1) as f64).collect()
}

fn log_axis(r: (f64, f64), n: usize) -> Vec<f64> {
    lin_axis((r.0.ln(), r.1.ln()), n).into_iter().map(f64::exp).collect()
}

/// AP drive parameters. `t_units` is the width in units of 1/κ_cav.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ApParams {
    pub t_units: f64,
    pub x_spl: f64,
    pub omega_ratio: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "protocol", rename_all = "lowercase")]
pub enum BestParams {
    Ap(ApParams),
    /// Peak effective coupling in rad/s.
    Wps { g_max: f64 },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OptResult {
    pub best_params: BestParams,
    pub best_f: f64,
    /// Best coarse-grid value, re-evaluated at the final mode count.
    pub grid_best_f: f64,
    pub evaluations: usize,
    /// G_max < κ/10.
    pub regime_ok: bool,
    pub n_modes_used: usize,
    pub converged: bool,
}

fn simulate(cfg: &SetupConfig, sched: &DriveSchedule, sim: &SimConfig) -> Result<SimResult> {
    if cfg.atom.gamma_sp > 0.0 {
        integrate_full_with_atomic_decay(cfg, sched, sim)
    } else {
        integrate_full(cfg, sched, sim)
    }
}

pub fn ap_schedule(cfg: &SetupConfig, p: &ApParams) -> Result<DriveSchedule> {
    let r = derive_rates(cfg)?;
    ap_gaussian_schedule(p.omega_ratio * cfg.atom.delta_at, p.t_units / r.kappa_cav, p.x_spl)
}

/// Runs the full model once for an AP parameter set.
pub fn evaluate_ap(cfg: &SetupConfig, p: &ApParams, sim: &SimConfig) -> Result<SimResult> {
    simulate(cfg, &ap_schedule(cfg, p)?, sim)
}

pub fn evaluate_wps(cfg: &SetupConfig, g_max: f64, sim: &SimConfig) -> Result<SimResult> {
    let r = derive_rates(cfg)?;
    simulate(cfg, &wps_schedule(&r, &cfg.atom, g_max)?, sim)
}

fn regime_ok(cfg: &SetupConfig, g_max: f64) -> Result<bool> {
    let r = derive_rates(cfg)?;
    let ok = g_max < r.kappa.min(r.node_b.kappa) / 10.0;
    if !ok {
        log::warn!("G_max/κ = {:.3} is outside the elimination regime", g_max / r.kappa);
    }
    Ok(ok)
}

// Index of the largest value; ties keep the earliest, i.e. the lexicographically smallest cell.
fn argmax(values: &[Option<f64>]) -> Option<usize> {
    let mut best: Option<(usize, f64)> = None;
    for (i, v) in values.iter().enumerate() {
        if let Some(f) = *v {
            if best.is_none_or(|(_, b)| f > b) {
                best = Some((i, f));
            }
        }
    }
    best.map(|(i, _)| i)
}

struct ApCost<'a> {
    cfg: &'a SetupConfig,
    sim: SimConfig,
    space: &'a SearchSpace,
    evals: AtomicUsize,
}

impl<'a> ApCost<'a> {
    fn new(cfg: &'a SetupConfig, sim: SimConfig, space: &'a SearchSpace) -> Self {
        ApCost { cfg, sim, space, evals: AtomicUsize::new(0) }
    }

    fn params(&self, v: &[f64]) -> ApParams {
        let s = self.space;
        ApParams {
            t_units: v[0].clamp(s.t_range.0.ln(), s.t_range.1.ln()).exp(),
            x_spl: v[1].clamp(s.x_spl_range.0, s.x_spl_range.1),
            omega_ratio: v[2].clamp(s.omega_ratio_range.0.ln(), s.omega_ratio_range.1.ln()).exp(),
        }
    }
}

impl CostFunction for ApCost<'_> {
    type Param = Vec<f64>;
    type Output = f64;

    fn cost(&self, v: &Vec<f64>) -> std::result::Result<f64, argmin::core::Error> {
        self.evals.fetch_add(1, Ordering::Relaxed);
        // failed evaluations count as F = 0 so the simplex moves away from them
        Ok(evaluate_ap(self.cfg, &self.params(v), &self.sim).map_or(0.0, |r| -r.fidelity))
    }
}

fn axis_step(axis: &[f64], log: bool) -> f64 {
    if axis.len() < 2 {
        return 0.1;
    }
    let (a, b) = (axis[0], axis[1]);
    if log {
        (b / a).ln()
    } else {
        b - a
    }
}

// Simplex in (ln T, x_spl, ln Ω ratio) started at `p` with edges of half a grid step.
fn simplex_ap(
    cfg: &SetupConfig,
    space: &SearchSpace,
    sim: SimConfig,
    p: &ApParams,
    steps: [f64; 3],
    f_scale: f64,
    iters: u64,
) -> Result<(Option<ApParams>, usize)> {
    let cost = ApCost::new(cfg, sim, space);
    let x0 = vec![p.t_units.ln(), p.x_spl, p.omega_ratio.ln()];
    let mut simplex = vec![x0.clone()];
    for (k, &h) in steps.iter().enumerate() {
        let mut e = vec![0.0; 3];
        e[k] = 0.5 * h;
        simplex.push(x0.add(&e));
    }
    let solver = NelderMead::new(simplex)
        .with_sd_tolerance(space.refine_tol * f_scale.max(1e-3))
        .map_err(|e| Error::Search(e.to_string()))?;
    let res = Executor::new(cost, solver)
        .configure(|s| s.max_iters(iters))
        .run()
        .map_err(|e| Error::Search(e.to_string()))?;
    let best = res.state().get_best_param().map(|v| res.problem.problem.as_ref().expect("problem").params(v));
    let evals = res.problem.problem.as_ref().map_or(0, |c| c.evals.load(Ordering::Relaxed));
    Ok((best, evals))
}

// Doubles N from `sim.n_modes` until F moves by less than `delta_tol`. On failure the
// result at `max_modes` is returned with `converged = false`.
fn converge_counted<F>(sim: &SimConfig, delta_tol: f64, evals: &mut usize, mut run: F) -> Result<(SimConfig, SimResult)>
where
    F: FnMut(&SimConfig) -> Result<SimResult>,
{
    let mut count = 0;
    let out = converge_with(sim, delta_tol, |s| {
        count += 1;
        run(s)
    });
    *evals += count;
    match out {
        Ok(r) => Ok((sim.with_modes(r.n_modes_used), r)),
        Err(Error::NonConvergence { last_delta, .. }) => {
            log::warn!("no mode convergence up to N = {} (last ΔF = {last_delta:.2e})", sim.max_modes);
            let capped = sim.with_modes(sim.max_modes);
            let mut r = run(&capped)?;
            *evals += 1;
            r.converged = false;
            Ok((capped, r))
        }
        Err(e) => Err(e),
    }
}

/// AP search. The grid and the simplex run at `sim.n_modes` as a cheap proxy; the mode
/// count is then converged at the refined point and at the best grid cell, and the better
/// of the two is reported. `polish_iters > 0` adds a second simplex at the converged N.
pub fn optimize_ap(cfg: &SetupConfig, space: &SearchSpace, sim: &SimConfig) -> Result<OptResult> {
    space.validate()?;
    sim.validate()?;
    cfg.validate()?;
    let [ts, xs, os] = space.axes();
    let mut cells = Vec::with_capacity(ts.len() * xs.len() * os.len());
    for &t_units in &ts {
        for &x_spl in &xs {
            for &omega_ratio in &os {
                cells.push(ApParams { t_units, x_spl, omega_ratio });
            }
        }
    }
    let values = parallel::map(space.execution, &cells, |p| match evaluate_ap(cfg, p, sim) {
        Ok(r) => Some(r.fidelity),
        Err(e) => {
            log::debug!("grid cell {p:?} failed: {e}");
            None
        }
    });
    let mut evaluations = cells.len();
    let best_cell = argmax(&values).ok_or_else(|| Error::Search("every grid evaluation failed".into()))?;
    let grid_params = cells[best_cell];
    let grid_proxy = values[best_cell].expect("argmax picks a value");
    log::debug!("AP grid: {} cells, best {grid_params:?} F = {grid_proxy:.6} at N = {}", cells.len(), sim.n_modes);
    let steps = [axis_step(&ts, true), axis_step(&xs, false), axis_step(&os, true)];

    let mut refined = grid_params;
    if space.refine {
        let (p, n) = simplex_ap(cfg, space, *sim, &grid_params, steps, grid_proxy, space.max_refine_iters)?;
        evaluations += n;
        refined = p.unwrap_or(grid_params);
        log::debug!("AP simplex: {n} evaluations, {refined:?}");
    }

    let sched = ap_schedule(cfg, &refined)?;
    let (sim_star, r) = converge_counted(sim, space.delta_tol, &mut evaluations, |s| simulate(cfg, &sched, s))?;
    log::debug!("AP modes: N = {} F = {:.6}", sim_star.n_modes, r.fidelity);
    let mut best = (refined, r.fidelity, r.converged);
    let grid_best_f = if refined == grid_params {
        r.fidelity
    } else {
        let g = evaluate_ap(cfg, &grid_params, &sim_star)?;
        evaluations += 1;
        if g.fidelity > best.1 {
            best = (grid_params, g.fidelity, r.converged);
        }
        g.fidelity
    };

    if space.refine && space.polish_iters > 0 {
        let (p, n) = simplex_ap(cfg, space, sim_star, &best.0, steps.map(|h| 0.5 * h), best.1, space.polish_iters)?;
        evaluations += n;
        if let Some(p) = p {
            let r = evaluate_ap(cfg, &p, &sim_star)?;
            evaluations += 1;
            if r.fidelity > best.1 {
                best = (p, r.fidelity, best.2);
            }
        }
    }
    let g_max = cfg.atom.g_atc * best.0.omega_ratio;
    Ok(OptResult {
        best_params: BestParams::Ap(best.0),
        best_f: best.1,
        grid_best_f,
        evaluations,
        regime_ok: regime_ok(cfg, g_max)?,
        n_modes_used: sim_star.n_modes,
        converged: best.2,
    })
}

/// Range of G_max in units of min(κ_A, κ_B).
pub const DEFAULT_WPS_RANGE: (f64, f64) = (0.05, 0.2 * (1.0 - 1e-9));

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct WpsSearch {
    /// G_max in units of min(κ_A, κ_B); the upper end must stay below 0.2.
    pub g_range: (f64, f64),
    pub grid_points: usize,
    pub refine: bool,
    pub refine_tol: f64,
    pub delta_tol: f64,
    pub execution: Execution,
}

impl Default for WpsSearch {
    fn default() -> Self {
        WpsSearch {
            g_range: DEFAULT_WPS_RANGE,
            grid_points: 8,
            refine: true,
            refine_tol: 1e-4,
            delta_tol: 1e-4,
            execution: Execution::Parallel,
        }
    }
}

struct WpsCost<'a> {
    cfg: &'a SetupConfig,
    sim: SimConfig,
    evals: AtomicUsize,
}

impl CostFunction for WpsCost<'_> {
    type Param = f64;
    type Output = f64;

    fn cost(&self, ln_g: &f64) -> std::result::Result<f64, argmin::core::Error> {
        self.evals.fetch_add(1, Ordering::Relaxed);
        Ok(evaluate_wps(self.cfg, ln_g.exp(), &self.sim).map_or(0.0, |r| -r.fidelity))
    }
}

/// WPS search over G_max: log grid and Brent in ln G_max between the neighbouring grid
/// points at `sim.n_modes`, then mode convergence at the refined point.
pub fn optimize_wps(cfg: &SetupConfig, sim: &SimConfig, search: &WpsSearch) -> Result<OptResult> {
    sim.validate()?;
    cfg.validate()?;
    check_range("wps.g_range", search.g_range)?;
    if search.grid_points == 0 {
        return Err(Error::invalid("wps.grid_points", "must be >= 1"));
    }
    let r = derive_rates(cfg)?;
    let kappa = r.kappa.min(r.node_b.kappa);
    let gs: Vec<f64> = log_axis(search.g_range, search.grid_points).into_iter().map(|u| u * kappa).collect();
    let values = parallel::map(search.execution, &gs, |&g| evaluate_wps(cfg, g, sim).ok().map(|r| r.fidelity));
    let mut evaluations = gs.len();
    let i = argmax(&values).ok_or_else(|| Error::Search("every grid evaluation failed".into()))?;

    let mut refined = gs[i];
    if search.refine && gs.len() > 1 {
        let lo = gs[i.saturating_sub(1)].ln();
        let hi = gs[(i + 1).min(gs.len() - 1)].ln();
        let solver = BrentOpt::new(lo, hi).set_tolerance(search.refine_tol.sqrt().min(1e-2), 1e-6);
        let cost = WpsCost { cfg, sim: *sim, evals: AtomicUsize::new(0) };
        let res = Executor::new(cost, solver)
            .configure(|s| s.max_iters(100))
            .run()
            .map_err(|e| Error::Search(e.to_string()))?;
        evaluations += res.problem.problem.as_ref().map_or(0, |c| c.evals.load(Ordering::Relaxed));
        if let Some(&ln_g) = res.state().get_best_param() {
            refined = ln_g.exp();
        }
    }

    let sched = wps_schedule(&r, &cfg.atom, refined)?;
    let (sim_star, res) = converge_counted(sim, search.delta_tol, &mut evaluations, |s| simulate(cfg, &sched, s))?;
    let mut best = (refined, res.fidelity, res.converged);
    let grid_best_f = if refined == gs[i] {
        res.fidelity
    } else {
        let g = evaluate_wps(cfg, gs[i], &sim_star)?;
        evaluations += 1;
        if g.fidelity > best.1 {
            best = (gs[i], g.fidelity, res.converged);
        }
        g.fidelity
    };
    Ok(OptResult {
        best_params: BestParams::Wps { g_max: best.0 },
        best_f: best.1,
        grid_best_f,
        evaluations,
        regime_ok: regime_ok(cfg, best.0)?,
        n_modes_used: sim_star.n_modes,
        converged: best.2,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TimingCurve {
    /// (x_spl, F) pairs in grid order.
    pub points: Vec<(f64, f64)>,
    pub best_x: f64,
    pub best_f: f64,
    /// Half-width of the interval around `best_x` where F ≥ best_f − 0.05.
    pub half_width: f64,
    /// False when F never drops below the threshold on one side of the grid.
    pub bounded: bool,
}

pub const TIMING_DROP: f64 = 0.05;

/// F as a function of x_spl with T and Ω held at `params`.
pub fn timing_sensitivity(
    cfg: &SetupConfig,
    sim: &SimConfig,
    params: &ApParams,
    x_grid: &[f64],
    exec: Execution,
) -> Result<TimingCurve> {
    if x_grid.is_empty() || x_grid.windows(2).any(|w| w[1] <= w[0]) {
        return Err(Error::invalid("x_grid", "must be nonempty and strictly increasing"));
    }
    let fs = parallel::map(exec, x_grid, |&x| evaluate_ap(cfg, &ApParams { x_spl: x, ..*params }, sim).map(|r| r.fidelity));
    let fs: Vec<f64> = fs.into_iter().collect::<Result<_>>()?;
    let opt: Vec<Option<f64>> = fs.iter().map(|&f| Some(f)).collect();
    let k = argmax(&opt).expect("nonempty");
    let (best_x, best_f) = (x_grid[k], fs[k]);
    let level = best_f - TIMING_DROP;
    let cross = |i: usize, j: usize| {
        // linear interpolation between an inside point i and an outside point j
        let (x0, f0, x1, f1) = (x_grid[i], fs[i], x_grid[j], fs[j]);
        x0 + (x1 - x0) * (f0 - level) / (f0 - f1)
    };
    let mut bounded = true;
    let mut left = x_grid[0];
    match (0..k).rev().find(|&j| fs[j] < level) {
        Some(j) => left = cross(j + 1, j),
        None => bounded = false,
    }
    let mut right = x_grid[x_grid.len() - 1];
    match (k + 1..x_grid.len()).find(|&j| fs[j] < level) {
        Some(j) => right = cross(j - 1, j),
        None => bounded = false,
    }
    Ok(TimingCurve {
        points: x_grid.iter().copied().zip(fs).collect(),
        best_x,
        best_f,
        half_width: 0.5 * (right - left),
        bounded,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepRow {
    pub length: f64,
    pub best_f: f64,
    pub p1: f64,
    pub f_ap: f64,
    pub t_opt: f64,
    pub x_spl_opt: f64,
    pub omega_ratio_opt: f64,
    pub n_modes_used: usize,
}

/// Optimized AP at each fiber length.
pub fn sweep_length(cfg: &SetupConfig, lengths: &[f64], space: &SearchSpace, sim: &SimConfig) -> Result<Vec<SweepRow>> {
    let mut rows = Vec::with_capacity(lengths.len());
    for &l in lengths {
        let c = cfg.with_fiber_length(l);
        let r = derive_rates(&c)?;
        let opt = optimize_ap(&c, space, sim)?;
        let BestParams::Ap(p) = opt.best_params else { unreachable!("optimize_ap returns AP parameters") };
        rows.push(SweepRow {
            length: l,
            best_f: opt.best_f,
            p1: r.p1,
            f_ap: crate::analytics::f_ap(r.p_out, r.gamma_fib, l, r.speed_cf)?,
            t_opt: p.t_units,
            x_spl_opt: p.x_spl,
            omega_ratio_opt: p.omega_ratio,
            n_modes_used: opt.n_modes_used,
        });
    }
    Ok(rows)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn axes() {
        assert_eq!(lin_axis((1.0, 3.0), 3), vec![1.0, 2.0, 3.0]);
        let l = log_axis((1.0, 100.0), 3);
        assert!((l[1] - 10.0).abs() < 1e-12);
        assert_eq!(lin_axis((1.0, 3.0), 1), vec![2.0]);
    }

    #[test]
    fn argmax_ties_take_first() {
        assert_eq!(argmax(&[Some(0.5), None, Some(0.7), Some(0.7)]), Some(2));
        assert_eq!(argmax(&[None, None]), None);
    }

    #[test]
    fn space_validation() {
        assert!(SearchSpace::default().validate().is_ok());
        let bad = SearchSpace { x_spl_range: (2.0, 1.0), ..Default::default() };
        assert!(bad.validate().is_err());
        let bad = SearchSpace { grid_points: [8, 0, 8], ..Default::default() };
        assert!(bad.validate().is_err());
    }
}
