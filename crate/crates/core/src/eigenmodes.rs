//! Hybrid cavity–fiber–cavity eigenmodes and dynamics of the atoms coupled to them.

use nalgebra::{DMatrix, SymmetricEigen};
use num_complex::Complex64 as C64;
use serde::{Deserialize, Serialize};

use crate::dynamics::{run_transfer, AmplitudeState, LossLedger, SimConfig, SimResult, Transfer};
use crate::error::{Error, Result};
use crate::ode::OdeSystem;
use crate::params::{derive_rates, SetupConfig};
use crate::protocols::DriveSchedule;

const I: C64 = C64::new(0.0, 1.0);
const ZERO: C64 = C64::new(0.0, 0.0);

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct HybridModes {
    /// Eigenfrequencies in ascending order, rad/s.
    pub frequencies: Vec<f64>,
    pub cavity_content: Vec<f64>,
    pub fiber_content: Vec<f64>,
    /// Hybrid decay rates, rad/s.
    pub decay: Vec<f64>,
    /// Columns are eigenvectors over the basis (a, b, c_{−N}..c_N).
    pub transform: DMatrix<f64>,
    pub n_modes: usize,
}

impl HybridModes {
    pub fn len(&self) -> usize {
        self.frequencies.len()
    }

    pub fn is_empty(&self) -> bool {
        self.frequencies.is_empty()
    }

    /// Overlap of hybrid mode k with cavity a.
    pub fn overlap_a(&self, k: usize) -> f64 {
        self.transform[(0, k)]
    }

    pub fn overlap_b(&self, k: usize) -> f64 {
        self.transform[(1, k)]
    }
}

/// The real symmetric coupling matrix of the field sector over (a, b, c_{−N}..c_N).
pub fn field_matrix(g_a: f64, g_b: f64, fsr: f64, n_modes: usize) -> DMatrix<f64> {
    let m = 2 * n_modes + 1;
    let mut h = DMatrix::zeros(m + 2, m + 2);
    for k in 0..m {
        let n = k as i64 - n_modes as i64;
        let s = if n.rem_euclid(2) == 1 { -1.0 } else { 1.0 };
        h[(2 + k, 2 + k)] = n as f64 * fsr;
        h[(0, 2 + k)] = g_a;
        h[(2 + k, 0)] = g_a;
        h[(1, 2 + k)] = s * g_b;
        h[(2 + k, 1)] = s * g_b;
    }
    h
}

pub fn diagonalize_field_sector(cfg: &SetupConfig, n_modes: usize) -> Result<HybridModes> {
    if n_modes < 1 {
        return Err(Error::invalid("n_modes", "must be >= 1"));
    }
    let r = derive_rates(cfg)?;
    let h = field_matrix(r.g_ab, r.node_b.g_cf, r.fsr_fib, n_modes);
    let eig = SymmetricEigen::new(h);
    let dim = eig.eigenvalues.len();
    let mut order: Vec<usize> = (0..dim).collect();
    order.sort_by(|&i, &j| eig.eigenvalues[i].total_cmp(&eig.eigenvalues[j]));
    let transform = DMatrix::from_fn(dim, dim, |row, col| eig.eigenvectors[(row, order[col])]);
    let frequencies: Vec<f64> = order.iter().map(|&i| eig.eigenvalues[i]).collect();
    let mut cavity_content = Vec::with_capacity(dim);
    let mut fiber_content = Vec::with_capacity(dim);
    let mut decay = Vec::with_capacity(dim);
    for k in 0..dim {
        let va = transform[(0, k)].powi(2);
        let vb = transform[(1, k)].powi(2);
        let fc: f64 = (2..dim).map(|row| transform[(row, k)].powi(2)).sum();
        cavity_content.push(va + vb);
        fiber_content.push(fc);
        decay.push(va * r.gamma_cav + vb * r.node_b.gamma_cav + fc * r.gamma_fib);
    }
    Ok(HybridModes { frequencies, cavity_content, fiber_content, decay, transform, n_modes })
}

/// Eigenfrequencies of the field sector with one fiber mode on each side of resonance.
pub fn analytic_three_mode_eigs(g: f64, fsr: f64) -> [f64; 5] {
    let w1 = std::f64::consts::SQRT_2 * g;
    let w2 = (4.0 * g * g + fsr * fsr).sqrt();
    [-w2, -w1, 0.0, w1, w2]
}

/// Hybrid-mode eigenvectors for one fiber mode on each side of resonance, as rows over
/// (a, b, c₋₁, c₀, c₊₁), ordered like `analytic_three_mode_eigs`. Rows are normalized.
pub fn analytic_three_mode_transform(g: f64, fsr: f64) -> DMatrix<f64> {
    let w1 = std::f64::consts::SQRT_2 * g;
    let h = std::f64::consts::FRAC_1_SQRT_2;
    let outer = |lam: f64| {
        let x = (fsr + lam) * h / w1;
        [x, -x, 1.0, 0.0, 1.0 + fsr * (fsr + lam) / (w1 * w1)]
    };
    let [w2m, w1m, _, w1p, w2p] = analytic_three_mode_eigs(g, fsr);
    let rows = [
        outer(w2m),
        [w1m.signum() * h, w1m.signum() * h, 0.0, 1.0, 0.0],
        [fsr * h / w1, -fsr * h / w1, 1.0, 0.0, -1.0],
        [w1p.signum() * h, w1p.signum() * h, 0.0, 1.0, 0.0],
        outer(w2p),
    ];
    let mut m = DMatrix::from_fn(5, 5, |i, j| rows[i][j]);
    for mut row in m.row_iter_mut() {
        let n = row.norm();
        row /= n;
    }
    m
}

/// Atoms coupled to the hybrid modes; vector layout [A, h_0..h_{K−1}, B, five ledger channels].
struct HybridModel<'s> {
    sched: &'s DriveSchedule,
    modes: &'s HybridModes,
    u: Vec<f64>,
    w: Vec<f64>,
    gamma_a: f64,
    gamma_b: f64,
    gamma_fib: f64,
    coupling: f64,
    atom_loss: Option<f64>,
}

impl HybridModel<'_> {
    fn k(&self) -> usize {
        self.modes.len()
    }
}

impl OdeSystem for HybridModel<'_> {
    fn dim(&self) -> usize {
        self.k() + 7
    }

    fn rhs(&self, t: f64, y: &[C64], dy: &mut [C64]) {
        let k = self.k();
        let (oa, ob) = self.sched.omegas(t);
        let (ga, gb) = (self.coupling * oa, self.coupling * ob);
        let (ca, cb) = (y[0], y[k + 1]);
        let mut sa = ZERO;
        let mut sb = ZERO;
        let (mut loss_a, mut loss_b, mut loss_f) = (0.0, 0.0, 0.0);
        for j in 0..k {
            let h = y[1 + j];
            let (u, w) = (self.u[j], self.w[j]);
            sa += u * h;
            sb += w * h;
            let p = h.norm_sqr();
            loss_a += u * u * self.gamma_a * p;
            loss_b += w * w * self.gamma_b * p;
            loss_f += self.modes.fiber_content[j] * self.gamma_fib * p;
            dy[1 + j] = -(I * self.modes.frequencies[j] + 0.5 * self.modes.decay[j]) * h - I * (u * ga * ca + w * gb * cb);
        }
        dy[0] = -I * ga * sa;
        dy[k + 1] = -I * gb * sb;
        let o = k + 2;
        dy[o] = C64::new(loss_a, 0.0);
        dy[o + 1] = C64::new(loss_b, 0.0);
        dy[o + 2] = C64::new(loss_f, 0.0);
        if let Some(kl) = self.atom_loss {
            let (la, lb) = (kl * oa * oa, kl * ob * ob);
            dy[0] -= 0.5 * la * ca;
            dy[k + 1] -= 0.5 * lb * cb;
            dy[o + 3] = C64::new(la * ca.norm_sqr(), 0.0);
            dy[o + 4] = C64::new(lb * cb.norm_sqr(), 0.0);
        } else {
            dy[o + 3] = ZERO;
            dy[o + 4] = ZERO;
        }
    }
}

impl Transfer for HybridModel<'_> {
    fn initial(&self) -> Vec<C64> {
        let mut y = vec![ZERO; self.dim()];
        y[0] = C64::new(1.0, 0.0);
        y
    }

    fn state(&self, _t: f64, y: &[C64]) -> AmplitudeState {
        let k = self.k();
        let v = &self.modes.transform;
        let field: Vec<C64> = (0..k).map(|row| (0..k).map(|j| v[(row, j)] * y[1 + j]).sum()).collect();
        AmplitudeState { c_atom_a: y[0], c_cav_a: field[0], c_fiber: field[2..].to_vec(), c_cav_b: field[1], c_atom_b: y[k + 1] }
    }

    fn losses(&self, y: &[C64]) -> LossLedger {
        let o = self.k() + 2;
        LossLedger { cavity_a: y[o].re, cavity_b: y[o + 1].re, fiber: y[o + 2].re, atom_a: y[o + 3].re, atom_b: y[o + 4].re }
    }

    fn target(&self, s: &AmplitudeState) -> f64 {
        s.c_atom_b.norm_sqr()
    }
}

/// Same transfer as the full model, expressed in the hybrid eigenmode basis with
/// per-mode decay rates weighted by cavity and fiber content.
pub fn integrate_hybrid(cfg: &SetupConfig, sched: &DriveSchedule, sim: &SimConfig) -> Result<SimResult> {
    sim.validate()?;
    let r = derive_rates(cfg)?;
    let modes = diagonalize_field_sector(cfg, sim.n_modes)?;
    let k = modes.len();
    let gamma_sp = cfg.atom.gamma_sp;
    let model = HybridModel {
        sched,
        modes: &modes,
        u: (0..k).map(|j| modes.overlap_a(j)).collect(),
        w: (0..k).map(|j| modes.overlap_b(j)).collect(),
        gamma_a: r.gamma_cav,
        gamma_b: r.node_b.gamma_cav,
        gamma_fib: r.gamma_fib,
        coupling: cfg.atom.g_atc / cfg.atom.delta_at,
        atom_loss: (gamma_sp > 0.0).then(|| gamma_sp / (cfg.atom.delta_at * cfg.atom.delta_at)),
    };
    let margin = 10.0 / r.kappa.min(r.node_b.kappa);
    run_transfer(&model, sched, sim, margin, sim.n_modes)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::params::*;

    fn cfg(g_scale_l: f64) -> SetupConfig {
        SetupConfig::new(
            CavitySpec::new(0.02, 13e-6, 2e-6).unwrap(),
            FiberSpec::new(g_scale_l, 0.2).unwrap(),
            AtomSpec::default(),
        )
    }

    #[test]
    fn three_mode_eigs_match() {
        let c = cfg(400.0);
        let r = derive_rates(&c).unwrap();
        let modes = diagonalize_field_sector(&c, 1).unwrap();
        let exact = analytic_three_mode_eigs(r.g_ab, r.fsr_fib);
        for (a, b) in modes.frequencies.iter().zip(exact) {
            assert!((a - b).abs() <= 1e-12 * r.fsr_fib, "{a} {b}");
        }
        let w = 2.0 * std::f64::consts::SQRT_2;
        assert_eq!(analytic_three_mode_eigs(2.0, 0.0), [-4.0, -w, 0.0, w, 4.0]);
    }

    #[test]
    fn content_sums() {
        let modes = diagonalize_field_sector(&cfg(400.0), 6).unwrap();
        let total: f64 = modes.cavity_content.iter().sum();
        assert!((total - 2.0).abs() < 1e-12);
        for (cc, fc) in modes.cavity_content.iter().zip(&modes.fiber_content) {
            assert!((cc + fc - 1.0).abs() < 1e-12);
            assert!((0.0..=1.0 + 1e-12).contains(cc));
        }
        let v = &modes.transform;
        let id = v.transpose() * v;
        assert!((id - DMatrix::identity(v.nrows(), v.ncols())).abs().max() < 1e-10);
    }

    fn agreement(c: &SetupConfig) -> (f64, f64) {
        let r = derive_rates(c).unwrap();
        let omega = c.atom.drive_for_coupling(0.5 * r.kappa);
        let sched = crate::protocols::ap_gaussian_schedule(omega, 60.0 / r.kappa_cav, 1.4).unwrap();
        let sim = SimConfig::default().with_modes(3);
        let full = crate::dynamics::integrate_full(c, &sched, &sim).unwrap().fidelity;
        (full, integrate_hybrid(c, &sched, &sim).unwrap().fidelity)
    }

    #[test]
    fn hybrid_is_exact_for_uniform_decay() {
        let lossless = SetupConfig::new(
            CavitySpec::new(0.02, 13e-6, 0.0).unwrap(),
            FiberSpec::new(400.0, 0.0).unwrap(),
            AtomSpec::default(),
        );
        let (f, h) = agreement(&lossless);
        assert!((f - h).abs() < 1e-6, "{f} {h}");
        // γ_cav = γ_fib makes the decay matrix a multiple of the identity
        let gamma_fib = attenuation_to_rate(0.2, DEFAULT_FIBER_SPEED).unwrap();
        let loss2 = 2.0 * 0.02 * gamma_fib / SPEED_OF_LIGHT;
        let uniform = SetupConfig::new(
            CavitySpec::new(0.02, 13e-6, loss2).unwrap(),
            FiberSpec::new(400.0, 0.2).unwrap(),
            AtomSpec::default(),
        );
        let (f, h) = agreement(&uniform);
        assert!((f - h).abs() < 1e-6, "{f} {h}");
    }

    #[test]
    fn three_mode_transform_matches_eigenvectors() {
        let c = cfg(400.0);
        let r = derive_rates(&c).unwrap();
        let modes = diagonalize_field_sector(&c, 1).unwrap();
        let m = analytic_three_mode_transform(r.g_ab, r.fsr_fib);
        // equal up to the sign of each eigenvector
        let overlap = &m * &modes.transform;
        for k in 0..5 {
            assert!((overlap[(k, k)].abs() - 1.0).abs() < 1e-12, "{overlap}");
        }
    }
}
