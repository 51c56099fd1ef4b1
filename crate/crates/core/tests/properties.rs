use fiberlink::analytics::{f1, f_ap, l_max};
use fiberlink::dynamics::{integrate_full, SimConfig};
use fiberlink::optimizer::{evaluate_ap, ApParams};
use fiberlink::params::*;
use fiberlink::protocols::{ap_gaussian_schedule, wps_schedule, Shape};
use fiberlink::reduced::{dark_bright_transform, dark_state_decay};
use fiberlink::Complex64 as C64;
use proptest::prelude::*;
use std::f64::consts::FRAC_PI_2;

fn setup(t2: f64, loss2: f64, x: f64, big_l: f64) -> SetupConfig {
    SetupConfig::new(CavitySpec::new(0.02, t2, loss2).unwrap(), FiberSpec::new(big_l, x).unwrap(), AtomSpec::default())
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(100))]

    #[test]
    fn f_ap_beats_p1_below_l_max(p_out in 0.2f64..0.95, x in 0.1f64..4.0, frac in 0.01f64..3.0) {
        let cf = DEFAULT_FIBER_SPEED;
        let gamma = attenuation_to_rate(x, cf).unwrap();
        let lm = l_max(p_out, gamma, cf, 0.0).unwrap();
        let big_l = frac * lm;
        prop_assume!((frac - 1.0).abs() > 1e-3);
        let p1 = p_out * p_out * (-gamma * big_l / cf).exp();
        let f = f_ap(p_out, gamma, big_l, cf).unwrap();
        prop_assert_eq!(f > p1, frac < 1.0, "F_AP {} P1 {} at L/L_max {}", f, p1, frac);
        prop_assert!(f <= 1.0);
    }

    #[test]
    fn fiber_transmission_monotone(x in 0.01f64..5.0, l1 in 1.0f64..5000.0, dl in 1.0f64..5000.0) {
        let a = derive_rates(&setup(13e-6, 2e-6, x, l1)).unwrap();
        let b = derive_rates(&setup(13e-6, 2e-6, x, l1 + dl)).unwrap();
        prop_assert!(b.p_fib < a.p_fib);
        let c = derive_rates(&setup(13e-6, 2e-6, x * 1.5, l1)).unwrap();
        prop_assert!(c.p_fib < a.p_fib);
    }

    #[test]
    fn p_out_monotone(t2 in 1e-6f64..1e-3, loss2 in 1e-7f64..1e-3, f in 1.01f64..3.0) {
        let base = derive_rates(&setup(t2, loss2, 0.2, 400.0)).unwrap().p_out;
        prop_assert!(derive_rates(&setup(t2 * f, loss2, 0.2, 400.0)).unwrap().p_out > base);
        prop_assert!(derive_rates(&setup(t2, loss2 * f, 0.2, 400.0)).unwrap().p_out < base);
    }

    #[test]
    fn dark_bright_is_isometry(re in prop::array::uniform6(-1.0f64..1.0), ga in 0.0f64..10.0, gb in 0.01f64..10.0) {
        let (a, c, b) = (C64::new(re[0], re[1]), C64::new(re[2], re[3]), C64::new(re[4], re[5]));
        let s = dark_bright_transform(a, c, b, ga, gb).unwrap();
        let before = a.norm_sqr() + b.norm_sqr() + c.norm_sqr();
        let after = s.a_plus.norm_sqr() + s.a_dark.norm_sqr() + s.a_minus.norm_sqr();
        prop_assert!((before - after).abs() < 1e-12);
    }

    #[test]
    fn dark_state_endpoint_is_f1(g0 in 1e3f64..1e5, t in 1e-5f64..1e-2, gamma in 0.0f64..1e4, fsr in 1e5f64..1e8, gc in 0.0f64..1e4) {
        let a = dark_state_decay(g0, t, gamma, fsr, gc, FRAC_PI_2 * t);
        let f = f1(g0, t, gamma, fsr, gc);
        prop_assert!((a * a - f).abs() < 1e-12, "{} vs {}", a * a, f);
    }

    #[test]
    fn l_max_is_a_crossing(p_out in 0.2f64..0.95, x in 0.1f64..4.0) {
        let gamma = attenuation_to_rate(x, DEFAULT_FIBER_SPEED).unwrap();
        let cf = DEFAULT_FIBER_SPEED;
        let l = l_max(p_out, gamma, cf, 0.0).unwrap();
        let p1 = p_out * p_out * (-gamma * l / cf).exp();
        prop_assert!((f_ap(p_out, gamma, l, cf).unwrap() - p1).abs() < 1e-6);
    }

    #[test]
    fn gaussian_drive_window(w in 1e-5f64..1e-2, x in 1.25f64..2.1, omega in 1.0f64..1e8) {
        let s = ap_gaussian_schedule(omega, w, x).unwrap();
        let (oa, ob) = s.omegas(s.t_start);
        prop_assert!(oa / ob < 1e-6);
        let (oa, ob) = s.omegas(s.t_end);
        prop_assert!(ob / oa < 1e-6);
        prop_assert_eq!(s.omegas(s.t_start - w), (0.0, 0.0));
        prop_assert_eq!(s.omegas(s.t_end + w), (0.0, 0.0));
        let (pa, pb) = s.peaks();
        prop_assert!(pa <= omega && pb <= omega);
    }

    #[test]
    fn wps_rates_bounded(ratio in 0.01f64..0.19, big_l in 10.0f64..2000.0, k in 0usize..64) {
        let cfg = setup(13e-6, 2e-6, 0.2, big_l);
        let r = derive_rates(&cfg).unwrap();
        let s = wps_schedule(&r, &cfg.atom, ratio * r.kappa).unwrap();
        let Shape::Wps { gamma_max, .. } = s.shape else { unreachable!() };
        let t = s.t_start + (s.t_end - s.t_start) * k as f64 / 63.0;
        let (ga, gb) = s.wps_rates(t).unwrap();
        prop_assert!((0.0..=gamma_max * (1.0 + 1e-12)).contains(&ga));
        prop_assert!((0.0..=gamma_max * (1.0 + 1e-12)).contains(&gb));
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(12))]

    #[test]
    fn norm_budget_closes(loss2 in 0.0f64..5e-6, x in 0.0f64..3.0, big_l in 100.0f64..1000.0,
                          t_units in 10.0f64..60.0, x_spl in 0.8f64..2.1, g in 0.05f64..1.0) {
        let cfg = setup(13e-6, loss2, x, big_l);
        let r = derive_rates(&cfg).unwrap();
        let p = ApParams { t_units, x_spl, omega_ratio: g * r.kappa / cfg.atom.g_atc };
        let sim = SimConfig::default();
        let res = evaluate_ap(&cfg, &p, &sim).unwrap();
        prop_assert!(res.budget_error() < sim.budget_tolerance(), "budget error {}", res.budget_error());
        prop_assert!((0.0..=1.0).contains(&res.fidelity));
    }

    #[test]
    fn lossless_evolution_is_unitary(big_l in 100.0f64..1000.0, t_units in 10.0f64..60.0, g in 0.05f64..1.0) {
        let cfg = setup(13e-6, 0.0, 0.0, big_l);
        let r = derive_rates(&cfg).unwrap();
        let sched = ap_gaussian_schedule(cfg.atom.drive_for_coupling(g * r.kappa), t_units / r.kappa_cav, 1.4).unwrap();
        // the fiber-facing mirror is the only outlet, and it is internal to the system
        let sim = SimConfig { rel_tol: 1e-11, abs_tol: 1e-13, t_margin: Some(0.0), ..SimConfig::default() };
        let res = integrate_full(&cfg, &sched, &sim).unwrap();
        prop_assert!((res.final_state.norm_sqr() - 1.0).abs() < 1e-8, "{}", res.final_state.norm_sqr());
        prop_assert_eq!(res.loss_ledger.total(), 0.0);
    }
}

#[test]
fn mode_count_is_cauchy() {
    let cfg = setup(13e-6, 2e-6, 0.2, 400.0);
    let r = derive_rates(&cfg).unwrap();
    let p = ApParams { t_units: 60.0, x_spl: 1.4, omega_ratio: 0.5 * r.kappa / cfg.atom.g_atc };
    let fs: Vec<f64> = [2, 4, 8, 16]
        .iter()
        .map(|&n| evaluate_ap(&cfg, &p, &SimConfig::default().with_modes(n)).unwrap().fidelity)
        .collect();
    let deltas: Vec<f64> = fs.windows(2).map(|w| (w[1] - w[0]).abs()).collect();
    assert!(deltas.windows(2).all(|d| d[1] < d[0]), "{fs:?}");
    assert!(deltas[2] < 1e-4, "{deltas:?}");
}
