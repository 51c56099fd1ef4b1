use std::f64::consts::PI;

use anyhow::{anyhow, bail, Context, Result};
use fiberlink::analytics::{cooperativity, f_ap, l_max, p1_tilde};
use fiberlink::config::{ProtocolInput, RunConfig};
use fiberlink::dynamics::{converge_modes, integrate_full, integrate_full_with_atomic_decay, SimResult};
use fiberlink::eigenmodes::{analytic_three_mode_eigs, diagonalize_field_sector, integrate_hybrid};
use fiberlink::optimizer::{
    optimize_ap, optimize_wps, sweep_length, timing_sensitivity, ApParams, BestParams, OptResult,
};
use fiberlink::params::{attenuation_to_rate, derive_rates, SetupConfig, DEFAULT_FIBER_SPEED};
use fiberlink::table::{recompute, SURVEY};
use fiberlink::Error;
use serde::Serialize;
use serde_json::json;

use crate::output::{num, opt_num, Sink, Table};
use crate::presets::{self, Preset};
use crate::{Cli, Command, Model, ProtocolChoice};

const TWO_PI: f64 = 2.0 * PI;

struct Input {
    rc: RunConfig,
    preset: Option<Preset>,
    name: Option<String>,
}

fn input(cli: &Cli) -> Result<Option<Input>> {
    if let Some(path) = &cli.config {
        let rc = RunConfig::load(path)?;
        return Ok(Some(Input { rc, preset: None, name: None }));
    }
    if let Some(name) = &cli.fig {
        let p = presets::load(name)?;
        log::info!("preset {name}: {}", p.description);
        return Ok(Some(Input { rc: p.config.clone(), preset: Some(p), name: Some(name.clone()) }));
    }
    Ok(None)
}

fn require(cli: &Cli) -> Result<Input> {
    input(cli)?.ok_or_else(|| anyhow!(Error::Config("this command needs --config PATH or --fig PRESET".into())))
}

fn print_json<T: Serialize>(v: &T) -> Result<()> {
    println!("{}", serde_json::to_string_pretty(v)?);
    Ok(())
}

/// Emits the tables, and prints `summary` when `--json` is set.
fn finish<T: Serialize>(cli: &Cli, sink: &Sink, tables: &[Table], inp: Option<&Input>, summary: Option<&T>) -> Result<()> {
    let rc = inp.map(|i| &i.rc);
    let name = inp.and_then(|i| i.name.as_deref());
    match (cli.json, summary) {
        (true, Some(s)) => {
            if sink.out_dir.is_some() {
                sink.emit(tables, rc, name)?;
            }
            print_json(s)
        }
        _ => sink.emit(tables, rc, name).map(|paths| {
            for p in paths {
                eprintln!("wrote {}", p.display());
            }
        }),
    }
}

pub fn run(cli: &Cli) -> Result<()> {
    match &cli.command {
        Command::Analyze => analyze(cli),
        Command::Table => table(cli),
        Command::Simulate(a) => simulate(cli, a),
        Command::Optimize(a) => optimize(cli, a),
        Command::SweepLength(a) => sweep(cli, a),
        Command::Lmax(a) => lmax(cli, a),
        Command::Modes(a) => modes(cli, a),
        Command::Timing(a) => timing(cli, a),
    }
}

fn setup(inp: &Input) -> Result<SetupConfig> {
    let cfg = inp.rc.setup()?;
    for w in cfg.warnings() {
        log::warn!("{w}");
    }
    Ok(cfg)
}

fn analyze(cli: &Cli) -> Result<()> {
    let inp = require(cli)?;
    let cfg = setup(&inp)?;
    let r = derive_rates(&cfg)?;
    let fa = f_ap(r.p_out, r.gamma_fib, r.length_fiber, r.speed_cf)?;
    let c = cooperativity(cfg.atom.g_atc, r.kappa, cfg.atom.gamma_sp);
    let mut rows: Vec<(&str, f64, &str)> = vec![
        ("kappa_cav", r.kappa_cav / TWO_PI, "/2π Hz"),
        ("gamma_cav", r.gamma_cav / TWO_PI, "/2π Hz"),
        ("kappa", r.kappa / TWO_PI, "/2π Hz"),
        ("FSR_fib", r.fsr_fib / TWO_PI, "/2π Hz"),
        ("g_cav_fib", r.g_ab / TWO_PI, "/2π Hz"),
        ("gamma_fib", r.gamma_fib / TWO_PI, "/2π Hz"),
        ("P_out", r.p_out, "1"),
        ("P_fib", r.p_fib, "1"),
        ("P1", r.p1, "1"),
        ("F_AP", fa, "1"),
        ("single_mode_param", r.sm_param, "1"),
        ("L_eff", r.l_eff, "m"),
    ];
    if c.is_finite() {
        rows.push(("cooperativity", c, "1"));
        rows.push(("P1_tilde", p1_tilde(c, r.p1), "1"));
    }
    let mut t = Table::new("analyze", &["quantity", "value", "unit"]);
    for (q, v, u) in &rows {
        t.push(vec![q.to_string(), num(*v), u.to_string()]);
    }
    let sink = Sink::new(cli.out.clone(), "analyze");
    if !cli.json && cli.out.is_none() {
        for (q, v, u) in &rows {
            println!("{q:<18} {v:>14.6e}  {u}");
        }
        return Ok(());
    }
    let summary = json!({
        "rates_rad_per_s": r,
        "f_ap": fa,
        "cooperativity": c.is_finite().then_some(c),
        "warnings": cfg.warnings(),
    });
    finish(cli, &sink, &[t], Some(&inp), Some(&summary))
}

fn table(cli: &Cli) -> Result<()> {
    let mut t = Table::new(
        "table",
        &[
            "name",
            "kappa_cav [/2π MHz]",
            "gamma_cav [/2π MHz]",
            "L_eff printed [m]",
            "L_eff [m]",
            "P_out printed [%]",
            "P_out from rates [%]",
            "P1 printed [%]",
            "P1 [%]",
            "P1 delta [pp]",
            "F_AP printed [%]",
            "F_AP [%]",
            "F_AP delta [pp]",
        ],
    );
    let mut rows = Vec::new();
    for row in &SURVEY {
        let r = recompute(row)?;
        t.push(vec![
            row.name.to_string(),
            num(row.kappa_cav_mhz),
            num(row.gamma_cav_mhz),
            num(row.l_eff),
            num(r.l_eff),
            num(row.p_out),
            num(r.p_out_from_rates),
            num(row.p1),
            num(r.p1),
            num(r.p1_delta(row)),
            num(row.f_ap),
            num(r.f_ap),
            num(r.f_ap_delta(row)),
        ]);
        rows.push(json!({"printed": row, "recomputed": r}));
    }
    let sink = Sink::new(cli.out.clone(), "table");
    finish(cli, &sink, &[t], None, Some(&rows))
}

fn run_model(cfg: &SetupConfig, rc: &RunConfig, a: &crate::SimulateArgs) -> Result<SimResult> {
    let sched = rc.schedule()?;
    let mut sim = rc.sim;
    sim.samples = a.samples;
    if let Some(n) = a.n_modes {
        sim.n_modes = n;
    }
    Ok(match (a.model, a.converge) {
        (Model::Full, Some(tol)) => converge_modes(cfg, &sched, &sim, tol)?,
        (Model::Full, None) if cfg.atom.gamma_sp > 0.0 => integrate_full_with_atomic_decay(cfg, &sched, &sim)?,
        (Model::Full, None) => integrate_full(cfg, &sched, &sim)?,
        (Model::Hybrid, None) => integrate_hybrid(cfg, &sched, &sim)?,
        (Model::Hybrid, Some(_)) => bail!(Error::Config("--converge applies to the full model only".into())),
    })
}

fn simulate(cli: &Cli, a: &crate::SimulateArgs) -> Result<()> {
    let inp = require(cli)?;
    let cfg = setup(&inp)?;
    let res = run_model(&cfg, &inp.rc, a)?;
    let mut t = Table::new(
        "simulate",
        &["t [s]", "atom_A", "cavity_A", "fiber", "cavity_B", "atom_B", "norm", "lost"],
    );
    for s in &res.series {
        let st = &s.state;
        t.push(vec![
            num(s.t),
            num(st.c_atom_a.norm_sqr()),
            num(st.c_cav_a.norm_sqr()),
            num(st.fiber_population()),
            num(st.c_cav_b.norm_sqr()),
            num(st.c_atom_b.norm_sqr()),
            num(s.norm),
            num(s.ledger.total()),
        ]);
    }
    let summary = json!({
        "fidelity": res.fidelity,
        "loss_ledger": res.loss_ledger,
        "residual": res.residual(),
        "budget_error": res.budget_error(),
        "n_modes_used": res.n_modes_used,
        "settled": res.converged,
        "t_final_s": res.t_final,
        "steps": res.steps,
    });
    if !cli.json {
        eprintln!("F = {:.6} (N = {}, {} steps)", res.fidelity, res.n_modes_used, res.steps);
    }
    let sink = Sink::new(cli.out.clone(), "simulate");
    finish(cli, &sink, &[t], Some(&inp), Some(&summary))
}

#[derive(Serialize)]
struct OptRow {
    protocol: &'static str,
    cooperativity: Option<f64>,
    p1: f64,
    p1_tilde: f64,
    result: OptResult,
}

fn opt_table(rows: &[OptRow], kappa: f64, g_atc: f64) -> Table {
    let mut t = Table::new(
        "optimize",
        &[
            "protocol",
            "cooperativity",
            "best_F",
            "grid_best_F",
            "P1",
            "P1_tilde",
            "T_opt [1/kappa_cav]",
            "x_spl_opt",
            "omega_ratio_opt [Omega/Delta_at]",
            "G_max [/kappa]",
            "n_modes_used",
            "converged",
            "regime_ok",
            "evaluations",
        ],
    );
    for r in rows {
        let (tt, x, o, g) = match r.result.best_params {
            BestParams::Ap(p) => (Some(p.t_units), Some(p.x_spl), Some(p.omega_ratio), g_atc * p.omega_ratio / kappa),
            BestParams::Wps { g_max } => (None, None, None, g_max / kappa),
        };
        t.push(vec![
            r.protocol.to_string(),
            opt_num(r.cooperativity),
            num(r.result.best_f),
            num(r.result.grid_best_f),
            num(r.p1),
            num(r.p1_tilde),
            opt_num(tt),
            opt_num(x),
            opt_num(o),
            num(g),
            r.result.n_modes_used.to_string(),
            r.result.converged.to_string(),
            r.result.regime_ok.to_string(),
            r.result.evaluations.to_string(),
        ]);
    }
    t
}

fn optimize(cli: &Cli, a: &crate::OptimizeArgs) -> Result<()> {
    let inp = require(cli)?;
    let base = setup(&inp)?;
    let r = derive_rates(&base)?;
    let cs: Vec<Option<f64>> = match &inp.preset {
        Some(p) if !p.cooperativities.is_empty() => p.cooperativities.iter().map(|&c| Some(c)).collect(),
        _ => vec![None],
    };
    let mut rows = Vec::new();
    for c in cs {
        let mut cfg = base;
        if let Some(c) = c {
            cfg.atom = base.atom.with_cooperativity(c, r.kappa);
        }
        let coop = cooperativity(cfg.atom.g_atc, r.kappa, cfg.atom.gamma_sp);
        let pt = p1_tilde(coop, r.p1);
        let c_col = c.or(coop.is_finite().then_some(coop));
        if a.protocol != ProtocolChoice::Wps {
            let result = optimize_ap(&cfg, &inp.rc.search, &inp.rc.sim).context("AP optimization")?;
            rows.push(OptRow { protocol: "ap", cooperativity: c_col, p1: r.p1, p1_tilde: pt, result });
        }
        if a.protocol != ProtocolChoice::Ap {
            let result = optimize_wps(&cfg, &inp.rc.sim, &inp.rc.wps_search).context("WPS optimization")?;
            rows.push(OptRow { protocol: "wps", cooperativity: c_col, p1: r.p1, p1_tilde: pt, result });
        }
    }
    let t = opt_table(&rows, r.kappa, base.atom.g_atc);
    let sink = Sink::new(cli.out.clone(), "optimize");
    finish(cli, &sink, &[t], Some(&inp), Some(&rows))
}

fn attenuations(inp: &Input) -> Vec<Option<f64>> {
    match &inp.preset {
        Some(p) if !p.attenuations.is_empty() => p.attenuations.iter().map(|&x| Some(x)).collect(),
        _ => vec![None],
    }
}

fn sweep(cli: &Cli, a: &crate::SweepArgs) -> Result<()> {
    let inp = require(cli)?;
    let base = setup(&inp)?;
    let lengths = if !a.lengths.is_empty() {
        a.lengths.clone()
    } else {
        inp.preset.as_ref().map(|p| p.lengths.clone()).filter(|l| !l.is_empty()).ok_or_else(|| {
            anyhow!(Error::Config("no fiber lengths: pass --lengths or a preset that has them".into()))
        })?
    };
    let xs = attenuations(&inp);
    let mut tables = Vec::new();
    let mut all = Vec::new();
    for x in &xs {
        let mut cfg = base;
        if let Some(x) = x {
            cfg.fiber.attenuation = *x;
        }
        let rows = sweep_length(&cfg, &lengths, &inp.rc.search, &inp.rc.sim)?;
        let name = match x {
            Some(x) if xs.len() > 1 => format!("sweep_{x}dBkm"),
            _ => "sweep".to_string(),
        };
        let mut t = Table::new(
            &name,
            &["L [m]", "best_F", "P1", "f_ap", "T_opt [1/kappa_cav]", "x_spl_opt", "omega_ratio_opt", "n_modes_used"],
        );
        for r in &rows {
            t.push(vec![
                num(r.length),
                num(r.best_f),
                num(r.p1),
                num(r.f_ap),
                num(r.t_opt),
                num(r.x_spl_opt),
                num(r.omega_ratio_opt),
                r.n_modes_used.to_string(),
            ]);
        }
        tables.push(t);
        all.push(json!({"attenuation_db_per_km": cfg.fiber.attenuation, "rows": rows}));
    }
    let sink = Sink::new(cli.out.clone(), "sweep-length");
    finish(cli, &sink, &tables, Some(&inp), Some(&all))
}

fn lmax(cli: &Cli, a: &crate::LmaxArgs) -> Result<()> {
    let inp = input(cli)?;
    let preset = inp.as_ref().and_then(|i| i.preset.as_ref());
    let cfg = inp.as_ref().map(setup).transpose()?;
    let pouts = if !a.pout.is_empty() {
        a.pout.clone()
    } else if let Some(p) = preset.filter(|p| !p.p_out.is_empty()) {
        p.p_out.clone()
    } else if let Some(c) = &cfg {
        vec![derive_rates(c)?.p_out]
    } else {
        bail!(Error::Config("pass --pout or a configuration".into()));
    };
    let xs = if !a.attenuation.is_empty() {
        a.attenuation.clone()
    } else if let Some(p) = preset.filter(|p| !p.attenuations.is_empty()) {
        p.attenuations.clone()
    } else if let Some(c) = &cfg {
        vec![c.fiber.attenuation]
    } else {
        vec![0.2]
    };
    let margin = a.margin.or(preset.and_then(|p| p.margin)).unwrap_or(0.0);
    let cf = cfg.map_or(DEFAULT_FIBER_SPEED, |c| c.fiber.speed_cf);
    let mut t = Table::new("lmax", &["p_out", "attenuation [dB/km]", "margin", "L_max [m]"]);
    let mut values = Vec::new();
    for &x in &xs {
        let gamma = attenuation_to_rate(x, cf)?;
        for &p in &pouts {
            let l = match l_max(p, gamma, cf, margin) {
                Ok(l) => Some(l),
                Err(Error::NoCrossing { .. }) => None,
                Err(e) => return Err(e.into()),
            };
            t.push(vec![num(p), num(x), num(margin), opt_num(l)]);
            values.push(json!({"p_out": p, "attenuation_db_per_km": x, "margin": margin, "l_max_m": l}));
        }
    }
    if values.len() == 1 && cli.out.is_none() && !cli.json {
        match values[0]["l_max_m"].as_f64() {
            Some(l) => println!("{l}"),
            None => println!("no crossing"),
        }
        return Ok(());
    }
    let sink = Sink::new(cli.out.clone(), "lmax");
    finish(cli, &sink, &[t], inp.as_ref(), Some(&values))
}

fn modes(cli: &Cli, a: &crate::ModesArgs) -> Result<()> {
    let inp = require(cli)?;
    let cfg = setup(&inp)?;
    let r = derive_rates(&cfg)?;
    let m = diagonalize_field_sector(&cfg, a.n)?;
    let analytic = (a.n == 1).then(|| analytic_three_mode_eigs(r.g_ab, r.fsr_fib));
    let mut t = Table::new(
        "modes",
        &["index", "omega [/2π Hz]", "cavity_content", "fiber_content", "decay [/2π Hz]", "omega_analytic [/2π Hz]"],
    );
    for k in 0..m.len() {
        t.push(vec![
            k.to_string(),
            num(m.frequencies[k] / TWO_PI),
            num(m.cavity_content[k]),
            num(m.fiber_content[k]),
            num(m.decay[k] / TWO_PI),
            opt_num(analytic.map(|w| w[k] / TWO_PI)),
        ]);
    }
    let summary = json!({
        "frequencies_rad_per_s": m.frequencies,
        "cavity_content": m.cavity_content,
        "decay_rad_per_s": m.decay,
        "analytic_rad_per_s": analytic,
    });
    let sink = Sink::new(cli.out.clone(), "modes");
    finish(cli, &sink, &[t], Some(&inp), Some(&summary))
}

fn timing(cli: &Cli, a: &crate::TimingArgs) -> Result<()> {
    let inp = require(cli)?;
    let base = setup(&inp)?;
    if !(a.x_points >= 2 && a.x_min < a.x_max) {
        bail!(Error::Config("need --x-points >= 2 and --x-min < --x-max".into()));
    }
    let grid: Vec<f64> =
        (0..a.x_points).map(|i| a.x_min + (a.x_max - a.x_min) * i as f64 / (a.x_points - 1) as f64).collect();
    let loss2s: Vec<Option<f64>> = match &inp.preset {
        Some(p) if !p.loss2_values.is_empty() => p.loss2_values.iter().map(|&l| Some(l * 1e-6)).collect(),
        _ => vec![None],
    };
    let xs = attenuations(&inp);
    let mut curve = Table::new("timing", &["loss2 [ppm]", "attenuation [dB/km]", "x_spl", "F"]);
    let mut summary =
        Table::new("timing_summary", &["loss2 [ppm]", "attenuation [dB/km]", "best_x", "best_F", "half_width", "bounded"]);
    let mut all = Vec::new();
    for x in &xs {
        for l2 in &loss2s {
            let mut cfg = base;
            if let Some(x) = x {
                cfg.fiber.attenuation = *x;
            }
            if let Some(l2) = l2 {
                cfg.cavity.loss2 = *l2;
            }
            let params = match (inp.rc.protocol, loss2s.len() * xs.len()) {
                (Some(ProtocolInput::Ap { t_units, x_spl, omega_ratio }), 1) => ApParams { t_units, x_spl, omega_ratio },
                _ => match optimize_ap(&cfg, &inp.rc.search, &inp.rc.sim)?.best_params {
                    BestParams::Ap(p) => p,
                    BestParams::Wps { .. } => unreachable!("AP search returns AP parameters"),
                },
            };
            let c = timing_sensitivity(&cfg, &inp.rc.sim, &params, &grid, inp.rc.search.execution)?;
            let (l2c, xc) = (num(cfg.cavity.loss2 * 1e6), num(cfg.fiber.attenuation));
            for (xs_, f) in &c.points {
                curve.push(vec![l2c.clone(), xc.clone(), num(*xs_), num(*f)]);
            }
            summary.push(vec![l2c, xc, num(c.best_x), num(c.best_f), num(c.half_width), c.bounded.to_string()]);
            all.push(json!({
                "loss2": cfg.cavity.loss2,
                "attenuation_db_per_km": cfg.fiber.attenuation,
                "params": params,
                "curve": c,
            }));
        }
    }
    let sink = Sink::new(cli.out.clone(), "timing");
    finish(cli, &sink, &[curve, summary], Some(&inp), Some(&all))
}
