//! Survey of experimental cavity parameters and their projected transfer probabilities.

use std::f64::consts::PI;

use serde::{Deserialize, Serialize};

use crate::analytics::f_ap;
use crate::error::Result;
use crate::params::{attenuation_to_rate, fiber_transmission, DEFAULT_FIBER_SPEED};

/// Reference fiber for the survey: 500 m at 0.2 dB/km.
pub const SURVEY_LENGTH: f64 = 500.0;
pub const SURVEY_ATTENUATION: f64 = 0.2;

/// One experiment as printed; rates in MHz (divided by 2π), lengths in m, probabilities in %.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SurveyRow {
    pub name: &'static str,
    pub kappa_cav_mhz: f64,
    pub gamma_cav_mhz: f64,
    pub l_eff: f64,
    pub p_out: f64,
    pub p1: f64,
    pub f_ap: f64,
}

const fn row(name: &'static str, kc: f64, gc: f64, l_eff: f64, p_out: f64, p1: f64, f: f64) -> SurveyRow {
    SurveyRow { name, kappa_cav_mhz: kc, gamma_cav_mhz: gc, l_eff, p_out, p1, f_ap: f }
}

pub const SURVEY: [SurveyRow; 10] = [
    row("Mainz", 4.77, 31.5, 1.74, 13.2, 1.7, 42.1),
    row("Innsbruck", 0.02, 0.08, 636.0, 15.8, 2.4, 45.9),
    row("Paris", 19.2, 88.4, 0.6, 17.8, 3.1, 48.5),
    row("Bonn K", 14.0, 29.5, 1.27, 32.3, 10.2, 61.3),
    row("Caltech", 38.2, 43.0, 0.8, 47.1, 21.6, 69.9),
    row("MPQ1", 2.12, 1.67, 15.9, 56.0, 30.6, 74.1),
    row("Bonn M", 32.2, 16.9, 1.3, 65.6, 41.1, 78.3),
    row("Aarhus", 3.03, 1.22, 15.2, 71.3, 49.6, 80.6),
    row("Sussex", 0.45, 0.07, 135.0, 87.0, 73.9, 87.6),
    row("MPQ2", 4.52, 0.5, 12.7, 90.2, 79.5, 89.3),
];

/// Values recomputed from the printed rates and P_out, in the same units as `SurveyRow`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SurveyRecomputed {
    pub name: &'static str,
    pub l_eff: f64,
    /// P_out from κ_cav/(κ_cav + γ_cav), for comparison with the printed column.
    pub p_out_from_rates: f64,
    pub p1: f64,
    pub f_ap: f64,
}

impl SurveyRecomputed {
    pub fn p1_delta(&self, printed: &SurveyRow) -> f64 {
        self.p1 - printed.p1
    }

    pub fn f_ap_delta(&self, printed: &SurveyRow) -> f64 {
        self.f_ap - printed.f_ap
    }
}

/// Recomputes L_eff, P₁ and F_AP for one row. P₁ and F_AP use the printed P_out.
pub fn recompute(row: &SurveyRow) -> Result<SurveyRecomputed> {
    let cf = DEFAULT_FIBER_SPEED;
    let gamma_fib = attenuation_to_rate(SURVEY_ATTENUATION, cf)?;
    let p_fib = fiber_transmission(gamma_fib, SURVEY_LENGTH, cf);
    let p = row.p_out / 100.0;
    let kappa = PI * 1e6 * (row.kappa_cav_mhz + row.gamma_cav_mhz);
    Ok(SurveyRecomputed {
        name: row.name,
        l_eff: cf / kappa,
        p_out_from_rates: 100.0 * row.kappa_cav_mhz / (row.kappa_cav_mhz + row.gamma_cav_mhz),
        p1: 100.0 * p * p * p_fib,
        f_ap: 100.0 * f_ap(p, gamma_fib, SURVEY_LENGTH, cf)?,
    })
}

pub fn recompute_all() -> Result<Vec<SurveyRecomputed>> {
    SURVEY.iter().map(recompute).collect()
}
