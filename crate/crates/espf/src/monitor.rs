//! Epistemic width monitor: per-step diagnostics and regime classification.
//!
//! The `necessity`, `w_ep`, and `alpha_c` columns are implementation-defined
//! surrogates (the reference experiment names the quantities without
//! formulas); output metadata flags them as such.

use thiserror::Error;

use crate::entropy::CutVolumeProfile;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum MonitorError {
    #[error("need at least two non-degenerate levels for a slope fit")]
    InsufficientLevels,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Regime {
    Contraction,
    Diffusion,
}

impl Regime {
    pub fn as_str(&self) -> &'static str {
        match self {
            Regime::Contraction => "contraction",
            Regime::Diffusion => "diffusion",
        }
    }
}

/// Strict threshold at zero; the boundary value 0 classifies as diffusion.
pub fn regime_flag(log_det: f64) -> Regime {
    assert!(log_det.is_finite(), "regime statistic must be finite");
    if log_det < 0.0 {
        Regime::Contraction
    } else {
        Regime::Diffusion
    }
}

/// Possibilistic necessity of the anchor singleton: `1 - (second-highest π)`.
pub fn necessity(poss: &[f64]) -> f64 {
    assert!(poss.len() >= 2, "necessity needs at least two hypotheses");
    let mut top = f64::NEG_INFINITY;
    let mut second = f64::NEG_INFINITY;
    for &p in poss {
        if p > top {
            second = top;
            top = p;
        } else if p > second {
            second = p;
        }
    }
    1.0 - second
}

/// Per-dimension geometric-mean width relative to a reference volume:
/// `exp((h_pi - reference) / n)`.
pub fn epistemic_width(h_pi: f64, reference_log_volume: f64, n: usize) -> f64 {
    ((h_pi - reference_log_volume) / n as f64).exp()
}

/// Least-squares slope of `log V_α` against `log(1/α)` over non-degenerate
/// levels: a scaling exponent for the cut-volume decay.
pub fn holder_exponent(profile: &CutVolumeProfile) -> Result<f64, MonitorError> {
    let mut xs = Vec::new();
    let mut ys = Vec::new();
    for ((&a, &lv), &deg) in profile
        .levels()
        .iter()
        .zip(profile.log_volumes())
        .zip(profile.degenerate_mask())
    {
        if !deg {
            xs.push((1.0 / a).ln());
            ys.push(lv);
        }
    }
    if xs.len() < 2 {
        return Err(MonitorError::InsufficientLevels);
    }
    let n = xs.len() as f64;
    let mx = xs.iter().sum::<f64>() / n;
    let my = ys.iter().sum::<f64>() / n;
    let mut sxx = 0.0;
    let mut sxy = 0.0;
    for (x, y) in xs.iter().zip(&ys) {
        sxx += (x - mx) * (x - mx);
        sxy += (x - mx) * (y - my);
    }
    if sxx <= 0.0 {
        return Err(MonitorError::InsufficientLevels);
    }
    Ok(sxy / sxx)
}

/// One diagnostic row per measurement epoch.
#[derive(Debug, Clone, PartialEq)]
pub struct EwmRecord {
    pub step: usize,
    pub t_days: f64,
    pub log_det_mvee: f64,
    pub regime: Regime,
    pub h_pi: f64,
    pub w_ep: f64,
    pub prune_count: usize,
    pub sigma_k: f64,
    pub necessity: f64,
    pub surprisal: f64,
    pub info: f64,
    pub alpha_c: f64,
    pub n_target: usize,
    pub pcrb_floor: f64,
    pub pcrb_satisfied: bool,
}

/// Inputs assembled into one [`EwmRecord`].
#[derive(Debug, Clone)]
pub struct StepDiagnostics {
    pub step: usize,
    pub t_days: f64,
    pub log_det_mvee: f64,
    pub h_pi_post: f64,
    pub w_ep: f64,
    pub prune_count: usize,
    pub sigma_k: f64,
    pub necessity: f64,
    pub surprisal: f64,
    pub info: f64,
    pub alpha_c: f64,
    pub n_target: usize,
    pub pcrb_floor: f64,
    pub pcrb_slack: f64,
}

pub fn assemble_record(d: StepDiagnostics) -> EwmRecord {
    EwmRecord {
        step: d.step,
        t_days: d.t_days,
        log_det_mvee: d.log_det_mvee,
        regime: regime_flag(d.log_det_mvee),
        h_pi: d.h_pi_post,
        w_ep: d.w_ep,
        prune_count: d.prune_count,
        sigma_k: d.sigma_k,
        necessity: d.necessity,
        surprisal: d.surprisal,
        info: d.info,
        alpha_c: d.alpha_c,
        n_target: d.n_target,
        pcrb_floor: d.pcrb_floor,
        pcrb_satisfied: d.h_pi_post >= d.pcrb_floor - d.pcrb_slack,
    }
}

/// Columns whose formulas are implementation-defined surrogates.
pub const SURROGATE_COLUMNS: &[&str] = &["necessity", "w_ep", "alpha_c"];
