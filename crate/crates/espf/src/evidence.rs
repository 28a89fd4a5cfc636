//! Innovation geometry and evidence scoring: whitened squared innovations,
//! compatibility, the sup-min surprisal aggregate, information content, the
//! entropy-rate floor it implies, and the innovation-state isotropy
//! diagnostic.

use nalgebra::{DMatrix, DVector};
use rand::Rng;
use rand_chacha::rand_core::SeedableRng;
use rand_chacha::ChaCha8Rng;
use thiserror::Error;

use crate::geometry::{self, Ellipsoid, GeometryError};
use crate::possibility::SupportCloud;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum EvidenceError {
    #[error("sensor imprecision matrix must be SPD")]
    SensorNotPositiveDefinite,
    #[error(transparent)]
    Geometry(#[from] GeometryError),
    #[error("length mismatch between q and possibility vectors")]
    ShapeMismatch,
}

/// Innovation shape `Π_e` and its whitening factor, plus the predicted
/// measurements it was formed from.
#[derive(Debug, Clone)]
pub struct InnovationContext {
    pub predicted: Vec<DVector<f64>>,
    pub shape: DMatrix<f64>,
    pub whitening: DMatrix<f64>,
    /// True when the predicted spread was degenerate and `Π_e` fell back to
    /// the sensor imprecision alone.
    pub degenerate_spread: bool,
}

/// `Π_e = Π_h + Π_y` where `Π_h` is the MVEE shape of the predicted
/// measurement cloud. A degenerate predicted spread falls back to
/// `Π_e = Π_y` and is flagged.
pub fn innovation_shape(
    predicted: Vec<DVector<f64>>,
    sensor_imprecision: &DMatrix<f64>,
    mvee_tol: f64,
) -> Result<InnovationContext, EvidenceError> {
    let m_dim = sensor_imprecision.nrows();
    if geometry::whitening_factor(sensor_imprecision).is_err() {
        return Err(EvidenceError::SensorNotPositiveDefinite);
    }
    debug_assert!(predicted.iter().all(|p| p.len() == m_dim));
    let (shape, degenerate_spread) = match geometry::mvee(&predicted, mvee_tol) {
        Ok(res) => (res.ellipsoid.shape() + sensor_imprecision, false),
        Err(_) => (sensor_imprecision.clone(), true),
    };
    let whitening = geometry::whitening_factor(&shape)?;
    Ok(InnovationContext { predicted, shape, whitening, degenerate_spread })
}

/// Per-hypothesis whitened squared innovations and compatibilities together
/// with their aggregates.
#[derive(Debug, Clone)]
pub struct EvidenceScores {
    pub q: Vec<f64>,
    pub comp: Vec<f64>,
    pub surprisal: f64,
    pub info: f64,
}

/// `q_i = ||L_e^{-1}(y - h(χ_i))||²` and `comp_i = exp(-q_i/2)`.
pub fn whitened_q(ctx: &InnovationContext, y: &DVector<f64>) -> (Vec<f64>, Vec<f64>) {
    let q: Vec<f64> = ctx
        .predicted
        .iter()
        .map(|h| {
            let d = y - h;
            let w = ctx
                .whitening
                .solve_lower_triangular(&d)
                .expect("whitening factor nonsingular");
            w.norm_squared()
        })
        .collect();
    let comp = q.iter().map(|&qi| (-0.5 * qi).exp()).collect();
    (q, comp)
}

/// Sup-min aggregation of per-hypothesis surprisal `q/2` against the prior
/// possibility as capacity: `S̄ = sup_i min(q_i/2, π_i)`.
pub fn choquet_surprisal(q: &[f64], prior_poss: &[f64]) -> f64 {
    assert_eq!(q.len(), prior_poss.len());
    q.iter()
        .zip(prior_poss)
        .map(|(&qi, &pi)| (0.5 * qi).min(pi))
        .fold(0.0f64, f64::max)
}

/// `I = 1 - exp(-S̄) ∈ [0, 1)`; capped strictly below 1 so downstream
/// floors stay finite when the exponential underflows.
pub fn info_content(surprisal: f64) -> f64 {
    debug_assert!(surprisal >= 0.0);
    (1.0 - (-surprisal).exp()).min(1.0 - f64::EPSILON)
}

/// Scores for a prior cloud against a measurement.
pub fn evidence_scores(
    ctx: &InnovationContext,
    y: &DVector<f64>,
    prior: &SupportCloud,
) -> Result<EvidenceScores, EvidenceError> {
    let (q, comp) = whitened_q(ctx, y);
    if q.len() != prior.len() {
        return Err(EvidenceError::ShapeMismatch);
    }
    let surprisal = choquet_surprisal(&q, prior.poss());
    let info = info_content(surprisal);
    Ok(EvidenceScores { q, comp, surprisal, info })
}

/// Post-update entropy floor: `h_pre + (n/2) log(1 - I)`.
pub fn pcrb_floor(h_pre: f64, info: f64, n: usize) -> f64 {
    h_pre + n as f64 / 2.0 * (1.0 - info).ln()
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct IsotropyReport {
    /// `Var ||L_e^{-1}(h(x̄) - h(x))||² / Var ||L_core^{-1}(x - x̄)||²`
    pub ratio: f64,
    pub holds: bool,
}

/// Monte-Carlo check of the innovation-state isotropy condition over uniform
/// samples in `core`: the innovation-side variance must not exceed the
/// state-side variance (threshold ratio <= 1). Rejection sampling inside the
/// ellipsoid with an explicit seed keeps this deterministic.
pub fn isotropy_check<H>(
    ctx: &InnovationContext,
    h: H,
    core: &Ellipsoid,
    samples: usize,
    seed: u64,
) -> IsotropyReport
where
    H: Fn(&DVector<f64>) -> DVector<f64>,
{
    assert!(samples >= 100, "need at least 100 samples");
    let n = core.dim();
    let l_core = core.whitening();
    let center = core.center();
    let y_ref = h(center);
    let mut rng = ChaCha8Rng::seed_from_u64(seed);

    let mut inn = Vec::with_capacity(samples);
    let mut sta = Vec::with_capacity(samples);
    let mut drawn = 0usize;
    let mut guard = 0usize;
    while drawn < samples {
        guard += 1;
        if guard > samples * 10_000 {
            break; // pathological acceptance rate; report what we have
        }
        let z = DVector::from_fn(n, |_, _| rng.gen::<f64>() * 2.0 - 1.0);
        if z.norm_squared() > 1.0 {
            continue;
        }
        drawn += 1;
        let x = center + &l_core * &z;
        let d_inn = &y_ref - h(&x);
        let w_inn = ctx
            .whitening
            .solve_lower_triangular(&d_inn)
            .expect("whitening factor nonsingular");
        inn.push(w_inn.norm_squared());
        sta.push(z.norm_squared()); // ||L_core^{-1}(x - x̄)||² by construction
    }
    let var = |v: &[f64]| {
        let mean = v.iter().sum::<f64>() / v.len() as f64;
        v.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / v.len() as f64
    };
    let ratio = var(&inn) / var(&sta).max(f64::MIN_POSITIVE);
    IsotropyReport { ratio, holds: ratio <= 1.0 }
}
