//! Possibilistic entropy: the α-cut volume profile, the integral
//! `H_π = ∫ log V_α dα`, its support/gradient decomposition, the Hölder mean
//! family over the cut volumes, and the closed-form Gaussian-geometry value.
//!
//! A level is *degenerate* when its cut holds fewer than `2n+1` points (or
//! fails to span); degenerate levels enter every functional here at a
//! configurable floor volume instead of `-inf`, so that per-step entropies
//! stay finite and comparable. All Hölder orders are evaluated over the same
//! floored family, which preserves the `M_{-inf} <= M_0 <= M_{+inf}`
//! ordering exactly.

use nalgebra::DMatrix;
use thiserror::Error;

use crate::geometry::{self, mvee_with_init, GeometryError};
use crate::possibility::SupportCloud;

/// Default floor for `log V` on degenerate levels, in nats.
pub const DEGENERATE_LOG_VOLUME_FLOOR: f64 = -30.0;

/// Euler-Mascheroni constant.
pub const EULER_GAMMA: f64 = 0.577_215_664_901_532_9;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum EntropyError {
    #[error("every level of the profile is degenerate")]
    AllDegenerate,
    #[error("profile is malformed: {0}")]
    Malformed(&'static str),
    #[error(transparent)]
    Geometry(#[from] GeometryError),
}

/// Log cut volumes on an ascending α-grid. Degenerate levels carry the
/// floor value in `log_volumes` and are flagged.
#[derive(Debug, Clone)]
pub struct CutVolumeProfile {
    levels: Vec<f64>,
    log_volumes: Vec<f64>,
    degenerate: Vec<bool>,
    floor: f64,
}

impl CutVolumeProfile {
    /// Assembles a profile from parts (synthetic profiles in tests use this).
    pub fn from_parts(
        levels: Vec<f64>,
        log_volumes: Vec<f64>,
        degenerate: Vec<bool>,
        floor: f64,
    ) -> Result<Self, EntropyError> {
        if levels.is_empty() || levels.len() != log_volumes.len() || levels.len() != degenerate.len()
        {
            return Err(EntropyError::Malformed("length mismatch or empty"));
        }
        if levels.windows(2).any(|w| w[0] >= w[1]) {
            return Err(EntropyError::Malformed("levels must be strictly ascending"));
        }
        if levels[0] <= 0.0 || *levels.last().unwrap() > 1.0 {
            return Err(EntropyError::Malformed("levels must lie in (0,1]"));
        }
        Ok(Self { levels, log_volumes, degenerate, floor })
    }

    pub fn levels(&self) -> &[f64] {
        &self.levels
    }

    pub fn log_volumes(&self) -> &[f64] {
        &self.log_volumes
    }

    pub fn degenerate_mask(&self) -> &[bool] {
        &self.degenerate
    }

    pub fn floor(&self) -> f64 {
        self.floor
    }

    pub fn all_degenerate(&self) -> bool {
        self.degenerate.iter().all(|&d| d)
    }

    /// Log volume at the smallest grid level (the α→0⁺ limit).
    pub fn outer_log_volume(&self) -> f64 {
        self.log_volumes[0]
    }
}

/// MVEE log volume per α-level over a uniform grid of `n_levels` levels on
/// `(0,1]`. Cuts below `2n+1` members (or without affine span) are flagged
/// degenerate and floored. Warm-starts each cut's solver from the previous
/// (nested) cut.
pub fn cut_volume_profile(
    cloud: &SupportCloud,
    n_levels: usize,
    mvee_tol: f64,
) -> CutVolumeProfile {
    cut_volume_profile_with_floor(cloud, n_levels, mvee_tol, DEGENERATE_LOG_VOLUME_FLOOR)
}

pub fn cut_volume_profile_with_floor(
    cloud: &SupportCloud,
    n_levels: usize,
    mvee_tol: f64,
    floor: f64,
) -> CutVolumeProfile {
    assert!(n_levels >= 8, "need at least 8 levels");
    let n = cloud.dim();
    let m = cloud.len();
    let levels: Vec<f64> = (1..=n_levels).map(|j| j as f64 / n_levels as f64).collect();

    // order points by descending possibility so nested cuts are prefixes
    let mut order: Vec<usize> = (0..m).collect();
    order.sort_by(|&a, &b| {
        cloud.poss()[b]
            .partial_cmp(&cloud.poss()[a])
            .unwrap()
            .then(a.cmp(&b))
    });
    let sorted_points: Vec<_> = order.iter().map(|&i| cloud.points()[i].clone()).collect();
    let sorted_poss: Vec<f64> = order.iter().map(|&i| cloud.poss()[i]).collect();

    let mut log_volumes = vec![floor; n_levels];
    let mut degenerate = vec![true; n_levels];
    let mut warm: Option<Vec<f64>> = None;
    let mut prev_count = usize::MAX;
    let mut prev_value: Option<(f64, bool)> = None;

    // walk from the innermost (highest α) cut outward, growing the prefix
    for idx in (0..n_levels).rev() {
        let alpha = levels[idx];
        let count = sorted_poss.partition_point(|&p| p >= alpha);
        if count == prev_count {
            if let Some((lv, deg)) = prev_value {
                log_volumes[idx] = lv;
                degenerate[idx] = deg;
                continue;
            }
        }
        prev_count = count;
        if count < 2 * n + 1 {
            prev_value = Some((floor, true));
            log_volumes[idx] = floor;
            degenerate[idx] = true;
            continue;
        }
        let pts = &sorted_points[..count];
        match mvee_with_init(pts, mvee_tol, warm.as_deref()) {
            Ok(res) => {
                let lv = res.ellipsoid.log_volume();
                warm = Some(res.weights);
                prev_value = Some((lv, false));
                log_volumes[idx] = lv;
                degenerate[idx] = false;
            }
            Err(_) => {
                prev_value = Some((floor, true));
                log_volumes[idx] = floor;
                degenerate[idx] = true;
            }
        }
    }

    CutVolumeProfile { levels, log_volumes, degenerate, floor }
}

/// Integrates `f(log V_α)` over α: a left-constant rectangle on `(0, α_1]`
/// plus the trapezoid rule across the grid.
fn integrate<F>(profile: &CutVolumeProfile, f: F) -> f64
where
    F: Fn(f64) -> f64,
{
    let lv = &profile.log_volumes;
    let a = &profile.levels;
    let mut total = f(lv[0]) * a[0];
    for j in 1..lv.len() {
        total += (a[j] - a[j - 1]) * 0.5 * (f(lv[j]) + f(lv[j - 1]));
    }
    total
}

/// `H_π = ∫ log V_α dα` in nats; degenerate levels contribute the floor.
pub fn h_pi(profile: &CutVolumeProfile) -> Result<f64, EntropyError> {
    if profile.all_degenerate() {
        return Err(EntropyError::AllDegenerate);
    }
    Ok(integrate(profile, |lv| lv))
}

/// Hölder order: `p ∈ [-inf, +inf]` with `p = 0` the geometric mean (= `H_π`).
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum HolderOrder {
    NegInfinity,
    Finite(f64),
    PosInfinity,
}

/// `log M_p` of the cut-volume family, evaluated over the floored family so
/// the ordering in `p` is exact. `Finite(0.0)` returns `h_pi`.
pub fn holder_mean(profile: &CutVolumeProfile, p: HolderOrder) -> Result<f64, EntropyError> {
    if profile.all_degenerate() {
        return Err(EntropyError::AllDegenerate);
    }
    match p {
        HolderOrder::Finite(p) if p == 0.0 => h_pi(profile),
        HolderOrder::Finite(p) => {
            // (1/p) log ∫ V^p dα, evaluated in log space for stability
            let shift = profile
                .log_volumes
                .iter()
                .map(|&lv| p * lv)
                .fold(f64::NEG_INFINITY, f64::max);
            let integral = integrate(profile, |lv| (p * lv - shift).exp());
            Ok((shift + integral.ln()) / p)
        }
        HolderOrder::PosInfinity => Ok(profile
            .log_volumes
            .iter()
            .cloned()
            .fold(f64::NEG_INFINITY, f64::max)),
        HolderOrder::NegInfinity => Ok(profile
            .log_volumes
            .iter()
            .cloned()
            .fold(f64::INFINITY, f64::min)),
    }
}

/// `H_π` split into the support term (outermost log volume) and the
/// non-positive gradient term.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EntropyDecomposition {
    pub support_entropy: f64,
    pub gradient_entropy: f64,
    pub total: f64,
}

pub fn decompose(profile: &CutVolumeProfile) -> Result<EntropyDecomposition, EntropyError> {
    if profile.degenerate[0] {
        return Err(EntropyError::Malformed("outermost level is degenerate"));
    }
    let total = h_pi(profile)?;
    let support_entropy = profile.outer_log_volume();
    Ok(EntropyDecomposition {
        support_entropy,
        gradient_entropy: total - support_entropy,
        total,
    })
}

/// Closed-form `H_π` under Gaussian α-cut geometry:
/// `0.5 log det Σ + (n/2)(log 2 - γ) + log c_n`.
pub fn gaussian_h_pi(cov: &DMatrix<f64>) -> Result<f64, GeometryError> {
    let n = cov.nrows();
    if n == 0 || cov.ncols() != n {
        return Err(GeometryError::NotPositiveDefinite);
    }
    let l = geometry::whitening_factor(cov)?;
    let log_det = 2.0 * l.diagonal().iter().map(|v| v.ln()).sum::<f64>();
    Ok(0.5 * log_det
        + n as f64 / 2.0 * (2.0f64.ln() - EULER_GAMMA)
        + geometry::unit_ball_log_volume(n))
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;
    use nalgebra::DVector;
    use rand::prelude::*;
    use rand_chacha::ChaCha8Rng;

    const TOL: f64 = 1e-7;

    fn vec2(x: f64, y: f64) -> DVector<f64> {
        DVector::from_vec(vec![x, y])
    }

    /// Five inner points at possibility 1 plus five hull points at a lower tier.
    fn two_tier_cloud(outer_poss: f64) -> SupportCloud {
        let mut pts = vec![
            vec2(0.0, 0.0),
            vec2(0.5, 0.0),
            vec2(-0.5, 0.0),
            vec2(0.0, 0.5),
            vec2(0.0, -0.5),
        ];
        let mut poss = vec![1.0; 5];
        for p in [vec2(1.0, 1.0), vec2(1.0, -1.0), vec2(-1.0, 1.0), vec2(-1.0, -1.0), vec2(1.2, 0.0)] {
            pts.push(p);
            poss.push(outer_poss);
        }
        SupportCloud::new(pts, poss, 0.0).unwrap()
    }

    fn two_level_profile() -> CutVolumeProfile {
        // V = 2 for α <= 0.5, V = 1 above
        let levels: Vec<f64> = (1..=64).map(|j| j as f64 / 64.0).collect();
        let lv: Vec<f64> = levels
            .iter()
            .map(|&a| if a <= 0.5 { 2.0f64.ln() } else { 0.0 })
            .collect();
        let deg = vec![false; 64];
        CutVolumeProfile::from_parts(levels, lv, deg, DEGENERATE_LOG_VOLUME_FLOOR).unwrap()
    }

    #[test]
    fn uniform_cloud_profile_constant_and_h_equals_log_volume() {
        let pts = vec![
            vec2(1.0, 1.0),
            vec2(1.0, -1.0),
            vec2(-1.0, 1.0),
            vec2(-1.0, -1.0),
            vec2(0.0, 0.0),
        ];
        let cloud = SupportCloud::uniform(pts.clone(), 0.0).unwrap();
        let profile = cut_volume_profile(&cloud, 64, TOL);
        assert!(!profile.all_degenerate());
        let first = profile.log_volumes()[0];
        assert!(profile.log_volumes().iter().all(|&lv| (lv - first).abs() < 1e-12));
        let expect = crate::geometry::mvee(&pts, TOL).unwrap().ellipsoid.log_volume();
        assert_relative_eq!(h_pi(&profile).unwrap(), expect, max_relative = 1e-6);
    }

    #[test]
    fn profile_drops_when_hull_point_demoted() {
        let full = two_tier_cloud(1.0);
        let tiered = two_tier_cloud(0.5);
        let pf = cut_volume_profile(&full, 64, TOL);
        let pt = cut_volume_profile(&tiered, 64, TOL);
        // above α = 0.5 the tiered profile excludes the hull points
        let hi_idx = 40; // α ≈ 0.64
        assert!(pt.log_volumes()[hi_idx] < pf.log_volumes()[hi_idx] - 0.1);
        // and H_π strictly decreases (monotone concentration)
        assert!(h_pi(&pt).unwrap() < h_pi(&pf).unwrap() - 0.05);
    }

    #[test]
    fn profile_of_2n_points_fully_degenerate() {
        let pts = vec![vec2(1.0, 0.0), vec2(-1.0, 0.0), vec2(0.0, 1.0), vec2(0.0, -1.0)];
        let cloud = SupportCloud::uniform(pts, 0.0).unwrap();
        let profile = cut_volume_profile(&cloud, 64, TOL);
        assert!(profile.all_degenerate());
        assert_eq!(h_pi(&profile).unwrap_err(), EntropyError::AllDegenerate);
    }

    #[test]
    fn two_level_closed_form() {
        let p = two_level_profile();
        // H = 0.5 log 2; grid sampling of the step function biases by at most
        // half a cell at the jump
        let h = h_pi(&p).unwrap();
        assert_relative_eq!(h, 0.5 * 2.0f64.ln(), epsilon = 2.0f64.ln() / 64.0);
        assert_relative_eq!(
            holder_mean(&p, HolderOrder::PosInfinity).unwrap(),
            2.0f64.ln(),
            epsilon = 1e-12
        );
        assert_relative_eq!(holder_mean(&p, HolderOrder::NegInfinity).unwrap(), 0.0, epsilon = 1e-12);
        assert_relative_eq!(
            holder_mean(&p, HolderOrder::Finite(0.0)).unwrap(),
            0.5 * 2.0f64.ln(),
            epsilon = 2.0f64.ln() / 64.0
        );
    }

    #[test]
    fn holder_constant_profile_is_flat_in_p() {
        let levels: Vec<f64> = (1..=64).map(|j| j as f64 / 64.0).collect();
        let lv = vec![1.7f64; 64];
        let p =
            CutVolumeProfile::from_parts(levels, lv, vec![false; 64], DEGENERATE_LOG_VOLUME_FLOOR)
                .unwrap();
        for order in [
            HolderOrder::NegInfinity,
            HolderOrder::Finite(-3.0),
            HolderOrder::Finite(0.0),
            HolderOrder::Finite(2.5),
            HolderOrder::PosInfinity,
        ] {
            assert_relative_eq!(holder_mean(&p, order).unwrap(), 1.7, epsilon = 1e-9);
        }
    }

    #[test]
    fn holder_ordering_random_profiles() {
        let mut rng = ChaCha8Rng::seed_from_u64(17);
        for _ in 0..50 {
            let levels: Vec<f64> = (1..=32).map(|j| j as f64 / 32.0).collect();
            let mut lv: Vec<f64> = (0..32).map(|_| rng.gen::<f64>() * 4.0 - 2.0).collect();
            lv.sort_by(|a, b| b.partial_cmp(a).unwrap()); // non-increasing in α
            let p = CutVolumeProfile::from_parts(
                levels,
                lv.clone(),
                vec![false; 32],
                DEGENERATE_LOG_VOLUME_FLOOR,
            )
            .unwrap();
            let lo = holder_mean(&p, HolderOrder::NegInfinity).unwrap();
            let mid = holder_mean(&p, HolderOrder::Finite(0.0)).unwrap();
            let hi = holder_mean(&p, HolderOrder::PosInfinity).unwrap();
            assert!(lo <= mid + 1e-9 && mid <= hi + 1e-9);
            let spread = lv.first().unwrap() - lv.last().unwrap();
            if spread > 1e-6 {
                assert!(lo < mid - 1e-9 && mid < hi - 1e-9, "strict for non-constant");
            }
            // monotone in p
            let p1 = holder_mean(&p, HolderOrder::Finite(-2.0)).unwrap();
            let p2 = holder_mean(&p, HolderOrder::Finite(1.0)).unwrap();
            assert!(p1 <= mid + 1e-9 && mid <= p2 + 1e-9);
        }
    }

    #[test]
    fn decompose_uniform_gradient_zero() {
        let pts = vec![
            vec2(1.0, 1.0),
            vec2(1.0, -1.0),
            vec2(-1.0, 1.0),
            vec2(-1.0, -1.0),
            vec2(0.3, 0.0),
        ];
        let cloud = SupportCloud::uniform(pts, 0.0).unwrap();
        let profile = cut_volume_profile(&cloud, 64, TOL);
        let d = decompose(&profile).unwrap();
        assert!(d.gradient_entropy.abs() < 1e-9);
        assert_relative_eq!(d.total, d.support_entropy + d.gradient_entropy, epsilon = 1e-12);
    }

    #[test]
    fn decompose_tiered_gradient_negative() {
        let profile = cut_volume_profile(&two_tier_cloud(0.5), 64, TOL);
        let d = decompose(&profile).unwrap();
        assert!(d.gradient_entropy < -0.05);
        assert_relative_eq!(d.total, d.support_entropy + d.gradient_entropy, epsilon = 1e-12);
    }

    #[test]
    fn gaussian_h_pi_known_value() {
        // n = 1, Σ = 1: 0.5(log 2 - γ) + log 2 ≈ 0.7511
        let cov = DMatrix::from_element(1, 1, 1.0);
        let h = gaussian_h_pi(&cov).unwrap();
        let expect = 0.5 * (2.0f64.ln() - EULER_GAMMA) + 2.0f64.ln();
        assert_relative_eq!(h, expect, epsilon = 1e-12);
        assert_relative_eq!(h, 0.7511, max_relative = 1e-4);
    }

    #[test]
    fn gaussian_h_pi_scaling() {
        let cov = DMatrix::<f64>::identity(3, 3);
        let h1 = gaussian_h_pi(&cov).unwrap();
        let h2 = gaussian_h_pi(&(cov * 4.0)).unwrap();
        assert_relative_eq!(h2 - h1, 1.5 * 4.0f64.ln(), epsilon = 1e-12);
    }

    #[test]
    fn gaussian_h_pi_rejects_non_spd() {
        let m = DMatrix::from_row_slice(2, 2, &[1.0, 3.0, 3.0, 1.0]);
        assert!(gaussian_h_pi(&m).is_err());
    }

    /// Monotone concentration, cross-checked against an independent
    /// exact-piecewise oracle.
    #[test]
    fn monotone_concentration_vs_exact_oracle() {
        let mut rng = ChaCha8Rng::seed_from_u64(99);
        for _ in 0..20 {
            let m = 12;
            let pts: Vec<DVector<f64>> = (0..m)
                .map(|_| DVector::from_fn(2, |_, _| rng.gen::<f64>() * 2.0 - 1.0))
                .collect();
            let mut poss: Vec<f64> = (0..m).map(|_| 0.3 + 0.7 * rng.gen::<f64>()).collect();
            poss[0] = 1.0;
            let cloud = SupportCloud::new(pts.clone(), poss.clone(), 0.0).unwrap();
            // demote an MVEE-active point
            let res = crate::geometry::mvee(&pts, TOL).unwrap();
            let active = (1..m)
                .find(|&i| res.ellipsoid.containment(&pts[i]) >= 1.0 - 1e-6 && poss[i] > 0.4)
                .unwrap_or(1);
            let mut poss2 = poss.clone();
            poss2[active] *= 0.5;
            let cloud2 = SupportCloud::new(pts.clone(), poss2, 0.0).unwrap();

            let h1 = exact_h(&cloud);
            let h2 = exact_h(&cloud2);
            assert!(h2 <= h1 + 1e-9, "exact oracle: {h2} vs {h1}");

            let g1 = h_pi(&cut_volume_profile(&cloud, 128, TOL)).unwrap();
            let g2 = h_pi(&cut_volume_profile(&cloud2, 128, TOL)).unwrap();
            assert!(g2 <= g1 + 0.05, "grid path: {g2} vs {g1}");
        }
    }

    /// Exact piecewise evaluation over the distinct possibility values —
    /// independent of the grid/trapezoid implementation path.
    fn exact_h(cloud: &SupportCloud) -> f64 {
        let n = cloud.dim();
        let mut vals: Vec<f64> = cloud.poss().to_vec();
        vals.sort_by(|a, b| a.partial_cmp(b).unwrap());
        vals.dedup();
        let mut h = 0.0;
        let mut prev = 0.0;
        for &v in &vals {
            let members: Vec<DVector<f64>> = cloud
                .points()
                .iter()
                .zip(cloud.poss())
                .filter(|(_, &p)| p >= v)
                .map(|(x, _)| x.clone())
                .collect();
            let lv = if members.len() < 2 * n + 1 {
                DEGENERATE_LOG_VOLUME_FLOOR
            } else {
                match crate::geometry::mvee(&members, TOL) {
                    Ok(r) => r.ellipsoid.log_volume(),
                    Err(_) => DEGENERATE_LOG_VOLUME_FLOOR,
                }
            };
            h += (v - prev) * lv;
            prev = v;
        }
        h
    }
}
