//! The epistemic state: a support cloud with normalized possibility values,
//! α-cut extraction, the conjunctive (min) update, and max-min kernel
//! extension onto regenerated support points.

use nalgebra::{DMatrix, DVector};
use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum PossibilityError {
    #[error("all possibility values collapsed to zero (total evidential conflict)")]
    AllZero,
    #[error("possibility values must lie in (0, 1]")]
    OutOfRange,
    #[error("points/possibility lengths differ or cloud is empty")]
    ShapeMismatch,
}

/// `M` support points in `R^n` with possibility values in `(0, 1]`,
/// max-normalized so that at least one value is exactly 1.
///
/// Immutable; every operation returns a new cloud.
#[derive(Debug, Clone)]
pub struct SupportCloud {
    points: Vec<DVector<f64>>,
    poss: Vec<f64>,
    epoch: f64,
}

impl SupportCloud {
    /// Builds a cloud from raw values, max-normalizing them.
    pub fn new(
        points: Vec<DVector<f64>>,
        poss: Vec<f64>,
        epoch: f64,
    ) -> Result<Self, PossibilityError> {
        if points.is_empty() || points.len() != poss.len() {
            return Err(PossibilityError::ShapeMismatch);
        }
        if poss.iter().any(|&p| !(p > 0.0) || p.is_nan()) {
            return Err(PossibilityError::OutOfRange);
        }
        let mut cloud = Self { points, poss, epoch };
        cloud.normalize_in_place()?;
        Ok(cloud)
    }

    /// All-ones possibility over the given points.
    pub fn uniform(points: Vec<DVector<f64>>, epoch: f64) -> Result<Self, PossibilityError> {
        let m = points.len();
        Self::new(points, vec![1.0; m], epoch)
    }

    fn normalize_in_place(&mut self) -> Result<(), PossibilityError> {
        let max = self.poss.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
        if !(max > 0.0) {
            return Err(PossibilityError::AllZero);
        }
        for p in &mut self.poss {
            *p /= max;
        }
        Ok(())
    }

    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    pub fn dim(&self) -> usize {
        self.points[0].len()
    }

    pub fn points(&self) -> &[DVector<f64>] {
        &self.points
    }

    pub fn poss(&self) -> &[f64] {
        &self.poss
    }

    pub fn epoch(&self) -> f64 {
        self.epoch
    }

    /// Same possibilities over transformed points (used by prediction).
    pub fn with_points(&self, points: Vec<DVector<f64>>, epoch: f64) -> Result<Self, PossibilityError> {
        if points.len() != self.poss.len() {
            return Err(PossibilityError::ShapeMismatch);
        }
        Ok(Self { points, poss: self.poss.clone(), epoch })
    }

    /// Restriction to an index subset, re-normalized.
    pub fn subset(&self, indices: &[usize], poss: Vec<f64>) -> Result<Self, PossibilityError> {
        let points = indices.iter().map(|&i| self.points[i].clone()).collect();
        Self::new(points, poss, self.epoch)
    }

    /// `C_α = {i : π_i >= α}`.
    pub fn alpha_cut(&self, level: f64) -> AlphaCut {
        assert!(level > 0.0 && level <= 1.0, "alpha must lie in (0,1]");
        let member_indices = self
            .poss
            .iter()
            .enumerate()
            .filter(|(_, &p)| p >= level)
            .map(|(i, _)| i)
            .collect();
        AlphaCut { level, member_indices }
    }

    /// Conjunctive update `π̂ = min(π, comp)` followed by max-normalization.
    /// `AllZero` signals total evidential conflict; the caller escalates.
    pub fn conjunctive_update(&self, comp: &[f64]) -> Result<SupportCloud, PossibilityError> {
        if comp.len() != self.len() {
            return Err(PossibilityError::ShapeMismatch);
        }
        let unnormalized: Vec<f64> = self
            .poss
            .iter()
            .zip(comp)
            .map(|(&p, &c)| p.min(c))
            .collect();
        debug_assert!(unnormalized.iter().zip(&self.poss).all(|(u, p)| u <= p));
        let max = unnormalized.iter().cloned().fold(0.0f64, f64::max);
        if max <= 0.0 {
            return Err(PossibilityError::AllZero);
        }
        let mut out = self.clone();
        out.poss = unnormalized;
        out.normalize_in_place()?;
        Ok(out)
    }

    /// Index of the maximal possibility; ties break to the smallest index.
    pub fn anchor(&self) -> usize {
        let mut best = 0;
        for i in 1..self.len() {
            if self.poss[i] > self.poss[best] {
                best = i;
            }
        }
        best
    }
}

/// An α-cut: the level and the member indices (in input order).
#[derive(Debug, Clone, PartialEq)]
pub struct AlphaCut {
    pub level: f64,
    pub member_indices: Vec<usize>,
}

impl AlphaCut {
    pub fn len(&self) -> usize {
        self.member_indices.len()
    }

    pub fn is_empty(&self) -> bool {
        self.member_indices.is_empty()
    }
}

/// Max-min extension: `π_new = max_j min(π_j, κ(new, χ_j))`.
///
/// Returns raw values (possibly 0 when the kernel vanishes); the caller
/// applies its floor before building a cloud.
pub fn kernel_extend<K>(
    survivor_points: &[DVector<f64>],
    survivor_poss: &[f64],
    new_points: &[DVector<f64>],
    kernel: K,
) -> Vec<f64>
where
    K: Fn(&DVector<f64>, &DVector<f64>) -> f64,
{
    assert_eq!(survivor_points.len(), survivor_poss.len());
    assert!(!survivor_points.is_empty(), "survivors must be nonempty");
    new_points
        .iter()
        .map(|x| {
            survivor_points
                .iter()
                .zip(survivor_poss)
                .map(|(s, &p)| p.min(kernel(x, s)))
                .fold(0.0f64, f64::max)
        })
        .collect()
}

/// Gaussian proximity kernel `exp(-0.5 ||B^{-1}(x - x')||^2)` where `B` is a
/// whitening factor scaled by the bandwidth.
pub struct GaussianKernel {
    factor: DMatrix<f64>, // lower-triangular bandwidth * L
}

impl GaussianKernel {
    /// `whitening` is the lower-triangular factor of the survivor shape,
    /// `bandwidth` the scalar multiplier applied to it.
    pub fn new(whitening: &DMatrix<f64>, bandwidth: f64) -> Self {
        assert!(bandwidth > 0.0);
        Self { factor: whitening * bandwidth }
    }

    pub fn eval(&self, x: &DVector<f64>, y: &DVector<f64>) -> f64 {
        let d = x - y;
        let w = self
            .factor
            .solve_lower_triangular(&d)
            .expect("bandwidth factor nonsingular");
        (-0.5 * w.norm_squared()).exp()
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;
    use proptest::prelude::*;

    fn v1(x: f64) -> DVector<f64> {
        DVector::from_vec(vec![x])
    }

    fn cloud(poss: &[f64]) -> SupportCloud {
        let points = (0..poss.len()).map(|i| v1(i as f64)).collect();
        SupportCloud::new(points, poss.to_vec(), 0.0).unwrap()
    }

    #[test]
    fn alpha_cut_cases() {
        let c = cloud(&[1.0, 1.0, 1.0]);
        assert_eq!(c.alpha_cut(0.3).member_indices, vec![0, 1, 2]);

        let c = cloud(&[1.0, 0.6, 0.2]);
        assert_eq!(c.alpha_cut(0.5).member_indices, vec![0, 1]);
        assert_eq!(c.alpha_cut(1.0).member_indices, vec![0]);
    }

    #[test]
    fn conjunctive_update_identity_when_comp_dominates() {
        let c = cloud(&[1.0, 0.5]);
        let out = c.conjunctive_update(&[1.0, 0.9]).unwrap();
        assert_eq!(out.poss(), c.poss());
    }

    #[test]
    fn conjunctive_update_hand_example() {
        let c = cloud(&[1.0, 0.8]);
        let out = c.conjunctive_update(&[0.5, 0.9]).unwrap();
        // unnormalized (0.5, 0.8) -> normalized (0.625, 1.0)
        assert_relative_eq!(out.poss()[0], 0.625, epsilon = 1e-15);
        assert_relative_eq!(out.poss()[1], 1.0, epsilon = 1e-15);
    }

    #[test]
    fn conjunctive_update_all_zero_conflict() {
        let c = cloud(&[1.0, 0.8]);
        assert_eq!(c.conjunctive_update(&[0.0, 0.0]).unwrap_err(), PossibilityError::AllZero);
    }

    #[test]
    fn kernel_extend_cases() {
        let pts = vec![v1(0.0), v1(1.0)];
        let poss = vec![1.0, 0.5];
        // new point coincides with the anchor, kappa(x,x) = 1
        let got = kernel_extend(&pts, &poss, &[v1(0.0)], |x, y| {
            (-0.5 * (x - y).norm_squared()).exp()
        });
        assert_relative_eq!(got[0], 1.0, epsilon = 1e-15);

        // survivors (1, 0.5), kappa = (0.2, 1.0) -> max(min(1,0.2), min(0.5,1)) = 0.5
        let got = kernel_extend(&pts, &poss, &[v1(1.0)], |x, _y| {
            if x[0] == 1.0 {
                // caller-supplied kernel values per survivor are emulated by
                // distance: survivor 0 is far (0.2), survivor 1 matches (1.0)
                1.0
            } else {
                0.0
            }
        });
        // direct evaluation with explicit kernel values
        let got2 = {
            let kappa = [0.2, 1.0];
            let mut best = 0.0f64;
            for (j, &p) in poss.iter().enumerate() {
                best = best.max(p.min(kappa[j]));
            }
            best
        };
        assert_relative_eq!(got2, 0.5, epsilon = 1e-15);
        assert!(got[0] <= 1.0);

        // zero kernel -> zero extension (caller must floor)
        let got = kernel_extend(&pts, &poss, &[v1(5.0)], |_, _| 0.0);
        assert_eq!(got[0], 0.0);
    }

    #[test]
    fn anchor_cases() {
        assert_eq!(cloud(&[0.3, 1.0, 0.7]).anchor(), 1);
        assert_eq!(cloud(&[1.0, 1.0]).anchor(), 0);
    }

    proptest! {
        #[test]
        fn nestedness(poss in proptest::collection::vec(0.01f64..=1.0, 2..20),
                      a in 0.01f64..1.0, b in 0.01f64..1.0) {
            let c = cloud(&poss);
            let (lo, hi) = if a <= b { (a, b) } else { (b, a) };
            let cut_hi = c.alpha_cut(hi);
            let cut_lo = c.alpha_cut(lo);
            prop_assert!(cut_hi.member_indices.iter().all(|i| cut_lo.member_indices.contains(i)));
        }

        #[test]
        fn conjunctive_monotone(poss in proptest::collection::vec(0.05f64..=1.0, 1..16),
                                comp in proptest::collection::vec(0.05f64..=1.0, 1..16)) {
            let m = poss.len().min(comp.len());
            let c = cloud(&poss[..m]);
            let unnorm: Vec<f64> = c.poss().iter().zip(&comp[..m]).map(|(&p, &q)| p.min(q)).collect();
            prop_assert!(unnorm.iter().zip(c.poss()).all(|(u, p)| u <= p));
        }

        #[test]
        fn kernel_bound(poss in proptest::collection::vec(0.05f64..=1.0, 1..10),
                        kappa in proptest::collection::vec(0.0f64..=1.0, 1..10)) {
            let m = poss.len().min(kappa.len());
            let c = cloud(&poss[..m]);
            let max_surv = c.poss().iter().cloned().fold(0.0f64, f64::max);
            let got = kernel_extend(c.points(), c.poss(), &[v1(9.0)], |_, s| kappa[s[0] as usize % m]);
            prop_assert!(got[0] <= max_surv + 1e-15);
        }

        #[test]
        fn normalization_idempotent(poss in proptest::collection::vec(0.01f64..=1.0, 1..16)) {
            let c1 = cloud(&poss);
            let c2 = SupportCloud::new(c1.points().to_vec(), c1.poss().to_vec(), 0.0).unwrap();
            prop_assert_eq!(c1.poss(), c2.poss());
        }
    }
}
