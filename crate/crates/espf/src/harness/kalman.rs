//! Linear Kalman filter used as the Gaussian-limit oracle.

use nalgebra::{DMatrix, DVector};
use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum KalmanError {
    #[error("innovation covariance is singular")]
    SingularInnovation,
    #[error("dimension mismatch")]
    DimensionMismatch,
}

#[derive(Debug, Clone)]
pub struct KalmanFilter {
    pub x: DVector<f64>,
    pub p: DMatrix<f64>,
}

impl KalmanFilter {
    pub fn new(x: DVector<f64>, p: DMatrix<f64>) -> Self {
        Self { x, p }
    }

    /// Predict with `x' = F x`, `P' = F P Fᵀ + Q`.
    pub fn predict(&mut self, f: &DMatrix<f64>, q: &DMatrix<f64>) {
        self.x = f * &self.x;
        self.p = f * &self.p * f.transpose() + q;
    }

    /// Measurement update; returns the innovation and its covariance.
    pub fn update(
        &mut self,
        h: &DMatrix<f64>,
        r: &DMatrix<f64>,
        y: &DVector<f64>,
    ) -> Result<(DVector<f64>, DMatrix<f64>), KalmanError> {
        if h.ncols() != self.x.len() || y.len() != h.nrows() {
            return Err(KalmanError::DimensionMismatch);
        }
        let innovation = y - h * &self.x;
        let s = h * &self.p * h.transpose() + r;
        let s_inv = s.clone().try_inverse().ok_or(KalmanError::SingularInnovation)?;
        let k = &self.p * h.transpose() * &s_inv;
        self.x = &self.x + &k * &innovation;
        let n = self.x.len();
        let i_kh = DMatrix::<f64>::identity(n, n) - &k * h;
        // Joseph form keeps P symmetric positive semidefinite
        self.p = &i_kh * &self.p * i_kh.transpose() + &k * r * k.transpose();
        Ok((innovation, s))
    }

    /// One predict + update cycle.
    pub fn step(
        &mut self,
        f: &DMatrix<f64>,
        h: &DMatrix<f64>,
        q: &DMatrix<f64>,
        r: &DMatrix<f64>,
        y: &DVector<f64>,
    ) -> Result<(DVector<f64>, DMatrix<f64>), KalmanError> {
        self.predict(f, q);
        self.update(h, r, y)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;
    use rand::prelude::*;
    use rand_chacha::ChaCha8Rng;
    use rand_distr::StandardNormal;

    #[test]
    fn perfect_measurement_limit() {
        let mut kf = KalmanFilter::new(DVector::zeros(2), DMatrix::identity(2, 2) * 100.0);
        let h = DMatrix::identity(2, 2);
        let r = DMatrix::identity(2, 2) * 1e-12;
        let y = DVector::from_vec(vec![3.0, -1.5]);
        kf.update(&h, &r, &y).unwrap();
        assert!((kf.x[0] - 3.0).abs() < 1e-6);
        assert!((kf.x[1] + 1.5).abs() < 1e-6);
    }

    #[test]
    fn scalar_textbook_identity() {
        // prior variance 1, measurement variance 1 -> posterior variance 0.5
        let mut kf = KalmanFilter::new(DVector::zeros(1), DMatrix::identity(1, 1));
        let h = DMatrix::identity(1, 1);
        let r = DMatrix::identity(1, 1);
        kf.update(&h, &r, &DVector::from_vec(vec![1.0])).unwrap();
        assert_relative_eq!(kf.p[(0, 0)], 0.5, epsilon = 1e-12);
        assert_relative_eq!(kf.x[0], 0.5, epsilon = 1e-12);
    }

    #[test]
    fn det_p_non_increasing_across_update() {
        let mut rng = ChaCha8Rng::seed_from_u64(21);
        let mut kf = KalmanFilter::new(DVector::zeros(2), DMatrix::identity(2, 2) * 4.0);
        let h = DMatrix::from_row_slice(1, 2, &[1.0, 0.0]);
        let r = DMatrix::identity(1, 1) * 0.25;
        for _ in 0..20 {
            let det_before = kf.p.determinant();
            let y = DVector::from_vec(vec![rng.gen::<f64>()]);
            kf.update(&h, &r, &y).unwrap();
            assert!(kf.p.determinant() <= det_before + 1e-12);
        }
    }

    #[test]
    fn innovation_whiteness_constant_velocity() {
        let dt = 1.0;
        let f = DMatrix::from_row_slice(2, 2, &[1.0, dt, 0.0, 1.0]);
        let h = DMatrix::from_row_slice(1, 2, &[1.0, 0.0]);
        let q = DMatrix::from_row_slice(2, 2, &[1e-4, 0.0, 0.0, 1e-4]);
        let r = DMatrix::identity(1, 1) * 0.04;
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let mut truth = DVector::from_vec(vec![0.0, 0.3]);
        let mut kf = KalmanFilter::new(DVector::zeros(2), DMatrix::identity(2, 2));
        let mut normalized = Vec::new();
        for _ in 0..100 {
            truth = &f * &truth;
            let noise: f64 = StandardNormal.sample(&mut rng);
            let y = DVector::from_vec(vec![truth[0] + 0.2 * noise]);
            let (innov, s) = kf.step(&f, &h, &q, &r, &y).unwrap();
            normalized.push(innov[0] / s[(0, 0)].sqrt());
        }
        // skip the transient, then lag-1 autocorrelation should be small
        let v = &normalized[20..];
        let mean = v.iter().sum::<f64>() / v.len() as f64;
        let var = v.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / v.len() as f64;
        let mut acf = 0.0;
        for i in 1..v.len() {
            acf += (v[i] - mean) * (v[i - 1] - mean);
        }
        acf /= (v.len() - 1) as f64 * var;
        assert!(acf.abs() < 0.2, "lag-1 autocorrelation {acf}");
    }

    #[test]
    fn singular_innovation_detected() {
        let mut kf = KalmanFilter::new(DVector::zeros(1), DMatrix::zeros(1, 1));
        let h = DMatrix::identity(1, 1);
        let r = DMatrix::zeros(1, 1);
        assert_eq!(
            kf.update(&h, &r, &DVector::zeros(1)).unwrap_err(),
            KalmanError::SingularInnovation
        );
    }
}
