//! Ellipsoid and whitening primitives.
//!
//! The central object is the minimum-volume enclosing ellipsoid (MVEE) of a
//! finite point cloud, parameterized as `{x : (x-c)^T Π^{-1} (x-c) <= 1}`
//! with `Π` symmetric positive-definite. The solver is a Khachiyan-style
//! barycentric coordinate ascent on the lifted moment matrix, with
//! Wolfe-Atwood away/drop steps so that tight tolerances converge in a
//! number of iterations that does not blow up as 1/tol.

use nalgebra::{Cholesky, DMatrix, DVector};
use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum GeometryError {
    /// The points do not affinely span the ambient space (or the cloud is
    /// below the cardinality floor where that is required).
    #[error("degenerate cloud: points do not affinely span the space")]
    DegenerateCloud,
    #[error("matrix is not positive definite")]
    NotPositiveDefinite,
    #[error("mvee did not converge (containment excess {achieved:.3e})")]
    NoConvergence { achieved: f64 },
    #[error("empty input")]
    EmptyInput,
}

/// Center + SPD shape matrix; the set `{x : (x-c)^T Π^{-1} (x-c) <= 1}`.
#[derive(Debug, Clone)]
pub struct Ellipsoid {
    center: DVector<f64>,
    shape: DMatrix<f64>,
}

impl Ellipsoid {
    /// Validates symmetry (1e-12 relative) and positive definiteness.
    pub fn new(center: DVector<f64>, shape: DMatrix<f64>) -> Result<Self, GeometryError> {
        let n = center.len();
        if shape.nrows() != n || shape.ncols() != n || n == 0 {
            return Err(GeometryError::NotPositiveDefinite);
        }
        let scale = shape.amax().max(f64::MIN_POSITIVE);
        for i in 0..n {
            for j in (i + 1)..n {
                if (shape[(i, j)] - shape[(j, i)]).abs() > 1e-12 * scale {
                    return Err(GeometryError::NotPositiveDefinite);
                }
            }
        }
        // symmetrize exactly so downstream factorizations are stable
        let shape = (&shape + shape.transpose()) * 0.5;
        if Cholesky::new(shape.clone()).is_none() {
            return Err(GeometryError::NotPositiveDefinite);
        }
        Ok(Self { center, shape })
    }

    pub fn dim(&self) -> usize {
        self.center.len()
    }

    pub fn center(&self) -> &DVector<f64> {
        &self.center
    }

    pub fn shape(&self) -> &DMatrix<f64> {
        &self.shape
    }

    /// `(x-c)^T Π^{-1} (x-c)`; 1 on the boundary.
    pub fn containment(&self, x: &DVector<f64>) -> f64 {
        let chol = Cholesky::new(self.shape.clone()).expect("shape validated SPD");
        let d = x - &self.center;
        let w = chol.l_dirty().solve_lower_triangular(&d).expect("nonsingular");
        w.norm_squared()
    }

    pub fn log_det_shape(&self) -> f64 {
        let chol = Cholesky::new(self.shape.clone()).expect("shape validated SPD");
        2.0 * chol.l_dirty().diagonal().iter().map(|v| v.ln()).sum::<f64>()
    }

    /// `log(c_n) + 0.5 log det Π` in nats.
    pub fn log_volume(&self) -> f64 {
        unit_ball_log_volume(self.dim()) + 0.5 * self.log_det_shape()
    }

    /// Lower-triangular `L` with `Π = L L^T`.
    pub fn whitening(&self) -> DMatrix<f64> {
        Cholesky::new(self.shape.clone()).expect("shape validated SPD").unpack()
    }

    /// `(λ_min, λ_max)` of the shape matrix.
    pub fn eigenvalue_extremes(&self) -> (f64, f64) {
        let eig = self.shape.clone().symmetric_eigen();
        let mut lo = f64::INFINITY;
        let mut hi = f64::NEG_INFINITY;
        for &v in eig.eigenvalues.iter() {
            lo = lo.min(v);
            hi = hi.max(v);
        }
        (lo, hi)
    }

    /// Isotropic inflation so that `λ_min >= floor`; identity when already above.
    pub fn inflated_to_floor(&self, floor: f64) -> Ellipsoid {
        let (lo, _) = self.eigenvalue_extremes();
        if lo >= floor {
            return self.clone();
        }
        let mut shape = self.shape.clone();
        for i in 0..self.dim() {
            shape[(i, i)] += floor - lo;
        }
        Ellipsoid { center: self.center.clone(), shape }
    }
}

/// Log-volume of the unit ball in `R^n`: `log(π^{n/2} / Γ(n/2 + 1))`.
pub fn unit_ball_log_volume(n: usize) -> f64 {
    let nh = n as f64 / 2.0;
    nh * std::f64::consts::PI.ln() - statrs::function::gamma::ln_gamma(nh + 1.0)
}

/// Eigenvalue floor/ceiling on a support shape matrix.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct VfiBounds {
    pub eps_min: f64,
    pub lambda_max: f64,
}

impl VfiBounds {
    pub fn new(eps_min: f64, lambda_max: f64) -> Result<Self, GeometryError> {
        if !(eps_min > 0.0 && eps_min < lambda_max) {
            return Err(GeometryError::NotPositiveDefinite);
        }
        Ok(Self { eps_min, lambda_max })
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum VfiStatus {
    Ok,
    BelowFloor(f64),
    AboveCeiling(f64),
}

/// Compares eigenvalue extremes against the bounds. Pure query.
pub fn check_vfi(e: &Ellipsoid, b: &VfiBounds) -> VfiStatus {
    let (lo, hi) = e.eigenvalue_extremes();
    if lo < b.eps_min {
        VfiStatus::BelowFloor(lo)
    } else if hi > b.lambda_max {
        VfiStatus::AboveCeiling(hi)
    } else {
        VfiStatus::Ok
    }
}

/// MVEE solver output: the ellipsoid plus the barycentric weights that
/// certify it (support points are exactly those with positive weight).
#[derive(Debug, Clone)]
pub struct MveeResult {
    pub ellipsoid: Ellipsoid,
    pub weights: Vec<f64>,
    pub iterations: usize,
}

const MVEE_MAX_ITER: usize = 200_000;

/// Minimum-volume enclosing ellipsoid of `points` to relative containment
/// tolerance `tolerance` (every point satisfies containment <= 1 + tolerance,
/// support points >= 1 - tolerance). Deterministic for a fixed input order.
pub fn mvee(points: &[DVector<f64>], tolerance: f64) -> Result<MveeResult, GeometryError> {
    mvee_with_init(points, tolerance, None)
}

/// As [`mvee`], optionally warm-started from a previous weight vector
/// (shorter than `points` is allowed; the tail starts at zero). Nested-cut
/// profiles reuse the inner cut's certificate this way.
pub fn mvee_with_init(
    points: &[DVector<f64>],
    tolerance: f64,
    init: Option<&[f64]>,
) -> Result<MveeResult, GeometryError> {
    let m = points.len();
    if m == 0 {
        return Err(GeometryError::EmptyInput);
    }
    let n = points[0].len();
    let d = n + 1;
    if m < d {
        return Err(GeometryError::DegenerateCloud);
    }
    debug_assert!(points.iter().all(|p| p.len() == n));
    assert!(tolerance > 0.0, "mvee tolerance must be positive");

    // lifted points q_i = [p_i; 1], stored as columns
    let mut lifted = DMatrix::<f64>::zeros(d, m);
    for (i, p) in points.iter().enumerate() {
        for r in 0..n {
            lifted[(r, i)] = p[r];
        }
        lifted[(n, i)] = 1.0;
    }

    let mut u = vec![1.0 / m as f64; m];
    if let Some(w) = init {
        let s: f64 = w.iter().take(m).filter(|v| v.is_finite() && **v > 0.0).sum();
        if s > 0.0 {
            // keep a fraction of uniform mass so new points can enter
            let blend = 0.9;
            for (i, ui) in u.iter_mut().enumerate() {
                let wi = if i < w.len() && w[i] > 0.0 { w[i] / s } else { 0.0 };
                *ui = blend * wi + (1.0 - blend) / m as f64;
            }
        }
    }

    let eps = tolerance * n as f64 / d as f64;
    let upper = d as f64 * (1.0 + eps);
    let lower = d as f64 * (1.0 - eps);
    let mut kappa = vec![0.0f64; m];
    let mut iterations = 0;
    let mut achieved = f64::INFINITY;

    for it in 0..MVEE_MAX_ITER {
        iterations = it;
        // X = sum_i u_i q_i q_i^T
        let mut x = DMatrix::<f64>::zeros(d, d);
        for i in 0..m {
            if u[i] == 0.0 {
                continue;
            }
            let q = lifted.column(i);
            x.ger(u[i], &q, &q, 1.0);
        }
        let chol = match Cholesky::new(x) {
            Some(c) => c,
            None => return Err(GeometryError::DegenerateCloud),
        };
        let solved = chol
            .l_dirty()
            .solve_lower_triangular(&lifted)
            .ok_or(GeometryError::DegenerateCloud)?;
        let mut j_add = 0usize;
        let mut k_add = f64::NEG_INFINITY;
        let mut j_away = usize::MAX;
        let mut k_away = f64::INFINITY;
        for i in 0..m {
            let k = solved.column(i).norm_squared();
            kappa[i] = k;
            if k > k_add {
                k_add = k;
                j_add = i;
            }
            if u[i] > 0.0 && k < k_away {
                k_away = k;
                j_away = i;
            }
        }
        achieved = (k_add - d as f64) / n as f64;
        if k_add <= upper && k_away >= lower {
            break;
        }
        if k_add - d as f64 >= d as f64 - k_away {
            // Frank-Wolfe add step toward the worst-contained point
            let beta = (k_add - d as f64) / (d as f64 * (k_add - 1.0));
            for ui in u.iter_mut() {
                *ui *= 1.0 - beta;
            }
            u[j_add] += beta;
        } else {
            // away step from the most interior support point
            let uj = u[j_away];
            let beta_max = uj / (1.0 - uj);
            let beta = if k_away > 1.0 + 1e-15 {
                ((d as f64 - k_away) / (d as f64 * (k_away - 1.0))).min(beta_max)
            } else {
                beta_max
            };
            for ui in u.iter_mut() {
                *ui *= 1.0 + beta;
            }
            u[j_away] -= beta;
            if beta >= beta_max * (1.0 - 1e-12) {
                u[j_away] = 0.0; // drop step
            }
            u[j_away] = u[j_away].max(0.0);
        }
        if it + 1 == MVEE_MAX_ITER {
            return Err(GeometryError::NoConvergence { achieved });
        }
    }
    let _ = achieved;

    // c = P u, S = P diag(u) P^T - c c^T, Π = n S
    let mut center = DVector::<f64>::zeros(n);
    for i in 0..m {
        if u[i] > 0.0 {
            center.axpy(u[i], &points[i], 1.0);
        }
    }
    let mut s = DMatrix::<f64>::zeros(n, n);
    for i in 0..m {
        if u[i] > 0.0 {
            s.ger(u[i], &points[i], &points[i], 1.0);
        }
    }
    s.ger(-1.0, &center, &center, 1.0);
    let shape = s * n as f64;
    let ellipsoid = Ellipsoid::new(center, shape).map_err(|_| GeometryError::DegenerateCloud)?;
    Ok(MveeResult { ellipsoid, weights: u, iterations })
}

/// `log(c_n) + 0.5 log det Π` of an ellipsoid, in nats.
pub fn log_volume(e: &Ellipsoid) -> f64 {
    e.log_volume()
}

/// `log det Π` of the MVEE of `points` — the regime statistic.
///
/// Clouds below the `2n+1` cardinality floor report [`GeometryError::DegenerateCloud`];
/// the caller owns the zero-volume convention.
pub fn log_det_mvee(points: &[DVector<f64>], tolerance: f64) -> Result<f64, GeometryError> {
    if points.is_empty() {
        return Err(GeometryError::EmptyInput);
    }
    let n = points[0].len();
    if points.len() < 2 * n + 1 {
        return Err(GeometryError::DegenerateCloud);
    }
    Ok(mvee(points, tolerance)?.ellipsoid.log_det_shape())
}

/// Lower-triangular Cholesky factor `L` of an SPD matrix, `m = L L^T`.
pub fn whitening_factor(m: &DMatrix<f64>) -> Result<DMatrix<f64>, GeometryError> {
    if m.nrows() != m.ncols() || m.nrows() == 0 {
        return Err(GeometryError::NotPositiveDefinite);
    }
    let sym = (m + m.transpose()) * 0.5;
    Cholesky::new(sym)
        .map(|c| c.unpack())
        .ok_or(GeometryError::NotPositiveDefinite)
}
