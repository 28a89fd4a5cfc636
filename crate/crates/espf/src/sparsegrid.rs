//! Sparse-grid node generation and support regeneration (the dilation step).
//!
//! The 1D rule is a nested symmetric family with sizes 1, 3, 5 across levels
//! (abscissas 0, ±1, ±1/√2 in Clenshaw-Curtis spacing on [-1, 1]); the
//! multi-dimensional node set is the standard union of small tensor products
//! over multi-indices with bounded level sum. Nested 1D rules make the
//! level-2 set a subset of the level-3 set, and level 2 at dimension n has
//! exactly 2n+1 nodes.

use nalgebra::DVector;
use thiserror::Error;

use crate::geometry::{self, Ellipsoid, VfiBounds};
use crate::possibility::{kernel_extend, GaussianKernel, PossibilityError, SupportCloud};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum GridError {
    #[error("unsupported grid level {0} (supported: 2, 3)")]
    UnsupportedLevel(u8),
    #[error("survivor set is empty")]
    EmptySurvivors,
    #[error(transparent)]
    Possibility(#[from] PossibilityError),
}

/// Sparse grid specification; the 1D rule is fixed (nested, sizes 1/3/5).
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GridSpec {
    pub dimension: usize,
    pub level: u8,
}

const AXIS_SHORT: f64 = std::f64::consts::FRAC_1_SQRT_2;

/// Deterministic unit-scale node list. Level 2: origin + axis nodes at ±1
/// (2n+1 nodes). Level 3 adds axis nodes at ±1/√2 and the (±1, ±1) pair
/// combinations (2n² + 2n + 1 nodes in total).
pub fn generate_nodes(spec: GridSpec) -> Result<Vec<DVector<f64>>, GridError> {
    let n = spec.dimension;
    assert!(n >= 1, "dimension must be at least 1");
    let mut nodes: Vec<DVector<f64>> = Vec::new();
    nodes.push(DVector::zeros(n));
    match spec.level {
        2 => {
            push_axis_nodes(&mut nodes, n, 1.0);
        }
        3 => {
            push_axis_nodes(&mut nodes, n, 1.0);
            push_axis_nodes(&mut nodes, n, AXIS_SHORT);
            for i in 0..n {
                for j in (i + 1)..n {
                    for &a in &[1.0, -1.0] {
                        for &b in &[1.0, -1.0] {
                            let mut v = DVector::zeros(n);
                            v[i] = a;
                            v[j] = b;
                            nodes.push(v);
                        }
                    }
                }
            }
        }
        other => return Err(GridError::UnsupportedLevel(other)),
    }
    Ok(nodes)
}

fn push_axis_nodes(nodes: &mut Vec<DVector<f64>>, n: usize, scale: f64) {
    for i in 0..n {
        for &s in &[scale, -scale] {
            let mut v = DVector::zeros(n);
            v[i] = s;
            nodes.push(v);
        }
    }
}

/// Node count for a given spec without materializing the list.
pub fn node_count(spec: GridSpec) -> Result<usize, GridError> {
    let n = spec.dimension;
    match spec.level {
        2 => Ok(2 * n + 1),
        3 => Ok(2 * n * n + 2 * n + 1),
        other => Err(GridError::UnsupportedLevel(other)),
    }
}

/// Survivor ellipsoid used for regeneration: MVEE when the survivors span,
/// otherwise a scatter-matrix fallback; either way inflated to the VFI floor.
pub fn survivor_ellipsoid(
    survivor_points: &[DVector<f64>],
    vfi: &VfiBounds,
    mvee_tol: f64,
) -> Result<Ellipsoid, GridError> {
    if survivor_points.is_empty() {
        return Err(GridError::EmptySurvivors);
    }
    let n = survivor_points[0].len();
    let base = match geometry::mvee(survivor_points, mvee_tol) {
        Ok(res) => res.ellipsoid,
        Err(_) => {
            // degenerate span: center + n * scatter, then the floor below
            // restores full rank
            let m = survivor_points.len() as f64;
            let mut center = DVector::zeros(n);
            for p in survivor_points {
                center.axpy(1.0 / m, p, 1.0);
            }
            let mut scatter = nalgebra::DMatrix::<f64>::zeros(n, n);
            for p in survivor_points {
                let d = p - &center;
                scatter.ger(n as f64 / m, &d, &d, 1.0);
            }
            for i in 0..n {
                scatter[(i, i)] += vfi.eps_min;
            }
            Ellipsoid::new(center, scatter).map_err(|_| GridError::EmptySurvivors)?
        }
    };
    Ok(base.inflated_to_floor(vfi.eps_min))
}

/// Regenerates the support on the grid scaled to the survivor ellipsoid:
/// `new points = center + σ · L · nodes`. New possibilities come from the
/// max-min kernel extension with a Gaussian kernel at bandwidth
/// `kernel_sharpness · σ · L`, floored at 1e-12, then normalized.
#[allow(clippy::too_many_arguments)]
pub fn regenerate(
    survivors: &SupportCloud,
    spec: GridSpec,
    sigma: f64,
    kernel_sharpness: f64,
    vfi: &VfiBounds,
    mvee_tol: f64,
    epoch: f64,
) -> Result<SupportCloud, GridError> {
    assert!(sigma > 0.0 && kernel_sharpness > 0.0);
    let ell = survivor_ellipsoid(survivors.points(), vfi, mvee_tol)?;
    let l = ell.whitening();
    let nodes = generate_nodes(spec)?;
    let new_points: Vec<DVector<f64>> = nodes
        .iter()
        .map(|u| ell.center() + &l * u * sigma)
        .collect();
    let kernel = GaussianKernel::new(&l, kernel_sharpness * sigma);
    let raw = kernel_extend(survivors.points(), survivors.poss(), &new_points, |x, y| {
        kernel.eval(x, y)
    });
    let floored: Vec<f64> = raw.iter().map(|&p| p.max(1e-12)).collect();
    Ok(SupportCloud::new(new_points, floored, epoch)?)
}
