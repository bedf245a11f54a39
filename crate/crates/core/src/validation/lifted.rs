use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use crate::dynamics::{BuiltinSystem, BRUNTON_LAMBDA, BRUNTON_MU};
use crate::error::{Error, Result};
use crate::timemaps::{brunton_eigenfunctions, kef_pde_residual, DEFAULT_SVD_TOL};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LiftedPoint {
    pub point: Vec<f64>,
    /// Rank of the 3x2 Jacobian of `(x1, x2, x1^2)`.
    pub jacobian_rank: usize,
    pub singular_values: Vec<f64>,
    /// Rank of the 3x3 Gram matrix of the three lift gradients.
    pub gram_rank: usize,
    /// `∇y1` and `∇y3` are parallel.
    pub y1_y3_dependent: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LiftedRankReport {
    pub mu: f64,
    pub lambda: f64,
    pub points: Vec<LiftedPoint>,
    pub max_jacobian_rank: usize,
    pub max_gram_rank: usize,
    /// Largest `|∇φ2 · P - λ φ2|` over the points.
    pub phi2_pde_residual: f64,
    /// Largest `|d/dt lift(x) - A lift(x)|` against the lifted linear system.
    pub lift_consistency: f64,
}

fn numeric_rank(m: &DMatrix<f64>, tol: f64) -> (usize, Vec<f64>) {
    let mut sv: Vec<f64> = m.clone().svd(false, false).singular_values.iter().copied().collect();
    sv.sort_by(|a, b| b.total_cmp(a));
    let largest = sv.first().copied().unwrap_or(0.0);
    let rank = sv.iter().filter(|&&s| largest > 0.0 && s > tol * largest).count();
    (rank, sv)
}

/// Rank of the lift `(y1, y2, y3) = (x1, x2, x1^2)` of the Brunton system.
///
/// Three observables of a planar state carry at most two independent
/// gradients; `y1` and `y3` are functionally dependent.
pub fn lifted_rank_demo(points: &[Vec<f64>]) -> Result<LiftedRankReport> {
    if points.len() < 3 {
        return Err(Error::InvalidArgument("need at least three points".into()));
    }
    for (i, p) in points.iter().enumerate() {
        if p.len() != 2 {
            return Err(Error::DimensionMismatch { expected: 2, got: p.len() });
        }
        if p[0] == 0.0 {
            return Err(Error::InvalidArgument(format!("point {p:?} has x1 = 0")));
        }
        if points[..i].contains(p) {
            return Err(Error::InvalidArgument(format!("point {p:?} repeated")));
        }
    }
    let field = BuiltinSystem::Brunton.field();
    let lifted = BuiltinSystem::brunton_lifted();
    let mut out = Vec::with_capacity(points.len());
    let mut consistency: f64 = 0.0;
    for x in points {
        let jac = DMatrix::from_row_slice(3, 2, &[1.0, 0.0, 0.0, 1.0, 2.0 * x[0], 0.0]);
        let (jacobian_rank, singular_values) = numeric_rank(&jac, DEFAULT_SVD_TOL);
        let gram = &jac * jac.transpose();
        let (gram_rank, _) = numeric_rank(&gram, DEFAULT_SVD_TOL);
        let cross = jac[(0, 0)] * jac[(2, 1)] - jac[(0, 1)] * jac[(2, 0)];
        let scale = jac.row(0).norm() * jac.row(2).norm();
        let p = field.eval(x)?;
        let lift = nalgebra::DVector::from_vec(vec![x[0], x[1], x[0] * x[0]]);
        let drift = &jac * nalgebra::DVector::from_vec(p);
        consistency = consistency.max((drift - lifted.matrix() * lift).amax());
        out.push(LiftedPoint {
            point: x.clone(),
            jacobian_rank,
            singular_values,
            gram_rank,
            y1_y3_dependent: cross.abs() <= DEFAULT_SVD_TOL * scale,
        });
    }
    let [_, phi2] = brunton_eigenfunctions();
    let phi2_pde_residual = kef_pde_residual(&phi2, &field, points)?.into_iter().fold(0.0, f64::max);
    Ok(LiftedRankReport {
        mu: BRUNTON_MU,
        lambda: BRUNTON_LAMBDA,
        max_jacobian_rank: out.iter().map(|p| p.jacobian_rank).max().unwrap_or(0),
        max_gram_rank: out.iter().map(|p| p.gram_rank).max().unwrap_or(0),
        points: out,
        phi2_pde_residual,
        lift_consistency: consistency,
    })
}
