use nalgebra::DVector;
use serde::Serialize;

use super::{distance, norm, VectorField};
use crate::error::{Error, Result};

const MAX_ITERATIONS: usize = 100;
const RESIDUAL_TOL: f64 = 1e-10;
const DEDUP_TOL: f64 = 1e-8;
const DAMPING: f64 = 0.5;
const MAX_HALVINGS: usize = 40;

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct EquilibriumPoint {
    pub state: Vec<f64>,
    /// `|P(x*)|`.
    pub residual: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SeedOutcome {
    pub seed: Vec<f64>,
    pub converged: bool,
    pub iterations: usize,
    pub final_state: Vec<f64>,
    pub final_residual: f64,
}

/// Deduplicated equilibria plus the fate of every seed.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct EquilibriumReport {
    pub points: Vec<EquilibriumPoint>,
    pub seeds: Vec<SeedOutcome>,
}

/// Damped Newton iteration from each seed.
///
/// A full Newton step is halved while it increases `|P|`. Seeds that do not
/// reach `|P| <= 1e-10` within 100 iterations are reported as not converged.
pub fn find_equilibria(field: &VectorField, seeds: &[Vec<f64>]) -> Result<EquilibriumReport> {
    if seeds.is_empty() {
        return Err(Error::InvalidArgument("at least one seed is required".into()));
    }
    let mut points: Vec<EquilibriumPoint> = Vec::new();
    let mut outcomes = Vec::with_capacity(seeds.len());
    for seed in seeds {
        let outcome = newton(field, seed)?;
        if outcome.converged
            && !points
                .iter()
                .any(|p| distance(&p.state, &outcome.final_state) < DEDUP_TOL)
        {
            points.push(EquilibriumPoint {
                state: outcome.final_state.clone(),
                residual: outcome.final_residual,
            });
        }
        outcomes.push(outcome);
    }
    Ok(EquilibriumReport {
        points,
        seeds: outcomes,
    })
}

fn newton(field: &VectorField, seed: &[f64]) -> Result<SeedOutcome> {
    let n = field.dim();
    let mut x = seed.to_vec();
    let mut r = field.eval(&x)?;
    let mut r_norm = norm(&r);
    let mut iterations = 0;
    while r_norm > RESIDUAL_TOL && iterations < MAX_ITERATIONS && r_norm.is_finite() {
        iterations += 1;
        let jac = field.jacobian(&x)?;
        let rhs = DVector::from_iterator(n, r.iter().map(|v| -v));
        let Some(step) = jac.lu().solve(&rhs) else {
            break;
        };
        let mut scale = 1.0;
        let mut accepted = None;
        for _ in 0..MAX_HALVINGS {
            let trial: Vec<f64> = x.iter().zip(step.iter()).map(|(a, d)| a + scale * d).collect();
            let tr = field.eval_raw(&trial);
            let tn = norm(&tr);
            if tn < r_norm {
                accepted = Some((trial, tr, tn));
                break;
            }
            scale *= DAMPING;
        }
        let Some((nx, nr, nn)) = accepted else {
            break;
        };
        x = nx;
        r = nr;
        r_norm = nn;
    }
    Ok(SeedOutcome {
        seed: seed.to_vec(),
        converged: r_norm <= RESIDUAL_TOL,
        iterations,
        final_state: x,
        final_residual: r_norm,
    })
}
