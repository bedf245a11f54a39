use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use super::mlp::{fd_jacobians, shifted_inputs, Mlp};
use crate::dynamics::VectorField;
use crate::error::{Error, Result};

/// Batch means of the unit-manifold and orthogonality addends.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LossBreakdown {
    /// Mean of `(<∇ŷ_i, P> - 1)^2`, one per output.
    pub unit_terms: Vec<f64>,
    /// Mean of `<∇ŷ_i, ∇ŷ_j>^2` for `i < j`, in lexicographic order.
    pub orth_terms: Vec<f64>,
    pub total: f64,
}

impl LossBreakdown {
    pub fn unit_sum(&self) -> f64 {
        self.unit_terms.iter().sum()
    }

    pub fn orth_sum(&self) -> f64 {
        self.orth_terms.iter().sum()
    }

    pub fn is_finite(&self) -> bool {
        self.total.is_finite()
    }
}

fn pairs(k: usize) -> impl Iterator<Item = (usize, usize)> {
    (0..k).flat_map(move |i| (i + 1..k).map(move |j| (i, j)))
}

fn check_args(model: &Mlp, field: &VectorField, batch: &[Vec<f64>], orth_weight: f64, fd_step: f64) -> Result<()> {
    if batch.is_empty() {
        return Err(Error::InvalidArgument("loss needs a nonempty batch".into()));
    }
    if model.input_dim() != field.dim() {
        return Err(Error::DimensionMismatch {
            expected: field.dim(),
            got: model.input_dim(),
        });
    }
    if !(orth_weight >= 0.0 && orth_weight.is_finite()) {
        return Err(Error::InvalidArgument(format!("orthogonality weight {orth_weight} must be >= 0")));
    }
    if !(fd_step > 0.0 && fd_step.is_finite()) {
        return Err(Error::InvalidArgument(format!("finite-difference step {fd_step} must be positive")));
    }
    if let Some(x) = batch.iter().find(|x| x.len() != field.dim()) {
        return Err(Error::DimensionMismatch {
            expected: field.dim(),
            got: x.len(),
        });
    }
    Ok(())
}

struct Evaluation {
    breakdown: LossBreakdown,
    /// `dL/d out` at every shifted input, when requested.
    d_out: Option<DMatrix<f64>>,
}

fn evaluate(
    model: &Mlp,
    field: &VectorField,
    batch: &[Vec<f64>],
    orth_weight: f64,
    h: f64,
    want_grad: bool,
) -> Result<(Evaluation, Option<super::mlp::ForwardCache>)> {
    check_args(model, field, batch, orth_weight, h)?;
    let n = field.dim();
    let k = model.output_dim();
    let b = batch.len() as f64;
    let velocities = batch.iter().map(|x| field.eval(x)).collect::<Result<Vec<_>>>()?;
    let cache = model.forward_cached(shifted_inputs(batch, h));
    let jacs = fd_jacobians(cache.output(), n, h);

    let pair_list: Vec<(usize, usize)> = pairs(k).collect();
    let mut unit = vec![0.0; k];
    let mut orth = vec![0.0; pair_list.len()];
    let mut d_out = want_grad.then(|| DMatrix::zeros(k, cache.output().ncols()));
    for (s, (g, p)) in jacs.iter().zip(&velocities).enumerate() {
        let u: Vec<f64> = (0..k).map(|i| (0..n).map(|j| g[(i, j)] * p[j]).sum::<f64>() - 1.0).collect();
        let c: Vec<f64> = pair_list
            .iter()
            .map(|&(i, m)| (0..n).map(|j| g[(i, j)] * g[(m, j)]).sum())
            .collect();
        for i in 0..k {
            unit[i] += u[i] * u[i];
        }
        for (q, cq) in c.iter().enumerate() {
            orth[q] += cq * cq;
        }
        if let Some(d) = d_out.as_mut() {
            // dL/dG, then through G = (out+ - out-) / 2h.
            let mut dg = DMatrix::zeros(k, n);
            for i in 0..k {
                for j in 0..n {
                    dg[(i, j)] = 2.0 * u[i] * p[j] / b;
                }
            }
            for (q, &(i, m)) in pair_list.iter().enumerate() {
                let scale = 2.0 * orth_weight * c[q] / b;
                for j in 0..n {
                    dg[(i, j)] += scale * g[(m, j)];
                    dg[(m, j)] += scale * g[(i, j)];
                }
            }
            for i in 0..k {
                for j in 0..n {
                    let base = s * 2 * n + 2 * j;
                    d[(i, base)] = dg[(i, j)] / (2.0 * h);
                    d[(i, base + 1)] = -dg[(i, j)] / (2.0 * h);
                }
            }
        }
    }
    for v in unit.iter_mut().chain(orth.iter_mut()) {
        *v /= b;
    }
    let total = unit.iter().sum::<f64>() + orth_weight * orth.iter().sum::<f64>();
    Ok((
        Evaluation {
            breakdown: LossBreakdown {
                unit_terms: unit,
                orth_terms: orth,
                total,
            },
            d_out,
        },
        want_grad.then_some(cache),
    ))
}

/// `Σ_i mean (<∇ŷ_i, P> - 1)^2 + orth_weight Σ_{i<j} mean <∇ŷ_i, ∇ŷ_j>^2`,
/// with input gradients taken by central differences of step `fd_step`.
pub fn loss(
    model: &Mlp,
    field: &VectorField,
    batch: &[Vec<f64>],
    orth_weight: f64,
    fd_step: f64,
) -> Result<LossBreakdown> {
    Ok(evaluate(model, field, batch, orth_weight, fd_step, false)?.0.breakdown)
}

/// The loss together with its exact gradient in parameter space.
pub fn loss_and_gradient(
    model: &Mlp,
    field: &VectorField,
    batch: &[Vec<f64>],
    orth_weight: f64,
    fd_step: f64,
) -> Result<(LossBreakdown, Vec<f64>)> {
    let (eval, cache) = evaluate(model, field, batch, orth_weight, fd_step, true)?;
    let grad = model.backward(
        &cache.expect("requested"),
        eval.d_out.expect("requested"),
    );
    Ok((eval.breakdown, grad))
}
