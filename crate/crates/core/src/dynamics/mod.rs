//! Vector fields `dx/dt = P(x)`, orbit integration, equilibria and the
//! built-in example systems.

mod equilibria;
mod orbit;
mod systems;

use std::fmt;
use std::sync::Arc;

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub use equilibria::{find_equilibria, EquilibriumPoint, EquilibriumReport, SeedOutcome};
pub use orbit::{integrate_orbit, is_simple_orbit, Orbit, SimpleOrbitCheck, Violation};
pub use systems::{BuiltinSystem, BRUNTON_LAMBDA, BRUNTON_MU};

type EvalFn = dyn Fn(&[f64]) -> Vec<f64> + Send + Sync;
type JacobianFn = dyn Fn(&[f64]) -> DMatrix<f64> + Send + Sync;

/// Step used for finite-difference Jacobians when no analytic one is registered.
pub const FD_JACOBIAN_STEP: f64 = 1e-6;

/// An autonomous vector field on R^N.
///
/// Cheap to clone; the evaluators are shared.
#[derive(Clone)]
pub struct VectorField {
    name: String,
    dim: usize,
    eval: Arc<EvalFn>,
    jacobian: Option<Arc<JacobianFn>>,
    invariant_sets: Option<Vec<InvariantSet>>,
}

impl fmt::Debug for VectorField {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("VectorField")
            .field("name", &self.name)
            .field("dim", &self.dim)
            .field("analytic_jacobian", &self.jacobian.is_some())
            .field("invariant_sets", &self.invariant_sets)
            .finish()
    }
}

impl VectorField {
    pub fn new<F>(name: impl Into<String>, dim: usize, eval: F) -> Self
    where
        F: Fn(&[f64]) -> Vec<f64> + Send + Sync + 'static,
    {
        assert!(dim > 0, "vector field dimension must be positive");
        Self {
            name: name.into(),
            dim,
            eval: Arc::new(eval),
            jacobian: None,
            invariant_sets: None,
        }
    }

    pub fn with_jacobian<F>(mut self, jacobian: F) -> Self
    where
        F: Fn(&[f64]) -> DMatrix<f64> + Send + Sync + 'static,
    {
        self.jacobian = Some(Arc::new(jacobian));
        self
    }

    /// Registers the catalog of invariant sets used by foliation checks.
    pub fn with_invariant_sets(mut self, sets: Vec<InvariantSet>) -> Self {
        self.invariant_sets = Some(sets);
        self
    }

    pub fn name(&self) -> &str {
        &self.name
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn has_analytic_jacobian(&self) -> bool {
        self.jacobian.is_some()
    }

    pub fn invariant_sets(&self) -> Option<&[InvariantSet]> {
        self.invariant_sets.as_deref()
    }

    /// Evaluates `P(x)`, checking both input and output lengths.
    pub fn eval(&self, x: &[f64]) -> Result<Vec<f64>> {
        self.check_dim(x)?;
        let v = (self.eval)(x);
        if v.len() != self.dim {
            return Err(Error::DimensionMismatch {
                expected: self.dim,
                got: v.len(),
            });
        }
        Ok(v)
    }

    /// Evaluates `P(x)` without checking lengths.
    pub(crate) fn eval_raw(&self, x: &[f64]) -> Vec<f64> {
        (self.eval)(x)
    }

    /// Analytic Jacobian when registered, central differences otherwise.
    pub fn jacobian(&self, x: &[f64]) -> Result<DMatrix<f64>> {
        self.check_dim(x)?;
        Ok(match &self.jacobian {
            Some(j) => j(x),
            None => self.fd_jacobian(x, FD_JACOBIAN_STEP),
        })
    }

    pub fn analytic_jacobian(&self, x: &[f64]) -> Option<DMatrix<f64>> {
        self.jacobian.as_ref().map(|j| j(x))
    }

    /// Central finite-difference Jacobian, column `j` holds `dP/dx_j`.
    pub fn fd_jacobian(&self, x: &[f64], h: f64) -> DMatrix<f64> {
        let n = self.dim;
        let mut jac = DMatrix::zeros(n, n);
        let mut xp = x.to_vec();
        let mut xm = x.to_vec();
        for j in 0..n {
            xp[j] = x[j] + h;
            xm[j] = x[j] - h;
            let fp = (self.eval)(&xp);
            let fm = (self.eval)(&xm);
            for i in 0..n {
                jac[(i, j)] = (fp[i] - fm[i]) / (2.0 * h);
            }
            xp[j] = x[j];
            xm[j] = x[j];
        }
        jac
    }

    fn check_dim(&self, x: &[f64]) -> Result<()> {
        if x.len() != self.dim {
            return Err(Error::DimensionMismatch {
                expected: self.dim,
                got: x.len(),
            });
        }
        Ok(())
    }
}

/// Evaluates the field at `x`.
pub fn evaluate_field(field: &VectorField, x: &[f64]) -> Result<Vec<f64>> {
    field.eval(x)
}

/// `dx/dt = A x`.
#[derive(Debug, Clone, PartialEq)]
pub struct LinearSystem {
    matrix_a: DMatrix<f64>,
}

impl LinearSystem {
    pub fn new(matrix_a: DMatrix<f64>) -> Result<Self> {
        if !matrix_a.is_square() || matrix_a.nrows() == 0 {
            return Err(Error::InvalidArgument(format!(
                "system matrix must be square and non-empty, got {}x{}",
                matrix_a.nrows(),
                matrix_a.ncols()
            )));
        }
        Ok(Self { matrix_a })
    }

    /// Builds the system from row-major entries.
    pub fn from_rows(rows: &[&[f64]]) -> Result<Self> {
        let n = rows.len();
        if rows.iter().any(|r| r.len() != n) {
            return Err(Error::InvalidArgument("rows must form a square matrix".into()));
        }
        Self::new(DMatrix::from_fn(n, n, |i, j| rows[i][j]))
    }

    pub fn matrix(&self) -> &DMatrix<f64> {
        &self.matrix_a
    }

    pub fn dim(&self) -> usize {
        self.matrix_a.nrows()
    }

    /// Vector field with constant Jacobian and invariant-set catalog.
    pub fn field(&self, name: impl Into<String>) -> VectorField {
        let sets = self.invariant_sets();
        let a = self.matrix_a.clone();
        let a_jac = self.matrix_a.clone();
        let n = self.dim();
        VectorField::new(name, n, move |x| {
            (0..n)
                .map(|i| (0..n).map(|j| a[(i, j)] * x[j]).sum())
                .collect()
        })
        .with_jacobian(move |_| a_jac.clone())
        .with_invariant_sets(sets)
    }
}

/// An invariant set of a flow, registered per system.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum InvariantSet {
    Point { at: Vec<f64> },
    /// The line `through + s * direction`.
    Line { through: Vec<f64>, direction: Vec<f64> },
    /// Planar circle.
    Circle { center: [f64; 2], radius: f64 },
}

impl InvariantSet {
    /// Human-readable name, e.g. `x1=x2` or `r=1`.
    pub fn label(&self) -> String {
        match self {
            InvariantSet::Point { at } => format!("equilibrium {}", fmt_point(at)),
            InvariantSet::Line { through, direction } => {
                let at_origin = through.iter().all(|v| *v == 0.0);
                if direction.len() == 2 && at_origin {
                    line_label_2d(direction[0], direction[1])
                } else {
                    format!(
                        "line through {} along {}",
                        fmt_point(through),
                        fmt_point(direction)
                    )
                }
            }
            InvariantSet::Circle { center, radius } => {
                if center == &[0.0, 0.0] {
                    format!("r={}", fmt_num(*radius))
                } else {
                    format!("circle |x-{}|={}", fmt_point(center), fmt_num(*radius))
                }
            }
        }
    }
}

fn line_label_2d(a: f64, b: f64) -> String {
    const EPS: f64 = 1e-9;
    let scale = a.abs().max(b.abs());
    if a.abs() <= EPS * scale {
        return "x1=0".into();
    }
    if b.abs() <= EPS * scale {
        return "x2=0".into();
    }
    let slope = b / a;
    if (slope - 1.0).abs() <= 1e-9 {
        "x1=x2".into()
    } else if (slope + 1.0).abs() <= 1e-9 {
        "x1=-x2".into()
    } else {
        format!("x2={}*x1", fmt_num(slope))
    }
}

fn fmt_num(v: f64) -> String {
    let r = (v * 1e6).round() / 1e6;
    format!("{r}")
}

fn fmt_point(p: &[f64]) -> String {
    let parts: Vec<String> = p.iter().map(|v| fmt_num(*v)).collect();
    format!("({})", parts.join(", "))
}

pub(crate) fn norm(v: &[f64]) -> f64 {
    v.iter().map(|x| x * x).sum::<f64>().sqrt()
}

pub(crate) fn distance(a: &[f64], b: &[f64]) -> f64 {
    a.iter()
        .zip(b)
        .map(|(x, y)| (x - y) * (x - y))
        .sum::<f64>()
        .sqrt()
}
