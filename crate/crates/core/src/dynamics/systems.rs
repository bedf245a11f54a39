use std::fmt;
use std::str::FromStr;

use nalgebra::DMatrix;

use super::{InvariantSet, LinearSystem, VectorField};
use crate::error::Error;
use crate::linear_analysis::eigendecompose;
use crate::patch::Patch;

/// `mu` of the Brunton example `dx1/dt = mu x1, dx2/dt = lambda (x2 - x1^2)`.
pub const BRUNTON_MU: f64 = -0.05;
/// `lambda` of the Brunton example.
pub const BRUNTON_LAMBDA: f64 = -1.0;

/// Registry of the example systems.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum BuiltinSystem {
    /// `A = [[11, -5], [-5, 11]] / 2`, eigenvalues 3 and 8.
    LinearReal,
    /// `A = [[-4, 1], [-4, -5]] / 10`, eigenvalues `-9/20 ± i sqrt(15)/20`.
    LinearComplex,
    /// `A = [[0, 1], [-1, 0]]`, eigenvalues `±i`.
    LinearImaginary,
    /// Stable limit cycle on the unit circle.
    LimitCycle,
    /// Slow-manifold system with polynomial eigenfunctions.
    Brunton,
}

impl BuiltinSystem {
    pub const ALL: [BuiltinSystem; 5] = [
        BuiltinSystem::LinearReal,
        BuiltinSystem::LinearComplex,
        BuiltinSystem::LinearImaginary,
        BuiltinSystem::LimitCycle,
        BuiltinSystem::Brunton,
    ];

    pub fn name(self) -> &'static str {
        match self {
            BuiltinSystem::LinearReal => "linear_real",
            BuiltinSystem::LinearComplex => "linear_complex",
            BuiltinSystem::LinearImaginary => "linear_imaginary",
            BuiltinSystem::LimitCycle => "limit_cycle",
            BuiltinSystem::Brunton => "brunton",
        }
    }

    pub fn dim(self) -> usize {
        2
    }

    /// One-line registry entry, e.g. `linear_real (N=2)`.
    pub fn listing(self) -> String {
        match self {
            BuiltinSystem::Brunton => format!("{} (N=2, lifted N=3)", self.name()),
            _ => format!("{} (N={})", self.name(), self.dim()),
        }
    }

    pub fn linear(self) -> Option<LinearSystem> {
        let rows: [[f64; 2]; 2] = match self {
            BuiltinSystem::LinearReal => [[5.5, -2.5], [-2.5, 5.5]],
            BuiltinSystem::LinearComplex => [[-0.4, 0.1], [-0.4, -0.5]],
            BuiltinSystem::LinearImaginary => [[0.0, 1.0], [-1.0, 0.0]],
            _ => return None,
        };
        Some(LinearSystem::new(DMatrix::from_fn(2, 2, |i, j| rows[i][j])).expect("square"))
    }

    /// The three-dimensional linear lift `(x1, x2, x1^2)` of the Brunton system.
    pub fn brunton_lifted() -> LinearSystem {
        let (mu, lambda) = (BRUNTON_MU, BRUNTON_LAMBDA);
        LinearSystem::from_rows(&[
            &[mu, 0.0, 0.0],
            &[0.0, lambda, -lambda],
            &[0.0, 0.0, 2.0 * mu],
        ])
        .expect("square")
    }

    /// Vector field with analytic Jacobian and invariant-set catalog attached.
    pub fn field(self) -> VectorField {
        if let Some(sys) = self.linear() {
            return sys.field(self.name());
        }
        match self {
            BuiltinSystem::LimitCycle => VectorField::new(self.name(), 2, |x| {
                let s = 1.0 - x[0] * x[0] - x[1] * x[1];
                vec![-x[1] + x[0] * s, x[0] + x[1] * s]
            })
            .with_jacobian(|x| {
                let (a, b) = (x[0], x[1]);
                let s = 1.0 - a * a - b * b;
                DMatrix::from_row_slice(
                    2,
                    2,
                    &[s - 2.0 * a * a, -1.0 - 2.0 * a * b, 1.0 - 2.0 * a * b, s - 2.0 * b * b],
                )
            })
            .with_invariant_sets(vec![
                InvariantSet::Point { at: vec![0.0, 0.0] },
                InvariantSet::Circle {
                    center: [0.0, 0.0],
                    radius: 1.0,
                },
            ]),
            BuiltinSystem::Brunton => {
                let (mu, lambda) = (BRUNTON_MU, BRUNTON_LAMBDA);
                VectorField::new(self.name(), 2, move |x| {
                    vec![mu * x[0], lambda * (x[1] - x[0] * x[0])]
                })
                .with_jacobian(move |x| {
                    DMatrix::from_row_slice(2, 2, &[mu, 0.0, -2.0 * lambda * x[0], lambda])
                })
                .with_invariant_sets(vec![
                    InvariantSet::Point { at: vec![0.0, 0.0] },
                    InvariantSet::Line {
                        through: vec![0.0, 0.0],
                        direction: vec![0.0, 1.0],
                    },
                ])
            }
            _ => unreachable!("linear systems handled above"),
        }
    }

    /// Patch used for the analytic figures and the exactness checks.
    pub fn display_patch(self) -> Patch {
        match self {
            BuiltinSystem::LimitCycle => Patch::cube(2, -2.0, 2.0),
            _ => Patch::cube(2, 1.0, 3.0),
        }
        .expect("valid patch")
    }
}

impl LinearSystem {
    /// Origin plus the span of every real eigenvector.
    ///
    /// Defective matrices report the origin only.
    pub fn invariant_sets(&self) -> Vec<InvariantSet> {
        linear_invariant_sets(self)
    }
}

fn linear_invariant_sets(sys: &LinearSystem) -> Vec<InvariantSet> {
    let n = sys.dim();
    let mut sets = vec![InvariantSet::Point { at: vec![0.0; n] }];
    if let Ok(dec) = eigendecompose(sys) {
        for (lambda, v) in dec.eigenvalues.iter().zip(&dec.right_vectors) {
            if lambda.im == 0.0 && v.iter().all(|c| c.im.abs() < 1e-14) {
                sets.push(InvariantSet::Line {
                    through: vec![0.0; n],
                    direction: v.iter().map(|c| c.re).collect(),
                });
            }
        }
    }
    sets
}

impl fmt::Display for BuiltinSystem {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for BuiltinSystem {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        BuiltinSystem::ALL
            .into_iter()
            .find(|sys| sys.name() == s)
            .ok_or_else(|| Error::UnknownSystem(s.to_string()))
    }
}
