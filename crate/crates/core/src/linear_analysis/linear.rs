use nalgebra::DMatrix;

use super::chart::{check_input, ChartKind, CoordinateChart, TWO_PI_I};
use super::eigen::Eigendecomposition;
use crate::error::{Error, Result};
use crate::C64;

/// `|y_i|` below this fraction of `|x|` is treated as the singular set `y_i = 0`.
const ZERO_SET_TOL: f64 = 1e-10;

/// How the canonical map takes the logarithm of a split coordinate.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum LogBranch {
    /// `ln|y|`: real eigenpairs, one chart per half-space.
    RealAbs,
    /// Principal complex logarithm, jumps by `2πi` across the negative real axis.
    Principal,
}

/// `y_i = <w_i, x>` with `dy_i/dt = λ_i y_i`.
#[derive(Debug, Clone)]
pub struct LinearSplitChart {
    dec: Eigendecomposition,
}

/// Split chart of a linear system.
pub fn split_chart(dec: &Eigendecomposition) -> LinearSplitChart {
    LinearSplitChart { dec: dec.clone() }
}

fn project(dec: &Eigendecomposition, x: &[f64]) -> Vec<C64> {
    dec.dual_vectors
        .iter()
        .map(|w| w.iter().zip(x).map(|(wk, xk)| wk * *xk).sum())
        .collect()
}

fn dual_matrix(dec: &Eigendecomposition) -> DMatrix<C64> {
    let n = dec.dim();
    DMatrix::from_fn(n, n, |i, j| dec.dual_vectors[i][j])
}

impl LinearSplitChart {
    pub fn decomposition(&self) -> &Eigendecomposition {
        &self.dec
    }
}

impl CoordinateChart for LinearSplitChart {
    fn kind(&self) -> ChartKind {
        ChartKind::Split
    }

    fn input_dim(&self) -> usize {
        self.dec.dim()
    }

    fn guard(&self, x: &[f64]) -> Result<()> {
        check_input(self, x)
    }

    fn forward(&self, x: &[f64]) -> Result<Vec<C64>> {
        check_input(self, x)?;
        Ok(project(&self.dec, x))
    }

    fn jacobian(&self, x: &[f64]) -> Result<DMatrix<C64>> {
        check_input(self, x)?;
        Ok(dual_matrix(&self.dec))
    }

    fn description(&self) -> String {
        "split: y_i = <w_i, x>, dy_i/dt = lambda_i y_i".into()
    }
}

/// `ŷ_i = log(y_i) / λ_i`, unit velocity in every coordinate.
#[derive(Debug, Clone)]
pub struct LinearCanonicalChart {
    dec: Eigendecomposition,
    branches: Vec<LogBranch>,
}

/// Canonical chart of a linear system.
///
/// Fails when an eigenvalue is zero: that split coordinate is already
/// conserved and has no unit-velocity rescaling.
pub fn canonical_chart(dec: &Eigendecomposition) -> Result<LinearCanonicalChart> {
    if let Some(index) = dec.eigenvalues.iter().position(|l| l.norm() < 1e-14) {
        return Err(Error::ConservationDirection { index });
    }
    let branches = (0..dec.dim())
        .map(|i| {
            if dec.is_real_pair(i) {
                LogBranch::RealAbs
            } else {
                LogBranch::Principal
            }
        })
        .collect();
    Ok(LinearCanonicalChart {
        dec: dec.clone(),
        branches,
    })
}

impl LinearCanonicalChart {
    pub fn branches(&self) -> &[LogBranch] {
        &self.branches
    }

    fn split_guarded(&self, x: &[f64]) -> Result<Vec<C64>> {
        check_input(self, x)?;
        let y = project(&self.dec, x);
        let scale = x.iter().map(|v| v * v).sum::<f64>().sqrt();
        for (coordinate, yi) in y.iter().enumerate() {
            if !(yi.norm() > ZERO_SET_TOL * scale) {
                return Err(Error::SingularPoint {
                    coordinate,
                    point: x.to_vec(),
                });
            }
        }
        Ok(y)
    }
}

impl CoordinateChart for LinearCanonicalChart {
    fn kind(&self) -> ChartKind {
        ChartKind::Canonical
    }

    fn input_dim(&self) -> usize {
        self.dec.dim()
    }

    fn guard(&self, x: &[f64]) -> Result<()> {
        self.split_guarded(x).map(|_| ())
    }

    fn forward(&self, x: &[f64]) -> Result<Vec<C64>> {
        let y = self.split_guarded(x)?;
        Ok(y.iter()
            .zip(&self.dec.eigenvalues)
            .zip(&self.branches)
            .map(|((yi, li), branch)| {
                let log = match branch {
                    LogBranch::RealAbs => C64::new(yi.re.abs().ln(), 0.0),
                    LogBranch::Principal => yi.ln(),
                };
                log / li
            })
            .collect())
    }

    fn jacobian(&self, x: &[f64]) -> Result<DMatrix<C64>> {
        let y = self.split_guarded(x)?;
        let n = self.dec.dim();
        // d log(y_i) = dy_i / y_i for both branches.
        Ok(DMatrix::from_fn(n, n, |i, j| {
            self.dec.dual_vectors[i][j] / (self.dec.eigenvalues[i] * y[i])
        }))
    }

    fn branch_periods(&self) -> Vec<Option<C64>> {
        self.branches
            .iter()
            .zip(&self.dec.eigenvalues)
            .map(|(b, l)| match b {
                LogBranch::RealAbs => None,
                LogBranch::Principal => Some(TWO_PI_I / l),
            })
            .collect()
    }

    fn description(&self) -> String {
        let parts: Vec<String> = self
            .branches
            .iter()
            .enumerate()
            .map(|(i, b)| match b {
                LogBranch::RealAbs => format!("y{}^=ln|y{}|/lambda{}", i + 1, i + 1, i + 1),
                LogBranch::Principal => format!("y{}^=Log(y{})/lambda{}", i + 1, i + 1, i + 1),
            })
            .collect();
        format!("canonical: {}", parts.join(", "))
    }
}
