//! Closed-form charts for the limit-cycle system, built in polar form:
//! `dr/dt = r (1 - r^2)`, `dθ/dt = 1`.

use std::f64::consts::PI;

use nalgebra::DMatrix;

use super::chart::{check_input, ChartKind, CoordinateChart};
use crate::error::{Error, Result};
use crate::C64;

const ORIGIN_TOL: f64 = 1e-12;
const CYCLE_TOL: f64 = 1e-9;

fn polar(x: &[f64]) -> (f64, f64) {
    (x[0].hypot(x[1]), x[1].atan2(x[0]))
}

fn real_row(a: f64, b: f64) -> [C64; 2] {
    [C64::new(a, 0.0), C64::new(b, 0.0)]
}

fn singular(coordinate: usize, x: &[f64]) -> Error {
    Error::SingularPoint {
        coordinate,
        point: x.to_vec(),
    }
}

/// `y = (r, θ)` with `dr/dt = r(1 - r^2)`, `dθ/dt = 1`.
#[derive(Debug, Clone, Copy, Default)]
pub struct PolarSplitChart;

impl CoordinateChart for PolarSplitChart {
    fn kind(&self) -> ChartKind {
        ChartKind::Split
    }

    fn input_dim(&self) -> usize {
        2
    }

    fn guard(&self, x: &[f64]) -> Result<()> {
        check_input(self, x)?;
        if x[0].hypot(x[1]) <= ORIGIN_TOL {
            return Err(singular(0, x));
        }
        Ok(())
    }

    fn forward(&self, x: &[f64]) -> Result<Vec<C64>> {
        self.guard(x)?;
        let (r, theta) = polar(x);
        Ok(vec![C64::new(r, 0.0), C64::new(theta, 0.0)])
    }

    fn jacobian(&self, x: &[f64]) -> Result<DMatrix<C64>> {
        self.guard(x)?;
        let (r, _) = polar(x);
        let r2 = r * r;
        let rows = [real_row(x[0] / r, x[1] / r), real_row(-x[1] / r2, x[0] / r2)];
        Ok(DMatrix::from_fn(2, 2, |i, j| rows[i][j]))
    }

    fn branch_periods(&self) -> Vec<Option<C64>> {
        vec![None, Some(C64::new(2.0 * PI, 0.0))]
    }

    fn description(&self) -> String {
        "split: y1=r, y2=theta".into()
    }
}

/// `ŷ1 = ln(r / sqrt|1 - r^2|)`, `ŷ2 = θ`.
///
/// Singular at the origin and on the cycle `r = 1`.
#[derive(Debug, Clone, Copy, Default)]
pub struct PolarCanonicalChart;

impl CoordinateChart for PolarCanonicalChart {
    fn kind(&self) -> ChartKind {
        ChartKind::Canonical
    }

    fn input_dim(&self) -> usize {
        2
    }

    fn guard(&self, x: &[f64]) -> Result<()> {
        check_input(self, x)?;
        let r = x[0].hypot(x[1]);
        if r <= ORIGIN_TOL {
            return Err(singular(0, x));
        }
        if (1.0 - r * r).abs() <= CYCLE_TOL {
            return Err(singular(0, x));
        }
        Ok(())
    }

    fn forward(&self, x: &[f64]) -> Result<Vec<C64>> {
        self.guard(x)?;
        let (r, theta) = polar(x);
        let y1 = r.ln() - 0.5 * (1.0 - r * r).abs().ln();
        Ok(vec![C64::new(y1, 0.0), C64::new(theta, 0.0)])
    }

    fn jacobian(&self, x: &[f64]) -> Result<DMatrix<C64>> {
        self.guard(x)?;
        let (r, _) = polar(x);
        let r2 = r * r;
        // d/dr [ln r - ln|1 - r^2| / 2] = 1 / (r (1 - r^2))
        let s = 1.0 / (r * (1.0 - r2));
        let rows = [
            real_row(s * x[0] / r, s * x[1] / r),
            real_row(-x[1] / r2, x[0] / r2),
        ];
        Ok(DMatrix::from_fn(2, 2, |i, j| rows[i][j]))
    }

    fn branch_periods(&self) -> Vec<Option<C64>> {
        vec![None, Some(C64::new(2.0 * PI, 0.0))]
    }

    fn description(&self) -> String {
        "canonical: y1^=ln(r/sqrt|1-r^2|), y2^=theta".into()
    }
}
