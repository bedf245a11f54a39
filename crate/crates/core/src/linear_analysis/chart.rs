use std::f64::consts::PI;
use std::fmt;
use std::sync::Arc;

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use crate::dynamics::VectorField;
use crate::error::{Error, Result};
use crate::C64;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ChartKind {
    /// Each coordinate evolves on its own: `dy_i/dt = q_i(y_i)`.
    Split,
    /// Every coordinate has unit velocity.
    Canonical,
    /// First coordinate has unit velocity, the rest are conserved.
    Flowbox,
}

impl fmt::Display for ChartKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            ChartKind::Split => "split",
            ChartKind::Canonical => "canonical",
            ChartKind::Flowbox => "flowbox",
        })
    }
}

/// A differentiable map from states to (possibly complex) coordinates.
pub trait CoordinateChart: Send + Sync {
    fn kind(&self) -> ChartKind;

    fn input_dim(&self) -> usize;

    fn output_dim(&self) -> usize {
        self.input_dim()
    }

    /// `Ok` inside the chart domain, `SingularPoint` otherwise.
    fn guard(&self, x: &[f64]) -> Result<()>;

    fn forward(&self, x: &[f64]) -> Result<Vec<C64>>;

    /// Jacobian with one row per coordinate.
    fn jacobian(&self, x: &[f64]) -> Result<DMatrix<C64>>;

    /// Jump of each coordinate across its branch cut, if it has one.
    fn branch_periods(&self) -> Vec<Option<C64>> {
        vec![None; self.output_dim()]
    }

    /// Coordinates along a sampled path with branch jumps removed.
    fn forward_path(&self, states: &[Vec<f64>]) -> Result<Vec<Vec<C64>>> {
        let periods = self.branch_periods();
        let mut out: Vec<Vec<C64>> = Vec::with_capacity(states.len());
        for x in states {
            let mut z = self.forward(x)?;
            if let Some(prev) = out.last() {
                unwrap_against(&mut z, prev, &periods);
            }
            out.push(z);
        }
        Ok(out)
    }

    fn description(&self) -> String;
}

pub(crate) fn unwrap_against(z: &mut [C64], prev: &[C64], periods: &[Option<C64>]) {
    for ((zi, pi), period) in z.iter_mut().zip(prev).zip(periods) {
        if let Some(p) = period {
            let m = ((pi - *zi) / p).re.round();
            *zi += p * m;
        }
    }
}

pub(crate) fn check_input(chart: &dyn CoordinateChart, x: &[f64]) -> Result<()> {
    if x.len() != chart.input_dim() {
        return Err(Error::DimensionMismatch {
            expected: chart.input_dim(),
            got: x.len(),
        });
    }
    Ok(())
}

/// Coordinate velocities `J(x) P(x)`.
pub fn chart_velocity(chart: &dyn CoordinateChart, field: &VectorField, x: &[f64]) -> Result<Vec<C64>> {
    chart.guard(x)?;
    let p = field.eval(x)?;
    let jac = chart.jacobian(x)?;
    Ok((0..jac.nrows())
        .map(|i| (0..jac.ncols()).map(|j| jac[(i, j)] * p[j]).sum())
        .collect())
}

/// Scaled Helmert rotation: first row `(1/N, ..., 1/N)`, remaining rows
/// orthogonal to the all-ones vector.
///
/// For `N = 2` this is `[[1/2, 1/2], [1/2, -1/2]]`.
pub fn flowbox_rotation(n: usize) -> DMatrix<f64> {
    let nf = n as f64;
    DMatrix::from_fn(n, n, |i, j| {
        // One square root per entry keeps the N = 2 case exact.
        let denom = ((i * (i + 1)) as f64 * nf).sqrt();
        if i == 0 {
            1.0 / nf
        } else if j < i {
            1.0 / denom
        } else if j == i {
            -(i as f64) / denom
        } else {
            0.0
        }
    })
}

/// `z = R ŷ` over a canonical chart, so that `dz1/dt = 1` and `dz_k/dt = 0`.
#[derive(Clone)]
pub struct FlowboxChart {
    canonical: Arc<dyn CoordinateChart>,
    rotation: DMatrix<f64>,
}

impl FlowboxChart {
    pub fn canonical(&self) -> &Arc<dyn CoordinateChart> {
        &self.canonical
    }

    pub fn rotation(&self) -> &DMatrix<f64> {
        &self.rotation
    }

    fn rotate(&self, y: &[C64]) -> Vec<C64> {
        let r = &self.rotation;
        (0..r.nrows())
            .map(|i| (0..r.ncols()).map(|j| y[j] * r[(i, j)]).sum())
            .collect()
    }
}

/// Builds the flowbox chart over a canonical chart.
pub fn flowbox_chart(canonical: Arc<dyn CoordinateChart>) -> Result<FlowboxChart> {
    if canonical.kind() != ChartKind::Canonical {
        return Err(Error::InvalidArgument(format!(
            "flowbox needs a canonical chart, got {}",
            canonical.kind()
        )));
    }
    let rotation = flowbox_rotation(canonical.output_dim());
    Ok(FlowboxChart {
        canonical,
        rotation,
    })
}

impl CoordinateChart for FlowboxChart {
    fn kind(&self) -> ChartKind {
        ChartKind::Flowbox
    }

    fn input_dim(&self) -> usize {
        self.canonical.input_dim()
    }

    fn output_dim(&self) -> usize {
        self.canonical.output_dim()
    }

    fn guard(&self, x: &[f64]) -> Result<()> {
        self.canonical.guard(x)
    }

    fn forward(&self, x: &[f64]) -> Result<Vec<C64>> {
        Ok(self.rotate(&self.canonical.forward(x)?))
    }

    fn jacobian(&self, x: &[f64]) -> Result<DMatrix<C64>> {
        let r = self.rotation.map(|v| C64::new(v, 0.0));
        Ok(r * self.canonical.jacobian(x)?)
    }

    fn forward_path(&self, states: &[Vec<f64>]) -> Result<Vec<Vec<C64>>> {
        Ok(self
            .canonical
            .forward_path(states)?
            .iter()
            .map(|y| self.rotate(y))
            .collect())
    }

    fn description(&self) -> String {
        let n = self.output_dim();
        let rotation = if n == 2 {
            "z1=(y1+y2)/2, z2=(y1-y2)/2".to_string()
        } else {
            format!("z = H/sqrt({n}) * y with H the {n}x{n} Helmert matrix")
        };
        format!("flowbox over [{}]; {rotation}", self.canonical.description())
    }
}

/// Principal logarithm jump `2πi`.
pub(crate) const TWO_PI_I: C64 = C64::new(0.0, 2.0 * PI);
