use std::io::Write;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::dynamics::VectorField;
use crate::error::{Error, Result};
use crate::linear_analysis::{chart_velocity, ChartKind, CoordinateChart};
use crate::patch::GridSpec;
use crate::C64;

/// Mean, population variance `E|r - mean|^2` and maximum modulus of one
/// residual coordinate.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CoordinateStats {
    pub mean: C64,
    pub variance: f64,
    pub max_abs: f64,
}

/// Chart velocity minus its target over the guarded points of a grid.
#[derive(Debug, Clone)]
pub struct ResidualField {
    pub kind: ChartKind,
    pub target: Vec<f64>,
    pub points: Vec<Vec<f64>>,
    pub residuals: Vec<Vec<C64>>,
    pub stats: Vec<CoordinateStats>,
    /// Grid points outside the chart domain.
    pub skipped: usize,
}

impl ResidualField {
    pub fn evaluated(&self) -> usize {
        self.points.len()
    }

    pub fn max_abs(&self) -> f64 {
        self.stats.iter().map(|s| s.max_abs).fold(0.0, f64::max)
    }

    /// Columns `x1..xN,res_z1..res_zK`, real parts of the residuals.
    pub fn write_csv<W: Write>(&self, out: W) -> Result<()> {
        let n = self.points.first().map_or(0, Vec::len);
        let k = self.target.len();
        let mut header: Vec<String> = (1..=n).map(|i| format!("x{i}")).collect();
        header.extend((1..=k).map(|i| format!("res_z{i}")));
        let mut w = csv::Writer::from_writer(out);
        w.write_record(&header)?;
        for (x, r) in self.points.iter().zip(&self.residuals) {
            let row: Vec<String> = x
                .iter()
                .map(f64::to_string)
                .chain(r.iter().map(|c| c.re.to_string()))
                .collect();
            w.write_record(&row)?;
        }
        w.flush()?;
        Ok(())
    }
}

/// Target velocity for a chart kind: `(1, 0, ..)` for flowbox, all ones for canonical.
pub fn velocity_target(kind: ChartKind, k: usize) -> Result<Vec<f64>> {
    match kind {
        ChartKind::Flowbox => Ok((0..k).map(|i| if i == 0 { 1.0 } else { 0.0 }).collect()),
        ChartKind::Canonical => Ok(vec![1.0; k]),
        ChartKind::Split => Err(Error::InvalidArgument(
            "split charts have no fixed velocity target".into(),
        )),
    }
}

fn sorted_sum(mut v: Vec<f64>) -> f64 {
    v.sort_by(f64::total_cmp);
    v.into_iter().sum()
}

/// Statistics that do not depend on the order of the samples.
pub fn coordinate_stats(values: &[C64]) -> CoordinateStats {
    let n = values.len() as f64;
    let mean = C64::new(
        sorted_sum(values.iter().map(|c| c.re).collect()) / n,
        sorted_sum(values.iter().map(|c| c.im).collect()) / n,
    );
    let variance = sorted_sum(values.iter().map(|c| (c - mean).norm_sqr()).collect()) / n;
    let max_abs = values.iter().map(|c| c.norm()).fold(0.0, f64::max);
    CoordinateStats {
        mean,
        variance,
        max_abs,
    }
}

/// Residual of the chart velocity against its target over a grid.
pub fn residual_field(chart: &dyn CoordinateChart, field: &VectorField, grid: &GridSpec) -> Result<ResidualField> {
    if chart.input_dim() != field.dim() || grid.patch.dim() != field.dim() {
        return Err(Error::DimensionMismatch {
            expected: field.dim(),
            got: chart.input_dim(),
        });
    }
    let k = chart.output_dim();
    let target = velocity_target(chart.kind(), k)?;
    let grid_points = grid.points();
    let results: Vec<Result<Vec<C64>>> = grid_points
        .par_iter()
        .map(|x| {
            let v = chart_velocity(chart, field, x)?;
            Ok(v.iter().zip(&target).map(|(vi, ti)| vi - ti).collect())
        })
        .collect();
    let mut points = Vec::new();
    let mut residuals = Vec::new();
    let mut skipped = 0;
    for (x, r) in grid_points.into_iter().zip(results) {
        match r {
            Ok(r) => {
                points.push(x);
                residuals.push(r);
            }
            Err(Error::SingularPoint { .. }) => skipped += 1,
            Err(e) => return Err(e),
        }
    }
    if points.is_empty() {
        return Err(Error::EmptyGrid);
    }
    let stats = (0..k)
        .map(|i| coordinate_stats(&residuals.iter().map(|r| r[i]).collect::<Vec<_>>()))
        .collect();
    Ok(ResidualField {
        kind: chart.kind(),
        target,
        points,
        residuals,
        stats,
        skipped,
    })
}
