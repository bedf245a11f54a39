use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linear_analysis::CoordinateChart;
use crate::patch::GridSpec;
use crate::C64;

/// Gradients shorter than this are too flat to define a direction.
const FLAT_GRADIENT: f64 = 1e-12;

/// Alignment of one coordinate's gradient between two charts.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ChartComparison {
    /// Zero-based coordinate compared (1 is `z2`).
    pub coordinate: usize,
    pub mean_abs_cos: f64,
    pub p05_abs_cos: f64,
    pub min_abs_cos: f64,
    pub compared: usize,
    /// Points outside either domain or with a flat gradient.
    pub skipped: usize,
}

/// `|<a, b>| / (|a| |b|)` with the Hermitian product.
pub fn abs_cosine(a: &[C64], b: &[C64]) -> Option<f64> {
    let aa: f64 = a.iter().map(|c| c.norm_sqr()).sum();
    let bb: f64 = b.iter().map(|c| c.norm_sqr()).sum();
    if aa.sqrt() <= FLAT_GRADIENT || bb.sqrt() <= FLAT_GRADIENT {
        return None;
    }
    let ab: C64 = a.iter().zip(b).map(|(x, y)| x.conj() * y).sum();
    Some((ab.norm() / (aa * bb).sqrt()).min(1.0))
}

/// Direction agreement of the gradients of coordinate `coordinate`.
///
/// Learned charts agree with analytic ones only up to reparameterization,
/// so level-set directions are compared, not values.
pub fn compare_charts_at(
    learned: &dyn CoordinateChart,
    analytic: &dyn CoordinateChart,
    grid: &GridSpec,
    coordinate: usize,
) -> Result<ChartComparison> {
    if learned.input_dim() != analytic.input_dim() || learned.input_dim() != grid.patch.dim() {
        return Err(Error::DimensionMismatch {
            expected: analytic.input_dim(),
            got: learned.input_dim(),
        });
    }
    if coordinate >= learned.output_dim().min(analytic.output_dim()) {
        return Err(Error::InvalidArgument(format!("no coordinate {coordinate} to compare")));
    }
    let points = grid.points();
    let results: Vec<Result<Option<f64>>> = points
        .par_iter()
        .map(|x| {
            let ja = match learned.jacobian(x) {
                Ok(j) => j,
                Err(Error::SingularPoint { .. }) => return Ok(None),
                Err(e) => return Err(e),
            };
            let jb = match analytic.jacobian(x) {
                Ok(j) => j,
                Err(Error::SingularPoint { .. }) => return Ok(None),
                Err(e) => return Err(e),
            };
            let a: Vec<C64> = ja.row(coordinate).iter().copied().collect();
            let b: Vec<C64> = jb.row(coordinate).iter().copied().collect();
            Ok(abs_cosine(&a, &b))
        })
        .collect();
    let mut cosines = Vec::new();
    for r in results {
        if let Some(c) = r? {
            cosines.push(c);
        }
    }
    if cosines.is_empty() {
        return Err(Error::EmptyGrid);
    }
    cosines.sort_by(f64::total_cmp);
    let n = cosines.len();
    let p05 = cosines[((n - 1) as f64 * 0.05).floor() as usize];
    Ok(ChartComparison {
        coordinate,
        mean_abs_cos: cosines.iter().sum::<f64>() / n as f64,
        p05_abs_cos: p05,
        min_abs_cos: cosines[0],
        compared: n,
        skipped: points.len() - n,
    })
}

/// [`compare_charts_at`] on the conserved coordinate `z2`.
pub fn compare_charts(
    learned: &dyn CoordinateChart,
    analytic: &dyn CoordinateChart,
    grid: &GridSpec,
) -> Result<ChartComparison> {
    compare_charts_at(learned, analytic, grid, 1)
}
