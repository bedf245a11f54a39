//! Residual fields, flowbox error variances, foliation checks against the
//! registered invariant sets, chart comparison, and the lifted-rank example.

mod compare;
mod foliation;
mod lifted;
mod residual;

use serde::{Deserialize, Serialize};

use crate::dynamics::VectorField;
use crate::error::Result;
use crate::linear_analysis::CoordinateChart;
use crate::patch::GridSpec;
use crate::timemaps::{independence_test, GradientSource, IndependenceReport, DEFAULT_SVD_TOL};
use crate::C64;

pub use compare::{abs_cosine, compare_charts, compare_charts_at, ChartComparison};
pub use foliation::{foliation_check, intersection_witness, FoliationReport, FoliationWarning};
pub use lifted::{lifted_rank_demo, LiftedPoint, LiftedRankReport};
pub use residual::{coordinate_stats, residual_field, velocity_target, CoordinateStats, ResidualField};

/// One coordinate of a chart, usable in the independence test.
pub struct ChartComponent<'a> {
    pub chart: &'a dyn CoordinateChart,
    pub index: usize,
}

impl GradientSource for ChartComponent<'_> {
    fn dim(&self) -> usize {
        self.chart.input_dim()
    }

    fn gradient_at(&self, x: &[f64]) -> Result<Vec<C64>> {
        Ok(self.chart.jacobian(x)?.row(self.index).iter().copied().collect())
    }
}

/// Pass criteria for [`validate_chart`].
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct Thresholds {
    /// Upper bound on the residual variance of each coordinate.
    pub max_variance: Vec<f64>,
    /// A patch meeting an invariant set fails validation.
    pub fail_on_foliation: bool,
    /// Chart coordinates must be independent at every evaluated point.
    pub require_independent: bool,
}

impl Default for Thresholds {
    fn default() -> Self {
        Self {
            max_variance: vec![1e-3, 1e-4],
            fail_on_foliation: true,
            require_independent: true,
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ValidationReport {
    pub system: String,
    pub chart: String,
    pub grid: GridSpec,
    /// Velocity the chart should have in every coordinate.
    pub target: Vec<f64>,
    pub evaluated_points: usize,
    pub skipped_points: usize,
    /// Statistics of `<∇z_i, P> - target_i` over the evaluated points.
    pub unit_residual_stats: Vec<CoordinateStats>,
    pub independence: Option<IndependenceReport>,
    pub foliation_warnings: Vec<FoliationWarning>,
    pub foliation_notice: Option<String>,
    pub comparison: Option<ChartComparison>,
    pub thresholds: Thresholds,
    pub failures: Vec<String>,
    pub passed: bool,
}

impl ValidationReport {
    pub fn max_residual(&self) -> f64 {
        self.unit_residual_stats.iter().map(|s| s.max_abs).fold(0.0, f64::max)
    }
}

/// Residuals, independence, foliation and optional comparison in one report.
pub fn validate_chart(
    chart: &dyn CoordinateChart,
    field: &VectorField,
    grid: &GridSpec,
    analytic: Option<&dyn CoordinateChart>,
    thresholds: &Thresholds,
) -> Result<ValidationReport> {
    let residuals = residual_field(chart, field, grid)?;
    let k = chart.output_dim();
    let independence = if k >= 2 {
        let comps: Vec<ChartComponent> = (0..k).map(|index| ChartComponent { chart, index }).collect();
        let refs: Vec<&ChartComponent> = comps.iter().collect();
        Some(independence_test(&refs, &residuals.points, DEFAULT_SVD_TOL)?)
    } else {
        None
    };
    let foliation = foliation_check(field, &grid.patch)?;
    let comparison = match analytic {
        Some(a) if k >= 2 => Some(compare_charts(chart, a, grid)?),
        _ => None,
    };

    let mut failures = Vec::new();
    for (i, (s, bound)) in residuals.stats.iter().zip(&thresholds.max_variance).enumerate() {
        if !(s.variance <= *bound) {
            failures.push(format!(
                "variance of z{} residual {:.4e} exceeds {:.1e}",
                i + 1,
                s.variance,
                bound
            ));
        }
    }
    if thresholds.fail_on_foliation {
        failures.extend(foliation.warnings.iter().map(|w| w.message(&grid.patch)));
    }
    if thresholds.require_independent {
        if let Some(ind) = &independence {
            if ind.min_rank() < k {
                failures.push(format!(
                    "chart coordinates dependent: rank {} < {k} somewhere ({:?})",
                    ind.min_rank(),
                    ind.verdict
                ));
            }
        }
    }
    Ok(ValidationReport {
        system: field.name().to_string(),
        chart: chart.description(),
        grid: grid.clone(),
        target: residuals.target.clone(),
        evaluated_points: residuals.evaluated(),
        skipped_points: residuals.skipped,
        unit_residual_stats: residuals.stats,
        independence,
        foliation_warnings: foliation.warnings,
        foliation_notice: foliation.notice,
        comparison,
        thresholds: thresholds.clone(),
        passed: failures.is_empty(),
        failures,
    })
}
