//! Analytic route to a minimal set: eigendecomposition, split coordinates,
//! canonical (unit-velocity) coordinates and the flowbox chart.
//!
//! Linear systems go through [`eigendecompose`] → [`split_chart`] →
//! [`canonical_chart`] → [`flowbox_chart`]. The limit-cycle system has
//! registered closed-form polar charts instead.

mod chart;
mod eigen;
mod levelset;
mod linear;
mod polar;

use std::sync::Arc;

pub use chart::{
    chart_velocity, flowbox_chart, flowbox_rotation, ChartKind, CoordinateChart, FlowboxChart,
};
pub use eigen::{eigen_residual, eigendecompose, Eigendecomposition, REPEATED_TOL};
pub use levelset::{write_levelset_csv, LEVELSET_HEADER};
pub use linear::{canonical_chart, split_chart, LinearCanonicalChart, LinearSplitChart, LogBranch};
pub use polar::{PolarCanonicalChart, PolarSplitChart};

pub(crate) use chart::{check_input, unwrap_against};

use crate::dynamics::BuiltinSystem;
use crate::error::{Error, Result};

/// The three charts of the analytic pipeline for one system.
#[derive(Clone)]
pub struct ChartSet {
    pub split: Arc<dyn CoordinateChart>,
    pub canonical: Arc<dyn CoordinateChart>,
    pub flowbox: Arc<FlowboxChart>,
}

impl ChartSet {
    pub fn get(&self, kind: ChartKind) -> Arc<dyn CoordinateChart> {
        match kind {
            ChartKind::Split => self.split.clone(),
            ChartKind::Canonical => self.canonical.clone(),
            ChartKind::Flowbox => self.flowbox.clone(),
        }
    }
}

/// Registered analytic charts of a built-in system.
pub fn analytic_charts(system: BuiltinSystem) -> Result<ChartSet> {
    if let Some(sys) = system.linear() {
        let dec = eigendecompose(&sys)?;
        let canonical: Arc<dyn CoordinateChart> = Arc::new(canonical_chart(&dec)?);
        return Ok(ChartSet {
            split: Arc::new(split_chart(&dec)),
            flowbox: Arc::new(flowbox_chart(canonical.clone())?),
            canonical,
        });
    }
    match system {
        BuiltinSystem::LimitCycle => {
            let canonical: Arc<dyn CoordinateChart> = Arc::new(PolarCanonicalChart);
            Ok(ChartSet {
                split: Arc::new(PolarSplitChart),
                flowbox: Arc::new(flowbox_chart(canonical.clone())?),
                canonical,
            })
        }
        _ => Err(Error::NoAnalyticChart(system.name().to_string())),
    }
}
