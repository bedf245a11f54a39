use std::sync::Arc;

use nalgebra::DMatrix;

use super::mlp::Mlp;
use super::train::TrainedUnitManifolds;
use crate::error::{Error, Result};
use crate::linear_analysis::{flowbox_chart, ChartKind, CoordinateChart, FlowboxChart};
use crate::C64;

/// Network outputs read as a canonical chart, gradients by central differences.
#[derive(Debug, Clone)]
pub struct UnitManifoldChart {
    model: Arc<Mlp>,
    fd_step: f64,
}

impl UnitManifoldChart {
    pub fn new(model: Mlp, fd_step: f64) -> Result<Self> {
        if model.input_dim() != model.output_dim() {
            return Err(Error::DimensionMismatch {
                expected: model.input_dim(),
                got: model.output_dim(),
            });
        }
        if !(fd_step > 0.0 && fd_step.is_finite()) {
            return Err(Error::InvalidArgument(format!("finite-difference step {fd_step} must be positive")));
        }
        Ok(Self {
            model: Arc::new(model),
            fd_step,
        })
    }

    pub fn model(&self) -> &Mlp {
        &self.model
    }
}

impl CoordinateChart for UnitManifoldChart {
    fn kind(&self) -> ChartKind {
        ChartKind::Canonical
    }

    fn input_dim(&self) -> usize {
        self.model.input_dim()
    }

    fn guard(&self, x: &[f64]) -> Result<()> {
        crate::linear_analysis::check_input(self, x)
    }

    fn forward(&self, x: &[f64]) -> Result<Vec<C64>> {
        Ok(self
            .model
            .forward(x)?
            .into_iter()
            .map(|v| C64::new(v, 0.0))
            .collect())
    }

    fn jacobian(&self, x: &[f64]) -> Result<DMatrix<C64>> {
        Ok(self.model.input_gradient(x, self.fd_step)?.map(|v| C64::new(v, 0.0)))
    }

    fn description(&self) -> String {
        format!("learned unit manifolds {:?}", self.model.layer_sizes())
    }
}

/// Flowbox chart `z = R ŷ` over the learned unit manifolds.
pub fn flowbox_from_unit_manifolds(trained: &TrainedUnitManifolds) -> Result<FlowboxChart> {
    flowbox_from_model(trained.model.clone(), trained.config.fd_step)
}

/// As [`flowbox_from_unit_manifolds`], for a model loaded from a checkpoint.
pub fn flowbox_from_model(model: Mlp, fd_step: f64) -> Result<FlowboxChart> {
    flowbox_chart(Arc::new(UnitManifoldChart::new(model, fd_step)?))
}
