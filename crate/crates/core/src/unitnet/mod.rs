//! Numeric search for unit manifolds: a small tanh network with one output
//! per state dimension, trained so that every output advances at unit rate
//! along the flow while output gradients stay mutually orthogonal.
//!
//! Input gradients inside the loss are central differences of the network,
//! so parameter training needs only first-order reverse mode. The analytic
//! input Jacobian is kept separately as a check.

mod chart;
mod loss;
mod mlp;
mod train;

pub use chart::{flowbox_from_model, flowbox_from_unit_manifolds, UnitManifoldChart};
pub use loss::{loss, loss_and_gradient, LossBreakdown};
pub use mlp::{Activation, Layer, Mlp};
pub use train::{
    patch_warnings, train, Adam, Checkpoint, CurvePoint, TrainedUnitManifolds, TrainingConfig, FINAL_EVAL_POINTS,
};
