use std::io::{Read, Write};

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::loss::{loss, loss_and_gradient, LossBreakdown};
use super::mlp::Mlp;
use crate::dynamics::{find_equilibria, VectorField};
use crate::error::{Error, Result};
use crate::patch::Patch;
use crate::validation::foliation_check;

/// Fresh samples used for the loss reported after training.
pub const FINAL_EVAL_POINTS: usize = 1024;

fn default_batch_size() -> usize {
    256
}
fn default_epochs() -> usize {
    5000
}
fn default_learning_rate() -> f64 {
    1e-3
}
fn default_orth_weight() -> f64 {
    0.1
}
fn default_fd_step() -> f64 {
    1e-4
}
fn default_hidden() -> Vec<usize> {
    vec![64, 64]
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TrainingConfig {
    pub patch: Patch,
    #[serde(default = "default_batch_size")]
    pub batch_size: usize,
    /// One minibatch update per epoch.
    #[serde(default = "default_epochs")]
    pub epochs: usize,
    #[serde(default = "default_learning_rate")]
    pub learning_rate: f64,
    /// Weight of the orthogonality addends, in `(0, 1)`.
    #[serde(default = "default_orth_weight")]
    pub orth_weight: f64,
    /// Step of the central differences giving input gradients.
    #[serde(default = "default_fd_step")]
    pub fd_step: f64,
    #[serde(default)]
    pub seed: u64,
    #[serde(default = "default_hidden")]
    pub hidden: Vec<usize>,
    /// Learning rate reached at the last epoch by cosine annealing;
    /// `None` keeps the rate constant.
    #[serde(default)]
    pub final_learning_rate: Option<f64>,
}

impl TrainingConfig {
    /// Defaults: 64-64 tanh trunk, batch 256, 5000 epochs, lr 1e-3,
    /// orthogonality weight 0.1, difference step 1e-4, seed 0.
    pub fn new(patch: Patch) -> Self {
        Self {
            patch,
            batch_size: default_batch_size(),
            epochs: default_epochs(),
            learning_rate: default_learning_rate(),
            orth_weight: default_orth_weight(),
            fd_step: default_fd_step(),
            seed: 0,
            hidden: default_hidden(),
            final_learning_rate: None,
        }
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |msg: String| Err(Error::InvalidConfig(msg));
        if self.batch_size == 0 {
            return bad("batch_size must be positive".into());
        }
        if self.epochs == 0 {
            return bad("epochs must be positive".into());
        }
        if !(self.learning_rate > 0.0 && self.learning_rate.is_finite()) {
            return bad(format!("learning_rate {} must be positive", self.learning_rate));
        }
        if !(self.orth_weight > 0.0 && self.orth_weight < 1.0) {
            return bad(format!("orth_weight {} must lie in (0, 1)", self.orth_weight));
        }
        if !(1e-6..=1e-2).contains(&self.fd_step) {
            return bad(format!("fd_step {} must lie in [1e-6, 1e-2]", self.fd_step));
        }
        if let Some(lr) = self.final_learning_rate {
            if !(lr >= 0.0 && lr <= self.learning_rate) {
                return bad(format!("final_learning_rate {lr} must lie in [0, learning_rate]"));
            }
        }
        if self.hidden.contains(&0) {
            return bad("hidden widths must be positive".into());
        }
        Ok(())
    }

    /// Step size used at `epoch`.
    pub fn learning_rate_at(&self, epoch: usize) -> f64 {
        match self.final_learning_rate {
            None => self.learning_rate,
            Some(end) => {
                let progress = epoch as f64 / (self.epochs.max(2) - 1) as f64;
                end + 0.5 * (self.learning_rate - end) * (1.0 + (std::f64::consts::PI * progress).cos())
            }
        }
    }

    pub fn layer_sizes(&self) -> Vec<usize> {
        let n = self.patch.dim();
        let mut sizes = vec![n];
        sizes.extend(&self.hidden);
        sizes.push(n);
        sizes
    }
}

/// Adam with `β1 = 0.9`, `β2 = 0.999`, `ε = 1e-8`.
#[derive(Debug, Clone)]
pub struct Adam {
    lr: f64,
    m: Vec<f64>,
    v: Vec<f64>,
    t: i32,
}

impl Adam {
    const BETA1: f64 = 0.9;
    const BETA2: f64 = 0.999;
    const EPS: f64 = 1e-8;

    pub fn new(params: usize, lr: f64) -> Self {
        Self {
            lr,
            m: vec![0.0; params],
            v: vec![0.0; params],
            t: 0,
        }
    }

    pub fn set_learning_rate(&mut self, lr: f64) {
        self.lr = lr;
    }

    pub fn step(&mut self, params: &mut [f64], grad: &[f64]) {
        self.t += 1;
        let c1 = 1.0 - Self::BETA1.powi(self.t);
        let c2 = 1.0 - Self::BETA2.powi(self.t);
        for ((p, g), (m, v)) in params
            .iter_mut()
            .zip(grad)
            .zip(self.m.iter_mut().zip(self.v.iter_mut()))
        {
            *m = Self::BETA1 * *m + (1.0 - Self::BETA1) * g;
            *v = Self::BETA2 * *v + (1.0 - Self::BETA2) * g * g;
            *p -= self.lr * (*m / c1) / ((*v / c2).sqrt() + Self::EPS);
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CurvePoint {
    pub epoch: usize,
    pub loss: LossBreakdown,
}

#[derive(Debug, Clone)]
pub struct TrainedUnitManifolds {
    pub model: Mlp,
    pub config: TrainingConfig,
    pub final_loss: LossBreakdown,
    /// Loss of each epoch's minibatch before its update.
    pub training_curve: Vec<CurvePoint>,
    pub warnings: Vec<String>,
}

/// What a checkpoint file holds: everything but the curve.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Checkpoint {
    pub model: Mlp,
    pub config: TrainingConfig,
    pub final_loss: LossBreakdown,
    pub warnings: Vec<String>,
}

impl Checkpoint {
    pub fn read<R: Read>(reader: R) -> Result<Self> {
        let ckpt: Checkpoint = serde_json::from_reader(reader)?;
        ckpt.config.validate()?;
        if ckpt.model.input_dim() != ckpt.config.patch.dim() {
            return Err(Error::InvalidConfig("model and patch dimensions differ".into()));
        }
        Ok(ckpt)
    }
}

impl TrainedUnitManifolds {
    pub fn checkpoint(&self) -> Checkpoint {
        Checkpoint {
            model: self.model.clone(),
            config: self.config.clone(),
            final_loss: self.final_loss.clone(),
            warnings: self.warnings.clone(),
        }
    }

    pub fn write_checkpoint<W: Write>(&self, out: W) -> Result<()> {
        serde_json::to_writer_pretty(out, &self.checkpoint())?;
        Ok(())
    }

    /// Columns `epoch,total,unit_1..unit_N,orth_i_j...`.
    pub fn write_curve_csv<W: Write>(&self, out: W) -> Result<()> {
        let k = self.model.output_dim();
        let mut header = vec!["epoch".to_string(), "total".to_string()];
        header.extend((1..=k).map(|i| format!("unit_{i}")));
        for i in 1..=k {
            for j in i + 1..=k {
                header.push(format!("orth_{i}_{j}"));
            }
        }
        let mut w = csv::Writer::from_writer(out);
        w.write_record(&header)?;
        for p in &self.training_curve {
            let mut row = vec![p.epoch.to_string(), p.loss.total.to_string()];
            row.extend(p.loss.unit_terms.iter().chain(&p.loss.orth_terms).map(f64::to_string));
            w.write_record(&row)?;
        }
        w.flush()?;
        Ok(())
    }
}

/// Foliation and equilibrium warnings for training on `patch`.
pub fn patch_warnings(field: &VectorField, patch: &Patch) -> Result<Vec<String>> {
    let report = foliation_check(field, patch)?;
    let mut warnings: Vec<String> = report.warnings.iter().map(|w| w.message(patch)).collect();
    let mut seeds = patch.grid(3);
    seeds.push(patch.center());
    let eq = find_equilibria(field, &seeds)?;
    for p in &eq.points {
        let known = report
            .warnings
            .iter()
            .any(|w| w.witness.iter().zip(&p.state).all(|(a, b)| (a - b).abs() < 1e-6));
        if patch.contains(&p.state) && !known {
            warnings.push(format!("equilibrium {:?} lies inside patch {patch}", p.state));
        }
    }
    Ok(warnings)
}

/// Trains one network whose outputs are unit manifolds of `field` on the patch.
pub fn train(field: &VectorField, config: &TrainingConfig) -> Result<TrainedUnitManifolds> {
    config.validate()?;
    if config.patch.dim() != field.dim() {
        return Err(Error::DimensionMismatch {
            expected: field.dim(),
            got: config.patch.dim(),
        });
    }
    let warnings = patch_warnings(field, &config.patch)?;
    let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
    let mut model = Mlp::xavier(&config.layer_sizes(), &mut rng)?.normalized_to(&config.patch)?;
    let mut params = model.params();
    let mut adam = Adam::new(params.len(), config.learning_rate);
    let mut curve = Vec::with_capacity(config.epochs);
    for epoch in 0..config.epochs {
        let batch: Vec<Vec<f64>> = (0..config.batch_size).map(|_| config.patch.sample(&mut rng)).collect();
        let (breakdown, grad) = loss_and_gradient(&model, field, &batch, config.orth_weight, config.fd_step)?;
        if !breakdown.is_finite() || grad.iter().any(|g| !g.is_finite()) {
            return Err(Error::TrainingDivergence { epoch });
        }
        curve.push(CurvePoint { epoch, loss: breakdown });
        adam.set_learning_rate(config.learning_rate_at(epoch));
        adam.step(&mut params, &grad);
        model.set_params(&params)?;
    }
    let eval: Vec<Vec<f64>> = (0..FINAL_EVAL_POINTS).map(|_| config.patch.sample(&mut rng)).collect();
    let final_loss = loss(&model, field, &eval, config.orth_weight, config.fd_step)?;
    if !final_loss.is_finite() {
        return Err(Error::TrainingDivergence { epoch: config.epochs });
    }
    Ok(TrainedUnitManifolds {
        model,
        config: config.clone(),
        final_loss,
        training_curve: curve,
        warnings,
    })
}
