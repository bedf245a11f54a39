//! Run configuration shared by every subcommand.
//!
//! A run is described by an optional JSON file plus command-line flags with
//! the same names; a flag always wins over the file.

use std::fs::File;
use std::io::BufReader;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use clap::{Args, ValueEnum};
use koopman_minset::dynamics::BuiltinSystem;
use koopman_minset::linear_analysis::ChartKind;
use koopman_minset::patch::{GridSpec, Patch};
use koopman_minset::unitnet::TrainingConfig;
use koopman_minset::validation::Thresholds;
use serde::Deserialize;

use crate::Failure;

/// Grid resolution used when neither file nor flags set one.
pub const DEFAULT_RESOLUTION: usize = 50;

/// A patch given as `lo1,hi1,lo2,hi2,...` on the command line.
#[derive(Debug, Clone, Deserialize)]
#[serde(transparent)]
pub struct Bounds(pub Patch);

impl FromStr for Bounds {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let values = s
            .split(',')
            .map(|v| v.trim().parse::<f64>().map_err(|e| format!("`{v}`: {e}")))
            .collect::<Result<Vec<_>, _>>()?;
        if values.is_empty() || values.len() % 2 != 0 {
            return Err(format!("expected lo,hi pairs, got {} numbers", values.len()));
        }
        let bounds = values.chunks(2).map(|c| [c[0], c[1]]).collect();
        Patch::new(bounds).map(Bounds).map_err(|e| e.to_string())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ChartChoice {
    Split,
    Canonical,
    Flowbox,
}

impl From<ChartChoice> for ChartKind {
    fn from(c: ChartChoice) -> Self {
        match c {
            ChartChoice::Split => ChartKind::Split,
            ChartChoice::Canonical => ChartKind::Canonical,
            ChartChoice::Flowbox => ChartKind::Flowbox,
        }
    }
}

/// Every key a run may set. Unset keys fall back to command defaults.
#[derive(Debug, Clone, Default, Args, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    /// Built-in system name, see `list-systems`.
    #[arg(long)]
    pub system: Option<String>,
    /// Output directory; created if missing.
    #[arg(long)]
    pub outdir: Option<PathBuf>,
    /// Patch as `lo1,hi1,lo2,hi2`.
    #[arg(long)]
    pub patch: Option<Bounds>,
    /// Points per axis of evaluation grids.
    #[arg(long)]
    pub resolution: Option<usize>,
    #[arg(long)]
    pub batch_size: Option<usize>,
    #[arg(long)]
    pub epochs: Option<usize>,
    #[arg(long)]
    pub learning_rate: Option<f64>,
    /// Cosine-anneal the learning rate down to this value.
    #[arg(long)]
    pub final_learning_rate: Option<f64>,
    #[arg(long)]
    pub orth_weight: Option<f64>,
    #[arg(long)]
    pub fd_step: Option<f64>,
    #[arg(long)]
    pub seed: Option<u64>,
    /// Hidden layer widths, e.g. `64,64`.
    #[arg(long, value_delimiter = ',')]
    pub hidden: Option<Vec<usize>>,
    /// After training, validate the model on this patch.
    #[arg(long)]
    pub holdout_patch: Option<Bounds>,
    /// Checkpoint written by `train`.
    #[arg(long)]
    pub checkpoint: Option<PathBuf>,
    #[arg(long, value_enum)]
    pub chart: Option<ChartChoice>,
    /// Per-coordinate residual variance bounds, e.g. `1e-3,1e-4`.
    #[arg(long, value_delimiter = ',')]
    pub max_variance: Option<Vec<f64>>,
    #[arg(skip)]
    pub thresholds: Option<Thresholds>,
}

macro_rules! overlay {
    ($base:ident, $top:ident; $($field:ident),*) => {
        RunConfig { $($field: $top.$field.or($base.$field)),* }
    };
}

impl RunConfig {
    pub fn read(path: &Path) -> Result<Self, Failure> {
        let file = File::open(path).map_err(|e| Failure::Usage(format!("cannot open {}: {e}", path.display())))?;
        serde_json::from_reader(BufReader::new(file))
            .map_err(|e| Failure::Usage(format!("bad config {}: {e}", path.display())))
    }

    /// Values of `flags` where set, otherwise those of `self`.
    pub fn overridden_by(self, flags: RunConfig) -> RunConfig {
        let base = self;
        let top = flags;
        overlay!(base, top; system, outdir, patch, resolution, batch_size, epochs, learning_rate,
            final_learning_rate, orth_weight, fd_step, seed, hidden, holdout_patch, checkpoint,
            chart, max_variance, thresholds)
    }

    pub fn system(&self) -> Result<BuiltinSystem, Failure> {
        let name = self
            .system
            .as_deref()
            .ok_or_else(|| Failure::Usage("no system given (use --system)".into()))?;
        name.parse().map_err(Failure::from)
    }

    /// Output directory, created on first use.
    pub fn outdir(&self) -> Result<PathBuf, Failure> {
        let dir = self.outdir.clone().unwrap_or_else(|| PathBuf::from("."));
        std::fs::create_dir_all(&dir)
            .map_err(|e| Failure::Usage(format!("cannot create {}: {e}", dir.display())))?;
        Ok(dir)
    }

    pub fn grid(&self, fallback: Patch) -> Result<GridSpec, Failure> {
        let patch = self.patch.clone().map(|b| b.0).unwrap_or(fallback);
        Ok(GridSpec::new(patch, self.resolution.unwrap_or(DEFAULT_RESOLUTION))?)
    }

    pub fn thresholds(&self) -> Thresholds {
        let mut t = self.thresholds.clone().unwrap_or_default();
        if let Some(v) = &self.max_variance {
            t.max_variance = v.clone();
        }
        t
    }

    pub fn training(&self) -> Result<TrainingConfig, Failure> {
        let patch = self
            .patch
            .clone()
            .ok_or_else(|| Failure::Usage("training needs a patch (use --patch)".into()))?
            .0;
        let mut cfg = TrainingConfig::new(patch);
        macro_rules! set {
            ($($field:ident),*) => {
                $(if let Some(v) = self.$field.clone() { cfg.$field = v; })*
            };
        }
        set!(batch_size, epochs, learning_rate, orth_weight, fd_step, seed, hidden);
        if self.final_learning_rate.is_some() {
            cfg.final_learning_rate = self.final_learning_rate;
        }
        cfg.validate()?;
        Ok(cfg)
    }
}
