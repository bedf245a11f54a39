use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::Path;
use std::sync::Arc;

use koopman_minset::dynamics::BuiltinSystem;
use koopman_minset::linear_analysis::{analytic_charts, write_levelset_csv, ChartKind, CoordinateChart};
use koopman_minset::patch::GridSpec;
use koopman_minset::unitnet::{
    flowbox_from_model, flowbox_from_unit_manifolds, train as train_model, Checkpoint, LossBreakdown, TrainingConfig,
    UnitManifoldChart,
};
use koopman_minset::validation::{residual_field, validate_chart, CoordinateStats, ValidationReport};
use serde::Serialize;

use crate::config::RunConfig;
use crate::Failure;

/// Largest analytic residual `analyze` accepts.
const ANALYTIC_TOL: f64 = 1e-6;

fn create(dir: &Path, name: &str) -> Result<BufWriter<File>, Failure> {
    let path = dir.join(name);
    File::create(&path)
        .map(BufWriter::new)
        .map_err(|e| Failure::Usage(format!("cannot write {}: {e}", path.display())))
}

fn write_json<T: Serialize>(dir: &Path, name: &str, value: &T) -> Result<(), Failure> {
    let mut out = create(dir, name)?;
    serde_json::to_writer_pretty(&mut out, value).map_err(koopman_minset::Error::from)?;
    writeln!(out).and_then(|_| out.flush()).map_err(koopman_minset::Error::from)?;
    Ok(())
}

pub fn list_systems() {
    for sys in BuiltinSystem::ALL {
        println!("{}", sys.listing());
    }
}

#[derive(Serialize)]
struct ChartResiduals {
    chart: String,
    description: String,
    target: Vec<f64>,
    evaluated: usize,
    skipped: usize,
    stats: Vec<CoordinateStats>,
    max_abs: f64,
}

#[derive(Serialize)]
struct AnalyzeReport {
    system: String,
    grid: GridSpec,
    tolerance: f64,
    charts: Vec<ChartResiduals>,
    max_residual: f64,
    passed: bool,
}

pub fn analyze(cfg: &RunConfig) -> Result<(), Failure> {
    let sys = cfg.system()?;
    let charts = analytic_charts(sys)?;
    let field = sys.field();
    let grid = cfg.grid(sys.display_patch())?;
    let dir = cfg.outdir()?;

    for kind in [ChartKind::Split, ChartKind::Canonical, ChartKind::Flowbox] {
        write_levelset_csv(charts.get(kind).as_ref(), &field, &grid, create(&dir, &format!("{kind}.csv"))?)?;
    }
    let mut entries = Vec::new();
    for kind in [ChartKind::Canonical, ChartKind::Flowbox] {
        let chart = charts.get(kind);
        let res = residual_field(chart.as_ref(), &field, &grid)?;
        res.write_csv(create(&dir, &format!("{kind}_residuals.csv"))?)?;
        entries.push(ChartResiduals {
            chart: kind.to_string(),
            description: chart.description(),
            target: res.target.clone(),
            evaluated: res.evaluated(),
            skipped: res.skipped,
            max_abs: res.max_abs(),
            stats: res.stats,
        });
    }
    let max_residual = entries.iter().map(|e| e.max_abs).fold(0.0, f64::max);
    let report = AnalyzeReport {
        system: sys.name().into(),
        grid,
        tolerance: ANALYTIC_TOL,
        charts: entries,
        max_residual,
        passed: max_residual <= ANALYTIC_TOL,
    };
    write_json(&dir, "residuals.json", &report)?;
    println!("{}: max residual {:.3e} over {}", sys, max_residual, dir.display());
    if report.passed {
        Ok(())
    } else {
        Err(Failure::Unmet(format!("max residual {max_residual:.3e} exceeds {ANALYTIC_TOL:e}")))
    }
}

#[derive(Serialize)]
struct TrainReport<'a> {
    system: &'a str,
    config: &'a TrainingConfig,
    final_loss: &'a LossBreakdown,
    warnings: &'a [String],
    holdout: Option<ValidationReport>,
}

pub fn train(cfg: &RunConfig) -> Result<(), Failure> {
    let sys = cfg.system()?;
    let config = cfg.training()?;
    let field = sys.field();
    if config.patch.dim() != field.dim() {
        return Err(Failure::Usage(format!(
            "patch has {} axes but {sys} has dimension {}",
            config.patch.dim(),
            field.dim()
        )));
    }
    let dir = cfg.outdir()?;
    for w in koopman_minset::unitnet::patch_warnings(&field, &config.patch)? {
        eprintln!("warning: {w}");
    }
    let trained = train_model(&field, &config)?;
    if !trained.final_loss.is_finite() {
        return Err(Failure::Diverged("final loss is not finite".into()));
    }
    trained.write_checkpoint(create(&dir, "checkpoint.json")?)?;
    trained.write_curve_csv(create(&dir, "curve.csv")?)?;

    let holdout = match &cfg.holdout_patch {
        Some(b) => {
            let grid = GridSpec::new(b.0.clone(), cfg.resolution.unwrap_or(crate::config::DEFAULT_RESOLUTION))?;
            let learned = flowbox_from_unit_manifolds(&trained)?;
            let analytic = analytic_charts(sys).ok();
            let reference = analytic.as_ref().map(|c| c.flowbox.as_ref() as &dyn CoordinateChart);
            Some(validate_chart(&learned, &field, &grid, reference, &cfg.thresholds())?)
        }
        None => None,
    };
    let report = TrainReport {
        system: sys.name(),
        config: &trained.config,
        final_loss: &trained.final_loss,
        warnings: &trained.warnings,
        holdout,
    };
    write_json(&dir, "train_report.json", &report)?;
    println!(
        "{sys}: final loss {:.4e} (unit {:.4e}) after {} epochs",
        trained.final_loss.total,
        trained.final_loss.unit_sum(),
        config.epochs
    );
    if let Some(h) = &report.holdout {
        println!("holdout {}: {}", if h.passed { "passed" } else { "failed" }, h.failures.join("; "));
    }
    Ok(())
}

fn read_checkpoint(path: &Path) -> Result<Checkpoint, Failure> {
    let file = File::open(path).map_err(|e| Failure::Usage(format!("cannot open {}: {e}", path.display())))?;
    Checkpoint::read(std::io::BufReader::new(file))
        .map_err(|e| Failure::Usage(format!("bad checkpoint {}: {e}", path.display())))
}

fn checkpoint_for(cfg: &RunConfig, sys: BuiltinSystem) -> Result<Option<Checkpoint>, Failure> {
    let Some(path) = &cfg.checkpoint else {
        return Ok(None);
    };
    let ckpt = read_checkpoint(path)?;
    if ckpt.model.input_dim() != sys.dim() {
        return Err(Failure::Usage(format!(
            "checkpoint model takes {} inputs but {sys} has dimension {}",
            ckpt.model.input_dim(),
            sys.dim()
        )));
    }
    Ok(Some(ckpt))
}

pub fn validate(cfg: &RunConfig) -> Result<(), Failure> {
    let sys = cfg.system()?;
    let ckpt = checkpoint_for(cfg, sys)?
        .ok_or_else(|| Failure::Usage("validate needs a checkpoint (use --checkpoint)".into()))?;
    let field = sys.field();
    let grid = cfg.grid(ckpt.config.patch.clone())?;
    if grid.patch.dim() != sys.dim() {
        return Err(Failure::Usage(format!("patch has {} axes, {sys} needs {}", grid.patch.dim(), sys.dim())));
    }
    let dir = cfg.outdir()?;
    let learned = flowbox_from_model(ckpt.model, ckpt.config.fd_step)?;
    let analytic = analytic_charts(sys).ok();
    let reference = analytic.as_ref().map(|c| c.flowbox.as_ref() as &dyn CoordinateChart);
    let report = validate_chart(&learned, &field, &grid, reference, &cfg.thresholds())?;
    write_json(&dir, "validation.json", &report)?;
    residual_field(&learned, &field, &grid)?.write_csv(create(&dir, "residuals.csv")?)?;

    let variances: Vec<String> = report
        .unit_residual_stats
        .iter()
        .map(|s| format!("{:.4e}", s.variance))
        .collect();
    println!("{sys}: residual variances [{}]", variances.join(", "));
    for w in &report.foliation_warnings {
        eprintln!("warning: {}", w.message(&grid.patch));
    }
    if report.passed {
        Ok(())
    } else {
        Err(Failure::Unmet(report.failures.join("; ")))
    }
}

pub fn export_levelsets(cfg: &RunConfig) -> Result<(), Failure> {
    let sys = cfg.system()?;
    let field = sys.field();
    let choice = cfg.chart.unwrap_or(crate::config::ChartChoice::Flowbox);
    let kind = ChartKind::from(choice);
    let (chart, fallback, origin): (Arc<dyn CoordinateChart>, _, _) = match checkpoint_for(cfg, sys)? {
        Some(ckpt) => {
            let patch = ckpt.config.patch.clone();
            let chart: Arc<dyn CoordinateChart> = match kind {
                ChartKind::Canonical => Arc::new(UnitManifoldChart::new(ckpt.model, ckpt.config.fd_step)?),
                ChartKind::Flowbox => Arc::new(flowbox_from_model(ckpt.model, ckpt.config.fd_step)?),
                ChartKind::Split => {
                    return Err(Failure::Usage("a learned model has no split chart".into()));
                }
            };
            (chart, patch, "learned")
        }
        None => (analytic_charts(sys)?.get(kind), sys.display_patch(), "analytic"),
    };
    let grid = cfg.grid(fallback)?;
    let dir = cfg.outdir()?;
    let name = format!("levelsets_{kind}.csv");
    let valid = write_levelset_csv(chart.as_ref(), &field, &grid, create(&dir, &name)?)?;
    println!("{sys}: {origin} {kind} chart, {valid}/{} rows valid in {}", grid.len(), dir.join(name).display());
    Ok(())
}
