//! Acceptance run: one line per criterion, nonzero exit if any fails.
//!
//! `cargo test -p koopman-minset --test acceptance`

use std::process::ExitCode;
use std::time::{Duration, Instant};

use koopman_minset::dynamics::{integrate_orbit, BuiltinSystem};
use koopman_minset::linear_analysis::{analytic_charts, CoordinateChart};
use koopman_minset::patch::{GridSpec, Patch};
use koopman_minset::timemaps::{
    combine_geometric, combine_mean, independence_test, kef_pde_residual, linear_eigenfunctions,
    minimal_time_mappings, GradientFn, GradientSource, KoopmanEigenfunction, TimeMapping, DEFAULT_SVD_TOL,
};
use koopman_minset::unitnet::{
    flowbox_from_unit_manifolds, loss, loss_and_gradient, patch_warnings, train, Mlp, TrainedUnitManifolds,
    TrainingConfig, UnitManifoldChart,
};
use koopman_minset::validation::{
    foliation_check, lifted_rank_demo, residual_field, validate_chart, ChartComponent, Thresholds,
};
use koopman_minset::C64;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

const CHARTED: [BuiltinSystem; 4] = [
    BuiltinSystem::LinearReal,
    BuiltinSystem::LinearComplex,
    BuiltinSystem::LinearImaginary,
    BuiltinSystem::LimitCycle,
];

type Outcome = Result<String, String>;

fn check(ok: bool, detail: String) -> Outcome {
    if ok {
        Ok(detail)
    } else {
        Err(detail)
    }
}

fn err<E: std::fmt::Display>(e: E) -> String {
    e.to_string()
}

fn training_patch() -> Patch {
    Patch::new(vec![[4.0, 6.0], [1.0, 3.0]]).unwrap()
}

fn a1() -> Outcome {
    let start = Instant::now();
    let mut worst = (0.0f64, 0.0f64);
    for sys in CHARTED {
        let charts = analytic_charts(sys).map_err(err)?;
        let grid = GridSpec::new(sys.display_patch(), 50).map_err(err)?;
        let res = residual_field(charts.flowbox.as_ref(), &sys.field(), &grid).map_err(err)?;
        worst.0 = worst.0.max(res.stats[0].max_abs);
        worst.1 = worst.1.max(res.stats[1].max_abs);
    }
    let elapsed = start.elapsed();
    check(
        worst.0 <= 1e-9 && worst.1 <= 1e-9 && elapsed < Duration::from_secs(5),
        format!("max |dz1-1| {:.2e}, max |dz2| {:.2e}, {:.2?}", worst.0, worst.1, elapsed),
    )
}

fn a2() -> Outcome {
    let cases = [
        (BuiltinSystem::LinearReal, vec![vec![2.0, 1.0], vec![1.0, 2.5], vec![-1.5, 0.5]]),
        (BuiltinSystem::LimitCycle, vec![vec![0.5, 0.0], vec![2.0, 0.0], vec![-0.3, 1.4]]),
    ];
    let (mut time_err, mut cons_err) = (0.0f64, 0.0f64);
    for (sys, starts) in cases {
        let field = sys.field();
        let charts = analytic_charts(sys).map_err(err)?;
        for x0 in starts {
            let orbit = integrate_orbit(&field, &x0, 0.5, 500).map_err(err)?;
            let z = charts.flowbox.forward_path(&orbit.states).map_err(err)?;
            let g = minimal_time_mappings(sys, &x0).map_err(err)?;
            let mean = combine_mean(&g, &[0.5, 0.5]).map_err(err)?;
            let along = mean.eval_path(&orbit.states).map_err(err)?;
            for ((t, zt), gt) in orbit.times.iter().zip(&z).zip(&along) {
                time_err = time_err.max((zt[0] - z[0][0] - t).norm()).max((gt - t).norm());
                cons_err = cons_err.max((zt[1] - z[0][1]).norm());
            }
        }
    }
    check(
        time_err <= 1e-5 && cons_err <= 1e-6,
        format!("max |z1(t)-z1(0)-t| {time_err:.2e}, max |z2(t)-z2(0)| {cons_err:.2e}"),
    )
}

fn a3(trained: &Result<(TrainedUnitManifolds, Duration), String>) -> Outcome {
    let (t, elapsed) = trained.as_ref().map_err(Clone::clone)?;
    let chart = UnitManifoldChart::new(t.model.clone(), t.config.fd_step).map_err(err)?;
    let comps: Vec<ChartComponent> = (0..2)
        .map(|index| ChartComponent {
            chart: &chart,
            index,
        })
        .collect();
    let refs: Vec<&ChartComponent> = comps.iter().collect();
    let points = training_patch().grid(10);
    let report = independence_test(&refs, &points, DEFAULT_SVD_TOL).map_err(err)?;
    let unit = t.final_loss.unit_sum();
    check(
        *elapsed < Duration::from_secs(300) && unit <= 1e-3 && report.min_rank() == 2 && report.points.len() == 100,
        format!(
            "sum unit {:.3e}, rank {}..{} over {} points, {:.1?}",
            unit,
            report.min_rank(),
            report.max_rank(),
            report.points.len(),
            elapsed
        ),
    )
}

fn a4(trained: &Result<(TrainedUnitManifolds, Duration), String>) -> Outcome {
    let (t, _) = trained.as_ref().map_err(Clone::clone)?;
    let field = BuiltinSystem::LinearReal.field();
    let chart = flowbox_from_unit_manifolds(t).map_err(err)?;
    let holdout = GridSpec::new(Patch::new(vec![[5.0, 7.0], [1.0, 3.0]]).unwrap(), 50).map_err(err)?;
    let res = residual_field(&chart, &field, &holdout).map_err(err)?;
    let (v1, v2) = (res.stats[0].variance, res.stats[1].variance);
    check(
        v1 <= 1e-3 && v2 <= 1e-4,
        format!("held-out [5,7]x[1,3]: var(dz1-1) {v1:.4e} (<= 1e-3), var(dz2) {v2:.4e} (<= 1e-4)"),
    )
}

fn a5(trained: &Result<(TrainedUnitManifolds, Duration), String>) -> Outcome {
    let field = BuiltinSystem::LinearReal.field();
    let patch = Patch::cube(2, 2.5, 3.0).unwrap();
    let before = patch_warnings(&field, &patch).map_err(err)?;
    let named = before.iter().any(|w| w.contains("x1=x2"));
    let report = foliation_check(&field, &patch).map_err(err)?;
    let mut detail = format!("training warning names x1=x2: {named}, check names x1=x2: {}", report.names("x1=x2"));
    let mut flagged = true;
    if let Ok((t, _)) = trained {
        let chart = flowbox_from_unit_manifolds(t).map_err(err)?;
        let grid = GridSpec::new(patch, 20).map_err(err)?;
        let v = validate_chart(&chart, &field, &grid, None, &Thresholds::default()).map_err(err)?;
        flagged = !v.passed && v.foliation_warnings.iter().any(|w| w.label == "x1=x2");
        detail.push_str(&format!(", validation flags it: {flagged}"));
    }
    check(named && report.names("x1=x2") && flagged, detail)
}

fn probe_points(n: usize, lo: f64, hi: f64, seed: u64) -> Vec<Vec<f64>> {
    let patch = Patch::cube(2, lo, hi).unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    (0..n).map(|_| patch.sample(&mut rng)).collect()
}

fn a6() -> Outcome {
    // (i) arccos(x1/r) and arcsin(x2/r) in the open first quadrant.
    let acos = GradientFn::new(2, |x| {
        let r2 = x[0] * x[0] + x[1] * x[1];
        let u = x[0] / r2.sqrt();
        let s = -1.0 / (1.0 - u * u).sqrt() / r2.powf(1.5);
        Ok(vec![C64::new(s * x[1] * x[1], 0.0), C64::new(-s * x[0] * x[1], 0.0)])
    });
    let asin = GradientFn::new(2, |x| {
        let r2 = x[0] * x[0] + x[1] * x[1];
        let v = x[1] / r2.sqrt();
        let s = 1.0 / (1.0 - v * v).sqrt() / r2.powf(1.5);
        Ok(vec![C64::new(-s * x[0] * x[1], 0.0), C64::new(s * x[0] * x[0], 0.0)])
    });
    let pts = probe_points(50, 0.2, 3.0, 1);
    let pair = independence_test(&[&acos as &dyn GradientSource, &asin], &pts, DEFAULT_SVD_TOL).map_err(err)?;
    let pair_ok = pair.max_rank() == 1 && pair.points.len() == 50 && pair.max_gram_ratio() <= 1e-8;

    // (ii) any third mapping adds nothing.
    let mut triple_ok = true;
    let mut triple_ranks = Vec::new();
    for sys in BuiltinSystem::ALL {
        let (x0, pts) = match sys {
            BuiltinSystem::LimitCycle => (vec![2.0, 0.5], probe_points(50, 1.2, 2.5, 2)),
            BuiltinSystem::Brunton => (vec![1.0, 2.0], probe_points(50, 0.5, 3.0, 3)),
            _ => (vec![2.0, 1.0], probe_points(50, 1.0, 3.0, 4)),
        };
        let g = minimal_time_mappings(sys, &x0).map_err(err)?;
        let thirds: Vec<TimeMapping> = vec![
            combine_mean(&g, &[0.3, 0.7]).map_err(err)?,
            combine_mean(&g, &[2.0, -1.0]).map_err(err)?,
            combine_geometric(&g[0], &g[1]).map_err(err)?,
        ];
        for third in &thirds {
            let r = independence_test(&[&g[0], &g[1], third], &pts, DEFAULT_SVD_TOL).map_err(err)?;
            triple_ok &= r.max_rank() <= 2;
            triple_ranks.push(r.max_rank());
        }
    }

    // (iii) products and real powers of eigenfunctions stay eigenfunctions.
    let mut group_worst = 0.0f64;
    for sys in [BuiltinSystem::LinearReal, BuiltinSystem::LinearComplex, BuiltinSystem::LinearImaginary] {
        let field = sys.field();
        let kefs = linear_eigenfunctions(sys).map_err(err)?;
        let pts = probe_points(30, 1.0, 3.0, 5);
        let worst = |k: &KoopmanEigenfunction| -> Result<f64, String> {
            let res = kef_pde_residual(k, &field, &pts).map_err(err)?;
            let mut m = 0.0f64;
            for (r, x) in res.iter().zip(&pts) {
                m = m.max(r / k.eval(x).map_err(err)?.norm().max(1.0));
            }
            Ok(m)
        };
        group_worst = group_worst.max(worst(&kefs[0].product(&kefs[1]).map_err(err)?)?);
        for beta in [2.0, -1.0, 0.5] {
            for k in &kefs {
                group_worst = group_worst.max(worst(&k.power(beta))?);
            }
        }
    }
    check(
        pair_ok && triple_ok && group_worst <= 1e-8,
        format!(
            "arccos/arcsin rank {} (Gram ratio {:.1e}); triple ranks <= {}; group PDE residual {:.1e}",
            pair.max_rank(),
            pair.max_gram_ratio(),
            triple_ranks.iter().max().unwrap_or(&0),
            group_worst
        ),
    )
}

fn a7() -> Outcome {
    let pts: Vec<Vec<f64>> = probe_points(40, -3.0, 3.0, 6).into_iter().filter(|p| p[0] != 0.0).collect();
    let r = lifted_rank_demo(&pts).map_err(err)?;
    check(
        r.max_jacobian_rank <= 2 && r.phi2_pde_residual <= 1e-10,
        format!(
            "mu {} lambda {}: lift rank <= {}, phi2 PDE residual {:.1e}",
            r.mu, r.lambda, r.max_jacobian_rank, r.phi2_pde_residual
        ),
    )
}

fn a8() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(2);
    let patch = training_patch();
    let field = BuiltinSystem::LinearReal.field();
    let mut m = Mlp::xavier(&[2, 4, 2], &mut rng).map_err(err)?.normalized_to(&patch).map_err(err)?;
    let batch: Vec<Vec<f64>> = (0..16).map(|_| patch.sample(&mut rng)).collect();
    let (_, grad) = loss_and_gradient(&m, &field, &batch, 0.1, 1e-4).map_err(err)?;
    let p0 = m.params();
    let eps = 1e-6;
    let mut fd = Vec::with_capacity(p0.len());
    for k in 0..p0.len() {
        let mut p = p0.clone();
        p[k] = p0[k] + eps;
        m.set_params(&p).map_err(err)?;
        let up = loss(&m, &field, &batch, 0.1, 1e-4).map_err(err)?.total;
        p[k] = p0[k] - eps;
        m.set_params(&p).map_err(err)?;
        let down = loss(&m, &field, &batch, 0.1, 1e-4).map_err(err)?.total;
        fd.push((up - down) / (2.0 * eps));
    }
    let diff = grad.iter().zip(&fd).map(|(a, b)| (a - b).powi(2)).sum::<f64>().sqrt();
    let param_rel = diff / fd.iter().map(|v| v * v).sum::<f64>().sqrt();

    let wide = Mlp::xavier(&[2, 16, 16, 2], &mut rng).map_err(err)?.normalized_to(&patch).map_err(err)?;
    let mut input_rel = 0.0f64;
    for _ in 0..50 {
        let x = patch.sample(&mut rng);
        let numeric = wide.input_gradient(&x, 1e-4).map_err(err)?;
        let exact = wide.analytic_input_jacobian(&x).map_err(err)?;
        input_rel = input_rel.max((&numeric - &exact).norm() / exact.norm());
    }

    let cfg = TrainingConfig {
        epochs: 200,
        hidden: vec![16, 16],
        seed: 11,
        ..TrainingConfig::new(patch)
    };
    let a = train(&field, &cfg).map_err(err)?;
    let b = train(&field, &cfg).map_err(err)?;
    let same_params = a.model.params().iter().zip(b.model.params()).all(|(x, y)| x.to_bits() == y.to_bits());
    let same = same_params && a.training_curve == b.training_curve && a.final_loss == b.final_loss;
    check(
        param_rel <= 1e-4 && input_rel <= 1e-6 && same,
        format!("parameter gradient rel {param_rel:.1e}, input gradient rel {input_rel:.1e}, seeded runs identical: {same}"),
    )
}

fn main() -> ExitCode {
    let start = Instant::now();
    let trained = {
        let t0 = Instant::now();
        train(&BuiltinSystem::LinearReal.field(), &TrainingConfig::new(training_patch()))
            .map(|t| (t, t0.elapsed()))
            .map_err(err)
    };
    let results: Vec<(&str, &str, Outcome)> = vec![
        ("A1", "analytic flowbox exactness", a1()),
        ("A2", "time-mapping orbit identity", a2()),
        ("A3", "numeric training", a3(&trained)),
        ("A4", "held-out flowbox variances", a4(&trained)),
        ("A5", "foliation failure detection", a5(&trained)),
        ("A6", "independence properties", a6()),
        ("A7", "lifted rank", a7()),
        ("A8", "numerical hygiene", a8()),
    ];
    let mut failed = 0;
    for (id, name, outcome) in &results {
        match outcome {
            Ok(detail) => println!("{id} PASS {name}: {detail}"),
            Err(detail) => {
                failed += 1;
                println!("{id} FAIL {name}: {detail}");
            }
        }
    }
    println!(
        "{}/{} criteria passed in {:.1?}",
        results.len() - failed,
        results.len(),
        start.elapsed()
    );
    if failed == 0 {
        ExitCode::SUCCESS
    } else {
        ExitCode::FAILURE
    }
}
