use proptest::prelude::*;

use super::*;
use crate::dynamics::integrate_orbit;
use crate::linear_analysis::analytic_charts;

const SYS: BuiltinSystem = BuiltinSystem::LinearReal;

fn y1_kef() -> KoopmanEigenfunction {
    linear_eigenfunctions(SYS).unwrap().remove(0)
}

fn y(x: &[f64]) -> (f64, f64) {
    let s = std::f64::consts::FRAC_1_SQRT_2;
    (s * (x[0] + x[1]), s * (x[0] - x[1]))
}

fn probes(n: usize) -> Vec<Vec<f64>> {
    // Deterministic points in [1,3]^2 kept away from the diagonal.
    (0..n)
        .map(|k| {
            let a = 1.0 + 2.0 * ((k as f64 * 0.618_034) % 1.0);
            let b = 1.0 + 2.0 * ((k as f64 * 0.414_214 + 0.3) % 1.0);
            if (a - b).abs() < 0.05 {
                vec![a, (b + 0.5).min(3.0)]
            } else {
                vec![a, b]
            }
        })
        .collect()
}

#[test]
fn induced_mapping_is_scaled_log() {
    let phi = y1_kef();
    assert_eq!(phi.lambda(), C64::new(3.0, 0.0));
    let s = std::f64::consts::FRAC_1_SQRT_2;
    let x0 = [s, s];
    let g = timemap_from_kef(&phi, &x0).unwrap();
    assert_eq!(g.eval(&x0).unwrap(), C64::new(0.0, 0.0));
    for x in probes(10) {
        let expect = y(&x).0.abs().ln() / 3.0;
        assert!((g.eval(&x).unwrap() - expect).norm() < 1e-12);
    }
}

#[test]
fn same_level_set_gives_zero() {
    let phi = y1_kef();
    let g = timemap_from_kef(&phi, &[2.0, 1.0]).unwrap();
    // (1, 2) has the same y1 as (2, 1).
    assert!(g.eval(&[1.0, 2.0]).unwrap().norm() < 1e-15);
}

#[test]
fn induced_mapping_measures_orbit_time() {
    let field = SYS.field();
    let x0 = [2.0, 1.0];
    let g = timemap_from_kef(&y1_kef(), &x0).unwrap();
    let orbit = integrate_orbit(&field, &x0, 0.1, 100).unwrap();
    assert!((g.eval(orbit.last()).unwrap() - 0.1).norm() < 1e-6);
}

#[test]
fn construction_errors() {
    let one = KoopmanEigenfunction::constant_one(2);
    assert!(matches!(timemap_from_kef(&one, &[1.0, 1.0]), Err(Error::ConservationLaw)));
    // y2 vanishes on the diagonal.
    let y2 = linear_eigenfunctions(SYS).unwrap().remove(1);
    assert!(matches!(timemap_from_kef(&y2, &[1.0, 1.0]), Err(Error::OriginOnZeroSet(_))));
    assert!(matches!(
        timemap_from_kef(&y1_kef(), &[1.0]),
        Err(Error::DimensionMismatch { .. })
    ));
    let g = timemap_from_kef(&y1_kef(), &[2.0, 1.0]).unwrap();
    assert!(matches!(kef_from_timemap(&g, C64::new(0.0, 0.0)), Err(Error::ConservationLaw)));
}

#[test]
fn exponentiating_recovers_normalized_kef() {
    let phi = y1_kef();
    let x0 = [2.0, 1.0];
    let g = timemap_from_kef(&phi, &x0).unwrap();
    let back = kef_from_timemap(&g, phi.lambda()).unwrap();
    let phi0 = phi.eval(&x0).unwrap();
    for x in probes(20) {
        let expect = phi.eval(&x).unwrap() / phi0;
        let got = back.eval(&x).unwrap();
        assert!((got - expect).norm() <= 1e-9 * expect.norm().max(1.0), "{x:?}: {got} vs {expect}");
    }
}

#[test]
fn complex_round_trip_and_colinearity() {
    let field = BuiltinSystem::LinearComplex.field();
    for phi in linear_eigenfunctions(BuiltinSystem::LinearComplex).unwrap() {
        let x0 = [2.0, 1.5];
        let g = timemap_from_kef(&phi, &x0).unwrap();
        let back = kef_from_timemap(&g, phi.lambda()).unwrap();
        let phi0 = phi.eval(&x0).unwrap();
        for x in probes(20) {
            let expect = phi.eval(&x).unwrap() / phi0;
            assert!((back.eval(&x).unwrap() - expect).norm() <= 1e-9 * expect.norm());
            assert!((g.time_derivative(&field, &x).unwrap() - 1.0).norm() < 1e-9);
            // ∇φ = λ φ ∇g
            let dphi = phi.gradient(&x).unwrap();
            let dg = g.gradient(&x).unwrap();
            let scale = phi.lambda() * phi.eval(&x).unwrap();
            let defect: f64 = dphi
                .iter()
                .zip(&dg)
                .map(|(a, b)| (a - scale * b).norm_sqr())
                .sum::<f64>()
                .sqrt();
            let norm: f64 = dphi.iter().map(|a| a.norm_sqr()).sum::<f64>().sqrt();
            assert!(defect <= 1e-8 * norm);
        }
    }
}

#[test]
fn complex_mapping_tracks_branch_along_orbit() {
    let field = BuiltinSystem::LinearImaginary.field();
    let x0 = [2.0, 1.0];
    let phi = linear_eigenfunctions(BuiltinSystem::LinearImaginary).unwrap().remove(0);
    let g = timemap_from_kef(&phi, &x0).unwrap();
    let orbit = integrate_orbit(&field, &x0, 10.0, 4000).unwrap();
    let path = g.eval_path(&orbit.states).unwrap();
    for (t, v) in orbit.times.iter().zip(&path).step_by(200) {
        assert!((v - t).norm() < 1e-6, "t={t}: {v}");
    }
}

#[test]
fn mean_of_canonical_pair_measures_time() {
    let field = SYS.field();
    let x0 = [2.0, 1.0];
    let gs = minimal_time_mappings(SYS, &x0).unwrap();
    let mean = combine_mean(&gs, &[0.5, 0.5]).unwrap();
    let orbit = integrate_orbit(&field, &x0, 0.2, 200).unwrap();
    assert!((mean.eval(orbit.last()).unwrap() - 0.2).norm() < 1e-6);
    assert_eq!(mean.eval(&x0).unwrap(), C64::new(0.0, 0.0));
}

#[test]
fn mean_shortcuts_and_errors() {
    let x0 = [2.0, 1.0];
    let gs = minimal_time_mappings(SYS, &x0).unwrap();
    let same = combine_mean(&[gs[0].clone(), gs[0].clone()], &[0.5, 0.5]).unwrap();
    let first = combine_mean(&gs, &[1.0, 0.0]).unwrap();
    for x in probes(10) {
        let g0 = gs[0].eval(&x).unwrap();
        assert!((same.eval(&x).unwrap() - g0).norm() < 1e-14);
        assert_eq!(first.eval(&x).unwrap(), g0);
    }
    assert!(matches!(combine_mean(&gs, &[0.5, 0.6]), Err(Error::IllegalAction { .. })));
    assert!(matches!(combine_mean(&gs, &[1.0]), Err(Error::InvalidArgument(_))));
    let other = minimal_time_mappings(SYS, &[1.0, 2.0]).unwrap();
    assert!(matches!(
        combine_mean(&[gs[0].clone(), other[0].clone()], &[0.5, 0.5]),
        Err(Error::OriginMismatch)
    ));
}

#[test]
fn geometric_mean_measures_time_on_orbit() {
    let field = SYS.field();
    let x0 = [2.0, 1.0];
    let gs = minimal_time_mappings(SYS, &x0).unwrap();
    let geo = combine_geometric(&gs[0], &gs[1]).unwrap();
    assert_eq!(geo.eval(&x0).unwrap(), C64::new(0.0, 0.0));
    let orbit = integrate_orbit(&field, &x0, 0.3, 300).unwrap();
    for (t, x) in orbit.times.iter().zip(&orbit.states).skip(1).step_by(30) {
        assert!((geo.eval(x).unwrap() - t).norm() < 1e-6);
        assert!((geo.time_derivative(&field, x).unwrap() - 1.0).norm() < 1e-6);
    }
}

#[test]
fn geometric_mean_of_equal_pair_is_identity_on_positive_side() {
    let x0 = [2.0, 1.0];
    let g = minimal_time_mappings(SYS, &x0).unwrap().remove(0);
    let geo = combine_geometric(&g, &g).unwrap();
    for x in probes(20) {
        let v = g.eval(&x).unwrap();
        if v.re > 0.0 {
            assert!((geo.eval(&x).unwrap() - v).norm() < 1e-12);
        }
    }
}

#[test]
fn geometric_mean_guards_negative_product() {
    let x0 = [2.0, 1.0];
    let g = minimal_time_mappings(SYS, &x0).unwrap().remove(0);
    let neg = TimeMapping::custom(
        2,
        &x0,
        {
            let g = g.clone();
            move |x| -g.eval(x).unwrap()
        },
        {
            let g = g.clone();
            move |x| g.gradient(x).unwrap().into_iter().map(|d| -d).collect()
        },
    )
    .unwrap();
    let geo = combine_geometric(&g, &neg).unwrap();
    match geo.eval(&[2.5, 1.0]) {
        Err(Error::BranchGuard { point }) => assert_eq!(point, vec![2.5, 1.0]),
        other => panic!("expected branch guard, got {other:?}"),
    }
}

#[test]
fn pde_residuals() {
    let field = SYS.field();
    let pts = probes(30);
    let phi = y1_kef();
    assert!(kef_pde_residual(&phi, &field, &pts).unwrap().iter().all(|r| *r <= 1e-12));
    let one = KoopmanEigenfunction::constant_one(2);
    assert!(kef_pde_residual(&one, &field, &pts).unwrap().iter().all(|r| *r == 0.0));
    let wrong = KoopmanEigenfunction::new(
        C64::new(4.0, 0.0),
        2,
        {
            let p = phi.clone();
            move |x| p.eval(x).unwrap()
        },
        {
            let p = phi.clone();
            move |x| p.gradient(x).unwrap()
        },
    );
    for (x, r) in pts.iter().zip(kef_pde_residual(&wrong, &field, &pts).unwrap()) {
        assert!((r - y(x).0.abs()).abs() < 1e-12);
    }
}

#[test]
fn group_operations_preserve_pde() {
    let field = SYS.field();
    let pts = probes(30);
    let kefs = linear_eigenfunctions(SYS).unwrap();
    let prod = kefs[0].product(&kefs[1]).unwrap();
    assert_eq!(prod.lambda(), C64::new(11.0, 0.0));
    let worst = |k: &KoopmanEigenfunction| {
        kef_pde_residual(k, &field, &pts)
            .unwrap()
            .into_iter()
            .zip(&pts)
            .map(|(r, x)| r / k.eval(x).unwrap().norm().max(1.0))
            .fold(0.0, f64::max)
    };
    assert!(worst(&prod) <= 1e-8);
    for beta in [2.0, -1.0, 0.5] {
        for k in &kefs {
            let p = k.power(beta);
            assert_eq!(p.lambda(), k.lambda() * beta);
            assert!(worst(&p) <= 1e-8, "beta={beta}");
        }
    }
}

#[test]
fn brunton_eigenfunctions_solve_pde() {
    let field = BuiltinSystem::Brunton.field();
    let pts: Vec<Vec<f64>> = probes(20).into_iter().map(|x| vec![x[0] - 2.0, x[1] - 2.0]).collect();
    for phi in brunton_eigenfunctions() {
        assert!(kef_pde_residual(&phi, &field, &pts).unwrap().iter().all(|r| *r <= 1e-12));
    }
}

#[test]
fn canonical_pair_is_independent() {
    let gs = minimal_time_mappings(SYS, &[2.0, 1.0]).unwrap();
    let srcs: Vec<&TimeMapping> = gs.iter().collect();
    let report = independence_test(&srcs, &probes(50), DEFAULT_SVD_TOL).unwrap();
    assert_eq!(report.verdict, Verdict::Independent);
    assert_eq!(report.points.len(), 50);
    assert!(report.points.iter().all(|p| p.rank == 2));
    let json = serde_json::to_string(&report).unwrap();
    assert!(json.contains("\"verdict\":\"independent\""));
}

#[test]
fn angle_pair_is_dependent() {
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
    let g = acos.gradient_at(&[1.0, 1.0]).unwrap();
    assert!((g[0] + 0.5).norm() < 1e-12 && (g[1] - 0.5).norm() < 1e-12);
    let report = independence_test(&[&acos as &dyn GradientSource, &asin], &[vec![1.0, 1.0]], DEFAULT_SVD_TOL).unwrap();
    assert_eq!(report.verdict, Verdict::Dependent);
    assert_eq!(report.points[0].rank, 1);
    assert!(report.points[0].gram_ratio <= 1e-8);
}

#[test]
fn triples_are_dependent() {
    let x0 = [2.0, 1.0];
    let gs = minimal_time_mappings(SYS, &x0).unwrap();
    let mean = combine_mean(&gs, &[0.25, 0.75]).unwrap();
    let report = independence_test(&[&gs[0], &gs[1], &mean], &probes(20), DEFAULT_SVD_TOL).unwrap();
    assert_eq!(report.verdict, Verdict::Dependent);
    assert!(report.max_rank() <= 2);
}

#[test]
fn singular_points_are_skipped() {
    let gs = minimal_time_mappings(SYS, &[2.0, 1.0]).unwrap();
    let pts = vec![vec![1.0, 1.0], vec![2.0, 1.0]];
    let report = independence_test(&[&gs[0], &gs[1]], &pts, DEFAULT_SVD_TOL).unwrap();
    assert_eq!(report.skipped.len(), 1);
    assert_eq!(report.skipped[0].point, vec![1.0, 1.0]);
    assert!(matches!(
        independence_test(&[&gs[0], &gs[1]], &pts[..1], DEFAULT_SVD_TOL),
        Err(Error::EmptyReport)
    ));
    assert!(matches!(
        independence_test(&[&gs[0]], &pts, DEFAULT_SVD_TOL),
        Err(Error::InvalidArgument(_))
    ));
}

#[test]
fn limit_cycle_mappings_measure_time() {
    let sys = BuiltinSystem::LimitCycle;
    let field = sys.field();
    let x0 = [0.5, 0.2];
    let gs = minimal_time_mappings(sys, &x0).unwrap();
    let orbit = integrate_orbit(&field, &x0, 0.5, 500).unwrap();
    for g in &gs {
        let path = g.eval_path(&orbit.states).unwrap();
        assert!((path.last().unwrap() - 0.5).norm() < 1e-6);
    }
    assert!(analytic_charts(sys).is_ok());
}

fn point_in_patch() -> impl Strategy<Value = Vec<f64>> {
    (1.0..3.0f64, 1.0..3.0f64)
        .prop_filter("off the diagonal", |(a, b)| (a - b).abs() > 1e-3)
        .prop_map(|(a, b)| vec![a, b])
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn mean_keeps_unit_derivative(w in -2.0..3.0f64, x in point_in_patch()) {
        let field = SYS.field();
        let gs = minimal_time_mappings(SYS, &[2.0, 1.0]).unwrap();
        let mean = combine_mean(&gs, &[w, 1.0 - w]).unwrap();
        prop_assert!((mean.time_derivative(&field, &x).unwrap() - 1.0).norm() < 1e-6);
    }

    #[test]
    fn any_three_mappings_have_rank_at_most_two(
        w1 in 0.0..1.0f64,
        w2 in 0.0..1.0f64,
        x in point_in_patch(),
    ) {
        let gs = minimal_time_mappings(BuiltinSystem::LinearComplex, &[2.0, 1.0]).unwrap();
        let a = combine_mean(&gs, &[w1, 1.0 - w1]).unwrap();
        let b = combine_mean(&gs, &[w2, 1.0 - w2]).unwrap();
        let report = independence_test(&[&gs[0], &a, &b], &[x], DEFAULT_SVD_TOL).unwrap();
        prop_assert!(report.points[0].rank <= 2);
        prop_assert!(report.points[0].singular_values.len() <= 2);
    }

    #[test]
    fn round_trip_is_colinear(x in point_in_patch()) {
        let phi = y1_kef();
        let g = timemap_from_kef(&phi, &[2.0, 1.0]).unwrap();
        let back = kef_from_timemap(&g, phi.lambda()).unwrap();
        let dphi = back.gradient(&x).unwrap();
        let dg = g.gradient(&x).unwrap();
        let scale = back.lambda() * back.eval(&x).unwrap();
        let defect: f64 = dphi.iter().zip(&dg).map(|(a, b)| (a - scale * b).norm()).sum();
        let norm: f64 = dphi.iter().map(|a| a.norm()).sum();
        prop_assert!(defect <= 1e-8 * norm);
    }
}
