use std::io::Write;

use serde::Serialize;

use super::{distance, norm, VectorField};
use crate::error::{Error, Result};

/// Sampled trajectory on a uniform time grid starting at `t = 0`.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Orbit {
    pub x0: Vec<f64>,
    pub times: Vec<f64>,
    pub states: Vec<Vec<f64>>,
}

impl Orbit {
    pub fn len(&self) -> usize {
        self.states.len()
    }

    pub fn is_empty(&self) -> bool {
        self.states.is_empty()
    }

    pub fn last(&self) -> &[f64] {
        self.states.last().expect("orbit has at least one sample")
    }

    /// Writes `t,x1,...,xN` rows.
    pub fn write_csv<W: Write>(&self, out: W) -> Result<()> {
        let n = self.x0.len();
        let mut w = csv::Writer::from_writer(out);
        let mut header = vec!["t".to_string()];
        header.extend((1..=n).map(|i| format!("x{i}")));
        w.write_record(&header)?;
        for (t, x) in self.times.iter().zip(&self.states) {
            let mut row = vec![t.to_string()];
            row.extend(x.iter().map(|v| v.to_string()));
            w.write_record(&row)?;
        }
        w.flush()?;
        Ok(())
    }
}

/// Classical fixed-step RK4 over `[0, t_end]` with `steps` steps.
pub fn integrate_orbit(field: &VectorField, x0: &[f64], t_end: f64, steps: usize) -> Result<Orbit> {
    if steps == 0 {
        return Err(Error::InvalidArgument("steps must be at least 1".into()));
    }
    if !(t_end > 0.0 && t_end.is_finite()) {
        return Err(Error::InvalidArgument(format!("t_end must be positive, got {t_end}")));
    }
    field.eval(x0)?;

    let n = x0.len();
    let h = t_end / steps as f64;
    let mut times = Vec::with_capacity(steps + 1);
    let mut states = Vec::with_capacity(steps + 1);
    times.push(0.0);
    states.push(x0.to_vec());

    let mut x = x0.to_vec();
    let mut tmp = vec![0.0; n];
    for k in 0..steps {
        let k1 = field.eval_raw(&x);
        axpy_into(&mut tmp, &x, 0.5 * h, &k1);
        let k2 = field.eval_raw(&tmp);
        axpy_into(&mut tmp, &x, 0.5 * h, &k2);
        let k3 = field.eval_raw(&tmp);
        axpy_into(&mut tmp, &x, h, &k3);
        let k4 = field.eval_raw(&tmp);
        for i in 0..n {
            x[i] += h / 6.0 * (k1[i] + 2.0 * k2[i] + 2.0 * k3[i] + k4[i]);
        }
        if x.iter().any(|v| !v.is_finite()) {
            return Err(Error::Divergence {
                last_valid_time: times[k],
            });
        }
        // Exact multiple avoids drift in the time grid.
        times.push(if k + 1 == steps { t_end } else { (k + 1) as f64 * h });
        states.push(x.clone());
    }

    Ok(Orbit {
        x0: x0.to_vec(),
        times,
        states,
    })
}

fn axpy_into(out: &mut [f64], x: &[f64], a: f64, y: &[f64]) {
    for ((o, xi), yi) in out.iter_mut().zip(x).zip(y) {
        *o = xi + a * yi;
    }
}

/// Why an orbit failed the simple-curve check.
#[derive(Debug, Clone, PartialEq, Serialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Violation {
    /// Samples `i` and `j` (non-adjacent) are closer than the tolerance.
    SelfIntersection { i: usize, j: usize, distance: f64 },
    /// `|P(x)|` at sample `index` is below the tolerance.
    NearEquilibrium { index: usize, speed: f64 },
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SimpleOrbitCheck {
    pub simple: bool,
    pub first_violation: Option<Violation>,
}

/// Checks that a sampled orbit is a simple curve away from equilibria.
///
/// Equilibrium proximity is checked first, then pairwise sample distances
/// for `|i - j| > 1` in lexicographic order.
pub fn is_simple_orbit(field: &VectorField, orbit: &Orbit, tol: f64) -> Result<SimpleOrbitCheck> {
    if orbit.len() < 2 {
        return Err(Error::InvalidArgument("orbit needs at least 2 samples".into()));
    }
    for (index, x) in orbit.states.iter().enumerate() {
        let speed = norm(&field.eval(x)?);
        if speed < tol {
            return Ok(SimpleOrbitCheck {
                simple: false,
                first_violation: Some(Violation::NearEquilibrium { index, speed }),
            });
        }
    }
    let s = &orbit.states;
    for i in 0..s.len() {
        for j in i + 2..s.len() {
            let d = distance(&s[i], &s[j]);
            if d < tol {
                return Ok(SimpleOrbitCheck {
                    simple: false,
                    first_violation: Some(Violation::SelfIntersection { i, j, distance: d }),
                });
            }
        }
    }
    Ok(SimpleOrbitCheck {
        simple: true,
        first_violation: None,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dynamics::{BuiltinSystem, LinearSystem};
    use std::f64::consts::PI;

    fn unit_speed() -> VectorField {
        VectorField::new("unit", 1, |_| vec![1.0])
    }

    #[test]
    fn constant_velocity_is_exact() {
        let orbit = integrate_orbit(&unit_speed(), &[0.0], 1.0, 10).unwrap();
        assert_eq!(orbit.len(), 11);
        assert_eq!(orbit.states[0], vec![0.0]);
        assert!((orbit.last()[0] - 1.0).abs() < 1e-15);
        assert_eq!(*orbit.times.last().unwrap(), 1.0);
    }

    #[test]
    fn split_real_system_matches_exponentials() {
        let sys = LinearSystem::from_rows(&[&[3.0, 0.0], &[0.0, 8.0]]).unwrap();
        let orbit = integrate_orbit(&sys.field("split"), &[1.0, 1.0], 0.1, 1000).unwrap();
        let end = orbit.last();
        assert!((end[0] - 0.3f64.exp()).abs() < 1e-8);
        assert!((end[1] - 0.8f64.exp()).abs() < 1e-8);
    }

    #[test]
    fn limit_cycle_half_turn_is_antipodal() {
        let field = BuiltinSystem::LimitCycle.field();
        let a = 0.3f64;
        let orbit = integrate_orbit(&field, &[a.cos(), a.sin()], PI, 2000).unwrap();
        let end = orbit.last();
        assert!((end[0] + a.cos()).abs() < 1e-6 && (end[1] + a.sin()).abs() < 1e-6);
    }

    #[test]
    fn rejects_bad_arguments() {
        assert!(integrate_orbit(&unit_speed(), &[0.0], 1.0, 0).is_err());
        assert!(integrate_orbit(&unit_speed(), &[0.0], 0.0, 1).is_err());
        assert!(integrate_orbit(&unit_speed(), &[0.0, 1.0], 1.0, 1).is_err());
    }

    #[test]
    fn blow_up_reports_last_valid_time() {
        let field = VectorField::new("blowup", 1, |x| vec![x[0] * x[0]]);
        match integrate_orbit(&field, &[1.0], 2.0, 200) {
            Err(Error::Divergence { last_valid_time }) => {
                assert!((0.9..2.0).contains(&last_valid_time), "{last_valid_time}")
            }
            other => panic!("expected divergence, got {other:?}"),
        }
    }

    #[test]
    fn rk4_is_fourth_order() {
        // dx/dt = A x on linear_real against the closed form in eigen-coordinates.
        let field = BuiltinSystem::LinearReal.field();
        let x0 = [2.0, 1.0];
        let t = 0.2;
        let s = std::f64::consts::FRAC_1_SQRT_2;
        let y1 = s * (x0[0] + x0[1]) * (3.0_f64 * t).exp();
        let y2 = s * (x0[0] - x0[1]) * (8.0_f64 * t).exp();
        let exact = [s * (y1 + y2), s * (y1 - y2)];
        let err = |steps| {
            let o = integrate_orbit(&field, &x0, t, steps).unwrap();
            distance(o.last(), &exact)
        };
        let order = (err(20) / err(40)).log2();
        assert!((3.5..=4.5).contains(&order), "order {order}");
    }

    #[test]
    fn linear_orbits_are_homogeneous() {
        let field = BuiltinSystem::LinearComplex.field();
        let base = integrate_orbit(&field, &[1.0, 2.0], 1.0, 100).unwrap();
        for c in [-1.0, 2.0] {
            let scaled = integrate_orbit(&field, &[c, 2.0 * c], 1.0, 100).unwrap();
            for (a, b) in base.states.iter().zip(&scaled.states) {
                assert!((c * a[0] - b[0]).abs() < 1e-9 && (c * a[1] - b[1]).abs() < 1e-9);
            }
        }
    }

    #[test]
    fn straight_line_is_simple() {
        let orbit = integrate_orbit(&unit_speed(), &[0.0], 1.0, 50).unwrap();
        let check = is_simple_orbit(&unit_speed(), &orbit, 1e-6).unwrap();
        assert!(check.simple);
    }

    #[test]
    fn full_period_on_cycle_is_not_simple() {
        let field = BuiltinSystem::LimitCycle.field();
        let orbit = integrate_orbit(&field, &[1.0, 0.0], 2.0 * PI, 400).unwrap();
        let check = is_simple_orbit(&field, &orbit, 1e-6).unwrap();
        assert!(!check.simple);
        assert!(matches!(
            check.first_violation,
            Some(Violation::SelfIntersection { i: 0, j: 400, .. })
        ));
    }

    #[test]
    fn near_equilibrium_is_not_simple() {
        let field = BuiltinSystem::LinearReal.field();
        let orbit = integrate_orbit(&field, &[1e-12, 1e-12], 0.1, 10).unwrap();
        let check = is_simple_orbit(&field, &orbit, 1e-6).unwrap();
        assert!(matches!(
            check.first_violation,
            Some(Violation::NearEquilibrium { index: 0, .. })
        ));
    }

    #[test]
    fn csv_header_and_rows() {
        let orbit = integrate_orbit(&BuiltinSystem::LinearReal.field(), &[1.0, 0.5], 0.1, 2).unwrap();
        let mut buf = Vec::new();
        orbit.write_csv(&mut buf).unwrap();
        let text = String::from_utf8(buf).unwrap();
        let lines: Vec<&str> = text.lines().collect();
        assert_eq!(lines[0], "t,x1,x2");
        assert_eq!(lines.len(), 4);
        assert!(lines[1].starts_with("0,1,0.5"));
    }
}
