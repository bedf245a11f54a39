//! Koopman eigenfunctions, the time mappings they induce, legal
//! combinations of time mappings, and the rank test for independence.
//!
//! A Koopman eigenfunction `φ` with eigenvalue `λ ≠ 0` induces the time
//! mapping `g(x) = (log φ(x) - log φ(x0)) / λ`, which advances at unit rate
//! along every trajectory. Conversely `φ = exp(λ g)`. Gradients of the pair
//! are colinear: `∇φ = λ φ ∇g`.

mod independence;

use std::fmt;
use std::sync::Arc;

use crate::dynamics::{BuiltinSystem, VectorField, BRUNTON_LAMBDA, BRUNTON_MU};
use crate::error::{Error, Result};
use crate::linear_analysis::{analytic_charts, eigendecompose, CoordinateChart, Eigendecomposition, LogBranch};
use crate::C64;

pub use independence::{
    independence_test, GradientFn, GradientSource, IndependenceReport, PointRank, SkippedPoint, Verdict,
    DEFAULT_SVD_TOL,
};

type ScalarFn = dyn Fn(&[f64]) -> C64 + Send + Sync;
type GradFn = dyn Fn(&[f64]) -> Vec<C64> + Send + Sync;

/// Weights of a mean must sum to one within this tolerance.
pub const WEIGHT_SUM_TOL: f64 = 1e-12;

/// A scalar observable with `dφ/dt = λ φ`.
#[derive(Clone)]
pub struct KoopmanEigenfunction {
    lambda: C64,
    dim: usize,
    eval: Arc<ScalarFn>,
    gradient: Arc<GradFn>,
    real_valued: bool,
}

impl fmt::Debug for KoopmanEigenfunction {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("KoopmanEigenfunction")
            .field("lambda", &self.lambda)
            .field("dim", &self.dim)
            .field("real_valued", &self.real_valued)
            .finish()
    }
}

impl KoopmanEigenfunction {
    pub fn new<E, G>(lambda: C64, dim: usize, eval: E, gradient: G) -> Self
    where
        E: Fn(&[f64]) -> C64 + Send + Sync + 'static,
        G: Fn(&[f64]) -> Vec<C64> + Send + Sync + 'static,
    {
        Self {
            lambda,
            dim,
            eval: Arc::new(eval),
            gradient: Arc::new(gradient),
            real_valued: false,
        }
    }

    /// Real-valued eigenfunction with real eigenvalue; induced time
    /// mappings use `ln|φ|`.
    pub fn real<E, G>(lambda: f64, dim: usize, eval: E, gradient: G) -> Self
    where
        E: Fn(&[f64]) -> f64 + Send + Sync + 'static,
        G: Fn(&[f64]) -> Vec<f64> + Send + Sync + 'static,
    {
        Self {
            lambda: C64::new(lambda, 0.0),
            dim,
            eval: Arc::new(move |x| C64::new(eval(x), 0.0)),
            gradient: Arc::new(move |x| gradient(x).into_iter().map(|g| C64::new(g, 0.0)).collect()),
            real_valued: true,
        }
    }

    /// The unit element: `φ ≡ 1`, `λ = 0`.
    pub fn constant_one(dim: usize) -> Self {
        Self::real(0.0, dim, |_| 1.0, move |_| vec![0.0; dim])
    }

    /// `φ = y_i = <w_i, x>` of a linear system.
    pub fn split_coordinate(dec: &Eigendecomposition, i: usize) -> Self {
        let w = dec.dual_vectors[i].clone();
        let w_eval = w.clone();
        let dim = w.len();
        let mut kef = Self::new(
            dec.eigenvalues[i],
            dim,
            move |x| w_eval.iter().zip(x).map(|(wk, xk)| wk * *xk).sum(),
            move |_| w.clone(),
        );
        kef.real_valued = dec.is_real_pair(i);
        kef
    }

    pub fn lambda(&self) -> C64 {
        self.lambda
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn is_real_valued(&self) -> bool {
        self.real_valued
    }

    pub fn eval(&self, x: &[f64]) -> Result<C64> {
        self.check(x)?;
        Ok((self.eval)(x))
    }

    pub fn gradient(&self, x: &[f64]) -> Result<Vec<C64>> {
        self.check(x)?;
        Ok((self.gradient)(x))
    }

    fn check(&self, x: &[f64]) -> Result<()> {
        if x.len() != self.dim {
            return Err(Error::DimensionMismatch {
                expected: self.dim,
                got: x.len(),
            });
        }
        Ok(())
    }

    /// Pointwise product, an eigenfunction for `λ1 + λ2`.
    pub fn product(&self, other: &Self) -> Result<Self> {
        if self.dim != other.dim {
            return Err(Error::DimensionMismatch {
                expected: self.dim,
                got: other.dim,
            });
        }
        let (a, b) = (self.clone(), other.clone());
        let (ga, gb) = (self.clone(), other.clone());
        let mut kef = Self::new(
            self.lambda + other.lambda,
            self.dim,
            move |x| (a.eval)(x) * (b.eval)(x),
            move |x| {
                let (fa, fb) = ((ga.eval)(x), (gb.eval)(x));
                (ga.gradient)(x)
                    .iter()
                    .zip((gb.gradient)(x))
                    .map(|(da, db)| da * fb + fa * db)
                    .collect()
            },
        );
        kef.real_valued = self.real_valued && other.real_valued;
        Ok(kef)
    }

    /// `φ^β` on the principal branch, an eigenfunction for `β λ`.
    pub fn power(&self, beta: f64) -> Self {
        let (a, ga) = (self.clone(), self.clone());
        let mut kef = Self::new(
            self.lambda * beta,
            self.dim,
            move |x| (a.eval)(x).powf(beta),
            move |x| {
                let scale = (ga.eval)(x).powf(beta - 1.0) * beta;
                (ga.gradient)(x).iter().map(|d| d * scale).collect()
            },
        );
        kef.real_valued = self.real_valued && beta.fract() == 0.0;
        kef
    }

    /// `∇φ · P - λ φ`.
    pub fn pde_defect(&self, field: &VectorField, x: &[f64]) -> Result<C64> {
        let p = field.eval(x)?;
        let g = self.gradient(x)?;
        let drift: C64 = g.iter().zip(&p).map(|(gi, pi)| gi * *pi).sum();
        Ok(drift - self.lambda * self.eval(x)?)
    }
}

/// `|∇φ(x) · P(x) - λ φ(x)|` at each point.
pub fn kef_pde_residual(phi: &KoopmanEigenfunction, field: &VectorField, points: &[Vec<f64>]) -> Result<Vec<f64>> {
    points
        .iter()
        .map(|x| phi.pde_defect(field, x).map(|d| d.norm()))
        .collect()
}

/// A function with unit time derivative that vanishes at its origin.
#[derive(Clone)]
pub struct TimeMapping {
    dim: usize,
    origin: Vec<f64>,
    repr: Arc<Repr>,
}

enum Repr {
    FromKef {
        phi: KoopmanEigenfunction,
        branch: LogBranch,
        log_origin: C64,
    },
    ChartCoordinate {
        chart: Arc<dyn CoordinateChart>,
        index: usize,
        offset: C64,
    },
    Mean {
        parts: Vec<TimeMapping>,
        weights: Vec<f64>,
    },
    Geometric(TimeMapping, TimeMapping),
    Custom {
        eval: Arc<ScalarFn>,
        gradient: Arc<GradFn>,
        offset: C64,
    },
}

impl fmt::Debug for TimeMapping {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let kind = match self.repr.as_ref() {
            Repr::FromKef { .. } => "from_kef",
            Repr::ChartCoordinate { .. } => "chart_coordinate",
            Repr::Mean { .. } => "mean",
            Repr::Geometric(..) => "geometric",
            Repr::Custom { .. } => "custom",
        };
        f.debug_struct("TimeMapping")
            .field("kind", &kind)
            .field("origin", &self.origin)
            .finish()
    }
}

fn log_on(branch: LogBranch, v: C64) -> C64 {
    match branch {
        LogBranch::RealAbs => C64::new(v.re.abs().ln(), 0.0),
        LogBranch::Principal => v.ln(),
    }
}

impl TimeMapping {
    /// Coordinate `index` of a canonical chart, shifted to vanish at `origin`.
    pub fn from_chart(chart: Arc<dyn CoordinateChart>, index: usize, origin: &[f64]) -> Result<Self> {
        if index >= chart.output_dim() {
            return Err(Error::InvalidArgument(format!(
                "chart has {} coordinates, asked for {index}",
                chart.output_dim()
            )));
        }
        let offset = chart.forward(origin)?[index];
        Ok(Self {
            dim: chart.input_dim(),
            origin: origin.to_vec(),
            repr: Arc::new(Repr::ChartCoordinate { chart, index, offset }),
        })
    }

    /// Arbitrary mapping from closures; shifted so it vanishes at `origin`.
    pub fn custom<E, G>(dim: usize, origin: &[f64], eval: E, gradient: G) -> Result<Self>
    where
        E: Fn(&[f64]) -> C64 + Send + Sync + 'static,
        G: Fn(&[f64]) -> Vec<C64> + Send + Sync + 'static,
    {
        if origin.len() != dim {
            return Err(Error::DimensionMismatch {
                expected: dim,
                got: origin.len(),
            });
        }
        let offset = eval(origin);
        Ok(Self {
            dim,
            origin: origin.to_vec(),
            repr: Arc::new(Repr::Custom {
                eval: Arc::new(eval),
                gradient: Arc::new(gradient),
                offset,
            }),
        })
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn origin(&self) -> &[f64] {
        &self.origin
    }

    pub fn eval(&self, x: &[f64]) -> Result<C64> {
        self.check(x)?;
        match self.repr.as_ref() {
            Repr::FromKef {
                phi,
                branch,
                log_origin,
            } => {
                let v = (phi.eval)(x);
                if v.norm() == 0.0 {
                    return Err(Error::SingularPoint {
                        coordinate: 0,
                        point: x.to_vec(),
                    });
                }
                Ok((log_on(*branch, v) - log_origin) / phi.lambda)
            }
            Repr::ChartCoordinate { chart, index, offset } => Ok(chart.forward(x)?[*index] - offset),
            Repr::Mean { parts, weights } => {
                let mut acc = C64::new(0.0, 0.0);
                for (g, w) in parts.iter().zip(weights) {
                    acc += g.eval(x)? * *w;
                }
                Ok(acc)
            }
            Repr::Geometric(a, b) => geometric_value(a.eval(x)?, b.eval(x)?, x),
            Repr::Custom { eval, offset, .. } => Ok(eval(x) - offset),
        }
    }

    pub fn gradient(&self, x: &[f64]) -> Result<Vec<C64>> {
        self.check(x)?;
        match self.repr.as_ref() {
            Repr::FromKef { phi, .. } => {
                let v = (phi.eval)(x);
                if v.norm() == 0.0 {
                    return Err(Error::SingularPoint {
                        coordinate: 0,
                        point: x.to_vec(),
                    });
                }
                let scale = (phi.lambda * v).inv();
                Ok((phi.gradient)(x).iter().map(|d| d * scale).collect())
            }
            Repr::ChartCoordinate { chart, index, .. } => {
                let jac = chart.jacobian(x)?;
                Ok(jac.row(*index).iter().copied().collect())
            }
            Repr::Mean { parts, weights } => {
                let mut acc = vec![C64::new(0.0, 0.0); self.dim];
                for (g, w) in parts.iter().zip(weights) {
                    for (a, d) in acc.iter_mut().zip(g.gradient(x)?) {
                        *a += d * *w;
                    }
                }
                Ok(acc)
            }
            Repr::Geometric(a, b) => {
                let (ga, gb) = (a.eval(x)?, b.eval(x)?);
                let root = geometric_value(ga, gb, x)?;
                if root.norm() == 0.0 {
                    return Err(Error::SingularPoint {
                        coordinate: 0,
                        point: x.to_vec(),
                    });
                }
                let denom = root * 2.0;
                Ok(a.gradient(x)?
                    .iter()
                    .zip(b.gradient(x)?)
                    .map(|(da, db)| (da * gb + ga * db) / denom)
                    .collect())
            }
            Repr::Custom { gradient, .. } => Ok(gradient(x)),
        }
    }

    /// Values along a sampled path with logarithm branch jumps removed.
    pub fn eval_path(&self, states: &[Vec<f64>]) -> Result<Vec<C64>> {
        for x in states {
            self.check(x)?;
        }
        match self.repr.as_ref() {
            Repr::FromKef {
                phi,
                branch,
                log_origin,
            } => {
                let period = match branch {
                    LogBranch::RealAbs => None,
                    LogBranch::Principal => Some(C64::new(0.0, 2.0 * std::f64::consts::PI)),
                };
                let mut logs: Vec<C64> = Vec::with_capacity(states.len());
                for x in states {
                    let v = (phi.eval)(x);
                    if v.norm() == 0.0 {
                        return Err(Error::SingularPoint {
                            coordinate: 0,
                            point: x.clone(),
                        });
                    }
                    let mut l = [log_on(*branch, v)];
                    if let Some(prev) = logs.last() {
                        crate::linear_analysis::unwrap_against(&mut l, &[*prev], &[period]);
                    }
                    logs.push(l[0]);
                }
                Ok(logs.into_iter().map(|l| (l - log_origin) / phi.lambda).collect())
            }
            Repr::ChartCoordinate { chart, index, offset } => Ok(chart
                .forward_path(states)?
                .into_iter()
                .map(|y| y[*index] - offset)
                .collect()),
            Repr::Mean { parts, weights } => {
                let mut acc = vec![C64::new(0.0, 0.0); states.len()];
                for (g, w) in parts.iter().zip(weights) {
                    for (a, v) in acc.iter_mut().zip(g.eval_path(states)?) {
                        *a += v * *w;
                    }
                }
                Ok(acc)
            }
            Repr::Geometric(a, b) => {
                let pa = a.eval_path(states)?;
                let pb = b.eval_path(states)?;
                pa.into_iter()
                    .zip(pb)
                    .zip(states)
                    .map(|((ga, gb), x)| geometric_value(ga, gb, x))
                    .collect()
            }
            Repr::Custom { .. } => states.iter().map(|x| self.eval(x)).collect(),
        }
    }

    /// `<∇g(x), P(x)>`; equals one for a valid time mapping.
    pub fn time_derivative(&self, field: &VectorField, x: &[f64]) -> Result<C64> {
        let p = field.eval(x)?;
        Ok(self.gradient(x)?.iter().zip(&p).map(|(g, pi)| g * *pi).sum())
    }

    fn check(&self, x: &[f64]) -> Result<()> {
        if x.len() != self.dim {
            return Err(Error::DimensionMismatch {
                expected: self.dim,
                got: x.len(),
            });
        }
        Ok(())
    }
}

fn geometric_value(a: C64, b: C64, x: &[f64]) -> Result<C64> {
    let p = a * b;
    // Keeps the principal square root away from its cut.
    if p.re < -1e-12 * p.norm().max(f64::MIN_POSITIVE) {
        return Err(Error::BranchGuard { point: x.to_vec() });
    }
    Ok(p.sqrt())
}

/// The time mapping induced by an eigenfunction with reference state `x0`.
pub fn timemap_from_kef(phi: &KoopmanEigenfunction, x0: &[f64]) -> Result<TimeMapping> {
    if phi.lambda.norm() == 0.0 {
        return Err(Error::ConservationLaw);
    }
    let v0 = phi.eval(x0)?;
    if v0.norm() == 0.0 {
        return Err(Error::OriginOnZeroSet(x0.to_vec()));
    }
    let branch = if phi.real_valued && phi.lambda.im == 0.0 {
        LogBranch::RealAbs
    } else {
        LogBranch::Principal
    };
    Ok(TimeMapping {
        dim: phi.dim,
        origin: x0.to_vec(),
        repr: Arc::new(Repr::FromKef {
            phi: phi.clone(),
            branch,
            log_origin: log_on(branch, v0),
        }),
    })
}

/// `φ = exp(λ g)`, normalized so that `φ(x0) = 1`.
pub fn kef_from_timemap(g: &TimeMapping, lambda: C64) -> Result<KoopmanEigenfunction> {
    if lambda.norm() == 0.0 {
        return Err(Error::ConservationLaw);
    }
    let (ge, gg) = (g.clone(), g.clone());
    Ok(KoopmanEigenfunction::new(
        lambda,
        g.dim,
        move |x| (lambda * ge.eval(x).unwrap_or(C64::new(f64::NAN, f64::NAN))).exp(),
        move |x| {
            let phi = (lambda * gg.eval(x).unwrap_or(C64::new(f64::NAN, f64::NAN))).exp();
            match gg.gradient(x) {
                Ok(d) => d.iter().map(|di| di * lambda * phi).collect(),
                Err(_) => vec![C64::new(f64::NAN, f64::NAN); gg.dim],
            }
        },
    ))
}

fn shared_origin(gs: &[&TimeMapping]) -> Result<()> {
    let first = gs[0];
    for g in &gs[1..] {
        if g.dim != first.dim {
            return Err(Error::DimensionMismatch {
                expected: first.dim,
                got: g.dim,
            });
        }
        if g.origin != first.origin {
            return Err(Error::OriginMismatch);
        }
    }
    Ok(())
}

/// Weighted mean `Σ w_k g_k` with `Σ w_k = 1`, a legal action.
pub fn combine_mean(gs: &[TimeMapping], weights: &[f64]) -> Result<TimeMapping> {
    if gs.is_empty() || gs.len() != weights.len() {
        return Err(Error::InvalidArgument(format!(
            "need one weight per mapping, got {} mappings and {} weights",
            gs.len(),
            weights.len()
        )));
    }
    shared_origin(&gs.iter().collect::<Vec<_>>())?;
    let sum: f64 = weights.iter().sum();
    if (sum - 1.0).abs() > WEIGHT_SUM_TOL {
        return Err(Error::IllegalAction { sum });
    }
    let nonzero: Vec<usize> = (0..weights.len()).filter(|&k| weights[k] != 0.0).collect();
    if let [only] = nonzero.as_slice() {
        if weights[*only] == 1.0 {
            return Ok(gs[*only].clone());
        }
    }
    Ok(TimeMapping {
        dim: gs[0].dim,
        origin: gs[0].origin.clone(),
        repr: Arc::new(Repr::Mean {
            parts: gs.to_vec(),
            weights: weights.to_vec(),
        }),
    })
}

/// `sqrt(g1 g2)`. Unit time derivative holds on the orbit of the shared
/// origin, where both factors equal the elapsed time.
pub fn combine_geometric(g1: &TimeMapping, g2: &TimeMapping) -> Result<TimeMapping> {
    shared_origin(&[g1, g2])?;
    Ok(TimeMapping {
        dim: g1.dim,
        origin: g1.origin.clone(),
        repr: Arc::new(Repr::Geometric(g1.clone(), g2.clone())),
    })
}

/// The two eigenfunctions `φ1 = x1` (eigenvalue μ) and
/// `φ2 = x2 - λ/(λ - 2μ) x1^2` (eigenvalue λ) of the Brunton system.
pub fn brunton_eigenfunctions() -> [KoopmanEigenfunction; 2] {
    let (mu, lambda) = (BRUNTON_MU, BRUNTON_LAMBDA);
    let c = lambda / (lambda - 2.0 * mu);
    [
        KoopmanEigenfunction::real(mu, 2, |x| x[0], |_| vec![1.0, 0.0]),
        KoopmanEigenfunction::real(
            lambda,
            2,
            move |x| x[1] - c * x[0] * x[0],
            move |x| vec![-2.0 * c * x[0], 1.0],
        ),
    ]
}

/// N independent time mappings through `x0` for a built-in system.
///
/// Charted systems use the canonical chart coordinates; the Brunton system
/// uses the mappings induced by its two polynomial eigenfunctions.
pub fn minimal_time_mappings(system: BuiltinSystem, x0: &[f64]) -> Result<Vec<TimeMapping>> {
    if system == BuiltinSystem::Brunton {
        return brunton_eigenfunctions()
            .iter()
            .map(|phi| timemap_from_kef(phi, x0))
            .collect();
    }
    let charts = analytic_charts(system)?;
    (0..charts.canonical.output_dim())
        .map(|i| TimeMapping::from_chart(charts.canonical.clone(), i, x0))
        .collect()
}

/// Eigenfunctions `y_i` of a linear built-in system.
pub fn linear_eigenfunctions(system: BuiltinSystem) -> Result<Vec<KoopmanEigenfunction>> {
    let sys = system
        .linear()
        .ok_or_else(|| Error::InvalidArgument(format!("{system} is not linear")))?;
    let dec = eigendecompose(&sys)?;
    Ok((0..dec.dim())
        .map(|i| KoopmanEigenfunction::split_coordinate(&dec, i))
        .collect())
}

#[cfg(test)]
mod tests;
