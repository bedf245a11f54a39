use std::sync::Arc;

use nalgebra::DMatrix;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::{KoopmanEigenfunction, TimeMapping};
use crate::error::{Error, Result};
use crate::C64;

/// Singular values below this fraction of the largest count as zero.
pub const DEFAULT_SVD_TOL: f64 = 1e-8;

/// Anything with a gradient at a state.
pub trait GradientSource: Send + Sync {
    fn dim(&self) -> usize;
    fn gradient_at(&self, x: &[f64]) -> Result<Vec<C64>>;
}

impl GradientSource for TimeMapping {
    fn dim(&self) -> usize {
        TimeMapping::dim(self)
    }

    fn gradient_at(&self, x: &[f64]) -> Result<Vec<C64>> {
        self.gradient(x)
    }
}

impl GradientSource for KoopmanEigenfunction {
    fn dim(&self) -> usize {
        KoopmanEigenfunction::dim(self)
    }

    fn gradient_at(&self, x: &[f64]) -> Result<Vec<C64>> {
        self.gradient(x)
    }
}

/// A bare gradient function, e.g. a network's input gradient.
#[derive(Clone)]
pub struct GradientFn {
    dim: usize,
    f: Arc<dyn Fn(&[f64]) -> Result<Vec<C64>> + Send + Sync>,
}

impl GradientFn {
    pub fn new<F>(dim: usize, f: F) -> Self
    where
        F: Fn(&[f64]) -> Result<Vec<C64>> + Send + Sync + 'static,
    {
        Self { dim, f: Arc::new(f) }
    }
}

impl GradientSource for GradientFn {
    fn dim(&self) -> usize {
        self.dim
    }

    fn gradient_at(&self, x: &[f64]) -> Result<Vec<C64>> {
        (self.f)(x)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Verdict {
    /// Full rank at every evaluated point.
    Independent,
    /// Rank deficient at every evaluated point.
    Dependent,
    Mixed,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct PointRank {
    pub point: Vec<f64>,
    pub rank: usize,
    /// Descending.
    pub singular_values: Vec<f64>,
    pub min_singular_value: f64,
    /// `det(G G^H) / Π |g_k|^2`, in `[0, 1]`; zero for parallel gradients.
    pub gram_ratio: f64,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct SkippedPoint {
    pub point: Vec<f64>,
    pub reason: String,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct IndependenceReport {
    pub n_mappings: usize,
    pub dim: usize,
    pub svd_tol: f64,
    pub verdict: Verdict,
    pub points: Vec<PointRank>,
    pub skipped: Vec<SkippedPoint>,
}

impl IndependenceReport {
    pub fn min_rank(&self) -> usize {
        self.points.iter().map(|p| p.rank).min().unwrap_or(0)
    }

    pub fn max_rank(&self) -> usize {
        self.points.iter().map(|p| p.rank).max().unwrap_or(0)
    }

    pub fn max_gram_ratio(&self) -> f64 {
        self.points.iter().map(|p| p.gram_ratio).fold(0.0, f64::max)
    }
}

fn rank_at<S: GradientSource + ?Sized>(sources: &[&S], x: &[f64], svd_tol: f64) -> Result<PointRank> {
    let k = sources.len();
    let n = x.len();
    let mut rows = Vec::with_capacity(k);
    for s in sources {
        let g = s.gradient_at(x)?;
        if g.len() != n {
            return Err(Error::DimensionMismatch {
                expected: n,
                got: g.len(),
            });
        }
        if g.iter().any(|c| !c.re.is_finite() || !c.im.is_finite()) {
            return Err(Error::SingularPoint {
                coordinate: rows.len(),
                point: x.to_vec(),
            });
        }
        rows.push(g);
    }
    let m = DMatrix::from_fn(k, n, |i, j| rows[i][j]);
    let mut sv: Vec<f64> = m.clone().svd(false, false).singular_values.iter().copied().collect();
    sv.sort_by(|a, b| b.total_cmp(a));
    let largest = sv.first().copied().unwrap_or(0.0);
    let rank = sv.iter().filter(|&&s| largest > 0.0 && s > svd_tol * largest).count();

    let gram = &m * m.adjoint();
    let norms: f64 = rows
        .iter()
        .map(|r| r.iter().map(|c| c.norm_sqr()).sum::<f64>())
        .product();
    let gram_ratio = if norms > 0.0 {
        (gram.determinant().norm() / norms).clamp(0.0, 1.0)
    } else {
        0.0
    };
    Ok(PointRank {
        point: x.to_vec(),
        rank,
        min_singular_value: sv.last().copied().unwrap_or(0.0),
        singular_values: sv,
        gram_ratio,
    })
}

/// Rank of the stacked gradients of `sources` at each point.
///
/// Points where any gradient is undefined are skipped and listed.
pub fn independence_test<S: GradientSource + ?Sized>(
    sources: &[&S],
    points: &[Vec<f64>],
    svd_tol: f64,
) -> Result<IndependenceReport> {
    if sources.len() < 2 {
        return Err(Error::InvalidArgument("independence needs at least two mappings".into()));
    }
    if points.is_empty() {
        return Err(Error::InvalidArgument("no probe points".into()));
    }
    if !(svd_tol > 0.0 && svd_tol < 1.0) {
        return Err(Error::InvalidArgument(format!("svd tolerance {svd_tol} outside (0, 1)")));
    }
    let dim = sources[0].dim();
    for s in sources {
        if s.dim() != dim {
            return Err(Error::DimensionMismatch {
                expected: dim,
                got: s.dim(),
            });
        }
    }
    for p in points {
        if p.len() != dim {
            return Err(Error::DimensionMismatch {
                expected: dim,
                got: p.len(),
            });
        }
    }

    let results: Vec<Result<PointRank>> = points.par_iter().map(|x| rank_at(sources, x, svd_tol)).collect();
    let mut ranked = Vec::new();
    let mut skipped = Vec::new();
    for (x, r) in points.iter().zip(results) {
        match r {
            Ok(p) => ranked.push(p),
            Err(e @ (Error::SingularPoint { .. } | Error::BranchGuard { .. })) => skipped.push(SkippedPoint {
                point: x.clone(),
                reason: e.to_string(),
            }),
            Err(e) => return Err(e),
        }
    }
    if ranked.is_empty() {
        return Err(Error::EmptyReport);
    }
    let k = sources.len();
    let full = ranked.iter().filter(|p| p.rank == k).count();
    let verdict = if full == ranked.len() {
        Verdict::Independent
    } else if full == 0 {
        Verdict::Dependent
    } else {
        Verdict::Mixed
    };
    Ok(IndependenceReport {
        n_mappings: k,
        dim,
        svd_tol,
        verdict,
        points: ranked,
        skipped,
    })
}
