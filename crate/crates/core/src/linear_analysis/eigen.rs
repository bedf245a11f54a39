use std::cmp::Ordering;

use nalgebra::{DMatrix, DVector};
use num_complex::Complex64;
use serde::Serialize;

use crate::dynamics::LinearSystem;
use crate::error::{Error, Result};
use crate::C64;

/// Eigenvalues closer than this are treated as repeated.
pub const REPEATED_TOL: f64 = 1e-9;

/// Eigenpairs of `A` together with the dual basis `<w_i, v_j> = delta_ij`.
///
/// Pairs are sorted by ascending `|Re λ|`, then ascending `Im λ`. Right
/// vectors have unit norm and their first nonzero entry is real positive.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Eigendecomposition {
    pub eigenvalues: Vec<C64>,
    pub right_vectors: Vec<Vec<C64>>,
    pub dual_vectors: Vec<Vec<C64>>,
}

impl Eigendecomposition {
    pub fn dim(&self) -> usize {
        self.eigenvalues.len()
    }

    /// True when pair `i` is real (eigenvalue and dual vector).
    pub fn is_real_pair(&self, i: usize) -> bool {
        self.eigenvalues[i].im == 0.0 && self.dual_vectors[i].iter().all(|c| c.im == 0.0)
    }
}

/// Eigendecomposition of a linear system with distinct eigenvalues.
///
/// 2x2 systems use the closed form; larger ones go through a Schur
/// decomposition followed by SVD null vectors of `A - λI`.
pub fn eigendecompose(sys: &LinearSystem) -> Result<Eigendecomposition> {
    let a = sys.matrix();
    let mut pairs = if a.nrows() == 2 {
        closed_form_2x2(a)?
    } else {
        general(a)?
    };
    pairs.sort_by(|(l1, _), (l2, _)| {
        l1.re
            .abs()
            .partial_cmp(&l2.re.abs())
            .unwrap_or(Ordering::Equal)
            .then(l1.im.partial_cmp(&l2.im).unwrap_or(Ordering::Equal))
    });
    for i in 0..pairs.len() {
        for j in i + 1..pairs.len() {
            if (pairs[i].0 - pairs[j].0).norm() < REPEATED_TOL {
                return Err(Error::Defective {
                    first: fmt_c(pairs[i].0),
                    second: fmt_c(pairs[j].0),
                    tol: REPEATED_TOL,
                });
            }
        }
    }

    let n = pairs.len();
    let right_vectors: Vec<Vec<C64>> = pairs.iter().map(|(_, v)| normalize_phase(v)).collect();
    let v = DMatrix::from_fn(n, n, |i, j| right_vectors[j][i]);
    let w = v
        .try_inverse()
        .ok_or_else(|| Error::Defective {
            first: "eigenvector basis".into(),
            second: "singular".into(),
            tol: REPEATED_TOL,
        })?;
    let dual_vectors = (0..n)
        .map(|i| {
            (0..n)
                .map(|k| {
                    let c = w[(i, k)];
                    // Real pairs keep exactly real duals.
                    if pairs[i].0.im == 0.0 && right_vectors[i].iter().all(|z| z.im == 0.0) {
                        C64::new(c.re, 0.0)
                    } else {
                        c
                    }
                })
                .collect()
        })
        .collect();

    Ok(Eigendecomposition {
        eigenvalues: pairs.into_iter().map(|(l, _)| l).collect(),
        right_vectors,
        dual_vectors,
    })
}

fn closed_form_2x2(m: &DMatrix<f64>) -> Result<Vec<(C64, Vec<C64>)>> {
    let (a, b, c, d) = (m[(0, 0)], m[(0, 1)], m[(1, 0)], m[(1, 1)]);
    let half_trace = 0.5 * (a + d);
    let half_diff = 0.5 * (a - d);
    let disc = half_diff * half_diff + b * c;
    let lambdas = if disc >= 0.0 {
        let s = disc.sqrt();
        [C64::new(half_trace - s, 0.0), C64::new(half_trace + s, 0.0)]
    } else {
        let s = (-disc).sqrt();
        [C64::new(half_trace, -s), C64::new(half_trace, s)]
    };
    if (lambdas[0] - lambdas[1]).norm() < REPEATED_TOL {
        return Err(Error::Defective {
            first: fmt_c(lambdas[0]),
            second: fmt_c(lambdas[1]),
            tol: REPEATED_TOL,
        });
    }
    Ok(lambdas
        .into_iter()
        .map(|l| {
            // Both rows of (A - λI) annihilate the eigenvector; use the larger candidate.
            let c1 = [C64::new(b, 0.0), l - a];
            let c2 = [l - d, C64::new(c, 0.0)];
            let n1 = c1[0].norm_sqr() + c1[1].norm_sqr();
            let n2 = c2[0].norm_sqr() + c2[1].norm_sqr();
            let v = if n1 >= n2 { c1 } else { c2 };
            (l, v.to_vec())
        })
        .collect())
}

fn general(m: &DMatrix<f64>) -> Result<Vec<(C64, Vec<C64>)>> {
    let n = m.nrows();
    let scale = m.norm().max(1.0);
    let eigs = m.clone().complex_eigenvalues();
    let mut out = Vec::with_capacity(n);
    for raw in eigs.iter() {
        let l = if raw.im.abs() <= 1e-14 * scale {
            C64::new(raw.re, 0.0)
        } else {
            *raw
        };
        let v = if l.im == 0.0 {
            let shifted = m - DMatrix::identity(n, n) * l.re;
            real_null_vector(shifted)
                .into_iter()
                .map(|x| C64::new(x, 0.0))
                .collect()
        } else {
            let mc: DMatrix<C64> = m.map(|x| C64::new(x, 0.0));
            complex_null_vector(mc - DMatrix::identity(n, n) * l)
        };
        out.push((l, v));
    }
    Ok(out)
}

fn real_null_vector(m: DMatrix<f64>) -> Vec<f64> {
    let svd = m.svd(false, true);
    let k = argmin(svd.singular_values.iter().copied());
    let v_t = svd.v_t.expect("requested V^T");
    v_t.row(k).iter().copied().collect()
}

fn complex_null_vector(m: DMatrix<C64>) -> Vec<C64> {
    let svd = m.svd(false, true);
    let k = argmin(svd.singular_values.iter().copied());
    let v_t = svd.v_t.expect("requested V^H");
    v_t.row(k).iter().map(|z| z.conj()).collect()
}

fn argmin(values: impl Iterator<Item = f64>) -> usize {
    values
        .enumerate()
        .min_by(|a, b| a.1.partial_cmp(&b.1).unwrap_or(Ordering::Equal))
        .map(|(i, _)| i)
        .unwrap_or(0)
}

/// Unit norm, first nonzero entry real positive.
fn normalize_phase(v: &[C64]) -> Vec<C64> {
    let norm = v.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt();
    let pivot = v
        .iter()
        .find(|z| z.norm() > 1e-12 * norm)
        .copied()
        .unwrap_or(C64::new(1.0, 0.0));
    let rot = pivot.conj() / pivot.norm();
    v.iter()
        .map(|z| {
            let w = z * rot / norm;
            // The pivot is real by construction; drop rounding noise.
            if z == &pivot {
                C64::new(w.re, 0.0)
            } else {
                w
            }
        })
        .collect()
}

fn fmt_c(z: Complex64) -> String {
    format!("{}{:+}i", z.re, z.im)
}

/// `|A v - λ v|` for pair `i`.
pub fn eigen_residual(sys: &LinearSystem, dec: &Eigendecomposition, i: usize) -> f64 {
    let v = DVector::from_column_slice(&dec.right_vectors[i]);
    let av = sys.matrix().map(|x| C64::new(x, 0.0)) * &v;
    (av - v * dec.eigenvalues[i]).norm()
}
