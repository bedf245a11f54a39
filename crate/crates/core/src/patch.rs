//! Axis-aligned boxes in state space and regular grids over them.

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Closed axis-aligned box, one `[lo, hi]` pair per axis.
///
/// Serializes as a list of pairs, e.g. `[[4.0, 6.0], [1.0, 3.0]]`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "Vec<[f64; 2]>", into = "Vec<[f64; 2]>")]
pub struct Patch {
    bounds: Vec<[f64; 2]>,
}

impl Patch {
    pub fn new(bounds: Vec<[f64; 2]>) -> Result<Self> {
        if bounds.is_empty() {
            return Err(Error::InvalidConfig("patch needs at least one axis".into()));
        }
        for (axis, [lo, hi]) in bounds.iter().enumerate() {
            if !(lo.is_finite() && hi.is_finite() && lo < hi) {
                return Err(Error::InvalidConfig(format!(
                    "patch axis {axis} is empty or non-finite: [{lo}, {hi}]"
                )));
            }
        }
        Ok(Self { bounds })
    }

    /// Square box `[lo, hi]^dim`.
    pub fn cube(dim: usize, lo: f64, hi: f64) -> Result<Self> {
        Self::new(vec![[lo, hi]; dim])
    }

    pub fn dim(&self) -> usize {
        self.bounds.len()
    }

    pub fn bounds(&self) -> &[[f64; 2]] {
        &self.bounds
    }

    pub fn lo(&self, axis: usize) -> f64 {
        self.bounds[axis][0]
    }

    pub fn hi(&self, axis: usize) -> f64 {
        self.bounds[axis][1]
    }

    pub fn center(&self) -> Vec<f64> {
        self.bounds.iter().map(|[lo, hi]| 0.5 * (lo + hi)).collect()
    }

    pub fn contains(&self, x: &[f64]) -> bool {
        x.len() == self.dim()
            && x.iter()
                .zip(&self.bounds)
                .all(|(v, [lo, hi])| *v >= *lo && *v <= *hi)
    }

    /// True when `other` lies inside `self`.
    pub fn encloses(&self, other: &Patch) -> bool {
        self.dim() == other.dim()
            && self
                .bounds
                .iter()
                .zip(&other.bounds)
                .all(|(a, b)| a[0] <= b[0] && b[1] <= a[1])
    }

    /// Corner points in lexicographic order of (lo, hi) choices.
    pub fn corners(&self) -> Vec<Vec<f64>> {
        let n = self.dim();
        (0..1usize << n)
            .map(|mask| {
                (0..n)
                    .map(|k| self.bounds[k][(mask >> (n - 1 - k)) & 1])
                    .collect()
            })
            .collect()
    }

    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> Vec<f64> {
        self.bounds
            .iter()
            .map(|[lo, hi]| lo + (hi - lo) * rng.gen::<f64>())
            .collect()
    }

    /// Regular grid with `resolution` points per axis including both ends.
    /// The last axis varies fastest.
    pub fn grid(&self, resolution: usize) -> Vec<Vec<f64>> {
        let axes: Vec<Vec<f64>> = self
            .bounds
            .iter()
            .map(|&[lo, hi]| linspace(lo, hi, resolution))
            .collect();
        let mut points = vec![Vec::with_capacity(self.dim())];
        for axis in &axes {
            points = points
                .into_iter()
                .flat_map(|p| {
                    axis.iter().map(move |&v| {
                        let mut q = p.clone();
                        q.push(v);
                        q
                    })
                })
                .collect();
        }
        points
    }
}

impl TryFrom<Vec<[f64; 2]>> for Patch {
    type Error = Error;

    fn try_from(bounds: Vec<[f64; 2]>) -> Result<Self> {
        Patch::new(bounds)
    }
}

impl From<Patch> for Vec<[f64; 2]> {
    fn from(p: Patch) -> Self {
        p.bounds
    }
}

impl std::fmt::Display for Patch {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        let parts: Vec<String> = self
            .bounds
            .iter()
            .map(|[lo, hi]| format!("[{lo},{hi}]"))
            .collect();
        write!(f, "{}", parts.join("x"))
    }
}

pub(crate) fn linspace(lo: f64, hi: f64, n: usize) -> Vec<f64> {
    match n {
        0 => Vec::new(),
        1 => vec![lo],
        _ => (0..n)
            .map(|i| {
                if i == n - 1 {
                    hi
                } else {
                    lo + (hi - lo) * i as f64 / (n - 1) as f64
                }
            })
            .collect(),
    }
}

/// Rectangular evaluation grid.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GridSpec {
    #[serde(rename = "box")]
    pub patch: Patch,
    pub resolution: usize,
}

impl GridSpec {
    pub fn new(patch: Patch, resolution: usize) -> Result<Self> {
        if resolution < 2 {
            return Err(Error::InvalidConfig(format!(
                "grid resolution must be at least 2, got {resolution}"
            )));
        }
        Ok(Self { patch, resolution })
    }

    pub fn points(&self) -> Vec<Vec<f64>> {
        self.patch.grid(self.resolution)
    }

    pub fn len(&self) -> usize {
        self.resolution.pow(self.patch.dim() as u32)
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }
}
