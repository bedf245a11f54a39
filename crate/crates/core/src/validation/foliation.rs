use serde::{Deserialize, Serialize};

use crate::dynamics::{InvariantSet, VectorField};
use crate::error::Result;
use crate::patch::Patch;

/// An invariant set meeting the closed patch.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FoliationWarning {
    pub label: String,
    pub set: InvariantSet,
    /// A point of the set inside the patch.
    pub witness: Vec<f64>,
}

impl FoliationWarning {
    pub fn message(&self, patch: &Patch) -> String {
        let w: Vec<String> = self.witness.iter().map(|v| format!("{v}")).collect();
        format!(
            "foliation condition violated: invariant set {} meets patch {patch} at ({})",
            self.label,
            w.join(", ")
        )
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FoliationReport {
    pub patch: Patch,
    pub warnings: Vec<FoliationWarning>,
    /// Set when the field has no invariant-set catalog to check against.
    pub notice: Option<String>,
}

impl FoliationReport {
    pub fn names(&self, label: &str) -> bool {
        self.warnings.iter().any(|w| w.label == label)
    }
}

/// Checks every registered invariant set of `field` against the closed patch.
pub fn foliation_check(field: &VectorField, patch: &Patch) -> Result<FoliationReport> {
    let Some(sets) = field.invariant_sets() else {
        return Ok(FoliationReport {
            patch: patch.clone(),
            warnings: Vec::new(),
            notice: Some(format!(
                "no invariant-set catalog registered for {}; foliation condition not checked",
                field.name()
            )),
        });
    };
    let warnings = sets
        .iter()
        .filter_map(|set| {
            intersection_witness(set, patch).map(|witness| FoliationWarning {
                label: set.label(),
                set: set.clone(),
                witness,
            })
        })
        .collect();
    Ok(FoliationReport {
        patch: patch.clone(),
        warnings,
        notice: None,
    })
}

/// A point of `set` inside `patch`, if there is one.
pub fn intersection_witness(set: &InvariantSet, patch: &Patch) -> Option<Vec<f64>> {
    match set {
        InvariantSet::Point { at } => (at.len() == patch.dim() && patch.contains(at)).then(|| at.clone()),
        InvariantSet::Line { through, direction } => clip_line(through, direction, patch),
        InvariantSet::Circle { center, radius } => circle_witness(center, *radius, patch),
    }
}

/// Midpoint of the chord of `through + s direction` inside the box.
fn clip_line(p: &[f64], d: &[f64], patch: &Patch) -> Option<Vec<f64>> {
    if p.len() != patch.dim() || d.len() != patch.dim() {
        return None;
    }
    let (mut s_lo, mut s_hi) = (f64::NEG_INFINITY, f64::INFINITY);
    for k in 0..patch.dim() {
        let (lo, hi) = (patch.lo(k), patch.hi(k));
        if d[k] == 0.0 {
            if p[k] < lo || p[k] > hi {
                return None;
            }
            continue;
        }
        let (a, b) = ((lo - p[k]) / d[k], (hi - p[k]) / d[k]);
        s_lo = s_lo.max(a.min(b));
        s_hi = s_hi.min(a.max(b));
    }
    if s_lo > s_hi {
        return None;
    }
    let s = 0.5 * (s_lo + s_hi);
    Some(
        p.iter()
            .zip(d)
            .enumerate()
            .map(|(k, (pk, dk))| (pk + s * dk).clamp(patch.lo(k), patch.hi(k)))
            .collect(),
    )
}

/// Bisection between the nearest point and the farthest corner of the box.
fn circle_witness(c: &[f64; 2], r: f64, patch: &Patch) -> Option<Vec<f64>> {
    if patch.dim() != 2 {
        return None;
    }
    let dist = |x: &[f64]| (x[0] - c[0]).hypot(x[1] - c[1]);
    let near: Vec<f64> = (0..2).map(|k| c[k].clamp(patch.lo(k), patch.hi(k))).collect();
    let far = patch
        .corners()
        .into_iter()
        .max_by(|a, b| dist(a).total_cmp(&dist(b)))
        .expect("a box has corners");
    if dist(&near) > r || dist(&far) < r {
        return None;
    }
    let at = |t: f64| vec![near[0] + t * (far[0] - near[0]), near[1] + t * (far[1] - near[1])];
    let (mut a, mut b) = (0.0, 1.0);
    for _ in 0..100 {
        let m = 0.5 * (a + b);
        if dist(&at(m)) < r {
            a = m;
        } else {
            b = m;
        }
    }
    Some(at(0.5 * (a + b)))
}
