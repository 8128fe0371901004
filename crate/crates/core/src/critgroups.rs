//! Critical points and their critical groups.
//!
//! The critical group of `u` at `x0` is computed as
//! `H_k({u <= c} ∩ U, {u <= c} ∩ U \ {x0})` with `U` a grid ball around `x0`,
//! the sublevel set taken with the vertex-max rule and the point removed as
//! the open star of the node. The potential is always replaced by
//! `u(x) - u(x0) - <Du(x0), x - x0>` first, so the critical value is zero.

use alloc::vec::Vec;
use core::fmt;

use crate::cubhom::{build_sublevel_complex, puncture, relative_homology, HomologyResult, NodeRegion};
use crate::symfield::{gradient, hessian, sample, GalleryEntry, GridDomain, NodeIndex, Point, ScalarField, VectorField};
use crate::symlinalg::{index_relative, op_norm, IndexValue, SymMatrix, DEFAULT_EPS_SING};

/// Detections closer than this many cells (Chebyshev) are merged.
pub const DEDUP_RADIUS: usize = 2;
/// Local threshold factor: a node is a candidate when `|Du| <= 5 h |D^2 u|`.
pub const EPS_CRIT_FACTOR: f64 = 5.0;

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum CritError {
    #[error("node {0:?} is on the boundary of the grid")]
    BoundaryNode(NodeIndex),
    #[error("ball of radius {radius} around {center:?} leaves the domain")]
    BallOutsideDomain { center: NodeIndex, radius: f64 },
    #[error("radius {0} is smaller than one grid cell")]
    RadiusTooSmall(f64),
    #[error("critical node is missing from its own sublevel complex; level nudge too small")]
    NodeNotInSublevel,
    #[error("matrix is near-singular")]
    NearSingular,
}

#[derive(Debug, Clone, PartialEq)]
pub struct CriticalPoint {
    pub node: NodeIndex,
    pub location: Point,
    pub value: f64,
    pub gradient_norm: f64,
    /// No other detection within [`DEDUP_RADIUS`] cells.
    pub isolated: bool,
}

/// Critical groups `C_k`, `k = 0..=dim`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct CriticalGroups(pub HomologyResult);

impl CriticalGroups {
    pub fn homology(&self) -> &HomologyResult {
        &self.0
    }

    pub fn betti(&self) -> &[usize] {
        self.0.betti()
    }

    /// `k` when the groups are `δ_{k,·} Z`.
    pub fn morse_index(&self) -> Option<usize> {
        self.0.delta_degree()
    }
}

impl fmt::Display for CriticalGroups {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        self.0.fmt(f)
    }
}

fn chebyshev(a: &NodeIndex, b: &NodeIndex) -> usize {
    (0..3).map(|k| a[k].abs_diff(b[k])).max().unwrap_or(0)
}

fn dedup(u: &ScalarField, g: &VectorField, candidates: Vec<usize>) -> Vec<CriticalPoint> {
    let d = u.domain();
    let idx: Vec<NodeIndex> = candidates.iter().map(|&f| d.unflat(f)).collect();
    let norms: Vec<f64> = candidates.iter().map(|&f| g.norm_at(f)).collect();
    let mut kept: Vec<usize> = Vec::new();
    for i in 0..candidates.len() {
        let is_min = (0..candidates.len())
            .all(|j| j == i || chebyshev(&idx[i], &idx[j]) > DEDUP_RADIUS || norms[i] <= norms[j]);
        if is_min {
            kept.push(i);
        }
    }
    kept.iter()
        .map(|&i| {
            let isolated = kept.iter().all(|&j| j == i || chebyshev(&idx[i], &idx[j]) > DEDUP_RADIUS);
            CriticalPoint {
                node: idx[i],
                location: d.coords(&idx[i]),
                value: u.at(candidates[i]),
                gradient_norm: norms[i],
                isolated,
            }
        })
        .collect()
}

/// Interior nodes with `|g| <= eps_crit`, reduced to local minima of `|g|`
/// within [`DEDUP_RADIUS`] cells.
pub fn find_critical_points(u: &ScalarField, g: &VectorField, eps_crit: f64) -> Vec<CriticalPoint> {
    let d = u.domain();
    let candidates: Vec<usize> = d.interior_nodes().filter(|&f| g.norm_at(f) <= eps_crit).collect();
    dedup(u, g, candidates)
}

/// Like [`find_critical_points`] with the per-node threshold
/// `5 h |D^2 u(node)|`, `h` the largest spacing.
pub fn find_critical_points_local(u: &ScalarField) -> Vec<CriticalPoint> {
    let d = u.domain();
    let g = gradient(u);
    let h = hessian(u);
    let step = d.max_spacing();
    let candidates: Vec<usize> = d
        .interior_nodes()
        .filter(|&f| g.norm_at(f) <= EPS_CRIT_FACTOR * step * op_norm(&h.matrix_at(f)))
        .collect();
    dedup(u, &g, candidates)
}

/// `u(x) - u(x0) - <Du(x0), x - x0>` with the finite-difference gradient.
pub fn shifted_potential(u: &ScalarField, x0: &NodeIndex) -> Result<ScalarField, CritError> {
    let d = u.domain();
    if !d.in_grid(x0) || !d.is_interior(x0) {
        return Err(CritError::BoundaryNode(*x0));
    }
    let f0 = d.flat(x0);
    let g = gradient(u);
    let g0 = g.at(f0);
    let p0 = d.coords(x0);
    let u0 = u.at(f0);
    let dim = d.dim();
    let values = (0..d.node_count())
        .map(|f| {
            let p = d.coords_flat(f);
            let lin: f64 = (0..dim).map(|a| g0[a] * (p[a] - p0[a])).sum();
            if f == f0 {
                0.0
            } else {
                u.at(f) - u0 - lin
            }
        })
        .collect();
    Ok(ScalarField::new(d.clone(), values).expect("shift of a finite field is finite"))
}

fn check_ball(d: &GridDomain, x0: &NodeIndex, radius: f64) -> Result<(), CritError> {
    if !d.in_grid(x0) || !d.is_interior(x0) {
        return Err(CritError::BoundaryNode(*x0));
    }
    if radius.is_nan() || radius < d.max_spacing() {
        return Err(CritError::RadiusTooSmall(radius));
    }
    let p = d.coords(x0);
    for (a, &(lo, hi)) in d.bounds().iter().enumerate() {
        let slack = 1e-12 * (hi - lo);
        if p[a] - radius < lo - slack || p[a] + radius > hi + slack {
            return Err(CritError::BallOutsideDomain { center: *x0, radius });
        }
    }
    Ok(())
}

/// Half the smallest positive gap between values on the ball, capped at
/// `1e-9` times their oscillation.
pub fn level_nudge(values: &mut [f64]) -> f64 {
    values.sort_by(f64::total_cmp);
    let osc = values.last().copied().unwrap_or(0.0) - values.first().copied().unwrap_or(0.0);
    let gap = values.windows(2).map(|w| w[1] - w[0]).filter(|&g| g > 0.0).fold(f64::INFINITY, f64::min);
    if !gap.is_finite() {
        return 0.0;
    }
    (0.5 * gap).min(1e-9 * osc)
}

/// Result of a critical-group computation with its discretization audit.
#[derive(Debug, Clone, PartialEq)]
pub struct CriticalGroupsDetail {
    pub groups: CriticalGroups,
    /// Level nudge used for the sublevel set.
    pub eps_level: f64,
    /// Whether nodes whose shifted value ties with the critical value change
    /// the answer when pushed above the level.
    pub tie_sensitive: bool,
}

fn groups_with_mask(shifted: &ScalarField, x0: &NodeIndex, keep: Vec<bool>) -> Result<CriticalGroups, CritError> {
    let x = build_sublevel_complex(shifted, f64::INFINITY, &NodeRegion::Mask(keep)).map_err(|_| CritError::NodeNotInSublevel)?;
    let pair = puncture(&x, x0).map_err(|_| CritError::NodeNotInSublevel)?;
    Ok(CriticalGroups(relative_homology(&pair)))
}

pub fn critical_groups_detail(u: &ScalarField, x0: &NodeIndex, radius: f64) -> Result<CriticalGroupsDetail, CritError> {
    let d = u.domain();
    check_ball(d, x0, radius)?;
    let shifted = shifted_potential(u, x0)?;
    let ball = NodeRegion::Ball { center: *x0, radius }.to_mask(d);
    let mut ball_values: Vec<f64> = (0..d.node_count()).filter(|&f| ball[f]).map(|f| shifted.at(f)).collect();
    let osc = {
        let lo = ball_values.iter().copied().fold(f64::INFINITY, f64::min);
        let hi = ball_values.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        hi - lo
    };
    let eps_level = level_nudge(&mut ball_values);
    let f0 = d.flat(x0);
    let keep: Vec<bool> = (0..d.node_count()).map(|f| ball[f] && shifted.at(f) <= eps_level).collect();
    if !keep[f0] {
        return Err(CritError::NodeNotInSublevel);
    }
    let groups = groups_with_mask(&shifted, x0, keep)?;

    let tie = eps_level.max(1e-12 * osc);
    let strict: Vec<bool> = (0..d.node_count()).map(|f| ball[f] && (f == f0 || shifted.at(f) < -tie)).collect();
    let tie_sensitive = groups_with_mask(&shifted, x0, strict)? != groups;
    Ok(CriticalGroupsDetail { groups, eps_level, tie_sensitive })
}

/// Critical groups of the shifted potential at `x0` over the grid ball of
/// `radius` (physical units).
pub fn critical_groups(u: &ScalarField, x0: &NodeIndex, radius: f64) -> Result<CriticalGroups, CritError> {
    critical_groups_detail(u, x0, radius).map(|d| d.groups)
}

/// `δ_{k, ind A} Z`.
pub fn expected_groups(a: &SymMatrix) -> Result<CriticalGroups, CritError> {
    match index_relative(a, DEFAULT_EPS_SING) {
        IndexValue::Index(k) => Ok(CriticalGroups(HomologyResult::delta(a.dim(), k))),
        IndexValue::NearSingular => Err(CritError::NearSingular),
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum Stability {
    Stable(CriticalGroups),
    /// Two consecutive resolutions disagree.
    Unstable { coarse: CriticalGroups, fine: CriticalGroups },
}

impl Stability {
    pub fn stable(&self) -> Option<&CriticalGroups> {
        match self {
            Stability::Stable(g) => Some(g),
            Stability::Unstable { .. } => None,
        }
    }
}

/// Critical groups of a gallery entry at the node nearest `point`, on
/// `domain` and on its refinement.
pub fn critical_groups_refined(
    entry: &GalleryEntry,
    domain: &GridDomain,
    point: &[f64],
    radius: f64,
) -> Result<Stability, CritError> {
    let mut out = Vec::with_capacity(2);
    for d in [domain.clone(), domain.refine()] {
        let u = sample(entry, &d).map_err(|_| CritError::BallOutsideDomain { center: [0; 3], radius })?;
        let node = d.nearest_node(point).ok_or(CritError::BallOutsideDomain { center: [0; 3], radius })?;
        out.push(critical_groups(&u, &node, radius)?);
    }
    let fine = out.pop().expect("two resolutions");
    let coarse = out.pop().expect("two resolutions");
    Ok(if coarse == fine { Stability::Stable(fine) } else { Stability::Unstable { coarse, fine } })
}
