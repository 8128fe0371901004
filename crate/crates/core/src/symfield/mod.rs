//! Regular box grids and the scalar, vector and symmetric-matrix fields
//! sampled on them.
//!
//! Storage is node-major and row-major over the axis order `(x1, .., xn)`:
//! the last axis varies fastest. Vector fields store `dim` components per
//! node, symmetric-matrix fields store the packed upper triangle.

mod gallery;
mod interp;
mod stencil;

use alloc::vec::Vec;

pub use self::gallery::{gallery, gallery_entry, GalleryEntry, Potential};
pub use self::interp::HermiteInterpolant;
pub use self::stencil::{derivative_along, gradient, hessian};

use crate::math;
use crate::symlinalg::{packed_len, SymMatrix};

pub const MAX_DIM: usize = 3;

/// Multi-index of a grid node; unused trailing axes are zero.
pub type NodeIndex = [usize; MAX_DIM];

/// A point in physical coordinates; unused trailing coordinates are zero.
pub type Point = [f64; MAX_DIM];

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum FieldError {
    #[error("unsupported dimension {0}")]
    UnsupportedDimension(usize),
    #[error("axis {axis} needs at least 3 nodes, got {count}")]
    ShapeTooSmall { axis: usize, count: usize },
    #[error("axis {axis} has empty or non-finite bounds")]
    BadBounds { axis: usize },
    #[error("value count mismatch: expected {expected}, found {found}")]
    ValueCountMismatch { expected: usize, found: usize },
    #[error("non-finite value at position {0}")]
    NonFinite(usize),
    #[error("dimension mismatch: entry has dimension {entry}, domain has {domain}")]
    DimensionMismatch { entry: usize, domain: usize },
    #[error("fields live on different grids")]
    DomainMismatch,
}

/// A closed box `[lo1,hi1] × .. × [lon,hin]` discretized by a uniform node grid.
#[derive(Debug, Clone, PartialEq)]
pub struct GridDomain {
    dim: usize,
    bounds: [(f64, f64); MAX_DIM],
    shape: [usize; MAX_DIM],
    spacing: [f64; MAX_DIM],
}

impl GridDomain {
    pub fn new(bounds: &[(f64, f64)], shape: &[usize]) -> Result<Self, FieldError> {
        let dim = bounds.len();
        if dim != 2 && dim != 3 {
            return Err(FieldError::UnsupportedDimension(dim));
        }
        if shape.len() != dim {
            return Err(FieldError::UnsupportedDimension(shape.len()));
        }
        let mut b = [(0.0, 0.0); MAX_DIM];
        let mut s = [1usize; MAX_DIM];
        let mut h = [0.0; MAX_DIM];
        for axis in 0..dim {
            let (lo, hi) = bounds[axis];
            if !(lo.is_finite() && hi.is_finite() && lo < hi) {
                return Err(FieldError::BadBounds { axis });
            }
            if shape[axis] < 3 {
                return Err(FieldError::ShapeTooSmall { axis, count: shape[axis] });
            }
            b[axis] = (lo, hi);
            s[axis] = shape[axis];
            h[axis] = (hi - lo) / (shape[axis] - 1) as f64;
        }
        Ok(Self { dim, bounds: b, shape: s, spacing: h })
    }

    /// The cube `[lo,hi]^dim` with `count` nodes per axis.
    pub fn cube(dim: usize, lo: f64, hi: f64, count: usize) -> Result<Self, FieldError> {
        let bounds = [(lo, hi); MAX_DIM];
        let shape = [count; MAX_DIM];
        if dim != 2 && dim != 3 {
            return Err(FieldError::UnsupportedDimension(dim));
        }
        Self::new(&bounds[..dim], &shape[..dim])
    }

    #[inline]
    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn bounds(&self) -> &[(f64, f64)] {
        &self.bounds[..self.dim]
    }

    pub fn shape(&self) -> &[usize] {
        &self.shape[..self.dim]
    }

    pub fn spacing(&self) -> &[f64] {
        &self.spacing[..self.dim]
    }

    pub fn max_spacing(&self) -> f64 {
        self.spacing().iter().fold(0.0_f64, |a, &b| a.max(b))
    }

    pub fn min_spacing(&self) -> f64 {
        self.spacing().iter().fold(f64::INFINITY, |a, &b| a.min(b))
    }

    pub fn node_count(&self) -> usize {
        self.shape().iter().product()
    }

    pub fn interior_count(&self) -> usize {
        self.shape().iter().map(|&n| n - 2).product()
    }

    /// Same box with every cell halved (`2n - 1` nodes per axis).
    pub fn refine(&self) -> Self {
        let mut shape = [1; MAX_DIM];
        for axis in 0..self.dim {
            shape[axis] = 2 * self.shape[axis] - 1;
        }
        Self::new(self.bounds(), &shape[..self.dim]).expect("refinement of a valid grid")
    }

    #[inline]
    pub fn flat(&self, idx: &NodeIndex) -> usize {
        (idx[0] * self.shape[1] + idx[1]) * self.shape[2] + idx[2]
    }

    #[inline]
    pub fn unflat(&self, mut flat: usize) -> NodeIndex {
        let i2 = flat % self.shape[2];
        flat /= self.shape[2];
        let i1 = flat % self.shape[1];
        [flat / self.shape[1], i1, i2]
    }

    /// Stride of `axis` in the flat layout.
    #[inline]
    pub fn stride(&self, axis: usize) -> usize {
        match axis {
            0 => self.shape[1] * self.shape[2],
            1 => self.shape[2],
            _ => 1,
        }
    }

    pub fn coords(&self, idx: &NodeIndex) -> Point {
        let mut p = [0.0; MAX_DIM];
        for axis in 0..self.dim {
            p[axis] = self.bounds[axis].0 + idx[axis] as f64 * self.spacing[axis];
        }
        p
    }

    pub fn coords_flat(&self, flat: usize) -> Point {
        self.coords(&self.unflat(flat))
    }

    pub fn in_grid(&self, idx: &NodeIndex) -> bool {
        (0..MAX_DIM).all(|a| idx[a] < self.shape[a])
    }

    pub fn is_interior(&self, idx: &NodeIndex) -> bool {
        (0..self.dim).all(|a| idx[a] > 0 && idx[a] + 1 < self.shape[a])
    }

    pub fn contains_point(&self, p: &[f64]) -> bool {
        (0..self.dim).all(|a| p[a] >= self.bounds[a].0 && p[a] <= self.bounds[a].1)
    }

    /// Node closest to `p`, if `p` lies in the box.
    pub fn nearest_node(&self, p: &[f64]) -> Option<NodeIndex> {
        if !self.contains_point(p) {
            return None;
        }
        let mut idx = [0; MAX_DIM];
        for axis in 0..self.dim {
            let t = math::round((p[axis] - self.bounds[axis].0) / self.spacing[axis]);
            idx[axis] = (t.max(0.0) as usize).min(self.shape[axis] - 1);
        }
        Some(idx)
    }

    /// Iterates over all node multi-indices in storage order.
    pub fn nodes(&self) -> impl Iterator<Item = NodeIndex> + '_ {
        (0..self.node_count()).map(move |f| self.unflat(f))
    }

    /// Iterates over flat indices of interior nodes.
    pub fn interior_nodes(&self) -> impl Iterator<Item = usize> + '_ {
        (0..self.node_count()).filter(move |&f| self.is_interior(&self.unflat(f)))
    }

    /// Euclidean distance between two nodes in physical units.
    pub fn node_distance(&self, a: &NodeIndex, b: &NodeIndex) -> f64 {
        let mut s = 0.0;
        for axis in 0..self.dim {
            let d = (a[axis] as f64 - b[axis] as f64) * self.spacing[axis];
            s += d * d;
        }
        math::sqrt(s)
    }

    /// Length of the box diagonal.
    pub fn diameter(&self) -> f64 {
        let mut s = 0.0;
        for (lo, hi) in self.bounds() {
            s += (hi - lo) * (hi - lo);
        }
        math::sqrt(s)
    }
}

fn check_finite(values: &[f64]) -> Result<(), FieldError> {
    match values.iter().position(|v| !v.is_finite()) {
        Some(i) => Err(FieldError::NonFinite(i)),
        None => Ok(()),
    }
}

/// A real value per grid node.
#[derive(Debug, Clone, PartialEq)]
pub struct ScalarField {
    domain: GridDomain,
    values: Vec<f64>,
}

impl ScalarField {
    pub fn new(domain: GridDomain, values: Vec<f64>) -> Result<Self, FieldError> {
        if values.len() != domain.node_count() {
            return Err(FieldError::ValueCountMismatch { expected: domain.node_count(), found: values.len() });
        }
        check_finite(&values)?;
        Ok(Self { domain, values })
    }

    /// Evaluates `f` at every node.
    ///
    /// # Panics
    /// If `f` returns a non-finite value.
    pub fn from_fn(domain: GridDomain, f: impl Fn(&[f64]) -> f64) -> Self {
        let dim = domain.dim();
        let values: Vec<f64> = domain.nodes().map(|idx| f(&domain.coords(&idx)[..dim])).collect();
        Self::new(domain, values).expect("sampled function must be finite")
    }

    pub fn domain(&self) -> &GridDomain {
        &self.domain
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    #[inline]
    pub fn at(&self, flat: usize) -> f64 {
        self.values[flat]
    }

    pub fn value(&self, idx: &NodeIndex) -> f64 {
        self.values[self.domain.flat(idx)]
    }

    pub fn min(&self) -> f64 {
        self.values.iter().copied().fold(f64::INFINITY, f64::min)
    }

    pub fn max(&self) -> f64 {
        self.values.iter().copied().fold(f64::NEG_INFINITY, f64::max)
    }

    /// `max - min`.
    pub fn oscillation(&self) -> f64 {
        self.max() - self.min()
    }

    /// `self + eta * other`.
    pub fn add_scaled(&self, other: &ScalarField, eta: f64) -> Result<Self, FieldError> {
        if self.domain != other.domain {
            return Err(FieldError::DomainMismatch);
        }
        let values = self.values.iter().zip(other.values.iter()).map(|(a, b)| a + eta * b).collect();
        Self::new(self.domain.clone(), values)
    }

    pub fn negate(&self) -> Self {
        Self { domain: self.domain.clone(), values: self.values.iter().map(|v| -v).collect() }
    }
}

/// `dim` real components per grid node.
#[derive(Debug, Clone, PartialEq)]
pub struct VectorField {
    domain: GridDomain,
    values: Vec<f64>,
}

impl VectorField {
    pub fn new(domain: GridDomain, values: Vec<f64>) -> Result<Self, FieldError> {
        let expected = domain.node_count() * domain.dim();
        if values.len() != expected {
            return Err(FieldError::ValueCountMismatch { expected, found: values.len() });
        }
        check_finite(&values)?;
        Ok(Self { domain, values })
    }

    pub fn domain(&self) -> &GridDomain {
        &self.domain
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    #[inline]
    pub fn at(&self, flat: usize) -> &[f64] {
        let d = self.domain.dim();
        &self.values[flat * d..(flat + 1) * d]
    }

    pub fn norm_at(&self, flat: usize) -> f64 {
        math::sqrt(self.at(flat).iter().map(|v| v * v).sum())
    }
}

/// A symmetric matrix per grid node, packed as the upper triangle.
#[derive(Debug, Clone, PartialEq)]
pub struct SymMatrixField {
    domain: GridDomain,
    values: Vec<f64>,
}

impl SymMatrixField {
    pub fn new(domain: GridDomain, values: Vec<f64>) -> Result<Self, FieldError> {
        let expected = domain.node_count() * packed_len(domain.dim());
        if values.len() != expected {
            return Err(FieldError::ValueCountMismatch { expected, found: values.len() });
        }
        check_finite(&values)?;
        Ok(Self { domain, values })
    }

    pub fn domain(&self) -> &GridDomain {
        &self.domain
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn matrix_at(&self, flat: usize) -> SymMatrix {
        let d = self.domain.dim();
        let p = packed_len(d);
        SymMatrix::from_packed(d, &self.values[flat * p..(flat + 1) * p]).expect("field entries are finite")
    }
}

/// Samples a gallery entry at every node of `domain`.
pub fn sample(entry: &GalleryEntry, domain: &GridDomain) -> Result<ScalarField, FieldError> {
    if entry.dim() != domain.dim() {
        return Err(FieldError::DimensionMismatch { entry: entry.dim(), domain: domain.dim() });
    }
    let dim = domain.dim();
    let values: Vec<f64> = domain.nodes().map(|idx| entry.value(&domain.coords(&idx)[..dim])).collect();
    ScalarField::new(domain.clone(), values)
}
