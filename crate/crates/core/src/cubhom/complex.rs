use alloc::vec;
use alloc::vec::Vec;

use crate::symfield::{GridDomain, NodeIndex, ScalarField, MAX_DIM};

/// An elementary cube packed as `(anchor flat index << 3) | extent mask`.
///
/// Bit `a` of the mask set means the cube spans `[i_a, i_a + 1]` along axis
/// `a`; otherwise it is degenerate there. The degree is the mask popcount.
pub type CubeKey = u64;

#[inline]
pub fn cube_key(anchor_flat: usize, mask: u8) -> CubeKey {
    ((anchor_flat as u64) << 3) | mask as u64
}

#[inline]
pub fn cube_anchor(key: CubeKey) -> usize {
    (key >> 3) as usize
}

#[inline]
pub fn cube_mask(key: CubeKey) -> u8 {
    (key & 7) as u8
}

#[inline]
pub fn cube_degree(key: CubeKey) -> usize {
    cube_mask(key).count_ones() as usize
}

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum ComplexError {
    #[error("region contains no grid node")]
    EmptyRegion,
    #[error("node {0:?} is not a vertex of the complex")]
    VertexNotInComplex(NodeIndex),
    #[error("subcomplex has a cell that is not in the ambient complex")]
    NotASubcomplex,
    #[error("complexes live on different grids")]
    DomainMismatch,
}

/// A set of grid nodes: box, Euclidean ball around a node, or explicit mask.
#[derive(Debug, Clone, PartialEq)]
pub enum NodeRegion {
    All,
    /// Inclusive multi-index bounds.
    Box { lo: NodeIndex, hi: NodeIndex },
    /// Nodes within `radius` (physical units) of `center`.
    Ball { center: NodeIndex, radius: f64 },
    /// One flag per node in storage order.
    Mask(Vec<bool>),
}

impl NodeRegion {
    pub fn contains(&self, domain: &GridDomain, idx: &NodeIndex) -> bool {
        match self {
            NodeRegion::All => true,
            NodeRegion::Box { lo, hi } => (0..domain.dim()).all(|a| idx[a] >= lo[a] && idx[a] <= hi[a]),
            NodeRegion::Ball { center, radius } => domain.node_distance(center, idx) <= *radius * (1.0 + 1e-12),
            NodeRegion::Mask(m) => m.get(domain.flat(idx)).copied().unwrap_or(false),
        }
    }

    pub fn to_mask(&self, domain: &GridDomain) -> Vec<bool> {
        match self {
            NodeRegion::Mask(m) => m.clone(),
            _ => domain.nodes().map(|idx| self.contains(domain, &idx)).collect(),
        }
    }
}

/// A closed cubical subcomplex of the grid, cells sorted per degree.
#[derive(Debug, Clone, PartialEq)]
pub struct CubicalComplex {
    domain: GridDomain,
    cells: [Vec<CubeKey>; MAX_DIM + 1],
}

impl CubicalComplex {
    pub fn empty(domain: &GridDomain) -> Self {
        Self { domain: domain.clone(), cells: Default::default() }
    }

    /// Every cube whose vertices all satisfy `keep`.
    pub fn from_vertex_mask(domain: &GridDomain, keep: &[bool]) -> Self {
        let dim = domain.dim();
        let shape = domain.shape();
        let mut cells: [Vec<CubeKey>; MAX_DIM + 1] = Default::default();
        for flat in 0..domain.node_count() {
            if !keep[flat] {
                continue;
            }
            let idx = domain.unflat(flat);
            'mask: for mask in 0u8..(1 << dim) {
                for a in 0..dim {
                    if mask & (1 << a) != 0 && idx[a] + 1 >= shape[a] {
                        continue 'mask;
                    }
                }
                for corner in 1u8..(1 << dim) {
                    if corner & !mask != 0 {
                        continue;
                    }
                    let mut off = 0;
                    for a in 0..dim {
                        if corner & (1 << a) != 0 {
                            off += domain.stride(a);
                        }
                    }
                    if !keep[flat + off] {
                        continue 'mask;
                    }
                }
                cells[mask.count_ones() as usize].push(cube_key(flat, mask));
            }
        }
        Self { domain: domain.clone(), cells }
    }

    /// Closure of an arbitrary set of cubes.
    pub fn from_cubes(domain: &GridDomain, cubes: impl IntoIterator<Item = CubeKey>) -> Self {
        let mut cells: [Vec<CubeKey>; MAX_DIM + 1] = Default::default();
        let mut stack: Vec<CubeKey> = cubes.into_iter().collect();
        while let Some(k) = stack.pop() {
            cells[cube_degree(k)].push(k);
            for (f, _) in faces(domain, k) {
                stack.push(f);
            }
        }
        for c in cells.iter_mut() {
            c.sort_unstable();
            c.dedup();
        }
        Self { domain: domain.clone(), cells }
    }

    /// The full grid complex.
    pub fn full(domain: &GridDomain) -> Self {
        Self::from_vertex_mask(domain, &vec![true; domain.node_count()])
    }

    pub fn domain(&self) -> &GridDomain {
        &self.domain
    }

    pub fn cells(&self, k: usize) -> &[CubeKey] {
        self.cells.get(k).map(|v| v.as_slice()).unwrap_or(&[])
    }

    pub fn len(&self, k: usize) -> usize {
        self.cells(k).len()
    }

    pub fn total_cells(&self) -> usize {
        self.cells.iter().map(Vec::len).sum()
    }

    pub fn is_empty(&self) -> bool {
        self.total_cells() == 0
    }

    pub fn contains(&self, key: CubeKey) -> bool {
        self.cells(cube_degree(key)).binary_search(&key).is_ok()
    }

    pub fn position(&self, key: CubeKey) -> Option<usize> {
        self.cells(cube_degree(key)).binary_search(&key).ok()
    }

    pub fn contains_vertex(&self, v: &NodeIndex) -> bool {
        self.domain.in_grid(v) && self.contains(cube_key(self.domain.flat(v), 0))
    }

    /// Every face of every cell is present.
    pub fn is_closed(&self) -> bool {
        self.cells.iter().flatten().all(|&k| faces(&self.domain, k).all(|(f, _)| self.contains(f)))
    }

    /// Whether `v` is one of the corners of `key`.
    pub fn cube_has_vertex(&self, key: CubeKey, v: &NodeIndex) -> bool {
        let anchor = self.domain.unflat(cube_anchor(key));
        let mask = cube_mask(key);
        (0..self.domain.dim()).all(|a| v[a] == anchor[a] || (mask & (1 << a) != 0 && v[a] == anchor[a] + 1))
    }

    /// Cells of `self` not in `other` (which must live on the same grid).
    pub fn difference(&self, other: &CubicalComplex, k: usize) -> Vec<CubeKey> {
        self.cells(k).iter().copied().filter(|&c| !other.contains(c)).collect()
    }

    /// Cells of degree `k` satisfying `keep`.
    pub fn retain(&self, mut keep: impl FnMut(CubeKey) -> bool) -> Self {
        let mut out = Self::empty(&self.domain);
        for (k, cells) in self.cells.iter().enumerate() {
            out.cells[k] = cells.iter().copied().filter(|&c| keep(c)).collect();
        }
        out
    }
}

/// Faces of a cube with their incidence signs.
///
/// For the `j`-th spanning axis (0-based among the set bits), the upper face
/// enters with sign `(-1)^j` and the lower face with `-(-1)^j`; so an edge
/// has boundary `upper - lower`.
pub fn faces(domain: &GridDomain, key: CubeKey) -> impl Iterator<Item = (CubeKey, i64)> + '_ {
    let anchor = cube_anchor(key);
    let mask = cube_mask(key);
    let dim = domain.dim();
    (0..dim).filter(move |a| mask & (1 << a) != 0).enumerate().flat_map(move |(j, a)| {
        let sign = if j % 2 == 0 { 1 } else { -1 };
        let face_mask = mask & !(1 << a);
        let lower = cube_key(anchor, face_mask);
        let upper = cube_key(anchor + domain.stride(a), face_mask);
        [(lower, -sign), (upper, sign)]
    })
}

/// `{ u <= c }` inside `region`, as the set of cubes whose vertices all lie in
/// the region with value at most `c`.
pub fn build_sublevel_complex(u: &ScalarField, c: f64, region: &NodeRegion) -> Result<CubicalComplex, ComplexError> {
    let domain = u.domain();
    let in_region = region.to_mask(domain);
    if !in_region.iter().any(|&b| b) {
        return Err(ComplexError::EmptyRegion);
    }
    let keep: Vec<bool> = in_region.iter().zip(u.values()).map(|(&r, &v)| r && v <= c).collect();
    Ok(CubicalComplex::from_vertex_mask(domain, &keep))
}

/// `X` together with a subcomplex `A`.
#[derive(Debug, Clone, PartialEq)]
pub struct CubicalPair {
    x: CubicalComplex,
    a: CubicalComplex,
}

impl CubicalPair {
    pub fn new(x: CubicalComplex, a: CubicalComplex) -> Result<Self, ComplexError> {
        if x.domain != a.domain {
            return Err(ComplexError::DomainMismatch);
        }
        if !a.cells.iter().flatten().all(|&k| x.contains(k)) {
            return Err(ComplexError::NotASubcomplex);
        }
        Ok(Self { x, a })
    }

    /// `(X, ∅)`.
    pub fn absolute(x: CubicalComplex) -> Self {
        let a = CubicalComplex::empty(&x.domain);
        Self { x, a }
    }

    pub fn x(&self) -> &CubicalComplex {
        &self.x
    }

    pub fn a(&self) -> &CubicalComplex {
        &self.a
    }

    pub fn domain(&self) -> &GridDomain {
        &self.x.domain
    }

    /// Basis of the relative chain group in degree `k`: cells of `X` not in `A`.
    pub fn relative_cells(&self, k: usize) -> Vec<CubeKey> {
        self.x.difference(&self.a, k)
    }
}

/// `A = X` minus the open star of `v` (every cell having `v` as a corner).
pub fn puncture(x: &CubicalComplex, v: &NodeIndex) -> Result<CubicalPair, ComplexError> {
    if !x.contains_vertex(v) {
        return Err(ComplexError::VertexNotInComplex(*v));
    }
    let a = x.retain(|k| !x.cube_has_vertex(k, v));
    Ok(CubicalPair { x: x.clone(), a })
}
