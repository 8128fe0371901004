//! Relative cubical homology with integer coefficients.
//!
//! A [`CubicalPair`] `(X, A)` has relative chain groups freely generated by
//! the cells of `X` not in `A`; the boundary of a cell drops faces lying in
//! `A`. Homology ranks and torsion come from the Smith normal form of each
//! relative boundary matrix.

mod complex;
mod snf;

use alloc::vec;
use alloc::vec::Vec;
use core::fmt;

use num_bigint::BigUint;

pub use self::complex::{
    build_sublevel_complex, cube_anchor, cube_degree, cube_key, cube_mask, faces, puncture, ComplexError, CubeKey,
    CubicalComplex, CubicalPair, NodeRegion,
};
pub use self::snf::{smith_normal_form, SmithForm, SparseIntMatrix};

/// Relative boundary `C_k(X, A) -> C_{k-1}(X, A)`.
///
/// Columns follow the sorted relative `k`-cells, rows the sorted relative
/// `(k-1)`-cells. For `k = 0` or `k > dim` the matrix has no rows or columns.
pub fn boundary_matrix(pair: &CubicalPair, k: usize) -> SparseIntMatrix {
    let dim = pair.domain().dim();
    if k == 0 || k > dim {
        let nrows = if k == 0 { 0 } else { pair.relative_cells(k - 1).len() };
        let ncols = if k > dim { 0 } else { pair.relative_cells(k).len() };
        return SparseIntMatrix::zeros(nrows, ncols);
    }
    let rows = pair.relative_cells(k - 1);
    let cols = pair.relative_cells(k);
    let domain = pair.domain();
    let columns = cols
        .iter()
        .map(|&cell| {
            faces(domain, cell)
                .filter_map(|(f, s)| rows.binary_search(&f).ok().map(|r| (r, s)))
                .collect::<Vec<_>>()
        })
        .collect();
    SparseIntMatrix::from_columns(rows.len(), columns)
}

/// Per-degree Betti numbers and torsion coefficients.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct HomologyResult {
    betti: Vec<usize>,
    torsion: Vec<Vec<BigUint>>,
}

impl HomologyResult {
    pub fn new(betti: Vec<usize>, torsion: Vec<Vec<BigUint>>) -> Self {
        assert_eq!(betti.len(), torsion.len());
        Self { betti, torsion }
    }

    /// `Z` in degree `k`, zero elsewhere, for degrees `0..=dim`.
    pub fn delta(dim: usize, k: usize) -> Self {
        let mut betti = vec![0; dim + 1];
        betti[k] = 1;
        Self { betti, torsion: vec![Vec::new(); dim + 1] }
    }

    pub fn betti(&self) -> &[usize] {
        &self.betti
    }

    pub fn torsion(&self) -> &[Vec<BigUint>] {
        &self.torsion
    }

    pub fn top_degree(&self) -> usize {
        self.betti.len() - 1
    }

    pub fn is_torsion_free(&self) -> bool {
        self.torsion.iter().all(Vec::is_empty)
    }

    /// The single degree carrying `Z` when the result is `δ_{k,·} Z`.
    pub fn delta_degree(&self) -> Option<usize> {
        if !self.is_torsion_free() || self.betti.iter().sum::<usize>() != 1 {
            return None;
        }
        self.betti.iter().position(|&b| b == 1)
    }
}

impl fmt::Display for HomologyResult {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for (k, (b, t)) in self.betti.iter().zip(self.torsion.iter()).enumerate() {
            if k > 0 {
                f.write_str(", ")?;
            }
            write!(f, "H{k}=")?;
            let mut parts = 0;
            if *b > 0 {
                if *b == 1 {
                    f.write_str("Z")?;
                } else {
                    write!(f, "Z^{b}")?;
                }
                parts += 1;
            }
            for q in t {
                if parts > 0 {
                    f.write_str("+")?;
                }
                write!(f, "Z/{q}")?;
                parts += 1;
            }
            if parts == 0 {
                f.write_str("0")?;
            }
        }
        Ok(())
    }
}

/// `H_k(X, A)` for `k = 0..=dim`.
pub fn relative_homology(pair: &CubicalPair) -> HomologyResult {
    let dim = pair.domain().dim();
    let counts: Vec<usize> = (0..=dim).map(|k| pair.relative_cells(k).len()).collect();
    // forms[k] is the Smith form of the boundary out of degree k
    let forms: Vec<SmithForm> = (0..=dim + 1).map(|k| smith_normal_form(&boundary_matrix(pair, k))).collect();
    let mut betti = Vec::with_capacity(dim + 1);
    let mut torsion = Vec::with_capacity(dim + 1);
    for k in 0..=dim {
        let kernel = counts[k] - forms[k].rank();
        betti.push(kernel - forms[k + 1].rank());
        torsion.push(forms[k + 1].torsion());
    }
    HomologyResult { betti, torsion }
}

/// Absolute homology `H_k(X)`.
pub fn homology(x: &CubicalComplex) -> HomologyResult {
    relative_homology(&CubicalPair::absolute(x.clone()))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::symfield::GridDomain;

    #[test]
    fn edge_boundary_orientation() {
        let d = GridDomain::cube(2, 0.0, 1.0, 3).unwrap();
        let edge = cube_key(0, 0b10);
        let x = CubicalComplex::from_cubes(&d, [edge]);
        let m = boundary_matrix(&CubicalPair::absolute(x), 1);
        assert_eq!(m.to_dense(), vec![vec![-1], vec![1]]);
    }

    #[test]
    fn boundary_of_boundary_vanishes() {
        let d = GridDomain::cube(3, 0.0, 1.0, 4).unwrap();
        let x = CubicalComplex::full(&d);
        let pair = CubicalPair::absolute(x.clone());
        for k in 2..=3 {
            let a = boundary_matrix(&pair, k - 1);
            let b = boundary_matrix(&pair, k);
            let p = a.checked_mul(&b).unwrap();
            assert_eq!(p.nnz(), 0, "degree {k}");
        }
        let sq = CubicalComplex::from_cubes(&d, [cube_key(0, 0b011)]);
        let pair = CubicalPair::absolute(sq);
        assert_eq!(boundary_matrix(&pair, 1).checked_mul(&boundary_matrix(&pair, 2)).unwrap().nnz(), 0);
    }

    #[test]
    fn relative_boundary_killed_by_quotient() {
        let d = GridDomain::cube(2, 0.0, 1.0, 3).unwrap();
        let x = CubicalComplex::from_cubes(&d, [cube_key(0, 0b11)]);
        let a = x.retain(|k| cube_degree(k) < 2);
        let pair = CubicalPair::new(x, a).unwrap();
        let m = boundary_matrix(&pair, 2);
        assert_eq!((m.nrows(), m.ncols(), m.nnz()), (0, 1, 0));
        assert_eq!(relative_homology(&pair), HomologyResult::delta(2, 2));
    }

    #[test]
    fn point_and_contractible_regions() {
        let d = GridDomain::cube(2, 0.0, 1.0, 9).unwrap();
        let p = CubicalComplex::from_cubes(&d, [cube_key(40, 0)]);
        assert_eq!(homology(&p), HomologyResult::delta(2, 0));
        assert_eq!(homology(&CubicalComplex::full(&d)), HomologyResult::delta(2, 0));
        let d3 = GridDomain::cube(3, 0.0, 1.0, 6).unwrap();
        assert_eq!(homology(&CubicalComplex::full(&d3)), HomologyResult::delta(3, 0));
    }

    #[test]
    fn annulus_and_sphere() {
        let d = GridDomain::cube(2, 0.0, 1.0, 5).unwrap();
        let mut keep = vec![true; 25];
        keep[d.flat(&[2, 2, 0])] = false;
        let ring = CubicalComplex::from_vertex_mask(&d, &keep);
        assert_eq!(homology(&ring).betti(), &[1, 1, 0]);

        let d3 = GridDomain::cube(3, 0.0, 1.0, 5).unwrap();
        let mut keep = vec![true; 125];
        keep[d3.flat(&[2, 2, 2])] = false;
        let shell = CubicalComplex::from_vertex_mask(&d3, &keep);
        assert_eq!(homology(&shell).betti(), &[1, 0, 1, 0]);
    }

    #[test]
    fn punctured_squares_and_cubes() {
        for n in [3, 9, 17] {
            let d = GridDomain::cube(2, -1.0, 1.0, n).unwrap();
            let pair = puncture(&CubicalComplex::full(&d), &[n / 2, n / 2, 0]).unwrap();
            assert_eq!(relative_homology(&pair), HomologyResult::delta(2, 2));
        }
        let d = GridDomain::cube(3, -1.0, 1.0, 9).unwrap();
        let pair = puncture(&CubicalComplex::full(&d), &[4, 4, 4]).unwrap();
        assert_eq!(relative_homology(&pair), HomologyResult::delta(3, 3));
        // puncturing a corner leaves a contractible remainder
        let d = GridDomain::cube(2, -1.0, 1.0, 9).unwrap();
        let pair = puncture(&CubicalComplex::full(&d), &[0, 0, 0]).unwrap();
        assert_eq!(relative_homology(&pair).betti(), &[0, 0, 0]);
    }

    #[test]
    fn display() {
        let h = HomologyResult::new(vec![1, 2, 0], vec![vec![], vec![BigUint::from(2u8)], vec![]]);
        assert_eq!(alloc::format!("{h}"), "H0=Z, H1=Z^2+Z/2, H2=0");
    }
}
