//! Pointwise linear algebra on small symmetric matrices.
//!
//! Matrices are 2×2 or 3×3 and stored as their upper triangle, row by row:
//! `(0,0) (0,1) (1,1)` in two dimensions and
//! `(0,0) (0,1) (0,2) (1,1) (1,2) (2,2)` in three.

use core::fmt;

use crate::math;

/// Default singularity gate, relative to the operator norm of the matrix.
pub const DEFAULT_EPS_SING: f64 = 1e-8;

/// Off-diagonal mass (relative to the Frobenius norm) at which Jacobi stops.
const JACOBI_TOLERANCE: f64 = 1e-13;
const JACOBI_MAX_SWEEPS: usize = 64;

/// Norm used for `|A|` in the distortion quotient and in the cone `Q_K`.
///
/// Switching to Frobenius only rescales the admissible `K`.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum MatrixNorm {
    Operator,
    Frobenius,
}

/// The norm used throughout the crate.
pub const DISTORTION_NORM: MatrixNorm = MatrixNorm::Operator;

/// Number of packed entries for a symmetric matrix of dimension `dim`.
#[inline]
pub const fn packed_len(dim: usize) -> usize {
    dim * (dim + 1) / 2
}

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum LinalgError {
    #[error("unsupported dimension {0}; expected 2 or 3")]
    UnsupportedDimension(usize),
    #[error("matrix has a non-finite entry")]
    NonFinite,
    #[error("matrix is not symmetric")]
    NotSymmetric,
}

/// A real symmetric matrix of dimension 2 or 3.
#[derive(Clone, Copy, PartialEq)]
pub struct SymMatrix {
    dim: usize,
    packed: [f64; 6],
}

impl fmt::Debug for SymMatrix {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let mut list = f.debug_list();
        for i in 0..self.dim {
            let row: [f64; 3] = [self.get(i, 0), self.get(i, 1), if self.dim == 3 { self.get(i, 2) } else { 0.0 }];
            list.entry(&&row[..self.dim]);
        }
        list.finish()
    }
}

impl SymMatrix {
    /// Builds a matrix from its packed upper triangle.
    pub fn from_packed(dim: usize, packed: &[f64]) -> Result<Self, LinalgError> {
        if dim != 2 && dim != 3 {
            return Err(LinalgError::UnsupportedDimension(dim));
        }
        if packed.len() != packed_len(dim) {
            return Err(LinalgError::UnsupportedDimension(dim));
        }
        if packed.iter().any(|v| !v.is_finite()) {
            return Err(LinalgError::NonFinite);
        }
        let mut p = [0.0; 6];
        p[..packed.len()].copy_from_slice(packed);
        Ok(Self { dim, packed: p })
    }

    /// Builds a matrix from full rows; the rows must be symmetric.
    pub fn from_rows(rows: &[&[f64]]) -> Result<Self, LinalgError> {
        let dim = rows.len();
        if dim != 2 && dim != 3 {
            return Err(LinalgError::UnsupportedDimension(dim));
        }
        let mut m = Self::zeros(dim);
        for i in 0..dim {
            if rows[i].len() != dim {
                return Err(LinalgError::UnsupportedDimension(dim));
            }
            for j in 0..dim {
                let v = rows[i][j];
                if !v.is_finite() {
                    return Err(LinalgError::NonFinite);
                }
                let w = rows[j][i];
                if (v - w).abs() > 1e-12 * (1.0 + v.abs().max(w.abs())) {
                    return Err(LinalgError::NotSymmetric);
                }
            }
            for j in i..dim {
                m.set(i, j, rows[i][j]);
            }
        }
        Ok(m)
    }

    pub fn zeros(dim: usize) -> Self {
        assert!(dim == 2 || dim == 3, "dimension must be 2 or 3");
        Self { dim, packed: [0.0; 6] }
    }

    pub fn identity(dim: usize) -> Self {
        Self::scalar(dim, 1.0)
    }

    pub fn scalar(dim: usize, lambda: f64) -> Self {
        let mut m = Self::zeros(dim);
        for i in 0..dim {
            m.set(i, i, lambda);
        }
        m
    }

    pub fn diag(entries: &[f64]) -> Self {
        let mut m = Self::zeros(entries.len());
        for (i, &v) in entries.iter().enumerate() {
            m.set(i, i, v);
        }
        m
    }

    #[inline]
    pub fn dim(&self) -> usize {
        self.dim
    }

    #[inline]
    pub fn packed(&self) -> &[f64] {
        &self.packed[..packed_len(self.dim)]
    }

    #[inline]
    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.packed[offset(self.dim, i, j)]
    }

    #[inline]
    pub fn set(&mut self, i: usize, j: usize, v: f64) {
        self.packed[offset(self.dim, i, j)] = v;
    }

    pub fn to_dense(&self) -> [[f64; 3]; 3] {
        let mut out = [[0.0; 3]; 3];
        for (i, row) in out.iter_mut().enumerate().take(self.dim) {
            for (j, v) in row.iter_mut().enumerate().take(self.dim) {
                *v = self.get(i, j);
            }
        }
        out
    }

    pub fn neg(&self) -> Self {
        self.scale(-1.0)
    }

    pub fn scale(&self, s: f64) -> Self {
        let mut m = *self;
        for v in m.packed.iter_mut() {
            *v *= s;
        }
        m
    }

    pub fn add(&self, other: &Self) -> Self {
        assert_eq!(self.dim, other.dim);
        let mut m = *self;
        for (v, w) in m.packed.iter_mut().zip(other.packed.iter()) {
            *v += w;
        }
        m
    }

    /// Largest absolute entry.
    pub fn max_abs(&self) -> f64 {
        self.packed().iter().fold(0.0_f64, |acc, v| acc.max(v.abs()))
    }

    pub fn frobenius(&self) -> f64 {
        let mut s = 0.0;
        for i in 0..self.dim {
            for j in 0..self.dim {
                let v = self.get(i, j);
                s += v * v;
            }
        }
        math::sqrt(s)
    }

    /// `Qᵀ A Q` for a square `Q` given by rows.
    pub fn congruence(&self, q: &[[f64; 3]; 3]) -> Self {
        let a = self.to_dense();
        let n = self.dim;
        let mut out = Self::zeros(n);
        for i in 0..n {
            for j in i..n {
                let mut s = 0.0;
                for k in 0..n {
                    for l in 0..n {
                        s += q[k][i] * a[k][l] * q[l][j];
                    }
                }
                out.set(i, j, s);
            }
        }
        out
    }

    pub fn eigen(&self) -> EigenDecomposition {
        eigen_sym(self)
    }
}

#[inline]
fn offset(dim: usize, i: usize, j: usize) -> usize {
    let (i, j) = if i <= j { (i, j) } else { (j, i) };
    debug_assert!(j < dim);
    // entries in rows 0..i of the upper triangle
    let before: usize = (0..i).map(|r| dim - r).sum();
    before + (j - i)
}

/// Eigenvalues sorted ascending with matching orthonormal eigenvectors.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct EigenDecomposition {
    dim: usize,
    values: [f64; 3],
    /// Column `j` holds the eigenvector of `values[j]`.
    vectors: [[f64; 3]; 3],
}

impl EigenDecomposition {
    pub fn values(&self) -> &[f64] {
        &self.values[..self.dim]
    }

    pub fn vector(&self, j: usize) -> [f64; 3] {
        [self.vectors[0][j], self.vectors[1][j], self.vectors[2][j]]
    }

    pub fn vectors(&self) -> &[[f64; 3]; 3] {
        &self.vectors
    }

    /// `Q Λ Qᵀ`.
    pub fn reconstruct(&self) -> SymMatrix {
        let n = self.dim;
        let mut m = SymMatrix::zeros(n);
        for i in 0..n {
            for j in i..n {
                let mut s = 0.0;
                for k in 0..n {
                    s += self.vectors[i][k] * self.values[k] * self.vectors[j][k];
                }
                m.set(i, j, s);
            }
        }
        m
    }
}

/// Cyclic Jacobi with a fixed sweep order `(0,1), (0,2), (1,2)`.
pub fn eigen_sym(a: &SymMatrix) -> EigenDecomposition {
    let n = a.dim;
    let mut m = a.to_dense();
    let mut v = [[0.0; 3]; 3];
    for (i, row) in v.iter_mut().enumerate() {
        row[i] = 1.0;
    }
    let scale = a.frobenius();
    if scale > 0.0 {
        for _ in 0..JACOBI_MAX_SWEEPS {
            let mut off = 0.0;
            for p in 0..n {
                for q in (p + 1)..n {
                    off += 2.0 * m[p][q] * m[p][q];
                }
            }
            if math::sqrt(off) <= JACOBI_TOLERANCE * scale {
                break;
            }
            for p in 0..n {
                for q in (p + 1)..n {
                    if m[p][q] == 0.0 {
                        continue;
                    }
                    rotate(&mut m, &mut v, n, p, q);
                }
            }
        }
    }

    let mut order = [0usize, 1, 2];
    order[..n].sort_by(|&x, &y| m[x][x].total_cmp(&m[y][y]));
    let mut values = [0.0; 3];
    let mut vectors = [[0.0; 3]; 3];
    for (dst, &src) in order[..n].iter().enumerate() {
        values[dst] = m[src][src];
        for r in 0..n {
            vectors[r][dst] = v[r][src];
        }
    }
    EigenDecomposition { dim: n, values, vectors }
}

fn rotate(m: &mut [[f64; 3]; 3], v: &mut [[f64; 3]; 3], n: usize, p: usize, q: usize) {
    let apq = m[p][q];
    let theta = (m[q][q] - m[p][p]) / (2.0 * apq);
    let t = {
        let sgn = if theta >= 0.0 { 1.0 } else { -1.0 };
        sgn / (theta.abs() + math::sqrt(theta * theta + 1.0))
    };
    let c = 1.0 / math::sqrt(t * t + 1.0);
    let s = t * c;
    for k in 0..n {
        let mkp = m[k][p];
        let mkq = m[k][q];
        m[k][p] = c * mkp - s * mkq;
        m[k][q] = s * mkp + c * mkq;
    }
    for k in 0..n {
        let mpk = m[p][k];
        let mqk = m[q][k];
        m[p][k] = c * mpk - s * mqk;
        m[q][k] = s * mpk + c * mqk;
    }
    m[p][q] = 0.0;
    m[q][p] = 0.0;
    for row in v.iter_mut().take(n) {
        let vkp = row[p];
        let vkq = row[q];
        row[p] = c * vkp - s * vkq;
        row[q] = s * vkp + c * vkq;
    }
}

/// Number of negative eigenvalues, or a marker when an eigenvalue sits inside
/// the singularity gate.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum IndexValue {
    Index(usize),
    NearSingular,
}

impl IndexValue {
    pub fn as_index(self) -> Option<usize> {
        match self {
            IndexValue::Index(k) => Some(k),
            IndexValue::NearSingular => None,
        }
    }
}

impl fmt::Display for IndexValue {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            IndexValue::Index(k) => write!(f, "{k}"),
            IndexValue::NearSingular => f.write_str("near_singular"),
        }
    }
}

fn index_from_values(values: &[f64], eps: f64) -> IndexValue {
    if values.iter().any(|&l| l.abs() <= eps) {
        return IndexValue::NearSingular;
    }
    IndexValue::Index(values.iter().filter(|&&l| l < -eps).count())
}

/// Index with an absolute gate: eigenvalues in `[-eps, eps]` make the result
/// [`IndexValue::NearSingular`].
pub fn index(a: &SymMatrix, eps_sing: f64) -> IndexValue {
    index_from_values(eigen_sym(a).values(), eps_sing)
}

/// Index with the gate scaled by the operator norm; the zero matrix is
/// near-singular.
pub fn index_relative(a: &SymMatrix, eps_rel: f64) -> IndexValue {
    let eig = eigen_sym(a);
    let norm = eig.values().iter().fold(0.0_f64, |acc, l| acc.max(l.abs()));
    if norm == 0.0 {
        return IndexValue::NearSingular;
    }
    index_from_values(eig.values(), eps_rel * norm)
}

pub fn det(a: &SymMatrix) -> f64 {
    eigen_sym(a).values().iter().product()
}

/// Determinant by cofactor expansion.
pub fn det_cofactor(a: &SymMatrix) -> f64 {
    let m = a.to_dense();
    match a.dim {
        2 => m[0][0] * m[1][1] - m[0][1] * m[1][0],
        _ => {
            m[0][0] * (m[1][1] * m[2][2] - m[1][2] * m[2][1]) - m[0][1] * (m[1][0] * m[2][2] - m[1][2] * m[2][0])
                + m[0][2] * (m[1][0] * m[2][1] - m[1][1] * m[2][0])
        }
    }
}

/// Largest absolute eigenvalue.
pub fn op_norm(a: &SymMatrix) -> f64 {
    eigen_sym(a).values().iter().fold(0.0_f64, |acc, l| acc.max(l.abs()))
}

pub fn norm(a: &SymMatrix, which: MatrixNorm) -> f64 {
    match which {
        MatrixNorm::Operator => op_norm(a),
        MatrixNorm::Frobenius => a.frobenius(),
    }
}

/// `|A|^n / det A`, or 1 when `det A` vanishes.
///
/// The quotient is negative when `det A < 0`. The vanishing test uses the
/// default gate relative to `|A|^n`.
pub fn distortion(a: &SymMatrix) -> f64 {
    distortion_with(a, DISTORTION_NORM)
}

pub fn distortion_with(a: &SymMatrix, which: MatrixNorm) -> f64 {
    let eig = eigen_sym(a);
    let d: f64 = eig.values().iter().product();
    let nrm = match which {
        MatrixNorm::Operator => eig.values().iter().fold(0.0_f64, |acc, l| acc.max(l.abs())),
        MatrixNorm::Frobenius => a.frobenius(),
    };
    let nn = math::powi(nrm, a.dim);
    if d.abs() <= DEFAULT_EPS_SING * nn || nn == 0.0 {
        return 1.0;
    }
    nn / d
}

/// Membership in `Q_K = { A : |A|^n <= K det A }`, with absolute slack `eps_sing`.
pub fn in_cone_qk(a: &SymMatrix, big_k: f64, eps_sing: f64) -> bool {
    let eig = eigen_sym(a);
    let d: f64 = eig.values().iter().product();
    let nrm = eig.values().iter().fold(0.0_f64, |acc, l| acc.max(l.abs()));
    math::powi(nrm, a.dim) <= big_k * d + eps_sing
}

/// `|det A|` on matrices of index `k`, zero elsewhere (and on near-singular input).
pub fn sverak_integrand(a: &SymMatrix, k: usize, eps_sing: f64) -> f64 {
    let eig = eigen_sym(a);
    match index_from_values(eig.values(), eps_sing) {
        IndexValue::Index(i) if i == k => eig.values().iter().product::<f64>().abs(),
        _ => 0.0,
    }
}
