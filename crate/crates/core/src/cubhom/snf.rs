//! Smith normal form over the integers.
//!
//! Unit pivots are eliminated sparsely with overflow-checked machine
//! integers; whatever is left is reduced densely with arbitrary-precision
//! integers, pivoting on the entry of least absolute value.

use alloc::vec;
use alloc::vec::Vec;

use num_bigint::{BigInt, BigUint};
use num_integer::Integer;
use num_traits::{One, Signed, Zero};

/// An integer matrix stored by columns; each column is sorted by row and has
/// no explicit zeros.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SparseIntMatrix {
    nrows: usize,
    columns: Vec<Vec<(usize, i64)>>,
}

impl SparseIntMatrix {
    pub fn zeros(nrows: usize, ncols: usize) -> Self {
        Self { nrows, columns: vec![Vec::new(); ncols] }
    }

    /// Builds from columns; entries are sorted and zeros dropped.
    pub fn from_columns(nrows: usize, columns: Vec<Vec<(usize, i64)>>) -> Self {
        let columns = columns
            .into_iter()
            .map(|mut c| {
                c.sort_unstable_by_key(|e| e.0);
                let mut out: Vec<(usize, i64)> = Vec::with_capacity(c.len());
                for (r, v) in c {
                    assert!(r < nrows, "row index out of range");
                    match out.last_mut() {
                        Some(last) if last.0 == r => last.1 += v,
                        _ => out.push((r, v)),
                    }
                }
                out.retain(|e| e.1 != 0);
                out
            })
            .collect();
        Self { nrows, columns }
    }

    /// Builds from dense rows.
    pub fn from_dense(rows: &[Vec<i64>]) -> Self {
        let nrows = rows.len();
        let ncols = rows.first().map_or(0, Vec::len);
        let mut cols = vec![Vec::new(); ncols];
        for (i, row) in rows.iter().enumerate() {
            assert_eq!(row.len(), ncols, "ragged matrix");
            for (j, &v) in row.iter().enumerate() {
                if v != 0 {
                    cols[j].push((i, v));
                }
            }
        }
        Self { nrows, columns: cols }
    }

    pub fn nrows(&self) -> usize {
        self.nrows
    }

    pub fn ncols(&self) -> usize {
        self.columns.len()
    }

    pub fn column(&self, j: usize) -> &[(usize, i64)] {
        &self.columns[j]
    }

    pub fn get(&self, i: usize, j: usize) -> i64 {
        match self.columns[j].binary_search_by_key(&i, |e| e.0) {
            Ok(p) => self.columns[j][p].1,
            Err(_) => 0,
        }
    }

    pub fn nnz(&self) -> usize {
        self.columns.iter().map(Vec::len).sum()
    }

    pub fn to_dense(&self) -> Vec<Vec<i64>> {
        let mut rows = vec![vec![0; self.ncols()]; self.nrows];
        for (j, c) in self.columns.iter().enumerate() {
            for &(i, v) in c {
                rows[i][j] = v;
            }
        }
        rows
    }

    /// `self * other`, or `None` on overflow.
    pub fn checked_mul(&self, other: &SparseIntMatrix) -> Option<SparseIntMatrix> {
        assert_eq!(self.ncols(), other.nrows, "dimension mismatch");
        let mut out = Vec::with_capacity(other.ncols());
        for col in other.columns.iter() {
            let mut acc: Vec<i64> = vec![0; self.nrows];
            for &(k, b) in col {
                for &(i, a) in &self.columns[k] {
                    acc[i] = acc[i].checked_add(a.checked_mul(b)?)?;
                }
            }
            out.push(acc.into_iter().enumerate().filter(|e| e.1 != 0).collect());
        }
        Some(SparseIntMatrix { nrows: self.nrows, columns: out })
    }
}

/// Invariant factors `d1 | d2 | ... | dr`, all positive.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SmithForm {
    factors: Vec<BigUint>,
}

impl SmithForm {
    pub fn factors(&self) -> &[BigUint] {
        &self.factors
    }

    pub fn rank(&self) -> usize {
        self.factors.len()
    }

    /// Factors greater than one.
    pub fn torsion(&self) -> Vec<BigUint> {
        self.factors.iter().filter(|f| !f.is_one()).cloned().collect()
    }
}

pub fn smith_normal_form(m: &SparseIntMatrix) -> SmithForm {
    let mut r = Reducer::new(m);
    let units = r.eliminate_units();
    let rest = r.remaining_dense();
    let mut factors: Vec<BigUint> = (0..units).map(|_| BigUint::one()).collect();
    factors.extend(dense_smith(rest));
    SmithForm { factors }
}

struct Reducer {
    nrows: usize,
    cols: Vec<Vec<(usize, i64)>>,
    /// Columns that may hold an entry in each row; stale entries are allowed.
    rows: Vec<Vec<usize>>,
    col_alive: Vec<bool>,
}

enum Step {
    Done,
    Overflow,
}

impl Reducer {
    fn new(m: &SparseIntMatrix) -> Self {
        let mut rows = vec![Vec::new(); m.nrows];
        for (j, c) in m.columns.iter().enumerate() {
            for &(i, _) in c {
                rows[i].push(j);
            }
        }
        Self { nrows: m.nrows, cols: m.columns.clone(), rows, col_alive: vec![true; m.ncols()] }
    }

    /// Eliminates unit pivots until none is left; returns how many.
    fn eliminate_units(&mut self) -> usize {
        let mut count = 0;
        loop {
            let mut progressed = false;
            for c in 0..self.cols.len() {
                if !self.col_alive[c] || self.cols[c].is_empty() {
                    continue;
                }
                // among unit entries prefer the sparsest row
                let pivot = self.cols[c]
                    .iter()
                    .filter(|e| e.1 == 1 || e.1 == -1)
                    .min_by_key(|e| self.rows[e.0].len())
                    .copied();
                let Some((r, v)) = pivot else { continue };
                match self.pivot(c, r, v) {
                    Step::Done => {
                        count += 1;
                        progressed = true;
                    }
                    Step::Overflow => return count,
                }
            }
            if !progressed {
                return count;
            }
        }
    }

    /// Clears row `r` with column operations against column `c`, then drops
    /// both. On overflow nothing is modified.
    fn pivot(&mut self, c: usize, r: usize, v: i64) -> Step {
        let others: Vec<usize> = {
            let mut o: Vec<usize> = self.rows[r].iter().copied().filter(|&j| j != c && self.col_alive[j]).collect();
            o.sort_unstable();
            o.dedup();
            o
        };
        let mut updates: Vec<(usize, Vec<(usize, i64)>)> = Vec::new();
        for &j in &others {
            let Ok(p) = self.cols[j].binary_search_by_key(&r, |e| e.0) else { continue };
            let factor = self.cols[j][p].1 * v;
            match axpy(&self.cols[j], &self.cols[c], factor) {
                Some(col) => updates.push((j, col)),
                None => return Step::Overflow,
            }
        }
        for (j, col) in updates {
            for &(i, _) in &col {
                if self.cols[j].binary_search_by_key(&i, |e| e.0).is_err() {
                    self.rows[i].push(j);
                }
            }
            self.cols[j] = col;
        }
        self.col_alive[c] = false;
        self.rows[r].clear();
        Step::Done
    }

    fn remaining_dense(&self) -> Vec<Vec<BigInt>> {
        let live: Vec<usize> = (0..self.cols.len()).filter(|&j| self.col_alive[j] && !self.cols[j].is_empty()).collect();
        let mut row_map = vec![usize::MAX; self.nrows];
        let mut nr = 0;
        for &j in &live {
            for &(i, _) in &self.cols[j] {
                if row_map[i] == usize::MAX {
                    row_map[i] = nr;
                    nr += 1;
                }
            }
        }
        let mut dense = vec![vec![BigInt::zero(); live.len()]; nr];
        for (jj, &j) in live.iter().enumerate() {
            for &(i, v) in &self.cols[j] {
                dense[row_map[i]][jj] = BigInt::from(v);
            }
        }
        dense
    }
}

/// `a - factor * b` on sorted sparse columns, `None` on overflow.
fn axpy(a: &[(usize, i64)], b: &[(usize, i64)], factor: i64) -> Option<Vec<(usize, i64)>> {
    let mut out = Vec::with_capacity(a.len() + b.len());
    let (mut i, mut j) = (0, 0);
    while i < a.len() || j < b.len() {
        let ra = a.get(i).map_or(usize::MAX, |e| e.0);
        let rb = b.get(j).map_or(usize::MAX, |e| e.0);
        if ra < rb {
            out.push(a[i]);
            i += 1;
        } else if rb < ra {
            out.push((rb, b[j].1.checked_mul(factor)?.checked_neg()?));
            j += 1;
        } else {
            let v = a[i].1.checked_sub(b[j].1.checked_mul(factor)?)?;
            if v != 0 {
                out.push((ra, v));
            }
            i += 1;
            j += 1;
        }
    }
    Some(out)
}

/// Dense Smith form with least-absolute-value pivoting.
fn dense_smith(mut m: Vec<Vec<BigInt>>) -> Vec<BigUint> {
    let nr = m.len();
    let nc = m.first().map_or(0, Vec::len);
    let mut factors = Vec::new();
    let mut t = 0;
    while t < nr.min(nc) {
        let Some((pi, pj)) = min_abs_entry(&m, t, t) else { break };
        m.swap(t, pi);
        for row in m.iter_mut() {
            row.swap(t, pj);
        }
        loop {
            let mut clean = true;
            for i in (t + 1)..nr {
                if m[i][t].is_zero() {
                    continue;
                }
                let q = m[i][t].div_floor(&m[t][t]);
                for j in t..nc {
                    let d = &q * &m[t][j];
                    m[i][j] -= d;
                }
                if !m[i][t].is_zero() {
                    clean = false;
                }
            }
            for j in (t + 1)..nc {
                if m[t][j].is_zero() {
                    continue;
                }
                let q = m[t][j].div_floor(&m[t][t]);
                for row in m.iter_mut().skip(t) {
                    let d = &q * &row[t];
                    row[j] -= d;
                }
                if !m[t][j].is_zero() {
                    clean = false;
                }
            }
            if !clean {
                // a smaller remainder is now in row or column t; make it the pivot
                let mut best = (t, t);
                for i in (t + 1)..nr {
                    if !m[i][t].is_zero() && m[i][t].abs() < m[best.0][best.1].abs() {
                        best = (i, t);
                    }
                }
                for j in (t + 1)..nc {
                    if !m[t][j].is_zero() && m[t][j].abs() < m[best.0][best.1].abs() {
                        best = (t, j);
                    }
                }
                if best.1 == t {
                    m.swap(t, best.0);
                } else {
                    for row in m.iter_mut() {
                        row.swap(t, best.1);
                    }
                }
                continue;
            }
            // pivot must divide the rest of the submatrix
            let bad = ((t + 1)..nr).find(|&i| ((t + 1)..nc).any(|j| !(&m[i][j] % &m[t][t]).is_zero()));
            match bad {
                Some(i) => {
                    for j in t..nc {
                        let v = m[i][j].clone();
                        m[t][j] += v;
                    }
                }
                None => break,
            }
        }
        factors.push(m[t][t].abs().to_biguint().expect("absolute value is non-negative"));
        t += 1;
    }
    factors
}

fn min_abs_entry(m: &[Vec<BigInt>], r0: usize, c0: usize) -> Option<(usize, usize)> {
    let mut best: Option<(usize, usize)> = None;
    for (i, row) in m.iter().enumerate().skip(r0) {
        for (j, v) in row.iter().enumerate().skip(c0) {
            if v.is_zero() {
                continue;
            }
            match best {
                Some((bi, bj)) if m[bi][bj].abs() <= v.abs() => {}
                _ => best = Some((i, j)),
            }
        }
    }
    best
}
