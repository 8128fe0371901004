use alloc::vec::Vec;

use super::stencil::derivative_along;
use super::{GridDomain, ScalarField, MAX_DIM};
use crate::math;

/// Tensor-product cubic Hermite interpolant of a sampled potential.
///
/// Node data are the sampled values together with finite-difference first
/// and mixed derivatives, so the interpolant is `C^1`, reproduces every
/// polynomial of degree at most three per axis whose stencils are exact
/// (quadratics in particular), and its gradient at each node equals the
/// finite-difference gradient there.
#[derive(Debug, Clone)]
pub struct HermiteInterpolant {
    domain: GridDomain,
    /// `derivs[s]` holds the mixed derivative over the axes in bitmask `s`.
    derivs: Vec<Vec<f64>>,
}

#[inline]
fn basis(corner: usize, with_slope: bool, t: f64) -> (f64, f64) {
    let t2 = t * t;
    let t3 = t2 * t;
    match (corner, with_slope) {
        (0, false) => (2.0 * t3 - 3.0 * t2 + 1.0, 6.0 * t2 - 6.0 * t),
        (_, false) => (-2.0 * t3 + 3.0 * t2, -6.0 * t2 + 6.0 * t),
        (0, true) => (t3 - 2.0 * t2 + t, 3.0 * t2 - 4.0 * t + 1.0),
        (_, true) => (t3 - t2, 3.0 * t2 - 2.0 * t),
    }
}

impl HermiteInterpolant {
    pub fn new(u: &ScalarField) -> Self {
        let domain = u.domain().clone();
        let dim = domain.dim();
        let mut derivs: Vec<Vec<f64>> = Vec::with_capacity(1 << dim);
        derivs.push(u.values().to_vec());
        for s in 1usize..(1 << dim) {
            let top = (usize::BITS - 1 - s.leading_zeros()) as usize;
            let rest = s & !(1 << top);
            let d = derivative_along(&domain, &derivs[rest], top);
            derivs.push(d);
        }
        Self { domain, derivs }
    }

    pub fn domain(&self) -> &GridDomain {
        &self.domain
    }

    fn locate(&self, p: &[f64]) -> Option<([usize; MAX_DIM], [f64; MAX_DIM])> {
        if !self.domain.contains_point(p) {
            return None;
        }
        let mut cell = [0usize; MAX_DIM];
        let mut t = [0.0; MAX_DIM];
        for axis in 0..self.domain.dim() {
            let (lo, _) = self.domain.bounds()[axis];
            let h = self.domain.spacing()[axis];
            let s = (p[axis] - lo) / h;
            let i = (math::floor(s).max(0.0) as usize).min(self.domain.shape()[axis] - 2);
            cell[axis] = i;
            t[axis] = (s - i as f64).clamp(0.0, 1.0);
        }
        Some((cell, t))
    }

    /// Value and gradient at `p`; `None` outside the box.
    pub fn eval(&self, p: &[f64]) -> Option<(f64, [f64; MAX_DIM])> {
        let (cell, t) = self.locate(p)?;
        let dim = self.domain.dim();
        let h = self.domain.spacing();
        let mut value = 0.0;
        let mut grad = [0.0; MAX_DIM];
        for corner in 0usize..(1 << dim) {
            let mut node = cell;
            for (a, n) in node.iter_mut().enumerate().take(dim) {
                *n += (corner >> a) & 1;
            }
            let flat = self.domain.flat(&node);
            for (s, data) in self.derivs.iter().enumerate() {
                let d = data[flat];
                if d == 0.0 {
                    continue;
                }
                let mut w = [0.0; MAX_DIM];
                let mut dw = [0.0; MAX_DIM];
                for a in 0..dim {
                    let slope = (s >> a) & 1 == 1;
                    let (b, db) = basis((corner >> a) & 1, slope, t[a]);
                    if slope {
                        w[a] = h[a] * b;
                        dw[a] = db;
                    } else {
                        w[a] = b;
                        dw[a] = db / h[a];
                    }
                }
                let prod: f64 = w[..dim].iter().product();
                value += d * prod;
                for b in 0..dim {
                    let mut g = dw[b];
                    for a in 0..dim {
                        if a != b {
                            g *= w[a];
                        }
                    }
                    grad[b] += d * g;
                }
            }
        }
        Some((value, grad))
    }

    pub fn value(&self, p: &[f64]) -> Option<f64> {
        self.eval(p).map(|(v, _)| v)
    }

    pub fn gradient(&self, p: &[f64]) -> Option<[f64; MAX_DIM]> {
        self.eval(p).map(|(_, g)| g)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::symfield::{gallery_entry, gradient, sample};

    #[test]
    fn reproduces_quadratics_exactly() {
        for name in ["quad-saddle", "quad3-index2", "quad-aniso"] {
            let e = gallery_entry(name).unwrap();
            let d = GridDomain::cube(e.dim(), -1.0, 1.0, 9).unwrap();
            let it = HermiteInterpolant::new(&sample(&e, &d).unwrap());
            for p in [[0.13, -0.71, 0.44], [-0.99, 0.5, -0.02], [0.6, 0.6, 0.6], [1.0, -1.0, 1.0]] {
                let (v, g) = it.eval(&p).unwrap();
                let exact = e.gradient(&p).unwrap();
                assert!((v - e.value(&p)).abs() < 1e-13, "{name}");
                for a in 0..e.dim() {
                    assert!((g[a] - exact[a]).abs() < 1e-12, "{name}");
                }
            }
        }
    }

    #[test]
    fn matches_grid_data_at_nodes() {
        let e = gallery_entry("quartic-saddle").unwrap();
        let d = GridDomain::cube(2, -1.0, 1.0, 17).unwrap();
        let u = sample(&e, &d).unwrap();
        let g = gradient(&u);
        let it = HermiteInterpolant::new(&u);
        for f in 0..d.node_count() {
            let x = d.coords_flat(f);
            let (v, gi) = it.eval(&x).unwrap();
            assert!((v - u.at(f)).abs() < 1e-13);
            assert!((gi[0] - g.at(f)[0]).abs() < 1e-11);
            assert!((gi[1] - g.at(f)[1]).abs() < 1e-11);
        }
    }

    #[test]
    fn continuous_across_cells() {
        let e = gallery_entry("cosine3-index2").unwrap();
        let d = GridDomain::cube(3, -1.0, 1.0, 9).unwrap();
        let it = HermiteInterpolant::new(&sample(&e, &d).unwrap());
        let x = -1.0 + 3.0 * 0.25;
        let (a, ga) = it.eval(&[x - 1e-12, 0.1, 0.2]).unwrap();
        let (b, gb) = it.eval(&[x + 1e-12, 0.1, 0.2]).unwrap();
        assert!((a - b).abs() < 1e-10);
        for k in 0..3 {
            assert!((ga[k] - gb[k]).abs() < 1e-9);
        }
        assert!(it.eval(&[1.01, 0.0, 0.0]).is_none());
    }
}
