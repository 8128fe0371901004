use alloc::vec;
use alloc::vec::Vec;

use super::{ScalarField, SymMatrixField, VectorField};
use crate::symlinalg::packed_len;

/// First derivative of `values` (one real per node) along `axis`.
///
/// Second-order central differences inside, second-order one-sided
/// differences on the two boundary layers of that axis.
pub fn derivative_along(domain: &super::GridDomain, values: &[f64], axis: usize) -> Vec<f64> {
    let n = domain.shape()[axis];
    let h = domain.spacing()[axis];
    let stride = domain.stride(axis);
    let mut out = vec![0.0; values.len()];
    for (flat, slot) in out.iter_mut().enumerate() {
        let i = domain.unflat(flat)[axis];
        *slot = if i == 0 {
            (-3.0 * values[flat] + 4.0 * values[flat + stride] - values[flat + 2 * stride]) / (2.0 * h)
        } else if i == n - 1 {
            (3.0 * values[flat] - 4.0 * values[flat - stride] + values[flat - 2 * stride]) / (2.0 * h)
        } else {
            (values[flat + stride] - values[flat - stride]) / (2.0 * h)
        };
    }
    out
}

fn second_derivative_along(domain: &super::GridDomain, values: &[f64], axis: usize) -> Vec<f64> {
    let n = domain.shape()[axis];
    let h2 = domain.spacing()[axis] * domain.spacing()[axis];
    let s = domain.stride(axis);
    let mut out = vec![0.0; values.len()];
    for (flat, slot) in out.iter_mut().enumerate() {
        let i = domain.unflat(flat)[axis];
        let v = |k: isize| values[(flat as isize + k * s as isize) as usize];
        *slot = if i == 0 {
            if n >= 4 {
                (2.0 * v(0) - 5.0 * v(1) + 4.0 * v(2) - v(3)) / h2
            } else {
                (v(0) - 2.0 * v(1) + v(2)) / h2
            }
        } else if i == n - 1 {
            if n >= 4 {
                (2.0 * v(0) - 5.0 * v(-1) + 4.0 * v(-2) - v(-3)) / h2
            } else {
                (v(0) - 2.0 * v(-1) + v(-2)) / h2
            }
        } else {
            (v(1) - 2.0 * v(0) + v(-1)) / h2
        };
    }
    out
}

pub fn gradient(u: &ScalarField) -> VectorField {
    let domain = u.domain();
    let dim = domain.dim();
    let per_axis: Vec<Vec<f64>> = (0..dim).map(|a| derivative_along(domain, u.values(), a)).collect();
    let mut values = Vec::with_capacity(domain.node_count() * dim);
    for flat in 0..domain.node_count() {
        for d in per_axis.iter() {
            values.push(d[flat]);
        }
    }
    VectorField::new(domain.clone(), values).expect("finite differences of finite data")
}

/// Second central differences on the diagonal and composed first-derivative
/// stencils off the diagonal (the standard four-point mixed stencil inside).
pub fn hessian(u: &ScalarField) -> SymMatrixField {
    let domain = u.domain();
    let dim = domain.dim();
    let first: Vec<Vec<f64>> = (0..dim).map(|a| derivative_along(domain, u.values(), a)).collect();
    let p = packed_len(dim);
    let mut values = vec![0.0; domain.node_count() * p];
    let mut slot = 0;
    for i in 0..dim {
        for j in i..dim {
            let comp = if i == j {
                second_derivative_along(domain, u.values(), i)
            } else {
                derivative_along(domain, &first[j], i)
            };
            for (flat, v) in comp.into_iter().enumerate() {
                values[flat * p + slot] = v;
            }
            slot += 1;
        }
    }
    SymMatrixField::new(domain.clone(), values).expect("finite differences of finite data")
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::symfield::{gallery_entry, sample, GalleryEntry, GridDomain, Potential};
    use crate::symlinalg::SymMatrix;

    fn max_interior_error(d: &GridDomain, err: impl FnMut(usize) -> f64) -> f64 {
        d.interior_nodes().map(err).fold(0.0, f64::max)
    }

    #[test]
    fn gradient_exact_on_quadratics() {
        let d = GridDomain::cube(2, -1.0, 1.0, 65).unwrap();
        let u = sample(&gallery_entry("quad-min").unwrap(), &d).unwrap();
        let g = gradient(&u);
        let e = max_interior_error(&d, |f| {
            let x = d.coords_flat(f);
            (g.at(f)[0] - x[0]).abs().max((g.at(f)[1] - x[1]).abs())
        });
        assert!(e < 1e-13, "{e}");

        let s = sample(&gallery_entry("quad-saddle").unwrap(), &d).unwrap();
        let g = gradient(&s);
        let e = max_interior_error(&d, |f| {
            let x = d.coords_flat(f);
            (g.at(f)[0] + x[0]).abs().max((g.at(f)[1] - x[1]).abs())
        });
        assert!(e < 1e-13, "{e}");
        // the one-sided boundary stencil is exact on quadratics too
        for f in 0..d.node_count() {
            let x = d.coords_flat(f);
            assert!((g.at(f)[0] + x[0]).abs() < 1e-12);
        }
    }

    #[test]
    fn constant_and_affine_fields() {
        let d = GridDomain::cube(3, -1.0, 1.0, 9).unwrap();
        let c = sample(&GalleryEntry::new("c", 3, Potential::Constant(-4.0)), &d).unwrap();
        assert!(gradient(&c).values().iter().all(|&v| v == 0.0));

        let aff = GalleryEntry::new("aff", 3, Potential::Affine { slope: [0.5, -2.0, 3.0], offset: 1.0 });
        let a = sample(&aff, &d).unwrap();
        let g = gradient(&a);
        let h = hessian(&a);
        for f in d.interior_nodes() {
            assert!((g.at(f)[0] - 0.5).abs() < 1e-12);
            assert!((g.at(f)[1] + 2.0).abs() < 1e-12);
            assert!((g.at(f)[2] - 3.0).abs() < 1e-12);
            assert!(h.matrix_at(f).max_abs() < 1e-10);
        }
    }

    #[test]
    fn hessian_exact_on_quadratics() {
        let a = SymMatrix::from_rows(&[&[2.0, -0.5, 0.25], &[-0.5, -1.0, 0.75], &[0.25, 0.75, 3.0]]).unwrap();
        let d = GridDomain::cube(3, -1.0, 1.0, 9).unwrap();
        let u = sample(&GalleryEntry::quadratic(a), &d).unwrap();
        let h = hessian(&u);
        for f in d.interior_nodes() {
            let m = h.matrix_at(f);
            for i in 0..3 {
                for j in 0..3 {
                    assert!((m.get(i, j) - a.get(i, j)).abs() < 1e-10);
                }
            }
        }
    }

    #[test]
    fn hessian_of_lewicka_function_off_axis() {
        // closed form for x1 > 0: u = x1^2 exp(x2^2/2), u_11 = 2 exp(x2^2/2)
        let d = GridDomain::new(&[(-1.0, 1.0), (-0.75, 0.75)], &[129, 129]).unwrap();
        let u = sample(&gallery_entry("lewicka").unwrap(), &d).unwrap();
        let h = hessian(&u);
        let node = [96, 64, 0];
        let x = d.coords(&node);
        assert!(x[0] > 0.0 && x[1].abs() < 1e-15);
        let m = h.matrix_at(d.flat(&node));
        assert!((m.get(0, 0) - 2.0).abs() < 1e-10);
        let hh = d.max_spacing();
        let node = [100, 90, 0];
        let x = d.coords(&node);
        let m = h.matrix_at(d.flat(&node));
        let e = libm::exp(x[1] * x[1] / 2.0);
        assert!((m.get(0, 0) - 2.0 * e).abs() < 10.0 * hh * hh);
        assert!((m.get(0, 1) - 2.0 * x[0] * x[1] * e).abs() < 10.0 * hh * hh);
        assert!((m.get(1, 1) - x[0] * x[0] * (1.0 + x[1] * x[1]) * e).abs() < 10.0 * hh * hh);
    }

    fn gradient_error(entry: &GalleryEntry, count: usize) -> f64 {
        let d = GridDomain::cube(entry.dim(), -1.0, 1.0, count).unwrap();
        let u = sample(entry, &d).unwrap();
        let g = gradient(&u);
        let mut err: f64 = 0.0;
        for f in 0..d.node_count() {
            let x = d.coords_flat(f);
            let exact = entry.gradient(&x[..entry.dim()]).unwrap();
            for a in 0..entry.dim() {
                err = err.max((g.at(f)[a] - exact[a]).abs());
            }
        }
        err
    }

    #[test]
    fn gradient_converges_at_second_order() {
        for name in ["quartic-convex", "quartic-saddle", "cosine-saddle", "perturbed-convex", "quartic3-convex"] {
            let entry = gallery_entry(name).unwrap();
            let n = if entry.dim() == 2 { 17 } else { 9 };
            let e1 = gradient_error(&entry, n);
            let e2 = gradient_error(&entry, 2 * n - 1);
            let e3 = gradient_error(&entry, 4 * n - 3);
            let r1 = e1 / e2;
            let r2 = e2 / e3;
            assert!(r1 > 3.5 && r1 < 4.5, "{name}: ratio {r1}");
            assert!(r2 > 3.5 && r2 < 4.5, "{name}: ratio {r2}");
        }
    }

    #[test]
    fn hessian_packing_is_symmetric() {
        let d = GridDomain::cube(3, -1.0, 1.0, 7).unwrap();
        let u = sample(&gallery_entry("perturbed3-convex").unwrap(), &d).unwrap();
        let h = hessian(&u);
        for f in 0..d.node_count() {
            let m = h.matrix_at(f);
            for i in 0..3 {
                for j in 0..3 {
                    assert_eq!(m.get(i, j), m.get(j, i));
                }
            }
        }
    }
}
