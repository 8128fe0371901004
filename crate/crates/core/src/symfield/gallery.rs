//! Closed-form example potentials.

use alloc::string::{String, ToString};
use alloc::vec;
use alloc::vec::Vec;

use super::{GridDomain, MAX_DIM};
use crate::math;
use crate::symlinalg::SymMatrix;

/// The closed forms available in the gallery.
#[derive(Debug, Clone, PartialEq)]
pub enum Potential {
    Constant(f64),
    Affine { slope: [f64; MAX_DIM], offset: f64 },
    /// `q_A(x) = <Ax, x> / 2`.
    Quadratic(SymMatrix),
    /// `q_A(x) + c |x|^4`.
    QuarticPlus { quadratic: SymMatrix, quartic: f64 },
    /// `q_A(x) + amplitude * prod_i sin(x_i)`.
    PerturbedQuadratic { quadratic: SymMatrix, amplitude: f64 },
    /// `sum_i s_i (1 - cos x_i)`; Hessian `diag(s)` at the origin.
    CosineWell { signs: [f64; MAX_DIM] },
    /// `x1 |x1| exp(x2^2 / 2)`: `C^{1,1}` with `det D^2 u > 0` off the axis
    /// but index 0 on `x1 > 0` and 2 on `x1 < 0`.
    Lewicka,
}

#[derive(Debug, Clone, PartialEq)]
pub struct GalleryEntry {
    name: String,
    dim: usize,
    potential: Potential,
    bounds: [(f64, f64); MAX_DIM],
    shape: usize,
}

fn norm2(x: &[f64]) -> f64 {
    x.iter().map(|v| v * v).sum()
}

fn quad_form(a: &SymMatrix, x: &[f64]) -> f64 {
    let n = a.dim();
    let mut s = 0.0;
    for i in 0..n {
        for j in 0..n {
            s += a.get(i, j) * x[i] * x[j];
        }
    }
    0.5 * s
}

fn mat_vec(a: &SymMatrix, x: &[f64]) -> [f64; MAX_DIM] {
    let mut out = [0.0; MAX_DIM];
    for (i, o) in out.iter_mut().enumerate().take(a.dim()) {
        *o = (0..a.dim()).map(|j| a.get(i, j) * x[j]).sum();
    }
    out
}

impl GalleryEntry {
    /// An entry on `[-1,1]^dim`; 65 nodes per axis in 2D and 33 in 3D.
    pub fn new(name: &str, dim: usize, potential: Potential) -> Self {
        assert!(dim == 2 || dim == 3, "dimension must be 2 or 3");
        Self {
            name: name.to_string(),
            dim,
            potential,
            bounds: [(-1.0, 1.0); MAX_DIM],
            shape: if dim == 2 { 65 } else { 33 },
        }
    }

    pub fn with_domain(mut self, bounds: &[(f64, f64)], nodes_per_axis: usize) -> Self {
        self.bounds[..bounds.len()].copy_from_slice(bounds);
        self.shape = nodes_per_axis;
        self
    }

    /// `q_A` named after the diagonal of `A`.
    pub fn quadratic(a: SymMatrix) -> Self {
        let mut name = String::from("quad");
        for i in 0..a.dim() {
            name.push_str(&alloc::format!("_{}", a.get(i, i)));
        }
        Self::new(&name, a.dim(), Potential::Quadratic(a))
    }

    pub fn name(&self) -> &str {
        &self.name
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn potential(&self) -> &Potential {
        &self.potential
    }

    pub fn default_domain(&self) -> GridDomain {
        let shape = [self.shape; MAX_DIM];
        GridDomain::new(&self.bounds[..self.dim], &shape[..self.dim]).expect("gallery domains are valid")
    }

    /// A known critical point, if the entry has one it is built around.
    pub fn critical_point(&self) -> Option<[f64; MAX_DIM]> {
        match self.potential {
            Potential::Constant(_) | Potential::Affine { .. } => None,
            _ => Some([0.0; MAX_DIM]),
        }
    }

    pub fn value(&self, x: &[f64]) -> f64 {
        let x = &x[..self.dim];
        match &self.potential {
            Potential::Constant(c) => *c,
            Potential::Affine { slope, offset } => offset + x.iter().zip(slope.iter()).map(|(a, b)| a * b).sum::<f64>(),
            Potential::Quadratic(a) => quad_form(a, x),
            Potential::QuarticPlus { quadratic, quartic } => {
                let r2 = norm2(x);
                quad_form(quadratic, x) + quartic * r2 * r2
            }
            Potential::PerturbedQuadratic { quadratic, amplitude } => {
                quad_form(quadratic, x) + amplitude * x.iter().map(|&v| math::sin(v)).product::<f64>()
            }
            Potential::CosineWell { signs } => x.iter().zip(signs.iter()).map(|(&v, s)| s * (1.0 - math::cos(v))).sum(),
            Potential::Lewicka => x[0] * x[0].abs() * math::exp(x[1] * x[1] / 2.0),
        }
    }

    pub fn gradient(&self, x: &[f64]) -> Option<[f64; MAX_DIM]> {
        let n = self.dim;
        let x = &x[..n];
        let mut g = [0.0; MAX_DIM];
        match &self.potential {
            Potential::Constant(_) => {}
            Potential::Affine { slope, .. } => g[..n].copy_from_slice(&slope[..n]),
            Potential::Quadratic(a) => g = mat_vec(a, x),
            Potential::QuarticPlus { quadratic, quartic } => {
                g = mat_vec(quadratic, x);
                let r2 = norm2(x);
                for i in 0..n {
                    g[i] += 4.0 * quartic * r2 * x[i];
                }
            }
            Potential::PerturbedQuadratic { quadratic, amplitude } => {
                g = mat_vec(quadratic, x);
                for i in 0..n {
                    let mut p = amplitude * math::cos(x[i]);
                    for (j, &xj) in x.iter().enumerate() {
                        if j != i {
                            p *= math::sin(xj);
                        }
                    }
                    g[i] += p;
                }
            }
            Potential::CosineWell { signs } => {
                for i in 0..n {
                    g[i] = signs[i] * math::sin(x[i]);
                }
            }
            Potential::Lewicka => {
                let e = math::exp(x[1] * x[1] / 2.0);
                g[0] = 2.0 * x[0].abs() * e;
                g[1] = x[0] * x[0].abs() * x[1] * e;
            }
        }
        Some(g)
    }

    /// Closed-form Hessian; `None` where the potential is not twice differentiable.
    pub fn hessian(&self, x: &[f64]) -> Option<SymMatrix> {
        let n = self.dim;
        let x = &x[..n];
        let mut h = SymMatrix::zeros(n);
        match &self.potential {
            Potential::Constant(_) | Potential::Affine { .. } => {}
            Potential::Quadratic(a) => h = *a,
            Potential::QuarticPlus { quadratic, quartic } => {
                let r2 = norm2(x);
                h = *quadratic;
                for i in 0..n {
                    for j in i..n {
                        let mut v = 8.0 * quartic * x[i] * x[j];
                        if i == j {
                            v += 4.0 * quartic * r2;
                        }
                        h.set(i, j, h.get(i, j) + v);
                    }
                }
            }
            Potential::PerturbedQuadratic { quadratic, amplitude } => {
                h = *quadratic;
                for i in 0..n {
                    for j in i..n {
                        let mut p = *amplitude;
                        for (k, &xk) in x.iter().enumerate() {
                            p *= if k == i || k == j {
                                if i == j {
                                    -math::sin(xk)
                                } else {
                                    math::cos(xk)
                                }
                            } else {
                                math::sin(xk)
                            };
                        }
                        h.set(i, j, h.get(i, j) + p);
                    }
                }
            }
            Potential::CosineWell { signs } => {
                for i in 0..n {
                    h.set(i, i, signs[i] * math::cos(x[i]));
                }
            }
            Potential::Lewicka => {
                if x[0] == 0.0 {
                    return None;
                }
                let e = math::exp(x[1] * x[1] / 2.0);
                let s = if x[0] > 0.0 { 1.0 } else { -1.0 };
                h.set(0, 0, 2.0 * s * e);
                h.set(0, 1, 2.0 * x[0].abs() * x[1] * e);
                h.set(1, 1, x[0] * x[0].abs() * (1.0 + x[1] * x[1]) * e);
            }
        }
        Some(h)
    }
}

fn quad(name: &str, diag: &[f64]) -> GalleryEntry {
    GalleryEntry::new(name, diag.len(), Potential::Quadratic(SymMatrix::diag(diag)))
}

fn quartic_plus(name: &str, diag: &[f64], c: f64) -> GalleryEntry {
    GalleryEntry::new(name, diag.len(), Potential::QuarticPlus { quadratic: SymMatrix::diag(diag), quartic: c })
}

fn signs(s: &[f64]) -> [f64; MAX_DIM] {
    let mut out = [0.0; MAX_DIM];
    out[..s.len()].copy_from_slice(s);
    out
}

/// All named gallery entries.
pub fn gallery() -> Vec<GalleryEntry> {
    let perturbed = |dim| Potential::PerturbedQuadratic { quadratic: SymMatrix::identity(dim), amplitude: 0.01 };
    vec![
        GalleryEntry::new("constant", 2, Potential::Constant(1.0)),
        GalleryEntry::new("affine", 2, Potential::Affine { slope: [1.0, 0.0, 0.0], offset: 0.0 }),
        quad("quad-min", &[1.0, 1.0]),
        quad("quad-saddle", &[-1.0, 1.0]),
        quad("quad-max", &[-1.0, -1.0]),
        quad("quad-aniso", &[4.0, 1.0]),
        quartic_plus("quartic", &[0.0, 0.0], 1.0),
        quartic_plus("quartic-convex", &[2.0, 2.0], 1.0),
        quartic_plus("quartic-saddle", &[-1.0, 1.0], 0.25),
        quartic_plus("quartic-concave", &[-2.0, -2.0], -1.0),
        GalleryEntry::new("cosine-saddle", 2, Potential::CosineWell { signs: signs(&[-1.0, 1.0]) }),
        GalleryEntry::new("perturbed-convex", 2, perturbed(2)),
        GalleryEntry::new("lewicka", 2, Potential::Lewicka).with_domain(&[(-1.0, 1.0), (-0.75, 0.75)], 129),
        quad("quad3-min", &[1.0, 1.0, 1.0]),
        quad("quad3-index1", &[-1.0, 1.0, 1.0]),
        quad("quad3-index2", &[-1.0, -1.0, 1.0]),
        quad("quad3-max", &[-1.0, -1.0, -1.0]),
        quartic_plus("quartic3-convex", &[2.0, 2.0, 2.0], 1.0),
        GalleryEntry::new("cosine3-index2", 3, Potential::CosineWell { signs: signs(&[-1.0, -1.0, 1.0]) }),
        GalleryEntry::new("perturbed3-convex", 3, perturbed(3)),
    ]
}

pub fn gallery_entry(name: &str) -> Option<GalleryEntry> {
    gallery().into_iter().find(|e| e.name == name)
}
