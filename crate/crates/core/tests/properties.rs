use critmorse_core::critgroups::critical_groups;
use critmorse_core::cubhom::{
    boundary_matrix, puncture, relative_homology, smith_normal_form, CubicalComplex, CubicalPair, SparseIntMatrix,
};
use critmorse_core::pseudoflow::{arrival_time, integrate_flow, make_pseudo_gradient, FlowOptions, FlowStop};
use critmorse_core::symfield::{gallery_entry, hessian, sample, GridDomain, ScalarField};
use critmorse_core::symlinalg::{det, det_cofactor, distortion, index_relative, IndexValue, SymMatrix};
use critmorse_core::verify::{check_ma_hypothesis, index_field, Verdict};
use num_bigint::BigUint;
use proptest::prelude::*;

fn sym2() -> impl Strategy<Value = SymMatrix> {
    prop::array::uniform3(-5.0..5.0f64).prop_map(|p| SymMatrix::from_packed(2, &p).unwrap())
}

fn sym3() -> impl Strategy<Value = SymMatrix> {
    prop::array::uniform6(-5.0..5.0f64).prop_map(|p| SymMatrix::from_packed(3, &p).unwrap())
}

fn sym() -> impl Strategy<Value = SymMatrix> {
    prop_oneof![sym2(), sym3()]
}

/// Rotation by Euler angles times positive axis scales.
fn congruence_matrix(angles: [f64; 3], scales: [f64; 3]) -> [[f64; 3]; 3] {
    let (a, b, c) = (angles[0], angles[1], angles[2]);
    let rz = |t: f64| [[t.cos(), -t.sin(), 0.0], [t.sin(), t.cos(), 0.0], [0.0, 0.0, 1.0]];
    let rx = |t: f64| [[1.0, 0.0, 0.0], [0.0, t.cos(), -t.sin()], [0.0, t.sin(), t.cos()]];
    let mul = |p: [[f64; 3]; 3], q: [[f64; 3]; 3]| {
        let mut out = [[0.0; 3]; 3];
        for i in 0..3 {
            for j in 0..3 {
                out[i][j] = (0..3).map(|k| p[i][k] * q[k][j]).sum();
            }
        }
        out
    };
    let mut q = mul(mul(rz(a), rx(b)), rz(c));
    for row in q.iter_mut() {
        for (j, v) in row.iter_mut().enumerate() {
            *v *= scales[j];
        }
    }
    q
}

fn well_conditioned(a: &SymMatrix) -> bool {
    let e = a.eigen();
    e.values().iter().all(|l| l.abs() > 0.05)
}

// determinantal divisors d_k = gcd of all k x k minors, the oracle for the invariant factors
fn minors_gcd(m: &[Vec<i64>], k: usize) -> i128 {
    fn det_i(m: &[Vec<i128>]) -> i128 {
        match m.len() {
            1 => m[0][0],
            n => (0..n)
                .map(|j| {
                    let sub: Vec<Vec<i128>> =
                        m[1..].iter().map(|r| r.iter().enumerate().filter(|e| e.0 != j).map(|e| *e.1).collect()).collect();
                    let s = if j % 2 == 0 { 1 } else { -1 };
                    s * m[0][j] * det_i(&sub)
                })
                .sum(),
        }
    }
    fn subsets(n: usize, k: usize) -> Vec<Vec<usize>> {
        if k == 0 {
            return vec![vec![]];
        }
        (0..n)
            .flat_map(|last| {
                subsets(last, k - 1).into_iter().map(move |mut s| {
                    s.push(last);
                    s
                })
            })
            .collect()
    }
    fn gcd(a: i128, b: i128) -> i128 {
        if b == 0 {
            a.abs()
        } else {
            gcd(b, a % b)
        }
    }
    let mut g = 0;
    for rows in subsets(m.len(), k) {
        for cols in subsets(m[0].len(), k) {
            let sub: Vec<Vec<i128>> = rows.iter().map(|&r| cols.iter().map(|&c| m[r][c] as i128).collect()).collect();
            g = gcd(g, det_i(&sub));
        }
    }
    g
}

fn invariant_factors_oracle(m: &[Vec<i64>]) -> Vec<u64> {
    let kmax = m.len().min(m[0].len());
    let mut out = Vec::new();
    let mut prev = 1i128;
    for k in 1..=kmax {
        let d = minors_gcd(m, k);
        if d == 0 {
            break;
        }
        out.push((d / prev) as u64);
        prev = d;
    }
    out
}

fn int_matrix(max_dim: usize) -> impl Strategy<Value = Vec<Vec<i64>>> {
    (1..=max_dim, 1..=max_dim)
        .prop_flat_map(|(r, c)| prop::collection::vec(prop::collection::vec(-6i64..=6, c), r))
}

fn grid_mask(n: usize) -> impl Strategy<Value = Vec<bool>> {
    prop::collection::vec(prop::bool::weighted(0.7), n * n)
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(128))]

    #[test]
    fn sylvester_inertia(a in sym(), angles in prop::array::uniform3(0.0..6.3f64), scales in prop::array::uniform3(0.3..3.0f64)) {
        prop_assume!(well_conditioned(&a));
        let q = congruence_matrix(angles, scales);
        let b = a.congruence(&q);
        prop_assert_eq!(index_relative(&a, 1e-8), index_relative(&b, 1e-8));
    }

    #[test]
    fn index_of_negation_is_complementary(a in sym()) {
        match (index_relative(&a, 1e-8), index_relative(&a.neg(), 1e-8)) {
            (IndexValue::Index(i), IndexValue::Index(j)) => prop_assert_eq!(i + j, a.dim()),
            (IndexValue::NearSingular, IndexValue::NearSingular) => {}
            other => prop_assert!(false, "inconsistent gate {:?}", other),
        }
    }

    #[test]
    fn determinant_agrees_with_cofactors(a in sym()) {
        let scale = 1.0 + a.max_abs().powi(a.dim() as i32);
        prop_assert!((det(&a) - det_cofactor(&a)).abs() <= 1e-10 * scale);
    }

    #[test]
    fn distortion_is_at_least_one_on_positive_determinants(a in sym()) {
        prop_assume!(det(&a) > 1e-6);
        prop_assert!(distortion(&a) >= 1.0 - 1e-12);
    }

    #[test]
    fn eigen_decomposition_reconstructs(a in sym()) {
        let r = a.eigen().reconstruct();
        for i in 0..a.dim() {
            for j in 0..a.dim() {
                prop_assert!((r.get(i, j) - a.get(i, j)).abs() <= 1e-10 * (1.0 + a.max_abs()));
            }
        }
    }

    #[test]
    fn smith_form_matches_determinantal_divisors(m in int_matrix(4)) {
        let snf = smith_normal_form(&SparseIntMatrix::from_dense(&m));
        let expected: Vec<BigUint> = invariant_factors_oracle(&m).into_iter().map(BigUint::from).collect();
        prop_assert_eq!(snf.factors(), &expected[..]);
    }

    #[test]
    fn smith_form_is_unimodular_invariant(m in int_matrix(4), ops in prop::collection::vec((0usize..4, 0usize..4, -3i64..=3, any::<bool>()), 0..12)) {
        let mut t = m.clone();
        for (i, j, c, on_rows) in ops {
            if on_rows {
                let (i, j) = (i % t.len(), j % t.len());
                if i != j {
                    let src = t[j].clone();
                    for (x, y) in t[i].iter_mut().zip(src) {
                        *x += c * y;
                    }
                }
            } else {
                let w = t[0].len();
                let (i, j) = (i % w, j % w);
                if i != j {
                    for row in t.iter_mut() {
                        row[i] += c * row[j];
                    }
                }
            }
        }
        let a = smith_normal_form(&SparseIntMatrix::from_dense(&m));
        let b = smith_normal_form(&SparseIntMatrix::from_dense(&t));
        prop_assert_eq!(a, b);
    }

    #[test]
    fn boundary_of_boundary_vanishes(mask in grid_mask(6)) {
        let d = GridDomain::cube(2, 0.0, 1.0, 6).unwrap();
        let x = CubicalComplex::from_vertex_mask(&d, &mask);
        prop_assume!(!x.is_empty());
        let pair = CubicalPair::absolute(x);
        let p = boundary_matrix(&pair, 1).checked_mul(&boundary_matrix(&pair, 2)).unwrap();
        prop_assert_eq!(p.nnz(), 0);
    }

    #[test]
    fn euler_characteristic_is_preserved(mask in grid_mask(7)) {
        let d = GridDomain::cube(2, 0.0, 1.0, 7).unwrap();
        let x = CubicalComplex::from_vertex_mask(&d, &mask);
        let h = relative_homology(&CubicalPair::absolute(x.clone()));
        let chi_cells = x.len(0) as i64 - x.len(1) as i64 + x.len(2) as i64;
        let chi_h = h.betti()[0] as i64 - h.betti()[1] as i64 + h.betti()[2] as i64;
        prop_assert_eq!(chi_cells, chi_h);
        prop_assert!(h.is_torsion_free());
    }

    #[test]
    fn puncture_excision(n in 5usize..12, ci in 1usize..10, cj in 1usize..10) {
        let d = GridDomain::cube(2, -1.0, 1.0, n).unwrap();
        let c = [ci.min(n - 2), cj.min(n - 2), 0];
        let full = relative_homology(&puncture(&CubicalComplex::full(&d), &c).unwrap());
        let ball = CubicalComplex::from_vertex_mask(&d, &(0..d.node_count()).map(|f| {
            let idx = d.unflat(f);
            idx[0].abs_diff(c[0]) <= 1 && idx[1].abs_diff(c[1]) <= 1
        }).collect::<Vec<_>>());
        let local = relative_homology(&puncture(&ball, &c).unwrap());
        prop_assert_eq!(full.betti(), &[0, 0, 1]);
        prop_assert_eq!(full, local);
    }
}

fn quadratic_field(diag: [f64; 2], off: f64, n: usize) -> ScalarField {
    let d = GridDomain::cube(2, -1.0, 1.0, n).unwrap();
    ScalarField::from_fn(d, |x| 0.5 * (diag[0] * x[0] * x[0] + diag[1] * x[1] * x[1]) + off * x[0] * x[1] + 0.05 * (3.0 * x[0]).sin() * x[1].cos())
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(24))]

    #[test]
    fn negation_duality_of_index_fields(a in -3.0..3.0f64, b in -3.0..3.0f64, c in -1.0..1.0f64) {
        let u = quadratic_field([a, b], c, 17);
        let plus = index_field(&hessian(&u), 1e-8);
        let minus = index_field(&hessian(&u.negate()), 1e-8);
        let d = u.domain();
        let mut total = 0;
        for f in d.interior_nodes() {
            if let (Some(IndexValue::Index(i)), Some(IndexValue::Index(j))) = (plus.at(f), minus.at(f)) {
                prop_assert_eq!(i + j, 2);
            }
            total += 1;
        }
        prop_assert_eq!(plus.histogram().values().sum::<usize>(), total);
    }

    #[test]
    fn ma_gate_is_monotone(a in 0.2..3.0f64, b in 0.2..3.0f64, delta in 0.01..2.0f64, shrink in 0.0..1.0f64) {
        let h = hessian(&quadratic_field([a, b], 0.0, 17));
        let r = check_ma_hypothesis(&h, delta).unwrap();
        if r.verdict == Verdict::Pass {
            let smaller = (delta * shrink).max(1e-9);
            prop_assert_eq!(check_ma_hypothesis(&h, smaller).unwrap().verdict, Verdict::Pass);
        } else {
            prop_assert!(!r.witnesses.is_empty());
        }
    }

    #[test]
    fn flow_value_decays_at_unit_rate(x in -0.9..0.9f64, y in -0.9..0.9f64, which in 0usize..4) {
        let name = ["quad-aniso", "quartic-saddle", "cosine-saddle", "perturbed-convex"][which];
        let e = gallery_entry(name).unwrap();
        let u = sample(&e, &e.default_domain()).unwrap();
        let field = make_pseudo_gradient(&u);
        let traj = integrate_flow(&field, &[x, y], FlowStop::Exhaust, &FlowOptions::default()).unwrap();
        prop_assert!(traj.identity_defect() <= field.eps_tol());
        prop_assert!(traj.decay_defect(0.25) <= field.eps_tol());
        prop_assert!(traj.times().windows(2).all(|w| w[0] < w[1]));
        prop_assert!(traj.values().windows(2).all(|w| w[1] < w[0]));
        prop_assert!(traj.end_time() <= 4.0 * field.oscillation() + field.eps_tol());
    }

    #[test]
    fn arrival_time_is_monotone_in_the_level(r in 0.4..0.9f64, theta in 0.0..std::f64::consts::TAU, lo in 0.02..0.05f64, gap in 0.001..0.05f64) {
        let e = gallery_entry("quad-aniso").unwrap();
        let field = make_pseudo_gradient(&sample(&e, &e.default_domain()).unwrap());
        let p = [r * theta.cos() * 0.5, r * theta.sin()];
        let v = field.value(&p).unwrap();
        let hi = lo + gap;
        prop_assume!(v > hi + 0.01);
        let opts = FlowOptions::default();
        match (arrival_time(&field, &p, hi, &opts), arrival_time(&field, &p, lo, &opts)) {
            (Ok(t_hi), Ok(t_lo)) => prop_assert!(t_hi < t_lo),
            // the critical guard may stop the lower level first
            (Ok(_), Err(_)) => {}
            other => prop_assert!(false, "{:?}", other),
        }
    }

    #[test]
    fn critical_groups_do_not_depend_on_the_radius(a in prop::sample::select(vec![-2.0, -1.0, 1.0, 3.0]), b in prop::sample::select(vec![-1.5, 1.0, 2.0])) {
        let d = GridDomain::cube(2, -1.0, 1.0, 33).unwrap();
        let u = ScalarField::from_fn(d, |x| 0.5 * (a * x[0] * x[0] + b * x[1] * x[1]));
        let big = critical_groups(&u, &[16, 16, 0], 0.5).unwrap();
        let small = critical_groups(&u, &[16, 16, 0], 0.25).unwrap();
        prop_assert_eq!(&big, &small);
        let expected = (a < 0.0) as usize + (b < 0.0) as usize;
        prop_assert_eq!(big.morse_index(), Some(expected));
    }
}
