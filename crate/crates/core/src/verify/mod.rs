//! End-to-end checks on sampled potentials.
//!
//! Pointwise statements ("almost everywhere") are read on the grid as
//! statements about interior nodes, with the fractions of nodes that were
//! gated out or near-singular recorded next to the verdict.

use alloc::collections::BTreeMap;
use alloc::format;
use alloc::string::{String, ToString};
use alloc::vec;
use alloc::vec::Vec;
use core::fmt;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::critgroups::{critical_groups_detail, shifted_potential, CritError, CriticalGroups, CriticalGroupsDetail};
use crate::cubhom::NodeRegion;
use crate::math;
use crate::symfield::{gradient, hessian, GridDomain, NodeIndex, ScalarField, SymMatrixField, VectorField, MAX_DIM};
use crate::symlinalg::{det, eigen_sym, in_cone_qk, index_relative, op_norm, IndexValue, SymMatrix, DEFAULT_EPS_SING};

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum Verdict {
    Pass,
    Fail,
    Unstable,
    /// The hypothesis of the checked statement does not hold; the report
    /// documents what happens instead.
    HypothesisViolated,
}

impl Verdict {
    pub fn as_str(self) -> &'static str {
        match self {
            Verdict::Pass => "pass",
            Verdict::Fail => "fail",
            Verdict::Unstable => "unstable",
            Verdict::HypothesisViolated => "hypothesis-violated",
        }
    }
}

impl fmt::Display for Verdict {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

/// A report parameter value.
#[derive(Debug, Clone, PartialEq)]
pub enum Param {
    Real(f64),
    Int(u64),
    Text(String),
    Flag(bool),
    Reals(Vec<f64>),
    Ints(Vec<u64>),
}

#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct Fractions {
    /// Interior nodes admitted by the hypothesis gate.
    pub gated: f64,
    /// Interior nodes whose Hessian is near-singular.
    pub near_singular: f64,
}

/// Outcome of one check.
#[derive(Debug, Clone, PartialEq)]
pub struct VerificationReport {
    pub check: String,
    pub verdict: Verdict,
    /// Named hypothesis clauses and whether each held.
    pub hypothesis: BTreeMap<String, bool>,
    pub parameters: BTreeMap<String, Param>,
    pub histogram: BTreeMap<String, usize>,
    /// Coordinates of failing nodes or points.
    pub witnesses: Vec<Vec<f64>>,
    pub fractions: Fractions,
    pub metrics: BTreeMap<String, f64>,
    pub notes: Vec<String>,
}

impl VerificationReport {
    pub fn new(check: &str) -> Self {
        Self {
            check: check.to_string(),
            verdict: Verdict::Pass,
            hypothesis: BTreeMap::new(),
            parameters: BTreeMap::new(),
            histogram: BTreeMap::new(),
            witnesses: Vec::new(),
            fractions: Fractions::default(),
            metrics: BTreeMap::new(),
            notes: Vec::new(),
        }
    }

    pub fn param(&mut self, key: &str, value: Param) -> &mut Self {
        self.parameters.insert(key.to_string(), value);
        self
    }

    pub fn metric(&mut self, key: &str, value: f64) -> &mut Self {
        self.metrics.insert(key.to_string(), value);
        self
    }

    fn witness(&mut self, d: &GridDomain, flat: usize) {
        self.witnesses.push(d.coords_flat(flat)[..d.dim()].to_vec());
    }

    fn domain_params(&mut self, d: &GridDomain) {
        self.param("shape", Param::Ints(d.shape().iter().map(|&n| n as u64).collect()));
        self.param("bounds", Param::Reals(d.bounds().iter().flat_map(|&(lo, hi)| [lo, hi]).collect()));
    }
}

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum VerifyError {
    #[error("gradient is not injective near the samples: {} colliding pairs", .0.len())]
    NotInjective(Vec<(NodeIndex, NodeIndex)>),
    #[error("no samples given")]
    NoSamples,
    #[error(transparent)]
    Crit(#[from] CritError),
    #[error("parameter {name} must be positive, got {value}")]
    NonPositive { name: &'static str, value: f64 },
}

fn positive(name: &'static str, value: f64) -> Result<(), VerifyError> {
    if value > 0.0 {
        Ok(())
    } else {
        Err(VerifyError::NonPositive { name, value })
    }
}

/// Pointwise Hessian index on interior nodes.
#[derive(Debug, Clone, PartialEq)]
pub struct IndexField {
    domain: GridDomain,
    /// `None` on boundary nodes.
    values: Vec<Option<IndexValue>>,
    histogram: BTreeMap<IndexValue, usize>,
}

impl IndexField {
    pub fn domain(&self) -> &GridDomain {
        &self.domain
    }

    pub fn at(&self, flat: usize) -> Option<IndexValue> {
        self.values[flat]
    }

    pub fn histogram(&self) -> &BTreeMap<IndexValue, usize> {
        &self.histogram
    }

    pub fn near_singular(&self) -> usize {
        self.histogram.get(&IndexValue::NearSingular).copied().unwrap_or(0)
    }

    /// Index values that occur, ascending.
    pub fn classes(&self) -> Vec<usize> {
        self.histogram.keys().filter_map(|v| v.as_index()).collect()
    }
}

/// Index of every interior Hessian, gated relative to its operator norm.
pub fn index_field(h: &SymMatrixField, eps_sing: f64) -> IndexField {
    let d = h.domain();
    let mut values = vec![None; d.node_count()];
    let mut histogram = BTreeMap::new();
    for f in d.interior_nodes() {
        let v = index_relative(&h.matrix_at(f), eps_sing);
        values[f] = Some(v);
        *histogram.entry(v).or_insert(0) += 1;
    }
    IndexField { domain: d.clone(), values, histogram }
}

fn histogram_keys(h: &BTreeMap<IndexValue, usize>) -> BTreeMap<String, usize> {
    h.iter().map(|(k, v)| (k.to_string(), *v)).collect()
}

/// Pointwise hypothesis on the Hessian.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Gate {
    /// `det A >= δ`.
    Ma(f64),
    /// `det A <= -δ`.
    MaNegative(f64),
    /// `|A|^n <= K det A` with `det A > 0`.
    Qk(f64),
}

impl Gate {
    pub fn name(&self) -> &'static str {
        match self {
            Gate::Ma(_) => "ma",
            Gate::MaNegative(_) => "ma-neg",
            Gate::Qk(_) => "qk",
        }
    }

    fn parameter(&self) -> (&'static str, f64) {
        match *self {
            Gate::Ma(d) | Gate::MaNegative(d) => ("delta", d),
            Gate::Qk(k) => ("bigk", k),
        }
    }

    pub fn admits(&self, a: &SymMatrix) -> bool {
        match *self {
            Gate::Ma(delta) => det(a) >= delta,
            Gate::MaNegative(delta) => det(a) <= -delta,
            Gate::Qk(big_k) => {
                let slack = DEFAULT_EPS_SING * math::powi(op_norm(a), a.dim());
                det(a) > 0.0 && in_cone_qk(a, big_k, slack)
            }
        }
    }
}

/// Pass iff every interior Hessian satisfies the gate.
pub fn check_gate(h: &SymMatrixField, gate: Gate) -> VerificationReport {
    let d = h.domain();
    let mut r = VerificationReport::new(&format!("{}-hypothesis", gate.name()));
    r.domain_params(d);
    let (key, value) = gate.parameter();
    r.param("gate", Param::Text(gate.name().to_string()));
    r.param(key, Param::Real(value));
    let mut admitted = 0;
    let mut total = 0;
    let (mut min_det, mut max_det) = (f64::INFINITY, f64::NEG_INFINITY);
    for f in d.interior_nodes() {
        let a = h.matrix_at(f);
        let dt = det(&a);
        min_det = min_det.min(dt);
        max_det = max_det.max(dt);
        total += 1;
        if gate.admits(&a) {
            admitted += 1;
        } else {
            r.witness(d, f);
        }
    }
    r.fractions.gated = admitted as f64 / total as f64;
    r.metric("min_det", min_det).metric("max_det", max_det);
    let holds = admitted == total;
    r.hypothesis.insert(gate.name().to_string(), holds);
    r.verdict = if holds { Verdict::Pass } else { Verdict::Fail };
    r
}

/// `det D^2u >= δ` at every interior node; the report also records whether
/// the negative variant `det D^2u <= -δ` holds.
pub fn check_ma_hypothesis(h: &SymMatrixField, delta: f64) -> Result<VerificationReport, VerifyError> {
    positive("delta", delta)?;
    let mut r = check_gate(h, Gate::Ma(delta));
    let neg = check_gate(h, Gate::MaNegative(delta));
    r.hypothesis.insert("ma-neg".to_string(), neg.verdict == Verdict::Pass);
    Ok(r)
}

/// `det D^2u <= -δ` at every interior node.
pub fn check_ma_negative_hypothesis(h: &SymMatrixField, delta: f64) -> Result<VerificationReport, VerifyError> {
    positive("delta", delta)?;
    Ok(check_gate(h, Gate::MaNegative(delta)))
}

/// `D^2u ∈ Q_K` at every interior node, with the smallest admissible `K`
/// reported as `minimal_k` when every determinant is positive.
pub fn check_qk_hypothesis(h: &SymMatrixField, big_k: f64) -> Result<VerificationReport, VerifyError> {
    positive("bigk", big_k)?;
    let mut r = check_gate(h, Gate::Qk(big_k));
    let d = h.domain();
    let mut minimal = 0.0_f64;
    let mut all_positive = true;
    for f in d.interior_nodes() {
        let a = h.matrix_at(f);
        let eig = eigen_sym(&a);
        let dt: f64 = eig.values().iter().product();
        let nrm = eig.values().iter().fold(0.0_f64, |acc, l| acc.max(l.abs()));
        if dt > 0.0 {
            minimal = minimal.max(math::powi(nrm, a.dim()) / dt);
        } else {
            all_positive = false;
        }
    }
    if all_positive {
        r.metric("minimal_k", minimal);
    } else {
        r.notes.push("some determinant is not positive; no K admits every node".to_string());
    }
    Ok(r)
}

/// Index constancy on the nodes admitted by `gate`.
///
/// When the gate fails somewhere the verdict is
/// [`Verdict::HypothesisViolated`]: the histogram of the admitted nodes is
/// still reported, witnesses are the nodes failing the gate, and constancy is
/// not asserted.
pub fn check_index_constancy(u: &ScalarField, gate: Gate, eps_sing: f64) -> Result<VerificationReport, VerifyError> {
    let (key, value) = gate.parameter();
    positive(key, value)?;
    let d = u.domain();
    let h = hessian(u);
    let field = index_field(&h, eps_sing);
    let mut r = VerificationReport::new("index-constancy");
    r.domain_params(d);
    r.param("gate", Param::Text(gate.name().to_string()));
    r.param(key, Param::Real(value));
    r.param("eps_sing", Param::Real(eps_sing));

    let interior: Vec<usize> = d.interior_nodes().collect();
    let admitted: Vec<bool> = interior.iter().map(|&f| gate.admits(&h.matrix_at(f))).collect();
    let mut gated = BTreeMap::new();
    for (&f, &ok) in interior.iter().zip(admitted.iter()) {
        if ok {
            *gated.entry(field.at(f).expect("interior node")).or_insert(0usize) += 1;
        }
    }
    let n_admitted = admitted.iter().filter(|&&b| b).count();
    r.histogram = histogram_keys(&gated);
    r.fractions.gated = n_admitted as f64 / interior.len() as f64;
    r.fractions.near_singular = field.near_singular() as f64 / interior.len() as f64;
    r.metric("interior_nodes", interior.len() as f64);

    let holds = n_admitted == interior.len();
    r.hypothesis.insert(gate.name().to_string(), holds);
    if !holds {
        r.verdict = Verdict::HypothesisViolated;
        r.notes.push("hypothesis violated; constancy not asserted".to_string());
        for (&f, &ok) in interior.iter().zip(admitted.iter()) {
            if !ok {
                r.witness(d, f);
            }
        }
        return Ok(r);
    }

    let classes: Vec<(usize, usize)> =
        gated.iter().filter_map(|(k, &n)| k.as_index().map(|i| (i, n))).collect();
    match classes.len() {
        0 => {
            r.verdict = Verdict::Unstable;
            r.notes.push("every admitted node is near-singular".to_string());
        }
        1 => {
            r.verdict = Verdict::Pass;
            r.metric("index", classes[0].0 as f64);
        }
        _ => {
            r.verdict = Verdict::Fail;
            let majority = classes.iter().max_by_key(|c| (c.1, usize::MAX - c.0)).expect("nonempty").0;
            for &f in &interior {
                if field.at(f).and_then(IndexValue::as_index).is_some_and(|i| i != majority) {
                    r.witness(d, f);
                }
            }
        }
    }
    Ok(r)
}

/// `h * min |det| / (2 * max |A|)` over the sample Hessians.
pub fn injectivity_epsilon(h: &SymMatrixField, samples: &[NodeIndex]) -> f64 {
    let d = h.domain();
    let mut min_det = f64::INFINITY;
    let mut max_norm = 0.0_f64;
    for s in samples {
        let a = h.matrix_at(d.flat(s));
        min_det = min_det.min(det(&a).abs());
        max_norm = max_norm.max(op_norm(&a));
    }
    if max_norm == 0.0 {
        return 0.0;
    }
    d.min_spacing() * min_det / (2.0 * max_norm)
}

/// Sample/neighbour pairs along the axes whose gradients differ by at most
/// `eps_inj`.
pub fn gradient_collisions(g: &VectorField, samples: &[NodeIndex], eps_inj: f64) -> Vec<(NodeIndex, NodeIndex)> {
    let d = g.domain();
    let dim = d.dim();
    let mut out = Vec::new();
    for s in samples {
        let gs = g.at(d.flat(s));
        for a in 0..dim {
            for up in [false, true] {
                let mut n = *s;
                if up {
                    n[a] += 1;
                } else if n[a] == 0 {
                    continue;
                } else {
                    n[a] -= 1;
                }
                if !d.in_grid(&n) {
                    continue;
                }
                let gn = g.at(d.flat(&n));
                let dist = math::sqrt((0..dim).map(|k| (gs[k] - gn[k]) * (gs[k] - gn[k])).sum());
                if dist <= eps_inj {
                    out.push((*s, n));
                }
            }
        }
    }
    out
}

/// Critical groups of `u_{x0}` across sample nodes, computed sequentially.
pub fn check_critgroup_constancy(
    u: &ScalarField,
    samples: &[NodeIndex],
    radius: f64,
) -> Result<VerificationReport, VerifyError> {
    check_critgroup_constancy_with(u, samples, radius, |s| {
        s.iter().map(|x0| critical_groups_detail(u, x0, radius)).collect()
    })
}

/// Like [`check_critgroup_constancy`], with the per-sample computations
/// delegated to `compute`, which must return one result per sample in order.
pub fn check_critgroup_constancy_with<F>(
    u: &ScalarField,
    samples: &[NodeIndex],
    radius: f64,
    compute: F,
) -> Result<VerificationReport, VerifyError>
where
    F: FnOnce(&[NodeIndex]) -> Vec<Result<CriticalGroupsDetail, CritError>>,
{
    if samples.is_empty() {
        return Err(VerifyError::NoSamples);
    }
    positive("radius", radius)?;
    let d = u.domain();
    let h = hessian(u);
    let g = gradient(u);
    let eps_inj = injectivity_epsilon(&h, samples);
    let collisions = gradient_collisions(&g, samples, eps_inj);
    if !collisions.is_empty() {
        return Err(VerifyError::NotInjective(collisions));
    }

    let mut r = VerificationReport::new("critgroup-constancy");
    r.domain_params(d);
    r.param("radius", Param::Real(radius));
    r.param("samples", Param::Int(samples.len() as u64));
    r.metric("eps_inj", eps_inj);
    r.hypothesis.insert("gradient-injective-sampled".to_string(), true);
    r.notes.push(format!(
        "gradient injectivity sampled at {} nodes against their axis neighbours",
        samples.len()
    ));

    let results = compute(samples);
    assert_eq!(results.len(), samples.len(), "one result per sample");
    let mut stable: Vec<(NodeIndex, CriticalGroups)> = Vec::new();
    let mut unstable = 0usize;
    for (s, res) in samples.iter().zip(results) {
        let detail = res?;
        if detail.tie_sensitive {
            unstable += 1;
        } else {
            stable.push((*s, detail.groups));
        }
    }
    r.metric("unstable_samples", unstable as f64);
    let mut classes: Vec<(CriticalGroups, usize)> = Vec::new();
    for (_, gr) in &stable {
        match classes.iter_mut().find(|c| &c.0 == gr) {
            Some(c) => c.1 += 1,
            None => classes.push((gr.clone(), 1)),
        }
    }
    for (gr, n) in &classes {
        r.histogram.insert(gr.to_string(), *n);
    }
    r.verdict = match classes.len() {
        0 => Verdict::Unstable,
        1 => Verdict::Pass,
        _ => {
            let majority = classes.iter().max_by_key(|c| c.1).expect("nonempty").0.clone();
            for (s, gr) in &stable {
                if *gr != majority {
                    r.witness(d, d.flat(s));
                }
            }
            Verdict::Fail
        }
    };
    if let (Verdict::Pass, Some(k)) = (r.verdict, classes.first().and_then(|c| c.0.morse_index())) {
        r.metric("index", k as f64);
    }
    Ok(r)
}

/// Supporting hyperplane at `x0`, sampled gradient injectivity, and then
/// `n_triples` random grid segments tested for strict convexity.
///
/// Each triple uses nodes `y0`, `y1 = y0 + m v` and `y_λ = y0 + k v` with
/// `λ = k / m`, so no interpolation enters the comparison
/// `u(y_λ) < λ u(y1) + (1-λ) u(y0) - margin`. The margin is
/// `λ(1-λ)|y1-y0|^2 μ / 4` with `μ` the smallest Hessian eigenvalue found on
/// the grid (clamped at zero).
pub fn check_ball_convexity(
    u: &ScalarField,
    x0: &NodeIndex,
    radius: f64,
    n_triples: usize,
    seed: u64,
) -> Result<VerificationReport, VerifyError> {
    positive("radius", radius)?;
    let d = u.domain();
    let dim = d.dim();
    let mut r = VerificationReport::new("ball-convexity");
    r.domain_params(d);
    r.param("radius", Param::Real(radius));
    r.param("triples", Param::Int(n_triples as u64));
    r.param("seed", Param::Int(seed));
    r.param("x0", Param::Reals(d.coords(x0)[..dim].to_vec()));

    let shifted = shifted_potential(u, x0)?;
    let ball = NodeRegion::Ball { center: *x0, radius }.to_mask(d);
    let tol = 1e-10 * u.oscillation();
    let below: Vec<usize> = (0..d.node_count()).filter(|&f| ball[f] && shifted.at(f) < -tol).collect();
    let suphyp = below.is_empty();
    r.hypothesis.insert("supporting-hyperplane".to_string(), suphyp);

    let h = hessian(u);
    let g = gradient(u);
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut samples = vec![*x0];
    samples.extend(random_nodes(d, 16, &mut rng, 1));
    let eps_inj = injectivity_epsilon(&h, &samples);
    let collisions = gradient_collisions(&g, &samples, eps_inj);
    let injective = collisions.is_empty();
    r.hypothesis.insert("gradient-injective-sampled".to_string(), injective);
    r.metric("eps_inj", eps_inj);

    if !suphyp || !injective {
        r.verdict = Verdict::HypothesisViolated;
        if !suphyp {
            r.notes.push("supporting hyperplane condition fails at x0".to_string());
            for f in below {
                r.witness(d, f);
            }
        }
        if !injective {
            r.notes.push(format!("gradient not injective: {} colliding pairs", collisions.len()));
            for (a, _) in collisions {
                r.witness(d, d.flat(&a));
            }
        }
        return Ok(r);
    }

    let mu = d
        .interior_nodes()
        .map(|f| eigen_sym(&h.matrix_at(f)).values()[0])
        .fold(f64::INFINITY, f64::min)
        .max(0.0);
    r.metric("min_eigenvalue", mu);
    let mut violations = 0usize;
    let mut drawn = 0usize;
    while drawn < n_triples {
        let Some((y0, step, m, k)) = random_segment(d, &mut rng) else { continue };
        drawn += 1;
        let lambda = k as f64 / m as f64;
        let at = |t: usize| {
            let mut n = y0;
            for a in 0..dim {
                n[a] = (y0[a] as i64 + t as i64 * step[a]) as usize;
            }
            n
        };
        let (n0, n1, nl) = (at(0), at(m), at(k));
        let len2: f64 = (0..dim)
            .map(|a| {
                let s = (m as i64 * step[a]) as f64 * d.spacing()[a];
                s * s
            })
            .sum();
        let margin = 0.25 * lambda * (1.0 - lambda) * len2 * mu;
        let chord = lambda * u.value(&n1) + (1.0 - lambda) * u.value(&n0);
        let gap = chord - margin - u.value(&nl);
        if gap.is_nan() || gap <= 0.0 {
            violations += 1;
            r.witness(d, d.flat(&nl));
        }
    }
    r.metric("violations", violations as f64);
    r.verdict = if violations == 0 { Verdict::Pass } else { Verdict::Fail };
    Ok(r)
}

/// A random grid segment `(y0, v, m, k)` with `m >= 2`, `0 < k < m` and
/// `y0 + m v` inside the grid.
fn random_segment(d: &GridDomain, rng: &mut ChaCha8Rng) -> Option<(NodeIndex, [i64; MAX_DIM], usize, usize)> {
    let dim = d.dim();
    let mut y0 = [0usize; MAX_DIM];
    let mut step = [0i64; MAX_DIM];
    for a in 0..dim {
        y0[a] = rng.gen_range(0..d.shape()[a]);
        step[a] = rng.gen_range(-3i64..=3);
    }
    if step[..dim].iter().all(|&s| s == 0) {
        return None;
    }
    let mut max_m = usize::MAX;
    for a in 0..dim {
        let room = match step[a].signum() {
            1 => (d.shape()[a] - 1 - y0[a]) as i64 / step[a],
            -1 => y0[a] as i64 / -step[a],
            _ => continue,
        };
        max_m = max_m.min(room as usize);
    }
    if max_m < 2 {
        return None;
    }
    let m = rng.gen_range(2..=max_m);
    let k = rng.gen_range(1..m);
    Some((y0, step, m, k))
}

fn random_nodes(d: &GridDomain, count: usize, rng: &mut ChaCha8Rng, margin: usize) -> Vec<NodeIndex> {
    let dim = d.dim();
    let mut out: Vec<NodeIndex> = Vec::with_capacity(count);
    let available: usize = (0..dim).map(|a| d.shape()[a].saturating_sub(2 * margin)).product();
    while out.len() < count.min(available) {
        let mut n = [0usize; MAX_DIM];
        for a in 0..dim {
            n[a] = rng.gen_range(margin..d.shape()[a] - margin);
        }
        if !out.contains(&n) {
            out.push(n);
        }
    }
    out
}

/// Distinct random nodes whose grid ball of `radius` stays inside the box,
/// with at least one node to spare on each side.
pub fn random_interior_nodes(d: &GridDomain, count: usize, seed: u64, radius: f64) -> Vec<NodeIndex> {
    let margin = (0..d.dim()).map(|a| math::ceil(radius / d.spacing()[a]) as usize + 1).max().unwrap_or(1);
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    random_nodes(d, count, &mut rng, margin.max(1))
}

/// Smooth perturbations `s` with `max|s| + max|Ds| <= 1` on the grid:
/// `x1^2 e^{-|x|^2}`, `x2^2 e^{-|x|^2}`, `x1 x2 e^{-|x|^2}` and
/// `e^{-4|x|^2}`, each centered at `center` and rescaled.
pub fn standard_bumps(d: &GridDomain, center: &[f64]) -> Vec<ScalarField> {
    let dim = d.dim();
    type Bump = fn(&[f64]) -> (f64, [f64; MAX_DIM]);
    fn gauss(y: &[f64], rate: f64) -> (f64, [f64; MAX_DIM]) {
        let r2: f64 = y.iter().map(|v| v * v).sum();
        let e = math::exp(-rate * r2);
        let mut g = [0.0; MAX_DIM];
        for (k, v) in y.iter().enumerate() {
            g[k] = -2.0 * rate * v * e;
        }
        (e, g)
    }
    fn product(y: &[f64], poly: f64, dpoly: [f64; MAX_DIM]) -> (f64, [f64; MAX_DIM]) {
        let (e, ge) = gauss(y, 1.0);
        let mut g = [0.0; MAX_DIM];
        for k in 0..y.len() {
            g[k] = dpoly[k] * e + poly * ge[k];
        }
        (poly * e, g)
    }
    let shapes: [Bump; 4] = [
        |y| product(y, y[0] * y[0], [2.0 * y[0], 0.0, 0.0]),
        |y| product(y, y[1] * y[1], [0.0, 2.0 * y[1], 0.0]),
        |y| product(y, y[0] * y[1], [y[1], y[0], 0.0]),
        |y| gauss(y, 4.0),
    ];
    shapes
        .iter()
        .map(|shape| {
            let eval = |f: usize| {
                let p = d.coords_flat(f);
                let mut y = [0.0; MAX_DIM];
                for k in 0..dim {
                    y[k] = p[k] - center[k];
                }
                shape(&y[..dim])
            };
            let (mut sup, mut sup_grad) = (0.0_f64, 0.0_f64);
            for f in 0..d.node_count() {
                let (v, g) = eval(f);
                sup = sup.max(v.abs());
                sup_grad = sup_grad.max(math::sqrt(g.iter().map(|x| x * x).sum()));
            }
            let scale = 1.0 / (sup + sup_grad);
            let values = (0..d.node_count()).map(|f| scale * eval(f).0).collect();
            ScalarField::new(d.clone(), values).expect("bumps are finite")
        })
        .collect()
}

/// Critical groups of `u + η s` at `x0` for each bump `s` and both signs of
/// `η`, with `η*` the bisected smallest amplitude at which any of them
/// changes.
///
/// Passes when `η* > 0` and amplitudes `η*/8, η*/4, 3η*/8, η*/2` leave the
/// groups unchanged for every bump and sign. Without a change up to
/// `eta_max` the reported `η*` is `eta_max` itself.
pub fn check_c1_stability(
    u: &ScalarField,
    x0: &NodeIndex,
    radius: f64,
    bumps: &[ScalarField],
    eta_max: f64,
    rel_tol: f64,
) -> Result<VerificationReport, VerifyError> {
    positive("eta_max", eta_max)?;
    positive("rel_tol", rel_tol)?;
    let d = u.domain();
    let mut r = VerificationReport::new("c1-stability");
    r.domain_params(d);
    r.param("radius", Param::Real(radius));
    r.param("eta_max", Param::Real(eta_max));
    r.param("rel_tol", Param::Real(rel_tol));
    r.param("bumps", Param::Int(bumps.len() as u64));
    r.param("x0", Param::Reals(d.coords(x0)[..d.dim()].to_vec()));

    let base = critical_groups_detail(u, x0, radius)?.groups;
    r.histogram.insert(base.to_string(), 1);
    let changes = |eta: f64| -> Result<bool, VerifyError> {
        for s in bumps {
            for sign in [1.0, -1.0] {
                let v = u.add_scaled(s, sign * eta).map_err(|_| CritError::NearSingular)?;
                if critical_groups_detail(&v, x0, radius)?.groups != base {
                    return Ok(true);
                }
            }
        }
        Ok(false)
    };

    let eta_star = if !changes(eta_max)? {
        r.notes.push("no change up to eta_max; eta_star is a lower bound".to_string());
        eta_max
    } else {
        let (mut lo, mut hi) = (0.0, eta_max);
        while hi - lo > rel_tol * hi {
            let mid = 0.5 * (lo + hi);
            if changes(mid)? {
                hi = mid;
            } else {
                lo = mid;
            }
        }
        hi
    };
    r.metric("eta_star", eta_star);
    let mut stable = eta_star > 0.0;
    for frac in [0.125, 0.25, 0.375, 0.5] {
        if changes(frac * eta_star)? {
            stable = false;
            r.notes.push(format!("groups change at amplitude {}", frac * eta_star));
        }
    }
    r.verdict = if stable { Verdict::Pass } else { Verdict::Fail };
    if !stable {
        r.witness(d, d.flat(x0));
    }
    Ok(r)
}
