use std::collections::BTreeMap;
use std::fs::{self, File};
use std::io::BufWriter;
use std::path::Path;

use anyhow::{anyhow, bail, ensure, Context, Result};
use rayon::prelude::*;
use serde_json::{json, Map, Value};

use critmorse::io::{self, Encoding, Field};
use critmorse::report::{homology_value, report_value, write_json};
use critmorse::svg;
use critmorse_core::critgroups::{critical_groups_detail, expected_groups, find_critical_points_local, CritError, CriticalGroupsDetail};
use critmorse_core::cubhom::{homology, puncture, relative_homology};
use critmorse_core::pseudoflow::{integrate_flow, make_pseudo_gradient, FlowOptions, FlowStop};
use critmorse_core::symfield::{gallery, gallery_entry, hessian, sample, NodeIndex, MAX_DIM};
use critmorse_core::verify::{
    check_ball_convexity, check_c1_stability, check_critgroup_constancy_with, check_ma_hypothesis,
    check_index_constancy, check_ma_negative_hypothesis, check_qk_hypothesis, index_field, random_interior_nodes,
    standard_bumps, Gate,
};
use critmorse_core::{CubicalComplex, GalleryEntry, GridDomain, ScalarField, Verdict, VerificationReport};

use crate::args::{CheckArg, Cli, Command, Coords, EncodingArg, GateArg, Grid, Shape, Source, VerifyArgs};

type Params = BTreeMap<String, Value>;

struct Loaded {
    u: ScalarField,
    entry: Option<GalleryEntry>,
}

fn load(source: &Source, grid: &Grid, params: &mut Params) -> Result<Loaded> {
    let loaded = if let Some(name) = &source.gallery {
        let entry = gallery_entry(name).ok_or_else(|| anyhow!("unknown gallery entry `{name}`; see `critmorse gallery`"))?;
        let def = entry.default_domain();
        let shape = grid.shape.clone().map_or_else(|| def.shape().to_vec(), |s| s.0);
        let bounds = grid.bounds.clone().map_or_else(|| def.bounds().to_vec(), |b| b.0);
        ensure!(shape.len() == entry.dim(), "--shape needs {} entries for `{name}`", entry.dim());
        ensure!(bounds.len() == entry.dim(), "--bounds needs {} pairs for `{name}`", entry.dim());
        let domain = GridDomain::new(&bounds, &shape).context("invalid grid")?;
        let u = sample(&entry, &domain).context("cannot sample the potential")?;
        params.insert("gallery".into(), json!(name));
        Loaded { u, entry: Some(entry) }
    } else {
        let path = source.input.as_ref().expect("clap requires a source");
        ensure!(grid.shape.is_none() && grid.bounds.is_none(), "--shape and --bounds only apply with --gallery");
        let field = io::load_field(path).with_context(|| format!("cannot read {}", path.display()))?;
        let Field::Scalar(u) = field else {
            bail!("{} holds a {} field; a scalar field is required", path.display(), field.kind());
        };
        params.insert("input".into(), json!(path.display().to_string()));
        Loaded { u, entry: None }
    };
    let d = loaded.u.domain();
    params.insert("shape".into(), json!(d.shape()));
    params.insert("bounds".into(), json!(d.bounds().iter().flat_map(|&(lo, hi)| [lo, hi]).collect::<Vec<_>>()));
    Ok(loaded)
}

fn common_params(cli: &Cli) -> Params {
    let mut p = Params::new();
    p.insert("jobs".into(), json!(cli.jobs));
    p.insert("strict".into(), json!(cli.strict));
    p
}

fn prepare_out(dir: &Path) -> Result<()> {
    fs::create_dir_all(dir).with_context(|| format!("cannot create {}", dir.display()))
}

fn write_text(path: &Path, text: &str) -> Result<()> {
    fs::write(path, text).with_context(|| format!("cannot write {}", path.display()))
}

fn finish(cli: &Cli, r: &VerificationReport, params: &Params, extra: Map<String, Value>) -> Result<Verdict> {
    let path = cli.out.join("report.json");
    write_json(&path, &report_value(r, params, extra)).with_context(|| format!("cannot write {}", path.display()))?;
    println!("{}: {} ({})", r.check, r.verdict, path.display());
    Ok(r.verdict)
}

fn node_near(d: &GridDomain, p: &[f64]) -> Result<NodeIndex> {
    ensure!(p.len() == d.dim(), "point needs {} coordinates", d.dim());
    d.nearest_node(p).ok_or_else(|| anyhow!("point {p:?} lies outside the domain"))
}

/// `--point`, else the entry's critical point, else the grid center.
fn center(d: &GridDomain, point: &Option<Coords>, entry: &Option<GalleryEntry>) -> Result<NodeIndex> {
    if let Some(p) = point {
        return node_near(d, &p.0);
    }
    if let Some(c) = entry.as_ref().and_then(GalleryEntry::critical_point) {
        return node_near(d, &c[..d.dim()]);
    }
    let mut idx = [0; MAX_DIM];
    for (i, n) in idx.iter_mut().zip(d.shape()) {
        *i = n / 2;
    }
    Ok(idx)
}

pub fn run(cli: &Cli) -> Result<Verdict> {
    let mut params = common_params(cli);
    match &cli.command {
        Command::Gallery => {
            for e in gallery() {
                let d = e.default_domain();
                let shape: Vec<String> = d.shape().iter().map(|n| n.to_string()).collect();
                let bounds: Vec<String> = d.bounds().iter().map(|(lo, hi)| format!("{lo},{hi}")).collect();
                println!("{:<18} dim={} shape={} bounds={}", e.name(), e.dim(), shape.join(","), bounds.join(";"));
            }
            Ok(Verdict::Pass)
        }
        Command::Sample { source, grid, encoding } => {
            let Loaded { u, .. } = load(source, grid, &mut params)?;
            prepare_out(&cli.out)?;
            let path = cli.out.join("field.cmf");
            let enc = match encoding {
                EncodingArg::Csv => Encoding::Csv,
                EncodingArg::F64le => Encoding::F64Le,
            };
            io::save_field(&path, &Field::Scalar(u), enc).with_context(|| format!("cannot write {}", path.display()))?;
            println!("{}", path.display());
            Ok(Verdict::Pass)
        }
        Command::Index { source, grid, eps_sing } => {
            let Loaded { u, .. } = load(source, grid, &mut params)?;
            params.insert("eps_sing".into(), json!(eps_sing));
            prepare_out(&cli.out)?;
            let h = hessian(&u);
            let field = index_field(&h, *eps_sing);
            let interior = u.domain().interior_count() as f64;
            let mut r = VerificationReport::new("index-field");
            r.histogram = field.histogram().iter().map(|(k, v)| (k.to_string(), *v)).collect();
            r.fractions.gated = 1.0;
            r.fractions.near_singular = field.near_singular() as f64 / interior;
            let classes = field.classes();
            r.verdict = if classes.len() == 1 { Verdict::Pass } else { Verdict::Fail };
            if let [k] = classes[..] {
                r.metric("index", k as f64);
            }
            let title = source.gallery.clone().unwrap_or_else(|| "field".into());
            write_text(&cli.out.join("index.svg"), &svg::index_svg(&field, &title))?;
            write_text(&cli.out.join("det.svg"), &svg::det_svg(&h, &title))?;
            finish(cli, &r, &params, Map::new())
        }
        Command::Critgroups { source, grid, point, radius } => {
            let Loaded { u, entry } = load(source, grid, &mut params)?;
            params.insert("radius".into(), json!(radius));
            if let Some(p) = point {
                params.insert("point".into(), json!(p.0));
            }
            prepare_out(&cli.out)?;
            critgroups(cli, &u, &entry, point, *radius, &params)
        }
        Command::Flow { source, grid, start, level, time, max_steps } => {
            let Loaded { u, .. } = load(source, grid, &mut params)?;
            let start: Vec<Vec<f64>> = start.iter().map(|c| c.0.clone()).collect();
            params.insert("start".into(), json!(start));
            params.insert("level".into(), json!(level));
            params.insert("time".into(), json!(time));
            params.insert("max_steps".into(), json!(max_steps));
            prepare_out(&cli.out)?;
            flow(cli, &u, &start, *level, *time, *max_steps, &params)
        }
        Command::Verify(args) => {
            let Loaded { u, entry } = load(&args.source, &args.grid, &mut params)?;
            verify_params(args, &mut params);
            prepare_out(&cli.out)?;
            verify(cli, args, &u, &entry, &params)
        }
        Command::Homology { shape: Shape(shape), puncture: hole, no_puncture } => {
            ensure!(matches!(shape.len(), 2 | 3), "unsupported dimension {}", shape.len());
            let bounds = vec![(0.0, 1.0); shape.len()];
            let d = GridDomain::new(&bounds, shape).context("invalid grid")?;
            let x = CubicalComplex::full(&d);
            params.insert("shape".into(), json!(shape));
            params.insert("no_puncture".into(), json!(no_puncture));
            let h = if *no_puncture {
                homology(&x)
            } else {
                let mut v = [0; MAX_DIM];
                match hole {
                    Some(Shape(p)) => {
                        ensure!(p.len() == shape.len(), "--puncture needs {} entries", shape.len());
                        v[..p.len()].copy_from_slice(p);
                    }
                    None => (0..shape.len()).for_each(|a| v[a] = shape[a] / 2),
                }
                ensure!(d.in_grid(&v), "--puncture {:?} is outside the grid", &v[..shape.len()]);
                params.insert("puncture".into(), json!(&v[..shape.len()]));
                relative_homology(&puncture(&x, &v)?)
            };
            prepare_out(&cli.out)?;
            let mut r = VerificationReport::new("homology");
            r.notes.push(h.to_string());
            let mut extra = Map::new();
            extra.insert("homology".into(), homology_value(&h));
            let path = cli.out.join("report.json");
            let v = report_value(&r, &params, extra);
            write_json(&path, &v).with_context(|| format!("cannot write {}", path.display()))?;
            println!("{}", serde_json::to_string(&v["homology"])?);
            Ok(Verdict::Pass)
        }
    }
}

fn groups_entry(u: &ScalarField, node: &NodeIndex, detail: &CriticalGroupsDetail, entry: &Option<GalleryEntry>) -> (Value, Option<bool>) {
    let d = u.domain();
    let loc = d.coords(node);
    let a = match entry {
        Some(e) => e.hessian(&loc[..d.dim()]),
        None => Some(hessian(u).matrix_at(d.flat(node))),
    };
    let expected = a.and_then(|a| expected_groups(&a).ok());
    let matches = expected.as_ref().map(|g| *g == detail.groups);
    let v = json!({
        "location": &loc[..d.dim()],
        "value": u.value(node),
        "groups": homology_value(detail.groups.homology()),
        "display": detail.groups.to_string(),
        "expected": expected.as_ref().map(|g| homology_value(g.homology())),
        "tie_sensitive": detail.tie_sensitive,
    });
    (v, matches)
}

fn critgroups(
    cli: &Cli,
    u: &ScalarField,
    entry: &Option<GalleryEntry>,
    point: &Option<Coords>,
    radius: f64,
    params: &Params,
) -> Result<Verdict> {
    let d = u.domain();
    let nodes: Vec<NodeIndex> = match point {
        Some(p) => vec![node_near(d, &p.0)?],
        None => find_critical_points_local(u).into_iter().filter(|c| c.isolated).map(|c| c.node).collect(),
    };
    let details: Vec<_> = nodes.par_iter().map(|x0| critical_groups_detail(u, x0, radius)).collect();
    let mut r = VerificationReport::new("critgroups");
    let mut points = Vec::new();
    let mut any_unstable = false;
    let mut any_mismatch = false;
    for (node, detail) in nodes.iter().zip(details) {
        let loc = d.coords(node)[..d.dim()].to_vec();
        match detail {
            Ok(detail) => {
                let (v, matches) = groups_entry(u, node, &detail, entry);
                *r.histogram.entry(detail.groups.to_string()).or_insert(0) += 1;
                any_unstable |= detail.tie_sensitive;
                if matches == Some(false) {
                    any_mismatch = true;
                    r.witnesses.push(loc);
                }
                points.push(v);
            }
            Err(e @ (CritError::BallOutsideDomain { .. } | CritError::BoundaryNode(_))) => {
                r.notes.push(format!("skipped {loc:?}: {e}"));
            }
            Err(e) => {
                r.notes.push(format!("{loc:?}: {e}"));
                any_unstable = true;
            }
        }
    }
    if points.is_empty() {
        r.notes.push("no isolated critical point could be evaluated".into());
        any_unstable = true;
    }
    r.verdict = if any_mismatch {
        Verdict::Fail
    } else if any_unstable {
        Verdict::Unstable
    } else {
        Verdict::Pass
    };
    r.metric("detected", nodes.len() as f64).metric("evaluated", points.len() as f64);
    let mut extra = Map::new();
    extra.insert("critical_points".into(), Value::Array(points));
    finish(cli, &r, params, extra)
}

fn flow(
    cli: &Cli,
    u: &ScalarField,
    starts: &[Vec<f64>],
    level: Option<f64>,
    time: Option<f64>,
    max_steps: usize,
    params: &Params,
) -> Result<Verdict> {
    let dim = u.domain().dim();
    for s in starts {
        ensure!(s.len() == dim, "--start needs {dim} coordinates");
    }
    let stop = match (level, time) {
        (Some(a), _) => FlowStop::Level(a),
        (None, Some(t)) => {
            ensure!(t >= 0.0, "--time must be nonnegative");
            FlowStop::Time(t)
        }
        (None, None) => FlowStop::Exhaust,
    };
    let field = make_pseudo_gradient(u);
    let opts = FlowOptions { max_steps, ..FlowOptions::default() };
    let trajectories: Vec<_> = starts.par_iter().map(|s| integrate_flow(&field, s, stop, &opts)).collect();
    let mut r = VerificationReport::new("flow");
    let mut summary = Vec::new();
    let mut worst = 0.0_f64;
    for (k, (s, t)) in starts.iter().zip(trajectories).enumerate() {
        let t = t.with_context(|| format!("start {s:?}"))?;
        let path = cli.out.join(format!("trajectory_{k}.csv"));
        let file = File::create(&path).with_context(|| format!("cannot write {}", path.display()))?;
        io::write_trajectory_csv(BufWriter::new(file), &t)?;
        let defect = t.identity_defect();
        worst = worst.max(defect);
        if defect > field.eps_tol() {
            r.witnesses.push(s.clone());
        }
        *r.histogram.entry(t.termination().as_str().to_string()).or_insert(0) += 1;
        summary.push(json!({
            "start": s,
            "end": &t.end_point()[..dim],
            "end_time": t.end_time(),
            "end_value": t.end_value(),
            "steps": t.len() - 1,
            "termination": t.termination().as_str(),
            "identity_defect": defect,
            "csv": path.file_name().map(|n| n.to_string_lossy().into_owned()),
        }));
    }
    r.metric("max_identity_defect", worst).metric("eps_tol", field.eps_tol());
    r.verdict = if r.witnesses.is_empty() { Verdict::Pass } else { Verdict::Fail };
    let mut extra = Map::new();
    extra.insert("trajectories".into(), Value::Array(summary));
    finish(cli, &r, params, extra)
}

fn verify_params(a: &VerifyArgs, p: &mut Params) {
    let check = a.check.to_possible_value_name();
    let gate = a.gate.to_possible_value_name();
    p.insert("check".into(), json!(check));
    p.insert("gate".into(), json!(gate));
    p.insert("delta".into(), json!(a.delta));
    p.insert("bigk".into(), json!(a.bigk));
    p.insert("eps_sing".into(), json!(a.eps_sing));
    p.insert("radius".into(), json!(a.radius));
    p.insert("samples".into(), json!(a.samples));
    p.insert("seed".into(), json!(a.seed));
    p.insert("triples".into(), json!(a.triples));
    p.insert("eta_max".into(), json!(a.eta_max));
    p.insert("point".into(), json!(a.point.as_ref().map(|c| &c.0)));
}

trait ValueName {
    fn to_possible_value_name(&self) -> String;
}

impl<T: clap::ValueEnum> ValueName for T {
    fn to_possible_value_name(&self) -> String {
        self.to_possible_value().map(|v| v.get_name().to_string()).unwrap_or_default()
    }
}

fn gate(a: &VerifyArgs) -> Gate {
    match a.gate {
        GateArg::Ma => Gate::Ma(a.delta),
        GateArg::MaNeg => Gate::MaNegative(a.delta),
        GateArg::Qk => Gate::Qk(a.bigk),
    }
}

fn verify(cli: &Cli, a: &VerifyArgs, u: &ScalarField, entry: &Option<GalleryEntry>, params: &Params) -> Result<Verdict> {
    let d = u.domain();
    let title = a.source.gallery.clone().unwrap_or_else(|| "field".into());
    let r = match a.check {
        CheckArg::Index => {
            let r = check_index_constancy(u, gate(a), a.eps_sing)?;
            let h = hessian(u);
            write_text(&cli.out.join("index.svg"), &svg::index_svg(&index_field(&h, a.eps_sing), &title))?;
            write_text(&cli.out.join("det.svg"), &svg::det_svg(&h, &title))?;
            r
        }
        CheckArg::Gate => {
            let h = hessian(u);
            match a.gate {
                GateArg::Ma => check_ma_hypothesis(&h, a.delta)?,
                GateArg::MaNeg => check_ma_negative_hypothesis(&h, a.delta)?,
                GateArg::Qk => check_qk_hypothesis(&h, a.bigk)?,
            }
        }
        CheckArg::Critgroups => {
            let samples = random_interior_nodes(d, a.samples, a.seed, a.radius);
            check_critgroup_constancy_with(u, &samples, a.radius, |s| {
                s.par_iter().map(|x0| critical_groups_detail(u, x0, a.radius)).collect()
            })?
        }
        CheckArg::Ball => {
            let x0 = center(d, &a.point, entry)?;
            check_ball_convexity(u, &x0, a.radius, a.triples, a.seed)?
        }
        CheckArg::C1 => {
            let x0 = center(d, &a.point, entry)?;
            let bumps = standard_bumps(d, &d.coords(&x0)[..d.dim()]);
            check_c1_stability(u, &x0, a.radius, &bumps, a.eta_max, 1e-3)?
        }
    };
    finish(cli, &r, params, Map::new())
}
