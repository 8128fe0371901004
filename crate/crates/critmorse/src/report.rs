//! JSON reports with a stable key order and no run-dependent fields.

use std::collections::BTreeMap;
use std::path::Path;

use critmorse_core::verify::Param;
use critmorse_core::{HomologyResult, VerificationReport};
use serde_json::{json, Map, Value};

pub fn param_value(p: &Param) -> Value {
    match p {
        Param::Real(x) => json!(x),
        Param::Int(n) => json!(n),
        Param::Text(s) => json!(s),
        Param::Flag(b) => json!(b),
        Param::Reals(v) => json!(v),
        Param::Ints(v) => json!(v),
    }
}

/// Betti numbers and torsion coefficients; coefficients beyond `u64` are
/// written as decimal strings.
pub fn homology_value(h: &HomologyResult) -> Value {
    let torsion: Vec<Value> = h
        .torsion()
        .iter()
        .map(|t| Value::Array(t.iter().map(|c| u64::try_from(c).map_or_else(|_| json!(c.to_string()), |n| json!(n))).collect()))
        .collect();
    json!({ "betti": h.betti(), "torsion": torsion })
}

/// Report object. `cli_params` are merged over the check's own parameters;
/// `extra` entries become additional top-level keys.
pub fn report_value(r: &VerificationReport, cli_params: &BTreeMap<String, Value>, extra: Map<String, Value>) -> Value {
    let mut parameters: Map<String, Value> = r.parameters.iter().map(|(k, v)| (k.clone(), param_value(v))).collect();
    parameters.extend(cli_params.iter().map(|(k, v)| (k.clone(), v.clone())));
    let mut out = json!({
        "check": r.check,
        "verdict": r.verdict.as_str(),
        "hypothesis": r.hypothesis,
        "parameters": parameters,
        "histogram": r.histogram,
        "witnesses": r.witnesses,
        "fractions": { "gated": r.fractions.gated, "near_singular": r.fractions.near_singular },
        "metrics": r.metrics,
        "notes": r.notes,
    });
    out.as_object_mut().expect("object").extend(extra);
    out
}

pub fn to_pretty(v: &Value) -> String {
    let mut s = serde_json::to_string_pretty(v).expect("JSON values always serialize");
    s.push('\n');
    s
}

pub fn write_json(path: &Path, v: &Value) -> std::io::Result<()> {
    std::fs::write(path, to_pretty(v))
}
