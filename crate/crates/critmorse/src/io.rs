//! The grid field file format and trajectory CSV export.
//!
//! ```text
//! critmorse-field v1
//! dim=2 kind=scalar
//! shape=65,65
//! bounds=-1,1;-1,1
//! encoding=csv
//! <payload>
//! ```
//!
//! The payload is row-major over the nodes. `csv` has one node per line with
//! comma-separated components; `f64le` is the raw little-endian values.

use std::fs::File;
use std::io::{self, BufRead, BufReader, BufWriter, Write};
use std::path::Path;

use critmorse_core::pseudoflow::FlowTrajectory;
use critmorse_core::symfield::FieldError;
use critmorse_core::symlinalg::packed_len;
use critmorse_core::{GridDomain, ScalarField, SymMatrixField, VectorField};

const MAGIC: &str = "critmorse-field v1";

#[derive(Debug, thiserror::Error)]
pub enum FormatError {
    #[error(transparent)]
    Io(#[from] io::Error),
    #[error("malformed header line {line}: {reason}")]
    MalformedHeader { line: usize, reason: String },
    #[error("unsupported dimension {0}")]
    UnsupportedDimension(String),
    #[error("value count mismatch: expected {expected}, found {found}")]
    ValueCountMismatch { expected: usize, found: usize },
    #[error("non-finite value at position {0}")]
    NonFinite(usize),
    #[error("malformed payload line {line}: {reason}")]
    MalformedPayload { line: usize, reason: String },
    #[error("invalid grid: {0}")]
    Grid(FieldError),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Encoding {
    Csv,
    F64Le,
}

impl Encoding {
    pub fn as_str(self) -> &'static str {
        match self {
            Encoding::Csv => "csv",
            Encoding::F64Le => "f64le",
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum Field {
    Scalar(ScalarField),
    Vector(VectorField),
    SymMatrix(SymMatrixField),
}

impl Field {
    pub fn domain(&self) -> &GridDomain {
        match self {
            Field::Scalar(f) => f.domain(),
            Field::Vector(f) => f.domain(),
            Field::SymMatrix(f) => f.domain(),
        }
    }

    pub fn kind(&self) -> &'static str {
        match self {
            Field::Scalar(_) => "scalar",
            Field::Vector(_) => "vector",
            Field::SymMatrix(_) => "symmatrix",
        }
    }

    fn values(&self) -> &[f64] {
        match self {
            Field::Scalar(f) => f.values(),
            Field::Vector(f) => f.values(),
            Field::SymMatrix(f) => f.values(),
        }
    }
}

fn components(kind: &str, dim: usize) -> usize {
    match kind {
        "scalar" => 1,
        "vector" => dim,
        _ => packed_len(dim),
    }
}

fn join<T: ToString>(items: impl IntoIterator<Item = T>, sep: &str) -> String {
    items.into_iter().map(|x| x.to_string()).collect::<Vec<_>>().join(sep)
}

pub fn write_field<W: Write>(mut w: W, field: &Field, encoding: Encoding) -> Result<(), FormatError> {
    let d = field.domain();
    writeln!(w, "{MAGIC}")?;
    writeln!(w, "dim={} kind={}", d.dim(), field.kind())?;
    writeln!(w, "shape={}", join(d.shape(), ","))?;
    writeln!(w, "bounds={}", join(d.bounds().iter().map(|(lo, hi)| format!("{lo},{hi}")), ";"))?;
    writeln!(w, "encoding={}", encoding.as_str())?;
    let per_node = components(field.kind(), d.dim());
    match encoding {
        Encoding::Csv => {
            for node in field.values().chunks(per_node) {
                writeln!(w, "{}", join(node, ","))?;
            }
        }
        Encoding::F64Le => {
            for v in field.values() {
                w.write_all(&v.to_le_bytes())?;
            }
        }
    }
    w.flush()?;
    Ok(())
}

fn header_value<'a>(line: &'a str, key: &str, n: usize) -> Result<&'a str, FormatError> {
    line.strip_prefix(key)
        .and_then(|rest| rest.strip_prefix('='))
        .ok_or_else(|| FormatError::MalformedHeader { line: n, reason: format!("expected `{key}=...`") })
}

fn parse_list<T: std::str::FromStr>(s: &str, sep: char, line: usize) -> Result<Vec<T>, FormatError> {
    s.split(sep)
        .map(|t| t.trim().parse::<T>().map_err(|_| FormatError::MalformedHeader { line, reason: format!("cannot parse `{t}`") }))
        .collect()
}

pub fn read_field<R: BufRead>(mut r: R) -> Result<Field, FormatError> {
    let mut lines = Vec::with_capacity(5);
    for n in 1..=5 {
        let mut s = String::new();
        if r.read_line(&mut s)? == 0 {
            return Err(FormatError::MalformedHeader { line: n, reason: "unexpected end of file".into() });
        }
        let s = s.trim_end_matches(['\n', '\r']).to_string();
        if n == 1 && s != MAGIC {
            return Err(FormatError::MalformedHeader { line: 1, reason: format!("expected `{MAGIC}`") });
        }
        lines.push(s);
    }
    let mut parts = lines[1].split_whitespace();
    let (Some(dim_part), Some(kind_part), None) = (parts.next(), parts.next(), parts.next()) else {
        return Err(FormatError::MalformedHeader { line: 2, reason: "expected `dim=<n> kind=<kind>`".into() });
    };
    let dim_text = header_value(dim_part, "dim", 2)?;
    let dim: usize = match dim_text.parse() {
        Ok(d @ (2 | 3)) => d,
        _ => return Err(FormatError::UnsupportedDimension(dim_text.to_string())),
    };
    let kind = header_value(kind_part, "kind", 2)?.to_string();
    if !matches!(kind.as_str(), "scalar" | "vector" | "symmatrix") {
        return Err(FormatError::MalformedHeader { line: 2, reason: format!("unknown kind `{kind}`") });
    }
    let shape: Vec<usize> = parse_list(header_value(&lines[2], "shape", 3)?, ',', 3)?;
    let bounds: Vec<(f64, f64)> = header_value(&lines[3], "bounds", 4)?
        .split(';')
        .map(|pair| {
            let v: Vec<f64> = parse_list(pair, ',', 4)?;
            match v[..] {
                [lo, hi] => Ok((lo, hi)),
                _ => Err(FormatError::MalformedHeader { line: 4, reason: format!("bad bounds pair `{pair}`") }),
            }
        })
        .collect::<Result<_, _>>()?;
    if shape.len() != dim || bounds.len() != dim {
        return Err(FormatError::MalformedHeader { line: 3, reason: format!("shape and bounds must have {dim} entries") });
    }
    let encoding = match header_value(&lines[4], "encoding", 5)? {
        "csv" => Encoding::Csv,
        "f64le" => Encoding::F64Le,
        other => return Err(FormatError::MalformedHeader { line: 5, reason: format!("unknown encoding `{other}`") }),
    };
    let domain = GridDomain::new(&bounds, &shape).map_err(FormatError::Grid)?;
    let per_node = components(&kind, dim);
    let expected = domain.node_count() * per_node;

    let values: Vec<f64> = match encoding {
        Encoding::Csv => {
            let mut values = Vec::with_capacity(expected);
            for (i, line) in r.lines().enumerate() {
                let line = line?;
                if line.trim().is_empty() {
                    continue;
                }
                for tok in line.split(',') {
                    let v: f64 = tok.trim().parse().map_err(|_| FormatError::MalformedPayload {
                        line: i + 6,
                        reason: format!("cannot parse `{tok}`"),
                    })?;
                    values.push(v);
                }
            }
            values
        }
        Encoding::F64Le => {
            let mut bytes = Vec::new();
            r.read_to_end(&mut bytes)?;
            if bytes.len() % 8 != 0 {
                return Err(FormatError::ValueCountMismatch { expected, found: bytes.len() / 8 });
            }
            bytes.chunks_exact(8).map(|c| f64::from_le_bytes(c.try_into().expect("8 bytes"))).collect()
        }
    };
    if values.len() != expected {
        return Err(FormatError::ValueCountMismatch { expected, found: values.len() });
    }
    if let Some(i) = values.iter().position(|v| !v.is_finite()) {
        return Err(FormatError::NonFinite(i));
    }
    let field = match kind.as_str() {
        "scalar" => ScalarField::new(domain, values).map(Field::Scalar),
        "vector" => VectorField::new(domain, values).map(Field::Vector),
        _ => SymMatrixField::new(domain, values).map(Field::SymMatrix),
    };
    field.map_err(FormatError::Grid)
}

pub fn save_field(path: &Path, field: &Field, encoding: Encoding) -> Result<(), FormatError> {
    write_field(BufWriter::new(File::create(path)?), field, encoding)
}

pub fn load_field(path: &Path) -> Result<Field, FormatError> {
    read_field(BufReader::new(File::open(path)?))
}

/// Columns `t, x1..xn, u`.
pub fn write_trajectory_csv<W: Write>(mut w: W, traj: &FlowTrajectory) -> io::Result<()> {
    let n = traj.dim();
    let header: Vec<String> =
        std::iter::once("t".to_string()).chain((1..=n).map(|k| format!("x{k}"))).chain(std::iter::once("u".into())).collect();
    writeln!(w, "{}", header.join(","))?;
    for ((t, p), u) in traj.times().iter().zip(traj.points()).zip(traj.values()) {
        writeln!(w, "{t},{},{u}", join(&p[..n], ","))?;
    }
    w.flush()
}
