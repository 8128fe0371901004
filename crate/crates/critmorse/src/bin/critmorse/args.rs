use std::path::PathBuf;

use clap::{Args, Parser, Subcommand, ValueEnum};

#[derive(Debug, Parser)]
#[command(name = "critmorse", version, about = "Index fields, critical groups and descent flows of sampled potentials")]
pub struct Cli {
    /// Worker threads; 0 uses one per core.
    #[arg(long, global = true, default_value_t = 0)]
    pub jobs: usize,
    /// Exit with status 1 when the verdict is `fail`.
    #[arg(long, global = true)]
    pub strict: bool,
    /// Output directory for report.json, SVG and CSV files.
    #[arg(long, global = true, default_value = "out")]
    pub out: PathBuf,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// List the built-in potentials.
    Gallery,
    /// Sample a gallery potential and write it as a field file.
    Sample {
        #[command(flatten)]
        source: Source,
        #[command(flatten)]
        grid: Grid,
        #[arg(long, value_enum, default_value_t = EncodingArg::Csv)]
        encoding: EncodingArg,
    },
    /// Hessian index field with SVG rasters.
    Index {
        #[command(flatten)]
        source: Source,
        #[command(flatten)]
        grid: Grid,
        #[arg(long, default_value_t = 1e-8)]
        eps_sing: f64,
    },
    /// Critical groups at detected critical points or at `--point`.
    Critgroups {
        #[command(flatten)]
        source: Source,
        #[command(flatten)]
        grid: Grid,
        /// Evaluate at the node nearest this point instead of detecting.
        #[arg(long, value_parser = parse_reals, allow_hyphen_values = true)]
        point: Option<Coords>,
        #[arg(long, default_value_t = 0.25)]
        radius: f64,
    },
    /// Integrate the normalized descent flow from one or more starts.
    Flow {
        #[command(flatten)]
        source: Source,
        #[command(flatten)]
        grid: Grid,
        /// Start point; repeat for several trajectories.
        #[arg(long, required = true, value_parser = parse_reals, allow_hyphen_values = true)]
        start: Vec<Coords>,
        /// Stop at this level of the potential.
        #[arg(long, allow_hyphen_values = true, conflicts_with = "time")]
        level: Option<f64>,
        /// Stop at this flow time.
        #[arg(long)]
        time: Option<f64>,
        #[arg(long, default_value_t = 100_000)]
        max_steps: usize,
    },
    /// Run one verification check.
    Verify(VerifyArgs),
    /// Homology of a full grid with one vertex punctured.
    Homology {
        /// Nodes per axis, e.g. `9,9`.
        #[arg(long, value_parser = parse_shape)]
        shape: Shape,
        /// Node multi-index to puncture; defaults to the center node.
        #[arg(long, value_parser = parse_shape)]
        puncture: Option<Shape>,
        /// Compute the absolute homology of the grid instead.
        #[arg(long)]
        no_puncture: bool,
    },
}

#[derive(Debug, Args)]
pub struct VerifyArgs {
    #[command(flatten)]
    pub source: Source,
    #[command(flatten)]
    pub grid: Grid,
    #[arg(long, value_enum, default_value_t = CheckArg::Index)]
    pub check: CheckArg,
    #[arg(long, value_enum, default_value_t = GateArg::Ma)]
    pub gate: GateArg,
    /// Threshold for the `ma` and `ma-neg` gates.
    #[arg(long, default_value_t = 0.1)]
    pub delta: f64,
    /// Cone constant for the `qk` gate.
    #[arg(long, default_value_t = 10.0)]
    pub bigk: f64,
    #[arg(long, default_value_t = 1e-8)]
    pub eps_sing: f64,
    /// Ball radius for critical groups.
    #[arg(long, default_value_t = 0.25)]
    pub radius: f64,
    /// Random sample nodes for `critgroups`.
    #[arg(long, default_value_t = 5)]
    pub samples: usize,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    /// Convexity triples for `ball`.
    #[arg(long, default_value_t = 10_000)]
    pub triples: usize,
    /// Largest bump amplitude for `c1`.
    #[arg(long, default_value_t = 1.0)]
    pub eta_max: f64,
    /// Center for `ball` and `c1`; defaults to the entry's critical point or the grid center.
    #[arg(long, value_parser = parse_reals, allow_hyphen_values = true)]
    pub point: Option<Coords>,
}

#[derive(Debug, Args)]
#[group(required = true, multiple = false)]
pub struct Source {
    /// Built-in potential name.
    #[arg(long)]
    pub gallery: Option<String>,
    /// Field file to read.
    #[arg(long)]
    pub input: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct Grid {
    /// Nodes per axis, e.g. `65,65`.
    #[arg(long, value_parser = parse_shape)]
    pub shape: Option<Shape>,
    /// Box bounds, e.g. `-1,1;-1,1`.
    #[arg(long, value_parser = parse_bounds, allow_hyphen_values = true)]
    pub bounds: Option<Bounds>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum EncodingArg {
    Csv,
    F64le,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum CheckArg {
    /// Index constancy on the nodes admitted by `--gate`.
    Index,
    /// The `--gate` hypothesis itself.
    Gate,
    /// Critical-group constancy over random sample nodes.
    Critgroups,
    /// Strict convexity on a ball.
    Ball,
    /// Stability of critical groups under small perturbations.
    C1,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum GateArg {
    Ma,
    MaNeg,
    Qk,
}

/// Comma-separated node counts or multi-index.
#[derive(Debug, Clone, PartialEq)]
pub struct Shape(pub Vec<usize>);

/// Comma-separated coordinates.
#[derive(Debug, Clone, PartialEq)]
pub struct Coords(pub Vec<f64>);

/// Semicolon-separated `lo,hi` pairs.
#[derive(Debug, Clone, PartialEq)]
pub struct Bounds(pub Vec<(f64, f64)>);

fn reals(s: &str) -> Result<Vec<f64>, String> {
    s.split(',')
        .map(|t| match t.trim().parse::<f64>() {
            Ok(v) if v.is_finite() => Ok(v),
            _ => Err(format!("`{t}` is not a finite number")),
        })
        .collect()
}

pub fn parse_shape(s: &str) -> Result<Shape, String> {
    s.split(',').map(|t| t.trim().parse::<usize>().map_err(|_| format!("`{t}` is not a node count"))).collect::<Result<_, _>>().map(Shape)
}

pub fn parse_reals(s: &str) -> Result<Coords, String> {
    reals(s).map(Coords)
}

pub fn parse_bounds(s: &str) -> Result<Bounds, String> {
    s.split(';')
        .map(|pair| match reals(pair)?[..] {
            [lo, hi] => Ok((lo, hi)),
            _ => Err(format!("`{pair}` is not a `lo,hi` pair")),
        })
        .collect::<Result<_, _>>()
        .map(Bounds)
}

#[cfg(test)]
mod tests {
    use super::*;
    use clap::CommandFactory;

    #[test]
    fn definition_is_consistent() {
        Cli::command().debug_assert();
    }

    #[test]
    fn value_parsers() {
        assert_eq!(parse_shape("65,33").unwrap().0, [65, 33]);
        assert_eq!(parse_bounds("-1,1;-0.75,0.75").unwrap().0, [(-1.0, 1.0), (-0.75, 0.75)]);
        assert!(parse_bounds("-1,1;2").is_err());
        assert!(parse_reals("1,nan").is_err());
    }

    #[test]
    fn source_is_exclusive_and_required() {
        assert!(Cli::try_parse_from(["critmorse", "index"]).is_err());
        assert!(Cli::try_parse_from(["critmorse", "index", "--gallery", "a", "--input", "b"]).is_err());
        let cli = Cli::try_parse_from(["critmorse", "verify", "--gallery", "lewicka", "--delta", "0.01", "--jobs", "2"]).unwrap();
        assert_eq!(cli.jobs, 2);
        assert!(matches!(cli.command, Command::Verify(VerifyArgs { delta, .. }) if delta == 0.01));
        let cli = Cli::try_parse_from(["critmorse", "flow", "--gallery", "quad-min", "--start", "-0.5,0", "--start", "0.5,0.25", "--bounds", "-1,1;-1,1"]).unwrap();
        let Command::Flow { start, grid, .. } = cli.command else { panic!("flow") };
        assert_eq!(start, [Coords(vec![-0.5, 0.0]), Coords(vec![0.5, 0.25])]);
        assert_eq!(grid.bounds.unwrap().0, [(-1.0, 1.0), (-1.0, 1.0)]);
    }
}
