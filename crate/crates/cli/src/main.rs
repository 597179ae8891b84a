use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Parser, Subcommand, ValueEnum};
use mlrank_geom::segre::{
    extremum_witness, slice_curvature_field, write_field_csv, LinearFunctional, NormalFrame, ProbeCurve,
    DEFAULT_EPSILON,
};
use mlrank_geom::tensor::{mode_singular_values, multilinear_rank};
use mlrank_geom::tucker::{verify_minimality, MinimalityReport, DEFAULT_MINIMALITY_TOL};
use mlrank_geom::{DenseTensor, GeometryError, MultilinearRank, Shape};
use serde::Serialize;

#[derive(Parser)]
#[command(name = "mlrank", version, about = "Extrinsic geometry of fixed multilinear-rank tensors")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Clone, Copy, PartialEq, Eq, ValueEnum)]
enum Format {
    Json,
    Csv,
}

#[derive(Subcommand)]
enum Command {
    /// Multilinear rank and per-mode singular values of a tensor file.
    Rank {
        file: PathBuf,
        /// Relative singular value threshold (default: 1e-10 * max flattening dimension)
        #[arg(long)]
        tol: Option<f64>,
    },
    /// Check that the mean curvature vanishes at random points of the manifold.
    VerifyMinimality {
        #[arg(long, value_delimiter = ',', required = true)]
        shape: Vec<usize>,
        #[arg(long, value_delimiter = ',', required = true)]
        rank: Vec<usize>,
        #[arg(long, default_value_t = 20, value_parser = clap::value_parser!(u64).range(1..))]
        samples: u64,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long, default_value_t = DEFAULT_MINIMALITY_TOL)]
        tol: f64,
        #[arg(long)]
        output: Option<PathBuf>,
        #[arg(long, value_enum, default_value_t = Format::Json)]
        format: Format,
    },
    /// Witness curves showing a normal functional has no local extremum on
    /// the rank-one tensors at e1 ⊗ … ⊗ e1.
    SegreProbe {
        /// Functional in tensor JSON format
        file: PathBuf,
        #[arg(long, default_value_t = DEFAULT_EPSILON)]
        epsilon: f64,
        #[arg(long)]
        output: Option<PathBuf>,
    },
    /// Mean curvature field of the independence model on a parameter grid.
    SliceField {
        #[arg(long, value_delimiter = ',', required = true)]
        dims: Vec<usize>,
        #[arg(long, default_value_t = 9)]
        grid: usize,
        #[arg(long)]
        output: Option<PathBuf>,
        #[arg(long, value_enum, default_value_t = Format::Csv)]
        format: Format,
    },
}

struct Failure {
    code: u8,
    message: String,
}

impl Failure {
    fn usage(message: impl Into<String>) -> Self {
        Self { code: 2, message: message.into() }
    }
}

impl From<GeometryError> for Failure {
    fn from(e: GeometryError) -> Self {
        let code = match e {
            GeometryError::NotNormal { .. }
            | GeometryError::NoWitness
            | GeometryError::SliceTangency
            | GeometryError::ConstantFunctional => 3,
            GeometryError::NumericalFailure { .. }
            | GeometryError::DegenerateChart { .. }
            | GeometryError::AmbiguousRank { .. } => 1,
            _ => 2,
        };
        Self { code, message: e.to_string() }
    }
}

impl From<std::io::Error> for Failure {
    fn from(e: std::io::Error) -> Self {
        Self::usage(e.to_string())
    }
}

impl From<csv::Error> for Failure {
    fn from(e: csv::Error) -> Self {
        Self::usage(e.to_string())
    }
}

fn read_tensor(path: &Path) -> Result<DenseTensor, Failure> {
    let text = fs::read_to_string(path).map_err(|e| Failure::usage(format!("{}: {e}", path.display())))?;
    serde_json::from_str(&text).map_err(|e| Failure::usage(format!("{}: {e}", path.display())))
}

fn emit(output: Option<&Path>, bytes: &[u8]) -> Result<(), Failure> {
    match output {
        Some(p) => fs::write(p, bytes)?,
        None => std::io::stdout().write_all(bytes)?,
    }
    Ok(())
}

fn to_json<T: Serialize>(value: &T) -> Vec<u8> {
    let mut out = serde_json::to_vec_pretty(value).expect("serializable report");
    out.push(b'\n');
    out
}

#[derive(Serialize)]
struct RankReport {
    ranks: Vec<usize>,
    singular_values_per_mode: Vec<Vec<f64>>,
}

fn joined(v: &[usize]) -> String {
    v.iter().map(|x| x.to_string()).collect::<Vec<_>>().join("x")
}

fn minimality_csv(report: &MinimalityReport) -> Result<Vec<u8>, Failure> {
    let mut w = csv::Writer::from_writer(Vec::new());
    w.write_record(["sample", "shape", "rank", "gram_min_eig", "curvature_ratio", "off_structure_max", "error"])?;
    let opt = |x: Option<f64>| x.map(|v| v.to_string()).unwrap_or_default();
    for r in &report.results {
        w.write_record([
            r.sample.to_string(),
            joined(&r.shape),
            joined(&r.rank),
            opt(r.gram_min_eig),
            opt(r.curvature_ratio),
            opt(r.off_structure_max),
            r.error.clone().unwrap_or_default(),
        ])?;
    }
    w.into_inner().map_err(|e| Failure::usage(e.to_string()))
}

#[derive(Serialize)]
struct ProbeReport {
    level: usize,
    index: Vec<usize>,
    coefficient: f64,
    epsilon: f64,
    u_plus: f64,
    u_minus: f64,
    value_plus: f64,
    value_minus: f64,
    /// ⟨γ^{(j)}(0), ℓ⟩ for j = 0..=level along the curve through the witness index
    pairings: Vec<f64>,
    /// The same along the curve with its first factor reversed
    twin_pairings: Vec<f64>,
}

#[derive(Serialize)]
struct FieldSummary {
    rows: usize,
    min_h_norm: f64,
    max_h_norm: f64,
}

fn run(cli: Cli) -> Result<u8, Failure> {
    match cli.command {
        Command::Rank { file, tol } => {
            let t = read_tensor(&file)?;
            let report = RankReport {
                ranks: multilinear_rank(&t, tol).ranks,
                singular_values_per_mode: mode_singular_values(&t),
            };
            emit(None, &to_json(&report))?;
            Ok(0)
        }
        Command::VerifyMinimality { shape, rank, samples, seed, tol, output, format } => {
            if !(tol > 0.0) {
                return Err(Failure::usage("--tol must be positive"));
            }
            let shape = Shape::new(shape)?;
            let rank = MultilinearRank::new(rank);
            let report = verify_minimality(&shape, &rank, samples as usize, seed, tol)?;
            let bytes = match format {
                Format::Json => to_json(&report),
                Format::Csv => minimality_csv(&report)?,
            };
            emit(output.as_deref(), &bytes)?;
            eprintln!(
                "{} max ratio {:e} over {} samples ({} failed)",
                if report.pass { "PASS" } else { "FAIL" },
                report.max_ratio,
                report.samples,
                report.rank_failures
            );
            Ok(if report.pass { 0 } else { 1 })
        }
        Command::SegreProbe { file, epsilon, output } => {
            if !(epsilon > 0.0) {
                return Err(Failure::usage("--epsilon must be positive"));
            }
            let ell = LinearFunctional::new(read_tensor(&file)?);
            let shape = ell.ell.shape().clone();
            let frame = NormalFrame::new(&shape);
            let w = extremum_witness(&ell, &frame, epsilon)?;
            let gamma = ProbeCurve::through(&shape, &w.index, false)?;
            let twin = ProbeCurve::through(&shape, &w.index, true)?;
            let report = ProbeReport {
                pairings: gamma.pairings(&ell, w.level)?,
                twin_pairings: twin.pairings(&ell, w.level)?,
                level: w.level,
                index: w.index,
                coefficient: w.coefficient,
                epsilon,
                u_plus: w.u_plus,
                u_minus: w.u_minus,
                value_plus: w.value_plus,
                value_minus: w.value_minus,
            };
            emit(output.as_deref(), &to_json(&report))?;
            eprintln!("order {} {:>14} {:>14}", "", "gamma", "twin");
            for (j, (p, q)) in report.pairings.iter().zip(&report.twin_pairings).enumerate() {
                eprintln!("{j:>5} {:>15.6e} {:>14.6e}", p, q);
            }
            Ok(0)
        }
        Command::SliceField { dims, grid, output, format } => {
            if grid < 2 {
                return Err(Failure::usage("--grid must be at least 2"));
            }
            let rows = slice_curvature_field(&dims, grid)?;
            let bytes = match format {
                Format::Csv => {
                    let mut out = Vec::new();
                    write_field_csv(&rows, &mut out)?;
                    out
                }
                Format::Json => to_json(&rows),
            };
            emit(output.as_deref(), &bytes)?;
            let summary = FieldSummary {
                rows: rows.len(),
                min_h_norm: rows.iter().map(|r| r.h_norm).fold(f64::INFINITY, f64::min),
                max_h_norm: rows.iter().map(|r| r.h_norm).fold(0.0, f64::max),
            };
            eprintln!("{}", serde_json::to_string(&summary).expect("plain numbers"));
            Ok(0)
        }
    }
}

fn main() -> ExitCode {
    match run(Cli::parse()) {
        Ok(code) => ExitCode::from(code),
        Err(f) => {
            eprintln!("error: {}", f.message);
            ExitCode::from(f.code)
        }
    }
}
