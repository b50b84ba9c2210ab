//! Command-line front end: input resolution, subcommands and exit codes.

pub mod verify;

use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand};
use serde::{Deserialize, Serialize};

use mahler_core::descent::{descend, DescentOptions};
use mahler_core::off::read_off_file;
use mahler_core::polar::{santalo_point, ProductReport, DEFAULT_TOL};
use mahler_core::shadow::{persistence_interval, sweep};
use mahler_core::shapes::{builtin, random_polytope};
use mahler_core::speeds::{admissibility_violations, dimension_bound_check, nontrivial_speed, speed_report};
use mahler_core::{Error, Point3, Polytope, SpeedAssignment};

/// Stable process exit codes.
pub mod exit {
    pub const OK: i32 = 0;
    pub const VERIFY_FAILED: i32 = 1;
    pub const BAD_INPUT: i32 = 2;
    pub const NON_CONVERGENCE: i32 = 3;
    pub const NOT_ADMISSIBLE: i32 = 4;
}

#[derive(Debug, Parser)]
#[command(
    name = "mahler",
    version,
    about = "Volume products, admissible speeds and shadow systems of 3D polytopes"
)]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Santalo point and volume product as a JSON report.
    Product {
        #[command(flatten)]
        input: Input,
        /// Relative gradient tolerance of the Santalo solver.
        #[arg(long, default_value_t = DEFAULT_TOL)]
        tol: f64,
    },
    /// Admissible-speed analysis as a JSON report.
    Speeds {
        #[command(flatten)]
        input: Input,
        /// Shadow direction `x,y,z`; defaults to the bound direction.
        #[arg(long, value_parser = parse_vector, allow_hyphen_values = true)]
        theta: Option<[f64; 3]>,
    },
    /// Run the invariant suites over built-ins and seeded random polytopes.
    Verify {
        #[command(flatten)]
        input: OptionalInput,
        /// Number of random polytopes when no input is given.
        #[arg(long, default_value_t = 20)]
        count: usize,
    },
    /// Volume-product descent; writes the trace and OFF snapshots.
    Descend {
        #[command(flatten)]
        input: Input,
        #[arg(long, default_value_t = 50)]
        cap_iter: usize,
        /// Relative decrease required to accept a step.
        #[arg(long, default_value_t = 1e-7)]
        tol: f64,
        /// Run directory for trace.jsonl, summary.json and step_NNN.off.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Sample a shadow system over its persistence interval as CSV.
    Sweep {
        #[command(flatten)]
        input: Input,
        /// JSON sidecar `{"theta": [x, y, z], "alpha": [...]}`; without it a
        /// nontrivial admissible speed is chosen.
        #[arg(long)]
        speed: Option<PathBuf>,
        /// Direction for the automatic speed.
        #[arg(long, value_parser = parse_vector, allow_hyphen_values = true, conflicts_with = "speed")]
        theta: Option<[f64; 3]>,
        #[arg(long, default_value_t = 9)]
        samples: usize,
        /// Largest half-width tried, as a fraction of the diameter.
        #[arg(long, default_value_t = 0.25)]
        cap: f64,
        /// Write the CSV here instead of stdout.
        #[arg(long)]
        out: Option<PathBuf>,
    },
}

/// Exactly one polytope source plus the seed for random input.
#[derive(Debug, Clone, Args)]
pub struct Input {
    #[command(flatten)]
    pub from: Required,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
}

#[derive(Debug, Clone, Args)]
#[group(required = true, multiple = false)]
pub struct Required {
    /// OFF file.
    #[arg(long = "in", value_name = "PATH")]
    pub path: Option<PathBuf>,
    /// Built-in shape: simplex (tetrahedron), cube, octahedron, dodecahedron, icosahedron.
    #[arg(long)]
    pub shape: Option<String>,
    /// Hull of N random points on the sphere.
    #[arg(long, value_name = "N")]
    pub random: Option<usize>,
}

/// As [`Input`], but the source may be omitted.
#[derive(Debug, Clone, Args)]
pub struct OptionalInput {
    #[command(flatten)]
    pub from: Optional,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
}

#[derive(Debug, Clone, Args)]
#[group(required = false, multiple = false)]
pub struct Optional {
    /// OFF file.
    #[arg(long = "in", value_name = "PATH")]
    pub path: Option<PathBuf>,
    /// Built-in shape.
    #[arg(long)]
    pub shape: Option<String>,
    /// Vertex count of the random instances.
    #[arg(long, value_name = "N")]
    pub random: Option<usize>,
}

/// Where a polytope comes from.
#[derive(Debug, Clone, PartialEq)]
pub enum Source {
    File(PathBuf),
    Shape(String),
    Random { vertices: usize, seed: u64 },
}

impl Input {
    pub fn source(&self) -> Source {
        let f = &self.from;
        match (&f.path, &f.shape, f.random) {
            (Some(p), _, _) => Source::File(p.clone()),
            (_, Some(s), _) => Source::Shape(s.clone()),
            (_, _, Some(n)) => Source::Random {
                vertices: n,
                seed: self.seed,
            },
            _ => unreachable!("clap requires one input"),
        }
    }
}

impl Source {
    pub fn load(&self) -> Result<Polytope, Failure> {
        match self {
            Source::File(path) => read_off_file(path).map_err(|e| Failure::from_core(&e).context(path.display())),
            Source::Shape(name) => builtin(name).map_err(|e| Failure::from_core(&e)),
            Source::Random { vertices, seed } => random_polytope(*vertices, *seed).map_err(|e| Failure::from_core(&e)),
        }
    }

    pub fn name(&self) -> String {
        match self {
            Source::File(p) => p.display().to_string(),
            Source::Shape(s) => s.clone(),
            Source::Random { vertices, seed } => format!("random(n={vertices}, seed={seed})"),
        }
    }
}

/// An error with its exit code.
#[derive(Debug, Clone, PartialEq)]
pub struct Failure {
    pub code: i32,
    pub message: String,
}

impl Failure {
    pub fn new(code: i32, message: impl Into<String>) -> Failure {
        Failure {
            code,
            message: message.into(),
        }
    }

    pub fn from_core(e: &Error) -> Failure {
        let code = match e {
            Error::NonConvergence { .. } => exit::NON_CONVERGENCE,
            Error::NotAdmissible(_) => exit::NOT_ADMISSIBLE,
            _ => exit::BAD_INPUT,
        };
        Failure::new(code, e.to_string())
    }

    fn context(mut self, what: impl std::fmt::Display) -> Failure {
        self.message = format!("{what}: {}", self.message);
        self
    }
}

impl std::fmt::Display for Failure {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(&self.message)
    }
}

impl From<Error> for Failure {
    fn from(e: Error) -> Failure {
        Failure::from_core(&e)
    }
}

fn io_failure(path: &Path, e: std::io::Error) -> Failure {
    Failure::new(exit::BAD_INPUT, format!("{}: {e}", path.display()))
}

fn parse_vector(s: &str) -> Result<[f64; 3], String> {
    let parts: Vec<&str> = s.split(',').map(str::trim).collect();
    let [x, y, z] = parts[..] else {
        return Err(format!("expected three comma-separated numbers, got '{s}'"));
    };
    let num = |t: &str| t.parse::<f64>().map_err(|e| format!("'{t}': {e}"));
    let v = [num(x)?, num(y)?, num(z)?];
    if v.iter().all(|c| c.is_finite()) && v.iter().any(|&c| c != 0.0) {
        Ok(v)
    } else {
        Err("direction must be finite and nonzero".into())
    }
}

/// Speed sidecar file contents.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct SpeedFile {
    pub theta: [f64; 3],
    pub alpha: Vec<f64>,
}

pub fn read_speed_file(path: &Path, p: &Polytope) -> Result<SpeedAssignment, Failure> {
    let text = fs::read_to_string(path).map_err(|e| io_failure(path, e))?;
    let file: SpeedFile =
        serde_json::from_str(&text).map_err(|e| Failure::new(exit::BAD_INPUT, format!("{}: {e}", path.display())))?;
    if file.alpha.len() != p.num_vertices() {
        return Err(Failure::new(
            exit::BAD_INPUT,
            format!(
                "{}: {} speeds for {} vertices",
                path.display(),
                file.alpha.len(),
                p.num_vertices()
            ),
        ));
    }
    // OFF order is position order; the sidecar is indexed the same way
    Ok(SpeedAssignment::new(Point3::from(file.theta), file.alpha)?)
}

/// Names each violated facet by its OFF vertex indices.
pub fn not_admissible(p: &Polytope, bad: &[(usize, f64)]) -> Failure {
    let lines: Vec<String> = bad
        .iter()
        .map(|&(k, r)| {
            let ring = p
                .facet(k)
                .map(|f| f.ring.iter().map(usize::to_string).collect::<Vec<_>>().join(" "));
            format!(
                "  facet {k}: vertices [{}], relative residual {r:.3e}",
                ring.unwrap_or_default()
            )
        })
        .collect();
    Failure::new(
        exit::NOT_ADMISSIBLE,
        format!(
            "speed is not admissible; violated facet constraints:\n{}",
            lines.join("\n")
        ),
    )
}

#[derive(Debug, Serialize)]
struct DescendSummary<'a> {
    initial_product: f64,
    final_product: f64,
    steps: usize,
    termination: mahler_core::descent::Termination,
    monotone: bool,
    anomalous: bool,
    final_vertices: usize,
    out: Option<&'a Path>,
}

fn json_line(out: &mut dyn Write, value: &impl Serialize) -> Result<(), Failure> {
    let text = serde_json::to_string_pretty(value).expect("report serializes");
    writeln!(out, "{text}").map_err(|e| Failure::new(exit::BAD_INPUT, format!("stdout: {e}")))
}

/// Runs one command, writing its report to `out`. Returns the exit code on
/// success (nonzero only for a failed `verify`).
pub fn run(cli: &Cli, out: &mut dyn Write) -> Result<i32, Failure> {
    match &cli.command {
        Command::Product { input, tol } => {
            let p = input.source().load()?;
            let s = santalo_point(&p, *tol)?;
            json_line(out, &ProductReport::new(&p, &s))?;
        }
        Command::Speeds { input, theta } => {
            let p = input.source().load()?;
            let report = speed_report(&p, theta.map(Point3::from))?;
            json_line(out, &report)?;
        }
        Command::Verify { input, count } => {
            let report = verify::run_suite(input, *count)?;
            json_line(out, &report)?;
            if report.failed > 0 {
                return Ok(exit::VERIFY_FAILED);
            }
        }
        Command::Descend {
            input,
            cap_iter,
            tol,
            out: dir,
        } => {
            let p = input.source().load()?;
            let opts = DescentOptions {
                cap_iter: *cap_iter,
                tol: *tol,
                ..DescentOptions::default()
            };
            let trace = descend(&p, &opts)?;
            if let Some(dir) = dir {
                trace.write_to(dir)?;
            }
            json_line(
                out,
                &DescendSummary {
                    initial_product: trace.initial_product,
                    final_product: trace.final_product,
                    steps: trace.steps.len(),
                    termination: trace.termination,
                    monotone: trace.is_monotone(1e-9),
                    anomalous: trace.anomalous,
                    final_vertices: trace.final_polytope().map_or(p.num_vertices(), Polytope::num_vertices),
                    out: dir.as_deref(),
                },
            )?;
        }
        Command::Sweep {
            input,
            speed,
            theta,
            samples,
            cap,
            out: path,
        } => {
            let p = input.source().load()?;
            let s = match speed {
                Some(file) => read_speed_file(file, &p)?,
                None => {
                    let theta = match theta {
                        Some(t) => Point3::from(*t),
                        None => Point3::from(dimension_bound_check(&p)?.theta),
                    };
                    nontrivial_speed(&p, &theta)?.ok_or_else(|| {
                        Failure::new(
                            exit::BAD_INPUT,
                            "no nontrivial admissible speed in this direction; pass --speed",
                        )
                    })?
                }
            };
            let bad = admissibility_violations(&p, &s);
            if !bad.is_empty() {
                return Err(not_admissible(&p, &bad));
            }
            let c = persistence_interval(&p, &s, cap * p.diameter())?;
            let csv = sweep(&p, &s, c, *samples)?.to_csv();
            match path {
                Some(path) => fs::write(path, csv).map_err(|e| io_failure(path, e))?,
                None => out
                    .write_all(csv.as_bytes())
                    .map_err(|e| Failure::new(exit::BAD_INPUT, format!("stdout: {e}")))?,
            }
        }
    }
    Ok(exit::OK)
}
