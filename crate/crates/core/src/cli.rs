//! Command-line front end. `run` parses arguments, executes one subcommand
//! and returns the process exit status.

use std::ffi::OsString;
use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand, ValueEnum};
use serde_json::{json, Value};

use crate::delta::{delta_invariant, max_normalized_delta, OptimizerOptions};
use crate::immersion::{
    evaluate_samples, maximum_principle_failures, sample_points, DerivativeSource, IdealityReport, InequalityReport,
    SampledGrid, Shape,
};
use crate::partition::{enumerate_tuples, Partition};
use crate::spectral::{
    antipodal_quotient, lambda1_closed_form, lambda1_mesh, parse_off, verify_pullback, MeshFile, Registry,
    SolverOptions, TriMesh,
};
use crate::tensor::{CurvatureTensor, TensorFile, SYMMETRY_TOL};
use crate::verdict::{
    covering_obstruction, delta0_of, ideality_criterion, ideality_criterion_estimate, Delta0Method, Outcome, Verdict,
};

pub const EXIT_OK: i32 = 0;
pub const EXIT_ERROR: i32 = 1;
pub const EXIT_INCONCLUSIVE: i32 = 2;
pub const EXIT_USAGE: i32 = 64;

/// Environment variable capping the number of worker threads.
pub const THREADS_ENV: &str = "DELTA_IDEAL_THREADS";

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum Format {
    Json,
    Csv,
    Text,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum Quotient {
    Antipodal,
}

#[derive(Debug, Parser)]
#[command(
    name = "delta-ideal",
    version,
    about = "Delta-invariants, the inequality delta <= c*H^2, and ideal-embedding obstructions"
)]
pub struct Cli {
    #[arg(long, global = true, value_enum, default_value = "json")]
    pub format: Format,
    #[arg(long, global = true)]
    pub verbose: bool,
    /// Seed for every random choice (optimizer restarts, sample points, solver start).
    #[arg(long, global = true, default_value_t = 42)]
    pub seed: u64,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Args)]
pub struct TensorArgs {
    /// JSON tensor file: {"n", "components"} or {"n", "model": "constant", "c0"}.
    #[arg(long, conflicts_with_all = ["model", "n", "c0"])]
    pub tensor: Option<PathBuf>,
    #[arg(long, value_enum)]
    pub model: Option<Model>,
    #[arg(long)]
    pub n: Option<usize>,
    #[arg(long, allow_negative_numbers = true)]
    pub c0: Option<f64>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum Model {
    Constant,
}

#[derive(Debug, Args)]
pub struct OptimizerArgs {
    #[arg(long, default_value_t = 32)]
    pub restarts: usize,
    #[arg(long, default_value_t = 500)]
    pub max_iter: usize,
    #[arg(long, default_value_t = 1e-8)]
    pub gradient_tol: f64,
}

impl OptimizerArgs {
    fn options(&self, seed: u64) -> OptimizerOptions {
        OptimizerOptions {
            restarts: self.restarts,
            max_iterations: self.max_iter,
            gradient_tol: self.gradient_tol,
            rng_seed: seed,
            ..OptimizerOptions::default()
        }
    }
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// delta(n1,...,nk) = tau - inf sum_j tau(L_j) over mutually orthogonal subspaces L_j of dimension n_j.
    Delta {
        #[command(flatten)]
        tensor: TensorArgs,
        /// Comma-separated parts, e.g. "2,2"; "" or "()" for the empty tuple.
        #[arg(long)]
        partition: String,
        #[command(flatten)]
        opt: OptimizerArgs,
    },
    /// Normalized maximum delta0 = max over admissible tuples of delta(n1,...,nk) / c(n1,...,nk).
    DeltaMax {
        #[command(flatten)]
        tensor: TensorArgs,
        #[command(flatten)]
        opt: OptimizerArgs,
    },
    /// Table of c(n1,...,nk) = n^2 (n + k - 1 - sum n_j) / (2 (n + k - sum n_j)) over all admissible tuples.
    Coeff {
        #[arg(long)]
        n: usize,
    },
    /// First positive Laplace eigenvalue, from the registry or a triangle mesh (cotangent Laplacian).
    Lambda1 {
        /// Registered space, e.g. sphere:3 or rp:3.
        space: Option<String>,
        /// Mesh file, OFF or JSON {"vertices", "faces", "identification"}.
        #[arg(long, conflicts_with_all = ["space", "icosphere", "torus"])]
        mesh: Option<PathBuf>,
        /// Subdivided icosahedron of the unit sphere at this level.
        #[arg(long, conflicts_with_all = ["space", "torus"])]
        icosphere: Option<u32>,
        /// Flat square torus of side 2*pi with this many cells per side.
        #[arg(long, conflicts_with_all = ["space"])]
        torus: Option<usize>,
        #[arg(long, value_enum)]
        quotient: Option<Quotient>,
        #[arg(long)]
        registry: Option<PathBuf>,
        #[arg(long, default_value_t = 1e-10)]
        rayleigh_tol: f64,
    },
    /// Criterion: an irreducible compact homogeneous space admits an ideal embedding iff lambda1 = n * delta0.
    CheckIdeal {
        space: String,
        #[arg(long)]
        registry: Option<PathBuf>,
        /// Compute delta0 with the optimizer instead of the closed form.
        #[arg(long)]
        optimizer: bool,
        /// Use this estimated lambda1 instead of the registered value (requires --error-bar).
        #[arg(long, requires = "error_bar")]
        lambda1: Option<f64>,
        #[arg(long, requires = "lambda1")]
        error_bar: Option<f64>,
        #[command(flatten)]
        opt: OptimizerArgs,
    },
    /// Covering obstruction: lambda1(base) >= lambda1(cover), and a strict gap rules out ideal embeddings of the base.
    Obstruct {
        cover: String,
        base: String,
        #[arg(long)]
        registry: Option<PathBuf>,
        #[arg(long)]
        optimizer: bool,
        #[command(flatten)]
        opt: OptimizerArgs,
    },
    /// Pointwise check of delta(n1,...,nk) <= c(n1,...,nk) H^2 and of the ideality residual H^2 - delta0.
    VerifyInequality {
        /// Builtin shape: sphere, plane, cylinder, torus, ellipsoid, clifford.
        #[arg(long, conflicts_with = "grid")]
        shape: Option<String>,
        /// Comma-separated shape parameters, e.g. "2,1" for the torus.
        #[arg(long, allow_hyphen_values = true)]
        params: Option<String>,
        /// Sampled immersion {"n", "m", "grid": [[point, position], ...]}.
        #[arg(long)]
        grid: Option<PathBuf>,
        #[arg(long, default_value_t = 200)]
        points: usize,
        /// Finite-difference partials instead of analytic ones.
        #[arg(long)]
        numeric: bool,
        #[command(flatten)]
        opt: OptimizerArgs,
    },
}

#[derive(Debug)]
enum CliError {
    Usage(String),
    Failure(String),
}

impl<E: std::error::Error> From<E> for CliError {
    fn from(e: E) -> Self {
        CliError::Failure(e.to_string())
    }
}

struct Report {
    json: Value,
    csv: String,
    text: String,
    status: i32,
}

impl Report {
    fn clean(json: Value, csv: String, text: String) -> Self {
        Self {
            json,
            csv,
            text,
            status: EXIT_OK,
        }
    }
}

/// Parses `args` (including the program name) and runs the command.
pub fn run<I, T>(args: I, out: &mut dyn Write, err: &mut dyn Write) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            use clap::error::ErrorKind;
            return match e.kind() {
                ErrorKind::DisplayHelp | ErrorKind::DisplayVersion => {
                    let _ = write!(out, "{e}");
                    EXIT_OK
                }
                _ => {
                    let _ = write!(err, "{e}");
                    EXIT_USAGE
                }
            };
        }
    };
    let threads = match std::env::var(THREADS_ENV) {
        Ok(v) => match v.trim().parse::<usize>() {
            Ok(t) if t > 0 => Some(t),
            _ => {
                let _ = writeln!(err, "error: {THREADS_ENV} must be a positive integer, got '{v}'");
                return EXIT_USAGE;
            }
        },
        Err(_) => None,
    };
    let result = match threads {
        Some(t) => match rayon::ThreadPoolBuilder::new().num_threads(t).build() {
            Ok(pool) => pool.install(|| execute(&cli)),
            Err(e) => Err(CliError::Failure(e.to_string())),
        },
        None => execute(&cli),
    };
    match result {
        Ok(report) => {
            let body = match cli.format {
                Format::Json => {
                    let mut s = serde_json::to_string_pretty(&report.json).expect("report serializes");
                    s.push('\n');
                    s
                }
                Format::Csv => report.csv,
                Format::Text => report.text,
            };
            if out.write_all(body.as_bytes()).is_err() {
                return EXIT_ERROR;
            }
            report.status
        }
        Err(CliError::Usage(msg)) => {
            let _ = writeln!(err, "error: {msg}");
            EXIT_USAGE
        }
        Err(CliError::Failure(msg)) => {
            let _ = writeln!(err, "error: {msg}");
            EXIT_ERROR
        }
    }
}

fn execute(cli: &Cli) -> Result<Report, CliError> {
    let seed = cli.seed;
    match &cli.command {
        Command::Delta { tensor, partition, opt } => {
            let r = load_tensor(tensor)?;
            let p = parse_partition(r.dim(), partition)?;
            let res = delta_invariant(&r, &p, &opt.options(seed))?;
            let mut json = res.to_json(cli.verbose);
            json["n"] = json!(r.dim());
            let csv = format!(
                "partition,value,objective,converged\n\"{}\",{:e},{:e},{}\n",
                p, res.value, res.objective, res.converged
            );
            let text = format!("delta{} = {}\n", p, res.value);
            Ok(Report::clean(json, csv, text))
        }
        Command::DeltaMax { tensor, opt } => {
            let r = load_tensor(tensor)?;
            let res = max_normalized_delta(&r, &opt.options(seed))?;
            let mut json = serde_json::to_value(&res).expect("serializes");
            json["n"] = json!(r.dim());
            let mut csv = String::from("partition,delta,c,normalized,converged\n");
            let mut text = String::new();
            for t in &res.tuples {
                csv.push_str(&format!(
                    "\"{}\",{:e},{:e},{:e},{}\n",
                    t.partition, t.delta, t.c, t.normalized, t.converged
                ));
                text.push_str(&format!(
                    "{:<12} delta = {:<22} delta/c = {}\n",
                    t.partition.to_string(),
                    t.delta,
                    t.normalized
                ));
            }
            text.push_str(&format!("max delta/c = {} at {}\n", res.value, res.partition));
            Ok(Report::clean(json, csv, text))
        }
        Command::Coeff { n } => {
            let tuples = enumerate_tuples(*n).map_err(|e| CliError::Usage(e.to_string()))?;
            let rows: Vec<Value> = tuples
                .iter()
                .map(|p| json!({"partition": p, "c": p.c_coefficient()}))
                .collect();
            let mut csv = String::from("partition,c\n");
            let mut text = String::new();
            for p in &tuples {
                csv.push_str(&format!("\"{}\",{}\n", p, p.c_coefficient()));
                text.push_str(&format!("{:<12} {}\n", p.to_string(), p.c_coefficient()));
            }
            Ok(Report::clean(json!({"n": n, "coefficients": rows}), csv, text))
        }
        Command::Lambda1 {
            space,
            mesh,
            icosphere,
            torus,
            quotient,
            registry,
            rayleigh_tol,
        } => {
            if let Some(name) = space {
                if quotient.is_some() {
                    return Err(CliError::Usage(
                        "--quotient applies to meshes, not registered spaces".into(),
                    ));
                }
                let reg = load_registry(registry.as_deref())?;
                let s = reg.get(name)?;
                let v = lambda1_closed_form(s)?;
                return Ok(Report::clean(
                    json!({"space": name, "lambda1": v, "method": "registry"}),
                    format!("space,lambda1\n{name},{v}\n"),
                    format!("lambda1({name}) = {v}\n"),
                ));
            }
            let cover = match (mesh, icosphere, torus) {
                (Some(path), None, None) => load_mesh(path)?,
                (None, Some(level), None) => {
                    if *level > 7 {
                        return Err(CliError::Usage("--icosphere level must be at most 7".into()));
                    }
                    TriMesh::icosphere(*level)
                }
                (None, None, Some(cells)) => TriMesh::flat_torus(*cells, 2.0 * std::f64::consts::PI)?,
                _ => {
                    return Err(CliError::Usage(
                        "give exactly one of a space name, --mesh, --icosphere or --torus".into(),
                    ))
                }
            };
            let opts = SolverOptions {
                rayleigh_tol: *rayleigh_tol,
                seed,
                ..SolverOptions::default()
            };
            let (target, cover_result) = match quotient {
                Some(Quotient::Antipodal) => {
                    let q = antipodal_quotient(&cover)?;
                    let cover_result = if cli.verbose {
                        Some(lambda1_mesh(&cover, &opts)?)
                    } else {
                        None
                    };
                    (lambda1_mesh(&q, &opts)?, cover_result)
                }
                None => (lambda1_mesh(&cover, &opts)?, None),
            };
            let mut json = serde_json::to_value(&target).expect("serializes");
            json["method"] = json!("mesh");
            if let Some(c) = &cover_result {
                json["cover_lambda1"] = json!(c.lambda1);
                json["pullback"] =
                    serde_json::to_value(verify_pullback(&cover, c, &target, 1e-6)?).expect("serializes");
            }
            let csv = format!(
                "lambda1,solver_iterations,vertices,faces,dof\n{},{},{},{},{}\n",
                target.lambda1, target.solver_iterations, target.mesh_size.0, target.mesh_size.1, target.dof_count
            );
            let text = format!(
                "lambda1 = {} ({} dof, {} iterations)\n",
                target.lambda1, target.dof_count, target.solver_iterations
            );
            Ok(Report::clean(json, csv, text))
        }
        Command::CheckIdeal {
            space,
            registry,
            optimizer,
            lambda1,
            error_bar,
            opt,
        } => {
            let reg = load_registry(registry.as_deref())?;
            let s = reg.get(space)?;
            let method = delta0_method(*optimizer, opt, seed);
            let d = delta0_of(s, &method)?;
            let v = match (lambda1, error_bar) {
                (Some(l), Some(e)) => ideality_criterion_estimate(s, *l, *e, d)?,
                _ => ideality_criterion(s, d)?,
            };
            Ok(verdict_report(&v))
        }
        Command::Obstruct {
            cover,
            base,
            registry,
            optimizer,
            opt,
        } => {
            let reg = load_registry(registry.as_deref())?;
            let v = covering_obstruction(reg.get(cover)?, reg.get(base)?, &delta0_method(*optimizer, opt, seed))?;
            Ok(verdict_report(&v))
        }
        Command::VerifyInequality {
            shape,
            params,
            grid,
            points,
            numeric,
            opt,
        } => {
            let samples = match (shape, grid) {
                (Some(name), None) => {
                    let params = parse_list(params.as_deref().unwrap_or(""))?;
                    let shape = Shape::from_name(name, &params)?;
                    let mut im = shape.immersion();
                    if *numeric {
                        im = im.with_source(DerivativeSource::numeric());
                    }
                    sample_points(&im, &shape.sample_points(*points, seed))?
                }
                (None, Some(path)) => SampledGrid::from_json(&read(path)?)?.samples()?,
                _ => return Err(CliError::Usage("give exactly one of --shape or --grid".into())),
            };
            let evals = evaluate_samples(&samples, &opt.options(seed))?;
            let ineq = InequalityReport::from_evaluations(&evals);
            let ideal = IdealityReport::from_evaluations(&evals);
            let mp = maximum_principle_failures(&evals);
            let summary: Vec<Value> = ineq
                .tuples
                .iter()
                .map(|t| {
                    let mut v = json!({
                        "partition": t.partition,
                        "c": t.c,
                        "min_slack": t.min_slack,
                        "max_abs_slack": t.max_abs_slack,
                    });
                    if cli.verbose {
                        v["records"] = serde_json::to_value(&t.records).expect("serializes");
                    }
                    v
                })
                .collect();
            let mut json = json!({
                "points": evals.len(),
                "inequality": {
                    "holds": ineq.holds(),
                    "min_slack": ineq.min_slack,
                    "violations": ineq.violations,
                    "converged": ineq.converged,
                    "tuples": summary,
                },
                "ideality": {
                    "ideal": ideal.ideal,
                    "min_residual": ideal.min_residual,
                    "max_abs_residual": ideal.max_abs_residual,
                },
                "maximum_principle_failures": mp,
            });
            if cli.verbose {
                json["ideality"]["residuals"] = json!(ideal.residuals);
                json["sample_points"] = json!(ineq.points);
            }
            let csv = format!("{}\n{}", ineq.to_csv(), ideal.to_csv());
            let text = format!(
                "points: {}\ninequality holds: {} (min slack {})\nideal: {} (max |H^2 - delta0| = {})\n",
                evals.len(),
                ineq.holds(),
                ineq.min_slack,
                ideal.ideal,
                ideal.max_abs_residual
            );
            Ok(Report::clean(json, csv, text))
        }
    }
}

fn delta0_method(optimizer: bool, opt: &OptimizerArgs, seed: u64) -> Delta0Method {
    if optimizer {
        Delta0Method::Optimizer(opt.options(seed))
    } else {
        Delta0Method::ClosedForm
    }
}

fn verdict_report(v: &Verdict) -> Report {
    let mut text = format!(
        "{}: {}\n  lambda1 = {}, n*delta0 = {}\n",
        v.subject,
        v.outcome.as_str(),
        v.evidence.lambda1,
        v.evidence.n_delta0
    );
    let mut csv = String::from("subject,outcome,lambda1,n_delta0\n");
    csv.push_str(&format!(
        "{},{},{},{}\n",
        v.subject,
        v.outcome.as_str(),
        v.evidence.lambda1,
        v.evidence.n_delta0
    ));
    for s in &v.evidence.chain {
        text.push_str(&format!(
            "  [{}] {}: {} vs {}\n",
            if s.holds { "ok" } else { "fails" },
            s.step,
            s.lhs,
            s.rhs
        ));
    }
    Report {
        json: v.to_json(),
        csv,
        text,
        status: if v.outcome == Outcome::Inconclusive {
            EXIT_INCONCLUSIVE
        } else {
            EXIT_OK
        },
    }
}

fn read(path: &Path) -> Result<String, CliError> {
    fs::read_to_string(path).map_err(|e| CliError::Failure(format!("{}: {e}", path.display())))
}

fn load_tensor(a: &TensorArgs) -> Result<CurvatureTensor, CliError> {
    match (&a.tensor, a.model, a.n, a.c0) {
        (Some(path), None, None, None) => {
            let file: TensorFile = serde_json::from_str(&read(path)?)
                .map_err(|e| CliError::Failure(format!("{}: {e}", path.display())))?;
            Ok(file.into_tensor(SYMMETRY_TOL)?)
        }
        (None, Some(Model::Constant), Some(n), Some(c0)) => Ok(CurvatureTensor::constant_curvature(n, c0)?),
        _ => Err(CliError::Usage(
            "give either --tensor FILE or --model constant --n N --c0 C".into(),
        )),
    }
}

fn load_registry(path: Option<&Path>) -> Result<Registry, CliError> {
    match path {
        Some(p) => Ok(Registry::from_json(&read(p)?)?),
        None => Ok(Registry::builtin()),
    }
}

fn load_mesh(path: &Path) -> Result<TriMesh, CliError> {
    let text = read(path)?;
    let is_off =
        path.extension().is_some_and(|e| e.eq_ignore_ascii_case("off")) || text.trim_start().starts_with("OFF");
    if is_off {
        Ok(parse_off(&text)?)
    } else {
        let file: MeshFile =
            serde_json::from_str(&text).map_err(|e| CliError::Failure(format!("{}: {e}", path.display())))?;
        Ok(file.into_mesh()?)
    }
}

fn parse_list(s: &str) -> Result<Vec<f64>, CliError> {
    s.split(',')
        .map(str::trim)
        .filter(|t| !t.is_empty())
        .map(|t| {
            t.parse::<f64>()
                .map_err(|_| CliError::Usage(format!("invalid number '{t}'")))
        })
        .collect()
}

fn parse_partition(n: usize, s: &str) -> Result<Partition, CliError> {
    let inner = s.trim().trim_start_matches('(').trim_end_matches(')');
    let parts = inner
        .split(',')
        .map(str::trim)
        .filter(|t| !t.is_empty())
        .map(|t| {
            t.parse::<usize>()
                .map_err(|_| CliError::Usage(format!("invalid partition part '{t}'")))
        })
        .collect::<Result<Vec<_>, _>>()?;
    Partition::new(n, parts).map_err(|e| CliError::Usage(e.to_string()))
}
