//! Command-line front end.
//!
//! Every subcommand can also be driven by a JSON run configuration passed
//! with `--config`, e.g. `{"command": "solve", "problem": {...}, "lambda": 0.1}`;
//! keys are the long flag names with dashes replaced by underscores.
//!
//! Exit codes: 0 success, 1 validation error, 2 numeric failure.

use std::ffi::OsString;
use std::io::Write;
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand};
use serde::{Deserialize, Deserializer};

use crate::certify::{best_lambda, full_certificate, ProblemConstants};
use crate::dynamics::{integrate, FlowConfig, Scheme, TimeScaling};
use crate::error::QviError;
use crate::io::{flow_table, fmt_f64, trace_table, CsvTable};
use crate::problem::QviProblem;
use crate::problems::ProblemDescriptor;
use crate::solvers::{solve, SolverConfig, Status, Variant};
use crate::sweep::{parse_grid, run_sweep, sweep_table, SweepSolve, SweepSpec};
use crate::vector::Vector;

pub const EXIT_OK: i32 = 0;
pub const EXIT_VALIDATION: i32 = 1;
pub const EXIT_NUMERIC: i32 = 2;

#[derive(Debug, Parser)]
#[command(
    name = "tseng-qvi",
    version,
    about = "Tseng-type solvers and certificates for quasi-variational inequalities"
)]
pub struct Cli {
    /// JSON run configuration; replaces the subcommand.
    #[arg(long)]
    pub config: Option<PathBuf>,

    #[command(subcommand)]
    pub command: Option<Command>,
}

#[derive(Debug, Subcommand, Deserialize)]
#[serde(tag = "command", rename_all = "lowercase")]
pub enum Command {
    /// Evaluate every constant and sufficient condition for (L, rho, l, lambda).
    Certify(CertifyArgs),
    /// Run one solver variant and write its trace.
    Solve(SolveArgs),
    /// Integrate the continuous-time Tseng flow.
    Flow(FlowArgs),
    /// Run several variants from the same start on one CSV.
    Compare(CompareArgs),
    /// Tabulate certificates (and optionally empirical rates) over grids.
    Sweep(SweepArgs),
}

#[derive(Debug, Clone, Args, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct OutputArgs {
    /// Output file; stdout when absent.
    #[arg(long)]
    #[serde(default)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Clone, Args, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CertifyArgs {
    #[arg(long = "L")]
    #[serde(rename = "L")]
    pub lipschitz: f64,
    #[arg(long)]
    pub rho: f64,
    #[arg(long)]
    pub l: f64,
    #[arg(long)]
    pub lambda: Option<f64>,
    #[arg(long)]
    #[serde(default)]
    pub beta: Option<f64>,
    /// Pick lambda by grid search over this many points instead of --lambda.
    #[arg(long)]
    #[serde(default)]
    pub best_lambda_grid: Option<usize>,
    #[command(flatten)]
    #[serde(flatten)]
    pub output: OutputArgs,
}

#[derive(Debug, Clone, Args, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SolveArgs {
    /// Problem descriptor: a JSON file path or inline JSON.
    #[arg(long)]
    #[serde(deserialize_with = "string_or_json")]
    pub problem: String,
    #[arg(long, default_value = "tseng")]
    #[serde(default = "default_variant")]
    pub variant: String,
    #[arg(long)]
    pub lambda: f64,
    #[arg(long, default_value_t = 1e-10)]
    #[serde(default = "default_tol")]
    pub tol: f64,
    #[arg(long, default_value_t = 1000)]
    #[serde(default = "default_max_iter")]
    pub max_iter: usize,
    /// Starting point as a comma list or JSON array.
    #[arg(long)]
    #[serde(default, deserialize_with = "opt_string_or_json")]
    pub x0: Option<String>,
    /// csv or json.
    #[arg(long, default_value = "csv")]
    #[serde(default = "default_format")]
    pub format: String,
    #[command(flatten)]
    #[serde(flatten)]
    pub output: OutputArgs,
}

#[derive(Debug, Clone, Args, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FlowArgs {
    #[arg(long)]
    #[serde(deserialize_with = "string_or_json")]
    pub problem: String,
    #[arg(long)]
    pub lambda: f64,
    #[arg(long)]
    pub h: f64,
    #[arg(long)]
    pub t_end: f64,
    /// euler or rk4.
    #[arg(long, default_value = "rk4")]
    #[serde(default = "default_scheme")]
    pub scheme: String,
    /// Constant time scaling alpha.
    #[arg(long, conflicts_with = "alpha_table")]
    #[serde(default)]
    pub alpha: Option<f64>,
    /// Piecewise-constant alpha as `t0:a0,t1:a1,...` starting at t0 = 0.
    #[arg(long)]
    #[serde(default)]
    pub alpha_table: Option<String>,
    /// Include state coordinates in the CSV.
    #[arg(long)]
    #[serde(default)]
    pub coords: bool,
    #[arg(long)]
    #[serde(default, deserialize_with = "opt_string_or_json")]
    pub x0: Option<String>,
    #[command(flatten)]
    #[serde(flatten)]
    pub output: OutputArgs,
}

#[derive(Debug, Clone, Args, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CompareArgs {
    #[arg(long)]
    #[serde(deserialize_with = "string_or_json")]
    pub problem: String,
    /// One or more step sizes (comma list).
    #[arg(long)]
    #[serde(deserialize_with = "string_or_json")]
    pub lambda: String,
    #[arg(long, default_value = "tseng,gradient_projection,extragradient")]
    #[serde(default = "default_variants")]
    pub variants: String,
    #[arg(long)]
    #[serde(default, deserialize_with = "opt_string_or_json")]
    pub x0: Option<String>,
    #[arg(long, default_value_t = 1e-10)]
    #[serde(default = "default_tol")]
    pub tol: f64,
    #[arg(long, default_value_t = 1000)]
    #[serde(default = "default_max_iter")]
    pub max_iter: usize,
    #[command(flatten)]
    #[serde(flatten)]
    pub output: OutputArgs,
}

#[derive(Debug, Clone, Args, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SweepArgs {
    /// Problem supplying L, rho, l (and the solve target with --solve).
    #[arg(long)]
    #[serde(default, deserialize_with = "opt_string_or_json")]
    pub problem: Option<String>,
    #[arg(long = "L")]
    #[serde(default, rename = "L")]
    pub lipschitz: Option<f64>,
    #[arg(long)]
    #[serde(default)]
    pub rho: Option<f64>,
    /// `start:stop:count`, comma list or JSON array.
    #[arg(long)]
    #[serde(deserialize_with = "string_or_json")]
    pub lambda_grid: String,
    #[arg(long)]
    #[serde(default, deserialize_with = "opt_string_or_json")]
    pub l_grid: Option<String>,
    #[arg(long)]
    #[serde(default, deserialize_with = "opt_string_or_json")]
    pub beta_grid: Option<String>,
    /// Also run Tseng at every cell and report the empirical rate.
    #[arg(long)]
    #[serde(default)]
    pub solve: bool,
    #[arg(long)]
    #[serde(default, deserialize_with = "opt_string_or_json")]
    pub x0: Option<String>,
    #[arg(long, default_value_t = 1e-10)]
    #[serde(default = "default_tol")]
    pub tol: f64,
    #[arg(long, default_value_t = 1000)]
    #[serde(default = "default_max_iter")]
    pub max_iter: usize,
    #[command(flatten)]
    #[serde(flatten)]
    pub output: OutputArgs,
}

fn default_variant() -> String {
    "tseng".into()
}
fn default_variants() -> String {
    "tseng,gradient_projection,extragradient".into()
}
fn default_tol() -> f64 {
    1e-10
}
fn default_max_iter() -> usize {
    1000
}
fn default_format() -> String {
    "csv".into()
}
fn default_scheme() -> String {
    "rk4".into()
}

/// Strings pass through; any other JSON value is kept as its JSON text.
fn string_or_json<'de, D: Deserializer<'de>>(d: D) -> Result<String, D::Error> {
    let v = serde_json::Value::deserialize(d)?;
    Ok(match v {
        serde_json::Value::String(s) => s,
        other => other.to_string(),
    })
}

fn opt_string_or_json<'de, D: Deserializer<'de>>(d: D) -> Result<Option<String>, D::Error> {
    let v = Option::<serde_json::Value>::deserialize(d)?;
    Ok(v.map(|v| match v {
        serde_json::Value::String(s) => s,
        other => other.to_string(),
    }))
}

/// CLI failure carrying its exit code.
#[derive(Debug)]
pub struct CliError {
    pub code: i32,
    pub message: String,
}

impl From<QviError> for CliError {
    fn from(e: QviError) -> Self {
        let code = match e {
            QviError::NumericFailure(_) => EXIT_NUMERIC,
            _ => EXIT_VALIDATION,
        };
        CliError {
            code,
            message: e.to_string(),
        }
    }
}

fn validation(message: impl Into<String>) -> CliError {
    CliError {
        code: EXIT_VALIDATION,
        message: message.into(),
    }
}

/// Loads a problem from a path or an inline JSON document.
pub fn load_problem(arg: &str) -> Result<(ProblemDescriptor, QviProblem), CliError> {
    let text = if arg.trim_start().starts_with('{') {
        arg.to_string()
    } else {
        std::fs::read_to_string(arg).map_err(|e| validation(format!("problem file '{arg}': {e}")))?
    };
    let desc = ProblemDescriptor::from_json(&text)?;
    let problem = desc.build()?;
    Ok((desc, problem))
}

fn initial_point(arg: &Option<String>, desc: &ProblemDescriptor, problem: &QviProblem) -> Result<Vector, CliError> {
    let x0 = match arg {
        None => desc.default_initial_point(problem.dim()),
        Some(text) => Vector::new(parse_grid(text).map_err(|e| validation(format!("invalid x0: {e}")))?)?,
    };
    if x0.dim() != problem.dim() {
        return Err(validation(format!(
            "invalid x0: dimension {} does not match problem dimension {}",
            x0.dim(),
            problem.dim()
        )));
    }
    Ok(x0)
}

fn emit(output: &OutputArgs, text: &str) -> Result<(), CliError> {
    match &output.out {
        Some(path) => write_file(path, text),
        None => {
            let mut stdout = std::io::stdout().lock();
            stdout
                .write_all(text.as_bytes())
                .map_err(|e| validation(format!("stdout: {e}")))
        }
    }
}

fn write_file(path: &Path, text: &str) -> Result<(), CliError> {
    std::fs::write(path, text).map_err(|e| validation(format!("cannot write '{}': {e}", path.display())))
}

fn parse_scheme(s: &str) -> Result<Scheme, CliError> {
    match s {
        "euler" => Ok(Scheme::Euler),
        "rk4" => Ok(Scheme::Rk4),
        other => Err(validation(format!("invalid scheme: unknown scheme '{other}'"))),
    }
}

fn parse_alpha_table(s: &str) -> Result<TimeScaling, CliError> {
    let entries = s
        .split(',')
        .map(|pair| {
            let (t, a) = pair
                .split_once(':')
                .ok_or_else(|| validation(format!("invalid alpha_table entry '{pair}'")))?;
            let t: f64 = t
                .trim()
                .parse()
                .map_err(|_| validation(format!("invalid alpha_table time '{t}'")))?;
            let a: f64 = a
                .trim()
                .parse()
                .map_err(|_| validation(format!("invalid alpha_table value '{a}'")))?;
            Ok((t, a))
        })
        .collect::<Result<Vec<_>, CliError>>()?;
    Ok(TimeScaling::Piecewise(entries))
}

pub fn cmd_certify(args: &CertifyArgs) -> Result<String, CliError> {
    let (lambda, cert) = match (args.best_lambda_grid, args.lambda) {
        (Some(grid), _) => {
            let (lambda, cert) = best_lambda(args.lipschitz, args.rho, args.l, grid)?;
            match args.beta {
                Some(b) => {
                    let c = ProblemConstants::new(args.lipschitz, args.rho, args.l, lambda)?.with_beta(b)?;
                    (lambda, full_certificate(&c)?)
                }
                None => (lambda, cert),
            }
        }
        (None, Some(lambda)) => {
            let mut c = ProblemConstants::new(args.lipschitz, args.rho, args.l, lambda)?;
            if let Some(b) = args.beta {
                c = c.with_beta(b)?;
            }
            (lambda, full_certificate(&c)?)
        }
        (None, None) => return Err(validation("invalid lambda: give --lambda or --best-lambda-grid")),
    };
    let mut value = serde_json::to_value(&cert).expect("certificate serializes");
    if args.best_lambda_grid.is_some() {
        value
            .as_object_mut()
            .expect("flat object")
            .insert("lambda".into(), serde_json::json!(lambda));
    }
    let mut text = serde_json::to_string_pretty(&value).expect("json");
    text.push('\n');
    Ok(text)
}

/// Returns the rendered output and the exit code it implies.
pub fn cmd_solve(args: &SolveArgs) -> Result<(String, i32), CliError> {
    let (desc, problem) = load_problem(&args.problem)?;
    let variant: Variant = args.variant.parse()?;
    let config = SolverConfig::new(variant, args.lambda, args.tol, args.max_iter)?;
    let x0 = initial_point(&args.x0, &desc, &problem)?;
    let trace = solve(&problem, &x0, &config)?;
    let code = if trace.status == Status::NumericFailure {
        EXIT_NUMERIC
    } else {
        EXIT_OK
    };
    let text = match args.format.as_str() {
        "csv" => trace_table(problem.name(), &trace).to_csv_string(),
        "json" => {
            let mut s = serde_json::to_string_pretty(&trace).expect("trace serializes");
            s.push('\n');
            s
        }
        other => return Err(validation(format!("invalid format: unknown format '{other}'"))),
    };
    Ok((text, code))
}

pub fn cmd_flow(args: &FlowArgs) -> Result<String, CliError> {
    let (desc, problem) = load_problem(&args.problem)?;
    let mut config = FlowConfig::new(args.lambda, args.h, args.t_end, parse_scheme(&args.scheme)?)?;
    if let Some(a) = args.alpha {
        config = config.with_alpha(TimeScaling::Constant(a))?;
    } else if let Some(table) = &args.alpha_table {
        config = config.with_alpha(parse_alpha_table(table)?)?;
    }
    let x0 = initial_point(&args.x0, &desc, &problem)?;
    let trace = integrate(&problem, &x0, &config)?;
    Ok(flow_table(problem.name(), &config, &trace, args.coords).to_csv_string())
}

pub fn cmd_compare(args: &CompareArgs) -> Result<String, CliError> {
    let (desc, problem) = load_problem(&args.problem)?;
    let lambdas = parse_grid(&args.lambda).map_err(|e| validation(format!("invalid lambda: {e}")))?;
    let variants = args
        .variants
        .split(',')
        .map(|v| v.trim().parse::<Variant>())
        .collect::<Result<Vec<_>, _>>()?;
    if variants.is_empty() {
        return Err(validation("invalid variants: need at least one"));
    }
    let x0 = initial_point(&args.x0, &desc, &problem)?;
    let mut table = CsvTable::new(["variant", "lambda", "k", "residual", "dist_to_solution"]);
    table.push_meta("problem", problem.name());
    for &lambda in &lambdas {
        for &variant in &variants {
            let config = SolverConfig::new(variant, lambda, args.tol, args.max_iter)?;
            let trace = solve(&problem, &x0, &config)?;
            let key = format!("{}@{}", variant, fmt_f64(lambda));
            table.push_meta(format!("status:{key}"), trace.status.as_str());
            table.push_meta(format!("iterations:{key}"), trace.iterations().to_string());
            table.push_meta(
                format!("empirical_rate:{key}"),
                crate::io::fmt_opt(trace.empirical_rate),
            );
            if let Some(f) = &trace.failure {
                table.push_meta(format!("failure:{key}"), f.clone());
            }
            for r in &trace.records {
                table.push_row(vec![
                    variant.to_string(),
                    fmt_f64(lambda),
                    r.k.to_string(),
                    fmt_f64(r.residual),
                    crate::io::fmt_opt(r.dist_to_solution),
                ]);
            }
        }
    }
    Ok(table.to_csv_string())
}

pub fn cmd_sweep(args: &SweepArgs) -> Result<String, CliError> {
    let loaded = args.problem.as_deref().map(load_problem).transpose()?;
    let declared = loaded.as_ref().map(|(_, p)| p.constants());
    let lipschitz = args
        .lipschitz
        .or(declared.map(|c| c.0))
        .ok_or_else(|| validation("invalid L: give --L or --problem"))?;
    let rho = args
        .rho
        .or(declared.map(|c| c.1))
        .ok_or_else(|| validation("invalid rho: give --rho or --problem"))?;
    let lambdas = parse_grid(&args.lambda_grid).map_err(|e| validation(format!("invalid lambda_grid: {e}")))?;
    let ls = match (&args.l_grid, declared) {
        (Some(g), _) => parse_grid(g).map_err(|e| validation(format!("invalid l_grid: {e}")))?,
        (None, Some(c)) => vec![c.2],
        (None, None) => return Err(validation("invalid l_grid: give --l-grid or --problem")),
    };
    let betas = match &args.beta_grid {
        Some(g) => parse_grid(g).map_err(|e| validation(format!("invalid beta_grid: {e}")))?,
        None => Vec::new(),
    };
    let solve = if args.solve {
        let (desc, problem) = loaded
            .clone()
            .ok_or_else(|| validation("invalid solve: --solve requires --problem"))?;
        let x0 = initial_point(&args.x0, &desc, &problem)?;
        Some(SweepSolve {
            problem,
            x0,
            tol: args.tol,
            max_iter: args.max_iter,
        })
    } else {
        None
    };
    let spec = SweepSpec {
        lipschitz,
        rho,
        lambdas,
        ls,
        betas,
        solve,
    };
    let rows = run_sweep(&spec)?;
    Ok(sweep_table(&spec, &rows).to_csv_string())
}

/// Executes a parsed command and writes its output; returns the exit code.
pub fn execute(command: &Command) -> Result<i32, CliError> {
    match command {
        Command::Certify(a) => emit(&a.output, &cmd_certify(a)?).map(|_| EXIT_OK),
        Command::Solve(a) => {
            let (text, code) = cmd_solve(a)?;
            emit(&a.output, &text)?;
            Ok(code)
        }
        Command::Flow(a) => emit(&a.output, &cmd_flow(a)?).map(|_| EXIT_OK),
        Command::Compare(a) => emit(&a.output, &cmd_compare(a)?).map(|_| EXIT_OK),
        Command::Sweep(a) => emit(&a.output, &cmd_sweep(a)?).map(|_| EXIT_OK),
    }
}

pub fn load_run_config(path: &Path) -> Result<Command, CliError> {
    let text =
        std::fs::read_to_string(path).map_err(|e| validation(format!("config file '{}': {e}", path.display())))?;
    serde_json::from_str(&text).map_err(|e| validation(format!("invalid config: {e}")))
}

/// Parses arguments, runs, prints diagnostics to stderr and returns the
/// process exit code.
pub fn run<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { EXIT_VALIDATION } else { EXIT_OK };
            let _ = e.print();
            return code;
        }
    };
    let command = match (&cli.config, cli.command) {
        (Some(path), None) => match load_run_config(path) {
            Ok(c) => c,
            Err(e) => {
                eprintln!("error: {}", e.message);
                return e.code;
            }
        },
        (None, Some(c)) => c,
        (Some(_), Some(_)) => {
            eprintln!("error: give either --config or a subcommand, not both");
            return EXIT_VALIDATION;
        }
        (None, None) => {
            eprintln!("error: a subcommand or --config is required (see --help)");
            return EXIT_VALIDATION;
        }
    };
    match execute(&command) {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {}", e.message);
            e.code
        }
    }
}
