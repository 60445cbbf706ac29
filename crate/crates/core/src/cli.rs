//! Command-line front end.
//!
//! Exit codes: 0 success, 2 validation failure, 3 parse or usage error.
//! Errors are written to standard error as a JSON object.

use std::ffi::OsString;
use std::io::Write;
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand, ValueEnum};
use serde::Serialize;

use crate::abscont::{self, enumerate_classes, printed_formula_discrepancies, CylinderEvaluation, RnSeriesReport, VaParams};
use crate::classify::{self, NecessaryConditions, NumericBVerdict, DEFAULT_SAMPLES};
use crate::error::QsoError;
use crate::markov::{CylinderSet, MixingSeries, TransitionFamily};
use crate::operator::{QsoOperator, DEDUP_RADIUS, TRAJECTORY_MAX_ITER, TRAJECTORY_TOL};
use crate::report::{content_hash, csv_row, to_json, to_json_compact, CsvCell};
use crate::simplex::SimplexPoint;
use crate::spec_file::{OperatorSpecFile, VaSpec};

pub const EXIT_OK: i32 = 0;
pub const EXIT_VALIDATION: i32 = 2;
pub const EXIT_PARSE: i32 = 3;

/// Default residual tolerance for reported fixed points.
pub const FIXED_POINT_TOL: f64 = 1e-9;
/// Horizon of the printed-formula check attached to `abscont` reports.
const CLASS_CHECK_HORIZON: usize = 6;

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum Format {
    Json,
    Csv,
}

#[derive(Debug, Parser, Serialize)]
#[command(name = "qso", version, about = "Quadratic stochastic operators: certificates, fixed points, Markov measures")]
pub struct Cli {
    /// Seed for sampling; required by commands that sample.
    #[arg(long, global = true)]
    pub seed: Option<u64>,
    /// Tolerance override (trajectory step for iterate, residual for fixed-points).
    #[arg(long, global = true)]
    pub tol: Option<f64>,
    /// Directory to write the report into instead of standard output.
    #[arg(long, global = true)]
    pub out: Option<PathBuf>,
    #[arg(long, global = true, value_enum, default_value_t = Format::Json)]
    pub format: Format,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Args, Serialize)]
pub struct SpecArgs {
    /// Operator file (JSON).
    #[arg(long)]
    pub spec: PathBuf,
    /// Average `P[ij,k]` and `P[ji,k]` instead of rejecting asymmetric input.
    #[arg(long)]
    pub symmetrize: bool,
}

#[derive(Debug, Args, Serialize)]
pub struct SearchArgs {
    /// Lattice resolution for the numeric b-order search (default depends on n).
    #[arg(long)]
    pub resolution: Option<usize>,
    /// Random points checked after the lattice.
    #[arg(long, default_value_t = DEFAULT_SAMPLES)]
    pub samples: usize,
}

#[derive(Debug, Subcommand, Serialize)]
#[serde(tag = "name", rename_all = "kebab-case")]
pub enum Command {
    /// Validate the operator and look for b-bistochasticity violations.
    Validate {
        #[command(flatten)]
        spec: SpecArgs,
        #[command(flatten)]
        search: SearchArgs,
    },
    /// Uniqueness conditions, vertex stability, and contraction checks.
    Classify {
        #[command(flatten)]
        spec: SpecArgs,
        #[command(flatten)]
        search: SearchArgs,
    },
    /// Trajectory from a start point.
    Iterate {
        #[command(flatten)]
        spec: SpecArgs,
        /// Start point, comma separated.
        #[arg(long)]
        x: String,
        /// Fixed number of steps; otherwise iterate until the step is below --tol.
        #[arg(long)]
        steps: Option<usize>,
        #[arg(long, default_value_t = TRAJECTORY_MAX_ITER)]
        max_iter: usize,
    },
    /// Multistart fixed-point search.
    FixedPoints {
        #[command(flatten)]
        spec: SpecArgs,
        /// Additional start points, comma separated; repeatable.
        #[arg(long = "seed-point")]
        seed_points: Vec<String>,
    },
    /// Trajectory, transition matrices, and cylinder measures.
    Markov {
        #[command(flatten)]
        spec: SpecArgs,
        #[arg(long)]
        x: String,
        #[arg(long)]
        horizon: usize,
        /// Cylinder `l:i_l,...,i_m` with 1-based states; repeatable.
        #[arg(long = "cylinder")]
        cylinders: Vec<String>,
    },
    /// Mixing gaps between two cylinders.
    Mixing {
        #[command(flatten)]
        spec: SpecArgs,
        #[arg(long)]
        x: String,
        /// First cylinder, `l:i_l,...,i_m`.
        #[arg(long = "a-set")]
        a_set: String,
        /// Second cylinder, shifted by m.
        #[arg(long = "b-set")]
        b_set: String,
        #[arg(long, default_value_t = 20)]
        m_max: usize,
    },
    /// Absolute-continuity series for two V_a measures, or an exploratory
    /// run on an arbitrary operator with --spec.
    Abscont {
        /// Common parameter of both measures.
        #[arg(long, conflicts_with_all = ["a1", "a2", "spec"])]
        a: Option<f64>,
        /// Parameter of the numerator measure.
        #[arg(long, requires = "a2", conflicts_with = "spec")]
        a1: Option<f64>,
        /// Parameter of the denominator measure.
        #[arg(long, requires = "a1", conflicts_with = "spec")]
        a2: Option<f64>,
        /// Operator file for the exploratory mode.
        #[arg(long)]
        spec: Option<PathBuf>,
        #[arg(long)]
        symmetrize: bool,
        /// Numerator start point.
        #[arg(long)]
        x: String,
        /// Denominator start point.
        #[arg(long)]
        y: String,
        #[arg(long, default_value_t = 12)]
        m_max: usize,
    },
}

impl Command {
    fn name(&self) -> &'static str {
        match self {
            Command::Validate { .. } => "validate",
            Command::Classify { .. } => "classify",
            Command::Iterate { .. } => "iterate",
            Command::FixedPoints { .. } => "fixed-points",
            Command::Markov { .. } => "markov",
            Command::Mixing { .. } => "mixing",
            Command::Abscont { .. } => "abscont",
        }
    }
}

/// Failure carrying the exit code.
#[derive(Debug)]
pub struct CliError {
    pub code: i32,
    pub kind: &'static str,
    pub message: String,
    pub location: Option<(String, usize, usize)>,
}

impl CliError {
    fn usage(message: impl Into<String>) -> Self {
        CliError { code: EXIT_PARSE, kind: "usage", message: message.into(), location: None }
    }

    fn io(message: impl Into<String>) -> Self {
        CliError { code: EXIT_VALIDATION, kind: "io", message: message.into(), location: None }
    }

    fn to_json(&self) -> String {
        #[derive(Serialize)]
        struct Body<'a> {
            kind: &'a str,
            message: &'a str,
            #[serde(skip_serializing_if = "Option::is_none")]
            path: Option<&'a str>,
            #[serde(skip_serializing_if = "Option::is_none")]
            line: Option<usize>,
            #[serde(skip_serializing_if = "Option::is_none")]
            column: Option<usize>,
            exit_code: i32,
        }
        #[derive(Serialize)]
        struct Wrapper<'a> {
            error: Body<'a>,
        }
        let loc = self.location.as_ref();
        to_json_compact(&Wrapper {
            error: Body {
                kind: self.kind,
                message: &self.message,
                path: loc.map(|l| l.0.as_str()),
                line: loc.map(|l| l.1),
                column: loc.map(|l| l.2),
                exit_code: self.code,
            },
        }) + "\n"
    }
}

impl From<QsoError> for CliError {
    fn from(e: QsoError) -> Self {
        match e {
            QsoError::Parse { ref path, line, column, ref message } => CliError {
                code: EXIT_PARSE,
                kind: "parse",
                message: message.clone(),
                location: Some((path.clone(), line, column)),
            },
            other => CliError { code: EXIT_VALIDATION, kind: "validation", message: other.to_string(), location: None },
        }
    }
}

/// Report envelope shared by all JSON outputs.
#[derive(Serialize)]
struct Envelope<'a, T: Serialize> {
    tool: &'static str,
    version: &'static str,
    command: &'static str,
    spec_hash: &'a str,
    config: &'a serde_json::Value,
    result: T,
}

struct Context {
    command: &'static str,
    spec_hash: String,
    config: serde_json::Value,
    out: Option<PathBuf>,
}

/// A rendered report and the exit code it implies.
struct Output {
    body: String,
    ext: &'static str,
    code: i32,
}

impl Context {
    fn json<T: Serialize>(&self, result: T, code: i32) -> Output {
        let env = Envelope {
            tool: env!("CARGO_PKG_NAME"),
            version: env!("CARGO_PKG_VERSION"),
            command: self.command,
            spec_hash: &self.spec_hash,
            config: &self.config,
            result,
        };
        Output { body: to_json(&env), ext: "json", code }
    }

    fn csv(&self, table: String, code: i32) -> Output {
        let header = format!(
            "# {} {} {} spec_hash={}\n# config {}\n",
            env!("CARGO_PKG_NAME"),
            env!("CARGO_PKG_VERSION"),
            self.command,
            self.spec_hash,
            to_json_compact(&self.config)
        );
        Output { body: header + &table, ext: "csv", code }
    }

    fn emit(&self, out: &Output, stdout: &mut dyn Write) -> Result<(), CliError> {
        match &self.out {
            Some(dir) => {
                std::fs::create_dir_all(dir).map_err(|e| CliError::io(format!("{}: {e}", dir.display())))?;
                let path = dir.join(format!("{}.{}", self.command, out.ext));
                std::fs::write(&path, &out.body).map_err(|e| CliError::io(format!("{}: {e}", path.display())))
            }
            None => stdout.write_all(out.body.as_bytes()).map_err(|e| CliError::io(e.to_string())),
        }
    }
}

fn parse_point(text: &str, flag: &str) -> Result<SimplexPoint, CliError> {
    let coords: Vec<f64> = text
        .split(',')
        .map(|t| t.trim().parse::<f64>())
        .collect::<Result<_, _>>()
        .map_err(|_| CliError::usage(format!("--{flag}: expected comma-separated numbers, got '{text}'")))?;
    Ok(SimplexPoint::new(coords)?)
}

fn parse_cylinder(text: &str, flag: &str) -> Result<CylinderSet, CliError> {
    text.parse().map_err(|e: QsoError| CliError::usage(format!("--{flag}: {e}")))
}

fn load_spec(path: &Path, symmetrize: bool) -> Result<(QsoOperator, String), CliError> {
    let bytes = std::fs::read(path).map_err(|e| CliError {
        code: EXIT_PARSE,
        kind: "parse",
        message: e.to_string(),
        location: Some((path.display().to_string(), 0, 0)),
    })?;
    let text = String::from_utf8_lossy(&bytes);
    let spec = OperatorSpecFile::parse(&text, &path.display().to_string())?;
    Ok((spec.to_operator(symmetrize)?, content_hash(&bytes)))
}

fn require_seed(cli: &Cli) -> Result<u64, CliError> {
    cli.seed.ok_or_else(|| CliError::usage(format!("--seed is required for {}", cli.command.name())))
}

fn csv_unavailable(cmd: &str) -> CliError {
    CliError::usage(format!("--format csv is not available for {cmd}"))
}

#[derive(Serialize)]
struct ValidateReport {
    dimension: usize,
    necessary_conditions: NecessaryConditions,
    numeric_b_verdict: NumericBVerdict,
    b_bistochastic_evidence: bool,
}

#[derive(Serialize)]
struct MarkovReport {
    horizon: usize,
    states: Vec<Vec<f64>>,
    /// `H^[k,k+1]` for `k < horizon`, row-major.
    transition_matrices: Vec<Vec<Vec<f64>>>,
    cylinders: Vec<CylinderReport>,
}

#[derive(Serialize)]
struct CylinderReport {
    cylinder: CylinderSet,
    measure: f64,
    log_measure: f64,
}

#[derive(Serialize)]
struct AbscontReport {
    series: RnSeriesReport,
    /// Cylinder classes whose printed closed forms disagree with the
    /// constructive measure, for the numerator parameters.
    #[serde(skip_serializing_if = "Option::is_none")]
    printed_formula_discrepancies: Option<Vec<CylinderEvaluation>>,
}

fn effective_config(cli: &Cli, extra: serde_json::Value) -> serde_json::Value {
    let mut cfg = serde_json::to_value(cli).expect("arguments serialize");
    if let (Some(obj), serde_json::Value::Object(more)) = (cfg.as_object_mut(), extra) {
        obj.insert("effective".into(), serde_json::Value::Object(more));
    }
    cfg
}

fn dispatch(cli: &Cli) -> Result<(Context, Output), CliError> {
    let name = cli.command.name();
    let make_ctx = |spec_hash: String, extra: serde_json::Value| Context {
        command: name,
        spec_hash,
        config: effective_config(cli, extra),
        out: cli.out.clone(),
    };

    match &cli.command {
        Command::Validate { spec, search } => {
            let seed = require_seed(cli)?;
            if cli.format == Format::Csv {
                return Err(csv_unavailable(name));
            }
            let (op, hash) = load_spec(&spec.spec, spec.symmetrize)?;
            let resolution = search.resolution.unwrap_or_else(|| classify::default_resolution(op.dim()));
            let ctx = make_ctx(hash, serde_json::json!({ "seed": seed, "resolution": resolution, "samples": search.samples }));
            let nec = classify::check_necessary_bbistochastic(&op);
            let numeric = classify::verify_bbistochastic_numeric(&op, resolution, search.samples, seed)?;
            let ok = nec.all_pass() && numeric.no_violation();
            let report = ValidateReport {
                dimension: op.dim(),
                necessary_conditions: nec,
                numeric_b_verdict: numeric,
                b_bistochastic_evidence: ok,
            };
            let out = ctx.json(report, if ok { EXIT_OK } else { EXIT_VALIDATION });
            Ok((ctx, out))
        }
        Command::Classify { spec, search } => {
            let seed = require_seed(cli)?;
            if cli.format == Format::Csv {
                return Err(csv_unavailable(name));
            }
            let (op, hash) = load_spec(&spec.spec, spec.symmetrize)?;
            let resolution = search.resolution.unwrap_or_else(|| classify::default_resolution(op.dim()));
            let ctx = make_ctx(hash, serde_json::json!({ "seed": seed, "resolution": resolution, "samples": search.samples }));
            let report = classify::classify(&op, Some(resolution), search.samples, seed)?;
            let out = ctx.json(report, EXIT_OK);
            Ok((ctx, out))
        }
        Command::Iterate { spec, x, steps, max_iter } => {
            let (op, hash) = load_spec(&spec.spec, spec.symmetrize)?;
            let x = parse_point(x, "x")?;
            let tol = cli.tol.unwrap_or(TRAJECTORY_TOL);
            let ctx = make_ctx(hash, serde_json::json!({ "tol": tol, "max_iter": max_iter }));
            let traj = match steps {
                Some(m) => {
                    let mut path = vec![x.clone()];
                    for _ in 0..*m {
                        let next = op.evaluate(path.last().expect("non-empty"))?;
                        path.push(next);
                    }
                    let last = path.len() - 1;
                    let step = if last == 0 { 0.0 } else { path[last].l1_distance(&path[last - 1])? };
                    crate::operator::TrajectoryResult {
                        limit: path[last].clone(),
                        iterations_used: *m,
                        final_step_l1: step,
                        converged: step <= tol,
                        path: Some(path),
                    }
                }
                None => op.trajectory(&x, tol, *max_iter, true)?,
            };
            let out = match cli.format {
                Format::Json => ctx.json(&traj, EXIT_OK),
                Format::Csv => ctx.csv(trajectory_csv(&traj), EXIT_OK),
            };
            Ok((ctx, out))
        }
        Command::FixedPoints { spec, seed_points } => {
            let (op, hash) = load_spec(&spec.spec, spec.symmetrize)?;
            let tol = cli.tol.unwrap_or(FIXED_POINT_TOL);
            let extra: Vec<SimplexPoint> = seed_points.iter().map(|s| parse_point(s, "seed-point")).collect::<Result<_, _>>()?;
            let ctx = make_ctx(hash, serde_json::json!({ "tol": tol, "dedup_radius": DEDUP_RADIUS }));
            let fps = op.find_fixed_points(tol, DEDUP_RADIUS, &extra)?;
            let out = match cli.format {
                Format::Json => ctx.json(&fps, EXIT_OK),
                Format::Csv => {
                    let n = op.dim();
                    let mut table = (1..=n).map(|i| format!("x_{i}")).collect::<Vec<_>>().join(",") + ",residual\n";
                    for p in &fps.points {
                        let mut cells: Vec<CsvCell> = p.point.coords().iter().map(|&v| CsvCell::Float(v)).collect();
                        cells.push(CsvCell::Float(p.residual));
                        table.push_str(&csv_row(&cells));
                    }
                    ctx.csv(table, EXIT_OK)
                }
            };
            Ok((ctx, out))
        }
        Command::Markov { spec, x, horizon, cylinders } => {
            if cli.format == Format::Csv {
                return Err(csv_unavailable(name));
            }
            let (op, hash) = load_spec(&spec.spec, spec.symmetrize)?;
            let x = parse_point(x, "x")?;
            let cyls: Vec<CylinderSet> = cylinders.iter().map(|c| parse_cylinder(c, "cylinder")).collect::<Result<_, _>>()?;
            let ctx = make_ctx(hash, serde_json::json!({}));
            let fam = TransitionFamily::new(op, x)?;
            let mut report = MarkovReport { horizon: *horizon, states: Vec::new(), transition_matrices: Vec::new(), cylinders: Vec::new() };
            for k in 0..=*horizon {
                report.states.push(fam.state(k));
                if k < *horizon {
                    let h = fam.transition_matrix(k);
                    report.transition_matrices.push((0..h.nrows()).map(|i| h.row(i).iter().copied().collect()).collect());
                }
            }
            for c in cyls {
                let measure = fam.cylinder_measure(&c)?;
                let log_measure = fam.log_cylinder_measure(&c)?;
                report.cylinders.push(CylinderReport { cylinder: c, measure, log_measure });
            }
            let out = ctx.json(report, EXIT_OK);
            Ok((ctx, out))
        }
        Command::Mixing { spec, x, a_set, b_set, m_max } => {
            let (op, hash) = load_spec(&spec.spec, spec.symmetrize)?;
            let x = parse_point(x, "x")?;
            let a = parse_cylinder(a_set, "a-set")?;
            let b = parse_cylinder(b_set, "b-set")?;
            let ctx = make_ctx(hash, serde_json::json!({}));
            let fam = TransitionFamily::new(op, x)?;
            let series: MixingSeries = fam.mixing_series(&a, &b, *m_max)?;
            let out = match cli.format {
                Format::Json => ctx.json(&series, EXIT_OK),
                Format::Csv => ctx.csv(series.to_csv(), EXIT_OK),
            };
            Ok((ctx, out))
        }
        Command::Abscont { a, a1, a2, spec, symmetrize, x, y, m_max } => {
            let x = parse_point(x, "x")?;
            let y = parse_point(y, "y")?;
            let (report, hash) = if let Some(path) = spec {
                let (op, hash) = load_spec(path, *symmetrize)?;
                let num = TransitionFamily::new(op.clone(), x)?;
                let den = TransitionFamily::new(op, y)?;
                (AbscontReport { series: abscont::rn_series_generic(&num, &den, *m_max)?, printed_formula_discrepancies: None }, hash)
            } else {
                let (pa, pb) = match (a, a1, a2) {
                    (Some(a), None, None) => (*a, *a),
                    (None, Some(a1), Some(a2)) => (*a1, *a2),
                    _ => return Err(CliError::usage("give --a, or --a1 and --a2, or --spec")),
                };
                let num = VaParams::new(pa, x)?;
                let den = VaParams::new(pb, y)?;
                let specs: String = [pa, pb]
                    .iter()
                    .map(|&a| OperatorSpecFile { n: 2, coefficients: vec![], va: Some(VaSpec { a }), metadata: None }.to_json())
                    .collect();
                let series = abscont::rn_series(&num, &den, *m_max)?;
                let classes = enumerate_classes(CLASS_CHECK_HORIZON.min(*m_max));
                let log = printed_formula_discrepancies(&num, &classes)?;
                (AbscontReport { series, printed_formula_discrepancies: Some(log) }, content_hash(specs.as_bytes()))
            };
            let ctx = make_ctx(hash, serde_json::json!({}));
            let out = match cli.format {
                Format::Json => ctx.json(&report, EXIT_OK),
                Format::Csv => ctx.csv(report.series.to_csv(), EXIT_OK),
            };
            Ok((ctx, out))
        }
    }
}

fn trajectory_csv(t: &crate::operator::TrajectoryResult) -> String {
    let path = t.path.as_ref().expect("path kept for output");
    let n = t.limit.dim();
    let mut header = vec!["step".to_string()];
    header.extend((1..=n).map(|i| format!("x_{i}")));
    header.extend((1..n).map(|k| format!("U_{k}")));
    header.push("step_l1".into());
    let mut out = header.join(",") + "\n";
    for (step, p) in path.iter().enumerate() {
        let mut cells = vec![CsvCell::Int(step)];
        cells.extend(p.coords().iter().map(|&v| CsvCell::Float(v)));
        cells.extend(p.partial_sums().into_iter().map(CsvCell::Float));
        let l1 = if step == 0 { 0.0 } else { crate::simplex::l1(p.coords(), path[step - 1].coords()) };
        cells.push(CsvCell::Float(l1));
        out.push_str(&csv_row(&cells));
    }
    out
}

/// Runs the CLI on `args` (including the program name) and returns the exit code.
pub fn run<I, T>(args: I, stdout: &mut dyn Write, stderr: &mut dyn Write) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            use clap::error::ErrorKind;
            if matches!(e.kind(), ErrorKind::DisplayHelp | ErrorKind::DisplayVersion) {
                let _ = write!(stdout, "{e}");
                return EXIT_OK;
            }
            let err = CliError::usage(e.to_string().trim_end().to_string());
            let _ = stderr.write_all(err.to_json().as_bytes());
            return err.code;
        }
    };
    let result = dispatch(&cli).and_then(|(ctx, out)| ctx.emit(&out, stdout).map(|_| out.code));
    match result {
        Ok(code) => code,
        Err(e) => {
            let _ = stderr.write_all(e.to_json().as_bytes());
            e.code
        }
    }
}

/// Entry point used by the binary.
pub fn main_entry() -> i32 {
    let stdout = std::io::stdout();
    let stderr = std::io::stderr();
    run(std::env::args_os(), &mut stdout.lock(), &mut stderr.lock())
}
