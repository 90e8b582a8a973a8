//! Command-line entry point. Exit codes: 0 success, 1 verification failure,
//! 2 input or configuration error.

use std::ffi::OsString;
use std::io::Write;
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand, ValueEnum};
use serde::{Deserialize, Serialize};
use serde_json::json;

use super::io::{load_json, load_matrix, matrix_to_json, save_report, to_json_pretty, MatrixJson};
use super::{replay, resolve_seed, run_suite, Counterexample, RunReport, SuiteConfig, SuiteName};
use crate::algebra::State;
use crate::channels::{check_schwarz, pullback_state, transpose_map, AlgebraMap, KrausChannel, DEFAULT_SCHWARZ_TRIALS};
use crate::entropy::{relative_entropy, relative_entropy_limit, LimitSchedule};
use crate::error::{Error, Result};
use crate::qforms::{build_compatible_representation, geometric_mean, interpolate, Form, QuadraticForm};

#[derive(Parser, Debug)]
#[command(
    name = "qrelent",
    version,
    about = "Quadratic-form interpolation, relative entropy and its verification suites"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Compatible representation of a pair of forms.
    Repr {
        #[command(subcommand)]
        action: ReprAction,
    },
    /// Interpolated form at parameter t.
    Interp {
        #[command(flatten)]
        pair: FormPair,
        #[arg(long)]
        t: f64,
    },
    /// Geometric mean of two forms.
    Geomean {
        #[command(flatten)]
        pair: FormPair,
    },
    /// Relative entropy of two density matrices.
    Entropy {
        #[arg(long)]
        omega: PathBuf,
        #[arg(long)]
        nu: PathBuf,
        #[arg(long, value_enum, default_value_t = Method::Closed)]
        method: Method,
        /// Print the difference-quotient table as JSON (limit method only).
        #[arg(long)]
        diagnostics: bool,
    },
    /// Channel operations.
    Channel {
        #[command(subcommand)]
        action: ChannelAction,
    },
    /// Run verification suites or replay a counterexample.
    Verify(VerifyArgs),
}

#[derive(Subcommand, Debug)]
enum ReprAction {
    Build {
        #[command(flatten)]
        pair: FormPair,
    },
}

#[derive(Args, Debug)]
struct FormPair {
    #[arg(long)]
    p: PathBuf,
    #[arg(long)]
    q: PathBuf,
}

#[derive(Copy, Clone, Debug, PartialEq, Eq, ValueEnum)]
enum Method {
    Closed,
    Limit,
}

#[derive(Args, Debug)]
#[group(required = true, multiple = false)]
struct MapSource {
    /// Kraus operators: a JSON list of matrices or {"source_blocks", "kraus"}.
    #[arg(long)]
    kraus: Option<PathBuf>,
    /// Transpose map on M_n.
    #[arg(long)]
    transpose: Option<usize>,
}

#[derive(Subcommand, Debug)]
enum ChannelAction {
    Apply {
        #[command(flatten)]
        map: MapSource,
        #[arg(long)]
        x: PathBuf,
    },
    Pullback {
        #[command(flatten)]
        map: MapSource,
        #[arg(long)]
        omega: PathBuf,
    },
    CheckSchwarz {
        #[command(flatten)]
        map: MapSource,
        #[arg(long, default_value_t = DEFAULT_SCHWARZ_TRIALS)]
        trials: usize,
        #[arg(long, default_value_t = 0)]
        seed: u64,
    },
}

#[derive(Args, Debug)]
struct VerifyArgs {
    /// Comma-separated suite names; all suites by default.
    #[arg(long, value_delimiter = ',')]
    suites: Option<Vec<String>>,
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long)]
    trials: Option<usize>,
    #[arg(long, value_delimiter = ',')]
    dims: Option<Vec<usize>>,
    /// JSON configuration file; command-line flags take precedence.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Write the JSON report here instead of standard output.
    #[arg(long)]
    out: Option<PathBuf>,
    /// Re-check a counterexample (or the first one in a report).
    #[arg(long, conflicts_with_all = ["suites", "seed", "trials", "dims", "config"])]
    replay: Option<PathBuf>,
}

#[derive(Deserialize)]
#[serde(untagged)]
enum ChannelFile {
    List(Vec<MatrixJson>),
    Object {
        #[serde(default)]
        source_blocks: Option<Vec<usize>>,
        kraus: Vec<MatrixJson>,
    },
}

fn load_channel(path: &Path) -> Result<KrausChannel> {
    let (blocks, kraus) = match load_json::<ChannelFile>(path)? {
        ChannelFile::List(k) => (None, k),
        ChannelFile::Object { source_blocks, kraus } => (source_blocks, kraus),
    };
    let kraus = kraus.iter().map(MatrixJson::to_matrix).collect::<Result<Vec<_>>>()?;
    let ch = KrausChannel::from_kraus(kraus)?;
    match blocks {
        Some(b) => ch.with_source(crate::algebra::AlgebraDescriptor::new(b)?),
        None => Ok(ch),
    }
}

fn load_map(src: &MapSource) -> Result<Box<dyn AlgebraMap>> {
    match (&src.kraus, src.transpose) {
        (Some(path), _) => Ok(Box::new(load_channel(path)?)),
        (None, Some(n)) if n >= 1 => Ok(Box::new(transpose_map(n))),
        _ => Err(Error::InvalidParameter("transpose dimension must be at least 1".into())),
    }
}

fn load_form(path: &Path) -> Result<QuadraticForm> {
    QuadraticForm::from_matrix(load_matrix(path)?)
}

fn load_state(path: &Path) -> Result<State> {
    State::full(load_matrix(path)?)
}

#[derive(Serialize)]
struct ReprOutput {
    support_dim: usize,
    joint_spectrum: Vec<f64>,
    whitening_diag: Vec<f64>,
    iso_to_support: MatrixJson,
    p_op: MatrixJson,
    q_op: MatrixJson,
    residuals: serde_json::Value,
}

/// Outcome of a command: text for standard output plus the exit code.
struct Response {
    stdout: String,
    stderr: String,
    code: i32,
}

impl Response {
    fn ok(stdout: String) -> Self {
        Self {
            stdout,
            stderr: String::new(),
            code: 0,
        }
    }
}

fn execute(cli: Cli) -> Result<Response> {
    match cli.command {
        Command::Repr {
            action: ReprAction::Build { pair },
        } => {
            let rep = build_compatible_representation(&load_form(&pair.p)?, &load_form(&pair.q)?)?;
            let res = rep.residuals();
            let out = ReprOutput {
                support_dim: rep.support_dim(),
                joint_spectrum: rep.joint_spectrum().to_vec(),
                whitening_diag: (0..rep.support_dim())
                    .map(|i| rep.whitening_root().as_matrix()[(i, i)].re)
                    .collect(),
                iso_to_support: MatrixJson::from_matrix(rep.iso_to_support()),
                p_op: MatrixJson::from_matrix(rep.p_op().as_matrix()),
                q_op: MatrixJson::from_matrix(rep.q_op().as_matrix()),
                residuals: json!({
                    "sum_identity": res.sum_identity,
                    "commutator": res.commutator,
                    "min_spectrum": res.min_spectrum,
                    "q_reproduction": res.q_reproduction,
                }),
            };
            Ok(Response::ok(to_json_pretty(&out)))
        }
        Command::Interp { pair, t } => {
            let g = interpolate(&load_form(&pair.p)?, &load_form(&pair.q)?, t)?;
            Ok(Response::ok(matrix_to_json(g.form_matrix())))
        }
        Command::Geomean { pair } => {
            let g = geometric_mean(&load_form(&pair.p)?, &load_form(&pair.q)?)?;
            Ok(Response::ok(matrix_to_json(g.form_matrix())))
        }
        Command::Entropy {
            omega,
            nu,
            method,
            diagnostics,
        } => {
            let (w, v) = (load_state(&omega)?, load_state(&nu)?);
            match method {
                Method::Closed => Ok(Response::ok(relative_entropy(&w, &v)?.to_string())),
                Method::Limit => {
                    let res = relative_entropy_limit(&w, &v, &LimitSchedule::default())?;
                    let mut resp = Response::ok(res.value.to_string());
                    if diagnostics {
                        resp.stdout = to_json_pretty(&json!({
                            "value": res.value,
                            "diagnostics": res.diagnostics,
                        }));
                    } else if !res.diagnostics.converged && !res.diagnostics.diverged {
                        resp.stderr = "warning: difference quotients did not converge".into();
                    }
                    Ok(resp)
                }
            }
        }
        Command::Channel { action } => match action {
            ChannelAction::Apply { map, x } => {
                let m = load_map(&map)?;
                Ok(Response::ok(matrix_to_json(&m.apply(&load_matrix(&x)?)?)))
            }
            ChannelAction::Pullback { map, omega } => {
                let m = load_map(&map)?;
                let pulled = pullback_state(&load_state(&omega)?, m.as_ref())?;
                Ok(Response::ok(matrix_to_json(pulled.density().as_matrix())))
            }
            ChannelAction::CheckSchwarz { map, trials, seed } => {
                let m = load_map(&map)?;
                let rep = check_schwarz(m.as_ref(), trials, seed)?;
                let witness = rep.witness.as_ref().map(|w| {
                    json!({
                        "element": MatrixJson::from_matrix(&w.element),
                        "lhs": MatrixJson::from_matrix(&w.lhs),
                        "rhs": MatrixJson::from_matrix(&w.rhs),
                        "eigenvalue": w.eigenvalue,
                    })
                });
                let body = to_json_pretty(&json!({
                    "passed": rep.passed(),
                    "samples": rep.samples,
                    "min_margin": rep.min_margin,
                    "max_difference": rep.max_difference,
                    "witness": witness,
                }));
                Ok(Response {
                    stdout: body,
                    stderr: String::new(),
                    code: if rep.passed() { 0 } else { 1 },
                })
            }
        },
        Command::Verify(args) => verify(args),
    }
}

fn verify(args: VerifyArgs) -> Result<Response> {
    if let Some(path) = &args.replay {
        let text = std::fs::read_to_string(path)?;
        let cx: Counterexample = match serde_json::from_str::<Counterexample>(&text) {
            Ok(cx) => cx,
            Err(_) => {
                let report: RunReport = serde_json::from_str(&text).map_err(|e| {
                    Error::Parse(format!(
                        "{}: neither a counterexample nor a report: {e}",
                        path.display()
                    ))
                })?;
                report
                    .first_counterexample()
                    .cloned()
                    .ok_or_else(|| Error::Parse(format!("{}: report has no counterexample", path.display())))?
            }
        };
        let outcome = replay(&cx)?;
        let passed = outcome.margin() >= 0.0;
        let line = format!(
            "replay {} trial {}: excess {:e}, tolerance {:e}, margin {:e}: {}",
            cx.suite,
            cx.trial,
            outcome.excess,
            outcome.tolerance,
            outcome.margin(),
            if passed { "PASS" } else { "FAIL" }
        );
        return Ok(Response {
            stdout: line,
            stderr: String::new(),
            code: if passed { 0 } else { 1 },
        });
    }

    let mut config = SuiteConfig::default();
    let mut config_has_seed = false;
    if let Some(path) = &args.config {
        let raw: serde_json::Value = load_json(path)?;
        config_has_seed = raw.get("seed").is_some();
        config = serde_json::from_value(raw).map_err(|e| Error::Config(vec![format!("{}: {e}", path.display())]))?;
    }
    if let Some(names) = &args.suites {
        config.suites = names
            .iter()
            .map(|s| s.trim().parse::<SuiteName>())
            .collect::<Result<_>>()?;
    }
    if let Some(t) = args.trials {
        config.trials = Some(t);
    }
    if let Some(d) = &args.dims {
        config.dims = Some(d.clone());
    }
    let explicit = match (args.seed, config_has_seed) {
        (Some(s), _) => Some((s, "cli")),
        (None, true) => Some((config.seed, "config")),
        (None, false) => None,
    };
    let (seed, source) = resolve_seed(explicit)?;
    config.seed = seed;
    let report = run_suite(&config, &source)?;

    let mut summary = String::new();
    for s in &report.suites {
        summary.push_str(&format!(
            "{:<20} {} trials={} min_margin={:e}\n",
            s.suite.as_str(),
            if s.passed { "PASS" } else { "FAIL" },
            s.trials,
            s.min_margin
        ));
    }
    let stdout = match &args.out {
        Some(path) => {
            save_report(&report, path)?;
            String::new()
        }
        None => to_json_pretty(&report),
    };
    Ok(Response {
        stdout,
        stderr: summary.trim_end().to_string(),
        code: if report.all_passed { 0 } else { 1 },
    })
}

/// Parses `argv` (including the program name), runs the command, and returns the exit code.
pub fn cli_main<I, T>(argv: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(argv) {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { 2 } else { 0 };
        }
    };
    match execute(cli) {
        Ok(resp) => {
            let mut out = std::io::stdout().lock();
            if !resp.stdout.is_empty() {
                let _ = writeln!(out, "{}", resp.stdout);
            }
            if !resp.stderr.is_empty() {
                eprintln!("{}", resp.stderr);
            }
            resp.code
        }
        Err(e) => {
            eprintln!("error: {e}");
            2
        }
    }
}
