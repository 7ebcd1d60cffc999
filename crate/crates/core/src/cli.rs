//! Command-line front end.
//!
//! Exit codes: 0 positive certified rate (or success for non-certifying
//! commands), 1 non-positive rate, 2 input error, 3 statistics inconsistent
//! with the stated imperfections. Results go to stdout (or `--out`),
//! diagnostics to stderr.

use std::ffi::OsString;
use std::fs;
use std::path::{Path, PathBuf};

use clap::{Parser, Subcommand};
use serde::de::DeserializeOwned;
use serde::Serialize;

use crate::boundary::{boundary_csv, rate_surface, surface_csv, trace_boundary, SweepSpec};
use crate::characterization::{basis_dependence, blinding_parameter, fidelity, trace_distance};
use crate::error::Error;
use crate::numerics::{HermitianOperator, Probability};
use crate::phase::{solve_delta_ph, EstimatedStats};
use crate::rate::{certify, rate_detector_only, CertificateInputs, RateCertificate};
use crate::sim::{simulate_and_certify, ProtocolConfig, SimulationReport};

pub const EXIT_POSITIVE: i32 = 0;
pub const EXIT_NON_POSITIVE: i32 = 1;
pub const EXIT_INPUT: i32 = 2;
pub const EXIT_INCONSISTENT: i32 = 3;

#[derive(Parser, Debug)]
#[command(name = "bb84cert", version, about = "Certified BB84 key rates with imperfect devices")]
struct Cli {
    /// Worker threads for simulation and sweeps (default: all cores).
    #[arg(long, global = true)]
    threads: Option<usize>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Certify a key rate from statistics and device imperfections.
    Certify {
        /// JSON file, or inline JSON, with `stats` and `imperfections`.
        #[arg(long = "in", value_name = "FILE|JSON")]
        input: String,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Key rate assuming a perfect source (Δ must be 0).
    Rate {
        #[arg(long = "in", value_name = "FILE|JSON")]
        input: String,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Phase error bound for one set of X-basis statistics.
    DeltaPh {
        #[arg(long)]
        qx: f64,
        #[arg(long)]
        qph: f64,
        #[arg(long)]
        dx: f64,
        #[arg(long)]
        delta: f64,
    },
    /// Fidelity, basis dependence and trace distance of two density matrices.
    Characterize {
        #[arg(long = "rho-z", value_name = "FILE|JSON")]
        rho_z: String,
        #[arg(long = "rho-x", value_name = "FILE|JSON")]
        rho_x: String,
    },
    /// Blinding parameter of a POVM element on a projector's support.
    Eta {
        #[arg(long, value_name = "FILE|JSON")]
        povm: String,
        #[arg(long, value_name = "FILE|JSON")]
        projector: String,
    },
    /// Run the protocol simulator and certify its statistics.
    Simulate {
        #[arg(long, value_name = "FILE|JSON")]
        config: String,
        /// Overrides the seed in the configuration.
        #[arg(long)]
        seed: Option<u64>,
    },
    /// Trace the positive-rate boundary over a two-parameter sweep.
    Boundary {
        #[arg(long, value_name = "FILE|JSON")]
        sweep: String,
        /// Boundary CSV (`y,x_boundary`).
        #[arg(long)]
        out: PathBuf,
        /// Optional rate surface CSV (`x,y,rate`).
        #[arg(long)]
        surface: Option<PathBuf>,
    },
}

struct Failure {
    code: i32,
    message: String,
}

impl Failure {
    fn input(message: impl Into<String>) -> Self {
        Failure { code: EXIT_INPUT, message: message.into() }
    }
}

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        let code = match e {
            Error::InconsistentStatistics { .. } => EXIT_INCONSISTENT,
            Error::InsufficientStatistics(_) => EXIT_NON_POSITIVE,
            _ => EXIT_INPUT,
        };
        Failure { code, message: e.to_string() }
    }
}

type CliResult = std::result::Result<i32, Failure>;

/// Parses arguments, runs one command and returns the process exit code.
pub fn run<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { EXIT_INPUT } else { EXIT_POSITIVE };
        }
    };
    let mut pool = rayon::ThreadPoolBuilder::new();
    if let Some(n) = cli.threads {
        pool = pool.num_threads(n);
    }
    let pool = match pool.build() {
        Ok(p) => p,
        Err(e) => {
            eprintln!("error: cannot start worker threads: {e}");
            return EXIT_INPUT;
        }
    };
    match pool.install(|| dispatch(cli.command)) {
        Ok(code) => code,
        Err(f) => {
            eprintln!("error: {}", f.message);
            f.code
        }
    }
}

fn dispatch(command: Command) -> CliResult {
    match command {
        Command::Certify { input, out } => {
            let inputs = load_inputs(&input)?;
            let cert = certify(&inputs.stats, &inputs.imperfections)?;
            emit_json(&cert, out.as_deref())?;
            Ok(rate_code(cert.positive))
        }
        Command::Rate { input, out } => {
            let inputs = load_inputs(&input)?;
            let imp = inputs.imperfections;
            imp.validate()?;
            if imp.delta != 0.0 {
                return Err(Failure::input(
                    "imperfections.delta: `rate` assumes a perfect source; use `certify` for delta > 0",
                ));
            }
            let cert = rate_detector_only(&inputs.stats, imp.eta_z, imp.epsilon_z)?;
            emit_json(&cert, out.as_deref())?;
            Ok(rate_code(cert.positive))
        }
        Command::DeltaPh { qx, qph, dx, delta } => {
            let prob = |name: &str, v: f64| {
                Probability::new(v).map_err(|e| Failure::input(format!("--{name}: {e}")))
            };
            let stats = EstimatedStats {
                q_x: prob("qx", qx)?,
                q_z: Probability::ONE,
                q_ph: prob("qph", qph)?,
                delta_x: prob("dx", dx)?,
                delta_z: Probability::ZERO,
            };
            let bound = solve_delta_ph(&stats, delta)?;
            emit_json(&bound, None)?;
            Ok(EXIT_POSITIVE)
        }
        Command::Characterize { rho_z, rho_x } => {
            let rz: HermitianOperator = load_json(&rho_z, "--rho-z")?;
            let rx: HermitianOperator = load_json(&rho_x, "--rho-x")?;
            let report = serde_json::json!({
                "fidelity": fidelity(&rz, &rx)?,
                "delta": basis_dependence(&rz, &rx)?,
                "trace_distance": trace_distance(&rz, &rx)?,
            });
            emit_json(&report, None)?;
            Ok(EXIT_POSITIVE)
        }
        Command::Eta { povm, projector } => {
            let e: HermitianOperator = load_json(&povm, "--povm")?;
            let q: HermitianOperator = load_json(&projector, "--projector")?;
            let eta = blinding_parameter(&e, &q)?;
            emit_json(&serde_json::json!({ "eta_z": eta }), None)?;
            Ok(EXIT_POSITIVE)
        }
        Command::Simulate { config, seed } => {
            let mut cfg = load_config(&config)?;
            if let Some(s) = seed {
                cfg.seed = s;
            }
            let report = simulate_and_certify(&cfg)?;
            emit_json(&report, None)?;
            Ok(rate_code(report.certificate.positive))
        }
        Command::Boundary { sweep, out, surface } => {
            let spec: SweepSpec = load_json(&sweep, "--sweep")?;
            let points = trace_boundary(&spec)?;
            write_file(&out, &boundary_csv(&points))?;
            if let Some(path) = surface {
                write_file(&path, &surface_csv(&rate_surface(&spec)?))?;
            }
            eprintln!("{} boundary point(s) written to {}", points.len(), out.display());
            Ok(EXIT_POSITIVE)
        }
    }
}

fn rate_code(positive: bool) -> i32 {
    if positive {
        EXIT_POSITIVE
    } else {
        EXIT_NON_POSITIVE
    }
}

/// Reads `arg` as inline JSON when it starts with `{` or `[`, else as a path.
fn load_value(arg: &str, flag: &str) -> std::result::Result<(serde_json::Value, String), Failure> {
    let trimmed = arg.trim_start();
    let (text, origin) = if trimmed.starts_with('{') || trimmed.starts_with('[') {
        (arg.to_string(), format!("{flag} (inline)"))
    } else {
        let text = fs::read_to_string(arg).map_err(|e| Failure::input(format!("{flag}: cannot read {arg}: {e}")))?;
        (text, arg.to_string())
    };
    let value = serde_json::from_str(&text).map_err(|e| Failure::input(format!("{origin}: {e}")))?;
    Ok((value, origin))
}

fn parse_value<T: DeserializeOwned>(value: serde_json::Value, origin: &str) -> std::result::Result<T, Failure> {
    serde_path_to_error::deserialize(value).map_err(|e| {
        let path = e.path().to_string();
        let inner = e.into_inner();
        if path == "." {
            Failure::input(format!("{origin}: {inner}"))
        } else {
            Failure::input(format!("{origin}: field `{path}`: {inner}"))
        }
    })
}

fn load_json<T: DeserializeOwned>(arg: &str, flag: &str) -> std::result::Result<T, Failure> {
    let (value, origin) = load_value(arg, flag)?;
    parse_value(value, &origin)
}

/// Certificate inputs, given directly or as a previously emitted certificate.
fn load_inputs(arg: &str) -> std::result::Result<CertificateInputs, Failure> {
    let (value, origin) = load_value(arg, "--in")?;
    if value.get("inputs").is_some() {
        Ok(parse_value::<RateCertificate>(value, &origin)?.inputs)
    } else {
        parse_value(value, &origin)
    }
}

/// Protocol configuration, given directly or as a previously emitted report.
fn load_config(arg: &str) -> std::result::Result<ProtocolConfig, Failure> {
    let (value, origin) = load_value(arg, "--config")?;
    if value.get("counts").is_some() {
        Ok(parse_value::<SimulationReport>(value, &origin)?.config)
    } else {
        parse_value(value, &origin)
    }
}

fn emit_json<T: Serialize>(value: &T, out: Option<&Path>) -> std::result::Result<(), Failure> {
    let mut text = serde_json::to_string_pretty(value).map_err(|e| Failure::input(e.to_string()))?;
    text.push('\n');
    match out {
        Some(path) => write_file(path, &text),
        None => {
            print!("{text}");
            Ok(())
        }
    }
}

fn write_file(path: &Path, text: &str) -> std::result::Result<(), Failure> {
    fs::write(path, text).map_err(|e| Failure::input(format!("cannot write {}: {e}", path.display())))
}
