use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Parser, Subcommand, ValueEnum};
use serde::Serialize;

use qkleinian::classify::{classify_spec, spec_matrix, Confidence, ElementClass, ElementSpec};
use qkleinian::dynamics::orbit;
use qkleinian::projective::ProjPoint;
use qkleinian::verify::{predictions, run_verification, Predictions, Status, VerifyOptions};
use qkleinian::{Error, HVec3, Quaternion};

#[derive(Parser)]
#[command(name = "qk", version, about = "Cyclic quaternionic Kleinian groups: classify, predict, verify")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Clone, Copy, PartialEq, Eq, ValueEnum)]
enum Format {
    Report,
    Trace,
}

#[derive(Subcommand)]
enum Command {
    /// Print the subclass and its provenance.
    Classify {
        #[arg(long)]
        spec: PathBuf,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Print the Kulkarni and dual limit-set predictions.
    Predict {
        #[arg(long)]
        spec: PathBuf,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Run the check suite and write a report.
    Verify {
        #[arg(long)]
        spec: PathBuf,
        #[arg(long, default_value_t = 200)]
        samples: u64,
        /// Defaults to 500, or 10000 for polynomially converging subclasses.
        #[arg(long)]
        max_iter: Option<u64>,
        /// Defaults to 1e-6, or 1e-3 for polynomially converging subclasses.
        #[arg(long)]
        tol: Option<f64>,
        #[arg(long, default_value_t = 1e-3)]
        cluster_eps: f64,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Write the orbit of a point as a trace table.
    Orbit {
        #[arg(long)]
        spec: PathBuf,
        /// Real coordinates `x,y,z` or a JSON array of three `[w,x,y,z]` quaternions.
        #[arg(long, allow_hyphen_values = true)]
        point: String,
        #[arg(long, default_value_t = 100)]
        n: i64,
        #[arg(long)]
        out: Option<PathBuf>,
        #[arg(long, value_enum, default_value_t = Format::Trace)]
        format: Format,
    },
}

/// Failures mapped onto the exit-code contract.
#[derive(Debug)]
enum Failure {
    Core(Error),
    Io(String),
    ChecksFailed,
}

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        Failure::Core(e)
    }
}

impl Failure {
    fn code(&self) -> u8 {
        match self {
            Failure::ChecksFailed => 1,
            Failure::Core(Error::Schema { .. }) => 2,
            Failure::Core(
                Error::Validation(_)
                | Error::Domain(_)
                | Error::Singular { .. }
                | Error::Precondition(_)
                | Error::AmbiguousRank { .. },
            ) => 3,
            Failure::Core(_) => 4,
            Failure::Io(_) => 5,
        }
    }
}

fn read_spec(path: &Path) -> Result<ElementSpec, Failure> {
    let text = fs::read_to_string(path).map_err(|e| Failure::Io(format!("{}: {e}", path.display())))?;
    Ok(ElementSpec::from_json(&text)?)
}

fn emit(text: &str, out: Option<&Path>) -> Result<(), Failure> {
    match out {
        Some(p) => fs::write(p, text).map_err(|e| Failure::Io(format!("{}: {e}", p.display()))),
        None => {
            println!("{text}");
            Ok(())
        }
    }
}

fn parse_point(s: &str) -> Result<ProjPoint, Failure> {
    let t = s.trim();
    if t.starts_with('[') {
        let v: HVec3 = serde_json::from_str(t)
            .map_err(|e| Failure::Core(Error::Schema { path: "point".into(), message: e.to_string() }))?;
        return Ok(ProjPoint::new(v)?);
    }
    let xs: Vec<f64> = t
        .split(',')
        .map(|x| x.trim().parse::<f64>())
        .collect::<Result<_, _>>()
        .map_err(|e| Failure::Core(Error::Schema { path: "point".into(), message: e.to_string() }))?;
    if xs.len() != 3 {
        return Err(Failure::Core(Error::Schema { path: "point".into(), message: "expected three coordinates".into() }));
    }
    Ok(ProjPoint::new(HVec3::new(Quaternion::real(xs[0]), Quaternion::real(xs[1]), Quaternion::real(xs[2])))?)
}

#[derive(Serialize)]
struct ClassRecord {
    label: String,
    confidence: Confidence,
    class: ElementClass,
}

#[derive(Serialize)]
struct PredictRecord {
    class: String,
    #[serde(flatten)]
    predictions: Predictions,
}

fn run(cli: Cli) -> Result<(), Failure> {
    match cli.command {
        Command::Classify { spec, out } => {
            let (class, confidence) = classify_spec(&read_spec(&spec)?)?;
            println!("{}, {:?}", class.fine.label(), confidence);
            if let Some(p) = out {
                let rec = ClassRecord { label: class.fine.label(), confidence, class };
                emit(&serde_json::to_string_pretty(&rec).expect("serializes"), Some(&p))?;
            }
        }
        Command::Predict { spec, out } => {
            let (class, _) = classify_spec(&read_spec(&spec)?)?;
            let rec = PredictRecord { class: class.fine.label(), predictions: predictions(&class)? };
            emit(&serde_json::to_string_pretty(&rec).expect("serializes"), out.as_deref())?;
        }
        Command::Verify { spec, samples, max_iter, tol, cluster_eps, seed, out } => {
            let spec = read_spec(&spec)?;
            let opts = VerifyOptions { samples, max_iter, tol, cluster_eps, seed };
            let report = run_verification(&spec, &opts)?;
            for c in &report.body.checks {
                let status = match c.status {
                    Status::Pass => "pass",
                    Status::Fail => "FAIL",
                    Status::Skipped => "skip",
                };
                eprintln!("{status:4} {:22} measured {:.3e} threshold {:.1e}", c.name, c.measured, c.threshold);
            }
            emit(&report.to_json(), out.as_deref())?;
            if report.body.status == Status::Fail {
                return Err(Failure::ChecksFailed);
            }
        }
        Command::Orbit { spec, point, n, out, format } => {
            let g = spec_matrix(&read_spec(&spec)?)?;
            let p = parse_point(&point)?;
            let (from, to) = if n >= 0 { (0, n) } else { (n, 0) };
            let trace = orbit(&g, &p, from, to)?;
            let text = match format {
                Format::Trace => trace.to_table(),
                Format::Report => serde_json::to_string_pretty(&trace).expect("serializes"),
            };
            emit(text.trim_end(), out.as_deref())?;
        }
    }
    Ok(())
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::new().filter_or("QK_LOG", "error")).init();
    match run(Cli::parse()) {
        Ok(()) => ExitCode::SUCCESS,
        Err(f) => {
            match &f {
                Failure::ChecksFailed => eprintln!("verification failed"),
                Failure::Core(e) => eprintln!("error: {e}"),
                Failure::Io(e) => eprintln!("error: {e}"),
            }
            ExitCode::from(f.code())
        }
    }
}
