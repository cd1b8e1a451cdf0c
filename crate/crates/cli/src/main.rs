use clap::Parser;
use std::io::Read;
use std::process::ExitCode;
use wold2d_cli::config::OutputFormat;
use wold2d_cli::verify::Scope;
use wold2d_cli::{run, CliError, RunConfig};

/// Lattice half-plane geometry, truncated isometry-pair models, and
/// covariance-domain Wold decomposition of planar random fields.
#[derive(Parser)]
#[command(name = "wold2d", version, about)]
struct Args {
    /// Path to a JSON run configuration.
    #[arg(long, conflicts_with = "stdin")]
    config: Option<String>,

    /// Read the JSON run configuration from standard input.
    #[arg(long)]
    stdin: bool,

    /// Write the report here instead of standard output.
    #[arg(long)]
    output: Option<String>,

    /// Output format: json, csv or text.
    #[arg(long)]
    format: Option<String>,

    /// Seed for simulation and the verification batteries.
    #[arg(long, default_value_t = 0)]
    seed: u64,

    /// Run the invariant battery for a scope (all, lattice_halfplane,
    /// diagram_algebra, operator_models, field_engine).
    #[arg(long, value_name = "SCOPE")]
    verify: Option<String>,
}

fn main() -> ExitCode {
    let args = Args::parse();
    match execute(&args) {
        Ok(failed) => {
            if failed == 0 {
                ExitCode::SUCCESS
            } else {
                ExitCode::from(1)
            }
        }
        Err(e) => {
            eprintln!("wold2d: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}

fn execute(args: &Args) -> Result<usize, CliError> {
    let cli_format: Option<OutputFormat> = match &args.format {
        Some(f) => Some(f.parse()?),
        None => None,
    };

    let report;
    let format;
    if let Some(scope) = &args.verify {
        let scope: Scope = scope.parse()?;
        report = wold2d_cli::verify_suite(scope, args.seed);
        format = cli_format.unwrap_or(OutputFormat::Json);
    } else {
        let text = if args.stdin {
            let mut buf = String::new();
            std::io::stdin()
                .read_to_string(&mut buf)
                .map_err(|e| CliError::Config(format!("cannot read stdin: {e}")))?;
            buf
        } else if let Some(path) = &args.config {
            std::fs::read_to_string(path)
                .map_err(|e| CliError::Config(format!("cannot read {path:?}: {e}")))?
        } else {
            return Err(CliError::Config(
                "one of --config, --stdin or --verify is required".into(),
            ));
        };
        let config = RunConfig::from_json(&text)?;
        format = cli_format
            .or_else(|| config.output.as_ref().and_then(|o| o.format))
            .unwrap_or(OutputFormat::Json);
        report = run(&config, args.seed)?;
    }

    let bytes = report.emit(format)?;
    let out_path = args.output.clone();
    match out_path {
        Some(path) => std::fs::write(&path, &bytes)
            .map_err(|e| CliError::Run(format!("cannot write {path:?}: {e}")))?,
        None => {
            use std::io::Write;
            std::io::stdout()
                .write_all(&bytes)
                .map_err(|e| CliError::Run(format!("cannot write output: {e}")))?;
        }
    }
    eprintln!(
        "wold2d: {} passed, {} failed ({:.1} ms)",
        report.passed, report.failed, report.wall_time_ms
    );
    Ok(report.failed)
}
