//! Command-line front end.

use std::ffi::OsString;
use std::io::Write;
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand, ValueEnum};

use crate::dp::DpConfig;
use crate::error::{Error, EXIT_VALIDATION};
use crate::model::{parse_model, ParseOptions};
use crate::report::{run, Command, RunOptions, RunOutput};

#[derive(Parser, Debug)]
#[command(name = "conewalk", version, about = "Random walks confined to cones: exact sequences, decay rates, escape bounds")]
struct Cli {
    #[command(subcommand)]
    command: Sub,
}

#[derive(Subcommand, Debug)]
enum Sub {
    /// Every applicable stage.
    Analyze(Common),
    /// Exact survival probabilities.
    Enumerate(Common),
    /// Exact excursion probabilities to --target.
    Excursion(Common),
    /// Minimum of the Laplace transform on the dual cone.
    Rho(Common),
    /// Escape probability bounds.
    Bounds(Common),
    /// Recurrence test on the survival sequence.
    Guess(Common),
    /// Monte Carlo estimates.
    Simulate(Common),
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum)]
enum Format {
    Json,
    Csv,
}

#[derive(Args, Debug)]
struct Common {
    /// Model file (JSON).
    #[arg(long)]
    model: PathBuf,
    #[arg(long, default_value_t = 120)]
    horizon: usize,
    /// Largest recurrence order tested; clamped to what the horizon supports.
    #[arg(long = "kmax", default_value_t = 30)]
    k_max: usize,
    /// Excursion end point "y1,y2,..."; defaults to the start point.
    #[arg(long)]
    target: Option<String>,
    #[arg(long, default_value_t = 0)]
    samples: u64,
    #[arg(long, default_value_t = 1)]
    seed: u64,
    /// Monte Carlo threads; 0 uses all cores.
    #[arg(long, default_value_t = 0)]
    workers: usize,
    /// Tilt "t1,t2,..." for the importance sampler instead of t0.
    #[arg(long)]
    tilt: Option<String>,
    /// Rescale weights that do not sum to one.
    #[arg(long)]
    normalize: bool,
    /// Reject step sets that are not truly d-dimensional.
    #[arg(long)]
    strict: bool,
    /// Directory for report.json and the CSV series.
    #[arg(long)]
    out: Option<PathBuf>,
    #[arg(long, value_enum, default_value_t = Format::Json)]
    format: Format,
}

fn parse_list<T: std::str::FromStr>(flag: &str, text: &str) -> Result<Vec<T>, Error> {
    text.split(',')
        .map(|s| s.trim().parse::<T>())
        .collect::<Result<_, _>>()
        .map_err(|_| Error::Usage(format!("--{flag}: cannot parse {text:?}")))
}

fn io_error(path: &Path, e: std::io::Error) -> Error {
    Error::Io {
        path: path.display().to_string(),
        message: e.to_string(),
    }
}

fn execute(command: Command, args: &Common, stdout: &mut dyn Write) -> Result<(), Error> {
    let text = std::fs::read_to_string(&args.model).map_err(|e| io_error(&args.model, e))?;
    let model = parse_model(
        &text,
        ParseOptions {
            normalize: args.normalize,
            strict: args.strict,
        },
    )?;
    let options = RunOptions {
        command,
        horizon: args.horizon,
        k_max: args.k_max,
        target: args.target.as_deref().map(|t| parse_list("target", t)).transpose()?,
        samples: args.samples,
        seed: args.seed,
        workers: args.workers,
        tilt: args.tilt.as_deref().map(|t| parse_list("tilt", t)).transpose()?,
        dp: DpConfig::from_env(),
    };
    let output = run(&model, &options)?;
    if let Some(dir) = &args.out {
        write_artifacts(dir, &output)?;
    }
    let body = match args.format {
        Format::Json => output.report.to_json(),
        Format::Csv => output
            .primary_csv()
            .ok_or_else(|| Error::Usage("this command produces no sequence; use --format json".into()))?
            .to_string(),
    };
    stdout
        .write_all(body.as_bytes())
        .map_err(|e| io_error(Path::new("<stdout>"), e))
}

fn write_artifacts(dir: &Path, output: &RunOutput) -> Result<(), Error> {
    std::fs::create_dir_all(dir).map_err(|e| io_error(dir, e))?;
    let report = dir.join("report.json");
    std::fs::write(&report, output.report.to_json()).map_err(|e| io_error(&report, e))?;
    for (name, body) in &output.csv {
        let path = dir.join(name);
        std::fs::write(&path, body).map_err(|e| io_error(&path, e))?;
    }
    Ok(())
}

/// Parses `args` (including the program name), runs the command and
/// returns the process exit code.
pub fn run_cli<I, T>(args: I, stdout: &mut dyn Write, stderr: &mut dyn Write) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            let code = if e.use_stderr() { EXIT_VALIDATION } else { 0 };
            let rendered = e.render().to_string();
            let sink: &mut dyn Write = if e.use_stderr() { stderr } else { stdout };
            let _ = sink.write_all(rendered.as_bytes());
            return code;
        }
    };
    let (command, args) = match &cli.command {
        Sub::Analyze(a) => (Command::Analyze, a),
        Sub::Enumerate(a) => (Command::Enumerate, a),
        Sub::Excursion(a) => (Command::Excursion, a),
        Sub::Rho(a) => (Command::Rho, a),
        Sub::Bounds(a) => (Command::Bounds, a),
        Sub::Guess(a) => (Command::Guess, a),
        Sub::Simulate(a) => (Command::Simulate, a),
    };
    match execute(command, args, stdout) {
        Ok(()) => 0,
        Err(e) => {
            let _ = writeln!(stderr, "error[{}]: {e}", e.code());
            e.exit_code()
        }
    }
}
