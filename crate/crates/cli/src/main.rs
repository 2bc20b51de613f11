use std::io::Write;
use std::net::{IpAddr, SocketAddr};
use std::path::PathBuf;
use std::process::ExitCode;
use std::sync::Arc;

use anyhow::Result;
use clap::{ArgGroup, Args, Parser, Subcommand};
use xdfkit::synthlab::SynthConfig;
use xdfkit_cli::commands::{self, AnnotateTarget, Exit};
use xdfkit_cli::service::{self, ServiceState, DEFAULT_PORT, PORT_ENV};

#[derive(Parser)]
#[command(name = "xdfkit", version, about = "Inspect, annotate, resample and serve XDF recordings")]
struct Cli {
    /// More log output (repeatable).
    #[arg(short, long, global = true, action = clap::ArgAction::Count)]
    verbose: u8,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Stream table with nominal and effective sampling rates.
    Info {
        file: PathBuf,
        /// Exit with status 3 when any effective rate deviates.
        #[arg(long)]
        strict: bool,
        #[arg(long)]
        json: bool,
    },
    /// XML metadata tree of the file header or one stream.
    Tree {
        file: PathBuf,
        #[arg(long)]
        stream: Option<u32>,
    },
    /// Parse the file and list warnings.
    Validate { file: PathBuf },
    /// Write events decoded from marker streams as CSV.
    ExportCsv {
        file: PathBuf,
        #[arg(short, long)]
        output: PathBuf,
    },
    /// Add one event to the recording.
    #[command(group(ArgGroup::new("target").required(true).args(["write_back", "output"])))]
    Annotate {
        file: PathBuf,
        #[arg(long, allow_hyphen_values = true)]
        onset: f64,
        #[arg(long, default_value_t = 0.0, allow_hyphen_values = true)]
        duration: f64,
        #[arg(long)]
        label: String,
        /// Append to FILE in place.
        #[arg(long)]
        write_back: bool,
        /// Write the annotated recording to a new file.
        #[arg(short, long)]
        output: Option<PathBuf>,
    },
    /// Resample all regular numeric streams to a common rate.
    Resample {
        file: PathBuf,
        /// Target rate in Hz (default: the highest nominal rate).
        #[arg(long)]
        rate: Option<f64>,
        #[arg(short, long)]
        output: PathBuf,
    },
    /// Generate the simulated phase-prediction recording.
    Synthgen {
        #[command(flatten)]
        config: SynthArgs,
        #[arg(short, long)]
        output: PathBuf,
    },
    /// Check trigger phases against the raw signal.
    PhaseCheck {
        file: PathBuf,
        #[arg(long, default_value_t = 10.0)]
        freq: f64,
        #[arg(long, default_value_t = 0.0, allow_hyphen_values = true)]
        target_phase: f64,
        /// Largest accepted |circular mean error| in radians.
        #[arg(long, default_value_t = 0.2)]
        tol: f64,
        #[arg(long)]
        json: bool,
    },
    /// Serve the recording to the viewer over HTTP.
    Serve {
        file: PathBuf,
        #[arg(long, env = PORT_ENV, default_value_t = DEFAULT_PORT)]
        port: u16,
        #[arg(long, default_value = "127.0.0.1")]
        host: IpAddr,
    },
}

#[derive(Args)]
struct SynthArgs {
    /// Closed-loop duration in seconds.
    #[arg(long, default_value_t = 60.0)]
    duration: f64,
    #[arg(long, default_value_t = 500.0)]
    srate: f64,
    /// Oscillation frequency in Hz.
    #[arg(long, default_value_t = 10.0)]
    freq: f64,
    #[arg(long, default_value_t = 0.5)]
    noise: f64,
    /// Prediction horizon in seconds.
    #[arg(long, default_value_t = 0.2)]
    horizon: f64,
    #[arg(long, default_value_t = 0.0, allow_hyphen_values = true)]
    target_phase: f64,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Trailing fit window in seconds.
    #[arg(long, default_value_t = 0.5)]
    window: f64,
    #[arg(long, default_value_t = 0.0, allow_hyphen_values = true)]
    clock_offset: f64,
    #[arg(long, default_value_t = 0.0, allow_hyphen_values = true)]
    drift: f64,
}

impl From<SynthArgs> for SynthConfig {
    fn from(a: SynthArgs) -> Self {
        SynthConfig {
            duration: a.duration,
            srate: a.srate,
            osc_freq: a.freq,
            noise_sigma: a.noise,
            horizon: a.horizon,
            target_phase: a.target_phase,
            seed: a.seed,
            window: a.window,
            clock_offset: a.clock_offset,
            drift: a.drift,
        }
    }
}

fn run(command: Command) -> Result<Exit> {
    let stdout = std::io::stdout();
    let mut out = stdout.lock();
    let exit = match command {
        Command::Info { file, strict, json } => {
            commands::info(&commands::load_logged(&file)?, strict, json, &mut out)?
        }
        Command::Tree { file, stream } => {
            commands::tree(&commands::load_logged(&file)?, stream, &mut out)?
        }
        Command::Validate { file } => commands::validate(&file, &mut out)?,
        Command::ExportCsv { file, output } => {
            let n = commands::export(&commands::load_logged(&file)?, &output)?;
            writeln!(out, "wrote {n} events to {}", output.display())?;
            Exit::Ok
        }
        Command::Annotate { file, onset, duration, label, write_back, output } => {
            // clap guarantees exactly one of --write-back and --output
            debug_assert!(write_back != output.is_some());
            let target = match &output {
                Some(path) => AnnotateTarget::Copy(path),
                None => AnnotateTarget::InPlace,
            };
            let bytes = commands::annotate(&file, onset, duration, &label, target)?;
            let dest = output.as_ref().unwrap_or(&file);
            writeln!(out, "appended {bytes} bytes to {}", dest.display())?;
            Exit::Ok
        }
        Command::Resample { file, rate, output } => {
            let rec = commands::resample_recording(&commands::load_logged(&file)?, rate)?;
            commands::write_recording(&rec, &output)?;
            writeln!(out, "wrote {} streams to {}", rec.streams.len(), output.display())?;
            Exit::Ok
        }
        Command::Synthgen { config, output } => {
            let rec = commands::synthgen(&config.into(), &output)?;
            let triggers = rec.stream_by_name("triggers").map_or(0, |s| s.sample_count());
            writeln!(out, "wrote {} streams, {triggers} triggers to {}", rec.streams.len(), output.display())?;
            Exit::Ok
        }
        Command::PhaseCheck { file, freq, target_phase, tol, json } => {
            let rec = commands::load_logged(&file)?;
            commands::phase_check(&rec, freq, target_phase, tol, json, &mut out)?
        }
        Command::Serve { file, port, host } => {
            let state = Arc::new(ServiceState::load(&file)?);
            let runtime = tokio::runtime::Runtime::new()?;
            eprintln!("serving {} on http://{host}:{port}", file.display());
            runtime.block_on(service::serve(state, SocketAddr::new(host, port)))?;
            Exit::Ok
        }
    };
    out.flush()?;
    Ok(exit)
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return ExitCode::from(if e.use_stderr() { Exit::Usage.code() } else { 0 });
        }
    };
    let level = match cli.verbose {
        0 => "warn",
        1 => "info",
        _ => "debug",
    };
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or(level)).init();
    match run(cli.command) {
        Ok(exit) => ExitCode::from(exit.code()),
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(Exit::Failure.code())
        }
    }
}
