//! `ghostbeam`: electron ghost-imaging simulator front end.

mod commands;
mod manifest;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use ghostbeam_core::ErrorKind;

#[derive(Debug, Parser)]
#[command(
    name = "ghostbeam",
    version,
    about = "SPP-mediated electron ghost imaging simulator"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Args)]
pub struct Common {
    /// Run configuration (TOML).
    #[arg(long)]
    pub config: PathBuf,
    /// RNG seed; overrides `rates.seed`.
    #[arg(long)]
    pub seed: Option<u64>,
    /// Treat aliasing warnings as errors.
    #[arg(long)]
    pub strict: bool,
    /// Output directory; overrides `output.dir`.
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Ungated (incoherent) electron images and optional field dumps.
    Forward {
        #[command(flatten)]
        common: Common,
        /// Also dump 2D forward fields.
        #[arg(long)]
        write_fields: bool,
    },
    /// Gated electron images for one bucket point, or a ghost scan.
    Ghost {
        #[command(flatten)]
        common: Common,
        /// Scan this many points across the bucket extent.
        #[arg(long, conflicts_with = "bucket_point")]
        bucket_scan: Option<usize>,
        /// Detection point `x,y` in nm.
        #[arg(long, value_parser = parse_point, allow_hyphen_values = true)]
        bucket_point: Option<[f64; 2]>,
        /// Defocus planes (nm); replaces `imaging.defocus`.
        #[arg(long, allow_hyphen_values = true, value_delimiter = ',')]
        defocus: Vec<f64>,
    },
    /// Time-tagged event simulation, coincidence filtering and accumulation.
    Coincidence {
        #[command(flatten)]
        common: Common,
        /// Process events without keeping the event log (required above 1e9 events).
        #[arg(long)]
        stream: bool,
    },
    /// Conditional vortex beam shaping with a ring resonator.
    Beamshape {
        #[command(flatten)]
        common: Common,
        /// OAM channel selected by the photon detection (+1 or -1).
        #[arg(long, allow_hyphen_values = true)]
        l: Option<i32>,
        /// Report the equal mixture of both channels (no photon condition).
        #[arg(long, conflicts_with = "l")]
        unconditioned: bool,
    },
    /// Near-field resolution sweep over the electron-object distance.
    Resolution {
        #[command(flatten)]
        common: Common,
    },
}

fn parse_point(s: &str) -> Result<[f64; 2], String> {
    let v: Vec<f64> = s
        .split(',')
        .map(|p| p.trim().parse::<f64>().map_err(|e| format!("`{p}`: {e}")))
        .collect::<Result<_, _>>()?;
    match v[..] {
        [x, y] => Ok([x, y]),
        _ => Err("expected `x,y`".into()),
    }
}

#[derive(Debug, thiserror::Error)]
pub enum CliError {
    #[error(transparent)]
    Core(#[from] ghostbeam_core::Error),
    #[error("invalid argument: {0}")]
    Usage(String),
    #[error("i/o error: {0}")]
    Io(#[from] std::io::Error),
}

impl CliError {
    fn exit_code(&self) -> u8 {
        match self {
            CliError::Core(e) => match e.kind() {
                ErrorKind::Config => 2,
                ErrorKind::Geometry => 3,
                ErrorKind::Numerical => 4,
                ErrorKind::Io => 1,
            },
            CliError::Usage(_) => 2,
            CliError::Io(_) => 1,
        }
    }
}

fn init_threads() -> Result<(), CliError> {
    let Ok(v) = std::env::var("GHOSTBEAM_THREADS") else {
        return Ok(());
    };
    let n: usize = v
        .trim()
        .parse()
        .map_err(|_| CliError::Usage(format!("GHOSTBEAM_THREADS=`{v}` is not a thread count")))?;
    rayon::ThreadPoolBuilder::new()
        .num_threads(n)
        .build_global()
        .map_err(|e| CliError::Usage(e.to_string()))
}

fn run(cli: Cli) -> Result<(), CliError> {
    init_threads()?;
    match cli.command {
        Command::Forward {
            common,
            write_fields,
        } => commands::forward(&common, write_fields),
        Command::Ghost {
            common,
            bucket_scan,
            bucket_point,
            defocus,
        } => commands::ghost(&common, bucket_scan, bucket_point, &defocus),
        Command::Coincidence { common, stream } => commands::coincidence(&common, stream),
        Command::Beamshape {
            common,
            l,
            unconditioned,
        } => commands::beamshape(&common, l, unconditioned),
        Command::Resolution { common } => commands::resolution(&common),
    }
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    match run(Cli::parse()) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("ghostbeam: {e}");
            ExitCode::from(e.exit_code())
        }
    }
}
