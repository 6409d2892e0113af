use std::net::{IpAddr, SocketAddr};
use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand, ValueEnum};
use trialogue_cli::commands::{cmd_run, cmd_score, CliError, Output, RunRequest, ScoreRequest, REPORT_DIR_ENV};
use trialogue_cli::server::{self, ServeOptions};
use trialogue_cli::session::SessionOptions;
use trialogue_metrics::Format;
use trialogue_sim::NoiseConfig;

#[derive(Parser)]
#[command(
    name = "trialogue",
    version,
    about = "Run, score and serve multi-party robot conversations"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Clone, Copy, ValueEnum)]
enum FormatArg {
    Structured,
    Tabular,
}

impl From<FormatArg> for Format {
    fn from(f: FormatArg) -> Self {
        match f {
            FormatArg::Structured => Format::Structured,
            FormatArg::Tabular => Format::Tabular,
        }
    }
}

#[derive(Subcommand)]
enum Command {
    /// Play a scenario on the virtual clock and score it.
    Run {
        #[arg(long)]
        scenario: PathBuf,
        /// Overrides the scenario's noise seed.
        #[arg(long)]
        seed: Option<u64>,
        /// Report path; the trace and truth files are written beside it.
        #[arg(long)]
        report: Option<PathBuf>,
        #[arg(long)]
        trace: Option<PathBuf>,
        #[arg(long)]
        truth: Option<PathBuf>,
        #[arg(long, value_enum, default_value = "structured")]
        format: FormatArg,
    },
    /// Score an existing trace against its truth file.
    Score {
        #[arg(long)]
        trace: PathBuf,
        #[arg(long)]
        truth: PathBuf,
        #[arg(long)]
        report: Option<PathBuf>,
        #[arg(long, value_enum, default_value = "structured")]
        format: FormatArg,
    },
    /// Serve live sessions over WebSocket at /session.
    Serve {
        #[arg(long, default_value_t = 8080)]
        port: u16,
        #[arg(long, default_value = "127.0.0.1")]
        host: IpAddr,
        /// JSON noise settings for new sessions.
        #[arg(long)]
        noise: Option<PathBuf>,
        #[arg(long)]
        verbose: bool,
    },
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let report_dir = std::env::var_os(REPORT_DIR_ENV).map(PathBuf::from);
    let result = match cli.command {
        Command::Run {
            scenario,
            seed,
            report,
            trace,
            truth,
            format,
        } => cmd_run(
            &RunRequest {
                scenario,
                seed,
                report,
                trace,
                truth,
                format: format.into(),
            },
            report_dir.as_deref(),
        ),
        Command::Score {
            trace,
            truth,
            report,
            format,
        } => cmd_score(
            &ScoreRequest {
                trace,
                truth,
                report,
                format: format.into(),
            },
            report_dir.as_deref(),
        ),
        Command::Serve {
            port,
            host,
            noise,
            verbose,
        } => serve(SocketAddr::new(host, port), noise, verbose),
    };
    match result {
        Ok(out) => {
            if let Some(text) = out.stdout {
                print!("{text}");
            }
            for path in out.written {
                eprintln!("wrote {}", path.display());
            }
            ExitCode::SUCCESS
        }
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code())
        }
    }
}

fn serve(addr: SocketAddr, noise: Option<PathBuf>, verbose: bool) -> Result<Output, CliError> {
    let level = if verbose {
        tracing::Level::DEBUG
    } else {
        tracing::Level::INFO
    };
    tracing_subscriber::fmt()
        .with_max_level(level)
        .with_writer(std::io::stderr)
        .init();
    let mut opts = ServeOptions::default();
    if let Some(path) = noise {
        let text = std::fs::read_to_string(&path).map_err(|source| CliError::Read {
            path: path.clone(),
            source,
        })?;
        let noise: NoiseConfig = serde_json::from_str(&text).map_err(|source| CliError::Parse { path, source })?;
        opts.session = SessionOptions {
            noise,
            ..SessionOptions::default()
        };
    }
    let rt = tokio::runtime::Runtime::new().map_err(CliError::Serve)?;
    rt.block_on(async {
        let listener = server::bind(addr).await.map_err(CliError::Serve)?;
        tracing::info!(%addr, "listening");
        server::serve(listener, opts).await.map_err(CliError::Serve)
    })?;
    Ok(Output::default())
}
