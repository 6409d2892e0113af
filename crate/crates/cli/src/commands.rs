//! Offline commands: run a scenario, score a trace.

use std::fs;
use std::io;
use std::path::{Path, PathBuf};

use thiserror::Error;
use trialogue_metrics::{AlignError, Format, MetricsReport};
use trialogue_sim::{load_scenario_file, run_with_seed, ScenarioError, Trace, TraceError, TruthFile};

/// Relative output paths resolve against this directory when it is set.
pub const REPORT_DIR_ENV: &str = "TRIALOGUE_REPORT_DIR";

pub mod exit {
    pub const INPUT: u8 = 2;
    pub const COVERAGE: u8 = 3;
    pub const WRITE: u8 = 4;
    pub const SERVE: u8 = 5;
}

#[derive(Debug, Error)]
pub enum CliError {
    #[error("{}: {source}", path.display())]
    Scenario {
        path: PathBuf,
        #[source]
        source: ScenarioError,
    },
    #[error("{}: {source}", path.display())]
    Read {
        path: PathBuf,
        #[source]
        source: io::Error,
    },
    #[error("{}: {source}", path.display())]
    Trace {
        path: PathBuf,
        #[source]
        source: TraceError,
    },
    #[error("{}: {source}", path.display())]
    Parse {
        path: PathBuf,
        #[source]
        source: serde_json::Error,
    },
    #[error(transparent)]
    Align(#[from] AlignError),
    #[error("cannot write {}: {source}", path.display())]
    Write {
        path: PathBuf,
        #[source]
        source: io::Error,
    },
    #[error("cannot serve: {0}")]
    Serve(#[source] io::Error),
}

impl CliError {
    pub fn exit_code(&self) -> u8 {
        match self {
            CliError::Align(AlignError::CoverageGap(_)) => exit::COVERAGE,
            CliError::Write { .. } => exit::WRITE,
            CliError::Serve(_) => exit::SERVE,
            _ => exit::INPUT,
        }
    }
}

#[derive(Debug, Clone)]
pub struct RunRequest {
    pub scenario: PathBuf,
    pub seed: Option<u64>,
    pub report: Option<PathBuf>,
    pub trace: Option<PathBuf>,
    pub truth: Option<PathBuf>,
    pub format: Format,
}

#[derive(Debug, Clone)]
pub struct ScoreRequest {
    pub trace: PathBuf,
    pub truth: PathBuf,
    pub report: Option<PathBuf>,
    pub format: Format,
}

/// What a command produced: files written, plus a report for stdout when
/// no report path was given.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct Output {
    pub written: Vec<PathBuf>,
    pub stdout: Option<String>,
}

fn resolve(path: &Path, report_dir: Option<&Path>) -> PathBuf {
    match report_dir {
        Some(dir) if path.is_relative() => dir.join(path),
        _ => path.to_path_buf(),
    }
}

fn write(path: &Path, text: &str, out: &mut Output) -> Result<(), CliError> {
    let fail = |source| CliError::Write {
        path: path.to_path_buf(),
        source,
    };
    if let Some(parent) = path.parent().filter(|p| !p.as_os_str().is_empty()) {
        fs::create_dir_all(parent).map_err(fail)?;
    }
    fs::write(path, text).map_err(fail)?;
    out.written.push(path.to_path_buf());
    Ok(())
}

fn sibling(report: &Path, suffix: &str) -> PathBuf {
    let stem = report
        .file_stem()
        .map_or_else(|| "report".into(), |s| s.to_string_lossy().into_owned());
    report.with_file_name(format!("{stem}{suffix}"))
}

/// Runs a scenario and writes its trace, truth file and report. Without a
/// report path the trace and truth land in the report directory (or the
/// working directory) under the scenario id, and the report goes to stdout.
pub fn cmd_run(req: &RunRequest, report_dir: Option<&Path>) -> Result<Output, CliError> {
    let script = load_scenario_file(&req.scenario).map_err(|source| CliError::Scenario {
        path: req.scenario.clone(),
        source,
    })?;
    let seed = req.seed.unwrap_or(script.noise.seed);
    let run = run_with_seed(&script, seed);
    let report = MetricsReport::build(&run.trace, &run.truth)?;

    let report_path = req.report.as_deref().map(|p| resolve(p, report_dir));
    let default_base = resolve(Path::new(&script.id), report_dir);
    let base = report_path.clone().unwrap_or(default_base);
    let trace_path = req
        .trace
        .as_deref()
        .map_or_else(|| sibling(&base, ".trace.jsonl"), |p| resolve(p, report_dir));
    let truth_path = req
        .truth
        .as_deref()
        .map_or_else(|| sibling(&base, ".truth.json"), |p| resolve(p, report_dir));

    let mut out = Output::default();
    write(&trace_path, &run.trace.to_jsonl(), &mut out)?;
    write(&truth_path, &run.truth.to_json(), &mut out)?;
    let rendered = report.render(req.format);
    match &report_path {
        Some(p) => write(p, &rendered, &mut out)?,
        None => out.stdout = Some(rendered),
    }
    Ok(out)
}

pub fn cmd_score(req: &ScoreRequest, report_dir: Option<&Path>) -> Result<Output, CliError> {
    let read = |path: &Path| {
        fs::read_to_string(path).map_err(|source| CliError::Read {
            path: path.to_path_buf(),
            source,
        })
    };
    let trace = Trace::from_jsonl(&read(&req.trace)?).map_err(|source| CliError::Trace {
        path: req.trace.clone(),
        source,
    })?;
    let truth = TruthFile::from_json(&read(&req.truth)?).map_err(|source| CliError::Parse {
        path: req.truth.clone(),
        source,
    })?;
    let report = MetricsReport::build(&trace, &truth)?;
    let rendered = report.render(req.format);
    let mut out = Output::default();
    match &req.report {
        Some(p) => write(&resolve(p, report_dir), &rendered, &mut out)?,
        None => out.stdout = Some(rendered),
    }
    Ok(out)
}
