//! Command-line pipeline: solve → fit → closed form → oracle → compare,
//! with deterministic CSV outputs and a reproducibility manifest.

use clap::{Args, Parser, Subcommand, ValueEnum};
use std::collections::BTreeMap;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use raman_nli::engine::{total_nli, MlFactors};
use raman_nli::fitter::fit_link;
use raman_nli::oracle::{compare, nli_numeric, OracleMode};
use raman_nli::output::{self, Artifact, RunManifest};
use raman_nli::solver::propagate_link;
use raman_nli::{config, Error, LinkSpec};

/// Environment variable providing the default output directory.
const OUT_DIR_ENV: &str = "RAMAN_NLI_OUT_DIR";

#[derive(Parser)]
#[command(name = "raman-nli", version, about = "Per-channel NLI estimation for Raman-amplified WDM links")]
struct Cli {
    #[command(subcommand)]
    cmd: Cmd,
}

#[derive(Subcommand)]
enum Cmd {
    /// Solve the power-evolution equations and dump per-span profiles.
    Solve(RunArgs),
    /// Fit the two-segment loss model; dump fit parameters and overlays.
    Fit(RunArgs),
    /// Closed-form NLI report per channel.
    Nli(RunArgs),
    /// Brute-force GN-integral reference per channel.
    Oracle(RunArgs),
    /// Closed-form vs oracle delta table.
    Compare(RunArgs),
    /// Everything above in one run.
    All(RunArgs),
}

#[derive(Clone, Copy, ValueEnum)]
enum OracleModeArg {
    Exact,
    Split,
}

#[derive(Clone, Copy, ValueEnum)]
enum FormatArg {
    Csv,
    Json,
}

#[derive(Args)]
struct RunArgs {
    /// Link configuration file (TOML).
    #[arg(long)]
    config: PathBuf,
    /// Output directory (default: $RAMAN_NLI_OUT_DIR or ./out).
    #[arg(long)]
    out_dir: Option<PathBuf>,
    /// Override the solver step, m.
    #[arg(long)]
    step_m: Option<f64>,
    /// Override the oracle island panels per axis.
    #[arg(long)]
    island_grid: Option<usize>,
    /// CSV of per-(span, channel) rho factors: span,channel_thz,rho.
    #[arg(long)]
    rho_file: Option<PathBuf>,
    /// Override the oracle squaring mode.
    #[arg(long, value_enum)]
    oracle_mode: Option<OracleModeArg>,
    /// Reserved; accepted and recorded in the manifest only.
    #[arg(long)]
    seed: Option<u64>,
    /// csv writes the tables; json additionally mirrors them into run.json.
    #[arg(long, value_enum, default_value = "csv")]
    format: FormatArg,
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let (name, args) = match &cli.cmd {
        Cmd::Solve(a) => ("solve", a),
        Cmd::Fit(a) => ("fit", a),
        Cmd::Nli(a) => ("nli", a),
        Cmd::Oracle(a) => ("oracle", a),
        Cmd::Compare(a) => ("compare", a),
        Cmd::All(a) => ("all", a),
    };
    match run(name, args) {
        Ok(()) => ExitCode::SUCCESS,
        Err(err) => {
            let (kind, code) = classify(&err);
            eprintln!(
                "{}",
                serde_json::json!({ "error": { "kind": kind, "message": err.to_string() } })
            );
            ExitCode::from(code)
        }
    }
}

#[derive(Debug, thiserror::Error)]
enum CliError {
    #[error(transparent)]
    Core(#[from] Error),
    #[error("io error: {0}")]
    Io(String),
    #[error("rho file: {0}")]
    RhoFile(String),
}

impl From<raman_nli::link::ConfigError> for CliError {
    fn from(e: raman_nli::link::ConfigError) -> Self {
        CliError::Core(Error::Config(e))
    }
}
impl From<raman_nli::solver::SolverError> for CliError {
    fn from(e: raman_nli::solver::SolverError) -> Self {
        CliError::Core(Error::Solver(e))
    }
}
impl From<raman_nli::fitter::FitError> for CliError {
    fn from(e: raman_nli::fitter::FitError) -> Self {
        CliError::Core(Error::Fit(e))
    }
}
impl From<raman_nli::engine::EngineError> for CliError {
    fn from(e: raman_nli::engine::EngineError) -> Self {
        CliError::Core(Error::Engine(e))
    }
}
impl From<raman_nli::oracle::QuadratureError> for CliError {
    fn from(e: raman_nli::oracle::QuadratureError) -> Self {
        CliError::Core(Error::Quadrature(e))
    }
}

/// Exit codes: 2 config, 3 solver, 4 quadrature, 1 anything else.
fn classify(err: &CliError) -> (&'static str, u8) {
    match err {
        CliError::Core(Error::Config(_)) => ("config", 2),
        CliError::Core(Error::Solver(_)) => ("solver", 3),
        CliError::Core(Error::Quadrature(_)) => ("quadrature", 4),
        CliError::Core(Error::Fit(_)) => ("fit", 1),
        CliError::Core(Error::Engine(_)) => ("engine", 1),
        CliError::RhoFile(_) => ("config", 2),
        CliError::Io(_) => ("io", 1),
    }
}

fn run(subcommand: &str, args: &RunArgs) -> Result<(), CliError> {
    let config_text = std::fs::read_to_string(&args.config)
        .map_err(|e| CliError::Io(format!("{}: {e}", args.config.display())))?;
    let mut link = config::load_link_from_str(&config_text)?;
    let mut overrides = BTreeMap::new();
    if let Some(step) = args.step_m {
        link.solver.step = step;
        link = link.normalize()?;
        overrides.insert("step_m".into(), step.to_string());
    }
    if let Some(panels) = args.island_grid {
        link.oracle.island_panels = panels;
        link = link.normalize()?;
        overrides.insert("island_grid".into(), panels.to_string());
    }
    if let Some(mode) = args.oracle_mode {
        link.oracle.mode = match mode {
            OracleModeArg::Exact => OracleMode::Exact,
            OracleModeArg::Split => OracleMode::Split,
        };
        overrides.insert(
            "oracle_mode".into(),
            match mode {
                OracleModeArg::Exact => "exact".into(),
                OracleModeArg::Split => "split".into(),
            },
        );
    }
    if let Some(seed) = args.seed {
        overrides.insert("seed".into(), seed.to_string());
    }
    if let Some(p) = &args.rho_file {
        overrides.insert("rho_file".into(), p.display().to_string());
    }
    if matches!(args.format, FormatArg::Json) {
        overrides.insert("format".into(), "json".into());
    }

    let out_dir = args
        .out_dir
        .clone()
        .or_else(|| std::env::var_os(OUT_DIR_ENV).map(PathBuf::from))
        .unwrap_or_else(|| PathBuf::from("out"));
    if let Some(p) = &args.out_dir {
        overrides.insert("out_dir".into(), p.display().to_string());
    }
    std::fs::create_dir_all(&out_dir)
        .map_err(|e| CliError::Io(format!("{}: {e}", out_dir.display())))?;

    for w in &link.warnings {
        eprintln!("warning: {w}");
    }

    let ml = load_ml_factors(&link, args.rho_file.as_deref())?;
    let mut manifest = RunManifest::new(
        subcommand,
        &args.config.display().to_string(),
        &config_text,
        overrides,
    );
    let mut artifacts: Vec<Artifact> = Vec::new();
    let mut mirror = serde_json::Map::new();

    let need_solve = true;
    let need_fits = matches!(subcommand, "fit" | "nli" | "oracle" | "compare" | "all");
    let need_nli = matches!(subcommand, "nli" | "compare" | "all");
    let need_oracle = matches!(subcommand, "oracle" | "compare" | "all");

    let solution = if need_solve {
        Some(propagate_link(&link)?)
    } else {
        None
    };
    let solution = solution.expect("always solved");

    if matches!(subcommand, "solve" | "all") {
        for ns in 0..link.spans.len() {
            artifacts.push(output::profile_csv(&solution, ns));
        }
        mirror.insert("solution".into(), serde_json::to_value(&solution).unwrap());
    }

    let fits = if need_fits {
        Some(fit_link(&link, &solution)?)
    } else {
        None
    };

    if matches!(subcommand, "fit" | "all") {
        let fits = fits.as_ref().unwrap();
        artifacts.push(output::fits_csv(&link, fits));
        for ns in 0..link.spans.len() {
            artifacts.push(output::overlay_csv(&link, &solution, fits, ns));
        }
        mirror.insert("fits".into(), serde_json::to_value(fits).unwrap());
    }

    let nli_report = if need_nli {
        let report = total_nli(&link, &solution, fits.as_ref().unwrap(), &ml)?;
        if matches!(subcommand, "nli" | "all") {
            artifacts.push(output::nli_csv(&report));
            artifacts.push(output::nli_breakdown_csv(&link, &report));
        }
        mirror.insert("nli".into(), serde_json::to_value(&report).unwrap());
        Some(report)
    } else {
        None
    };

    let oracle_report = if need_oracle {
        let report = nli_numeric(&link, &solution, fits.as_deref(), &ml)?;
        if matches!(subcommand, "oracle" | "all") {
            artifacts.push(output::oracle_csv(&report));
        }
        mirror.insert("oracle".into(), serde_json::to_value(&report).unwrap());
        Some(report)
    } else {
        None
    };

    if matches!(subcommand, "compare" | "all") {
        let table = compare(nli_report.as_ref().unwrap(), oracle_report.as_ref().unwrap());
        artifacts.push(output::compare_csv(&table));
        mirror.insert("compare".into(), serde_json::to_value(&table).unwrap());
    }

    if matches!(args.format, FormatArg::Json) {
        let mut doc = serde_json::Map::new();
        doc.insert("link".into(), serde_json::to_value(&link).unwrap());
        doc.extend(mirror);
        let mut text = serde_json::to_string_pretty(&serde_json::Value::Object(doc)).unwrap();
        text.push('\n');
        artifacts.push(Artifact {
            name: "run.json".into(),
            content: text,
        });
    }

    for artifact in &artifacts {
        manifest.record(artifact);
        let path = out_dir.join(&artifact.name);
        std::fs::write(&path, &artifact.content)
            .map_err(|e| CliError::Io(format!("{}: {e}", path.display())))?;
    }
    let manifest_path = out_dir.join("manifest.json");
    std::fs::write(&manifest_path, manifest.to_json())
        .map_err(|e| CliError::Io(format!("{}: {e}", manifest_path.display())))?;
    Ok(())
}

/// Parse the rho override CSV (`span,channel_thz,rho`, 1-based span).
fn load_ml_factors(link: &LinkSpec, path: Option<&Path>) -> Result<MlFactors, CliError> {
    let mut ml = MlFactors::uniform(link.spans.len(), link.channels.len(), link.engine.rho)?;
    let Some(path) = path else { return Ok(ml) };
    let text = std::fs::read_to_string(path)
        .map_err(|e| CliError::Io(format!("{}: {e}", path.display())))?;
    for (lineno, line) in text.lines().enumerate() {
        let line = line.trim();
        if line.is_empty() || (lineno == 0 && line.starts_with("span")) {
            continue;
        }
        let parts: Vec<&str> = line.split(',').map(str::trim).collect();
        if parts.len() != 3 {
            return Err(CliError::RhoFile(format!(
                "line {}: expected span,channel_thz,rho",
                lineno + 1
            )));
        }
        let span: usize = parts[0]
            .parse()
            .map_err(|_| CliError::RhoFile(format!("line {}: bad span index", lineno + 1)))?;
        let thz: f64 = parts[1]
            .parse()
            .map_err(|_| CliError::RhoFile(format!("line {}: bad channel_thz", lineno + 1)))?;
        let rho: f64 = parts[2]
            .parse()
            .map_err(|_| CliError::RhoFile(format!("line {}: bad rho", lineno + 1)))?;
        if span == 0 || span > link.spans.len() {
            return Err(CliError::RhoFile(format!(
                "line {}: span {} out of range 1..={}",
                lineno + 1,
                span,
                link.spans.len()
            )));
        }
        if rho <= 0.0 {
            return Err(CliError::RhoFile(format!(
                "line {}: rho must be positive",
                lineno + 1
            )));
        }
        let f_hz = thz * 1e12;
        let ch = link
            .channels
            .iter()
            .position(|c| (c.center_frequency - f_hz).abs() < 0.5e9)
            .ok_or_else(|| {
                CliError::RhoFile(format!(
                    "line {}: no channel within 0.5 GHz of {thz} THz",
                    lineno + 1
                ))
            })?;
        ml.set(span - 1, ch, rho);
    }
    Ok(ml)
}
