//! Batch scenario runner behind the `cavfb` binary.
//!
//! A run reads a TOML config, validates it, dispatches to the numerical
//! modules and writes a CSV table. With `--out results.csv` the effective
//! config and a JSON metadata block land next to it as
//! `results.csv.config.toml` and `results.csv.meta.json`.

mod config;
mod scenarios;
mod table;

use std::ffi::OsString;
use std::fs;
use std::io::{self, Write};
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Parser, Subcommand};

pub use config::{
    parse_config, ConfigError, InitialState, RawConfig, RunConfig, Scenario, StirapSettings,
    TrajSettings, MAX_SEED,
};
pub use scenarios::{run, RunOutput};
pub use table::ResultTable;

pub const EXIT_OK: u8 = 0;
pub const EXIT_IO: u8 = 1;
pub const EXIT_CONFIG: u8 = 2;
pub const EXIT_NUMERICAL: u8 = 3;

#[derive(Debug, Parser)]
#[command(name = "cavfb", version, about = "Cavity feedback simulations")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Master-equation evolution of one mode.
    Evolve(RunArgs),
    /// Quantum-jump trajectories averaged into a density matrix.
    Trajectories(RunArgs),
    /// Minimum and state fidelity of a two-mode qubit over time.
    QubitFidelity(RunArgs),
    /// Best-protected qubit photon numbers over time.
    QubitOptimal(RunArgs),
    /// Adiabatic transfer through a three-level atom.
    Stirap(RunArgs),
    /// Master-equation evolution over a list of efficiencies.
    Sweep(RunArgs),
}

impl Command {
    fn split(&self) -> (Scenario, &RunArgs) {
        match self {
            Command::Evolve(a) => (Scenario::Evolve, a),
            Command::Trajectories(a) => (Scenario::Trajectories, a),
            Command::QubitFidelity(a) => (Scenario::QubitFidelity, a),
            Command::QubitOptimal(a) => (Scenario::QubitOptimal, a),
            Command::Stirap(a) => (Scenario::Stirap, a),
            Command::Sweep(a) => (Scenario::Sweep, a),
        }
    }
}

#[derive(Debug, clap::Args)]
pub struct RunArgs {
    /// TOML run configuration.
    #[arg(long, value_name = "PATH")]
    pub config: PathBuf,
    /// Result CSV; overrides `out` in the config. Stdout if neither is set.
    #[arg(long, value_name = "PATH")]
    pub out: Option<PathBuf>,
    /// Overrides `traj.master_seed`.
    #[arg(long, value_parser = clap::value_parser!(u64).range(..=MAX_SEED))]
    pub seed: Option<u64>,
    /// Worker threads (results do not depend on it).
    #[arg(long, value_parser = clap::value_parser!(u16).range(1..))]
    pub threads: Option<u16>,
    /// Print the effective config and exit.
    #[arg(long)]
    pub dry_run: bool,
}

#[derive(Debug, thiserror::Error)]
pub enum CliError {
    #[error(transparent)]
    Config(#[from] ConfigError),
    #[error(transparent)]
    Run(#[from] crate::Error),
    #[error("{path}: {source}")]
    Io { path: PathBuf, source: io::Error },
}

impl CliError {
    pub fn exit_code(&self) -> u8 {
        match self {
            CliError::Config(_) => EXIT_CONFIG,
            CliError::Run(e) if e.is_numerical() => EXIT_NUMERICAL,
            CliError::Run(_) => EXIT_CONFIG,
            CliError::Io { .. } => EXIT_IO,
        }
    }

    fn io(path: &Path, source: io::Error) -> Self {
        CliError::Io {
            path: path.to_path_buf(),
            source,
        }
    }
}

/// Reads and validates the config for a subcommand, applying flag overrides.
pub fn load_config(scenario: Scenario, args: &RunArgs) -> Result<RunConfig, CliError> {
    let text = fs::read_to_string(&args.config).map_err(|e| CliError::io(&args.config, e))?;
    let mut cfg = parse_config(&text, Some(scenario))?;
    if cfg.scenario != scenario {
        return Err(ConfigError::field(
            "scenario",
            format!(
                "config says `{}` but the subcommand is `{scenario}`",
                cfg.scenario
            ),
        )
        .into());
    }
    if let Some(seed) = args.seed {
        cfg.traj.master_seed = seed;
    }
    if let Some(out) = &args.out {
        cfg.out = Some(out.clone());
    }
    Ok(cfg)
}

/// Appends `suffix` to the full file name: `a.csv` → `a.csv.meta.json`.
pub fn sidecar(out: &Path, suffix: &str) -> PathBuf {
    let mut name = out.as_os_str().to_owned();
    name.push(suffix);
    PathBuf::from(name)
}

/// Writes the table, the effective config and the metadata. Without an output
/// path the table goes to stdout and the config to stderr.
pub fn write_outputs(cfg: &RunConfig, output: &RunOutput) -> Result<(), CliError> {
    let meta = serde_json::to_string_pretty(&output.metadata).expect("metadata serializes");
    match &cfg.out {
        Some(out) => {
            let file = fs::File::create(out).map_err(|e| CliError::io(out, e))?;
            output
                .table
                .write_csv(io::BufWriter::new(file))
                .map_err(|e| CliError::io(out, e.into()))?;
            let cfg_path = sidecar(out, ".config.toml");
            fs::write(&cfg_path, cfg.echo()).map_err(|e| CliError::io(&cfg_path, e))?;
            let meta_path = sidecar(out, ".meta.json");
            fs::write(&meta_path, meta + "\n").map_err(|e| CliError::io(&meta_path, e))?;
        }
        None => {
            let stdout = Path::new("<stdout>");
            output
                .table
                .write_csv(io::stdout().lock())
                .map_err(|e| CliError::io(stdout, e.into()))?;
            let mut err = io::stderr().lock();
            writeln!(err, "# effective config\n{}# metadata\n{meta}", cfg.echo())
                .map_err(|e| CliError::io(Path::new("<stderr>"), e))?;
        }
    }
    Ok(())
}

fn execute(cli: &Cli) -> Result<(), CliError> {
    let (scenario, args) = cli.command.split();
    let cfg = load_config(scenario, args)?;
    if args.dry_run {
        print!("{}", cfg.echo());
        return Ok(());
    }
    let output = match args.threads {
        Some(n) => {
            let pool = rayon::ThreadPoolBuilder::new()
                .num_threads(n as usize)
                .build()
                .map_err(|e| crate::Error::InvalidArgument(e.to_string()))?;
            pool.install(|| run(&cfg))?
        }
        None => run(&cfg)?,
    };
    if let Some(report) = output.metadata.get("adiabaticity") {
        if report["pass"] == false {
            eprintln!("warning: adiabaticity conditions not met: {report}");
        }
    }
    write_outputs(&cfg, &output)
}

/// Entry point for the binary.
pub fn main_with_args<I, T>(args: I) -> ExitCode
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return ExitCode::from(if e.use_stderr() { EXIT_CONFIG } else { EXIT_OK });
        }
    };
    match execute(&cli) {
        Ok(()) => ExitCode::from(EXIT_OK),
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code())
        }
    }
}
