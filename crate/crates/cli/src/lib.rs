//! Command-line front end: argument grammar, config merging, workers and exit codes.

use std::collections::BTreeMap;
use std::ffi::OsString;
use std::fmt;
use std::path::PathBuf;

use clap::{Args, Parser, Subcommand};
use gnlab_core::GnError;

pub mod commands;
pub mod config;
pub mod output;
pub mod selftest;

use config::{parse_config, ConfigError, Params};

#[derive(Debug, Parser)]
#[command(name = "gnlab", version, about = "Spectral and time-domain laboratory for Gross-Neveu solitary waves")]
pub struct Cli {
    /// Directory that receives every artifact.
    #[arg(long, global = true, default_value = "out")]
    pub out_dir: PathBuf,
    /// Flat `key = value` file; command-line flags override it.
    #[arg(long, global = true)]
    pub config: Option<PathBuf>,
    /// Extra override, repeatable.
    #[arg(long = "set", global = true, value_name = "KEY=VALUE")]
    pub set: Vec<String>,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Solitary wave profile and charge.
    Wave(WaveArgs),
    #[command(subcommand)]
    Evans(EvansCommand),
    #[command(subcommand)]
    Spectrum(SpectrumCommand),
    #[command(subcommand)]
    Green(GreenCommand),
    #[command(subcommand)]
    Evolve(EvolveCommand),
    /// Invariant suite at k=2, omega=0.3.
    Selftest(SelftestArgs),
}

#[derive(Debug, Subcommand)]
pub enum EvansCommand {
    Scan(ScanArgs),
    Locate(LocateArgs),
    Track(TrackArgs),
}

#[derive(Debug, Subcommand)]
pub enum SpectrumCommand {
    Sweep(SweepArgs),
}

#[derive(Debug, Subcommand)]
pub enum GreenCommand {
    Check(GreenArgs),
}

#[derive(Debug, Subcommand)]
pub enum EvolveCommand {
    Run(EvolveArgs),
    Boundary(BoundaryArgs),
}

#[derive(Debug, Args, Default)]
pub struct WaveArgs {
    #[arg(long)]
    pub k: Option<String>,
    #[arg(long)]
    pub omega: Option<String>,
    #[arg(long)]
    pub x_max: Option<String>,
    #[arg(long)]
    pub n: Option<String>,
}

#[derive(Debug, Args, Default)]
pub struct ScanArgs {
    #[arg(long)]
    pub k: Option<String>,
    #[arg(long)]
    pub omega: Option<String>,
    /// `imag` or `real`.
    #[arg(long)]
    pub axis: Option<String>,
    #[arg(long)]
    pub from: Option<String>,
    #[arg(long)]
    pub to: Option<String>,
    #[arg(long)]
    pub n: Option<String>,
    /// `X`, `Xperp` or `full`.
    #[arg(long)]
    pub parity: Option<String>,
}

#[derive(Debug, Args, Default)]
pub struct LocateArgs {
    #[arg(long)]
    pub k: Option<String>,
    #[arg(long)]
    pub omega: Option<String>,
    #[arg(long)]
    pub re: Option<String>,
    #[arg(long)]
    pub im: Option<String>,
    #[arg(long)]
    pub parity: Option<String>,
    #[arg(long)]
    pub halfwidth: Option<String>,
}

#[derive(Debug, Args, Default)]
pub struct TrackArgs {
    #[arg(long)]
    pub k: Option<String>,
    #[arg(long)]
    pub from: Option<String>,
    #[arg(long)]
    pub to: Option<String>,
    #[arg(long)]
    pub step: Option<String>,
    #[arg(long)]
    pub seed_re: Option<String>,
    #[arg(long)]
    pub seed_im: Option<String>,
    #[arg(long)]
    pub parity: Option<String>,
    #[arg(long)]
    pub n: Option<String>,
}

#[derive(Debug, Args, Default)]
pub struct SweepArgs {
    #[arg(long)]
    pub k: Option<String>,
    /// Comma-separated frequencies; overrides the range keys.
    #[arg(long)]
    pub omegas: Option<String>,
    #[arg(long)]
    pub omega_from: Option<String>,
    #[arg(long)]
    pub omega_to: Option<String>,
    #[arg(long)]
    pub omega_step: Option<String>,
    #[arg(long)]
    pub parities: Option<String>,
    #[arg(long)]
    pub n: Option<String>,
}

#[derive(Debug, Args, Default)]
pub struct GreenArgs {
    #[arg(long)]
    pub k: Option<String>,
    #[arg(long)]
    pub omega: Option<String>,
    #[arg(long)]
    pub re: Option<String>,
    #[arg(long)]
    pub im: Option<String>,
    /// `minus` or `plus`.
    #[arg(long)]
    pub side: Option<String>,
}

#[derive(Debug, Args, Default)]
pub struct EvolveArgs {
    #[arg(long)]
    pub k: Option<String>,
    #[arg(long)]
    pub omega0: Option<String>,
    #[arg(long)]
    pub eps: Option<String>,
    #[arg(long)]
    pub l: Option<String>,
    #[arg(long)]
    pub n: Option<String>,
    #[arg(long)]
    pub dt: Option<String>,
    #[arg(long)]
    pub t_end: Option<String>,
    #[arg(long)]
    pub extract_every: Option<String>,
    #[arg(long)]
    pub damping: Option<String>,
}

#[derive(Debug, Args, Default)]
pub struct BoundaryArgs {
    #[command(flatten)]
    pub base: EvolveArgs,
    /// Comma-separated box lengths.
    #[arg(long)]
    pub ls: Option<String>,
}

#[derive(Debug, Args, Default)]
pub struct SelftestArgs {
    /// Constant added to the potential, corrupting its decay.
    #[arg(long)]
    pub fault: Option<String>,
}

#[derive(Debug)]
pub enum CliError {
    Usage(String),
    Config(ConfigError),
    Numerical(GnError),
    Io(std::io::Error),
    Failed(String),
}

impl fmt::Display for CliError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            CliError::Usage(m) => write!(f, "{m}"),
            CliError::Config(e) => write!(f, "invalid config: {e}"),
            CliError::Numerical(e) => write!(f, "numerical failure: {e}"),
            CliError::Io(e) => write!(f, "i/o error: {e}"),
            CliError::Failed(m) => write!(f, "{m}"),
        }
    }
}

impl From<ConfigError> for CliError {
    fn from(e: ConfigError) -> Self {
        CliError::Config(e)
    }
}

impl From<GnError> for CliError {
    fn from(e: GnError) -> Self {
        match e {
            GnError::InvalidParameter(m) => CliError::Usage(format!("invalid parameter: {m}")),
            e => CliError::Numerical(e),
        }
    }
}

impl From<std::io::Error> for CliError {
    fn from(e: std::io::Error) -> Self {
        CliError::Io(e)
    }
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Usage(_) | CliError::Config(_) | CliError::Io(_) => 2,
            CliError::Numerical(_) | CliError::Failed(_) => 3,
        }
    }
}

fn put(map: &mut BTreeMap<String, String>, key: &str, v: &Option<String>) {
    if let Some(v) = v {
        map.insert(key.to_string(), v.clone());
    }
}

fn flag_overrides(cmd: &Command) -> BTreeMap<String, String> {
    let mut m = BTreeMap::new();
    let evolve = |m: &mut BTreeMap<String, String>, a: &EvolveArgs| {
        for (k, v) in [
            ("k", &a.k),
            ("omega0", &a.omega0),
            ("eps", &a.eps),
            ("l", &a.l),
            ("n", &a.n),
            ("dt", &a.dt),
            ("t_end", &a.t_end),
            ("extract_every", &a.extract_every),
            ("damping", &a.damping),
        ] {
            put(m, k, v);
        }
    };
    match cmd {
        Command::Wave(a) => {
            for (k, v) in [("k", &a.k), ("omega", &a.omega), ("x_max", &a.x_max), ("n", &a.n)] {
                put(&mut m, k, v);
            }
        }
        Command::Evans(EvansCommand::Scan(a)) => {
            for (k, v) in [("k", &a.k), ("omega", &a.omega), ("axis", &a.axis), ("from", &a.from), ("to", &a.to), ("n", &a.n), ("parity", &a.parity)] {
                put(&mut m, k, v);
            }
        }
        Command::Evans(EvansCommand::Locate(a)) => {
            for (k, v) in [("k", &a.k), ("omega", &a.omega), ("re", &a.re), ("im", &a.im), ("parity", &a.parity), ("halfwidth", &a.halfwidth)] {
                put(&mut m, k, v);
            }
        }
        Command::Evans(EvansCommand::Track(a)) => {
            for (k, v) in [
                ("k", &a.k),
                ("from", &a.from),
                ("to", &a.to),
                ("step", &a.step),
                ("seed_re", &a.seed_re),
                ("seed_im", &a.seed_im),
                ("parity", &a.parity),
                ("n", &a.n),
            ] {
                put(&mut m, k, v);
            }
        }
        Command::Spectrum(SpectrumCommand::Sweep(a)) => {
            for (k, v) in [
                ("k", &a.k),
                ("omegas", &a.omegas),
                ("omega_from", &a.omega_from),
                ("omega_to", &a.omega_to),
                ("omega_step", &a.omega_step),
                ("parities", &a.parities),
                ("n", &a.n),
            ] {
                put(&mut m, k, v);
            }
        }
        Command::Green(GreenCommand::Check(a)) => {
            for (k, v) in [("k", &a.k), ("omega", &a.omega), ("re", &a.re), ("im", &a.im), ("side", &a.side)] {
                put(&mut m, k, v);
            }
        }
        Command::Evolve(EvolveCommand::Run(a)) => evolve(&mut m, a),
        Command::Evolve(EvolveCommand::Boundary(a)) => {
            evolve(&mut m, &a.base);
            put(&mut m, "ls", &a.ls);
        }
        Command::Selftest(a) => put(&mut m, "fault", &a.fault),
    }
    m
}

/// Config file, then `--set` pairs, then typed flags; later sources win.
pub fn resolve_params(cli: &Cli) -> Result<Params, CliError> {
    let mut raw = match &cli.config {
        Some(p) => {
            let text = std::fs::read_to_string(p).map_err(|e| CliError::Usage(format!("cannot read {}: {e}", p.display())))?;
            parse_config(&text)?
        }
        None => BTreeMap::new(),
    };
    for s in &cli.set {
        let parsed = parse_config(s)?;
        if parsed.is_empty() {
            return Err(CliError::Usage(format!("--set expects KEY=VALUE, got `{s}`")));
        }
        raw.extend(parsed);
    }
    raw.extend(flag_overrides(&cli.command));
    Ok(Params::new(raw))
}

/// Worker count from `GNLAB_WORKERS`, else the machine default.
pub fn worker_count() -> Result<usize, CliError> {
    match std::env::var("GNLAB_WORKERS") {
        Ok(v) => v.trim().parse::<usize>().ok().filter(|n| *n > 0).ok_or_else(|| CliError::Usage(format!("GNLAB_WORKERS must be a positive integer, got `{v}`"))),
        Err(_) => Ok(std::thread::available_parallelism().map(|n| n.get()).unwrap_or(1)),
    }
}

/// Runs one invocation; returns the summary line.
pub fn execute(cli: &Cli) -> Result<String, CliError> {
    let mut params = resolve_params(cli)?;
    let pool = rayon::ThreadPoolBuilder::new().num_threads(worker_count()?).build().map_err(|e| CliError::Usage(e.to_string()))?;
    pool.install(|| commands::dispatch(&cli.command, &mut params, &cli.out_dir))
}

pub fn run_command<I, T>(argv: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(argv) {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { 2 } else { 0 };
            let _ = e.print();
            return code;
        }
    };
    match execute(&cli) {
        Ok(line) => {
            println!("{line}");
            0
        }
        Err(e) => {
            eprintln!("gnlab: {e}");
            e.exit_code()
        }
    }
}
