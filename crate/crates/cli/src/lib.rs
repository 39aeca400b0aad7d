//! The `v2i` command line: benchmarks, simulator runs and a demo transcript.
//!
//! Exit codes: 0 on success, 1 on a usage error, 2 on a runtime failure.

pub mod bench;
pub mod demo;

use std::ffi::OsString;
use std::fs::File;
use std::io::{self, Write};
use std::path::PathBuf;

use clap::error::ErrorKind;
use clap::{Args, Parser, Subcommand};
use v2i_signcrypt::group::{CurveId, NistP256, Secp256k1};
use v2i_signcrypt::sim::{run_scenario, Adversary, Scenario, SimReport};

/// Environment variable holding the default seed.
pub const SEED_ENV: &str = "V2I_SEED";

#[derive(Debug)]
pub enum Failure {
    Usage(String),
    Runtime(String),
}

impl Failure {
    pub fn exit_code(&self) -> i32 {
        match self {
            Failure::Usage(_) => 1,
            Failure::Runtime(_) => 2,
        }
    }
}

impl std::fmt::Display for Failure {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            Failure::Usage(m) => write!(f, "usage error: {m}"),
            Failure::Runtime(m) => write!(f, "error: {m}"),
        }
    }
}

impl From<v2i_signcrypt::Error> for Failure {
    fn from(e: v2i_signcrypt::Error) -> Self {
        Failure::Runtime(e.to_string())
    }
}

impl From<io::Error> for Failure {
    fn from(e: io::Error) -> Self {
        Failure::Runtime(e.to_string())
    }
}

#[derive(Debug, Parser)]
#[command(name = "v2i", version, about = "Aggregate signcryption benchmarks, simulator and demo")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Time protocol phases and write a CSV of timings and operation counts.
    Bench(BenchArgs),
    /// Run a simulated V2I scenario and print its report.
    Sim(SimArgs),
    /// Print one signcrypt, verify, decrypt and trace run.
    Demo(Common),
}

#[derive(Debug, Args)]
pub struct Common {
    /// RNG seed.
    #[arg(long, env = SEED_ENV, default_value_t = 0)]
    pub seed: u64,
    /// p256 or secp256k1.
    #[arg(long, default_value = "p256")]
    pub curve: CurveId,
    /// Output file; stdout when absent.
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct BenchArgs {
    #[arg(long, value_enum, default_value = "counts")]
    pub mode: bench::Mode,
    /// Comma-separated batch sizes, strictly ascending.
    #[arg(long, value_delimiter = ',', default_values_t = [1usize, 10, 100])]
    pub n: Vec<usize>,
    /// Timed repetitions per row, at least 3.
    #[arg(long, default_value_t = 5)]
    pub reps: usize,
    #[command(flatten)]
    pub common: Common,
}

#[derive(Debug, Args)]
pub struct SimArgs {
    /// Number of vehicles.
    #[arg(long, default_value_t = 20)]
    pub n: usize,
    /// Reports per vehicle.
    #[arg(long, default_value_t = 1)]
    pub reports: usize,
    /// Probability that the adversary flips a bit in a report.
    #[arg(long, default_value_t = 0.0)]
    pub tamper: f64,
    /// Probability that the adversary re-sends a report.
    #[arg(long, default_value_t = 0.0)]
    pub replay: f64,
    /// Batch window in simulated milliseconds.
    #[arg(long, default_value_t = 100)]
    pub window_ms: u64,
    #[arg(long, default_value_t = 100)]
    pub max_batch: usize,
    /// Producer threads.
    #[arg(long, default_value_t = 4)]
    pub producers: usize,
    #[command(flatten)]
    pub common: Common,
}

impl SimArgs {
    pub fn scenario(&self) -> Result<Scenario, Failure> {
        let adversary = match (self.tamper > 0.0, self.replay > 0.0) {
            (true, true) => return Err(Failure::Usage("--tamper and --replay are mutually exclusive".into())),
            (true, false) => Adversary::Tamper(self.tamper),
            (false, true) => Adversary::Replay(self.replay),
            (false, false) => Adversary::None,
        };
        let sc = Scenario {
            n_vehicles: self.n,
            reports_per_vehicle: self.reports,
            batch_window_ms: self.window_ms,
            max_batch: self.max_batch,
            adversary,
            seed: self.common.seed,
            producers: self.producers,
        };
        sc.validate().map_err(|e| Failure::Usage(e.to_string()))?;
        Ok(sc)
    }
}

/// Report text for `sim`, ending with the isolation summary.
pub fn sim_output(report: &SimReport) -> String {
    let ids = |v: &[_]| v.iter().map(ToString::to_string).collect::<Vec<String>>().join(",");
    let exact = report.isolated == report.tampered;
    let mut out = report.to_record();
    out.push_str(&format!(
        "isolation: injected=[{}] isolated=[{}] exact={exact}\n",
        ids(&report.tampered),
        ids(&report.isolated)
    ));
    out
}

fn emit(out: &Option<PathBuf>, text: &[u8]) -> Result<(), Failure> {
    match out {
        Some(path) => File::create(path)
            .and_then(|mut f| f.write_all(text))
            .map_err(|e| Failure::Runtime(format!("{}: {e}", path.display()))),
        None => Ok(io::stdout().write_all(text)?),
    }
}

pub fn execute(cli: Cli) -> Result<(), Failure> {
    match cli.command {
        Command::Bench(a) => {
            let cfg = bench::BenchConfig {
                n_values: a.n,
                reps: a.reps,
                mode: a.mode,
                seed: a.common.seed,
                curve: a.common.curve,
            };
            let rows = bench::run(&cfg)?;
            let mut buf = Vec::new();
            bench::write_csv(&rows, &mut buf)?;
            emit(&a.common.out, &buf)
        }
        Command::Sim(a) => {
            let sc = a.scenario()?;
            let report = match a.common.curve {
                CurveId::P256 => run_scenario::<NistP256>(&sc)?,
                CurveId::Secp256k1 => run_scenario::<Secp256k1>(&sc)?,
            };
            emit(&a.common.out, sim_output(&report).as_bytes())?;
            if report.isolated != report.tampered || report.plaintext_mismatches > 0 {
                return Err(Failure::Runtime("isolation did not match the injected tampering".into()));
            }
            Ok(())
        }
        Command::Demo(c) => emit(&c.out, demo::transcript(c.seed, c.curve)?.as_bytes()),
    }
}

/// Parses `args` (program name first), runs, and returns the exit code.
pub fn main_with<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return match e.kind() {
                ErrorKind::DisplayHelp | ErrorKind::DisplayVersion => 0,
                _ => 1,
            };
        }
    };
    match execute(cli) {
        Ok(()) => 0,
        Err(f) => {
            eprintln!("{f}");
            f.exit_code()
        }
    }
}
