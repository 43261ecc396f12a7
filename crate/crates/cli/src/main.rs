//! `kfree`: command-line front end.
//!
//! Exit codes: 0 on success, 1 on invalid input or usage, 2 when the request
//! falls outside the numerical regime of the method (for example `D < k`).

mod commands;
mod config;
mod output;

use std::collections::BTreeMap;
use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use serde_json::{json, Value};

use config::{parse_config, Resolver};
use output::{render, Format};

#[derive(Debug)]
pub enum CliError {
    Validation(String),
    Regime(String),
}

impl From<kfree::Error> for CliError {
    fn from(e: kfree::Error) -> Self {
        if e.is_regime() {
            CliError::Regime(e.to_string())
        } else {
            CliError::Validation(e.to_string())
        }
    }
}

impl std::fmt::Display for CliError {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            CliError::Validation(s) => write!(f, "invalid input: {s}"),
            CliError::Regime(s) => write!(f, "outside the numerical regime: {s}"),
        }
    }
}

#[derive(Parser, Debug)]
#[command(name = "kfree", version, about = "Free cumulants, Weingarten calculus and k-fold unitary channels")]
pub struct Cli {
    /// Write the result here instead of standard output.
    #[arg(long, global = true)]
    output: Option<PathBuf>,
    #[arg(long, global = true, value_enum)]
    format: Option<Format>,
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Worker threads; 0 lets the runtime choose.
    #[arg(long, global = true)]
    threads: Option<usize>,
    /// Key-value config file; flags override its entries.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
pub enum Command {
    /// Non-crossing partitions, Möbius values and Kreweras complements.
    Nc(NcArgs),
    /// Cycle structure, length, geodesic set and NC embedding of a permutation.
    Perm(PermArgs),
    /// Exact Weingarten table.
    Wg(WgArgs),
    /// Free cumulants from a moment table or from matrices.
    Cumulants(CumulantsArgs),
    /// Haar k-fold channel coefficients.
    Channel(ChannelArgs),
    /// Haar-averaged 2k-OTOC by formula and by channel contraction.
    Otoc(OtocArgs),
    /// Monte Carlo k-freeness test of a unitary ensemble.
    HaarTest(HaarTestArgs),
    /// Compare an ensemble's k-fold channel with the Haar one.
    DesignCheck(DesignArgs),
    /// Distance between an ensemble's k-fold channel and the Haar one.
    Distance(DistanceArgs),
    /// Exact-diagonalization dynamics.
    #[command(subcommand)]
    Eth(EthCommand),
}

#[derive(Args, Debug)]
pub struct NcArgs {
    #[arg(long)]
    n: Option<usize>,
    /// Only count.
    #[arg(long)]
    count: bool,
    /// Include mu(pi, 1_n) for every pi.
    #[arg(long)]
    moebius: bool,
    /// Include the Kreweras complement of every pi.
    #[arg(long)]
    kreweras: bool,
    /// Largest n enumerated.
    #[arg(long)]
    limit: Option<usize>,
}

#[derive(Args, Debug)]
pub struct PermArgs {
    /// One-line notation, 1-based, e.g. `2,3,1`.
    #[arg(long)]
    perm: Option<String>,
    /// Cycle notation, 1-based, e.g. `(1 3)(2 4)`; needs --k.
    #[arg(long)]
    cycles: Option<String>,
    #[arg(long)]
    k: Option<usize>,
}

#[derive(Args, Debug)]
pub struct WgArgs {
    #[arg(long)]
    k: Option<usize>,
    #[arg(long)]
    dim: Option<u64>,
}

#[derive(Args, Debug)]
pub struct CumulantsArgs {
    /// JSON moment table.
    #[arg(long)]
    moments: Option<PathBuf>,
    /// Comma-separated matrix files; operator i is the i-th file.
    #[arg(long)]
    matrix: Option<String>,
    /// Word as comma-separated operator ids.
    #[arg(long)]
    word: Option<String>,
    /// Shortcut for the word `0,0,..,0` of this length.
    #[arg(long)]
    order: Option<usize>,
}

#[derive(Args, Debug)]
pub struct ChannelArgs {
    #[arg(long)]
    k: Option<usize>,
    #[arg(long)]
    dim: Option<u64>,
    /// exact | asymptotic
    #[arg(long)]
    mode: Option<String>,
    /// Comma-separated matrix files, one per replica, or a single file used
    /// for every replica.
    #[arg(long)]
    ops: Option<String>,
}

#[derive(Args, Debug)]
pub struct OtocArgs {
    #[arg(long)]
    k: Option<usize>,
    #[arg(long)]
    a: Option<PathBuf>,
    #[arg(long)]
    b: Option<PathBuf>,
    /// Defaults to the size of the matrices.
    #[arg(long)]
    dim: Option<u64>,
}

#[derive(Args, Debug)]
pub struct HaarTestArgs {
    #[arg(long)]
    a: Option<PathBuf>,
    #[arg(long)]
    b: Option<PathBuf>,
    #[arg(long)]
    k: Option<usize>,
    #[arg(long)]
    n_samples: Option<usize>,
    /// haar | pauli | clifford
    #[arg(long)]
    ensemble: Option<String>,
    /// kappa (mixed free cumulant) | otoc (raw moment)
    #[arg(long)]
    quantity: Option<String>,
}

#[derive(Args, Debug)]
pub struct DesignArgs {
    /// haar | pauli | clifford
    #[arg(long)]
    ensemble: Option<String>,
    #[arg(long)]
    k: Option<usize>,
    /// Dimension for the Haar ensemble.
    #[arg(long)]
    dim: Option<usize>,
    #[arg(long)]
    tol: Option<f64>,
}

#[derive(Args, Debug)]
pub struct DistanceArgs {
    /// hamiltonian | haar | pauli | clifford
    #[arg(long)]
    ensemble: Option<String>,
    #[arg(long)]
    k: Option<usize>,
    #[arg(long)]
    dim: Option<usize>,
    /// Window length for the Hamiltonian ensemble; `inf` for the infinite-time limit.
    #[arg(long)]
    t_max: Option<f64>,
}

#[derive(Args, Debug, Clone)]
pub struct ModelArgs {
    /// goe | ising | file
    #[arg(long)]
    model: Option<String>,
    #[arg(long)]
    dim: Option<usize>,
    #[arg(long)]
    sites: Option<usize>,
    #[arg(long)]
    j: Option<f64>,
    #[arg(long, allow_hyphen_values = true)]
    hx: Option<f64>,
    #[arg(long, allow_hyphen_values = true)]
    hz: Option<f64>,
    /// Hamiltonian matrix file for `--model file`.
    #[arg(long)]
    hamiltonian: Option<PathBuf>,
    /// Extra observables as comma-separated NAME=FILE pairs, original basis.
    #[arg(long)]
    observables: Option<String>,
    #[arg(long, allow_hyphen_values = true)]
    beta: Option<f64>,
}

#[derive(Subcommand, Debug)]
pub enum EthCommand {
    /// Diagonalize a model and report spectral diagnostics.
    Build(EthBuildArgs),
    /// Thermal free cumulant of the alternating word, optionally its distinct-index form.
    Cumulant(EthCumulantArgs),
    /// Long-time averages of the mixed cumulant or the OTOC.
    Timeavg(EthTimeavgArgs),
    /// Free-k time of the mixed cumulant on a time grid.
    Freetime(EthFreetimeArgs),
    /// Factorization gap of the time-averaged product of two-point functions.
    Appendixb(EthAppendixArgs),
    /// Observables in the eigenbases of perturbed Hamiltonians.
    Deutsch(EthDeutschArgs),
}

#[derive(Args, Debug)]
pub struct EthBuildArgs {
    #[command(flatten)]
    model: ModelArgs,
    /// Write the observables (eigenbasis) and energies into this directory.
    #[arg(long)]
    export_dir: Option<PathBuf>,
    /// Random quadruples examined by the resonance report.
    #[arg(long)]
    resonance_samples: Option<usize>,
}

#[derive(Args, Debug)]
pub struct PairArgs {
    /// Observable name for A.
    #[arg(long)]
    a: Option<String>,
    /// Observable name for B.
    #[arg(long)]
    b: Option<String>,
    #[arg(long)]
    k: Option<usize>,
}

#[derive(Args, Debug)]
pub struct EthCumulantArgs {
    #[command(flatten)]
    model: ModelArgs,
    #[command(flatten)]
    pair: PairArgs,
    #[arg(long)]
    t: Option<f64>,
    /// Also evaluate the distinct-index sum.
    #[arg(long)]
    distinct: bool,
}

#[derive(Args, Debug)]
pub struct EthTimeavgArgs {
    #[command(flatten)]
    model: ModelArgs,
    #[command(flatten)]
    pair: PairArgs,
    /// kappa | otoc
    #[arg(long)]
    quantity: Option<String>,
    /// strict | finite
    #[arg(long)]
    window: Option<String>,
    /// Comma-separated window lengths for finite mode.
    #[arg(long)]
    t_max: Option<String>,
}

#[derive(Args, Debug)]
pub struct EthFreetimeArgs {
    #[command(flatten)]
    model: ModelArgs,
    #[command(flatten)]
    pair: PairArgs,
    #[arg(long)]
    threshold: Option<f64>,
    /// start:stop:step
    #[arg(long)]
    t_grid: Option<String>,
}

#[derive(Args, Debug)]
pub struct EthAppendixArgs {
    #[command(flatten)]
    model: ModelArgs,
    #[command(flatten)]
    pair: PairArgs,
    #[arg(long)]
    window: Option<String>,
    #[arg(long)]
    t_max: Option<f64>,
}

#[derive(Args, Debug)]
pub struct EthDeutschArgs {
    #[command(flatten)]
    model: ModelArgs,
    /// Observable name.
    #[arg(long)]
    a: Option<String>,
    /// `c = D^-exponent`.
    #[arg(long)]
    exponent: Option<f64>,
    /// Comma-separated couplings.
    #[arg(long, allow_hyphen_values = true)]
    lambdas: Option<String>,
    /// Seed of the GOE perturbation; defaults to seed + 1.
    #[arg(long)]
    perturbation_seed: Option<u64>,
}

pub struct Global {
    pub seed: u64,
}

fn run(cli: Cli) -> Result<(), CliError> {
    let file = match &cli.config {
        Some(p) => {
            let text = std::fs::read_to_string(p).map_err(|e| CliError::Validation(format!("{}: {e}", p.display())))?;
            parse_config(&text)?
        }
        None => BTreeMap::new(),
    };
    let mut r = Resolver::new(file);
    let format: Format = r.get("format", cli.format, Format::Json)?;
    let seed: u64 = r.get("seed", cli.seed, 0)?;
    let threads: usize = r.get("threads", cli.threads, 0)?;
    let output: Option<String> = r.optional("output", cli.output.map(|p| p.display().to_string()))?;
    let global = Global { seed };
    let (name, plan) = commands::plan(&cli.command, &mut r, &global)?;
    let config = r.finish()?;
    if threads > 0 {
        // Fails only if a pool already exists, which cannot happen this early.
        let _ = rayon::ThreadPoolBuilder::new().num_threads(threads).build_global();
    }
    let outcome = plan()?;
    let doc = json!({
        "command": name,
        "version": env!("CARGO_PKG_VERSION"),
        "config": Value::Object(config.into_iter().collect()),
        "result": outcome.result,
    });
    let text = render(format, &name, &doc, outcome.table.as_ref())?;
    match output {
        Some(p) => std::fs::write(&p, text).map_err(|e| CliError::Validation(format!("{p}: {e}")))?,
        None => print!("{text}"),
    }
    Ok(())
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { 1 } else { 0 };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("kfree: {e}");
            ExitCode::from(match e {
                CliError::Validation(_) => 1,
                CliError::Regime(_) => 2,
            })
        }
    }
}
