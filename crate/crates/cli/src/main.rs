mod commands;
mod lemmas;
mod output;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};
use serde::Serialize;

use output::CliError;

#[derive(Parser, Debug)]
#[command(name = "qchain", version, about = "Chain Hamiltonians for 1D adiabatic computation and QMA")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug, Serialize)]
#[serde(tag = "command", rename_all = "kebab-case")]
enum Command {
    /// Rewrite a circuit into the round layout.
    Canonicalize {
        #[arg(long)]
        circuit: PathBuf,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Enumerate the template chain.
    Chain(ChainArgs),
    /// Build the template graph and report its chains.
    Graph {
        #[arg(long)]
        n: usize,
        #[arg(long = "L")]
        l: usize,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Emit Hamiltonian terms and coordinate-format matrices.
    Build(BuildArgs),
    /// Scan the gap of the restricted adiabatic pair.
    GapScan(GapScanArgs),
    /// Run the adiabatic evolution with doubling time.
    Evolve(EvolveArgs),
    /// Build or check the QMA Hamiltonian of a verifier.
    Qma(QmaArgs),
    /// Encode a chain Hamiltonian on qubits.
    Encode(EncodeArgs),
    /// Run the full lemma suite.
    VerifyLemmas(LemmaArgs),
}

#[derive(Copy, Clone, Debug, PartialEq, Eq, ValueEnum, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum VariantArg {
    Qma,
    Adiabatic,
}

#[derive(Args, Debug, Serialize)]
pub struct ChainArgs {
    #[arg(long)]
    pub n: usize,
    #[arg(long = "L")]
    pub l: usize,
    #[arg(long, value_enum, default_value = "qma")]
    pub variant: VariantArg,
    /// Use the identified (10- or 9-letter) alphabet.
    #[arg(long)]
    pub identified: bool,
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Copy, Clone, Debug, PartialEq, Eq, ValueEnum, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum Component {
    All,
    Prop,
    Init,
    Valid,
    Legal,
    Input,
    Out,
}

#[derive(Args, Debug, Serialize)]
pub struct ChainSource {
    /// Circuit file; an identity circuit of size n, L is used when absent.
    #[arg(long)]
    pub circuit: Option<PathBuf>,
    #[arg(long)]
    pub n: Option<usize>,
    #[arg(long = "L")]
    pub l: Option<usize>,
}

#[derive(Args, Debug, Serialize)]
pub struct BuildArgs {
    #[command(flatten)]
    pub source: ChainSource,
    #[arg(long, value_enum, default_value = "qma")]
    pub variant: VariantArg,
    #[arg(long, value_enum, default_value = "all")]
    pub component: Component,
    /// Ancilla count for the input penalty.
    #[arg(long, default_value_t = 1)]
    pub n1: usize,
    /// Also write the matrices restricted to the history basis.
    #[arg(long)]
    pub restricted: bool,
    #[arg(long)]
    pub out_dir: PathBuf,
}

#[derive(Args, Debug, Serialize)]
pub struct GapScanArgs {
    #[command(flatten)]
    pub source: ChainSource,
    /// Pad with identity rounds for this target closeness.
    #[arg(long)]
    pub epsilon: Option<f64>,
    #[arg(long, default_value_t = 101)]
    pub grid: usize,
    /// CSV output.
    #[arg(long)]
    pub out: PathBuf,
    /// JSON summary.
    #[arg(long)]
    pub report: Option<PathBuf>,
}

#[derive(Copy, Clone, Debug, PartialEq, Eq, ValueEnum, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum SpaceMode {
    Restricted,
    Full,
}

#[derive(Args, Debug, Serialize)]
pub struct EvolveArgs {
    #[command(flatten)]
    pub source: ChainSource,
    #[arg(long, default_value_t = 0.5)]
    pub epsilon: f64,
    #[arg(long, default_value_t = 0.0)]
    pub delta: f64,
    #[arg(long, value_enum, default_value = "restricted")]
    pub mode: SpaceMode,
    /// Fidelity the doubling loop aims for.
    #[arg(long, default_value_t = 0.9)]
    pub target: f64,
    #[arg(long, default_value_t = 1.0)]
    pub t_start: f64,
    #[arg(long, default_value_t = 1.0e6)]
    pub t_max: f64,
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Copy, Clone, Debug, PartialEq, Eq, ValueEnum, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum QmaAction {
    Build,
    Check,
}

#[derive(Args, Debug, Serialize)]
pub struct QmaArgs {
    #[arg(value_enum)]
    pub action: QmaAction,
    /// JSON file with `n1`, `n2` and a `circuit` object.
    #[arg(long)]
    pub verifier: PathBuf,
    #[arg(long, value_enum, default_value = "restricted")]
    pub mode: SpaceMode,
    #[arg(long)]
    pub a: Option<f64>,
    #[arg(long)]
    pub b: Option<f64>,
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Args, Debug, Serialize)]
pub struct EncodeArgs {
    #[command(flatten)]
    pub source: ChainSource,
    #[arg(long, value_enum, default_value = "qma")]
    pub variant: VariantArg,
    #[arg(long, value_enum, default_value = "valid")]
    pub component: Component,
    #[arg(long, default_value_t = 1)]
    pub n1: usize,
    /// Defaults to ten times the summed term norms.
    #[arg(long)]
    pub lambda_pen: Option<f64>,
    /// Compare bottom spectra before and after encoding (tiny chains only).
    #[arg(long)]
    pub check: bool,
    #[arg(long, default_value_t = 20)]
    pub k_eigs: usize,
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Args, Debug, Serialize)]
pub struct LemmaArgs {
    #[arg(long, default_value_t = 2)]
    pub n: usize,
    #[arg(long = "L", default_value_t = 4)]
    pub l: usize,
    /// Random pairs for the geometric lemma.
    #[arg(long, default_value_t = 1000)]
    pub trials: usize,
    #[arg(long, default_value_t = 7)]
    pub seed: u64,
    #[arg(long)]
    pub out: Option<PathBuf>,
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
    match commands::run(&cli.command) {
        Ok(()) => ExitCode::SUCCESS,
        Err(CliError { code, message }) => {
            eprintln!("error: {message}");
            ExitCode::from(code)
        }
    }
}
