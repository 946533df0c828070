//! `wyckdiff` command-line tool.

mod commands;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use wyckdiff::io::Mode;

#[derive(Parser)]
#[command(name = "wyckdiff", version, about = "Space-group-constrained crystal diffusion toolkit")]
struct Cli {
    /// Run configuration (TOML).
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Seed overriding the configuration.
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Worker threads for independent chains.
    #[arg(long, global = true)]
    jobs: Option<usize>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Print the k-vector and family report of a lattice.
    Encode(EncodeArgs),
    /// Sample structures for a space group and Wyckoff assignment.
    Sample(SampleArgs),
    /// Train the denoiser on a directory of annotated crystals.
    Train(TrainArgs),
    /// Compare predicted structures against references.
    Match(MatchArgs),
    /// Check the minimum interatomic distance of crystals.
    Validate(ValidateArgs),
    /// Template-based structure prediction: retrieve, substitute, refine, match.
    Csp(CspArgs),
}

#[derive(Args)]
pub struct EncodeArgs {
    /// Lattice file (`{"vectors": …}`) or crystal document.
    pub file: PathBuf,
}

#[derive(Args)]
pub struct SampleArgs {
    /// Space-group number.
    #[arg(long)]
    pub group: Option<u16>,
    /// Occupied sites as `letter:Element` (or bare letters for ab-initio), comma separated.
    #[arg(long)]
    pub sites: Option<String>,
    /// Annotated target structure; samples with the analytic denoiser toward it.
    #[arg(long)]
    pub oracle: Option<PathBuf>,
    #[arg(long)]
    pub checkpoint: Option<PathBuf>,
    /// Structure to refine (refine mode).
    #[arg(long)]
    pub input: Option<PathBuf>,
    #[arg(long)]
    pub mode: Option<Mode>,
    #[arg(long)]
    pub count: Option<usize>,
    #[arg(long)]
    pub t_start: Option<usize>,
    /// Output directory.
    #[arg(long)]
    pub out: Option<PathBuf>,
    /// Also write P1 CIF files.
    #[arg(long)]
    pub cif: bool,
}

#[derive(Args)]
pub struct TrainArgs {
    /// Directory of annotated crystal documents.
    #[arg(long)]
    pub data: PathBuf,
    /// Checkpoint to write.
    #[arg(long)]
    pub out: Option<PathBuf>,
    /// CSV file for the per-epoch loss.
    #[arg(long)]
    pub trace: Option<PathBuf>,
}

#[derive(Args)]
pub struct MatchArgs {
    /// Predicted structure file or directory.
    pub pred: PathBuf,
    /// Reference structure file or directory (paired by file name).
    pub reference: PathBuf,
    /// Write one row per pair.
    #[arg(long)]
    pub csv: Option<PathBuf>,
}

#[derive(Args)]
pub struct ValidateArgs {
    #[arg(required = true)]
    pub files: Vec<PathBuf>,
}

#[derive(Args)]
pub struct CspArgs {
    /// Template library directory.
    #[arg(long)]
    pub templates: Option<PathBuf>,
    /// Directory of known structures used as queries and references.
    #[arg(long)]
    pub test: Option<PathBuf>,
    /// Query formulas (no reference).
    #[arg(long, value_delimiter = ',')]
    pub formula: Vec<String>,
    /// Refine with the analytic denoiser toward the substituted template.
    #[arg(long)]
    pub oracle: bool,
    #[arg(long)]
    pub checkpoint: Option<PathBuf>,
    #[arg(long)]
    pub t_start: Option<usize>,
    /// Directory for predicted structures.
    #[arg(long)]
    pub out: Option<PathBuf>,
    #[arg(long)]
    pub csv: Option<PathBuf>,
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = commands::Env::new(cli.config.as_deref(), cli.seed, cli.jobs).and_then(|env| match &cli.command {
        Command::Encode(a) => commands::encode(&env, a),
        Command::Sample(a) => commands::sample(&env, a),
        Command::Train(a) => commands::train(&env, a),
        Command::Match(a) => commands::matching(&env, a),
        Command::Validate(a) => commands::validate(&env, a),
        Command::Csp(a) => commands::csp(&env, a),
    });
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.code())
        }
    }
}
