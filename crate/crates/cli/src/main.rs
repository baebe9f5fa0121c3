use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use gensamplet_cli::{run, CliError, RunConfig, Verb};

/// Build and apply samplet bases for sets of compactly supported functionals.
#[derive(Parser)]
#[command(name = "gensamplet", version)]
struct Cli {
    #[command(subcommand)]
    verb: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Build a basis and write `basis.smp` and a vanishing-moment report.
    Build(Flags),
    /// Transform data with a stored basis into `coefficients.csv`.
    Transform(Flags),
    /// Reconstruct data from coefficients into `reconstruction.csv`.
    Inverse(Flags),
    /// Threshold a Gram matrix in samplet coordinates; writes `compression.csv`.
    Compress(Flags),
    /// Moment, decay, frame-bound and checksum reports.
    Report(Flags),
    /// Write a generated example as `atoms.csv` (and `gram.csv`).
    Example(Flags),
}

/// Each flag overrides the key of the same name in the config file.
#[derive(Args)]
struct Flags {
    /// `key = value` configuration file.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Atom CSV with header `id,x1..xd,weight[,d1..dd]`.
    #[arg(long)]
    input: Option<String>,
    /// uniform-diracs, random-diracs, p1-mass or green-1d.
    #[arg(long)]
    example: Option<String>,
    #[arg(long)]
    n: Option<String>,
    #[arg(long)]
    dim: Option<String>,
    #[arg(long)]
    degree: Option<String>,
    /// knn, epsilon or gaussian.
    #[arg(long)]
    scheme: Option<String>,
    #[arg(long)]
    scheme_param: Option<String>,
    #[arg(long)]
    leaf_max: Option<String>,
    /// auto, exponential, gaussian, matern32, mass or green.
    #[arg(long)]
    gram: Option<String>,
    #[arg(long)]
    gram_length: Option<String>,
    #[arg(long)]
    sigma: Option<String>,
    #[arg(long)]
    out_dir: Option<String>,
    #[arg(long)]
    seed: Option<String>,
    #[arg(long)]
    basis: Option<String>,
    /// CSV with columns `id,value`.
    #[arg(long)]
    data: Option<String>,
    /// exp, kink or sin.
    #[arg(long)]
    function: Option<String>,
    #[arg(long)]
    coefficients: Option<String>,
}

impl Flags {
    fn config(&self) -> Result<RunConfig, CliError> {
        let mut cfg = match &self.config {
            Some(p) => RunConfig::from_file(p)?,
            None => RunConfig::default(),
        };
        let pairs = [
            ("input", &self.input),
            ("example", &self.example),
            ("n", &self.n),
            ("dim", &self.dim),
            ("degree", &self.degree),
            ("scheme", &self.scheme),
            ("scheme_param", &self.scheme_param),
            ("leaf_max", &self.leaf_max),
            ("gram", &self.gram),
            ("gram_length", &self.gram_length),
            ("sigma", &self.sigma),
            ("out_dir", &self.out_dir),
            ("seed", &self.seed),
            ("basis", &self.basis),
            ("data", &self.data),
            ("function", &self.function),
            ("coefficients", &self.coefficients),
        ];
        for (k, v) in pairs {
            if let Some(v) = v {
                cfg.set(k, v)?;
            }
        }
        Ok(cfg)
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let (verb, flags) = match &cli.verb {
        Command::Build(f) => (Verb::Build, f),
        Command::Transform(f) => (Verb::Transform, f),
        Command::Inverse(f) => (Verb::Inverse, f),
        Command::Compress(f) => (Verb::Compress, f),
        Command::Report(f) => (Verb::Report, f),
        Command::Example(f) => (Verb::Example, f),
    };
    match flags.config().and_then(|cfg| run(verb, &cfg)) {
        Ok(lines) => {
            for l in lines {
                println!("{l}");
            }
            ExitCode::SUCCESS
        }
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
