use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Parser, Subcommand, ValueEnum};
use serde::Serialize;

mod analyze;
mod error;
mod integrate;
mod problem;
mod transform;
mod verify;

use error::CliError;

/// Legendre-Clairaut transform of regular and degenerate Lagrangians.
#[derive(Debug, Parser)]
#[command(name = "clairaut", version)]
struct Cli {
    /// Print machine-readable JSON instead of text
    #[arg(long, global = true)]
    json: bool,
    /// Directory for output files
    #[arg(long, global = true, value_name = "DIR")]
    out: Option<PathBuf>,
    /// Seed for all sampling (overrides verify.seed in the file)
    #[arg(long, global = true)]
    seed: Option<u64>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Rank partition, constraints and sampled constraint values
    Analyze { file: PathBuf },
    /// Tabulate H, H0 and Phi over a grid of (q, p, v2)
    Transform {
        file: PathBuf,
        /// Axis sweep `name=lo:hi:count`, e.g. `p1=-1:1:3`
        #[arg(long = "grid", value_name = "SPEC")]
        grids: Vec<String>,
        /// Fixed value `name=value`
        #[arg(long = "point", value_name = "SPEC")]
        points: Vec<String>,
    },
    /// Integrate the equations of motion and write trajectory CSVs
    Integrate {
        file: PathBuf,
        #[arg(long, value_enum, default_value_t = Method::Both)]
        method: Method,
    },
    /// Run the sampled identity checks
    Verify { file: PathBuf },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum Method {
    El,
    Ham,
    Both,
}

/// Where reports go.
pub struct Output {
    pub json: bool,
    pub dir: Option<PathBuf>,
}

impl Output {
    pub fn dir_or_cwd(&self) -> &Path {
        self.dir.as_deref().unwrap_or(Path::new("."))
    }

    pub fn ensure_dir(&self) -> Result<(), CliError> {
        if let Some(d) = &self.dir {
            std::fs::create_dir_all(d)?;
        }
        Ok(())
    }

    /// Prints the report and, with `--out`, saves it as `<name>.txt` or
    /// `<name>.json`.
    pub fn report<T: Serialize>(&self, name: &str, text: &str, value: &T) -> Result<(), CliError> {
        let body = if self.json {
            serde_json::to_string_pretty(value).expect("reports serialize") + "\n"
        } else {
            text.to_string()
        };
        print!("{body}");
        if let Some(d) = &self.dir {
            self.ensure_dir()?;
            let ext = if self.json { "json" } else { "txt" };
            std::fs::write(d.join(format!("{name}.{ext}")), body)?;
        }
        Ok(())
    }
}

fn run(cli: Cli) -> Result<u8, CliError> {
    let out = Output {
        json: cli.json,
        dir: cli.out,
    };
    match cli.command {
        Command::Analyze { file } => analyze::run(&file, cli.seed, &out),
        Command::Transform { file, grids, points } => transform::run(&file, cli.seed, &grids, &points, &out),
        Command::Integrate { file, method } => integrate::run(&file, cli.seed, method, &out),
        Command::Verify { file } => verify::run(&file, cli.seed, &out),
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli) {
        Ok(code) => ExitCode::from(code),
        Err(e) => {
            eprintln!("error: {}", e.message);
            ExitCode::from(e.code)
        }
    }
}
