use std::path::PathBuf;
use std::process::ExitCode;

use anyhow::Result;
use blab::config::{parse_ns, parse_override};
use blab::{columns_help, execute, load_config, Overrides, EXPERIMENTS};
use clap::{Parser, Subcommand};

#[derive(Parser)]
#[command(name = "blab", version, about = "Quantized modules on the fuzzy sphere: experiment runner")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run the experiment described by a JSON config. Exit code 0 iff every check passes.
    #[command(after_long_help = columns_help())]
    Run {
        config: PathBuf,
        /// Output directory (overrides `out`).
        #[arg(long)]
        out: Option<PathBuf>,
        /// Values of N, e.g. `1..40` or `4,8,16` (overrides `Ns`).
        #[arg(long = "Ns", value_name = "LIST")]
        ns: Option<String>,
        /// Seed for symbols, sections and potentials (overrides `seed`).
        #[arg(long)]
        seed: Option<u64>,
        /// Splitting degrees, e.g. `1,-1` (overrides `bundle.degrees`).
        #[arg(long = "bundle.degrees", value_name = "LIST", allow_hyphen_values = true)]
        degrees: Option<String>,
        /// Also write an SVG plot.
        #[arg(long)]
        svg: bool,
        /// Set any config field by path, e.g. `--set potential.amplitude=0.3`.
        #[arg(long, value_name = "PATH=JSON")]
        set: Vec<String>,
    },
    /// List the available experiments.
    ListExperiments,
}

fn main() -> ExitCode {
    match real_main() {
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) => ExitCode::from(1),
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(2)
        }
    }
}

fn real_main() -> Result<bool> {
    match Cli::parse().command {
        Command::ListExperiments => {
            for d in EXPERIMENTS {
                println!("{:<22} {}", d.name, d.about);
            }
            Ok(true)
        }
        Command::Run { config, out, ns, seed, degrees, svg, set } => {
            let degrees = degrees
                .map(|d| d.split(',').map(|p| p.trim().parse::<i32>()).collect::<Result<Vec<_>, _>>())
                .transpose()?;
            let ov = Overrides {
                out,
                ns: ns.as_deref().map(parse_ns).transpose()?,
                seed,
                degrees,
                svg,
                set: set.iter().map(|s| parse_override(s)).collect::<Result<_>>()?,
            };
            let cfg = load_config(&config, &ov)?;
            let (outcome, _, artifacts) = execute(&cfg)?;
            for (name, ok) in &outcome.checks {
                println!("{} {name}", if *ok { "PASS" } else { "FAIL" });
            }
            println!("wrote {}", artifacts.csv.display());
            println!("wrote {}", artifacts.json.display());
            if let Some(p) = &artifacts.svg {
                println!("wrote {}", p.display());
            }
            Ok(outcome.pass())
        }
    }
}
