use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use femlab::Triangulation;
use femlab_cli::{configure_workers, lemma4_outcome, mesh_info, run_config, run_duality, table, RunReport};

/// Stability, convergence and verification campaigns for mixed finite elements.
#[derive(Parser)]
#[command(name = "femlab", version)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run every campaign of a config file.
    Run { config: PathBuf },
    /// Sweep the local projection bound over random triangles.
    Lemma4 {
        #[arg(long, value_parser = clap::value_parser!(u64).range(0..=1))]
        k: u64,
        #[arg(long, default_value_t = 10_000)]
        samples: usize,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        /// Also write the result row as CSV.
        #[arg(long)]
        output: Option<PathBuf>,
    },
    /// Compare conservative and divergence forms for every campaign of a config.
    Duality {
        config: PathBuf,
        #[arg(long)]
        output: Option<PathBuf>,
    },
    /// Print statistics of a mesh file.
    MeshInfo { mesh: PathBuf },
}

fn finish(report: &RunReport) -> ExitCode {
    print!("{}", report.summary());
    if report.passed() {
        ExitCode::SUCCESS
    } else {
        ExitCode::from(1)
    }
}

fn run(cli: Cli) -> anyhow::Result<ExitCode> {
    configure_workers()?;
    Ok(match cli.command {
        Command::Run { config } => finish(&run_config(&config)?),
        Command::Duality { config, output } => finish(&run_duality(&config, output.as_deref())?),
        Command::Lemma4 { k, samples, seed, output } => {
            let outcome = lemma4_outcome(&format!("lemma4-k{k}"), k as usize, samples, seed, None)?;
            let mut written = Vec::new();
            if let Some(path) = output {
                table::write_csv(&path, &outcome.rows)?;
                written.push(path);
            }
            let mut report = RunReport {
                outcomes: vec![outcome],
                written,
            };
            report.outcomes[0].summary.insert(0, format!("lemma4 sweep, RT{k}, {samples} samples, seed {seed}"));
            finish(&report)
        }
        Command::MeshInfo { mesh } => {
            let mesh = Triangulation::read(&mesh)?;
            print!("{}", mesh_info(&mesh)?);
            ExitCode::SUCCESS
        }
    })
}

fn main() -> ExitCode {
    match run(Cli::parse()) {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(2)
        }
    }
}
