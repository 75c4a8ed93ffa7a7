use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use llg_calib::config::RunConfig;
use llg_calib::runner;
use llg_calib::verify::{self, VerifyOptions};

#[derive(Parser)]
#[command(name = "llg-calib", version, about = "LLG coefficient identification from voltage data")]
struct Cli {
    #[command(subcommand)]
    cmd: Cmd,
}

#[derive(Subcommand)]
enum Cmd {
    /// Generate clean and noisy voltages for the configured scenario.
    Simulate {
        #[arg(long)]
        config: PathBuf,
        #[arg(long)]
        out: PathBuf,
    },
    /// Recover the coefficients from a `simulate` output directory.
    Reconstruct {
        #[arg(long)]
        config: PathBuf,
        #[arg(long)]
        data: PathBuf,
        #[arg(long)]
        out: PathBuf,
    },
    /// Run the property battery and print a JSON report.
    Verify {
        #[arg(long)]
        config: PathBuf,
        /// Refinement levels above the coarsest grid.
        #[arg(long, default_value_t = 2)]
        refine: u32,
        /// Also write the report here.
        #[arg(long)]
        report: Option<PathBuf>,
        /// Restrict to the named checks.
        #[arg(long, value_delimiter = ',')]
        only: Vec<String>,
        /// Debug: flip the observation adjoint sign (the duality check must fail).
        #[arg(long, hide = true)]
        flip_adjoint: bool,
    },
}

fn main() -> ExitCode {
    if let Some(n) = std::env::var("LLG_THREADS").ok().and_then(|s| s.parse::<usize>().ok()) {
        if let Err(e) = rayon::ThreadPoolBuilder::new().num_threads(n).build_global() {
            eprintln!("warning: LLG_THREADS ignored: {e}");
        }
    }
    match run(Cli::parse().cmd) {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(2)
        }
    }
}

fn run(cmd: Cmd) -> llg_calib::Result<ExitCode> {
    match cmd {
        Cmd::Simulate { config, out } => {
            let cfg = RunConfig::load(&config)?;
            let sim = runner::simulate(&cfg)?;
            runner::write_simulation(&cfg, &sim, &out)?;
            println!("wrote {} (delta = {:.6e})", out.display(), sim.manifest.delta);
            Ok(ExitCode::SUCCESS)
        }
        Cmd::Reconstruct { config, data, out } => {
            let cfg = RunConfig::load(&config)?;
            let (y, manifest) = runner::read_data(&data)?;
            let rec = runner::reconstruct(&cfg, &y, manifest.delta)?;
            runner::write_reconstruction(&rec, &out)?;
            println!("{}", serde_json::to_string_pretty(&rec.summary)?);
            Ok(ExitCode::SUCCESS)
        }
        Cmd::Verify { config, refine, report, only, flip_adjoint } => {
            let cfg = RunConfig::load(&config)?;
            let only: Vec<&str> = only.iter().map(String::as_str).collect();
            let rep = verify::run(&cfg, &VerifyOptions { refine, flip_adjoint }, &only)?;
            let text = serde_json::to_string_pretty(&rep)?;
            if let Some(path) = report {
                std::fs::write(path, &text)?;
            }
            println!("{text}");
            if rep.passed {
                Ok(ExitCode::SUCCESS)
            } else {
                eprintln!("failed checks: {}", rep.failures().join(", "));
                Ok(ExitCode::FAILURE)
            }
        }
    }
}
