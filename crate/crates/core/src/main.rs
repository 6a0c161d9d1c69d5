use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Parser, Subcommand};

use phd_consistency::experiment::{self, output, parse_norms, ExperimentConfig, LocalizationConfig, Preset};
use phd_consistency::metrics::NormOrder;
use phd_consistency::oracle;
use phd_consistency::{Error, Result};

#[derive(Parser)]
#[command(name = "phd-consistency", version, about = "Unit vs sub-unit PHD tracker consistency experiments")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run one experiment and write records, grid snapshots and summaries.
    Run {
        #[arg(long)]
        config: Option<PathBuf>,
        /// Doctrine regime: exact, moderate or loose.
        #[arg(long)]
        preset: Option<String>,
        #[arg(long)]
        seed: Option<u64>,
        #[arg(long)]
        out: Option<PathBuf>,
        /// Comma-separated norm orders, e.g. `1,2,inf`.
        #[arg(long)]
        norms: Option<String>,
        /// `THRESH,MINWIDTH` for per-step failure localization.
        #[arg(long)]
        localize: Option<String>,
    },
    /// Summaries over consecutive seeds.
    Batch {
        #[arg(long)]
        config: Option<PathBuf>,
        #[arg(long)]
        seeds: u64,
        #[arg(long)]
        preset: Option<String>,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Compare the fast paths against brute-force reference implementations.
    OracleCheck {
        #[arg(long, default_value_t = 50)]
        trials: usize,
        #[arg(long, default_value_t = 0)]
        seed: u64,
    },
}

fn load_config(path: Option<&Path>, preset: Option<&str>) -> Result<ExperimentConfig> {
    let mut config = match path {
        Some(p) => ExperimentConfig::parse(&std::fs::read_to_string(p)?)?,
        None => ExperimentConfig::default(),
    };
    if let Some(p) = preset {
        config = config.with_preset(p.parse::<Preset>()?);
    }
    Ok(config)
}

fn parse_localize(text: &str, norm: NormOrder) -> Result<LocalizationConfig> {
    let parts: Vec<&str> = text.split(',').map(str::trim).collect();
    let bad = || Error::Config(format!("--localize expects THRESH,MINWIDTH, got {text:?}"));
    if parts.len() != 2 {
        return Err(bad());
    }
    Ok(LocalizationConfig {
        threshold: parts[0].parse().map_err(|_| bad())?,
        min_width: parts[1].parse().map_err(|_| bad())?,
        norm,
    })
}

fn print_summary(summary: &experiment::Summary) {
    println!("{:<14} {:>12} {:>12} {:>12}", "metric", "mean", "max", "std");
    for row in &summary.rows {
        println!("{:<14} {:>12.5} {:>12.5} {:>12.5}", row.metric, row.mean, row.max, row.std);
    }
}

fn execute(cli: Cli) -> Result<()> {
    match cli.command {
        Command::Run {
            config,
            preset,
            seed,
            out,
            norms,
            localize,
        } => {
            let mut config = load_config(config.as_deref(), preset.as_deref())?;
            if let Some(seed) = seed {
                config = config.with_seed(seed);
            }
            if let Some(norms) = norms {
                config.norms = parse_norms(&norms)?;
            }
            if let Some(loc) = localize {
                let norm = config.localization.map_or(NormOrder::L1, |l| l.norm);
                config.localization = Some(parse_localize(&loc, norm)?);
            }
            if let Some(out) = out {
                config.output_dir = out;
            }
            let dir = config.output_dir.clone();
            let (records, summary) = experiment::run_to_dir(&config, &dir)?;
            println!("{} steps written to {}", records.len(), dir.display());
            print_summary(&summary);
        }
        Command::Batch {
            config,
            seeds,
            preset,
            out,
        } => {
            let mut config = load_config(config.as_deref(), preset.as_deref())?;
            if let Some(out) = out {
                config.output_dir = out;
            }
            let results = experiment::batch(&config, seeds)?;
            std::fs::create_dir_all(&config.output_dir)?;
            let path = config.output_dir.join("batch.csv");
            output::write_batch_csv(&path, &results)?;
            println!("{:>8} {:>10} {:>10} {:>10} {:>10}", "seed", "d_1 mean", "d_1 std", "mass_U", "mass_SU");
            for (seed, s) in &results {
                let d1 = s.distance(NormOrder::L1);
                println!(
                    "{:>8} {:>10.4} {:>10.4} {:>10.4} {:>10.4}",
                    seed,
                    d1.map_or(f64::NAN, |r| r.mean),
                    d1.map_or(f64::NAN, |r| r.std),
                    s.get("mass_U").map_or(f64::NAN, |r| r.mean),
                    s.get("mass_SU").map_or(f64::NAN, |r| r.mean),
                );
            }
            println!("per-seed summaries written to {}", path.display());
        }
        Command::OracleCheck { trials, seed } => {
            let checks = oracle::run_checks(trials, seed);
            let mut failed = 0;
            for c in &checks {
                let status = if c.passed() { "PASS" } else { "FAIL" };
                println!(
                    "{status}  {:<52} max error {:.3e} (tolerance {:.0e}, {} trials)",
                    c.name, c.max_error, c.tolerance, c.trials
                );
                failed += usize::from(!c.passed());
            }
            if failed > 0 {
                return Err(Error::Numerical(format!("{failed} oracle check(s) failed")));
            }
        }
    }
    Ok(())
}

fn main() -> ExitCode {
    match execute(Cli::parse()) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
