//! `fasche` — Monte-Carlo experiment driver.
//!
//! Exit codes: 0 success, 2 configuration error, 3 numerical failure,
//! 1 anything else (I/O).

use std::fs::{self, File};
use std::io::BufWriter;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use fasche::experiment::{self, Artifact, ConvergenceOptions, ConvergenceRow, ExperimentConfig};
use fasche::Error;

#[derive(Parser)]
#[command(
    name = "fasche",
    version,
    about = "Fluid-antenna channel estimation experiments"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Args)]
struct Common {
    /// Flat `key = value` config file; omitted keys keep their defaults.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Output CSV path.
    #[arg(long)]
    out: PathBuf,
    /// Override `base_seed`.
    #[arg(long)]
    seed: Option<u64>,
    /// Override `trials`.
    #[arg(long)]
    trials: Option<usize>,
    /// Also write schedules and solver traces to `<out>.traces/`.
    #[arg(long)]
    dump_trace: bool,
}

#[derive(Subcommand)]
enum Command {
    /// NMSE, BER and capacity over the SNR list for every estimator.
    Sweep(Common),
    /// Per-iteration solver traces.
    Convergence {
        #[command(flatten)]
        common: Common,
        /// RF-chain counts to trace; defaults to the config's `n_chains`.
        #[arg(long, value_delimiter = ',')]
        chains: Vec<usize>,
        /// Pin the sample covariance to the initial model (fixed-point check).
        #[arg(long)]
        pin_covariance: bool,
    },
    /// Selected-port capacity versus aperture size in wavelengths.
    RegionSweep {
        #[command(flatten)]
        common: Common,
        #[arg(long, value_delimiter = ',', default_values_t = [0.5, 1.0, 2.0, 3.5, 5.0])]
        regions: Vec<f64>,
    },
}

fn load_config(common: &Common) -> Result<ExperimentConfig, Error> {
    let mut config = match &common.config {
        Some(path) => {
            let text = fs::read_to_string(path).map_err(|e| {
                Error::Config(format!("cannot read config {}: {e}", path.display()))
            })?;
            ExperimentConfig::parse(&text)?
        }
        None => ExperimentConfig::default(),
    };
    if let Some(seed) = common.seed {
        config.base_seed = seed;
    }
    if let Some(trials) = common.trials {
        config.trials = trials;
    }
    config.validate()?;
    Ok(config)
}

fn trace_dir(out: &Path) -> PathBuf {
    let mut name = out.as_os_str().to_owned();
    name.push(".traces");
    PathBuf::from(name)
}

fn write_artifacts(
    out: &Path,
    config: &ExperimentConfig,
    artifacts: &[Artifact],
) -> Result<(), Error> {
    let dir = trace_dir(out);
    fs::create_dir_all(&dir)?;
    fs::write(dir.join("config.txt"), config.to_text())?;
    for a in artifacts {
        fs::write(dir.join(&a.name), &a.contents)?;
    }
    Ok(())
}

fn convergence_artifacts(rows: &[ConvergenceRow]) -> Vec<Artifact> {
    let mut artifacts: Vec<Artifact> = Vec::new();
    for r in rows {
        let name = format!(
            "m{}_snr{}_{}_trial{}.tsv",
            r.n_chains,
            experiment::format_float(r.snr_db).replace('-', "m"),
            r.estimator,
            r.trial
        );
        if artifacts.last().is_none_or(|a| a.name != name) {
            artifacts.push(Artifact {
                name,
                contents: String::new(),
            });
        }
        let a = artifacts.last_mut().expect("pushed above");
        a.contents += &format!(
            "{}\t{}\t{}\t{}\n",
            r.iteration, r.sigma, r.max_rel_change, r.nll
        );
    }
    artifacts
}

fn run(cli: Cli) -> Result<(), Error> {
    match cli.command {
        Command::Sweep(common) => {
            let config = load_config(&common)?;
            let output = experiment::run_sweep(&config, common.dump_trace)?;
            experiment::write_sweep_csv(
                &output.records,
                BufWriter::new(File::create(&common.out)?),
            )?;
            if common.dump_trace {
                write_artifacts(&common.out, &config, &output.artifacts)?;
            }
        }
        Command::Convergence {
            common,
            chains,
            pin_covariance,
        } => {
            let config = load_config(&common)?;
            let chains = if chains.is_empty() {
                vec![config.n_chains]
            } else {
                chains
            };
            let rows = experiment::run_convergence(
                &config,
                &chains,
                ConvergenceOptions { pin_covariance },
            )?;
            experiment::write_convergence_csv(&rows, BufWriter::new(File::create(&common.out)?))?;
            if common.dump_trace {
                write_artifacts(&common.out, &config, &convergence_artifacts(&rows))?;
            }
        }
        Command::RegionSweep { common, regions } => {
            let config = load_config(&common)?;
            let rows = experiment::run_region_sweep(&config, &regions)?;
            experiment::write_region_csv(&rows, BufWriter::new(File::create(&common.out)?))?;
            if common.dump_trace {
                write_artifacts(&common.out, &config, &[])?;
            }
        }
    }
    Ok(())
}

fn exit_code(e: &Error) -> u8 {
    if e.is_config() {
        2
    } else if e.is_numerical() {
        3
    } else {
        1
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("fasche: {e}");
            ExitCode::from(exit_code(&e))
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn exit_codes() {
        assert_eq!(exit_code(&Error::Config("x".into())), 2);
        assert_eq!(
            exit_code(&Error::ConfigKey {
                key: "trials".into(),
                reason: "x".into()
            }),
            2
        );
        assert_eq!(
            exit_code(&Error::Numerical {
                iteration: Some(3),
                detail: "x".into()
            }),
            3
        );
        assert_eq!(exit_code(&Error::Contract("x".into())), 1);
    }
}
