use std::fs::File;
use std::io::{BufReader, BufWriter};
use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::sync::Arc;

use clap::{Args, Parser, Subcommand};

use bdris::channels::io::{read_channels, write_channels};
use bdris::channels::NetworkChannels;
use bdris::harness::{build_scenario, network_at, run_sweep, selfcheck, trial_channels, ScenarioConfig};
use bdris::solver::{run, Variant};
use bdris::Error;

#[derive(Parser)]
#[command(name = "bdris", version, about = "Distributed sum-rate optimization with beyond-diagonal surfaces")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Args, Clone)]
struct Common {
    /// TOML scenario file; defaults are used for missing fields.
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long, default_value = "out")]
    out: PathBuf,
    /// Comma-separated variant names, e.g. `bd-ris,diag-ris-nocoop`.
    #[arg(long, value_delimiter = ',')]
    variants: Option<Vec<String>>,
    /// Comma-separated per-BS transmit powers in dBm.
    #[arg(long, value_delimiter = ',', allow_negative_numbers = true)]
    power: Option<Vec<f64>>,
}

#[derive(Subcommand)]
enum Command {
    /// Full Monte-Carlo sweep; writes results.csv and summary.csv.
    Run(Common),
    /// One channel realization at the first power; writes one trace per variant.
    Single {
        #[command(flatten)]
        common: Common,
        #[arg(long, default_value_t = 0)]
        trial: usize,
    },
    /// Gradient and closed-form self-checks.
    Validate {
        #[arg(long, default_value_t = 20)]
        seeds: u64,
    },
    /// Writes the channels of one trial to `<out>/channels_trial<N>.csv`.
    DumpChannels {
        #[command(flatten)]
        common: Common,
        #[arg(long, default_value_t = 0)]
        trial: usize,
    },
    /// Runs the variants on channels read from a dump file.
    LoadChannels {
        #[command(flatten)]
        common: Common,
        #[arg(long)]
        channels: PathBuf,
    },
}

fn load_config(common: &Common) -> Result<ScenarioConfig, Error> {
    let mut cfg = match &common.config {
        Some(path) => ScenarioConfig::load(path)?,
        None => ScenarioConfig::default(),
    };
    if let Some(seed) = common.seed {
        cfg.seed = seed;
    }
    if let Some(names) = &common.variants {
        cfg.variants = names.iter().map(|n| n.parse::<Variant>()).collect::<Result<_, _>>()?;
    }
    if let Some(power) = &common.power {
        cfg.power_dbm = power.clone();
    }
    cfg.validate()?;
    Ok(cfg)
}

fn create(dir: &Path, name: &str) -> Result<BufWriter<File>, Error> {
    std::fs::create_dir_all(dir)?;
    Ok(BufWriter::new(File::create(dir.join(name))?))
}

fn run_variants(cfg: &ScenarioConfig, channels: Arc<NetworkChannels>, out: &Path, tag: &str) -> Result<(), Error> {
    let power = cfg.power_dbm[0];
    let network = network_at(cfg, channels, power)?;
    for &variant in &cfg.variants {
        let outcome = run(&network, &cfg.solver.with_variant(variant)).map_err(|e| e.error)?;
        let name = format!("trace_{tag}_{variant}.csv");
        outcome.trace.write_csv(create(out, &name)?, network.num_bs())?;
        println!(
            "{variant}: {:.6} bits/s/Hz after {} iterations ({})",
            outcome.best_sum_rate,
            outcome.iterations(),
            out.join(name).display()
        );
    }
    Ok(())
}

fn execute(cli: Cli) -> Result<ExitCode, Error> {
    match cli.command {
        Command::Run(common) => {
            let cfg = load_config(&common)?;
            let results = run_sweep(&cfg)?;
            results.write_results(create(&common.out, "results.csv")?)?;
            results.write_summary(create(&common.out, "summary.csv")?)?;
            for s in results.summary() {
                println!("{:<16} {:>6} dBm  {:.6} +- {:.6}", s.variant.name(), s.power_dbm, s.mean, s.stderr);
            }
            if results.failures() > 0 {
                eprintln!("{} runs failed and were skipped", results.failures());
            }
            Ok(ExitCode::SUCCESS)
        }
        Command::Single { common, trial } => {
            let cfg = load_config(&common)?;
            let topology = build_scenario(&cfg)?;
            let channels = Arc::new(trial_channels(&cfg, &topology, trial)?);
            run_variants(&cfg, channels, &common.out, &format!("seed{}_trial{trial}", cfg.seed))?;
            Ok(ExitCode::SUCCESS)
        }
        Command::Validate { seeds } => {
            let checks = selfcheck::run_all(seeds)?;
            let mut all = true;
            for c in &checks {
                println!(
                    "{} {:<26} {:>3}/{:<3} worst {:.3e}",
                    if c.ok() { "PASS" } else { "FAIL" },
                    c.name,
                    c.passed,
                    c.total,
                    c.worst
                );
                all &= c.ok();
            }
            Ok(if all { ExitCode::SUCCESS } else { ExitCode::FAILURE })
        }
        Command::DumpChannels { common, trial } => {
            let cfg = load_config(&common)?;
            let topology = build_scenario(&cfg)?;
            let channels = trial_channels(&cfg, &topology, trial)?;
            let name = format!("channels_trial{trial}.csv");
            write_channels(&channels, create(&common.out, &name)?)?;
            println!("{}", common.out.join(name).display());
            Ok(ExitCode::SUCCESS)
        }
        Command::LoadChannels { common, channels } => {
            let cfg = load_config(&common)?;
            let loaded = read_channels(BufReader::new(File::open(&channels)?))?;
            run_variants(&cfg, Arc::new(loaded), &common.out, "loaded")?;
            Ok(ExitCode::SUCCESS)
        }
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match execute(cli) {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e}");
            match e {
                Error::Config(_) => ExitCode::from(2),
                _ => ExitCode::FAILURE,
            }
        }
    }
}
