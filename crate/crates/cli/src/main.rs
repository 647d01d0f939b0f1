use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use soa_drive::harness::{self, ExperimentConfig, PlantSelection};
use soa_drive::metrics::MetricsReport;
use soa_drive::optim::{self, Algorithm};
use soa_drive::signals::Waveform;

#[derive(Parser)]
#[command(name = "soa-drive", version, about = "Simulate an SOA equivalent circuit and optimise its drive waveform")]
struct Cli {
    /// Log progress to stderr (repeat for more detail).
    #[arg(short, long, global = true, action = clap::ArgAction::Count)]
    verbose: u8,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Drive file -> response and metrics.
    Simulate {
        /// Waveform CSV (`volts` column, optional `.hdr` sidecar).
        #[arg(long)]
        drive: PathBuf,
        #[command(flatten)]
        common: Common,
    },
    /// One optimizer run on one plant.
    Optimize(Common),
    /// The full algorithm x variant x repeat matrix.
    Campaign(Common),
    /// Reference drives compared on one plant.
    Baselines(Common),
    /// Bode magnitude of the selected plant.
    Freqresp(Common),
    /// Print the effective configuration as TOML.
    Config(Common),
}

#[derive(Args)]
struct Common {
    /// Experiment configuration (TOML).
    #[arg(long)]
    config: Option<PathBuf>,
    /// Base seed mixed into every run's seed.
    #[arg(long)]
    seed: Option<u64>,
    /// Output directory.
    #[arg(long)]
    out: Option<PathBuf>,
    /// Restrict to one algorithm.
    #[arg(long, value_parser = clap::value_parser!(AlgoArg))]
    algo: Option<AlgoArg>,
    /// Plant variant index (0 is the canonical plant).
    #[arg(long)]
    variant: Option<usize>,
    /// Repeats per algorithm and plant.
    #[arg(long)]
    repeats: Option<usize>,
}

#[derive(Clone, Copy, clap::ValueEnum)]
enum AlgoArg {
    Pso,
    Aco,
    Ga,
}

impl From<AlgoArg> for Algorithm {
    fn from(a: AlgoArg) -> Self {
        match a {
            AlgoArg::Pso => Algorithm::Pso,
            AlgoArg::Aco => Algorithm::Aco,
            AlgoArg::Ga => Algorithm::Ga,
        }
    }
}

/// Failure class, mapped to the process exit code.
enum Failure {
    Usage(String),
    Runtime(String),
}

impl From<soa_drive::Error> for Failure {
    fn from(e: soa_drive::Error) -> Self {
        Failure::Runtime(e.to_string())
    }
}

type CliResult = Result<(), Failure>;

impl Common {
    fn load(&self) -> Result<ExperimentConfig, Failure> {
        let mut cfg = match &self.config {
            Some(path) => ExperimentConfig::load(path).map_err(|e| Failure::Usage(format!("cannot load config: {e}")))?,
            None => ExperimentConfig::default(),
        };
        if let Some(seed) = self.seed {
            cfg.base_seed = seed;
        }
        if let Some(out) = &self.out {
            cfg.output_dir = out.clone();
        }
        if let Some(algo) = self.algo {
            cfg.algorithms = vec![algo.into()];
        }
        if let Some(v) = self.variant {
            cfg.plant = PlantSelection::Variant(v);
        }
        if let Some(r) = self.repeats {
            cfg.n_repeats = r;
        }
        cfg.validate().map_err(|e| Failure::Usage(e.to_string()))?;
        Ok(cfg)
    }
}

/// Narrows a suite selection to the canonical plant for single-plant commands.
fn single_plant(mut cfg: ExperimentConfig) -> ExperimentConfig {
    if cfg.plant == PlantSelection::AllVariants {
        cfg.plant = PlantSelection::Canonical;
    }
    cfg
}

fn write(path: &Path, text: &str) -> CliResult {
    if let Some(parent) = path.parent() {
        std::fs::create_dir_all(parent).map_err(|e| Failure::Runtime(format!("{}: {e}", parent.display())))?;
    }
    std::fs::write(path, text).map_err(|e| Failure::Runtime(format!("{}: {e}", path.display())))
}

fn simulate(drive: &Path, common: &Common) -> CliResult {
    let cfg = single_plant(common.load()?);
    let drive = Waveform::read_csv(drive).map_err(|e| Failure::Usage(e.to_string()))?;
    let case = harness::plant_cases(&cfg)?.remove(0);
    let response = case.ctx.simulator().simulate(&drive)?;
    let sp = case.ctx.set_point();
    if response.len() != sp.len() {
        return Err(Failure::Usage(format!("drive has {} samples, the layout needs {}", response.len(), sp.len())));
    }
    let mut metrics = format!("reference,{}\n", MetricsReport::CSV_HEADER);
    metrics.push_str(&format!("set_point,{}\n", MetricsReport::against_set_point(&response, sp)?.csv_row()));
    metrics.push_str(&format!("own_levels,{}\n", MetricsReport::against_own_levels(&response, sp)?.csv_row()));
    let row = harness::BaselineRow {
        technique: "drive".into(),
        metrics: MetricsReport::against_set_point(&response, sp)?,
        drive,
        response,
    };
    write(&cfg.output_dir.join("response.csv"), &harness::trace_csv(&row))?;
    write(&cfg.output_dir.join("metrics.csv"), &metrics)?;
    print!("{metrics}");
    Ok(())
}

fn optimize(common: &Common) -> CliResult {
    let cfg = single_plant(common.load()?);
    let case = harness::plant_cases(&cfg)?.remove(0);
    let algorithm = cfg.algorithms[0];
    let seed = harness::cell_seed(cfg.base_seed, algorithm, case.variant, 0);
    let record = optim::run(&case.ctx, &cfg.algo_config(algorithm).with_seed(seed))?;
    let dir = &cfg.output_dir;
    std::fs::create_dir_all(dir).map_err(|e| Failure::Runtime(format!("{}: {e}", dir.display())))?;
    record.write_json(dir.join(format!("{algorithm}_record.json")))?;
    record.write_curve_csv(dir.join(format!("{algorithm}_curve.csv")))?;
    record.best_waveform.write_csv(dir.join(format!("{algorithm}_best.csv")))?;
    println!("{}", MetricsReport::CSV_HEADER.to_owned() + ",cost,evaluations");
    println!("{},{},{}", record.best_metrics.csv_row(), record.best_cost, record.evaluations);
    Ok(())
}

fn campaign(common: &Common) -> CliResult {
    let cfg = common.load()?;
    let result = harness::run_campaign(&cfg)?;
    harness::write_campaign(&result, &cfg.output_dir)?;
    let failed = result.failures().count();
    if failed > 0 {
        eprintln!("{failed} of {} runs failed; see errors.csv", result.cells.len());
    }
    print!("{}", harness::summary_text(&result));
    Ok(())
}

fn baselines(common: &Common) -> CliResult {
    let cfg = common.load()?;
    let rows = harness::run_baselines(&cfg)?;
    harness::write_baselines(&rows, &cfg.output_dir)?;
    print!("{}", harness::baselines_csv(&rows));
    Ok(())
}

fn freqresp(common: &Common) -> CliResult {
    let cfg = single_plant(common.load()?);
    let case = harness::plant_cases(&cfg)?.remove(0);
    let csv = harness::freqresp_csv(&case.tf, harness::FREQRESP_LO_HZ, harness::FREQRESP_HI_HZ, harness::FREQRESP_POINTS)?;
    write(&cfg.output_dir.join("freqresp.csv"), &csv)?;
    match harness::bandwidth_hz(&case.tf) {
        Some(bw) => println!("-3 dB bandwidth: {:.4} GHz", bw / 1e9),
        None => println!("-3 dB bandwidth: not reached below {} Hz", harness::FREQRESP_HI_HZ),
    }
    Ok(())
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let code = if e.use_stderr() { 1 } else { 0 };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    let level = match cli.verbose {
        0 => log::LevelFilter::Warn,
        1 => log::LevelFilter::Info,
        _ => log::LevelFilter::Debug,
    };
    env_logger::Builder::new().filter_level(level).init();

    let outcome = match &cli.command {
        Command::Simulate { drive, common } => simulate(drive, common),
        Command::Optimize(c) => optimize(c),
        Command::Campaign(c) => campaign(c),
        Command::Baselines(c) => baselines(c),
        Command::Freqresp(c) => freqresp(c),
        Command::Config(c) => c.load().and_then(|cfg| {
            print!("{}", cfg.to_toml_string()?);
            Ok(())
        }),
    };
    match outcome {
        Ok(()) => ExitCode::SUCCESS,
        Err(Failure::Usage(msg)) => {
            eprintln!("error: {msg}");
            ExitCode::from(1)
        }
        Err(Failure::Runtime(msg)) => {
            eprintln!("error: {msg}");
            ExitCode::from(2)
        }
    }
}
