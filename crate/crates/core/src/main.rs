use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use serde_json::json;

use proxyqas::circuit::parse_circuits;
use proxyqas::config::{DatasetConfig, SearchConfig};
use proxyqas::datasets::{generate, write_csv, GeneratorKind, GeneratorParams};
use proxyqas::device::load_calibration;
use proxyqas::pipeline::{bench_scaling, emit_results, evaluate_final, run_search_recording, RunOutcome};
use proxyqas::proxies::{evaluate_proxies, ProxyData};
use proxyqas::rng::task_rng;
use proxyqas::{DeviceModel, Error};

#[derive(Parser)]
#[command(name = "proxyqas", version, about = "Training-free hardware-aware search for quantum kernel circuits")]
struct Cli {
    /// Log progress (repeat for more detail).
    #[arg(short, long, action = clap::ArgAction::Count, global = true)]
    verbose: u8,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run the full search described by a config file.
    Search {
        #[arg(long)]
        config: PathBuf,
        #[arg(long)]
        seed: Option<u64>,
        #[arg(long)]
        out: Option<PathBuf>,
        #[arg(long)]
        workers: Option<usize>,
        /// Parameter draws per final circuit; the best by training KTA is kept.
        #[arg(long)]
        theta_restarts: Option<usize>,
    },
    /// Generate a synthetic dataset as CSV.
    GenData {
        #[arg(long)]
        kind: GeneratorKind,
        /// Sample count; 300, or the 30 distinct patterns for bars_and_stripes.
        #[arg(long)]
        n: Option<usize>,
        /// Feature count; 10, or 16 for bars_and_stripes.
        #[arg(long)]
        d: Option<usize>,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long)]
        out: PathBuf,
    },
    /// Compute the proxy vector and QSVM accuracy of the circuits in a file.
    EvalCircuit {
        #[arg(long)]
        circuit: PathBuf,
        /// A generator name or a CSV path.
        #[arg(long)]
        dataset: String,
        #[command(flatten)]
        data: DataArgs,
        /// Calibration file; the bundled linear chain when omitted.
        #[arg(long)]
        device: Option<PathBuf>,
        #[arg(long, default_value_t = 0)]
        seed: u64,
    },
    /// Time metric evaluation against population size and fit a line.
    BenchScaling {
        #[arg(long, value_delimiter = ',', default_value = "25,50,100")]
        populations: Vec<usize>,
        #[arg(long)]
        config: Option<PathBuf>,
        #[arg(long, default_value_t = 3)]
        repeats: usize,
        #[arg(long)]
        out: Option<PathBuf>,
    },
}

#[derive(Args)]
struct DataArgs {
    #[arg(long, default_value = "label")]
    label_column: String,
    #[arg(long, default_value_t = 300)]
    n: usize,
    #[arg(long, default_value_t = 10)]
    d: usize,
}

fn exit_for(err: &Error) -> ExitCode {
    eprintln!("error: {err}");
    if err.is_config_error() {
        ExitCode::from(1)
    } else {
        ExitCode::from(2)
    }
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
        0 => "warn",
        1 => "info",
        _ => "debug",
    };
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or(level)).init();
    match run(cli.command) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => exit_for(&e),
    }
}

fn run(command: Command) -> Result<(), Error> {
    match command {
        Command::Search { config, seed, out, workers, theta_restarts } => {
            let mut cfg = SearchConfig::load(&config)?;
            if let Some(s) = seed {
                cfg.run.seed = s;
            }
            if let Some(o) = out {
                cfg.run.output_dir = o;
            }
            if let Some(w) = workers {
                cfg.run.workers = w;
            }
            if let Some(r) = theta_restarts {
                cfg.run.theta_restarts = r;
            }
            let mut outcome = RunOutcome::default();
            let result = run_search_recording(&cfg, &mut outcome);
            if result.is_ok() || !outcome.report.iterations.is_empty() {
                emit_results(&outcome, &cfg.run.output_dir)?;
            }
            result?;
            for f in &outcome.report.final_results {
                println!("circuit {:>5} ({:<12}) train {:.3} test {:.3}", f.id, f.family.name(), f.train_accuracy, f.test_accuracy);
            }
            println!("results written to {}", cfg.run.output_dir.display());
            Ok(())
        }
        Command::GenData { kind, n, d, seed, out } => {
            let bars = kind == GeneratorKind::BarsAndStripes;
            let n = n.unwrap_or(if bars { 30 } else { 300 });
            let d = d.unwrap_or(if bars { 16 } else { 10 });
            let params = GeneratorParams { n, d, ..Default::default() };
            let ds = generate(kind, &params, &mut task_rng(seed, "dataset", 0)).map_err(|e| Error::Config(e.to_string()))?;
            write_csv(&ds, &out)?;
            println!("wrote {} rows of {} to {}", ds.len(), kind, out.display());
            Ok(())
        }
        Command::EvalCircuit { circuit, dataset, data, device, seed } => {
            let text = std::fs::read_to_string(&circuit).map_err(|e| Error::Config(format!("{}: {e}", circuit.display())))?;
            let circuits = parse_circuits(&text).map_err(|e| Error::Config(format!("{}: {e}", circuit.display())))?;
            let device = match device {
                Some(p) => load_calibration(p)?,
                None => DeviceModel::bundled_default(),
            };
            let mut cfg = SearchConfig::default();
            cfg.run.seed = seed;
            cfg.dataset = dataset_config(&dataset, &data)?;
            let (train, test) = cfg.dataset.prepare(seed)?;
            let proxy_data = ProxyData::from_dataset(&train, &cfg.proxies, &mut task_rng(seed, "subsample", 0))?;
            let mut rows = Vec::new();
            for c in &circuits {
                let proxies = evaluate_proxies(c, &proxy_data, &device, &cfg.proxies, seed)?;
                let result = evaluate_final(c, 0.0, &train, &test, &cfg)?;
                rows.push(json!({
                    "id": c.id(),
                    "proxies": proxies,
                    "train_accuracy": result.train_accuracy,
                    "test_accuracy": result.test_accuracy,
                }));
            }
            println!("{}", serde_json::to_string_pretty(&rows)?);
            Ok(())
        }
        Command::BenchScaling { populations, config, repeats, out } => {
            let cfg = match config {
                Some(p) => SearchConfig::load(p)?,
                None => SearchConfig::default(),
            };
            let report = bench_scaling(&cfg, &populations, repeats)?;
            for p in &report.points {
                println!("population {:>5}  t_metrics {:.3}s", p.population, p.t_metrics);
            }
            println!("slope {:.4} s/circuit, intercept {:.3}s, R² {:.4}", report.slope, report.intercept, report.r_squared);
            if let Some(o) = out {
                std::fs::write(o, serde_json::to_string_pretty(&report)?)?;
            }
            Ok(())
        }
    }
}

fn dataset_config(spec: &str, args: &DataArgs) -> Result<DatasetConfig, Error> {
    let mut cfg = DatasetConfig { label_column: args.label_column.clone(), ..Default::default() };
    cfg.params.n = args.n;
    cfg.params.d = args.d;
    if spec.parse::<GeneratorKind>().is_ok() {
        cfg.kind = spec.to_string();
    } else {
        cfg.kind = "csv".into();
        cfg.path = Some(PathBuf::from(spec));
    }
    Ok(cfg)
}
