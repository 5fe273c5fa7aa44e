//! Command-line front end: scenario generation, single runs, load sweeps
//! and plot summaries.
//!
//! Exit codes: 0 success, 2 invalid configuration or input, 3 infeasible
//! scenario.

use std::fs::File;
use std::io::{BufReader, BufWriter, Write};
use std::path::PathBuf;
use std::process::ExitCode;

use aeris::harness::{
    gen_scenario, plot_data, read_sweep_csv, run_in, sweep, sweep_threads, write_events, write_plot_csv,
    write_sweep_csv, HarnessError, Method, ScenarioConfig, ScenarioParams, SimWorld,
};
use clap::{Parser, Subcommand};

#[derive(Parser)]
#[command(name = "aeris", version, about = "Predictive low-altitude network simulator")]
struct Cli {
    #[command(subcommand)]
    cmd: Cmd,
}

#[derive(Subcommand)]
enum Cmd {
    /// Generate a scenario configuration (city, aircraft plans, defaults).
    GenScenario {
        #[arg(long)]
        out: PathBuf,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long)]
        buildings: Option<usize>,
        #[arg(long)]
        aircraft: Option<usize>,
        #[arg(long)]
        sensitive: Option<usize>,
        #[arg(long)]
        horizon: Option<f64>,
        /// Flow arrivals per minute stored in the config.
        #[arg(long)]
        load: Option<f64>,
    },
    /// Run one method on one seed and write its metrics.
    Run {
        #[arg(long)]
        config: PathBuf,
        #[arg(long)]
        method: Method,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long)]
        out: PathBuf,
        /// Override the config's load (flows per minute).
        #[arg(long)]
        load: Option<f64>,
        /// Also write the event log as JSON lines.
        #[arg(long)]
        events: Option<PathBuf>,
    },
    /// Run every (load, method, seed) combination into a CSV table.
    Sweep {
        #[arg(long)]
        config: PathBuf,
        #[arg(long, value_delimiter = ',', default_value = "1,2,4,8,16")]
        loads: Vec<f64>,
        /// Comma-separated method names, or `all`.
        #[arg(long, default_value = "all")]
        methods: String,
        #[arg(long, default_value_t = 20)]
        seeds: usize,
        #[arg(long)]
        out: PathBuf,
    },
    /// Median and IQR of interference per (load, method) from a sweep CSV.
    PlotData {
        #[arg(long = "in")]
        input: PathBuf,
        #[arg(long)]
        out: PathBuf,
    },
}

fn read_config(path: &PathBuf) -> Result<ScenarioConfig, HarnessError> {
    let cfg: ScenarioConfig = serde_json::from_reader(BufReader::new(File::open(path)?))
        .map_err(|e| HarnessError::ConfigInvalid(format!("{}: {e}", path.display())))?;
    cfg.validate()?;
    Ok(cfg)
}

fn parse_methods(s: &str) -> Result<Vec<Method>, HarnessError> {
    if s == "all" {
        return Ok(Method::ALL.to_vec());
    }
    s.split(',').map(|m| m.trim().parse()).collect()
}

fn execute(cmd: Cmd) -> Result<(), HarnessError> {
    match cmd {
        Cmd::GenScenario { out, seed, buildings, aircraft, sensitive, horizon, load } => {
            let mut p = ScenarioParams::default();
            if let Some(b) = buildings {
                p.city.n_buildings = b;
            }
            if let Some(a) = aircraft {
                p.aircraft.count = a;
            }
            if let Some(s) = sensitive {
                p.city.n_sensitive = s;
            }
            if let Some(h) = horizon {
                p.horizon_s = h;
            }
            let mut cfg = gen_scenario(&p, seed)?;
            if let Some(l) = load {
                cfg.load_per_min = l;
                cfg.validate()?;
            }
            let mut w = BufWriter::new(File::create(out)?);
            serde_json::to_writer_pretty(&mut w, &cfg)?;
            w.write_all(b"\n")?;
            w.flush()?;
        }
        Cmd::Run { config, method, seed, out, load, events } => {
            let cfg = read_config(&config)?;
            let world = SimWorld::build(&cfg, seed)?;
            let run = run_in(&cfg, &world, method, load.unwrap_or(cfg.load_per_min))?;
            let mut w = BufWriter::new(File::create(out)?);
            serde_json::to_writer_pretty(&mut w, &run.report)?;
            w.write_all(b"\n")?;
            w.flush()?;
            if let Some(path) = events {
                let mut w = BufWriter::new(File::create(path)?);
                write_events(&mut w, &run.events)?;
                w.flush()?;
            }
        }
        Cmd::Sweep { config, loads, methods, seeds, out } => {
            let cfg = read_config(&config)?;
            let rows = sweep(&cfg, &loads, &parse_methods(&methods)?, seeds, sweep_threads())?;
            write_sweep_csv(BufWriter::new(File::create(out)?), &rows)?;
        }
        Cmd::PlotData { input, out } => {
            let rows = read_sweep_csv(BufReader::new(File::open(input)?))?;
            write_plot_csv(BufWriter::new(File::create(out)?), &plot_data(&rows))?;
        }
    }
    Ok(())
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match execute(cli.cmd) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(match e {
                HarnessError::Infeasible(_) => 3,
                _ => 2,
            })
        }
    }
}
