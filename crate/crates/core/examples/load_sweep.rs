//! Paired load sweep of the predictive cascade against both baselines.
//!
//! `cargo run --release --example load_sweep -- [n_seeds] [loads]`, e.g.
//! `-- 4 1,4,16`. Prints median interference per cell and the median
//! paired gap to each baseline.

use std::time::Instant;

use aeris::harness::{gen_scenario, median_gaps, plot_data, sweep, sweep_threads, Method, ScenarioParams, SweepRow};

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let mut args = std::env::args().skip(1);
    let n_seeds: usize = args.next().map(|s| s.parse()).transpose()?.unwrap_or(3);
    let loads: Vec<f64> = match args.next() {
        Some(s) => s.split(',').map(str::parse).collect::<Result<_, _>>()?,
        None => vec![1.0, 4.0, 16.0],
    };
    let cfg = gen_scenario(&ScenarioParams::default(), 7)?;
    let start = Instant::now();
    let reports = sweep(&cfg, &loads, &Method::ALL, n_seeds, sweep_threads())?;
    println!("{} runs in {:.1} s", reports.len(), start.elapsed().as_secs_f64());

    let rows: Vec<SweepRow> = reports.iter().map(SweepRow::from).collect();
    println!("{:>5}  {:<20} {:>10} {:>10} {:>10} {:>9}", "load", "method", "median_dB", "q1_dB", "q3_dB", "delivery");
    for p in plot_data(&rows) {
        println!(
            "{:>5}  {:<20} {:>10.2} {:>10.2} {:>10.2} {:>9.2}",
            p.load, p.method, p.median_db, p.q1_db, p.q3_db, p.median_delivery_rate
        );
    }
    for base in [Method::BaselineAggregate, Method::BaselineSpacetime] {
        let gaps: Vec<String> = median_gaps(&rows, base).iter().map(|(l, g)| format!("{l}: {g:.1} dB")).collect();
        println!("gap to {base}: {}", gaps.join(", "));
    }
    Ok(())
}
