//! Load sweeps over paired seeds, their CSV form and the plot summary.

use std::io::{Read, Write};

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::{run_in, HarnessError, Method, MetricsReport, ScenarioConfig, SimWorld};

/// Worker count for [`sweep`]: `AERIS_THREADS` if set and positive, else
/// the available parallelism.
pub fn sweep_threads() -> usize {
    std::env::var("AERIS_THREADS")
        .ok()
        .and_then(|v| v.trim().parse::<usize>().ok())
        .filter(|&n| n > 0)
        .unwrap_or_else(|| std::thread::available_parallelism().map_or(1, |n| n.get()))
}

/// Every (load, method, seed) combination for seeds `0..n_seeds`. Each
/// seed's world is built once and shared by all its runs. Rows come back
/// ordered by (load, method, seed) whatever the thread count.
pub fn sweep(
    cfg: &ScenarioConfig,
    loads: &[f64],
    methods: &[Method],
    n_seeds: usize,
    threads: usize,
) -> Result<Vec<MetricsReport>, HarnessError> {
    if loads.is_empty() || methods.is_empty() || n_seeds == 0 {
        return Err(HarnessError::ConfigInvalid("sweep needs at least one load, method and seed".into()));
    }
    cfg.validate()?;
    let per_seed = |seed: u64| -> Result<Vec<MetricsReport>, HarnessError> {
        let w = SimWorld::build(cfg, seed)?;
        let mut out = Vec::with_capacity(loads.len() * methods.len());
        for &load in loads {
            for &m in methods {
                out.push(run_in(cfg, &w, m, load)?.report);
            }
        }
        Ok(out)
    };
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(threads.max(1))
        .build()
        .map_err(|e| HarnessError::ConfigInvalid(format!("thread pool: {e}")))?;
    let chunks: Vec<Vec<MetricsReport>> =
        pool.install(|| (0..n_seeds as u64).into_par_iter().map(per_seed).collect::<Result<_, _>>())?;
    let mut rows: Vec<MetricsReport> = chunks.into_iter().flatten().collect();
    rows.sort_by(|a, b| a.load.total_cmp(&b.load).then(a.method.cmp(&b.method)).then(a.seed.cmp(&b.seed)));
    Ok(rows)
}

/// One line of `sweep.csv`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepRow {
    pub load: f64,
    pub method: Method,
    pub seed: u64,
    pub interference_mw_s: f64,
    pub interference_db: f64,
    pub delivery_rate: f64,
    pub mean_delay_s: f64,
    pub energy_mj: f64,
}

impl From<&MetricsReport> for SweepRow {
    fn from(r: &MetricsReport) -> Self {
        Self {
            load: r.load,
            method: r.method,
            seed: r.seed,
            interference_mw_s: r.interference_mw_s,
            interference_db: r.interference_db,
            delivery_rate: r.delivery_rate,
            mean_delay_s: r.mean_delay_s,
            energy_mj: r.energy_mj,
        }
    }
}

pub fn write_sweep_csv<W: Write>(w: W, rows: &[MetricsReport]) -> Result<(), HarnessError> {
    let mut wr = csv::Writer::from_writer(w);
    for r in rows {
        wr.serialize(SweepRow::from(r))?;
    }
    wr.flush()?;
    Ok(())
}

pub fn read_sweep_csv<R: Read>(r: R) -> Result<Vec<SweepRow>, HarnessError> {
    let mut rd = csv::Reader::from_reader(r);
    Ok(rd.deserialize().collect::<Result<_, _>>()?)
}

/// Type-7 sample quantile of sorted values.
pub fn quantile(sorted: &[f64], p: f64) -> f64 {
    if sorted.is_empty() {
        return f64::NAN;
    }
    let h = (sorted.len() - 1) as f64 * p.clamp(0.0, 1.0);
    let lo = h.floor() as usize;
    let hi = (lo + 1).min(sorted.len() - 1);
    sorted[lo] + (h - lo as f64) * (sorted[hi] - sorted[lo])
}

/// Median and interquartile range of one (load, method) cell.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PlotRow {
    pub load: f64,
    pub method: Method,
    pub n: usize,
    pub median_db: f64,
    pub q1_db: f64,
    pub q3_db: f64,
    pub median_delivery_rate: f64,
}

pub fn plot_data(rows: &[SweepRow]) -> Vec<PlotRow> {
    let mut keys: Vec<(f64, Method)> = rows.iter().map(|r| (r.load, r.method)).collect();
    keys.sort_by(|a, b| a.0.total_cmp(&b.0).then(a.1.cmp(&b.1)));
    keys.dedup();
    keys.into_iter()
        .map(|(load, method)| {
            let cell: Vec<&SweepRow> = rows.iter().filter(|r| r.load == load && r.method == method).collect();
            let mut db: Vec<f64> = cell.iter().map(|r| r.interference_db).collect();
            let mut dr: Vec<f64> = cell.iter().map(|r| r.delivery_rate).collect();
            db.sort_by(f64::total_cmp);
            dr.sort_by(f64::total_cmp);
            PlotRow {
                load,
                method,
                n: cell.len(),
                median_db: quantile(&db, 0.5),
                q1_db: quantile(&db, 0.25),
                q3_db: quantile(&db, 0.75),
                median_delivery_rate: quantile(&dr, 0.5),
            }
        })
        .collect()
}

/// Per load, the median over seeds of `baseline_db - predictive_db`.
pub fn median_gaps(rows: &[SweepRow], baseline: Method) -> Vec<(f64, f64)> {
    let mut loads: Vec<f64> = rows.iter().map(|r| r.load).collect();
    loads.sort_by(f64::total_cmp);
    loads.dedup();
    loads
        .into_iter()
        .map(|load| {
            let db = |m: Method, seed: u64| {
                rows.iter().find(|r| r.load == load && r.method == m && r.seed == seed).map(|r| r.interference_db)
            };
            let mut gaps: Vec<f64> = rows
                .iter()
                .filter(|r| r.load == load && r.method == Method::Predictive)
                .filter_map(|r| Some(db(baseline, r.seed)? - r.interference_db))
                .collect();
            gaps.sort_by(f64::total_cmp);
            (load, quantile(&gaps, 0.5))
        })
        .collect()
}

pub fn write_plot_csv<W: Write>(w: W, rows: &[PlotRow]) -> Result<(), HarnessError> {
    let mut wr = csv::Writer::from_writer(w);
    for r in rows {
        wr.serialize(r)?;
    }
    wr.flush()?;
    Ok(())
}
