//! Central, local and individual information views of the network.
//!
//! Each view forecasts a link's large-scale gain from the inputs its tier
//! actually has:
//!
//! | tier       | positions                          | map             | horizon |
//! |------------|------------------------------------|-----------------|---------|
//! | central    | planned                            | stale snapshot  | long    |
//! | local      | realized now, extrapolated by plan | fresh           | middle  |
//! | individual | own links, measured now            | fresh           | short   |
//!
//! Variances add across the uncertainty sources. Position uncertainty is
//! propagated to gain through a numeric sensitivity (central differences
//! with a 1 m step on the view's own map).

use std::collections::BTreeMap;
use std::io::Write;
use std::sync::Arc;

use rand::Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::channel_graph::SlotGrid;
use crate::radio_env::{GainModel, GroundTruth, RadioMap};
use crate::rng;
use crate::scene::{NodeId, Position3};
use crate::trajectory::{offset_position, ou_offsets, DeviationParams, Trajectory4D};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum EchelonError {
    #[error("target time is {lead:.3} s ahead, outside the view's [0, {horizon}] s horizon")]
    OutOfRange { lead: f64, horizon: f64 },
    #[error("link {0}-{1} is outside the view's region")]
    OutOfRegion(NodeId, NodeId),
    #[error("unknown node {0}")]
    UnknownNode(NodeId),
    #[error("invalid view: {0}")]
    InvalidView(String),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Tier {
    Central,
    Local,
    Individual,
}

impl Tier {
    pub const ALL: [Tier; 3] = [Tier::Central, Tier::Local, Tier::Individual];

    pub fn name(&self) -> &'static str {
        match self {
            Tier::Central => "central",
            Tier::Local => "local",
            Tier::Individual => "individual",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TrajectorySource {
    Planned,
    RealizedWithinRegion,
    SelfOnly,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum MeasurementAccess {
    None,
    OwnLinksInstantaneous,
}

#[derive(Debug, Clone)]
pub struct MapSnapshot {
    pub map: Arc<RadioMap>,
    pub staleness_s: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Region {
    pub center: Position3,
    pub radius: f64,
}

impl Region {
    pub fn contains(&self, p: &Position3) -> bool {
        self.center.distance(p) <= self.radius
    }
}

/// Prediction horizon of each tier, seconds.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Horizons {
    pub central_s: f64,
    pub local_s: f64,
    pub individual_s: f64,
}

impl Default for Horizons {
    fn default() -> Self {
        Self { central_s: 600.0, local_s: 30.0, individual_s: 2.0 }
    }
}

impl Horizons {
    pub fn validate(&self) -> Result<(), EchelonError> {
        if !(self.central_s > self.local_s && self.local_s > self.individual_s && self.individual_s > 0.0) {
            return Err(EchelonError::InvalidView("horizons must satisfy central > local > individual > 0".into()));
        }
        Ok(())
    }

    pub fn of(&self, tier: Tier) -> f64 {
        match tier {
            Tier::Central => self.central_s,
            Tier::Local => self.local_s,
            Tier::Individual => self.individual_s,
        }
    }
}

/// One tier's view at a given instant.
#[derive(Debug, Clone)]
pub struct EchelonView {
    tier: Tier,
    trajectory_source: TrajectorySource,
    map_snapshot: MapSnapshot,
    region: Option<Region>,
    measurement_access: MeasurementAccess,
    owner: Option<NodeId>,
    now: f64,
    horizon_s: f64,
    coherence_s: f64,
}

impl EchelonView {
    fn check(map: &MapSnapshot, now: f64, horizon_s: f64) -> Result<(), EchelonError> {
        if !(map.staleness_s >= 0.0) {
            return Err(EchelonError::InvalidView("staleness must be >= 0".into()));
        }
        if !(now.is_finite() && horizon_s >= 0.0) {
            return Err(EchelonError::InvalidView("now must be finite and horizon >= 0".into()));
        }
        Ok(())
    }

    pub fn central(map: MapSnapshot, now: f64, horizon_s: f64) -> Result<Self, EchelonError> {
        Self::check(&map, now, horizon_s)?;
        Ok(Self {
            tier: Tier::Central,
            trajectory_source: TrajectorySource::Planned,
            map_snapshot: map,
            region: None,
            measurement_access: MeasurementAccess::None,
            owner: None,
            now,
            horizon_s,
            coherence_s: 0.0,
        })
    }

    pub fn local(map: MapSnapshot, now: f64, horizon_s: f64, region: Region) -> Result<Self, EchelonError> {
        Self::check(&map, now, horizon_s)?;
        if !(region.radius >= 0.0) {
            return Err(EchelonError::InvalidView("region radius must be >= 0".into()));
        }
        Ok(Self {
            tier: Tier::Local,
            trajectory_source: TrajectorySource::RealizedWithinRegion,
            map_snapshot: map,
            region: Some(region),
            measurement_access: MeasurementAccess::None,
            owner: None,
            now,
            horizon_s,
            coherence_s: 0.0,
        })
    }

    /// The view of aircraft `owner`. Measurements decorrelate from the
    /// future channel with time constant `coherence_s`.
    pub fn individual(
        map: MapSnapshot,
        owner: NodeId,
        now: f64,
        horizon_s: f64,
        coherence_s: f64,
    ) -> Result<Self, EchelonError> {
        Self::check(&map, now, horizon_s)?;
        if !(coherence_s > 0.0) {
            return Err(EchelonError::InvalidView("coherence time must be > 0".into()));
        }
        Ok(Self {
            tier: Tier::Individual,
            trajectory_source: TrajectorySource::SelfOnly,
            map_snapshot: map,
            region: None,
            measurement_access: MeasurementAccess::OwnLinksInstantaneous,
            owner: Some(owner),
            now,
            horizon_s,
            coherence_s,
        })
    }

    pub fn tier(&self) -> Tier {
        self.tier
    }

    pub fn trajectory_source(&self) -> TrajectorySource {
        self.trajectory_source
    }

    pub fn measurement_access(&self) -> MeasurementAccess {
        self.measurement_access
    }

    pub fn region(&self) -> Option<&Region> {
        self.region.as_ref()
    }

    pub fn map(&self) -> &RadioMap {
        &self.map_snapshot.map
    }

    pub fn staleness_s(&self) -> f64 {
        self.map_snapshot.staleness_s
    }

    pub fn now(&self) -> f64 {
        self.now
    }

    pub fn horizon_s(&self) -> f64 {
        self.horizon_s
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GainForecast {
    pub mean_db: f64,
    pub std_db: f64,
    /// Seconds ahead of the view's current time.
    pub lead_time: f64,
}

#[derive(Debug, Clone)]
enum Track {
    Aircraft { planned: Trajectory4D, offsets: Vec<[f64; 3]> },
    Ground(Position3),
}

/// Versioned world state: true channel, plans and realized deviations.
#[derive(Debug, Clone)]
pub struct World {
    truth: GroundTruth,
    grid: SlotGrid,
    deviation: DeviationParams,
    tracks: BTreeMap<NodeId, Track>,
}

impl World {
    pub fn new(truth: GroundTruth, grid: SlotGrid, deviation: DeviationParams) -> Self {
        Self { truth, grid, deviation, tracks: BTreeMap::new() }
    }

    /// Adds an aircraft whose realized path deviates from `planned` with
    /// the world's deviation process seeded by `seed`.
    pub fn add_aircraft(&mut self, planned: Trajectory4D, seed: u64) {
        let offsets = ou_offsets(planned.aircraft_id(), &self.deviation, &self.grid, seed);
        self.tracks.insert(planned.aircraft_id(), Track::Aircraft { planned, offsets });
    }

    pub fn add_ground(&mut self, id: NodeId, pos: Position3) {
        self.tracks.insert(id, Track::Ground(pos));
    }

    pub fn truth(&self) -> &GroundTruth {
        &self.truth
    }

    pub fn grid(&self) -> &SlotGrid {
        &self.grid
    }

    pub fn deviation(&self) -> &DeviationParams {
        &self.deviation
    }

    pub fn node_ids(&self) -> impl Iterator<Item = NodeId> + '_ {
        self.tracks.keys().copied()
    }

    pub fn aircraft_ids(&self) -> impl Iterator<Item = NodeId> + '_ {
        self.tracks.iter().filter(|(_, t)| matches!(t, Track::Aircraft { .. })).map(|(id, _)| *id)
    }

    pub fn is_aircraft(&self, id: NodeId) -> bool {
        matches!(self.tracks.get(&id), Some(Track::Aircraft { .. }))
    }

    pub fn planned_trajectory(&self, id: NodeId) -> Option<&Trajectory4D> {
        match self.tracks.get(&id)? {
            Track::Aircraft { planned, .. } => Some(planned),
            Track::Ground(_) => None,
        }
    }

    fn track(&self, id: NodeId) -> Result<&Track, EchelonError> {
        self.tracks.get(&id).ok_or(EchelonError::UnknownNode(id))
    }

    fn offset_at(offsets: &[[f64; 3]], grid: &SlotGrid, t: f64) -> [f64; 3] {
        let f = ((t - grid.t0) / grid.dt).clamp(0.0, (offsets.len() - 1) as f64);
        let k = (f.floor() as usize).min(offsets.len() - 1);
        let frac = f - k as f64;
        if frac == 0.0 || k + 1 >= offsets.len() {
            return offsets[k];
        }
        let (a, b) = (offsets[k], offsets[k + 1]);
        [0, 1, 2].map(|i| a[i] + (b[i] - a[i]) * frac)
    }

    pub fn planned(&self, id: NodeId, t: f64) -> Result<Position3, EchelonError> {
        Ok(match self.track(id)? {
            Track::Aircraft { planned, .. } => planned.position_at(t),
            Track::Ground(p) => *p,
        })
    }

    pub fn realized(&self, id: NodeId, t: f64) -> Result<Position3, EchelonError> {
        Ok(match self.track(id)? {
            Track::Aircraft { planned, offsets } => {
                offset_position(planned.position_at(t), Self::offset_at(offsets, &self.grid, t))
            }
            Track::Ground(p) => *p,
        })
    }

    /// The position at `target` obtained by carrying the offset observed at
    /// `now` along the plan.
    pub fn extrapolated(&self, id: NodeId, now: f64, target: f64) -> Result<Position3, EchelonError> {
        Ok(match self.track(id)? {
            Track::Aircraft { planned, offsets } => {
                offset_position(planned.position_at(target), Self::offset_at(offsets, &self.grid, now))
            }
            Track::Ground(p) => *p,
        })
    }

    /// True large-scale gain between realized positions at `t`.
    pub fn true_gain(&self, i: NodeId, j: NodeId, t: f64) -> Result<f64, EchelonError> {
        Ok(self.truth.gain_db(&self.realized(i, t)?, &self.realized(j, t)?))
    }
}

/// Squared gain sensitivity (dB per m, summed over axes) at both endpoints
/// that are aircraft. Ground nodes do not move.
fn squared_sensitivity(map: &RadioMap, world: &World, i: NodeId, pi: Position3, j: NodeId, pj: Position3) -> f64 {
    let mut s = 0.0;
    let axes = [Position3::new(1.0, 0.0, 0.0), Position3::new(0.0, 1.0, 0.0), Position3::new(0.0, 0.0, 1.0)];
    if world.is_aircraft(i) {
        for e in axes {
            let d = 0.5 * (map.gain_db(&(pi + e), &pj) - map.gain_db(&(pi - e), &pj));
            s += d * d;
        }
    }
    if world.is_aircraft(j) {
        for e in axes {
            let d = 0.5 * (map.gain_db(&pi, &(pj + e)) - map.gain_db(&pi, &(pj - e)));
            s += d * d;
        }
    }
    s
}

/// Forecast of the large-scale gain of link `(i, j)` at `target_time`.
pub fn forecast_gain(
    view: &EchelonView,
    world: &World,
    i: NodeId,
    j: NodeId,
    target_time: f64,
) -> Result<GainForecast, EchelonError> {
    forecast(view, world, i, j, target_time, true)
}

/// The mean of [`forecast_gain`] alone, skipping the uncertainty terms.
pub fn forecast_mean_db(
    view: &EchelonView,
    world: &World,
    i: NodeId,
    j: NodeId,
    target_time: f64,
) -> Result<f64, EchelonError> {
    forecast(view, world, i, j, target_time, false).map(|f| f.mean_db)
}

fn forecast(
    view: &EchelonView,
    world: &World,
    i: NodeId,
    j: NodeId,
    target_time: f64,
    with_std: bool,
) -> Result<GainForecast, EchelonError> {
    let lead = target_time - view.now;
    if !(lead >= 0.0 && lead <= view.horizon_s) {
        return Err(EchelonError::OutOfRange { lead, horizon: view.horizon_s });
    }
    let map = view.map();
    let resid = map.residual_std_db();
    let sigma2 = if with_std { world.deviation.sigma_dev * world.deviation.sigma_dev } else { 0.0 };
    match view.tier {
        Tier::Central => {
            let (pi, pj) = (world.planned(i, target_time)?, world.planned(j, target_time)?);
            let mean_db = map.gain_db(&pi, &pj);
            let dev_var = if sigma2 > 0.0 { sigma2 * squared_sensitivity(map, world, i, pi, j, pj) } else { 0.0 };
            Ok(GainForecast { mean_db, std_db: (dev_var + resid * resid).sqrt(), lead_time: lead })
        }
        Tier::Local => {
            let region = view.region.as_ref().expect("local views carry a region");
            let (ri, rj) = (world.realized(i, view.now)?, world.realized(j, view.now)?);
            if !region.contains(&ri) || !region.contains(&rj) {
                return Err(EchelonError::OutOfRegion(i, j));
            }
            let (pi, pj) =
                (world.extrapolated(i, view.now, target_time)?, world.extrapolated(j, view.now, target_time)?);
            let mean_db = map.gain_db(&pi, &pj);
            let inc = if with_std { world.deviation.increment_variance(lead) } else { 0.0 };
            let extra = if inc > 0.0 { inc * squared_sensitivity(map, world, i, pi, j, pj) } else { 0.0 };
            Ok(GainForecast { mean_db, std_db: (resid * resid + extra).sqrt(), lead_time: lead })
        }
        Tier::Individual => {
            let owner = view.owner.expect("individual views have an owner");
            if owner != i && owner != j {
                return Err(EchelonError::OutOfRegion(i, j));
            }
            let measured = world.true_gain(i, j, view.now)?;
            if lead == 0.0 {
                return Ok(GainForecast { mean_db: measured, std_db: 0.0, lead_time: 0.0 });
            }
            let w = (-lead / view.coherence_s).exp();
            let (pi, pj) =
                (world.extrapolated(i, view.now, target_time)?, world.extrapolated(j, view.now, target_time)?);
            let predicted = map.gain_db(&pi, &pj);
            Ok(GainForecast {
                mean_db: w * measured + (1.0 - w) * predicted,
                std_db: resid * (1.0 - w * w).max(0.0).sqrt(),
                lead_time: lead,
            })
        }
    }
}

/// Settings of the forecast-error experiment.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ErrorReportConfig {
    pub leads: Vec<f64>,
    pub horizons: Horizons,
    pub local_radius: f64,
    pub coherence_s: f64,
    /// Evaluate every trial at this instant instead of a random one.
    #[serde(default)]
    pub now: Option<f64>,
}

impl Default for ErrorReportConfig {
    fn default() -> Self {
        Self {
            leads: vec![0.0, 1.0, 2.0, 10.0, 30.0],
            horizons: Horizons::default(),
            local_radius: 1500.0,
            coherence_s: 1.0,
            now: None,
        }
    }
}

/// Forecast errors (forecast minus truth, dB) of one trial at one lead.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TrialErrors {
    pub lead: f64,
    pub link: (NodeId, NodeId),
    pub central: Option<f64>,
    pub local: Option<f64>,
    pub individual: Option<f64>,
}

impl TrialErrors {
    pub fn get(&self, tier: Tier) -> Option<f64> {
        match tier {
            Tier::Central => self.central,
            Tier::Local => self.local,
            Tier::Individual => self.individual,
        }
    }
}

/// Draws random aircraft links and instants and records each tier's error.
pub fn forecast_errors(
    world: &World,
    central_map: &MapSnapshot,
    fresh_map: &MapSnapshot,
    cfg: &ErrorReportConfig,
    n_trials: usize,
    seed: u64,
) -> Result<Vec<TrialErrors>, EchelonError> {
    cfg.horizons.validate()?;
    let aircraft: Vec<NodeId> = world.aircraft_ids().collect();
    let all: Vec<NodeId> = world.node_ids().collect();
    if aircraft.is_empty() || all.len() < 2 {
        return Err(EchelonError::InvalidView("need at least one aircraft and one peer".into()));
    }
    let max_lead = cfg.leads.iter().copied().fold(0.0, f64::max);
    let t_lo = world.grid.t0;
    let t_hi = (world.grid.time(world.grid.n_slots - 1) - max_lead).max(t_lo);
    let mut out = Vec::with_capacity(n_trials * cfg.leads.len());
    for trial in 0..n_trials {
        let mut r = rng::stream_rng(seed, rng::TRIALS, trial as u64);
        let i = aircraft[r.random_range(0..aircraft.len())];
        let j = loop {
            let c = all[r.random_range(0..all.len())];
            if c != i {
                break c;
            }
        };
        let drawn = if t_hi > t_lo { r.random_range(t_lo..t_hi) } else { t_lo };
        let now = cfg.now.unwrap_or(drawn);
        let region = Region { center: world.realized(i, now)?, radius: cfg.local_radius };
        let central = EchelonView::central(central_map.clone(), now, cfg.horizons.central_s)?;
        let local = EchelonView::local(fresh_map.clone(), now, cfg.horizons.local_s, region)?;
        let individual =
            EchelonView::individual(fresh_map.clone(), i, now, cfg.horizons.individual_s, cfg.coherence_s)?;
        for &lead in &cfg.leads {
            let target = now + lead;
            let truth = world.true_gain(i, j, target)?;
            let err = |v: &EchelonView| match forecast_gain(v, world, i, j, target) {
                Ok(f) => Ok(Some(f.mean_db - truth)),
                Err(EchelonError::OutOfRange { .. } | EchelonError::OutOfRegion(..)) => Ok(None),
                Err(e) => Err(e),
            };
            out.push(TrialErrors {
                lead,
                link: (i, j),
                central: err(&central)?,
                local: err(&local)?,
                individual: err(&individual)?,
            });
        }
    }
    Ok(out)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ErrorRow {
    pub tier: Tier,
    pub lead_time_s: f64,
    pub rmse_db: f64,
    pub n: usize,
}

/// Per-tier RMSE of [`forecast_errors`], one row per (lead, tier) that had
/// any in-range trial.
pub fn error_report(
    world: &World,
    central_map: &MapSnapshot,
    fresh_map: &MapSnapshot,
    cfg: &ErrorReportConfig,
    n_trials: usize,
    seed: u64,
) -> Result<Vec<ErrorRow>, EchelonError> {
    let errs = forecast_errors(world, central_map, fresh_map, cfg, n_trials.max(1), seed)?;
    Ok(rmse_rows(&errs, &cfg.leads))
}

/// Per-tier RMSE of trial errors, one row per (lead, tier) with any value.
pub fn rmse_rows(errs: &[TrialErrors], leads: &[f64]) -> Vec<ErrorRow> {
    let mut rows = Vec::new();
    for &lead in leads {
        for tier in Tier::ALL {
            let e: Vec<f64> = errs.iter().filter(|t| t.lead == lead).filter_map(|t| t.get(tier)).collect();
            if e.is_empty() {
                continue;
            }
            let rmse = (e.iter().map(|x| x * x).sum::<f64>() / e.len() as f64).sqrt();
            rows.push(ErrorRow { tier, lead_time_s: lead, rmse_db: rmse, n: e.len() });
        }
    }
    rows
}

pub fn write_error_csv<W: Write>(w: W, rows: &[ErrorRow]) -> Result<(), csv::Error> {
    let mut wr = csv::Writer::from_writer(w);
    wr.write_record(["tier", "lead_time_s", "rmse_db"])?;
    for r in rows {
        wr.serialize((r.tier.name(), r.lead_time_s, r.rmse_db))?;
    }
    wr.flush()?;
    Ok(())
}
