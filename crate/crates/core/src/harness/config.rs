//! Scenario configuration and the synthetic scenario generator.

use std::collections::BTreeSet;

use rand::Rng;
use serde::{Deserialize, Serialize};

use super::HarnessError;
use crate::channel_graph::SlotGrid;
use crate::echelon::Horizons;
use crate::operational::LinkBudget;
use crate::radio_env::PathLossParams;
use crate::rng;
use crate::scene::{gen_city, CityParams, NodeId, Position3, Scene, SceneError, SOURCE_ID_BASE};
use crate::trajectory::{DeviationParams, Trajectory4D, Waypoint};

/// Fractions of short- and long-deadline flows.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct ClassMix {
    pub short_fraction: f64,
    pub long_fraction: f64,
    pub short_deadline_s: f64,
    pub long_deadline_s: f64,
}

impl Default for ClassMix {
    fn default() -> Self {
        Self { short_fraction: 0.5, long_fraction: 0.5, short_deadline_s: 2.0, long_deadline_s: 20.0 }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct MapParams {
    pub idw_exponent: f64,
    pub k_neighbors: usize,
    /// Period of the pre-mission survey measurements.
    pub survey_period_s: f64,
    /// Period at which cluster members share in-mission measurements with
    /// the local view.
    pub local_sensing_period_s: f64,
    pub range_cutoff_m: f64,
    pub residual_std_db: f64,
}

impl Default for MapParams {
    fn default() -> Self {
        Self {
            idw_exponent: 2.0,
            k_neighbors: 8,
            survey_period_s: 2.0,
            local_sensing_period_s: 0.5,
            range_cutoff_m: 1500.0,
            residual_std_db: 4.0,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct TacticalParams {
    pub local_radius_m: f64,
    /// Decorrelation time of individual measurements.
    pub coherence_s: f64,
    pub policy_bins: usize,
    /// How long before a transmission the individual policy is built.
    pub decision_lead_s: f64,
}

impl Default for TacticalParams {
    fn default() -> Self {
        Self { local_radius_m: 1500.0, coherence_s: 1.0, policy_bins: 16, decision_lead_s: 1.0 }
    }
}

fn default_grid() -> SlotGrid {
    SlotGrid { t0: 0.0, dt: 0.1, n_slots: 1200 }
}

fn default_cap() -> f64 {
    -65.0
}

fn default_load() -> f64 {
    4.0
}

/// Everything a run needs apart from the seed.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScenarioConfig {
    pub scene: Scene,
    pub trajectories: Vec<Trajectory4D>,
    #[serde(default)]
    pub deviation: DeviationParams,
    #[serde(default = "default_grid")]
    pub grid: SlotGrid,
    #[serde(default)]
    pub path_loss: PathLossParams,
    #[serde(default)]
    pub budget: LinkBudget,
    /// Largest power any sensitive node may receive from one transmission.
    #[serde(default = "default_cap")]
    pub sensitive_cap_dbm: f64,
    #[serde(default)]
    pub horizons: Horizons,
    /// Flow arrivals per minute.
    #[serde(default = "default_load")]
    pub load_per_min: f64,
    #[serde(default)]
    pub class_mix: ClassMix,
    #[serde(default)]
    pub radio_map: MapParams,
    #[serde(default)]
    pub tactical: TacticalParams,
}

fn invalid(field: &str, msg: impl std::fmt::Display) -> HarnessError {
    HarnessError::ConfigInvalid(format!("{field}: {msg}"))
}

impl ScenarioConfig {
    pub fn validate(&self) -> Result<(), HarnessError> {
        let g = &self.grid;
        if !(g.dt > 0.0 && g.dt.is_finite() && g.t0.is_finite()) || g.n_slots < 2 {
            return Err(invalid("grid", "dt must be positive and n_slots >= 2"));
        }
        self.deviation.validate().map_err(|e| invalid("deviation", e))?;
        self.path_loss.validate().map_err(|e| invalid("path_loss", e))?;
        self.budget.validate().map_err(|e| invalid("budget", e))?;
        self.horizons.validate().map_err(|e| invalid("horizons", e))?;
        if !self.sensitive_cap_dbm.is_finite() {
            return Err(invalid("sensitive_cap_dbm", "must be finite"));
        }
        if !(self.load_per_min >= 0.0 && self.load_per_min.is_finite()) {
            return Err(invalid("load_per_min", "must be a finite value >= 0"));
        }
        let m = &self.class_mix;
        if !(m.short_fraction >= 0.0 && m.long_fraction >= 0.0)
            || (m.short_fraction + m.long_fraction - 1.0).abs() > 1e-9
        {
            return Err(invalid("class_mix", "fractions must be >= 0 and sum to 1"));
        }
        for (name, d) in [("short_deadline_s", m.short_deadline_s), ("long_deadline_s", m.long_deadline_s)] {
            if !(d >= g.dt && d.is_finite()) {
                return Err(invalid(&format!("class_mix.{name}"), "must be at least one slot"));
            }
            if g.slots_in(d) + 1 >= g.n_slots {
                return Err(invalid(&format!("class_mix.{name}"), "does not fit in the slot grid"));
            }
        }
        let r = &self.radio_map;
        if !(r.idw_exponent > 0.0)
            || r.k_neighbors == 0
            || !(r.survey_period_s > 0.0)
            || !(r.local_sensing_period_s > 0.0)
            || !(r.range_cutoff_m > 0.0)
            || !(r.residual_std_db >= 0.0)
        {
            return Err(invalid("radio_map", "exponent, k, sensing periods and cutoff must be positive"));
        }
        let t = &self.tactical;
        if !(t.local_radius_m >= 0.0) || !(t.coherence_s > 0.0) || t.policy_bins == 0 || !(t.decision_lead_s >= 0.0) {
            return Err(invalid("tactical", "radius, coherence, bins and lead must be positive"));
        }
        if t.decision_lead_s > self.horizons.individual_s {
            return Err(invalid("tactical.decision_lead_s", "exceeds the individual horizon"));
        }
        if self.scene.ground_sources().is_empty() || self.scene.ground_destinations().is_empty() {
            return Err(invalid("scene", "needs at least one source and one destination"));
        }
        let mut seen = BTreeSet::new();
        for tr in &self.trajectories {
            let id = tr.aircraft_id();
            if id.0 == 0 || id.0 >= SOURCE_ID_BASE {
                return Err(invalid("trajectories", format!("aircraft id {id} must lie in 1..{SOURCE_ID_BASE}")));
            }
            if !seen.insert(id) {
                return Err(invalid("trajectories", format!("duplicate aircraft id {id}")));
            }
            if tr.waypoints().iter().any(|w| !self.scene.bounds().contains_closed(&w.pos)) {
                return Err(invalid("trajectories", format!("aircraft {id} leaves the scene bounds")));
            }
        }
        Ok(())
    }

    /// Ground nodes that take part in the network: sources and destinations.
    pub fn terminals(&self) -> Vec<(NodeId, Position3)> {
        self.scene.ground_sources().iter().chain(self.scene.ground_destinations()).map(|g| (g.id, g.pos)).collect()
    }

    pub fn sensitive_positions(&self) -> Vec<Position3> {
        self.scene.sensitive_nodes().iter().map(|g| g.pos).collect()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct AircraftParams {
    pub count: usize,
    pub altitude_min: f64,
    pub altitude_max: f64,
    pub speed_min: f64,
    pub speed_max: f64,
    /// Share of aircraft flying lawnmower patterns; the rest shuttle between
    /// a ground source and a ground destination.
    pub lawnmower_fraction: f64,
    pub lane_spacing_m: f64,
}

impl Default for AircraftParams {
    fn default() -> Self {
        Self {
            count: 12,
            altitude_min: 60.0,
            altitude_max: 120.0,
            speed_min: 10.0,
            speed_max: 20.0,
            lawnmower_fraction: 0.5,
            lane_spacing_m: 120.0,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct ScenarioParams {
    pub city: CityParams,
    pub aircraft: AircraftParams,
    pub horizon_s: f64,
    pub dt: f64,
}

impl Default for ScenarioParams {
    fn default() -> Self {
        Self { city: CityParams::default(), aircraft: AircraftParams::default(), horizon_s: 120.0, dt: 0.1 }
    }
}

/// Walks `corners` in a loop at `speed` until `t_end` is covered.
fn looped(id: NodeId, corners: &[Position3], speed: f64, t_end: f64) -> Trajectory4D {
    let mut wps = vec![Waypoint::new(0.0, corners[0])];
    let (mut t, mut k) = (0.0, 0);
    while t < t_end {
        let (a, b) = (corners[k % corners.len()], corners[(k + 1) % corners.len()]);
        t += a.distance(&b) / speed;
        wps.push(Waypoint::new(t, b));
        k += 1;
    }
    Trajectory4D::new(id, wps).expect("generated waypoints are increasing in time")
}

/// Generates the city and the aircraft plans of a scenario.
pub fn gen_scenario(params: &ScenarioParams, seed: u64) -> Result<ScenarioConfig, HarnessError> {
    let scene = gen_city(&params.city, seed).map_err(|e| match e {
        SceneError::GenerationFailed(msg) => HarnessError::Infeasible(format!("city: {msg}")),
        e => invalid("city", e),
    })?;
    let a = &params.aircraft;
    if a.count >= SOURCE_ID_BASE as usize {
        return Err(invalid("aircraft.count", format!("must be below {SOURCE_ID_BASE}")));
    }
    let [ex, ey, ez] = params.city.extent;
    if !(a.altitude_min > 0.0 && a.altitude_max >= a.altitude_min && a.altitude_max <= ez) {
        return Err(invalid("aircraft.altitude", "must lie inside the scene height"));
    }
    if !(a.speed_min > 0.0 && a.speed_max >= a.speed_min) {
        return Err(invalid("aircraft.speed", "must be positive"));
    }
    if !(a.lane_spacing_m > 0.0 && (0.0..=1.0).contains(&a.lawnmower_fraction)) {
        return Err(invalid("aircraft", "lane spacing must be positive and the fraction in [0, 1]"));
    }
    if !(params.dt > 0.0 && params.horizon_s >= 2.0 * params.dt) {
        return Err(invalid("horizon_s", "must span at least two slots"));
    }
    if scene.ground_sources().is_empty() || scene.ground_destinations().is_empty() {
        return Err(invalid("city", "needs at least one source and one destination"));
    }
    let margin = 50.0f64.min(0.25 * ex.min(ey));
    let n_mower = (a.lawnmower_fraction * a.count as f64).round() as usize;
    let mut trajectories = Vec::with_capacity(a.count);
    for k in 0..a.count {
        let mut r = rng::stream_rng(seed, rng::ROUTES, k as u64);
        let id = NodeId(k as u32 + 1);
        let z = r.random_range(a.altitude_min..=a.altitude_max);
        let speed = r.random_range(a.speed_min..=a.speed_max);
        let corners = if k < n_mower {
            let w = r.random_range((0.3 * ex)..=(0.6 * ex));
            let h = r.random_range((0.3 * ey)..=(0.6 * ey));
            let x0 = r.random_range(margin..=(ex - margin - w));
            let y0 = r.random_range(margin..=(ey - margin - h));
            let lanes = ((h / a.lane_spacing_m).floor() as usize).max(1);
            let mut c = Vec::new();
            for l in 0..=lanes {
                let y = y0 + h * l as f64 / lanes as f64;
                let (xa, xb) = if l % 2 == 0 { (x0, x0 + w) } else { (x0 + w, x0) };
                c.push(Position3::new(xa, y, z));
                c.push(Position3::new(xb, y, z));
            }
            // fly back over the same pattern
            let back: Vec<Position3> = c.iter().rev().skip(1).take(c.len().saturating_sub(2)).copied().collect();
            c.extend(back);
            c
        } else {
            let src = &scene.ground_sources()[r.random_range(0..scene.ground_sources().len())];
            let dst = &scene.ground_destinations()[r.random_range(0..scene.ground_destinations().len())];
            let ends = [Position3::new(src.pos.x, src.pos.y, z), Position3::new(dst.pos.x, dst.pos.y, z)];
            if r.random_bool(0.5) {
                ends.to_vec()
            } else {
                vec![ends[1], ends[0]]
            }
        };
        trajectories.push(looped(id, &corners, speed, params.horizon_s));
    }
    let n_slots = (params.horizon_s / params.dt + 1e-9).floor() as usize;
    let cfg = ScenarioConfig {
        scene,
        trajectories,
        deviation: DeviationParams::default(),
        grid: SlotGrid { t0: 0.0, dt: params.dt, n_slots },
        path_loss: PathLossParams::default(),
        budget: LinkBudget::default(),
        sensitive_cap_dbm: default_cap(),
        horizons: Horizons::default(),
        load_per_min: default_load(),
        class_mix: ClassMix::default(),
        radio_map: MapParams::default(),
        tactical: TacticalParams::default(),
    };
    cfg.validate()?;
    Ok(cfg)
}
