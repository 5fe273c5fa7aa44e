//! Forecast accuracy of the three echelon views on a harness world.
//!
//! The mission is cut into epochs. At each epoch the central view holds the
//! pre-mission survey map, while the local and individual views hold a map
//! refreshed with in-mission measurements taken strictly before the epoch.

use std::sync::Arc;

use super::{HarnessError, ScenarioConfig, SimWorld};
use crate::echelon::{forecast_errors, rmse_rows, ErrorReportConfig, ErrorRow, MapSnapshot, Tier, TrialErrors};
use crate::radio_env::{ChannelSample, RadioMap};
use crate::rng;
use crate::scene::Position3;

#[derive(Debug, Clone)]
pub struct EchelonStudy {
    pub trials: Vec<TrialErrors>,
    pub rows: Vec<ErrorRow>,
}

impl EchelonStudy {
    /// Trials at `lead` where both tiers produced a forecast, as
    /// `(error_a, error_b)` pairs.
    pub fn paired(&self, lead: f64, a: Tier, b: Tier) -> Vec<(f64, f64)> {
        self.trials.iter().filter(|t| t.lead == lead).filter_map(|t| Some((t.get(a)?, t.get(b)?))).collect()
    }

    /// Paired z statistic of `mean(e_a^2 - e_b^2) > 0`.
    pub fn ordering_z(&self, lead: f64, a: Tier, b: Tier) -> f64 {
        let d: Vec<f64> = self.paired(lead, a, b).iter().map(|(x, y)| x * x - y * y).collect();
        let n = d.len() as f64;
        if n < 2.0 {
            return f64::NAN;
        }
        let mean = d.iter().sum::<f64>() / n;
        let var = d.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (n - 1.0);
        if var == 0.0 {
            return if mean > 0.0 { f64::INFINITY } else { f64::NAN };
        }
        mean / (var / n).sqrt()
    }

    pub fn rmse(&self, lead: f64, tier: Tier) -> Option<f64> {
        self.rows.iter().find(|r| r.lead_time_s == lead && r.tier == tier).map(|r| r.rmse_db)
    }
}

/// Measurements from the realized flights, one round per local sensing
/// period, taken strictly before `until`.
fn mission_samples(cfg: &ScenarioConfig, w: &SimWorld, until: f64) -> Vec<ChannelSample> {
    let grid = &cfg.grid;
    let world = w.world();
    let truth = world.truth();
    let mut peers: Vec<Position3> = w.terminals().iter().map(|&(_, p)| p).collect();
    peers.extend_from_slice(w.sensitive());
    let aircraft: Vec<_> = world.aircraft_ids().collect();
    let step = grid.slots_in(cfg.radio_map.local_sensing_period_s).max(1);
    let mut out = Vec::new();
    for slot in (0..grid.n_slots).step_by(step) {
        let t = grid.time(slot);
        if t >= until {
            break;
        }
        let pos: Vec<Position3> =
            aircraft.iter().map(|&id| world.realized(id, t).expect("aircraft is a world node")).collect();
        for (a, pa) in pos.iter().enumerate() {
            for pb in peers.iter().chain(&pos[a + 1..]) {
                if pa != pb {
                    out.push(truth.sample(*pa, *pb));
                }
            }
        }
    }
    out
}

/// Runs `n_trials` forecast trials spread over `n_epochs` epochs.
pub fn echelon_study(
    cfg: &ScenarioConfig,
    w: &SimWorld,
    leads: &[f64],
    n_trials: usize,
    n_epochs: usize,
    seed: u64,
) -> Result<EchelonStudy, HarnessError> {
    if n_trials == 0 || n_epochs == 0 || leads.is_empty() {
        return Err(HarnessError::ConfigInvalid("echelon study needs trials, epochs and leads".into()));
    }
    let grid = &cfg.grid;
    let max_lead = leads.iter().copied().fold(0.0, f64::max);
    let span = grid.time(grid.n_slots - 1) - max_lead - grid.t0;
    if span <= 0.0 {
        return Err(HarnessError::ConfigInvalid("leads exceed the mission".into()));
    }
    let survey = w.map().samples().to_vec();
    let rm = &cfg.radio_map;
    let mut trials = Vec::new();
    let mut rows_cfg = ErrorReportConfig {
        leads: leads.to_vec(),
        horizons: cfg.horizons,
        local_radius: cfg.tactical.local_radius_m,
        coherence_s: cfg.tactical.coherence_s,
        now: None,
    };
    for e in 0..n_epochs {
        let now = grid.time(grid.slot_at(grid.t0 + span * (e + 1) as f64 / n_epochs as f64));
        let mut samples = survey.clone();
        samples.extend(mission_samples(cfg, w, now));
        let fresh = RadioMap::build(&samples, rm.idw_exponent, rm.k_neighbors, now)
            .map_err(|err| HarnessError::Infeasible(format!("fresh map: {err}")))?
            .with_residual_std(rm.residual_std_db);
        let central = MapSnapshot { map: w.map().clone(), staleness_s: now - grid.t0 };
        let fresh = MapSnapshot { map: Arc::new(fresh), staleness_s: 0.0 };
        rows_cfg.now = Some(now);
        let n = n_trials / n_epochs + usize::from(e < n_trials % n_epochs);
        if n == 0 {
            continue;
        }
        let epoch_seed = rng::derive_seed(seed, rng::TRIALS, e as u64);
        trials.extend(
            forecast_errors(w.world(), &central, &fresh, &rows_cfg, n, epoch_seed)
                .map_err(|err| HarnessError::Infeasible(err.to_string()))?,
        );
    }
    Ok(EchelonStudy { rows: rmse_rows(&trials, leads), trials })
}
