//! Everything that is fixed for one seed and shared by every method and
//! load: the true channel, realized flights, the survey radio map, the
//! planned channel graph and its interference exposure.

use std::sync::Arc;

use super::{HarnessError, ScenarioConfig};
use crate::channel_graph::{ChannelGraph, NodeTrack};
use crate::echelon::{MapSnapshot, World};
use crate::operational::InterferenceLimit;
use crate::radio_env::{ChannelSample, GroundTruth, RadioMap};
use crate::rng;
use crate::scene::{NodeId, Position3};
use crate::strategic::{Exposure, PowerCeiling};
use crate::trajectory::{offset_position, ou_offsets};

#[derive(Debug, Clone)]
pub struct SimWorld {
    seed: u64,
    world: World,
    map: Arc<RadioMap>,
    graph: ChannelGraph,
    exposure: Exposure,
    ceiling: PowerCeiling,
    limits: Vec<InterferenceLimit>,
    sensitive: Vec<Position3>,
    terminals: Vec<(NodeId, Position3)>,
}

/// Measurements from a pre-mission survey flight along the filed plans.
/// The survey aircraft deviate from the plan with their own realization.
pub fn survey_samples(cfg: &ScenarioConfig, truth: &GroundTruth, seed: u64) -> Vec<ChannelSample> {
    let grid = &cfg.grid;
    let survey_seed = rng::derive_seed(seed, rng::SURVEY, 0);
    let offsets: Vec<Vec<[f64; 3]>> =
        cfg.trajectories.iter().map(|t| ou_offsets(t.aircraft_id(), &cfg.deviation, grid, survey_seed)).collect();
    let mut peers: Vec<Position3> = cfg.terminals().into_iter().map(|(_, p)| p).collect();
    peers.extend(cfg.sensitive_positions());

    let mut out = Vec::new();
    for (a, pa) in peers.iter().enumerate() {
        for pb in &peers[a + 1..] {
            if pa != pb {
                out.push(truth.sample(*pa, *pb));
            }
        }
    }
    let step = grid.slots_in(cfg.radio_map.survey_period_s).max(1);
    for slot in (0..grid.n_slots).step_by(step) {
        let t = grid.time(slot);
        let pos: Vec<Position3> = cfg
            .trajectories
            .iter()
            .zip(&offsets)
            .map(|(tr, off)| offset_position(tr.position_at(t), off[slot]))
            .collect();
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

impl SimWorld {
    pub fn build(cfg: &ScenarioConfig, seed: u64) -> Result<Self, HarnessError> {
        cfg.validate()?;
        let scene = Arc::new(cfg.scene.clone());
        let truth = GroundTruth::new(scene, cfg.path_loss.clone(), rng::derive_seed(seed, rng::SHADOW, 0));
        let mut world = World::new(truth.clone(), cfg.grid, cfg.deviation);
        for tr in &cfg.trajectories {
            world.add_aircraft(tr.clone(), seed);
        }
        let terminals = cfg.terminals();
        for &(id, p) in &terminals {
            world.add_ground(id, p);
        }
        let rm = &cfg.radio_map;
        let samples = survey_samples(cfg, &truth, seed);
        let map = RadioMap::build(&samples, rm.idw_exponent, rm.k_neighbors, cfg.grid.t0)
            .map_err(|e| HarnessError::Infeasible(format!("radio map: {e}")))?
            .with_residual_std(rm.residual_std_db);
        let tracks: Vec<NodeTrack> = cfg
            .trajectories
            .iter()
            .map(NodeTrack::Aircraft)
            .chain(terminals.iter().map(|&(id, p)| NodeTrack::Ground(id, p)))
            .collect();
        let graph = ChannelGraph::synthesize(&tracks, &map, cfg.grid, rm.range_cutoff_m)
            .map_err(|e| HarnessError::ConfigInvalid(format!("graph: {e}")))?;
        let sensitive = cfg.sensitive_positions();
        let exposure = Exposure::compute(&graph, &map, &sensitive);
        let limits: Vec<InterferenceLimit> =
            sensitive.iter().map(|&pos| InterferenceLimit { pos, cap_dbm: cfg.sensitive_cap_dbm }).collect();
        let ceiling = PowerCeiling::compute(&graph, &map, &limits, &cfg.budget);
        Ok(Self { seed, world, map: Arc::new(map), graph, exposure, ceiling, limits, sensitive, terminals })
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }

    pub fn world(&self) -> &World {
        &self.world
    }

    pub fn map(&self) -> &Arc<RadioMap> {
        &self.map
    }

    pub fn snapshot(&self) -> MapSnapshot {
        MapSnapshot { map: self.map.clone(), staleness_s: 0.0 }
    }

    pub fn graph(&self) -> &ChannelGraph {
        &self.graph
    }

    pub fn exposure(&self) -> &Exposure {
        &self.exposure
    }

    /// Cap ceiling per node and slot along the planned tracks.
    pub fn ceiling(&self) -> &PowerCeiling {
        &self.ceiling
    }

    pub fn limits(&self) -> &[InterferenceLimit] {
        &self.limits
    }

    pub fn sensitive(&self) -> &[Position3] {
        &self.sensitive
    }

    pub fn terminals(&self) -> &[(NodeId, Position3)] {
        &self.terminals
    }
}
