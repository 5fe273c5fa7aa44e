//! A hand-built relay corridor for comparing delay tolerances.
//!
//! A ground source and destination 1 km apart are joined by three hovering
//! relays spaced below the link range, so any fast delivery must relay hop
//! by hop. A ferry aircraft flies the length of the corridor at about
//! 65 m/s. It is out of the source's range for the first 2 s, passes over
//! the source at about 8.5 s and comes within range of the destination at
//! about 18 s.
//! A sensitive receiver sits under the middle relay.

use std::sync::Arc;

use super::HarnessError;
use crate::channel_graph::{ChannelGraph, NodeTrack, SlotGrid};
use crate::operational::LinkBudget;
use crate::radio_env::{sample_along, GroundTruth, PathLossParams, RadioMap, SampleWindow};
use crate::rng;
use crate::scene::{NodeId, ObstacleBox, Position3, Scene};
use crate::strategic::{Exposure, PathReservation, PlanError, Planner};
use crate::trajectory::{Trajectory4D, Waypoint};

#[derive(Debug, Clone)]
pub struct Corridor {
    graph: ChannelGraph,
    map: Arc<RadioMap>,
    exposure: Exposure,
    budget: LinkBudget,
}

impl Corridor {
    pub const SOURCE: NodeId = NodeId(100);
    pub const DEST: NodeId = NodeId(200);
    pub const RELAYS: [NodeId; 3] = [NodeId(1), NodeId(2), NodeId(3)];
    pub const FERRY: NodeId = NodeId(4);
    pub const RANGE_M: f64 = 400.0;
    pub const SENSITIVE: Position3 = Position3::new(500.0, 20.0, 1.5);

    /// Builds the corridor with the shadowing field of `seed`.
    pub fn build(seed: u64) -> Result<Self, HarnessError> {
        let bounds = ObstacleBox::new(Position3::new(-300.0, -200.0, 0.0), Position3::new(1300.0, 200.0, 150.0))
            .map_err(|e| HarnessError::ConfigInvalid(e.to_string()))?;
        let grid = SlotGrid::new(0.0, 0.1, 220).map_err(|e| HarnessError::ConfigInvalid(e.to_string()))?;
        let end = grid.time(grid.n_slots - 1);
        let src = Position3::new(0.0, 0.0, 1.5);
        let dst = Position3::new(1000.0, 0.0, 1.5);

        let mut trajs: Vec<Trajectory4D> = Self::RELAYS
            .iter()
            .zip([250.0, 500.0, 750.0])
            .map(|(&id, x)| Trajectory4D::stationary(id, Position3::new(x, 0.0, 100.0), end))
            .collect();
        let ferry = Trajectory4D::new(
            Self::FERRY,
            vec![
                Waypoint::new(0.0, Position3::new(-550.0, 0.0, 60.0)),
                Waypoint::new(24.0, Position3::new(1000.0, 0.0, 60.0)),
            ],
        )
        .map_err(|e| HarnessError::ConfigInvalid(e.to_string()))?;
        trajs.push(ferry);

        let params = PathLossParams::default();
        let truth = GroundTruth::new(Arc::new(Scene::open(bounds)), params, rng::derive_seed(seed, rng::SHADOW, 0));
        let peers = [src, dst, Self::SENSITIVE];
        let mut samples =
            sample_along(&trajs, &truth, SampleWindow { t0: -0.5, horizon: end + 0.5, period: 0.5 }, &peers);
        for (k, a) in trajs.iter().enumerate() {
            for b in &trajs[k + 1..] {
                for t in (0..=(end * 2.0) as usize).map(|s| s as f64 * 0.5) {
                    samples.push(truth.sample(a.position_at(t), b.position_at(t)));
                }
            }
        }
        samples.push(truth.sample(src, dst));
        let map = RadioMap::build(&samples, 2.0, 8, 0.0).map_err(|e| HarnessError::Infeasible(e.to_string()))?;

        let tracks: Vec<NodeTrack> = trajs
            .iter()
            .map(NodeTrack::Aircraft)
            .chain([NodeTrack::Ground(Self::SOURCE, src), NodeTrack::Ground(Self::DEST, dst)])
            .collect();
        let graph = ChannelGraph::synthesize(&tracks, &map, grid, Self::RANGE_M)
            .map_err(|e| HarnessError::ConfigInvalid(e.to_string()))?;
        let exposure = Exposure::compute(&graph, &map, &[Self::SENSITIVE]);
        Ok(Self { graph, map: Arc::new(map), exposure, budget: LinkBudget::default() })
    }

    pub fn graph(&self) -> &ChannelGraph {
        &self.graph
    }

    pub fn map(&self) -> &Arc<RadioMap> {
        &self.map
    }

    pub fn planner(&self) -> Planner<'_> {
        Planner::with_exposure(&self.graph, self.exposure.clone(), self.budget)
    }

    /// Minimum-interference reservation injected at slot 0.
    pub fn reserve(&self, deadline_s: f64) -> Result<PathReservation, PlanError> {
        self.planner().reserve(Self::SOURCE, Self::DEST, 0, deadline_s, None)
    }
}
