//! Spatio-temporal channel graph: planned positions of every node at every
//! slot, mapped through the radio map to a predicted gain per node pair.
//!
//! The graph is a memoization of `map.query(position_at(i, t), position_at(j, t))`.
//! Pairs farther apart than the range cutoff have no edge.

use std::collections::BTreeMap;
use std::io::Write;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::radio_env::{LargeScaleStats, RadioMap};
use crate::scene::{NodeId, Position3};
use crate::trajectory::Trajectory4D;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum GraphError {
    #[error("unknown node {0}")]
    UnknownNode(NodeId),
    #[error("a link needs two distinct nodes, got {0} twice")]
    SelfLink(NodeId),
    #[error("invalid slot grid: {0}")]
    BadGrid(String),
    #[error("duplicate node id {0}")]
    DuplicateNode(NodeId),
}

/// Discrete time axis: slot `k` starts at `t0 + k dt`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SlotGrid {
    pub t0: f64,
    pub dt: f64,
    pub n_slots: usize,
}

impl SlotGrid {
    pub fn new(t0: f64, dt: f64, n_slots: usize) -> Result<Self, GraphError> {
        if !(dt > 0.0 && dt.is_finite() && t0.is_finite()) {
            return Err(GraphError::BadGrid("dt must be positive and finite".into()));
        }
        if n_slots == 0 {
            return Err(GraphError::BadGrid("at least one slot is required".into()));
        }
        Ok(Self { t0, dt, n_slots })
    }

    #[inline]
    pub fn time(&self, slot: usize) -> f64 {
        self.t0 + slot as f64 * self.dt
    }

    /// Total covered duration, `n_slots * dt`.
    pub fn horizon(&self) -> f64 {
        self.n_slots as f64 * self.dt
    }

    /// Slot containing time `t`, clamped to the grid.
    pub fn slot_at(&self, t: f64) -> usize {
        let k = ((t - self.t0) / self.dt + 1e-9).floor();
        (k.max(0.0) as usize).min(self.n_slots - 1)
    }

    /// Whole slots that fit in `seconds` (tolerant to float error).
    pub fn slots_in(&self, seconds: f64) -> usize {
        (seconds / self.dt + 1e-9).floor().max(0.0) as usize
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum NodeKind {
    Aircraft,
    Ground,
}

/// A node of the graph together with where it is planned to be.
#[derive(Debug, Clone)]
pub enum NodeTrack<'a> {
    Aircraft(&'a Trajectory4D),
    Ground(NodeId, Position3),
}

/// Time-indexed weighted graph of predicted link gains.
#[derive(Debug, Clone)]
pub struct ChannelGraph {
    grid: SlotGrid,
    ids: Vec<NodeId>,
    kinds: Vec<NodeKind>,
    index: BTreeMap<NodeId, usize>,
    /// `positions[node * n_slots + slot]`
    positions: Vec<Position3>,
    /// `stats[(slot * n + i) * n + j]`; NaN mean marks a missing edge.
    stats: Vec<LargeScaleStats>,
    range_cutoff: f64,
}

/// Per-slot forecast for one link; `None` where the link has no edge.
#[derive(Debug, Clone, PartialEq)]
pub struct LinkForecast {
    pub pair: (NodeId, NodeId),
    pub slots: Vec<Option<LargeScaleStats>>,
}

impl LinkForecast {
    pub fn means(&self) -> Vec<Option<f64>> {
        self.slots.iter().map(|s| s.map(|s| s.mean_gain_db)).collect()
    }

    pub fn available_slots(&self) -> usize {
        self.slots.iter().filter(|s| s.is_some()).count()
    }
}

const MISSING: LargeScaleStats = LargeScaleStats { mean_gain_db: f64::NAN, shadow_std_db: 0.0, los_prob: 0.0 };

/// Builds the graph from aircraft plans and static ground nodes.
pub fn synthesize(
    trajs: &[Trajectory4D],
    ground_nodes: &[(NodeId, Position3)],
    map: &RadioMap,
    grid: SlotGrid,
    range_cutoff: f64,
) -> Result<ChannelGraph, GraphError> {
    let tracks: Vec<NodeTrack> = trajs
        .iter()
        .map(NodeTrack::Aircraft)
        .chain(ground_nodes.iter().map(|&(id, p)| NodeTrack::Ground(id, p)))
        .collect();
    ChannelGraph::synthesize(&tracks, map, grid, range_cutoff)
}

impl ChannelGraph {
    pub fn synthesize(
        tracks: &[NodeTrack],
        map: &RadioMap,
        grid: SlotGrid,
        range_cutoff: f64,
    ) -> Result<Self, GraphError> {
        let mut entries: Vec<(NodeId, NodeKind, &NodeTrack)> = tracks
            .iter()
            .map(|t| match t {
                NodeTrack::Aircraft(tr) => (tr.aircraft_id(), NodeKind::Aircraft, t),
                NodeTrack::Ground(id, _) => (*id, NodeKind::Ground, t),
            })
            .collect();
        entries.sort_by_key(|e| e.0);
        let mut index = BTreeMap::new();
        for (k, e) in entries.iter().enumerate() {
            if index.insert(e.0, k).is_some() {
                return Err(GraphError::DuplicateNode(e.0));
            }
        }
        let n = entries.len();
        let ns = grid.n_slots;

        let mut positions = Vec::with_capacity(n * ns);
        for (_, _, track) in &entries {
            for s in 0..ns {
                positions.push(match track {
                    NodeTrack::Aircraft(tr) => tr.position_at(grid.time(s)),
                    NodeTrack::Ground(_, p) => *p,
                });
            }
        }

        let mut stats = vec![MISSING; ns * n * n];
        for s in 0..ns {
            for i in 0..n {
                let pi = positions[i * ns + s];
                for j in (i + 1)..n {
                    let pj = positions[j * ns + s];
                    if pi.distance(&pj) > range_cutoff {
                        continue;
                    }
                    let st = map.query(&pi, &pj);
                    stats[(s * n + i) * n + j] = st;
                    stats[(s * n + j) * n + i] = st;
                }
            }
        }

        Ok(Self {
            grid,
            ids: entries.iter().map(|e| e.0).collect(),
            kinds: entries.iter().map(|e| e.1).collect(),
            index,
            positions,
            stats,
            range_cutoff,
        })
    }

    pub fn grid(&self) -> &SlotGrid {
        &self.grid
    }

    pub fn range_cutoff(&self) -> f64 {
        self.range_cutoff
    }

    /// Node ids in ascending order; a node's index is its rank here.
    pub fn node_ids(&self) -> &[NodeId] {
        &self.ids
    }

    pub fn len(&self) -> usize {
        self.ids.len()
    }

    pub fn is_empty(&self) -> bool {
        self.ids.is_empty()
    }

    pub fn index_of(&self, id: NodeId) -> Option<usize> {
        self.index.get(&id).copied()
    }

    pub fn id_at(&self, idx: usize) -> NodeId {
        self.ids[idx]
    }

    pub fn kind_at(&self, idx: usize) -> NodeKind {
        self.kinds[idx]
    }

    pub fn kind(&self, id: NodeId) -> Option<NodeKind> {
        self.index_of(id).map(|i| self.kinds[i])
    }

    #[inline]
    pub fn position_at_idx(&self, idx: usize, slot: usize) -> Position3 {
        self.positions[idx * self.grid.n_slots + slot]
    }

    /// Planned positions of one node over every slot.
    pub fn positions_of(&self, idx: usize) -> &[Position3] {
        let ns = self.grid.n_slots;
        &self.positions[idx * ns..(idx + 1) * ns]
    }

    #[inline]
    pub fn stats_idx(&self, i: usize, j: usize, slot: usize) -> Option<LargeScaleStats> {
        let n = self.ids.len();
        let st = self.stats[(slot * n + i) * n + j];
        (!st.mean_gain_db.is_nan()).then_some(st)
    }

    #[inline]
    pub fn weight_idx(&self, i: usize, j: usize, slot: usize) -> Option<f64> {
        self.stats_idx(i, j, slot).map(|s| s.mean_gain_db)
    }

    /// Expected gain in dB of the edge `(i, j)` at `slot`, if present.
    pub fn weight(&self, i: NodeId, j: NodeId, slot: usize) -> Option<f64> {
        let (a, b) = (self.index_of(i)?, self.index_of(j)?);
        if a == b || slot >= self.grid.n_slots {
            return None;
        }
        self.weight_idx(a, b, slot)
    }

    pub fn link_forecast(&self, i: NodeId, j: NodeId) -> Result<LinkForecast, GraphError> {
        let a = self.index_of(i).ok_or(GraphError::UnknownNode(i))?;
        let b = self.index_of(j).ok_or(GraphError::UnknownNode(j))?;
        if a == b {
            return Err(GraphError::SelfLink(i));
        }
        Ok(LinkForecast { pair: (i, j), slots: (0..self.grid.n_slots).map(|s| self.stats_idx(a, b, s)).collect() })
    }

    /// Dumps every present edge once per slot as `t,i,j,gain_db` rows.
    pub fn write_csv<W: Write>(&self, w: W) -> Result<(), csv::Error> {
        let mut wr = csv::Writer::from_writer(w);
        wr.write_record(["t", "i", "j", "gain_db"])?;
        let n = self.ids.len();
        for s in 0..self.grid.n_slots {
            for i in 0..n {
                for j in (i + 1)..n {
                    if let Some(g) = self.weight_idx(i, j, s) {
                        wr.serialize((self.grid.time(s), self.ids[i].0, self.ids[j].0, g))?;
                    }
                }
            }
        }
        wr.flush()?;
        Ok(())
    }
}

pub fn link_forecast(graph: &ChannelGraph, i: NodeId, j: NodeId) -> Result<LinkForecast, GraphError> {
    graph.link_forecast(i, j)
}
