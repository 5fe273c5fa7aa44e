//! Cluster-level refinement of strategic reservations.
//!
//! A tactical instance sees the local view only: realized positions inside
//! its region and forecasts from the fresh map. It flags hops whose forecast
//! never clears the feasibility threshold, replaces them with a detour of at
//! most two hops, and re-times every hop into the best slots of its window.

use std::collections::{BTreeMap, BTreeSet, HashMap};
use std::io::Write;
use std::sync::Arc;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::db_to_lin;
use crate::echelon::{forecast_mean_db, EchelonError, EchelonView, Tier, World};
use crate::operational::{required_power_dbm, LinkBudget};
use crate::radio_env::RadioMap;
use crate::scene::{NodeId, Position3};
use crate::strategic::{HopReservation, SlotWindow};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum TacticalError {
    #[error("no local detour around {0} -> {1}; strategic replanning needed")]
    EscalateToStrategic(NodeId, NodeId),
    #[error("no slot assignment satisfies precedence within the windows")]
    InfeasibleSchedule,
    #[error("tactical decisions need the local view, got {0:?}")]
    WrongTier(Tier),
    #[error("blocked link {0}-{1} is not between cluster members")]
    NotAMember(NodeId, NodeId),
    #[error("route and windows disagree: {0}")]
    BadInput(String),
    #[error(transparent)]
    Echelon(#[from] EchelonError),
}

fn pair(a: NodeId, b: NodeId) -> (NodeId, NodeId) {
    if a <= b {
        (a, b)
    } else {
        (b, a)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Member {
    pub pos: Position3,
    /// Aircraft may relay; ground terminals may not.
    pub can_relay: bool,
}

#[derive(Debug, Clone)]
pub struct LocalCluster {
    members: BTreeMap<NodeId, Member>,
    blocked: BTreeSet<(NodeId, NodeId)>,
    map: Arc<RadioMap>,
}

impl LocalCluster {
    pub fn new(members: BTreeMap<NodeId, Member>, map: Arc<RadioMap>) -> Self {
        Self { members, blocked: BTreeSet::new(), map }
    }

    /// Members are the nodes whose realized position at the view's time is
    /// inside its region.
    pub fn gather(view: &EchelonView, world: &World) -> Result<Self, TacticalError> {
        if view.tier() != Tier::Local {
            return Err(TacticalError::WrongTier(view.tier()));
        }
        let region = view.region().expect("local views carry a region");
        let mut members = BTreeMap::new();
        for id in world.node_ids() {
            let pos = world.realized(id, view.now())?;
            if region.contains(&pos) {
                members.insert(id, Member { pos, can_relay: world.is_aircraft(id) });
            }
        }
        Ok(Self::new(members, Arc::new(view.map().clone())))
    }

    pub fn members(&self) -> &BTreeMap<NodeId, Member> {
        &self.members
    }

    pub fn contains(&self, id: NodeId) -> bool {
        self.members.contains_key(&id)
    }

    pub fn map(&self) -> &RadioMap {
        &self.map
    }

    pub fn mark_blocked(&mut self, a: NodeId, b: NodeId) -> Result<(), TacticalError> {
        if !(self.contains(a) && self.contains(b)) {
            return Err(TacticalError::NotAMember(a, b));
        }
        self.blocked.insert(pair(a, b));
        Ok(())
    }

    pub fn is_blocked(&self, a: NodeId, b: NodeId) -> bool {
        self.blocked.contains(&pair(a, b))
    }

    pub fn blocked(&self) -> impl Iterator<Item = &(NodeId, NodeId)> {
        self.blocked.iter()
    }
}

/// Local large-scale forecasts over the slots a tactical instance handles.
pub trait LocalSlice {
    /// Forecast mean gain, `None` where the view has no forecast.
    fn gain_db(&self, i: NodeId, j: NodeId, slot: usize) -> Option<f64>;
    /// Summed linear gain from `i` to the sensitive nodes.
    fn exposure(&self, i: NodeId, slot: usize) -> f64;
    fn dt(&self) -> f64;
}

/// A [`LocalSlice`] backed by explicit tables.
#[derive(Debug, Clone, Default)]
pub struct TableSlice {
    dt: f64,
    gains: HashMap<((NodeId, NodeId), usize), f64>,
    exposure: HashMap<(NodeId, usize), f64>,
}

impl TableSlice {
    pub fn new(dt: f64) -> Self {
        Self { dt, ..Default::default() }
    }

    pub fn set_gain(&mut self, i: NodeId, j: NodeId, slot: usize, gain_db: f64) {
        self.gains.insert((pair(i, j), slot), gain_db);
    }

    pub fn set_exposure(&mut self, i: NodeId, slot: usize, lin: f64) {
        self.exposure.insert((i, slot), lin);
    }
}

impl LocalSlice for TableSlice {
    fn gain_db(&self, i: NodeId, j: NodeId, slot: usize) -> Option<f64> {
        self.gains.get(&(pair(i, j), slot)).copied()
    }

    fn exposure(&self, i: NodeId, slot: usize) -> f64 {
        self.exposure.get(&(i, slot)).copied().unwrap_or(0.0)
    }

    fn dt(&self) -> f64 {
        self.dt
    }
}

/// True iff the local forecast stays strictly below `gain_threshold_db` at
/// every slot of the hop's window. Slots without a forecast count as below.
pub fn detect_blockage(
    view: &EchelonView,
    world: &World,
    hop: &HopReservation,
    gain_threshold_db: f64,
) -> Result<bool, TacticalError> {
    if view.tier() != Tier::Local {
        return Err(TacticalError::WrongTier(view.tier()));
    }
    let grid = world.grid();
    let mut best = f64::NEG_INFINITY;
    for t in hop.window.slots() {
        match forecast_mean_db(view, world, hop.tx, hop.rx, grid.time(t)) {
            Ok(g) => best = best.max(g),
            Err(EchelonError::OutOfRange { .. } | EchelonError::OutOfRegion(..)) => {}
            Err(e) => return Err(e.into()),
        }
    }
    Ok(best < gain_threshold_db)
}

/// Predicted interference of sending `i -> j` in each slot of `slots`;
/// `None` where the link is unusable.
fn hop_costs(
    slice: &impl LocalSlice,
    budget: &LinkBudget,
    i: NodeId,
    j: NodeId,
    slots: std::ops::RangeInclusive<usize>,
) -> Vec<Option<f64>> {
    slots
        .map(|t| {
            let g = slice.gain_db(i, j, t)?;
            let p = required_power_dbm(g, budget);
            (p <= budget.p_max_dbm).then(|| db_to_lin(p) * slice.exposure(i, t) * slice.dt())
        })
        .collect()
}

/// Replaces the first hop of `directive` (`a -> b -> next -> ...`) when the
/// cluster marks it blocked.
///
/// Candidates are the direct link `a -> next` and two-hop detours
/// `a -> m -> next` through relaying members (`a -> m -> b` when `b` is the
/// last node). The detour must fit, in order, into `span`. The one with the
/// least predicted interference wins; ties go to fewer hops, then smaller
/// relay id. Links the cluster marks blocked are never used.
pub fn reroute_local(
    cluster: &LocalCluster,
    directive: &[NodeId],
    span: SlotWindow,
    slice: &impl LocalSlice,
    budget: &LinkBudget,
) -> Result<Vec<NodeId>, TacticalError> {
    if directive.len() < 2 {
        return Err(TacticalError::BadInput("directive needs at least one hop".into()));
    }
    let (a, b) = (directive[0], directive[1]);
    if !cluster.is_blocked(a, b) {
        return Ok(directive.to_vec());
    }
    let (target, rest) = if directive.len() > 2 { (directive[2], &directive[3..]) } else { (b, &directive[2..]) };
    let usable = |x: NodeId, y: NodeId| x != y && !cluster.is_blocked(x, y);

    // (cost, hops, relay) of the best candidate so far
    let mut best: Option<(f64, usize, Option<NodeId>)> = None;
    let mut consider = |cost: f64, hops: usize, relay: Option<NodeId>| {
        let better = match best {
            None => true,
            Some((c, h, r)) => cost.total_cmp(&c).then(hops.cmp(&h)).then(relay.cmp(&r)).is_lt(),
        };
        if better {
            best = Some((cost, hops, relay));
        }
    };

    if target != b && usable(a, target) {
        if let Some(c) = hop_costs(slice, budget, a, target, span.slots()).into_iter().flatten().min_by(f64::total_cmp)
        {
            consider(c, 1, None);
        }
    }
    for (&m, info) in cluster.members() {
        if !info.can_relay || m == a || m == b || m == target || !usable(a, m) || !usable(m, target) {
            continue;
        }
        let first = hop_costs(slice, budget, a, m, span.slots());
        let second = hop_costs(slice, budget, m, target, span.slots());
        // suffix minimum of the second hop so the pair keeps precedence
        let mut suffix = vec![None; second.len() + 1];
        for k in (0..second.len()).rev() {
            suffix[k] = match (second[k], suffix[k + 1]) {
                (Some(x), Some(y)) => Some(f64::min(x, y)),
                (x, y) => x.or(y),
            };
        }
        let cost =
            first.iter().enumerate().filter_map(|(k, c)| Some(c.as_ref()? + suffix[k + 1]?)).min_by(f64::total_cmp);
        if let Some(c) = cost {
            consider(c, 2, Some(m));
        }
    }

    let (_, _, relay) = best.ok_or(TacticalError::EscalateToStrategic(a, b))?;
    let mut route = vec![a];
    route.extend(relay);
    route.push(target);
    route.extend_from_slice(rest);
    Ok(route)
}

/// Chosen transmit slot per hop of `route`.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Schedule {
    pub route: Vec<NodeId>,
    pub slots: Vec<usize>,
}

impl Schedule {
    /// Precedence, window membership and the last allowed slot.
    pub fn check(&self, windows: &[SlotWindow], last_slot: usize) -> Result<(), String> {
        if self.slots.len() + 1 != self.route.len() || self.slots.len() != windows.len() {
            return Err("route, slots and windows have inconsistent lengths".into());
        }
        for (k, (&t, w)) in self.slots.iter().zip(windows).enumerate() {
            if !w.contains(t) {
                return Err(format!("hop {k} slot {t} outside its window"));
            }
            if t > last_slot {
                return Err(format!("hop {k} slot {t} after the deadline"));
            }
            if k > 0 && self.slots[k - 1] >= t {
                return Err(format!("hop {k} does not follow hop {}", k - 1));
            }
        }
        Ok(())
    }

    /// Forecast gain sum in hop order, if every slot has a forecast.
    pub fn gain_sum(&self, slice: &impl LocalSlice) -> Option<f64> {
        let mut s = 0.0;
        for (k, &t) in self.slots.iter().enumerate() {
            s += slice.gain_db(self.route[k], self.route[k + 1], t)?;
        }
        Some(s)
    }
}

/// Sum over hops of the minimum outage-compliant power in dBm.
pub fn power_sum_dbm(schedule: &Schedule, slice: &impl LocalSlice, budget: &LinkBudget) -> Option<f64> {
    let mut s = 0.0;
    for (k, &t) in schedule.slots.iter().enumerate() {
        s += required_power_dbm(slice.gain_db(schedule.route[k], schedule.route[k + 1], t)?, budget);
    }
    Some(s)
}

/// Picks one slot per hop maximizing the summed forecast gain (dB),
/// subject to hop order and window membership, with every slot at or before
/// `last_slot`. Ties resolve to the earliest last slot, then the earliest
/// earlier slots.
pub fn schedule_timing(
    route: &[NodeId],
    windows: &[SlotWindow],
    slice: &impl LocalSlice,
    last_slot: usize,
) -> Result<Schedule, TacticalError> {
    if route.len() != windows.len() + 1 {
        return Err(TacticalError::BadInput(format!("{} nodes but {} windows", route.len(), windows.len())));
    }
    if windows.is_empty() {
        return Ok(Schedule { route: route.to_vec(), slots: Vec::new() });
    }
    // per hop: (slot, score, back-pointer into previous hop's candidates)
    let mut layers: Vec<Vec<(usize, f64, usize)>> = Vec::with_capacity(windows.len());
    for (k, w) in windows.iter().enumerate() {
        let hi = w.end.min(last_slot);
        let mut layer = Vec::new();
        // running earliest argmax over the previous layer for slots < t
        let mut cursor = 0;
        let mut best_prev: Option<(f64, usize)> = None;
        for t in w.start..=hi {
            let Some(g) = slice.gain_db(route[k], route[k + 1], t) else { continue };
            if k == 0 {
                layer.push((t, 0.0 + g, usize::MAX));
                continue;
            }
            let prev = &layers[k - 1];
            while cursor < prev.len() && prev[cursor].0 < t {
                if best_prev.is_none_or(|(s, _)| prev[cursor].1 > s) {
                    best_prev = Some((prev[cursor].1, cursor));
                }
                cursor += 1;
            }
            if let Some((s, idx)) = best_prev {
                layer.push((t, s + g, idx));
            }
        }
        if layer.is_empty() {
            return Err(TacticalError::InfeasibleSchedule);
        }
        layers.push(layer);
    }
    let last = layers.last().unwrap();
    let mut idx = 0;
    for (c, e) in last.iter().enumerate() {
        if e.1 > last[idx].1 {
            idx = c;
        }
    }
    let mut slots = vec![0; windows.len()];
    for k in (0..windows.len()).rev() {
        let (t, _, back) = layers[k][idx];
        slots[k] = t;
        idx = back;
    }
    Ok(Schedule { route: route.to_vec(), slots })
}

/// One line of the tactical event stream.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ScheduleRecord {
    pub flow_id: usize,
    pub hop: usize,
    pub slot: usize,
    pub route_revision: usize,
}

impl ScheduleRecord {
    pub fn from_schedule(flow_id: usize, revision: usize, schedule: &Schedule) -> Vec<Self> {
        schedule
            .slots
            .iter()
            .enumerate()
            .map(|(hop, &slot)| Self { flow_id, hop, slot, route_revision: revision })
            .collect()
    }
}

pub fn write_schedule_jsonl<W: Write>(mut w: W, records: &[ScheduleRecord]) -> std::io::Result<()> {
    for r in records {
        serde_json::to_writer(&mut w, r)?;
        w.write_all(b"\n")?;
    }
    Ok(())
}
