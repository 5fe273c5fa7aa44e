//! Long-horizon path reservation on the time-expanded channel graph.
//!
//! States are `(entity, slot)`. From each state a payload can either stay
//! on its carrier for one slot (a carry edge, free) or be transmitted to
//! another node within the slot (a transmit edge). A transmit edge costs the
//! interference it is predicted to cause at the sensitive ground nodes when
//! sent at the minimum outage-compliant power.
//!
//! Every edge advances exactly one slot, so processing slots in increasing
//! order sets each label before it is expanded. With non-negative edge costs
//! this is Dijkstra's label-setting search on a layered graph.

use std::cmp::Ordering;
use std::collections::HashSet;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::channel_graph::{ChannelGraph, NodeKind};
use crate::operational::{allowed_power_dbm, required_power_dbm, InterferenceLimit, LinkBudget};
use crate::radio_env::GainModel;
use crate::scene::{NodeId, Position3};
use crate::{db_to_lin, lin_to_db};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum PlanError {
    #[error("no schedule delivers {origin} -> {dest} within the deadline")]
    NoFeasiblePath { origin: NodeId, dest: NodeId },
    #[error("unknown node {0}")]
    UnknownNode(NodeId),
    #[error("deadline {deadline_s} s is shorter than one {dt} s slot")]
    BadDeadline { deadline_s: f64, dt: f64 },
    #[error("injection slot {0} is outside the grid")]
    BadSlot(usize),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct TimeExpandedState {
    pub entity: NodeId,
    pub slot: usize,
}

/// Inclusive slot range.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct SlotWindow {
    pub start: usize,
    pub end: usize,
}

#[allow(clippy::len_without_is_empty)]
impl SlotWindow {
    pub fn new(start: usize, end: usize) -> Self {
        assert!(start <= end, "window start {start} after end {end}");
        Self { start, end }
    }

    pub fn single(slot: usize) -> Self {
        Self { start: slot, end: slot }
    }

    pub fn len(&self) -> usize {
        self.end - self.start + 1
    }

    pub fn contains(&self, slot: usize) -> bool {
        (self.start..=self.end).contains(&slot)
    }

    pub fn slots(&self) -> std::ops::RangeInclusive<usize> {
        self.start..=self.end
    }
}

/// Integrated power received by the sensitive nodes, in mW·s.
#[derive(Debug, Clone, Copy, PartialEq, PartialOrd, Default, Serialize, Deserialize)]
pub struct InterferenceCost {
    pub value_mw_s: f64,
}

impl InterferenceCost {
    pub const ZERO: Self = Self { value_mw_s: 0.0 };

    pub fn new(value_mw_s: f64) -> Self {
        debug_assert!(value_mw_s >= 0.0);
        Self { value_mw_s }
    }

    /// dB relative to 1 mW·s; `-inf` for zero.
    pub fn db(&self) -> f64 {
        lin_to_db(self.value_mw_s)
    }
}

impl std::ops::Add for InterferenceCost {
    type Output = Self;
    fn add(self, o: Self) -> Self {
        Self { value_mw_s: self.value_mw_s + o.value_mw_s }
    }
}

impl std::ops::AddAssign for InterferenceCost {
    fn add_assign(&mut self, o: Self) {
        self.value_mw_s += o.value_mw_s;
    }
}

/// One reserved hop. The payload waits at `tx` from `window.start` and is
/// sent in slot `window.end`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct HopReservation {
    pub tx: NodeId,
    pub rx: NodeId,
    pub window: SlotWindow,
    pub nominal_power_dbm: f64,
}

impl HopReservation {
    pub fn tx_slot(&self) -> usize {
        self.window.end
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PathReservation {
    pub source: NodeId,
    pub dest: NodeId,
    pub hops: Vec<HopReservation>,
    pub injection_slot: usize,
    pub delivery_slot: usize,
    pub predicted_cost: InterferenceCost,
}

impl PathReservation {
    /// Node sequence from source to destination.
    pub fn route(&self) -> Vec<NodeId> {
        let mut r = vec![self.source];
        r.extend(self.hops.iter().map(|h| h.rx));
        r
    }

    /// True when some relay holds the payload for at least one slot.
    pub fn has_carry_interval(&self) -> bool {
        self.hops.iter().skip(1).any(|h| h.window.start < h.window.end)
    }

    pub fn delay_slots(&self) -> usize {
        self.delivery_slot - self.injection_slot
    }

    /// Checks the structural invariants without reference to the planner.
    pub fn check(&self, deadline_slots: usize, p_max_dbm: f64) -> Result<(), String> {
        let mut at = self.source;
        let mut free_from = self.injection_slot;
        for (k, h) in self.hops.iter().enumerate() {
            if h.tx != at {
                return Err(format!("hop {k} starts at {} but the payload is at {at}", h.tx));
            }
            if h.window.start > h.window.end {
                return Err(format!("hop {k} window is inverted"));
            }
            if h.window.start < free_from {
                return Err(format!("hop {k} window overlaps the previous hop"));
            }
            if !(h.nominal_power_dbm <= p_max_dbm) {
                return Err(format!("hop {k} power {} dBm exceeds p_max", h.nominal_power_dbm));
            }
            at = h.rx;
            free_from = h.window.end + 1;
        }
        if at != self.dest {
            return Err(format!("route ends at {at}, not {}", self.dest));
        }
        let expected = if self.hops.is_empty() { self.injection_slot } else { free_from };
        if self.delivery_slot != expected {
            return Err(format!("delivery slot {} does not follow the last hop", self.delivery_slot));
        }
        if self.delivery_slot - self.injection_slot > deadline_slots {
            return Err("delivery misses the deadline".into());
        }
        if !(self.predicted_cost.value_mw_s >= 0.0) {
            return Err("negative predicted cost".into());
        }
        Ok(())
    }
}

/// `Σ_t Σ_g p · gain(tx(t), g) · dt` over the slots of `window`, with gains
/// from `map`. `tx_positions` is indexed by slot.
pub fn hop_interference<M: GainModel + ?Sized>(
    map: &M,
    tx_positions: &[Position3],
    power_dbm: f64,
    window: SlotWindow,
    sensitive: &[Position3],
    dt: f64,
) -> InterferenceCost {
    let p = db_to_lin(power_dbm);
    let mut total = 0.0;
    for t in window.slots() {
        total += p * node_exposure(map, &tx_positions[t], sensitive) * dt;
    }
    InterferenceCost::new(total)
}

/// `Σ_g gain_lin(tx, g)` in the order given.
pub fn node_exposure<M: GainModel + ?Sized>(map: &M, tx: &Position3, sensitive: &[Position3]) -> f64 {
    sensitive.iter().map(|g| db_to_lin(map.gain_db(tx, g))).sum()
}

/// Per node and slot, the linear gain summed over the sensitive nodes at
/// the node's planned position.
#[derive(Debug, Clone)]
pub struct Exposure {
    n_slots: usize,
    values: Vec<f64>,
}

impl Exposure {
    pub fn compute<M: GainModel + ?Sized>(graph: &ChannelGraph, map: &M, sensitive: &[Position3]) -> Self {
        let ns = graph.grid().n_slots;
        let mut values = Vec::with_capacity(graph.len() * ns);
        for i in 0..graph.len() {
            for p in graph.positions_of(i) {
                values.push(node_exposure(map, p, sensitive));
            }
        }
        Self { n_slots: ns, values }
    }

    #[inline]
    pub fn at(&self, node_idx: usize, slot: usize) -> f64 {
        self.values[node_idx * self.n_slots + slot]
    }
}

/// Per node and slot, the highest transmit power the interference caps
/// allow at the node's planned position.
#[derive(Debug, Clone)]
pub struct PowerCeiling {
    n_slots: usize,
    values: Vec<f64>,
}

impl PowerCeiling {
    pub fn compute<M: GainModel>(
        graph: &ChannelGraph,
        map: &M,
        limits: &[InterferenceLimit],
        budget: &LinkBudget,
    ) -> Self {
        let ns = graph.grid().n_slots;
        let mut values = Vec::with_capacity(graph.len() * ns);
        for i in 0..graph.len() {
            for p in graph.positions_of(i) {
                values.push(allowed_power_dbm(p, limits, map, budget));
            }
        }
        Self { n_slots: ns, values }
    }

    #[inline]
    pub fn at(&self, node_idx: usize, slot: usize) -> f64 {
        self.values[node_idx * self.n_slots + slot]
    }
}

/// Transmit slots already claimed by admitted reservations.
#[derive(Debug, Clone, Default)]
pub struct Occupancy {
    busy: HashSet<(NodeId, usize)>,
}

impl Occupancy {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn is_free(&self, node: NodeId, slot: usize) -> bool {
        !self.busy.contains(&(node, slot))
    }

    pub fn claim(&mut self, node: NodeId, slot: usize) {
        self.busy.insert((node, slot));
    }

    /// Marks both ends of every hop busy in its transmit slot.
    pub fn reserve(&mut self, r: &PathReservation) {
        for h in &r.hops {
            self.claim(h.tx, h.tx_slot());
            self.claim(h.rx, h.tx_slot());
        }
    }

    pub fn len(&self) -> usize {
        self.busy.len()
    }

    pub fn is_empty(&self) -> bool {
        self.busy.is_empty()
    }
}

#[derive(Debug, Clone)]
struct Label {
    cost: f64,
    hops: usize,
    route: Vec<NodeId>,
    /// How the state was entered: previous node, and the power if the step
    /// was a transmission.
    from: Option<(usize, Option<f64>)>,
}

fn better(a: &Label, b: &Label) -> bool {
    a.cost.total_cmp(&b.cost).then(a.hops.cmp(&b.hops)).then_with(|| a.route.cmp(&b.route)) == Ordering::Less
}

/// A search problem on node indices of `graph`.
#[derive(Debug, Clone, Copy)]
pub struct SearchSpec {
    pub source: usize,
    pub dest: usize,
    pub injection_slot: usize,
    pub deadline_slots: usize,
    /// Cost of holding the payload for one slot.
    pub carry_cost: f64,
}

/// A raw hop: tx index, rx index, transmit slot, power.
pub type RawHop = (usize, usize, usize, f64);

/// Minimum-cost schedule in the time-expanded graph.
///
/// `edge(i, j, t)` returns `(cost, power_dbm)` for a feasible transmission
/// from `i` to `j` in slot `t`. Relays are aircraft; the source and
/// destination take part as endpoints, and only the source (and aircraft)
/// may hold the payload. Returns hops, cost and delivery slot.
pub fn search<F>(graph: &ChannelGraph, spec: &SearchSpec, mut edge: F) -> Option<(Vec<RawHop>, f64, usize)>
where
    F: FnMut(usize, usize, usize) -> Option<(f64, f64)>,
{
    assert!(spec.carry_cost >= 0.0, "label setting needs non-negative carry cost");
    let n = graph.len();
    let ns = graph.grid().n_slots;
    let (s, d, t0) = (spec.source, spec.dest, spec.injection_slot);
    if s == d {
        return Some((Vec::new(), 0.0, t0));
    }
    let last = (t0 + spec.deadline_slots).min(ns - 1);
    let width = last - t0 + 1;
    let in_net = |i: usize| i == s || i == d || graph.kind_at(i) == NodeKind::Aircraft;
    let can_hold = |i: usize| i == s || graph.kind_at(i) == NodeKind::Aircraft;

    let mut labels: Vec<Option<Label>> = vec![None; n * width];
    let at = |i: usize, t: usize| i * width + (t - t0);
    labels[at(s, t0)] = Some(Label { cost: 0.0, hops: 0, route: vec![graph.id_at(s)], from: None });

    for t in t0..last {
        for i in 0..n {
            if i == d {
                continue;
            }
            let Some(cur) = labels[at(i, t)].clone() else { continue };
            let offer = |j: usize, cand: Label, labels: &mut Vec<Option<Label>>| {
                let slot = &mut labels[at(j, t + 1)];
                if slot.as_ref().is_none_or(|old| better(&cand, old)) {
                    *slot = Some(cand);
                }
            };
            if can_hold(i) {
                let cand = Label {
                    cost: cur.cost + spec.carry_cost,
                    hops: cur.hops,
                    route: cur.route.clone(),
                    from: Some((i, None)),
                };
                offer(i, cand, &mut labels);
            }
            for j in 0..n {
                if j == i || !in_net(j) {
                    continue;
                }
                if let Some((c, p)) = edge(i, j, t) {
                    debug_assert!(c >= 0.0, "negative edge cost");
                    let mut route = cur.route.clone();
                    route.push(graph.id_at(j));
                    let cand = Label { cost: cur.cost + c, hops: cur.hops + 1, route, from: Some((i, Some(p))) };
                    offer(j, cand, &mut labels);
                }
            }
        }
    }

    // best arrival at the destination: cost, hops, earlier delivery, route
    let mut best: Option<(usize, &Label)> = None;
    for t in (t0 + 1)..=last {
        if let Some(l) = &labels[at(d, t)] {
            let replace = match best {
                None => true,
                Some((bt, b)) => {
                    l.cost
                        .total_cmp(&b.cost)
                        .then(l.hops.cmp(&b.hops))
                        .then(t.cmp(&bt))
                        .then_with(|| l.route.cmp(&b.route))
                        == Ordering::Less
                }
            };
            if replace {
                best = Some((t, l));
            }
        }
    }
    let (delivery, label) = best?;
    let cost = label.cost;

    let mut hops = Vec::new();
    let (mut i, mut t) = (d, delivery);
    while t > t0 {
        let l = labels[at(i, t)].as_ref().expect("predecessor label exists");
        let (prev, power) = l.from.expect("non-root label has a predecessor");
        if let Some(p) = power {
            hops.push((prev, i, t - 1, p));
        }
        i = prev;
        t -= 1;
    }
    debug_assert_eq!(i, s);
    hops.reverse();
    Some((hops, cost, delivery))
}

fn assemble(
    graph: &ChannelGraph,
    source: NodeId,
    dest: NodeId,
    injection_slot: usize,
    raw: &[RawHop],
    delivery_slot: usize,
    cost: InterferenceCost,
) -> PathReservation {
    let mut hops = Vec::with_capacity(raw.len());
    let mut free_from = injection_slot;
    for &(i, j, t, p) in raw {
        hops.push(HopReservation {
            tx: graph.id_at(i),
            rx: graph.id_at(j),
            window: SlotWindow::new(free_from, t),
            nominal_power_dbm: p,
        });
        free_from = t + 1;
    }
    PathReservation { source, dest, hops, injection_slot, delivery_slot, predicted_cost: cost }
}

/// Everything a reservation needs besides the flow itself.
#[derive(Debug, Clone)]
pub struct Planner<'a> {
    graph: &'a ChannelGraph,
    exposure: Exposure,
    budget: LinkBudget,
    ceiling: Option<PowerCeiling>,
}

impl<'a> Planner<'a> {
    pub fn new<M: GainModel + ?Sized>(
        graph: &'a ChannelGraph,
        map: &M,
        sensitive: &[Position3],
        budget: LinkBudget,
    ) -> Self {
        Self { graph, exposure: Exposure::compute(graph, map, sensitive), budget, ceiling: None }
    }

    /// Reuses an exposure table computed for `graph`.
    pub fn with_exposure(graph: &'a ChannelGraph, exposure: Exposure, budget: LinkBudget) -> Self {
        Self { graph, exposure, budget, ceiling: None }
    }

    /// Also rejects transmissions above the per-node cap ceiling.
    pub fn with_ceiling(mut self, ceiling: PowerCeiling) -> Self {
        self.ceiling = Some(ceiling);
        self
    }

    pub fn graph(&self) -> &ChannelGraph {
        self.graph
    }

    pub fn exposure(&self) -> &Exposure {
        &self.exposure
    }

    pub fn budget(&self) -> &LinkBudget {
        &self.budget
    }

    fn spec(
        &self,
        source: NodeId,
        dest: NodeId,
        injection_slot: usize,
        deadline_s: f64,
        carry_cost: f64,
    ) -> Result<SearchSpec, PlanError> {
        let grid = self.graph.grid();
        let s = self.graph.index_of(source).ok_or(PlanError::UnknownNode(source))?;
        let d = self.graph.index_of(dest).ok_or(PlanError::UnknownNode(dest))?;
        if !(deadline_s >= grid.dt) {
            return Err(PlanError::BadDeadline { deadline_s, dt: grid.dt });
        }
        if injection_slot >= grid.n_slots {
            return Err(PlanError::BadSlot(injection_slot));
        }
        Ok(SearchSpec { source: s, dest: d, injection_slot, deadline_slots: grid.slots_in(deadline_s), carry_cost })
    }

    /// Nominal power of a transmission `i -> j` in slot `t`, if the link
    /// exists and the outage target is reachable within `p_max` (and the
    /// ceiling, when one is set).
    pub fn nominal_power(&self, i: usize, j: usize, t: usize) -> Option<f64> {
        let g = self.graph.weight_idx(i, j, t)?;
        let p = required_power_dbm(g, &self.budget);
        let limit = self.ceiling.as_ref().map_or(self.budget.p_max_dbm, |c| c.at(i, t).min(self.budget.p_max_dbm));
        (p <= limit).then_some(p)
    }

    /// Predicted interference of sending from node `i` in slot `t`.
    pub fn edge_cost(&self, i: usize, t: usize, power_dbm: f64) -> f64 {
        db_to_lin(power_dbm) * self.exposure.at(i, t) * self.graph.grid().dt
    }

    fn usable(&self, occ: Option<&Occupancy>, i: usize, j: usize, t: usize) -> bool {
        occ.is_none_or(|o| o.is_free(self.graph.id_at(i), t) && o.is_free(self.graph.id_at(j), t))
    }

    /// Minimum-interference reservation delivering within `deadline_s`.
    pub fn reserve(
        &self,
        source: NodeId,
        dest: NodeId,
        injection_slot: usize,
        deadline_s: f64,
        occupancy: Option<&Occupancy>,
    ) -> Result<PathReservation, PlanError> {
        let spec = self.spec(source, dest, injection_slot, deadline_s, 0.0)?;
        let (raw, cost, delivery) = search(self.graph, &spec, |i, j, t| {
            if !self.usable(occupancy, i, j, t) {
                return None;
            }
            let p = self.nominal_power(i, j, t)?;
            Some((self.edge_cost(i, t, p), p))
        })
        .ok_or(PlanError::NoFeasiblePath { origin: source, dest })?;
        Ok(assemble(self.graph, source, dest, injection_slot, &raw, delivery, InterferenceCost::new(cost)))
    }

    /// Earliest-delivery reservation, blind to interference. The reported
    /// cost is still the predicted interference of the chosen schedule.
    pub fn fastest(
        &self,
        source: NodeId,
        dest: NodeId,
        injection_slot: usize,
        deadline_s: f64,
        occupancy: Option<&Occupancy>,
    ) -> Result<PathReservation, PlanError> {
        let spec = self.spec(source, dest, injection_slot, deadline_s, 1.0)?;
        let (raw, _, delivery) = search(self.graph, &spec, |i, j, t| {
            if !self.usable(occupancy, i, j, t) {
                return None;
            }
            self.nominal_power(i, j, t).map(|p| (1.0, p))
        })
        .ok_or(PlanError::NoFeasiblePath { origin: source, dest })?;
        let cost = raw.iter().fold(0.0, |acc, &(i, _, t, p)| acc + self.edge_cost(i, t, p));
        Ok(assemble(self.graph, source, dest, injection_slot, &raw, delivery, InterferenceCost::new(cost)))
    }
}

/// One-shot reservation for a flow injected at `injection_slot`.
#[allow(clippy::too_many_arguments)]
pub fn reserve_path<M: GainModel + ?Sized>(
    graph: &ChannelGraph,
    map: &M,
    source: NodeId,
    dest: NodeId,
    injection_slot: usize,
    deadline_s: f64,
    sensitive: &[Position3],
    budget: &LinkBudget,
) -> Result<PathReservation, PlanError> {
    Planner::new(graph, map, sensitive, *budget).reserve(source, dest, injection_slot, deadline_s, None)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::channel_graph::{synthesize, SlotGrid};
    use crate::radio_env::{build_map, sample_along, GroundTruth, PathLossParams, RadioMap, SampleWindow};
    use crate::scene::{ObstacleBox, Scene};
    use crate::trajectory::{Trajectory4D, Waypoint};
    use proptest::prelude::*;
    use rand::{Rng, SeedableRng};
    use std::sync::Arc;

    struct Instance {
        graph: ChannelGraph,
        map: RadioMap,
        sensitive: Vec<Position3>,
        source: NodeId,
        dest: NodeId,
    }

    fn instance(seed: u64, n_air: usize, n_slots: usize, n_sensitive: usize) -> Instance {
        let mut r = rand_chacha::ChaCha8Rng::seed_from_u64(seed);
        let scene = Arc::new(Scene::open(
            ObstacleBox::new(Position3::new(0.0, 0.0, 0.0), Position3::new(600.0, 600.0, 150.0)).unwrap(),
        ));
        let truth = GroundTruth::new(scene, PathLossParams::default(), seed);
        let grid = SlotGrid::new(0.0, 1.0, n_slots).unwrap();
        let mut pt = |z: f64| Position3::new(r.random_range(0.0..600.0), r.random_range(0.0..600.0), z);
        let trajs: Vec<Trajectory4D> = (0..n_air)
            .map(|k| {
                let (a, b) = (pt(80.0), pt(80.0));
                Trajectory4D::new(NodeId(k as u32 + 1), vec![Waypoint::new(0.0, a), Waypoint::new(n_slots as f64, b)])
                    .unwrap()
            })
            .collect();
        let ground = vec![(NodeId(101), pt(1.5)), (NodeId(201), pt(1.5))];
        let sensitive: Vec<Position3> = (0..n_sensitive).map(|_| pt(1.5)).collect();
        let mut samples = sample_along(
            &trajs,
            &truth,
            SampleWindow { t0: 0.0, horizon: n_slots as f64, period: 0.5 },
            &[ground[0].1, ground[1].1],
        );
        samples.push(truth.sample(ground[0].1, ground[1].1));
        let map = build_map(&samples, 2.0, 4, 0.0).unwrap();
        let graph = synthesize(&trajs, &ground, &map, grid, 450.0).unwrap();
        Instance { graph, map, sensitive, source: NodeId(101), dest: NodeId(201) }
    }

    #[test]
    fn zero_power_costs_nothing() {
        let p = [Position3::new(0.0, 0.0, 50.0)];
        let m = GroundTruth::without_shadowing(
            Arc::new(Scene::open(
                ObstacleBox::new(Position3::new(-10.0, -10.0, 0.0), Position3::new(10.0, 10.0, 100.0)).unwrap(),
            )),
            PathLossParams::default(),
        );
        let c =
            hop_interference(&m, &p, f64::NEG_INFINITY, SlotWindow::single(0), &[Position3::new(1.0, 1.0, 1.0)], 1.0);
        assert_eq!(c.value_mw_s, 0.0);
    }

    struct Fixed(f64);
    impl GainModel for Fixed {
        fn gain_db(&self, _: &Position3, _: &Position3) -> f64 {
            self.0
        }
    }

    #[test]
    fn single_term_product() {
        let p = [Position3::new(0.0, 0.0, 50.0)];
        let c =
            hop_interference(&Fixed(-100.0), &p, 30.0, SlotWindow::single(0), &[Position3::new(0.0, 0.0, 0.0)], 1.0);
        assert!((c.value_mw_s - 1e-7).abs() <= 1e-7 * 1e-12);
    }

    #[test]
    fn multi_slot_matches_brute_force() {
        let inst = instance(3, 3, 20, 4);
        let pos = inst.graph.positions_of(0);
        let dt = inst.graph.grid().dt;
        for (w, p) in [(SlotWindow::new(2, 17), 12.5), (SlotWindow::new(0, 19), -3.0), (SlotWindow::single(7), 30.0)] {
            let c = hop_interference(&inst.map, pos, p, w, &inst.sensitive, dt).value_mw_s;
            let mut oracle = 0.0;
            for at in &pos[w.start..=w.end] {
                for g in &inst.sensitive {
                    oracle += 10f64.powf(p / 10.0) * 10f64.powf(inst.map.gain_db(at, g) / 10.0) * dt;
                }
            }
            assert!((c - oracle).abs() <= 1e-12 * oracle, "{c} vs {oracle}");
        }
    }

    #[test]
    fn same_endpoint_is_empty() {
        let inst = instance(1, 2, 6, 1);
        let r = reserve_path(
            &inst.graph,
            &inst.map,
            inst.source,
            inst.source,
            2,
            3.0,
            &inst.sensitive,
            &LinkBudget::default(),
        )
        .unwrap();
        assert!(r.hops.is_empty());
        assert_eq!(r.predicted_cost.value_mw_s, 0.0);
        assert_eq!(r.delivery_slot, r.injection_slot);
    }

    #[test]
    fn rejects_bad_requests() {
        let inst = instance(1, 2, 6, 1);
        let b = LinkBudget::default();
        assert!(matches!(
            reserve_path(&inst.graph, &inst.map, NodeId(9), inst.dest, 0, 3.0, &[], &b),
            Err(PlanError::UnknownNode(_))
        ));
        assert!(matches!(
            reserve_path(&inst.graph, &inst.map, inst.source, inst.dest, 0, 0.5, &[], &b),
            Err(PlanError::BadDeadline { .. })
        ));
        assert!(matches!(
            reserve_path(&inst.graph, &inst.map, inst.source, inst.dest, 6, 3.0, &[], &b),
            Err(PlanError::BadSlot(6))
        ));
    }

    #[test]
    fn returned_reservations_are_well_formed_and_round_trip() {
        let b = LinkBudget::default();
        let mut found = 0;
        for seed in 0..40 {
            let inst = instance(seed, 4, 10, 3);
            if let Ok(r) = reserve_path(&inst.graph, &inst.map, inst.source, inst.dest, 1, 8.0, &inst.sensitive, &b) {
                r.check(8, b.p_max_dbm).unwrap();
                let json = serde_json::to_string(&r).unwrap();
                assert_eq!(serde_json::from_str::<PathReservation>(&json).unwrap(), r);
                found += 1;
            }
        }
        assert!(found > 10);
    }

    #[test]
    fn occupancy_blocks_claimed_slots() {
        let b = LinkBudget::default();
        for seed in 0..40 {
            let inst = instance(seed, 4, 10, 2);
            let planner = Planner::new(&inst.graph, &inst.map, &inst.sensitive, b);
            let Ok(first) = planner.reserve(inst.source, inst.dest, 0, 9.0, None) else { continue };
            let mut occ = Occupancy::new();
            occ.reserve(&first);
            if let Ok(second) = planner.reserve(inst.source, inst.dest, 0, 9.0, Some(&occ)) {
                for h in &second.hops {
                    assert!(occ.is_free(h.tx, h.tx_slot()) && occ.is_free(h.rx, h.tx_slot()));
                }
                assert!(second.predicted_cost >= first.predicted_cost);
            }
        }
    }

    #[test]
    fn fastest_is_never_slower() {
        let b = LinkBudget::default();
        for seed in 0..40 {
            let inst = instance(seed, 4, 10, 2);
            let planner = Planner::new(&inst.graph, &inst.map, &inst.sensitive, b);
            if let (Ok(a), Ok(f)) = (
                planner.reserve(inst.source, inst.dest, 0, 9.0, None),
                planner.fastest(inst.source, inst.dest, 0, 9.0, None),
            ) {
                assert!(f.delivery_slot <= a.delivery_slot);
                assert!(f.predicted_cost >= a.predicted_cost);
                f.check(9, b.p_max_dbm).unwrap();
            }
        }
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(48))]

        #[test]
        fn tighter_deadline_never_cheaper(seed in 0u64..10_000, d1 in 1usize..10, d2 in 1usize..10) {
            let inst = instance(seed, 4, 12, 2);
            let b = LinkBudget::default();
            let (lo, hi) = (d1.min(d2) as f64, d1.max(d2) as f64);
            let tight = reserve_path(&inst.graph, &inst.map, inst.source, inst.dest, 0, lo, &inst.sensitive, &b);
            let loose = reserve_path(&inst.graph, &inst.map, inst.source, inst.dest, 0, hi, &inst.sensitive, &b);
            match (tight, loose) {
                (Ok(t), Ok(l)) => prop_assert!(t.predicted_cost >= l.predicted_cost),
                (Ok(_), Err(_)) => prop_assert!(false, "loosening lost feasibility"),
                _ => {}
            }
        }

        #[test]
        fn extra_sensitive_node_never_cheaper(seed in 0u64..10_000, x in 0.0f64..600.0, y in 0.0f64..600.0) {
            let inst = instance(seed, 4, 10, 2);
            let b = LinkBudget::default();
            let mut more = inst.sensitive.clone();
            more.push(Position3::new(x, y, 1.5));
            let base = reserve_path(&inst.graph, &inst.map, inst.source, inst.dest, 0, 9.0, &inst.sensitive, &b);
            let extra = reserve_path(&inst.graph, &inst.map, inst.source, inst.dest, 0, 9.0, &more, &b);
            if let (Ok(a), Ok(e)) = (base, extra) {
                prop_assert!(e.predicted_cost.value_mw_s >= a.predicted_cost.value_mw_s);
            }
        }
    }
}
