//! The slot-driven simulation of one (config, method, seed) run.
//!
//! Flows are admitted one at a time in arrival order and executed to
//! completion; flows only interact through the reservations they leave
//! behind. Every run emits an event log, and the metrics are computed from
//! that log, so replaying a saved log reproduces them exactly.

use std::cell::RefCell;
use std::collections::{HashMap, VecDeque};
use std::io::{BufRead, Write};

use rand::Rng;
use serde::{Deserialize, Serialize};

use super::{interference_db, HarnessError, Method, ScenarioConfig, SimWorld};
use crate::db_to_lin;
use crate::echelon::{forecast_gain, forecast_mean_db, EchelonView, Region, World};
use crate::operational::{build_policy, cap_power, decodes, required_power_dbm, PowerDecision};
use crate::radio_env::{GainModel, RadioMap};
use crate::rng;
use crate::scene::{NodeId, Position3};
use crate::strategic::{HopReservation, Occupancy, PathReservation, PlanError, Planner, SlotWindow};
use crate::tactical::{
    detect_blockage, reroute_local, schedule_timing, LocalCluster, LocalSlice, ScheduleRecord, TacticalError,
};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FlowRequest {
    pub id: usize,
    pub source: NodeId,
    pub dest: NodeId,
    pub injection_slot: usize,
    pub deadline_s: f64,
}

/// Flows of one run. Flow `k` depends only on `(seed, k)`, so the flows of
/// a lower load are a prefix of those of a higher one.
pub fn gen_flows(cfg: &ScenarioConfig, load_per_min: f64, seed: u64) -> Vec<FlowRequest> {
    let grid = &cfg.grid;
    let n = (load_per_min * grid.horizon() / 60.0).round() as usize;
    let sources = cfg.scene.ground_sources();
    let dests = cfg.scene.ground_destinations();
    let mix = &cfg.class_mix;
    let mut flows: Vec<FlowRequest> = (0..n)
        .map(|k| {
            let mut r = rng::stream_rng(seed, rng::FLOWS, k as u64);
            let source = sources[r.random_range(0..sources.len())].id;
            let dest = dests[r.random_range(0..dests.len())].id;
            let u: f64 = r.random();
            let deadline_s = if u < mix.short_fraction { mix.short_deadline_s } else { mix.long_deadline_s };
            let latest = grid.n_slots - 1 - grid.slots_in(deadline_s);
            let injection_slot = r.random_range(0..=latest);
            FlowRequest { id: k, source, dest, injection_slot, deadline_s }
        })
        .collect();
    flows.sort_by_key(|f| (f.injection_slot, f.id));
    flows
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "event", rename_all = "snake_case")]
pub enum Event {
    Start {
        method: Method,
        load: f64,
        seed: u64,
        n_flows: usize,
    },
    Arrival {
        flow: usize,
        source: NodeId,
        dest: NodeId,
        slot: usize,
        deadline_s: f64,
    },
    Reserved {
        flow: usize,
        route: Vec<NodeId>,
        delivery_slot: usize,
        predicted_mw_s: f64,
    },
    Reroute {
        flow: usize,
        revision: usize,
        route: Vec<NodeId>,
    },
    Schedule(ScheduleRecord),
    Defer {
        flow: usize,
        tx: NodeId,
        rx: NodeId,
        slot: usize,
    },
    Transmit {
        flow: usize,
        tx: NodeId,
        rx: NodeId,
        slot: usize,
        power_dbm: f64,
        true_gain_db: f64,
        interference_mw_s: f64,
        energy_mj: f64,
        decoded: bool,
    },
    Delivered {
        flow: usize,
        slot: usize,
        delay_s: f64,
    },
    Dropped {
        flow: usize,
        slot: usize,
        reason: String,
    },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MetricsReport {
    pub method: Method,
    pub load: f64,
    pub seed: u64,
    pub n_flows: usize,
    pub delivered: usize,
    pub interference_mw_s: f64,
    pub interference_db: f64,
    /// Delivered over offered; 0 when no flow was offered.
    pub delivery_rate: f64,
    pub mean_delay_s: f64,
    /// Mean transmit energy spent on each delivered flow.
    pub energy_mj: f64,
}

#[derive(Debug, Clone)]
pub struct RunOutput {
    pub report: MetricsReport,
    pub events: Vec<Event>,
}

/// Rebuilds the metrics from an event log.
pub fn replay(events: &[Event]) -> Result<MetricsReport, HarnessError> {
    let Some(Event::Start { method, load, seed, n_flows }) = events.first() else {
        return Err(HarnessError::ConfigInvalid("event log must begin with a start event".into()));
    };
    let mut interference = 0.0;
    let mut energy: HashMap<usize, f64> = HashMap::new();
    let (mut delivered, mut delay_sum, mut energy_sum) = (0usize, 0.0, 0.0);
    for e in events {
        match e {
            Event::Transmit { flow, interference_mw_s, energy_mj, .. } => {
                interference += interference_mw_s;
                *energy.entry(*flow).or_insert(0.0) += energy_mj;
            }
            Event::Delivered { flow, delay_s, .. } => {
                delivered += 1;
                delay_sum += delay_s;
                energy_sum += energy.get(flow).copied().unwrap_or(0.0);
            }
            _ => {}
        }
    }
    let per = |x: f64| if delivered > 0 { x / delivered as f64 } else { 0.0 };
    Ok(MetricsReport {
        method: *method,
        load: *load,
        seed: *seed,
        n_flows: *n_flows,
        delivered,
        interference_mw_s: interference,
        interference_db: interference_db(interference),
        delivery_rate: if *n_flows > 0 { delivered as f64 / *n_flows as f64 } else { 0.0 },
        mean_delay_s: per(delay_sum),
        energy_mj: per(energy_sum),
    })
}

pub fn write_events<W: Write>(mut w: W, events: &[Event]) -> Result<(), HarnessError> {
    for e in events {
        serde_json::to_writer(&mut w, e)?;
        w.write_all(b"\n")?;
    }
    Ok(())
}

pub fn read_events<R: BufRead>(r: R) -> Result<Vec<Event>, HarnessError> {
    let mut out = Vec::new();
    for line in r.lines() {
        let line = line?;
        if !line.trim().is_empty() {
            out.push(serde_json::from_str(&line)?);
        }
    }
    Ok(out)
}

/// Local forecasts of one tactical decision, memoized.
struct ViewSlice<'a> {
    view: &'a EchelonView,
    world: &'a World,
    map: &'a RadioMap,
    sensitive: &'a [Position3],
    gains: RefCell<HashMap<(NodeId, NodeId, usize), Option<f64>>>,
    exposure: RefCell<HashMap<(NodeId, usize), f64>>,
}

impl<'a> ViewSlice<'a> {
    fn new(view: &'a EchelonView, world: &'a World, map: &'a RadioMap, sensitive: &'a [Position3]) -> Self {
        Self { view, world, map, sensitive, gains: RefCell::default(), exposure: RefCell::default() }
    }
}

impl LocalSlice for ViewSlice<'_> {
    fn gain_db(&self, i: NodeId, j: NodeId, slot: usize) -> Option<f64> {
        let key = if i <= j { (i, j, slot) } else { (j, i, slot) };
        if let Some(v) = self.gains.borrow().get(&key) {
            return *v;
        }
        let t = self.world.grid().time(slot);
        let v = forecast_mean_db(self.view, self.world, key.0, key.1, t).ok();
        self.gains.borrow_mut().insert(key, v);
        v
    }

    fn exposure(&self, i: NodeId, slot: usize) -> f64 {
        if let Some(v) = self.exposure.borrow().get(&(i, slot)) {
            return *v;
        }
        let t = self.world.grid().time(slot);
        let v = match self.world.extrapolated(i, self.view.now(), t) {
            Ok(p) => self.sensitive.iter().map(|g| db_to_lin(self.map.gain_db(&p, g))).sum(),
            Err(_) => 0.0,
        };
        self.exposure.borrow_mut().insert((i, slot), v);
        v
    }

    fn dt(&self) -> f64 {
        self.world.grid().dt
    }
}

struct Sim<'a> {
    cfg: &'a ScenarioConfig,
    w: &'a SimWorld,
    events: Vec<Event>,
    gains: HashMap<(NodeId, NodeId, usize), f64>,
    exposure: HashMap<(NodeId, usize), f64>,
}

impl<'a> Sim<'a> {
    fn new(cfg: &'a ScenarioConfig, w: &'a SimWorld) -> Self {
        Self { cfg, w, events: Vec::new(), gains: HashMap::new(), exposure: HashMap::new() }
    }

    fn time(&self, slot: usize) -> f64 {
        self.cfg.grid.time(slot)
    }

    /// True large-scale gain between realized positions.
    fn true_gain(&mut self, a: NodeId, b: NodeId, slot: usize) -> f64 {
        let key = if a <= b { (a, b, slot) } else { (b, a, slot) };
        if let Some(g) = self.gains.get(&key) {
            return *g;
        }
        let g = self.w.world().true_gain(key.0, key.1, self.time(slot)).expect("flow endpoints are world nodes");
        self.gains.insert(key, g);
        g
    }

    fn true_exposure(&mut self, tx: NodeId, slot: usize) -> f64 {
        if let Some(e) = self.exposure.get(&(tx, slot)) {
            return *e;
        }
        let p = self.w.world().realized(tx, self.time(slot)).expect("transmitter is a world node");
        let truth = self.w.world().truth();
        let e = self.w.sensitive().iter().map(|g| db_to_lin(truth.gain_db(&p, g))).sum();
        self.exposure.insert((tx, slot), e);
        e
    }

    /// Sends one hop on the true channel; returns whether it decoded.
    fn transmit(&mut self, flow: usize, tx: NodeId, rx: NodeId, slot: usize, power_dbm: f64) -> bool {
        let gain = self.true_gain(tx, rx, slot);
        let u = rng::hash_unit(self.w.seed(), rng::FADING, &[tx.0 as u64, rx.0 as u64, slot as u64]);
        let fade = -u.ln();
        let decoded = decodes(power_dbm, gain, fade, &self.cfg.budget);
        let dt = self.cfg.grid.dt;
        let p = db_to_lin(power_dbm);
        let interference_mw_s = p * self.true_exposure(tx, slot) * dt;
        self.events.push(Event::Transmit {
            flow,
            tx,
            rx,
            slot,
            power_dbm,
            true_gain_db: gain,
            interference_mw_s,
            energy_mj: p * dt,
            decoded,
        });
        decoded
    }

    fn drop_flow(&mut self, flow: usize, slot: usize, reason: impl Into<String>) {
        self.events.push(Event::Dropped { flow, slot, reason: reason.into() });
    }

    fn deliver(&mut self, f: &FlowRequest, slot: usize) {
        let delay_s = (slot - f.injection_slot) as f64 * self.cfg.grid.dt;
        self.events.push(Event::Delivered { flow: f.id, slot, delay_s });
    }

    fn last_tx_slot(&self, f: &FlowRequest) -> usize {
        let g = &self.cfg.grid;
        (f.injection_slot + g.slots_in(f.deadline_s) - 1).min(g.n_slots - 2)
    }

    fn in_network(&self, id: NodeId, f: &FlowRequest) -> bool {
        id == f.source || id == f.dest || self.w.world().is_aircraft(id)
    }

    /// Min-hop path over links feasible at `p_max` on the measured gains
    /// of `slot`. Neighbours are explored in id order.
    fn snapshot_route(&mut self, from: NodeId, f: &FlowRequest, slot: usize) -> Option<Vec<NodeId>> {
        let nodes: Vec<NodeId> = self.w.graph().node_ids().iter().copied().filter(|&n| self.in_network(n, f)).collect();
        let min_gain = self.cfg.budget.min_feasible_gain_db();
        let mut prev: HashMap<NodeId, NodeId> = HashMap::new();
        let mut queue = VecDeque::from([from]);
        prev.insert(from, from);
        while let Some(u) = queue.pop_front() {
            if u == f.dest {
                let mut path = vec![u];
                let mut x = u;
                while x != from {
                    x = prev[&x];
                    path.push(x);
                }
                path.reverse();
                return Some(path);
            }
            if u != from && u == f.source {
                continue;
            }
            for &v in &nodes {
                if v == u || prev.contains_key(&v) {
                    continue;
                }
                let g = self.true_gain(u, v, slot);
                if g >= min_gain && required_power_dbm(g, &self.cfg.budget) <= self.cfg.budget.p_max_dbm {
                    prev.insert(v, u);
                    queue.push_back(v);
                }
            }
        }
        None
    }

    fn run_aggregate(&mut self, f: &FlowRequest) {
        let last = self.last_tx_slot(f);
        let mut holder = f.source;
        for t in f.injection_slot..=last {
            let Some(route) = self.snapshot_route(holder, f, t) else { continue };
            let next = route[1];
            let g = self.true_gain(holder, next, t);
            let p = required_power_dbm(g, &self.cfg.budget);
            if !self.transmit(f.id, holder, next, t, p) {
                self.drop_flow(f.id, t, "outage");
                return;
            }
            holder = next;
            if holder == f.dest {
                self.deliver(f, t + 1);
                return;
            }
        }
        self.drop_flow(f.id, last + 1, "deadline");
    }

    fn run_spacetime(&mut self, planner: &Planner, f: &FlowRequest) {
        let res = match planner.fastest(f.source, f.dest, f.injection_slot, f.deadline_s, None) {
            Ok(r) => r,
            Err(e) => return self.drop_flow(f.id, f.injection_slot, e.to_string()),
        };
        self.reserved(f.id, &res);
        for h in &res.hops {
            let t = h.tx_slot();
            let g = self.true_gain(h.tx, h.rx, t);
            let p = required_power_dbm(g, &self.cfg.budget).min(self.cfg.budget.p_max_dbm);
            if !self.transmit(f.id, h.tx, h.rx, t, p) {
                return self.drop_flow(f.id, t, "outage");
            }
        }
        self.deliver(f, res.delivery_slot);
    }

    fn reserved(&mut self, flow: usize, r: &PathReservation) {
        self.events.push(Event::Reserved {
            flow,
            route: r.route(),
            delivery_slot: r.delivery_slot,
            predicted_mw_s: r.predicted_cost.value_mw_s,
        });
    }

    fn local_view(&self, holder: NodeId, slot: usize) -> EchelonView {
        let now = self.time(slot);
        let center = self.w.world().realized(holder, now).expect("holder is a world node");
        let region = Region { center, radius: self.cfg.tactical.local_radius_m };
        EchelonView::local(self.w.snapshot(), now, self.cfg.horizons.local_s, region).expect("valid local view")
    }

    /// Individual-view power decision for `tx -> rx` in `slot`.
    fn operational(&mut self, tx: NodeId, rx: NodeId, slot: usize) -> PowerDecision {
        let t = self.time(slot);
        let now = (t - self.cfg.tactical.decision_lead_s).max(self.cfg.grid.t0);
        let view = EchelonView::individual(
            self.w.snapshot(),
            tx,
            now,
            self.cfg.horizons.individual_s,
            self.cfg.tactical.coherence_s,
        )
        .expect("valid individual view");
        let forecast = match forecast_gain(&view, self.w.world(), tx, rx, t) {
            Ok(f) => f,
            Err(_) => return PowerDecision::Defer,
        };
        let policy = build_policy(&forecast, &self.cfg.budget, self.cfg.tactical.policy_bins);
        let measured = self.true_gain(tx, rx, slot);
        let power = policy.power_for(measured);
        let pos = self.w.world().realized(tx, t).expect("transmitter is a world node");
        cap_power(power, &pos, self.w.limits(), &**self.w.map(), &self.cfg.budget)
    }

    fn replan(
        &mut self,
        planner: &Planner,
        occ: &mut Occupancy,
        f: &FlowRequest,
        holder: NodeId,
        slot: usize,
    ) -> Result<PathReservation, PlanError> {
        let remaining = (self.last_tx_slot(f) + 1 - slot) as f64 * self.cfg.grid.dt;
        let r = planner.reserve(holder, f.dest, slot, remaining.max(0.0), Some(occ))?;
        occ.reserve(&r);
        Ok(r)
    }

    fn run_predictive(&mut self, planner: &Planner, occ: &mut Occupancy, f: &FlowRequest) {
        const MAX_REPLANS: usize = 3;
        let last = self.last_tx_slot(f);
        let res = match planner.reserve(f.source, f.dest, f.injection_slot, f.deadline_s, Some(occ)) {
            Ok(r) => r,
            Err(e) => return self.drop_flow(f.id, f.injection_slot, e.to_string()),
        };
        occ.reserve(&res);
        self.reserved(f.id, &res);
        let mut route = res.route();
        let mut windows: Vec<SlotWindow> = res.hops.iter().map(|h| h.window).collect();
        let (mut k, mut now, mut revision, mut replans) = (0usize, f.injection_slot, 0usize, 0usize);
        let threshold = self.cfg.budget.min_feasible_gain_db();
        let world = self.w.world();
        let map = self.w.map().clone();

        while route[k] != f.dest {
            windows[k].start = now;
            windows[k].end = windows[k].end.max(now);
            let (a, b) = (route[k], route[k + 1]);
            let view = self.local_view(a, now);
            let hop = HopReservation { tx: a, rx: b, window: windows[k], nominal_power_dbm: f64::NAN };
            let blocked = detect_blockage(&view, world, &hop, threshold).unwrap_or(true);
            let slice = ViewSlice::new(&view, world, &map, self.w.sensitive());

            let mut escalate = false;
            if blocked {
                let span_end = if k + 1 < windows.len() { windows[k + 1].end } else { last }.max(now);
                let span = SlotWindow::new(now, span_end);
                let rerouted = LocalCluster::gather(&view, world).and_then(|mut c| {
                    c.mark_blocked(a, b).map_err(|_| TacticalError::EscalateToStrategic(a, b))?;
                    reroute_local(&c, &route[k..], span, &slice, &self.cfg.budget)
                });
                match rerouted {
                    Ok(tail) => {
                        let old_hops = route.len() - 1 - k;
                        let replaced = old_hops.min(2);
                        let new_replaced = (tail.len() - 1) - (old_hops - replaced);
                        let mut w2 = windows[..k].to_vec();
                        w2.extend(std::iter::repeat_n(span, new_replaced));
                        w2.extend_from_slice(&windows[k + replaced..]);
                        windows = w2;
                        route.truncate(k);
                        route.extend(tail);
                        revision += 1;
                        self.events.push(Event::Reroute { flow: f.id, revision, route: route.clone() });
                    }
                    Err(_) => escalate = true,
                }
            }

            let schedule = if escalate { None } else { schedule_timing(&route[k..], &windows[k..], &slice, last).ok() };
            let Some(schedule) = schedule else {
                replans += 1;
                if replans > MAX_REPLANS {
                    return self.drop_flow(f.id, now, "replan limit");
                }
                match self.replan(planner, occ, f, a, now) {
                    Ok(r) => {
                        route.truncate(k);
                        route.extend(r.route());
                        windows.truncate(k);
                        windows.extend(r.hops.iter().map(|h| h.window));
                        revision += 1;
                        self.events.push(Event::Reroute { flow: f.id, revision, route: route.clone() });
                        continue;
                    }
                    Err(e) => return self.drop_flow(f.id, now, e.to_string()),
                }
            };
            for mut rec in ScheduleRecord::from_schedule(f.id, revision, &schedule) {
                rec.hop += k;
                self.events.push(Event::Schedule(rec));
            }

            let limit = if schedule.slots.len() > 1 { schedule.slots[1] - 1 } else { last };
            let mut sent = false;
            for t in schedule.slots[0]..=limit {
                match self.operational(a, b, t) {
                    PowerDecision::Transmit { power_dbm } => {
                        if !self.transmit(f.id, a, b, t, power_dbm) {
                            return self.drop_flow(f.id, t, "outage");
                        }
                        now = t + 1;
                        sent = true;
                        break;
                    }
                    PowerDecision::Defer => self.events.push(Event::Defer { flow: f.id, tx: a, rx: b, slot: t }),
                }
            }
            if !sent {
                return self.drop_flow(f.id, limit + 1, "deferred past window");
            }
            k += 1;
        }
        self.deliver(f, now);
    }
}

/// Snapshot route and per-hop powers of the aggregate baseline at the
/// flow's injection slot, on measured (true) gains.
pub fn baseline_aggregate(
    cfg: &ScenarioConfig,
    w: &SimWorld,
    flow: &FlowRequest,
) -> Result<Vec<(NodeId, NodeId, f64)>, PlanError> {
    let mut sim = Sim::new(cfg, w);
    let slot = flow.injection_slot;
    let route = sim
        .snapshot_route(flow.source, flow, slot)
        .ok_or(PlanError::NoFeasiblePath { origin: flow.source, dest: flow.dest })?;
    Ok(route
        .windows(2)
        .map(|p| {
            let g = sim.true_gain(p[0], p[1], slot);
            (p[0], p[1], required_power_dbm(g, &cfg.budget))
        })
        .collect())
}

/// Runs one method at `load` flows per minute on a prepared world.
pub fn run_in(cfg: &ScenarioConfig, w: &SimWorld, method: Method, load: f64) -> Result<RunOutput, HarnessError> {
    if !(load >= 0.0 && load.is_finite()) {
        return Err(HarnessError::ConfigInvalid(format!("load: {load} is not a finite value >= 0")));
    }
    let flows = gen_flows(cfg, load, w.seed());
    let mut sim = Sim::new(cfg, w);
    sim.events.push(Event::Start { method, load, seed: w.seed(), n_flows: flows.len() });
    let mut planner = Planner::with_exposure(w.graph(), w.exposure().clone(), cfg.budget);
    if method == Method::Predictive {
        planner = planner.with_ceiling(w.ceiling().clone());
    }
    let mut occ = Occupancy::new();
    for f in &flows {
        sim.events.push(Event::Arrival {
            flow: f.id,
            source: f.source,
            dest: f.dest,
            slot: f.injection_slot,
            deadline_s: f.deadline_s,
        });
        match method {
            Method::Predictive => sim.run_predictive(&planner, &mut occ, f),
            Method::BaselineAggregate => sim.run_aggregate(f),
            Method::BaselineSpacetime => sim.run_spacetime(&planner, f),
        }
    }
    let report = replay(&sim.events)?;
    Ok(RunOutput { report, events: sim.events })
}

/// Builds the world for `seed` and runs `method` at the configured load.
pub fn run(cfg: &ScenarioConfig, method: Method, seed: u64) -> Result<MetricsReport, HarnessError> {
    let w = SimWorld::build(cfg, seed)?;
    Ok(run_in(cfg, &w, method, cfg.load_per_min)?.report)
}
