//! Acceptance criteria, one test each. Every test writes a single
//! `PASS`/`FAIL` line to stderr (uncaptured) before asserting, so the
//! verdicts are visible in a plain `cargo test` log.

use std::collections::BTreeMap;
use std::io::Write;
use std::sync::Arc;
use std::time::Instant;

use aeris::channel_graph::{synthesize, ChannelGraph, NodeKind, SlotGrid};
use aeris::echelon::Tier;
use aeris::harness::{
    echelon_study, gen_scenario, median_gaps, run, sweep, sweep_threads, write_sweep_csv, Corridor, MapParams, Method,
    ScenarioConfig, ScenarioParams, SimWorld, SweepRow,
};
use aeris::operational::{min_power_outage, LinkBudget};
use aeris::radio_env::{
    build_map, sample_along, ChannelSample, GainModel, GroundTruth, PathLossParams, RadioMap, SampleWindow,
};
use aeris::scene::{NodeId, ObstacleBox, Position3, Scene};
use aeris::strategic::{reserve_path, PlanError, SlotWindow};
use aeris::tactical::{reroute_local, schedule_timing, LocalCluster, Member, TableSlice, TacticalError};
use aeris::trajectory::{Trajectory4D, Waypoint};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn verdict(n: u32, name: &str, pass: bool, detail: &str) {
    let tag = if pass { "PASS" } else { "FAIL" };
    let _ = writeln!(std::io::stderr().lock(), "{tag} criterion {n} [{name}]: {detail}");
}

fn acceptance_config() -> ScenarioConfig {
    gen_scenario(&ScenarioParams::default(), 7).expect("acceptance scenario generates")
}

fn lin(db: f64) -> f64 {
    10f64.powf(db / 10.0)
}

// ---------------------------------------------------------------- 1

#[test]
fn c1_interference_reduction() {
    let cfg = acceptance_config();
    let loads = [1.0, 2.0, 4.0, 8.0, 16.0];
    let methods = [Method::Predictive, Method::BaselineAggregate, Method::BaselineSpacetime];
    let started = Instant::now();
    let reports = sweep(&cfg, &loads, &methods, 20, sweep_threads()).unwrap();
    let secs = started.elapsed().as_secs_f64();
    let rows: Vec<SweepRow> = reports.iter().map(SweepRow::from).collect();

    let mut pass = secs < 300.0;
    let mut detail = Vec::new();
    for base in [Method::BaselineAggregate, Method::BaselineSpacetime] {
        let gaps = median_gaps(&rows, base);
        let top = gaps.last().unwrap().1;
        let monotone = gaps.windows(2).all(|w| w[1].1 >= w[0].1);
        pass &= top >= 10.0 && monotone;
        let listed: Vec<String> = gaps.iter().map(|(l, g)| format!("{l}:{g:.2}")).collect();
        detail.push(format!(
            "gap vs {} [{}] top {top:.2} dB (>= 10: {}), non-decreasing: {monotone}",
            base.name(),
            listed.join(" "),
            top >= 10.0
        ));
    }
    detail.push(format!("{secs:.1} s"));
    verdict(1, "interference reduction", pass, &detail.join("; "));
    assert!(pass, "{}", detail.join("\n"));
}

// ---------------------------------------------------------------- 2

struct PlanInstance {
    graph: ChannelGraph,
    map: RadioMap,
    sensitive: Vec<Position3>,
    injection: usize,
    deadline_slots: usize,
}

const SRC: NodeId = NodeId(101);
const DST: NodeId = NodeId(201);

fn plan_instance(seed: u64) -> PlanInstance {
    let mut r = ChaCha8Rng::seed_from_u64(seed);
    let n_air = r.random_range(1..=3);
    let n_slots = r.random_range(2..=8);
    let scene = Arc::new(Scene::open(
        ObstacleBox::new(Position3::new(0.0, 0.0, 0.0), Position3::new(700.0, 700.0, 150.0)).unwrap(),
    ));
    let truth = GroundTruth::new(scene, PathLossParams::default(), seed);
    let pt = |r: &mut ChaCha8Rng, z: f64| Position3::new(r.random_range(0.0..700.0), r.random_range(0.0..700.0), z);
    let trajs: Vec<Trajectory4D> = (0..n_air)
        .map(|k| {
            let (a, b) = (pt(&mut r, 80.0), pt(&mut r, 80.0));
            Trajectory4D::new(NodeId(k as u32 + 1), vec![Waypoint::new(0.0, a), Waypoint::new(n_slots as f64, b)])
                .unwrap()
        })
        .collect();
    let ground = vec![(SRC, pt(&mut r, 1.5)), (DST, pt(&mut r, 1.5))];
    let sensitive: Vec<Position3> = (0..r.random_range(1..=3)).map(|_| pt(&mut r, 1.5)).collect();
    let mut samples = sample_along(
        &trajs,
        &truth,
        SampleWindow { t0: 0.0, horizon: n_slots as f64, period: 0.5 },
        &[ground[0].1, ground[1].1],
    );
    samples.push(truth.sample(ground[0].1, ground[1].1));
    let map = build_map(&samples, 2.0, 4, 0.0).unwrap();
    let graph = synthesize(&trajs, &ground, &map, SlotGrid::new(0.0, 1.0, n_slots).unwrap(), 500.0).unwrap();
    let injection = r.random_range(0..n_slots - 1);
    let deadline_slots = r.random_range(1..=n_slots - 1);
    PlanInstance { graph, map, sensitive, injection, deadline_slots }
}

/// Every schedule the payload can follow: at each slot the holder keeps it
/// (source or aircraft only) or sends it to any other participant over a
/// link whose outage-compliant power fits under `p_max`. Returns the
/// minimum summed interference over deliveries, if any.
fn min_cost_by_enumeration(inst: &PlanInstance, budget: &LinkBudget) -> Option<f64> {
    let g = &inst.graph;
    let n = g.len();
    let s = g.index_of(SRC).unwrap();
    let d = g.index_of(DST).unwrap();
    let last = (inst.injection + inst.deadline_slots).min(g.grid().n_slots - 1);
    let dt = g.grid().dt;
    let fade = -(1.0 - budget.outage_eps).ln();
    let p_need = |gain_db: f64| lin(budget.snr_threshold_db) * lin(budget.noise_dbm) / (lin(gain_db) * fade);
    let relay = |i: usize| g.kind_at(i) == NodeKind::Aircraft;
    let hop_cost = |i: usize, j: usize, t: usize| -> Option<f64> {
        let p = p_need(g.weight_idx(i, j, t)?);
        if p > lin(budget.p_max_dbm) * (1.0 + 1e-12) {
            return None;
        }
        let pos = g.positions_of(i)[t];
        let exposure: f64 = inst.sensitive.iter().map(|q| lin(inst.map.gain_db(&pos, q))).sum();
        Some(p * exposure * dt)
    };

    struct Walk<'a> {
        n: usize,
        d: usize,
        last: usize,
        can_hold: &'a dyn Fn(usize) -> bool,
        in_net: &'a dyn Fn(usize) -> bool,
        hop: &'a dyn Fn(usize, usize, usize) -> Option<f64>,
    }

    impl Walk<'_> {
        fn go(&self, at: usize, t: usize, cost: f64, best: &mut Option<f64>) {
            if at == self.d {
                if best.is_none_or(|b| cost < b) {
                    *best = Some(cost);
                }
                return;
            }
            if t >= self.last {
                return;
            }
            if (self.can_hold)(at) {
                self.go(at, t + 1, cost, best);
            }
            for j in 0..self.n {
                if j != at && (self.in_net)(j) {
                    if let Some(c) = (self.hop)(at, j, t) {
                        self.go(j, t + 1, cost + c, best);
                    }
                }
            }
        }
    }

    let can_hold = |i: usize| i == s || relay(i);
    let in_net = |i: usize| i == s || i == d || relay(i);
    let walk = Walk { n, d, last, can_hold: &can_hold, in_net: &in_net, hop: &hop_cost };
    let mut best = None;
    walk.go(s, inst.injection, 0.0, &mut best);
    best
}

#[test]
fn c2_strategic_optimality() {
    let budget = LinkBudget::default();
    let started = Instant::now();
    let (mut feasible, mut mismatches) = (0, Vec::new());
    for seed in 0..200u64 {
        let inst = plan_instance(seed);
        let deadline_s = inst.deadline_slots as f64 * inst.graph.grid().dt;
        let got = reserve_path(&inst.graph, &inst.map, SRC, DST, inst.injection, deadline_s, &inst.sensitive, &budget);
        let want = min_cost_by_enumeration(&inst, &budget);
        match (&got, want) {
            (Ok(r), Some(c)) => {
                feasible += 1;
                let v = r.predicted_cost.value_mw_s;
                if (v - c).abs() > 1e-12 * c.abs().max(f64::MIN_POSITIVE) {
                    mismatches.push(format!("seed {seed}: planner {v:e}, enumeration {c:e}"));
                }
                if let Err(e) = r.check(inst.deadline_slots, budget.p_max_dbm) {
                    mismatches.push(format!("seed {seed}: malformed reservation: {e}"));
                }
            }
            (Err(PlanError::NoFeasiblePath { .. }), None) => {}
            (g, w) => mismatches.push(format!("seed {seed}: planner {g:?}, enumeration {w:?}")),
        }
    }
    let secs = started.elapsed().as_secs_f64();
    let pass = mismatches.is_empty() && secs < 30.0;
    verdict(
        2,
        "strategic optimality",
        pass,
        &format!("200 instances ({feasible} feasible), {} mismatches, {secs:.2} s", mismatches.len()),
    );
    assert!(pass, "{mismatches:#?}");
}

// ---------------------------------------------------------------- 3

#[test]
fn c3_delay_tolerance() {
    let mut pass = true;
    let mut lines = Vec::new();
    for seed in 1..=10u64 {
        let c = Corridor::build(seed).unwrap();
        let (slow, fast) = (c.reserve(20.0).unwrap(), c.reserve(2.0).unwrap());
        let transmit_only = fast.hops.iter().all(|h| h.window.start == h.window.end);
        let ok = slow.has_carry_interval()
            && transmit_only
            && fast.hops.len() >= 2
            && fast.predicted_cost.value_mw_s >= slow.predicted_cost.value_mw_s;
        pass &= ok;
        lines.push(format!(
            "seed {seed}: 20 s carry={} cost {:.2} dB; 2 s hops={} transmit-only={transmit_only} cost {:.2} dB",
            slow.has_carry_interval(),
            slow.predicted_cost.db(),
            fast.hops.len(),
            fast.predicted_cost.db()
        ));
    }
    verdict(3, "delay tolerance", pass, &format!("10 corridor seeds; {}", lines[0]));
    assert!(pass, "{lines:#?}");
}

// ---------------------------------------------------------------- 4

#[test]
fn c4_power_control() {
    let mut r = ChaCha8Rng::seed_from_u64(4);
    let mut worst = 0.0f64;
    let mut errors = Vec::new();
    for _ in 0..1000 {
        let budget = LinkBudget {
            snr_threshold_db: r.random_range(-5.0..25.0),
            outage_eps: 10f64.powf(r.random_range(-4.0..-0.5)),
            noise_dbm: r.random_range(-120.0..-80.0),
            p_max_dbm: 300.0,
        };
        let gain = r.random_range(-140.0..-40.0);
        // outage(p) = 1 - exp(-gamma N / (p G)) decreases in p; bisect outage = eps in log power
        let outage = |p_dbm: f64| {
            1.0 - (-(lin(budget.snr_threshold_db) * lin(budget.noise_dbm)) / (lin(p_dbm) * lin(gain))).exp()
        };
        let (mut lo, mut hi) = (-200.0f64, 250.0f64);
        for _ in 0..200 {
            let mid = 0.5 * (lo + hi);
            if outage(mid) > budget.outage_eps {
                lo = mid;
            } else {
                hi = mid;
            }
        }
        let oracle = lin(0.5 * (lo + hi));
        match min_power_outage(gain, &budget) {
            Ok(p) => worst = worst.max((lin(p) - oracle).abs() / oracle),
            Err(e) => errors.push(e.to_string()),
        }
    }

    let mut mc = Vec::new();
    let mut mc_ok = true;
    for (k, eps) in [0.01, 0.05, 0.1].into_iter().enumerate() {
        let budget = LinkBudget { outage_eps: eps, ..LinkBudget::default() };
        let gain = -80.0;
        let p = min_power_outage(gain, &budget).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(40 + k as u64);
        let n = 1_000_000;
        let need = lin(budget.snr_threshold_db) * lin(budget.noise_dbm) / (lin(p) * lin(gain));
        let out = (0..n).filter(|_| -> bool { rng.sample::<f64, _>(rand_distr::Exp1) < need }).count();
        let rate = out as f64 / n as f64;
        let se = (eps * (1.0 - eps) / n as f64).sqrt();
        let z = (rate - eps) / se;
        mc_ok &= z.abs() <= 4.0;
        mc.push(format!("eps {eps}: {rate:.5} (z {z:+.2})"));
    }
    let pass = errors.is_empty() && worst <= 1e-9 && mc_ok;
    verdict(
        4,
        "power control",
        pass,
        &format!("1000 budgets, worst relative error {worst:.2e}; Monte Carlo 1e6 draws {}", mc.join(", ")),
    );
    assert!(pass, "errors {errors:?}, worst {worst:e}, mc {mc:?}");
}

// ---------------------------------------------------------------- 5

#[test]
fn c5_radio_map() {
    let params = MapParams::default();
    let pl = PathLossParams::default();
    let mut pass = true;
    let mut lines = Vec::new();
    for seed in 0..5u64 {
        let bounds = ObstacleBox::new(Position3::new(0.0, 0.0, 0.0), Position3::new(1000.0, 1000.0, 150.0)).unwrap();
        let truth = GroundTruth::new(Arc::new(Scene::open(bounds)), pl.clone(), seed);
        let mut r = ChaCha8Rng::seed_from_u64(500 + seed);
        let ground = Position3::new(500.0, 500.0, 1.5);
        let mut draw = |n: usize| -> Vec<ChannelSample> {
            (0..n)
                .map(|_| {
                    let air = Position3::new(
                        r.random_range(0.0..1000.0),
                        r.random_range(0.0..1000.0),
                        r.random_range(60.0..120.0),
                    );
                    truth.sample(air, ground)
                })
                .collect()
        };
        let (train, test) = (draw(500), draw(100));
        let map = RadioMap::build(&train, params.idw_exponent, params.k_neighbors, 0.0).unwrap();
        let exact = train.iter().all(|s| {
            map.gain_db(&s.tx, &s.rx).to_bits() == s.gain_db.to_bits()
                && map.gain_db(&s.rx, &s.tx).to_bits() == s.gain_db.to_bits()
        });
        let rmse = (test.iter().map(|s| (map.gain_db(&s.tx, &s.rx) - s.gain_db).powi(2)).sum::<f64>()
            / test.len() as f64)
            .sqrt();
        let ok = exact && rmse <= pl.sigma_sh_los_db;
        pass &= ok;
        lines.push(format!("field {seed}: exact {exact}, RMSE {rmse:.2} dB"));
    }
    verdict(5, "radio map", pass, &format!("{} (std {} dB)", lines.join(", "), pl.sigma_sh_los_db));
    assert!(pass, "{lines:?}");
}

// ---------------------------------------------------------------- 6

#[test]
fn c6_echelon_ordering() {
    let cfg = acceptance_config();
    let w = SimWorld::build(&cfg, 0).unwrap();
    let study = echelon_study(&cfg, &w, &[0.0], 1000, 10, 0).unwrap();
    let rm = |t| study.rmse(0.0, t).unwrap();
    let (c, l, i) = (rm(Tier::Central), rm(Tier::Local), rm(Tier::Individual));
    let z_cl = study.ordering_z(0.0, Tier::Central, Tier::Local);
    let z_li = study.ordering_z(0.0, Tier::Local, Tier::Individual);
    let n = study.paired(0.0, Tier::Central, Tier::Local).len();
    let pass = n == 1000 && c >= l && l >= i && z_cl > 1.645 && z_li > 1.645 && i == 0.0;
    verdict(
        6,
        "echelon ordering",
        pass,
        &format!(
            "{n} links, RMSE central {c:.3} >= local {l:.3} >= individual {i} dB; z {z_cl:.2}, {z_li:.2} (> 1.645)"
        ),
    );
    assert!(pass);
}

// ---------------------------------------------------------------- 7

struct TimingInstance {
    route: Vec<NodeId>,
    windows: Vec<SlotWindow>,
    slice: TableSlice,
    gains: BTreeMap<(usize, usize), f64>,
    last_slot: usize,
}

fn timing_instance(seed: u64) -> TimingInstance {
    let mut r = ChaCha8Rng::seed_from_u64(seed);
    let hops = r.random_range(1..=4);
    let integer = r.random_bool(0.5);
    let route: Vec<NodeId> = (0..=hops).map(|k| NodeId(10 + k as u32)).collect();
    let mut windows: Vec<SlotWindow> = Vec::new();
    let mut slice = TableSlice::new(0.1);
    let mut gains = BTreeMap::new();
    for k in 0..hops {
        // windows drift forward along the route, as in a reservation
        let a = (windows.last().map_or(0, |w| w.start) + r.random_range(0..=2)).min(11);
        let b = (a + r.random_range(0..=5)).min(11);
        windows.push(SlotWindow::new(a, b));
        for t in 0..12 {
            if r.random_bool(0.8) {
                let g = if integer { r.random_range(-100..-60) as f64 } else { r.random_range(-100.0..-60.0) };
                slice.set_gain(route[k], route[k + 1], t, g);
                gains.insert((k, t), g);
            }
        }
    }
    let last_slot = r.random_range(4..12);
    TimingInstance { route, windows, slice, gains, last_slot }
}

/// Best summed gain over every increasing slot choice inside the windows.
fn best_timing(inst: &TimingInstance) -> Option<f64> {
    fn go(inst: &TimingInstance, k: usize, after: Option<usize>, acc: f64, best: &mut Option<f64>) {
        if k == inst.windows.len() {
            if best.is_none_or(|b| acc > b) {
                *best = Some(acc);
            }
            return;
        }
        let w = inst.windows[k];
        for t in w.start..=w.end {
            if t > inst.last_slot || after.is_some_and(|p| t <= p) {
                continue;
            }
            if let Some(g) = inst.gains.get(&(k, t)) {
                go(inst, k + 1, Some(t), acc + g, best);
            }
        }
    }
    let mut best = None;
    go(inst, 0, None, 0.0, &mut best);
    best
}

fn substitution_route() -> Vec<NodeId> {
    let map = Arc::new(
        RadioMap::build(
            &[ChannelSample::new(Position3::new(0.0, 0.0, 0.0), Position3::new(1.0, 0.0, 0.0), -70.0)],
            2.0,
            1,
            0.0,
        )
        .unwrap(),
    );
    let members: BTreeMap<NodeId, Member> = [(2, true), (4, true), (5, true), (6, true), (7, false)]
        .into_iter()
        .map(|(id, relay)| (NodeId(id), Member { pos: Position3::new(100.0 * id as f64, 0.0, 80.0), can_relay: relay }))
        .collect();
    let mut cluster = LocalCluster::new(members, map);
    cluster.mark_blocked(NodeId(2), NodeId(6)).unwrap();
    let mut slice = TableSlice::new(0.1);
    for t in 0..20 {
        slice.set_gain(NodeId(2), NodeId(5), t, -78.0);
        slice.set_gain(NodeId(5), NodeId(7), t, -80.0);
        slice.set_gain(NodeId(2), NodeId(4), t, -97.0);
        slice.set_gain(NodeId(4), NodeId(7), t, -96.0);
        slice.set_gain(NodeId(2), NodeId(6), t, -70.0);
        slice.set_gain(NodeId(6), NodeId(7), t, -70.0);
        for id in [2, 4, 5, 6] {
            slice.set_exposure(NodeId(id), t, 1e-9);
        }
    }
    let directive = [NodeId(2), NodeId(6), NodeId(7)];
    reroute_local(&cluster, &directive, SlotWindow::new(0, 19), &slice, &LinkBudget::default()).unwrap()
}

#[test]
fn c7_tactical_optimality() {
    let mut mismatches = Vec::new();
    let mut feasible = 0;
    for seed in 0..200u64 {
        let inst = timing_instance(seed);
        let got = schedule_timing(&inst.route, &inst.windows, &inst.slice, inst.last_slot);
        match (got, best_timing(&inst)) {
            (Ok(s), Some(best)) => {
                feasible += 1;
                if let Err(e) = s.check(&inst.windows, inst.last_slot) {
                    mismatches.push(format!("seed {seed}: {e}"));
                }
                if s.gain_sum(&inst.slice) != Some(best) {
                    mismatches.push(format!("seed {seed}: {:?} vs enumeration {best}", s.gain_sum(&inst.slice)));
                }
            }
            (Err(TacticalError::InfeasibleSchedule), None) => {}
            (g, b) => mismatches.push(format!("seed {seed}: {g:?} vs enumeration {b:?}")),
        }
    }
    let route = substitution_route();
    let substituted = route == [NodeId(2), NodeId(5), NodeId(7)];
    let pass = mismatches.is_empty() && substituted;
    verdict(
        7,
        "tactical optimality",
        pass,
        &format!(
            "200 instances ({feasible} feasible), {} mismatches; blocked 2-6 reroutes to {route:?}",
            mismatches.len()
        ),
    );
    assert!(pass, "{mismatches:#?} {route:?}");
}

// ---------------------------------------------------------------- 8

#[test]
fn c8_determinism() {
    let mut cfg = acceptance_config();
    cfg.load_per_min = 8.0;
    let dir = tempfile::tempdir().unwrap();
    let mut same_files = true;
    for m in [Method::Predictive, Method::BaselineAggregate, Method::BaselineSpacetime] {
        let mut bytes = Vec::new();
        for k in 0..2 {
            let path = dir.path().join(format!("{}-{k}.json", m.name()));
            let report = run(&cfg, m, 5).unwrap();
            std::fs::write(&path, serde_json::to_vec_pretty(&report).unwrap()).unwrap();
            bytes.push(std::fs::read(&path).unwrap());
        }
        same_files &= bytes[0] == bytes[1];
    }
    let csv = |threads: usize| {
        let rows = sweep(&cfg, &[2.0, 8.0], &[Method::Predictive, Method::BaselineAggregate], 4, threads).unwrap();
        let mut out = Vec::new();
        write_sweep_csv(&mut out, &rows).unwrap();
        out
    };
    let (one, many) = (csv(1), csv(4));
    let same_sweep = one == many;
    let pass = same_files && same_sweep;
    verdict(
        8,
        "determinism",
        pass,
        &format!("metrics files identical: {same_files}; sweep CSV identical for 1 and 4 threads: {same_sweep}"),
    );
    assert!(pass);
}
