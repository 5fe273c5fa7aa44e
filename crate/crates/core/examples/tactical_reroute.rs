//! A strategic directive 2 -> 6 -> 7 meets an unforeseen blockage on 2-6.
//! The local cluster substitutes relay 5, then re-times both hops into the
//! best slots of their windows.

use std::collections::BTreeMap;
use std::sync::Arc;

use aeris::operational::LinkBudget;
use aeris::radio_env::{ChannelSample, RadioMap};
use aeris::scene::{NodeId, Position3};
use aeris::strategic::SlotWindow;
use aeris::tactical::{reroute_local, schedule_timing, LocalCluster, Member, TableSlice};

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let map = Arc::new(RadioMap::build(
        &[ChannelSample::new(Position3::new(0.0, 0.0, 0.0), Position3::new(1.0, 0.0, 0.0), -70.0)],
        2.0,
        1,
        0.0,
    )?);
    let members: BTreeMap<NodeId, Member> = [(2, true), (4, true), (5, true), (6, true), (7, false)]
        .into_iter()
        .map(|(id, relay)| (NodeId(id), Member { pos: Position3::new(100.0 * id as f64, 0.0, 80.0), can_relay: relay }))
        .collect();
    let mut cluster = LocalCluster::new(members, map);
    cluster.mark_blocked(NodeId(2), NodeId(6))?;

    // local forecasts over slots 0..20: relay 5 is the clean detour, 4 is weak
    let mut slice = TableSlice::new(0.1);
    for t in 0..20 {
        let bump = -((t as f64 - 12.0) / 3.0).powi(2);
        slice.set_gain(NodeId(2), NodeId(5), t, -78.0 + 4.0 * (-(t as f64 - 4.0).powi(2) / 8.0).exp());
        slice.set_gain(NodeId(5), NodeId(7), t, -80.0 + 6.0 * bump.exp());
        slice.set_gain(NodeId(2), NodeId(4), t, -97.0);
        slice.set_gain(NodeId(4), NodeId(7), t, -96.0);
        for id in [2, 4, 5, 6] {
            slice.set_exposure(NodeId(id), t, 1e-9);
        }
    }
    let directive = [NodeId(2), NodeId(6), NodeId(7)];
    let span = SlotWindow::new(0, 19);
    let route = reroute_local(&cluster, &directive, span, &slice, &LinkBudget::default())?;
    let names: Vec<String> = route.iter().map(|n| n.to_string()).collect();
    println!("directive 2 -> 6 -> 7, blocked 2-6, new route {}", names.join(" -> "));
    let schedule = schedule_timing(&route, &[span, span], &slice, 19)?;
    println!("transmit slots {:?}", schedule.slots);
    Ok(())
}
