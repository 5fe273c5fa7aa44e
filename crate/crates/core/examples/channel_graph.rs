//! Fuses flight plans and the survey radio map into a time-indexed channel
//! graph and prints one link's predicted gain over the mission.
//!
//! Pass a path to also dump the whole graph as CSV.

use aeris::harness::{gen_scenario, ScenarioParams, SimWorld};
use aeris::scene::NodeId;

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let cfg = gen_scenario(&ScenarioParams::default(), 7)?;
    let world = SimWorld::build(&cfg, 0)?;
    let g = world.graph();
    println!("{} nodes, {} slots of {} s, range cutoff {} m", g.len(), g.grid().n_slots, g.grid().dt, g.range_cutoff());
    let link = g.link_forecast(NodeId(1), NodeId(101))?;
    println!("link 1-101 available in {} of {} slots", link.available_slots(), link.slots.len());
    for (slot, m) in link.means().iter().enumerate().step_by(100) {
        match m {
            Some(db) => println!("  t = {:5.1} s  {db:7.1} dB", g.grid().time(slot)),
            None => println!("  t = {:5.1} s  out of range", g.grid().time(slot)),
        }
    }
    if let Some(path) = std::env::args().nth(1) {
        g.write_csv(std::fs::File::create(&path)?)?;
        println!("graph written to {path}");
    }
    Ok(())
}
