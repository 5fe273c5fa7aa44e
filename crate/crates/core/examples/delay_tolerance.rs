//! Same flow, two deadlines, on the relay corridor: with 20 s the planner
//! hands the payload to the passing ferry and lets it carry; with 2 s it
//! has to relay hop by hop through the hovering aircraft.

use aeris::harness::Corridor;

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let seed = std::env::args().nth(1).map(|s| s.parse()).transpose()?.unwrap_or(1);
    let corridor = Corridor::build(seed)?;
    let dt = corridor.graph().grid().dt;
    for deadline in [20.0, 2.0] {
        let r = corridor.reserve(deadline)?;
        println!(
            "deadline {deadline:>4} s: cost {:.2} dB(mW s), delivered after {:.1} s, carry: {}",
            r.predicted_cost.db(),
            r.delay_slots() as f64 * dt,
            r.has_carry_interval()
        );
        for h in &r.hops {
            println!(
                "  {} -> {}  held {:>5.1}..{:>5.1} s  tx {:>5.1} dBm",
                h.tx,
                h.rx,
                h.window.start as f64 * dt,
                h.window.end as f64 * dt,
                h.nominal_power_dbm
            );
        }
    }
    Ok(())
}
