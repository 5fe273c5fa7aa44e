//! One predictive run, its event log written as JSON lines, and the
//! metrics rebuilt from the log alone.

use aeris::harness::{
    gen_scenario, read_events, replay, run_in, write_events, Event, Method, ScenarioParams, SimWorld,
};

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let cfg = gen_scenario(&ScenarioParams::default(), 7)?;
    let world = SimWorld::build(&cfg, 3)?;
    let out = run_in(&cfg, &world, Method::Predictive, 8.0)?;
    let mut buf = Vec::new();
    write_events(&mut buf, &out.events)?;
    let back = read_events(buf.as_slice())?;
    let again = replay(&back)?;
    let count = |f: fn(&Event) -> bool| back.iter().filter(|e| f(e)).count();
    println!("{} events, {} bytes", back.len(), buf.len());
    println!(
        "transmissions {}, deferrals {}, reroutes {}",
        count(|e| matches!(e, Event::Transmit { .. })),
        count(|e| matches!(e, Event::Defer { .. })),
        count(|e| matches!(e, Event::Reroute { .. }))
    );
    println!("{}", serde_json::to_string_pretty(&again)?);
    println!("replay identical to live metrics: {}", again == out.report);
    Ok(())
}
