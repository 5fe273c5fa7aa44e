//! Line-of-sight queries against a generated city: what share of random
//! ground-to-ground and air-to-ground links a building blocks.

use aeris::rng;
use aeris::scene::{gen_city, CityParams, Position3};
use rand::Rng;

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let city = gen_city(&CityParams::default(), 7)?;
    println!(
        "{} buildings, {} ground nodes",
        city.obstacles().len(),
        city.terminals().count() + city.sensitive_nodes().len()
    );
    let mut r = rng::stream_rng(7, rng::TRIALS, 0);
    let mut point = |z: f64| Position3::new(r.random_range(0.0..1000.0), r.random_range(0.0..1000.0), z);
    let n = 10_000;
    for (label, za, zb) in [("ground-ground", 1.5, 1.5), ("air-ground", 90.0, 1.5), ("air-air", 90.0, 90.0)] {
        let blocked = (0..n).filter(|_| city.los_blocked(&point(za), &point(zb))).count();
        println!("{label:>14}: {:5.1} % blocked", 100.0 * blocked as f64 / n as f64);
    }
    Ok(())
}
