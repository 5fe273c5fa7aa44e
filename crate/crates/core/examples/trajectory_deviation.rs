//! Planned versus realized flight: Ornstein-Uhlenbeck offsets around a
//! filed 4D plan, and how far the realized path strays over time.

use aeris::channel_graph::SlotGrid;
use aeris::scene::{NodeId, Position3};
use aeris::trajectory::{realize, DeviationParams, Trajectory4D, Waypoint};

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let plan = Trajectory4D::new(
        NodeId(1),
        vec![
            Waypoint::new(0.0, Position3::new(0.0, 0.0, 80.0)),
            Waypoint::new(60.0, Position3::new(900.0, 0.0, 80.0)),
            Waypoint::new(120.0, Position3::new(900.0, 900.0, 80.0)),
        ],
    )?;
    let grid = SlotGrid::new(0.0, 0.1, 1200)?;
    let dev = DeviationParams { sigma_dev: 3.0, reversion_rate: 0.1 };
    let real = realize(&plan, &dev, &grid, 42);
    println!("  t [s]   planned (x, y, z)            offset [m]");
    for slot in (0..grid.n_slots).step_by(150) {
        let t = grid.time(slot);
        let p = plan.position_at(t);
        println!("{t:7.1}   ({:6.1}, {:6.1}, {:5.1})   {:6.2}", p.x, p.y, p.z, p.distance(&real[slot]));
    }
    let rms = (real.iter().enumerate().map(|(k, r)| r.distance(&plan.position_at(grid.time(k))).powi(2)).sum::<f64>()
        / real.len() as f64)
        .sqrt();
    println!("rms 3D offset {rms:.2} m (stationary value {:.2} m)", dev.sigma_dev * 3f64.sqrt());
    Ok(())
}
