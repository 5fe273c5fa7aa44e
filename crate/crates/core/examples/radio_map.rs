//! Learning a radio map from sparse aerial measurements and checking it on
//! held-out links.

use std::sync::Arc;

use aeris::radio_env::{GainModel, GroundTruth, PathLossParams, RadioMap};
use aeris::rng;
use aeris::scene::{ObstacleBox, Position3, Scene};
use rand::Rng;

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let bounds = ObstacleBox::new(Position3::new(0.0, 0.0, 0.0), Position3::new(1000.0, 1000.0, 150.0))?;
    let truth = GroundTruth::new(Arc::new(Scene::open(bounds)), PathLossParams::default(), 11);
    let mut r = rng::stream_rng(11, rng::TRIALS, 0);
    let ground = Position3::new(500.0, 500.0, 1.5);
    let mut draw = |n: usize| -> Vec<_> {
        (0..n)
            .map(|_| {
                truth.sample(Position3::new(r.random_range(0.0..1000.0), r.random_range(0.0..1000.0), 100.0), ground)
            })
            .collect()
    };
    let (train, test) = (draw(500), draw(100));
    let map = RadioMap::build(&train, 2.0, 8, 0.0)?;
    let exact = train.iter().all(|s| map.gain_db(&s.tx, &s.rx) == s.gain_db);
    let rmse =
        (test.iter().map(|s| (map.gain_db(&s.tx, &s.rx) - s.gain_db).powi(2)).sum::<f64>() / test.len() as f64).sqrt();
    println!("{} training samples, exact at all of them: {exact}", train.len());
    println!("held-out RMSE {rmse:.2} dB (LoS shadowing std {} dB)", PathLossParams::default().sigma_sh_los_db);
    let q = map.query(&Position3::new(250.0, 250.0, 100.0), &ground);
    println!(
        "query (250, 250, 100) -> ground: {:.1} dB, residual std {} dB, LoS prob {:.2}",
        q.mean_gain_db, q.shadow_std_db, q.los_prob
    );
    Ok(())
}
