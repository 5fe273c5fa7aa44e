//! Minimum outage-compliant power, the quantised individual-view policy,
//! and interference caps around a sensitive receiver.

use aeris::echelon::GainForecast;
use aeris::operational::{
    allowed_power_dbm, build_policy, cap_power, min_power_outage, outage_probability, InterferenceLimit, LinkBudget,
};
use aeris::radio_env::GainModel;
use aeris::scene::Position3;

/// Free-space-like toy model for the cap demo.
struct Fspl;

impl GainModel for Fspl {
    fn gain_db(&self, tx: &Position3, rx: &Position3) -> f64 {
        -40.0 - 20.0 * tx.distance(rx).max(1.0).log10()
    }
}

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let budget = LinkBudget::default();
    for g in [-70.0, -85.0, -100.0, -105.0] {
        match min_power_outage(g, &budget) {
            Ok(p) => println!("gain {g:6.1} dB -> {p:6.2} dBm, outage {:.4}", outage_probability(p, g, &budget)),
            Err(e) => println!("gain {g:6.1} dB -> {e}"),
        }
    }
    let policy = build_policy(&GainForecast { mean_db: -82.0, std_db: 2.0, lead_time: 0.5 }, &budget, 8);
    println!("policy for a -82 +/- 2 dB forecast:");
    policy.write_csv(std::io::stdout().lock())?;

    let limit = InterferenceLimit { pos: Position3::new(0.0, 0.0, 1.5), cap_dbm: -65.0 };
    for x in [50.0, 150.0, 400.0] {
        let tx = Position3::new(x, 0.0, 80.0);
        let allowed = allowed_power_dbm(&tx, &[limit], &Fspl, &budget);
        let decision = cap_power(25.0, &tx, &[limit], &Fspl, &budget);
        println!("{x:5.0} m from the receiver: allowed {allowed:5.1} dBm, 25 dBm request -> {decision:?}");
    }
    Ok(())
}
