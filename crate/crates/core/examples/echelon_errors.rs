//! Forecast error of the central, local and individual views against the
//! true channel, by lead time.

use aeris::echelon::{write_error_csv, Tier};
use aeris::harness::{echelon_study, gen_scenario, ScenarioParams, SimWorld};

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let cfg = gen_scenario(&ScenarioParams::default(), 7)?;
    let world = SimWorld::build(&cfg, 0)?;
    let leads = [0.0, 1.0, 2.0, 10.0, 30.0];
    let study = echelon_study(&cfg, &world, &leads, 1000, 10, 0)?;
    println!("lead [s]   central   local   individual   (RMSE dB)");
    for lead in leads {
        let cell = |t| study.rmse(lead, t).map_or("    -".to_string(), |v| format!("{v:5.2}"));
        println!("{lead:8.1}   {:>7}   {:>5}   {:>10}", cell(Tier::Central), cell(Tier::Local), cell(Tier::Individual));
    }
    for (a, b) in [(Tier::Central, Tier::Local), (Tier::Local, Tier::Individual)] {
        println!("z({} > {}) at lead 0: {:.2}", a.name(), b.name(), study.ordering_z(0.0, a, b));
    }
    write_error_csv(std::io::stdout().lock(), &study.rows)?;
    Ok(())
}
