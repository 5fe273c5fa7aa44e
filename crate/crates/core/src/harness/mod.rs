//! Scenario generation, the slot-driven simulation, the two reactive
//! baselines, load sweeps and the metrics they report.
//!
//! Load is the flow arrival rate in flows per minute. Baselines:
//!
//! * `baseline_aggregate`: reactive snapshot routing. Each slot the payload
//!   holder takes the min-hop path over links feasible at `p_max` on the
//!   currently measured gains and sends the first hop at the minimum
//!   outage-compliant power. No interference term, no foresight, no caps.
//! * `baseline_spacetime`: delay-optimal routing on the predicted
//!   time-expanded graph, powered like the aggregate baseline.
//!
//! Interference is always accounted on the ground-truth channel at realized
//! positions; the radio map only informs decisions.

mod config;
mod corridor;
mod sim;
mod study;
mod sweep;
mod world;

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};
use thiserror::Error;

pub use config::{gen_scenario, AircraftParams, ClassMix, MapParams, ScenarioConfig, ScenarioParams, TacticalParams};
pub use corridor::Corridor;
pub use sim::{
    baseline_aggregate, gen_flows, read_events, replay, run, run_in, write_events, Event, FlowRequest, MetricsReport,
    RunOutput,
};
pub use study::{echelon_study, EchelonStudy};
pub use sweep::{
    median_gaps, plot_data, quantile, read_sweep_csv, sweep, sweep_threads, write_plot_csv, write_sweep_csv, PlotRow,
    SweepRow,
};
pub use world::{survey_samples, SimWorld};

#[derive(Debug, Error)]
pub enum HarnessError {
    #[error("invalid configuration: {0}")]
    ConfigInvalid(String),
    #[error("infeasible scenario: {0}")]
    Infeasible(String),
    #[error(transparent)]
    Io(#[from] std::io::Error),
    #[error(transparent)]
    Json(#[from] serde_json::Error),
    #[error(transparent)]
    Csv(#[from] csv::Error),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Method {
    Predictive,
    BaselineAggregate,
    BaselineSpacetime,
}

impl Method {
    pub const ALL: [Method; 3] = [Method::Predictive, Method::BaselineAggregate, Method::BaselineSpacetime];

    pub fn name(&self) -> &'static str {
        match self {
            Method::Predictive => "predictive",
            Method::BaselineAggregate => "baseline_aggregate",
            Method::BaselineSpacetime => "baseline_spacetime",
        }
    }
}

impl fmt::Display for Method {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Method {
    type Err = HarnessError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        Method::ALL
            .into_iter()
            .find(|m| m.name() == s)
            .ok_or_else(|| HarnessError::ConfigInvalid(format!("unknown method {s:?}")))
    }
}

/// `10 log10(x)`, floored at -300 dB so an idle run stays finite.
pub fn interference_db(mw_s: f64) -> f64 {
    if mw_s > 0.0 {
        crate::lin_to_db(mw_s).max(-300.0)
    } else {
        -300.0
    }
}
