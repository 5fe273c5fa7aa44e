//! Link-level power control under an outage constraint.
//!
//! With Rayleigh fading the received power gain `h` is unit-mean
//! exponential, so `P(p G h / N < gamma) = 1 - exp(-gamma N / (p G))`.
//! Setting that equal to `eps` gives the minimum power in closed form.
//! Transmissions are further capped so no sensitive ground node receives
//! more than its limit; when the cap cannot be met the slot is deferred.

use std::io::Write;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::echelon::GainForecast;
use crate::radio_env::GainModel;
use crate::scene::Position3;
use crate::{db_to_lin, lin_to_db};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum PowerError {
    #[error("required power {required_dbm:.2} dBm exceeds the {p_max_dbm:.2} dBm limit")]
    ExceedsPMax { required_dbm: f64, p_max_dbm: f64 },
    #[error("invalid link budget: {0}")]
    BadBudget(String),
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LinkBudget {
    /// Decoding SNR threshold, dB.
    pub snr_threshold_db: f64,
    /// Target outage probability, strictly between 0 and 1.
    pub outage_eps: f64,
    pub noise_dbm: f64,
    pub p_max_dbm: f64,
}

impl Default for LinkBudget {
    fn default() -> Self {
        Self { snr_threshold_db: 10.0, outage_eps: 0.01, noise_dbm: -100.0, p_max_dbm: 30.0 }
    }
}

impl LinkBudget {
    pub fn validate(&self) -> Result<(), PowerError> {
        if !(self.outage_eps > 0.0 && self.outage_eps < 1.0) {
            return Err(PowerError::BadBudget("outage_eps must lie in (0, 1)".into()));
        }
        if !(self.p_max_dbm.is_finite() && self.noise_dbm.is_finite() && self.snr_threshold_db.is_finite()) {
            return Err(PowerError::BadBudget("budget values must be finite".into()));
        }
        Ok(())
    }

    /// `-ln(1 - eps)`, the fading margin as a linear factor.
    fn fade_factor(&self) -> f64 {
        -(-self.outage_eps).ln_1p()
    }

    /// Lowest mean gain at which the outage target is reachable at `p_max`.
    pub fn min_feasible_gain_db(&self) -> f64 {
        self.snr_threshold_db + self.noise_dbm - lin_to_db(self.fade_factor()) - self.p_max_dbm
    }
}

/// Outage-compliant power for `mean_gain_db`, without the `p_max` check.
pub fn required_power_dbm(mean_gain_db: f64, budget: &LinkBudget) -> f64 {
    let p_lin = db_to_lin(budget.snr_threshold_db) * db_to_lin(budget.noise_dbm)
        / (db_to_lin(mean_gain_db) * budget.fade_factor());
    lin_to_db(p_lin)
}

/// Minimum transmit power meeting the outage target, in dBm.
pub fn min_power_outage(mean_gain_db: f64, budget: &LinkBudget) -> Result<f64, PowerError> {
    let p = required_power_dbm(mean_gain_db, budget);
    if p > budget.p_max_dbm {
        return Err(PowerError::ExceedsPMax { required_dbm: p, p_max_dbm: budget.p_max_dbm });
    }
    Ok(p)
}

/// Outage probability of a transmission at `power_dbm` over a link of
/// mean gain `mean_gain_db`.
pub fn outage_probability(power_dbm: f64, mean_gain_db: f64, budget: &LinkBudget) -> f64 {
    let x = db_to_lin(budget.snr_threshold_db) * db_to_lin(budget.noise_dbm)
        / (db_to_lin(power_dbm) * db_to_lin(mean_gain_db));
    -(-x).exp_m1()
}

/// Whether a transmission with fading draw `fade` (linear power gain)
/// clears the SNR threshold.
pub fn decodes(power_dbm: f64, mean_gain_db: f64, fade: f64, budget: &LinkBudget) -> bool {
    power_dbm + mean_gain_db + lin_to_db(fade) - budget.noise_dbm >= budget.snr_threshold_db
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", tag = "decision")]
pub enum PowerDecision {
    Transmit { power_dbm: f64 },
    Defer,
}

impl PowerDecision {
    pub fn power_dbm(&self) -> Option<f64> {
        match self {
            PowerDecision::Transmit { power_dbm } => Some(*power_dbm),
            PowerDecision::Defer => None,
        }
    }
}

/// A sensitive ground node and the largest power it may receive.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct InterferenceLimit {
    pub pos: Position3,
    pub cap_dbm: f64,
}

/// Highest power the transmitter may use at `tx` under every cap and `p_max`.
pub fn allowed_power_dbm(
    tx: &Position3,
    limits: &[InterferenceLimit],
    model: &impl GainModel,
    budget: &LinkBudget,
) -> f64 {
    limits.iter().map(|l| l.cap_dbm - model.gain_db(tx, &l.pos)).fold(budget.p_max_dbm, f64::min)
}

/// Transmit at `required_p_dbm` if it respects `p_max` and every cap,
/// otherwise defer. A power exactly at a cap is admitted.
pub fn cap_power(
    required_p_dbm: f64,
    tx: &Position3,
    limits: &[InterferenceLimit],
    model: &impl GainModel,
    budget: &LinkBudget,
) -> PowerDecision {
    if !(required_p_dbm <= budget.p_max_dbm) {
        return PowerDecision::Defer;
    }
    let ok = limits.iter().all(|l| required_p_dbm + model.gain_db(tx, &l.pos) <= l.cap_dbm);
    if ok {
        PowerDecision::Transmit { power_dbm: required_p_dbm }
    } else {
        PowerDecision::Defer
    }
}

/// Precomputed mapping from measured gain to transmit power.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PowerPolicy {
    /// `n_bins + 1` ascending bin edges in dB.
    edges: Vec<f64>,
    /// Power per bin in dBm, evaluated at the bin's lower edge.
    powers: Vec<f64>,
    budget: LinkBudget,
}

/// Bins span `mean +/- 4 std`; each bin uses the power required at its
/// lower edge, so the outage target holds for any gain inside the bin.
pub fn build_policy(forecast: &GainForecast, budget: &LinkBudget, n_bins: usize) -> PowerPolicy {
    let n_bins = if forecast.std_db > 0.0 { n_bins.max(1) } else { 1 };
    let lo = forecast.mean_db - 4.0 * forecast.std_db;
    let hi = forecast.mean_db + 4.0 * forecast.std_db;
    let edges: Vec<f64> = if n_bins == 1 {
        vec![lo, hi]
    } else {
        (0..=n_bins).map(|k| lo + (hi - lo) * k as f64 / n_bins as f64).collect()
    };
    let powers = edges[..n_bins].iter().map(|&g| required_power_dbm(g, budget)).collect();
    PowerPolicy { edges, powers, budget: *budget }
}

impl PowerPolicy {
    pub fn bin_count(&self) -> usize {
        self.powers.len()
    }

    pub fn edges(&self) -> &[f64] {
        &self.edges
    }

    pub fn powers(&self) -> &[f64] {
        &self.powers
    }

    /// Power for a measured gain. Below the table the exact requirement is
    /// used; above it the top bin applies.
    pub fn power_for(&self, measured_gain_db: f64) -> f64 {
        if measured_gain_db < self.edges[0] {
            return required_power_dbm(measured_gain_db, &self.budget);
        }
        let k = self.edges[1..self.edges.len() - 1].partition_point(|&e| e <= measured_gain_db);
        self.powers[k]
    }

    /// Policy lookup followed by the `p_max` check.
    pub fn decide(&self, measured_gain_db: f64) -> PowerDecision {
        let p = self.power_for(measured_gain_db);
        if p <= self.budget.p_max_dbm {
            PowerDecision::Transmit { power_dbm: p }
        } else {
            PowerDecision::Defer
        }
    }

    pub fn write_csv<W: Write>(&self, w: W) -> Result<(), csv::Error> {
        let mut wr = csv::Writer::from_writer(w);
        wr.write_record(["bin_low_db", "bin_high_db", "power_dbm"])?;
        for (k, p) in self.powers.iter().enumerate() {
            wr.serialize((self.edges[k], self.edges[k + 1], p))?;
        }
        wr.flush()?;
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};

    struct Flat(f64);
    impl GainModel for Flat {
        fn gain_db(&self, _: &Position3, _: &Position3) -> f64 {
            self.0
        }
    }

    #[test]
    fn unit_fade_factor_collapses() {
        let b = LinkBudget { outage_eps: 1.0 - (-1f64).exp(), ..Default::default() };
        let g = -90.0;
        let p = min_power_outage(g, &b).unwrap();
        let want = db_to_lin(b.snr_threshold_db) * db_to_lin(b.noise_dbm) / db_to_lin(g);
        assert!((db_to_lin(p) / want - 1.0).abs() < 1e-12);
    }

    #[test]
    fn exceeding_p_max_is_reported() {
        let b = LinkBudget::default();
        match min_power_outage(-140.0, &b) {
            Err(PowerError::ExceedsPMax { required_dbm, .. }) => assert!(required_dbm > b.p_max_dbm),
            other => panic!("unexpected {other:?}"),
        }
        let g = b.min_feasible_gain_db();
        assert!((required_power_dbm(g, &b) - b.p_max_dbm).abs() < 1e-9);
    }

    #[test]
    fn outage_at_required_power_equals_eps() {
        let b = LinkBudget { outage_eps: 0.05, ..Default::default() };
        let p = required_power_dbm(-85.0, &b);
        assert!((outage_probability(p, -85.0, &b) - 0.05).abs() < 1e-12);
    }

    #[test]
    fn cap_boundaries() {
        let b = LinkBudget::default();
        let tx = Position3::new(0.0, 0.0, 100.0);
        let req = 12.5;
        assert_eq!(cap_power(req, &tx, &[], &Flat(-90.0), &b), PowerDecision::Transmit { power_dbm: req });

        let exact = [InterferenceLimit { pos: Position3::default(), cap_dbm: req + -90.0 }];
        assert_eq!(cap_power(req, &tx, &exact, &Flat(-90.0), &b), PowerDecision::Transmit { power_dbm: req });

        let close = [InterferenceLimit { pos: Position3::default(), cap_dbm: -80.0 }];
        assert_eq!(cap_power(req, &tx, &close, &Flat(-60.0), &b), PowerDecision::Defer);
        assert!(allowed_power_dbm(&tx, &close, &Flat(-60.0), &b) < req);

        assert_eq!(cap_power(b.p_max_dbm + 1.0, &tx, &[], &Flat(-90.0), &b), PowerDecision::Defer);
    }

    #[test]
    fn zero_std_policy_is_single_bin() {
        let b = LinkBudget::default();
        let f = GainForecast { mean_db: -88.0, std_db: 0.0, lead_time: 0.0 };
        let pol = build_policy(&f, &b, 16);
        assert_eq!(pol.bin_count(), 1);
        assert_eq!(pol.power_for(-88.0), min_power_outage(-88.0, &b).unwrap());
    }

    #[test]
    fn policy_is_monotone_and_conservative() {
        let b = LinkBudget::default();
        let f = GainForecast { mean_db: -92.0, std_db: 3.0, lead_time: 1.0 };
        let pol = build_policy(&f, &b, 24);
        assert!(pol.powers().windows(2).all(|w| w[1] <= w[0]));
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(2);
        for _ in 0..2000 {
            let g = rng.random_range(-110.0..-70.0);
            assert!(pol.power_for(g) >= required_power_dbm(g, &b) - 1e-12);
        }
    }

    #[test]
    fn policy_csv() {
        let f = GainForecast { mean_db: -90.0, std_db: 1.0, lead_time: 1.0 };
        let pol = build_policy(&f, &LinkBudget::default(), 4);
        let mut buf = Vec::new();
        pol.write_csv(&mut buf).unwrap();
        let text = String::from_utf8(buf).unwrap();
        assert_eq!(text.lines().count(), 5);
        assert!(text.starts_with("bin_low_db,bin_high_db,power_dbm\n-94.0,-92.0,"));
    }
}
