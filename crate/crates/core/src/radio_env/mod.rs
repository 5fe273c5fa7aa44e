//! Large-scale radio environment: the ground-truth channel and the radio
//! map learned from sparse aerial measurements.
//!
//! Ground truth is log-distance path loss whose exponent switches with
//! geometric line of sight, plus shadowing drawn from a spatially
//! correlated field evaluated at the link midpoint. Both are reciprocal by
//! construction.

mod kdtree;
mod map;
mod shadow;

use std::io::{Read, Write};
use std::sync::Arc;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::scene::{los_blocked, Position3, Scene};
use crate::trajectory::Trajectory4D;

pub use map::{build_map, RadioMap};
pub use shadow::ShadowField;

#[derive(Debug, Error)]
pub enum RadioError {
    #[error("transmitter and receiver coincide")]
    DegenerateLink,
    #[error("cannot build a radio map from an empty sample set")]
    EmptySampleSet,
    #[error("invalid map parameter: {0}")]
    BadParameter(String),
    #[error("sample csv: {0}")]
    Csv(#[from] csv::Error),
}

/// Log-distance path loss with LoS/NLoS exponents and correlated shadowing.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct PathLossParams {
    /// Loss at the reference distance, dB.
    pub pl0_db: f64,
    /// Reference distance, m.
    pub d0: f64,
    pub n_los: f64,
    pub n_nlos: f64,
    pub sigma_sh_los_db: f64,
    pub sigma_sh_nlos_db: f64,
    /// Shadowing decorrelation distance, m.
    pub decorr_dist: f64,
    pub noise_dbm: f64,
    /// Number of cosine terms in the shadowing field.
    pub shadow_terms: usize,
}

impl Default for PathLossParams {
    fn default() -> Self {
        Self {
            pl0_db: 40.0,
            d0: 1.0,
            n_los: 2.0,
            n_nlos: 3.2,
            sigma_sh_los_db: 4.0,
            sigma_sh_nlos_db: 8.0,
            decorr_dist: 50.0,
            noise_dbm: -100.0,
            shadow_terms: 256,
        }
    }
}

impl PathLossParams {
    pub fn validate(&self) -> Result<(), String> {
        let finite = [
            self.pl0_db,
            self.d0,
            self.n_los,
            self.n_nlos,
            self.sigma_sh_los_db,
            self.sigma_sh_nlos_db,
            self.decorr_dist,
            self.noise_dbm,
        ]
        .iter()
        .all(|v| v.is_finite());
        if !finite {
            return Err("path-loss parameters must be finite".into());
        }
        if self.d0 <= 0.0 {
            return Err("d0 must be > 0".into());
        }
        if self.n_los <= 0.0 || self.n_nlos <= 0.0 {
            return Err("path-loss exponents must be > 0".into());
        }
        if self.sigma_sh_los_db < 0.0 || self.sigma_sh_nlos_db < 0.0 {
            return Err("shadowing std must be >= 0".into());
        }
        if self.decorr_dist <= 0.0 {
            return Err("decorr_dist must be > 0".into());
        }
        Ok(())
    }

    /// Deterministic part of the gain (no shadowing), dB.
    pub fn mean_gain_db(&self, distance: f64, los: bool) -> f64 {
        let n = if los { self.n_los } else { self.n_nlos };
        -(self.pl0_db + 10.0 * n * (distance.max(self.d0) / self.d0).log10())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LargeScaleStats {
    pub mean_gain_db: f64,
    pub shadow_std_db: f64,
    pub los_prob: f64,
}

/// A geo-tagged measurement. The optional LoS flag is recorded by the
/// collecting aircraft when known; it is not part of the CSV exchange format.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ChannelSample {
    pub tx: Position3,
    pub rx: Position3,
    pub gain_db: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub los: Option<bool>,
}

impl ChannelSample {
    pub fn new(tx: Position3, rx: Position3, gain_db: f64) -> Self {
        Self { tx, rx, gain_db, los: None }
    }

    pub fn is_finite(&self) -> bool {
        self.tx.is_finite() && self.rx.is_finite() && self.gain_db.is_finite()
    }
}

/// Anything that predicts the large-scale gain between two points.
pub trait GainModel {
    fn gain_db(&self, tx: &Position3, rx: &Position3) -> f64;
}

impl<T: GainModel + ?Sized> GainModel for &T {
    fn gain_db(&self, tx: &Position3, rx: &Position3) -> f64 {
        (**self).gain_db(tx, rx)
    }
}

impl<T: GainModel + ?Sized> GainModel for Arc<T> {
    fn gain_db(&self, tx: &Position3, rx: &Position3) -> f64 {
        (**self).gain_db(tx, rx)
    }
}

/// The true large-scale channel of one seeded world.
#[derive(Debug, Clone)]
pub struct GroundTruth {
    scene: Arc<Scene>,
    params: PathLossParams,
    field: ShadowField,
    shadowing: bool,
}

impl GroundTruth {
    pub fn new(scene: Arc<Scene>, params: PathLossParams, shadow_seed: u64) -> Self {
        let field = ShadowField::new(shadow_seed, params.decorr_dist, params.shadow_terms);
        Self { scene, params, field, shadowing: true }
    }

    /// Path loss only; the shadowing term is identically zero.
    pub fn without_shadowing(scene: Arc<Scene>, params: PathLossParams) -> Self {
        let mut gt = Self::new(scene, params, 0);
        gt.shadowing = false;
        gt
    }

    pub fn scene(&self) -> &Scene {
        &self.scene
    }

    pub fn params(&self) -> &PathLossParams {
        &self.params
    }

    pub fn is_los(&self, tx: &Position3, rx: &Position3) -> bool {
        !los_blocked(&self.scene, tx, rx)
    }

    /// Shadowing in dB for a link, scaled by the LoS-dependent std.
    pub fn shadow_db(&self, tx: &Position3, rx: &Position3, los: bool) -> f64 {
        if !self.shadowing {
            return 0.0;
        }
        let std = if los { self.params.sigma_sh_los_db } else { self.params.sigma_sh_nlos_db };
        std * self.field.sample(&tx.midpoint(rx))
    }

    pub fn true_gain_db(&self, tx: &Position3, rx: &Position3) -> Result<f64, RadioError> {
        if tx == rx {
            return Err(RadioError::DegenerateLink);
        }
        Ok(self.gain_db(tx, rx))
    }

    /// Gain and LoS state together.
    pub fn evaluate(&self, tx: &Position3, rx: &Position3) -> (f64, bool) {
        let los = self.is_los(tx, rx);
        let g = self.params.mean_gain_db(tx.distance(rx), los) - self.shadow_db(tx, rx, los);
        (g, los)
    }

    pub fn sample(&self, tx: Position3, rx: Position3) -> ChannelSample {
        let (gain_db, los) = self.evaluate(&tx, &rx);
        ChannelSample { tx, rx, gain_db, los: Some(los) }
    }
}

impl GainModel for GroundTruth {
    fn gain_db(&self, tx: &Position3, rx: &Position3) -> f64 {
        self.evaluate(tx, rx).0
    }
}

/// One-shot ground-truth evaluation.
pub fn true_gain_db(
    scene: &Scene,
    params: &PathLossParams,
    shadow_seed: u64,
    tx: &Position3,
    rx: &Position3,
) -> Result<f64, RadioError> {
    GroundTruth::new(Arc::new(scene.clone()), params.clone(), shadow_seed).true_gain_db(tx, rx)
}

/// Measurement window of [`sample_along`].
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SampleWindow {
    pub t0: f64,
    pub horizon: f64,
    pub period: f64,
}

impl SampleWindow {
    /// Sampling instants `t0 + k period` for `k = 1..=floor(horizon / period)`.
    pub fn times(&self) -> impl Iterator<Item = f64> + '_ {
        let n = if self.period > 0.0 { (self.horizon / self.period).floor() as usize } else { 0 };
        (1..=n).map(move |k| self.t0 + k as f64 * self.period)
    }
}

/// Measurements taken by every aircraft against every peer point at each
/// sampling instant. Coincident tx/rx pairs are skipped.
pub fn sample_along(
    trajs: &[Trajectory4D],
    truth: &GroundTruth,
    window: SampleWindow,
    peers: &[Position3],
) -> Vec<ChannelSample> {
    let mut out = Vec::new();
    for t in window.times() {
        for tr in trajs {
            let tx = tr.position_at(t);
            for rx in peers {
                if tx != *rx {
                    out.push(truth.sample(tx, *rx));
                }
            }
        }
    }
    out
}

const CSV_HEADER: [&str; 7] = ["tx_x", "tx_y", "tx_z", "rx_x", "rx_y", "rx_z", "gain_db"];

pub fn write_samples_csv<W: Write>(w: W, samples: &[ChannelSample]) -> Result<(), RadioError> {
    let mut wr = csv::Writer::from_writer(w);
    wr.write_record(CSV_HEADER)?;
    for s in samples {
        wr.serialize((s.tx.x, s.tx.y, s.tx.z, s.rx.x, s.rx.y, s.rx.z, s.gain_db))?;
    }
    wr.flush().map_err(csv::Error::from)?;
    Ok(())
}

pub fn read_samples_csv<R: Read>(r: R) -> Result<Vec<ChannelSample>, RadioError> {
    let mut rd = csv::Reader::from_reader(r);
    let mut out = Vec::new();
    for rec in rd.deserialize() {
        let (tx_x, tx_y, tx_z, rx_x, rx_y, rx_z, g): (f64, f64, f64, f64, f64, f64, f64) = rec?;
        out.push(ChannelSample::new(Position3::new(tx_x, tx_y, tx_z), Position3::new(rx_x, rx_y, rx_z), g));
    }
    Ok(out)
}
