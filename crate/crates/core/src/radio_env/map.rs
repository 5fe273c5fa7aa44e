//! Radio map: k-nearest-neighbour inverse-distance weighting over raw
//! samples in the 6D space of concatenated transmitter and receiver
//! coordinates.
//!
//! Every sample is stored in both orientations and queries average the
//! `(tx, rx)` and `(rx, tx)` lookups, so answers are exactly reciprocal and
//! reproduce each training sample exactly. Samples are put in a canonical
//! order and coincident points are merged before indexing, which makes the
//! map independent of the order samples arrived in.

use std::cmp::Ordering;

use super::kdtree::{KdTree, DIM};
use super::{ChannelSample, GainModel, LargeScaleStats, RadioError};
use crate::scene::Position3;

#[derive(Debug, Clone)]
pub struct RadioMap {
    samples: Vec<ChannelSample>,
    gains: Vec<f64>,
    los: Vec<Option<f64>>,
    tree: KdTree,
    idw_exponent: f64,
    k_neighbors: usize,
    built_at: f64,
    residual_std_db: f64,
}

/// Residual std reported by queries unless overridden.
pub const DEFAULT_RESIDUAL_STD_DB: f64 = 4.0;

fn key(tx: &Position3, rx: &Position3) -> [f64; DIM] {
    [tx.x, tx.y, tx.z, rx.x, rx.y, rx.z]
}

fn cmp_key(a: &[f64; DIM], b: &[f64; DIM]) -> Ordering {
    a.iter().zip(b).map(|(x, y)| x.total_cmp(y)).find(|o| o.is_ne()).unwrap_or(Ordering::Equal)
}

pub fn build_map(
    samples: &[ChannelSample],
    idw_exponent: f64,
    k_neighbors: usize,
    built_at: f64,
) -> Result<RadioMap, RadioError> {
    RadioMap::build(samples, idw_exponent, k_neighbors, built_at)
}

impl RadioMap {
    pub fn build(
        samples: &[ChannelSample],
        idw_exponent: f64,
        k_neighbors: usize,
        built_at: f64,
    ) -> Result<Self, RadioError> {
        if samples.is_empty() {
            return Err(RadioError::EmptySampleSet);
        }
        if !(idw_exponent > 0.0 && idw_exponent.is_finite()) {
            return Err(RadioError::BadParameter("idw_exponent must be > 0".into()));
        }
        if k_neighbors == 0 {
            return Err(RadioError::BadParameter("k_neighbors must be >= 1".into()));
        }
        if let Some(bad) = samples.iter().find(|s| !s.is_finite()) {
            return Err(RadioError::BadParameter(format!("non-finite sample {bad:?}")));
        }

        let mut canon: Vec<ChannelSample> = samples.to_vec();
        canon.sort_by(|a, b| cmp_key(&key(&a.tx, &a.rx), &key(&b.tx, &b.rx)).then(a.gain_db.total_cmp(&b.gain_db)));

        let mut both: Vec<([f64; DIM], f64, Option<bool>)> = Vec::with_capacity(2 * canon.len());
        for s in &canon {
            both.push((key(&s.tx, &s.rx), s.gain_db, s.los));
            both.push((key(&s.rx, &s.tx), s.gain_db, s.los));
        }
        both.sort_by(|a, b| cmp_key(&a.0, &b.0).then(a.1.total_cmp(&b.1)));

        let mut points = Vec::with_capacity(both.len());
        let mut gains = Vec::with_capacity(both.len());
        let mut los = Vec::with_capacity(both.len());
        let mut i = 0;
        while i < both.len() {
            let mut j = i + 1;
            while j < both.len() && cmp_key(&both[i].0, &both[j].0).is_eq() {
                j += 1;
            }
            let group = &both[i..j];
            let g = group.iter().map(|e| e.1).sum::<f64>() / group.len() as f64;
            let flags: Vec<f64> = group.iter().filter_map(|e| e.2).map(|b| if b { 1.0 } else { 0.0 }).collect();
            points.push(both[i].0);
            gains.push(g);
            los.push((!flags.is_empty()).then(|| flags.iter().sum::<f64>() / flags.len() as f64));
            i = j;
        }

        Ok(Self {
            samples: canon,
            gains,
            los,
            tree: KdTree::build(points),
            idw_exponent,
            k_neighbors,
            built_at,
            residual_std_db: DEFAULT_RESIDUAL_STD_DB,
        })
    }

    pub fn with_residual_std(mut self, std_db: f64) -> Self {
        self.residual_std_db = std_db.max(0.0);
        self
    }

    /// Training samples in canonical order.
    pub fn samples(&self) -> &[ChannelSample] {
        &self.samples
    }

    pub fn idw_exponent(&self) -> f64 {
        self.idw_exponent
    }

    pub fn k_neighbors(&self) -> usize {
        self.k_neighbors
    }

    pub fn built_at(&self) -> f64 {
        self.built_at
    }

    pub fn residual_std_db(&self) -> f64 {
        self.residual_std_db
    }

    /// Number of distinct indexed points (both orientations, merged).
    pub fn indexed_points(&self) -> usize {
        self.tree.len()
    }

    fn idw(&self, q: &[f64; DIM]) -> (f64, Option<f64>) {
        let nn = self.tree.nearest(q, self.k_neighbors);
        let (d0, i0) = nn[0];
        if d0 == 0.0 {
            return (self.gains[i0], self.los[i0]);
        }
        let half_p = 0.5 * self.idw_exponent;
        let (mut wsum, mut gsum, mut lw, mut lsum) = (0.0, 0.0, 0.0, 0.0);
        for &(d2, i) in &nn {
            let w = if half_p == 1.0 { 1.0 / d2 } else { d2.powf(-half_p) };
            wsum += w;
            gsum += w * self.gains[i];
            if let Some(l) = self.los[i] {
                lw += w;
                lsum += w * l;
            }
        }
        (gsum / wsum, (lw > 0.0).then(|| lsum / lw))
    }

    pub fn query(&self, tx: &Position3, rx: &Position3) -> LargeScaleStats {
        let (g1, l1) = self.idw(&key(tx, rx));
        let (g2, l2) = self.idw(&key(rx, tx));
        let los_prob = match (l1, l2) {
            (Some(a), Some(b)) => 0.5 * (a + b),
            (Some(a), None) | (None, Some(a)) => a,
            (None, None) => 0.5,
        };
        LargeScaleStats {
            mean_gain_db: 0.5 * (g1 + g2),
            shadow_std_db: self.residual_std_db,
            los_prob: los_prob.clamp(0.0, 1.0),
        }
    }
}

impl GainModel for RadioMap {
    fn gain_db(&self, tx: &Position3, rx: &Position3) -> f64 {
        self.query(tx, rx).mean_gain_db
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::radio_env::{GroundTruth, PathLossParams};
    use crate::scene::{ObstacleBox, Scene};
    use rand::seq::SliceRandom;
    use rand::{Rng, SeedableRng};
    use std::sync::Arc;

    fn random_samples(n: usize, seed: u64) -> Vec<ChannelSample> {
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(seed);
        (0..n)
            .map(|_| {
                let mut p = || {
                    Position3::new(
                        rng.random_range(0.0..500.0),
                        rng.random_range(0.0..500.0),
                        rng.random_range(0.0..120.0),
                    )
                };
                let (a, b) = (p(), p());
                ChannelSample::new(a, b, -60.0 - 0.1 * a.distance(&b))
            })
            .collect()
    }

    #[test]
    fn single_sample_everywhere() {
        let s = ChannelSample::new(Position3::new(0.0, 0.0, 0.0), Position3::new(1.0, 1.0, 1.0), -77.0);
        let m = build_map(&[s], 2.0, 8, 0.0).unwrap();
        let q = m.query(&Position3::new(300.0, -4.0, 12.0), &Position3::new(9.0, 9.0, 9.0));
        assert_eq!(q.mean_gain_db, -77.0);
    }

    #[test]
    fn empty_and_bad_parameters() {
        assert!(matches!(build_map(&[], 2.0, 8, 0.0), Err(RadioError::EmptySampleSet)));
        let s = random_samples(3, 1);
        assert!(build_map(&s, 0.0, 8, 0.0).is_err());
        assert!(build_map(&s, 2.0, 0, 0.0).is_err());
    }

    #[test]
    fn exact_at_samples_and_reciprocal() {
        let s = random_samples(400, 2);
        let m = build_map(&s, 2.0, 8, 0.0).unwrap();
        for c in &s {
            assert_eq!(m.query(&c.tx, &c.rx).mean_gain_db, c.gain_db);
            assert_eq!(m.query(&c.rx, &c.tx).mean_gain_db, c.gain_db);
        }
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(3);
        for _ in 0..200 {
            let a = Position3::new(rng.random_range(0.0..500.0), rng.random_range(0.0..500.0), 50.0);
            let b = Position3::new(rng.random_range(0.0..500.0), rng.random_range(0.0..500.0), 2.0);
            assert_eq!(m.query(&a, &b), m.query(&b, &a));
        }
    }

    #[test]
    fn duplicates_and_order_do_not_matter() {
        let s = random_samples(300, 4);
        let base = build_map(&s, 2.0, 8, 0.0).unwrap();
        let mut shuffled = s.clone();
        shuffled.extend_from_slice(&s[..50]);
        shuffled.shuffle(&mut rand_chacha::ChaCha8Rng::seed_from_u64(5));
        let other = build_map(&shuffled, 2.0, 8, 0.0).unwrap();
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(6);
        for _ in 0..300 {
            let mut p = || {
                Position3::new(rng.random_range(0.0..500.0), rng.random_range(0.0..500.0), rng.random_range(0.0..120.0))
            };
            let (a, b) = (p(), p());
            assert_eq!(base.query(&a, &b), other.query(&a, &b));
        }
    }

    #[test]
    fn los_probability_from_flags() {
        let scene = Arc::new(Scene::open(
            ObstacleBox::new(Position3::new(0.0, 0.0, 0.0), Position3::new(1000.0, 1000.0, 200.0)).unwrap(),
        ));
        let gt = GroundTruth::new(scene, PathLossParams::default(), 1);
        let s: Vec<ChannelSample> = (0..20)
            .map(|k| gt.sample(Position3::new(k as f64 * 10.0, 0.0, 100.0), Position3::new(0.0, 50.0, 1.5)))
            .collect();
        let m = build_map(&s, 2.0, 4, 0.0).unwrap();
        let q = m.query(&Position3::new(55.0, 3.0, 100.0), &Position3::new(0.0, 50.0, 1.5));
        assert_eq!(q.los_prob, 1.0);
        assert_eq!(q.shadow_std_db, DEFAULT_RESIDUAL_STD_DB);
    }
}
