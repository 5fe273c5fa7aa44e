//! Pre-filed 4D trajectories and their realized deviations.
//!
//! A plan is a piecewise-linear path through timed waypoints; queries before
//! launch or after landing clamp to the terminal pads. The realized path
//! adds an independent Ornstein-Uhlenbeck offset on each axis, which drifts
//! away from the plan and reverts towards it.

use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::channel_graph::SlotGrid;
use crate::rng;
use crate::scene::{NodeId, Position3};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum TrajectoryError {
    #[error("trajectory {0} needs at least two waypoints")]
    TooFewWaypoints(NodeId),
    #[error("trajectory {id}: waypoint {index} is invalid or out of time order")]
    BadWaypoint { id: NodeId, index: usize },
    #[error("trajectory {id}: speed {speed:.2} m/s on leg {leg} exceeds {v_max} m/s")]
    TooFast { id: NodeId, leg: usize, speed: f64, v_max: f64 },
    #[error("invalid deviation parameters: {0}")]
    BadDeviation(String),
}

/// A timed point of a flight plan. Serialized as `[t, x, y, z]`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(from = "[f64; 4]", into = "[f64; 4]")]
pub struct Waypoint {
    pub t: f64,
    pub pos: Position3,
}

impl From<[f64; 4]> for Waypoint {
    fn from(a: [f64; 4]) -> Self {
        Waypoint { t: a[0], pos: Position3::new(a[1], a[2], a[3]) }
    }
}

impl From<Waypoint> for [f64; 4] {
    fn from(w: Waypoint) -> Self {
        [w.t, w.pos.x, w.pos.y, w.pos.z]
    }
}

impl Waypoint {
    pub fn new(t: f64, pos: Position3) -> Self {
        Self { t, pos }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "TrajectoryDoc")]
pub struct Trajectory4D {
    aircraft_id: NodeId,
    waypoints: Vec<Waypoint>,
}

#[derive(Deserialize)]
struct TrajectoryDoc {
    aircraft_id: NodeId,
    waypoints: Vec<Waypoint>,
}

impl TryFrom<TrajectoryDoc> for Trajectory4D {
    type Error = TrajectoryError;
    fn try_from(d: TrajectoryDoc) -> Result<Self, TrajectoryError> {
        Trajectory4D::new(d.aircraft_id, d.waypoints)
    }
}

impl Trajectory4D {
    /// Checks waypoint count, validity and strict time ordering.
    pub fn new(aircraft_id: NodeId, waypoints: Vec<Waypoint>) -> Result<Self, TrajectoryError> {
        if waypoints.len() < 2 {
            return Err(TrajectoryError::TooFewWaypoints(aircraft_id));
        }
        for (index, w) in waypoints.iter().enumerate() {
            let ordered = index == 0 || w.t > waypoints[index - 1].t;
            if !(w.t.is_finite() && w.t >= 0.0 && w.pos.is_valid() && ordered) {
                return Err(TrajectoryError::BadWaypoint { id: aircraft_id, index });
            }
        }
        Ok(Self { aircraft_id, waypoints })
    }

    /// Like [`Trajectory4D::new`], additionally bounding the implied speed.
    pub fn with_speed_limit(
        aircraft_id: NodeId,
        waypoints: Vec<Waypoint>,
        v_max: f64,
    ) -> Result<Self, TrajectoryError> {
        let traj = Self::new(aircraft_id, waypoints)?;
        for (leg, w) in traj.waypoints.windows(2).enumerate() {
            let speed = w[0].pos.distance(&w[1].pos) / (w[1].t - w[0].t);
            if speed > v_max {
                return Err(TrajectoryError::TooFast { id: aircraft_id, leg, speed, v_max });
            }
        }
        Ok(traj)
    }

    /// A parked aircraft: the same position at both ends of the window.
    pub fn stationary(aircraft_id: NodeId, pos: Position3, t_end: f64) -> Self {
        Self::new(aircraft_id, vec![Waypoint::new(0.0, pos), Waypoint::new(t_end.max(1e-9), pos)])
            .expect("stationary trajectory is valid")
    }

    pub fn aircraft_id(&self) -> NodeId {
        self.aircraft_id
    }

    pub fn waypoints(&self) -> &[Waypoint] {
        &self.waypoints
    }

    pub fn start_time(&self) -> f64 {
        self.waypoints[0].t
    }

    pub fn end_time(&self) -> f64 {
        self.waypoints[self.waypoints.len() - 1].t
    }

    pub fn max_speed(&self) -> f64 {
        self.waypoints.windows(2).map(|w| w[0].pos.distance(&w[1].pos) / (w[1].t - w[0].t)).fold(0.0, f64::max)
    }

    /// Planned position at time `t`, clamped outside the plan's time span.
    pub fn position_at(&self, t: f64) -> Position3 {
        let w = &self.waypoints;
        if t <= w[0].t {
            return w[0].pos;
        }
        let last = w[w.len() - 1];
        if t >= last.t {
            return last.pos;
        }
        let k = w.partition_point(|p| p.t <= t);
        let (a, b) = (w[k - 1], w[k]);
        if t == a.t {
            return a.pos;
        }
        a.pos.lerp(&b.pos, (t - a.t) / (b.t - a.t))
    }
}

/// Stationary per-axis offset std and mean-reversion rate of the
/// deviation process.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DeviationParams {
    /// Meters.
    pub sigma_dev: f64,
    /// Per second.
    pub reversion_rate: f64,
}

impl Default for DeviationParams {
    fn default() -> Self {
        Self { sigma_dev: 3.0, reversion_rate: 0.1 }
    }
}

impl DeviationParams {
    pub fn validate(&self) -> Result<(), TrajectoryError> {
        if !(self.sigma_dev >= 0.0 && self.sigma_dev.is_finite()) {
            return Err(TrajectoryError::BadDeviation("sigma_dev must be >= 0".into()));
        }
        if !(self.reversion_rate > 0.0 && self.reversion_rate.is_finite()) {
            return Err(TrajectoryError::BadDeviation("reversion_rate must be > 0".into()));
        }
        Ok(())
    }

    /// Variance of the change in one axis' offset over `lag` seconds.
    pub fn increment_variance(&self, lag: f64) -> f64 {
        2.0 * self.sigma_dev * self.sigma_dev * (1.0 - (-self.reversion_rate * lag.max(0.0)).exp())
    }
}

/// Stationary OU offsets on the slot grid, discretized exactly:
/// `x[k+1] = a x[k] + sigma sqrt(1 - a^2) n[k]` with `a = exp(-rate dt)`.
pub fn ou_offsets(aircraft_id: NodeId, dev: &DeviationParams, grid: &SlotGrid, seed: u64) -> Vec<[f64; 3]> {
    let mut out = Vec::with_capacity(grid.n_slots);
    if dev.sigma_dev == 0.0 {
        out.resize(grid.n_slots, [0.0; 3]);
        return out;
    }
    let mut rng = rng::stream_rng(seed, rng::DEVIATION, aircraft_id.0 as u64);
    let a = (-dev.reversion_rate * grid.dt).exp();
    let innov = dev.sigma_dev * (1.0 - a * a).sqrt();
    let mut x = [0.0; 3];
    for v in x.iter_mut() {
        let n: f64 = StandardNormal.sample(&mut rng);
        *v = dev.sigma_dev * n;
    }
    out.push(x);
    for _ in 1..grid.n_slots {
        for v in x.iter_mut() {
            let n: f64 = StandardNormal.sample(&mut rng);
            *v = a * *v + innov * n;
        }
        out.push(x);
    }
    out
}

/// Applies an offset to a planned position, keeping it above ground.
pub fn offset_position(planned: Position3, offset: [f64; 3]) -> Position3 {
    Position3::new(planned.x + offset[0], planned.y + offset[1], (planned.z + offset[2]).max(0.0))
}

/// Realized positions on the slot grid: plan plus OU offset.
pub fn realize(traj: &Trajectory4D, dev: &DeviationParams, grid: &SlotGrid, seed: u64) -> Vec<Position3> {
    ou_offsets(traj.aircraft_id(), dev, grid, seed)
        .into_iter()
        .enumerate()
        .map(|(k, off)| offset_position(traj.position_at(grid.time(k)), off))
        .collect()
}

/// The realized series as a trajectory with one waypoint per slot.
pub fn realized_trajectory(traj: &Trajectory4D, dev: &DeviationParams, grid: &SlotGrid, seed: u64) -> Trajectory4D {
    let pts = realize(traj, dev, grid, seed);
    if pts.len() < 2 {
        return Trajectory4D::stationary(traj.aircraft_id(), pts[0], grid.t0 + grid.dt);
    }
    let wps = pts.into_iter().enumerate().map(|(k, p)| Waypoint::new(grid.time(k), p)).collect();
    Trajectory4D::new(traj.aircraft_id(), wps).expect("slot grid times are increasing")
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};

    fn zigzag() -> Trajectory4D {
        Trajectory4D::new(
            NodeId(1),
            vec![
                Waypoint::new(0.0, Position3::new(0.0, 0.0, 100.0)),
                Waypoint::new(10.0, Position3::new(100.0, 0.0, 100.0)),
                Waypoint::new(25.0, Position3::new(100.0, 150.0, 80.0)),
                Waypoint::new(40.0, Position3::new(-20.0, 150.0, 120.0)),
            ],
        )
        .unwrap()
    }

    #[test]
    fn exact_at_waypoints_and_clamped() {
        let tr = zigzag();
        for w in tr.waypoints() {
            assert_eq!(tr.position_at(w.t), w.pos);
        }
        assert_eq!(tr.position_at(-5.0), tr.waypoints()[0].pos);
        assert_eq!(tr.position_at(1e6), tr.waypoints()[3].pos);
    }

    #[test]
    fn midpoint_is_mean_of_endpoints() {
        let tr = zigzag();
        let p = tr.position_at(17.5);
        let (a, b) = (tr.waypoints()[1].pos, tr.waypoints()[2].pos);
        assert!((p.x - 0.5 * (a.x + b.x)).abs() < 1e-12);
        assert!((p.y - 0.5 * (a.y + b.y)).abs() < 1e-12);
        assert!((p.z - 0.5 * (a.z + b.z)).abs() < 1e-12);
    }

    /// Straight-line lookup written without `partition_point`.
    fn lerp_oracle(w: &[Waypoint], t: f64) -> [f64; 3] {
        if t <= w[0].t {
            return w[0].pos.to_array();
        }
        for seg in w.windows(2) {
            if t <= seg[1].t {
                let f = (t - seg[0].t) / (seg[1].t - seg[0].t);
                let (a, b) = (seg[0].pos.to_array(), seg[1].pos.to_array());
                return [0, 1, 2].map(|i| a[i] * (1.0 - f) + b[i] * f);
            }
        }
        w[w.len() - 1].pos.to_array()
    }

    #[test]
    fn random_times_match_independent_lerp() {
        let tr = zigzag();
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(5);
        for _ in 0..100 {
            let t = rng.random_range(-2.0..45.0);
            let got = tr.position_at(t).to_array();
            let want = lerp_oracle(tr.waypoints(), t);
            for i in 0..3 {
                let scale = want[i].abs().max(1.0);
                assert!((got[i] - want[i]).abs() <= 1e-12 * scale, "t={t} axis {i}");
            }
        }
    }

    #[test]
    fn rejects_bad_plans() {
        let p = Position3::new(0.0, 0.0, 10.0);
        assert!(Trajectory4D::new(NodeId(1), vec![Waypoint::new(0.0, p)]).is_err());
        assert!(Trajectory4D::new(NodeId(1), vec![Waypoint::new(1.0, p), Waypoint::new(1.0, p)]).is_err());
        let fast = vec![Waypoint::new(0.0, p), Waypoint::new(1.0, Position3::new(100.0, 0.0, 10.0))];
        assert!(matches!(Trajectory4D::with_speed_limit(NodeId(1), fast, 30.0), Err(TrajectoryError::TooFast { .. })));
    }

    #[test]
    fn json_uses_tuple_waypoints() {
        let text = serde_json::to_string(&zigzag()).unwrap();
        assert!(text.starts_with(r#"{"aircraft_id":1,"waypoints":[[0.0,0.0,0.0,100.0]"#));
        let back: Trajectory4D = serde_json::from_str(&text).unwrap();
        assert_eq!(back, zigzag());
        assert!(serde_json::from_str::<Trajectory4D>(r#"{"aircraft_id":1,"waypoints":[[0,0,0,0]]}"#).is_err());
    }

    fn grid(n: usize) -> SlotGrid {
        SlotGrid::new(0.0, 0.1, n).unwrap()
    }

    #[test]
    fn zero_deviation_reproduces_plan() {
        let tr = zigzag();
        let g = grid(400);
        let dev = DeviationParams { sigma_dev: 0.0, reversion_rate: 0.5 };
        let real = realize(&tr, &dev, &g, 9);
        for (k, p) in real.iter().enumerate() {
            assert_eq!(*p, tr.position_at(g.time(k)));
        }
    }

    #[test]
    fn realization_is_deterministic() {
        let tr = zigzag();
        let g = grid(300);
        let dev = DeviationParams::default();
        assert_eq!(realize(&tr, &dev, &g, 4), realize(&tr, &dev, &g, 4));
        assert_ne!(realize(&tr, &dev, &g, 4), realize(&tr, &dev, &g, 5));
    }

    #[test]
    fn offsets_are_zero_mean_per_slot() {
        let dev = DeviationParams { sigma_dev: 2.0, reversion_rate: 0.2 };
        let g = grid(50);
        let seeds = 1000;
        let mut sum = vec![[0.0; 3]; g.n_slots];
        for s in 0..seeds {
            for (k, o) in ou_offsets(NodeId(7), &dev, &g, s).iter().enumerate() {
                for i in 0..3 {
                    sum[k][i] += o[i];
                }
            }
        }
        let tol = 4.0 * dev.sigma_dev / (seeds as f64).sqrt();
        for row in &sum {
            for v in row {
                assert!((v / seeds as f64).abs() < tol);
            }
        }
    }

    #[test]
    fn stationary_variance_and_autocorrelation() {
        let dev = DeviationParams { sigma_dev: 3.0, reversion_rate: 0.5 };
        let g = grid(200_000);
        let off = ou_offsets(NodeId(3), &dev, &g, 77);
        let n = off.len() as f64;
        let var = off.iter().map(|o| o[0] * o[0]).sum::<f64>() / n;
        let rel = (var / (dev.sigma_dev * dev.sigma_dev) - 1.0).abs();
        assert!(rel < 0.10, "variance off by {rel}");

        // lag of 2 s = 20 slots: closed form exp(-1)
        let lag = 20;
        let cov = off.windows(lag + 1).map(|w| w[0][1] * w[lag][1]).sum::<f64>() / (n - lag as f64);
        let var_y = off.iter().map(|o| o[1] * o[1]).sum::<f64>() / n;
        let rho = cov / var_y;
        let want = (-dev.reversion_rate * lag as f64 * g.dt).exp();
        assert!((rho - want).abs() < 0.05, "rho {rho} vs {want}");
    }
}
