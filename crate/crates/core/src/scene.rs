//! Static 3D world: bounds, box-shaped buildings, ground terminals and
//! interference-sensitive nodes, plus binary line-of-sight occlusion.
//!
//! Coordinates are meters in a local east-north-up frame. Obstacles are
//! axis-aligned boxes; a segment is blocked only if it passes through the
//! open interior of a box, so endpoints lying on a face see outward.

use std::collections::BTreeSet;
use std::fmt;
use std::ops::{Add, Mul, Sub};

use rand::Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::rng;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum SceneError {
    #[error("invalid box: max {max:?} must exceed min {min:?} on every axis")]
    DegenerateBox { min: Position3, max: Position3 },
    #[error("non-finite or below-ground position {0:?}")]
    InvalidPosition(Position3),
    #[error("{what} lies outside the scene bounds")]
    OutOfBounds { what: String },
    #[error("node {0} lies strictly inside an obstacle")]
    InsideObstacle(NodeId),
    #[error("duplicate node id {0}")]
    DuplicateId(NodeId),
    #[error("generation failed: {0}")]
    GenerationFailed(String),
}

/// Identifier shared by aircraft and ground nodes.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(transparent)]
pub struct NodeId(pub u32);

impl fmt::Display for NodeId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.0)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct Position3 {
    pub x: f64,
    pub y: f64,
    pub z: f64,
}

impl Position3 {
    pub const fn new(x: f64, y: f64, z: f64) -> Self {
        Self { x, y, z }
    }

    pub fn to_array(self) -> [f64; 3] {
        [self.x, self.y, self.z]
    }

    pub fn from_array(a: [f64; 3]) -> Self {
        Self::new(a[0], a[1], a[2])
    }

    pub fn is_finite(&self) -> bool {
        self.x.is_finite() && self.y.is_finite() && self.z.is_finite()
    }

    /// Finite and not below ground.
    pub fn is_valid(&self) -> bool {
        self.is_finite() && self.z >= 0.0
    }

    pub fn distance(&self, other: &Position3) -> f64 {
        let (dx, dy, dz) = (self.x - other.x, self.y - other.y, self.z - other.z);
        (dx * dx + dy * dy + dz * dz).sqrt()
    }

    pub fn horizontal_distance(&self, other: &Position3) -> f64 {
        (self.x - other.x).hypot(self.y - other.y)
    }

    pub fn lerp(&self, other: &Position3, s: f64) -> Position3 {
        *self + (*other - *self) * s
    }

    pub fn midpoint(&self, other: &Position3) -> Position3 {
        Position3::new((self.x + other.x) * 0.5, (self.y + other.y) * 0.5, (self.z + other.z) * 0.5)
    }

    fn axis(&self, i: usize) -> f64 {
        match i {
            0 => self.x,
            1 => self.y,
            _ => self.z,
        }
    }

    fn lex_gt(&self, other: &Position3) -> bool {
        self.to_array()
            .iter()
            .zip(other.to_array().iter())
            .map(|(a, b)| a.total_cmp(b))
            .find(|o| o.is_ne())
            .is_some_and(|o| o.is_gt())
    }
}

impl Add for Position3 {
    type Output = Position3;
    fn add(self, o: Position3) -> Position3 {
        Position3::new(self.x + o.x, self.y + o.y, self.z + o.z)
    }
}

impl Sub for Position3 {
    type Output = Position3;
    fn sub(self, o: Position3) -> Position3 {
        Position3::new(self.x - o.x, self.y - o.y, self.z - o.z)
    }
}

impl Mul<f64> for Position3 {
    type Output = Position3;
    fn mul(self, s: f64) -> Position3 {
        Position3::new(self.x * s, self.y * s, self.z * s)
    }
}

/// Axis-aligned box given by its minimum and maximum corners.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "BoxDoc")]
pub struct ObstacleBox {
    pub min: Position3,
    pub max: Position3,
}

#[derive(Deserialize)]
struct BoxDoc {
    min: Position3,
    max: Position3,
}

impl TryFrom<BoxDoc> for ObstacleBox {
    type Error = SceneError;
    fn try_from(d: BoxDoc) -> Result<Self, SceneError> {
        ObstacleBox::new(d.min, d.max)
    }
}

impl ObstacleBox {
    pub fn new(min: Position3, max: Position3) -> Result<Self, SceneError> {
        let ok = min.is_finite() && max.is_finite() && max.x > min.x && max.y > min.y && max.z > min.z;
        if !ok {
            return Err(SceneError::DegenerateBox { min, max });
        }
        Ok(Self { min, max })
    }

    pub fn contains_strict(&self, p: &Position3) -> bool {
        (0..3).all(|i| p.axis(i) > self.min.axis(i) && p.axis(i) < self.max.axis(i))
    }

    pub fn contains_closed(&self, p: &Position3) -> bool {
        (0..3).all(|i| p.axis(i) >= self.min.axis(i) && p.axis(i) <= self.max.axis(i))
    }

    pub fn contains_box(&self, other: &ObstacleBox) -> bool {
        self.contains_closed(&other.min) && self.contains_closed(&other.max)
    }

    /// Slab test: does the open segment (a, b) meet the open interior?
    pub fn segment_hits_interior(&self, a: &Position3, b: &Position3) -> bool {
        let mut lo = 0.0f64;
        let mut hi = 1.0f64;
        for i in 0..3 {
            let p = a.axis(i);
            let d = b.axis(i) - p;
            let (mn, mx) = (self.min.axis(i), self.max.axis(i));
            if d == 0.0 {
                if p <= mn || p >= mx {
                    return false;
                }
                continue;
            }
            let t1 = (mn - p) / d;
            let t2 = (mx - p) / d;
            let (enter, exit) = if t1 < t2 { (t1, t2) } else { (t2, t1) };
            lo = lo.max(enter);
            hi = hi.min(exit);
            if lo >= hi {
                return false;
            }
        }
        lo < hi
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum NodeRole {
    Source,
    Destination,
    Sensitive,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GroundNode {
    pub id: NodeId,
    pub pos: Position3,
}

/// Immutable world description. Construct with [`Scene::new`], which checks
/// every invariant.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "SceneDoc", into = "SceneDoc")]
pub struct Scene {
    bounds: ObstacleBox,
    obstacles: Vec<ObstacleBox>,
    ground_sources: Vec<GroundNode>,
    ground_destinations: Vec<GroundNode>,
    sensitive_nodes: Vec<GroundNode>,
}

impl Scene {
    pub fn new(
        bounds: ObstacleBox,
        obstacles: Vec<ObstacleBox>,
        ground_sources: Vec<GroundNode>,
        ground_destinations: Vec<GroundNode>,
        sensitive_nodes: Vec<GroundNode>,
    ) -> Result<Self, SceneError> {
        for (k, o) in obstacles.iter().enumerate() {
            if !bounds.contains_box(o) {
                return Err(SceneError::OutOfBounds { what: format!("obstacle {k}") });
            }
        }
        let mut seen = BTreeSet::new();
        for n in ground_sources.iter().chain(&ground_destinations).chain(&sensitive_nodes) {
            if !n.pos.is_valid() {
                return Err(SceneError::InvalidPosition(n.pos));
            }
            if !bounds.contains_closed(&n.pos) {
                return Err(SceneError::OutOfBounds { what: format!("node {}", n.id) });
            }
            if obstacles.iter().any(|o| o.contains_strict(&n.pos)) {
                return Err(SceneError::InsideObstacle(n.id));
            }
            if !seen.insert(n.id) {
                return Err(SceneError::DuplicateId(n.id));
            }
        }
        Ok(Self { bounds, obstacles, ground_sources, ground_destinations, sensitive_nodes })
    }

    /// An empty scene (no buildings, no ground nodes) inside `bounds`.
    pub fn open(bounds: ObstacleBox) -> Self {
        Self {
            bounds,
            obstacles: Vec::new(),
            ground_sources: Vec::new(),
            ground_destinations: Vec::new(),
            sensitive_nodes: Vec::new(),
        }
    }

    pub fn bounds(&self) -> &ObstacleBox {
        &self.bounds
    }

    pub fn obstacles(&self) -> &[ObstacleBox] {
        &self.obstacles
    }

    pub fn ground_sources(&self) -> &[GroundNode] {
        &self.ground_sources
    }

    pub fn ground_destinations(&self) -> &[GroundNode] {
        &self.ground_destinations
    }

    pub fn sensitive_nodes(&self) -> &[GroundNode] {
        &self.sensitive_nodes
    }

    /// Sources followed by destinations.
    pub fn terminals(&self) -> impl Iterator<Item = &GroundNode> {
        self.ground_sources.iter().chain(&self.ground_destinations)
    }

    pub fn node_ids(&self) -> impl Iterator<Item = NodeId> + '_ {
        self.terminals().chain(&self.sensitive_nodes).map(|n| n.id)
    }

    pub fn los_blocked(&self, a: &Position3, b: &Position3) -> bool {
        los_blocked(self, a, b)
    }
}

/// True iff the open segment (a, b) crosses the interior of any obstacle.
///
/// The endpoints are put in a canonical order first so the result is
/// bit-for-bit symmetric in its arguments.
pub fn los_blocked(scene: &Scene, a: &Position3, b: &Position3) -> bool {
    let (p, q) = if a.lex_gt(b) { (b, a) } else { (a, b) };
    scene.obstacles.iter().any(|o| o.segment_hits_interior(p, q))
}

// JSON document layout: bounds, obstacles[], nodes[] with role tags.

#[derive(Serialize, Deserialize)]
struct SceneDoc {
    bounds: ObstacleBox,
    obstacles: Vec<ObstacleBox>,
    nodes: Vec<NodeDoc>,
}

#[derive(Serialize, Deserialize)]
struct NodeDoc {
    id: NodeId,
    role: NodeRole,
    x: f64,
    y: f64,
    z: f64,
}

impl TryFrom<SceneDoc> for Scene {
    type Error = SceneError;
    fn try_from(doc: SceneDoc) -> Result<Self, SceneError> {
        let (mut src, mut dst, mut sens) = (Vec::new(), Vec::new(), Vec::new());
        for n in doc.nodes {
            let g = GroundNode { id: n.id, pos: Position3::new(n.x, n.y, n.z) };
            match n.role {
                NodeRole::Source => src.push(g),
                NodeRole::Destination => dst.push(g),
                NodeRole::Sensitive => sens.push(g),
            }
        }
        Scene::new(doc.bounds, doc.obstacles, src, dst, sens)
    }
}

impl From<Scene> for SceneDoc {
    fn from(s: Scene) -> Self {
        let tag = |nodes: Vec<GroundNode>, role: NodeRole| {
            nodes.into_iter().map(move |g| NodeDoc { id: g.id, role, x: g.pos.x, y: g.pos.y, z: g.pos.z })
        };
        let nodes = tag(s.ground_sources, NodeRole::Source)
            .chain(tag(s.ground_destinations, NodeRole::Destination))
            .chain(tag(s.sensitive_nodes, NodeRole::Sensitive))
            .collect();
        SceneDoc { bounds: s.bounds, obstacles: s.obstacles, nodes }
    }
}

/// Parameters of the synthetic city generator.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct CityParams {
    /// Extent of the world box, which spans `[0, extent]` on each axis.
    pub extent: [f64; 3],
    pub n_buildings: usize,
    pub footprint_min: f64,
    pub footprint_max: f64,
    pub height_min: f64,
    pub height_max: f64,
    pub n_sources: usize,
    pub n_destinations: usize,
    pub n_sensitive: usize,
    /// Antenna height of every ground node.
    pub node_height: f64,
    /// Keep ground nodes this far from the world edge.
    pub edge_margin: f64,
    /// Minimum horizontal distance from a sensitive node to any source or
    /// destination.
    pub sensitive_clearance: f64,
    pub max_retries: usize,
}

impl Default for CityParams {
    fn default() -> Self {
        Self {
            extent: [1000.0, 1000.0, 150.0],
            n_buildings: 20,
            footprint_min: 20.0,
            footprint_max: 80.0,
            height_min: 10.0,
            height_max: 50.0,
            n_sources: 3,
            n_destinations: 3,
            n_sensitive: 5,
            node_height: 1.5,
            edge_margin: 50.0,
            sensitive_clearance: 150.0,
            max_retries: 1000,
        }
    }
}

/// First id of each ground role; aircraft use ids below `SOURCE_ID_BASE`.
pub const SOURCE_ID_BASE: u32 = 100;
pub const DESTINATION_ID_BASE: u32 = 200;
pub const SENSITIVE_ID_BASE: u32 = 300;

/// Generates a reproducible city: uniform random box footprints with
/// uniform heights, then ground nodes re-sampled until they sit outside
/// every building. Sensitive nodes are also kept `sensitive_clearance` away
/// from every terminal.
pub fn gen_city(params: &CityParams, seed: u64) -> Result<Scene, SceneError> {
    let [ex, ey, ez] = params.extent;
    let bounds = ObstacleBox::new(Position3::new(0.0, 0.0, 0.0), Position3::new(ex, ey, ez))?;
    if params.footprint_min <= 0.0
        || params.footprint_max < params.footprint_min
        || params.footprint_max > ex.min(ey)
        || params.height_min <= 0.0
        || params.height_max < params.height_min
        || params.height_max > ez
    {
        return Err(SceneError::GenerationFailed("building dimensions outside bounds".into()));
    }
    for (what, n) in [
        ("sources", params.n_sources),
        ("destinations", params.n_destinations),
        ("sensitive nodes", params.n_sensitive),
    ] {
        if n > 99 {
            return Err(SceneError::GenerationFailed(format!("too many {what} (max 99)")));
        }
    }
    let mut rng = rng::stream_rng(seed, rng::CITY, 0);

    let mut obstacles = Vec::with_capacity(params.n_buildings);
    for _ in 0..params.n_buildings {
        let w = rng.random_range(params.footprint_min..=params.footprint_max);
        let l = rng.random_range(params.footprint_min..=params.footprint_max);
        let h = rng.random_range(params.height_min..=params.height_max);
        let x0 = rng.random_range(0.0..=(ex - w));
        let y0 = rng.random_range(0.0..=(ey - l));
        obstacles.push(ObstacleBox::new(Position3::new(x0, y0, 0.0), Position3::new(x0 + w, y0 + l, h))?);
    }

    let margin = params.edge_margin.clamp(0.0, 0.5 * ex.min(ey));
    let mut place =
        |base: u32, count: usize, keep_away: &[GroundNode], clearance: f64| -> Result<Vec<GroundNode>, SceneError> {
            (0..count)
                .map(|k| {
                    let id = NodeId(base + k as u32 + 1);
                    for _ in 0..=params.max_retries {
                        let p = Position3::new(
                            rng.random_range(margin..=(ex - margin)),
                            rng.random_range(margin..=(ey - margin)),
                            params.node_height,
                        );
                        if !obstacles.iter().any(|o| o.contains_strict(&p))
                            && keep_away.iter().all(|g| g.pos.horizontal_distance(&p) >= clearance)
                        {
                            return Ok(GroundNode { id, pos: p });
                        }
                    }
                    Err(SceneError::GenerationFailed(format!(
                        "could not place node {id} clear of obstacles and terminals after {} tries",
                        params.max_retries + 1
                    )))
                })
                .collect()
        };
    let sources = place(SOURCE_ID_BASE, params.n_sources, &[], 0.0)?;
    let destinations = place(DESTINATION_ID_BASE, params.n_destinations, &[], 0.0)?;
    let terminals: Vec<GroundNode> = sources.iter().chain(&destinations).copied().collect();
    let sensitive = place(SENSITIVE_ID_BASE, params.n_sensitive, &terminals, params.sensitive_clearance)?;
    Scene::new(bounds, obstacles, sources, destinations, sensitive)
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;
    use rand::{Rng, SeedableRng};

    fn unit_box() -> ObstacleBox {
        ObstacleBox::new(Position3::new(0.0, 0.0, 0.0), Position3::new(10.0, 10.0, 10.0)).unwrap()
    }

    fn scene_with(obstacles: Vec<ObstacleBox>) -> Scene {
        let bounds =
            ObstacleBox::new(Position3::new(-100.0, -100.0, 0.0), Position3::new(100.0, 100.0, 100.0)).unwrap();
        Scene::new(bounds, obstacles, vec![], vec![], vec![]).unwrap()
    }

    /// Tests 10^4 interior points of the segment for strict containment.
    fn dense_oracle(scene: &Scene, a: &Position3, b: &Position3) -> bool {
        const N: usize = 10_000;
        (0..N).any(|i| {
            let t = (i as f64 + 0.5) / N as f64;
            let p = a.lerp(b, t);
            scene.obstacles().iter().any(|o| o.contains_strict(&p))
        })
    }

    #[test]
    fn empty_scene_never_blocks() {
        let s = scene_with(vec![]);
        assert!(!s.los_blocked(&Position3::new(-50.0, 3.0, 1.0), &Position3::new(80.0, 2.0, 90.0)));
    }

    #[test]
    fn segment_through_center_is_blocked() {
        let s = scene_with(vec![unit_box()]);
        let a = Position3::new(-5.0, 5.0, 5.0);
        let b = Position3::new(15.0, 5.0, 5.0);
        assert!(s.los_blocked(&a, &b));
        assert!(s.los_blocked(&b, &a));
    }

    #[test]
    fn face_contact_is_not_blocked() {
        let s = scene_with(vec![unit_box()]);
        // endpoint on the face, pointing outward
        assert!(!s.los_blocked(&Position3::new(10.0, 5.0, 5.0), &Position3::new(30.0, 5.0, 5.0)));
        // grazing along the top face
        assert!(!s.los_blocked(&Position3::new(-5.0, 5.0, 10.0), &Position3::new(15.0, 5.0, 10.0)));
        // endpoint on the face, pointing inward
        assert!(s.los_blocked(&Position3::new(10.0, 5.0, 5.0), &Position3::new(5.0, 5.0, 5.0)));
    }

    #[test]
    fn slab_test_agrees_with_dense_sampling() {
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(11);
        let mut boxes = Vec::new();
        for _ in 0..4 {
            let c = [rng.random_range(-60.0..60.0), rng.random_range(-60.0..60.0), 0.0];
            let h = [rng.random_range(5.0..30.0), rng.random_range(5.0..30.0), rng.random_range(5.0..60.0)];
            boxes.push(
                ObstacleBox::new(
                    Position3::new(c[0] - h[0], c[1] - h[1], 0.0),
                    Position3::new(c[0] + h[0], c[1] + h[1], h[2]),
                )
                .unwrap(),
            );
        }
        let s = scene_with(boxes);
        let mut blocked = 0;
        for _ in 0..1000 {
            let mut p = || {
                Position3::new(
                    rng.random_range(-100.0..100.0),
                    rng.random_range(-100.0..100.0),
                    rng.random_range(0.0..80.0),
                )
            };
            let (a, b) = (p(), p());
            let fast = s.los_blocked(&a, &b);
            assert_eq!(fast, dense_oracle(&s, &a, &b), "a={a:?} b={b:?}");
            blocked += fast as usize;
        }
        // both outcomes must be exercised
        assert!(blocked > 100 && blocked < 900, "blocked = {blocked}");
    }

    fn arb_pos() -> impl Strategy<Value = Position3> {
        (-30.0..30.0f64, -30.0..30.0f64, 0.0..30.0f64).prop_map(|(x, y, z)| Position3::new(x, y, z))
    }

    proptest! {
        #[test]
        fn los_is_symmetric(a in arb_pos(), b in arb_pos()) {
            let s = scene_with(vec![unit_box()]);
            prop_assert_eq!(s.los_blocked(&a, &b), s.los_blocked(&b, &a));
        }

        #[test]
        fn shrinking_never_creates_blockage(
            a in arb_pos(), b in arb_pos(),
            lo in prop::array::uniform3(0.0..0.45f64), hi in prop::array::uniform3(0.0..0.45f64),
        ) {
            let big = unit_box();
            let small = ObstacleBox::new(
                Position3::new(10.0 * lo[0], 10.0 * lo[1], 10.0 * lo[2]),
                Position3::new(10.0 - 10.0 * hi[0], 10.0 - 10.0 * hi[1], 10.0 - 10.0 * hi[2]),
            ).unwrap();
            let before = scene_with(vec![big]).los_blocked(&a, &b);
            let after = scene_with(vec![small]).los_blocked(&a, &b);
            prop_assert!(before || !after);
        }
    }

    fn check_invariants(s: &Scene) {
        let rebuilt = Scene::new(
            *s.bounds(),
            s.obstacles().to_vec(),
            s.ground_sources().to_vec(),
            s.ground_destinations().to_vec(),
            s.sensitive_nodes().to_vec(),
        );
        assert_eq!(rebuilt.as_ref(), Ok(s));
        for n in s.terminals().chain(s.sensitive_nodes()) {
            assert!(s.obstacles().iter().all(|o| !o.contains_strict(&n.pos)));
        }
    }

    #[test]
    fn city_without_buildings() {
        let p = CityParams { n_buildings: 0, ..Default::default() };
        let s = gen_city(&p, 3).unwrap();
        assert!(s.obstacles().is_empty());
        assert_eq!(s.ground_sources().len(), 3);
    }

    #[test]
    fn city_generation_is_deterministic() {
        let p = CityParams::default();
        assert_eq!(gen_city(&p, 42).unwrap(), gen_city(&p, 42).unwrap());
        assert_ne!(gen_city(&p, 42).unwrap(), gen_city(&p, 43).unwrap());
    }

    #[test]
    fn hundred_cities_satisfy_invariants() {
        let p = CityParams { n_buildings: 40, ..Default::default() };
        for seed in 0..100 {
            check_invariants(&gen_city(&p, seed).unwrap());
        }
    }

    #[test]
    fn placement_gives_up_when_city_is_solid() {
        let p = CityParams {
            extent: [100.0, 100.0, 50.0],
            n_buildings: 1,
            footprint_min: 100.0,
            footprint_max: 100.0,
            height_min: 10.0,
            height_max: 10.0,
            edge_margin: 10.0,
            max_retries: 20,
            ..Default::default()
        };
        assert!(matches!(gen_city(&p, 1), Err(SceneError::GenerationFailed(_))));
    }

    #[test]
    fn json_round_trip_and_validation() {
        let s = gen_city(&CityParams::default(), 5).unwrap();
        let text = serde_json::to_string(&s).unwrap();
        assert!(text.contains("\"role\":\"sensitive\""));
        let back: Scene = serde_json::from_str(&text).unwrap();
        assert_eq!(back, s);

        let bad = r#"{"bounds":{"min":{"x":0,"y":0,"z":0},"max":{"x":10,"y":10,"z":10}},
            "obstacles":[],"nodes":[{"id":1,"role":"source","x":1,"y":1,"z":0},
            {"id":1,"role":"sensitive","x":2,"y":2,"z":0}]}"#;
        assert!(serde_json::from_str::<Scene>(bad).is_err());
    }
}
