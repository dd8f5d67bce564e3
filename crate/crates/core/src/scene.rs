//! Scene descriptors: the geometric and acoustic description of one trial,
//! and the validator enforcing the constraints of each layout family.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub type Point3 = [f64; 3];

/// Fixed array layout: four nodes of four microphones.
pub const N_NODES: usize = 4;
pub const MICS_PER_NODE: usize = 4;
/// Distance of each microphone to its node center, meters.
pub const MIC_RADIUS: f64 = 0.05;

pub const ROOM_LENGTH: (f64, f64) = (3.0, 8.0);
pub const ROOM_WIDTH: (f64, f64) = (3.0, 5.0);
pub const ROOM_HEIGHT: (f64, f64) = (2.5, 3.0);
pub const RT60_RANGE: (f64, f64) = (0.3, 0.6);
pub const NOISE_GAIN_DB: (f64, f64) = (-6.0, 0.0);

/// Minimum clearance between objects and from walls (random and living).
pub const CLEARANCE: f64 = 0.5;
pub const RANDOM_NODE_HEIGHT: (f64, f64) = (0.7, 2.0);
pub const SOURCE_HEIGHT: (f64, f64) = (1.2, 2.0);
pub const LIVING_NODE_HEIGHT: (f64, f64) = (0.7, 0.95);

pub const TABLE_RADIUS: (f64, f64) = (0.5, 1.0);
pub const TABLE_HEIGHT: (f64, f64) = (0.7, 0.8);
/// Node distance inside the table edge.
pub const TABLE_NODE_INSET: (f64, f64) = (0.05, 0.2);
/// Source distance outside the table edge.
pub const TABLE_SOURCE_REACH: f64 = 0.5;
pub const MEETING_SOURCE_HEIGHT: (f64, f64) = (1.15, 1.3);
pub const MEETING_WALL_CLEARANCE: f64 = 0.15;

const TOL: f64 = 1e-9;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ConfigType {
    Random,
    Living,
    Meeting,
}

impl ConfigType {
    pub fn name(self) -> &'static str {
        match self {
            ConfigType::Random => "random",
            ConfigType::Living => "living",
            ConfigType::Meeting => "meeting",
        }
    }
}

impl std::str::FromStr for ConfigType {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "random" => Ok(ConfigType::Random),
            "living" => Ok(ConfigType::Living),
            "meeting" => Ok(ConfigType::Meeting),
            other => Err(Error::Config(format!(
                "unknown scene config {other:?} (expected random, living or meeting)"
            ))),
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct SourcePositions {
    pub target: Point3,
    pub noise: Point3,
}

/// Round meeting table; only used for placement, never simulated acoustically.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Table {
    pub center: [f64; 2],
    pub radius: f64,
    pub height: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SceneDescriptor {
    pub config_type: ConfigType,
    /// (length, width, height) in meters.
    pub room_dims: Point3,
    pub rt60: f64,
    pub node_centers: Vec<Point3>,
    /// `mic_positions[k][m]`; mic 0 of each node is its reference.
    pub mic_positions: Vec<Vec<Point3>>,
    pub source_positions: SourcePositions,
    pub noise_gain_db: f64,
    pub rng_seed: u64,
    pub speech_path: String,
    pub noise_path: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub table: Option<Table>,
}

pub fn distance(a: &Point3, b: &Point3) -> f64 {
    ((a[0] - b[0]).powi(2) + (a[1] - b[1]).powi(2) + (a[2] - b[2]).powi(2)).sqrt()
}

fn horizontal_distance(a: &[f64], b: &[f64]) -> f64 {
    ((a[0] - b[0]).powi(2) + (a[1] - b[1]).powi(2)).sqrt()
}

/// Distance to the nearest vertical wall.
pub fn wall_distance(dims: &Point3, p: &Point3) -> f64 {
    p[0].min(dims[0] - p[0]).min(p[1]).min(dims[1] - p[1])
}

pub fn inside_room(dims: &Point3, p: &Point3) -> bool {
    (0..3).all(|i| p[i] > 0.0 && p[i] < dims[i])
}

fn in_range(v: f64, (lo, hi): (f64, f64)) -> bool {
    v >= lo - TOL && v <= hi + TOL
}

fn check(ok: bool, constraint: &'static str, detail: impl FnOnce() -> String) -> Result<()> {
    if ok {
        Ok(())
    } else {
        Err(Error::validation(constraint, detail()))
    }
}

impl SceneDescriptor {
    pub fn target(&self) -> &Point3 {
        &self.source_positions.target
    }

    pub fn noise(&self) -> &Point3 {
        &self.source_positions.noise
    }

    pub fn reference_mic(&self, node: usize) -> &Point3 {
        &self.mic_positions[node][0]
    }

    /// Checks the common layout and every constraint of `config_type`,
    /// reporting the first violated constraint by name.
    pub fn validate(&self) -> Result<()> {
        self.validate_common()?;
        match self.config_type {
            ConfigType::Random => self.validate_random(),
            ConfigType::Living => self.validate_living(),
            ConfigType::Meeting => self.validate_meeting(),
        }
    }

    fn validate_common(&self) -> Result<()> {
        let d = &self.room_dims;
        check(
            in_range(d[0], ROOM_LENGTH) && in_range(d[1], ROOM_WIDTH) && in_range(d[2], ROOM_HEIGHT),
            "room dims",
            || format!("{d:?} outside the allowed ranges"),
        )?;
        check(in_range(self.rt60, RT60_RANGE), "rt60", || {
            format!("{} s outside {RT60_RANGE:?}", self.rt60)
        })?;
        check(in_range(self.noise_gain_db, NOISE_GAIN_DB), "noise gain", || {
            format!("{} dB outside {NOISE_GAIN_DB:?}", self.noise_gain_db)
        })?;
        check(
            self.node_centers.len() == N_NODES && self.mic_positions.len() == N_NODES,
            "node count",
            || {
                format!(
                    "{} node centers and {} mic groups, expected {N_NODES}",
                    self.node_centers.len(),
                    self.mic_positions.len()
                )
            },
        )?;
        for (k, (center, mics)) in self.node_centers.iter().zip(&self.mic_positions).enumerate() {
            check(mics.len() == MICS_PER_NODE, "mic count", || {
                format!("node {} has {} mics, expected {MICS_PER_NODE}", k + 1, mics.len())
            })?;
            for (m, mic) in mics.iter().enumerate() {
                check(
                    (distance(center, mic) - MIC_RADIUS).abs() < 1e-6 && (mic[2] - center[2]).abs() < 1e-9,
                    "mic radius",
                    || format!("node {} mic {} is not on the {MIC_RADIUS} m horizontal circle", k + 1, m + 1),
                )?;
                check(inside_room(d, mic), "inside room", || {
                    format!("node {} mic {} at {mic:?} is outside the room", k + 1, m + 1)
                })?;
            }
        }
        for (name, p) in [("target", self.target()), ("noise", self.noise())] {
            check(inside_room(d, p), "inside room", || format!("{name} source at {p:?} is outside the room"))?;
        }
        for i in 0..N_NODES {
            for j in (i + 1)..N_NODES {
                let dist = distance(&self.node_centers[i], &self.node_centers[j]);
                check(dist >= 2.0 * MIC_RADIUS - TOL, "node spacing", || {
                    format!("nodes {} and {} overlap ({dist:.3} m)", i + 1, j + 1)
                })?;
            }
        }
        Ok(())
    }

    fn check_heights(&self, nodes: (f64, f64), sources: (f64, f64)) -> Result<()> {
        for (k, c) in self.node_centers.iter().enumerate() {
            check(in_range(c[2], nodes), "node height", || {
                format!("node {} at height {} outside {nodes:?}", k + 1, c[2])
            })?;
        }
        for (name, p) in [("target", self.target()), ("noise", self.noise())] {
            check(in_range(p[2], sources), "source height", || {
                format!("{name} source at height {} outside {sources:?}", p[2])
            })?;
        }
        Ok(())
    }

    fn check_sources_clear_of_nodes_and_walls(&self, wall_clearance: f64) -> Result<()> {
        for (name, p) in [("target", self.target()), ("noise", self.noise())] {
            let w = wall_distance(&self.room_dims, p);
            check(w >= wall_clearance - TOL, "wall distance", || {
                format!("{name} source {w:.3} m from a wall")
            })?;
        }
        Ok(())
    }

    fn validate_random(&self) -> Result<()> {
        self.check_heights(RANDOM_NODE_HEIGHT, SOURCE_HEIGHT)?;
        for (k, c) in self.node_centers.iter().enumerate() {
            let w = wall_distance(&self.room_dims, c);
            check(w >= CLEARANCE - TOL, "wall distance", || {
                format!("node {} {w:.3} m from a wall", k + 1)
            })?;
        }
        self.check_sources_clear_of_nodes_and_walls(CLEARANCE)?;
        for i in 0..N_NODES {
            for j in (i + 1)..N_NODES {
                let dist = distance(&self.node_centers[i], &self.node_centers[j]);
                check(dist >= CLEARANCE - TOL, "node spacing", || {
                    format!("nodes {} and {} are {dist:.3} m apart", i + 1, j + 1)
                })?;
            }
        }
        self.check_source_spacing(true)
    }

    fn check_source_spacing(&self, between_sources: bool) -> Result<()> {
        for (name, p) in [("target", self.target()), ("noise", self.noise())] {
            for (k, c) in self.node_centers.iter().enumerate() {
                let dist = distance(p, c);
                check(dist >= CLEARANCE - TOL, "source spacing", || {
                    format!("{name} source {dist:.3} m from node {}", k + 1)
                })?;
            }
        }
        if between_sources {
            let dist = distance(self.target(), self.noise());
            check(dist >= CLEARANCE - TOL, "source spacing", || {
                format!("sources are {dist:.3} m apart")
            })?;
        }
        Ok(())
    }

    /// Nodes 1–3 sit on shelves near the walls; node 4 is placed freely.
    fn validate_living(&self) -> Result<()> {
        self.check_heights(LIVING_NODE_HEIGHT, SOURCE_HEIGHT)?;
        for (k, c) in self.node_centers.iter().enumerate().take(N_NODES - 1) {
            let w = wall_distance(&self.room_dims, c);
            check(w <= CLEARANCE + TOL, "wall distance", || {
                format!("shelf node {} is {w:.3} m from the nearest wall", k + 1)
            })?;
        }
        let free = &self.node_centers[N_NODES - 1];
        let w = wall_distance(&self.room_dims, free);
        check(w >= CLEARANCE - TOL, "wall distance", || {
            format!("node {N_NODES} {w:.3} m from a wall")
        })?;
        for (k, c) in self.node_centers.iter().enumerate().take(N_NODES - 1) {
            let dist = distance(free, c);
            check(dist >= CLEARANCE - TOL, "node spacing", || {
                format!("node {N_NODES} is {dist:.3} m from node {}", k + 1)
            })?;
        }
        self.check_sources_clear_of_nodes_and_walls(CLEARANCE)?;
        self.check_source_spacing(false)
    }

    fn validate_meeting(&self) -> Result<()> {
        let Some(table) = self.table else {
            return Err(Error::validation("table", "meeting scene without a table"));
        };
        check(
            in_range(table.radius, TABLE_RADIUS) && in_range(table.height, TABLE_HEIGHT),
            "table",
            || format!("radius {} / height {} outside range", table.radius, table.height),
        )?;
        let c = [table.center[0], table.center[1], 0.0];
        check(wall_distance(&self.room_dims, &c) >= table.radius - TOL, "table", || {
            "table does not fit in the room".to_string()
        })?;
        self.check_heights(TABLE_HEIGHT, MEETING_SOURCE_HEIGHT)?;

        let mut angles = Vec::with_capacity(N_NODES);
        for (k, node) in self.node_centers.iter().enumerate() {
            check((node[2] - table.height).abs() < TOL, "node height", || {
                format!("node {} is not at table height", k + 1)
            })?;
            let r = horizontal_distance(node, &table.center);
            let inset = table.radius - r;
            check(in_range(inset, TABLE_NODE_INSET), "node placement", || {
                format!("node {} is {inset:.3} m inside the table edge", k + 1)
            })?;
            angles.push((node[1] - table.center[1]).atan2(node[0] - table.center[0]));
        }
        for (k, a) in angles.iter().enumerate().skip(1) {
            let expected = angles[0] + k as f64 * std::f64::consts::FRAC_PI_2;
            let diff = (a - expected).rem_euclid(std::f64::consts::TAU);
            let diff = diff.min(std::f64::consts::TAU - diff);
            check(diff < 1e-6, "node placement", || {
                format!("node {} is not at {}° around the table", k + 1, 90 * k)
            })?;
        }
        for (name, p) in [("target", self.target()), ("noise", self.noise())] {
            let reach = horizontal_distance(p, &table.center) - table.radius;
            check(reach >= -TOL && reach <= TABLE_SOURCE_REACH + TOL, "source placement", || {
                format!("{name} source is {reach:.3} m from the table edge")
            })?;
        }
        self.check_sources_clear_of_nodes_and_walls(MEETING_WALL_CLEARANCE)
    }
}

#[cfg(test)]
pub(crate) fn example_descriptor() -> SceneDescriptor {
    let room = [6.0, 4.0, 3.0];
    let centers = [[1.0, 1.0, 1.0], [5.0, 1.0, 1.2], [1.0, 3.0, 1.4], [5.0, 3.0, 1.6]];
    let mic_positions = centers
        .iter()
        .map(|c| {
            (0..MICS_PER_NODE)
                .map(|m| {
                    let a = m as f64 * std::f64::consts::FRAC_PI_2;
                    [c[0] + MIC_RADIUS * a.cos(), c[1] + MIC_RADIUS * a.sin(), c[2]]
                })
                .collect()
        })
        .collect();
    SceneDescriptor {
        config_type: ConfigType::Random,
        room_dims: room,
        rt60: 0.4,
        node_centers: centers.to_vec(),
        mic_positions,
        source_positions: SourcePositions {
            target: [2.5, 2.0, 1.5],
            noise: [4.0, 2.2, 1.3],
        },
        noise_gain_db: -3.0,
        rng_seed: 1,
        speech_path: "speech.wav".into(),
        noise_path: "noise.wav".into(),
        table: None,
    }
}
