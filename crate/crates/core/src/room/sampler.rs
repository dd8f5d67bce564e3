//! Rejection samplers for the three layout families.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};
use crate::scene::*;

use super::rir::sabine_absorption;

/// Total number of candidate draws before a sampler gives up.
pub const MAX_ATTEMPTS: usize = 10_000;
/// Draws allowed for a single object before the whole layout is restarted.
const ATTEMPTS_PER_OBJECT: usize = 200;
const SHELF_WALL_DISTANCE: (f64, f64) = (0.1, CLEARANCE);

struct Budget {
    used: usize,
    config: ConfigType,
}

impl Budget {
    fn spend(&mut self) -> Result<()> {
        self.used += 1;
        if self.used > MAX_ATTEMPTS {
            Err(Error::Sampling {
                config: self.config.name().to_string(),
                attempts: MAX_ATTEMPTS,
            })
        } else {
            Ok(())
        }
    }
}

fn uniform(rng: &mut ChaCha8Rng, (lo, hi): (f64, f64)) -> f64 {
    if hi > lo {
        rng.random_range(lo..=hi)
    } else {
        lo
    }
}

/// Draws `draw` until `accept` holds. `Ok(None)` means the per-object budget
/// ran out and the layout should be restarted.
fn place(
    rng: &mut ChaCha8Rng,
    budget: &mut Budget,
    mut draw: impl FnMut(&mut ChaCha8Rng) -> Point3,
    accept: impl Fn(&Point3) -> bool,
) -> Result<Option<Point3>> {
    for _ in 0..ATTEMPTS_PER_OBJECT {
        budget.spend()?;
        let p = draw(rng);
        if accept(&p) {
            return Ok(Some(p));
        }
    }
    Ok(None)
}

fn far_from_all(p: &Point3, others: &[Point3], min: f64) -> bool {
    others.iter().all(|o| distance(p, o) >= min)
}

/// Four microphones at 90° spacing on the horizontal circle, with a random
/// rotation of the whole node.
fn node_mics(rng: &mut ChaCha8Rng, center: &Point3) -> Vec<Point3> {
    let phase = rng.random_range(0.0..std::f64::consts::TAU);
    (0..MICS_PER_NODE)
        .map(|m| {
            let a = phase + m as f64 * std::f64::consts::FRAC_PI_2;
            [center[0] + MIC_RADIUS * a.cos(), center[1] + MIC_RADIUS * a.sin(), center[2]]
        })
        .collect()
}

fn free_point(room: &Point3, wall: f64, height: (f64, f64)) -> impl Fn(&mut ChaCha8Rng) -> Point3 + '_ {
    move |rng| {
        [
            uniform(rng, (wall, room[0] - wall)),
            uniform(rng, (wall, room[1] - wall)),
            uniform(rng, height),
        ]
    }
}

/// Point at a sampled distance from one randomly chosen vertical wall.
fn shelf_point(rng: &mut ChaCha8Rng, room: &Point3) -> Point3 {
    let d = uniform(rng, SHELF_WALL_DISTANCE);
    let wall = rng.random_range(0..4);
    let margin = SHELF_WALL_DISTANCE.0;
    let along_x = uniform(rng, (margin, room[0] - margin));
    let along_y = uniform(rng, (margin, room[1] - margin));
    let z = uniform(rng, LIVING_NODE_HEIGHT);
    match wall {
        0 => [d, along_y, z],
        1 => [room[0] - d, along_y, z],
        2 => [along_x, d, z],
        _ => [along_x, room[1] - d, z],
    }
}

struct Layout {
    nodes: Vec<Point3>,
    target: Point3,
    noise: Point3,
    table: Option<Table>,
}

fn random_layout(rng: &mut ChaCha8Rng, budget: &mut Budget, room: &Point3) -> Result<Option<Layout>> {
    let mut placed: Vec<Point3> = Vec::new();
    let node_draw = free_point(room, CLEARANCE, RANDOM_NODE_HEIGHT);
    for _ in 0..N_NODES {
        match place(rng, budget, &node_draw, |p| far_from_all(p, &placed, CLEARANCE))? {
            Some(p) => placed.push(p),
            None => return Ok(None),
        }
    }
    let source_draw = free_point(room, CLEARANCE, SOURCE_HEIGHT);
    let mut sources = Vec::new();
    for _ in 0..2 {
        match place(rng, budget, &source_draw, |p| far_from_all(p, &placed, CLEARANCE))? {
            Some(p) => {
                placed.push(p);
                sources.push(p);
            }
            None => return Ok(None),
        }
    }
    Ok(Some(Layout {
        nodes: placed[..N_NODES].to_vec(),
        target: sources[0],
        noise: sources[1],
        table: None,
    }))
}

fn living_layout(rng: &mut ChaCha8Rng, budget: &mut Budget, room: &Point3) -> Result<Option<Layout>> {
    let mut nodes: Vec<Point3> = Vec::new();
    for _ in 0..N_NODES - 1 {
        match place(rng, budget, |r| shelf_point(r, room), |p| far_from_all(p, &nodes, CLEARANCE))? {
            Some(p) => nodes.push(p),
            None => return Ok(None),
        }
    }
    let free = free_point(room, CLEARANCE, LIVING_NODE_HEIGHT);
    match place(rng, budget, &free, |p| far_from_all(p, &nodes, CLEARANCE))? {
        Some(p) => nodes.push(p),
        None => return Ok(None),
    }
    let source_draw = free_point(room, CLEARANCE, SOURCE_HEIGHT);
    let mut sources: Vec<Point3> = Vec::new();
    for _ in 0..2 {
        let accept = |p: &Point3| far_from_all(p, &nodes, CLEARANCE) && far_from_all(p, &sources, CLEARANCE);
        match place(rng, budget, &source_draw, accept)? {
            Some(p) => sources.push(p),
            None => return Ok(None),
        }
    }
    Ok(Some(Layout {
        nodes,
        target: sources[0],
        noise: sources[1],
        table: None,
    }))
}

fn meeting_layout(rng: &mut ChaCha8Rng, budget: &mut Budget, room: &Point3) -> Result<Option<Layout>> {
    budget.spend()?;
    let radius = uniform(rng, TABLE_RADIUS);
    let height = uniform(rng, TABLE_HEIGHT);
    if room[0] < 2.0 * radius || room[1] < 2.0 * radius {
        return Ok(None);
    }
    let center = [
        uniform(rng, (radius, room[0] - radius)),
        uniform(rng, (radius, room[1] - radius)),
    ];
    let phase = rng.random_range(0.0..std::f64::consts::TAU);
    let nodes = (0..N_NODES)
        .map(|k| {
            let a = phase + k as f64 * std::f64::consts::FRAC_PI_2;
            let r = radius - uniform(rng, TABLE_NODE_INSET);
            [center[0] + r * a.cos(), center[1] + r * a.sin(), height]
        })
        .collect();
    let source_draw = |rng: &mut ChaCha8Rng| {
        let a = rng.random_range(0.0..std::f64::consts::TAU);
        let r = radius + uniform(rng, (0.0, TABLE_SOURCE_REACH));
        [center[0] + r * a.cos(), center[1] + r * a.sin(), uniform(rng, MEETING_SOURCE_HEIGHT)]
    };
    let mut sources: Vec<Point3> = Vec::new();
    for _ in 0..2 {
        let accept = |p: &Point3| {
            wall_distance(room, p) >= MEETING_WALL_CLEARANCE && far_from_all(p, &sources, CLEARANCE)
        };
        match place(rng, budget, source_draw, accept)? {
            Some(p) => sources.push(p),
            None => return Ok(None),
        }
    }
    Ok(Some(Layout {
        nodes,
        target: sources[0],
        noise: sources[1],
        table: Some(Table {
            center,
            radius,
            height,
        }),
    }))
}

/// Samples a valid scene of the given family. The result depends only on
/// `(config, seed)`. Source file paths are left empty for the caller to fill.
pub fn sample_scene(config: ConfigType, seed: u64) -> Result<SceneDescriptor> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut budget = Budget { used: 0, config };
    loop {
        budget.spend()?;
        let room_dims = [
            uniform(&mut rng, ROOM_LENGTH),
            uniform(&mut rng, ROOM_WIDTH),
            uniform(&mut rng, ROOM_HEIGHT),
        ];
        let rt60 = uniform(&mut rng, RT60_RANGE);
        let noise_gain_db = uniform(&mut rng, NOISE_GAIN_DB);
        if sabine_absorption(rt60, &room_dims).is_err() {
            continue;
        }
        let layout = match config {
            ConfigType::Random => random_layout(&mut rng, &mut budget, &room_dims)?,
            ConfigType::Living => living_layout(&mut rng, &mut budget, &room_dims)?,
            ConfigType::Meeting => meeting_layout(&mut rng, &mut budget, &room_dims)?,
        };
        let Some(layout) = layout else { continue };
        let mic_positions = layout.nodes.iter().map(|c| node_mics(&mut rng, c)).collect();
        let scene = SceneDescriptor {
            config_type: config,
            room_dims,
            rt60,
            node_centers: layout.nodes,
            mic_positions,
            source_positions: SourcePositions {
                target: layout.target,
                noise: layout.noise,
            },
            noise_gain_db,
            rng_seed: seed,
            speech_path: String::new(),
            noise_path: String::new(),
            table: layout.table,
        };
        if scene.validate().is_ok() {
            return Ok(scene);
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn deterministic() {
        for config in [ConfigType::Random, ConfigType::Living, ConfigType::Meeting] {
            assert_eq!(sample_scene(config, 42).unwrap(), sample_scene(config, 42).unwrap());
            assert_ne!(sample_scene(config, 42).unwrap(), sample_scene(config, 43).unwrap());
        }
    }

    #[test]
    fn random_rooms_keep_clearance() {
        for seed in 0..1000 {
            let s = sample_scene(ConfigType::Random, seed).unwrap();
            let mut objects = s.node_centers.clone();
            objects.push(s.source_positions.target);
            objects.push(s.source_positions.noise);
            for (i, a) in objects.iter().enumerate() {
                assert!(wall_distance(&s.room_dims, a) >= 0.5 - 1e-12);
                for b in &objects[i + 1..] {
                    assert!(distance(a, b) >= 0.5 - 1e-12);
                }
            }
        }
    }

    #[test]
    fn meeting_nodes_at_table_height() {
        for seed in 0..1000 {
            let s = sample_scene(ConfigType::Meeting, seed).unwrap();
            for c in &s.node_centers {
                assert!((0.7..=0.8).contains(&c[2]));
            }
        }
    }

    #[test]
    fn living_rooms_validate() {
        for seed in 0..200 {
            let s = sample_scene(ConfigType::Living, seed).unwrap();
            s.validate().unwrap();
            for c in &s.node_centers[..3] {
                assert!(wall_distance(&s.room_dims, c) <= 0.5);
            }
        }
    }

    #[test]
    fn mics_on_square_layout() {
        let s = sample_scene(ConfigType::Random, 7).unwrap();
        for (c, mics) in s.node_centers.iter().zip(&s.mic_positions) {
            for m in 0..MICS_PER_NODE {
                assert!((distance(c, &mics[m]) - MIC_RADIUS).abs() < 1e-12);
                let next = &mics[(m + 1) % MICS_PER_NODE];
                let chord = MIC_RADIUS * std::f64::consts::SQRT_2;
                assert!((distance(&mics[m], next) - chord).abs() < 1e-12);
            }
        }
    }
}
