//! Synthetic LiDAR sequences with exact panoptic and track ground truth.
//!
//! A [`World`] is a ground plane plus axis-aligned boxes and vertical
//! cylinders that move with piecewise-constant velocity. A spinning
//! scanner mounted on the ego vehicle casts one ray per (beam, azimuth)
//! pair; the nearest hit becomes a point in the sensor frame labeled with
//! the hit object's class and track id.

pub mod raycast;

use std::path::Path;

use nalgebra::Vector3;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};
use crate::io::{self, SequenceDir};
use crate::types::{PanopticLabel, Point3, RigidPose, Scan, Taxonomy};
use raycast::Ray;

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum EgoPath {
    Line,
    /// Constant yaw change per frame, radians.
    Arc {
        yaw_rate: f64,
    },
}

/// How many objects of each kind to place.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub struct SpawnCounts {
    pub car: usize,
    pub truck: usize,
    pub bus: usize,
    pub bicycle: usize,
    pub motorcycle: usize,
    pub pedestrian: usize,
    pub barrier: usize,
    pub traffic_cone: usize,
    pub building: usize,
    pub tree: usize,
    pub pole: usize,
}

impl SpawnCounts {
    pub fn total(&self) -> usize {
        self.car
            + self.truck
            + self.bus
            + self.bicycle
            + self.motorcycle
            + self.pedestrian
            + self.barrier
            + self.traffic_cone
            + self.building
            + self.tree
            + self.pole
    }
}

/// Uniform speed range in m/frame.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SpeedRange {
    pub min: f64,
    pub max: f64,
}

impl SpeedRange {
    pub const fn new(min: f64, max: f64) -> Self {
        Self { min, max }
    }

    fn validate(&self, what: &str) -> Result<()> {
        if !(self.min.is_finite() && self.max.is_finite()) || self.min < 0.0 || self.min > self.max
        {
            return Err(Error::Config(format!(
                "{what} speed range [{}, {}] must be finite with 0 <= min <= max",
                self.min, self.max
            )));
        }
        Ok(())
    }

    fn sample(&self, rng: &mut ChaCha8Rng) -> f64 {
        if self.max > self.min {
            rng.random_range(self.min..=self.max)
        } else {
            self.min
        }
    }
}

/// Primitive dimensions. Boxes are `[length along x, width along y, height]`,
/// cylinders `[radius, height]`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PrimitiveSizes {
    pub car: [f64; 3],
    pub truck: [f64; 3],
    pub bus: [f64; 3],
    pub bicycle: [f64; 3],
    pub motorcycle: [f64; 3],
    pub barrier: [f64; 3],
    pub building: [f64; 3],
    pub pedestrian: [f64; 2],
    pub traffic_cone: [f64; 2],
    pub tree: [f64; 2],
    pub pole: [f64; 2],
}

impl Default for PrimitiveSizes {
    fn default() -> Self {
        Self {
            car: [4.5, 1.9, 1.6],
            truck: [7.0, 2.5, 3.2],
            bus: [11.0, 2.6, 3.3],
            bicycle: [1.8, 0.6, 1.2],
            motorcycle: [2.1, 0.8, 1.3],
            barrier: [2.0, 0.5, 1.0],
            building: [12.0, 8.0, 9.0],
            pedestrian: [0.3, 1.75],
            traffic_cone: [0.2, 0.7],
            tree: [0.5, 6.0],
            pole: [0.15, 5.0],
        }
    }
}

impl PrimitiveSizes {
    fn validate(&self) -> Result<()> {
        let boxes = [
            self.car,
            self.truck,
            self.bus,
            self.bicycle,
            self.motorcycle,
            self.barrier,
            self.building,
        ];
        let cylinders = [self.pedestrian, self.traffic_cone, self.tree, self.pole];
        let ok = boxes
            .iter()
            .flatten()
            .chain(cylinders.iter().flatten())
            .all(|v| v.is_finite() && *v > 0.0);
        if !ok {
            return Err(Error::Config(
                "primitive sizes must be finite and positive".into(),
            ));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct WorldConfig {
    pub seed: u64,
    pub duration_frames: u32,
    /// Ego displacement per frame, metres.
    pub ego_speed: f64,
    pub path: EgoPath,
    pub sensor_height: f64,
    pub counts: SpawnCounts,
    pub vehicle_speed: SpeedRange,
    pub pedestrian_speed: SpeedRange,
    /// Frames between velocity changes.
    pub velocity_period: u32,
    pub sizes: PrimitiveSizes,
    /// Half width of the road centred on y = 0; beyond it lies sidewalk,
    /// then terrain.
    pub road_half_width: f64,
    pub sidewalk_width: f64,
    /// Placement attempts per object before giving up.
    pub placement_retries: u32,
}

impl Default for WorldConfig {
    fn default() -> Self {
        Self {
            seed: 0,
            duration_frames: 20,
            ego_speed: 0.6,
            path: EgoPath::Line,
            sensor_height: 1.8,
            counts: SpawnCounts {
                car: 8,
                truck: 2,
                bus: 1,
                bicycle: 2,
                motorcycle: 1,
                pedestrian: 6,
                barrier: 3,
                traffic_cone: 3,
                building: 6,
                tree: 8,
                pole: 4,
            },
            vehicle_speed: SpeedRange::new(0.0, 1.0),
            pedestrian_speed: SpeedRange::new(0.0, 0.15),
            velocity_period: 8,
            sizes: PrimitiveSizes::default(),
            road_half_width: 7.0,
            sidewalk_width: 3.0,
            placement_retries: 200,
        }
    }
}

impl WorldConfig {
    pub fn validate(&self) -> Result<()> {
        if self.duration_frames == 0 {
            return Err(Error::Config("duration_frames must be at least 1".into()));
        }
        if !self.ego_speed.is_finite() {
            return Err(Error::Config("ego_speed must be finite".into()));
        }
        if let EgoPath::Arc { yaw_rate } = self.path {
            if !yaw_rate.is_finite() {
                return Err(Error::Config("yaw_rate must be finite".into()));
            }
        }
        if !(self.sensor_height.is_finite() && self.sensor_height > 0.0) {
            return Err(Error::Config("sensor_height must be positive".into()));
        }
        self.vehicle_speed.validate("vehicle")?;
        self.pedestrian_speed.validate("pedestrian")?;
        if self.velocity_period == 0 {
            return Err(Error::Config("velocity_period must be at least 1".into()));
        }
        self.sizes.validate()?;
        for (name, v) in [
            ("road_half_width", self.road_half_width),
            ("sidewalk_width", self.sidewalk_width),
        ] {
            if !(v.is_finite() && v > 0.0) {
                return Err(Error::Config(format!("{name} must be positive")));
            }
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct BeamConfig {
    /// Elevation angles in radians, highest first.
    pub beams: Vec<f64>,
    pub azimuth_steps: u32,
    pub max_range: f64,
    /// Base reflectance per class id, in `[0, 1]`.
    pub reflectance: Vec<f32>,
}

impl Default for BeamConfig {
    /// 32 beams evenly spaced from +10° down to −30°, 1024 azimuth steps.
    fn default() -> Self {
        let (top, bottom) = (10f64.to_radians(), -30f64.to_radians());
        let n = 32;
        let beams = (0..n)
            .map(|i| top + (bottom - top) * i as f64 / (n - 1) as f64)
            .collect();
        Self {
            beams,
            azimuth_steps: 1024,
            max_range: 70.0,
            reflectance: default_reflectance(&Taxonomy::panoptic_default()),
        }
    }
}

impl BeamConfig {
    pub fn validate(&self, taxonomy: &Taxonomy) -> Result<()> {
        if self.beams.is_empty() || self.beams.iter().any(|b| !b.is_finite()) {
            return Err(Error::Config(
                "beam elevations must be finite and non-empty".into(),
            ));
        }
        if self.beams.windows(2).any(|w| w[0] < w[1]) {
            return Err(Error::Config(
                "beam elevations must be sorted highest first".into(),
            ));
        }
        if self.azimuth_steps == 0 {
            return Err(Error::Config("azimuth_steps must be at least 1".into()));
        }
        if !(self.max_range.is_finite() && self.max_range > 0.0) {
            return Err(Error::Config("max_range must be positive".into()));
        }
        if self.reflectance.len() != taxonomy.class_count() {
            return Err(Error::Config(format!(
                "{} reflectance values for {} classes",
                self.reflectance.len(),
                taxonomy.class_count()
            )));
        }
        if self.reflectance.iter().any(|r| !(0.0..=1.0).contains(r)) {
            return Err(Error::Config(
                "reflectance values must lie in [0, 1]".into(),
            ));
        }
        Ok(())
    }

    /// Unit ray direction in the sensor frame. Azimuth step `i` points at
    /// `π − 2π(i + ½)/steps`, so steps sweep the projection columns left to
    /// right.
    pub fn direction(&self, beam: usize, step: u32) -> Vector3<f64> {
        let el = self.beams[beam];
        let az = std::f64::consts::PI
            - 2.0 * std::f64::consts::PI * (step as f64 + 0.5) / self.azimuth_steps as f64;
        let (se, ce) = el.sin_cos();
        let (sa, ca) = az.sin_cos();
        Vector3::new(ce * ca, ce * sa, se)
    }
}

/// Per-class reflectance by class name; unknown names get 0.5.
pub fn default_reflectance(taxonomy: &Taxonomy) -> Vec<f32> {
    taxonomy
        .entries()
        .map(|(_, name, _)| match name {
            "noise" => 0.0,
            "driveable_surface" => 0.125,
            "other_flat" => 0.15,
            "sidewalk" => 0.25,
            "terrain" => 0.3125,
            "manmade" => 0.5,
            "vegetation" => 0.375,
            "car" | "bus" | "truck" | "trailer" | "construction_vehicle" => 0.75,
            "bicycle" | "motorcycle" => 0.625,
            "pedestrian" => 0.4375,
            "barrier" => 0.5625,
            "traffic_cone" => 0.875,
            _ => 0.5,
        })
        .collect()
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Shape {
    /// Full extents along x, y, z; rests on the ground.
    Box { size: Vector3<f64> },
    /// Vertical cylinder standing on the ground.
    Cylinder { radius: f64, height: f64 },
}

impl Shape {
    fn half_footprint(&self) -> (f64, f64) {
        match *self {
            Shape::Box { size } => (size.x / 2.0, size.y / 2.0),
            Shape::Cylinder { radius, .. } => (radius, radius),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct WorldObject {
    pub class: u16,
    /// Zero for stuff.
    pub track_id: u32,
    pub shape: Shape,
    /// Ground-level footprint centre per frame, world frame.
    pub positions: Vec<Vector3<f64>>,
}

impl WorldObject {
    pub fn label(&self) -> PanopticLabel {
        PanopticLabel::new(self.class, self.track_id)
    }

    pub fn is_static(&self) -> bool {
        self.positions.windows(2).all(|w| w[0] == w[1])
    }

    fn bounds(&self, frame: usize) -> (Vector3<f64>, Vector3<f64>) {
        let c = self.positions[frame];
        match self.shape {
            Shape::Box { size } => {
                let half = Vector3::new(size.x / 2.0, size.y / 2.0, 0.0);
                (c - half, c + half + Vector3::new(0.0, 0.0, size.z))
            }
            Shape::Cylinder { radius, height } => (
                c - Vector3::new(radius, radius, 0.0),
                c + Vector3::new(radius, radius, height),
            ),
        }
    }

    pub fn intersect(&self, ray: &Ray, frame: usize) -> Option<f64> {
        let c = self.positions[frame];
        match self.shape {
            Shape::Box { .. } => {
                let (min, max) = self.bounds(frame);
                raycast::ray_box(ray, &min, &max)
            }
            Shape::Cylinder { radius, height } => {
                raycast::ray_cylinder(ray, c.x, c.y, radius, c.z, c.z + height)
            }
        }
    }

    /// Distance from a world point to this object's surface at `frame`.
    pub fn surface_distance(&self, p: &Vector3<f64>, frame: usize) -> f64 {
        let c = self.positions[frame];
        match self.shape {
            Shape::Box { .. } => {
                let (min, max) = self.bounds(frame);
                raycast::box_surface_distance(p, &min, &max)
            }
            Shape::Cylinder { radius, height } => {
                raycast::cylinder_surface_distance(p, c.x, c.y, radius, c.z, c.z + height)
            }
        }
    }
}

/// What a simulated point hit.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Hit {
    Ground,
    Object(usize),
}

#[derive(Debug, Clone)]
pub struct World {
    pub config: WorldConfig,
    pub taxonomy: Taxonomy,
    pub objects: Vec<WorldObject>,
    ego_poses: Vec<RigidPose>,
}

impl World {
    pub fn duration(&self) -> u32 {
        self.config.duration_frames
    }

    /// Sensor-to-world pose at `frame`.
    pub fn ego_pose(&self, frame: u32) -> Option<&RigidPose> {
        self.ego_poses.get(frame as usize)
    }

    pub fn ego_poses(&self) -> &[RigidPose] {
        &self.ego_poses
    }

    pub fn track_count(&self) -> usize {
        self.objects.iter().filter(|o| o.track_id != 0).count()
    }

    /// Ground class at a world position, by distance from the road axis.
    pub fn ground_label(&self, p: &Vector3<f64>) -> PanopticLabel {
        let cfg = &self.config;
        let name = if p.y.abs() <= cfg.road_half_width {
            "driveable_surface"
        } else if p.y.abs() <= cfg.road_half_width + cfg.sidewalk_width {
            "sidewalk"
        } else {
            "terrain"
        };
        PanopticLabel::stuff(self.class_id(name))
    }

    fn class_id(&self, name: &str) -> u16 {
        self.taxonomy
            .class_by_name(name)
            .expect("simulator classes exist in the taxonomy")
    }

    /// Label of a hit, with the world point used for ground classes.
    pub fn hit_label(&self, hit: Hit, p: &Vector3<f64>) -> PanopticLabel {
        match hit {
            Hit::Ground => self.ground_label(p),
            Hit::Object(i) => self.objects[i].label(),
        }
    }

    /// Distance from a world point to the surface of what it hit.
    pub fn surface_distance(&self, hit: Hit, p: &Vector3<f64>, frame: u32) -> f64 {
        match hit {
            Hit::Ground => p.z.abs(),
            Hit::Object(i) => self.objects[i].surface_distance(p, frame as usize),
        }
    }

    /// Nearest hit along a world ray at `frame`.
    pub fn cast(&self, ray: &Ray, frame: u32) -> Option<(f64, Hit)> {
        let frame = frame as usize;
        let mut best = raycast::ray_plane(ray, 0.0).map(|t| (t, Hit::Ground));
        for (i, obj) in self.objects.iter().enumerate() {
            if let Some(t) = obj.intersect(ray, frame) {
                if best.map_or(true, |(b, _)| t < b) {
                    best = Some((t, Hit::Object(i)));
                }
            }
        }
        best
    }
}

fn ego_trajectory(cfg: &WorldConfig) -> Vec<RigidPose> {
    let mut poses = Vec::with_capacity(cfg.duration_frames as usize);
    let (mut x, mut y, mut yaw) = (0.0f64, 0.0f64, 0.0f64);
    for _ in 0..cfg.duration_frames {
        poses.push(RigidPose::from_yaw(
            yaw,
            Vector3::new(x, y, cfg.sensor_height),
        ));
        x += cfg.ego_speed * yaw.cos();
        y += cfg.ego_speed * yaw.sin();
        if let EgoPath::Arc { yaw_rate } = cfg.path {
            yaw += yaw_rate;
        }
    }
    poses
}

#[derive(Debug, Clone, Copy)]
enum Zone {
    /// Vehicles: centre |y| within the driving lanes, moving with traffic.
    Lane,
    /// Static road furniture on the road edge.
    RoadEdge,
    Sidewalk,
    /// Trees and poles just past the sidewalk.
    Verge,
    Buildings,
}

struct Spawn {
    class: &'static str,
    shape: Shape,
    zone: Zone,
    speed: Option<SpeedRange>,
    thing: bool,
}

fn spawn_list(cfg: &WorldConfig) -> Vec<Spawn> {
    let s = &cfg.sizes;
    let boxed = |v: [f64; 3]| Shape::Box {
        size: Vector3::from(v),
    };
    let cyl = |v: [f64; 2]| Shape::Cylinder {
        radius: v[0],
        height: v[1],
    };
    let c = &cfg.counts;
    let vehicle = Some(cfg.vehicle_speed);
    let walker = Some(cfg.pedestrian_speed);
    let groups = [
        (c.car, "car", boxed(s.car), Zone::Lane, vehicle, true),
        (c.truck, "truck", boxed(s.truck), Zone::Lane, vehicle, true),
        (c.bus, "bus", boxed(s.bus), Zone::Lane, vehicle, true),
        (
            c.motorcycle,
            "motorcycle",
            boxed(s.motorcycle),
            Zone::Lane,
            vehicle,
            true,
        ),
        (
            c.bicycle,
            "bicycle",
            boxed(s.bicycle),
            Zone::Sidewalk,
            walker,
            true,
        ),
        (
            c.pedestrian,
            "pedestrian",
            cyl(s.pedestrian),
            Zone::Sidewalk,
            walker,
            true,
        ),
        (
            c.barrier,
            "barrier",
            boxed(s.barrier),
            Zone::RoadEdge,
            None,
            true,
        ),
        (
            c.traffic_cone,
            "traffic_cone",
            cyl(s.traffic_cone),
            Zone::RoadEdge,
            None,
            true,
        ),
        (
            c.building,
            "manmade",
            boxed(s.building),
            Zone::Buildings,
            None,
            false,
        ),
        (c.tree, "vegetation", cyl(s.tree), Zone::Verge, None, false),
        (c.pole, "manmade", cyl(s.pole), Zone::Verge, None, false),
    ];
    groups
        .into_iter()
        .flat_map(|(n, class, shape, zone, speed, thing)| {
            (0..n).map(move |_| Spawn {
                class,
                shape,
                zone,
                speed,
                thing,
            })
        })
        .collect()
}

/// Axis-aligned footprint overlap with a safety margin.
fn footprints_overlap(
    a: &Vector3<f64>,
    ha: (f64, f64),
    b: &Vector3<f64>,
    hb: (f64, f64),
    margin: f64,
) -> bool {
    (a.x - b.x).abs() < ha.0 + hb.0 + margin && (a.y - b.y).abs() < ha.1 + hb.1 + margin
}

const OBJECT_MARGIN: f64 = 0.3;
const EGO_CLEARANCE: f64 = 1.5;
const SCENE_BEHIND: f64 = 20.0;
const SCENE_AHEAD: f64 = 45.0;

/// Places every requested object by rejection sampling. An object is
/// accepted when its footprint keeps clear of the ego and of every placed
/// object over the whole sequence.
pub fn build_world(config: &WorldConfig) -> Result<World> {
    config.validate()?;
    let taxonomy = Taxonomy::panoptic_default();
    let ego_poses = ego_trajectory(config);
    let frames = config.duration_frames as usize;
    let ego_xy: Vec<Vector3<f64>> = ego_poses
        .iter()
        .map(|p| Vector3::new(p.translation().x, p.translation().y, 0.0))
        .collect();
    let x_lo = ego_xy.iter().map(|p| p.x).fold(f64::INFINITY, f64::min) - SCENE_BEHIND;
    let x_hi = ego_xy.iter().map(|p| p.x).fold(f64::NEG_INFINITY, f64::max) + SCENE_AHEAD;

    let road = config.road_half_width;
    let walk = config.sidewalk_width;
    let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
    let mut objects: Vec<WorldObject> = Vec::new();
    let mut next_track = 1u32;

    for spawn in spawn_list(config) {
        let class = taxonomy
            .class_by_name(spawn.class)
            .expect("simulator classes exist in the taxonomy");
        let half = spawn.shape.half_footprint();
        let mut placed = None;
        for _ in 0..config.placement_retries.max(1) {
            let side = if rng.random_bool(0.5) { 1.0 } else { -1.0 };
            let (y_lo, y_hi) = match spawn.zone {
                Zone::Lane => (EGO_CLEARANCE + 1.0 + half.1, road - 2.0 - half.1),
                Zone::RoadEdge => (road - 1.2 + half.1, road - 0.2 - half.1),
                Zone::Sidewalk => (road + half.1 + 0.2, road + walk - half.1 - 0.2),
                Zone::Verge => (road + walk + 0.5 + half.1, road + walk + 2.5 + half.1),
                Zone::Buildings => (road + walk + 4.0 + half.1, road + walk + 12.0 + half.1),
            };
            let y = side
                * if y_hi > y_lo {
                    rng.random_range(y_lo..=y_hi)
                } else {
                    y_lo
                };
            let x = rng.random_range(x_lo..=x_hi);
            let start = Vector3::new(x, y, 0.0);

            let mut positions = Vec::with_capacity(frames);
            let mut pos = start;
            let mut vx = 0.0;
            for f in 0..frames {
                positions.push(pos);
                if let Some(range) = spawn.speed {
                    if f as u32 % config.velocity_period == 0 {
                        let speed = range.sample(&mut rng);
                        vx = match spawn.zone {
                            // right-hand traffic: y < 0 drives towards +x
                            Zone::Lane => -side * speed,
                            _ => {
                                if rng.random_bool(0.5) {
                                    speed
                                } else {
                                    -speed
                                }
                            }
                        };
                    }
                }
                pos.x += vx;
            }

            let clear_of_ego = positions.iter().all(|p| {
                ego_xy
                    .iter()
                    .all(|e| !footprints_overlap(p, half, e, (0.0, 0.0), EGO_CLEARANCE))
            });
            let clear_of_others = clear_of_ego
                && objects.iter().all(|o| {
                    let oh = o.shape.half_footprint();
                    (0..frames).all(|f| {
                        !footprints_overlap(&positions[f], half, &o.positions[f], oh, OBJECT_MARGIN)
                    })
                });
            if clear_of_others {
                placed = Some(positions);
                break;
            }
        }
        let Some(positions) = placed else {
            return Err(Error::Config(format!(
                "could not place a {} after {} attempts; reduce the object counts",
                spawn.class, config.placement_retries
            )));
        };
        let track_id = if spawn.thing {
            next_track += 1;
            next_track - 1
        } else {
            0
        };
        objects.push(WorldObject {
            class,
            track_id,
            shape: spawn.shape,
            positions,
        });
    }

    Ok(World {
        config: config.clone(),
        taxonomy,
        objects,
        ego_poses,
    })
}

/// One simulated sweep.
#[derive(Debug, Clone)]
pub struct SimulatedScan {
    pub scan: Scan,
    pub labels: Vec<PanopticLabel>,
    /// Equal to the label instances: the track id for things, 0 for stuff.
    pub track_ids: Vec<u32>,
    pub hits: Vec<Hit>,
}

/// Casts every (azimuth, beam) ray from the sensor at `ego_pose`. Points are
/// stored in the sensor frame at `f32` precision; a point whose rounded
/// range exceeds `max_range` is dropped.
pub fn simulate_scan(
    world: &World,
    frame: u32,
    ego_pose: &RigidPose,
    beams: &BeamConfig,
) -> Result<SimulatedScan> {
    if frame >= world.duration() {
        return Err(Error::Range(format!(
            "frame {frame} is past the {}-frame world",
            world.duration()
        )));
    }
    let rotation = ego_pose.rotation();
    let origin = *ego_pose.translation();
    let mut points = Vec::new();
    let mut labels = Vec::new();
    let mut hits = Vec::new();
    for step in 0..beams.azimuth_steps {
        for beam in 0..beams.beams.len() {
            let dir = beams.direction(beam, step);
            let ray = Ray {
                origin,
                dir: rotation * dir,
            };
            let Some((t, hit)) = world.cast(&ray, frame) else {
                continue;
            };
            if t > beams.max_range {
                continue;
            }
            let local = dir * t;
            let rounded = local.map(|v| v as f32 as f64);
            if rounded.norm() > beams.max_range || rounded.norm() == 0.0 {
                continue;
            }
            let label = world.hit_label(hit, &ray.at(t));
            let intensity = beams
                .reflectance
                .get(label.class as usize)
                .copied()
                .unwrap_or(0.0) as f64;
            points.push(Point3::new(rounded.x, rounded.y, rounded.z, intensity));
            labels.push(label);
            hits.push(hit);
        }
    }
    let track_ids = labels.iter().map(|l| l.instance).collect();
    let mut scan = Scan::new(frame, points);
    scan.timestamp = frame as f64 * 0.1;
    Ok(SimulatedScan {
        scan,
        labels,
        track_ids,
        hits,
    })
}

/// Simulates every frame, spreading frames over the available cores.
pub fn simulate_all(world: &World, beams: &BeamConfig) -> Result<Vec<SimulatedScan>> {
    beams.validate(&world.taxonomy)?;
    let frames: Vec<u32> = (0..world.duration()).collect();
    let workers = std::thread::available_parallelism()
        .map_or(1, |n| n.get())
        .min(frames.len().max(1));
    let chunk = frames.len().div_ceil(workers).max(1);
    let results: Vec<Result<Vec<SimulatedScan>>> = std::thread::scope(|s| {
        let handles: Vec<_> = frames
            .chunks(chunk)
            .map(|part| {
                s.spawn(move || {
                    part.iter()
                        .map(|&f| simulate_scan(world, f, &world.ego_poses[f as usize], beams))
                        .collect::<Result<Vec<_>>>()
                })
            })
            .collect();
        handles
            .into_iter()
            .map(|h| h.join().expect("simulation worker panicked"))
            .collect()
    });
    let mut out = Vec::with_capacity(frames.len());
    for part in results {
        out.extend(part?);
    }
    Ok(out)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct SequenceSummary {
    pub frames: usize,
    pub points: usize,
    /// Distinct thing tracks seen in at least one scan.
    pub tracks: usize,
}

/// Builds the world, simulates every frame and writes the sequence layout
/// (`scans/`, `labels/`, `poses.txt`, `taxonomy.txt`) under `out_dir`.
pub fn generate_sequence(
    world_config: &WorldConfig,
    beam_config: &BeamConfig,
    out_dir: &Path,
) -> Result<SequenceSummary> {
    let world = build_world(world_config)?;
    let sims = simulate_all(&world, beam_config)?;
    let seq = SequenceDir::new(out_dir);
    io::create_dir(&seq.scans_dir())?;
    io::create_dir(&seq.labels_dir())?;
    let mut tracks = std::collections::BTreeSet::new();
    let mut points = 0;
    for sim in &sims {
        io::save_scan(&seq.scan_path(sim.scan.scan_index), &sim.scan)?;
        io::save_labels(&seq.label_path(sim.scan.scan_index), &sim.labels)?;
        points += sim.scan.len();
        tracks.extend(sim.track_ids.iter().copied().filter(|&t| t != 0));
    }
    io::save_poses(&seq.poses_path(), world.ego_poses())?;
    io::save_taxonomy(&seq.taxonomy_path(), &world.taxonomy)?;
    Ok(SequenceSummary {
        frames: sims.len(),
        points,
        tracks: tracks.len(),
    })
}
