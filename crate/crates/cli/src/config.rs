//! Flat `key = value` run configuration with dotted keys.
//!
//! Built-in defaults are overridden by the config file, which is in turn
//! overridden by command-line flags.

use std::path::Path;

use pantrack::oracle::NoiseConfig;
use pantrack::simulator::{BeamConfig, EgoPath, WorldConfig};
use pantrack::{PipelineConfig, ProjectionMode};

/// A problem with the invocation itself; exits with status 2.
#[derive(Debug, thiserror::Error)]
#[error("{0}")]
pub struct UsageError(pub String);

#[derive(Debug, Clone)]
pub struct RunConfig {
    pub pipeline: PipelineConfig,
    pub noise: NoiseConfig,
    pub world: WorldConfig,
    /// Azimuth steps, range and reflectance; elevations come from the fan.
    pub sensor: BeamConfig,
    pub sensor_beams: usize,
    /// Degrees above and below the horizon of the top and bottom beams.
    pub sensor_fov_up: f64,
    pub sensor_fov_down: f64,
}

impl Default for RunConfig {
    fn default() -> Self {
        Self {
            pipeline: PipelineConfig::default(),
            noise: NoiseConfig::default(),
            world: WorldConfig::default(),
            sensor: BeamConfig::default(),
            sensor_beams: 32,
            sensor_fov_up: 10.0,
            sensor_fov_down: 30.0,
        }
    }
}

/// Every accepted key, for error messages.
pub const KEYS: &[&str] = &[
    "projection.width",
    "projection.height",
    "projection.fov_up",
    "projection.fov_down",
    "projection.min_range",
    "knn.k",
    "knn.window",
    "knn.cutoff",
    "knn.sigma",
    "fusion.score_thresh",
    "fusion.overlap_thresh",
    "fusion.min_stuff_area",
    "tracker.min_overlap",
    "tracker.bypass_projection",
    "noise.class_confusion_rate",
    "noise.boundary_jitter_px",
    "noise.instance_split_prob",
    "noise.instance_merge_prob",
    "noise.drop_prob",
    "noise.score_floor",
    "noise.seed",
    "world.seed",
    "world.frames",
    "world.ego_speed",
    "world.yaw_rate",
    "world.sensor_height",
    "world.road_half_width",
    "world.sidewalk_width",
    "world.velocity_period",
    "world.vehicle_speed_max",
    "world.pedestrian_speed_max",
    "world.count.car",
    "world.count.truck",
    "world.count.bus",
    "world.count.bicycle",
    "world.count.motorcycle",
    "world.count.pedestrian",
    "world.count.barrier",
    "world.count.traffic_cone",
    "world.count.building",
    "world.count.tree",
    "world.count.pole",
    "sensor.beams",
    "sensor.fov_up",
    "sensor.fov_down",
    "sensor.azimuth_steps",
    "sensor.max_range",
];

fn parse<T: std::str::FromStr>(key: &str, value: &str) -> Result<T, UsageError> {
    value
        .parse()
        .map_err(|_| UsageError(format!("config key {key}: cannot parse {value:?}")))
}

fn parse_bool(key: &str, value: &str) -> Result<bool, UsageError> {
    match value {
        "true" | "1" | "yes" => Ok(true),
        "false" | "0" | "no" => Ok(false),
        _ => Err(UsageError(format!(
            "config key {key}: expected true or false, got {value:?}"
        ))),
    }
}

/// Evenly spaced elevations from `up` down to `-down` degrees.
fn beam_fan(count: usize, up: f64, down: f64) -> Vec<f64> {
    if count == 1 {
        return vec![up.to_radians()];
    }
    (0..count)
        .map(|i| (up - (up + down) * i as f64 / (count - 1) as f64).to_radians())
        .collect()
}

impl RunConfig {
    pub fn load(path: Option<&Path>) -> anyhow::Result<Self> {
        let mut cfg = Self::default();
        if let Some(path) = path {
            let text = std::fs::read_to_string(path)
                .map_err(|e| UsageError(format!("cannot read config {}: {e}", path.display())))?;
            cfg.apply_text(&text)?;
        }
        Ok(cfg)
    }

    pub fn apply_text(&mut self, text: &str) -> Result<(), UsageError> {
        for (n, line) in text.lines().enumerate() {
            let line = line.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let (key, value) = line.split_once('=').ok_or_else(|| {
                UsageError(format!("config line {}: expected key = value", n + 1))
            })?;
            let (key, value) = (key.trim(), value.trim());
            self.set(key, value)?;
        }
        Ok(())
    }

    pub fn beams(&self) -> BeamConfig {
        BeamConfig {
            beams: beam_fan(self.sensor_beams, self.sensor_fov_up, self.sensor_fov_down),
            ..self.sensor.clone()
        }
    }

    pub fn set(&mut self, key: &str, value: &str) -> Result<(), UsageError> {
        let p = &mut self.pipeline;
        let w = &mut self.world;
        match key {
            "projection.width" => p.projection.width = parse(key, value)?,
            "projection.height" => p.projection.height = parse(key, value)?,
            "projection.fov_up" => p.projection.fov_up = parse::<f64>(key, value)?.to_radians(),
            "projection.fov_down" => p.projection.fov_down = parse::<f64>(key, value)?.to_radians(),
            "projection.min_range" => p.projection.min_range = parse(key, value)?,
            "knn.k" => p.knn.k = parse(key, value)?,
            "knn.window" => p.knn.window = parse(key, value)?,
            "knn.cutoff" => p.knn.range_cutoff = parse(key, value)?,
            "knn.sigma" => p.knn.sigma = parse(key, value)?,
            "fusion.score_thresh" => p.fusion.score_thresh = parse(key, value)?,
            "fusion.overlap_thresh" => p.fusion.overlap_thresh = parse(key, value)?,
            "fusion.min_stuff_area" => p.fusion.min_stuff_area = parse(key, value)?,
            "tracker.min_overlap" => p.min_overlap = parse(key, value)?,
            "tracker.bypass_projection" => {
                p.mode = if parse_bool(key, value)? {
                    ProjectionMode::Bypass
                } else {
                    ProjectionMode::RangeImage
                }
            }
            "noise.class_confusion_rate" => self.noise.class_confusion_rate = parse(key, value)?,
            "noise.boundary_jitter_px" => self.noise.boundary_jitter_px = parse(key, value)?,
            "noise.instance_split_prob" => self.noise.instance_split_prob = parse(key, value)?,
            "noise.instance_merge_prob" => self.noise.instance_merge_prob = parse(key, value)?,
            "noise.drop_prob" => self.noise.drop_prob = parse(key, value)?,
            "noise.score_floor" => self.noise.score_floor = parse(key, value)?,
            "noise.seed" => self.noise.seed = parse(key, value)?,
            "world.seed" => w.seed = parse(key, value)?,
            "world.frames" => w.duration_frames = parse(key, value)?,
            "world.ego_speed" => w.ego_speed = parse(key, value)?,
            "world.yaw_rate" => {
                let rate: f64 = parse(key, value)?;
                w.path = if rate == 0.0 {
                    EgoPath::Line
                } else {
                    EgoPath::Arc { yaw_rate: rate }
                };
            }
            "world.sensor_height" => w.sensor_height = parse(key, value)?,
            "world.road_half_width" => w.road_half_width = parse(key, value)?,
            "world.sidewalk_width" => w.sidewalk_width = parse(key, value)?,
            "world.velocity_period" => w.velocity_period = parse(key, value)?,
            "world.vehicle_speed_max" => w.vehicle_speed.max = parse(key, value)?,
            "world.pedestrian_speed_max" => w.pedestrian_speed.max = parse(key, value)?,
            "world.count.car" => w.counts.car = parse(key, value)?,
            "world.count.truck" => w.counts.truck = parse(key, value)?,
            "world.count.bus" => w.counts.bus = parse(key, value)?,
            "world.count.bicycle" => w.counts.bicycle = parse(key, value)?,
            "world.count.motorcycle" => w.counts.motorcycle = parse(key, value)?,
            "world.count.pedestrian" => w.counts.pedestrian = parse(key, value)?,
            "world.count.barrier" => w.counts.barrier = parse(key, value)?,
            "world.count.traffic_cone" => w.counts.traffic_cone = parse(key, value)?,
            "world.count.building" => w.counts.building = parse(key, value)?,
            "world.count.tree" => w.counts.tree = parse(key, value)?,
            "world.count.pole" => w.counts.pole = parse(key, value)?,
            "sensor.azimuth_steps" => self.sensor.azimuth_steps = parse(key, value)?,
            "sensor.max_range" => self.sensor.max_range = parse(key, value)?,
            "sensor.beams" => {
                self.sensor_beams = parse(key, value)?;
                if self.sensor_beams == 0 {
                    return Err(UsageError("sensor.beams must be at least 1".into()));
                }
            }
            "sensor.fov_up" => self.sensor_fov_up = parse(key, value)?,
            "sensor.fov_down" => self.sensor_fov_down = parse(key, value)?,
            _ => {
                return Err(UsageError(format!(
                    "unknown config key {key:?}; known keys: {}",
                    KEYS.join(", ")
                )))
            }
        }
        Ok(())
    }
}
