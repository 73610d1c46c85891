//! Fixtures shared by the benchmarks.

use pantrack::simulator::{
    build_world, simulate_all, BeamConfig, SimulatedScan, World, WorldConfig,
};
use pantrack::{build_trio, Trio};

/// A denser sensor than the default: 48 beams give trios of about 100k points.
pub fn dense_beams() -> BeamConfig {
    let (top, bottom) = (10f64.to_radians(), -30f64.to_radians());
    BeamConfig {
        beams: (0..48)
            .map(|i| top + (bottom - top) * i as f64 / 47.0)
            .collect(),
        ..BeamConfig::default()
    }
}

pub fn scene(frames: u32, beams: &BeamConfig) -> (World, Vec<SimulatedScan>) {
    let world = build_world(&WorldConfig {
        seed: 1,
        duration_frames: frames,
        ..WorldConfig::default()
    })
    .expect("default world builds");
    let sims = simulate_all(&world, beams).expect("simulation succeeds");
    (world, sims)
}

/// The first clip of a three-frame dense scene.
pub fn dense_trio() -> (Trio, World, Vec<SimulatedScan>) {
    let (world, sims) = scene(3, &dense_beams());
    let p = world.ego_poses();
    let trio = build_trio(
        [&sims[0].scan, &sims[1].scan, &sims[2].scan],
        [&p[0], &p[1], &p[2]],
    )
    .expect("trio builds");
    (trio, world, sims)
}
