#![allow(dead_code)]

pub mod brute;

use std::collections::{BTreeMap, BTreeSet};

use pantrack::simulator::{
    build_world, simulate_all, BeamConfig, SimulatedScan, World, WorldConfig,
};
use pantrack::{ClassKind, PanopticLabel, Taxonomy};
use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

pub fn tax() -> Taxonomy {
    Taxonomy::panoptic_default()
}

/// Void plus the given kinds, named `c1`, `c2`, ...
pub fn small_taxonomy(kinds: &[ClassKind]) -> Taxonomy {
    let mut entries = vec![("void".to_string(), ClassKind::Void)];
    entries.extend(
        kinds
            .iter()
            .enumerate()
            .map(|(i, k)| (format!("c{}", i + 1), *k)),
    );
    Taxonomy::new(entries).unwrap()
}

/// A random micro-sequence: up to 4 frames of up to 30 points, up to 3
/// evaluated classes and up to 4 ground-truth instances. Predictions are
/// perturbed copies of the ground truth so that matches, misses, splits and
/// switches all occur.
pub struct MicroCase {
    pub taxonomy: Taxonomy,
    pub pred: Vec<Vec<PanopticLabel>>,
    pub gt: Vec<Vec<PanopticLabel>>,
}

pub fn micro_case(seed: u64) -> MicroCase {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let n_classes = rng.random_range(1..=3usize);
    let mut kinds: Vec<ClassKind> = (0..n_classes)
        .map(|_| {
            if rng.random_bool(0.5) {
                ClassKind::Thing
            } else {
                ClassKind::Stuff
            }
        })
        .collect();
    if !kinds.contains(&ClassKind::Thing) && rng.random_bool(0.7) {
        kinds[0] = ClassKind::Thing;
    }
    let taxonomy = small_taxonomy(&kinds);
    let things: Vec<u16> = taxonomy.thing_classes().collect();
    let stuff: Vec<u16> = taxonomy.stuff_classes().collect();

    let n_inst = if things.is_empty() {
        0
    } else {
        rng.random_range(1..=4u32)
    };
    let inst_class: Vec<u16> = (0..n_inst)
        .map(|_| things[rng.random_range(0..things.len())])
        .collect();

    let frames = rng.random_range(1..=4usize);
    let points = rng.random_range(1..=30usize);
    let mut gt = Vec::with_capacity(frames);
    for _ in 0..frames {
        let frame: Vec<PanopticLabel> = (0..points)
            .map(|_| {
                let roll = rng.random_range(0..10);
                if roll == 0 {
                    PanopticLabel::VOID
                } else if roll < 6 && n_inst > 0 {
                    let i = rng.random_range(0..n_inst);
                    PanopticLabel::new(inst_class[i as usize], i + 1)
                } else if !stuff.is_empty() {
                    PanopticLabel::stuff(stuff[rng.random_range(0..stuff.len())])
                } else if n_inst > 0 {
                    PanopticLabel::new(inst_class[0], 1)
                } else {
                    PanopticLabel::VOID
                }
            })
            .collect();
        gt.push(frame);
    }

    // per-frame relabeling of gt instances, occasionally switching identity
    let classes = taxonomy.class_count() as u16;
    let mut pred = Vec::with_capacity(frames);
    for g in &gt {
        let mut rename: Vec<u32> = (1..=4).collect();
        if rng.random_bool(0.3) {
            rename.shuffle(&mut rng);
        }
        let frame = g
            .iter()
            .map(|l| {
                let roll = rng.random_range(0..100);
                if roll < 12 {
                    let c = rng.random_range(0..classes);
                    let inst = if taxonomy.is_thing(c) {
                        rng.random_range(0..=4)
                    } else {
                        0
                    };
                    PanopticLabel::new(c, inst)
                } else if roll < 18 && l.instance != 0 {
                    PanopticLabel::new(l.class, rng.random_range(1..=5))
                } else if l.instance != 0 {
                    PanopticLabel::new(l.class, rename[(l.instance - 1) as usize])
                } else {
                    *l
                }
            })
            .collect();
        pred.push(frame);
    }
    MicroCase { taxonomy, pred, gt }
}

/// Frames in which each thing track has points.
pub fn track_frames(sims: &[SimulatedScan]) -> BTreeMap<u32, Vec<usize>> {
    let mut seen: BTreeMap<u32, Vec<usize>> = BTreeMap::new();
    for (f, s) in sims.iter().enumerate() {
        let ids: BTreeSet<u32> = s.track_ids.iter().copied().filter(|&t| t != 0).collect();
        for id in ids {
            seen.entry(id).or_default().push(f);
        }
    }
    seen
}

/// True when no track vanishes for two or more frames and comes back.
/// Consecutive clips share two scans, so longer gaps cannot be bridged.
pub fn gap_free(sims: &[SimulatedScan]) -> bool {
    track_frames(sims)
        .values()
        .all(|f| f.windows(2).all(|w| w[1] - w[0] <= 2))
}

/// The default scene at the first seed (from 0) whose tracks are gap-free.
pub fn gap_free_scene(frames: u32) -> (World, Vec<SimulatedScan>) {
    for seed in 0..64 {
        let cfg = WorldConfig {
            seed,
            duration_frames: frames,
            ..WorldConfig::default()
        };
        let world = build_world(&cfg).unwrap();
        let sims = simulate_all(&world, &BeamConfig::default()).unwrap();
        if gap_free(&sims) {
            return (world, sims);
        }
    }
    panic!("no gap-free scene among 64 seeds");
}

pub fn scene(seed: u64, frames: u32) -> (World, Vec<SimulatedScan>) {
    let cfg = WorldConfig {
        seed,
        duration_frames: frames,
        ..WorldConfig::default()
    };
    let world = build_world(&cfg).unwrap();
    let sims = simulate_all(&world, &BeamConfig::default()).unwrap();
    (world, sims)
}

pub fn split_sims(sims: &[SimulatedScan]) -> (Vec<pantrack::Scan>, Vec<Vec<PanopticLabel>>) {
    (
        sims.iter().map(|s| s.scan.clone()).collect(),
        sims.iter().map(|s| s.labels.clone()).collect(),
    )
}
