//! Splits fused clip predictions back into per-scan labels with clip-local
//! instance ids, then stitches consecutive clips into sequence-wide track
//! ids by voting over the points the clips share.

use std::collections::HashMap;

use crate::error::{Error, Result};
use crate::fusion::{fuse_prediction, FusionConfig};
use crate::geometry::{build_trio, Trio, TRIO_LEN};
use crate::oracle::{Segmenter, SegmenterView};
use crate::projection::{
    knn_unproject, project, KnnConfig, LabelGrid, ProjectionConfig, RangeImage,
};
use crate::types::{PanopticLabel, RigidPose, Scan, Taxonomy};

/// Labels of one member scan, in source point order.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ScanLabels {
    pub scan_index: u32,
    pub labels: Vec<PanopticLabel>,
}

/// Per-scan labels of one clip, oldest scan first. An instance id shared by
/// two member scans denotes the same object.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct LocalTrioResult {
    pub reference_index: u32,
    pub scans: Vec<ScanLabels>,
}

impl LocalTrioResult {
    /// Splits per-merged-point labels by provenance.
    pub fn from_clip_labels(trio: &Trio, labels: &[PanopticLabel]) -> Result<Self> {
        let parts = trio.segregate(labels)?;
        Ok(Self {
            reference_index: trio.reference_index,
            scans: trio
                .members()
                .iter()
                .zip(parts)
                .map(|(m, labels)| ScanLabels {
                    scan_index: m.scan_index,
                    labels,
                })
                .collect(),
        })
    }

    /// Distinct `(class, instance)` pairs with a non-zero instance, in order
    /// of first appearance (oldest scan first, then point order).
    pub fn instances_in_order(&self) -> Vec<PanopticLabel> {
        let mut seen = HashMap::new();
        let mut order = Vec::new();
        for l in self.scans.iter().flat_map(|s| &s.labels) {
            if l.instance != 0 && seen.insert(*l, ()).is_none() {
                order.push(*l);
            }
        }
        order
    }
}

/// Re-projects the fused grid onto every clip point and splits the result
/// by source scan.
pub fn segregate(
    trio: &Trio,
    fused: &LabelGrid,
    image: &RangeImage,
    knn: &KnnConfig,
    void: PanopticLabel,
) -> Result<LocalTrioResult> {
    let labels = knn_unproject(image, fused, trio, knn, void)?;
    LocalTrioResult::from_clip_labels(trio, &labels)
}

/// Sequential association state.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct TrackLedger {
    next_global_id: u32,
    /// Global labels of the previous clip's two newest scans.
    memory: Vec<ScanLabels>,
}

impl Default for TrackLedger {
    fn default() -> Self {
        Self::new()
    }
}

impl TrackLedger {
    pub fn new() -> Self {
        Self {
            next_global_id: 1,
            memory: Vec::new(),
        }
    }

    pub fn next_global_id(&self) -> u32 {
        self.next_global_id
    }

    pub fn memory(&self) -> &[ScanLabels] {
        &self.memory
    }

    pub fn is_empty(&self) -> bool {
        self.memory.is_empty()
    }

    fn fresh_id(&mut self) -> Result<u32> {
        let id = self.next_global_id;
        self.next_global_id = id
            .checked_add(1)
            .ok_or_else(|| Error::Range("global track ids exhausted".into()))?;
        Ok(id)
    }

    /// Maps the clip's local instances to global track ids.
    ///
    /// A local instance `l` of class `c` receives one vote for global id `g`
    /// from every shared point that carries `l` now and `(c, g)` in memory.
    /// Pairs are matched greedily one-to-one by descending votes (ties:
    /// smaller `g`, then earlier first appearance of `l`) as long as votes
    /// reach `min_overlap`. Unmatched local instances get fresh ids in order
    /// of first appearance.
    pub fn associate(
        &mut self,
        current: &LocalTrioResult,
        min_overlap: usize,
    ) -> Result<Vec<ScanLabels>> {
        let min_overlap = min_overlap.max(1);
        let order = current.instances_in_order();
        let rank: HashMap<PanopticLabel, usize> =
            order.iter().enumerate().map(|(i, l)| (*l, i)).collect();

        let mut votes: HashMap<(usize, u32), usize> = HashMap::new();
        if !self.memory.is_empty() {
            let shared = self.memory.len();
            if current.scans.len() < shared + 1 {
                return Err(Error::Sequence(format!(
                    "clip {} has {} scans, ledger remembers {shared}",
                    current.reference_index,
                    current.scans.len()
                )));
            }
            for (mem, cur) in self.memory.iter().zip(&current.scans) {
                if mem.scan_index != cur.scan_index {
                    return Err(Error::Sequence(format!(
                        "clip {} starts at scan {}, ledger remembers scan {}",
                        current.reference_index, cur.scan_index, mem.scan_index
                    )));
                }
                if mem.labels.len() != cur.labels.len() {
                    return Err(Error::Consistency(format!(
                        "scan {}: {} remembered labels, {} current",
                        cur.scan_index,
                        mem.labels.len(),
                        cur.labels.len()
                    )));
                }
                for (m, c) in mem.labels.iter().zip(&cur.labels) {
                    if c.instance != 0 && m.instance != 0 && c.class == m.class {
                        *votes.entry((rank[c], m.instance)).or_default() += 1;
                    }
                }
            }
        }

        let mut pairs: Vec<((usize, u32), usize)> = votes
            .into_iter()
            .filter(|(_, v)| *v >= min_overlap)
            .collect();
        pairs.sort_unstable_by(|a, b| {
            b.1.cmp(&a.1)
                .then(a.0 .1.cmp(&b.0 .1))
                .then(a.0 .0.cmp(&b.0 .0))
        });
        let mut global: Vec<Option<u32>> = vec![None; order.len()];
        let mut taken: HashMap<u32, ()> = HashMap::new();
        for ((l, g), _) in pairs {
            if global[l].is_none() && !taken.contains_key(&g) {
                global[l] = Some(g);
                taken.insert(g, ());
            }
        }
        for g in global.iter_mut().filter(|g| g.is_none()) {
            *g = Some(self.fresh_id()?);
        }

        let out: Vec<ScanLabels> = current
            .scans
            .iter()
            .map(|s| ScanLabels {
                scan_index: s.scan_index,
                labels: s
                    .labels
                    .iter()
                    .map(|l| match l.instance {
                        0 => *l,
                        _ => PanopticLabel::new(
                            l.class,
                            global[rank[l]].expect("every instance mapped"),
                        ),
                    })
                    .collect(),
            })
            .collect();
        let keep = TRIO_LEN - 1;
        self.memory = out[out.len().saturating_sub(keep)..].to_vec();
        Ok(out)
    }
}

/// Whether the segmenter sees a range image or the points themselves.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum ProjectionMode {
    /// Project, segment, fuse on the image, KNN back to points.
    #[default]
    RangeImage,
    /// Segment and fuse on the clip's points directly (a 1×N grid); no
    /// projection losses.
    Bypass,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PipelineConfig {
    pub projection: ProjectionConfig,
    pub knn: KnnConfig,
    pub fusion: FusionConfig,
    pub min_overlap: usize,
    pub mode: ProjectionMode,
}

impl Default for PipelineConfig {
    fn default() -> Self {
        Self {
            projection: ProjectionConfig::default(),
            knn: KnnConfig::default(),
            fusion: FusionConfig::default(),
            min_overlap: 1,
            mode: ProjectionMode::RangeImage,
        }
    }
}

impl PipelineConfig {
    pub fn validate(&self) -> Result<()> {
        self.projection.validate()?;
        self.knn.validate()?;
        self.fusion.validate()?;
        if self.min_overlap == 0 {
            return Err(Error::Config("min_overlap must be at least 1".into()));
        }
        Ok(())
    }
}

/// Runs segmentation, fusion and re-projection on one clip.
pub fn local_trio_result(
    trio: &Trio,
    segmenter: &mut dyn Segmenter,
    taxonomy: &Taxonomy,
    config: &PipelineConfig,
) -> Result<LocalTrioResult> {
    match config.mode {
        ProjectionMode::RangeImage => {
            let image = project(trio, &config.projection)?;
            let pred = segmenter.segment(trio, SegmenterView::Image(&image))?;
            let fused = fuse_prediction(&pred, taxonomy, &config.fusion)?;
            segregate(trio, &fused, &image, &config.knn, taxonomy.void_label())
        }
        ProjectionMode::Bypass => {
            let pred = segmenter.segment(trio, SegmenterView::Points)?;
            let fused = fuse_prediction(&pred, taxonomy, &config.fusion)?;
            LocalTrioResult::from_clip_labels(trio, &fused.labels)
        }
    }
}

/// Tracks a whole sequence. Clip `k` (scans `k-2..=k`) emits scan `k`; the
/// first clip also emits scans 0 and 1. Returns labels per scan, in
/// sequence order.
pub fn run_sequence(
    scans: &[Scan],
    poses: &[RigidPose],
    segmenter: &mut dyn Segmenter,
    taxonomy: &Taxonomy,
    config: &PipelineConfig,
) -> Result<Vec<Vec<PanopticLabel>>> {
    run_sequence_with(scans, poses, segmenter, taxonomy, config, |_| {})
}

/// As [`run_sequence`], calling `inspect` on every clip's local result
/// before association. The hook may rewrite local ids.
pub fn run_sequence_with(
    scans: &[Scan],
    poses: &[RigidPose],
    segmenter: &mut dyn Segmenter,
    taxonomy: &Taxonomy,
    config: &PipelineConfig,
    mut inspect: impl FnMut(&mut LocalTrioResult),
) -> Result<Vec<Vec<PanopticLabel>>> {
    config.validate()?;
    if scans.len() < TRIO_LEN {
        return Err(Error::Sequence(format!(
            "tracking needs at least {TRIO_LEN} scans, got {}",
            scans.len()
        )));
    }
    if poses.len() != scans.len() {
        return Err(Error::Consistency(format!(
            "{} scans but {} poses",
            scans.len(),
            poses.len()
        )));
    }
    let mut ledger = TrackLedger::new();
    let mut emitted: Vec<Option<Vec<PanopticLabel>>> = vec![None; scans.len()];
    for k in TRIO_LEN - 1..scans.len() {
        let trio = build_trio(
            [&scans[k - 2], &scans[k - 1], &scans[k]],
            [&poses[k - 2], &poses[k - 1], &poses[k]],
        )?;
        let mut local = local_trio_result(&trio, segmenter, taxonomy, config)?;
        inspect(&mut local);
        let global = ledger.associate(&local, config.min_overlap)?;
        let first = k == TRIO_LEN - 1;
        for (slot, out) in global.into_iter().enumerate() {
            if first || slot == TRIO_LEN - 1 {
                emitted[k + 1 + slot - TRIO_LEN] = Some(out.labels);
            }
        }
        log::debug!("clip {k}: next global id {}", ledger.next_global_id());
    }
    Ok(emitted
        .into_iter()
        .map(|e| e.expect("every scan emitted once"))
        .collect())
}

#[cfg(test)]
mod tests {
    use super::*;

    const CAR: u16 = 10;
    const PED: u16 = 13;
    const ROAD: u16 = 1;

    fn local(reference_index: u32, scans: Vec<Vec<PanopticLabel>>) -> LocalTrioResult {
        let first = reference_index + 1 - scans.len() as u32;
        LocalTrioResult {
            reference_index,
            scans: scans
                .into_iter()
                .enumerate()
                .map(|(i, labels)| ScanLabels {
                    scan_index: first + i as u32,
                    labels,
                })
                .collect(),
        }
    }

    #[test]
    fn first_clip_numbers_by_first_appearance() {
        let mut ledger = TrackLedger::new();
        let a = PanopticLabel::new(CAR, 7);
        let b = PanopticLabel::new(CAR, 9);
        let cur = local(
            2,
            vec![vec![a], vec![a, b], vec![PanopticLabel::stuff(ROAD), b]],
        );
        let out = ledger.associate(&cur, 1).unwrap();
        assert_eq!(out[0].labels, vec![PanopticLabel::new(CAR, 1)]);
        assert_eq!(
            out[1].labels,
            vec![PanopticLabel::new(CAR, 1), PanopticLabel::new(CAR, 2)]
        );
        assert_eq!(out[2].labels[0], PanopticLabel::stuff(ROAD));
        assert_eq!(ledger.next_global_id(), 3);
        assert_eq!(ledger.memory().len(), 2);
        assert_eq!(ledger.memory()[0].scan_index, 1);
    }

    #[test]
    fn overlap_votes_carry_ids_forward() {
        let mut ledger = TrackLedger::new();
        let g1 = PanopticLabel::new(CAR, 1);
        let g2 = PanopticLabel::new(CAR, 2);
        let mut s1 = vec![g1; 150];
        s1.extend(vec![g2; 50]);
        ledger
            .associate(&local(2, vec![vec![], s1.clone(), vec![g1; 10]]), 1)
            .unwrap();
        assert_eq!(ledger.next_global_id(), 3);

        let l3 = PanopticLabel::new(CAR, 3);
        let l4 = PanopticLabel::new(CAR, 4);
        let mut cur1 = vec![l3; 150];
        cur1.extend(vec![l4; 50]);
        let out = ledger
            .associate(&local(3, vec![cur1, vec![l3; 10], vec![l3; 5]]), 1)
            .unwrap();
        assert!(out[2].labels.iter().all(|l| *l == g1));
        assert!(out[0].labels[150..].iter().all(|l| *l == g2));
    }

    #[test]
    fn class_flip_gets_fresh_id() {
        let mut ledger = TrackLedger::new();
        let g1 = PanopticLabel::new(CAR, 1);
        ledger
            .associate(&local(2, vec![vec![], vec![g1; 20], vec![g1; 20]]), 1)
            .unwrap();
        let ped = PanopticLabel::new(PED, 5);
        let out = ledger
            .associate(
                &local(3, vec![vec![ped; 20], vec![ped; 20], vec![ped; 3]]),
                1,
            )
            .unwrap();
        assert_eq!(out[2].labels[0], PanopticLabel::new(PED, 2));
    }

    #[test]
    fn ledger_rejects_wrong_scans() {
        let mut ledger = TrackLedger::new();
        ledger
            .associate(&local(2, vec![vec![], vec![], vec![]]), 1)
            .unwrap();
        assert!(matches!(
            ledger.associate(&local(5, vec![vec![], vec![], vec![]]), 1),
            Err(Error::Sequence(_))
        ));
    }

    #[test]
    fn min_overlap_gates_matches() {
        let mut ledger = TrackLedger::new();
        let g1 = PanopticLabel::new(CAR, 1);
        ledger
            .associate(&local(2, vec![vec![], vec![g1; 3], vec![]]), 1)
            .unwrap();
        let l = PanopticLabel::new(CAR, 8);
        let out = ledger
            .associate(&local(3, vec![vec![l; 3], vec![], vec![l]]), 4)
            .unwrap();
        assert_eq!(out[2].labels[0], PanopticLabel::new(CAR, 2));
    }

    #[test]
    fn one_to_one_matching() {
        // Two local instances both overlap global 1; the larger vote wins and
        // the other gets a fresh id.
        let mut ledger = TrackLedger::new();
        let g1 = PanopticLabel::new(CAR, 1);
        ledger
            .associate(&local(2, vec![vec![], vec![g1; 30], vec![]]), 1)
            .unwrap();
        let (a, b) = (PanopticLabel::new(CAR, 1), PanopticLabel::new(CAR, 2));
        let mut s = vec![a; 10];
        s.extend(vec![b; 20]);
        let out = ledger
            .associate(&local(3, vec![s, vec![], vec![]]), 1)
            .unwrap();
        assert_eq!(out[0].labels[0], PanopticLabel::new(CAR, 2));
        assert_eq!(out[0].labels[29], PanopticLabel::new(CAR, 1));
    }
}
