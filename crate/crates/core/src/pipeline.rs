//! Directory-level drivers: run the tracker or the oracle over a sequence
//! directory and write the results in the sequence file formats.

use std::collections::BTreeSet;
use std::path::Path;

use crate::error::{Error, Result};
use crate::geometry::{build_trio, TRIO_LEN};
use crate::io::{self, frame_name, SequenceDir};
use crate::oracle::{save_predictions, NoiseConfig, OracleSegmenter, Segmenter, SegmenterView};
use crate::projection::project;
use crate::tracker::{run_sequence, PipelineConfig, ProjectionMode};
use crate::types::{PanopticLabel, Scan, Taxonomy};

/// Loaded contents of a sequence directory.
#[derive(Debug, Clone)]
pub struct Sequence {
    pub scans: Vec<Scan>,
    pub poses: Vec<crate::types::RigidPose>,
    pub taxonomy: Taxonomy,
}

impl Sequence {
    /// Reads scans, poses and taxonomy. Labels are read separately since
    /// prediction-only directories have none.
    pub fn load(dir: &SequenceDir) -> Result<Self> {
        let scans = dir.load_scans()?;
        let poses = dir.load_poses()?;
        if poses.len() != scans.len() {
            return Err(Error::Consistency(format!(
                "{}: {} scans but {} poses",
                dir.root().display(),
                scans.len(),
                poses.len()
            )));
        }
        let taxonomy = dir.load_taxonomy()?;
        Ok(Self {
            scans,
            poses,
            taxonomy,
        })
    }

    /// Ground-truth labels of every scan.
    pub fn load_ground_truth(&self, dir: &SequenceDir) -> Result<Vec<Vec<PanopticLabel>>> {
        self.scans
            .iter()
            .map(|s| dir.load_labels(s.scan_index, s.len()))
            .collect()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct TrackSummary {
    pub frames: usize,
    pub points: usize,
    /// Distinct global thing ids emitted.
    pub tracks: usize,
}

/// Tracks every scan of `seq` and writes `out_dir/NNNNNN.label`.
pub fn track_sequence(
    seq: &Sequence,
    segmenter: &mut dyn Segmenter,
    config: &PipelineConfig,
    out_dir: &Path,
) -> Result<TrackSummary> {
    let labels = run_sequence(&seq.scans, &seq.poses, segmenter, &seq.taxonomy, config)?;
    io::create_dir(out_dir)?;
    let mut tracks = BTreeSet::new();
    let mut points = 0;
    for (scan, l) in seq.scans.iter().zip(&labels) {
        io::save_labels(&out_dir.join(frame_name(scan.scan_index, "label")), l)?;
        points += l.len();
        tracks.extend(
            l.iter()
                .filter(|x| seq.taxonomy.is_thing(x.class))
                .map(|x| x.instance),
        );
    }
    Ok(TrackSummary {
        frames: labels.len(),
        points,
        tracks: tracks.len(),
    })
}

/// Oracle over the sequence's own ground truth.
pub fn oracle_for(
    seq: &Sequence,
    dir: &SequenceDir,
    noise: NoiseConfig,
) -> Result<OracleSegmenter> {
    OracleSegmenter::new(seq.taxonomy.clone(), noise, seq.load_ground_truth(dir)?)
}

/// Writes the oracle's per-clip predictions to `out_dir`, keyed by each
/// clip's newest scan index, for later use with the file segmenter.
/// Returns the number of clips written.
pub fn infer_sequence(
    seq: &Sequence,
    segmenter: &mut dyn Segmenter,
    config: &PipelineConfig,
    out_dir: &Path,
) -> Result<usize> {
    config.validate()?;
    if seq.scans.len() < TRIO_LEN {
        return Err(Error::Sequence(format!(
            "inference needs at least {TRIO_LEN} scans, got {}",
            seq.scans.len()
        )));
    }
    io::create_dir(out_dir)?;
    let mut written = 0;
    for k in TRIO_LEN - 1..seq.scans.len() {
        let trio = build_trio(
            [&seq.scans[k - 2], &seq.scans[k - 1], &seq.scans[k]],
            [&seq.poses[k - 2], &seq.poses[k - 1], &seq.poses[k]],
        )?;
        let pred = match config.mode {
            ProjectionMode::RangeImage => {
                let image = project(&trio, &config.projection)?;
                segmenter.segment(&trio, SegmenterView::Image(&image))?
            }
            ProjectionMode::Bypass => segmenter.segment(&trio, SegmenterView::Points)?,
        };
        save_predictions(out_dir, trio.reference_index, &pred)?;
        written += 1;
    }
    Ok(written)
}
